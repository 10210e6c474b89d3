//! Tool registry and the bindings from tool names to domain operations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alarms::{self, Alarm, CompressedEvent, PriorityConfig, PriorityEntry, Rulebase, Suggestion};
use crate::digest::json_digest;
use crate::netmodel::{NetworkTopology, ServiceDemand};
use crate::netops::{
    self, AllocationReport, AnalysisConfig, NetworkFinding, OptimizationTrace, OptimizerConfig, SpectrumState,
};
use crate::qot::{GsnrReport, ModulationThresholds};
use crate::rag::{PrefixView, RetrievalHit, Retriever, VectorStore};

pub const ALARMS_COMPRESS: &str = "alarms.compress";
pub const ALARMS_CORRELATE: &str = "alarms.correlate";
pub const ALARMS_PRIORITY: &str = "alarms.priority_scores";
pub const RAG_RETRIEVE: &str = "rag.retrieve";
pub const NETOPS_PROVISION: &str = "netops.provision";
pub const QOT_ESTIMATE: &str = "qot.estimate_gsnr";
pub const NETOPS_ANALYZE: &str = "netops.analyze_network";
pub const NETOPS_OPTIMIZE: &str = "netops.optimize_launch_power";

/// Doc-id prefix of alarm manual entries in the knowledge store.
pub const MANUAL_PREFIX: &str = "manual/";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub args: Vec<ArgSpec>,
    /// Changes live session network state; gated behind operator approval.
    pub mutating: bool,
}

fn spec(name: &str, description: &str, args: &[(&str, &str, &str)], mutating: bool) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        description: description.into(),
        args: args
            .iter()
            .map(|(n, t, d)| ArgSpec {
                name: n.to_string(),
                ty: t.to_string(),
                description: d.to_string(),
            })
            .collect(),
        mutating,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolRegistry {
    tools: BTreeMap<String, ToolSpec>,
}

impl ToolRegistry {
    pub fn standard() -> Self {
        let mut r = ToolRegistry::default();
        let specs = [
            spec(
                ALARMS_COMPRESS,
                "Group the latest alarm batch by (alarm type, source NE)",
                &[("window_ms", "integer", "batch time window"), ("batch_cap", "integer", "alarms per batch")],
                false,
            ),
            spec(
                ALARMS_CORRELATE,
                "Pairwise correlation of compressed events from the rulebase and description similarity",
                &[("events", "integer", "number of compressed events")],
                false,
            ),
            spec(
                ALARMS_PRIORITY,
                "Importance score from severity, frequency and correlation",
                &[("weights", "object", "severity/frequency/correlation weights")],
                false,
            ),
            spec(
                RAG_RETRIEVE,
                "Top-k retrieval from the domain resource library",
                &[("query", "string", "query text"), ("k", "integer", "number of chunks")],
                false,
            ),
            spec(
                NETOPS_PROVISION,
                "k-shortest-path routing with first-fit spectrum assignment",
                &[("demands", "integer", "number of demands"), ("k", "integer", "candidate routes")],
                false,
            ),
            spec(
                QOT_ESTIMATE,
                "GN-model GSNR and margin of every carried lightpath",
                &[("demands", "integer", "number of carried demands")],
                false,
            ),
            spec(
                NETOPS_ANALYZE,
                "Margin, blocking and congestion findings",
                &[("low_margin_db", "number", "low-margin threshold"), ("congestion_threshold", "number", "link utilisation limit")],
                false,
            ),
            spec(
                NETOPS_OPTIMIZE,
                "Max-min margin launch power optimisation; applies the result to the live network",
                &[("step_db", "number", "power step"), ("max_rounds", "integer", "round limit"), ("bounds", "object", "launch power bounds")],
                true,
            ),
        ];
        for s in specs {
            r.register(s).expect("standard tool names are unique");
        }
        r
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<(), String> {
        if self.tools.contains_key(&spec.name) {
            return Err(format!("duplicate tool {}", spec.name));
        }
        self.tools.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }
}

/// Static subtask → tool map. `None` for unmapped kinds.
pub fn subtask_tools(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "compress" => &[ALARMS_COMPRESS],
        "prioritize" => &[ALARMS_CORRELATE, ALARMS_PRIORITY],
        "suggest" => &[RAG_RETRIEVE],
        "qot_estimate" => &[NETOPS_PROVISION, QOT_ESTIMATE],
        "analyze" => &[NETOPS_ANALYZE],
        "optimize" => &[NETOPS_OPTIMIZE],
        "answer" => &[RAG_RETRIEVE],
        _ => return None,
    })
}

/// Live network state of a session: the only thing mutating tools touch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub spectrum: SpectrumState,
    pub launch_dbm: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationReport>,
}

impl NetworkState {
    pub fn digest(&self) -> String {
        json_digest(self)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionState {
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<NetworkTopology>,
    #[serde(default)]
    pub demands: Vec<ServiceDemand>,
    #[serde(default)]
    pub alarms: Vec<Alarm>,
    #[serde(default)]
    pub network: NetworkState,
}

impl SessionState {
    /// Demands with the live launch power profile applied.
    pub fn effective_demands(&self) -> Vec<ServiceDemand> {
        self.demands
            .iter()
            .map(|d| {
                let mut d = d.clone();
                if let Some(&p) = self.network.launch_dbm.get(&d.id) {
                    d.launch_power_dbm = p;
                }
                d
            })
            .collect()
    }

    fn topology(&self) -> Result<&NetworkTopology, String> {
        self.topology.as_ref().ok_or_else(|| "session has no topology".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub window_ms: u64,
    pub batch_cap: usize,
    pub priority: PriorityConfig,
    pub suggest_k: usize,
    pub qa_k: usize,
    pub k_paths: usize,
    pub thresholds: ModulationThresholds,
    pub analysis: AnalysisConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            window_ms: alarms::DEFAULT_WINDOW_MS,
            batch_cap: alarms::DEFAULT_BATCH_CAP,
            priority: PriorityConfig::default(),
            suggest_k: 3,
            qa_k: 4,
            k_paths: 3,
            thresholds: ModulationThresholds::default(),
            analysis: AnalysisConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

pub struct ToolEnv<'a> {
    pub cfg: &'a DomainConfig,
    pub store: &'a VectorStore,
    pub rulebase: &'a Rulebase,
}

/// Typed results of earlier subtasks in the same run.
#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    pub events: Option<Vec<CompressedEvent>>,
    pub correlation: Option<Vec<Vec<f64>>>,
    pub ranked: Option<Vec<PriorityEntry>>,
    pub suggestion: Option<Suggestion>,
    pub hits: Option<Vec<RetrievalHit>>,
    pub allocation: Option<AllocationReport>,
    pub gsnr: Option<BTreeMap<String, GsnrReport>>,
    pub findings: Option<Vec<NetworkFinding>>,
    pub trace: Option<OptimizationTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn need<'b, T>(v: &'b Option<T>, what: &str) -> Result<&'b T, String> {
    v.as_ref().ok_or_else(|| format!("{what} is not available from earlier subtasks"))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("domain types serialise")
}

/// Runs one tool. Returns the logged arguments and the raw result, or the
/// arguments and an error message.
pub fn run_tool(
    tool: &str,
    subtask_kind: &str,
    query: &str,
    env: &ToolEnv<'_>,
    session: &mut SessionState,
    board: &mut Blackboard,
) -> (Value, Result<Value, String>) {
    let cfg = env.cfg;
    match tool {
        ALARMS_COMPRESS => {
            let args = json!({"window_ms": cfg.window_ms, "batch_cap": cfg.batch_cap, "alarms": session.alarms.len()});
            let result = alarms::window_batches(&session.alarms, cfg.window_ms, cfg.batch_cap)
                .map_err(|e| e.to_string())
                .and_then(|b| {
                    let batch = b.last().ok_or("no alarms ingested in this session")?;
                    let events = alarms::compress(&batch.alarms);
                    let v = to_value(&events);
                    board.events = Some(events);
                    Ok(v)
                });
            let args = match &result {
                Ok(_) => {
                    let batches = alarms::window_batches(&session.alarms, cfg.window_ms, cfg.batch_cap).unwrap_or_default();
                    let last = batches.last();
                    json!({
                        "window_ms": cfg.window_ms,
                        "batch_cap": cfg.batch_cap,
                        "batch_index": batches.len().saturating_sub(1),
                        "batch_size": last.map_or(0, |b| b.alarms.len()),
                        "window_start": last.map_or(0, |b| b.window_start),
                    })
                }
                Err(_) => args,
            };
            (args, result)
        }
        ALARMS_CORRELATE => {
            let n = board.events.as_ref().map_or(0, Vec::len);
            let args = json!({"events": n, "rules": env.rulebase.rules.len()});
            let result = need(&board.events, "compressed events").map(|events| {
                let m = alarms::correlate(events, env.store.embedder(), env.rulebase);
                let v = to_value(&m);
                board.correlation = Some(m);
                v
            });
            (args, result)
        }
        ALARMS_PRIORITY => {
            let args = json!({"weights": cfg.priority.weights, "severity_map": cfg.priority.severity_map});
            let result = need(&board.events, "compressed events")
                .and_then(|e| Ok((e, need(&board.correlation, "correlation matrix")?)))
                .and_then(|(e, m)| alarms::priority_scores(e, m, &cfg.priority).map_err(|e| e.to_string()))
                .map(|ranked| {
                    let v = to_value(&ranked);
                    board.ranked = Some(ranked);
                    v
                });
            (args, result)
        }
        RAG_RETRIEVE if subtask_kind == "suggest" => {
            let top = board.ranked.as_ref().and_then(|r| r.first());
            let q = top.map(|t| format!("{} {}", t.event.key.alarm_type, t.event.representative_description));
            let args = json!({"query": q, "k": cfg.suggest_k, "scope": MANUAL_PREFIX});
            let view = PrefixView {
                store: env.store,
                prefix: MANUAL_PREFIX,
            };
            let result = top
                .ok_or_else(|| "no ranked alarm from earlier subtasks".to_string())
                .and_then(|t| alarms::suggest(t, &view, cfg.suggest_k).map_err(|e| e.to_string()))
                .map(|s| {
                    let v = to_value(&s);
                    board.suggestion = Some(s);
                    v
                });
            (args, result)
        }
        RAG_RETRIEVE => {
            let args = json!({"query": query, "k": cfg.qa_k});
            let hits = env.store.retrieve(query, cfg.qa_k);
            let v = to_value(&hits);
            board.hits = Some(hits);
            (args, Ok(v))
        }
        NETOPS_PROVISION => {
            let reuse = session.network.allocation.is_some();
            let args = json!({"demands": session.demands.len(), "k": cfg.k_paths, "reuse_live_allocation": reuse});
            let result = session.topology().and_then(|topo| {
                let report = match &session.network.allocation {
                    Some(a) => a.clone(),
                    None => netops::provision_onto(
                        session.network.spectrum.clone(),
                        &session.effective_demands(),
                        topo,
                        &topo.grid,
                        cfg.k_paths,
                    )
                    .map_err(|e| e.to_string())?,
                };
                let v = to_value(&report);
                board.allocation = Some(report);
                Ok(v)
            });
            (args, result)
        }
        QOT_ESTIMATE => {
            let args = json!({"thresholds": cfg.thresholds, "carried": board.allocation.as_ref().map_or(0, |a| a.carried().count())});
            let result = session.topology().and_then(|topo| {
                let alloc = need(&board.allocation, "allocation")?;
                let g = netops::carried_gsnr(&session.effective_demands(), topo, alloc, &cfg.thresholds)
                    .map_err(|e| e.to_string())?;
                let v = to_value(&g);
                board.gsnr = Some(g);
                Ok(v)
            });
            (args, result)
        }
        NETOPS_ANALYZE => {
            let args = json!({"low_margin_db": cfg.analysis.low_margin_db, "congestion_threshold": cfg.analysis.congestion_threshold});
            let result = need(&board.allocation, "allocation")
                .and_then(|a| Ok((a, need(&board.gsnr, "GSNR reports")?)))
                .and_then(|(a, g)| netops::analyze_network(a, g, &cfg.analysis).map_err(|e| e.to_string()))
                .map(|f| {
                    let v = to_value(&f);
                    board.findings = Some(f);
                    v
                });
            (args, result)
        }
        NETOPS_OPTIMIZE => {
            let args = optimize_args(cfg, session);
            let result = session.topology().and_then(|topo| {
                let alloc = need(&board.allocation, "allocation")?;
                let trace = netops::optimize_launch_power(
                    &session.effective_demands(),
                    topo,
                    alloc,
                    &cfg.thresholds,
                    &cfg.optimizer,
                )
                .map_err(|e| e.to_string())?;
                Ok((alloc.clone(), trace))
            });
            let result = result.map(|(alloc, trace)| {
                // Commit: the allocation becomes live and the powers are applied.
                session.network.spectrum = alloc.spectrum.clone();
                session.network.allocation = Some(alloc);
                session.network.launch_dbm.extend(trace.final_launch_dbm.clone());
                let v = to_value(&trace);
                board.trace = Some(trace);
                v
            });
            (args, result)
        }
        other => (Value::Null, Err(format!("no binding for tool {other}"))),
    }
}

/// Arguments of the optimisation tool, also used as the proposed
/// instruction on approval tickets.
pub fn optimize_args(cfg: &DomainConfig, session: &SessionState) -> Value {
    json!({
        "step_db": cfg.optimizer.step_db,
        "max_rounds": cfg.optimizer.max_rounds,
        "bounds": cfg.optimizer.bounds,
        "current_launch_dbm": session
            .effective_demands()
            .iter()
            .map(|d| (d.id.clone(), d.launch_power_dbm))
            .collect::<BTreeMap<_, _>>(),
    })
}

/// Deterministic plain-text rendering of a subtask's tool results.
pub fn summarize(kind: &str, board: &Blackboard) -> String {
    let mut s = String::new();
    match kind {
        "compress" => {
            if let Some(ev) = &board.events {
                let total: usize = ev.iter().map(|e| e.count).sum();
                let _ = writeln!(s, "Compressed {total} alarms into {} events:", ev.len());
                for (i, e) in ev.iter().enumerate() {
                    let _ = writeln!(s, "{}. {} x{} {}", i + 1, e.key, e.count, e.max_severity);
                }
            }
        }
        "prioritize" => {
            if let Some(r) = &board.ranked {
                let _ = writeln!(s, "Priority ranking:");
                for e in r {
                    let _ = writeln!(s, "rank {}: {} score {:.2}", e.rank, e.event.key, e.score);
                }
            }
        }
        "suggest" => {
            if let Some(sg) = &board.suggestion {
                let _ = writeln!(s, "Top alarm {}@{}.", sg.alarm_type, sg.source_ne);
                let _ = writeln!(s, "Cause: {}", sg.cause);
                for a in &sg.actions {
                    let _ = writeln!(s, "Action: {a}");
                }
                let _ = writeln!(s, "Sources: {}", sg.source_refs.join(", "));
            }
        }
        "answer" => {
            if let Some(h) = &board.hits {
                for hit in h {
                    let _ = writeln!(s, "[{}] {}", hit.chunk_ref(), hit.text.lines().next().unwrap_or_default());
                }
            }
        }
        "qot_estimate" => {
            if let Some(a) = &board.allocation {
                let carried = a.carried().count();
                let _ = writeln!(
                    s,
                    "Provisioned {carried}/{} demands, blocking probability {:.4}, utilization {:.4}.",
                    a.assignments.len(),
                    a.blocking_probability,
                    a.utilization
                );
            }
            if let Some(g) = &board.gsnr {
                for (id, r) in g {
                    if let Some(c) = r.channels.first() {
                        let _ = writeln!(s, "{id}: GSNR {:.2} dB, margin {:.2} dB ({})", c.gsnr_db, c.margin_db, r.modulation);
                    }
                }
            }
        }
        "analyze" => {
            if let Some(f) = &board.findings {
                if f.is_empty() {
                    let _ = writeln!(s, "No findings.");
                } else {
                    let _ = writeln!(s, "{} findings:", f.len());
                }
                for x in f {
                    let kind = serde_json::to_value(x.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                    let _ = writeln!(s, "{kind} {}: {}", x.subject, x.detail);
                }
            }
        }
        "optimize" => {
            if let Some(t) = &board.trace {
                let _ = writeln!(
                    s,
                    "Optimized launch power in {} moves over {} rounds; minimum margin {:.2} -> {:.2} dB.",
                    t.iterations.len(),
                    t.rounds,
                    t.initial_objective_db,
                    t.final_objective_db
                );
                for (id, p) in &t.final_launch_dbm {
                    let _ = writeln!(s, "{id}: {p:.1} dBm");
                }
            }
        }
        _ => {}
    }
    s.trim_end().to_string()
}
