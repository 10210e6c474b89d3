//! Evaluation protocol: seeded scenarios for the six tasks, key-element
//! accuracy, embedding similarity and the condition matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agent::tools::{summarize, Blackboard};
use crate::agent::{
    Agent, AgentConfig, AutoGate, Clock, ExampleBank, FinalAnswer, LlmBackend, PromptStyle, RunStatus, SessionState,
    TechniqueConfig, Transcript,
};
use crate::alarms::{self, Alarm, Rulebase, Severity, ALARM_CATALOG};
use crate::digest::json_digest;
use crate::fixtures;
use crate::netmodel::{Modulation, NetworkTopology, PowerBounds, ServiceDemand};
use crate::netops;
use crate::rag::{cosine, Embedder, PrefixView, VectorStore};

/// Demands per optimisation scenario.
pub const DEMANDS_PER_CASE: usize = 15;
/// Alarms per alarm scenario.
pub const ALARMS_PER_CASE: usize = 25;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("key elements are empty")]
    NoKeyElements,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("scenario generation failed: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConfigCondition {
    Raw,
    BriefPrompt,
    AdvancedPrompt,
    RagOnly,
    AdvancedPlusRag,
}

impl ConfigCondition {
    pub const ALL: [ConfigCondition; 5] = [
        ConfigCondition::Raw,
        ConfigCondition::BriefPrompt,
        ConfigCondition::AdvancedPrompt,
        ConfigCondition::RagOnly,
        ConfigCondition::AdvancedPlusRag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConfigCondition::Raw => "RAW",
            ConfigCondition::BriefPrompt => "BRIEF_PROMPT",
            ConfigCondition::AdvancedPrompt => "ADVANCED_PROMPT",
            ConfigCondition::RagOnly => "RAG_ONLY",
            ConfigCondition::AdvancedPlusRag => "ADVANCED_PLUS_RAG",
        }
    }

    /// Agent configuration for this condition.
    pub fn agent_config(self, domain: &crate::agent::DomainConfig) -> AgentConfig {
        let (style, technique, retrieval) = match self {
            ConfigCondition::Raw => (PromptStyle::Raw, TechniqueConfig::zero_shot(), false),
            ConfigCondition::BriefPrompt => (PromptStyle::Brief, TechniqueConfig::zero_shot(), false),
            ConfigCondition::AdvancedPrompt => (PromptStyle::Advanced, TechniqueConfig::cot(2), false),
            ConfigCondition::RagOnly => (PromptStyle::Brief, TechniqueConfig::zero_shot(), true),
            ConfigCondition::AdvancedPlusRag => (PromptStyle::Advanced, TechniqueConfig::cot(2), true),
        };
        AgentConfig {
            style,
            technique,
            retrieval,
            domain: domain.clone(),
            ..AgentConfig::default()
        }
    }
}

impl fmt::Display for ConfigCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfigCondition {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == up)
            .ok_or_else(|| EvalError::InvalidRequest(format!("unknown condition {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvalTask {
    AlarmCompression,
    AlarmCorrelation,
    AlarmSuggestion,
    QotEstimation,
    NetworkAnalysis,
    PowerOptimization,
}

impl EvalTask {
    pub const ALL: [EvalTask; 6] = [
        EvalTask::AlarmCompression,
        EvalTask::AlarmCorrelation,
        EvalTask::AlarmSuggestion,
        EvalTask::QotEstimation,
        EvalTask::NetworkAnalysis,
        EvalTask::PowerOptimization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalTask::AlarmCompression => "ALARM_COMPRESSION",
            EvalTask::AlarmCorrelation => "ALARM_CORRELATION",
            EvalTask::AlarmSuggestion => "ALARM_SUGGESTION",
            EvalTask::QotEstimation => "QOT_ESTIMATION",
            EvalTask::NetworkAnalysis => "NETWORK_ANALYSIS",
            EvalTask::PowerOptimization => "POWER_OPTIMIZATION",
        }
    }

    pub fn is_alarm(self) -> bool {
        matches!(self, EvalTask::AlarmCompression | EvalTask::AlarmCorrelation | EvalTask::AlarmSuggestion)
    }

    fn query(self) -> &'static str {
        match self {
            EvalTask::AlarmCompression => "Analyze these alarms and compress them into events.",
            EvalTask::AlarmCorrelation => "Analyze these alarms and tell me which one to handle first.",
            EvalTask::AlarmSuggestion => "Analyze these alarms and tell me how to fix the most important one.",
            EvalTask::QotEstimation => "Estimate the GSNR of the 15 services and optimize the network.",
            EvalTask::NetworkAnalysis => "Find the weak points of the network for the 15 services and optimize it.",
            EvalTask::PowerOptimization => "Optimize the launch power of the 15 services to maximize the minimum margin.",
        }
    }
}

impl fmt::Display for EvalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalTask {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == up)
            .ok_or_else(|| EvalError::InvalidRequest(format!("unknown task {s:?}")))
    }
}

/// Parses `all` or a comma-separated list.
pub fn parse_list<T: FromStr<Err = EvalError> + Copy>(s: &str, all: &[T]) -> Result<Vec<T>, EvalError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    s.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeyKind {
    Substring,
    Pattern,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyElement {
    pub kind: KeyKind,
    /// Text, regular expression, or JSON pointer into the payload root.
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl KeyElement {
    pub fn substring(s: impl Into<String>) -> Self {
        KeyElement {
            kind: KeyKind::Substring,
            spec: s.into(),
            expected: None,
            tolerance: None,
        }
    }

    pub fn pattern(s: impl Into<String>) -> Self {
        KeyElement {
            kind: KeyKind::Pattern,
            spec: s.into(),
            expected: None,
            tolerance: None,
        }
    }

    pub fn numeric(pointer: impl Into<String>, expected: f64, tolerance: f64) -> Self {
        KeyElement {
            kind: KeyKind::Numeric,
            spec: pointer.into(),
            expected: Some(expected),
            tolerance: Some(tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scenario {
    Alarms { alarms: Vec<Alarm> },
    Network { topology: String, demands: Vec<ServiceDemand> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub task_type: EvalTask,
    pub query: String,
    pub scenario: Scenario,
    pub reference_answer: String,
    pub key_elements: Vec<KeyElement>,
    /// Ground-truth payload computed by invoking the domain tools directly.
    pub reference_payload: Value,
}

/// SplitMix64 step, used to derive independent per-case seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn case_rng(seed: u64, task: EvalTask, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ (task as u64) << 32) ^ i as u64))
}

const CONCLUSION_PATTERN: &str = "(?m)^Conclusion:";

/// The planted dominant event of an alarm scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub alarm_type: String,
    pub source_ne: String,
    pub count: usize,
}

fn plant_alarms(rng: &mut ChaCha8Rng, case: &str) -> (Vec<Alarm>, Plant) {
    let base_ts = 1_700_000_000_000u64 + rng.random_range(0..1_000_000_000u64);
    let (ty, _, desc) = ALARM_CATALOG[rng.random_range(0..ALARM_CATALOG.len())];
    let ne = format!("NE-{:02}", rng.random_range(1..=20));
    let count = rng.random_range(8..=12);
    let mut alarms = Vec::with_capacity(ALARMS_PER_CASE);
    let push = |alarms: &mut Vec<Alarm>, rng: &mut ChaCha8Rng, ty: &str, ne: &str, sev: Severity, desc: &str| {
        let id = format!("{case}-{:02}", alarms.len());
        alarms.push(Alarm {
            id,
            ts: base_ts + rng.random_range(0..=170_000),
            severity: sev,
            alarm_type: ty.to_string(),
            source_ne: ne.to_string(),
            description: desc.to_string(),
        });
    };
    for _ in 0..count {
        push(&mut alarms, rng, ty, &ne, Severity::Critical, desc);
    }
    let mut used = vec![(ty.to_string(), ne.clone())];
    while alarms.len() < ALARMS_PER_CASE {
        let (nty, nsev, ndesc) = ALARM_CATALOG[rng.random_range(0..ALARM_CATALOG.len())];
        let nne = format!("NE-{:02}", rng.random_range(1..=20));
        if used.iter().any(|(t, n)| t == nty && *n == nne) {
            continue;
        }
        used.push((nty.to_string(), nne.clone()));
        let n = rng.random_range(1..=3).min(ALARMS_PER_CASE - alarms.len());
        for _ in 0..n {
            push(&mut alarms, rng, nty, &nne, nsev.min(Severity::Major), ndesc);
        }
    }
    (
        alarms,
        Plant {
            alarm_type: ty.to_string(),
            source_ne: ne,
            count,
        },
    )
}

/// Direct pipeline run over one alarm scenario: returns the reference
/// payload (keyed like the agent's) and the blackboard for text rendering.
pub fn alarm_reference(
    alarms_in: &[Alarm],
    store: &VectorStore,
    rulebase: &Rulebase,
    domain: &crate::agent::DomainConfig,
) -> Result<(Value, Blackboard), EvalError> {
    let err = |e: alarms::AlarmError| EvalError::Scenario(e.to_string());
    let batches = alarms::window_batches(alarms_in, domain.window_ms, domain.batch_cap).map_err(err)?;
    let batch = batches.last().ok_or_else(|| EvalError::Scenario("empty alarm scenario".into()))?;
    let events = alarms::compress(&batch.alarms);
    let matrix = alarms::correlate(&events, store.embedder(), rulebase);
    let ranked = alarms::priority_scores(&events, &matrix, &domain.priority).map_err(err)?;
    let view = PrefixView {
        store,
        prefix: crate::agent::tools::MANUAL_PREFIX,
    };
    let suggestion = alarms::suggest(&ranked[0], &view, domain.suggest_k).map_err(err)?;
    let payload = json!({
        "compress": {"alarms.compress": events},
        "prioritize": {"alarms.correlate": matrix, "alarms.priority_scores": ranked},
        "suggest": {"rag.retrieve": suggestion},
    });
    let board = Blackboard {
        events: Some(events),
        correlation: Some(matrix),
        ranked: Some(ranked),
        suggestion: Some(suggestion),
        ..Default::default()
    };
    Ok((payload, board))
}

/// Seeded 25-alarm batches with a planted CRITICAL dominant event.
pub fn generate_alarm_scenarios(n: usize, seed: u64, task: EvalTask) -> Result<Vec<TestCase>, EvalError> {
    generate_alarm_scenarios_with(n, seed, task, &fixtures::knowledge_store(), &fixtures::rulebase(), &Default::default())
}

pub fn generate_alarm_scenarios_with(
    n: usize,
    seed: u64,
    task: EvalTask,
    store: &VectorStore,
    rulebase: &Rulebase,
    domain: &crate::agent::DomainConfig,
) -> Result<Vec<TestCase>, EvalError> {
    if n == 0 || !task.is_alarm() {
        return Err(EvalError::InvalidRequest(format!("need n >= 1 and an alarm task, got {n} {task}")));
    }
    (0..n)
        .map(|i| {
            let id = format!("{}-{i:04}", task.as_str());
            let mut rng = case_rng(seed, task, i);
            let (alarms, plant) = plant_alarms(&mut rng, &format!("A{i:04}"));
            let (payload, board) = alarm_reference(&alarms, store, rulebase, domain)?;
            let key = format!("{}@{}", plant.alarm_type, plant.source_ne);
            let (sub, mut keys) = match task {
                EvalTask::AlarmCompression => {
                    let n_events = board.events.as_ref().map_or(0, Vec::len);
                    (
                        "compress",
                        vec![
                            KeyElement::substring(format!("{key} x{}", plant.count)),
                            KeyElement::substring(format!("into {n_events} events")),
                            KeyElement::numeric("/compress/alarms.compress/0/count", plant.count as f64, 0.0),
                        ],
                    )
                }
                EvalTask::AlarmCorrelation => {
                    let top = &board.ranked.as_ref().expect("ranked")[0];
                    (
                        "prioritize",
                        vec![
                            KeyElement::substring(format!("rank 1: {key}")),
                            KeyElement::numeric("/prioritize/alarms.priority_scores/0/score", top.score, 1e-6),
                            KeyElement::numeric("/prioritize/alarms.priority_scores/0/event/count", plant.count as f64, 0.0),
                        ],
                    )
                }
                _ => {
                    let s = board.suggestion.as_ref().expect("suggestion");
                    let mut k = vec![
                        KeyElement::substring(format!("Cause: {}", s.cause)),
                        KeyElement::substring(format!("manual/{}#0", plant.alarm_type)),
                    ];
                    if let Some(a) = s.actions.first() {
                        k.push(KeyElement::substring(format!("Action: {a}")));
                    }
                    ("suggest", k)
                }
            };
            keys.push(KeyElement::pattern(CONCLUSION_PATTERN));
            Ok(TestCase {
                id,
                task_type: task,
                query: task.query().to_string(),
                scenario: Scenario::Alarms { alarms },
                reference_answer: summarize(sub, &board),
                key_elements: keys,
                reference_payload: payload,
            })
        })
        .collect()
}

/// Fifteen seeded demands over distinct random node pairs.
pub fn generate_demands(topo: &NetworkTopology, n: usize, rng: &mut ChaCha8Rng, bounds: &PowerBounds) -> Vec<ServiceDemand> {
    let ids: Vec<&str> = topo.nodes.iter().map(|n| n.id.as_str()).collect();
    let steps = ((bounds.max_dbm - bounds.min_dbm) / 0.5).floor() as i64;
    let mods = [Modulation::Qpsk, Modulation::Qpsk, Modulation::Qam8, Modulation::Qam16];
    (0..n)
        .map(|i| {
            let src = *ids.choose(rng).expect("nodes");
            let dst = loop {
                let d = *ids.choose(rng).expect("nodes");
                if d != src {
                    break d;
                }
            };
            ServiceDemand {
                id: format!("D{:02}", i + 1),
                src: src.to_string(),
                dst: dst.to_string(),
                launch_power_dbm: bounds.min_dbm + 0.5 * rng.random_range(0..=steps) as f64,
                modulation: *mods.choose(rng).expect("modulations"),
            }
        })
        .collect()
}

/// Direct provision → GSNR → analysis → optimisation on one scenario.
pub fn network_reference(
    topo: &NetworkTopology,
    demands: &[ServiceDemand],
    domain: &crate::agent::DomainConfig,
) -> Result<(Value, Blackboard), EvalError> {
    let err = |e: netops::NetopsError| EvalError::Scenario(e.to_string());
    let alloc = netops::provision(demands, topo, &topo.grid, domain.k_paths).map_err(err)?;
    let gsnr = netops::carried_gsnr(demands, topo, &alloc, &domain.thresholds).map_err(err)?;
    let findings = netops::analyze_network(&alloc, &gsnr, &domain.analysis).map_err(err)?;
    let trace = netops::optimize_launch_power(demands, topo, &alloc, &domain.thresholds, &domain.optimizer).map_err(err)?;
    let payload = json!({
        "qot_estimate": {"netops.provision": alloc, "qot.estimate_gsnr": gsnr},
        "analyze": {"netops.analyze_network": findings},
        "optimize": {"netops.optimize_launch_power": trace},
    });
    let board = Blackboard {
        allocation: Some(alloc),
        gsnr: Some(gsnr),
        findings: Some(findings),
        trace: Some(trace),
        ..Default::default()
    };
    Ok((payload, board))
}

/// Seeded 15-demand scenarios on a named or file topology.
pub fn generate_optim_scenarios(n: usize, seed: u64, topology: &str, task: EvalTask) -> Result<Vec<TestCase>, EvalError> {
    let topo = fixtures::resolve_topology(topology).map_err(|e| EvalError::Scenario(e.to_string()))?;
    generate_optim_scenarios_on(n, seed, topology, &topo, task, &Default::default())
}

pub fn generate_optim_scenarios_on(
    n: usize,
    seed: u64,
    topology_ref: &str,
    topo: &NetworkTopology,
    task: EvalTask,
    domain: &crate::agent::DomainConfig,
) -> Result<Vec<TestCase>, EvalError> {
    if n == 0 || task.is_alarm() {
        return Err(EvalError::InvalidRequest(format!("need n >= 1 and a network task, got {n} {task}")));
    }
    (0..n)
        .map(|i| {
            let id = format!("{}-{i:04}", task.as_str());
            let mut rng = case_rng(seed, task, i);
            let demands = generate_demands(topo, DEMANDS_PER_CASE, &mut rng, &domain.optimizer.bounds);
            let (payload, board) = network_reference(topo, &demands, domain)?;
            let alloc = board.allocation.as_ref().expect("allocation");
            let (sub, mut keys) = match task {
                EvalTask::QotEstimation => {
                    let mut k = vec![KeyElement::numeric(
                        "/qot_estimate/netops.provision/blocking_probability",
                        alloc.blocking_probability,
                        0.0,
                    )];
                    for (id, g) in board.gsnr.as_ref().expect("gsnr").iter().take(3) {
                        k.push(KeyElement::numeric(
                            format!("/qot_estimate/qot.estimate_gsnr/{id}/channels/0/gsnr_db"),
                            g.channels[0].gsnr_db,
                            0.01,
                        ));
                    }
                    ("qot_estimate", k)
                }
                EvalTask::NetworkAnalysis => {
                    let f = board.findings.as_ref().expect("findings");
                    let mut k = Vec::new();
                    if f.is_empty() {
                        k.push(KeyElement::substring("No findings."));
                    } else {
                        k.push(KeyElement::substring(format!("{} findings:", f.len())));
                        k.push(KeyElement::numeric("/analyze/netops.analyze_network/0/metric", f[0].metric, 1e-9));
                        let kind = serde_json::to_value(f[0].kind).expect("kind").as_str().unwrap_or_default().to_string();
                        k.push(KeyElement::substring(format!("{kind} {}", f[0].subject)));
                    }
                    ("analyze", k)
                }
                _ => {
                    let t = board.trace.as_ref().expect("trace");
                    (
                        "optimize",
                        vec![
                            KeyElement::numeric("/optimize/netops.optimize_launch_power/final_objective_db", t.final_objective_db, 0.01),
                            KeyElement::numeric(
                                "/optimize/netops.optimize_launch_power/initial_objective_db",
                                t.initial_objective_db,
                                0.01,
                            ),
                            KeyElement::substring(format!(
                                "minimum margin {:.2} -> {:.2} dB",
                                t.initial_objective_db, t.final_objective_db
                            )),
                        ],
                    )
                }
            };
            keys.push(KeyElement::pattern(CONCLUSION_PATTERN));
            Ok(TestCase {
                id,
                task_type: task,
                query: task.query().to_string(),
                scenario: Scenario::Network {
                    topology: topology_ref.to_string(),
                    demands,
                },
                reference_answer: summarize(sub, &board),
                key_elements: keys,
                reference_payload: payload,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyScore {
    pub score: f64,
    pub matched: usize,
    pub total: usize,
    /// NUMERIC pointers absent from the payload; each counts as unmatched.
    pub missing_payload: Vec<String>,
}

/// Share of key elements present in the answer.
pub fn score_accuracy(answer: &FinalAnswer, key_elements: &[KeyElement]) -> Result<AccuracyScore, EvalError> {
    score_parts(&answer.full_text(), &answer.payload_root(), key_elements)
}

pub fn score_parts(text: &str, payload: &Value, key_elements: &[KeyElement]) -> Result<AccuracyScore, EvalError> {
    if key_elements.is_empty() {
        return Err(EvalError::NoKeyElements);
    }
    let lower = text.to_lowercase();
    let mut matched = 0;
    let mut missing = Vec::new();
    for k in key_elements {
        let hit = match k.kind {
            KeyKind::Substring => lower.contains(&k.spec.to_lowercase()),
            KeyKind::Pattern => Regex::new(&k.spec).map(|r| r.is_match(text)).unwrap_or(false),
            KeyKind::Numeric => match payload.pointer(&k.spec).and_then(Value::as_f64) {
                Some(v) => {
                    let tol = k.tolerance.unwrap_or(0.0);
                    k.expected.is_some_and(|e| (v - e).abs() <= tol)
                }
                None => {
                    missing.push(k.spec.clone());
                    false
                }
            },
        };
        matched += usize::from(hit);
    }
    Ok(AccuracyScore {
        score: matched as f64 / key_elements.len() as f64,
        matched,
        total: key_elements.len(),
        missing_payload: missing,
    })
}

/// Cosine of the two texts' embeddings; 0 when either has no tokens.
pub fn semantic_similarity(answer: &str, reference: &str, embedder: &dyn Embedder) -> f64 {
    cosine(&embedder.embed(answer), &embedder.embed(reference))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub task: EvalTask,
    pub condition: ConfigCondition,
    pub case_id: String,
    pub status: RunStatus,
    pub accuracy: f64,
    pub similarity: f64,
    pub matched: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_payload: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Manual annotation slot; never filled automatically.
    pub expert_judgement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub task: EvalTask,
    pub condition: ConfigCondition,
    pub n: usize,
    pub mean_accuracy: f64,
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub seed: u64,
    pub n_per_cell: usize,
    pub tasks: Vec<EvalTask>,
    pub conditions: Vec<ConfigCondition>,
    pub config_digest: String,
    pub cells: Vec<MatrixCell>,
    pub rows: Vec<MatrixRow>,
}

impl MatrixReport {
    pub fn cell(&self, task: EvalTask, condition: ConfigCondition) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.task == task && c.condition == condition)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["task", "condition", "n", "mean_accuracy", "mean_similarity"])?;
        for c in &self.cells {
            w.write_record([
                c.task.as_str().to_string(),
                c.condition.as_str().to_string(),
                c.n.to_string(),
                c.mean_accuracy.to_string(),
                c.mean_similarity.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        fs::write(dir.join("report.csv"), self.to_csv()?)?;
        Ok(())
    }
}

/// Shared resources for building one agent per condition.
#[derive(Clone)]
pub struct EvalResources {
    pub backend: Arc<dyn LlmBackend>,
    pub store: Arc<VectorStore>,
    pub rulebase: Arc<Rulebase>,
    pub examples: Arc<ExampleBank>,
    pub domain: crate::agent::DomainConfig,
    pub topology_ref: String,
    pub topology: Arc<NetworkTopology>,
}

impl EvalResources {
    /// Bundled library, rulebase, examples, scripted backend and the
    /// synthetic CONUS topology.
    pub fn bundled() -> Self {
        EvalResources {
            backend: Arc::new(fixtures::scripted_backend()),
            store: Arc::new(fixtures::knowledge_store()),
            rulebase: Arc::new(fixtures::rulebase()),
            examples: Arc::new(fixtures::example_bank()),
            domain: Default::default(),
            topology_ref: "conus".into(),
            topology: Arc::new(fixtures::conus_topology()),
        }
    }

    pub fn agent(&self, condition: ConfigCondition) -> Agent {
        Agent::new(
            self.backend.clone(),
            self.store.clone(),
            self.rulebase.clone(),
            self.examples.clone(),
            condition.agent_config(&self.domain),
        )
    }

    pub fn scenarios(&self, task: EvalTask, n: usize, seed: u64) -> Result<Vec<TestCase>, EvalError> {
        if task.is_alarm() {
            generate_alarm_scenarios_with(n, seed, task, &self.store, &self.rulebase, &self.domain)
        } else {
            generate_optim_scenarios_on(n, seed, &self.topology_ref, &self.topology, task, &self.domain)
        }
    }
}

fn run_case(agent: &Agent, res: &EvalResources, case: &TestCase, condition: ConfigCondition) -> MatrixRow {
    let mut session = SessionState {
        id: case.id.clone(),
        ..Default::default()
    };
    match &case.scenario {
        Scenario::Alarms { alarms } => session.alarms = alarms.clone(),
        Scenario::Network { demands, .. } => {
            session.topology = Some((*res.topology).clone());
            session.demands = demands.clone();
        }
    }
    let run_id = format!("{}-{}", condition.as_str(), case.id);
    let out = agent.run(&case.query, &mut session, &AutoGate { approve: true }, Transcript::new(run_id, Clock::Logical));
    let mut row = MatrixRow {
        task: case.task_type,
        condition,
        case_id: case.id.clone(),
        status: out.status,
        accuracy: 0.0,
        similarity: 0.0,
        matched: 0,
        total: case.key_elements.len(),
        missing_payload: vec![],
        error: out.error.clone(),
        expert_judgement: None,
    };
    match &out.final_answer {
        Some(fa) => match score_accuracy(fa, &case.key_elements) {
            Ok(s) => {
                row.accuracy = s.score;
                row.matched = s.matched;
                row.missing_payload = s.missing_payload;
                row.similarity = semantic_similarity(&fa.full_text(), &case.reference_answer, res.store.embedder());
            }
            Err(e) => row.error = Some(e.to_string()),
        },
        None => {
            row.error.get_or_insert_with(|| format!("run ended with status {:?}", out.status));
        }
    }
    row
}

/// Digest of everything that determines a matrix run.
pub fn config_digest(res: &EvalResources, tasks: &[EvalTask], conditions: &[ConfigCondition], n: usize, seed: u64) -> String {
    let configs: BTreeMap<&str, AgentConfig> =
        conditions.iter().map(|c| (c.as_str(), c.agent_config(&res.domain))).collect();
    json_digest(&json!({
        "seed": seed,
        "n_per_cell": n,
        "tasks": tasks,
        "conditions": conditions,
        "agents": configs,
        "backend": res.backend.id(),
        "topology": res.topology_ref,
        "topology_digest": json_digest(res.topology.as_ref()),
    }))
}

/// Every (task, condition, case) is executed; cases run in parallel and the
/// report is assembled in (task, condition, case id) order. A failing case
/// scores 0 and carries its error.
pub fn run_matrix(
    res: &EvalResources,
    tasks: &[EvalTask],
    conditions: &[ConfigCondition],
    n_per_cell: usize,
    seed: u64,
) -> Result<MatrixReport, EvalError> {
    if tasks.is_empty() || conditions.is_empty() || n_per_cell == 0 {
        return Err(EvalError::InvalidRequest("tasks, conditions and n must be non-empty".into()));
    }
    let cases: Vec<(EvalTask, Vec<TestCase>)> = tasks
        .iter()
        .map(|&t| Ok((t, res.scenarios(t, n_per_cell, seed)?)))
        .collect::<Result<_, EvalError>>()?;
    let agents: BTreeMap<ConfigCondition, Agent> = conditions.iter().map(|&c| (c, res.agent(c))).collect();

    let jobs: Vec<(&TestCase, ConfigCondition)> = cases
        .iter()
        .flat_map(|(_, cs)| conditions.iter().flat_map(move |&c| cs.iter().map(move |case| (case, c))))
        .collect();
    let rows: Vec<MatrixRow> = jobs
        .par_iter()
        .map(|(case, c)| run_case(&agents[c], res, case, *c))
        .collect();

    let mut cells = Vec::new();
    for &t in tasks {
        for &c in conditions {
            let rs: Vec<&MatrixRow> = rows.iter().filter(|r| r.task == t && r.condition == c).collect();
            let n = rs.len();
            let mean = |f: fn(&MatrixRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n.max(1) as f64;
            cells.push(MatrixCell {
                task: t,
                condition: c,
                n,
                mean_accuracy: mean(|r| r.accuracy),
                mean_similarity: mean(|r| r.similarity),
            });
        }
    }
    Ok(MatrixReport {
        seed,
        n_per_cell,
        tasks: tasks.to_vec(),
        conditions: conditions.to_vec(),
        config_digest: config_digest(res, tasks, conditions, n_per_cell, seed),
        cells,
        rows,
    })
}
