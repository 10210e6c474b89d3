//! Independent oracles and the checks shared by the integration tests and
//! the acceptance report.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{LN_10, PI};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use optiagent::agent::{
    Agent, AgentConfig, ApprovalDecision, ApprovalGate, AutoGate, Clock, RunOutcome, RunStatus, SessionState, StepKind,
    Transcript, TicketStatus,
};
use optiagent::alarms::{self, Alarm, AlarmBatch, PriorityConfig, Rulebase, Severity, Weights, ALARM_CATALOG};
use optiagent::evalharness::{run_matrix, ConfigCondition, EvalResources, EvalTask, MatrixReport};
use optiagent::fixtures;
use optiagent::gateway::{Gateway, GatewayConfig, JobStatus};
use optiagent::netmodel::{Amplifier, Element, FiberSpan, Link, Modulation, NetworkTopology, Node, ServiceDemand, SpectrumGrid};
use optiagent::netops::{self, AssignmentStatus, OptimizerConfig};
use optiagent::qot::{self, ChannelLaunch, ModulationThresholds};
use optiagent::rag::{Chunk, Embedder, HashingEmbedder, PrefixView, Retriever, VectorStore};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// One acceptance line.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

// ---------------------------------------------------------------- GN model

/// The closed forms evaluated in SI units (metres, s²/m, 1/(W·m)).
pub mod gn {
    use super::*;

    pub const H: f64 = 6.62607015e-34;

    /// Field-power attenuation in neper per metre.
    fn alpha_np_per_m(db_per_km: f64) -> f64 {
        db_per_km / (10.0 * std::f64::consts::E.log10()) / 1000.0
    }

    /// (L_eff, L_eff,a) in km.
    pub fn effective_length_km(db_per_km: f64, length_km: f64) -> (f64, f64) {
        let a = alpha_np_per_m(db_per_km);
        let l = length_km * 1000.0;
        ((1.0 - (-a * l).exp()) / a / 1000.0, 1.0 / a / 1000.0)
    }

    pub fn ase_w(gain_db: f64, nf_db: f64, freq_hz: f64, b_ref_hz: f64) -> f64 {
        let g = (gain_db / 10.0 * LN_10).exp();
        let nf = (nf_db / 10.0 * LN_10).exp();
        H * freq_hz * nf * (g - 1.0) * b_ref_hz
    }

    #[allow(clippy::too_many_arguments)]
    pub fn nli_w(
        db_per_km: f64,
        length_km: f64,
        beta2_ps2_per_km: f64,
        gamma_per_w_km: f64,
        power_w: f64,
        b_ch_hz: f64,
        b_wdm_hz: f64,
    ) -> f64 {
        let a = alpha_np_per_m(db_per_km);
        let l = length_km * 1000.0;
        let leff = (1.0 - (-a * l).exp()) / a;
        let la = 1.0 / a;
        let gamma = gamma_per_w_km / 1000.0;
        let beta2 = beta2_ps2_per_km.abs() * 1e-27;
        let x = PI * PI / 2.0 * beta2 * la * b_wdm_hz * b_wdm_hz;
        8.0 / 27.0 * gamma * gamma * leff * leff * power_w.powi(3) / (b_ch_hz * b_ch_hz) * x.asinh() / (PI * beta2 * la)
    }
}

// High-precision reference values, frozen from a 40-digit evaluation.
pub const REF_L_EFF_KM: f64 = 21.169274886976460;
pub const REF_ASE_G20_W: f64 = 5.014847222778139e-7;
pub const REF_NLI_1MW_W: f64 = 2.391855284799037e-7;

pub fn span(length_km: f64, atten: f64, beta2: f64, gamma: f64) -> FiberSpan {
    FiberSpan {
        id: "s".into(),
        length_km,
        atten_db_per_km: atten,
        beta2_ps2_per_km: beta2,
        gamma_per_w_km: gamma,
    }
}

pub fn amp(gain_db: f64, nf_db: f64) -> Amplifier {
    Amplifier {
        id: "a".into(),
        gain_db,
        nf_db,
        tilt_db: 0.0,
    }
}

/// Largest relative error of each formula over `draws` seeded draws.
pub fn gn_draw_errors(draws: usize, seed: u64) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let (mut e_leff, mut e_ase, mut e_nli) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let atten = r.random_range(0.15..0.25);
        let len = r.random_range(1.0..150.0);
        let beta2 = r.random_range(-28.0..-4.0);
        let gamma = r.random_range(0.8..2.0);
        let p = r.random_range(1e-5..1e-2);
        let b_ch = r.random_range(16e9..64e9);
        let b_wdm = r.random_range(b_ch..5e12);
        let g = r.random_range(0.0..30.0);
        let nf = r.random_range(3.0..8.0);
        let f = r.random_range(186e12..196e12);
        let b_ref = r.random_range(1e9..50e9);

        let le = qot::effective_length(atten, len).unwrap();
        let (o_le, o_la) = gn::effective_length_km(atten, len);
        e_leff = e_leff.max(rel(le.l_eff_km, o_le)).max(rel(le.l_eff_asymptotic_km, o_la));

        let a = qot::ase_power(&amp(g, nf), f, b_ref).unwrap();
        e_ase = e_ase.max(rel(a, gn::ase_w(g, nf, f, b_ref)));

        let launch = ChannelLaunch {
            channel_index: 0,
            power_w: p,
        };
        let n = qot::nli_power_span(&span(len, atten, beta2, gamma), &launch, b_ch, b_wdm).unwrap();
        e_nli = e_nli.max(rel(n, gn::nli_w(atten, len, beta2, gamma, p, b_ch, b_wdm)));
    }
    (e_leff, e_ase, e_nli)
}

/// Relative errors at the three named reference points.
pub fn gn_reference_errors() -> [f64; 3] {
    let le = qot::effective_length(0.2, 80.0).unwrap().l_eff_km;
    let ase = qot::ase_power(&amp(20.0, 5.0), 193.4e12, 12.5e9).unwrap();
    let launch = ChannelLaunch {
        channel_index: 0,
        power_w: 1e-3,
    };
    let nli = qot::nli_power_span(&span(80.0, 0.2, -21.27, 1.3), &launch, 32e9, 32e9).unwrap();
    [rel(le, REF_L_EFF_KM), rel(ase, REF_ASE_G20_W), rel(nli, REF_NLI_1MW_W)]
}

pub fn check_gn_oracle() -> Outcome {
    let t = Instant::now();
    let (a, b, c) = gn_draw_errors(1000, 0x6e);
    let refs = gn_reference_errors();
    let el = t.elapsed();
    let worst = a.max(b).max(c);
    let worst_ref = refs.iter().copied().fold(0.0, f64::max);
    let pass = worst <= 1e-9 && worst_ref <= 1e-6 && el < Duration::from_secs(10);
    Outcome::new(
        pass,
        format!(
            "1000 draws max rel err L_eff {a:.1e} ASE {b:.1e} NLI {c:.1e} (tol 1e-9); reference points max {worst_ref:.1e} (tol 1e-6); {:.2?}",
            el
        ),
    )
}

// ---------------------------------------------------------- analytic optimum

pub struct OptimumStudy {
    pub p_opt_dbm: f64,
    pub sweep_dbm: f64,
    pub final_dbm: f64,
    pub initial: f64,
    pub objectives: Vec<f64>,
    pub elapsed: Duration,
}

/// Single-channel single-span plant: P_opt from P_NLI = P_ASE/2, a 1 mdB
/// sweep of P/(P_ASE + ηP³), and the optimiser run.
pub fn optimum_study() -> OptimumStudy {
    let topo = fixtures::single_span_topology();
    let demands = fixtures::single_span_demands();
    let (sp, am) = match (&topo.links[0].elements[0], &topo.links[0].elements[1]) {
        (Element::Span(s), Element::Amplifier(a)) => (s.clone(), a.clone()),
        _ => panic!("single span plant layout changed"),
    };
    let f = netops::channel_center_thz(&topo.grid, 0).unwrap() * 1e12;
    let b = topo.grid.symbol_rate_gbd * 1e9;
    let b_wdm = topo.grid.channel_count() as f64 * topo.grid.spacing_ghz * 1e9;
    let ase = gn::ase_w(am.gain_db, am.nf_db, f, topo.grid.b_ref_ghz * 1e9);
    let eta = gn::nli_w(sp.atten_db_per_km, sp.length_km, sp.beta2_ps2_per_km, sp.gamma_per_w_km, 1.0, b, b_wdm);
    let p_opt = (ase / (2.0 * eta)).cbrt();
    let p_opt_dbm = 10.0 * (p_opt / 1e-3).log10();

    let mut sweep_dbm = f64::NAN;
    let mut best = f64::NEG_INFINITY;
    for i in -4000..=4000 {
        let dbm = i as f64 * 1e-3;
        let p = 1e-3 * 10f64.powf(dbm / 10.0);
        let snr = p / (ase + eta * p.powi(3));
        if snr > best {
            best = snr;
            sweep_dbm = dbm;
        }
    }

    let t = Instant::now();
    let alloc = netops::provision(&demands, &topo, &topo.grid, 1).unwrap();
    let trace = netops::optimize_launch_power(&demands, &topo, &alloc, &ModulationThresholds::default(), &OptimizerConfig::default()).unwrap();
    let elapsed = t.elapsed();
    OptimumStudy {
        p_opt_dbm,
        sweep_dbm,
        final_dbm: trace.final_launch_dbm["D1"],
        initial: trace.initial_objective_db,
        objectives: trace.iterations.iter().map(|m| m.objective_db).collect(),
        elapsed,
    }
}

pub fn strictly_increasing(initial: f64, xs: &[f64]) -> bool {
    let mut prev = initial;
    xs.iter().all(|&x| {
        let ok = x > prev;
        prev = x;
        ok
    })
}

pub fn check_analytic_optimum() -> Outcome {
    let s = optimum_study();
    let pass = (s.final_dbm - s.p_opt_dbm).abs() <= 0.5
        && (s.sweep_dbm - s.p_opt_dbm).abs() <= 1e-3
        && strictly_increasing(s.initial, &s.objectives)
        && s.elapsed < Duration::from_secs(1);
    Outcome::new(
        pass,
        format!(
            "P_opt {:.3} dBm, sweep {:.3} dBm, optimiser {:.3} dBm (tol 0.5 dB), {} moves strictly increasing, {:.2?}",
            s.p_opt_dbm,
            s.sweep_dbm,
            s.final_dbm,
            s.objectives.len(),
            s.elapsed
        ),
    )
}

// ------------------------------------------------------------------ RWA

pub struct RwaInstance {
    pub topo: NetworkTopology,
    pub demands: Vec<ServiceDemand>,
    pub k: usize,
}

fn plain_link(id: String, a: &str, b: &str, km: f64) -> Link {
    Link {
        id: id.clone(),
        endpoints: (a.into(), b.into()),
        elements: vec![
            Element::Span(FiberSpan {
                id: format!("{id}-s"),
                length_km: km,
                atten_db_per_km: 0.2,
                beta2_ps2_per_km: -21.27,
                gamma_per_w_km: 1.3,
            }),
            Element::Amplifier(Amplifier {
                id: format!("{id}-a"),
                gain_db: km * 0.2,
                nf_db: 5.0,
                tilt_db: 0.0,
            }),
        ],
        transparent: true,
    }
}

/// Up to 6 nodes, 8 channels and 10 demands. Lengths come from a short list
/// so equal-length alternatives are common.
pub fn rwa_instance(r: &mut ChaCha8Rng) -> RwaInstance {
    let n = r.random_range(2..=6);
    let ids: Vec<String> = (1..=n).map(|i| format!("N{i}")).collect();
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(0.55) {
                let km = [40.0, 60.0, 80.0, 100.0, 120.0][r.random_range(0..5)];
                links.push(plain_link(format!("L{}", links.len() + 1), &ids[i], &ids[j], km));
            }
        }
    }
    let channels = r.random_range(1..=8);
    let demands = (0..r.random_range(1..=10))
        .map(|d| {
            let s = r.random_range(0..n);
            let mut t = r.random_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            ServiceDemand {
                id: format!("D{d:02}"),
                src: ids[s].clone(),
                dst: ids[t].clone(),
                launch_power_dbm: 0.0,
                modulation: Modulation::Qpsk,
            }
        })
        .collect();
    RwaInstance {
        topo: NetworkTopology {
            nodes: ids.iter().map(|id| Node { id: id.clone(), label: String::new() }).collect(),
            links,
            grid: SpectrumGrid::single_band(channels, 191.6, 50.0, 32.0),
        },
        demands,
        k: r.random_range(1..=3),
    }
}

/// (demand id, Some((nodes, links, channel))) per demand, plus occupancy.
pub type RwaResult = (Vec<(String, Option<(Vec<String>, Vec<String>, usize)>)>, usize);

/// Every simple path, ordered by integer-micrometre length then node ids;
/// then first-fit over the first k paths of each demand in input order.
pub fn rwa_brute_force(inst: &RwaInstance) -> RwaResult {
    let topo = &inst.topo;
    let um = |l: &Link| ((l.length_km() * 1e6).round() as u64).max(1);
    let between = |a: &str, b: &str| topo.links.iter().find(|l| l.connects(a, b));

    fn dfs<'a>(topo: &'a NetworkTopology, at: &'a str, dst: &str, path: &mut Vec<&'a str>, out: &mut Vec<Vec<&'a str>>) {
        if at == dst {
            out.push(path.clone());
            return;
        }
        for n in &topo.nodes {
            let next = n.id.as_str();
            if !path.contains(&next) && topo.links.iter().any(|l| l.connects(at, next)) {
                path.push(next);
                dfs(topo, next, dst, path, out);
                path.pop();
            }
        }
    }

    let channels = topo.grid.channel_count();
    let mut used: HashMap<String, BTreeSet<usize>> = HashMap::new();
    let mut out = Vec::new();
    for d in &inst.demands {
        let mut paths = Vec::new();
        dfs(topo, &d.src, &d.dst, &mut vec![d.src.as_str()], &mut paths);
        let mut ranked: Vec<(u64, Vec<&str>)> = paths
            .into_iter()
            .map(|p| (p.windows(2).map(|w| um(between(w[0], w[1]).unwrap())).sum(), p))
            .collect();
        ranked.sort();
        let mut chosen = None;
        'routes: for (_, p) in ranked.iter().take(inst.k) {
            let links: Vec<String> = p.windows(2).map(|w| between(w[0], w[1]).unwrap().id.clone()).collect();
            for c in 0..channels {
                if links.iter().all(|l| used.get(l).is_none_or(|s| !s.contains(&c))) {
                    for l in &links {
                        used.entry(l.clone()).or_default().insert(c);
                    }
                    chosen = Some((p.iter().map(|s| s.to_string()).collect(), links, c));
                    break 'routes;
                }
            }
        }
        out.push((d.id.clone(), chosen));
    }
    (out, used.values().map(BTreeSet::len).sum())
}

pub fn rwa_actual(inst: &RwaInstance) -> (RwaResult, f64, f64) {
    let r = netops::provision(&inst.demands, &inst.topo, &inst.topo.grid, inst.k).unwrap();
    let rows = r
        .assignments
        .iter()
        .map(|a| {
            let v = match (a.status, &a.route, a.channel) {
                (AssignmentStatus::Carried, Some(rt), Some(c)) => Some((rt.nodes.clone(), rt.links.clone(), c)),
                _ => None,
            };
            (a.demand_id.clone(), v)
        })
        .collect();
    ((rows, r.spectrum.occupied_count()), r.blocking_probability, r.utilization)
}

/// Index of the first instance that differs, if any.
pub fn rwa_first_mismatch(n: usize, seed: u64) -> Option<(usize, String)> {
    let mut r = rng(seed);
    for i in 0..n {
        let inst = rwa_instance(&mut r);
        let expected = rwa_brute_force(&inst);
        let (got, blocking, util) = rwa_actual(&inst);
        if got != expected {
            return Some((i, format!("expected {expected:?}\n     got {got:?}")));
        }
        let blocked = expected.0.iter().filter(|(_, c)| c.is_none()).count();
        let cap = inst.topo.links.len() * inst.topo.grid.channel_count();
        let want_util = if cap == 0 { 0.0 } else { expected.1 as f64 / cap as f64 };
        if blocking != blocked as f64 / inst.demands.len() as f64 || util != want_util {
            return Some((i, format!("blocking {blocking} utilization {util}")));
        }
    }
    None
}

pub fn check_rwa() -> Outcome {
    let t = Instant::now();
    let mismatch = rwa_first_mismatch(100, 0x5a);
    let el = t.elapsed();
    let pass = mismatch.is_none() && el < Duration::from_secs(30);
    let what = match &mismatch {
        None => "100/100 instances identical".to_string(),
        Some((i, m)) => format!("instance {i} differs: {m}"),
    };
    Outcome::new(pass, format!("{what}; {el:.2?}"))
}

// ---------------------------------------------------------------- alarms

const WORDS: &[&str] = &[
    "optical", "port", "receiver", "signal", "loss", "frame", "fiber", "cut", "amplifier", "degrade", "threshold", "shelf", "power",
    "fan", "laser", "temperature", "upstream", "client", "line", "card",
];

fn words(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    (0..r.random_range(lo..=hi)).map(|_| WORDS[r.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn random_alarm(r: &mut ChaCha8Rng, id: String, base: u64, span_ms: u64) -> Alarm {
    let (ty, _, desc) = ALARM_CATALOG[r.random_range(0..ALARM_CATALOG.len())];
    Alarm {
        id,
        ts: base + r.random_range(0..=span_ms),
        severity: [Severity::Warning, Severity::Minor, Severity::Major, Severity::Critical][r.random_range(0..4)],
        alarm_type: ty.into(),
        source_ne: format!("NE-{}", r.random_range(1..=4)),
        description: if r.random_bool(0.6) { desc.to_string() } else { words(r, 0, 8) },
    }
}

pub fn random_batch(r: &mut ChaCha8Rng, tag: usize) -> Vec<Alarm> {
    let base = 1_700_000_000_000 + r.random_range(0..1_000_000u64);
    (0..r.random_range(1..=25)).map(|i| random_alarm(r, format!("b{tag}-{i:02}"), base, 180_000)).collect()
}

pub fn random_priority(r: &mut ChaCha8Rng) -> PriorityConfig {
    if r.random_bool(0.5) {
        return PriorityConfig::default();
    }
    let w: Vec<f64> = (0..3).map(|_| r.random_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    PriorityConfig {
        weights: Weights {
            severity: w[0] / s,
            frequency: w[1] / s,
            correlation: w[2] / s,
        },
        severity_map: Severity::ALL.iter().map(|&sv| (sv, r.random_range(0.0..=1.0))).collect(),
    }
}

fn dot_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub struct OracleEvent {
    pub count: usize,
    pub max_severity: Severity,
    pub first_ts: u64,
    pub last_ts: u64,
    pub description: String,
}

/// Grouping straight from the raw alarms, keyed by "TYPE@NE".
pub fn oracle_groups(batch: &[Alarm]) -> BTreeMap<String, OracleEvent> {
    let mut by_key: BTreeMap<String, Vec<&Alarm>> = BTreeMap::new();
    for a in batch {
        by_key.entry(format!("{}@{}", a.alarm_type, a.source_ne)).or_default().push(a);
    }
    by_key
        .into_iter()
        .map(|(k, v)| {
            let first = v.iter().min_by(|a, b| (a.ts, &a.id).cmp(&(b.ts, &b.id))).unwrap();
            (
                k,
                OracleEvent {
                    count: v.len(),
                    max_severity: v.iter().map(|a| a.severity).max().unwrap(),
                    first_ts: first.ts,
                    last_ts: v.iter().map(|a| a.ts).max().unwrap(),
                    description: first.description.clone(),
                },
            )
        })
        .collect()
}

/// Checks one batch against the oracles; returns the first problem found
/// and the largest score deviation.
pub fn alarm_batch_check(batch: &[Alarm], cfg: &PriorityConfig, rb: &Rulebase, emb: &dyn Embedder) -> Result<f64, String> {
    let events = alarms::compress(batch);
    let total: usize = events.iter().map(|e| e.count).sum();
    if total != batch.len() {
        return Err(format!("conservation: {total} != {}", batch.len()));
    }
    let groups = oracle_groups(batch);
    if groups.len() != events.len() {
        return Err(format!("{} groups vs {} events", groups.len(), events.len()));
    }
    for e in &events {
        let g = groups.get(&e.key.to_string()).ok_or_else(|| format!("unexpected event {}", e.key))?;
        if (g.count, g.max_severity, g.first_ts, g.last_ts, &g.description)
            != (e.count, e.max_severity, e.first_ts, e.last_ts, &e.representative_description)
        {
            return Err(format!("event {} disagrees with the grouping oracle", e.key));
        }
    }

    let n = events.len();
    let m = alarms::correlate(&events, emb, rb);
    let vecs: Vec<Vec<f64>> = events.iter().map(|e| emb.embed(&e.representative_description)).collect();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j {
                1.0
            } else {
                let rule = rb
                    .rules
                    .iter()
                    .filter(|r| {
                        let ta = &events[i].key.alarm_type;
                        let tb = &events[j].key.alarm_type;
                        r.same_ne == (events[i].key.source_ne == events[j].key.source_ne)
                            && ((&r.a == ta && &r.b == tb) || (&r.a == tb && &r.b == ta))
                    })
                    .fold(0.0f64, |acc, r| acc.max(r.value));
                dot_cos(&vecs[i], &vecs[j]).clamp(0.0, 1.0).max(rule)
            };
            if m[i][j] != m[j][i] || !(0.0..=1.0).contains(&m[i][j]) || (m[i][j] - want).abs() > 1e-12 {
                return Err(format!("correlation [{i}][{j}] = {} want {want}", m[i][j]));
            }
        }
    }

    let ranked = alarms::priority_scores(&events, &m, cfg).map_err(|e| e.to_string())?;
    let max_count = events.iter().map(|e| e.count).max().unwrap_or(1) as f64;
    let mut worst = 0.0f64;
    let mut seen = BTreeSet::new();
    for (pos, p) in ranked.iter().enumerate() {
        if p.rank != pos + 1 {
            return Err(format!("rank {} at position {pos}", p.rank));
        }
        let i = events.iter().position(|e| e.key == p.event.key).ok_or("ranked event not in compress output")?;
        if !seen.insert(i) {
            return Err("ranking repeats an event".into());
        }
        let corr = if n > 1 { (m[i].iter().sum::<f64>() - m[i][i]) / (n - 1) as f64 } else { 0.0 };
        let w = cfg.weights;
        let want = 100.0
            * (w.severity * cfg.severity_map[&events[i].max_severity]
                + w.frequency * (events[i].count as f64 / max_count)
                + w.correlation * corr);
        let dev = (p.score - want).abs() / want.abs().max(1.0);
        worst = worst.max(dev);
        if dev > 1e-12 {
            return Err(format!("score of {} is {} want {want}", p.event.key, p.score));
        }
    }
    for w in ranked.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ordered = (a.score > b.score)
            || (a.score == b.score
                && (a.event.max_severity > b.event.max_severity
                    || (a.event.max_severity == b.event.max_severity
                        && (a.event.first_ts < b.event.first_ts
                            || (a.event.first_ts == b.event.first_ts && a.event.key < b.event.key)))));
        if !ordered {
            return Err(format!("{} ranked before {}", a.event.key, b.event.key));
        }
    }
    Ok(worst)
}

/// The full pipeline serialised, for byte comparisons.
pub fn pipeline_bytes(batch: &[Alarm], cfg: &PriorityConfig, rb: &Rulebase, emb: &dyn Embedder) -> String {
    let b = AlarmBatch {
        alarms: batch.to_vec(),
        window_start: 0,
        window_end: 0,
    };
    serde_json::to_string(&alarms::analyze_batch(&b, emb, rb, cfg).unwrap()).unwrap()
}

pub fn check_alarm_pipeline() -> Outcome {
    let t = Instant::now();
    let rb = fixtures::rulebase();
    let emb = HashingEmbedder::default();
    let mut r = rng(0xa1);
    let mut worst = 0.0f64;
    let mut failure = None;
    for i in 0..400 {
        let mut batch = random_batch(&mut r, i);
        let cfg = random_priority(&mut r);
        match alarm_batch_check(&batch, &cfg, &rb, &emb) {
            Ok(w) => worst = worst.max(w),
            Err(e) => {
                failure = Some(format!("batch {i}: {e}"));
                break;
            }
        }
        let once = pipeline_bytes(&batch, &cfg, &rb, &emb);
        let twice = pipeline_bytes(&batch, &cfg, &rb, &emb);
        batch.shuffle(&mut r);
        let shuffled = pipeline_bytes(&batch, &cfg, &rb, &emb);
        if once != twice || once != shuffled {
            failure = Some(format!("batch {i}: pipeline output is not byte-identical"));
            break;
        }
    }
    let what = failure.clone().unwrap_or_else(|| "400/400 batches conserve counts and are byte-deterministic".into());
    Outcome::new(
        failure.is_none(),
        format!("{what}; max score deviation {worst:.1e} (tol 1e-12); {:.2?}", t.elapsed()),
    )
}

// ------------------------------------------------------------- retrieval

pub fn random_text(r: &mut ChaCha8Rng, vocab: usize, lo: usize, hi: usize) -> String {
    (0..r.random_range(lo..=hi)).map(|_| format!("w{}", r.random_range(0..vocab))).collect::<Vec<_>>().join(" ")
}

/// `n` chunks over `n / 20` documents; about one in twenty repeats an
/// earlier text so score ties occur.
pub fn seeded_chunks(r: &mut ChaCha8Rng, n: usize) -> Vec<Chunk> {
    let mut out: Vec<Chunk> = Vec::with_capacity(n);
    for i in 0..n {
        let text = if i > 0 && r.random_bool(0.05) {
            out[r.random_range(0..i)].text.clone()
        } else {
            random_text(r, 300, 3, 40)
        };
        out.push(Chunk {
            doc_id: format!("doc/{:03}", i / 20),
            seq: (i % 20) as u64,
            token_count: text.split_whitespace().count(),
            text,
        });
    }
    out
}

/// Exhaustive scan: (doc_id, seq, score) sorted by score desc, doc, seq.
pub fn brute_force_hits(chunks: &[Chunk], query: &str, k: usize) -> Vec<(String, u64, f64)> {
    let emb = HashingEmbedder::default();
    let q = emb.embed(query);
    let mut all: Vec<(String, u64, f64)> = chunks
        .iter()
        .map(|c| (c.doc_id.clone(), c.seq, dot_cos(&q, &emb.embed(&c.text))))
        .collect();
    all.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

pub fn retrieval_case(seed: u64, n_chunks: usize, n_queries: usize) -> Result<usize, String> {
    let mut r = rng(seed);
    let chunks = seeded_chunks(&mut r, n_chunks);
    let mut store = VectorStore::default();
    store.upsert(&chunks);
    for qi in 0..n_queries {
        let query = match qi % 4 {
            0 => chunks[r.random_range(0..chunks.len())].text.clone(),
            1 if qi == 1 => String::new(),
            _ => random_text(&mut r, 300, 1, 12),
        };
        let k = match qi {
            2 => 0,
            3 => n_chunks + 5,
            _ => r.random_range(1..=25),
        };
        let got = store.retrieve(&query, k);
        let want = brute_force_hits(&chunks, &query, k);
        if got.len() != want.len() {
            return Err(format!("query {qi}: {} hits, want {}", got.len(), want.len()));
        }
        for (h, (d, s, score)) in got.iter().zip(&want) {
            if &h.doc_id != d || h.seq != *s || (h.score - score).abs() > 1e-12 {
                return Err(format!("query {qi}: hit {}#{} ({}) vs {d}#{s} ({score})", h.doc_id, h.seq, h.score));
            }
        }
    }
    Ok(n_queries)
}

pub fn check_retrieval() -> Outcome {
    let t = Instant::now();
    let res = retrieval_case(0x7e, 1000, 100);
    let el = t.elapsed();
    let pass = res.is_ok() && el < Duration::from_secs(10);
    let what = match res {
        Ok(n) => format!("{n}/100 queries identical to the exhaustive scan over 1000 chunks"),
        Err(e) => e,
    };
    Outcome::new(pass, format!("{what}; {el:.2?}"))
}

// ------------------------------------------------------------------ agent

pub const ALARM_QUERY: &str = "Analyze the current alarms: compress them, find which one to handle first and suggest how to fix it.";
pub const OPTIM_QUERY: &str = "Estimate the GSNR of the 15 services, analyze the network and optimize the launch power.";

pub fn sample_alarms() -> Vec<Alarm> {
    let (a, errs) = alarms::parse_alarm_lines(include_str!("../../fixtures/alarms_sample.ndjson"));
    assert!(errs.is_empty());
    a
}

pub fn agent() -> Agent {
    Agent::new(
        Arc::new(fixtures::scripted_backend()),
        Arc::new(fixtures::knowledge_store()),
        Arc::new(fixtures::rulebase()),
        Arc::new(fixtures::example_bank()),
        AgentConfig::default(),
    )
}

pub fn alarm_session() -> SessionState {
    SessionState {
        id: "case-alarm".into(),
        alarms: sample_alarms(),
        ..Default::default()
    }
}

pub fn optim_session() -> SessionState {
    SessionState {
        id: "case-optim".into(),
        topology: Some(fixtures::conus_topology()),
        demands: fixtures::conus_demands(),
        ..Default::default()
    }
}

pub fn run_case(query: &str, session: &mut SessionState, gate: &dyn ApprovalGate) -> RunOutcome {
    let run_id = session.id.clone();
    agent().run(query, session, gate, Transcript::new(run_id, Clock::Logical))
}

/// The alarm tools called by hand on the same batch.
pub fn direct_alarm_payload(alarms_in: &[Alarm]) -> Value {
    let cfg = AgentConfig::default().domain;
    let store = fixtures::knowledge_store();
    let rb = fixtures::rulebase();
    let batches = alarms::window_batches(alarms_in, cfg.window_ms, cfg.batch_cap).unwrap();
    let batch = batches.last().unwrap();
    let events = alarms::compress(&batch.alarms);
    let m = alarms::correlate(&events, store.embedder(), &rb);
    let ranked = alarms::priority_scores(&events, &m, &cfg.priority).unwrap();
    let view = PrefixView {
        store: &store,
        prefix: "manual/",
    };
    let s = alarms::suggest(&ranked[0], &view, cfg.suggest_k).unwrap();
    json!({
        "compress": {"alarms.compress": events},
        "prioritize": {"alarms.correlate": m, "alarms.priority_scores": ranked},
        "suggest": {"rag.retrieve": s},
    })
}

/// The network tools called by hand on the same plant.
pub fn direct_network_payload(topo: &NetworkTopology, demands: &[ServiceDemand]) -> Value {
    let cfg = AgentConfig::default().domain;
    let alloc = netops::provision(demands, topo, &topo.grid, cfg.k_paths).unwrap();
    let g = netops::carried_gsnr(demands, topo, &alloc, &cfg.thresholds).unwrap();
    let f = netops::analyze_network(&alloc, &g, &cfg.analysis).unwrap();
    let t = netops::optimize_launch_power(demands, topo, &alloc, &cfg.thresholds, &cfg.optimizer).unwrap();
    json!({
        "qot_estimate": {"netops.provision": alloc, "qot.estimate_gsnr": g},
        "analyze": {"netops.analyze_network": f},
        "optimize": {"netops.optimize_launch_power": t},
    })
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.ndjson"))
}

/// Compares against the golden file; `UPDATE_GOLDEN=1` rewrites it.
pub fn golden_matches(name: &str, text: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want == text {
        Ok(())
    } else {
        let line = want.lines().zip(text.lines()).position(|(a, b)| a != b).unwrap_or(want.lines().count().min(text.lines().count()));
        Err(format!("{name} differs from its golden file at line {}", line + 1))
    }
}

/// Golden equality, repeat determinism, plan shape and payload passthrough
/// for one case.
pub fn agent_case(name: &str, query: &str, mut session: SessionState, kinds: [&str; 3], direct: Value) -> Result<(), String> {
    let approve = AutoGate { approve: true };
    let first = run_case(query, &mut session.clone(), &approve);
    let out = run_case(query, &mut session, &approve);
    let text = optiagent::agent::transcript::to_ndjson(&out.transcript);
    if text != optiagent::agent::transcript::to_ndjson(&first.transcript) {
        return Err(format!("{name}: repeated runs differ"));
    }
    golden_matches(name, &text)?;
    if out.status != RunStatus::Completed {
        return Err(format!("{name}: status {:?} {:?}", out.status, out.error));
    }
    let plan = out.plan.as_ref().ok_or("no plan")?;
    let got: Vec<&str> = plan.subtasks.iter().map(|s| s.kind.as_str()).collect();
    if got != kinds {
        return Err(format!("{name}: subtasks {got:?}"));
    }
    let fa = out.final_answer.as_ref().ok_or("no final answer")?;
    let root = fa.payload_root();
    if root != direct || serde_json::to_string(&root).unwrap() != serde_json::to_string(&direct).unwrap() {
        return Err(format!("{name}: structured payload differs from direct tool invocation"));
    }
    let logged: Vec<Value> = out.transcript.iter().filter(|r| r.step == StepKind::ToolCall).map(|r| r.payload.clone()).collect();
    let called: Vec<Value> = fa.sections.iter().flat_map(|s| s.tool_calls.iter()).map(|c| serde_json::to_value(c).unwrap()).collect();
    if logged != called {
        return Err(format!("{name}: {} tool calls logged, {} made", logged.len(), called.len()));
    }
    Ok(())
}

pub fn check_agent() -> Outcome {
    let alarm = agent_case(
        "alarm_case",
        ALARM_QUERY,
        alarm_session(),
        ["compress", "prioritize", "suggest"],
        direct_alarm_payload(&sample_alarms()),
    );
    let optim = agent_case(
        "optim_case",
        OPTIM_QUERY,
        optim_session(),
        ["qot_estimate", "analyze", "optimize"],
        direct_network_payload(&fixtures::conus_topology(), &fixtures::conus_demands()),
    );
    let mut problems: Vec<String> = [alarm, optim].into_iter().filter_map(Result::err).collect();
    let pass = problems.is_empty();
    if pass {
        problems.push("both case studies match their golden transcripts, 3 subtasks each, payloads bit-identical".into());
    }
    Outcome::new(pass, problems.join("; "))
}

// -------------------------------------------------------- approval safety

/// Agent-level check: the digest logged with the pending ticket equals the
/// initial digest, nothing mutating runs before APPROVED, and a rejection
/// leaves the state untouched.
pub fn agent_approval(approve: bool) -> Result<(String, String, RunOutcome), String> {
    let mut s = optim_session();
    let before = s.network.digest();
    let out = run_case(OPTIM_QUERY, &mut s, &AutoGate { approve });
    let after = s.network.digest();
    let pending = out.transcript.iter().position(|r| r.step == StepKind::PendingApproval).ok_or("no PENDING_APPROVAL record")?;
    if out.transcript[pending].payload["state_digest"] != json!(before) {
        return Err("state changed before the ticket was raised".into());
    }
    let resolved = out.transcript.iter().position(|r| r.step == StepKind::ApprovalResolved).ok_or("no APPROVAL_RESOLVED record")?;
    let optimize_call = out
        .transcript
        .iter()
        .position(|r| r.step == StepKind::ToolCall && r.payload["tool"] == "netops.optimize_launch_power");
    match (approve, optimize_call) {
        (true, Some(i)) if i > resolved => {}
        (false, None) => {}
        _ => return Err(format!("mutating call at {optimize_call:?}, resolution at {resolved}")),
    }
    Ok((before, after, out))
}

fn wait<T>(mut f: impl FnMut() -> Option<T>) -> Option<T> {
    let deadline = Instant::now() + Duration::from_secs(60);
    while Instant::now() < deadline {
        if let Some(v) = f() {
            return Some(v);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    None
}

pub fn gateway_in(dir: &std::path::Path) -> Gateway {
    Gateway::open(GatewayConfig {
        data_dir: dir.to_path_buf(),
        clock: Clock::Logical,
        ..Default::default()
    })
    .unwrap()
}

/// Gateway-level check with a live ticket: returns (digest before, digest
/// while pending, digest after, final job status).
pub fn gateway_approval(gw: &Gateway, approve: bool) -> Result<(String, String, String, JobStatus), String> {
    let digest = |s: &str| gw.network_state(s).unwrap()["state_digest"].as_str().unwrap().to_string();
    let s = gw.create_session("conus", None).map_err(|e| e.to_string())?;
    let before = digest(&s);
    let job = gw.submit_query(&s, OPTIM_QUERY).map_err(|e| e.to_string())?;
    let ticket = wait(|| gw.tickets(Some(&s), Some(TicketStatus::Pending)).into_iter().next()).ok_or("no pending ticket")?;
    let pending = digest(&s);
    gw.resolve_approval(
        &ticket.id,
        ApprovalDecision {
            approved: approve,
            note: String::new(),
        },
    )
    .map_err(|e| e.to_string())?;
    let status = wait(|| {
        let j = gw.job(&s, &job).ok()?;
        (j.status != JobStatus::Running).then_some(j.status)
    })
    .ok_or("job did not finish")?;
    Ok((before, pending, digest(&s), status))
}

pub fn check_approval_safety() -> Outcome {
    let mut problems = Vec::new();
    match agent_approval(true) {
        Ok((b, a, o)) if b != a && o.status == RunStatus::Completed => {}
        Ok(_) => problems.push("approved agent run did not apply the profile".to_string()),
        Err(e) => problems.push(e),
    }
    match agent_approval(false) {
        Ok((b, a, o)) if b == a && o.status == RunStatus::Rejected => {}
        Ok(_) => problems.push("rejected agent run mutated state".to_string()),
        Err(e) => problems.push(e),
    }
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway_in(dir.path());
    match gateway_approval(&gw, true) {
        Ok((b, p, a, JobStatus::Completed)) if b == p && a != b => {}
        Ok(r) => problems.push(format!("gateway approve path: {r:?}")),
        Err(e) => problems.push(e),
    }
    match gateway_approval(&gw, false) {
        Ok((b, p, a, JobStatus::Rejected)) if b == p && a == b => {}
        Ok(r) => problems.push(format!("gateway reject path: {r:?}")),
        Err(e) => problems.push(e),
    }
    let pass = problems.is_empty();
    let detail = if pass {
        "digest unchanged while pending and after rejection, changed only after approval (agent and gateway)".to_string()
    } else {
        problems.join("; ")
    };
    Outcome::new(pass, detail)
}

// ------------------------------------------------------------ evaluation

pub fn matrix(n: usize, seed: u64) -> (MatrixReport, Duration) {
    let t = Instant::now();
    let r = run_matrix(&EvalResources::bundled(), &EvalTask::ALL, &ConfigCondition::ALL, n, seed).unwrap();
    (r, t.elapsed())
}

/// Every cell populated with `n` rows, scores in range, no run errors.
pub fn matrix_problems(r: &MatrixReport, n: usize) -> Vec<String> {
    let mut p = Vec::new();
    for t in EvalTask::ALL {
        for c in ConfigCondition::ALL {
            match r.cell(t, c) {
                Some(cell) if cell.n == n => {}
                other => p.push(format!("cell {t}/{c}: {other:?}")),
            }
        }
    }
    for row in &r.rows {
        if !(0.0..=1.0).contains(&row.accuracy) || !(-1.0..=1.0).contains(&row.similarity) {
            p.push(format!("{} {}: accuracy {} similarity {}", row.condition, row.case_id, row.accuracy, row.similarity));
        }
        if let Some(e) = &row.error {
            p.push(format!("{} {}: {e}", row.condition, row.case_id));
        }
    }
    if r.rows.len() != 30 * n {
        p.push(format!("{} rows", r.rows.len()));
    }
    p
}

pub fn check_eval_protocol() -> Outcome {
    let (a, ta) = matrix(20, 11);
    let (b, _) = matrix(20, 11);
    let mut problems = matrix_problems(&a, 20);
    if a.to_json() != b.to_json() || a.to_csv().unwrap() != b.to_csv().unwrap() {
        problems.push("report is not byte-reproducible".into());
    }
    if ta >= Duration::from_secs(300) {
        problems.push(format!("600 cases took {ta:.2?}"));
    }
    let (big, tb) = matrix(80, 11);
    let big_problems = matrix_problems(&big, 80);
    if !big_problems.is_empty() {
        problems.push(format!("2400-case run: {}", big_problems[0]));
    }
    let pass = problems.is_empty();
    let detail = if pass {
        format!("600 cases in {ta:.2?}, 30/30 cells, scores in range, byte-reproducible; 2400 cases in {tb:.2?}")
    } else {
        problems.into_iter().take(3).collect::<Vec<_>>().join("; ")
    };
    Outcome::new(pass, detail)
}

// ------------------------------------------------------------- GSNR report

/// Checks one report and its prefixes; returns an error message on the
/// first violation.
pub fn gsnr_route_check(topo: &NetworkTopology, nodes: &[String], launches: &[ChannelLaunch]) -> Result<(), String> {
    let links = topo.route_links(nodes).map_err(|e| e.to_string())?;
    let th = ModulationThresholds::default();
    let rep = qot::estimate_gsnr(&links, launches, &topo.grid, &th, Modulation::Qpsk).map_err(|e| e.to_string())?;
    let recompute = |p: f64, a: f64, n: f64| 10.0 * (p / (a + n)).log10();
    for (ci, l) in launches.iter().enumerate() {
        let mut prev: Option<(f64, f64, f64)> = None;
        for (li, pl) in rep.per_link.iter().enumerate() {
            let c = &pl.channels[ci];
            if (recompute(c.power_w, c.ase_w, c.nli_w) - c.gsnr_db).abs() > 1e-9 {
                return Err(format!("link {li} channel {}: stored GSNR disagrees with its fields", c.channel_index));
            }
            if rel(c.power_w, l.power_w) > 1e-12 {
                return Err(format!("link {li}: power {} after a transparent link, launched {}", c.power_w, l.power_w));
            }
            if let Some((a, n, g)) = prev {
                if c.ase_w < a || c.nli_w < n || c.gsnr_db > g {
                    return Err(format!("link {li} channel {}: cumulative noise fell or GSNR rose", c.channel_index));
                }
            }
            prev = Some((c.ase_w, c.nli_w, c.gsnr_db));
        }
        let end = &rep.channels[ci];
        if Some(end.gsnr_db) != prev.map(|p| p.2) || (recompute(end.power_w, end.ase_w, end.nli_w) - end.gsnr_db).abs() > 1e-9 {
            return Err("route-end values differ from the last link".into());
        }
    }
    for i in 1..links.len() {
        let part = qot::estimate_gsnr(&links[..i], launches, &topo.grid, &th, Modulation::Qpsk).map_err(|e| e.to_string())?;
        for (ci, c) in part.channels.iter().enumerate() {
            if (c.gsnr_db - rep.per_link[i - 1].channels[ci].gsnr_db).abs() > 1e-9 {
                return Err(format!("prefix of {i} links disagrees with the cumulative report"));
            }
        }
    }
    Ok(())
}

/// Seeded route, channels and powers on a topology.
pub fn random_route(topo: &NetworkTopology, r: &mut ChaCha8Rng) -> (Vec<String>, Vec<ChannelLaunch>) {
    loop {
        let a = &topo.nodes[r.random_range(0..topo.nodes.len())].id;
        let b = &topo.nodes[r.random_range(0..topo.nodes.len())].id;
        if a == b {
            continue;
        }
        let k = r.random_range(1..=3);
        let routes = netops::k_shortest_paths(topo, a, b, k).unwrap();
        let route = routes.last().unwrap().nodes.clone();
        let n_ch = topo.grid.channel_count();
        let mut idx: Vec<usize> = (0..n_ch).collect();
        idx.shuffle(r);
        let launches = idx[..r.random_range(1..=4)]
            .iter()
            .map(|&i| ChannelLaunch {
                channel_index: i,
                power_w: 1e-3 * 10f64.powf(r.random_range(-4.0..=4.0) / 10.0),
            })
            .collect();
        return (route, launches);
    }
}

pub fn gsnr_properties(n: usize, seed: u64) -> Result<(usize, usize), String> {
    let topo = fixtures::conus_topology();
    let mut r = rng(seed);
    let mut longest = 0;
    for i in 0..n {
        let (route, launches) = random_route(&topo, &mut r);
        longest = longest.max(route.len() - 1);
        gsnr_route_check(&topo, &route, &launches).map_err(|e| format!("route {i} {route:?}: {e}"))?;
    }
    Ok((n, longest))
}

pub fn check_gsnr_properties() -> Outcome {
    let t = Instant::now();
    let topo = fixtures::conus_topology();
    let shape = topo.nodes.len() == 77 && topo.links.len() == 99;
    let res = gsnr_properties(200, 0x65);
    let pass = shape && res.is_ok();
    let what = match res {
        Ok((n, longest)) => format!("{n}/200 routes (up to {longest} links) monotone and self-consistent to 1e-9"),
        Err(e) => e,
    };
    Outcome::new(
        pass,
        format!("{what} on {} nodes / {} links; {:.2?}", topo.nodes.len(), topo.links.len(), t.elapsed()),
    )
}
