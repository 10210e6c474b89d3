//! Network-layer operations: k-shortest-path routing, first-fit spectrum
//! assignment, rule-based findings and launch-power optimisation.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{grid_channels, Link, Modulation, NetworkTopology, PowerBounds, ServiceDemand, SpectrumGrid, TopologyError};
use crate::qot::{estimate_gsnr, ChannelLaunch, GsnrReport, ModulationThresholds, QotError};
use crate::dbm_to_w;

/// Minimum objective improvement (dB) for the optimiser to accept a move.
pub const ACCEPT_EPS_DB: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetopsError {
    #[error("no path between {src} and {dst}")]
    NoPath { src: String, dst: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("no carried demand to optimise")]
    NoCarriedDemand,
    #[error(transparent)]
    Qot(#[from] QotError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Path metric in integer micrometres so that equal-length paths compare
/// exactly regardless of summation order.
fn link_weight(link: &Link) -> u64 {
    ((link.length_km() * 1e6).round() as u64).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub length_km: f64,
}

/// Undirected weighted graph with node indices in ascending id order, so
/// index order coincides with lexicographic id order.
struct Graph<'a> {
    ids: Vec<&'a str>,
    adj: Vec<Vec<(usize, u64, usize)>>,
    topo: &'a NetworkTopology,
}

impl<'a> Graph<'a> {
    fn new(topo: &'a NetworkTopology) -> Self {
        let mut ids: Vec<&str> = topo.nodes.iter().map(|n| n.id.as_str()).collect();
        ids.sort_unstable();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for (li, l) in topo.links.iter().enumerate() {
            let (Some(&a), Some(&b)) = (index.get(l.endpoints.0.as_str()), index.get(l.endpoints.1.as_str())) else {
                continue;
            };
            let w = link_weight(l);
            adj[a].push((b, w, li));
            adj[b].push((a, w, li));
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        Graph { ids, adj, topo }
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    fn edge(&self, u: usize, v: usize) -> Option<(u64, usize)> {
        self.adj[u].iter().find(|e| e.0 == v).map(|e| (e.1, e.2))
    }

    /// Shortest path by (weight, lexicographic node sequence) avoiding the
    /// banned nodes and edges. Distances to `dst` come from a reverse
    /// Dijkstra; a greedy walk then takes the smallest-id successor on a
    /// shortest-path edge at each hop.
    fn best_path(
        &self,
        src: usize,
        dst: usize,
        banned_nodes: &[bool],
        banned_edges: &HashSet<(usize, usize)>,
    ) -> Option<(u64, Vec<usize>)> {
        let n = self.ids.len();
        let mut dist = vec![u64::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[dst] = 0;
        heap.push(Reverse((0u64, dst)));
        let usable = |u: usize, v: usize| {
            !banned_nodes[v] && !banned_nodes[u] && !banned_edges.contains(&(u.min(v), u.max(v)))
        };
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w, _) in &self.adj[u] {
                if !usable(u, v) {
                    continue;
                }
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if dist[src] == u64::MAX {
            return None;
        }
        let mut path = vec![src];
        let mut u = src;
        while u != dst {
            let next = self.adj[u]
                .iter()
                .filter(|&&(v, w, _)| usable(u, v) && dist[v] != u64::MAX && dist[v] + w == dist[u])
                .map(|&(v, _, _)| v)
                .min()?;
            path.push(next);
            u = next;
        }
        Some((dist[src], path))
    }

    fn weight_of(&self, path: &[usize]) -> u64 {
        path.windows(2).map(|w| self.edge(w[0], w[1]).map_or(u64::MAX / 4, |e| e.0)).sum()
    }

    fn to_route(&self, path: &[usize]) -> Route {
        let links: Vec<&Link> = path
            .windows(2)
            .map(|w| &self.topo.links[self.edge(w[0], w[1]).expect("path edges exist").1])
            .collect();
        Route {
            nodes: path.iter().map(|&i| self.ids[i].to_string()).collect(),
            links: links.iter().map(|l| l.id.clone()).collect(),
            length_km: links.iter().map(|l| l.length_km()).sum(),
        }
    }
}

/// Up to `k` loopless paths ordered by (total length, node sequence), via
/// Yen's algorithm.
pub fn k_shortest_paths(topo: &NetworkTopology, src: &str, dst: &str, k: usize) -> Result<Vec<Route>, NetopsError> {
    if k == 0 {
        return Err(NetopsError::InvalidRequest("k must be at least 1".into()));
    }
    if src == dst {
        return Err(NetopsError::InvalidRequest(format!("source and destination are both {src}")));
    }
    let g = Graph::new(topo);
    let (Some(s), Some(t)) = (g.index_of(src), g.index_of(dst)) else {
        let missing = if g.index_of(src).is_none() { src } else { dst };
        return Err(NetopsError::Topology(TopologyError::UnknownNode(missing.to_string())));
    };
    let no_path = || NetopsError::NoPath {
        src: src.to_string(),
        dst: dst.to_string(),
    };
    let n = g.ids.len();
    let first = g.best_path(s, t, &vec![false; n], &HashSet::new()).ok_or_else(no_path)?;

    let mut accepted: Vec<Vec<usize>> = vec![first.1];
    let mut candidates: BTreeSet<(u64, Vec<usize>)> = BTreeSet::new();
    while accepted.len() < k {
        let prev = accepted.last().expect("non-empty").clone();
        for i in 0..prev.len() - 1 {
            let spur = prev[i];
            let root = &prev[..=i];
            let mut banned_edges = HashSet::new();
            for p in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    banned_edges.insert((p[i].min(p[i + 1]), p[i].max(p[i + 1])));
                }
            }
            let mut banned_nodes = vec![false; n];
            for &r in &root[..i] {
                banned_nodes[r] = true;
            }
            if let Some((w, spur_path)) = g.best_path(spur, t, &banned_nodes, &banned_edges) {
                let mut path = root[..i].to_vec();
                path.extend(spur_path);
                let total = g.weight_of(root) + w;
                if !accepted.contains(&path) {
                    candidates.insert((total, path));
                }
            }
        }
        match candidates.pop_first() {
            Some((_, path)) => accepted.push(path),
            None => break,
        }
    }
    Ok(accepted.iter().map(|p| g.to_route(p)).collect())
}

/// Occupied channel indices per link id. Both directions of a link share
/// one set of channels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumState {
    pub occupied: BTreeMap<String, BTreeSet<usize>>,
}

impl SpectrumState {
    pub fn is_free(&self, link_id: &str, channel: usize) -> bool {
        self.occupied.get(link_id).is_none_or(|s| !s.contains(&channel))
    }

    pub fn occupy(&mut self, link_id: &str, channel: usize) {
        self.occupied.entry(link_id.to_string()).or_default().insert(channel);
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.values().map(BTreeSet::len).sum()
    }

    /// Lowest channel free on every listed link.
    pub fn first_fit(&self, links: &[String], n_channels: usize) -> Option<usize> {
        (0..n_channels).find(|&c| links.iter().all(|l| self.is_free(l, c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AssignmentStatus {
    Carried,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub demand_id: String,
    pub status: AssignmentStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub assignments: Vec<Assignment>,
    pub blocking_probability: f64,
    pub utilization: f64,
    pub link_utilization: BTreeMap<String, f64>,
    pub channels_per_link: usize,
    pub spectrum: SpectrumState,
}

impl AllocationReport {
    pub fn carried(&self) -> impl Iterator<Item = (&Assignment, &Route, usize)> {
        self.assignments.iter().filter_map(|a| match (&a.route, a.channel) {
            (Some(r), Some(c)) if a.status == AssignmentStatus::Carried => Some((a, r, c)),
            _ => None,
        })
    }

    pub fn blocked(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.iter().filter(|a| a.status == AssignmentStatus::Blocked)
    }
}

fn check_demands(demands: &[ServiceDemand], topo: &NetworkTopology) -> Result<(), NetopsError> {
    if demands.is_empty() {
        return Err(NetopsError::InvalidRequest("no demands supplied".into()));
    }
    let mut seen = BTreeSet::new();
    for d in demands {
        if !seen.insert(d.id.as_str()) {
            return Err(NetopsError::InvalidRequest(format!("duplicate demand id {}", d.id)));
        }
        if d.src == d.dst {
            return Err(NetopsError::InvalidRequest(format!("demand {} has src = dst", d.id)));
        }
        for n in [&d.src, &d.dst] {
            if topo.node(n).is_none() {
                return Err(NetopsError::Topology(TopologyError::UnknownNode(n.clone())));
            }
        }
    }
    Ok(())
}

/// Routes and assigns every demand on an empty spectrum.
pub fn provision(
    demands: &[ServiceDemand],
    topo: &NetworkTopology,
    grid: &SpectrumGrid,
    k: usize,
) -> Result<AllocationReport, NetopsError> {
    provision_onto(SpectrumState::default(), demands, topo, grid, k)
}

/// First-fit routing and spectrum assignment in input order, starting from
/// an existing spectrum state. For each demand the k shortest routes are
/// tried in order and the first route with a channel free on all its links
/// (wavelength continuity) takes the lowest such channel.
pub fn provision_onto(
    mut state: SpectrumState,
    demands: &[ServiceDemand],
    topo: &NetworkTopology,
    grid: &SpectrumGrid,
    k: usize,
) -> Result<AllocationReport, NetopsError> {
    check_demands(demands, topo)?;
    let n_channels = grid.channel_count();
    let mut assignments = Vec::with_capacity(demands.len());
    for d in demands {
        let routes = match k_shortest_paths(topo, &d.src, &d.dst, k) {
            Ok(r) => r,
            Err(NetopsError::NoPath { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        let chosen = routes
            .into_iter()
            .find_map(|r| state.first_fit(&r.links, n_channels).map(|c| (r, c)));
        match chosen {
            Some((route, channel)) => {
                for l in &route.links {
                    state.occupy(l, channel);
                }
                assignments.push(Assignment {
                    demand_id: d.id.clone(),
                    status: AssignmentStatus::Carried,
                    route: Some(route),
                    channel: Some(channel),
                });
            }
            None => assignments.push(Assignment {
                demand_id: d.id.clone(),
                status: AssignmentStatus::Blocked,
                route: None,
                channel: None,
            }),
        }
    }
    let blocked = assignments.iter().filter(|a| a.status == AssignmentStatus::Blocked).count();
    let link_utilization: BTreeMap<String, f64> = topo
        .links
        .iter()
        .map(|l| {
            let used = state.occupied.get(&l.id).map_or(0, BTreeSet::len);
            let u = if n_channels == 0 { 0.0 } else { used as f64 / n_channels as f64 };
            (l.id.clone(), u)
        })
        .collect();
    let capacity = topo.links.len() * n_channels;
    let utilization = if capacity == 0 {
        0.0
    } else {
        state.occupied_count() as f64 / capacity as f64
    };
    Ok(AllocationReport {
        blocking_probability: blocked as f64 / demands.len() as f64,
        utilization,
        link_utilization,
        channels_per_link: n_channels,
        assignments,
        spectrum: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingKind {
    /// metric: margin in dB (< 0)
    NegativeMargin,
    /// metric: margin in dB (0 ≤ m < low-margin threshold)
    LowMargin,
    /// metric: 1.0 per blocked demand
    BlockedDemand,
    /// metric: link utilisation fraction
    CongestedLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFinding {
    pub kind: FindingKind,
    pub subject: String,
    pub detail: String,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub low_margin_db: f64,
    pub congestion_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            low_margin_db: 2.0,
            congestion_threshold: 0.8,
        }
    }
}

/// Flags negative and low margins, blocked demands and congested links,
/// sorted by kind then subject.
pub fn analyze_network(
    report: &AllocationReport,
    gsnr: &BTreeMap<String, GsnrReport>,
    cfg: &AnalysisConfig,
) -> Result<Vec<NetworkFinding>, NetopsError> {
    let mut findings = Vec::new();
    for (a, _, channel) in report.carried() {
        let g = gsnr
            .get(&a.demand_id)
            .ok_or_else(|| NetopsError::Consistency(format!("no GSNR report for carried demand {}", a.demand_id)))?;
        let Some(m) = g.channels.iter().map(|c| c.margin_db).min_by(f64::total_cmp) else {
            continue;
        };
        if m < 0.0 {
            findings.push(NetworkFinding {
                kind: FindingKind::NegativeMargin,
                subject: a.demand_id.clone(),
                detail: format!("channel {channel} margin {m:.2} dB is below the {} threshold", g.modulation),
                metric: m,
            });
        } else if m < cfg.low_margin_db {
            findings.push(NetworkFinding {
                kind: FindingKind::LowMargin,
                subject: a.demand_id.clone(),
                detail: format!("channel {channel} margin {m:.2} dB is under {:.2} dB", cfg.low_margin_db),
                metric: m,
            });
        }
    }
    for a in report.blocked() {
        findings.push(NetworkFinding {
            kind: FindingKind::BlockedDemand,
            subject: a.demand_id.clone(),
            detail: "no route with a continuous free channel".into(),
            metric: 1.0,
        });
    }
    for (link, &u) in &report.link_utilization {
        if u > cfg.congestion_threshold {
            findings.push(NetworkFinding {
                kind: FindingKind::CongestedLink,
                subject: link.clone(),
                detail: format!("utilization {:.1}% exceeds {:.1}%", u * 100.0, cfg.congestion_threshold * 100.0),
                metric: u,
            });
        }
    }
    findings.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.subject.cmp(&b.subject)));
    Ok(findings)
}

/// GSNR report of one carried lightpath at its demand's launch power.
pub fn lightpath_gsnr(
    topo: &NetworkTopology,
    route: &Route,
    channel: usize,
    launch_dbm: f64,
    modulation: Modulation,
    thresholds: &ModulationThresholds,
) -> Result<GsnrReport, NetopsError> {
    let links = topo.route_links(&route.nodes)?;
    let launch = [ChannelLaunch {
        channel_index: channel,
        power_w: dbm_to_w(launch_dbm),
    }];
    Ok(estimate_gsnr(&links, &launch, &topo.grid, thresholds, modulation)?)
}

/// GSNR reports for every carried demand, keyed by demand id.
pub fn carried_gsnr(
    demands: &[ServiceDemand],
    topo: &NetworkTopology,
    report: &AllocationReport,
    thresholds: &ModulationThresholds,
) -> Result<BTreeMap<String, GsnrReport>, NetopsError> {
    let by_id: BTreeMap<&str, &ServiceDemand> = demands.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut out = BTreeMap::new();
    for (a, route, channel) in report.carried() {
        let d = by_id
            .get(a.demand_id.as_str())
            .ok_or_else(|| NetopsError::Consistency(format!("unknown demand {}", a.demand_id)))?;
        let g = lightpath_gsnr(topo, route, channel, d.launch_power_dbm, d.modulation, thresholds)?;
        out.insert(a.demand_id.clone(), g);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub bounds: PowerBounds,
    pub step_db: f64,
    pub max_rounds: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            bounds: PowerBounds::default(),
            step_db: 0.5,
            max_rounds: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationMove {
    pub step: usize,
    pub round: usize,
    pub demand_id: String,
    pub channel_index: usize,
    pub delta_db: f64,
    pub power_dbm: f64,
    pub objective_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<OptimizationMove>,
    pub initial_objective_db: f64,
    pub final_objective_db: f64,
    pub final_launch_dbm: BTreeMap<String, f64>,
    /// Final margin per carried demand.
    pub final_margin_db: BTreeMap<String, f64>,
    pub rounds: usize,
}

struct Lightpath<'a> {
    demand_id: String,
    channel: usize,
    links: Vec<&'a Link>,
    modulation: Modulation,
    power_dbm: f64,
}

impl Lightpath<'_> {
    fn margin_at(&self, power_dbm: f64, grid: &SpectrumGrid, thresholds: &ModulationThresholds) -> Result<f64, NetopsError> {
        let launch = [ChannelLaunch {
            channel_index: self.channel,
            power_w: dbm_to_w(power_dbm),
        }];
        let r = estimate_gsnr(&self.links, &launch, grid, thresholds, self.modulation)?;
        Ok(r.channels[0].margin_db)
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Coordinate ascent on the minimum margin over all carried lightpaths.
///
/// Lightpaths are visited in (channel index, demand id) order; for each,
/// +step then −step (clamped to the bounds) is tried and the first move that
/// raises the objective by more than [`ACCEPT_EPS_DB`] is kept. The search
/// stops after a round without an accepted move or after `max_rounds`.
/// Amplifier gains stay transparent, so only launch powers change.
pub fn optimize_launch_power(
    demands: &[ServiceDemand],
    topo: &NetworkTopology,
    report: &AllocationReport,
    thresholds: &ModulationThresholds,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace, NetopsError> {
    if !(cfg.step_db > 0.0) {
        return Err(NetopsError::InvalidRequest(format!("step_db must be positive, got {}", cfg.step_db)));
    }
    if !(cfg.bounds.min_dbm <= cfg.bounds.max_dbm) {
        return Err(NetopsError::InvalidRequest("power bounds are inverted".into()));
    }
    let by_id: BTreeMap<&str, &ServiceDemand> = demands.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut paths = Vec::new();
    for (a, route, channel) in report.carried() {
        let d = by_id
            .get(a.demand_id.as_str())
            .ok_or_else(|| NetopsError::Consistency(format!("unknown demand {}", a.demand_id)))?;
        if !cfg.bounds.contains(d.launch_power_dbm) {
            return Err(NetopsError::InvalidRequest(format!(
                "demand {} launch power {} dBm is outside the bounds",
                d.id, d.launch_power_dbm
            )));
        }
        paths.push(Lightpath {
            demand_id: d.id.clone(),
            channel,
            links: topo.route_links(&route.nodes)?,
            modulation: d.modulation,
            power_dbm: d.launch_power_dbm,
        });
    }
    if paths.is_empty() {
        return Err(NetopsError::NoCarriedDemand);
    }
    paths.sort_by(|a, b| a.channel.cmp(&b.channel).then_with(|| a.demand_id.cmp(&b.demand_id)));

    let grid = &topo.grid;
    let mut margins = paths
        .iter()
        .map(|p| p.margin_at(p.power_dbm, grid, thresholds))
        .collect::<Result<Vec<_>, _>>()?;
    let initial = min_of(&margins);
    let mut objective = initial;
    let mut iterations = Vec::new();
    let mut rounds = 0;

    while rounds < cfg.max_rounds {
        rounds += 1;
        let mut moved = false;
        for i in 0..paths.len() {
            let current = paths[i].power_dbm;
            for delta in [cfg.step_db, -cfg.step_db] {
                let candidate = cfg.bounds.clamp(current + delta);
                if (candidate - current).abs() < 1e-12 {
                    continue;
                }
                let m = paths[i].margin_at(candidate, grid, thresholds)?;
                let saved = margins[i];
                margins[i] = m;
                let trial = min_of(&margins);
                if trial > objective + ACCEPT_EPS_DB {
                    paths[i].power_dbm = candidate;
                    objective = trial;
                    moved = true;
                    iterations.push(OptimizationMove {
                        step: iterations.len(),
                        round: rounds,
                        demand_id: paths[i].demand_id.clone(),
                        channel_index: paths[i].channel,
                        delta_db: candidate - current,
                        power_dbm: candidate,
                        objective_db: objective,
                    });
                    break;
                }
                margins[i] = saved;
            }
        }
        if !moved {
            break;
        }
    }

    Ok(OptimizationTrace {
        iterations,
        initial_objective_db: initial,
        final_objective_db: objective,
        final_launch_dbm: paths.iter().map(|p| (p.demand_id.clone(), p.power_dbm)).collect(),
        final_margin_db: paths.iter().zip(&margins).map(|(p, &m)| (p.demand_id.clone(), m)).collect(),
        rounds,
    })
}

/// Channel record for a grid index, if it exists.
pub fn channel_center_thz(grid: &SpectrumGrid, index: usize) -> Option<f64> {
    grid_channels(grid).get(index).map(|c| c.center_thz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Amplifier, Element, FiberSpan, Node};

    fn link(id: &str, a: &str, b: &str, km: f64) -> Link {
        Link {
            id: id.into(),
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

    fn topo(nodes: &[&str], links: Vec<Link>, grid: SpectrumGrid) -> NetworkTopology {
        NetworkTopology {
            nodes: nodes
                .iter()
                .map(|n| Node {
                    id: n.to_string(),
                    label: String::new(),
                })
                .collect(),
            links,
            grid,
        }
    }

    fn triangle() -> NetworkTopology {
        topo(
            &["A", "B", "C"],
            vec![link("AB", "A", "B", 80.0), link("BC", "B", "C", 80.0), link("AC", "A", "C", 200.0)],
            SpectrumGrid::single_band(4, 193.0, 100.0, 64.0),
        )
    }

    fn demand(id: &str, s: &str, d: &str) -> ServiceDemand {
        ServiceDemand {
            id: id.into(),
            src: s.into(),
            dst: d.into(),
            launch_power_dbm: 0.0,
            modulation: Modulation::Qpsk,
        }
    }

    #[test]
    fn triangle_paths() {
        let t = triangle();
        let r = k_shortest_paths(&t, "A", "C", 2).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].nodes, ["A", "B", "C"]);
        assert!((r[0].length_km - 160.0).abs() < 1e-9);
        assert_eq!(r[1].nodes, ["A", "C"]);
        assert!((r[1].length_km - 200.0).abs() < 1e-9);
        assert_eq!(k_shortest_paths(&t, "A", "C", 5).unwrap(), r);
    }

    #[test]
    fn disconnected_pair_has_no_path() {
        let t = topo(
            &["A", "B", "C", "D"],
            vec![link("AB", "A", "B", 80.0), link("CD", "C", "D", 80.0)],
            SpectrumGrid::default(),
        );
        assert!(matches!(k_shortest_paths(&t, "A", "D", 1), Err(NetopsError::NoPath { .. })));
        assert!(matches!(k_shortest_paths(&t, "A", "A", 1), Err(NetopsError::InvalidRequest(_))));
        assert!(matches!(k_shortest_paths(&t, "A", "B", 0), Err(NetopsError::InvalidRequest(_))));
    }

    #[test]
    fn equal_length_paths_ordered_lexicographically() {
        // Square A-B-D and A-C-D with identical lengths.
        let t = topo(
            &["A", "B", "C", "D"],
            vec![
                link("AC", "A", "C", 50.0),
                link("CD", "C", "D", 50.0),
                link("AB", "A", "B", 50.0),
                link("BD", "B", "D", 50.0),
            ],
            SpectrumGrid::default(),
        );
        let r = k_shortest_paths(&t, "A", "D", 3).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].nodes, ["A", "B", "D"]);
        assert_eq!(r[1].nodes, ["A", "C", "D"]);
    }

    #[test]
    fn first_demand_takes_shortest_route_channel_zero() {
        let t = triangle();
        let rep = provision(&[demand("d1", "A", "C")], &t, &t.grid, 3).unwrap();
        let a = &rep.assignments[0];
        assert_eq!(a.status, AssignmentStatus::Carried);
        assert_eq!(a.route.as_ref().unwrap().nodes, ["A", "B", "C"]);
        assert_eq!(a.channel, Some(0));
        assert_eq!(rep.blocking_probability, 0.0);
        assert!((rep.utilization - 2.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn first_fit_fills_the_gap() {
        let t = triangle();
        let mut state = SpectrumState::default();
        for c in [0, 1, 3] {
            state.occupy("AB", c);
        }
        let rep = provision_onto(state, &[demand("d1", "A", "B")], &t, &t.grid, 1).unwrap();
        assert_eq!(rep.assignments[0].channel, Some(2));
    }

    #[test]
    fn fifteen_demands_on_two_channels() {
        let t = topo(&["A", "B"], vec![link("AB", "A", "B", 80.0)], SpectrumGrid::single_band(2, 193.0, 100.0, 64.0));
        let demands: Vec<_> = (0..15).map(|i| demand(&format!("d{i:02}"), "A", "B")).collect();
        let rep = provision(&demands, &t, &t.grid, 3).unwrap();
        assert_eq!(rep.carried().count(), 2);
        assert_eq!(rep.blocked().count(), 13);
        assert!((rep.blocking_probability - 13.0 / 15.0).abs() < 1e-15);
        assert_eq!(rep.utilization, 1.0);
        let findings = analyze_network(&rep, &carried_gsnr(&demands, &t, &rep, &Default::default()).unwrap(), &Default::default()).unwrap();
        assert_eq!(findings.iter().filter(|f| f.kind == FindingKind::BlockedDemand).count(), 13);
        assert_eq!(findings.iter().filter(|f| f.kind == FindingKind::CongestedLink).count(), 1);
    }

    #[test]
    fn provision_rejects_bad_demands() {
        let t = triangle();
        assert!(provision(&[], &t, &t.grid, 1).is_err());
        assert!(provision(&[demand("x", "A", "Q")], &t, &t.grid, 1).is_err());
        assert!(provision(&[demand("x", "A", "B"), demand("x", "B", "C")], &t, &t.grid, 1).is_err());
    }

    #[test]
    fn clean_network_has_no_findings() {
        let t = triangle();
        let rep = provision(&[demand("d1", "A", "B")], &t, &t.grid, 1).unwrap();
        let g = carried_gsnr(&[demand("d1", "A", "B")], &t, &rep, &Default::default()).unwrap();
        assert!(g["d1"].channels[0].margin_db > 2.0);
        assert!(analyze_network(&rep, &g, &Default::default()).unwrap().is_empty());
        assert!(matches!(
            analyze_network(&rep, &BTreeMap::new(), &Default::default()),
            Err(NetopsError::Consistency(_))
        ));
    }

    #[test]
    fn negative_margin_finding_carries_the_margin() {
        let t = triangle();
        let rep = provision(&[demand("d1", "A", "B")], &t, &t.grid, 1).unwrap();
        let mut g = carried_gsnr(&[demand("d1", "A", "B")], &t, &rep, &Default::default()).unwrap();
        let ch = &mut g.get_mut("d1").unwrap().channels[0];
        ch.margin_db = -1.0;
        let f = analyze_network(&rep, &g, &Default::default()).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::NegativeMargin);
        assert_eq!(f[0].metric, -1.0);
    }

    #[test]
    fn linear_fiber_pushes_power_to_the_top() {
        let mut t = triangle();
        for l in &mut t.links {
            for e in &mut l.elements {
                if let Element::Span(s) = e {
                    s.gamma_per_w_km = 0.0;
                }
            }
        }
        let demands = [demand("d1", "A", "B")];
        let rep = provision(&demands, &t, &t.grid, 1).unwrap();
        let trace = optimize_launch_power(&demands, &t, &rep, &Default::default(), &Default::default()).unwrap();
        assert_eq!(trace.final_launch_dbm["d1"], 4.0);
        assert_eq!(trace.iterations.len(), 8);
        assert!(trace.iterations.windows(2).all(|w| w[1].objective_db > w[0].objective_db));
    }

    fn qot_plant(launch_dbm: f64) -> (NetworkTopology, Vec<ServiceDemand>) {
        let grid = SpectrumGrid {
            bands: vec![crate::netmodel::Band {
                name: "C".into(),
                start_thz: 193.4 - 0.016,
                end_thz: 193.4 + 0.016,
            }],
            spacing_ghz: 32.0,
            symbol_rate_gbd: 32.0,
            b_ref_ghz: 12.5,
        };
        let mut l = link("AB", "A", "B", 80.0);
        if let Element::Amplifier(a) = &mut l.elements[1] {
            a.gain_db = 16.0;
        }
        let t = topo(&["A", "B"], vec![l], grid);
        let mut d = demand("d1", "A", "B");
        d.launch_power_dbm = launch_dbm;
        (t, vec![d])
    }

    #[test]
    fn single_span_optimum_is_grid_limited_stationary() {
        let (t, demands) = qot_plant(0.0);
        let rep = provision(&demands, &t, &t.grid, 1).unwrap();
        let trace = optimize_launch_power(&demands, &t, &rep, &Default::default(), &Default::default()).unwrap();
        let p = trace.final_launch_dbm["d1"];
        assert_eq!(p, -1.5);

        // Analytic optimum where P_NLI = P_ASE / 2.
        let g = lightpath_gsnr(&t, rep.assignments[0].route.as_ref().unwrap(), 0, 0.0, Modulation::Qpsk, &Default::default()).unwrap();
        let eta = g.channels[0].nli_w / 1e-9;
        let p_opt = crate::w_to_dbm((g.channels[0].ase_w / (2.0 * eta)).cbrt());
        assert!((p - p_opt).abs() <= 0.5, "{p} vs {p_opt}");

        let at = |dbm: f64| {
            let r = lightpath_gsnr(&t, rep.assignments[0].route.as_ref().unwrap(), 0, dbm, Modulation::Qpsk, &Default::default()).unwrap();
            r.channels[0].nli_w - r.channels[0].ase_w / 2.0
        };
        let gap = at(p).abs();
        let one_step = (at(p + 0.5) - at(p)).abs().max((at(p - 0.5) - at(p)).abs());
        assert!(gap <= one_step);
        assert!(trace.iterations.iter().all(|m| m.delta_db == -0.5));
        assert!(trace.final_objective_db >= trace.initial_objective_db);
    }

    #[test]
    fn optimal_profile_is_a_fixed_point() {
        let (t, demands) = qot_plant(-1.5);
        let rep = provision(&demands, &t, &t.grid, 1).unwrap();
        let trace = optimize_launch_power(&demands, &t, &rep, &Default::default(), &Default::default()).unwrap();
        assert!(trace.iterations.is_empty());
        assert_eq!(trace.rounds, 1);
        assert_eq!(trace.final_objective_db, trace.initial_objective_db);
    }

    #[test]
    fn out_of_bounds_launch_is_rejected() {
        let (t, demands) = qot_plant(6.0);
        let rep = provision(&demands, &t, &t.grid, 1).unwrap();
        assert!(matches!(
            optimize_launch_power(&demands, &t, &rep, &Default::default(), &Default::default()),
            Err(NetopsError::InvalidRequest(_))
        ));
    }

    #[test]
    fn optimizer_requires_carried_demands() {
        let t = triangle();
        let rep = AllocationReport {
            assignments: vec![],
            blocking_probability: 0.0,
            utilization: 0.0,
            link_utilization: BTreeMap::new(),
            channels_per_link: 4,
            spectrum: SpectrumState::default(),
        };
        assert!(matches!(
            optimize_launch_power(&[], &t, &rep, &Default::default(), &Default::default()),
            Err(NetopsError::NoCarriedDemand)
        ));
        let bad = OptimizerConfig {
            step_db: 0.0,
            ..Default::default()
        };
        assert!(optimize_launch_power(&[], &t, &rep, &Default::default(), &bad).is_err());
    }
}
