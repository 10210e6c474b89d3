//! Optical network data model: nodes, fiber spans, amplifiers, links, the
//! spectrum grid and service demands, plus the JSON topology file format and
//! a seeded synthetic topology generator.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance (dB) when checking that a transparent link's amplifier gain
/// matches the preceding span loss.
const TRANSPARENT_TOL_DB: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("topology validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("infeasible topology request: {0}")]
    Infeasible(String),
    #[error("no link between {0} and {1}")]
    NoLink(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
}

impl From<serde_json::Error> for TopologyError {
    fn from(e: serde_json::Error) -> Self {
        TopologyError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpan {
    pub id: String,
    pub length_km: f64,
    pub atten_db_per_km: f64,
    /// Group-velocity dispersion in ps²/km. Only the magnitude enters the NLI
    /// formula.
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
}

impl FiberSpan {
    pub fn loss_db(&self) -> f64 {
        self.length_km * self.atten_db_per_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplifier {
    pub id: String,
    pub gain_db: f64,
    pub nf_db: f64,
    /// Reserved; carried through the file format but not modelled.
    #[serde(default)]
    pub tilt_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    Span(FiberSpan),
    Amplifier(Amplifier),
}

fn default_true() -> bool {
    true
}

/// A bidirectional connection. The reverse direction carries the same
/// element list in the same order, so a route may traverse a link either way
/// and see identical physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    pub endpoints: (String, String),
    pub elements: Vec<Element>,
    /// Transparent mode: every amplifier gain equals the preceding span loss.
    #[serde(default = "default_true")]
    pub transparent: bool,
}

impl Link {
    pub fn spans(&self) -> impl Iterator<Item = &FiberSpan> {
        self.elements.iter().filter_map(|e| match e {
            Element::Span(s) => Some(s),
            Element::Amplifier(_) => None,
        })
    }

    pub fn amplifiers(&self) -> impl Iterator<Item = &Amplifier> {
        self.elements.iter().filter_map(|e| match e {
            Element::Amplifier(a) => Some(a),
            Element::Span(_) => None,
        })
    }

    pub fn length_km(&self) -> f64 {
        self.spans().map(|s| s.length_km).sum()
    }

    pub fn connects(&self, a: &str, b: &str) -> bool {
        let (x, y) = (&self.endpoints.0, &self.endpoints.1);
        (x == a && y == b) || (x == b && y == a)
    }

    /// Recomputes every amplifier gain from the preceding span loss.
    pub fn make_transparent(&mut self) {
        let mut last_loss = None;
        for e in &mut self.elements {
            match e {
                Element::Span(s) => last_loss = Some(s.loss_db()),
                Element::Amplifier(a) => {
                    if let Some(loss) = last_loss.take() {
                        a.gain_db = loss;
                    }
                }
            }
        }
        self.transparent = true;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub name: String,
    pub start_thz: f64,
    pub end_thz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGrid {
    pub bands: Vec<Band>,
    pub spacing_ghz: f64,
    pub symbol_rate_gbd: f64,
    /// Noise reference bandwidth for ASE.
    pub b_ref_ghz: f64,
}

impl Default for SpectrumGrid {
    /// C band 191.6–196.1 THz and L band 186.1–190.6 THz on a 100 GHz grid,
    /// 64 GBd carriers, 12.5 GHz noise reference bandwidth.
    fn default() -> Self {
        SpectrumGrid {
            bands: vec![
                Band {
                    name: "C".into(),
                    start_thz: 191.6,
                    end_thz: 196.1,
                },
                Band {
                    name: "L".into(),
                    start_thz: 186.1,
                    end_thz: 190.6,
                },
            ],
            spacing_ghz: 100.0,
            symbol_rate_gbd: 64.0,
            b_ref_ghz: 12.5,
        }
    }
}

impl SpectrumGrid {
    /// Single band holding exactly `n` channels at `spacing_ghz`.
    pub fn single_band(n: usize, start_thz: f64, spacing_ghz: f64, symbol_rate_gbd: f64) -> Self {
        SpectrumGrid {
            bands: vec![Band {
                name: "C".into(),
                start_thz,
                end_thz: start_thz + n as f64 * spacing_ghz * 1e-3,
            }],
            spacing_ghz,
            symbol_rate_gbd,
            b_ref_ghz: 12.5,
        }
    }

    /// floor((end − start) / spacing), guarded against representation error
    /// such as 4.5 / 0.1 = 44.999….
    pub fn band_channel_count(&self, band: &Band) -> usize {
        let ratio = (band.end_thz - band.start_thz) / (self.spacing_ghz * 1e-3);
        if ratio <= 0.0 || !ratio.is_finite() {
            return 0;
        }
        (ratio + 1e-9).floor() as usize
    }

    pub fn channel_count(&self) -> usize {
        self.bands.iter().map(|b| self.band_channel_count(b)).sum()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.spacing_ghz > 0.0) {
            errs.push(format!("grid spacing_ghz must be positive, got {}", self.spacing_ghz));
        }
        if !(self.symbol_rate_gbd > 0.0) {
            errs.push(format!("grid symbol_rate_gbd must be positive, got {}", self.symbol_rate_gbd));
        }
        if !(self.b_ref_ghz > 0.0) {
            errs.push(format!("grid b_ref_ghz must be positive, got {}", self.b_ref_ghz));
        }
        if self.spacing_ghz < self.symbol_rate_gbd {
            errs.push(format!(
                "grid spacing_ghz {} is below symbol_rate_gbd {}",
                self.spacing_ghz, self.symbol_rate_gbd
            ));
        }
        for b in &self.bands {
            if !(b.end_thz > b.start_thz) {
                errs.push(format!("band {} has end_thz <= start_thz", b.name));
            }
        }
        let mut sorted: Vec<&Band> = self.bands.iter().collect();
        sorted.sort_by(|a, b| a.start_thz.total_cmp(&b.start_thz));
        for w in sorted.windows(2) {
            if w[1].start_thz < w[0].end_thz {
                errs.push(format!("bands {} and {} overlap", w[0].name, w[1].name));
            }
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub index: usize,
    pub center_thz: f64,
    pub band: String,
}

/// Enumerates grid channels in ascending frequency. Centres sit at
/// `band_start + spacing/2 + k·spacing`.
pub fn grid_channels(grid: &SpectrumGrid) -> Vec<Channel> {
    let spacing_thz = grid.spacing_ghz * 1e-3;
    let mut raw: Vec<(f64, String)> = Vec::new();
    for band in &grid.bands {
        for k in 0..grid.band_channel_count(band) {
            let center = band.start_thz + spacing_thz / 2.0 + k as f64 * spacing_thz;
            raw.push((center, band.name.clone()));
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    raw.into_iter()
        .enumerate()
        .map(|(index, (center_thz, band))| Channel {
            index,
            center_thz,
            band,
        })
        .collect()
}

/// Total occupied WDM bandwidth in Hz: Σ channel_count × spacing.
pub fn total_wdm_bandwidth(grid: &SpectrumGrid) -> f64 {
    grid.channel_count() as f64 * grid.spacing_ghz * 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8QAM")]
    Qam8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl Modulation {
    pub const ALL: [Modulation; 4] = [
        Modulation::Qpsk,
        Modulation::Qam8,
        Modulation::Qam16,
        Modulation::Qam64,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam8 => "8QAM",
            Modulation::Qam16 => "16QAM",
            Modulation::Qam64 => "64QAM",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modulation::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown modulation {s:?}"))
    }
}

/// Launch power window in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub min_dbm: f64,
    pub max_dbm: f64,
}

impl Default for PowerBounds {
    fn default() -> Self {
        PowerBounds {
            min_dbm: -4.0,
            max_dbm: 4.0,
        }
    }
}

impl PowerBounds {
    pub fn contains(&self, dbm: f64) -> bool {
        dbm >= self.min_dbm && dbm <= self.max_dbm
    }

    pub fn clamp(&self, dbm: f64) -> f64 {
        dbm.clamp(self.min_dbm, self.max_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceDemand {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub launch_power_dbm: f64,
    pub modulation: Modulation,
}

impl ServiceDemand {
    pub fn validate(&self, bounds: &PowerBounds) -> Vec<String> {
        let mut errs = Vec::new();
        if self.src == self.dst {
            errs.push(format!("demand {}: src equals dst ({})", self.id, self.src));
        }
        if !bounds.contains(self.launch_power_dbm) {
            errs.push(format!(
                "demand {}: launch power {} dBm outside [{}, {}]",
                self.id, self.launch_power_dbm, bounds.min_dbm, bounds.max_dbm
            ));
        }
        errs
    }
}

/// Reads a JSON list of demands.
pub fn load_demands(path: impl AsRef<Path>) -> Result<Vec<ServiceDemand>, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub require_connected: bool,
    /// Minimum noise figure for any amplifier with positive gain.
    pub nf_floor_db: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            require_connected: false,
            nf_floor_db: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    #[serde(default)]
    pub grid: SpectrumGrid,
}

impl NetworkTopology {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        Self::from_json_with(text, &ValidationOptions::default())
    }

    pub fn from_json_with(text: &str, opts: &ValidationOptions) -> Result<Self, TopologyError> {
        let topo: NetworkTopology = serde_json::from_str(text)?;
        topo.validate(opts)?;
        Ok(topo)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology is always serialisable")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TopologyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.connects(a, b))
    }

    /// Resolves a node path into the links it traverses.
    pub fn route_links(&self, path: &[String]) -> Result<Vec<&Link>, TopologyError> {
        for n in path {
            if self.node(n).is_none() {
                return Err(TopologyError::UnknownNode(n.clone()));
            }
        }
        path.windows(2)
            .map(|w| {
                self.link_between(&w[0], &w[1])
                    .ok_or_else(|| TopologyError::NoLink(w[0].clone(), w[1].clone()))
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for l in &self.links {
            adj.entry(&l.endpoints.0).or_default().push(&l.endpoints.1);
            adj.entry(&l.endpoints.1).or_default().push(&l.endpoints.0);
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.nodes[0].id.as_str()]);
        seen.insert(self.nodes[0].id.as_str());
        while let Some(u) = queue.pop_front() {
            for &v in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        self.nodes.iter().all(|n| seen.contains(n.id.as_str()))
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self, opts: &ValidationOptions) -> Result<(), TopologyError> {
        let mut errs = self.grid.validate();

        let mut node_ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.is_empty() {
                errs.push("node with empty id".to_string());
            }
            if !node_ids.insert(n.id.as_str()) {
                errs.push(format!("duplicate node id {}", n.id));
            }
        }

        let mut link_ids = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        for link in &self.links {
            if !link_ids.insert(link.id.as_str()) {
                errs.push(format!("duplicate link id {}", link.id));
            }
            let (a, b) = (&link.endpoints.0, &link.endpoints.1);
            for end in [a, b] {
                if !node_ids.contains(end.as_str()) {
                    errs.push(format!("link {} references unknown node {}", link.id, end));
                }
            }
            if a == b {
                errs.push(format!("link {} is a self-loop on {}", link.id, a));
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            if !pairs.insert(key) {
                errs.push(format!("link {} duplicates the node pair {}-{}", link.id, a, b));
            }
            errs.extend(validate_elements(link, opts));
        }

        if opts.require_connected && !self.is_connected() {
            errs.push("topology is not connected".to_string());
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(TopologyError::Validation(errs))
        }
    }
}

fn validate_elements(link: &Link, opts: &ValidationOptions) -> Vec<String> {
    let mut errs = Vec::new();
    if link.elements.is_empty() {
        errs.push(format!("link {} has no spans", link.id));
        return errs;
    }
    if link.elements.len() % 2 != 0 {
        errs.push(format!("link {}: every span must be followed by an amplifier", link.id));
    }
    let mut prev_loss = None;
    for (i, e) in link.elements.iter().enumerate() {
        match (i % 2, e) {
            (0, Element::Span(s)) => {
                if !(s.length_km > 0.0) {
                    errs.push(format!("span {}: length_km must be positive", s.id));
                }
                if !(s.atten_db_per_km > 0.0) {
                    errs.push(format!("span {}: atten_db_per_km must be positive", s.id));
                }
                if !(s.gamma_per_w_km >= 0.0) {
                    errs.push(format!("span {}: gamma_per_w_km must be nonnegative", s.id));
                }
                if !s.beta2_ps2_per_km.is_finite() {
                    errs.push(format!("span {}: beta2_ps2_per_km must be finite", s.id));
                }
                prev_loss = Some(s.loss_db());
            }
            (1, Element::Amplifier(a)) => {
                if !(a.gain_db >= 0.0) {
                    errs.push(format!("amplifier {}: gain_db must be nonnegative", a.id));
                }
                if a.gain_db > 0.0 && !(a.nf_db >= opts.nf_floor_db) {
                    errs.push(format!(
                        "amplifier {}: nf_db {} below floor {}",
                        a.id, a.nf_db, opts.nf_floor_db
                    ));
                }
                if link.transparent {
                    if let Some(loss) = prev_loss {
                        if (a.gain_db - loss).abs() > TRANSPARENT_TOL_DB * loss.abs().max(1.0) {
                            errs.push(format!(
                                "amplifier {}: transparent link {} needs gain {} dB, has {}",
                                a.id, link.id, loss, a.gain_db
                            ));
                        }
                    }
                }
            }
            (0, Element::Amplifier(a)) => {
                errs.push(format!("link {}: amplifier {} where a span was expected", link.id, a.id))
            }
            (_, Element::Span(s)) => {
                errs.push(format!("link {}: span {} where an amplifier was expected", link.id, s.id))
            }
            _ => unreachable!(),
        }
    }
    errs
}

/// Reads and validates a topology file.
pub fn load_topology(path: impl AsRef<Path>) -> Result<NetworkTopology, TopologyError> {
    load_topology_with(path, &ValidationOptions::default())
}

pub fn load_topology_with(
    path: impl AsRef<Path>,
    opts: &ValidationOptions,
) -> Result<NetworkTopology, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    NetworkTopology::from_json_with(&text, opts)
}

/// Parameter ranges for synthetic plant generation. Ranges are inclusive
/// `(low, high)` pairs sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanProfile {
    pub length_km: (f64, f64),
    pub atten_db_per_km: (f64, f64),
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
    pub nf_db: (f64, f64),
    /// Side lengths (km) of the rectangle nodes are scattered over.
    pub area_km: (f64, f64),
    /// Nominal span length used to turn a geometric distance into a span count.
    pub nominal_span_km: f64,
}

impl Default for SpanProfile {
    fn default() -> Self {
        SpanProfile {
            length_km: (60.0, 120.0),
            atten_db_per_km: (0.19, 0.22),
            beta2_ps2_per_km: -21.27,
            gamma_per_w_km: 1.3,
            nf_db: (4.5, 6.0),
            area_km: (4500.0, 2500.0),
            nominal_span_km: 100.0,
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

/// Seeded random geometric graph with exactly `n_nodes` nodes and `n_links`
/// links. A Euclidean minimum spanning tree guarantees connectivity; the
/// remaining links are the geometrically shortest unused node pairs.
pub fn generate_synthetic_topology(
    n_nodes: usize,
    n_links: usize,
    seed: u64,
    profile: &SpanProfile,
) -> Result<NetworkTopology, TopologyError> {
    if n_nodes == 0 {
        return Err(TopologyError::Infeasible("at least one node is required".into()));
    }
    let max_links = n_nodes * (n_nodes - 1) / 2;
    if n_links + 1 < n_nodes {
        return Err(TopologyError::Infeasible(format!(
            "{n_links} links cannot connect {n_nodes} nodes (need at least {})",
            n_nodes - 1
        )));
    }
    if n_links > max_links {
        return Err(TopologyError::Infeasible(format!(
            "{n_links} links exceed the simple-graph maximum {max_links} for {n_nodes} nodes"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n_nodes.to_string().len().max(2);
    let nodes: Vec<Node> = (1..=n_nodes)
        .map(|i| Node {
            id: format!("N{i:0width$}"),
            label: format!("Site {i}"),
        })
        .collect();
    let pos: Vec<(f64, f64)> = (0..n_nodes)
        .map(|_| {
            (
                rng.random_range(0.0..profile.area_km.0),
                rng.random_range(0.0..profile.area_km.1),
            )
        })
        .collect();
    let dist = |i: usize, j: usize| ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();

    // Prim's MST, ties resolved by lowest index.
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut in_tree = vec![false; n_nodes];
    let mut best = vec![(f64::INFINITY, usize::MAX); n_nodes];
    in_tree[0] = true;
    for j in 1..n_nodes {
        best[j] = (dist(0, j), 0);
    }
    for _ in 1..n_nodes {
        let next = (0..n_nodes)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
            .expect("a node outside the tree exists");
        in_tree[next] = true;
        let parent = best[next].1;
        edges.insert((parent.min(next), parent.max(next)));
        for j in 0..n_nodes {
            if !in_tree[j] {
                let d = dist(next, j);
                if d < best[j].0 {
                    best[j] = (d, next);
                }
            }
        }
    }

    if edges.len() < n_links {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                if !edges.contains(&(i, j)) {
                    candidates.push((dist(i, j), i, j));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, i, j) in candidates.into_iter().take(n_links - edges.len()) {
            edges.insert((i, j));
        }
    }

    let lwidth = n_links.to_string().len().max(3);
    let mut links = Vec::with_capacity(n_links);
    for (k, &(i, j)) in edges.iter().enumerate() {
        let id = format!("L{:0lwidth$}", k + 1);
        let n_spans = ((dist(i, j) / profile.nominal_span_km).round() as usize).max(1);
        let mut elements = Vec::with_capacity(2 * n_spans);
        for s in 0..n_spans {
            let span = FiberSpan {
                id: format!("{id}-S{}", s + 1),
                length_km: round_to(sample(&mut rng, profile.length_km), 3),
                atten_db_per_km: round_to(sample(&mut rng, profile.atten_db_per_km), 4),
                beta2_ps2_per_km: profile.beta2_ps2_per_km,
                gamma_per_w_km: profile.gamma_per_w_km,
            };
            let amp = Amplifier {
                id: format!("{id}-A{}", s + 1),
                gain_db: span.loss_db(),
                nf_db: round_to(sample(&mut rng, profile.nf_db), 2),
                tilt_db: 0.0,
            };
            elements.push(Element::Span(span));
            elements.push(Element::Amplifier(amp));
        }
        links.push(Link {
            id,
            endpoints: (nodes[i].id.clone(), nodes[j].id.clone()),
            elements,
            transparent: true,
        });
    }

    Ok(NetworkTopology {
        nodes,
        links,
        grid: SpectrumGrid::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_json() -> &'static str {
        r#"{
          "nodes": [{"id": "A", "label": "a"}, {"id": "B"}],
          "links": [{
            "id": "AB",
            "endpoints": ["A", "B"],
            "elements": [
              {"span": {"id": "s1", "length_km": 80, "atten_db_per_km": 0.2,
                        "beta2_ps2_per_km": -21.27, "gamma_per_w_km": 1.3}},
              {"amplifier": {"id": "a1", "gain_db": 16, "nf_db": 5}}
            ]
          }]
        }"#
    }

    #[test]
    fn smallest_valid_topology_loads() {
        let t = NetworkTopology::from_json(two_node_json()).unwrap();
        assert_eq!(t.nodes.len(), 2);
        assert_eq!(t.links.len(), 1);
        assert_eq!(t.grid, SpectrumGrid::default());
        assert!(t.links[0].transparent);
    }

    #[test]
    fn unknown_endpoint_is_named() {
        let text = two_node_json().replace(r#"["A", "B"]"#, r#"["A", "Z"]"#);
        match NetworkTopology::from_json(&text) {
            Err(TopologyError::Validation(errs)) => {
                assert!(errs.iter().any(|e| e.contains("Z")), "{errs:?}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = two_node_json().replacen(r#""nodes""#, r#""extra": 1, "nodes""#, 1);
        match NetworkTopology::from_json(&text) {
            Err(TopologyError::Parse { line, message, .. }) => {
                assert!(line >= 1);
                assert!(message.contains("extra"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_collects_every_violation() {
        let text = two_node_json()
            .replace(r#""gain_db": 16"#, r#""gain_db": 10"#)
            .replace(r#""length_km": 80"#, r#""length_km": -1"#);
        let Err(TopologyError::Validation(errs)) = NetworkTopology::from_json(&text) else {
            panic!("expected validation failure");
        };
        assert!(errs.len() >= 2, "{errs:?}");
    }

    #[test]
    fn non_transparent_link_allows_explicit_gain() {
        let text = two_node_json()
            .replace(r#""gain_db": 16"#, r#""gain_db": 20"#)
            .replace(r#""endpoints""#, r#""transparent": false, "endpoints""#);
        NetworkTopology::from_json(&text).unwrap();
    }

    #[test]
    fn alternation_is_enforced() {
        let text = two_node_json().replace(
            r#"{"amplifier": {"id": "a1", "gain_db": 16, "nf_db": 5}}"#,
            r#"{"amplifier": {"id": "a1", "gain_db": 16, "nf_db": 5}},
               {"amplifier": {"id": "a2", "gain_db": 0, "nf_db": 5}}"#,
        );
        assert!(matches!(
            NetworkTopology::from_json(&text),
            Err(TopologyError::Validation(_))
        ));
    }

    #[test]
    fn low_noise_figure_is_rejected() {
        let text = two_node_json().replace(r#""nf_db": 5"#, r#""nf_db": 2"#);
        assert!(NetworkTopology::from_json(&text).is_err());
    }

    #[test]
    fn grid_channels_single_band() {
        let grid = SpectrumGrid {
            bands: vec![Band {
                name: "C".into(),
                start_thz: 191.6,
                end_thz: 191.9,
            }],
            spacing_ghz: 100.0,
            symbol_rate_gbd: 64.0,
            b_ref_ghz: 12.5,
        };
        let ch = grid_channels(&grid);
        let centers: Vec<f64> = ch.iter().map(|c| c.center_thz).collect();
        assert_eq!(ch.len(), 3);
        for (got, want) in centers.iter().zip([191.65, 191.75, 191.85]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((total_wdm_bandwidth(&grid) - 3.0e11).abs() < 1.0);
    }

    #[test]
    fn default_grid_has_ninety_channels() {
        let grid = SpectrumGrid::default();
        let ch = grid_channels(&grid);
        assert_eq!(ch.len(), 90);
        assert_eq!(ch.iter().filter(|c| c.band == "C").count(), 45);
        assert_eq!(ch[0].band, "L");
        assert!(ch.windows(2).all(|w| w[0].center_thz < w[1].center_thz));
        assert!(ch.iter().enumerate().all(|(i, c)| c.index == i));
        assert_eq!(total_wdm_bandwidth(&grid), 9.0e12);
    }

    #[test]
    fn empty_grid() {
        let grid = SpectrumGrid {
            bands: vec![],
            ..SpectrumGrid::default()
        };
        assert!(grid_channels(&grid).is_empty());
        assert_eq!(total_wdm_bandwidth(&grid), 0.0);
    }

    #[test]
    fn single_channel_at_symbol_rate() {
        let grid = SpectrumGrid::single_band(1, 193.4, 32.0, 32.0);
        assert_eq!(grid.channel_count(), 1);
        assert!((total_wdm_bandwidth(&grid) - 3.2e10).abs() < 1e-3);
    }

    #[test]
    fn overlapping_bands_invalid() {
        let grid = SpectrumGrid {
            bands: vec![
                Band {
                    name: "A".into(),
                    start_thz: 190.0,
                    end_thz: 192.0,
                },
                Band {
                    name: "B".into(),
                    start_thz: 191.0,
                    end_thz: 193.0,
                },
            ],
            ..SpectrumGrid::default()
        };
        assert!(!grid.validate().is_empty());
    }

    #[test]
    fn generator_small_and_infeasible() {
        let t = generate_synthetic_topology(3, 2, 1, &SpanProfile::default()).unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.links.len(), 2);
        assert!(t.is_connected());
        assert!(matches!(
            generate_synthetic_topology(5, 3, 9, &SpanProfile::default()),
            Err(TopologyError::Infeasible(_))
        ));
        assert!(matches!(
            generate_synthetic_topology(4, 7, 9, &SpanProfile::default()),
            Err(TopologyError::Infeasible(_))
        ));
    }

    #[test]
    fn generator_conus_scale() {
        let t = generate_synthetic_topology(77, 99, 42, &SpanProfile::default()).unwrap();
        assert_eq!(t.nodes.len(), 77);
        assert_eq!(t.links.len(), 99);
        t.validate(&ValidationOptions {
            require_connected: true,
            ..Default::default()
        })
        .unwrap();
        for s in t.links.iter().flat_map(|l| l.spans()) {
            assert!((60.0..=120.0).contains(&s.length_km));
            assert!((0.19..=0.22).contains(&s.atten_db_per_km));
        }
    }

    #[test]
    fn modulation_text_forms() {
        assert_eq!("16qam".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert_eq!(serde_json::to_string(&Modulation::Qam8).unwrap(), "\"8QAM\"");
        assert!("BPSK".parse::<Modulation>().is_err());
    }

    #[test]
    fn route_links_resolves_both_directions() {
        let t = NetworkTopology::from_json(two_node_json()).unwrap();
        let fwd = t.route_links(&["A".into(), "B".into()]).unwrap();
        let rev = t.route_links(&["B".into(), "A".into()]).unwrap();
        assert_eq!(fwd[0].id, rev[0].id);
        assert!(matches!(
            t.route_links(&["A".into(), "Q".into()]),
            Err(TopologyError::UnknownNode(_))
        ));
    }
}
