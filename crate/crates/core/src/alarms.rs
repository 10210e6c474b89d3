//! Alarm triage: time-window batching, compression by (type, source),
//! correlation, importance ranking and manual-grounded suggestions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rag::{cosine, Embedder, Retriever};

pub const DEFAULT_WINDOW_MS: u64 = 180_000;
pub const DEFAULT_BATCH_CAP: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlarmError {
    #[error("matrix is {rows}x{cols} but there are {events} events")]
    Dimension { rows: usize, cols: usize, events: usize },
    #[error("the alarm manual index is empty")]
    EmptyKnowledgeBase,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid alarm {id}: {reason}")]
    InvalidAlarm { id: String, reason: String },
}

/// Ordered `Warning < Minor < Major < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Warning,
    Minor,
    Major,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 4] = [Severity::Critical, Severity::Major, Severity::Minor, Severity::Warning];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warning => "WARNING",
            Severity::Minor => "MINOR",
            Severity::Major => "MAJOR",
            Severity::Critical => "CRITICAL",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alarm {
    pub id: String,
    pub ts: u64,
    pub severity: Severity,
    pub alarm_type: String,
    pub source_ne: String,
    pub description: String,
}

impl Alarm {
    pub fn validate(&self) -> Result<(), AlarmError> {
        let bad = |reason: &str| AlarmError::InvalidAlarm {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.alarm_type.trim().is_empty() {
            return Err(bad("empty alarm_type"));
        }
        if self.source_ne.trim().is_empty() {
            return Err(bad("empty source_ne"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parses line-delimited alarm records. Blank lines are skipped; each bad
/// line is reported with its 1-based number and the rest are kept.
pub fn parse_alarm_lines(text: &str) -> (Vec<Alarm>, Vec<LineError>) {
    let mut alarms = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Alarm>(line)
            .map_err(|e| e.to_string())
            .and_then(|a| a.validate().map(|_| a).map_err(|e| e.to_string()));
        match parsed {
            Ok(a) => alarms.push(a),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    (alarms, errors)
}

pub fn to_ndjson(alarms: &[Alarm]) -> String {
    alarms
        .iter()
        .map(|a| serde_json::to_string(a).expect("alarm serialises") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmBatch {
    pub alarms: Vec<Alarm>,
    pub window_start: u64,
    pub window_end: u64,
}

/// Greedy left-to-right packing over the stream sorted by (ts, id). A batch
/// closes when it holds `cap` alarms or the next alarm falls after
/// `window_start + window_ms`.
pub fn window_batches(stream: &[Alarm], window_ms: u64, cap: usize) -> Result<Vec<AlarmBatch>, AlarmError> {
    if cap == 0 {
        return Err(AlarmError::Config("batch cap must be at least 1".into()));
    }
    let mut sorted = stream.to_vec();
    sorted.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.id.cmp(&b.id)));
    let mut batches: Vec<AlarmBatch> = Vec::new();
    for a in sorted {
        match batches.last_mut() {
            Some(b) if b.alarms.len() < cap && a.ts <= b.window_end => b.alarms.push(a),
            _ => batches.push(AlarmBatch {
                window_start: a.ts,
                window_end: a.ts.saturating_add(window_ms),
                alarms: vec![a],
            }),
        }
    }
    Ok(batches)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventKey {
    pub alarm_type: String,
    pub source_ne: String,
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.alarm_type, self.source_ne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedEvent {
    pub key: EventKey,
    pub count: usize,
    pub max_severity: Severity,
    pub first_ts: u64,
    pub last_ts: u64,
    pub representative_description: String,
}

/// Groups alarms by (type, source NE). Events are ordered by severity desc,
/// count desc, first_ts asc, then key.
pub fn compress(alarms: &[Alarm]) -> Vec<CompressedEvent> {
    let mut groups: BTreeMap<EventKey, (CompressedEvent, String)> = BTreeMap::new();
    for a in alarms {
        let key = EventKey {
            alarm_type: a.alarm_type.clone(),
            source_ne: a.source_ne.clone(),
        };
        match groups.get_mut(&key) {
            Some((e, rep_id)) => {
                e.count += 1;
                e.max_severity = e.max_severity.max(a.severity);
                if (a.ts, &a.id) < (e.first_ts, rep_id) {
                    e.representative_description = a.description.clone();
                    *rep_id = a.id.clone();
                }
                e.first_ts = e.first_ts.min(a.ts);
                e.last_ts = e.last_ts.max(a.ts);
            }
            None => {
                let e = CompressedEvent {
                    key: key.clone(),
                    count: 1,
                    max_severity: a.severity,
                    first_ts: a.ts,
                    last_ts: a.ts,
                    representative_description: a.description.clone(),
                };
                groups.insert(key, (e, a.id.clone()));
            }
        }
    }
    let mut events: Vec<CompressedEvent> = groups.into_values().map(|(e, _)| e).collect();
    events.sort_by(|a, b| {
        b.max_severity
            .cmp(&a.max_severity)
            .then_with(|| b.count.cmp(&a.count))
            .then_with(|| a.first_ts.cmp(&b.first_ts))
            .then_with(|| a.key.cmp(&b.key))
    });
    events
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRule {
    pub a: String,
    pub b: String,
    pub same_ne: bool,
    pub value: f64,
}

/// Expert pair table: correlation floors for (type, type, same-NE?) triples.
/// Lookup is symmetric in the two types.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rulebase {
    pub rules: Vec<PairRule>,
}

impl Rulebase {
    pub fn from_json(text: &str) -> Result<Self, AlarmError> {
        let rb: Rulebase = serde_json::from_str(text).map_err(|e| AlarmError::Config(format!("rulebase: {e}")))?;
        for r in &rb.rules {
            if !(0.0..=1.0).contains(&r.value) {
                return Err(AlarmError::Config(format!("rule {}/{} value {} outside [0,1]", r.a, r.b, r.value)));
            }
        }
        Ok(rb)
    }

    pub fn lookup(&self, type_a: &str, type_b: &str, same_ne: bool) -> Option<f64> {
        self.rules
            .iter()
            .filter(|r| r.same_ne == same_ne && ((r.a == type_a && r.b == type_b) || (r.a == type_b && r.b == type_a)))
            .map(|r| r.value)
            .max_by(f64::total_cmp)
    }
}

/// Pairwise correlation: the larger of the rulebase value and the clamped
/// cosine between representative descriptions; unit diagonal.
pub fn correlate(events: &[CompressedEvent], embedder: &dyn Embedder, rulebase: &Rulebase) -> Vec<Vec<f64>> {
    let vecs: Vec<Vec<f64>> = events.iter().map(|e| embedder.embed(&e.representative_description)).collect();
    let n = events.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let (a, b) = (&events[i].key, &events[j].key);
            let cos = cosine(&vecs[i], &vecs[j]).clamp(0.0, 1.0);
            let rule = rulebase
                .lookup(&a.alarm_type, &b.alarm_type, a.source_ne == b.source_ne)
                .unwrap_or(0.0);
            let c = cos.max(rule);
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub severity: f64,
    pub frequency: f64,
    pub correlation: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            severity: 0.5,
            frequency: 0.3,
            correlation: 0.2,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), AlarmError> {
        let w = [self.severity, self.frequency, self.correlation];
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AlarmError::Config(format!("weights {w:?} must be non-negative and sum to 1")));
        }
        Ok(())
    }
}

impl FromStr for Weights {
    type Err = AlarmError;

    /// `"0.5,0.3,0.2"` as severity, frequency, correlation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AlarmError::Config(format!("weights {s:?}: {e}")))?;
        let [severity, frequency, correlation] = parts[..] else {
            return Err(AlarmError::Config(format!("expected three weights, got {s:?}")));
        };
        let w = Weights {
            severity,
            frequency,
            correlation,
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub weights: Weights,
    pub severity_map: BTreeMap<Severity, f64>,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        PriorityConfig {
            weights: Weights::default(),
            severity_map: BTreeMap::from([
                (Severity::Critical, 1.0),
                (Severity::Major, 0.75),
                (Severity::Minor, 0.5),
                (Severity::Warning, 0.25),
            ]),
        }
    }
}

impl PriorityConfig {
    pub fn validate(&self) -> Result<(), AlarmError> {
        self.weights.validate()?;
        for s in Severity::ALL {
            match self.severity_map.get(&s) {
                Some(v) if (0.0..=1.0).contains(v) => {}
                _ => return Err(AlarmError::Config(format!("severity_map needs a value in [0,1] for {s}"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEntry {
    pub rank: usize,
    pub event: CompressedEvent,
    pub severity_term: f64,
    pub frequency_term: f64,
    pub correlation_term: f64,
    pub score: f64,
}

/// Weighted importance score in [0, 100], ranked by score desc, severity
/// desc, first_ts asc, key.
pub fn priority_scores(
    events: &[CompressedEvent],
    matrix: &[Vec<f64>],
    cfg: &PriorityConfig,
) -> Result<Vec<PriorityEntry>, AlarmError> {
    let n = events.len();
    if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
        return Err(AlarmError::Dimension {
            rows: matrix.len(),
            cols: matrix.first().map_or(0, Vec::len),
            events: n,
        });
    }
    cfg.validate()?;
    let max_count = events.iter().map(|e| e.count).max().unwrap_or(1).max(1) as f64;
    let w = cfg.weights;
    let mut entries: Vec<PriorityEntry> = events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let severity_term = cfg.severity_map[&e.max_severity];
            let frequency_term = e.count as f64 / max_count;
            let correlation_term = if n > 1 {
                matrix[i].iter().enumerate().filter(|&(j, _)| j != i).map(|(_, c)| c).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let score = 100.0 * (w.severity * severity_term + w.frequency * frequency_term + w.correlation * correlation_term);
            PriorityEntry {
                rank: 0,
                event: e.clone(),
                severity_term,
                frequency_term,
                correlation_term,
                score,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.event.max_severity.cmp(&a.event.max_severity))
            .then_with(|| a.event.first_ts.cmp(&b.event.first_ts))
            .then_with(|| a.event.key.cmp(&b.event.key))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub alarm_type: String,
    pub source_ne: String,
    pub cause: String,
    pub actions: Vec<String>,
    pub source_refs: Vec<String>,
}

fn field_lines<'a>(text: &'a str, label: &str) -> Vec<&'a str> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            let (head, rest) = l.split_once(':')?;
            head.trim().eq_ignore_ascii_case(label).then(|| rest.trim())
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Cause and actions from the best-ranked retrieved manual entry that has a
/// `Cause:` line; `source_refs` lists every retrieved chunk.
pub fn suggest(top: &PriorityEntry, manual: &dyn Retriever, k: usize) -> Result<Suggestion, AlarmError> {
    if manual.is_empty() {
        return Err(AlarmError::EmptyKnowledgeBase);
    }
    let ev = &top.event;
    let query = format!("{} {}", ev.key.alarm_type, ev.representative_description);
    let hits = manual.retrieve(&query, k);
    let grounded = hits.iter().find(|h| !field_lines(&h.text, "cause").is_empty());
    let (cause, actions) = match grounded {
        Some(h) => (
            field_lines(&h.text, "cause").join(" "),
            field_lines(&h.text, "action").into_iter().map(String::from).collect(),
        ),
        None => (
            hits.first()
                .and_then(|h| h.text.lines().next())
                .unwrap_or_default()
                .trim()
                .to_string(),
            Vec::new(),
        ),
    };
    Ok(Suggestion {
        alarm_type: ev.key.alarm_type.clone(),
        source_ne: ev.key.source_ne.clone(),
        cause,
        actions,
        source_refs: hits.iter().map(|h| h.chunk_ref()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmAnalysis {
    pub events: Vec<CompressedEvent>,
    pub correlation: Vec<Vec<f64>>,
    pub ranked: Vec<PriorityEntry>,
}

/// compress → correlate → priority_scores on one batch.
pub fn analyze_batch(
    batch: &AlarmBatch,
    embedder: &dyn Embedder,
    rulebase: &Rulebase,
    cfg: &PriorityConfig,
) -> Result<AlarmAnalysis, AlarmError> {
    let events = compress(&batch.alarms);
    let correlation = correlate(&events, embedder, rulebase);
    let ranked = priority_scores(&events, &correlation, cfg)?;
    Ok(AlarmAnalysis {
        events,
        correlation,
        ranked,
    })
}

/// Alarm types used by the synthetic generators, with a typical severity and
/// description.
pub const ALARM_CATALOG: &[(&str, Severity, &str)] = &[
    ("LOS", Severity::Critical, "Loss of signal detected on optical receiver port"),
    ("LOF", Severity::Critical, "Loss of frame alignment on OTU client"),
    ("AIS", Severity::Major, "Alarm indication signal received from upstream"),
    ("BDI", Severity::Minor, "Backward defect indication from far end"),
    ("BER_SD", Severity::Major, "Pre-FEC bit error rate signal degrade threshold crossed"),
    ("OPR_LOW", Severity::Major, "Optical receive power below low threshold"),
    ("TEMP_HIGH", Severity::Minor, "Board temperature above warning threshold"),
    ("LASER_EOL", Severity::Warning, "Transmit laser bias current approaching end of life"),
    ("PWR_FAIL", Severity::Critical, "Shelf power supply input failure"),
    ("FAN_FAIL", Severity::Major, "Cooling fan unit failure"),
];
