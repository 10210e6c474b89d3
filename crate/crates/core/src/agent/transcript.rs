//! Append-only run transcripts.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepKind {
    IntentAnalysis,
    TaskDecomposition,
    ResourceSelection,
    ProblemSolving,
    FinalAnswer,
    ToolCall,
    PendingApproval,
    ApprovalResolved,
    Failed,
}

impl StepKind {
    /// The five operating steps, in order.
    pub const FIVE: [StepKind; 5] = [
        StepKind::IntentAnalysis,
        StepKind::TaskDecomposition,
        StepKind::ResourceSelection,
        StepKind::ProblemSolving,
        StepKind::FinalAnswer,
    ];

    /// True for records that end a run.
    pub fn is_terminal(self) -> bool {
        matches!(self, StepKind::FinalAnswer | StepKind::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seq: u64,
    pub ts: u64,
    pub step: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
    pub payload: Value,
}

/// Timestamp source. The logical clock makes transcripts reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Logical,
    Wall,
}

impl Clock {
    fn now(self, seq: u64) -> u64 {
        match self {
            Clock::Logical => seq,
            Clock::Wall => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
        }
    }
}

pub type RecordSink = Box<dyn FnMut(&StepRecord) + Send>;

/// Records in seq order; each is handed to the sink as it is appended.
pub struct Transcript {
    pub run_id: String,
    records: Vec<StepRecord>,
    next_seq: u64,
    clock: Clock,
    sink: Option<RecordSink>,
}

impl std::fmt::Debug for Transcript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transcript")
            .field("run_id", &self.run_id)
            .field("records", &self.records.len())
            .finish()
    }
}

impl Transcript {
    pub fn new(run_id: impl Into<String>, clock: Clock) -> Self {
        Self::starting_at(run_id, clock, 0)
    }

    /// Continues a session-wide sequence from `first_seq`.
    pub fn starting_at(run_id: impl Into<String>, clock: Clock, first_seq: u64) -> Self {
        Transcript {
            run_id: run_id.into(),
            records: Vec::new(),
            next_seq: first_seq,
            clock,
            sink: None,
        }
    }

    pub fn with_sink(mut self, sink: RecordSink) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn push(&mut self, step: StepKind, subtask: Option<&str>, payload: Value) -> &StepRecord {
        let seq = self.next_seq;
        self.next_seq += 1;
        let rec = StepRecord {
            seq,
            ts: self.clock.now(seq),
            step,
            subtask: subtask.map(str::to_string),
            payload,
        };
        if let Some(sink) = self.sink.as_mut() {
            sink(&rec);
        }
        self.records.push(rec);
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StepRecord> {
        self.records
    }

    pub fn count(&self, step: StepKind) -> usize {
        self.records.iter().filter(|r| r.step == step).count()
    }
}

/// One record per line.
pub fn to_ndjson(records: &[StepRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serialises") + "\n")
        .collect()
}
