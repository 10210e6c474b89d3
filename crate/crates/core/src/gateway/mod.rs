//! Sessions, query jobs, approval tickets, alarm ingestion and eval jobs,
//! with append-only persistence under a data directory. [`http`] exposes
//! the same operations over HTTP and server-sent events.

pub mod config;
pub mod http;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::broadcast;

pub use config::{BackendConfig, GatewayConfig};

use crate::agent::{
    Agent, ApprovalDecision, ApprovalGate, ApprovalTicket, FinalAnswer, HttpBackend, LlmBackend, RunStatus,
    ScriptedBackend, SessionState, StepKind, StepRecord, TicketStatus, Transcript,
};
use crate::alarms::{parse_alarm_lines, LineError, Rulebase};
use crate::evalharness::{self, ConfigCondition, EvalResources, EvalTask, MatrixReport};
use crate::fixtures;
use crate::netmodel::ServiceDemand;
use crate::netops;
use crate::qot::GsnrReport;
use crate::rag::{index_dir, ChunkConfig};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("session not found: {0}")]
    SessionNotFound(String),
    #[error("topology not found: {0}")]
    TopologyNotFound(String),
    #[error("session {0} already has a run in flight")]
    Busy(String),
    #[error("unknown ticket: {0}")]
    UnknownTicket(String),
    #[error("ticket {0} is already resolved")]
    AlreadyResolved(String),
    #[error("unknown job: {0}")]
    UnknownJob(String),
    #[error("unknown service: {0}")]
    UnknownService(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::SessionNotFound(_) => "SESSION_NOT_FOUND",
            GatewayError::TopologyNotFound(_) => "TOPOLOGY_NOT_FOUND",
            GatewayError::Busy(_) => "BUSY",
            GatewayError::UnknownTicket(_) => "UNKNOWN_TICKET",
            GatewayError::AlreadyResolved(_) => "ALREADY_RESOLVED",
            GatewayError::UnknownJob(_) => "UNKNOWN_JOB",
            GatewayError::UnknownService(_) => "UNKNOWN_SERVICE",
            GatewayError::InvalidRequest(_) => "INVALID_REQUEST",
            GatewayError::Config(_) => "CONFIG",
            GatewayError::Io(_) => "IO",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            GatewayError::SessionNotFound(_)
            | GatewayError::TopologyNotFound(_)
            | GatewayError::UnknownTicket(_)
            | GatewayError::UnknownJob(_)
            | GatewayError::UnknownService(_) => 404,
            GatewayError::Busy(_) | GatewayError::AlreadyResolved(_) => 409,
            GatewayError::InvalidRequest(_) => 400,
            GatewayError::Config(_) | GatewayError::Io(_) => 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Running,
    Completed,
    Rejected,
    Failed,
}

impl From<RunStatus> for JobStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Completed => JobStatus::Completed,
            RunStatus::Rejected => JobStatus::Rejected,
            RunStatus::Failed => JobStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub job_id: String,
    pub session_id: String,
    pub query: String,
    pub status: JobStatus,
    pub first_seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<FinalAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub topology_ref: String,
    pub busy: bool,
    pub alarms: usize,
    pub demands: usize,
    pub next_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalRequest {
    pub tasks: Vec<EvalTask>,
    pub conditions: Vec<ConfigCondition>,
    pub n: usize,
    pub seed: u64,
}

impl Default for EvalRequest {
    fn default() -> Self {
        EvalRequest {
            tasks: EvalTask::ALL.to_vec(),
            conditions: ConfigCondition::ALL.to_vec(),
            n: 20,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJob {
    pub id: String,
    pub status: JobStatus,
    pub request: EvalRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MatrixReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Persisted session header.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionMeta {
    id: String,
    topology_ref: String,
    state: SessionState,
}

/// One transcript line: the record tagged with its job.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LoggedRecord {
    job: String,
    #[serde(flatten)]
    record: StepRecord,
}

struct Session {
    id: String,
    topology_ref: String,
    dir: PathBuf,
    state: Mutex<SessionState>,
    busy: AtomicBool,
    log: Mutex<Vec<LoggedRecord>>,
    jobs: Mutex<BTreeMap<String, JobInfo>>,
    events: broadcast::Sender<StepRecord>,
}

struct Inner {
    cfg: GatewayConfig,
    agent: Agent,
    eval: EvalResources,
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
    tickets: Mutex<BTreeMap<String, ApprovalTicket>>,
    ticket_cv: Condvar,
    evals: Mutex<BTreeMap<String, EvalJob>>,
}

/// Cheap to clone; all clones share state.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn append_line<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(value).expect("serialisable");
    line.push('\n');
    f.write_all(line.as_bytes())
}

/// Reads a line-delimited file, skipping a torn final line.
fn read_lines<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Ok(v) = serde_json::from_str(&line) {
            out.push(v);
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value).expect("serialisable"))?;
    fs::rename(tmp, path)
}

fn new_id(prefix: &str) -> String {
    let u = uuid::Uuid::new_v4().simple().to_string();
    format!("{prefix}{}", &u[..12])
}

impl Gateway {
    /// Builds the backend and resources named by `cfg`, then replays the
    /// data directory.
    pub fn open(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        let backend: Arc<dyn LlmBackend> = match &cfg.backend {
            BackendConfig::Scripted { path: None } => Arc::new(fixtures::scripted_backend()),
            BackendConfig::Scripted { path: Some(p) } => Arc::new(
                ScriptedBackend::from_json(&fs::read_to_string(p)?).map_err(|e| GatewayError::Config(e.to_string()))?,
            ),
            BackendConfig::Http(h) => {
                Arc::new(HttpBackend::new(h.clone()).map_err(|e| GatewayError::Config(e.to_string()))?)
            }
        };
        Self::with_backend(cfg, backend)
    }

    pub fn with_backend(cfg: GatewayConfig, backend: Arc<dyn LlmBackend>) -> Result<Self, GatewayError> {
        let cerr = |e: String| GatewayError::Config(e);
        let store = match &cfg.knowledge_dir {
            Some(d) => index_dir(d, ChunkConfig::default()).map_err(|e| cerr(e.to_string()))?,
            None => fixtures::knowledge_store(),
        };
        let rulebase = match &cfg.rulebase {
            Some(p) => Rulebase::from_json(&fs::read_to_string(p)?).map_err(|e| cerr(e.to_string()))?,
            None => fixtures::rulebase(),
        };
        let examples = match &cfg.examples {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| cerr(e.to_string()))?,
            None => fixtures::example_bank(),
        };
        let mut eval = EvalResources::bundled();
        eval.backend = backend;
        eval.store = Arc::new(store);
        eval.rulebase = Arc::new(rulebase);
        eval.examples = Arc::new(examples);
        let mut agent = eval.agent(cfg.condition);
        agent.config.clock = cfg.clock;

        fs::create_dir_all(cfg.data_dir.join("sessions"))?;
        fs::create_dir_all(cfg.data_dir.join("eval"))?;
        let gw = Gateway {
            inner: Arc::new(Inner {
                cfg,
                agent,
                eval,
                sessions: Mutex::new(BTreeMap::new()),
                tickets: Mutex::new(BTreeMap::new()),
                ticket_cv: Condvar::new(),
                evals: Mutex::new(BTreeMap::new()),
            }),
        };
        gw.replay()?;
        Ok(gw)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.inner.cfg
    }

    fn data_dir(&self) -> &Path {
        &self.inner.cfg.data_dir
    }

    fn tickets_path(&self) -> PathBuf {
        self.data_dir().join("tickets.ndjson")
    }

    /// Restores sessions, transcripts, tickets and eval reports. Runs and
    /// tickets left open by a previous process are closed as interrupted.
    fn replay(&self) -> Result<(), GatewayError> {
        let mut tickets = lock(&self.inner.tickets);
        for t in read_lines::<ApprovalTicket>(&self.tickets_path())? {
            tickets.insert(t.id.clone(), t);
        }
        let orphaned: Vec<String> = tickets
            .values()
            .filter(|t| t.status == TicketStatus::Pending)
            .map(|t| t.id.clone())
            .collect();
        for id in orphaned {
            let t = tickets.get_mut(&id).expect("present");
            t.status = TicketStatus::Rejected;
            t.note = "run interrupted by restart".into();
            append_line(&self.tickets_path(), t)?;
        }
        drop(tickets);

        let mut dirs: Vec<PathBuf> = fs::read_dir(self.data_dir().join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").is_file())
            .collect();
        dirs.sort();
        let mut sessions = lock(&self.inner.sessions);
        for dir in dirs {
            let meta: SessionMeta = serde_json::from_slice(&fs::read(dir.join("session.json"))?)
                .map_err(|e| GatewayError::Config(format!("{}: {e}", dir.display())))?;
            let mut state = meta.state;
            if let Ok(bytes) = fs::read(dir.join("network.json")) {
                if let Ok(n) = serde_json::from_slice(&bytes) {
                    state.network = n;
                }
            }
            state.alarms.extend(read_lines(&dir.join("alarms.ndjson"))?);
            let log: Vec<LoggedRecord> = read_lines(&dir.join("transcript.ndjson"))?;
            let mut jobs = BTreeMap::new();
            for j in read_lines::<JobInfo>(&dir.join("jobs.ndjson"))? {
                jobs.insert(j.job_id.clone(), j);
            }
            for j in jobs.values_mut().filter(|j| j.status == JobStatus::Running) {
                j.status = JobStatus::Failed;
                j.error = Some("run interrupted by restart".into());
                append_line(&dir.join("jobs.ndjson"), j)?;
            }
            let (events, _) = broadcast::channel(1024);
            sessions.insert(
                meta.id.clone(),
                Arc::new(Session {
                    id: meta.id,
                    topology_ref: meta.topology_ref,
                    dir,
                    state: Mutex::new(state),
                    busy: AtomicBool::new(false),
                    log: Mutex::new(log),
                    jobs: Mutex::new(jobs),
                    events,
                }),
            );
        }
        drop(sessions);

        let mut evals = lock(&self.inner.evals);
        for e in fs::read_dir(self.data_dir().join("eval"))?.filter_map(Result::ok) {
            if let Ok(bytes) = fs::read(e.path().join("job.json")) {
                if let Ok(mut job) = serde_json::from_slice::<EvalJob>(&bytes) {
                    if job.status == JobStatus::Running {
                        job.status = JobStatus::Failed;
                        job.error = Some("run interrupted by restart".into());
                    }
                    job.report = fs::read(e.path().join("report.json"))
                        .ok()
                        .and_then(|b| serde_json::from_slice(&b).ok());
                    evals.insert(job.id.clone(), job);
                }
            }
        }
        Ok(())
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, GatewayError> {
        lock(&self.inner.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::SessionNotFound(id.to_string()))
    }

    /// New session on a bundled or file topology. Demands default to the
    /// topology's bundled set.
    pub fn create_session(&self, topology_ref: &str, demands: Option<Vec<ServiceDemand>>) -> Result<String, GatewayError> {
        let topo = fixtures::resolve_topology(topology_ref)
            .map_err(|e| GatewayError::TopologyNotFound(format!("{topology_ref}: {e}")))?;
        let demands = demands
            .or_else(|| fixtures::bundled_demands(topology_ref))
            .unwrap_or_default();
        for d in &demands {
            if topo.node(&d.src).is_none() || topo.node(&d.dst).is_none() {
                return Err(GatewayError::InvalidRequest(format!("demand {} references an unknown node", d.id)));
            }
        }
        let id = new_id("s-");
        let dir = self.data_dir().join("sessions").join(&id);
        fs::create_dir_all(&dir)?;
        let state = SessionState {
            id: id.clone(),
            topology: Some(topo),
            demands,
            ..Default::default()
        };
        write_json(
            &dir.join("session.json"),
            &SessionMeta {
                id: id.clone(),
                topology_ref: topology_ref.to_string(),
                state: state.clone(),
            },
        )?;
        let (events, _) = broadcast::channel(1024);
        lock(&self.inner.sessions).insert(
            id.clone(),
            Arc::new(Session {
                id: id.clone(),
                topology_ref: topology_ref.to_string(),
                dir,
                state: Mutex::new(state),
                busy: AtomicBool::new(false),
                log: Mutex::new(vec![]),
                jobs: Mutex::new(BTreeMap::new()),
                events,
            }),
        );
        Ok(id)
    }

    pub fn sessions(&self) -> Vec<SessionInfo> {
        let sessions: Vec<Arc<Session>> = lock(&self.inner.sessions).values().cloned().collect();
        sessions
            .iter()
            .map(|s| {
                let st = lock(&s.state);
                SessionInfo {
                    id: s.id.clone(),
                    topology_ref: s.topology_ref.clone(),
                    busy: s.busy.load(Ordering::SeqCst),
                    alarms: st.alarms.len(),
                    demands: st.demands.len(),
                    next_seq: lock(&s.log).len() as u64,
                }
            })
            .collect()
    }

    /// Starts an agent run on a worker thread and returns its job id. The
    /// run works on a copy of the session state; network fields are written
    /// back when it ends.
    pub fn submit_query(&self, session_id: &str, text: &str) -> Result<String, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("query text is empty".into()));
        }
        let s = self.session(session_id)?;
        if s.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_err() {
            return Err(GatewayError::Busy(session_id.to_string()));
        }
        let job_id = new_id("j-");
        let first_seq = lock(&s.log).len() as u64;
        let info = JobInfo {
            job_id: job_id.clone(),
            session_id: s.id.clone(),
            query: text.to_string(),
            status: JobStatus::Running,
            first_seq,
            error: None,
            final_answer: None,
        };
        if let Err(e) = append_line(&s.dir.join("jobs.ndjson"), &info) {
            s.busy.store(false, Ordering::SeqCst);
            return Err(e.into());
        }
        lock(&s.jobs).insert(job_id.clone(), info);
        let mut work = lock(&s.state).clone();

        let gw = self.clone();
        let sess = s.clone();
        let job = job_id.clone();
        let sink_gw = self.clone();
        let sink_sess = s.clone();
        let sink_job = job_id.clone();
        let transcript = Transcript::starting_at(&job_id, self.inner.cfg.clock, first_seq).with_sink(Box::new(move |r| {
            sink_gw.record(&sink_sess, &sink_job, r);
        }));
        let query = text.to_string();
        std::thread::spawn(move || {
            let gate = TicketGate { gw: gw.clone() };
            let out = gw.inner.agent.run(&query, &mut work, &gate, transcript);
            {
                let mut st = lock(&sess.state);
                st.network = work.network;
                if let Err(e) = write_json(&sess.dir.join("network.json"), &st.network) {
                    tracing::error!(session = %sess.id, "persisting network state failed: {e}");
                }
            }
            let mut jobs = lock(&sess.jobs);
            if let Some(info) = jobs.get_mut(&job) {
                info.status = out.status.into();
                info.error = out.error;
                info.final_answer = out.final_answer;
                if let Err(e) = append_line(&sess.dir.join("jobs.ndjson"), info) {
                    tracing::error!(session = %sess.id, "persisting job failed: {e}");
                }
            }
            drop(jobs);
            sess.busy.store(false, Ordering::SeqCst);
        });
        Ok(job_id)
    }

    /// Transcript sink: persist, register any new ticket, then publish.
    fn record(&self, s: &Session, job: &str, r: &StepRecord) {
        let mut log = lock(&s.log);
        let line = LoggedRecord {
            job: job.to_string(),
            record: r.clone(),
        };
        if let Err(e) = append_line(&s.dir.join("transcript.ndjson"), &line) {
            tracing::error!(session = %s.id, "persisting transcript failed: {e}");
        }
        if r.step == StepKind::PendingApproval {
            if let Some(t) = r.payload.get("ticket").and_then(|t| serde_json::from_value::<ApprovalTicket>(t.clone()).ok()) {
                if let Err(e) = append_line(&self.tickets_path(), &t) {
                    tracing::error!(ticket = %t.id, "persisting ticket failed: {e}");
                }
                lock(&self.inner.tickets).insert(t.id.clone(), t);
            }
        }
        log.push(line);
        let _ = s.events.send(r.clone());
    }

    pub fn job(&self, session_id: &str, job_id: &str) -> Result<JobInfo, GatewayError> {
        lock(&self.session(session_id)?.jobs)
            .get(job_id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownJob(job_id.to_string()))
    }

    pub fn transcript(&self, session_id: &str, job_id: &str) -> Result<Vec<StepRecord>, GatewayError> {
        let s = self.session(session_id)?;
        if !lock(&s.jobs).contains_key(job_id) {
            return Err(GatewayError::UnknownJob(job_id.to_string()));
        }
        let log = lock(&s.log);
        Ok(log.iter().filter(|l| l.job == job_id).map(|l| l.record.clone()).collect())
    }

    /// Records with `seq >= from_seq` plus a receiver for later ones. The
    /// backlog and subscription are taken under one lock, so nothing is
    /// missed or repeated.
    pub fn subscribe(&self, session_id: &str, from_seq: u64) -> Result<(Vec<StepRecord>, broadcast::Receiver<StepRecord>), GatewayError> {
        let s = self.session(session_id)?;
        let log = lock(&s.log);
        let rx = s.events.subscribe();
        let backlog = log.iter().filter(|l| l.record.seq >= from_seq).map(|l| l.record.clone()).collect();
        Ok((backlog, rx))
    }

    /// Appends well-formed lines; malformed ones are reported by line.
    pub fn ingest_alarms(&self, session_id: &str, body: &str) -> Result<IngestReport, GatewayError> {
        let s = self.session(session_id)?;
        let (alarms, errors) = parse_alarm_lines(body);
        let mut st = lock(&s.state);
        for a in &alarms {
            append_line(&s.dir.join("alarms.ndjson"), a)?;
        }
        let accepted = alarms.len();
        st.alarms.extend(alarms);
        Ok(IngestReport { accepted, errors })
    }

    pub fn network_state(&self, session_id: &str) -> Result<Value, GatewayError> {
        let s = self.session(session_id)?;
        let st = lock(&s.state);
        Ok(json!({
            "session_id": s.id,
            "topology_ref": s.topology_ref,
            "state_digest": st.network.digest(),
            "demands": st.effective_demands(),
            "alarms": st.alarms.len(),
            "network": st.network,
        }))
    }

    /// GSNR of carried services. Without a live allocation the demands are
    /// provisioned on a scratch copy; nothing is committed.
    pub fn gsnr(&self, session_id: &str, service: Option<&str>) -> Result<BTreeMap<String, GsnrReport>, GatewayError> {
        let s = self.session(session_id)?;
        let st = lock(&s.state).clone();
        let topo = st
            .topology
            .as_ref()
            .ok_or_else(|| GatewayError::InvalidRequest("session has no topology".into()))?;
        let demands = st.effective_demands();
        if let Some(id) = service {
            if !demands.iter().any(|d| d.id == id) {
                return Err(GatewayError::UnknownService(id.to_string()));
            }
        }
        let domain = &self.inner.agent.config.domain;
        let nerr = |e: netops::NetopsError| GatewayError::InvalidRequest(e.to_string());
        let alloc = match &st.network.allocation {
            Some(a) => a.clone(),
            None if demands.is_empty() => return Ok(BTreeMap::new()),
            None => netops::provision_onto(st.network.spectrum.clone(), &demands, topo, &topo.grid, domain.k_paths).map_err(nerr)?,
        };
        let mut all = netops::carried_gsnr(&demands, topo, &alloc, &domain.thresholds).map_err(nerr)?;
        if let Some(id) = service {
            all.retain(|k, _| k == id);
        }
        Ok(all)
    }

    pub fn tickets(&self, session_id: Option<&str>, status: Option<TicketStatus>) -> Vec<ApprovalTicket> {
        lock(&self.inner.tickets)
            .values()
            .filter(|t| session_id.is_none_or(|s| t.session_id == s) && status.is_none_or(|st| t.status == st))
            .cloned()
            .collect()
    }

    /// PENDING → APPROVED or REJECTED, once. Wakes the waiting run.
    pub fn resolve_approval(&self, ticket_id: &str, decision: ApprovalDecision) -> Result<ApprovalTicket, GatewayError> {
        let mut tickets = lock(&self.inner.tickets);
        let t = tickets
            .get_mut(ticket_id)
            .ok_or_else(|| GatewayError::UnknownTicket(ticket_id.to_string()))?;
        if t.status != TicketStatus::Pending {
            return Err(GatewayError::AlreadyResolved(ticket_id.to_string()));
        }
        let mut resolved = t.clone();
        resolved.status = if decision.approved { TicketStatus::Approved } else { TicketStatus::Rejected };
        resolved.note = decision.note;
        append_line(&self.tickets_path(), &resolved)?;
        *t = resolved.clone();
        self.inner.ticket_cv.notify_all();
        Ok(resolved)
    }

    /// Runs the evaluation matrix on a worker thread; reports land under
    /// `data_dir/eval/{id}/`.
    pub fn start_eval(&self, req: EvalRequest) -> Result<String, GatewayError> {
        if req.tasks.is_empty() || req.conditions.is_empty() || req.n == 0 {
            return Err(GatewayError::InvalidRequest("tasks, conditions and n must be non-empty".into()));
        }
        let id = new_id("e-");
        let dir = self.data_dir().join("eval").join(&id);
        fs::create_dir_all(&dir)?;
        let job = EvalJob {
            id: id.clone(),
            status: JobStatus::Running,
            request: req.clone(),
            report: None,
            error: None,
        };
        write_json(&dir.join("job.json"), &job)?;
        lock(&self.inner.evals).insert(id.clone(), job);
        let gw = self.clone();
        let eid = id.clone();
        std::thread::spawn(move || {
            let result = evalharness::run_matrix(&gw.inner.eval, &req.tasks, &req.conditions, req.n, req.seed)
                .and_then(|r| r.write(&dir).map(|_| r));
            let mut evals = lock(&gw.inner.evals);
            let job = evals.get_mut(&eid).expect("registered");
            match result {
                Ok(r) => {
                    job.status = JobStatus::Completed;
                    job.report = Some(r);
                }
                Err(e) => {
                    job.status = JobStatus::Failed;
                    job.error = Some(e.to_string());
                }
            }
            let header = EvalJob { report: None, ..job.clone() };
            if let Err(e) = write_json(&dir.join("job.json"), &header) {
                tracing::error!(eval = %eid, "persisting eval job failed: {e}");
            }
        });
        Ok(id)
    }

    pub fn eval_job(&self, id: &str) -> Result<EvalJob, GatewayError> {
        lock(&self.inner.evals)
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownJob(id.to_string()))
    }
}

/// Blocks the run until its ticket leaves PENDING.
struct TicketGate {
    gw: Gateway,
}

impl ApprovalGate for TicketGate {
    fn decide(&self, ticket: &ApprovalTicket) -> ApprovalDecision {
        let inner = &self.gw.inner;
        let mut tickets = lock(&inner.tickets);
        tickets.entry(ticket.id.clone()).or_insert_with(|| ticket.clone());
        loop {
            let t = &tickets[&ticket.id];
            if t.status != TicketStatus::Pending {
                return ApprovalDecision {
                    approved: t.status == TicketStatus::Approved,
                    note: t.note.clone(),
                };
            }
            tickets = inner.ticket_cv.wait(tickets).unwrap_or_else(|p| p.into_inner());
        }
    }
}
