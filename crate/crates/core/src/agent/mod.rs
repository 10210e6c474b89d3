//! Five-step orchestrator: intent analysis, task decomposition, resource
//! selection, problem solving and final answer generation.

pub mod backend;
pub mod prompt;
pub mod tools;
pub mod transcript;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::alarms::Rulebase;
use crate::digest::json_digest;
use crate::rag::{tokenize, RetrievalHit, Retriever, VectorStore};

pub use backend::{BackendError, HttpBackend, HttpBackendConfig, LlmBackend, LlmRequest, ScriptedBackend};
pub use prompt::{render_prompt, self_consistency_vote, Example, ExampleBank, PromptTemplate, Technique, TechniqueConfig, COT_CUE};
pub use tools::{DomainConfig, NetworkState, SessionState, ToolCall, ToolRegistry, ToolSpec};
pub use transcript::{Clock, StepKind, StepRecord, Transcript};

use tools::{Blackboard, ToolEnv};

const SYSTEM_PROMPT: &str = "You are AI-Agent, an assistant for optical network operation and maintenance.";

const CLASSIFY_INSTRUCTION: &str = "Classify the operator request into exactly one of: ALARM_ANALYSIS, NETWORK_OPTIMIZATION, DIRECT_QA. Reply with the label only.";

const DOMAIN_CONTEXT: &str = "The network is a C+L band WDM optical transport network. Alarms come from OTN network elements. \
QoT is estimated with the GN model; margin is GSNR minus the modulation threshold. \
Changes to launch power or spectrum need operator approval.";

const ADVANCED_OUTPUT: &str = "Answer as numbered steps (Step 1, Step 2, ...), quote tool values exactly, and end with a line starting with 'Conclusion:'.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unknown subtask kind {0:?}")]
    UnknownSubtask(String),
    #[error("tool {tool} failed: {message}")]
    ToolExecution { tool: String, message: String },
    #[error("plan is incomplete: {0}")]
    IncompletePlan(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    AlarmAnalysis,
    NetworkOptimization,
    DirectQa,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::AlarmAnalysis, TaskKind::NetworkOptimization, TaskKind::DirectQa];

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::AlarmAnalysis => "ALARM_ANALYSIS",
            TaskKind::NetworkOptimization => "NETWORK_OPTIMIZATION",
            TaskKind::DirectQa => "DIRECT_QA",
        }
    }

    fn parse_reply(reply: &str) -> Option<TaskKind> {
        let norm: String = reply
            .trim()
            .trim_matches(|c: char| c.is_ascii_punctuation() && c != '_')
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        TaskKind::ALL.into_iter().find(|k| k.label() == norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanPattern {
    Cascaded,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: String,
    pub kind: String,
    pub description: String,
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPlan {
    pub task_kind: TaskKind,
    pub subtasks: Vec<Subtask>,
    pub pattern: PlanPattern,
}

impl AgentPlan {
    /// Dependencies must point at earlier subtasks (a topological order, so
    /// the graph is acyclic); cascaded plans must be a chain.
    pub fn validate(&self) -> Result<(), AgentError> {
        let mut seen = BTreeSet::new();
        for (i, s) in self.subtasks.iter().enumerate() {
            for d in &s.depends_on {
                if !seen.contains(d.as_str()) {
                    return Err(AgentError::InvalidPlan(format!("{} depends on {d}, which does not precede it", s.id)));
                }
            }
            if self.pattern == PlanPattern::Cascaded {
                let expected: Vec<String> = if i == 0 { vec![] } else { vec![self.subtasks[i - 1].id.clone()] };
                if s.depends_on != expected {
                    return Err(AgentError::InvalidPlan(format!("{} breaks the cascade", s.id)));
                }
            }
            if !seen.insert(s.id.as_str()) {
                return Err(AgentError::InvalidPlan(format!("duplicate subtask id {}", s.id)));
            }
        }
        Ok(())
    }
}

fn subtask_description(kind: &str) -> &'static str {
    match kind {
        "compress" => "Compress the alarm batch by alarm type and source network element",
        "prioritize" => "Correlate the compressed alarms and rank them by importance score",
        "suggest" => "Find the cause and handling actions for the top priority alarm in the alarm manual",
        "qot_estimate" => "Estimate the GSNR and margin of every service with the GN model",
        "analyze" => "Analyze margins, blocking and congestion to find parts of the network to improve",
        "optimize" => "Optimize the launch power of every channel to maximize the minimum margin",
        _ => "Answer the operator question from the domain resource library",
    }
}

/// Fixed plans per task kind.
pub fn decompose(kind: TaskKind) -> AgentPlan {
    let kinds: &[&str] = match kind {
        TaskKind::AlarmAnalysis => &["compress", "prioritize", "suggest"],
        TaskKind::NetworkOptimization => &["qot_estimate", "analyze", "optimize"],
        TaskKind::DirectQa => &["answer"],
    };
    let subtasks = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| Subtask {
            id: format!("s{}", i + 1),
            kind: k.to_string(),
            description: subtask_description(k).to_string(),
            depends_on: if i == 0 { vec![] } else { vec![format!("s{i}")] },
        })
        .collect();
    AgentPlan {
        task_kind: kind,
        subtasks,
        pattern: PlanPattern::Cascaded,
    }
}

const ALARM_WORDS: &[&str] = &["alarm", "alarms", "los", "lof", "ais", "fault", "faults", "triage"];
const OPTIM_WORDS: &[&str] = &["qot", "gsnr", "osnr", "margin", "margins", "launch", "provision", "services"];

/// Lexicon fallback for intent classification.
pub fn keyword_intent(query: &str) -> TaskKind {
    let toks: Vec<String> = tokenize(query).collect();
    let has = |words: &[&str]| toks.iter().any(|t| words.contains(&t.as_str()));
    if has(ALARM_WORDS) {
        TaskKind::AlarmAnalysis
    } else if has(OPTIM_WORDS) || toks.iter().any(|t| t.starts_with("optimi")) {
        TaskKind::NetworkOptimization
    } else {
        TaskKind::DirectQa
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub task_kind: TaskKind,
    pub confidence: f64,
    pub backend_reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub tools: Vec<ToolSpec>,
    pub chunks: Vec<RetrievalHit>,
}

/// Static tool map plus `k` chunks for the subtask description. Without a
/// retriever, retrieval tools are dropped and no chunks are returned.
pub fn select_resources(
    subtask: &Subtask,
    registry: &ToolRegistry,
    retriever: Option<&dyn Retriever>,
    k: usize,
) -> Result<Resources, AgentError> {
    let names = tools::subtask_tools(&subtask.kind).ok_or_else(|| AgentError::UnknownSubtask(subtask.kind.clone()))?;
    let tools = names
        .iter()
        .filter(|n| retriever.is_some() || **n != tools::RAG_RETRIEVE)
        .map(|n| {
            registry
                .get(n)
                .cloned()
                .ok_or_else(|| AgentError::Config(format!("tool {n} is not registered")))
        })
        .collect::<Result<_, _>>()?;
    let chunks = retriever.map(|r| r.retrieve(&subtask.description, k)).unwrap_or_default();
    Ok(Resources { tools, chunks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTaskResult {
    pub subtask_id: String,
    pub kind: String,
    pub answer_text: String,
    pub tool_calls: Vec<ToolCall>,
    /// Raw tool outputs keyed by tool name.
    pub structured_payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub text: String,
    pub sections: Vec<SubTaskResult>,
    pub transcript_ref: String,
}

impl FinalAnswer {
    /// Final text followed by every section's answer text.
    pub fn full_text(&self) -> String {
        let mut s = self.text.clone();
        for sec in &self.sections {
            s.push_str("\n\n");
            s.push_str(&sec.answer_text);
        }
        s
    }

    /// Payloads keyed by subtask kind, the root for JSON-pointer lookups.
    pub fn payload_root(&self) -> Value {
        Value::Object(
            self.sections
                .iter()
                .map(|s| (s.kind.clone(), s.structured_payload.clone()))
                .collect(),
        )
    }
}

/// Prompt elements used for subtask prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Subtask description only.
    Raw,
    /// One-line instruction plus the tool results.
    Brief,
    /// All four elements: role instruction, domain context, tool results,
    /// output indicator.
    Advanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub style: PromptStyle,
    pub technique: TechniqueConfig,
    pub retrieval: bool,
    pub k_chunks: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub clock: Clock,
    pub domain: DomainConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            style: PromptStyle::Advanced,
            technique: TechniqueConfig::cot(2),
            retrieval: true,
            k_chunks: 4,
            temperature: 0.0,
            max_tokens: 1024,
            seed: Some(0),
            clock: Clock::Logical,
            domain: DomainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TicketStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalTicket {
    pub id: String,
    pub session_id: String,
    pub run_id: String,
    pub action: String,
    /// The instruction that would be issued on approval.
    pub proposed: Value,
    pub status: TicketStatus,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalDecision {
    pub approved: bool,
    #[serde(default)]
    pub note: String,
}

/// Human review checkpoint. `decide` blocks until the ticket is resolved.
pub trait ApprovalGate: Send + Sync {
    fn decide(&self, ticket: &ApprovalTicket) -> ApprovalDecision;
}

/// Resolves every ticket the same way without waiting.
#[derive(Debug, Clone, Copy)]
pub struct AutoGate {
    pub approve: bool,
}

impl ApprovalGate for AutoGate {
    fn decide(&self, _: &ApprovalTicket) -> ApprovalDecision {
        ApprovalDecision {
            approved: self.approve,
            note: if self.approve { "auto-approved" } else { "auto-rejected" }.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Completed,
    Rejected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<AgentPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<FinalAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tickets: Vec<ApprovalTicket>,
    pub transcript: Vec<StepRecord>,
}

pub struct Agent {
    pub backend: Arc<dyn LlmBackend>,
    pub store: Arc<VectorStore>,
    pub rulebase: Arc<Rulebase>,
    pub examples: Arc<ExampleBank>,
    pub registry: ToolRegistry,
    pub config: AgentConfig,
}

enum Halt {
    Rejected,
    Failed(AgentError),
}

impl Agent {
    pub fn new(
        backend: Arc<dyn LlmBackend>,
        store: Arc<VectorStore>,
        rulebase: Arc<Rulebase>,
        examples: Arc<ExampleBank>,
        config: AgentConfig,
    ) -> Self {
        Agent {
            backend,
            store,
            rulebase,
            examples,
            registry: ToolRegistry::standard(),
            config,
        }
    }

    fn request(&self, text: String, path: usize) -> LlmRequest {
        let mut r = LlmRequest::new(SYSTEM_PROMPT, text);
        r.temperature = self.config.temperature;
        r.max_tokens = self.config.max_tokens;
        r.seed = self.config.seed.map(|s| s + path as u64);
        r
    }

    fn ask(&self, text: String) -> Result<String, AgentError> {
        Ok(self.backend.complete(&self.request(text, 0))?)
    }

    fn retriever(&self) -> Option<&dyn Retriever> {
        self.config.retrieval.then_some(self.store.as_ref() as &dyn Retriever)
    }

    /// Backend classification with a keyword fallback on unparseable replies.
    pub fn analyze_intent(&self, query: &str) -> Result<Intent, AgentError> {
        let reply = self.ask(format!("{CLASSIFY_INSTRUCTION}\n\nRequest: {query}"))?;
        Ok(match TaskKind::parse_reply(&reply) {
            Some(k) => Intent {
                task_kind: k,
                confidence: 0.9,
                backend_reply: reply,
            },
            None => Intent {
                task_kind: keyword_intent(query),
                confidence: 0.5,
                backend_reply: reply,
            },
        })
    }

    fn template(&self, subtask: &Subtask, query: &str, tool_text: &str, prior: &[SubTaskResult]) -> PromptTemplate {
        let mut data = format!("Operator request: {query}");
        for p in prior {
            data.push_str(&format!("\nResult of {}: {}", p.kind, p.answer_text.lines().next().unwrap_or_default()));
        }
        if !tool_text.is_empty() {
            data.push_str("\nTool results:\n");
            data.push_str(tool_text);
        }
        match self.config.style {
            PromptStyle::Raw => PromptTemplate::new(subtask.description.clone()),
            PromptStyle::Brief => PromptTemplate {
                instruction: format!("Subtask {}: {}.", subtask.kind, subtask.description),
                input_data: Some(data),
                ..Default::default()
            },
            PromptStyle::Advanced => PromptTemplate {
                instruction: format!(
                    "As an expert optical network operator, complete subtask {}: {}.",
                    subtask.kind, subtask.description
                ),
                context: Some(DOMAIN_CONTEXT.into()),
                input_data: Some(data),
                output_indicator: Some(ADVANCED_OUTPUT.into()),
            },
        }
    }

    fn narrate(&self, prompt: String) -> Result<String, AgentError> {
        let n = self.config.technique.paths();
        if n == 1 {
            return self.ask(prompt);
        }
        let answers = (0..n)
            .map(|i| self.backend.complete(&self.request(prompt.clone(), i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self_consistency_vote(&answers).unwrap_or_default().to_string())
    }

    /// Builds the final answer from resolved subtask results.
    pub fn finalize(&self, plan: &AgentPlan, results: &[SubTaskResult], run_id: &str) -> Result<FinalAnswer, AgentError> {
        if results.len() != plan.subtasks.len()
            || plan.subtasks.iter().zip(results).any(|(s, r)| s.id != r.subtask_id)
        {
            return Err(AgentError::IncompletePlan(format!(
                "{} of {} subtasks resolved",
                results.len(),
                plan.subtasks.len()
            )));
        }
        let chain: Vec<String> = results
            .iter()
            .map(|r| format!("{}: {}", r.kind, r.answer_text.lines().next().unwrap_or_default()))
            .collect();
        let summary = self
            .ask(format!(
                "Summarize the results of the subtasks for the operator in two sentences.\n\n{}",
                chain.join("\n")
            ))?
            .trim()
            .to_string();
        let text = match plan.pattern {
            PlanPattern::Cascaded => {
                let last = results.last().map(|r| r.answer_text.as_str()).unwrap_or_default();
                format!("{summary}\n\n{last}")
            }
            PlanPattern::Parallel => {
                let mut t = summary;
                for r in results {
                    t.push_str(&format!("\n\n[{}] {}", r.kind, r.answer_text));
                }
                t
            }
        };
        Ok(FinalAnswer {
            text,
            sections: results.to_vec(),
            transcript_ref: run_id.to_string(),
        })
    }

    /// Executes the five steps, logging every step to `transcript`. A gated
    /// subtask blocks on `gate` before its tools run.
    pub fn run(
        &self,
        query: &str,
        session: &mut SessionState,
        gate: &dyn ApprovalGate,
        mut transcript: Transcript,
    ) -> RunOutcome {
        let mut tickets = Vec::new();
        let mut plan_out = None;
        let result = self.run_steps(query, session, gate, &mut transcript, &mut tickets, &mut plan_out);
        let run_id = transcript.run_id.clone();
        let (status, final_answer, error) = match result {
            Ok(f) => (RunStatus::Completed, Some(f), None),
            Err(Halt::Rejected) => {
                transcript.push(StepKind::Failed, None, json!({"status": RunStatus::Rejected, "reason": "operator rejected the proposed instruction"}));
                (RunStatus::Rejected, None, None)
            }
            Err(Halt::Failed(e)) => {
                transcript.push(StepKind::Failed, None, json!({"status": RunStatus::Failed, "error": e.to_string()}));
                (RunStatus::Failed, None, Some(e.to_string()))
            }
        };
        RunOutcome {
            run_id,
            status,
            plan: plan_out,
            final_answer,
            error,
            tickets,
            transcript: transcript.into_records(),
        }
    }

    fn run_steps(
        &self,
        query: &str,
        session: &mut SessionState,
        gate: &dyn ApprovalGate,
        tr: &mut Transcript,
        tickets: &mut Vec<ApprovalTicket>,
        plan_out: &mut Option<AgentPlan>,
    ) -> Result<FinalAnswer, Halt> {
        let fail = Halt::Failed;
        self.config.technique.validate().map_err(fail)?;

        // 1. Intent analysis.
        let intent = self.analyze_intent(query).map_err(fail)?;
        tr.push(StepKind::IntentAnalysis, None, json!({"query": query, "intent": intent}));

        // 2. Task decomposition. The model's own decomposition is logged only.
        let plan = decompose(intent.task_kind);
        plan.validate().map_err(fail)?;
        let model_plan = self
            .ask(format!(
                "Decompose the {} task into subtasks and give their order.\n\nRequest: {query}",
                intent.task_kind.label()
            ))
            .map_err(fail)?;
        tr.push(StepKind::TaskDecomposition, None, json!({"plan": plan, "backend_text": model_plan}));
        *plan_out = Some(plan.clone());

        // 3. Resource selection.
        let mut resources = Vec::new();
        for s in &plan.subtasks {
            let r = select_resources(s, &self.registry, self.retriever(), self.config.k_chunks).map_err(fail)?;
            let names: Vec<&str> = r.tools.iter().map(|t| t.name.as_str()).collect();
            let confirmation = self
                .ask(format!(
                    "Confirm the tools selected for subtask {} ({}): {}",
                    s.kind,
                    s.description,
                    names.join(", ")
                ))
                .map_err(fail)?;
            tr.push(
                StepKind::ResourceSelection,
                Some(&s.id),
                json!({
                    "tools": names,
                    "chunks": r.chunks.iter().map(|h| json!({"ref": h.chunk_ref(), "score": h.score})).collect::<Vec<_>>(),
                    "backend_confirmation": confirmation,
                }),
            );
            resources.push(r);
        }

        // 4. Problem solving.
        let env = ToolEnv {
            cfg: &self.config.domain,
            store: &self.store,
            rulebase: &self.rulebase,
        };
        let mut board = Blackboard::default();
        let mut results: Vec<SubTaskResult> = Vec::new();
        for (s, res) in plan.subtasks.iter().zip(&resources) {
            if res.tools.iter().any(|t| t.mutating) {
                let ticket = ApprovalTicket {
                    id: format!("{}-t{}", tr.run_id, tickets.len() + 1),
                    session_id: session.id.clone(),
                    run_id: tr.run_id.clone(),
                    action: res.tools.iter().filter(|t| t.mutating).map(|t| t.name.clone()).collect::<Vec<_>>().join(","),
                    proposed: tools::optimize_args(&self.config.domain, session),
                    status: TicketStatus::Pending,
                    note: String::new(),
                };
                tr.push(
                    StepKind::PendingApproval,
                    Some(&s.id),
                    json!({"ticket": ticket, "state_digest": session.network.digest()}),
                );
                let decision = gate.decide(&ticket);
                let mut resolved = ticket;
                resolved.status = if decision.approved { TicketStatus::Approved } else { TicketStatus::Rejected };
                resolved.note = decision.note;
                tr.push(StepKind::ApprovalResolved, Some(&s.id), json!({"ticket": resolved}));
                let approved = decision.approved;
                tickets.push(resolved);
                if !approved {
                    return Err(Halt::Rejected);
                }
            }

            let mut payload = Map::new();
            let mut calls = Vec::new();
            for t in &res.tools {
                let (args, out) = tools::run_tool(&t.name, &s.kind, query, &env, session, &mut board);
                let call = ToolCall {
                    tool: t.name.clone(),
                    args,
                    ok: out.is_ok(),
                    result_digest: out.as_ref().ok().map(json_digest),
                    error: out.as_ref().err().cloned(),
                };
                tr.push(StepKind::ToolCall, Some(&s.id), serde_json::to_value(&call).expect("serialises"));
                calls.push(call);
                match out {
                    Ok(v) => {
                        payload.insert(t.name.clone(), v);
                    }
                    Err(message) => {
                        return Err(fail(AgentError::ToolExecution {
                            tool: t.name.clone(),
                            message,
                        }))
                    }
                }
            }
            let tool_text = tools::summarize(&s.kind, &board);
            let template = self.template(s, query, &tool_text, &results);
            let examples = self.examples.get(&s.kind).map(Vec::as_slice).unwrap_or_default();
            let mut technique = self.config.technique;
            technique.n_examples = technique.n_examples.min(examples.len());
            if technique.technique == Technique::FewShot && technique.n_examples == 0 {
                technique = TechniqueConfig::zero_shot();
            }
            let prompt = render_prompt(&template, &technique, &res.chunks, examples).map_err(fail)?;
            let narrative = self.narrate(prompt).map_err(fail)?;
            let answer_text = match (narrative.trim(), tool_text.is_empty()) {
                (n, true) => n.to_string(),
                ("", false) => tool_text,
                (n, false) => format!("{n}\n\n{tool_text}"),
            };
            let r = SubTaskResult {
                subtask_id: s.id.clone(),
                kind: s.kind.clone(),
                answer_text,
                tool_calls: calls,
                structured_payload: Value::Object(payload),
            };
            tr.push(StepKind::ProblemSolving, Some(&s.id), serde_json::to_value(&r).expect("serialises"));
            results.push(r);
        }

        // 5. Final answer.
        let fa = self.finalize(&plan, &results, &tr.run_id).map_err(fail)?;
        tr.push(
            StepKind::FinalAnswer,
            None,
            json!({"status": RunStatus::Completed, "text": fa.text, "sections": fa.sections.len(), "state_digest": session.network.digest()}),
        );
        Ok(fa)
    }
}
