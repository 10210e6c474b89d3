//! Command-line front end: module commands, local agent runs, the eval
//! matrix, the HTTP service and a client for it.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use optiagent::agent::{
    self, ApprovalDecision, ApprovalGate, ApprovalTicket, AutoGate, Clock, HttpBackend, HttpBackendConfig, LlmBackend,
    ScriptedBackend, SessionState, Transcript,
};
use optiagent::alarms::{self, parse_alarm_lines, PriorityConfig, Rulebase, Weights};
use optiagent::evalharness::{self, parse_list, ConfigCondition, EvalResources, EvalTask};
use optiagent::fixtures;
use optiagent::gateway::{self, Gateway, GatewayConfig};
use optiagent::netmodel::{self, generate_synthetic_topology, load_demands, Modulation, SpanProfile, ValidationOptions};
use optiagent::netops::{self, OptimizerConfig};
use optiagent::qot::{self, ChannelLaunch, ModulationThresholds};
use optiagent::rag::{self, ChunkConfig, HashingEmbedder, PrefixView, Retriever, VectorStore};

#[derive(Parser)]
#[command(name = "optiagent", version, about = "Optical network digital twin and operations agent")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Topology generation and validation.
    #[command(subcommand)]
    Topo(TopoCmd),
    /// Quality-of-transmission estimates.
    #[command(subcommand)]
    Qot(QotCmd),
    /// Routing, spectrum assignment and launch-power optimisation.
    #[command(subcommand)]
    Netops(NetopsCmd),
    /// Alarm triage.
    #[command(subcommand)]
    Alarms(AlarmsCmd),
    /// Document index and retrieval.
    #[command(subcommand)]
    Rag(RagCmd),
    /// Local agent runs.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Evaluation matrix.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Talk to a running service.
    #[command(subcommand)]
    Client(ClientCmd),
}

#[derive(Subcommand)]
enum TopoCmd {
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        links: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Validate {
        file: PathBuf,
        #[arg(long)]
        require_connected: bool,
    },
}

#[derive(Subcommand)]
enum QotCmd {
    Estimate {
        #[arg(long)]
        topo: String,
        /// Comma-separated node ids.
        #[arg(long)]
        route: String,
        #[arg(long, allow_hyphen_values = true)]
        power_dbm: f64,
        #[arg(long, default_value = "QPSK")]
        modulation: Modulation,
        /// Channel indices to launch; every grid channel when omitted.
        #[arg(long, value_delimiter = ',')]
        channels: Vec<usize>,
        /// Keep the cumulative per-link breakdown.
        #[arg(long)]
        per_link: bool,
    },
}

#[derive(Subcommand)]
enum NetopsCmd {
    Provision {
        #[arg(long)]
        topo: String,
        #[arg(long)]
        demands: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    Optimize {
        #[arg(long)]
        topo: String,
        #[arg(long)]
        demands: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
    },
    Analyze {
        #[arg(long)]
        topo: String,
        #[arg(long)]
        demands: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum AlarmsCmd {
    Analyze {
        /// Line-delimited alarm records.
        #[arg(long = "in")]
        input: PathBuf,
        /// Manual directory; the bundled manual when omitted.
        #[arg(long)]
        manual: Option<PathBuf>,
        #[arg(long, default_value = "0.5,0.3,0.2")]
        weights: Weights,
        /// Pair-rule JSON; the bundled rulebase when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = alarms::DEFAULT_WINDOW_MS)]
        window_ms: u64,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum RagCmd {
    Index {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        chunk_tokens: usize,
        #[arg(long, default_value_t = 40)]
        overlap: usize,
    },
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Args)]
struct BackendArgs {
    /// Scripted-backend table; the bundled one when omitted.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Chat-completions endpoint; overrides the scripted backend.
    #[arg(long, env = "OPTIAGENT_LLM_URL")]
    llm_url: Option<String>,
    #[arg(long, env = "OPTIAGENT_LLM_MODEL", default_value = "default")]
    llm_model: String,
}

impl BackendArgs {
    fn build(&self) -> Result<Arc<dyn LlmBackend>> {
        Ok(match (&self.llm_url, &self.script) {
            (Some(url), _) => Arc::new(HttpBackend::new(HttpBackendConfig {
                url: url.clone(),
                model: self.llm_model.clone(),
                token_env: "OPTIAGENT_LLM_TOKEN".into(),
                timeout_secs: 30,
                retries: 2,
            })?),
            (None, Some(p)) => Arc::new(ScriptedBackend::from_json(&read(p)?)?),
            (None, None) => Arc::new(fixtures::scripted_backend()),
        })
    }
}

#[derive(Subcommand)]
enum AgentCmd {
    Chat {
        /// Operator request.
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "conus")]
        topo: String,
        /// Demands; the topology's bundled set when omitted.
        #[arg(long)]
        demands: Option<PathBuf>,
        /// Line-delimited alarm records loaded into the session.
        #[arg(long)]
        alarms: Option<PathBuf>,
        #[arg(long, default_value = "ADVANCED_PLUS_RAG")]
        condition: ConfigCondition,
        /// approve, reject or ask.
        #[arg(long, default_value = "ask")]
        approval: String,
        /// Write the transcript as line-delimited JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        wall_clock: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    Run {
        #[arg(long, default_value = "all")]
        tasks: String,
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// 80 cases per cell.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Args)]
struct ClientArgs {
    #[arg(long, env = "OPTIAGENT_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
    #[arg(long, env = "OPTIAGENT_API_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[derive(Subcommand)]
enum ClientCmd {
    CreateSession {
        #[command(flatten)]
        c: ClientArgs,
        #[arg(long, default_value = "conus")]
        topo: String,
    },
    Query {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
        text: String,
    },
    /// Prints the event stream from `from_seq` until the stream closes.
    Events {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
        #[arg(long, default_value_t = 0)]
        from_seq: u64,
        /// Stop after the backlog.
        #[arg(long)]
        no_follow: bool,
    },
    Transcript {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
        job: String,
    },
    Alarms {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
        file: PathBuf,
    },
    State {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
    },
    Gsnr {
        #[command(flatten)]
        c: ClientArgs,
        session: String,
        #[arg(long)]
        service: Option<String>,
    },
    Tickets {
        #[command(flatten)]
        c: ClientArgs,
        #[arg(long)]
        session: Option<String>,
    },
    Approve {
        #[command(flatten)]
        c: ClientArgs,
        ticket: String,
        #[arg(long)]
        reject: bool,
        #[arg(long, default_value = "")]
        note: String,
    },
    EvalRun {
        #[command(flatten)]
        c: ClientArgs,
        #[arg(long, default_value = "all")]
        tasks: String,
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
    EvalGet {
        #[command(flatten)]
        c: ClientArgs,
        id: String,
    },
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn topo(reference: &str) -> Result<netmodel::NetworkTopology> {
    Ok(fixtures::resolve_topology(reference)?)
}

/// Asks on the terminal.
struct PromptGate;

impl ApprovalGate for PromptGate {
    fn decide(&self, ticket: &ApprovalTicket) -> ApprovalDecision {
        eprintln!(
            "approval required for {} ({})\n{}\napprove? [y/N] ",
            ticket.action,
            ticket.id,
            serde_json::to_string_pretty(&ticket.proposed).unwrap_or_default()
        );
        let mut line = String::new();
        let _ = std::io::stdin().lock().read_line(&mut line);
        let approved = matches!(line.trim(), "y" | "Y" | "yes");
        ApprovalDecision {
            approved,
            note: if approved { "approved at terminal" } else { "rejected at terminal" }.into(),
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("OPTIAGENT_LOG"))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Topo(TopoCmd::Gen { nodes, links, seed, out }) => {
            let t = generate_synthetic_topology(nodes, links, seed, &SpanProfile::default())?;
            t.save(&out)?;
            eprintln!("wrote {} nodes, {} links to {}", t.nodes.len(), t.links.len(), out.display());
        }
        Cmd::Topo(TopoCmd::Validate { file, require_connected }) => {
            let opts = ValidationOptions {
                require_connected,
                ..Default::default()
            };
            let t = netmodel::load_topology_with(&file, &opts)?;
            print_json(&json!({"valid": true, "nodes": t.nodes.len(), "links": t.links.len(), "connected": t.is_connected()}))?;
        }
        Cmd::Qot(QotCmd::Estimate {
            topo: tref,
            route,
            power_dbm,
            modulation,
            channels,
            per_link,
        }) => {
            let t = topo(&tref)?;
            let nodes: Vec<String> = route.split(',').map(|s| s.trim().to_string()).collect();
            let links = t.route_links(&nodes)?;
            let idx: Vec<usize> = if channels.is_empty() { (0..t.grid.channel_count()).collect() } else { channels };
            let launches: Vec<ChannelLaunch> = idx
                .into_iter()
                .map(|i| ChannelLaunch {
                    channel_index: i,
                    power_w: optiagent::dbm_to_w(power_dbm),
                })
                .collect();
            let mut r = qot::estimate_gsnr(&links, &launches, &t.grid, &ModulationThresholds::default(), modulation)?;
            if !per_link {
                r.per_link.clear();
            }
            print_json(&r)?;
        }
        Cmd::Netops(cmd) => netops_cmd(cmd)?,
        Cmd::Alarms(AlarmsCmd::Analyze {
            input,
            manual,
            weights,
            rules,
            window_ms,
            k,
        }) => {
            let (stream, errors) = parse_alarm_lines(&read(&input)?);
            for e in &errors {
                eprintln!("line {}: {}", e.line, e.message);
            }
            let store = match manual {
                Some(d) => rag::index_dir(&d, ChunkConfig::default())?,
                None => fixtures::knowledge_store(),
            };
            let rulebase = match rules {
                Some(p) => Rulebase::from_json(&read(&p)?)?,
                None => fixtures::rulebase(),
            };
            let cfg = PriorityConfig {
                weights,
                ..Default::default()
            };
            let mut out = Vec::new();
            for batch in alarms::window_batches(&stream, window_ms, alarms::DEFAULT_BATCH_CAP)? {
                let a = alarms::analyze_batch(&batch, store.embedder(), &rulebase, &cfg)?;
                let suggestion = match a.ranked.first() {
                    Some(top) if store.chunks().any(|(d, _, _)| d.starts_with("manual/")) => Some(alarms::suggest(
                        top,
                        &PrefixView {
                            store: &store,
                            prefix: "manual/",
                        },
                        k,
                    )?),
                    Some(top) => Some(alarms::suggest(top, &store, k)?),
                    None => None,
                };
                out.push(json!({
                    "window_start": batch.window_start,
                    "window_end": batch.window_end,
                    "events": a.events,
                    "ranked": a.ranked,
                    "suggestion": suggestion,
                }));
            }
            print_json(&json!({"batches": out, "rejected_lines": errors}))?;
        }
        Cmd::Rag(RagCmd::Index {
            dir,
            out,
            chunk_tokens,
            overlap,
        }) => {
            let store = rag::index_dir(
                &dir,
                ChunkConfig {
                    max_tokens: chunk_tokens,
                    overlap,
                },
            )?;
            store.save(&out)?;
            eprintln!("indexed {} chunks into {}", store.len(), out.display());
        }
        Cmd::Rag(RagCmd::Query { store, text, k }) => {
            let s = VectorStore::load(&store, Arc::new(HashingEmbedder::default()))?;
            print_json(&s.retrieve(&text, k))?;
        }
        Cmd::Agent(AgentCmd::Chat {
            query,
            topo: tref,
            demands,
            alarms: alarm_file,
            condition,
            approval,
            transcript,
            wall_clock,
            backend,
        }) => {
            let mut res = EvalResources::bundled();
            res.backend = backend.build()?;
            let mut a = res.agent(condition);
            a.config.clock = if wall_clock { Clock::Wall } else { Clock::Logical };
            let mut session = SessionState {
                id: "cli".into(),
                topology: Some(topo(&tref)?),
                demands: match demands {
                    Some(p) => load_demands(&p)?,
                    None => fixtures::bundled_demands(&tref).unwrap_or_default(),
                },
                ..Default::default()
            };
            if let Some(p) = alarm_file {
                let (al, errs) = parse_alarm_lines(&read(&p)?);
                for e in errs {
                    eprintln!("line {}: {}", e.line, e.message);
                }
                session.alarms = al;
            }
            let gate: Box<dyn ApprovalGate> = match approval.as_str() {
                "approve" => Box::new(AutoGate { approve: true }),
                "reject" => Box::new(AutoGate { approve: false }),
                "ask" => Box::new(PromptGate),
                o => bail!("--approval must be approve, reject or ask, got {o:?}"),
            };
            let tr = Transcript::new("cli-run", a.config.clock).with_sink(Box::new(|r| {
                let sub = r.subtask.as_deref().map(|s| format!(" [{s}]")).unwrap_or_default();
                eprintln!("#{} {:?}{sub}", r.seq, r.step);
            }));
            let out = a.run(&query, &mut session, gate.as_ref(), tr);
            if let Some(p) = transcript {
                std::fs::write(&p, agent::transcript::to_ndjson(&out.transcript))?;
            }
            match &out.final_answer {
                Some(f) => println!("{}", f.full_text()),
                None => println!("run ended: {:?}{}", out.status, out.error.map(|e| format!(": {e}")).unwrap_or_default()),
            }
        }
        Cmd::Eval(EvalCmd::Run {
            tasks,
            conditions,
            n,
            full_scale,
            seed,
            out,
            backend,
        }) => {
            let tasks = parse_list(&tasks, &EvalTask::ALL)?;
            let conditions = parse_list(&conditions, &ConfigCondition::ALL)?;
            let n = if full_scale { 80 } else { n };
            let mut res = EvalResources::bundled();
            res.backend = backend.build()?;
            let report = evalharness::run_matrix(&res, &tasks, &conditions, n, seed)?;
            report.write(&out)?;
            print!("{}", report.to_csv()?);
            eprintln!("{} rows, digest {}", report.rows.len(), report.config_digest);
        }
        Cmd::Serve { config } => {
            let cfg = GatewayConfig::load(config.as_deref())?;
            let gw = Gateway::open(cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(gateway::http::serve(gw))?;
        }
        Cmd::Client(cmd) => client_cmd(cmd)?,
    }
    Ok(())
}

fn netops_cmd(cmd: NetopsCmd) -> Result<()> {
    let thresholds = ModulationThresholds::default();
    match cmd {
        NetopsCmd::Provision { topo: t, demands, k } => {
            let t = topo(&t)?;
            let d = load_demands(&demands)?;
            print_json(&netops::provision(&d, &t, &t.grid, k)?)?;
        }
        NetopsCmd::Optimize {
            topo: t,
            demands,
            k,
            step,
            rounds,
        } => {
            let t = topo(&t)?;
            let d = load_demands(&demands)?;
            let alloc = netops::provision(&d, &t, &t.grid, k)?;
            let cfg = OptimizerConfig {
                step_db: step,
                max_rounds: rounds,
                ..Default::default()
            };
            print_json(&netops::optimize_launch_power(&d, &t, &alloc, &thresholds, &cfg)?)?;
        }
        NetopsCmd::Analyze { topo: t, demands, k } => {
            let t = topo(&t)?;
            let d = load_demands(&demands)?;
            let alloc = netops::provision(&d, &t, &t.grid, k)?;
            let g = netops::carried_gsnr(&d, &t, &alloc, &thresholds)?;
            print_json(&netops::analyze_network(&alloc, &g, &Default::default())?)?;
        }
    }
    Ok(())
}

struct Client {
    base: String,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl Client {
    fn new(c: &ClientArgs) -> Result<Self> {
        Ok(Client {
            base: c.url.trim_end_matches('/').to_string(),
            token: c.token.clone(),
            http: reqwest::blocking::Client::builder().timeout(None).build()?,
        })
    }

    fn send(&self, rb: reqwest::blocking::RequestBuilder) -> Result<reqwest::blocking::Response> {
        let rb = match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        };
        let resp = rb.send()?;
        if !resp.status().is_success() {
            let status = resp.status();
            bail!("{status}: {}", resp.text().unwrap_or_default());
        }
        Ok(resp)
    }

    fn get(&self, path: &str) -> Result<Value> {
        Ok(self.send(self.http.get(format!("{}{path}", self.base)))?.json()?)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value> {
        Ok(self.send(self.http.post(format!("{}{path}", self.base)).json(body))?.json()?)
    }
}

fn client_cmd(cmd: ClientCmd) -> Result<()> {
    let v = match cmd {
        ClientCmd::CreateSession { c, topo } => Client::new(&c)?.post("/api/sessions", &json!({"topology": topo}))?,
        ClientCmd::Query { c, session, text } => {
            Client::new(&c)?.post(&format!("/api/sessions/{session}/query"), &json!({"text": text}))?
        }
        ClientCmd::Events {
            c,
            session,
            from_seq,
            no_follow,
        } => {
            let cl = Client::new(&c)?;
            let url = format!("{}/api/sessions/{session}/events?from_seq={from_seq}&follow={}", cl.base, !no_follow);
            let resp = cl.send(cl.http.get(url))?;
            let mut out = std::io::stdout().lock();
            for line in std::io::BufReader::new(resp).lines() {
                if let Some(data) = line?.strip_prefix("data:") {
                    writeln!(out, "{}", data.trim_start())?;
                    out.flush()?;
                }
            }
            return Ok(());
        }
        ClientCmd::Transcript { c, session, job } => Client::new(&c)?.get(&format!("/api/sessions/{session}/transcripts/{job}"))?,
        ClientCmd::Alarms { c, session, file } => {
            let cl = Client::new(&c)?;
            let url = format!("{}/api/sessions/{session}/alarms", cl.base);
            cl.send(cl.http.post(url).body(read(&file)?))?.json()?
        }
        ClientCmd::State { c, session } => Client::new(&c)?.get(&format!("/api/network/{session}/state"))?,
        ClientCmd::Gsnr { c, session, service } => {
            let q = service.map(|s| format!("?service={s}")).unwrap_or_default();
            Client::new(&c)?.get(&format!("/api/network/{session}/gsnr{q}"))?
        }
        ClientCmd::Tickets { c, session } => {
            let q = session.map(|s| format!("?session={s}")).unwrap_or_default();
            Client::new(&c)?.get(&format!("/api/approvals{q}"))?
        }
        ClientCmd::Approve { c, ticket, reject, note } => {
            Client::new(&c)?.post(&format!("/api/approvals/{ticket}"), &json!({"approved": !reject, "note": note}))?
        }
        ClientCmd::EvalRun {
            c,
            tasks,
            conditions,
            n,
            seed,
        } => {
            let tasks = parse_list(&tasks, &EvalTask::ALL)?;
            let conditions = parse_list(&conditions, &ConfigCondition::ALL)?;
            Client::new(&c)?.post("/api/eval/run", &json!({"tasks": tasks, "conditions": conditions, "n": n, "seed": seed}))?
        }
        ClientCmd::EvalGet { c, id } => Client::new(&c)?.get(&format!("/api/eval/runs/{id}"))?,
    };
    if v.is_null() {
        return Err(anyhow!("empty response"));
    }
    print_json(&v)
}
