//! C ABI over the optiagent toolkit.
//!
//! Structured results cross the boundary as UTF-8 JSON strings owned by the
//! library; release them with [`oa_string_free`]. Every fallible function
//! returns an [`OaStatus`] and, on failure, leaves a message readable with
//! [`oa_last_error`]. Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use optiagent::agent::ApprovalDecision;
use optiagent::alarms::{self, parse_alarm_lines, PriorityConfig};
use optiagent::fixtures;
use optiagent::gateway::{Gateway, GatewayConfig, GatewayError};
use optiagent::netmodel::{generate_synthetic_topology, Modulation, NetworkTopology, ServiceDemand, SpanProfile};
use optiagent::netops::{self, OptimizerConfig};
use optiagent::qot::{self, ChannelLaunch, ModulationThresholds};
use optiagent::rag::{HashingEmbedder, PrefixView, Retriever, VectorStore};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidRequest = 4,
    NotFound = 5,
    Busy = 6,
    AlreadyResolved = 7,
    Io = 8,
    Internal = 9,
}

/// Opaque topology handle.
pub struct OaTopology(NetworkTopology);

/// Opaque vector store handle.
pub struct OaStore(VectorStore);

/// Opaque service handle.
pub struct OaGateway(Gateway);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(OaStatus, String);

type R<T> = Result<T, Fail>;

fn invalid(e: impl std::fmt::Display) -> Fail {
    Fail(OaStatus::InvalidRequest, e.to_string())
}

fn from_gateway(e: GatewayError) -> Fail {
    let status = match &e {
        GatewayError::SessionNotFound(_)
        | GatewayError::TopologyNotFound(_)
        | GatewayError::UnknownTicket(_)
        | GatewayError::UnknownJob(_)
        | GatewayError::UnknownService(_) => OaStatus::NotFound,
        GatewayError::Busy(_) => OaStatus::Busy,
        GatewayError::AlreadyResolved(_) => OaStatus::AlreadyResolved,
        GatewayError::Io(_) => OaStatus::Io,
        GatewayError::InvalidRequest(_) | GatewayError::Config(_) => OaStatus::InvalidRequest,
    };
    Fail(status, e.to_string())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> R<()>) -> OaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OaStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            OaStatus::Internal
        }
    }
}

/// # Safety
/// `s` is NULL or a NUL-terminated string valid for the call.
unsafe fn text<'a>(s: *const c_char, name: &str) -> R<&'a str> {
    if s.is_null() {
        return Err(Fail(OaStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(OaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// # Safety
/// `s` is NULL or a NUL-terminated string valid for the call.
unsafe fn opt_text<'a>(s: *const c_char, name: &str) -> R<Option<&'a str>> {
    if s.is_null() {
        Ok(None)
    } else {
        text(s, name).map(Some)
    }
}

fn json_of<T: serde::Serialize>(v: &T) -> R<CString> {
    let s = serde_json::to_string(v).map_err(|e| Fail(OaStatus::Internal, e.to_string()))?;
    CString::new(s).map_err(|e| Fail(OaStatus::Internal, e.to_string()))
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put_string(out: *mut *mut c_char, s: CString) -> R<()> {
    if out.is_null() {
        return Err(Fail(OaStatus::NullArgument, "out is NULL".into()));
    }
    *out = s.into_raw();
    Ok(())
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> R<()> {
    if out.is_null() {
        return Err(Fail(OaStatus::NullArgument, "out is NULL".into()));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// # Safety
/// `h` is NULL or a live handle from this library.
unsafe fn handle<'a, T>(h: *const T, name: &str) -> R<&'a T> {
    h.as_ref().ok_or_else(|| Fail(OaStatus::NullArgument, format!("{name} is NULL")))
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str, name: &str) -> R<T> {
    serde_json::from_str(s).map_err(|e| Fail(OaStatus::InvalidJson, format!("{name}: {e}")))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn oa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn oa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a topology file, or a bundled one by name (`conus`, `single_span`).
///
/// # Safety
/// `reference` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_topology_load(reference: *const c_char, out: *mut *mut OaTopology) -> OaStatus {
    guard(|| {
        let r = text(reference, "reference")?;
        let t = fixtures::resolve_topology(r).map_err(|e| Fail(OaStatus::NotFound, e.to_string()))?;
        put_handle(out, OaTopology(t))
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_topology_from_json(json: *const c_char, out: *mut *mut OaTopology) -> OaStatus {
    guard(|| {
        let t = NetworkTopology::from_json(text(json, "json")?).map_err(invalid)?;
        put_handle(out, OaTopology(t))
    })
}

/// Seeded synthetic topology with the default span profile.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_topology_generate(nodes: usize, links: usize, seed: u64, out: *mut *mut OaTopology) -> OaStatus {
    guard(|| {
        let t = generate_synthetic_topology(nodes, links, seed, &SpanProfile::default()).map_err(invalid)?;
        put_handle(out, OaTopology(t))
    })
}

/// # Safety
/// `topo` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_topology_to_json(topo: *const OaTopology, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let t = handle(topo, "topo")?;
        put_string(out, CString::new(t.0.to_json()).map_err(invalid)?)
    })
}

/// # Safety
/// `topo` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oa_topology_free(topo: *mut OaTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

/// GSNR report for every grid channel (or `channel` when non-negative)
/// launched at `power_dbm` over the comma-separated node route.
///
/// # Safety
/// `topo` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_qot_estimate(
    topo: *const OaTopology,
    route_csv: *const c_char,
    power_dbm: f64,
    modulation: *const c_char,
    channel: i64,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let t = &handle(topo, "topo")?.0;
        let nodes: Vec<String> = text(route_csv, "route_csv")?.split(',').map(|s| s.trim().to_string()).collect();
        let m: Modulation = text(modulation, "modulation")?.parse().map_err(invalid)?;
        let links = t.route_links(&nodes).map_err(invalid)?;
        let idx: Vec<usize> = if channel < 0 { (0..t.grid.channel_count()).collect() } else { vec![channel as usize] };
        let launches: Vec<ChannelLaunch> = idx
            .into_iter()
            .map(|i| ChannelLaunch {
                channel_index: i,
                power_w: optiagent::dbm_to_w(power_dbm),
            })
            .collect();
        let r = qot::estimate_gsnr(&links, &launches, &t.grid, &ModulationThresholds::default(), m).map_err(invalid)?;
        put_string(out, json_of(&r)?)
    })
}

/// First-fit provisioning of a JSON demand list over `k` shortest paths.
///
/// # Safety
/// `topo` is a live handle; `demands_json` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_netops_provision(
    topo: *const OaTopology,
    demands_json: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let t = &handle(topo, "topo")?.0;
        let d: Vec<ServiceDemand> = parse_json(text(demands_json, "demands_json")?, "demands_json")?;
        let r = netops::provision(&d, t, &t.grid, k).map_err(invalid)?;
        put_string(out, json_of(&r)?)
    })
}

/// Provisions, then maximises the minimum margin with `step_db` moves.
///
/// # Safety
/// `topo` is a live handle; `demands_json` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_netops_optimize(
    topo: *const OaTopology,
    demands_json: *const c_char,
    k: usize,
    step_db: f64,
    max_rounds: usize,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let t = &handle(topo, "topo")?.0;
        let d: Vec<ServiceDemand> = parse_json(text(demands_json, "demands_json")?, "demands_json")?;
        let alloc = netops::provision(&d, t, &t.grid, k).map_err(invalid)?;
        let cfg = OptimizerConfig {
            step_db,
            max_rounds,
            ..Default::default()
        };
        let r = netops::optimize_launch_power(&d, t, &alloc, &ModulationThresholds::default(), &cfg).map_err(invalid)?;
        put_string(out, json_of(&r)?)
    })
}

/// The bundled document library, indexed.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_store_bundled(out: *mut *mut OaStore) -> OaStatus {
    guard(|| put_handle(out, OaStore(fixtures::knowledge_store())))
}

/// Reads a store file written by `rag index`.
///
/// # Safety
/// `path` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_store_load(path: *const c_char, out: *mut *mut OaStore) -> OaStatus {
    guard(|| {
        let p = text(path, "path")?;
        let s = VectorStore::load(Path::new(p), Arc::new(HashingEmbedder::default()))
            .map_err(|e| Fail(OaStatus::Io, e.to_string()))?;
        put_handle(out, OaStore(s))
    })
}

/// Top-`k` hits as a JSON list.
///
/// # Safety
/// `store` is a live handle; `query` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_store_retrieve(store: *const OaStore, query: *const c_char, k: usize, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let s = &handle(store, "store")?.0;
        put_string(out, json_of(&s.retrieve(text(query, "query")?, k))?)
    })
}

/// # Safety
/// `store` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oa_store_free(store: *mut OaStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Compresses, ranks and explains the latest window of line-delimited
/// alarm records with the bundled rulebase and manual.
///
/// # Safety
/// `ndjson` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_alarms_analyze(ndjson: *const c_char, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let (stream, errors) = parse_alarm_lines(text(ndjson, "ndjson")?);
        let store = fixtures::knowledge_store();
        let batches =
            alarms::window_batches(&stream, alarms::DEFAULT_WINDOW_MS, alarms::DEFAULT_BATCH_CAP).map_err(invalid)?;
        let Some(batch) = batches.last() else {
            return put_string(out, json_of(&serde_json::json!({"events": [], "ranked": [], "rejected_lines": errors}))?);
        };
        let a = alarms::analyze_batch(batch, store.embedder(), &fixtures::rulebase(), &PriorityConfig::default())
            .map_err(invalid)?;
        let view = PrefixView {
            store: &store,
            prefix: "manual/",
        };
        let suggestion = match a.ranked.first() {
            Some(top) => Some(alarms::suggest(top, &view, 3).map_err(invalid)?),
            None => None,
        };
        put_string(
            out,
            json_of(&serde_json::json!({
                "events": a.events,
                "ranked": a.ranked,
                "suggestion": suggestion,
                "rejected_lines": errors,
            }))?,
        )
    })
}

/// Opens a service instance. `config_toml` may be NULL for defaults;
/// `data_dir`, when non-NULL, overrides the configured directory.
///
/// # Safety
/// Strings are NULL or NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_open(config_toml: *const c_char, data_dir: *const c_char, out: *mut *mut OaGateway) -> OaStatus {
    guard(|| {
        let mut cfg = match opt_text(config_toml, "config_toml")? {
            Some(t) => GatewayConfig::from_toml(t).map_err(from_gateway)?,
            None => GatewayConfig::default(),
        };
        if let Some(d) = opt_text(data_dir, "data_dir")? {
            cfg.data_dir = d.into();
        }
        put_handle(out, OaGateway(Gateway::open(cfg).map_err(from_gateway)?))
    })
}

/// # Safety
/// `gw` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_free(gw: *mut OaGateway) {
    if !gw.is_null() {
        drop(Box::from_raw(gw));
    }
}

/// Writes the new session id.
///
/// # Safety
/// `gw` is a live handle; `topology` is NUL-terminated; `out_id` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_create_session(gw: *const OaGateway, topology: *const c_char, out_id: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let id = g.create_session(text(topology, "topology")?, None).map_err(from_gateway)?;
        put_string(out_id, CString::new(id).map_err(invalid)?)
    })
}

/// Starts an agent run and writes its job id.
///
/// # Safety
/// `gw` is a live handle; strings are NUL-terminated; `out_job` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_submit_query(
    gw: *const OaGateway,
    session: *const c_char,
    query: *const c_char,
    out_job: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let job = g
            .submit_query(text(session, "session")?, text(query, "query")?)
            .map_err(from_gateway)?;
        put_string(out_job, CString::new(job).map_err(invalid)?)
    })
}

/// Job status and final answer as JSON.
///
/// # Safety
/// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_job(gw: *const OaGateway, session: *const c_char, job: *const c_char, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let j = g.job(text(session, "session")?, text(job, "job")?).map_err(from_gateway)?;
        put_string(out, json_of(&j)?)
    })
}

/// Step records of one job as a JSON list.
///
/// # Safety
/// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_transcript(
    gw: *const OaGateway,
    session: *const c_char,
    job: *const c_char,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let t = g.transcript(text(session, "session")?, text(job, "job")?).map_err(from_gateway)?;
        put_string(out, json_of(&t)?)
    })
}

/// Tickets of a session (all sessions when NULL) as a JSON list.
///
/// # Safety
/// `gw` is a live handle; `session` is NULL or NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_tickets(gw: *const OaGateway, session: *const c_char, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        put_string(out, json_of(&g.tickets(opt_text(session, "session")?, None))?)
    })
}

/// Resolves a PENDING ticket and writes the updated ticket.
///
/// # Safety
/// `gw` is a live handle; `ticket` is NUL-terminated, `note` NULL or
/// NUL-terminated; `out` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_resolve_approval(
    gw: *const OaGateway,
    ticket: *const c_char,
    approved: bool,
    note: *const c_char,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let d = ApprovalDecision {
            approved,
            note: opt_text(note, "note")?.unwrap_or_default().to_string(),
        };
        let t = g.resolve_approval(text(ticket, "ticket")?, d).map_err(from_gateway)?;
        if out.is_null() {
            return Ok(());
        }
        put_string(out, json_of(&t)?)
    })
}

/// Live network state and its digest as JSON.
///
/// # Safety
/// `gw` is a live handle; `session` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_network_state(gw: *const OaGateway, session: *const c_char, out: *mut *mut c_char) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        put_string(out, json_of(&g.network_state(text(session, "session")?).map_err(from_gateway)?)?)
    })
}

/// Appends line-delimited alarm records; writes `{accepted, errors}`.
///
/// # Safety
/// `gw` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn oa_gateway_ingest_alarms(
    gw: *const OaGateway,
    session: *const c_char,
    ndjson: *const c_char,
    out: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let g = &handle(gw, "gw")?.0;
        let r = g
            .ingest_alarms(text(session, "session")?, text(ndjson, "ndjson")?)
            .map_err(from_gateway)?;
        put_string(out, json_of(&r)?)
    })
}
