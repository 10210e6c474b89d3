//! Bundled data: the domain resource library, alarm rulebase, scripted
//! backend table, few-shot examples, and reference topologies.

use std::path::Path;

use crate::agent::{ExampleBank, ScriptedBackend};
use crate::alarms::Rulebase;
use crate::netmodel::{load_topology, NetworkTopology, ServiceDemand, TopologyError};
use crate::rag::{index_documents, ChunkConfig, DocKind, Document, VectorStore};

macro_rules! docs {
    ($($kind:ident $id:literal => $path:literal),* $(,)?) => {
        &[$((DocKind::$kind, $id, include_str!(concat!("../fixtures/knowledge/", $path)))),*]
    };
}

/// (kind, doc id, text) of every bundled document.
pub const KNOWLEDGE: &[(DocKind, &str, &str)] = docs![
    Manual "manual/AIS" => "manual/AIS.txt",
    Manual "manual/BDI" => "manual/BDI.txt",
    Manual "manual/BER_SD" => "manual/BER_SD.txt",
    Manual "manual/FAN_FAIL" => "manual/FAN_FAIL.txt",
    Manual "manual/LASER_EOL" => "manual/LASER_EOL.txt",
    Manual "manual/LOF" => "manual/LOF.txt",
    Manual "manual/LOS" => "manual/LOS.txt",
    Manual "manual/OPR_LOW" => "manual/OPR_LOW.txt",
    Manual "manual/PWR_FAIL" => "manual/PWR_FAIL.txt",
    Manual "manual/TEMP_HIGH" => "manual/TEMP_HIGH.txt",
    Rule "rule/alarm_correlation" => "rule/alarm_correlation.txt",
    Rule "rule/operation_policy" => "rule/operation_policy.txt",
    Knowledge "knowledge/edfa" => "knowledge/edfa.txt",
    Knowledge "knowledge/edfa_faq" => "knowledge/edfa_faq.txt",
    Knowledge "knowledge/gn_model" => "knowledge/gn_model.txt",
    Knowledge "knowledge/launch_power" => "knowledge/launch_power.txt",
    Knowledge "knowledge/rwa" => "knowledge/rwa.txt",
    DataNote "data_note/alarm_dataset" => "data_note/alarm_dataset.txt",
    DataNote "data_note/conus_network" => "data_note/conus_network.txt",
];

pub const RULEBASE_JSON: &str = include_str!("../fixtures/rulebase.json");
pub const SCRIPTED_BACKEND_JSON: &str = include_str!("../fixtures/scripted_backend.json");
pub const FEWSHOT_JSON: &str = include_str!("../fixtures/fewshot.json");
pub const CONUS_TOPOLOGY_JSON: &str = include_str!("../fixtures/conus_synthetic.topo.json");
pub const CONUS_DEMANDS_JSON: &str = include_str!("../fixtures/conus.demands.json");
pub const SINGLE_SPAN_TOPOLOGY_JSON: &str = include_str!("../fixtures/single_span.topo.json");
pub const SINGLE_SPAN_DEMANDS_JSON: &str = include_str!("../fixtures/single_span.demands.json");

/// Seed and size of the bundled synthetic CONUS-scale topology.
pub const CONUS_NODES: usize = 77;
pub const CONUS_LINKS: usize = 99;
pub const CONUS_SEED: u64 = 42;

pub fn knowledge_documents() -> Vec<Document> {
    KNOWLEDGE
        .iter()
        .map(|(kind, id, text)| Document::new(*id, format!("fixtures/knowledge/{id}.txt"), *kind, *text).expect("bundled documents are non-empty"))
        .collect()
}

/// The bundled library indexed with the default embedder and chunking.
pub fn knowledge_store() -> VectorStore {
    let mut store = VectorStore::default();
    index_documents(&mut store, &knowledge_documents(), ChunkConfig::default()).expect("default chunking is valid");
    store
}

pub fn rulebase() -> Rulebase {
    Rulebase::from_json(RULEBASE_JSON).expect("bundled rulebase parses")
}

pub fn scripted_backend() -> ScriptedBackend {
    ScriptedBackend::from_json(SCRIPTED_BACKEND_JSON).expect("bundled script parses")
}

pub fn example_bank() -> ExampleBank {
    serde_json::from_str(FEWSHOT_JSON).expect("bundled examples parse")
}

pub fn conus_topology() -> NetworkTopology {
    NetworkTopology::from_json(CONUS_TOPOLOGY_JSON).expect("bundled topology is valid")
}

pub fn conus_demands() -> Vec<ServiceDemand> {
    serde_json::from_str(CONUS_DEMANDS_JSON).expect("bundled demands parse")
}

pub fn single_span_topology() -> NetworkTopology {
    NetworkTopology::from_json(SINGLE_SPAN_TOPOLOGY_JSON).expect("bundled topology is valid")
}

pub fn single_span_demands() -> Vec<ServiceDemand> {
    serde_json::from_str(SINGLE_SPAN_DEMANDS_JSON).expect("bundled demands parse")
}

/// `conus` and `single_span` name bundled topologies; anything else is read
/// as a file path.
pub fn resolve_topology(reference: &str) -> Result<NetworkTopology, TopologyError> {
    match reference {
        "conus" => Ok(conus_topology()),
        "single_span" => Ok(single_span_topology()),
        path => load_topology(Path::new(path)),
    }
}

/// Demands bundled with a named topology, if any.
pub fn bundled_demands(reference: &str) -> Option<Vec<ServiceDemand>> {
    match reference {
        "conus" => Some(conus_demands()),
        "single_span" => Some(single_span_demands()),
        _ => None,
    }
}
