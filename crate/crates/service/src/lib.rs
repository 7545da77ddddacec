//! HTTP/JSON API over a snapshot store: diagnosis, clinician feedback,
//! snapshot history and diffs, and counterfactual replay.

mod config;
mod error;

pub use config::{load_settings, ServiceConfig, DEFAULT_LISTEN, DEFAULT_PROOF_CAP};
pub use error::{ApiError, ConfigError, ErrorBody};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use fuzzdx_core::dsl::{print_lexicon, FuzzyFact};
use fuzzdx_core::extraction::ExtractionReport;
use fuzzdx_core::inference::{explain, ProofTree};
use fuzzdx_core::kb::{AuditReport, Author, EditRequest, Manifest, SnapshotDiff, SnapshotStore};
use fuzzdx_core::learning::{LearnerConfig, UpdateEvent};
use fuzzdx_core::ranking::{
    CaseIndex, CaseRecord, Demographics, Engine, EngineConfig, Neighbour, Overrides, SymptomWeight, WeightedSymptom,
};
use fuzzdx_core::Symbol;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

const PROOF_CACHE_LIMIT: usize = 4096;

/// Shared handler state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SnapshotStore>,
    pub engine: Arc<Engine>,
    pub index: Option<Arc<CaseIndex>>,
    pub proof_cap: usize,
    proofs: Arc<Mutex<ProofCache>>,
}

#[derive(Default)]
struct ProofCache {
    order: VecDeque<String>,
    trees: BTreeMap<String, ProofTree>,
}

impl ProofCache {
    fn insert(&mut self, key: String, tree: ProofTree) {
        if self.trees.contains_key(&key) {
            return;
        }
        if self.order.len() == PROOF_CACHE_LIMIT {
            if let Some(old) = self.order.pop_front() {
                self.trees.remove(&old);
            }
        }
        self.order.push_back(key.clone());
        self.trees.insert(key, tree);
    }
}

impl AppState {
    pub fn new(store: SnapshotStore, engine: Engine, index: Option<CaseIndex>) -> Self {
        Self {
            store: Arc::new(store),
            engine: Arc::new(engine),
            index: index.map(Arc::new),
            proof_cap: DEFAULT_PROOF_CAP,
            proofs: Arc::default(),
        }
    }

    pub fn with_proof_cap(mut self, cap: usize) -> Self {
        self.proof_cap = cap;
        self
    }

    /// Opens the store and loads the optional engine, learner and index files.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        let engine_config: EngineConfig = match &config.engine {
            Some(p) => load_settings(p)?,
            None => EngineConfig::default(),
        };
        let learner: LearnerConfig = match &config.learner {
            Some(p) => load_settings(p)?,
            None => LearnerConfig::default(),
        };
        let store = SnapshotStore::open(&config.store)?.with_learner(learner);
        let index = match &config.index {
            Some(p) => Some(CaseIndex::from_jsonl(&config::read(p)?)?),
            None => None,
        };
        Ok(Self::new(store, Engine::new(engine_config), index).with_proof_cap(config.proof_cap))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/diagnose", post(diagnose))
        .route("/feedback", post(feedback))
        .route("/snapshots", get(list_snapshots))
        .route("/snapshots/{version}", get(show_snapshot))
        .route("/snapshots/{a}/diff/{b}", get(diff_snapshots))
        .route("/replay", post(replay))
        .route("/proofs/{proof_ref}", get(proof))
        .with_state(state)
}

/// Binds `config.listen` and serves until ctrl-c.
pub async fn serve(config: &ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    serve_state(AppState::from_config(config)?, config.listen).await
}

pub async fn serve_state(state: AppState, listen: SocketAddr) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

// ---------------------------------------------------------------------------
// Diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseRequest {
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symptoms: Option<Vec<WeightedSymptom>>,
    #[serde(default)]
    pub demographics: Demographics,
    #[serde(default)]
    pub overrides: Overrides,
}

impl DiagnoseRequest {
    fn case(&self) -> CaseRecord {
        CaseRecord {
            id: self.id.clone(),
            text: self.note.clone(),
            symptoms: self.symptoms.clone(),
            labels: Vec::new(),
            demographics: self.demographics.clone(),
        }
    }
}

/// A ranked candidate as sent to clients. `proof` is inlined when it has at
/// most `proof_cap` nodes; otherwise only `proof_ref` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub disease: Symbol,
    pub activation: f64,
    pub confidence: f64,
    pub display_confidence: f64,
    pub prior: Option<f64>,
    pub posterior: Option<f64>,
    pub proof_nodes: usize,
    pub proof: Option<ProofTree>,
    pub proof_ref: Option<String>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseResponse {
    pub snapshot_version: u64,
    pub content_hash: String,
    pub candidates: Vec<CandidateView>,
    pub weights: Vec<SymptomWeight>,
    pub facts: Vec<FuzzyFact>,
    pub neighbours: Vec<Neighbour>,
    pub extraction: Option<ExtractionReport>,
}

pub fn proof_nodes(tree: &ProofTree) -> usize {
    1 + tree.rules.iter().map(|r| 1 + r.leaves.len()).sum::<usize>()
}

fn proof_ref(content_hash: &str, tree: &ProofTree) -> String {
    let json = serde_json::to_string(tree).expect("proof trees serialize");
    let digest = Sha256::new().chain_update(content_hash).chain_update(json).finalize();
    hex::encode(&digest[..12])
}

async fn diagnose(State(state): State<AppState>, body: Bytes) -> Result<Json<DiagnoseResponse>, ApiError> {
    let req: DiagnoseRequest = parse_body(&body)?;
    req.overrides.validate()?;
    let snapshot = state.store.head();
    let d = state.engine.diagnose(&req.case(), &snapshot, state.index.as_deref(), &req.overrides)?;
    let mut candidates = Vec::with_capacity(d.candidates.len());
    for c in &d.candidates {
        let nodes = proof_nodes(&c.proof);
        let (proof, reference) = if nodes <= state.proof_cap {
            (Some(c.proof.clone()), None)
        } else {
            let key = proof_ref(&d.content_hash, &c.proof);
            state.proofs.lock().expect("proof cache").insert(key.clone(), c.proof.clone());
            (None, Some(key))
        };
        candidates.push(CandidateView {
            disease: c.disease.clone(),
            activation: c.activation,
            confidence: c.confidence,
            display_confidence: c.display_confidence(),
            prior: c.prior,
            posterior: c.posterior,
            proof_nodes: nodes,
            proof,
            proof_ref: reference,
            explanation: explain(c, req.note.as_deref()),
        });
    }
    Ok(Json(DiagnoseResponse {
        snapshot_version: d.snapshot_version,
        content_hash: d.content_hash,
        candidates,
        weights: d.weights,
        facts: d.facts,
        neighbours: d.neighbours,
        extraction: d.extraction,
    }))
}

async fn proof(State(state): State<AppState>, Path(key): Path<String>) -> Result<Json<ProofTree>, ApiError> {
    let cache = state.proofs.lock().expect("proof cache");
    cache.trees.get(&key).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("no proof {key}")))
}

// ---------------------------------------------------------------------------
// Feedback
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub base_version: u64,
    #[serde(default)]
    pub edits: Vec<EditRequest>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub version: u64,
    pub content_hash: String,
    pub diff: SnapshotDiff,
    pub events: Vec<UpdateEvent>,
}

async fn feedback(State(state): State<AppState>, body: Bytes) -> Result<Json<FeedbackResponse>, ApiError> {
    let req: FeedbackRequest = parse_body(&body)?;
    let author = if !req.edits.is_empty() && req.edits.iter().all(|e| e.author == Author::Learner) {
        Author::Learner
    } else {
        Author::Clinician
    };
    let commit = state.store.commit(req.base_version, &req.edits, author, &req.note)?;
    Ok(Json(FeedbackResponse {
        version: commit.snapshot.version(),
        content_hash: commit.snapshot.content_hash().to_string(),
        diff: commit.diff,
        events: commit.events,
    }))
}

// ---------------------------------------------------------------------------
// Snapshots and replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotList {
    pub head: u64,
    pub snapshots: Vec<Manifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotView {
    pub manifest: Manifest,
    pub kb: String,
    pub lexicon: String,
}

async fn list_snapshots(State(state): State<AppState>) -> Json<SnapshotList> {
    let snapshots = state.store.manifests();
    let head = snapshots.last().map_or(0, |m| m.version);
    Json(SnapshotList { head, snapshots })
}

async fn show_snapshot(State(state): State<AppState>, Path(version): Path<u64>) -> Result<Json<SnapshotView>, ApiError> {
    let snapshot = state.store.get(version)?;
    let manifest = state
        .store
        .manifests()
        .into_iter()
        .find(|m| m.version == version)
        .ok_or(fuzzdx_core::kb::KbError::MissingSnapshot(version))?;
    Ok(Json(SnapshotView { manifest, kb: snapshot.kb_text(), lexicon: print_lexicon(snapshot.lexicon()) }))
}

async fn diff_snapshots(
    State(state): State<AppState>,
    Path((a, b)): Path<(u64, u64)>,
) -> Result<Json<SnapshotDiff>, ApiError> {
    Ok(Json(state.store.diff_versions(a, b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRequest {
    pub case: CaseRecord,
    pub t1: u64,
    pub t2: u64,
}

async fn replay(State(state): State<AppState>, body: Bytes) -> Result<Json<AuditReport>, ApiError> {
    let req: ReplayRequest = parse_body(&body)?;
    Ok(Json(state.store.audit(&req.case, req.t1, req.t2, state.index.as_deref(), &state.engine)?))
}
