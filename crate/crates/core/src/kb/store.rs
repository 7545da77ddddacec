use super::{apply_edits, diff, now_millis, Author, EditRequest, KbError, KnowledgeSnapshot, SharedSnapshot, SnapshotDiff, SnapshotDraft};
use crate::dsl::{parse_lexicon, print_lexicon, Provenance, RuleId};
use crate::learning::{LearnerConfig, UpdateEvent};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleMeta {
    pub provenance: Provenance,
    pub created_at: u64,
}

/// Per-version metadata written next to the `.kb` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u64,
    pub timestamp: u64,
    pub parent: Option<u64>,
    pub content_hash: String,
    pub author: Author,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub rule_meta: BTreeMap<RuleId, RuleMeta>,
}

impl Manifest {
    fn describe(snapshot: &KnowledgeSnapshot, parent: Option<u64>, author: Author, note: &str) -> Self {
        Self {
            version: snapshot.version(),
            timestamp: snapshot.timestamp(),
            parent,
            content_hash: snapshot.content_hash().to_string(),
            author,
            note: note.to_string(),
            rule_meta: snapshot
                .rules()
                .iter()
                .map(|r| (r.id.clone(), RuleMeta { provenance: r.provenance, created_at: r.created_at }))
                .collect(),
        }
    }
}

/// Result of a successful commit.
#[derive(Debug, Clone)]
pub struct Commit {
    pub snapshot: SharedSnapshot,
    pub diff: SnapshotDiff,
    pub events: Vec<UpdateEvent>,
}

/// Append-only log of snapshots with a single serialized writer.
///
/// Readers take the read lock only long enough to clone an `Arc`, so a
/// reader always sees a fully committed version.
#[derive(Debug)]
pub struct SnapshotStore {
    dir: Option<PathBuf>,
    entries: RwLock<Vec<(SharedSnapshot, Manifest)>>,
    writer: Mutex<()>,
    learner: LearnerConfig,
}

impl SnapshotStore {
    pub fn in_memory(initial: KnowledgeSnapshot) -> Self {
        let manifest = Manifest::describe(&initial, None, Author::Clinician, "initial");
        Self {
            dir: None,
            entries: RwLock::new(vec![(Arc::new(initial), manifest)]),
            writer: Mutex::new(()),
            learner: LearnerConfig::default(),
        }
    }

    /// Initialises `dir` with `initial` as its first version.
    pub fn create(dir: impl AsRef<Path>, initial: KnowledgeSnapshot) -> Result<Self, KbError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        if !list_versions(&dir)?.is_empty() {
            return Err(KbError::Corrupt(format!("{} already holds a store", dir.display())));
        }
        let store = Self { dir: Some(dir), ..Self::in_memory(initial) };
        let entries = store.entries.read().expect("store lock");
        store.persist(&entries[0].0, &entries[0].1)?;
        drop(entries);
        Ok(store)
    }

    /// Loads every version in `dir`, verifying content hashes.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref().to_path_buf();
        let mut entries = Vec::new();
        for version in list_versions(&dir)? {
            let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(file_name(version, "json")))?)?;
            let kb = fs::read_to_string(dir.join(file_name(version, "kb")))?;
            let lexicon = parse_lexicon(&fs::read_to_string(dir.join(file_name(version, "lexicon.tsv")))?)?;
            let program = crate::dsl::parse_program(&kb)?;
            let snapshot = KnowledgeSnapshot::new(version, manifest.timestamp, program.rules, lexicon, program.priors)?
                .with_provenance(&manifest.rule_meta);
            if snapshot.content_hash() != manifest.content_hash {
                return Err(KbError::Corrupt(format!("v{version} content does not match its manifest hash")));
            }
            entries.push((Arc::new(snapshot), manifest));
        }
        if entries.is_empty() {
            return Err(KbError::Corrupt(format!("no snapshots in {}", dir.display())));
        }
        Ok(Self { dir: Some(dir), entries: RwLock::new(entries), writer: Mutex::new(()), learner: LearnerConfig::default() })
    }

    pub fn with_learner(mut self, learner: LearnerConfig) -> Self {
        self.learner = learner;
        self
    }

    pub fn learner(&self) -> &LearnerConfig {
        &self.learner
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn head(&self) -> SharedSnapshot {
        self.entries.read().expect("store lock").last().expect("non-empty store").0.clone()
    }

    pub fn get(&self, version: u64) -> Result<SharedSnapshot, KbError> {
        self.entries
            .read()
            .expect("store lock")
            .iter()
            .find(|(s, _)| s.version() == version)
            .map(|(s, _)| s.clone())
            .ok_or(KbError::MissingSnapshot(version))
    }

    pub fn manifests(&self) -> Vec<Manifest> {
        self.entries.read().expect("store lock").iter().map(|(_, m)| m.clone()).collect()
    }

    pub fn diff_versions(&self, a: u64, b: u64) -> Result<SnapshotDiff, KbError> {
        diff(&*self.get(a)?, &*self.get(b)?)
    }

    /// Applies `edits` atop `base_version`, which must be the current head.
    pub fn commit(&self, base_version: u64, edits: &[EditRequest], author: Author, note: &str) -> Result<Commit, KbError> {
        let _guard = self.writer.lock().expect("writer lock");
        let head = self.head();
        if head.version() != base_version {
            return Err(KbError::StaleVersion { base: base_version, head: head.version() });
        }
        let (next, events) = apply_edits(&head, edits, &self.learner, head.version() + 1, now_millis())?;
        self.publish(head, next, author, note, events)
    }

    /// Commits externally built content, e.g. a learner's final rule set.
    pub fn commit_draft(&self, base_version: u64, draft: SnapshotDraft, author: Author, note: &str) -> Result<Commit, KbError> {
        let _guard = self.writer.lock().expect("writer lock");
        let head = self.head();
        if head.version() != base_version {
            return Err(KbError::StaleVersion { base: base_version, head: head.version() });
        }
        let next = draft.build(head.version() + 1, now_millis())?;
        self.publish(head, next, author, note, Vec::new())
    }

    fn publish(
        &self,
        head: SharedSnapshot,
        next: KnowledgeSnapshot,
        author: Author,
        note: &str,
        events: Vec<UpdateEvent>,
    ) -> Result<Commit, KbError> {
        let diff = diff(&head, &next)?;
        let manifest = Manifest::describe(&next, Some(head.version()), author, note);
        self.persist(&next, &manifest)?;
        let snapshot = Arc::new(next);
        self.entries.write().expect("store lock").push((snapshot.clone(), manifest));
        Ok(Commit { snapshot, diff, events })
    }

    /// Drops all but the newest `keep` versions. Returns the dropped versions.
    pub fn compact(&self, keep: usize) -> Result<Vec<u64>, KbError> {
        let _guard = self.writer.lock().expect("writer lock");
        let mut entries = self.entries.write().expect("store lock");
        let keep = keep.max(1);
        if entries.len() <= keep {
            return Ok(Vec::new());
        }
        let cut = entries.len() - keep;
        let dropped: Vec<u64> = entries.drain(..cut).map(|(s, _)| s.version()).collect();
        if let Some(dir) = &self.dir {
            for v in &dropped {
                for ext in ["kb", "lexicon.tsv", "json"] {
                    let path = dir.join(file_name(*v, ext));
                    if path.exists() {
                        fs::remove_file(path)?;
                    }
                }
            }
        }
        Ok(dropped)
    }

    fn persist(&self, snapshot: &KnowledgeSnapshot, manifest: &Manifest) -> Result<(), KbError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let v = snapshot.version();
        write_atomic(&dir.join(file_name(v, "kb")), &snapshot.kb_text())?;
        write_atomic(&dir.join(file_name(v, "lexicon.tsv")), &print_lexicon(snapshot.lexicon()))?;
        write_atomic(&dir.join(file_name(v, "json")), &serde_json::to_string_pretty(manifest)?)?;
        Ok(())
    }
}

fn file_name(version: u64, ext: &str) -> String {
    format!("v{version:06}.{ext}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), KbError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Versions with a manifest in `dir`, ascending.
fn list_versions(dir: &Path) -> Result<Vec<u64>, KbError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(v) = name.strip_prefix('v').and_then(|n| n.strip_suffix(".json")) {
            if let Ok(v) = v.parse() {
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Lexicon, Literal};
    use crate::kb::EditKind;

    fn initial() -> KnowledgeSnapshot {
        KnowledgeSnapshot::from_kb_text(
            "diagnosis(stable_angina) :- symptom(chest_pain)@0.8, trigger(exertion)@0.9.\nprior(stable_angina, _, _, _, 0.05).",
            Lexicon::default_hedges(),
            1,
        )
        .unwrap()
    }

    fn adjust(store: &SnapshotStore, w: f64) -> EditRequest {
        EditRequest::clinician(EditKind::AdjustWeight {
            rule_id: store.head().rules()[0].id.clone(),
            literal: Literal::unary("symptom", "chest_pain"),
            new_weight: w,
        })
    }

    #[test]
    fn commits_are_gap_free_and_stale_rejected() {
        let store = SnapshotStore::in_memory(initial());
        let c = store.commit(1, &[adjust(&store, 0.5)], Author::Clinician, "atypical").unwrap();
        assert_eq!(c.snapshot.version(), 2);
        assert_eq!(c.diff.weight_deltas.len(), 1);
        let err = store.commit(1, &[], Author::Clinician, "").unwrap_err();
        assert!(matches!(err, KbError::StaleVersion { base: 1, head: 2 }));
        let c = store.commit(2, &[], Author::Clinician, "").unwrap();
        assert!(c.diff.is_empty());
        assert_eq!(store.manifests().iter().map(|m| m.version).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(store.get(1).unwrap().rules()[0].body[0].weight, 0.8);
        assert!(matches!(store.get(9), Err(KbError::MissingSnapshot(9))));
    }

    #[test]
    fn failed_commit_leaves_head() {
        let store = SnapshotStore::in_memory(initial());
        assert!(store.commit(1, &[adjust(&store, 3.0)], Author::Clinician, "").is_err());
        assert_eq!(store.head().version(), 1);
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::create(dir.path(), initial()).unwrap();
        store
            .commit(
                1,
                &[EditRequest::clinician(EditKind::AddRule {
                    rule: "diagnosis(acute_mi) :- symptom(chest_pain), lab(troponin_elevated).".into(),
                    weight: None,
                })],
                Author::Clinician,
                "exception",
            )
            .unwrap();
        let reopened = SnapshotStore::open(dir.path()).unwrap();
        assert_eq!(reopened.manifests(), store.manifests());
        let head = reopened.head();
        assert_eq!(head.content_hash(), store.head().content_hash());
        let added = head.rules().iter().find(|r| r.disease().as_str() == "acute_mi").unwrap();
        assert_eq!(added.provenance, Provenance::Clinician);
        assert!(SnapshotStore::create(dir.path(), initial()).is_err());
    }

    #[test]
    fn tampered_file_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        SnapshotStore::create(dir.path(), initial()).unwrap();
        let kb = dir.path().join("v000001.kb");
        let text = fs::read_to_string(&kb).unwrap().replace("0.8", "0.7");
        fs::write(&kb, text).unwrap();
        assert!(matches!(SnapshotStore::open(dir.path()), Err(KbError::Corrupt(_))));
    }

    #[test]
    fn compaction_keeps_newest() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::create(dir.path(), initial()).unwrap();
        for v in 1..4 {
            store.commit(v, &[], Author::Clinician, "").unwrap();
        }
        assert_eq!(store.compact(2).unwrap(), vec![1, 2]);
        let reopened = SnapshotStore::open(dir.path()).unwrap();
        assert_eq!(reopened.manifests().iter().map(|m| m.version).collect::<Vec<_>>(), vec![3, 4]);
    }
}
