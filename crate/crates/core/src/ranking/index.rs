use super::embed::{embed_case, CaseVector, Embedder};
use super::RankingError;
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Gini threshold below which a neighbour set counts as homogeneous.
pub const DEFAULT_GINI_THRESHOLD: f64 = 0.3;
pub const DEFAULT_K_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub vector: CaseVector,
    pub labels: Vec<Symbol>,
    /// Symptoms the stored case expresses.
    #[serde(default)]
    pub symptoms: Vec<Symbol>,
}

/// Exact-scan cosine index over stored cases. Read-only once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
    ids: HashSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    pub id: String,
    pub cosine: f64,
}

impl CaseIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new(), ids: HashSet::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn insert(&mut self, entry: IndexEntry) -> Result<(), RankingError> {
        if entry.vector.dim() != self.dim {
            return Err(RankingError::DimensionMismatch { expected: self.dim, found: entry.vector.dim() });
        }
        if !self.ids.insert(entry.id.clone()) {
            return Err(RankingError::DuplicateCase(entry.id));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Embeds and inserts a case described by its symptoms.
    pub fn insert_case(
        &mut self,
        id: &str,
        symptoms: &[Symbol],
        labels: &[Symbol],
        embedder: &dyn Embedder,
    ) -> Result<(), RankingError> {
        let items: Vec<&str> = symptoms.iter().map(Symbol::as_str).collect();
        let vector = embed_case(&items, embedder)?;
        self.insert(IndexEntry { id: id.to_string(), vector, labels: labels.to_vec(), symptoms: symptoms.to_vec() })
    }

    /// One JSON object per line: `{id, vector, labels, symptoms}`.
    pub fn from_jsonl(text: &str) -> Result<Self, RankingError> {
        let mut index: Option<CaseIndex> = None;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| RankingError::Index { line: n + 1, reason };
            let raw: RawEntry = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let vector = CaseVector::from_values(raw.vector).ok_or_else(|| bad("zero vector".into()))?;
            let idx = index.get_or_insert_with(|| CaseIndex::new(vector.dim()));
            idx.insert(IndexEntry { id: raw.id, vector, labels: raw.labels, symptoms: raw.symptoms })
                .map_err(|e| bad(e.to_string()))?;
        }
        index.ok_or(RankingError::EmptyIndex)
    }

    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }
}

#[derive(Deserialize)]
struct RawEntry {
    id: String,
    vector: Vec<f64>,
    labels: Vec<Symbol>,
    #[serde(default)]
    symptoms: Vec<Symbol>,
}

/// `1 − Σ p_c²` over label frequencies.
pub fn gini(labels: &[Symbol]) -> Result<f64, RankingError> {
    if labels.is_empty() {
        return Err(RankingError::EmptySet);
    }
    let mut counts: BTreeMap<&Symbol, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    Ok(1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

fn label_multiset<'a>(entries: impl Iterator<Item = &'a IndexEntry>) -> Vec<Symbol> {
    entries
        .flat_map(|e| e.labels.iter().collect::<BTreeSet<_>>().into_iter().cloned())
        .collect()
}

/// Nearest cases by cosine (ties by id). Starting from `min(k_max, |index|)`
/// the farthest neighbour is dropped while the label Gini impurity is at
/// least `threshold` and more than one neighbour remains.
pub fn retrieve_neighbours(
    index: &CaseIndex,
    v: &CaseVector,
    k_max: usize,
    threshold: f64,
) -> Result<Vec<Neighbour>, RankingError> {
    if index.is_empty() {
        return Err(RankingError::EmptyIndex);
    }
    if v.dim() != index.dim() {
        return Err(RankingError::DimensionMismatch { expected: index.dim(), found: v.dim() });
    }
    let mut scored: Vec<(f64, &IndexEntry)> = index.entries.iter().map(|e| (v.cosine(&e.vector), e)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut k = k_max.max(1).min(scored.len());
    while k > 1 && gini(&label_multiset(scored[..k].iter().map(|s| s.1)))? >= threshold {
        k -= 1;
    }
    Ok(scored[..k].iter().map(|(c, e)| Neighbour { id: e.id.clone(), cosine: *c }).collect())
}

/// Highest non-negative cosine among neighbours whose case expresses
/// `symptom`; 0 when none does.
pub fn neighbour_prior(symptom: &Symbol, neighbours: &[Neighbour], index: &CaseIndex) -> f64 {
    neighbours
        .iter()
        .filter(|n| index.get(&n.id).is_some_and(|e| e.symptoms.contains(symptom)))
        .map(|n| n.cosine.max(0.0))
        .fold(0.0, f64::max)
}
