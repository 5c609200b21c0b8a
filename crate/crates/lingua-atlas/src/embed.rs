//! Per-language embeddings extracted from a trained classifier, and exact
//! Euclidean-distance queries over them.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::corpus::LanguageId;
use crate::model::{forward, Checkpoint, FeaturizedCorpus};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("language {0} has no test utterances")]
    NoTestUtterances(LanguageId),
    #[error("unknown language id {0}")]
    UnknownLanguage(LanguageId),
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("need at least 2 languages, got {0}")]
    TooFewLanguages(usize),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("matrix has nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("matrix has a negative or non-finite entry at ({0}, {1})")]
    BadEntry(usize, usize),
    #[error("matrix size {values} does not match {ids} ids")]
    SizeMismatch { ids: usize, values: usize },
    #[error("embedding file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Whether a language embedding is the first fully connected layer's output
/// before or after the ReLU. The layer output read literally is the
/// pre-activation, which is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingKind {
    #[default]
    PreActivation,
    PostActivation,
}

/// Map from language to its embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub embed_dim: usize,
    entries: BTreeMap<LanguageId, Vec<f64>>,
    /// Identifier of the checkpoint the table came from ("(file)" when
    /// loaded from disk).
    pub source: String,
    /// Test utterances averaged per language; empty for file-loaded tables.
    pub n_test_utterances: BTreeMap<LanguageId, usize>,
}

impl EmbeddingTable {
    pub fn new(embed_dim: usize, source: String) -> Self {
        Self {
            embed_dim,
            entries: BTreeMap::new(),
            source,
            n_test_utterances: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: LanguageId, vector: Vec<f64>) {
        debug_assert_eq!(vector.len(), self.embed_dim);
        self.entries.insert(id, vector);
    }

    pub fn get(&self, id: &LanguageId) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Languages in lexicographic order.
    pub fn ids(&self) -> impl Iterator<Item = &LanguageId> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LanguageId, &[f64])> {
        self.entries.iter().map(|(id, v)| (id, v.as_slice()))
    }
}

/// Average the first-FC-layer outputs over each language's test utterances.
pub fn extract_embeddings(
    checkpoint: &Checkpoint,
    corpus: &FeaturizedCorpus,
    kind: EmbeddingKind,
) -> Result<EmbeddingTable, EmbedError> {
    let cfg = &checkpoint.state.config;
    let mut table = EmbeddingTable::new(cfg.embed_dim, checkpoint.id());
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; cfg.embed_dim]; checkpoint.class_ids.len()];
    let mut counts = vec![0usize; checkpoint.class_ids.len()];

    for (class, spec) in &corpus.test {
        let trace = forward(&checkpoint.state, spec)?;
        let v = match kind {
            EmbeddingKind::PreActivation => trace.pre_embedding,
            EmbeddingKind::PostActivation => {
                trace.pre_embedding.iter().map(|&x| x.max(0.0)).collect()
            }
        };
        for (s, x) in sums[*class].iter_mut().zip(&v) {
            *s += x;
        }
        counts[*class] += 1;
    }

    for (class, id) in checkpoint.class_ids.iter().enumerate() {
        if counts[class] == 0 {
            return Err(EmbedError::NoTestUtterances(id.clone()));
        }
        let n = counts[class] as f64;
        table.insert(id.clone(), sums[class].iter().map(|s| s / n).collect());
        table.n_test_utterances.insert(id.clone(), counts[class]);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Embedding,
    Geographic,
    Phoneme,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Embedding => "embedding",
            DistanceKind::Geographic => "geographic",
            DistanceKind::Phoneme => "phoneme",
        }
    }
}

/// Symmetric pairwise distance matrix with a zero diagonal, ids in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<LanguageId>,
    values: Vec<f64>,
    pub kind: DistanceKind,
}

impl DistanceMatrix {
    /// Validates symmetry (1e-9), zero diagonal, and non-negative finite
    /// entries. `values` is row-major n x n.
    pub fn new(
        ids: Vec<LanguageId>,
        values: Vec<f64>,
        kind: DistanceKind,
    ) -> Result<Self, EmbedError> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(EmbedError::SizeMismatch {
                ids: n,
                values: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(EmbedError::NonzeroDiagonal(i));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(EmbedError::BadEntry(i, j));
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(EmbedError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { ids, values, kind })
    }

    /// Build from a pairwise function evaluated once per unordered pair, so
    /// the result is exactly symmetric with an exactly zero diagonal.
    pub fn from_fn(
        ids: Vec<LanguageId>,
        kind: DistanceKind,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, EmbedError> {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(ids, values, kind)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[LanguageId] {
        &self.ids
    }

    pub fn index_of(&self, id: &LanguageId) -> Option<usize> {
        self.ids.binary_search(id).ok().or_else(|| {
            // ids are normally sorted, but fall back to a scan for matrices
            // constructed with a custom order.
            self.ids.iter().position(|x| x == id)
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances between the table's embeddings.
pub fn embedding_distances(table: &EmbeddingTable) -> Result<DistanceMatrix, EmbedError> {
    if table.len() < 2 {
        return Err(EmbedError::TooFewLanguages(table.len()));
    }
    let ids: Vec<LanguageId> = table.ids().cloned().collect();
    let vectors: Vec<&[f64]> = ids.iter().map(|id| table.get(id).unwrap()).collect();
    DistanceMatrix::from_fn(ids.clone(), DistanceKind::Embedding, |i, j| {
        euclidean(vectors[i], vectors[j])
    })
}

/// The `k` languages closest to `id`, ascending by distance, ties broken
/// lexicographically. The query language itself is excluded.
pub fn nearest_neighbors(
    matrix: &DistanceMatrix,
    id: &LanguageId,
    k: usize,
) -> Result<Vec<LanguageId>, EmbedError> {
    let i = matrix
        .index_of(id)
        .ok_or_else(|| EmbedError::UnknownLanguage(id.clone()))?;
    let n = matrix.len();
    if k == 0 || k > n - 1 {
        return Err(EmbedError::KOutOfRange { k, max: n - 1 });
    }
    let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        matrix
            .get(i, a)
            .total_cmp(&matrix.get(i, b))
            .then_with(|| matrix.ids[a].cmp(&matrix.ids[b]))
    });
    Ok(others[..k].iter().map(|&j| matrix.ids[j].clone()).collect())
}

const EMB_HEADER: &str = "lingua-atlas-emb v1";

/// Serialize: header, dim, then `id<TAB>space-separated components` with full
/// round-trip float precision.
pub fn embeddings_to_string(table: &EmbeddingTable) -> String {
    let mut out = format!("{EMB_HEADER}\n{}\n", table.embed_dim);
    for (id, v) in table.iter() {
        out.push_str(id.as_str());
        out.push('\t');
        let joined = v
            .iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&joined);
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, EmbedError> {
    let err = |line: usize, message: String| EmbedError::Parse { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == EMB_HEADER => {}
        other => {
            return Err(err(
                1,
                format!(
                    "expected header {EMB_HEADER:?}, got {:?}",
                    other.map(|(_, l)| l)
                ),
            ))
        }
    }
    let dim: usize = match lines.next() {
        Some((_, d)) => d
            .trim()
            .parse()
            .ok()
            .filter(|d| (1..=65_536).contains(d))
            .ok_or_else(|| err(2, format!("bad embedding dimension {d:?}")))?,
        None => return Err(err(2, "missing embedding dimension".into())),
    };
    let mut table = EmbeddingTable::new(dim, "(file)".to_owned());
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let (id_str, rest) = raw
            .split_once('\t')
            .ok_or_else(|| err(line_no, "missing tab after language id".into()))?;
        let id = LanguageId::new(id_str).map_err(|e| err(line_no, e.to_string()))?;
        let values: Result<Vec<f64>, _> = rest.split(' ').map(str::parse::<f64>).collect();
        let values = values.map_err(|e| err(line_no, format!("bad float: {e}")))?;
        if values.len() != dim {
            return Err(err(
                line_no,
                format!("expected {dim} components, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(line_no, "non-finite component".into()));
        }
        if table.entries.insert(id.clone(), values).is_some() {
            return Err(err(line_no, format!("duplicate language id {id}")));
        }
    }
    Ok(table)
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<(), EmbedError> {
    std::fs::write(path, embeddings_to_string(table)).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable, EmbedError> {
    let text = std::fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(&text)
}
