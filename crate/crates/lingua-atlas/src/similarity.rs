//! Outlier analysis, bag-of-phonemes vectors, neighbor selection across the
//! three distance methods, and the zero-shot MCD harness.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{wav, LanguageId, Split, Utterance};
use crate::dsp::{self, MelConfig};
use crate::embed::{nearest_neighbors, DistanceKind, DistanceMatrix};
use crate::familytree::FamilyForest;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("distance matrices cover different language sets")]
    IdMismatch,
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("language {0} has an empty phoneme inventory")]
    EmptyInventory(LanguageId),
    #[error("language {0} has no phoneme inventory")]
    MissingInventory(LanguageId),
    #[error("phoneme inventory parse error at line {line}: {message}")]
    InventoryParse { line: usize, message: String },
    #[error("pairs file parse error at line {line}: {message}")]
    PairsParse { line: usize, message: String },
    #[error("pair {target}/{neighbor}: {a} target files vs {b} neighbor files")]
    MismatchedCounts {
        target: LanguageId,
        neighbor: LanguageId,
        a: usize,
        b: usize,
    },
    #[error("no wav files under {0}")]
    EmptyAudioDir(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
}

/// One row of the outlier table.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRow {
    pub id: LanguageId,
    /// Family members within the radius.
    pub n_nearby_family: usize,
    /// Family members (self excluded).
    pub n_family: usize,
    /// Languages within the radius (self excluded).
    pub n_nearby: usize,
    /// Mean embedding distance to family members.
    pub mean_family_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 when fewer than two rows.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSummary {
    pub nearby_family: ColumnSummary,
    pub family: ColumnSummary,
    pub nearby: ColumnSummary,
    pub distance: ColumnSummary,
}

/// Non-single languages ranked by how far their embedding sits from the rest
/// of their family.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    /// Descending by `mean_family_distance`, ties broken by id.
    pub rows: Vec<OutlierRow>,
    pub summary: OutlierSummary,
    pub radius_km: f64,
}

fn column_summary(values: impl Iterator<Item = f64> + Clone) -> ColumnSummary {
    let n = values.clone().count();
    if n == 0 {
        return ColumnSummary {
            mean: f64::NAN,
            std: 0.0,
        };
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    ColumnSummary { mean, std }
}

/// Rank non-single languages by mean embedding distance to their family,
/// with nearby counts within `radius_km`.
pub fn outlier_report(
    emb: &DistanceMatrix,
    geo: &DistanceMatrix,
    forest: &FamilyForest,
    radius_km: f64,
) -> Result<OutlierReport, SimilarityError> {
    if emb.ids() != geo.ids() {
        return Err(SimilarityError::IdMismatch);
    }
    if radius_km <= 0.0 || radius_km.is_nan() {
        return Err(SimilarityError::BadRadius(radius_km));
    }
    for id in forest.membership().keys() {
        if emb.index_of(id).is_none() {
            return Err(SimilarityError::IdMismatch);
        }
    }

    let mut rows = Vec::new();
    for id in forest.eligible_languages() {
        let i = emb.index_of(&id).unwrap();
        let family = forest.family_of(&id).unwrap();
        let mut n_family = 0usize;
        let mut n_nearby = 0usize;
        let mut n_nearby_family = 0usize;
        let mut family_distance_sum = 0.0;
        for (j, other) in emb.ids().iter().enumerate() {
            if j == i {
                continue;
            }
            let same_family = forest.family_of(other) == Some(family);
            let nearby = geo.get(i, j) < radius_km;
            if same_family {
                n_family += 1;
                family_distance_sum += emb.get(i, j);
            }
            if nearby {
                n_nearby += 1;
            }
            if same_family && nearby {
                n_nearby_family += 1;
            }
        }
        rows.push(OutlierRow {
            id,
            n_nearby_family,
            n_family,
            n_nearby,
            mean_family_distance: family_distance_sum / n_family as f64,
        });
    }
    rows.sort_by(|a, b| {
        b.mean_family_distance
            .total_cmp(&a.mean_family_distance)
            .then_with(|| a.id.cmp(&b.id))
    });

    let summary = OutlierSummary {
        nearby_family: column_summary(rows.iter().map(|r| r.n_nearby_family as f64)),
        family: column_summary(rows.iter().map(|r| r.n_family as f64)),
        nearby: column_summary(rows.iter().map(|r| r.n_nearby as f64)),
        distance: column_summary(rows.iter().map(|r| r.mean_family_distance)),
    };
    Ok(OutlierReport {
        rows,
        summary,
        radius_km,
    })
}

/// Binary indicator vector over a shared, sorted phoneme alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeVector {
    pub language_id: LanguageId,
    pub bits: Vec<bool>,
}

/// Build vectors over the sorted union of all inventories' symbols. Returns
/// the alphabet alongside one vector per language, sorted by id.
pub fn phoneme_vectors(
    inventories: &BTreeMap<LanguageId, BTreeSet<String>>,
) -> Result<(Vec<String>, Vec<PhonemeVector>), SimilarityError> {
    for (id, inv) in inventories {
        if inv.is_empty() {
            return Err(SimilarityError::EmptyInventory(id.clone()));
        }
    }
    let alphabet: Vec<String> = inventories
        .values()
        .flatten()
        .cloned()
        .collect::<BTreeSet<String>>()
        .into_iter()
        .collect();
    let vectors = inventories
        .iter()
        .map(|(id, inv)| PhonemeVector {
            language_id: id.clone(),
            bits: alphabet.iter().map(|p| inv.contains(p)).collect(),
        })
        .collect();
    Ok((alphabet, vectors))
}

/// Pairwise Euclidean distances between bag-of-phonemes vectors. Covers only
/// the languages that have inventories.
pub fn phoneme_distance_matrix(
    inventories: &BTreeMap<LanguageId, BTreeSet<String>>,
) -> Result<DistanceMatrix, SimilarityError> {
    let (_, vectors) = phoneme_vectors(inventories)?;
    let ids: Vec<LanguageId> = vectors.iter().map(|v| v.language_id.clone()).collect();
    Ok(DistanceMatrix::from_fn(
        ids,
        DistanceKind::Phoneme,
        |i, j| {
            let differing = vectors[i]
                .bits
                .iter()
                .zip(&vectors[j].bits)
                .filter(|(a, b)| a != b)
                .count();
            (differing as f64).sqrt()
        },
    )?)
}

/// Parse a phoneme inventory file: `language_id<TAB>phoneme<TAB>phoneme...`
/// per line, symbols treated as opaque tokens.
pub fn parse_phoneme_inventories(
    text: &str,
) -> Result<BTreeMap<LanguageId, BTreeSet<String>>, SimilarityError> {
    let err = |line: usize, message: String| SimilarityError::InventoryParse { line, message };
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let mut fields = raw.split('\t');
        let id_str = fields.next().unwrap();
        let id = LanguageId::new(id_str).map_err(|e| err(line_no, e.to_string()))?;
        let mut inv = BTreeSet::new();
        for p in fields {
            if p.is_empty() {
                return Err(err(line_no, "empty phoneme token".into()));
            }
            inv.insert(p.to_owned());
        }
        if inv.is_empty() {
            return Err(err(line_no, format!("language {id} lists no phonemes")));
        }
        if out.insert(id.clone(), inv).is_some() {
            return Err(err(line_no, format!("duplicate inventory for {id}")));
        }
    }
    Ok(out)
}

/// How a neighbor is chosen in the zero-shot task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NeighborMethod {
    Embedding,
    Geographic,
    Phoneme,
}

impl NeighborMethod {
    pub fn name(self) -> &'static str {
        match self {
            NeighborMethod::Embedding => "embedding",
            NeighborMethod::Geographic => "geographic",
            NeighborMethod::Phoneme => "phoneme",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "emb" | "embedding" => Some(NeighborMethod::Embedding),
            "geo" | "geographic" => Some(NeighborMethod::Geographic),
            "ph" | "phoneme" | "phonemes" => Some(NeighborMethod::Phoneme),
            _ => None,
        }
    }
}

/// The k-th closest language (1-indexed) under the given distance matrix;
/// the matrix's kind is the method. Self-excluded, ties lexicographic.
pub fn select_neighbor(
    matrix: &DistanceMatrix,
    id: &LanguageId,
    k: usize,
) -> Result<LanguageId, SimilarityError> {
    let neighbors = nearest_neighbors(matrix, id, k)?;
    Ok(neighbors[k - 1].clone())
}

/// Languages with the most family members, the target-selection rule for
/// the zero-shot experiments. Ties break lexicographically.
pub fn select_targets(forest: &FamilyForest, count: usize) -> Vec<LanguageId> {
    let mut ids: Vec<LanguageId> = forest.membership().keys().cloned().collect();
    ids.sort_by(|a, b| {
        let fa = forest.family_members(forest.family_of(a).unwrap()).len();
        let fb = forest.family_members(forest.family_of(b).unwrap()).len();
        fb.cmp(&fa).then_with(|| a.cmp(b))
    });
    ids.truncate(count);
    ids
}

/// One zero-shot comparison: utterances synthesized for `target` by its own
/// model versus by the model of `neighbor` (chosen by `method` at rank `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotPair {
    pub method: NeighborMethod,
    pub k: usize,
    pub target: LanguageId,
    pub neighbor: LanguageId,
    pub target_dir: PathBuf,
    pub neighbor_dir: PathBuf,
}

/// Parse a pairs file: one pair per line,
/// `method<TAB>k<TAB>target<TAB>neighbor<TAB>target_dir<TAB>neighbor_dir`.
pub fn parse_pairs(text: &str) -> Result<Vec<ZeroShotPair>, SimilarityError> {
    let err = |line: usize, message: String| SimilarityError::PairsParse { line, message };
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 6 {
            return Err(err(line_no, format!("need 6 fields, got {}", fields.len())));
        }
        let method = NeighborMethod::parse(fields[0])
            .ok_or_else(|| err(line_no, format!("unknown method {:?}", fields[0])))?;
        let k: usize = fields[1]
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| err(line_no, format!("bad rank {:?}", fields[1])))?;
        let target = LanguageId::new(fields[2]).map_err(|e| err(line_no, e.to_string()))?;
        let neighbor = LanguageId::new(fields[3]).map_err(|e| err(line_no, e.to_string()))?;
        if fields[4].is_empty() || fields[5].is_empty() {
            return Err(err(line_no, "audio directories must be non-empty".into()));
        }
        pairs.push(ZeroShotPair {
            method,
            k,
            target,
            neighbor,
            target_dir: PathBuf::from(fields[4]),
            neighbor_dir: PathBuf::from(fields[5]),
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone)]
pub struct ZeroShotConfig {
    /// Cepstral order for the MCD.
    pub order: usize,
    /// Compare at most this many utterances per pair.
    pub limit: Option<usize>,
    pub mel: MelConfig,
    pub threads: usize,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        Self {
            order: dsp::DEFAULT_MCD_ORDER,
            limit: Some(100),
            mel: MelConfig::default(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroShotCell {
    pub mean_mcd: f64,
    pub n_pairs: usize,
}

/// Mean MCD per (method, k) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotReport {
    pub k_values: Vec<usize>,
    pub methods: Vec<NeighborMethod>,
    pub cells: BTreeMap<(NeighborMethod, usize), ZeroShotCell>,
}

impl ZeroShotReport {
    pub fn cell(&self, method: NeighborMethod, k: usize) -> Option<ZeroShotCell> {
        self.cells.get(&(method, k)).copied()
    }
}

fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>, SimilarityError> {
    let entries = std::fs::read_dir(dir).map_err(|source| SimilarityError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| SimilarityError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("wav") {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(SimilarityError::EmptyAudioDir(dir.display().to_string()));
    }
    files.sort();
    Ok(files)
}

fn pair_mcd(pair: &ZeroShotPair, cfg: &ZeroShotConfig) -> Result<f64, SimilarityError> {
    let mut a_files = list_wavs(&pair.target_dir)?;
    let mut b_files = list_wavs(&pair.neighbor_dir)?;
    if let Some(limit) = cfg.limit {
        a_files.truncate(limit);
        b_files.truncate(limit);
    }
    if a_files.len() != b_files.len() {
        return Err(SimilarityError::MismatchedCounts {
            target: pair.target.clone(),
            neighbor: pair.neighbor.clone(),
            a: a_files.len(),
            b: b_files.len(),
        });
    }
    let mut sum = 0.0;
    for (fa, fb) in a_files.iter().zip(&b_files) {
        let cep_a = file_cepstrum(fa, cfg)?;
        let cep_b = file_cepstrum(fb, cfg)?;
        sum += dsp::mcd(&cep_a, &cep_b)?;
    }
    Ok(sum / a_files.len() as f64)
}

fn file_cepstrum(path: &Path, cfg: &ZeroShotConfig) -> Result<dsp::MelCepstrum, SimilarityError> {
    let (samples, sample_rate) = wav::read_wav(path)?;
    let utt = Utterance {
        language_id: LanguageId::new("AAAAAA").unwrap(),
        samples,
        sample_rate,
        split: Split::Test,
    };
    let spec = dsp::melspec(&utt, &cfg.mel)?;
    Ok(dsp::melcep(&spec, cfg.order)?)
}

/// Score every pair and average into (method, k) cells. Pairs are scored
/// independently (optionally across threads) and reduced in input order.
pub fn zero_shot_report(
    pairs: &[ZeroShotPair],
    cfg: &ZeroShotConfig,
) -> Result<ZeroShotReport, SimilarityError> {
    let scores: Vec<Result<f64, SimilarityError>> = if cfg.threads <= 1 || pairs.len() <= 1 {
        pairs.iter().map(|p| pair_mcd(p, cfg)).collect()
    } else {
        let n_workers = cfg.threads.min(pairs.len());
        let chunk = pairs.len().div_ceil(n_workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .chunks(chunk)
                .map(|chunk| {
                    scope.spawn(move || chunk.iter().map(|p| pair_mcd(p, cfg)).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("scoring worker panicked"))
                .collect()
        })
    };

    let mut sums: BTreeMap<(NeighborMethod, usize), (f64, usize)> = BTreeMap::new();
    for (pair, score) in pairs.iter().zip(scores) {
        let score = score?;
        let entry = sums.entry((pair.method, pair.k)).or_insert((0.0, 0));
        entry.0 += score;
        entry.1 += 1;
    }

    let mut k_values: Vec<usize> = sums.keys().map(|(_, k)| *k).collect();
    k_values.sort_unstable();
    k_values.dedup();
    let mut methods: Vec<NeighborMethod> = sums.keys().map(|(m, _)| *m).collect();
    methods.sort();
    methods.dedup();
    let cells = sums
        .into_iter()
        .map(|(key, (sum, n))| {
            (
                key,
                ZeroShotCell {
                    mean_mcd: sum / n as f64,
                    n_pairs: n,
                },
            )
        })
        .collect();
    Ok(ZeroShotReport {
        k_values,
        methods,
        cells,
    })
}
