//! Language metadata, utterance manifests, WAV I/O, and a deterministic
//! synthetic multilingual corpus generator.

mod manifest;
pub mod synth;
pub mod wav;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use synth::{GeoLayout, LanguageRecipe, SynthConfig};

/// Default corpus-wide sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid language id {0:?}: must be 6 uppercase alphanumeric characters")]
    InvalidLanguageId(String),
    #[error("duplicate language id {0}")]
    DuplicateLanguage(LanguageId),
    #[error("utterance references undeclared language id {0}")]
    UnknownLanguage(LanguageId),
    #[error("latitude {0} out of range [-90, 90]")]
    LatOutOfRange(f64),
    #[error("longitude {0} out of range [-180, 180]")]
    LonOutOfRange(f64),
    #[error("classification path for {id} ({tree}) has an empty label")]
    EmptyClassificationLabel { id: LanguageId, tree: TreeSource },
    #[error("classification label {label:?} for {id} contains a reserved character")]
    ReservedCharInLabel { id: LanguageId, label: String },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadTrainFraction(f64),
    #[error("language {0} has {1} utterance(s); at least 2 are required to split")]
    TooFewUtterances(LanguageId, usize),
    #[error("wav error on {path}: {message}")]
    Wav { path: String, message: String },
    #[error("expected mono 16-bit PCM wav, got {channels} channel(s), {bits} bits ({path})")]
    UnsupportedWav {
        path: String,
        channels: u16,
        bits: u16,
    },
    #[error("synthetic corpus needs at least 2 languages (got {0})")]
    TooFewLanguages(usize),
    #[error("synthetic corpus needs at least 4 utterances per language (got {0})")]
    TooFewSynthUtterances(usize),
    #[error("synthetic formant {0:.1} Hz exceeds the usable band for sample rate {1} Hz")]
    FormantOutOfBand(f64, u32),
}

/// Six-character uppercase alphanumeric language code, e.g. `XTDTBL`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(raw: &str) -> Result<Self, CorpusError> {
        if raw.len() == 6
            && raw
                .bytes()
                .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
        {
            Ok(Self(raw.to_owned()))
        } else {
            Err(CorpusError::InvalidLanguageId(raw.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// The three family-tree data sources a language may carry classifications for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreeSource {
    Ethnologue,
    Wikipedia,
    Glottolog,
}

impl TreeSource {
    pub const ALL: [TreeSource; 3] = [
        TreeSource::Ethnologue,
        TreeSource::Wikipedia,
        TreeSource::Glottolog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TreeSource::Ethnologue => "ethnologue",
            TreeSource::Wikipedia => "wikipedia",
            TreeSource::Glottolog => "glottolog",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ethnologue" => Some(TreeSource::Ethnologue),
            "wikipedia" => Some(TreeSource::Wikipedia),
            "glottolog" => Some(TreeSource::Glottolog),
            _ => None,
        }
    }
}

impl fmt::Display for TreeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One language: identity, geographic point, classification paths per tree
/// source, and an optional phoneme inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageRecord {
    pub id: LanguageId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub classifications: BTreeMap<TreeSource, Vec<String>>,
    pub phonemes: Option<BTreeSet<String>>,
}

impl LanguageRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.name.contains(['\t', '\n']) {
            return Err(CorpusError::Parse {
                line: 0,
                message: format!("language name {:?} contains a field separator", self.name),
            });
        }
        if !self.lat.is_finite() || self.lat < -90.0 || self.lat > 90.0 {
            return Err(CorpusError::LatOutOfRange(self.lat));
        }
        if !self.lon.is_finite() || self.lon < -180.0 || self.lon > 180.0 {
            return Err(CorpusError::LonOutOfRange(self.lon));
        }
        for (source, path) in &self.classifications {
            if path.is_empty() {
                return Err(CorpusError::EmptyClassificationLabel {
                    id: self.id.clone(),
                    tree: *source,
                });
            }
            for label in path {
                if label.trim().is_empty() || label.trim() != label {
                    return Err(CorpusError::EmptyClassificationLabel {
                        id: self.id.clone(),
                        tree: *source,
                    });
                }
                // These would collide with the manifest field separators.
                if label.contains([',', ';', '=', '\t', '\n']) {
                    return Err(CorpusError::ReservedCharInLabel {
                        id: self.id.clone(),
                        label: label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A manifest row pointing at one WAV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceEntry {
    pub language_id: LanguageId,
    pub path: String,
    pub split: Split,
}

/// One utterance with its audio loaded into memory. Samples are mono PCM
/// scaled to [-1, 1).
#[derive(Debug, Clone)]
pub struct Utterance {
    pub language_id: LanguageId,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub split: Split,
}

/// Declares the languages and utterances of a corpus. The audio itself lives
/// in WAV files referenced by relative path.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub languages: Vec<LanguageRecord>,
    pub utterances: Vec<UtteranceEntry>,
    pub sample_rate: u32,
}

impl CorpusManifest {
    /// Parse the line-oriented manifest format:
    ///
    /// ```text
    /// lingua-atlas-manifest v1
    /// L<TAB>id<TAB>name<TAB>lat<TAB>lon<TAB>source=path;source=path...
    /// U<TAB>language_id<TAB>relative/wav/path<TAB>train|test
    /// ```
    ///
    /// Classification paths are comma-joined label lists
    /// (`Cariban, Guianan`). Errors carry the offending line number.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        manifest::parse(text)
    }

    /// Canonical serialized form. `parse` of the result reproduces `self`.
    pub fn to_manifest_string(&self) -> String {
        manifest::write(self)
    }

    pub fn language(&self, id: &LanguageId) -> Option<&LanguageRecord> {
        self.languages.iter().find(|l| &l.id == id)
    }

    /// Utterances of one split, in manifest order.
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &UtteranceEntry> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    /// Checks id uniqueness, utterance references, and per-language record
    /// invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for lang in &self.languages {
            lang.validate()?;
            if !seen.insert(lang.id.clone()) {
                return Err(CorpusError::DuplicateLanguage(lang.id.clone()));
            }
        }
        for utt in &self.utterances {
            if !seen.contains(&utt.language_id) {
                return Err(CorpusError::UnknownLanguage(utt.language_id.clone()));
            }
            if utt.path.is_empty() || utt.path.starts_with('/') || utt.path.contains(['\t', '\n']) {
                return Err(CorpusError::Parse {
                    line: 0,
                    message: format!(
                        "wav path {:?} must be relative and separator-free",
                        utt.path
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Read and validate a manifest file.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    CorpusManifest::parse(&text)
}

/// Write a manifest in canonical form.
pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<(), CorpusError> {
    std::fs::write(path, manifest.to_manifest_string()).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reassign utterances to train/test, stratified per language.
///
/// Each language's utterances are shuffled (deterministically from `seed`)
/// and the first `round(n * train_fraction)` go to train, clamped so both
/// splits keep at least one utterance.
pub fn split_corpus(
    manifest: &CorpusManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<CorpusManifest, CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadTrainFraction(train_fraction));
    }
    let mut by_language: HashMap<&LanguageId, Vec<usize>> = HashMap::new();
    for (idx, utt) in manifest.utterances.iter().enumerate() {
        by_language.entry(&utt.language_id).or_default().push(idx);
    }

    let mut splits: Vec<Split> = vec![Split::Train; manifest.utterances.len()];
    // Iterate languages in declaration order so the assignment is
    // reproducible regardless of hash-map iteration.
    for lang in &manifest.languages {
        let Some(indices) = by_language.get(&lang.id) else {
            continue;
        };
        let n = indices.len();
        if n < 2 {
            return Err(CorpusError::TooFewUtterances(lang.id.clone(), n));
        }
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        let mut order = indices.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ stable_hash(lang.id.as_str()));
        order.shuffle(&mut rng);
        for (rank, &utt_idx) in order.iter().enumerate() {
            splits[utt_idx] = if rank < n_train {
                Split::Train
            } else {
                Split::Test
            };
        }
    }

    let utterances = manifest
        .utterances
        .iter()
        .enumerate()
        .map(|(idx, utt)| UtteranceEntry {
            language_id: utt.language_id.clone(),
            path: utt.path.clone(),
            split: splits[idx],
        })
        .collect();

    Ok(CorpusManifest {
        languages: manifest.languages.clone(),
        utterances,
        sample_rate: manifest.sample_rate,
    })
}

/// FNV-1a, used to derive independent per-language RNG streams from one seed.
pub(crate) fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
