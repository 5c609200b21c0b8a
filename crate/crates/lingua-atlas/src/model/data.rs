//! Featurized view of a corpus: per-utterance spectrograms labeled with
//! class indices, where class order is the lexicographic language order.

use std::path::Path;

use super::ModelError;
use crate::corpus::{wav, CorpusManifest, LanguageId, Split, Utterance};
use crate::dsp::{self, MelConfig, MelSpectrogram};

#[derive(Debug, Clone)]
pub struct FeaturizedCorpus {
    /// Languages sorted lexicographically; position = class index.
    pub class_ids: Vec<LanguageId>,
    pub train: Vec<(usize, MelSpectrogram)>,
    pub test: Vec<(usize, MelSpectrogram)>,
}

impl FeaturizedCorpus {
    pub fn class_index(&self, id: &LanguageId) -> Option<usize> {
        self.class_ids.binary_search(id).ok()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    fn build(
        manifest: &CorpusManifest,
        mut load: impl FnMut(&str) -> Result<MelSpectrogram, ModelError>,
    ) -> Result<Self, ModelError> {
        let mut class_ids: Vec<LanguageId> =
            manifest.languages.iter().map(|l| l.id.clone()).collect();
        class_ids.sort();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for entry in &manifest.utterances {
            let class = class_ids.binary_search(&entry.language_id).map_err(|_| {
                crate::corpus::CorpusError::UnknownLanguage(entry.language_id.clone())
            })?;
            let mut spec = load(&entry.path)?;
            spec.language_id = Some(entry.language_id.clone());
            match entry.split {
                Split::Train => train.push((class, spec)),
                Split::Test => test.push((class, spec)),
            }
        }
        Ok(Self {
            class_ids,
            train,
            test,
        })
    }

    /// Read cached features: `<features_dir>/<wav path with .mel extension>`.
    pub fn load(manifest: &CorpusManifest, features_dir: &Path) -> Result<Self, ModelError> {
        Self::build(manifest, |rel| {
            let path = features_dir.join(Path::new(rel).with_extension("mel"));
            Ok(dsp::read_mel(&path)?)
        })
    }

    /// Compute features directly from the WAV files under `audio_root`.
    /// Every file must share one sample rate.
    pub fn compute(
        manifest: &CorpusManifest,
        audio_root: &Path,
        mel_cfg: &MelConfig,
    ) -> Result<Self, ModelError> {
        let mut corpus_rate: Option<u32> = None;
        Self::build(manifest, |rel| {
            let (samples, rate) = wav::read_wav(&audio_root.join(rel))?;
            match corpus_rate {
                None => corpus_rate = Some(rate),
                Some(expected) if expected != rate => {
                    return Err(ModelError::Corpus(crate::corpus::CorpusError::Wav {
                        path: rel.to_owned(),
                        message: format!("sample rate {rate} differs from corpus rate {expected}"),
                    }))
                }
                Some(_) => {}
            }
            let utt = Utterance {
                language_id: LanguageId::new("AAAAAA").unwrap(),
                samples,
                sample_rate: rate,
                split: Split::Train,
            };
            Ok(dsp::melspec(&utt, mel_cfg)?)
        })
    }
}
