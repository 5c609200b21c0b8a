//! Deterministic synthetic multilingual corpus.
//!
//! Every synthetic language is an audio "dialect": three formant-like
//! sinusoid center frequencies plus filtered noise. The frequencies are a
//! linear function of the language's planted position along the equator, so
//! the Euclidean distance between two languages' parameter vectors grows
//! monotonically with their great-circle distance, and co-located languages
//! share identical parameters. Everything (placement, audio, splits, planted
//! families, phoneme inventories) is a pure function of the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{
    split_corpus, stable_hash, wav, CorpusError, CorpusManifest, LanguageId, LanguageRecord, Split,
    TreeSource, UtteranceEntry, DEFAULT_SAMPLE_RATE,
};
use crate::geodesy::EARTH_RADIUS_KM;

/// Planted geography: where the synthetic languages sit on the equator.
#[derive(Debug, Clone, PartialEq)]
pub enum GeoLayout {
    /// Languages at 0, spacing, 2*spacing, ... kilometers along the equator.
    /// A spacing of zero co-locates every language.
    Line { spacing_km: f64 },
    /// `count` contiguous clusters of languages. Cluster centers are
    /// `separation_km` apart; within a cluster, languages are `spread_km`
    /// apart.
    Clusters {
        count: usize,
        spread_km: f64,
        separation_km: f64,
    },
}

impl Default for GeoLayout {
    fn default() -> Self {
        GeoLayout::Line { spacing_km: 500.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_languages: usize,
    pub utterances_per_language: usize,
    pub seed: u64,
    pub layout: GeoLayout,
    pub sample_rate: u32,
    pub train_fraction: f64,
    /// Consecutive languages per planted family under the `Line` layout.
    /// Under `Clusters`, each cluster is one family.
    pub family_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_languages: 10,
            utterances_per_language: 20,
            seed: 0,
            layout: GeoLayout::default(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            train_fraction: 0.9,
            family_size: 5,
        }
    }
}

/// The acoustic parameters of one synthetic language, exposed so tests can
/// inspect the planted structure directly.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageRecipe {
    pub id: LanguageId,
    /// Kilometers along the equator from the layout origin.
    pub position_km: f64,
    /// Formant-like sinusoid center frequencies in Hz, low to high.
    pub formants: [f64; 3],
    /// Index of the planted family this language belongs to.
    pub family: usize,
}

const FORMANT_BASE: [f64; 3] = [400.0, 1200.0, 2400.0];
const FORMANT_SLOPE_HZ_PER_KM: [f64; 3] = [0.22, 0.40, 0.65];
const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// IPA-ish symbols used to plant phoneme inventories. Neighbors in position
/// receive overlapping windows of this list.
const PHONEME_UNIVERSE: [&str; 40] = [
    "p", "b", "t", "d", "k", "g", "ʔ", "m", "n", "ŋ", "f", "v", "s", "z", "ʃ", "ʒ", "x", "h", "tʃ",
    "dʒ", "l", "r", "ɾ", "w", "j", "i", "e", "ɛ", "a", "ɑ", "ɔ", "o", "u", "ə", "ɨ", "y", "ĩ", "ã",
    "õ", "ũ",
];
const INVENTORY_SIZE: usize = 12;

/// Positions (km along the equator) for each language under the layout.
pub fn layout_positions(layout: &GeoLayout, n_languages: usize) -> Vec<f64> {
    match layout {
        GeoLayout::Line { spacing_km } => (0..n_languages).map(|i| i as f64 * spacing_km).collect(),
        GeoLayout::Clusters {
            count,
            spread_km,
            separation_km,
        } => {
            let count = (*count).max(1);
            let per = n_languages.div_ceil(count);
            (0..n_languages)
                .map(|i| {
                    let cluster = i / per;
                    let within = i % per;
                    cluster as f64 * separation_km + within as f64 * spread_km
                })
                .collect()
        }
    }
}

fn family_of(layout: &GeoLayout, family_size: usize, n_languages: usize, i: usize) -> usize {
    match layout {
        GeoLayout::Line { .. } => i / family_size.max(1),
        GeoLayout::Clusters { count, .. } => {
            let per = n_languages.div_ceil((*count).max(1));
            i / per
        }
    }
}

/// The planted per-language parameters, a pure function of the config.
pub fn language_recipes(cfg: &SynthConfig) -> Result<Vec<LanguageRecipe>, CorpusError> {
    if cfg.n_languages < 2 {
        return Err(CorpusError::TooFewLanguages(cfg.n_languages));
    }
    if cfg.utterances_per_language < 4 {
        return Err(CorpusError::TooFewSynthUtterances(
            cfg.utterances_per_language,
        ));
    }
    let positions = layout_positions(&cfg.layout, cfg.n_languages);
    let band_limit = 0.45 * f64::from(cfg.sample_rate);
    positions
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut formants = [0.0; 3];
            for (k, f) in formants.iter_mut().enumerate() {
                *f = FORMANT_BASE[k] + FORMANT_SLOPE_HZ_PER_KM[k] * t;
                if *f >= band_limit {
                    return Err(CorpusError::FormantOutOfBand(*f, cfg.sample_rate));
                }
            }
            Ok(LanguageRecipe {
                id: LanguageId::new(&format!("L{i:05}"))?,
                position_km: t,
                formants,
                family: family_of(&cfg.layout, cfg.family_size, cfg.n_languages, i),
            })
        })
        .collect()
}

fn language_record(recipe: &LanguageRecipe, within_family_index: usize) -> LanguageRecord {
    let fam = recipe.family;
    let group = within_family_index / 2;
    let mut classifications = BTreeMap::new();
    // Three source styles of differing depth, mirroring how the real
    // taxonomies disagree on granularity.
    classifications.insert(
        TreeSource::Ethnologue,
        vec![format!("Family{fam:02}"), format!("Group{fam:02}-{group}")],
    );
    classifications.insert(TreeSource::Wikipedia, vec![format!("Family{fam:02}")]);
    classifications.insert(
        TreeSource::Glottolog,
        vec![
            format!("Family{fam:02}"),
            format!("Group{fam:02}-{group}"),
            format!("Sub{fam:02}-{within_family_index}"),
        ],
    );
    LanguageRecord {
        id: recipe.id.clone(),
        name: format!(
            "Synthetic {:03}",
            recipe
                .id
                .as_str()
                .trim_start_matches('L')
                .trim_start_matches('0')
                .parse::<usize>()
                .unwrap_or(0)
        ),
        lat: 0.0,
        lon: recipe.position_km / KM_PER_DEG,
        classifications,
        phonemes: Some(planted_inventory(recipe)),
    }
}

fn planted_inventory(recipe: &LanguageRecipe) -> BTreeSet<String> {
    // Window over the shared symbol list slides with position: ~1 symbol per
    // 350 km, so nearby languages share most of their inventory.
    let start = ((recipe.position_km / 350.0).round() as usize)
        .min(PHONEME_UNIVERSE.len() - INVENTORY_SIZE);
    PHONEME_UNIVERSE[start..start + INVENTORY_SIZE]
        .iter()
        .map(|s| (*s).to_owned())
        .collect()
}

/// Synthesize one utterance. Pure in (config seed, language, index).
pub fn synth_utterance(recipe: &LanguageRecipe, cfg: &SynthConfig, utt_index: usize) -> Vec<f64> {
    let stream = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ stable_hash(recipe.id.as_str())
        ^ (utt_index as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    let mut rng = ChaCha20Rng::seed_from_u64(stream);

    let rate = f64::from(cfg.sample_rate);
    let duration_s = 0.5 + 0.3 * rng.random::<f64>();
    let n = (duration_s * rate).round() as usize;

    let mut components = Vec::with_capacity(3);
    for &f in &recipe.formants {
        let jitter = 1.0 + 0.004 * (rng.random::<f64>() - 0.5);
        let amp = 0.6 + 0.4 * rng.random::<f64>();
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        components.push((f * jitter, amp, phase));
    }

    let mut samples = Vec::with_capacity(n);
    let mut noise_state = 0.0_f64;
    for i in 0..n {
        let t = i as f64 / rate;
        let mut s = 0.0;
        for &(f, amp, phase) in &components {
            s += amp * (std::f64::consts::TAU * f * t + phase).sin();
        }
        // Leaky-integrated white noise: energy tilted toward low frequencies.
        noise_state = 0.95 * noise_state + (rng.random::<f64>() - 0.5);
        s += 0.25 * noise_state;
        samples.push(s);
    }

    let peak = samples
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()))
        .max(1e-12);
    let scale = 0.6 / peak;
    for s in &mut samples {
        *s *= scale;
    }
    samples
}

/// Generate the corpus under `out_dir`: WAV files in `audio/<id>/`, the
/// manifest at `manifest.tsv`, and planted phoneme inventories at
/// `phonemes.tsv`. Returns the written manifest.
pub fn generate_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<CorpusManifest, CorpusError> {
    let recipes = language_recipes(cfg)?;
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| CorpusError::Io {
            path: path.clone(),
            source,
        }
    };

    let mut languages = Vec::with_capacity(recipes.len());
    let mut utterances = Vec::new();
    let mut family_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for recipe in &recipes {
        let within = family_counts.entry(recipe.family).or_insert(0);
        languages.push(language_record(recipe, *within));
        *within += 1;

        let lang_dir = out_dir.join("audio").join(recipe.id.as_str());
        std::fs::create_dir_all(&lang_dir).map_err(io_err(&lang_dir))?;
        for u in 0..cfg.utterances_per_language {
            let rel = format!("audio/{}/utt{u:03}.wav", recipe.id);
            let samples = synth_utterance(recipe, cfg, u);
            wav::write_wav(&out_dir.join(&rel), &samples, cfg.sample_rate)?;
            utterances.push(UtteranceEntry {
                language_id: recipe.id.clone(),
                path: rel,
                split: Split::Train,
            });
        }
    }

    let manifest = CorpusManifest {
        languages,
        utterances,
        sample_rate: cfg.sample_rate,
    };
    let manifest = split_corpus(&manifest, cfg.train_fraction, cfg.seed)?;
    manifest.validate()?;

    let manifest_path = out_dir.join("manifest.tsv");
    std::fs::write(&manifest_path, manifest.to_manifest_string())
        .map_err(io_err(&manifest_path))?;

    let mut phonemes = String::new();
    for lang in &manifest.languages {
        if let Some(inv) = &lang.phonemes {
            phonemes.push_str(lang.id.as_str());
            for p in inv {
                phonemes.push('\t');
                phonemes.push_str(p);
            }
            phonemes.push('\n');
        }
    }
    let phonemes_path = out_dir.join("phonemes.tsv");
    std::fs::write(&phonemes_path, phonemes).map_err(io_err(&phonemes_path))?;

    Ok(manifest)
}
