//! Regenerates the checked-in fuzz corpus seeds from the real serializers:
//!
//! ```text
//! cargo test -p atlas --test gen_fuzz_seeds -- --ignored
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use lingua_atlas::corpus::synth::{synth_utterance, LanguageRecipe, SynthConfig};
use lingua_atlas::corpus::{wav, LanguageId, LanguageRecord, Split, TreeSource, UtteranceEntry};
use lingua_atlas::dsp::MelSpectrogram;
use lingua_atlas::model::{checkpoint_to_bytes, Checkpoint, ClassifierConfig, ClassifierState};

fn corpus_dir(target: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
#[ignore = "writes into fuzz/corpus; run explicitly to refresh seeds"]
fn generate_seeds() {
    // Manifest: two languages, two sources, four utterances.
    let mut classifications = BTreeMap::new();
    classifications.insert(
        TreeSource::Ethnologue,
        vec!["Cariban".to_owned(), "Guianan".to_owned()],
    );
    classifications.insert(TreeSource::Wikipedia, vec!["Cariban".to_owned()]);
    let lang_a = LanguageRecord {
        id: LanguageId::new("AAAAAA").unwrap(),
        name: "Alpha".to_owned(),
        lat: 1.5,
        lon: -3.25,
        classifications,
        phonemes: None,
    };
    let mut classifications = BTreeMap::new();
    classifications.insert(TreeSource::Ethnologue, vec!["Otomanguean".to_owned()]);
    let lang_b = LanguageRecord {
        id: LanguageId::new("BBBBBB").unwrap(),
        name: "Beta".to_owned(),
        lat: -10.0,
        lon: 20.0,
        classifications,
        phonemes: None,
    };
    let manifest = lingua_atlas::corpus::CorpusManifest {
        utterances: [
            ("AAAAAA", "train"),
            ("AAAAAA", "test"),
            ("BBBBBB", "train"),
            ("BBBBBB", "test"),
        ]
        .iter()
        .enumerate()
        .map(|(i, (id, split))| UtteranceEntry {
            language_id: LanguageId::new(id).unwrap(),
            path: format!("audio/{id}/utt{i:03}.wav"),
            split: Split::parse(split).unwrap(),
        })
        .collect(),
        languages: vec![lang_a, lang_b],
        sample_rate: 16_000,
    };
    std::fs::write(
        corpus_dir("fuzz_manifest").join("seed_manifest"),
        manifest.to_manifest_string(),
    )
    .unwrap();

    for (name, text) in [
        ("seed_deep", "Cariban, Guianan, Macro-Tupi"),
        ("seed_single", "Otomanguean"),
    ] {
        std::fs::write(corpus_dir("fuzz_classification").join(name), text).unwrap();
    }

    // A short valid mono 16-bit wav.
    let recipe = LanguageRecipe {
        id: LanguageId::new("AAAAAA").unwrap(),
        position_km: 0.0,
        formants: [400.0, 1200.0, 2400.0],
        family: 0,
    };
    let cfg = SynthConfig {
        sample_rate: 8_000,
        ..SynthConfig::default()
    };
    let samples = synth_utterance(&recipe, &cfg, 0);
    let wav_path = corpus_dir("fuzz_wav").join("seed_tone.wav");
    wav::write_wav(&wav_path, &samples[..1024.min(samples.len())], 8_000).unwrap();

    // Feature cache for a 3x4 toy spectrogram.
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|t| (0..4).map(|b| (t * 4 + b) as f64 * 0.25 - 1.0).collect())
        .collect();
    let spec = MelSpectrogram::from_rows(rows, 0.01).unwrap();
    lingua_atlas::dsp::write_mel(&spec, &corpus_dir("fuzz_mel_cache").join("seed_small.mel"))
        .unwrap();

    // Tiny but complete checkpoint.
    let ckpt_cfg = ClassifierConfig {
        input_dim: 2,
        hidden_dim: 2,
        embed_dim: 2,
        seed: 1,
        ..ClassifierConfig::new(2)
    };
    let ckpt = Checkpoint {
        state: ClassifierState::init(&ckpt_cfg).unwrap(),
        class_ids: vec![
            LanguageId::new("AAAAAA").unwrap(),
            LanguageId::new("BBBBBB").unwrap(),
        ],
    };
    std::fs::write(
        corpus_dir("fuzz_checkpoint").join("seed_tiny.ckpt"),
        checkpoint_to_bytes(&ckpt),
    )
    .unwrap();

    let mut table = lingua_atlas::embed::EmbeddingTable::new(3, "seed".to_owned());
    table.insert(LanguageId::new("AAAAAA").unwrap(), vec![0.25, -1.5, 3.0]);
    table.insert(
        LanguageId::new("BBBBBB").unwrap(),
        vec![1.0 / 3.0, 0.0, -2.0],
    );
    std::fs::write(
        corpus_dir("fuzz_embeddings").join("seed_table.emb"),
        lingua_atlas::embed::embeddings_to_string(&table),
    )
    .unwrap();

    std::fs::write(
        corpus_dir("fuzz_phonemes").join("seed_inventories"),
        "AAAAAA\tp\tt\tk\ta\ti\tu\nBBBBBB\tp\tt\ts\t\u{014b}\te\to\n",
    )
    .unwrap();

    std::fs::write(
        corpus_dir("fuzz_pairs").join("seed_pairs"),
        "emb\t1\tAAAAAA\tBBBBBB\taudio/AAAAAA\taudio/BBBBBB\n\
         geo\t5\tBBBBBB\tAAAAAA\taudio/BBBBBB\taudio/AAAAAA\n",
    )
    .unwrap();

    std::fs::write(
        corpus_dir("fuzz_pipeline_config").join("seed_config"),
        "lingua-atlas-pipeline v1\nworkdir\tout/run\nlangs\t6\nutts\t6\nseed\t3\n\
         layout\tclusters\nclusters\t2\nspread-km\t100\nseparation-km\t3000\n\
         hidden\t16\nembed-dim\t8\nmax-epochs\t4\nk-list\t1,2,4\n",
    )
    .unwrap();
}
