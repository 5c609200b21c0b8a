//! Declarative full-chain runs: one config file drives corpus generation,
//! featurization, training, embedding extraction, and all three metric
//! reports.
//!
//! The config uses the same line-oriented style as the manifest:
//!
//! ```text
//! lingua-atlas-pipeline v1
//! workdir<TAB>out/run1
//! langs<TAB>10
//! seed<TAB>7
//! ...
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lingua_atlas::corpus::synth::{GeoLayout, SynthConfig};
use lingua_atlas::corpus::TreeSource;
use lingua_atlas::dsp::MelConfig;
use lingua_atlas::model::ClassifierConfig;

pub const HEADER: &str = "lingua-atlas-pipeline v1";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    pub langs: usize,
    pub utts: usize,
    pub seed: u64,
    pub layout: GeoLayout,
    pub sample_rate: u32,
    pub train_frac: f64,
    pub family_size: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau: usize,
    pub mel: MelConfig,
    pub radius_km: f64,
    pub source: TreeSource,
    pub k_list: Vec<usize>,
    pub top: usize,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first == HEADER => {}
            Some((_, first)) => bail!("line 1: expected header {HEADER:?}, got {first:?}"),
            None => bail!("empty pipeline config"),
        }

        let mut workdir: Option<PathBuf> = None;
        let mut cfg = Self {
            workdir: PathBuf::new(),
            langs: 10,
            utts: 20,
            seed: 0,
            layout: GeoLayout::Line { spacing_km: 500.0 },
            sample_rate: 16_000,
            train_frac: 0.9,
            family_size: 5,
            hidden: 256,
            embed_dim: 64,
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 100,
            plateau: 5,
            mel: MelConfig::default(),
            radius_km: 500.0,
            source: TreeSource::Ethnologue,
            k_list: vec![2, 4, 8, 16, 32, 64],
            top: 5,
        };
        let mut layout_name = "line".to_owned();
        let mut spacing_km = 500.0;
        let mut clusters = 2usize;
        let mut spread_km = 100.0;
        let mut separation_km = 3000.0;

        for (idx, raw) in lines {
            let line_no = idx + 1;
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (key, value) = raw
                .split_once('\t')
                .with_context(|| format!("line {line_no}: expected key<TAB>value"))?;
            let ctx = || format!("line {line_no}: bad value for {key}");
            match key {
                "workdir" => workdir = Some(PathBuf::from(value)),
                "langs" => cfg.langs = value.parse().with_context(ctx)?,
                "utts" => cfg.utts = value.parse().with_context(ctx)?,
                "seed" => cfg.seed = value.parse().with_context(ctx)?,
                "layout" => layout_name = value.to_owned(),
                "spacing-km" => spacing_km = parse_f64(value).with_context(ctx)?,
                "clusters" => clusters = value.parse().with_context(ctx)?,
                "spread-km" => spread_km = parse_f64(value).with_context(ctx)?,
                "separation-km" => separation_km = parse_f64(value).with_context(ctx)?,
                "sample-rate" => cfg.sample_rate = value.parse().with_context(ctx)?,
                "train-frac" => cfg.train_frac = parse_f64(value).with_context(ctx)?,
                "family-size" => cfg.family_size = value.parse().with_context(ctx)?,
                "hidden" => cfg.hidden = value.parse().with_context(ctx)?,
                "embed-dim" => cfg.embed_dim = value.parse().with_context(ctx)?,
                "lr" => cfg.learning_rate = parse_f64(value).with_context(ctx)?,
                "batch-size" => cfg.batch_size = value.parse().with_context(ctx)?,
                "max-epochs" => cfg.max_epochs = value.parse().with_context(ctx)?,
                "plateau" => cfg.plateau = value.parse().with_context(ctx)?,
                "window-s" => cfg.mel.window_s = parse_f64(value).with_context(ctx)?,
                "hop-s" => cfg.mel.hop_s = parse_f64(value).with_context(ctx)?,
                "fft-size" => cfg.mel.fft_size = value.parse().with_context(ctx)?,
                "fmin-hz" => cfg.mel.fmin_hz = parse_f64(value).with_context(ctx)?,
                "fmax-hz" => cfg.mel.fmax_hz = parse_f64(value).with_context(ctx)?,
                "radius-km" => cfg.radius_km = parse_f64(value).with_context(ctx)?,
                "source" => {
                    cfg.source = TreeSource::parse(value)
                        .with_context(|| format!("line {line_no}: unknown tree source {value:?}"))?
                }
                "k-list" => {
                    let ks: Result<Vec<usize>, _> = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect();
                    cfg.k_list = ks.with_context(ctx)?;
                    if cfg.k_list.is_empty() {
                        bail!("line {line_no}: k-list must be non-empty");
                    }
                }
                "top" => cfg.top = value.parse().with_context(ctx)?,
                other => bail!("line {line_no}: unknown key {other:?}"),
            }
        }

        cfg.workdir = workdir.context("pipeline config is missing the workdir key")?;
        cfg.layout = match layout_name.as_str() {
            "line" => GeoLayout::Line { spacing_km },
            "clusters" => GeoLayout::Clusters {
                count: clusters,
                spread_km,
                separation_km,
            },
            other => bail!("unknown layout {other:?} (expected line or clusters)"),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_languages: self.langs,
            utterances_per_language: self.utts,
            seed: self.seed,
            layout: self.layout.clone(),
            sample_rate: self.sample_rate,
            train_fraction: self.train_frac,
            family_size: self.family_size,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            hidden_dim: self.hidden,
            embed_dim: self.embed_dim,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            plateau_epochs: self.plateau,
            seed: self.seed,
            ..ClassifierConfig::new(self.langs)
        }
    }
}

/// Run the whole chain, returning the concatenated report text. Artifacts
/// land under the workdir: `corpus/`, `features/`, `model.ckpt`,
/// `embeddings.emb`.
pub fn run(cfg: &PipelineConfig, threads: usize) -> Result<String> {
    use lingua_atlas::corpus::synth::generate_corpus;
    use lingua_atlas::embed::{
        embedding_distances, extract_embeddings, write_embeddings, EmbeddingKind,
    };
    use lingua_atlas::familytree::{build_forest, tree_metric};
    use lingua_atlas::geodesy::{correlation_metric, geo_distance_matrix};
    use lingua_atlas::model::{train, write_checkpoint, FeaturizedCorpus};
    use lingua_atlas::similarity::outlier_report;

    let corpus_dir = cfg.workdir.join("corpus");
    let features_dir = cfg.workdir.join("features");
    std::fs::create_dir_all(&corpus_dir)
        .with_context(|| format!("creating {}", corpus_dir.display()))?;

    crate::logging::info(format!(
        "generating {} languages x {} utterances under {}",
        cfg.langs,
        cfg.utts,
        corpus_dir.display()
    ));
    let manifest = generate_corpus(&cfg.synth_config(), &corpus_dir)?;

    crate::logging::info("featurizing");
    crate::commands::featurize_manifest(&manifest, &corpus_dir, &features_dir, &cfg.mel, threads)?;

    crate::logging::info("training");
    let corpus = FeaturizedCorpus::load(&manifest, &features_dir)?;
    let outcome = train(&cfg.classifier_config(), &corpus, None)?;

    let mut out = String::new();
    writeln!(out, "# train")?;
    for e in &outcome.history {
        writeln!(
            out,
            "{}\t{}\t{}",
            e.epoch,
            crate::report::fmt_sig(e.train_loss),
            crate::report::fmt_sig(e.test_accuracy)
        )?;
    }

    let checkpoint = outcome.into_checkpoint();
    let ckpt_path = cfg.workdir.join("model.ckpt");
    write_checkpoint(&checkpoint, &ckpt_path)?;

    let table = extract_embeddings(&checkpoint, &corpus, EmbeddingKind::PreActivation)?;
    let emb_path = cfg.workdir.join("embeddings.emb");
    write_embeddings(&table, &emb_path)?;

    let emb = embedding_distances(&table)?;
    let geo = geo_distance_matrix(&manifest.languages)?;

    writeln!(out, "# metric-geo global")?;
    out.push_str(&crate::report::correlation(&correlation_metric(
        &emb, &geo, None,
    )?));
    writeln!(
        out,
        "# metric-geo local radius={}",
        crate::report::fmt_sig(cfg.radius_km)
    )?;
    out.push_str(&crate::report::correlation(&correlation_metric(
        &emb,
        &geo,
        Some(cfg.radius_km),
    )?));

    let forest = build_forest(&manifest.languages, cfg.source)?;
    let usable_k: Vec<usize> = cfg
        .k_list
        .iter()
        .copied()
        .filter(|&k| (1..cfg.langs).contains(&k))
        .collect();
    writeln!(out, "# metric-tree source={}", cfg.source)?;
    if usable_k.is_empty() {
        writeln!(out, "n_eligible\t0")?;
    } else {
        out.push_str(&crate::report::tree_metric(&tree_metric(
            &forest, &emb, &usable_k,
        )?));
    }

    writeln!(
        out,
        "# outliers radius={}",
        crate::report::fmt_sig(cfg.radius_km)
    )?;
    out.push_str(&crate::report::outliers(
        &outlier_report(&emb, &geo, &forest, cfg.radius_km)?,
        cfg.top,
    ));

    Ok(out)
}

fn parse_f64(value: &str) -> Result<f64> {
    let v: f64 = value.parse()?;
    if !v.is_finite() {
        bail!("value must be finite");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_config() {
        let cfg = PipelineConfig::parse(
            "lingua-atlas-pipeline v1\nworkdir\tout/x\nlangs\t6\nseed\t3\nhidden\t16\n",
        )
        .unwrap();
        assert_eq!(cfg.workdir, PathBuf::from("out/x"));
        assert_eq!(cfg.langs, 6);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.hidden, 16);
        assert_eq!(cfg.embed_dim, 64);
    }

    #[test]
    fn parses_cluster_layout_and_k_list() {
        let cfg = PipelineConfig::parse(
            "lingua-atlas-pipeline v1\nworkdir\tw\nlayout\tclusters\nclusters\t3\n\
             spread-km\t50\nseparation-km\t4000\nk-list\t1, 2, 4\n",
        )
        .unwrap();
        assert_eq!(
            cfg.layout,
            GeoLayout::Clusters {
                count: 3,
                spread_km: 50.0,
                separation_km: 4000.0
            }
        );
        assert_eq!(cfg.k_list, vec![1, 2, 4]);
    }

    #[test]
    fn rejects_malformed_configs() {
        assert!(PipelineConfig::parse("").is_err());
        assert!(PipelineConfig::parse("wrong header\n").is_err());
        assert!(PipelineConfig::parse("lingua-atlas-pipeline v1\nlangs\t6\n").is_err());
        assert!(PipelineConfig::parse("lingua-atlas-pipeline v1\nworkdir\tw\nnope\t1\n").is_err());
        assert!(
            PipelineConfig::parse("lingua-atlas-pipeline v1\nworkdir\tw\nlangs\tmany\n").is_err()
        );
        assert!(
            PipelineConfig::parse("lingua-atlas-pipeline v1\nworkdir\tw\nlayout\thex\n").is_err()
        );
        assert!(PipelineConfig::parse("lingua-atlas-pipeline v1\nworkdir\tw\nk-list\t\n").is_err());
    }
}
