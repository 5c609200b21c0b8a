//! Subcommand implementations. Reports print to stdout; artifacts go to the
//! paths named by `--out` flags. No subcommand mutates its inputs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lingua_atlas::corpus::{
    self, load_manifest, synth, wav, CorpusManifest, LanguageId, Split, TreeSource, Utterance,
};
use lingua_atlas::dsp::{self, MelConfig};
use lingua_atlas::embed::{
    embedding_distances, extract_embeddings, nearest_neighbors, read_embeddings, write_embeddings,
    DistanceMatrix, EmbeddingKind,
};
use lingua_atlas::familytree::{build_forest, tree_metric};
use lingua_atlas::geodesy::{correlation_metric, geo_distance_matrix};
use lingua_atlas::model::{
    evaluate, read_checkpoint, train, write_checkpoint, ClassifierConfig, FeaturizedCorpus,
};
use lingua_atlas::similarity::{
    outlier_report, parse_pairs, parse_phoneme_inventories, phoneme_distance_matrix,
    select_neighbor, zero_shot_report, NeighborMethod, ZeroShotConfig,
};

use crate::cli::*;
use crate::logging;
use crate::report::{self, fmt_sig};

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Split(args) => split(args),
        Command::Featurize(args) => featurize(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Embed(args) => run_embed(args),
        Command::Knn(args) => knn(args),
        Command::Metric(MetricCommand::Geo(args)) => metric_geo(args),
        Command::Metric(MetricCommand::Tree(args)) => metric_tree(args),
        Command::Outliers(args) => outliers(args),
        Command::Neighbor(args) => neighbor(args),
        Command::McdReport(args) => mcd_report(args),
        Command::Pipeline(args) => pipeline(args),
    }
}

impl MelArgs {
    fn to_config(&self) -> MelConfig {
        MelConfig {
            window_s: self.window,
            hop_s: self.hop,
            fft_size: self.fft_size,
            fmin_hz: self.fmin,
            fmax_hz: self.fmax,
        }
    }
}

fn parse_lang(s: &str) -> Result<LanguageId> {
    LanguageId::new(s).map_err(Into::into)
}

fn parse_source(s: &str) -> Result<TreeSource> {
    TreeSource::parse(s)
        .with_context(|| format!("unknown tree source {s:?} (ethnologue|wikipedia|glottolog)"))
}

fn gen_corpus(args: GenCorpusArgs) -> Result<()> {
    let layout = match args.layout.as_str() {
        "line" => synth::GeoLayout::Line {
            spacing_km: args.spacing_km,
        },
        "clusters" => synth::GeoLayout::Clusters {
            count: args.clusters,
            spread_km: args.spread_km,
            separation_km: args.separation_km,
        },
        other => bail!("unknown layout {other:?} (expected line or clusters)"),
    };
    let cfg = synth::SynthConfig {
        n_languages: args.langs,
        utterances_per_language: args.utts,
        seed: args.seed,
        layout,
        sample_rate: args.sample_rate,
        train_fraction: args.train_frac,
        family_size: args.family_size,
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = synth::generate_corpus(&cfg, &args.out)?;
    logging::info(format!("corpus written under {}", args.out.display()));
    print!(
        "languages\t{}\nutterances\t{}\nsample_rate\t{}\n",
        manifest.languages.len(),
        manifest.utterances.len(),
        manifest.sample_rate
    );
    Ok(())
}

fn split(args: SplitArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let resplit = corpus::split_corpus(&manifest, args.train_frac, args.seed)?;
    match args.out {
        Some(out) => {
            corpus::write_manifest(&resplit, &out)?;
            for lang in &resplit.languages {
                let train = resplit
                    .utterances
                    .iter()
                    .filter(|u| u.language_id == lang.id && u.split == Split::Train)
                    .count();
                let test = resplit
                    .utterances
                    .iter()
                    .filter(|u| u.language_id == lang.id && u.split == Split::Test)
                    .count();
                println!("{}\t{train}\t{test}", lang.id);
            }
        }
        None => print!("{}", resplit.to_manifest_string()),
    }
    Ok(())
}

/// Featurize every utterance of `manifest`, mirroring the wav layout under
/// `out` with a `.mel` extension. Utterances are processed in parallel when
/// `threads > 1`; each output file is written by exactly one worker.
pub fn featurize_manifest(
    manifest: &CorpusManifest,
    audio_root: &Path,
    out: &Path,
    mel: &MelConfig,
    threads: usize,
) -> Result<usize> {
    let entries = &manifest.utterances;
    let one = |entry: &corpus::UtteranceEntry| -> Result<usize> {
        let (samples, sample_rate) = wav::read_wav(&audio_root.join(&entry.path))?;
        let utt = Utterance {
            language_id: entry.language_id.clone(),
            samples,
            sample_rate,
            split: entry.split,
        };
        let spec = dsp::melspec(&utt, mel)?;
        let dest = out.join(Path::new(&entry.path).with_extension("mel"));
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        dsp::write_mel(&spec, &dest)?;
        Ok(spec.n_frames())
    };

    let frame_counts: Vec<Result<usize>> = if threads <= 1 || entries.len() <= 1 {
        entries.iter().map(one).collect()
    } else {
        let workers = threads.min(entries.len());
        let chunk = entries.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = entries
                .chunks(chunk)
                .map(|chunk| scope.spawn(move || chunk.iter().map(one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("featurize worker panicked"))
                .collect()
        })
    };
    let mut total = 0usize;
    for frames in frame_counts {
        total += frames?;
    }
    Ok(total)
}

fn featurize(args: FeaturizeArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let audio_root = args.audio_root.clone().unwrap_or_else(|| {
        args.manifest
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf()
    });
    let mel = args.mel.to_config();
    logging::info(format!(
        "featurizing {} utterances from {}",
        manifest.utterances.len(),
        audio_root.display()
    ));
    let frames = featurize_manifest(&manifest, &audio_root, &args.out, &mel, args.threads)?;
    print!(
        "utterances\t{}\nframes_total\t{frames}\n",
        manifest.utterances.len()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let corpus = FeaturizedCorpus::load(&manifest, &args.features)?;
    let config = ClassifierConfig {
        hidden_dim: args.hidden,
        embed_dim: args.embed,
        learning_rate: args.lr,
        seed: args.seed,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        plateau_epochs: args.plateau,
        ..ClassifierConfig::new(manifest.languages.len())
    };
    logging::info(format!(
        "training on {} utterances ({} classes)",
        corpus.train.len(),
        corpus.n_classes()
    ));
    let outcome = train(&config, &corpus, Some(&args.out))?;
    for e in &outcome.history {
        println!(
            "{}\t{}\t{}",
            e.epoch,
            fmt_sig(e.train_loss),
            fmt_sig(e.test_accuracy)
        );
    }
    let checkpoint = outcome.into_checkpoint();
    write_checkpoint(&checkpoint, &args.out)?;
    logging::info(format!("checkpoint written to {}", args.out.display()));
    Ok(())
}

fn load_features(
    manifest: &CorpusManifest,
    manifest_path: &Path,
    features: Option<&Path>,
) -> Result<FeaturizedCorpus> {
    match features {
        Some(dir) => Ok(FeaturizedCorpus::load(manifest, dir)?),
        None => {
            let root = manifest_path.parent().unwrap_or(Path::new("."));
            logging::info("no feature cache given; computing features from audio");
            Ok(FeaturizedCorpus::compute(
                manifest,
                root,
                &MelConfig::default(),
            )?)
        }
    }
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let checkpoint = read_checkpoint(&args.ckpt)?;
    let manifest = load_manifest(&args.manifest)?;
    let corpus = load_features(&manifest, &args.manifest, args.features.as_deref())?;
    if corpus.class_ids != checkpoint.class_ids {
        bail!(
            "checkpoint was trained on a different language set ({} vs {} languages)",
            checkpoint.class_ids.len(),
            corpus.class_ids.len()
        );
    }
    let accuracy = evaluate(&checkpoint.state, &corpus.test)?;
    println!("accuracy\t{}", fmt_sig(accuracy));
    Ok(())
}

fn run_embed(args: EmbedArgs) -> Result<()> {
    let checkpoint = read_checkpoint(&args.ckpt)?;
    let manifest = load_manifest(&args.manifest)?;
    let corpus = FeaturizedCorpus::load(&manifest, &args.features)?;
    if corpus.class_ids != checkpoint.class_ids {
        bail!("checkpoint language set does not match the manifest");
    }
    let kind = if args.post_relu {
        EmbeddingKind::PostActivation
    } else {
        EmbeddingKind::PreActivation
    };
    let table = extract_embeddings(&checkpoint, &corpus, kind)?;
    write_embeddings(&table, &args.out)?;
    print!(
        "languages\t{}\nembed_dim\t{}\n",
        table.len(),
        table.embed_dim
    );
    Ok(())
}

fn knn(args: KnnArgs) -> Result<()> {
    let table = read_embeddings(&args.emb)?;
    let matrix = embedding_distances(&table)?;
    let id = parse_lang(&args.lang)?;
    let neighbors = nearest_neighbors(&matrix, &id, args.k)?;
    let query = matrix
        .index_of(&id)
        .expect("id checked by nearest_neighbors");
    for (rank, neighbor) in neighbors.iter().enumerate() {
        let j = matrix
            .index_of(neighbor)
            .expect("neighbor came from matrix");
        println!(
            "{}\t{}\t{}",
            rank + 1,
            neighbor,
            fmt_sig(matrix.get(query, j))
        );
    }
    Ok(())
}

/// Geographic matrix restricted to the ids present in the embedding table,
/// so the two matrices always line up.
fn geo_matrix_for(manifest: &CorpusManifest, emb: &DistanceMatrix) -> Result<DistanceMatrix> {
    let mut languages = Vec::new();
    for id in emb.ids() {
        let lang = manifest
            .language(id)
            .with_context(|| format!("language {id} is not in the manifest"))?;
        languages.push(lang.clone());
    }
    Ok(geo_distance_matrix(&languages)?)
}

fn metric_geo(args: MetricGeoArgs) -> Result<()> {
    let table = read_embeddings(&args.emb)?;
    let manifest = load_manifest(&args.manifest)?;
    let emb = embedding_distances(&table)?;
    let geo = geo_matrix_for(&manifest, &emb)?;
    let report = correlation_metric(&emb, &geo, args.radius_km)?;
    print!("{}", report::correlation(&report));
    Ok(())
}

fn metric_tree(args: MetricTreeArgs) -> Result<()> {
    let table = read_embeddings(&args.emb)?;
    let manifest = load_manifest(&args.manifest)?;
    let source = parse_source(&args.source)?;
    let emb = embedding_distances(&table)?;
    let languages: Vec<_> = emb
        .ids()
        .iter()
        .map(|id| {
            manifest
                .language(id)
                .cloned()
                .with_context(|| format!("language {id} is not in the manifest"))
        })
        .collect::<Result<_>>()?;
    let forest = build_forest(&languages, source)?;
    let k_values: Vec<usize> = args
        .k
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad k list {:?}", args.k))?;
    let report = tree_metric(&forest, &emb, &k_values)?;
    print!("{}", report::tree_metric(&report));
    Ok(())
}

fn outliers(args: OutliersArgs) -> Result<()> {
    let table = read_embeddings(&args.emb)?;
    let manifest = load_manifest(&args.manifest)?;
    let source = parse_source(&args.source)?;
    let emb = embedding_distances(&table)?;
    let geo = geo_matrix_for(&manifest, &emb)?;
    let languages: Vec<_> = emb
        .ids()
        .iter()
        .map(|id| {
            manifest
                .language(id)
                .cloned()
                .expect("checked by geo_matrix_for")
        })
        .collect();
    let forest = build_forest(&languages, source)?;
    let report = outlier_report(&emb, &geo, &forest, args.radius_km)?;
    print!("{}", report::outliers(&report, args.top));
    Ok(())
}

fn neighbor(args: NeighborArgs) -> Result<()> {
    let method = NeighborMethod::parse(&args.method)
        .with_context(|| format!("unknown method {:?} (emb|geo|ph)", args.method))?;
    let id = parse_lang(&args.lang)?;
    let matrix = match method {
        NeighborMethod::Embedding => {
            let emb = args.emb.context("--emb is required for the emb method")?;
            embedding_distances(&read_embeddings(&emb)?)?
        }
        NeighborMethod::Geographic => {
            let manifest_path = args
                .manifest
                .context("--manifest is required for the geo method")?;
            let manifest = load_manifest(&manifest_path)?;
            geo_distance_matrix(&manifest.languages)?
        }
        NeighborMethod::Phoneme => {
            let path = args
                .phonemes
                .context("--phonemes is required for the ph method")?;
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let inventories = parse_phoneme_inventories(&text)?;
            phoneme_distance_matrix(&inventories)?
        }
    };
    let neighbor = select_neighbor(&matrix, &id, args.k)?;
    let i = matrix
        .index_of(&id)
        .expect("query id resolved by select_neighbor");
    let j = matrix
        .index_of(&neighbor)
        .expect("selected id is in the matrix");
    println!("{}\t{}", neighbor, fmt_sig(matrix.get(i, j)));
    Ok(())
}

fn mcd_report(args: McdReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.pairs)
        .with_context(|| format!("reading {}", args.pairs.display()))?;
    let pairs = parse_pairs(&text)?;
    if pairs.is_empty() {
        bail!("pairs file lists no pairs");
    }
    let cfg = ZeroShotConfig {
        order: args.order,
        limit: Some(args.limit),
        mel: args.mel.to_config(),
        threads: args.threads,
    };
    logging::info(format!("scoring {} pairs", pairs.len()));
    let report = zero_shot_report(&pairs, &cfg)?;
    print!("{}", report::zero_shot(&report));
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = crate::pipeline::PipelineConfig::load(&args.config)?;
    let report = crate::pipeline::run(&cfg, args.threads)?;
    print!("{report}");
    Ok(())
}
