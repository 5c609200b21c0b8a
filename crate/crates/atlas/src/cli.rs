//! Clap surface. Exit codes: 0 success, 1 runtime error, 2 usage error
//! (clap's default for parse failures).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "atlas",
    version,
    about = "Measure language similarity from raw speech: train a spectral \
             language classifier, extract per-language embeddings, and score \
             them against geography, family trees, and neighbor selection."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic multilingual corpus.
    GenCorpus(GenCorpusArgs),
    /// Re-split a manifest into train/test, stratified per language.
    Split(SplitArgs),
    /// Compute and cache log-mel features for every utterance.
    Featurize(FeaturizeArgs),
    /// Train the language classifier.
    Train(TrainArgs),
    /// Report test accuracy of a checkpoint.
    Eval(EvalArgs),
    /// Extract per-language embeddings from a checkpoint.
    Embed(EmbedArgs),
    /// List the k nearest languages in embedding space.
    Knn(KnnArgs),
    /// Correlation and tree metrics over an embedding table.
    #[command(subcommand)]
    Metric(MetricCommand),
    /// Rank languages by embedding distance to their own family.
    Outliers(OutliersArgs),
    /// Select the k-th closest language under one distance method.
    Neighbor(NeighborArgs),
    /// Mean MCD between paired audio directories, per method and rank.
    McdReport(McdReportArgs),
    /// Run the full chain from a declarative config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Number of synthetic languages.
    #[arg(long, default_value_t = 10)]
    pub langs: usize,
    /// Utterances per language.
    #[arg(long, default_value_t = 20)]
    pub utts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (manifest.tsv, phonemes.tsv, audio/).
    #[arg(long)]
    pub out: PathBuf,
    /// Planted geography: "line" or "clusters".
    #[arg(long, default_value = "line")]
    pub layout: String,
    /// Spacing between languages under the line layout, in km.
    #[arg(long, default_value_t = 500.0)]
    pub spacing_km: f64,
    /// Cluster count under the clusters layout.
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Within-cluster spacing in km.
    #[arg(long, default_value_t = 100.0)]
    pub spread_km: f64,
    /// Between-cluster spacing in km.
    #[arg(long, default_value_t = 3000.0)]
    pub separation_km: f64,
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 0.9)]
    pub train_frac: f64,
    /// Consecutive languages per planted family (line layout).
    #[arg(long, default_value_t = 5)]
    pub family_size: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the re-split manifest. Omitted: the manifest text
    /// goes to stdout instead of the count report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MelArgs {
    /// Analysis window in seconds.
    #[arg(long, default_value_t = 0.025)]
    pub window: f64,
    /// Hop between frames in seconds.
    #[arg(long, default_value_t = 0.010)]
    pub hop: f64,
    #[arg(long, default_value_t = 1024)]
    pub fft_size: usize,
    #[arg(long, default_value_t = 20.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 7600.0)]
    pub fmax: f64,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; cache files mirror the wav paths with a .mel
    /// extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Root of the wav paths; defaults to the manifest's directory.
    #[arg(long)]
    pub audio_root: Option<PathBuf>,
    #[command(flatten)]
    pub mel: MelArgs,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of cached .mel features.
    #[arg(long)]
    pub features: PathBuf,
    /// Checkpoint path, rewritten after every epoch.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub embed: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    /// Early-stop after this many epochs without test-accuracy improvement.
    #[arg(long, default_value_t = 5)]
    pub plateau: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Cached features; omitted: features are recomputed from the audio.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Embedding table output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Average the FC1 outputs after the ReLU instead of before it.
    #[arg(long)]
    pub post_relu: bool,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub lang: String,
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum MetricCommand {
    /// Pearson correlation between embedding and geographic distances.
    Geo(MetricGeoArgs),
    /// Family-member hit rate among the k nearest embedding neighbors.
    Tree(MetricTreeArgs),
}

#[derive(Debug, Args)]
pub struct MetricGeoArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict each language's comparison set to languages within this
    /// radius. Omitted: the global metric.
    #[arg(long)]
    pub radius_km: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricTreeArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Tree source: ethnologue, wikipedia, or glottolog.
    #[arg(long, default_value = "ethnologue")]
    pub source: String,
    /// Comma-separated list of k values.
    #[arg(long, default_value = "2,4,8,16,32,64")]
    pub k: String,
}

#[derive(Debug, Args)]
pub struct OutliersArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "ethnologue")]
    pub source: String,
    #[arg(long, default_value_t = 500.0)]
    pub radius_km: f64,
    /// Rows to print after the summary line.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct NeighborArgs {
    /// Distance method: emb, geo, or ph.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub lang: String,
    #[arg(long)]
    pub k: usize,
    /// Embedding table (emb method).
    #[arg(long)]
    pub emb: Option<PathBuf>,
    /// Manifest with language coordinates (geo method).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Phoneme inventory file (ph method).
    #[arg(long)]
    pub phonemes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McdReportArgs {
    /// Pairs file: method, k, target, neighbor, target dir, neighbor dir.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Cepstral order.
    #[arg(long, default_value_t = 24)]
    pub order: usize,
    /// Compare at most this many utterances per pair.
    #[arg(long, default_value_t = 100)]
    pub limit: usize,
    #[command(flatten)]
    pub mel: MelArgs,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Declarative pipeline config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}
