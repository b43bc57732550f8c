//! `mlsh` command-line tool: generate data, fit preprocessing, train
//! arrangements, encode, search, evaluate against baselines and diagnose.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mlsh::hashing::{pairwise_cosine_matrix, random_arrangement, HyperplaneArrangement};
use mlsh::io::{load_dataset, read_code_table, save_dataset, write_code_table, ModelFile};
use mlsh::mcmc::{train, TrainConfig};
use mlsh::objective::{ObjectiveConfig, ObjectiveKind};
use mlsh::pairs::{SamplingConfig, SamplingMethods};
use mlsh::preprocess::{fit_preprocess, PreprocessModel, DEFAULT_CONTRIBUTION_THRESHOLD};
use mlsh::search::{
    default_acquisition_grid, recall_precision_curve, retrieval_count, scaled_metrics, top_k_by_hamming,
    write_curves_csv, write_scaled_csv, CodeTable, HammingRanker, L2Ranker,
};
use mlsh::synth::{generate_clusters, generate_gaussian_sign_dataset, random_centers};
use mlsh::{data::LabelSet, seed::RngSeed};

#[derive(Parser)]
#[command(name = "mlsh", version, about = "Learned hyperplane arrangements for locality-sensitive hashing")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV.
    Generate(GenerateArgs),
    /// Fit standardization + PCA on a dataset.
    Preprocess(PreprocessArgs),
    /// Train an arrangement and write a model file.
    Train(TrainArgs),
    /// Encode a dataset into a binary code table.
    Encode(EncodeArgs),
    /// Hamming top-k search of queries against a code table.
    Search(SearchArgs),
    /// Recall-precision curves for the model, an LSH baseline and L2.
    Evaluate(EvaluateArgs),
    /// Cosine matrix and component histograms of a model's normals.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    /// 3-D standard normal, labelled by the sign of the first component.
    GaussianSign,
    /// Isotropic Gaussian blobs, one class per blob.
    Clusters,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: GeneratorKind,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Record count (gaussian-sign).
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Standard deviation of the blob centers.
    #[arg(long, default_value_t = 1.5)]
    center_scale: f64,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CONTRIBUTION_THRESHOLD)]
    threshold: f64,
    /// Fitted model as JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the transformed dataset here.
    #[arg(long)]
    transformed: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Count,
    Ratio,
    Cosine,
    CosineRatio,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Count => ObjectiveKind::Count,
            ObjectiveArg::Ratio => ObjectiveKind::Ratio,
            ObjectiveArg::Cosine => ObjectiveKind::Cosine,
            ObjectiveArg::CosineRatio => ObjectiveKind::CosineRatio,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    bits: usize,
    #[arg(long, default_value_t = 10)]
    batches: usize,
    /// Steps per batch.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Pairs per batch, split evenly between positives and negatives.
    #[arg(long, default_value_t = 2000)]
    pairs: usize,
    #[arg(long, value_enum, default_value = "count")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// One of the sampling presets, e.g. randomhit-nearmiss.
    #[arg(long, default_value = "randomhit-nearmiss", value_parser = parse_sampling)]
    sampling: SamplingMethods,
    /// Proposal standard deviation.
    #[arg(long, default_value_t = 0.01)]
    stddev: f64,
    /// Draw a separate pair set for every hyperplane.
    #[arg(long)]
    per_hyperplane_pairs: bool,
    /// Also store the best position each walker visited.
    #[arg(long)]
    track_best: bool,
    /// Train on raw features instead of fitting standardization + PCA.
    #[arg(long, conflicts_with = "threshold")]
    no_preprocess: bool,
    #[arg(long)]
    threshold: Option<f64>,
    /// Per-hyperplane, per-batch acceptance rates.
    #[arg(long)]
    report_csv: Option<PathBuf>,
    /// log U after every step of every walker.
    #[arg(long)]
    trajectory_csv: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Use the tracked best arrangement instead of the final one.
    #[arg(long)]
    best: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Code table of the searched set (from `encode`).
    #[arg(long)]
    codes: PathBuf,
    /// Query dataset CSV.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, conflicts_with = "acquisition")]
    k: Option<usize>,
    /// Retrieve this fraction of the searched set instead of a fixed k.
    #[arg(long)]
    acquisition: Option<f64>,
    #[arg(long)]
    best: bool,
    /// CSV of `query,rank,index,distance`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    searched: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Seed of the LSH baseline arrangement.
    #[arg(long)]
    seed: u64,
    /// Comma-separated acquisition rates (default 0.01..0.1 by 0.01, then 0.2..1.0).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    best: bool,
    /// Curves CSV of `acquisition,precision,recall,method`.
    #[arg(long)]
    out: PathBuf,
    /// Ratios of mlsh and l2 over the lsh baseline.
    #[arg(long)]
    scaled_out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Model to inspect; alternatively use --random-bits.
    #[arg(long, required_unless_present = "random_bits")]
    model: Option<PathBuf>,
    /// Inspect a random arrangement of this many bits instead.
    #[arg(long, requires_all = ["random_dim", "seed"], conflicts_with = "model")]
    random_bits: Option<usize>,
    #[arg(long)]
    random_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    best: bool,
    #[arg(long)]
    cosine_out: PathBuf,
    #[arg(long)]
    histogram_out: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

fn parse_sampling(s: &str) -> std::result::Result<SamplingMethods, String> {
    s.parse().map_err(|e: mlsh::Error| e.to_string())
}

/// Error raised for bad flag combinations detected after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage_like = err.chain().any(|e| {
        e.is::<UsageError>() || matches!(e.downcast_ref::<mlsh::Error>(), Some(mlsh::Error::InvalidParameter(_)))
    });
    if usage_like {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => encode(a),
        Command::Search(a) => search(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load(path: &Path) -> Result<mlsh::data::LabeledDataset> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn pick_arrangement(model: &ModelFile, best: bool) -> Result<&HyperplaneArrangement> {
    if best {
        model
            .best_arrangement
            .as_ref()
            .ok_or_else(|| usage("model has no best arrangement; train with --track-best"))
    } else {
        Ok(&model.arrangement)
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let seed = RngSeed(a.seed);
    let data = match a.kind {
        GeneratorKind::GaussianSign => generate_gaussian_sign_dataset(a.n, seed)?,
        GeneratorKind::Clusters => {
            if a.classes == 0 || a.dim == 0 {
                return Err(usage("--classes and --dim must be positive"));
            }
            let centers = random_centers(a.classes, a.dim, a.center_scale, seed);
            let labels: Vec<LabelSet> = (0..a.classes).map(|c| LabelSet::single(format!("c{c}"))).collect();
            generate_clusters(&centers, a.spread, a.per_class, &labels, RngSeed(a.seed.wrapping_add(1)))?
        }
    };
    save_dataset(&a.out, &data)?;
    eprintln!("wrote {} records of dimension {} to {}", data.len(), data.dim(), a.out.display());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let data = load(&a.data)?;
    let model = fit_preprocess(&data, a.threshold)?;
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &model)?;
    writeln!(w)?;
    w.flush()?;
    println!(
        "kept {} of {} components ({:.4} of variance)",
        model.output_dim,
        model.input_dim,
        model.cumulative_contribution(model.output_dim)
    );
    if let Some(path) = a.transformed {
        save_dataset(&path, &model.apply_dataset(&data)?)?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let raw = load(&a.data)?;
    let pre: Option<PreprocessModel> = if a.no_preprocess {
        None
    } else {
        Some(fit_preprocess(&raw, a.threshold.unwrap_or(DEFAULT_CONTRIBUTION_THRESHOLD))?)
    };
    let data = match &pre {
        Some(p) => p.apply_dataset(&raw)?,
        None => raw,
    };
    let cfg = TrainConfig {
        bits: a.bits,
        batches: a.batches,
        steps_per_batch: a.steps,
        proposal_stddev: a.stddev,
        objective: ObjectiveConfig::new(a.objective.into(), a.temperature)?,
        sampling: SamplingConfig::balanced(a.sampling, a.pairs),
        seed: RngSeed(a.seed),
        shared_pairs: !a.per_hyperplane_pairs,
        track_best: a.track_best,
        record_trajectory: a.trajectory_csv.is_some(),
    };
    cfg.validate()?;
    eprintln!(
        "training {} bits on {} records of dimension {}",
        cfg.bits,
        data.len(),
        data.dim()
    );
    let (arrangement, report) = train(&data, &cfg)?;

    let mut model = ModelFile::new(pre, arrangement, Some(cfg.clone()))?;
    model.best_arrangement = report.best.as_ref().map(|(arr, _)| arr.clone());
    model.save(&a.out)?;

    if let Some(path) = &a.report_csv {
        let mut w = create(path)?;
        report.write_acceptance_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.trajectory_csv {
        let mut w = create(path)?;
        report.write_trajectory_csv(&mut w, cfg.steps_per_batch)?;
        w.flush()?;
    }

    println!("bits: {}", cfg.bits);
    println!("feature dimension: {}", data.dim());
    println!("mean acceptance rate: {:.4}", report.mean_acceptance());
    for (b, rate) in batch_means(&report.acceptance_rates).iter().enumerate() {
        println!("  batch {b}: {rate:.4}");
    }
    println!("mean final log U: {:.4}", report.mean_final_log_u());
    if let Some((_, best)) = &report.best {
        println!("mean best log U: {:.4}", best.iter().sum::<f64>() / best.len().max(1) as f64);
    }
    println!("model written to {}", a.out.display());
    Ok(())
}

fn batch_means(rates: &[Vec<f64>]) -> Vec<f64> {
    let batches = rates.first().map_or(0, Vec::len);
    (0..batches)
        .map(|b| rates.iter().map(|r| r[b]).sum::<f64>() / rates.len() as f64)
        .collect()
}

fn encode(a: EncodeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load(&a.data)?;
    let features = model.transform(&data)?;
    let table = CodeTable::encode_dataset(pick_arrangement(&model, a.best)?, &features)?;
    let mut w = create(&a.out)?;
    write_code_table(&mut w, &table)?;
    w.flush()?;
    eprintln!("encoded {} records into {}-bit codes", table.len(), table.bits());
    Ok(())
}

fn search(a: SearchArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let arr = pick_arrangement(&model, a.best)?;
    let table = read_code_table(File::open(&a.codes).with_context(|| format!("opening {}", a.codes.display()))?)
        .with_context(|| format!("reading code table {}", a.codes.display()))?;
    if table.bits() != arr.bits() {
        return Err(mlsh::Error::CodeLengthMismatch {
            left: table.bits(),
            right: arr.bits(),
        }
        .into());
    }
    let k = match (a.k, a.acquisition) {
        (Some(k), None) => k,
        (None, Some(rate)) => {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(usage("--acquisition must be in (0, 1]"));
            }
            retrieval_count(rate, table.len())
        }
        _ => return Err(usage("give exactly one of --k or --acquisition")),
    };
    let queries = model.transform(&load(&a.queries)?)?;
    let mut w = create(&a.out)?;
    writeln!(w, "query,rank,index,distance")?;
    for q in 0..queries.len() {
        let code = arr.encode(queries.vector(q))?;
        for (rank, idx) in top_k_by_hamming(&table, &code, k)?.into_iter().enumerate() {
            let d = code.words().iter().zip(table.words(idx)).map(|(x, y)| (x ^ y).count_ones()).sum::<u32>();
            writeln!(w, "{q},{rank},{idx},{d}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let arr = pick_arrangement(&model, a.best)?;
    let searched = model.transform(&load(&a.searched)?)?;
    let queries = model.transform(&load(&a.queries)?)?;
    let grid = a.grid.unwrap_or_else(default_acquisition_grid);
    if grid.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(usage("acquisition rates must lie in (0, 1]"));
    }

    let hamming_curve = |arr: &HyperplaneArrangement| -> Result<mlsh::search::Curve> {
        let table = CodeTable::encode_dataset(arr, &searched)?;
        let qt = CodeTable::encode_dataset(arr, &queries)?;
        Ok(recall_precision_curve(&HammingRanker::new(&table, &qt)?, &searched, &queries, &grid)?)
    };
    let mlsh_curve = hamming_curve(arr)?;
    let lsh = random_arrangement(arr.dim(), arr.bits(), RngSeed(a.seed))?;
    let lsh_curve = hamming_curve(&lsh)?;
    let l2_curve = recall_precision_curve(&L2Ranker::new(&searched, &queries)?, &searched, &queries, &grid)?;

    let mut w = create(&a.out)?;
    write_curves_csv(&mut w, &[("mlsh", &mlsh_curve), ("lsh", &lsh_curve), ("l2", &l2_curve)])?;
    w.flush()?;

    if let Some(path) = &a.scaled_out {
        let m = scaled_metrics(&mlsh_curve.points, &lsh_curve.points)?;
        let l = scaled_metrics(&l2_curve.points, &lsh_curve.points)?;
        let mut w = create(path)?;
        write_scaled_csv(&mut w, &[("mlsh", &m), ("l2", &l)])?;
        w.flush()?;
    }

    println!(
        "evaluated {} queries ({} without relevant records excluded)",
        mlsh_curve.evaluated_queries, mlsh_curve.excluded_queries
    );
    for (id, c) in [("mlsh", &mlsh_curve), ("lsh", &lsh_curve), ("l2", &l2_curve)] {
        if let Some(p) = c.at(0.1) {
            println!("{id}: precision@0.1 {:.4} recall@0.1 {:.4}", p.precision, p.recall);
        }
    }
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let owned;
    let arr = match (&a.model, a.random_bits) {
        (Some(path), _) => {
            owned = load_model(path)?;
            pick_arrangement(&owned, a.best)?.clone()
        }
        (None, Some(bits)) => random_arrangement(
            a.random_dim.expect("required by clap"),
            bits,
            RngSeed(a.seed.expect("required by clap")),
        )?,
        (None, None) => unreachable!("clap requires one of them"),
    };

    let mut w = create(&a.cosine_out)?;
    let m = pairwise_cosine_matrix(&arr);
    for row in &m {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;

    let mut w = create(&a.histogram_out)?;
    writeln!(w, "component,bin_start,bin_end,count")?;
    let width = 2.0 / a.bins as f64;
    for c in 0..arr.dim() {
        let mut counts = vec![0usize; a.bins];
        for n in arr.normals() {
            let bin = (((n[c] + 1.0) / width) as usize).min(a.bins - 1);
            counts[bin] += 1;
        }
        for (b, count) in counts.iter().enumerate() {
            let lo = -1.0 + b as f64 * width;
            writeln!(w, "{c},{lo},{},{count}", lo + width)?;
        }
    }
    w.flush()?;

    let off: usize = arr.bits() * arr.bits().saturating_sub(1);
    let mean = if off == 0 { 0.0 } else { m.iter().flatten().sum::<f64>() / off as f64 };
    println!("bits: {}, dimension: {}", arr.bits(), arr.dim());
    println!("mean off-diagonal |cos|: {mean:.4}");
    Ok(())
}
