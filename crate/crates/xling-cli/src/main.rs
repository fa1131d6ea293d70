//! `xling` — align bilingual embedding spaces and run zero-shot
//! cross-lingual sentiment classification.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
//! failure. Stdout carries machine-parseable key=value lines; tables and
//! progress go to stderr.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use xling::bli_eval::{hubness_skew, precision_at_k};
use xling::dictionary::{build_seed_matrices, load_dict, DEFAULT_MAX_PAIRS};
use xling::embeddings::{load_vec, EmbeddingSpace, Normalization};
use xling::harness::{
    generate_synthetic_pair, parse_spec_file, run_crosslingual, run_monolingual, ExperimentSpec,
    HarnessError,
};
use xling::textclf::{
    fit_mean_baseline, load_checkpoint, load_dataset, save_checkpoint, save_dataset, train,
    Classifier, CnnModel, LrSchedule, SplitTag, TrainConfig, DEFAULT_DROPOUT,
    DEFAULT_FILTERS_PER_WIDTH,
};
use xling::transforms::{fit_transform, load_map, save_map, Distance, Method, RankConfig};
use xling::ErrorClass;

#[derive(Parser)]
#[command(
    name = "xling",
    version,
    about = "Bilingual embedding alignment and zero-shot cross-lingual sentiment classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a linear transformation between two embedding spaces
    Align(AlignArgs),
    /// Score a transformation by nearest-neighbor translation retrieval
    EvalBli(EvalBliArgs),
    /// Train a sentiment classifier over (optionally transformed) embeddings
    Train(TrainArgs),
    /// Classify text lines with a trained model
    Predict(PredictArgs),
    /// Run a monolingual or cross-lingual experiment from a spec file
    Experiment(ExperimentArgs),
    /// Generate a synthetic language pair with datasets and a dictionary
    Synth(SynthArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// Transformation method: mse, orto, cca, rank or orra
    #[arg(long)]
    method: String,
    #[arg(long = "src-emb")]
    src_emb: PathBuf,
    #[arg(long = "tgt-emb")]
    tgt_emb: PathBuf,
    /// Seed dictionary (TSV, source<TAB>target)
    #[arg(long)]
    dict: PathBuf,
    /// Output path for the map file
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "max-pairs", default_value_t = DEFAULT_MAX_PAIRS)]
    max_pairs: usize,
    /// Row normalization applied to both spaces: none, unit or center_unit
    #[arg(long, default_value = "none")]
    normalize: String,
    /// Seed for the ranking methods (falls back to $XLING_SEED, then 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Ranking margin
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Negatives sampled per pair per epoch
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    /// Ranking epochs
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Ranking learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Ranking distance: cosine or sq_euclidean
    #[arg(long, default_value = "cosine")]
    distance: String,
    /// CCA ridge (a number, or "auto" for the data-driven default)
    #[arg(long, default_value = "auto")]
    ridge: String,
}

#[derive(Args)]
struct EvalBliArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long = "src-emb")]
    src_emb: PathBuf,
    #[arg(long = "tgt-emb")]
    tgt_emb: PathBuf,
    /// Test dictionary (TSV)
    #[arg(long = "test-dict")]
    test_dict: PathBuf,
    /// Comma-separated list of k values
    #[arg(long, default_value = "1,5,10")]
    k: String,
    /// Neighborhood size for the hubness diagnostic
    #[arg(long = "hub-k", default_value_t = 10)]
    hub_k: usize,
    /// Number of source vectors sampled for hubness (clamped to the vocabulary)
    #[arg(long = "hub-sample", default_value_t = 500)]
    hub_sample: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training TSV (label<TAB>text)
    #[arg(long)]
    dataset: PathBuf,
    /// Development TSV used for model selection
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    /// Optional map applied to the embeddings before training
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long = "model-out")]
    model_out: PathBuf,
    /// cnn or mean_baseline
    #[arg(long, default_value = "cnn")]
    classifier: String,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// constant or linear_decay
    #[arg(long = "lr-schedule", default_value = "constant")]
    lr_schedule: String,
    #[arg(long = "batch-size", default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_FILTERS_PER_WIDTH)]
    filters: usize,
    #[arg(long, default_value_t = DEFAULT_DROPOUT)]
    dropout: f64,
    #[arg(long, default_value = "none")]
    normalize: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    /// Optional map applied to the embeddings before lookup
    #[arg(long)]
    map: Option<PathBuf>,
    /// Input file with one text per line; stdin when omitted
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec file (key=value lines)
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 24)]
    dim: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Entrywise Gaussian noise added to the rotated target space
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Number of training examples (dev and test sizes derive from it)
    #[arg(long, default_value_t = 200)]
    examples: usize,
    #[arg(long = "polarity-fraction", default_value_t = 0.3)]
    polarity_fraction: f64,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

fn class_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

fn pipeline_err(e: impl Into<xling::Error>) -> CliError {
    let e = e.into();
    CliError {
        code: class_code(e.class()),
        message: e.to_string(),
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> CliError {
        CliError {
            code: class_code(e.class()),
            message: e.to_string(),
        }
    }
}

/// Parses one of the token enums, turning the error into a usage failure.
fn parse_token<T: FromStr<Err = String>>(value: &str) -> Result<T, CliError> {
    value.parse().map_err(CliError::usage)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("XLING_SEED") {
        Ok(value) => value
            .parse()
            .map_err(|_| CliError::usage(format!("XLING_SEED={value:?} is not a valid seed"))),
        Err(_) => Ok(42),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xling: error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Align(args) => cmd_align(args),
        Command::EvalBli(args) => cmd_eval_bli(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn load_normalized(path: &PathBuf, normalize: Normalization) -> Result<EmbeddingSpace, CliError> {
    let space = load_vec(path).map_err(pipeline_err)?;
    Ok(space.normalize(normalize))
}

fn cmd_align(args: AlignArgs) -> Result<(), CliError> {
    let method: Method = parse_token(&args.method)?;
    let normalize: Normalization = parse_token(&args.normalize)?;
    let distance: Distance = parse_token(&args.distance)?;
    let seed = resolve_seed(args.seed)?;
    let ridge = match args.ridge.as_str() {
        "auto" => None,
        other => Some(other.parse::<f64>().map_err(|_| {
            CliError::usage(format!("--ridge must be a number or \"auto\", got {other:?}"))
        })?),
    };
    let rank_cfg = RankConfig {
        margin: args.gamma,
        negatives_per_pair: args.negatives,
        epochs: args.epochs,
        learning_rate: args.lr,
        seed,
        distance,
    };

    let src = load_normalized(&args.src_emb, normalize)?;
    let tgt = load_normalized(&args.tgt_emb, normalize)?;
    let dict = load_dict(&args.dict).map_err(pipeline_err)?;
    let seeds = build_seed_matrices(&dict, &src, &tgt, args.max_pairs).map_err(pipeline_err)?;
    let map = fit_transform(method, &seeds, &rank_cfg, ridge).map_err(pipeline_err)?;
    save_map(&map, &args.out).map_err(pipeline_err)?;

    let meta = map.fit_meta();
    println!("method={method}");
    println!("dim={}", map.dim());
    println!("pairs_used={}", meta.pairs_used);
    println!("skipped_oov={}", seeds.skipped_oov);
    if let Some(objective) = meta.objective {
        println!("objective={objective}");
    }
    println!("normalize={normalize}");
    println!("seed={}", meta.seed);
    println!("out={}", args.out.display());
    Ok(())
}

fn cmd_eval_bli(args: EvalBliArgs) -> Result<(), CliError> {
    let ks: Vec<usize> = args
        .k
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("--k entries must be integers, got {tok:?}")))
        })
        .collect::<Result<_, _>>()?;
    let seed = resolve_seed(args.seed)?;

    let map = load_map(&args.map).map_err(pipeline_err)?;
    let src = load_vec(&args.src_emb).map_err(pipeline_err)?;
    let tgt = load_vec(&args.tgt_emb).map_err(pipeline_err)?;
    let dict = load_dict(&args.test_dict).map_err(pipeline_err)?;

    let mut report = precision_at_k(&map, &dict, &src, &tgt, &ks).map_err(pipeline_err)?;
    let sample = args.hub_sample.min(src.len());
    if sample < args.hub_sample {
        log::warn!(
            "hub-sample {} exceeds vocabulary {}; clamping",
            args.hub_sample,
            src.len()
        );
    }
    let skew = hubness_skew(&map, &src, &tgt, args.hub_k, sample, seed).map_err(pipeline_err)?;
    report.hubness_skew = Some(skew);
    print!("{}", report.to_kv_block());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let normalize: Normalization = parse_token(&args.normalize)?;
    let lr_schedule: LrSchedule = parse_token(&args.lr_schedule)?;
    let seed = resolve_seed(args.seed)?;

    let mut space = load_normalized(&args.emb, normalize)?;
    if let Some(map_path) = &args.map {
        let map = load_map(map_path).map_err(pipeline_err)?;
        space = space.apply_transform(&map).map_err(pipeline_err)?;
    }
    let train_ds = load_dataset(&args.dataset, SplitTag::Train).map_err(pipeline_err)?;
    let dev_ds = load_dataset(&args.dev, SplitTag::Dev).map_err(pipeline_err)?;

    let cfg = TrainConfig {
        learning_rate: args.lr,
        lr_schedule,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        seed,
        ..TrainConfig::default()
    };
    let (clf, history) = match args.classifier.as_str() {
        "cnn" => {
            let model = CnnModel::new(space.dim(), args.filters, args.dropout, seed);
            let (trained, history) =
                train(model, &train_ds, &dev_ds, &space, &cfg).map_err(pipeline_err)?;
            (Classifier::Cnn(trained), history)
        }
        "mean_baseline" => {
            let (trained, history) =
                fit_mean_baseline(&train_ds, &dev_ds, &space, &cfg).map_err(pipeline_err)?;
            (Classifier::Mean(trained), history)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown classifier {other:?} (expected cnn or mean_baseline)"
            )))
        }
    };

    for (epoch, (loss, acc)) in history
        .train_loss
        .iter()
        .zip(&history.dev_accuracy)
        .enumerate()
    {
        eprintln!("epoch {epoch}: train_loss={loss:.6} dev_acc={acc:.6}");
    }
    save_checkpoint(&clf, &cfg, &args.model_out).map_err(pipeline_err)?;
    println!("classifier={}", clf.kind());
    println!("best_epoch={}", history.best_epoch);
    println!(
        "best_dev_acc={:.6}",
        history.dev_accuracy[history.best_epoch]
    );
    println!("seed={seed}");
    println!("model={}", args.model_out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let (clf, _cfg) = load_checkpoint(&args.model).map_err(pipeline_err)?;
    let mut space = load_vec(&args.emb).map_err(pipeline_err)?;
    if let Some(map_path) = &args.map {
        let map = load_map(map_path).map_err(pipeline_err)?;
        space = space.apply_transform(&map).map_err(pipeline_err)?;
    }
    if clf.dim() != space.dim() {
        return Err(CliError {
            code: 2,
            message: format!(
                "model dimension {} does not match embedding dimension {}",
                clf.dim(),
                space.dim()
            ),
        });
    }

    let stdin = std::io::stdin();
    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(std::io::BufReader::new(
            std::fs::File::open(path).map_err(|source| CliError {
                code: 2,
                message: format!("failed to open {}: {source}", path.display()),
            })?,
        )),
        None => Box::new(stdin.lock()),
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in reader.lines() {
        let line = line.map_err(|source| CliError {
            code: 2,
            message: format!("failed to read input: {source}"),
        })?;
        let (label, probs) = clf.predict_text(&line, &space).map_err(pipeline_err)?;
        let score = probs[label.index()];
        writeln!(out, "{label}\t{score:.6}").map_err(|source| CliError {
            code: 2,
            message: format!("failed to write output: {source}"),
        })?;
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let spec = parse_spec_file(&args.spec)?;
    let result = match &spec {
        ExperimentSpec::CrossLingual(spec) => run_crosslingual(spec)?,
        ExperimentSpec::Monolingual(spec) => run_monolingual(spec)?,
    };
    eprint!("{}", result.to_table());
    print!("{}", result.to_kv_block());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let pair = generate_synthetic_pair(
        args.vocab,
        args.dim,
        seed,
        args.sigma,
        args.examples,
        args.polarity_fraction,
    )?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError {
        code: 2,
        message: format!("cannot create {}: {source}", args.out_dir.display()),
    })?;
    let path = |name: &str| args.out_dir.join(name);
    xling::embeddings::save_vec(&pair.src_space, path("src.vec")).map_err(pipeline_err)?;
    xling::embeddings::save_vec(&pair.tgt_space, path("tgt.vec")).map_err(pipeline_err)?;
    let dict_text: String = pair
        .dictionary
        .pairs()
        .iter()
        .map(|(s, t)| format!("{s}\t{t}\n"))
        .collect();
    std::fs::write(path("dict.tsv"), dict_text).map_err(|source| CliError {
        code: 2,
        message: format!("cannot write dictionary: {source}"),
    })?;
    save_dataset(&pair.src_train, path("src_train.tsv")).map_err(pipeline_err)?;
    save_dataset(&pair.src_dev, path("src_dev.tsv")).map_err(pipeline_err)?;
    save_dataset(&pair.tgt_test, path("tgt_test.tsv")).map_err(pipeline_err)?;

    // A ready-to-run cross-lingual spec over the generated files.
    let spec_text = format!(
        "mode = crosslingual\nmethod = orto\ndirection = source_to_target\n\
         src_emb = {}\ntgt_emb = {}\ndict = {}\n\
         src_train = {}\nsrc_dev = {}\ntgt_test = {}\n\
         classifier = mean_baseline\nlr = 0.05\nrepeats = 6\nseed = {seed}\n",
        path("src.vec").display(),
        path("tgt.vec").display(),
        path("dict.tsv").display(),
        path("src_train.tsv").display(),
        path("src_dev.tsv").display(),
        path("tgt_test.tsv").display(),
    );
    std::fs::write(path("experiment.spec"), spec_text).map_err(|source| CliError {
        code: 2,
        message: format!("cannot write spec: {source}"),
    })?;

    for name in [
        "src.vec",
        "tgt.vec",
        "dict.tsv",
        "src_train.tsv",
        "src_dev.tsv",
        "tgt_test.tsv",
        "experiment.spec",
    ] {
        println!("{}={}", name.replace('.', "_"), path(name).display());
    }
    println!("seed={seed}");
    Ok(())
}
