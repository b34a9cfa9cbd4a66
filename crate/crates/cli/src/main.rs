//! `mislabel`: identify and remove mislabeled training instances.
//!
//! Every subcommand exits 0 on success. On failure a single JSON object
//! `{"error": <kind>, "message": <text>}` is written to stderr and the exit
//! code is 1 (2 for usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use mislabel::analysis::{
    analytic_consensus_e1, analytic_consensus_e2, analytic_majority_error, precision_estimates,
};
use mislabel::filter::{apply_filter, cv_tag, DEFAULT_CV_FOLDS};
use mislabel::harness::{
    emit_report, generate_synthetic, run_experiment, DataSource, ExperimentConfig, FilterKind,
    OutputFormat, SyntheticSpec,
};
use mislabel::noise::{actual_noise_rate, inject_noise};
use mislabel::{load_dataset, Dataset, FilterPolicy, LearnerSpec, NoiseSpec, Seed};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] mislabel::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn kind(&self) -> &'static str {
        use mislabel::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match root(e) {
                E::Io { .. } => "io",
                E::Schema(_) => "schema",
                E::ColumnCount { .. }
                | E::NumericCell { .. }
                | E::UnknownCategory { .. }
                | E::Csv(_) => "parse",
                E::NoInstances => "no_instances",
                E::EmptyFilteredSet => "empty_filtered_set",
                _ => "invalid_argument",
            },
        }
    }
}

fn root(e: &mislabel::Error) -> &mislabel::Error {
    match e {
        mislabel::Error::Context { source, .. } => root(source),
        other => other,
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "mislabel",
    version,
    about = "Filter mislabeled training instances with cross-validated detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full noise / filter / retrain protocol and write report files.
    Experiment(ExperimentArgs),
    /// Tag a dataset and write the instances a filter keeps.
    Filter(FilterArgs),
    /// Corrupt labels within class pairs and write the corruption mask.
    Inject(InjectArgs),
    /// Write the cross-validated tag matrix.
    Tags(TagsArgs),
    /// Closed-form filter error model and precision estimates.
    Analytic {
        #[command(subcommand)]
        query: AnalyticQuery,
    },
    /// Write a synthetic Gaussian dataset with confusable class pairs.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated data file.
    #[arg(long)]
    data: PathBuf,
    /// TOML schema describing the columns.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; flags given on the command line override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// Confusable class pairs by name, e.g. `grassland:wooded,+:-`.
    #[arg(long, value_delimiter = ',')]
    noise_pairs: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    noise_levels: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Learners: `tree`, `nn` (or `<k>nn`), `lm`.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<String>>,
    /// Any of `none`, `sf`, `mf`, `cf`.
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    final_learners: Option<Vec<String>>,
    #[arg(long)]
    voting: Option<bool>,
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Any of `json`, `tables`, `series`.
    #[arg(long, value_delimiter = ',', default_value = "json,tables,series")]
    format: Vec<String>,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "tree,nn,lm")]
    detectors: Vec<String>,
    /// `mf`, `cf`, `sf:<detector index>` or `threshold:<wrong count>`.
    #[arg(long, default_value = "cf")]
    policy: String,
    #[arg(long, default_value_t = DEFAULT_CV_FOLDS)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the kept instances.
    #[arg(long)]
    out_data: PathBuf,
    /// Where to write the discarded instance indices.
    #[arg(long)]
    discards: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    noise_pairs: Vec<String>,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_data: PathBuf,
    /// Corruption mask as `instance,original,new` rows.
    #[arg(long)]
    mask: PathBuf,
}

#[derive(Args)]
struct TagsArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "tree,nn,lm")]
    detectors: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_CV_FOLDS)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyticQuery {
    /// Probability that a majority of `m` detectors with error rate `p` err.
    Majority {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: f64,
    },
    /// Consensus E1 and E2 from per-detector rates.
    Consensus {
        #[arg(long, value_delimiter = ',', required = true)]
        e1_rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        e2_rates: Vec<f64>,
    },
    /// P(E1) and P(E2) estimated from discard and corruption counts.
    Precision {
        #[arg(long)]
        discarded: f64,
        #[arg(long)]
        corrupted: f64,
        #[arg(long)]
        intersection: f64,
        #[arg(long)]
        total: usize,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<usize>,
    #[arg(long)]
    separation: f64,
    #[arg(long)]
    pair_spacing: Option<f64>,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_schema: PathBuf,
}

fn parse_learner(name: &str) -> Result<LearnerSpec> {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "tree" | "dtree" | "d-tree" | "decision_tree" => Ok(LearnerSpec::decision_tree()),
        "nn" | "knn" | "nearest_neighbor" => Ok(LearnerSpec::nearest_neighbor()),
        "lm" | "linear_machine" => Ok(LearnerSpec::linear_machine()),
        other => {
            let k = other
                .strip_suffix("-nn")
                .or_else(|| other.strip_suffix("nn"))
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k > 0)
                .ok_or_else(|| CliError::Usage(format!("unknown learner `{name}`")))?;
            Ok(LearnerSpec::NearestNeighbor { k })
        }
    }
}

fn parse_learners(names: &[String]) -> Result<Vec<LearnerSpec>> {
    names.iter().map(|n| parse_learner(n)).collect()
}

fn parse_filter(name: &str) -> Result<FilterKind> {
    match name.trim().to_ascii_lowercase().as_str() {
        "none" => Ok(FilterKind::None),
        "sf" => Ok(FilterKind::Sf),
        "mf" => Ok(FilterKind::Mf),
        "cf" => Ok(FilterKind::Cf),
        _ => Err(CliError::Usage(format!("unknown filter `{name}`"))),
    }
}

fn parse_pairs(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|item| match item.split_once(':') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
            _ => Err(CliError::Usage(format!(
                "noise pair `{item}` is not of the form a:b"
            ))),
        })
        .collect()
}

fn parse_policy(text: &str, m: usize) -> Result<FilterPolicy> {
    let bad = || CliError::Usage(format!("unknown policy `{text}`"));
    let policy = match text.split_once(':') {
        None if text == "mf" => FilterPolicy::majority(m),
        None if text == "cf" => FilterPolicy::consensus(m),
        Some(("sf", d)) => FilterPolicy::Single {
            detector: d.parse().map_err(|_| bad())?,
        },
        Some(("threshold", x)) => FilterPolicy::Threshold {
            wrong: x.parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    policy.validate(m)?;
    Ok(policy)
}

fn class_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.class_names()
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| CliError::Usage(format!("unknown class `{name}`")))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn build_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.data, &args.schema) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let mut cfg = ExperimentConfig::from_toml_str(&text)?;
            if let DataSource::File { data, schema } = &mut cfg.data {
                let base = path.parent().unwrap_or(Path::new(""));
                *data = base.join(&*data);
                *schema = base.join(&*schema);
            }
            cfg
        }
        (None, Some(data), Some(schema)) => ExperimentConfig::new(DataSource::File {
            data: data.clone(),
            schema: schema.clone(),
        }),
        _ => {
            return Err(CliError::Usage(
                "give --config or both --data and --schema".into(),
            ))
        }
    };
    if let (Some(data), Some(schema)) = (&args.data, &args.schema) {
        cfg.data = DataSource::File {
            data: data.clone(),
            schema: schema.clone(),
        };
    }
    if let Some(p) = &args.noise_pairs {
        cfg.noise_pairs = parse_pairs(p)?;
    }
    if let Some(l) = &args.noise_levels {
        cfg.noise_levels = l.clone();
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(f) = args.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(f) = args.cv_folds {
        cfg.cv_folds = f;
    }
    if let Some(d) = &args.detectors {
        cfg.detectors = parse_learners(d)?;
    }
    if let Some(f) = &args.filters {
        cfg.filters = f.iter().map(|x| parse_filter(x)).collect::<Result<_>>()?;
    }
    if let Some(l) = &args.final_learners {
        cfg.final_learners = parse_learners(l)?;
    }
    if let Some(v) = args.voting {
        cfg.voting = v;
    }
    if let Some(s) = args.standardize {
        cfg.standardize = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    let formats = args
        .format
        .iter()
        .map(|f| OutputFormat::from_str(f.trim()))
        .collect::<mislabel::Result<Vec<_>>>()?;
    let report = run_experiment(&cfg)?;
    let files = emit_report(&report, &args.out, &formats)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn filter(args: FilterArgs) -> Result<()> {
    let ds = load_dataset(&args.input.data, &args.input.schema)?;
    let detectors = parse_learners(&args.detectors)?;
    let policy = parse_policy(&args.policy, detectors.len())?;
    let tags = cv_tag(&ds, &detectors, args.cv_folds, Seed(args.seed))?;
    let result = apply_filter(&tags, policy)?;
    write(
        &args.out_data,
        &ds.subset(&result.kept).to_delimited_string(),
    )?;
    let mut discards = String::from("instance\n");
    for i in &result.discarded {
        discards.push_str(&format!("{i}\n"));
    }
    write(&args.discards, &discards)?;
    println!(
        "{}",
        json!({"kept": result.kept.len(), "discarded": result.discarded.len()})
    );
    Ok(())
}

fn inject(args: InjectArgs) -> Result<()> {
    let ds = load_dataset(&args.input.data, &args.input.schema)?;
    let pairs = parse_pairs(&args.noise_pairs)?
        .iter()
        .map(|(a, b)| Ok((class_index(&ds, a)?, class_index(&ds, b)?)))
        .collect::<Result<Vec<_>>>()?;
    let (noisy, mask) = inject_noise(&ds, &NoiseSpec::new(pairs, args.rate), Seed(args.seed))?;
    write(&args.out_data, &noisy.to_delimited_string())?;
    write(&args.mask, &mask.to_delimited_string())?;
    println!(
        "{}",
        json!({"corrupted": mask.len(), "actual_noise": actual_noise_rate(&mask, ds.len())?})
    );
    Ok(())
}

fn tags(args: TagsArgs) -> Result<()> {
    let ds = load_dataset(&args.input.data, &args.input.schema)?;
    let detectors = parse_learners(&args.detectors)?;
    let tags = cv_tag(&ds, &detectors, args.cv_folds, Seed(args.seed))?;
    match &args.out {
        Some(path) => write(path, &tags.to_delimited_string()),
        None => {
            print!("{}", tags.to_delimited_string());
            Ok(())
        }
    }
}

fn analytic(query: AnalyticQuery) -> Result<()> {
    let out = match query {
        AnalyticQuery::Majority { m, p } => {
            json!({"m": m, "p": p, "error": analytic_majority_error(m, p)?})
        }
        AnalyticQuery::Consensus { e1_rates, e2_rates } => json!({
            "e1": analytic_consensus_e1(&e1_rates)?,
            "e2": analytic_consensus_e2(&e2_rates)?,
        }),
        AnalyticQuery::Precision {
            discarded,
            corrupted,
            intersection,
            total,
        } => {
            let (e1, e2) = precision_estimates(discarded, corrupted, intersection, total)?;
            json!({"p_e1": e1, "p_e2": e2})
        }
    };
    println!("{out}");
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        instances_per_class: args.counts,
        dims: args.dims,
        separation: args.separation,
        pair_spacing: args.pair_spacing,
        sigma: args.sigma,
    };
    let ds = generate_synthetic(&spec, Seed(args.seed))?;
    ds.save(&args.out_data, &args.out_schema)?;
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": kind, "message": message}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end(), 2),
    };
    let result = match cli.command {
        Command::Experiment(a) => experiment(a),
        Command::Filter(a) => filter(a),
        Command::Inject(a) => inject(a),
        Command::Tags(a) => tags(a),
        Command::Analytic { query } => analytic(query),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => fail(e.kind(), &e.to_string(), 2),
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
