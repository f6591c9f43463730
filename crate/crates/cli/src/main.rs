use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use condreg::csv_io::{read_dataset_file, read_labeled, write_dataset_file, write_labeled};
use condreg::l2_regression::{derp_mu_search, derp_threaded};
use condreg::synthetic::{
    gen_labeled, gen_planted_l2, gen_planted_sup, reduce_to_dataset, Generated, RNG_ALGORITHM,
};
use condreg::{
    derp_sample_size, evaluate, evaluate_labeled, find_and_eliminate_with, sample_size,
    ConditionalModel, DerpParams, Error, FitOptions, KDnf, PgdConfig, PlantedSpec,
    SparseLinearRule, StepRule, SupOutcome, TaskParams,
};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "condreg",
    version,
    about = "Conditional sparse linear regression"
)]
struct Cli {
    /// Seed for every random choice; falls back to CONDREG_SEED, then 0.
    #[arg(long, global = true, env = "CONDREG_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a planted synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Fit a condition and sparse rule under the sup norm.
    FitSup(FitSupArgs),
    /// Fit a single-term condition and dense rule under expected squared error.
    FitL2(FitL2Args),
    /// Measure a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Turn labeled data `x,b` into a regression dataset with y = 1.
    Reduce(ReduceArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Sup,
    L2,
    Labeled,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "sup")]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Planted condition, e.g. "x0 | x3" or "x1&!x4".
    #[arg(long)]
    condition: String,
    /// Planted rule as `dim:coeff` pairs, e.g. "0:0.8,2:-1.1".
    #[arg(long, default_value = "")]
    rule: String,
    /// In-condition noise: sup bound (sup) or variance (l2).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    mu_target: f64,
    #[arg(long, default_value_t = 1.0)]
    off_noise: f64,
    #[arg(long, default_value_t = 1.0)]
    norm_bound: f64,
    /// Pr[b = 1] outside the condition (labeled data only).
    #[arg(long, default_value_t = 0.5)]
    positive_rate: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitSupArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    sparsity: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Try at most this many example subsets per sign pattern, drawn at random.
    #[arg(long)]
    max_bases: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StepArg {
    Fixed,
    Backtracking,
}

#[derive(Args, Debug)]
struct FitL2Args {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Condition mass lower bound; when absent, searched over 1, 1/2, ... down to --mu-floor.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    mu_floor: f64,
    /// Failure probability, only used to report the recommended sample size.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    norm_bound: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, value_enum, default_value = "fixed")]
    step: StepArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Regression dataset CSV.
    #[arg(long, conflicts_with = "labeled", required_unless_present = "labeled")]
    data: Option<PathBuf>,
    /// Labeled `x,b` CSV; reports Pr[b = 1 | condition].
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Tolerance for the hit rate; defaults to the model's epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    labeled: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Outcome {
    Done,
    Infeasible(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let seed = cli.seed.unwrap_or(0);
    match run(cli.command, seed) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command, seed: u64) -> Result<Outcome, Error> {
    match command {
        Command::Generate(a) => generate(a, seed),
        Command::FitSup(a) => fit_sup(a, seed),
        Command::FitL2(a) => fit_l2(a, seed),
        Command::Evaluate(a) => evaluate_cmd(a, seed),
        Command::Reduce(a) => reduce(a, seed),
    }
}

fn bad_rule(reason: String) -> Error {
    Error::InvalidParameter {
        name: "rule",
        reason,
    }
}

fn parse_rule(s: &str) -> Result<SparseLinearRule, Error> {
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (dim, coeff) = part
            .split_once(':')
            .ok_or_else(|| bad_rule(format!("entry `{part}` is not dim:coeff")))?;
        let dim = dim
            .trim()
            .parse()
            .map_err(|_| bad_rule(format!("bad dimension in `{part}`")))?;
        let coeff = coeff
            .trim()
            .parse()
            .map_err(|_| bad_rule(format!("bad coefficient in `{part}`")))?;
        pairs.push((dim, coeff));
    }
    pairs.sort_by_key(|p| p.0);
    let (support, coeffs) = pairs.into_iter().unzip();
    SparseLinearRule::new(support, coeffs)
}

fn write_metadata(out: &Path, lines: &[(&str, String)]) -> Result<(), Error> {
    let mut path = out.as_os_str().to_owned();
    path.push(".meta");
    let mut f = File::create(PathBuf::from(path))?;
    for (k, v) in lines {
        writeln!(f, "{k}={v}")?;
    }
    Ok(())
}

fn generate(a: GenerateArgs, seed: u64) -> Result<Outcome, Error> {
    let condition = KDnf::parse(&a.condition, a.n, a.k)?;
    eprintln!(
        "config: command=generate kind={:?} n={} d={} k={} condition=\"{}\" rule=\"{}\" epsilon={} mu_target={} off_noise={} norm_bound={} positive_rate={} m={} out={} seed={seed}",
        a.kind, a.n, a.d, a.k, condition, a.rule, a.epsilon, a.mu_target, a.off_noise, a.norm_bound, a.positive_rate, a.m, a.out.display()
    );
    if let Kind::Labeled = a.kind {
        let data = gen_labeled(&condition, a.mu_target, a.positive_rate, a.m, seed)?;
        write_labeled(a.n, &data, File::create(&a.out)?)?;
        write_metadata(
            &a.out,
            &[
                ("rng_algorithm", RNG_ALGORITHM.into()),
                ("seed", seed.to_string()),
            ],
        )?;
        return Ok(Outcome::Done);
    }
    let rule = parse_rule(&a.rule)?;
    let spec = PlantedSpec {
        n: a.n,
        d: a.d,
        k: a.k,
        s: rule.sparsity(),
        condition,
        rule,
        epsilon: a.epsilon,
        mu_target: a.mu_target,
        off_condition_noise: a.off_noise,
        norm_bound: a.norm_bound,
        seed,
    };
    let Generated {
        dataset,
        bernoulli_p,
        rng_algorithm,
        seed,
    } = match a.kind {
        Kind::Sup => gen_planted_sup(&spec, a.m)?,
        _ => gen_planted_l2(&spec, a.m)?,
    };
    write_dataset_file(&dataset, &a.out)?;
    write_metadata(
        &a.out,
        &[
            ("rng_algorithm", rng_algorithm.into()),
            ("seed", seed.to_string()),
            ("bernoulli_p", bernoulli_p.to_string()),
        ],
    )?;
    Ok(Outcome::Done)
}

fn fit_sup(a: FitSupArgs, seed: u64) -> Result<Outcome, Error> {
    let params = TaskParams {
        epsilon: a.epsilon,
        mu: a.mu,
        gamma: a.gamma,
        delta: a.delta,
        sparsity: a.sparsity,
        k: a.k,
        norm_bound: None,
    };
    eprintln!(
        "config: command=fit-sup data={} epsilon={} mu={} gamma={} delta={} sparsity={} k={} threads={} max_bases={} out={} seed={seed}",
        a.data.display(),
        a.epsilon,
        a.mu,
        a.gamma,
        a.delta,
        a.sparsity,
        a.k,
        a.threads,
        a.max_bases.map_or("none".into(), |v| v.to_string()),
        a.out.display()
    );
    params.validate()?;
    if a.threads == 0 {
        return Err(Error::InvalidParameter {
            name: "threads",
            reason: "must be at least 1".into(),
        });
    }
    if a.max_bases.is_some() {
        eprintln!("warning: --max-bases subsamples candidate bases; the sample-complexity guarantee no longer applies");
    }
    let data = read_dataset_file(&a.data)?;
    let needed = sample_size(&params, data.n(), data.d())?;
    if (data.len() as u64) < needed {
        eprintln!(
            "warning: {} examples, fewer than the {needed} the guarantee requires",
            data.len()
        );
    }
    let options = FitOptions {
        threads: a.threads,
        max_bases: a.max_bases,
        seed,
    };
    match find_and_eliminate_with(&data, &params, &options)? {
        SupOutcome::Found(report) => {
            report.model.write_json(File::create(&a.out)?)?;
            eprintln!(
                "found: condition=\"{}\" train_coverage={} bases_examined={}",
                report.model.condition(),
                report.train_coverage,
                report.bases_examined
            );
            Ok(Outcome::Done)
        }
        SupOutcome::Infeasible { bases_examined } => Ok(Outcome::Infeasible(format!(
            "no basis qualified after {bases_examined} candidates"
        ))),
    }
}

fn fit_l2(a: FitL2Args, seed: u64) -> Result<Outcome, Error> {
    let pgd = PgdConfig {
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        step_rule: match a.step {
            StepArg::Fixed => StepRule::FixedInverseLipschitz,
            StepArg::Backtracking => StepRule::Backtracking,
        },
    };
    eprintln!(
        "config: command=fit-l2 data={} epsilon={} mu={} mu_floor={} delta={} norm_bound={} k={} threads={} max_iters={} rel_tol={} step={:?} out={} seed={seed}",
        a.data.display(),
        a.epsilon,
        a.mu.map_or("search".into(), |v| v.to_string()),
        a.mu_floor,
        a.delta,
        a.norm_bound,
        a.k,
        a.threads,
        a.max_iters,
        a.rel_tol,
        a.step,
        a.out.display()
    );
    let params = DerpParams {
        epsilon: a.epsilon,
        mu: a.mu.unwrap_or(1.0),
        norm_bound: a.norm_bound,
        k: a.k,
        pgd,
    };
    params.validate()?;
    let data = read_dataset_file(&a.data)?;
    if a.epsilon > 0.0 {
        let needed = derp_sample_size(&params, data.n(), a.delta)?;
        if (data.len() as u64) < needed {
            eprintln!(
                "warning: {} examples, fewer than the {needed} the guarantee requires",
                data.len()
            );
        }
    }
    let found = match a.mu {
        Some(_) => derp_threaded(&data, &params, a.threads)?,
        None => derp_mu_search(&data, &params, a.mu_floor, a.threads)?.map(|(c, mu)| {
            eprintln!("mu search settled at mu={mu}");
            c
        }),
    };
    match found {
        Some(cand) => {
            eprintln!(
                "found: term={} matched={} scaled_sq_error={}",
                cand.term, cand.matched, cand.scaled_sq_error
            );
            let model = cand.into_model(data.n(), a.k, a.epsilon)?;
            model.write_json(File::create(&a.out)?)?;
            Ok(Outcome::Done)
        }
        None => Ok(Outcome::Infeasible("no term passed the error test".into())),
    }
}

fn evaluate_cmd(a: EvaluateArgs, seed: u64) -> Result<Outcome, Error> {
    eprintln!(
        "config: command=evaluate model={} data={} labeled={} epsilon={} out={} seed={seed}",
        a.model.display(),
        a.data
            .as_deref()
            .map_or("none".into(), |p| p.display().to_string()),
        a.labeled
            .as_deref()
            .map_or("none".into(), |p| p.display().to_string()),
        a.epsilon.map_or("model".into(), |v| v.to_string()),
        a.out
            .as_deref()
            .map_or("stdout".into(), |p| p.display().to_string()),
    );
    let model = ConditionalModel::read_json(File::open(&a.model)?)?;
    let report = if let Some(path) = &a.labeled {
        let (n, data) = read_labeled(File::open(path)?)?;
        if n != model.n() {
            return Err(Error::DimensionMismatch {
                what: "attributes",
                expected: model.n(),
                found: n,
            });
        }
        evaluate_labeled(model.condition(), &data)?.to_string()
    } else {
        let data = read_dataset_file(a.data.as_ref().expect("clap requires --data or --labeled"))?;
        evaluate(&model, &data, a.epsilon.unwrap_or(model.epsilon()))?.to_string()
    };
    match &a.out {
        Some(path) => std::fs::write(path, report)?,
        None => io::stdout().write_all(report.as_bytes())?,
    }
    Ok(Outcome::Done)
}

fn reduce(a: ReduceArgs, seed: u64) -> Result<Outcome, Error> {
    eprintln!(
        "config: command=reduce labeled={} out={} seed={seed}",
        a.labeled.display(),
        a.out.display()
    );
    let (n, labeled) = read_labeled(File::open(&a.labeled)?)?;
    let data = reduce_to_dataset(&labeled, n, seed)?;
    write_dataset_file(&data, &a.out)?;
    Ok(Outcome::Done)
}
