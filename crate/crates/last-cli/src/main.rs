//! `last` — command-line interface to the large average subtensor toolkit.
//!
//! Subcommands:
//!
//! - `gen` — generate a Gaussian tensor instance and write a binary dump.
//! - `solve` — run a solver (greedy, exact enumeration, or local search)
//!   on a generated instance or a dump, printing the result as JSON.
//! - `theory` — evaluate theoretical quantities (the `E_max` scale, the
//!   greedy guarantee, tail bounds, overlap exponents, covariance lemma
//!   checks) as bound-report JSON.
//! - `experiment` — run a deterministic Monte-Carlo experiment from a
//!   flat `key = value` config, writing CSV records and a JSON summary.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unknown
//! subcommands), 2 on budget or validation failures (parameters outside a
//! function's domain, enumeration budgets exceeded, malformed configs or
//! dumps). All numeric output is locale-independent.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use last_core::algorithms::{brute_force_max, igpt, local_search, LocalSearchInit};
use last_core::experiments::{parse_flat_kv, run_experiment, ExperimentConfig, ExperimentName};
use last_core::rtensor::{Backend, TensorInstance};
use last_core::theory::{
    bivariate_tail_upper, build_covariance_model, c0_exponent_bound, c1_exponent_bound,
    counting_tail_report, e_max, gaussian_tail_bounds, igpt_guarantee_ratio, lemma_checks,
    mvn_tail_bounds, ogp_exponent_psi, slepian_premise_check, BoundReport, EtaSource,
    ProblemParams,
};
use last_core::{Error, Result};

/// Environment variable naming the default output directory for
/// experiment artifacts; `--out-dir` overrides it.
const OUT_DIR_ENV: &str = "LAST_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "last",
    version,
    about = "Large average subtensor toolkit: generators, solvers, bounds, experiments"
)]
struct Cli {
    /// Cap the worker-thread pool (default: machine parallelism).
    /// Outputs never depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian tensor and write a binary dump.
    Gen(GenArgs),
    /// Run a solver and print the result as JSON.
    Solve(SolveArgs),
    /// Evaluate theoretical quantities as bound-report JSON.
    Theory(TheoryArgs),
    /// Run a Monte-Carlo experiment from a flat key = value config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Axis dimension N.
    #[arg(long)]
    n: usize,
    /// Order p.
    #[arg(long)]
    p: usize,
    /// Subset size k (recorded in the instance; validates 1 ≤ k ≤ N).
    #[arg(long)]
    k: usize,
    /// Instance seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interpolation angle τ ∈ [0, π/2]; requires --fresh-seed.
    #[arg(long, requires = "fresh_seed")]
    tau: Option<f64>,
    /// Seed of the independent fresh copy for interpolation.
    #[arg(long, requires = "tau")]
    fresh_seed: Option<u64>,
    /// Output dump path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    /// Incremental greedy over a block partition.
    Igpt,
    /// Exact maximum by full enumeration (budgeted).
    Brute,
    /// Axis-wise top-k local search.
    Local,
}

#[derive(Args)]
struct SolveArgs {
    /// Solver to run.
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Axis dimension N (ignored with --tensor).
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Subset size k.
    #[arg(long)]
    k: usize,
    /// Order p (ignored with --tensor).
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Instance seed (ignored with --tensor).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the instance from a dump instead of generating it.
    #[arg(long)]
    tensor: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum QuantityArg {
    /// First-moment scale E_max = sqrt(2p/k^p · ln C(N,k)).
    EMax,
    /// Greedy guarantee ratio 2√p/(p+1).
    Ratio,
    /// Tail bounds: univariate sandwich (--x), bivariate joint bound
    /// (--x --rho), or overlap-count tail (--delta [--gamma]).
    Tail,
    /// Overlap-band union exponent Ψ plus its companion exponents.
    Psi,
    /// Covariance-model lemma checks (optionally a premise check via --taus).
    LemmaChecks,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EtaArg {
    /// All offsets zero: the equicorrelated reference model.
    Zero,
    /// Offsets drawn uniformly from [0, ν2 − ν1] from --eta-seed.
    Random,
}

#[derive(Args)]
struct TheoryArgs {
    /// Which quantity to evaluate.
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    /// Axis dimension N.
    #[arg(long)]
    n: Option<usize>,
    /// Subset size k.
    #[arg(long)]
    k: Option<usize>,
    /// Order p.
    #[arg(long)]
    p: Option<usize>,
    /// Tail level (univariate x or joint level u).
    #[arg(long)]
    x: Option<f64>,
    /// Correlation for the bivariate joint tail bound.
    #[arg(long)]
    rho: Option<f64>,
    /// Overlap fraction δ for the overlap-count tail.
    #[arg(long)]
    delta: Option<f64>,
    /// Exponent target γ (count comparison and Ψ).
    #[arg(long)]
    gamma: Option<f64>,
    /// Tuple size m.
    #[arg(long)]
    m: Option<usize>,
    /// Band lower edge ν1.
    #[arg(long)]
    nu1: Option<f64>,
    /// Band upper edge ν2.
    #[arg(long)]
    nu2: Option<f64>,
    /// Correction constant c in Ψ.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Offset source for the covariance model.
    #[arg(long, value_enum, default_value_t = EtaArg::Zero)]
    eta: EtaArg,
    /// Seed for random offsets.
    #[arg(long, default_value_t = 0)]
    eta_seed: u64,
    /// Comma-separated interpolation angles for the premise check.
    #[arg(long)]
    taus: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment name; may instead come from `experiment =` in the config.
    #[arg(long)]
    name: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable, later wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective config and exit without running.
    #[arg(long)]
    dump_config: bool,
    /// Output directory (default: $LAST_OUT_DIR, else the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Usage problems exit 1; --help/--version print and exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be ≥ 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // Domain, budget, and I/O failures all exit 2.
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Gen(args) => run_gen(args),
        Command::Solve(args) => run_solve(args),
        Command::Theory(args) => run_theory(args),
        Command::Experiment(args) => run_experiment_cmd(args),
    }
}

/// Writes to stdout, swallowing broken-pipe errors so piping through
/// `head` and friends terminates quietly.
fn print_text(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize infallibly");
    text.push('\n');
    print_text(&text);
}

// ===== gen ==================================================================

fn run_gen(args: &GenArgs) -> Result<()> {
    let tensor = match (args.tau, args.fresh_seed) {
        (Some(tau), Some(fresh_seed)) => TensorInstance::generate_interpolated(
            args.n,
            args.p,
            args.k,
            args.seed,
            Backend::Dense,
            tau,
            fresh_seed,
        )?,
        _ => TensorInstance::generate(args.n, args.p, args.k, args.seed, Backend::Dense)?,
    };
    let file = fs::File::create(&args.out)?;
    let mut writer = BufWriter::new(file);
    tensor.write_dump(&mut writer)?;
    let entries = (args.n as u64).pow(args.p as u32);
    print_json(&serde_json::json!({
        "path": args.out.display().to_string(),
        "n": args.n,
        "p": args.p,
        "seed": args.seed,
        "entries": entries,
    }));
    Ok(())
}

// ===== solve ================================================================

fn run_solve(args: &SolveArgs) -> Result<()> {
    let tensor = match &args.tensor {
        Some(path) => {
            let mut reader = std::io::BufReader::new(fs::File::open(path)?);
            TensorInstance::read_dump(&mut reader)?
        }
        None => {
            // The exact and local solvers read entries densely; the greedy
            // solver touches few entries, so it works from the implicit
            // backend at any size.
            let backend = match args.algo {
                AlgoArg::Igpt => Backend::Implicit,
                AlgoArg::Brute | AlgoArg::Local => Backend::Dense,
            };
            TensorInstance::generate(args.n, args.p, args.k, args.seed, backend)?
        }
    };
    let result = match args.algo {
        AlgoArg::Igpt => igpt(&tensor, args.k)?,
        AlgoArg::Brute => brute_force_max(&tensor, args.k)?,
        // The restart seed comes from the instance itself so a dumped
        // tensor solves identically to one generated in place.
        AlgoArg::Local => local_search(
            &tensor,
            args.k,
            LocalSearchInit::Random {
                seed: tensor.master_seed(),
            },
        )?,
    };
    print_json(&result);
    Ok(())
}

// ===== theory ===============================================================

fn require<T: Copy>(opt: Option<T>, flag: &str, quantity: &str) -> Result<T> {
    opt.ok_or_else(|| Error::invalid(format!("--quantity {quantity} requires --{flag}")))
}

fn run_theory(args: &TheoryArgs) -> Result<()> {
    let reports: Vec<BoundReport> = match args.quantity {
        QuantityArg::EMax => {
            let params = ProblemParams::new(
                require(args.n, "n", "e-max")?,
                require(args.k, "k", "e-max")?,
                require(args.p, "p", "e-max")?,
            )?;
            vec![BoundReport::new("first-moment scale")
                .with_input("n", params.n as f64)
                .with_input("k", params.k as f64)
                .with_input("p", params.p as f64)
                .with_exact(e_max(&params))
                .with_satisfied(true)]
        }
        QuantityArg::Ratio => {
            let p = require(args.p, "p", "ratio")?;
            if p < 1 {
                return Err(Error::invalid("order p must be ≥ 1".to_string()));
            }
            let mut report = BoundReport::new("greedy guarantee ratio")
                .with_input("p", p as f64)
                .with_exact(igpt_guarantee_ratio(p))
                .with_satisfied(true);
            if let (Some(n), Some(k)) = (args.n, args.k) {
                let params = ProblemParams::new(n, k, p)?;
                report = report
                    .with_input("n", n as f64)
                    .with_input("k", k as f64)
                    .with_input("guarantee_times_emax", igpt_guarantee_ratio(p) * e_max(&params));
            }
            vec![report]
        }
        QuantityArg::Tail => run_theory_tail(args)?,
        QuantityArg::Psi => {
            let params = ProblemParams::new(
                require(args.n, "n", "psi")?,
                require(args.k, "k", "psi")?,
                require(args.p, "p", "psi")?,
            )?;
            let m = require(args.m, "m", "psi")?;
            let gamma = require(args.gamma, "gamma", "psi")?;
            let nu1 = require(args.nu1, "nu1", "psi")?;
            let nu2 = require(args.nu2, "nu2", "psi")?;
            let psi = ogp_exponent_psi(&params, m, gamma, nu1, nu2, args.c)?;
            let base = BoundReport::new("")
                .with_input("n", params.n as f64)
                .with_input("k", params.k as f64)
                .with_input("p", params.p as f64)
                .with_input("m", m as f64)
                .with_input("gamma", gamma)
                .with_input("nu1", nu1)
                .with_input("nu2", nu2);
            // Ψ < 0 certifies that band-constrained tuples vanish, so the
            // union report is "satisfied" exactly when the exponent is
            // negative; the companion exponents are plain values.
            let mut union_report = base.clone().with_exact(psi).with_input("c", args.c);
            union_report.name = "overlap-band union exponent".to_string();
            union_report.satisfied = psi < 0.0;
            let mut c0 = base
                .clone()
                .with_exact(c0_exponent_bound(&params, m, nu1)?)
                .with_satisfied(true);
            c0.name = "qualifier count exponent bound".to_string();
            let mut c1 = base
                .with_exact(c1_exponent_bound(&params, m, gamma, nu2)?)
                .with_satisfied(true);
            c1.name = "band pair survival exponent bound".to_string();
            vec![union_report, c0, c1]
        }
        QuantityArg::LemmaChecks => {
            let m = require(args.m, "m", "lemma-checks")?;
            let p = require(args.p, "p", "lemma-checks")?;
            let nu1 = require(args.nu1, "nu1", "lemma-checks")?;
            let nu2 = require(args.nu2, "nu2", "lemma-checks")?;
            let eta = match args.eta {
                EtaArg::Zero => EtaSource::Zero,
                EtaArg::Random => EtaSource::Random {
                    seed: args.eta_seed,
                },
            };
            let model = build_covariance_model(m, p, nu1, nu2, eta)?;
            let mut reports = lemma_checks(&model);
            if let Some(taus_text) = &args.taus {
                let taus: Vec<f64> = taus_text
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| {
                            Error::invalid(format!("--taus has unparseable angle `{t}`"))
                        })
                    })
                    .collect::<Result<_>>()?;
                reports.push(slepian_premise_check(&model, &taus)?);
            }
            // The multivariate sandwich at the model's own covariance, at
            // the symmetric level x𝟙, completes the picture when -x is given.
            if let Some(x) = args.x {
                let bounds = mvn_tail_bounds(
                    model.sigma(),
                    &DVector::from_element(m, x),
                )?;
                let mut report = BoundReport::new("multivariate tail sandwich at model covariance")
                    .with_input("level", x);
                report.lower = Some(bounds.lower);
                report.upper = Some(bounds.upper);
                report.satisfied = bounds.lower <= bounds.upper;
                reports.push(report);
            }
            reports
        }
    };
    print_json(&reports);
    Ok(())
}

fn run_theory_tail(args: &TheoryArgs) -> Result<Vec<BoundReport>> {
    if let Some(delta) = args.delta {
        let n = require(args.n, "n", "tail")? as u64;
        let k = require(args.k, "k", "tail")? as u64;
        let gamma = args.gamma.unwrap_or(1.0);
        return counting_tail_report(n, k, delta, gamma);
    }
    let x = require(args.x, "x", "tail")?;
    if let Some(rho) = args.rho {
        let bound = bivariate_tail_upper(rho, x)?;
        let mut report = BoundReport::new("bivariate joint tail bound")
            .with_input("rho", rho)
            .with_input("u", x);
        report.upper = Some(bound);
        report.satisfied = true;
        return Ok(vec![report]);
    }
    let tail = gaussian_tail_bounds(x)?;
    let mut report = BoundReport::new("gaussian tail sandwich").with_input("x", x);
    report.lower = Some(tail.lower);
    report.upper = Some(tail.upper);
    report.exact_or_mc = Some(tail.exact);
    report.satisfied = tail.lower <= tail.exact && tail.exact <= tail.upper;
    Ok(vec![report])
}

// ===== experiment ===========================================================

fn run_experiment_cmd(args: &ExperimentArgs) -> Result<()> {
    let mut kv: BTreeMap<String, String> = match &args.config {
        Some(path) => parse_flat_kv(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    for pair in &args.set {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(Error::invalid(format!(
                "--set expects KEY=VALUE, got `{pair}`"
            )));
        };
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }
    // The experiment name may come from --name, the config, or both (they
    // must agree).
    let config_name = kv.remove("experiment");
    let name = match (&args.name, &config_name) {
        (Some(flag), Some(key)) if flag != key => {
            return Err(Error::invalid(format!(
                "--name {flag} disagrees with `experiment = {key}` in the config"
            )));
        }
        (Some(flag), _) => ExperimentName::parse(flag)?,
        (None, Some(key)) => ExperimentName::parse(key)?,
        (None, None) => {
            return Err(Error::invalid(
                "no experiment named: pass --name or an `experiment =` config line".to_string(),
            ));
        }
    };
    let cfg = ExperimentConfig::from_kv(name, &kv)?;

    if args.dump_config {
        print_text(&cfg.to_flat_text());
        return Ok(());
    }

    let out_dir: PathBuf = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let resolve = |explicit: &Option<String>, default_name: String| -> PathBuf {
        let raw = explicit
            .as_ref()
            .map_or_else(|| PathBuf::from(default_name), PathBuf::from);
        if raw.is_absolute() {
            raw
        } else {
            out_dir.join(raw)
        }
    };
    let csv_path = resolve(&cfg.out_csv, format!("{}.csv", name.token()));
    let json_path = resolve(&cfg.out_json, format!("{}-summary.json", name.token()));

    let artifacts = run_experiment(&cfg)?;
    write_all(&csv_path, artifacts.csv.as_bytes())?;
    write_all(&json_path, artifacts.summary_text().as_bytes())?;
    eprintln!(
        "wrote {} and {}",
        csv_path.display(),
        json_path.display()
    );
    print_text(&artifacts.summary_text());
    Ok(())
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}
