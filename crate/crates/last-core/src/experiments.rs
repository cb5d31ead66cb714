//! Deterministic Monte-Carlo experiment harness.
//!
//! Five experiments probe the theory at desk scale:
//!
//! - **ground-state** — exact `M*` by enumeration over a seed sweep;
//!   summarizes `M*/E_max` and the fraction of trials sandwiched by
//!   `(1−ε)E_max ≤ M* ≤ E_max`.
//! - **igpt-ratio** — the greedy solver on large implicit tensors;
//!   summarizes `value_average/E_max` against the `2√p/(p+1)` guarantee.
//! - **concentration** — tail frequencies `P[|M* − mean| > u]` against the
//!   sub-Gaussian bound `2·exp(−u²k^p/2)` for the supremum of the
//!   (bounded) Gaussian process behind `M*`.
//! - **ogp-scan** — enumerates near-optimal solutions of interpolated
//!   instances `cos(τ)A⁰ + sin(τ)Aˡ` and histograms pairwise per-axis
//!   overlaps of solution tuples, counting tuples whose overlaps all land
//!   in a band `[ν1, ν2]` — the empirical picture of the overlap gap.
//! - **tail-validate** — Monte-Carlo checks of the univariate, bivariate,
//!   and multivariate Gaussian tail bounds.
//!
//! # Determinism
//!
//! Every random decision is counter-derived: trial `t` of grid point `g`
//! of experiment `e` uses seed `derive_seed(master, TAG_TRIAL, [e, g, t])`,
//! and Monte-Carlo sampling runs over a fixed set of 64 chunks whose
//! streams are `(master, TAG_MC, [suite, chunk])`. Work is distributed
//! over however many worker threads rayon has, but results are collected
//! in index order and reduced sequentially, so **output bytes are
//! identical at every thread count** — re-running any experiment with the
//! same config and master seed reproduces its CSV exactly.
//!
//! # Outputs
//!
//! Each runner returns its typed records plus [`ExperimentArtifacts`]: the
//! CSV text (fixed header, floats at 17 significant digits so they
//! round-trip exactly) and a JSON summary. Summaries are computed by pure
//! functions of the records, so a second pass over the CSV reproduces
//! every summary statistic; the tests do exactly that. Wall-clock times
//! are kept in the in-memory records only — they never enter the CSV,
//! which must be byte-stable across runs and machines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map as JsonMap, Value};

use crate::algorithms::{
    brute_force_max_with_budget, enumerate_subtensor_sums, igpt, local_search, Algorithm,
    LocalSearchInit, SolveResult, DEFAULT_ENUMERATION_BUDGET_TUPLES,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, CounterStream, TAG_FRESH, TAG_LSEARCH, TAG_MC, TAG_TRIAL};
use crate::rtensor::{overlap, Backend, MultiIndex, OverlapVector, TensorInstance};
use crate::theory::{
    bivariate_tail_upper, build_covariance_model, e_max_nkp, gaussian_tail_bounds,
    igpt_guarantee_ratio, mvn_tail_bounds, BoundReport, EtaSource,
};

/// Fixed number of Monte-Carlo chunks; the chunk grid, not the thread
/// count, defines the sample stream, so parallelism cannot change results.
const MC_CHUNKS: u64 = 64;

// ===== Experiment names =====================================================

/// The five experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    /// Exact ground states over a seed sweep.
    GroundState,
    /// Greedy ratio trend on implicit tensors.
    IgptRatio,
    /// Concentration of `M*` around its sample mean.
    Concentration,
    /// Overlap histogram of near-optimal tuples on interpolated instances.
    OgpScan,
    /// Monte-Carlo validation of the tail bounds.
    TailValidate,
}

impl ExperimentName {
    /// Stable kebab-case token (CLI `--name`, CSV `experiment` column).
    #[must_use]
    pub fn token(&self) -> &'static str {
        match self {
            ExperimentName::GroundState => "ground-state",
            ExperimentName::IgptRatio => "igpt-ratio",
            ExperimentName::Concentration => "concentration",
            ExperimentName::OgpScan => "ogp-scan",
            ExperimentName::TailValidate => "tail-validate",
        }
    }

    /// Parses the kebab-case token.
    pub fn parse(token: &str) -> Result<Self> {
        Ok(match token {
            "ground-state" => ExperimentName::GroundState,
            "igpt-ratio" => ExperimentName::IgptRatio,
            "concentration" => ExperimentName::Concentration,
            "ogp-scan" => ExperimentName::OgpScan,
            "tail-validate" => ExperimentName::TailValidate,
            other => {
                return Err(Error::invalid(format!(
                    "unknown experiment `{other}` (expected ground-state, igpt-ratio, \
                     concentration, ogp-scan, or tail-validate)"
                )))
            }
        })
    }

    /// Numeric id mixed into trial seeds so equal trial indices in
    /// different experiments never share randomness.
    #[must_use]
    pub fn id(&self) -> u64 {
        match self {
            ExperimentName::GroundState => 1,
            ExperimentName::IgptRatio => 2,
            ExperimentName::Concentration => 3,
            ExperimentName::OgpScan => 4,
            ExperimentName::TailValidate => 5,
        }
    }
}

// ===== Config ===============================================================

/// How the overlap scan collects near-optimal solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Exhaustive enumeration of all `C(N,k)^p` candidates (within budget).
    Enumerate,
    /// Repeated local search from random inits, filtered by the threshold.
    /// Finds a *subset* of the qualifier set — a lower bound, never
    /// claimed exhaustive.
    Sample,
}

impl ScanMode {
    fn token(self) -> &'static str {
        match self {
            ScanMode::Enumerate => "enumerate",
            ScanMode::Sample => "sample",
        }
    }
}

/// Full parameter set for one experiment run.
///
/// Built from a flat `key = value` config (see [`parse_flat_kv`] and
/// [`ExperimentConfig::from_kv`]); every field has a default, and each
/// experiment accepts only its own keys (unknown or irrelevant keys are
/// rejected by name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Which experiment this parameterizes.
    pub experiment: ExperimentName,
    /// Axis dimensions to sweep.
    pub n_list: Vec<usize>,
    /// Subset sizes to sweep.
    pub k_list: Vec<usize>,
    /// Orders to sweep.
    pub p_list: Vec<usize>,
    /// Trials per grid point.
    pub trials: usize,
    /// Master seed; all randomness derives from it.
    pub master_seed: u64,
    /// `ε` levels for the `M* ≥ (1−ε)E_max` fractions (ground-state).
    pub epsilons: Vec<f64>,
    /// Deviation levels `u` (concentration); empty means the single
    /// default `u = 2·k^{−p/2}`.
    pub u_list: Vec<f64>,
    /// Tuple size `m` (ogp-scan).
    pub m: usize,
    /// Qualification threshold factor `γ` (ogp-scan).
    pub gamma: f64,
    /// Lower band edge `ν1` (ogp-scan).
    pub nu1: f64,
    /// Upper band edge `ν2` (ogp-scan).
    pub nu2: f64,
    /// Interpolation-angle grid `𝒥 ⊂ [0, π/2]` (ogp-scan).
    pub taus: Vec<f64>,
    /// Qualifier collection mode (ogp-scan).
    pub mode: ScanMode,
    /// Local-search inits per (replica, angle) in sampling mode.
    pub samples: usize,
    /// Monte-Carlo samples per bivariate case (tail-validate).
    pub mc_samples: u64,
    /// Monte-Carlo samples per multivariate case (tail-validate).
    pub mvn_samples: u64,
    /// Enumeration budget on `C(N,k)^p` (and on tuple products in the
    /// scan).
    pub budget_tuples: f64,
    /// CSV output path (CLI; `None` = default naming).
    pub out_csv: Option<String>,
    /// JSON summary output path (CLI; `None` = default naming).
    pub out_json: Option<String>,
}

impl ExperimentConfig {
    /// The defaults every config starts from.
    #[must_use]
    pub fn defaults(experiment: ExperimentName) -> Self {
        ExperimentConfig {
            experiment,
            n_list: vec![10],
            k_list: vec![2],
            p_list: vec![2],
            trials: 50,
            master_seed: 1,
            epsilons: vec![0.1, 0.3],
            u_list: Vec::new(),
            m: 2,
            gamma: 0.6,
            nu1: 0.55,
            nu2: 0.95,
            taus: vec![0.0, std::f64::consts::FRAC_PI_2],
            mode: ScanMode::Enumerate,
            samples: 200,
            mc_samples: 1_000_000,
            mvn_samples: 10_000_000,
            budget_tuples: DEFAULT_ENUMERATION_BUDGET_TUPLES,
            out_csv: None,
            out_json: None,
        }
    }

    /// The config keys this experiment accepts.
    fn accepted_keys(experiment: ExperimentName) -> &'static [&'static str] {
        match experiment {
            ExperimentName::GroundState => &[
                "n", "k", "p", "trials", "master_seed", "epsilons", "budget_tuples", "out_csv",
                "out_json",
            ],
            ExperimentName::IgptRatio => {
                &["n", "k", "p", "trials", "master_seed", "out_csv", "out_json"]
            }
            ExperimentName::Concentration => &[
                "n", "k", "p", "trials", "master_seed", "u", "budget_tuples", "out_csv",
                "out_json",
            ],
            ExperimentName::OgpScan => &[
                "n", "k", "p", "m", "gamma", "nu1", "nu2", "taus", "mode", "samples",
                "master_seed", "budget_tuples", "out_csv", "out_json",
            ],
            ExperimentName::TailValidate => &[
                "master_seed", "mc_samples", "mvn_samples", "out_csv", "out_json",
            ],
        }
    }

    /// Applies flat `key = value` pairs on top of the defaults.
    ///
    /// Unknown keys — including keys that belong to a *different*
    /// experiment — are rejected with a diagnostic naming the key.
    pub fn from_kv(experiment: ExperimentName, kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        let accepted = Self::accepted_keys(experiment);
        for (key, value) in kv {
            if !accepted.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown configuration key `{key}` for experiment {}",
                    experiment.token()
                )));
            }
            match key.as_str() {
                "n" => cfg.n_list = parse_usize_list(value, key)?,
                "k" => cfg.k_list = parse_usize_list(value, key)?,
                "p" => cfg.p_list = parse_usize_list(value, key)?,
                "trials" => cfg.trials = parse_one(value, key)?,
                "master_seed" => cfg.master_seed = parse_one(value, key)?,
                "epsilons" => cfg.epsilons = parse_f64_list(value, key)?,
                "u" => cfg.u_list = parse_f64_list(value, key)?,
                "m" => cfg.m = parse_one(value, key)?,
                "gamma" => cfg.gamma = parse_one(value, key)?,
                "nu1" => cfg.nu1 = parse_one(value, key)?,
                "nu2" => cfg.nu2 = parse_one(value, key)?,
                "taus" => cfg.taus = parse_f64_list(value, key)?,
                "mode" => {
                    cfg.mode = match value.as_str() {
                        "enumerate" => ScanMode::Enumerate,
                        "sample" => ScanMode::Sample,
                        other => {
                            return Err(Error::invalid(format!(
                                "configuration key `mode` expects `enumerate` or `sample`, got `{other}`"
                            )))
                        }
                    }
                }
                "samples" => cfg.samples = parse_one(value, key)?,
                "mc_samples" => cfg.mc_samples = parse_one(value, key)?,
                "mvn_samples" => cfg.mvn_samples = parse_one(value, key)?,
                "budget_tuples" => cfg.budget_tuples = parse_one(value, key)?,
                "out_csv" => cfg.out_csv = Some(value.clone()),
                "out_json" => cfg.out_json = Some(value.clone()),
                _ => unreachable!("key was checked against the accepted list"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the effective configuration back to the flat format.
    /// Re-parsing the result reproduces this config exactly (round-trip).
    #[must_use]
    pub fn to_flat_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        push("experiment", self.experiment.token().to_string());
        for &key in Self::accepted_keys(self.experiment) {
            match key {
                "n" => push("n", join_usize(&self.n_list)),
                "k" => push("k", join_usize(&self.k_list)),
                "p" => push("p", join_usize(&self.p_list)),
                "trials" => push("trials", self.trials.to_string()),
                "master_seed" => push("master_seed", self.master_seed.to_string()),
                "epsilons" => push("epsilons", join_f64(&self.epsilons)),
                "u" => {
                    if !self.u_list.is_empty() {
                        push("u", join_f64(&self.u_list));
                    }
                }
                "m" => push("m", self.m.to_string()),
                "gamma" => push("gamma", format_f64(self.gamma)),
                "nu1" => push("nu1", format_f64(self.nu1)),
                "nu2" => push("nu2", format_f64(self.nu2)),
                "taus" => push("taus", join_f64(&self.taus)),
                "mode" => push("mode", self.mode.token().to_string()),
                "samples" => push("samples", self.samples.to_string()),
                "mc_samples" => push("mc_samples", self.mc_samples.to_string()),
                "mvn_samples" => push("mvn_samples", self.mvn_samples.to_string()),
                "budget_tuples" => push("budget_tuples", format_f64(self.budget_tuples)),
                "out_csv" => {
                    if let Some(path) = &self.out_csv {
                        push("out_csv", path.clone());
                    }
                }
                "out_json" => {
                    if let Some(path) = &self.out_json {
                        push("out_json", path.clone());
                    }
                }
                _ => unreachable!("every accepted key is serialized"),
            }
        }
        out
    }

    /// Cross-field validation.
    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.k_list.is_empty() || self.p_list.is_empty() {
            return Err(Error::invalid(
                "n, k, and p must each have at least one value".to_string(),
            ));
        }
        if self.trials == 0
            && !matches!(self.experiment, ExperimentName::TailValidate | ExperimentName::OgpScan)
        {
            return Err(Error::invalid("trials must be ≥ 1".to_string()));
        }
        for (&n, &k) in self
            .n_list
            .iter()
            .flat_map(|n| self.k_list.iter().map(move |k| (n, k)))
        {
            if k < 1 || k > n {
                return Err(Error::invalid(format!(
                    "grid contains k={k} outside 1 ≤ k ≤ n={n}"
                )));
            }
        }
        if self.p_list.iter().any(|&p| p < 1) {
            return Err(Error::invalid("orders p must be ≥ 1".to_string()));
        }
        if matches!(
            self.experiment,
            ExperimentName::Concentration | ExperimentName::OgpScan
        ) && (self.n_list.len() != 1 || self.k_list.len() != 1 || self.p_list.len() != 1)
        {
            return Err(Error::invalid(format!(
                "{} runs at a single (n, k, p) grid point",
                self.experiment.token()
            )));
        }
        if self.experiment == ExperimentName::OgpScan {
            if self.m < 2 {
                return Err(Error::invalid(format!(
                    "tuple size m must be ≥ 2, got {}",
                    self.m
                )));
            }
            if !(self.gamma > 0.0) {
                return Err(Error::invalid(format!("γ must be > 0, got {}", self.gamma)));
            }
            if !(0.0 <= self.nu1 && self.nu1 < self.nu2 && self.nu2 <= 1.0) {
                return Err(Error::invalid(format!(
                    "band needs 0 ≤ ν1 < ν2 ≤ 1, got ν1={}, ν2={}",
                    self.nu1, self.nu2
                )));
            }
            if self.taus.is_empty() {
                return Err(Error::invalid("taus must be non-empty".to_string()));
            }
            for &tau in &self.taus {
                if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&tau) {
                    return Err(Error::invalid(format!(
                        "taus must lie in [0, π/2], got {tau}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The `(n, k, p)` grid in row-major order (n slowest).
    #[must_use]
    pub fn grid(&self) -> Vec<(usize, usize, usize)> {
        let mut grid = Vec::new();
        for &n in &self.n_list {
            for &k in &self.k_list {
                for &p in &self.p_list {
                    grid.push((n, k, p));
                }
            }
        }
        grid
    }
}

/// Parses the flat `key = value` config format: one pair per line, `#`
/// comments and blank lines ignored, duplicate keys rejected.
pub fn parse_flat_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::invalid(format!(
                "config line {} is not `key = value`: `{raw}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::invalid(format!(
                "config line {} has an empty key",
                lineno + 1
            )));
        }
        if kv.insert(key.clone(), value).is_some() {
            return Err(Error::invalid(format!(
                "duplicate configuration key `{key}`"
            )));
        }
    }
    Ok(kv)
}

fn parse_one<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value.trim().parse().map_err(|_| {
        Error::invalid(format!(
            "configuration key `{key}` has unparseable value `{value}`"
        ))
    })
}

fn parse_usize_list(value: &str, key: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse_one(v, key)).collect()
}

fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_one(v, key)).collect()
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Shortest decimal that round-trips the value (Rust's float `Display`).
fn format_f64(x: f64) -> String {
    format!("{x}")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_f64(x)).collect::<Vec<_>>().join(",")
}

// ===== Records ==============================================================

/// One solver run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Owning experiment.
    pub experiment: ExperimentName,
    /// Axis dimension.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Order.
    pub p: usize,
    /// The run's master seed.
    pub master_seed: u64,
    /// This trial's derived seed (also the tensor seed).
    pub trial_seed: u64,
    /// Solver used.
    pub algorithm: Algorithm,
    /// Solution sum.
    pub value_sum: f64,
    /// Solution average (the objective).
    pub value_average: f64,
    /// Scale `E_max` at this `(n, k, p)`.
    pub e_max: f64,
    /// `value_average / e_max` (NaN when `e_max = 0`).
    pub ratio: f64,
    /// Wall time of the solver call. In-memory only: deliberately not a
    /// CSV column, so output bytes do not depend on machine speed.
    pub wall_nanos: u64,
}

/// One `m`-tuple of threshold-qualified solutions in the overlap scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapScanRecord {
    /// Which τ-assignment (row-major index into `𝒥^m`).
    pub assignment_id: u64,
    /// Tuple index within the assignment's qualifier-set product.
    pub tuple_id: u64,
    /// Qualification threshold factor.
    pub gamma: f64,
    /// The assignment's angles, one per replica.
    pub taus: Vec<f64>,
    /// Pairwise overlaps, pairs `(i<j)` in lexicographic order.
    pub overlaps: Vec<OverlapVector>,
    /// All components meet the threshold **and** every pairwise overlap
    /// lands in the band.
    pub qualifies: bool,
    /// Every pairwise overlap fraction on every axis lies in `[ν1, ν2]`.
    pub band_hit: bool,
}

/// CSV text plus JSON summary for one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentArtifacts {
    /// Full CSV, header included; byte-stable across thread counts.
    pub csv: String,
    /// Summary document (sorted keys, so serialization is stable).
    pub summary: Value,
}

impl ExperimentArtifacts {
    /// The summary as pretty JSON with a trailing newline.
    #[must_use]
    pub fn summary_text(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.summary)
            .expect("summaries contain only finite numbers, strings, and arrays");
        text.push('\n');
        text
    }
}

// ===== CSV ==================================================================

/// Header of the trial CSV (ground-state, igpt-ratio, concentration).
pub const TRIALS_CSV_HEADER: &str =
    "experiment,n,k,p,master_seed,trial_seed,algorithm,value_sum,value_average,e_max,ratio";

/// Formats a float for CSV: 17 significant digits, which round-trips f64
/// exactly.
fn csv_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders trial records as CSV (fixed header, one row per record).
#[must_use]
pub fn trials_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 128);
    out.push_str(TRIALS_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment.token(),
            r.n,
            r.k,
            r.p,
            r.master_seed,
            r.trial_seed,
            r.algorithm.token(),
            csv_f64(r.value_sum),
            csv_f64(r.value_average),
            csv_f64(r.e_max),
            csv_f64(r.ratio),
        );
    }
    out
}

/// Parses CSV text produced by [`trials_to_csv`]; the inverse up to the
/// `wall_nanos` field (not a CSV column, restored as 0).
pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == TRIALS_CSV_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "trial CSV must start with the fixed header, got {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::invalid(format!(
                "trial CSV row {} has {} fields, expected 11",
                lineno + 2,
                fields.len()
            )));
        }
        let algorithm = match fields[6] {
            "igpt" => Algorithm::Igpt,
            "brute" => Algorithm::Brute,
            "local_search" => Algorithm::LocalSearch,
            other => {
                return Err(Error::invalid(format!(
                    "trial CSV row {} has unknown algorithm `{other}`",
                    lineno + 2
                )))
            }
        };
        records.push(TrialRecord {
            experiment: ExperimentName::parse(fields[0])?,
            n: parse_one(fields[1], "n")?,
            k: parse_one(fields[2], "k")?,
            p: parse_one(fields[3], "p")?,
            master_seed: parse_one(fields[4], "master_seed")?,
            trial_seed: parse_one(fields[5], "trial_seed")?,
            algorithm,
            value_sum: parse_one(fields[7], "value_sum")?,
            value_average: parse_one(fields[8], "value_average")?,
            e_max: parse_one(fields[9], "e_max")?,
            ratio: parse_one(fields[10], "ratio")?,
            wall_nanos: 0,
        });
    }
    Ok(records)
}

/// Header of the overlap-scan CSV for a given tuple size and order.
#[must_use]
pub fn ogp_csv_header(m: usize, p: usize) -> String {
    let mut header = String::from("assignment_id,tuple_id,gamma");
    for l in 1..=m {
        let _ = write!(header, ",tau_{l}");
    }
    for i in 1..=m {
        for j in (i + 1)..=m {
            for q in 1..=p {
                let _ = write!(header, ",ov_{i}_{j}_ax{q}");
            }
        }
    }
    header.push_str(",qualifies,band_hit");
    header
}

/// Renders overlap-scan records as CSV.
#[must_use]
pub fn ogp_to_csv(m: usize, p: usize, records: &[OverlapScanRecord]) -> String {
    let mut out = ogp_csv_header(m, p);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{},{}", r.assignment_id, r.tuple_id, csv_f64(r.gamma));
        for &tau in &r.taus {
            let _ = write!(out, ",{}", csv_f64(tau));
        }
        for ov in &r.overlaps {
            for &a in &ov.intersections {
                let _ = write!(out, ",{}", csv_f64(a as f64 / ov.k as f64));
            }
        }
        let _ = writeln!(
            out,
            ",{},{}",
            u8::from(r.qualifies),
            u8::from(r.band_hit)
        );
    }
    out
}

/// Parses CSV text produced by [`ogp_to_csv`]; needs `k` to restore the
/// integer intersection counts from the normalized fractions.
pub fn parse_ogp_csv(text: &str, m: usize, p: usize, k: usize) -> Result<Vec<OverlapScanRecord>> {
    let expected_header = ogp_csv_header(m, p);
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == expected_header => {}
        other => {
            return Err(Error::invalid(format!(
                "overlap CSV header mismatch: got {other:?}"
            )))
        }
    }
    let pairs = m * (m - 1) / 2;
    let expected_fields = 3 + m + pairs * p + 2;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(Error::invalid(format!(
                "overlap CSV row {} has {} fields, expected {expected_fields}",
                lineno + 2,
                fields.len()
            )));
        }
        let mut cursor = 3 + m;
        let mut overlaps = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let mut intersections = Vec::with_capacity(p);
            for q in 0..p {
                let fraction: f64 = parse_one(fields[cursor + q], "overlap")?;
                intersections.push((fraction * k as f64).round() as usize);
            }
            cursor += p;
            overlaps.push(OverlapVector { intersections, k });
        }
        records.push(OverlapScanRecord {
            assignment_id: parse_one(fields[0], "assignment_id")?,
            tuple_id: parse_one(fields[1], "tuple_id")?,
            gamma: parse_one(fields[2], "gamma")?,
            taus: (0..m)
                .map(|l| parse_one(fields[3 + l], "tau"))
                .collect::<Result<_>>()?,
            overlaps,
            qualifies: fields[expected_fields - 2] == "1",
            band_hit: fields[expected_fields - 1] == "1",
        });
    }
    Ok(records)
}

/// Header of the bound-report CSV (tail-validate).
pub const REPORTS_CSV_HEADER: &str = "name,lower,upper,exact_or_mc,satisfied";

/// Renders bound reports as CSV; absent bounds are empty fields.
#[must_use]
pub fn reports_to_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from(REPORTS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let opt = |v: Option<f64>| v.map(csv_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            opt(r.lower),
            opt(r.upper),
            opt(r.exact_or_mc),
            u8::from(r.satisfied)
        );
    }
    out
}

/// Parses CSV text produced by [`reports_to_csv`] (names must be
/// comma-free, which all report names are).
pub fn parse_reports_csv(text: &str) -> Result<Vec<BoundReport>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == REPORTS_CSV_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "report CSV header mismatch: got {other:?}"
            )))
        }
    }
    let mut reports = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::invalid(format!(
                "report CSV row {} has {} fields, expected 5",
                lineno + 2,
                fields.len()
            )));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_one(s, "bound")?))
            }
        };
        reports.push(BoundReport {
            name: fields[0].to_string(),
            inputs: BTreeMap::new(),
            lower: opt(fields[1])?,
            upper: opt(fields[2])?,
            exact_or_mc: opt(fields[3])?,
            satisfied: fields[4] == "1",
        });
    }
    Ok(reports)
}

// ===== Summary helpers ======================================================

/// Finite float to JSON number; non-finite becomes `null` (never panics).
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Sample mean and standard deviation (n−1 normalization; sd is 0 for
/// fewer than two values).
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() as f64 - 1.0);
    (mean, var.sqrt())
}

/// Binomial sampling standard deviation `sqrt(p̂(1−p̂)/trials)`.
fn binomial_sigma(p_hat: f64, trials: u64) -> f64 {
    (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
}

// ===== Trial runners ========================================================

/// Derives the seed for one trial.
fn trial_seed(master: u64, experiment: ExperimentName, grid_index: u64, trial_index: u64) -> u64 {
    derive_seed(master, TAG_TRIAL, &[experiment.id(), grid_index, trial_index])
}

/// Runs `trials` solver invocations at one grid point, in parallel but
/// collected in trial order.
fn run_trials_at(
    cfg: &ExperimentConfig,
    grid_index: u64,
    n: usize,
    k: usize,
    p: usize,
    backend: Backend,
    solve: impl Fn(&TensorInstance) -> Result<SolveResult> + Sync,
) -> Result<Vec<TrialRecord>> {
    let e_max = e_max_nkp(n, k, p)?;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial_index| {
            let seed = trial_seed(cfg.master_seed, cfg.experiment, grid_index, trial_index);
            let tensor = TensorInstance::generate(n, p, k, seed, backend)?;
            let result = solve(&tensor)?;
            Ok(TrialRecord {
                experiment: cfg.experiment,
                n,
                k,
                p,
                master_seed: cfg.master_seed,
                trial_seed: seed,
                algorithm: result.algorithm,
                value_sum: result.value_sum,
                value_average: result.value_average,
                e_max,
                ratio: result.value_average / e_max,
                wall_nanos: result.stats.wall_nanos,
            })
        })
        .collect()
}

/// Exact ground states over the grid; grid points whose enumeration
/// exceeds the budget are skipped and reported in the summary, not fatal.
pub fn run_ground_state(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, ExperimentArtifacts)> {
    expect_experiment(cfg, ExperimentName::GroundState)?;
    let grid = cfg.grid();
    let mut records = Vec::new();
    let mut skipped: Vec<(u64, String)> = Vec::new();
    for (grid_index, &(n, k, p)) in grid.iter().enumerate() {
        let budget = cfg.budget_tuples;
        match run_trials_at(cfg, grid_index as u64, n, k, p, Backend::Dense, |t| {
            brute_force_max_with_budget(t, k, budget)
        }) {
            Ok(mut rs) => records.append(&mut rs),
            Err(Error::BudgetExceeded { requested, budget, .. }) => {
                skipped.push((
                    grid_index as u64,
                    format!("enumeration needs {requested:.3e} tuples, budget {budget:.3e}"),
                ));
            }
            Err(e) => return Err(e),
        }
    }
    let summary = ground_state_summary(cfg, &records, &skipped);
    let csv = trials_to_csv(&records);
    Ok((records, ExperimentArtifacts { csv, summary }))
}

/// Greedy ratio trend on implicit tensors over the grid.
pub fn run_igpt_ratio(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, ExperimentArtifacts)> {
    expect_experiment(cfg, ExperimentName::IgptRatio)?;
    let grid = cfg.grid();
    let mut records = Vec::new();
    for (grid_index, &(n, k, p)) in grid.iter().enumerate() {
        let mut rs = run_trials_at(cfg, grid_index as u64, n, k, p, Backend::Implicit, |t| {
            igpt(t, k)
        })?;
        records.append(&mut rs);
    }
    let summary = igpt_ratio_summary(cfg, &records);
    let csv = trials_to_csv(&records);
    Ok((records, ExperimentArtifacts { csv, summary }))
}

/// Concentration of `M*` around the sample mean at a single grid point.
pub fn run_concentration(
    cfg: &ExperimentConfig,
) -> Result<(Vec<TrialRecord>, ExperimentArtifacts)> {
    expect_experiment(cfg, ExperimentName::Concentration)?;
    let (n, k, p) = cfg.grid()[0];
    let budget = cfg.budget_tuples;
    let records = run_trials_at(cfg, 0, n, k, p, Backend::Dense, |t| {
        brute_force_max_with_budget(t, k, budget)
    })?;
    let summary = concentration_summary(cfg, &records);
    let csv = trials_to_csv(&records);
    Ok((records, ExperimentArtifacts { csv, summary }))
}

fn expect_experiment(cfg: &ExperimentConfig, expected: ExperimentName) -> Result<()> {
    if cfg.experiment != expected {
        return Err(Error::invalid(format!(
            "config is for {}, runner is {}",
            cfg.experiment.token(),
            expected.token()
        )));
    }
    Ok(())
}

// ===== Summaries (pure functions of the records) ============================

/// Ground-state summary; recomputable from the CSV records alone.
#[must_use]
pub fn ground_state_summary(
    cfg: &ExperimentConfig,
    records: &[TrialRecord],
    skipped: &[(u64, String)],
) -> Value {
    let mut grid_entries = Vec::new();
    for (grid_index, &(n, k, p)) in cfg.grid().iter().enumerate() {
        let at: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.n == n && r.k == k && r.p == p)
            .collect();
        if at.is_empty() {
            continue;
        }
        // Degenerate points (e_max = 0, ratio NaN) are excluded from stats.
        let ratios: Vec<f64> = at
            .iter()
            .filter(|r| r.e_max > 0.0)
            .map(|r| r.ratio)
            .collect();
        let excluded = at.len() - ratios.len();
        let (mean, sd) = mean_sd(&ratios);
        let frac_le = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().filter(|&&r| r <= 1.0).count() as f64 / ratios.len() as f64
        };
        let mut frac_ge = JsonMap::new();
        for &eps in &cfg.epsilons {
            let frac = if ratios.is_empty() {
                f64::NAN
            } else {
                ratios.iter().filter(|&&r| r >= 1.0 - eps).count() as f64 / ratios.len() as f64
            };
            frac_ge.insert(format_f64(eps), num(frac));
        }
        let mut entry = JsonMap::new();
        entry.insert("grid_index".into(), Value::from(grid_index as u64));
        entry.insert("n".into(), Value::from(n as u64));
        entry.insert("k".into(), Value::from(k as u64));
        entry.insert("p".into(), Value::from(p as u64));
        entry.insert("trials".into(), Value::from(at.len() as u64));
        entry.insert("excluded_degenerate".into(), Value::from(excluded as u64));
        entry.insert("mean_ratio".into(), num(mean));
        entry.insert("sd_ratio".into(), num(sd));
        entry.insert("frac_mstar_le_emax".into(), num(frac_le));
        entry.insert("frac_ge_one_minus_eps".into(), Value::Object(frac_ge));
        grid_entries.push(Value::Object(entry));
    }
    let skipped_entries: Vec<Value> = skipped
        .iter()
        .map(|(grid_index, reason)| {
            let mut entry = JsonMap::new();
            entry.insert("grid_index".into(), Value::from(*grid_index));
            entry.insert("reason".into(), Value::from(reason.clone()));
            Value::Object(entry)
        })
        .collect();
    let mut root = JsonMap::new();
    root.insert("experiment".into(), Value::from("ground-state"));
    root.insert("master_seed".into(), Value::from(cfg.master_seed));
    root.insert("grid".into(), Value::Array(grid_entries));
    root.insert("skipped_grid_points".into(), Value::Array(skipped_entries));
    Value::Object(root)
}

/// Greedy-ratio summary; recomputable from the CSV records alone.
#[must_use]
pub fn igpt_ratio_summary(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Value {
    let mut grid_entries = Vec::new();
    for (grid_index, &(n, k, p)) in cfg.grid().iter().enumerate() {
        let at: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.n == n && r.k == k && r.p == p)
            .collect();
        if at.is_empty() {
            continue;
        }
        let ratios: Vec<f64> = at.iter().map(|r| r.ratio).collect();
        let (mean, sd) = mean_sd(&ratios);
        let guarantee = igpt_guarantee_ratio(p);
        let mut entry = JsonMap::new();
        entry.insert("grid_index".into(), Value::from(grid_index as u64));
        entry.insert("n".into(), Value::from(n as u64));
        entry.insert("k".into(), Value::from(k as u64));
        entry.insert("p".into(), Value::from(p as u64));
        entry.insert("trials".into(), Value::from(at.len() as u64));
        entry.insert("mean_ratio".into(), num(mean));
        entry.insert("sd_ratio".into(), num(sd));
        entry.insert("guarantee_ratio".into(), num(guarantee));
        entry.insert(
            "mean_over_guarantee".into(),
            num(mean / guarantee),
        );
        if p == 2 {
            // Cross-check of the p = 2 specialization: the guarantee times
            // E_max against the informal per-block prediction
            // (4/3)·sqrt(2 ln N / k); they agree asymptotically.
            let e_max = at[0].e_max;
            entry.insert("guarantee_times_emax".into(), num(guarantee * e_max));
            entry.insert(
                "informal_prediction".into(),
                num(4.0 / 3.0 * (2.0 * (n as f64).ln() / k as f64).sqrt()),
            );
        }
        grid_entries.push(Value::Object(entry));
    }
    let mut root = JsonMap::new();
    root.insert("experiment".into(), Value::from("igpt-ratio"));
    root.insert("master_seed".into(), Value::from(cfg.master_seed));
    root.insert("grid".into(), Value::Array(grid_entries));
    Value::Object(root)
}

/// Concentration summary; recomputable from the CSV records alone.
#[must_use]
pub fn concentration_summary(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Value {
    let (n, k, p) = cfg.grid()[0];
    let values: Vec<f64> = records.iter().map(|r| r.value_average).collect();
    let (mean, sd) = mean_sd(&values);
    let kp = (k as f64).powi(p as i32);
    let u_list: Vec<f64> = if cfg.u_list.is_empty() {
        vec![2.0 / kp.sqrt()]
    } else {
        cfg.u_list.clone()
    };
    let mut tails = Vec::new();
    for &u in &u_list {
        let exceed = values.iter().filter(|&&v| (v - mean).abs() > u).count();
        let empirical = if values.is_empty() {
            f64::NAN
        } else {
            exceed as f64 / values.len() as f64
        };
        let bound = 2.0 * (-u * u * kp / 2.0).exp();
        let sigma = binomial_sigma(empirical, values.len() as u64);
        let mut entry = JsonMap::new();
        entry.insert("u".into(), num(u));
        entry.insert("empirical".into(), num(empirical));
        entry.insert("bound".into(), num(bound));
        entry.insert("three_sigma".into(), num(3.0 * sigma));
        entry.insert(
            "satisfied".into(),
            Value::Bool(empirical <= bound + 3.0 * sigma),
        );
        tails.push(Value::Object(entry));
    }
    let mut root = JsonMap::new();
    root.insert("experiment".into(), Value::from("concentration"));
    root.insert("master_seed".into(), Value::from(cfg.master_seed));
    root.insert("n".into(), Value::from(n as u64));
    root.insert("k".into(), Value::from(k as u64));
    root.insert("p".into(), Value::from(p as u64));
    root.insert("trials".into(), Value::from(values.len() as u64));
    root.insert("sample_mean_mstar".into(), num(mean));
    root.insert("sample_sd_mstar".into(), num(sd));
    root.insert("tails".into(), Value::Array(tails));
    Value::Object(root)
}

// ===== Overlap scan =========================================================

/// Collects the qualifier set of one interpolated replica: every
/// multi-index whose subtensor average meets `γ·E_max`.
fn qualifier_set(
    tensor: &TensorInstance,
    k: usize,
    threshold_average: f64,
    cfg: &ExperimentConfig,
    replica: u64,
    tau_index: u64,
) -> Result<Vec<MultiIndex>> {
    let n = tensor.n();
    let p = tensor.p();
    let kp = (k as f64).powi(p as i32);
    match cfg.mode {
        ScanMode::Enumerate => {
            let ln_tuples =
                p as f64 * crate::theory::log_binomial(n as u64, k as u64)?;
            if ln_tuples > cfg.budget_tuples.ln() {
                return Err(Error::BudgetExceeded {
                    requested: ln_tuples.exp(),
                    budget: cfg.budget_tuples,
                    unit: "tuples",
                });
            }
            let mut qualifiers = Vec::new();
            enumerate_subtensor_sums(tensor, k, |tuple, sum| {
                if sum / kp >= threshold_average {
                    qualifiers.push(tuple.to_vec());
                }
            })?;
            qualifiers
                .into_iter()
                .map(|subsets| MultiIndex::new(subsets, n))
                .collect()
        }
        ScanMode::Sample => {
            // Deduplicated fixed points above the threshold: a lower bound
            // on the qualifier set, never claimed exhaustive.
            let mut found = std::collections::BTreeSet::new();
            for init_index in 0..cfg.samples as u64 {
                let seed = derive_seed(
                    cfg.master_seed,
                    TAG_LSEARCH,
                    &[cfg.experiment.id(), replica, tau_index, init_index],
                );
                let result = local_search(tensor, k, LocalSearchInit::Random { seed })?;
                if result.value_average >= threshold_average {
                    found.insert(result.solution.subsets().to_vec());
                }
            }
            found
                .into_iter()
                .map(|subsets| MultiIndex::new(subsets, n))
                .collect()
        }
    }
}

/// Runs the overlap scan; see the module docs.
///
/// Builds the base tensor `A⁰` and per-replica fresh tensors `A^(ℓ)`, and
/// for every τ-assignment in `𝒥^m` (ordered tuples, repeats allowed)
/// takes the cartesian product of the replicas' qualifier sets, recording
/// each tuple's pairwise per-axis overlaps, whether all of them land in
/// `[ν1, ν2]` (`band_hit`), and the resulting membership verdict
/// (`qualifies`). Assignments with an empty qualifier set contribute no
/// tuples and are counted in the summary — emptiness is a data point.
pub fn ogp_scan(cfg: &ExperimentConfig) -> Result<(Vec<OverlapScanRecord>, ExperimentArtifacts)> {
    expect_experiment(cfg, ExperimentName::OgpScan)?;
    let (n, k, p) = cfg.grid()[0];
    let e_max = e_max_nkp(n, k, p)?;
    let threshold_average = cfg.gamma * e_max;
    let base_seed = derive_seed(cfg.master_seed, TAG_FRESH, &[cfg.experiment.id(), 0]);

    // Qualifier sets per (replica, angle); replicas differ by their fresh
    // tensor, angles by the mixing coefficient.
    let grid: Vec<(u64, u64)> = (1..=cfg.m as u64)
        .flat_map(|l| (0..cfg.taus.len() as u64).map(move |t| (l, t)))
        .collect();
    let sets: Vec<Vec<MultiIndex>> = grid
        .par_iter()
        .map(|&(replica, tau_index)| {
            let fresh_seed =
                derive_seed(cfg.master_seed, TAG_FRESH, &[cfg.experiment.id(), replica]);
            let tensor = TensorInstance::generate_interpolated(
                n,
                p,
                k,
                base_seed,
                Backend::Dense,
                cfg.taus[tau_index as usize],
                fresh_seed,
            )?;
            qualifier_set(&tensor, k, threshold_average, cfg, replica, tau_index)
        })
        .collect::<Result<_>>()?;
    let set_for = |replica: usize, tau_index: usize| -> &Vec<MultiIndex> {
        &sets[replica * cfg.taus.len() + tau_index]
    };

    // Assignments: row-major index over 𝒥^m (replica 1's angle slowest).
    let tau_count = cfg.taus.len() as u64;
    let assignments_total = tau_count
        .checked_pow(cfg.m as u32)
        .ok_or_else(|| Error::invalid("τ-assignment count overflows".to_string()))?;
    let decode = |assignment_id: u64| -> Vec<usize> {
        let mut digits = vec![0usize; cfg.m];
        let mut rest = assignment_id;
        for l in (0..cfg.m).rev() {
            digits[l] = (rest % tau_count) as usize;
            rest /= tau_count;
        }
        digits
    };

    let per_assignment: Vec<Vec<OverlapScanRecord>> = (0..assignments_total)
        .into_par_iter()
        .map(|assignment_id| -> Result<Vec<OverlapScanRecord>> {
            let tau_idx = decode(assignment_id);
            let taus: Vec<f64> = tau_idx.iter().map(|&t| cfg.taus[t]).collect();
            let qualifier_sets: Vec<&Vec<MultiIndex>> = tau_idx
                .iter()
                .enumerate()
                .map(|(l, &t)| set_for(l, t))
                .collect();
            let mut tuple_total: f64 = 1.0;
            for q in &qualifier_sets {
                tuple_total *= q.len() as f64;
            }
            if tuple_total > cfg.budget_tuples {
                return Err(Error::BudgetExceeded {
                    requested: tuple_total,
                    budget: cfg.budget_tuples,
                    unit: "tuples",
                });
            }
            if tuple_total == 0.0 {
                return Ok(Vec::new()); // empty qualifier set: a data point
            }
            let mut records = Vec::with_capacity(tuple_total as usize);
            let mut positions = vec![0usize; cfg.m];
            let mut tuple_id: u64 = 0;
            loop {
                let members: Vec<&MultiIndex> = positions
                    .iter()
                    .enumerate()
                    .map(|(l, &pos)| &qualifier_sets[l][pos])
                    .collect();
                let mut overlaps = Vec::with_capacity(cfg.m * (cfg.m - 1) / 2);
                let mut band_hit = true;
                for i in 0..cfg.m {
                    for j in (i + 1)..cfg.m {
                        let ov = overlap(members[i], members[j])?;
                        for &a in &ov.intersections {
                            let fraction = a as f64 / k as f64;
                            if !(cfg.nu1 <= fraction && fraction <= cfg.nu2) {
                                band_hit = false;
                            }
                        }
                        overlaps.push(ov);
                    }
                }
                records.push(OverlapScanRecord {
                    assignment_id,
                    tuple_id,
                    gamma: cfg.gamma,
                    taus: taus.clone(),
                    overlaps,
                    // Components are threshold-qualified by construction,
                    // so membership reduces to the band condition.
                    qualifies: band_hit,
                    band_hit,
                });
                tuple_id += 1;
                // Odometer over the qualifier sets.
                let mut l = cfg.m;
                loop {
                    if l == 0 {
                        break;
                    }
                    positions[l - 1] += 1;
                    if positions[l - 1] < qualifier_sets[l - 1].len() {
                        break;
                    }
                    positions[l - 1] = 0;
                    l -= 1;
                }
                if l == 0 {
                    break;
                }
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;

    let records: Vec<OverlapScanRecord> = per_assignment.into_iter().flatten().collect();
    let summary = ogp_summary(cfg, &records, e_max);
    let csv = ogp_to_csv(cfg.m, p, &records);
    Ok((records, ExperimentArtifacts { csv, summary }))
}

/// Overlap-scan summary; recomputable from the CSV records plus config.
#[must_use]
pub fn ogp_summary(cfg: &ExperimentConfig, records: &[OverlapScanRecord], e_max: f64) -> Value {
    let (n, k, p) = cfg.grid()[0];
    let assignments_total = (cfg.taus.len() as u64).pow(cfg.m as u32);
    let mut histogram: BTreeMap<usize, u64> = (0..=k).map(|a| (a, 0)).collect();
    let mut band_hits: u64 = 0;
    let mut with_tuples: std::collections::BTreeSet<u64> = std::collections::BTreeSet::new();
    let mut per_assignment: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for r in records {
        with_tuples.insert(r.assignment_id);
        let entry = per_assignment.entry(r.assignment_id).or_insert((0, 0));
        entry.0 += 1;
        if r.band_hit {
            band_hits += 1;
            entry.1 += 1;
        }
        for ov in &r.overlaps {
            for &a in &ov.intersections {
                *histogram.get_mut(&a).expect("0 ≤ a ≤ k by construction") += 1;
            }
        }
    }
    let mut histogram_map = JsonMap::new();
    for (a, count) in &histogram {
        histogram_map.insert(a.to_string(), Value::from(*count));
    }
    let per_assignment_entries: Vec<Value> = per_assignment
        .iter()
        .map(|(&id, &(tuples, hits))| {
            let mut entry = JsonMap::new();
            entry.insert("assignment_id".into(), Value::from(id));
            entry.insert("tuples".into(), Value::from(tuples));
            entry.insert("band_hits".into(), Value::from(hits));
            Value::Object(entry)
        })
        .collect();
    let mut root = JsonMap::new();
    root.insert("experiment".into(), Value::from("ogp-scan"));
    root.insert("master_seed".into(), Value::from(cfg.master_seed));
    root.insert("n".into(), Value::from(n as u64));
    root.insert("k".into(), Value::from(k as u64));
    root.insert("p".into(), Value::from(p as u64));
    root.insert("m".into(), Value::from(cfg.m as u64));
    root.insert("gamma".into(), num(cfg.gamma));
    root.insert("nu1".into(), num(cfg.nu1));
    root.insert("nu2".into(), num(cfg.nu2));
    root.insert(
        "taus".into(),
        Value::Array(cfg.taus.iter().map(|&t| num(t)).collect()),
    );
    root.insert("mode".into(), Value::from(cfg.mode.token()));
    // The covariance analysis needs ν1 > 1/2; wider bands are allowed for
    // exploration but flagged.
    root.insert("band_below_half".into(), Value::Bool(cfg.nu1 <= 0.5));
    root.insert("e_max".into(), num(e_max));
    root.insert("threshold_average".into(), num(cfg.gamma * e_max));
    root.insert("assignments_total".into(), Value::from(assignments_total));
    root.insert(
        "assignments_with_tuples".into(),
        Value::from(with_tuples.len() as u64),
    );
    root.insert(
        "assignments_with_empty_qualifier".into(),
        Value::from(assignments_total - with_tuples.len() as u64),
    );
    root.insert("total_tuples".into(), Value::from(records.len() as u64));
    root.insert("total_band_hits".into(), Value::from(band_hits));
    root.insert("overlap_histogram".into(), Value::Object(histogram_map));
    root.insert("per_assignment".into(), Value::Array(per_assignment_entries));
    Value::Object(root)
}

// ===== Tail validation ======================================================

/// Monte-Carlo estimate of `P[hit]` over `samples` draws, split across the
/// fixed chunk grid; `draw` maps a stream to a hit (true/false). The chunk
/// layout — not the thread count — defines the stream, so the estimate is
/// bit-stable under any parallelism.
fn mc_fraction(
    master_seed: u64,
    suite: u64,
    samples: u64,
    draw: impl Fn(&mut CounterStream) -> bool + Sync,
) -> f64 {
    let base = samples / MC_CHUNKS;
    let remainder = samples % MC_CHUNKS;
    let hits: u64 = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let chunk_samples = base + u64::from(chunk < remainder);
            let mut stream = CounterStream::new(master_seed, TAG_MC, &[suite, chunk]);
            let mut hits = 0u64;
            for _ in 0..chunk_samples {
                if draw(&mut stream) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    hits as f64 / samples as f64
}

/// Runs the tail-bound validation suite; see the module docs.
pub fn validate_tail_bounds(
    cfg: &ExperimentConfig,
) -> Result<(Vec<BoundReport>, ExperimentArtifacts)> {
    expect_experiment(cfg, ExperimentName::TailValidate)?;
    let mut reports = Vec::new();

    // Univariate sandwich on the grid x ∈ {0.5, 1.0, …, 8.0}.
    for i in 1..=16 {
        let x = i as f64 * 0.5;
        let tail = gaussian_tail_bounds(x)?;
        reports.push(BoundReport {
            name: "gaussian tail sandwich".to_string(),
            inputs: [("x".to_string(), x)].into(),
            lower: Some(tail.lower),
            upper: Some(tail.upper),
            exact_or_mc: Some(tail.exact),
            satisfied: tail.lower <= tail.exact && tail.exact <= tail.upper,
        });
    }

    // Bivariate joint tail vs the analytic bound, Monte-Carlo.
    let rhos = [0.0, 0.3, 0.5, 0.8];
    let us = [1.0, 1.5, 2.0];
    for (case, (&rho, &u)) in rhos
        .iter()
        .flat_map(|r| us.iter().map(move |u| (r, u)))
        .enumerate()
    {
        let bound = bivariate_tail_upper(rho, u)?;
        let cross = (1.0 - rho * rho).sqrt();
        let empirical = mc_fraction(cfg.master_seed, 10 + case as u64, cfg.mc_samples, |s| {
            let z1 = s.next_normal();
            let z2 = rho * z1 + cross * s.next_normal();
            z1 > u && z2 > u
        });
        let sigma = binomial_sigma(empirical, cfg.mc_samples);
        reports.push(BoundReport {
            name: "bivariate joint tail vs bound".to_string(),
            inputs: [
                ("rho".to_string(), rho),
                ("u".to_string(), u),
                ("samples".to_string(), cfg.mc_samples as f64),
                ("three_sigma".to_string(), 3.0 * sigma),
            ]
            .into(),
            lower: None,
            upper: Some(bound),
            exact_or_mc: Some(empirical),
            satisfied: empirical <= bound + 3.0 * sigma,
        });
    }

    // Multivariate sandwiches: d = 2 identity, d = 3 equicorrelated from
    // the covariance model with zero offsets.
    let mvn_cases: Vec<(&str, DMatrix<f64>, DVector<f64>)> = vec![
        (
            "identity d=2",
            DMatrix::identity(2, 2),
            DVector::from_element(2, 2.0),
        ),
        (
            "equicorrelated d=3",
            build_covariance_model(3, 10, 0.86, 0.9, EtaSource::Zero)?
                .sigma()
                .clone(),
            DVector::from_element(3, 2.0),
        ),
    ];
    for (case, (label, sigma_matrix, t)) in mvn_cases.into_iter().enumerate() {
        let bounds = mvn_tail_bounds(&sigma_matrix, &t)?;
        let d = t.len();
        let chol = Cholesky::new(sigma_matrix).expect("cases are positive definite");
        let l = chol.l();
        let empirical = mc_fraction(cfg.master_seed, 100 + case as u64, cfg.mvn_samples, |s| {
            let z = DVector::from_fn(d, |_, _| s.next_normal());
            let x = &l * z;
            (0..d).all(|i| x[i] > t[i])
        });
        let sigma = binomial_sigma(empirical, cfg.mvn_samples);
        reports.push(BoundReport {
            name: format!("multivariate tail sandwich {label}"),
            inputs: [
                ("d".to_string(), d as f64),
                ("samples".to_string(), cfg.mvn_samples as f64),
                ("three_sigma".to_string(), 3.0 * sigma),
            ]
            .into(),
            lower: Some(bounds.lower),
            upper: Some(bounds.upper),
            exact_or_mc: Some(empirical),
            satisfied: bounds.lower - 3.0 * sigma <= empirical
                && empirical <= bounds.upper + 3.0 * sigma,
        });
    }

    let summary = tail_summary(cfg, &reports);
    let csv = reports_to_csv(&reports);
    Ok((reports, ExperimentArtifacts { csv, summary }))
}

/// Tail-validation summary; recomputable from the CSV reports alone.
#[must_use]
pub fn tail_summary(cfg: &ExperimentConfig, reports: &[BoundReport]) -> Value {
    let count_with = |prefix: &str| -> u64 {
        reports.iter().filter(|r| r.name.starts_with(prefix)).count() as u64
    };
    let mut root = JsonMap::new();
    root.insert("experiment".into(), Value::from("tail-validate"));
    root.insert("master_seed".into(), Value::from(cfg.master_seed));
    root.insert(
        "univariate_points".into(),
        Value::from(count_with("gaussian tail sandwich")),
    );
    root.insert(
        "bivariate_cases".into(),
        Value::from(count_with("bivariate joint tail")),
    );
    root.insert(
        "multivariate_cases".into(),
        Value::from(count_with("multivariate tail sandwich")),
    );
    root.insert(
        "all_satisfied".into(),
        Value::Bool(reports.iter().all(|r| r.satisfied)),
    );
    root.insert(
        "unsatisfied".into(),
        Value::Array(
            reports
                .iter()
                .filter(|r| !r.satisfied)
                .map(|r| Value::from(r.name.clone()))
                .collect(),
        ),
    );
    Value::Object(root)
}

// ===== Unified entry ========================================================

/// Runs whichever experiment the config names; the CLI entry point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentArtifacts> {
    Ok(match cfg.experiment {
        ExperimentName::GroundState => run_ground_state(cfg)?.1,
        ExperimentName::IgptRatio => run_igpt_ratio(cfg)?.1,
        ExperimentName::Concentration => run_concentration(cfg)?.1,
        ExperimentName::OgpScan => ogp_scan(cfg)?.1,
        ExperimentName::TailValidate => validate_tail_bounds(cfg)?.1,
    })
}
