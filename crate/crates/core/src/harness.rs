//! Seeded experiments: random Cayley graph expansion rates and walk survival
//! frequencies against the exact oracle and the sieve bounds.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::blocks::{kappa, DeltaPolicy, GeneratorOptions, GeneratorSystem, QuotientOrder, StepWeighting};
use crate::bounds::{
    ap_bound, compute_eta, corollary1_bound, corollary2_bound, grid_bound, sieve_bound, EtaMode, SieveParams,
    TheoremBound,
};
use crate::error::{Result, SieveError};
use crate::instances::{DensityMode, Instance, InstanceSpec, Partition};
use crate::labeling::Labeling;
use crate::rng;
use crate::spectral::{cayley_spectrum, is_delta_expander, is_strict_delta_expander, AbelianGroup, LoopConvention};
use crate::walk::{exact_block_distribution, survival_from_distribution, BlockDetector, FlatWalker, SiteLayout, WalkConfig};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Wilson score interval at 99%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_99 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Expansion failure rate of random Cayley graphs with `kappa` generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlonRoichmanConfig {
    pub moduli: Vec<u32>,
    pub b: f64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub kappa_override: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlonRoichmanReport {
    pub order: usize,
    pub kappa: u64,
    pub trials: u64,
    /// Draws whose graph is not a `delta`-expander with `-1` excluded.
    pub failures: u64,
    /// Same with every nontrivial eigenvalue modulus bounded.
    pub strict_failures: u64,
    pub failure_fraction: f64,
    /// `e^{-b}`.
    pub target: f64,
    /// `P(Bin(trials, e^{-b}) >= failures)`.
    pub p_value: f64,
}

pub fn run_alon_roichman(cfg: &AlonRoichmanConfig) -> Result<AlonRoichmanReport> {
    let group = AbelianGroup::new(cfg.moduli.clone())?;
    let order = group.order();
    if order > crate::spectral::DEFAULT_CHARACTER_CAP {
        return Err(SieveError::capacity("group order", order, crate::spectral::DEFAULT_CHARACTER_CAP));
    }
    let kappa = match cfg.kappa_override {
        Some(k) => k,
        None => kappa(QuotientOrder::exact(order as u32), cfg.b, cfg.delta, DeltaPolicy::Strict)?,
    };
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::derive(cfg.seed, rng::DOMAIN_ALON_ROICHMAN, trial);
            let gens: Vec<usize> = (0..kappa).map(|_| rng.random_range(0..order)).collect();
            let report = cayley_spectrum(&group, &gens, LoopConvention::Plain, usize::MAX)?;
            Ok((
                !is_delta_expander(&report, cfg.delta),
                !is_strict_delta_expander(&report, cfg.delta),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = outcomes.iter().filter(|o| o.0).count() as u64;
    let strict_failures = outcomes.iter().filter(|o| o.1).count() as u64;
    let target = (-cfg.b).exp();
    let p_value = if failures == 0 {
        1.0
    } else {
        let bin = Binomial::new(target, cfg.trials).map_err(|e| SieveError::Parameter(e.to_string()))?;
        1.0 - bin.cdf(failures - 1)
    };
    Ok(AlonRoichmanReport {
        order,
        kappa,
        trials: cfg.trials,
        failures,
        strict_failures,
        failure_fraction: if cfg.trials == 0 { 0.0 } else { failures as f64 / cfg.trials as f64 },
        target,
        p_value,
    })
}

/// `b_l` as a function of the block label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BRule {
    /// `b_l = offset + slope l`.
    Linear { offset: f64, slope: f64 },
    Explicit { values: Vec<f64> },
}

impl Default for BRule {
    fn default() -> Self {
        BRule::Linear {
            offset: 0.0,
            slope: 1.0,
        }
    }
}

impl BRule {
    pub fn values(&self, r: usize) -> Result<Vec<f64>> {
        match self {
            BRule::Linear { offset, slope } => Ok((1..=r).map(|l| offset + slope * l as f64).collect()),
            BRule::Explicit { values } if values.len() == r => Ok(values.clone()),
            BRule::Explicit { values } => Err(SieveError::Parameter(format!("{} values of b for {r} blocks", values.len()))),
        }
    }
}

/// Which blocks are inspected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum WindowRule {
    /// `[1, R]`.
    #[default]
    All,
    /// `[L1, 2 L1]`.
    Double { l1: f64 },
    Explicit { l1: f64, l2: f64 },
}

impl WindowRule {
    fn bounds(self, r: usize) -> (f64, f64) {
        match self {
            WindowRule::All => (1.0, r as f64),
            WindowRule::Double { l1 } => (l1, 2.0 * l1),
            WindowRule::Explicit { l1, l2 } => (l1, l2),
        }
    }
}

/// Flat, serializable description of a sieve experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub delta: f64,
    #[serde(default)]
    pub b_rule: BRule,
    pub seed: u64,
    pub k_grid: Vec<u64>,
    pub trials: u64,
    #[serde(default)]
    pub window: WindowRule,
    /// Mode used for the `vacuous` flag.
    #[serde(default)]
    pub eta_mode: EtaMode,
    /// Start point in labeling text form; the identity when absent.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub weighting: StepWeighting,
    #[serde(default)]
    pub kappa_override: Option<Vec<u64>>,
    #[serde(default)]
    pub policy: DeltaPolicy,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Result file, written after the run; `.json` selects JSON, anything else CSV.
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(instance: InstanceSpec, delta: f64, seed: u64, k_grid: Vec<u64>, trials: u64) -> Self {
        ExperimentConfig {
            instance,
            delta,
            b_rule: BRule::default(),
            seed,
            k_grid,
            trials,
            window: WindowRule::default(),
            eta_mode: EtaMode::default(),
            start: None,
            weighting: StepWeighting::default(),
            kappa_override: None,
            policy: DeltaPolicy::default(),
            threads: None,
            output: None,
        }
    }
}

/// One output line per `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: u64,
    pub trials: u64,
    /// Fraction of trials in which no inspected block hits its target set.
    pub freq: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exact: Option<f64>,
    pub bound_proof: Option<f64>,
    pub bound_stated: Option<f64>,
    pub vacuous: bool,
    /// The inspected window satisfies the hypotheses of the sieve inequality.
    pub window_ok: bool,
    /// Fraction of trials whose full labeling contains no target structure at all.
    pub instance_freq: f64,
    /// Theorem-level bound for the instance, when one applies.
    pub bound_theorem: Option<f64>,
    pub theorem_window_ok: bool,
}

/// Column order of CSV output.
pub const COLUMNS: [&str; 13] = [
    "k",
    "trials",
    "freq",
    "ci_lo",
    "ci_hi",
    "exact",
    "bound_proof",
    "bound_stated",
    "vacuous",
    "window_ok",
    "instance_freq",
    "bound_theorem",
    "theorem_window_ok",
];

/// Everything a sieve experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub system: Arc<GeneratorSystem>,
    pub params_proof: Option<SieveParams>,
    pub params_stated: Option<SieveParams>,
    /// Inspected block labels.
    pub window: Vec<u32>,
}

/// Theorem-level bound for an instance, when one applies.
pub fn theorem_bound(spec: &InstanceSpec, eta: f64, k: u64) -> Option<TheoremBound> {
    match spec {
        InstanceSpec::Coloring { r, c, partition, .. } => match partition {
            Partition::Triples => Some(corollary1_bound(*c, eta, k, *r)),
            Partition::Triangular => Some(corollary2_bound(*c, eta, k, *r)),
            Partition::Custom(_) => None,
        },
        InstanceSpec::Grid { r, .. } => Some(grid_bound(eta, k, *r)),
        InstanceSpec::Ap { s, c, r, .. } => Some(ap_bound(*c, *s, eta, k, *r)),
    }
}

pub fn run_sieve_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let out = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SieveError::Parameter(e.to_string()))?
            .install(|| run_sieve_inner(cfg)),
        None => run_sieve_inner(cfg),
    }?;
    if let Some(path) = &cfg.output {
        emit_results(&out.rows, OutputFormat::for_path(path), path)?;
    }
    Ok(out)
}

fn run_sieve_inner(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.k_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(SieveError::Parameter("k grid must be nondecreasing".into()));
    }
    let instance = Instance::build(&cfg.instance)?;
    let bs = instance.system().clone();
    let r = bs.blocks().len();
    let b = cfg.b_rule.values(r)?;
    let options = GeneratorOptions {
        policy: cfg.policy,
        weighting: cfg.weighting,
        kappa_override: cfg.kappa_override.clone(),
    };
    let gs = Arc::new(GeneratorSystem::build(bs.clone(), cfg.delta, &b, cfg.seed, &options)?);
    let mut walk_cfg = WalkConfig::new(gs.clone(), cfg.seed)?;
    if let Some(text) = &cfg.start {
        walk_cfg = walk_cfg.with_start(Labeling::parse(text, bs.ground())?)?;
    }

    let (l1, l2) = cfg.window.bounds(r);
    let window_params = |mode| -> Option<SieveParams> {
        compute_eta(&gs, cfg.delta, mode).ok()?.with_window(l1, l2).ok()
    };
    let params_proof = window_params(EtaMode::ProofFaithful);
    let params_stated = window_params(EtaMode::AsStated);
    let window_ok = l1 <= l2 && l1.ceil() >= 1.0 && (l2.floor() as usize) <= r && l1.ceil() <= l2.floor();
    if !window_ok {
        return Err(SieveError::Parameter(format!("window [{l1}, {l2}] selects no blocks of 1..={r}")));
    }
    let labels: Vec<u32> = (l1.ceil() as u32..=l2.floor() as u32).collect();
    let densities: Vec<f64> = (1..=r as u32)
        .map(|l| instance.theta_density(l, DensityMode::LowerBound))
        .collect::<Result<_>>()?;
    let ln_order = bs.quotient_order(l2.floor() as u32)?.ln();

    // Monte Carlo over the full labeling; block and instance events per k.
    let walker = FlatWalker::new(&walk_cfg, SiteLayout::full(&gs));
    let block_sites: Vec<(u32, &[u32])> = labels
        .iter()
        .map(|&l| Ok((l, bs.block(l)?.sites())))
        .collect::<Result<_>>()?;
    let nk = cfg.k_grid.len();
    let counts = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut block_ok = vec![0u64; nk];
            let mut inst_ok = vec![0u64; nk];
            let mut idx = 0;
            let mut coords = Vec::new();
            walker.run(trial, &cfg.k_grid, |_, state| {
                let survived = block_sites.iter().all(|&(l, sites)| {
                    coords.clear();
                    coords.extend(sites.iter().map(|&s| state[s as usize]));
                    !instance.in_theta(l, &coords)
                });
                block_ok[idx] += u64::from(survived);
                inst_ok[idx] += u64::from(!instance.detect_anywhere_dense(state));
                idx += 1;
            })?;
            Ok::<_, SieveError>((block_ok, inst_ok))
        })
        .try_reduce(
            || (vec![0u64; nk], vec![0u64; nk]),
            |mut a, b| {
                for i in 0..nk {
                    a.0[i] += b.0[i];
                    a.1[i] += b.1[i];
                }
                Ok(a)
            },
        )?;

    let mut rows = Vec::with_capacity(nk);
    for (i, &k) in cfg.k_grid.iter().enumerate() {
        let survived = counts.0[i];
        let (ci_lo, ci_hi) = wilson_interval(survived, cfg.trials);
        let exact = match exact_block_distribution(&walk_cfg, &labels, k) {
            Ok(dist) => Some(survival_from_distribution(&dist, &instance)),
            Err(SieveError::Capacity { .. }) => None,
            Err(e) => return Err(e),
        };
        let bound_of = |p: &Option<SieveParams>| -> Result<Option<f64>> {
            p.as_ref()
                .map(|p| sieve_bound(p, &densities, ln_order, k).map(|rep| rep.value()))
                .transpose()
        };
        let bound_proof = bound_of(&params_proof)?;
        let bound_stated = bound_of(&params_stated)?;
        let primary = match cfg.eta_mode {
            EtaMode::ProofFaithful => bound_proof,
            EtaMode::AsStated => bound_stated,
        };
        let primary_params = match cfg.eta_mode {
            EtaMode::ProofFaithful => &params_proof,
            EtaMode::AsStated => &params_stated,
        };
        let theorem = primary_params.as_ref().and_then(|p| theorem_bound(&cfg.instance, p.eta, k));
        let frac = |n: u64| if cfg.trials == 0 { 0.0 } else { n as f64 / cfg.trials as f64 };
        rows.push(ResultRow {
            k,
            trials: cfg.trials,
            freq: frac(survived),
            ci_lo,
            ci_hi,
            exact,
            bound_proof,
            bound_stated,
            vacuous: primary.is_none_or(|v| v >= 1.0),
            window_ok,
            instance_freq: frac(counts.1[i]),
            bound_theorem: theorem.map(|t| t.value),
            theorem_window_ok: theorem.is_some_and(|t| t.window_ok),
        });
    }
    Ok(ExperimentOutput {
        rows,
        system: gs,
        params_proof,
        params_stated,
        window: labels,
    })
}

/// Fails when a proof-faithful bound below 1 is beaten: by the exact survival
/// probability, or by the whole 99% interval of the empirical frequency.
/// As-stated bounds are never checked.
pub fn check_proof_faithful(rows: &[ResultRow]) -> Result<()> {
    for row in rows {
        let Some(bound) = row.bound_proof else { continue };
        if !row.window_ok || bound >= 1.0 {
            continue;
        }
        if let Some(exact) = row.exact {
            if exact > bound + 1e-9 {
                return Err(SieveError::Invariant(format!(
                    "k = {}: exact survival {exact} exceeds the bound {bound}",
                    row.k
                )));
            }
        }
        if row.trials > 0 && row.ci_lo > bound {
            return Err(SieveError::Invariant(format!(
                "k = {}: survival frequency {} (99% interval from {}) exceeds the bound {bound}",
                row.k, row.freq, row.ci_lo
            )));
        }
    }
    Ok(())
}

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = SieveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(SieveError::Parse(format!("unknown format {s:?}"))),
        }
    }
}

/// Serializes rows with a fixed header, even when empty.
pub fn rows_to_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(COLUMNS)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| SieveError::Csv(e.into()))?;
    Ok(())
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn rows_to_json(rows: &[ResultRow]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}

pub fn rows_from_json(text: &str) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_str(text)?)
}

/// Writes rows to `path`.
pub fn emit_results(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| SieveError::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| SieveError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => rows_to_csv(rows, &mut out)?,
        OutputFormat::Json => {
            out.write_all(rows_to_json(rows)?.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| SieveError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| SieveError::io(path, e))
}
