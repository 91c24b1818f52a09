use std::path::PathBuf;

use cayley_sieve::bounds::{compute_eta, sieve_bound, EtaMode};
use cayley_sieve::harness::{
    check_proof_faithful, emit_results, rows_to_csv, rows_to_json, run_alon_roichman, run_sieve_experiment, theorem_bound,
    wilson_interval, AlonRoichmanConfig, ExperimentConfig, OutputFormat, WindowRule,
};
use cayley_sieve::instances::DensityMode;
use cayley_sieve::io::{read_json, write_json as write_doc, BlockSystemDoc, GeneratorSystemDoc};
use cayley_sieve::spectral::{
    block_cayley_data, cayley_spectrum, is_delta_expander, AbelianGroup, LoopConvention, SpectrumReport,
    DEFAULT_CHARACTER_CAP,
};
use cayley_sieve::walk::{BlockDetector, FlatWalker, SiteLayout, WalkConfig};
use cayley_sieve::{Instance, Labeling, Result, SieveError};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{GeneratorArgs, InstanceArgs, OutArgs, SystemArgs, DEFAULT_DELTA};
use crate::output::{default_path, write_csv, write_json, write_records, write_with};

#[derive(Debug, Args)]
pub struct InstanceCmd {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Also sample the generating set and write a generator system document.
    #[arg(long)]
    pub generators: bool,
    #[command(flatten)]
    pub generator_args: GeneratorArgs,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn instance(cmd: &InstanceCmd) -> Result<()> {
    let spec = cmd.instance.spec()?;
    let inst = Instance::build(&spec)?;
    let out = cmd.out.as_deref();
    if cmd.generators {
        let gs = cmd.generator_args.build(&inst)?;
        log::info!("kappa per block: {:?}, |S| = {}", gs.kappa(), gs.elements().len());
        write_json(&GeneratorSystemDoc::from_system(&gs, Some(spec)), out)
    } else {
        write_json(&BlockSystemDoc::from_system(inst.system(), Some(spec)), out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoopArg {
    Plain,
    HalfLoop,
    FullLoop,
}

impl From<LoopArg> for LoopConvention {
    fn from(l: LoopArg) -> Self {
        match l {
            LoopArg::Plain => LoopConvention::Plain,
            LoopArg::HalfLoop => LoopConvention::HalfLoop,
            LoopArg::FullLoop => LoopConvention::FullLoop,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpectrumCmd {
    /// Moduli of an explicit group Z/m_1 x ... x Z/m_d.
    #[arg(long, value_delimiter = ',', requires = "gens", conflicts_with_all = ["system", "instance", "kind"])]
    pub moduli: Option<Vec<u32>>,
    /// Generators as coordinate tuples, e.g. "1,0;0,1".
    #[arg(long, requires = "moduli")]
    pub gens: Option<String>,
    /// Block of a generator system; every block when absent.
    #[arg(long)]
    pub block: Option<u32>,
    #[arg(long, value_enum, default_value = "plain")]
    pub loops: LoopArg,
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct EigenRow {
    block: Option<u32>,
    character: usize,
    eigenvalue: f64,
    modulus: f64,
}

#[derive(Serialize)]
struct SpectrumSummary {
    block: Option<u32>,
    order: usize,
    degree: f64,
    symmetric_size: usize,
    second_eigenvalue: f64,
    paper_gap: f64,
    strict_gap: f64,
    bipartite: bool,
    connected: bool,
    delta: f64,
    delta_expander: bool,
    eigenvalues: Vec<f64>,
}

fn parse_gens(text: &str, group: &AbelianGroup) -> Result<Vec<usize>> {
    text.split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| {
            let coords = g
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|e| SieveError::Parse(format!("generator {g:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if coords.len() != group.moduli().len() {
                return Err(SieveError::Parse(format!(
                    "generator {g:?} has {} coordinates for {} factors",
                    coords.len(),
                    group.moduli().len()
                )));
            }
            let reduced: Vec<u32> = coords.iter().zip(group.moduli()).map(|(x, m)| x % m).collect();
            Ok(group.index(&reduced))
        })
        .collect()
}

pub fn spectrum(cmd: &SpectrumCmd) -> Result<()> {
    let loops = cmd.loops.into();
    let mut reports: Vec<(Option<u32>, SpectrumReport)> = Vec::new();
    let delta;
    if let Some(moduli) = &cmd.moduli {
        let group = AbelianGroup::new(moduli.clone())?;
        let gens = parse_gens(cmd.gens.as_deref().unwrap_or_default(), &group)?;
        reports.push((None, cayley_spectrum(&group, &gens, loops, DEFAULT_CHARACTER_CAP)?));
        delta = cmd.system.generators.delta.unwrap_or(DEFAULT_DELTA);
    } else {
        let (_, gs) = cmd.system.load()?;
        delta = cmd.system.generators.delta.unwrap_or(gs.delta());
        let labels: Vec<u32> = match cmd.block {
            Some(l) => vec![l],
            None => (1..=gs.block_system().blocks().len() as u32).collect(),
        };
        for l in labels {
            let (group, gens) = block_cayley_data(&gs, l)?;
            if group.order() > DEFAULT_CHARACTER_CAP {
                return Err(SieveError::Capacity {
                    what: format!("spectrum of block {l}"),
                    needed: group.order().to_string(),
                    cap: DEFAULT_CHARACTER_CAP.to_string(),
                });
            }
            reports.push((Some(l), cayley_spectrum(&group, &gens, loops, DEFAULT_CHARACTER_CAP)?));
        }
    }

    let summaries: Vec<SpectrumSummary> = reports
        .into_iter()
        .map(|(block, rep)| SpectrumSummary {
            block,
            order: rep.eigenvalues.len(),
            degree: rep.degree,
            symmetric_size: rep.symmetric_size,
            second_eigenvalue: rep.second_eigenvalue(),
            paper_gap: rep.paper_gap,
            strict_gap: rep.strict_gap,
            bipartite: rep.bipartite,
            connected: rep.connected,
            delta,
            delta_expander: is_delta_expander(&rep, delta),
            eigenvalues: rep.eigenvalues,
        })
        .collect();
    match cmd.out.format(OutputFormat::Csv) {
        OutputFormat::Json => write_json(&summaries, cmd.out.path()),
        OutputFormat::Csv => {
            let rows: Vec<EigenRow> = summaries
                .iter()
                .flat_map(|s| {
                    s.eigenvalues.iter().enumerate().map(|(character, &eigenvalue)| EigenRow {
                        block: s.block,
                        character,
                        eigenvalue,
                        modulus: eigenvalue.abs(),
                    })
                })
                .collect();
            write_csv(&["block", "character", "eigenvalue", "modulus"], &rows, cmd.out.path())?;
            for s in &summaries {
                let name = s.block.map_or_else(|| "group".to_string(), |l| format!("block {l}"));
                eprintln!(
                    "{name}: order {}, paper_gap {}, strict_gap {}, bipartite {}, connected {}, {}-expander {}",
                    s.order, s.paper_gap, s.strict_gap, s.bipartite, s.connected, s.delta, s.delta_expander
                );
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityArg {
    Exact,
    LowerBound,
}

impl From<DensityArg> for DensityMode {
    fn from(d: DensityArg) -> Self {
        match d {
            DensityArg::Exact => DensityMode::Exact,
            DensityArg::LowerBound => DensityMode::LowerBound,
        }
    }
}

impl DensityArg {
    fn name(self) -> &'static str {
        match self {
            DensityArg::Exact => "exact",
            DensityArg::LowerBound => "lower-bound",
        }
    }
}

#[derive(Debug, Args)]
pub struct DensityCmd {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "lower-bound")]
    pub mode: DensityArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct DensityRow {
    block: u32,
    sites: usize,
    density: f64,
    mode: &'static str,
}

pub fn density(cmd: &DensityCmd) -> Result<()> {
    let inst = Instance::build(&cmd.instance.spec()?)?;
    let rows = (1..=inst.system().blocks().len() as u32)
        .map(|l| {
            Ok(DensityRow {
                block: l,
                sites: inst.system().block(l)?.len(),
                density: inst.theta_density(l, cmd.mode.into())?,
                mode: cmd.mode.name(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_records(
        &["block", "sites", "density", "mode"],
        &rows,
        cmd.out.format(OutputFormat::Csv),
        cmd.out.path(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EtaArg {
    ProofFaithful,
    AsStated,
    Both,
}

impl EtaArg {
    fn modes(self) -> Vec<EtaMode> {
        match self {
            EtaArg::ProofFaithful => vec![EtaMode::ProofFaithful],
            EtaArg::AsStated => vec![EtaMode::AsStated],
            EtaArg::Both => vec![EtaMode::ProofFaithful, EtaMode::AsStated],
        }
    }
}

/// `[L1, L2]` from the command line: everything, `[L1, 2 L1]`, or explicit.
#[derive(Debug, Clone, Default, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub l1: Option<f64>,
    #[arg(long, requires = "l1")]
    pub l2: Option<f64>,
}

impl WindowArgs {
    fn rule(&self) -> Option<WindowRule> {
        match (self.l1, self.l2) {
            (Some(l1), Some(l2)) => Some(WindowRule::Explicit { l1, l2 }),
            (Some(l1), None) => Some(WindowRule::Double { l1 }),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundCmd {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
    #[arg(long, value_enum, default_value = "both")]
    pub eta_mode: EtaArg,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Densities fed into the bound.
    #[arg(long, value_enum, default_value = "lower-bound")]
    pub density: DensityArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct BoundRow {
    k: u64,
    mode: String,
    eta: f64,
    /// Sum of `e^{-b_l}`.
    term1: f64,
    /// Inverse density sum.
    term2: f64,
    /// Exponential tail over the density sum.
    term3: f64,
    /// Unclamped.
    total: f64,
    vacuous: bool,
    window_ok: bool,
    theorem: Option<f64>,
    theorem_window_ok: bool,
}

const BOUND_COLUMNS: [&str; 11] = [
    "k",
    "mode",
    "eta",
    "term1",
    "term2",
    "term3",
    "total",
    "vacuous",
    "window_ok",
    "theorem",
    "theorem_window_ok",
];

fn window_bounds(rule: Option<WindowRule>, r: usize) -> (f64, f64) {
    match rule {
        Some(WindowRule::Explicit { l1, l2 }) => (l1, l2),
        Some(WindowRule::Double { l1 }) => (l1, 2.0 * l1),
        _ => (1.0, r as f64),
    }
}

fn require_instance(inst: Option<Instance>) -> Result<Instance> {
    inst.ok_or_else(|| SieveError::Structural("the system document records no instance, which is needed here".into()))
}

pub fn bound(cmd: &BoundCmd) -> Result<()> {
    let (inst, gs) = cmd.system.load()?;
    let inst = require_instance(inst)?;
    let bs = gs.block_system();
    let r = bs.blocks().len();
    let (l1, l2) = window_bounds(cmd.window.rule(), r);
    if l1 < 1.0 || l2 < l1 || l2.floor() as usize > r || l1.ceil() > l2.floor() {
        return Err(SieveError::Parameter(format!("window [{l1}, {l2}] selects no blocks of 1..={r}")));
    }
    let densities = (1..=r as u32)
        .map(|l| inst.theta_density(l, cmd.density.into()))
        .collect::<Result<Vec<_>>>()?;
    let ln_order = bs.quotient_order(l2.floor() as u32)?.ln();
    let modes = cmd.eta_mode.modes();
    let mut rows = Vec::new();
    for &mode in &modes {
        let params = match compute_eta(&gs, gs.delta(), mode).and_then(|p| p.with_window(l1, l2)) {
            Ok(p) => p,
            Err(e) if modes.len() > 1 => {
                log::warn!("{mode} mode skipped: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        for &k in &cmd.k {
            let rep = sieve_bound(&params, &densities, ln_order, k)?;
            let theorem = theorem_bound(inst.spec(), params.eta, k);
            rows.push(BoundRow {
                k,
                mode: mode.to_string(),
                eta: params.eta,
                term1: rep.term_error_sum(),
                term2: rep.inverse_density(),
                term3: rep.tail_term(),
                total: rep.value(),
                vacuous: rep.vacuous,
                window_ok: true,
                theorem: theorem.map(|t| t.value),
                theorem_window_ok: theorem.is_some_and(|t| t.window_ok),
            });
        }
    }
    write_records(
        &BOUND_COLUMNS,
        &rows,
        cmd.out.format(OutputFormat::Csv),
        cmd.out.path(),
    )
}

#[derive(Debug, Args)]
pub struct WalkCmd {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Observation times, nondecreasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Start point in labeling text form, e.g. "c=3; e1-2:1"; the identity when absent.
    #[arg(long)]
    pub start: Option<String>,
    /// One row per k with the survival frequency instead of one row per trial.
    #[arg(long)]
    pub aggregate: bool,
    /// Include the labeling X_k in per-trial rows.
    #[arg(long, conflicts_with = "aggregate")]
    pub labelings: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

struct Observation {
    k: u64,
    hits: Vec<bool>,
    instance_hit: bool,
    labeling: Option<String>,
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    trial: u64,
    k: u64,
    survived: bool,
    instance_hit: bool,
    hits: &'a [bool],
    #[serde(skip_serializing_if = "Option::is_none")]
    labeling: Option<&'a str>,
}

#[derive(Serialize)]
struct WalkSummary {
    k: u64,
    trials: u64,
    freq: f64,
    ci_lo: f64,
    ci_hi: f64,
    instance_freq: f64,
}

pub fn walk(cmd: &WalkCmd) -> Result<()> {
    let (inst, gs) = cmd.system.load()?;
    let inst = require_instance(inst)?;
    let bs = gs.block_system().clone();
    let seed = cmd.system.generators.seed.unwrap_or(gs.seed());
    let mut cfg = WalkConfig::new(gs.clone(), seed)?;
    if let Some(text) = &cmd.start {
        cfg = cfg.with_start(Labeling::parse(text, bs.ground())?)?;
    }
    let walker = FlatWalker::new(&cfg, SiteLayout::full(&gs));
    let ground = bs.ground();
    let c = bs.modulus();
    let observe = |trial: u64| -> Result<Vec<Observation>> {
        let mut obs = Vec::with_capacity(cmd.k.len());
        let mut coords = Vec::new();
        let mut failure = None;
        walker.run(trial, &cmd.k, |k, state| {
            let hits = bs
                .blocks()
                .iter()
                .map(|b| {
                    coords.clear();
                    coords.extend(b.sites().iter().map(|&s| state[s as usize]));
                    inst.in_theta(b.label(), &coords)
                })
                .collect();
            let labeling = if cmd.labelings {
                match ground.labeling(c, state.iter().enumerate().map(|(i, &v)| (i as u32, v))) {
                    Ok(f) => Some(f.to_text(ground)),
                    Err(e) => {
                        failure.get_or_insert(e);
                        None
                    }
                }
            } else {
                None
            };
            obs.push(Observation {
                k,
                hits,
                instance_hit: inst.detect_anywhere_dense(state),
                labeling,
            });
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(obs),
        }
    };
    let format = cmd.out.format(OutputFormat::Csv);
    let path = cmd.out.path();

    if cmd.aggregate {
        let nk = cmd.k.len();
        let (survived, clean) = (0..cmd.trials)
            .into_par_iter()
            .map(|t| {
                let obs = observe(t)?;
                Ok::<_, SieveError>((
                    obs.iter().map(|o| u64::from(!o.hits.contains(&true))).collect::<Vec<_>>(),
                    obs.iter().map(|o| u64::from(!o.instance_hit)).collect::<Vec<_>>(),
                ))
            })
            .try_reduce(
                || (vec![0; nk], vec![0; nk]),
                |mut a, b| {
                    for i in 0..nk {
                        a.0[i] += b.0[i];
                        a.1[i] += b.1[i];
                    }
                    Ok(a)
                },
            )?;
        let frac = |n: u64| if cmd.trials == 0 { 0.0 } else { n as f64 / cmd.trials as f64 };
        let rows: Vec<WalkSummary> = cmd
            .k
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let (ci_lo, ci_hi) = wilson_interval(survived[i], cmd.trials);
                WalkSummary {
                    k,
                    trials: cmd.trials,
                    freq: frac(survived[i]),
                    ci_lo,
                    ci_hi,
                    instance_freq: frac(clean[i]),
                }
            })
            .collect();
        return write_records(&["k", "trials", "freq", "ci_lo", "ci_hi", "instance_freq"], &rows, format, path);
    }

    let trials = (0..cmd.trials).into_par_iter().map(observe).collect::<Result<Vec<_>>>()?;
    let records: Vec<TrialRecord> = trials
        .iter()
        .enumerate()
        .flat_map(|(t, obs)| {
            obs.iter().map(move |o| TrialRecord {
                trial: t as u64,
                k: o.k,
                survived: !o.hits.contains(&true),
                instance_hit: o.instance_hit,
                hits: &o.hits,
                labeling: o.labeling.as_deref(),
            })
        })
        .collect();
    match format {
        OutputFormat::Json => write_json(&records, path),
        OutputFormat::Csv => {
            let mut header: Vec<String> = ["trial", "k", "survived", "instance_hit"].map(String::from).to_vec();
            header.extend(bs.blocks().iter().map(|b| format!("block_{}", b.label())));
            if cmd.labelings {
                header.push("labeling".into());
            }
            write_with(path, |out| {
                let mut wtr = csv::Writer::from_writer(out);
                wtr.write_record(&header)?;
                for rec in &records {
                    let mut fields = vec![
                        rec.trial.to_string(),
                        rec.k.to_string(),
                        rec.survived.to_string(),
                        rec.instance_hit.to_string(),
                    ];
                    fields.extend(rec.hits.iter().map(bool::to_string));
                    fields.extend(rec.labeling.map(str::to_string));
                    wtr.write_record(&fields)?;
                }
                wtr.flush().map_err(|e| SieveError::io(path.map_or_else(|| "<stdout>".into(), PathBuf::from), e))
            })
        }
    }
}

#[derive(Debug, Args)]
pub struct AlonRoichmanCmd {
    /// Group Z/m_1 x ... x Z/m_d.
    #[arg(long, value_delimiter = ',', required = true)]
    pub moduli: Vec<u32>,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator count; computed from the group order, b and delta when absent.
    #[arg(long)]
    pub kappa: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn alon_roichman(cmd: &AlonRoichmanCmd) -> Result<()> {
    let cfg = AlonRoichmanConfig {
        moduli: cmd.moduli.clone(),
        b: cmd.b,
        delta: cmd.delta,
        trials: cmd.trials,
        seed: cmd.seed,
        kappa_override: cmd.kappa,
    };
    let report = run_alon_roichman(&cfg)?;
    log::info!(
        "{} of {} draws with {} generators fail to expand (target {})",
        report.failures,
        report.trials,
        report.kappa,
        report.target
    );
    let format = cmd.out.format(OutputFormat::Json);
    let path = match cmd.out.path() {
        Some(p) => Some(p.to_path_buf()),
        None if cmd.out.to_stdout() => None,
        None => default_path(&format!("alon-roichman-{}", cmd.seed), format),
    };
    match format {
        OutputFormat::Json => write_json(&report, path.as_deref()),
        OutputFormat::Csv => write_with(path.as_deref(), |out| {
            let mut wtr = csv::Writer::from_writer(out);
            wtr.serialize(&report)?;
            wtr.flush().map_err(|e| SieveError::io(path.clone().unwrap_or_else(|| "<stdout>".into()), e))
        }),
    }
}

#[derive(Debug, Args)]
pub struct ExperimentCmd {
    /// Experiment config JSON; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub generators: GeneratorArgs,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Mode that sets the vacuous flag.
    #[arg(long, value_parser = parse_eta_mode)]
    pub eta_mode: Option<EtaMode>,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub start: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Writes the resolved config, for rerunning the same experiment.
    #[arg(long, value_name = "PATH")]
    pub save_config: Option<PathBuf>,
}

fn parse_eta_mode(s: &str) -> std::result::Result<EtaMode, String> {
    s.parse().map_err(|e: SieveError| e.to_string())
}

pub const DEFAULT_TRIALS: u64 = 1000;

impl ExperimentCmd {
    pub fn resolve(&self, threads: Option<usize>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_json::<ExperimentConfig>(path)?,
            None => {
                let k = self
                    .k
                    .clone()
                    .ok_or_else(|| SieveError::Parameter("--k is required without --config".into()))?;
                ExperimentConfig::new(
                    self.instance.spec()?,
                    DEFAULT_DELTA,
                    0,
                    k,
                    self.trials.unwrap_or(DEFAULT_TRIALS),
                )
            }
        };
        if self.config.is_some() && self.instance.given() {
            cfg.instance = self.instance.spec()?;
        }
        let g = &self.generators;
        if let Some(v) = g.delta {
            cfg.delta = v;
        }
        if let Some(v) = g.seed {
            cfg.seed = v;
        }
        if let Some(rule) = g.b_rule() {
            cfg.b_rule = rule;
        }
        if let Some(v) = &g.kappa {
            cfg.kappa_override = Some(v.clone());
        }
        if let Some(v) = g.weighting {
            cfg.weighting = v.into();
        }
        if let Some(v) = g.policy {
            cfg.policy = v.into();
        }
        if let Some(v) = &self.k {
            cfg.k_grid = v.clone();
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.eta_mode {
            cfg.eta_mode = v;
        }
        if let Some(rule) = self.window.rule() {
            cfg.window = rule;
        }
        if let Some(v) = &self.start {
            cfg.start = Some(v.clone());
        }
        if threads.is_some() {
            cfg.threads = threads;
        }
        if let Some(path) = self.out.path() {
            cfg.output = Some(path.to_path_buf());
        } else if self.out.to_stdout() {
            cfg.output = None;
        } else if cfg.output.is_none() {
            let format = self.out.format(OutputFormat::Csv);
            cfg.output = default_path(&format!("experiment-{}", cfg.seed), format);
        }
        Ok(cfg)
    }
}

pub fn experiment(cmd: &ExperimentCmd, threads: Option<usize>) -> Result<()> {
    let mut cfg = cmd.resolve(threads)?;
    if let Some(path) = &cmd.save_config {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| SieveError::io(dir, e))?;
        }
        write_doc(&cfg, path)?;
    }
    // Written here rather than by the runner so that --format wins over the extension.
    let output = cfg.output.take();
    let out = run_sieve_experiment(&cfg)?;
    let format = match (cmd.out.format, &output) {
        (Some(f), _) => f.into(),
        (None, Some(path)) => OutputFormat::for_path(path),
        (None, None) => OutputFormat::Csv,
    };
    match &output {
        Some(path) => {
            emit_results(&out.rows, format, path)?;
            log::info!("wrote {}", path.display());
        }
        None => match format {
            OutputFormat::Csv => {
                write_with(None, |w| rows_to_csv(&out.rows, w))?;
            }
            OutputFormat::Json => {
                let text = rows_to_json(&out.rows)?;
                write_with(None, |w| {
                    writeln!(w, "{text}").map_err(|e| SieveError::io("<stdout>", e))
                })?;
            }
        },
    }
    check_proof_faithful(&out.rows)
}
