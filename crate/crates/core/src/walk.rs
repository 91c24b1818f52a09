//! The random walk `X_{k+1} = X_k + xi_{k+1}` on a labeling group and its
//! exact Fourier description on block quotients.

use std::sync::Arc;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::blocks::GeneratorSystem;
use crate::error::{Result, SieveError};
use crate::labeling::Labeling;
use crate::rng;
use crate::spectral::{unit_root, AbelianGroup, Character};

/// Cap on `|Q|` for the exact block distribution.
pub const DISTRIBUTION_CAP: usize = 1 << 20;

/// Start point, step law and seed of a walk.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    start: Labeling,
    steps: Arc<GeneratorSystem>,
    horizon: u64,
    seed: u64,
}

impl WalkConfig {
    /// Walk from the identity. Fails unless the identity is a step.
    pub fn new(steps: Arc<GeneratorSystem>, seed: u64) -> Result<Self> {
        let zero = steps.block_system().zero();
        if steps.position(&zero).is_none() {
            return Err(SieveError::Structural("the identity must be a step".into()));
        }
        let p = steps.step_distribution();
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SieveError::Invariant(format!("step probabilities sum to {total}")));
        }
        for (i, s) in steps.elements().iter().enumerate() {
            match steps.position(&s.negate()) {
                Some(j) if (p[i] - p[j]).abs() <= 1e-15 => {}
                _ => return Err(SieveError::Invariant("step distribution is not symmetric".into())),
            }
        }
        Ok(WalkConfig {
            start: zero,
            steps,
            horizon: u64::MAX,
            seed,
        })
    }

    pub fn with_start(mut self, start: Labeling) -> Result<Self> {
        let zero = self.steps.block_system().zero();
        if start.modulus() != zero.modulus() || start.ground() != zero.ground() {
            return Err(SieveError::Structural("start point lives in a different labeling group".into()));
        }
        self.start = start;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn start(&self) -> &Labeling {
        &self.start
    }

    pub fn steps(&self) -> &GeneratorSystem {
        &self.steps
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_k(&self, k: u64) -> Result<()> {
        if k > self.horizon {
            return Err(SieveError::Parameter(format!("k = {k} beyond horizon {}", self.horizon)));
        }
        Ok(())
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.steps.step_distribution()).expect("validated step distribution")
    }
}

/// `X_k` for one trial, on the full labeling.
pub fn walk(cfg: &WalkConfig, trial: u64, k: u64) -> Result<Labeling> {
    cfg.check_k(k)?;
    let mut rng = rng::derive(cfg.seed, rng::DOMAIN_WALK, trial);
    let dist = cfg.sampler();
    let elements = cfg.steps.elements();
    let mut x = cfg.start.clone();
    for _ in 0..k {
        x.add_assign(&elements[dist.sample(&mut rng)])?;
    }
    Ok(x)
}

/// Concatenated site layout of a block subset. States are indexed in mixed
/// radix over the layout, first site least significant, which agrees with
/// [`crate::labeling::Block::quotient_index`] on each block.
#[derive(Debug, Clone)]
pub struct SiteLayout {
    modulus: u32,
    sites: Vec<u32>,
    blocks: Vec<(u32, std::ops::Range<usize>)>,
}

impl SiteLayout {
    pub fn for_blocks(gs: &GeneratorSystem, labels: &[u32]) -> Result<Self> {
        let bs = gs.block_system();
        let mut sites = Vec::new();
        let mut blocks = Vec::new();
        for &l in labels {
            if blocks.iter().any(|(m, _)| *m == l) {
                return Err(SieveError::Parameter(format!("block {l} listed twice")));
            }
            let block = bs.block(l)?;
            let start = sites.len();
            sites.extend_from_slice(block.sites());
            blocks.push((l, start..sites.len()));
        }
        Ok(SiteLayout {
            modulus: bs.modulus(),
            sites,
            blocks,
        })
    }

    /// Every ground site, as one pseudo-block labelled 0.
    pub fn full(gs: &GeneratorSystem) -> Self {
        let n = gs.block_system().ground().len() as u32;
        SiteLayout {
            modulus: gs.block_system().modulus(),
            sites: (0..n).collect(),
            blocks: vec![(0, 0..n as usize)],
        }
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    pub fn blocks(&self) -> &[(u32, std::ops::Range<usize>)] {
        &self.blocks
    }

    pub fn group(&self) -> Result<AbelianGroup> {
        AbelianGroup::elementary(self.modulus, self.sites.len())
    }

    /// `c^{#sites}` if it fits in `usize`.
    pub fn state_count(&self) -> Option<usize> {
        (0..self.sites.len()).try_fold(1usize, |acc, _| acc.checked_mul(self.modulus as usize))
    }

    pub fn project(&self, f: &Labeling) -> Vec<u32> {
        self.sites.iter().map(|&s| f.get(s)).collect()
    }

    pub fn index(&self, coords: &[u32]) -> usize {
        let c = self.modulus as usize;
        coords.iter().rev().fold(0usize, |acc, &r| acc * c + r as usize)
    }
}

/// Monte Carlo walker on the residues of a site layout.
pub struct FlatWalker<'a> {
    cfg: &'a WalkConfig,
    layout: SiteLayout,
    steps: Vec<Vec<(u32, u32)>>,
    start: Vec<u32>,
    dist: WeightedIndex<f64>,
}

impl<'a> FlatWalker<'a> {
    pub fn new(cfg: &'a WalkConfig, layout: SiteLayout) -> Self {
        let position: std::collections::HashMap<u32, u32> =
            layout.sites.iter().enumerate().map(|(i, &s)| (s, i as u32)).collect();
        let steps = cfg
            .steps
            .elements()
            .iter()
            .map(|s| {
                s.entries()
                    .filter_map(|(site, r)| position.get(&site).map(|&p| (p, r)))
                    .collect()
            })
            .collect();
        let start = layout.project(&cfg.start);
        FlatWalker {
            cfg,
            layout,
            steps,
            start,
            dist: cfg.sampler(),
        }
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }

    /// Runs one trial and calls `visit(k, state)` at each requested time.
    /// `times` must be nondecreasing.
    pub fn run(&self, trial: u64, times: &[u64], mut visit: impl FnMut(u64, &[u32])) -> Result<()> {
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(SieveError::Parameter("walk times must be nondecreasing".into()));
        }
        if let Some(&last) = times.last() {
            self.cfg.check_k(last)?;
        }
        let mut rng = rng::derive(self.cfg.seed, rng::DOMAIN_WALK, trial);
        let c = self.layout.modulus;
        let mut state = self.start.clone();
        let mut k = 0u64;
        for &t in times {
            while k < t {
                for &(p, r) in &self.steps[self.dist.sample(&mut rng)] {
                    let v = &mut state[p as usize];
                    *v = (*v + r) % c;
                }
                k += 1;
            }
            visit(t, &state);
        }
        Ok(())
    }
}

/// `M_chi = sum_s p_s chi(s)`.
pub fn character_transform(gs: &GeneratorSystem, chi: &Character) -> Complex64 {
    gs.elements()
        .iter()
        .zip(gs.step_distribution())
        .map(|(s, &p)| chi.eval(s) * p)
        .sum()
}

/// `z^k` by repeated squaring.
fn cpow(mut z: Complex64, mut k: u64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    while k > 0 {
        if k & 1 == 1 {
            acc *= z;
        }
        z *= z;
        k >>= 1;
    }
    acc
}

/// `E chi(X_k) = chi(g0) M_chi^k`.
pub fn exact_moment(cfg: &WalkConfig, chi: &Character, k: u64) -> Complex64 {
    chi.eval(&cfg.start) * cpow(character_transform(&cfg.steps, chi), k)
}

/// In-place separable DFT over `(Z/c)^m`; `sign = +1` forward, `-1` inverse
/// (unnormalized).
fn dft(values: &mut [Complex64], c: usize, m: usize, sign: f64) {
    let roots: Vec<Complex64> = (0..c)
        .map(|j| Complex64::from_polar(1.0, sign * std::f64::consts::TAU * j as f64 / c as f64))
        .collect();
    let mut stride = 1usize;
    for _ in 0..m {
        let span = stride * c;
        values.par_chunks_mut(span).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); c];
            for offset in 0..stride {
                for (a, out) in line.iter_mut().enumerate() {
                    *out = (0..c).map(|x| chunk[offset + x * stride] * roots[(a * x) % c]).sum();
                }
                for (a, v) in line.iter().enumerate() {
                    chunk[offset + a * stride] = *v;
                }
            }
        });
        stride = span;
    }
}

/// Transform `M_chi` for every character of a block quotient, indexed like
/// the states of the layout.
#[derive(Debug, Clone)]
pub struct QuotientTransform {
    pub layout: SiteLayout,
    pub values: Vec<Complex64>,
}

impl QuotientTransform {
    /// `max |M_chi|` over nontrivial characters (0 for the trivial quotient).
    pub fn max_nontrivial_modulus(&self) -> f64 {
        self.values[1..].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |Im M_chi|`, zero up to rounding for a symmetric step law.
    pub fn max_imaginary(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

fn projected_step_law(gs: &GeneratorSystem, layout: &SiteLayout, n: usize) -> Vec<Complex64> {
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    for (s, &p) in gs.elements().iter().zip(gs.step_distribution()) {
        q[layout.index(&layout.project(s))] += p;
    }
    q
}

fn checked_states(layout: &SiteLayout) -> Result<usize> {
    match layout.state_count() {
        Some(n) if n <= DISTRIBUTION_CAP => Ok(n),
        _ => Err(SieveError::capacity(
            "block quotient states",
            format!("{}^{}", layout.modulus, layout.sites.len()),
            DISTRIBUTION_CAP,
        )),
    }
}

/// All `M_chi` on the quotient `prod_{l in labels} G_l`.
pub fn quotient_transform(gs: &GeneratorSystem, labels: &[u32]) -> Result<QuotientTransform> {
    let layout = SiteLayout::for_blocks(gs, labels)?;
    let n = checked_states(&layout)?;
    let mut values = projected_step_law(gs, &layout, n);
    dft(&mut values, layout.modulus as usize, layout.sites.len(), 1.0);
    Ok(QuotientTransform { layout, values })
}

/// Exact law of `rho(X_k)` on a block quotient.
#[derive(Debug, Clone)]
pub struct BlockDistribution {
    pub layout: SiteLayout,
    pub probabilities: Vec<f64>,
}

impl BlockDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.probabilities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total variation distance to another vector on the same states.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self.probabilities.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// `Pr(rho(X_k) = x) = |Q|^{-1} sum_chi conj(chi(x)) chi(rho(g0)) M_chi^k`.
pub fn exact_block_distribution(cfg: &WalkConfig, labels: &[u32], k: u64) -> Result<BlockDistribution> {
    cfg.check_k(k)?;
    let QuotientTransform { layout, mut values } = quotient_transform(&cfg.steps, labels)?;
    let c = layout.modulus;
    let start = layout.project(&cfg.start);
    let group = layout.group()?;
    values.par_iter_mut().enumerate().for_each(|(a, v)| {
        let coords = group.coords(a);
        let phase = coords
            .iter()
            .zip(&start)
            .fold(0u64, |acc, (&x, &g)| (acc + u64::from(x) * u64::from(g)) % u64::from(c));
        *v = unit_root(phase as u32, c) * cpow(*v, k);
    });
    dft(&mut values, c as usize, layout.sites.len(), -1.0);
    let n = values.len() as f64;
    let probabilities = values.iter().map(|z| z.re / n).collect();
    Ok(BlockDistribution { layout, probabilities })
}

/// Membership in the target sets `Theta_l`, given block coordinates in block
/// site order.
pub trait BlockDetector: Sync {
    fn in_theta(&self, l: u32, coords: &[u32]) -> bool;
}

impl<F: Fn(u32, &[u32]) -> bool + Sync> BlockDetector for F {
    fn in_theta(&self, l: u32, coords: &[u32]) -> bool {
        self(l, coords)
    }
}

/// `P(rho_l(X_k) not in Theta_l for every l in labels)`, exactly.
pub fn exact_survival_probability(
    cfg: &WalkConfig,
    labels: &[u32],
    detector: &dyn BlockDetector,
    k: u64,
) -> Result<f64> {
    let dist = exact_block_distribution(cfg, labels, k)?;
    Ok(survival_from_distribution(&dist, detector))
}

/// Mass of the states that avoid every `Theta_l`.
pub fn survival_from_distribution(dist: &BlockDistribution, detector: &dyn BlockDetector) -> f64 {
    let layout = &dist.layout;
    let c = layout.modulus as usize;
    // Per-block lookup tables over the block quotient.
    let tables: Vec<Vec<bool>> = layout
        .blocks
        .iter()
        .map(|(l, range)| {
            let size = c.pow(range.len() as u32);
            (0..size)
                .map(|mut i| {
                    let coords: Vec<u32> = (0..range.len())
                        .map(|_| {
                            let r = (i % c) as u32;
                            i /= c;
                            r
                        })
                        .collect();
                    detector.in_theta(*l, &coords)
                })
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = tables.iter().map(Vec::len).collect();
    // Sequential sum keeps the result independent of the thread count.
    let mass: f64 = dist
        .probabilities
        .iter()
        .enumerate()
        .filter(|(x, _)| {
            let mut rest = *x;
            tables.iter().zip(&sizes).all(|(table, &size)| {
                let local = rest % size;
                rest /= size;
                !table[local]
            })
        })
        .map(|(_, &p)| p)
        .sum();
    // Transform roundoff can leave tiny negative mass.
    mass.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{BlockSystem, DeltaPolicy, StepWeighting};
    use crate::labeling::{Block, GroundSet};

    fn all_elements_system(c: u32, m: u32) -> Arc<GeneratorSystem> {
        let ground = Arc::new(GroundSet::coords(m));
        let block = Block::new(1, 0..m, &ground).unwrap();
        let bs = Arc::new(BlockSystem::new(ground.clone(), c, vec![block.clone()]).unwrap());
        let n = (c as u64).pow(m);
        let draws = (0..n).map(|i| block.element(&ground, c, i)).collect();
        Arc::new(
            GeneratorSystem::from_samples(bs, 0.5, DeltaPolicy::Strict, &[1.0], StepWeighting::Uniform, vec![draws])
                .unwrap(),
        )
    }

    #[test]
    fn zero_steps_stay_at_start() {
        let gs = all_elements_system(3, 2);
        let cfg = WalkConfig::new(gs.clone(), 1).unwrap();
        assert_eq!(walk(&cfg, 0, 0).unwrap(), *cfg.start());
        let d = exact_block_distribution(&cfg, &[1], 0).unwrap();
        assert!((d.probabilities[0] - 1.0).abs() < 1e-12);
        assert!(d.probabilities[1..].iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn identity_only_walk_never_moves() {
        let ground = Arc::new(GroundSet::coords(2));
        let block = Block::new(1, 0..2, &ground).unwrap();
        let bs = Arc::new(BlockSystem::new(ground.clone(), 3, vec![block]).unwrap());
        let zero = bs.zero();
        let gs = Arc::new(
            GeneratorSystem::from_samples(bs, 0.5, DeltaPolicy::Strict, &[1.0], StepWeighting::Uniform, vec![vec![zero]])
                .unwrap(),
        );
        let start = ground.labeling(3, [(0, 2), (1, 1)]).unwrap();
        let cfg = WalkConfig::new(gs, 4).unwrap().with_start(start.clone()).unwrap();
        for trial in 0..5 {
            assert_eq!(walk(&cfg, trial, 17).unwrap(), start);
        }
    }

    #[test]
    fn uniform_steps_on_cyclic_group_kill_characters() {
        let gs = all_elements_system(3, 1);
        let chi = Character::new(3, [(0, 1)]);
        assert!(character_transform(&gs, &chi).norm() < 1e-12);
        let one = character_transform(&gs, &Character::trivial(3));
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let cfg = WalkConfig::new(gs, 0).unwrap();
        assert!(exact_moment(&cfg, &chi, 3).norm() < 1e-12);
        assert!((exact_moment(&cfg, &chi, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn binary_uniform_is_uniform_after_one_step() {
        let gs = all_elements_system(2, 1);
        let cfg = WalkConfig::new(gs, 0).unwrap();
        for k in 1..6 {
            let d = exact_block_distribution(&cfg, &[1], k).unwrap();
            assert!(d.probabilities.iter().all(|p| (p - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let gs = all_elements_system(2, 1);
        let cfg = WalkConfig::new(gs, 0).unwrap().with_horizon(3);
        assert!(walk(&cfg, 0, 4).is_err());
        assert!(walk(&cfg, 0, 3).is_ok());
    }

    #[test]
    fn empty_theta_survives_surely() {
        let gs = all_elements_system(3, 2);
        let cfg = WalkConfig::new(gs, 0).unwrap();
        let never = |_: u32, _: &[u32]| false;
        for k in [0, 1, 7] {
            let p = exact_survival_probability(&cfg, &[1], &never, k).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_walker_matches_full_walk() {
        let gs = all_elements_system(3, 3);
        let cfg = WalkConfig::new(gs.clone(), 5).unwrap();
        let walker = FlatWalker::new(&cfg, SiteLayout::full(&gs));
        let times = [0, 1, 4, 9];
        for trial in 0..10 {
            let mut seen = Vec::new();
            walker.run(trial, &times, |_, s| seen.push(s.to_vec())).unwrap();
            for (&k, state) in times.iter().zip(&seen) {
                let x = walk(&cfg, trial, k).unwrap();
                assert_eq!(walker.layout().project(&x), *state);
            }
        }
    }

    #[test]
    fn cpow_matches_powi() {
        let z = Complex64::new(0.3, -0.7);
        for k in 0..20u64 {
            assert!((cpow(z, k) - z.powi(k as i32)).norm() < 1e-14);
        }
    }
}
