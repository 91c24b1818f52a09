//! Quotient structure of a labeling group and the random generating sets
//! lifted from the quotients.
//!
//! A [`BlockSystem`] fixes pairwise disjoint blocks `B_1, ..., B_R`; the
//! quotient by the labelings vanishing on `B_l` has order `c^{|B_l|}` and its
//! canonical representatives are the labelings supported in `B_l`. A
//! [`GeneratorSystem`] draws `kappa_l` uniform quotient elements per block,
//! symmetrizes them, lifts them canonically, and adjoins the identity.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SieveError};
use crate::labeling::{Block, GroundSet, Labeling};
use crate::rng;

/// Default cap on `n_l * n_l'` for exhaustive surjectivity checks.
pub const DEFAULT_PAIR_ENUMERATION_CAP: u128 = 1 << 24;

const KAPPA_PRECISION_BITS: usize = 320;

/// Order `base^exponent` of a finite quotient, kept symbolic because block
/// quotients routinely exceed every machine integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotientOrder {
    pub base: u32,
    pub exponent: u64,
}

impl QuotientOrder {
    pub fn new(base: u32, exponent: u64) -> Self {
        QuotientOrder { base, exponent }
    }

    /// An explicit integer order `n >= 1`.
    pub fn exact(n: u32) -> Self {
        QuotientOrder { base: n, exponent: 1 }
    }

    pub fn ln(&self) -> f64 {
        self.exponent as f64 * f64::from(self.base).ln()
    }

    pub fn to_u128(&self) -> Option<u128> {
        let e = u32::try_from(self.exponent).ok()?;
        u128::from(self.base).checked_pow(e)
    }
}

impl fmt::Display for QuotientOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_u128() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "{}^{}", self.base, self.exponent),
        }
    }
}

/// How strictly the expansion parameter is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaPolicy {
    /// Only `0 < delta <= 1/2`, where the random Cayley graph theorem applies.
    #[default]
    Strict,
    /// `0 < delta < 1`; certificates above 1/2 are flagged as unsupported.
    Permissive,
}

impl DeltaPolicy {
    pub fn check(self, delta: f64) -> Result<()> {
        let ok = match self {
            DeltaPolicy::Strict => delta > 0.0 && delta <= 0.5,
            DeltaPolicy::Permissive => delta > 0.0 && delta < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SieveError::Parameter(format!(
                "delta = {delta} outside the admissible range for {self:?} mode"
            )))
        }
    }
}

/// Number of random generators that makes a Cayley graph on a group of order
/// `n` a `delta`-expander except with probability below `e^{-b}`:
/// `ceil(2 ((2-d) ln(2-d) + d ln d)^{-1} (ln n + b + ln 2))`, evaluated with
/// 320-bit floats before the ceiling.
pub fn kappa(n: QuotientOrder, b: f64, delta: f64, policy: DeltaPolicy) -> Result<u64> {
    policy.check(delta)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(SieveError::Parameter(format!("b must be positive and finite, got {b}")));
    }
    if n.base == 0 {
        return Err(SieveError::Parameter("quotient order must be at least 1".into()));
    }
    let p = KAPPA_PRECISION_BITS;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().map_err(|e| SieveError::Parameter(format!("astro-float: {e:?}")))?;

    let d = BigFloat::from_f64(delta, p);
    let two = BigFloat::from_u8(2, p);
    let two_minus_d = two.sub(&d, p, rm);
    let denom = two_minus_d
        .mul(&two_minus_d.ln(p, rm, &mut cc), p, rm)
        .add(&d.mul(&d.ln(p, rm, &mut cc), p, rm), p, rm);

    let ln_n = BigFloat::from_u64(n.exponent, p).mul(&BigFloat::from_u32(n.base, p).ln(p, rm, &mut cc), p, rm);
    let numer = ln_n
        .add(&BigFloat::from_f64(b, p), p, rm)
        .add(&two.ln(p, rm, &mut cc), p, rm);
    let value = two.mul(&numer, p, rm).div(&denom, p, rm).ceil();
    let text = value
        .format(astro_float::Radix::Dec, rm, &mut cc)
        .map_err(|e| SieveError::Parameter(format!("astro-float: {e:?}")))?;
    let as_float: f64 = text
        .parse()
        .map_err(|_| SieveError::Parameter(format!("kappa not representable: {text}")))?;
    if !(as_float.is_finite() && as_float >= 0.0 && as_float < 2f64.powi(53)) {
        return Err(SieveError::Parameter(format!("kappa out of range: {text}")));
    }
    Ok(as_float.round() as u64)
}

/// Ground set, modulus and pairwise disjoint blocks labeled `1..=R`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    ground: Arc<GroundSet>,
    modulus: u32,
    blocks: Vec<Block>,
}

impl BlockSystem {
    /// Blocks are relabeled `1..=R` in the given order; they must be pairwise disjoint.
    pub fn new(ground: Arc<GroundSet>, modulus: u32, blocks: Vec<Block>) -> Result<Self> {
        let system = Self::new_allow_overlap(ground, modulus, blocks)?;
        for (i, a) in system.blocks.iter().enumerate() {
            for b in &system.blocks[i + 1..] {
                if !a.is_disjoint(b) {
                    return Err(SieveError::Structural(format!(
                        "blocks {} and {} overlap",
                        a.label(),
                        b.label()
                    )));
                }
            }
        }
        Ok(system)
    }

    /// Skips the disjointness check. Only useful to exercise the surjectivity
    /// verifiers on deliberately broken systems.
    pub fn new_allow_overlap(ground: Arc<GroundSet>, modulus: u32, blocks: Vec<Block>) -> Result<Self> {
        if modulus < 2 {
            return Err(SieveError::Parameter(format!("modulus must be at least 2, got {modulus}")));
        }
        if blocks.is_empty() {
            return Err(SieveError::Structural("a block system needs at least one block".into()));
        }
        let tag = ground.tag();
        let blocks = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                if b.ground() != tag {
                    return Err(SieveError::Structural("block built on a different ground set".into()));
                }
                Block::new(i as u32 + 1, b.sites().iter().copied(), &ground)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockSystem {
            ground,
            modulus,
            blocks,
        })
    }

    pub fn ground(&self) -> &Arc<GroundSet> {
        &self.ground
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Number of blocks, `R`.
    pub fn index_range(&self) -> u32 {
        self.blocks.len() as u32
    }

    /// Block with label `l` (1-based).
    pub fn block(&self, l: u32) -> Result<&Block> {
        l.checked_sub(1)
            .and_then(|i| self.blocks.get(i as usize))
            .ok_or_else(|| SieveError::Parameter(format!("block label {l} outside 1..={}", self.blocks.len())))
    }

    /// `n_l = c^{|B_l|}`.
    pub fn quotient_order(&self, l: u32) -> Result<QuotientOrder> {
        Ok(QuotientOrder::new(self.modulus, self.block(l)?.len() as u64))
    }

    pub fn zero(&self) -> Labeling {
        self.ground.zero(self.modulus)
    }

    /// `count` independent uniform draws from the quotient at block `l`, as
    /// canonical representatives. The stream depends only on `(seed, l)`.
    pub fn sample_generators(&self, l: u32, count: u64, seed: u64) -> Result<Vec<Labeling>> {
        let block = self.block(l)?;
        let mut rng = rng::derive(seed, rng::DOMAIN_GENERATORS, u64::from(l));
        let c = self.modulus;
        Ok((0..count)
            .map(|_| {
                let mut f = self.zero();
                for &s in block.sites() {
                    f.set(s, rng.random_range(0..c));
                }
                f
            })
            .collect())
    }

    /// Decides surjectivity of `rho_l x rho_l'` by building a candidate
    /// preimage for every pair of quotient elements.
    pub fn verify_linear_disjointness(&self, l: u32, l2: u32, cap: u128) -> Result<bool> {
        let a = self.block(l)?;
        let b = self.block(l2)?;
        let na = self.quotient_order(l)?.to_u128();
        let nb = self.quotient_order(l2)?.to_u128();
        let pairs = na.zip(nb).and_then(|(x, y)| x.checked_mul(y));
        let pairs = match pairs {
            Some(p) if p <= cap => p,
            _ => {
                return Err(SieveError::capacity(
                    format!("linear disjointness check for blocks ({l}, {l2})"),
                    format!("{} x {}", self.quotient_order(l)?, self.quotient_order(l2)?),
                    cap,
                ))
            }
        };
        let na = na.unwrap_or(0) as u64;
        let nb = (pairs / u128::from(na.max(1))) as u64;
        let c = self.modulus;
        let ground = &self.ground;
        let ok = (0..na).into_par_iter().all(|xi| {
            let x = a.element(ground, c, xi);
            (0..nb).all(|yi| {
                let y = b.element(ground, c, yi);
                let mut candidate = x.clone();
                for &s in b.sites() {
                    if !a.contains(s) {
                        candidate.set(s, y.get(s));
                    }
                }
                candidate.restrict(a) == x && candidate.restrict(b) == y
            })
        });
        Ok(ok)
    }

    /// Enumerates when feasible; past the cap, falls back to the constructive
    /// argument for disjoint blocks.
    pub fn linear_disjointness_certificate(&self, l: u32, l2: u32, cap: u128) -> Result<DisjointnessCertificate> {
        match self.verify_linear_disjointness(l, l2, cap) {
            Ok(true) => Ok(DisjointnessCertificate::Enumerated),
            Ok(false) => Ok(DisjointnessCertificate::Fails),
            Err(SieveError::Capacity { .. }) => {
                let disjoint = self.block(l)?.is_disjoint(self.block(l2)?);
                log::info!("blocks ({l}, {l2}) beyond enumeration cap; trusting disjoint-block construction");
                Ok(if disjoint {
                    DisjointnessCertificate::ConstructiveDisjoint
                } else {
                    DisjointnessCertificate::Fails
                })
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisjointnessCertificate {
    Enumerated,
    ConstructiveDisjoint,
    Fails,
}

/// How step probabilities are attached to the generating set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepWeighting {
    /// `p_s = 1 / |S|` over distinct elements.
    #[default]
    Uniform,
    /// Each draw splits unit mass between itself and its inverse; the identity
    /// gets unit mass; then normalized.
    Multiset,
}

#[derive(Debug, Clone, Default)]
pub struct GeneratorOptions {
    pub policy: DeltaPolicy,
    pub weighting: StepWeighting,
    /// Replaces the computed `kappa_l` per block.
    pub kappa_override: Option<Vec<u64>>,
}

/// Sampled generators, the symmetrized union `S` with the identity, and the
/// step distribution of the walk.
#[derive(Debug, Clone)]
pub struct GeneratorSystem {
    blocks: Arc<BlockSystem>,
    delta: f64,
    policy: DeltaPolicy,
    b: Vec<f64>,
    kappa: Vec<u64>,
    seed: u64,
    weighting: StepWeighting,
    samples: Vec<Vec<Labeling>>,
    block_sets: Vec<Vec<Labeling>>,
    elements: Vec<Labeling>,
    step_dist: Vec<f64>,
    c0: f64,
}

/// Witness of the nice image condition for a pair of blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceImageWitness {
    pub x0: Labeling,
    pub y0: Labeling,
}

/// First missing element of the required cross-shaped image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceImageFailure {
    pub missing: (Labeling, Labeling),
    pub reason: String,
}

impl GeneratorSystem {
    /// Samples `kappa_l = kappa(n_l, b_l, delta)` generators per block and
    /// assembles `S(b, delta)`.
    pub fn build(
        blocks: Arc<BlockSystem>,
        delta: f64,
        b: &[f64],
        seed: u64,
        options: &GeneratorOptions,
    ) -> Result<Self> {
        options.policy.check(delta)?;
        let r = blocks.blocks().len();
        if b.len() != r {
            return Err(SieveError::Parameter(format!("{} values of b for {r} blocks", b.len())));
        }
        let kappa_seq = match &options.kappa_override {
            Some(k) if k.len() == r => k.clone(),
            Some(k) => {
                return Err(SieveError::Parameter(format!("{} kappa overrides for {r} blocks", k.len())))
            }
            None => (1..=r as u32)
                .zip(b)
                .map(|(l, &bl)| kappa(blocks.quotient_order(l)?, bl, delta, options.policy))
                .collect::<Result<Vec<_>>>()?,
        };
        let samples = kappa_seq
            .par_iter()
            .enumerate()
            .map(|(i, &k)| blocks.sample_generators(i as u32 + 1, k, seed))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(blocks, delta, options.policy, b.to_vec(), kappa_seq, seed, options.weighting, samples)
    }

    /// Assembles a system from explicit per-block draws instead of sampling.
    /// Each draw must be supported on its block; `kappa_l` is the draw count.
    pub fn from_samples(
        blocks: Arc<BlockSystem>,
        delta: f64,
        policy: DeltaPolicy,
        b: &[f64],
        weighting: StepWeighting,
        samples: Vec<Vec<Labeling>>,
    ) -> Result<Self> {
        policy.check(delta)?;
        let r = blocks.blocks().len();
        if samples.len() != r || b.len() != r {
            return Err(SieveError::Parameter(format!(
                "{} sample lists and {} values of b for {r} blocks",
                samples.len(),
                b.len()
            )));
        }
        let zero = blocks.zero();
        for (block, draws) in blocks.blocks().iter().zip(&samples) {
            for s in draws {
                if s.modulus() != zero.modulus() || s.ground() != zero.ground() {
                    return Err(SieveError::Structural("draw from a different labeling group".into()));
                }
                if s.entries().any(|(site, _)| !block.contains(site)) {
                    return Err(SieveError::Structural(format!("draw not supported on block {}", block.label())));
                }
            }
        }
        let kappa = samples.iter().map(|d| d.len() as u64).collect();
        Self::assemble(blocks, delta, policy, b.to_vec(), kappa, 0, weighting, samples)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        blocks: Arc<BlockSystem>,
        delta: f64,
        policy: DeltaPolicy,
        b: Vec<f64>,
        kappa: Vec<u64>,
        seed: u64,
        weighting: StepWeighting,
        samples: Vec<Vec<Labeling>>,
    ) -> Result<Self> {
        let block_sets: Vec<Vec<Labeling>> = samples
            .iter()
            .map(|draws| {
                draws
                    .iter()
                    .flat_map(|s| [s.clone(), s.negate()])
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect();
        let mut union: BTreeSet<Labeling> = block_sets.iter().flatten().cloned().collect();
        union.insert(blocks.zero());
        let elements: Vec<Labeling> = union.into_iter().collect();
        let step_dist = match weighting {
            StepWeighting::Uniform => vec![1.0 / elements.len() as f64; elements.len()],
            StepWeighting::Multiset => {
                let mut mass = vec![0.0; elements.len()];
                let pos = |f: &Labeling| elements.binary_search(f).expect("element of S");
                mass[0] += 1.0;
                for s in samples.iter().flatten() {
                    mass[pos(s)] += 0.5;
                    mass[pos(&s.negate())] += 0.5;
                }
                let total: f64 = mass.iter().sum();
                mass.iter().map(|m| m / total).collect()
            }
        };
        let sizes: Vec<usize> = block_sets.iter().map(Vec::len).collect();
        let c0 = if sizes.len() < 2 {
            1.0
        } else {
            let max = *sizes.iter().max().unwrap() as f64;
            let min = *sizes.iter().min().unwrap() as f64;
            max / min
        };
        Ok(GeneratorSystem {
            blocks,
            delta,
            policy,
            b,
            kappa,
            seed,
            weighting,
            samples,
            block_sets,
            elements,
            step_dist,
            c0,
        })
    }

    /// Same system with the lift `old` (and its inverse) replaced by `new`
    /// (and its inverse). Step probabilities become uniform.
    pub fn replace_lift(&self, old: &Labeling, new: Labeling) -> Result<Self> {
        if !self.elements.contains(old) {
            return Err(SieveError::Structural("element to replace is not in S".into()));
        }
        let old_inv = old.negate();
        let mut set: BTreeSet<Labeling> = self
            .elements
            .iter()
            .filter(|s| *s != old && *s != &old_inv)
            .cloned()
            .collect();
        set.insert(new.negate());
        set.insert(new);
        let mut out = self.clone();
        out.elements = set.into_iter().collect();
        out.step_dist = vec![1.0 / out.elements.len() as f64; out.elements.len()];
        out.weighting = StepWeighting::Uniform;
        Ok(out)
    }

    /// Same sampled sets with a different step distribution over `S`.
    pub fn with_step_distribution(&self, step_dist: Vec<f64>) -> Result<Self> {
        if step_dist.len() != self.elements.len() {
            return Err(SieveError::Parameter("step distribution length differs from |S|".into()));
        }
        let total: f64 = step_dist.iter().sum();
        if (total - 1.0).abs() > 1e-12 || step_dist.iter().any(|&p| !(p > 0.0)) {
            return Err(SieveError::Parameter("step probabilities must be positive and sum to 1".into()));
        }
        for (i, s) in self.elements.iter().enumerate() {
            let j = self.position(&s.negate()).expect("S is symmetric");
            if (step_dist[i] - step_dist[j]).abs() > 1e-15 {
                return Err(SieveError::Parameter("step distribution is not symmetric".into()));
            }
        }
        let mut out = self.clone();
        out.step_dist = step_dist;
        Ok(out)
    }

    pub fn block_system(&self) -> &Arc<BlockSystem> {
        &self.blocks
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn policy(&self) -> DeltaPolicy {
        self.policy
    }

    /// Whether expander guarantees for these generators are covered by the
    /// random Cayley graph theorem (`delta <= 1/2`).
    pub fn theorem_certified(&self) -> bool {
        self.delta <= 0.5
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn kappa(&self) -> &[u64] {
        &self.kappa
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weighting(&self) -> StepWeighting {
        self.weighting
    }

    /// Raw draws `s_1, ..., s_kappa` for block `l`.
    pub fn samples(&self, l: u32) -> Result<&[Labeling]> {
        self.blocks.block(l)?;
        Ok(&self.samples[l as usize - 1])
    }

    /// The symmetrized per-block set `S_l`.
    pub fn block_set(&self, l: u32) -> Result<&[Labeling]> {
        self.blocks.block(l)?;
        Ok(&self.block_sets[l as usize - 1])
    }

    /// `S(b, delta)`, sorted, identity first.
    pub fn elements(&self) -> &[Labeling] {
        &self.elements
    }

    pub fn step_distribution(&self) -> &[f64] {
        &self.step_dist
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn position(&self, f: &Labeling) -> Option<usize> {
        self.elements.binary_search(f).ok()
    }

    /// `p(1)`.
    pub fn identity_probability(&self) -> f64 {
        self.position(&self.blocks.zero()).map_or(0.0, |i| self.step_dist[i])
    }

    /// `min_s p(s)`.
    pub fn min_probability(&self) -> f64 {
        self.step_dist.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `rho_l(S) == S_l u {1}`.
    pub fn verify_nice_lifting(&self, l: u32) -> Result<bool> {
        let block = self.blocks.block(l)?;
        let projected: HashSet<Labeling> = self.elements.iter().map(|s| s.restrict(block)).collect();
        let mut expected: HashSet<Labeling> = self.block_sets[l as usize - 1].iter().cloned().collect();
        expected.insert(self.blocks.zero());
        Ok(projected == expected)
    }

    /// Checks the nice image condition for `(rho_l, rho_l')` with the
    /// identity witness.
    pub fn verify_nice_image(&self, l: u32, l2: u32) -> Result<std::result::Result<NiceImageWitness, NiceImageFailure>> {
        let zero = self.blocks.zero();
        self.verify_nice_image_with(l, l2, &zero, &zero)
    }

    /// Checks `x0^2 = 1 = y0^2` and
    /// `(rho_l x rho_l')(S) >= (rho_l(S) x {y0}) u ({x0} x rho_l'(S))`.
    pub fn verify_nice_image_with(
        &self,
        l: u32,
        l2: u32,
        x0: &Labeling,
        y0: &Labeling,
    ) -> Result<std::result::Result<NiceImageWitness, NiceImageFailure>> {
        if l == l2 {
            return Err(SieveError::Parameter("nice image needs two distinct blocks".into()));
        }
        let a = self.blocks.block(l)?;
        let b = self.blocks.block(l2)?;
        let x0 = x0.restrict(a);
        let y0 = y0.restrict(b);
        let fail = |pair: (Labeling, Labeling), reason: &str| {
            Ok(Err(NiceImageFailure {
                missing: pair,
                reason: reason.to_string(),
            }))
        };
        if !x0.add(&x0)?.is_zero() || !y0.add(&y0)?.is_zero() {
            return fail((x0, y0), "witness does not have order dividing 2");
        }
        let image: HashSet<(Labeling, Labeling)> =
            self.elements.iter().map(|s| (s.restrict(a), s.restrict(b))).collect();
        let left: BTreeSet<Labeling> = image.iter().map(|(x, _)| x.clone()).collect();
        let right: BTreeSet<Labeling> = image.iter().map(|(_, y)| y.clone()).collect();
        for x in left {
            let pair = (x, y0.clone());
            if !image.contains(&pair) {
                return fail(pair, "rho_l(S) x {y0} not covered");
            }
        }
        for y in right {
            let pair = (x0.clone(), y);
            if !image.contains(&pair) {
                return fail(pair, "{x0} x rho_l'(S) not covered");
            }
        }
        Ok(Ok(NiceImageWitness { x0, y0 }))
    }
}
