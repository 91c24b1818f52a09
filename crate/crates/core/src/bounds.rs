//! Decay constants and sieve bounds, evaluated with natural-log magnitudes so
//! that quotient orders like `2^2600` never overflow.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::blocks::GeneratorSystem;
use crate::error::{Result, SieveError};

/// Which value of `nu^+` feeds into `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaMode {
    /// `nu^+ = 2 delta / min_s p(s)`, as printed in the theorem statements.
    AsStated,
    /// `nu^+ = p_0^+ delta / (1 + C_0)`, as supported by the spectral estimate.
    #[default]
    ProofFaithful,
}

impl std::fmt::Display for EtaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EtaMode::AsStated => "as-stated",
            EtaMode::ProofFaithful => "proof-faithful",
        })
    }
}

impl std::str::FromStr for EtaMode {
    type Err = SieveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-stated" => Ok(EtaMode::AsStated),
            "proof-faithful" => Ok(EtaMode::ProofFaithful),
            _ => Err(SieveError::Parse(format!("unknown eta mode {s:?}"))),
        }
    }
}

/// `nu^-`, `nu^+` and `eta` from the step law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub eta: f64,
}

impl DecayConstants {
    /// `1 - exp(-eta) = min(nu^-, nu^+)`.
    pub fn decay_rate(&self) -> f64 {
        self.nu_minus.min(self.nu_plus)
    }
}

/// Decay constants from `p(1)`, `min_s p(s)`, `delta` and `C_0`.
pub fn decay_constants(p_identity: f64, p_min: f64, delta: f64, c0: f64, mode: EtaMode) -> Result<DecayConstants> {
    if !(p_min > 0.0) || !(p_identity > 0.0) {
        return Err(SieveError::Parameter("step probabilities must be positive".into()));
    }
    let nu_minus = 2.0 * p_identity;
    let nu_plus = match mode {
        EtaMode::AsStated => 2.0 * delta / p_min,
        EtaMode::ProofFaithful => p_min * delta / (1.0 + c0),
    };
    let m = nu_minus.min(nu_plus);
    if !(m < 1.0) {
        return Err(SieveError::Parameter(format!(
            "min(nu-, nu+) = {m} >= 1 leaves no valid eta ({mode} mode)"
        )));
    }
    if !(m > 0.0) {
        return Err(SieveError::Parameter("min(nu-, nu+) must be positive".into()));
    }
    Ok(DecayConstants {
        nu_minus,
        nu_plus,
        eta: -(-m).ln_1p(),
    })
}

/// Inputs of the sieve inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveParams {
    pub delta: f64,
    /// `b_l` for `l = 1..=R`.
    pub b: Vec<f64>,
    pub l1: f64,
    pub l2: f64,
    pub c0: f64,
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub eta_mode: EtaMode,
    pub eta: f64,
}

impl SieveParams {
    /// Params from explicit decay constants over the full index range.
    pub fn new(delta: f64, b: Vec<f64>, c0: f64, constants: DecayConstants, mode: EtaMode) -> Result<Self> {
        let r = b.len() as f64;
        if b.is_empty() {
            return Err(SieveError::Parameter("no blocks".into()));
        }
        Ok(SieveParams {
            delta,
            b,
            l1: 1.0,
            l2: r,
            c0,
            nu_minus: constants.nu_minus,
            nu_plus: constants.nu_plus,
            eta_mode: mode,
            eta: constants.eta,
        })
    }

    /// Restricts the sieve to the blocks `ceil(l1)..=floor(l2)`.
    pub fn with_window(mut self, l1: f64, l2: f64) -> Result<Self> {
        if !(l1 <= l2) || l1.ceil() < 1.0 || l2.floor() as usize > self.b.len() || l1.ceil() > l2.floor() {
            return Err(SieveError::Parameter(format!(
                "window [{l1}, {l2}] selects no blocks of 1..={}",
                self.b.len()
            )));
        }
        self.l1 = l1;
        self.l2 = l2;
        Ok(self)
    }

    /// Block labels in the window.
    pub fn window(&self) -> std::ops::RangeInclusive<usize> {
        self.l1.ceil() as usize..=self.l2.floor() as usize
    }
}

/// `nu^+`, `nu^-` and `eta` for a generator system.
pub fn compute_eta(gs: &GeneratorSystem, delta: f64, mode: EtaMode) -> Result<SieveParams> {
    let p1 = gs.identity_probability();
    if p1 == 0.0 {
        return Err(SieveError::Structural("the identity must be a step".into()));
    }
    let constants = decay_constants(p1, gs.min_probability(), delta, gs.c0(), mode)?;
    SieveParams::new(delta, gs.b().to_vec(), gs.c0(), constants, mode)
}

/// `ln(sum exp(x_i))`, `-inf` for an empty sum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// The sieve bound with its parts. Fields prefixed `ln_` are natural logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: u64,
    /// `sum e^{-b_l}` over the window.
    pub ln_term_error_sum: f64,
    /// `sum |Theta_l| / n_l` over the window.
    pub density_sum: f64,
    /// `1 + (L2 - L1) |G_{L2}|^{3/2} e^{-eta k}`.
    pub ln_main_factor: f64,
    /// `(L2 - L1) |G_{L2}|^{3/2} e^{-eta k} / density_sum`.
    pub ln_tail_term: f64,
    /// Unclamped bound.
    pub ln_value: f64,
    /// Bound clamped to `[0, 1]`.
    pub total: f64,
    pub vacuous: bool,
}

impl BoundReport {
    pub fn term_error_sum(&self) -> f64 {
        self.ln_term_error_sum.exp()
    }

    pub fn inverse_density(&self) -> f64 {
        1.0 / self.density_sum
    }

    pub fn tail_term(&self) -> f64 {
        self.ln_tail_term.exp()
    }

    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

/// `sum_{l} e^{-b_l} + (1 + (L2 - L1) |G_{L2}|^{3/2} e^{-eta k}) / sum_l dens_l`,
/// sums over `ceil(L1)..=floor(L2)`. `densities[l - 1]` is the density of
/// block `l`; `ln_group_order` is `ln |G_{L2}|`.
pub fn sieve_bound(params: &SieveParams, densities: &[f64], ln_group_order: f64, k: u64) -> Result<BoundReport> {
    if densities.len() != params.b.len() {
        return Err(SieveError::Parameter(format!(
            "{} densities for {} blocks",
            densities.len(),
            params.b.len()
        )));
    }
    if !ln_group_order.is_finite() || !params.eta.is_finite() {
        return Err(SieveError::Parameter("non-finite logarithm".into()));
    }
    let window = params.window();
    let b_terms: Vec<f64> = window.clone().map(|l| -params.b[l - 1]).collect();
    let ln_term_error_sum = log_sum_exp(&b_terms);
    let dens: Vec<f64> = window.map(|l| densities[l - 1]).collect();
    if dens.iter().any(|&d| d < 0.0 || !d.is_finite()) {
        return Err(SieveError::Parameter("densities must be finite and nonnegative".into()));
    }
    let density_sum: f64 = dens.iter().sum();
    if density_sum <= 0.0 {
        return Err(SieveError::Parameter("zero density sum".into()));
    }
    let span = params.l2 - params.l1;
    let ln_excess = if span > 0.0 {
        span.ln() + 1.5 * ln_group_order - params.eta * k as f64
    } else {
        f64::NEG_INFINITY
    };
    let ln_main_factor = log_sum_exp(&[0.0, ln_excess]);
    let ln_density = density_sum.ln();
    let ln_value = log_sum_exp(&[ln_term_error_sum, ln_main_factor - ln_density]);
    let value = ln_value.exp();
    Ok(BoundReport {
        k,
        ln_term_error_sum,
        density_sum,
        ln_main_factor,
        ln_tail_term: ln_excess - ln_density,
        ln_value,
        total: value.clamp(0.0, 1.0),
        vacuous: value >= 1.0,
    })
}

/// A theorem-level bound with its validity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub ln_value: f64,
    pub value: f64,
    pub window_ok: bool,
    /// `L1` prescribed by the proof, when there is one.
    pub l1: Option<u64>,
    pub vacuous: bool,
}

impl TheoremBound {
    fn from_ln(ln_value: f64, window_ok: bool, l1: Option<u64>) -> Self {
        let value = ln_value.exp();
        TheoremBound {
            ln_value,
            value,
            window_ok,
            l1,
            vacuous: value >= 1.0,
        }
    }
}

/// `(c^2 + 1)/L1 + c^{(3/4) i (i - 1) + 2} e^{-eta k}` with `i = i(2 L1)`,
/// valid for `L1` in `1..=floor(R/2)`.
pub fn coloring_bound(c: u32, l1: u64, i_of_2l1: u64, eta: f64, k: u64, r: u32) -> TheoremBound {
    let lc = f64::from(c).ln();
    let i = i_of_2l1 as f64;
    let first = (f64::from(c) * f64::from(c) + 1.0).ln() - (l1 as f64).ln();
    let second = (0.75 * i * (i - 1.0) + 2.0) * lc - eta * k as f64;
    let window_ok = l1 >= 1 && l1 <= u64::from(r / 2);
    TheoremBound::from_ln(log_sum_exp(&[first, second]), window_ok, Some(l1))
}

/// Exponent of `c` in the second term of [`coloring_bound`] when every vertex set
/// has three elements.
pub fn corollary1_exponent() -> Ratio<i64> {
    let i = Ratio::from_integer(3i64);
    Ratio::new(3, 4) * i * (i - 1) + 2
}

/// `(c^{13/2} + c^2 + 1) e^{-eta k}`, valid for `eta k <= ln(R/2) - 1`,
/// with `L1 = ceil(e^{eta k})`.
pub fn corollary1_bound(c: u32, eta: f64, k: u64, r: u32) -> TheoremBound {
    let lc = f64::from(c).ln();
    let x = eta * k as f64;
    let ln_const = log_sum_exp(&[6.5 * lc, 2.0 * lc, 0.0]);
    let window_ok = x <= (f64::from(r) / 2.0).ln() - 1.0;
    let l1 = if x < 60.0 { Some(x.exp().ceil() as u64) } else { None };
    TheoremBound::from_ln(ln_const - x, window_ok, l1)
}

/// `8 (c^8 + c^2 + 1) sqrt(ln c) / sqrt(eta k)`, valid for
/// `eta k <= (4R - 4)^2 ln c`, with `L1 = ceil(sqrt(eta k / (64 ln c)))`.
pub fn corollary2_bound(c: u32, eta: f64, k: u64, r: u32) -> TheoremBound {
    let lc = f64::from(c).ln();
    let x = eta * k as f64;
    let ln_const = 8f64.ln() + log_sum_exp(&[8.0 * lc, 2.0 * lc, 0.0]) + 0.5 * lc.ln();
    let side = 4.0 * f64::from(r) - 4.0;
    let window_ok = x <= side * side * lc;
    let l1 = Some((x / (64.0 * lc)).sqrt().ceil() as u64);
    TheoremBound::from_ln(ln_const - 0.5 * x.ln(), window_ok, l1)
}

/// `150 + 2^4 150 + 1`.
pub fn grid_constant() -> u64 {
    150 + 16 * 150 + 1
}

/// `2551 / (eta k)`, valid for `eta k <= 75 R - 149`, with `L1 = ceil(eta k / 150)`.
pub fn grid_bound(eta: f64, k: u64, r: u32) -> TheoremBound {
    let x = eta * k as f64;
    let window_ok = x <= 75.0 * f64::from(r) - 149.0;
    let l1 = Some((x / 150.0).ceil() as u64);
    TheoremBound::from_ln((grid_constant() as f64).ln() - x.ln(), window_ok, l1)
}

/// `(c^{4s} + c^s + 1) e^{-eta k}`, valid for `eta k <= ln(R/2) - 1` and `s >= 1`.
pub fn ap_bound(c: u32, s: u32, eta: f64, k: u64, r: u32) -> TheoremBound {
    let lc = f64::from(c).ln();
    let x = eta * k as f64;
    let sf = f64::from(s);
    let ln_const = log_sum_exp(&[4.0 * sf * lc, sf * lc, 0.0]);
    let window_ok = s >= 1 && x <= (f64::from(r) / 2.0).ln() - 1.0;
    TheoremBound::from_ln(ln_const - x, window_ok, None)
}

/// `e^{1-x} - e^{-2x} <= 1/x`.
pub fn exp_helper_holds(x: f64) -> bool {
    (1.0 - x).exp() - (-2.0 * x).exp() <= 1.0 / x
}

/// `L1 c^{3 L1^2 + 3 L1 / 2 + 2 - 64 (L1 - 1)^2} <= c^8`, decided exactly by
/// squaring both sides.
pub fn corollary2_helper_holds(c: u32, l1: u32) -> bool {
    let l = i64::from(l1);
    let twice_exp = 6 * l * l + 3 * l + 4 - 128 * (l - 1) * (l - 1);
    let c = BigInt::from(c);
    let l_sq = BigInt::from(l) * BigInt::from(l);
    let pow = |e: i64| -> BigInt {
        if e <= 0 {
            BigInt::one()
        } else {
            Pow::pow(&c, e as u64)
        }
    };
    // L1^2 c^{2E} <= c^16  <=>  L1^2 c^{max(2E,0)} <= c^{16 + max(-2E,0)}.
    l_sq * pow(twice_exp) <= pow(16 + (-twice_exp).max(0))
}
