//! `L_r` functional norms on the sphere.
//!
//! `‖f‖_r = (∫_{S^{n-1}} |f|^r dσ)^{1/r}` for the uniform probability measure
//! `σ`. Even `r` is integrated exactly by expanding the polynomial and
//! applying closed-form monomial moments; everything else goes through a
//! seeded Monte Carlo estimator.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{AprankError, Result};
use crate::rng::SeedStream;
use crate::tensor::{basis_len, ln_binom, SymmetricTensor};

/// Default cap on `binom(n + r d - 1, r d)` for exact integration.
pub const DEFAULT_EXPANSION_BUDGET: f64 = 2e6;

/// Exact results whose estimated relative rounding error exceeds this are
/// refused.
pub const MAX_EXACT_REL_ERROR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    Exact,
    MonteCarlo,
    Covering,
}

/// A norm value with its statistical error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: EstimateMethod,
}

impl EstimateResult {
    pub fn exact(value: f64) -> Self {
        EstimateResult {
            value,
            std_error: 0.0,
            samples: 0,
            method: EstimateMethod::Exact,
        }
    }
}

/// Which norm a command or algorithm measures in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    Hs,
    Lr(f64),
    /// Sampled lower bound for the sup norm.
    LinfLower,
    /// The sup norm itself, certified through covering or Barvinok bounds.
    Linf,
}

impl FromStr for NormKind {
    type Err = AprankError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "hs" => Ok(NormKind::Hs),
            "linf-lower" => Ok(NormKind::LinfLower),
            "linf" | "linf-surrogate" | "inf" => Ok(NormKind::Linf),
            _ => {
                let r = s
                    .strip_prefix('l')
                    .and_then(|rest| rest.parse::<f64>().ok())
                    .ok_or_else(|| {
                        AprankError::InvalidArgument(format!(
                            "unknown norm kind '{s}' (expected hs, l<r>, linf or linf-lower)"
                        ))
                    })?;
                if !(r.is_finite() && r >= 2.0) {
                    return Err(AprankError::InvalidArgument(format!("L_r needs 2 <= r < inf, got {r}")));
                }
                Ok(NormKind::Lr(r))
            }
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Hs => write!(f, "hs"),
            NormKind::Lr(r) => write!(f, "l{r}"),
            NormKind::LinfLower => write!(f, "linf-lower"),
            NormKind::Linf => write!(f, "linf"),
        }
    }
}

/// `ln((2g-1)!!)`, with `(-1)!! = 1`.
pub fn ln_odd_double_factorial(g: u64) -> f64 {
    // (2g-1)!! = (2g)! / (2^g g!)
    ln_factorial(2 * g) - g as f64 * std::f64::consts::LN_2 - ln_factorial(g)
}

/// `∫_{S^{n-1}} x^beta dσ`.
///
/// Zero unless every exponent is even; for `beta = 2 gamma` it equals
/// `prod_i (2 gamma_i - 1)!! / prod_{j < |gamma|} (n + 2 j)`.
pub fn sphere_moment(beta: &[u32]) -> f64 {
    if beta.iter().any(|b| b % 2 == 1) {
        return 0.0;
    }
    let n = beta.len() as f64;
    // Interleave numerator and denominator factors; each ratio is <= 1 so the
    // running product never overflows.
    let mut value = 1.0;
    let mut j = 0.0;
    for &b in beta {
        for t in 0..b / 2 {
            value *= (2 * t + 1) as f64 / (n + 2.0 * j);
            j += 1.0;
        }
    }
    value
}

/// Comparison factors `‖g‖_{2k} <= ‖g‖_∞ <= upper_factor ‖g‖_{2k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarvinokBracket {
    pub lower_factor: f64,
    pub upper_factor: f64,
}

pub fn barvinok_bracket(n: usize, d: usize, k: usize) -> Result<BarvinokBracket> {
    if k == 0 {
        return Err(AprankError::InvalidArgument("Barvinok bracket needs k >= 1".into()));
    }
    if n == 0 {
        return Err(AprankError::InvalidArgument("variable count n must be at least 1".into()));
    }
    let kd = (k * d) as u64;
    let ln = ln_binom(kd + n as u64 - 1, kd);
    Ok(BarvinokBracket {
        lower_factor: 1.0,
        upper_factor: (ln / (2 * k) as f64).exp().max(1.0),
    })
}

/// Upper bound `(C k)^{d/2} ‖p‖_2` on `‖p‖_k` for a caller-chosen absolute
/// constant `C`. The constant is not known explicitly; nothing asserts on it.
pub fn reverse_holder_bound(l2: f64, k: f64, d: usize, constant: f64) -> f64 {
    (constant * k).powf(d as f64 / 2.0) * l2
}

struct MomentTable {
    ln_df: Vec<f64>,
    ln_denominator: f64,
}

impl MomentTable {
    /// Moments of total degree `2 * half` in `n` variables.
    fn new(n: usize, half: usize) -> Self {
        let ln_df = (0..=half as u64).map(ln_odd_double_factorial).collect();
        let ln_denominator = (0..half).map(|j| ((n + 2 * j) as f64).ln()).sum();
        MomentTable { ln_df, ln_denominator }
    }

    #[inline]
    fn even_moment(&self, a: &[u32], b: &[u32]) -> f64 {
        let mut ln = -self.ln_denominator;
        for (x, y) in a.iter().zip(b) {
            ln += self.ln_df[((x + y) / 2) as usize];
        }
        ln.exp()
    }
}

fn abs_coeffs(f: &SymmetricTensor) -> SymmetricTensor {
    let mut t = f.clone();
    t.coeffs_mut().iter_mut().for_each(|c| *c = c.abs());
    t
}

/// Exact `∫ f^{2k} dσ`, plus the same integral with coefficient magnitudes
/// (used to bound cancellation).
fn integrate_even_power(f: &SymmetricTensor, k: usize) -> Result<(f64, f64)> {
    let n = f.n();
    let d = f.d();
    let size_d = basis_len(n, d);
    // Power route: expand f^{2k} and integrate monomials.
    let power_cost: f64 = (1..2 * k).map(|j| basis_len(n, j * d) * size_d).sum::<f64>() + basis_len(n, 2 * k * d);
    // Pair route: expand g = f^k and integrate g² over parity-matched pairs.
    let pair_cost: f64 = (1..k).map(|j| basis_len(n, j * d) * size_d).sum::<f64>()
        + 8.0 * basis_len(n, k * d).powi(2) / 2f64.powi(n.min(60) as i32);

    let fa = abs_coeffs(f);
    if power_cost <= pair_cost {
        let h = f.pow(2 * k)?;
        let ha = fa.pow(2 * k)?;
        let zero = vec![0u32; n];
        let table = MomentTable::new(n, k * d);
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for i in 0..h.dim() {
            let gamma = h.basis().exponents(i);
            if gamma.iter().any(|g| g % 2 == 1) {
                continue;
            }
            let m = table.even_moment(gamma, &zero);
            sum += h.coeffs()[i] * m;
            abs_sum += ha.coeffs()[i] * m;
        }
        Ok((sum, abs_sum))
    } else {
        let g = f.pow(k)?;
        let ga = fa.pow(k)?;
        let table = MomentTable::new(n, k * d);
        // group monomials by the parity pattern of their exponents
        let mut classes: std::collections::BTreeMap<Vec<bool>, Vec<usize>> = Default::default();
        for i in 0..g.dim() {
            if ga.coeffs()[i] == 0.0 {
                continue;
            }
            let key: Vec<bool> = g.basis().exponents(i).iter().map(|e| e % 2 == 1).collect();
            classes.entry(key).or_default().push(i);
        }
        let classes: Vec<Vec<usize>> = classes.into_values().collect();
        let partial: Vec<(f64, f64)> = classes
            .par_iter()
            .map(|members| {
                let mut s = 0.0;
                let mut sa = 0.0;
                for (p, &a) in members.iter().enumerate() {
                    let ea = g.basis().exponents(a);
                    let (ca, caa) = (g.coeffs()[a], ga.coeffs()[a]);
                    let m = table.even_moment(ea, ea);
                    s += ca * ca * m;
                    sa += caa * caa * m;
                    for &b in &members[p + 1..] {
                        let m = table.even_moment(ea, g.basis().exponents(b));
                        s += 2.0 * ca * g.coeffs()[b] * m;
                        sa += 2.0 * caa * ga.coeffs()[b] * m;
                    }
                }
                (s, sa)
            })
            .collect();
        Ok(partial.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1)))
    }
}

/// Exact `‖f‖_r` for even integer `r`, by symbolic powering and closed-form
/// sphere moments.
pub fn lr_exact_even(f: &SymmetricTensor, r: u32, budget: f64) -> Result<f64> {
    if r == 0 || r % 2 == 1 {
        return Err(AprankError::InvalidArgument(format!("exact integration needs an even r, got {r}")));
    }
    let needed = basis_len(f.n(), r as usize * f.d());
    if needed > budget {
        return Err(AprankError::ExpansionBudget { r, needed, budget });
    }
    if f.is_zero() {
        return Ok(0.0);
    }
    let k = (r / 2) as usize;
    let (sum, abs_sum) = integrate_even_power(f, k)?;
    let rel_error = 8.0 * (k as f64 + 1.0) * f64::EPSILON * abs_sum / sum.max(f64::MIN_POSITIVE);
    if sum <= 0.0 || rel_error > MAX_EXACT_REL_ERROR {
        return Err(AprankError::IllConditioned { r, rel_error });
    }
    Ok(sum.powf(1.0 / r as f64))
}

/// Monte Carlo `‖f‖_r` from `samples` uniform sphere points; the standard
/// error is propagated through `t -> t^{1/r}` by the delta method.
pub fn lr_monte_carlo(f: &SymmetricTensor, r: f64, samples: usize, seed: u64) -> Result<EstimateResult> {
    if samples < 2 {
        return Err(AprankError::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(AprankError::InvalidArgument(format!("invalid exponent r = {r}")));
    }
    let n = f.n();
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = SeedStream::indexed(seed, i).sphere_point(n);
            f.eval_unchecked(x.as_slice()).abs().powf(r)
        })
        .collect();
    let count = samples as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let se_mean = (var / count).sqrt();
    let value = mean.powf(1.0 / r);
    let std_error = if mean > 0.0 {
        value / (r * mean) * se_mean
    } else {
        0.0
    };
    Ok(EstimateResult {
        value,
        std_error,
        samples: samples as u64,
        method: EstimateMethod::MonteCarlo,
    })
}

/// How `L_r` norms are evaluated inside the algorithms.
#[derive(Clone, Copy, Debug)]
pub struct LrPolicy {
    pub budget: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LrPolicy {
    fn default() -> Self {
        LrPolicy {
            budget: DEFAULT_EXPANSION_BUDGET,
            samples: 100_000,
            seed: 0,
        }
    }
}

/// `r` as an even integer, if it is one.
pub fn as_even_integer(r: f64) -> Option<u32> {
    (r.fract() == 0.0 && r >= 2.0 && r <= u32::MAX as f64 && (r as u32) % 2 == 0).then_some(r as u32)
}

/// Exact when `r` is even and the expansion fits the budget, Monte Carlo
/// otherwise.
pub fn estimate_lr(f: &SymmetricTensor, r: f64, policy: &LrPolicy) -> Result<EstimateResult> {
    if let Some(re) = as_even_integer(r) {
        match lr_exact_even(f, re, policy.budget) {
            Ok(v) => return Ok(EstimateResult::exact(v)),
            Err(AprankError::ExpansionBudget { .. } | AprankError::IllConditioned { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    lr_monte_carlo(f, r, policy.samples, policy.seed)
}

/// `max_i |f(x_i)|`, a lower bound on `‖f‖_∞`.
pub fn linf_lower(f: &SymmetricTensor, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(AprankError::InvalidArgument("linf_lower needs at least one point".into()));
    }
    Ok(f.eval_many(points)?.into_iter().fold(0.0, |m, v| m.max(v.abs())))
}
