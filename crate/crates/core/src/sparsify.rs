//! Empirical (Maurey) sparsification of a decomposition.
//!
//! Given `p = Σ c_i q_{v_i}`, draw `k` indices from `μ(i) = |c_i| / Σ|c_j|`
//! and average the signed rank-one terms, rescaled by `Σ|c_j|`. The expected
//! error in a norm of type-2 constant `T` is at most `2 T Σ|c_j| / √k`, so
//! `k = ⌈4 T² (Σ|c_j|)² / ε²⌉` draws suffice with constant probability.

use rand::distr::weighted::WeightedIndex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AprankError, Result};
use crate::norms::{
    barvinok_bracket, estimate_lr, lr_exact_even, lr_monte_carlo, EstimateMethod, EstimateResult, LrPolicy, NormKind,
    DEFAULT_EXPANSION_BUDGET,
};
use crate::rng::{mix, sphere_points, SeedStream};
use crate::search::{covering_oracle, DEFAULT_COVERING_BUDGET};
use crate::tensor::{basis_len, dot, Decomposition, RankOneTerm, SymmetricTensor};

/// Refuse draws larger than this.
pub const MAX_SAMPLE_COUNT: f64 = 1e8;

const TAG_DRAW: u64 = 0x44524157;
const TAG_CHECK: u64 = 0x43484b;

#[derive(Clone, Debug)]
pub struct SparsifyConfig {
    pub norm: NormKind,
    pub epsilon: f64,
    pub seed: u64,
    pub max_retries: usize,
    /// Replaces the type-2 constant from [`type2_bound`].
    pub type2_override: Option<f64>,
    /// Constant in front of the `L_r` type-2 estimate.
    pub type2_c: f64,
    /// Monte Carlo samples when an `L_r` check cannot be done exactly.
    pub samples: usize,
    pub expansion_budget: f64,
    pub covering_eta: f64,
    pub covering_budget: f64,
}

impl SparsifyConfig {
    pub fn new(norm: NormKind, epsilon: f64) -> Self {
        SparsifyConfig {
            norm,
            epsilon,
            seed: 0,
            max_retries: 16,
            type2_override: None,
            type2_c: 1.0,
            samples: 100_000,
            expansion_budget: DEFAULT_EXPANSION_BUDGET,
            covering_eta: 0.05,
            covering_budget: DEFAULT_COVERING_BUDGET,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AprankError::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_retries == 0 {
            return Err(AprankError::InvalidArgument("retries must be at least 1".into()));
        }
        if let Some(t) = self.type2_override {
            if !(t > 0.0 && t.is_finite()) {
                return Err(AprankError::InvalidArgument(format!("type-2 constant must be positive, got {t}")));
            }
        }
        if self.norm == NormKind::LinfLower {
            return Err(AprankError::InvalidArgument(
                "linf-lower is a lower bound and cannot certify a sparsification".into(),
            ));
        }
        Ok(())
    }
}

/// `Σ |c_i|`, an upper bound on the nuclear norm of the represented tensor.
pub fn nuclear_upper(dec: &Decomposition) -> f64 {
    dec.coefficient_l1()
}

/// Type-2 constant used for the sample count: 1 for HS,
/// `c √min{r, n ln(ed)}` for `L_r`, `√2 d` for the sup norm.
pub fn type2_bound(kind: NormKind, n: usize, d: usize, type2_c: f64) -> Result<f64> {
    match kind {
        NormKind::Hs => Ok(1.0),
        NormKind::Lr(r) => {
            let dim_term = n as f64 * (std::f64::consts::E * d.max(1) as f64).ln();
            Ok(type2_c * r.min(dim_term).sqrt())
        }
        NormKind::Linf => Ok(std::f64::consts::SQRT_2 * d as f64),
        NormKind::LinfLower => Err(AprankError::InvalidArgument("linf-lower has no type-2 constant".into())),
    }
}

/// `⌈4 T² S² / ε²⌉`. Values within rounding noise of an integer are not
/// pushed up to the next one.
pub fn sample_count(type2: f64, nuclear: f64, epsilon: f64) -> f64 {
    let value = 4.0 * type2 * type2 * nuclear * nuclear / (epsilon * epsilon);
    let rounded = value.round();
    if (value - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0)
    } else {
        value.ceil()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SparsifyOutcome {
    #[serde(skip)]
    pub decomposition: Decomposition,
    /// Draws used, including the accepted one.
    pub retries: usize,
    pub k: u64,
    pub type2: f64,
    pub nuclear: f64,
    /// Measured `‖p - q_k‖` of the accepted draw.
    pub error: EstimateResult,
}

/// One draw: per-index weights `sign(c_i) S count_i / k`.
fn draw(dec: &Decomposition, dist: &WeightedIndex<f64>, k: u64, nuclear: f64, seed: u64) -> Vec<f64> {
    let mut s = SeedStream::new(seed);
    let mut counts = vec![0u64; dec.len()];
    for _ in 0..k {
        counts[s.sample(dist)] += 1;
    }
    dec.terms
        .iter()
        .zip(&counts)
        .map(|(t, &c)| t.coeff.signum() * nuclear * (c as f64 / k as f64))
        .collect()
}

fn weighted_sum(dec: &Decomposition, weights: &[f64]) -> Result<SymmetricTensor> {
    let mut t = SymmetricTensor::zeros(dec.n(), dec.d())?;
    for (w, term) in weights.iter().zip(&dec.terms) {
        if *w != 0.0 {
            t.add_rank_one(*w, &term.vector)?;
        }
    }
    Ok(t)
}

/// `‖Σ δ_i q_{v_i}‖_HS`, through the Gram matrix or the coefficients,
/// whichever is cheaper.
fn hs_of_combination(dec: &Decomposition, delta: &[f64]) -> Result<f64> {
    let m = dec.len() as f64;
    let dim = basis_len(dec.n(), dec.d());
    if m * m * dec.n() as f64 <= m * dim {
        let d = dec.d() as i32;
        let terms = &dec.terms;
        let sq: f64 = (0..terms.len())
            .into_par_iter()
            .map(|i| {
                let vi = terms[i].vector.as_slice();
                (0..terms.len())
                    .map(|j| delta[i] * delta[j] * dot(vi, terms[j].vector.as_slice()).powi(d))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        Ok(sq.max(0.0).sqrt())
    } else {
        Ok(weighted_sum(dec, delta)?.hs_norm())
    }
}

/// Certified upper bound on `‖g‖_∞`: covering grid when affordable, else the
/// Barvinok factor times the largest exactly computable `‖g‖_{2k}`, else the
/// factor times a Monte Carlo `‖g‖_2` padded by two standard errors.
pub fn linf_upper(g: &SymmetricTensor, eta: f64, covering_budget: f64, expansion_budget: f64, seed: u64) -> Result<f64> {
    match covering_oracle(g, eta, covering_budget) {
        Ok(c) => return Ok(c.upper),
        Err(AprankError::CoveringBudget { .. }) => {}
        Err(e) => return Err(e),
    }
    if g.is_zero() {
        return Ok(0.0);
    }
    let (n, d) = (g.n(), g.d());
    let kmax = (1..=32).take_while(|&k| basis_len(n, 2 * k * d) <= expansion_budget).last();
    let mut best = f64::INFINITY;
    for k in (1..=kmax.unwrap_or(0)).rev() {
        match lr_exact_even(g, 2 * k as u32, expansion_budget) {
            Ok(v) => {
                best = best.min(barvinok_bracket(n, d, k)?.upper_factor * v);
                break;
            }
            Err(AprankError::IllConditioned { .. } | AprankError::ExpansionBudget { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if best.is_finite() {
        return Ok(best);
    }
    let mc = lr_monte_carlo(g, 2.0, 100_000, seed)?;
    Ok(barvinok_bracket(n, d, 1)?.upper_factor * (mc.value + 2.0 * mc.std_error))
}

/// Measured error and whether it certifies `‖p - q_k‖ <= ε`.
fn check(dec: &Decomposition, delta: &[f64], cfg: &SparsifyConfig, seed: u64) -> Result<(EstimateResult, bool)> {
    let eps = cfg.epsilon;
    match cfg.norm {
        NormKind::Hs => {
            let e = EstimateResult::exact(hs_of_combination(dec, delta)?);
            Ok((e, e.value <= eps))
        }
        NormKind::Lr(r) => {
            let policy = LrPolicy {
                budget: cfg.expansion_budget,
                samples: cfg.samples,
                seed,
            };
            let e = estimate_lr(&weighted_sum(dec, delta)?, r, &policy)?;
            Ok((e, e.value <= eps - 2.0 * e.std_error))
        }
        NormKind::Linf => {
            let v = linf_upper(
                &weighted_sum(dec, delta)?,
                cfg.covering_eta,
                cfg.covering_budget,
                cfg.expansion_budget,
                seed,
            )?;
            let e = EstimateResult {
                value: v,
                std_error: 0.0,
                samples: 0,
                method: EstimateMethod::Covering,
            };
            Ok((e, v <= eps))
        }
        NormKind::LinfLower => unreachable!("rejected by validate"),
    }
}

/// Sparsifies `dec` to at most `⌈4 T² (Σ|c_i|)² / ε²⌉` terms, redrawing until
/// the measured error is at most `ε` or the retries run out.
pub fn maurey_sparsify(dec: &Decomposition, cfg: &SparsifyConfig) -> Result<SparsifyOutcome> {
    cfg.validate()?;
    if dec.is_empty() {
        return Err(AprankError::InvalidArgument("cannot sparsify an empty decomposition".into()));
    }
    let nuclear = nuclear_upper(dec);
    let type2 = match cfg.type2_override {
        Some(t) => t,
        None => type2_bound(cfg.norm, dec.n(), dec.d(), cfg.type2_c)?,
    };
    if nuclear == 0.0 {
        return Ok(SparsifyOutcome {
            decomposition: Decomposition::new(dec.n(), dec.d()),
            retries: 0,
            k: 0,
            type2,
            nuclear,
            error: EstimateResult::exact(0.0),
        });
    }
    let kf = sample_count(type2, nuclear, cfg.epsilon);
    if kf > MAX_SAMPLE_COUNT {
        return Err(AprankError::InvalidArgument(format!(
            "sparsification needs {kf:.3e} draws, above the limit {MAX_SAMPLE_COUNT:.0e}"
        )));
    }
    let k = kf as u64;
    let dist = WeightedIndex::new(dec.terms.iter().map(|t| t.coeff.abs()))
        .map_err(|e| AprankError::InvalidArgument(format!("bad sampling weights: {e}")))?;

    let mut best: Option<(Vec<f64>, EstimateResult)> = None;
    for attempt in 0..cfg.max_retries {
        let weights = draw(dec, &dist, k, nuclear, mix(mix(cfg.seed, TAG_DRAW), attempt as u64));
        let delta: Vec<f64> = dec.terms.iter().zip(&weights).map(|(t, w)| t.coeff - w).collect();
        let (error, ok) = check(dec, &delta, cfg, mix(mix(cfg.seed, TAG_CHECK), attempt as u64))?;
        if ok {
            return Ok(SparsifyOutcome {
                decomposition: to_decomposition(dec, &weights)?,
                retries: attempt + 1,
                k,
                type2,
                nuclear,
                error,
            });
        }
        if best.as_ref().is_none_or(|(_, e)| error.value < e.value) {
            best = Some((weights, error));
        }
    }
    let (weights, error) = best.expect("at least one draw");
    Err(AprankError::SparsifyFailure {
        retries: cfg.max_retries,
        best: Box::new(to_decomposition(dec, &weights)?),
        best_error: error.value,
    })
}

fn to_decomposition(dec: &Decomposition, weights: &[f64]) -> Result<Decomposition> {
    let terms = weights
        .iter()
        .zip(&dec.terms)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, t)| RankOneTerm::new(*w, t.vector.clone()))
        .collect();
    Decomposition::from_terms(dec.n(), dec.d(), terms)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KhintchineCheck {
    /// Mean over sign draws of `max_y |Σ ε_i ⟨x_i, y⟩^d|` on sampled `y`.
    pub average_sup: f64,
    pub std_error: f64,
    /// `2d (Σ ‖x_i‖^{2d})^{1/2}`.
    pub bound: f64,
}

/// Rademacher average of the sampled sup of `Σ ε_i x_i^{⊗d}` against the
/// tensor Khintchine bound. Sampling only lowers the sup, so the average
/// must come out below the bound.
pub fn khintchine_check(xs: &[Vec<f64>], d: usize, sign_draws: usize, points: usize, seed: u64) -> Result<KhintchineCheck> {
    let n = xs.first().map(|x| x.len()).unwrap_or(0);
    if n == 0 || xs.iter().any(|x| x.len() != n) {
        return Err(AprankError::ShapeMismatch("vectors must be nonempty and of equal length".into()));
    }
    if sign_draws < 2 || points == 0 {
        return Err(AprankError::InvalidArgument("need at least 2 sign draws and 1 point".into()));
    }
    let bound = 2.0 * d as f64 * xs.iter().map(|x| dot(x, x).powi(d as i32)).sum::<f64>().sqrt();
    let ys = sphere_points(n, points, mix(seed, 1));
    let table: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|y| xs.iter().map(|x| dot(x, y).powi(d as i32)).collect())
        .collect();
    let sups: Vec<f64> = (0..sign_draws as u64)
        .into_par_iter()
        .map(|t| {
            let mut s = SeedStream::indexed(mix(seed, 2), t);
            let signs: Vec<f64> = xs.iter().map(|_| s.rademacher()).collect();
            table.iter().map(|row| dot(row, &signs).abs()).fold(0.0, f64::max)
        })
        .collect();
    let m = sups.len() as f64;
    let mean = sups.iter().sum::<f64>() / m;
    let var = sups.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(KhintchineCheck {
        average_sup: mean,
        std_error: (var / m).sqrt(),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::UnitVector;

    fn random_dec(n: usize, d: usize, m: usize, seed: u64) -> Decomposition {
        let mut s = SeedStream::new(seed);
        let terms = (0..m).map(|_| RankOneTerm::new(s.gaussian(), s.sphere_point(n))).collect();
        Decomposition::from_terms(n, d, terms).unwrap()
    }

    fn normalized(dec: Decomposition) -> Decomposition {
        let s = nuclear_upper(&dec);
        let terms = dec.terms.iter().map(|t| RankOneTerm::new(t.coeff / s, t.vector.clone())).collect();
        Decomposition::from_terms(dec.n(), dec.d(), terms).unwrap()
    }

    #[test]
    fn nuclear_examples() {
        let v = UnitVector::basis(2, 0);
        let one = Decomposition::from_terms(2, 3, vec![RankOneTerm::new(1.0, v.clone())]).unwrap();
        assert_eq!(nuclear_upper(&one), 1.0);
        let two = Decomposition::from_terms(2, 3, vec![RankOneTerm::new(2.0, v.clone()), RankOneTerm::new(-3.0, v)])
            .unwrap();
        assert_eq!(nuclear_upper(&two), 5.0);
        for seed in 0..20 {
            let dec = random_dec(3, 1 + (seed as usize % 5), 6, seed);
            assert!(nuclear_upper(&dec) >= dec.materialize().unwrap().hs_norm() - 1e-12);
        }
    }

    #[test]
    fn type2_examples() {
        assert_eq!(type2_bound(NormKind::Hs, 5, 3, 1.0).unwrap(), 1.0);
        assert!((type2_bound(NormKind::Linf, 5, 3, 1.0).unwrap() - 4.2426).abs() < 1e-4);
        assert!((type2_bound(NormKind::Lr(2.0), 3, 2, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(type2_bound(NormKind::LinfLower, 3, 2, 1.0).is_err());
    }

    #[test]
    fn single_term_is_exact() {
        let v = SeedStream::new(3).sphere_point(3);
        let dec = Decomposition::from_terms(3, 4, vec![RankOneTerm::new(1.0, v)]).unwrap();
        let out = maurey_sparsify(&dec, &SparsifyConfig::new(NormKind::Hs, 0.1)).unwrap();
        assert_eq!(out.retries, 1);
        assert_eq!(out.error.value, 0.0);
        assert_eq!(out.decomposition, dec);
    }

    #[test]
    fn sample_count_and_rank_contract() {
        let dec = normalized(random_dec(3, 3, 50, 1));
        let out = maurey_sparsify(&dec, &SparsifyConfig::new(NormKind::Hs, 0.5)).unwrap();
        assert_eq!(out.k, 16);
        assert!(out.decomposition.len() <= 16);
        let diff = dec.materialize().unwrap().sub(&out.decomposition.materialize().unwrap()).unwrap();
        assert!((diff.hs_norm() - out.error.value).abs() < 1e-10);
        assert!(diff.hs_norm() <= 0.5);
    }

    #[test]
    fn antipodal_pair_sign_handling() {
        let v = SeedStream::new(4).sphere_point(3);
        let dec = Decomposition::from_terms(3, 2, vec![RankOneTerm::new(0.5, v.clone()), RankOneTerm::new(-0.5, v)])
            .unwrap();
        let mut cfg = SparsifyConfig::new(NormKind::Hs, 0.5);
        cfg.max_retries = 64;
        let out = maurey_sparsify(&dec, &cfg).unwrap();
        let q = out.decomposition.materialize().unwrap();
        assert!((q.hs_norm() - out.error.value).abs() < 1e-12);
        assert!(q.hs_norm() <= 0.5);
    }

    #[test]
    fn failure_carries_best_candidate() {
        let dec = normalized(random_dec(3, 3, 50, 9));
        let mut cfg = SparsifyConfig::new(NormKind::Hs, 0.5);
        cfg.type2_override = Some(0.05);
        cfg.max_retries = 3;
        match maurey_sparsify(&dec, &cfg) {
            Err(AprankError::SparsifyFailure { retries, best, best_error }) => {
                assert_eq!(retries, 3);
                let diff = dec.materialize().unwrap().sub(&best.materialize().unwrap()).unwrap();
                assert!((diff.hs_norm() - best_error).abs() < 1e-10);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn mean_error_bound() {
        let dec = normalized(random_dec(3, 3, 50, 2));
        let p = dec.materialize().unwrap();
        let nuclear = nuclear_upper(&dec);
        let dist = WeightedIndex::new(dec.terms.iter().map(|t| t.coeff.abs())).unwrap();
        let k = 16;
        let errs: Vec<f64> = (0..500)
            .map(|t| {
                let w = draw(&dec, &dist, k, nuclear, t);
                p.sub(&weighted_sum(&dec, &w).unwrap()).unwrap().hs_norm()
            })
            .collect();
        let m = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / m;
        let se = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        assert!(mean <= 2.0 * nuclear / (k as f64).sqrt() + 3.0 * se);
    }

    #[test]
    fn lr_and_linf_checks() {
        let dec = normalized(random_dec(2, 4, 10, 5));
        let mut cfg = SparsifyConfig::new(NormKind::Lr(4.0), 0.5);
        cfg.seed = 3;
        let out = maurey_sparsify(&dec, &cfg).unwrap();
        assert_eq!(out.error.method, EstimateMethod::Exact);
        let diff = dec.materialize().unwrap().sub(&out.decomposition.materialize().unwrap()).unwrap();
        assert!(lr_exact_even(&diff, 4, 1e7).unwrap() <= 0.5);

        let cfg = SparsifyConfig::new(NormKind::Linf, 0.5);
        let out = maurey_sparsify(&dec, &cfg).unwrap();
        let diff = dec.materialize().unwrap().sub(&out.decomposition.materialize().unwrap()).unwrap();
        assert!(covering_oracle(&diff, 0.02, 1e8).unwrap().lower <= 0.5);
        assert!(out.decomposition.len() as f64 <= sample_count(type2_bound(NormKind::Linf, 2, 4, 1.0).unwrap(), 1.0, 0.5));
    }

    #[test]
    fn barvinok_route_bounds_sup() {
        let dec = random_dec(3, 3, 4, 6);
        let g = dec.materialize().unwrap();
        let upper = linf_upper(&g, 0.05, 10.0, 1e6, 1).unwrap();
        let lower = covering_oracle(&g, 0.05, 1e8).unwrap().lower;
        assert!(upper >= lower);
    }

    #[test]
    fn khintchine_holds() {
        let mut s = SeedStream::new(1);
        let xs: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| s.gaussian()).collect()).collect();
        let c = khintchine_check(&xs, 3, 50, 1000, 2).unwrap();
        assert!(c.average_sup <= c.bound);
        assert!(c.average_sup > 0.0);
    }
}
