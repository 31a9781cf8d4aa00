//! Searching the sphere for large values of a form.
//!
//! Random search for half-norm witnesses, the sample-size bound that makes
//! it succeed with high probability, a covering-grid oracle with a
//! `(1 - η²)` multiplicative guarantee, and projected-gradient refinement.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{AprankError, Result};
use crate::rng::{mix, SeedStream};
use crate::tensor::{euclidean_norm, SymmetricTensor, UnitVector};

/// Default cap on covering-grid evaluations.
pub const DEFAULT_COVERING_BUDGET: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub sample_size: usize,
    pub max_retries: usize,
    pub seed: u64,
    /// Absolute constant in the polynomial branch of the sample-size bound.
    pub c1: f64,
    /// Reject witnesses whose `|cos|` with an earlier pick reaches this value.
    pub angle_cos_threshold: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            sample_size: 100_000,
            max_retries: 20,
            seed: 0,
            c1: 3.0,
            angle_cos_threshold: Some(0.8),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(AprankError::InvalidArgument("sample size must be at least 1".into()));
        }
        if self.max_retries == 0 {
            return Err(AprankError::InvalidArgument("retries must be at least 1".into()));
        }
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(AprankError::InvalidArgument(format!("c1 must be positive, got {}", self.c1)));
        }
        if let Some(t) = self.angle_cos_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(AprankError::InvalidArgument(format!("angle threshold {t} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `count` i.i.d. uniform points on `S^{n-1}`.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Vec<UnitVector> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| SeedStream::indexed(seed, i).sphere_point(n))
        .collect()
}

/// `ln binom(x + n - 1, x)` for real `x >= 0`.
fn ln_binom_real(x: f64, n: usize) -> f64 {
    ln_gamma(x + n as f64) - ln_gamma(x + 1.0) - ln_gamma(n as f64)
}

/// `α(n, d, r) = min{ (c1 r)^{d/2}, binom(rd + n - 1, rd)^{1/(2r)} }`.
pub fn alpha_bound(n: usize, d: usize, r: f64, c1: f64) -> Result<f64> {
    if !(r >= 2.0 && r.is_finite()) {
        return Err(AprankError::InvalidArgument(format!("alpha bound needs r >= 2, got {r}")));
    }
    if n == 0 {
        return Err(AprankError::InvalidArgument("variable count n must be at least 1".into()));
    }
    let poly = (d as f64 / 2.0) * (c1 * r).ln();
    let binom = ln_binom_real(r * d as f64, n) / (2.0 * r);
    Ok(poly.min(binom).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSizeBound {
    pub count: u64,
    /// True when `⌈t α^{2r}⌉` exceeded the cap and `count` is the cap.
    pub saturated: bool,
    /// `ln(t α^{2r})`, finite even when the count saturates.
    pub ln_value: f64,
}

/// `⌈t α(n,d,r)^{2r}⌉`: enough samples to find a half-norm witness with
/// probability at least `1 - e^{-t}`.
pub fn sample_size_bound(n: usize, d: usize, r: f64, t: f64, c1: f64, cap: u64) -> Result<SampleSizeBound> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(AprankError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let alpha = alpha_bound(n, d, r, c1)?;
    let ln_value = t.ln() + 2.0 * r * alpha.ln();
    let value = ln_value.exp();
    if !value.is_finite() || value > cap as f64 {
        return Ok(SampleSizeBound {
            count: cap,
            saturated: true,
            ln_value,
        });
    }
    // Exact powers like α^{2r} = 5 should not round up to 6.
    let rounded = value.round();
    let count = if (value - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        value.ceil()
    };
    Ok(SampleSizeBound {
        count: (count as u64).max(1),
        saturated: false,
        ln_value,
    })
}

/// A point found by random search.
#[derive(Clone, Debug)]
pub struct Witness {
    pub vector: UnitVector,
    /// Signed value `g(v)`.
    pub value: f64,
    /// Batches drawn, including the successful one.
    pub batches: usize,
    /// Batches whose qualifying points were all removed by the filter.
    pub filtered_batches: usize,
    /// The filter ran out of patience and this witness ignores it.
    pub filter_dropped: bool,
}

/// Finds `v` with `|g(v)| >= norm_value / 2`, returning the best qualifying
/// sample. Fresh batches of `cfg.sample_size` points are drawn until one
/// succeeds or `cfg.max_retries` batches are spent.
pub fn search_halfnorm(g: &SymmetricTensor, norm_value: f64, cfg: &SearchConfig) -> Result<Witness> {
    search_halfnorm_filtered(g, norm_value, cfg, 0, None)
}

/// Extra acceptance test for witnesses. After `patience` batches in which
/// every qualifying point was rejected, the filter is dropped for the rest
/// of the search.
pub struct WitnessFilter<'a> {
    pub accept: &'a (dyn Fn(&[f64]) -> bool + Sync),
    pub patience: usize,
}

/// [`search_halfnorm`] with an optional filter. `stream` separates the
/// batches of repeated calls under one seed.
pub fn search_halfnorm_filtered(
    g: &SymmetricTensor,
    norm_value: f64,
    cfg: &SearchConfig,
    stream: u64,
    filter: Option<&WitnessFilter<'_>>,
) -> Result<Witness> {
    cfg.validate()?;
    let n = g.n();
    let required = 0.5 * norm_value;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut filtered_batches = 0;

    for batch in 0..cfg.max_retries {
        let seed = mix(mix(cfg.seed, stream), batch as u64);
        let values: Vec<f64> = (0..cfg.sample_size as u64)
            .into_par_iter()
            .map(|i| {
                let x = SeedStream::indexed(seed, i).sphere_point(n);
                g.eval_unchecked(x.as_slice())
            })
            .collect();

        let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() >= required).collect();
        if let Some(i) = (0..values.len()).max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()).then(b.cmp(&a)))
        {
            if best.as_ref().is_none_or(|(_, v)| values[i].abs() > v.abs()) {
                let x = SeedStream::indexed(seed, i as u64).sphere_point(n).into_inner();
                best = Some((x, values[i]));
            }
        }
        if order.is_empty() {
            continue;
        }
        order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
        let active = filter.filter(|f| filtered_batches < f.patience);
        for &i in &order {
            let x = SeedStream::indexed(seed, i as u64).sphere_point(n);
            if active.is_none_or(|f| (f.accept)(x.as_slice())) {
                return Ok(Witness {
                    vector: x,
                    value: values[i],
                    batches: batch + 1,
                    filtered_batches,
                    filter_dropped: false,
                });
            }
        }
        filtered_batches += 1;
        if filter.is_some_and(|f| filtered_batches >= f.patience) {
            let i = order[0];
            return Ok(Witness {
                vector: SeedStream::indexed(seed, i as u64).sphere_point(n),
                value: values[i],
                batches: batch + 1,
                filtered_batches,
                filter_dropped: true,
            });
        }
    }

    let (best_point, best_value) = best.unwrap_or_default();
    Err(AprankError::SearchFailure {
        batches: cfg.max_retries,
        best_point,
        best_value,
        required,
        partial: None,
    })
}

#[derive(Clone, Debug)]
pub struct CoveringResult {
    pub vector: UnitVector,
    /// `|g(v)|` at the best grid point.
    pub lower: f64,
    /// `lower / (1 - η²)`, an upper bound on `‖g‖_∞`.
    pub upper: f64,
    pub evaluations: u64,
}

struct Grid {
    n: usize,
    per_axis: usize,
    per_face: u64,
}

impl Grid {
    fn new(n: usize, d: usize, eta: f64) -> Self {
        let pitch = eta / (d.max(1) as f64 * (n as f64).sqrt());
        let per_axis = (2.0 / pitch).ceil() as usize + 1;
        let per_face = (per_axis as f64).powi(n as i32 - 1);
        Grid {
            n,
            per_axis,
            per_face: per_face.min(u64::MAX as f64) as u64,
        }
    }

    fn count(&self) -> f64 {
        2.0 * self.n as f64 * (self.per_axis as f64).powi(self.n as i32 - 1)
    }

    /// Grid point `idx` on the surface of `[-1, 1]^n`, projected to the sphere.
    fn point(&self, idx: u64) -> Vec<f64> {
        let face = (idx / self.per_face) as usize;
        let mut rem = idx % self.per_face;
        let axis = face / 2;
        let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
        let step = 2.0 / (self.per_axis - 1) as f64;
        let mut x = vec![0.0; self.n];
        for (i, xi) in x.iter_mut().enumerate() {
            if i == axis {
                *xi = sign;
            } else {
                let j = rem % self.per_axis as u64;
                rem /= self.per_axis as u64;
                *xi = -1.0 + step * j as f64;
            }
        }
        let norm = euclidean_norm(&x);
        x.iter_mut().for_each(|v| *v /= norm);
        x
    }
}

/// Number of evaluations [`covering_oracle`] performs for `(n, d, η)`.
pub fn covering_evaluations(n: usize, d: usize, eta: f64) -> f64 {
    Grid::new(n, d, eta).count()
}

/// Evaluates `g` on a net of `S^{n-1}` fine enough that the best grid value
/// is within a factor `1 - η²` of `‖g‖_∞`.
///
/// The net is a square grid of pitch `η / (d √n)` on the faces of the cube
/// `[-1, 1]^n`, projected radially; every point of the sphere is within
/// geodesic distance `η / (2d)` of a net point.
pub fn covering_oracle(g: &SymmetricTensor, eta: f64, budget: f64) -> Result<CoveringResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(AprankError::InvalidArgument(format!("covering resolution must be in (0, 1), got {eta}")));
    }
    let n = g.n();
    let grid = Grid::new(n, g.d(), eta);
    let needed = grid.count();
    if needed > budget {
        return Err(AprankError::CoveringBudget { needed, budget });
    }
    let total = 2 * n as u64 * grid.per_face;
    let (best_idx, best_val) = (0..total)
        .into_par_iter()
        .map(|i| (i, g.eval_unchecked(&grid.point(i)).abs()))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    let vector = UnitVector::normalize(grid.point(best_idx))?;
    Ok(CoveringResult {
        vector,
        lower: best_val,
        upper: best_val / (1.0 - eta * eta),
        evaluations: total,
    })
}

/// Projected-gradient ascent of `|g|` on the sphere with backtracking.
/// Never returns a point with smaller `|g|` than `v0`.
pub fn local_ascent(g: &SymmetricTensor, v0: &UnitVector, iters: usize) -> Result<(UnitVector, f64)> {
    let d = g.d() as f64;
    let mut v = v0.clone();
    let (mut value, mut grad) = g.eval_with_gradient(v.as_slice())?;
    let mut step = 1.0 / (d.max(1.0) * value.abs().max(1e-12));
    for _ in 0..iters {
        let s = value.signum();
        let radial = crate::tensor::dot(&grad, v.as_slice());
        let tangent: Vec<f64> = grad.iter().zip(v.as_slice()).map(|(gi, vi)| s * (gi - radial * vi)).collect();
        if euclidean_norm(&tangent) <= 1e-15 * grad.iter().map(|x| x.abs()).sum::<f64>().max(1e-300) {
            break;
        }
        let try_step = |t: f64| -> Result<(UnitVector, f64, Vec<f64>)> {
            let cand: Vec<f64> = v.as_slice().iter().zip(&tangent).map(|(vi, ti)| vi + t * ti).collect();
            let cand = UnitVector::normalize(cand)?;
            let (cv, cg) = g.eval_with_gradient(cand.as_slice())?;
            Ok((cand, cv, cg))
        };
        let mut found = None;
        let mut t = step * 2.0;
        for _ in 0..60 {
            let c = try_step(t)?;
            if c.1.abs() > value.abs() {
                found = Some(c);
                break;
            }
            t *= 0.5;
        }
        let Some(mut best) = found else { break };
        // an overshooting step can improve a little; keep halving while that helps
        for _ in 0..60 {
            let c = try_step(t * 0.5)?;
            if c.1.abs() <= best.1.abs() {
                break;
            }
            best = c;
            t *= 0.5;
        }
        (v, value, grad) = best;
        step = t;
    }
    Ok((v, value))
}
