//! Greedy energy-increment decomposition.
//!
//! Each loop measures the residual `g = f - Π_W f` in `L_r`, finds a point
//! `v` with `|g(v)| >= ‖g‖_r / 2`, adds `q_v` to `W` and re-projects. The HS
//! energy `‖Π_W f‖²` grows by at least `g(v)²` per loop, which bounds the
//! number of loops by the HS norm of `f`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{AprankError, Result};
use crate::norms::{estimate_lr, EstimateMethod, EstimateResult, LrPolicy, DEFAULT_EXPANSION_BUDGET};
use crate::rng::{mix, sphere_points};
use crate::search::{
    covering_oracle, local_ascent, search_halfnorm_filtered, SearchConfig, WitnessFilter, DEFAULT_COVERING_BUDGET,
};
use crate::tensor::{Decomposition, RankOneTerm, SymmetricTensor, UnitVector};

/// Gram systems with a larger condition number are refused.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

const TAG_NORM: u64 = 0x4e4f524d;
const TAG_WITNESS: u64 = 0x5749544e;
const TAG_CERT: u64 = 0x43455254;

#[derive(Clone, Debug)]
pub struct EnergyConfig {
    pub search: SearchConfig,
    /// Largest expansion the exact `L_r` integrator may build.
    pub expansion_budget: f64,
    /// Grid resolution for the `r = ∞` residual.
    pub covering_eta: f64,
    pub covering_budget: f64,
    /// Consecutive filtered batches before the angle filter is dropped.
    pub angle_patience: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            search: SearchConfig::default(),
            expansion_budget: DEFAULT_EXPANSION_BUDGET,
            covering_eta: 0.05,
            covering_budget: DEFAULT_COVERING_BUDGET,
            angle_patience: 5,
        }
    }
}

impl From<SearchConfig> for EnergyConfig {
    fn from(search: SearchConfig) -> Self {
        EnergyConfig {
            search,
            ..Default::default()
        }
    }
}

/// Loop state: the selected vectors, their Gram matrix and the current
/// projection coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct GreedyState {
    pub vectors: Vec<UnitVector>,
    pub gram: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub residual_r_norm: f64,
    pub loops: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopRecord {
    pub index: usize,
    /// Residual norm measured before the witness search.
    pub residual_norm: EstimateResult,
    pub witness_value: f64,
    /// `‖Π_W f‖²_HS` after adding the witness.
    pub energy: f64,
    pub batches: usize,
    pub filtered_batches: usize,
    pub filter_dropped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub loops: Vec<LoopRecord>,
    pub final_residual: EstimateResult,
    /// Independent re-estimate of the final residual under another seed.
    pub certificate: EstimateResult,
    pub hs_norm_sq: f64,
    pub loop_bound: u64,
    pub elapsed_secs: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyOutcome {
    pub decomposition: Decomposition,
    pub state: GreedyState,
    pub report: EnergyReport,
}

/// Largest over smallest eigenvalue; infinite when the matrix is not
/// positive definite.
fn condition(eigen: &SymmetricEigen<f64, nalgebra::Dyn>) -> f64 {
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn gram_matrix(vectors: &[UnitVector], d: usize) -> DMatrix<f64> {
    let m = vectors.len();
    DMatrix::from_fn(m, m, |i, j| vectors[i].dot(&vectors[j]).powi(d as i32))
}

/// Solves `G λ = b` by eigendecomposition, with one refinement step.
fn solve_gram(gram: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let m = gram.nrows();
    let eigen = SymmetricEigen::new(gram.clone());
    let cond = condition(&eigen);
    if !(cond <= MAX_GRAM_CONDITION) {
        // name the first vector that makes the leading block singular
        let index = (1..=m)
            .find(|&k| condition(&SymmetricEigen::new(gram.view((0, 0), (k, k)).into_owned())) > MAX_GRAM_CONDITION)
            .unwrap_or(m)
            - 1;
        return Err(AprankError::RankDeficient { index, condition: cond });
    }
    let apply_inverse = |rhs: &DVector<f64>| {
        let mut y = eigen.eigenvectors.transpose() * rhs;
        for (yi, e) in y.iter_mut().zip(eigen.eigenvalues.iter()) {
            *yi /= e;
        }
        &eigen.eigenvectors * y
    };
    let b = DVector::from_column_slice(b);
    let mut x = apply_inverse(&b);
    let residual = &b - gram * &x;
    x += apply_inverse(&residual);
    Ok(x.iter().copied().collect())
}

/// HS-orthogonal projection of `f` onto `span{q_v : v in vectors}`. Uses
/// `⟨f, q_v⟩_HS = f(v)` and `⟨q_v, q_w⟩_HS = ⟨v, w⟩^d`.
pub fn project_hs(f: &SymmetricTensor, vectors: &[UnitVector]) -> Result<(Vec<f64>, SymmetricTensor)> {
    if vectors.is_empty() {
        return Err(AprankError::InvalidArgument("projection needs at least one vector".into()));
    }
    if let Some(v) = vectors.iter().find(|v| v.dim() != f.n()) {
        return Err(AprankError::DimensionMismatch {
            expected: f.n(),
            got: v.dim(),
        });
    }
    let b: Vec<f64> = vectors.iter().map(|v| f.eval_unchecked(v.as_slice())).collect();
    let coeffs = solve_gram(&gram_matrix(vectors, f.d()), &b)?;
    let mut projection = SymmetricTensor::zeros(f.n(), f.d())?;
    for (c, v) in coeffs.iter().zip(vectors) {
        projection.add_rank_one(*c, v)?;
    }
    Ok((coeffs, projection))
}

/// `‖g‖_∞` by covering grid when affordable, else the best of
/// `cfg.search.sample_size` samples refined by local ascent.
fn linf_residual(g: &SymmetricTensor, cfg: &EnergyConfig, seed: u64) -> Result<EstimateResult> {
    match covering_oracle(g, cfg.covering_eta, cfg.covering_budget) {
        Ok(c) => Ok(EstimateResult {
            value: c.upper,
            std_error: 0.0,
            samples: c.evaluations,
            method: EstimateMethod::Covering,
        }),
        Err(AprankError::CoveringBudget { .. }) => {
            let points = sphere_points(g.n(), cfg.search.sample_size, seed);
            let values = g.eval_many(&points)?;
            let best = (0..values.len())
                .max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()).then(b.cmp(&a)))
                .ok_or_else(|| AprankError::InvalidArgument("sample size must be at least 1".into()))?;
            let start = UnitVector::normalize(points[best].clone())?;
            let (_, value) = local_ascent(g, &start, 100)?;
            Ok(EstimateResult {
                value: value.abs(),
                std_error: 0.0,
                samples: points.len() as u64,
                method: EstimateMethod::MonteCarlo,
            })
        }
        Err(e) => Err(e),
    }
}

/// Residual norm in `L_r`; `r = ∞` routes to [`linf_residual`].
pub fn residual_norm(g: &SymmetricTensor, r: f64, cfg: &EnergyConfig, seed: u64) -> Result<EstimateResult> {
    if r.is_infinite() {
        return linf_residual(g, cfg, seed);
    }
    let policy = LrPolicy {
        budget: cfg.expansion_budget,
        samples: cfg.search.sample_size,
        seed,
    };
    estimate_lr(g, r, &policy)
}

fn validate(r: f64, epsilon: f64, cfg: &EnergyConfig) -> Result<()> {
    if !(r >= 2.0) {
        return Err(AprankError::InvalidArgument(format!("r must be at least 2, got {r}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AprankError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if cfg.angle_patience == 0 {
        return Err(AprankError::InvalidArgument("angle patience must be at least 1".into()));
    }
    cfg.search.validate()
}

/// Greedy decomposition of `f` with `‖f - f̃‖_r < ε`, where `r = ∞` is
/// allowed. Terminates after at most `⌈‖f‖²_HS / ε²⌉` loops.
pub fn decompose_energy(f: &SymmetricTensor, r: f64, epsilon: f64, cfg: &EnergyConfig) -> Result<EnergyOutcome> {
    validate(r, epsilon, cfg)?;
    let start = Instant::now();
    let d = f.d();
    let seed = cfg.search.seed;
    let hs_norm_sq = f.hs_norm().powi(2);
    let loop_bound = (hs_norm_sq / (epsilon * epsilon)).ceil() as u64;

    let mut state = GreedyState {
        vectors: Vec::new(),
        gram: Vec::new(),
        coeffs: Vec::new(),
        residual_r_norm: f64::NAN,
        loops: 0,
    };
    let mut records = Vec::new();
    let mut residual = f.clone();

    let current = |state: &GreedyState| {
        let terms = state
            .coeffs
            .iter()
            .zip(&state.vectors)
            .map(|(c, v)| RankOneTerm::new(*c, v.clone()))
            .collect();
        Decomposition::from_terms(f.n(), d, terms)
    };

    let final_residual = loop {
        let estimate = residual_norm(&residual, r, cfg, mix(mix(seed, TAG_NORM), state.loops as u64))?;
        state.residual_r_norm = estimate.value;
        if estimate.value < epsilon {
            break estimate;
        }
        if state.loops as u64 >= loop_bound {
            return Err(AprankError::InvariantViolation(format!(
                "residual norm {} still at least {epsilon} after {} loops, the HS energy bound",
                estimate.value, state.loops
            )));
        }

        let threshold = cfg.search.angle_cos_threshold;
        let selected = &state.vectors;
        let accept = |x: &[f64]| {
            threshold.is_none_or(|t| selected.iter().all(|v| crate::tensor::dot(x, v.as_slice()).abs() < t))
        };
        let filter = WitnessFilter {
            accept: &accept,
            patience: cfg.angle_patience,
        };
        let search = SearchConfig {
            seed: mix(seed, TAG_WITNESS),
            ..cfg.search.clone()
        };
        let use_filter = threshold.is_some() && !selected.is_empty();
        let witness = match search_halfnorm_filtered(
            &residual,
            estimate.value,
            &search,
            state.loops as u64,
            use_filter.then_some(&filter),
        ) {
            Ok(w) => w,
            Err(AprankError::SearchFailure {
                batches,
                best_point,
                best_value,
                required,
                ..
            }) => {
                return Err(AprankError::SearchFailure {
                    batches,
                    best_point,
                    best_value,
                    required,
                    partial: Some(Box::new(current(&state)?)),
                })
            }
            Err(e) => return Err(e),
        };

        let row: Vec<f64> = state.vectors.iter().map(|v| v.dot(&witness.vector).powi(d as i32)).collect();
        for (g_row, x) in state.gram.iter_mut().zip(&row) {
            g_row.push(*x);
        }
        let mut last = row;
        last.push(1.0);
        state.gram.push(last);
        state.vectors.push(witness.vector.clone());

        let (coeffs, projection) = project_hs(f, &state.vectors)?;
        let energy: f64 = coeffs
            .iter()
            .zip(&state.vectors)
            .map(|(c, v)| c * f.eval_unchecked(v.as_slice()))
            .sum();
        state.coeffs = coeffs;
        residual = f.sub(&projection)?;
        records.push(LoopRecord {
            index: state.loops,
            residual_norm: estimate,
            witness_value: witness.value,
            energy,
            batches: witness.batches,
            filtered_batches: witness.filtered_batches,
            filter_dropped: witness.filter_dropped,
        });
        state.loops += 1;
    };

    let certificate = if final_residual.method == EstimateMethod::Exact {
        final_residual
    } else {
        residual_norm(&residual, r, cfg, mix(seed, TAG_CERT))?
    };
    let decomposition = current(&state)?;
    Ok(EnergyOutcome {
        decomposition,
        state,
        report: EnergyReport {
            loops: records,
            final_residual,
            certificate,
            hs_norm_sq,
            loop_bound,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::lr_exact_even;
    use crate::rng::SeedStream;
    use crate::tensor::basis_len;

    fn random_tensor(n: usize, d: usize, seed: u64) -> SymmetricTensor {
        let mut s = SeedStream::new(seed);
        let len = basis_len(n, d) as usize;
        SymmetricTensor::from_coeffs(n, d, (0..len).map(|_| s.gaussian()).collect()).unwrap()
    }

    fn small_cfg(seed: u64) -> EnergyConfig {
        EnergyConfig::from(SearchConfig {
            sample_size: 5_000,
            seed,
            ..Default::default()
        })
    }

    #[test]
    fn projection_examples() {
        let v = SeedStream::new(1).sphere_point(3);
        let f = SymmetricTensor::rank_one(&v, 4).unwrap();
        let (c, p) = project_hs(&f, std::slice::from_ref(&v)).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!(f.sub(&p).unwrap().hs_norm() < 1e-12);

        let e1 = UnitVector::basis(3, 0);
        let e2 = UnitVector::basis(3, 1);
        let mut f = SymmetricTensor::rank_one(&e1, 3).unwrap();
        f.add_rank_one(1.0, &e2).unwrap();
        let (c, p) = project_hs(&f, std::slice::from_ref(&e1)).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        let res = f.sub(&p).unwrap();
        assert!((res.hs_norm() - 1.0).abs() < 1e-12);
        assert!(res.sub(&SymmetricTensor::rank_one(&e2, 3).unwrap()).unwrap().hs_norm() < 1e-12);

        assert!(project_hs(&f, &[]).is_err());
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        for seed in 0..20 {
            let f = random_tensor(4, 4, seed);
            let mut s = SeedStream::new(seed + 100);
            let vs: Vec<UnitVector> = (0..5).map(|_| s.sphere_point(4)).collect();
            let (_, p) = project_hs(&f, &vs).unwrap();
            let res = f.sub(&p).unwrap();
            for v in &vs {
                let q = SymmetricTensor::rank_one(v, 4).unwrap();
                assert!(res.hs_inner(&q).unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn repeated_vector_is_rank_deficient() {
        let f = random_tensor(3, 2, 5);
        let v = SeedStream::new(2).sphere_point(3);
        let w = SeedStream::new(3).sphere_point(3);
        match project_hs(&f, &[w, v.clone(), v]) {
            Err(AprankError::RankDeficient { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn rank_one_target_needs_one_term() {
        let v = SeedStream::new(8).sphere_point(3);
        let f = SymmetricTensor::rank_one(&v, 4).unwrap();
        for r in [2.0, 4.0, 3.0] {
            let out = decompose_energy(&f, r, 0.1, &small_cfg(1)).unwrap();
            assert_eq!(out.decomposition.len(), 1, "r = {r}");
            assert!(out.report.final_residual.value < 0.1);
        }
    }

    #[test]
    fn zero_tensor_is_immediate() {
        let f = SymmetricTensor::zeros(3, 4).unwrap();
        let out = decompose_energy(&f, 4.0, 0.1, &small_cfg(1)).unwrap();
        assert!(out.decomposition.is_empty());
        assert_eq!(out.state.loops, 0);
    }

    #[test]
    fn invalid_arguments() {
        let f = random_tensor(2, 2, 1);
        assert!(decompose_energy(&f, 1.0, 0.1, &small_cfg(1)).is_err());
        assert!(decompose_energy(&f, 4.0, 0.0, &small_cfg(1)).is_err());
    }

    #[test]
    fn loop_invariants_on_random_instances() {
        for seed in 0..8 {
            let f = random_tensor(3, 4, seed).scaled(0.3);
            let eps = 0.3;
            let out = decompose_energy(&f, 4.0, eps, &small_cfg(seed)).unwrap();
            let rep = &out.report;
            assert!(out.state.loops as u64 <= rep.loop_bound);
            assert_eq!(out.decomposition.len(), out.state.loops);

            // error is what the loop reported
            let res = f.sub(&out.decomposition.materialize().unwrap()).unwrap();
            let exact = lr_exact_even(&res, 4, 1e7).unwrap();
            assert!((exact - rep.final_residual.value).abs() < 1e-9);
            assert!(exact < eps);

            // energy grows, stays below the HS norm, and each step gains at
            // least the squared half-norm
            let mut prev = 0.0;
            for rec in &rep.loops {
                assert!(rec.energy >= prev - 1e-12);
                assert!(rec.energy <= rep.hs_norm_sq + 1e-9);
                let gain = rec.energy - prev;
                assert!(gain >= (0.5 * rec.residual_norm.value).powi(2) - 1e-8);
                assert!(gain >= rec.witness_value.powi(2) - 1e-8);
                prev = rec.energy;
            }
            for w in rep.loops.windows(2) {
                assert!(w[1].residual_norm.value < w[0].residual_norm.value + 1e-10);
            }

            // Gram is symmetric with unit diagonal
            for (i, row) in out.state.gram.iter().enumerate() {
                assert!((row[i] - 1.0).abs() < 1e-12);
                for (j, x) in row.iter().enumerate() {
                    assert_eq!(*x, out.state.gram[j][i]);
                }
            }
        }
    }

    #[test]
    fn angle_filter_keeps_picks_apart() {
        let f = random_tensor(3, 4, 11);
        let out = decompose_energy(&f, 4.0, 0.3, &small_cfg(2)).unwrap();
        for (rec, row) in out.report.loops.iter().zip(&out.state.gram) {
            if !rec.filter_dropped {
                let i = rec.index;
                for j in 0..i {
                    let cos = out.state.vectors[i].dot(&out.state.vectors[j]);
                    assert!(cos.abs() < 0.8);
                }
            }
            assert_eq!(row.len(), out.state.vectors.len());
        }
    }

    #[test]
    fn monte_carlo_residual_and_certificate() {
        let f = random_tensor(3, 3, 4).scaled(0.4);
        let eps = 0.3;
        let out = decompose_energy(&f, 3.0, eps, &small_cfg(7)).unwrap();
        let rep = &out.report;
        assert_eq!(rep.final_residual.method, EstimateMethod::MonteCarlo);
        assert!(rep.final_residual.value < eps);
        assert!(rep.certificate.value < eps + 4.0 * rep.certificate.std_error);
    }

    #[test]
    fn sup_norm_route() {
        let f = random_tensor(2, 4, 3).scaled(0.3);
        let cfg = small_cfg(3);
        let out = decompose_energy(&f, f64::INFINITY, 0.2, &cfg).unwrap();
        assert_eq!(out.report.final_residual.method, EstimateMethod::Covering);
        let res = f.sub(&out.decomposition.materialize().unwrap()).unwrap();
        let c = covering_oracle(&res, 0.02, 1e8).unwrap();
        assert!(c.lower < 0.2);
    }

    #[test]
    fn seeded_runs_repeat() {
        let f = random_tensor(3, 4, 21);
        let a = decompose_energy(&f, 3.0, 0.3, &small_cfg(5)).unwrap();
        let b = decompose_energy(&f, 3.0, 0.3, &small_cfg(5)).unwrap();
        assert_eq!(a.decomposition, b.decomposition);
    }
}
