//! Instance generation, sup-norm estimation for decomposed forms, and the
//! benchmark harness.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{decompose_energy, EnergyConfig};
use crate::error::{AprankError, Result};
use crate::frank_wolfe::{fw_decompose, FWConfig};
use crate::norms::{barvinok_bracket, estimate_lr, sphere_moment, EstimateResult, LrPolicy, NormKind, DEFAULT_EXPANSION_BUDGET};
use crate::rng::{mix, SeedStream};
use crate::sparsify::{maurey_sparsify, nuclear_upper, SparsifyConfig};
use crate::tensor::{basis_len, Decomposition, RankOneTerm, SymmetricTensor};

/// A planted-rank test instance of degree `two_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub two_d: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.two_d % 2 != 0 {
            return Err(AprankError::InvalidArgument(format!("degree 2d must be even, got {}", self.two_d)));
        }
        if self.n == 0 {
            return Err(AprankError::InvalidArgument("variable count n must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(AprankError::InvalidArgument(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// `binom(n + 2d - 1, 2d)`.
    pub fn dimension(&self) -> f64 {
        basis_len(self.n, self.two_d)
    }
}

/// `f = Σ c_i q_{v_i} + (ε/2)(x₁² + … + x_n²)^d` with Gaussian `c_i` and
/// uniform `v_i`. Returns `f` and the planted part.
pub fn generate_instance(spec: &InstanceSpec) -> Result<(SymmetricTensor, Decomposition)> {
    spec.validate()?;
    let mut s = SeedStream::new(spec.seed);
    let terms = (0..spec.m)
        .map(|_| {
            let c = s.gaussian();
            RankOneTerm::new(c, s.sphere_point(spec.n))
        })
        .collect();
    let planted = Decomposition::from_terms(spec.n, spec.two_d, terms)?;
    let mut f = planted.materialize()?;
    f.add_scaled(0.5 * spec.epsilon, &SymmetricTensor::sphere_power(spec.n, spec.two_d / 2)?)?;
    Ok((f, planted))
}

#[derive(Clone, Debug)]
pub struct LinfConfig {
    pub seed: u64,
    pub samples: usize,
    pub expansion_budget: f64,
    pub max_retries: usize,
}

impl Default for LinfConfig {
    fn default() -> Self {
        LinfConfig {
            seed: 0,
            samples: 100_000,
            expansion_budget: DEFAULT_EXPANSION_BUDGET,
            max_retries: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfInterval {
    pub lower: f64,
    pub upper: f64,
    pub k: usize,
    /// `‖q‖_{2k}` of the sparsified form.
    pub norm_2k: EstimateResult,
    /// `binom(kd + n - 1, kd)^{1/(2k)}`.
    pub upper_factor: f64,
    pub sparse_rank: usize,
    /// Measured `‖p - q‖_HS`.
    pub sparsify_error: f64,
}

/// Brackets `‖p‖_∞` for `p = materialize(dec)`: sparsify to `q` within `ε`
/// in HS (hence in sup norm), then compare `‖q‖_∞` with `‖q‖_{2k}` for
/// `k = ⌈(n/ε) ln(ed/ε)⌉`. Monte Carlo error is added to both ends as two
/// standard errors.
pub fn estimate_linf(dec: &Decomposition, epsilon: f64, cfg: &LinfConfig) -> Result<LinfInterval> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AprankError::InvalidArgument(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    let (n, d) = (dec.n(), dec.d());
    let k = ((n as f64 / epsilon) * (std::f64::consts::E * d.max(1) as f64 / epsilon).ln()).ceil() as usize;
    let upper_factor = barvinok_bracket(n, d, k)?.upper_factor;
    let (q, sparse_rank, sparsify_error) = if dec.is_empty() || nuclear_upper(dec) == 0.0 {
        (SymmetricTensor::zeros(n, d)?, 0, 0.0)
    } else {
        let mut sc = SparsifyConfig::new(NormKind::Hs, epsilon);
        sc.seed = mix(cfg.seed, 1);
        sc.max_retries = cfg.max_retries;
        let out = maurey_sparsify(dec, &sc)?;
        (out.decomposition.materialize()?, out.decomposition.len(), out.error.value)
    };
    let policy = LrPolicy {
        budget: cfg.expansion_budget,
        samples: cfg.samples,
        seed: mix(cfg.seed, 2),
    };
    let norm_2k = estimate_lr(&q, 2.0 * k as f64, &policy)?;
    let margin = 2.0 * norm_2k.std_error;
    Ok(LinfInterval {
        lower: (norm_2k.value - margin - epsilon).max(0.0),
        upper: upper_factor * (norm_2k.value + margin) + epsilon,
        k,
        norm_2k,
        upper_factor,
        sparse_rank,
        sparsify_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Energy,
    /// Sparsifies the planted decomposition.
    Maurey,
    Fw,
}

impl FromStr for Method {
    type Err = AprankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Method::Energy),
            "maurey" => Ok(Method::Maurey),
            "fw" => Ok(Method::Fw),
            _ => Err(AprankError::InvalidArgument(format!(
                "unknown method '{s}' (expected energy, maurey or fw)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub method: Method,
    /// Residual norm for the energy method; `∞` allowed.
    pub r: f64,
    pub epsilon: f64,
    pub energy: EnergyConfig,
    /// Instances with more monomials than this are rejected.
    pub max_dimension: f64,
}

impl BenchConfig {
    pub fn new(method: Method, r: f64, epsilon: f64) -> Self {
        BenchConfig {
            method,
            r,
            epsilon,
            energy: EnergyConfig::default(),
            max_dimension: 5000.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub index: usize,
    pub spec: InstanceSpec,
    pub dimension: f64,
    /// `ok`, `failed` or `rejected`.
    pub status: String,
    pub message: Option<String>,
    pub rank: Option<usize>,
    pub error: Option<f64>,
    pub rank_bound: Option<u64>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

fn run_row(spec: &InstanceSpec, cfg: &BenchConfig) -> Result<(usize, f64, u64)> {
    let (f, planted) = generate_instance(spec)?;
    let seed = mix(cfg.energy.search.seed, spec.seed);
    match cfg.method {
        Method::Energy => {
            let mut ec = cfg.energy.clone();
            ec.search.seed = seed;
            let out = decompose_energy(&f, cfg.r, cfg.epsilon, &ec)?;
            Ok((out.decomposition.len(), out.report.final_residual.value, out.report.loop_bound))
        }
        Method::Maurey => {
            let mut sc = SparsifyConfig::new(NormKind::Hs, cfg.epsilon);
            sc.seed = seed;
            let out = maurey_sparsify(&planted, &sc)?;
            Ok((out.decomposition.len(), out.error.value, out.k))
        }
        Method::Fw => {
            // (x₁² + … + x_n²)^d is the average of q_v over the sphere divided
            // by the moment ∫ x₁^{2d}, which bounds its nuclear norm
            let mut alpha = vec![0u32; spec.n];
            alpha[0] = spec.two_d as u32;
            let noise = 0.5 * spec.epsilon / sphere_moment(&alpha);
            let mut fc = FWConfig::new(cfg.epsilon, nuclear_upper(&planted) + noise);
            fc.seed = seed;
            let budget = fc.iteration_budget() as u64;
            let out = fw_decompose(&f, &fc)?;
            Ok((out.decomposition.len(), out.error, budget))
        }
    }
}

/// Runs one decomposition per spec. Failures and over-budget instances are
/// recorded in their rows; rows come back in input order.
pub fn bench_suite(specs: &[InstanceSpec], cfg: &BenchConfig) -> Vec<BenchRow> {
    specs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let dimension = spec.dimension();
            let start = Instant::now();
            let mut row = BenchRow {
                index,
                spec: spec.clone(),
                dimension,
                status: "ok".into(),
                message: None,
                rank: None,
                error: None,
                rank_bound: None,
                elapsed_secs: 0.0,
            };
            if dimension > cfg.max_dimension {
                row.status = "rejected".into();
                row.message = Some(format!(
                    "dimension {dimension} exceeds the limit {}",
                    cfg.max_dimension
                ));
                return row;
            }
            match run_row(spec, cfg) {
                Ok((rank, error, bound)) => {
                    row.rank = Some(rank);
                    row.error = Some(error);
                    row.rank_bound = Some(bound);
                }
                Err(e) => {
                    row.status = "failed".into();
                    row.message = Some(e.to_string());
                }
            }
            row.elapsed_secs = start.elapsed().as_secs_f64();
            row
        })
        .collect()
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Bench rows as CSV with one column per spec field. Timings stay out so
/// the table is reproducible from the seed.
pub fn bench_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| AprankError::InvalidArgument(format!("CSV: {e}"));
    w.write_record([
        "index",
        "m",
        "n",
        "two_d",
        "epsilon",
        "seed",
        "dimension",
        "status",
        "rank",
        "rank_bound",
        "error",
        "message",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.spec.m.to_string(),
            r.spec.n.to_string(),
            r.spec.two_d.to_string(),
            r.spec.epsilon.to_string(),
            r.spec.seed.to_string(),
            r.dimension.to_string(),
            r.status.clone(),
            opt(&r.rank),
            opt(&r.rank_bound),
            opt(&r.error),
            r.message.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| AprankError::InvalidArgument(format!("CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::covering_oracle;
    use crate::rng::sphere_points;

    fn spec(m: usize, n: usize, two_d: usize, epsilon: f64, seed: u64) -> InstanceSpec {
        InstanceSpec { m, n, two_d, epsilon, seed }
    }

    #[test]
    fn noise_only_instance_is_constant() {
        let (f, planted) = generate_instance(&spec(0, 4, 6, 0.3, 1)).unwrap();
        assert!(planted.is_empty());
        for x in sphere_points(4, 100, 2) {
            assert!((f.eval(&x).unwrap() - 0.15).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_part_and_noise() {
        let s = spec(5, 3, 4, 0.2, 7);
        let (f, planted) = generate_instance(&s).unwrap();
        let p = planted.materialize().unwrap();
        let gram = planted.gram();
        let expected: f64 = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .map(|(i, j)| planted.terms[i].coeff * planted.terms[j].coeff * gram[i][j])
            .sum();
        assert!((p.hs_norm().powi(2) - expected).abs() < 1e-10 * expected.max(1.0));
        for x in sphere_points(3, 200, 3) {
            let diff = f.eval(&x).unwrap() - planted.eval(&x).unwrap();
            assert!((diff - 0.1).abs() < 1e-12);
        }
        let (g, _) = generate_instance(&s).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn odd_degree_is_rejected() {
        assert!(generate_instance(&spec(1, 3, 3, 0.1, 0)).is_err());
    }

    #[test]
    fn instance_dimensions() {
        assert_eq!(spec(10, 4, 4, 0.3, 0).dimension(), 35.0);
        assert_eq!(spec(10, 4, 24, 0.3, 0).dimension(), 2925.0);
        assert_eq!(spec(10, 6, 18, 0.3, 0).dimension(), 33649.0);
        assert_eq!(spec(10, 8, 8, 0.3, 0).dimension(), 6435.0);
    }

    #[test]
    fn linf_interval_examples() {
        let v = SeedStream::new(1).sphere_point(2);
        let one = Decomposition::from_terms(2, 4, vec![RankOneTerm::new(1.0, v.clone())]).unwrap();
        let iv = estimate_linf(&one, 0.2, &LinfConfig::default()).unwrap();
        assert!(iv.lower <= 1.0 && 1.0 <= iv.upper, "{iv:?}");

        let pair = Decomposition::from_terms(2, 4, vec![RankOneTerm::new(0.5, v.clone()), RankOneTerm::new(-0.5, v)])
            .unwrap();
        let iv = estimate_linf(&pair, 0.2, &LinfConfig::default()).unwrap();
        assert_eq!(iv.lower, 0.0);

        let mut s = SeedStream::new(4);
        let terms = (0..3).map(|_| RankOneTerm::new(s.gaussian(), s.sphere_point(2))).collect();
        let dec = Decomposition::from_terms(2, 4, terms).unwrap();
        let c = covering_oracle(&dec.materialize().unwrap(), 0.02, 1e8).unwrap();
        let mid = 0.5 * (c.lower + c.upper);
        let iv = estimate_linf(&dec, 0.2, &LinfConfig::default()).unwrap();
        assert!(iv.lower <= mid && mid <= iv.upper, "{iv:?} vs {mid}");
    }

    #[test]
    fn bench_rows() {
        assert!(bench_suite(&[], &BenchConfig::new(Method::Energy, 4.0, 0.3)).is_empty());
        let specs = vec![spec(3, 3, 4, 0.3, 1), spec(10, 8, 8, 0.3, 2)];
        let mut cfg = BenchConfig::new(Method::Energy, 4.0, 0.3);
        cfg.energy.search.sample_size = 5000;
        let rows = bench_suite(&specs, &cfg);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].status, "ok");
        assert!(rows[0].rank.unwrap() as u64 <= rows[0].rank_bound.unwrap());
        assert_eq!(rows[1].status, "rejected");
        assert_eq!(rows[1].dimension, 6435.0);
        let csv = bench_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
}
