//! Frank–Wolfe (conditional gradient) decomposition.
//!
//! Minimizes `F(p) = ½‖p - q‖²_HS` over the convex hull of `{±q_v}` after
//! scaling `q` by a nuclear-norm guess. Each step adds one extreme point, so
//! the iteration count bounds the rank of the output.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{AprankError, Result};
use crate::rng::mix;
use crate::search::{covering_oracle, local_ascent, sample_sphere, DEFAULT_COVERING_BUDGET};
use crate::tensor::{Decomposition, RankOneTerm, SymmetricTensor, UnitVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmoKind {
    /// Random sampling followed by local ascent from the best samples.
    Sampling,
    /// Covering grid, refined by local ascent.
    Covering,
}

impl FromStr for LmoKind {
    type Err = AprankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" | "sampling" => Ok(LmoKind::Sampling),
            "cover" | "covering" => Ok(LmoKind::Covering),
            _ => Err(AprankError::InvalidArgument(format!("unknown LMO '{s}' (expected sample or cover)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FWConfig {
    pub epsilon: f64,
    /// Guess `ĉ >= ‖q‖_*`; the target is scaled by `1/ĉ`.
    pub nuclear_guess: f64,
    pub lmo: LmoKind,
    /// Defaults to `⌈16 / ε'²⌉` with `ε' = ε / ĉ`.
    pub max_iters: Option<usize>,
    pub seed: u64,
    pub eta: f64,
    pub covering_budget: f64,
    pub samples: usize,
    pub ascent_starts: usize,
    pub ascent_iters: usize,
}

impl FWConfig {
    pub fn new(epsilon: f64, nuclear_guess: f64) -> Self {
        FWConfig {
            epsilon,
            nuclear_guess,
            lmo: LmoKind::Sampling,
            max_iters: None,
            seed: 0,
            eta: 0.05,
            covering_budget: DEFAULT_COVERING_BUDGET,
            samples: 10_000,
            ascent_starts: 8,
            ascent_iters: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AprankError::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.nuclear_guess > 0.0 && self.nuclear_guess.is_finite()) {
            return Err(AprankError::InvalidArgument(format!(
                "nuclear norm guess must be positive, got {}",
                self.nuclear_guess
            )));
        }
        if self.lmo == LmoKind::Sampling && (self.samples == 0 || self.ascent_starts == 0) {
            return Err(AprankError::InvalidArgument("sampling LMO needs samples and starts".into()));
        }
        Ok(())
    }

    /// `⌈16 / ε'²⌉` unless overridden.
    pub fn iteration_budget(&self) -> usize {
        self.max_iters.unwrap_or_else(|| {
            let e = self.epsilon / self.nuclear_guess;
            (16.0 / (e * e)).ceil() as usize
        })
    }
}

#[derive(Clone, Debug)]
pub struct LmoResult {
    /// `±q_v` with `⟨h, g⟩_HS = -|g(v)|`.
    pub term: RankOneTerm,
    /// `|g(v)|`.
    pub value: f64,
    /// The gradient vanished and `term` is an arbitrary extreme point.
    pub degenerate: bool,
}

/// Approximate minimizer of `⟨h, g⟩_HS` over the extreme points `±q_v`.
pub fn lmo(g: &SymmetricTensor, cfg: &FWConfig, stream: u64) -> Result<LmoResult> {
    let (v, value) = match cfg.lmo {
        LmoKind::Covering => {
            let c = covering_oracle(g, cfg.eta, cfg.covering_budget)?;
            local_ascent(g, &c.vector, cfg.ascent_iters)?
        }
        LmoKind::Sampling => {
            let points = sample_sphere(g.n(), cfg.samples, mix(cfg.seed, stream));
            let values: Vec<f64> = points.iter().map(|p| g.eval_unchecked(p.as_slice())).collect();
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
            let mut best: Option<(UnitVector, f64)> = None;
            for &i in order.iter().take(cfg.ascent_starts) {
                let (v, val) = local_ascent(g, &points[i], cfg.ascent_iters)?;
                if best.as_ref().is_none_or(|(_, b)| val.abs() > b.abs()) {
                    best = Some((v, val));
                }
            }
            best.expect("at least one start")
        }
    };
    if value == 0.0 {
        return Ok(LmoResult {
            term: RankOneTerm::new(1.0, UnitVector::basis(g.n(), 0)),
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(LmoResult {
        term: RankOneTerm::new(-value.signum(), v),
        value: value.abs(),
        degenerate: false,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FWRecord {
    pub k: usize,
    /// `F(p_k) - F(q)` on the scaled problem, before the step.
    pub delta: f64,
    pub gamma: f64,
    pub sign: f64,
    pub vector: Vec<f64>,
    pub lmo_value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FWTrace {
    pub records: Vec<FWRecord>,
    /// `δ` at the last iterate.
    pub final_delta: f64,
}

impl FWTrace {
    /// One row per step: `k,delta,gamma,sign,lmo_value,v0,...,v{n-1}`.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.records.first().map(|r| r.vector.len()).unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["k", "delta", "gamma", "sign", "lmo_value"].map(String::from).to_vec();
        header.extend((0..n).map(|i| format!("v{i}")));
        let csv_err = |e: csv::Error| AprankError::InvalidArgument(format!("CSV: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.k.to_string(),
                r.delta.to_string(),
                r.gamma.to_string(),
                r.sign.to_string(),
                r.lmo_value.to_string(),
            ];
            row.extend(r.vector.iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| AprankError::InvalidArgument(format!("CSV: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

#[derive(Clone, Debug)]
pub struct FWOutcome {
    pub decomposition: Decomposition,
    pub trace: FWTrace,
    pub iterations: usize,
    /// `‖materialize(D) - q‖_HS`.
    pub error: f64,
}

/// Runs Frank–Wolfe on `q / ĉ` with step `γ_k = 2/(k+2)` until
/// `‖p_k - q/ĉ‖_HS < ε/ĉ`, and rescales the result by `ĉ`.
pub fn fw_decompose(q: &SymmetricTensor, cfg: &FWConfig) -> Result<FWOutcome> {
    cfg.validate()?;
    let c = cfg.nuclear_guess;
    let target = q.scaled(1.0 / c);
    let tol = cfg.epsilon / c;
    let max_iters = cfg.iteration_budget();

    let mut p = SymmetricTensor::zeros(q.n(), q.d())?;
    let mut atoms: Vec<RankOneTerm> = Vec::new();
    let mut trace = FWTrace::default();
    let mut k = 0;
    loop {
        let grad = p.sub(&target)?;
        let dist = grad.hs_norm();
        let delta = 0.5 * dist * dist;
        if dist < tol {
            trace.final_delta = delta;
            break;
        }
        if k == max_iters {
            trace.final_delta = delta;
            return Err(AprankError::FrankWolfeBudget {
                iterations: k,
                residual: dist * c,
                tolerance: cfg.epsilon,
                trace: Box::new(trace),
            });
        }
        let h = lmo(&grad, cfg, k as u64)?;
        let gamma = 2.0 / (k as f64 + 2.0);
        p.scale(1.0 - gamma);
        p.add_rank_one(gamma * h.term.coeff, &h.term.vector)?;
        for a in &mut atoms {
            a.coeff *= 1.0 - gamma;
        }
        match atoms.iter_mut().find(|a| a.vector == h.term.vector) {
            Some(a) => a.coeff += gamma * h.term.coeff,
            None => atoms.push(RankOneTerm::new(gamma * h.term.coeff, h.term.vector.clone())),
        }
        trace.records.push(FWRecord {
            k,
            delta,
            gamma,
            sign: h.term.coeff,
            vector: h.term.vector.as_slice().to_vec(),
            lmo_value: h.value,
            degenerate: h.degenerate,
        });
        k += 1;
    }

    let terms = atoms
        .into_iter()
        .filter(|a| a.coeff != 0.0)
        .map(|a| RankOneTerm::new(a.coeff * c, a.vector))
        .collect();
    let decomposition = Decomposition::from_terms(q.n(), q.d(), terms)?;
    let error = decomposition.materialize()?.sub(q)?.hs_norm();
    Ok(FWOutcome {
        decomposition,
        trace,
        iterations: k,
        error,
    })
}
