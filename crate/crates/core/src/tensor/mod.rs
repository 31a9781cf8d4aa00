//! Dense symmetric tensors in the monomial index.
//!
//! A degree-`d` symmetric tensor on `R^n` is stored as one coefficient per
//! monomial `x^alpha`, `|alpha| = d`. The stored value `c_alpha` is the sum of
//! the `binom(d, alpha)` equal raw entries, so evaluation is the plain
//! polynomial `sum_alpha c_alpha x^alpha` and the Hilbert-Schmidt (Bombieri)
//! inner product divides by `binom(d, alpha)`.

mod basis;
pub mod io;

use std::sync::Arc;

use rayon::prelude::*;

pub use basis::{basis_len, binom_exact, binom_f64, ln_binom, multinomial, MonomialBasis, MultiIndex, MAX_BASIS_LEN};

use crate::error::{AprankError, Result};

/// Inputs farther than this from the unit sphere are rejected.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// A point of `S^{n-1}`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts vectors within [`UNIT_TOLERANCE`] of unit norm and renormalizes them.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let norm = euclidean_norm(&entries);
        if norm == 0.0 {
            return Err(AprankError::ZeroVector);
        }
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(AprankError::NotUnit { norm });
        }
        // Already-normalized input keeps its exact bits.
        if (norm - 1.0).abs() <= 1e-14 {
            return Ok(UnitVector(entries));
        }
        Ok(Self::scaled(entries, norm))
    }

    /// Projects any nonzero vector onto the sphere.
    pub fn normalize(entries: Vec<f64>) -> Result<Self> {
        let norm = euclidean_norm(&entries);
        if norm == 0.0 || !norm.is_finite() {
            return Err(AprankError::ZeroVector);
        }
        Ok(Self::scaled(entries, norm))
    }

    /// Standard basis vector `e_i` of `R^n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        UnitVector(e)
    }

    fn scaled(mut entries: Vec<f64>, norm: f64) -> Self {
        if norm != 1.0 {
            entries.iter_mut().for_each(|x| *x /= norm);
        }
        UnitVector(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A symmetric `d`-tensor on `R^n`, i.e. an element of `P_{n,d}`.
#[derive(Clone, Debug)]
pub struct SymmetricTensor {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SymmetricTensor {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n() && self.d() == other.d() && self.coeffs == other.coeffs
    }
}

impl SymmetricTensor {
    pub fn zeros(n: usize, d: usize) -> Result<Self> {
        let basis = MonomialBasis::get(n, d)?;
        let coeffs = vec![0.0; basis.len()];
        Ok(SymmetricTensor { basis, coeffs })
    }

    /// Builds a tensor from coefficients listed in basis order.
    pub fn from_coeffs(n: usize, d: usize, coeffs: Vec<f64>) -> Result<Self> {
        let basis = MonomialBasis::get(n, d)?;
        if coeffs.len() != basis.len() {
            return Err(AprankError::ShapeMismatch(format!(
                "expected {} coefficients for n={n}, d={d}, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        Ok(SymmetricTensor { basis, coeffs })
    }

    /// The constant polynomial `c` viewed as a degree-0 tensor.
    pub fn scalar(n: usize, c: f64) -> Result<Self> {
        Self::from_coeffs(n, 0, vec![c])
    }

    /// `(x1² + ... + xn²)^half_degree`, which is identically 1 on the sphere.
    pub fn sphere_power(n: usize, half_degree: usize) -> Result<Self> {
        let mut t = Self::zeros(n, 2 * half_degree)?;
        let mut beta = vec![0u32; n];
        let half = MonomialBasis::get(n, half_degree)?;
        for i in 0..half.len() {
            let gamma = half.exponents(i);
            for (b, g) in beta.iter_mut().zip(gamma) {
                *b = 2 * g;
            }
            let idx = t.basis.rank_unchecked(&beta);
            t.coeffs[idx] = half.multinomial(i);
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn d(&self) -> usize {
        self.basis.d()
    }

    /// Dimension of `P_{n,d}`.
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, alpha: &[u32]) -> Result<f64> {
        Ok(self.coeffs[self.basis.rank(alpha)?])
    }

    pub fn set_coeff(&mut self, alpha: &[u32], value: f64) -> Result<()> {
        let i = self.basis.rank(alpha)?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn check_same_shape(&self, other: &SymmetricTensor) -> Result<()> {
        if self.n() != other.n() || self.d() != other.d() {
            return Err(AprankError::ShapeMismatch(format!(
                "(n={}, d={}) vs (n={}, d={})",
                self.n(),
                self.d(),
                other.n(),
                other.d()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(AprankError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Rank-one tensor `v^{⊗d}`: coefficient `binom(d, alpha) * v^alpha`.
    pub fn rank_one(v: &UnitVector, d: usize) -> Result<Self> {
        let mut t = Self::zeros(v.dim(), d)?;
        let powers = power_table(v.as_slice(), d);
        let n = t.n();
        let basis = Arc::clone(&t.basis);
        for (i, c) in t.coeffs.iter_mut().enumerate() {
            *c = basis.multinomial(i) * monomial(&powers, basis.exponents(i), d + 1, n);
        }
        Ok(t)
    }

    /// `f(x) = sum_alpha c_alpha x^alpha`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let d = self.d();
        let powers = power_table(x, d);
        let exps = self.basis.flat_exponents();
        let mut acc = 0.0;
        for (c, alpha) in self.coeffs.iter().zip(exps.chunks_exact(n)) {
            if *c != 0.0 {
                acc += c * monomial(&powers, alpha, d + 1, n);
            }
        }
        acc
    }

    /// Evaluates at every point, in parallel, preserving order.
    pub fn eval_many(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        for p in points {
            self.check_point(p)?;
        }
        Ok(points.par_iter().map(|p| self.eval_unchecked(p)).collect())
    }

    /// Value and Euclidean gradient at `x`.
    pub fn eval_with_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let n = self.n();
        let d = self.d();
        let powers = power_table(x, d);
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        for (c, alpha) in self.coeffs.iter().zip(self.basis.flat_exponents().chunks_exact(n)) {
            if *c == 0.0 {
                continue;
            }
            value += c * monomial(&powers, alpha, d + 1, n);
            for j in 0..n {
                if alpha[j] == 0 {
                    continue;
                }
                let mut term = c * alpha[j] as f64;
                for (i, &a) in alpha.iter().enumerate() {
                    let e = if i == j { a - 1 } else { a } as usize;
                    term *= powers[i * (d + 1) + e];
                }
                grad[j] += term;
            }
        }
        Ok((value, grad))
    }

    /// Hilbert-Schmidt inner product `sum b_alpha c_alpha / binom(d, alpha)`.
    pub fn hs_inner(&self, other: &SymmetricTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.basis.multinomials())
            .map(|((b, c), m)| b * c / m)
            .sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.multinomials())
            .map(|(c, m)| c * c / m)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = self.clone();
        t.scale(s);
        t
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &SymmetricTensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn sub(&self, other: &SymmetricTensor) -> Result<Self> {
        let mut t = self.clone();
        t.add_scaled(-1.0, other)?;
        Ok(t)
    }

    /// Adds `a * v^{⊗d}` in place without allocating a second tensor.
    pub fn add_rank_one(&mut self, a: f64, v: &UnitVector) -> Result<()> {
        self.check_point(v.as_slice())?;
        let n = self.n();
        let d = self.d();
        let powers = power_table(v.as_slice(), d);
        let basis = Arc::clone(&self.basis);
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c += a * basis.multinomial(i) * monomial(&powers, basis.exponents(i), d + 1, n);
        }
        Ok(())
    }

    /// Polynomial product in the monomial basis; degrees add.
    pub fn multiply(&self, other: &SymmetricTensor) -> Result<Self> {
        if self.n() != other.n() {
            return Err(AprankError::ShapeMismatch(format!(
                "cannot multiply forms in {} and {} variables",
                self.n(),
                other.n()
            )));
        }
        let n = self.n();
        let mut out = Self::zeros(n, self.d() + other.d())?;
        let out_basis = Arc::clone(&out.basis);
        let mut gamma = vec![0u32; n];
        let rhs: Vec<(usize, f64)> = other
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let alpha = self.basis.exponents(i);
            for &(j, b) in &rhs {
                let beta = other.basis.exponents(j);
                for k in 0..n {
                    gamma[k] = alpha[k] + beta[k];
                }
                out.coeffs[out_basis.rank_unchecked(&gamma)] += a * b;
            }
        }
        Ok(out)
    }

    /// `self^k` by repeated multiplication.
    pub fn pow(&self, k: usize) -> Result<Self> {
        let mut acc = Self::scalar(self.n(), 1.0)?;
        for _ in 0..k {
            acc = acc.multiply(self)?;
        }
        Ok(acc)
    }
}

/// Entrywise linear combination `sum_i coeffs[i] * tensors[i]`.
pub fn linear_combine(coeffs: &[f64], tensors: &[SymmetricTensor]) -> Result<SymmetricTensor> {
    if coeffs.len() != tensors.len() {
        return Err(AprankError::ShapeMismatch(format!(
            "{} coefficients for {} tensors",
            coeffs.len(),
            tensors.len()
        )));
    }
    let first = tensors
        .first()
        .ok_or_else(|| AprankError::InvalidArgument("linear combination of no tensors".into()))?;
    let mut out = SymmetricTensor::zeros(first.n(), first.d())?;
    for (c, t) in coeffs.iter().zip(tensors) {
        out.add_scaled(*c, t)?;
    }
    Ok(out)
}

/// `powers[i * (d+1) + e] = x_i^e`.
pub(crate) fn power_table(x: &[f64], d: usize) -> Vec<f64> {
    let stride = d + 1;
    let mut table = vec![1.0; x.len() * stride];
    for (i, &xi) in x.iter().enumerate() {
        for e in 1..stride {
            table[i * stride + e] = table[i * stride + e - 1] * xi;
        }
    }
    table
}

#[inline]
pub(crate) fn monomial(powers: &[f64], alpha: &[u32], stride: usize, n: usize) -> f64 {
    let mut m = 1.0;
    for i in 0..n {
        m *= powers[i * stride + alpha[i] as usize];
    }
    m
}

/// One `c * v^{⊗d}` summand.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTerm {
    pub coeff: f64,
    pub vector: UnitVector,
}

impl RankOneTerm {
    pub fn new(coeff: f64, vector: UnitVector) -> Self {
        RankOneTerm { coeff, vector }
    }

    pub fn materialize(&self, d: usize) -> Result<SymmetricTensor> {
        let mut t = SymmetricTensor::rank_one(&self.vector, d)?;
        t.scale(self.coeff);
        Ok(t)
    }
}

/// A symmetric rank-one decomposition `f = sum_i c_i v_i^{⊗d}`; its length
/// is an upper bound on the symmetric rank of the tensor it represents.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    n: usize,
    d: usize,
    pub terms: Vec<RankOneTerm>,
}

impl Decomposition {
    pub fn new(n: usize, d: usize) -> Self {
        Decomposition { n, d, terms: Vec::new() }
    }

    pub fn from_terms(n: usize, d: usize, terms: Vec<RankOneTerm>) -> Result<Self> {
        let mut dec = Decomposition::new(n, d);
        for t in terms {
            dec.push(t)?;
        }
        Ok(dec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: RankOneTerm) -> Result<()> {
        if term.vector.dim() != self.n {
            return Err(AprankError::DimensionMismatch {
                expected: self.n,
                got: term.vector.dim(),
            });
        }
        self.terms.push(term);
        Ok(())
    }

    /// Concatenation of two decompositions of the same shape.
    pub fn union(&self, other: &Decomposition) -> Result<Decomposition> {
        if self.n != other.n || self.d != other.d {
            return Err(AprankError::ShapeMismatch("decompositions of different shapes".into()));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    /// Sum of `|c_i|`, an upper bound on the nuclear norm.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// `sum_i c_i v_i^{⊗d}` as a dense tensor.
    pub fn materialize(&self) -> Result<SymmetricTensor> {
        let mut out = SymmetricTensor::zeros(self.n, self.d)?;
        for t in &self.terms {
            out.add_rank_one(t.coeff, &t.vector)?;
        }
        Ok(out)
    }

    /// Evaluates without materializing: `sum_i c_i <v_i, x>^d`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(AprankError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.coeff * dot(t.vector.as_slice(), x).powi(self.d as i32))
            .sum())
    }

    /// Gram entries `<v_i, v_j>^d`, i.e. HS inner products of the rank-one parts.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.terms.len();
        let mut g = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v = self.terms[i].vector.dot(&self.terms[j].vector).powi(self.d as i32);
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        g
    }
}
