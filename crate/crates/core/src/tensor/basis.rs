//! Monomial index for degree-`d` forms in `n` variables.
//!
//! Monomials are ordered graded-lexicographically. Within one degree this is
//! plain lexicographic order with `x1` most significant, so for `n = 3`,
//! `d = 2` the order is `x1², x1x2, x1x3, x2², x2x3, x3²`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{AprankError, Result};

/// Largest basis the library will allocate.
pub const MAX_BASIS_LEN: usize = 50_000_000;

/// Exact integer results above this are reported through log space.
const EXACT_INTEGER_LIMIT: f64 = 1e15;

/// Exponent vector of a monomial `x^alpha`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `binom(n, k)` as an exact integer, or `None` on overflow.
pub fn binom_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Natural log of `binom(n, k)` for integer arguments.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `binom(n, k)` as a float, exact while the value stays below 1e15.
pub fn binom_f64(n: u64, k: u64) -> f64 {
    match binom_exact(n, k) {
        Some(v) if (v as f64) <= EXACT_INTEGER_LIMIT => v as f64,
        _ => ln_binom(n, k).exp(),
    }
}

/// Multinomial coefficient `d! / prod(alpha_i!)` where `d = |alpha|`.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut acc: Option<u128> = Some(1);
    let mut total: u64 = 0;
    for &a in alpha {
        total += a as u64;
        acc = acc.and_then(|v| v.checked_mul(binom_exact(total, a as u64)?));
        if matches!(acc, Some(v) if v as f64 > EXACT_INTEGER_LIMIT) {
            acc = None;
        }
    }
    match acc {
        Some(v) => v as f64,
        None => {
            let ln = ln_factorial(total) - alpha.iter().map(|&a| ln_factorial(a as u64)).sum::<f64>();
            ln.exp()
        }
    }
}

/// Number of monomials of degree `d` in `n` variables, `binom(n+d-1, d)`.
pub fn basis_len(n: usize, d: usize) -> f64 {
    if n == 0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    binom_f64((n + d - 1) as u64, d as u64)
}

/// The ordered list of exponent vectors for one `(n, d)` pair.
#[derive(Debug)]
pub struct MonomialBasis {
    n: usize,
    d: usize,
    exponents: Vec<u32>,
    multinomials: Vec<f64>,
    // pascal[x * n + m] = binom(x, m) for m < n, saturating.
    pascal: Vec<usize>,
}

impl MonomialBasis {
    /// Shared, cached basis for `(n, d)`.
    pub fn get(n: usize, d: usize) -> Result<Arc<MonomialBasis>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().expect("basis cache poisoned").get(&(n, d)) {
            return Ok(Arc::clone(b));
        }
        let basis = Arc::new(MonomialBasis::build(n, d)?);
        cache
            .lock()
            .expect("basis cache poisoned")
            .insert((n, d), Arc::clone(&basis));
        Ok(basis)
    }

    fn build(n: usize, d: usize) -> Result<MonomialBasis> {
        if n == 0 {
            return Err(AprankError::InvalidArgument("variable count n must be at least 1".into()));
        }
        let len = basis_len(n, d);
        if len > MAX_BASIS_LEN as f64 {
            return Err(AprankError::InvalidArgument(format!(
                "space of degree-{d} forms in {n} variables has dimension {len:.3e}, over the limit {MAX_BASIS_LEN}"
            )));
        }
        let len = len.round() as usize;
        let mut exponents = Vec::with_capacity(len * n);
        let mut current = vec![0u32; n];
        enumerate(&mut current, 0, d as u32, &mut exponents);
        debug_assert_eq!(exponents.len(), len * n);

        let multinomials = exponents.chunks_exact(n).map(multinomial).collect();

        let rows = d + n + 1;
        let mut pascal = vec![0usize; rows * n];
        for x in 0..rows {
            for m in 0..n {
                pascal[x * n + m] = if m == 0 {
                    1
                } else if x == 0 {
                    0
                } else {
                    pascal[(x - 1) * n + m - 1].saturating_add(pascal[(x - 1) * n + m])
                };
            }
        }
        Ok(MonomialBasis {
            n,
            d,
            exponents,
            multinomials,
            pascal,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.multinomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multinomials.is_empty()
    }

    /// Exponents of the `i`-th monomial.
    pub fn exponents(&self, i: usize) -> &[u32] {
        &self.exponents[i * self.n..(i + 1) * self.n]
    }

    /// All exponents, flattened row-major (`len * n` entries).
    pub fn flat_exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// `binom(d, alpha)` for the `i`-th monomial.
    pub fn multinomial(&self, i: usize) -> f64 {
        self.multinomials[i]
    }

    pub fn multinomials(&self) -> &[f64] {
        &self.multinomials
    }

    /// Position of `alpha` in the basis. The caller guarantees `alpha` has
    /// length `n` and total degree `d`.
    pub fn rank_unchecked(&self, alpha: &[u32]) -> usize {
        let n = self.n;
        let mut remaining = self.d as u32;
        let mut rank = 0usize;
        for (i, &a) in alpha.iter().enumerate().take(n - 1) {
            let m = n - i - 1;
            if remaining > a {
                let x = (remaining - a - 1) as usize + m;
                rank += self.pascal[x * n + m];
            }
            remaining -= a;
        }
        rank
    }

    pub fn rank(&self, alpha: &[u32]) -> Result<usize> {
        if alpha.len() != self.n {
            return Err(AprankError::ShapeMismatch(format!(
                "multi-index has {} entries, expected {}",
                alpha.len(),
                self.n
            )));
        }
        let degree: u64 = alpha.iter().map(|&a| a as u64).sum();
        if degree != self.d as u64 {
            return Err(AprankError::ShapeMismatch(format!(
                "multi-index {} has degree {degree}, expected {}",
                MultiIndex(alpha.to_vec()),
                self.d
            )));
        }
        Ok(self.rank_unchecked(alpha))
    }
}

fn enumerate(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<u32>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        enumerate(current, pos + 1, remaining - a, out);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_lexicographic() {
        let b = MonomialBasis::get(3, 2).unwrap();
        let got: Vec<Vec<u32>> = (0..b.len()).map(|i| b.exponents(i).to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
    }

    #[test]
    fn rank_inverts_enumeration() {
        for (n, d) in [(1, 5), (2, 7), (3, 4), (4, 6), (6, 3), (5, 0)] {
            let b = MonomialBasis::get(n, d).unwrap();
            assert_eq!(b.len() as f64, basis_len(n, d));
            for i in 0..b.len() {
                assert_eq!(b.rank(b.exponents(i)).unwrap(), i, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn rank_rejects_wrong_degree() {
        let b = MonomialBasis::get(2, 3).unwrap();
        assert!(b.rank(&[1, 1]).is_err());
        assert!(b.rank(&[1, 1, 1]).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binom_exact(5, 2), Some(10));
        assert_eq!(binom_exact(3, 5), Some(0));
        assert_eq!(binom_f64(35, 32), 6545.0);
        let big = binom_f64(200, 100);
        assert!((big.ln() - ln_binom(200, 100)).abs() < 1e-9);
        assert_eq!(multinomial(&[1, 1]), 2.0);
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
        assert_eq!(multinomial(&[]), 1.0);
        // 60!/(20!^3) is far beyond 1e15
        let m = multinomial(&[20, 20, 20]);
        let ln = ln_factorial(60) - 3.0 * ln_factorial(20);
        assert!((m.ln() - ln).abs() < 1e-9);
    }

    #[test]
    fn paper_dimensions() {
        assert_eq!(basis_len(4, 4), 35.0);
        assert_eq!(basis_len(4, 24), 2925.0);
        assert_eq!(basis_len(6, 18), 33649.0);
        assert_eq!(basis_len(8, 8), 6435.0);
    }
}
