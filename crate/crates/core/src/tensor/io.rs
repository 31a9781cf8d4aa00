//! JSON file formats.
//!
//! Tensor: `{"n": 3, "d": 2, "coeffs": [{"alpha": [2,0,0], "value": 1.0}, ...]}`,
//! where omitted monomials are zero.
//!
//! Decomposition: `{"n": 3, "d": 2, "terms": [{"coeff": 1.0, "vector": [1,0,0]}, ...]}`.
//!
//! Floats are written in shortest round-trip form, so write-then-read is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Decomposition, RankOneTerm, SymmetricTensor, UnitVector};
use crate::error::{AprankError, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub alpha: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub n: usize,
    pub d: usize,
    pub coeffs: Vec<CoeffEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TermEntry {
    pub coeff: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    pub n: usize,
    pub d: usize,
    pub terms: Vec<TermEntry>,
}

impl From<&SymmetricTensor> for TensorFile {
    fn from(t: &SymmetricTensor) -> Self {
        let coeffs = t
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| CoeffEntry {
                alpha: t.basis().exponents(i).to_vec(),
                value: *c,
            })
            .collect();
        TensorFile {
            n: t.n(),
            d: t.d(),
            coeffs,
        }
    }
}

impl TryFrom<TensorFile> for SymmetricTensor {
    type Error = AprankError;

    fn try_from(file: TensorFile) -> Result<Self> {
        let mut t = SymmetricTensor::zeros(file.n, file.d)?;
        let mut seen = vec![false; t.dim()];
        for entry in file.coeffs {
            if !entry.value.is_finite() {
                return Err(AprankError::Parse(format!("non-finite coefficient at {:?}", entry.alpha)));
            }
            let i = t.basis().rank(&entry.alpha)?;
            if seen[i] {
                return Err(AprankError::Parse(format!("monomial {:?} listed twice", entry.alpha)));
            }
            seen[i] = true;
            t.coeffs_mut()[i] = entry.value;
        }
        Ok(t)
    }
}

impl From<&Decomposition> for DecompositionFile {
    fn from(dec: &Decomposition) -> Self {
        DecompositionFile {
            n: dec.n(),
            d: dec.d(),
            terms: dec
                .terms
                .iter()
                .map(|t| TermEntry {
                    coeff: t.coeff,
                    vector: t.vector.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DecompositionFile> for Decomposition {
    type Error = AprankError;

    fn try_from(file: DecompositionFile) -> Result<Self> {
        if file.n == 0 {
            return Err(AprankError::Parse("decomposition needs n >= 1".into()));
        }
        let mut dec = Decomposition::new(file.n, file.d);
        for (i, term) in file.terms.into_iter().enumerate() {
            if !term.coeff.is_finite() {
                return Err(AprankError::Parse(format!("term {i}: non-finite coefficient")));
            }
            let v = UnitVector::new(term.vector).map_err(|e| AprankError::Parse(format!("term {i}: {e}")))?;
            dec.push(RankOneTerm::new(term.coeff, v))?;
        }
        Ok(dec)
    }
}

pub fn tensor_to_json(t: &SymmetricTensor) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TensorFile::from(t))?)
}

pub fn tensor_from_json(s: &str) -> Result<SymmetricTensor> {
    let file: TensorFile = serde_json::from_str(s).map_err(|e| AprankError::Parse(format!("tensor JSON: {e}")))?;
    file.try_into()
}

pub fn decomposition_to_json(dec: &Decomposition) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DecompositionFile::from(dec))?)
}

pub fn decomposition_from_json(s: &str) -> Result<Decomposition> {
    let file: DecompositionFile =
        serde_json::from_str(s).map_err(|e| AprankError::Parse(format!("decomposition JSON: {e}")))?;
    file.try_into()
}

pub fn read_tensor(path: &Path) -> Result<SymmetricTensor> {
    tensor_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(path: &Path, t: &SymmetricTensor) -> Result<()> {
    std::fs::write(path, tensor_to_json(t)? + "\n")?;
    Ok(())
}

pub fn read_decomposition(path: &Path) -> Result<Decomposition> {
    decomposition_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_decomposition(path: &Path, dec: &Decomposition) -> Result<()> {
    std::fs::write(path, decomposition_to_json(dec)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;

    #[test]
    fn omitted_monomials_are_zero() {
        let t = tensor_from_json(r#"{"n": 2, "d": 2, "coeffs": [{"alpha": [1, 1], "value": 3.5}]}"#).unwrap();
        assert_eq!(t.coeffs(), &[0.0, 3.5, 0.0]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(tensor_from_json("{").is_err());
        assert!(tensor_from_json(r#"{"n": 2, "d": 2, "coeffs": [{"alpha": [1, 2], "value": 1}]}"#).is_err());
        assert!(tensor_from_json(
            r#"{"n": 2, "d": 1, "coeffs": [{"alpha": [1, 0], "value": 1}, {"alpha": [1, 0], "value": 2}]}"#
        )
        .is_err());
        assert!(decomposition_from_json(r#"{"n": 2, "d": 1, "terms": [{"coeff": 1, "vector": [2, 0]}]}"#).is_err());
        assert!(decomposition_from_json(r#"{"n": 2, "d": 1, "terms": [{"coeff": 1, "vector": [1, 0, 0]}]}"#).is_err());
    }

    proptest! {
        #[test]
        fn tensor_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..4, d in 0usize..5) {
            let mut s = SeedStream::new(seed);
            let len = crate::tensor::basis_len(n, d) as usize;
            let coeffs: Vec<f64> = (0..len).map(|_| s.gaussian() * 10f64.powi((s.uniform() * 20.0) as i32 - 10)).collect();
            let t = SymmetricTensor::from_coeffs(n, d, coeffs).unwrap();
            let back = tensor_from_json(&tensor_to_json(&t).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn decomposition_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..5, m in 0usize..6) {
            let mut s = SeedStream::new(seed);
            let terms = (0..m).map(|_| RankOneTerm::new(s.gaussian(), s.sphere_point(n))).collect();
            let dec = Decomposition::from_terms(n, 3, terms).unwrap();
            let back = decomposition_from_json(&decomposition_to_json(&dec).unwrap()).unwrap();
            prop_assert_eq!(back, dec);
        }
    }
}
