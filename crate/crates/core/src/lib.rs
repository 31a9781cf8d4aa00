//! Certified low-rank approximation of real symmetric tensors.
//!
//! Symmetric tensors are stored in the monomial index ([`tensor`]). Three
//! constructive decompositions produce an explicit rank-one expansion whose
//! distance to the input is certified in a chosen norm:
//!
//! * [`energy`]: greedy energy increment in any `L_r` norm, with at most
//!   `‖f‖²_HS / ε²` terms;
//! * [`sparsify`]: Maurey empirical sparsification of an existing
//!   decomposition, with `⌈4 T² ‖f‖²_* / ε²⌉` terms;
//! * [`frank_wolfe`]: conditional gradient over the Veronese body in the
//!   Hilbert-Schmidt norm.
//!
//! [`norms`] and [`search`] supply the `L_r` integration, sphere sampling,
//! and covering-grid machinery the algorithms rely on; [`apps`] holds the
//! instance generator, the `L_∞` estimation pipeline and the bench harness.

pub mod apps;
pub mod cli;
pub mod energy;
pub mod error;
pub mod frank_wolfe;
pub mod norms;
pub mod rng;
pub mod search;
pub mod sparsify;
pub mod tensor;

pub use error::{AprankError, Result};
pub use tensor::{Decomposition, MultiIndex, RankOneTerm, SymmetricTensor, UnitVector};
