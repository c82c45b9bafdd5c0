//! Exact evaluation of tensor networks and a classical simulation of the
//! additive quantum approximation algorithm for them.
//!
//! The pipeline is: pick a [`Bubbling`] (vertex order) for a
//! [`TensorNetwork`], derive the swallowing operators, embed each one into a
//! unitary with one ancilla qubit ([`unitarize`]), evolve the state
//! ([`qsim`]) and estimate the final overlap with a Hadamard test. The
//! estimate times the approximation scale `Delta` (the product of the
//! swallowing-operator norms) approximates the network value to within
//! `epsilon * Delta` with probability at least 3/4.
//!
//! Builders for partition-function networks of q-state models live in
//! [`statmech`]; quantum circuits are encoded in [`circuits`].

pub mod bubbling;
pub mod circuits;
pub mod error;
pub mod format;
pub mod guard;
pub mod linalg;
pub mod network;
pub mod qsim;
pub mod statmech;
pub mod tensor;
pub mod unitarize;

pub use bubbling::{greedy_bubbling, scale, Bubbling, ScaleReport, SwallowingOperator};
pub use error::{Error, ErrorKind, Result};
pub use guard::Guards;
pub use linalg::{operator_norm, Matrix};
pub use network::{eval_contract, eval_labeling_sum, EdgeId, NetworkBuilder, Port, TensorNetwork, VertexId};
pub use num_complex::Complex64 as C64;
pub use qsim::{approximate, ApproxConfig, ApproxResult, Backend};

pub use tensor::Tensor;
