//! Embedding an arbitrary linear map into a unitary on one extra qubit.
//!
//! For `A / ||A|| = V1 D V2` (an SVD with `D = diag(r_1 >= ... >= r_m)`),
//! the unitary is `U = (V1 (x) 1) U_D (V2 (x) 1)` with
//!
//! ```text
//! U_D (b0 (x) |0> + b1 (x) |1>) = (D b0 + S b1) (x) |0> + (-S b0 + D b1) (x) |1>
//! ```
//!
//! and `S = sqrt(1 - D^2)`. Projecting the ancilla onto `|0>` on both sides
//! leaves `A / ||A||`. The ancilla is the least significant index: row and
//! column `2 * i + a` address register state `i` with ancilla `a`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};

#[derive(Debug, Clone)]
pub struct SubUnitary {
    /// `2m x 2m` unitary.
    pub u: Matrix,
    /// `||A||`.
    pub source_norm: f64,
    /// Registers appended (in `|0>`) on the input side.
    pub input_pad: usize,
    /// Registers appended on the output side; always `|0>` in the
    /// ancilla-0 branch.
    pub output_pad: usize,
    /// Normalized singular values `r_i`, descending.
    pub singular_values: Vec<f64>,
}

impl SubUnitary {
    /// Register dimension `m` (the unitary acts on `m` states times a qubit).
    pub fn register_dim(&self) -> usize {
        self.u.rows() / 2
    }

    /// The ancilla-in-0 to ancilla-out-0 block, which equals `A / ||A||`.
    pub fn ancilla_zero_block(&self) -> Matrix {
        let m = self.register_dim();
        Matrix::from_fn(m, m, |r, c| self.u[(2 * r, 2 * c)])
    }
}

pub fn embed_square(a: &Matrix) -> Result<SubUnitary> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "embed_square needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let m = a.rows();
    let dec = svd(a)?;
    let norm = dec.sigma.first().copied().unwrap_or(0.0);
    if norm == 0.0 {
        return Err(Error::ZeroOperator("cannot embed the zero operator".into()));
    }
    let r: Vec<f64> = dec.sigma.iter().map(|&s| (s / norm).min(1.0)).collect();

    let mut ud = Matrix::zeros(2 * m, 2 * m);
    for (i, &ri) in r.iter().enumerate() {
        let si = (1.0 - ri * ri).max(0.0).sqrt();
        ud[(2 * i, 2 * i)] = C64::new(ri, 0.0);
        ud[(2 * i, 2 * i + 1)] = C64::new(si, 0.0);
        ud[(2 * i + 1, 2 * i)] = C64::new(-si, 0.0);
        ud[(2 * i + 1, 2 * i + 1)] = C64::new(ri, 0.0);
    }
    let qubit = Matrix::identity(2);
    let v1 = dec.u.kron(&qubit);
    let v2 = dec.v.adjoint().kron(&qubit);
    let u = v1.matmul(&ud).matmul(&v2);
    Ok(SubUnitary {
        u,
        source_norm: norm,
        input_pad: 0,
        output_pad: 0,
        singular_values: r,
    })
}

/// Embeds a `q^l x q^k` map, padding the smaller side with registers fixed
/// to `|0>` (appended as the least significant registers).
pub fn embed_rect(a: &Matrix, q: usize) -> Result<SubUnitary> {
    let k = register_count(a.cols(), q)?;
    let l = register_count(a.rows(), q)?;
    let s = k.max(l);
    let (input_pad, output_pad) = (s - k, s - l);
    let padded = pad(a, q, input_pad, output_pad);
    let mut out = embed_square(&padded)?;
    out.input_pad = input_pad;
    out.output_pad = output_pad;
    Ok(out)
}

/// Square matrix acting as `a` when the padded registers are `|0>` and as
/// zero otherwise.
pub fn pad(a: &Matrix, q: usize, input_pad: usize, output_pad: usize) -> Matrix {
    let ip = q.pow(input_pad as u32);
    let op = q.pow(output_pad as u32);
    let mut out = Matrix::zeros(a.rows() * op, a.cols() * ip);
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            out[(r * op, c * ip)] = a[(r, c)];
        }
    }
    out
}

fn register_count(dim: usize, q: usize) -> Result<usize> {
    if q < 2 {
        return Ok(0);
    }
    let mut n = 0;
    let mut d = 1usize;
    while d < dim {
        d *= q;
        n += 1;
    }
    if d != dim {
        return Err(Error::DimensionMismatch(format!("{dim} is not a power of q={q}")));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn unitarity_error(u: &Matrix) -> f64 {
        u.adjoint().matmul(u).max_abs_diff(&Matrix::identity(u.rows()))
    }

    #[test]
    fn identity_embeds_trivially() {
        let s = embed_square(&Matrix::identity(2)).unwrap();
        assert!(s.ancilla_zero_block().max_abs_diff(&Matrix::identity(2)) < 1e-12);
        assert!(s.u.max_abs_diff(&Matrix::identity(4)) < 1e-12);
        assert_eq!(s.source_norm, 1.0);
    }

    #[test]
    fn projector_follows_block_formula() {
        // r = (1, 0): |0>|0> -> |0>|0>, |1>|0> -> -|1>|1>.
        let s = embed_square(&Matrix::diag(&[c(1.0), c(0.0)])).unwrap();
        let col = |j: usize| s.u.column(j);
        let e00 = col(0);
        let e10 = col(2);
        let expect00 = [c(1.0), c(0.0), c(0.0), c(0.0)];
        let expect10 = [c(0.0), c(0.0), c(0.0), c(-1.0)];
        for i in 0..4 {
            assert!((e00[i] - expect00[i]).norm() < 1e-12);
            assert!((e10[i] - expect10[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn scaling_is_absorbed() {
        let a = Matrix::identity(2);
        let s1 = embed_square(&a).unwrap();
        let s5 = embed_square(&a.scale(c(5.0))).unwrap();
        assert!(s1.u.max_abs_diff(&s5.u) < 1e-12);
        assert_eq!(s5.source_norm, 5.0);
    }

    #[test]
    fn zero_operator_is_rejected() {
        let err = embed_square(&Matrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::ZeroOperator(_)));
    }

    #[test]
    fn column_vector_pads_to_projector() {
        let a = Matrix::from_vec(2, 1, vec![c(1.0), c(0.0)]).unwrap();
        assert_eq!(pad(&a, 2, 1, 0), Matrix::diag(&[c(1.0), c(0.0)]));
        let s = embed_rect(&a, 2).unwrap();
        assert_eq!((s.input_pad, s.output_pad), (1, 0));
        let direct = embed_square(&Matrix::diag(&[c(1.0), c(0.0)])).unwrap();
        assert!(s.u.max_abs_diff(&direct.u) < 1e-12);
    }

    #[test]
    fn row_vector_pads_on_output() {
        let a = Matrix::from_vec(1, 2, vec![c(1.0), c(1.0)]).unwrap();
        let p = pad(&a, 2, 0, 1);
        assert_eq!(p, Matrix::from_vec(2, 2, vec![c(1.0), c(1.0), c(0.0), c(0.0)]).unwrap());
        let s = embed_rect(&a, 2).unwrap();
        assert!((s.source_norm - 2f64.sqrt()).abs() < 1e-12);
        let block = s.ancilla_zero_block();
        let expected = p.scale(c(1.0 / 2f64.sqrt()));
        assert!(block.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn random_embeddings_are_unitary_with_exact_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [1, 3, 8, 17] {
            let a = Matrix::from_fn(n, n, |_, _| {
                C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            });
            let s = embed_square(&a).unwrap();
            assert!(unitarity_error(&s.u) < 1e-10);
            let na = operator_norm(&a).unwrap();
            assert!((s.source_norm - na).abs() < 1e-10 * na);
            assert!(s.ancilla_zero_block().max_abs_diff(&a.scale(c(1.0 / s.source_norm))) < 1e-10);
        }
    }

    #[test]
    fn rect_norm_matches_operator_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Matrix::from_fn(3, 9, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let s = embed_rect(&a, 3).unwrap();
        assert!((s.source_norm - operator_norm(&a).unwrap()).abs() < 1e-10);
        assert!(unitarity_error(&s.u) < 1e-10);
    }
}
