//! Small dense complex linear algebra: Jacobi eigen/SVD and operator norms.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Kronecker product; `self` indexes the more significant factor.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        Matrix::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    fn gram(&self) -> Matrix {
        // A^dagger A
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: C64 = (0..self.rows).map(|r| self[(r, i)].conj() * self[(r, j)]).sum();
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
        }
        g
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// The 2x2 unitary that zeroes the off-diagonal of the Hermitian block
/// `[[a, c], [conj(c), b]]` under `W^dagger H W`.
fn jacobi_rotation(a: f64, b: f64, c: C64) -> [C64; 4] {
    let r = c.norm();
    let phase = if r > 0.0 { C64::from_polar(1.0, -c.arg()) } else { ONE };
    let tau = (b - a) / (2.0 * r);
    let t = if tau.is_infinite() {
        0.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    // [W_pp, W_pq, W_qp, W_qq]
    [C64::new(cs, 0.0), C64::new(sn, 0.0), phase * (-sn), phase * cs]
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix
/// by cyclic Jacobi sweeps.
///
/// Sweeps stop once the off-diagonal Frobenius mass falls below `1e-14` of
/// the total.
pub fn hermitian_eigen(h: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    let n = h.rows;
    let mut a = h.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let c = a[(p, q)];
                if c.norm() == 0.0 {
                    continue;
                }
                let w = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, c);
                rotate_cols(&mut a, p, q, &w);
                rotate_rows_adjoint(&mut a, p, q, &w);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                rotate_cols(&mut v, p, q, &w);
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, pairs[c].1)]);
    Ok((values, vectors))
}

fn rotate_cols(m: &mut Matrix, p: usize, q: usize, w: &[C64; 4]) {
    for k in 0..m.rows {
        let x = m[(k, p)];
        let y = m[(k, q)];
        m[(k, p)] = x * w[0] + y * w[2];
        m[(k, q)] = x * w[1] + y * w[3];
    }
}

fn rotate_rows_adjoint(m: &mut Matrix, p: usize, q: usize, w: &[C64; 4]) {
    for k in 0..m.cols {
        let x = m[(p, k)];
        let y = m[(q, k)];
        m[(p, k)] = w[0].conj() * x + w[2].conj() * y;
        m[(q, k)] = w[1].conj() * x + w[3].conj() * y;
    }
}

/// Largest singular value, from the spectrum of the smaller of `A^dagger A`
/// and `A A^dagger`.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::DimensionMismatch("operator norm of an empty matrix".into()));
    }
    if m.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    // Rank-one shapes have a closed form.
    if m.rows == 1 || m.cols == 1 {
        return Ok(m.frobenius());
    }
    let gram = if m.cols <= m.rows { m.gram() } else { m.adjoint().gram() };
    let (values, _) = hermitian_eigen(&gram)?;
    Ok(values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Singular value decomposition `A = U diag(sigma) V^dagger`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    /// Descending, non-negative.
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
///
/// Singular values come out descending, and each right singular vector is
/// phased so its first non-negligible entry is real and positive.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("svd expects a square matrix".into()));
    }
    let n = a.rows;
    let mut b = a.clone();
    let mut v = Matrix::identity(n);
    // Columns this small relative to the input are numerically zero;
    // rotating them only amplifies rounding noise.
    let floor = 1e-30 * a.frobenius().powi(2);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, ZERO);
                for r in 0..n {
                    let x = b[(r, p)];
                    let y = b[(r, q)];
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                if alpha <= floor || beta <= floor || gamma.norm() <= 1e-15 * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let w = jacobi_rotation(alpha, beta, gamma);
                rotate_cols(&mut b, p, q, &w);
                rotate_cols(&mut v, p, q, &w);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|c| b.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut v_sorted = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    let mut b_sorted = Matrix::from_fn(n, n, |r, c| b[(r, order[c])]);

    for c in 0..n {
        if let Some(r) = (0..n).find(|&r| v_sorted[(r, c)].norm() > 1e-12) {
            let z = v_sorted[(r, c)];
            let ph = (z / z.norm()).conj();
            for k in 0..n {
                v_sorted[(k, c)] *= ph;
                b_sorted[(k, c)] *= ph;
            }
        }
    }

    let smax = sigma.first().copied().unwrap_or(0.0);
    let tiny = 1e-13 * smax;
    let mut u = Matrix::zeros(n, n);
    let mut filled = vec![false; n];
    for c in 0..n {
        if sigma[c] > tiny && sigma[c] > 0.0 {
            for r in 0..n {
                u[(r, c)] = b_sorted[(r, c)] / sigma[c];
            }
            filled[c] = true;
        }
    }
    orthonormalize_columns(&mut u, &filled);
    Ok(Svd { u, sigma, v: v_sorted })
}

/// Modified Gram-Schmidt (two passes); columns not marked `filled` are
/// completed from standard basis vectors.
fn orthonormalize_columns(u: &mut Matrix, filled: &[bool]) {
    let n = u.rows;
    let mut basis_next = 0usize;
    for c in 0..u.cols {
        if !filled[c] {
            loop {
                for r in 0..n {
                    u[(r, c)] = if r == basis_next { ONE } else { ZERO };
                }
                basis_next += 1;
                if project_out(u, c) > 1e-6 || basis_next >= n {
                    break;
                }
            }
        } else {
            project_out(u, c);
        }
        project_out(u, c);
        let nrm = u.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            u[(r, c)] /= nrm;
        }
    }
}

/// Removes components along columns `0..c`; returns the remaining norm.
fn project_out(u: &mut Matrix, c: usize) -> f64 {
    let n = u.rows;
    for k in 0..c {
        let dot: C64 = (0..n).map(|r| u[(r, k)].conj() * u[(r, c)]).sum();
        for r in 0..n {
            let x = u[(r, k)];
            u[(r, c)] -= dot * x;
        }
    }
    u.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(n, m, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Independent oracle: power iteration on A^dagger A.
    fn power_norm(a: &Matrix) -> f64 {
        let g = a.adjoint().matmul(a);
        let mut x: Vec<C64> = (0..g.cols()).map(|i| C64::new(1.0 + i as f64 * 0.1, 0.3)).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let y = g.apply(&x);
            let nrm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            lambda = nrm;
            x = y.into_iter().map(|z| z / nrm).collect();
        }
        lambda.sqrt()
    }

    #[test]
    fn norm_of_simple_matrices() {
        assert!((operator_norm(&Matrix::identity(4)).unwrap() - 1.0).abs() < 1e-12);
        let d = Matrix::diag(&[C64::new(3.0, 0.0), C64::new(1.0, 0.0)]);
        assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-12);
        assert!(operator_norm(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let a = random(5, 5, &mut rng);
            let n = operator_norm(&a).unwrap();
            let p = power_norm(&a);
            assert!((n - p).abs() <= 1e-8 * p, "{n} vs {p}");
        }
    }

    #[test]
    fn rectangular_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(3, 7, &mut rng);
        let at = a.adjoint();
        assert!((operator_norm(&a).unwrap() - operator_norm(&at).unwrap()).abs() < 1e-12);
        assert!((operator_norm(&a).unwrap() - power_norm(&a)).abs() < 1e-8);
    }

    #[test]
    fn eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(6, 6, &mut rng);
        let h = a.adjoint().matmul(&a);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        let d = Matrix::diag(&vals.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        let back = vecs.matmul(&d).matmul(&vecs.adjoint());
        assert!(back.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn svd_reconstructs_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 5, 16] {
            let a = random(n, n, &mut rng);
            let s = svd(&a).unwrap();
            let sig = Matrix::diag(&s.sigma.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
            let back = s.u.matmul(&sig).matmul(&s.v.adjoint());
            assert!(back.max_abs_diff(&a) < 1e-12);
            assert!(s.u.adjoint().matmul(&s.u).max_abs_diff(&Matrix::identity(n)) < 1e-12);
            assert!(s.v.adjoint().matmul(&s.v).max_abs_diff(&Matrix::identity(n)) < 1e-12);
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!((s.sigma[0] - operator_norm(&a).unwrap()).abs() < 1e-10 * s.sigma[0]);
        }
    }

    #[test]
    fn svd_of_rank_deficient_matrix() {
        let a = Matrix::from_fn(3, 3, |r, c| C64::new((r + 1) as f64 * (c + 2) as f64, 0.0));
        let s = svd(&a).unwrap();
        assert!(s.sigma[1] < 1e-12 && s.sigma[2] < 1e-12);
        assert!(s.u.adjoint().matmul(&s.u).max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let sig = Matrix::diag(&s.sigma.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        assert!(s.u.matmul(&sig).matmul(&s.v.adjoint()).max_abs_diff(&a) < 1e-12);
    }
}
