//! Dense tensors of uniform local dimension.
//!
//! A rank-`k` tensor over dimension `q` stores `q^k` complex entries in
//! row-major order: port 0 is the most significant index.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    q: usize,
    rank: usize,
    entries: Vec<C64>,
}

impl Tensor {
    pub fn new(q: usize, rank: usize, entries: Vec<C64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidTensor("local dimension q must be positive".into()));
        }
        let expected = checked_len(q, rank)?;
        if entries.len() != expected {
            return Err(Error::InvalidTensor(format!(
                "expected q^rank = {q}^{rank} = {expected} entries, got {}",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidTensor(format!("entry {pos} is not finite")));
        }
        Ok(Tensor { q, rank, entries })
    }

    pub fn from_real(q: usize, rank: usize, entries: &[f64]) -> Result<Self> {
        Tensor::new(q, rank, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn scalar(q: usize, value: C64) -> Self {
        Tensor {
            q,
            rank: 0,
            entries: vec![value],
        }
    }

    /// Builds a tensor entry by entry from its index tuple.
    pub fn from_fn(q: usize, rank: usize, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let len = checked_len(q, rank)?;
        let mut idx = vec![0usize; rank];
        let mut entries = Vec::with_capacity(len);
        for _ in 0..len {
            entries.push(f(&idx));
            increment(&mut idx, q);
        }
        Tensor::new(q, rank, entries)
    }

    /// The tensor that is 1 when all indices agree and 0 otherwise.
    pub fn identity(q: usize, rank: usize) -> Self {
        Tensor::from_fn(q, rank, |idx| {
            if idx.windows(2).all(|w| w[0] == w[1]) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .expect("identity tensor dimensions are valid")
    }

    /// Like [`Tensor::identity`] but the all-`j` entry carries `diag[j]`.
    pub fn diagonal(diag: &[C64], rank: usize) -> Result<Self> {
        let q = diag.len();
        Tensor::from_fn(q, rank, |idx| {
            if idx.windows(2).all(|w| w[0] == w[1]) {
                idx.first().map_or(C64::new(1.0, 0.0), |&j| diag[j])
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    /// Flat offset of a full index tuple.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.q + i)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.entries[self.offset(idx)]
    }

    /// Stride of each port in the flat layout.
    pub fn strides(&self) -> Vec<usize> {
        strides(self.q, self.rank)
    }

    pub fn is_identity(&self) -> bool {
        *self == Tensor::identity(self.q, self.rank)
    }

    /// The all-`j` entries, if every other entry is zero.
    pub fn diagonal_values(&self) -> Option<Vec<C64>> {
        let stride: usize = strides(self.q, self.rank).iter().sum::<usize>().max(1);
        let on_diag = |off: usize| self.rank == 0 || (off.is_multiple_of(stride) && off / stride < self.q);
        if self.rank > 0
            && self
                .entries
                .iter()
                .enumerate()
                .any(|(off, z)| !on_diag(off) && (z.re != 0.0 || z.im != 0.0))
        {
            return None;
        }
        if self.rank == 0 {
            return Some(self.entries.clone());
        }
        Some((0..self.q).map(|j| self.entries[j * stride]).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Reorders ports: port `s` of the result is port `perm[s]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        if perm.len() != self.rank || !is_permutation(perm) {
            return Err(Error::InvalidIndex(format!(
                "{perm:?} is not a permutation of 0..{}",
                self.rank
            )));
        }
        let old = self.strides();
        Tensor::from_fn(self.q, self.rank, |idx| {
            let off: usize = idx.iter().zip(perm).map(|(&i, &p)| i * old[p]).sum();
            self.entries[off]
        })
    }
}

/// Outer product; the ports of `a` precede those of `b`.
pub fn tensor_product(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.q != b.q {
        return Err(Error::DimensionMismatch(format!(
            "tensor product of q={} and q={} tensors",
            a.q, b.q
        )));
    }
    checked_len(a.q, a.rank + b.rank)?;
    let entries = a
        .entries
        .iter()
        .flat_map(|&x| b.entries.iter().map(move |&y| x * y))
        .collect();
    Ok(Tensor {
        q: a.q,
        rank: a.rank + b.rank,
        entries,
    })
}

/// Traces ports `l < m` against each other.
pub fn contract_pair(t: &Tensor, l: usize, m: usize) -> Result<Tensor> {
    if l >= m || m >= t.rank {
        return Err(Error::InvalidIndex(format!(
            "contraction ports ({l}, {m}) invalid for rank {}; need l < m < rank",
            t.rank
        )));
    }
    let q = t.q;
    let strides = t.strides();
    let diag_stride = strides[l] + strides[m];
    let kept: Vec<usize> = (0..t.rank).filter(|&p| p != l && p != m).collect();
    Tensor::from_fn(q, t.rank - 2, |idx| {
        let base: usize = idx.iter().zip(&kept).map(|(&i, &p)| i * strides[p]).sum();
        (0..q).map(|s| t.entries[base + s * diag_stride]).sum()
    })
}

pub(crate) fn strides(q: usize, rank: usize) -> Vec<usize> {
    let mut s = vec![1usize; rank];
    for p in (0..rank.saturating_sub(1)).rev() {
        s[p] = s[p + 1] * q;
    }
    s
}

pub(crate) fn increment(idx: &mut [usize], q: usize) {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < q {
            return;
        }
        *d = 0;
    }
}

pub(crate) fn checked_len(q: usize, rank: usize) -> Result<usize> {
    u32::try_from(rank)
        .ok()
        .and_then(|r| q.checked_pow(r))
        .ok_or_else(|| Error::InvalidTensor(format!("{q}^{rank} entries overflow")))
}

fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter()
        .all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn scalar_product_multiplies() {
        let p = tensor_product(&Tensor::scalar(2, c(2.0)), &Tensor::scalar(2, c(3.0))).unwrap();
        assert_eq!(p.rank(), 0);
        assert_eq!(p.entries(), &[c(6.0)]);
    }

    #[test]
    fn basis_outer_product() {
        let a = Tensor::from_real(2, 1, &[1.0, 0.0]).unwrap();
        let b = Tensor::from_real(2, 1, &[0.0, 1.0]).unwrap();
        let p = tensor_product(&a, &b).unwrap();
        assert_eq!(p.entries(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn product_rejects_mismatched_q() {
        let a = Tensor::scalar(2, c(1.0));
        let b = Tensor::scalar(3, c(1.0));
        assert!(matches!(tensor_product(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn outer_product_matches_double_loop() {
        let a: Vec<C64> = (0..3).map(|i| C64::new(0.3 * i as f64 - 0.2, 0.7 - i as f64)).collect();
        let b: Vec<C64> = (0..3).map(|i| C64::new(1.1 - i as f64, 0.25 * i as f64)).collect();
        let ta = Tensor::new(3, 1, a.clone()).unwrap();
        let tb = Tensor::new(3, 1, b.clone()).unwrap();
        let p = tensor_product(&ta, &tb).unwrap();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                assert_eq!(p.get(&[i, j]), x * y);
            }
        }
    }

    #[test]
    fn trace_of_identity() {
        let id = Tensor::identity(3, 2);
        let t = contract_pair(&id, 0, 1).unwrap();
        assert_eq!(t.entries(), &[c(3.0)]);
        let m = Tensor::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(contract_pair(&m, 0, 1).unwrap().entries(), &[c(5.0)]);
    }

    #[test]
    fn inner_product_via_contraction() {
        let a = Tensor::from_real(2, 1, &[1.0, 2.0]).unwrap();
        let b = Tensor::from_real(2, 1, &[3.0, 4.0]).unwrap();
        let t = contract_pair(&tensor_product(&a, &b).unwrap(), 0, 1).unwrap();
        assert_eq!(t.entries(), &[c(11.0)]);
    }

    #[test]
    fn contract_rejects_bad_ports() {
        let t = Tensor::identity(2, 3);
        assert!(contract_pair(&t, 1, 1).is_err());
        assert!(contract_pair(&t, 2, 1).is_err());
        assert!(contract_pair(&t, 0, 3).is_err());
    }

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(Tensor::from_real(2, 2, &[1.0; 3]).is_err());
        assert!(Tensor::from_real(2, 1, &[1.0, f64::NAN]).is_err());
        assert!(Tensor::from_real(0, 0, &[1.0]).is_err());
    }

    #[test]
    fn diagonal_values_detects_structure() {
        let d = Tensor::diagonal(&[c(2.0), c(-1.0), c(0.5)], 3).unwrap();
        assert_eq!(d.diagonal_values().unwrap(), vec![c(2.0), c(-1.0), c(0.5)]);
        assert_eq!(Tensor::identity(2, 1).diagonal_values().unwrap(), vec![c(1.0), c(1.0)]);
        let m = Tensor::from_real(2, 2, &[1.0, 2.0, 0.0, 4.0]).unwrap();
        assert!(m.diagonal_values().is_none());
    }

    #[test]
    fn permute_swaps_ports() {
        let m = Tensor::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = m.permute(&[1, 0]).unwrap();
        assert_eq!(t.entries(), &[c(1.0), c(3.0), c(2.0), c(4.0)]);
    }
}
