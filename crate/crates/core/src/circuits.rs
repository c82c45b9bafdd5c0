//! Quantum circuits as tensor networks.
//!
//! A circuit on `n` qubits becomes a network with a ket `|0>` vertex at the
//! start of every wire, one vertex per gate and a bra `<0|` vertex at the
//! end of every wire; its value is `<0...0|C|0...0>`. Vertex ids are kets
//! `0..n`, gates `n..n+L` in circuit order and bras `n+L..2n+L`.

use num_complex::Complex64 as C64;

use crate::bubbling::Bubbling;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Port, TensorNetwork, VertexId};
use crate::tensor::Tensor;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// A gate on `targets`; the first target is the most significant bit of
/// the matrix index.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub targets: Vec<usize>,
    pub matrix: Matrix,
}

impl Gate {
    pub fn new(targets: Vec<usize>, matrix: Matrix) -> Result<Self> {
        let dim = 1usize
            .checked_shl(targets.len() as u32)
            .ok_or_else(|| Error::InvalidCircuit("gate acts on too many qubits".into()))?;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::InvalidCircuit(format!(
                "gate on {} qubits needs a {dim}x{dim} matrix, got {}x{}",
                targets.len(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        let mut sorted = targets.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCircuit(format!("repeated target in {targets:?}")));
        }
        Ok(Gate { targets, matrix })
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let n = self.matrix.rows();
        self.matrix
            .adjoint()
            .matmul(&self.matrix)
            .max_abs_diff(&Matrix::identity(n))
            <= tol
    }

    pub fn adjoint(&self) -> Gate {
        Gate {
            targets: self.targets.clone(),
            matrix: self.matrix.adjoint(),
        }
    }
}

pub fn hadamard() -> Matrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_fn(2, 2, |r, c| C64::new(if r == 1 && c == 1 { -h } else { h }, 0.0))
}

pub fn pauli_x() -> Matrix {
    Matrix::from_fn(2, 2, |r, c| if r != c { ONE } else { ZERO })
}

/// Controlled NOT with the first target as control.
pub fn cnot() -> Matrix {
    let perm = [0, 1, 3, 2];
    Matrix::from_fn(4, 4, |r, c| if perm[c] == r { ONE } else { ZERO })
}

/// Gates applied in list order to `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCircuit("a circuit needs at least one qubit".into()));
        }
        for (i, g) in gates.iter().enumerate() {
            if let Some(&t) = g.targets.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidCircuit(format!(
                    "gate {i} targets qubit {t} of a {n}-qubit circuit"
                )));
            }
        }
        Ok(Circuit { n, gates })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Indices of gates that are not unitary within `tol`.
    pub fn non_unitary_gates(&self, tol: f64) -> Vec<usize> {
        (0..self.gates.len())
            .filter(|&i| !self.gates[i].is_unitary(tol))
            .collect()
    }

    /// Applies the circuit to a state vector (qubit 0 most significant).
    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        if state.len() != 1usize << self.n {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for {} qubits",
                state.len(),
                self.n
            )));
        }
        let mut psi = state.to_vec();
        for g in &self.gates {
            psi = apply_gate(self.n, &psi, g);
        }
        Ok(psi)
    }

    /// `C|0...0>`.
    pub fn run(&self) -> Vec<C64> {
        let mut zero = vec![ZERO; 1 << self.n];
        zero[0] = ONE;
        self.apply(&zero).expect("dimension matches")
    }

    /// Probability of reading 0 on `qubit` after running the circuit.
    pub fn zero_probability(&self, qubit: usize) -> f64 {
        let shift = self.n - 1 - qubit;
        self.run()
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> shift) & 1 == 0)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

fn apply_gate(n: usize, psi: &[C64], g: &Gate) -> Vec<C64> {
    let shifts: Vec<usize> = g.targets.iter().map(|&t| n - 1 - t).collect();
    let mask: usize = shifts.iter().map(|&s| 1 << s).sum();
    let d = g.targets.len();
    let scatter = |sub: usize| -> usize {
        (0..d)
            .filter(|&k| (sub >> (d - 1 - k)) & 1 == 1)
            .map(|k| 1 << shifts[k])
            .sum()
    };
    let offsets: Vec<usize> = (0..1 << d).map(scatter).collect();
    let mut out = vec![ZERO; psi.len()];
    for base in (0..psi.len()).filter(|i| i & mask == 0) {
        for (r, &ro) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (c, &co) in offsets.iter().enumerate() {
                acc += g.matrix[(r, c)] * psi[base + co];
            }
            out[base + ro] = acc;
        }
    }
    out
}

/// Network whose value is `<0...0|C|0...0>`.
///
/// Gate tensors list their input ports (one per target, in target order)
/// before their output ports: `M[k, l] = Q[l][k]`. Ket and bra tensors are
/// `delta_{k,0}`. Non-unitary gates are accepted.
pub fn encode_circuit(c: &Circuit) -> Result<TensorNetwork> {
    let n = c.n;
    let l = c.gates.len();
    let basis0 = || Tensor::from_fn(2, 1, |k| if k[0] == 0 { ONE } else { ZERO }).expect("rank-1 tensor");
    let mut vertices: Vec<(VertexId, Tensor)> = (0..n).map(|k| (k, basis0())).collect();
    let mut edges = Vec::new();
    let mut open: Vec<Port> = (0..n).map(|k| Port::new(k, 0)).collect();
    for (i, g) in c.gates.iter().enumerate() {
        let id = n + i;
        let d = g.targets.len();
        let t = Tensor::from_fn(2, 2 * d, |idx| {
            let k = idx[..d].iter().fold(0, |acc, &b| 2 * acc + b);
            let o = idx[d..].iter().fold(0, |acc, &b| 2 * acc + b);
            g.matrix[(o, k)]
        })?;
        vertices.push((id, t));
        for (j, &q) in g.targets.iter().enumerate() {
            edges.push((open[q], Port::new(id, j)));
            open[q] = Port::new(id, d + j);
        }
    }
    for (k, &end) in open.iter().enumerate() {
        let id = n + l + k;
        vertices.push((id, basis0()));
        edges.push((end, Port::new(id, 0)));
    }
    TensorNetwork::new(2, vertices, edges)
}

/// Kets, then gates in circuit order, then bras.
pub fn circuit_order_bubbling(c: &Circuit) -> Bubbling {
    Bubbling::new((0..2 * c.n + c.gates.len()).collect())
}

/// `U = Q^dagger CNOT Q` on `n + 1` qubits: run `Q`, copy `measured` onto
/// the extra qubit `n`, then undo `Q` gate by gate. Then
/// `<0...0|U|0...0>` is the probability of reading 0 on `measured`.
pub fn acceptance_circuit(q: &Circuit, measured: usize) -> Result<Circuit> {
    if measured >= q.n {
        return Err(Error::InvalidCircuit(format!(
            "measured qubit {measured} out of range for {} qubits",
            q.n
        )));
    }
    let mut gates = q.gates.clone();
    gates.push(Gate::new(vec![measured, q.n], cnot())?);
    gates.extend(q.gates.iter().rev().map(Gate::adjoint));
    Circuit::new(q.n + 1, gates)
}

/// Network of [`acceptance_circuit`]; its value is `p_0`.
pub fn acceptance_network(q: &Circuit, measured: usize) -> Result<TensorNetwork> {
    encode_circuit(&acceptance_circuit(q, measured)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbling::scale;
    use crate::network::{eval_contract, eval_labeling_sum};

    fn one_gate(m: Matrix) -> Circuit {
        Circuit::new(1, vec![Gate::new(vec![0], m).unwrap()]).unwrap()
    }

    #[test]
    fn single_qubit_values() {
        let v = |c: &Circuit| eval_labeling_sum(&encode_circuit(c).unwrap()).unwrap();
        assert!((v(&one_gate(Matrix::identity(2))) - ONE).norm() < 1e-12);
        assert!(v(&one_gate(pauli_x())).norm() < 1e-12);
        assert!((v(&one_gate(hadamard())).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn acceptance_probabilities() {
        for (m, p) in [(hadamard(), 0.5), (Matrix::identity(2), 1.0), (pauli_x(), 0.0)] {
            let c = one_gate(m);
            assert!((c.zero_probability(0) - p).abs() < 1e-12);
            let net = acceptance_network(&c, 0).unwrap();
            let v = eval_labeling_sum(&net).unwrap();
            assert!((v - C64::new(p, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn circuit_order_has_unit_scale() {
        let c = Circuit::new(
            2,
            vec![
                Gate::new(vec![0], hadamard()).unwrap(),
                Gate::new(vec![1, 0], cnot()).unwrap(),
                Gate::new(vec![1], hadamard()).unwrap(),
            ],
        )
        .unwrap();
        let net = encode_circuit(&c).unwrap();
        let report = scale(&net, &circuit_order_bubbling(&c)).unwrap();
        assert!((report.delta - 1.0).abs() < 1e-9);
        assert!(report.per_vertex_norms.iter().all(|n| (n - 1.0).abs() < 1e-9));
        let direct = c.run()[0];
        assert!((eval_contract(&net, &circuit_order_bubbling(&c)).unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn empty_circuit_has_unit_scale() {
        let c = Circuit::new(3, vec![]).unwrap();
        let net = encode_circuit(&c).unwrap();
        assert_eq!(net.num_vertices(), 6);
        assert!((scale(&net, &circuit_order_bubbling(&c)).unwrap().delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_gate_reports_its_norm() {
        let m = Matrix::diag(&[C64::new(2.0, 0.0), C64::new(0.5, 0.0)]);
        let c = one_gate(m);
        assert_eq!(c.non_unitary_gates(1e-10), vec![0]);
        let net = encode_circuit(&c).unwrap();
        assert!((scale(&net, &circuit_order_bubbling(&c)).unwrap().delta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_circuits() {
        assert!(Gate::new(vec![0, 0], cnot()).is_err());
        assert!(Gate::new(vec![0], cnot()).is_err());
        assert!(Circuit::new(1, vec![Gate::new(vec![1], hadamard()).unwrap()]).is_err());
        assert!(acceptance_circuit(&one_gate(hadamard()), 1).is_err());
    }
}
