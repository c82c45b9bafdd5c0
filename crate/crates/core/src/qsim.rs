//! Classical simulation of the additive approximation algorithm.
//!
//! Swallowing the vertices of a network in bubbling order with the
//! normalized operators `O_v / ||O_v||` produces a state whose all-zero
//! amplitude is `T(G, M) / Delta`. A Hadamard test then estimates that
//! overlap from `+-1` samples, and `Delta` times the estimate approximates
//! `T(G, M)` to within `epsilon * Delta` with probability at least
//! `1 - failure`.
//!
//! Two backends compute the overlap:
//!
//! * [`evolve`] tracks only the ancilla-all-zero branch, which evolves by
//!   the normalized swallowing matrices themselves;
//! * [`evolve_statevector`] applies the full unitary embedding of every
//!   step to a state with explicit ancilla qubits and padding registers.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bubbling::{swallowing_operators, Bubbling, SwallowingOperator};
use crate::error::{Error, Result};
use crate::guard::Guards;
use crate::network::{EdgeId, TensorNetwork};
use crate::unitarize::embed_rect;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Result of evolving a network's swallowing process.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    /// `<0...0|psi_n>`, equal to `T(G, M) / Delta`; zero when `delta` is.
    pub overlap: C64,
    /// Product of the swallowing-operator norms; `0` flags a vanishing
    /// operator, in which case the network value is exactly zero.
    pub delta: f64,
    pub norms: Vec<f64>,
}

/// Which simulation computes the overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Amplitude,
    Statevector,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Backend::Amplitude),
            "statevector" => Ok(Backend::Statevector),
            other => Err(Error::InvalidArgument(format!(
                "unknown backend {other:?}; expected \"amplitude\" or \"statevector\""
            ))),
        }
    }
}

/// How repeated Hadamard-test runs are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Aggregator {
    /// A single run; the estimate is the sample mean.
    #[default]
    Mean,
    /// Component-wise median over `runs` independent runs.
    MedianOfMeans { runs: usize },
}

/// Shots per part for a `+-1` Hoeffding estimate within `eps` except with
/// probability `failure / 2`: `ceil(2 / eps^2 * ln(4 / failure))`.
pub fn shots_for(epsilon: f64, failure: f64) -> Result<u64> {
    check_accuracy(epsilon, failure)?;
    let n = (2.0 / (epsilon * epsilon) * (4.0 / failure).ln()).ceil();
    if !(n.is_finite() && n < u64::MAX as f64) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} needs too many shots"
        )));
    }
    Ok(n.max(1.0) as u64)
}

fn check_accuracy(epsilon: f64, failure: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(failure > 0.0 && failure < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "failure probability must lie in (0, 1/2), got {failure}"
        )));
    }
    Ok(())
}

/// A Hadamard-test estimate with its sample counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardEstimate {
    pub value: C64,
    pub shots_real: u64,
    pub shots_imag: u64,
}

/// Simulates the Hadamard test on a state with overlap `<alpha|U|alpha>`.
///
/// Each part draws `shots_for(epsilon / sqrt 2, failure)` outcomes, so the
/// complex estimate is within `epsilon` except with probability `failure`.
/// Outcome `|1>` is reported as `+1` and `|0>` as `-1`; for the real part
/// `Pr(+1) = (1 + Re z) / 2`, and the `-i` phase variant gives
/// `Pr(+1) = (1 + Im z) / 2`.
pub fn hadamard_test(overlap: C64, epsilon: f64, failure: f64, seed: u64) -> Result<HadamardEstimate> {
    hadamard_test_with(overlap, epsilon, failure, seed, Aggregator::Mean)
}

pub fn hadamard_test_with(
    overlap: C64,
    epsilon: f64,
    failure: f64,
    seed: u64,
    aggregator: Aggregator,
) -> Result<HadamardEstimate> {
    if !(overlap.re.is_finite() && overlap.im.is_finite()) || overlap.norm() > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} is not a valid amplitude"
        )));
    }
    let n = shots_for(epsilon / std::f64::consts::SQRT_2, failure)?;
    let runs = match aggregator {
        Aggregator::Mean => 1,
        Aggregator::MedianOfMeans { runs } if runs >= 1 => runs,
        Aggregator::MedianOfMeans { .. } => {
            return Err(Error::InvalidArgument("median of means needs at least one run".into()))
        }
    };
    let mut re = Vec::with_capacity(runs);
    let mut im = Vec::with_capacity(runs);
    for run in 0..runs as u64 {
        re.push(sample_mean(overlap.re, n, seed, 2 * run));
        im.push(sample_mean(overlap.im, n, seed, 2 * run + 1));
    }
    Ok(HadamardEstimate {
        value: C64::new(median(&mut re), median(&mut im)),
        shots_real: n * runs as u64,
        shots_imag: n * runs as u64,
    })
}

/// Mean of `n` outcomes `+-1` with `E = mean`, drawn from stream `stream`.
fn sample_mean(mean: f64, n: u64, seed: u64, stream: u64) -> f64 {
    let p_plus = ((1.0 + mean) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sum: i64 = 0;
    for _ in 0..n {
        sum += if rng.random::<f64>() < p_plus { 1 } else { -1 };
    }
    sum as f64 / n as f64
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Overlap via the ancilla-zero branch: the frontier vector is multiplied
/// by `M^{K,L} / ||M^{K,L}||` at every step.
pub fn evolve(net: &TensorNetwork, b: &Bubbling) -> Result<Evolution> {
    evolve_with(net, b, &Guards::default())
}

pub fn evolve_with(net: &TensorNetwork, b: &Bubbling, guards: &Guards) -> Result<Evolution> {
    let ops = swallowing_operators(net, b, guards)?;
    let norms: Vec<f64> = ops.iter().map(|o| o.norm).collect();
    if norms.contains(&0.0) {
        return Ok(Evolution {
            overlap: ZERO,
            delta: 0.0,
            norms,
        });
    }
    let q = net.q();
    let mut edges: Vec<EdgeId> = Vec::new();
    let mut amps = vec![C64::new(1.0, 0.0)];
    for op in &ops {
        let (next_edges, next) = apply_swallow(q, &edges, &amps, op, guards)?;
        edges = next_edges;
        amps = next;
    }
    debug_assert!(edges.is_empty());
    Ok(Evolution {
        overlap: amps[0],
        delta: norms.iter().product(),
        norms,
    })
}

/// Applies `1_J (x) M^{K,L} / ||M||` to a frontier vector indexed by
/// `edges` (ascending).
fn apply_swallow(
    q: usize,
    edges: &[EdgeId],
    amps: &[C64],
    op: &SwallowingOperator,
    guards: &Guards,
) -> Result<(Vec<EdgeId>, Vec<C64>)> {
    let mut next: Vec<EdgeId> = edges
        .iter()
        .copied()
        .filter(|e| !op.input_edges.contains(e))
        .chain(op.output_edges.iter().copied())
        .collect();
    next.sort_unstable();
    guards.check_amplitudes(q, next.len(), "branch state")?;

    let old_strides = crate::tensor::strides(q, edges.len());
    let new_strides = crate::tensor::strides(q, next.len());
    let stride_in = |list: &[EdgeId], strides: &[usize], e: EdgeId| strides[list.iter().position(|&x| x == e).unwrap()];
    let k_old: Vec<usize> = op
        .input_edges
        .iter()
        .map(|&e| stride_in(edges, &old_strides, e))
        .collect();
    let l_new: Vec<usize> = op
        .output_edges
        .iter()
        .map(|&e| stride_in(&next, &new_strides, e))
        .collect();
    let j: Vec<(usize, usize)> = op
        .untouched_edges
        .iter()
        .map(|&e| (stride_in(edges, &old_strides, e), stride_in(&next, &new_strides, e)))
        .collect();

    let scale = 1.0 / op.norm;
    let mut out = vec![ZERO; q.pow(next.len() as u32)];
    let mut jl = vec![0usize; j.len()];
    let mut kl = vec![0usize; k_old.len()];
    let mut ll = vec![0usize; l_new.len()];
    for _ in 0..q.pow(j.len() as u32) {
        let (jo, jn) = jl
            .iter()
            .zip(&j)
            .fold((0, 0), |(a, b), (&l, &(so, sn))| (a + l * so, b + l * sn));
        ll.iter_mut().for_each(|x| *x = 0);
        for row in 0..op.matrix.rows() {
            let ln: usize = ll.iter().zip(&l_new).map(|(&l, &s)| l * s).sum();
            let mut acc = ZERO;
            kl.iter_mut().for_each(|x| *x = 0);
            for col in 0..op.matrix.cols() {
                let ko: usize = kl.iter().zip(&k_old).map(|(&l, &s)| l * s).sum();
                acc += op.matrix[(row, col)] * amps[jo + ko];
                crate::tensor::increment(&mut kl, q);
            }
            out[jn + ln] = acc * scale;
            crate::tensor::increment(&mut ll, q);
        }
        crate::tensor::increment(&mut jl, q);
    }
    Ok((next, out))
}

/// What a register slot of a [`StateVector`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Register {
    /// The label of a frontier edge.
    Edge(EdgeId),
    /// A padding register; `|0>` in the ancilla-all-zero branch.
    Junk,
}

/// Full state of the simulated quantum computer.
///
/// Amplitudes are row-major over the register slots (each of dimension
/// `q`, first slot most significant) followed by the ancilla qubits, the
/// most recently created ancilla being the least significant index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    q: usize,
    registers: Vec<Register>,
    ancillas: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    fn initial(q: usize) -> Self {
        StateVector {
            q,
            registers: Vec::new(),
            ancillas: 0,
            amplitudes: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    /// Ordered `(register, dimension)` pairs.
    pub fn register_layout(&self) -> Vec<(Register, usize)> {
        self.registers.iter().map(|&r| (r, self.q)).collect()
    }

    pub fn ancilla_count(&self) -> usize {
        self.ancillas
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Amplitudes with every ancilla in `|0>`, indexed by the register
    /// slots.
    pub fn ancilla_zero_branch(&self) -> Vec<C64> {
        self.amplitudes.iter().step_by(1 << self.ancillas).copied().collect()
    }

    /// The ancilla-zero branch restricted to junk registers in `|0>`,
    /// indexed by the edge registers in ascending edge order.
    pub fn frontier_branch(&self) -> (Vec<EdgeId>, Vec<C64>) {
        let q = self.q;
        let strides = crate::tensor::strides(q, self.registers.len());
        let mut edge_slots: Vec<(EdgeId, usize)> = self
            .registers
            .iter()
            .zip(&strides)
            .filter_map(|(r, &s)| match r {
                Register::Edge(e) => Some((*e, s)),
                Register::Junk => None,
            })
            .collect();
        edge_slots.sort_unstable();
        let branch = self.ancilla_zero_branch();
        let mut labels = vec![0usize; edge_slots.len()];
        let mut out = Vec::with_capacity(q.pow(edge_slots.len() as u32));
        for _ in 0..q.pow(edge_slots.len() as u32) {
            let off: usize = labels.iter().zip(&edge_slots).map(|(&l, &(_, s))| l * s).sum();
            out.push(branch[off]);
            crate::tensor::increment(&mut labels, q);
        }
        (edge_slots.into_iter().map(|(e, _)| e).collect(), out)
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.q; self.registers.len()];
        d.extend(std::iter::repeat_n(2, self.ancillas));
        d
    }

    /// Appends a register slot in `|0>` after the existing slots.
    fn push_register(&mut self, r: Register) {
        let tail = 1usize << self.ancillas;
        let head = self.amplitudes.len() / tail;
        let mut out = vec![ZERO; self.amplitudes.len() * self.q];
        for h in 0..head {
            let src = &self.amplitudes[h * tail..(h + 1) * tail];
            out[h * self.q * tail..h * self.q * tail + tail].copy_from_slice(src);
        }
        self.amplitudes = out;
        self.registers.push(r);
    }

    fn push_ancilla(&mut self) {
        let mut out = vec![ZERO; self.amplitudes.len() * 2];
        for (i, &z) in self.amplitudes.iter().enumerate() {
            out[2 * i] = z;
        }
        self.amplitudes = out;
        self.ancillas += 1;
    }

    /// Applies `u` to the subsystems at `positions` (first position most
    /// significant within `u`'s index).
    fn apply(&mut self, positions: &[usize], u: &crate::linalg::Matrix) {
        let dims = self.dims();
        let strides = {
            let mut s = vec![1usize; dims.len()];
            for p in (0..dims.len().saturating_sub(1)).rev() {
                s[p] = s[p + 1] * dims[p + 1];
            }
            s
        };
        let sub_dims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
        let sub: usize = sub_dims.iter().product();
        debug_assert_eq!(sub, u.rows());
        // Offsets of every sub-index within the full vector.
        let mut sub_offsets = Vec::with_capacity(sub);
        let mut idx = vec![0usize; positions.len()];
        for _ in 0..sub {
            sub_offsets.push(idx.iter().zip(positions).map(|(&i, &p)| i * strides[p]).sum::<usize>());
            for (d, &n) in idx.iter_mut().zip(&sub_dims).rev() {
                *d += 1;
                if *d < n {
                    break;
                }
                *d = 0;
            }
        }
        let rest: Vec<usize> = (0..dims.len()).filter(|p| !positions.contains(p)).collect();
        let mut ridx = vec![0usize; rest.len()];
        let total_rest: usize = rest.iter().map(|&p| dims[p]).product();
        let mut buf = vec![ZERO; sub];
        for _ in 0..total_rest {
            let base: usize = ridx.iter().zip(&rest).map(|(&i, &p)| i * strides[p]).sum();
            for (b, &o) in buf.iter_mut().zip(&sub_offsets) {
                *b = self.amplitudes[base + o];
            }
            for (r, &o) in sub_offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, &b) in buf.iter().enumerate() {
                    acc += u[(r, c)] * b;
                }
                self.amplitudes[base + o] = acc;
            }
            for (d, &p) in ridx.iter_mut().zip(&rest).rev() {
                *d += 1;
                if *d < dims[p] {
                    break;
                }
                *d = 0;
            }
        }
    }
}

/// Step-by-step statevector simulation of the swallowing process.
#[derive(Debug, Clone)]
pub struct StatevectorSim {
    ops: Vec<SwallowingOperator>,
    state: StateVector,
    step: usize,
    guards: Guards,
}

impl StatevectorSim {
    pub fn new(net: &TensorNetwork, b: &Bubbling) -> Result<Self> {
        Self::with_guards(net, b, &Guards::default())
    }

    pub fn with_guards(net: &TensorNetwork, b: &Bubbling, guards: &Guards) -> Result<Self> {
        let ops = swallowing_operators(net, b, guards)?;
        Ok(StatevectorSim {
            ops,
            state: StateVector::initial(net.q()),
            step: 0,
            guards: *guards,
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn operators(&self) -> &[SwallowingOperator] {
        &self.ops
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step == self.ops.len()
    }

    /// Swallows the next vertex: adds input padding and one fresh ancilla,
    /// then applies the unitary embedding of its swallowing operator.
    pub fn step(&mut self) -> Result<()> {
        let op = self
            .ops
            .get(self.step)
            .ok_or_else(|| Error::InvalidArgument("all vertices are already swallowed".into()))?;
        let q = self.state.q;
        let sub = embed_rect(&op.matrix, q)?;
        let new_regs = self.state.registers.len() + sub.input_pad;
        let dim = (q as u128).pow(new_regs as u32) << (self.state.ancillas + 1);
        self.guards.check_dimension(dim, "simulated state vector")?;

        let mut slots: Vec<usize> = op
            .input_edges
            .iter()
            .map(|&e| {
                self.state
                    .registers
                    .iter()
                    .position(|&r| r == Register::Edge(e))
                    .expect("input edge is on the frontier")
            })
            .collect();
        for _ in 0..sub.input_pad {
            slots.push(self.state.registers.len());
            self.state.push_register(Register::Junk);
        }
        self.state.push_ancilla();
        let mut positions = slots.clone();
        positions.push(self.state.registers.len() + self.state.ancillas - 1);
        self.state.apply(&positions, &sub.u);
        for (k, &slot) in slots.iter().enumerate() {
            self.state.registers[slot] = match op.output_edges.get(k) {
                Some(&e) => Register::Edge(e),
                None => Register::Junk,
            };
        }
        self.step += 1;
        Ok(())
    }

    /// `<0...0|psi>` once every vertex is swallowed.
    pub fn overlap(&self) -> Result<C64> {
        if !self.is_done() {
            return Err(Error::InvalidArgument(format!(
                "{} of {} vertices swallowed",
                self.step,
                self.ops.len()
            )));
        }
        Ok(self.state.amplitudes[0])
    }
}

/// Overlap via the explicit unitary embedding of every swallowing step.
pub fn evolve_statevector(net: &TensorNetwork, b: &Bubbling) -> Result<Evolution> {
    evolve_statevector_with(net, b, &Guards::default())
}

pub fn evolve_statevector_with(net: &TensorNetwork, b: &Bubbling, guards: &Guards) -> Result<Evolution> {
    let mut sim = StatevectorSim::with_guards(net, b, guards)?;
    let norms: Vec<f64> = sim.ops.iter().map(|o| o.norm).collect();
    if norms.contains(&0.0) {
        return Ok(Evolution {
            overlap: ZERO,
            delta: 0.0,
            norms,
        });
    }
    while !sim.is_done() {
        sim.step()?;
    }
    Ok(Evolution {
        overlap: sim.overlap()?,
        delta: norms.iter().product(),
        norms,
    })
}

/// Parameters of [`approximate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxConfig {
    pub epsilon: f64,
    /// Allowed failure probability of the Hadamard test.
    pub failure: f64,
    pub seed: u64,
    pub backend: Backend,
    pub aggregator: Aggregator,
    pub guards: Guards,
}

impl ApproxConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        ApproxConfig {
            epsilon,
            failure: 0.25,
            seed,
            backend: Backend::Amplitude,
            aggregator: Aggregator::Mean,
            guards: Guards::default(),
        }
    }
}

/// Output of the additive approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResult {
    /// Estimate of `T(G, M)`.
    pub r: C64,
    pub delta: f64,
    pub epsilon: f64,
    pub shots_real: u64,
    pub shots_imag: u64,
    pub seed: u64,
}

/// Estimates `T(G, M)` to within `epsilon * Delta`, except with probability
/// `config.failure`.
pub fn approximate(net: &TensorNetwork, b: &Bubbling, config: &ApproxConfig) -> Result<ApproxResult> {
    let per_part = shots_for(config.epsilon / std::f64::consts::SQRT_2, config.failure)?;
    let evo = match config.backend {
        Backend::Amplitude => evolve_with(net, b, &config.guards)?,
        Backend::Statevector => evolve_statevector_with(net, b, &config.guards)?,
    };
    if evo.delta == 0.0 {
        let runs = match config.aggregator {
            Aggregator::Mean => 1,
            Aggregator::MedianOfMeans { runs } => runs.max(1) as u64,
        };
        return Ok(ApproxResult {
            r: ZERO,
            delta: 0.0,
            epsilon: config.epsilon,
            shots_real: per_part * runs,
            shots_imag: per_part * runs,
            seed: config.seed,
        });
    }
    let est = hadamard_test_with(
        evo.overlap,
        config.epsilon,
        config.failure,
        config.seed,
        config.aggregator,
    )?;
    Ok(ApproxResult {
        r: est.value * evo.delta,
        delta: evo.delta,
        epsilon: config.epsilon,
        shots_real: est.shots_real,
        shots_imag: est.shots_imag,
        seed: config.seed,
    })
}
