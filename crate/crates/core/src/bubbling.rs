//! Bubblings (vertex orderings), their frontiers and swallowing operators.
//!
//! Swallowing vertex `v_i` maps the frontier tensor on `Z_{i-1}` to the one
//! on `Z_i` through `1_J (x) M^{K,L}`, where `K` are the edges from `v_i`
//! back into the swallowed region, `L` the edges leaving it, and `J` the
//! untouched frontier edges. Registers are always kept in ascending edge-id
//! order, so `M^{K,L}` is a `q^|L| x q^|K|` matrix with rows indexed by the
//! labels of `L` and columns by the labels of `K`.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guard::Guards;
use crate::linalg::{operator_norm, Matrix};
use crate::network::{EdgeId, TensorNetwork, VertexId};

/// An ordering of all vertices of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bubbling {
    order: Vec<VertexId>,
}

impl Bubbling {
    pub fn new(order: Vec<VertexId>) -> Self {
        Bubbling { order }
    }

    pub fn order(&self) -> &[VertexId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Checks that the ordering is a permutation of the network's vertices.
    pub fn validate(&self, net: &TensorNetwork) -> Result<()> {
        if self.order.len() != net.num_vertices() {
            return Err(Error::InvalidBubbling(format!(
                "ordering has {} entries but the network has {} vertices",
                self.order.len(),
                net.num_vertices()
            )));
        }
        let mut seen = BTreeSet::new();
        for &v in &self.order {
            if !net.contains(v) {
                return Err(Error::InvalidBubbling(format!("unknown vertex {v}")));
            }
            if !seen.insert(v) {
                return Err(Error::InvalidBubbling(format!("vertex {v} appears twice")));
            }
        }
        Ok(())
    }

    fn positions(&self) -> HashMap<VertexId, usize> {
        self.order.iter().enumerate().map(|(i, &v)| (v, i)).collect()
    }
}

/// The frontier sets `Z_0, ..., Z_n`, each in ascending edge order.
pub fn frontiers(net: &TensorNetwork, b: &Bubbling) -> Result<Vec<Vec<EdgeId>>> {
    b.validate(net)?;
    let pos = b.positions();
    let n = b.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        // Z_i: edges with exactly one endpoint among the first i vertices.
        let z: Vec<EdgeId> = net
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| (pos[&e.a.vertex] < i) != (pos[&e.b.vertex] < i))
            .map(|(id, _)| id)
            .collect();
        out.push(z);
    }
    Ok(out)
}

/// Largest frontier size.
pub fn bubble_width(net: &TensorNetwork, b: &Bubbling) -> Result<usize> {
    Ok(frontiers(net, b)?.iter().map(Vec::len).max().unwrap_or(0))
}

#[derive(Debug, Clone)]
pub struct SwallowingOperator {
    pub vertex: VertexId,
    /// `K`: edges back into the swallowed region.
    pub input_edges: Vec<EdgeId>,
    /// `L`: edges to vertices not yet swallowed.
    pub output_edges: Vec<EdgeId>,
    /// `J`: frontier edges not touching the vertex.
    pub untouched_edges: Vec<EdgeId>,
    /// `M^{K,L}`, a `q^|L| x q^|K|` matrix.
    pub matrix: Matrix,
    pub norm: f64,
}

impl SwallowingOperator {
    /// Swallowed in a `0 -> n` or `n -> 0` fashion.
    pub fn is_extreme(&self) -> bool {
        self.input_edges.is_empty() || self.output_edges.is_empty()
    }
}

/// Swallowing operator of step `i` (1-based).
pub fn swallowing_operator(net: &TensorNetwork, b: &Bubbling, i: usize) -> Result<SwallowingOperator> {
    swallowing_operator_with(net, b, i, &Guards::default())
}

pub fn swallowing_operator_with(
    net: &TensorNetwork,
    b: &Bubbling,
    i: usize,
    guards: &Guards,
) -> Result<SwallowingOperator> {
    b.validate(net)?;
    if i == 0 || i > b.len() {
        return Err(Error::InvalidArgument(format!("step {i} out of range 1..={}", b.len())));
    }
    build_operator(net, b, &b.positions(), i - 1, guards)
}

/// All swallowing operators in bubbling order.
pub fn swallowing_operators(net: &TensorNetwork, b: &Bubbling, guards: &Guards) -> Result<Vec<SwallowingOperator>> {
    b.validate(net)?;
    let pos = b.positions();
    (0..b.len())
        .into_par_iter()
        .map(|step| build_operator(net, b, &pos, step, guards))
        .collect()
}

fn build_operator(
    net: &TensorNetwork,
    b: &Bubbling,
    pos: &HashMap<VertexId, usize>,
    step: usize,
    guards: &Guards,
) -> Result<SwallowingOperator> {
    let q = net.q();
    let id = b.order()[step];
    let v = net.vertex(id).expect("validated bubbling");
    let mut input_edges = Vec::new();
    let mut output_edges = Vec::new();
    for &e in &v.ports {
        if pos[&net.edges()[e].other(id)] < step {
            input_edges.push(e);
        } else {
            output_edges.push(e);
        }
    }
    input_edges.sort_unstable();
    output_edges.sort_unstable();
    guards.check_amplitudes(
        q,
        input_edges.len() + output_edges.len(),
        &format!("swallowing operator of vertex {id}"),
    )?;
    let untouched_edges: Vec<EdgeId> = net
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            let (pa, pb) = (pos[&e.a.vertex], pos[&e.b.vertex]);
            (pa < step) != (pb < step) && e.a.vertex != id && e.b.vertex != id
        })
        .map(|(eid, _)| eid)
        .collect();

    let matrix = swallowing_matrix(net, id, &input_edges, &output_edges);
    let norm = operator_norm(&matrix)?;
    Ok(SwallowingOperator {
        vertex: id,
        input_edges,
        output_edges,
        untouched_edges,
        matrix,
        norm,
    })
}

/// `M^{K,L}` for vertex `id` with the given (sorted) input and output edges.
pub(crate) fn swallowing_matrix(net: &TensorNetwork, id: VertexId, inputs: &[EdgeId], outputs: &[EdgeId]) -> Matrix {
    let q = net.q();
    let v = net.vertex(id).expect("known vertex");
    let strides = v.tensor.strides();
    let stride_of = |e: EdgeId| -> usize {
        let p = v.ports.iter().position(|&x| x == e).expect("edge incident to vertex");
        strides[p]
    };
    let in_strides: Vec<usize> = inputs.iter().map(|&e| stride_of(e)).collect();
    let out_strides: Vec<usize> = outputs.iter().map(|&e| stride_of(e)).collect();
    let rows = q.pow(outputs.len() as u32);
    let cols = q.pow(inputs.len() as u32);
    let entries = v.tensor.entries();
    let offset = |mut idx: usize, st: &[usize]| -> usize {
        let mut off = 0;
        for &s in st.iter().rev() {
            off += (idx % q) * s;
            idx /= q;
        }
        off
    };
    Matrix::from_fn(rows, cols, |r, c| {
        entries[offset(r, &out_strides) + offset(c, &in_strides)]
    })
}

/// Approximation scale and related bubbling statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    /// Product of the per-vertex swallowing-operator norms.
    pub delta: f64,
    #[serde(rename = "norms")]
    pub per_vertex_norms: Vec<f64>,
    pub bubble_width: usize,
    /// Number of vertices swallowed `0 -> n` or `n -> 0`.
    pub extreme_count: usize,
}

pub fn scale(net: &TensorNetwork, b: &Bubbling) -> Result<ScaleReport> {
    scale_with(net, b, &Guards::default())
}

pub fn scale_with(net: &TensorNetwork, b: &Bubbling, guards: &Guards) -> Result<ScaleReport> {
    let ops = swallowing_operators(net, b, guards)?;
    let per_vertex_norms: Vec<f64> = ops.iter().map(|o| o.norm).collect();
    Ok(ScaleReport {
        delta: per_vertex_norms.iter().product(),
        per_vertex_norms,
        bubble_width: bubble_width(net, b)?,
        extreme_count: ops.iter().filter(|o| o.is_extreme()).count(),
    })
}

/// Greedy ordering: repeatedly swallow the vertex that leaves the smallest
/// frontier, breaking ties by the smallest vertex id.
///
/// Heuristic only; no optimality claim.
pub fn greedy_bubbling(net: &TensorNetwork) -> Bubbling {
    let mut ids: Vec<VertexId> = net.vertex_ids().collect();
    ids.sort_unstable();
    let mut swallowed: BTreeSet<VertexId> = BTreeSet::new();
    let mut frontier = 0usize;
    let mut order = Vec::with_capacity(ids.len());
    while order.len() < ids.len() {
        let mut best: Option<(usize, VertexId, usize, usize)> = None;
        for &id in ids.iter().filter(|id| !swallowed.contains(id)) {
            let v = net.vertex(id).expect("listed vertex");
            let k = v
                .ports
                .iter()
                .filter(|&&e| swallowed.contains(&net.edges()[e].other(id)))
                .count();
            let l = v.ports.len() - k;
            let next = frontier - k + l;
            if best.is_none_or(|(b, ..)| next < b) {
                best = Some((next, id, k, l));
            }
        }
        let (next, id, _, _) = best.expect("an unswallowed vertex remains");
        frontier = next;
        swallowed.insert(id);
        order.push(id);
    }
    Bubbling::new(order)
}
