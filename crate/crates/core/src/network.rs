//! Fully contracted tensor networks and their exact evaluation.
//!
//! A network is a multigraph whose vertices carry dense tensors. Port `s` of
//! a vertex is tensor index `s`, and every port is joined to exactly one
//! port of a different vertex. The value of the network is
//!
//! ```text
//! T(G, M) = sum over edge labelings l of  prod_v M_v(l)
//! ```
//!
//! computed either by brute-force enumeration ([`eval_labeling_sum`]) or by
//! absorbing vertices one at a time into a frontier tensor
//! ([`eval_contract`]).

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bubbling::Bubbling;
use crate::error::{Error, Result};
use crate::guard::Guards;
use crate::tensor::Tensor;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Tensors by vertex and port pairs, as taken by [`TensorNetwork::new`].
pub type NetworkParts = (Vec<(VertexId, Tensor)>, Vec<(Port, Port)>);

/// One end of an edge: a vertex and one of its ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub vertex: VertexId,
    pub port: usize,
}

impl Port {
    pub fn new(vertex: VertexId, port: usize) -> Self {
        Port { vertex, port }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: Port,
    pub b: Port,
}

impl Edge {
    /// The endpoint on the other side from `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a.vertex == v {
            self.b.vertex
        } else {
            self.a.vertex
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub tensor: Tensor,
    /// `ports[s]` is the edge attached at port `s`.
    pub ports: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorNetwork {
    q: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    index: HashMap<VertexId, usize>,
}

impl TensorNetwork {
    /// Validates and assembles a network from tensors and port pairs.
    ///
    /// Edge ids are positions in `edges`.
    pub fn new(q: usize, vertices: Vec<(VertexId, Tensor)>, edges: Vec<(Port, Port)>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidNetwork("q must be positive".into()));
        }
        let mut index = HashMap::with_capacity(vertices.len());
        for (pos, (id, t)) in vertices.iter().enumerate() {
            if index.insert(*id, pos).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate vertex id {id}")));
            }
            if t.q() != q {
                return Err(Error::InvalidNetwork(format!(
                    "vertex {id} has local dimension {} but the network has q={q}",
                    t.q()
                )));
            }
        }
        let mut slots: Vec<Vec<Option<EdgeId>>> = vertices.iter().map(|(_, t)| vec![None; t.rank()]).collect();
        for (e, (a, b)) in edges.iter().enumerate() {
            if a.vertex == b.vertex {
                return Err(Error::InvalidNetwork(format!(
                    "edge {e} is a self-loop on vertex {}",
                    a.vertex
                )));
            }
            for p in [a, b] {
                let pos = *index
                    .get(&p.vertex)
                    .ok_or_else(|| Error::InvalidNetwork(format!("edge {e} references unknown vertex {}", p.vertex)))?;
                let slot = slots[pos].get_mut(p.port).ok_or_else(|| {
                    Error::InvalidNetwork(format!(
                        "edge {e} uses port {} of vertex {}, whose tensor has rank {}",
                        p.port,
                        p.vertex,
                        vertices[pos].1.rank()
                    ))
                })?;
                if let Some(prev) = slot.replace(e) {
                    return Err(Error::InvalidNetwork(format!(
                        "port {} of vertex {} is used by edges {prev} and {e}",
                        p.port, p.vertex
                    )));
                }
            }
        }
        let vertices = vertices
            .into_iter()
            .zip(slots)
            .map(|((id, tensor), slots)| {
                let ports = slots
                    .into_iter()
                    .enumerate()
                    .map(|(s, e)| {
                        e.ok_or_else(|| Error::InvalidNetwork(format!("port {s} of vertex {id} is not connected")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Vertex { id, tensor, ports })
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = edges.into_iter().map(|(a, b)| Edge { a, b }).collect();
        Ok(TensorNetwork {
            q,
            vertices,
            edges,
            index,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.index.get(&id).map(|&p| &self.vertices[p])
    }

    pub fn contains(&self, id: VertexId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().map(|v| v.id)
    }

    /// Copy of the network with one vertex's tensor replaced.
    pub fn with_tensor(&self, id: VertexId, tensor: Tensor) -> Result<Self> {
        let pos = *self
            .index
            .get(&id)
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown vertex {id}")))?;
        let old = &self.vertices[pos].tensor;
        if tensor.q() != self.q || tensor.rank() != old.rank() {
            return Err(Error::DimensionMismatch(format!(
                "replacement tensor for vertex {id} has q={}, rank={}; expected q={}, rank={}",
                tensor.q(),
                tensor.rank(),
                self.q,
                old.rank()
            )));
        }
        let mut out = self.clone();
        out.vertices[pos].tensor = tensor;
        Ok(out)
    }

    /// Deconstructs into constructor arguments.
    pub fn to_parts(&self) -> NetworkParts {
        (
            self.vertices.iter().map(|v| (v.id, v.tensor.clone())).collect(),
            self.edges.iter().map(|e| (e.a, e.b)).collect(),
        )
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            let v = &self.vertices[p];
            for &e in &v.ports {
                let w = self.index[&self.edges[e].other(v.id)];
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Incremental construction with automatic port numbering.
///
/// Ports are assigned in the order edges are added at each vertex; tensors
/// may be attached at any time before [`NetworkBuilder::build`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    q: usize,
    order: Vec<VertexId>,
    tensors: HashMap<VertexId, Option<Tensor>>,
    degree: HashMap<VertexId, usize>,
    edges: Vec<(Port, Port)>,
}

impl NetworkBuilder {
    pub fn new(q: usize) -> Self {
        NetworkBuilder {
            q,
            order: Vec::new(),
            tensors: HashMap::new(),
            degree: HashMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_vertex(&mut self, id: VertexId) -> &mut Self {
        if !self.tensors.contains_key(&id) {
            self.order.push(id);
            self.tensors.insert(id, None);
            self.degree.insert(id, 0);
        }
        self
    }

    pub fn set_tensor(&mut self, id: VertexId, tensor: Tensor) -> &mut Self {
        self.add_vertex(id);
        self.tensors.insert(id, Some(tensor));
        self
    }

    /// Joins the next free ports of `u` and `v`; returns the edge id.
    pub fn link(&mut self, u: VertexId, v: VertexId) -> EdgeId {
        self.add_vertex(u);
        self.add_vertex(v);
        let pu = self.next_port(u);
        let pv = self.next_port(v);
        self.edges.push((Port::new(u, pu), Port::new(v, pv)));
        self.edges.len() - 1
    }

    pub fn degree(&self, id: VertexId) -> usize {
        self.degree.get(&id).copied().unwrap_or(0)
    }

    fn next_port(&mut self, id: VertexId) -> usize {
        let d = self.degree.get_mut(&id).expect("vertex registered");
        *d += 1;
        *d - 1
    }

    pub fn build(self) -> Result<TensorNetwork> {
        let mut vertices = Vec::with_capacity(self.order.len());
        for id in self.order {
            let t = self.tensors[&id]
                .clone()
                .ok_or_else(|| Error::InvalidNetwork(format!("vertex {id} has no tensor")))?;
            vertices.push((id, t));
        }
        TensorNetwork::new(self.q, vertices, self.edges)
    }
}

/// Brute-force value: the sum over all `q^|E|` edge labelings.
pub fn eval_labeling_sum(net: &TensorNetwork) -> Result<C64> {
    eval_labeling_sum_with(net, &Guards::default())
}

pub fn eval_labeling_sum_with(net: &TensorNetwork, guards: &Guards) -> Result<C64> {
    let q = net.q;
    let ne = net.num_edges();
    guards.check_labelings(q, ne)?;
    let total = q.pow(ne as u32);
    // Per vertex: (tensor entries, stride contributed by each edge label).
    type Layout<'a> = (&'a [C64], Vec<(EdgeId, usize)>);
    let layout: Vec<Layout> = net
        .vertices
        .iter()
        .map(|v| {
            let strides = v.tensor.strides();
            (v.tensor.entries(), v.ports.iter().copied().zip(strides).collect())
        })
        .collect();

    const CHUNK: usize = 1 << 12;
    let chunks = total.div_ceil(CHUNK);
    // Fixed chunking and ordered final reduction keep the result independent
    // of the thread count.
    let partials: Vec<C64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut labels = vec![0usize; ne];
            let mut rem = start;
            for l in labels.iter_mut().rev() {
                *l = rem % q;
                rem /= q;
            }
            let mut acc = C64::new(0.0, 0.0);
            for _ in start..end {
                let mut term = C64::new(1.0, 0.0);
                for (entries, strides) in &layout {
                    let off: usize = strides.iter().map(|&(e, s)| labels[e] * s).sum();
                    term *= entries[off];
                    if term.re == 0.0 && term.im == 0.0 {
                        break;
                    }
                }
                acc += term;
                crate::tensor::increment(&mut labels, q);
            }
            acc
        })
        .collect();
    Ok(partials.into_iter().sum())
}

/// Value by sequential absorption of vertices in bubbling order.
pub fn eval_contract(net: &TensorNetwork, order: &Bubbling) -> Result<C64> {
    eval_contract_with(net, order, &Guards::default())
}

pub fn eval_contract_with(net: &TensorNetwork, order: &Bubbling, guards: &Guards) -> Result<C64> {
    order.validate(net)?;
    let mut frontier = Frontier::unit();
    let mut swallowed = vec![false; net.num_vertices()];
    for &id in order.order() {
        let pos = net.index[&id];
        let v = &net.vertices[pos];
        frontier = frontier.absorb(net, v, &swallowed, guards)?;
        swallowed[pos] = true;
    }
    debug_assert!(frontier.edges.is_empty());
    Ok(frontier.data[0])
}

/// Partial contraction of the swallowed region, indexed by frontier edges in
/// ascending edge-id order.
#[derive(Debug, Clone)]
struct Frontier {
    edges: Vec<EdgeId>,
    data: Vec<C64>,
}

impl Frontier {
    fn unit() -> Self {
        Frontier {
            edges: Vec::new(),
            data: vec![C64::new(1.0, 0.0)],
        }
    }

    fn absorb(&self, net: &TensorNetwork, v: &Vertex, swallowed: &[bool], guards: &Guards) -> Result<Frontier> {
        let q = net.q;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for &e in &v.ports {
            let other = net.index[&net.edges[e].other(v.id)];
            if swallowed[other] {
                inputs.push(e);
            } else {
                outputs.push(e);
            }
        }
        let input_set: BTreeSet<EdgeId> = inputs.iter().copied().collect();
        let mut next: Vec<EdgeId> = self
            .edges
            .iter()
            .copied()
            .filter(|e| !input_set.contains(e))
            .chain(outputs.iter().copied())
            .collect();
        next.sort_unstable();
        guards.check_amplitudes(q, next.len(), "frontier tensor")?;

        let max_edge = net.num_edges();
        let mut old_stride = vec![0usize; max_edge];
        for (e, s) in self.edges.iter().zip(crate::tensor::strides(q, self.edges.len())) {
            old_stride[*e] = s;
        }
        let mut vert_stride = vec![0usize; max_edge];
        for (e, s) in v.ports.iter().zip(v.tensor.strides()) {
            vert_stride[*e] = s;
        }
        let entries = v.tensor.entries();
        let k_count = q.pow(inputs.len() as u32);
        let mut labels = vec![0usize; max_edge];
        let mut klabels = vec![0usize; inputs.len()];
        let mut nlabels = vec![0usize; next.len()];
        let mut data = Vec::with_capacity(q.pow(next.len() as u32));
        for _ in 0..q.pow(next.len() as u32) {
            for (e, &l) in next.iter().zip(&nlabels) {
                labels[*e] = l;
            }
            let mut acc = C64::new(0.0, 0.0);
            klabels.iter_mut().for_each(|l| *l = 0);
            for _ in 0..k_count {
                for (e, &l) in inputs.iter().zip(&klabels) {
                    labels[*e] = l;
                }
                let old: usize = self.edges.iter().map(|&e| labels[e] * old_stride[e]).sum();
                let off: usize = v.ports.iter().map(|&e| labels[e] * vert_stride[e]).sum();
                acc += self.data[old] * entries[off];
                crate::tensor::increment(&mut klabels, q);
            }
            data.push(acc);
            crate::tensor::increment(&mut nlabels, q);
        }
        Ok(Frontier { edges: next, data })
    }
}

/// Replaces a high-degree identity vertex by a chain of identity vertices of
/// degree at most `max_degree`. The value of the network is unchanged.
pub fn reduce_degree(net: &TensorNetwork, vertex: VertexId, max_degree: usize) -> Result<TensorNetwork> {
    expand_identity(net, vertex, max_degree).map(|(n, _)| n)
}

/// As [`reduce_degree`], also returning the ids of the replacement chain in
/// chain order. The first replacement keeps the original id.
pub fn expand_identity(
    net: &TensorNetwork,
    vertex: VertexId,
    max_degree: usize,
) -> Result<(TensorNetwork, Vec<VertexId>)> {
    if max_degree < 3 {
        return Err(Error::InvalidArgument(format!(
            "max_degree must be at least 3, got {max_degree}"
        )));
    }
    let v = net
        .vertex(vertex)
        .ok_or_else(|| Error::InvalidNetwork(format!("unknown vertex {vertex}")))?;
    if !v.tensor.is_identity() {
        return Err(Error::NotIdentity(vertex));
    }
    let degree = v.ports.len();
    if degree <= max_degree {
        return Ok((net.clone(), vec![vertex]));
    }
    // Split the external ports into groups along a caterpillar: the end
    // nodes take max_degree-1 ports, inner nodes max_degree-2.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut remaining: Vec<usize> = (0..degree).collect();
    groups.push(remaining.drain(..max_degree - 1).collect());
    while remaining.len() > max_degree - 1 {
        groups.push(remaining.drain(..max_degree - 2).collect());
    }
    groups.push(remaining);

    let mut next_id = net.vertex_ids().max().unwrap_or(0) + 1;
    let ids: Vec<VertexId> = (0..groups.len())
        .map(|g| {
            if g == 0 {
                vertex
            } else {
                next_id += 1;
                next_id - 1
            }
        })
        .collect();

    // New port numbering: group g's external ports first, then the link to
    // the previous node, then the link to the next node.
    let mut port_map: HashMap<usize, Port> = HashMap::new();
    let mut degrees = vec![0usize; groups.len()];
    for (g, group) in groups.iter().enumerate() {
        for (k, &p) in group.iter().enumerate() {
            port_map.insert(p, Port::new(ids[g], k));
        }
        degrees[g] = group.len();
    }
    let (old_vertices, old_edges) = net.to_parts();
    let mut edges: Vec<(Port, Port)> = old_edges
        .into_iter()
        .map(|(a, b)| {
            let fix = |p: Port| if p.vertex == vertex { port_map[&p.port] } else { p };
            (fix(a), fix(b))
        })
        .collect();
    for g in 1..groups.len() {
        let a = Port::new(ids[g - 1], degrees[g - 1]);
        degrees[g - 1] += 1;
        let b = Port::new(ids[g], degrees[g]);
        degrees[g] += 1;
        edges.push((a, b));
    }
    let q = net.q;
    let mut vertices = Vec::with_capacity(old_vertices.len() + groups.len() - 1);
    for (id, t) in old_vertices {
        if id == vertex {
            vertices.push((id, Tensor::identity(q, degrees[0])));
            for g in 1..groups.len() {
                vertices.push((ids[g], Tensor::identity(q, degrees[g])));
            }
        } else {
            vertices.push((id, t));
        }
    }
    Ok((TensorNetwork::new(q, vertices, edges)?, ids))
}

/// Applies [`expand_identity`] to every vertex of degree above
/// `max_degree`.
///
/// Diagonal (but non-identity) tensors are first split into an identity
/// vertex with one extra port and a rank-1 vertex carrying the diagonal
/// weights. Any other tensor of too high a degree is an error.
pub fn reduce_degrees(net: &TensorNetwork, max_degree: usize) -> Result<TensorNetwork> {
    if max_degree < 3 {
        return Err(Error::InvalidArgument(format!(
            "max_degree must be at least 3, got {max_degree}"
        )));
    }
    let q = net.q;
    let high: Vec<VertexId> = net
        .vertices
        .iter()
        .filter(|v| v.ports.len() > max_degree)
        .map(|v| v.id)
        .collect();
    let mut out = net.clone();
    for id in high {
        let v = out.vertex(id).expect("vertex still present");
        if !v.tensor.is_identity() {
            let weights = v.tensor.diagonal_values().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "vertex {id} has degree {} and a non-diagonal tensor; it cannot be reduced",
                    v.ports.len()
                ))
            })?;
            let rank = v.tensor.rank();
            let leaf = out.vertex_ids().max().unwrap_or(0) + 1;
            let (mut vertices, mut edges) = out.to_parts();
            for (vid, t) in vertices.iter_mut() {
                if *vid == id {
                    *t = Tensor::identity(q, rank + 1);
                }
            }
            vertices.push((leaf, Tensor::new(q, 1, weights)?));
            edges.push((Port::new(id, rank), Port::new(leaf, 0)));
            out = TensorNetwork::new(q, vertices, edges)?;
        }
        out = reduce_degree(&out, id, max_degree)?;
    }
    Ok(out)
}
