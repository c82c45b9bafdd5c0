//! Tensor networks for partition functions of q-state models.
//!
//! A q-state model assigns a color `sigma_v in 0..q` to every vertex of a
//! graph and an energy `h_e(sigma_u, sigma_v)` to every edge; its partition
//! function is `Z(beta) = sum_sigma exp(-beta sum_e h_e)`.
//!
//! Two network constructions are provided:
//!
//! * [`build_general`] places an identity tensor at every vertex and the
//!   Boltzmann-weight matrix at the midpoint of every edge. Its value is
//!   `Z`.
//! * [`build_delta`] works with the differences `delta = sigma_head -
//!   sigma_tail` of a difference model, one independent variable per
//!   spanning-tree edge, and evaluates `Z / q`.

use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bubbling::Bubbling;
use crate::error::{Error, Result};
use crate::guard::Guards;
use crate::linalg::{operator_norm, Matrix};
use crate::network::{reduce_degrees, EdgeId, NetworkBuilder, TensorNetwork, VertexId};
use crate::tensor::Tensor;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// A simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Rejects self-loops, repeated edges and out-of-range endpoints.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidModel(format!(
                    "edge {i} = ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidModel(format!("edge {i} is a self-loop on vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidModel(format!("edge {i} = ({u}, {v}) is repeated")));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|v| (v - 1, v)).collect()).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidModel(format!(
                "a cycle needs at least 3 vertices, got {n}"
            )));
        }
        Graph::new(n, (0..n).map(|v| (v, (v + 1) % n)).collect())
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph::new(n, edges).expect("complete graph is simple")
    }

    /// `rows x cols` grid; vertex `(i, j)` has id `i * cols + j`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let v = i * cols + j;
                if j + 1 < cols {
                    edges.push((v, v + 1));
                }
                if i + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Graph::new(rows * cols, edges).expect("grid is simple")
    }

    /// Hub `0` joined to leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        Graph::new(leaves + 1, (1..=leaves).map(|l| (0, l)).collect()).expect("star is simple")
    }

    /// Outer 5-cycle `0..5`, inner pentagram `5..10`, spokes `i -- i + 5`.
    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::new(10, edges).expect("Petersen graph is simple")
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbor, edge id)` pairs of every vertex, sorted by neighbor.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(w, _) in &adj[u] {
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Interaction energy of one edge `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `q x q` row-major table of `h(sigma_u, sigma_v)`.
    Table(Vec<C64>),
    /// Length-`q` table of `h((sigma_u - sigma_v) mod q)`.
    Difference(Vec<C64>),
}

impl Coupling {
    pub fn energy(&self, q: usize, a: usize, b: usize) -> C64 {
        match self {
            Coupling::Table(t) => t[a * q + b],
            Coupling::Difference(h) => h[(a + q - b) % q],
        }
    }

    /// The difference-form table, if the energy depends only on
    /// `(sigma_u - sigma_v) mod q`.
    pub fn difference_table(&self, q: usize) -> Option<Vec<C64>> {
        match self {
            Coupling::Difference(h) => Some(h.clone()),
            Coupling::Table(t) => {
                let h: Vec<C64> = (0..q).map(|d| t[d * q]).collect();
                let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
                let ok = (0..q).all(|a| (0..q).all(|b| (t[a * q + b] - h[(a + q - b) % q]).norm() <= 1e-12 * scale));
                ok.then_some(h)
            }
        }
    }

    fn validate(&self, q: usize, edge: usize) -> Result<()> {
        let (values, expected) = match self {
            Coupling::Table(t) => (t, q * q),
            Coupling::Difference(h) => (h, q),
        };
        if values.len() != expected {
            return Err(Error::InvalidModel(format!(
                "coupling of edge {edge} has {} entries, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidModel(format!("coupling of edge {edge} is not finite")));
        }
        Ok(())
    }
}

fn require_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::InvalidModel(format!("models need q >= 2, got {q}")));
    }
    Ok(())
}

/// Ising coupling `h = -J s_u s_v` with spin `+1` as color 0 and `-1` as
/// color 1.
pub fn coupling_ising(j: f64) -> Coupling {
    Coupling::Difference(vec![C64::new(-j, 0.0), C64::new(j, 0.0)])
}

/// Potts coupling `h = -J [sigma_u == sigma_v]`.
pub fn coupling_potts(q: usize, j: f64) -> Result<Coupling> {
    require_q(q)?;
    Ok(Coupling::Difference(
        (0..q).map(|d| C64::new(if d == 0 { -j } else { 0.0 }, 0.0)).collect(),
    ))
}

/// Clock coupling `h = -J cos(2 pi (sigma_u - sigma_v) / q)`.
pub fn coupling_clock(q: usize, j: f64) -> Result<Coupling> {
    require_q(q)?;
    Ok(Coupling::Difference(
        (0..q)
            .map(|d| C64::new(-j * (2.0 * std::f64::consts::PI * d as f64 / q as f64).cos(), 0.0))
            .collect(),
    ))
}

/// A q-state model on a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub graph: Graph,
    pub q: usize,
    /// Inverse temperature; complex values are allowed.
    pub beta: C64,
    /// One coupling per graph edge.
    pub couplings: Vec<Coupling>,
    /// `(vertex, color)` constraints fixing the color of a vertex.
    pub pins: Vec<(usize, usize)>,
}

impl ModelSpec {
    /// The same coupling on every edge, no pins.
    pub fn uniform(graph: Graph, q: usize, beta: C64, coupling: Coupling) -> Self {
        let couplings = vec![coupling; graph.num_edges()];
        ModelSpec {
            graph,
            q,
            beta,
            couplings,
            pins: Vec::new(),
        }
    }

    pub fn with_pins(mut self, pins: Vec<(usize, usize)>) -> Self {
        self.pins = pins;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_q(self.q)?;
        if !self.beta.re.is_finite() || !self.beta.im.is_finite() {
            return Err(Error::InvalidModel("beta is not finite".into()));
        }
        if self.couplings.len() != self.graph.num_edges() {
            return Err(Error::InvalidModel(format!(
                "{} couplings for {} edges",
                self.couplings.len(),
                self.graph.num_edges()
            )));
        }
        for (e, c) in self.couplings.iter().enumerate() {
            c.validate(self.q, e)?;
        }
        for &(v, color) in &self.pins {
            if v >= self.graph.num_vertices() || color >= self.q {
                return Err(Error::InvalidModel(format!(
                    "pin ({v}, {color}) is outside the graph or the color range"
                )));
            }
        }
        Ok(())
    }

    /// `exp(-beta h_e(a, b))` for edge `e = (u, v)` with `sigma_u = a`,
    /// `sigma_v = b`.
    pub fn weight(&self, e: usize, a: usize, b: usize) -> C64 {
        (-self.beta * self.couplings[e].energy(self.q, a, b)).exp()
    }

    /// The Boltzmann-weight matrix of edge `e`, rows indexed by `sigma_u`.
    pub fn weight_matrix(&self, e: usize) -> Matrix {
        Matrix::from_fn(self.q, self.q, |a, b| self.weight(e, a, b))
    }

    /// Per-edge difference tables, or `None` for a general model.
    pub fn difference_tables(&self) -> Option<Vec<Vec<C64>>> {
        self.couplings.iter().map(|c| c.difference_table(self.q)).collect()
    }

    pub fn is_difference(&self) -> bool {
        self.difference_tables().is_some()
    }
}

fn require_connected(graph: &Graph) -> Result<()> {
    if graph.num_edges() == 0 {
        return Err(Error::InvalidModel("the graph has no edges".into()));
    }
    if !graph.is_connected() {
        return Err(Error::InvalidModel("the graph is not connected".into()));
    }
    Ok(())
}

/// `Z(beta)` by enumerating all `q^|V|` colorings consistent with the pins.
pub fn partition_function(spec: &ModelSpec) -> Result<C64> {
    partition_function_with(spec, &Guards::default())
}

pub fn partition_function_with(spec: &ModelSpec, guards: &Guards) -> Result<C64> {
    spec.validate()?;
    let weights: Vec<Matrix> = (0..spec.graph.num_edges()).map(|e| spec.weight_matrix(e)).collect();
    brute_force(&spec.graph, spec.q, &spec.pins, guards, |e, a, b| weights[e][(a, b)])
}

/// Number of proper `q`-colorings by enumeration.
pub fn count_colorings(graph: &Graph, q: usize) -> Result<u64> {
    let z = brute_force(
        graph,
        q,
        &[],
        &Guards::default(),
        |_, a, b| if a == b { ZERO } else { ONE },
    )?;
    Ok(z.re.round() as u64)
}

fn brute_force(
    graph: &Graph,
    q: usize,
    pins: &[(usize, usize)],
    guards: &Guards,
    weight: impl Fn(usize, usize, usize) -> C64 + Sync,
) -> Result<C64> {
    let n = graph.num_vertices();
    guards.check_labelings(q, n)?;
    let total = q.pow(n as u32);
    const CHUNK: usize = 1 << 12;
    let partials: Vec<C64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let mut colors = vec![0usize; n];
            let mut rem = start;
            for x in colors.iter_mut().rev() {
                *x = rem % q;
                rem /= q;
            }
            let mut acc = ZERO;
            for _ in start..(start + CHUNK).min(total) {
                if pins.iter().all(|&(v, col)| colors[v] == col) {
                    let mut term = ONE;
                    for (e, &(u, v)) in graph.edges().iter().enumerate() {
                        term *= weight(e, colors[u], colors[v]);
                    }
                    acc += term;
                }
                crate::tensor::increment(&mut colors, q);
            }
            acc
        })
        .collect();
    Ok(partials.into_iter().sum())
}

/// Id of the energy vertex of graph edge `e` in the [`build_general`]
/// network.
pub fn energy_vertex(graph: &Graph, e: usize) -> VertexId {
    graph.num_vertices() + e
}

/// Id of the `p`-th pin vertex in the [`build_general`] network.
pub fn pin_vertex(graph: &Graph, p: usize) -> VertexId {
    graph.num_vertices() + graph.num_edges() + p
}

/// Network on the graph with a vertex inserted at every edge midpoint.
///
/// Original vertex `v` keeps id `v` and carries an identity tensor; the
/// energy vertex of edge `e = (u, v)` has id `|V| + e` and tensor
/// `W[sigma_u][sigma_v] = exp(-beta h_e(sigma_u, sigma_v))`; pin `p` on
/// vertex `v` with color `c` is a rank-1 vertex `delta_{k,c}` with id
/// `|V| + |E| + p`. The value is `Z(beta)`.
pub fn build_general(spec: &ModelSpec) -> Result<TensorNetwork> {
    build_general_with(spec, None)
}

/// As [`build_general`], optionally reducing every vertex to degree at most
/// `max_degree` (new vertices get fresh ids).
pub fn build_general_with(spec: &ModelSpec, max_degree: Option<usize>) -> Result<TensorNetwork> {
    spec.validate()?;
    let weights: Vec<Matrix> = (0..spec.graph.num_edges()).map(|e| spec.weight_matrix(e)).collect();
    let net = build_tilde(&spec.graph, spec.q, &weights, &spec.pins)?;
    match max_degree {
        Some(d) => reduce_degrees(&net, d),
        None => Ok(net),
    }
}

/// Network whose value is the number of proper `q`-colorings: the general
/// construction with weight `1` for different colors and `0` for equal
/// ones.
pub fn build_coloring(graph: &Graph, q: usize) -> Result<TensorNetwork> {
    require_q(q)?;
    let w = Matrix::from_fn(q, q, |a, b| if a == b { ZERO } else { ONE });
    build_tilde(graph, q, &vec![w; graph.num_edges()], &[])
}

fn build_tilde(graph: &Graph, q: usize, weights: &[Matrix], pins: &[(usize, usize)]) -> Result<TensorNetwork> {
    require_connected(graph)?;
    let n = graph.num_vertices();
    let mut b = NetworkBuilder::new(q);
    for v in 0..n {
        b.add_vertex(v);
    }
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        let ev = energy_vertex(graph, e);
        b.link(u, ev);
        b.link(ev, v);
        b.set_tensor(ev, Tensor::new(q, 2, weights[e].data().to_vec())?);
    }
    for (p, &(v, color)) in pins.iter().enumerate() {
        let pv = pin_vertex(graph, p);
        b.link(pv, v);
        b.set_tensor(pv, Tensor::from_fn(q, 1, |k| if k[0] == color { ONE } else { ZERO })?);
    }
    for v in 0..n {
        let d = b.degree(v);
        b.set_tensor(v, Tensor::identity(q, d));
    }
    b.build()
}

/// Number of vertices whose neighbors are all higher or all lower.
pub fn extreme_count(graph: &Graph, heights: &[f64]) -> usize {
    let adj = graph.adjacency();
    (0..graph.num_vertices())
        .filter(|&v| {
            let up = adj[v].iter().filter(|&&(w, _)| heights[w] > heights[v]).count();
            up == 0 || up == adj[v].len()
        })
        .count()
}

/// A plane-sweep ordering and its extreme-vertex count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneSweep {
    pub bubbling: Bubbling,
    /// `b`: vertices swallowed `0 -> n` or `n -> 0`.
    pub extreme_count: usize,
}

/// Swallows the [`build_general`] network with a horizontal plane moving
/// upwards: original vertices at their heights, energy vertices at the
/// midpoints of their edges, and each pin immediately before its vertex.
pub fn plane_sweep_bubbling(graph: &Graph, pins: &[(usize, usize)], heights: &[f64]) -> Result<PlaneSweep> {
    let n = graph.num_vertices();
    if heights.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} heights for {n} vertices",
            heights.len()
        )));
    }
    if heights.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidArgument("heights must be finite".into()));
    }
    let mut sorted = heights.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("heights must be distinct".into()));
    }
    // (height, class, id): energy vertices before pins before the vertex at
    // an equal height.
    let mut items: Vec<(f64, u8, VertexId)> = heights.iter().enumerate().map(|(v, &h)| (h, 2, v)).collect();
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        items.push(((heights[u] + heights[v]) / 2.0, 0, energy_vertex(graph, e)));
    }
    for (p, &(v, _)) in pins.iter().enumerate() {
        items.push((heights[v], 1, pin_vertex(graph, p)));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(PlaneSweep {
        bubbling: Bubbling::new(items.into_iter().map(|(_, _, id)| id).collect()),
        extreme_count: extreme_count(graph, heights),
    })
}

/// Upper bound `q^{b/2} prod_e ||exp(-beta h_e)||` on the scale of a
/// plane-sweep bubbling with `b` extreme vertices.
pub fn scale_general(spec: &ModelSpec, extreme_count: usize) -> Result<f64> {
    spec.validate()?;
    let mut s = (spec.q as f64).powf(extreme_count as f64 / 2.0);
    for e in 0..spec.graph.num_edges() {
        s *= operator_norm(&spec.weight_matrix(e))?;
    }
    Ok(s)
}

/// Spanning tree, orientation and independent cycles of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaGraph {
    /// Graph edges of the spanning tree, in discovery order.
    pub tree_edges: Vec<usize>,
    /// The remaining graph edges, ascending.
    pub cycle_edges: Vec<usize>,
    /// `(tail, head)` of every graph edge; `delta_e = sigma_head -
    /// sigma_tail`.
    pub orientation: Vec<(usize, usize)>,
    /// For each cycle edge, the tree edges of its cycle in traversal order
    /// with sign `+1` (traversed tail to head) or `-1`. The cycle starts
    /// along the cycle edge from tail to head and returns through the tree.
    pub cycles: Vec<Vec<(usize, i8)>>,
}

impl DeltaGraph {
    /// Spanning tree by breadth-first search from vertex 0 (neighbors in
    /// ascending order); tree edges point away from the root, cycle edges
    /// from the lower to the higher vertex id.
    pub fn new(graph: &Graph) -> Result<Self> {
        require_connected(graph)?;
        let n = graph.num_vertices();
        let adj = graph.adjacency();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut seen = vec![false; n];
        let mut is_tree = vec![false; graph.num_edges()];
        let mut orientation = graph.edges().to_vec();
        let mut tree_edges = Vec::with_capacity(n - 1);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(w, e) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, e));
                    depth[w] = depth[u] + 1;
                    is_tree[e] = true;
                    orientation[e] = (u, w);
                    tree_edges.push(e);
                    queue.push_back(w);
                }
            }
        }
        let mut cycle_edges = Vec::new();
        let mut cycles = Vec::new();
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            if is_tree[e] {
                continue;
            }
            let (a, b) = (u.min(v), u.max(v));
            orientation[e] = (a, b);
            // From b up to the common ancestor (against tree arrows), then
            // down to a (along them).
            let (mut x, mut y) = (b, a);
            let mut up = Vec::new();
            let mut down = Vec::new();
            while x != y {
                if depth[x] >= depth[y] {
                    let (p, pe) = parent[x].expect("non-root has a parent");
                    up.push((pe, -1i8));
                    x = p;
                } else {
                    let (p, pe) = parent[y].expect("non-root has a parent");
                    down.push((pe, 1i8));
                    y = p;
                }
            }
            down.reverse();
            up.extend(down);
            cycle_edges.push(e);
            cycles.push(up);
        }
        Ok(DeltaGraph {
            tree_edges,
            cycle_edges,
            orientation,
            cycles,
        })
    }

    /// Checks every cycle constraint `delta_f + sum_e s_e delta_e = 0
    /// (mod q)` for a labeling of all graph edges.
    pub fn is_consistent(&self, q: usize, deltas: &[usize]) -> bool {
        self.cycle_edges.iter().zip(&self.cycles).all(|(&f, path)| {
            let sum = path
                .iter()
                .fold(deltas[f] as i64, |acc, &(e, s)| acc + s as i64 * deltas[e] as i64);
            sum.rem_euclid(q as i64) == 0
        })
    }
}

/// Vertex ids of a difference-model network, indexed like the
/// [`DeltaGraph`] edge lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaIds {
    pub tree: Vec<VertexId>,
    pub cycle: Vec<VertexId>,
    pub mid: Vec<VertexId>,
    pub tree_energy: Vec<VertexId>,
    /// Empty once the cycle weights are folded into the cycle vertices.
    pub cycle_energy: Vec<VertexId>,
}

/// A difference-model network with its construction data.
#[derive(Debug, Clone)]
pub struct DeltaNetwork {
    pub network: TensorNetwork,
    pub graph: DeltaGraph,
    /// Tree vertices, cycle vertices, mid vertices, energy vertices.
    pub bubbling: Bubbling,
    pub ids: DeltaIds,
    /// Network edge carrying `delta_e` for every graph edge, when present.
    pub delta_edges: Vec<Option<EdgeId>>,
    /// Whether [`improve_delta_weights`] has been applied.
    pub improved: bool,
    q: usize,
    /// `exp(-beta h_e(delta))` for every graph edge, as a function of the
    /// oriented `delta`.
    weights: Vec<Vec<C64>>,
}

impl DeltaNetwork {
    pub fn q(&self) -> usize {
        self.q
    }

    /// Boltzmann weights of graph edge `e` indexed by its `delta`.
    pub fn weights(&self, e: usize) -> &[C64] {
        &self.weights[e]
    }
}

fn delta_weights(spec: &ModelSpec, dg: &DeltaGraph) -> Result<Vec<Vec<C64>>> {
    let tables = spec
        .difference_tables()
        .ok_or_else(|| Error::InvalidModel("couplings are not of difference form".into()))?;
    let q = spec.q;
    Ok(spec
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(u, _))| {
            let head_is_u = dg.orientation[e].1 == u;
            (0..q)
                .map(|d| {
                    // The table is indexed by sigma_u - sigma_v.
                    let idx = if head_is_u { d } else { (q - d) % q };
                    (-spec.beta * tables[e][idx]).exp()
                })
                .collect()
        })
        .collect())
}

/// The difference-model network, which evaluates `Z / q`.
///
/// Tree and mid vertices carry identity tensors, energy vertices the
/// weights `exp(-beta h_e(delta))`, and each cycle vertex enforces its
/// cycle constraint. Pins are not supported.
pub fn build_delta(spec: &ModelSpec) -> Result<DeltaNetwork> {
    spec.validate()?;
    if !spec.pins.is_empty() {
        return Err(Error::InvalidModel(
            "pins are not supported by the difference construction".into(),
        ));
    }
    let dg = DeltaGraph::new(&spec.graph)?;
    let weights = delta_weights(spec, &dg)?;
    assemble_delta(spec.q, dg, weights, false)
}

/// Folds each cycle edge's weight into its cycle vertex and splits each
/// tree edge's weight as `sqrt(w)` between the tree vertex and the energy
/// vertex. The value is unchanged.
pub fn improve_delta_weights(dn: &DeltaNetwork) -> Result<DeltaNetwork> {
    if dn.improved {
        return Err(Error::InvalidNetwork("weights are already improved".into()));
    }
    assemble_delta(dn.q, dn.graph.clone(), dn.weights.clone(), true)
}

fn cycle_tensor(q: usize, path: &[(usize, i8)], energy: Option<&[C64]>) -> Result<Tensor> {
    let k = path.len();
    let rank = 2 * k + usize::from(energy.is_none());
    Tensor::from_fn(q, rank, |idx| {
        if (0..k).any(|i| idx[2 * i] != idx[2 * i + 1]) {
            return ZERO;
        }
        let d = required_cycle_delta(q, path, |i| idx[2 * i]);
        match energy {
            Some(w) => w[d],
            None if idx[2 * k] == d => ONE,
            None => ZERO,
        }
    })
}

/// `delta_f = -sum_e s_e delta_e (mod q)`.
fn required_cycle_delta(q: usize, path: &[(usize, i8)], delta: impl Fn(usize) -> usize) -> usize {
    let sum: i64 = path
        .iter()
        .enumerate()
        .map(|(i, &(_, s))| s as i64 * delta(i) as i64)
        .sum();
    (-sum).rem_euclid(q as i64) as usize
}

fn assemble_delta(q: usize, dg: DeltaGraph, weights: Vec<Vec<C64>>, improved: bool) -> Result<DeltaNetwork> {
    let t = dg.tree_edges.len();
    let c = dg.cycle_edges.len();
    let tree: Vec<VertexId> = (0..t).collect();
    let cycle: Vec<VertexId> = (t..t + c).collect();
    let mid: Vec<VertexId> = (t + c..2 * t + c).collect();
    let tree_energy: Vec<VertexId> = (2 * t + c..3 * t + c).collect();
    let cycle_energy: Vec<VertexId> = if improved {
        Vec::new()
    } else {
        (3 * t + c..3 * t + 2 * c).collect()
    };
    // Position of every graph edge within the tree-edge list.
    let mut tree_pos = vec![usize::MAX; weights.len()];
    for (i, &e) in dg.tree_edges.iter().enumerate() {
        tree_pos[e] = i;
    }

    let mut b = NetworkBuilder::new(q);
    let mut delta_edges = vec![None; weights.len()];
    for (i, &e) in dg.tree_edges.iter().enumerate() {
        delta_edges[e] = Some(b.link(tree[i], mid[i]));
    }
    for (j, path) in dg.cycles.iter().enumerate() {
        for &(e, _) in path {
            b.link(cycle[j], tree[tree_pos[e]]);
            b.link(cycle[j], mid[tree_pos[e]]);
        }
        if !improved {
            delta_edges[dg.cycle_edges[j]] = Some(b.link(cycle[j], cycle_energy[j]));
        }
    }
    for i in 0..t {
        b.link(mid[i], tree_energy[i]);
    }

    for (i, &e) in dg.tree_edges.iter().enumerate() {
        let w = &weights[e];
        let rank = b.degree(tree[i]);
        if improved {
            let root: Vec<C64> = w.iter().map(|z| z.sqrt()).collect();
            b.set_tensor(tree[i], Tensor::diagonal(&root, rank)?);
            b.set_tensor(tree_energy[i], Tensor::new(q, 1, root)?);
        } else {
            b.set_tensor(tree[i], Tensor::identity(q, rank));
            b.set_tensor(tree_energy[i], Tensor::new(q, 1, w.clone())?);
        }
        let rank = b.degree(mid[i]);
        b.set_tensor(mid[i], Tensor::identity(q, rank));
    }
    for (j, path) in dg.cycles.iter().enumerate() {
        let f = dg.cycle_edges[j];
        if improved {
            b.set_tensor(cycle[j], cycle_tensor(q, path, Some(&weights[f]))?);
        } else {
            b.set_tensor(cycle[j], cycle_tensor(q, path, None)?);
            b.set_tensor(cycle_energy[j], Tensor::new(q, 1, weights[f].clone())?);
        }
    }
    let network = b.build()?;
    let order: Vec<VertexId> = tree
        .iter()
        .chain(&cycle)
        .chain(&mid)
        .chain(&tree_energy)
        .chain(&cycle_energy)
        .copied()
        .collect();
    Ok(DeltaNetwork {
        network,
        graph: dg,
        bubbling: Bubbling::new(order),
        ids: DeltaIds {
            tree,
            cycle,
            mid,
            tree_energy,
            cycle_energy,
        },
        delta_edges,
        improved,
        q,
        weights,
    })
}

/// Rebuilds a difference-model network with every vertex of degree at most
/// `max_degree`.
///
/// Each cycle vertex becomes a chain of degree-3 vertices: one per tree
/// edge of the cycle that checks the tree/mid pair and forwards its label,
/// threaded through a running sum of the signed labels whose last vertex
/// emits `delta_f` (or applies the cycle weight once improved). Tree and
/// mid vertices are then reduced as identity or diagonal tensors.
pub fn reduce_delta_degree(dn: &DeltaNetwork, max_degree: usize) -> Result<TensorNetwork> {
    if max_degree < 3 {
        return Err(Error::InvalidArgument(format!(
            "max_degree must be at least 3, got {max_degree}"
        )));
    }
    let q = dn.q;
    let dg = &dn.graph;
    let ids = &dn.ids;
    let mut tree_pos = vec![usize::MAX; dn.weights.len()];
    for (i, &e) in dg.tree_edges.iter().enumerate() {
        tree_pos[e] = i;
    }
    let mut next_id = dn.network.vertex_ids().max().unwrap_or(0) + 1;
    let mut fresh = || {
        next_id += 1;
        next_id - 1
    };

    let mut b = NetworkBuilder::new(q);
    for i in 0..dg.tree_edges.len() {
        b.link(ids.tree[i], ids.mid[i]);
    }
    for (j, path) in dg.cycles.iter().enumerate() {
        let f = dg.cycle_edges[j];
        let k = path.len();
        // Copy vertices; the first one reuses the cycle vertex id.
        let copies: Vec<VertexId> = (0..k).map(|i| if i == 0 { ids.cycle[j] } else { fresh() }).collect();
        for (i, &(e, _)) in path.iter().enumerate() {
            b.link(copies[i], ids.tree[tree_pos[e]]);
            b.link(copies[i], ids.mid[tree_pos[e]]);
        }
        let energy = if dn.improved { Some(&dn.weights[f][..]) } else { None };
        let s0 = path[0].1 as i64;
        if k == 1 {
            // A single copy vertex closes the cycle on its own.
            if !dn.improved {
                b.link(copies[0], ids.cycle_energy[j]);
            }
            let tensor = Tensor::from_fn(q, 2 + usize::from(energy.is_none()), |idx| {
                if idx[0] != idx[1] {
                    return ZERO;
                }
                let d = (-s0 * idx[0] as i64).rem_euclid(q as i64) as usize;
                match energy {
                    Some(w) => w[d],
                    None if idx[2] == d => ONE,
                    None => ZERO,
                }
            })?;
            b.set_tensor(copies[0], tensor);
        } else {
            // First copy vertex: ports (t, m, running sum = s_0 * t).
            b.set_tensor(
                copies[0],
                Tensor::from_fn(q, 3, |idx| {
                    let ok = idx[0] == idx[1] && idx[2] as i64 == (s0 * idx[0] as i64).rem_euclid(q as i64);
                    if ok {
                        ONE
                    } else {
                        ZERO
                    }
                })?,
            );
            let mut prev = copies[0];
            for (i, &(_, s)) in path.iter().enumerate().skip(1) {
                let acc = fresh();
                b.link(prev, acc);
                b.link(copies[i], acc);
                b.set_tensor(copies[i], Tensor::identity(q, 3));
                let last = i == k - 1;
                let s = s as i64;
                let tensor = if !last {
                    // (sum_in, label, sum_out = sum_in + s * label)
                    Tensor::from_fn(q, 3, |idx| {
                        let out = (idx[0] as i64 + s * idx[1] as i64).rem_euclid(q as i64) as usize;
                        if idx[2] == out {
                            ONE
                        } else {
                            ZERO
                        }
                    })?
                } else {
                    if !dn.improved {
                        b.link(acc, ids.cycle_energy[j]);
                    }
                    Tensor::from_fn(q, 2 + usize::from(energy.is_none()), |idx| {
                        let d = (-(idx[0] as i64 + s * idx[1] as i64)).rem_euclid(q as i64) as usize;
                        match energy {
                            Some(w) => w[d],
                            None if idx[2] == d => ONE,
                            None => ZERO,
                        }
                    })?
                };
                b.set_tensor(acc, tensor);
                prev = acc;
            }
        }
        if !dn.improved {
            b.set_tensor(ids.cycle_energy[j], Tensor::new(q, 1, dn.weights[f].clone())?);
        }
    }
    for (i, &e) in dg.tree_edges.iter().enumerate() {
        b.link(ids.mid[i], ids.tree_energy[i]);
        let w = &dn.weights[e];
        let rank = b.degree(ids.tree[i]);
        if dn.improved {
            let root: Vec<C64> = w.iter().map(|z| z.sqrt()).collect();
            b.set_tensor(ids.tree[i], Tensor::diagonal(&root, rank)?);
            b.set_tensor(ids.tree_energy[i], Tensor::new(q, 1, root)?);
        } else {
            b.set_tensor(ids.tree[i], Tensor::identity(q, rank));
            b.set_tensor(ids.tree_energy[i], Tensor::new(q, 1, w.clone())?);
        }
    }
    for i in 0..dg.tree_edges.len() {
        let rank = b.degree(ids.mid[i]);
        b.set_tensor(ids.mid[i], Tensor::identity(q, rank));
    }
    reduce_degrees(&b.build()?, max_degree)
}

/// The two analytic scales of the difference construction, both for
/// approximating `Z`:
///
/// * basic: `q^{(|V|+1)/2} prod_e (sum_j |w_e(j)|^2)^{1/2}`;
/// * improved: `q prod_{tree} sum_j |w_e(j)| prod_{cycle} max_j |w_e(j)|`.
pub fn scale_delta(spec: &ModelSpec, dg: &DeltaGraph) -> Result<(f64, f64)> {
    spec.validate()?;
    let tables = spec
        .difference_tables()
        .ok_or_else(|| Error::InvalidModel("couplings are not of difference form".into()))?;
    let q = spec.q as f64;
    let mods: Vec<Vec<f64>> = tables
        .iter()
        .map(|h| h.iter().map(|&x| (-spec.beta * x).exp().norm()).collect())
        .collect();
    let n = spec.graph.num_vertices() as f64;
    let basic = q.powf((n + 1.0) / 2.0)
        * mods
            .iter()
            .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
            .product::<f64>();
    let tree: f64 = dg.tree_edges.iter().map(|&e| mods[e].iter().sum::<f64>()).product();
    let cycle: f64 = dg
        .cycle_edges
        .iter()
        .map(|&e| mods[e].iter().copied().fold(0.0, f64::max))
        .product();
    Ok((basic, q * tree * cycle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbling::scale;
    use crate::network::eval_labeling_sum;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn coupling_tables() {
        let ising = coupling_ising(1.0);
        assert_eq!(ising, Coupling::Difference(vec![c(-1.0), c(1.0)]));
        assert_eq!(
            coupling_potts(3, 1.0).unwrap(),
            Coupling::Difference(vec![c(-1.0), c(0.0), c(0.0)])
        );
        let Coupling::Difference(clock) = coupling_clock(4, 1.0).unwrap() else {
            panic!("clock is a difference model")
        };
        let expect = [-1.0, 0.0, 1.0, 0.0];
        for (h, e) in clock.iter().zip(expect) {
            assert!((h.re - e).abs() < 1e-15);
        }
        assert!(coupling_potts(1, 1.0).is_err());
        assert!(coupling_clock(0, 1.0).is_err());
    }

    #[test]
    fn table_difference_detection() {
        let t = Coupling::Table(vec![c(1.0), c(2.0), c(2.0), c(1.0)]);
        assert_eq!(t.difference_table(2), Some(vec![c(1.0), c(2.0)]));
        let t = Coupling::Table(vec![c(1.0), c(2.0), c(3.0), c(1.0)]);
        assert_eq!(t.difference_table(2), None);
    }

    #[test]
    fn single_edge_potts() {
        let spec = ModelSpec::uniform(Graph::path(2), 3, c(1.0), coupling_potts(3, 1.0).unwrap());
        let z = eval_labeling_sum(&build_general(&spec).unwrap()).unwrap();
        assert!(close(z, c(3.0 * 1f64.exp() + 6.0), 1e-12));
        assert!(close(partition_function(&spec).unwrap(), z, 1e-12));
    }

    #[test]
    fn triangle_ising_closed_form() {
        let spec = ModelSpec::uniform(Graph::complete(3), 2, c(0.3), coupling_ising(1.0));
        let z = eval_labeling_sum(&build_general(&spec).unwrap()).unwrap();
        let expect = 2.0 * 0.9f64.exp() + 6.0 * (-0.3f64).exp();
        assert!(close(z, c(expect), 1e-12));
    }

    #[test]
    fn coloring_counts() {
        let count = |g: &Graph| eval_labeling_sum(&build_coloring(g, 3).unwrap()).unwrap();
        assert!(close(count(&Graph::complete(3)), c(6.0), 1e-12));
        assert!(close(count(&Graph::complete(4)), c(0.0), 1e-12));
        assert!(close(count(&Graph::path(2)), c(6.0), 1e-12));
        assert_eq!(count_colorings(&Graph::complete(3), 3).unwrap(), 6);
    }

    #[test]
    fn disconnected_and_edgeless_graphs_are_rejected() {
        let g = Graph::new(3, vec![(0, 1)]).unwrap();
        let spec = ModelSpec::uniform(g, 2, c(0.1), coupling_ising(1.0));
        assert!(matches!(build_general(&spec), Err(Error::InvalidModel(_))));
        let spec = ModelSpec::uniform(Graph::path(1), 2, c(0.1), coupling_ising(1.0));
        assert!(matches!(build_general(&spec), Err(Error::InvalidModel(_))));
        assert!(Graph::new(2, vec![(0, 0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn pins_fix_colors() {
        let spec = ModelSpec::uniform(Graph::path(3), 2, c(0.4), coupling_ising(1.0)).with_pins(vec![(0, 0), (2, 1)]);
        let z = eval_labeling_sum(&build_general(&spec).unwrap()).unwrap();
        assert!(close(z, partition_function(&spec).unwrap(), 1e-12));
        // Middle spin free: one bond aligned, one anti-aligned either way.
        assert!(close(z, c(2.0), 1e-12));
    }

    #[test]
    fn path_sweep_has_two_extremes() {
        let g = Graph::path(4);
        let sweep = plane_sweep_bubbling(&g, &[], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sweep.extreme_count, 2);
        assert_eq!(sweep.bubbling.order(), &[0, 4, 1, 5, 2, 6, 3]);
        assert!(plane_sweep_bubbling(&g, &[], &[0.0, 1.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn sweep_scale_matches_bound() {
        let spec = ModelSpec::uniform(Graph::grid(2, 3), 3, c(0.7), coupling_potts(3, 1.0).unwrap());
        let heights: Vec<f64> = (0..6).map(|v| (v / 3 + v % 3) as f64 + 0.1 * (v / 3) as f64).collect();
        let sweep = plane_sweep_bubbling(&spec.graph, &[], &heights).unwrap();
        assert_eq!(sweep.extreme_count, 2);
        let net = build_general(&spec).unwrap();
        let report = scale(&net, &sweep.bubbling).unwrap();
        let bound = scale_general(&spec, sweep.extreme_count).unwrap();
        assert_eq!(report.extreme_count, 2);
        assert!(report.delta <= bound * (1.0 + 1e-9));
        assert!((report.delta - bound).abs() < 1e-9 * bound);
        let per_edge = 0.7f64.exp() + 2.0;
        assert!((bound - 3.0 * per_edge.powi(7)).abs() < 1e-9 * bound);
    }

    #[test]
    fn delta_graph_of_two_cycle_example() {
        // Four vertices, five edges: two independent cycles.
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)]).unwrap();
        let dg = DeltaGraph::new(&g).unwrap();
        assert_eq!(dg.tree_edges.len(), 3);
        assert_eq!(dg.cycle_edges.len(), 2);
        for (f, path) in dg.cycle_edges.iter().zip(&dg.cycles) {
            assert!(!dg.tree_edges.contains(f));
            assert!(path.iter().all(|(e, _)| dg.tree_edges.contains(e)));
        }
        // Every coloring yields consistent differences.
        for colors in 0..81usize {
            let sigma: Vec<usize> = (0..4).map(|i| colors / 3usize.pow(i) % 3).collect();
            let deltas: Vec<usize> = dg
                .orientation
                .iter()
                .map(|&(t, h)| (sigma[h] + 3 - sigma[t]) % 3)
                .collect();
            assert!(dg.is_consistent(3, &deltas));
        }
    }

    #[test]
    fn delta_network_triangle() {
        let spec = ModelSpec::uniform(Graph::complete(3), 2, c(0.3), coupling_ising(1.0));
        let dn = build_delta(&spec).unwrap();
        let z = 2.0 * 0.9f64.exp() + 6.0 * (-0.3f64).exp();
        let v = eval_labeling_sum(&dn.network).unwrap();
        assert!(close(v * 2.0, c(z), 1e-12));
        let improved = improve_delta_weights(&dn).unwrap();
        assert!(close(eval_labeling_sum(&improved.network).unwrap(), v, 1e-12));
        assert!(improve_delta_weights(&improved).is_err());
    }

    #[test]
    fn delta_scales_match_network_norms() {
        let spec = ModelSpec::uniform(Graph::complete(4), 3, c(0.7), coupling_potts(3, 1.0).unwrap());
        let dn = build_delta(&spec).unwrap();
        let (basic, improved) = scale_delta(&spec, &dn.graph).unwrap();
        let q = 3.0;
        let d_basic = scale(&dn.network, &dn.bubbling).unwrap().delta;
        assert!((q * d_basic - basic).abs() < 1e-9 * basic);
        let imp = improve_delta_weights(&dn).unwrap();
        let d_imp = scale(&imp.network, &imp.bubbling).unwrap().delta;
        assert!((q * d_imp - improved).abs() < 1e-9 * improved);
        let e = 0.7f64.exp();
        let ferro = q * (2.0 + e).powi(3) * e.powi(3);
        assert!((improved - ferro).abs() < 1e-9 * ferro);
        assert!(improved <= basic);
    }

    #[test]
    fn asymmetric_difference_table_respects_orientation() {
        let h = Coupling::Difference(vec![c(0.1), c(-0.4), c(0.9)]);
        let g = Graph::new(3, vec![(1, 0), (2, 1), (0, 2)]).unwrap();
        let spec = ModelSpec::uniform(g, 3, C64::new(0.5, 0.2), h);
        let z = partition_function(&spec).unwrap();
        let dn = build_delta(&spec).unwrap();
        assert!(close(eval_labeling_sum(&dn.network).unwrap() * 3.0, z, 1e-12));
    }

    #[test]
    fn non_difference_models_are_rejected() {
        let t = Coupling::Table(vec![c(1.0), c(2.0), c(3.0), c(1.0)]);
        let spec = ModelSpec::uniform(Graph::path(2), 2, c(0.3), t);
        assert!(matches!(build_delta(&spec), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn degree_reduction_preserves_values() {
        let spec = ModelSpec::uniform(Graph::complete(4), 2, c(0.3), coupling_ising(1.0));
        let z = partition_function(&spec).unwrap();
        let general = build_general_with(&spec, Some(3)).unwrap();
        assert!(general.vertices().iter().all(|v| v.ports.len() <= 3));
        assert!(close(eval_labeling_sum(&general).unwrap(), z, 1e-12));
        let dn = build_delta(&spec).unwrap();
        for net in [&dn, &improve_delta_weights(&dn).unwrap()] {
            let reduced = reduce_delta_degree(net, 3).unwrap();
            assert!(reduced.vertices().iter().all(|v| v.ports.len() <= 3));
            let v = crate::network::eval_contract(&reduced, &crate::bubbling::greedy_bubbling(&reduced)).unwrap();
            assert!(close(v * 2.0, z, 1e-12));
        }
    }
}
