//! JSON reading and writing for networks, bubblings, models, circuits and
//! results.
//!
//! Floating-point output uses 17 significant digits (the shortest form of
//! `%.17g`), so every `f64` survives a write/read round trip exactly.
//! Parse errors carry a position: `line L, column C` for syntax and type
//! errors, or a JSON path such as `vertices[2].entries` for semantic ones.

use std::collections::HashMap;
use std::io;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bubbling::{Bubbling, ScaleReport};
use crate::circuits::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Port, TensorNetwork, VertexId};
use crate::qsim::ApproxResult;
use crate::statmech::{coupling_clock, coupling_ising, coupling_potts, Coupling, DeltaNetwork, Graph, ModelSpec};
use crate::tensor::Tensor;

/// Formats `x` like C's `%.17g`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(format!("{x:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            strip_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `serde_json` formatter writing floats with [`format_f64`].
#[derive(Debug, Default, Clone, Copy)]
pub struct SigFigsFormatter;

impl serde_json::ser::Formatter for SigFigsFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigsFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::format("output", e.to_string()))?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn syntax(e: serde_json::Error) -> Error {
    Error::format(format!("line {}, column {}", e.line(), e.column()), e.to_string())
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(syntax)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize, Deserialize)]
struct RawVertex {
    id: VertexId,
    entries: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    q: usize,
    vertices: Vec<RawVertex>,
    edges: Vec<[[usize; 2]; 2]>,
}

/// Reads the network format
/// `{"q": int, "vertices": [{"id": int, "entries": [[re, im], ...]}],
/// "edges": [[[vid, port], [vid, port]], ...]}`.
///
/// A vertex's rank is its degree in `edges`.
pub fn network_from_json(text: &str) -> Result<TensorNetwork> {
    let raw: RawNetwork = parse(text)?;
    let mut degree: HashMap<VertexId, usize> = HashMap::new();
    for (i, [a, b]) in raw.edges.iter().enumerate() {
        for (side, p) in [a, b].into_iter().enumerate() {
            if !raw.vertices.iter().any(|v| v.id == p[0]) {
                return Err(Error::format(
                    format!("edges[{i}][{side}]"),
                    format!("unknown vertex {}", p[0]),
                ));
            }
            *degree.entry(p[0]).or_default() += 1;
        }
    }
    if raw.q == 0 {
        return Err(Error::format("q", "q must be positive"));
    }
    let mut vertices = Vec::with_capacity(raw.vertices.len());
    for (i, v) in raw.vertices.into_iter().enumerate() {
        let rank = degree.get(&v.id).copied().unwrap_or(0);
        let expected = u32::try_from(rank).ok().and_then(|r| raw.q.checked_pow(r));
        if expected != Some(v.entries.len()) {
            return Err(Error::format(
                format!("vertices[{i}].entries"),
                format!(
                    "vertex {} has degree {rank}, so it needs q^{rank} entries, got {}",
                    v.id,
                    v.entries.len()
                ),
            ));
        }
        let entries = v.entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
        let t =
            Tensor::new(raw.q, rank, entries).map_err(|e| Error::format(format!("vertices[{i}]"), e.to_string()))?;
        vertices.push((v.id, t));
    }
    let edges = raw
        .edges
        .iter()
        .map(|[a, b]| (Port::new(a[0], a[1]), Port::new(b[0], b[1])))
        .collect();
    TensorNetwork::new(raw.q, vertices, edges).map_err(|e| Error::format("edges", e.to_string()))
}

pub fn network_to_json(net: &TensorNetwork) -> Result<String> {
    let raw = RawNetwork {
        q: net.q(),
        vertices: net
            .vertices()
            .iter()
            .map(|v| RawVertex {
                id: v.id,
                entries: v.tensor.entries().iter().map(|&z| pair(z)).collect(),
            })
            .collect(),
        edges: net
            .edges()
            .iter()
            .map(|e| [[e.a.vertex, e.a.port], [e.b.vertex, e.b.port]])
            .collect(),
    };
    to_json(&raw)
}

/// Reads a JSON array of vertex ids.
pub fn bubbling_from_json(text: &str) -> Result<Bubbling> {
    parse(text)
}

pub fn bubbling_to_json(b: &Bubbling) -> Result<String> {
    to_json(b)
}

pub fn scale_report_to_json(r: &ScaleReport) -> Result<String> {
    to_json(r)
}

#[derive(Serialize)]
struct RawApprox {
    r: [f64; 2],
    delta: f64,
    epsilon: f64,
    shots: u64,
    seed: u64,
}

/// `{"r": [re, im], "delta", "epsilon", "shots", "seed"}`; `shots` is the
/// per-part sample count.
pub fn approx_result_to_json(r: &ApproxResult) -> Result<String> {
    to_json(&RawApprox {
        r: pair(r.r),
        delta: r.delta,
        epsilon: r.epsilon,
        shots: r.shots_real.max(r.shots_imag),
        seed: r.seed,
    })
}

#[derive(Deserialize)]
struct RawGraph {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    kind: String,
    #[serde(rename = "J")]
    j: Option<f64>,
    table: Option<Vec<Value>>,
}

#[derive(Deserialize)]
struct RawModel {
    q: usize,
    #[serde(default)]
    beta: Option<Value>,
    graph: RawGraph,
    coupling: Option<RawCoupling>,
    #[serde(default)]
    pins: Vec<[usize; 2]>,
    #[serde(default)]
    heights: Option<Vec<f64>>,
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    /// `None` when the file has no coupling (only graph and `q`, as used
    /// for coloring networks).
    pub spec: Option<ModelSpec>,
    pub graph: Graph,
    pub q: usize,
    /// Optional per-vertex heights for plane-sweep bubblings.
    pub heights: Option<Vec<f64>>,
}

fn complex_value(v: &Value, at: &str) -> Result<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(a) if a.len() == 2 => match (a[0].as_f64(), a[1].as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(Error::format(at, "expected [re, im] numbers")),
        },
        _ => Err(Error::format(at, "expected a number or [re, im]")),
    }
}

/// Reads the model format
/// `{"q", "beta": [re, im], "graph": {"vertices", "edges"}, "coupling":
/// {"kind": "ising" | "potts" | "clock" | "table" | "difference_table",
/// "J", "table"}, "pins": [[vertex, color], ...]}`.
///
/// `beta` may also be a plain number. A `"table"` coupling lists the `q^2`
/// energies `h(sigma_u, sigma_v)` row-major (flat or as rows); a
/// `"difference_table"` lists `h(0..q)`. An optional `"heights"` array
/// gives one height per vertex for plane-sweep bubblings.
pub fn model_from_json(text: &str) -> Result<ModelFile> {
    let raw: RawModel = parse(text)?;
    let edges = raw.graph.edges.iter().map(|&[u, v]| (u, v)).collect();
    let graph = Graph::new(raw.graph.vertices, edges).map_err(|e| Error::format("graph", e.to_string()))?;
    if let Some(h) = &raw.heights {
        if h.len() != graph.num_vertices() {
            return Err(Error::format(
                "heights",
                format!("{} heights for {} vertices", h.len(), graph.num_vertices()),
            ));
        }
    }
    let q = raw.q;
    let spec = match raw.coupling {
        None => None,
        Some(c) => {
            let need_j = || {
                c.j.ok_or_else(|| Error::format("coupling.J", format!("{} coupling needs J", c.kind)))
            };
            let table = |expected: usize| -> Result<Vec<C64>> {
                let raw_table = c
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::format("coupling.table", "missing table"))?;
                // A q^2 table may also be given as q rows of q entries.
                let nested = expected == q * q
                    && raw_table.len() == q
                    && raw_table.iter().all(|r| r.as_array().is_some_and(|a| a.len() == q));
                let mut out = Vec::new();
                for (i, v) in raw_table.iter().enumerate() {
                    let at = format!("coupling.table[{i}]");
                    if nested {
                        for (j, x) in v.as_array().expect("checked row").iter().enumerate() {
                            out.push(complex_value(x, &format!("{at}[{j}]"))?);
                        }
                    } else {
                        out.push(complex_value(v, &at)?);
                    }
                }
                Ok(out)
            };
            let coupling = match c.kind.as_str() {
                "ising" => {
                    if q != 2 {
                        return Err(Error::format("q", "the Ising model has q = 2"));
                    }
                    coupling_ising(need_j()?)
                }
                "potts" => coupling_potts(q, need_j()?).map_err(|e| Error::format("q", e.to_string()))?,
                "clock" => coupling_clock(q, need_j()?).map_err(|e| Error::format("q", e.to_string()))?,
                "table" => Coupling::Table(table(q * q)?),
                "difference_table" => Coupling::Difference(table(q)?),
                other => {
                    return Err(Error::format(
                        "coupling.kind",
                        format!("unknown coupling kind {other:?}"),
                    ))
                }
            };
            let beta = match &raw.beta {
                Some(v) => complex_value(v, "beta")?,
                None => return Err(Error::format("beta", "missing beta")),
            };
            let spec = ModelSpec::uniform(graph.clone(), q, beta, coupling)
                .with_pins(raw.pins.iter().map(|&[v, c]| (v, c)).collect());
            spec.validate().map_err(|e| Error::format("model", e.to_string()))?;
            Some(spec)
        }
    };
    Ok(ModelFile {
        spec,
        graph,
        q,
        heights: raw.heights,
    })
}

#[derive(Deserialize)]
struct RawGate {
    targets: Vec<usize>,
    matrix: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawCircuit {
    n: usize,
    gates: Vec<RawGate>,
    measured: Option<usize>,
}

/// Reads `{"n", "gates": [{"targets": [...], "matrix": [[re, im], ...]}],
/// "measured"}`; matrices are row-major and `measured` defaults to the
/// last qubit.
pub fn circuit_from_json(text: &str) -> Result<(Circuit, usize)> {
    let raw: RawCircuit = parse(text)?;
    let mut gates = Vec::with_capacity(raw.gates.len());
    for (i, g) in raw.gates.into_iter().enumerate() {
        let dim = 1usize << g.targets.len().min(30);
        let data = g.matrix.iter().map(|&[re, im]| C64::new(re, im)).collect();
        let m =
            Matrix::from_vec(dim, dim, data).map_err(|e| Error::format(format!("gates[{i}].matrix"), e.to_string()))?;
        gates.push(Gate::new(g.targets, m).map_err(|e| Error::format(format!("gates[{i}]"), e.to_string()))?);
    }
    let circuit = Circuit::new(raw.n, gates).map_err(|e| Error::format("gates", e.to_string()))?;
    let measured = raw.measured.unwrap_or(raw.n.saturating_sub(1));
    if measured >= raw.n {
        return Err(Error::format("measured", format!("qubit {measured} out of range")));
    }
    Ok((circuit, measured))
}

#[derive(Serialize)]
struct RawDelta<'a> {
    tree_edges: &'a [usize],
    cycle_edges: &'a [usize],
    orientation: &'a [(usize, usize)],
    cycles: &'a [Vec<(usize, i8)>],
    tree_vertices: &'a [VertexId],
    cycle_vertices: &'a [VertexId],
    mid_vertices: &'a [VertexId],
    tree_energy_vertices: &'a [VertexId],
    cycle_energy_vertices: &'a [VertexId],
    improved: bool,
    bubbling: &'a Bubbling,
}

/// Construction data of a difference-model network.
pub fn delta_sidecar_to_json(dn: &DeltaNetwork) -> Result<String> {
    to_json(&RawDelta {
        tree_edges: &dn.graph.tree_edges,
        cycle_edges: &dn.graph.cycle_edges,
        orientation: &dn.graph.orientation,
        cycles: &dn.graph.cycles,
        tree_vertices: &dn.ids.tree,
        cycle_vertices: &dn.ids.cycle,
        mid_vertices: &dn.ids.mid,
        tree_energy_vertices: &dn.ids.tree_energy,
        cycle_energy_vertices: &dn.ids.cycle_energy,
        improved: dn.improved,
        bubbling: &dn.bubbling,
    })
}
