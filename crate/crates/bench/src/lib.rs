//! Fixture networks shared by the criterion benches.

use tensornet::statmech::{build_general, coupling_ising, plane_sweep_bubbling, Graph, ModelSpec};
use tensornet::{Bubbling, Matrix, TensorNetwork, C64};

/// Ising model on a `rows x cols` grid with its corner-to-corner sweep.
pub fn ising_grid(rows: usize, cols: usize, beta: f64) -> (TensorNetwork, Bubbling) {
    let graph = Graph::grid(rows, cols);
    let heights: Vec<f64> = (0..rows * cols)
        .map(|v| ((v / cols) + (v % cols)) as f64 + 1e-3 * (v % cols) as f64)
        .collect();
    let spec = ModelSpec::uniform(graph.clone(), 2, C64::new(beta, 0.0), coupling_ising(1.0));
    let net = build_general(&spec).expect("grid spec is valid");
    let order = plane_sweep_bubbling(&graph, &[], &heights)
        .expect("distinct heights")
        .bubbling;
    (net, order)
}

/// A deterministic dense complex matrix.
pub fn dense_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |r, c| {
        let x = (r * 31 + c * 17) as f64;
        C64::new(x.sin(), (0.5 * x).cos())
    })
}
