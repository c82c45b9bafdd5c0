//! Random generators and comparison helpers shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tensornet::circuits::{Circuit, Gate};
use tensornet::statmech::Graph;
use tensornet::{Matrix, NetworkBuilder, Tensor, TensorNetwork, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| random_c64(rng))
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

/// A connected network on `2..=max_vertices` vertices with every degree in
/// `1..=max_degree`, no self-loops and random complex entries.
pub fn random_network(rng: &mut ChaCha8Rng, q: usize, max_vertices: usize, max_degree: usize) -> TensorNetwork {
    let n = rng.random_range(2..=max_vertices);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for v in 1..n {
        let candidates: Vec<usize> = (0..v).filter(|&u| degree[u] < max_degree).collect();
        let u = *candidates
            .choose(rng)
            .expect("a tree always has a free vertex when max_degree >= 2");
        edges.push((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    for _ in 0..rng.random_range(0..=n) {
        let free: Vec<usize> = (0..n).filter(|&v| degree[v] < max_degree).collect();
        if free.len() < 2 {
            break;
        }
        let pair: Vec<usize> = free.choose_multiple(rng, 2).copied().collect();
        edges.push((pair[0], pair[1]));
        degree[pair[0]] += 1;
        degree[pair[1]] += 1;
    }
    let mut b = NetworkBuilder::new(q);
    for &(u, v) in &edges {
        b.link(u, v);
    }
    for (v, &d) in degree.iter().enumerate() {
        let entries = (0..q.pow(d as u32)).map(|_| random_c64(rng)).collect();
        b.set_tensor(v, Tensor::new(q, d, entries).unwrap());
    }
    b.build().unwrap()
}

/// Haar-ish random unitary by Gram-Schmidt on a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = random_matrix(rng, n, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v = a.column(c);
        for u in &cols {
            let dot: C64 = u.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    Matrix::from_fn(n, n, |r, c| cols[c][r])
}

/// A random circuit of one- and two-qubit gates.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, depth: usize, unitary: bool) -> Circuit {
    let gates = (0..depth)
        .map(|_| {
            let k = if n >= 2 && rng.random_bool(0.5) { 2 } else { 1 };
            let targets: Vec<usize> = (0..n).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
            let m = if unitary {
                random_unitary(rng, 1 << k)
            } else {
                random_matrix(rng, 1 << k, 1 << k)
            };
            Gate::new(targets, m).unwrap()
        })
        .collect();
    Circuit::new(n, gates).unwrap()
}

/// A connected simple graph on `n` vertices.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for u in 0..n {
        for v in u + 1..n {
            if !edges.contains(&(u, v)) && rng.random_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// The graph of four vertices and five edges with two independent cycles.
pub fn kite() -> Graph {
    Graph::new(4, vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap()
}
