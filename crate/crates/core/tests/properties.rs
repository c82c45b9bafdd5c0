mod common;

use proptest::prelude::*;
use tensornet::format::{network_from_json, network_to_json};
use tensornet::network::reduce_degrees;
use tensornet::unitarize::{embed_rect, embed_square};
use tensornet::{eval_contract, eval_labeling_sum, greedy_bubbling, operator_norm, scale, Bubbling, Matrix, C64};

use common::{close, random_c64, random_matrix, random_network, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_matches_labeling_sum(seed in any::<u64>(), q in 2usize..=3) {
        let mut r = rng(seed);
        let net = random_network(&mut r, q, 6, 3);
        let brute = eval_labeling_sum(&net).unwrap();
        let mut order: Vec<usize> = net.vertex_ids().collect();
        order.reverse();
        for b in [greedy_bubbling(&net), Bubbling::new(order)] {
            prop_assert!(close(eval_contract(&net, &b).unwrap(), brute, 1e-9));
        }
    }

    #[test]
    fn scale_bounds_the_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 2, 6, 3);
        let report = scale(&net, &greedy_bubbling(&net)).unwrap();
        let value = eval_labeling_sum(&net).unwrap();
        prop_assert!(value.norm() <= report.delta * (1.0 + 1e-9));
    }

    #[test]
    fn square_embedding_is_unitary_with_exact_block(seed in any::<u64>(), n in 1usize..=12) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n);
        let s = embed_square(&a).unwrap();
        let u = &s.u;
        prop_assert!(u.adjoint().matmul(u).max_abs_diff(&Matrix::identity(2 * n)) <= 1e-10);
        let norm = operator_norm(&a).unwrap();
        prop_assert!((s.source_norm - norm).abs() <= 1e-10 * norm);
        prop_assert!(s.ancilla_zero_block().max_abs_diff(&a.scale(C64::new(1.0 / norm, 0.0))) <= 1e-10);

        // Applying U to |alpha>|0> and keeping ancilla 0 gives A|alpha> / ||A||.
        let alpha: Vec<C64> = (0..n).map(|_| random_c64(&mut r)).collect();
        let mut lifted = vec![C64::new(0.0, 0.0); 2 * n];
        for (i, &x) in alpha.iter().enumerate() {
            lifted[2 * i] = x;
        }
        let out = u.apply(&lifted);
        let expected = a.apply(&alpha);
        for i in 0..n {
            prop_assert!((out[2 * i] - expected[i] / norm).norm() <= 1e-9);
        }

        let scaled = embed_square(&a.scale(C64::new(3.5, 0.0))).unwrap();
        prop_assert!(scaled.u.max_abs_diff(u) <= 1e-9);
    }

    #[test]
    fn rectangular_embedding_keeps_the_norm(seed in any::<u64>(), k in 0u32..=3, l in 0u32..=3) {
        prop_assume!(k + l > 0);
        let mut r = rng(seed);
        let a = random_matrix(&mut r, 2usize.pow(l), 2usize.pow(k));
        let s = embed_rect(&a, 2).unwrap();
        let dim = s.u.rows();
        prop_assert!(s.u.adjoint().matmul(&s.u).max_abs_diff(&Matrix::identity(dim)) <= 1e-10);
        prop_assert!((s.source_norm - operator_norm(&a).unwrap()).abs() <= 1e-10 * s.source_norm);
    }

    #[test]
    fn degree_reduction_preserves_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 2, 5, 3);
        let reduced = reduce_degrees(&net, 3).unwrap();
        prop_assert!(close(eval_labeling_sum(&reduced).unwrap(), eval_labeling_sum(&net).unwrap(), 1e-9));
    }

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 3, 5, 3);
        let text = network_to_json(&net).unwrap();
        let back = network_from_json(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(network_to_json(&back).unwrap(), text);
    }
}
