use hera_core::{
    account_hera, compute_errors, decode_artifact, encode_artifact, generate_truncated_normal,
    hera_dequantize, hera_quantize, hera_transform, pq_dequantize, pq_quantize, Artifact,
    DenseMatrix, Matrix, Matrix64, PqConfig, TruncNormalSpec,
};
use proptest::prelude::*;

fn tn(rows: usize, cols: usize, seed: u64) -> Matrix {
    generate_truncated_normal(&TruncNormalSpec::standard(seed), rows, cols).unwrap()
}

#[test]
fn reordering_beats_plain_pq_at_equal_codebook_size() {
    let m = tn(512, 32, 1);
    let cfg = PqConfig::new(4, 8, 0);
    let pq = compute_errors(&m, &pq_dequantize(&pq_quantize(&m, &cfg).unwrap()).unwrap()).unwrap();
    let mut prev = pq.mse;
    for levels in 1..=3 {
        let h = hera_quantize(&m, levels, &cfg).unwrap();
        let e = compute_errors(&m, &hera_dequantize(&h).unwrap()).unwrap();
        assert!(e.mse < prev, "levels {levels}: {} vs {prev}", e.mse);
        prev = e.mse;
    }
}

#[test]
fn f64_elements_work_end_to_end() {
    let m: Matrix64 = generate_truncated_normal(&TruncNormalSpec::standard(2), 64, 8).unwrap();
    let h = hera_quantize(&m, 2, &PqConfig::new(2, 4, 0)).unwrap();
    let a: Artifact<f64> = h.clone().into();
    let (bytes, file) = encode_artifact(&a).unwrap();
    // Codebook entries are 64 bits wide here.
    assert_eq!(file.codebook_bits, 4 * 4 * 8 * 64);
    let back: Artifact<f64> = decode_artifact(&bytes).unwrap();
    assert!(back.dequantize().unwrap().bit_eq(&hera_dequantize(&h).unwrap()));
}

#[test]
fn transform_tree_shape() {
    let m = tn(64, 4, 3);
    let (leaves, tree) = hera_transform(&m, 3).unwrap();
    assert_eq!(leaves.len(), 8);
    assert!(leaves.iter().all(|l| l.shape() == (8, 4)));
    for (t, maps) in tree.levels().iter().enumerate() {
        assert_eq!(maps.len(), 1 << t);
        assert!(maps.iter().all(|fm| fm.level == t + 1 && fm.bits.pairs() == 64 >> (t + 1)));
    }
    // The small-small-small leaf holds each column's octet minima.
    for j in 0..4 {
        for i in 0..8 {
            let min = (0..8).map(|r| m.get(8 * i + r, j)).fold(f32::INFINITY, f32::min);
            assert_eq!(leaves[0].get(i, j), min);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialization_preserves_dequantization(
        pairs_log in 3usize..6,
        m_idx in 0usize..3,
        levels in 0usize..3,
        ks in 1usize..6,
        seed in any::<u64>(),
    ) {
        let n = 1 << pairs_log;
        let m = [1, 2, 4][m_idx];
        let d = 8;
        let ks = ks.min(n >> levels);
        let data = tn(n, d, seed);
        let a: Artifact<f32> = hera_quantize(&data, levels, &PqConfig::new(m, ks, seed)).unwrap().into();
        let (bytes, file) = encode_artifact(&a).unwrap();
        let budget = account_hera(n, d, m, ks, levels).unwrap();
        prop_assert_eq!(file.payload_bits(), budget.total_bits);
        let back: Artifact<f32> = decode_artifact(&bytes).unwrap();
        prop_assert!(back.dequantize().unwrap().bit_eq(&a.dequantize().unwrap()));
    }

    #[test]
    fn quantization_never_leaves_the_data_range(seed in any::<u64>()) {
        let data = tn(64, 8, seed);
        let out = hera_dequantize(&hera_quantize(&data, 2, &PqConfig::new(4, 3, seed)).unwrap()).unwrap();
        let (lo, hi) = data.data().iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        prop_assert_eq!(DenseMatrix::shape(&out), data.shape());
    }
}
