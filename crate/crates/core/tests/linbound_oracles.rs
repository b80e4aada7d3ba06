use blocksense::boolfn::{SubsetMask, TruthTable};
use blocksense::linbound::{certify_bound, random_model, Head, KGramAveragingModel};
use proptest::prelude::*;

/// `f(x)` from the averaging formula, reading one window at a time.
fn reference_value(m: &KGramAveragingModel, signs: &[usize]) -> f64 {
    let mut z = m.bias();
    for i in 0..m.n - m.k {
        let mut w = 0;
        for j in (0..m.k).rev() {
            w = w * m.radix + signs[i + j];
        }
        let phi = m.feature(i, w);
        z += phi.iter().zip(m.weights()).map(|(a, b)| a * b).sum::<f64>() / m.n as f64;
    }
    match m.head() {
        Head::Identity => z,
        Head::Tanh => z.tanh(),
        Head::Logistic => 2.0 / (1.0 + (-z).exp()) - 1.0,
    }
}

fn table_of(m: &KGramAveragingModel) -> TruthTable {
    let values = (0..1usize << m.n)
        .map(|x| {
            let s: Vec<usize> = (0..m.n).map(|i| x >> i & 1).collect();
            reference_value(m, &s)
        })
        .collect();
    TruthTable::new_unbounded(m.n, values).unwrap()
}

#[test]
fn evaluation_matches_reference() {
    for (t, head) in Head::ALL.into_iter().enumerate() {
        let m = random_model(2, 3, 1.0, head, 6, 2, t as u64).unwrap();
        for x in 0..64usize {
            let s: Vec<usize> = (0..6).map(|i| x >> i & 1).collect();
            assert!((m.evaluate(&s).unwrap() - reference_value(&m, &s)).abs() < 1e-14);
        }
    }
}

#[test]
fn last_position_is_never_read() {
    let m = random_model(3, 2, 1.0, Head::Identity, 7, 2, 11).unwrap();
    let t = table_of(&m);
    for x in 0..t.len() {
        let mask = SubsetMask::new(1 << 6, 7).unwrap();
        assert_eq!(t.subset_variance(x, mask).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bound_and_block_bound_hold(k in 1usize..=3, extra in 1usize..=6, head in 0usize..3, seed in any::<u64>()) {
        let n = k + extra;
        let m = random_model(k, 3, 1.0, Head::ALL[head], n, 2, seed).unwrap();
        let t = table_of(&m);
        let slack = |b: f64| b * (1.0 + 1e-9) + 1e-12;
        for x in 0..t.len() {
            prop_assert!(t.block_sensitivity_exact(x).unwrap().value <= slack(m.bound()));
            for mask in 1u32..1 << n {
                let v = t.subset_variance(x, SubsetMask::new(mask, n).unwrap()).unwrap();
                prop_assert!(v <= slack(m.block_bound(mask.count_ones() as usize)));
            }
        }
        let cert = certify_bound(&m, seed).unwrap();
        prop_assert!(cert.passed && cert.exhaustive);
    }
}
