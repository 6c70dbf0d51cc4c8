use std::collections::BTreeSet;

use endpointbench_core::stats::{average_ranks, nearest_rank_sorted, percentile, spearman, topk_overlap};
use proptest::prelude::*;
use proptest::strategy::Just;

fn permutation(n: usize) -> impl Strategy<Value = Vec<u32>> {
    Just((0..n as u32).collect::<Vec<_>>()).prop_shuffle()
}

fn two_permutations() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, usize)> {
    (1usize..40).prop_flat_map(|n| (permutation(n), permutation(n), 0..=n))
}

fn as_f64(v: &[u32]) -> Vec<f64> {
    v.iter().map(|x| f64::from(*x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spearman_identity_and_reverse(r in (2usize..60).prop_flat_map(permutation)) {
        // Rank of each item under the ranking `r` and under its reversal.
        let n = r.len();
        let mut fwd = vec![0.0; n];
        let mut rev = vec![0.0; n];
        for (pos, item) in r.iter().enumerate() {
            fwd[*item as usize] = pos as f64;
            rev[*item as usize] = (n - 1 - pos) as f64;
        }
        prop_assert!((spearman(&fwd, &fwd).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((spearman(&fwd, &rev).unwrap() + 1.0).abs() < 1e-12);
        let a = as_f64(&r);
        prop_assert!((spearman(&a, &fwd).unwrap() - spearman(&fwd, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn spearman_bounded_and_symmetric(a in prop::collection::vec(-5i32..5, 2..30), seed in any::<u64>()) {
        let x: Vec<f64> = a.iter().map(|v| f64::from(*v)).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * ((seed >> (i % 64)) & 1) as f64 - i as f64).collect();
        let r = spearman(&x, &y).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        prop_assert!((r - spearman(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_sum(v in prop::collection::vec(0u8..6, 1..50)) {
        let x: Vec<f64> = v.iter().map(|b| f64::from(*b)).collect();
        let n = x.len() as f64;
        let total: f64 = average_ranks(&x).iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn topk_matches_brute_force((a, b, k) in two_permutations()) {
        let want = {
            let ta: BTreeSet<u32> = a[..k].iter().copied().collect();
            let tb: BTreeSet<u32> = b[..k].iter().copied().collect();
            ta.intersection(&tb).count()
        };
        prop_assert_eq!(topk_overlap(&a, &b, k).unwrap(), want);
        prop_assert_eq!(topk_overlap(&a, &a, k).unwrap(), k);
        prop_assert_eq!(topk_overlap(&b, &a, k).unwrap(), want);
    }

    #[test]
    fn percentiles_are_monotone(v in prop::collection::vec(-1e3f64..1e3, 1..200), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(percentile(&v, lo).unwrap() <= percentile(&v, hi).unwrap());
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        let got = nearest_rank_sorted(&s, hi).unwrap();
        prop_assert!(s.contains(&got));
    }
}

#[test]
fn thousand_random_ranking_pairs() {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for trial in 0..1000 {
        let n = 10 + trial % 31;
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let k = trial % (n + 1);
        let brute = a[..k].iter().filter(|x| b[..k].contains(x)).count();
        assert_eq!(topk_overlap(&a, &b, k).unwrap(), brute);
    }
}

#[test]
fn disjoint_halves_and_constructed_four() {
    let a: Vec<u32> = (0..20).collect();
    let b: Vec<u32> = (10..20).chain(0..10).collect();
    assert_eq!(topk_overlap(&a, &b, 10).unwrap(), 0);
    let c: Vec<u32> = [0, 1, 2, 3].into_iter().chain(10..16).chain(4..10).chain(16..20).collect();
    assert_eq!(topk_overlap(&a, &c, 10).unwrap(), 4);
}
