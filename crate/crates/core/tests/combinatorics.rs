use mvsao_core::combinatorics::{
    constant_c, count_flips, enumerate_matchings, matching_count, respects, uniform_matching,
    weighted_matching_sum,
};
use mvsao_core::{BinarySequence, FieldKind, Jump, Matching};
use proptest::prelude::*;

const KINDS: [FieldKind; 3] = [FieldKind::Real, FieldKind::Complex, FieldKind::Quaternion];

fn walk(list: &[(usize, usize)]) -> Vec<Jump> {
    list.iter().map(|&(a, b)| Jump::new(a - 1, b - 1)).collect()
}

fn pairing(n: usize, pairs: &[(usize, usize)]) -> Matching {
    Matching::from_one_based(n, pairs).unwrap()
}

#[test]
fn matching_enumeration_sizes() {
    assert_eq!(enumerate_matchings(0, 12).unwrap(), vec![Matching::empty()]);
    assert_eq!(enumerate_matchings(4, 12).unwrap().len(), 3);
    assert_eq!(enumerate_matchings(8, 12).unwrap().len(), 105);
    assert_eq!(matching_count(10), 945);
    assert!(enumerate_matchings(3, 12).is_err());
}

#[test]
fn walk_one_and_four() {
    let j = walk(&[(1, 2), (2, 3), (3, 1), (1, 2), (2, 3), (3, 1)]);
    let p = pairing(6, &[(1, 4), (2, 5), (3, 6)]);
    assert_eq!(constant_c(FieldKind::Real, &j, &p), 1.0);
    assert_eq!(constant_c(FieldKind::Complex, &j, &p), 0.0);
    // four admissible sequences, each with an odd number of flips
    assert_eq!(constant_c(FieldKind::Quaternion, &j, &p), -0.5);
}

#[test]
fn walk_two() {
    let j = walk(&[(1, 2), (2, 1), (1, 3), (3, 1), (1, 2), (2, 1)]);
    let p = pairing(6, &[(1, 6), (2, 5), (3, 4)]);
    assert_eq!(constant_c(FieldKind::Real, &j, &p), 1.0);
    assert_eq!(constant_c(FieldKind::Complex, &j, &p), 1.0);
    assert_ne!(constant_c(FieldKind::Quaternion, &j, &p), 0.0);
}

#[test]
fn binary_sequence_figures() {
    let p = pairing(6, &[(1, 6), (2, 3), (4, 5)]);
    let non = walk(&[(1, 2), (2, 1), (1, 2), (2, 3), (3, 2), (2, 1)]);
    assert!(!respects(&BinarySequence(vec![0, 1, 1, 0, 0, 1, 0]), &p, &non));

    let one = walk(&[(1, 2), (2, 3), (3, 2), (1, 3), (3, 1), (1, 2)]);
    let m = BinarySequence(vec![0, 1, 1, 1, 1, 1, 0]);
    assert!(respects(&m, &p, &one));
    assert_eq!(count_flips(&m, &p, &one), 1);

    let two = walk(&[(1, 2), (2, 3), (3, 1), (1, 3), (1, 2), (2, 3), (3, 1), (3, 1)]);
    let p8 = pairing(8, &[(1, 5), (2, 6), (3, 7), (4, 8)]);
    let m = BinarySequence(vec![0, 1, 0, 0, 1, 0, 1, 1, 0]);
    assert!(respects(&m, &p8, &two));
    assert_eq!(count_flips(&m, &p8, &two), 2);
}

#[test]
fn two_jump_cases() {
    let p = pairing(2, &[(1, 2)]);
    let rev = walk(&[(1, 2), (2, 1)]);
    let same = walk(&[(1, 2), (1, 2)]);
    assert!(respects(&BinarySequence(vec![0, 0, 0]), &p, &rev));
    assert_eq!(count_flips(&BinarySequence(vec![0, 0, 0]), &p, &rev), 0);
    assert_eq!(count_flips(&BinarySequence(vec![0, 1, 0]), &p, &same), 1);
    assert_eq!(constant_c(FieldKind::Quaternion, &same, &p), -0.5);
    assert_eq!(constant_c(FieldKind::Quaternion, &rev, &p), 1.0);
}

fn random_instance() -> impl Strategy<Value = (Vec<Jump>, Matching)> {
    (1usize..=5, 2usize..=4, any::<u64>()).prop_map(|(half, r, seed)| {
        let mut rng = mvsao_core::rng::stream(seed, 0);
        let n = 2 * half;
        let jumps = (0..n)
            .map(|_| {
                use rand::Rng;
                let a = rng.random_range(0..r);
                let b = (a + rng.random_range(1..r)) % r;
                Jump::new(a, b)
            })
            .collect();
        (jumps, uniform_matching(n, &mut rng))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn constant_is_bounded((jumps, p) in random_instance()) {
        for kind in KINDS {
            prop_assert!(constant_c(kind, &jumps, &p).abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn tensorization((j1, p1) in random_instance(), (j2, p2) in random_instance()) {
        let mut j = j1.clone();
        j.extend_from_slice(&j2);
        let p = p1.concat(&p2);
        for kind in KINDS {
            let lhs = constant_c(kind, &j, &p);
            let rhs = constant_c(kind, &j1, &p1) * constant_c(kind, &j2, &p2);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_pairs_never_flip((jumps, p) in random_instance()) {
        let mut j = jumps.clone();
        for &(a, b) in p.pairs() {
            j[b] = j[a].reversed();
        }
        for m in BinarySequence::all_with_ends(j.len(), 0, 0) {
            prop_assert_eq!(count_flips(&m, &p, &j), 0);
        }
    }

    #[test]
    fn weighted_sum_matches_enumeration((jumps, _) in random_instance()) {
        for kind in KINDS {
            let w = |a: usize, b: usize| 1.0 + 0.1 * (a + 2 * b) as f64;
            let fast = weighted_matching_sum(kind, &jumps, &mut |a, b| w(a, b));
            let slow: f64 = enumerate_matchings(jumps.len(), 12)
                .unwrap()
                .iter()
                .map(|p| constant_c(kind, &jumps, p) * p.pairs().iter().map(|&(a, b)| w(a, b)).product::<f64>())
                .sum();
            prop_assert!((fast - slow).abs() < 1e-9 * slow.abs().max(1.0));
        }
    }
}
