use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillnet_core::evaluation::{mae, qwk, Grade};
use skillnet_testkit::oracle;

fn grades(ordinals: &[u8]) -> Vec<Grade> {
    ordinals.iter().map(|o| Grade::from_ordinal(*o).unwrap()).collect()
}

#[test]
fn matches_confusion_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let a: Vec<u8> = (0..50).map(|_| rng.gen_range(0..3)).collect();
        // Correlated but noisy second rater.
        let b: Vec<u8> = a
            .iter()
            .map(|x| if rng.gen_bool(0.6) { *x } else { rng.gen_range(0..3) })
            .collect();
        let (ga, gb) = (grades(&a), grades(&b));
        assert!((mae(&ga, &gb).unwrap() - oracle::mae(&a, &b)).abs() < 1e-12);
        assert!((qwk(&ga, &gb).unwrap() - oracle::qwk(&a, &b, 3)).abs() < 1e-12);
    }
}

#[test]
fn worked_example() {
    let a = grades(&[2, 2, 1, 0]);
    let b = grades(&[2, 1, 1, 0]);
    assert!((mae(&a, &b).unwrap() - 0.25).abs() < 1e-12);
    assert!((qwk(&a, &b).unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(qwk(&a, &a).unwrap(), 1.0);
}

#[test]
fn mismatched_or_empty_inputs_fail() {
    assert!(mae(&[], &[]).is_err());
    assert!(qwk(&grades(&[0]), &grades(&[0, 1])).is_err());
}

proptest! {
    #[test]
    fn metric_properties(pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..60)) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let (ga, gb) = (grades(&a), grades(&b));
        let m = mae(&ga, &gb).unwrap();
        prop_assert!((0.0..=2.0).contains(&m));
        prop_assert!((m - mae(&gb, &ga).unwrap()).abs() < 1e-12);
        let k = qwk(&ga, &gb).unwrap();
        prop_assert!(k <= 1.0 + 1e-12);
        prop_assert!((k - qwk(&gb, &ga).unwrap()).abs() < 1e-12);
        prop_assert!((k - oracle::qwk(&a, &b, 3)).abs() < 1e-12);
        prop_assert_eq!(qwk(&ga, &ga).unwrap(), 1.0);
    }
}
