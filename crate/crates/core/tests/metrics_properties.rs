use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salmix_core::metrics::{icl, labels_from_table, rand_and_ari};

fn partition(max_label: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..max_label, 2..80)
}

proptest! {
    #[test]
    fn ari_is_symmetric_and_bounded(a in partition(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = a.clone();
        b.shuffle(&mut rng);
        let (r1, ari1) = rand_and_ari(&a, &b).unwrap();
        let (r2, ari2) = rand_and_ari(&b, &a).unwrap();
        prop_assert!((r1 - r2).abs() < 1e-12 && (ari1 - ari2).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r1));
        prop_assert!(ari1 <= 1.0 + 1e-12);
    }

    #[test]
    fn ari_ignores_label_names(a in partition(4), b in partition(4), perm in Just([3usize, 0, 2, 1])) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        prop_assume!(n >= 2);
        let renamed: Vec<usize> = b.iter().map(|&l| perm[l] + 10).collect();
        let x = rand_and_ari(a, b).unwrap();
        let y = rand_and_ari(a, &renamed).unwrap();
        prop_assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
    }

    #[test]
    fn icl_never_exceeds_bic(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..40), ll in -1e4f64..0.0) {
        let n = rows.len();
        let tau = DMatrix::from_fn(n, 3, |i, j| rows[i][j] / rows[i].iter().sum::<f64>());
        let s = icl(ll, 7, &tau, None);
        prop_assert!(s.entropy_term <= 0.0);
        prop_assert!(s.icl <= s.bic);
        prop_assert!((s.icl - s.bic - s.entropy_term).abs() < 1e-9);
    }
}

#[test]
fn shuffled_partitions_have_near_zero_ari() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a: Vec<usize> = (0..500).map(|i| i % 3).collect();
    let mut total = 0.0;
    for _ in 0..200 {
        let mut b = a.clone();
        b.shuffle(&mut rng);
        total += rand_and_ari(&a, &b).unwrap().1;
    }
    let mean = total / 200.0;
    assert!(mean.abs() < 0.05, "{mean}");
}

#[test]
fn yeast_confusion_tables() {
    // Two-group SAL table: CYT {448, 15}, ME3 {14, 149}.
    let (t, p) = labels_from_table(&[&[448, 15], &[14, 149]]);
    let (_, ari) = rand_and_ari(&t, &p).unwrap();
    assert!((ari - 0.81).abs() < 0.01, "{ari}");
    // Two-group Gaussian table: CYT {106, 357}, ME3 {1, 162}.
    let (t, p) = labels_from_table(&[&[106, 357], &[1, 162]]);
    let (_, ari) = rand_and_ari(&t, &p).unwrap();
    assert!((ari + 0.088).abs() < 0.005, "{ari}");
}

#[test]
fn hand_pair_count_oracle() {
    // Independent pair enumeration.
    let a = [0, 0, 1, 1, 1, 2, 2, 0, 1];
    let b = [1, 1, 1, 0, 0, 2, 2, 2, 0];
    let n = a.len();
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    let (rand, _) = rand_and_ari(&a, &b).unwrap();
    assert!((rand - agree as f64 / total as f64).abs() < 1e-15);
}
