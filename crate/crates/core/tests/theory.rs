use fmapkit_core::mesh::build_laplacian;
use fmapkit_core::spectral::compute_basis;
use fmapkit_core::theory::{
    check_lemma_distinct_control, check_lemma_repeated_rows, check_theorem_span_violation, check_theorem_with_basis,
    check_theorem_with_permutation, count_minimizers,
};
use fmapkit_core::{shapes, Mat};

#[test]
fn duplicated_rows_always_tie() {
    for seed in 0..20 {
        for (n_x, n_y) in [(3, 1), (4, 2), (6, 3), (8, 8)] {
            let r = check_lemma_repeated_rows(n_x, n_y, 3, seed).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }
}

#[test]
fn distinct_controls_are_unique() {
    for seed in 0..20 {
        let r = check_lemma_distinct_control(6, 4, 3, seed).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn exhaustive_count_of_two_copies() {
    // rows {a, a, b}, query [a]
    let f_x = Mat::from_vec(3, 1, vec![2.0, 2.0, -1.0]);
    let r = count_minimizers(&f_x, &Mat::from_vec(1, 1, vec![2.0])).unwrap();
    assert_eq!(r.count, 2);
}

#[test]
fn theorem_holds_on_all_small_sizes() {
    let mesh = shapes::bumpy_torus();
    let basis = compute_basis(&build_laplacian(&mesh).unwrap(), 10).unwrap();
    for k in 2..=10 {
        for c in [k, k + 3] {
            for seed in 0..3 {
                let r = check_theorem_with_basis(&basis, k, c, seed).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }
}

#[test]
fn identity_relabeling_gives_identity_map() {
    let mesh = shapes::blob();
    let basis = compute_basis(&build_laplacian(&mesh).unwrap(), 5).unwrap();
    let identity: Vec<usize> = (0..mesh.n()).collect();
    let r = check_theorem_with_permutation(&basis, 5, 8, 1, &identity).unwrap();
    assert!(r.passed);
    assert!(r.min_singular_value > 0.0);
}

#[test]
fn span_violation_is_reported() {
    let mesh = shapes::blob();
    let basis = compute_basis(&build_laplacian(&mesh).unwrap(), 11).unwrap();
    for seed in 0..5 {
        let r = check_theorem_span_violation(&basis, 10, 12, seed, 0.1).unwrap();
        assert!(!r.passed);
        assert!(r.fmap_gap > 1e-4, "{r:?}");
    }
}
