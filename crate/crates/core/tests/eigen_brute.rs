mod common;

use common::*;
use hdsel::eigen::{
    cbar, certified_re_lower_bound, re_lower_bound, re_sampled, sparse_eig_profile,
    sparse_eigs_exact, sparse_eigs_from_gram, sparse_eigs_sampled,
};
use hdsel::model::Support;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn jacobi_agrees_with_nalgebra() {
    let mut r = rng(3);
    for k in 1..7 {
        let a = gaussian_matrix(&mut r, k + 3, k);
        let g = a.transpose() * &a;
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| g[(i, j)]).collect())
            .collect();
        let mut na: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
        na.sort_by(f64::total_cmp);
        for (a, b) in jacobi_eigenvalues(&rows).iter().zip(&na) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn exact_eigs_match_brute_force_over_every_subset() {
    let mut r = rng(11);
    for case in 0..40 {
        let p = 4 + case % 6;
        let n = 6 + case % 13;
        let ds = correlated_dataset(&mut r, n, p);
        let s = case % 3;
        let t = random_support(&mut r, p, s);
        let g = gram_rows(ds.x());
        for m in 0..=p - s {
            if s == 0 && m == 0 {
                continue;
            }
            let rep = sparse_eigs_exact(&ds, &t, m).unwrap();
            let (lo, hi) = brute_sparse_extremes(&g, t.as_slice(), m);
            assert!(
                (rep.kappa_m - lo.max(0.0).sqrt()).abs() < 1e-7,
                "case {case} m {m}"
            );
            assert!(
                (rep.phi_m - hi).abs() < 1e-9 * hi.max(1.0),
                "case {case} m {m}"
            );
            assert!(rep.exact);
        }
    }
}

#[test]
fn profile_is_monotone() {
    let mut r = rng(12);
    let ds = correlated_dataset(&mut r, 30, 9);
    let t = Support::new([2, 5]);
    let prof = sparse_eig_profile(&ds, &t, 0, 7).unwrap();
    for w in prof.windows(2) {
        assert!(w[1].kappa_m <= w[0].kappa_m + 1e-12);
        assert!(w[1].phi_m >= w[0].phi_m - 1e-12);
        assert!(w[1].mu_m >= w[0].mu_m - 1e-12);
    }
}

#[test]
fn sampled_estimates_are_inside_exact_values() {
    let mut r = rng(13);
    let ds = correlated_dataset(&mut r, 25, 12);
    let t = Support::new([0, 7]);
    for m in 1..4 {
        let exact = sparse_eigs_exact(&ds, &t, m).unwrap();
        let samp = sparse_eigs_sampled(&ds, &t, m, 300, 5).unwrap();
        assert!(!samp.exact);
        assert!(samp.kappa_m >= exact.kappa_m - 1e-12);
        assert!(samp.phi_m <= exact.phi_m + 1e-12);
    }
}

/// `phi(ceil(l k)) <= ceil(l) phi(k)` for `l >= 1`, with `phi` restricted to
/// supports containing T as in the sparse-eigenvalue definition.
#[test]
fn sublinearity_of_phi() {
    let mut r = rng(14);
    for case in 0..30 {
        let p = 8 + case % 4;
        let ds = correlated_dataset(&mut r, 10 + case, p);
        let t = random_support(&mut r, p, case % 3);
        let g = gram_rows(ds.x());
        for &k in &[1usize, 2] {
            let phi_k = brute_sparse_extremes(&g, t.as_slice(), k).1;
            for &l in &[1.5f64, 2.0, 3.0] {
                let big = ((l * k as f64).ceil() as usize).min(p - t.len());
                let phi_big = brute_sparse_extremes(&g, t.as_slice(), big).1;
                assert!(
                    phi_big <= l.ceil() * phi_k + 1e-10,
                    "case {case} k {k} l {l}"
                );
            }
        }
    }
}

#[test]
fn certified_re_bound_is_below_sampled_cone_minimum() {
    let mut r = rng(15);
    for case in 0..10 {
        let p = 6 + case % 4;
        let ds = correlated_dataset(&mut r, 40, p);
        let t = random_support(&mut r, p, 1 + case % 2);
        let cb = cbar(3.0).unwrap();
        let (lower, m) = certified_re_lower_bound(&ds, &t, cb).unwrap();
        let upper = re_sampled(&ds, &t, cb, 4000, case as u64).unwrap();
        assert!(lower <= upper + 1e-12, "case {case}: {lower} > {upper}");
        assert!(m >= 1 && m <= p - t.len());
        // The certificate is at least the whole-design smallest singular value.
        let g = gram_rows(ds.x());
        let min_ev = jacobi_eigenvalues(&g)[0].max(0.0).sqrt();
        assert!(lower >= min_ev - 1e-9);
    }
}

#[test]
fn re_lower_bound_vanishes_for_small_m() {
    let mut r = rng(16);
    let ds = correlated_dataset(&mut r, 30, 6);
    let t = Support::new([0, 1]);
    let rep = sparse_eigs_exact(&ds, &t, 1).unwrap();
    // mu >= 1, so with c_bar = 21 and s/m = 2 the factor is negative.
    assert_eq!(re_lower_bound(&rep, 2, 21.0, 1), 0.0);
}

#[test]
fn errors_on_empty_index_set_and_bad_support() {
    let g = DMatrix::<f64>::identity(3, 3);
    assert!(sparse_eigs_from_gram(&g, &Support::empty(), 0).is_err());
    assert!(sparse_eigs_from_gram(&g, &Support::new([5]), 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kappa_below_phi_and_mu_at_least_one(seed in 0u64..5000, m in 1usize..4) {
        let mut r = rng(seed);
        let ds = correlated_dataset(&mut r, 12, 7);
        let rep = sparse_eigs_exact(&ds, &Support::new([3]), m).unwrap();
        prop_assert!(rep.kappa_m * rep.kappa_m <= rep.phi_m + 1e-12);
        prop_assert!(rep.mu_m >= 1.0 - 1e-12);
        // Diagonal entries are 1, so phi >= 1 >= kappa^2.
        prop_assert!(rep.phi_m >= 1.0 - 1e-12);
    }
}
