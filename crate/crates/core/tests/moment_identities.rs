use dualdet::markov::{AsepParams, QtasepParams};
use dualdet::moments::{self, PartitionVariant, QuadOptions};
use num_complex::Complex64 as C64;

#[test]
fn qtasep_partition_sum_matches_nested() {
    let p = QtasepParams::new(0.5, vec![1.0, 1.2]).unwrap();
    let n = 2;
    let t = 0.5;
    let contour = moments::qtasep_single_contour(p.q, &[1.0, 1.2]).unwrap();
    for k in 1..=3 {
        let nested = moments::qtasep_moment(&vec![n; k], t, &p, 0.0, QuadOptions::default()).unwrap();
        let f = |z: C64| moments::qtasep_factor(&p, n, t, z);
        let part = moments::mu_k_partition_sum(f, &contour, k, p.q, PartitionVariant::Qtasep, QuadOptions::default()).unwrap();
        assert!((nested.value - part.value).norm() < 1e-8);
    }
}

#[test]
fn asep_partition_sum_matches_nested() {
    let p = AsepParams::from_tau(0.4).unwrap();
    let (x, t) = (1, 0.8);
    for rho in [1.0, 0.5] {
        let theta = moments::theta_of(rho).unwrap();
        let contour = moments::asep_single_contour(p.tau(), theta);
        for k in 1..=3 {
            let nested = moments::asep_moment_nested(k, x, t, &p, rho, QuadOptions::default()).unwrap();
            let f = |z: C64| moments::asep_f2(&p, theta, x, t, z);
            let part = moments::mu_k_partition_sum(f, &contour, k, p.tau(), PartitionVariant::Asep, QuadOptions::default()).unwrap();
            assert!((nested.value - part.value).norm() < 1e-8);
        }
    }
}

#[test]
fn generating_determinant_matches_partition_sums() {
    let p = QtasepParams::homogeneous(0.5, 2).unwrap();
    let (n, t) = (2, 0.5);
    let contour = moments::qtasep_single_contour(p.q, &[1.0]).unwrap();
    let f = |z: C64| moments::qtasep_factor(&p, n, t, z);
    let gen = moments::mu_k_generating(f, &contour, 3, p.q, PartitionVariant::Qtasep, 48).unwrap();
    for k in 1..=3 {
        let part = moments::mu_k_partition_sum(f, &contour, k, p.q, PartitionVariant::Qtasep, QuadOptions::default()).unwrap();
        assert!((gen[k - 1] - part.value).norm() < 1e-8);
    }
}

#[test]
fn mu_tilde_relations() {
    let a = [1.0, 1.2];
    let q = 0.5;
    let f = |z: C64| a.iter().map(|&am| am / (am - z)).product::<C64>() * (0.3 * z).exp();
    for k in 1..=3 {
        let r = moments::mu_tilde_relation_check(f, q, &a, k, QuadOptions::default()).unwrap();
        assert!(r.relation_residual < 1e-9);
        assert!(r.symmetrized_residual < 1e-8);
    }
}

#[test]
fn mu_tilde_one_picks_up_residue_at_zero() {
    let a = [1.0];
    let f = |z: C64| 1.0 / (1.0 - z);
    let r = moments::mu_tilde_relation_check(f, 0.5, &a, 1, QuadOptions::default()).unwrap();
    let p = QtasepParams::homogeneous(0.5, 1).unwrap();
    let contours = moments::build_qtasep_nested_contours(1, p.q, &a, 0.0, Default::default()).unwrap();
    let mu1 = moments::nested_quadrature(&contours, |_, z| f(z) / z, |_, _| C64::new(1.0, 0.0), QuadOptions::default()).unwrap();
    // μ_1 carries a (−1)^1 prefactor
    assert!((r.mu_tilde_nested + mu1.value + 1.0).norm() < 1e-12);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn asep_moments_decrease_in_n(tau in 0.2f64..0.7, x in -1i64..3, t in 0.05f64..1.5, rho in 0.3f64..=1.0) {
            let p = AsepParams::from_tau(tau).unwrap();
            let v = moments::asep_moment_decomposed(4, x, t, &p, rho, 64).unwrap();
            let mut prev = 1.0 + 1e-9;
            for m in &v[1..] {
                prop_assert!(m.value.im.abs() < 1e-8);
                prop_assert!(m.value.re > 0.0 && m.value.re <= prev + 1e-9);
                prev = m.value.re;
            }
        }

        #[test]
        fn qtasep_moment_independent_of_contour_spacing(eta in 0.1f64..0.3, q in 0.3f64..0.7, t in 0.1f64..1.0) {
            let p = QtasepParams::homogeneous(q, 2).unwrap();
            let a = [1.0, 1.0];
            let pair = |za: C64, zb: C64| (za - zb) / (za - q * zb);
            let single = |_: usize, z: C64| moments::qtasep_factor(&p, 2, t, z) / z;
            let opts = moments::QtasepContourOptions { eta: Some(eta), ..Default::default() };
            let c = moments::build_qtasep_nested_contours(2, q, &a, 0.0, opts).unwrap();
            let v = moments::nested_quadrature(&c, single, pair, QuadOptions::default()).unwrap().value * q;
            let reference = moments::qtasep_moment(&[2, 2], t, &p, 0.0, QuadOptions::default()).unwrap().value;
            prop_assert!((v - reference).norm() < 1e-9, "{v} vs {reference}");
        }
    }
}
