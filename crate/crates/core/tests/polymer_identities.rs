use dualdet::fredholm::DetOptions;
use dualdet::markov::{self, mean_se};
use dualdet::polymer;
use num_complex::Complex64 as C64;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[test]
fn first_moment_is_a_poisson_weight() {
    for tau in [0.3, 1.0, 2.5] {
        for n in 1..=5 {
            let v = polymer::she_moment(&[n], tau, 1.0).unwrap();
            let exact = (-tau as f64).exp() * tau.powi(n as i32 - 1) / factorial(n - 1);
            assert!((v.value.re - exact).abs() < 1e-10, "tau = {tau}, n = {n}");
        }
    }
}

#[test]
fn first_site_moments_are_lognormal() {
    // z(τ,1) = exp(B_τ − 3τ/2)
    for tau in [0.3, 0.5, 1.0] {
        for k in 2..=4 {
            let v = polymer::she_moment(&vec![1; k], tau, 1.0).unwrap();
            let kf = k as f64;
            let exact = (tau * (kf * kf / 2.0 - 1.5 * kf)).exp();
            assert!((v.value.re - exact).abs() < 1e-9 * exact, "tau = {tau}, k = {k}");
        }
    }
}

#[test]
fn boundary_condition_holds() {
    for c in [1.0, 0.5, -0.5] {
        assert!(polymer::she_boundary_residual(&[2, 2], 0, 0.7, c).unwrap() < 1e-9);
        assert!(polymer::she_boundary_residual(&[3, 2, 2], 1, 0.7, c).unwrap() < 1e-9);
        assert!(polymer::she_boundary_residual(&[3, 3, 1], 0, 0.4, c).unwrap() < 1e-9);
    }
    assert!(polymer::she_boundary_residual(&[2, 1], 0, 0.7, 1.0).is_err());
}

#[test]
fn moments_match_simulation() {
    let tau = 0.5;
    let dt = 1e-3;
    let z0 = polymer::delta_initial(2);
    let rows = markov::mc_expectation_vec(
        |rng, _| {
            let s = polymer::simulate_she(2, tau, dt, &[], &z0, rng).unwrap();
            assert!(s.z.iter().all(|&v| v > 0.0));
            let (z1, z2) = (s.z[0], s.z[1]);
            vec![z1, z2, z1 * z1, z2 * z1, z2 * z2]
        },
        5,
        40_000,
        17,
    )
    .unwrap();
    let cases: [&[usize]; 5] = [&[1], &[2], &[1, 1], &[2, 1], &[2, 2]];
    for (nvec, ens) in cases.iter().zip(&rows) {
        let exact = polymer::she_moment(nvec, tau, 1.0).unwrap().value.re;
        assert!(ens.z_score(exact) < 3.0, "{nvec:?}: {exact} vs {} ± {}", ens.mean, ens.std_error);
    }
}

#[test]
fn halving_the_step_barely_moves_the_ensemble() {
    let z0 = polymer::delta_initial(3);
    let diffs = markov::mc_expectation_vec(
        |rng, _| {
            let (c, f) = polymer::simulate_she_coupled(3, 1.0, 1e-3, &z0, rng).unwrap();
            vec![c.z[2], f.z[2] - c.z[2]]
        },
        2,
        4000,
        3,
    )
    .unwrap();
    let (mean_diff, _) = mean_se(&diffs[1].values);
    assert!(mean_diff.abs() < diffs[0].std_error);
}

#[test]
fn laplace_determinant_matches_simulation() {
    let opts = DetOptions::default();
    assert_eq!(polymer::oy_laplace_det(C64::new(0.0, 0.0), 2, 0.5, &opts).unwrap().value, C64::new(1.0, 0.0));
    let big = polymer::oy_laplace_det(C64::new(50.0, 0.0), 2, 0.5, &opts).unwrap().value;
    assert!(big.re > 0.0 && big.re < 1.0 && big.im.abs() < 1e-10);
    assert!(polymer::oy_laplace_det(C64::new(-1.0, 0.0), 2, 0.5, &opts).is_err());
    for n in [1, 2] {
        let det = polymer::oy_laplace_det(C64::new(1.0, 0.0), n, 0.5, &opts).unwrap().value.re;
        let mc = polymer::she_mc(n, 0.5, 1e-3, 1.0, 40_000, 23 + n as u64).unwrap();
        assert!(mc.laplace.z_score(det) < 3.0, "n = {n}: {det} vs {} ± {}", mc.laplace.mean, mc.laplace.std_error);
    }
}

#[test]
fn qtasep_scaling_approaches_the_heat_equation() {
    let rows = polymer::scaling_map_diagnostic(&[0.2, 0.1, 0.05], 1.0, 1, 40_000, 5).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].gap < w[0].gap);
    }
    assert!(polymer::scaling_map_diagnostic(&[0.7], 1.0, 1, 10, 5).is_err());
}
