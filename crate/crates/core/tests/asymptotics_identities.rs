use dualdet::asymptotics::{self, TwQuery};

#[test]
fn critical_point_is_double_with_the_expected_cubic_term() {
    for k in 1..10 {
        let tau = k as f64 / 10.0;
        let cp = asymptotics::validate_critical_point(tau).unwrap();
        assert!(cp.g1.abs() < 1e-14 * (1.0 / (tau * tau)) && cp.g2.abs() < 1e-14 / (tau * tau));
        assert!((cp.g3 + 6.0 / (48.0 * tau.powi(3))).abs() < 1e-12 / tau.powi(3));
        assert!(cp.fd_g2.abs() < 1e-8);
        assert!((cp.fd_g3 - cp.g3).abs() < 1e-6 * cp.g3.abs());
    }
}

#[test]
fn fgue_is_a_distribution_function() {
    let vals: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&r| asymptotics::fgue_default(r).unwrap().value).collect();
    for w in vals.windows(2) {
        assert!(w[1] > w[0] - 1e-6);
    }
    assert!(vals.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    let tail = asymptotics::fgue_default(6.0 / 2f64.powf(4.0 / 3.0)).unwrap();
    assert!((tail.value - 1.0).abs() < 1e-4);
}

#[test]
fn fgue_is_self_convergent() {
    for r in [-1.0, 0.0, 0.5] {
        let base = asymptotics::fgue(r, 6.0, 64).unwrap();
        let fine = asymptotics::fgue(r, 8.0, 128).unwrap();
        assert!((base.value - fine.value).abs() < 1e-6, "r = {r}");
        assert!(base.imag_defect < 1e-8);
    }
    assert!(asymptotics::fgue(0.0, 4.0, 64).is_err());
}

#[test]
fn large_time_gap_shrinks() {
    let rows = asymptotics::asep_tw_convergence(&TwQuery::new(0.0, vec![50.0, 100.0, 200.0], 0.4)).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].gap < w[0].gap);
    }
    for row in &rows {
        assert!(row.det_error < 1e-8);
        assert!((0.0..=1.0).contains(&row.det));
    }
}

#[test]
fn large_time_determinant_matches_simulated_functional() {
    let check = asymptotics::asep_tw_mc_check(50.0, 0.0, 0.4, 4000, 21, 128).unwrap();
    assert!(check.functional.z_score(check.det) < 3.0, "{} vs {} ± {}", check.det, check.functional.mean, check.functional.std_error);
}
