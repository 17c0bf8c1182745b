use dualdet::duality::{asep_generator_residual, qtasep_generator_residual};
use dualdet::markov::{AsepParams, BondRates, OccupancyConfig, ParticleConfig, QtasepParams, ZrpConfig};
use proptest::prelude::*;

fn gaps_to_positions(start: i64, gaps: &[i64]) -> Vec<i64> {
    let mut v = vec![start];
    for g in gaps {
        let last = *v.last().unwrap();
        v.push(last - 1 - g);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn qtasep_tazrp_generators_agree(
        q in 0.05f64..0.95,
        rates in prop::collection::vec(0.2f64..3.0, 5),
        n in 1usize..=5,
        start in -4i64..6,
        gaps in prop::collection::vec(0i64..4, 4),
        counts in prop::collection::vec(0u32..3, 5),
    ) {
        let params = QtasepParams::new(q, rates[..n].to_vec()).unwrap();
        let x = ParticleConfig::new(gaps_to_positions(start, &gaps[..n - 1])).unwrap();
        let mut c = vec![0u32];
        c.extend(counts[..n].iter().copied());
        let total: u32 = c.iter().sum();
        prop_assume!(total >= 1 && total <= 4);
        let y = ZrpConfig { counts: c };
        let r = qtasep_generator_residual(&params, &x, &y).unwrap();
        prop_assert!(r < 1e-12, "residual {}", r);
    }

    #[test]
    fn asep_tilde_identity_uniform_bonds(
        p in 0.05f64..0.45,
        occ in prop::collection::vec(0u8..2, 14),
        right_full in any::<bool>(),
        xs in prop::collection::btree_set(-6i64..8, 1..=4),
    ) {
        let params = AsepParams::new(p).unwrap();
        let eta = OccupancyConfig { left: -6, occ, right_full };
        let xs: Vec<i64> = xs.into_iter().collect();
        let r = asep_generator_residual(&params, &eta, &xs, true);
        prop_assert!(r < 1e-12, "residual {}", r);
    }

    #[test]
    fn asep_tilde_identity_bonds_vary_away_from_particles(
        p in 0.05f64..0.45,
        far in prop::collection::vec(0.3f64..2.5, 6),
        occ in prop::collection::vec(0u8..2, 14),
        xs in prop::collection::btree_set(-2i64..4, 1..=3),
    ) {
        let mut values = far.clone();
        values.extend(std::iter::repeat(1.0).take(9));
        values.extend(far);
        let params = AsepParams::new(p).unwrap().with_bonds(BondRates::Table { offset: -9, values });
        let eta = OccupancyConfig { left: -6, occ, right_full: false };
        let xs: Vec<i64> = xs.into_iter().collect();
        let r = asep_generator_residual(&params, &eta, &xs, true);
        prop_assert!(r < 1e-12, "residual {}", r);
    }

    #[test]
    fn asep_tilde_single_particle_defect(
        p in 0.05f64..0.45,
        a_left in 0.3f64..2.5,
        a_right in 0.3f64..2.5,
    ) {
        // isolated particle at 0 with an isolated dual particle on top of it
        let params = AsepParams::new(p)
            .unwrap()
            .with_bonds(BondRates::Table { offset: -1, values: vec![a_left, a_right] });
        let eta = OccupancyConfig { left: -3, occ: vec![0, 0, 0, 1, 0, 0, 0], right_full: false };
        let r = asep_generator_residual(&params, &eta, &[0], true);
        let expected = ((params.q - params.p) * (a_right - a_left)).abs();
        prop_assert!((r - expected).abs() < 1e-13);
    }

    #[test]
    fn asep_plain_identity_uniform_bonds(
        p in 0.05f64..0.45,
        occ in prop::collection::vec(0u8..2, 14),
        right_full in any::<bool>(),
        xs in prop::collection::btree_set(-6i64..8, 1..=4),
    ) {
        let params = AsepParams::new(p).unwrap();
        let eta = OccupancyConfig { left: -6, occ, right_full };
        let xs: Vec<i64> = xs.into_iter().collect();
        let r = asep_generator_residual(&params, &eta, &xs, false);
        prop_assert!(r < 1e-12, "residual {}", r);
    }
}

#[test]
fn plain_identity_breaks_with_inhomogeneous_bonds() {
    let params = AsepParams::new(0.3)
        .unwrap()
        .with_bonds(BondRates::Table { offset: 0, values: vec![0.5, 2.0, 1.5, 0.7] });
    let eta = OccupancyConfig { left: -2, occ: vec![0, 1, 0, 1, 1, 0, 1], right_full: false };
    let worst = [vec![1], vec![2], vec![0, 2], vec![1, 3]]
        .iter()
        .map(|xs| asep_generator_residual(&params, &eta, xs, false))
        .fold(0.0, f64::max);
    assert!(worst > 1e-6);
}

#[test]
fn free_evolution_qtasep() {
    let p = QtasepParams::homogeneous(0.5, 3).unwrap();
    let r = dualdet::duality::check_qtasep_free_evolution(&[2, 2], 0.5, &p).unwrap();
    assert!(r.b1_free_equation < 1e-6, "{r:?}");
    assert!(r.b2_boundary.unwrap() < 1e-9, "{r:?}");
    assert!(r.b3_absorbing.unwrap() < 1e-12, "{r:?}");
    assert!(r.b4_initial < 1e-12, "{r:?}");
}

#[test]
fn free_evolution_asep() {
    let p = AsepParams::from_tau(0.4).unwrap();
    let r = dualdet::duality::check_asep_free_evolution(&[1, 2], 0.3, &p, 1.0).unwrap();
    assert!(r.b1_free_equation < 1e-6, "{r:?}");
    assert!(r.b2_boundary.unwrap() < 1e-9, "{r:?}");
    assert!(r.b4_initial < 1e-10, "{r:?}");
}

#[test]
fn moments_match_dual_chain() {
    let p = QtasepParams::homogeneous(0.5, 3).unwrap();
    for nvec in [vec![1], vec![2], vec![3], vec![1, 1], vec![2, 1], vec![2, 2], vec![3, 1], vec![3, 2], vec![3, 3]] {
        let (c, d) = dualdet::duality::moment_vs_dual_ode(&nvec, 0.5, &p).unwrap();
        assert!((c - d).abs() < 1e-8, "{nvec:?}: {c} vs {d}");
    }
}
