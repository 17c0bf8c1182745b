use dualdet::fredholm::DetOptions;
use dualdet::markov::{self, AsepParams, AsepWindow, InitialData, QtasepParams};
use dualdet::transform::{self, InvertOptions, Pmf};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn det_opts() -> DetOptions {
    DetOptions { m0: 32, tol: 1e-9, ..DetOptions::default() }
}

fn inv_opts() -> InvertOptions {
    InvertOptions { tol: 1e-9, ..InvertOptions::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_then_invert_is_identity(w in prop::collection::vec(0.0f64..1.0, 11), q in 0.2f64..0.7) {
        let total: f64 = w.iter().sum::<f64>() + 1e-3;
        let pmf = Pmf::new(0, w.iter().map(|v| v / total).collect()).unwrap();
        let fhat = |z: C64| transform::eq_laplace_forward(&pmf, z, q);
        let mut sum = 0.0;
        for m in 0..=12 {
            let back = transform::eq_laplace_invert(fhat, m, q, InvertOptions::default()).unwrap();
            prop_assert!((back.value - pmf.get(m)).abs() < 1e-8, "m = {} got {} want {}", m, back.value, pmf.get(m));
            prop_assert!(back.imag.abs() < 1e-8);
            sum += back.value;
        }
        prop_assert!((sum - pmf.total()).abs() < 1e-8);
    }
}

#[test]
fn inversion_does_not_depend_on_the_radius() {
    let q = 0.45;
    let pmf = Pmf::new(0, vec![0.1, 0.25, 0.3, 0.05, 0.2, 0.1]).unwrap();
    let fhat = |z: C64| transform::eq_laplace_forward(&pmf, z, q);
    for m in 0..6 {
        let a = transform::eq_laplace_invert(fhat, m, q, InvertOptions::default()).unwrap();
        let b = transform::eq_laplace_invert(fhat, m, q, InvertOptions { offset: 0.7, ..InvertOptions::default() }).unwrap();
        let c = transform::eq_laplace_invert(fhat, m, q, InvertOptions { offset: 0.25, ..InvertOptions::default() }).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
        assert!((a.value - c.value).abs() < 1e-9);
    }
}

#[test]
fn inversion_is_linear() {
    let q = 0.5;
    let f = Pmf::new(0, vec![0.2, 0.3, 0.5]).unwrap();
    let g = Pmf::new(0, vec![0.0, 0.1, 0.0, 0.9]).unwrap();
    let fh = |z: C64| transform::eq_laplace_forward(&f, z, q);
    let gh = |z: C64| transform::eq_laplace_forward(&g, z, q);
    let mix = |z: C64| Ok(0.3 * fh(z)? + 0.7 * gh(z)?);
    for m in 0..4 {
        let v = transform::eq_laplace_invert(mix, m, q, InvertOptions::default()).unwrap().value;
        assert!((v - (0.3 * f.get(m) + 0.7 * g.get(m))).abs() < 1e-9);
    }
}

#[test]
fn forward_rejects_poles() {
    let pmf = Pmf::new(0, vec![0.5, 0.5]).unwrap();
    assert!(transform::eq_laplace_forward(&pmf, C64::new(1.0 / 0.4, 0.0), 0.4).is_err());
    assert!(Pmf::new(0, vec![0.7, 0.7]).is_err());
}

#[test]
fn first_qtasep_particle_is_poisson() {
    let t = 1.3;
    let r = transform::recover_pmf_qtasep(1, t, 0.5, vec![1.0], -1, 3, det_opts(), inv_opts()).unwrap();
    let mut fact = 1.0;
    for k in 0..=4 {
        if k > 0 {
            fact *= k as f64;
        }
        let poisson = (-t).exp() * t.powi(k) / fact;
        assert!((r.pmf.get(k as i64 - 1) - poisson).abs() < 1e-6, "k = {k}");
    }
}

#[test]
fn qtasep_second_particle_mean_matches_simulation() {
    let (q, t) = (0.5, 1.0);
    let r = transform::recover_pmf_qtasep(2, t, q, vec![1.0, 1.0], -2, 4, det_opts(), inv_opts()).unwrap();
    assert!(r.normalization_defect.abs() < 1e-5);
    let params = QtasepParams::homogeneous(q, 2).unwrap();
    let ens = markov::mc_expectation(
        |rng, _| {
            let x0 = markov::init_qtasep(2, InitialData::Step, &params, rng).unwrap();
            markov::simulate_qtasep(&x0, &params, t, rng).positions[1] as f64
        },
        40_000,
        11,
    )
    .unwrap();
    assert!(ens.z_score(r.pmf.mean()) < 3.0, "mean {} vs mc {} ± {}", r.pmf.mean(), ens.mean, ens.std_error);
}

#[test]
fn asep_distribution_matches_simulation() {
    let (tau, t) = (0.4, 1.0);
    let r = transform::recover_pmf_asep(0, t, tau, 1.0, 5, det_opts(), inv_opts()).unwrap();
    assert!(r.normalization_defect.abs() < 1e-5);
    let params = AsepParams::from_tau(tau).unwrap();
    let window = AsepWindow::around(0, 0);
    let bins = markov::mc_expectation_vec(
        |rng, _| {
            let c = markov::simulate_asep(InitialData::Step, &params, &window, t, rng).unwrap();
            let n = c.n_x(0) as usize;
            (0..6).map(|m| (m == n) as u8 as f64).collect()
        },
        6,
        20_000,
        5,
    )
    .unwrap();
    for (m, ens) in bins.iter().enumerate() {
        let p = r.pmf.get(m as i64);
        let se = (p * (1.0 - p) / ens.count as f64).sqrt().max(1e-12);
        assert!((ens.mean - p).abs() < 3.0 * se + 1e-12, "m = {m}: {} vs {p}", ens.mean);
    }
}

#[test]
fn short_time_asep_distribution_is_a_point_mass() {
    let r = transform::recover_pmf_asep(0, 1e-5, 0.4, 1.0, 2, det_opts(), inv_opts()).unwrap();
    assert!((r.pmf.get(0) - 1.0).abs() < 1e-4);
    assert!(r.pmf.get(1) < 1e-4);
}
