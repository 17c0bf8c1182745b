use std::f64::consts::PI;

use dualdet::fredholm::{self, DetOptions, KernelSpec, PreparedKernel, SMethod};
use dualdet::markov::{AsepParams, QtasepParams};
use dualdet::moments::{self, QuadOptions};
use dualdet::qfunc;
use dualdet::quadrature::ContourSpec;
use num_complex::Complex64 as C64;

fn opts() -> DetOptions {
    DetOptions::default()
}

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

#[test]
fn mellin_barnes_sum_geometric_series() {
    let zeta = re(-0.3);
    let one = fredholm::mellin_barnes_sum_check(|_| re(1.0), zeta, 0.5).unwrap();
    assert!((one.direct - zeta / (1.0 - zeta)).norm() < 1e-14);
    assert!(one.residual < 1e-10);
    let lin = fredholm::mellin_barnes_sum_check(|z| z, zeta, 0.5).unwrap();
    assert!((lin.direct - 0.5 * zeta / (1.0 - 0.5 * zeta)).norm() < 1e-14);
    assert!(lin.residual < 1e-10);
    let off_axis = fredholm::mellin_barnes_sum_check(|z| (z * 0.7).exp(), C64::from_polar(0.6, 2.2), 0.3).unwrap();
    assert!(off_axis.residual < 1e-10);
    assert!(fredholm::mellin_barnes_sum_check(|_| re(1.0), C64::new(0.5, 1e-4), 0.5).is_err());
}

#[test]
fn gamma_pair_residues() {
    for k in 1..=3 {
        let circle = ContourSpec::circle(re(k as f64), 0.3).rule(64);
        let res = circle.integrate(fredholm::gamma_pair);
        let expected = if k % 2 == 1 { 1.0 } else { -1.0 };
        assert!((res - expected).norm() < 1e-12, "k = {k}: {res}");
    }
}

#[test]
fn ln_gamma_on_the_imaginary_axis() {
    // |Γ(iy)|² = π/(y sinh πy)
    for y in [0.3, 1.0, 2.5, 7.0] {
        let lg = fredholm::ln_gamma(C64::new(0.0, y));
        let expected = 0.5 * (PI / (y * (PI * y).sinh())).ln();
        assert!((lg.re - expected).abs() < 1e-12);
    }
    let z = C64::new(2.3, -1.7);
    let step = fredholm::ln_gamma(z + 1.0) - fredholm::ln_gamma(z) - z.ln();
    let wrapped = C64::new(step.re, (step.im / (2.0 * PI)).round() * 2.0 * PI - step.im);
    assert!(wrapped.norm() < 1e-12);
}

#[test]
fn rank_one_determinant() {
    let contour = ContourSpec::circle(C64::new(0.2, 0.1), 0.8);
    let phi = |w: C64| (w * w * 0.4).exp();
    let psi = |w: C64| 1.0 / (w - 1.5) + 0.3;
    let det = fredholm::nystrom_det_with(|w, w2| phi(w) * psi(w2), &contour, 32).unwrap();
    let direct = contour.rule(128).integrate(|w| phi(w) * psi(w));
    assert!((det.value - (1.0 + direct)).norm() < 1e-10);
}

#[test]
fn vanishing_argument_gives_one() {
    let kernels = [
        KernelSpec::qtasep_mb(2, 0.5, 0.5, vec![1.0]).unwrap(),
        KernelSpec::QtasepCauchy { n: 2, t: 0.5, q: 0.5, a: vec![1.0] },
        KernelSpec::asep_mb(0, 0.5, 0.4, 1.0).unwrap(),
        KernelSpec::AsepCauchy { x: 0, t: 0.5, tau: 0.4, rho: 1.0 },
        KernelSpec::asep_tw(0, 0.5, 0.4, 1.0).unwrap(),
        KernelSpec::OyPolymer { n: 2, t: 0.5 },
    ];
    for k in &kernels {
        let d = fredholm::determinant(k, re(0.0), &DetOptions { m0: 16, ..opts() }).unwrap();
        assert!((d.value - 1.0).norm() < 1e-15, "{k:?}");
    }
}

#[test]
fn series_matches_nystrom_for_asep_cauchy() {
    let spec = KernelSpec::AsepCauchy { x: 1, t: 0.6, tau: 0.4, rho: 1.0 };
    let zeta = C64::new(-0.05, 0.03);
    let m = 48;
    let series = fredholm::series_det(&spec, zeta, m, 4, 1e-9).unwrap();
    let nystrom = fredholm::determinant(&spec, zeta, &opts()).unwrap();
    assert!((series.value - nystrom.value).norm() < 1e-7);
    assert_eq!(fredholm::series_det(&spec, zeta, m, 0, 1.0).unwrap().value, re(1.0));

    let prep = PreparedKernel::new(&spec, zeta, &opts()).unwrap();
    let rule = spec.contour().unwrap().rule(m);
    let a = prep.matrix(&rule, m);
    let trace: C64 = (0..m).map(|i| a[i * m + i]).sum();
    let terms = fredholm::principal_minor_sums(&a, m, 1).unwrap();
    assert!((terms[1] - trace).norm() < 1e-12);
}

#[test]
fn generating_series_qtasep() {
    let (n, t, q) = (2, 0.5, 0.5);
    let params = QtasepParams::homogeneous(q, n).unwrap();
    let spec = KernelSpec::qtasep_mb(n, t, q, vec![1.0]).unwrap();
    let contour = moments::qtasep_single_contour(q, &[1.0]).unwrap();
    let f = |z: C64| moments::qtasep_factor(&params, n, t, z);
    let mus = moments::mu_k_generating(f, &contour, 8, q, moments::PartitionVariant::Qtasep, 32).unwrap();
    for phase in [0.7, 2.0, -2.6] {
        let xi = C64::from_polar(0.05, phase);
        let mut sum = re(1.0);
        for (k, mu) in mus.iter().enumerate() {
            sum += mu * xi.powi(k as i32 + 1) / qfunc::q_factorial(k + 1, q);
        }
        // Σ μ_k ξ^k/k_q! = E[1/((1−q)ξ q^{x_n+n}; q)_∞]
        let det = fredholm::transform_via_mb(&spec, xi * (1.0 - q), &opts()).unwrap();
        assert!((det.value - sum).norm() < 1e-7, "{} vs {}", det.value, sum);
    }
}

#[test]
fn generating_series_asep() {
    let (x, t, tau) = (1, 0.5, 0.4);
    let params = AsepParams::from_tau(tau).unwrap();
    for rho in [1.0, 0.5] {
        let spec = KernelSpec::asep_mb(x, t, tau, rho).unwrap();
        let zeta = C64::from_polar(0.05, 2.3);
        let mus = moments::asep_moment_decomposed(8, x, t, &params, rho, 64).unwrap();
        let mut sum = re(0.0);
        for (k, mu) in mus.iter().enumerate() {
            sum += mu.value * zeta.powi(k as i32) / qfunc::qpoch_re(tau, tau, k);
        }
        let det = fredholm::transform_via_mb(&spec, zeta, &opts()).unwrap();
        assert!((det.value - sum).norm() < 1e-7, "{} vs {}", det.value, sum);
    }
}

#[test]
fn linear_coefficient_is_first_moment() {
    let (n, t, q) = (2, 0.5, 0.5);
    let params = QtasepParams::homogeneous(q, n).unwrap();
    let spec = KernelSpec::qtasep_mb(n, t, q, vec![1.0]).unwrap();
    // Taylor coefficients from nodes offset off the positive axis
    let (radius, nodes) = (0.05, 16);
    let mut coeffs = [re(0.0); 2];
    for j in 0..nodes {
        let u = C64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / nodes as f64);
        let v = fredholm::transform_via_mb(&spec, u * radius, &opts()).unwrap().value;
        coeffs[0] += v / nodes as f64;
        coeffs[1] += v / (u * radius * nodes as f64);
    }
    let mu1 = moments::qtasep_moment(&[n], t, &params, 0.0, QuadOptions::default()).unwrap().value;
    // [ζ¹] E[1/(ζ q^{x+n}; q)_∞] = μ_1/(1 − q)
    assert!((coeffs[0] - 1.0).norm() < 1e-10);
    assert!((coeffs[1] - mu1 / (1.0 - q)).norm() < 1e-8);
}

#[test]
fn mellin_barnes_equals_cauchy() {
    let zeta = re(-0.4);
    let (n, t, q) = (2, 0.5, 0.5);
    let mb = fredholm::transform_via_mb(&KernelSpec::qtasep_mb(n, t, q, vec![1.0]).unwrap(), zeta, &opts()).unwrap();
    let ca = fredholm::transform_via_cauchy(&KernelSpec::QtasepCauchy { n, t, q, a: vec![1.0] }, zeta, &opts()).unwrap();
    assert!((mb.value - ca.value).norm() < 1e-6);

    let mixed = vec![1.05, 0.97, 1.0];
    let mb = fredholm::transform_via_mb(&KernelSpec::qtasep_mb(3, 0.8, q, mixed.clone()).unwrap(), C64::new(-0.2, 0.5), &opts()).unwrap();
    let ca = fredholm::transform_via_cauchy(&KernelSpec::QtasepCauchy { n: 3, t: 0.8, q, a: mixed }, C64::new(-0.2, 0.5), &opts()).unwrap();
    assert!((mb.value - ca.value).norm() < 1e-6);

    for rho in [1.0, 0.5] {
        let mb = fredholm::transform_via_mb(&KernelSpec::asep_mb(0, 0.5, 0.4, rho).unwrap(), zeta, &opts()).unwrap();
        let ca = fredholm::transform_via_cauchy(&KernelSpec::AsepCauchy { x: 0, t: 0.5, tau: 0.4, rho }, zeta, &opts()).unwrap();
        assert!((mb.value - ca.value).norm() < 1e-6, "rho = {rho}");
    }
}

#[test]
fn direct_and_periodized_inner_rules_agree() {
    let direct = DetOptions { s_method: SMethod::Direct, ..opts() };
    let zeta = C64::new(-0.3, 0.2);
    for spec in [KernelSpec::qtasep_mb(2, 0.5, 0.5, vec![1.0]).unwrap(), KernelSpec::asep_mb(1, 0.7, 0.4, 0.5).unwrap()] {
        let circle = spec.contour().unwrap();
        let (center, radius) = circle.disk().unwrap();
        let w = center + C64::from_polar(radius, 0.4);
        let w2 = center + C64::from_polar(radius, 2.9);
        let a = fredholm::eval_kernel_mb(&spec, zeta, w, w2, &opts()).unwrap();
        let b = fredholm::eval_kernel_mb(&spec, zeta, w, w2, &direct).unwrap();
        let refined = fredholm::eval_kernel_mb(&spec, zeta, w, w2, &DetOptions { s_refine: 2.0, ..opts() }).unwrap();
        assert!((a - b).norm() < 1e-10, "{spec:?}: {a} vs {b}");
        assert!((a - refined).norm() < 1e-10);
    }
}

#[test]
fn rho_one_drops_the_pochhammer_factor() {
    let theta = moments::theta_of(1.0).unwrap();
    assert!(theta.is_infinite());
    let near_one = KernelSpec::AsepMb { x: 0, t: 0.5, tau: 0.4, rho: 1.0 - 1e-9, r: 1.5, d: 0.25 };
    let one = KernelSpec::asep_mb(0, 0.5, 0.4, 1.0).unwrap();
    let zeta = re(-0.4);
    let a = fredholm::transform_via_mb(&one, zeta, &opts()).unwrap().value;
    let b = fredholm::transform_via_mb(&near_one, zeta, &opts()).unwrap().value;
    assert!((a - b).norm() < 1e-6);
}

#[test]
fn row_column_pairing() {
    let (n, t, q) = (2, 0.5, 0.5);
    let params = QtasepParams::homogeneous(q, n).unwrap();
    let contour = ContourSpec::circle(re(0.0), 2.0);
    let f = |z: C64| moments::qtasep_factor(&params, n, t, z);
    let (d1, d2) = fredholm::pairing_dets(f, q, &contour, C64::new(-0.4, 0.1), 64).unwrap();
    assert!((d1.value - d2.value).norm() < 1e-10);

    let asep = AsepParams::from_tau(0.4).unwrap();
    let theta = moments::theta_of(0.5).unwrap();
    let f2 = |z: C64| moments::asep_f2(&asep, theta, 1, 0.5, z);
    let c = moments::minus_tau_contour(0.4, theta);
    let (d1, d2) = fredholm::pairing_dets(f2, 0.4, &c, re(-0.4), 64).unwrap();
    assert!((d1.value - d2.value).norm() < 1e-10);
}

#[test]
fn tracy_widom_form_matches_cauchy() {
    for (x, rho) in [(0, 1.0), (2, 1.0), (1, 0.5), (-1, 0.7)] {
        for zeta in [re(-0.4), C64::new(0.3, 0.8)] {
            let cauchy = fredholm::determinant(&KernelSpec::AsepCauchy { x, t: 0.5, tau: 0.4, rho }, zeta, &opts()).unwrap();
            let tw = fredholm::determinant(&KernelSpec::asep_tw(x, 0.5, 0.4, rho).unwrap(), zeta, &opts()).unwrap();
            assert!((cauchy.value - tw.value).norm() < 1e-8, "x = {x}, rho = {rho}: {} vs {}", cauchy.value, tw.value);
        }
    }
}

#[test]
fn cauchy_determinant_is_entire() {
    let spec = KernelSpec::AsepCauchy { x: 0, t: 0.5, tau: 0.4, rho: 1.0 };
    for j in 0..8 {
        let zeta = C64::from_polar(3.0, 2.0 * PI * j as f64 / 8.0);
        let d = fredholm::determinant(&spec, zeta, &DetOptions { tol: 1e-7, ..opts() }).unwrap();
        assert!(d.value.is_finite() && d.error < 1e-7);
    }
}

#[test]
fn large_time_form_matches_standard_route() {
    let tau: f64 = 0.4;
    for (t, zeta) in [(0.5, re(-0.4)), (3.0, C64::new(-2.0, 0.5))] {
        let mb = fredholm::transform_via_mb(&KernelSpec::asep_mb(0, t, tau, 1.0).unwrap(), zeta, &opts()).unwrap();
        let zf = fredholm::asep_mb_det_zform(0, t, tau, 1.0, zeta, tau.powf(0.8), tau.powf(1.2), 128, 128).unwrap();
        assert!((mb.value - zf).norm() < 1e-9);
    }
}

#[test]
fn polymer_single_level_matches_gaussian_integral() {
    // n = 1: e^{3t/2} z(t,1) = e^{B_t}
    let t = 0.5;
    let spec = KernelSpec::OyPolymer { n: 1, t };
    for u in [0.3, 1.0, 4.0] {
        let det = fredholm::determinant(&spec, re(u), &opts()).unwrap();
        let rule = ContourSpec::VerticalLine { re: 0.0, cutoff: 12.0 }.rule(200);
        // the line rule carries weight dy/2π
        let gauss: C64 = rule.integrate(|y| {
            let y = y.im;
            re(2.0 * PI * (-y * y / 2.0).exp() / (2.0 * PI).sqrt() * (-u * (t.sqrt() * y).exp()).exp())
        });
        assert!((det.value - gauss).norm() < 1e-10, "u = {u}");
        assert!(det.value.re > 0.0 && det.value.re < 1.0);
    }
}
