//! Critical-point data for large-time ASEP, the GUE Tracy–Widom distribution
//! from the rescaled cubic kernel, and finite-time convergence tables.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fredholm::{self, DetOptions, KernelSpec, AIRY_CUTOFF};
use crate::markov::{self, AsepParams, AsepWindow, Ensemble, InitialData};
use crate::par;
use crate::qfunc::qpoch_inf_re;

/// Derivatives of `G(z) = −ln z/4 − τ/(τ+z)` at `z = τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub tau: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    /// `G'''(τ)/6`, expected `−1/(48τ³)`.
    pub cubic: f64,
    pub cubic_expected: f64,
    /// Fourth-order finite differences of the analytic `G'` and `G''`.
    pub fd_g2: f64,
    pub fd_g3: f64,
}

fn g_deriv(tau: f64, z: f64, order: u32) -> f64 {
    let u = tau + z;
    match order {
        1 => -1.0 / (4.0 * z) + tau / (u * u),
        2 => 1.0 / (4.0 * z * z) - 2.0 * tau / (u * u * u),
        3 => -1.0 / (2.0 * z * z * z) + 6.0 * tau / (u * u * u * u),
        _ => unreachable!(),
    }
}

fn fd4<F: Fn(f64) -> f64>(f: F, z: f64, h: f64) -> f64 {
    (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h)
}

pub fn validate_critical_point(tau: f64) -> Result<CriticalPoint> {
    if !(tau > 0.0 && tau < 1.0) {
        return invalid(format!("tau must lie in (0,1), got {tau}"));
    }
    let h = 1e-3 * tau;
    let cp = CriticalPoint {
        tau,
        g1: g_deriv(tau, tau, 1),
        g2: g_deriv(tau, tau, 2),
        g3: g_deriv(tau, tau, 3),
        cubic: g_deriv(tau, tau, 3) / 6.0,
        cubic_expected: -1.0 / (48.0 * tau.powi(3)),
        fd_g2: fd4(|z| g_deriv(tau, z, 1), tau, h),
        fd_g3: fd4(|z| g_deriv(tau, z, 2), tau, h),
    };
    // Both vanish exactly; the bounds only absorb rounding of O(1/τ²) terms.
    let scale = 1.0 / (tau * tau);
    if cp.g1.abs() > 1e-14 * scale || cp.g2.abs() > 1e-14 * scale {
        return Err(Error::NonConvergence(format!("tau = {tau} is not a double critical point: G' = {:e}, G'' = {:e}", cp.g1, cp.g2)));
    }
    Ok(cp)
}

/// A real distribution-function value with its numerical diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgueValue {
    pub r: f64,
    pub value: f64,
    pub imag_defect: f64,
    pub error: f64,
    pub nodes: usize,
}

/// `F_GUE(2^{4/3} r)` as the determinant of the rescaled cubic kernel on
/// rays truncated at `truncation`, node-doubled from `m` nodes per ray.
pub fn fgue(r: f64, truncation: f64, m: usize) -> Result<FgueValue> {
    if truncation < 5.0 {
        return invalid("ray truncation must be at least 5");
    }
    if m < 64 {
        return invalid("need at least 64 nodes per ray");
    }
    let spec = KernelSpec::AiryRescaled { r, cutoff: truncation };
    let opts = DetOptions { m0: m, tol: 1e-11, ..DetOptions::default() };
    let d = fredholm::determinant(&spec, C64::new(0.0, 0.0), &opts)?;
    Ok(FgueValue { r, value: d.value.re, imag_defect: d.value.im.abs(), error: d.error, nodes: d.nodes })
}

pub fn fgue_default(r: f64) -> Result<FgueValue> {
    fgue(r, AIRY_CUTOFF, 64)
}

/// Large-time query at fluctuation coordinate `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwQuery {
    pub r: f64,
    pub ts: Vec<f64>,
    pub tau: f64,
    /// Contour radii `τ^{1∓a}` with `a = min(κ t^{−1/3}, 1/3)`.
    pub kappa: f64,
    pub nodes: usize,
    pub truncation: f64,
}

impl TwQuery {
    pub fn new(r: f64, ts: Vec<f64>, tau: f64) -> Self {
        TwQuery { r, ts, tau, kappa: 1.0, nodes: 128, truncation: AIRY_CUTOFF }
    }
    pub fn gamma(&self) -> f64 {
        (1.0 - self.tau) / (1.0 + self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwRow {
    pub t: f64,
    pub r: f64,
    pub det: f64,
    pub fgue: f64,
    pub gap: f64,
    /// Change of the determinant when the node count doubles.
    pub det_error: f64,
}

/// `E[e_τ(−ζ τ^{N_0(t/γ)})]` for step data with `ζ = −τ^{−t/4 + t^{1/3} r}`,
/// from the Mellin–Barnes determinant in its large-time form.
pub fn asep_tw_det(t: f64, r: f64, tau: f64, kappa: f64, m: usize) -> Result<C64> {
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let gamma = (1.0 - tau) / (1.0 + tau);
    // e_τ(x) = 1/((1−τ)x; τ)_∞ while the determinant computes 1/(ζτ^N; τ)_∞.
    let zeta = -(1.0 - tau) * tau.powf(-t / 4.0 + t.cbrt() * r);
    let a = (kappa * t.powf(-1.0 / 3.0)).min(1.0 / 3.0);
    fredholm::asep_mb_det_zform(0, t / gamma, tau, 1.0, C64::new(zeta, 0.0), tau.powf(1.0 - a), tau.powf(1.0 + a), m, m)
}

pub fn asep_tw_convergence(query: &TwQuery) -> Result<Vec<TwRow>> {
    if !(query.tau > 0.0 && query.tau < 1.0) {
        return invalid("tau must lie in (0,1)");
    }
    if query.ts.iter().any(|&t| !(t > 0.0)) {
        return invalid("times must be positive");
    }
    let f = fgue(query.r, query.truncation, 64)?.value;
    let rows = par::map_slice(&query.ts, |&t| -> Result<TwRow> {
        let d1 = asep_tw_det(t, query.r, query.tau, query.kappa, query.nodes)?;
        let d2 = asep_tw_det(t, query.r, query.tau, query.kappa, 2 * query.nodes)?;
        let det = d2.re;
        if !(-1e-6..=1.0 + 1e-6).contains(&det) {
            return Err(Error::NonConvergence(format!("determinant {det} at t = {t} lies outside [0, 1]")));
        }
        Ok(TwRow { t, r: query.r, det, fgue: f, gap: (det - f).abs(), det_error: (d2 - d1).norm() })
    });
    rows.into_iter().collect()
}

/// Monte Carlo view of one large-time point: the transform functional
/// `1/(ζτ^N; τ)_∞` (whose mean the determinant equals exactly) and the
/// indicator `N_0(t/γ) ≥ t/4 − t^{1/3} r` (which it approaches as `t → ∞`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwMcCheck {
    pub t: f64,
    pub r: f64,
    pub det: f64,
    pub functional: Ensemble,
    pub probability: Ensemble,
}

pub fn asep_tw_mc_check(t: f64, r: f64, tau: f64, paths: usize, seed: u64, m: usize) -> Result<TwMcCheck> {
    let params = AsepParams::from_tau(tau)?;
    let time = t / params.gamma();
    let level = t / 4.0 - t.cbrt() * r;
    let zeta = -(1.0 - tau) * tau.powf(-t / 4.0 + t.cbrt() * r);
    let window = AsepWindow::around(0, 0);
    let mut ens = markov::mc_expectation_vec(
        |rng, _| match markov::simulate_asep(InitialData::Step, &params, &window, time, rng) {
            Ok(c) => {
                let n = c.n_x(0);
                let smooth = 1.0 / qpoch_inf_re(zeta * tau.powi(n as i32), tau);
                vec![smooth, ((n as f64) >= level) as u8 as f64]
            }
            Err(_) => vec![f64::NAN; 2],
        },
        2,
        paths,
        seed,
    )?;
    let probability = ens.pop().expect("two components");
    let functional = ens.pop().expect("two components");
    if !functional.mean.is_finite() {
        return Err(Error::Window("simulation window rejected".into()));
    }
    let det = asep_tw_det(t, r, tau, 1.0, m)?.re;
    Ok(TwMcCheck { t, r, det, functional, probability })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_point_on_grid() {
        for k in 1..10 {
            let cp = validate_critical_point(k as f64 / 10.0).unwrap();
            assert!((cp.cubic - cp.cubic_expected).abs() < 1e-12 * cp.cubic_expected.abs());
            assert!(cp.fd_g2.abs() < 1e-8);
        }
        assert!(validate_critical_point(1.0).is_err());
    }
}
