//! Semi-discrete stochastic heat equation `dz(τ,n) = ∇z(τ,n) dτ + z(τ,n) dB_n`,
//! its replica moments and the O'Connell–Yor Laplace transform determinant.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fredholm::{self, DetOptions, DetValue, KernelSpec};
use crate::markov::{self, Ensemble, InitialData, QtasepParams, SimRng};
use crate::moments::{self, MomentValue, QuadOptions};
use crate::quadrature::ContourSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheState {
    /// `z(τ, n)` for `n = 1..N`.
    pub z: Vec<f64>,
    pub tau: f64,
    pub drift: Vec<f64>,
}

/// Exact flow of `z_n' = z_{n−1} − z_n` (with `z_0 ≡ 0`) over time `h`:
/// `z_n ← e^{−h} Σ_j h^j/j! z_{n−j}`.
fn nabla_flow(z: &mut [f64], h: f64) {
    let n = z.len();
    let mut coef = vec![0.0; n];
    coef[0] = (-h).exp();
    for j in 1..n {
        coef[j] = coef[j - 1] * h / j as f64;
    }
    for i in (0..n).rev() {
        let mut s = 0.0;
        for j in 0..=i {
            s += coef[j] * z[i - j];
        }
        z[i] = s;
    }
}

fn check_she(n: usize, t: f64, dt: f64, drift: &[f64], z0: &[f64]) -> Result<()> {
    if n == 0 || z0.len() != n {
        return invalid("initial data must have one entry per site");
    }
    if !drift.is_empty() && drift.len() != n {
        return invalid("drift vector must be empty or have one entry per site");
    }
    if z0.iter().any(|&v| !(v >= 0.0)) {
        return invalid("initial data must be nonnegative");
    }
    if !(t >= 0.0) || !(dt > 0.0) || dt > 1e-3 * t.max(1.0) {
        return invalid(format!("need t >= 0 and 0 < dt <= 1e-3 max(1, t), got t = {t}, dt = {dt}"));
    }
    Ok(())
}

/// Strang splitting: half-step of the exact `∇` flow, exact geometric noise
/// factor `exp(ΔW_n − dt/2 + ã_n dt)`, half-step of the flow.
pub fn simulate_she(n: usize, t: f64, dt: f64, drift: &[f64], z0: &[f64], rng: &mut SimRng) -> Result<SheState> {
    check_she(n, t, dt, drift, z0)?;
    let drift: Vec<f64> = if drift.is_empty() { vec![0.0; n] } else { drift.to_vec() };
    let mut z = z0.to_vec();
    let steps = (t / dt).ceil() as usize;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let sq = h.sqrt();
    let mut dw = vec![0.0; n];
    for _ in 0..steps {
        for d in dw.iter_mut() {
            *d = sq * rng.sample::<f64, _>(StandardNormal);
        }
        she_step(&mut z, h, &drift, &dw);
    }
    Ok(SheState { z, tau: t, drift })
}

/// One split step of length `h` driven by the centred increments `dw`.
pub fn she_step(z: &mut [f64], h: f64, drift: &[f64], dw: &[f64]) {
    nabla_flow(z, h / 2.0);
    for ((zi, a), w) in z.iter_mut().zip(drift).zip(dw) {
        *zi *= (w - h / 2.0 + a * h).exp();
    }
    nabla_flow(z, h / 2.0);
}

/// Runs step `dt` and step `dt/2` on the same Brownian path (the coarse
/// increments are sums of pairs of fine ones).
pub fn simulate_she_coupled(n: usize, t: f64, dt: f64, z0: &[f64], rng: &mut SimRng) -> Result<(SheState, SheState)> {
    check_she(n, t, dt, &[], z0)?;
    let drift = vec![0.0; n];
    let steps = (t / dt).ceil() as usize;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let sq = (h / 2.0).sqrt();
    let (mut coarse, mut fine) = (z0.to_vec(), z0.to_vec());
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..steps {
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            *x = sq * rng.sample::<f64, _>(StandardNormal);
            *y = sq * rng.sample::<f64, _>(StandardNormal);
        }
        she_step(&mut fine, h / 2.0, &drift, &a);
        she_step(&mut fine, h / 2.0, &drift, &b);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        she_step(&mut coarse, h, &drift, &sum);
    }
    Ok((SheState { z: coarse, tau: t, drift: drift.clone() }, SheState { z: fine, tau: t, drift }))
}

/// `δ_{n=1}` initial data on `n` sites.
pub fn delta_initial(n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    z
}

/// Spacing added to `|c|` between consecutive nested circles.
pub const RADIUS_MARGIN: f64 = 0.1;

/// Nested circles: `w_A` on the circle of center `(k−A)c` and radius
/// `1 + (k−A)(|c| + margin)`. Each circle contains 0 and the `c`-shift of
/// every inner circle, with clearance `|c| + margin` to the next one.
pub fn she_contours(k: usize, c: f64) -> Vec<ContourSpec> {
    (1..=k)
        .map(|a| {
            let d = (k - a) as f64;
            ContourSpec::circle(C64::new(d * c, 0.0), 1.0 + d * (c.abs() + RADIUS_MARGIN))
        })
        .collect()
}

/// The nested contour integral
/// `e^{−kτ} ∮…∮ Π_{A<B} (w_A − w_B)/(w_A − w_B − c) Π_j e^{τ w_j}/w_j^{n_j} dw_j/(2πi)`
/// at any `n⃗ ∈ Z_{≥0}^k`, `k ≤ 4`.
pub fn she_u(nvec: &[usize], tau: f64, c: f64, opts: QuadOptions) -> Result<MomentValue> {
    let k = nvec.len();
    if k == 0 || k > 4 {
        return invalid("contour formula evaluated for 1 <= k <= 4");
    }
    if !(tau >= 0.0) {
        return invalid("tau must be nonnegative");
    }
    let contours = she_contours(k, c);
    let radii: Vec<f64> = contours
        .iter()
        .map(|ct| match ct {
            ContourSpec::Circle { radius, .. } => *radius,
            _ => unreachable!(),
        })
        .collect();
    let single = |a: usize, w: C64| (tau * w).exp() / w.powi(nvec[a] as i32);
    let pair = |wa: C64, wb: C64| (wa - wb) / (wa - wb - c);
    // The trapezoid rate on each circle is set by margin/radius, so inner
    // circles get proportionally fewer nodes than the outermost one.
    let v = moments::with_doubling(opts, |m| {
        let rules: Vec<_> = contours
            .iter()
            .zip(&radii)
            .map(|(ct, r)| ct.rule(((m as f64 * r / radii[0]).ceil() as usize).max(16)))
            .collect();
        Ok(moments::tensor_sum(&rules, single, pair))
    })?;
    let scale = (-(k as f64) * tau).exp();
    Ok(MomentValue { value: v.value * scale, error: v.error * scale, nodes: v.nodes })
}

/// `E[Π z(τ, n_i)]` for delta initial data; `n_1 ≥ … ≥ n_k ≥ 1`.
pub fn she_moment(nvec: &[usize], tau: f64, c: f64) -> Result<MomentValue> {
    if nvec.windows(2).any(|w| w[0] < w[1]) || nvec.iter().any(|&n| n == 0) {
        return invalid("moment indices must satisfy n_1 >= ... >= n_k >= 1");
    }
    she_u(nvec, tau, c, she_quad_options(nvec.len()))
}

/// Node schedule for the `k`-fold circle product (outermost circle count).
pub fn she_quad_options(k: usize) -> QuadOptions {
    match k {
        0..=2 => QuadOptions { m0: 64, m_max: 1024, tol: 1e-11 },
        3 => QuadOptions { m0: 64, m_max: 256, tol: 1e-10 },
        _ => QuadOptions { m0: 64, m_max: 256, tol: 1e-8 },
    }
}

/// `(∇_i − ∇_{i+1} − c) u` at `n⃗` (indices 0-based, `n_i = n_{i+1} ≥ 1`).
pub fn she_boundary_residual(nvec: &[usize], i: usize, tau: f64, c: f64) -> Result<f64> {
    if i + 1 >= nvec.len() || nvec[i] != nvec[i + 1] || nvec[i] == 0 {
        return invalid("boundary residual needs n_i = n_{i+1} >= 1");
    }
    let opts = she_quad_options(nvec.len());
    let lower = |j: usize| {
        let mut m = nvec.to_vec();
        m[j] -= 1;
        m
    };
    let u = she_u(nvec, tau, c, opts)?.value;
    let ui = she_u(&lower(i), tau, c, opts)?.value;
    let uj = she_u(&lower(i + 1), tau, c, opts)?.value;
    // ∇_i u = u(n_i^−) − u(n)
    Ok(((ui - u) - (uj - u) - c * u).norm())
}

/// `E[exp(−u e^{3τ/2} z(τ, n))]` for delta initial data and zero drift.
pub fn oy_laplace_det(u: C64, n: usize, t: f64, opts: &DetOptions) -> Result<DetValue> {
    if u.re < 0.0 {
        return invalid("need Re u >= 0");
    }
    if u == C64::new(0.0, 0.0) {
        return Ok(DetValue { value: C64::new(1.0, 0.0), error: 0.0, nodes: 0 });
    }
    let spec = KernelSpec::OyPolymer { n, t };
    fredholm::determinant(&spec, u, opts)
}

/// Seeded ensembles of `z(τ, n)` and `exp(−u e^{3τ/2} z(τ, n))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheEnsemble {
    pub moment: Ensemble,
    pub laplace: Ensemble,
}

pub fn she_mc(n: usize, t: f64, dt: f64, u: f64, paths: usize, seed: u64) -> Result<SheEnsemble> {
    let z0 = delta_initial(n);
    let scale = (1.5 * t).exp();
    check_she(n, t, dt, &[], &z0)?;
    let mut ens = markov::mc_expectation_vec(
        |rng, _| {
            let s = simulate_she(n, t, dt, &[], &z0, rng).expect("validated above");
            let z = s.z[n - 1];
            vec![z, (-u * scale * z).exp()]
        },
        2,
        paths,
        seed,
    )?;
    let laplace = ens.pop().expect("two components");
    let moment = ens.pop().expect("two components");
    Ok(SheEnsemble { moment, laplace })
}

/// `z_ε(τ, n) = exp(−3τ/2 + F)` with `F = τ/ε − (n−1) ln(1/ε) − ε x_n(τ/ε²)`.
pub fn scale_to_she(eps: f64, tau: f64, n: usize, x_n: i64) -> f64 {
    let f = tau / eps - (n as f64 - 1.0) * (1.0 / eps).ln() - eps * x_n as f64;
    (-1.5 * tau + f).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub tau: f64,
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub target: f64,
    pub gap: f64,
}

/// Runs q-TASEP with `q = e^{−ε}`, `a ≡ 1` from step data to time `τ/ε²`,
/// maps `x_n` through the scaling and compares `E[z_ε(τ, n)]` with the
/// first moment of the limiting equation.
pub fn scaling_map_diagnostic(eps_ladder: &[f64], tau: f64, n: usize, paths: usize, seed: u64) -> Result<Vec<ScalingRow>> {
    if eps_ladder.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
        return invalid("epsilon must lie in (0, 0.5]");
    }
    if n == 0 {
        return invalid("need n >= 1");
    }
    let target = she_moment(&[n], tau, 1.0)?.value.re;
    let mut rows = Vec::new();
    for &eps in eps_ladder {
        let params = QtasepParams::homogeneous((-eps).exp(), n)?;
        let t = tau / (eps * eps);
        let ens = markov::mc_expectation(
            |rng, _| {
                let x0 = markov::init_qtasep(n, InitialData::Step, &params, rng).expect("step data");
                let x = markov::simulate_qtasep(&x0, &params, t, rng);
                scale_to_she(eps, tau, n, x.positions[n - 1])
            },
            paths,
            seed,
        )?;
        rows.push(ScalingRow { eps, tau, n, mean: ens.mean, std_error: ens.std_error, target, gap: (ens.mean - target).abs() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nabla_flow_is_exact_for_two_sites() {
        let mut z = vec![1.0, 0.0];
        nabla_flow(&mut z, 0.7);
        assert!((z[0] - (-0.7f64).exp()).abs() < 1e-15);
        assert!((z[1] - 0.7 * (-0.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_time_keeps_initial_data() {
        let mut rng = markov::trajectory_rng(1, 0);
        let s = simulate_she(3, 0.0, 1e-3, &[], &delta_initial(3), &mut rng).unwrap();
        assert_eq!(s.z, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn scaled_initial_data() {
        for eps in [0.2, 0.1] {
            for n in 1..4 {
                let z = scale_to_she(eps, 0.0, n, -(n as i64));
                assert!((z - eps.powi(n as i32 - 1) * (eps * n as f64).exp()).abs() < 1e-14);
            }
        }
    }
}
