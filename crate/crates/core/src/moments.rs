//! Nested contour integral moment formulas for q-TASEP and ASEP, their
//! partition-indexed expansions, and the contours they are evaluated on.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{AsepParams, QtasepParams};
use crate::par;
use crate::qfunc::{self, Partition};
use crate::quadrature::{ContourSpec, QuadratureRule};

/// A contour-integral value with its node-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub value: C64,
    pub error: f64,
    /// Nodes per closed component in the final rule.
    pub nodes: usize,
}

impl MomentValue {
    pub fn exact(v: f64) -> Self {
        MomentValue { value: C64::new(v, 0.0), error: 0.0, nodes: 0 }
    }
    pub fn re(&self) -> f64 {
        self.value.re
    }
}

/// Node schedule for doubling: start at `m0`, double up to `m_max`, stop once
/// `|I_{2M} − I_M| ≤ tol·max(1, |I_{2M}|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub m0: usize,
    pub m_max: usize,
    pub tol: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { m0: 128, m_max: 512, tol: 1e-10 }
    }
}

impl QuadOptions {
    /// Defaults scaled for a `k`-fold tensor product.
    pub fn for_dim(k: usize) -> Self {
        match k {
            0..=2 => QuadOptions::default(),
            3 => QuadOptions { m0: 64, m_max: 512, tol: 1e-10 },
            _ => QuadOptions { m0: 32, m_max: 128, tol: 1e-10 },
        }
    }
}

/// `Σ Π_A w_{i_A} single(A, z_{i_A}) Π_{A<B} pair(z_{i_A}, z_{i_B})` over the tensor grid.
pub fn tensor_sum<S, P>(rules: &[QuadratureRule], single: S, pair: P) -> C64
where
    S: Fn(usize, C64) -> C64 + Sync,
    P: Fn(C64, C64) -> C64 + Sync,
{
    let k = rules.len();
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let sizes: Vec<usize> = rules.iter().map(|r| r.len()).collect();
    let wf: Vec<Vec<C64>> = rules
        .iter()
        .enumerate()
        .map(|(a, r)| r.nodes.iter().zip(&r.weights).map(|(&z, &w)| w * single(a, z)).collect())
        .collect();
    // pt[a][b] for a < b, row-major in (i_a, i_b)
    let mut pt: Vec<Vec<Vec<C64>>> = vec![vec![Vec::new(); k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let mut tab = Vec::with_capacity(sizes[a] * sizes[b]);
            for &za in &rules[a].nodes {
                for &zb in &rules[b].nodes {
                    tab.push(pair(za, zb));
                }
            }
            pt[a][b] = tab;
        }
    }
    fn level(d: usize, idx: &mut [usize], acc: C64, wf: &[Vec<C64>], pt: &[Vec<Vec<C64>>], sizes: &[usize]) -> C64 {
        let k = sizes.len();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..sizes[d] {
            let mut v = acc * wf[d][i];
            for a in 0..d {
                v *= pt[a][d][idx[a] * sizes[d] + i];
            }
            if d + 1 == k {
                s += v;
            } else {
                idx[d] = i;
                s += level(d + 1, idx, v, wf, pt, sizes);
            }
        }
        s
    }
    let parts = par::map_range(sizes[0], |i0| {
        let v = wf[0][i0];
        if k == 1 {
            return v;
        }
        let mut idx = vec![0usize; k];
        idx[0] = i0;
        level(1, &mut idx, v, &wf, &pt, &sizes)
    });
    parts.into_iter().sum()
}

/// Runs `eval(m)` on the doubling schedule.
pub fn with_doubling<E>(opts: QuadOptions, eval: E) -> Result<MomentValue>
where
    E: Fn(usize) -> Result<C64>,
{
    if opts.m0 < 8 || opts.m_max < opts.m0 {
        return invalid("node schedule needs 8 <= m0 <= m_max");
    }
    let mut m = opts.m0;
    let mut prev = eval(m)?;
    loop {
        let next_m = m * 2;
        if next_m > opts.m_max {
            return Err(Error::NonConvergence(format!(
                "quadrature did not settle below {:.1e} by M = {m} (last value {prev})",
                opts.tol
            )));
        }
        let cur = eval(next_m)?;
        let err = (cur - prev).norm();
        if !cur.re.is_finite() || !cur.im.is_finite() {
            return Err(Error::NonConvergence("non-finite quadrature value".into()));
        }
        if err <= opts.tol * cur.norm().max(1.0) {
            return Ok(MomentValue { value: cur, error: err, nodes: next_m });
        }
        prev = cur;
        m = next_m;
    }
}

/// `(1/(2πi))^k ∮…∮ Π pair Π single dz` on `contours[A]` for `z_{A+1}`.
pub fn nested_quadrature<S, P>(contours: &[ContourSpec], single: S, pair: P, opts: QuadOptions) -> Result<MomentValue>
where
    S: Fn(usize, C64) -> C64 + Sync,
    P: Fn(C64, C64) -> C64 + Sync,
{
    for c in contours {
        c.validate()?;
    }
    with_doubling(opts, |m| {
        let rules: Vec<QuadratureRule> = contours.iter().map(|c| c.rule(m)).collect();
        Ok(tensor_sum(&rules, &single, &pair))
    })
}

/// Constants for the q-TASEP nested circles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QtasepContourOptions {
    /// Log-spacing margin; chosen from `α` when absent.
    pub eta: Option<f64>,
    /// Right crossing is `max a_m + upper_pad`.
    pub upper_pad: f64,
    /// Node grading toward the left crossing.
    pub beta: f64,
}

impl Default for QtasepContourOptions {
    fn default() -> Self {
        QtasepContourOptions { eta: None, upper_pad: 0.5, beta: 0.5 }
    }
}

/// Circles symmetric about the real axis with real crossings `[L_A, U]`,
/// `ln L_k = ln a_min − η`, `ln L_A = ln L_{A+1} + ln q − η`, so that the
/// `z_A` circle strictly contains `q·(z_B circle)` for `B > A`, all `a_m`,
/// and excludes `0` and `α/q`.
pub fn build_qtasep_nested_contours(
    k: usize,
    q: f64,
    a: &[f64],
    alpha: f64,
    opts: QtasepContourOptions,
) -> Result<Vec<ContourSpec>> {
    if k == 0 || a.is_empty() {
        return invalid("need k >= 1 and at least one rate");
    }
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("q must lie in (0,1), got {q}"));
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(0.0, f64::max);
    if a_min <= 0.0 {
        return invalid("rates must be positive");
    }
    let barrier = alpha / q;
    let eta = match opts.eta {
        Some(e) => e,
        None if alpha > 0.0 => {
            let room = (a_min * q.powi(k as i32 - 1) / barrier).ln();
            if room <= 0.0 {
                return Err(Error::Contour(format!(
                    "alpha q^-k = {} is not below min a_m = {a_min}",
                    alpha * q.powi(-(k as i32))
                )));
            }
            (room / (k as f64 + 1.0)).min(0.3)
        }
        None => 0.3,
    };
    let upper = a_max + opts.upper_pad;
    let mut logs = vec![0.0; k];
    logs[k - 1] = a_min.ln() - eta;
    for j in (0..k - 1).rev() {
        logs[j] = logs[j + 1] + q.ln() - eta;
    }
    let contours: Vec<ContourSpec> = logs
        .iter()
        .map(|&l| {
            let lo = l.exp();
            ContourSpec::GradedCircle {
                center: C64::new(0.5 * (lo + upper), 0.0),
                radius: 0.5 * (upper - lo),
                toward: PI,
                beta: opts.beta,
            }
        })
        .collect();
    validate_qtasep_contours(&contours, q, a, alpha)?;
    Ok(contours)
}

/// Smallest signed clearance among the inclusion/exclusion constraints;
/// errors when any constraint fails.
pub fn validate_qtasep_contours(contours: &[ContourSpec], q: f64, a: &[f64], alpha: f64) -> Result<f64> {
    let mut worst = f64::INFINITY;
    let barrier = C64::new(alpha / q, 0.0);
    for (i, c) in contours.iter().enumerate() {
        let (center, radius) = c.disk().ok_or_else(|| Error::Contour("q-TASEP contours must be circles".into()))?;
        for &am in a {
            worst = worst.min(c.clearance(C64::new(am, 0.0)));
        }
        worst = worst.min(-c.clearance(barrier));
        for later in &contours[i + 1..] {
            let (cb, rb) = later.disk().unwrap();
            // outer radius minus the farthest point of q·(later disk)
            worst = worst.min(radius - ((cb * q - center).norm() + rb * q));
        }
    }
    if worst <= 0.0 {
        return Err(Error::Contour(format!("nested q-TASEP contours infeasible (clearance {worst:.3e})")));
    }
    Ok(worst)
}

/// `Π_{m ≤ n} a_m/(a_m − z) · e^{(q−1)tz}`.
pub fn qtasep_factor(params: &QtasepParams, n: usize, t: f64, z: C64) -> C64 {
    let mut v = ((params.q - 1.0) * t * z).exp();
    for m in 1..=n {
        let am = params.rate(m);
        v *= am / (am - z);
    }
    v
}

fn check_multi_index(nvec: &[usize]) -> Result<()> {
    if nvec.is_empty() {
        return invalid("multi-index must be nonempty");
    }
    if nvec.windows(2).any(|w| w[0] < w[1]) {
        return invalid("multi-index must be weakly decreasing");
    }
    Ok(())
}

/// `E[Π_j q^{x_{n_j}(t) + n_j}]` for step (`α = 0`) or half-stationary data.
pub fn qtasep_moment(nvec: &[usize], t: f64, params: &QtasepParams, alpha: f64, opts: QuadOptions) -> Result<MomentValue> {
    check_multi_index(nvec)?;
    let k = nvec.len();
    let q = params.q;
    let nmax = nvec[0];
    if alpha < 0.0 {
        return invalid("alpha must be nonnegative");
    }
    let rates: Vec<f64> = (1..=nmax.max(1)).map(|m| params.rate(m)).collect();
    if alpha > 0.0 && rates.iter().any(|&am| alpha * q.powi(-(k as i32)) >= am) {
        return Err(Error::InvalidArgument("half-stationary data needs alpha q^-k < a_m".into()));
    }
    if k > 4 {
        if alpha == 0.0 && nvec.iter().all(|&n| n == nmax) {
            let mus = qtasep_equal_moments_generating(params, nmax, t, k, 48)?;
            return Ok(mus[k - 1]);
        }
        return Err(Error::TooLarge(format!("nested evaluation supports k <= 4, got {k}")));
    }
    qtasep_u(nvec, t, params, alpha, opts)
}

/// The q-TASEP contour integral at any `n⃗ ∈ Z_{≥0}^k` (`k ≤ 4`), including
/// points outside the physical region.
pub fn qtasep_u(nvec: &[usize], t: f64, params: &QtasepParams, alpha: f64, opts: QuadOptions) -> Result<MomentValue> {
    let k = nvec.len();
    if k == 0 || k > 4 {
        return invalid("contour formula evaluated for 1 <= k <= 4");
    }
    let q = params.q;
    let nmax = nvec.iter().copied().max().unwrap();
    let rates: Vec<f64> = (1..=nmax.max(1)).map(|m| params.rate(m)).collect();
    let contours = build_qtasep_nested_contours(k, q, &rates, alpha, QtasepContourOptions::default())?;
    let beta = alpha / q;
    let pref = (-1f64).powi(k as i32) * q.powi((k * (k - 1) / 2) as i32);
    let single = |j: usize, z: C64| qtasep_factor(params, nvec[j], t, z) / (z - beta);
    let pair = |za: C64, zb: C64| (za - zb) / (za - q * zb);
    let mut opts = opts;
    if opts == QuadOptions::default() {
        opts = QuadOptions::for_dim(k);
    }
    let v = nested_quadrature(&contours, single, pair, opts)?;
    Ok(MomentValue { value: v.value * pref, error: v.error * pref.abs(), ..v })
}

/// Initial value `Π_i Π_{m=n_{i+1}+1}^{n_i} Π_{j=1}^{i} a_m/(a_m − α/q^j)` (with `n_{k+1} = 0`).
pub fn half_stationary_initial(nvec: &[usize], params: &QtasepParams, alpha: f64) -> Result<f64> {
    check_multi_index(nvec)?;
    let k = nvec.len();
    let q = params.q;
    let mut v = 1.0;
    for i in 1..=k {
        let hi = nvec[i - 1];
        let lo = if i < k { nvec[i] } else { 0 };
        for m in lo + 1..=hi {
            let am = params.rate(m);
            for j in 1..=i {
                v *= am / (am - alpha / q.powi(j as i32));
            }
        }
    }
    Ok(v)
}

/// `exp[−z(p−q)² t/((1+z)(p+qz))]`.
pub fn asep_exp_factor(params: &AsepParams, t: f64, z: C64) -> C64 {
    let g = params.p - params.q;
    (-z * g * g * t / ((1.0 + z) * (params.p + params.q * z))).exp()
}

fn theta_factor(tau: f64, theta: f64, z: C64) -> C64 {
    if theta.is_finite() {
        -tau * theta / (z - tau * theta)
    } else {
        C64::new(1.0, 0.0)
    }
}

/// `ξ(z) = (1+z)/(1+z/τ)`.
pub fn xi_map(tau: f64, z: C64) -> C64 {
    (1.0 + z) / (1.0 + z / tau)
}

/// `f(x, z) = exp[…] ξ^{x−1} (τ+z)^{-1} (−τθ)/(z−τθ)`; the last factor is 1 for `θ = ∞`.
pub fn asep_f(params: &AsepParams, theta: f64, x: i64, t: f64, z: C64) -> C64 {
    let tau = params.tau();
    asep_exp_factor(params, t, z) * xi_map(tau, z).powi((x - 1) as i32) / (tau + z) * theta_factor(tau, theta, z)
}

/// `f₂(x, z) = exp[…] ξ^{x} (−τθ)/(z−τθ)`.
pub fn asep_f2(params: &AsepParams, theta: f64, x: i64, t: f64, z: C64) -> C64 {
    let tau = params.tau();
    asep_exp_factor(params, t, z) * xi_map(tau, z).powi(x as i32) * theta_factor(tau, theta, z)
}

/// Minimum Bernoulli density accepted for ASEP contour work.
pub const MIN_RHO: f64 = 0.05;

pub fn theta_of(rho: f64) -> Result<f64> {
    if !(MIN_RHO..=1.0).contains(&rho) {
        return invalid(format!("rho must lie in [{MIN_RHO}, 1], got {rho}"));
    }
    Ok(if rho < 1.0 { rho / (1.0 - rho) } else { f64::INFINITY })
}

/// Constants for ASEP contours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsepContourOptions {
    /// `τ·r` where `C^0_A = r^A C^0`; must exceed 1.
    pub tau_r: f64,
    /// Fraction of the largest admissible `r_0`.
    pub r0_fraction: f64,
    /// Radius of the circle around `−τ`; derived from `τ, θ` when absent.
    pub rho_c: Option<f64>,
}

impl Default for AsepContourOptions {
    fn default() -> Self {
        AsepContourOptions { tau_r: 2.0, r0_fraction: 0.5, rho_c: None }
    }
}

/// Radius of the small circle `C_{−τ}`: it must avoid `−1`, `0`, `τθ` and
/// its own image under multiplication by `τ`.
pub fn minus_tau_radius(tau: f64, theta: f64) -> f64 {
    let mut r = 0.5 * tau * (1.0 - tau) / (1.0 + tau);
    r = r.min(0.25 * (1.0 - tau));
    if theta.is_finite() {
        r = r.min(0.25 * (tau * theta + tau));
    }
    r
}

/// The contour `C_{−τ}` used for every variable of the `Q̃` moment formula.
pub fn minus_tau_contour(tau: f64, theta: f64) -> ContourSpec {
    ContourSpec::circle(C64::new(-tau, 0.0), minus_tau_radius(tau, theta))
}

/// Two-piece contours for `E[τ^{kN_x}]`: `C_A = C_{−τ} ∪ {|z| = r_0 r^A}`.
pub fn build_asep_contours(k: usize, tau: f64, theta: f64, opts: AsepContourOptions) -> Result<Vec<ContourSpec>> {
    if k == 0 {
        return invalid("need k >= 1");
    }
    if !(tau > 0.0 && tau < 1.0) {
        return invalid(format!("tau must lie in (0,1), got {tau}"));
    }
    if opts.tau_r <= 1.0 {
        return invalid("tau·r must exceed 1");
    }
    let rho_c = opts.rho_c.unwrap_or_else(|| minus_tau_radius(tau, theta));
    let r = opts.tau_r / tau;
    let mut cap = tau * (tau - rho_c);
    if theta.is_finite() {
        cap = cap.min(tau * theta);
    }
    let r0 = opts.r0_fraction * cap / r.powi(k as i32);
    let contours: Vec<ContourSpec> = (1..=k)
        .map(|a| {
            ContourSpec::Union(vec![
                ContourSpec::circle(C64::new(-tau, 0.0), rho_c),
                ContourSpec::circle(C64::new(0.0, 0.0), r0 * r.powi(a as i32)),
            ])
        })
        .collect();
    validate_asep_contours(&contours, tau, theta)?;
    Ok(contours)
}

fn circle_parts(c: &ContourSpec) -> Vec<(C64, f64)> {
    match c {
        ContourSpec::Union(parts) => parts.iter().filter_map(|p| p.disk()).collect(),
        other => other.disk().into_iter().collect(),
    }
}

/// Checks that every `z_A` contour contains `0, −τ`, excludes `−1, τθ`, has
/// disjoint components, and keeps `τ·C_B` (`B > A`) outside. Returns the
/// smallest clearance.
pub fn validate_asep_contours(contours: &[ContourSpec], tau: f64, theta: f64) -> Result<f64> {
    let mut worst = f64::INFINITY;
    let outside = |parts: &[(C64, f64)], c: C64, r: f64| -> f64 {
        // clearance of the disk (c, r) from every part (positive when disjoint)
        parts
            .iter()
            .map(|&(pc, pr)| (c - pc).norm() - r - pr)
            .fold(f64::INFINITY, f64::min)
    };
    for (i, c) in contours.iter().enumerate() {
        let parts = circle_parts(c);
        if parts.is_empty() {
            return Err(Error::Contour("ASEP contours must be circles or unions of circles".into()));
        }
        worst = worst.min(c.clearance(C64::new(0.0, 0.0)));
        worst = worst.min(c.clearance(C64::new(-tau, 0.0)));
        worst = worst.min(-c.clearance(C64::new(-1.0, 0.0)));
        if theta.is_finite() {
            worst = worst.min(-c.clearance(C64::new(tau * theta, 0.0)));
        }
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                let (ca, ra) = parts[a];
                let (cb, rb) = parts[b];
                worst = worst.min((ca - cb).norm() - ra - rb);
            }
        }
        for later in &contours[i..] {
            let same = std::ptr::eq(later, c);
            for (cb, rb) in circle_parts(later) {
                let (sc, sr) = (cb * tau, rb * tau);
                if same {
                    // τ·C_{−τ} must not meet C_A; τ·C^0_A sits inside C^0_A harmlessly
                    if (cb + tau).norm() < 1e-12 {
                        worst = worst.min(outside(&parts, sc, sr));
                    }
                } else {
                    // the image circle must avoid the interior of every component
                    for &(pc, pr) in &parts {
                        let d = (sc - pc).norm();
                        let disjoint = d - sr - pr;
                        let encloses = sr - d - pr;
                        worst = worst.min(disjoint.max(encloses));
                    }
                }
            }
        }
    }
    if worst <= 0.0 {
        return Err(Error::Contour(format!("ASEP contours infeasible (clearance {worst:.3e})")));
    }
    Ok(worst)
}

/// `E[Q̃_{x_1}⋯Q̃_{x_k}]` at time `t` for step Bernoulli data with density `ρ`.
pub fn asep_qtilde_moment(xs: &[i64], t: f64, params: &AsepParams, rho: f64, opts: QuadOptions) -> Result<MomentValue> {
    if xs.is_empty() || xs.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("positions must be strictly increasing and nonempty");
    }
    asep_qtilde_u(xs, t, params, rho, opts)
}

/// The `Q̃` contour integral at any `x⃗ ∈ Z^k` (`k ≤ 4`).
pub fn asep_qtilde_u(xs: &[i64], t: f64, params: &AsepParams, rho: f64, opts: QuadOptions) -> Result<MomentValue> {
    let k = xs.len();
    if k == 0 {
        return invalid("need at least one position");
    }
    if k > 4 {
        return Err(Error::TooLarge(format!("nested evaluation supports k <= 4, got {k}")));
    }
    let theta = theta_of(rho)?;
    let tau = params.tau();
    let contour = minus_tau_contour(tau, theta);
    let contours = vec![contour; k];
    let pref = tau.powi((k * (k - 1) / 2) as i32);
    let single = |j: usize, z: C64| asep_f(params, theta, xs[j], t, z);
    let pair = |za: C64, zb: C64| (za - zb) / (za - tau * zb);
    let mut opts = opts;
    if opts == QuadOptions::default() {
        opts = QuadOptions::for_dim(k);
    }
    let v = nested_quadrature(&contours, single, pair, opts)?;
    Ok(MomentValue { value: v.value * pref, error: v.error * pref, ..v })
}

/// `1_{x_1>0} Π_j ρ τ^{k−j} (ρ τ^{k−j+1} + 1 − ρ)^{x_j − x_{j−1} − 1}`, `x_0 = 0`.
pub fn step_bernoulli_qtilde_initial(xs: &[i64], tau: f64, rho: f64) -> f64 {
    if xs.is_empty() || xs[0] <= 0 {
        return if xs.is_empty() { 1.0 } else { 0.0 };
    }
    let k = xs.len();
    let mut v = 1.0;
    let mut prev = 0;
    for (j, &x) in xs.iter().enumerate() {
        let e = (k - j - 1) as i32;
        v *= rho * tau.powi(e) * (rho * tau.powi(e + 1) + 1.0 - rho).powi((x - prev - 1) as i32);
        prev = x;
    }
    v
}

/// `E[τ^{n N_x(0)}] = (ρ τ^n + 1 − ρ)^{max(x,0)}` for step Bernoulli data.
pub fn step_bernoulli_moment_initial(n: usize, x: i64, tau: f64, rho: f64) -> f64 {
    (rho * tau.powi(n as i32) + 1.0 - rho).powi(x.max(0) as i32)
}

/// `E[τ^{n N_x(t)}]` by the nested two-piece contour formula (`n ≤ 4`) or
/// through the `ν̃` decomposition (`n ≤ 12`).
pub fn asep_moment(n: usize, x: i64, t: f64, params: &AsepParams, rho: f64, opts: QuadOptions) -> Result<MomentValue> {
    if n == 0 {
        return Ok(MomentValue::exact(1.0));
    }
    if n <= 4 {
        asep_moment_nested(n, x, t, params, rho, opts)
    } else if n <= 12 {
        asep_moment_decomposed(n, x, t, params, rho, 64).map(|v| v[n])
    } else {
        Err(Error::TooLarge(format!("moment order {n} exceeds 12")))
    }
}

/// Direct nested evaluation with contours `C_{−τ} ∪ r^A C^0`.
pub fn asep_moment_nested(n: usize, x: i64, t: f64, params: &AsepParams, rho: f64, opts: QuadOptions) -> Result<MomentValue> {
    let theta = theta_of(rho)?;
    let tau = params.tau();
    let contours = build_asep_contours(n, tau, theta, AsepContourOptions::default())?;
    let pref = tau.powi((n * (n - 1) / 2) as i32);
    let single = |_: usize, z: C64| asep_f2(params, theta, x, t, z) / z;
    let pair = |za: C64, zb: C64| (za - zb) / (za - tau * zb);
    let mut opts = opts;
    if opts == QuadOptions::default() {
        opts = QuadOptions::for_dim(n);
    }
    let v = nested_quadrature(&contours, single, pair, opts)?;
    Ok(MomentValue { value: v.value * pref, error: v.error * pref, ..v })
}

/// Taylor coefficients `c_0..=c_kmax` of an analytic `f` from `samples`
/// values on the circle `|ζ| = radius`.
pub fn taylor_coefficients<F>(f: F, kmax: usize, radius: f64, samples: usize) -> Vec<C64>
where
    F: Fn(C64) -> C64 + Sync + Send,
{
    let vals = par::map_range(samples, |j| f(C64::from_polar(radius, 2.0 * PI * j as f64 / samples as f64)));
    (0..=kmax)
        .map(|k| {
            let s: C64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (k * j) as f64 / samples as f64))
                .sum();
            s / (samples as f64 * radius.powi(k as i32))
        })
        .collect()
}

/// `c_k = [ζ^k] det(I + ζ A)` on `C_{−τ}` with `A(z, z') = f₂(x, z)/(z − τ z')`.
/// By the Cauchy-determinant symmetrization, `c_k = τ^{k(k−1)/2} ν̃_k/(τ;τ)_k`.
pub fn asep_cauchy_coefficients(x: i64, t: f64, params: &AsepParams, rho: f64, kmax: usize, m: usize) -> Result<Vec<C64>> {
    let theta = theta_of(rho)?;
    let tau = params.tau();
    let rule = minus_tau_contour(tau, theta).rule(m);
    let fz: Vec<C64> = rule.nodes.iter().map(|&z| asep_f2(params, theta, x, t, z)).collect();
    let base: Vec<C64> = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            fz[i] / (rule.nodes[i] - tau * rule.nodes[j]) * rule.weights[j]
        })
        .collect();
    let samples = (2 * kmax + 2).max(32).next_power_of_two();
    Ok(taylor_coefficients(
        |zeta| {
            let a: Vec<C64> = base.iter().map(|&v| v * zeta).collect();
            crate::linalg::det_i_plus(&a, m)
        },
        kmax,
        1.0,
        samples,
    ))
}

/// `E[τ^{n N_x(t)}]` for `n = 0..=nmax` as `Σ_k C(n,k)_τ (τ;τ)_k c_k`, with the
/// coefficients `c_k` from [`asep_cauchy_coefficients`]. Error estimates
/// come from repeating with `2m` nodes.
pub fn asep_moment_decomposed(nmax: usize, x: i64, t: f64, params: &AsepParams, rho: f64, m: usize) -> Result<Vec<MomentValue>> {
    let tau = params.tau();
    let c1 = asep_cauchy_coefficients(x, t, params, rho, nmax, m)?;
    let c2 = asep_cauchy_coefficients(x, t, params, rho, nmax, 2 * m)?;
    let combine = |c: &[C64], n: usize| -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for (k, ck) in c.iter().enumerate().take(n + 1) {
            s += qfunc::q_binomial(n, k, tau)? * qfunc::qpoch_re(tau, tau, k) * ck;
        }
        Ok(s)
    };
    (0..=nmax)
        .map(|n| {
            let a = combine(&c1, n)?;
            let b = combine(&c2, n)?;
            Ok(MomentValue { value: b, error: (a - b).norm(), nodes: 2 * m })
        })
        .collect()
}

/// Which sign convention the partition expansion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionVariant {
    /// `det[1/(w_i q^{λ_i} − w_j)]`, contour around the poles `𝔸`, not 0.
    Qtasep,
    /// `det[−1/(w_i τ^{λ_i} − w_j)]`, contour around `0` and `−τ`.
    Asep,
}

impl PartitionVariant {
    fn sign(self) -> f64 {
        match self {
            PartitionVariant::Qtasep => 1.0,
            PartitionVariant::Asep => -1.0,
        }
    }
}

/// Determinant of a small complex matrix by partial-pivoting elimination.
pub fn small_det(a: &mut [C64], n: usize) -> C64 {
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().partial_cmp(&a[j * n + col].norm()).unwrap())
            .unwrap();
        if a[piv * n + col].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f != C64::new(0.0, 0.0) {
                for c in col..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= f * v;
                }
            }
        }
    }
    det
}

/// `(1/(2πi))^ℓ ∮…∮ det[s/(w_i q^{λ_i} − w_j)] Π_j f(w_j)…f(q^{λ_j−1}w_j) dw_j`.
fn partition_integral<F>(rule: &QuadratureRule, lambda: &Partition, f: &F, q: f64, sign: f64) -> C64
where
    F: Fn(C64) -> C64 + Sync,
{
    let l = lambda.len();
    let m = rule.len();
    let top = lambda.parts[0];
    // g[s-1][i] = w_i Π_{j<s} f(q^j z_i)
    let mut g = vec![vec![C64::new(0.0, 0.0); m]; top];
    for i in 0..m {
        let z = rule.nodes[i];
        let mut acc = rule.weights[i];
        for s in 0..top {
            acc *= f(z * q.powi(s as i32));
            g[s][i] = acc;
        }
    }
    let parts = &lambda.parts;
    let total = m.pow(l as u32);
    let chunks = m;
    let sums = par::map_range(chunks, |i0| {
        let mut s = C64::new(0.0, 0.0);
        let mut idx = vec![0usize; l];
        let mut mat = vec![C64::new(0.0, 0.0); l * l];
        for rest in 0..total / m {
            idx[0] = i0;
            let mut r = rest;
            for slot in idx.iter_mut().skip(1) {
                *slot = r % m;
                r /= m;
            }
            let mut w = C64::new(1.0, 0.0);
            for a in 0..l {
                w *= g[parts[a] - 1][idx[a]];
            }
            for a in 0..l {
                let za = rule.nodes[idx[a]] * q.powi(parts[a] as i32);
                for b in 0..l {
                    mat[a * l + b] = sign / (za - rule.nodes[idx[b]]);
                }
            }
            s += w * small_det(&mut mat, l);
        }
        s
    });
    sums.into_iter().sum()
}

/// `μ_k = k_q! Σ_{λ⊢k} (1/Π m_i!) (1−q)^k ∮…∮ det[±1/(w_i q^{λ_i} − w_j)] Π f(w_j)⋯f(q^{λ_j−1}w_j) dw_j`.
pub fn mu_k_partition_sum<F>(f: F, contour: &ContourSpec, k: usize, q: f64, variant: PartitionVariant, opts: QuadOptions) -> Result<MomentValue>
where
    F: Fn(C64) -> C64 + Sync,
{
    if k == 0 {
        return Ok(MomentValue::exact(1.0));
    }
    contour.validate()?;
    let lambdas = qfunc::partitions(k)?;
    let pref = qfunc::q_factorial(k, q) * (1.0 - q).powi(k as i32);
    with_doubling(opts, |m| {
        let rule = contour.rule(m);
        let mut s = C64::new(0.0, 0.0);
        for lam in &lambdas {
            s += partition_integral(&rule, lam, &f, q, variant.sign()) / lam.multiplicity_factorial();
        }
        Ok(s * pref)
    })
}

/// `μ_1..=μ_kmax` from the Taylor coefficients of `det(I + K¹_ζ)` on
/// `L²({1..kmax} × C)`, `K¹(n, w; n', w') = s(1−q)^n ζ^n f(w)⋯f(q^{n−1}w)/(q^n w − w')`.
pub fn mu_k_generating<F>(f: F, contour: &ContourSpec, kmax: usize, q: f64, variant: PartitionVariant, m: usize) -> Result<Vec<C64>>
where
    F: Fn(C64) -> C64 + Sync,
{
    contour.validate()?;
    let rule = contour.rule(m);
    let dim = kmax * m;
    let sign = variant.sign();
    // rows (n, i), columns (n', j); the entry does not depend on n'
    let mut rows = vec![C64::new(0.0, 0.0); kmax * m * m];
    for i in 0..m {
        let z = rule.nodes[i];
        let mut prod = C64::new(1.0, 0.0);
        for n in 1..=kmax {
            prod *= f(z * q.powi(n as i32 - 1));
            let zn = z * q.powi(n as i32);
            for j in 0..m {
                rows[((n - 1) * m + i) * m + j] = sign * (1.0 - q).powi(n as i32) * prod / (zn - rule.nodes[j]) * rule.weights[j];
            }
        }
    }
    let radius = 0.5 / (1.0 - q);
    let samples = 64;
    let coeffs = taylor_coefficients(
        |zeta| {
            let mut a = vec![C64::new(0.0, 0.0); dim * dim];
            for n in 1..=kmax {
                let zp = zeta.powi(n as i32);
                for i in 0..m {
                    let r = (n - 1) * m + i;
                    for j in 0..m {
                        let v = rows[r * m + j] * zp;
                        for np in 0..kmax {
                            a[r * dim + np * m + j] = v;
                        }
                    }
                }
            }
            crate::linalg::det_i_plus(&a, dim)
        },
        kmax,
        radius,
        samples,
    );
    Ok((1..=kmax).map(|k| coeffs[k] * qfunc::q_factorial(k, q)).collect())
}

/// Single circle for q-TASEP partition sums: contains every `a_m`, excludes 0,
/// and is disjoint from its images under `w ↦ q^j w`.
pub fn qtasep_single_contour(q: f64, a: &[f64]) -> Result<ContourSpec> {
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let lo = a_min * q.powf(1.0 / 3.0);
    let hi = a_max * q.powf(-1.0 / 3.0);
    if !(q * hi < lo && hi < a_min / q) {
        return Err(Error::Contour("rates too spread for a single q-TASEP circle".into()));
    }
    Ok(ContourSpec::circle(C64::new(0.5 * (lo + hi), 0.0), 0.5 * (hi - lo)))
}

/// Single circle for ASEP partition sums: contains `0, −τ`, excludes `−1, τθ`.
pub fn asep_single_contour(tau: f64, theta: f64) -> ContourSpec {
    let a = tau.sqrt();
    let b = if theta.is_finite() { a.min(0.5 * tau * theta) } else { a };
    ContourSpec::circle(C64::new(0.5 * (b - a), 0.0), 0.5 * (a + b))
}

/// `μ_k` for q-TASEP step data at equal indices `n`, `k = 1..=kmax`, via the
/// generating determinant; errors compare `m` against `2m` nodes.
pub fn qtasep_equal_moments_generating(params: &QtasepParams, n: usize, t: f64, kmax: usize, m: usize) -> Result<Vec<MomentValue>> {
    let rates: Vec<f64> = (1..=n.max(1)).map(|j| params.rate(j)).collect();
    let contour = qtasep_single_contour(params.q, &rates)?;
    let f = |z: C64| qtasep_factor(params, n, t, z);
    let a = mu_k_generating(f, &contour, kmax, params.q, PartitionVariant::Qtasep, m)?;
    let b = mu_k_generating(f, &contour, kmax, params.q, PartitionVariant::Qtasep, 2 * m)?;
    Ok(a.iter().zip(&b).map(|(x, y)| MomentValue { value: *y, error: (x - y).norm(), nodes: 2 * m }).collect())
}

/// Outcome of the `μ̃_k` consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuTildeReport {
    pub k: usize,
    pub mu_tilde_nested: C64,
    pub mu_tilde_relation: C64,
    pub mu_tilde_symmetrized: C64,
    pub relation_residual: f64,
    pub symmetrized_residual: f64,
}

/// For `f` with poles at the rates `a` only (and `f(0) = 1`): computes `μ̃_k`
/// on a common circle around `0` and all `a_m`, the `μ_j` on nested circles
/// excluding 0, then compares `μ̃_k` against
/// `(−1)^k q^{k(k−1)/2} Σ_j C(k,j)_{1/q} (−1)^j q^{−j(j−1)/2} μ_j`
/// and against the symmetrized single-contour determinant formula.
pub fn mu_tilde_relation_check<F>(f: F, q: f64, a: &[f64], k: usize, opts: QuadOptions) -> Result<MuTildeReport>
where
    F: Fn(C64) -> C64 + Sync,
{
    if k == 0 || k > 4 {
        return invalid("relation check supports 1 <= k <= 4");
    }
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let big = ContourSpec::circle(C64::new(0.0, 0.0), a_max + 0.5);
    let pair = |za: C64, zb: C64| (za - zb) / (za - q * zb);
    let sign_k = |k: usize| (-1f64).powi(k as i32) * q.powi((k * (k.saturating_sub(1)) / 2) as i32);
    let mu_tilde = nested_quadrature(&vec![big.clone(); k], |_, z| f(z) / z, pair, opts)?.value * sign_k(k);
    let mut mus = vec![C64::new(1.0, 0.0)];
    for j in 1..=k {
        let contours = build_qtasep_nested_contours(j, q, a, 0.0, QtasepContourOptions::default())?;
        mus.push(nested_quadrature(&contours, |_, z| f(z) / z, pair, opts)?.value * sign_k(j));
    }
    let mut rel = C64::new(0.0, 0.0);
    for (j, mu) in mus.iter().enumerate() {
        let b = qfunc::q_binomial_inv_base(k, j, q)?;
        rel += b * (-1f64).powi(j as i32) * q.powf(-((j * j.saturating_sub(1)) as f64) / 2.0) * mu;
    }
    rel *= sign_k(k);
    let kfact: f64 = (1..=k).map(|j| j as f64).product();
    let pref = qfunc::q_factorial(k, q) / kfact * (1.0 - 1.0 / q).powi(k as i32);
    let sym = with_doubling(opts, |m| {
        let rule = big.rule(m);
        let lam = Partition::from_parts(vec![1; k]);
        // det[1/(w_i q^{-1} − w_j)] is the λ = 1^k integrand with q replaced by 1/q
        Ok(partition_integral(&rule, &lam, &f, 1.0 / q, 1.0))
    })?
    .value
        * pref;
    Ok(MuTildeReport {
        k,
        mu_tilde_nested: mu_tilde,
        mu_tilde_relation: rel,
        mu_tilde_symmetrized: sym,
        relation_residual: (mu_tilde - rel).norm(),
        symmetrized_residual: (mu_tilde - sym).norm(),
    })
}
