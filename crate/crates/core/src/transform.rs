//! The e_q-Laplace transform `f̂(ζ) = Σ_n f(n)/(ζ q^n; q)_∞`, its contour
//! inversion, and one-point distributions recovered from determinants.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fredholm::{self, DetOptions, KernelSpec};
use crate::par;
use crate::qfunc::qpoch_inf;

/// Probability mass function on `m_min, m_min + 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub m_min: i64,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn new(m_min: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !p.is_finite() || p < -1e-8) {
            return invalid("probabilities must be finite and nonnegative");
        }
        if probs.iter().sum::<f64>() > 1.0 + 1e-8 {
            return invalid("probabilities sum above 1");
        }
        Ok(Pmf { m_min, probs })
    }
    pub fn get(&self, m: i64) -> f64 {
        let k = m - self.m_min;
        if k < 0 {
            return 0.0;
        }
        self.probs.get(k as usize).copied().unwrap_or(0.0)
    }
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| (self.m_min + k as i64) as f64 * p).sum()
    }
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(k, &p)| (self.m_min + k as i64, p))
    }
}

/// `Σ_n f(n)/(ζ q^n; q)_∞` by direct summation.
pub fn eq_laplace_forward(pmf: &Pmf, zeta: C64, q: f64) -> Result<C64> {
    if !(0.0 < q && q < 1.0) {
        return invalid("q must lie in (0,1)");
    }
    let mut s = C64::new(0.0, 0.0);
    for (n, p) in pmf.support() {
        if p == 0.0 {
            continue;
        }
        let den = qpoch_inf(zeta * q.powi(n as i32), q);
        if den.norm() < 1e-13 {
            return Err(Error::NearPole(format!("zeta = {zeta} sits on a pole of the transform")));
        }
        s += p / den;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertOptions {
    /// Initial trapezoid node count on the circle.
    pub nodes: usize,
    pub max_nodes: usize,
    pub tol: f64,
    /// Circle radius `q^{−m−offset}`; any offset in `(0, 1)` encloses exactly the right poles.
    pub offset: f64,
}

impl Default for InvertOptions {
    fn default() -> Self {
        InvertOptions { nodes: 32, max_nodes: 1024, tol: 1e-10, offset: 0.5 }
    }
}

/// Inverted value with the difference between the last two node counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inverted {
    pub value: f64,
    pub imag: f64,
    pub error: f64,
    pub nodes: usize,
}

/// `f(m) = −q^m (1/2πi)∮ (q^{m+1}ζ; q)_∞ f̂(ζ) dζ` over `|ζ| = q^{−m−offset}`.
///
/// The nodes are nested under doubling (a fixed angular offset keeps them off
/// `ℝ₊`), so each doubling only evaluates `f̂` at the new nodes.
pub fn eq_laplace_invert<F>(fhat: F, m: i64, q: f64, opts: InvertOptions) -> Result<Inverted>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    if !(0.0 < q && q < 1.0) {
        return invalid("q must lie in (0,1)");
    }
    if m < 0 {
        return invalid("inversion index must be nonnegative");
    }
    if !(0.0 < opts.offset && opts.offset < 1.0) {
        return invalid("radius offset must lie in (0,1)");
    }
    if opts.nodes < 4 {
        return invalid("need at least 4 nodes");
    }
    let radius = q.powf(-(m as f64) - opts.offset);
    let qm1 = q.powi(m as i32 + 1);
    let phase0 = PI / (2.0 * opts.max_nodes as f64);
    let integrand = |u: C64| -> Result<C64> {
        let zeta = radius * u;
        // dζ/(2πi) = ζ dθ/2π
        Ok(qpoch_inf(qm1 * zeta, q) * fhat(zeta)? * zeta)
    };
    let node = |j: usize, n: usize| C64::from_polar(1.0, phase0 + 2.0 * PI * j as f64 / n as f64);
    let mut n = opts.nodes;
    let vals: Vec<Result<C64>> = par::map_range(n, |j| integrand(node(j, n)));
    let mut sum: C64 = vals.into_iter().sum::<Result<C64>>()?;
    let mut prev = -q.powi(m as i32) * sum / n as f64;
    loop {
        if 2 * n > opts.max_nodes {
            return Err(Error::NonConvergence(format!("inversion at m = {m} not stable to {:.1e} with {n} nodes", opts.tol)));
        }
        let fresh: Vec<Result<C64>> = par::map_range(n, |j| integrand(node(2 * j + 1, 2 * n)));
        sum += fresh.into_iter().sum::<Result<C64>>()?;
        n *= 2;
        let cur = -q.powi(m as i32) * sum / n as f64;
        let err = (cur - prev).norm();
        if err <= opts.tol {
            return Ok(Inverted { value: cur.re, imag: cur.im, error: err, nodes: n });
        }
        prev = cur;
    }
}

/// Summary of a recovered distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub pmf: Pmf,
    pub errors: Vec<f64>,
    pub normalization_defect: f64,
}

fn recover<F>(fhat: F, q: f64, ks: std::ops::RangeInclusive<i64>, m_min: i64, opts: InvertOptions) -> Result<Recovered>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let mut probs = Vec::new();
    let mut errors = Vec::new();
    for k in ks {
        let v = eq_laplace_invert(&fhat, k, q, opts)?;
        probs.push(v.value);
        errors.push(v.error);
    }
    if probs.iter().any(|&p| p < -1e-6) {
        return Err(Error::NonConvergence("recovered probabilities are negative beyond tolerance".into()));
    }
    let defect = 1.0 - probs.iter().sum::<f64>();
    let pmf = Pmf { m_min, probs: probs.iter().map(|p| p.max(0.0)).collect() };
    Ok(Recovered { pmf, errors, normalization_defect: defect })
}

/// `P(N_x(t) = m)` for `0 ≤ m ≤ m_max`, ASEP with step–Bernoulli(ρ) data,
/// from the Mellin–Barnes determinant.
pub fn recover_pmf_asep(x: i64, t: f64, tau: f64, rho: f64, m_max: usize, det: DetOptions, inv: InvertOptions) -> Result<Recovered> {
    let spec = KernelSpec::asep_mb(x, t, tau, rho)?;
    let fhat = |zeta: C64| fredholm::transform_via_mb(&spec, zeta, &det).map(|d| d.value);
    recover(fhat, tau, 0..=m_max as i64, 0, inv)
}

/// `P(x_n(t) = m)` for q-TASEP step data, `m` in `m_lo..=m_hi` (`m ≥ −n`),
/// from the Mellin–Barnes determinant of `q^{x_n + n}`.
#[allow(clippy::too_many_arguments)]
pub fn recover_pmf_qtasep(n: usize, t: f64, q: f64, a: Vec<f64>, m_lo: i64, m_hi: i64, det: DetOptions, inv: InvertOptions) -> Result<Recovered> {
    let shift = n as i64;
    if m_lo < -shift || m_hi < m_lo {
        return invalid(format!("need -n <= m_lo <= m_hi, got {m_lo}..={m_hi}"));
    }
    let spec = KernelSpec::qtasep_mb(n, t, q, a)?;
    let fhat = |zeta: C64| fredholm::transform_via_mb(&spec, zeta, &det).map(|d| d.value);
    recover(fhat, q, (m_lo + shift)..=(m_hi + shift), m_lo, inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses() {
        let q = 0.4;
        let zeta = C64::new(0.3, -0.7);
        let d0 = Pmf::new(0, vec![1.0]).unwrap();
        let d1 = Pmf::new(0, vec![0.0, 1.0]).unwrap();
        assert!((eq_laplace_forward(&d0, zeta, q).unwrap() - 1.0 / qpoch_inf(zeta, q)).norm() < 1e-15);
        assert!((eq_laplace_forward(&d1, zeta, q).unwrap() - 1.0 / qpoch_inf(zeta * q, q)).norm() < 1e-15);
        let mix = Pmf::new(0, vec![0.5, 0.5]).unwrap();
        let lhs = eq_laplace_forward(&mix, zeta, q).unwrap();
        let rhs = 0.5 * eq_laplace_forward(&d0, zeta, q).unwrap() + 0.5 * eq_laplace_forward(&d1, zeta, q).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn invert_point_mass() {
        let q = 0.4;
        let d0 = Pmf::new(0, vec![1.0]).unwrap();
        let f = |z: C64| eq_laplace_forward(&d0, z, q);
        assert!((eq_laplace_invert(f, 0, q, InvertOptions::default()).unwrap().value - 1.0).abs() < 1e-8);
        assert!(eq_laplace_invert(f, 1, q, InvertOptions::default()).unwrap().value.abs() < 1e-8);
    }
}
