//! q-deformed special functions, integer partitions, and the symmetrization
//! identities used to collapse nested contour integrals onto a single contour.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Deformation parameter. The same type carries `τ = p/q` for ASEP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QParams {
    pub q: f64,
}

impl QParams {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return invalid(format!("q must lie in [0,1), got {q}"));
        }
        Ok(QParams { q })
    }
}

/// Length of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Len {
    Finite(usize),
    Infinite,
}

/// `(a;q)_n = (1-a)(1-aq)…(1-aq^{n-1})`, with `n = ∞` allowed.
pub fn q_pochhammer(a: C64, q: f64, n: Len) -> C64 {
    match n {
        Len::Finite(n) => {
            let mut p = C64::new(1.0, 0.0);
            let mut aq = a;
            for _ in 0..n {
                p *= 1.0 - aq;
                aq *= q;
            }
            p
        }
        Len::Infinite => qpoch_inf(a, q),
    }
}

/// `(a;q)_∞`, truncated at the first `m` with `|a| q^m < 1e-16 (1-q)`.
pub fn qpoch_inf(a: C64, q: f64) -> C64 {
    let tol = 1e-16 * (1.0 - q);
    let mut p = C64::new(1.0, 0.0);
    let mut aq = a;
    while aq.norm() >= tol {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// Real-argument `(a;q)_∞`.
pub fn qpoch_inf_re(a: f64, q: f64) -> f64 {
    let tol = 1e-16 * (1.0 - q);
    let mut p = 1.0;
    let mut aq = a;
    while aq.abs() >= tol {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// Real-argument finite `(a;q)_n`.
pub fn qpoch_re(a: f64, q: f64, n: usize) -> f64 {
    let mut p = 1.0;
    let mut aq = a;
    for _ in 0..n {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// `n_q! = (q;q)_n / (1-q)^n = Π_{j≤n} (1 + q + … + q^{j-1})`.
pub fn q_factorial(n: usize, q: f64) -> f64 {
    let mut f = 1.0;
    let mut qj = 1.0;
    let mut s = 0.0;
    for _ in 0..n {
        s += qj;
        qj *= q;
        f *= s;
    }
    f
}

/// Gaussian binomial `C(n,k)_q`.
pub fn q_binomial(n: usize, k: usize, q: f64) -> Result<f64> {
    if k > n {
        return invalid(format!("q_binomial needs k <= n, got k={k}, n={n}"));
    }
    let k = k.min(n - k);
    let mut v = 1.0;
    for j in 1..=k {
        v *= (1.0 - q.powi((n - k + j) as i32)) / (1.0 - q.powi(j as i32));
    }
    Ok(v)
}

/// Gaussian binomial in the inverse base, `C(n,k)_{1/q} = q^{-k(n-k)} C(n,k)_q`.
pub fn q_binomial_inv_base(n: usize, k: usize, q: f64) -> Result<f64> {
    let b = q_binomial(n, k, q)?;
    Ok(b * q.powi(-((k * (n - k)) as i32)))
}

fn check_pole_distance(x: C64, q: f64) -> Result<()> {
    let tol = 1e-16 * (1.0 - q);
    let mut aq = x;
    let mut m = 0usize;
    while aq.norm() >= tol {
        if (1.0 - aq).norm() < 1e-13 {
            return Err(Error::NearPole(format!(
                "(1-q)x = {x} sits on q^-{m} (q = {q})"
            )));
        }
        aq *= q;
        m += 1;
    }
    Ok(())
}

/// `e_q(x) = 1/((1-q)x;q)_∞`.
pub fn e_q(x: C64, q: f64) -> Result<C64> {
    let y = x * (1.0 - q);
    check_pole_distance(y, q)?;
    Ok(1.0 / qpoch_inf(y, q))
}

/// `E_q(x) = (-(1-q)x;q)_∞`.
pub fn big_e_q(x: C64, q: f64) -> C64 {
    qpoch_inf(-x * (1.0 - q), q)
}

/// An integer partition `λ_1 ≥ λ_2 ≥ … > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub parts: Vec<usize>,
    /// `multiplicities[i-1]` counts the parts equal to `i`.
    pub multiplicities: Vec<usize>,
}

impl Partition {
    pub fn from_parts(mut parts: Vec<usize>) -> Self {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        parts.retain(|&p| p > 0);
        let top = parts.first().copied().unwrap_or(0);
        let mut multiplicities = vec![0; top];
        for &p in &parts {
            multiplicities[p - 1] += 1;
        }
        Partition { parts, multiplicities }
    }
    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }
    pub fn len(&self) -> usize {
        self.parts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
    /// `m_1! m_2! …`
    pub fn multiplicity_factorial(&self) -> f64 {
        self.multiplicities
            .iter()
            .map(|&m| (1..=m).map(|j| j as f64).product::<f64>())
            .product()
    }
}

pub const DEFAULT_PARTITION_BOUND: usize = 20;

/// Every partition of `k` once, in reverse lexicographic order.
pub fn partitions(k: usize) -> Result<Vec<Partition>> {
    partitions_bounded(k, DEFAULT_PARTITION_BOUND)
}

pub fn partitions_bounded(k: usize, bound: usize) -> Result<Vec<Partition>> {
    if k > bound {
        return invalid(format!("partition weight {k} exceeds bound {bound}"));
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition::from_parts(cur.clone()));
            return;
        }
        for p in (1..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    rec(k, k, &mut cur, &mut out);
    Ok(out)
}

/// All permutations of `0..k` (Heap's algorithm).
pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..k).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Residuals of the two symmetrization identities, each computed by explicit
/// summation over `S_k` against the Cauchy-determinant closed form.
///
/// First: `Σ_σ Π_{A<B} (z_σA − z_σB)/(z_σA − τ z_σB) = (τ;τ)_k τ^{-k(k-1)/2} z_1⋯z_k det[1/(z_i − τ z_j)]`.
/// Second, with `ξ = (1+z)/(1+z/τ)`: the same sum weighted by `Π_i 1/(ξ_σ(1)⋯ξ_σ(i) − 1)`
/// equals `(−1)^k τ^{-k(k-1)/2} det[1/(z_i − τ z_j)] Π (τ + z_i)`.
pub fn check_symmetrization(z: &[C64], tau: f64) -> Result<(f64, f64)> {
    let k = z.len();
    if k == 0 || k > 6 {
        return invalid(format!("symmetrization check supports 1 <= k <= 6, got {k}"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return invalid(format!("tau must lie in (0,1), got {tau}"));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && (z[i] - z[j]).norm() < 1e-12 {
                return Err(Error::IllConditioned("coincident points".into()));
            }
            if (z[i] - tau * z[j]).norm() < 1e-12 {
                return Err(Error::IllConditioned("z_i = tau z_j".into()));
            }
        }
    }
    let xi: Vec<C64> = z.iter().map(|&zi| (1.0 + zi) / (1.0 + zi / tau)).collect();
    let mut lhs1 = C64::new(0.0, 0.0);
    let mut lhs2 = C64::new(0.0, 0.0);
    for s in permutations(k) {
        let mut prod = C64::new(1.0, 0.0);
        for a in 0..k {
            for b in (a + 1)..k {
                prod *= (z[s[a]] - z[s[b]]) / (z[s[a]] - tau * z[s[b]]);
            }
        }
        lhs1 += prod;
        let mut xp = C64::new(1.0, 0.0);
        let mut w = C64::new(1.0, 0.0);
        for &si in &s {
            xp *= xi[si];
            let d = xp - 1.0;
            if d.norm() < 1e-12 {
                return Err(Error::IllConditioned("xi product equals 1".into()));
            }
            w /= d;
        }
        lhs2 += prod * w;
    }
    let mut m = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            m.push(1.0 / (z[i] - tau * z[j]));
        }
    }
    let d = linalg::det(&m, k);
    let half = (k * (k - 1) / 2) as i32;
    let zprod: C64 = z.iter().product();
    let rhs1 = qpoch_re(tau, tau, k) * tau.powi(-half) * zprod * d;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let tz: C64 = z.iter().map(|&zi| tau + zi).product();
    let rhs2 = sign * tau.powi(-half) * d * tz;
    Ok(((lhs1 - rhs1).norm(), (lhs2 - rhs2).norm()))
}
