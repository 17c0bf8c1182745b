//! Duality functionals, generator actions, and the dual finite chains.
//!
//! q-TASEP `x⃗` is dual to the q-TAZRP `y⃗` through `H(x,y) = Π_{i=0}^N q^{(x_i+i) y_i}`
//! (zero as soon as `y_0 > 0`). ASEP occupations `η` are dual to the
//! k-particle process with left jumps at rate `p` and right jumps at rate `q`
//! through `H̃ = Π Q̃_{x_i}` (general bond rates) and `H = Π Q_{x_i}` (`a ≡ 1`).

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, SparseMatrix};
use crate::moments::{self, QuadOptions};
use crate::markov::{
    self, AsepParams, InitialData, OccupancyConfig, ParticleConfig, QtasepParams, ZrpConfig,
};

/// Which pairing functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualityFunctional {
    QtasepH { q: f64 },
    AsepH { tau: f64 },
    AsepTildeH { tau: f64 },
}

/// `H(x⃗, y⃗) = Π_{i=0}^N q^{(x_i + i) y_i}` with `x_0 = +∞`.
pub fn qtasep_h(q: f64, x: &ParticleConfig, y: &ZrpConfig) -> Result<f64> {
    if y.counts.len() != x.n() + 1 {
        return invalid(format!(
            "TAZRP state needs N + 1 = {} sites, got {}",
            x.n() + 1,
            y.counts.len()
        ));
    }
    if y.counts[0] > 0 {
        return Ok(0.0);
    }
    let mut e = 0i64;
    for i in 1..y.counts.len() {
        e += (x.positions[i - 1] + i as i64) * y.counts[i] as i64;
    }
    Ok(q.powi(e as i32))
}

/// `Q_x(η) = τ^{N_x(η)}`.
pub fn q_x(tau: f64, eta: &OccupancyConfig, x: i64) -> f64 {
    tau.powi(eta.n_x(x) as i32)
}

/// `Q̃_x(η) = τ^{N_{x-1}(η)} η_x`.
pub fn q_tilde_x(tau: f64, eta: &OccupancyConfig, x: i64) -> f64 {
    if eta.eta(x) == 0 {
        0.0
    } else {
        tau.powi(eta.n_x(x - 1) as i32)
    }
}

/// `Π Q_{x_i}(η)`.
pub fn asep_h(tau: f64, eta: &OccupancyConfig, xs: &[i64]) -> f64 {
    xs.iter().map(|&x| q_x(tau, eta, x)).product()
}

/// `Π Q̃_{x_i}(η)`.
pub fn asep_tilde_h(tau: f64, eta: &OccupancyConfig, xs: &[i64]) -> f64 {
    xs.iter().map(|&x| q_tilde_x(tau, eta, x)).product()
}

/// Jumps of q-TASEP from `x` with their rates.
pub fn qtasep_moves(params: &QtasepParams, x: &ParticleConfig) -> Vec<(ParticleConfig, f64)> {
    let mut out = Vec::new();
    for i in 1..=x.n() {
        let r = params.jump_rate(i, x.gap(i));
        if r > 0.0 {
            let mut xp = x.clone();
            xp.positions[i - 1] += 1;
            out.push((xp, r));
        }
    }
    out
}

/// Jumps of the q-TAZRP from `y` with their rates.
pub fn tazrp_moves(params: &QtasepParams, y: &ZrpConfig) -> Vec<(ZrpConfig, f64)> {
    let mut out = Vec::new();
    for i in 1..y.counts.len() {
        if y.counts[i] > 0 {
            let mut t = y.clone();
            t.counts[i] -= 1;
            t.counts[i - 1] += 1;
            out.push((t, params.rate(i) * (1.0 - params.q.powi(y.counts[i] as i32))));
        }
    }
    out
}

/// Σ rate·(f(s') − f(s)) together with Σ rate·(|f(s')| + |f(s)|).
fn apply_moves<S, F: Fn(&S) -> f64>(s: &S, moves: &[(S, f64)], f: F) -> (f64, f64) {
    let f0 = f(s);
    moves.iter().fold((0.0, 0.0), |(v, sc), (t, r)| {
        let ft = f(t);
        (v + r * (ft - f0), sc + r * (ft.abs() + f0.abs()))
    })
}

/// `(L^{q-TASEP} f)(x) = Σ_i a_i (1 − q^{x_{i−1} − x_i − 1}) (f(x_i^+) − f(x))`.
pub fn apply_qtasep_generator<F: Fn(&ParticleConfig) -> f64>(params: &QtasepParams, x: &ParticleConfig, f: F) -> f64 {
    apply_moves(x, &qtasep_moves(params, x), f).0
}

/// `(L^{TAZRP} f)(y) = Σ_{i=1}^N a_i (1 − q^{y_i}) (f(y^{i,i−1}) − f(y))`.
pub fn apply_tazrp_generator<F: Fn(&ZrpConfig) -> f64>(params: &QtasepParams, y: &ZrpConfig, f: F) -> f64 {
    apply_moves(y, &tazrp_moves(params, y), f).0
}

/// `(L^{occ} f)(η) = Σ_y a_y [p η_y(1−η_{y+1}) + q(1−η_y)η_{y+1}] (f(η^{y,y+1}) − f(η))`,
/// summed over bonds `y ∈ [lo, hi]`. The configuration is extended to cover
/// those bonds using its outside conventions.
pub fn apply_occupation_generator<F: Fn(&OccupancyConfig) -> f64>(
    params: &AsepParams,
    eta: &OccupancyConfig,
    lo: i64,
    hi: i64,
    f: F,
) -> f64 {
    let base = extend(eta, lo, hi + 1);
    let f0 = f(&base);
    let mut acc = 0.0;
    for y in lo..=hi {
        let (a, b) = (base.eta(y), base.eta(y + 1));
        let r = params.bonds.rate(y)
            * match (a, b) {
                (1, 0) => params.p,
                (0, 1) => params.q,
                _ => 0.0,
            };
        if r == 0.0 {
            continue;
        }
        let mut sw = base.clone();
        let k = (y - sw.left) as usize;
        sw.occ.swap(k, k + 1);
        acc += r * (f(&sw) - f0);
    }
    acc
}

fn extend(eta: &OccupancyConfig, lo: i64, hi: i64) -> OccupancyConfig {
    let left = lo.min(eta.left);
    let right = hi.max(eta.right());
    let occ = (left..=right).map(|x| eta.eta(x)).collect();
    OccupancyConfig { left, occ, right_full: eta.right_full }
}

/// Moves of the dual particle process: left-most particles of each cluster
/// step left at rate `a_{x_i−1} p`, right-most ones step right at rate `a_{x_i} q`.
pub fn particle_moves(params: &AsepParams, xs: &[i64]) -> Vec<(Vec<i64>, f64)> {
    let k = xs.len();
    let mut out = Vec::new();
    for i in 0..k {
        if i == 0 || xs[i - 1] < xs[i] - 1 {
            let mut m = xs.to_vec();
            m[i] -= 1;
            out.push((m, params.bonds.rate(xs[i] - 1) * params.p));
        }
        if i + 1 == k || xs[i + 1] > xs[i] + 1 {
            let mut m = xs.to_vec();
            m[i] += 1;
            out.push((m, params.bonds.rate(xs[i]) * params.q));
        }
    }
    out
}

/// `(L^{part} f)(x⃗) = Σ_{i∈ℓ(x⃗)} a_{x_i−1} p [f(x⃗_i^−) − f(x⃗)] + Σ_{i∈r(x⃗)} a_{x_i} q [f(x⃗_i^+) − f(x⃗)]`.
pub fn apply_particle_generator<F: Fn(&[i64]) -> f64>(params: &AsepParams, xs: &[i64], f: F) -> f64 {
    let moves = particle_moves(params, xs);
    let xs = xs.to_vec();
    apply_moves(&xs, &moves, |v: &Vec<i64>| f(v)).0
}

/// Residual of `L^{q-TASEP} H(·,y)(x) = L^{TAZRP} H(x,·)(y)`, divided by
/// `max(1, Σ |rate·H|)` over both sides.
pub fn qtasep_generator_residual(params: &QtasepParams, x: &ParticleConfig, y: &ZrpConfig) -> Result<f64> {
    qtasep_h(params.q, x, y)?;
    let h = |xx: &ParticleConfig, yy: &ZrpConfig| qtasep_h(params.q, xx, yy).unwrap_or(f64::NAN);
    let (l, sl) = apply_moves(x, &qtasep_moves(params, x), |xx| h(xx, y));
    let (r, sr) = apply_moves(y, &tazrp_moves(params, y), |yy| h(x, yy));
    Ok((l - r).abs() / (sl + sr).max(1.0))
}

/// Residual of `L^{occ} F(·,x⃗)(η) = L^{part} F(η,·)(x⃗)` for `F = H̃` (`tilde = true`) or `H`.
/// The identity for `H̃` needs `(q − p)(a_x − a_{x−1}) = 0` around each cluster
/// end, so it is exact for uniform bonds only.
pub fn asep_generator_residual(params: &AsepParams, eta: &OccupancyConfig, xs: &[i64], tilde: bool) -> f64 {
    let tau = params.tau();
    let func = |e: &OccupancyConfig, x: &[i64]| if tilde { asep_tilde_h(tau, e, x) } else { asep_h(tau, e, x) };
    let lo = eta.left.min(xs[0]) - 2;
    let hi = *xs.last().unwrap() + 1;
    let lhs = apply_occupation_generator(params, eta, lo, hi, |e| func(e, xs));
    let rhs = apply_particle_generator(params, xs, |x| func(eta, x));
    (lhs - rhs).abs()
}

/// Enumerated finite state space with a sparse (sub-)generator.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix<S: Eq + Hash + Clone> {
    pub states: Vec<S>,
    pub index: HashMap<S, usize>,
    pub matrix: SparseMatrix,
}

pub const DEFAULT_STATE_CAP: usize = 200_000;

impl<S: Eq + Hash + Clone> GeneratorMatrix<S> {
    /// Builds `L` from `transitions(s) = [(s', rate)]`. Targets outside
    /// `states` are treated as killing (their value is pinned to 0).
    pub fn from_transitions<T>(states: Vec<S>, transitions: T, cap: usize) -> Result<Self>
    where
        T: Fn(&S) -> Vec<(S, f64)>,
    {
        if states.len() > cap {
            return Err(Error::TooLarge(format!("{} states exceed cap {cap}", states.len())));
        }
        let index: HashMap<S, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let rows = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut row = Vec::new();
                let mut out = 0.0;
                for (t, r) in transitions(s) {
                    out += r;
                    if let Some(&j) = index.get(&t) {
                        row.push((j, r));
                    }
                }
                row.push((i, -out));
                row
            })
            .collect();
        Ok(GeneratorMatrix { states, index, matrix: SparseMatrix::from_rows(rows) })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// `(L h)(s)` for every state.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(h)
    }
}

/// All compositions of `k` into `parts` nonnegative parts, lexicographically.
fn compositions(k: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(pos: usize, rem: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = rem;
            out.push(cur.clone());
            return;
        }
        for v in 0..=rem {
            cur[pos] = v;
            rec(pos + 1, rem - v, cur, out);
        }
    }
    if parts > 0 {
        rec(0, k, &mut cur, &mut out);
    }
    out
}

/// The TAZRP with `k` particles on sites `1..N`, restricted to `y_0 = 0`;
/// moves into site 0 kill the state, which pins the `y_0 > 0` sector to 0.
pub fn tazrp_dual_generator(n_sites: usize, k: u32, params: &QtasepParams) -> Result<GeneratorMatrix<ZrpConfig>> {
    let states: Vec<ZrpConfig> = compositions(k, n_sites)
        .into_iter()
        .map(|c| {
            let mut counts = vec![0];
            counts.extend(c);
            ZrpConfig { counts }
        })
        .collect();
    GeneratorMatrix::from_transitions(states, |y| tazrp_moves(params, y), DEFAULT_STATE_CAP)
}

/// The dual ASEP particle process (`L^{part}`) with `k` particles confined to
/// `[lo, hi]`; jumps leaving the window are dropped as killing.
pub fn asep_particle_generator(k: usize, lo: i64, hi: i64, params: &AsepParams) -> Result<GeneratorMatrix<Vec<i64>>> {
    if hi < lo || k == 0 || k as i64 > hi - lo + 1 {
        return invalid("window cannot hold the requested particles");
    }
    let w = (hi - lo + 1) as usize;
    let count = binomial(w, k);
    if count > DEFAULT_STATE_CAP as f64 {
        return Err(Error::TooLarge(format!("{count} states exceed cap {DEFAULT_STATE_CAP}")));
    }
    let mut states = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: i64, hi: i64, k: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..=hi {
            cur.push(x);
            rec(x + 1, hi, k, cur, out);
            cur.pop();
        }
    }
    rec(lo, hi, k, &mut cur, &mut states);
    states.sort();
    GeneratorMatrix::from_transitions(states, |xs| particle_moves(params, xs), DEFAULT_STATE_CAP)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Dense exponential below this dimension, uniformization above.
pub const DENSE_EXPM_LIMIT: usize = 400;

/// `h(t) = exp(tL) h0`.
pub fn evolve_true_equation<S: Eq + Hash + Clone>(gen: &GeneratorMatrix<S>, h0: &[f64], t: f64) -> Result<Vec<f64>> {
    if h0.len() != gen.dim() {
        return invalid("initial vector does not match the state space");
    }
    if t < 0.0 {
        return invalid("time must be nonnegative");
    }
    if t == 0.0 {
        return Ok(h0.to_vec());
    }
    if gen.dim() <= DENSE_EXPM_LIMIT {
        let e = linalg::expm(&(gen.matrix.to_dense() * t));
        Ok((e * DVector::from_column_slice(h0)).as_slice().to_vec())
    } else {
        Ok(linalg::expm_action_uniformized(&gen.matrix, h0, t, 1e-15))
    }
}

/// Converts `n⃗ = (n_1 ≥ … ≥ n_k)` into TAZRP occupation numbers on `0..N`.
pub fn multi_index_to_zrp(nvec: &[usize], n_sites: usize) -> Result<ZrpConfig> {
    if nvec.windows(2).any(|w| w[0] < w[1]) {
        return invalid("multi-index must be weakly decreasing");
    }
    let mut counts = vec![0u32; n_sites + 1];
    for &n in nvec {
        if n > n_sites {
            return invalid(format!("index {n} exceeds N = {n_sites}"));
        }
        counts[n] += 1;
    }
    Ok(ZrpConfig { counts })
}

/// Outcome of a dynamic duality comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub check: String,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `E^x[H(x(t), y)]` by Monte Carlo against `E^y[H(x, y(t))]` from the dual chain.
pub fn check_qtasep_duality_dynamic(
    params: &QtasepParams,
    x0: &ParticleConfig,
    nvec: &[usize],
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<DualityReport> {
    let n = x0.n();
    let y0 = multi_index_to_zrp(nvec, n)?;
    let gen = tazrp_dual_generator(n, nvec.len() as u32, params)?;
    let h0: Vec<f64> = gen.states.iter().map(|y| qtasep_h(params.q, x0, y).unwrap()).collect();
    let h = evolve_true_equation(&gen, &h0, t)?;
    let rhs = h[gen.index[&y0]];
    let (lhs, se) = if t == 0.0 {
        (qtasep_h(params.q, x0, &y0)?, 0.0)
    } else {
        let ens = markov::mc_expectation(
            |rng, _| {
                let x = markov::simulate_qtasep(x0, params, t, rng);
                qtasep_h(params.q, &x, &y0).unwrap()
            },
            paths,
            seed,
        )?;
        (ens.mean, ens.std_error)
    };
    let diff = (lhs - rhs).abs();
    let tol = if se > 0.0 { 3.0 * se } else { 1e-12 };
    Ok(DualityReport {
        check: "qtasep_duality_dynamic".into(),
        lhs,
        lhs_std_error: se,
        rhs,
        difference: diff,
        tolerance: tol,
        pass: diff <= tol,
    })
}

/// ASEP analogue for `H̃` with `k` dual particles started at `xs`.
pub fn check_asep_duality_dynamic(
    params: &AsepParams,
    init: InitialData,
    xs: &[i64],
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<DualityReport> {
    let tau = params.tau();
    let pad = markov::required_padding(t);
    let lo = xs[0] - pad;
    let hi = xs[xs.len() - 1] + pad;
    let gen = asep_particle_generator(xs.len(), lo, hi, params)?;
    let eta0 = match init {
        InitialData::Step => OccupancyConfig {
            left: lo - 1,
            occ: (lo - 1..=hi + 1).map(|x| (x >= 1) as u8).collect(),
            right_full: true,
        },
        _ => return invalid("exact dual side needs deterministic step data"),
    };
    let h0: Vec<f64> = gen.states.iter().map(|x| asep_tilde_h(tau, &eta0, x)).collect();
    let h = evolve_true_equation(&gen, &h0, t)?;
    let rhs = h[gen.index[&xs.to_vec()]];
    let window = markov::AsepWindow::around(xs[0] - 1, xs[xs.len() - 1]);
    let (lhs, se) = if t == 0.0 {
        (asep_tilde_h(tau, &eta0, xs), 0.0)
    } else {
        let ens = markov::mc_expectation(
            |rng, _| {
                let eta = markov::simulate_asep(init, params, &window, t, rng).unwrap();
                asep_tilde_h(tau, &eta, xs)
            },
            paths,
            seed,
        )?;
        (ens.mean, ens.std_error)
    };
    let diff = (lhs - rhs).abs();
    let tol = if se > 0.0 { 3.0 * se } else { 1e-12 };
    Ok(DualityReport {
        check: "asep_duality_dynamic".into(),
        lhs,
        lhs_std_error: se,
        rhs,
        difference: diff,
        tolerance: tol,
        pass: diff <= tol,
    })
}

/// Residuals of the free-evolution conditions satisfied by a contour solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEvolutionReport {
    pub check: String,
    /// Centered time difference against the free generator.
    pub b1_free_equation: f64,
    /// Boundary (cluster) condition; `None` when no cluster is present.
    pub b2_boundary: Option<f64>,
    /// Absorption at `n_k = 0` (q-TASEP only).
    pub b3_absorbing: Option<f64>,
    /// Initial data at `t = 0`.
    pub b4_initial: f64,
}

/// Time step for the centered difference in (B.1).
pub const FREE_EVOLUTION_DT: f64 = 1e-4;

/// Checks (B.1)–(B.4) for the q-TASEP step solution at `n⃗`:
/// `du/dt = Σ_i (1−q) a_{n_i} ∇_i u`, `∇_i u = q ∇_{i+1} u` where `n_i = n_{i+1}`,
/// `u = 0` once `n_k = 0`, and `u(0) = 1`.
pub fn check_qtasep_free_evolution(nvec: &[usize], t: f64, params: &QtasepParams) -> Result<FreeEvolutionReport> {
    let opts = QuadOptions::default();
    let u = |n: &[usize], s: f64| -> Result<f64> { Ok(moments::qtasep_u(n, s, params, 0.0, opts)?.value.re) };
    if t < FREE_EVOLUTION_DT {
        return invalid("t must exceed the finite-difference step");
    }
    let k = nvec.len();
    if nvec.iter().any(|&n| n == 0) {
        return invalid("(B.1) is checked at positive indices");
    }
    let dt = FREE_EVOLUTION_DT;
    let deriv = (u(nvec, t + dt)? - u(nvec, t - dt)?) / (2.0 * dt);
    let u0 = u(nvec, t)?;
    let nabla = |i: usize| -> Result<f64> {
        let mut m = nvec.to_vec();
        m[i] -= 1;
        Ok(u(&m, t)? - u0)
    };
    let mut rhs = 0.0;
    for i in 0..k {
        rhs += (1.0 - params.q) * params.rate(nvec[i]) * nabla(i)?;
    }
    let b2 = match (0..k.saturating_sub(1)).find(|&i| nvec[i] == nvec[i + 1]) {
        Some(i) => Some((nabla(i)? - params.q * nabla(i + 1)?).abs()),
        None => None,
    };
    let mut zeroed = nvec.to_vec();
    zeroed[k - 1] = 0;
    let b3 = Some(u(&zeroed, t)?.abs());
    let b4 = (u(nvec, 0.0)? - 1.0).abs();
    Ok(FreeEvolutionReport {
        check: "qtasep_free_evolution".into(),
        b1_free_equation: (deriv - rhs).abs(),
        b2_boundary: b2,
        b3_absorbing: b3,
        b4_initial: b4,
    })
}

/// ASEP analogue for `ũ(t; x⃗) = E[Π Q̃_{x_i}]` under step Bernoulli data:
/// `dũ/dt = Σ_i (p ũ(x⃗_i^−) + q ũ(x⃗_i^+) − ũ)`, and at `x_{i+1} = x_i + 1`
/// `p ũ(x⃗_{i+1}^−) + q ũ(x⃗_i^+) = ũ(x⃗)`.
pub fn check_asep_free_evolution(xs: &[i64], t: f64, params: &AsepParams, rho: f64) -> Result<FreeEvolutionReport> {
    let opts = QuadOptions::default();
    let u = |x: &[i64], s: f64| -> Result<f64> { Ok(moments::asep_qtilde_u(x, s, params, rho, opts)?.value.re) };
    if t < FREE_EVOLUTION_DT {
        return invalid("t must exceed the finite-difference step");
    }
    let k = xs.len();
    let dt = FREE_EVOLUTION_DT;
    let deriv = (u(xs, t + dt)? - u(xs, t - dt)?) / (2.0 * dt);
    let u0 = u(xs, t)?;
    let shifted = |i: usize, d: i64| -> Vec<i64> {
        let mut m = xs.to_vec();
        m[i] += d;
        m
    };
    let mut rhs = 0.0;
    for i in 0..k {
        rhs += params.p * u(&shifted(i, -1), t)? + params.q * u(&shifted(i, 1), t)? - u0;
    }
    let b2 = match (0..k.saturating_sub(1)).find(|&i| xs[i + 1] == xs[i] + 1) {
        Some(i) => Some((params.p * u(&shifted(i + 1, -1), t)? + params.q * u(&shifted(i, 1), t)? - u0).abs()),
        None => None,
    };
    let b4 = (u(xs, 0.0)? - moments::step_bernoulli_qtilde_initial(xs, params.tau(), rho)).abs();
    Ok(FreeEvolutionReport {
        check: "asep_free_evolution".into(),
        b1_free_equation: (deriv - rhs).abs(),
        b2_boundary: b2,
        b3_absorbing: None,
        b4_initial: b4,
    })
}

/// Contour moment `E[Π q^{x_{n_i}(t)+n_i}]` (step data) against the TAZRP
/// dual chain started from `H(step, ·) = 1` on the `y_0 = 0` sector.
pub fn moment_vs_dual_ode(nvec: &[usize], t: f64, params: &QtasepParams) -> Result<(f64, f64)> {
    let n_sites = nvec[0];
    let gen = tazrp_dual_generator(n_sites, nvec.len() as u32, params)?;
    let h = evolve_true_equation(&gen, &vec![1.0; gen.dim()], t)?;
    let y = multi_index_to_zrp(nvec, n_sites)?;
    let dual = h[gen.index[&y]];
    let contour = moments::qtasep_moment(nvec, t, params, 0.0, QuadOptions::default())?.value.re;
    Ok((contour, dual))
}

/// On a cluster `n_1 = … = n_y` of a symmetric function,
/// `Σ_{i=1}^{y} q^{y−i}(1−q)∇_i f` equals `(1−q^y)∇_y f`. Returns the residual
/// for the symmetric test function `f`.
pub fn schroedinger_cluster_residual<F: Fn(&[i64]) -> f64>(q: f64, cluster: &[i64], f: F) -> f64 {
    let y = cluster.len();
    let f0 = f(cluster);
    let nabla = |i: usize| {
        let mut m = cluster.to_vec();
        m[i] -= 1;
        f(&m) - f0
    };
    let lhs: f64 = (0..y).map(|i| q.powi((y - 1 - i) as i32) * (1.0 - q) * nabla(i)).sum();
    let rhs = (1.0 - q.powi(y as i32)) * nabla(y - 1);
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functional_examples() {
        let x = ParticleConfig::new(vec![-1, -2, -3]).unwrap();
        let y = ZrpConfig { counts: vec![0, 1, 0, 0] };
        assert_eq!(qtasep_h(0.5, &x, &y).unwrap(), 1.0);
        let y0 = ZrpConfig { counts: vec![1, 1, 0, 0] };
        assert_eq!(qtasep_h(0.5, &x, &y0).unwrap(), 0.0);
        let eta = OccupancyConfig { left: -3, occ: (-3..=5).map(|x| (x >= 1) as u8).collect(), right_full: true };
        assert!((q_tilde_x(0.4, &eta, 2) - 0.4).abs() < 1e-16);
    }

    #[test]
    fn constant_function_is_annihilated() {
        let p = QtasepParams::new(0.5, vec![1.0, 0.8, 1.2]).unwrap();
        let x = ParticleConfig::new(vec![3, 1, 0]).unwrap();
        assert_eq!(apply_qtasep_generator(&p, &x, |_| 2.0), 0.0);
        let g = tazrp_dual_generator(3, 2, &p).unwrap();
        // rows of the killed chain do not sum to zero, but L applied to 1 equals minus the killing rate
        let ones = vec![1.0; g.dim()];
        let l1 = g.apply(&ones);
        for (s, v) in g.states.iter().zip(l1) {
            let kill = if s.counts[1] > 0 { p.rate(1) * (1.0 - p.q.powi(s.counts[1] as i32)) } else { 0.0 };
            assert!((v + kill).abs() < 1e-14);
        }
    }

    #[test]
    fn one_particle_dual_closed_form() {
        let p = QtasepParams::new(0.5, vec![0.7]).unwrap();
        let g = tazrp_dual_generator(1, 1, &p).unwrap();
        let h = evolve_true_equation(&g, &[1.0], 1.3).unwrap();
        assert!((h[0] - (-0.7f64 * 0.5 * 1.3).exp()).abs() < 1e-14);
    }

    #[test]
    fn dense_and_uniformized_agree() {
        let p = AsepParams::from_tau(0.4).unwrap();
        let g = asep_particle_generator(2, -6, 6, &p).unwrap();
        let h0: Vec<f64> = g.states.iter().map(|x| 0.4f64.powi((x[0].max(0) + x[1].max(0)) as i32)).collect();
        let a = evolve_true_equation(&g, &h0, 0.7).unwrap();
        let b = linalg::expm_action_uniformized(&g.matrix, &h0, 0.7, 1e-15);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_derivative_at_zero() {
        let p = QtasepParams::homogeneous(0.5, 3).unwrap();
        let g = tazrp_dual_generator(3, 2, &p).unwrap();
        let h0: Vec<f64> = (0..g.dim()).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let dt = 1e-5;
        let hp = evolve_true_equation(&g, &h0, dt).unwrap();
        let lh = g.apply(&h0);
        for i in 0..g.dim() {
            assert!(((hp[i] - h0[i]) / dt - lh[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn cluster_collapse() {
        let f = |n: &[i64]| n.iter().map(|&v| (0.3 * v as f64).sin() + 0.1 * (v * v) as f64).product::<f64>();
        assert!(schroedinger_cluster_residual(0.5, &[3, 3, 3], f) < 1e-12);
    }

    #[test]
    fn zero_time_duality() {
        let p = QtasepParams::homogeneous(0.5, 3).unwrap();
        let x = ParticleConfig::new(vec![-1, -2, -3]).unwrap();
        let r = check_qtasep_duality_dynamic(&p, &x, &[2, 1], 0.0, 10, 1).unwrap();
        assert!(r.pass && r.difference == 0.0);
    }
}
