//! Continuous-time simulators for q-TASEP, TAZRP and ASEP, plus seeded Monte
//! Carlo ensembles.
//!
//! All simulators use the direct Gillespie scheme: draw an exponential holding
//! time from the total rate, pick the event proportionally to its rate, update.
//! Event selection goes through a binary sum tree so the cost per event is
//! logarithmic in the number of sites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::qfunc::qpoch_inf_re;

pub type SimRng = ChaCha8Rng;

/// Independent stream for trajectory `index` of an ensemble seeded by `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index))
}

/// Positions `x_1 > x_2 > … > x_N`; `x_0 = +∞` is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub positions: Vec<i64>,
}

impl ParticleConfig {
    pub fn new(positions: Vec<i64>) -> Result<Self> {
        if positions.is_empty() {
            return invalid("particle configuration needs N >= 1");
        }
        if positions.windows(2).any(|w| w[0] <= w[1]) {
            return invalid("positions must be strictly decreasing");
        }
        Ok(ParticleConfig { positions })
    }
    pub fn n(&self) -> usize {
        self.positions.len()
    }
    /// `x_{i-1} − x_i − 1` for `i = 1..N` (1-based); `None` for particle 1.
    pub fn gap(&self, i: usize) -> Option<i64> {
        if i <= 1 {
            None
        } else {
            Some(self.positions[i - 2] - self.positions[i - 1] - 1)
        }
    }
}

/// Zero-range occupation numbers `y_0, …, y_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZrpConfig {
    pub counts: Vec<u32>,
}

impl ZrpConfig {
    pub fn particles(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// q-TASEP parameters: `q` and per-particle rates `a_i` (index 0 holds `a_1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtasepParams {
    pub q: f64,
    pub a: Vec<f64>,
}

impl QtasepParams {
    pub fn new(q: f64, a: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return invalid(format!("q must lie in [0,1), got {q}"));
        }
        if a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return invalid("jump rates must be positive and finite");
        }
        Ok(QtasepParams { q, a })
    }
    pub fn homogeneous(q: f64, n: usize) -> Result<Self> {
        Self::new(q, vec![1.0; n])
    }
    /// `a_i` for 1-based `i`; the last supplied rate is reused beyond the table.
    pub fn rate(&self, i: usize) -> f64 {
        let idx = i.saturating_sub(1).min(self.a.len() - 1);
        self.a[idx]
    }
    /// `a_i (1 − q^{gap})` with `gap = None` standing for `+∞`.
    pub fn jump_rate(&self, i: usize, gap: Option<i64>) -> f64 {
        match gap {
            None => self.rate(i),
            Some(g) => self.rate(i) * (1.0 - self.q.powi(g as i32)),
        }
    }
}

/// Bond rates `a_x` of ASEP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BondRates {
    Uniform,
    /// `values[k]` is the rate of bond `(offset + k, offset + k + 1)`; 1 outside.
    Table { offset: i64, values: Vec<f64> },
}

impl BondRates {
    pub fn rate(&self, x: i64) -> f64 {
        match self {
            BondRates::Uniform => 1.0,
            BondRates::Table { offset, values } => {
                let k = x - offset;
                if k >= 0 && (k as usize) < values.len() {
                    values[k as usize]
                } else {
                    1.0
                }
            }
        }
    }
}

/// ASEP with right rate `p`, left rate `q = 1 − p`, `p < q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsepParams {
    pub p: f64,
    pub q: f64,
    pub bonds: BondRates,
}

impl AsepParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return invalid(format!("ASEP needs 0 < p < 1/2 (p < q = 1 - p), got p = {p}"));
        }
        Ok(AsepParams { p, q: 1.0 - p, bonds: BondRates::Uniform })
    }
    /// Parameters with `τ = p/q`.
    pub fn from_tau(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return invalid(format!("tau must lie in (0,1), got {tau}"));
        }
        Self::new(tau / (1.0 + tau))
    }
    pub fn tau(&self) -> f64 {
        self.p / self.q
    }
    pub fn gamma(&self) -> f64 {
        self.q - self.p
    }
    pub fn with_bonds(mut self, bonds: BondRates) -> Self {
        self.bonds = bonds;
        self
    }
}

/// Initial data families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Step,
    HalfStationary { alpha: f64 },
    StepBernoulli { rho: f64 },
}

impl InitialData {
    /// `θ = ρ/(1−ρ)`, infinite for deterministic step data.
    pub fn theta(&self) -> f64 {
        match self {
            InitialData::StepBernoulli { rho } if *rho < 1.0 => rho / (1.0 - rho),
            _ => f64::INFINITY,
        }
    }
}

/// Binary tree of partial sums over event rates.
#[derive(Debug, Clone)]
pub struct SumTree {
    size: usize,
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(rates: &[f64]) -> Self {
        let size = rates.len().next_power_of_two().max(1);
        let mut tree = vec![0.0; 2 * size];
        tree[size..size + rates.len()].copy_from_slice(rates);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        SumTree { size, tree }
    }
    pub fn total(&self) -> f64 {
        self.tree[1]
    }
    pub fn get(&self, i: usize) -> f64 {
        self.tree[self.size + i]
    }
    pub fn set(&mut self, i: usize, v: f64) {
        let mut k = self.size + i;
        self.tree[k] = v;
        while k > 1 {
            k /= 2;
            self.tree[k] = self.tree[2 * k] + self.tree[2 * k + 1];
        }
    }
    /// Index `i` with `Σ_{j<i} r_j ≤ u < Σ_{j≤i} r_j`, for `0 ≤ u < total`.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            if u < self.tree[2 * k] || self.tree[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= self.tree[2 * k];
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}

/// One recorded event of a traced trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub event_site: i64,
    pub state_hash: u64,
}

pub(crate) fn fnv1a<I: IntoIterator<Item = i64>>(items: I) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in items {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn exp_draw(rng: &mut SimRng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// `X ~ qGeo(α)`: `P(X = k) = (α;q)_∞ α^k/(q;q)_k`, by inverse CDF.
pub fn sample_qgeometric(alpha: f64, q: f64, rng: &mut SimRng) -> Result<u64> {
    if !(0.0..1.0).contains(&alpha) {
        return invalid(format!("q-geometric parameter must lie in [0,1), got {alpha}"));
    }
    let u: f64 = rng.random();
    if alpha == 0.0 {
        return Ok(0);
    }
    let mut p = qpoch_inf_re(alpha, q);
    let mut cdf = p;
    let mut k = 0u64;
    let mut qk = 1.0;
    while u >= cdf && k < 100_000 {
        qk *= q;
        p *= alpha / (1.0 - qk);
        cdf += p;
        k += 1;
        if p < 1e-300 && cdf < u {
            break;
        }
    }
    Ok(k)
}

/// q-geometric probability mass at `k`.
pub fn qgeometric_pmf(alpha: f64, q: f64, k: u64) -> f64 {
    let mut p = qpoch_inf_re(alpha, q);
    let mut qj = 1.0;
    for _ in 0..k {
        qj *= q;
        p *= alpha / (1.0 - qj);
    }
    p
}

/// Initial q-TASEP configuration with `n` particles.
pub fn init_qtasep(n: usize, init: InitialData, params: &QtasepParams, rng: &mut SimRng) -> Result<ParticleConfig> {
    if n == 0 {
        return invalid("need at least one particle");
    }
    match init {
        InitialData::Step => ParticleConfig::new((1..=n as i64).map(|i| -i).collect()),
        InitialData::HalfStationary { alpha } => {
            let amin = (1..=n).map(|i| params.rate(i)).fold(f64::INFINITY, f64::min);
            if !(0.0..amin).contains(&alpha) {
                return invalid(format!("half-stationary data needs 0 <= alpha < min a_i = {amin}"));
            }
            let mut pos = Vec::with_capacity(n);
            let mut prev = 0i64;
            for i in 1..=n {
                let x = sample_qgeometric(alpha / params.rate(i), params.q, rng)? as i64;
                prev = prev - 1 - x;
                pos.push(prev);
            }
            ParticleConfig::new(pos)
        }
        InitialData::StepBernoulli { .. } => invalid("step-Bernoulli data belongs to ASEP"),
    }
}

/// Runs q-TASEP for time `t`.
pub fn simulate_qtasep(config: &ParticleConfig, params: &QtasepParams, t: f64, rng: &mut SimRng) -> ParticleConfig {
    simulate_qtasep_traced(config, params, t, rng, None)
}

pub fn simulate_qtasep_traced(
    config: &ParticleConfig,
    params: &QtasepParams,
    t: f64,
    rng: &mut SimRng,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> ParticleConfig {
    let mut c = config.clone();
    let n = c.n();
    let rates: Vec<f64> = (1..=n).map(|i| params.jump_rate(i, c.gap(i))).collect();
    let mut tree = SumTree::new(&rates);
    let mut time = 0.0;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            break;
        }
        time += exp_draw(rng, total);
        if time > t {
            break;
        }
        let u: f64 = rng.random::<f64>() * total;
        let i = tree.find(u) + 1;
        c.positions[i - 1] += 1;
        tree.set(i - 1, params.jump_rate(i, c.gap(i)));
        if i < n {
            tree.set(i, params.jump_rate(i + 1, c.gap(i + 1)));
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TraceEvent { time, event_site: c.positions[i - 1], state_hash: fnv1a(c.positions.iter().copied()) });
        }
    }
    c
}

/// Runs the q-TAZRP: one particle moves from site `i` to `i − 1` at rate
/// `a_i (1 − q^{y_i})`, `i = 1..N`; site 0 only receives.
pub fn simulate_tazrp(config: &ZrpConfig, params: &QtasepParams, t: f64, rng: &mut SimRng) -> ZrpConfig {
    let mut c = config.clone();
    let nsites = c.counts.len();
    if nsites <= 1 {
        return c;
    }
    let rate = |i: usize, y: u32| params.rate(i) * (1.0 - params.q.powi(y as i32));
    let rates: Vec<f64> = (1..nsites).map(|i| rate(i, c.counts[i])).collect();
    let mut tree = SumTree::new(&rates);
    let mut time = 0.0;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            break;
        }
        time += exp_draw(rng, total);
        if time > t {
            break;
        }
        let u: f64 = rng.random::<f64>() * total;
        let i = tree.find(u) + 1;
        c.counts[i] -= 1;
        c.counts[i - 1] += 1;
        tree.set(i - 1, rate(i, c.counts[i]));
        if i >= 2 {
            tree.set(i - 2, rate(i - 1, c.counts[i - 1]));
        }
    }
    c
}

/// Occupation variables on the window `[left, left + occ.len() − 1]`.
/// Outside the window sites are empty on the left, and full on the right when
/// `right_full` is set (empty otherwise).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyConfig {
    pub left: i64,
    pub occ: Vec<u8>,
    pub right_full: bool,
}

impl OccupancyConfig {
    pub fn right(&self) -> i64 {
        self.left + self.occ.len() as i64 - 1
    }
    pub fn eta(&self, x: i64) -> u8 {
        if x < self.left {
            0
        } else if x > self.right() {
            self.right_full as u8
        } else {
            self.occ[(x - self.left) as usize]
        }
    }
    /// `N_x = Σ_{y≤x} η_y`.
    pub fn n_x(&self, x: i64) -> i64 {
        if x < self.left {
            return 0;
        }
        let upto = (x.min(self.right()) - self.left) as usize;
        let inside: i64 = self.occ[..=upto].iter().map(|&v| v as i64).sum();
        if x > self.right() && self.right_full {
            inside + (x - self.right())
        } else {
            inside
        }
    }
    pub fn count(&self) -> i64 {
        self.occ.iter().map(|&v| v as i64).sum()
    }
}

/// Padding on each side of an observation range that keeps boundary effects
/// below `1e-6` over `[0, t]`.
pub fn required_padding(t: f64) -> i64 {
    (10.0 * t + 50.0).ceil() as i64
}

/// Observation range `[lo, hi]` and optional explicit padding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsepWindow {
    pub lo: i64,
    pub hi: i64,
    pub pad: Option<i64>,
}

impl AsepWindow {
    pub fn around(lo: i64, hi: i64) -> Self {
        AsepWindow { lo, hi, pad: None }
    }
}

/// Draws the initial occupancy on the padded window.
pub fn init_asep(init: InitialData, window: &AsepWindow, pad: i64, rng: &mut SimRng) -> Result<OccupancyConfig> {
    let left = window.lo - pad;
    let right = window.hi + pad;
    let mut occ = vec![0u8; (right - left + 1) as usize];
    let rho = match init {
        InitialData::Step => 1.0,
        InitialData::StepBernoulli { rho } => {
            if !(rho > 0.0 && rho <= 1.0) {
                return invalid(format!("rho must lie in (0,1], got {rho}"));
            }
            rho
        }
        InitialData::HalfStationary { .. } => return invalid("half-stationary data belongs to q-TASEP"),
    };
    for (k, o) in occ.iter_mut().enumerate() {
        let x = left + k as i64;
        if x >= 1 {
            *o = if rho >= 1.0 { 1 } else { (rng.random::<f64>() < rho) as u8 };
        }
    }
    Ok(OccupancyConfig { left, occ, right_full: rho >= 1.0 })
}

/// Runs ASEP from `init` for time `t` on a window padded around the
/// observation range. Sites outside the padded window are frozen.
pub fn simulate_asep(
    init: InitialData,
    params: &AsepParams,
    window: &AsepWindow,
    t: f64,
    rng: &mut SimRng,
) -> Result<OccupancyConfig> {
    simulate_asep_traced(init, params, window, t, rng, None)
}

pub fn simulate_asep_traced(
    init: InitialData,
    params: &AsepParams,
    window: &AsepWindow,
    t: f64,
    rng: &mut SimRng,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<OccupancyConfig> {
    if window.hi < window.lo {
        return invalid("empty observation window");
    }
    let need = required_padding(t);
    let pad = window.pad.unwrap_or(need);
    if pad < need {
        return Err(Error::Window(format!("padding {pad} below the required {need} sites for t = {t}")));
    }
    let mut c = init_asep(init, window, pad, rng)?;
    evolve_asep(&mut c, params, t, rng, trace);
    Ok(c)
}

/// Evolves an occupancy configuration in place (bonds inside the window only).
pub fn evolve_asep(
    c: &mut OccupancyConfig,
    params: &AsepParams,
    t: f64,
    rng: &mut SimRng,
    mut trace: Option<&mut Vec<TraceEvent>>,
) {
    let w = c.occ.len();
    if w < 2 {
        return;
    }
    let bond_rate = |occ: &[u8], k: usize| -> f64 {
        let a = params.bonds.rate(c.left + k as i64);
        match (occ[k], occ[k + 1]) {
            (1, 0) => a * params.p,
            (0, 1) => a * params.q,
            _ => 0.0,
        }
    };
    let rates: Vec<f64> = (0..w - 1).map(|k| bond_rate(&c.occ, k)).collect();
    let mut tree = SumTree::new(&rates);
    let mut time = 0.0;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            break;
        }
        time += exp_draw(rng, total);
        if time > t {
            break;
        }
        let u: f64 = rng.random::<f64>() * total;
        let k = tree.find(u).min(w - 2);
        c.occ.swap(k, k + 1);
        if k > 0 {
            tree.set(k - 1, bond_rate(&c.occ, k - 1));
        }
        tree.set(k, bond_rate(&c.occ, k));
        if k + 2 < w {
            tree.set(k + 1, bond_rate(&c.occ, k + 1));
        }
        if let Some(tr) = trace.as_deref_mut() {
            let hash = fnv1a(c.occ.iter().map(|&v| v as i64));
            tr.push(TraceEvent { time, event_site: c.left + k as i64, state_hash: hash });
        }
    }
}

/// Seeded Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub count: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
}

impl Ensemble {
    pub fn from_values(seed: u64, values: Vec<f64>) -> Self {
        let (mean, std_error) = mean_se(&values);
        Ensemble { seed, count: values.len(), values, mean, std_error }
    }
    /// `|mean − target| / SE`, infinite when SE vanishes and the mean differs.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Sample mean and standard error (sample std / √n).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and SE of `functional(rng_i, i)` over `count` independent trajectories.
pub fn mc_expectation<F>(functional: F, count: usize, seed: u64) -> Result<Ensemble>
where
    F: Fn(&mut SimRng, usize) -> f64 + Sync + Send,
{
    if count < 2 {
        return invalid("need at least two trajectories");
    }
    let values = par::map_range(count, |i| {
        let mut rng = trajectory_rng(seed, i as u64);
        functional(&mut rng, i)
    });
    Ok(Ensemble::from_values(seed, values))
}

/// Vector-valued variant: returns one ensemble per output component.
pub fn mc_expectation_vec<F>(functional: F, dim: usize, count: usize, seed: u64) -> Result<Vec<Ensemble>>
where
    F: Fn(&mut SimRng, usize) -> Vec<f64> + Sync + Send,
{
    if count < 2 {
        return invalid("need at least two trajectories");
    }
    let rows = par::map_range(count, |i| {
        let mut rng = trajectory_rng(seed, i as u64);
        functional(&mut rng, i)
    });
    Ok((0..dim)
        .map(|d| Ensemble::from_values(seed, rows.iter().map(|r| r[d]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_tree_selects_proportionally() {
        let mut t = SumTree::new(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert!((t.total() - 6.5).abs() < 1e-15);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.99), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.4), 4);
        t.set(4, 0.0);
        assert_eq!(t.find(5.99), 3);
    }

    #[test]
    fn qgeometric_basics() {
        let mut rng = trajectory_rng(1, 0);
        assert_eq!(sample_qgeometric(0.0, 0.5, &mut rng).unwrap(), 0);
        let s: f64 = (0..=100).map(|k| qgeometric_pmf(0.3, 0.5, k)).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_initial_data() {
        let p = QtasepParams::homogeneous(0.5, 3).unwrap();
        let mut rng = trajectory_rng(0, 0);
        let c = init_qtasep(3, InitialData::Step, &p, &mut rng).unwrap();
        assert_eq!(c.positions, vec![-1, -2, -3]);
        let h = init_qtasep(3, InitialData::HalfStationary { alpha: 0.0 }, &p, &mut rng).unwrap();
        assert_eq!(h, c);
        assert!(init_qtasep(3, InitialData::HalfStationary { alpha: 1.0 }, &p, &mut rng).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let p = QtasepParams::homogeneous(0.5, 3).unwrap();
        let mut rng = trajectory_rng(0, 0);
        let c = ParticleConfig::new(vec![-1, -2, -3]).unwrap();
        assert_eq!(simulate_qtasep(&c, &p, 0.0, &mut rng), c);
        let y = ZrpConfig { counts: vec![0, 2, 1] };
        assert_eq!(simulate_tazrp(&y, &p, 0.0, &mut rng), y);
        let a = AsepParams::from_tau(0.4).unwrap();
        let o = simulate_asep(InitialData::Step, &a, &AsepWindow::around(-3, 3), 0.0, &mut rng).unwrap();
        for x in -3..=3 {
            assert_eq!(o.eta(x), (x >= 1) as u8);
        }
    }

    #[test]
    fn determinism_and_invariants() {
        let p = QtasepParams::new(0.3, vec![1.0, 0.7, 1.4, 0.9]).unwrap();
        let c = ParticleConfig::new(vec![-1, -2, -3, -4]).unwrap();
        let mut r1 = trajectory_rng(42, 3);
        let mut r2 = trajectory_rng(42, 3);
        let mut tr = Vec::new();
        let a = simulate_qtasep_traced(&c, &p, 2.0, &mut r1, Some(&mut tr));
        let b = simulate_qtasep(&c, &p, 2.0, &mut r2);
        assert_eq!(a, b);
        assert!(a.positions.windows(2).all(|w| w[0] > w[1]));
        assert!(tr.windows(2).all(|w| w[0].time <= w[1].time));

        let y = ZrpConfig { counts: vec![0, 2, 0, 3] };
        let y2 = simulate_tazrp(&y, &p, 1.5, &mut r1);
        assert_eq!(y2.particles(), 5);

        let ap = AsepParams::from_tau(0.4).unwrap();
        let w = AsepWindow::around(-5, 5);
        let o = simulate_asep(InitialData::StepBernoulli { rho: 0.5 }, &ap, &w, 1.0, &mut r1).unwrap();
        assert!(o.occ.iter().all(|&v| v <= 1));
        let small = AsepWindow { lo: -5, hi: 5, pad: Some(3) };
        assert!(matches!(
            simulate_asep(InitialData::Step, &ap, &small, 1.0, &mut r1),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn ensemble_constant_functional() {
        let e = mc_expectation(|_, _| 1.0, 10, 7).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(mc_expectation(|_, _| 1.0, 1, 7).is_err());
    }
}
