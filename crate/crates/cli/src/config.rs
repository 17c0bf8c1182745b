//! Experiment configuration: JSON on disk, one typed parameter block per kind.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use dualdet::markov::{self, InitialData};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Moment,
    DualityCheck,
    DetScan,
    Invert,
    TwConvergence,
    Polymer,
    IdentitySuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Moment => "moment",
            Kind::DualityCheck => "duality-check",
            Kind::DetScan => "det-scan",
            Kind::Invert => "invert",
            Kind::TwConvergence => "tw-convergence",
            Kind::Polymer => "polymer",
            Kind::IdentitySuite => "identity-suite",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A configuration problem, tagged with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

fn check(ok: bool, field: &str, message: impl Into<String>) -> CResult<()> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(format!("params.{field}"), message))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Asep,
    Qtasep,
}

/// Tolerance overrides shared by every kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Monte Carlo agreement, in standard errors.
    pub z_score: f64,
    /// Replaces the kind's absolute tolerance when set.
    pub abs: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { z_score: 3.0, abs: None }
    }
}

impl Tolerances {
    pub fn abs_or(&self, default: f64) -> f64 {
        self.abs.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub model: Model,
    pub tau: f64,
    pub q: f64,
    /// q-TASEP rates `a_1, a_2, …`; the last entry is reused.
    pub a: Vec<f64>,
    pub t: f64,
    pub paths: usize,
    pub init: InitialData,
    /// ASEP observation site for `N_x(t)`.
    pub x: i64,
    /// q-TASEP particle index reported.
    pub particle: usize,
    /// q-TASEP system size; defaults to `particle`.
    pub particles: Option<usize>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            model: Model::Asep,
            tau: 0.4,
            q: 0.5,
            a: vec![1.0],
            t: 1.0,
            paths: 10_000,
            init: InitialData::Step,
            x: 0,
            particle: 1,
            particles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentParams {
    pub model: Model,
    pub tau: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub t: f64,
    /// ASEP step-Bernoulli density.
    pub rho: f64,
    pub x: i64,
    /// q-TASEP particle index.
    pub n: usize,
    /// q-TASEP half-stationary parameter; 0 is step data.
    pub alpha: f64,
    pub kmax: usize,
    /// Monte Carlo paths for the cross-check; 0 skips it.
    pub mc_paths: usize,
}

impl Default for MomentParams {
    fn default() -> Self {
        MomentParams { model: Model::Asep, tau: 0.4, q: 0.5, a: vec![1.0], t: 0.5, rho: 1.0, x: 0, n: 1, alpha: 0.0, kmax: 2, mc_paths: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityParams {
    pub model: Model,
    pub tau: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub t: f64,
    pub paths: usize,
    /// Random states for the generator identity.
    pub states: usize,
    /// q-TASEP system size and dual multi-index.
    pub particles: usize,
    pub nvec: Vec<usize>,
    /// ASEP dual particle positions, strictly increasing.
    pub xs: Vec<i64>,
    /// Simulation padding around the dual particles; must cover the light cone.
    pub padding: Option<i64>,
}

impl Default for DualityParams {
    fn default() -> Self {
        DualityParams {
            model: Model::Qtasep,
            tau: 0.4,
            q: 0.5,
            a: vec![1.0],
            t: 0.5,
            paths: 20_000,
            states: 200,
            particles: 3,
            nvec: vec![2, 1],
            xs: vec![1],
            padding: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Mb,
    Cauchy,
    Tw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaGrid {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub n_re: usize,
    pub n_im: usize,
}

impl ZetaGrid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let lin = |r: [f64; 2], n: usize, i: usize| if n <= 1 { r[0] } else { r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for j in 0..self.n_im {
            for i in 0..self.n_re {
                out.push([lin(self.re, self.n_re, i), lin(self.im, self.n_im, j)]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetScanParams {
    pub model: Model,
    pub route: Route,
    pub tau: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub t: f64,
    pub rho: f64,
    pub x: i64,
    pub n: usize,
    /// Explicit `[re, im]` points, scanned before the grid.
    pub zetas: Vec<[f64; 2]>,
    pub grid: Option<ZetaGrid>,
    /// Also evaluate the other exact route and report the gap.
    pub compare_routes: bool,
    pub m0: usize,
    pub tol: f64,
}

impl Default for DetScanParams {
    fn default() -> Self {
        DetScanParams {
            model: Model::Qtasep,
            route: Route::Mb,
            tau: 0.4,
            q: 0.5,
            a: vec![1.0],
            t: 0.5,
            rho: 1.0,
            x: 0,
            n: 2,
            zetas: vec![[-0.4, 0.0]],
            grid: None,
            compare_routes: false,
            m0: 64,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertParams {
    pub model: Model,
    pub tau: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub t: f64,
    pub rho: f64,
    pub x: i64,
    pub n: usize,
    /// Largest value of `N_x` (ASEP) or `x_n + n` (q-TASEP) recovered.
    pub m_max: usize,
    pub det_m0: usize,
    pub det_tol: f64,
    pub inv_tol: f64,
    pub mc_paths: usize,
}

impl Default for InvertParams {
    fn default() -> Self {
        InvertParams {
            model: Model::Asep,
            tau: 0.4,
            q: 0.5,
            a: vec![1.0],
            t: 1.0,
            rho: 1.0,
            x: 0,
            n: 1,
            m_max: 5,
            det_m0: 32,
            det_tol: 1e-9,
            inv_tol: 1e-9,
            mc_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwParams {
    pub r: f64,
    pub ts: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
    pub nodes: usize,
    pub truncation: f64,
    pub mc_paths: usize,
    pub mc_t: f64,
}

impl Default for TwParams {
    fn default() -> Self {
        TwParams { r: 0.0, ts: vec![50.0, 100.0, 200.0], tau: 0.4, kappa: 1.0, nodes: 128, truncation: 6.0, mc_paths: 0, mc_t: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolymerMode {
    Moment,
    Laplace,
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolymerParams {
    pub mode: PolymerMode,
    /// Moment multi-indices, each non-increasing.
    pub nvecs: Vec<Vec<usize>>,
    pub tau: f64,
    pub c: f64,
    /// Laplace transform level and arguments.
    pub n: usize,
    pub us: Vec<f64>,
    pub dt: f64,
    pub mc_paths: usize,
    /// Scaling ladder.
    pub eps: Vec<f64>,
}

impl Default for PolymerParams {
    fn default() -> Self {
        PolymerParams {
            mode: PolymerMode::Moment,
            nvecs: vec![vec![1], vec![2], vec![1, 1], vec![2, 1]],
            tau: 0.5,
            c: 1.0,
            n: 2,
            us: vec![0.5, 1.0, 2.0],
            dt: 1e-3,
            mc_paths: 0,
            eps: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    /// Random states per generator identity.
    pub states: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { states: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Params {
    Simulate(SimulateParams),
    Moment(MomentParams),
    DualityCheck(DualityParams),
    DetScan(DetScanParams),
    Invert(InvertParams),
    TwConvergence(TwParams),
    Polymer(PolymerParams),
    IdentitySuite(SuiteParams),
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub params: Params,
}

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<Kind>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

fn from_value<T: DeserializeOwned>(v: serde_json::Value) -> CResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "params".to_string() } else { format!("params.{path}") };
        ConfigError::new(field, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn defaults(kind: Kind) -> Self {
        Self::from_raw(RawConfig { kind: Some(kind), seed: None, output: None, tolerances: Tolerances::default(), params: None }, None)
            .expect("defaults validate")
    }

    fn from_raw(raw: RawConfig, expected: Option<Kind>) -> CResult<Self> {
        let kind = match (raw.kind, expected) {
            (Some(k), Some(e)) if k != e => return Err(ConfigError::new("kind", format!("config is for `{k}` but `{e}` was requested"))),
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(ConfigError::new("kind", "missing field")),
        };
        let v = raw.params.unwrap_or_else(|| serde_json::Value::Object(Default::default()));
        let params = match kind {
            Kind::Simulate => Params::Simulate(from_value(v)?),
            Kind::Moment => Params::Moment(from_value(v)?),
            Kind::DualityCheck => Params::DualityCheck(from_value(v)?),
            Kind::DetScan => Params::DetScan(from_value(v)?),
            Kind::Invert => Params::Invert(from_value(v)?),
            Kind::TwConvergence => Params::TwConvergence(from_value(v)?),
            Kind::Polymer => Params::Polymer(from_value(v)?),
            Kind::IdentitySuite => Params::IdentitySuite(from_value(v)?),
        };
        if !(raw.tolerances.z_score > 0.0) {
            return Err(ConfigError::new("tolerances.z_score", "must be positive"));
        }
        if let Some(a) = raw.tolerances.abs {
            if !(a >= 0.0) {
                return Err(ConfigError::new("tolerances.abs", "must be nonnegative"));
            }
        }
        let cfg = ExperimentConfig { kind, seed: raw.seed.unwrap_or(DEFAULT_SEED), output: raw.output, tolerances: raw.tolerances, params };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CResult<()> {
        match &self.params {
            Params::Simulate(p) => {
                check_model(p.model, p.tau, p.q, &p.a)?;
                check(p.t >= 0.0 && p.t.is_finite(), "t", "must be finite and nonnegative")?;
                check(p.paths >= 2, "paths", "need at least 2")?;
                check_init(p.model, p.init)?;
                if p.model == Model::Qtasep {
                    check(p.particle >= 1, "particle", "must be at least 1")?;
                    check(p.particles.unwrap_or(p.particle) >= p.particle, "particles", "must be at least `particle`")?;
                }
                Ok(())
            }
            Params::Moment(p) => {
                check_model(p.model, p.tau, p.q, &p.a)?;
                check(p.t >= 0.0 && p.t.is_finite(), "t", "must be finite and nonnegative")?;
                check((1..=4).contains(&p.kmax), "kmax", "must lie in 1..=4")?;
                check(p.mc_paths == 0 || p.mc_paths >= 2, "mc_paths", "0 or at least 2")?;
                match p.model {
                    Model::Asep => check_rho(p.rho),
                    Model::Qtasep => {
                        check(p.n >= 1, "n", "must be at least 1")?;
                        check(p.alpha >= 0.0 && p.alpha < p.a.iter().copied().fold(f64::INFINITY, f64::min), "alpha", "need 0 <= alpha < min a_i")
                    }
                }
            }
            Params::DualityCheck(p) => {
                check_model(p.model, p.tau, p.q, &p.a)?;
                check(p.t >= 0.0 && p.t.is_finite(), "t", "must be finite and nonnegative")?;
                check(p.paths >= 2, "paths", "need at least 2")?;
                match p.model {
                    Model::Qtasep => {
                        check((1..=5).contains(&p.particles), "particles", "must lie in 1..=5")?;
                        check(!p.nvec.is_empty() && p.nvec.len() <= 4, "nvec", "need 1 to 4 entries")?;
                        check(p.nvec.windows(2).all(|w| w[0] >= w[1]), "nvec", "must be non-increasing")?;
                        check(p.nvec.iter().all(|&n| n >= 1 && n <= p.particles), "nvec", "entries must lie in 1..=particles")
                    }
                    Model::Asep => {
                        check(!p.xs.is_empty() && p.xs.len() <= 3, "xs", "need 1 to 3 positions")?;
                        check(p.xs.windows(2).all(|w| w[0] < w[1]), "xs", "must be strictly increasing")?;
                        if let Some(pad) = p.padding {
                            let need = markov::required_padding(p.t);
                            check(pad >= need, "padding", format!("window padding {pad} cannot contain the dynamics up to t = {}: need at least {need}", p.t))?;
                        }
                        Ok(())
                    }
                }
            }
            Params::DetScan(p) => {
                check_model(p.model, p.tau, p.q, &p.a)?;
                check(p.t > 0.0 && p.t.is_finite(), "t", "must be positive")?;
                check(p.m0 >= 8, "m0", "need at least 8 nodes")?;
                check(p.tol > 0.0, "tol", "must be positive")?;
                check(p.zetas.iter().all(|z| z[0].is_finite() && z[1].is_finite()), "zetas", "must be finite")?;
                if let Some(g) = &p.grid {
                    check(g.n_re >= 1 && g.n_im >= 1, "grid", "counts must be positive")?;
                }
                match p.model {
                    Model::Qtasep => {
                        check(p.n >= 1, "n", "must be at least 1")?;
                        check(p.route != Route::Tw, "route", "the tw route is ASEP only")
                    }
                    Model::Asep => check_rho(p.rho),
                }
            }
            Params::Invert(p) => {
                check_model(p.model, p.tau, p.q, &p.a)?;
                check(p.t > 0.0 && p.t.is_finite(), "t", "must be positive")?;
                check(p.det_m0 >= 8, "det_m0", "need at least 8 nodes")?;
                check(p.det_tol > 0.0 && p.inv_tol > 0.0, "inv_tol", "tolerances must be positive")?;
                check(p.mc_paths == 0 || p.mc_paths >= 2, "mc_paths", "0 or at least 2")?;
                match p.model {
                    Model::Asep => check_rho(p.rho),
                    Model::Qtasep => check(p.n >= 1, "n", "must be at least 1"),
                }
            }
            Params::TwConvergence(p) => {
                check_tau(p.tau)?;
                check(p.ts.iter().all(|&t| t > 0.0 && t.is_finite()), "ts", "times must be positive")?;
                check(p.kappa > 0.0, "kappa", "must be positive")?;
                check(p.nodes >= 16, "nodes", "need at least 16")?;
                check(p.truncation >= 5.0, "truncation", "must be at least 5")?;
                check(p.mc_paths == 0 || p.mc_paths >= 2, "mc_paths", "0 or at least 2")?;
                check(p.mc_t > 0.0, "mc_t", "must be positive")
            }
            Params::Polymer(p) => {
                check(p.tau >= 0.0 && p.tau.is_finite(), "tau", "must be finite and nonnegative")?;
                check(p.mc_paths == 0 || p.mc_paths >= 2, "mc_paths", "0 or at least 2")?;
                check(p.dt > 0.0 && p.dt <= 1e-3 * p.tau.max(1.0), "dt", "need 0 < dt <= 1e-3 max(1, tau)")?;
                match p.mode {
                    PolymerMode::Moment => {
                        check(p.nvecs.iter().all(|v| !v.is_empty() && v.len() <= 4), "nvecs", "each needs 1 to 4 entries")?;
                        check(p.nvecs.iter().all(|v| v.windows(2).all(|w| w[0] >= w[1]) && v.iter().all(|&n| n >= 1)), "nvecs", "entries must be positive and non-increasing")
                    }
                    PolymerMode::Laplace => {
                        check(p.n >= 1, "n", "must be at least 1")?;
                        check(p.us.iter().all(|&u| u >= 0.0 && u.is_finite()), "us", "must be finite and nonnegative")
                    }
                    PolymerMode::Scaling => {
                        check(p.n >= 1, "n", "must be at least 1")?;
                        check(p.mc_paths >= 2, "mc_paths", "the scaling diagnostic is Monte Carlo; need at least 2 paths")?;
                        check(p.eps.iter().all(|&e| e > 0.0 && e <= 0.5), "eps", "must lie in (0, 0.5]")
                    }
                }
            }
            Params::IdentitySuite(p) => check(p.states >= 1, "states", "must be positive"),
        }
    }
}

fn check_tau(tau: f64) -> CResult<()> {
    check(tau > 0.0 && tau < 1.0, "tau", format!("must lie in (0,1), got {tau}"))
}

fn check_rho(rho: f64) -> CResult<()> {
    check(rho >= dualdet::moments::MIN_RHO && rho <= 1.0, "rho", format!("must lie in [{}, 1], got {rho}", dualdet::moments::MIN_RHO))
}

fn check_model(model: Model, tau: f64, q: f64, a: &[f64]) -> CResult<()> {
    match model {
        Model::Asep => check_tau(tau),
        Model::Qtasep => {
            check(q > 0.0 && q < 1.0, "q", format!("must lie in (0,1), got {q}"))?;
            check(!a.is_empty() && a.iter().all(|&v| v > 0.0 && v.is_finite()), "a", "rates must be positive and finite")
        }
    }
}

fn check_init(model: Model, init: InitialData) -> CResult<()> {
    match (model, init) {
        (_, InitialData::Step) => Ok(()),
        (Model::Asep, InitialData::StepBernoulli { rho }) => check(rho > 0.0 && rho <= 1.0, "init.rho", "must lie in (0,1]"),
        (Model::Qtasep, InitialData::HalfStationary { alpha }) => check(alpha >= 0.0, "init.alpha", "must be nonnegative"),
        _ => check(false, "init", "initial data does not belong to this model"),
    }
}

/// Parses a config file. `expected` is the kind requested on the command line;
/// the file may omit `kind` when it is given.
pub fn parse_config_for(path: &Path, expected: Option<Kind>) -> CResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    parse_config_str(&text, expected)
}

pub fn parse_config(path: &Path) -> CResult<ExperimentConfig> {
    parse_config_for(path, None)
}

pub fn parse_config_str(text: &str, expected: Option<Kind>) -> CResult<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::new("config", format!("invalid JSON: {e}")))?;
    if !value.is_object() {
        return Err(ConfigError::new("config", "top level must be a JSON object"));
    }
    let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { "config".into() } else { path }, e.into_inner().to_string())
    })?;
    ExperimentConfig::from_raw(raw, expected)
}
