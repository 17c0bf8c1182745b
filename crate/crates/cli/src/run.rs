//! Dispatch from a validated config to the library, producing a [`Report`].

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use dualdet::asymptotics::{self, TwQuery};
use dualdet::duality;
use dualdet::fredholm::{self, DetOptions, DetValue, KernelSpec};
use dualdet::markov::{self, AsepParams, AsepWindow, InitialData, OccupancyConfig, ParticleConfig, QtasepParams, ZrpConfig};
use dualdet::moments::{self, QuadOptions};
use dualdet::polymer;
use dualdet::qfunc;
use dualdet::transform::{self, InvertOptions};
use dualdet::C64;
use rand::Rng;

use crate::config::*;
use crate::report::{Cell, Check, Report};

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let seed = cfg.seed;
    let tol = &cfg.tolerances;
    match &cfg.params {
        Params::Simulate(p) => simulate(p, seed),
        Params::Moment(p) => moment(p, seed, tol),
        Params::DualityCheck(p) => duality_check(p, seed, tol),
        Params::DetScan(p) => det_scan(p, seed, tol),
        Params::Invert(p) => invert(p, seed, tol),
        Params::TwConvergence(p) => tw_convergence(p, seed, tol),
        Params::Polymer(p) => polymer_run(p, seed, tol),
        Params::IdentitySuite(p) => identity_suite(p, seed, tol),
    }
}

fn qtasep_params(q: f64, a: &[f64]) -> Result<QtasepParams> {
    Ok(QtasepParams::new(q, a.to_vec())?)
}

fn asep_init(rho: f64) -> InitialData {
    if rho >= 1.0 {
        InitialData::Step
    } else {
        InitialData::StepBernoulli { rho }
    }
}

fn simulate(p: &SimulateParams, seed: u64) -> Result<Report> {
    let (identity, ens) = match p.model {
        Model::Asep => {
            let params = AsepParams::from_tau(p.tau)?;
            let window = AsepWindow::around(p.x, p.x);
            let ens = markov::mc_expectation(
                |rng, _| match markov::simulate_asep(p.init, &params, &window, p.t, rng) {
                    Ok(c) => c.n_x(p.x) as f64,
                    Err(_) => f64::NAN,
                },
                p.paths,
                seed,
            )?;
            ("ASEP height N_x(t)", ens)
        }
        Model::Qtasep => {
            let params = qtasep_params(p.q, &p.a)?;
            let n = p.particles.unwrap_or(p.particle);
            let mut rng0 = markov::trajectory_rng(seed, u64::MAX);
            markov::init_qtasep(n, p.init, &params, &mut rng0).context("initial data")?;
            let ens = markov::mc_expectation(
                |rng, _| {
                    let x0 = markov::init_qtasep(n, p.init, &params, rng).expect("validated above");
                    markov::simulate_qtasep(&x0, &params, p.t, rng).positions[p.particle - 1] as f64
                },
                p.paths,
                seed,
            )?;
            ("q-TASEP position x_n(t)", ens)
        }
    };
    if ens.values.iter().any(|v| v.is_nan()) {
        return Err(dualdet::Error::Window("simulation window rejected".into()).into());
    }
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    for v in &ens.values {
        *hist.entry(*v as i64).or_default() += 1;
    }
    let mut r = Report::new(Kind::Simulate, seed, identity, &["value", "count", "frequency"]);
    for (v, c) in hist {
        r.push(vec![v.into(), c.into(), (c as f64 / ens.count as f64).into()]);
    }
    r.note("mean", ens.mean);
    r.note("std_error", ens.std_error);
    r.note("paths", ens.count as f64);
    Ok(r)
}

fn moment(p: &MomentParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let kmax = p.kmax;
    let (identity, values, mc) = match p.model {
        Model::Asep => {
            let params = AsepParams::from_tau(p.tau)?;
            let mut vals = Vec::new();
            for k in 1..=kmax {
                vals.push(moments::asep_moment(k, p.x, p.t, &params, p.rho, QuadOptions::for_dim(k)).with_context(|| format!("E[tau^({k} N_x)]"))?);
            }
            let mc = if p.mc_paths > 0 {
                let window = AsepWindow::around(p.x, p.x);
                let init = asep_init(p.rho);
                Some(markov::mc_expectation_vec(
                    |rng, _| match markov::simulate_asep(init, &params, &window, p.t, rng) {
                        Ok(c) => {
                            let n = c.n_x(p.x) as i32;
                            (1..=kmax).map(|k| p.tau.powi(k as i32 * n)).collect()
                        }
                        Err(_) => vec![f64::NAN; kmax],
                    },
                    kmax,
                    p.mc_paths,
                    seed,
                )?)
            } else {
                None
            };
            ("E[tau^(k N_x(t))], nested contour formula", vals, mc)
        }
        Model::Qtasep => {
            let params = qtasep_params(p.q, &p.a)?;
            let mut vals = Vec::new();
            for k in 1..=kmax {
                vals.push(moments::qtasep_moment(&vec![p.n; k], p.t, &params, p.alpha, QuadOptions::for_dim(k)).with_context(|| format!("E[q^({k}(x_n+n))]"))?);
            }
            let init = if p.alpha > 0.0 { InitialData::HalfStationary { alpha: p.alpha } } else { InitialData::Step };
            let particles = p.n;
            let mc = if p.mc_paths > 0 {
                Some(markov::mc_expectation_vec(
                    |rng, _| {
                        let x0 = markov::init_qtasep(particles, init, &params, rng).expect("validated");
                        let x = markov::simulate_qtasep(&x0, &params, p.t, rng).positions[p.n - 1] + p.n as i64;
                        (1..=kmax).map(|k| p.q.powi(k as i32 * x as i32)).collect()
                    },
                    kmax,
                    p.mc_paths,
                    seed,
                )?)
            } else {
                None
            };
            ("E[q^(k(x_n(t)+n))], nested contour formula", vals, mc)
        }
    };
    let mut r = Report::new(Kind::Moment, seed, identity, &["k", "value", "error", "mc_mean", "mc_std_error", "z_score"]);
    for (i, v) in values.iter().enumerate() {
        let k = i + 1;
        match &mc {
            Some(ens) => {
                let e = &ens[i];
                if !e.mean.is_finite() {
                    return Err(dualdet::Error::Window("simulation window rejected".into()).into());
                }
                let z = e.z_score(v.value.re);
                r.push(vec![k.into(), v.value.re.into(), v.error.into(), e.mean.into(), e.std_error.into(), z.into()]);
                r.checks.push(Check::at_most(format!("moment_k{k}_vs_mc"), z, tol.z_score));
            }
            None => r.push(vec![k.into(), v.value.re.into(), v.error.into(), Cell::Missing, Cell::Missing, Cell::Missing]),
        }
    }
    Ok(r)
}

fn random_particles(rng: &mut impl Rng, n: usize) -> ParticleConfig {
    let mut pos = vec![rng.random_range(-4i64..6)];
    for _ in 1..n {
        let last = *pos.last().unwrap();
        pos.push(last - 1 - rng.random_range(0i64..4));
    }
    ParticleConfig::new(pos).expect("decreasing by construction")
}

fn random_occupancy(rng: &mut impl Rng) -> (OccupancyConfig, Vec<i64>) {
    let occ: Vec<u8> = (0..14).map(|_| rng.random_range(0u8..2)).collect();
    let eta = OccupancyConfig { left: -6, occ, right_full: rng.random::<bool>() };
    let k = rng.random_range(1usize..=4);
    let mut xs: Vec<i64> = Vec::new();
    while xs.len() < k {
        let x = rng.random_range(-6i64..8);
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs.sort_unstable();
    (eta, xs)
}

/// Largest generator-identity residual over `states` random pairs.
fn qtasep_generator_sweep(states: usize, particles: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut i = 0u64;
    while done < states {
        let mut rng = markov::trajectory_rng(seed, i);
        i += 1;
        let q = rng.random_range(0.05..0.95);
        let n = rng.random_range(1..=particles.max(1));
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let params = QtasepParams::new(q, a)?;
        let x = random_particles(&mut rng, n);
        let mut counts = vec![0u32];
        counts.extend((0..n).map(|_| rng.random_range(0u32..3)));
        let total: u32 = counts.iter().sum();
        if total == 0 || total > 4 {
            continue;
        }
        worst = worst.max(duality::qtasep_generator_residual(&params, &x, &ZrpConfig { counts })?);
        done += 1;
    }
    Ok(worst)
}

fn asep_generator_sweep(states: usize, seed: u64, tilde: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..states {
        let mut rng = markov::trajectory_rng(seed, i as u64);
        let params = AsepParams::new(rng.random_range(0.05..0.45))?;
        let (eta, xs) = random_occupancy(&mut rng);
        worst = worst.max(duality::asep_generator_residual(&params, &eta, &xs, tilde));
    }
    Ok(worst)
}

fn duality_check(p: &DualityParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new(
        Kind::DualityCheck,
        seed,
        "generator duality and E^x[H(x(t),y)] = E^y[H(x,y(t))]",
        &["check", "lhs", "lhs_std_error", "rhs", "difference", "tolerance", "pass"],
    );
    let gen_tol = tol.abs_or(1e-12);
    let residual = match p.model {
        Model::Qtasep => qtasep_generator_sweep(p.states, p.particles, seed)?,
        Model::Asep => asep_generator_sweep(p.states, seed, true)?.max(asep_generator_sweep(p.states, seed, false)?),
    };
    r.push(vec!["generator_residual".into(), residual.into(), 0.0.into(), 0.0.into(), residual.into(), gen_tol.into(), (residual <= gen_tol).into()]);
    r.checks.push(Check::at_most("generator_residual", residual, gen_tol));
    let rep = match p.model {
        Model::Qtasep => {
            let params = qtasep_params(p.q, &p.a)?;
            let x0 = ParticleConfig::new((1..=p.particles as i64).map(|i| -i).collect())?;
            duality::check_qtasep_duality_dynamic(&params, &x0, &p.nvec, p.t, p.paths, seed)?
        }
        Model::Asep => {
            let params = AsepParams::from_tau(p.tau)?;
            duality::check_asep_duality_dynamic(&params, InitialData::Step, &p.xs, p.t, p.paths, seed)?
        }
    };
    let dyn_tol = if rep.lhs_std_error > 0.0 { tol.z_score * rep.lhs_std_error } else { rep.tolerance };
    r.push(vec![
        rep.check.clone().into(),
        rep.lhs.into(),
        rep.lhs_std_error.into(),
        rep.rhs.into(),
        rep.difference.into(),
        dyn_tol.into(),
        (rep.difference <= dyn_tol).into(),
    ]);
    r.checks.push(Check::at_most(rep.check, rep.difference, dyn_tol));
    Ok(r)
}

fn scan_specs(p: &DetScanParams) -> Result<(KernelSpec, Option<KernelSpec>)> {
    let mb = || -> Result<KernelSpec> {
        Ok(match p.model {
            Model::Qtasep => KernelSpec::qtasep_mb(p.n, p.t, p.q, p.a.clone())?,
            Model::Asep => KernelSpec::asep_mb(p.x, p.t, p.tau, p.rho)?,
        })
    };
    let cauchy = || match p.model {
        Model::Qtasep => KernelSpec::QtasepCauchy { n: p.n, t: p.t, q: p.q, a: p.a.clone() },
        Model::Asep => KernelSpec::AsepCauchy { x: p.x, t: p.t, tau: p.tau, rho: p.rho },
    };
    Ok(match p.route {
        Route::Mb => (mb()?, p.compare_routes.then(cauchy)),
        Route::Cauchy => (cauchy(), if p.compare_routes { Some(mb()?) } else { None }),
        Route::Tw => (KernelSpec::asep_tw(p.x, p.t, p.tau, p.rho)?, if p.compare_routes { Some(mb()?) } else { None }),
    })
}

/// The transform value `E[1/(ζ q^{…}; q)_∞]` from any supported kernel.
fn transform_value(spec: &KernelSpec, zeta: C64, opts: &DetOptions) -> Result<DetValue> {
    Ok(match spec {
        KernelSpec::QtasepMb { .. } | KernelSpec::AsepMb { .. } => fredholm::transform_via_mb(spec, zeta, opts)?,
        KernelSpec::AsepTw { tau, .. } => {
            let d = fredholm::determinant(spec, zeta, opts)?;
            let den = qfunc::qpoch_inf(zeta, *tau);
            if den.norm() < 1e-12 {
                return Err(dualdet::Error::NearPole(format!("zeta = {zeta} is at a pole of 1/(zeta;tau)_inf")).into());
            }
            DetValue { value: d.value / den, error: d.error / den.norm(), nodes: d.nodes }
        }
        _ => fredholm::transform_via_cauchy(spec, zeta, opts)?,
    })
}

fn det_scan(p: &DetScanParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let (spec, other) = scan_specs(p)?;
    let opts = DetOptions { m0: p.m0, tol: p.tol, ..DetOptions::default() };
    let mut zetas = p.zetas.clone();
    if let Some(g) = &p.grid {
        zetas.extend(g.points());
    }
    let mut columns = vec!["zeta_re", "zeta_im", "value_re", "value_im", "error", "nodes"];
    if other.is_some() {
        columns.extend(["other_re", "other_im", "route_gap"]);
    }
    let identity = match p.model {
        Model::Qtasep => "E[1/(zeta q^(x_n(t)+n); q)_inf] as a Fredholm determinant",
        Model::Asep => "E[1/(zeta tau^(N_x(t)); tau)_inf] as a Fredholm determinant",
    };
    let mut r = Report::new(Kind::DetScan, seed, identity, &columns);
    let mut worst: f64 = 0.0;
    for z in zetas {
        let zeta = C64::new(z[0], z[1]);
        let d = transform_value(&spec, zeta, &opts).with_context(|| format!("determinant at zeta = {zeta}"))?;
        let mut row: Vec<Cell> = vec![z[0].into(), z[1].into(), d.value.re.into(), d.value.im.into(), d.error.into(), d.nodes.into()];
        if let Some(o) = &other {
            let e = transform_value(o, zeta, &opts).with_context(|| format!("second route at zeta = {zeta}"))?;
            let gap = (d.value - e.value).norm();
            worst = worst.max(gap);
            row.extend([e.value.re.into(), e.value.im.into(), gap.into()]);
        }
        r.push(row);
    }
    if other.is_some() {
        r.checks.push(Check::at_most("route_gap", worst, tol.abs_or(1e-6)));
    }
    Ok(r)
}

fn invert(p: &InvertParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let det = DetOptions { m0: p.det_m0, tol: p.det_tol, ..DetOptions::default() };
    let inv = InvertOptions { tol: p.inv_tol, ..InvertOptions::default() };
    let (identity, rec) = match p.model {
        Model::Asep => ("P(N_x(t) = m) by e_tau-Laplace inversion", transform::recover_pmf_asep(p.x, p.t, p.tau, p.rho, p.m_max, det, inv)?),
        Model::Qtasep => {
            let n = p.n as i64;
            ("P(x_n(t) = m) by e_q-Laplace inversion", transform::recover_pmf_qtasep(p.n, p.t, p.q, p.a.clone(), -n, p.m_max as i64 - n, det, inv)?)
        }
    };
    let mc = if p.mc_paths > 0 {
        let values = match p.model {
            Model::Asep => {
                let params = AsepParams::from_tau(p.tau)?;
                let window = AsepWindow::around(p.x, p.x);
                let init = asep_init(p.rho);
                markov::mc_expectation(
                    |rng, _| match markov::simulate_asep(init, &params, &window, p.t, rng) {
                        Ok(c) => c.n_x(p.x) as f64,
                        Err(_) => f64::NAN,
                    },
                    p.mc_paths,
                    seed,
                )?
            }
            Model::Qtasep => {
                let params = qtasep_params(p.q, &p.a)?;
                markov::mc_expectation(
                    |rng, _| {
                        let x0 = markov::init_qtasep(p.n, InitialData::Step, &params, rng).expect("step data");
                        markov::simulate_qtasep(&x0, &params, p.t, rng).positions[p.n - 1] as f64
                    },
                    p.mc_paths,
                    seed,
                )?
            }
        };
        if values.values.iter().any(|v| v.is_nan()) {
            return Err(dualdet::Error::Window("simulation window rejected".into()).into());
        }
        Some(values)
    } else {
        None
    };
    let mut r = Report::new(Kind::Invert, seed, identity, &["m", "probability", "error", "mc_frequency", "z_score"]);
    let mut worst_z: f64 = 0.0;
    for ((m, prob), err) in rec.pmf.support().zip(&rec.errors) {
        match &mc {
            Some(ens) => {
                let hits = ens.values.iter().filter(|&&v| v as i64 == m).count();
                let freq = hits as f64 / ens.count as f64;
                let se = (prob * (1.0 - prob) / ens.count as f64).sqrt().max(1e-12);
                let z = (freq - prob).abs() / se;
                worst_z = worst_z.max(z);
                r.push(vec![m.into(), prob.into(), (*err).into(), freq.into(), z.into()]);
            }
            None => r.push(vec![m.into(), prob.into(), (*err).into(), Cell::Missing, Cell::Missing]),
        }
    }
    r.note("normalization_defect", rec.normalization_defect);
    r.note("mean", rec.pmf.mean());
    r.checks.push(Check::at_most("normalization_defect", rec.normalization_defect.abs(), tol.abs_or(1e-5)));
    if mc.is_some() {
        r.checks.push(Check::at_most("per_bin_vs_mc", worst_z, tol.z_score));
    }
    Ok(r)
}

fn tw_convergence(p: &TwParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let query = TwQuery { r: p.r, ts: p.ts.clone(), tau: p.tau, kappa: p.kappa, nodes: p.nodes, truncation: p.truncation };
    let rows = asymptotics::asep_tw_convergence(&query)?;
    let mut r = Report::new(
        Kind::TwConvergence,
        seed,
        "E[e_tau(-zeta tau^N_0(t/gamma))] against F_GUE(2^(4/3) r)",
        &["t", "r", "det", "fgue", "gap", "det_error"],
    );
    for row in &rows {
        r.push(vec![row.t.into(), row.r.into(), row.det.into(), row.fgue.into(), row.gap.into(), row.det_error.into()]);
    }
    if rows.len() >= 2 {
        let worst = rows.windows(2).map(|w| w[1].gap - w[0].gap).fold(f64::NEG_INFINITY, f64::max);
        r.checks.push(Check { name: "gap_strictly_decreasing".into(), value: worst, tolerance: 0.0, pass: worst < 0.0 });
    }
    if p.mc_paths > 0 {
        let mc = asymptotics::asep_tw_mc_check(p.mc_t, p.r, p.tau, p.mc_paths, seed, p.nodes)?;
        let z = mc.functional.z_score(mc.det);
        r.note("mc_t", p.mc_t);
        r.note("mc_det", mc.det);
        r.note("mc_functional_mean", mc.functional.mean);
        r.note("mc_functional_std_error", mc.functional.std_error);
        r.note("mc_probability_mean", mc.probability.mean);
        r.note("mc_probability_std_error", mc.probability.std_error);
        r.checks.push(Check::at_most("mc_functional", z, tol.z_score));
    }
    Ok(r)
}

fn polymer_run(p: &PolymerParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    match p.mode {
        PolymerMode::Moment => {
            let mut r = Report::new(
                Kind::Polymer,
                seed,
                "E[prod_i z(tau, n_i)] for the semi-discrete heat equation",
                &["nvec", "value", "error", "mc_mean", "mc_std_error", "z_score"],
            );
            let mut vals = Vec::new();
            for nv in &p.nvecs {
                vals.push(polymer::she_moment(nv, p.tau, p.c).with_context(|| format!("moment at {nv:?}"))?);
            }
            let mc = if p.mc_paths > 0 && !p.nvecs.is_empty() {
                let sites = p.nvecs.iter().map(|v| v[0]).max().unwrap_or(1);
                let z0 = polymer::delta_initial(sites);
                let nvecs = p.nvecs.clone();
                Some(markov::mc_expectation_vec(
                    |rng, _| {
                        let s = polymer::simulate_she(sites, p.tau, p.dt, &[], &z0, rng).expect("validated");
                        nvecs.iter().map(|nv| nv.iter().map(|&n| s.z[n - 1]).product()).collect()
                    },
                    p.nvecs.len(),
                    p.mc_paths,
                    seed,
                )?)
            } else {
                None
            };
            for (i, (nv, v)) in p.nvecs.iter().zip(&vals).enumerate() {
                let label = nv.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
                match &mc {
                    Some(ens) => {
                        let z = ens[i].z_score(v.value.re);
                        r.push(vec![label.clone().into(), v.value.re.into(), v.error.into(), ens[i].mean.into(), ens[i].std_error.into(), z.into()]);
                        r.checks.push(Check::at_most(format!("moment_{}_vs_mc", label.replace(' ', "_")), z, tol.z_score));
                    }
                    None => r.push(vec![label.into(), v.value.re.into(), v.error.into(), Cell::Missing, Cell::Missing, Cell::Missing]),
                }
            }
            Ok(r)
        }
        PolymerMode::Laplace => {
            let mut r = Report::new(
                Kind::Polymer,
                seed,
                "E[exp(-u e^(3tau/2) z(tau, n))] as a Fredholm determinant",
                &["u", "det", "error", "mc_mean", "mc_std_error", "z_score"],
            );
            let opts = DetOptions::default();
            for (i, &u) in p.us.iter().enumerate() {
                let d = polymer::oy_laplace_det(C64::new(u, 0.0), p.n, p.tau, &opts).with_context(|| format!("determinant at u = {u}"))?;
                if p.mc_paths > 0 {
                    let mc = polymer::she_mc(p.n, p.tau, p.dt, u, p.mc_paths, seed.wrapping_add(i as u64 * 1_000_003))?;
                    let z = mc.laplace.z_score(d.value.re);
                    r.push(vec![u.into(), d.value.re.into(), d.error.into(), mc.laplace.mean.into(), mc.laplace.std_error.into(), z.into()]);
                    r.checks.push(Check::at_most(format!("laplace_u{i}_vs_mc"), z, tol.z_score));
                } else {
                    r.push(vec![u.into(), d.value.re.into(), d.error.into(), Cell::Missing, Cell::Missing, Cell::Missing]);
                }
            }
            Ok(r)
        }
        PolymerMode::Scaling => {
            let rows = polymer::scaling_map_diagnostic(&p.eps, p.tau, p.n, p.mc_paths, seed)?;
            let mut r = Report::new(
                Kind::Polymer,
                seed,
                "q-TASEP with q = e^-eps mapped onto the semi-discrete heat equation",
                &["eps", "tau", "n", "mean", "std_error", "target", "gap"],
            );
            for row in &rows {
                r.push(vec![row.eps.into(), row.tau.into(), row.n.into(), row.mean.into(), row.std_error.into(), row.target.into(), row.gap.into()]);
            }
            Ok(r)
        }
    }
}

/// Fast closed-form and cross-route identities.
fn identity_suite(p: &SuiteParams, seed: u64, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new(Kind::IdentitySuite, seed, "invariant suite", &["check", "value", "tolerance", "pass"]);
    let add = |r: &mut Report, name: &str, value: f64, default_tol: f64| {
        let t = tol.abs.unwrap_or(default_tol);
        let c = Check::at_most(name, value, t);
        r.push(vec![name.into(), value.into(), t.into(), c.pass.into()]);
        r.checks.push(c);
    };

    // q-series
    let mut rng = markov::trajectory_rng(seed, 0);
    let mut qb: f64 = 0.0;
    let mut eq: f64 = 0.0;
    let mut fin: f64 = 0.0;
    for _ in 0..p.states.min(50) {
        let q: f64 = rng.random_range(0.1..0.9);
        let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let x = C64::from_polar(rng.random_range(0.0..0.6), rng.random_range(-3.0..3.0));
        let mut s = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 0..400 {
            s += term;
            term *= (1.0 - a * q.powi(k)) / (1.0 - q.powi(k + 1)) * x;
        }
        let rhs = qfunc::qpoch_inf(a * x, q) / qfunc::qpoch_inf(x, q);
        qb = qb.max((s - rhs).norm());
        let mut s = C64::new(0.0, 0.0);
        for k in 0..400 {
            s += x.powi(k) / qfunc::q_factorial(k as usize, q);
        }
        eq = eq.max((s - qfunc::e_q(x, q)?).norm());
        let n = rng.random_range(0usize..8);
        let mut s = C64::new(0.0, 0.0);
        for k in 0..=n {
            s += qfunc::q_binomial(n, k, q)? * (-1f64).powi(k as i32) * q.powi((k * k.saturating_sub(1) / 2) as i32) * x.powi(k as i32);
        }
        fin = fin.max((s - qfunc::q_pochhammer(x, q, qfunc::Len::Finite(n))).norm());
    }
    add(&mut r, "q_binomial_theorem", qb, 1e-10);
    add(&mut r, "e_q_series", eq, 1e-10);
    add(&mut r, "finite_q_binomial_expansion", fin, 1e-10);
    let z: Vec<C64> = (0..3).map(|j| C64::new(2.0, 0.0) + C64::from_polar(0.5, 0.4 + 2.1 * j as f64)).collect();
    let (s1, s2) = qfunc::check_symmetrization(&z, 0.4)?;
    add(&mut r, "symmetrization", s1.max(s2), 1e-10);

    // generator duality
    add(&mut r, "qtasep_generator_duality", qtasep_generator_sweep(p.states, 5, seed)?, 1e-12);
    add(&mut r, "asep_generator_duality_tilde", asep_generator_sweep(p.states, seed, true)?, 1e-12);
    add(&mut r, "asep_generator_duality_plain", asep_generator_sweep(p.states, seed, false)?, 1e-12);

    // t = 0 closures and the dual chain
    let qp = QtasepParams::homogeneous(0.5, 3)?;
    let step0 = moments::qtasep_moment(&[2, 1], 0.0, &qp, 0.0, QuadOptions::default())?.value.re;
    add(&mut r, "qtasep_step_initial", (step0 - 1.0).abs(), 1e-12);
    let half0 = moments::qtasep_moment(&[2, 1], 0.0, &qp, 0.2, QuadOptions::default())?.value.re;
    add(&mut r, "qtasep_half_stationary_initial", (half0 - moments::half_stationary_initial(&[2, 1], &qp, 0.2)?).abs(), 1e-10);
    let ap = AsepParams::from_tau(0.4)?;
    let sb0 = moments::asep_moment(2, 2, 0.0, &ap, 0.5, QuadOptions::default())?.value.re;
    add(&mut r, "asep_step_bernoulli_initial", (sb0 - moments::step_bernoulli_moment_initial(2, 2, 0.4, 0.5)).abs(), 1e-10);
    let mut dual: f64 = 0.0;
    for nvec in [vec![1], vec![2, 1], vec![2, 2]] {
        let (c, d) = duality::moment_vs_dual_ode(&nvec, 0.5, &qp)?;
        dual = dual.max((c - d).abs());
    }
    add(&mut r, "moment_vs_dual_chain", dual, 1e-8);

    // determinant routes
    let opts = DetOptions::default();
    let zeta = C64::new(-0.4, 0.0);
    let mb = fredholm::transform_via_mb(&KernelSpec::qtasep_mb(2, 0.5, 0.5, vec![1.0])?, zeta, &opts)?;
    let ca = fredholm::transform_via_cauchy(&KernelSpec::QtasepCauchy { n: 2, t: 0.5, q: 0.5, a: vec![1.0] }, zeta, &opts)?;
    add(&mut r, "qtasep_mb_vs_cauchy", (mb.value - ca.value).norm(), 1e-6);
    let mb = fredholm::transform_via_mb(&KernelSpec::asep_mb(0, 0.5, 0.4, 1.0)?, zeta, &opts)?;
    let ca = fredholm::transform_via_cauchy(&KernelSpec::AsepCauchy { x: 0, t: 0.5, tau: 0.4, rho: 1.0 }, zeta, &opts)?;
    add(&mut r, "asep_mb_vs_cauchy", (mb.value - ca.value).norm(), 1e-6);

    // asymptotics
    let cp = asymptotics::validate_critical_point(0.4)?;
    add(&mut r, "critical_point_cubic", (cp.cubic - cp.cubic_expected).abs() / cp.cubic_expected.abs(), 1e-12);
    let f: Vec<f64> = [-1.0, 0.0, 1.0].iter().map(|&x| asymptotics::fgue_default(x).map(|v| v.value)).collect::<dualdet::Result<_>>()?;
    let worst_step = f.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    add(&mut r, "fgue_monotone", worst_step.max(0.0), 0.0);

    // polymer
    let v = polymer::she_moment(&[3], 0.7, 1.0)?.value.re;
    add(&mut r, "she_first_moment_closed_form", (v - (-0.7f64).exp() * 0.49 / 2.0).abs(), 1e-10);
    add(&mut r, "she_boundary_condition", polymer::she_boundary_residual(&[2, 2], 0, 0.7, 1.0)?, 1e-9);
    Ok(r)
}
