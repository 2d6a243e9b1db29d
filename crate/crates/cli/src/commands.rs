//! The four experiment commands. `verify` lives in its own module.

use std::io::Write;

use serde::Serialize;

use cyclefv::circulant::{build_q, cloez_lambda, q_spectrum_closed_form, spectral_constants};
use cyclefv::dynamics::{
    empirical_distance_bound, exact_moments, g_infinity, integrate_g, mean_dynamics, uniform_variance_bound,
    variance_bound,
};
use cyclefv::particle_system::{
    default_burn_in, estimate_moments, full_generator, simulate_ensemble, simulate_stationary_ensemble, state_count,
    stationary_distribution_exact, write_trajectory_csv, StateSpace, DENSE_LIMIT,
};
use cyclefv::stationary_covariance::{cov_asymptotic, solve_sk_linear, stationary_moments};
use cyclefv::Params;

use crate::output::{num, opt_num, with_sink, write_csv, write_json};
use crate::{CliError, CliResult, ExperimentConfig, VERSION};

/// Largest `K` for which the dense linear solve is run.
pub const LINEAR_SOLVE_LIMIT: usize = 1_500;
/// Largest `K` for which the dense coupling constant is computed.
pub const COUPLING_LIMIT: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct ParamRecord {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub theta: f64,
    pub p: f64,
}

impl ParamRecord {
    pub fn new(params: &Params, n: Option<u64>) -> Self {
        Self { k: params.k(), n, theta: *params.theta(), p: *params.p() }
    }
}

#[derive(Debug, Serialize)]
pub struct SpectrumSummary {
    pub command: &'static str,
    pub version: &'static str,
    pub params: ParamRecord,
    pub rho: f64,
    pub alpha: f64,
    /// Largest distance of an eigenvalue from the ellipse (or segment when `theta = 1`).
    pub ellipse_residual: f64,
    /// Largest `|Q f_k - lambda_k f_k|`.
    pub fourier_residual: f64,
    /// Largest gap between the closed form and the first-row evaluation.
    pub route_difference: f64,
    pub cloez_lambda: Option<f64>,
}

pub fn spectrum(cfg: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let params = &cfg.params;
    let k = params.k();
    let theta = *params.theta();
    let q = build_q(params);
    let closed = q_spectrum_closed_form(params);
    let poly = q.eigenvalues();
    let mut ellipse: f64 = 0.0;
    let mut fourier: f64 = 0.0;
    let mut route: f64 = 0.0;
    for (mode, (z, w)) in closed.eigenvalues.iter().zip(&poly.eigenvalues).enumerate() {
        let x = (z.re + 1.0 + theta) / (1.0 + theta);
        let r = if (theta - 1.0).abs() < 1e-12 {
            z.im.abs().max((x.abs() - 1.0).max(0.0))
        } else {
            let y = z.im / (1.0 - theta);
            (x * x + y * y - 1.0).abs()
        };
        ellipse = ellipse.max(r);
        route = route.max((z - w).norm());
        fourier = fourier.max(q.fourier_residual(mode, *z));
    }
    let c = spectral_constants(params);
    let cloez = if k <= COUPLING_LIMIT { Some(cloez_lambda(&q.to_dense())?) } else { None };
    let rows: Vec<Vec<String>> =
        closed.eigenvalues.iter().enumerate().map(|(i, z)| vec![i.to_string(), num(z.re), num(z.im)]).collect();
    let header = ["k", "re_lambda", "im_lambda"].map(String::from);
    with_sink(cfg.output.as_deref(), stdout, |w| write_csv(&header, &rows, w))?;
    let summary = SpectrumSummary {
        command: "spectrum",
        version: VERSION,
        params: ParamRecord::new(params, None),
        rho: c.rho,
        alpha: c.alpha,
        ellipse_residual: ellipse,
        fourier_residual: fourier,
        route_difference: route,
        cloez_lambda: cloez,
    };
    with_sink(cfg.summary.as_deref(), stderr, |w| write_json(&summary, w))
}

#[derive(Debug, Serialize)]
pub struct CovarianceSummary {
    pub command: &'static str,
    pub version: &'static str,
    pub params: ParamRecord,
    pub variance: f64,
    /// `N cov_0`, the quantity with a finite large-`N` limit.
    pub n_cov0: f64,
    pub linear_difference: Option<f64>,
    pub exact_difference: Option<f64>,
    pub tolerance: f64,
    pub consistent: bool,
}

/// `s_k` and `cov_k` by every available method.
pub struct CovarianceTable {
    pub s_closed: Vec<f64>,
    pub s_linear: Option<Vec<f64>>,
    pub s_exact: Option<Vec<f64>>,
    pub cov: Vec<f64>,
    pub asym1: Vec<f64>,
    pub asym2: Vec<f64>,
}

pub fn covariance_table(params: &Params, n: u64) -> CliResult<CovarianceTable> {
    let k = params.k();
    let closed = stationary_moments(params, n, false)?;
    let s_linear = if k <= LINEAR_SOLVE_LIMIT { Some(solve_sk_linear(params, n)?.s) } else { None };
    let s_exact = if state_count(k, n) <= DENSE_LIMIT as u128 {
        let space = StateSpace::enumerate(k, n)?;
        let nu = stationary_distribution_exact(&full_generator(params, &space)?)?;
        let n2 = (n * n) as f64;
        Some(
            (0..k)
                .map(|d| {
                    space.states().iter().zip(&nu).map(|(c, w)| w * (c.counts()[0] * c.counts()[d]) as f64 / n2).sum()
                })
                .collect(),
        )
    } else {
        None
    };
    let mut asym1 = Vec::with_capacity(k);
    let mut asym2 = Vec::with_capacity(k);
    for d in 0..k {
        let (a, b) = cov_asymptotic(params, n, d)?;
        asym1.push(a);
        asym2.push(b);
    }
    Ok(CovarianceTable { s_closed: closed.s, s_linear, s_exact, cov: closed.cov, asym1, asym2 })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn covariance(cfg: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let params = &cfg.params;
    let n = cfg.particles();
    let t = covariance_table(params, n)?;
    let rows: Vec<Vec<String>> = (0..params.k())
        .map(|d| {
            vec![
                d.to_string(),
                num(t.s_closed[d]),
                opt_num(t.s_linear.as_ref().map(|s| s[d])),
                opt_num(t.s_exact.as_ref().map(|s| s[d])),
                num(t.cov[d]),
                num(t.asym1[d]),
                num(t.asym2[d]),
            ]
        })
        .collect();
    let header = ["k", "s_closed", "s_linear", "s_exact", "cov", "asym1", "asym2"].map(String::from);
    with_sink(cfg.output.as_deref(), stdout, |w| write_csv(&header, &rows, w))?;
    let tolerance = 1e-10;
    let linear_difference = t.s_linear.as_ref().map(|s| max_diff(s, &t.s_closed));
    let exact_difference = t.s_exact.as_ref().map(|s| {
        let mut d = max_diff(s, &t.s_closed);
        if let Some(l) = &t.s_linear {
            d = d.max(max_diff(s, l));
        }
        d
    });
    let consistent = linear_difference.into_iter().chain(exact_difference).all(|d| d <= tolerance);
    let summary = CovarianceSummary {
        command: "covariance",
        version: VERSION,
        params: ParamRecord::new(params, Some(n)),
        variance: t.cov[0],
        n_cov0: n as f64 * t.cov[0],
        linear_difference,
        exact_difference,
        tolerance,
        consistent,
    };
    with_sink(cfg.summary.as_deref(), stderr, |w| write_json(&summary, w))?;
    if cfg.checked && !consistent {
        return Err(CliError::Failed(format!(
            "methods disagree: linear {linear_difference:?}, enumeration {exact_difference:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SiteEstimate {
    pub site: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

#[derive(Debug, Serialize)]
pub struct TimeEstimate {
    pub time: f64,
    pub sites: Vec<SiteEstimate>,
}

#[derive(Debug, Serialize)]
pub struct StationaryCheck {
    pub burn_in: f64,
    pub time: f64,
    /// Across-replica `Cov(eta(0)/N, eta(d)/N)` at the last sample time.
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub max_z: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub command: &'static str,
    pub version: &'static str,
    pub params: ParamRecord,
    pub seed: u64,
    pub replicas: usize,
    pub initial: Vec<u64>,
    pub estimates: Vec<TimeEstimate>,
    pub stationary: Option<StationaryCheck>,
}

pub fn simulate(cfg: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let params = &cfg.params;
    let n = cfg.particles();
    let eta0 = cfg.init.as_ref().expect("resolved initial state");
    let grid = cfg.grid();
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(params));
    let ens = if cfg.stationary {
        simulate_stationary_ensemble(params, eta0, burn_in, &grid, cfg.seed, cfg.replicas)?
    } else {
        simulate_ensemble(params, eta0, cfg.t_end, &grid, cfg.seed, cfg.replicas)?
    };
    with_sink(cfg.output.as_deref(), stdout, |w| Ok(write_trajectory_csv(&ens, w)?))?;

    let mut estimates = Vec::new();
    let mut stationary = None;
    if cfg.replicas >= 2 {
        let per_site: Vec<_> = (0..params.k()).map(|s| estimate_moments(&ens, s, s)).collect::<Result<_, _>>()?;
        for (ti, &time) in ens.times.iter().enumerate() {
            let sites = per_site
                .iter()
                .enumerate()
                .map(|(s, est)| SiteEstimate {
                    site: s,
                    mean: est[ti].mean_k,
                    mean_se: est[ti].std_error,
                    variance: est[ti].cov_kl,
                    variance_se: est[ti].cov_std_error,
                })
                .collect();
            estimates.push(TimeEstimate { time, sites });
        }
        if cfg.stationary {
            let closed = stationary_moments(params, n, false)?.cov;
            let last = ens.times.len() - 1;
            let mut estimate = Vec::new();
            let mut std_error = Vec::new();
            let mut max_z: f64 = 0.0;
            for d in 0..params.k() {
                let e = estimate_moments(&ens, 0, d)?[last];
                let z = if e.cov_std_error > 0.0 {
                    (e.cov_kl - closed[d]).abs() / e.cov_std_error
                } else if (e.cov_kl - closed[d]).abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                max_z = max_z.max(z);
                estimate.push(e.cov_kl);
                std_error.push(e.cov_std_error);
            }
            stationary = Some(StationaryCheck {
                burn_in,
                time: ens.times[last],
                estimate,
                std_error,
                closed_form: closed,
                max_z,
                pass: max_z <= 3.0,
            });
        }
    }
    let failed = stationary.as_ref().is_some_and(|s| !s.pass);
    let summary = SimulateSummary {
        command: "simulate",
        version: VERSION,
        params: ParamRecord::new(params, Some(n)),
        seed: cfg.seed,
        replicas: cfg.replicas,
        initial: eta0.counts().to_vec(),
        estimates,
        stationary,
    };
    with_sink(cfg.summary.as_deref(), stderr, |w| write_json(&summary, w))?;
    if cfg.checked && failed {
        return Err(CliError::Failed("stationary covariance estimate outside 3 standard errors".into()));
    }
    Ok(())
}

/// One row of the dynamics table.
#[derive(Debug, Clone)]
pub struct DynamicsRow {
    pub t: f64,
    pub s: Vec<f64>,
    /// `g_t(0, .)`
    pub g0: Vec<f64>,
    /// `g_inf(0, .)`
    pub ginf0: Vec<f64>,
    /// `max_k |g_t(k,k) - Var|` from the ODE.
    pub var_gap_ode: f64,
    /// The same gap from the full chain, for small state spaces.
    pub var_gap_exact: Option<f64>,
    pub var_bound: f64,
    pub uniform_bound: f64,
    /// `|s_t - mu e^{tQ}|_2`, a lower estimate of the expected distance.
    pub mean_dist: f64,
    pub dist_lower: f64,
    pub dist_upper: f64,
}

#[derive(Debug, Serialize)]
pub struct DynamicsSummary {
    pub command: &'static str,
    pub version: &'static str,
    pub params: ParamRecord,
    pub initial: Vec<u64>,
    pub mu: Vec<f64>,
    pub stationary_variance: f64,
    pub exact_oracle: bool,
    pub violations: Vec<String>,
}

pub fn dynamics_table(cfg: &ExperimentConfig) -> CliResult<(Vec<DynamicsRow>, Vec<String>, bool)> {
    let params = &cfg.params;
    let k = params.k();
    let n = cfg.particles();
    let eta0 = cfg.init.as_ref().expect("resolved initial state");
    let mu = cfg.mu.as_ref().expect("resolved reference law");
    let grid = cfg.grid();
    let fields = integrate_g(params, eta0, &grid)?;
    let ginf = g_infinity(params, n)?;
    let var = stationary_moments(params, n, false)?.cov[0];
    let uniform = uniform_variance_bound(params, n)?;
    let small = state_count(k, n) <= DENSE_LIMIT as u128;
    let q = build_q(params);
    let mut rows = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    for f in &fields {
        let t = f.t;
        let s = mean_dynamics(params, eta0, t)?.into_weights();
        let gap = |g: &cyclefv::Matrix| (0..k).map(|a| (g[(a, a)] - var).abs()).fold(0.0, f64::max);
        let var_gap_ode = gap(&f.g);
        let var_gap_exact = if small { Some(gap(&exact_moments(params, eta0, t)?.1)) } else { None };
        let var_bound = variance_bound(params, n, t)?;
        let target = q.exp_action(t, mu.weights())?;
        let mean_dist = s.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let (dist_lower, dist_upper) = empirical_distance_bound(params, n, t, eta0, mu)?;
        if var_gap_ode > var_bound + 1e-9 {
            violations.push(format!("t={t}: ODE variance gap {var_gap_ode:e} exceeds bound {var_bound:e}"));
        }
        if let Some(e) = var_gap_exact {
            if e > var_bound + 1e-9 {
                violations.push(format!("t={t}: exact variance gap {e:e} exceeds bound {var_bound:e}"));
            }
        }
        if mean_dist < dist_lower - 1e-10 {
            violations.push(format!("t={t}: mean distance {mean_dist:e} below lower bound {dist_lower:e}"));
        }
        rows.push(DynamicsRow {
            t,
            s,
            g0: f.g.row(0).to_vec(),
            ginf0: ginf.row(0).to_vec(),
            var_gap_ode,
            var_gap_exact,
            var_bound,
            uniform_bound: uniform,
            mean_dist,
            dist_lower,
            dist_upper,
        });
    }
    Ok((rows, violations, small))
}

pub fn dynamics_header(k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["s", "g0", "ginf0"] {
        h.extend((0..k).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(
        ["var_gap_ode", "var_gap_exact", "var_bound", "uniform_bound", "mean_dist", "dist_lower", "dist_upper"]
            .map(String::from),
    );
    h
}

pub fn dynamics(cfg: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let params = &cfg.params;
    let (rows, violations, small) = dynamics_table(cfg)?;
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![num(r.t)];
            v.extend(r.s.iter().chain(&r.g0).chain(&r.ginf0).map(|&x| num(x)));
            v.push(num(r.var_gap_ode));
            v.push(opt_num(r.var_gap_exact));
            v.extend([r.var_bound, r.uniform_bound, r.mean_dist, r.dist_lower, r.dist_upper].map(num));
            v
        })
        .collect();
    with_sink(cfg.output.as_deref(), stdout, |w| write_csv(&dynamics_header(params.k()), &records, w))?;
    let n = cfg.particles();
    let summary = DynamicsSummary {
        command: "dynamics",
        version: VERSION,
        params: ParamRecord::new(params, Some(n)),
        initial: cfg.init.as_ref().expect("resolved initial state").counts().to_vec(),
        mu: cfg.mu.as_ref().expect("resolved reference law").weights().to_vec(),
        stationary_variance: stationary_moments(params, n, false)?.cov[0],
        exact_oracle: small,
        violations: violations.clone(),
    };
    with_sink(cfg.summary.as_deref(), stderr, |w| write_json(&summary, w))?;
    if !violations.is_empty() {
        return Err(CliError::Failed(violations.join("; ")));
    }
    Ok(())
}
