//! Verification checks with a JSON report: one entry per check, carrying
//! the measured residual and the threshold it was held to.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cyclefv::circulant::{build_q, cloez_lambda, q_spectrum_closed_form, spectral_constants};
use cyclefv::conditioned_walk::l2_sandwich;
use cyclefv::dynamics::{
    empirical_distance_bound, exact_moments, field_from_covariances, g_infinity, integrate_g, q2_exp_kron, q2_operator,
    variance_bound,
};
use cyclefv::linalg::kron_sum;
use cyclefv::particle_system::{
    estimate_stationary, full_generator, generator_moments, kolmogorov_products, reversibility_report,
    simulate_ensemble, state_count, stationary_distribution_exact, write_trajectory_csv, MomentFunction, StateSpace,
    DENSE_LIMIT,
};
use cyclefv::stationary_covariance::{cov_asymptotic, sk_closed_form, solve_sk_linear, stationary_moments};
use cyclefv::{Configuration, Exact, Params, Prob};

use crate::commands::ParamRecord;
use crate::output::{with_sink, write_json};
use crate::{CliError, CliResult, ExperimentConfig, VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check_id: &'static str,
    /// The statement the check exercises.
    pub paper_ref: &'static str,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub version: &'static str,
    pub seed: u64,
    pub replicas: usize,
    pub params: ParamRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_mismatch: Option<f64>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

type Check = fn(&Ctx) -> CliResult<(f64, f64, bool)>;

/// `(id, statement, check)`.
const CHECKS: [(&str, &str, Check); 17] = [
    ("thm1", "two-sided exponential decay of the conditioned walk in l2", thm1),
    ("spectrum", "closed-form spectrum and spectral constants of the walk generator", spectrum),
    ("coupling", "coupling constant positive for K <= 5 and zero for K >= 6", coupling),
    ("covariance_linear", "closed-form stationary correlations solve the circulant system", covariance_linear),
    (
        "covariance_enumeration",
        "closed-form stationary correlations match the exact stationary law",
        covariance_enumeration,
    ),
    ("generator_moments", "generator applied to one- and two-point functions", generator_moment_check),
    ("rotation", "rotation invariance and uniform mean of the stationary law", rotation),
    ("reversibility", "the particle system is reversible only for K = 3, theta = 1", reversibility),
    ("kolmogorov", "rate products around the three-state cycle", kolmogorov),
    ("asymptotics", "large-N expansion of the stationary covariances", asymptotics),
    ("dynamics_ode", "covariance field ODE against the full chain", dynamics_ode),
    ("g_infinity", "stationary covariance field by three routes", g_inf),
    ("kronecker", "pair generator is the Kronecker sum and its exponential factorizes", kronecker),
    ("variance_bound", "transient variance bound against the full chain", variance),
    ("distance_bound", "expected distance of the empirical measure lies in the bound band", distance),
    ("simulator", "simulated stationary correlations against the closed form", simulator),
    ("determinism", "identical seeds give identical trajectories for any thread count", determinism),
];

struct Ctx {
    params: Params,
    /// Used on the second side of every cross-check.
    second: Params,
    n: u64,
    seed: u64,
    replicas: usize,
}

fn exact_of(x: f64) -> Exact {
    Exact::from_float(x).expect("finite parameter")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `(residual, threshold)` with the usual `residual <= threshold` verdict.
fn below(residual: f64, threshold: f64) -> CliResult<(f64, f64, bool)> {
    Ok((residual, threshold, residual <= threshold))
}

fn thm1(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let draw = |rng: &mut ChaCha8Rng| -> CliResult<Prob> {
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        Ok(Prob::new(w.iter().map(|x| x / total).collect())?)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nu = draw(&mut rng)?;
        let mu = draw(&mut rng)?;
        for &t in &[0.0, 0.1, 0.5, 1.0, 3.0] {
            let s = l2_sandwich(&c.params, &nu, &mu, t)?;
            let bounds = l2_sandwich(&c.second, &nu, &mu, t)?;
            worst = worst.max(bounds.lower - s.actual).max(s.actual - bounds.upper);
        }
    }
    below(worst.max(0.0), 1e-10)
}

fn spectrum(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let q = build_q(&c.params);
    let poly = q.eigenvalues();
    let closed = q_spectrum_closed_form(&c.second);
    let mut worst: f64 = 0.0;
    for (mode, (a, b)) in poly.eigenvalues.iter().zip(&closed.eigenvalues).enumerate() {
        worst = worst.max((a - b).norm()).max(q.fourier_residual(mode, *b));
    }
    let sc = spectral_constants(&c.params);
    worst = worst.max((sc.rho - poly.gap()).abs()).max((sc.alpha - poly.max_decay()).abs());
    below(worst, 1e-10)
}

fn coupling(_: &Ctx) -> CliResult<(f64, f64, bool)> {
    let mut wrong = 0.0;
    for k in 3..=10 {
        let l = cloez_lambda(&build_q(&Params::new(k, 1.0, 1.0)?).to_dense())?;
        if (k >= 6) != (l == 0.0) {
            wrong += 1.0;
        }
    }
    below(wrong, 0.0)
}

fn covariance_linear(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let closed = stationary_moments(&c.params, c.n, false)?;
    let linear = solve_sk_linear(&c.second, c.n)?;
    below(max_diff(&closed.s, &linear.s), 1e-11)
}

fn stationary_law(params: &Params, n: u64) -> CliResult<(StateSpace, Vec<f64>)> {
    let space = StateSpace::enumerate(params.k(), n)?;
    let nu = stationary_distribution_exact(&full_generator(params, &space)?)?;
    Ok((space, nu))
}

/// `E[eta(a) eta(b)] / N^2` for all pairs.
fn pair_moments(space: &StateSpace, law: &[f64]) -> Vec<Vec<f64>> {
    let k = space.k();
    let n2 = (space.n() * space.n()) as f64;
    let mut m = vec![vec![0.0; k]; k];
    for (cfg, &w) in space.states().iter().zip(law) {
        for (a, row) in m.iter_mut().enumerate() {
            for (b, x) in row.iter_mut().enumerate() {
                *x += w * (cfg.counts()[a] * cfg.counts()[b]) as f64 / n2;
            }
        }
    }
    m
}

fn covariance_enumeration(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let closed = stationary_moments(&c.params, c.n, false)?;
    let (space, nu) = stationary_law(&c.second, c.n)?;
    let m = pair_moments(&space, &nu);
    below(max_diff(&closed.s, &m[0]), 1e-10)
}

fn generator_moment_check(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let space = StateSpace::enumerate(k, c.n)?;
    let gen = full_generator(&c.second, &space)?;
    let mut worst: f64 = 0.0;
    let mut compare = |which: MomentFunction, a: i64, b: i64, f: &dyn Fn(&Configuration) -> f64| -> CliResult<()> {
        let values: Vec<f64> = space.states().iter().map(f).collect();
        let brute = gen.apply(&values);
        for (r, cfg) in space.states().iter().enumerate() {
            worst = worst.max((generator_moments(&c.params, cfg, which, a, b)? - brute[r]).abs());
        }
        Ok(())
    };
    for a in 0..k as i64 {
        compare(MomentFunction::Fk, a, a, &|s| s.at(a) as f64)?;
        compare(MomentFunction::Fkk, a, a, &|s| (s.at(a) * s.at(a)) as f64)?;
        compare(MomentFunction::FkKplus1, a, a + 1, &|s| (s.at(a) * s.at(a + 1)) as f64)?;
        for d in 2..=k as i64 - 2 {
            compare(MomentFunction::Fkl, a, a + d, &|s| (s.at(a) * s.at(a + d)) as f64)?;
        }
    }
    below(worst, 1e-10)
}

fn rotation(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let (space, nu) = stationary_law(&c.params, c.n)?;
    let mut worst: f64 = 0.0;
    for orbit in space.rotation_orbits() {
        let lo = orbit.iter().map(|&i| nu[i]).fold(f64::INFINITY, f64::min);
        let hi = orbit.iter().map(|&i| nu[i]).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    let k = c.params.k();
    for site in 0..k {
        let m: f64 = space.states().iter().zip(&nu).map(|(s, w)| w * s.counts()[site] as f64).sum::<f64>() / c.n as f64;
        worst = worst.max((m - 1.0 / k as f64).abs());
    }
    below(worst, 1e-11)
}

fn reversibility(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let r = reversibility_report(&c.params, c.n)?.max_detailed_balance_residual;
    let reversible = c.second.k() == 3 && *c.second.theta() == 1.0;
    let pass = if reversible { r < 1e-11 } else { r > 1e-3 || *c.params.p() < 0.1 };
    Ok((r, 1e-11, pass))
}

fn kolmogorov(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let th = exact_of(*c.params.theta());
    let p = exact_of(*c.params.p());
    let (fwd, bwd) = kolmogorov_products(&cyclefv::ExactParams::new(3, th, p.clone())?, c.n)?;
    let th2 = exact_of(*c.second.theta());
    let nn = Exact::from_integer(c.n.into());
    let want_f = (p.clone() + Exact::from_integer(1.into())) * nn.clone();
    let want_b = nn * th2.clone() * th2.clone() * (p + th2);
    let residual = if fwd == want_f && bwd == want_b { 0.0 } else { 1.0 };
    below(residual, 0.0)
}

fn asymptotics(_: &Ctx) -> CliResult<(f64, f64, bool)> {
    use num_traits::ToPrimitive;
    let prm = cyclefv::ExactParams::new(3, Exact::from_integer(1.into()), Exact::from_integer(1.into()))?;
    let n = 100_000u64;
    let cov = sk_closed_form(&prm, n)?.cov[0].clone();
    let (first, _) = cov_asymptotic(&prm, n, 0)?;
    let rel = ((cov.clone() - first.clone()) / first).to_f64().unwrap_or(f64::INFINITY).abs();
    below(rel, 0.01)
}

fn dynamics_ode(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let space = StateSpace::enumerate(c.params.k(), c.n)?;
    let mut worst: f64 = 0.0;
    for eta in space.states() {
        let fields = integrate_g(&c.params, eta, &[0.0, 0.1, 0.5, 2.0])?;
        for f in &fields[1..] {
            let (_, g) = exact_moments(&c.second, eta, f.t)?;
            worst = worst.max(f.g.max_abs_diff(&g));
        }
    }
    below(worst, 1e-7)
}

fn g_inf(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let solved = g_infinity(&c.params, c.n)?;
    let closed = field_from_covariances(&stationary_moments(&c.second, c.n, false)?.cov);
    let (space, nu) = stationary_law(&c.params, c.n)?;
    let m = pair_moments(&space, &nu);
    let kk = (k * k) as f64;
    let enumerated = cyclefv::Matrix::from_fn(k, k, |a, b| m[a][b] - 1.0 / kk);
    let worst =
        solved.max_abs_diff(&closed).max(solved.max_abs_diff(&enumerated)).max(closed.max_abs_diff(&enumerated));
    below(worst, 1e-9)
}

fn kronecker(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let q = build_q(&c.params).to_dense();
    let sum = kron_sum(&q, &q);
    let q2 = q2_operator(&c.second);
    let mut worst = q2.to_dense().max_abs_diff(&sum);
    for &t in &[0.3, 0.7, 2.0] {
        let kron = q2_exp_kron(&c.params, t)?;
        for r in 0..k * k {
            let mut e = vec![0.0; k * k];
            e[r] = 1.0;
            let row = q2.exp_action(t, &e)?;
            worst = worst.max(max_diff(&row, kron.row(r)));
        }
    }
    below(worst, 1e-10)
}

fn variance(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let var = stationary_moments(&c.params, c.n, false)?.cov[0];
    let space = StateSpace::enumerate(k, c.n)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let t = 0.15 * i as f64;
        let bound = variance_bound(&c.params, c.n, t)?;
        for eta in space.states() {
            let (_, g) = exact_moments(&c.second, eta, t)?;
            let gap = (0..k).map(|a| (g[(a, a)] - var).abs()).fold(0.0, f64::max);
            worst = worst.max(gap - bound);
        }
    }
    below(worst.max(0.0), 1e-9)
}

fn distance(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let (k, n) = (4usize, 50u64);
    let prm = Params::new(k, *c.params.theta(), *c.params.p())?;
    let second = Params::new(k, *c.second.theta(), *c.second.p())?;
    let eta = Configuration::concentrated(k, n, 0)?;
    let mu = Prob::dirac(k, 0);
    let t = 1.0;
    let ens = simulate_ensemble(&prm, &eta, t, &[t], c.seed, c.replicas)?;
    let target = build_q(&prm).exp_action(t, mu.weights())?;
    let dist: Vec<f64> =
        ens.records.iter().map(|rec| max_l2(rec[0].empirical_measure::<f64>().weights(), &target)).collect();
    let r = dist.len() as f64;
    let mean = dist.iter().sum::<f64>() / r;
    let se = (dist.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt();
    let (lower, upper) = empirical_distance_bound(&second, n, t, &eta, &mu)?;
    let slack = 0.5 * (k as f64 / n as f64).sqrt();
    let outside = (lower - 3.0 * se - mean).max(mean - upper - 3.0 * se - slack).max(0.0);
    below(outside, 0.0)
}

fn max_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn simulator(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let k = c.params.k();
    let eta = Configuration::concentrated(k, c.n, 0)?;
    let batches = (c.replicas / 4).max(10);
    let est = estimate_stationary(&c.params, &eta, 20.0, 1.0, batches, 20, c.seed)?;
    let closed = stationary_moments(&c.second, c.n, false)?;
    let mut worst: f64 = 0.0;
    for d in 0..k {
        worst = worst.max((est.s[d] - closed.s[d]).abs() / est.s_se[d]);
        worst = worst.max((est.mean[d] - 1.0 / k as f64).abs() / est.mean_se[d]);
    }
    below(worst, 4.0)
}

fn trajectory_bytes(c: &Ctx, threads: usize) -> CliResult<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(cyclefv::Error::Domain(e.to_string())))?;
    pool.install(|| {
        let eta = Configuration::concentrated(c.params.k(), c.n, 0)?;
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let ens = simulate_ensemble(&c.params, &eta, 5.0, &grid, c.seed, 32)?;
        let mut out = Vec::new();
        write_trajectory_csv(&ens, &mut out)?;
        Ok(out)
    })
}

fn determinism(c: &Ctx) -> CliResult<(f64, f64, bool)> {
    let a = trajectory_bytes(c, 1)?;
    let b = trajectory_bytes(c, 1)?;
    let d = trajectory_bytes(c, 4)?;
    below(if a == b && a == d { 0.0 } else { 1.0 }, 0.0)
}

/// Ids accepted by `--only`, in report order.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs the selected checks.
pub fn checks(cfg: &ExperimentConfig) -> CliResult<Vec<CheckResult>> {
    let n = cfg.particles();
    let params = cfg.params.clone();
    if state_count(params.k(), n) > DENSE_LIMIT as u128 {
        return Err(CliError::Usage(format!(
            "reference instance K={}, N={n} has more than {DENSE_LIMIT} configurations",
            params.k()
        )));
    }
    let second = Params::new(params.k(), *params.theta() + cfg.theta_mismatch, *params.p())?;
    let ctx = Ctx { params, second, n, seed: cfg.seed, replicas: cfg.replicas };
    if let Some(only) = &cfg.only {
        if let Some(bad) = only.iter().find(|id| !CHECKS.iter().any(|(c, _, _)| c == id)) {
            let known: Vec<&str> = CHECKS.iter().map(|c| c.0).collect();
            return Err(CliError::Usage(format!("unknown check {bad:?}; known: {}", known.join(", "))));
        }
    }
    let selected = CHECKS.iter().filter(|(id, _, _)| cfg.only.as_ref().is_none_or(|o| o.iter().any(|x| x == id)));
    let mut out = Vec::new();
    for (id, statement, check) in selected {
        let (residual, threshold, pass) = check(&ctx)?;
        out.push(CheckResult { check_id: id, paper_ref: statement, residual, threshold, pass });
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let results = checks(cfg)?;
    let pass = results.iter().all(|r| r.pass);
    let report = VerifyReport {
        version: VERSION,
        seed: cfg.seed,
        replicas: cfg.replicas,
        params: ParamRecord::new(&cfg.params, cfg.n),
        theta_mismatch: (cfg.theta_mismatch != 0.0).then_some(cfg.theta_mismatch),
        checks: results.clone(),
        pass,
    };
    with_sink(cfg.output.as_deref(), stdout, |w| write_json(&report, w))?;
    if !pass {
        let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.check_id).collect();
        return Err(CliError::Failed(failed.join(", ")));
    }
    Ok(())
}
