use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circulant::spectral_constants;
use crate::error::{Error, Result};
use crate::model::{Configuration, ModelParams};

/// Sampled configurations of independent replicas on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub seed: u64,
    pub k: usize,
    pub n: u64,
    pub times: Vec<f64>,
    /// `records[replica][time index]`
    pub records: Vec<Vec<Configuration>>,
}

impl TrajectoryEnsemble {
    pub fn replicas(&self) -> usize {
        self.records.len()
    }
}

/// Independent stream for each replica.
pub(super) fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// `Exp(rate)` sample by inversion.
pub(super) fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

pub(super) trait JumpRule: Sync {
    fn total_rate(&self, eta: &[u64]) -> f64;
    fn jump(&self, eta: &mut [u64], total: f64, rng: &mut ChaCha8Rng);
}

/// Event rates per site with redistribution onto the particle's own site
/// removed: site `i` fires at `eta(i) [(1 + theta) + p (N - eta(i)) / (N - 1)]`.
pub(super) struct Effective {
    walk: f64,
    kill: f64,
    n: u64,
}

impl Effective {
    pub(super) fn new(params: &ModelParams<f64>, n: u64) -> Self {
        Self { walk: 1.0 + *params.theta(), kill: *params.p() / (n - 1) as f64, n }
    }

    fn site_rate(&self, c: u64) -> f64 {
        c as f64 * (self.walk + self.kill * (self.n - c) as f64)
    }
}

impl JumpRule for Effective {
    fn total_rate(&self, eta: &[u64]) -> f64 {
        eta.iter().map(|&c| self.site_rate(c)).sum()
    }

    fn jump(&self, eta: &mut [u64], total: f64, rng: &mut ChaCha8Rng) {
        let k = eta.len();
        let mut u = rng.random::<f64>() * total;
        let mut i = k - 1;
        for (s, &c) in eta.iter().enumerate() {
            let r = self.site_rate(c);
            if u < r {
                i = s;
                break;
            }
            u -= r;
        }
        // guard against round-off leaving the last site empty
        while eta[i] == 0 {
            i = (i + k - 1) % k;
        }
        let others = self.n - eta[i];
        let per_particle = self.walk + self.kill * others as f64;
        let v = rng.random::<f64>() * per_particle;
        let j = if v < 1.0 {
            (i + 1) % k
        } else if v < self.walk || others == 0 {
            (i + k - 1) % k
        } else {
            let mut m = rng.random_range(0..others);
            let mut j = 0;
            for (s, &c) in eta.iter().enumerate() {
                if s == i {
                    continue;
                }
                if m < c {
                    j = s;
                    break;
                }
                m -= c;
            }
            j
        };
        eta[i] -= 1;
        eta[j] += 1;
    }
}

/// Every particle carries its own clocks; a killed particle jumps onto a
/// uniformly chosen other particle, possibly on its own site.
pub(super) struct Literal {
    walk: f64,
    p: f64,
    n: u64,
}

impl JumpRule for Literal {
    fn total_rate(&self, _eta: &[u64]) -> f64 {
        self.n as f64 * (self.walk + self.p)
    }

    fn jump(&self, eta: &mut [u64], _total: f64, rng: &mut ChaCha8Rng) {
        let k = eta.len();
        let pick = |rng: &mut ChaCha8Rng, eta: &[u64], skip: Option<usize>| {
            let total = self.n - skip.map_or(0, |_| 1);
            let mut m = rng.random_range(0..total);
            for (s, &c) in eta.iter().enumerate() {
                let c = c - u64::from(skip == Some(s));
                if m < c {
                    return s;
                }
                m -= c;
            }
            unreachable!("particle index within total")
        };
        let i = pick(rng, eta, None);
        let v = rng.random::<f64>() * (self.walk + self.p);
        let j = if v < 1.0 {
            (i + 1) % k
        } else if v < self.walk {
            (i + k - 1) % k
        } else {
            pick(rng, eta, Some(i))
        };
        eta[i] -= 1;
        eta[j] += 1;
    }
}

fn check_grid(t_end: f64, sample_times: &[f64]) -> Result<()> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Domain(format!("end time must be finite and nonnegative, got {t_end}")));
    }
    if sample_times.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
        return Err(Error::Domain("sample times must lie in [0, t_end]".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("sample times must be sorted".into()));
    }
    Ok(())
}

fn check_start(params: &ModelParams<f64>, eta0: &Configuration) -> Result<()> {
    if eta0.k() != params.k() {
        return Err(Error::InvalidConfiguration(format!(
            "configuration has {} sites, model has {}",
            eta0.k(),
            params.k()
        )));
    }
    Ok(())
}

pub(super) fn run_path(
    rule: &impl JumpRule,
    eta0: &Configuration,
    t_end: f64,
    sample_times: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Configuration> {
    let mut eta = eta0.counts().to_vec();
    let mut out = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    let mut t = 0.0;
    loop {
        let total = rule.total_rate(&eta);
        let t_jump = t + exponential(rng, total);
        // the state is constant on [t, t_jump)
        while next < sample_times.len() && sample_times[next] < t_jump {
            out.push(Configuration::from_counts_unchecked(eta.clone()));
            next += 1;
        }
        if t_jump > t_end {
            break;
        }
        rule.jump(&mut eta, total, rng);
        t = t_jump;
    }
    out
}

/// One replica (stream 0) of the process started at `eta0`.
pub fn simulate(
    params: &ModelParams<f64>,
    n: u64,
    eta0: &Configuration,
    t_end: f64,
    sample_times: &[f64],
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if eta0.n() != n {
        return Err(Error::InvalidConfiguration(format!("configuration holds {} particles, not {n}", eta0.n())));
    }
    simulate_ensemble(params, eta0, t_end, sample_times, seed, 1)
}

/// `replicas` independent copies; replica `r` uses stream `r` of `seed`, so
/// the result does not depend on how the work is scheduled.
pub fn simulate_ensemble(
    params: &ModelParams<f64>,
    eta0: &Configuration,
    t_end: f64,
    sample_times: &[f64],
    seed: u64,
    replicas: usize,
) -> Result<TrajectoryEnsemble> {
    check_start(params, eta0)?;
    check_grid(t_end, sample_times)?;
    if replicas == 0 {
        return Err(Error::Domain("at least one replica is required".into()));
    }
    let n = eta0.n();
    let rule = Effective::new(params, n);
    let records = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_path(&rule, eta0, t_end, sample_times, &mut replica_rng(seed, r)))
        .collect();
    Ok(TrajectoryEnsemble { seed, k: params.k(), n, times: sample_times.to_vec(), records })
}

/// Same as [`simulate_ensemble`] but driven by per-particle clocks, including
/// redistribution events that land on the particle's own site.
pub fn simulate_literal(
    params: &ModelParams<f64>,
    eta0: &Configuration,
    t_end: f64,
    sample_times: &[f64],
    seed: u64,
    replicas: usize,
) -> Result<TrajectoryEnsemble> {
    check_start(params, eta0)?;
    check_grid(t_end, sample_times)?;
    if replicas == 0 {
        return Err(Error::Domain("at least one replica is required".into()));
    }
    let n = eta0.n();
    let rule = Literal { walk: 1.0 + *params.theta(), p: *params.p(), n };
    let records = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_path(&rule, eta0, t_end, sample_times, &mut replica_rng(seed, r)))
        .collect();
    Ok(TrajectoryEnsemble { seed, k: params.k(), n, times: sample_times.to_vec(), records })
}

/// Burn-in `50 / rho_K` used for stationary estimation.
pub fn default_burn_in(params: &ModelParams<f64>) -> f64 {
    50.0 / spectral_constants(params).rho
}

/// Ensemble sampled at `burn_in + s` for each `s` in `sample_times`.
pub fn simulate_stationary_ensemble(
    params: &ModelParams<f64>,
    eta0: &Configuration,
    burn_in: f64,
    sample_times: &[f64],
    seed: u64,
    replicas: usize,
) -> Result<TrajectoryEnsemble> {
    if !(burn_in >= 0.0) {
        return Err(Error::Domain(format!("burn-in must be nonnegative, got {burn_in}")));
    }
    let shifted: Vec<f64> = sample_times.iter().map(|s| s + burn_in).collect();
    let t_end = shifted.last().copied().unwrap_or(burn_in);
    simulate_ensemble(params, eta0, t_end, &shifted, seed, replicas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, theta: f64, p: f64) -> ModelParams<f64> {
        ModelParams::new(k, theta, p).unwrap()
    }

    #[test]
    fn zero_horizon_returns_start() {
        let eta0 = Configuration::new(vec![3, 0, 1, 2]).unwrap();
        let ens = simulate(&params(4, 1.0, 1.0), 6, &eta0, 0.0, &[0.0], 5).unwrap();
        assert_eq!(ens.records[0][0], eta0);
        assert!(simulate(&params(4, 1.0, 1.0), 5, &eta0, 1.0, &[0.5], 5).is_err());
    }

    #[test]
    fn grids_are_validated() {
        let p = params(3, 1.0, 1.0);
        let eta0 = Configuration::concentrated(3, 4, 0).unwrap();
        assert!(simulate_ensemble(&p, &eta0, 1.0, &[0.5, 0.2], 1, 2).is_err());
        assert!(simulate_ensemble(&p, &eta0, 1.0, &[1.5], 1, 2).is_err());
        assert!(simulate_ensemble(&p, &eta0, -1.0, &[], 1, 2).is_err());
        assert!(simulate_ensemble(&p, &eta0, 1.0, &[0.5], 1, 0).is_err());
        assert!(simulate_ensemble(&params(4, 1.0, 1.0), &eta0, 1.0, &[0.5], 1, 1).is_err());
    }

    #[test]
    fn runs_are_reproducible_and_conserve_mass() {
        let p = params(5, 0.5, 2.0);
        let eta0 = Configuration::concentrated(5, 9, 2).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let a = simulate_ensemble(&p, &eta0, 5.0, &grid, 42, 16).unwrap();
        let b = simulate_ensemble(&p, &eta0, 5.0, &grid, 42, 16).unwrap();
        assert_eq!(a, b);
        let c = simulate_ensemble(&p, &eta0, 5.0, &grid, 43, 16).unwrap();
        assert_ne!(a, c);
        assert!(a.records.iter().flatten().all(|c| c.n() == 9));
        assert_eq!(a.records[0][0], eta0);
        // replica r does not depend on how many replicas run
        let d = simulate_ensemble(&p, &eta0, 5.0, &grid, 42, 4).unwrap();
        assert_eq!(d.records[..], a.records[..4]);
    }

    #[test]
    fn exponential_has_unit_mean() {
        let mut rng = replica_rng(9, 0);
        let m: f64 = (0..200_000).map(|_| exponential(&mut rng, 2.0)).sum::<f64>() / 200_000.0;
        assert!((m - 0.5).abs() < 0.01);
    }
}
