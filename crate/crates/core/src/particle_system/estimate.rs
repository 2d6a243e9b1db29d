use std::io::{Read, Write};

use rayon::prelude::*;

use super::simulation::{exponential, replica_rng, Effective, JumpRule, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::model::{Configuration, ModelParams};

/// One line of the trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub replica: usize,
    pub time: f64,
    pub counts: Vec<u64>,
}

impl TrajectoryEnsemble {
    /// Rows in output order: replica-major, then time.
    pub fn rows(&self) -> Vec<TrajectoryRow> {
        let mut rows = Vec::with_capacity(self.replicas() * self.times.len());
        for (r, rec) in self.records.iter().enumerate() {
            for (&time, c) in self.times.iter().zip(rec) {
                rows.push(TrajectoryRow { replica: r, time, counts: c.counts().to_vec() });
            }
        }
        rows
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// Writes `replica,time,site_0,..,site_{K-1}` with a header row. Times use
/// 17 significant digits so they parse back to the same `f64`.
pub fn write_trajectory_csv<W: Write>(ensemble: &TrajectoryEnsemble, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replica".to_string(), "time".to_string()];
    header.extend((0..ensemble.k).map(|i| format!("site_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for row in ensemble.rows() {
        let mut rec = vec![row.replica.to_string(), format!("{:.16e}", row.time)];
        rec.extend(row.counts.iter().map(u64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "replica" || &header[1] != "time" {
        return Err(Error::Parse("trajectory header must start with replica,time".into()));
    }
    let parse_err = |what: &str, v: &str| Error::Parse(format!("bad {what} field {v:?}"));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let replica = rec[0].parse().map_err(|_| parse_err("replica", &rec[0]))?;
        let time = rec[1].parse().map_err(|_| parse_err("time", &rec[1]))?;
        let counts =
            rec.iter().skip(2).map(|v| v.parse().map_err(|_| parse_err("count", v))).collect::<Result<Vec<u64>>>()?;
        rows.push(TrajectoryRow { replica, time, counts });
    }
    Ok(rows)
}

/// Across-replica estimates at one sample time for sites `k`, `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub time: f64,
    /// Mean of `eta(k)/N`.
    pub mean_k: f64,
    pub mean_l: f64,
    /// Unbiased covariance of `eta(k)/N` and `eta(l)/N`.
    pub cov_kl: f64,
    /// Standard error of `mean_k`.
    pub std_error: f64,
    /// Standard error of `cov_kl`.
    pub cov_std_error: f64,
}

pub fn estimate_moments(ensemble: &TrajectoryEnsemble, k: usize, l: usize) -> Result<Vec<MomentEstimate>> {
    let r = ensemble.replicas();
    if r < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 replicas, got {r}")));
    }
    if k >= ensemble.k || l >= ensemble.k {
        return Err(Error::Domain(format!("sites must be below {}", ensemble.k)));
    }
    let n = ensemble.n as f64;
    let rf = r as f64;
    Ok((0..ensemble.times.len())
        .map(|t| {
            let x: Vec<f64> = ensemble.records.iter().map(|rec| rec[t].counts()[k] as f64 / n).collect();
            let y: Vec<f64> = ensemble.records.iter().map(|rec| rec[t].counts()[l] as f64 / n).collect();
            let mx = x.iter().sum::<f64>() / rf;
            let my = y.iter().sum::<f64>() / rf;
            let prods: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).collect();
            let cov = prods.iter().sum::<f64>() / (rf - 1.0);
            let var_x = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / (rf - 1.0);
            let mp = prods.iter().sum::<f64>() / rf;
            let var_p = prods.iter().map(|z| (z - mp) * (z - mp)).sum::<f64>() / (rf - 1.0);
            MomentEstimate {
                time: ensemble.times[t],
                mean_k: mx,
                mean_l: my,
                cov_kl: cov,
                std_error: (var_x / rf).sqrt(),
                cov_std_error: (var_p / rf).sqrt(),
            }
        })
        .collect())
}

/// Time-averaged stationary moments from batch means.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEstimate {
    /// `s_k`, pooled over all rotations.
    pub s: Vec<f64>,
    pub s_se: Vec<f64>,
    /// `E[eta(k)/N]` per site.
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Number of batch means behind each estimate.
    pub samples: usize,
}

/// Runs `replicas` paths; after `burn_in` each path contributes `batches`
/// consecutive windows of length `batch_len`, and each window yields one
/// time-averaged sample.
pub fn estimate_stationary(
    params: &ModelParams<f64>,
    eta0: &Configuration,
    burn_in: f64,
    batch_len: f64,
    batches: usize,
    replicas: usize,
    seed: u64,
) -> Result<StationaryEstimate> {
    if eta0.k() != params.k() {
        return Err(Error::InvalidConfiguration("configuration and model differ in K".into()));
    }
    if !(burn_in >= 0.0) || !(batch_len > 0.0) {
        return Err(Error::Domain("burn-in must be nonnegative and batch length positive".into()));
    }
    let count = batches * replicas;
    if count < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 batches in total, got {count}")));
    }
    let k = params.k();
    let n = eta0.n();
    let rule = Effective::new(params, n);
    let per_replica: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| batch_means(&rule, eta0, burn_in, batch_len, batches, &mut replica_rng(seed, r)))
        .collect();
    let samples: Vec<&(Vec<f64>, Vec<f64>)> = per_replica.iter().flatten().collect();
    let m = samples.len() as f64;
    let summarize = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| {
        let mut mean = vec![0.0; k];
        let mut se = vec![0.0; k];
        for j in 0..k {
            let mu = samples.iter().map(|s| pick(s)[j]).sum::<f64>() / m;
            let var = samples.iter().map(|s| (pick(s)[j] - mu).powi(2)).sum::<f64>() / (m - 1.0);
            mean[j] = mu;
            se[j] = (var / m).sqrt();
        }
        (mean, se)
    };
    let (s, s_se) = summarize(&|x| &x.0);
    let (mean, mean_se) = summarize(&|x| &x.1);
    Ok(StationaryEstimate { s, s_se, mean, mean_se, samples: samples.len() })
}

fn batch_means(
    rule: &Effective,
    eta0: &Configuration,
    burn_in: f64,
    batch_len: f64,
    batches: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let k = eta0.k();
    let n2 = (eta0.n() * eta0.n()) as f64;
    let nf = eta0.n() as f64;
    let mut eta = eta0.counts().to_vec();
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![0.0; k], vec![0.0; k]); batches];
    let end = burn_in + batch_len * batches as f64;
    let mut t = 0.0;
    while t < end {
        let total = rule.total_rate(&eta);
        let t_jump = t + exponential(rng, total);
        // spread [t, t_jump) over the batch windows it overlaps
        let mut a = t.max(burn_in);
        let b = t_jump.min(end);
        if a < b {
            let pair: Vec<f64> = (0..k)
                .map(|d| (0..k).map(|j| (eta[j] * eta[(j + d) % k]) as f64).sum::<f64>() / (k as f64 * n2))
                .collect();
            while a < b {
                let idx = (((a - burn_in) / batch_len) as usize).min(batches - 1);
                let stop = b.min(burn_in + batch_len * (idx + 1) as f64);
                let w = (stop - a) / batch_len;
                for d in 0..k {
                    out[idx].0[d] += w * pair[d];
                    out[idx].1[d] += w * eta[d] as f64 / nf;
                }
                if stop <= a {
                    break;
                }
                a = stop;
            }
        }
        if t_jump >= end {
            break;
        }
        rule.jump(&mut eta, total, rng);
        t = t_jump;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::simulation::simulate_ensemble;
    use super::*;

    fn ens(records: Vec<Vec<Vec<u64>>>, times: Vec<f64>) -> TrajectoryEnsemble {
        let k = records[0][0].len();
        let n = records[0][0].iter().sum();
        TrajectoryEnsemble {
            seed: 0,
            k,
            n,
            times,
            records: records
                .into_iter()
                .map(|r| r.into_iter().map(|c| Configuration::new(c).unwrap()).collect())
                .collect(),
        }
    }

    #[test]
    fn constant_ensemble_has_zero_spread() {
        let e = ens(vec![vec![vec![1, 2, 3]]; 5], vec![0.0]);
        let m = estimate_moments(&e, 0, 1).unwrap()[0];
        assert_eq!((m.cov_kl, m.std_error, m.cov_std_error), (0.0, 0.0, 0.0));
        assert!((m.mean_k - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn two_point_sample() {
        let e = ens(vec![vec![vec![0, 2, 0]], vec![vec![2, 0, 0]]], vec![1.0]);
        let m = estimate_moments(&e, 0, 0).unwrap()[0];
        assert_eq!(m.mean_k, 0.5);
        assert_eq!(m.cov_kl, 0.5);
        let single = ens(vec![vec![vec![0, 2, 0]]], vec![1.0]);
        assert!(matches!(estimate_moments(&single, 0, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = ModelParams::new(4, 0.3, 1.1).unwrap();
        let eta0 = Configuration::concentrated(4, 7, 1).unwrap();
        let grid = [0.0, 0.1, 1.0 / 3.0, 2.0, std::f64::consts::PI];
        let e = simulate_ensemble(&p, &eta0, 4.0, &grid, 11, 3).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("replica,time,site_0,site_1,site_2,site_3\n"));
        assert_eq!(read_trajectory_csv(&buf[..]).unwrap(), e.rows());
        assert!(read_trajectory_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn batch_means_validate_inputs() {
        let p = ModelParams::new(3, 1.0, 1.0).unwrap();
        let eta0 = Configuration::concentrated(3, 2, 0).unwrap();
        assert!(estimate_stationary(&p, &eta0, 1.0, 1.0, 1, 1, 0).is_err());
        assert!(estimate_stationary(&p, &eta0, 1.0, 0.0, 4, 1, 0).is_err());
    }

    #[test]
    fn time_average_matches_exact_small_instance() {
        // s_0 = 1/4 for K = 3, N = 2, theta = p = 1
        let p = ModelParams::new(3, 1.0, 1.0).unwrap();
        let eta0 = Configuration::concentrated(3, 2, 0).unwrap();
        let est = estimate_stationary(&p, &eta0, 10.0, 5.0, 100, 40, 3).unwrap();
        assert!((est.s[0] - 0.25).abs() < 3.0 * est.s_se[0], "{} +- {}", est.s[0], est.s_se[0]);
        assert!((est.s[1] - 1.0 / 24.0).abs() < 3.0 * est.s_se[1]);
        let total: f64 = est.mean.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
