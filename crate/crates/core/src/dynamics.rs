//! Time evolution of first and second moments of the empirical measure.
//!
//! The mean `s_t = m(eta_0) e^{tQ}`. The covariance field
//! `g_t(k, r) = Cov(eta_t(k)/N, eta_t(r)/N)`, flattened row-major as a row
//! vector of length `K^2`, solves `dg/dt = g Q2_p + w_t` with `g_0 = 0`,
//! `Q2 = Q (+) Q`, `Q2_p = Q2 - p_N I`, `p_N = 2p/(N-1)`, and the drift `w_t`
//! built from `s_t`.

use crate::circulant::{build_q, spectral_constants, BlockCirculant};
use crate::conditioned_walk::{l2_sandwich, Sandwich};
use crate::error::{Error, Result};
use crate::linalg::{kron, DenseMatrix};
use crate::model::{l2_norm_diff, Configuration, ModelParams, ProbVector};
use crate::particle_system::{full_generator, transient_distribution, StateSpace};
use crate::scalar::{Real, Scalar};
use crate::stationary_covariance::stationary_moments;

/// `g_t` as a `K x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceField<T> {
    pub t: T,
    pub g: DenseMatrix<T>,
}

/// `w_t` as a `K x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTerm<T> {
    pub w: DenseMatrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants<T> {
    pub p_n: T,
    pub c_kn: T,
    pub d_k: T,
    pub e_k: T,
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("N must be at least 2, got {n}")));
    }
    Ok(())
}

/// `p_N = 2p / (N-1)`.
pub fn killing_shift<T: Scalar>(params: &ModelParams<T>, n: u64) -> T {
    T::from_int(2) * params.p().clone() / T::from_count(n - 1)
}

/// `s_t = m(eta_0) e^{tQ}`.
pub fn mean_dynamics<T: Real>(params: &ModelParams<T>, eta0: &Configuration, t: T) -> Result<ProbVector<T>> {
    if eta0.k() != params.k() {
        return Err(Error::InvalidConfiguration("configuration and model differ in K".into()));
    }
    let m = eta0.empirical_measure::<T>();
    let w = build_q(params).exp_action(t, m.weights())?;
    Ok(ProbVector::from_weights_unchecked(w))
}

/// `e^{-alpha t} |m(eta_0) - nu|_2 <= |s_t - nu e^{tQ}|_2 <= e^{-rho t} |m(eta_0) - nu|_2`.
pub fn mean_sandwich<T: Real>(
    params: &ModelParams<T>,
    eta0: &Configuration,
    nu: &ProbVector<T>,
    t: T,
) -> Result<Sandwich<T>> {
    l2_sandwich(params, &eta0.empirical_measure(), nu, t)
}

/// `Q2 = Q (+) Q` on `(Z/KZ)^2`.
pub fn q2_operator<T: Scalar>(params: &ModelParams<T>) -> BlockCirculant<T> {
    let q = build_q(params);
    BlockCirculant::kronecker_sum(&q, &q).expect("equal sizes")
}

/// `Q2_p = Q2 - p_N I`.
pub fn q2_killed<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<BlockCirculant<T>> {
    check_n(n)?;
    Ok(q2_operator(params).shifted(-killing_shift(params, n)))
}

/// `e^{tQ} (x) e^{tQ}`.
pub fn q2_exp_kron<T: Real>(params: &ModelParams<T>, t: T) -> Result<DenseMatrix<T>> {
    let e = build_q(params).exp_dense(t)?;
    Ok(kron(&e, &e))
}

/// Drift for mean vector `s`:
/// diagonal `(1/N)[s(k-1) + (1 + theta + 2pN/(N-1)) s(k) + theta s(k+1)] - p_N s(k)^2`;
/// cyclic edge `(a, a+1)`: `-(1/N)[s(a) + theta s(a+1)] - p_N s(a) s(a+1)`;
/// otherwise `-p_N s(k) s(r)`.
pub fn drift_term<T: Scalar>(params: &ModelParams<T>, n: u64, s: &[T]) -> Result<DriftTerm<T>> {
    check_n(n)?;
    let k = params.k();
    if s.len() != k {
        return Err(Error::Domain(format!("mean vector has length {}, expected {k}", s.len())));
    }
    let theta = params.theta().clone();
    let nn = T::from_count(n);
    let p_n = killing_shift(params, n);
    let diag_coef = T::one() + theta.clone() + p_n.clone() * nn.clone();
    let w = DenseMatrix::from_fn(k, k, |a, b| {
        let kill = p_n.clone() * s[a].clone() * s[b].clone();
        if a == b {
            (s[(a + k - 1) % k].clone() + diag_coef.clone() * s[a].clone() + theta.clone() * s[(a + 1) % k].clone())
                / nn.clone()
                - kill
        } else if (a + 1) % k == b || (b + 1) % k == a {
            let lo = if (a + 1) % k == b { a } else { b };
            -((s[lo].clone() + theta.clone() * s[(lo + 1) % k].clone()) / nn.clone()) - kill
        } else {
            -kill
        }
    });
    Ok(DriftTerm { w })
}

/// `w_inf = lim w_t`: diagonal `2(1 + theta + pN/(N-1))/(KN) - 2p/(K^2 (N-1))`,
/// adjacent `-(1 + theta)/(KN) - 2p/(K^2 (N-1))`, otherwise `-2p/(K^2 (N-1))`.
pub fn drift_infinity<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<DriftTerm<T>> {
    check_n(n)?;
    let k = params.k();
    let kk = T::from_count(k as u64);
    let nn = T::from_count(n);
    let one_theta = T::one() + params.theta().clone();
    let base = -(killing_shift(params, n) / (kk.clone() * kk.clone()));
    let kn = kk * nn.clone();
    let diag = T::from_int(2) * (one_theta.clone() + params.p().clone() * nn / T::from_count(n - 1)) / kn.clone()
        + base.clone();
    let adj = -(one_theta / kn) + base.clone();
    let w = DenseMatrix::from_fn(k, k, |a, b| {
        if a == b {
            diag.clone()
        } else if (a + 1) % k == b || (b + 1) % k == a {
            adj.clone()
        } else {
            base.clone()
        }
    });
    Ok(DriftTerm { w })
}

/// Stationary covariance field `g_inf = -w_inf (Q2_p)^{-1}` by a dense
/// solve of `Q2_p^T g^T = -w_inf^T`.
pub fn g_infinity<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<DenseMatrix<T>> {
    let k = params.k();
    let op = q2_killed(params, n)?.to_dense().transpose();
    let w = drift_infinity(params, n)?.w;
    let rhs: Vec<T> = w.as_slice().iter().map(|x| -x.clone()).collect();
    let g = op.solve(&rhs, 1e-14)?;
    Ok(DenseMatrix::from_fn(k, k, |a, b| g[a * k + b].clone()))
}

/// `g(k, r) = cov[(r - k) mod K]`.
pub fn field_from_covariances<T: Scalar>(cov: &[T]) -> DenseMatrix<T> {
    let k = cov.len();
    DenseMatrix::from_fn(k, k, |a, b| cov[(b + k - a) % k].clone())
}

/// Options of the embedded Runge-Kutta integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Local error tolerance per step (absolute, max norm).
    pub tol: f64,
    /// Smallest admissible step.
    pub min_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { tol: 1e-10, min_step: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationReport<T> {
    pub fields: Vec<CovarianceField<T>>,
    pub accepted: usize,
    pub rejected: usize,
    /// Largest embedded error estimate over accepted steps.
    pub max_local_error: T,
}

struct CovarianceOde<'a, T> {
    params: &'a ModelParams<T>,
    n: u64,
    op: BlockCirculant<T>,
    m0: Vec<T>,
}

impl<T: Real> CovarianceOde<'_, T> {
    fn rhs(&self, t: T, g: &[T]) -> Result<Vec<T>> {
        let s = build_q(self.params).exp_action(t, &self.m0)?;
        let w = drift_term(self.params, self.n, &s)?.w;
        let mut out = self.op.vec_mul(g);
        for (o, x) in out.iter_mut().zip(w.as_slice()) {
            *o = *o + *x;
        }
        Ok(out)
    }
}

/// `g_t` on an increasing grid starting at 0 (Dormand-Prince 5(4)).
pub fn integrate_g<T: Real>(
    params: &ModelParams<T>,
    eta0: &Configuration,
    t_grid: &[T],
) -> Result<Vec<CovarianceField<T>>> {
    Ok(integrate_g_with(params, eta0, t_grid, IntegratorOptions::default())?.fields)
}

pub fn integrate_g_with<T: Real>(
    params: &ModelParams<T>,
    eta0: &Configuration,
    t_grid: &[T],
    opts: IntegratorOptions,
) -> Result<IntegrationReport<T>> {
    let k = params.k();
    if eta0.k() != k {
        return Err(Error::InvalidConfiguration("configuration and model differ in K".into()));
    }
    let n = eta0.n();
    if t_grid.first() != Some(&T::zero()) {
        return Err(Error::Domain("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    let ode = CovarianceOde { params, n, op: q2_killed(params, n)?, m0: eta0.empirical_measure::<T>().into_weights() };
    let tol = T::lit(opts.tol);
    let min_step = T::lit(opts.min_step);
    let lit = T::lit;
    let a: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    let c = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // difference between the fifth- and fourth-order weights
    let e = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let dim = k * k;
    let mut y = vec![T::zero(); dim];
    let mut t = T::zero();
    let scale = T::lit(2.0) * (T::one() + *params.theta()) + killing_shift(params, n);
    let mut h = (lit(0.01) / scale).min(lit(0.01));
    let mut k1 = ode.rhs(t, &y)?;
    let mut fields = vec![CovarianceField { t, g: DenseMatrix::from_fn(k, k, |_, _| T::zero()) }];
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut max_err = T::zero();
    for &target in &t_grid[1..] {
        while t < target {
            let step = h.min(target - t);
            let mut stages: Vec<Vec<T>> = vec![k1.clone()];
            let mut y5 = vec![T::zero(); dim];
            for (si, row) in a.iter().enumerate() {
                let mut yi = y.clone();
                for (j, &aij) in row.iter().enumerate() {
                    if aij != 0.0 {
                        let f = step * lit(aij);
                        for (v, d) in yi.iter_mut().zip(&stages[j]) {
                            *v = *v + f * *d;
                        }
                    }
                }
                if si == 5 {
                    y5 = yi.clone();
                }
                stages.push(ode.rhs(t + step * lit(c[si + 1]), &yi)?);
            }
            let err = (0..dim)
                .map(|i| {
                    let d = (0..7).fold(T::zero(), |acc, j| acc + lit(e[j]) * stages[j][i]);
                    (step * d).abs()
                })
                .fold(T::zero(), T::max);
            if err <= tol {
                t = if target - t <= step { target } else { t + step };
                y = y5;
                k1 = stages.pop().expect("seven stages");
                accepted += 1;
                max_err = max_err.max(err);
            } else {
                rejected += 1;
            }
            let factor = if err == T::zero() {
                lit(5.0)
            } else {
                (lit(0.9) * (tol / err).powf(lit(0.2))).max(lit(0.2)).min(lit(5.0))
            };
            h = step * factor;
            if h < min_step {
                return Err(Error::StepSizeUnderflow { time: t.approx(), step: h.approx() });
            }
        }
        fields.push(CovarianceField { t, g: DenseMatrix::from_fn(k, k, |r, c| y[r * k + c]) });
    }
    Ok(IntegrationReport { fields, accepted, rejected, max_local_error: max_err })
}

/// Mean and covariance field of `eta_t / N` from the full chain, by
/// uniformization of the generator on all configurations.
pub fn exact_moments(params: &ModelParams<f64>, eta0: &Configuration, t: f64) -> Result<(Vec<f64>, DenseMatrix<f64>)> {
    let k = params.k();
    let n = eta0.n();
    let space = StateSpace::enumerate(k, n)?;
    let gen = full_generator(params, &space)?;
    let mut nu0 = vec![0.0; space.len()];
    nu0[space.index_of(eta0).ok_or_else(|| Error::InvalidConfiguration("unknown state".into()))?] = 1.0;
    let law = transient_distribution(&gen, &nu0, t)?;
    let nf = n as f64;
    let mut mean = vec![0.0; k];
    let mut second = DenseMatrix::<f64>::zeros(k, k);
    for (c, &w) in space.states().iter().zip(&law) {
        for a in 0..k {
            let xa = c.counts()[a] as f64 / nf;
            mean[a] += w * xa;
            for b in 0..k {
                second[(a, b)] += w * xa * c.counts()[b] as f64 / nf;
            }
        }
    }
    let g = DenseMatrix::from_fn(k, k, |a, b| second[(a, b)] - mean[a] * mean[b]);
    Ok((mean, g))
}

pub fn bound_constants<T: Real>(params: &ModelParams<T>, n: u64) -> Result<BoundConstants<T>> {
    check_n(n)?;
    let kk = T::from_count(params.k() as u64);
    let nn = T::from_count(n);
    let theta = *params.theta();
    let p = *params.p();
    let two = T::lit(2.0);
    let geom = (kk + T::one()) * (kk - T::one()).sqrt() / (kk * kk.sqrt());
    let nm1 = nn - T::one();
    let c_kn = two / nn * (T::one() + theta + p / nm1 + p * nn * geom / nm1);
    let d_k = two * (T::one() + theta + p * geom);
    let e_k = (kk - T::one()) / (kk * kk) + (kk * kk - T::one()) / (T::lit(6.0) * kk * kk * (T::one() + theta));
    Ok(BoundConstants { p_n: killing_shift(params, n), c_kn, d_k, e_k })
}

/// `C (e^{-p_N t} - e^{-rho t}) / (rho - p_N) + e^{-p_N t} Var`, with the
/// limit `C t e^{-rho t}` when `rho = p_N`.
pub fn variance_bound<T: Real>(params: &ModelParams<T>, n: u64, t: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
    }
    let bc = bound_constants(params, n)?;
    let rho = spectral_constants(params).rho;
    let var = stationary_moments(params, n, false)?.cov[0];
    let gap = rho - bc.p_n;
    let factor =
        if gap.abs() < T::lit(1e-12) { t * (-rho * t).exp() } else { ((-bc.p_n * t).exp() - (-rho * t).exp()) / gap };
    Ok(bc.c_kn * factor + (-bc.p_n * t).exp() * var)
}

/// `C / max(rho, p_N) + 2 Var`.
pub fn uniform_variance_bound<T: Real>(params: &ModelParams<T>, n: u64) -> Result<T> {
    let bc = bound_constants(params, n)?;
    let rho = spectral_constants(params).rho;
    let var = stationary_moments(params, n, false)?.cov[0];
    Ok(bc.c_kn / rho.max(bc.p_n) + T::lit(2.0) * var)
}

/// `(lower, upper)` for `E |m(eta_t) - mu e^{tQ}|_2`:
/// `lower = e^{-alpha t} d`, `upper = sqrt(K/N) (D (1 - e^{-rho t})/rho + E)^{1/2} + e^{-rho t} d`
/// with `d = |m(eta) - mu|_2`. The upper bound holds up to `o(1/sqrt(N))`.
pub fn empirical_distance_bound<T: Real>(
    params: &ModelParams<T>,
    n: u64,
    t: T,
    eta: &Configuration,
    mu: &ProbVector<T>,
) -> Result<(T, T)> {
    if eta.n() != n || eta.k() != params.k() || mu.len() != params.k() {
        return Err(Error::InvalidConfiguration("configuration, law and model disagree".into()));
    }
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
    }
    let bc = bound_constants(params, n)?;
    let sc = spectral_constants(params);
    let d = l2_norm_diff(eta.empirical_measure::<T>().weights(), mu.weights());
    let kk = T::from_count(params.k() as u64);
    let nn = T::from_count(n);
    let lower = (-sc.alpha * t).exp() * d;
    let spread = (bc.d_k * (T::one() - (-sc.rho * t).exp()) / sc.rho + bc.e_k).sqrt();
    let upper = (kk / nn).sqrt() * spread + (-sc.rho * t).exp() * d;
    Ok((lower, upper))
}
