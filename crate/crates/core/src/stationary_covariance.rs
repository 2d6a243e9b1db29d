//! Stationary two-point correlations `s_k = E[eta(0) eta(k)] / N^2` of the
//! particle proportions.
//!
//! `s` solves the symmetric circulant system
//! `circ(beta, -1, 0, .., 0, -1) s = -(1/KN) (gamma, 1, 0, .., 0, 1)` with
//! `beta = 2(1 + delta)`, `gamma = -2(1 + N delta)` and
//! `delta = p / ((N-1)(1+theta))`. Two routes are provided: a dense solve and
//! a closed form in ratios of the auxiliary Chebyshev families at `beta`.

use crate::chebyshev::{self, PolyFamily};
use crate::circulant::CirculantMatrix;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::ModelParams;
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMomentSet<T> {
    pub params: ModelParams<T>,
    pub n: u64,
    pub beta: T,
    pub gamma: T,
    pub s: Vec<T>,
    pub cov: Vec<T>,
}

impl<T: Scalar> StationaryMomentSet<T> {
    fn from_s(params: &ModelParams<T>, n: u64, s: Vec<T>) -> Self {
        let (beta, gamma) = beta_gamma(params, n);
        let kk = T::from_count(params.k() as u64);
        let mean_sq = T::one() / (kk.clone() * kk);
        let cov = s.iter().map(|x| x.clone() - mean_sq.clone()).collect();
        Self { params: params.clone(), n, beta, gamma, s, cov }
    }

    pub fn variance(&self) -> &T {
        &self.cov[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostSymmetricSystem<T> {
    pub a: CirculantMatrix<T>,
    pub b: Vec<T>,
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("N must be at least 2, got {n}")));
    }
    Ok(())
}

/// `delta = p / ((N-1)(1+theta))`, so that `beta = 2(1 + delta)`.
pub fn delta<T: Scalar>(params: &ModelParams<T>, n: u64) -> T {
    params.p().clone() / (T::from_count(n - 1) * (T::one() + params.theta().clone()))
}

/// `(beta_N, gamma_N)`.
pub fn beta_gamma<T: Scalar>(params: &ModelParams<T>, n: u64) -> (T, T) {
    let d = delta(params, n);
    let two = T::from_int(2);
    let beta = two.clone() * (T::one() + d.clone());
    let gamma = -(two * (T::one() + T::from_count(n) * d));
    (beta, gamma)
}

pub fn build_system<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<AlmostSymmetricSystem<T>> {
    check_n(n)?;
    let k = params.k();
    let (beta, gamma) = beta_gamma(params, n);
    let mut row = vec![T::zero(); k];
    row[0] = beta;
    row[1] = -T::one();
    row[k - 1] = -T::one();
    let scale = -(T::one() / (T::from_count(k as u64) * T::from_count(n)));
    let mut b = vec![T::zero(); k];
    b[0] = scale.clone() * gamma;
    b[1] = scale.clone();
    b[k - 1] = scale;
    Ok(AlmostSymmetricSystem { a: CirculantMatrix::new(row)?, b })
}

/// `J v` where `J` fixes index 0 and reverses `1..K`.
pub fn reflect<T: Clone>(v: &[T]) -> Vec<T> {
    let k = v.len();
    (0..k).map(|i| v[(k - i) % k].clone()).collect()
}

/// `|v - J v|_inf`.
pub fn almost_symmetry_residual<T: Scalar>(v: &[T]) -> T {
    v.iter().zip(reflect(v)).fold(T::zero(), |m, (a, b)| T::max_of(m, (a.clone() - b).magnitude()))
}

/// `|J A J - A|_inf` for the system matrix.
pub fn almost_symmetry_sandwich<T: Scalar>(system: &AlmostSymmetricSystem<T>) -> T {
    let a = system.a.to_dense();
    let k = a.rows();
    let jaj = DenseMatrix::from_fn(k, k, |r, c| a[((k - r) % k, (k - c) % k)].clone());
    jaj.add(&a.scale(&-T::one())).norm_inf()
}

/// Dense solve of the stationary system.
///
/// The matrix equals `L + 2 delta I` with `L = circ(2, -1, 0, .., 0, -1)`
/// singular, so it is nearly singular when `delta` is small. Writing
/// `s = 1/K^2 + u` with `sum(u) = 0` and solving
/// `(L + 2 delta I + 1 1^T) u = b - (2 delta / K^2) 1` removes the near null
/// direction; all right-hand-side entries are formed from `delta` directly.
pub fn solve_sk_linear<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<StationaryMomentSet<T>> {
    check_n(n)?;
    let k = params.k();
    let kk = T::from_count(k as u64);
    let d = delta(params, n);
    let two = T::from_int(2);
    let two_d = two.clone() * d.clone();
    let m = DenseMatrix::from_fn(k, k, |r, c| {
        let circ = if r == c {
            two.clone() + two_d.clone()
        } else if (c + k - r) % k == 1 || (r + k - c) % k == 1 {
            -T::one()
        } else {
            T::zero()
        };
        circ + T::one()
    });
    let kn = kk.clone() * T::from_count(n);
    let shift = two_d.clone() / (kk.clone() * kk.clone());
    let mut rhs = vec![-shift.clone(); k];
    rhs[0] = two.clone() / kn.clone() + two_d / kk.clone() - shift.clone();
    rhs[1] = rhs[1].clone() - T::one() / kn.clone();
    rhs[k - 1] = rhs[k - 1].clone() - T::one() / kn;
    let u = m.solve(&rhs, 1e-14)?;
    let base = T::one() / (kk.clone() * kk);
    let s = u.into_iter().map(|x| x + base.clone()).collect();
    Ok(StationaryMomentSet::from_s(params, n, s))
}

fn families(k: usize) -> (PolyFamily, PolyFamily, i64) {
    if k % 2 == 0 {
        (PolyFamily::Neven, PolyFamily::Deven, (k / 2) as i64)
    } else {
        (PolyFamily::Nodd, PolyFamily::Dodd, (k / 2) as i64)
    }
}

fn assemble<T: Scalar>(
    params: &ModelParams<T>,
    n: u64,
    mut ratio: impl FnMut(i64) -> Result<T>,
) -> Result<StationaryMomentSet<T>> {
    check_n(n)?;
    let k = params.k();
    let k2 = (k / 2) as i64;
    let kn = T::from_count(k as u64) * T::from_count(n);
    let pre = T::from_count(n - 1) / kn.clone();
    let mut half = Vec::with_capacity(k2 as usize + 1);
    for j in 0..=k2 {
        half.push(pre.clone() * ratio(k2 - j)?);
    }
    half[0] = half[0].clone() + T::one() / kn;
    let s = (0..k).map(|j| half[j.min(k - j)].clone()).collect();
    Ok(StationaryMomentSet::from_s(params, n, s))
}

/// Closed form: `s_k = (N-1)/(KN) N_{K2-k}(beta) / D_{K2}(beta)` for
/// `0 <= k <= K2`, plus `1/(KN)` at `k = 0`, extended by `s_k = s_{K-k}`.
/// Even `K = 2 K2` uses `N_even`, `D_even`; odd `K = 2 K2 + 1` uses `N_odd`, `D_odd`.
///
/// Propagates [`Error::Overflow`] from the polynomial recurrences.
pub fn sk_closed_form<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<StationaryMomentSet<T>> {
    check_n(n)?;
    let (num, den, k2) = families(params.k());
    let (beta, _) = beta_gamma(params, n);
    let d = chebyshev::eval(den, k2, &beta)?;
    assemble(params, n, |m| Ok(chebyshev::eval(num, m, &beta)? / d.clone()))
}

/// Closed form evaluated through rescaled recurrences; never overflows.
pub fn sk_closed_form_scaled<T: Real>(params: &ModelParams<T>, n: u64) -> Result<StationaryMomentSet<T>> {
    check_n(n)?;
    let (num, den, k2) = families(params.k());
    let (beta, _) = beta_gamma(params, n);
    assemble(params, n, |m| chebyshev::ratio(num, m, den, k2, beta))
}

/// Closed form with overflow fallback; with `checked` the result must also
/// agree with [`solve_sk_linear`] to `1e-11` in every component.
pub fn stationary_moments<T: Real>(params: &ModelParams<T>, n: u64, checked: bool) -> Result<StationaryMomentSet<T>> {
    let closed = match sk_closed_form(params, n) {
        Err(Error::Overflow { .. }) => sk_closed_form_scaled(params, n)?,
        other => other?,
    };
    if checked {
        let linear = solve_sk_linear(params, n)?;
        let tol = T::lit(1e-11);
        for (i, (a, b)) in closed.s.iter().zip(&linear.s).enumerate() {
            if !((*a - *b).abs() <= tol) {
                return Err(Error::CheckFailed(format!("s_{i}: closed form {a:?} vs linear solve {b:?}")));
            }
        }
    }
    Ok(closed)
}

/// `cov[k] = s_k - 1/K^2`.
pub fn stationary_covariances<T: Real>(params: &ModelParams<T>, n: u64) -> Result<Vec<T>> {
    Ok(stationary_moments(params, n, false)?.cov)
}

/// Covariances are nonincreasing in graph distance on `0..=K/2`.
pub fn check_monotone<T: Scalar>(cov: &[T]) -> bool {
    let tol = T::lit(1e-14);
    (0..cov.len() / 2).all(|k| cov[k] >= cov[k + 1].clone() - tol.clone())
}

/// First- and second-order large-`N` expansions of `cov[k]`.
pub fn cov_asymptotic<T: Scalar>(params: &ModelParams<T>, n: u64, k: usize) -> Result<(T, T)> {
    check_n(n)?;
    let kk_u = params.k();
    if k >= kk_u {
        return Err(Error::Domain(format!("site {k} outside 0..{kk_u}")));
    }
    let kk = T::from_count(kk_u as u64);
    let kv = T::from_count(k as u64);
    let nn = T::from_count(n);
    let p = params.p().clone();
    let tp = T::one() + params.theta().clone();
    let i = |x: i64| T::from_int(x);
    let k2 = kk.clone() * kk.clone();
    let indicator = if k == 0 { T::one() / kk.clone() } else { T::zero() };
    let c1 = indicator - T::one() / k2.clone()
        + p.clone() * (i(6) * kv.clone() * (kv.clone() - kk.clone()) + k2.clone() - T::one())
            / (i(6) * k2.clone() * tp.clone());
    let order1 = c1 / nn.clone();
    let kr = kv.clone() * (kk.clone() - kv);
    let c2 = (i(30) * kr.clone() * (kr + i(2))
        - (kk.clone() - T::one()) * (kk.clone() + T::one()) * (k2.clone() + i(11)))
        / (i(180) * k2 * tp.clone() * tp);
    let order2 = order1.clone() + p.clone() * p * c2 / (nn.clone() * nn);
    Ok((order1, order2))
}

/// `sqrt((K-1)/N) sqrt(1 + p (K+1) / (6 (1+theta)))`.
pub fn qsd_distance_bound<T: Real>(params: &ModelParams<T>, n: u64) -> Result<T> {
    check_n(n)?;
    let kk = T::from_count(params.k() as u64);
    let a = ((kk - T::one()) / T::from_count(n)).sqrt();
    let b = (T::one() + *params.p() * (kk + T::one()) / (T::lit(6.0) * (T::one() + *params.theta()))).sqrt();
    Ok(a * b)
}

/// `sqrt(K Var[eta(0)/N])`, the quantity bounded by [`qsd_distance_bound`].
pub fn qsd_distance_proxy<T: Real>(moments: &StationaryMomentSet<T>) -> T {
    (T::from_count(moments.params.k() as u64) * moments.cov[0]).sqrt()
}
