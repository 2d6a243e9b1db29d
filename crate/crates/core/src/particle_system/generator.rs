use std::collections::BTreeMap;

use super::state_space::StateSpace;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{Configuration, ModelParams};
use crate::scalar::{Real, Scalar};

/// Dense stationary solves are used up to this many states.
pub const DENSE_LIMIT: usize = 2_500;
/// Largest state space accepted by [`stationary_distribution_exact`].
pub const SOLVE_LIMIT: usize = 20_000;

/// Rate of `eta -> T_{i->j} eta` for `i != j` (sites taken mod K).
pub fn transition_rate<T: Scalar>(params: &ModelParams<T>, eta: &Configuration, i: i64, j: i64) -> T {
    let k = params.k();
    let (i, j) = (params.site(i), params.site(j));
    if i == j {
        return T::zero();
    }
    let n = eta.n();
    let mut r = T::zero();
    if j == (i + 1) % k {
        r = r + T::one();
    }
    if (j + 1) % k == i {
        r = r + params.theta().clone();
    }
    r = r + params.p().clone() * T::from_count(eta.counts()[j]) / T::from_count(n - 1);
    T::from_count(eta.counts()[i]) * r
}

/// Generator in compressed-row form; every row stores its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGenerator<T> {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

pub fn full_generator<T: Scalar>(params: &ModelParams<T>, space: &StateSpace) -> Result<FullGenerator<T>> {
    if params.k() != space.k() {
        return Err(Error::Domain(format!("model has K = {}, state space {}", params.k(), space.k())));
    }
    let k = space.k() as i64;
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (r, eta) in space.states().iter().enumerate() {
        let mut row: BTreeMap<usize, T> = BTreeMap::new();
        let mut exit = T::zero();
        for i in 0..k {
            if eta.at(i) == 0 {
                continue;
            }
            for j in 0..k {
                if i == j {
                    continue;
                }
                let rate = transition_rate(params, eta, i, j);
                if rate.is_zero() {
                    continue;
                }
                let target = space.index_of(&eta.move_particle(i, j)?).expect("closed state space");
                exit = exit + rate.clone();
                let slot = row.entry(target).or_insert_with(T::zero);
                *slot = slot.clone() + rate;
            }
        }
        row.insert(r, -exit);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(FullGenerator { row_ptr, cols, vals })
}

impl<T: Scalar> FullGenerator<T> {
    pub fn n_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn entry(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i].clone(),
            Err(_) => T::zero(),
        }
    }

    /// `(L f)(eta) = sum_eta' L(eta, eta') f(eta')`.
    pub fn apply(&self, f: &[T]) -> Vec<T> {
        (0..self.n_states())
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).fold(T::zero(), |acc, (&c, v)| acc + v.clone() * f[c].clone())
            })
            .collect()
    }

    /// `(nu L)(eta') = sum_eta nu(eta) L(eta, eta')`.
    pub fn left_apply(&self, nu: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states()];
        for (r, x) in nu.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                out[c] = out[c].clone() + x.clone() * v.clone();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.n_states();
        let mut m = DenseMatrix::zeros(n, n);
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                m[(r, c)] = v.clone();
            }
        }
        m
    }

    /// `max_r |sum_c L(r, c)|`.
    pub fn max_row_sum(&self) -> T {
        (0..self.n_states())
            .map(|r| self.row(r).1.iter().fold(T::zero(), |a, b| a + b.clone()).magnitude())
            .fold(T::zero(), T::max_of)
    }

    /// `max_r |L(r, r)|`.
    pub fn max_exit_rate(&self) -> T {
        (0..self.n_states()).map(|r| self.entry(r, r).magnitude()).fold(T::zero(), T::max_of)
    }
}

/// `(L f)` for `f` given as a function of the configuration.
pub fn apply_function<T: Scalar>(
    gen: &FullGenerator<T>,
    space: &StateSpace,
    f: impl Fn(&Configuration) -> T,
) -> Vec<T> {
    let values: Vec<T> = space.states().iter().map(f).collect();
    gen.apply(&values)
}

/// Solves `nu L = 0`, `sum nu = 1` densely, replacing the last balance
/// equation by the normalisation.
pub fn stationary_distribution_dense<T: Scalar>(gen: &FullGenerator<T>) -> Result<Vec<T>> {
    let n = gen.n_states();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { states: n as u128, limit: DENSE_LIMIT as u128 });
    }
    let mut a = gen.to_dense().transpose();
    for c in 0..n {
        a[(n - 1, c)] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    a.solve(&rhs, 1e-13)
}

/// Stationary law of the chain: dense solve for small spaces, Gauss-Seidel
/// sweeps on the balance equations up to [`SOLVE_LIMIT`] states.
pub fn stationary_distribution_exact<T: Real>(gen: &FullGenerator<T>) -> Result<Vec<T>> {
    let n = gen.n_states();
    if n <= DENSE_LIMIT {
        return stationary_distribution_dense(gen);
    }
    if n > SOLVE_LIMIT {
        return Err(Error::TooLarge { states: n as u128, limit: SOLVE_LIMIT as u128 });
    }
    gauss_seidel(gen, T::lit(1e-13), 200_000)
}

fn gauss_seidel<T: Real>(gen: &FullGenerator<T>, tol: T, max_sweeps: usize) -> Result<Vec<T>> {
    let n = gen.n_states();
    // incoming edges of each state
    let mut incoming: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut diag = vec![T::zero(); n];
    for r in 0..n {
        let (cols, vals) = gen.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c == r {
                diag[r] = v;
            } else {
                incoming[c].push((r, v));
            }
        }
    }
    let mut nu = vec![T::one() / T::from_count(n as u64); n];
    let scale = gen.max_exit_rate();
    for sweep in 0..max_sweeps {
        for j in 0..n {
            let inflow = incoming[j].iter().fold(T::zero(), |acc, &(i, v)| acc + nu[i] * v);
            nu[j] = inflow / -diag[j];
        }
        let total = nu.iter().fold(T::zero(), |a, &b| a + b);
        nu.iter_mut().for_each(|x| *x = *x / total);
        if sweep % 10 == 9 {
            let res = gen.left_apply(&nu).iter().fold(T::zero(), |m, x| m.max(x.abs()));
            if res <= tol * scale.max(T::one()) {
                return Ok(nu);
            }
        }
    }
    Err(Error::Solve(format!("Gauss-Seidel did not converge in {max_sweeps} sweeps")))
}

/// `nu_0 e^{tL}` by uniformization. Long horizons are split into pieces with
/// `rate * dt <= 50`; each piece truncates its Poisson series once the tail
/// bound drops below its share of `1e-12`.
pub fn transient_distribution<T: Real>(gen: &FullGenerator<T>, nu0: &[T], t: T) -> Result<Vec<T>> {
    let n = gen.n_states();
    if nu0.len() != n {
        return Err(Error::Domain(format!("initial law has length {}, expected {n}", nu0.len())));
    }
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
    }
    let rate = gen.max_exit_rate();
    let lt = rate * t;
    if lt == T::zero() {
        return Ok(nu0.to_vec());
    }
    let pieces = (lt / T::lit(50.0)).ceil().max(T::one());
    let count = pieces.to_u64().ok_or_else(|| Error::Domain(format!("horizon {t:?} too long")))?;
    let tol = T::lit(1e-12) / pieces;
    let mut out = nu0.to_vec();
    for _ in 0..count {
        out = uniformization_piece(gen, &out, lt / pieces, rate, tol)?;
    }
    Ok(out)
}

fn uniformization_piece<T: Real>(gen: &FullGenerator<T>, nu0: &[T], lt: T, rate: T, tol: T) -> Result<Vec<T>> {
    let log_lt = lt.ln();
    let mut log_w = -lt;
    let mut out = vec![T::zero(); nu0.len()];
    let mut v = nu0.to_vec();
    let mut m = 0u64;
    loop {
        let w = log_w.exp();
        for (o, x) in out.iter_mut().zip(&v) {
            *o = *o + w * *x;
        }
        // past the mode the weights shrink at least geometrically
        let next = T::from_count(m + 1);
        if next > lt {
            let ratio = lt / (next + T::one());
            let tail = (log_w + log_lt - next.ln()).exp() / (T::one() - ratio);
            if tail < tol {
                break;
            }
        }
        // v <- v (I + L / rate)
        let step = gen.left_apply(&v);
        for (x, s) in v.iter_mut().zip(step) {
            *x = *x + s / rate;
        }
        m += 1;
        log_w = log_w + log_lt - T::from_count(m).ln();
        if m > 100_000 {
            return Err(Error::Solve("uniformization series did not converge".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentFunction {
    /// `eta(k)`
    Fk,
    /// `eta(k)^2`
    Fkk,
    /// `eta(k) eta(k+1)`
    FkKplus1,
    /// `eta(k) eta(l)` with `l` at cyclic distance at least 2 from `k`
    Fkl,
}

/// Closed form of `L f` at `config` for the moment functions above.
pub fn generator_moments<T: Scalar>(
    params: &ModelParams<T>,
    config: &Configuration,
    which: MomentFunction,
    k: i64,
    l: i64,
) -> Result<T> {
    let kk = params.k();
    if config.k() != kk {
        return Err(Error::Domain(format!("configuration has {} sites, model has {kk}", config.k())));
    }
    let n = config.n();
    let e = |i: i64| T::from_count(config.at(i));
    let theta = params.theta().clone();
    let one = T::one();
    let two = T::from_int(2);
    let pn = params.p().clone() / T::from_count(n - 1);
    let damp = one.clone() + theta.clone() + pn.clone();
    let v = match which {
        MomentFunction::Fk => e(k - 1) - (one + theta.clone()) * e(k) + theta * e(k + 1),
        MomentFunction::Fkk => {
            two.clone() * (e(k - 1) * e(k) - damp * e(k) * e(k) + theta.clone() * e(k) * e(k + 1))
                + e(k - 1)
                + (one + theta.clone() + two * pn * T::from_count(n)) * e(k)
                + theta * e(k + 1)
        }
        MomentFunction::FkKplus1 => {
            -(two * damp) * e(k) * e(k + 1)
                + e(k - 1) * e(k + 1)
                + theta.clone() * e(k + 1) * e(k + 1)
                + e(k) * e(k)
                + theta.clone() * e(k) * e(k + 2)
                - e(k)
                - theta * e(k + 1)
        }
        MomentFunction::Fkl => {
            let d = (l - k).rem_euclid(kk as i64);
            if d == 0 || d == 1 || d == kk as i64 - 1 {
                return Err(Error::Domain(format!("f_kl needs sites at cyclic distance >= 2, got k = {k}, l = {l}")));
            }
            -(two * damp) * e(k) * e(l)
                + e(k - 1) * e(l)
                + theta.clone() * e(k + 1) * e(l)
                + e(k) * e(l - 1)
                + theta * e(k) * e(l + 1)
        }
    };
    Ok(v)
}

/// Rate products around `(N,0,0) -> (N-1,1,0) -> (N-1,0,1) -> (N,0,0)` and
/// the reverse cycle, read off the generator (`K = 3` only).
pub fn kolmogorov_products<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<(T, T)> {
    if params.k() != 3 {
        return Err(Error::Domain("the three-state cycle is defined for K = 3".into()));
    }
    let space = StateSpace::enumerate(3, n)?;
    let gen = full_generator(params, &space)?;
    let idx = |v: Vec<u64>| space.index_of(&Configuration::from_counts_unchecked(v)).expect("state");
    let a = idx(vec![n, 0, 0]);
    let b = idx(vec![n - 1, 1, 0]);
    let c = idx(vec![n - 1, 0, 1]);
    let forward = gen.entry(a, b) * gen.entry(b, c) * gen.entry(c, a);
    let backward = gen.entry(a, c) * gen.entry(c, b) * gen.entry(b, a);
    Ok((forward, backward))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversibilityReport<T> {
    /// `|forward - backward|` for the three-state cycle (`K = 3`).
    pub kolmogorov_violation: Option<T>,
    /// `|nu(a) L(a,b) - nu(b) L(b,a)|` for `a = (N,0,..)`, `b = (N-1,0,1,0,..)` (`K >= 4`).
    pub detailed_balance_violation: Option<T>,
    /// Largest detailed-balance defect over all pairs of states.
    pub max_detailed_balance_residual: T,
}

pub fn reversibility_report<T: Scalar>(params: &ModelParams<T>, n: u64) -> Result<ReversibilityReport<T>> {
    let k = params.k();
    let space = StateSpace::enumerate(k, n)?;
    let gen = full_generator(params, &space)?;
    let nu = stationary_distribution_dense(&gen)?;
    let mut worst = T::zero();
    for r in 0..gen.n_states() {
        let (cols, vals) = gen.row(r);
        for (&c, v) in cols.iter().zip(vals) {
            if c != r {
                let d = nu[r].clone() * v.clone() - nu[c].clone() * gen.entry(c, r);
                worst = T::max_of(worst, d.magnitude());
            }
        }
    }
    let (kolmogorov_violation, detailed_balance_violation) = if k == 3 {
        let (f, b) = kolmogorov_products(params, n)?;
        (Some((f - b).magnitude()), None)
    } else {
        let mut a = vec![0; k];
        a[0] = n;
        let mut b = vec![0; k];
        b[0] = n - 1;
        b[2] = 1;
        let ia = space.index_of(&Configuration::from_counts_unchecked(a)).expect("state");
        let ib = space.index_of(&Configuration::from_counts_unchecked(b)).expect("state");
        let d = nu[ia].clone() * gen.entry(ia, ib) - nu[ib].clone() * gen.entry(ib, ia);
        (None, Some(d.magnitude()))
    };
    Ok(ReversibilityReport { kolmogorov_violation, detailed_balance_violation, max_detailed_balance_residual: worst })
}
