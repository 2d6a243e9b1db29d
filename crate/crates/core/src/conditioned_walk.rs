//! Law of the killed walk conditioned on survival.
//!
//! Killing happens at a uniform rate, so conditioning on survival up to time
//! `t` gives back the law of the unkilled walk: `nu e^{tQ}`. The killing rate
//! never enters anything here.

use crate::circulant::{build_q, spectral_constants};
use crate::error::{Error, Result};
use crate::model::{l2_norm_diff, ModelParams, ProbVector};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct ConditionedLawQuery<T> {
    pub params: ModelParams<T>,
    pub initial: ProbVector<T>,
    pub t: T,
}

impl<T: Real> ConditionedLawQuery<T> {
    pub fn new(params: ModelParams<T>, initial: ProbVector<T>, t: T) -> Result<Self> {
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
        }
        if initial.len() != params.k() {
            return Err(Error::Domain(format!("initial law has {} sites, model has {}", initial.len(), params.k())));
        }
        Ok(Self { params, initial, t })
    }
}

/// `(lower, actual, upper)` for a two-sided decay estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich<T> {
    pub lower: T,
    pub actual: T,
    pub upper: T,
}

impl<T: Real> Sandwich<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.lower - tol <= self.actual && self.actual <= self.upper + tol
    }
}

pub fn conditioned_law<T: Real>(q: &ConditionedLawQuery<T>) -> Result<ProbVector<T>> {
    let w = build_q(&q.params).exp_action(q.t, q.initial.weights())?;
    Ok(ProbVector::from_weights_unchecked(w))
}

/// The quasi-stationary distribution, which is uniform.
pub fn qsd<T: Real>(params: &ModelParams<T>) -> ProbVector<T> {
    ProbVector::uniform(params.k())
}

fn check_pair<T: Real>(params: &ModelParams<T>, nu: &ProbVector<T>, mu: &ProbVector<T>, t: T) -> Result<()> {
    if nu.len() != params.k() || mu.len() != params.k() {
        return Err(Error::Domain("laws must live on the model's K sites".into()));
    }
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
    }
    Ok(())
}

/// `e^{-alpha t} |nu - mu|_2 <= |(nu - mu) e^{tQ}|_2 <= e^{-rho t} |nu - mu|_2`.
pub fn l2_sandwich<T: Real>(
    params: &ModelParams<T>,
    nu: &ProbVector<T>,
    mu: &ProbVector<T>,
    t: T,
) -> Result<Sandwich<T>> {
    check_pair(params, nu, mu, t)?;
    let c = spectral_constants(params);
    let diff: Vec<T> = nu.weights().iter().zip(mu.weights()).map(|(&a, &b)| a - b).collect();
    let d0 = l2_norm_diff(nu.weights(), mu.weights());
    let evolved = build_q(params).exp_action(t, &diff)?;
    let actual = evolved.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    Ok(Sandwich { lower: (-c.alpha * t).exp() * d0, actual, upper: (-c.rho * t).exp() * d0 })
}

/// Total-variation version: `e^{-alpha t} d/sqrt(K) <= d_TV(t) <= sqrt(K) e^{-rho t} d`
/// with `d = d_TV(nu, mu)`, from the comparison `|x|_2 <= |x|_1 <= sqrt(K) |x|_2`.
pub fn tv_sandwich<T: Real>(
    params: &ModelParams<T>,
    nu: &ProbVector<T>,
    mu: &ProbVector<T>,
    t: T,
) -> Result<Sandwich<T>> {
    check_pair(params, nu, mu, t)?;
    let c = spectral_constants(params);
    let root_k = T::from_count(params.k() as u64).sqrt();
    let d0 = nu.tv_distance(mu);
    let law = |x: &ProbVector<T>| conditioned_law(&ConditionedLawQuery::new(params.clone(), x.clone(), t)?);
    let actual = law(nu)?.tv_distance(&law(mu)?);
    Ok(Sandwich { lower: (-c.alpha * t).exp() * d0 / root_k, actual, upper: root_k * (-c.rho * t).exp() * d0 })
}
