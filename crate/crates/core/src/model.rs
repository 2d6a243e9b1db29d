//! Domain types shared across the crate: model parameters, occupation
//! configurations on the cycle `Z/KZ`, probability vectors and spectra.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Parameters of the walk on the `K`-cycle: clockwise rate 1,
/// anti-clockwise rate `theta`, uniform killing rate `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    k: usize,
    theta: T,
    p: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(k: usize, theta: T, p: T) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidParams(format!("K must be at least 3, got {k}")));
        }
        if !(theta > T::zero()) {
            return Err(Error::InvalidParams(format!("theta must be positive, got {theta:?}")));
        }
        if !(p > T::zero()) {
            return Err(Error::InvalidParams(format!("p must be positive, got {p:?}")));
        }
        Ok(Self { k, theta, p })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> &T {
        &self.theta
    }

    pub fn p(&self) -> &T {
        &self.p
    }

    /// Same walk with a different killing rate.
    pub fn with_p(&self, p: T) -> Result<Self> {
        Self::new(self.k, self.theta.clone(), p)
    }

    /// Reduce an arbitrary (possibly negative) site index onto `0..K`.
    pub fn site(&self, i: i64) -> usize {
        wrap(i, self.k)
    }
}

pub(crate) fn wrap(i: i64, k: usize) -> usize {
    i.rem_euclid(k as i64) as usize
}

/// Occupation vector `eta` with `sum(eta) = N`, `N >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    counts: Vec<u64>,
}

impl Configuration {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 3 {
            return Err(Error::InvalidConfiguration(format!("need at least 3 sites, got {}", counts.len())));
        }
        let n: u64 = counts.iter().sum();
        if n < 2 {
            return Err(Error::InvalidConfiguration(format!("need at least 2 particles, got {n}")));
        }
        if n > u32::MAX as u64 {
            return Err(Error::InvalidConfiguration(format!("{n} particles exceeds 2^32")));
        }
        Ok(Self { counts })
    }

    /// All `n` particles on site `site`.
    pub fn concentrated(k: usize, n: u64, site: usize) -> Result<Self> {
        let mut counts = vec![0; k];
        if k > 0 {
            counts[site % k] = n;
        }
        Self::new(counts)
    }

    /// Construction without validation; callers guarantee the invariants.
    pub(crate) fn from_counts_unchecked(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Occupation of site `i` (reduced mod K).
    pub fn at(&self, i: i64) -> u64 {
        self.counts[wrap(i, self.k())]
    }

    /// `m(eta) = eta / N`.
    pub fn empirical_measure<T: Scalar>(&self) -> ProbVector<T> {
        let n = T::from_count(self.n());
        ProbVector { weights: self.counts.iter().map(|&c| T::from_count(c) / n.clone()).collect() }
    }

    /// Rotation `phi^(l)`: `result[k] = counts[(k + l) mod K]`.
    pub fn rotate(&self, l: i64) -> Self {
        let k = self.k();
        let shift = wrap(l, k);
        let counts = (0..k).map(|i| self.counts[(i + shift) % k]).collect();
        Self { counts }
    }

    /// `T_{i -> j} eta = eta - e_i + e_j`.
    pub fn move_particle(&self, i: i64, j: i64) -> Result<Self> {
        let k = self.k();
        let (i, j) = (wrap(i, k), wrap(j, k));
        if self.counts[i] == 0 {
            return Err(Error::EmptySite { site: i });
        }
        let mut counts = self.counts.clone();
        counts[i] -= 1;
        counts[j] += 1;
        Ok(Self { counts })
    }
}

/// Probability vector on `Z/KZ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T> {
    weights: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    /// Validates nonnegativity and `sum = 1` to within `1e-12`.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NotProbability("empty vector".into()));
        }
        let tol = T::lit(1e-12);
        let mut total = T::zero();
        for (i, w) in weights.iter().enumerate() {
            if *w < -tol.clone() || w.approx().is_nan() {
                return Err(Error::NotProbability(format!("weight {i} is {w:?}")));
            }
            total = total + w.clone();
        }
        if (total.clone() - T::one()).magnitude() > tol {
            return Err(Error::NotProbability(format!("weights sum to {total:?}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Self {
        let w = T::one() / T::from_count(k as u64);
        Self { weights: vec![w; k] }
    }

    pub fn dirac(k: usize, site: usize) -> Self {
        let mut weights = vec![T::zero(); k];
        weights[site % k] = T::one();
        Self { weights }
    }

    pub(crate) fn from_weights_unchecked(weights: Vec<T>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl<T: Real> ProbVector<T> {
    /// Euclidean distance `||self - other||_2`.
    pub fn l2_distance(&self, other: &Self) -> T {
        l2_norm_diff(&self.weights, &other.weights)
    }

    /// `d_TV = ||self - other||_1 / 2`.
    pub fn tv_distance(&self, other: &Self) -> T {
        let half = T::lit(0.5);
        self.weights.iter().zip(&other.weights).fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs()) * half
    }
}

pub(crate) fn l2_norm_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)).sqrt()
}

/// Eigenvalues `lambda_0..lambda_{K-1}` of a circulant operator, indexed by
/// discrete Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum<T> {
    pub eigenvalues: Vec<Complex<T>>,
}

impl<T: Real> ComplexSpectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `-max_{k >= 1} Re(lambda_k)`.
    pub fn gap(&self) -> T {
        -self.eigenvalues[1..].iter().map(|z| z.re).fold(T::neg_infinity(), T::max)
    }

    /// `-min_k Re(lambda_k)`.
    pub fn max_decay(&self) -> T {
        -self.eigenvalues.iter().map(|z| z.re).fold(T::infinity(), T::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn cfg(v: &[u64]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(3, 1.0, 1.0).is_ok());
        assert!(ModelParams::new(2, 1.0, 1.0).is_err());
        assert!(ModelParams::new(4, 0.0, 1.0).is_err());
        assert!(ModelParams::new(4, 1.0, -1.0).is_err());
        assert!(ModelParams::new(4, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn configuration_needs_two_particles() {
        assert!(Configuration::new(vec![1, 0, 0]).is_err());
        assert!(Configuration::new(vec![1, 1]).is_err());
        assert_eq!(cfg(&[2, 0, 0]).n(), 2);
    }

    #[test]
    fn empirical_measure_examples() {
        assert_eq!(cfg(&[2, 0, 0]).empirical_measure::<f64>().weights(), &[1.0, 0.0, 0.0]);
        let third = cfg(&[1, 1, 1]).empirical_measure::<BigRational>();
        assert!(third.weights().iter().all(|w| *w == ratio(1, 3)));
        assert_eq!(cfg(&[3, 1, 0, 0]).empirical_measure::<f64>().weights(), &[0.75, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn rotate_examples() {
        assert_eq!(cfg(&[2, 1, 0]).rotate(1), cfg(&[1, 0, 2]));
        assert_eq!(cfg(&[1, 1, 1]).rotate(2), cfg(&[1, 1, 1]));
        assert_eq!(cfg(&[3, 0, 1, 0]).rotate(4), cfg(&[3, 0, 1, 0]));
        assert_eq!(cfg(&[2, 1, 0]).rotate(-1), cfg(&[2, 1, 0]).rotate(2));
    }

    #[test]
    fn move_particle_examples() {
        assert_eq!(cfg(&[2, 0, 0]).move_particle(0, 1).unwrap(), cfg(&[1, 1, 0]));
        assert_eq!(cfg(&[1, 1, 0]).move_particle(0, 0).unwrap(), cfg(&[1, 1, 0]));
        assert!(matches!(cfg(&[0, 2, 0]).move_particle(0, 1), Err(Error::EmptySite { site: 0 })));
        // indices wrap around the cycle
        assert_eq!(cfg(&[1, 1, 0]).move_particle(-2, 5).unwrap(), cfg(&[1, 0, 1]));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        let d: ProbVector<f64> = ProbVector::dirac(3, 1);
        let u: ProbVector<f64> = ProbVector::uniform(3);
        assert!((d.tv_distance(&u) - 2.0 / 3.0).abs() < 1e-15);
    }

    fn config_strategy() -> impl Strategy<Value = Configuration> {
        (3usize..9)
            .prop_flat_map(|k| proptest::collection::vec(0u64..6, k))
            .prop_filter("N >= 2", |v| v.iter().sum::<u64>() >= 2)
            .prop_map(|v| Configuration::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn rotation_preserves_mass_and_composes(c in config_strategy(), a in 0i64..20, b in 0i64..20) {
            let k = c.k() as i64;
            prop_assert_eq!(c.rotate(a).n(), c.n());
            prop_assert_eq!(c.rotate(a).rotate(b), c.rotate((a + b) % k));
        }

        #[test]
        fn measure_commutes_with_rotation(c in config_strategy(), l in 0i64..10) {
            let m = c.empirical_measure::<BigRational>();
            let mr = c.rotate(l).empirical_measure::<BigRational>();
            let k = c.k();
            for i in 0..k {
                prop_assert_eq!(&mr.weights()[i], &m.weights()[(i + l as usize) % k]);
            }
            let total: BigRational = m.weights().iter().cloned().sum();
            prop_assert_eq!(total, ratio(1, 1));
        }

        #[test]
        fn moves_touch_two_sites(c in config_strategy(), i in 0i64..10, j in 0i64..10) {
            if let Ok(moved) = c.move_particle(i, j) {
                prop_assert_eq!(moved.n(), c.n());
                let changed = (0..c.k()).filter(|&s| moved.counts()[s] != c.counts()[s]).count();
                let same = (i as usize) % c.k() == (j as usize) % c.k();
                prop_assert_eq!(changed, if same { 0 } else { 2 });
            }
        }
    }
}
