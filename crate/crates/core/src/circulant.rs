//! Circulant linear algebra on `Z/KZ`.
//!
//! A circulant matrix `circ(c_0, .., c_{K-1})` has entry `(r, c) = c_{(c - r) mod K}`.
//! Its right eigenvectors are the Fourier columns `f_k(c) = w^{kc}` with
//! `w = exp(2 pi i / K)`, and `lambda_k = sum_j c_j w^{kj}`. Row-vector
//! exponentials `v e^{tC}` are evaluated by transforming `v`, scaling each
//! mode by `exp(lambda_k t)` and transforming back. The transform is a direct
//! `O(K^2)` DFT with an exact twiddle table.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{ComplexSpectrum, ModelParams};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CirculantMatrix<T> {
    first_row: Vec<T>,
}

impl<T: Scalar> CirculantMatrix<T> {
    pub fn new(first_row: Vec<T>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::Domain("circulant matrix needs at least one entry".into()));
        }
        Ok(Self { first_row })
    }

    pub fn first_row(&self) -> &[T] {
        &self.first_row
    }

    pub fn size(&self) -> usize {
        self.first_row.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> T {
        let k = self.size();
        self.first_row[(c + k - r % k) % k].clone()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let k = self.size();
        DenseMatrix::from_fn(k, k, |r, c| self.entry(r, c))
    }

    /// Row sums (identical for every row).
    pub fn row_sum(&self) -> T {
        self.first_row.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    /// `J C J` where `J` fixes index 0 and reverses `1..K`; equal to `C^T`.
    pub fn reflected(&self) -> Self {
        let k = self.size();
        Self { first_row: (0..k).map(|j| self.first_row[(k - j) % k].clone()).collect() }
    }
}

/// Generator of the walk: `Q = circ(-(1 + theta), 1, 0, .., 0, theta)`.
pub fn build_q<T: Scalar>(params: &ModelParams<T>) -> CirculantMatrix<T> {
    let k = params.k();
    let theta = params.theta().clone();
    let mut row = vec![T::zero(); k];
    row[0] = -(T::one() + theta.clone());
    row[1] = T::one();
    row[k - 1] = theta;
    CirculantMatrix { first_row: row }
}

/// `w^m` for `m in 0..K`, computed from the reduced angle.
pub(crate) fn twiddles<T: Real>(k: usize) -> Vec<Complex<T>> {
    let two_pi = T::PI() + T::PI();
    let kk = T::from_count(k as u64);
    (0..k)
        .map(|m| {
            let angle = two_pi * T::from_count(m as u64) / kk;
            Complex::new(angle.cos(), angle.sin())
        })
        .collect()
}

impl<T: Real> CirculantMatrix<T> {
    /// `lambda_k = sum_j c_j w^{kj}`.
    pub fn eigenvalues(&self) -> ComplexSpectrum<T> {
        let k = self.size();
        let tw = twiddles::<T>(k);
        let eigenvalues = (0..k)
            .map(|mode| {
                self.first_row
                    .iter()
                    .enumerate()
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (j, &c)| acc + tw[(mode * j) % k] * c)
            })
            .collect();
        ComplexSpectrum { eigenvalues }
    }

    /// `max_r |(C f_k)_r - lambda_k f_k(r)|` for the `k`-th Fourier column.
    pub fn fourier_residual(&self, mode: usize, lambda: Complex<T>) -> T {
        let k = self.size();
        let tw = twiddles::<T>(k);
        let f = |c: usize| tw[(mode * c) % k];
        (0..k)
            .map(|r| {
                let cf = (0..k).fold(Complex::new(T::zero(), T::zero()), |acc, c| acc + f(c) * self.entry(r, c));
                (cf - lambda * f(r)).norm()
            })
            .fold(T::zero(), T::max)
    }

    /// Row vector `v e^{tC}`.
    pub fn exp_action(&self, t: T, v: &[T]) -> Result<Vec<T>> {
        let (out, residue) = self.exp_action_with_residue(t, v)?;
        let scale = v.iter().fold(T::one(), |m, x| m.max(x.abs()));
        debug_assert!(residue <= T::lit(1e-10) * scale, "imaginary residue {residue:?} in circulant exponential");
        Ok(out)
    }

    /// Row vector `v e^{tC}` together with the largest discarded imaginary part.
    pub fn exp_action_with_residue(&self, t: T, v: &[T]) -> Result<(Vec<T>, T)> {
        let k = self.size();
        if v.len() != k {
            return Err(Error::Domain(format!("vector has length {}, expected {k}", v.len())));
        }
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t:?}")));
        }
        if t == T::zero() {
            return Ok((v.to_vec(), T::zero()));
        }
        let tw = twiddles::<T>(k);
        let spectrum = self.eigenvalues();
        let zero = Complex::new(T::zero(), T::zero());
        // hat_k = sum_r v_r w^{kr}
        let hat: Vec<Complex<T>> = (0..k)
            .map(|mode| {
                let h = v.iter().enumerate().fold(zero, |acc, (r, &x)| acc + tw[(mode * r) % k] * x);
                h * (spectrum.eigenvalues[mode] * t).exp()
            })
            .collect();
        let kk = T::from_count(k as u64);
        let mut residue = T::zero();
        let out = (0..k)
            .map(|c| {
                let z =
                    hat.iter().enumerate().fold(zero, |acc, (mode, &h)| acc + h * tw[(k - (mode * c) % k) % k]) / kk;
                residue = residue.max(z.im.abs());
                z.re
            })
            .collect();
        Ok((out, residue))
    }

    /// Dense `e^{tC}`, assembled row by row from `e_r e^{tC}`.
    pub fn exp_dense(&self, t: T) -> Result<DenseMatrix<T>> {
        let k = self.size();
        let mut rows = Vec::with_capacity(k);
        for r in 0..k {
            let mut e = vec![T::zero(); k];
            e[r] = T::one();
            rows.push(self.exp_action(t, &e)?);
        }
        Ok(DenseMatrix::from_rows(rows))
    }
}

/// Closed-form spectrum of `Q`:
/// `lambda_k = -2(1+theta) sin^2(pi k/K) + i (1-theta) sin(2 pi k/K)`.
pub fn q_spectrum_closed_form<T: Real>(params: &ModelParams<T>) -> ComplexSpectrum<T> {
    let k = params.k();
    let theta = *params.theta();
    let two = T::lit(2.0);
    let kk = T::from_count(k as u64);
    let eigenvalues = (0..k)
        .map(|mode| {
            // reduce the angle so sin(pi k / K) is evaluated on [0, pi)
            let x = T::PI() * T::from_count(mode as u64) / kk;
            let s = x.sin();
            let re = -two * (T::one() + theta) * s * s;
            let im = (T::one() - theta) * (two * x).sin();
            Complex::new(if mode == 0 { T::zero() } else { re }, if mode == 0 { T::zero() } else { im })
        })
        .collect();
    ComplexSpectrum { eigenvalues }
}

/// Spectral gap `rho_K` and fastest decay rate `alpha_K` of `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants<T> {
    pub rho: T,
    pub alpha: T,
}

pub fn spectral_constants<T: Real>(params: &ModelParams<T>) -> SpectralConstants<T> {
    let k = params.k();
    let scale = T::lit(2.0) * (T::one() + *params.theta());
    let kk = T::from_count(k as u64);
    let s = (T::PI() / kk).sin();
    let rho = scale * s * s;
    let alpha = if k % 2 == 0 {
        scale
    } else {
        let c = (T::PI() / (T::lit(2.0) * kk)).cos();
        scale * c * c
    };
    SpectralConstants { rho, alpha }
}

/// Coupling constant `inf_{x != y} (Q_xy + Q_yx + sum_{s != x,y} min(Q_xs, Q_ys))`
/// of a dense generator matrix.
pub fn cloez_lambda<T: Scalar>(generator: &DenseMatrix<T>) -> Result<T> {
    let n = generator.rows();
    if n < 2 || generator.cols() != n {
        return Err(Error::Domain("generator must be square with at least two states".into()));
    }
    let mut best: Option<T> = None;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let mut v = generator[(x, y)].clone() + generator[(y, x)].clone();
            for s in 0..n {
                if s != x && s != y {
                    v = v + T::min_of(generator[(x, s)].clone(), generator[(y, s)].clone());
                }
            }
            best = Some(match best {
                Some(b) => T::min_of(b, v),
                None => v,
            });
        }
    }
    Ok(best.expect("at least one ordered pair"))
}

/// Block-circulant matrix with circulant blocks on `(Z/KZ)^2`.
///
/// Entry `((u, v), (k, r))` (flattened as `u K + v`, `k K + r`) equals
/// `stencil[(k - u) mod K][(r - v) mod K] + shift * [u = k and v = r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCirculant<T> {
    k: usize,
    stencil: Vec<T>,
}

impl<T: Scalar> BlockCirculant<T> {
    pub fn new(k: usize, stencil: Vec<T>) -> Result<Self> {
        if k == 0 || stencil.len() != k * k {
            return Err(Error::Domain(format!("stencil must have {} entries", k * k)));
        }
        Ok(Self { k, stencil })
    }

    /// Kronecker sum `A (+) B` of two circulants of equal size.
    pub fn kronecker_sum(a: &CirculantMatrix<T>, b: &CirculantMatrix<T>) -> Result<Self> {
        let k = a.size();
        if b.size() != k {
            return Err(Error::Domain("Kronecker sum operands differ in size".into()));
        }
        let mut stencil = vec![T::zero(); k * k];
        for j in 0..k {
            stencil[j * k] = stencil[j * k].clone() + a.first_row()[j].clone();
            stencil[j] = stencil[j].clone() + b.first_row()[j].clone();
        }
        Ok(Self { k, stencil })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stencil(&self, dk: usize, dr: usize) -> &T {
        &self.stencil[(dk % self.k) * self.k + dr % self.k]
    }

    /// Add `shift` to the diagonal.
    pub fn shifted(&self, shift: T) -> Self {
        let mut stencil = self.stencil.clone();
        stencil[0] = stencil[0].clone() + shift;
        Self { k: self.k, stencil }
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        let k = self.k;
        let (u, v) = (row / k, row % k);
        let (kk, r) = (col / k, col % k);
        self.stencil((kk + k - u) % k, (r + k - v) % k).clone()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.k * self.k;
        DenseMatrix::from_fn(n, n, |r, c| self.entry(r, c))
    }

    /// Row-vector product `g M` with `g` a `K x K` field flattened row-major.
    pub fn vec_mul(&self, g: &[T]) -> Vec<T> {
        let k = self.k;
        assert_eq!(g.len(), k * k);
        let mut out = vec![T::zero(); k * k];
        let nonzero: Vec<(usize, usize, T)> = (0..k)
            .flat_map(|a| (0..k).map(move |b| (a, b)))
            .filter_map(|(a, b)| {
                let s = self.stencil(a, b);
                (!s.is_zero()).then(|| (a, b, s.clone()))
            })
            .collect();
        for u in 0..k {
            for v in 0..k {
                let x = &g[u * k + v];
                if x.is_zero() {
                    continue;
                }
                for (a, b, s) in &nonzero {
                    let idx = ((u + a) % k) * k + (v + b) % k;
                    out[idx] = out[idx].clone() + x.clone() * s.clone();
                }
            }
        }
        out
    }
}

impl<T: Real> BlockCirculant<T> {
    /// `lambda_{a,b} = sum_{j1,j2} stencil[j1][j2] w^{a j1 + b j2}`, flattened `a K + b`.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        let k = self.k;
        let tw = twiddles::<T>(k);
        let mut out = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j1 in 0..k {
                    for j2 in 0..k {
                        let s = *self.stencil(j1, j2);
                        if s != T::zero() {
                            acc = acc + tw[(a * j1 + b * j2) % k] * s;
                        }
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    /// Row vector `g e^{tM}` via the two-dimensional DFT.
    pub fn exp_action(&self, t: T, g: &[T]) -> Result<Vec<T>> {
        let k = self.k;
        if g.len() != k * k {
            return Err(Error::Domain(format!("field has length {}, expected {}", g.len(), k * k)));
        }
        let tw = twiddles::<T>(k);
        let lambda = self.eigenvalues();
        let zero = Complex::new(T::zero(), T::zero());
        // separable transform: first along v, then along u
        let mut stage = vec![zero; k * k];
        for u in 0..k {
            for b in 0..k {
                stage[u * k + b] = (0..k).fold(zero, |acc, v| acc + tw[(b * v) % k] * g[u * k + v]);
            }
        }
        let mut hat = vec![zero; k * k];
        for a in 0..k {
            for b in 0..k {
                let h = (0..k).fold(zero, |acc, u| acc + tw[(a * u) % k] * stage[u * k + b]);
                hat[a * k + b] = h * (lambda[a * k + b] * t).exp();
            }
        }
        for a in 0..k {
            for v in 0..k {
                stage[a * k + v] = (0..k).fold(zero, |acc, b| acc + tw[(k - (b * v) % k) % k] * hat[a * k + b]);
            }
        }
        let norm = T::from_count((k * k) as u64);
        let mut out = vec![T::zero(); k * k];
        for u in 0..k {
            for v in 0..k {
                let z = (0..k).fold(zero, |acc, a| acc + tw[(k - (a * u) % k) % k] * stage[a * k + v]);
                out[u * k + v] = z.re / norm;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn params(k: usize, theta: f64) -> ModelParams<f64> {
        ModelParams::new(k, theta, 1.0).unwrap()
    }

    #[test]
    fn q_first_rows() {
        assert_eq!(build_q(&params(3, 1.0)).first_row(), &[-2.0, 1.0, 1.0]);
        assert_eq!(build_q(&params(4, 0.5)).first_row(), &[-1.5, 1.0, 0.0, 0.5]);
        let exact = ModelParams::new(7, ratio(3, 7), ratio(1, 2)).unwrap();
        assert_eq!(build_q(&exact).row_sum(), ratio(0, 1));
    }

    #[test]
    fn circulant_layout() {
        let c = CirculantMatrix::new(vec![1.0, 2.0, 3.0]).unwrap();
        let d = c.to_dense();
        assert_eq!(d.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(d.row(1), &[3.0, 1.0, 2.0]);
        assert_eq!(d.row(2), &[2.0, 3.0, 1.0]);
        assert_eq!(c.reflected().to_dense(), d.transpose());
    }

    #[test]
    fn eigenvalue_examples() {
        let l = build_q(&params(3, 1.0)).eigenvalues().eigenvalues;
        assert!(l[0].norm() < 1e-15);
        assert!((l[1] - Complex::new(-3.0, 0.0)).norm() < 1e-14);
        assert!((l[2] - Complex::new(-3.0, 0.0)).norm() < 1e-14);

        let ident = CirculantMatrix::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap().eigenvalues();
        assert!(ident.eigenvalues.iter().all(|z| (z - Complex::new(1.0, 0.0)).norm() < 1e-15));

        let l = build_q(&params(4, 0.5)).eigenvalues().eigenvalues;
        assert!((l[1] - Complex::new(-1.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn closed_form_examples() {
        let l = q_spectrum_closed_form(&params(4, 1.0)).eigenvalues;
        assert!((l[1].re + 2.0).abs() < 1e-14 && l[1].im.abs() < 1e-15);
        for k in 3..12 {
            let s = q_spectrum_closed_form(&params(k, 1.0));
            assert_eq!(s.eigenvalues[0], Complex::new(0.0, 0.0));
            assert!(s.eigenvalues.iter().all(|z| z.im.abs() < 1e-15));
        }
    }

    #[test]
    fn spectral_constant_examples() {
        let c = spectral_constants(&params(4, 1.0));
        assert!((c.rho - 2.0).abs() < 1e-14 && (c.alpha - 4.0).abs() < 1e-14);
        let c = spectral_constants(&params(3, 1.0));
        assert!((c.rho - 3.0).abs() < 1e-14 && (c.alpha - 3.0).abs() < 1e-14);
        let p = ModelParams::new(6, 1e-300f64, 1.0).unwrap();
        let c = spectral_constants(&p);
        assert!((c.rho - 0.5).abs() < 1e-14 && (c.alpha - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_action_identities() {
        let q = build_q(&params(5, 0.3));
        let v = vec![0.1, 0.2, 0.3, 0.15, 0.25];
        let same = q.exp_action(0.0, &v).unwrap();
        assert!(same.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-15));
        let u = vec![0.2; 5];
        let out = q.exp_action(3.7, &u).unwrap();
        assert!(out.iter().all(|x| (x - 0.2).abs() < 1e-15));
        assert!(q.exp_action(-1.0, &v).is_err());
    }

    #[test]
    fn exp_action_k3_closed_form() {
        // theta = 1, K = 3: e^{tQ} = 1/3 + (I - 1/3) e^{-3t}
        let q = build_q(&params(3, 1.0));
        let out = q.exp_action(1.0, &[1.0, 0.0, 0.0]).unwrap();
        let e = (-3.0f64).exp();
        assert!((out[0] - (1.0 + 2.0 * e) / 3.0).abs() < 1e-15);
        assert!((out[1] - (1.0 - e) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cloez_examples() {
        let l3 = cloez_lambda(&build_q(&ModelParams::new(3, ratio(1, 1), ratio(1, 1)).unwrap()).to_dense()).unwrap();
        assert_eq!(l3, ratio(3, 1));
        let l4 = cloez_lambda(&build_q(&ModelParams::new(4, ratio(1, 1), ratio(1, 1)).unwrap()).to_dense()).unwrap();
        // adjacent pairs: 1 + 1 + 0 + 0; opposite pairs: 0 + 0 + 1 + 1
        assert_eq!(l4, ratio(2, 1));
        let l6 = cloez_lambda(&build_q(&params(6, 1.0)).to_dense()).unwrap();
        assert_eq!(l6, 0.0);
    }

    #[test]
    fn block_circulant_matches_dense_kronecker_sum() {
        let q = build_q(&params(4, 0.7));
        let q2 = BlockCirculant::kronecker_sum(&q, &q).unwrap();
        let dense = crate::linalg::kron_sum(&q.to_dense(), &q.to_dense());
        assert_eq!(q2.to_dense(), dense);
        let g: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = q2.vec_mul(&g);
        let b = dense.vec_mul(&g);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn block_circulant_exact_kronecker_sum() {
        let q = build_q(&ModelParams::new(3, ratio(2, 1), ratio(1, 1)).unwrap());
        let q2: BlockCirculant<BigRational> = BlockCirculant::kronecker_sum(&q, &q).unwrap();
        assert_eq!(q2.to_dense(), crate::linalg::kron_sum(&q.to_dense(), &q.to_dense()));
    }

    proptest! {
        #[test]
        fn spectrum_routes_agree(k in 3usize..40, theta in 0.05f64..5.0) {
            let p = params(k, theta);
            let a = build_q(&p).eigenvalues();
            let b = q_spectrum_closed_form(&p);
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            let c = spectral_constants(&p);
            prop_assert!((c.rho - b.gap()).abs() < 1e-12);
            prop_assert!((c.alpha - b.max_decay()).abs() < 1e-12);
        }

        #[test]
        fn eigenvalues_on_ellipse(k in 3usize..30, theta in 0.05f64..5.0) {
            prop_assume!((theta - 1.0).abs() > 1e-3);
            let s = q_spectrum_closed_form(&params(k, theta));
            for z in &s.eigenvalues {
                let x = (z.re + 1.0 + theta) / (1.0 + theta);
                let y = z.im / (1.0 - theta);
                prop_assert!((x * x + y * y - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn semigroup_property(k in 3usize..15, theta in 0.1f64..3.0, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let q = build_q(&params(k, theta));
            let v: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            let direct = q.exp_action(s + t, &v).unwrap();
            let composed = q.exp_action(t, &q.exp_action(s, &v).unwrap()).unwrap();
            for (a, b) in direct.iter().zip(&composed) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!(direct.iter().all(|&x| x > -1e-12));
            prop_assert!((direct.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
