//! Chebyshev polynomials `T_n`, `U_n` and the four auxiliary families
//! `N_even`, `D_even`, `N_odd`, `D_odd`.
//!
//! `T_n`, `U_n` follow `p_{n+1} = 2x p_n - p_{n-1}`; the auxiliary families follow
//! `p_{n+1} = x p_n - p_{n-1}` and differ only in their first two terms.

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolyFamily {
    ChebyT,
    ChebyU,
    Neven,
    Deven,
    Nodd,
    Dodd,
}

impl PolyFamily {
    pub const ALL: [PolyFamily; 6] = [
        PolyFamily::ChebyT,
        PolyFamily::ChebyU,
        PolyFamily::Neven,
        PolyFamily::Deven,
        PolyFamily::Nodd,
        PolyFamily::Dodd,
    ];

    pub const AUXILIARY: [PolyFamily; 4] = [PolyFamily::Neven, PolyFamily::Deven, PolyFamily::Nodd, PolyFamily::Dodd];

    pub fn min_index(self) -> i64 {
        match self {
            PolyFamily::ChebyU => -1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolyFamily::ChebyT => "T",
            PolyFamily::ChebyU => "U",
            PolyFamily::Neven => "N_even",
            PolyFamily::Deven => "D_even",
            PolyFamily::Nodd => "N_odd",
            PolyFamily::Dodd => "D_odd",
        }
    }

    /// Multiplier of `x` in the recurrence.
    fn coupling<T: Scalar>(self, x: &T) -> T {
        match self {
            PolyFamily::ChebyT | PolyFamily::ChebyU => x.clone() + x.clone(),
            _ => x.clone(),
        }
    }

    /// `(p_{m}, p_{m+1})` at the family's minimum index `m`.
    fn seeds<T: Scalar>(self, x: &T) -> (T, T) {
        let one = T::one();
        match self {
            PolyFamily::ChebyT => (one, x.clone()),
            PolyFamily::ChebyU => (T::zero(), one),
            PolyFamily::Neven => (one.clone() + one, x.clone()),
            PolyFamily::Deven => (T::zero(), x.clone() + one.clone() + one),
            PolyFamily::Nodd => (one.clone(), x.clone() - one),
            PolyFamily::Dodd => (one.clone(), x.clone() + one),
        }
    }

    fn check_index(self, n: i64) -> Result<()> {
        if n < self.min_index() {
            return Err(Error::Domain(format!("{} is defined for n >= {}, got {n}", self.name(), self.min_index())));
        }
        Ok(())
    }
}

/// `p_n(x)` by forward recurrence.
///
/// Fails with [`Error::Overflow`] when an iterate exceeds the scalar's
/// overflow threshold; see [`ratio`] for an overflow-free alternative.
pub fn eval<T: Scalar>(family: PolyFamily, n: i64, x: &T) -> Result<T> {
    family.check_index(n)?;
    let m = family.min_index();
    let (mut prev, mut cur) = family.seeds(x);
    if n == m {
        return Ok(prev);
    }
    let c = family.coupling(x);
    let limit = T::overflow_threshold();
    for j in m + 1..n {
        let next = c.clone() * cur.clone() - prev;
        if let Some(lim) = &limit {
            if !(next.magnitude() <= *lim) {
                return Err(Error::Overflow { family: family.name(), index: j + 1 });
            }
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `p_n(x)` as `(mantissa, e)` with value `mantissa * 2^e`.
///
/// Both iterates are rescaled by the same power of two whenever they grow
/// large, which is exact in binary floating point.
pub fn eval_scaled<T: Real>(family: PolyFamily, n: i64, x: T) -> Result<(T, i64)> {
    family.check_index(n)?;
    let m = family.min_index();
    let (mut prev, mut cur) = family.seeds(&x);
    if n == m {
        return Ok((prev, 0));
    }
    let shift = rescale_shift::<T>();
    let big = T::lit(2.0).powi(shift);
    let small = T::lit(2.0).powi(-shift);
    let c = family.coupling(&x);
    let mut exponent = 0i64;
    for _ in m + 1..n {
        let next = c * cur - prev;
        if !next.is_finite() {
            return Err(Error::Overflow { family: family.name(), index: n });
        }
        prev = cur;
        cur = next;
        if cur.abs() > big {
            cur = cur * small;
            prev = prev * small;
            exponent += shift as i64;
        }
    }
    Ok((cur, exponent))
}

fn rescale_shift<T: Real>() -> i32 {
    // half the exponent range keeps one more recurrence step finite
    let thr = T::overflow_threshold().expect("floating scalar").approx();
    (thr.log2() / 2.0).floor() as i32
}

/// `a_m(x) / b_n(x)` without intermediate overflow.
pub fn ratio<T: Real>(a: PolyFamily, m: i64, b: PolyFamily, n: i64, x: T) -> Result<T> {
    let (num, en) = eval_scaled(a, m, x)?;
    let (den, ed) = eval_scaled(b, n, x)?;
    if den == T::zero() {
        return Err(Error::Domain(format!("{}_{n} vanishes at x = {x:?}", b.name())));
    }
    let mut q = num / den;
    let mut e = en - ed;
    // apply the binary exponent in bounded chunks
    let two = T::lit(2.0);
    while e != 0 {
        let step = e.clamp(-60, 60);
        q = q * two.powi(step as i32);
        e -= step;
        if q == T::zero() {
            break;
        }
    }
    Ok(q)
}

/// Largest residual of the four identities linking the auxiliary families to
/// `T_n(x/2)` and `U_n(x/2)`.
pub fn chebyshev_identity_check<T: Scalar>(n: i64, x: &T) -> Result<T> {
    if n < 0 {
        return Err(Error::Domain(format!("identity check needs n >= 0, got {n}")));
    }
    let half = x.clone() / T::from_int(2);
    let two = T::from_int(2);
    let t_n = eval(PolyFamily::ChebyT, n, &half)?;
    let u_n = eval(PolyFamily::ChebyU, n, &half)?;
    let u_prev = eval(PolyFamily::ChebyU, n - 1, &half)?;
    let pairs = [
        (eval(PolyFamily::Neven, n, x)?, two.clone() * t_n),
        (eval(PolyFamily::Deven, n, x)?, (x.clone() + two) * u_prev.clone()),
        (eval(PolyFamily::Nodd, n, x)?, u_n.clone() - u_prev.clone()),
        (eval(PolyFamily::Dodd, n, x)?, u_n + u_prev),
    ];
    Ok(pairs.into_iter().map(|(l, r)| (l - r).magnitude()).fold(T::zero(), T::max_of))
}

/// Residual of `2 N_n - x N_{n+1} + (x - 2) D_{n+1}` for both parities.
pub fn three_term_relation_check<T: Scalar>(n: i64, x: &T) -> Result<T> {
    if n < 0 {
        return Err(Error::Domain(format!("relation check needs n >= 0, got {n}")));
    }
    let two = T::from_int(2);
    let rel = |num: PolyFamily, den: PolyFamily| -> Result<T> {
        let v = two.clone() * eval(num, n, x)? - x.clone() * eval(num, n + 1, x)?
            + (x.clone() - two.clone()) * eval(den, n + 1, x)?;
        Ok(v.magnitude())
    };
    Ok(T::max_of(rel(PolyFamily::Neven, PolyFamily::Deven)?, rel(PolyFamily::Nodd, PolyFamily::Dodd)?))
}

/// Coefficients `(c0, c1, c2)` of the expansion `c0 + c1 (x-2) + c2 (x-2)^2`.
pub fn taylor_at_two<T: Scalar>(family: PolyFamily, n: i64) -> Result<(T, T, T)> {
    if n < 0 {
        return Err(Error::Domain(format!("expansion needs n >= 0, got {n}")));
    }
    let v = T::from_int(n);
    let pw = |e: u32| (0..e).fold(T::one(), |acc, _| acc * v.clone());
    let c = |k: i64| T::from_int(k);
    let d = |num: T, den: i64| num / T::from_int(den);
    match family {
        PolyFamily::Neven => Ok((c(2), pw(2), d(pw(4) - pw(2), 12))),
        PolyFamily::Deven => Ok((c(4) * v.clone(), d(c(2) * pw(3) + v.clone(), 3), d(pw(5) - v.clone(), 30))),
        PolyFamily::Nodd => Ok((c(1), d(pw(2) + v.clone(), 2), d(pw(4) + c(2) * pw(3) - pw(2) - c(2) * v.clone(), 24))),
        PolyFamily::Dodd => Ok((
            c(2) * v.clone() + c(1),
            d(c(2) * pw(3) + c(3) * pw(2) + v.clone(), 6),
            d(c(2) * pw(5) + c(5) * pw(4) - c(5) * pw(2) - c(2) * v.clone(), 120),
        )),
        PolyFamily::ChebyT | PolyFamily::ChebyU => {
            Err(Error::Domain(format!("no expansion at x = 2 is provided for {}", family.name())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio as q;
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};
    use proptest::prelude::*;

    /// Polynomial in `h = x - 2` with exact coefficients, lowest degree first.
    fn poly_in_h(family: PolyFamily, n: i64) -> Vec<BigRational> {
        let add = |a: &[BigRational], b: &[BigRational], sb: i64| {
            let len = a.len().max(b.len());
            (0..len)
                .map(|i| {
                    a.get(i).cloned().unwrap_or_else(BigRational::zero)
                        + b.get(i).cloned().unwrap_or_else(BigRational::zero) * q(sb, 1)
                })
                .collect::<Vec<_>>()
        };
        let times_x = |a: &[BigRational], scale: i64| {
            // (2 + h) * a * scale
            let mut out = vec![BigRational::zero(); a.len() + 1];
            for (i, c) in a.iter().enumerate() {
                out[i] += c * q(2 * scale, 1);
                out[i + 1] += c * q(scale, 1);
            }
            out
        };
        let scale = match family {
            PolyFamily::ChebyT | PolyFamily::ChebyU => 2,
            _ => 1,
        };
        let x = vec![q(2, 1), q(1, 1)];
        let (mut prev, mut cur): (Vec<BigRational>, Vec<BigRational>) = match family {
            PolyFamily::ChebyT => (vec![q(1, 1)], x.clone()),
            PolyFamily::ChebyU => (vec![q(0, 1)], vec![q(1, 1)]),
            PolyFamily::Neven => (vec![q(2, 1)], x.clone()),
            PolyFamily::Deven => (vec![q(0, 1)], vec![q(4, 1), q(1, 1)]),
            PolyFamily::Nodd => (vec![q(1, 1)], vec![q(1, 1), q(1, 1)]),
            PolyFamily::Dodd => (vec![q(1, 1)], vec![q(3, 1), q(1, 1)]),
        };
        let m = family.min_index();
        if n == m {
            return prev;
        }
        for _ in m + 1..n {
            let next = add(&times_x(&cur, scale), &prev, -1);
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn spec_examples() {
        assert_eq!(eval(PolyFamily::ChebyT, 5, &1.0).unwrap(), 1.0);
        assert_eq!(eval(PolyFamily::ChebyU, 3, &2.0).unwrap(), 56.0);
        assert_eq!(eval(PolyFamily::Nodd, 2, &3.0).unwrap(), 5.0);
        assert_eq!(eval(PolyFamily::Deven, 2, &3.0).unwrap(), 15.0);
        assert_eq!(eval(PolyFamily::ChebyU, -1, &0.3).unwrap(), 0.0);
        assert!(matches!(eval(PolyFamily::Neven, -1, &2.0), Err(Error::Domain(_))));
        assert!(matches!(eval(PolyFamily::ChebyU, -2, &2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn u_matches_hyperbolic_formula() {
        // U_n(cosh a) = sinh((n+1)a) / sinh a
        let a: f64 = 1.3169578969248166; // acosh(2)
        for n in 0..15 {
            let want = ((n + 1) as f64 * a).sinh() / a.sinh();
            let got = eval(PolyFamily::ChebyU, n, &2.0f64).unwrap();
            assert!((got - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn identity_examples() {
        assert_eq!(chebyshev_identity_check(0, &3.0).unwrap(), 0.0);
        assert_eq!(chebyshev_identity_check(2, &3.0).unwrap(), 0.0);
        let r = chebyshev_identity_check(7, &2.5f64).unwrap();
        assert!(r < 1e-9);
        for n in 0..30 {
            assert!(chebyshev_identity_check(n, &q(7, 3)).unwrap().is_zero());
            assert!(three_term_relation_check(n, &q(-5, 4)).unwrap().is_zero());
        }
    }

    #[test]
    fn relation_examples() {
        assert_eq!(three_term_relation_check(0, &5.0).unwrap(), 0.0);
        assert!(three_term_relation_check(3, &3.0).unwrap() < 1e-12);
        assert!(three_term_relation_check(10, &(2.0 + 1e-3)).unwrap() < 1e-9);
    }

    #[test]
    fn taylor_examples() {
        assert_eq!(taylor_at_two::<f64>(PolyFamily::Neven, 0).unwrap(), (2.0, 0.0, 0.0));
        assert_eq!(taylor_at_two::<f64>(PolyFamily::Dodd, 1).unwrap(), (3.0, 1.0, 0.0));
        assert_eq!(taylor_at_two::<f64>(PolyFamily::Deven, 2).unwrap(), (8.0, 6.0, 1.0));
        assert!(taylor_at_two::<f64>(PolyFamily::ChebyT, 2).is_err());
        assert!(taylor_at_two::<f64>(PolyFamily::ChebyU, 2).is_err());
    }

    #[test]
    fn taylor_matches_exact_expansion() {
        for family in PolyFamily::AUXILIARY {
            for n in 0..=20 {
                let p = poly_in_h(family, n);
                let get = |i: usize| p.get(i).cloned().unwrap_or_else(BigRational::zero);
                let (c0, c1, c2) = taylor_at_two::<BigRational>(family, n).unwrap();
                assert_eq!((c0, c1, c2), (get(0), get(1), get(2)), "{family:?} n={n}");
            }
        }
    }

    #[test]
    fn taylor_matches_finite_differences() {
        let h = 1e-3;
        let (c0, c1, c2) = taylor_at_two::<f64>(PolyFamily::Deven, 2).unwrap();
        let f = |x: f64| eval(PolyFamily::Deven, 2, &x).unwrap();
        assert!((f(2.0) - c0).abs() < 1e-12);
        assert!(((f(2.0 + h) - f(2.0 - h)) / (2.0 * h) - c1).abs() < 1e-6);
        assert!(((f(2.0 + h) - 2.0 * f(2.0) + f(2.0 - h)) / (h * h) / 2.0 - c2).abs() < 1e-4);
    }

    #[test]
    fn cubic_remainder_on_shrinking_steps() {
        for family in PolyFamily::AUXILIARY {
            for n in 0..=12 {
                let (c0, c1, c2) = taylor_at_two::<BigRational>(family, n).unwrap();
                let rem = |h: &BigRational| {
                    let x = q(2, 1) + h.clone();
                    let t = c0.clone() + c1.clone() * h + c2.clone() * h * h;
                    (eval(family, n, &x).unwrap() - t).abs() / (h * h * h)
                };
                let scaled: Vec<BigRational> = (1..12).map(|m| rem(&q(1, 1 << m))).collect();
                // remainder / h^3 converges, so it is bounded by its first value plus the limit
                let bound = scaled[0].clone() * q(2, 1) + q(1, 1);
                assert!(scaled.iter().all(|s| *s <= bound), "{family:?} n={n}");
            }
        }
    }

    #[test]
    fn scaled_evaluation_survives_overflow() {
        let x = 3.0f64;
        assert!(matches!(eval(PolyFamily::Deven, 2000, &x), Err(Error::Overflow { .. })));
        let r = ratio(PolyFamily::Neven, 1999, PolyFamily::Deven, 2000, x).unwrap();
        // N_{n-1}/D_n -> 1/(x+2)/(r-...) converges; compare against a moderate index
        let r_small = eval(PolyFamily::Neven, 199, &x).unwrap() / eval(PolyFamily::Deven, 200, &x).unwrap();
        assert!((r - r_small).abs() < 1e-14);
        let direct = eval(PolyFamily::Nodd, 30, &2.5).unwrap() / eval(PolyFamily::Dodd, 40, &2.5).unwrap();
        let scaled = ratio(PolyFamily::Nodd, 30, PolyFamily::Dodd, 40, 2.5).unwrap();
        assert!((direct - scaled).abs() <= 1e-15 * direct);
        let f32_ratio = ratio(PolyFamily::Neven, 99, PolyFamily::Deven, 100, 3.0f32).unwrap();
        assert!((f32_ratio as f64 - r_small).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn remainder_is_cubic_on_two_to_four(x in 2.0f64..4.0, n in 0i64..=12, f in 0usize..4) {
            let family = PolyFamily::AUXILIARY[f];
            let p = poly_in_h(family, n);
            let h = x - 2.0;
            // |sum_{j>=3} c_j h^j| <= h^3 sum |c_j| 2^{j-3} for h <= 2
            let c: f64 = p.iter().enumerate().skip(3).map(|(j, cj)| {
                use num_traits::ToPrimitive;
                cj.abs().to_f64().unwrap() * 2f64.powi(j as i32 - 3)
            }).sum();
            let (c0, c1, c2) = taylor_at_two::<f64>(family, n).unwrap();
            let v = eval(family, n, &x).unwrap();
            let rem = (v - (c0 + c1 * h + c2 * h * h)).abs();
            prop_assert!(rem <= c * h.powi(3) + 1e-10 * v.abs().max(1.0));
        }

        #[test]
        fn u_minus_one_vanishes(x in -10.0f64..10.0) {
            prop_assert_eq!(eval(PolyFamily::ChebyU, -1, &x).unwrap(), 0.0);
        }

        #[test]
        fn identities_and_relations_vanish(n in 0i64..=50, x in 2.0f64..10.0) {
            let scale = eval(PolyFamily::Dodd, n + 1, &x).unwrap().abs().max(1.0);
            prop_assert!(chebyshev_identity_check(n, &x).unwrap() < 1e-9 * scale);
            prop_assert!(three_term_relation_check(n, &x).unwrap() < 1e-9 * scale * x);
        }
    }
}
