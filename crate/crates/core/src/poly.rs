//! Dense univariate polynomials with exact integer coefficients.
//!
//! Coefficients are stored in ascending order, `coeffs[i]` multiplies `x^i`,
//! with no trailing zeros. The zero polynomial has an empty coefficient list.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    /// Builds a polynomial from ascending `i64` coefficients.
    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// Builds a polynomial from descending coefficients, leading term first.
    pub fn from_desc(coeffs: &[i64]) -> Self {
        let mut asc: Vec<i64> = coeffs.to_vec();
        asc.reverse();
        Self::from_i64(&asc)
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        Self::new(vec![c])
    }

    /// `x^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![BigInt::zero(); n + 1];
        c[n] = BigInt::one();
        IntPoly { coeffs: c }
    }

    /// `x - a`.
    pub fn linear_root(a: &BigInt) -> Self {
        Self::new(vec![-a.clone(), BigInt::one()])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Multiplies by `x^n`.
    pub fn shift(&self, n: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![BigInt::zero(); n];
        c.extend(self.coeffs.iter().cloned());
        IntPoly { coeffs: c }
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + BigRational::from_integer(c.clone());
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| {
            acc * z + Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0)
        })
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// `x^deg p(1/x)`, the coefficient reversal.
    pub fn reciprocal(&self) -> Self {
        let mut c = self.coeffs.clone();
        c.reverse();
        Self::new(c)
    }

    /// `p(-x)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { c.clone() })
                .collect(),
        )
    }

    pub fn content(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divides out the content and makes the leading coefficient positive.
    pub fn primitive(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut g = self.content();
        if self.leading().is_negative() {
            g = -g;
        }
        Self::new(self.coeffs.iter().map(|c| c / &g).collect())
    }

    /// Euclidean division by a monic (or unit-leading) divisor, exact over the integers.
    pub fn div_rem_monic(&self, d: &IntPoly) -> (IntPoly, IntPoly) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.leading();
        assert!(
            lead.abs().is_one(),
            "div_rem_monic needs a unit leading coefficient"
        );
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Self::zero(), self.clone());
        }
        let mut q = vec![BigInt::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            let c = &r[i] * &lead;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                let t = &c * dc;
                r[i - dd + j] -= t;
            }
            q[i - dd] = c;
        }
        r.truncate(dd);
        (Self::new(q), Self::new(r))
    }

    /// Pseudo-remainder: `lc(d)^(deg a - deg d + 1) * a mod d`.
    pub fn pseudo_rem(&self, d: &IntPoly) -> IntPoly {
        let dd = d.degree().expect("division by zero polynomial");
        let Some(ad) = self.degree() else {
            return Self::zero();
        };
        if ad < dd {
            return self.clone();
        }
        let lc = d.leading();
        let mut r = self.clone();
        let mut steps = 0usize;
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let rl = r.leading();
            r = r.scale(&lc) - d.scale(&rl).shift(rd - dd);
            steps += 1;
        }
        let total = ad - dd + 1;
        if steps < total {
            r = r.scale(&num_traits::pow(lc, total - steps));
        }
        r
    }

    /// Exact division over the integers; `None` if `d` does not divide `self` in `Z[x]`.
    pub fn exact_div(&self, d: &IntPoly) -> Option<IntPoly> {
        let dd = d.degree()?;
        if self.is_zero() {
            return Some(Self::zero());
        }
        let sd = self.deg();
        if sd < dd {
            return None;
        }
        let lc = d.leading();
        let mut r = self.coeffs.clone();
        let mut q = vec![BigInt::zero(); sd - dd + 1];
        for i in (dd..=sd).rev() {
            if r[i].is_zero() {
                continue;
            }
            let (c, rem) = r[i].div_rem(&lc);
            if !rem.is_zero() {
                return None;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[i - dd + j] -= &c * dc;
            }
            q[i - dd] = c;
        }
        if r.iter().take(dd).any(|c| !c.is_zero()) {
            return None;
        }
        Some(Self::new(q))
    }

    pub fn divides(&self, other: &IntPoly) -> bool {
        other.exact_div(self).is_some()
    }

    /// Greatest common divisor over the rationals, returned primitive with positive
    /// leading coefficient. `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        let mut a = self.primitive();
        let mut b = other.primitive();
        if a.deg() < b.deg() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b).primitive();
            a = b;
            b = r;
        }
        a.primitive()
    }

    pub fn is_squarefree(&self) -> bool {
        self.gcd(&self.derivative()).is_constant()
    }

    /// Yun's square-free decomposition: returns `(f_i, i)` with `self = c * prod f_i^i`,
    /// each `f_i` primitive, squarefree and pairwise coprime.
    pub fn squarefree_decomposition(&self) -> Vec<(IntPoly, usize)> {
        if self.is_constant() {
            return Vec::new();
        }
        let f = RatPoly::from_int(self);
        let df = f.derivative();
        let a0 = f.gcd(&df);
        let mut b = f.div_exact(&a0);
        let mut d = df.div_exact(&a0) - b.derivative();
        let mut out = Vec::new();
        let mut i = 1;
        while b.degree().unwrap_or(0) > 0 {
            let a = b.gcd(&d);
            if a.degree().unwrap_or(0) > 0 {
                out.push((a.clear_denominators(), i));
            }
            b = b.div_exact(&a);
            let c = d.div_exact(&a);
            d = c - b.derivative();
            i += 1;
        }
        out
    }

    /// Squarefree part `p / gcd(p, p')`, primitive.
    pub fn squarefree_part(&self) -> IntPoly {
        let p = self.primitive();
        if p.is_constant() {
            return p;
        }
        let g = p.gcd(&p.derivative());
        p.exact_div(&g).expect("gcd divides").primitive()
    }

    /// Multiplicity of `a` as a root.
    pub fn root_multiplicity(&self, a: &BigInt) -> usize {
        let lin = IntPoly::linear_root(a);
        let mut p = self.clone();
        let mut m = 0;
        while !p.is_zero() {
            match p.exact_div(&lin) {
                Some(q) => {
                    p = q;
                    m += 1;
                }
                None => break,
            }
        }
        m
    }

    /// Power sums `s_k = sum_i r_i^k` of the roots for `k = 0..=n`, via Newton's identities.
    pub fn power_sums(&self, n: usize) -> Vec<BigRational> {
        let d = self.deg();
        let lc = BigRational::from_integer(self.leading());
        // e-coefficients normalised: p = lc * (x^d + a_{d-1} x^{d-1} + ... )
        let a: Vec<BigRational> = (0..=d)
            .map(|i| BigRational::from_integer(self.coeff(i)) / &lc)
            .collect();
        let mut s = vec![BigRational::zero(); n + 1];
        s[0] = BigRational::from_integer(BigInt::from(d));
        for k in 1..=n {
            // s_k + a_{d-1} s_{k-1} + ... + a_{d-k+1} s_1 + k a_{d-k} = 0 for k <= d
            let mut acc = BigRational::zero();
            for j in 1..k.min(d + 1) {
                acc += &a[d - j] * &s[k - j];
            }
            if k <= d {
                acc += &a[d - k] * BigRational::from_integer(BigInt::from(k));
            }
            s[k] = -acc;
        }
        s
    }

    /// Monic polynomial of degree `n` whose roots have the given power sums
    /// `s[1..=n]` (Newton's identities), if the result is integral.
    pub fn from_power_sums(s: &[BigRational], n: usize) -> Option<IntPoly> {
        let mut e = vec![BigRational::zero(); n + 1];
        e[0] = BigRational::one();
        for k in 1..=n {
            let mut acc = BigRational::zero();
            for i in 1..=k {
                let term = &e[k - i] * &s[i];
                if i % 2 == 1 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            e[k] = acc / BigRational::from_integer(BigInt::from(k));
        }
        let mut coeffs = vec![BigInt::zero(); n + 1];
        for (k, ek) in e.iter().enumerate() {
            if !ek.is_integer() {
                return None;
            }
            let v = ek.to_integer();
            coeffs[n - k] = if k % 2 == 1 { -v } else { v };
        }
        Some(IntPoly::new(coeffs))
    }

    /// Resultant via the Sylvester matrix and fraction-free elimination.
    pub fn resultant(&self, other: &IntPoly) -> BigInt {
        let (m, n) = match (self.degree(), other.degree()) {
            (Some(m), Some(n)) => (m, n),
            _ => return BigInt::zero(),
        };
        if m == 0 && n == 0 {
            return BigInt::one();
        }
        if m == 0 {
            return num_traits::pow(self.coeff(0), n);
        }
        if n == 0 {
            return num_traits::pow(other.coeff(0), m);
        }
        let size = m + n;
        let mut s = vec![vec![BigInt::zero(); size]; size];
        for row in 0..n {
            for j in 0..=m {
                s[row][row + j] = self.coeff(m - j);
            }
        }
        for row in 0..m {
            for j in 0..=n {
                s[n + row][row + j] = other.coeff(n - j);
            }
        }
        crate::matrix::bareiss_det(s)
    }
}

/// Polynomial with rational coefficients; only used inside exact algorithms.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RatPoly {
    pub(crate) coeffs: Vec<BigRational>,
}

impl RatPoly {
    pub(crate) fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub(crate) fn from_int(p: &IntPoly) -> Self {
        RatPoly::new(
            p.coeffs
                .iter()
                .map(|c| BigRational::from_integer(c.clone()))
                .collect(),
        )
    }

    pub(crate) fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub(crate) fn div_exact(&self, d: &RatPoly) -> RatPoly {
        let (q, r) = self.div_rem(d);
        debug_assert!(r.coeffs.is_empty(), "inexact rational division");
        q
    }

    pub(crate) fn div_rem(&self, d: &RatPoly) -> (RatPoly, RatPoly) {
        let dd = d.degree().expect("division by zero");
        let lc = d.coeffs[dd].clone();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (RatPoly::new(Vec::new()), self.clone());
        }
        let mut q = vec![BigRational::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            let c = &r[i] / &lc;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[i - dd + j] -= &c * dc;
            }
            q[i - dd] = c;
        }
        r.truncate(dd);
        (RatPoly::new(q), RatPoly::new(r))
    }

    /// Scales to a primitive integer polynomial with positive leading coefficient.
    pub(crate) fn clear_denominators(&self) -> IntPoly {
        let l = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        IntPoly::new(
            self.coeffs
                .iter()
                .map(|c| (c * BigRational::from_integer(l.clone())).to_integer())
                .collect(),
        )
        .primitive()
    }

    pub(crate) fn derivative(&self) -> RatPoly {
        RatPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    /// Monic gcd by the Euclidean algorithm over the rationals.
    pub(crate) fn gcd(&self, other: &RatPoly) -> RatPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while b.degree().is_some() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        match a.degree() {
            None => a,
            Some(n) => {
                let lc = a.coeffs[n].clone();
                RatPoly::new(a.coeffs.iter().map(|c| c / &lc).collect())
            }
        }
    }
}

impl Sub for RatPoly {
    type Output = RatPoly;
    fn sub(self, rhs: RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let z = BigRational::zero();
        RatPoly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) - rhs.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }
}

impl<'a> Add<&'a IntPoly> for &'a IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl<'a> Sub<&'a IntPoly> for &'a IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl<'a> Mul<&'a IntPoly> for &'a IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: &IntPoly) -> IntPoly {
        if self.is_zero() || rhs.is_zero() {
            return IntPoly::zero();
        }
        let mut c = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        IntPoly::new(c)
    }
}

impl Add for IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: IntPoly) -> IntPoly {
        &self + &rhs
    }
}

impl Sub for IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: IntPoly) -> IntPoly {
        &self - &rhs
    }
}

impl Mul for IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: IntPoly) -> IntPoly {
        &self * &rhs
    }
}

impl Neg for IntPoly {
    type Output = IntPoly;
    fn neg(self) -> IntPoly {
        IntPoly::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let show_coeff = !a.is_one() || i == 0;
            if show_coeff {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntPoly({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(desc: &[i64]) -> IntPoly {
        IntPoly::from_desc(desc)
    }

    #[test]
    fn display_and_degree() {
        let q = p(&[1, -1, -1, -1, 1]);
        assert_eq!(q.to_string(), "x^4 - x^3 - x^2 - x + 1");
        assert_eq!(q.degree(), Some(4));
        assert_eq!(IntPoly::zero().degree(), None);
    }

    #[test]
    fn product_of_quadratics() {
        let a = p(&[1, -3, 1]);
        let b = p(&[1, 1, 1]);
        assert_eq!(&a * &b, p(&[1, -2, -1, -2, 1]));
    }

    #[test]
    fn exact_division() {
        let prod = p(&[1, -2, -1, -2, 1]);
        assert_eq!(prod.exact_div(&p(&[1, 1, 1])), Some(p(&[1, -3, 1])));
        assert_eq!(prod.exact_div(&p(&[1, 0, 1])), None);
        assert_eq!(p(&[2, 4]).exact_div(&p(&[2])), Some(p(&[1, 2])));
        assert_eq!(p(&[3, 4]).exact_div(&p(&[2])), None);
    }

    #[test]
    fn gcd_finds_common_factor() {
        let a = &p(&[1, -3, 1]) * &p(&[1, 1, 1]);
        let b = &p(&[1, 0, 1]) * &p(&[1, 1, 1]);
        assert_eq!(a.gcd(&b), p(&[1, 1, 1]));
        assert!(p(&[1, 0, 1]).gcd(&p(&[1, -1])).is_constant());
    }

    #[test]
    fn yun_decomposition() {
        // (x-1)^3 (x+2)^2 (x^2+1)
        let q = &(&p(&[1, -1]) * &p(&[1, -1])) * &p(&[1, -1]);
        let r = &p(&[1, 2]) * &p(&[1, 2]);
        let full = &(&q * &r) * &p(&[1, 0, 1]);
        let dec = full.squarefree_decomposition();
        assert_eq!(
            dec,
            vec![(p(&[1, 0, 1]), 1), (p(&[1, 2]), 2), (p(&[1, -1]), 3)]
        );
        assert_eq!(full.squarefree_part(), &(&p(&[1, -1]) * &p(&[1, 2])) * &p(&[1, 0, 1]));
    }

    #[test]
    fn resultant_matches_root_products() {
        // Res(x^2 - 2, x - 1) = prod over roots of (x-1) evaluated at sqrt2 roots... = (sqrt2-1)(-sqrt2-1) = -1
        let a = p(&[1, 0, -2]);
        let b = p(&[1, -1]);
        assert_eq!(a.resultant(&b), BigInt::from(-1));
        // common root => zero
        assert!(p(&[1, -2, -1, -2, 1]).resultant(&p(&[1, 1, 1])).is_zero());
    }

    #[test]
    fn power_sums_roundtrip() {
        let q = p(&[1, -1, -1, -1, 1]);
        let s = q.power_sums(4);
        assert_eq!(IntPoly::from_power_sums(&s, 4), Some(q.clone()));
        // past the degree: roots of x^2 - x - 1 have s_k = Lucas numbers
        let fib = p(&[1, -1, -1]).power_sums(6);
        let lucas: Vec<i64> = vec![2, 1, 3, 4, 7, 11, 18];
        for (k, l) in lucas.iter().enumerate() {
            assert_eq!(fib[k], BigRational::from_integer(BigInt::from(*l)));
        }
    }

    #[test]
    fn pseudo_remainder_nonmonic() {
        let a = p(&[1, 0, 0, 1]);
        let d = p(&[2, 1]);
        // prem = lc^3 * a mod d; a(-1/2) = 7/8, times 8 = 7
        assert_eq!(a.pseudo_rem(&d), p(&[7]));
    }

    #[test]
    fn root_multiplicity_counts() {
        let q = &(&p(&[1, -1]) * &p(&[1, -1])) * &p(&[1, 1]);
        assert_eq!(q.root_multiplicity(&BigInt::one()), 2);
        assert_eq!(q.root_multiplicity(&BigInt::from(-1)), 1);
        assert_eq!(q.root_multiplicity(&BigInt::from(2)), 0);
    }
}
