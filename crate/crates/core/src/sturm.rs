//! Sturm sequences and exact counting of unit-circle roots.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::poly::IntPoly;

/// Sturm sequence of a polynomial, kept primitive at every step. Scaling by
/// positive constants leaves sign variations unchanged.
#[derive(Debug, Clone)]
pub struct SturmSequence {
    seq: Vec<IntPoly>,
}

impl SturmSequence {
    pub fn new(p: &IntPoly) -> Self {
        let mut seq = vec![p.clone()];
        if p.is_constant() {
            return SturmSequence { seq };
        }
        seq.push(p.derivative());
        loop {
            let n = seq.len();
            let (a, b) = (&seq[n - 2], &seq[n - 1]);
            if b.is_constant() {
                break;
            }
            // prem = lc(b)^k a mod b; flip sign if lc(b)^k < 0 to keep a positive multiple.
            let k = a.deg() - b.deg() + 1;
            let mut r = a.pseudo_rem(b);
            let lc = b.leading();
            if lc.is_negative() && k % 2 == 1 {
                r = -r;
            }
            if r.is_zero() {
                break;
            }
            let c = r.content();
            let r = IntPoly::new(r.coeffs().iter().map(|x| -(x / &c)).collect());
            seq.push(r);
        }
        SturmSequence { seq }
    }

    pub fn polys(&self) -> &[IntPoly] {
        &self.seq
    }

    pub fn variations_at(&self, x: &BigRational) -> usize {
        let signs: Vec<i8> = self
            .seq
            .iter()
            .map(|p| {
                let v = p.eval_rational(x);
                if v.is_zero() {
                    0
                } else if v.is_positive() {
                    1
                } else {
                    -1
                }
            })
            .filter(|&s| s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Number of distinct real roots in `(a, b]` of a squarefree polynomial.
    pub fn count_in(&self, a: &BigRational, b: &BigRational) -> usize {
        self.variations_at(a).saturating_sub(self.variations_at(b))
    }
}

/// Real roots in `(a, b]`, counted with multiplicity.
pub fn count_real_roots(p: &IntPoly, a: &BigRational, b: &BigRational) -> usize {
    p.squarefree_decomposition()
        .iter()
        .map(|(f, m)| SturmSequence::new(f).count_in(a, b) * m)
        .sum()
}

/// For a palindromic `g` of even degree `2m`, the unique `q` of degree `m` with
/// `g(x) = x^m q(x + 1/x)`.
pub fn trace_reduction(g: &IntPoly) -> IntPoly {
    let deg = g.deg();
    assert!(deg % 2 == 0, "palindromic reduction needs even degree");
    let m = deg / 2;
    // P_0 = 2, P_1 = y, P_{j+1} = y P_j - P_{j-1}; x^j + x^{-j} = P_j(x + 1/x)
    let y = IntPoly::monomial(1);
    let mut prev = IntPoly::constant(BigInt::from(2));
    let mut cur = y.clone();
    let mut q = IntPoly::constant(g.coeff(m));
    for j in 1..=m {
        q = &q + &cur.scale(&g.coeff(m + j));
        let next = &(&y * &cur) - &prev;
        prev = cur;
        cur = next;
    }
    q
}

/// Exact unit-circle root count of an integer polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitCircleCount {
    /// Multiplicity of the root `1`.
    pub at_one: usize,
    /// Multiplicity of the root `-1`.
    pub at_minus_one: usize,
    /// Non-real unit-modulus roots, with multiplicity (always even).
    pub nonreal: usize,
    /// The reduced trace polynomial whose roots in (-2, 2) gave `nonreal`.
    pub trace_poly: IntPoly,
}

impl UnitCircleCount {
    pub fn total(&self) -> usize {
        self.at_one + self.at_minus_one + self.nonreal
    }
}

/// Counts roots of modulus exactly one: strips `x = ±1`, extracts the reciprocal part
/// `gcd(p, x^d p(1/x))`, reduces it by `y = x + 1/x` and counts roots of the reduced
/// polynomial in `(-2, 2)` with Sturm sequences.
pub fn unit_circle_roots(p: &IntPoly) -> UnitCircleCount {
    let one = BigInt::one();
    let at_one = p.root_multiplicity(&one);
    let at_minus_one = p.root_multiplicity(&-one.clone());
    let mut rest = p.clone();
    for _ in 0..at_one {
        rest = rest.exact_div(&IntPoly::linear_root(&one)).expect("root of p");
    }
    for _ in 0..at_minus_one {
        rest = rest.exact_div(&IntPoly::linear_root(&-one.clone())).expect("root of p");
    }
    // Roots at 0 never lie on the circle; strip them so the reversal is exact.
    while rest.deg() > 0 && rest.coeff(0).is_zero() {
        rest = IntPoly::new(rest.coeffs()[1..].to_vec());
    }
    let g = rest.gcd(&rest.reciprocal());
    if g.deg() == 0 {
        return UnitCircleCount {
            at_one,
            at_minus_one,
            nonreal: 0,
            trace_poly: IntPoly::one(),
        };
    }
    // Root set closed under inversion and free of ±1 forces a palindrome.
    debug_assert_eq!(g.reciprocal(), g);
    let q = trace_reduction(&g);
    let lo = BigRational::from_integer(BigInt::from(-2));
    let hi = BigRational::from_integer(BigInt::from(2));
    // q(±2) != 0 because ±1 are not roots of g.
    let pairs = count_real_roots(&q, &lo, &hi);
    UnitCircleCount {
        at_one,
        at_minus_one,
        nonreal: 2 * pairs,
        trace_poly: q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn sturm_counts_roots() {
        // (x-1)(x-2)(x+3)
        let p = IntPoly::from_desc(&[1, 0, -7, 6]);
        let s = SturmSequence::new(&p);
        assert_eq!(s.count_in(&r(-10), &r(10)), 3);
        assert_eq!(s.count_in(&r(0), &r(10)), 2);
        assert_eq!(s.count_in(&r(1), &r(2)), 1);
    }

    #[test]
    fn negative_leading_sequences() {
        let p = IntPoly::from_desc(&[-1, 0, 3, 0]); // -x^3 + 3x, roots 0, ±sqrt3
        assert_eq!(SturmSequence::new(&p).count_in(&r(-5), &r(5)), 3);
    }

    #[test]
    fn trace_reduction_of_quartic() {
        let g = IntPoly::from_desc(&[1, -1, -1, -1, 1]);
        assert_eq!(trace_reduction(&g), IntPoly::from_desc(&[1, -1, -3]));
    }

    #[test]
    fn unit_circle_examples() {
        let quartic = unit_circle_roots(&IntPoly::from_desc(&[1, -1, -1, -1, 1]));
        assert_eq!(quartic.total(), 2);
        assert_eq!(quartic.nonreal, 2);
        assert_eq!(unit_circle_roots(&IntPoly::from_desc(&[1, -3, 1])).total(), 0);
        let id = unit_circle_roots(&IntPoly::from_desc(&[1, -2, 1]));
        assert_eq!((id.at_one, id.total()), (2, 2));
        // (x^2+1)^2 (x+1)
        let p = &(&IntPoly::from_desc(&[1, 0, 1]) * &IntPoly::from_desc(&[1, 0, 1]))
            * &IntPoly::from_desc(&[1, 1]);
        let c = unit_circle_roots(&p);
        assert_eq!((c.at_minus_one, c.nonreal), (1, 4));
        // Non-reciprocal with no circle roots: x^3 - x - 1
        assert_eq!(unit_circle_roots(&IntPoly::from_desc(&[1, 0, -1, -1])).total(), 0);
    }
}
