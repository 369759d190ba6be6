//! Cyclotomic polynomials and root-of-unity detection.

use num_bigint::BigInt;
use num_traits::One;

use crate::poly::IntPoly;

/// Euler's totient.
pub fn totient(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

fn mobius(mut n: u64) -> i32 {
    let mut k = 0;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            k += 1;
        }
        p += 1;
    }
    if n > 1 {
        k += 1;
    }
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

fn x_pow_minus_one(d: usize) -> IntPoly {
    &IntPoly::monomial(d) - &IntPoly::one()
}

/// The `n`-th cyclotomic polynomial, `prod_{d | n} (x^d - 1)^{mu(n/d)}`.
pub fn cyclotomic(n: u64) -> IntPoly {
    assert!(n >= 1);
    let divisors: Vec<u64> = (1..=n).filter(|d| n % d == 0).collect();
    let mut num = IntPoly::one();
    let mut den = IntPoly::one();
    for &d in &divisors {
        match mobius(n / d) {
            1 => num = &num * &x_pow_minus_one(d as usize),
            -1 => den = &den * &x_pow_minus_one(d as usize),
            _ => {}
        }
    }
    num.exact_div(&den).expect("cyclotomic product is exact")
}

/// All `n` with `phi(n) <= max_degree`, ascending.
///
/// Uses `phi(n) >= sqrt(n / 2)`, so no qualifying `n` exceeds `2 * max_degree^2`.
pub fn indices_with_totient_at_most(max_degree: u64) -> Vec<u64> {
    let bound = 2 * max_degree.max(1) * max_degree.max(1);
    (1..=bound).filter(|&n| totient(n) <= max_degree).collect()
}

/// Smallest `n` with `phi(n) <= max_degree` such that `Phi_n` divides `p`.
pub fn find_cyclotomic_factor(p: &IntPoly, max_degree: u64) -> Option<u64> {
    if p.is_zero() {
        return None;
    }
    let deg = p.deg() as u64;
    indices_with_totient_at_most(max_degree.min(deg))
        .into_iter()
        .find(|&n| {
            let phi = cyclotomic(n);
            // Phi_n is irreducible, so gcd(p, Phi_n) != 1 iff Phi_n | p iff Res(p, Phi_n) = 0.
            let (_, r) = p.div_rem_monic(&phi);
            r.is_zero()
        })
}

/// `Res(p, Phi_n)` for every `n` with `phi(n) <= max_degree`.
pub fn cyclotomic_resultants(p: &IntPoly, max_degree: u64) -> Vec<(u64, BigInt)> {
    indices_with_totient_at_most(max_degree)
        .into_iter()
        .map(|n| (n, p.resultant(&cyclotomic(n))))
        .collect()
}

pub(crate) fn is_unit(b: &BigInt) -> bool {
    b.is_one() || (-b).is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_cyclotomics() {
        assert_eq!(cyclotomic(1), IntPoly::from_desc(&[1, -1]));
        assert_eq!(cyclotomic(2), IntPoly::from_desc(&[1, 1]));
        assert_eq!(cyclotomic(3), IntPoly::from_desc(&[1, 1, 1]));
        assert_eq!(cyclotomic(4), IntPoly::from_desc(&[1, 0, 1]));
        assert_eq!(cyclotomic(6), IntPoly::from_desc(&[1, -1, 1]));
        assert_eq!(cyclotomic(12), IntPoly::from_desc(&[1, 0, -1, 0, 1]));
        // Phi_105 is the first with a coefficient of absolute value 2.
        assert!(cyclotomic(105)
            .coeffs()
            .iter()
            .any(|c| *c == BigInt::from(-2)));
    }

    #[test]
    fn totient_index_set() {
        assert_eq!(indices_with_totient_at_most(2), vec![1, 2, 3, 4, 6]);
        assert_eq!(
            indices_with_totient_at_most(4),
            vec![1, 2, 3, 4, 5, 6, 8, 10, 12]
        );
    }

    #[test]
    fn degrees_are_totients() {
        for n in 1..60 {
            assert_eq!(cyclotomic(n).deg() as u64, totient(n));
        }
    }
}
