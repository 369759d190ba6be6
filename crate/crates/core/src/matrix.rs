//! Exact integer matrices.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::poly::{IntPoly, RatPoly};

/// Square matrix with arbitrary-precision integer entries, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    n: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("matrix is empty"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::invalid(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            data.extend(r.iter().cloned().map(Into::into));
        }
        Ok(IntMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![BigInt::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    /// Companion matrix of a monic polynomial (last column holds `-a_0 .. -a_{d-1}`),
    /// so that its characteristic polynomial is `p`.
    pub fn companion(p: &IntPoly) -> Result<Self> {
        if !p.is_monic() || p.deg() == 0 {
            return Err(Error::invalid("companion matrix needs a monic polynomial of degree >= 1"));
        }
        let d = p.deg();
        let mut m = Self::zeros(d);
        for i in 1..d {
            m[(i, i - 1)] = BigInt::one();
        }
        for i in 0..d {
            m[(i, d - 1)] = -p.coeff(i);
        }
        Ok(m)
    }

    /// Block-diagonal sum.
    pub fn direct_sum(&self, other: &IntMatrix) -> IntMatrix {
        let n = self.n + other.n;
        let mut m = Self::zeros(n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(i, j)].clone();
            }
        }
        for i in 0..other.n {
            for j in 0..other.n {
                m[(self.n + i, self.n + j)] = other[(i, j)].clone();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * &other[(k, j)];
                }
            }
        }
        m
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        IntMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, k: &BigInt) -> IntMatrix {
        IntMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * k).collect(),
        }
    }

    pub fn neg(&self) -> IntMatrix {
        self.scale(&BigInt::from(-1))
    }

    pub fn pow(&self, mut e: u32) -> IntMatrix {
        let mut base = self.clone();
        let mut acc = Self::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn trace(&self) -> BigInt {
        (0..self.n).map(|i| self[(i, i)].clone()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn det(&self) -> BigInt {
        bareiss_det(self.rows())
    }

    /// Characteristic polynomial `det(xI - A)` by the Faddeev–LeVerrier recursion;
    /// every division is exact over the integers.
    pub fn char_poly(&self) -> IntPoly {
        let n = self.n;
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        let mut m = Self::zeros(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self.mul(&m);
            for i in 0..n {
                next[(i, i)] += &coeffs[n - k + 1];
            }
            m = next;
            let t = self.mul(&m).trace();
            coeffs[n - k] = -(t / BigInt::from(k));
        }
        IntPoly::new(coeffs)
    }

    /// Evaluates `p(A)` by Horner's scheme.
    pub fn eval_poly(&self, p: &IntPoly) -> IntMatrix {
        let mut acc = Self::zeros(self.n);
        for c in p.coeffs().iter().rev() {
            acc = acc.mul(self);
            for i in 0..self.n {
                acc[(i, i)] += c;
            }
        }
        acc
    }

    /// Integer inverse for unimodular matrices.
    pub fn inverse_unimodular(&self) -> Result<IntMatrix> {
        let p = self.char_poly();
        let c0 = p.coeff(0);
        // det = (-1)^n c0
        if !c0.abs().is_one() {
            return Err(Error::invalid("matrix is not unimodular"));
        }
        // A^{-1} = -(1/c0) (A^{n-1} + c_{n-1} A^{n-2} + ... + c_1 I)
        let q = IntPoly::new(p.coeffs()[1..].to_vec());
        let inv = self.eval_poly(&q).scale(&(-c0));
        debug_assert!(inv.mul(self) == Self::identity(self.n));
        Ok(inv)
    }

    /// Minimal polynomial, found as the first linear dependency among
    /// `I, A, A^2, ...` by exact elimination over the rationals.
    pub fn minimal_poly(&self) -> IntPoly {
        let n = self.n;
        let nn = n * n;
        // Echelon basis: rows of (vector, combination-of-powers) pairs.
        let mut basis: Vec<(Vec<BigRational>, Vec<BigRational>, usize)> = Vec::new();
        let mut power = Self::identity(n);
        for k in 0..=n {
            let mut v: Vec<BigRational> = power
                .data
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect();
            let mut comb = vec![BigRational::zero(); n + 1];
            comb[k] = BigRational::one();
            for (bv, bc, pivot) in &basis {
                if v[*pivot].is_zero() {
                    continue;
                }
                let f = &v[*pivot] / &bv[*pivot];
                for i in 0..nn {
                    if !bv[i].is_zero() {
                        let t = &f * &bv[i];
                        v[i] -= t;
                    }
                }
                for i in 0..=n {
                    if !bc[i].is_zero() {
                        let t = &f * &bc[i];
                        comb[i] -= t;
                    }
                }
            }
            match v.iter().position(|x| !x.is_zero()) {
                Some(pivot) => basis.push((v, comb, pivot)),
                None => {
                    // comb is a monic (in A^k) annihilating combination
                    return RatPoly::new(comb).clear_denominators();
                }
            }
            power = power.mul(self);
        }
        unreachable!("Cayley–Hamilton bounds the minimal polynomial degree")
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)].to_f64().unwrap_or(f64::NAN))
    }

    /// Entries as `i64`, if they fit.
    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        self.data
            .chunks(self.n)
            .map(|r| r.iter().map(|x| x.to_i64()).collect())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n)).finish()
    }
}

/// Determinant by Bareiss fraction-free elimination.
pub(crate) fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}
