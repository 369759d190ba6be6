//! Factorisation of monic integer polynomials over the rationals.
//!
//! The polynomial is reduced modulo a prime `P` larger than twice the Mignotte bound
//! on factor coefficients, factored there (distinct-degree then Cantor–Zassenhaus),
//! and every split of the modular factors is lifted symmetrically and trial-divided
//! over the integers. Any integer factor appears as one of these splits, so the
//! search is exhaustive.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::poly::IntPoly;

/// Irreducibility verdict with a checkable witness.
#[derive(Debug, Clone, PartialEq)]
pub struct IrreducibilityCertificate {
    pub irreducible: bool,
    /// A nontrivial factor when reducible.
    pub factor: Option<IntPoly>,
    pub witness: String,
}

/// Decides irreducibility over the rationals of a monic integer polynomial.
pub fn is_irreducible(p: &IntPoly) -> Result<IrreducibilityCertificate> {
    let d = p.degree().ok_or_else(|| Error::invalid("zero polynomial"))?;
    if d == 0 {
        return Err(Error::invalid("degree 0 polynomial has no irreducibility status"));
    }
    if !p.is_monic() {
        return Err(Error::invalid("polynomial must be monic"));
    }
    if d == 1 {
        return Ok(IrreducibilityCertificate {
            irreducible: true,
            factor: None,
            witness: "linear".into(),
        });
    }
    let g = p.gcd(&p.derivative());
    if !g.is_constant() {
        return Ok(IrreducibilityCertificate {
            irreducible: false,
            factor: Some(g.clone()),
            witness: format!("repeated factor {g}"),
        });
    }
    let (factors, prime, modular_count) = factor_squarefree(p)?;
    if factors.len() == 1 {
        let witness = if modular_count == 1 {
            format!("irreducible modulo {prime}")
        } else {
            format!("none of the splits of the {modular_count} factors modulo {prime} lifts to a divisor")
        };
        Ok(IrreducibilityCertificate {
            irreducible: true,
            factor: None,
            witness,
        })
    } else {
        let f = factors[0].clone();
        Ok(IrreducibilityCertificate {
            irreducible: false,
            witness: format!("factor {f}"),
            factor: Some(f),
        })
    }
}

/// Complete factorisation into monic irreducibles with multiplicities, sorted by
/// degree and then coefficients.
pub fn factor(p: &IntPoly) -> Result<Vec<(IntPoly, usize)>> {
    if !p.is_monic() {
        return Err(Error::invalid("polynomial must be monic"));
    }
    let mut out = Vec::new();
    for (f, m) in p.squarefree_decomposition() {
        let (fs, _, _) = factor_squarefree(&f)?;
        out.extend(fs.into_iter().map(|g| (g, m)));
    }
    out.sort_by(|a, b| {
        a.0.deg()
            .cmp(&b.0.deg())
            .then_with(|| a.0.coeffs().cmp(b.0.coeffs()))
    });
    Ok(out)
}

/// Factors a monic squarefree polynomial. Returns the factors, the prime used and
/// the number of modular factors.
fn factor_squarefree(p: &IntPoly) -> Result<(Vec<IntPoly>, u64, usize)> {
    if p.deg() <= 1 {
        return Ok((vec![p.clone()], 0, 1));
    }
    let bound = mignotte_bound(p);
    let two_b = (bound * 2u32).to_u64().filter(|&b| b < (1u64 << 62)).ok_or_else(|| {
        Error::invalid("coefficients too large for single-word modular factorisation")
    })?;
    let prime = choose_prime(p, two_b + 1);
    let fp = reduce(p, prime);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    let mut modular = Vec::new();
    for (deg, block) in distinct_degree(&fp, prime) {
        equal_degree(&block, deg, prime, &mut rng, &mut modular);
    }
    let count = modular.len();
    let factors = recombine(p, modular, prime);
    Ok((factors, prime, count))
}

/// `C(n, n/2) * sum |a_i|`, an upper bound on coefficients of any integer factor.
fn mignotte_bound(p: &IntPoly) -> BigUint {
    let n = p.deg() as u64;
    let mut binom = BigUint::one();
    for i in 0..n / 2 {
        binom = binom * (n - i) / (i + 1);
    }
    let norm: BigUint = p.coeffs().iter().map(|c| c.magnitude().clone()).sum();
    binom * norm
}

fn choose_prime(p: &IntPoly, start: u64) -> u64 {
    let mut q = start | 1;
    loop {
        if is_prime(q) {
            let f = reduce(p, q);
            let df = deriv_mod(&f, q);
            if degree(&f) == p.deg() && degree(&gcd_mod(&f, &df, q)) == 0 {
                return q;
            }
        }
        q += 2;
    }
}

fn recombine(p: &IntPoly, mut modular: Vec<Vec<u64>>, prime: u64) -> Vec<IntPoly> {
    let mut target = p.clone();
    let mut found = Vec::new();
    let mut size = 1;
    while 2 * size <= modular.len() {
        let mut hit = None;
        for subset in Subsets::new(modular.len(), size) {
            let prod = subset
                .iter()
                .fold(vec![1u64], |acc, &i| mul_mod(&acc, &modular[i], prime));
            let lifted = symmetric_lift(&prod, prime);
            if let Some(q) = target.exact_div(&lifted) {
                hit = Some((subset, lifted, q));
                break;
            }
        }
        match hit {
            Some((subset, g, q)) => {
                found.push(g);
                target = q;
                for &i in subset.iter().rev() {
                    modular.remove(i);
                }
            }
            None => size += 1,
        }
    }
    found.push(target);
    found
}

fn symmetric_lift(a: &[u64], prime: u64) -> IntPoly {
    let half = prime / 2;
    IntPoly::new(
        a.iter()
            .map(|&c| {
                if c > half {
                    BigInt::from(c) - BigInt::from(prime)
                } else {
                    BigInt::from(c)
                }
            })
            .collect(),
    )
}

/// Lexicographic k-subsets of 0..n.
struct Subsets {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Subsets {
    fn new(n: usize, k: usize) -> Self {
        Subsets {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

// ---- arithmetic in F_p[x]; ascending coefficient vectors, trimmed ----

fn mulm(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powm(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mulm(r, a, p);
        }
        a = mulm(a, a, p);
        e >>= 1;
    }
    r
}

fn invm(a: u64, p: u64) -> u64 {
    powm(a, p - 2, p)
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for sp in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % sp == 0 {
            return n == sp;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powm(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulm(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn degree(a: &[u64]) -> usize {
    a.len().saturating_sub(1)
}

fn reduce(p: &IntPoly, q: u64) -> Vec<u64> {
    let qb = BigInt::from(q);
    trim(
        p.coeffs()
            .iter()
            .map(|c| {
                let r = c % &qb;
                let r = if r.is_negative() { r + &qb } else { r };
                r.to_u64().expect("reduced residue fits")
            })
            .collect(),
    )
}

fn deriv_mod(a: &[u64], p: u64) -> Vec<u64> {
    trim(
        a.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| mulm(c, i as u64 % p, p))
            .collect(),
    )
}

fn sub_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    trim(
        (0..n)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect(),
    )
}

fn mul_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut c = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            c[i + j] = (c[i + j] + mulm(x, y, p)) % p;
        }
    }
    trim(c)
}

fn divrem_mod(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let db = degree(b);
    let inv = invm(*b.last().expect("nonzero divisor"), p);
    let mut r = a.to_vec();
    if r.len() <= db {
        return (Vec::new(), trim(r));
    }
    let mut q = vec![0u64; r.len() - db];
    for i in (db..r.len()).rev() {
        let c = mulm(r[i], inv, p);
        if c == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let t = mulm(c, bj, p);
            r[i - db + j] = (r[i - db + j] + p - t) % p;
        }
        q[i - db] = c;
    }
    r.truncate(db);
    (trim(q), trim(r))
}

fn rem_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    divrem_mod(a, b, p).1
}

fn monic(a: Vec<u64>, p: u64) -> Vec<u64> {
    match a.last() {
        None => a,
        Some(&lc) => {
            let inv = invm(lc, p);
            a.into_iter().map(|c| mulm(c, inv, p)).collect()
        }
    }
}

fn gcd_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    while !b.is_empty() {
        let r = rem_mod(&a, &b, p);
        a = b;
        b = r;
    }
    monic(a, p)
}

fn powmod_poly(base: &[u64], e: &BigUint, f: &[u64], p: u64) -> Vec<u64> {
    let mut result = vec![1u64];
    let b = rem_mod(base, f, p);
    for i in (0..e.bits()).rev() {
        result = rem_mod(&mul_mod(&result, &result, p), f, p);
        if e.bit(i) {
            result = rem_mod(&mul_mod(&result, &b, p), f, p);
        }
    }
    result
}

/// Distinct-degree factorisation of a monic squarefree polynomial.
fn distinct_degree(f: &[u64], p: u64) -> Vec<(usize, Vec<u64>)> {
    let mut out = Vec::new();
    let mut rest = f.to_vec();
    let x = vec![0u64, 1];
    let mut h = x.clone();
    let pb = BigUint::from(p);
    let mut d = 1;
    while degree(&rest) >= 2 * d {
        h = powmod_poly(&h, &pb, &rest, p);
        let g = gcd_mod(&rest, &sub_mod(&h, &x, p), p);
        if degree(&g) > 0 {
            rest = divrem_mod(&rest, &g, p).0;
            h = rem_mod(&h, &rest, p);
            out.push((d, g));
        }
        d += 1;
    }
    if degree(&rest) > 0 {
        out.push((degree(&rest), rest));
    }
    out
}

/// Cantor–Zassenhaus equal-degree splitting (odd `p`).
fn equal_degree(f: &[u64], d: usize, p: u64, rng: &mut ChaCha8Rng, out: &mut Vec<Vec<u64>>) {
    let n = degree(f);
    if n == d {
        out.push(monic(f.to_vec(), p));
        return;
    }
    let e = (BigUint::from(p).pow(d as u32) - 1u32) / 2u32;
    loop {
        let a: Vec<u64> = trim((0..n).map(|_| rng.gen_range(0..p)).collect());
        if degree(&a) == 0 {
            continue;
        }
        let g = gcd_mod(f, &a, p);
        let split = if degree(&g) > 0 {
            g
        } else {
            let b = sub_mod(&powmod_poly(&a, &e, f, p), &[1], p);
            gcd_mod(f, &b, p)
        };
        if degree(&split) > 0 && degree(&split) < n {
            let other = monic(divrem_mod(f, &split, p).0, p);
            equal_degree(&split, d, p, rng, out);
            equal_degree(&other, d, p, rng, out);
            return;
        }
    }
}
