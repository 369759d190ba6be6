//! Real trigonometric polynomials on the torus `R^d / Z^d`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `cos * cos(2 pi k.x) + sin * sin(2 pi k.x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl Mode {
    pub fn new(k: Vec<i64>, cos: f64, sin: f64) -> Self {
        Mode { k, cos, sin }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        TAU * self.k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum::<f64>()
    }

    fn amplitude(&self) -> f64 {
        self.cos.abs() + self.sin.abs()
    }

    fn k_norm(&self) -> f64 {
        self.k.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt()
    }

    pub fn k_max(&self) -> i64 {
        self.k.iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.k.iter().all(|&k| k == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    dim: usize,
    modes: Vec<Mode>,
}

impl TrigPoly {
    pub fn new(dim: usize, modes: Vec<Mode>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("trigonometric polynomial on a 0-torus"));
        }
        if let Some(m) = modes.iter().find(|m| m.k.len() != dim) {
            return Err(Error::invalid(format!(
                "frequency {:?} has length {}, expected {dim}",
                m.k,
                m.k.len()
            )));
        }
        if modes.iter().any(|m| !m.cos.is_finite() || !m.sin.is_finite()) {
            return Err(Error::invalid("non-finite mode coefficient"));
        }
        Ok(TrigPoly { dim, modes })
    }

    pub fn zero(dim: usize) -> Self {
        TrigPoly { dim, modes: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        TrigPoly {
            dim,
            modes: vec![Mode::new(vec![0; dim], c, 0.0)],
        }
    }

    /// `cos * cos(2 pi k.x) + sin * sin(2 pi k.x)`.
    pub fn single(k: Vec<i64>, cos: f64, sin: f64) -> Self {
        let dim = k.len();
        TrigPoly {
            dim,
            modes: vec![Mode::new(k, cos, sin)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.cos == 0.0 && (m.sin == 0.0 || m.is_constant()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let (s, c) = m.phase(x).sin_cos();
                m.cos * c + m.sin * s
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for m in &self.modes {
            let (s, c) = m.phase(x).sin_cos();
            let w = TAU * (m.sin * c - m.cos * s);
            for (gi, &k) in g.iter_mut().zip(&m.k) {
                *gi += w * k as f64;
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for m in &self.modes {
            let (s, c) = m.phase(x).sin_cos();
            let w = -TAU * TAU * (m.cos * c + m.sin * s);
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += w * (m.k[i] * m.k[j]) as f64;
                }
            }
        }
        h
    }

    /// Partial derivative `d^alpha`.
    pub fn partial(&self, alpha: &[usize]) -> TrigPoly {
        let order: usize = alpha.iter().sum();
        let modes = self
            .modes
            .iter()
            .filter_map(|m| {
                let mut scale = 1.0;
                for (&k, &a) in m.k.iter().zip(alpha) {
                    scale *= (TAU * k as f64).powi(a as i32);
                }
                if scale == 0.0 {
                    return None;
                }
                // d/dt of (c cos + s sin) = (s cos - c sin) in units of the frequency
                let (mut c, mut s) = (m.cos, m.sin);
                for _ in 0..order % 4 {
                    (c, s) = (s, -c);
                }
                Some(Mode::new(m.k.clone(), scale * c, scale * s))
            })
            .collect();
        TrigPoly { dim: self.dim, modes }
    }

    /// Mean over the torus.
    pub fn mean(&self) -> f64 {
        self.modes.iter().filter(|m| m.is_constant()).map(|m| m.cos).sum()
    }

    pub fn has_zero_mode(&self) -> bool {
        self.modes.iter().any(|m| m.is_constant() && m.cos != 0.0)
    }

    /// True when some nonzero mode has a nonzero frequency along `axis`.
    pub fn depends_on(&self, axis: usize) -> bool {
        self.modes
            .iter()
            .any(|m| m.k[axis] != 0 && (m.cos != 0.0 || m.sin != 0.0))
    }

    pub fn k_max(&self) -> i64 {
        self.modes.iter().map(Mode::k_max).max().unwrap_or(0)
    }

    /// `sum |cos| + |sin|`, an upper bound for the sup norm.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(Mode::amplitude).sum()
    }

    /// Upper bound for `sup |grad|` (Euclidean).
    pub fn lipschitz_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude() * TAU * m.k_norm()).sum()
    }

    /// Upper bound for the operator norm of the Hessian.
    pub fn hessian_bound(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude() * (TAU * m.k_norm()).powi(2))
            .sum()
    }

    pub fn scaled(&self, a: f64) -> TrigPoly {
        TrigPoly {
            dim: self.dim,
            modes: self
                .modes
                .iter()
                .map(|m| Mode::new(m.k.clone(), a * m.cos, a * m.sin))
                .collect(),
        }
    }

    /// Multiplies the coefficient of frequency `k` by `w(k)` (an even real multiplier).
    pub fn multiplier(&self, w: impl Fn(&[i64]) -> f64) -> TrigPoly {
        TrigPoly {
            dim: self.dim,
            modes: self
                .modes
                .iter()
                .map(|m| {
                    let a = w(&m.k);
                    Mode::new(m.k.clone(), a * m.cos, a * m.sin)
                })
                .collect(),
        }
    }

    /// `x -> self(A x)` for an integer matrix `A`; frequency `k` becomes `A^T k`.
    pub fn compose_linear(&self, a: &[Vec<i64>]) -> TrigPoly {
        let d = self.dim;
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let k = (0..d)
                    .map(|j| (0..d).map(|i| a[i][j] * m.k[i]).sum())
                    .collect();
                Mode::new(k, m.cos, m.sin)
            })
            .collect();
        TrigPoly { dim: d, modes }
    }

    /// Exact `int self * other` over the torus.
    pub fn l2_pairing(&self, other: &TrigPoly) -> f64 {
        let mut total = 0.0;
        for a in &self.modes {
            for b in &other.modes {
                let same = a.k == b.k;
                let opposite = a.k.iter().zip(&b.k).all(|(x, y)| *x == -*y);
                if a.is_constant() && b.is_constant() {
                    total += a.cos * b.cos;
                } else if same && opposite {
                    unreachable!("only the zero frequency is its own negative");
                } else if same {
                    total += 0.5 * (a.cos * b.cos + a.sin * b.sin);
                } else if opposite {
                    total += 0.5 * (a.cos * b.cos - a.sin * b.sin);
                }
            }
        }
        total
    }

    /// Merges repeated frequencies (`k` and `-k` are kept apart).
    pub fn simplify(&self) -> TrigPoly {
        let mut out: Vec<Mode> = Vec::new();
        for m in &self.modes {
            match out.iter_mut().find(|o| o.k == m.k) {
                Some(o) => {
                    o.cos += m.cos;
                    o.sin += m.sin;
                }
                None => out.push(m.clone()),
            }
        }
        out.retain(|m| m.cos != 0.0 || (m.sin != 0.0 && !m.is_constant()));
        TrigPoly { dim: self.dim, modes: out }
    }
}
