//! Zero-mean test functions and their mollifications `eta_eps = eta * phi_eps`.
//!
//! The kernel is the product bump `phi(x) = C prod_i b(sqrt(d) x_i)` with
//! `b(t) = exp(-1 / (1 - t^2))`, supported in the unit ball. Mollification acts on a
//! trigonometric polynomial as the Fourier multiplier `prod_i beta(eps k_i / sqrt(d))`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::trig::{Mode, TrigPoly};

/// `b(t)` and its first three derivatives; zero outside `(-1, 1)`.
pub fn bump_derivative(t: f64, order: usize) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - t * t;
    let b = (-1.0 / s).exp();
    let u1 = -2.0 * t / (s * s);
    let u2 = -2.0 / (s * s) - 8.0 * t * t / (s * s * s);
    let u3 = -24.0 * t / (s * s * s) - 48.0 * t.powi(3) / s.powi(4);
    match order {
        0 => b,
        1 => b * u1,
        2 => b * (u1 * u1 + u2),
        3 => b * (u1.powi(3) + 3.0 * u1 * u2 + u3),
        _ => panic!("bump derivatives are tabulated up to order 3"),
    }
}

const QUAD: usize = 4096;

/// Trapezoid rule on `[-1, 1]`; the integrand vanishes to all orders at the ends.
fn integrate(g: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 / QUAD as f64;
    (1..QUAD).map(|i| g(-1.0 + i as f64 * h)).sum::<f64>() * h
}

#[derive(Debug, Clone)]
pub struct Mollifier {
    dim: usize,
    mass: f64,
    /// `sup |b^{(j)}|` for `j = 0..=3`.
    bump_sups: [f64; 4],
}

impl Mollifier {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("mollifier on a 0-torus"));
        }
        let mass = integrate(|t| bump_derivative(t, 0));
        let mut sups = [0.0; 4];
        for (j, s) in sups.iter_mut().enumerate() {
            *s = (0..=20_000)
                .map(|i| bump_derivative(-1.0 + i as f64 * 1e-4, j).abs())
                .fold(0.0, f64::max);
        }
        Ok(Mollifier {
            dim,
            mass,
            bump_sups: sups,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized 1-d Fourier transform `int b(t) cos(2 pi w t) dt / int b`.
    pub fn bump_transform(&self, w: f64) -> f64 {
        integrate(|t| bump_derivative(t, 0) * (TAU * w * t).cos()) / self.mass
    }

    /// Fourier coefficient of `phi_eps` at frequency `k`.
    pub fn kernel_coefficient(&self, eps: f64, k: &[i64]) -> f64 {
        let r = (self.dim as f64).sqrt();
        k.iter().map(|&ki| self.bump_transform(eps * ki as f64 / r)).product()
    }

    /// `phi(x)`.
    pub fn kernel(&self, x: &[f64]) -> f64 {
        let r = (self.dim as f64).sqrt();
        x.iter().map(|&xi| r / self.mass * bump_derivative(r * xi, 0)).product()
    }

    /// `|phi|_{C^l} = max_{|alpha| <= l} sup |d^alpha phi|`, exact for the product form.
    pub fn c_l(&self, l: usize) -> f64 {
        assert!(l <= 3, "kernel norms are tabulated up to order 3");
        let d = self.dim;
        let r = (d as f64).sqrt();
        let scale = (r / self.mass).powi(d as i32);
        let mut best: f64 = 0.0;
        for_each_multi_index(d, l, |alpha| {
            let v: f64 = alpha.iter().map(|&a| r.powi(a as i32) * self.bump_sups[a]).product();
            best = best.max(v);
        });
        scale * best
    }

    pub fn mollify(&self, eta: &TrigPoly, eps: f64) -> Result<TrigPoly> {
        if eta.dim() != self.dim {
            return Err(Error::invalid("test function and kernel dimensions differ"));
        }
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::invalid("mollification scale must lie in (0, 1/2]"));
        }
        Ok(eta.multiplier(|k| self.kernel_coefficient(eps, k)))
    }
}

/// Calls `f` on every multi-index with `|alpha| <= l`.
pub fn for_each_multi_index(d: usize, l: usize, mut f: impl FnMut(&[usize])) {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == d {
            f(cur);
            return;
        }
        for a in 0..=left {
            cur.push(a);
            rec(d, left - a, cur, f);
            cur.pop();
        }
    }
    rec(d, l, &mut Vec::with_capacity(d), &mut f);
}

/// Max of `|p|` over a uniform grid; a lower estimate of the sup norm.
pub fn sampled_sup(p: &TrigPoly, n: usize) -> f64 {
    let g = Grid::new(p.dim(), n).expect("sample grid");
    (0..g.len()).map(|i| p.eval(&g.point(i)).abs()).fold(0.0, f64::max)
}

/// Grid density used for sup estimates: eight points per shortest period.
pub fn sample_density(p: &TrigPoly) -> usize {
    let n = 8 * p.k_max().max(1) as usize;
    let cap = match p.dim() {
        1 => 4096,
        2 => 256,
        3 => 48,
        _ => 16,
    };
    n.clamp(8, cap.max(8))
}

/// `C^l` norm estimate: max over `|alpha| <= l` of the sampled sup of `d^alpha p`.
pub fn sampled_cl_norm(p: &TrigPoly, l: usize, n: usize) -> f64 {
    let mut best: f64 = 0.0;
    for_each_multi_index(p.dim(), l, |alpha| best = best.max(sampled_sup(&p.partial(alpha), n)));
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    eta: TrigPoly,
    theta: f64,
    sup_norm: f64,
    lipschitz: f64,
    holder_norm: f64,
}

impl TestFunction {
    /// `|eta|_theta = |eta|_0 + [eta]_theta` with `[eta]_theta <= Lip^theta (2 |eta|_0)^{1 - theta}`.
    pub fn new(eta: TrigPoly, theta: f64) -> Result<Self> {
        if eta.has_zero_mode() {
            return Err(Error::invalid("test functions must have zero mean"));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid("Hölder exponent must lie in (0, 1]"));
        }
        let n = sample_density(&eta);
        let g = Grid::new(eta.dim(), n)?;
        let mut sup: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for i in 0..g.len() {
            let x = g.point(i);
            sup = sup.max(eta.eval(&x).abs());
            lip = lip.max(eta.gradient(&x).iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        let holder_norm = sup + lip.powf(theta) * (2.0 * sup).powf(1.0 - theta);
        Ok(TestFunction {
            eta,
            theta,
            sup_norm: sup,
            lipschitz: lip,
            holder_norm,
        })
    }

    pub fn eta(&self) -> &TrigPoly {
        &self.eta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn holder_norm(&self) -> f64 {
        self.holder_norm
    }

    /// Random zero-mean polynomial with `modes` frequencies in `[-k_max, k_max]^d`.
    pub fn random(d: usize, modes: usize, k_max: i64, theta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(modes);
        while out.len() < modes {
            let k: Vec<i64> = (0..d).map(|_| rng.gen_range(-k_max..=k_max)).collect();
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            out.push(Mode::new(k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        TestFunction::new(TrigPoly::new(d, out)?, theta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierCheck {
    pub eps: f64,
    /// Sampled `|eta_eps - eta|_0`.
    pub approx_error: f64,
    /// `eps^theta |eta|_theta`.
    pub approx_bound: f64,
    /// Sampled `|eta_eps|_{C^l}` for `l = 0..=3`.
    pub cl_norms: Vec<f64>,
    /// `c_l eps^{-d-l} |eta|_0`.
    pub cl_bounds: Vec<f64>,
    pub holds: bool,
}

/// Evaluates both mollifier estimates for `eta` at scale `eps`.
pub fn check_mollifier(m: &Mollifier, eta: &TestFunction, eps: f64, l_max: usize) -> Result<MollifierCheck> {
    let d = m.dim() as i32;
    let smooth = m.mollify(eta.eta(), eps)?;
    let n = sample_density(eta.eta());
    let diff = TrigPoly::new(
        smooth.dim(),
        smooth
            .modes()
            .iter()
            .zip(eta.eta().modes())
            .map(|(a, b)| Mode::new(a.k.clone(), a.cos - b.cos, a.sin - b.sin))
            .collect(),
    )?;
    let approx_error = sampled_sup(&diff, n);
    let approx_bound = eps.powf(eta.theta()) * eta.holder_norm();
    let mut cl_norms = Vec::new();
    let mut cl_bounds = Vec::new();
    let mut holds = approx_error <= approx_bound;
    for l in 0..=l_max {
        let norm = sampled_cl_norm(&smooth, l, n);
        let bound = m.c_l(l) * eps.powi(-d - l as i32) * eta.sup_norm();
        holds &= norm <= bound;
        cl_norms.push(norm);
        cl_bounds.push(bound);
    }
    Ok(MollifierCheck {
        eps,
        approx_error,
        approx_bound,
        cl_norms,
        cl_bounds,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_differences() {
        let h = 1e-5;
        for &t in &[-0.7, -0.2, 0.0, 0.35, 0.8] {
            for j in 1..=3 {
                let fd = (bump_derivative(t + h, j - 1) - bump_derivative(t - h, j - 1)) / (2.0 * h);
                let exact = bump_derivative(t, j);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "order {j} at {t}");
            }
        }
    }

    #[test]
    fn kernel_is_a_probability_density() {
        let m = Mollifier::new(2).unwrap();
        assert!((m.kernel_coefficient(0.3, &[0, 0]) - 1.0).abs() < 1e-14);
        // Riemann sum of phi over [-1, 1)^2, which contains its support.
        let n = 800;
        let h = 2.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += m.kernel(&[-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h]);
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_transform_matches_quadrature() {
        let m = Mollifier::new(1).unwrap();
        let n = 20_000;
        let k = 3.0;
        let h = 2.0 / n as f64;
        let direct: f64 = (0..n)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * h;
                m.kernel(&[x]) * (TAU * k * x).cos()
            })
            .sum::<f64>()
            * h;
        assert!((direct - m.kernel_coefficient(1.0, &[3])).abs() < 1e-8);
    }

    #[test]
    fn rejects_mean() {
        assert!(TestFunction::new(TrigPoly::constant(2, 1.0), 0.5).is_err());
    }

    #[test]
    fn estimates_hold_for_a_simple_mode() {
        let m = Mollifier::new(2).unwrap();
        let eta = TestFunction::new(TrigPoly::single(vec![1, 2], 1.0, 0.0), 0.5).unwrap();
        for i in 1..=8 {
            let c = check_mollifier(&m, &eta, 0.5f64.powi(i), 3).unwrap();
            assert!(c.holds, "{c:?}");
        }
    }
}
