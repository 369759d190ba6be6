//! Perturbations `f = S_m o ... o S_1 o L` of a toral automorphism by coordinate shears
//! `S_i: y_t -> y_t + eps * phi_i(y)`.
//!
//! A shear whose generator does not depend on its target coordinate is a
//! volume-preserving diffeomorphism with a closed-form inverse. The displacement
//! `S(y) - y` is `Z^d`-periodic, so the lift satisfies `f(x + m) = f(x) + L m`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_symplectic, LatticeAutomorphism};
use crate::trig::{Mode, TrigPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    VolumePreserving,
    Symplectic,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearSpec {
    pub target: usize,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub epsilon: f64,
    #[serde(default)]
    pub shears: Vec<ShearSpec>,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::VolumePreserving,
            epsilon: 0.0,
            shears: Vec::new(),
        }
    }

    /// Constant displacement `F = (L - I) v`; `f` is conjugate to `L` by `x -> x + v`.
    pub fn translation(l: &LatticeAutomorphism, v: &[f64]) -> Self {
        let lf = l.matrix().to_f64();
        let d = l.dim();
        let shears = (0..d)
            .map(|t| {
                let c: f64 = (0..d).map(|j| lf[(t, j)] * v[j]).sum::<f64>() - v[t];
                ShearSpec {
                    target: t,
                    modes: vec![Mode::new(vec![0; d], c, 0.0)],
                }
            })
            .collect();
        PerturbationSpec {
            kind: PerturbationKind::VolumePreserving,
            epsilon: 1.0,
            shears,
        }
    }

    /// Double shear `(q, p) -> (q, p + eps h(q_1) e_1)`, then `(q + eps g(p_2) e_2, p)`, with
    /// `h = cos 2 pi q_1` and `g = sin 2 pi p_2` (d = 4). Each is the time-one map of a
    /// Hamiltonian depending on one coordinate, hence symplectic.
    pub fn symplectic_double_shear(epsilon: f64) -> Self {
        PerturbationSpec {
            kind: PerturbationKind::Symplectic,
            epsilon,
            shears: vec![
                ShearSpec {
                    target: 2,
                    modes: vec![Mode::new(vec![1, 0, 0, 0], 1.0, 0.0)],
                },
                ShearSpec {
                    target: 1,
                    modes: vec![Mode::new(vec![0, 0, 0, 1], 0.0, 1.0)],
                },
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shear {
    target: usize,
    phi: TrigPoly,
    self_dependent: bool,
    /// `lipschitz_bound(phi)`.
    c1: f64,
    /// `hessian_bound(phi)`.
    c2: f64,
}

impl Shear {
    pub fn new(target: usize, phi: TrigPoly) -> Self {
        Shear {
            target,
            self_dependent: phi.depends_on(target),
            c1: phi.lipschitz_bound(),
            c2: phi.hessian_bound(),
            phi,
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn phi(&self) -> &TrigPoly {
        &self.phi
    }

    /// The generator reads the target coordinate (no closed-form inverse).
    pub fn is_self_dependent(&self) -> bool {
        self.self_dependent
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedDiffeo {
    l: LatticeAutomorphism,
    lf: DMatrix<f64>,
    l_inv: DMatrix<f64>,
    shears: Vec<Shear>,
    epsilon: f64,
    kind: PerturbationKind,
    small: bool,
}

const NEWTON_MAX: usize = 60;

impl PerturbedDiffeo {
    pub fn new(l: LatticeAutomorphism, spec: &PerturbationSpec) -> Result<Self> {
        let d = l.dim();
        if !(spec.epsilon.is_finite() && spec.epsilon >= 0.0) {
            return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {}", spec.epsilon)));
        }
        let mut shears = Vec::with_capacity(spec.shears.len());
        for s in &spec.shears {
            if s.target >= d {
                return Err(Error::invalid(format!("shear target {} out of range for d = {d}", s.target)));
            }
            shears.push(Shear::new(s.target, TrigPoly::new(d, s.modes.clone())?));
        }
        match spec.kind {
            PerturbationKind::VolumePreserving => {
                if let Some(s) = shears.iter().find(|s| s.self_dependent) {
                    return Err(Error::invalid(format!(
                        "volume-preserving shear on coordinate {} depends on that coordinate",
                        s.target
                    )));
                }
            }
            PerturbationKind::Symplectic => {
                if d % 2 != 0 {
                    return Err(Error::invalid("symplectic perturbation needs even dimension"));
                }
                let check = is_symplectic(&l);
                if !check.symplectic {
                    return Err(Error::invalid(format!("L is not symplectic: {}", check.reason)));
                }
                let n = d / 2;
                for s in &shears {
                    let conj = (s.target + n) % d;
                    if let Some(axis) = (0..d).find(|&a| a != conj && s.phi.depends_on(a)) {
                        return Err(Error::invalid(format!(
                            "symplectic shear on coordinate {} may only depend on coordinate {conj}, found {axis}",
                            s.target
                        )));
                    }
                }
            }
            PerturbationKind::Generic => {
                for s in shears.iter().filter(|s| s.self_dependent) {
                    let own = s.phi.partial(&unit(d, s.target)).sup_bound();
                    if spec.epsilon * own >= 1.0 {
                        return Err(Error::invalid(format!(
                            "shear on coordinate {} is not monotone in its target (eps * |d phi| = {})",
                            s.target,
                            spec.epsilon * own
                        )));
                    }
                }
            }
        }
        let small = shears.iter().all(|s| spec.epsilon * s.c1 < 1.0);
        Ok(PerturbedDiffeo {
            lf: l.matrix().to_f64(),
            l_inv: l.inverse_matrix().to_f64(),
            l,
            shears,
            epsilon: spec.epsilon,
            kind: spec.kind,
            small,
        })
    }

    /// `f = L`.
    pub fn linear(l: LatticeAutomorphism) -> Self {
        Self::new(l, &PerturbationSpec::none()).expect("zero perturbation is valid")
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn automorphism(&self) -> &LatticeAutomorphism {
        &self.l
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.lf
    }

    pub fn l_inv(&self) -> &DMatrix<f64> {
        &self.l_inv
    }

    pub fn shears(&self) -> &[Shear] {
        &self.shears
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    /// `eps * C^1(phi) < 1` for every shear.
    pub fn is_small_perturbation(&self) -> bool {
        self.small
    }

    pub fn is_linear(&self) -> bool {
        self.epsilon == 0.0 || self.shears.iter().all(|s| s.phi.is_zero())
    }

    /// All shears have closed-form inverses.
    pub fn has_closed_form_inverse(&self) -> bool {
        self.shears.iter().all(|s| !s.self_dependent)
    }

    fn mul_l(&self, m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d).map(|i| (0..d).map(|j| m[(i, j)] * x[j]).sum()).collect()
    }

    fn apply_shears(&self, y: &mut [f64]) {
        for s in &self.shears {
            y[s.target] += self.epsilon * s.phi.eval(y);
        }
    }

    fn apply_inverse_shears(&self, z: &mut [f64]) -> Result<()> {
        for s in self.shears.iter().rev() {
            if !s.self_dependent {
                z[s.target] -= self.epsilon * s.phi.eval(z);
                continue;
            }
            let target = z[s.target];
            let mut w = z.to_vec();
            let mut converged = false;
            for _ in 0..NEWTON_MAX {
                let g = w[s.target] + self.epsilon * s.phi.eval(&w) - target;
                let dg = 1.0 + self.epsilon * s.phi.gradient(&w)[s.target];
                let step = g / dg;
                w[s.target] -= step;
                if step.abs() <= 1e-15 * (1.0 + target.abs()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    iterations: NEWTON_MAX,
                    detail: format!("inverting the shear on coordinate {}", s.target),
                });
            }
            z[s.target] = w[s.target];
        }
        Ok(())
    }

    /// Lift `f(x) = S(L x)` on `R^d`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.mul_l(&self.lf, x);
        self.apply_shears(&mut y);
        y
    }

    /// `f(x) mod 1`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.lift(x);
        reduce(&mut y);
        y
    }

    /// `f(x) - L x`, the periodic part of the lift.
    pub fn displacement(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.mul_l(&self.lf, x);
        reduce(&mut y);
        let base = y.clone();
        self.apply_shears(&mut y);
        y.iter().zip(&base).map(|(a, b)| a - b).collect()
    }

    /// `f(x + delta) - f(x)` without forming large lifted coordinates.
    pub fn step_delta(&self, x: &[f64], delta: &[f64]) -> Vec<f64> {
        let xd: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
        let ld = self.mul_l(&self.lf, delta);
        let d1 = self.displacement(&xd);
        let d0 = self.displacement(x);
        (0..x.len()).map(|i| ld[i] + (d1[i] - d0[i])).collect()
    }

    /// `Df(x) = DS(L x) L` by the chain rule.
    pub fn derivative(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut y = self.mul_l(&self.lf, x);
        let mut j = self.lf.clone();
        for s in &self.shears {
            let g = s.phi.gradient(&y);
            // (I + eps e_t g^T) J
            let row: Vec<f64> = (0..d)
                .map(|c| (0..d).map(|k| g[k] * j[(k, c)]).sum::<f64>())
                .collect();
            for (c, r) in row.iter().enumerate() {
                j[(s.target, c)] += self.epsilon * r;
            }
            y[s.target] += self.epsilon * s.phi.eval(&y);
        }
        j
    }

    /// `Df(x)^{-1}`.
    pub fn derivative_inverse(&self, x: &[f64]) -> DMatrix<f64> {
        if !self.has_closed_form_inverse() {
            return self
                .derivative(x)
                .try_inverse()
                .expect("shears are monotone in their target, so Df is invertible");
        }
        let d = self.dim();
        let mut y = self.mul_l(&self.lf, x);
        let mut grads = Vec::with_capacity(self.shears.len());
        for s in &self.shears {
            grads.push(s.phi.gradient(&y));
            y[s.target] += self.epsilon * s.phi.eval(&y);
        }
        // (J_m ... J_1 L)^{-1} = L^{-1} J_1^{-1} ... J_m^{-1},  J^{-1} = I - eps e_t g^T
        let mut m = self.l_inv.clone();
        for (s, g) in self.shears.iter().zip(&grads) {
            let col: Vec<f64> = (0..d).map(|r| m[(r, s.target)]).collect();
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] -= self.epsilon * col[r] * g[c];
                }
            }
        }
        m
    }

    /// Lift of the inverse, `L^{-1} S^{-1}(z)`.
    pub fn inverse_lift(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut w = z.to_vec();
        self.apply_inverse_shears(&mut w)?;
        Ok(self.mul_l(&self.l_inv, &w))
    }

    /// `f^{-1}(y) mod 1`. The residual `|f(x) - y|` on the torus is checked against `tol`.
    pub fn inverse(&self, y: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x = self.inverse_lift(y)?;
        reduce(&mut x);
        let back = self.eval(&x);
        let err = torus_distance(&back, y);
        if err > tol {
            return Err(Error::NoConvergence {
                iterations: NEWTON_MAX,
                detail: format!("inverse round trip misses by {err:e} > {tol:e}"),
            });
        }
        Ok(x)
    }

    /// `S^{-1}(z) - z`, periodic.
    pub fn inverse_displacement(&self, z: &[f64]) -> Vec<f64> {
        let mut base = z.to_vec();
        reduce(&mut base);
        let mut w = base.clone();
        self.apply_inverse_shears(&mut w)
            .expect("inverse shear solve converges for certified maps");
        w.iter().zip(&base).map(|(a, b)| a - b).collect()
    }

    /// `f^{-1}(y + delta) - f^{-1}(y)`.
    pub fn inverse_step_delta(&self, y: &[f64], delta: &[f64]) -> Vec<f64> {
        let yd: Vec<f64> = y.iter().zip(delta).map(|(a, b)| a + b).collect();
        let d1 = self.inverse_displacement(&yd);
        let d0 = self.inverse_displacement(y);
        let w: Vec<f64> = (0..y.len()).map(|i| delta[i] + (d1[i] - d0[i])).collect();
        self.mul_l(&self.l_inv, &w)
    }

    /// Upper bound for `sup |Df - L|` (operator 2-norm).
    pub fn c1_distance_bound(&self) -> f64 {
        let prod: f64 = self.shears.iter().map(|s| 1.0 + self.epsilon * s.c1).product();
        (prod - 1.0) * self.lf.clone().singular_values().max()
    }

    /// Heuristic bound for the second derivative of `f`.
    pub fn second_derivative_bound(&self) -> f64 {
        let l2 = self.lf.clone().singular_values().max().powi(2);
        let growth: f64 = self
            .shears
            .iter()
            .map(|s| (1.0 + self.epsilon * s.c1).powi(2))
            .product();
        l2 * growth * self.shears.iter().map(|s| self.epsilon * s.c2).sum::<f64>()
    }

    /// `G(x) = L^{-1} (f(x) - L x)`.
    pub fn g(&self, x: &[f64]) -> Vec<f64> {
        let disp = self.displacement(x);
        self.mul_l(&self.l_inv, &disp)
    }
}

fn unit(d: usize, i: usize) -> Vec<usize> {
    let mut v = vec![0; d];
    v[i] = 1;
    v
}

/// Reduces each coordinate into `[0, 1)`.
pub fn reduce(x: &mut [f64]) {
    for c in x.iter_mut() {
        *c -= c.floor();
        if *c >= 1.0 {
            *c = 0.0;
        }
    }
}

/// Distance on `R^d / Z^d` (Euclidean on the nearest lift).
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            let t = t - t.round();
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Nearest-lift difference `a - b`, each coordinate in `[-1/2, 1/2]`.
pub fn torus_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t - t.round()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use std::f64::consts::TAU;

    fn single_shear(eps: f64) -> PerturbedDiffeo {
        let spec = PerturbationSpec {
            kind: PerturbationKind::VolumePreserving,
            epsilon: eps,
            shears: vec![ShearSpec {
                target: 0,
                modes: vec![Mode::new(vec![0, 1, 0, 0], 0.0, 1.0)],
            }],
        };
        PerturbedDiffeo::new(examples::quartic_companion(), &spec).unwrap()
    }

    #[test]
    fn zero_perturbation_is_linear() {
        let f = PerturbedDiffeo::linear(examples::quartic_companion());
        let x = [0.1, 0.7, 0.3, 0.95];
        let y = f.eval(&x);
        let lx = [-0.95, 0.1 + 0.95, 0.7 + 0.95, 0.3 + 0.95];
        let mut lx = lx.to_vec();
        reduce(&mut lx);
        assert!(torus_distance(&y, &lx) < 1e-15);
        assert_eq!(f.derivative(&x), *f.l());
    }

    #[test]
    fn single_shear_at_origin() {
        let eps = 0.01;
        let f = single_shear(eps);
        assert_eq!(f.eval(&[0.0; 4]), vec![0.0; 4]);
        // shear is applied after L, so Df(0) = S L
        let mut s = DMatrix::<f64>::identity(4, 4);
        s[(0, 1)] = TAU * eps;
        let expected = &s * f.l();
        assert!((f.derivative(&[0.0; 4]) - expected).norm() < 1e-15);
    }

    #[test]
    fn periodic_and_homotopic_to_l() {
        let f = single_shear(0.2);
        let x = [0.3, 0.1, 0.8, 0.45];
        let m = [1.0, -2.0, 0.0, 3.0];
        let xm: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a + b).collect();
        let lm = f.l() * nalgebra::DVector::from_column_slice(&m);
        let shifted = f.lift(&xm);
        let base = f.lift(&x);
        for i in 0..4 {
            assert!((shifted[i] - base[i] - lm[i]).abs() < 1e-12);
        }
        assert!(torus_distance(&f.eval(&x), &f.eval(&xm)) < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let f = PerturbedDiffeo::new(
            examples::quartic_symplectic(),
            &PerturbationSpec::symplectic_double_shear(0.05),
        )
        .unwrap();
        for i in 0..20 {
            let y: Vec<f64> = (0..4).map(|j| ((i * 7 + j * 3) as f64 * 0.137).fract()).collect();
            let x = f.inverse(&y, 1e-12).unwrap();
            assert!(torus_distance(&f.eval(&x), &y) < 1e-12);
        }
    }

    #[test]
    fn derivative_inverse_inverts() {
        let f = PerturbedDiffeo::new(
            examples::quartic_symplectic(),
            &PerturbationSpec::symplectic_double_shear(0.05),
        )
        .unwrap();
        let x = [0.2, 0.9, 0.4, 0.33];
        let p = f.derivative(&x) * f.derivative_inverse(&x);
        assert!((p - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_differences() {
        let f = PerturbedDiffeo::new(
            examples::quartic_symplectic(),
            &PerturbationSpec::symplectic_double_shear(0.05),
        )
        .unwrap();
        let x = [0.21, 0.43, 0.65, 0.87];
        let df = f.derivative(&x);
        let h = 1e-6;
        for j in 0..4 {
            let mut dx = [0.0; 4];
            dx[j] = h;
            let fwd = f.step_delta(&x, &dx);
            dx[j] = -h;
            let bwd = f.step_delta(&x, &dx);
            for i in 0..4 {
                let fd = (fwd[i] - bwd[i]) / (2.0 * h);
                assert!((fd - df[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn generic_self_dependent_shear_uses_newton() {
        let spec = PerturbationSpec {
            kind: PerturbationKind::Generic,
            epsilon: 0.05,
            shears: vec![ShearSpec {
                target: 0,
                modes: vec![Mode::new(vec![1, 0], 0.0, 1.0)],
            }],
        };
        let f = PerturbedDiffeo::new(examples::cat_map(), &spec).unwrap();
        assert!(!f.has_closed_form_inverse());
        let y = [0.3, 0.6];
        let x = f.inverse(&y, 1e-12).unwrap();
        assert!(torus_distance(&f.eval(&x), &y) < 1e-12);
        // volume-preserving kind rejects the same generator
        let bad = PerturbationSpec { kind: PerturbationKind::VolumePreserving, ..spec };
        assert!(PerturbedDiffeo::new(examples::cat_map(), &bad).is_err());
    }

    #[test]
    fn symplectic_kind_validates() {
        let spec = PerturbationSpec::symplectic_double_shear(0.01);
        assert!(PerturbedDiffeo::new(examples::quartic_companion(), &spec).is_err());
        let mut wrong = spec.clone();
        wrong.shears[0].modes[0].k = vec![0, 1, 0, 0];
        assert!(PerturbedDiffeo::new(examples::quartic_symplectic(), &wrong).is_err());
    }

    #[test]
    fn translation_has_constant_displacement() {
        let l = examples::quartic_companion();
        let v = [0.1, -0.2, 0.05, 0.3];
        let f = PerturbedDiffeo::new(l, &PerturbationSpec::translation(&examples::quartic_companion(), &v)).unwrap();
        let g = f.g(&[0.4, 0.2, 0.9, 0.1]);
        // G = (I - L^{-1}) v
        let linv_v = f.l_inv() * nalgebra::DVector::from_column_slice(&v);
        for i in 0..4 {
            assert!((g[i] - (v[i] - linv_v[i])).abs() < 1e-14);
        }
    }
}
