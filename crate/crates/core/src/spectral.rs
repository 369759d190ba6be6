//! Numerical stable/center/unstable splitting of an integer automorphism.
//!
//! The number of unit-modulus eigenvalues is taken from the exact count in
//! [`crate::sturm::unit_circle_roots`]; the numerical eigenvalues only decide the
//! remaining roots, which are bounded away from the circle.
//!
//! When `L` is diagonalisable the bases are real Jordan bases: a complex eigenvector
//! `v` of `e^{i t}` contributes `(Re v, Im v)`, on which `L` acts as a rotation. In the
//! adapted coordinates `L` is then block diagonal with a stable block of norm
//! `rho_s_max`, an isometric center block and an unstable block with conorm `rho_u_min`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_diagonalizable, LatticeAutomorphism};
use crate::poly::IntPoly;
use crate::sturm::unit_circle_roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralClass {
    Stable,
    Center,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub class: SpectralClass,
}

impl Eigenvalue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Moduli closer than this are treated as one cluster.
    pub cluster_radius: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            cluster_radius: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSplitting {
    pub dim: usize,
    pub eigenvalues: Vec<Eigenvalue>,
    pub dim_stable: usize,
    pub dim_center: usize,
    pub dim_unstable: usize,
    /// Columns spanning `E^s`, `E^c`, `E^u`.
    pub basis_s: Vec<Vec<f64>>,
    pub basis_c: Vec<Vec<f64>>,
    pub basis_u: Vec<Vec<f64>>,
    pub rho_u_min: Option<f64>,
    pub rho_u_max: Option<f64>,
    pub rho_s_min: Option<f64>,
    pub rho_s_max: Option<f64>,
    pub r_u: f64,
    pub r_s: f64,
    pub r_l: f64,
    /// Sub-resonance degree bound for `L_s`.
    pub d_stable: f64,
    /// Sub-resonance degree bound for `L_u^{-1}`.
    pub d_unstable: f64,
    pub h_top: f64,
    pub diagonalizable: bool,
    /// Largest off-diagonal block of `L` in adapted coordinates (Frobenius).
    pub invariance_residual: f64,
    #[serde(skip)]
    l: DMatrix<f64>,
    #[serde(skip)]
    l_inv: DMatrix<f64>,
    #[serde(skip)]
    adapted: DMatrix<f64>,
    #[serde(skip)]
    adapted_inv: DMatrix<f64>,
    #[serde(skip)]
    l_adapted: DMatrix<f64>,
}

/// `d(A) = chi_1 / chi_l` for a linear contraction with the given eigenvalue moduli.
pub fn degree_bound(contraction_moduli: &[f64]) -> f64 {
    if contraction_moduli.is_empty() {
        return 1.0;
    }
    let chis: Vec<f64> = contraction_moduli.iter().map(|m| m.ln()).collect();
    let chi_1 = chis.iter().cloned().fold(f64::INFINITY, f64::min);
    let chi_l = chis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    chi_1 / chi_l
}

/// Roots of an integer polynomial: eigenvalues of the companion matrix, refined by
/// Newton steps on the squarefree part.
pub fn polynomial_roots(p: &IntPoly) -> Vec<Complex64> {
    let d = p.deg();
    if d == 0 {
        return Vec::new();
    }
    let c = p.to_f64_coeffs();
    let lc = c[d];
    let comp = DMatrix::from_fn(d, d, |i, j| {
        if j == d - 1 {
            -c[i] / lc
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let raw = companion_eigenvalues(&comp).unwrap_or_else(|| aberth(&c));
    let sq = p.squarefree_part();
    let dsq = sq.derivative();
    raw.iter().map(|&z| polish(&sq, &dsq, z)).collect()
}

/// Schur eigenvalues with a capped iteration count. Unshifted QR stalls on companions of
/// even polynomials, so a failed attempt is retried on `A + sI`.
fn companion_eigenvalues(comp: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    let d = comp.nrows();
    [0.0, 0.3719, -0.5113].iter().find_map(|&s| {
        let shifted = comp + DMatrix::identity(d, d) * s;
        nalgebra::linalg::Schur::try_new(shifted, f64::EPSILON, 500)
            .map(|schur| schur.complex_eigenvalues().iter().map(|z| z - s).collect())
    })
}

/// Aberth-Ehrlich simultaneous iteration on ascending coefficients.
fn aberth(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let eval = |z: Complex64| {
        let mut v = Complex64::new(c[d], 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for &a in c[..d].iter().rev() {
            dv = dv * z + v;
            v = v * z + a;
        }
        (v, dv)
    };
    let radius = 1.0 + c[..d].iter().map(|a| (a / c[d]).abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, 0.4 + std::f64::consts::TAU * k as f64 / d as f64))
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..d {
            let (v, dv) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..d).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm());
            }
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    z
}

fn polish(p: &IntPoly, dp: &IntPoly, mut z: Complex64) -> Complex64 {
    let mut best = p.eval_complex(z).norm();
    for _ in 0..8 {
        let der = dp.eval_complex(z);
        if der.norm() == 0.0 {
            break;
        }
        let next = z - p.eval_complex(z) / der;
        let val = p.eval_complex(next).norm();
        if !(val < best) {
            break;
        }
        best = val;
        z = next;
    }
    z
}

/// Number of roots strictly inside the unit disk. The unit-circle roots are counted
/// exactly; the rest are separated from the circle so their numerical moduli decide.
pub fn count_inside_unit_disk(p: &IntPoly) -> usize {
    classify_roots(p).iter().filter(|(_, c)| *c == SpectralClass::Stable).count()
}

fn classify_roots(p: &IntPoly) -> Vec<(Complex64, SpectralClass)> {
    let roots = polynomial_roots(p);
    let on_circle = unit_circle_roots(p).total();
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (roots[a].norm() - 1.0).abs();
        let db = (roots[b].norm() - 1.0).abs();
        da.total_cmp(&db)
    });
    let mut classes = vec![SpectralClass::Center; roots.len()];
    for &i in order.iter().skip(on_circle) {
        classes[i] = if roots[i].norm() < 1.0 {
            SpectralClass::Stable
        } else {
            SpectralClass::Unstable
        };
    }
    roots.into_iter().zip(classes).collect()
}

/// Groups numerically equal eigenvalues: (representative, multiplicity, class).
fn cluster(eigs: &[(Complex64, SpectralClass)], tol: f64) -> Vec<(Complex64, usize, SpectralClass)> {
    let mut groups: Vec<(Complex64, usize, SpectralClass)> = Vec::new();
    for &(z, c) in eigs {
        match groups
            .iter_mut()
            .find(|(g, _, gc)| *gc == c && (*g - z).norm() < tol)
        {
            Some(g) => {
                let n = g.1 as f64;
                g.0 = (g.0 * n + z) / (n + 1.0);
                g.1 += 1;
            }
            None => groups.push((z, 1, c)),
        }
    }
    groups
}

fn null_space_real(a: &DMatrix<f64>, k: usize) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    idx.iter()
        .take(k)
        .map(|&i| vt.row(i).transpose().into_owned())
        .collect()
}

fn null_space_complex(a: &DMatrix<Complex64>, k: usize) -> Vec<DVector<Complex64>> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    idx.iter()
        .take(k)
        .map(|&i| vt.row(i).transpose().map(|z| z.conj()))
        .collect()
}

/// Real basis of the eigenspaces of a semisimple cluster list.
fn real_jordan_basis(l: &DMatrix<f64>, groups: &[(Complex64, usize, SpectralClass)], tol: f64) -> Vec<DVector<f64>> {
    let d = l.nrows();
    let mut out = Vec::new();
    for &(z, m, _) in groups {
        if z.im.abs() <= tol {
            let a = l - DMatrix::identity(d, d) * z.re;
            for v in null_space_real(&a, m) {
                out.push(v.normalize());
            }
        } else if z.im > 0.0 {
            let lc = l.map(|x| Complex64::new(x, 0.0));
            let a = lc - DMatrix::identity(d, d).map(|x: f64| Complex64::new(x, 0.0)) * z;
            for v in null_space_complex(&a, m) {
                // rotate the phase so that Re v is orthogonal to Im v
                let vtv: Complex64 = v.iter().map(|x| x * x).sum();
                let phase = Complex64::from_polar(1.0, -0.5 * vtv.arg());
                let w = v * phase;
                let re = w.map(|x| x.re);
                let im = w.map(|x| x.im);
                let s = (re.norm_squared() + im.norm_squared()).sqrt() / std::f64::consts::SQRT_2;
                out.push(re / s);
                out.push(im / s);
            }
        }
    }
    out
}

/// Orthonormal basis of the generalised eigenspace for `keep`, as the range of the
/// product of `(L - mu)` over the other eigenvalues.
fn generalized_basis(l: &DMatrix<f64>, others: &[Complex64], dim: usize, tol: f64) -> Vec<DVector<f64>> {
    let d = l.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut q = id.clone();
    for mu in others {
        if mu.im.abs() <= tol {
            q = (l - &id * mu.re) * q;
        } else if mu.im > 0.0 {
            q = (l * l - l * (2.0 * mu.re) + &id * mu.norm_sqr()) * q;
        }
    }
    let svd = q.svd(true, false);
    let u = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    idx.iter().take(dim).map(|&i| u.column(i).into_owned()).collect()
}

fn log_ratio(min: Option<f64>, max: Option<f64>, radius: f64) -> f64 {
    match (min, max) {
        (Some(lo), Some(hi)) if (hi - lo).abs() > radius => {
            let r = hi.ln() / lo.ln();
            if r < 1.0 {
                1.0 / r
            } else {
                r
            }
        }
        _ => 1.0,
    }
}

/// Computes the splitting, moduli, `r(L)`, degree bounds and entropy of `L`.
pub fn spectral_splitting(l: &LatticeAutomorphism) -> Result<SpectralSplitting> {
    spectral_splitting_with(l, &SpectralConfig::default())
}

pub fn spectral_splitting_with(l: &LatticeAutomorphism, cfg: &SpectralConfig) -> Result<SpectralSplitting> {
    let d = l.dim();
    let lf = l.matrix().to_f64();
    let l_inv = l.inverse_matrix().to_f64();
    let classified = classify_roots(l.char_poly());
    let diagonalizable = is_diagonalizable(l);

    let mut eigenvalues: Vec<Eigenvalue> = classified
        .iter()
        .map(|&(z, class)| Eigenvalue {
            re: z.re,
            im: z.im,
            modulus: if class == SpectralClass::Center { 1.0 } else { z.norm() },
            class,
        })
        .collect();
    eigenvalues.sort_by(|a, b| {
        a.modulus
            .total_cmp(&b.modulus)
            .then(a.im.total_cmp(&b.im))
    });

    let count = |c| classified.iter().filter(|(_, k)| *k == c).count();
    let (ds, dc, du) = (
        count(SpectralClass::Stable),
        count(SpectralClass::Center),
        count(SpectralClass::Unstable),
    );

    let group_tol = 1e-6;
    let bases: Vec<Vec<DVector<f64>>> = [SpectralClass::Stable, SpectralClass::Center, SpectralClass::Unstable]
        .iter()
        .map(|&class| {
            let mine: Vec<_> = classified.iter().filter(|(_, c)| *c == class).cloned().collect();
            if mine.is_empty() {
                return Vec::new();
            }
            if diagonalizable {
                real_jordan_basis(&lf, &cluster(&mine, group_tol), group_tol)
            } else {
                let others: Vec<Complex64> = classified
                    .iter()
                    .filter(|(_, c)| *c != class)
                    .map(|(z, _)| *z)
                    .collect();
                generalized_basis(&lf, &others, mine.len(), group_tol)
            }
        })
        .collect();
    if bases[0].len() != ds || bases[1].len() != dc || bases[2].len() != du {
        return Err(Error::Numerical(format!(
            "basis sizes ({}, {}, {}) do not match dimensions ({ds}, {dc}, {du})",
            bases[0].len(),
            bases[1].len(),
            bases[2].len()
        )));
    }
    let cols: Vec<DVector<f64>> = bases.iter().flatten().cloned().collect();
    let adapted = DMatrix::from_columns(&cols);
    let adapted_inv = adapted
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("splitting bases are not independent".into()))?;
    let l_adapted = &adapted_inv * &lf * &adapted;

    let ranges = [(0, ds), (ds, ds + dc), (ds + dc, d)];
    let mut residual: f64 = 0.0;
    for (i, &(a0, a1)) in ranges.iter().enumerate() {
        for (j, &(b0, b1)) in ranges.iter().enumerate() {
            if i != j && a1 > a0 && b1 > b0 {
                residual = residual.max(l_adapted.view((a0, b0), (a1 - a0, b1 - b0)).norm());
            }
        }
    }

    let moduli = |c: SpectralClass| -> Vec<f64> {
        eigenvalues.iter().filter(|e| e.class == c).map(|e| e.modulus).collect()
    };
    let mu = moduli(SpectralClass::Unstable);
    let ms = moduli(SpectralClass::Stable);
    let min = |v: &[f64]| v.iter().cloned().reduce(f64::min);
    let max = |v: &[f64]| v.iter().cloned().reduce(f64::max);
    let (rho_u_min, rho_u_max) = (min(&mu), max(&mu));
    let (rho_s_min, rho_s_max) = (min(&ms), max(&ms));
    let r_u = log_ratio(rho_u_min, rho_u_max, cfg.cluster_radius);
    let r_s = log_ratio(rho_s_min, rho_s_max, cfg.cluster_radius);
    let h_top = mu.iter().map(|m| m.ln()).sum::<f64>() + 0.0;
    let d_stable = if ms.len() < 2 || r_s == 1.0 { 1.0 } else { degree_bound(&ms) };
    let inv_u: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
    let d_unstable = if inv_u.len() < 2 || r_u == 1.0 { 1.0 } else { degree_bound(&inv_u) };

    let to_cols = |b: &Vec<DVector<f64>>| b.iter().map(|v| v.iter().cloned().collect()).collect();
    Ok(SpectralSplitting {
        dim: d,
        dim_stable: ds,
        dim_center: dc,
        dim_unstable: du,
        basis_s: to_cols(&bases[0]),
        basis_c: to_cols(&bases[1]),
        basis_u: to_cols(&bases[2]),
        eigenvalues,
        rho_u_min,
        rho_u_max,
        rho_s_min,
        rho_s_max,
        r_u,
        r_s,
        r_l: r_u.max(r_s),
        d_stable,
        d_unstable,
        h_top,
        diagonalizable,
        invariance_residual: residual,
        l: lf,
        l_inv,
        adapted,
        adapted_inv,
        l_adapted,
    })
}

impl SpectralSplitting {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn l_inv(&self) -> &DMatrix<f64> {
        &self.l_inv
    }

    /// Columns `[B_s | B_c | B_u]`.
    pub fn adapted(&self) -> &DMatrix<f64> {
        &self.adapted
    }

    pub fn adapted_inv(&self) -> &DMatrix<f64> {
        &self.adapted_inv
    }

    /// `L` in adapted coordinates.
    pub fn l_adapted(&self) -> &DMatrix<f64> {
        &self.l_adapted
    }

    /// Index range of a class within adapted coordinates.
    pub fn range(&self, class: SpectralClass) -> std::ops::Range<usize> {
        let (ds, dc) = (self.dim_stable, self.dim_center);
        match class {
            SpectralClass::Stable => 0..ds,
            SpectralClass::Center => ds..ds + dc,
            SpectralClass::Unstable => ds + dc..self.dim,
        }
    }

    pub fn class_dim(&self, class: SpectralClass) -> usize {
        self.range(class).len()
    }

    /// Restriction `L_*` in the adapted basis of `E^*`.
    pub fn restricted(&self, class: SpectralClass) -> DMatrix<f64> {
        let r = self.range(class);
        self.l_adapted.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    /// Basis matrix `B_*` (columns).
    pub fn basis(&self, class: SpectralClass) -> DMatrix<f64> {
        let r = self.range(class);
        self.adapted.columns(r.start, r.len()).into_owned()
    }

    /// Coordinate rows: `coords_*(v) = P_* v` with `v = sum_* B_* coords_*(v)`.
    pub fn coordinate_map(&self, class: SpectralClass) -> DMatrix<f64> {
        let r = self.range(class);
        self.adapted_inv.rows(r.start, r.len()).into_owned()
    }

    /// Adapted coordinates of a vector.
    pub fn coordinates(&self, v: &[f64]) -> DVector<f64> {
        &self.adapted_inv * DVector::from_column_slice(v)
    }

    /// `||L_u^{-1}||` in adapted coordinates.
    pub fn norm_unstable_inverse(&self) -> f64 {
        let lu = self.restricted(SpectralClass::Unstable);
        if lu.is_empty() {
            return 0.0;
        }
        lu.try_inverse().map(|m| m.norm_2()).unwrap_or(f64::INFINITY)
    }

    /// `||L_s||` in adapted coordinates.
    pub fn norm_stable(&self) -> f64 {
        let ls = self.restricted(SpectralClass::Stable);
        if ls.is_empty() {
            return 0.0;
        }
        ls.norm_2()
    }

    /// Lyapunov exponents of `L`, ascending.
    pub fn log_moduli(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|e| if e.class == SpectralClass::Center { 0.0 } else { e.modulus.ln() })
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

pub(crate) trait Norm2 {
    fn norm_2(&self) -> f64;
    fn conorm_2(&self) -> f64;
}

impl Norm2 for DMatrix<f64> {
    fn norm_2(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.singular_values().max()
    }

    fn conorm_2(&self) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        self.singular_values().min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn quartic_splitting() {
        let s = spectral_splitting(&examples::quartic_companion()).unwrap();
        assert_eq!((s.dim_stable, s.dim_center, s.dim_unstable), (1, 2, 1));
        let rho = 1.722_083_805_739_043;
        assert!((s.rho_u_min.unwrap() - rho).abs() < 1e-12);
        assert_eq!(s.r_l, 1.0);
        assert!((s.h_top - rho.ln()).abs() < 1e-12);
        assert!(s.invariance_residual < 1e-10, "{}", s.invariance_residual);
        // center block is a rotation in adapted coordinates
        let lc = s.restricted(SpectralClass::Center);
        let ortho = lc.transpose() * &lc - DMatrix::identity(2, 2);
        assert!(ortho.norm() < 1e-12, "{lc}");
        assert!((s.norm_unstable_inverse() - 1.0 / rho).abs() < 1e-12);
        assert!((s.norm_stable() - 1.0 / rho).abs() < 1e-12);
    }

    #[test]
    fn cat_map_splitting() {
        let s = spectral_splitting(&examples::cat_map()).unwrap();
        assert_eq!((s.dim_stable, s.dim_center, s.dim_unstable), (1, 0, 1));
        let golden = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((s.h_top - golden.ln()).abs() < 1e-14);
        assert_eq!(s.r_l, 1.0);
    }

    #[test]
    fn even_polynomials_do_not_stall() {
        // unshifted QR never converges on these companions
        for desc in [[1, 0, 1, 0, 1].as_slice(), &[1, 0, 1, 0, 2, 0, 3], &[1, 0, 1, 0, -2, 0, 2]] {
            let p = IntPoly::from_desc(desc);
            let roots = polynomial_roots(&p);
            assert_eq!(roots.len(), p.deg());
            for z in roots {
                assert!(p.eval_complex(z).norm() < 1e-8, "{p}: {z}");
            }
        }
    }

    #[test]
    fn identity_is_all_center() {
        let id = LatticeAutomorphism::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        let s = spectral_splitting(&id).unwrap();
        assert_eq!((s.dim_stable, s.dim_center, s.dim_unstable), (0, 3, 0));
        assert_eq!(s.r_l, 1.0);
        assert_eq!(s.h_top, 0.0);
    }

    #[test]
    fn jordan_block_uses_generalized_space() {
        let j = LatticeAutomorphism::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let s = spectral_splitting(&j).unwrap();
        assert!(!s.diagonalizable);
        assert_eq!(s.dim_center, 2);
    }

    #[test]
    fn unequal_moduli_give_r_above_one() {
        // cat map (+) its square: unstable moduli golden and golden^2
        let cat = examples::cat_map();
        let sq = LatticeAutomorphism::from_rows(&[vec![5, 3], vec![3, 2]]).unwrap();
        let s = spectral_splitting(&cat.direct_sum(&sq)).unwrap();
        assert!((s.r_u - 2.0).abs() < 1e-12);
        assert!((s.r_s - 2.0).abs() < 1e-12);
        assert!((s.d_unstable - 2.0).abs() < 1e-12);
        assert!((s.d_stable - 2.0).abs() < 1e-12);
    }
}
