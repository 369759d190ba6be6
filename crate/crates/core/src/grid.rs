//! Uniform grids on the torus and composition of grid fields with `f` and `f^{-1}`.
//!
//! `psi o f = psi o S_m o ... o S_1 o L`. On the grid `L` is an index permutation,
//! and composing with a shear along axis `t` whose generator ignores `x_t` is a
//! constant shift along every `t`-line, applied as an FFT phase shift. This is exact
//! for fields that are band-limited along the line.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diffeo::PerturbedDiffeo;
use crate::error::{Error, Result};
use crate::par::Exec;

const MAX_POINTS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
    len: usize,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 || n < 2 {
            return Err(Error::invalid(format!("grid needs d >= 1 and n >= 2, got d = {d}, n = {n}")));
        }
        let len = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(n).filter(|&v| v <= MAX_POINTS));
        let len = len.ok_or_else(|| Error::invalid(format!("grid {n}^{d} is too large")))?;
        Ok(Grid { d, n, len })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Axis 0 varies slowest.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.d];
        for a in (0..self.d).rev() {
            m[a] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .into_iter()
            .map(|i| i as f64 / self.n as f64)
            .collect()
    }

    /// `perm[i]` is the index of `A i mod n` for an integer matrix `A`.
    pub fn linear_permutation(&self, a: &[Vec<i64>]) -> Vec<usize> {
        let n = self.n as i64;
        (0..self.len)
            .map(|idx| {
                let m = self.multi_index(idx);
                let image: Vec<usize> = a
                    .iter()
                    .map(|row| {
                        let v: i64 = row.iter().zip(&m).map(|(r, &i)| r * i as i64).sum();
                        v.rem_euclid(n) as usize
                    })
                    .collect();
                self.index(&image)
            })
            .collect()
    }

    /// Start indices of the lines along `axis`.
    pub fn line_starts(&self, axis: usize) -> Vec<usize> {
        (0..self.len)
            .filter(|&idx| self.multi_index(idx)[axis] == 0)
            .collect()
    }
}

/// A vector field sampled on a grid, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl GridField {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        GridField {
            grid,
            comps: vec![vec![0.0; grid.len()]; ncomp],
        }
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::invalid("component length does not match grid"));
        }
        Ok(GridField { grid, comps })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: Grid, ncomp: usize, exec: Exec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
    {
        let values = exec.map(grid.len(), |idx| f(&grid.point(idx)));
        let mut comps = vec![vec![0.0; grid.len()]; ncomp];
        for (idx, v) in values.into_iter().enumerate() {
            for (c, x) in v.into_iter().enumerate().take(ncomp) {
                comps[c][idx] = x;
            }
        }
        GridField { grid, comps }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn value(&self, idx: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[idx]).collect()
    }

    /// `max_x |v(x)|` (Euclidean over components).
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridField) -> GridField {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &GridField, op: impl Fn(f64, f64) -> f64) -> GridField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect())
            .collect();
        GridField { grid: self.grid, comps }
    }

    /// Pointwise `v -> M v` for a small matrix given by rows.
    pub fn linear_map(&self, m: &nalgebra::DMatrix<f64>) -> GridField {
        let comps = (0..m.nrows())
            .map(|r| {
                (0..self.grid.len())
                    .map(|i| (0..m.ncols()).map(|c| m[(r, c)] * self.comps[c][i]).sum())
                    .collect()
            })
            .collect();
        GridField { grid: self.grid, comps }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        self.comps.iter().map(|c| c.iter().sum::<f64>() / n).collect()
    }

    /// Multilinear interpolation at an arbitrary point.
    pub fn interpolate(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n as f64;
        let d = g.d;
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let u = (x[a] - x[a].floor()) * n;
            let i = u.floor();
            base[a] = (i as usize) % g.n;
            frac[a] = u - i;
        }
        let mut out = vec![0.0; self.comps.len()];
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let bit = (mask >> a) & 1;
                corner[a] = (base[a] + bit) % g.n;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let idx = g.index(&corner);
            for (o, c) in out.iter_mut().zip(&self.comps) {
                *o += w * c[idx];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trigonometric,
    Multilinear,
}

/// Lines along one shear's target axis and the Fourier phase factors of their shifts.
struct LineShifts {
    starts: Vec<usize>,
    /// `n` factors per line; the Nyquist entry is real.
    phases: Vec<Complex<f64>>,
}

/// Precomputed composition operators for one map and one grid.
pub struct Composer<'a> {
    f: &'a PerturbedDiffeo,
    grid: Grid,
    interpolation: Interpolation,
    exec: Exec,
    perm_l: Vec<usize>,
    perm_l_inv: Vec<usize>,
    shifts: Vec<LineShifts>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl<'a> Composer<'a> {
    pub fn new(f: &'a PerturbedDiffeo, grid: Grid, interpolation: Interpolation, exec: Exec) -> Result<Self> {
        if grid.dim() != f.dim() {
            return Err(Error::invalid("grid dimension does not match the map"));
        }
        if interpolation == Interpolation::Trigonometric && !f.has_closed_form_inverse() {
            return Err(Error::invalid(
                "trigonometric composition needs shears that ignore their target coordinate",
            ));
        }
        let too_big = || Error::invalid("matrix entries do not fit in i64");
        let l = f.automorphism().matrix().to_i64_rows().ok_or_else(too_big)?;
        let l_inv = f.automorphism().inverse_matrix().to_i64_rows().ok_or_else(too_big)?;
        let eps = f.epsilon();
        let shifts = f
            .shears()
            .iter()
            .map(|s| {
                let starts = grid.line_starts(s.target());
                let n = grid.n();
                let mut phases = Vec::with_capacity(starts.len() * n);
                for &idx in &starts {
                    let shift = eps * s.phi().eval(&grid.point(idx));
                    phases.extend((0..n).map(|k| {
                        let angle = std::f64::consts::TAU * shift;
                        if 2 * k < n {
                            Complex::from_polar(1.0, angle * k as f64)
                        } else if 2 * k > n {
                            Complex::from_polar(1.0, angle * (k as f64 - n as f64))
                        } else {
                            Complex::new((angle * k as f64).cos(), 0.0)
                        }
                    }));
                }
                LineShifts { starts, phases }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Composer {
            f,
            grid,
            interpolation,
            exec,
            perm_l: grid.linear_permutation(&l),
            perm_l_inv: grid.linear_permutation(&l_inv),
            shifts,
            fft: planner.plan_fft_forward(grid.n()),
            ifft: planner.plan_fft_inverse(grid.n()),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// `psi o f` on the grid.
    pub fn compose_forward(&self, psi: &GridField) -> GridField {
        match self.interpolation {
            Interpolation::Trigonometric => {
                let comps = psi
                    .components()
                    .iter()
                    .map(|c| {
                        let mut v = c.clone();
                        for (si, s) in self.f.shears().iter().enumerate().rev() {
                            v = self.shift_lines(&v, s.target(), &self.shifts[si], 1.0);
                        }
                        permute(&v, &self.perm_l)
                    })
                    .collect();
                GridField { grid: self.grid, comps }
            }
            Interpolation::Multilinear => {
                let g = self.grid;
                GridField::from_fn(g, psi.ncomp(), self.exec, |x| psi.interpolate(&self.f.eval(x)))
            }
        }
    }

    /// `psi o f^{-1}` on the grid.
    pub fn compose_inverse(&self, psi: &GridField) -> Result<GridField> {
        match self.interpolation {
            Interpolation::Trigonometric => {
                let comps = psi
                    .components()
                    .iter()
                    .map(|c| {
                        let mut v = permute(c, &self.perm_l_inv);
                        for (si, s) in self.f.shears().iter().enumerate() {
                            v = self.shift_lines(&v, s.target(), &self.shifts[si], -1.0);
                        }
                        v
                    })
                    .collect();
                Ok(GridField { grid: self.grid, comps })
            }
            Interpolation::Multilinear => {
                let g = self.grid;
                let pre = self.exec.map(g.len(), |idx| self.f.inverse_lift(&g.point(idx)));
                let mut comps = vec![vec![0.0; g.len()]; psi.ncomp()];
                for (idx, x) in pre.into_iter().enumerate() {
                    let v = psi.interpolate(&x?);
                    for (c, val) in v.into_iter().enumerate() {
                        comps[c][idx] = val;
                    }
                }
                Ok(GridField { grid: g, comps })
            }
        }
    }

    /// `w(y) = v(y + sign * shift(line) e_axis)` along every `axis`-line.
    fn shift_lines(&self, v: &[f64], axis: usize, lines: &LineShifts, sign: f64) -> Vec<f64> {
        let n = self.grid.n();
        let stride = self.grid.stride(axis);
        let shifted = self.exec.map(lines.starts.len(), |li| {
            let start = lines.starts[li];
            let phases = &lines.phases[li * n..(li + 1) * n];
            let mut buf: Vec<Complex<f64>> =
                (0..n).map(|j| Complex::new(v[start + j * stride], 0.0)).collect();
            self.fft.process(&mut buf);
            for (c, p) in buf.iter_mut().zip(phases) {
                *c *= if sign > 0.0 { *p } else { p.conj() };
            }
            self.ifft.process(&mut buf);
            buf.iter().map(|c| c.re / n as f64).collect::<Vec<f64>>()
        });
        let mut out = vec![0.0; v.len()];
        for (li, line) in shifted.into_iter().enumerate() {
            let start = lines.starts[li];
            for (j, x) in line.into_iter().enumerate() {
                out[start + j * stride] = x;
            }
        }
        out
    }
}

fn permute(v: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| v[p]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{PerturbationKind, PerturbationSpec, ShearSpec};
    use crate::examples;
    use crate::trig::{Mode, TrigPoly};

    fn shear_map(eps: f64) -> PerturbedDiffeo {
        let spec = PerturbationSpec {
            kind: PerturbationKind::VolumePreserving,
            epsilon: eps,
            shears: vec![
                ShearSpec {
                    target: 0,
                    modes: vec![Mode::new(vec![0, 1], 0.0, 1.0)],
                },
                ShearSpec {
                    target: 1,
                    modes: vec![Mode::new(vec![1, 0], 1.0, 0.0)],
                },
            ],
        };
        PerturbedDiffeo::new(examples::cat_map(), &spec).unwrap()
    }

    #[test]
    fn indexing_round_trip() {
        let g = Grid::new(3, 5).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index(&g.multi_index(idx)), idx);
        }
        assert_eq!(g.stride(0), 25);
        assert!(Grid::new(4, 1).is_err());
        assert!(Grid::new(12, 64).is_err());
    }

    #[test]
    fn linear_composition_is_exact_permutation() {
        let f = PerturbedDiffeo::linear(examples::cat_map());
        let g = Grid::new(2, 8).unwrap();
        let psi_fn = TrigPoly::single(vec![1, 2], 0.3, 0.7);
        let psi = GridField::from_fn(g, 1, Exec::Sequential, |x| vec![psi_fn.eval(x)]);
        let c = Composer::new(&f, g, Interpolation::Trigonometric, Exec::Sequential).unwrap();
        let out = c.compose_forward(&psi);
        let exact = GridField::from_fn(g, 1, Exec::Sequential, |x| vec![psi_fn.eval(&f.eval(x))]);
        assert!(out.sub(&exact).sup_norm() < 1e-14);
    }

    #[test]
    fn shear_composition_is_spectrally_accurate() {
        let f = shear_map(0.05);
        let g = Grid::new(2, 32).unwrap();
        let psi_fn = TrigPoly::new(2, vec![Mode::new(vec![1, 0], 1.0, 0.0), Mode::new(vec![0, 1], 0.0, 0.5)]).unwrap();
        let psi = GridField::from_fn(g, 1, Exec::Sequential, |x| vec![psi_fn.eval(x)]);
        let c = Composer::new(&f, g, Interpolation::Trigonometric, Exec::Sequential).unwrap();
        let fwd = c.compose_forward(&psi);
        let exact = GridField::from_fn(g, 1, Exec::Sequential, |x| vec![psi_fn.eval(&f.eval(x))]);
        assert!(fwd.sub(&exact).sup_norm() < 1e-8, "{}", fwd.sub(&exact).sup_norm());
        let back = c.compose_inverse(&psi).unwrap();
        let exact_back = GridField::from_fn(g, 1, Exec::Sequential, |x| {
            vec![psi_fn.eval(&f.inverse(x, 1e-12).unwrap())]
        });
        assert!(back.sub(&exact_back).sup_norm() < 1e-8);
        // multilinear is consistent but only second order
        let m = Composer::new(&f, g, Interpolation::Multilinear, Exec::Sequential).unwrap();
        let err = m.compose_forward(&psi).sub(&exact).sup_norm();
        assert!(err < 0.05 && err > 1e-8, "{err}");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = shear_map(0.1);
        let g = Grid::new(2, 16).unwrap();
        let psi = GridField::from_fn(g, 2, Exec::Sequential, |x| vec![x[0].sin(), (3.0 * x[1]).cos()]);
        let a = Composer::new(&f, g, Interpolation::Trigonometric, Exec::Sequential).unwrap();
        let b = Composer::new(&f, g, Interpolation::Trigonometric, Exec::Parallel).unwrap();
        assert_eq!(a.compose_forward(&psi), b.compose_forward(&psi));
    }

    #[test]
    fn multilinear_reproduces_grid_values() {
        let g = Grid::new(2, 4).unwrap();
        let field = GridField::from_fn(g, 1, Exec::Sequential, |x| vec![x[0] + 10.0 * x[1]]);
        assert_eq!(field.interpolate(&[0.25, 0.5]), vec![0.25 + 5.0]);
        // midpoint between grid nodes
        let mid = field.interpolate(&[0.125, 0.0]);
        assert!((mid[0] - 0.125).abs() < 1e-15);
    }
}
