//! Components of the conjugacy `h = Id + H` with `h o f = L o h`.
//!
//! Writing `G = L^{-1}(f - L)`, each component in adapted coordinates satisfies
//! `H_* = L_*^{-1} (H_* o f) + G_*`. On `E^u` the right-hand side `T_u` is a contraction
//! with constant `|L_u^{-1}|`; on `E^s` the inverse `T_s^{-1}(psi) = L_s((psi - G_s) o f^{-1})`
//! contracts with `|L_s|`. The center equation has no contraction; its partial sums
//! `sum_{k<j} L_c^{-k} (G_c o f^k)` are reported as diagnostics only.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffeo::{reduce, PerturbedDiffeo};
use crate::error::{Error, Result};
use crate::grid::{Composer, Grid, GridField, Interpolation};
use crate::mollifier::TestFunction;
use crate::par::Exec;
use crate::spectral::{Norm2, SpectralClass, SpectralSplitting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid_n: usize,
    pub tol: f64,
    pub k_max: usize,
    /// `None` picks trigonometric when every shear has a closed-form inverse.
    pub interpolation: Option<Interpolation>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_n: 16,
            tol: 1e-10,
            k_max: 200,
            interpolation: None,
            exec: Exec::default(),
        }
    }
}

impl SolverConfig {
    fn interpolation_for(&self, f: &PerturbedDiffeo) -> Interpolation {
        self.interpolation.unwrap_or(if f.has_closed_form_inverse() {
            Interpolation::Trigonometric
        } else {
            Interpolation::Multilinear
        })
    }

    fn grid(&self, f: &PerturbedDiffeo) -> Result<Grid> {
        if !(self.tol > 0.0) || self.k_max == 0 {
            return Err(Error::invalid("solver needs tol > 0 and k_max >= 1"));
        }
        Grid::new(f.dim(), self.grid_n)
    }
}

/// `G` in ambient coordinates and its adapted components.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub g: GridField,
    pub g_s: GridField,
    pub g_c: GridField,
    pub g_u: GridField,
}

impl DisplacementField {
    pub fn component(&self, class: SpectralClass) -> &GridField {
        match class {
            SpectralClass::Stable => &self.g_s,
            SpectralClass::Center => &self.g_c,
            SpectralClass::Unstable => &self.g_u,
        }
    }
}

/// `G(x) = L^{-1}(f(x) - L x)` on the grid, split by the coordinate maps of `splitting`.
pub fn displacement_g(f: &PerturbedDiffeo, splitting: &SpectralSplitting, grid: Grid, exec: Exec) -> DisplacementField {
    let g = GridField::from_fn(grid, f.dim(), exec, |x| f.g(x));
    let part = |c| g.linear_map(&splitting.coordinate_map(c));
    DisplacementField {
        g_s: part(SpectralClass::Stable),
        g_c: part(SpectralClass::Center),
        g_u: part(SpectralClass::Unstable),
        g,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSolution {
    pub component: SpectralClass,
    pub grid_n: usize,
    pub interpolation: Interpolation,
    pub iterations: usize,
    pub converged: bool,
    /// `|L_u^{-1}|` or `|L_s|`.
    pub contraction_norm: f64,
    /// `q^K sup|G_*| / (1 - q)`.
    pub tail_bound: f64,
    pub g_sup: f64,
    /// Sup-norm of successive differences.
    pub diff_history: Vec<f64>,
    /// Ratios of successive differences above the rounding floor.
    pub ratio_history: Vec<f64>,
    /// Median of `ratio_history`.
    pub measured_ratio: Option<f64>,
    /// `sup |T(H) - H|` after the last iteration.
    pub fixed_point_residual: f64,
    #[serde(skip)]
    pub field: GridField,
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

/// Relative level below which successive differences are rounding noise.
const NOISE: f64 = 1e-12;

fn iterate(
    class: SpectralClass,
    q: f64,
    g_sup: f64,
    cfg: &SolverConfig,
    interpolation: Interpolation,
    start: GridField,
    mut step: impl FnMut(&GridField) -> Result<GridField>,
) -> Result<ComponentSolution> {
    let mut psi = start;
    let mut diffs = Vec::new();
    let mut ratios = Vec::new();
    let floor = NOISE * g_sup.max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.k_max {
        let next = step(&psi)?;
        let diff = next.sub(&psi).sup_norm();
        iterations += 1;
        if let Some(&prev) = diffs.last() {
            if prev > floor && diff > floor {
                let r = diff / prev;
                if r > 1.0 {
                    return Err(Error::NoConvergence {
                        iterations,
                        detail: format!(
                            "{class:?} series: measured contraction ratio {r:.4} > 1 (norm {q:.4}); \
                             the interpolation grid is too coarse for this perturbation"
                        ),
                    });
                }
                ratios.push(r);
            }
        }
        diffs.push(diff);
        psi = next;
        // a-posteriori distance to the fixed point
        if diff * q / (1.0 - q) <= cfg.tol {
            converged = true;
            break;
        }
    }
    let residual = step(&psi)?.sub(&psi).sup_norm();
    Ok(ComponentSolution {
        component: class,
        grid_n: psi.grid().n(),
        interpolation,
        iterations,
        converged,
        contraction_norm: q,
        tail_bound: q.powi(iterations as i32) * g_sup / (1.0 - q),
        g_sup,
        diff_history: diffs,
        measured_ratio: median(&ratios),
        ratio_history: ratios,
        fixed_point_residual: residual,
        field: psi,
    })
}

/// `H_u = lim T_u^k(0)`, `T_u(psi) = L_u^{-1}(psi o f) + G_u`.
pub fn solve_hu(f: &PerturbedDiffeo, splitting: &SpectralSplitting, cfg: &SolverConfig) -> Result<ComponentSolution> {
    let grid = cfg.grid(f)?;
    let q = splitting.norm_unstable_inverse();
    if !(q < 1.0) {
        return Err(Error::precondition(format!("|L_u^-1| = {q} is not < 1")));
    }
    let interpolation = cfg.interpolation_for(f);
    let composer = Composer::new(f, grid, interpolation, cfg.exec)?;
    let g = displacement_g(f, splitting, grid, cfg.exec);
    let lu_inv = splitting
        .restricted(SpectralClass::Unstable)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("L_u is singular".into()))?;
    let g_u = g.g_u;
    let g_sup = g_u.sup_norm();
    let start = GridField::zeros(grid, g_u.ncomp());
    iterate(SpectralClass::Unstable, q, g_sup, cfg, interpolation, start, |psi| {
        Ok(composer.compose_forward(psi).linear_map(&lu_inv).add(&g_u))
    })
}

/// `H_s = lim T_s^{-k}(0)`, `T_s^{-1}(psi) = L_s((psi - G_s) o f^{-1})`.
pub fn solve_hs(f: &PerturbedDiffeo, splitting: &SpectralSplitting, cfg: &SolverConfig) -> Result<ComponentSolution> {
    let grid = cfg.grid(f)?;
    let q = splitting.norm_stable();
    if !(q < 1.0) {
        return Err(Error::precondition(format!("|L_s| = {q} is not < 1")));
    }
    let interpolation = cfg.interpolation_for(f);
    let composer = Composer::new(f, grid, interpolation, cfg.exec)?;
    let g = displacement_g(f, splitting, grid, cfg.exec);
    let ls = splitting.restricted(SpectralClass::Stable);
    let g_s = g.g_s;
    let g_sup = g_s.sup_norm();
    let start = GridField::zeros(grid, g_s.ncomp());
    iterate(SpectralClass::Stable, q, g_sup, cfg, interpolation, start, |psi| {
        Ok(composer.compose_inverse(&psi.sub(&g_s))?.linear_map(&ls))
    })
}

/// Grid representation of `H = (H_s, H_c, H_u)`.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyField {
    pub grid_n: usize,
    pub truncation_k: usize,
    pub tail_bound: f64,
    pub interpolation: Interpolation,
    pub leaf_conjugacy: bool,
    #[serde(skip)]
    pub h_s: GridField,
    #[serde(skip)]
    pub h_c: GridField,
    #[serde(skip)]
    pub h_u: GridField,
}

impl ConjugacyField {
    pub fn new(hs: &ComponentSolution, hu: &ComponentSolution, h_c: Option<GridField>, splitting: &SpectralSplitting) -> Self {
        let grid = hs.field.grid();
        let leaf = h_c.is_none();
        ConjugacyField {
            grid_n: grid.n(),
            truncation_k: hs.iterations.max(hu.iterations),
            tail_bound: hs.tail_bound.max(hu.tail_bound),
            interpolation: hu.interpolation,
            leaf_conjugacy: leaf,
            h_s: hs.field.clone(),
            h_c: h_c.unwrap_or_else(|| GridField::zeros(grid, splitting.dim_center)),
            h_u: hu.field.clone(),
        }
    }

    /// `H` in ambient coordinates.
    pub fn ambient(&self, splitting: &SpectralSplitting) -> GridField {
        let m = splitting.adapted();
        let comps: Vec<Vec<f64>> = self
            .h_s
            .components()
            .iter()
            .chain(self.h_c.components())
            .chain(self.h_u.components())
            .cloned()
            .collect();
        GridField::from_components(self.h_s.grid(), comps)
            .expect("components share a grid")
            .linear_map(m)
    }
}

/// Center partial sums and their term norms.
#[derive(Debug, Clone, Serialize)]
pub struct HcPartialSum {
    pub j: usize,
    /// `sup |L_c^{-k} (G_c o f^k)|` for `k < j`.
    pub term_sup_norms: Vec<f64>,
    /// `|L_c^{-k}|` for `k < j`.
    pub lc_inverse_power_norms: Vec<f64>,
    pub partial_sup_norms: Vec<f64>,
    #[serde(skip)]
    pub field: GridField,
}

/// Evaluates the terms `L_c^{-k} G_c(f^k x)` along exact orbits of the given points.
struct CenterTerms<'a> {
    f: &'a PerturbedDiffeo,
    pc: DMatrix<f64>,
    lc_inv: DMatrix<f64>,
    power: DMatrix<f64>,
    points: Vec<Vec<f64>>,
    exec: Exec,
}

impl<'a> CenterTerms<'a> {
    fn new(f: &'a PerturbedDiffeo, splitting: &SpectralSplitting, points: Vec<Vec<f64>>, exec: Exec) -> Result<Self> {
        let dc = splitting.dim_center;
        if dc == 0 {
            return Err(Error::precondition("E^c is trivial"));
        }
        let lc_inv = splitting
            .restricted(SpectralClass::Center)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("L_c is singular".into()))?;
        Ok(CenterTerms {
            f,
            pc: splitting.coordinate_map(SpectralClass::Center),
            lc_inv,
            power: DMatrix::identity(dc, dc),
            points,
            exec,
        })
    }

    /// Current term at every point, then advances the orbits by one step.
    fn next_term(&mut self) -> Vec<Vec<f64>> {
        let f = self.f;
        let pc = &self.pc;
        let power = &self.power;
        let points = &self.points;
        let out = self.exec.map(points.len(), |i| {
            let g = nalgebra::DVector::from_vec(f.g(&points[i]));
            (power * (pc * g)).iter().cloned().collect::<Vec<f64>>()
        });
        self.points = self.exec.map(points.len(), |i| f.eval(&points[i]));
        self.power = &self.lc_inv * &self.power;
        out
    }
}

/// `sum_{k<j} L_c^{-k} (G_c o f^k)` on the grid.
pub fn partial_sum_hc(
    f: &PerturbedDiffeo,
    splitting: &SpectralSplitting,
    j: usize,
    cfg: &SolverConfig,
) -> Result<HcPartialSum> {
    if j == 0 {
        return Err(Error::invalid("partial sums need j >= 1"));
    }
    let grid = cfg.grid(f)?;
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let mut terms = CenterTerms::new(f, splitting, points, cfg.exec)?;
    let dc = splitting.dim_center;
    let mut sum = vec![vec![0.0; grid.len()]; dc];
    let mut term_norms = Vec::with_capacity(j);
    let mut power_norms = Vec::with_capacity(j);
    let mut partial_norms = Vec::with_capacity(j);
    for _ in 0..j {
        power_norms.push(terms.power.norm_2());
        let t = terms.next_term();
        let mut sup: f64 = 0.0;
        let mut psup: f64 = 0.0;
        for (i, v) in t.iter().enumerate() {
            sup = sup.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
            let mut acc = 0.0;
            for (c, x) in v.iter().enumerate() {
                sum[c][i] += x;
                acc += sum[c][i] * sum[c][i];
            }
            psup = psup.max(acc.sqrt());
        }
        term_norms.push(sup);
        partial_norms.push(psup);
    }
    Ok(HcPartialSum {
        j,
        term_sup_norms: term_norms,
        lc_inverse_power_norms: power_norms,
        partial_sup_norms: partial_norms,
        field: GridField::from_components(grid, sum)?,
    })
}

/// Quadrature for `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sampler {
    /// Uniform grid quadrature (Lebesgue measure).
    Grid { n: usize },
    /// Birkhoff averages along `orbits` orbits of length `length` after `burn_in` steps.
    Birkhoff {
        orbits: usize,
        length: usize,
        burn_in: usize,
        seed: u64,
    },
}

impl Sampler {
    pub fn points(&self, f: &PerturbedDiffeo) -> Result<Vec<Vec<f64>>> {
        let d = f.dim();
        match *self {
            Sampler::Grid { n } => {
                let g = Grid::new(d, n)?;
                Ok((0..g.len()).map(|i| g.point(i)).collect())
            }
            Sampler::Birkhoff {
                orbits,
                length,
                burn_in,
                seed,
            } => {
                if orbits == 0 || length == 0 {
                    return Err(Error::invalid("Birkhoff sampler needs orbits >= 1 and length >= 1"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pts = Vec::with_capacity(orbits * length);
                for _ in 0..orbits {
                    let mut x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
                    for _ in 0..burn_in {
                        x = f.eval(&x);
                    }
                    for _ in 0..length {
                        pts.push(x.clone());
                        x = f.eval(&x);
                    }
                }
                Ok(pts)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    /// `<S_j, eta>` for `j = 1..=j_max`, one vector per `j`.
    pub pairings: Vec<Vec<f64>>,
    /// `|<term_k, eta>|` (Euclidean over components).
    pub increments: Vec<f64>,
    pub term_sup_norms: Vec<f64>,
    pub sample_points: usize,
}

/// Pairings of the center partial sums with a test function.
pub fn hc_pairings(
    f: &PerturbedDiffeo,
    splitting: &SpectralSplitting,
    eta: &TestFunction,
    j_max: usize,
    sampler: &Sampler,
    exec: Exec,
) -> Result<PairingReport> {
    let points = sampler.points(f)?;
    let weights: Vec<f64> = points.iter().map(|x| eta.eta().eval(x)).collect();
    let n = points.len() as f64;
    let mut terms = CenterTerms::new(f, splitting, points, exec)?;
    let dc = splitting.dim_center;
    let mut running = vec![0.0; dc];
    let mut pairings = Vec::with_capacity(j_max);
    let mut increments = Vec::with_capacity(j_max);
    let mut sups = Vec::with_capacity(j_max);
    for _ in 0..j_max {
        let t = terms.next_term();
        let mut inc = vec![0.0; dc];
        let mut sup: f64 = 0.0;
        for (v, w) in t.iter().zip(&weights) {
            for (c, x) in v.iter().enumerate() {
                inc[c] += w * x / n;
            }
            sup = sup.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        for (r, i) in running.iter_mut().zip(&inc) {
            *r += i;
        }
        increments.push(inc.iter().map(|x| x * x).sum::<f64>().sqrt());
        pairings.push(running.clone());
        sups.push(sup);
    }
    Ok(PairingReport {
        pairings,
        increments,
        term_sup_norms: sups,
        sample_points: weights.len(),
    })
}

/// Lebesgue grid pairing `<field_j, eta>` for a sequence of grid fields.
pub fn pair_against_test_function(fields: &[GridField], eta: &TestFunction) -> Vec<Vec<f64>> {
    fields
        .iter()
        .map(|field| {
            let g = field.grid();
            let n = g.len() as f64;
            let w: Vec<f64> = (0..g.len()).map(|i| eta.eta().eval(&g.point(i))).collect();
            field
                .components()
                .iter()
                .map(|c| c.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / n)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub stable: f64,
    pub center: f64,
    pub unstable: f64,
    /// Center residual is expected to be large (the center component of `h` is the identity).
    pub leaf_conjugacy: bool,
}

/// `sup_x |h(f(x)) - L h(x)|` per adapted component, using `r = L G + H o f - L H`.
///
/// `f` is a bijection, so the sup can be sampled at grid points or at their preimages.
/// The stable component is sampled at `f^{-1}(grid)`, where `r_s = H_s - T_s^{-1}(H_s)`;
/// the other components at the grid, where `r_* = L_*(T_*(H_*) - H_*)`.
pub fn conjugacy_residual(
    f: &PerturbedDiffeo,
    splitting: &SpectralSplitting,
    h: &ConjugacyField,
    exec: Exec,
) -> Result<ResidualReport> {
    let grid = h.h_s.grid();
    let composer = Composer::new(f, grid, h.interpolation, exec)?;
    let g = displacement_g(f, splitting, grid, exec);
    let forward = |class: SpectralClass, hf: &GridField| -> f64 {
        if hf.ncomp() == 0 {
            return 0.0;
        }
        let l = splitting.restricted(class);
        let lg = g.component(class).linear_map(&l);
        lg.add(&composer.compose_forward(hf)).sub(&hf.linear_map(&l)).sup_norm()
    };
    let stable = if h.h_s.ncomp() == 0 {
        0.0
    } else {
        let ls = splitting.restricted(SpectralClass::Stable);
        let back = composer.compose_inverse(&h.h_s.sub(&g.g_s))?.linear_map(&ls);
        h.h_s.sub(&back).sup_norm()
    };
    Ok(ResidualReport {
        stable,
        center: forward(SpectralClass::Center, &h.h_c),
        unstable: forward(SpectralClass::Unstable, &h.h_u),
        leaf_conjugacy: h.leaf_conjugacy,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderEstimate {
    /// Per component.
    pub exponents: Vec<f64>,
    pub fit_residuals: Vec<f64>,
    /// Scales as fractions of the period.
    pub scales: Vec<f64>,
    pub max_increments: Vec<Vec<f64>>,
}

/// Log-log fit of `max |F(x + h e_a) - F(x)|` against `h` for the given step counts.
pub fn holder_exponent(field: &GridField, steps: &[usize]) -> Result<HolderEstimate> {
    let mut steps = steps.to_vec();
    steps.sort_unstable();
    steps.dedup();
    if steps.len() < 3 {
        return Err(Error::invalid("Hölder fit needs at least 3 scales"));
    }
    let grid = field.grid();
    if steps.iter().any(|&s| s == 0 || s >= grid.n()) {
        return Err(Error::invalid("scales must lie in 1..grid_n"));
    }
    let scales: Vec<f64> = steps.iter().map(|&s| s as f64 / grid.n() as f64).collect();
    let mut exponents = Vec::new();
    let mut residuals = Vec::new();
    let mut all_incs = Vec::new();
    for comp in field.components() {
        let incs: Vec<f64> = steps
            .iter()
            .map(|&s| {
                let mut best: f64 = 0.0;
                for idx in 0..grid.len() {
                    let m = grid.multi_index(idx);
                    for a in 0..grid.dim() {
                        let mut m2 = m.clone();
                        m2[a] = (m2[a] + s) % grid.n();
                        best = best.max((comp[grid.index(&m2)] - comp[idx]).abs());
                    }
                }
                best
            })
            .collect();
        if incs.iter().any(|&v| v <= f64::MIN_POSITIVE) {
            exponents.push(1.0);
            residuals.push(0.0);
        } else {
            let xs: Vec<f64> = scales.iter().map(|h| h.ln()).collect();
            let ys: Vec<f64> = incs.iter().map(|v| v.ln()).collect();
            let (slope, res) = least_squares(&xs, &ys);
            exponents.push(slope);
            residuals.push(res);
        }
        all_incs.push(incs);
    }
    Ok(HolderEstimate {
        exponents,
        fit_residuals: residuals,
        scales,
        max_increments: all_incs,
    })
}

/// Slope and RMS residual of the least-squares line.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

/// Random points on the torus from a seeded ChaCha8 stream.
pub fn random_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            reduce(&mut x);
            x
        })
        .collect()
}
