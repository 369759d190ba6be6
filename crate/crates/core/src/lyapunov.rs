//! Lyapunov exponents, center growth, the entropy chain and the dichotomy classifier.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conjugacy::least_squares;
use crate::diffeo::PerturbedDiffeo;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::spectral::{Norm2, SpectralClass, SpectralSplitting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    /// Ascending.
    pub exponents: Vec<f64>,
    /// The `dim E^c` exponents nearest to zero, ascending.
    pub center_exponents: Vec<f64>,
    /// The `dim E^u` largest exponents.
    pub unstable_exponents: Vec<f64>,
    pub dim_stable: usize,
    pub dim_center: usize,
    pub dim_unstable: usize,
    pub orbit_length: usize,
    pub seed: Option<u64>,
    pub x0: Vec<f64>,
    pub convergence_history: Vec<Checkpoint>,
    /// `max_i |l_i + l_{d+1-i}|`.
    pub pairing_defect: f64,
    /// `|sum l_i|`.
    pub sum_defect: f64,
}

impl ExponentReport {
    /// Builds a report from given exponents, filling the derived fields.
    pub fn from_exponents(mut exponents: Vec<f64>, dims: (usize, usize, usize), orbit_length: usize) -> Result<Self> {
        let (ds, dc, du) = dims;
        if exponents.len() != ds + dc + du {
            return Err(Error::invalid("exponent count does not match the splitting"));
        }
        if exponents.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numerical("non-finite Lyapunov exponent".into()));
        }
        exponents.sort_by(|a, b| a.total_cmp(b));
        let d = exponents.len();
        let mut by_size: Vec<usize> = (0..d).collect();
        by_size.sort_by(|&i, &j| exponents[i].abs().total_cmp(&exponents[j].abs()).then(i.cmp(&j)));
        let mut center: Vec<f64> = by_size[..dc].iter().map(|&i| exponents[i]).collect();
        center.sort_by(|a, b| a.total_cmp(b));
        let unstable = exponents[d - du..].to_vec();
        let pairing_defect = (0..d / 2)
            .map(|i| (exponents[i] + exponents[d - 1 - i]).abs())
            .fold(0.0, f64::max);
        let sum_defect = exponents.iter().sum::<f64>().abs();
        Ok(ExponentReport {
            center_exponents: center,
            unstable_exponents: unstable,
            dim_stable: ds,
            dim_center: dc,
            dim_unstable: du,
            orbit_length,
            seed: None,
            x0: Vec::new(),
            convergence_history: Vec::new(),
            pairing_defect,
            sum_defect,
            exponents,
        })
    }
}

/// Uniform starting point from a ChaCha8 stream.
pub fn seeded_point(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.gen::<f64>()).collect()
}

/// Columns of `M^{-1}` coordinates ordered unstable, center, stable, so the first
/// Gram-Schmidt vector starts in the fastest direction.
fn initial_frame(sp: &SpectralSplitting) -> DMatrix<f64> {
    let d = sp.dim;
    let order: Vec<usize> = sp
        .range(SpectralClass::Unstable)
        .chain(sp.range(SpectralClass::Center))
        .chain(sp.range(SpectralClass::Stable))
        .collect();
    DMatrix::from_fn(d, d, |r, c| if order[c] == r { 1.0 } else { 0.0 })
}

/// QR-reorthonormalized cocycle in coordinates adapted to `L`.
pub fn oseledets_qr(
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    x0: &[f64],
    n: usize,
    checkpoints: &[usize],
) -> Result<ExponentReport> {
    let d = f.dim();
    if x0.len() != d || sp.dim != d {
        return Err(Error::invalid("dimension mismatch"));
    }
    if n == 0 {
        return Err(Error::invalid("orbit length must be positive"));
    }
    let m = sp.adapted();
    let m_inv = sp.adapted_inv();
    let mut q = initial_frame(sp);
    let mut sums = vec![0.0; d];
    let mut x = x0.to_vec();
    let mut marks: Vec<usize> = checkpoints.iter().cloned().filter(|&c| c >= 1 && c <= n).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut next_mark = 0;
    let mut history = Vec::with_capacity(marks.len());
    for step in 1..=n {
        let a = m_inv * f.derivative(&x) * m;
        let qr = (a * &q).qr();
        let r = qr.r();
        q = qr.q();
        for (i, s) in sums.iter_mut().enumerate() {
            *s += r[(i, i)].abs().ln();
        }
        x = f.eval(&x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("orbit left the torus at step {step}")));
        }
        if next_mark < marks.len() && marks[next_mark] == step {
            let mut e: Vec<f64> = sums.iter().map(|s| s / step as f64).collect();
            e.sort_by(|a, b| a.total_cmp(b));
            history.push(Checkpoint { step, exponents: e });
            next_mark += 1;
        }
    }
    let exps: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let mut report = ExponentReport::from_exponents(exps, (sp.dim_stable, sp.dim_center, sp.dim_unstable), n)?;
    report.x0 = x0.to_vec();
    report.convergence_history = history;
    Ok(report)
}

/// One orbit per seed, run concurrently; reports are returned in seed order.
pub fn oseledets_seeds(
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    seeds: &[u64],
    n: usize,
    checkpoints: &[usize],
    exec: Exec,
) -> Result<Vec<ExponentReport>> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    exec.map(seeds.len(), |i| {
        let x0 = seeded_point(f.dim(), seeds[i]);
        oseledets_qr(f, sp, &x0, n, checkpoints).map(|mut r| {
            r.seed = Some(seeds[i]);
            r
        })
    })
    .into_iter()
    .collect()
}

/// Geometric checkpoints `1, 2, 4, ...` up to `n`, always including `n`.
pub fn dyadic_checkpoints(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |&k| k.checked_mul(2))
        .take_while(|&k| k < n)
        .collect();
    v.push(n);
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterGrowth {
    /// `max_x log |Df^k|_{E^c(x)}|` for `k = 1..=n`, adapted metric.
    pub log_profile: Vec<f64>,
    /// Least-squares slope of `log_profile` against `k`.
    pub rate: f64,
    pub fit_residual: f64,
    /// Largest component of `Df E^c(x_k)` outside the computed `E^c(x_{k+1})`.
    pub invariance_residual: f64,
    pub samples: usize,
    pub continuation_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    pub samples: usize,
    pub continuation_steps: usize,
    pub max_residual: f64,
    pub seed: u64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            samples: 8,
            continuation_steps: 60,
            max_residual: 1e-6,
            seed: 0,
        }
    }
}

fn orthonormal_columns(a: DMatrix<f64>) -> DMatrix<f64> {
    let k = a.ncols();
    a.qr().q().columns(0, k).into_owned()
}

/// Coordinate projector columns for a set of spectral classes.
fn coordinate_block(sp: &SpectralSplitting, classes: &[SpectralClass]) -> DMatrix<f64> {
    let idx: Vec<usize> = classes.iter().flat_map(|&c| sp.range(c)).collect();
    DMatrix::from_fn(sp.dim, idx.len(), |r, c| if idx[c] == r { 1.0 } else { 0.0 })
}

/// Orthonormal basis of `span(U) ∩ span(V)` from the null space of `[U, -V]`.
fn intersect(u: &DMatrix<f64>, v: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let d = u.nrows();
    let (ku, kv) = (u.ncols(), v.ncols());
    let mut stacked = DMatrix::zeros(d, ku + kv);
    stacked.columns_mut(0, ku).copy_from(u);
    stacked.columns_mut(ku, kv).copy_from(&(-v));
    // Right singular vectors for the `dim` smallest singular values.
    let svd = (stacked.transpose() * &stacked).symmetric_eigen();
    let mut order: Vec<usize> = (0..ku + kv).collect();
    order.sort_by(|&a, &b| svd.eigenvalues[a].total_cmp(&svd.eigenvalues[b]));
    let mut basis = DMatrix::zeros(d, dim);
    for (j, &i) in order[..dim].iter().enumerate() {
        let coef = svd.eigenvectors.column(i);
        let w = u * coef.rows(0, ku);
        basis.column_mut(j).copy_from(&w);
    }
    orthonormal_columns(basis)
}

/// Growth of `Df^k` on the continued center bundle.
///
/// `E^{cu}` is pushed forward from `f^{-m}(x)` and `E^{cs}` pulled back from `f^{n+m}(x)`,
/// starting from the linear subspaces; `E^c` is their intersection along the orbit.
pub fn center_growth_profile(
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    n: usize,
    cfg: &GrowthConfig,
    exec: Exec,
) -> Result<CenterGrowth> {
    let dc = sp.dim_center;
    if dc == 0 {
        return Err(Error::precondition("E^c is trivial"));
    }
    if n == 0 || cfg.samples == 0 {
        return Err(Error::invalid("center growth needs n >= 1 and at least one sample"));
    }
    let d = f.dim();
    let m = cfg.continuation_steps;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.samples).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    let adapted = sp.adapted();
    let adapted_inv = sp.adapted_inv();
    let cu0 = coordinate_block(sp, &[SpectralClass::Center, SpectralClass::Unstable]);
    let cs0 = coordinate_block(sp, &[SpectralClass::Stable, SpectralClass::Center]);

    let per_sample = exec.map(starts.len(), |s| -> Result<(Vec<f64>, f64)> {
        // Orbit x_{-m} .. x_{n+m}; index i holds x_{i-m}.
        let mut orbit = vec![starts[s].clone()];
        for _ in 0..m {
            let prev = f.inverse(&orbit[0], 1e-9)?;
            orbit.insert(0, prev);
        }
        for _ in 0..n + m {
            let next = f.eval(orbit.last().expect("nonempty"));
            orbit.push(next);
        }
        let a: Vec<DMatrix<f64>> = orbit.iter().map(|x| adapted_inv * f.derivative(x) * adapted).collect();
        let total = orbit.len();
        // cu[i] spans E^cu(x_{i-m}) for i >= m.
        let mut cu = vec![DMatrix::zeros(0, 0); total];
        let mut frame = cu0.clone();
        for i in 0..=m + n {
            if i >= m {
                cu[i] = frame.clone();
            }
            frame = orthonormal_columns(&a[i] * &frame);
        }
        let mut cs = vec![DMatrix::zeros(0, 0); total];
        let mut frame = cs0.clone();
        for i in (m..total).rev() {
            if i <= m + n {
                cs[i] = frame.clone();
            }
            if i > 0 {
                let inv = a[i - 1]
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("singular derivative".into()))?;
                frame = orthonormal_columns(inv * &frame);
            }
        }
        let centers: Vec<DMatrix<f64>> = (m..=m + n).map(|i| intersect(&cu[i], &cs[i], dc)).collect();
        let mut log_norms = Vec::with_capacity(n);
        let mut product = DMatrix::<f64>::identity(dc, dc);
        let mut log_scale = 0.0;
        let mut residual: f64 = 0.0;
        for k in 0..n {
            let image = &a[m + k] * &centers[k];
            let next = &centers[k + 1];
            let restricted = next.transpose() * &image;
            let out = &image - next * &restricted;
            residual = residual.max(out.norm_2() / image.norm_2().max(f64::MIN_POSITIVE));
            product = restricted * product;
            let scale = product.norm_2();
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Numerical("center cocycle degenerated".into()));
            }
            product /= scale;
            log_scale += scale.ln();
            log_norms.push(log_scale);
        }
        Ok((log_norms, residual))
    });
    let mut profile = vec![f64::NEG_INFINITY; n];
    let mut residual: f64 = 0.0;
    for r in per_sample {
        let (norms, res) = r?;
        residual = residual.max(res);
        for (p, v) in profile.iter_mut().zip(norms) {
            *p = p.max(v);
        }
    }
    if residual > cfg.max_residual {
        return Err(Error::NoConvergence {
            iterations: m,
            detail: format!("continued center bundle lost invariance (residual {residual:e})"),
        });
    }
    let ks: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let (rate, fit) = if n >= 2 { least_squares(&ks, &profile) } else { (profile[0], 0.0) };
    Ok(CenterGrowth {
        log_profile: profile,
        rate,
        fit_residual: fit,
        invariance_residual: residual,
        samples: cfg.samples,
        continuation_steps: m,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyChain {
    /// `sum_{l > 0} l`, the Pesin entropy of volume.
    pub sum_positive: f64,
    /// Sum of the exponents attributed to `E^u`.
    pub sum_unstable: f64,
    /// `sum_{|lambda| > 1} log |lambda|` for `L`.
    pub h_top_l: f64,
    /// `h_top(f) = h_top(L)` by topological conjugacy.
    pub h_top_f: f64,
    pub defect_positive: f64,
    pub defect_unstable: f64,
    /// `sum_positive >= sum_unstable` up to `tol`.
    pub inequality_holds: bool,
    pub tol: f64,
}

pub fn entropy_chain_report(report: &ExponentReport, sp: &SpectralSplitting, tol: f64) -> EntropyChain {
    let sum_positive: f64 = report.exponents.iter().filter(|&&l| l > 0.0).sum();
    let sum_unstable: f64 = report.unstable_exponents.iter().sum();
    EntropyChain {
        sum_positive,
        sum_unstable,
        h_top_l: sp.h_top,
        h_top_f: sp.h_top,
        defect_positive: (sum_positive - sp.h_top).abs(),
        defect_unstable: (sum_unstable - sp.h_top).abs(),
        inequality_holds: sum_positive >= sum_unstable - tol,
        tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    NuhLike,
    RigidLike,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub zero: f64,
    pub nuh: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { zero: 1e-3, nuh: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub classification: Dichotomy,
    pub center_exponents: Vec<f64>,
    pub thresholds: Thresholds,
    /// Half of `min ||l_i| - |l_j||` over exponents of `L` with `l_i != ±l_j`.
    pub gap_epsilon: Option<f64>,
    /// Every exponent lies within `gap_epsilon` of the matching exponent of `L`.
    pub attribution_consistent: bool,
    pub reason: String,
}

/// Minimum orbit length for a classification.
pub const MIN_ORBIT: usize = 10_000;

/// `min ||l_i| - |l_j||` over pairs with `l_i != ±l_j`, halved.
pub fn spectral_gap_epsilon(log_moduli: &[f64]) -> Option<f64> {
    const SAME: f64 = 1e-9;
    let mut best: Option<f64> = None;
    for (i, a) in log_moduli.iter().enumerate() {
        for b in &log_moduli[i + 1..] {
            if (a - b).abs() < SAME || (a + b).abs() < SAME {
                continue;
            }
            let g = (a.abs() - b.abs()).abs();
            best = Some(best.map_or(g, |x: f64| x.min(g)));
        }
    }
    best.map(|g| g / 2.0)
}

pub fn dichotomy_classify(report: &ExponentReport, sp: &SpectralSplitting, thresholds: Thresholds) -> Result<DichotomyReport> {
    if !(thresholds.zero < thresholds.nuh) || thresholds.zero < 0.0 {
        return Err(Error::invalid("thresholds must satisfy 0 <= zero < nuh"));
    }
    if report.orbit_length < MIN_ORBIT {
        return Err(Error::precondition(format!(
            "classification needs an orbit of length >= {MIN_ORBIT}, got {}",
            report.orbit_length
        )));
    }
    let lin = sp.log_moduli();
    let gap = spectral_gap_epsilon(&lin);
    let consistent = match gap {
        Some(g) => report
            .exponents
            .iter()
            .zip(&lin)
            .all(|(a, b)| (a - b).abs() < g),
        None => true,
    };
    let c = &report.center_exponents;
    let (class, reason) = if !consistent {
        (
            Dichotomy::Inconclusive,
            "exponents moved by more than the spectral gap of L; attribution unreliable".to_string(),
        )
    } else if c.iter().all(|l| l.abs() <= thresholds.zero) {
        (Dichotomy::RigidLike, "all center exponents within the zero threshold".to_string())
    } else if c.iter().all(|l| l.abs() > thresholds.nuh) {
        (Dichotomy::NuhLike, "all center exponents beyond the NUH threshold".to_string())
    } else {
        (Dichotomy::Inconclusive, "center exponents between thresholds".to_string())
    };
    Ok(DichotomyReport {
        classification: class,
        center_exponents: c.clone(),
        thresholds,
        gap_epsilon: gap,
        attribution_consistent: consistent,
        reason,
    })
}
