//! Grid check of the dominated splitting of `f` in the coordinates adapted to `L`.
//!
//! With `A = M^{-1} Df M` and `B = M^{-1} Df^{-1} M` (`M = [B_s | B_c | B_u]`), the
//! unstable cone `|v_sc| <= a |v_u|` is forward invariant at `x` when
//! `|A_{sc,u}| / a + |A_{sc,sc}| <= m(A_uu) - |A_{u,sc}| a`, where `m` is the conorm. The
//! stable cone is treated the same way with `B`. Rates:
//!
//! * `nu_hat = min_x m(A_uu) - |A_{u,sc}| a`
//! * `nu = max_x 1 / (m(B_ss) - |B_{s,cu}| a)`
//! * `gamma = min_x m(A_cc) - |A_{c,su}| a`, `gamma_hat = max_x |A_cc| + |A_{c,su}| a`
//!
//! The margin subtracts `pad * (1 / grid_n) * D2` where `D2` bounds the second
//! derivative of `f` from the shear coefficients. `pad` absorbs the conditioning of the
//! adapted basis; the padding is a heuristic, not a rigorous enclosure.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diffeo::PerturbedDiffeo;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par::Exec;
use crate::spectral::{Norm2, SpectralClass, SpectralSplitting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeConfig {
    pub grid_n: usize,
    pub lipschitz_pad: f64,
    /// Candidate apertures; the one with the largest slack is reported.
    pub apertures: Vec<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            grid_n: 8,
            lipschitz_pad: 1.0,
            apertures: (0..13).map(|i| 0.01 * 2f64.powi(i)).collect(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub grid_n: usize,
    pub points: usize,
    pub aperture: f64,
    pub nu: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub nu_hat: f64,
    /// Smallest of the rate-chain gaps and cone-invariance slacks.
    pub slack: f64,
    /// `lipschitz_pad * D2 / grid_n`.
    pub padding: f64,
    pub margin: f64,
    pub verified: bool,
    pub worst_point: Vec<f64>,
    pub worst_constraint: String,
    pub padding_is_heuristic: bool,
}

/// Block norms at one point.
#[derive(Debug, Clone, Copy)]
struct PointData {
    mu_u: f64,
    a_u_sc: f64,
    a_sc_u: f64,
    a_sc_sc: f64,
    ms: f64,
    b_s_cu: f64,
    b_cu_s: f64,
    b_cu_cu: f64,
    mc: f64,
    nc: f64,
    a_c_su: f64,
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

struct Index {
    s: Vec<usize>,
    c: Vec<usize>,
    u: Vec<usize>,
    sc: Vec<usize>,
    cu: Vec<usize>,
    su: Vec<usize>,
}

impl Index {
    fn new(sp: &SpectralSplitting) -> Self {
        let s: Vec<usize> = sp.range(SpectralClass::Stable).collect();
        let c: Vec<usize> = sp.range(SpectralClass::Center).collect();
        let u: Vec<usize> = sp.range(SpectralClass::Unstable).collect();
        let cat = |a: &[usize], b: &[usize]| a.iter().chain(b).cloned().collect::<Vec<_>>();
        Index {
            sc: cat(&s, &c),
            cu: cat(&c, &u),
            su: cat(&s, &u),
            s,
            c,
            u,
        }
    }
}

fn point_data(a: &DMatrix<f64>, b: &DMatrix<f64>, ix: &Index) -> PointData {
    let has_c = !ix.c.is_empty();
    PointData {
        mu_u: block(a, &ix.u, &ix.u).conorm_2(),
        a_u_sc: block(a, &ix.u, &ix.sc).norm_2(),
        a_sc_u: block(a, &ix.sc, &ix.u).norm_2(),
        a_sc_sc: block(a, &ix.sc, &ix.sc).norm_2(),
        ms: block(b, &ix.s, &ix.s).conorm_2(),
        b_s_cu: block(b, &ix.s, &ix.cu).norm_2(),
        b_cu_s: block(b, &ix.cu, &ix.s).norm_2(),
        b_cu_cu: block(b, &ix.cu, &ix.cu).norm_2(),
        mc: if has_c { block(a, &ix.c, &ix.c).conorm_2() } else { 1.0 },
        nc: if has_c { block(a, &ix.c, &ix.c).norm_2() } else { 1.0 },
        a_c_su: if has_c { block(a, &ix.c, &ix.su).norm_2() } else { 0.0 },
    }
}

struct Evaluated {
    nu: f64,
    gamma: f64,
    gamma_hat: f64,
    nu_hat: f64,
    slack: f64,
    worst: usize,
    worst_constraint: &'static str,
}

fn evaluate(data: &[PointData], alpha: f64) -> Evaluated {
    let mut nu: f64 = 0.0;
    let mut nu_hat = f64::INFINITY;
    let mut gamma = f64::INFINITY;
    let mut gamma_hat: f64 = 0.0;
    let mut cone_slack = f64::INFINITY;
    let mut worst = 0;
    let mut worst_constraint = "unstable cone";
    for (i, p) in data.iter().enumerate() {
        let expand = p.mu_u - p.a_u_sc * alpha;
        let contract_inv = p.ms - p.b_s_cu * alpha;
        let nu_x = if contract_inv > 0.0 { 1.0 / contract_inv } else { f64::INFINITY };
        let g_x = p.mc - p.a_c_su * alpha;
        let gh_x = p.nc + p.a_c_su * alpha;
        nu = nu.max(nu_x);
        nu_hat = nu_hat.min(expand);
        gamma = gamma.min(g_x);
        gamma_hat = gamma_hat.max(gh_x);
        let checks = [
            (expand - (p.a_sc_u / alpha + p.a_sc_sc), "unstable cone"),
            (contract_inv - (p.b_cu_s / alpha + p.b_cu_cu), "stable cone"),
            (expand - gh_x, "nu_hat > gamma_hat"),
            (g_x - nu_x, "gamma > nu"),
        ];
        for (v, name) in checks {
            if v < cone_slack {
                cone_slack = v;
                worst = i;
                worst_constraint = name;
            }
        }
    }
    let chain = [
        (gamma - nu, "gamma > nu"),
        (nu_hat - gamma_hat, "nu_hat > gamma_hat"),
        (1.0 - nu, "nu < 1"),
        (nu_hat - 1.0, "nu_hat > 1"),
    ];
    let mut slack = cone_slack;
    for (v, name) in chain {
        if v < slack {
            slack = v;
            worst_constraint = name;
        }
    }
    Evaluated {
        nu,
        gamma,
        gamma_hat,
        nu_hat,
        slack,
        worst,
        worst_constraint,
    }
}

/// Checks cone invariance and the rate chain `nu < gamma <= gamma_hat < nu_hat`,
/// `nu < 1 < nu_hat` on a `grid_n^d` grid.
pub fn certify_partial_hyperbolicity(
    f: &PerturbedDiffeo,
    splitting: &SpectralSplitting,
    config: &ConeConfig,
) -> Result<ConeCertificate> {
    let d = f.dim();
    if splitting.dim != d {
        return Err(Error::invalid("splitting dimension does not match the map"));
    }
    if splitting.dim_stable == 0 || splitting.dim_unstable == 0 {
        return Err(Error::precondition("partial hyperbolicity needs nontrivial E^s and E^u"));
    }
    if config.apertures.is_empty() || config.apertures.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("cone apertures must be positive"));
    }
    let grid = Grid::new(d, config.grid_n)?;
    let m = splitting.adapted();
    let m_inv = splitting.adapted_inv();
    let ix = Index::new(splitting);
    let data: Vec<PointData> = config.exec.map(grid.len(), |idx| {
        let x = grid.point(idx);
        let a = m_inv * f.derivative(&x) * m;
        let b = m_inv * f.derivative_inverse(&x) * m;
        point_data(&a, &b, &ix)
    });

    let padding = config.lipschitz_pad * f.second_derivative_bound() / config.grid_n as f64;
    let mut best: Option<(f64, Evaluated)> = None;
    for &alpha in &config.apertures {
        let e = evaluate(&data, alpha);
        if best.as_ref().is_none_or(|b| e.slack > b.1.slack) {
            best = Some((alpha, e));
        }
    }
    let (aperture, e) = best.expect("apertures are nonempty");
    let margin = e.slack - padding;
    let chain_ok = e.nu < e.gamma && e.gamma <= e.gamma_hat && e.gamma_hat < e.nu_hat && e.nu < 1.0 && 1.0 < e.nu_hat;
    Ok(ConeCertificate {
        grid_n: config.grid_n,
        points: grid.len(),
        aperture,
        nu: e.nu,
        gamma: e.gamma,
        gamma_hat: e.gamma_hat,
        nu_hat: e.nu_hat,
        slack: e.slack,
        padding,
        margin,
        verified: chain_ok && margin > 0.0,
        worst_point: grid.point(e.worst),
        worst_constraint: e.worst_constraint.to_string(),
        padding_is_heuristic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::PerturbationSpec;
    use crate::examples;
    use crate::spectral::spectral_splitting;

    fn quick() -> ConeConfig {
        ConeConfig {
            grid_n: 4,
            exec: Exec::Sequential,
            ..ConeConfig::default()
        }
    }

    #[test]
    fn linear_rates_are_spectral() {
        let l = examples::quartic_companion();
        let sp = spectral_splitting(&l).unwrap();
        let cert = certify_partial_hyperbolicity(&PerturbedDiffeo::linear(l), &sp, &quick()).unwrap();
        assert!(cert.verified);
        assert!((cert.nu - sp.rho_s_max.unwrap()).abs() < 1e-12);
        assert!((cert.nu_hat - sp.rho_u_min.unwrap()).abs() < 1e-12);
        assert!((cert.gamma - 1.0).abs() < 1e-12 && (cert.gamma_hat - 1.0).abs() < 1e-12);
        assert_eq!(cert.padding, 0.0);
    }

    #[test]
    fn huge_perturbation_fails() {
        let l = examples::quartic_symplectic();
        let sp = spectral_splitting(&l).unwrap();
        let f = PerturbedDiffeo::new(l, &PerturbationSpec::symplectic_double_shear(10.0)).unwrap();
        let cert = certify_partial_hyperbolicity(&f, &sp, &quick()).unwrap();
        assert!(!cert.verified);
        assert_eq!(cert.worst_point.len(), 4);
    }

    #[test]
    fn anosov_without_stable_part_is_rejected() {
        let id = crate::lattice::LatticeAutomorphism::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sp = spectral_splitting(&id).unwrap();
        assert!(certify_partial_hyperbolicity(&PerturbedDiffeo::linear(id), &sp, &quick()).is_err());
    }
}
