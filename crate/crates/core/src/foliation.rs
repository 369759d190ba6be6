//! Local stable and unstable leaves and su-quadrilateral closing defects.
//!
//! A leaf at `x` is the graph `xi -> phi(xi)` over a disk in `E^s` (or `E^u`) with values
//! in the complementary coordinates of the linear splitting. The graph is found node by
//! node: `phi(xi)` solves `P_Q M^{-1} (f^N(x + M(xi, c)) - f^N(x)) = 0` by Newton, with the
//! depth `N` raised until the graph stops moving. Unstable leaves use `f^{-1}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffeo::{reduce, torus_diff, PerturbedDiffeo};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::spectral::{SpectralClass, SpectralSplitting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    #[serde(rename = "s")]
    Stable,
    #[serde(rename = "u")]
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeafConfig {
    pub r_leaf: f64,
    pub tol: f64,
    /// Chebyshev nodes per parameter axis.
    pub nodes: usize,
    pub max_depth: usize,
}

impl Default for LeafConfig {
    fn default() -> Self {
        LeafConfig {
            r_leaf: 0.2,
            tol: 1e-10,
            nodes: 17,
            max_depth: 150,
        }
    }
}

const NEWTON_MAX: usize = 30;

/// Tensor Chebyshev interpolant on `[-r, r]^p`, second-kind nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Chebyshev {
    r: f64,
    n: usize,
    p: usize,
}

impl Chebyshev {
    fn node(&self, j: usize) -> f64 {
        self.r * (std::f64::consts::PI * j as f64 / (self.n - 1) as f64).cos()
    }

    fn weight(&self, j: usize) -> f64 {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == self.n - 1 {
            0.5 * s
        } else {
            s
        }
    }

    fn len(&self) -> usize {
        self.n.pow(self.p as u32)
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.p];
        for a in (0..self.p).rev() {
            m[a] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    fn point(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).into_iter().map(|j| self.node(j)).collect()
    }

    /// Barycentric weights of the 1-d interpolant at `t`.
    fn basis(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for j in 0..self.n {
            if (t - self.node(j)).abs() < 1e-15 * self.r.max(1.0) {
                out[j] = 1.0;
                return out;
            }
        }
        let mut total = 0.0;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.weight(j) / (t - self.node(j));
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
        out
    }

    /// Differentiation matrix on the nodes.
    fn diff_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let x: Vec<f64> = (0..n).map(|j| self.node(j)).collect();
        let c: Vec<f64> = (0..n).map(|j| self.weight(j)).collect();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[(i, j)] = c[j] / c[i] / (x[i] - x[j]);
                }
            }
            let row_sum: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = -row_sum;
        }
        d
    }

    /// Interpolates vector-valued node data at `xi`.
    fn eval(&self, values: &[Vec<f64>], xi: &[f64]) -> Vec<f64> {
        let q = values.first().map_or(0, Vec::len);
        let bases: Vec<Vec<f64>> = xi.iter().map(|&t| self.basis(t)).collect();
        let mut out = vec![0.0; q];
        for (idx, v) in values.iter().enumerate() {
            let w: f64 = self.multi(idx).iter().enumerate().map(|(a, &j)| bases[a][j]).product();
            if w != 0.0 {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// Node values of the partial derivative along `axis`.
    fn differentiate(&self, values: &[Vec<f64>], axis: usize) -> Vec<Vec<f64>> {
        let d = self.diff_matrix();
        let stride = self.n.pow((self.p - 1 - axis) as u32);
        let q = values.first().map_or(0, Vec::len);
        (0..self.len())
            .map(|idx| {
                let m = self.multi(idx);
                let base = idx - m[axis] * stride;
                let mut out = vec![0.0; q];
                for k in 0..self.n {
                    let coef = d[(m[axis], k)];
                    for (o, x) in out.iter_mut().zip(&values[base + k * stride]) {
                        *o += coef * x;
                    }
                }
                out
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLeaf {
    pub base: Vec<f64>,
    pub kind: LeafKind,
    pub r_leaf: f64,
    pub depth: usize,
    /// Graph values (complementary adapted coordinates) at the Chebyshev nodes.
    pub graph: Vec<Vec<f64>>,
    pub graph_sup: f64,
    /// `max |phi_N - phi_{N-1}|` per depth.
    pub update_history: Vec<f64>,
    /// Median ratio of successive updates.
    pub contraction_ratio: Option<f64>,
    /// Image of the leaf against the leaf at the image point; `None` when not checked.
    pub invariance_residual: Option<f64>,
    /// `max(last update, invariance residual)`.
    pub residual: f64,
    cheb: Chebyshev,
    param: Vec<usize>,
    comp: Vec<usize>,
}

impl LocalLeaf {
    pub fn param_dim(&self) -> usize {
        self.param.len()
    }

    /// `phi(xi)`.
    pub fn graph_at(&self, xi: &[f64]) -> Vec<f64> {
        self.cheb.eval(&self.graph, xi)
    }

    /// Ambient displacement from the base to the leaf point over `xi`.
    pub fn displacement(&self, sp: &SpectralSplitting, xi: &[f64]) -> Vec<f64> {
        let v = embed(sp.dim, &self.param, xi, &self.comp, &self.graph_at(xi));
        (sp.adapted() * v).iter().cloned().collect()
    }

    /// Leaf point over `xi`, reduced to the torus.
    pub fn point(&self, sp: &SpectralSplitting, xi: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.base.iter().zip(self.displacement(sp, xi)).map(|(a, b)| a + b).collect();
        reduce(&mut p);
        p
    }

    /// Moves arc length `delta` (signed) along the first parameter axis from the base.
    /// Returns the end point and its parameter.
    pub fn travel(&self, sp: &SpectralSplitting, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = sp.adapted();
        let p = self.param_dim();
        let dphi = self.cheb.differentiate(&self.graph, 0);
        let speed = |t: f64| -> f64 {
            let mut xi = vec![0.0; p];
            xi[0] = t;
            let slope = self.cheb.eval(&dphi, &xi);
            let mut e = vec![0.0; p];
            e[0] = 1.0;
            let v = embed(sp.dim, &self.param, &e, &self.comp, &slope);
            (m * v).norm()
        };
        // dt/ds = 1 / |gamma'(t)|, RK4 with 64 steps.
        let steps = 64;
        let h = delta / steps as f64;
        let mut t = 0.0;
        for _ in 0..steps {
            let k1 = 1.0 / speed(t);
            let k2 = 1.0 / speed(t + 0.5 * h * k1);
            let k3 = 1.0 / speed(t + 0.5 * h * k2);
            let k4 = 1.0 / speed(t + h * k3);
            t += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            if t.abs() > self.r_leaf {
                return Err(Error::precondition(format!(
                    "leg of length {delta} leaves the local leaf of radius {}",
                    self.r_leaf
                )));
            }
        }
        let mut xi = vec![0.0; p];
        xi[0] = t;
        Ok((self.point(sp, &xi), xi))
    }
}

fn embed(d: usize, param: &[usize], xi: &[f64], comp: &[usize], c: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    for (&i, &x) in param.iter().zip(xi) {
        v[i] = x;
    }
    for (&i, &x) in comp.iter().zip(c) {
        v[i] = x;
    }
    v
}

fn classes(sp: &SpectralSplitting, kind: LeafKind) -> (Vec<usize>, Vec<usize>) {
    let s: Vec<usize> = sp.range(SpectralClass::Stable).collect();
    let c: Vec<usize> = sp.range(SpectralClass::Center).collect();
    let u: Vec<usize> = sp.range(SpectralClass::Unstable).collect();
    match kind {
        LeafKind::Stable => (s, c.into_iter().chain(u).collect()),
        LeafKind::Unstable => (u, s.into_iter().chain(c).collect()),
    }
}

/// Orbit data for one direction of time.
struct Orbit<'a> {
    f: &'a PerturbedDiffeo,
    kind: LeafKind,
    points: Vec<Vec<f64>>,
}

impl<'a> Orbit<'a> {
    fn new(f: &'a PerturbedDiffeo, x: &[f64], kind: LeafKind, len: usize) -> Result<Self> {
        let mut points = vec![x.to_vec()];
        for _ in 0..len {
            let last = points.last().expect("nonempty");
            let next = match kind {
                LeafKind::Stable => f.eval(last),
                LeafKind::Unstable => f.inverse(last, 1e-9)?,
            };
            points.push(next);
        }
        Ok(Orbit { f, kind, points })
    }

    /// `delta_{k+1}` from `delta_k`.
    fn step(&self, k: usize, delta: &[f64]) -> Vec<f64> {
        match self.kind {
            LeafKind::Stable => self.f.step_delta(&self.points[k], delta),
            LeafKind::Unstable => self.f.inverse_step_delta(&self.points[k], delta),
        }
    }

    /// Derivative of one step at `y_k = x_k + delta_k`, given `y_{k+1}`.
    fn jacobian(&self, yk: &[f64], yk1: &[f64]) -> DMatrix<f64> {
        match self.kind {
            LeafKind::Stable => self.f.derivative(yk),
            LeafKind::Unstable => self.f.derivative_inverse(yk1),
        }
    }
}

fn shifted(x: &[f64], d: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
    reduce(&mut y);
    y
}

/// Newton solve of the depth-`n` boundary condition at one node.
fn solve_node(
    orbit: &Orbit,
    sp: &SpectralSplitting,
    param: &[usize],
    comp: &[usize],
    xi: &[f64],
    start: &[f64],
    depth: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let m = sp.adapted();
    let m_inv = sp.adapted_inv();
    let d = sp.dim;
    let q = comp.len();
    let mut c = DVector::from_column_slice(start);
    for _ in 0..NEWTON_MAX {
        let v = embed(d, param, xi, comp, c.as_slice());
        let mut delta: Vec<f64> = (m * v).iter().cloned().collect();
        let mut jac = m.clone();
        for k in 0..depth {
            let yk = shifted(&orbit.points[k], &delta);
            let next = orbit.step(k, &delta);
            let yk1 = shifted(&orbit.points[k + 1], &next);
            jac = orbit.jacobian(&yk, &yk1) * jac;
            delta = next;
        }
        let w = m_inv * DVector::from_vec(delta);
        let a = m_inv * jac;
        let fval = DVector::from_fn(q, |i, _| w[comp[i]]);
        let jq = DMatrix::from_fn(q, q, |i, j| a[(comp[i], comp[j])]);
        let step = jq
            .lu()
            .solve(&fval)
            .ok_or_else(|| Error::Numerical("singular leaf Jacobian".into()))?;
        c -= &step;
        if !c.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.amax() <= 1e-3 * tol {
            return Ok(c.iter().cloned().collect());
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX,
        detail: format!("leaf Newton solve at depth {depth}"),
    })
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    Some(s[s.len() / 2])
}

/// Graph transform without the invariance check.
fn leaf_core(f: &PerturbedDiffeo, sp: &SpectralSplitting, x: &[f64], kind: LeafKind, cfg: &LeafConfig) -> Result<LocalLeaf> {
    if f.dim() != sp.dim || x.len() != sp.dim {
        return Err(Error::invalid("dimension mismatch"));
    }
    if !(cfg.r_leaf > 0.0) || !(cfg.tol > 0.0) || cfg.nodes < 3 || cfg.max_depth < 2 {
        return Err(Error::invalid("leaf config needs r_leaf > 0, tol > 0, nodes >= 3, max_depth >= 2"));
    }
    let (param, comp) = classes(sp, kind);
    if param.is_empty() || param.len() > 2 || comp.is_empty() {
        return Err(Error::precondition("leaves are computed for 1- and 2-dimensional E^s, E^u only"));
    }
    let cheb = Chebyshev {
        r: cfg.r_leaf,
        n: cfg.nodes,
        p: param.len(),
    };
    let mut base = x.to_vec();
    reduce(&mut base);
    let orbit = Orbit::new(f, &base, kind, cfg.max_depth)?;
    let nodes: Vec<Vec<f64>> = (0..cheb.len()).map(|i| cheb.point(i)).collect();
    let mut graph = vec![vec![0.0; comp.len()]; nodes.len()];
    let mut history = Vec::new();
    let floor = 1e-3 * cfg.tol;
    for depth in 1..=cfg.max_depth {
        let mut next = Vec::with_capacity(nodes.len());
        for (xi, start) in nodes.iter().zip(&graph) {
            next.push(solve_node(&orbit, sp, &param, &comp, xi, start, depth, cfg.tol)?);
        }
        let update = next
            .iter()
            .zip(&graph)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        graph = next;
        history.push(update);
        let sup = graph.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(sup <= cfg.r_leaf) {
            return Err(Error::NoConvergence {
                iterations: depth,
                detail: format!("graph left the leaf box (sup {sup:e}, last update {update:e})"),
            });
        }
        if depth >= 2 && update <= cfg.tol {
            let ratios: Vec<f64> = history
                .windows(2)
                .filter(|w| w[0] > floor && w[1] > floor)
                .map(|w| w[1] / w[0])
                .collect();
            return Ok(LocalLeaf {
                base,
                kind,
                r_leaf: cfg.r_leaf,
                depth,
                graph_sup: sup,
                graph,
                contraction_ratio: median(&ratios),
                update_history: history,
                invariance_residual: None,
                residual: update,
                cheb,
                param,
                comp,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_depth,
        detail: format!(
            "graph transform did not settle (last update {:e})",
            history.last().copied().unwrap_or(f64::NAN)
        ),
    })
}

/// Sup over interior nodes of `|phi'(w_P) - w_Q|` where `w` is the image of a leaf point.
fn invariance_defect(f: &PerturbedDiffeo, sp: &SpectralSplitting, leaf: &LocalLeaf, image: &LocalLeaf) -> f64 {
    let m_inv = sp.adapted_inv();
    let mut worst: f64 = 0.0;
    for idx in 0..leaf.cheb.len() {
        let xi: Vec<f64> = leaf.cheb.point(idx).iter().map(|t| 0.5 * t).collect();
        let delta = leaf.displacement(sp, &xi);
        let moved = match leaf.kind {
            LeafKind::Stable => f.step_delta(&leaf.base, &delta),
            LeafKind::Unstable => f.inverse_step_delta(&leaf.base, &delta),
        };
        let w = m_inv * DVector::from_vec(moved);
        let wp: Vec<f64> = leaf.param.iter().map(|&i| w[i]).collect();
        if wp.iter().any(|t| t.abs() > image.r_leaf) {
            return f64::INFINITY;
        }
        let expected = image.graph_at(&wp);
        for (k, &i) in leaf.comp.iter().enumerate() {
            worst = worst.max((w[i] - expected[k]).abs());
        }
    }
    worst
}

/// Leaf with the invariance check against the leaf at `f(x)` (stable) or `f^{-1}(x)` (unstable).
pub fn local_leaf(f: &PerturbedDiffeo, sp: &SpectralSplitting, x: &[f64], kind: LeafKind, cfg: &LeafConfig) -> Result<LocalLeaf> {
    let mut leaf = leaf_core(f, sp, x, kind, cfg)?;
    let image_base = match kind {
        LeafKind::Stable => f.eval(&leaf.base),
        LeafKind::Unstable => f.inverse(&leaf.base, 1e-9)?,
    };
    let image = leaf_core(f, sp, &image_base, kind, cfg)?;
    let defect = invariance_defect(f, sp, &leaf, &image);
    leaf.invariance_residual = Some(defect);
    leaf.residual = leaf.residual.max(defect);
    Ok(leaf)
}

pub fn local_stable_leaf(f: &PerturbedDiffeo, sp: &SpectralSplitting, x: &[f64], cfg: &LeafConfig) -> Result<LocalLeaf> {
    local_leaf(f, sp, x, LeafKind::Stable, cfg)
}

pub fn local_unstable_leaf(f: &PerturbedDiffeo, sp: &SpectralSplitting, x: &[f64], cfg: &LeafConfig) -> Result<LocalLeaf> {
    local_leaf(f, sp, x, LeafKind::Unstable, cfg)
}

/// Memoized leaves for one map and configuration; keys are the exact bits of the base point.
pub struct LeafCache {
    map: Mutex<HashMap<(LeafKind, Vec<u64>), Arc<LocalLeaf>>>,
    spill: Option<PathBuf>,
}

impl LeafCache {
    pub fn new() -> Self {
        LeafCache {
            map: Mutex::new(HashMap::new()),
            spill: None,
        }
    }

    /// Also reads and writes leaves as JSON files under `dir/<fingerprint>/`.
    pub fn with_spill(dir: PathBuf, f: &PerturbedDiffeo, cfg: &LeafConfig) -> Result<Self> {
        let dir = dir.join(fingerprint(f, cfg)?);
        std::fs::create_dir_all(&dir)?;
        Ok(LeafCache {
            map: Mutex::new(HashMap::new()),
            spill: Some(dir),
        })
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        f: &PerturbedDiffeo,
        sp: &SpectralSplitting,
        x: &[f64],
        kind: LeafKind,
        cfg: &LeafConfig,
    ) -> Result<Arc<LocalLeaf>> {
        let mut base = x.to_vec();
        reduce(&mut base);
        let key = (kind, base.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
        if let Some(l) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(l.clone());
        }
        let file = self.spill.as_ref().map(|dir| {
            let tag = match kind {
                LeafKind::Stable => "s",
                LeafKind::Unstable => "u",
            };
            let hex: String = key.1.iter().map(|b| format!("{b:016x}")).collect();
            dir.join(format!("{tag}_{hex}.json"))
        });
        let leaf = match file.as_ref().filter(|p| p.exists()) {
            Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
            None => {
                let leaf = local_leaf(f, sp, &base, kind, cfg)?;
                if let Some(p) = &file {
                    std::fs::write(p, serde_json::to_vec(&leaf)?)?;
                }
                leaf
            }
        };
        let leaf = Arc::new(leaf);
        self.map.lock().expect("cache lock").insert(key, leaf.clone());
        Ok(leaf)
    }
}

impl Default for LeafCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Hex digest of the map and leaf configuration, used to separate spill directories.
fn fingerprint(f: &PerturbedDiffeo, cfg: &LeafConfig) -> Result<String> {
    use sha2::{Digest, Sha256};
    let rows = f.automorphism().matrix().to_i64_rows();
    let shears: Vec<(usize, &crate::trig::TrigPoly)> = f.shears().iter().map(|s| (s.target(), s.phi())).collect();
    let payload = serde_json::to_vec(&(rows, f.epsilon(), shears, cfg))?;
    let digest = Sha256::digest(&payload);
    Ok(digest.iter().take(12).map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadrilateralDefect {
    pub base: Vec<f64>,
    pub delta_s: f64,
    pub delta_u: f64,
    pub corners: Vec<Vec<f64>>,
    /// Ambient `end - base` on the torus.
    pub gap: Vec<f64>,
    pub gap_center: Vec<f64>,
    pub gap_norm: f64,
    pub gap_center_norm: f64,
    pub max_leaf_residual: f64,
}

/// Travels `delta_s` along `W^s`, `delta_u` along `W^u`, then back, and reports the gap.
pub fn su_quadrilateral(
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    x: &[f64],
    delta_s: f64,
    delta_u: f64,
    cfg: &LeafConfig,
    cache: &LeafCache,
) -> Result<QuadrilateralDefect> {
    let mut base = x.to_vec();
    reduce(&mut base);
    let legs = [
        (LeafKind::Stable, delta_s),
        (LeafKind::Unstable, delta_u),
        (LeafKind::Stable, -delta_s),
        (LeafKind::Unstable, -delta_u),
    ];
    let mut corners = vec![base.clone()];
    let mut residual: f64 = 0.0;
    let mut here = base.clone();
    for (kind, delta) in legs {
        let leaf = cache.get_or_compute(f, sp, &here, kind, cfg)?;
        residual = residual.max(leaf.residual);
        here = leaf.travel(sp, delta)?.0;
        corners.push(here.clone());
    }
    let gap = torus_diff(&here, &base);
    let gc: Vec<f64> = (sp.coordinate_map(SpectralClass::Center) * DVector::from_column_slice(&gap))
        .iter()
        .cloned()
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(QuadrilateralDefect {
        base,
        delta_s,
        delta_u,
        corners,
        gap_norm: norm(&gap),
        gap_center_norm: norm(&gc),
        gap,
        gap_center: gc,
        max_leaf_residual: residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityScore {
    /// Median of `|gap_c| / (delta_s delta_u)`.
    pub score: f64,
    pub table: Vec<QuadrilateralDefect>,
}

/// Minimum number of sample points.
pub const MIN_SAMPLES: usize = 10;

/// Quadrilaterals at every sample and every `delta` (`delta_s = delta_u = delta`).
pub fn integrability_score(
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    samples: &[Vec<f64>],
    deltas: &[f64],
    cfg: &LeafConfig,
    cache: &LeafCache,
    exec: Exec,
) -> Result<IntegrabilityScore> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!("integrability score needs at least {MIN_SAMPLES} samples")));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("deltas must be positive"));
    }
    let jobs: Vec<(usize, f64)> = (0..samples.len()).flat_map(|i| deltas.iter().map(move |&d| (i, d))).collect();
    let rows = exec.map(jobs.len(), |j| {
        let (i, d) = jobs[j];
        su_quadrilateral(f, sp, &samples[i], d, d, cfg, cache)
    });
    let table: Vec<QuadrilateralDefect> = rows.into_iter().collect::<Result<_>>()?;
    let normalized: Vec<f64> = table
        .iter()
        .map(|q| q.gap_center_norm / (q.delta_s * q.delta_u).abs())
        .collect();
    let mut sorted = normalized.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let score = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(IntegrabilityScore { score, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::PerturbationSpec;
    use crate::examples;
    use crate::spectral::spectral_splitting;

    #[test]
    fn chebyshev_reproduces_polynomials() {
        let c = Chebyshev { r: 0.3, n: 9, p: 2 };
        let f = |x: &[f64]| x[0].powi(3) - 2.0 * x[0] * x[1] + x[1].powi(2);
        let vals: Vec<Vec<f64>> = (0..c.len()).map(|i| vec![f(&c.point(i))]).collect();
        let at = [0.11, -0.07];
        assert!((c.eval(&vals, &at)[0] - f(&at)).abs() < 1e-14);
        let dx = c.differentiate(&vals, 0);
        let exact = 3.0 * at[0] * at[0] - 2.0 * at[1];
        assert!((c.eval(&dx, &at)[0] - exact).abs() < 1e-12);
        let dy = c.differentiate(&vals, 1);
        assert!((c.eval(&dy, &at)[0] - (-2.0 * at[0] + 2.0 * at[1])).abs() < 1e-12);
    }

    #[test]
    fn linear_leaves_are_flat_and_close_up() {
        let l = examples::quartic_companion();
        let sp = spectral_splitting(&l).unwrap();
        let f = PerturbedDiffeo::linear(l);
        let cfg = LeafConfig::default();
        let leaf = local_stable_leaf(&f, &sp, &[0.3, 0.1, 0.7, 0.2], &cfg).unwrap();
        assert!(leaf.graph_sup < 1e-12);
        let cache = LeafCache::new();
        let q = su_quadrilateral(&f, &sp, &[0.3, 0.1, 0.7, 0.2], 0.05, 0.05, &cfg, &cache).unwrap();
        assert!(q.gap_norm < 1e-12, "{q:?}");
    }

    #[test]
    fn perturbed_leaf_converges() {
        let l = examples::quartic_symplectic();
        let sp = spectral_splitting(&l).unwrap();
        let f = PerturbedDiffeo::new(l, &PerturbationSpec::symplectic_double_shear(1e-3)).unwrap();
        let leaf = local_unstable_leaf(&f, &sp, &[0.3, 0.1, 0.7, 0.2], &LeafConfig::default()).unwrap();
        assert!(leaf.residual < 1e-8, "{}", leaf.residual);
        assert!(leaf.graph_sup <= 10.0 * 1e-3);
        assert!(leaf.graph_sup > 0.0);
    }
}
