//! Experiment manifests, the full pipeline, and report bundles.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone::{certify_partial_hyperbolicity, ConeCertificate, ConeConfig};
use crate::conjugacy::{
    conjugacy_residual, hc_pairings, partial_sum_hc, random_points, solve_hs, solve_hu, ComponentSolution,
    ConjugacyField, PairingReport, ResidualReport, Sampler, SolverConfig,
};
use crate::diffeo::{PerturbationKind, PerturbationSpec, PerturbedDiffeo};
use crate::error::{Error, Result};
use crate::foliation::{integrability_score, IntegrabilityScore, LeafCache, LeafConfig};
use crate::io::{csv_string, read_json, write_json, MatrixSpec};
use crate::lattice::{classify, ClassificationReport, LatticeAutomorphism};
use crate::lyapunov::{
    center_growth_profile, dichotomy_classify, dyadic_checkpoints, entropy_chain_report, oseledets_seeds,
    CenterGrowth, DichotomyReport, EntropyChain, ExponentReport, GrowthConfig, Thresholds, MIN_ORBIT,
};
use crate::mollifier::TestFunction;
use crate::par::Exec;
use crate::spectral::{spectral_splitting, SpectralClass, SpectralSplitting};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Either a full shear specification or `{"translation": [v...]}`, the map `x -> Lx + (L - I)v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerturbationInput {
    Translation { translation: Vec<f64> },
    Spec(PerturbationSpec),
}

impl Default for PerturbationInput {
    fn default() -> Self {
        PerturbationInput::Spec(PerturbationSpec::none())
    }
}

impl PerturbationInput {
    pub fn resolve(&self, l: &LatticeAutomorphism) -> Result<PerturbationSpec> {
        match self {
            PerturbationInput::Translation { translation } => {
                if translation.len() != l.dim() {
                    return Err(Error::invalid("translation vector has the wrong length"));
                }
                Ok(PerturbationSpec::translation(l, translation))
            }
            PerturbationInput::Spec(s) if s.shears.is_empty() && s.epsilon > 0.0 => {
                // omitted shears mean the default double shear
                if s.kind == PerturbationKind::Symplectic && l.dim() == 4 {
                    Ok(PerturbationSpec::symplectic_double_shear(s.epsilon))
                } else {
                    Err(Error::invalid("epsilon > 0 but no shears given"))
                }
            }
            PerturbationInput::Spec(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    #[serde(flatten)]
    pub config: SolverConfig,
    /// `H_c = 0` in the residual.
    pub leaf_conjugacy: bool,
    /// Number of center partial-sum terms.
    pub hc_terms: usize,
    /// Write the grid field as CSV.
    pub write_field: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            config: SolverConfig::default(),
            leaf_conjugacy: true,
            hc_terms: 20,
            write_field: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestFunctionSpec {
    pub modes: usize,
    pub k_max: i64,
    pub theta: f64,
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        TestFunctionSpec {
            modes: 4,
            k_max: 2,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsSection {
    pub cone: ConeConfig,
    pub orbit_length: usize,
    /// Number of independent orbits (seeds `seed, seed + 1, ...`).
    pub orbits: usize,
    pub thresholds: Thresholds,
    pub growth_steps: usize,
    pub growth: GrowthConfig,
    pub leaf: LeafConfig,
    pub samples: usize,
    pub deltas: Vec<f64>,
    pub test_function: TestFunctionSpec,
    pub sampler: Sampler,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            cone: ConeConfig::default(),
            orbit_length: MIN_ORBIT,
            orbits: 2,
            thresholds: Thresholds::default(),
            growth_steps: 100,
            growth: GrowthConfig::default(),
            leaf: LeafConfig::default(),
            samples: 10,
            deltas: vec![0.05],
            test_function: TestFunctionSpec::default(),
            sampler: Sampler::Grid { n: 8 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub perturbation: PerturbationInput,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub version: Option<String>,
    /// Free-form, copied to `run_info.json` only.
    #[serde(default, skip_serializing)]
    pub timestamps: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(l: &LatticeAutomorphism, perturbation: PerturbationInput) -> Self {
        Manifest {
            matrix: MatrixSpec::from_automorphism(l),
            perturbation,
            solver: SolverSection::default(),
            diagnostics: DiagnosticsSection::default(),
            seed: 0,
            version: Some(VERSION.to_string()),
            timestamps: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut v: serde_json::Value = read_json(path)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("schema");
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn build(&self) -> Result<(LatticeAutomorphism, SpectralSplitting, PerturbedDiffeo)> {
        let l = self.matrix.to_automorphism()?;
        let sp = spectral_splitting(&l)?;
        let spec = self.perturbation.resolve(&l)?;
        let f = PerturbedDiffeo::new(l.clone(), &spec)?;
        Ok((l, sp, f))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    pub exec: Exec,
    pub cache_dir: Option<PathBuf>,
    /// Written to `run_info.json` only.
    pub timestamp: Option<String>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOutput {
    pub matrix: MatrixSpec,
    pub char_poly: Vec<serde_json::Value>,
    pub classification: ClassificationReport,
    pub r_l: f64,
    pub d_stable: f64,
    pub d_unstable: f64,
    pub h_top: f64,
    pub spectral: SpectralSplitting,
}

pub fn classify_output(l: &LatticeAutomorphism) -> Result<ClassifyOutput> {
    let sp = spectral_splitting(l)?;
    Ok(ClassifyOutput {
        matrix: MatrixSpec::from_automorphism(l),
        char_poly: crate::io::poly_to_json(l.char_poly()),
        classification: classify(l)?,
        r_l: sp.r_l,
        d_stable: sp.d_stable,
        d_unstable: sp.d_unstable,
        h_top: sp.h_top,
        spectral: sp,
    })
}

/// Checks the cone certificate; fails with `NotCertified` unless `force`.
pub fn certify(f: &PerturbedDiffeo, sp: &SpectralSplitting, cfg: &ConeConfig, force: bool) -> Result<ConeCertificate> {
    let cert = certify_partial_hyperbolicity(f, sp, cfg)?;
    if !cert.verified && !force {
        return Err(Error::NotCertified(format!(
            "cone margin {:.3e} (slack {:.3e}, padding {:.3e}) at {:?}, constraint {}",
            cert.margin, cert.slack, cert.padding, cert.worst_point, cert.worst_constraint
        )));
    }
    Ok(cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyOutput {
    pub h_u: ComponentSolution,
    pub h_s: ComponentSolution,
    /// Grid means in adapted coordinates.
    pub h_u_mean: Vec<f64>,
    pub h_s_mean: Vec<f64>,
    /// `(v_s, v_u)` for translation manifests.
    pub translation_expected: Option<(Vec<f64>, Vec<f64>)>,
    pub field: ConjugacyField,
    pub residual: ResidualReport,
}

pub fn solve(manifest: &Manifest, f: &PerturbedDiffeo, sp: &SpectralSplitting, exec: Exec) -> Result<ConjugacyOutput> {
    let mut cfg = manifest.solver.config.clone();
    cfg.exec = exec;
    let hu = solve_hu(f, sp, &cfg)?;
    let hs = solve_hs(f, sp, &cfg)?;
    let h_c = if manifest.solver.leaf_conjugacy || sp.dim_center == 0 {
        None
    } else {
        Some(partial_sum_hc(f, sp, manifest.solver.hc_terms.max(1), &cfg)?.field)
    };
    let field = ConjugacyField::new(&hs, &hu, h_c, sp);
    let residual = conjugacy_residual(f, sp, &field, exec)?;
    let translation_expected = match &manifest.perturbation {
        PerturbationInput::Translation { translation } => {
            let c = sp.coordinates(translation);
            let part = |class| sp.range(class).map(|i| c[i]).collect::<Vec<f64>>();
            Some((part(SpectralClass::Stable), part(SpectralClass::Unstable)))
        }
        PerturbationInput::Spec(_) => None,
    };
    Ok(ConjugacyOutput {
        h_u_mean: hu.field.mean(),
        h_s_mean: hs.field.mean(),
        h_u: hu,
        h_s: hs,
        translation_expected,
        field,
        residual,
    })
}

/// CSV of grid points and the ambient `H_s`, `H_u` parts.
pub fn field_csv(out: &ConjugacyOutput, sp: &SpectralSplitting) -> Result<String> {
    let grid = out.field.h_s.grid();
    let d = grid.dim();
    let bs = sp.basis(SpectralClass::Stable);
    let bu = sp.basis(SpectralClass::Unstable);
    let mut header: Vec<String> = (0..d).map(|i| format!("x{}", i + 1)).collect();
    header.extend((0..d).map(|i| format!("hs{}", i + 1)));
    header.extend((0..d).map(|i| format!("hu{}", i + 1)));
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let mut r = grid.point(i);
            let s = &bs * DVector::from_vec(out.field.h_s.value(i));
            let u = &bu * DVector::from_vec(out.field.h_u.value(i));
            r.extend(s.iter());
            r.extend(u.iter());
            r
        })
        .collect();
    csv_string(&header, &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentsOutput {
    pub reports: Vec<ExponentReport>,
    /// Largest difference between orbits, per exponent index.
    pub seed_spread: f64,
    pub entropy: EntropyChain,
    pub center_growth: Option<CenterGrowth>,
    pub dichotomy: Option<DichotomyReport>,
    pub dichotomy_skipped: Option<String>,
}

pub fn exponents(manifest: &Manifest, f: &PerturbedDiffeo, sp: &SpectralSplitting, exec: Exec) -> Result<ExponentsOutput> {
    let dg = &manifest.diagnostics;
    let n = dg.orbit_length;
    let seeds: Vec<u64> = (0..dg.orbits.max(1) as u64).map(|i| manifest.seed.wrapping_add(i)).collect();
    let reports = oseledets_seeds(f, sp, &seeds, n, &dyadic_checkpoints(n), exec)?;
    let first = &reports[0];
    let seed_spread = reports
        .iter()
        .flat_map(|r| r.exponents.iter().zip(&first.exponents).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let entropy = entropy_chain_report(first, sp, 1e-9);
    let center_growth = if sp.dim_center > 0 && dg.growth_steps > 0 {
        let cfg = GrowthConfig {
            seed: manifest.seed,
            ..dg.growth
        };
        Some(center_growth_profile(f, sp, dg.growth_steps, &cfg, exec)?)
    } else {
        None
    };
    let (dichotomy, skipped) = match dichotomy_classify(first, sp, dg.thresholds) {
        Ok(d) => (Some(d), None),
        Err(Error::Precondition(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(ExponentsOutput {
        reports,
        seed_spread,
        entropy,
        center_growth,
        dichotomy,
        dichotomy_skipped: skipped,
    })
}

pub fn exponents_csv(report: &ExponentReport) -> Result<String> {
    let d = report.exponents.len();
    let mut header = vec!["step".to_string()];
    header.extend((0..d).map(|i| format!("lambda{}", i + 1)));
    let rows: Vec<Vec<f64>> = report
        .convergence_history
        .iter()
        .map(|c| std::iter::once(c.step as f64).chain(c.exponents.iter().cloned()).collect())
        .collect();
    csv_string(&header, &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingOutput {
    pub test_function: TestFunction,
    pub sampler: Sampler,
    pub report: PairingReport,
}

pub fn pairings(manifest: &Manifest, f: &PerturbedDiffeo, sp: &SpectralSplitting, exec: Exec) -> Result<Option<PairingOutput>> {
    if sp.dim_center == 0 {
        return Ok(None);
    }
    let t = &manifest.diagnostics.test_function;
    let eta = TestFunction::random(f.dim(), t.modes, t.k_max, t.theta, manifest.seed)?;
    let report = hc_pairings(f, sp, &eta, manifest.solver.hc_terms.max(1), &manifest.diagnostics.sampler, exec)?;
    Ok(Some(PairingOutput {
        test_function: eta,
        sampler: manifest.diagnostics.sampler.clone(),
        report,
    }))
}

pub fn pairings_csv(p: &PairingReport) -> Result<String> {
    let dc = p.pairings.first().map_or(0, Vec::len);
    let mut header = vec!["j".to_string()];
    header.extend((0..dc).map(|i| format!("c{}", i + 1)));
    header.push("increment".into());
    let rows: Vec<Vec<f64>> = p
        .pairings
        .iter()
        .zip(&p.increments)
        .enumerate()
        .map(|(j, (v, inc))| {
            std::iter::once((j + 1) as f64)
                .chain(v.iter().cloned())
                .chain(std::iter::once(*inc))
                .collect()
        })
        .collect();
    csv_string(&header, &rows)
}

pub fn foliation(
    manifest: &Manifest,
    f: &PerturbedDiffeo,
    sp: &SpectralSplitting,
    opts: &RunOptions,
) -> Result<IntegrabilityScore> {
    let dg = &manifest.diagnostics;
    let cache = match &opts.cache_dir {
        Some(dir) => LeafCache::with_spill(dir.clone(), f, &dg.leaf)?,
        None => LeafCache::new(),
    };
    let samples = random_points(f.dim(), dg.samples, manifest.seed);
    integrability_score(f, sp, &samples, &dg.deltas, &dg.leaf, &cache, opts.exec)
}

pub fn defects_csv(score: &IntegrabilityScore) -> Result<String> {
    let d = score.table.first().map_or(0, |q| q.base.len());
    let dc = score.table.first().map_or(0, |q| q.gap_center.len());
    let mut header: Vec<String> = (0..d).map(|i| format!("x{}", i + 1)).collect();
    header.extend(["delta_s".to_string(), "delta_u".to_string()]);
    header.extend((0..d).map(|i| format!("gap{}", i + 1)));
    header.extend((0..dc).map(|i| format!("gap_c{}", i + 1)));
    header.push("gap_c_norm".into());
    let rows: Vec<Vec<f64>> = score
        .table
        .iter()
        .map(|q| {
            let mut r = q.base.clone();
            r.extend([q.delta_s, q.delta_u]);
            r.extend(q.gap.iter().cloned());
            r.extend(q.gap_center.iter().cloned());
            r.push(q.gap_center_norm);
            r
        })
        .collect();
    csv_string(&header, &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub version: String,
    pub seed: u64,
    pub certified: bool,
    pub exponents: Vec<f64>,
    pub center_exponents: Vec<f64>,
    pub seed_spread: f64,
    pub entropy: EntropyChain,
    pub integrability_score: f64,
    pub classification: Option<DichotomyReport>,
    pub residual: ResidualReport,
    pub tail_bound: f64,
    pub parameters: DiagnosticsSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub certificate: ConeCertificate,
    pub report: DiagnosticsReport,
}

pub mod schema {
    pub const MANIFEST: &str = "phlab.manifest/1";
    pub const RUN_INFO: &str = "phlab.run-info/1";
    pub const CLASSIFICATION: &str = "phlab.classification/1";
    pub const CERTIFICATE: &str = "phlab.cone-certificate/1";
    pub const CONJUGACY: &str = "phlab.conjugacy/1";
    pub const PAIRINGS: &str = "phlab.pairings/1";
    pub const EXPONENTS: &str = "phlab.exponents/1";
    pub const FOLIATION: &str = "phlab.foliation/1";
    pub const REPORT: &str = "phlab.report/1";
}

/// Runs certify, solve, pairings, exponents and quadrilaterals, writing each result to `out`.
pub fn run(manifest: &Manifest, out: &Path, opts: &RunOptions) -> Result<RunSummary> {
    std::fs::create_dir_all(out)?;
    write_json(
        &out.join("run_info.json"),
        schema::RUN_INFO,
        &serde_json::json!({
            "version": VERSION,
            "started": opts.timestamp,
            "threads": opts.threads,
            "manifest_timestamps": manifest.timestamps,
        }),
    )?;
    write_json(&out.join("manifest.json"), schema::MANIFEST, manifest)?;
    let (l, sp, f) = manifest.build()?;
    write_json(&out.join("classification.json"), schema::CLASSIFICATION, &classify_output(&l)?)?;

    let mut cone = manifest.diagnostics.cone.clone();
    cone.exec = opts.exec;
    let cert = certify_partial_hyperbolicity(&f, &sp, &cone)?;
    write_json(&out.join("certificate.json"), schema::CERTIFICATE, &cert)?;
    if !cert.verified && !opts.force {
        return Err(Error::NotCertified(format!(
            "cone margin {:.3e} at {:?} ({}); rerun with --force to continue",
            cert.margin, cert.worst_point, cert.worst_constraint
        )));
    }

    let conj = solve(manifest, &f, &sp, opts.exec)?;
    write_json(&out.join("conjugacy.json"), schema::CONJUGACY, &conj)?;
    if manifest.solver.write_field {
        std::fs::write(out.join("conjugacy_field.csv"), field_csv(&conj, &sp)?)?;
    }

    if let Some(p) = pairings(manifest, &f, &sp, opts.exec)? {
        write_json(&out.join("pairings.json"), schema::PAIRINGS, &p)?;
        std::fs::write(out.join("pairings.csv"), pairings_csv(&p.report)?)?;
    }

    let ex = exponents(manifest, &f, &sp, opts.exec)?;
    write_json(&out.join("exponents.json"), schema::EXPONENTS, &ex)?;
    std::fs::write(out.join("exponents.csv"), exponents_csv(&ex.reports[0])?)?;

    let score = foliation(manifest, &f, &sp, opts)?;
    write_json(&out.join("foliation.json"), schema::FOLIATION, &score)?;
    std::fs::write(out.join("defects.csv"), defects_csv(&score)?)?;

    let report = DiagnosticsReport {
        version: VERSION.to_string(),
        seed: manifest.seed,
        certified: cert.verified,
        exponents: ex.reports[0].exponents.clone(),
        center_exponents: ex.reports[0].center_exponents.clone(),
        seed_spread: ex.seed_spread,
        entropy: ex.entropy.clone(),
        integrability_score: score.score,
        classification: ex.dichotomy.clone(),
        residual: conj.residual.clone(),
        tail_bound: conj.field.tail_bound,
        parameters: manifest.diagnostics.clone(),
    };
    write_json(&out.join("report.json"), schema::REPORT, &report)?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        certificate: cert,
        report,
    })
}

/// Tidy CSV from a bundle: `exponents`, `pairings` or `defects`.
pub fn plotdata(bundle: &Path, kind: &str) -> Result<String> {
    let load = |name: &str| -> Result<serde_json::Value> {
        let p = bundle.join(name);
        if !p.exists() {
            return Err(Error::invalid(format!("{} is missing from the bundle", p.display())));
        }
        read_json(&p)
    };
    let floats = |v: &serde_json::Value| -> Vec<f64> {
        v.as_array()
            .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
            .unwrap_or_default()
    };
    match kind {
        "exponents" => {
            let v = load("exponents.json")?;
            let hist = v["reports"][0]["convergence_history"]
                .as_array()
                .ok_or_else(|| Error::invalid("exponents.json has no convergence history"))?;
            let d = hist.first().map_or(0, |c| floats(&c["exponents"]).len());
            let mut header = vec!["step".to_string()];
            header.extend((0..d).map(|i| format!("lambda{}", i + 1)));
            let rows: Vec<Vec<f64>> = hist
                .iter()
                .map(|c| {
                    std::iter::once(c["step"].as_f64().unwrap_or(f64::NAN))
                        .chain(floats(&c["exponents"]))
                        .collect()
                })
                .collect();
            csv_string(&header, &rows)
        }
        "pairings" => {
            let v = load("pairings.json")?;
            let pairs = v["report"]["pairings"]
                .as_array()
                .ok_or_else(|| Error::invalid("pairings.json has no pairing sequence"))?;
            let dc = pairs.first().map_or(0, |p| floats(p).len());
            let mut header = vec!["j".to_string()];
            header.extend((0..dc).map(|i| format!("c{}", i + 1)));
            let rows: Vec<Vec<f64>> = pairs
                .iter()
                .enumerate()
                .map(|(j, p)| std::iter::once((j + 1) as f64).chain(floats(p)).collect())
                .collect();
            csv_string(&header, &rows)
        }
        "defects" => {
            let v = load("foliation.json")?;
            let table = v["table"]
                .as_array()
                .ok_or_else(|| Error::invalid("foliation.json has no defect table"))?;
            let header = vec!["delta_s".to_string(), "delta_u".to_string(), "gap_c_norm".to_string()];
            let rows: Vec<Vec<f64>> = table
                .iter()
                .map(|q| {
                    ["delta_s", "delta_u", "gap_center_norm"]
                        .iter()
                        .map(|k| q[*k].as_f64().unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            csv_string(&header, &rows)
        }
        other => Err(Error::invalid(format!(
            "unknown plot kind {other:?} (expected exponents, pairings or defects)"
        ))),
    }
}
