use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phlab_core::experiment::{self, schema, Manifest, RunOptions};
use phlab_core::io::{to_json, with_schema, MatrixSpec};
use phlab_core::par::Exec;
use phlab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "phlab", version, about = "Rigidity laboratory for perturbed toral automorphisms")]
struct Cli {
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Solver tolerance on the distance to the fixed point.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Solver grid points per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Take H_c = 0 (`--leaf-conjugacy false` sums the center series instead).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    leaf_conjugacy: Option<bool>,
    /// Continue when the cone certificate fails.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Algebraic classification of a matrix (`{"rows": [[..], ..]}` or a manifest).
    Classify { input: PathBuf },
    /// Cone-field certificate for the manifest map.
    Certify { manifest: PathBuf },
    /// Contraction-series solution for H_s and H_u.
    Solve {
        manifest: PathBuf,
        /// Also write the field as CSV.
        #[arg(long)]
        field_csv: Option<PathBuf>,
    },
    /// Lyapunov spectrum, entropy chain and dichotomy classification.
    Exponents {
        manifest: PathBuf,
        /// Also write the convergence history as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// su-quadrilateral defects and the integrability score.
    Foliation {
        manifest: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Full pipeline into a report bundle directory.
    Run {
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Tidy CSV from a bundle: exponents, pairings or defects.
    Plotdata { bundle: PathBuf, kind: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Json(_) | Error::Io(_) => 2,
        Error::NotCertified(_) | Error::Precondition(_) => 3,
        Error::NoConvergence { .. } | Error::Numerical(_) => 4,
    }
}

fn load_manifest(cli: &Cli, path: &Path) -> Result<Manifest, Error> {
    let mut m = Manifest::load(path)?;
    if let Some(s) = cli.seed {
        m.seed = s;
    }
    if let Some(t) = cli.tol {
        m.solver.config.tol = t;
    }
    if let Some(g) = cli.grid {
        m.solver.config.grid_n = g;
    }
    if let Some(lc) = cli.leaf_conjugacy {
        m.solver.leaf_conjugacy = lc;
    }
    Ok(m)
}

fn load_matrix(path: &Path) -> Result<MatrixSpec, Error> {
    let v: serde_json::Value = phlab_core::io::read_json(path)?;
    let m = match v {
        serde_json::Value::Array(_) => serde_json::json!({ "rows": v }),
        serde_json::Value::Object(mut o) => {
            o.remove("schema");
            match o.remove("matrix") {
                Some(inner) => inner,
                None => serde_json::Value::Object(o),
            }
        }
        _ => return Err(Error::InvalidInput("expected a matrix object or array of rows".into())),
    };
    Ok(serde_json::from_value(m)?)
}

fn print_json<T: serde::Serialize>(schema: &str, value: &T) -> Result<(), Error> {
    print!("{}", to_json(&with_schema(schema, value)?)?);
    Ok(())
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let exec = if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        Exec::Parallel
    } else {
        Exec::Sequential
    };
    let opts = RunOptions {
        force: cli.force,
        exec,
        cache_dir: std::env::var_os("PHLAB_CACHE_DIR").map(PathBuf::from),
        timestamp: Some(timestamp()),
        threads: Some(cli.threads),
    };
    match &cli.command {
        Command::Classify { input } => {
            let l = load_matrix(input)?.to_automorphism()?;
            print_json(schema::CLASSIFICATION, &experiment::classify_output(&l)?)
        }
        Command::Certify { manifest } => {
            let m = load_manifest(cli, manifest)?;
            let (_, sp, f) = m.build()?;
            let mut cfg = m.diagnostics.cone.clone();
            cfg.exec = exec;
            let cert = phlab_core::cone::certify_partial_hyperbolicity(&f, &sp, &cfg)?;
            print_json(schema::CERTIFICATE, &cert)?;
            if !cert.verified && !cli.force {
                return Err(Error::NotCertified(format!("cone margin {:.3e}", cert.margin)));
            }
            Ok(())
        }
        Command::Solve { manifest, field_csv } => {
            let m = load_manifest(cli, manifest)?;
            let (_, sp, f) = m.build()?;
            experiment::certify(&f, &sp, &m.diagnostics.cone, cli.force)?;
            let out = experiment::solve(&m, &f, &sp, exec)?;
            if let Some(p) = field_csv {
                std::fs::write(p, experiment::field_csv(&out, &sp)?)?;
            }
            print_json(schema::CONJUGACY, &out)
        }
        Command::Exponents { manifest, csv } => {
            let m = load_manifest(cli, manifest)?;
            let (_, sp, f) = m.build()?;
            let out = experiment::exponents(&m, &f, &sp, exec)?;
            if let Some(p) = csv {
                std::fs::write(p, experiment::exponents_csv(&out.reports[0])?)?;
            }
            print_json(schema::EXPONENTS, &out)
        }
        Command::Foliation { manifest, csv } => {
            let m = load_manifest(cli, manifest)?;
            let (_, sp, f) = m.build()?;
            experiment::certify(&f, &sp, &m.diagnostics.cone, cli.force)?;
            let out = experiment::foliation(&m, &f, &sp, &opts)?;
            if let Some(p) = csv {
                std::fs::write(p, experiment::defects_csv(&out)?)?;
            }
            print_json(schema::FOLIATION, &out)
        }
        Command::Run { manifest, out } => {
            let m = load_manifest(cli, manifest)?;
            let summary = experiment::run(&m, out, &opts)?;
            print_json(schema::REPORT, &summary.report)
        }
        Command::Plotdata { bundle, kind } => {
            print!("{}", experiment::plotdata(bundle, kind)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
