mod json;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use spine3::angles::{congruence_residuals, dimension_check, sas_init, tas_basis};
use spine3::haken::{solution_bases, Haken};
use spine3::nzform::selftest;
use spine3::thurston::{newton_refine, residuals, Mode, ShapeAssignment};
use spine3::volopt::{
    classify_and_extract, fg_flatten, Classification, MaximizeConfig, MaximizeOutcome, VolumeMaximizer, VolumeReport,
};
use spine3::z2taut::enumerate_taut;
use spine3::{Error, Triangulation};

#[derive(Parser)]
#[command(name = "spine3", version, about = "Normal surfaces and circle-valued angle structures on triangulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a triangulation; print its face counts.
    Validate { file: PathBuf },
    /// Combinatorial data: classes, orientation, incidence, cyclic order.
    Report { file: PathBuf },
    /// Exact basis of the tangential angle structures.
    Tas { file: PathBuf },
    /// A circle-valued angle structure to start from.
    SasInit { file: PathBuf },
    /// Maximise the volume over circle-valued angle structures.
    Maximize {
        file: PathBuf,
        #[command(flatten)]
        opt: OptimizerFlags,
        /// Write the ascent trajectory (and a flattening path, when one
        /// exists) to this file.
        #[arg(long)]
        emit_path: Option<PathBuf>,
    },
    /// Shapes or normal surfaces from a critical point.
    Extract {
        file: PathBuf,
        /// A report written by `maximize`; without it the optimizer runs first.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        opt: OptimizerFlags,
    },
    /// Residuals of the gluing equations for given shapes.
    ThurstonCheck {
        file: PathBuf,
        shapes: PathBuf,
        #[arg(long, default_value = "strict")]
        mode: Mode,
        /// Newton-refine the shapes first.
        #[arg(long)]
        refine: bool,
    },
    /// Normal surface solutions and their quad projection.
    Haken {
        file: PathBuf,
        /// Print the solution, TAS and TAS-complement bases.
        #[arg(long)]
        basis: bool,
        /// Search two-quad solutions for quad `<tet>:<type>`.
        #[arg(long, value_name = "TET:TYPE")]
        two_quad: Option<String>,
        /// Tetrahedra whose three quads all carry two-quad solutions.
        #[arg(long)]
        clusters: bool,
    },
    /// Enumerate Z/2-taut structures.
    Z2taut {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        limit: usize,
        /// Count every structure even above 20 tetrahedra.
        #[arg(long)]
        count_exact: bool,
    },
    /// Check the pairing identities and chain exactness.
    NzSelftest { file: PathBuf },
}

#[derive(Args)]
struct OptimizerFlags {
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
}

impl OptimizerFlags {
    fn config(&self) -> MaximizeConfig {
        MaximizeConfig {
            restarts: self.restarts,
            seed: self.seed,
            tol: self.tol,
            max_iterations: self.max_iterations,
            ..MaximizeConfig::default()
        }
    }
}

/// A failed command: message for standard error and exit code.
struct Failure {
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_sentinel() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        message: message.into(),
        code: 1,
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Triangulation, Failure> {
    Ok(Triangulation::from_json(&read(path)?)?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

fn counts(tri: &Triangulation) -> Value {
    json!({
        "V": tri.num_vertices(),
        "E": tri.num_edges(),
        "F": tri.num_faces(),
        "T": tri.num_tets(),
        "chi": tri.euler_characteristic(),
    })
}

fn report(tri: &Triangulation) -> Value {
    let inc = tri.incidence();
    let incidence: Vec<Vec<u8>> = (0..tri.num_edges())
        .map(|e| (0..tri.num_quads()).map(|q| inc.get(e, q)).collect())
        .collect();
    let cyclic: Vec<[usize; 3]> = (0..tri.num_tets()).map(|t| tri.quad_cyclic_order(t)).collect();
    json!({
        "counts": counts(tri),
        "orientation": tri.orientations(),
        "vertex_classes": tri.vertex_classes(),
        "edge_classes": tri.edge_classes(),
        "edge_degrees": tri.edge_degrees(),
        "vertex_link_euler": tri.vertex_link_euler(),
        "incidence": incidence,
        "quad_cyclic_order": cyclic,
    })
}

fn optimize(tri: &Triangulation, opt: &OptimizerFlags) -> Result<MaximizeOutcome, Failure> {
    let theta0 = sas_init(tri)?;
    Ok(VolumeMaximizer::new(tri, opt.config()).maximize(&theta0.theta))
}

/// The flattening path of a report, or why there is none.
fn flattening(tri: &Triangulation, report: &VolumeReport) -> Result<Value, Failure> {
    if report.classification != Classification::NonsmoothCritical {
        return Ok(Value::Null);
    }
    match fg_flatten(tri, report) {
        Ok(path) => Ok(serde_json::to_value(path).expect("serialisable path")),
        Err(Error::NotApplicable) => Ok(Value::Null),
        Err(e) => Err(e.into()),
    }
}

fn parse_quad(spec: &str, tri: &Triangulation) -> Result<usize, Failure> {
    let bad = || fail(format!("expected <tet>:<type>, got `{spec}`"));
    let (t, k) = spec.split_once(':').ok_or_else(bad)?;
    let t: usize = t.trim().parse().map_err(|_| bad())?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if t >= tri.num_tets() || k >= 3 {
        return Err(fail(format!("quad {t}:{k} out of range")));
    }
    Ok(3 * t + k)
}

fn out<T: Serialize>(value: &T) -> Outcome {
    Ok(json::to_string(value))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { file } => out(&counts(&load(&file)?)),
        Command::Report { file } => out(&report(&load(&file)?)),
        Command::Tas { file } => {
            let tri = load(&file)?;
            let tas = tas_basis(&tri);
            let check = dimension_check(&tri);
            out(&json!({
                "basis": serde_json::to_value(&tas).expect("serialisable basis")["basis"],
                "dim_tas": tas.dim,
                "chi": tri.euler_characteristic(),
                "expected_dim": check.expected,
                "match": check.matches,
            }))
        }
        Command::SasInit { file } => {
            let tri = load(&file)?;
            let p = sas_init(&tri)?;
            let res = congruence_residuals(&tri, &p.theta);
            out(&json!({
                "theta": p.theta,
                "dim_tas": tas_basis(&tri).dim,
                "chi": tri.euler_characteristic(),
                "residual": res,
            }))
        }
        Command::Maximize { file, opt, emit_path } => {
            let tri = load(&file)?;
            let outcome = optimize(&tri, &opt)?;
            if let Some(path) = emit_path {
                let extra = json!({
                    "trajectory": outcome.trajectory,
                    "restart_volumes": outcome.restart_volumes,
                    "flattening": flattening(&tri, &outcome.report)?,
                });
                write(&path, &json::to_string(&extra))?;
            }
            out(&outcome.report)
        }
        Command::Extract { file, report, opt } => {
            let tri = load(&file)?;
            let report: VolumeReport = match report {
                Some(path) => serde_json::from_str(&read(&path)?)
                    .map_err(|e| fail(format!("malformed report {}: {e}", path.display())))?,
                None => optimize(&tri, &opt)?.report,
            };
            let extraction = classify_and_extract(&tri, &report)?;
            out(&json!({
                "classification": report.classification,
                "volume": report.volume,
                "extraction": extraction,
                "flattening": flattening(&tri, &report)?,
            }))
        }
        Command::ThurstonCheck { file, shapes, mode, refine } => {
            let tri = load(&file)?;
            let z = ShapeAssignment::from_json(&read(&shapes)?)?;
            if refine {
                out(&newton_refine(&tri, &z, mode)?)
            } else {
                out(&residuals(&tri, &z, mode)?)
            }
        }
        Command::Haken { file, basis, two_quad, clusters } => {
            let tri = load(&file)?;
            let bases = solution_bases(&tri)?;
            let mut obj = json!({ "duality": bases.duality });
            if basis {
                let b = serde_json::to_value(&bases).expect("serialisable bases");
                for key in ["sns_basis", "tas_basis", "tas_perp_basis"] {
                    obj[key] = b[key].clone();
                }
            }
            let haken = Haken::new(&tri);
            if let Some(spec) = two_quad {
                let q = parse_quad(&spec, &tri)?;
                obj["two_quad"] = json!({ "target": q, "solutions": haken.two_quad_search(q) });
            }
            if clusters {
                obj["clusters"] = serde_json::to_value(haken.cluster_search()).expect("serialisable clusters");
            }
            out(&obj)
        }
        Command::Z2taut { file, limit, count_exact } => {
            let tri = load(&file)?;
            out(&enumerate_taut(&tri, limit, count_exact))
        }
        Command::NzSelftest { file } => {
            let tri = load(&file)?;
            let r = selftest(&tri);
            let text = json::to_string(&r);
            if r.all_pass() {
                Ok(text)
            } else {
                print!("{text}");
                Err(Failure {
                    message: "identity violated".into(),
                    code: 2,
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("SPINE3_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
