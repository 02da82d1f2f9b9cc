use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use povmsim::decompose::{decompose_extremal, decompose_trace_one_qutrit};
use povmsim::io::{
    canonical_json, dilation_to_json, error_to_json, members_to_json, povm_to_json, read_povm, strategy_to_json,
    visibility_to_json, write_povm,
};
use povmsim::naimark::{dilate, verify_dilation};
use povmsim::polytope::{
    build_covariant_polytope, build_qubit_polytope, covariant_scan, covariant_search, direction_set,
    scan_lower_bound, werner_bound, Preset, ScanResult,
};
use povmsim::povm::{fixture, protocol_inverse_d, protocol_tetra_optimal, tetrahedral};
use povmsim::sdp::SolverOptions;
use povmsim::simulability::{
    strategy_from_certificate, visibility_m_outcome_with, visibility_qutrit_projective_with, VisibilityResult,
};
use povmsim::{Error, Povm, SimulationStrategy, Tolerances};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "povmsim", version, about = "Projective simulability of quantum measurements")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct TolArgs {
    /// JSON file with `tolerances` and `solver` sections
    #[arg(long, global = true, value_name = "FILE")]
    tol_file: Option<PathBuf>,
    #[arg(long, global = true)]
    tol_hermiticity: Option<f64>,
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    #[arg(long, global = true)]
    tol_orthonormality: Option<f64>,
    #[arg(long, global = true)]
    tol_normalization: Option<f64>,
    #[arg(long, global = true)]
    tol_rank_cutoff: Option<f64>,
    #[arg(long, global = true)]
    tol_projector: Option<f64>,
    /// SDP duality gap
    #[arg(long, global = true)]
    tol_gap: Option<f64>,
    /// SDP primal and dual residuals
    #[arg(long, global = true)]
    tol_feas: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a POVM file; `--emit` prints its canonical form instead of a report
    Validate {
        file: PathBuf,
        #[arg(long)]
        emit: bool,
    },
    /// Visibility under mixtures of measurements with at most `m` outcomes
    Visibility {
        #[arg(default_value = "-")]
        file: PathBuf,
        #[arg(long)]
        m: usize,
        /// Write the SDP certificate here
        #[arg(long, value_name = "PATH")]
        certificate: Option<PathBuf>,
    },
    /// Projective-simulability visibility of a qutrit POVM
    QutritVisibility {
        #[arg(default_value = "-")]
        file: PathBuf,
        /// Write the extracted strategy for the depolarized POVM here
        #[arg(long, value_name = "PATH")]
        strategy: Option<PathBuf>,
    },
    /// Projective simulation strategy for the depolarized POVM at visibility `t`
    Simulate {
        #[arg(default_value = "-")]
        file: PathBuf,
        #[arg(long)]
        t: f64,
        /// auto, tetra, inverse-d or sdp
        #[arg(long, default_value = "auto")]
        method: String,
    },
    /// Extremal decomposition, or the trace-one qutrit decomposition
    Decompose {
        #[arg(default_value = "-")]
        file: PathBuf,
        #[arg(long)]
        trace_one_qutrit: bool,
    },
    /// Naimark dilation with a system-sized ancilla
    Naimark {
        #[arg(default_value = "-")]
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Lower bound on the worst-case visibility from an outer polytope
    PolytopeBound {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write one line per vertex here
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Random search over Weyl-Heisenberg covariant qutrit POVMs
    CovariantSearch {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        refine_steps: usize,
        /// Also compute the three-outcome visibility of every sample
        #[arg(long)]
        with_t3: bool,
    },
    /// Werner-state locality bound `t^2 p*`
    WernerBound {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        p_star: f64,
    },
    /// Print a built-in POVM
    Fixture { name: String },
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct TolFile {
    tolerances: Tolerances,
    solver: SolverOptions,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum PolytopeSpec {
    Qubit {
        directions: Directions,
        polygon_sides: usize,
        #[serde(default)]
        tangent_to_tetra: bool,
    },
    Covariant {
        random_states: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Directions {
    Named(String),
    Explicit(Vec<[f64; 3]>),
}

/// Failure of a command, with its exit code.
struct Failure {
    code: u8,
    body: Value,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_SOLVER };
        Failure { code, body: error_to_json(&e) }
    }
}

fn usage(kind: &str, message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, body: json!({"error": {"kind": kind, "message": message.into()}}) }
}

struct Context {
    tol: Tolerances,
    solver: SolverOptions,
    digest: Sha256,
}

impl Context {
    fn new(args: &TolArgs) -> Result<Self, Failure> {
        let mut cfg = TolFile::default();
        if let Some(path) = &args.tol_file {
            let text = read_file(path)?;
            cfg = serde_json::from_slice(&text).map_err(|e| usage("Config", e.to_string()))?;
        }
        let mut tol = cfg.tolerances;
        let mut solver = cfg.solver;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut tol.hermiticity, args.tol_hermiticity);
        set(&mut tol.psd, args.tol_psd);
        set(&mut tol.orthonormality, args.tol_orthonormality);
        set(&mut tol.normalization, args.tol_normalization);
        set(&mut tol.rank_cutoff, args.tol_rank_cutoff);
        set(&mut tol.projector, args.tol_projector);
        set(&mut solver.gap_tol, args.tol_gap);
        set(&mut solver.feas_tol, args.tol_feas);
        if let Some(n) = args.max_iter {
            solver.max_iter = n;
        }
        let mut digest = Sha256::new();
        digest.update(canonical_json(&json!({"tolerances": tol, "solver": solver})).as_bytes());
        Ok(Self { tol, solver, digest })
    }

    fn absorb(&mut self, label: &str, bytes: &[u8]) {
        self.digest.update((label.len() as u64).to_le_bytes());
        self.digest.update(label.as_bytes());
        self.digest.update((bytes.len() as u64).to_le_bytes());
        self.digest.update(bytes);
    }

    fn load_povm(&mut self, path: &Path) -> Result<Povm, Failure> {
        let bytes = read_file(path)?;
        self.absorb("povm", &bytes);
        let text = String::from_utf8(bytes).map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
        Ok(read_povm(&text, &self.tol)?)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map_err(|e| usage("Io", format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| usage("Io", format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage("Io", format!("{}: {e}", path.display())))
}

fn diagnostics(r: &VisibilityResult) -> Value {
    serde_json::to_value(&r.diagnostics).expect("diagnostics serialize")
}

/// Output of one command: the result payload and solver diagnostics.
struct Outcome {
    result: Value,
    diagnostics: Value,
}

impl Outcome {
    fn plain(result: Value) -> Self {
        Outcome { result, diagnostics: Value::Null }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Visibility { .. } => "visibility",
        Command::QutritVisibility { .. } => "qutrit-visibility",
        Command::Simulate { .. } => "simulate",
        Command::Decompose { .. } => "decompose",
        Command::Naimark { .. } => "naimark",
        Command::PolytopeBound { .. } => "polytope-bound",
        Command::CovariantSearch { .. } => "covariant-search",
        Command::WernerBound { .. } => "werner-bound",
        Command::Fixture { .. } => "fixture",
    }
}

fn simulate(m: &Povm, t: f64, method: &str, opts: &SolverOptions, tol: &Tolerances) -> Result<Value, Failure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t = {t} must lie in [0, 1]")).into());
    }
    let d = m.dim() as f64;
    let t_tetra = (2.0f64 / 3.0).sqrt();
    let is_tetra = m.num_outcomes() == 4 && m.dim() == 2 && m.distance(&tetrahedral()) < 1e-9;
    let rank_one = m.ranks(tol.rank_cutoff).iter().all(|&r| r == 1);
    let method = match method {
        "auto" if m.is_projective(tol.projector) => "projective",
        "auto" if is_tetra && t <= t_tetra => "tetra",
        "auto" if rank_one && t <= 1.0 / d => "inverse-d",
        "auto" => "sdp",
        other => other,
    };
    let (strategy, base): (SimulationStrategy, f64) = match method {
        "projective" => (SimulationStrategy::new(vec![1.0], vec![m.clone()], None)?, 1.0),
        "tetra" if is_tetra => (protocol_tetra_optimal(), t_tetra),
        "tetra" => return Err(Error::Unsupported("the tetra protocol needs the tetrahedral POVM".into()).into()),
        "inverse-d" => (protocol_inverse_d(m)?, 1.0 / d),
        "sdp" => {
            let cert = match m.dim() {
                2 => visibility_m_outcome_with(m, 2, opts)?,
                3 => visibility_qutrit_projective_with(m, opts)?,
                k => return Err(Error::Unsupported(format!("no projective visibility program for dimension {k}")).into()),
            };
            (strategy_from_certificate(m, &cert)?, cert.t_star.min(1.0))
        }
        other => return Err(usage("Usage", format!("unknown method '{other}'"))),
    };
    if t > base + 1e-9 {
        return Err(Error::OutOfRange(format!("t = {t} exceeds the {method} visibility {base}")).into());
    }
    let s = strategy.depolarize((t / base).min(1.0))?;
    let deviation = s.apply().distance(&m.depolarize_unchecked(t));
    Ok(json!({
        "method": method,
        "t": t,
        "base_visibility": base,
        "deviation": deviation,
        "strategy": strategy_to_json(&s),
    }))
}

fn scan_json(s: &ScanResult) -> Value {
    json!({
        "vertex_count": s.vertex_count,
        "t_delta": s.t_delta,
        "argmin": s.argmin,
    })
}

fn polytope_bound(ctx: &mut Context, preset: Option<&str>, config: Option<&Path>, jobs: usize, csv: Option<&Path>) -> Result<Value, Failure> {
    let spec = match (preset, config) {
        (Some(name), _) => {
            ctx.absorb("preset", name.as_bytes());
            let p = Preset::from_name(name).map_err(|e| usage("Usage", e.to_string()))?;
            let c = p.config();
            let set = match p {
                Preset::Octahedron => "octahedron",
                Preset::Desk => "icosahedron+dual",
                Preset::Full => "truncated-icosahedron+dual",
            };
            PolytopeSpec::Qubit {
                directions: Directions::Named(set.into()),
                polygon_sides: c.polygon_sides,
                tangent_to_tetra: c.tangent_to_tetra,
            }
        }
        (None, Some(path)) => {
            let bytes = read_file(path)?;
            ctx.absorb("config", &bytes);
            serde_json::from_slice(&bytes).map_err(|e| Failure::from(Error::Parse(e.to_string())))?
        }
        (None, None) => return Err(usage("Usage", "one of --preset or --config is required")),
    };
    let (metadata, scan) = match spec {
        PolytopeSpec::Qubit { directions, polygon_sides, tangent_to_tetra } => {
            let (label, dirs) = match directions {
                Directions::Named(n) => (json!(n), direction_set(&n)?),
                Directions::Explicit(v) => (json!("explicit"), v),
            };
            let h = build_qubit_polytope(&dirs, polygon_sides, tangent_to_tetra)?;
            let meta = json!({
                "kind": "qubit",
                "preset": preset,
                "directions": label,
                "direction_count": dirs.len(),
                "polygon_sides": polygon_sides,
                "tangent_to_tetra": tangent_to_tetra,
                "inequality_count": h.inequalities.len(),
                "dim": h.dim,
            });
            (meta, scan_lower_bound(&h, jobs)?)
        }
        PolytopeSpec::Covariant { random_states, seed } => {
            let h = build_covariant_polytope(random_states, seed)?;
            let meta = json!({
                "kind": "covariant",
                "preset": preset,
                "random_states": random_states,
                "seed": seed,
                "inequality_count": h.inequalities.len(),
                "dim": h.dim,
            });
            (meta, covariant_scan(&h, jobs)?)
        }
    };
    if let Some(path) = csv {
        write_file(path, &scan.to_csv())?;
    }
    let mut out = scan_json(&scan);
    out["metadata"] = metadata;
    out["jobs"] = json!(jobs);
    out["csv"] = json!(csv.map(|p| p.display().to_string()));
    Ok(out)
}

fn run(cmd: &Command, ctx: &mut Context) -> Result<Outcome, Failure> {
    let opts = ctx.solver;
    match cmd {
        Command::Validate { file, .. } => {
            let m = ctx.load_povm(file)?;
            Ok(Outcome::plain(json!({
                "valid": true,
                "dim": m.dim(),
                "num_outcomes": m.num_outcomes(),
                "normalization_defect": m.normalization_defect(),
                "projective": m.is_projective(ctx.tol.projector),
                "ranks": m.ranks(ctx.tol.rank_cutoff),
            })))
        }
        Command::Visibility { file, m, certificate } => {
            let p = ctx.load_povm(file)?;
            ctx.absorb("m", &m.to_le_bytes());
            let r = visibility_m_outcome_with(&p, *m, &opts)?;
            if let Some(path) = certificate {
                write_file(path, &(canonical_json(&visibility_to_json(&r)) + "\n"))?;
            }
            Ok(Outcome {
                result: json!({
                    "t_star": r.t_star,
                    "m": r.m,
                    "relaxation": r.relaxation,
                    "reconstruction_error": r.reconstruction_error(&p),
                    "certificate_path": certificate.as_ref().map(|c| c.display().to_string()),
                }),
                diagnostics: diagnostics(&r),
            })
        }
        Command::QutritVisibility { file, strategy } => {
            let p = ctx.load_povm(file)?;
            let r = visibility_qutrit_projective_with(&p, &opts)?;
            if let Some(path) = strategy {
                let s = strategy_from_certificate(&p, &r)?;
                write_file(path, &(canonical_json(&strategy_to_json(&s)) + "\n"))?;
            }
            Ok(Outcome {
                result: json!({
                    "t_star": r.t_star,
                    "simulable": r.t_star >= 1.0 - 1e-6,
                    "reconstruction_error": r.reconstruction_error(&p),
                    "strategy_path": strategy.as_ref().map(|c| c.display().to_string()),
                }),
                diagnostics: diagnostics(&r),
            })
        }
        Command::Simulate { file, t, method } => {
            let p = ctx.load_povm(file)?;
            ctx.absorb("t", &t.to_le_bytes());
            ctx.absorb("method", method.as_bytes());
            Ok(Outcome::plain(simulate(&p, *t, method, &opts, &ctx.tol)?))
        }
        Command::Decompose { file, trace_one_qutrit } => {
            let p = ctx.load_povm(file)?;
            ctx.absorb("trace-one", &[*trace_one_qutrit as u8]);
            let members = if *trace_one_qutrit { decompose_trace_one_qutrit(&p)? } else { decompose_extremal(&p)? };
            let rebuilt = Povm::mix(&members)?;
            Ok(Outcome::plain(json!({
                "kind": if *trace_one_qutrit { "trace-one-qutrit" } else { "extremal" },
                "members": members_to_json(&members),
                "reconstruction_error": rebuilt.distance(&p),
            })))
        }
        Command::Naimark { file, trials, seed } => {
            let p = ctx.load_povm(file)?;
            ctx.absorb("trials", &trials.to_le_bytes());
            ctx.absorb("seed", &seed.to_le_bytes());
            let d = dilate(&p, None)?;
            Ok(Outcome::plain(json!({
                "dilation": dilation_to_json(&d),
                "deviation": verify_dilation(&p, &d, *trials, *seed),
                "unitarity_defect": d.unitarity_defect(),
                "trials": trials,
            })))
        }
        Command::PolytopeBound { preset, config, jobs, csv } => {
            Ok(Outcome::plain(polytope_bound(ctx, preset.as_deref(), config.as_deref(), *jobs, csv.as_deref())?))
        }
        Command::CovariantSearch { samples, seed, refine_steps, with_t3 } => {
            ctx.absorb("samples", &samples.to_le_bytes());
            ctx.absorb("seed", &seed.to_le_bytes());
            ctx.absorb("refine", &refine_steps.to_le_bytes());
            let s = covariant_search(*samples, *seed, 1, *with_t3, *refine_steps)?;
            let best = s.best();
            let mut result = json!({
                "t": best.t,
                "t3": best.t3,
                "fiducial": povmsim::io::vector_to_json(&best.fiducial),
                "povm": povm_to_json(&best.povm),
                "samples": samples,
                "best_sample_t": s.samples[s.best_sample].t,
                "refine_steps": refine_steps,
            });
            if *with_t3 {
                let gap = s.samples.iter().filter_map(|x| x.t3.map(|t3| (x.t - t3).abs())).fold(0.0, f64::max);
                result["max_t_t3_difference"] = json!(gap);
            }
            Ok(Outcome::plain(result))
        }
        Command::WernerBound { t, p_star } => {
            ctx.absorb("t", &t.to_le_bytes());
            ctx.absorb("p_star", &p_star.to_le_bytes());
            let b = werner_bound(*t, *p_star)?;
            Ok(Outcome::plain(json!({"bound": b, "exceeds_5_12": b > 5.0 / 12.0, "t": t, "p_star": p_star})))
        }
        Command::Fixture { .. } => unreachable!("fixture prints the POVM directly"),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn out(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit(v: &Value) {
    out(&(canonical_json(v) + "\n"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                out(&e.to_string());
                return ExitCode::SUCCESS;
            }
            emit(&json!({"error": {"kind": "Usage", "message": e.to_string()}}));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = (|| -> Result<Option<Value>, Failure> {
        if let Command::Fixture { name } = &cli.command {
            let m = fixture(name).map_err(|e| usage("Usage", e.to_string()))?;
            out(&write_povm(&m));
            return Ok(None);
        }
        let mut ctx = Context::new(&cli.tol)?;
        if let Command::Validate { file, emit: true } = &cli.command {
            out(&write_povm(&ctx.load_povm(file)?));
            return Ok(None);
        }
        let start = Instant::now();
        let out = run(&cli.command, &mut ctx)?;
        let digest: String = ctx.digest.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Some(json!({
            "command": command_name(&cli.command),
            "inputs_digest": digest,
            "result": out.result,
            "diagnostics": out.diagnostics,
            "wall_time_s": start.elapsed().as_secs_f64(),
        })))
    })();
    match outcome {
        Ok(Some(report)) => {
            emit(&report);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            emit(&f.body);
            ExitCode::from(f.code)
        }
    }
}
