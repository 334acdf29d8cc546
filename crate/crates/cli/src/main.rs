//! `hamspec` command line front end.
//!
//! Exit status: 0 ok, 1 usage or I/O, 2 validation failure, 3 spectral-point
//! error, 4 classification ambiguity.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hamspec::classify::{classify, CaseKind};
use hamspec::config::RunConfig;
use hamspec::model::{HamSequence, SystemCoefficients};
use hamspec::report::{self, ReportBundle, Timings};
use hamspec::spectral::{
    approximate, defining_residual, eigenvalues_regular, oracle_near, OracleOptions, RegularResolvent,
    SingularResolvent,
};
use hamspec::{Error, C64};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hamspec", version, about = "Regular approximations of spectra of discrete Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check coefficients, the extension and the induced boundary conditions.
    Validate(Common),
    /// Deficiency index and case at +∞.
    Classify(Common),
    /// Spectrum of one truncated problem (needs --b).
    Eigs(Common),
    /// Eigenvalue trajectories, bounds and defects along the schedule.
    Approx(Common),
    /// Resolvent applied to the configured forcing term.
    Resolvent(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Truncation point b.
    #[arg(long)]
    b: Option<i64>,
    /// Spectral point as re,im.
    #[arg(long, value_parser = parse_z, allow_hyphen_values = true)]
    z: Option<C64>,
    /// Cross-check eigenvalues against the boundary determinant.
    #[arg(long)]
    oracle: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_z(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re, im] => {
            let re: f64 = re.parse().map_err(|e| format!("real part: {e}"))?;
            let im: f64 = im.parse().map_err(|e| format!("imaginary part: {e}"))?;
            Ok(C64::new(re, im))
        }
        [re] => re.parse().map(|re| C64::new(re, 0.0)).map_err(|e| format!("{e}")),
        _ => Err("expected re,im".into()),
    }
}

/// Failure of a command: a library error or a usage problem.
enum Failure {
    Lib(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Eigs(a) => cmd_eigs(a),
        Command::Approx(a) => cmd_approx(a),
        Command::Resolvent(a) => cmd_resolvent(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(out: Option<&Path>, name: &str, content: &str) -> Result<(), Error> {
    if let Some(dir) = out {
        report::write_file(dir, name, content)?;
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) -> Result<String, Error> {
    let s = report::to_json(v)?;
    print!("{s}");
    Ok(s)
}

fn cmd_validate(args: &Common) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let sys = cfg.system()?;
    let mut schedule = cfg.schedule()?;
    if let Some(b) = args.b {
        schedule.push(b);
        schedule.sort_unstable();
        schedule.dedup();
    }
    let a = sys.start();
    let end = schedule.last().map(|b| b + 1).unwrap_or(a + 64);
    let coeff = sys.validate(a..=end, cfg.tolerances.validation)?;
    let worst = |f: fn(&hamspec::model::ValidationRow) -> f64| coeff.rows.iter().map(f).fold(0.0, f64::max);
    let min_of = |f: fn(&hamspec::model::ValidationRow) -> f64| coeff.rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let case = cfg.resolve_case(&sys)?;
    let desc = cfg.descriptor(&sys, &case)?;
    let sse = desc.validate()?;
    let mut boundaries = Vec::new();
    for &b in &schedule {
        let bc = cfg.regular_bc(&desc, b)?;
        let r = bc.verify()?;
        boundaries.push(json!({"b": b, "rank": r.rank, "symplectic_residual": r.symplectic_residual}));
    }
    let v = json!({
        "status": "ok",
        "system": sys.label(),
        "coefficients": {
            "range": [a, end],
            "tolerance": cfg.tolerances.validation,
            "max_hermitian_defect_B": worst(|r| r.herm_b),
            "max_hermitian_defect_C": worst(|r| r.herm_c),
            "min_eig_W1": min_of(|r| r.min_w1),
            "min_eig_W2": min_of(|r| r.min_w2),
            "min_singular_value_I_minus_A": min_of(|r| r.sigma_min),
        },
        "case": {"kind": case.kind, "d": case.d, "from_classification": case.label.is_some()},
        "definiteness_t0": desc.t0,
        "extension": sse,
        "boundary_conditions": boundaries,
    });
    let s = print_json(&v)?;
    emit(args.out.as_deref(), "validate.json", &s)?;
    Ok(())
}

fn cmd_classify(args: &Common) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let sys = cfg.system()?;
    let label = classify(&sys, &cfg.classify_options())?;
    let v = json!({
        "kind": label.kind,
        "n": label.n,
        "d": label.d,
        "finite_dim_space": label.finite_dim_space,
        "definiteness": label.definiteness,
    });
    print_json(&v)?;
    emit(args.out.as_deref(), "classification.json", &report::to_json(&label)?)?;
    Ok(())
}

fn cmd_eigs(args: &Common) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let b = args.b.ok_or_else(|| Failure::Usage("eigs needs --b <int>".into()))?;
    let sys = cfg.system()?;
    let (shifted, bc) = cfg.truncation(&sys, b)?;
    let list = eigenvalues_regular(&shifted, &bc, &cfg.eigen_options())?;
    let oracle_opts = OracleOptions::default();
    let roots = if args.oracle || cfg.oracle {
        let values: Vec<f64> = report::signed_indices(&list).iter().map(|(_, v)| *v).collect();
        Some(oracle_near(&shifted, &bc, &values, &oracle_opts)?)
    } else {
        None
    };
    let csv = report::eigs_csv(&list, cfg.shift, roots.as_deref().map(|r| (r, &oracle_opts)))?;
    print!("{csv}");
    emit(args.out.as_deref(), &format!("eigs_b{b}.csv"), &csv)?;
    Ok(())
}

fn cmd_approx(args: &Common) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let schedule = cfg.schedule()?;
    if schedule.is_empty() {
        return Err(Failure::Usage("the schedule is empty; nothing to approximate".into()));
    }
    let mut timings = Timings::default();
    let clock = Instant::now();
    let sys = cfg.system()?;
    let case = cfg.resolve_case(&sys)?;
    timings.record("classification", clock.elapsed().as_secs_f64());
    let clock = Instant::now();
    let desc = cfg.descriptor(&sys, &case)?;
    timings.record("extension", clock.elapsed().as_secs_f64());
    let mut opts = cfg.approx_options();
    opts.oracle |= args.oracle;
    let clock = Instant::now();
    let rep = approximate(&desc, &schedule, &opts)?;
    timings.record("approximation", clock.elapsed().as_secs_f64());
    let bundle = ReportBundle {
        version: env!("CARGO_PKG_VERSION"),
        system: sys.label().to_string(),
        config: &cfg,
        case: &case,
        approximation: &rep,
    };
    let dir = cfg.out_dir(args.out.as_deref());
    let files = report::write_approx(&dir, &bundle, &timings)?;
    for run in &rep.runs {
        if let Some(e) = &run.error {
            eprintln!("warning: run r = {} (b = {}) failed: {e}", run.r, run.b);
        }
    }
    if let Some(e) = &rep.bound_error {
        eprintln!("warning: error bound unavailable: {e}");
    }
    if let Some(e) = &rep.defect_error {
        eprintln!("warning: defect study unavailable: {e}");
    }
    let mut trs: Vec<_> = rep.trajectories.iter().collect();
    trs.sort_by_key(|t| t.k);
    println!("case {:?} (d = {}), schedule {:?}", case.kind, case.d, schedule);
    for tr in trs {
        let last = tr.points.last().map(|p| p.lambda).unwrap_or(f64::NAN);
        println!(
            "k = {:>3}: lambda = {} ({}, last gap {})",
            tr.k,
            report::num(last),
            report::verdict_label(tr.verdict),
            tr.last_gap.map(report::num).unwrap_or_else(|| "n/a".into())
        );
    }
    if case.kind != CaseKind::LimitCircle {
        println!("inclusion-only: eigenvalue limits contain the spectrum; exactness is not claimed");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_resolvent(args: &Common) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let sys = cfg.system()?;
    let spec = cfg
        .resolvent
        .as_ref()
        .ok_or_else(|| Failure::Usage("the resolvent command needs a 'resolvent' section in the config".into()))?;
    let z = args.z.unwrap_or(C64::new(spec.z[0], spec.z[1]));
    let g = cfg.forcing(&sys)?;
    let zs = z - cfg.shift;
    let (shifted, y, label) = match args.b {
        Some(b) => {
            let (shifted, bc) = cfg.truncation(&sys, b)?;
            let y = RegularResolvent::new(&shifted, &bc, zs)?.apply(&g)?;
            (shifted, y, format!("regular problem on a..{b} by variation of constants"))
        }
        None => {
            let case = cfg.resolve_case(&sys)?;
            if case.kind != CaseKind::LimitCircle {
                return Err(Failure::Usage(format!(
                    "the half-line resolvent is available in the limit-circle case only (case is {:?}); pass --b",
                    case.kind
                )));
            }
            let desc = cfg.descriptor(&sys, &case)?;
            let a = sys.start();
            let end = spec.end.unwrap_or((g.end() + 1).max(a + 32));
            let y = SingularResolvent::new(&desc, zs, &g, cfg.limit_options())?.sequence(end)?;
            (desc.system().clone(), y, "half-line Green kernel with K by horizon doubling".to_string())
        }
    };
    let residuals = residual_column(&shifted, &y, &g, zs)?;
    let worst = residuals.iter().flatten().fold(0.0f64, |m, r| m.max(*r));
    let csv = report::resolvent_csv(&y, &residuals, &label)?;
    print!("{csv}");
    emit(args.out.as_deref(), "resolvent.csv", &csv)?;
    eprintln!("max defining-relation residual {}", report::num(worst));
    Ok(())
}

/// Per-t residual; the last t has no successor and gets none.
fn residual_column(
    sys: &SystemCoefficients,
    y: &HamSequence,
    g: &HamSequence,
    z: C64,
) -> Result<Vec<Option<f64>>, Error> {
    let end = y.end();
    (y.start..=end).map(|t| if t < end { defining_residual(sys, y, g, z, t..=t).map(Some) } else { Ok(None) }).collect()
}
