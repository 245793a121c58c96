//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    error_metrics, lyapunov_trace, ErrorMetrics, LyapunovTrace, DEFAULT_SETTLING_BAND,
};
use crate::io::batch::{batch_jsonl, generate_batch};
use crate::io::export::{
    emit_svg, state_series, write_csv, write_json, ExportError, RunRecord, Series,
};
use crate::io::system_file::{parse_system_file, SystemFile};
use crate::registry::{get_example, list_examples};
use crate::simulation::{simulate, simulate_closed_loop, SimConfig, SimError};
use crate::synthesis::{synthesize, GainSet, SynthesisResult, SystemModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "backstep",
    version,
    about = "Backstepping control-law synthesis and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the control law for a system file and print the derivation.
    Derive {
        file: PathBuf,
        /// Print the derivation as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Simulate a system file and write CSV, JSON and SVG artifacts.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Derive, simulate and analyze a built-in example.
    Example {
        id: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write random chain systems and their laws as JSON lines.
    Batch {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List built-in example ids.
    List,
    /// Write every built-in example as a system file.
    ExportExamples {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run without a control law (u held at zero).
    #[arg(long, conflicts_with = "closed_loop")]
    open_loop: bool,
    /// Run under the derived law (default).
    #[arg(long)]
    closed_loop: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<SystemFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_system_file(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Derive { file, json } => cmd_derive(&load(&file)?, json, out),
        Command::Simulate { file, run } => {
            let f = load(&file)?;
            cmd_run(&f.model, &f.gains, &f.sim, &run, out)
        }
        Command::Example { id, run } => {
            let ex = get_example(&id).map_err(invalid)?;
            writeln!(out, "example {} ({})", ex.id, ex.title).map_err(stdout_error)?;
            cmd_run(&ex.model, &ex.gains, &ex.sim, &run, out)
        }
        Command::Batch {
            count,
            n_min,
            n_max,
            seed,
            out: path,
        } => {
            if count == 0 {
                return Err(invalid("count must be at least 1"));
            }
            let entries = generate_batch(count, n_min..=n_max, seed).map_err(invalid)?;
            fs::write(&path, batch_jsonl(&entries)).map_err(|e| io_error(&path, e))?;
            writeln!(out, "wrote {count} systems to {}", path.display()).map_err(stdout_error)
        }
        Command::List => {
            for id in list_examples() {
                writeln!(out, "{id}").map_err(stdout_error)?;
            }
            Ok(())
        }
        Command::ExportExamples { dir } => {
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            for id in list_examples() {
                let ex = get_example(id).map_err(invalid)?;
                let path = dir.join(format!("{id}.sys"));
                fs::write(&path, &ex.source).map_err(|e| io_error(&path, e))?;
                writeln!(out, "{}", path.display()).map_err(stdout_error)?;
            }
            Ok(())
        }
    }
}

fn stdout_error(e: std::io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

fn cmd_derive(f: &SystemFile, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let r = synthesize(&f.model, &f.gains).map_err(invalid)?;
    if json {
        let trace: Vec<serde_json::Value> = r
            .trace
            .iter()
            .map(|(name, e)| serde_json::json!({ "name": name, "expr": e.to_string() }))
            .collect();
        let doc = serde_json::json!({
            "system": f.model.name,
            "law": r.u.to_string(),
            "gains": r.gains,
            "trace": trace,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out, "{text}").map_err(stdout_error)
    } else {
        for (name, e) in &r.trace {
            writeln!(out, "{name} = {e}").map_err(stdout_error)?;
        }
        Ok(())
    }
}

fn bindings(m: &SystemModel, cfg: &SimConfig) -> BTreeMap<String, f64> {
    let mut b = m.param_defaults();
    b.extend(cfg.param_values.iter().map(|(k, v)| (k.clone(), *v)));
    b.extend(cfg.gain_values.iter().map(|(k, v)| (k.clone(), *v)));
    b
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Diverged { .. } => CliError::Diverged(e.to_string()),
        other => invalid(other),
    }
}

fn cmd_run(
    m: &SystemModel,
    gains: &GainSet,
    cfg: &SimConfig,
    args: &RunArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let law: Option<SynthesisResult> = if args.open_loop {
        None
    } else {
        Some(synthesize(m, gains).map_err(invalid)?)
    };
    let traj = match &law {
        Some(r) => simulate_closed_loop(m, r, cfg),
        None => simulate(m, None, cfg),
    }
    .map_err(sim_error)?;
    let desired = cfg.desired_state(m.n());
    let metrics: ErrorMetrics =
        error_metrics(&traj, &desired, DEFAULT_SETTLING_BAND).map_err(invalid)?;
    let lyap: Option<LyapunovTrace> = match &law {
        Some(r) => Some(lyapunov_trace(r, &m.states, &traj, &bindings(m, cfg)).map_err(invalid)?),
        None => None,
    };

    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_csv(&traj, &m.states, &m.control, &dir.join("trajectory.csv"))?;
    let record = RunRecord::new(
        m,
        law.as_ref().map(|r| &r.u),
        cfg,
        &traj,
        metrics.clone(),
        lyap.clone(),
    );
    write_json(&record, &dir.join("results.json"))?;
    emit_svg(
        &format!("{}: states", m.name),
        &traj.times,
        &state_series(&traj, &m.states),
        &dir.join("states.svg"),
    )?;
    emit_svg(
        &format!("{}: control", m.name),
        &traj.times,
        &[Series {
            name: m.control.clone(),
            values: traj.controls.clone(),
        }],
        &dir.join("control.svg"),
    )?;

    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(stdout_error);
    match &law {
        Some(r) => w(out, format!("{} = {}", m.control, r.u))?,
        None => w(
            out,
            format!("open loop, {} = {}", m.control, cfg.open_loop_u),
        )?,
    }
    let last = traj.final_state().unwrap_or_default();
    for (i, s) in m.states.iter().enumerate() {
        w(
            out,
            format!(
                "{s}: final {:.6e}  rmse {:.6e}  iae {:.6e}  max {:.6e}",
                last[i], metrics.rmse[i], metrics.iae[i], metrics.max_abs[i]
            ),
        )?;
    }
    match metrics.settling_time {
        Some(t) => w(out, format!("settling time: {t:.4}"))?,
        None => w(out, "settling time: not settled".to_string())?,
    }
    if let Some(l) = &lyap {
        w(out, format!("lyapunov non-increasing: {}", l.nonincreasing))?;
    }
    w(out, format!("artifacts written to {}", dir.display()))
}
