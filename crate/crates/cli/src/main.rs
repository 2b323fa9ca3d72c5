use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use stairgait::checks::check_gait;
use stairgait::config::{BoundarySource, Setup};
use stairgait::export::{
    gait_rows, svg_figures, svg_paths, trajectory_rows, write_csv, CSV_HEADER, DEFAULT_FRAMES,
    DEFAULT_SAMPLES, TRAJECTORY_HEADER,
};
use stairgait::gait_file::METRIC_TOLERANCE;
use stairgait::optimize::optimize;
use stairgait::simulate::simulate_gait;
use stairgait::{CliError, CliResult, GaitFile, RunConfig};
use stairgait_core::optimizer::IterationLog;

#[derive(Parser)]
#[command(
    name = "stairgait",
    version,
    about = "Stair-climbing gait synthesis for a planar five-link biped"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a gait and write it as JSON.
    Optimize {
        /// TOML run configuration; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "gait.json")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        multistart: Option<usize>,
        /// Walk down the stair (negates the rise).
        #[arg(long)]
        descend: bool,
        /// Print every solver iteration.
        #[arg(long)]
        verbose: bool,
    },
    /// Check a gait's boundary placement and every constraint block on the fine grid.
    Validate {
        #[arg(long)]
        gait: PathBuf,
        /// Configuration to check against; the gait's own setup when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        descend: bool,
    },
    /// Replay the gait's torques open loop and report the touch-down.
    Simulate {
        #[arg(long)]
        gait: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        descend: bool,
        /// Trajectory CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Factor applied to the replayed torques.
        #[arg(long, default_value_t = 1.0)]
        torque_scale: f64,
    },
    /// Export time series (CSV) or figures (SVG).
    Export {
        #[arg(long)]
        gait: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        descend: bool,
        #[arg(long, value_enum)]
        format: Format,
        /// CSV file (stdout when absent) or SVG directory (current directory when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_FRAMES)]
        frames: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn load_config(path: Option<&Path>, descend: bool) -> CliResult<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if descend {
        config.stair.rise = -config.stair.rise.abs();
    }
    Ok(config)
}

/// Setup for commands on an existing gait.
fn gait_setup(file: &GaitFile, config: Option<&Path>, descend: bool) -> CliResult<Setup> {
    let mut c = match config {
        Some(p) => load_config(Some(p), false)?,
        None => file.setup.clone(),
    };
    if descend {
        c.stair.rise = -c.stair.rise.abs();
    }
    c.resolve()
}

fn run_optimize(config: RunConfig, out: &Path, verbose: bool) -> CliResult<()> {
    let setup = config.resolve()?;
    if setup.boundary_source == BoundarySource::Regenerated {
        eprintln!(
            "configured boundary misplaces the swing foot by {:.3} m; regenerated consistent boundary",
            setup.configured_check.max_error()
        );
    }
    let stderr = Mutex::new(std::io::stderr());
    let log = |k: usize, e: &IterationLog| {
        if verbose {
            let _ = writeln!(
                stderr.lock().expect("stderr lock"),
                "start {k} iter {:>3}  f {:.6e}  eq {:.2e}  ineq {:.2e}  kkt {:.2e}  step {:.2e}  α {:.3}",
                e.iteration,
                e.objective,
                e.max_eq_violation,
                e.max_ineq_violation,
                e.kkt_residual,
                e.step_norm,
                e.step_length
            );
        }
    };
    let outcome = optimize(&config, log)?;
    for s in &outcome.starts {
        match &s.result {
            Ok(r) => eprintln!(
                "start {}: {} after {} iterations, objective {:.6e}, max eq {:.2e}, max ineq {:.2e}",
                s.start,
                r.status.as_str(),
                r.iterations,
                r.objective,
                r.max_eq_violation,
                r.max_ineq_violation
            ),
            Err(e) => eprintln!("start {}: error: {e}", s.start),
        }
    }
    let mut file = outcome.file.clone();
    file.created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    file.write(out)?;

    let m = &file.metrics;
    println!("gait written to {}", out.display());
    println!(
        "best start {} ({}), cost {:.4}, max|u| {:.3} N·m, max|qd| {:.3} rad/s, max μ {:.4}, max|τv| {:.3e} N·m",
        file.provenance.best_start,
        file.provenance.solver_status,
        m.cost,
        m.max_torque,
        m.max_velocity,
        m.max_friction,
        m.max_tau_v
    );
    print!("{}", outcome.checks);
    if outcome.acceptable() {
        Ok(())
    } else if outcome.status != stairgait_core::optimizer::SqpStatus::Converged {
        Err(CliError::Solver(format!(
            "solver status {}",
            outcome.status.as_str()
        )))
    } else {
        Err(CliError::Solver(
            "converged gait violates a limit on the fine grid".into(),
        ))
    }
}

fn run_validate(gait: &Path, config: Option<&Path>, descend: bool) -> CliResult<()> {
    let file = GaitFile::read(gait)?;
    let setup = gait_setup(&file, config, descend)?;
    let checks = check_gait(&setup, &file.gait()?);
    let recomputed = file.recompute_metrics(&setup)?;
    let (diff, which) = file.metrics.max_difference(&recomputed);
    let metrics_ok = diff <= METRIC_TOLERANCE;
    print!("{checks}");
    println!(
        "{:<13} {}  largest difference {diff:.2e} ({which}) between stored and recomputed metrics",
        "metrics",
        if metrics_ok { "PASS" } else { "FAIL" }
    );
    if checks.passed() && metrics_ok {
        Ok(())
    } else {
        Err(CliError::Validation("one or more checks failed".into()))
    }
}

fn run_simulate(
    gait: &Path,
    config: Option<&Path>,
    descend: bool,
    out: Option<&Path>,
    scale: f64,
) -> CliResult<()> {
    let file = GaitFile::read(gait)?;
    let setup = gait_setup(&file, config, descend)?;
    let report = simulate_gait(&setup, &file.gait()?, scale)?;
    print!("{report}");
    if let Some(path) = out {
        let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_csv(f, &TRAJECTORY_HEADER, &trajectory_rows(&report.trajectory))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Simulation(
            "replay left the gait or missed the touch-down window".into(),
        ))
    }
}

fn run_export(
    gait: &Path,
    config: Option<&Path>,
    descend: bool,
    format: Format,
    out: Option<&Path>,
    samples: usize,
    frames: usize,
) -> CliResult<()> {
    if samples < 2 || frames < 2 {
        return Err(CliError::Usage(
            "--samples and --frames must be at least 2".into(),
        ));
    }
    let file = GaitFile::read(gait)?;
    let setup = gait_setup(&file, config, descend)?;
    let g = file.gait()?;
    match format {
        Format::Csv => {
            let rows = gait_rows(&setup, &g, samples);
            match out {
                Some(p) => {
                    let f = std::fs::File::create(p).map_err(|e| CliError::io(p, e))?;
                    write_csv(f, &CSV_HEADER, &rows)
                }
                None => write_csv(std::io::stdout().lock(), &CSV_HEADER, &rows),
            }
        }
        Format::Svg => {
            let dir = out.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for (path, svg) in svg_paths(dir)
                .iter()
                .zip(svg_figures(&setup, &g, samples, frames))
            {
                std::fs::write(path, svg).map_err(|e| CliError::io(path, e))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize {
            config,
            out,
            seed,
            multistart,
            descend,
            verbose,
        } => load_config(config.as_deref(), descend).and_then(|mut c| {
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(n) = multistart {
                c.multistart = n;
            }
            run_optimize(c, &out, verbose)
        }),
        Command::Validate {
            gait,
            config,
            descend,
        } => run_validate(&gait, config.as_deref(), descend),
        Command::Simulate {
            gait,
            config,
            descend,
            out,
            torque_scale,
        } => run_simulate(
            &gait,
            config.as_deref(),
            descend,
            out.as_deref(),
            torque_scale,
        ),
        Command::Export {
            gait,
            config,
            descend,
            format,
            out,
            samples,
            frames,
        } => run_export(
            &gait,
            config.as_deref(),
            descend,
            format,
            out.as_deref(),
            samples,
            frames,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
