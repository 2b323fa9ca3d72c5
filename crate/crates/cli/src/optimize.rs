//! Multistart gait optimization.

use stairgait_core::constraints::{assemble, GaitProblem};
use stairgait_core::gait::{initial_guess, perturbed_guess, FreeParams};
use stairgait_core::optimizer::{minimize_with, select_best, IterationLog, SqpResult, SqpStatus};

use crate::checks::{check_gait, GaitChecks};
use crate::config::{RunConfig, Setup};
use crate::error::{CliError, CliResult};
use crate::gait_file::{GaitFile, Provenance, CONVENTION, SCHEMA_VERSION};
use crate::parallel::{available_threads, Parallel};

/// Outcome of one start.
#[derive(Debug, Clone)]
pub struct StartResult {
    pub start: usize,
    pub result: Result<SqpResult, String>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub file: GaitFile,
    pub starts: Vec<StartResult>,
    pub checks: GaitChecks,
    pub status: SqpStatus,
}

impl OptimizeOutcome {
    /// Converged and within every limit on the fine grid.
    pub fn acceptable(&self) -> bool {
        self.status == SqpStatus::Converged && self.checks.passed()
    }
}

/// Seed of start `k`: the straight-line guess first, then perturbations.
pub fn start_point(setup: &Setup, config: &RunConfig, k: usize) -> FreeParams {
    if k == 0 {
        initial_guess(&setup.bc)
    } else {
        perturbed_guess(
            &setup.bc,
            config.optimizer.perturbation,
            config.seed.wrapping_add(k as u64),
        )
    }
}

/// Runs every start, picks the best and packages the result. `log` receives
/// the start index with each iteration record and may be called from
/// several threads.
pub fn optimize<L>(config: &RunConfig, log: L) -> CliResult<OptimizeOutcome>
where
    L: Fn(usize, &IterationLog) + Sync,
{
    let setup = config.resolve()?;
    let problem = assemble(
        &setup.model,
        &setup.stair,
        &setup.bc,
        &setup.limits,
        &setup.grid,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let n = config.multistart;
    let threads_per_start = (available_threads() / n).max(1);

    let run = |k: usize| -> StartResult {
        let x0 = problem.x_from_theta(&start_point(&setup, config, k));
        let p = Parallel::new(&problem, threads_per_start);
        let result = minimize_with(&p, &x0, &setup.options, |entry: &IterationLog| {
            log(k, entry)
        });
        StartResult {
            start: k,
            result: result.map_err(|e| e.to_string()),
        }
    };
    let starts: Vec<StartResult> = if n == 1 {
        vec![run(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..n).map(|k| s.spawn(move || run(k))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("start thread panicked"))
                .collect()
        })
    };

    let ok: Vec<(usize, &SqpResult)> = starts
        .iter()
        .filter_map(|s| s.result.as_ref().ok().map(|r| (s.start, r)))
        .collect();
    let candidates: Vec<SqpResult> = ok.iter().map(|(_, r)| (*r).clone()).collect();
    let Some(best) = select_best(&candidates, setup.options.constraint_tolerance) else {
        let reasons: Vec<String> = starts
            .iter()
            .map(|s| {
                format!(
                    "start {}: {}",
                    s.start,
                    s.result.as_ref().err().map_or("no result", |e| e)
                )
            })
            .collect();
        return Err(CliError::Solver(format!(
            "every start failed ({})",
            reasons.join("; ")
        )));
    };
    let (best_start, best) = (ok[best].0, &candidates[best]);
    let file = package(config, &setup, &problem, best_start, best)?;
    let checks = check_gait(&setup, &file.gait()?);
    Ok(OptimizeOutcome {
        file,
        starts,
        checks,
        status: best.status,
    })
}

fn package(
    config: &RunConfig,
    setup: &Setup,
    problem: &GaitProblem,
    best_start: usize,
    best: &SqpResult,
) -> CliResult<GaitFile> {
    let theta = problem.theta_from_x(&best.x);
    let gait = problem.gait(&theta);
    Ok(GaitFile {
        schema_version: SCHEMA_VERSION,
        convention: CONVENTION.to_string(),
        duration: gait.duration(),
        alpha: GaitFile::alpha_rows(gait.alpha()),
        metrics: problem.metrics(&theta).into(),
        provenance: Provenance {
            config_hash: config.hash(),
            seed: config.seed,
            multistart: config.multistart,
            best_start,
            solver_status: best.status.as_str().to_string(),
            iterations: best.iterations,
            kkt_residual: best.kkt_residual,
            max_eq_violation: best.max_eq_violation,
            max_ineq_violation: best.max_ineq_violation,
            boundary_source: setup.boundary_source,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        setup: config.pinned_to(setup),
        created_unix: None,
    })
}
