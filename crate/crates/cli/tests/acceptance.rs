//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::process::ExitCode;
use std::time::Instant;

use oracles::{
    closed_form_suite, embedding_suite, energy_suite, impact_suite, inverse_dynamics_suite,
    mass_matrix_suite, qp_suite, rosenbrock_suite, Check,
};
use stairgait::optimize::{optimize, OptimizeOutcome};
use stairgait::simulate::simulate_gait;
use stairgait::{CliResult, RunConfig};

/// Friction requirement of the reference gait, shown for comparison.
const REFERENCE_FRICTION: f64 = 0.69;
const FRICTION_BOUND: f64 = 0.85;
const TORQUE_LIMIT: f64 = 150.0;
const VELOCITY_LIMIT: f64 = 10.0;
const TAU_V_BOUND: f64 = 3.0;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, n: usize, title: &str, check: Check) {
        if !check.passed {
            self.failures += 1;
        }
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict}  {title}: {}", check.detail);
    }
}

fn all(checks: Vec<Check>) -> Check {
    Check {
        passed: checks.iter().all(|c| c.passed),
        detail: checks
            .into_iter()
            .map(|c| c.detail)
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn failed(detail: String) -> Check {
    Check {
        passed: false,
        detail,
    }
}

fn run(config: &RunConfig) -> CliResult<(OptimizeOutcome, f64)> {
    let start = Instant::now();
    let outcome = optimize(config, |_, _| {})?;
    Ok((outcome, start.elapsed().as_secs_f64()))
}

fn limits_check(outcome: &OptimizeOutcome, secs: f64) -> Check {
    let m = &outcome.file.metrics;
    Check {
        passed: outcome.acceptable() && m.max_torque <= TORQUE_LIMIT && m.max_velocity <= VELOCITY_LIMIT,
        detail: format!(
            "status {}, fine-grid checks {}, max|u| {:.3} N·m (limit {TORQUE_LIMIT}), max|qd| {:.3} rad/s \
             (limit {VELOCITY_LIMIT}), {:.1} s",
            outcome.status.as_str(),
            if outcome.checks.passed() { "pass" } else { "fail" },
            m.max_torque,
            m.max_velocity,
            secs
        ),
    }
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let ascent_config = RunConfig::default();

    let ascent = run(&ascent_config);
    match &ascent {
        Ok((outcome, secs)) => {
            let m = &outcome.file.metrics;
            report.line(
                1,
                "default ascent converges within torque and velocity limits",
                limits_check(outcome, *secs),
            );
            report.line(
                2,
                "required friction",
                Check {
                    passed: outcome.acceptable() && m.max_friction <= FRICTION_BOUND,
                    detail: format!(
                        "max μ {:.4} (bound {FRICTION_BOUND}, reference gait {REFERENCE_FRICTION})",
                        m.max_friction
                    ),
                },
            );
            report.line(
                3,
                "zero-dynamics residual",
                Check {
                    passed: outcome.acceptable() && m.max_tau_v <= TAU_V_BOUND,
                    detail: format!(
                        "max|τv| {:.3e} N·m on the fine grid (bound {TAU_V_BOUND})",
                        m.max_tau_v
                    ),
                },
            );
            let sim = outcome
                .file
                .setup()
                .and_then(|setup| simulate_gait(&setup, &outcome.file.gait()?, 1.0));
            let c4 = match sim {
                Ok(r) => {
                    let guard = r.guard_time.filter(|t| (0.45..=0.55).contains(t));
                    Check {
                        passed: outcome.acceptable() && r.terminal_error.amax() <= 0.05 && guard.is_some(),
                        detail: format!(
                            "max terminal joint error {:.2e} rad (bound 0.05), touch-down at {} (window [0.45, 0.55] s)",
                            r.terminal_error.amax(),
                            r.guard_time.map_or("none".into(), |t| format!("{t:.6} s"))
                        ),
                    }
                }
                Err(e) => failed(format!("simulation error: {e}")),
            };
            report.line(4, "open-loop torque replay", c4);
        }
        Err(e) => {
            for (n, title) in [
                (
                    1,
                    "default ascent converges within torque and velocity limits",
                ),
                (2, "required friction"),
                (3, "zero-dynamics residual"),
                (4, "open-loop torque replay"),
            ] {
                report.line(n, title, failed(format!("optimization error: {e}")));
            }
        }
    }

    let mut descent_config = RunConfig::default();
    descent_config.stair.rise = -descent_config.stair.rise;
    let c5 = match run(&descent_config) {
        Ok((outcome, secs)) => {
            let mut c = limits_check(&outcome, secs);
            c.detail = format!("rise {} m, {}", descent_config.stair.rise, c.detail);
            c
        }
        Err(e) => failed(format!("optimization error: {e}")),
    };
    report.line(5, "descent converges under the same limits", c5);

    report.line(
        6,
        "inverse dynamics against Euler-Lagrange oracle",
        inverse_dynamics_suite(100, 1, 1e-6),
    );
    report.line(
        7,
        "passive pinned energy conservation",
        energy_suite(3, 3, 1.0, 1e-6),
    );
    report.line(
        8,
        "mass matrix symmetry and definiteness",
        mass_matrix_suite(100, 2, 1e-10),
    );
    report.line(9, "impact map", impact_suite(100, 5, 1e-9));
    report.line(10, "gait embedding", embedding_suite(200, 11, 1e-12, 1e-8));
    report.line(
        11,
        "optimizer unit suite",
        all(vec![
            qp_suite(60, 21, 1e-8),
            rosenbrock_suite(1e-4),
            closed_form_suite(1e-6),
        ]),
    );

    let c12 = match (&ascent, &run(&ascent_config)) {
        (Ok((first, _)), Ok((second, _))) => Check {
            passed: first.file.alpha == second.file.alpha
                && first.file.to_json() == second.file.to_json(),
            detail: format!(
                "seed {}, {} starts: coefficients {}, gait files {}",
                ascent_config.seed,
                ascent_config.multistart,
                if first.file.alpha == second.file.alpha {
                    "identical"
                } else {
                    "differ"
                },
                if first.file.to_json() == second.file.to_json() {
                    "byte-identical"
                } else {
                    "differ"
                }
            ),
        },
        (Err(e), _) | (_, Err(e)) => failed(format!("optimization error: {e}")),
    };
    report.line(12, "determinism", c12);

    println!("{} of 12 criteria passed", 12 - report.failures);
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
