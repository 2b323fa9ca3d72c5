//! Open-loop torque replay of a stored gait.

use std::fmt;

use stairgait_core::dynamics::{simulate_replay, GaitReplay, HybridTrajectory, Termination};
use stairgait_core::gait::PolynomialGait;
use stairgait_core::model::{State, Vec5};

use crate::config::Setup;
use crate::error::{CliError, CliResult};

/// Simulation horizon past the gait's duration, as a fraction of it.
pub const OVERRUN: f64 = 0.1;
/// Largest per-joint terminal error of an acceptable replay, rad.
pub const TERMINAL_TOLERANCE: f64 = 0.05;
/// Touch-down must occur within this fraction of the gait's duration.
pub const GUARD_WINDOW: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub duration: f64,
    pub torque_scale: f64,
    pub trajectory: HybridTrajectory,
    /// Touch-down time, if the swing foot reached the next tread.
    pub guard_time: Option<f64>,
    /// Time at which the terminal error is measured: touch-down or `T`,
    /// whichever comes first.
    pub terminal_time: f64,
    /// `|q_sim − q_gait|` per joint at `terminal_time`.
    pub terminal_error: Vec5,
    pub post_impact: Option<State>,
}

impl SimulationReport {
    pub fn guard_in_window(&self) -> bool {
        self.guard_time
            .is_some_and(|t| (t - self.duration).abs() <= GUARD_WINDOW * self.duration)
    }

    pub fn passed(&self) -> bool {
        self.guard_in_window() && self.terminal_error.amax() <= TERMINAL_TOLERANCE
    }
}

fn fmt_vec(v: &Vec5) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.5}")).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Display for SimulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "torque scale  {}", self.torque_scale)?;
        match self.guard_time {
            Some(t) => writeln!(
                f,
                "touch-down    {}  at t = {t:.6} s (T = {}, window ±{:.0}%)",
                if self.guard_in_window() {
                    "PASS"
                } else {
                    "FAIL"
                },
                self.duration,
                100.0 * GUARD_WINDOW
            )?,
            None => writeln!(
                f,
                "touch-down    FAIL  none before t = {:.4} s",
                self.trajectory.final_time()
            )?,
        }
        let err_ok = self.terminal_error.amax() <= TERMINAL_TOLERANCE;
        writeln!(
            f,
            "terminal      {}  |q − q_gait| at t = {:.6} s: {} rad (tolerance {TERMINAL_TOLERANCE})",
            if err_ok { "PASS" } else { "FAIL" },
            self.terminal_time,
            fmt_vec(&self.terminal_error)
        )?;
        match &self.post_impact {
            Some(s) => {
                writeln!(f, "post-impact   q  = {}", fmt_vec(&s.q))?;
                writeln!(f, "post-impact   qd = {}", fmt_vec(&s.qd))?;
            }
            None if self.guard_time.is_some() => {
                writeln!(f, "post-impact   impact system singular")?
            }
            None => {}
        }
        Ok(())
    }
}

/// Replays the gait's torques, scaled by `torque_scale`, from its initial state.
pub fn simulate_gait(
    setup: &Setup,
    gait: &PolynomialGait,
    torque_scale: f64,
) -> CliResult<SimulationReport> {
    let x0 = gait.eval_unchecked(0.0).state();
    let replay = GaitReplay {
        gait,
        scale: torque_scale,
        fully_actuated: false,
    };
    let trajectory = simulate_replay(&setup.model, &replay, &x0, &setup.stair, OVERRUN)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let event = trajectory.events.first();
    let guard_time = match trajectory.termination {
        Termination::Touchdown => event.map(|e| e.time),
        Termination::ReachedEnd => None,
    };
    let terminal_time = guard_time.map_or(gait.duration(), |t| t.min(gait.duration()));
    let (t_sample, state) = trajectory
        .sample_at_or_before(terminal_time)
        .ok_or_else(|| CliError::Simulation("empty trajectory".into()))?;
    let terminal_error = (state.q - gait.eval_unchecked(t_sample).q).abs();
    Ok(SimulationReport {
        duration: gait.duration(),
        torque_scale,
        post_impact: event.and_then(|e| e.post),
        trajectory,
        guard_time,
        terminal_time: t_sample,
        terminal_error,
    })
}
