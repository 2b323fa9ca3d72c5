//! Residual blocks of a gait on the fine grid, each with a pass tolerance.

use std::fmt;

use stairgait_core::constraints::{fine_times, inequality_residuals_at, Block};
use stairgait_core::dynamics::motion_loads;
use stairgait_core::gait::PolynomialGait;
use stairgait_core::model::{check_boundary, BoundaryCheck};

use crate::config::Setup;

/// Relative slack on the torque, velocity and force limits between grid points.
pub const LIMIT_SLACK: f64 = 1e-6;
/// Allowed knee-range excursion between grid points, rad.
pub const KNEE_SLACK: f64 = 1e-3;
/// Bound on `|τ_v|` as a fraction of the torque limit.
pub const ZERO_DYNAMICS_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub name: &'static str,
    pub unit: &'static str,
    /// Largest residual (≤ 0 is feasible) and its time.
    pub worst: f64,
    pub at: f64,
    pub tolerance: f64,
    /// Sample times whose residual exceeds the tolerance.
    pub violations: Vec<f64>,
}

impl BlockCheck {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

impl fmt::Display for BlockCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<13} {}  worst residual {:+.4e} {} at t = {:.4} s (tolerance {:.1e})",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.worst,
            self.unit,
            self.at,
            self.tolerance
        )?;
        if !self.violations.is_empty() {
            let shown: Vec<String> = self
                .violations
                .iter()
                .take(8)
                .map(|t| format!("{t:.4}"))
                .collect();
            let more = self.violations.len().saturating_sub(8);
            write!(f, "\n              violated at t = {}", shown.join(", "))?;
            if more > 0 {
                write!(f, " and {more} more samples")?;
            }
        }
        Ok(())
    }
}

/// Swing-foot placement of a gait's end configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub check: BoundaryCheck,
    pub tolerance: f64,
}

impl BoundaryReport {
    pub fn passed(&self) -> bool {
        self.check.passes(self.tolerance)
    }
}

impl fmt::Display for BoundaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.check;
        write!(
            f,
            "{:<13} {}  swing foot starts at ({:.4}, {:.4}) m and ends at ({:.4}, {:.4}) m, \
             placement error {:.2e} m (tolerance {:.1e})",
            "boundary",
            if self.passed() { "PASS" } else { "FAIL" },
            c.initial_swing.x,
            c.initial_swing.y,
            c.final_swing.x,
            c.final_swing.y,
            c.max_error(),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitChecks {
    pub boundary: BoundaryReport,
    pub blocks: Vec<BlockCheck>,
}

impl GaitChecks {
    pub fn passed(&self) -> bool {
        self.boundary.passed() && self.blocks.iter().all(BlockCheck::passed)
    }

    pub fn block(&self, name: &str) -> Option<&BlockCheck> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

impl fmt::Display for GaitChecks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.boundary)?;
        for b in &self.blocks {
            writeln!(f, "{b}")?;
        }
        Ok(())
    }
}

fn tolerance(setup: &Setup, block: Block) -> (f64, &'static str) {
    let weight = setup.model.total_mass() * setup.model.gravity;
    let l = &setup.limits;
    match block {
        Block::Torque => (LIMIT_SLACK * l.torque_max, "N·m"),
        Block::Velocity => (LIMIT_SLACK * l.velocity_max, "rad/s"),
        Block::Friction | Block::Contact => (LIMIT_SLACK * weight, "N"),
        // The envelope is a safety margin enforced at the constraint samples;
        // between them the foot may dip into it but must not reach the stair.
        Block::Clearance => (l.clearance_min, "m"),
        Block::Knee => (KNEE_SLACK, "rad"),
    }
}

/// Boundary placement, every inequality block and the zero-dynamics
/// residual, evaluated on the fine grid.
pub fn check_gait(setup: &Setup, gait: &PolynomialGait) -> GaitChecks {
    let q0 = gait.eval_unchecked(0.0).q;
    let q1 = gait.eval_unchecked(gait.duration()).q;
    let boundary = BoundaryReport {
        check: check_boundary(&setup.model, &setup.stair, &q0, &q1),
        tolerance: setup.boundary_tolerance,
    };

    let times: Vec<f64> = fine_times(gait, &setup.grid).collect();
    let ineq = inequality_residuals_at(
        &setup.model,
        gait,
        &setup.stair,
        &setup.limits,
        times.iter().copied(),
    );
    let mut blocks: Vec<BlockCheck> = Block::ALL
        .iter()
        .map(|&b| {
            let (tol, unit) = tolerance(setup, b);
            let (worst, at) = ineq.worst(b).unwrap_or((f64::NEG_INFINITY, 0.0));
            BlockCheck {
                name: b.name(),
                unit,
                worst,
                at,
                tolerance: tol,
                violations: ineq.violation_times(b, tol),
            }
        })
        .collect();

    let tau_tol = ZERO_DYNAMICS_FRACTION * setup.limits.torque_max;
    let tau_v: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s = gait.eval_unchecked(t);
            motion_loads(&setup.model, &s.q, &s.qd, &s.qdd).tau_v.abs()
        })
        .collect();
    let (worst, at) = tau_v
        .iter()
        .zip(&times)
        .fold((f64::NEG_INFINITY, 0.0), |acc, (&v, &t)| {
            if v > acc.0 {
                (v, t)
            } else {
                acc
            }
        });
    blocks.push(BlockCheck {
        name: "zero-dynamics",
        unit: "N·m",
        worst,
        at,
        tolerance: tau_tol,
        violations: tau_v
            .iter()
            .zip(&times)
            .filter(|(v, _)| **v > tau_tol)
            .map(|(_, t)| *t)
            .collect(),
    });
    GaitChecks { boundary, blocks }
}
