//! Cost and constraint residuals of the gait program.
//!
//! Every inequality residual follows the `≤ 0` feasible convention.

use alloc::vec::Vec;
use core::f64::consts::PI;
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DVector;

use crate::dynamics::{motion_loads, MotionLoads};
use crate::error::{invalid, Error, Result};
use crate::gait::{
    embed, uniform_grid, BoundaryConditions, FreeParams, PolynomialGait, FREE_PER_JOINT, N_FREE,
};
use crate::model::{stair_distance, swing_foot, RobotModel, StairGeometry, Vec2};
use crate::optimizer::{Evaluation, Nlp, SqpOptions};

/// Physical limits imposed along the gait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub torque_max: f64,
    pub velocity_max: f64,
    pub friction_max: f64,
    pub vertical_force_min: f64,
    /// `[lo, hi]` flexion range of the stance knee (`q3`) and swing knee (`q5`).
    pub knee_range: [[f64; 2]; 2],
    pub clearance_min: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            torque_max: 150.0,
            velocity_max: 10.0,
            friction_max: 0.69,
            vertical_force_min: 5.0,
            knee_range: [[0.05, 2.0]; 2],
            clearance_min: 0.01,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("torque_max", self.torque_max),
            ("velocity_max", self.velocity_max),
            ("friction_max", self.friction_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.vertical_force_min.is_finite() && self.vertical_force_min >= 0.0) {
            return Err(invalid("vertical_force_min", "must be finite and ≥ 0"));
        }
        if !(self.clearance_min.is_finite() && self.clearance_min >= 0.0) {
            return Err(invalid("clearance_min", "must be finite and ≥ 0"));
        }
        for [lo, hi] in self.knee_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("knee_range", "needs finite lo < hi"));
            }
        }
        Ok(())
    }

    /// Required clearance envelope, zero at both ends of the step.
    pub fn clearance_envelope(&self, t: f64, duration: f64) -> f64 {
        if t <= 0.0 || t >= duration {
            return 0.0;
        }
        self.clearance_min * (PI * t / duration).sin()
    }
}

/// Sample counts of the collocation grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_ineq: usize,
    pub n_zd: usize,
    pub n_quad: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_ineq: 50,
            n_zd: 11,
            n_quad: 101,
        }
    }
}

/// Refinement factor of the reporting grid over the inequality grid: the
/// fine grid has `FINE_GRID_FACTOR · n_ineq` intervals.
pub const FINE_GRID_FACTOR: usize = 10;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_zd == 0 || self.n_zd > N_FREE {
            return Err(Error::Config(alloc::format!(
                "n_zd = {} must lie in 1..={N_FREE} (free-parameter count)",
                self.n_zd
            )));
        }
        if self.n_ineq < 10 {
            return Err(Error::Config(alloc::format!(
                "n_ineq = {} must be at least 10",
                self.n_ineq
            )));
        }
        if self.n_quad < 3 || self.n_quad.is_multiple_of(2) {
            return Err(Error::Config(alloc::format!(
                "n_quad = {} must be odd and at least 3",
                self.n_quad
            )));
        }
        Ok(())
    }

    /// Points of the fine reporting grid, endpoints included.
    pub fn fine_samples(&self) -> usize {
        FINE_GRID_FACTOR * self.n_ineq + 1
    }
}

/// Composite Simpson rule over equally spaced samples spanning `duration`.
pub fn simpson(values: &[f64], duration: f64) -> f64 {
    let n = values.len();
    assert!(
        n >= 3 && n % 2 == 1,
        "Simpson's rule needs an odd sample count ≥ 3"
    );
    let h = duration / (n - 1) as f64;
    let interior: f64 = values[1..n - 1]
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (values[0] + interior + values[n - 1])
}

fn loads_at(model: &RobotModel, gait: &PolynomialGait, t: f64) -> MotionLoads {
    let s = gait.eval_unchecked(t);
    motion_loads(model, &s.q, &s.qd, &s.qdd)
}

/// Integral of `Σ u_i²` over the step.
pub fn cost(model: &RobotModel, gait: &PolynomialGait, grid: &GridSpec) -> f64 {
    let values: Vec<f64> = gait
        .uniform_times(grid.n_quad)
        .map(|t| loads_at(model, gait, t).torques.norm_squared())
        .collect();
    simpson(&values, gait.duration())
}

/// Unactuated-row residual `tau_v` at the zero-dynamics samples.
pub fn zero_dynamics_residuals(
    model: &RobotModel,
    gait: &PolynomialGait,
    grid: &GridSpec,
) -> Vec<f64> {
    gait.uniform_times(grid.n_zd)
        .map(|t| loads_at(model, gait, t).tau_v)
        .collect()
}

/// Inequality block identifiers, in concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Torque,
    Velocity,
    Friction,
    Contact,
    Clearance,
    Knee,
}

impl Block {
    pub const ALL: [Block; 6] = [
        Block::Torque,
        Block::Velocity,
        Block::Friction,
        Block::Contact,
        Block::Clearance,
        Block::Knee,
    ];

    /// Residual entries per sample.
    pub const fn per_sample(self) -> usize {
        match self {
            Block::Torque => 4,
            Block::Velocity => 5,
            Block::Friction | Block::Contact | Block::Clearance => 1,
            Block::Knee => 4,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Block::Torque => "torque",
            Block::Velocity => "velocity",
            Block::Friction => "friction",
            Block::Contact => "contact",
            Block::Clearance => "clearance",
            Block::Knee => "knee",
        }
    }
}

/// Total inequality entries per sample.
pub const INEQ_PER_SAMPLE: usize = 4 + 5 + 1 + 1 + 1 + 4;

/// Inequality residuals grouped by block, sample-major within each block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InequalityBlocks {
    pub times: Vec<f64>,
    pub torque: Vec<f64>,
    pub velocity: Vec<f64>,
    pub friction: Vec<f64>,
    pub contact: Vec<f64>,
    pub clearance: Vec<f64>,
    pub knee: Vec<f64>,
}

impl InequalityBlocks {
    pub fn block(&self, b: Block) -> &[f64] {
        match b {
            Block::Torque => &self.torque,
            Block::Velocity => &self.velocity,
            Block::Friction => &self.friction,
            Block::Contact => &self.contact,
            Block::Clearance => &self.clearance,
            Block::Knee => &self.knee,
        }
    }

    pub fn len(&self) -> usize {
        Block::ALL.iter().map(|b| self.block(*b).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All blocks concatenated in [`Block::ALL`] order.
    pub fn concat(&self) -> Vec<f64> {
        Block::ALL
            .iter()
            .flat_map(|b| self.block(*b).iter().copied())
            .collect()
    }

    /// Largest residual of a block with the time it occurs.
    pub fn worst(&self, b: Block) -> Option<(f64, f64)> {
        let per = b.per_sample();
        self.block(b)
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(f64, f64)>, (i, &v)| match acc {
                Some((w, _)) if w >= v => acc,
                _ => Some((v, self.times[i / per])),
            })
    }

    /// Times of samples with any residual above `tol` in block `b`.
    pub fn violation_times(&self, b: Block, tol: f64) -> Vec<f64> {
        let per = b.per_sample();
        self.times
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                self.block(b)[j * per..(j + 1) * per]
                    .iter()
                    .any(|v| *v > tol)
            })
            .map(|(_, t)| *t)
            .collect()
    }
}

/// Inequality residuals at arbitrary sample times.
pub fn inequality_residuals_at(
    model: &RobotModel,
    gait: &PolynomialGait,
    stair: &StairGeometry,
    limits: &Limits,
    times: impl IntoIterator<Item = f64>,
) -> InequalityBlocks {
    let mut out = InequalityBlocks::default();
    let duration = gait.duration();
    for t in times {
        let s = gait.eval_unchecked(t);
        let loads = motion_loads(model, &s.q, &s.qd, &s.qdd);
        out.times.push(t);
        out.torque
            .extend(loads.torques.iter().map(|u| u.abs() - limits.torque_max));
        out.velocity
            .extend(s.qd.iter().map(|v| v.abs() - limits.velocity_max));
        let f = loads.contact;
        out.friction
            .push(f.horizontal.abs() - limits.friction_max * f.vertical);
        out.contact.push(limits.vertical_force_min - f.vertical);
        let (foot, _) = swing_foot(model, &s.q);
        out.clearance
            .push(limits.clearance_envelope(t, duration) - stair_distance(stair, &foot));
        for (k, [lo, hi]) in [(2, limits.knee_range[0]), (4, limits.knee_range[1])] {
            out.knee.push(lo - s.q[k]);
            out.knee.push(s.q[k] - hi);
        }
    }
    out
}

/// Inequality residuals on the `n_ineq` grid.
pub fn inequality_residuals(
    model: &RobotModel,
    gait: &PolynomialGait,
    stair: &StairGeometry,
    limits: &Limits,
    grid: &GridSpec,
) -> InequalityBlocks {
    inequality_residuals_at(model, gait, stair, limits, gait.uniform_times(grid.n_ineq))
}

/// Cost, equalities and inequalities of one gait in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBundle {
    pub cost: f64,
    pub eq: Vec<f64>,
    pub ineq: InequalityBlocks,
}

impl ResidualBundle {
    pub fn evaluate(
        model: &RobotModel,
        gait: &PolynomialGait,
        stair: &StairGeometry,
        limits: &Limits,
        grid: &GridSpec,
    ) -> Self {
        Self {
            cost: cost(model, gait, grid),
            eq: zero_dynamics_residuals(model, gait, grid),
            ineq: inequality_residuals(model, gait, stair, limits, grid),
        }
    }

    pub fn is_feasible(&self, tol_eq: f64) -> bool {
        self.eq.iter().all(|v| v.abs() <= tol_eq) && self.ineq.concat().iter().all(|v| *v <= 0.0)
    }
}

/// Summary figures of a gait, sampled on the fine grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitMetrics {
    pub cost: f64,
    pub max_torque: f64,
    pub max_velocity: f64,
    /// Largest `|F_h| / F_v`.
    pub max_friction: f64,
    pub min_vertical_force: f64,
    pub max_tau_v: f64,
    /// Smallest `stair_distance − ε(t)` of the swing foot.
    pub min_clearance_margin: f64,
    /// Largest knee-range excursion (≤ 0 inside the range).
    pub max_knee_excursion: f64,
}

impl GaitMetrics {
    pub fn compute(
        model: &RobotModel,
        gait: &PolynomialGait,
        stair: &StairGeometry,
        limits: &Limits,
        grid: &GridSpec,
    ) -> Self {
        let mut m = GaitMetrics {
            cost: cost(model, gait, grid),
            max_torque: 0.0,
            max_velocity: 0.0,
            max_friction: 0.0,
            min_vertical_force: f64::INFINITY,
            max_tau_v: 0.0,
            min_clearance_margin: f64::INFINITY,
            max_knee_excursion: f64::NEG_INFINITY,
        };
        let ineq = inequality_residuals_at(
            model,
            gait,
            stair,
            limits,
            gait.uniform_times(grid.fine_samples()),
        );
        for &t in &ineq.times {
            let s = gait.eval_unchecked(t);
            let loads = motion_loads(model, &s.q, &s.qd, &s.qdd);
            m.max_torque = m.max_torque.max(loads.torques.amax());
            m.max_velocity = m.max_velocity.max(s.qd.amax());
            m.max_friction = m.max_friction.max(loads.contact.required_friction());
            m.min_vertical_force = m.min_vertical_force.min(loads.contact.vertical);
            m.max_tau_v = m.max_tau_v.max(loads.tau_v.abs());
        }
        m.min_clearance_margin = -ineq
            .clearance
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        m.max_knee_excursion = ineq.knee.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m
    }

    pub fn within(&self, limits: &Limits) -> bool {
        self.max_torque <= limits.torque_max
            && self.max_velocity <= limits.velocity_max
            && self.max_friction <= limits.friction_max
            && self.min_vertical_force >= limits.vertical_force_min
            && self.min_clearance_margin >= 0.0
            && self.max_knee_excursion <= 0.0
    }
}

/// Normalization applied to the program handed to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub cost: f64,
    pub torque: f64,
    pub velocity: f64,
    pub force: f64,
    pub clearance: f64,
}

/// Length scale of the clearance block.
const CLEARANCE_SCALE: f64 = 0.01;

impl Scales {
    fn new(model: &RobotModel, limits: &Limits, duration: f64) -> Self {
        Self {
            cost: 4.0 * limits.torque_max * limits.torque_max * duration,
            torque: limits.torque_max,
            velocity: limits.velocity_max,
            force: model.total_mass() * model.gravity.max(1.0),
            clearance: CLEARANCE_SCALE,
        }
    }

    fn of(&self, b: Block) -> f64 {
        match b {
            Block::Torque => self.torque,
            Block::Velocity => self.velocity,
            Block::Friction | Block::Contact => self.force,
            Block::Clearance => self.clearance,
            Block::Knee => 1.0,
        }
    }
}

/// The gait program over scaled free coefficients.
///
/// The decision variable is `x_{k,i} = θ_{k,i}·Tⁱ`, the contribution of each
/// free coefficient at the end of the step, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitProblem {
    pub model: RobotModel,
    pub stair: StairGeometry,
    pub bc: BoundaryConditions,
    pub limits: Limits,
    pub grid: GridSpec,
    pub scales: Scales,
}

/// Builds the gait program; all inputs are validated.
pub fn assemble(
    model: &RobotModel,
    stair: &StairGeometry,
    bc: &BoundaryConditions,
    limits: &Limits,
    grid: &GridSpec,
) -> Result<GaitProblem> {
    model.validate()?;
    stair.validate(model.stance_leg_length())?;
    limits.validate()?;
    grid.validate()?;
    BoundaryConditions::new(bc.q_init, bc.q_final, bc.duration)?;
    Ok(GaitProblem {
        model: *model,
        stair: *stair,
        bc: *bc,
        limits: *limits,
        grid: *grid,
        scales: Scales::new(model, limits, bc.duration),
    })
}

impl GaitProblem {
    pub fn theta_from_x(&self, x: &DVector<f64>) -> FreeParams {
        FreeParams::from_fn(|j, _| x[j] / self.bc.duration.powi((1 + j % FREE_PER_JOINT) as i32))
    }

    pub fn x_from_theta(&self, theta: &FreeParams) -> DVector<f64> {
        DVector::from_fn(N_FREE, |j, _| {
            theta[j] * self.bc.duration.powi((1 + j % FREE_PER_JOINT) as i32)
        })
    }

    pub fn gait(&self, theta: &FreeParams) -> PolynomialGait {
        embed(theta, &self.bc)
    }

    pub fn residuals(&self, theta: &FreeParams) -> ResidualBundle {
        ResidualBundle::evaluate(
            &self.model,
            &self.gait(theta),
            &self.stair,
            &self.limits,
            &self.grid,
        )
    }

    pub fn metrics(&self, theta: &FreeParams) -> GaitMetrics {
        GaitMetrics::compute(
            &self.model,
            &self.gait(theta),
            &self.stair,
            &self.limits,
            &self.grid,
        )
    }

    /// Total number of inequality residuals.
    pub fn inequality_count(&self) -> usize {
        INEQ_PER_SAMPLE * self.grid.n_ineq
    }

    /// Solver settings tuned for this program: steps are bounded to one
    /// radian per variable so that early iterates stay near the stair.
    pub fn solver_options() -> SqpOptions {
        SqpOptions {
            max_step: GAIT_STEP_BOUND,
            ..SqpOptions::default()
        }
    }
}

/// Default per-variable step bound for gait programs, in radians.
pub const GAIT_STEP_BOUND: f64 = 1.0;

impl Nlp for GaitProblem {
    fn dimension(&self) -> usize {
        N_FREE
    }

    fn n_eq(&self) -> usize {
        self.grid.n_zd
    }

    fn n_ineq(&self) -> usize {
        self.inequality_count()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        if x.len() != N_FREE {
            return Err(Error::Input(alloc::format!(
                "expected {N_FREE} variables, got {}",
                x.len()
            )));
        }
        let r = self.residuals(&self.theta_from_x(x));
        let s = &self.scales;
        let ineq: Vec<f64> = Block::ALL
            .iter()
            .flat_map(|b| {
                let k = s.of(*b);
                r.ineq.block(*b).iter().map(move |v| v / k)
            })
            .collect();
        Ok(Evaluation {
            f: r.cost / s.cost,
            eq: DVector::from_iterator(r.eq.len(), r.eq.iter().map(|v| v / s.torque)),
            ineq: DVector::from_vec(ineq),
        })
    }
}

/// Swing-foot position along the gait at `t`.
pub fn swing_foot_at(model: &RobotModel, gait: &PolynomialGait, t: f64) -> Vec2 {
    swing_foot(model, &gait.eval_unchecked(t).q).0
}

/// Uniform times of the fine reporting grid.
pub fn fine_times(gait: &PolynomialGait, grid: &GridSpec) -> impl Iterator<Item = f64> {
    uniform_grid(gait.duration(), grid.fine_samples())
}
