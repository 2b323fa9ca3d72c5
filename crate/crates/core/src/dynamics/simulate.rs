//! Open-loop simulation of the single-support phase with touch-down detection.

use alloc::vec::Vec;

use nalgebra::SVector;

use super::{
    accelerations, impact_velocity_jump, input_map, inverse_dynamics, ImpactResult, Torques,
};
use crate::error::{Error, Result};
use crate::gait::PolynomialGait;
use crate::model::{swing_foot, RelabelMap, RobotModel, StairGeometry, State, Vec5};

type Vec10 = SVector<f64, 10>;

/// Generalized forcing applied during a simulation.
pub trait TorqueSource {
    fn generalized_force(&self, model: &RobotModel, t: f64, state: &State) -> Vec5;
}

/// No actuation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl TorqueSource for Passive {
    fn generalized_force(&self, _: &RobotModel, _: f64, _: &State) -> Vec5 {
        Vec5::zeros()
    }
}

/// Replays the torques computed by inverse dynamics along a gait,
/// independent of the simulated state. Past the gait's end the last torque
/// is held.
#[derive(Debug, Clone, Copy)]
pub struct GaitReplay<'a> {
    pub gait: &'a PolynomialGait,
    pub scale: f64,
    /// Also apply the unactuated residual, as if the robot had an ankle motor.
    pub fully_actuated: bool,
}

impl<'a> GaitReplay<'a> {
    pub fn new(gait: &'a PolynomialGait) -> Self {
        Self {
            gait,
            scale: 1.0,
            fully_actuated: false,
        }
    }
}

impl TorqueSource for GaitReplay<'_> {
    fn generalized_force(&self, model: &RobotModel, t: f64, _: &State) -> Vec5 {
        let s = self.gait.eval_unchecked(t.clamp(0.0, self.gait.duration()));
        let mut tau = inverse_dynamics(model, &s.q, &s.qd, &s.qdd) * self.scale;
        if !self.fully_actuated {
            tau[0] = 0.0;
        }
        tau
    }
}

impl<F> TorqueSource for F
where
    F: Fn(f64, &State) -> Vec5,
{
    fn generalized_force(&self, _: &RobotModel, t: f64, state: &State) -> Vec5 {
        self(t, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub t_end: f64,
    pub integrator: super::IntegratorOptions,
    /// Stop when the swing foot lands on the next tread of this stair.
    pub guard: Option<StairGeometry>,
    pub relabel: RelabelMap,
}

impl SimulationOptions {
    pub fn until(t_end: f64) -> Self {
        Self {
            t_end,
            integrator: Default::default(),
            guard: None,
            relabel: RelabelMap::default(),
        }
    }
}

/// Touch-down event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactRecord {
    pub time: f64,
    pub pre: State,
    /// `None` when the impact system could not be solved.
    pub post: Option<State>,
    pub impact: Option<ImpactResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    Touchdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Actuator torques applied at each sample.
    pub torques: Vec<Torques>,
    pub events: Vec<ImpactRecord>,
    pub termination: Termination,
}

impl HybridTrajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> Option<&State> {
        self.states.last()
    }

    /// Last recorded sample at or before `t`.
    pub fn sample_at_or_before(&self, t: f64) -> Option<(f64, &State)> {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.checked_sub(1).map(|i| (self.times[i], &self.states[i]))
    }
}

fn pack(s: &State) -> Vec10 {
    let mut x = Vec10::zeros();
    x.fixed_rows_mut::<5>(0).copy_from(&s.q);
    x.fixed_rows_mut::<5>(5).copy_from(&s.qd);
    x
}

fn unpack(x: &Vec10) -> State {
    State::new(
        x.fixed_rows::<5>(0).into_owned(),
        x.fixed_rows::<5>(5).into_owned(),
    )
}

/// Height of the swing foot above the next tread once it is past the riser;
/// positive (no contact possible) before that.
pub fn touchdown_guard(model: &RobotModel, stair: &StairGeometry, state: &State) -> f64 {
    let (foot, _) = swing_foot(model, &state.q);
    if foot.x < stair.next_riser_x() {
        return f64::INFINITY;
    }
    foot.y - stair.rise
}

/// Integrates the pinned dynamics under `source` from `x0`.
pub fn simulate<S: TorqueSource + ?Sized>(
    model: &RobotModel,
    x0: &State,
    source: &S,
    opts: &SimulationOptions,
) -> Result<HybridTrajectory> {
    if !x0.is_finite() {
        return Err(Error::Input("non-finite initial state".into()));
    }
    let dp = super::Dopri5::new(opts.integrator);
    let rhs = |t: f64, x: &Vec10| -> Result<Vec10> {
        let s = unpack(x);
        let tau = source.generalized_force(model, t, &s);
        let qdd = accelerations(model, &s.q, &s.qd, &tau)?;
        let mut dx = Vec10::zeros();
        dx.fixed_rows_mut::<5>(0).copy_from(&s.qd);
        dx.fixed_rows_mut::<5>(5).copy_from(&qdd);
        Ok(dx)
    };
    let guard = opts
        .guard
        .map(|stair| move |_t: f64, x: &Vec10| touchdown_guard(model, &stair, &unpack(x)));

    let b_t = input_map().transpose();
    let mut times = alloc::vec![0.0];
    let mut states = alloc::vec![*x0];
    let mut torques = alloc::vec![b_t * source.generalized_force(model, 0.0, x0)];
    let observer = |t: f64, x: &Vec10| {
        let s = unpack(x);
        times.push(t);
        torques.push(b_t * source.generalized_force(model, t, &s));
        states.push(s);
    };

    let outcome = dp.integrate(rhs, 0.0, pack(x0), opts.t_end, guard, observer)?;

    let mut events = Vec::new();
    let termination = match outcome {
        super::StepOutcome::Reached { .. } => Termination::ReachedEnd,
        super::StepOutcome::Event { t, x } => {
            let pre = unpack(&x);
            let impact = impact_velocity_jump(model, &pre, &opts.relabel).ok();
            events.push(ImpactRecord {
                time: t,
                pre,
                post: impact.map(|r| r.post),
                impact,
            });
            Termination::Touchdown
        }
    };
    if states.last().is_some_and(|s| !s.is_finite()) {
        return Err(Error::Divergence {
            t: *times.last().unwrap(),
        });
    }
    Ok(HybridTrajectory {
        times,
        states,
        torques,
        events,
        termination,
    })
}

/// Tolerance on the match between the initial state and the gait at `t = 0`.
pub const INITIAL_STATE_TOLERANCE: f64 = 1e-6;

/// Replays the gait's actuator torques open loop from `x0` until the swing
/// foot lands on the next tread, or until `overrun_fraction` past the gait's
/// duration with the final torque held.
pub fn simulate_open_loop(
    model: &RobotModel,
    gait: &PolynomialGait,
    x0: &State,
    stair: &StairGeometry,
    overrun_fraction: f64,
) -> Result<HybridTrajectory> {
    simulate_replay(model, &GaitReplay::new(gait), x0, stair, overrun_fraction)
}

/// [`simulate_open_loop`] with an arbitrary replay, e.g. scaled torques.
pub fn simulate_replay(
    model: &RobotModel,
    replay: &GaitReplay<'_>,
    x0: &State,
    stair: &StairGeometry,
    overrun_fraction: f64,
) -> Result<HybridTrajectory> {
    let gait = replay.gait;
    let start = gait.eval_unchecked(0.0);
    let mismatch = (start.q - x0.q).amax().max((start.qd - x0.qd).amax());
    if mismatch.is_nan() || mismatch > INITIAL_STATE_TOLERANCE {
        return Err(Error::Input(alloc::format!(
            "initial state differs from the gait at t = 0 by {mismatch:.3e}"
        )));
    }
    let opts = SimulationOptions {
        t_end: gait.duration() * (1.0 + overrun_fraction.max(0.0)),
        integrator: Default::default(),
        guard: Some(*stair),
        relabel: RelabelMap::default(),
    };
    simulate(model, x0, replay, &opts)
}
