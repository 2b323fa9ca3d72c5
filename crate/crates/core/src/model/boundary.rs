//! Geometric consistency of step boundary configurations and an
//! inverse-kinematics generator for periodic ones.

use super::{
    angle_of, direction, relabel, swing_foot, Configuration, RelabelMap, RobotModel, StairGeometry,
    State, Vec2,
};
use crate::error::{invalid, Result};
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Swing-foot placement errors of a pair of boundary configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    /// Swing foot at the initial configuration (should be on the previous tread).
    pub initial_swing: Vec2,
    /// Swing foot at the final configuration (should be on the next tread).
    pub final_swing: Vec2,
    pub initial_error: f64,
    pub final_error: f64,
}

impl BoundaryCheck {
    pub fn max_error(&self) -> f64 {
        self.initial_error.max(self.final_error)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

/// Checks that the swing foot starts on the previous footprint and ends on
/// the next one, i.e. that the step advances by one `(run, rise)`.
pub fn check_boundary(
    model: &RobotModel,
    stair: &StairGeometry,
    q_init: &Configuration,
    q_final: &Configuration,
) -> BoundaryCheck {
    let (initial_swing, _) = swing_foot(model, q_init);
    let (final_swing, _) = swing_foot(model, q_final);
    BoundaryCheck {
        initial_swing,
        final_swing,
        initial_error: (initial_swing - stair.previous_footprint()).norm(),
        final_error: (final_swing - stair.next_footprint()).norm(),
    }
}

/// Shape parameters for [`regenerate_boundary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDesign {
    /// Absolute torso angle held at both boundaries (negative leans forward).
    pub torso_angle: f64,
    /// Horizontal hip position at touch-down as a fraction of the run.
    pub hip_advance: f64,
    /// Hip-to-foot distance of the straighter leg as a fraction of leg length.
    pub leg_extension: f64,
}

impl Default for BoundaryDesign {
    fn default() -> Self {
        Self {
            torso_angle: -0.1,
            hip_advance: 0.3,
            leg_extension: 0.98,
        }
    }
}

/// Knee-forward two-link solution from `base` to `target`.
/// Returns the absolute angles of the first and second link.
fn two_link(
    base: Vec2,
    target: Vec2,
    first: f64,
    second: f64,
    knee_sign: f64,
) -> Result<(f64, f64)> {
    let r = target - base;
    let d = r.norm();
    if d > first + second || d < (first - second).abs() || d == 0.0 {
        return Err(invalid(
            "boundary",
            alloc::format!("target at distance {d:.4} m is unreachable"),
        ));
    }
    let cos_g = ((first * first + d * d - second * second) / (2.0 * first * d)).clamp(-1.0, 1.0);
    let a = angle_of(&r) + knee_sign * cos_g.acos();
    let knee = base + direction(a) * first;
    Ok((a, angle_of(&(target - knee))))
}

/// Builds boundary configurations with the stance foot mid-tread and the swing
/// foot on the neighbouring treads, such that the final configuration maps
/// onto the initial one under the leg swap.
pub fn regenerate_boundary(
    model: &RobotModel,
    stair: &StairGeometry,
    design: &BoundaryDesign,
) -> Result<(Configuration, Configuration)> {
    if !(design.leg_extension > 0.0 && design.leg_extension < 1.0) {
        return Err(invalid("leg_extension", "must lie in (0, 1)"));
    }
    let l = &model.links;
    let reach = design.leg_extension * model.stance_leg_length().min(model.swing_leg_length());
    let x_hip = design.hip_advance * stair.run;
    let step = stair.next_footprint();

    // Both chords (foot to hip now, hip to next foot) must stay within reach.
    let y_a = reach * reach - x_hip * x_hip;
    let y_b = reach * reach - (step.x - x_hip).powi(2);
    if y_a <= 0.0 || y_b <= 0.0 {
        return Err(invalid("hip_advance", "hip cannot reach both footprints"));
    }
    let y_hip = y_a.sqrt().min(step.y + y_b.sqrt());
    let hip = Vec2::new(x_hip, y_hip);

    let (shin, thigh) = two_link(Vec2::zeros(), hip, l[0].length, l[1].length, -1.0)?;
    let (swing_thigh, swing_shin) = two_link(hip, step, l[3].length, l[4].length, 1.0)?;

    let torso = design.torso_angle;
    let pi = core::f64::consts::PI;
    let wrap = |a: f64| a - 2.0 * pi * ((a + pi) / (2.0 * pi)).floor();
    let q_final = Configuration::new(
        torso,
        wrap(thigh - torso),
        wrap(thigh - shin),
        wrap(swing_thigh - pi - torso),
        wrap(swing_thigh - swing_shin),
    );
    let q_init = relabel(&State::at_rest(q_final), &RelabelMap::leg_swap()).q;
    Ok((q_init, q_final))
}
