//! Rigid-body dynamics of the pinned single-support phase.
//!
//! Inverse dynamics runs a planar recursive Newton–Euler pass over the
//! kinematic tree (stance shin → stance thigh → {torso, swing thigh → swing
//! shin}) in tree-joint coordinates and maps the joint moments back onto
//! the generalized coordinates with the constant map `∂θ/∂q`.

use nalgebra::{SMatrix, Vector4};

use crate::error::{Error, Result};
use crate::model::{
    com_jacobian, direction, forward_kinematics, link_angles, link_rates, normal, Configuration,
    RobotModel, Vec2, Vec5, N_LINKS,
};

mod impact;
mod integrate;
mod simulate;

pub use impact::{
    angular_momentum_about, extended_mass_matrix, impact_map, impact_velocity_jump, ExtendedState,
    ImpactResult, GUARD_TOLERANCE,
};
pub use integrate::{Dopri5, IntegratorOptions, StepOutcome};
pub use simulate::{
    simulate, simulate_open_loop, simulate_replay, touchdown_guard, GaitReplay, HybridTrajectory,
    ImpactRecord, Passive, SimulationOptions, Termination, TorqueSource, INITIAL_STATE_TOLERANCE,
};

pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Torques = Vector4<f64>;
/// Input selection matrix `B` (5×4).
pub type InputMap = SMatrix<f64, 5, 4>;

/// Parent link in the kinematic tree; the stance shin hangs off the ground.
const PARENT: [Option<usize>; N_LINKS] = [None, Some(0), Some(1), Some(1), Some(3)];

/// `∂θ/∂q` for the tree joint angles `θ_i = φ_i − φ_parent(i)`.
const TREE_MAP: [[f64; N_LINKS]; N_LINKS] = [
    [1.0, 1.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -1.0],
];

/// Index of the unactuated coordinate (absolute torso angle).
pub const UNACTUATED: usize = 0;

/// `B`: zero row for the torso angle, identity on the four joints.
pub fn input_map() -> InputMap {
    let mut b = InputMap::zeros();
    for j in 0..4 {
        b[(j + 1, j)] = 1.0;
    }
    b
}

#[inline]
fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

struct Rnea {
    generalized: Vec5,
    /// Force exerted by the ground on the stance foot.
    ground_force: Vec2,
}

fn rnea(model: &RobotModel, q: &Configuration, qd: &Vec5, qdd: &Vec5, gravity: f64) -> Rnea {
    let phi = link_angles(q);
    let omega = link_rates(qd);
    let alpha = link_rates(qdd);

    // Forward pass: joint and COM accelerations, gravity folded into the base.
    let mut com_acc = [Vec2::zeros(); N_LINKS];
    let mut distal_acc = [Vec2::zeros(); N_LINKS];
    let mut offsets = [Vec2::zeros(); N_LINKS];
    for i in 0..N_LINKS {
        let base_acc = match PARENT[i] {
            None => Vec2::new(0.0, gravity),
            Some(p) => distal_acc[p],
        };
        let e = direction(phi[i]);
        let n = normal(phi[i]);
        let link = &model.links[i];
        let tangential = n * alpha[i] - e * (omega[i] * omega[i]);
        com_acc[i] = base_acc + tangential * model.chain_com_offset(i);
        distal_acc[i] = base_acc + tangential * link.length;
        offsets[i] = e;
    }

    // Backward pass: force and moment each link receives at its proximal joint.
    let mut force = [Vec2::zeros(); N_LINKS];
    let mut moment = [0.0; N_LINKS];
    for i in (0..N_LINKS).rev() {
        let link = &model.links[i];
        let inertial = com_acc[i] * link.mass;
        force[i] += inertial;
        moment[i] += link.inertia_about_com * alpha[i]
            + cross(&(offsets[i] * model.chain_com_offset(i)), &inertial);
        if let Some(p) = PARENT[i] {
            let lever = offsets[p] * model.links[p].length;
            force[p] += force[i];
            moment[p] += moment[i] + cross(&lever, &force[i]);
        }
    }

    let mut generalized = Vec5::zeros();
    for (i, row) in TREE_MAP.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            generalized[k] += s * moment[i];
        }
    }
    Rnea {
        generalized,
        ground_force: force[0],
    }
}

/// `M(q)·qdd + C(q, qd)·qd + G(q)`.
pub fn inverse_dynamics(model: &RobotModel, q: &Configuration, qd: &Vec5, qdd: &Vec5) -> Vec5 {
    rnea(model, q, qd, qdd, model.gravity).generalized
}

pub fn mass_matrix(model: &RobotModel, q: &Configuration) -> Mat5 {
    let zero = Vec5::zeros();
    let mut m = Mat5::zeros();
    for j in 0..5 {
        let col = rnea(model, q, &zero, &Vec5::ith(j, 1.0), 0.0).generalized;
        m.set_column(j, &col);
    }
    // Columns are exact up to rounding; enforce symmetry of the stored matrix.
    (m + m.transpose()) * 0.5
}

pub fn gravity_vector(model: &RobotModel, q: &Configuration) -> Vec5 {
    let zero = Vec5::zeros();
    rnea(model, q, &zero, &zero, model.gravity).generalized
}

/// `M`, `C·qd + G` and `G` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsTerms {
    pub mass_matrix: Mat5,
    pub bias: Vec5,
    pub gravity_vector: Vec5,
}

impl DynamicsTerms {
    pub fn at(model: &RobotModel, q: &Configuration, qd: &Vec5) -> Self {
        Self {
            mass_matrix: mass_matrix(model, q),
            bias: inverse_dynamics(model, q, qd, &Vec5::zeros()),
            gravity_vector: gravity_vector(model, q),
        }
    }
}

/// Solves `M·qdd = forcing − (C·qd + G)` for an arbitrary generalized force.
pub fn accelerations(
    model: &RobotModel,
    q: &Configuration,
    qd: &Vec5,
    forcing: &Vec5,
) -> Result<Vec5> {
    if !(q
        .iter()
        .chain(qd.iter())
        .chain(forcing.iter())
        .all(|v| v.is_finite()))
    {
        return Err(Error::Numerical("non-finite state or forcing".into()));
    }
    let bias = inverse_dynamics(model, q, qd, &Vec5::zeros());
    let chol = mass_matrix(model, q)
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let qdd = chol.solve(&(forcing - bias));
    if qdd.iter().all(|v| v.is_finite()) {
        Ok(qdd)
    } else {
        Err(Error::Numerical("non-finite joint accelerations".into()))
    }
}

/// Joint accelerations under actuator torques `u`.
pub fn forward_dynamics(
    model: &RobotModel,
    q: &Configuration,
    qd: &Vec5,
    u: &Torques,
) -> Result<Vec5> {
    accelerations(model, q, qd, &(input_map() * u))
}

/// Splits the generalized forces along a motion into the four actuator
/// torques and the residual `tau_v` on the unactuated row.
pub fn split_torques(
    model: &RobotModel,
    q: &Configuration,
    qd: &Vec5,
    qdd: &Vec5,
) -> (Torques, f64) {
    split_generalized(&inverse_dynamics(model, q, qd, qdd))
}

pub(crate) fn split_generalized(tau: &Vec5) -> (Torques, f64) {
    (
        Torques::new(tau[1], tau[2], tau[3], tau[4]),
        tau[UNACTUATED],
    )
}

/// Ground reaction at the stance foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForces {
    pub horizontal: f64,
    pub vertical: f64,
}

impl ContactForces {
    /// Friction coefficient needed to prevent slipping, `|F_h| / F_v`.
    pub fn required_friction(&self) -> f64 {
        self.horizontal.abs() / self.vertical
    }
}

pub fn contact_forces(
    model: &RobotModel,
    q: &Configuration,
    qd: &Vec5,
    qdd: &Vec5,
) -> ContactForces {
    let f = rnea(model, q, qd, qdd, model.gravity).ground_force;
    ContactForces {
        horizontal: f.x,
        vertical: f.y,
    }
}

/// Generalized forces, torque split and ground reaction from one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLoads {
    pub generalized: Vec5,
    pub torques: Torques,
    pub tau_v: f64,
    pub contact: ContactForces,
}

pub fn motion_loads(model: &RobotModel, q: &Configuration, qd: &Vec5, qdd: &Vec5) -> MotionLoads {
    let r = rnea(model, q, qd, qdd, model.gravity);
    let (torques, tau_v) = split_generalized(&r.generalized);
    MotionLoads {
        generalized: r.generalized,
        torques,
        tau_v,
        contact: ContactForces {
            horizontal: r.ground_force.x,
            vertical: r.ground_force.y,
        },
    }
}

pub fn kinetic_energy(model: &RobotModel, q: &Configuration, qd: &Vec5) -> f64 {
    0.5 * qd.dot(&(mass_matrix(model, q) * qd))
}

pub fn potential_energy(model: &RobotModel, q: &Configuration) -> f64 {
    let poses = forward_kinematics(model, q);
    model
        .links
        .iter()
        .zip(poses.com.iter())
        .map(|(l, c)| l.mass * model.gravity * c.y)
        .sum()
}

/// Total linear momentum of the pinned model.
pub fn linear_momentum(model: &RobotModel, q: &Configuration, qd: &Vec5) -> Vec2 {
    com_jacobian(model, q) * qd * model.total_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn static_generalized_force_is_gravity() {
        let m = RobotModel::rabbit();
        let q = Vec5::new(0.1, 0.5, 0.4, 0.3, 0.6);
        let z = Vec5::zeros();
        assert_eq!(inverse_dynamics(&m, &q, &z, &z), gravity_vector(&m, &q));
    }

    #[test]
    fn no_gravity_no_motion_no_force() {
        let m = RobotModel::rabbit().with_gravity(0.0);
        let q = Vec5::new(0.1, 0.5, 0.4, 0.3, 0.6);
        let z = Vec5::zeros();
        assert_eq!(inverse_dynamics(&m, &q, &z, &z), Vec5::zeros());
        let (u, tv) = split_torques(&m, &q, &z, &z);
        assert_eq!(u, Torques::zeros());
        assert_eq!(tv, 0.0);
    }

    #[test]
    fn input_map_shape() {
        let b = input_map();
        assert_eq!(b.row(0).norm(), 0.0);
        assert_eq!(b.rank(1e-12), 4);
    }

    #[test]
    fn static_contact_is_weight() {
        let m = RobotModel::rabbit();
        let z = Vec5::zeros();
        let f = contact_forces(&m, &Vec5::new(0.2, 0.3, 0.1, -0.2, 0.5), &z, &z);
        assert_abs_diff_eq!(f.horizontal, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.vertical, 392.4, epsilon = 1e-10);
        let g = ContactForces {
            horizontal: 200.0,
            vertical: 392.4,
        };
        assert_abs_diff_eq!(g.required_friction(), 0.509684, epsilon = 1e-6);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let m = RobotModel::rabbit();
        let q = Vec5::new(-0.1, 0.9, 0.7, 0.2, 1.0);
        let qd = Vec5::new(0.5, -1.0, 2.0, 3.0, -0.5);
        let u = Torques::new(10.0, -20.0, 35.0, 5.0);
        let qdd = forward_dynamics(&m, &q, &qd, &u).unwrap();
        let back = inverse_dynamics(&m, &q, &qd, &qdd);
        assert_abs_diff_eq!(back, input_map() * u, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let m = RobotModel::rabbit();
        let mut q = Vec5::zeros();
        q[2] = f64::NAN;
        assert!(forward_dynamics(&m, &q, &Vec5::zeros(), &Torques::zeros()).is_err());
    }

    #[test]
    fn reconstruction_identity() {
        let m = RobotModel::rabbit();
        let q = Vec5::new(0.3, -0.2, 0.8, 0.4, 0.2);
        let qd = Vec5::new(1.0, 2.0, -1.0, 0.5, 0.1);
        let qdd = Vec5::new(-3.0, 4.0, 2.0, 1.0, -6.0);
        let tau = inverse_dynamics(&m, &q, &qd, &qdd);
        let (u, tv) = split_torques(&m, &q, &qd, &qdd);
        let rebuilt = input_map() * u + Vec5::ith(0, tv);
        assert!((rebuilt - tau).amax() <= 1e-12);
    }

    #[test]
    fn loads_agree_with_individual_calls() {
        let m = RobotModel::rabbit();
        let q = Vec5::new(0.3, -0.2, 0.8, 0.4, 0.2);
        let qd = Vec5::new(1.0, 2.0, -1.0, 0.5, 0.1);
        let qdd = Vec5::new(-3.0, 4.0, 2.0, 1.0, -6.0);
        let loads = motion_loads(&m, &q, &qd, &qdd);
        assert_eq!(loads.contact, contact_forces(&m, &q, &qd, &qdd));
        assert_eq!(loads.generalized, inverse_dynamics(&m, &q, &qd, &qdd));
    }
}
