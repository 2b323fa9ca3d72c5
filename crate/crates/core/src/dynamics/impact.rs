//! Rigid plastic impact of the swing foot.
//!
//! The pinned model is extended with the stance-foot position to 7 degrees
//! of freedom. At touch-down the swing foot sticks (no slip, no rebound) and
//! the stance foot is released; the velocity jump solves
//!
//! ```text
//! [ M_e  -E^T ] [ qd_e+ ]   [ M_e qd_e- ]
//! [ E     0   ] [ Λ     ] = [ 0         ]
//! ```
//!
//! with `E = ∂(swing foot)/∂q_e`. Configurations do not change, only
//! velocities jump, and the legs are relabeled afterwards.

use nalgebra::{SMatrix, SVector};

use super::{cross, mass_matrix};
use crate::error::{Error, Result};
use crate::model::{
    com_jacobian, com_jacobians, forward_kinematics, link_rates, relabel, stair_clearance,
    swing_foot, Configuration, RelabelMap, RobotModel, StairGeometry, State, Vec2, Vec5,
};

pub type Vec7 = SVector<f64, 7>;
pub type Mat7 = SMatrix<f64, 7, 7>;

/// Pinned coordinates plus the planar stance-foot position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub q_e: Vec7,
    pub qd_e: Vec7,
}

impl ExtendedState {
    /// Embeds a pinned state with the stance foot fixed at `foot`.
    pub fn pinned(state: &State, foot: Vec2) -> Self {
        let mut q_e = Vec7::zeros();
        let mut qd_e = Vec7::zeros();
        q_e.fixed_rows_mut::<5>(0).copy_from(&state.q);
        q_e[5] = foot.x;
        q_e[6] = foot.y;
        qd_e.fixed_rows_mut::<5>(0).copy_from(&state.qd);
        Self { q_e, qd_e }
    }

    pub fn q(&self) -> Configuration {
        self.q_e.fixed_rows::<5>(0).into_owned()
    }

    pub fn qd(&self) -> Vec5 {
        self.qd_e.fixed_rows::<5>(0).into_owned()
    }

    pub fn foot(&self) -> Vec2 {
        Vec2::new(self.q_e[5], self.q_e[6])
    }

    pub fn foot_velocity(&self) -> Vec2 {
        Vec2::new(self.qd_e[5], self.qd_e[6])
    }
}

/// Mass matrix of the floating-foot model.
pub fn extended_mass_matrix(model: &RobotModel, q: &Configuration) -> Mat7 {
    let m = mass_matrix(model, q);
    let total = model.total_mass();
    let coupling = com_jacobian(model, q) * total;
    let mut me = Mat7::zeros();
    me.fixed_view_mut::<5, 5>(0, 0).copy_from(&m);
    me.fixed_view_mut::<2, 5>(5, 0).copy_from(&coupling);
    me.fixed_view_mut::<5, 2>(0, 5)
        .copy_from(&coupling.transpose());
    me[(5, 5)] = total;
    me[(6, 6)] = total;
    me
}

/// Angular momentum of the floating model about a world-frame point.
pub fn angular_momentum_about(model: &RobotModel, x: &ExtendedState, point: &Vec2) -> f64 {
    let q = x.q();
    let qd = x.qd();
    let poses = forward_kinematics(model, &q).translated(x.foot());
    let jacs = com_jacobians(model, &q);
    let omega = link_rates(&qd);
    let foot_vel = x.foot_velocity();
    let mut h = 0.0;
    for i in 0..5 {
        let link = &model.links[i];
        let v = foot_vel + jacs[i] * qd;
        h += cross(&(poses.com[i] - point), &(v * link.mass)) + link.inertia_about_com * omega[i];
    }
    h
}

/// Outcome of a touch-down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactResult {
    /// Extended state right after the jump, before relabeling.
    pub extended_post: ExtendedState,
    /// Impulse transmitted through the swing foot.
    pub impulse: Vec2,
    /// Pinned post-impact state with the legs relabeled.
    pub post: State,
}

/// Velocity jump of a plastic swing-foot impact, ignoring stair geometry.
pub fn impact_velocity_jump(
    model: &RobotModel,
    pre: &State,
    map: &RelabelMap,
) -> Result<ImpactResult> {
    if !pre.is_finite() {
        return Err(Error::Numerical("non-finite pre-impact state".into()));
    }
    let me = extended_mass_matrix(model, &pre.q);
    let (_, jsw) = swing_foot(model, &pre.q);
    let mut e = SMatrix::<f64, 2, 7>::zeros();
    e.fixed_view_mut::<2, 5>(0, 0).copy_from(&jsw);
    e[(0, 5)] = 1.0;
    e[(1, 6)] = 1.0;

    // Block elimination of the KKT system through the 2×2 Schur complement.
    let chol = me.cholesky().ok_or(Error::SingularImpact)?;
    let minv_et = chol.solve(&e.transpose());
    let schur = e * minv_et;
    let scale = schur.trace().abs();
    if !(scale.is_finite() && schur.determinant() > 1e-12 * scale * scale) {
        return Err(Error::SingularImpact);
    }
    let pre_ext = ExtendedState::pinned(pre, Vec2::zeros());
    let impulse = -schur.try_inverse().ok_or(Error::SingularImpact)? * (e * pre_ext.qd_e);
    let qd_post = pre_ext.qd_e + minv_et * impulse;
    if qd_post.iter().chain(impulse.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularImpact);
    }

    let extended_post = ExtendedState {
        q_e: pre_ext.q_e,
        qd_e: qd_post,
    };
    let post = relabel(&State::new(pre.q, extended_post.qd()), map);
    Ok(ImpactResult {
        extended_post,
        impulse,
        post,
    })
}

/// Guard tolerance on the swing foot's height above the next tread.
pub const GUARD_TOLERANCE: f64 = 1e-6;

/// Impact map at touch-down on the next tread: velocity jump then relabeling.
pub fn impact_map(
    model: &RobotModel,
    pre: &State,
    stair: &StairGeometry,
    map: &RelabelMap,
) -> Result<State> {
    let (foot, _) = swing_foot(model, &pre.q);
    let on_next = (foot.y - stair.rise).abs() <= GUARD_TOLERANCE && foot.x >= stair.next_riser_x();
    if !on_next || stair_clearance(stair, &foot) < -GUARD_TOLERANCE {
        return Err(Error::Input(alloc::format!(
            "pre-impact swing foot at ({:.6}, {:.6}) is not on the next tread",
            foot.x,
            foot.y
        )));
    }
    Ok(impact_velocity_jump(model, pre, map)?.post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::kinetic_energy;
    use approx::assert_abs_diff_eq;

    fn pre_state() -> State {
        State::new(
            Vec5::new(-0.1, 0.2, 0.3, 0.6, 0.9),
            Vec5::new(0.8, -1.5, 2.0, 1.0, -2.5),
        )
    }

    #[test]
    fn zero_velocity_maps_to_zero() {
        let m = RobotModel::rabbit();
        let s = State::at_rest(pre_state().q);
        let r = impact_velocity_jump(&m, &s, &RelabelMap::default()).unwrap();
        assert_eq!(r.post.qd, Vec5::zeros());
    }

    #[test]
    fn swing_foot_sticks_and_energy_drops() {
        let m = RobotModel::rabbit();
        let s = pre_state();
        let r = impact_velocity_jump(&m, &s, &RelabelMap::default()).unwrap();
        let (_, j) = swing_foot(&m, &s.q);
        let foot_vel = j * r.extended_post.qd() + r.extended_post.foot_velocity();
        assert_abs_diff_eq!(foot_vel, Vec2::zeros(), epsilon = 1e-10);
        let ke_pre = kinetic_energy(&m, &s.q, &s.qd);
        let me = extended_mass_matrix(&m, &s.q);
        let ke_post = 0.5 * r.extended_post.qd_e.dot(&(me * r.extended_post.qd_e));
        assert!(ke_post <= ke_pre);
    }

    #[test]
    fn relabeled_post_state_matches_pinned_kinetic_energy() {
        // After relabeling, the new stance foot is at rest so the pinned
        // kinetic energy equals the extended one.
        let m = RobotModel::rabbit();
        let s = pre_state();
        let r = impact_velocity_jump(&m, &s, &RelabelMap::default()).unwrap();
        let me = extended_mass_matrix(&m, &s.q);
        let ke_ext = 0.5 * r.extended_post.qd_e.dot(&(me * r.extended_post.qd_e));
        let ke_pinned = kinetic_energy(&m, &r.post.q, &r.post.qd);
        assert_abs_diff_eq!(ke_ext, ke_pinned, epsilon = 1e-9 * ke_ext);
    }

    #[test]
    fn guard_is_enforced() {
        let m = RobotModel::rabbit();
        let s = pre_state();
        let (foot, _) = swing_foot(&m, &s.q);
        let good = StairGeometry {
            rise: foot.y,
            run: foot.x,
            footprint_offset: foot.x / 2.0,
        };
        assert!(impact_map(&m, &s, &good, &RelabelMap::default()).is_ok());
        let bad = StairGeometry {
            rise: foot.y + 0.1,
            ..good
        };
        assert!(matches!(
            impact_map(&m, &s, &bad, &RelabelMap::default()),
            Err(Error::Input(_))
        ));
    }
}
