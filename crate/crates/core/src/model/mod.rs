//! Robot parameters, coordinate conventions and planar kinematics.
//!
//! The robot is a five-link planar chain pinned at the stance foot. Links are
//! ordered stance shin, stance thigh, torso, swing thigh, swing shin. The
//! travel direction is `+x`, `y` points up.
//!
//! Generalized coordinates:
//!
//! * `q[0]` absolute torso angle from vertical, counter-clockwise positive
//!   (a positive value leans the torso backwards),
//! * `q[1]`, `q[2]` stance hip and knee,
//! * `q[3]`, `q[4]` swing hip and knee.
//!
//! Hip angles measure thigh flexion relative to the torso and knee angles
//! measure shin flexion relative to the thigh, with the same anatomical sign
//! on both legs. The all-zero configuration stacks the stance leg and torso
//! vertically above the stance foot with the swing leg folded straight down
//! onto it.

use core::f64::consts::PI;
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{SMatrix, SVector, Vector2};

use crate::error::{invalid, Result};

mod boundary;
mod relabel;
mod stair;

pub use boundary::{check_boundary, regenerate_boundary, BoundaryCheck, BoundaryDesign};
pub use relabel::{relabel, RelabelMap};
pub use stair::{stair_clearance, stair_distance, StairGeometry};

pub type Vec2 = Vector2<f64>;
pub type Vec5 = SVector<f64, 5>;
/// Joint coordinates `q`, see the module docs for the convention.
pub type Configuration = Vec5;
/// 2×5 planar point Jacobian.
pub type PointJacobian = SMatrix<f64, 2, 5>;

pub const N_LINKS: usize = 5;
pub const N_ACTUATORS: usize = 4;

/// Link identifiers in chain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    StanceShin = 0,
    StanceThigh = 1,
    Torso = 2,
    SwingThigh = 3,
    SwingShin = 4,
}

impl Link {
    pub const ALL: [Link; N_LINKS] = [
        Link::StanceShin,
        Link::StanceThigh,
        Link::Torso,
        Link::SwingThigh,
        Link::SwingShin,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Inertial and geometric parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub mass: f64,
    pub inertia_about_com: f64,
    pub length: f64,
    /// Distance from the proximal joint to the center of mass along the link.
    pub com_offset: f64,
}

impl LinkParams {
    pub fn new(mass: f64, inertia_about_com: f64, length: f64, com_offset: f64) -> Result<Self> {
        let p = Self {
            mass,
            inertia_about_com,
            length,
            com_offset,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("inertia_about_com", self.inertia_about_com),
            ("length", self.length),
            ("com_offset", self.com_offset),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    alloc::format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.com_offset > self.length {
            return Err(invalid("com_offset", "must not exceed the link length"));
        }
        Ok(())
    }
}

/// Five-link planar biped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotModel {
    pub links: [LinkParams; N_LINKS],
    pub gravity: f64,
}

impl RobotModel {
    pub fn new(links: [LinkParams; N_LINKS], gravity: f64) -> Result<Self> {
        let m = Self { links, gravity };
        m.validate()?;
        Ok(m)
    }

    /// The RABBIT test-bed parameters with symmetric legs.
    pub fn rabbit() -> Self {
        let shin = LinkParams {
            mass: 3.2,
            inertia_about_com: 0.93,
            length: 0.4,
            com_offset: 0.128,
        };
        let thigh = LinkParams {
            mass: 6.8,
            inertia_about_com: 1.08,
            length: 0.4,
            com_offset: 0.163,
        };
        let torso = LinkParams {
            mass: 20.0,
            inertia_about_com: 2.22,
            length: 0.625,
            com_offset: 0.2,
        };
        Self {
            links: [shin, thigh, torso, thigh, shin],
            gravity: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.links {
            l.validate()?;
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return Err(invalid("gravity", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn link(&self, link: Link) -> &LinkParams {
        &self.links[link.index()]
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// Length of the stance leg when fully extended.
    pub fn stance_leg_length(&self) -> f64 {
        self.links[0].length + self.links[1].length
    }

    pub fn swing_leg_length(&self) -> f64 {
        self.links[3].length + self.links[4].length
    }

    /// COM distance from the chain-proximal end of link `i`. The stance leg
    /// is traversed foot first, against its anatomical orientation.
    pub fn chain_com_offset(&self, i: usize) -> f64 {
        let link = &self.links[i];
        if i < 2 {
            link.length - link.com_offset
        } else {
            link.com_offset
        }
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.gravity = gravity;
        self
    }
}

impl Default for RobotModel {
    fn default() -> Self {
        Self::rabbit()
    }
}

/// Joint velocity state of the pinned model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub q: Configuration,
    pub qd: Vec5,
}

impl State {
    pub fn new(q: Configuration, qd: Vec5) -> Self {
        Self { q, qd }
    }

    pub fn at_rest(q: Configuration) -> Self {
        Self {
            q,
            qd: Vec5::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

/// Planar positions of every joint and link center of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoses {
    pub stance_foot: Vec2,
    pub stance_knee: Vec2,
    pub hip: Vec2,
    pub torso_tip: Vec2,
    pub swing_knee: Vec2,
    pub swing_foot: Vec2,
    pub com: [Vec2; N_LINKS],
}

impl LinkPoses {
    /// The six joint points: stance foot, stance knee, hip, torso tip, swing knee, swing foot.
    pub fn joints(&self) -> [Vec2; 6] {
        [
            self.stance_foot,
            self.stance_knee,
            self.hip,
            self.torso_tip,
            self.swing_knee,
            self.swing_foot,
        ]
    }

    /// Proximal and distal end points of a link.
    pub fn segment(&self, link: Link) -> (Vec2, Vec2) {
        match link {
            Link::StanceShin => (self.stance_foot, self.stance_knee),
            Link::StanceThigh => (self.stance_knee, self.hip),
            Link::Torso => (self.hip, self.torso_tip),
            Link::SwingThigh => (self.hip, self.swing_knee),
            Link::SwingShin => (self.swing_knee, self.swing_foot),
        }
    }

    pub fn translated(mut self, offset: Vec2) -> Self {
        self.stance_foot += offset;
        self.stance_knee += offset;
        self.hip += offset;
        self.torso_tip += offset;
        self.swing_knee += offset;
        self.swing_foot += offset;
        for c in &mut self.com {
            *c += offset;
        }
        self
    }
}

/// `∂φ/∂q` where `φ` are absolute link angles (counter-clockwise from `+y`).
pub(crate) const ANGLE_MAP: [[f64; N_LINKS]; N_LINKS] = [
    [1.0, 1.0, -1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, -1.0],
];
const ANGLE_OFFSET: [f64; N_LINKS] = [0.0, 0.0, 0.0, PI, PI];

/// Absolute angle of every link, measured counter-clockwise from `+y`, of the
/// vector pointing from its proximal to its distal joint.
pub fn link_angles(q: &Configuration) -> [f64; N_LINKS] {
    let mut phi = ANGLE_OFFSET;
    for (i, row) in ANGLE_MAP.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            phi[i] += s * q[k];
        }
    }
    phi
}

/// Absolute link angular velocities `S·qd`.
pub fn link_rates(qd: &Vec5) -> [f64; N_LINKS] {
    let mut w = [0.0; N_LINKS];
    for (i, row) in ANGLE_MAP.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            w[i] += s * qd[k];
        }
    }
    w
}

/// Unit vector of a link with absolute angle `phi`.
#[inline]
pub(crate) fn direction(phi: f64) -> Vec2 {
    Vec2::new(-phi.sin(), phi.cos())
}

/// `direction` rotated by +90°, i.e. `d direction / d phi`.
#[inline]
pub(crate) fn normal(phi: f64) -> Vec2 {
    Vec2::new(-phi.cos(), -phi.sin())
}

/// Inverse of [`direction`].
pub(crate) fn angle_of(v: &Vec2) -> f64 {
    (-v.x).atan2(v.y)
}

pub fn forward_kinematics(model: &RobotModel, q: &Configuration) -> LinkPoses {
    let phi = link_angles(q);
    let e: [Vec2; N_LINKS] = core::array::from_fn(|i| direction(phi[i]));
    let l = |i: usize| model.links[i].length;
    let d = |i: usize| model.chain_com_offset(i);

    let stance_foot = Vec2::zeros();
    let stance_knee = stance_foot + e[0] * l(0);
    let hip = stance_knee + e[1] * l(1);
    let torso_tip = hip + e[2] * l(2);
    let swing_knee = hip + e[3] * l(3);
    let swing_foot = swing_knee + e[4] * l(4);
    let com = [
        stance_foot + e[0] * d(0),
        stance_knee + e[1] * d(1),
        hip + e[2] * d(2),
        hip + e[3] * d(3),
        swing_knee + e[4] * d(4),
    ];
    LinkPoses {
        stance_foot,
        stance_knee,
        hip,
        torso_tip,
        swing_knee,
        swing_foot,
        com,
    }
}

/// Links traversed from the stance foot to each link's proximal joint.
const PATH_TO_PROXIMAL: [&[usize]; N_LINKS] = [&[], &[0], &[0, 1], &[0, 1], &[0, 1, 3]];

/// Jacobian of a point at distance `along` from the proximal joint of `link`.
fn point_jacobian(
    model: &RobotModel,
    phi: &[f64; N_LINKS],
    link: usize,
    along: f64,
) -> PointJacobian {
    let mut jac = PointJacobian::zeros();
    let mut add = |i: usize, len: f64| {
        let n = normal(phi[i]) * len;
        for k in 0..N_LINKS {
            let s = ANGLE_MAP[i][k];
            if s != 0.0 {
                jac[(0, k)] += s * n.x;
                jac[(1, k)] += s * n.y;
            }
        }
    };
    for &i in PATH_TO_PROXIMAL[link] {
        add(i, model.links[i].length);
    }
    add(link, along);
    jac
}

/// Jacobian of each link's center of mass.
pub fn com_jacobians(model: &RobotModel, q: &Configuration) -> [PointJacobian; N_LINKS] {
    let phi = link_angles(q);
    core::array::from_fn(|i| point_jacobian(model, &phi, i, model.chain_com_offset(i)))
}

/// Swing-foot position and its Jacobian with respect to `q`.
pub fn swing_foot(model: &RobotModel, q: &Configuration) -> (Vec2, PointJacobian) {
    let phi = link_angles(q);
    let pos = forward_kinematics(model, q).swing_foot;
    let jac = point_jacobian(model, &phi, Link::SwingShin.index(), model.links[4].length);
    (pos, jac)
}

/// Whole-body center of mass and total mass.
pub fn com(model: &RobotModel, q: &Configuration) -> (Vec2, f64) {
    let poses = forward_kinematics(model, q);
    let total = model.total_mass();
    let weighted = model
        .links
        .iter()
        .zip(poses.com.iter())
        .fold(Vec2::zeros(), |acc, (l, c)| acc + c * l.mass);
    (weighted / total, total)
}

/// Jacobian of the whole-body center of mass.
pub fn com_jacobian(model: &RobotModel, q: &Configuration) -> PointJacobian {
    let jacs = com_jacobians(model, q);
    let total = model.total_mass();
    model
        .links
        .iter()
        .zip(jacs.iter())
        .fold(PointJacobian::zeros(), |acc, (l, j)| acc + j * l.mass)
        / total
}
