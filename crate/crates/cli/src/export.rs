//! CSV time series and SVG figures of a gait.

use std::io::Write;
use std::path::{Path, PathBuf};

use stairgait_core::dynamics::{motion_loads, HybridTrajectory};
use stairgait_core::gait::{uniform_grid, PolynomialGait};
use stairgait_core::model::{forward_kinematics, swing_foot, StairGeometry};

use crate::config::Setup;
use crate::error::{CliError, CliResult};
use crate::svg::{line_plot, stick_diagram, Pose, Reference, Series};

pub const CSV_HEADER: [&str; 21] = [
    "t", "q1", "q2", "q3", "q4", "q5", "qd1", "qd2", "qd3", "qd4", "qd5", "u1", "u2", "u3", "u4",
    "tau_v", "Fh", "Fv", "mu_req", "swing_x", "swing_y",
];

pub const TRAJECTORY_HEADER: [&str; 15] = [
    "t", "q1", "q2", "q3", "q4", "q5", "qd1", "qd2", "qd3", "qd4", "qd5", "u1", "u2", "u3", "u4",
];

pub const DEFAULT_SAMPLES: usize = 501;
pub const DEFAULT_FRAMES: usize = 12;

/// One row per sample, columns as in [`CSV_HEADER`].
pub fn gait_rows(setup: &Setup, gait: &PolynomialGait, samples: usize) -> Vec<[f64; 21]> {
    uniform_grid(gait.duration(), samples)
        .map(|t| {
            let s = gait.eval_unchecked(t);
            let loads = motion_loads(&setup.model, &s.q, &s.qd, &s.qdd);
            let (foot, _) = swing_foot(&setup.model, &s.q);
            let mut row = [0.0; 21];
            row[0] = t;
            row[1..6].copy_from_slice(s.q.as_slice());
            row[6..11].copy_from_slice(s.qd.as_slice());
            row[11..15].copy_from_slice(loads.torques.as_slice());
            row[15] = loads.tau_v;
            row[16] = loads.contact.horizontal;
            row[17] = loads.contact.vertical;
            row[18] = loads.contact.required_friction();
            row[19] = foot.x;
            row[20] = foot.y;
            row
        })
        .collect()
}

/// Writes a header and rows; values use the shortest round-trip form.
pub fn write_csv<W: Write, const N: usize>(
    out: W,
    header: &[&str; N],
    rows: &[[f64; N]],
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("csv: {e}")))
}

pub fn trajectory_rows(traj: &HybridTrajectory) -> Vec<[f64; 15]> {
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.torques)
        .map(|((t, s), u)| {
            let mut row = [0.0; 15];
            row[0] = *t;
            row[1..6].copy_from_slice(s.q.as_slice());
            row[6..11].copy_from_slice(s.qd.as_slice());
            row[11..15].copy_from_slice(u.as_slice());
            row
        })
        .collect()
}

/// Stair surface from one tread behind the stance foot to one tread past the next.
pub fn stair_profile(stair: &StairGeometry) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for j in -1..=2i32 {
        let x0 = j as f64 * stair.run - stair.footprint_offset;
        let h = j as f64 * stair.rise;
        pts.push((x0, h));
        pts.push((x0 + stair.run, h));
    }
    pts
}

/// Poses of `frames` equally spaced instants, endpoints included.
pub fn stick_poses(setup: &Setup, gait: &PolynomialGait, frames: usize) -> Vec<Pose> {
    uniform_grid(gait.duration(), frames)
        .map(|t| {
            let p = forward_kinematics(&setup.model, &gait.eval_unchecked(t).q);
            let xy = |v: stairgait_core::model::Vec2| (v.x, v.y);
            Pose {
                stance: vec![xy(p.stance_foot), xy(p.stance_knee), xy(p.hip)],
                torso: vec![xy(p.hip), xy(p.torso_tip)],
                swing: vec![xy(p.hip), xy(p.swing_knee), xy(p.swing_foot)],
            }
        })
        .collect()
}

/// Paths of the four SVG figures written for an export into `dir`.
pub fn svg_paths(dir: &Path) -> [PathBuf; 4] {
    ["stick.svg", "torque.svg", "friction.svg", "phase.svg"].map(|n| dir.join(n))
}

/// Stick diagram, actuator torques, required friction and joint phase portraits.
pub fn svg_figures(
    setup: &Setup,
    gait: &PolynomialGait,
    samples: usize,
    frames: usize,
) -> [String; 4] {
    let rows = gait_rows(setup, gait, samples);
    let col = |c: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0], r[c])).collect() };
    let climb = if setup.stair.rise >= 0.0 {
        "ascent"
    } else {
        "descent"
    };

    let swing_path: Vec<(f64, f64)> = rows.iter().map(|r| (r[19], r[20])).collect();
    let stick = stick_diagram(
        &format!("Stick diagram, {climb} ({frames} frames)"),
        &stair_profile(&setup.stair),
        &stick_poses(setup, gait, frames),
        &swing_path,
    );

    let labels = [
        "u1 stance hip",
        "u2 stance knee",
        "u3 swing hip",
        "u4 swing knee",
    ];
    let torque_series: Vec<Series> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Series {
            label: l,
            points: col(11 + i),
            dashed: false,
        })
        .collect();
    let tmax = setup.limits.torque_max;
    let torque = line_plot(
        "Actuator torques",
        "t (s)",
        "torque (N·m)",
        &torque_series,
        &[
            Reference {
                label: "+limit",
                y: tmax,
            },
            Reference {
                label: "−limit",
                y: -tmax,
            },
        ],
    );

    let friction = line_plot(
        "Required friction coefficient",
        "t (s)",
        "|Fh| / Fv",
        &[Series {
            label: "required",
            points: col(18),
            dashed: false,
        }],
        &[Reference {
            label: "limit",
            y: setup.limits.friction_max,
        }],
    );

    let joint = ["q1", "q2", "q3", "q4", "q5"];
    let phase_series: Vec<Series> = joint
        .iter()
        .enumerate()
        .map(|(k, l)| Series {
            label: l,
            points: rows.iter().map(|r| (r[1 + k], r[6 + k])).collect(),
            dashed: false,
        })
        .collect();
    let phase = line_plot(
        "Angles vs angular velocities",
        "angle (rad)",
        "angular velocity (rad/s)",
        &phase_series,
        &[],
    );
    [stick, torque, friction, phase]
}
