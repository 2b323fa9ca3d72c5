//! Persisted gait: coefficients, achieved metrics and provenance as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stairgait_core::constraints::GaitMetrics;
use stairgait_core::gait::{CoefficientMatrix, PolynomialGait};

use crate::config::{BoundarySource, RunConfig, Setup};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Coordinate convention of `alpha`: `q1` absolute torso angle from
/// vertical (counter-clockwise positive), `q2..q5` stance hip, stance knee,
/// swing hip, swing knee as relative flexion angles.
pub const CONVENTION: &str = "torso-absolute-ccw/hip-knee-relative";

/// Largest allowed difference between stored and recomputed metrics.
pub const METRIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredMetrics {
    /// Integral of the summed squared actuator torques, N²·m²·s.
    pub cost: f64,
    pub max_torque: f64,
    pub max_velocity: f64,
    /// Largest required friction coefficient `|F_h| / F_v`.
    pub max_friction: f64,
    pub max_tau_v: f64,
    pub min_vertical_force: f64,
    pub min_clearance_margin: f64,
    pub max_knee_excursion: f64,
}

impl From<GaitMetrics> for StoredMetrics {
    fn from(m: GaitMetrics) -> Self {
        Self {
            cost: m.cost,
            max_torque: m.max_torque,
            max_velocity: m.max_velocity,
            max_friction: m.max_friction,
            max_tau_v: m.max_tau_v,
            min_vertical_force: m.min_vertical_force,
            min_clearance_margin: m.min_clearance_margin,
            max_knee_excursion: m.max_knee_excursion,
        }
    }
}

impl StoredMetrics {
    fn values(&self) -> [(&'static str, f64); 8] {
        [
            ("cost", self.cost),
            ("max_torque", self.max_torque),
            ("max_velocity", self.max_velocity),
            ("max_friction", self.max_friction),
            ("max_tau_v", self.max_tau_v),
            ("min_vertical_force", self.min_vertical_force),
            ("min_clearance_margin", self.min_clearance_margin),
            ("max_knee_excursion", self.max_knee_excursion),
        ]
    }

    /// Largest absolute difference and the metric it occurs in.
    pub fn max_difference(&self, other: &StoredMetrics) -> (f64, &'static str) {
        self.values()
            .iter()
            .zip(other.values())
            .map(|((name, a), (_, b))| ((a - b).abs(), *name))
            .fold((0.0, "none"), |acc, d| {
                if d.0 > acc.0 || d.0.is_nan() {
                    d
                } else {
                    acc
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// SHA-256 of the run configuration as given, overrides applied.
    pub config_hash: String,
    pub seed: u64,
    pub multistart: usize,
    /// Index of the start that produced this gait.
    pub best_start: usize,
    pub solver_status: String,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub boundary_source: BoundarySource,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitFile {
    pub schema_version: u32,
    pub convention: String,
    pub duration: f64,
    /// Row `k` holds `α_{k,0..4}` of joint `k`.
    pub alpha: [[f64; 5]; 5],
    pub metrics: StoredMetrics,
    pub provenance: Provenance,
    /// Configuration that reproduces the gait's setup, boundary included.
    pub setup: RunConfig,
    /// Seconds since the Unix epoch; the only field allowed to differ between
    /// identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl GaitFile {
    pub fn alpha_matrix(alpha: &[[f64; 5]; 5]) -> CoefficientMatrix {
        CoefficientMatrix::from_fn(|k, i| alpha[k][i])
    }

    pub fn alpha_rows(alpha: &CoefficientMatrix) -> [[f64; 5]; 5] {
        std::array::from_fn(|k| std::array::from_fn(|i| alpha[(k, i)]))
    }

    pub fn gait(&self) -> CliResult<PolynomialGait> {
        PolynomialGait::new(Self::alpha_matrix(&self.alpha), self.duration)
            .map_err(|e| CliError::Parse(format!("gait: {e}")))
    }

    /// Setup embedded in the file.
    pub fn setup(&self) -> CliResult<Setup> {
        self.setup.resolve()
    }

    /// Metrics of the stored coefficients under `setup`.
    pub fn recompute_metrics(&self, setup: &Setup) -> CliResult<StoredMetrics> {
        let gait = self.gait()?;
        Ok(GaitMetrics::compute(
            &setup.model,
            &gait,
            &setup.stair,
            &setup.limits,
            &setup.grid,
        )
        .into())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("gait file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let file: GaitFile =
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.convention != CONVENTION {
            return Err(CliError::Parse(format!(
                "convention `{}` is not supported (expected `{CONVENTION}`)",
                file.convention
            )));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}
