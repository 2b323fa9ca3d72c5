//! Run configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stairgait_core::constraints::{GridSpec, Limits};
use stairgait_core::gait::BoundaryConditions;
use stairgait_core::model::{
    check_boundary, regenerate_boundary, BoundaryCheck, BoundaryDesign, Configuration, LinkParams,
    RobotModel, StairGeometry,
};
use stairgait_core::optimizer::{InitialHessian, SqpOptions};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub multistart: usize,
    pub robot: RobotConfig,
    pub stair: StairConfig,
    pub boundary: BoundaryConfig,
    pub limits: LimitsConfig,
    pub grid: GridConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            multistart: 4,
            robot: RobotConfig::default(),
            stair: StairConfig::default(),
            boundary: BoundaryConfig::default(),
            limits: LimitsConfig::default(),
            grid: GridConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub mass: f64,
    pub inertia_about_com: f64,
    pub length: f64,
    /// Distance of the COM from the hip (thighs, torso) or knee (shins).
    pub com_offset: f64,
}

impl From<LinkParams> for LinkConfig {
    fn from(l: LinkParams) -> Self {
        Self {
            mass: l.mass,
            inertia_about_com: l.inertia_about_com,
            length: l.length,
            com_offset: l.com_offset,
        }
    }
}

/// Symmetric legs: the same shin and thigh on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub gravity: f64,
    pub shin: LinkConfig,
    pub thigh: LinkConfig,
    pub torso: LinkConfig,
}

impl Default for RobotConfig {
    fn default() -> Self {
        let m = RobotModel::rabbit();
        Self {
            gravity: m.gravity,
            shin: m.links[0].into(),
            thigh: m.links[1].into(),
            torso: m.links[2].into(),
        }
    }
}

impl RobotConfig {
    pub fn model(&self) -> CliResult<RobotModel> {
        let link =
            |l: &LinkConfig| LinkParams::new(l.mass, l.inertia_about_com, l.length, l.com_offset);
        let (shin, thigh, torso) = (link(&self.shin), link(&self.thigh), link(&self.torso));
        let links = [shin.clone(), thigh.clone(), torso, thigh, shin]
            .map(|l| l.map_err(parse_error("robot")));
        let [a, b, c, d, e] = links;
        RobotModel::new([a?, b?, c?, d?, e?], self.gravity).map_err(parse_error("robot"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StairConfig {
    /// Negative for a descending stair.
    pub rise: f64,
    pub run: f64,
    /// Stance-foot distance from the riser below it; half the run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub footprint_offset: Option<f64>,
}

impl Default for StairConfig {
    fn default() -> Self {
        Self {
            rise: 0.2,
            run: 0.4,
            footprint_offset: None,
        }
    }
}

impl StairConfig {
    pub fn geometry(&self) -> StairGeometry {
        StairGeometry {
            rise: self.rise,
            run: self.run,
            footprint_offset: self.footprint_offset.unwrap_or(self.run / 2.0),
        }
    }
}

/// What to do when the configured boundary does not place the swing foot
/// on the neighbouring treads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnMismatch {
    Regenerate,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub q_init: [f64; 5],
    pub q_final: [f64; 5],
    pub duration: f64,
    pub on_mismatch: OnMismatch,
    /// Allowed swing-foot placement error, m.
    pub tolerance: f64,
    pub regenerate: DesignConfig,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            q_init: [0.2618, 1.3140, -1.2267, -0.0219, 0.0],
            q_final: [0.1964, 0.0, 0.0219, 1.2267, 1.3140],
            duration: 0.5,
            on_mismatch: OnMismatch::Regenerate,
            tolerance: 1e-3,
            regenerate: DesignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub torso_angle: f64,
    pub hip_advance: f64,
    pub leg_extension: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let d = BoundaryDesign::default();
        Self {
            torso_angle: d.torso_angle,
            hip_advance: d.hip_advance,
            leg_extension: d.leg_extension,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub torque_max: f64,
    pub velocity_max: f64,
    pub friction_max: f64,
    pub vertical_force_min: f64,
    /// `[lo, hi]` for the stance knee then the swing knee.
    pub knee_range: [[f64; 2]; 2],
    pub clearance_min: f64,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let l = Limits::default();
        Self {
            torque_max: l.torque_max,
            velocity_max: l.velocity_max,
            friction_max: l.friction_max,
            vertical_force_min: l.vertical_force_min,
            knee_range: l.knee_range,
            clearance_min: l.clearance_min,
        }
    }
}

impl LimitsConfig {
    pub fn limits(&self) -> Limits {
        Limits {
            torque_max: self.torque_max,
            velocity_max: self.velocity_max,
            friction_max: self.friction_max,
            vertical_force_min: self.vertical_force_min,
            knee_range: self.knee_range,
            clearance_min: self.clearance_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_ineq: usize,
    pub n_zd: usize,
    pub n_quad: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            n_ineq: g.n_ineq,
            n_zd: g.n_zd,
            n_quad: g.n_quad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianStart {
    Objective,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub constraint_tolerance: f64,
    pub fd_step: f64,
    pub merit_penalty_growth: f64,
    pub armijo: f64,
    pub backtracking: f64,
    pub min_step: f64,
    pub initial_hessian: HessianStart,
    /// Per-variable step bound in radians of end-of-step contribution.
    pub max_step: f64,
    /// Amplitude of the random seed perturbation for starts after the first.
    pub perturbation: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = stairgait_core::constraints::GaitProblem::solver_options();
        Self {
            max_iterations: o.max_iterations,
            kkt_tolerance: o.kkt_tolerance,
            constraint_tolerance: o.constraint_tolerance,
            fd_step: o.fd_step,
            merit_penalty_growth: o.merit_penalty_growth,
            armijo: o.armijo,
            backtracking: o.backtracking,
            min_step: o.min_step,
            initial_hessian: HessianStart::Objective,
            max_step: o.max_step,
            perturbation: 0.3,
        }
    }
}

impl OptimizerConfig {
    pub fn options(&self) -> SqpOptions {
        SqpOptions {
            max_iterations: self.max_iterations,
            kkt_tolerance: self.kkt_tolerance,
            constraint_tolerance: self.constraint_tolerance,
            fd_step: self.fd_step,
            merit_penalty_growth: self.merit_penalty_growth,
            armijo: self.armijo,
            backtracking: self.backtracking,
            min_step: self.min_step,
            initial_hessian: match self.initial_hessian {
                HessianStart::Objective => InitialHessian::Objective,
                HessianStart::Identity => InitialHessian::Identity,
            },
            max_step: self.max_step,
        }
    }
}

fn parse_error(section: &'static str) -> impl Fn(stairgait_core::Error) -> CliError {
    move |e| CliError::Parse(format!("[{section}] {e}"))
}

/// Where the boundary configurations of a setup came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySource {
    Config,
    Regenerated,
}

/// A validated configuration in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub model: RobotModel,
    pub stair: StairGeometry,
    pub bc: BoundaryConditions,
    pub limits: Limits,
    pub grid: GridSpec,
    pub options: SqpOptions,
    pub boundary_source: BoundarySource,
    /// Check of the configured boundary, before any regeneration.
    pub configured_check: BoundaryCheck,
    /// Allowed swing-foot placement error, m.
    pub boundary_tolerance: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    /// Validates every section and settles the boundary configurations.
    pub fn resolve(&self) -> CliResult<Setup> {
        let model = self.robot.model()?;
        let stair = self.stair.geometry();
        stair
            .validate(model.stance_leg_length())
            .map_err(parse_error("stair"))?;
        let limits = self.limits.limits();
        limits.validate().map_err(parse_error("limits"))?;
        let grid = GridSpec {
            n_ineq: self.grid.n_ineq,
            n_zd: self.grid.n_zd,
            n_quad: self.grid.n_quad,
        };
        grid.validate().map_err(parse_error("grid"))?;
        let options = self.optimizer.options();
        options.validate().map_err(parse_error("optimizer"))?;
        if !(self.optimizer.perturbation.is_finite() && self.optimizer.perturbation >= 0.0) {
            return Err(CliError::Parse(
                "[optimizer] perturbation must be finite and ≥ 0".into(),
            ));
        }
        if self.multistart == 0 {
            return Err(CliError::Parse("multistart must be at least 1".into()));
        }
        let b = &self.boundary;
        if !(b.tolerance.is_finite() && b.tolerance > 0.0) {
            return Err(CliError::Parse(
                "[boundary] tolerance must be finite and > 0".into(),
            ));
        }
        let q_init = Configuration::from(b.q_init);
        let q_final = Configuration::from(b.q_final);
        BoundaryConditions::new(q_init, q_final, b.duration).map_err(parse_error("boundary"))?;

        let configured_check = check_boundary(&model, &stair, &q_init, &q_final);
        let (q_init, q_final, boundary_source) = if configured_check.passes(b.tolerance) {
            (q_init, q_final, BoundarySource::Config)
        } else {
            match b.on_mismatch {
                OnMismatch::Error => {
                    return Err(CliError::Validation(format!(
                        "boundary configurations do not place the swing foot on the stair: \
                         initial swing foot at ({:.4}, {:.4}) m, expected ({:.4}, {:.4}); \
                         final swing foot at ({:.4}, {:.4}) m, expected ({:.4}, {:.4})",
                        configured_check.initial_swing.x,
                        configured_check.initial_swing.y,
                        stair.previous_footprint().x,
                        stair.previous_footprint().y,
                        configured_check.final_swing.x,
                        configured_check.final_swing.y,
                        stair.next_footprint().x,
                        stair.next_footprint().y,
                    )))
                }
                OnMismatch::Regenerate => {
                    let design = BoundaryDesign {
                        torso_angle: b.regenerate.torso_angle,
                        hip_advance: b.regenerate.hip_advance,
                        leg_extension: b.regenerate.leg_extension,
                    };
                    let (qi, qf) = regenerate_boundary(&model, &stair, &design).map_err(|e| {
                        CliError::Validation(format!("boundary regeneration failed: {e}"))
                    })?;
                    (qi, qf, BoundarySource::Regenerated)
                }
            }
        };
        let bc = BoundaryConditions::new(q_init, q_final, b.duration)
            .map_err(parse_error("boundary"))?;
        Ok(Setup {
            model,
            stair,
            bc,
            limits,
            grid,
            options,
            boundary_source,
            configured_check,
            boundary_tolerance: b.tolerance,
        })
    }

    /// The configuration with the settled boundary written back, so that it
    /// resolves to the same setup without regeneration.
    pub fn pinned_to(&self, setup: &Setup) -> RunConfig {
        let mut c = self.clone();
        c.boundary.q_init = setup.bc.q_init.into();
        c.boundary.q_final = setup.bc.q_final.into();
        c.boundary.on_mismatch = OnMismatch::Error;
        c
    }
}
