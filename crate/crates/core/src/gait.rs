//! Quartic joint trajectories `q_k(t) = Σ α_{k,i} tⁱ` over one step.
//!
//! Position boundary conditions consume the constant and quartic
//! coefficients, leaving three free coefficients per joint.

use nalgebra::{SMatrix, SVector};
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{Configuration, State, Vec5};

pub const DEGREE: usize = 4;
pub const N_COEFFS: usize = DEGREE + 1;
pub const FREE_PER_JOINT: usize = 3;
/// Number of optimization variables (5 joints × 3 free coefficients).
pub const N_FREE: usize = 5 * FREE_PER_JOINT;

pub type CoefficientMatrix = SMatrix<f64, 5, N_COEFFS>;
pub type FreeParams = SVector<f64, N_FREE>;

/// Joint position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitSample {
    pub q: Configuration,
    pub qd: Vec5,
    pub qdd: Vec5,
}

impl GaitSample {
    pub fn state(&self) -> State {
        State::new(self.q, self.qd)
    }
}

/// Row `k` holds the coefficients of joint `k` in increasing powers of `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialGait {
    alpha: CoefficientMatrix,
    duration: f64,
}

impl PolynomialGait {
    pub fn new(alpha: CoefficientMatrix, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid("duration", "must be finite and > 0"));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(invalid("alpha", "coefficients must be finite"));
        }
        Ok(Self { alpha, duration })
    }

    pub fn alpha(&self) -> &CoefficientMatrix {
        &self.alpha
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Evaluates the gait on `[0, duration]`.
    pub fn eval(&self, t: f64) -> Result<GaitSample> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::Domain {
                t,
                duration: self.duration,
            });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Horner evaluation of the polynomial and its first two derivatives,
    /// without the domain check.
    pub fn eval_unchecked(&self, t: f64) -> GaitSample {
        let mut q = Vec5::zeros();
        let mut qd = Vec5::zeros();
        let mut qdd = Vec5::zeros();
        for k in 0..5 {
            let a = self.alpha.row(k);
            let (mut p, mut dp, mut ddp) = (a[DEGREE], 0.0, 0.0);
            for i in (0..DEGREE).rev() {
                ddp = ddp * t + 2.0 * dp;
                dp = dp * t + p;
                p = p * t + a[i];
            }
            q[k] = p;
            qd[k] = dp;
            qdd[k] = ddp;
        }
        GaitSample { q, qd, qdd }
    }

    /// Samples at `n` uniformly spaced times including both ends.
    pub fn uniform_times(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        uniform_grid(self.duration, n)
    }
}

/// `n` uniformly spaced points on `[0, duration]`, endpoints included.
pub fn uniform_grid(duration: f64, n: usize) -> impl Iterator<Item = f64> {
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |j| {
        if j + 1 == n {
            duration
        } else {
            duration * j as f64 / last
        }
    })
}

/// Start and end configurations of a step and its duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub q_init: Configuration,
    pub q_final: Configuration,
    pub duration: f64,
}

impl BoundaryConditions {
    pub fn new(q_init: Configuration, q_final: Configuration, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid("duration", "must be finite and > 0"));
        }
        if q_init.iter().chain(q_final.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("boundary", "configurations must be finite"));
        }
        Ok(Self {
            q_init,
            q_final,
            duration,
        })
    }
}

/// Builds the gait whose free coefficients are `theta` and whose end points
/// match `bc` exactly.
pub fn embed(theta: &FreeParams, bc: &BoundaryConditions) -> PolynomialGait {
    let t = bc.duration;
    let t4 = t.powi(4);
    let mut alpha = CoefficientMatrix::zeros();
    for k in 0..5 {
        alpha[(k, 0)] = bc.q_init[k];
        let mut partial = bc.q_init[k];
        let mut tp = 1.0;
        for i in 1..=FREE_PER_JOINT {
            let a = theta[k * FREE_PER_JOINT + i - 1];
            tp *= t;
            alpha[(k, i)] = a;
            partial += a * tp;
        }
        alpha[(k, DEGREE)] = (bc.q_final[k] - partial) / t4;
    }
    PolynomialGait { alpha, duration: t }
}

/// Free coefficients of a gait (inverse of [`embed`]).
pub fn extract(gait: &PolynomialGait) -> FreeParams {
    FreeParams::from_fn(|j, _| gait.alpha[(j / FREE_PER_JOINT, 1 + j % FREE_PER_JOINT)])
}

/// Straight-line seed: constant joint velocities between the boundaries.
pub fn initial_guess(bc: &BoundaryConditions) -> FreeParams {
    let mut theta = FreeParams::zeros();
    for k in 0..5 {
        theta[k * FREE_PER_JOINT] = (bc.q_final[k] - bc.q_init[k]) / bc.duration;
    }
    theta
}

/// Straight-line seed with a deterministic random perturbation.
///
/// Coefficient `α_{k,i}` is perturbed uniformly by `±magnitude / Tⁱ`, i.e.
/// by at most `magnitude` radians of its contribution at `t = T`.
pub fn perturbed_guess(bc: &BoundaryConditions, magnitude: f64, seed: u64) -> FreeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = initial_guess(bc);
    for k in 0..5 {
        for i in 1..=FREE_PER_JOINT {
            let scale = magnitude / bc.duration.powi(i as i32);
            theta[k * FREE_PER_JOINT + i - 1] += scale * rng.random_range(-1.0..=1.0);
        }
    }
    theta
}
