//! Sequential quadratic programming with damped BFGS updates.
//!
//! Problems are stated as `min f(x)` subject to `c_eq(x) = 0` and
//! `c_ineq(x) ≤ 0`. Derivatives are central finite differences.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::Result;

mod fd;
mod qp;
mod sqp;

pub use fd::{fd_jacobian, probe, ProbeResult};
pub use qp::{qp_solve, solve_relaxed, QpError, QpSolution};
pub use sqp::{
    minimize, minimize_with, select_best, InitialHessian, IterationLog, SqpOptions, SqpResult,
    SqpStatus,
};

/// Objective and constraint values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
}

impl Evaluation {
    pub fn is_finite(&self) -> bool {
        self.f.is_finite()
            && self
                .eq
                .iter()
                .chain(self.ineq.iter())
                .all(|v| v.is_finite())
    }

    pub fn max_eq_violation(&self) -> f64 {
        self.eq.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_ineq_violation(&self) -> f64 {
        self.ineq.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// `‖c_eq‖₁ + ‖max(c_ineq, 0)‖₁`.
    pub fn l1_violation(&self) -> f64 {
        self.eq.iter().map(|v| v.abs()).sum::<f64>()
            + self.ineq.iter().map(|v| v.max(0.0)).sum::<f64>()
    }
}

/// A smooth nonlinear program.
///
/// Implementations must be safe to evaluate concurrently at different
/// points; [`Nlp::evaluate_batch`] may be overridden to do so.
pub trait Nlp: Sync {
    fn dimension(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation>;

    fn evaluate_batch(&self, xs: &[DVector<f64>]) -> Vec<Result<Evaluation>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<P: Nlp + ?Sized> Nlp for &P {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn n_eq(&self) -> usize {
        (**self).n_eq()
    }
    fn n_ineq(&self) -> usize {
        (**self).n_ineq()
    }
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, xs: &[DVector<f64>]) -> Vec<Result<Evaluation>> {
        (**self).evaluate_batch(xs)
    }
}

/// An [`Nlp`] assembled from closures.
pub struct FnProblem<F> {
    pub dimension: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
    pub f: F,
}

impl<F> FnProblem<F>
where
    F: Fn(&DVector<f64>) -> Evaluation + Sync,
{
    pub fn new(dimension: usize, n_eq: usize, n_ineq: usize, f: F) -> Self {
        Self {
            dimension,
            n_eq,
            n_ineq,
            f,
        }
    }
}

impl<F> Nlp for FnProblem<F>
where
    F: Fn(&DVector<f64>) -> Evaluation + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn n_eq(&self) -> usize {
        self.n_eq
    }
    fn n_ineq(&self) -> usize {
        self.n_ineq
    }
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        Ok((self.f)(x))
    }
}
