//! Central finite differences.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{Evaluation, Nlp};
use crate::error::{Error, Result};

/// Perturbation used for column `j`: `step · max(1, |x_j|)`.
fn column_step(x: &DVector<f64>, j: usize, step: f64) -> f64 {
    step * x[j].abs().max(1.0)
}

/// Jacobian of `f` at `x` by central differences.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut jac: Option<DMatrix<f64>> = None;
    for j in 0..x.len() {
        let h = column_step(x, j, step);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp)?, f(&xm)?);
        if fp.iter().chain(fm.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteProbe { column: j });
        }
        let col = (fp - fm) / (2.0 * h);
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(col.len(), x.len()));
        jac.set_column(j, &col);
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Values and first derivatives of a problem at one point.
#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub value: Evaluation,
    pub gradient: DVector<f64>,
    pub eq_jacobian: DMatrix<f64>,
    pub ineq_jacobian: DMatrix<f64>,
    /// Diagonal second differences of the objective.
    pub objective_curvature: DVector<f64>,
}

/// Evaluates `problem` at `x` and its derivatives from one batch of `2n`
/// central-difference probes.
pub fn probe<P: Nlp + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    value: Evaluation,
    step: f64,
) -> Result<ProbeResult> {
    let n = x.len();
    let steps: Vec<f64> = (0..n).map(|j| column_step(x, j, step)).collect();
    let mut points = Vec::with_capacity(2 * n);
    for (j, h) in steps.iter().enumerate() {
        let mut xp = x.clone();
        xp[j] += h;
        points.push(xp);
        let mut xm = x.clone();
        xm[j] -= h;
        points.push(xm);
    }
    let evals = problem.evaluate_batch(&points);

    let mut gradient = DVector::zeros(n);
    let mut eq_jacobian = DMatrix::zeros(value.eq.len(), n);
    let mut ineq_jacobian = DMatrix::zeros(value.ineq.len(), n);
    let mut objective_curvature = DVector::zeros(n);
    let mut evals = evals.into_iter();
    for (j, h) in steps.iter().enumerate() {
        let (Some(p), Some(m)) = (evals.next(), evals.next()) else {
            return Err(Error::Numerical(
                "batch evaluation returned too few results".into(),
            ));
        };
        let (p, m) = (p?, m?);
        if !(p.is_finite() && m.is_finite())
            || p.eq.len() != value.eq.len()
            || p.ineq.len() != value.ineq.len()
        {
            return Err(Error::NonFiniteProbe { column: j });
        }
        let inv = 0.5 / h;
        gradient[j] = (p.f - m.f) * inv;
        eq_jacobian.set_column(j, &((&p.eq - &m.eq) * inv));
        ineq_jacobian.set_column(j, &((&p.ineq - &m.ineq) * inv));
        objective_curvature[j] = (p.f - 2.0 * value.f + m.f) / (h * h);
    }
    Ok(ProbeResult {
        value,
        gradient,
        eq_jacobian,
        ineq_jacobian,
        objective_curvature,
    })
}
