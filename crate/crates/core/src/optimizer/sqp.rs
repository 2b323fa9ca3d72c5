//! Line-search SQP with a damped BFGS Lagrangian Hessian and an L1 merit.

use alloc::vec::Vec;
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

use super::fd::{probe, ProbeResult};
use super::qp::{solve_relaxed, QpError, QpSolution};
use super::{Evaluation, Nlp};
use crate::error::{Error, Result};

/// Starting Hessian approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialHessian {
    Identity,
    /// Finite-difference Hessian of the objective, eigenvalues clamped positive.
    Objective,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub max_iterations: usize,
    /// Bound on the Lagrangian gradient relative to one plus its largest term.
    pub kkt_tolerance: f64,
    pub constraint_tolerance: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Merit penalty is kept at least this factor above the largest multiplier.
    pub merit_penalty_growth: f64,
    pub armijo: f64,
    pub backtracking: f64,
    pub min_step: f64,
    pub initial_hessian: InitialHessian,
    /// Bound on each component of the search direction; infinite for none.
    pub max_step: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            kkt_tolerance: 1e-6,
            constraint_tolerance: 1e-6,
            fd_step: 1e-6,
            merit_penalty_growth: 1.1,
            armijo: 1e-4,
            backtracking: 0.5,
            min_step: 1e-10,
            initial_hessian: InitialHessian::Objective,
            max_step: f64::INFINITY,
        }
    }
}

impl SqpOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(crate::error::invalid(name, "must be finite and > 0"))
            }
        };
        positive("kkt_tolerance", self.kkt_tolerance)?;
        positive("constraint_tolerance", self.constraint_tolerance)?;
        positive("fd_step", self.fd_step)?;
        positive("min_step", self.min_step)?;
        if self.max_step.is_nan() || self.max_step <= 0.0 {
            return Err(crate::error::invalid("max_step", "must be > 0"));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(crate::error::invalid("backtracking", "must lie in (0, 1)"));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(crate::error::invalid("armijo", "must lie in (0, 0.5)"));
        }
        if self.merit_penalty_growth.is_nan() || self.merit_penalty_growth < 1.0 {
            return Err(crate::error::invalid("merit_penalty_growth", "must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
    QpFailure,
}

impl SqpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iterations",
            Self::LineSearchFailure => "line-search-failure",
            Self::QpFailure => "qp-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpResult {
    pub x: DVector<f64>,
    pub status: SqpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub kkt_residual: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub evaluations: usize,
}

impl SqpResult {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_eq_violation <= tol && self.max_ineq_violation <= tol
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub kkt_residual: f64,
    pub step_norm: f64,
    pub step_length: f64,
    pub merit_penalty: f64,
    /// Fraction of the linearized constraints the QP step meets.
    pub qp_xi: f64,
    pub hessian_max: f64,
}

pub fn minimize<P: Nlp + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    opts: &SqpOptions,
) -> Result<SqpResult> {
    minimize_with(problem, x0, opts, |_| {})
}

/// [`minimize`] reporting every iteration to `log`.
pub fn minimize_with<P, L>(
    problem: &P,
    x0: &DVector<f64>,
    opts: &SqpOptions,
    mut log: L,
) -> Result<SqpResult>
where
    P: Nlp + ?Sized,
    L: FnMut(&IterationLog),
{
    opts.validate()?;
    let n = problem.dimension();
    if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(alloc::format!(
            "start point must be {n} finite values"
        )));
    }
    let first = problem.evaluate(x0)?;
    if !first.is_finite() {
        return Err(Error::Input(
            "objective or constraints non-finite at the start point".into(),
        ));
    }
    check_dims(problem, &first)?;

    let mut evaluations = 1 + 2 * n;
    let mut x = x0.clone();
    let mut pr = probe(problem, &x, first, opts.fd_step)?;
    let mut hess = initial_hessian(problem, &x, opts, &mut evaluations)?;
    let mut penalty = 1.0;
    let mut eq_mult = DVector::zeros(problem.n_eq());
    let mut ineq_mult = DVector::zeros(problem.n_ineq());
    let mut scaled_once = opts.initial_hessian == InitialHessian::Objective;
    let mut status = SqpStatus::MaxIterations;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut fresh_hessian = opts.initial_hessian == InitialHessian::Objective;

    while iterations < opts.max_iterations {
        let Ok(qp) = subproblem(&hess, &pr, 1e-3 * opts.constraint_tolerance, opts.max_step) else {
            status = SqpStatus::QpFailure;
            break;
        };
        kkt = stationarity(&pr, &qp.eq_multipliers, &qp.ineq_multipliers);
        let feasible = pr.value.max_eq_violation() <= opts.constraint_tolerance
            && pr.value.max_ineq_violation() <= opts.constraint_tolerance;
        let comp = complementarity(&pr.value, &qp.ineq_multipliers);
        // Stationarity is judged against the largest term of the Lagrangian
        // gradient, as each carries its own differencing error.
        let kkt_scale = 1.0
            + pr.gradient
                .amax()
                .max((pr.eq_jacobian.transpose() * &qp.eq_multipliers).amax())
                .max((pr.ineq_jacobian.transpose() * &qp.ineq_multipliers).amax());
        if feasible
            && kkt <= opts.kkt_tolerance * kkt_scale
            && comp <= opts.kkt_tolerance * kkt_scale
        {
            eq_mult = qp.eq_multipliers;
            ineq_mult = qp.ineq_multipliers;
            status = SqpStatus::Converged;
            break;
        }
        iterations += 1;

        // Relaxed-QP multipliers scale with the relaxation weight, so the
        // curvature model keeps the last consistent ones instead.
        let consistent = qp.xi >= 1.0 - XI_TOLERANCE;
        if consistent {
            eq_mult = qp.eq_multipliers.clone();
            ineq_mult = qp.ineq_multipliers.clone();
        }

        let d = &qp.step;
        let lin_viol = linearized_violation(&pr, d);
        let viol = pr.value.l1_violation();
        let need = if consistent {
            opts.merit_penalty_growth * qp.eq_multipliers.amax().max(qp.ineq_multipliers.amax())
        } else if viol > lin_viol {
            // Half the predicted violation decrease must pay for the model
            // objective change.
            let model = pr.gradient.dot(d) + 0.5 * d.dot(&(&hess * d));
            opts.merit_penalty_growth * model.max(0.0) / (0.5 * (viol - lin_viol))
        } else {
            penalty
        };
        // Powell's rule: the penalty tracks the requirement and decays when
        // it shrinks, but never drops below it.
        penalty = if penalty < need {
            1.5 * need
        } else {
            need.max(0.5 * (penalty + need))
        };
        let merit0 = merit(&pr.value, penalty);
        let predicted = pr.gradient.dot(d) + penalty * (lin_viol - viol);
        let slope = predicted.min(-1e-16 * (1.0 + merit0.abs()));

        let mut alpha = 1.0;
        let accepted = loop {
            let trial = &x + d * alpha;
            evaluations += 1;
            if let Ok(ev) = problem.evaluate(&trial) {
                if ev.is_finite() && merit(&ev, penalty) <= merit0 + opts.armijo * alpha * slope {
                    break Some((trial, ev));
                }
            }
            alpha *= opts.backtracking;
            if alpha < opts.min_step {
                break None;
            }
        };
        let Some((x_new, ev_new)) = accepted else {
            // A quasi-Newton model that has drifted from the true curvature is
            // replaced once before giving up at this point.
            if !fresh_hessian {
                hess =
                    lagrangian_hessian(problem, &x, &eq_mult, &ineq_mult, opts, &mut evaluations)?;
                fresh_hessian = true;
                continue;
            }
            // A feasible point where the model promises no merit decrease
            // beyond tolerance is stationary to working precision.
            status = if feasible && -predicted <= opts.kkt_tolerance * (1.0 + pr.value.f.abs()) {
                SqpStatus::Converged
            } else {
                SqpStatus::LineSearchFailure
            };
            break;
        };
        fresh_hessian = false;

        let pr_new = probe(problem, &x_new, ev_new, opts.fd_step)?;
        evaluations += 2 * n;
        let s = &x_new - &x;
        let y = lagrangian_gradient(&pr_new, &eq_mult, &ineq_mult)
            - lagrangian_gradient(&pr, &eq_mult, &ineq_mult);
        if !scaled_once {
            let sy = s.dot(&y);
            if sy > 0.0 {
                hess = DMatrix::identity(n, n) * (y.dot(&y) / sy);
                scaled_once = true;
            }
        }
        if alpha < REFRESH_STEP {
            hess = lagrangian_hessian(
                problem,
                &x_new,
                &eq_mult,
                &ineq_mult,
                opts,
                &mut evaluations,
            )?;
            fresh_hessian = true;
        } else if s.amax() > 1e-2 * opts.fd_step * (1.0 + x.amax()) {
            // Steps near the probe size carry differencing noise in y.
            damped_bfgs(&mut hess, &s, &y);
        }

        log(&IterationLog {
            iteration: iterations,
            objective: pr_new.value.f,
            max_eq_violation: pr_new.value.max_eq_violation(),
            max_ineq_violation: pr_new.value.max_ineq_violation(),
            kkt_residual: kkt,
            step_norm: s.amax(),
            step_length: alpha,
            merit_penalty: penalty,
            qp_xi: qp.xi,
            hessian_max: hess.amax(),
        });

        x = x_new;
        pr = pr_new;
    }

    // Reported values come from a fresh evaluation at the returned point.
    let fresh = problem.evaluate(&x)?;
    evaluations += 1;
    Ok(SqpResult {
        objective: fresh.f,
        max_eq_violation: fresh.max_eq_violation(),
        max_ineq_violation: fresh.max_ineq_violation(),
        x,
        status,
        iterations,
        kkt_residual: kkt,
        eq_multipliers: eq_mult,
        ineq_multipliers: ineq_mult,
        evaluations,
    })
}

fn check_dims<P: Nlp + ?Sized>(problem: &P, ev: &Evaluation) -> Result<()> {
    if ev.eq.len() != problem.n_eq() || ev.ineq.len() != problem.n_ineq() {
        return Err(Error::Input(alloc::format!(
            "problem reports {} equalities and {} inequalities but returned {} and {}",
            problem.n_eq(),
            problem.n_ineq(),
            ev.eq.len(),
            ev.ineq.len()
        )));
    }
    Ok(())
}

fn initial_hessian<P: Nlp + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    opts: &SqpOptions,
    evaluations: &mut usize,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    if opts.initial_hessian == InitialHessian::Identity {
        return Ok(DMatrix::identity(n, n));
    }
    let (mu, lambda) = (
        DVector::zeros(problem.n_eq()),
        DVector::zeros(problem.n_ineq()),
    );
    lagrangian_hessian(problem, x, &mu, &lambda, opts, evaluations)
}

/// Finite-difference Hessian of the Lagrangian with its eigenvalues
/// clamped to a positive floor.
fn lagrangian_hessian<P: Nlp + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    mu: &DVector<f64>,
    lambda: &DVector<f64>,
    opts: &SqpOptions,
    evaluations: &mut usize,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    // Differences of central-difference gradients. Both steps are kept well
    // above the probe step so rounding stays small against the quotient.
    let h_outer = opts.fd_step.sqrt().max(1e-3);
    let h_inner = opts.fd_step.max(1e-4);
    let mut hess = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = h_outer * x[j].abs().max(1.0);
        let mut grads = [DVector::zeros(n), DVector::zeros(n)];
        for (k, sign) in [1.0, -1.0].iter().enumerate() {
            let mut xs = x.clone();
            xs[j] += sign * h;
            let ev = problem.evaluate(&xs)?;
            grads[k] = lagrangian_gradient(&probe(problem, &xs, ev, h_inner)?, mu, lambda);
            *evaluations += 1 + 2 * n;
        }
        hess.set_column(j, &((&grads[0] - &grads[1]) / (2.0 * h)));
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-8);
    let floor = HESSIAN_FLOOR * scale;
    let clamped = eig
        .eigenvalues
        .map(|l| if l.is_finite() { l.max(floor) } else { floor });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose())
}

const XI_TOLERANCE: f64 = 1e-9;

/// Accepted step lengths below this trigger a finite-difference Hessian refresh.
const REFRESH_STEP: f64 = 0.1;

/// Smallest eigenvalue of a finite-difference Hessian relative to the largest.
const HESSIAN_FLOOR: f64 = 1e-6;

/// Relative singular-value cutoff below which linearized equality
/// directions are treated as unreachable.
const EQ_RANK_TOLERANCE: f64 = 1e-8;
/// Relative gradient norm below which a row is indistinguishable from
/// finite-difference noise.
const ROW_NOISE_FLOOR: f64 = 1e-8;

/// Equality linearization `A d = b` reduced to its well-determined part:
/// returns `(Σ_k V_kᵀ, U_kᵀ b, U_k)` from the thin SVD of `A`.
fn compress_equalities(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if m == 0 {
        return (
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DMatrix::zeros(0, 0),
        );
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let smax = svd.singular_values.amax();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > EQ_RANK_TOLERANCE * smax)
        .collect();
    let k = keep.len();
    let mut rows = DMatrix::zeros(k, n);
    let mut rhs = DVector::zeros(k);
    let mut basis = DMatrix::zeros(m, k);
    for (r, &i) in keep.iter().enumerate() {
        rows.set_row(r, &(vt.row(i) * svd.singular_values[i]));
        rhs[r] = u.column(i).dot(b);
        basis.set_column(r, &u.column(i));
    }
    (rows, rhs, basis)
}

/// QP around the current point with the relaxation penalty enlarged until
/// the linearized constraints are met or cannot be.
///
/// Inequalities within `slack` of zero count as satisfied, so rounding-level
/// violations of rows the step cannot influence do not block the relaxation.
/// Satisfied rows with a noise-level gradient are left out: their
/// linearization carries no information and would produce spurious multipliers.
fn subproblem(
    hess: &DMatrix<f64>,
    pr: &ProbeResult,
    slack: f64,
    step_bound: f64,
) -> core::result::Result<QpSolution, QpError> {
    let (a, b, basis) = compress_equalities(&pr.eq_jacobian, &(-&pr.value.eq));
    let jac = &pr.ineq_jacobian;
    let norms: Vec<f64> = (0..jac.nrows()).map(|i| jac.row(i).norm()).collect();
    let floor = ROW_NOISE_FLOOR * norms.iter().fold(0.0_f64, |m, v| m.max(*v));
    let rows: Vec<usize> = (0..jac.nrows())
        .filter(|&i| norms[i] > floor || pr.value.ineq[i] > slack)
        .collect();
    let n = pr.gradient.len();
    let bounded = step_bound.is_finite();
    let extra = if bounded { 2 * n } else { 0 };
    let mut c = DMatrix::zeros(rows.len() + extra, n);
    let mut d = DVector::zeros(rows.len() + extra);
    for (k, &i) in rows.iter().enumerate() {
        c.set_row(k, &jac.row(i));
        let v = pr.value.ineq[i];
        d[k] = if v <= slack { (-v).max(0.0) } else { -v };
    }
    if bounded {
        for j in 0..n {
            c[(rows.len() + 2 * j, j)] = 1.0;
            c[(rows.len() + 2 * j + 1, j)] = -1.0;
            d[rows.len() + 2 * j] = step_bound;
            d[rows.len() + 2 * j + 1] = step_bound;
        }
    }
    let scale = 1.0 + hess.amax().max(pr.gradient.amax());
    let mut rho = 1e3 * scale;
    let mut best = solve_relaxed(hess, &pr.gradient, (&a, &b), (&c, &d), rho)?;
    while best.xi < 1.0 - XI_TOLERANCE && rho < 1e12 * scale {
        rho *= 1e3;
        best = solve_relaxed(hess, &pr.gradient, (&a, &b), (&c, &d), rho)?;
    }
    best.eq_multipliers = basis * &best.eq_multipliers;
    let mut lambda = DVector::zeros(jac.nrows());
    for (k, &i) in rows.iter().enumerate() {
        lambda[i] = best.ineq_multipliers[k];
    }
    best.ineq_multipliers = lambda;
    Ok(best)
}

fn lagrangian_gradient(pr: &ProbeResult, mu: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
    &pr.gradient + pr.eq_jacobian.transpose() * mu + pr.ineq_jacobian.transpose() * lambda
}

fn stationarity(pr: &ProbeResult, mu: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    lagrangian_gradient(pr, mu, lambda).amax()
}

fn complementarity(ev: &Evaluation, lambda: &DVector<f64>) -> f64 {
    ev.ineq
        .iter()
        .zip(lambda.iter())
        .fold(0.0, |m, (c, l)| m.max((c * l).abs()))
}

fn merit(ev: &Evaluation, penalty: f64) -> f64 {
    ev.f + penalty * ev.l1_violation()
}

fn linearized_violation(pr: &ProbeResult, d: &DVector<f64>) -> f64 {
    let eq = &pr.value.eq + &pr.eq_jacobian * d;
    let ineq = &pr.value.ineq + &pr.ineq_jacobian * d;
    eq.iter().map(|v| v.abs()).sum::<f64>() + ineq.iter().map(|v| v.max(0.0)).sum::<f64>()
}

/// Powell-damped BFGS update; keeps `hess` positive definite.
fn damped_bfgs(hess: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*hess * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0 && sbs.is_finite()) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 0.0 && sr.is_finite()) {
        return;
    }
    *hess -= &bs * bs.transpose() / sbs;
    *hess += &r * r.transpose() / sr;
    let sym = (&*hess + hess.transpose()) * 0.5;
    *hess = sym;
    debug_assert!(
        hess.clone().cholesky().is_some(),
        "BFGS approximation lost positive definiteness"
    );
}

/// Index of the preferred result: feasible ones first, then lowest
/// objective; earlier entries win ties.
pub fn select_best(results: &[SqpResult], tol: f64) -> Option<usize> {
    let key = |r: &SqpResult| {
        (
            !(r.status == SqpStatus::Converged && r.is_feasible(tol)),
            !r.is_feasible(tol),
        )
    };
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if !r.objective.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (kb, ki) = (key(&results[b]), key(r));
                if ki < kb || (ki == kb && r.objective < results[b].objective) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}
