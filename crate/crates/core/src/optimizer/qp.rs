//! Dense convex QP by a primal active-set method.
//!
//! The QP `min ½pᵀHp + gᵀp  s.t.  Ap = b, Cp ≤ d` is embedded in a relaxed
//! problem over `(p, ξ)`:
//!
//! ```text
//! min ½pᵀHp + gᵀp + ½ξ² − ρξ
//! s.t. Ap − ξb = 0,  Cp − ξ·min(d, 0) ≤ max(d, 0),  0 ≤ ξ ≤ 1
//! ```
//!
//! for which `(0, 0)` is feasible. With `ξ = 1` at the solution the original
//! QP is solved; `ξ < 1` means the constraints could only be met in part.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Solution of a (possibly relaxed) QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub step: DVector<f64>,
    /// Fraction of the constraint targets that was met; 1 when consistent.
    pub xi: f64,
    pub eq_multipliers: DVector<f64>,
    /// Non-negative at the solution, zero for inactive rows.
    pub ineq_multipliers: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    /// No point satisfies all constraints.
    Infeasible,
    /// The working-set KKT system became singular.
    Singular,
    IterationLimit,
    InvalidInput,
}

const XI_TOLERANCE: f64 = 1e-9;
const DEGENERACY_LIFT: f64 = 1e-11;

/// Solves the QP, enlarging the relaxation penalty until the constraints
/// are met exactly or shown inconsistent.
pub fn qp_solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    eq: (&DMatrix<f64>, &DVector<f64>),
    ineq: (&DMatrix<f64>, &DVector<f64>),
) -> Result<QpSolution, QpError> {
    let scale = 1.0 + h.amax().max(g.amax());
    let mut rho = 1e2 * scale;
    loop {
        let sol = solve_relaxed(h, g, eq, ineq, rho)?;
        if sol.xi >= 1.0 - XI_TOLERANCE {
            return Ok(sol);
        }
        if rho > 1e12 * scale {
            return Err(QpError::Infeasible);
        }
        rho *= 1e3;
    }
}

/// Solves the relaxed QP for a fixed penalty `rho`.
pub fn solve_relaxed(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    eq: (&DMatrix<f64>, &DVector<f64>),
    ineq: (&DMatrix<f64>, &DVector<f64>),
    rho: f64,
) -> Result<QpSolution, QpError> {
    let n = g.len();
    let (a, b) = eq;
    let (c, d) = ineq;
    let (m_eq, m_in) = (b.len(), d.len());
    if h.shape() != (n, n) || a.shape() != (m_eq, n) || c.shape() != (m_in, n) {
        return Err(QpError::InvalidInput);
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(QpError::InvalidInput);
    }

    // Rows over z = (p, ξ): equalities, then inequalities, then ξ bounds.
    let nz = n + 1;
    let m = m_eq + m_in + 2;
    let mut rows = DMatrix::<f64>::zeros(m, nz);
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..m_eq {
        rows.view_mut((i, 0), (1, n)).copy_from(&a.row(i));
        rows[(i, n)] = -b[i];
    }
    for i in 0..m_in {
        let r = m_eq + i;
        rows.view_mut((r, 0), (1, n)).copy_from(&c.row(i));
        rows[(r, n)] = -d[i].min(0.0);
        // Distinct tiny offsets keep the start from being a degenerate vertex
        // where every violated row is active at once.
        let lift = DEGENERACY_LIFT * (1.0 + i as f64 / m_in as f64) * (1.0 + d[i].abs());
        rhs[r] = d[i].max(0.0) + lift;
    }
    rows[(m - 2, n)] = -1.0;
    rows[(m - 1, n)] = 1.0;
    rhs[m - 1] = 1.0;

    let mut hess = DMatrix::<f64>::zeros(nz, nz);
    hess.view_mut((0, 0), (n, n)).copy_from(h);
    hess[(n, n)] = 1.0;
    let mut lin = DVector::<f64>::zeros(nz);
    lin.rows_mut(0, n).copy_from(g);
    lin[n] = -rho;

    let mut z = DVector::<f64>::zeros(nz);
    let mut working: Vec<usize> = (0..m_eq).collect();
    let mut in_working: Vec<bool> = (0..m).map(|i| i < m_eq).collect();
    let row_norms: Vec<f64> = (0..m).map(|i| rows.row(i).norm()).collect();
    let max_iter = 50 * (nz + m);
    let mut degenerate = 0usize;
    let mut at_minimizer = false;

    for iter in 0..max_iter {
        let (p, lambda) = equality_qp(&hess, &(&hess * &z + &lin), &rows, &working)?;
        let z_scale = 1.0 + z.amax();
        // A full unblocked step lands on the working-set minimizer, so the
        // next step is zero up to rounding.
        // A full working set pins z, so any computed p is rounding.
        if at_minimizer || working.len() >= nz || p.amax() <= 1e-12 * z_scale {
            at_minimizer = false;
            // Stationary on the working set: drop a constraint with a negative multiplier.
            let mut leave: Option<(usize, f64)> = None;
            for (k, &i) in working.iter().enumerate().skip(m_eq) {
                let l = lambda[k];
                if l < -1e-12 * (1.0 + lambda.amax()) {
                    let better = match leave {
                        None => true,
                        // Bland's rule after repeated degenerate steps, otherwise most negative.
                        Some((kk, ll)) => {
                            if degenerate > nz {
                                i < working[kk]
                            } else {
                                l < ll
                            }
                        }
                    };
                    if better {
                        leave = Some((k, l));
                    }
                }
            }
            match leave {
                Some((k, _)) => {
                    in_working[working.remove(k)] = false;
                }
                None => return Ok(finish(z, &working, &lambda, n, m_eq, m_in, iter)),
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        let p_norm = p.norm();
        let rp = &rows * &p;
        let rz = &rows * &z;
        for i in m_eq..m {
            if in_working[i] {
                continue;
            }
            let ap = rp[i];
            if ap > 1e-12 * row_norms[i] * p_norm {
                let slack = (rhs[i] - rz[i]).max(0.0);
                let ratio = slack / ap;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        z += &p * alpha;
        if alpha == 0.0 {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        match blocking {
            Some(i) => {
                working.push(i);
                in_working[i] = true;
            }
            None => at_minimizer = true,
        }
    }
    Err(QpError::IterationLimit)
}

/// Step and multipliers of `min ½pᵀHp + qᵀp` with the working rows held at zero.
fn equality_qp(
    hess: &DMatrix<f64>,
    q: &DVector<f64>,
    rows: &DMatrix<f64>,
    working: &[usize],
) -> Result<(DVector<f64>, DVector<f64>), QpError> {
    let nz = q.len();
    let k = working.len();
    let mut kkt = DMatrix::<f64>::zeros(nz + k, nz + k);
    kkt.view_mut((0, 0), (nz, nz)).copy_from(hess);
    for (j, &i) in working.iter().enumerate() {
        let r = rows.row(i);
        kkt.view_mut((nz + j, 0), (1, nz)).copy_from(&r);
        kkt.view_mut((0, nz + j), (nz, 1)).copy_from(&r.transpose());
    }
    let mut rhs = DVector::<f64>::zeros(nz + k);
    rhs.rows_mut(0, nz).copy_from(&(-q));
    let sol = kkt.full_piv_lu().solve(&rhs).ok_or(QpError::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(QpError::Singular);
    }
    Ok((sol.rows(0, nz).into_owned(), sol.rows(nz, k).into_owned()))
}

fn finish(
    z: DVector<f64>,
    working: &[usize],
    lambda: &DVector<f64>,
    n: usize,
    m_eq: usize,
    m_in: usize,
    iterations: usize,
) -> QpSolution {
    let mut eq_multipliers = DVector::zeros(m_eq);
    let mut ineq_multipliers = DVector::zeros(m_in);
    for (k, &i) in working.iter().enumerate() {
        if i < m_eq {
            eq_multipliers[i] = lambda[k];
        } else if i < m_eq + m_in {
            ineq_multipliers[i - m_eq] = lambda[k].max(0.0);
        }
    }
    QpSolution {
        step: z.rows(0, n).into_owned(),
        xi: z[n].clamp(0.0, 1.0),
        eq_multipliers,
        ineq_multipliers,
        iterations,
    }
}
