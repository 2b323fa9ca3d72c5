//! Dormand–Prince 5(4) with step-size control and guard localization.

use nalgebra::SVector;
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Width of the bracketing interval at which guard bisection stops.
    pub event_tolerance: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            initial_step: 1e-4,
            max_step: 1e-2,
            min_step: 1e-14,
            max_steps: 1_000_000,
            event_tolerance: 1e-9,
        }
    }
}

// Butcher tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Result of integrating up to an end time or a guard crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome<const N: usize> {
    Reached {
        t: f64,
        x: SVector<f64, N>,
    },
    /// The guard went from positive to non-positive at `t`.
    Event {
        t: f64,
        x: SVector<f64, N>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dopri5 {
    pub options: IntegratorOptions,
}

impl Dopri5 {
    pub fn new(options: IntegratorOptions) -> Self {
        Self { options }
    }

    /// One explicit step of size `h`; returns the 5th-order solution and the
    /// embedded error estimate.
    pub fn step<const N: usize, F>(
        &self,
        f: &mut F,
        t: f64,
        x: &SVector<f64, N>,
        h: f64,
    ) -> Result<(SVector<f64, N>, SVector<f64, N>)>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    {
        let mut k = [SVector::<f64, N>::zeros(); 7];
        for s in 0..7 {
            let mut xs = *x;
            for (j, a) in A[s].iter().enumerate().take(s) {
                if *a != 0.0 {
                    xs += k[j] * (h * a);
                }
            }
            k[s] = f(t + C[s] * h, &xs)?;
        }
        let mut x5 = *x;
        let mut err = SVector::<f64, N>::zeros();
        for s in 0..7 {
            x5 += k[s] * (h * B5[s]);
            err += k[s] * (h * (B5[s] - B4[s]));
        }
        Ok((x5, err))
    }

    fn error_norm<const N: usize>(
        &self,
        x: &SVector<f64, N>,
        x_new: &SVector<f64, N>,
        err: &SVector<f64, N>,
    ) -> f64 {
        let o = &self.options;
        let mut acc = 0.0;
        for i in 0..N {
            let sc = o.atol + o.rtol * x[i].abs().max(x_new[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    /// Integrates from `t0` to `t_end`, calling `observer` after every
    /// accepted step and stopping early when `guard` crosses zero from above.
    pub fn integrate<const N: usize, F, G, O>(
        &self,
        mut f: F,
        t0: f64,
        x0: SVector<f64, N>,
        t_end: f64,
        mut guard: Option<G>,
        mut observer: O,
    ) -> Result<StepOutcome<N>>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
        G: FnMut(f64, &SVector<f64, N>) -> f64,
        O: FnMut(f64, &SVector<f64, N>),
    {
        let o = self.options;
        let mut t = t0;
        let mut x = x0;
        let mut h = o.initial_step.min(o.max_step).min(t_end - t0);
        let mut g_prev = guard.as_mut().map(|g| g(t, &x));
        let mut steps = 0usize;

        while t < t_end {
            if steps >= o.max_steps {
                return Err(Error::Divergence { t });
            }
            steps += 1;
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            let (x_new, err) = match self.step(&mut f, t, &x, h) {
                Ok(v) => v,
                Err(_) => {
                    // Retry with a smaller step before giving up.
                    h *= 0.25;
                    if h < o.min_step {
                        return Err(Error::Divergence { t });
                    }
                    continue;
                }
            };
            if x_new.iter().any(|v| !v.is_finite()) {
                h *= 0.25;
                if h < o.min_step {
                    return Err(Error::Divergence { t });
                }
                continue;
            }
            let en = self.error_norm(&x, &x_new, &err);
            if en > 1.0 {
                h *= (0.9 * en.powf(-0.2)).max(0.2);
                if h < o.min_step {
                    return Err(Error::Divergence { t });
                }
                continue;
            }

            let t_new = if last { t_end } else { t + h };
            if let (Some(g), Some(gp)) = (guard.as_mut(), g_prev) {
                let g_new = g(t_new, &x_new);
                if gp > 0.0 && g_new <= 0.0 {
                    let (te, xe) = self.localize(&mut f, g, t, &x, t_new - t, x_new)?;
                    observer(te, &xe);
                    return Ok(StepOutcome::Event { t: te, x: xe });
                }
                g_prev = Some(g_new);
            }

            t = t_new;
            x = x_new;
            observer(t, &x);
            if last {
                break;
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(o.max_step);
        }
        Ok(StepOutcome::Reached { t, x })
    }

    /// Bisects a sub-step of the accepted step `[t, t + h]` on which the
    /// guard changes sign. Returns the first point found with `g <= 0`.
    fn localize<const N: usize, F, G>(
        &self,
        f: &mut F,
        g: &mut G,
        t: f64,
        x: &SVector<f64, N>,
        h: f64,
        x_end: SVector<f64, N>,
    ) -> Result<(f64, SVector<f64, N>)>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
        G: FnMut(f64, &SVector<f64, N>) -> f64,
    {
        let mut lo = 0.0;
        let mut hi = h;
        let mut x_hi = x_end;
        while hi - lo > self.options.event_tolerance {
            let mid = 0.5 * (lo + hi);
            let (xm, _) = self.step(f, t, x, mid)?;
            if g(t + mid, &xm) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
                x_hi = xm;
            }
        }
        Ok((t + hi, x_hi))
    }
}
