//! Adaptive Dormand–Prince 5(4) integrator for autonomous ODEs on matrix-valued
//! states.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct DormandPrince<T> {
    pub rtol: T,
    pub atol: T,
    pub initial_step: T,
    pub min_step: T,
    pub max_step: T,
    pub max_steps: usize,
    /// Project the state onto its hermitian part after every accepted step.
    pub hermitize: bool,
}

impl<T: Real> Default for DormandPrince<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            initial_step: T::lit(1e-3),
            min_step: T::lit(1e-13),
            max_step: T::infinity(),
            max_steps: 5_000_000,
            hermitize: true,
        }
    }
}

/// Vector-space operations the integrator needs from its state.
pub trait OdeState<T: Real>: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += a * other`
    fn axpy(&mut self, a: T, other: &Self);
    fn is_finite(&self) -> bool;
    /// Projection onto the hermitian part; a no-op for states without one.
    fn hermitize(&mut self);
    /// `max_i |err_i| / (atol + rtol * max(|y_i|, |y_new_i|))`.
    fn error_ratio(err: &Self, y: &Self, y_new: &Self, atol: T, rtol: T) -> T;
}

impl<T: Real> OdeState<T> for CMatrix<T> {
    fn zeros_like(&self) -> Self {
        CMatrix::zeros(self.dim())
    }

    fn axpy(&mut self, a: T, other: &Self) {
        CMatrix::axpy(self, a, other);
    }

    fn is_finite(&self) -> bool {
        CMatrix::is_finite(self)
    }

    fn hermitize(&mut self) {
        CMatrix::hermitize(self);
    }

    fn error_ratio(err: &Self, y: &Self, y_new: &Self, atol: T, rtol: T) -> T {
        let mut worst = T::zero();
        for ((e, a), b) in err.as_slice().iter().zip(y.as_slice()).zip(y_new.as_slice()) {
            worst = worst.max(e.norm() / (atol + rtol * a.norm().max(b.norm())));
        }
        worst
    }
}

/// View of an accepted step handed to the observer.
pub struct Accepted<'a, T, S = CMatrix<T>> {
    pub time: T,
    pub state: &'a S,
    pub derivative: &'a S,
    pub step: T,
    /// `true` when the step landed exactly on one of the requested stop times.
    pub at_stop: bool,
}

#[derive(Debug, Clone)]
pub struct Integration<T, S = CMatrix<T>> {
    pub state: S,
    pub time: T,
    pub accepted: usize,
    pub rejected: usize,
    pub interrupted: bool,
}

// Butcher tableau (autonomous, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<T: Real, S: OdeState<T>>(y: &S, h: T, terms: &[(f64, &S)]) -> S {
    let mut out = y.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            out.axpy(h * T::lit(w), k);
        }
    }
    out
}

impl<T: Real> DormandPrince<T> {
    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self
    }

    /// Integrates `dy/dt = rhs(y)` from `t = 0` to `t_end`.
    ///
    /// Every time in `stops` that lies in `(0, t_end]` is hit exactly; `t_end`
    /// itself always is. The observer sees each accepted step and may stop the
    /// integration early by returning `ControlFlow::Break`.
    pub fn integrate<S, F, O>(
        &self,
        mut rhs: F,
        y0: S,
        t_end: T,
        stops: &[T],
        mut observe: O,
    ) -> Result<Integration<T, S>>
    where
        S: OdeState<T>,
        F: FnMut(&S) -> Result<S>,
        O: FnMut(&Accepted<'_, T, S>) -> ControlFlow<()>,
    {
        let mut y = y0;
        if self.hermitize {
            y.hermitize();
        }
        let mut t = T::zero();
        let mut out = Integration {
            state: y.clone(),
            time: t,
            accepted: 0,
            rejected: 0,
            interrupted: false,
        };
        if !(t_end > T::zero()) {
            return Ok(out);
        }

        let mut targets: Vec<T> = stops
            .iter()
            .copied()
            .filter(|&s| s > T::zero() && s < t_end)
            .collect();
        targets.push(t_end);
        targets.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        targets.dedup();
        let mut next_target = 0usize;

        let mut k1 = rhs(&y)?;
        let mut h = self.initial_step.min(t_end).min(self.max_step);
        let safety = T::lit(0.9);
        let fac_min = T::lit(0.2);
        let fac_max = T::lit(5.0);

        loop {
            if out.accepted + out.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    steps: self.max_steps,
                    time: t.to_f64_lossy(),
                });
            }
            let target = targets[next_target];
            let remaining = target - t;
            let mut at_stop = false;
            let mut step = h;
            if step >= remaining * (T::one() - T::lit(1e-12)) {
                step = remaining;
                at_stop = true;
            }

            let k2 = rhs(&combine(&y, step, &[(A21, &k1)]))?;
            let k3 = rhs(&combine(&y, step, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(&combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(&combine(
                &y,
                step,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            ))?;
            let k6 = rhs(&combine(
                &y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ))?;
            let mut y_new = combine(
                &y,
                step,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            if !y_new.is_finite() {
                return Err(Error::NonFiniteState {
                    time: t.to_f64_lossy(),
                });
            }
            if self.hermitize {
                y_new.hermitize();
            }
            let k7 = rhs(&y_new)?;

            let err_vec = combine(
                &y.zeros_like(),
                step,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let err = S::error_ratio(&err_vec, &y, &y_new, self.atol, self.rtol);
            if !err.is_finite() {
                return Err(Error::NonFiniteState {
                    time: t.to_f64_lossy(),
                });
            }

            let factor = if err == T::zero() {
                fac_max
            } else {
                (safety * err.powf(T::lit(-0.2))).max(fac_min).min(fac_max)
            };

            if err <= T::one() {
                t = if at_stop { target } else { t + step };
                if at_stop {
                    next_target += 1;
                }
                y = y_new;
                k1 = k7;
                out.accepted += 1;
                let flow = observe(&Accepted {
                    time: t,
                    state: &y,
                    derivative: &k1,
                    step,
                    at_stop,
                });
                let done = next_target >= targets.len();
                if flow.is_break() || done {
                    out.interrupted = flow.is_break() && !done;
                    out.state = y;
                    out.time = t;
                    return Ok(out);
                }
                // A step shortened to land on a stop says nothing about the
                // natural step size.
                let base = if at_stop { h.max(step) } else { step };
                h = (base * factor).min(self.max_step);
            } else {
                out.rejected += 1;
                h = step * factor;
            }
            if h < self.min_step * T::one().max(t.abs()) {
                return Err(Error::StepSizeUnderflow {
                    time: t.to_f64_lossy(),
                });
            }
        }
    }
}
