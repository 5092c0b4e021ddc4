//! Mean-field equations of motion for the two-point correlation matrix
//! σ_jk = ⟨a†_j a_k⟩ and their time integration.

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::NetworkModel;
use crate::ode::DormandPrince;
use crate::scalar::{c, i_unit, re, Real, C};
use crate::steady::{Method, SteadyStateResult};

/// The macroscopic density matrix: populations on the diagonal, coherences
/// `z_jk` off it. Always hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct MdmState<T> {
    sigma: CMatrix<T>,
}

impl<T: Real> MdmState<T> {
    /// Wraps `sigma` after checking hermiticity to `sqrt(eps)` relative
    /// accuracy; the stored matrix is projected onto its hermitian part.
    pub fn new(mut sigma: CMatrix<T>) -> Result<Self> {
        check_hermitian(&sigma)?;
        sigma.hermitize();
        Ok(Self { sigma })
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self {
            sigma: CMatrix::zeros(n_modes),
        }
    }

    pub fn from_populations(n: &[T]) -> Self {
        Self {
            sigma: CMatrix::from_real_diagonal(n),
        }
    }

    /// The zero-tunneling fixed point `n_j = γ_j↑/γ`, `z = 0`.
    pub fn equilibrium(model: &NetworkModel<T>) -> Self {
        let n: Vec<T> = model.gamma_up.iter().map(|&g| g / model.gamma).collect();
        Self::from_populations(&n)
    }

    pub fn n_modes(&self) -> usize {
        self.sigma.dim()
    }

    pub fn sigma(&self) -> &CMatrix<T> {
        &self.sigma
    }

    pub fn into_sigma(self) -> CMatrix<T> {
        self.sigma
    }

    pub fn populations(&self) -> Vec<T> {
        self.sigma.real_diagonal()
    }

    pub fn population(&self, j: usize) -> T {
        self.sigma[(j, j)].re
    }

    pub fn coherence(&self, j: usize, k: usize) -> C<T> {
        self.sigma[(j, k)]
    }

    pub fn min_eigenvalue(&self) -> T {
        self.sigma.min_eigenvalue()
    }

    /// Hermitian (by construction), PSD and with non-negative populations,
    /// all to within `tol`.
    pub fn is_physical(&self, tol: T) -> bool {
        self.populations().iter().all(|&n| n >= -tol) && self.min_eigenvalue() >= -tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.sigma.max_abs_diff(&other.sigma)
    }
}

fn check_hermitian<T: Real>(sigma: &CMatrix<T>) -> Result<()> {
    let tol = T::epsilon().sqrt() * (T::one() + sigma.max_abs());
    match sigma.hermiticity_violation(tol) {
        Some((row, col)) => Err(Error::NotHermitian { row, col }),
        None => Ok(()),
    }
}

fn check_dims<T: Real>(model: &NetworkModel<T>, n: usize) -> Result<()> {
    if model.n_modes() != n {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes(),
            found: n,
        });
    }
    Ok(())
}

/// Coulomb-shifted detuning of coherence `(j, k)`:
/// `Δε_jk + 2 Σ_m (c_jm Δn_jm + c_mk Δn_mk)`.
pub(crate) fn detuning<T: Real>(model: &NetworkModel<T>, n: &[T], j: usize, k: usize) -> T {
    let cap = &model.capacitance;
    let mut s = T::zero();
    for m in 0..n.len() {
        s = s + cap[j][m] * (n[j] - n[m]) + cap[m][k] * (n[m] - n[k]);
    }
    model.epsilon[j] - model.epsilon[k] + T::lit(2.0) * s
}

/// `dσ/dt` without the hermiticity check on the input.
pub(crate) fn derivative_unchecked<T: Real>(model: &NetworkModel<T>, sigma: &CMatrix<T>) -> CMatrix<T> {
    let dim = sigma.dim();
    let t = &model.tunneling;
    let gamma = model.gamma;
    let two = T::lit(2.0);
    let n = sigma.real_diagonal();
    let iu = i_unit::<T>();
    let mut out = CMatrix::zeros(dim);
    for j in 0..dim {
        let mut flow = T::zero();
        for m in 0..dim {
            if m != j {
                flow = flow + (t[(m, j)] * sigma[(j, m)]).im;
            }
        }
        out[(j, j)] = re(-gamma * n[j] + model.gamma_up[j] + two * flow);
        for k in 0..dim {
            if k == j {
                continue;
            }
            let z = sigma[(j, k)];
            let mut hop = C::new(T::zero(), T::zero());
            for m in 0..dim {
                if m != j && m != k {
                    hop = hop + t[(m, k)] * sigma[(j, m)] - t[(j, m)] * sigma[(m, k)];
                }
            }
            let bracket = c(detuning(model, &n, j, k), gamma);
            out[(j, k)] = iu * bracket * z - iu * t[(j, k)] * (n[j] - n[k]) - iu * hop;
        }
    }
    out
}

/// Right-hand side of the mean-field equations of motion.
pub fn mdm_derivative<T: Real>(model: &NetworkModel<T>, state: &MdmState<T>) -> Result<CMatrix<T>> {
    check_dims(model, state.n_modes())?;
    Ok(derivative_unchecked(model, state.sigma()))
}

/// Same as [`mdm_derivative`] for a raw matrix, rejecting non-hermitian input.
pub fn mdm_derivative_of<T: Real>(model: &NetworkModel<T>, sigma: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_dims(model, sigma.dim())?;
    check_hermitian(sigma)?;
    Ok(derivative_unchecked(model, sigma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample<T> {
    pub time: T,
    pub state: MdmState<T>,
    pub step_size_used: T,
}

fn stepper<T: Real>(model: &NetworkModel<T>, rel_tol: T) -> Result<DormandPrince<T>> {
    if !(rel_tol > T::zero() && rel_tol <= T::lit(1e-2)) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must lie in (0, 1e-2], got {rel_tol}"
        )));
    }
    Ok(DormandPrince {
        rtol: rel_tol,
        atol: T::lit(1e-12).max(T::epsilon() * T::lit(10.0)),
        initial_step: T::lit(1e-3) / model.gamma,
        ..DormandPrince::default()
    })
}

/// Integrates from `t = 0` to `t_end`, recording every accepted step. The
/// first sample is the initial state with `step_size_used = 0`.
pub fn evolve<T: Real>(
    model: &NetworkModel<T>,
    initial: &MdmState<T>,
    t_end: T,
    rel_tol: T,
) -> Result<Vec<TrajectorySample<T>>> {
    check_dims(model, initial.n_modes())?;
    if !(t_end >= T::zero()) || !t_end.is_finite() {
        return Err(Error::InvalidParameter("t_end must be finite and >= 0".into()));
    }
    let dp = stepper(model, rel_tol)?;
    let mut samples = vec![TrajectorySample {
        time: T::zero(),
        state: initial.clone(),
        step_size_used: T::zero(),
    }];
    dp.integrate(
        |s| Ok(derivative_unchecked(model, s)),
        initial.sigma().clone(),
        t_end,
        &[],
        |step| {
            samples.push(TrajectorySample {
                time: step.time,
                state: MdmState {
                    sigma: step.state.clone(),
                },
                step_size_used: step.step,
            });
            ControlFlow::Continue(())
        },
    )?;
    Ok(samples)
}

/// States at the requested (ascending, non-negative) times.
pub fn evolve_at<T: Real>(
    model: &NetworkModel<T>,
    initial: &MdmState<T>,
    times: &[T],
    rel_tol: T,
) -> Result<Vec<MdmState<T>>> {
    check_dims(model, initial.n_modes())?;
    let dp = stepper(model, rel_tol)?;
    let t_end = times.iter().copied().fold(T::zero(), T::max);
    let mut at = vec![None; times.len()];
    for (i, &t) in times.iter().enumerate() {
        if t == T::zero() {
            at[i] = Some(initial.clone());
        }
    }
    dp.integrate(
        |s| Ok(derivative_unchecked(model, s)),
        initial.sigma().clone(),
        t_end,
        times,
        |step| {
            if step.at_stop {
                for (i, &t) in times.iter().enumerate() {
                    if t == step.time {
                        at[i] = Some(MdmState {
                            sigma: step.state.clone(),
                        });
                    }
                }
            }
            ControlFlow::Continue(())
        },
    )?;
    at.into_iter()
        .map(|s| s.ok_or_else(|| Error::InvalidParameter("sample times must be finite and >= 0".into())))
        .collect()
}

/// Integrates until `max |dσ/dt| < tol` or model time `t_max` is reached.
/// Running out of time is reported through `converged = false`.
pub fn relax_to_steady<T: Real>(
    model: &NetworkModel<T>,
    initial: &MdmState<T>,
    tol: T,
    t_max: T,
) -> Result<SteadyStateResult<T>> {
    check_dims(model, initial.n_modes())?;
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    let start = derivative_unchecked(model, initial.sigma()).max_abs();
    if start < tol {
        return Ok(SteadyStateResult {
            state: initial.clone(),
            residual: start,
            iterations: 0,
            converged: true,
            method: Method::OdeRelax,
            seed: None,
            model_time: Some(T::zero()),
        });
    }
    let dp = stepper(model, T::lit(1e-10))?;
    let mut residual = start;
    let res = dp.integrate(
        |s| Ok(derivative_unchecked(model, s)),
        initial.sigma().clone(),
        t_max,
        &[],
        |step| {
            residual = step.derivative.max_abs();
            if residual < tol {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;
    Ok(SteadyStateResult {
        state: MdmState { sigma: res.state },
        residual,
        iterations: res.accepted,
        converged: residual < tol,
        method: Method::OdeRelax,
        seed: None,
        model_time: Some(res.time),
    })
}

/// Column names of the trajectory CSV: `time`, `n_1..n_J`, then
/// `re_z_j_k, im_z_j_k` for the upper triangle in row-major order (1-based).
pub fn trajectory_columns(n_modes: usize) -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend((1..=n_modes).map(|j| format!("n_{j}")));
    for j in 1..=n_modes {
        for k in j + 1..=n_modes {
            cols.push(format!("re_z_{j}_{k}"));
            cols.push(format!("im_z_{j}_{k}"));
        }
    }
    cols
}

pub fn trajectory_csv<T: Real>(samples: &[TrajectorySample<T>], header: &[String]) -> String {
    let n = samples.first().map(|s| s.state.n_modes()).unwrap_or(0);
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{}", trajectory_columns(n).join(","));
    for s in samples {
        let mut fields = vec![format!("{:.16e}", s.time.to_f64_lossy())];
        for j in 0..n {
            fields.push(format!("{:.16e}", s.state.population(j).to_f64_lossy()));
        }
        for j in 0..n {
            for k in j + 1..n {
                let z = s.state.coherence(j, k);
                fields.push(format!("{:.16e}", z.re.to_f64_lossy()));
                fields.push(format!("{:.16e}", z.im.to_f64_lossy()));
            }
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn write_trajectory_csv<T: Real>(
    samples: &[TrajectorySample<T>],
    header: &[String],
    path: &Path,
) -> Result<()> {
    std::fs::write(path, trajectory_csv(samples, header)).map_err(|e| Error::io(path, e))
}
