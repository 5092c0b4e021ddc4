//! Terminal currents, the pumped current and symmetry diagnostics.
//!
//! Sign convention: `I_j > 0` is net flow from bath `j` into the network.

use serde::Serialize;

use crate::dynamics::MdmState;
use crate::error::{Error, Result};
use crate::model::{Geometry, NetworkModel, PumpParams};
use crate::scalar::Real;
use crate::steady::{solve, SolveOptions, SteadyStateResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentReport<T> {
    pub per_terminal: Vec<T>,
    /// `I_D − I_U`; absent when the model has no `D`/`U` labels.
    pub pump: Option<T>,
    /// `Σ_j I_j`, zero at any steady state.
    pub conservation_defect: T,
}

/// `I_j = −γ n_j + γ_j↑`.
pub fn terminal_current<T: Real>(model: &NetworkModel<T>, state: &MdmState<T>, j: usize) -> Result<T> {
    let len = model.n_modes().min(state.n_modes());
    if j >= len {
        return Err(Error::IndexOutOfRange { index: j, len });
    }
    Ok(-model.gamma * state.population(j) + model.gamma_up[j])
}

fn du_indices<T: Real>(model: &NetworkModel<T>) -> Result<(usize, usize)> {
    let d = model
        .label_index("D")
        .ok_or_else(|| Error::MissingLabel("D".into()))?;
    let u = model
        .label_index("U")
        .ok_or_else(|| Error::MissingLabel("U".into()))?;
    Ok((d, u))
}

/// `I_pump = I_D − I_U = −γ (n_D − n_U)`.
pub fn pump_current<T: Real>(model: &NetworkModel<T>, state: &MdmState<T>) -> Result<T> {
    let (d, u) = du_indices(model)?;
    if d.max(u) >= state.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes(),
            found: state.n_modes(),
        });
    }
    Ok(-model.gamma * (state.population(d) - state.population(u)))
}

pub fn current_report<T: Real>(model: &NetworkModel<T>, state: &MdmState<T>) -> Result<CurrentReport<T>> {
    if model.n_modes() != state.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes(),
            found: state.n_modes(),
        });
    }
    let per_terminal = (0..model.n_modes())
        .map(|j| terminal_current(model, state, j))
        .collect::<Result<Vec<T>>>()?;
    let conservation_defect = per_terminal.iter().copied().sum();
    let pump = match du_indices(model) {
        Ok(_) => Some(pump_current(model, state)?),
        Err(_) => None,
    };
    Ok(CurrentReport {
        per_terminal,
        pump,
        conservation_defect,
    })
}

/// Solves a pump preset and returns the steady state with its currents.
pub fn pump_steady_state<T: Real>(
    geometry: Geometry,
    params: &PumpParams<T>,
    opts: &SolveOptions<T>,
) -> Result<(SteadyStateResult<T>, CurrentReport<T>)> {
    let model = geometry.build(params)?;
    let result = solve(&model, opts)?;
    let report = current_report(&model, &result.state)?;
    Ok((result, report))
}

/// Defects of the reversal symmetries of `I_pump` at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryDefects<T> {
    /// `|I(Φ, Γ) + I(−Φ, Γ)|`.
    pub flux_odd: T,
    /// `|I(Φ, Γ) + I(Φ, −Γ)|`.
    pub bias_odd: T,
    /// `|I(Φ, Γ) − I(Φ, −Γ)|`.
    pub bias_even: T,
    pub all_converged: bool,
}

pub fn symmetry_defects<T: Real>(
    geometry: Geometry,
    params: &PumpParams<T>,
    opts: &SolveOptions<T>,
) -> Result<SymmetryDefects<T>> {
    let phi = params.flux.flux_ratio;
    let points = [
        *params,
        params.with_flux(-phi),
        params.with_bias(-params.bias),
    ];
    let mut pumps = [T::zero(); 3];
    let mut all_converged = true;
    for (slot, p) in pumps.iter_mut().zip(points.iter()) {
        let (res, rep) = pump_steady_state(geometry, p, opts)?;
        all_converged &= res.converged;
        *slot = rep.pump.ok_or_else(|| Error::MissingLabel("D".into()))?;
    }
    Ok(SymmetryDefects {
        flux_odd: (pumps[0] + pumps[1]).abs(),
        bias_odd: (pumps[0] + pumps[2]).abs(),
        bias_even: (pumps[0] - pumps[2]).abs(),
        all_converged,
    })
}
