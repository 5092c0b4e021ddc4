//! Direct steady-state solvers: damped fixed-point iteration, an exact linear
//! solve for networks without charging energy, and multi-start probing.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{derivative_unchecked, detuning, relax_to_steady, MdmState};
use crate::error::{Error, Result};
use crate::linalg::{solve_real, CMatrix};
use crate::model::NetworkModel;
use crate::scalar::{c, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    FixedPoint,
    OdeRelax,
    LinearEc0,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FixedPoint => "fixed_point",
            Method::OdeRelax => "ode_relax",
            Method::LinearEc0 => "linear_ec0",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_point" => Ok(Method::FixedPoint),
            "ode_relax" => Ok(Method::OdeRelax),
            "linear_ec0" => Ok(Method::LinearEc0),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected fixed_point, ode_relax or linear_ec0)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult<T> {
    pub state: MdmState<T>,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    /// Seed of the random initial guess, if one was used.
    pub seed: Option<u64>,
    /// Model time spent integrating (ODE relaxation only).
    pub model_time: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `n_j = γ_j↑/γ`, `z = 0`.
    #[default]
    Deterministic,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointConfig<T> {
    pub tol: T,
    pub max_iter: usize,
    pub alpha: T,
    pub init: Init,
}

impl<T: Real> Default for FixedPointConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 100_000,
            alpha: T::lit(0.5),
            init: Init::Deterministic,
        }
    }
}

impl<T: Real> FixedPointConfig<T> {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tol > T::zero()) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Max-norm of the steady-state defect, i.e. of `dσ/dt`.
pub fn residual<T: Real>(model: &NetworkModel<T>, state: &MdmState<T>) -> Result<T> {
    if model.n_modes() != state.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes(),
            found: state.n_modes(),
        });
    }
    Ok(derivative_unchecked(model, state.sigma()).max_abs())
}

/// Random initial guess: `n_j ~ U[0, 2γ_j↑/γ]`, `z_jk` uniform in the disc of
/// radius `0.1·max(γ_j↑, γ_k↑)/γ`.
pub fn random_initial_state<T: Real>(model: &NetworkModel<T>, seed: u64) -> MdmState<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = model.n_modes();
    let g = model.gamma.to_f64_lossy();
    let up: Vec<f64> = model.gamma_up.iter().map(|x| x.to_f64_lossy()).collect();
    let mut sigma = CMatrix::zeros(dim);
    for j in 0..dim {
        let n: f64 = rng.gen::<f64>() * 2.0 * up[j] / g;
        sigma[(j, j)] = c(T::lit(n), T::zero());
    }
    for j in 0..dim {
        for k in j + 1..dim {
            let radius = 0.1 * up[j].max(up[k]) / g;
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.gen::<f64>();
            let z = c(T::lit(r * theta.cos()), T::lit(r * theta.sin()));
            sigma[(j, k)] = z;
            sigma[(k, j)] = z.conj();
        }
    }
    MdmState::new(sigma).expect("constructed hermitian")
}

fn initial_state<T: Real>(model: &NetworkModel<T>, init: Init) -> MdmState<T> {
    match init {
        Init::Deterministic => MdmState::equilibrium(model),
        Init::Random(seed) => random_initial_state(model, seed),
    }
}

/// Self-consistent iteration of the steady-state conditions.
///
/// Each sweep recomputes every coherence from the current populations and
/// coherences, then moves the populations a fraction `alpha` toward the values
/// implied by the new coherences.
pub fn fixed_point_iterate<T: Real>(
    model: &NetworkModel<T>,
    config: &FixedPointConfig<T>,
) -> Result<SteadyStateResult<T>> {
    config.check()?;
    let seed = match config.init {
        Init::Random(s) => Some(s),
        Init::Deterministic => None,
    };
    iterate(model, config, initial_state(model, config.init).into_sigma(), seed)
}

/// [`fixed_point_iterate`] from an explicit initial guess; `config.init` is
/// ignored.
pub fn fixed_point_from<T: Real>(
    model: &NetworkModel<T>,
    config: &FixedPointConfig<T>,
    initial: &MdmState<T>,
) -> Result<SteadyStateResult<T>> {
    config.check()?;
    if initial.n_modes() != model.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_modes(),
            found: initial.n_modes(),
        });
    }
    iterate(model, config, initial.sigma().clone(), None)
}

fn iterate<T: Real>(
    model: &NetworkModel<T>,
    config: &FixedPointConfig<T>,
    mut sigma: CMatrix<T>,
    seed: Option<u64>,
) -> Result<SteadyStateResult<T>> {
    let dim = model.n_modes();
    let t = &model.tunneling;
    let gamma = model.gamma;
    let two = T::lit(2.0);
    let floor = T::lit(1e-14);
    let mut last_residual = T::infinity();
    for iter in 1..=config.max_iter {
        let n = sigma.real_diagonal();
        let mut next = CMatrix::zeros(dim);
        for j in 0..dim {
            for k in j + 1..dim {
                let mut num = t[(j, k)] * (n[j] - n[k]);
                for m in 0..dim {
                    if m != j && m != k {
                        num = num + t[(m, k)] * sigma[(j, m)] - t[(j, m)] * sigma[(m, k)];
                    }
                }
                let den: C<T> = c(detuning(model, &n, j, k), gamma);
                if den.norm() < floor {
                    return Err(Error::SingularDenominator { row: j, col: k });
                }
                let z = num / den;
                next[(j, k)] = z;
                next[(k, j)] = z.conj();
            }
        }
        let mut change = T::zero();
        for j in 0..dim {
            let mut flow = T::zero();
            for m in 0..dim {
                if m != j {
                    flow = flow + (t[(m, j)] * next[(j, m)]).im;
                }
            }
            let target = model.gamma_up[j] / gamma + two / gamma * flow;
            let mixed = (T::one() - config.alpha) * n[j] + config.alpha * target;
            change = change + (mixed - n[j]).abs();
            next[(j, j)] = c(mixed, T::zero());
        }
        sigma = next;
        if !sigma.is_finite() || !change.is_finite() {
            return Ok(SteadyStateResult {
                state: MdmState::new(CMatrix::zeros(dim)).expect("zero is hermitian"),
                residual: T::infinity(),
                iterations: iter,
                converged: false,
                method: Method::FixedPoint,
                seed,
                model_time: None,
            });
        }
        if change < config.tol {
            last_residual = derivative_unchecked(model, &sigma).max_abs();
            if last_residual < config.tol {
                return Ok(SteadyStateResult {
                    state: MdmState::new(sigma)?,
                    residual: last_residual,
                    iterations: iter,
                    converged: true,
                    method: Method::FixedPoint,
                    seed,
                    model_time: None,
                });
            }
        }
    }
    if !last_residual.is_finite() {
        last_residual = derivative_unchecked(model, &sigma).max_abs();
    }
    Ok(SteadyStateResult {
        state: MdmState::new(sigma)?,
        residual: last_residual,
        iterations: config.max_iter,
        converged: false,
        method: Method::FixedPoint,
        seed,
        model_time: None,
    })
}

/// Unknowns are `n_1..n_J` followed by `(Re z_jk, Im z_jk)` for `j < k`.
fn pack_len(dim: usize) -> usize {
    dim + dim * (dim - 1)
}

fn unpack<T: Real>(dim: usize, v: &[T]) -> CMatrix<T> {
    let mut sigma = CMatrix::zeros(dim);
    for j in 0..dim {
        sigma[(j, j)] = c(v[j], T::zero());
    }
    let mut idx = dim;
    for j in 0..dim {
        for k in j + 1..dim {
            let z = c(v[idx], v[idx + 1]);
            sigma[(j, k)] = z;
            sigma[(k, j)] = z.conj();
            idx += 2;
        }
    }
    sigma
}

fn pack<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let dim = m.dim();
    let mut v = Vec::with_capacity(pack_len(dim));
    for j in 0..dim {
        v.push(m[(j, j)].re);
    }
    for j in 0..dim {
        for k in j + 1..dim {
            v.push(m[(j, k)].re);
            v.push(m[(j, k)].im);
        }
    }
    v
}

/// Exact steady state of a network with zero capacitance, from the real
/// linear system in populations and upper-triangle coherences.
pub fn solve_linear_ec0<T: Real>(model: &NetworkModel<T>) -> Result<SteadyStateResult<T>> {
    if model.has_charging() {
        return Err(Error::InvalidModel(
            "linear solve requires zero capacitance".into(),
        ));
    }
    let dim = model.n_modes();
    let size = pack_len(dim);
    let mut homogeneous = model.clone();
    homogeneous.gamma_up.iter_mut().for_each(|g| *g = T::zero());

    let mut a = vec![T::zero(); size * size];
    let mut basis = vec![T::zero(); size];
    for col in 0..size {
        basis[col] = T::one();
        let image = pack(&derivative_unchecked(&homogeneous, &unpack(dim, &basis)));
        basis[col] = T::zero();
        for row in 0..size {
            a[row * size + col] = image[row];
        }
    }
    let mut b = vec![T::zero(); size];
    for j in 0..dim {
        b[j] = -model.gamma_up[j];
    }
    let x = solve_real(a, b)?;
    let state = MdmState::new(unpack(dim, &x))?;
    let residual = derivative_unchecked(model, state.sigma()).max_abs();
    Ok(SteadyStateResult {
        state,
        residual,
        iterations: 1,
        converged: residual.is_finite(),
        method: Method::LinearEc0,
        seed: None,
        model_time: None,
    })
}

#[derive(Debug, Clone)]
pub struct UniquenessReport<T> {
    pub n_starts: usize,
    pub converged: usize,
    /// Runs that hit `max_iter`, went non-finite or hit a singular denominator.
    pub non_converged: usize,
    /// Largest pairwise population distance between converged runs.
    pub max_distance: T,
    /// Largest pairwise elementwise distance of the full matrices.
    pub max_matrix_distance: T,
    pub runs: Vec<SteadyStateResult<T>>,
}

/// Runs the fixed-point solver from `n_starts` random guesses seeded
/// `base_seed + i`. The report does not depend on thread scheduling.
pub fn multi_start<T: Real>(
    model: &NetworkModel<T>,
    n_starts: usize,
    base_seed: u64,
    config: &FixedPointConfig<T>,
) -> Result<UniquenessReport<T>> {
    if n_starts < 2 {
        return Err(Error::InvalidParameter("multi_start needs at least 2 starts".into()));
    }
    config.check()?;
    let outcomes: Vec<Option<SteadyStateResult<T>>> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let cfg = config.with_init(Init::Random(base_seed.wrapping_add(i as u64)));
            fixed_point_iterate(model, &cfg).ok()
        })
        .collect();
    let runs: Vec<SteadyStateResult<T>> = outcomes.into_iter().flatten().collect();
    let good: Vec<&SteadyStateResult<T>> = runs.iter().filter(|r| r.converged).collect();
    let mut max_distance = T::zero();
    let mut max_matrix_distance = T::zero();
    for (i, a) in good.iter().enumerate() {
        for b in &good[i + 1..] {
            let na = a.state.populations();
            let nb = b.state.populations();
            for (x, y) in na.iter().zip(&nb) {
                max_distance = max_distance.max((*x - *y).abs());
            }
            max_matrix_distance = max_matrix_distance.max(a.state.max_abs_diff(&b.state));
        }
    }
    Ok(UniquenessReport {
        n_starts,
        converged: good.len(),
        non_converged: n_starts - good.len(),
        max_distance,
        max_matrix_distance,
        runs,
    })
}

/// Settings for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions<T> {
    pub method: Method,
    pub fixed_point: FixedPointConfig<T>,
    /// Horizon for ODE relaxation, in units of `1/γ`.
    pub relax_horizon: T,
    /// Retry with ODE relaxation when the fixed point does not converge.
    pub fallback: bool,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            method: Method::FixedPoint,
            fixed_point: FixedPointConfig::default(),
            relax_horizon: T::lit(2000.0),
            fallback: true,
        }
    }
}

/// Dispatches to the requested solver.
pub fn solve<T: Real>(model: &NetworkModel<T>, opts: &SolveOptions<T>) -> Result<SteadyStateResult<T>> {
    solve_from(model, opts, None)
}

/// [`solve`] with an optional initial guess for the iterative methods.
pub fn solve_from<T: Real>(
    model: &NetworkModel<T>,
    opts: &SolveOptions<T>,
    initial: Option<&MdmState<T>>,
) -> Result<SteadyStateResult<T>> {
    let relax = || {
        let equilibrium = MdmState::equilibrium(model);
        relax_to_steady(
            model,
            initial.unwrap_or(&equilibrium),
            opts.fixed_point.tol,
            opts.relax_horizon / model.gamma,
        )
    };
    let fixed_point = || match initial {
        Some(s) => fixed_point_from(model, &opts.fixed_point, s),
        None => fixed_point_iterate(model, &opts.fixed_point),
    };
    match opts.method {
        Method::LinearEc0 => solve_linear_ec0(model),
        Method::OdeRelax => relax(),
        Method::FixedPoint => match fixed_point() {
            Ok(r) if r.converged || !opts.fallback => Ok(r),
            Err(Error::SingularDenominator { .. }) if opts.fallback => relax(),
            Err(e) => Err(e),
            Ok(_) => relax(),
        },
    }
}
