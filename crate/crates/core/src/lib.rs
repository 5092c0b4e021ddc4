//! Mean-field simulation of dissipative Josephson-junction networks and
//! flux-controlled Cooper-pair pumps.
//!
//! The state of a `J`-terminal network is the two-point matrix
//! `σ_jk = ⟨a†_j a_k⟩`. [`dynamics`] integrates its equations of motion,
//! [`steady`] solves for the nonequilibrium steady state, [`observables`]
//! turns states into terminal and pumped currents, [`oracle`] checks the
//! mean-field equations against an exact truncated Fock-space master
//! equation, and [`sweep`] runs parameter grids.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod ode;
pub mod oracle;
pub mod scalar;
pub mod steady;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type Network = model::NetworkModel<f64>;
pub type Pump = model::PumpParams<f64>;
pub type Matrix = linalg::CMatrix<f64>;
pub type State = dynamics::MdmState<f64>;
pub type Steady = steady::SteadyStateResult<f64>;
