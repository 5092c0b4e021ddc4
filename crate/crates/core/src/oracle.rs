//! Exact Lindblad master equation on a truncated Fock space.
//!
//! Each mode keeps occupations `0..=cutoff`; basis index
//! `Σ_j n_j (cutoff+1)^(J-1-j)`. Truncated ladder operators still give a
//! Lindblad generator, so trace and positivity are preserved exactly and
//! truncation shows up only as leakage into the top layer.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::dynamics::{evolve_at, MdmState};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, SparseMatrix};
use crate::model::NetworkModel;
use crate::ode::{DormandPrince, OdeState};
use crate::scalar::{c, i_unit, Real, C};

/// Largest Hilbert-space dimension accepted by [`build_fock_operators`].
pub const DIMENSION_LIMIT: usize = 4096;

/// Top-layer population above which a trajectory is flagged.
pub const LEAK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FockOperatorSet<T> {
    pub n_modes: usize,
    pub cutoff: usize,
    pub dim: usize,
    pub annihilation: Vec<SparseMatrix<T>>,
    pub creation: Vec<SparseMatrix<T>>,
    pub number: Vec<SparseMatrix<T>>,
    occupations: Vec<Vec<usize>>,
    /// Total excitation number of each basis state.
    sector: Vec<usize>,
    /// Position of each basis state inside its sector.
    local: Vec<usize>,
    /// Basis states of each sector, ascending.
    members: Vec<Vec<usize>>,
}

/// Hilbert-space dimension `(cutoff+1)^n_modes`, or `None` on overflow.
pub fn fock_dimension(n_modes: usize, cutoff: usize) -> Option<usize> {
    (cutoff + 1).checked_pow(u32::try_from(n_modes).ok()?)
}

pub fn build_fock_operators<T: Real>(n_modes: usize, cutoff: usize) -> Result<FockOperatorSet<T>> {
    if n_modes == 0 || cutoff == 0 {
        return Err(Error::InvalidParameter(
            "Fock space needs at least one mode and cutoff >= 1".into(),
        ));
    }
    let dim = match fock_dimension(n_modes, cutoff) {
        Some(d) if d <= DIMENSION_LIMIT => d,
        other => {
            return Err(Error::DimensionGuard {
                dim: other.unwrap_or(usize::MAX),
                limit: DIMENSION_LIMIT,
            })
        }
    };
    let base = cutoff + 1;
    let occupations: Vec<Vec<usize>> = (0..dim)
        .map(|idx| {
            let mut occ = vec![0; n_modes];
            let mut rest = idx;
            for j in (0..n_modes).rev() {
                occ[j] = rest % base;
                rest /= base;
            }
            occ
        })
        .collect();
    let mut annihilation = Vec::with_capacity(n_modes);
    let mut number = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        let stride = base.pow((n_modes - 1 - j) as u32);
        let lower = occupations
            .iter()
            .enumerate()
            .filter(|(_, occ)| occ[j] > 0)
            .map(|(idx, occ)| (idx - stride, idx, c(T::count(occ[j]).sqrt(), T::zero())));
        annihilation.push(SparseMatrix::from_triplets(dim, lower));
        let diag = occupations
            .iter()
            .enumerate()
            .map(|(idx, occ)| (idx, idx, c(T::count(occ[j]), T::zero())));
        number.push(SparseMatrix::from_triplets(dim, diag));
    }
    let creation = annihilation.iter().map(SparseMatrix::adjoint).collect();
    let sector: Vec<usize> = occupations.iter().map(|occ| occ.iter().sum()).collect();
    let mut members = vec![Vec::new(); n_modes * cutoff + 1];
    let mut local = vec![0; dim];
    for (idx, &n) in sector.iter().enumerate() {
        local[idx] = members[n].len();
        members[n].push(idx);
    }
    Ok(FockOperatorSet {
        n_modes,
        cutoff,
        dim,
        annihilation,
        creation,
        number,
        occupations,
        sector,
        local,
        members,
    })
}

impl<T: Real> FockOperatorSet<T> {
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        self.occupations[index][mode]
    }

    /// Whether basis state `index` has some mode at the cutoff.
    pub fn is_top_layer(&self, index: usize) -> bool {
        self.occupations[index].contains(&self.cutoff)
    }

    /// `max |[a_j, a_j†] − 1|` over basis states with `n_j < cutoff`.
    pub fn commutator_defect(&self, j: usize) -> T {
        let a = &self.annihilation[j];
        let ad = &self.creation[j];
        let comm = a.matmul(ad).add(&ad.matmul(a).scale(c(-T::one(), T::zero())));
        let mut worst = T::zero();
        for r in 0..self.dim {
            for col in 0..self.dim {
                if self.occupations[r][j] == self.cutoff || self.occupations[col][j] == self.cutoff {
                    continue;
                }
                let expect = if r == col { T::one() } else { T::zero() };
                worst = worst.max((comm.get(r, col) - c(expect, T::zero())).norm());
            }
        }
        worst
    }

    /// Number of total-excitation sectors, `J·cutoff + 1`.
    pub fn n_sectors(&self) -> usize {
        self.members.len()
    }

    pub fn sector_members(&self, n: usize) -> &[usize] {
        &self.members[n]
    }

    /// `a†_j a_k`.
    pub fn pair(&self, j: usize, k: usize) -> SparseMatrix<T> {
        self.creation[j].matmul(&self.annihilation[k])
    }
}

/// Trace-normalized density matrix on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix<T> {
    pub rho: CMatrix<T>,
}

impl<T: Real> FockDensityMatrix<T> {
    pub fn vacuum(ops: &FockOperatorSet<T>) -> Self {
        let mut rho = CMatrix::zeros(ops.dim);
        rho[(0, 0)] = c(T::one(), T::zero());
        Self { rho }
    }

    /// Checks hermiticity and unit trace (to `1e-10`).
    pub fn new(rho: CMatrix<T>) -> Result<Self> {
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
        if let Some((row, col)) = rho.hermiticity_violation(tol) {
            return Err(Error::NotHermitian { row, col });
        }
        let tr = rho.trace();
        if (tr - c(T::one(), T::zero())).norm() > tol {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {} differs from 1",
                tr.re
            )));
        }
        Ok(Self { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn trace(&self) -> T {
        self.rho.trace().re
    }

    pub fn expectation(&self, op: &SparseMatrix<T>) -> C<T> {
        op.trace_with(&self.rho)
    }

    /// `σ_jk = Tr(a†_j a_k ρ)`.
    pub fn two_point(&self, ops: &FockOperatorSet<T>) -> CMatrix<T> {
        let n = ops.n_modes;
        let mut sigma = CMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                sigma[(j, k)] = self.expectation(&ops.pair(j, k));
            }
        }
        sigma
    }

    /// Total population of basis states with some mode at the cutoff.
    pub fn top_layer_population(&self, ops: &FockOperatorSet<T>) -> T {
        (0..self.dim())
            .filter(|&i| ops.is_top_layer(i))
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    pub fn purity(&self) -> T {
        let mut s = T::zero();
        for (a, b) in self.rho.as_slice().iter().zip(self.rho.adjoint().as_slice()) {
            s = s + (*a * *b).re;
        }
        s
    }

    pub fn min_eigenvalue(&self) -> T {
        self.rho.min_eigenvalue()
    }
}

/// Pre-assembled generator `dρ/dt = −i[H, ρ] + D(ρ)`.
struct Liouvillian<T> {
    hamiltonian: SparseMatrix<T>,
    /// Diagonal of `½ Σ_j (γ_j↓ a†_j a_j + γ_j↑ a_j a†_j)`.
    loss: Vec<T>,
    jumps: Vec<Jump<T>>,
}

/// Jump operator `√rate · L` with at most one entry per row:
/// row `r` holds `val[r]` in column `col[r]`.
struct Jump<T> {
    col: Vec<usize>,
    val: Vec<C<T>>,
    val_conj: Vec<C<T>>,
}

impl<T: Real> Jump<T> {
    fn new(rate: T, op: &SparseMatrix<T>) -> Self {
        let scale = rate.sqrt();
        let mut col = vec![0; op.dim()];
        let mut val = vec![C::new(T::zero(), T::zero()); op.dim()];
        for r in 0..op.dim() {
            let row = op.row(r);
            assert!(row.len() <= 1, "jump operator must be a ladder operator");
            if let Some(&(c0, v)) = row.first() {
                col[r] = c0;
                val[r] = v * scale;
            }
        }
        let val_conj = val.iter().map(|v| v.conj()).collect();
        Self { col, val, val_conj }
    }
}

fn hamiltonian<T: Real>(model: &NetworkModel<T>, ops: &FockOperatorSet<T>) -> SparseMatrix<T> {
    let n = model.n_modes();
    let diag = (0..ops.dim).map(|idx| {
        let occ: Vec<T> = (0..n).map(|j| T::count(ops.occupation(idx, j))).collect();
        let mut e = T::zero();
        for j in 0..n {
            e = e + model.epsilon[j] * occ[j];
            for k in j + 1..n {
                let d = occ[j] - occ[k];
                e = e + model.capacitance[j][k] * d * d;
            }
        }
        (idx, idx, c(e, T::zero()))
    });
    let mut h = SparseMatrix::from_triplets(ops.dim, diag);
    for j in 0..n {
        for k in 0..n {
            let t = model.tunneling[(j, k)];
            if j != k && t != c(T::zero(), T::zero()) {
                h = h.add(&ops.pair(k, j).scale(t));
            }
        }
    }
    h
}

impl<T: Real> Liouvillian<T> {
    fn new(model: &NetworkModel<T>, ops: &FockOperatorSet<T>) -> Result<Self> {
        if model.n_modes() != ops.n_modes {
            return Err(Error::DimensionMismatch {
                expected: ops.n_modes,
                found: model.n_modes(),
            });
        }
        let half = T::lit(0.5);
        let mut loss = vec![T::zero(); ops.dim];
        let mut jumps = Vec::new();
        for j in 0..ops.n_modes {
            let down = model.gamma_down(j);
            let up = model.gamma_up[j];
            let a = &ops.annihilation[j];
            let ad = &ops.creation[j];
            let ada = ad.matmul(a);
            let aad = a.matmul(ad);
            for (i, l) in loss.iter_mut().enumerate() {
                *l = *l + half * (down * ada.get(i, i).re + up * aad.get(i, i).re);
            }
            jumps.push(Jump::new(down, a));
            if up != T::zero() {
                jumps.push(Jump::new(up, ad));
            }
        }
        Ok(Self {
            hamiltonian: hamiltonian(model, ops),
            loss,
            jumps,
        })
    }

    fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let n = rho.dim();
        let src = rho.as_slice();
        let h_rho = self.hamiltonian.mul_dense(rho);
        let rho_h = self.hamiltonian.dense_mul(rho);
        let (left, right) = (h_rho.as_slice(), rho_h.as_slice());
        let zero = C::new(T::zero(), T::zero());
        let mut out = CMatrix::zeros(n);
        let dst = out.as_mut_slice();
        for a in 0..n {
            let row = &mut dst[a * n..(a + 1) * n];
            let la = self.loss[a];
            for (b, o) in row.iter_mut().enumerate() {
                let k = a * n + b;
                let comm = left[k] - right[k];
                *o = c(comm.im, -comm.re) - src[k] * (la + self.loss[b]);
            }
            for jump in &self.jumps {
                let va = jump.val[a];
                if va == zero {
                    continue;
                }
                let from = &src[jump.col[a] * n..(jump.col[a] + 1) * n];
                for ((o, &cb), &vb) in row.iter_mut().zip(&jump.col).zip(&jump.val_conj) {
                    *o = *o + va * from[cb] * vb;
                }
            }
        }
        out
    }
}

fn check_rho<T: Real>(rho: &FockDensityMatrix<T>, ops: &FockOperatorSet<T>) -> Result<()> {
    if rho.dim() != ops.dim {
        return Err(Error::DimensionMismatch {
            expected: ops.dim,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `dρ/dt` with `γ_j↓ = γ + γ_j↑`.
pub fn lindblad_derivative<T: Real>(
    model: &NetworkModel<T>,
    rho: &FockDensityMatrix<T>,
    ops: &FockOperatorSet<T>,
) -> Result<CMatrix<T>> {
    check_rho(rho, ops)?;
    Ok(Liouvillian::new(model, ops)?.apply(&rho.rho))
}

/// Only the `−i[H, ρ]` part of the generator.
pub fn unitary_derivative<T: Real>(
    model: &NetworkModel<T>,
    rho: &FockDensityMatrix<T>,
    ops: &FockOperatorSet<T>,
) -> Result<CMatrix<T>> {
    check_rho(rho, ops)?;
    if model.n_modes() != ops.n_modes {
        return Err(Error::DimensionMismatch {
            expected: ops.n_modes,
            found: model.n_modes(),
        });
    }
    let hr = hamiltonian(model, ops).mul_dense(&rho.rho);
    let iu = i_unit::<T>();
    Ok(CMatrix::from_fn(rho.dim(), |a, b| -iu * (hr[(a, b)] - hr[(b, a)].conj())))
}

/// Density matrix restricted to blocks of equal total excitation number.
///
/// The Hamiltonian conserves the total excitation number and every jump
/// shifts bra and ket together, so the blocks evolve on their own. Every
/// number-conserving observable, in particular `σ_jk`, depends on them only.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDensity<T> {
    pub blocks: Vec<CMatrix<T>>,
}

impl<T: Real> SectorDensity<T> {
    /// Keeps the sector-diagonal part of `rho`.
    pub fn from_dense(rho: &FockDensityMatrix<T>, ops: &FockOperatorSet<T>) -> Self {
        let blocks = ops
            .members
            .iter()
            .map(|m| CMatrix::from_fn(m.len(), |a, b| rho.rho[(m[a], m[b])]))
            .collect();
        Self { blocks }
    }

    pub fn to_dense(&self, ops: &FockOperatorSet<T>) -> FockDensityMatrix<T> {
        let mut rho = CMatrix::zeros(ops.dim);
        for (block, m) in self.blocks.iter().zip(&ops.members) {
            for (a, &ga) in m.iter().enumerate() {
                for (b, &gb) in m.iter().enumerate() {
                    rho[(ga, gb)] = block[(a, b)];
                }
            }
        }
        FockDensityMatrix { rho }
    }

    pub fn trace(&self) -> T {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// `Tr(op ρ)` for a number-conserving `op`.
    pub fn expectation(&self, op: &SparseMatrix<T>, ops: &FockOperatorSet<T>) -> C<T> {
        let mut acc = C::new(T::zero(), T::zero());
        for r in 0..op.dim() {
            let n = ops.sector[r];
            for &(col, v) in op.row(r) {
                if ops.sector[col] == n {
                    acc = acc + v * self.blocks[n][(ops.local[col], ops.local[r])];
                }
            }
        }
        acc
    }

    pub fn two_point(&self, ops: &FockOperatorSet<T>) -> CMatrix<T> {
        let n = ops.n_modes;
        let mut sigma = CMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                sigma[(j, k)] = self.expectation(&ops.pair(j, k), ops);
            }
        }
        sigma
    }

    pub fn top_layer_population(&self, ops: &FockOperatorSet<T>) -> T {
        let mut s = T::zero();
        for (block, m) in self.blocks.iter().zip(&ops.members) {
            for (a, &g) in m.iter().enumerate() {
                if ops.is_top_layer(g) {
                    s = s + block[(a, a)].re;
                }
            }
        }
        s
    }

    pub fn min_eigenvalue(&self) -> T {
        self.blocks
            .iter()
            .filter(|b| b.dim() > 0)
            .map(CMatrix::min_eigenvalue)
            .fold(T::infinity(), T::min)
    }

    pub fn hermiticity_defect(&self) -> T {
        self.blocks
            .iter()
            .map(CMatrix::hermiticity_defect)
            .fold(T::zero(), T::max)
    }
}

impl<T: Real> OdeState<T> for SectorDensity<T> {
    fn zeros_like(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| CMatrix::zeros(b.dim())).collect(),
        }
    }

    fn axpy(&mut self, a: T, other: &Self) {
        for (x, y) in self.blocks.iter_mut().zip(&other.blocks) {
            x.axpy(a, y);
        }
    }

    fn is_finite(&self) -> bool {
        self.blocks.iter().all(CMatrix::is_finite)
    }

    fn hermitize(&mut self) {
        self.blocks.iter_mut().for_each(CMatrix::hermitize);
    }

    fn error_ratio(err: &Self, y: &Self, y_new: &Self, atol: T, rtol: T) -> T {
        let mut worst = T::zero();
        for ((e, a), b) in err.blocks.iter().zip(&y.blocks).zip(&y_new.blocks) {
            worst = worst.max(CMatrix::error_ratio(e, a, b, atol, rtol));
        }
        worst
    }
}

type LocalRow<T> = Vec<(usize, C<T>)>;

/// The generator acting on [`SectorDensity`] blocks.
struct SectorGenerator<T> {
    /// Hamiltonian rows per sector, in local indices.
    h: Vec<Vec<LocalRow<T>>>,
    loss: Vec<Vec<T>>,
    jumps: Vec<SectorJump<T>>,
}

/// Source local index and amplitude of one row of a jump block.
type JumpEntry<T> = Option<(usize, C<T>)>;

/// `√rate · L` split by target sector: row `a` of sector `n` reads local
/// index `map[n][a].0` of sector `source[n]`.
struct SectorJump<T> {
    source: Vec<Option<usize>>,
    map: Vec<Vec<JumpEntry<T>>>,
}

impl<T: Real> SectorGenerator<T> {
    fn new(model: &NetworkModel<T>, ops: &FockOperatorSet<T>) -> Result<Self> {
        let full = Liouvillian::new(model, ops)?;
        let hamiltonian = hamiltonian(model, ops);
        let h = ops
            .members
            .iter()
            .map(|m| {
                m.iter()
                    .map(|&g| {
                        hamiltonian
                            .row(g)
                            .iter()
                            .map(|&(col, v)| {
                                debug_assert_eq!(ops.sector[col], ops.sector[g]);
                                (ops.local[col], v)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let loss = ops
            .members
            .iter()
            .map(|m| m.iter().map(|&g| full.loss[g]).collect())
            .collect();
        let jumps = full
            .jumps
            .iter()
            .map(|jump| {
                let mut source = vec![None; ops.n_sectors()];
                let map = ops
                    .members
                    .iter()
                    .enumerate()
                    .map(|(n, m)| {
                        m.iter()
                            .map(|&g| {
                                let v = jump.val[g];
                                if v == C::new(T::zero(), T::zero()) {
                                    return None;
                                }
                                let col = jump.col[g];
                                source[n] = Some(ops.sector[col]);
                                Some((ops.local[col], v))
                            })
                            .collect()
                    })
                    .collect();
                SectorJump { source, map }
            })
            .collect();
        Ok(Self { h, loss, jumps })
    }

    fn apply(&self, state: &SectorDensity<T>) -> SectorDensity<T> {
        let blocks = state
            .blocks
            .iter()
            .enumerate()
            .map(|(n, rho)| {
                let size = rho.dim();
                let h = &self.h[n];
                let loss = &self.loss[n];
                let mut out = CMatrix::from_fn(size, |a, b| {
                    let mut comm = C::new(T::zero(), T::zero());
                    for &(col, v) in &h[a] {
                        comm = comm + v * rho[(col, b)];
                    }
                    for &(col, v) in &h[b] {
                        comm = comm - rho[(a, col)] * v.conj();
                    }
                    c(comm.im, -comm.re) - rho[(a, b)] * (loss[a] + loss[b])
                });
                for jump in &self.jumps {
                    let Some(src_sector) = jump.source[n] else {
                        continue;
                    };
                    let src = &state.blocks[src_sector];
                    let map = &jump.map[n];
                    for (a, ea) in map.iter().enumerate() {
                        let Some((ca, va)) = *ea else { continue };
                        for (b, eb) in map.iter().enumerate() {
                            if let Some((cb, vb)) = *eb {
                                out[(a, b)] = out[(a, b)] + va * src[(ca, cb)] * vb.conj();
                            }
                        }
                    }
                }
                out
            })
            .collect();
        SectorDensity { blocks }
    }
}

#[derive(Debug, Clone)]
pub struct ExactTrajectory<T> {
    pub times: Vec<T>,
    /// `σ_exact` at each sample time.
    pub sigma: Vec<CMatrix<T>>,
    /// Largest top-layer population seen at any accepted step.
    pub truncation_leak: T,
    /// `truncation_leak` exceeded [`LEAK_THRESHOLD`].
    pub leak_warning: bool,
    /// Largest `|Tr ρ − 1|` seen at any accepted step.
    pub max_trace_error: T,
    pub final_state: SectorDensity<T>,
    pub accepted_steps: usize,
}

/// Integrates the master equation and records `σ_exact` at `times`
/// (non-negative, any order). Coherences of `rho0` between different total
/// excitation numbers are dropped; they do not affect any reported quantity.
pub fn evolve_exact<T: Real>(
    model: &NetworkModel<T>,
    ops: &FockOperatorSet<T>,
    rho0: &FockDensityMatrix<T>,
    times: &[T],
    rel_tol: T,
) -> Result<ExactTrajectory<T>> {
    check_rho(rho0, ops)?;
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) {
        return Err(Error::InvalidParameter("sample times must be finite and >= 0".into()));
    }
    let generator = SectorGenerator::new(model, ops)?;
    let dp = DormandPrince {
        rtol: rel_tol,
        atol: T::lit(1e-12).max(T::epsilon() * T::lit(10.0)),
        initial_step: T::lit(1e-3) / model.gamma,
        ..DormandPrince::default()
    };
    let start = SectorDensity::from_dense(rho0, ops);
    let t_end = times.iter().copied().fold(T::zero(), T::max);
    let mut sigma: Vec<Option<CMatrix<T>>> = vec![None; times.len()];
    for (i, &t) in times.iter().enumerate() {
        if t == T::zero() {
            sigma[i] = Some(start.two_point(ops));
        }
    }
    let mut leak = start.top_layer_population(ops);
    let mut trace_err = (start.trace() - T::one()).abs();
    let res = dp.integrate(
        |r| Ok(generator.apply(r)),
        start,
        t_end,
        times,
        |step| {
            leak = leak.max(step.state.top_layer_population(ops));
            trace_err = trace_err.max((step.state.trace() - T::one()).abs());
            if step.at_stop {
                for (i, &t) in times.iter().enumerate() {
                    if t == step.time {
                        sigma[i] = Some(step.state.two_point(ops));
                    }
                }
            }
            ControlFlow::Continue(())
        },
    )?;
    let sigma = sigma
        .into_iter()
        .map(|s| s.ok_or_else(|| Error::InvalidParameter("sample time not reached".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactTrajectory {
        times: times.to_vec(),
        sigma,
        truncation_leak: leak,
        leak_warning: leak > T::lit(LEAK_THRESHOLD),
        max_trace_error: trace_err,
        final_state: res.state,
        accepted_steps: res.accepted,
    })
}

/// Largest `|⟨A B⟩ − ⟨A⟩⟨B⟩|` over `A = a†_j a_k`, `B = a†_m a_n`.
pub fn covariance_max<T: Real>(state: &SectorDensity<T>, ops: &FockOperatorSet<T>) -> T {
    let n = ops.n_modes;
    let pairs: Vec<SparseMatrix<T>> = (0..n * n).map(|p| ops.pair(p / n, p % n)).collect();
    let means: Vec<C<T>> = pairs.iter().map(|p| state.expectation(p, ops)).collect();
    let mut worst = T::zero();
    for (x, a) in pairs.iter().enumerate() {
        for (y, b) in pairs.iter().enumerate() {
            let joint = state.expectation(&a.matmul(b), ops);
            worst = worst.max((joint - means[x] * means[y]).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationParams {
    pub n_modes: usize,
    pub cutoff: usize,
    pub dim: usize,
    pub t_end: f64,
    pub rel_tol: f64,
    pub samples: usize,
    pub gamma: f64,
    pub gamma_up: Vec<f64>,
    pub max_tunneling: f64,
    pub max_capacitance: f64,
    pub model_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport<T> {
    /// `max_t max_jk |σ_exact − σ_mf|` over the sample grid.
    pub max_dev: T,
    pub final_dev: T,
    pub truncation_leak: T,
    pub leak_warning: bool,
    pub max_trace_error: T,
    /// [`covariance_max`] of the exact state at `t_end`.
    pub covariance_max: T,
    pub params: DeviationParams,
}

/// Number of equally spaced sample times used by [`compare_meanfield`].
pub const COMPARE_SAMPLES: usize = 101;

/// Runs the exact and mean-field dynamics from the vacuum (`σ = 0`) and
/// reports their largest elementwise disagreement on `[0, t_end]`.
pub fn compare_meanfield<T: Real>(
    model: &NetworkModel<T>,
    t_end: T,
    cutoff: usize,
    rel_tol: T,
) -> Result<DeviationReport<T>> {
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return Err(Error::InvalidParameter("t_end must be finite and > 0".into()));
    }
    let ops = build_fock_operators(model.n_modes(), cutoff)?;
    let steps = COMPARE_SAMPLES - 1;
    let times: Vec<T> = (0..=steps)
        .map(|i| t_end * T::count(i) / T::count(steps))
        .collect();
    let exact = evolve_exact(model, &ops, &FockDensityMatrix::vacuum(&ops), &times, rel_tol)?;
    let mf = evolve_at(model, &MdmState::zeros(model.n_modes()), &times, rel_tol)?;
    let devs: Vec<T> = exact
        .sigma
        .iter()
        .zip(&mf)
        .map(|(e, m)| e.max_abs_diff(m.sigma()))
        .collect();
    let max_dev = devs.iter().copied().fold(T::zero(), T::max);
    let final_dev = *devs.last().expect("at least one sample");
    let max_capacitance = model
        .capacitance
        .iter()
        .flatten()
        .map(|x| x.to_f64_lossy())
        .fold(0.0, f64::max);
    Ok(DeviationReport {
        max_dev,
        final_dev,
        truncation_leak: exact.truncation_leak,
        leak_warning: exact.leak_warning,
        max_trace_error: exact.max_trace_error,
        covariance_max: covariance_max(&exact.final_state, &ops),
        params: DeviationParams {
            n_modes: model.n_modes(),
            cutoff,
            dim: ops.dim,
            t_end: t_end.to_f64_lossy(),
            rel_tol: rel_tol.to_f64_lossy(),
            samples: COMPARE_SAMPLES,
            gamma: model.gamma.to_f64_lossy(),
            gamma_up: model.gamma_up.iter().map(|x| x.to_f64_lossy()).collect(),
            max_tunneling: model.tunneling.max_abs().to_f64_lossy(),
            max_capacitance,
            model_hash: model.content_hash(),
        },
    })
}
