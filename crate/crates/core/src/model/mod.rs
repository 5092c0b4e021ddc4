//! Network data model, flux-phase assignment and the two pump geometries.
//!
//! Units: ħ = 1, energies and rates are measured in units of the relaxation
//! rate γ (so `gamma = 1` unless rescaled).

mod config;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Real, C};

pub use config::{load_model, parse_document, Geometry, ModelDocument};

/// A Josephson-junction network with one bosonic mode per terminal.
///
/// `tunneling[(j, k)]` is the coefficient of `a†_k a_j` in the Hamiltonian,
/// i.e. the amplitude for a Cooper pair hopping from mode `j` to mode `k`.
/// `capacitance[j][k]` is the charging energy of the `(n_j - n_k)^2` term.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T> {
    pub epsilon: Vec<T>,
    pub tunneling: CMatrix<T>,
    pub capacitance: Vec<Vec<T>>,
    /// Bath creation rates γ_j↑.
    pub gamma_up: Vec<T>,
    /// Common relaxation rate γ = γ_j↓ − γ_j↑.
    pub gamma: T,
    pub mode_labels: Option<Vec<String>>,
}

impl<T: Real> NetworkModel<T> {
    /// An uncoupled network: no tunneling, no charging energy, zero onsite energies.
    pub fn uncoupled(gamma_up: Vec<T>, gamma: T) -> Self {
        let n = gamma_up.len();
        Self {
            epsilon: vec![T::zero(); n],
            tunneling: CMatrix::zeros(n),
            capacitance: vec![vec![T::zero(); n]; n],
            gamma_up,
            gamma,
            mode_labels: None,
        }
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.epsilon.len()
    }

    /// γ_j↓ = γ + γ_j↑, needed only by the exact Lindblad oracle.
    pub fn gamma_down(&self, j: usize) -> T {
        self.gamma + self.gamma_up[j]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.mode_labels
            .as_ref()
            .and_then(|ls| ls.iter().position(|l| l == label))
    }

    pub fn has_charging(&self) -> bool {
        self.capacitance.iter().flatten().any(|&c| c != T::zero())
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Returns `self` if valid, otherwise an error listing every violation.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(report.to_string()))
        }
    }

    /// Content hash over every numeric field, hex-encoded SHA-256.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: T| h.update(x.to_f64_lossy().to_bits().to_le_bytes());
        put(T::count(self.n_modes()));
        self.epsilon.iter().for_each(|&x| put(x));
        self.tunneling.as_slice().iter().for_each(|z| {
            put(z.re);
            put(z.im);
        });
        self.capacitance.iter().flatten().for_each(|&x| put(x));
        self.gamma_up.iter().for_each(|&x| put(x));
        put(self.gamma);
        if let Some(labels) = &self.mode_labels {
            for l in labels {
                h.update(l.as_bytes());
                h.update([0u8]);
            }
        }
        hex::encode(h.finalize())
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape { field: &'static str, expected: usize, found: usize },
    NonFinite { field: &'static str, row: usize, col: usize },
    NonHermitianTunneling { row: usize, col: usize },
    TunnelingDiagonal { index: usize },
    AsymmetricCapacitance { row: usize, col: usize },
    NegativeCapacitance { row: usize, col: usize },
    CapacitanceDiagonal { index: usize },
    NonPositiveGamma,
    NegativeCreationRate { index: usize },
    LabelCount { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { field, expected, found } => {
                write!(f, "{field}: expected length {expected}, found {found}")
            }
            Violation::NonFinite { field, row, col } => {
                write!(f, "{field}: non-finite entry at ({row}, {col})")
            }
            Violation::NonHermitianTunneling { row, col } => {
                write!(f, "tunneling not hermitian at ({row}, {col})")
            }
            Violation::TunnelingDiagonal { index } => {
                write!(f, "tunneling diagonal nonzero at {index}")
            }
            Violation::AsymmetricCapacitance { row, col } => {
                write!(f, "capacitance not symmetric at ({row}, {col})")
            }
            Violation::NegativeCapacitance { row, col } => {
                write!(f, "capacitance negative at ({row}, {col})")
            }
            Violation::CapacitanceDiagonal { index } => {
                write!(f, "capacitance diagonal nonzero at {index}")
            }
            Violation::NonPositiveGamma => write!(f, "gamma must be > 0"),
            Violation::NegativeCreationRate { index } => {
                write!(f, "gamma_up negative at {index}")
            }
            Violation::LabelCount { expected, found } => {
                write!(f, "mode_labels: expected {expected} labels, found {found}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every structural invariant. Comparisons are exact.
pub fn validate<T: Real>(model: &NetworkModel<T>) -> ValidationReport {
    let n = model.n_modes();
    let mut v = Vec::new();
    if model.tunneling.dim() != n {
        v.push(Violation::Shape {
            field: "tunneling",
            expected: n,
            found: model.tunneling.dim(),
        });
    }
    if model.capacitance.len() != n || model.capacitance.iter().any(|r| r.len() != n) {
        v.push(Violation::Shape {
            field: "capacitance",
            expected: n,
            found: model.capacitance.len(),
        });
    }
    if model.gamma_up.len() != n {
        v.push(Violation::Shape {
            field: "gamma_up",
            expected: n,
            found: model.gamma_up.len(),
        });
    }
    if let Some(labels) = &model.mode_labels {
        if labels.len() != n {
            v.push(Violation::LabelCount {
                expected: n,
                found: labels.len(),
            });
        }
    }
    if !v.is_empty() {
        return ValidationReport { violations: v };
    }

    for (j, &e) in model.epsilon.iter().enumerate() {
        if !e.is_finite() {
            v.push(Violation::NonFinite { field: "epsilon", row: j, col: j });
        }
    }
    let t = &model.tunneling;
    for j in 0..n {
        for k in 0..n {
            let z = t[(j, k)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                v.push(Violation::NonFinite { field: "tunneling", row: j, col: k });
            }
        }
        if t[(j, j)] != C::new(T::zero(), T::zero()) {
            v.push(Violation::TunnelingDiagonal { index: j });
        }
        for k in j + 1..n {
            if t[(k, j)] != t[(j, k)].conj() {
                v.push(Violation::NonHermitianTunneling { row: j, col: k });
            }
        }
    }
    let c = &model.capacitance;
    for j in 0..n {
        if c[j][j] != T::zero() {
            v.push(Violation::CapacitanceDiagonal { index: j });
        }
        for k in 0..n {
            if !c[j][k].is_finite() {
                v.push(Violation::NonFinite { field: "capacitance", row: j, col: k });
            } else if c[j][k] < T::zero() {
                v.push(Violation::NegativeCapacitance { row: j, col: k });
            }
        }
        for k in j + 1..n {
            if c[j][k] != c[k][j] {
                v.push(Violation::AsymmetricCapacitance { row: j, col: k });
            }
        }
    }
    if !(model.gamma > T::zero()) || !model.gamma.is_finite() {
        v.push(Violation::NonPositiveGamma);
    }
    for (j, &g) in model.gamma_up.iter().enumerate() {
        if !g.is_finite() {
            v.push(Violation::NonFinite { field: "gamma_up", row: j, col: j });
        } else if g < T::zero() {
            v.push(Violation::NegativeCreationRate { index: j });
        }
    }
    ValidationReport { violations: v }
}

/// Phase accumulated around the full outer loop, δφ = 2π Φ/Φ0.
pub fn flux_phase<T: Real>(flux_ratio: T) -> Result<T> {
    if !flux_ratio.is_finite() {
        return Err(Error::NonFiniteInput("flux_ratio"));
    }
    Ok(T::TAU() * flux_ratio)
}

/// Applied flux in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSpec<T> {
    pub flux_ratio: T,
}

impl<T: Real> FluxSpec<T> {
    pub fn new(flux_ratio: T) -> Self {
        Self { flux_ratio }
    }

    pub fn delta_phi(&self) -> T {
        T::TAU() * self.flux_ratio
    }
}

/// How the SQUID bias Γ is distributed over the creation rates.
///
/// Both variants give `γ_L↑ − γ_R↑ = Γ`, keep `γ_D↑ = γ_U↑`, and leave
/// `Σ_j γ_j↑` independent of Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSplit {
    /// The L bath is raised by Γ above the other three:
    /// `(+3Γ/4, −Γ/4, −Γ/4, −Γ/4)`. A uniform shift of all rates is
    /// unobservable in the currents, so this is "+Γ on L only".
    #[default]
    Left,
    /// `(+Γ/2, 0, −Γ/2, 0)`: Γ → −Γ is exactly the L↔R relabeling. In the
    /// asymmetric ring this forces the pumped current to vanish identically.
    Symmetric,
}

impl BiasSplit {
    /// Offsets added to the baseline rate for (L, D, R, U).
    pub fn offsets<T: Real>(self, bias: T) -> [T; 4] {
        match self {
            BiasSplit::Left => {
                let q = bias * T::lit(0.25);
                [bias - q, -q, -q, -q]
            }
            BiasSplit::Symmetric => {
                let h = bias * T::lit(0.5);
                [h, T::zero(), -h, T::zero()]
            }
        }
    }
}

/// The four terminals of the pump geometries, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    L = 0,
    D = 1,
    R = 2,
    U = 3,
}

impl Terminal {
    pub const ALL: [Terminal; 4] = [Terminal::L, Terminal::D, Terminal::R, Terminal::U];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Terminal::L => "L",
            Terminal::D => "D",
            Terminal::R => "R",
            Terminal::U => "U",
        }
    }
}

/// Parameters of the four-terminal pumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpParams<T> {
    /// Bare tunneling amplitude K.
    pub k: T,
    /// Junction charging energy E_C.
    pub e_c: T,
    /// Baseline creation rate γ↑.
    pub gamma_up_base: T,
    /// SQUID bias Γ.
    pub bias: T,
    pub flux: FluxSpec<T>,
    /// Relaxation rate γ.
    pub gamma: T,
    /// Common onsite energy; unobservable, kept for completeness.
    pub epsilon: T,
    pub bias_split: BiasSplit,
}

impl<T: Real> PumpParams<T> {
    /// Parameter point with γ = 1, ε = 0 and one-sided bias.
    pub fn new(k: T, e_c: T, gamma_up_base: T, bias: T, flux_ratio: T) -> Self {
        Self {
            k,
            e_c,
            gamma_up_base,
            bias,
            flux: FluxSpec::new(flux_ratio),
            gamma: T::one(),
            epsilon: T::zero(),
            bias_split: BiasSplit::Left,
        }
    }

    pub fn with_flux(mut self, flux_ratio: T) -> Self {
        self.flux = FluxSpec::new(flux_ratio);
        self
    }

    pub fn with_bias(mut self, bias: T) -> Self {
        self.bias = bias;
        self
    }

    pub fn with_charging(mut self, e_c: T) -> Self {
        self.e_c = e_c;
        self
    }

    pub fn with_split(mut self, split: BiasSplit) -> Self {
        self.bias_split = split;
        self
    }

    pub fn check(&self) -> Result<()> {
        let finite = [
            self.k,
            self.e_c,
            self.gamma_up_base,
            self.bias,
            self.flux.flux_ratio,
            self.gamma,
            self.epsilon,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFiniteInput("pump parameters"));
        }
        if self.k < T::zero() {
            return Err(Error::InvalidParameter("K must be >= 0".into()));
        }
        if self.e_c < T::zero() {
            return Err(Error::InvalidParameter("Ec must be >= 0".into()));
        }
        if !(self.gamma > T::zero()) {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        Ok(())
    }

    pub fn creation_rates(&self) -> Result<[T; 4]> {
        let off = self.bias_split.offsets(self.bias);
        let mut rates = [T::zero(); 4];
        for (i, o) in off.iter().enumerate() {
            rates[i] = self.gamma_up_base + *o;
            if rates[i] < T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "bias {} drives creation rate of {} negative",
                    self.bias,
                    Terminal::ALL[i].label()
                )));
            }
        }
        Ok(rates)
    }
}

/// Unit-modulus phase factor `exp(i * theta)` for a multiple of the outer-loop
/// phase. The flux ratio is reduced modulo 4 (the common period of every
/// phase used by the builders) before the multiplication.
fn loop_phase<T: Real>(flux_ratio: T, fraction: T, amplitude: T) -> C<T> {
    let four = T::lit(4.0);
    let reduced = flux_ratio - four * (flux_ratio / four).floor();
    C::from_polar(amplitude, T::TAU() * reduced * fraction)
}

fn build_pump<T: Real>(p: &PumpParams<T>, direct_du: bool) -> Result<NetworkModel<T>> {
    use Terminal::*;
    p.check()?;
    let rates = p.creation_rates()?;
    let n = 4;
    let mut t = CMatrix::zeros(n);
    // `hop(to, from, amp)` sets the coefficient of a†_to a_from.
    let mut hop = |to: Terminal, from: Terminal, amp: C<T>| {
        t[(from.index(), to.index())] = amp;
        t[(to.index(), from.index())] = amp.conj();
    };
    let quarter = loop_phase(p.flux.flux_ratio, T::lit(0.25), p.k);
    hop(L, D, quarter);
    hop(D, R, quarter);
    hop(R, U, quarter);
    hop(U, L, quarter);
    let mut junctions = vec![(L, D), (D, R), (R, U), (U, L)];
    if direct_du {
        hop(D, U, loop_phase(p.flux.flux_ratio, T::lit(0.5), p.k));
        junctions.push((D, U));
    }
    let mut cap = vec![vec![T::zero(); n]; n];
    for (a, b) in junctions {
        cap[a.index()][b.index()] = p.e_c;
        cap[b.index()][a.index()] = p.e_c;
    }
    NetworkModel {
        epsilon: vec![p.epsilon; n],
        tunneling: t,
        capacitance: cap,
        gamma_up: rates.to_vec(),
        gamma: p.gamma,
        mode_labels: Some(Terminal::ALL.iter().map(|t| t.label().to_string()).collect()),
    }
    .validated()
}

/// Four-terminal loop L–D–R–U with the extra direct D–U junction.
pub fn build_symmetric_pump<T: Real>(params: &PumpParams<T>) -> Result<NetworkModel<T>> {
    build_pump(params, true)
}

/// The same loop without the D–U junction.
pub fn build_asymmetric_pump<T: Real>(params: &PumpParams<T>) -> Result<NetworkModel<T>> {
    build_pump(params, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn idx(t: Terminal) -> usize {
        t.index()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn flux_phase_values() {
        assert_eq!(flux_phase(0.0).unwrap(), 0.0);
        assert!((flux_phase(1.0f64).unwrap() - 6.283185307).abs() < 1e-9);
        assert!((flux_phase(0.5f64).unwrap() - 3.141592653).abs() < 1e-9);
        assert!(flux_phase(f64::NAN).is_err());
        assert!(flux_phase(f64::INFINITY).is_err());
        assert_eq!(FluxSpec::new(0.3).delta_phi(), 2.0 * PI * 0.3);
    }

    #[test]
    fn symmetric_pump_at_reference_parameters() {
        let p = PumpParams::new(0.1, 0.0, 100.0, 0.0, 0.0);
        let m = build_symmetric_pump(&p).unwrap();
        assert_eq!(m.mode_labels.as_deref().unwrap(), ["L", "D", "R", "U"]);
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)];
        for (a, b) in pairs {
            assert_eq!(m.tunneling[(a, b)], c(0.1, 0.0));
            assert_eq!(m.tunneling[(b, a)], c(0.1, 0.0));
        }
        assert!(m.capacitance.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(m.gamma_up, vec![100.0; 4]);
        assert_eq!(m.epsilon, vec![0.0; 4]);
    }

    #[test]
    fn symmetric_pump_phases_at_one_flux_quantum() {
        use Terminal::*;
        let k = 0.1;
        let m = build_symmetric_pump(&PumpParams::new(k, 0.0, 100.0, 0.0, 1.0)).unwrap();
        // coefficient of a†_D a_U is stored at [U][D]
        assert!((m.tunneling[(idx(U), idx(D))] - c(-k, 0.0)).norm() < 1e-15);
        for (to, from) in [(L, D), (D, R), (R, U), (U, L)] {
            assert!((m.tunneling[(idx(from), idx(to))] - c(0.0, k)).norm() < 1e-15);
        }
    }

    #[test]
    fn charging_on_junction_pairs_only() {
        let p = PumpParams::new(0.1, 0.3, 100.0, 1.0, 0.2);
        let sym = build_symmetric_pump(&p).unwrap();
        let asym = build_asymmetric_pump(&p).unwrap();
        let nonzero = |m: &NetworkModel<f64>| {
            let mut v = Vec::new();
            for j in 0..4 {
                for k in j + 1..4 {
                    if m.capacitance[j][k] != 0.0 {
                        v.push((j, k));
                    }
                }
            }
            v
        };
        assert_eq!(nonzero(&sym), vec![(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(nonzero(&asym), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(asym.tunneling[(1, 3)], c(0.0, 0.0));
        assert_eq!(asym.tunneling[(3, 1)], c(0.0, 0.0));
    }

    #[test]
    fn asymmetric_pump_is_du_reflection_invariant_without_flux_or_bias() {
        let m = build_asymmetric_pump(&PumpParams::new(0.1, 0.1, 100.0, 0.0, 0.0)).unwrap();
        let perm = [0usize, 3, 2, 1];
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(m.tunneling[(perm[j], perm[k])], m.tunneling[(j, k)]);
                assert_eq!(m.capacitance[perm[j]][perm[k]], m.capacitance[j][k]);
            }
            assert_eq!(m.gamma_up[perm[j]], m.gamma_up[j]);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_tunneling() {
        let m = build_asymmetric_pump(&PumpParams::new(0.0, 0.1, 100.0, 1.0, 0.37)).unwrap();
        assert_eq!(m.tunneling.max_abs(), 0.0);
    }

    #[test]
    fn bias_splits() {
        let p = PumpParams::new(0.1, 0.0, 100.0, 2.0, 0.0);
        let left = p.creation_rates().unwrap();
        assert_eq!(left, [101.5, 99.5, 99.5, 99.5]);
        assert_eq!(left[0] - left[2], 2.0);
        let sym = p.with_split(BiasSplit::Symmetric).creation_rates().unwrap();
        assert_eq!(sym, [101.0, 100.0, 99.0, 100.0]);
    }

    #[test]
    fn negative_creation_rate_rejected() {
        let p = PumpParams::new(0.1, 0.0, 1.0, 5.0, 0.0);
        assert!(build_symmetric_pump(&p).is_err());
        let p = PumpParams::new(0.1, 0.0, 1.0, -1.0, 0.0).with_split(BiasSplit::Symmetric);
        assert!(build_asymmetric_pump(&p).is_ok());
        assert!(build_asymmetric_pump(&p.with_bias(-2.5)).is_err());
        assert!(build_symmetric_pump(&PumpParams::new(-0.1, 0.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn validate_reports_each_violation() {
        let mut m = NetworkModel::uncoupled(vec![1.0, 1.0], 1.0);
        assert!(m.validate().is_valid());
        m.tunneling[(0, 1)] = c(1.0, 0.0);
        m.tunneling[(1, 0)] = c(2.0, 0.0);
        let r = m.validate();
        assert_eq!(r.violations, vec![Violation::NonHermitianTunneling { row: 0, col: 1 }]);

        let mut m = NetworkModel::uncoupled(vec![1.0, 1.0], 1.0);
        m.capacitance[0][1] = -1.0;
        let r = m.validate();
        assert!(r.violations.contains(&Violation::NegativeCapacitance { row: 0, col: 1 }));
        assert!(r.violations.contains(&Violation::AsymmetricCapacitance { row: 0, col: 1 }));

        let mut m = NetworkModel::uncoupled(vec![-1.0, 1.0], 0.0);
        m.tunneling[(1, 1)] = c(0.5, 0.0);
        let r = m.validate();
        assert!(r.violations.contains(&Violation::NonPositiveGamma));
        assert!(r.violations.contains(&Violation::NegativeCreationRate { index: 0 }));
        assert!(r.violations.contains(&Violation::TunnelingDiagonal { index: 1 }));
        assert!(m.validated().is_err());
    }

    #[test]
    fn content_hash_distinguishes_models() {
        let a = build_symmetric_pump(&PumpParams::new(0.1, 0.1, 100.0, 1.0, 0.25)).unwrap();
        let b = build_symmetric_pump(&PumpParams::new(0.1, 0.1, 100.0, 1.0, 0.26)).unwrap();
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    fn params() -> impl Strategy<Value = PumpParams<f64>> {
        (0.0..1.0f64, 0.0..2.0f64, 10.0..200.0f64, -5.0..5.0f64, -3.0..3.0f64)
            .prop_map(|(k, ec, g, b, f)| PumpParams::new(k, ec, g, b, f))
    }

    proptest! {
        #[test]
        fn builders_produce_valid_hermitian_models(p in params(), split in prop_oneof![Just(BiasSplit::Left), Just(BiasSplit::Symmetric)]) {
            let p = p.with_split(split);
            for m in [build_symmetric_pump(&p).unwrap(), build_asymmetric_pump(&p).unwrap()] {
                prop_assert!(m.validate().is_valid());
                for j in 0..4 {
                    for k in 0..4 {
                        prop_assert_eq!(m.tunneling[(k, j)], m.tunneling[(j, k)].conj());
                        prop_assert_eq!(m.capacitance[k][j], m.capacitance[j][k]);
                    }
                }
            }
        }

        #[test]
        fn flux_period_four(p in params()) {
            let shifted = p.with_flux(p.flux.flux_ratio + 4.0);
            for (a, b) in [
                (build_symmetric_pump(&p).unwrap(), build_symmetric_pump(&shifted).unwrap()),
                (build_asymmetric_pump(&p).unwrap(), build_asymmetric_pump(&shifted).unwrap()),
            ] {
                prop_assert!(a.tunneling.max_abs_diff(&b.tunneling) < 1e-13);
                prop_assert_eq!(&a.capacitance, &b.capacitance);
                prop_assert_eq!(&a.gamma_up, &b.gamma_up);
            }
        }

        #[test]
        fn zero_flux_is_real(p in params()) {
            let p = p.with_flux(0.0);
            for m in [build_symmetric_pump(&p).unwrap(), build_asymmetric_pump(&p).unwrap()] {
                prop_assert!(m.tunneling.as_slice().iter().all(|z| z.im == 0.0));
            }
        }

        #[test]
        fn total_creation_rate_independent_of_bias(p in params(), split in prop_oneof![Just(BiasSplit::Left), Just(BiasSplit::Symmetric)]) {
            let p = p.with_split(split);
            let with_bias: f64 = p.creation_rates().unwrap().iter().sum();
            let without: f64 = p.with_bias(0.0).creation_rates().unwrap().iter().sum();
            prop_assert!((with_bias - without).abs() < 1e-12);
        }
    }
}
