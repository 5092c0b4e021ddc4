//! Flux × bias grids, capacitance scans, and their CSV/SVG serialization.
//!
//! Grid points are solved independently on a rayon pool and written back by
//! index, so results do not depend on the number of threads.

mod csv;
mod svg;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::MdmState;
use crate::error::{Error, Result};
use crate::model::{Geometry, PumpParams, Terminal};
use crate::observables::current_report;
use crate::steady::{solve_from, Method, SolveOptions};

pub use self::csv::{
    read_csv, scan_csv, sweep_csv, write_csv, write_scan_csv, CsvTable, COLUMNS, SCAN_COLUMNS,
};
pub use self::svg::{heatmap_svg, render_heatmap_svg, rgb_for, HeatmapOptions, Quantity};

/// Environment variable consulted for the pool width when none is given.
pub const THREADS_ENV: &str = "JJPUMP_THREADS";

/// `count` points from `min` to `max` inclusive; `count = 1` gives `[min]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    /// Mirror-exact for `min = −max`: `values()[i] == −values()[count−1−i]`.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| (self.min * (last - i as f64) + self.max * i as f64) / last)
            .collect()
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter(format!("{name} axis needs count >= 1")));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::InvalidParameter(format!(
                "{name} axis needs finite min <= max"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub geometry: Geometry,
    /// Base parameters; the flux and bias of each grid point override them.
    pub base: PumpParams<f64>,
    pub flux: Axis,
    pub bias: Axis,
    pub solver: SolveOptions<f64>,
    /// Solve each flux row in order of increasing bias, starting every point
    /// from the previous solution.
    pub warm_start: bool,
    pub seed: u64,
}

impl SweepSpec {
    /// Defaults: Φ/Φ0 ∈ [−1, 1] × Γ/γ ∈ [−5, 5] on a 101 × 101 grid, cold
    /// deterministic starts.
    pub fn new(geometry: Geometry, base: PumpParams<f64>) -> Self {
        Self {
            geometry,
            base,
            flux: Axis::new(-1.0, 1.0, 101),
            bias: Axis::new(-5.0, 5.0, 101),
            solver: SolveOptions::default(),
            warm_start: false,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.geometry == Geometry::Custom {
            return Err(Error::InvalidParameter("sweeps need a pump geometry".into()));
        }
        self.flux.check("flux")?;
        self.bias.check("bias")?;
        self.base.check()?;
        self.solver.fixed_point.check()?;
        if self.solver.method == Method::LinearEc0 && self.base.e_c != 0.0 {
            return Err(Error::InvalidParameter(
                "linear_ec0 requires Ec = 0".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the spec.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub flux_ratio: f64,
    pub bias: f64,
    pub i_pump: f64,
    /// Terminal currents in L, D, R, U order.
    pub currents: [f64; 4],
    pub populations: [f64; 4],
    pub converged: bool,
    pub iterations: usize,
    pub method: Method,
    /// Why the point could not be solved, if it could not.
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(flux_ratio: f64, bias: f64, method: Method, error: String) -> Self {
        Self {
            flux_ratio,
            bias,
            i_pump: f64::NAN,
            currents: [f64::NAN; 4],
            populations: [f64::NAN; 4],
            converged: false,
            iterations: 0,
            method,
            error: Some(error),
        }
    }

    pub fn conservation_defect(&self) -> f64 {
        self.currents.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub spec_hash: String,
    /// Content hash of the network at the base parameters.
    pub model_hash: String,
    pub seed: u64,
    pub solver: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Flux-major: record `i * bias.count + j` has flux `i`, bias `j`.
    pub records: Vec<SweepRecord>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn flux_count(&self) -> usize {
        self.spec.flux.count
    }

    pub fn bias_count(&self) -> usize {
        self.spec.bias.count
    }

    pub fn record(&self, flux_index: usize, bias_index: usize) -> &SweepRecord {
        &self.records[flux_index * self.bias_count() + bias_index]
    }

    pub fn non_converged(&self) -> usize {
        self.records.iter().filter(|r| !r.converged).count()
    }
}

pub fn solver_summary(opts: &SolveOptions<f64>) -> String {
    let fp = &opts.fixed_point;
    format!(
        "{} (tol={:e}, max_iter={}, alpha={}, fallback={}, relax_horizon={})",
        opts.method, fp.tol, fp.max_iter, fp.alpha, opts.fallback, opts.relax_horizon
    )
}

/// Pool width: `threads`, else `JJPUMP_THREADS`, else rayon's default.
pub fn thread_count(threads: Option<usize>) -> Result<usize> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParameter("thread count must be >= 1".into()));
        }
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(threads)?)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn solve_point(
    spec: &SweepSpec,
    flux: f64,
    bias: f64,
    initial: Option<&MdmState<f64>>,
) -> (SweepRecord, Option<MdmState<f64>>) {
    let params = spec.base.with_flux(flux).with_bias(bias);
    let method = spec.solver.method;
    let model = match spec.geometry.build(&params) {
        Ok(m) => m,
        Err(e) => return (SweepRecord::failed(flux, bias, method, e.to_string()), None),
    };
    let result = match solve_from(&model, &spec.solver, initial) {
        Ok(r) => r,
        Err(e) => return (SweepRecord::failed(flux, bias, method, e.to_string()), None),
    };
    let report = match current_report(&model, &result.state) {
        Ok(r) => r,
        Err(e) => return (SweepRecord::failed(flux, bias, method, e.to_string()), None),
    };
    let n = result.state.populations();
    let mut currents = [0.0; 4];
    let mut populations = [0.0; 4];
    for t in Terminal::ALL {
        currents[t.index()] = report.per_terminal[t.index()];
        populations[t.index()] = n[t.index()];
    }
    let record = SweepRecord {
        flux_ratio: flux,
        bias,
        i_pump: report.pump.unwrap_or(f64::NAN),
        currents,
        populations,
        converged: result.converged,
        iterations: result.iterations,
        method: result.method,
        error: None,
    };
    let next = result.converged.then_some(result.state);
    (record, next)
}

fn solve_row(spec: &SweepSpec, flux: f64, biases: &[f64]) -> Vec<SweepRecord> {
    let mut previous: Option<MdmState<f64>> = None;
    biases
        .iter()
        .map(|&bias| {
            let initial = if spec.warm_start { previous.as_ref() } else { None };
            let (record, state) = solve_point(spec, flux, bias, initial);
            if spec.warm_start {
                previous = state;
            }
            record
        })
        .collect()
}

/// Solves the steady state at every grid point. Points that fail are kept,
/// flagged non-converged with NaN observables.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    spec.check()?;
    let fluxes = spec.flux.values();
    let biases = spec.bias.values();
    let rows: Vec<Vec<SweepRecord>> = pool(threads)?.install(|| {
        if spec.warm_start {
            fluxes
                .par_iter()
                .map(|&f| solve_row(spec, f, &biases))
                .collect()
        } else {
            fluxes
                .par_iter()
                .map(|&f| {
                    biases
                        .par_iter()
                        .map(|&b| solve_point(spec, f, b, None).0)
                        .collect()
                })
                .collect()
        }
    });
    let model_hash = spec.geometry.build(&spec.base)?.content_hash();
    Ok(SweepResult {
        spec: spec.clone(),
        records: rows.into_iter().flatten().collect(),
        provenance: Provenance {
            spec_hash: spec.hash(),
            model_hash,
            seed: spec.seed,
            solver: solver_summary(&spec.solver),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Largest violations of the reversal symmetries across a grid that is
/// symmetric about zero on an axis. `None` where the axis is not symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSymmetry {
    /// `max |I(Φ, Γ) + I(−Φ, Γ)|`.
    pub flux_odd: Option<f64>,
    /// `max |I(Φ, Γ) + I(Φ, −Γ)|`.
    pub bias_odd: Option<f64>,
    /// `max |I(Φ, Γ) − I(Φ, −Γ)|`.
    pub bias_even: Option<f64>,
    /// Mirror pairs skipped because a partner did not converge.
    pub skipped: usize,
}

impl GridSymmetry {
    /// Checks the properties expected for `geometry`: flux-odd for both,
    /// bias-odd for the symmetric and bias-even for the asymmetric pump.
    pub fn holds(&self, geometry: Geometry, tol: f64) -> bool {
        let bias = match geometry {
            Geometry::Symmetric => self.bias_odd,
            _ => self.bias_even,
        };
        self.flux_odd.is_some_and(|d| d <= tol) && bias.is_some_and(|d| d <= tol)
    }
}

fn mirrored(values: &[f64]) -> bool {
    let n = values.len();
    (0..n).all(|i| (values[i] + values[n - 1 - i]).abs() <= 1e-12 * (1.0 + values[i].abs()))
}

pub fn grid_symmetry(result: &SweepResult) -> GridSymmetry {
    let nf = result.flux_count();
    let nb = result.bias_count();
    let flux_ok = mirrored(&result.spec.flux.values());
    let bias_ok = mirrored(&result.spec.bias.values());
    let mut skipped = 0;
    let mut flux_odd: f64 = 0.0;
    let mut bias_odd: f64 = 0.0;
    let mut bias_even: f64 = 0.0;
    for i in 0..nf {
        for j in 0..nb {
            let here = result.record(i, j);
            if flux_ok {
                let there = result.record(nf - 1 - i, j);
                if here.converged && there.converged {
                    flux_odd = flux_odd.max((here.i_pump + there.i_pump).abs());
                } else {
                    skipped += 1;
                }
            }
            if bias_ok {
                let there = result.record(i, nb - 1 - j);
                if here.converged && there.converged {
                    bias_odd = bias_odd.max((here.i_pump + there.i_pump).abs());
                    bias_even = bias_even.max((here.i_pump - there.i_pump).abs());
                } else {
                    skipped += 1;
                }
            }
        }
    }
    GridSymmetry {
        flux_odd: flux_ok.then_some(flux_odd),
        bias_odd: bias_ok.then_some(bias_odd),
        bias_even: bias_ok.then_some(bias_even),
        skipped,
    }
}

/// Flux values `start + i·step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Default for FluxGrid {
    /// Φ/Φ0 ∈ [0, 1) in steps of 0.01.
    fn default() -> Self {
        Self {
            start: 0.0,
            step: 0.01,
            count: 100,
        }
    }
}

impl FluxGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.start + self.step * i as f64).collect()
    }

    /// The grid must span at least one flux quantum.
    pub fn check(&self) -> Result<()> {
        if self.count == 0 || !(self.step > 0.0) || !self.start.is_finite() {
            return Err(Error::InvalidParameter("flux grid needs count >= 1 and step > 0".into()));
        }
        if self.step * (self.count as f64) < 1.0 - 1e-9 {
            return Err(Error::InvalidParameter(
                "flux grid must cover at least one period".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub e_c: f64,
    pub k: f64,
    /// `max_Φ |I_pump|`.
    pub max_abs_pump: f64,
    /// Flux of the maximum and the signed current there.
    pub argmax_flux: f64,
    pub pump_at_max: f64,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitanceScan {
    pub geometry: Geometry,
    pub bias: f64,
    pub flux: FluxGrid,
    /// `E_C`-major: entry `i * k_list.len() + j` has `E_C` `i`, `K` `j`.
    pub entries: Vec<ScanEntry>,
}

/// For each `(E_C, K)`, the flux-maximized `|I_pump|` at the bias of `base`.
pub fn scan_capacitance(
    geometry: Geometry,
    base: &PumpParams<f64>,
    ec_list: &[f64],
    k_list: &[f64],
    flux: &FluxGrid,
    solver: &SolveOptions<f64>,
    threads: Option<usize>,
) -> Result<CapacitanceScan> {
    flux.check()?;
    if geometry == Geometry::Custom {
        return Err(Error::InvalidParameter("scans need a pump geometry".into()));
    }
    if ec_list.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidParameter("Ec and K lists must be non-empty".into()));
    }
    base.check()?;
    let fluxes = flux.values();
    let pairs: Vec<(f64, f64)> = ec_list
        .iter()
        .flat_map(|&e| k_list.iter().map(move |&k| (e, k)))
        .collect();
    for &(e, k) in &pairs {
        base.with_charging(e).check()?;
        if !(k >= 0.0) {
            return Err(Error::InvalidParameter(format!("K must be >= 0, got {k}")));
        }
    }
    let entries = pool(threads)?.install(|| {
        pairs
            .par_iter()
            .map(|&(e_c, k)| {
                let mut params = base.with_charging(e_c);
                params.k = k;
                let spec = SweepSpec {
                    solver: *solver,
                    ..SweepSpec::new(geometry, params)
                };
                let points: Vec<SweepRecord> = fluxes
                    .par_iter()
                    .map(|&f| solve_point(&spec, f, params.bias, None).0)
                    .collect();
                let mut best = ScanEntry {
                    e_c,
                    k,
                    max_abs_pump: 0.0,
                    argmax_flux: fluxes[0],
                    pump_at_max: points[0].i_pump,
                    all_converged: points.iter().all(|p| p.converged),
                };
                for p in &points {
                    if p.i_pump.abs() > best.max_abs_pump {
                        best.max_abs_pump = p.i_pump.abs();
                        best.argmax_flux = p.flux_ratio;
                        best.pump_at_max = p.i_pump;
                    }
                }
                best
            })
            .collect()
    });
    Ok(CapacitanceScan {
        geometry,
        bias: base.bias,
        flux: *flux,
        entries,
    })
}
