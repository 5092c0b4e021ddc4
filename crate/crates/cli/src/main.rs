//! `jjpump` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (non-convergence or a failed verification check).

mod manifest;
mod verify;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jjpump::dynamics::{evolve, write_trajectory_csv, MdmState};
use jjpump::model::{parse_document, BiasSplit, Geometry, ModelDocument, NetworkModel, PumpParams};
use jjpump::observables::{current_report, CurrentReport};
use jjpump::steady::{solve, FixedPointConfig, Init, Method, SolveOptions};
use jjpump::sweep::{
    render_heatmap_svg, run_sweep, scan_capacitance, thread_count, write_csv, write_scan_csv, Axis,
    FluxGrid, HeatmapOptions, Quantity, SweepSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{citation, manifest_path, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "jjpump", version, about = "Mean-field simulator for Josephson-junction charge pumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one steady state and print it as JSON.
    Steady(SteadyArgs),
    /// Integrate the mean-field dynamics and write a trajectory CSV.
    Evolve(EvolveArgs),
    /// Solve a flux × bias grid and write a CSV (and optionally an SVG).
    Sweep(SweepArgs),
    /// Flux-maximized pumped current over lists of Ec and K.
    ScanEc(ScanArgs),
    /// Run the built-in consistency checks against the exact oracle.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GeometryArg {
    Symmetric,
    Asymmetric,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Symmetric => Geometry::Symmetric,
            GeometryArg::Asymmetric => Geometry::Asymmetric,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SplitArg {
    Left,
    Symmetric,
}

impl From<SplitArg> for BiasSplit {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Left => BiasSplit::Left,
            SplitArg::Symmetric => BiasSplit::Symmetric,
        }
    }
}

/// Network parameters shared by every subcommand that builds a pump.
#[derive(Args, Debug)]
struct ModelArgs {
    /// JSON model document (pump preset or explicit network).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config", conflicts_with = "config")]
    geometry: Option<GeometryArg>,
    /// Tunneling amplitude K.
    #[arg(long = "K", default_value_t = 0.1, conflicts_with = "config")]
    k: f64,
    /// Charging energy E_C.
    #[arg(long = "Ec", default_value_t = 0.0, conflicts_with = "config")]
    e_c: f64,
    /// Baseline creation rate γ↑.
    #[arg(long = "gamma-up", default_value_t = 100.0, conflicts_with = "config")]
    gamma_up: f64,
    /// Relaxation rate γ; every other rate and energy is in these units.
    #[arg(long, default_value_t = 1.0, conflicts_with = "config")]
    gamma: f64,
    #[arg(long = "bias-split", value_enum, default_value = "left", conflicts_with = "config")]
    bias_split: SplitArg,
}

/// A single operating point.
#[derive(Args, Debug)]
struct PointArgs {
    /// SQUID bias Γ.
    #[arg(long, default_value_t = 0.0, conflicts_with = "config")]
    bias: f64,
    /// Applied flux Φ/Φ0.
    #[arg(long, default_value_t = 0.0, conflicts_with = "config")]
    flux: f64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value = "fixed_point", value_parser = parse_method)]
    method: Method,
    /// Convergence tolerance of the steady-state solvers.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iter: usize,
    /// Under-relaxation weight of the fixed-point update.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Start the fixed point from a random state drawn with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report fixed-point non-convergence instead of retrying with ODE relaxation.
    #[arg(long = "no-fallback")]
    no_fallback: bool,
    /// Horizon of ODE relaxation in units of 1/γ.
    #[arg(long = "relax-horizon", default_value_t = 2000.0)]
    relax_horizon: f64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: jjpump::Error| e.to_string())
}

impl SolverArgs {
    fn options(&self) -> SolveOptions<f64> {
        let init = match self.seed {
            Some(s) => Init::Random(s),
            None => Init::Deterministic,
        };
        SolveOptions {
            method: self.method,
            fixed_point: FixedPointConfig {
                tol: self.tol,
                max_iter: self.max_iter,
                alpha: self.alpha,
                init,
            },
            relax_horizon: self.relax_horizon,
            fallback: !self.no_fallback,
        }
    }
}

#[derive(Args, Debug)]
struct SteadyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum InitArg {
    /// σ = 0.
    Vacuum,
    /// n_j = γ_j↑/γ, no coherences.
    Equilibrium,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Final time in units of 1/γ.
    #[arg(long = "t-end", default_value_t = 10.0)]
    t_end: f64,
    #[arg(long = "rel-tol", default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, value_enum, default_value = "vacuum")]
    init: InitArg,
    /// Trajectory CSV path.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long = "flux-min", default_value_t = -1.0, allow_negative_numbers = true)]
    flux_min: f64,
    #[arg(long = "flux-max", default_value_t = 1.0, allow_negative_numbers = true)]
    flux_max: f64,
    #[arg(long = "flux-count", default_value_t = 101)]
    flux_count: usize,
    #[arg(long = "bias-min", default_value_t = -5.0, allow_negative_numbers = true)]
    bias_min: f64,
    #[arg(long = "bias-max", default_value_t = 5.0, allow_negative_numbers = true)]
    bias_max: f64,
    #[arg(long = "bias-count", default_value_t = 101)]
    bias_count: usize,
    /// Worker threads; defaults to JJPUMP_THREADS, then the core count.
    #[arg(long)]
    threads: Option<usize>,
    /// Start each point from the solution at the previous bias of its row.
    #[arg(long = "warm-start")]
    warm_start: bool,
    /// Also render a heatmap next to the CSV.
    #[arg(long)]
    svg: bool,
    /// Quantity for the heatmap: I_pump, I_L..I_U or n_L..n_U.
    #[arg(long, default_value = "I_pump", value_parser = parse_quantity)]
    quantity: Quantity,
    /// Sweep CSV path.
    #[arg(long, short)]
    output: PathBuf,
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    s.parse().map_err(|e: jjpump::Error| e.to_string())
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, value_enum)]
    geometry: GeometryArg,
    /// Charging energies, comma separated.
    #[arg(long = "Ec", value_delimiter = ',', default_value = "0,0.01,0.03,0.1,0.3,1,3")]
    e_c: Vec<f64>,
    /// Tunneling amplitudes, comma separated.
    #[arg(long = "K", value_delimiter = ',', default_value = "0.1")]
    k: Vec<f64>,
    #[arg(long = "gamma-up", default_value_t = 100.0)]
    gamma_up: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    bias: f64,
    #[arg(long = "bias-split", value_enum, default_value = "left")]
    bias_split: SplitArg,
    #[arg(long = "flux-start", default_value_t = 0.0, allow_negative_numbers = true)]
    flux_start: f64,
    #[arg(long = "flux-step", default_value_t = 0.01)]
    flux_step: f64,
    #[arg(long = "flux-count", default_value_t = 100)]
    flux_count: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    threads: Option<usize>,
    /// Scan CSV path.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Fock cutoff of the exact oracle (levels 0..=cutoff per mode).
    #[arg(long, default_value_t = 28)]
    cutoff: usize,
    /// Tunneling amplitude of the two-mode oracle network.
    #[arg(long = "K", default_value_t = 0.5)]
    k: f64,
    #[arg(long = "t-end", default_value_t = 10.0)]
    t_end: f64,
    /// Also report the exact-versus-mean-field deviation at this charging
    /// energy; never fails the run.
    #[arg(long = "Ec")]
    e_c: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn numerical(e: &jjpump::Error) -> bool {
    use jjpump::Error as E;
    matches!(
        e,
        E::SingularDenominator { .. }
            | E::SingularSystem { .. }
            | E::StepSizeUnderflow { .. }
            | E::TooManySteps { .. }
            | E::NonFiniteState { .. }
    )
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<jjpump::Error>() {
            Some(e) if numerical(e) => 2,
            _ => 1,
        };
        Self { code, error }
    }
}

impl From<jjpump::Error> for Failure {
    fn from(e: jjpump::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = std::result::Result<ExitCode, Failure>;

struct LoadedModel {
    model: NetworkModel<f64>,
    description: serde_json::Value,
    input: Option<(PathBuf, Vec<u8>)>,
    preset: Option<(Geometry, PumpParams<f64>)>,
}

fn load(model: &ModelArgs, point: Option<&PointArgs>) -> Result<LoadedModel> {
    if let Some(path) = &model.config {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let text = String::from_utf8(bytes.clone())
            .with_context(|| format!("{} is not UTF-8", path.display()))?;
        let doc = parse_document(&text).with_context(|| format!("in {}", path.display()))?;
        let (description, preset) = match &doc {
            ModelDocument::Preset { geometry, params } => (
                json!({"geometry": geometry, "params": params}),
                Some((*geometry, *params)),
            ),
            ModelDocument::Custom(_) => (json!({"geometry": "custom"}), None),
        };
        let built = doc.build::<f64>()?;
        let description = json!({"config": path.display().to_string(), "model": description});
        return Ok(LoadedModel {
            model: built,
            description,
            input: Some((path.clone(), bytes)),
            preset,
        });
    }
    let geometry: Geometry = model
        .geometry
        .ok_or_else(|| anyhow!("one of --geometry or --config is required"))?
        .into();
    let (bias, flux) = point.map_or((0.0, 0.0), |p| (p.bias, p.flux));
    let mut params = PumpParams::new(model.k, model.e_c, model.gamma_up, bias, flux)
        .with_split(model.bias_split.into());
    params.gamma = model.gamma;
    let built = geometry.build(&params)?;
    Ok(LoadedModel {
        model: built,
        description: json!({"geometry": geometry, "params": params}),
        input: None,
        preset: Some((geometry, params)),
    })
}

fn start_manifest(subcommand: &str, loaded: &LoadedModel, extra: serde_json::Value) -> RunManifest {
    let mut m = RunManifest::start(
        subcommand,
        json!({"model": loaded.description, "model_sha256": loaded.model.content_hash(), "run": extra}),
    );
    if let Some((path, bytes)) = &loaded.input {
        m.add_input(path, bytes);
    }
    m
}

#[derive(Serialize)]
struct Coherence {
    j: usize,
    k: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct SteadyOutput<'a> {
    converged: bool,
    method: Method,
    iterations: usize,
    residual: f64,
    seed: Option<u64>,
    model_time: Option<f64>,
    mode_labels: Option<&'a [String]>,
    populations: Vec<f64>,
    coherences: Vec<Coherence>,
    min_eigenvalue: f64,
    currents: CurrentReport<f64>,
    manifest: &'a RunManifest,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_steady(args: &SteadyArgs) -> Outcome {
    let loaded = load(&args.model, Some(&args.point))?;
    let opts = args.solver.options();
    let mut manifest = start_manifest("steady", &loaded, json!({"solver": opts}));
    manifest.seed = args.solver.seed;
    let result = solve(&loaded.model, &opts)?;
    let currents = current_report(&loaded.model, &result.state)?;
    let n = loaded.model.n_modes();
    let coherences = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .map(|(j, k)| {
            let z = result.state.coherence(j, k);
            Coherence { j, k, re: z.re, im: z.im }
        })
        .collect();
    manifest.finish(if result.converged { "converged" } else { "not_converged" });
    print_json(&SteadyOutput {
        converged: result.converged,
        method: result.method,
        iterations: result.iterations,
        residual: result.residual,
        seed: result.seed,
        model_time: result.model_time,
        mode_labels: loaded.model.mode_labels.as_deref(),
        populations: result.state.populations(),
        coherences,
        min_eigenvalue: result.state.min_eigenvalue(),
        currents,
        manifest: &manifest,
    })?;
    if !result.converged {
        eprintln!("jjpump: steady state did not converge (residual {:e})", result.residual);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evolve(args: &EvolveArgs) -> Outcome {
    let loaded = load(&args.model, Some(&args.point))?;
    let initial = match args.init {
        InitArg::Vacuum => MdmState::zeros(loaded.model.n_modes()),
        InitArg::Equilibrium => MdmState::equilibrium(&loaded.model),
    };
    let mpath = manifest_path(&args.output);
    let mut manifest = start_manifest(
        "evolve",
        &loaded,
        json!({"t_end": args.t_end, "rel_tol": args.rel_tol, "init": args.init}),
    );
    let samples = evolve(&loaded.model, &initial, args.t_end, args.rel_tol)?;
    let header = vec![
        format!("jjpump {}", env!("CARGO_PKG_VERSION")),
        format!("model_sha256: {}", loaded.model.content_hash()),
        format!("t_end: {}; rel_tol: {}; init: {:?}", args.t_end, args.rel_tol, args.init),
        citation(&mpath),
    ];
    write_trajectory_csv(&samples, &header, &args.output)?;
    manifest.add_output(&args.output);
    manifest.finish("ok");
    manifest.write(&mpath)?;
    let last = samples.last().expect("initial sample");
    print_json(&json!({
        "output": args.output.display().to_string(),
        "manifest": mpath.display().to_string(),
        "samples": samples.len(),
        "final_time": last.time,
        "final_populations": last.state.populations(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn require_preset(loaded: &LoadedModel) -> Result<(Geometry, PumpParams<f64>)> {
    loaded
        .preset
        .ok_or_else(|| anyhow!("this command needs a pump preset, not a custom network"))
}

fn cmd_sweep(args: &SweepArgs) -> Outcome {
    let loaded = load(&args.model, None)?;
    let (geometry, base) = require_preset(&loaded)?;
    let spec = SweepSpec {
        flux: Axis::new(args.flux_min, args.flux_max, args.flux_count),
        bias: Axis::new(args.bias_min, args.bias_max, args.bias_count),
        solver: args.solver.options(),
        warm_start: args.warm_start,
        seed: args.solver.seed.unwrap_or(0),
        ..SweepSpec::new(geometry, base.with_flux(0.0).with_bias(0.0))
    };
    spec.check()?;
    let threads = thread_count(args.threads)?;
    let mpath = manifest_path(&args.output);
    let mut manifest = start_manifest("sweep", &loaded, json!({"spec": spec, "spec_sha256": spec.hash()}));
    manifest.seed = args.solver.seed;
    manifest.threads = Some(threads);
    let result = run_sweep(&spec, Some(threads))?;
    write_csv(&result, &args.output, &[citation(&mpath)])?;
    manifest.add_output(&args.output);
    if args.svg {
        let svg = args.output.with_extension("svg");
        let opts = HeatmapOptions {
            quantity: args.quantity,
            ..HeatmapOptions::default()
        };
        render_heatmap_svg(&result, &opts, &svg)?;
        manifest.add_output(&svg);
    }
    let failed = result.non_converged();
    manifest.finish(if failed == 0 { "ok" } else { "not_converged" });
    manifest.write(&mpath)?;
    print_json(&json!({
        "output": args.output.display().to_string(),
        "manifest": mpath.display().to_string(),
        "points": result.records.len(),
        "non_converged": failed,
    }))?;
    if failed > 0 {
        eprintln!("jjpump: {failed} grid points did not converge");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(args: &ScanArgs) -> Outcome {
    let geometry: Geometry = args.geometry.into();
    let mut base = PumpParams::new(args.k[0], args.e_c[0], args.gamma_up, args.bias, 0.0)
        .with_split(args.bias_split.into());
    base.gamma = args.gamma;
    let grid = FluxGrid {
        start: args.flux_start,
        step: args.flux_step,
        count: args.flux_count,
    };
    let opts = args.solver.options();
    let threads = thread_count(args.threads)?;
    let mpath = manifest_path(&args.output);
    let mut manifest = RunManifest::start(
        "scan-ec",
        json!({"geometry": geometry, "base": base, "Ec": args.e_c, "K": args.k, "flux": grid, "solver": opts}),
    );
    manifest.seed = args.solver.seed;
    manifest.threads = Some(threads);
    let scan = scan_capacitance(geometry, &base, &args.e_c, &args.k, &grid, &opts, Some(threads))?;
    write_scan_csv(&scan, &args.output, &[citation(&mpath)])?;
    manifest.add_output(&args.output);
    let failed = scan.entries.iter().filter(|e| !e.all_converged).count();
    manifest.finish(if failed == 0 { "ok" } else { "not_converged" });
    manifest.write(&mpath)?;
    print_json(&json!({
        "output": args.output.display().to_string(),
        "manifest": mpath.display().to_string(),
        "entries": scan.entries,
    }))?;
    if failed > 0 {
        eprintln!("jjpump: {failed} scan entries contain non-converged points");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let opts = verify::VerifyOptions {
        cutoff: args.cutoff,
        k: args.k,
        t_end: args.t_end,
        e_c: args.e_c,
        threads: args.threads,
    };
    let mut manifest = RunManifest::start("verify", json!(opts));
    let report = verify::run(&opts)?;
    manifest.finish(if report.all_passed { "passed" } else { "failed" });
    print_json(&json!({"report": report, "manifest": manifest}))?;
    for c in &report.checks {
        eprintln!(
            "{} {} value={:e} tol={:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    for (name, value) in &report.diagnostics {
        eprintln!("INFO {name} value={value:e}");
    }
    if let Some(d) = &report.deviation {
        eprintln!(
            "INFO deviation at Ec={} max={:e} final={:e}",
            args.e_c.unwrap_or_default(),
            d.max_dev,
            d.final_dev
        );
    }
    if !report.all_passed {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn check_output(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        bail!("output path is empty");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Steady(a) => cmd_steady(a),
        Command::Evolve(a) => {
            check_output(&a.output)?;
            cmd_evolve(a)
        }
        Command::Sweep(a) => {
            check_output(&a.output)?;
            cmd_sweep(a)
        }
        Command::ScanEc(a) => {
            check_output(&a.output)?;
            cmd_scan(a)
        }
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("jjpump: error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
