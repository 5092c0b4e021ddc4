//! Acceptance criteria 1–9. Each criterion prints one `PASS`/`FAIL` line;
//! the test fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use jjpump::dynamics::{relax_to_steady, MdmState};
use jjpump::model::{Geometry, NetworkModel, PumpParams};
use jjpump::observables::current_report;
use jjpump::oracle::compare_meanfield;
use jjpump::steady::{
    fixed_point_iterate, multi_start, solve, solve_linear_ec0, FixedPointConfig, Method, SolveOptions,
    SteadyStateResult,
};
use jjpump::sweep::{grid_symmetry, run_sweep, scan_capacitance, Axis, FluxGrid, SweepResult, SweepSpec};
use jjpump::C;

struct Outcome {
    id: u32,
    pass: bool,
    summary: String,
}

struct Suite {
    outcomes: Vec<Outcome>,
    /// `|Σ_j I_j|` of every converged steady state computed by the suite.
    conservation: Vec<f64>,
}

impl Suite {
    fn report(&mut self, id: u32, pass: bool, summary: String) {
        println!("{} criterion {id}: {summary}", if pass { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome { id, pass, summary });
    }

    fn record_state(&mut self, model: &NetworkModel<f64>, r: &SteadyStateResult<f64>) {
        if r.converged {
            let rep = current_report(model, &r.state).unwrap();
            self.conservation.push(rep.conservation_defect.abs());
        }
    }

    fn record_sweep(&mut self, res: &SweepResult) {
        for r in res.records.iter().filter(|r| r.converged) {
            self.conservation.push(r.conservation_defect().abs());
        }
    }
}

fn two_mode(k: f64, e_c: f64, gamma_up: [f64; 2]) -> NetworkModel<f64> {
    let mut m = NetworkModel::uncoupled(gamma_up.to_vec(), 1.0);
    m.tunneling[(0, 1)] = C::new(k, 0.0);
    m.tunneling[(1, 0)] = C::new(k, 0.0);
    m.capacitance[0][1] = e_c;
    m.capacitance[1][0] = e_c;
    m
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn criterion_1(s: &mut Suite) {
    let start = Instant::now();
    let model = two_mode(0.5, 0.0, [1.0, 0.25]);
    let rep = compare_meanfield(&model, 10.0, 12, 1e-10).unwrap();
    let elapsed = start.elapsed();
    let pass = rep.max_dev < 1e-6 && elapsed < Duration::from_secs(30);
    s.report(
        1,
        pass,
        format!(
            "oracle cutoff 12: max |σ_exact − σ_mf| = {:.3e} (< 1e-6), truncation leak {:.3e}, {:.2} s (< 30 s)",
            rep.max_dev,
            rep.truncation_leak,
            secs(elapsed)
        ),
    );
    let deep = compare_meanfield(&model, 10.0, 28, 1e-10).unwrap();
    println!(
        "  info: same comparison at cutoff 28: max |σ_exact − σ_mf| = {:.3e}",
        deep.max_dev
    );
}

fn criterion_2(s: &mut Suite) {
    let start = Instant::now();
    let cases = [(0.5, [2.0, 1.0]), (0.3, [3.0, 0.5]), (0.6, [0.4, 1.7])];
    let mut worst: f64 = 0.0;
    for (k, gu) in cases {
        let m = two_mode(k, 0.0, gu);
        let dn = ((gu[0] - gu[1]) / 1.0) / (1.0 + 4.0 * k * k);
        let total = gu[0] + gu[1];
        let expected = [(total + dn) / 2.0, (total - dn) / 2.0];
        let results = [
            fixed_point_iterate(&m, &FixedPointConfig::default()).unwrap(),
            solve_linear_ec0(&m).unwrap(),
            relax_to_steady(&m, &MdmState::equilibrium(&m), 1e-10, 2000.0).unwrap(),
        ];
        for r in &results {
            let n = r.state.populations();
            let err = (n[0] - expected[0]).abs().max((n[1] - expected[1]).abs());
            worst = worst.max(if r.converged { err } else { f64::INFINITY });
            s.record_state(&m, r);
        }
    }
    let elapsed = start.elapsed();
    s.report(
        2,
        worst < 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "two-mode closed form, three solvers: max error {worst:.3e} (< 1e-8), {:.3} s (< 1 s)",
            secs(elapsed)
        ),
    );
}

fn criterion_3(s: &mut Suite) {
    let start = Instant::now();
    let fp_opts = SolveOptions {
        fallback: false,
        ..SolveOptions::default()
    };
    let relax_opts = SolveOptions {
        method: Method::OdeRelax,
        ..SolveOptions::default()
    };
    let mut cross: f64 = 0.0;
    let mut spread: f64 = 0.0;
    let mut failures = 0;
    for geometry in [Geometry::Symmetric, Geometry::Asymmetric] {
        for phi in [-0.4, -0.25, -0.1, 0.1, 0.25, 0.4] {
            let m = geometry
                .build(&PumpParams::new(0.1, 0.1, 100.0, 1.0, phi))
                .unwrap();
            let fp = solve(&m, &fp_opts).unwrap();
            let relax = solve(&m, &relax_opts).unwrap();
            failures += usize::from(!fp.converged) + usize::from(!relax.converged);
            cross = cross.max(fp.state.max_abs_diff(&relax.state));
            s.record_state(&m, &fp);
            s.record_state(&m, &relax);
            let uniq = multi_start(&m, 20, 1000, &FixedPointConfig::default()).unwrap();
            failures += uniq.non_converged;
            spread = spread.max(uniq.max_matrix_distance);
            for r in &uniq.runs {
                s.record_state(&m, r);
            }
        }
    }
    let elapsed = start.elapsed();
    s.report(
        3,
        failures == 0 && cross < 1e-6 && spread < 1e-7 && elapsed < Duration::from_secs(60),
        format!(
            "fixed point vs relaxation {cross:.3e} (< 1e-6), 20-seed spread {spread:.3e} (< 1e-7), {failures} non-converged, {:.2} s (< 60 s)",
            secs(elapsed)
        ),
    );
}

fn symmetric_grid(geometry: Geometry, e_c: f64) -> SweepSpec {
    SweepSpec {
        flux: Axis::new(-0.5, 0.5, 11),
        bias: Axis::new(-3.0, 3.0, 11),
        ..SweepSpec::new(geometry, PumpParams::new(0.1, e_c, 100.0, 0.0, 0.0))
    }
}

fn criterion_5_and_6(s: &mut Suite) {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let mut null_max = f64::NAN;
    for e_c in [0.0, 0.1] {
        for geometry in [Geometry::Symmetric, Geometry::Asymmetric] {
            let res = run_sweep(&symmetric_grid(geometry, e_c), None).unwrap();
            s.record_sweep(&res);
            let g = grid_symmetry(&res);
            let flux = g.flux_odd.unwrap();
            let bias = match geometry {
                Geometry::Symmetric => g.bias_odd.unwrap(),
                _ => g.bias_even.unwrap(),
            };
            let ok = res.non_converged() == 0 && flux < 1e-6 && bias < 1e-6;
            pass &= ok;
            details.push(format!(
                "{} Ec={e_c}: flux-odd {flux:.2e}, bias-{} {bias:.2e}{}",
                geometry.as_str(),
                if geometry == Geometry::Symmetric { "odd" } else { "even" },
                if ok { "" } else { " [violated]" }
            ));
            if geometry == Geometry::Asymmetric && e_c == 0.0 {
                null_max = res
                    .records
                    .iter()
                    .map(|r| if r.converged { r.i_pump.abs() } else { f64::INFINITY })
                    .fold(0.0, f64::max);
            }
        }
    }
    let elapsed = start.elapsed();
    for d in &details {
        println!("  {d}");
    }
    s.report(
        5,
        pass && elapsed < Duration::from_secs(300),
        format!(
            "11x11 symmetry battery (tol 1e-6) at Ec in {{0, 0.1}}, {:.2} s (< 300 s)",
            secs(elapsed)
        ),
    );
    s.report(
        6,
        null_max < 1e-8,
        format!("asymmetric Ec=0 grid: max |I_pump| = {null_max:.3e} (< 1e-8)"),
    );
}

fn bias_line(s: &mut Suite, e_c: f64) -> Vec<f64> {
    let spec = SweepSpec {
        flux: Axis::single(0.25),
        bias: Axis::new(0.0, 5.0, 21),
        ..SweepSpec::new(Geometry::Symmetric, PumpParams::new(0.1, e_c, 100.0, 0.0, 0.0))
    };
    let res = run_sweep(&spec, None).unwrap();
    s.record_sweep(&res);
    res.records
        .iter()
        .map(|r| if r.converged { r.i_pump.abs() } else { f64::NAN })
        .collect()
}

fn criterion_7(s: &mut Suite) {
    let free = bias_line(s, 0.0);
    let worst_step = free
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let monotone = worst_step >= -1e-9;
    let charged = bias_line(s, 0.1);
    let (imax, vmax) = charged
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let last = *charged.last().unwrap();
    let interior = imax > 0 && imax + 1 < charged.len();
    let decayed = last < 0.5 * vmax;
    s.report(
        7,
        monotone && interior && decayed,
        format!(
            "Ec=0 smallest step {worst_step:.3e} (>= -1e-9); Ec=0.1 max {vmax:.3e} at Γ={:.2}, final {last:.3e} (< 50% of max)",
            5.0 * imax as f64 / 20.0
        ),
    );
}

fn criterion_8(s: &mut Suite) {
    let start = Instant::now();
    let ecs = [0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0];
    let base = PumpParams::new(0.1, 0.0, 100.0, 1.0, 0.0);
    let opts = SolveOptions::default();
    let grid = FluxGrid::default();
    let sym = scan_capacitance(Geometry::Symmetric, &base, &ecs, &[0.1], &grid, &opts, None).unwrap();
    let asym = scan_capacitance(Geometry::Asymmetric, &base, &ecs, &[0.1], &grid, &opts, None).unwrap();
    for geometry in [Geometry::Symmetric, Geometry::Asymmetric] {
        for &e_c in &ecs {
            let spec = SweepSpec {
                flux: Axis::new(0.0, 0.99, 100),
                bias: Axis::single(1.0),
                ..SweepSpec::new(geometry, base.with_charging(e_c))
            };
            s.record_sweep(&run_sweep(&spec, None).unwrap());
        }
    }
    let elapsed = start.elapsed();
    let sm: Vec<f64> = sym.entries.iter().map(|e| e.max_abs_pump).collect();
    let am: Vec<f64> = asym.entries.iter().map(|e| e.max_abs_pump).collect();
    let converged = sym.entries.iter().chain(&asym.entries).all(|e| e.all_converged);
    let bumps: Vec<String> = sm
        .windows(2)
        .zip(ecs.windows(2))
        .filter(|(w, _)| w[1] > w[0])
        .map(|(w, e)| format!("{:.4e} at Ec={} > {:.4e} at Ec={}", w[1], e[1], w[0], e[0]))
        .collect();
    let sym_monotone = bumps.is_empty();
    let n = am.len();
    let peak = am.iter().copied().fold(0.0, f64::max);
    let asym_null = am[0] < 1e-8;
    let asym_interior = am[1..n - 1].iter().any(|&v| v > 1e-6);
    let asym_decays = am[n - 1] < am[n - 2];
    let ratio = sm[3] / peak;
    println!("  symmetric max|I_pump|:  {}", fmt_list(&sm));
    println!("  asymmetric max|I_pump|: {}", fmt_list(&am));
    for b in &bumps {
        println!("  symmetric increase: {b}");
    }
    let pass = converged
        && sym_monotone
        && asym_null
        && asym_interior
        && asym_decays
        && ratio > 3.0
        && elapsed < Duration::from_secs(600);
    s.report(
        8,
        pass,
        format!(
            "symmetric nonincreasing: {sym_monotone}; asymmetric Ec=0 {:.2e} (< 1e-8), interior > 1e-6: {asym_interior}, decays: {asym_decays}; ratio {ratio:.1} (> 3), {:.2} s (< 600 s)",
            am[0],
            secs(elapsed)
        ),
    );
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn run_cli_sweep(dir: &Path, threads: Option<usize>, env_threads: Option<&str>) -> Vec<u8> {
    std::fs::create_dir_all(dir).unwrap();
    let out = dir.join("sweep.csv");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jjpump"));
    cmd.args([
        "sweep", "--geometry", "asymmetric", "--K", "0.1", "--Ec", "0.1", "--gamma-up", "100",
        "--flux-min", "-0.5", "--flux-max", "0.5", "--flux-count", "15", "--bias-min", "-3",
        "--bias-max", "3", "--bias-count", "15", "--seed", "7",
    ])
    .arg("--output")
    .arg(&out)
    .env_remove("JJPUMP_THREADS");
    if let Some(t) = threads {
        cmd.args(["--threads", &t.to_string()]);
    }
    if let Some(e) = env_threads {
        cmd.env("JJPUMP_THREADS", e);
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

fn criterion_9(s: &mut Suite) {
    let dir = tempfile::tempdir().unwrap();
    let reference = run_cli_sweep(&dir.path().join("a"), Some(1), None);
    let runs = [
        run_cli_sweep(&dir.path().join("b"), Some(1), None),
        run_cli_sweep(&dir.path().join("c"), Some(4), None),
        run_cli_sweep(&dir.path().join("d"), None, Some("3")),
        run_cli_sweep(&dir.path().join("e"), None, None),
    ];
    let identical = runs.iter().filter(|r| **r == reference).count();
    s.report(
        9,
        identical == runs.len() && !reference.is_empty(),
        format!(
            "{identical}/{} repeated sweeps byte-identical ({} bytes) across 1, 4, env 3 and default threads",
            runs.len(),
            reference.len()
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut s = Suite {
        outcomes: Vec::new(),
        conservation: Vec::new(),
    };
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criterion_5_and_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    let worst = s.conservation.iter().copied().fold(0.0, f64::max);
    let states = s.conservation.len();
    s.report(
        4,
        worst < 1e-8,
        format!("max |Σ_j I_j| = {worst:.3e} over {states} converged steady states (< 1e-8)"),
    );
    criterion_9(&mut s);

    s.outcomes.sort_by_key(|o| o.id);
    println!("summary:");
    for o in &s.outcomes {
        println!("  {} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.summary);
    }
    let failed: Vec<u32> = s.outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
