use std::path::Path;

use crate::error::{Error, Result};

use super::{CapacitanceScan, SweepRecord, SweepResult};

pub const COLUMNS: [&str; 14] = [
    "flux_ratio", "bias", "I_pump", "I_L", "I_D", "I_R", "I_U", "n_L", "n_D", "n_R", "n_U",
    "converged", "iterations", "method",
];

fn header_lines(result: &SweepResult, extra: &[String]) -> Vec<String> {
    let spec = &result.spec;
    let p = &spec.base;
    let prov = &result.provenance;
    let mut lines = vec![
        format!("jjpump {}", prov.version),
        format!("geometry: {}", spec.geometry.as_str()),
        format!(
            "params: K={} Ec={} gamma_up={} gamma={} epsilon={} bias_split={}",
            p.k,
            p.e_c,
            p.gamma_up_base,
            p.gamma,
            p.epsilon,
            serde_json::to_value(p.bias_split)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        ),
        format!(
            "flux_ratio: [{}, {}] x {}; bias: [{}, {}] x {}",
            spec.flux.min, spec.flux.max, spec.flux.count, spec.bias.min, spec.bias.max, spec.bias.count
        ),
        format!("solver: {}; warm_start={}", prov.solver, spec.warm_start),
        format!("seed: {}", prov.seed),
        format!("spec_sha256: {}", prov.spec_hash),
        format!("model_sha256: {}", prov.model_hash),
        format!("non_converged: {}", result.non_converged()),
        "sign: I_j > 0 is flow from bath j into the network; I_pump = I_D - I_U".to_string(),
    ];
    lines.extend(extra.iter().cloned());
    lines
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(r: &SweepRecord) -> Vec<String> {
    let mut out = vec![fmt(r.flux_ratio), fmt(r.bias), fmt(r.i_pump)];
    out.extend(r.currents.iter().map(|&x| fmt(x)));
    out.extend(r.populations.iter().map(|&x| fmt(x)));
    out.push(r.converged.to_string());
    out.push(r.iterations.to_string());
    out.push(r.method.as_str().to_string());
    out
}

/// The sweep as CSV text: `#` comment lines, then a header row and one row
/// per grid point in flux-major order.
pub fn sweep_csv(result: &SweepResult, extra_header: &[String]) -> String {
    let mut text = String::new();
    for line in header_lines(result, extra_header) {
        text.push_str("# ");
        text.push_str(&line);
        text.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in &result.records {
        w.write_record(row(r)).expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    text.push_str(&String::from_utf8(body).expect("ascii csv"));
    text
}

pub fn write_csv(result: &SweepResult, path: &Path, extra_header: &[String]) -> Result<()> {
    std::fs::write(path, sweep_csv(result, extra_header)).map_err(|e| Error::io(path, e))
}

pub const SCAN_COLUMNS: [&str; 6] = [
    "Ec", "K", "max_abs_pump", "argmax_flux", "pump_at_max", "all_converged",
];

/// The capacitance scan as CSV text, one row per `(E_C, K)` pair.
pub fn scan_csv(scan: &CapacitanceScan, extra_header: &[String]) -> String {
    let mut text = String::new();
    let mut header = vec![
        format!("jjpump {}", env!("CARGO_PKG_VERSION")),
        format!("geometry: {}", scan.geometry.as_str()),
        format!("bias: {}", scan.bias),
        format!(
            "flux_ratio: start={} step={} count={}",
            scan.flux.start, scan.flux.step, scan.flux.count
        ),
        "sign: I_pump = I_D - I_U; max_abs_pump is the maximum of |I_pump| over the flux grid".to_string(),
    ];
    header.extend(extra_header.iter().cloned());
    for line in header {
        text.push_str("# ");
        text.push_str(&line);
        text.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCAN_COLUMNS).expect("in-memory write");
    for e in &scan.entries {
        w.write_record([
            fmt(e.e_c),
            fmt(e.k),
            fmt(e.max_abs_pump),
            fmt(e.argmax_flux),
            fmt(e.pump_at_max),
            e.all_converged.to_string(),
        ])
        .expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    text.push_str(&String::from_utf8(body).expect("ascii csv"));
    text
}

pub fn write_scan_csv(scan: &CapacitanceScan, path: &Path, extra_header: &[String]) -> Result<()> {
    std::fs::write(path, scan_csv(scan, extra_header)).map_err(|e| Error::io(path, e))
}

/// A CSV file as written by [`write_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    /// Comment lines without the leading `# `.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let comments = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| Error::Csv(e.to_string()))
            })
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self {
            comments,
            columns,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Csv(format!("missing column `{name}`")))
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                r[i].parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {n}, column `{name}`: {e}")))
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CsvTable::parse(&text)
}
