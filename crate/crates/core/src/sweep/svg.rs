use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Terminal;

use super::{SweepRecord, SweepResult};

/// Observable plotted by the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Pump,
    Current(Terminal),
    Population(Terminal),
}

impl Quantity {
    pub fn name(self) -> String {
        match self {
            Quantity::Pump => "I_pump".into(),
            Quantity::Current(t) => format!("I_{}", t.label()),
            Quantity::Population(t) => format!("n_{}", t.label()),
        }
    }

    pub fn of(self, r: &SweepRecord) -> f64 {
        match self {
            Quantity::Pump => r.i_pump,
            Quantity::Current(t) => r.currents[t.index()],
            Quantity::Population(t) => r.populations[t.index()],
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "I_pump" || s == "pump" {
            return Ok(Quantity::Pump);
        }
        let terminal = |l: &str| Terminal::ALL.into_iter().find(|t| t.label() == l);
        let parsed = match s.split_once('_') {
            Some(("I", l)) => terminal(l).map(Quantity::Current),
            Some(("n", l)) => terminal(l).map(Quantity::Population),
            _ => None,
        };
        parsed.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown quantity `{s}` (expected I_pump, I_L..I_U or n_L..n_U)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    pub quantity: Quantity,
    pub width: u32,
    pub height: u32,
    pub title: Option<String>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            quantity: Quantity::Pump,
            width: 640,
            height: 520,
            title: None,
        }
    }
}

/// Diverging map on `[−scale, scale]`: blue for negative, white at zero,
/// red for positive.
pub fn rgb_for(value: f64, scale: f64) -> (u8, u8, u8) {
    if !value.is_finite() || !(scale > 0.0) {
        return (255, 255, 255);
    }
    let x = (value / scale).clamp(-1.0, 1.0);
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if x >= 0.0 {
        (255, fade(x), fade(x))
    } else {
        (fade(-x), fade(-x), 255)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Heatmap of one quantity over the flux (horizontal) × bias (vertical)
/// grid. Non-converged points are hatched grey.
pub fn heatmap_svg(result: &SweepResult, opts: &HeatmapOptions) -> String {
    let (w, h) = (opts.width.max(200) as f64, opts.height.max(160) as f64);
    let (left, right, top, bottom) = (70.0, 110.0, 40.0, 55.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let nf = result.flux_count();
    let nb = result.bias_count();
    let cw = pw / nf as f64;
    let ch = ph / nb as f64;
    let q = opts.quantity;
    let scale = result
        .records
        .iter()
        .filter(|r| r.converged)
        .map(|r| q.of(r).abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="nc" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"#,
        r##"<rect width="6" height="6" fill="#d0d0d0"/><line x1="0" y1="0" x2="0" y2="6" stroke="#606060" stroke-width="2"/>"##,
        "</pattern></defs>\n"
    ));
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let title = opts.title.clone().unwrap_or_else(|| {
        format!("{} ({})", q.name(), result.spec.geometry.as_str())
    });
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(&title)
    );

    for i in 0..nf {
        for j in 0..nb {
            let r = result.record(i, j);
            let x = left + i as f64 * cw;
            let y = top + (nb - 1 - j) as f64 * ch;
            let v = q.of(r);
            let fill = if r.converged && v.is_finite() {
                let (red, green, blue) = rgb_for(v, scale);
                format!("#{red:02x}{green:02x}{blue:02x}")
            } else {
                "url(#nc)".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"><title>flux={} bias={} {}={v:e}</title></rect>"#,
                cw + 0.05,
                ch + 0.05,
                r.flux_ratio,
                r.bias,
                q.name()
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let flux = result.spec.flux;
    let bias = result.spec.bias;
    let fx = |k: f64| left + (k + 0.5) * cw;
    let by = |k: f64| top + (nb as f64 - 0.5 - k) * ch;
    let flux_ticks = [(0.0, flux.min), ((nf - 1) as f64, flux.max)];
    for (k, val) in flux_ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            fx(k),
            top + ph + 18.0,
            tick(val)
        );
    }
    let bias_ticks = [(0.0, bias.min), ((nb - 1) as f64, bias.max)];
    for (k, val) in bias_ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            by(k) + 4.0,
            tick(val)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Φ/Φ₀</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">Γ/γ</text>"#,
        top + ph / 2.0
    );

    let bx = left + pw + 24.0;
    let steps = 64;
    let sh = ph / steps as f64;
    for k in 0..steps {
        let v = scale * (1.0 - 2.0 * (k as f64 + 0.5) / steps as f64);
        let (red, green, blue) = rgb_for(v, scale);
        let _ = writeln!(
            s,
            r##"<rect x="{bx}" y="{:.3}" width="16" height="{:.3}" fill="#{red:02x}{green:02x}{blue:02x}"/>"##,
            top + k as f64 * sh,
            sh + 0.05
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{bx}" y="{top}" width="16" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (frac, val) in [(0.0, scale), (0.5, 0.0), (1.0, -scale)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}">{}</text>"#,
            bx + 20.0,
            top + frac * ph + 4.0,
            if val == 0.0 { "0".to_string() } else { format!("{val:.2e}") }
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        bx + 8.0,
        top - 8.0,
        escape(&q.name())
    );
    s.push_str("</svg>\n");
    s
}

pub fn render_heatmap_svg(result: &SweepResult, opts: &HeatmapOptions, path: &Path) -> Result<()> {
    std::fs::write(path, heatmap_svg(result, opts)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::{run_sweep, Axis, SweepSpec};
    use super::*;
    use crate::model::{Geometry, PumpParams};

    fn result() -> SweepResult {
        let spec = SweepSpec {
            flux: Axis::new(-0.5, 0.5, 4),
            bias: Axis::new(0.0, 500.0, 3),
            ..SweepSpec::new(Geometry::Symmetric, PumpParams::new(0.1, 0.1, 100.0, 0.0, 0.0))
        };
        run_sweep(&spec, None).unwrap()
    }

    #[test]
    fn colors() {
        assert_eq!(rgb_for(0.0, 1.0), (255, 255, 255));
        assert_eq!(rgb_for(1.0, 1.0), (255, 0, 0));
        assert_eq!(rgb_for(-2.0, 1.0), (0, 0, 255));
        assert_eq!(rgb_for(f64::NAN, 1.0), (255, 255, 255));
    }

    #[test]
    fn quantity_names_round_trip() {
        for q in [
            Quantity::Pump,
            Quantity::Current(Terminal::R),
            Quantity::Population(Terminal::U),
        ] {
            assert_eq!(q.name().parse::<Quantity>().unwrap(), q);
        }
        assert!("I_X".parse::<Quantity>().is_err());
    }

    #[test]
    fn svg_is_well_formed_and_marks_failures() {
        let res = result();
        assert!(res.non_converged() > 0);
        let text = heatmap_svg(&res, &HeatmapOptions::default());
        let doc = roxmltree::Document::parse(&text).unwrap();
        let cells = doc
            .descendants()
            .filter(|n| n.has_tag_name("rect") && n.children().any(|c| c.has_tag_name("title")))
            .collect::<Vec<_>>();
        assert_eq!(cells.len(), 12);
        let hatched = cells
            .iter()
            .filter(|n| n.attribute("fill") == Some("url(#nc)"))
            .count();
        assert_eq!(hatched, res.non_converged());
        assert!(text.contains("Φ/Φ₀") && text.contains("Γ/γ"));
    }

    #[test]
    fn output_is_deterministic() {
        let res = result();
        let opts = HeatmapOptions {
            quantity: Quantity::Current(Terminal::L),
            title: Some("a < b & c".into()),
            ..HeatmapOptions::default()
        };
        let a = heatmap_svg(&res, &opts);
        assert_eq!(a, heatmap_svg(&res, &opts));
        roxmltree::Document::parse(&a).unwrap();
    }
}
