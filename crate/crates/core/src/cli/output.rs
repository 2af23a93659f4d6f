//! CSV tables and SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::harness::{Scheme, SweepRow};

pub const CSV_HEADER: &str = "p_max_dbm,inr_db,scheme,avg_ee_bit_per_joule,avg_capacity_bps,avg_harvested_dbm,avg_rho,feasibility_rate,n_trials";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("nothing to emit")]
    Empty,
}

/// `printf("%.9g")`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String, OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_g9(r.p_max_dbm),
            fmt_g9(r.inr_db),
            r.scheme,
            fmt_g9(r.avg_ee_bit_per_joule),
            fmt_g9(r.avg_capacity_bps),
            fmt_g9(r.avg_harvested_dbm),
            fmt_g9(r.avg_rho),
            fmt_g9(r.feasibility_rate),
            r.n_trials
        );
    }
    Ok(out)
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, &csv_string(rows)?)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), OutputError> {
    std::fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, OutputError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(OutputError::Csv {
                line: 1,
                reason: "unexpected header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| OutputError::Csv { line: k + 1, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        }
        let num = |i: usize| -> Result<f64, OutputError> {
            f[i].trim()
                .parse::<f64>()
                .map_err(|e| err(format!("field {}: {e}", i + 1)))
        };
        let scheme = match f[2].trim() {
            "proposed" => Scheme::Proposed,
            "baseline" => Scheme::Baseline,
            other => return Err(err(format!("unknown scheme `{other}`"))),
        };
        rows.push(SweepRow {
            p_max_dbm: num(0)?,
            inr_db: num(1)?,
            scheme,
            avg_ee_bit_per_joule: num(3)?,
            avg_capacity_bps: num(4)?,
            avg_harvested_dbm: num(5)?,
            avg_rho: num(6)?,
            feasibility_rate: num(7)?,
            n_trials: f[8]
                .trim()
                .parse()
                .map_err(|e| err(format!("field 9: {e}")))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Ee,
    Capacity,
    Harvested,
    Rho,
    Feasibility,
}

impl Metric {
    fn value(self, r: &SweepRow) -> f64 {
        match self {
            Metric::Ee => r.avg_ee_bit_per_joule,
            Metric::Capacity => r.avg_capacity_bps,
            Metric::Harvested => r.avg_harvested_dbm,
            Metric::Rho => r.avg_rho,
            Metric::Feasibility => r.feasibility_rate,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Ee => "average energy efficiency (bit/J)",
            Metric::Capacity => "average capacity (bit/s)",
            Metric::Harvested => "average harvested power (dBm)",
            Metric::Rho => "average splitting ratio",
            Metric::Feasibility => "feasibility rate",
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// One polyline per `(INR, scheme)` series, in order of first appearance.
pub fn svg_string(rows: &[SweepRow], metric: Metric) -> Result<String, OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut series: Vec<((f64, Scheme), Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let key = (r.inr_db, r.scheme);
        let pt = (r.p_max_dbm, metric.value(r));
        match series.iter_mut().find(|(k, _)| k.0.to_bits() == key.0.to_bits() && k.1 == key.1) {
            Some((_, pts)) => pts.push(pt),
            None => series.push((key, vec![pt])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let finite = |v: f64| v.is_finite();
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).filter(|v| finite(*v));
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);

    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (90.0, 170.0, 30.0, 60.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 20.0,
            fmt_g9(round_tick(xv))
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{ml}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 5.0,
            ml - 8.0,
            py + 4.0,
            fmt_g9(round_tick(yv))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">maximum transmit power (dBm)</text>"#,
        ml + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        metric.label()
    );
    for (k, ((inr, scheme), pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dash = if *scheme == Scheme::Baseline { r#" stroke-dasharray="6 4""# } else { "" };
        let path: Vec<String> = pts
            .iter()
            .filter(|p| finite(p.1))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            path.join(" ")
        );
        let ly = mt + 15.0 + 18.0 * k as f64;
        let lx = ml + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">INR {} dB, {}</text>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0,
            fmt_g9(*inr),
            scheme
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(rows: &[SweepRow], metric: Metric, path: &Path) -> Result<(), OutputError> {
    write_file(path, &svg_string(rows, metric)?)
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn round_tick(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let mag = 10f64.powi(v.abs().log10().floor() as i32 - 2);
    (v / mag).round() * mag
}
