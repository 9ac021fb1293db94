//! CSV and SVG emission. Column layouts live in [`SCHEMAS`] and FORMATS.md.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rhl_core::comparison::ConstantLedger;

use crate::run::{ConvergenceRow, RunReport};

/// Shortest representation that parses back to the same `f64`; scientific
/// notation outside `[1e-5, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (v.is_finite() && (1e-5..1e16).contains(&v.abs())) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Text,
    Int,
    Float,
    /// Float or empty.
    OptFloat,
    Bool,
}

/// One CSV file: name and typed header.
#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub file: &'static str,
    pub columns: &'static [(&'static str, Column)],
}

use Column::*;

pub const SUMMARY: Schema = Schema {
    file: "summary.csv",
    columns: &[("scenario", Text), ("component", Text), ("pass", Bool), ("detail", Text)],
};

pub const LEDGER: Schema = Schema {
    file: "ledger.csv",
    columns: &[
        ("symbol", Text),
        ("k", Int),
        ("value", Float),
        ("constraint", Text),
        ("slack", Float),
        ("provenance", Text),
    ],
};

pub const ESTIMATES: Schema = Schema {
    file: "estimates.csv",
    columns: &[
        ("scenario", Text),
        ("estimate_id", Text),
        ("r", OptFloat),
        ("a", OptFloat),
        ("k", Int),
        ("sup_ratio", Float),
        ("constant_used", Float),
        ("pass", Bool),
        ("flags", Text),
        ("argmax_t", OptFloat),
        ("argmax_x", OptFloat),
        ("argmax_y", OptFloat),
    ],
};

pub const CONVERGENCE: Schema = Schema {
    file: "convergence.csv",
    columns: &[
        ("scenario", Text),
        ("check", Text),
        ("k", Int),
        ("level", Int),
        ("h", Float),
        ("snapshot_dt", Float),
        ("value", Float),
        ("ratio", OptFloat),
        ("observed_order", OptFloat),
        ("c_fit", OptFloat),
    ],
};

pub const BARRIERS: Schema = Schema {
    file: "barriers.csv",
    columns: &[
        ("scenario", Text),
        ("kind", Text),
        ("testbed", Text),
        ("r", Float),
        ("alpha", Float),
        ("beta", Float),
        ("gamma", Float),
        ("calibrated", Bool),
        ("points", Int),
        ("skipped", Int),
        ("max_relative_violation", Float),
        ("tolerance", Float),
        ("pass", Bool),
    ],
};

pub const BERNSTEIN: Schema = Schema {
    file: "bernstein.csv",
    columns: &[
        ("scenario", Text),
        ("m", Int),
        ("level", Int),
        ("h", Float),
        ("defect", Float),
        ("tolerance", Float),
        ("points", Int),
        ("pass", Bool),
    ],
};

pub const ENTROPY: Schema = Schema {
    file: "entropy.csv",
    columns: &[
        ("t", Float),
        ("tau", Float),
        ("W", Float),
        ("dW_dt_measured", Float),
        ("rhs_integral", Float),
        ("defect", Float),
        ("level", Int),
        ("P_integral", Float),
    ],
};

pub const SCHEMAS: [Schema; 7] = [SUMMARY, LEDGER, ESTIMATES, CONVERGENCE, BARRIERS, BERNSTEIN, ENTROPY];

pub fn bool_str(b: bool) -> String {
    b.to_string()
}

fn write_csv(path: &Path, schema: &Schema, rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(schema.columns.iter().map(|c| c.0))?;
    for row in rows {
        debug_assert_eq!(row.len(), schema.columns.len(), "{}", schema.file);
        w.write_record(row)?;
    }
    w.flush()
}

pub fn ledger_rows(ledger: &ConstantLedger) -> Vec<Vec<String>> {
    ledger
        .rows()
        .into_iter()
        .map(|r| {
            vec![
                r.symbol,
                r.k.to_string(),
                fmt_f64(r.value),
                r.constraint,
                fmt_f64(r.slack),
                r.provenance.to_string(),
            ]
        })
        .collect()
}

pub fn write_ledger_csv(path: &Path, ledger: &ConstantLedger) -> io::Result<()> {
    write_csv(path, &LEDGER, &ledger_rows(ledger))
}

/// Writes every CSV and plot for `report` into `dir`, returning the files
/// written.
pub fn write_report(report: &RunReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let name = &report.scenario;
    let mut written = Vec::new();
    let mut emit = |schema: &Schema, rows: Vec<Vec<String>>| -> io::Result<()> {
        let path = dir.join(schema.file);
        write_csv(&path, schema, &rows)?;
        written.push(path);
        Ok(())
    };

    let mut summary: Vec<Vec<String>> = report
        .components
        .iter()
        .map(|c| vec![name.clone(), c.name.clone(), bool_str(c.pass), c.detail.clone()])
        .collect();
    summary.push(vec![
        name.clone(),
        "overall".into(),
        bool_str(report.pass()),
        report.error.clone().unwrap_or_default(),
    ]);
    emit(&SUMMARY, summary)?;

    emit(&LEDGER, report.ledger.as_ref().map(ledger_rows).unwrap_or_default())?;

    let estimates = report
        .estimates
        .iter()
        .map(|row| {
            let e = &row.report;
            vec![
                name.clone(),
                e.id.to_string(),
                fmt_opt(e.r),
                fmt_opt(e.a),
                e.k().to_string(),
                fmt_f64(e.sup_ratio),
                fmt_f64(e.constant_used),
                bool_str(e.pass),
                e.flags.to_string(),
                fmt_opt(e.argmax.map(|m| m.t)),
                fmt_opt(e.argmax.map(|m| m.x)),
                fmt_opt(e.argmax.map(|m| m.y)),
            ]
        })
        .collect();
    emit(&ESTIMATES, estimates)?;

    let convergence = report
        .convergence
        .iter()
        .map(|c| {
            vec![
                name.clone(),
                c.check.clone(),
                c.k.to_string(),
                c.level.to_string(),
                fmt_f64(c.h),
                fmt_f64(c.snapshot_dt),
                fmt_f64(c.value),
                fmt_opt(c.ratio),
                fmt_opt(c.observed_order),
                fmt_opt(c.c_fit),
            ]
        })
        .collect();
    emit(&CONVERGENCE, convergence)?;

    let barriers = report
        .barriers
        .iter()
        .map(|b| {
            vec![
                name.clone(),
                b.kind.to_string(),
                b.testbed.to_string(),
                fmt_f64(b.r),
                fmt_f64(b.alpha),
                fmt_f64(b.beta),
                fmt_f64(b.gamma),
                bool_str(b.calibrated),
                b.points.to_string(),
                b.skipped.to_string(),
                fmt_f64(b.max_relative_violation),
                fmt_f64(b.tolerance),
                bool_str(b.pass),
            ]
        })
        .collect();
    emit(&BARRIERS, barriers)?;

    let bernstein = report
        .bernstein
        .iter()
        .map(|b| {
            vec![
                name.clone(),
                b.m.to_string(),
                b.level.to_string(),
                fmt_f64(b.h),
                fmt_f64(b.defect),
                fmt_f64(b.tolerance),
                b.points.to_string(),
                bool_str(b.pass),
            ]
        })
        .collect();
    emit(&BERNSTEIN, bernstein)?;

    let entropy = report
        .entropy
        .iter()
        .map(|e| {
            let r = &e.record;
            vec![
                fmt_f64(r.t),
                fmt_f64(r.tau),
                fmt_f64(r.w),
                fmt_f64(r.dw_dt_measured),
                fmt_f64(r.rhs_integral),
                fmt_f64(r.defect()),
                e.level.to_string(),
                fmt_f64(r.p_integral),
            ]
        })
        .collect();
    emit(&ENTROPY, entropy)?;

    let mut checks: Vec<(&str, usize)> = Vec::new();
    for c in report.convergence.iter().filter(|c| c.check != "bernstein") {
        if !checks.contains(&(c.check.as_str(), c.k)) {
            checks.push((c.check.as_str(), c.k));
        }
    }
    for (check, k) in checks {
        let rows: Vec<&ConvergenceRow> = report
            .convergence
            .iter()
            .filter(|c| c.check == check && c.k == k)
            .collect();
        let (file, title) = if check == "identity" {
            (format!("identity_k{k}.svg"), format!("{name}: identity residual, k = {k}"))
        } else {
            (format!("{check}.svg"), format!("{name}: {check} identity residual"))
        };
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.value)).collect();
        let path = dir.join(file);
        fs::write(&path, convergence_svg(&title, &points))?;
        written.push(path);
    }

    if let Some((traj, echo)) = &report.saved_trajectory {
        let path = dir.join("trajectory.rhl");
        rhl_core::flows::write_trajectory(&path, traj, echo)?;
        written.push(path);
    }
    Ok(written)
}

/// Checks that a CSV file has the schema's header and that every field
/// parses as its column type.
pub fn validate_csv(path: &Path, schema: &Schema) -> Result<usize, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let expect: Vec<&str> = schema.columns.iter().map(|c| c.0).collect();
    if header.iter().collect::<Vec<_>>() != expect {
        return Err(format!("{}: header {:?} != {:?}", schema.file, header, expect));
    }
    let mut count = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        for ((col, kind), field) in schema.columns.iter().zip(rec.iter()) {
            let ok = match kind {
                Text => true,
                Int => field.parse::<u64>().is_ok(),
                Float => field.parse::<f64>().is_ok_and(|v| fmt_f64(v) == field),
                OptFloat => field.is_empty() || field.parse::<f64>().is_ok_and(|v| fmt_f64(v) == field),
                Bool => field == "true" || field == "false",
            };
            if !ok {
                return Err(format!("{} row {}: column {col} has {field:?}", schema.file, line + 1));
            }
        }
        count += 1;
    }
    Ok(count)
}

/// Log-log plot of residual against grid spacing with a slope-2 guide
/// through the coarsest point.
pub fn convergence_svg(title: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite())
        .map(|p| (p.0.log10(), p.1.log10()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if usable.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">no positive residuals</text>"#,
            W / 2.0,
            H / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = span(usable.iter().map(|p| p.0).collect());
    let guide: Vec<(f64, f64)> = usable.iter().map(|p| (p.0, usable[0].1 + 2.0 * (p.0 - usable[0].0))).collect();
    let (y0, y1) = span(usable.iter().chain(&guide).map(|p| p.1).collect());
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let _ = writeln!(
        svg,
        r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2}" fill="none" stroke="black"/>"#,
        px(x0),
        py(y1),
        px(x0),
        py(y0),
        px(x1),
        py(y0)
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">1e{d}</text>"#,
            H - B + 16.0
        );
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">1e{d}</text>"#,
            L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">h</text>"#,
        (L + W - R) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">sup residual</text>"#,
        (T + H - B) / 2.0,
        (T + H - B) / 2.0
    );
    let line = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if guide.len() > 1 {
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#,
            line(&guide)
        );
    }
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line(&usable));
    for p in &usable {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, px(p.0), py(p.1));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn any_float_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
        }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.0, -0.0, 1.0, 0.1, 1e-300, 4.371502414, -2.5e-7, 1e20, f64::MAX, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(2.5e-7), "2.5e-7");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn plots_are_well_formed() {
        let svg = convergence_svg("a < b", &[(0.1, 1e-3), (0.05, 2.6e-4)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        let empty = convergence_svg("x", &[(0.1, 0.0)]);
        assert!(empty.contains("no positive residuals"));
    }

    #[test]
    fn ledger_csv_validates() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = ConstantLedger::standard(2, 1.0, 3).unwrap();
        let path = dir.path().join("ledger.csv");
        write_ledger_csv(&path, &ledger).unwrap();
        assert_eq!(validate_csv(&path, &LEDGER).unwrap(), ledger.rows().len());
        assert!(validate_csv(&path, &SUMMARY).is_err());
    }
}
