//! Per-point SVG summaries drawn from the trace CSVs of a report directory.
//!
//! Panels: norm against offset on log-log axes, resonance trajectories in the
//! compressed plane `r / (1 + |r|)`, and s-number counts over `(y, R)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classify::PointVerdict;
use crate::error::Result;
use crate::experiment::{load_verdicts, PLOTS_DIR};

const PANEL: f64 = 320.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Writes `plots/point_NNN.svg` for every verdict; returns notes about skipped panels.
pub fn emit_plots(dir: &Path) -> Result<Vec<String>> {
    let verdicts = load_verdicts(dir)?;
    fs::create_dir_all(dir.join(PLOTS_DIR))?;
    let mut notes = Vec::new();
    for (i, v) in verdicts.iter().enumerate() {
        let svg = point_svg(dir, i, v, &mut notes);
        fs::write(dir.join(PLOTS_DIR).join(format!("point_{i:03}.svg")), svg)?;
    }
    Ok(notes)
}

fn trace_file<'a>(v: &'a PointVerdict, kind: &str) -> Option<&'a str> {
    v.traces
        .iter()
        .find(|t| t.kind == kind)
        .map(|t| t.file.as_str())
}

fn read_table(path: &Path) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).ok()?;
    let header = r.headers().ok()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .filter_map(|rec| rec.ok())
        .map(|rec| rec.iter().map(str::to_string).collect())
        .collect();
    Some((header, rows))
}

fn load(
    dir: &Path,
    v: &PointVerdict,
    kind: &str,
    i: usize,
    notes: &mut Vec<String>,
) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let table = trace_file(v, kind).and_then(|f| read_table(&dir.join(f)));
    if table.is_none() {
        notes.push(format!("point {i}: no {kind} trace, panel skipped"));
    }
    table
}

fn point_svg(dir: &Path, i: usize, v: &PointVerdict, notes: &mut Vec<String>) -> String {
    let width = 3.0 * PANEL + 4.0 * MARGIN;
    let height = PANEL + 2.5 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="18" font-size="13">lambda = {} : {}</text>"#,
        v.lambda,
        v.status.label()
    );
    let probe = load(dir, v, "probe", i, notes);
    let res = load(dir, v, "resonances", i, notes);

    let origin = |k: usize| (MARGIN + k as f64 * (PANEL + MARGIN), 1.5 * MARGIN);
    match &probe {
        Some(t) => norm_panel(&mut s, origin(0), t),
        None => empty_panel(&mut s, origin(0), "norm trace"),
    }
    match &res {
        Some(t) => resonance_panel(&mut s, origin(1), t, v.evidence.vanishing_tol),
        None => empty_panel(&mut s, origin(1), "resonances"),
    }
    match &probe {
        Some(t) => count_panel(&mut s, origin(2), t),
        None => empty_panel(&mut s, origin(2), "s-number counts"),
    }
    s.push_str("</svg>\n");
    s
}

fn frame(s: &mut String, (x, y): (f64, f64), title: &str) {
    let _ = writeln!(
        s,
        r#"<rect x="{x}" y="{y}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{x}" y="{}">{title}</text>"#, y - 6.0);
}

fn empty_panel(s: &mut String, o: (f64, f64), title: &str) {
    frame(s, o, title);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
        o.0 + PANEL / 2.0,
        o.1 + PANEL / 2.0
    );
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn norm_panel(s: &mut String, o: (f64, f64), (header, rows): &(Vec<String>, Vec<Vec<String>>)) {
    frame(s, o, "(a) log10 |T| against log10 y");
    let (Some(cy), Some(cn)) = (column(header, "y"), column(header, "norm")) else {
        return;
    };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            Some((
                r[cy].parse::<f64>().ok()?.log10(),
                r[cn].parse::<f64>().ok()?.log10(),
            ))
        })
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    if pts.is_empty() {
        return;
    }
    let (x0, x1) = span(pts.iter().map(|p| p.0));
    let (y0, y1) = span(pts.iter().map(|p| p.1));
    let map = |p: &(f64, f64)| {
        (
            o.0 + (p.0 - x0) / (x1 - x0) * PANEL,
            o.1 + PANEL - (p.1 - y0) / (y1 - y0) * PANEL,
        )
    };
    polyline(s, pts.iter().map(map), PALETTE[0]);
    axis_labels(s, o, (x0, x1), (y0, y1));
}

fn resonance_panel(
    s: &mut String,
    o: (f64, f64),
    (header, rows): &(Vec<String>, Vec<Vec<String>>),
    tol: f64,
) {
    frame(s, o, "(b) resonances in r/(1+|r|)");
    let r = PANEL / 2.0 - 4.0;
    let (cx, cy) = (o.0 + PANEL / 2.0, o.1 + PANEL / 2.0);
    let _ = writeln!(
        s,
        r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="#bbb"/>"##
    );
    let disk = (tol / (1.0 + tol) * r).max(2.0);
    let _ = writeln!(
        s,
        r##"<circle cx="{cx}" cy="{cy}" r="{disk:.2}" fill="#f4a6a6" stroke="#d62728"/>"##
    );
    let (Some(cj), Some(cre), Some(cim)) = (
        column(header, "j"),
        column(header, "re"),
        column(header, "im"),
    ) else {
        return;
    };
    let mut curves: Vec<Vec<(f64, f64)>> = Vec::new();
    for row in rows {
        let Ok(j) = row[cj].parse::<usize>() else {
            continue;
        };
        let (Ok(re), Ok(im)) = (row[cre].parse::<f64>(), row[cim].parse::<f64>()) else {
            continue;
        };
        if curves.len() <= j {
            curves.resize(j + 1, Vec::new());
        }
        let scale = 1.0 / (1.0 + re.hypot(im));
        curves[j].push((cx + re * scale * r, cy - im * scale * r));
    }
    for (j, curve) in curves.iter().enumerate() {
        polyline(s, curve.iter().copied(), PALETTE[j % PALETTE.len()]);
        if let Some(&(x, y)) = curve.last() {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#,
                PALETTE[j % PALETTE.len()]
            );
        }
    }
}

fn count_panel(s: &mut String, o: (f64, f64), (header, rows): &(Vec<String>, Vec<Vec<String>>)) {
    frame(s, o, "(c) s-number counts over (y, R)");
    let cols: Vec<usize> = (0..header.len())
        .filter(|&c| header[c].starts_with("s_count_R="))
        .collect();
    if cols.is_empty() || rows.is_empty() {
        return;
    }
    let counts: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            cols.iter()
                .map(|&c| r[c].parse::<f64>().unwrap_or(0.0))
                .collect()
        })
        .collect();
    let max = counts
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(1.0);
    let (w, h) = (PANEL / cols.len() as f64, PANEL / rows.len() as f64);
    for (k, row) in counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let shade = 255.0 - 200.0 * v / max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade:.0},{shade:.0},255)"/>"#,
                o.0 + c as f64 * w,
                o.1 + k as f64 * h,
                w,
                h
            );
        }
    }
    for (c, &col) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            o.0 + (c as f64 + 0.5) * w,
            o.1 + PANEL + 12.0,
            &header[col]["s_count_".len()..]
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="9">rows: y decreasing downward, max count {max}</text>"#,
        o.0,
        o.1 + PANEL + 24.0
    );
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn polyline(s: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    if coords.is_empty() {
        return;
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

fn axis_labels(s: &mut String, o: (f64, f64), x: (f64, f64), y: (f64, f64)) {
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="9">{:.2}</text>"#,
        o.0,
        o.1 + PANEL + 12.0,
        x.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="9" text-anchor="end">{:.2}</text>"#,
        o.0 + PANEL,
        o.1 + PANEL + 12.0,
        x.1
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="9" text-anchor="end">{:.2}</text>"#,
        o.0 - 3.0,
        o.1 + PANEL,
        y.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="9" text-anchor="end">{:.2}</text>"#,
        o.0 - 3.0,
        o.1 + 9.0,
        y.1
    );
}
