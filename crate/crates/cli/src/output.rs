//! CSV and SVG emission.

use std::fmt::Write as _;

use phivar::scheme::Verdict;
use phivar::variation::Mode;

use crate::run::RunResult;

pub const VIEW_WIDTH: f64 = 960.0;
pub const VIEW_HEIGHT: f64 = 540.0;
/// Most points drawn per polyline.
pub const MAX_POLYLINE_POINTS: usize = 8192;

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn engine_name(mode: &Mode) -> &'static str {
    match mode {
        Mode::Enumerate => "enumerate",
        Mode::Binomial => "binomial",
        Mode::MonteCarlo { .. } => "mc",
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::ConvergesToTarget => "converges-to-target",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Render the CSV artifact. `stamp` is an optional leading comment line.
pub fn csv(result: &RunResult, stamp: Option<&str>) -> csv::Result<Vec<u8>> {
    let mut head = String::new();
    if let Some(s) = stamp {
        let _ = writeln!(head, "# {s}");
    }
    if let RunResult::Conditions(c) = result {
        for v in &c.verdicts {
            let _ = writeln!(head, "# verdict {}: {}", v.condition, verdict_name(v.verdict));
        }
    }
    let mut w = csv::Writer::from_writer(head.into_bytes());
    match result {
        RunResult::Sweep { rows, .. } => {
            w.write_record(["n", "t", "mode", "value", "stderr", "limit", "deviation"])?;
            for r in rows {
                let p = &r.report;
                w.write_record([
                    p.n.to_string(),
                    p.t.to_string(),
                    engine_name(&p.mode).to_string(),
                    p.value.to_string(),
                    p.stderr.to_string(),
                    opt(r.limit),
                    opt(r.deviation),
                ])?;
            }
        }
        RunResult::Estimate { estimate: e } => {
            w.write_record(["quantity", "method", "value", "error_low", "error_high", "stderr"])?;
            w.write_record([
                e.quantity.clone(),
                e.method.clone(),
                e.value.to_string(),
                e.error_low.to_string(),
                e.error_high.to_string(),
                opt(e.stderr),
            ])?;
        }
        RunResult::Coupling { rows } => {
            w.write_record(["n", "q", "exact_l2", "sampled_p", "sampled"])?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    r.q.to_string(),
                    r.exact_l2.to_string(),
                    opt(r.sampled.map(|s| s.0)),
                    opt(r.sampled.map(|s| s.2)),
                ])?;
            }
        }
        RunResult::Clt { rows } => {
            w.write_record(["n", "w1", "method"])?;
            for r in rows {
                w.write_record([r.n.to_string(), r.w1.to_string(), r.method.clone()])?;
            }
        }
        RunResult::Path { labels, paths } => {
            let mut header = vec!["t".to_string()];
            header.extend(labels.iter().cloned());
            w.write_record(&header)?;
            if let Some(first) = paths.first() {
                for k in 0..first.values.len() {
                    let mut row = vec![first.time(k).to_string()];
                    row.extend(paths.iter().map(|p| p.values[k].to_string()));
                    w.write_record(&row)?;
                }
            }
        }
        RunResult::Conditions(c) => {
            w.write_record(["n", "i", "ii", "iii", "iv"])?;
            for r in &c.rows {
                let mut row = vec![r.n.to_string()];
                row.extend(r.ratios.iter().map(|x| opt(*x)));
                w.write_record(&row)?;
            }
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// A named polyline.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Keep the first and last point of every bucket's min and max, so spikes
/// survive decimation.
pub fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let buckets = (max / 2).max(1);
    let size = points.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(2 * buckets);
    for chunk in points.chunks(size) {
        let lo = chunk.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
        let hi = chunk.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push(chunk[a]);
        if b != a {
            out.push(chunk[b]);
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn fmt_tick(x: f64) -> String {
    if x == 0.0 || (1e-3..1e4).contains(&x.abs()) {
        format!("{:.4}", x).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.2e}")
    }
}

/// Line chart in a fixed 960x540 viewBox, with an optional horizontal rule.
pub fn svg(title: &str, x_label: &str, y_label: &str, series: &[Series], rule: Option<(f64, &str)>) -> String {
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
    let (pw, ph) = (VIEW_WIDTH - left - right, VIEW_HEIGHT - top - bottom);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some((r, _)) = rule {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW_WIDTH} {VIEW_HEIGHT}" width="{VIEW_WIDTH}" height="{VIEW_HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        VIEW_WIDTH / 2.0,
        esc(title)
    );
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#444"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 20.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="#444"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        VIEW_HEIGHT - 15.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        esc(y_label)
    );
    if let Some((r, label)) = rule {
        let y = sy(r);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#888" stroke-dasharray="6 4"/><text x="{}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##,
            left + pw,
            left + pw - 4.0,
            y - 4.0,
            esc(label)
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<_> = ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        let pts = decimate(&pts, MAX_POLYLINE_POINTS);
        let mut attr = String::with_capacity(pts.len() * 16);
        for (x, y) in &pts {
            let _ = write!(attr, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, attr.trim_end());
        if pts.len() < 64 {
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            left + 10.0,
            top + 16.0 + 16.0 * i as f64,
            esc(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The chart for a result, when one applies.
pub fn chart(result: &RunResult, title: &str) -> Option<String> {
    match result {
        RunResult::Sweep { rows, .. } => {
            let points = rows.iter().map(|r| (r.report.n as f64, r.report.value)).collect();
            let limit = rows.first().and_then(|r| r.limit);
            Some(svg(title, "n", "V_n", &[Series { label: "V_n".into(), points }], limit.map(|l| (l, "limit"))))
        }
        RunResult::Clt { rows } => {
            let points = rows.iter().map(|r| (r.n as f64, r.w1)).collect();
            Some(svg(title, "n", "W1", &[Series { label: "W1 to N(0,1)".into(), points }], Some((0.0, "0"))))
        }
        RunResult::Coupling { rows } => {
            let points = rows.iter().map(|r| (r.n as f64, r.exact_l2)).collect();
            Some(svg(title, "n", "L2 distance", &[Series { label: "coupled L2".into(), points }], Some((0.0, "0"))))
        }
        RunResult::Path { labels, paths } => {
            let series: Vec<Series> = labels
                .iter()
                .zip(paths)
                .map(|(l, p)| Series {
                    label: l.clone(),
                    points: p.values.iter().enumerate().map(|(k, v)| (p.time(k), *v)).collect(),
                })
                .collect();
            Some(svg(title, "t", "X_t", &series, None))
        }
        RunResult::Estimate { .. } | RunResult::Conditions(_) => None,
    }
}
