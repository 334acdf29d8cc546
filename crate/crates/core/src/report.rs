//! Tables, JSON bundles and convergence plots.
//!
//! Every CSV has a single header row whose column names carry the unit and
//! the tolerance the column was produced with, as `name [unit; tolerance]`.
//! Numbers are written in shortest round-trip form, so identical inputs give
//! byte-identical files.  Wall-clock timings go to a separate file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::classify::CaseKind;
use crate::config::{CaseChoice, RunConfig};
use crate::error::{Error, Result};
use crate::model::HamSequence;
use crate::spectral::{ApproximationReport, EigenList, OracleOptions, Verdict};

/// Shortest round-trip decimal; exponent form outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    if x == 0.0 || (x.abs() >= 1e-4 && x.abs() < 1e15) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn col(name: &str, unit: &str, tol: impl AsRef<str>) -> String {
    format!("{name} [{unit}; {}]", tol.as_ref())
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::InclusionOnly => "inclusion-only",
        Verdict::Unresolved => "unresolved",
    }
}

/// Signed index of each entry of `list.values` (0 for the unindexed cluster at 0).
pub fn signed_indices(list: &EigenList) -> Vec<(i64, f64)> {
    let mut out = Vec::with_capacity(list.values.len());
    let nneg = list.negative.len() as i64;
    for (i, v) in list.negative.iter().rev().enumerate() {
        out.push((-(nneg - i as i64), *v));
    }
    for v in &list.near_zero {
        out.push((0, *v));
    }
    for (i, v) in list.positive.iter().enumerate() {
        out.push((i as i64 + 1, *v));
    }
    out
}

/// Spectrum of one regular problem; `oracle` holds the matched determinant root per row.
pub fn eigs_csv(list: &EigenList, shift: f64, oracle: Option<(&[Option<f64>], &OracleOptions)>) -> Result<String> {
    let ctol = format!("cluster_rtol={}", num(list.cluster_tol));
    let mut header = vec![
        col("k", "signed index", "0 = within cluster tolerance of the shift"),
        col("b", "steps", "exact"),
        col("lambda", "spectral parameter", &ctol),
    ];
    if let Some((_, o)) = oracle {
        header.push(col(
            "oracle_root",
            "spectral parameter",
            format!("bracket_width={} reject={}", num(o.width), num(o.reject)),
        ));
        header.push(col("oracle_diff", "spectral parameter", "absolute"));
    }
    let rows: Vec<Vec<String>> = signed_indices(list)
        .iter()
        .enumerate()
        .map(|(i, (k, v))| {
            let lam = v + shift;
            let mut row = vec![k.to_string(), list.b.to_string(), num(lam)];
            if let Some((roots, _)) = oracle {
                let root = roots.get(i).copied().flatten().map(|r| r + shift);
                row.push(opt(root));
                row.push(opt(root.map(|r| (r - lam).abs())));
            }
            row
        })
        .collect();
    csv_string(&header, &rows)
}

pub fn trajectories_csv(rep: &ApproximationReport) -> Result<String> {
    let ctol = rep
        .runs
        .iter()
        .find_map(|r| r.eigen.as_ref().map(|l| format!("cluster_rtol={}", num(l.cluster_tol))))
        .unwrap_or_else(|| "cluster_rtol=n/a".into());
    let etol = match &rep.bound {
        Some(_) => "tail sums by doubling to relative Cauchy tolerance".to_string(),
        None => "not available in this case".to_string(),
    };
    let header = vec![
        col("r", "run index", "exact"),
        col("b_r", "steps", "exact"),
        col("k", "signed index", "exact"),
        col("lambda", "spectral parameter", &ctol),
        col("e_r", "dimensionless", &etol),
        col("bound_a", "spectral parameter", "|l|^2 e/(1-|l| e) at lambda_k^(r); empty unless 1-|l|e>0"),
        col("bound_b", "spectral parameter", "same at the finest run; empty unless 1-|l|e>0"),
        col("verdict", "label", format!("converge_rtol={}", num(rep.converge_tol))),
    ];
    let mut trs: Vec<_> = rep.trajectories.iter().collect();
    trs.sort_by_key(|t| t.k);
    let mut rows = Vec::new();
    for tr in trs {
        for p in &tr.points {
            rows.push(vec![
                p.r.to_string(),
                p.b.to_string(),
                p.k.to_string(),
                num(p.lambda),
                opt(p.e),
                opt(p.bound_a),
                opt(p.bound_b),
                verdict_label(tr.verdict).to_string(),
            ]);
        }
    }
    csv_string(&header, &rows)
}

/// All retained eigenvalues of every run.
pub fn eigenvalues_csv(rep: &ApproximationReport) -> Result<String> {
    let header = vec![
        col("r", "run index", "exact"),
        col("b_r", "steps", "exact"),
        col("k", "signed index", "0 = within cluster tolerance of the shift"),
        col("lambda", "spectral parameter", "cluster_rtol per run, see report.json"),
    ];
    let mut rows = Vec::new();
    for run in &rep.runs {
        if let Some(l) = &run.eigen {
            for (k, v) in signed_indices(l) {
                rows.push(vec![run.r.to_string(), run.b.to_string(), k.to_string(), num(v + rep.spectral_shift)]);
            }
        }
    }
    csv_string(&header, &rows)
}

pub fn defects_csv(rep: &ApproximationReport) -> Result<String> {
    let header = vec![
        col("b_r", "steps", "exact"),
        col("sample", "index", "exact"),
        col("delta", "squared weighted norm", "tail sums by doubling"),
        col("delta1", "squared weighted norm", "tail sums by doubling"),
        col("delta2", "squared weighted norm", "tail sums by doubling"),
        col("bound", "squared weighted norm", "eta*|g|^2 a priori"),
        col("eta", "dimensionless", "a priori"),
        col("g_norm2", "squared weighted norm", "exact sum"),
        col("m_r", "dimensionless", "spectral norm"),
        col("n_r", "dimensionless", "spectral norm"),
    ];
    let rows: Vec<Vec<String>> = rep
        .defects
        .iter()
        .map(|d| {
            vec![
                d.b.to_string(),
                d.sample.to_string(),
                num(d.delta),
                num(d.delta1),
                num(d.delta2),
                num(d.bound),
                num(d.eta),
                num(d.g_norm2),
                num(d.m_r),
                num(d.n_r),
            ]
        })
        .collect();
    csv_string(&header, &rows)
}

/// Resolvent values with the per-t residual of the defining relation.
pub fn resolvent_csv(y: &HamSequence, residuals: &[Option<f64>], label: &str) -> Result<String> {
    let m = y.dim();
    let mut header = vec![col("t", "step", "exact")];
    for i in 0..m {
        header.push(col(&format!("re_y{}", i + 1), "solution units", label));
        header.push(col(&format!("im_y{}", i + 1), "solution units", label));
    }
    header.push(col("residual", "2-norm of L(y)-W R(zy-g)", "self-check expected <= 1e-8"));
    let rows: Vec<Vec<String>> = y
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut row = vec![(y.start + i as i64).to_string()];
            for c in v {
                row.push(num(c.re));
                row.push(num(c.im));
            }
            row.push(opt(residuals.get(i).copied().flatten()));
            row
        })
        .collect();
    csv_string(&header, &rows)
}

/// Everything an approximation run produced, except timings.
#[derive(Serialize)]
pub struct ReportBundle<'a> {
    pub version: &'static str,
    pub system: String,
    pub config: &'a RunConfig,
    pub case: &'a CaseChoice,
    pub approximation: &'a ApproximationReport,
}

#[derive(Serialize, Default)]
pub struct Timings {
    pub steps: Vec<(String, f64)>,
}

impl Timings {
    pub fn record(&mut self, name: &str, secs: f64) {
        self.steps.push((name.to_string(), secs));
    }
}

pub fn to_json<T: Serialize>(x: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(x).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes the enabled outputs of an approximation run.
pub fn write_approx(dir: &Path, bundle: &ReportBundle, timings: &Timings) -> Result<Vec<PathBuf>> {
    let rep = bundle.approximation;
    let emit = &bundle.config.emit;
    let mut out = Vec::new();
    if emit.csv {
        out.push(write_file(dir, "trajectories.csv", &trajectories_csv(rep)?)?);
        out.push(write_file(dir, "defects.csv", &defects_csv(rep)?)?);
        out.push(write_file(dir, "eigenvalues.csv", &eigenvalues_csv(rep)?)?);
    }
    if emit.json {
        out.push(write_file(dir, "report.json", &to_json(bundle)?)?);
        out.push(write_file(dir, "timings.json", &to_json(timings)?)?);
    }
    if emit.svg {
        out.push(write_file(dir, "convergence.svg", &convergence_svg(rep, &bundle.system))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn px(&self, b: f64) -> f64 {
        self.left + (b.log10() - self.x0) / (self.x1 - self.x0) * self.width
    }

    fn py(&self, v: f64) -> f64 {
        let v = v.clamp(self.y0, self.y1);
        self.top + (self.y1 - v) / (self.y1 - self.y0) * self.height
    }
}

/// λ_k^{(r)} against b_r on a logarithmic axis, one polyline per index.
/// Limit-circle runs get the eigenvalue bound as a dashed envelope; other
/// cases carry an inclusion-only banner instead.
pub fn convergence_svg(rep: &ApproximationReport, title: &str) -> String {
    let (w, h) = (860.0, 540.0);
    let (left, right, top, bottom) = (90.0, 170.0, 70.0, 60.0);
    let lcc = rep.kind == CaseKind::LimitCircle;
    let mut trs: Vec<_> = rep.trajectories.iter().collect();
    trs.sort_by_key(|t| t.k);

    let bs: Vec<f64> = rep.schedule.iter().map(|b| *b as f64).collect();
    let (mut x0, mut x1) = match (bs.first(), bs.last()) {
        (Some(a), Some(b)) => (a.log10(), b.log10()),
        _ => (0.0, 1.0),
    };
    if x1 - x0 < 1e-9 {
        x0 -= 0.1;
        x1 += 0.1;
    }
    let pad = 0.04 * (x1 - x0);
    x0 -= pad;
    x1 += pad;
    let lams: Vec<f64> = trs.iter().flat_map(|t| t.points.iter().map(|p| p.lambda)).collect();
    let (mut y0, mut y1) = lams.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !y0.is_finite() {
        y0 = 0.0;
        y1 = 1.0;
    }
    if y1 - y0 < 1e-12 * y0.abs().max(1.0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.08 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let f = Frame { x0, x1, y0, y1, left, top, width: w - left - right, height: h - top - bottom };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        esc(&format!("Truncated eigenvalues λ_k vs b_r — {title}"))
    );
    if !lcc {
        let _ = writeln!(
            s,
            r##"<g class="banner"><rect x="{left}" y="34" width="{}" height="24" fill="#fff3cd" stroke="#b58900"/><text x="{}" y="50" text-anchor="middle" fill="#7a5b00">inclusion-only: limits of these trajectories contain the spectrum; exactness is not claimed</text></g>"##,
            f.width,
            left + f.width / 2.0
        );
    }
    // Axes and grid.
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        f.width, f.height
    );
    for b in &rep.schedule {
        let x = f.px(*b as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{b}</text>"##,
            top + f.height,
            top + f.height + 16.0
        );
    }
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * i as f64 / 5.0;
        let y = f.py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + f.width,
            left - 6.0,
            y + 4.0,
            esc(&format!("{v:.4}"))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">b_r (log scale)</text>"#,
        left + f.width / 2.0,
        h - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">λ_k^(r)</text>"#,
        top + f.height / 2.0,
        top + f.height / 2.0
    );
    // Envelopes first so the trajectories sit on top.
    if lcc {
        for (i, tr) in trs.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<_> = tr.points.iter().filter_map(|p| p.bound_a.map(|bd| (p.b, p.lambda, bd))).collect();
            if pts.is_empty() {
                continue;
            }
            for sign in [1.0, -1.0] {
                let line: Vec<String> =
                    pts.iter().map(|(b, l, bd)| format!("{:.2},{:.2}", f.px(*b as f64), f.py(l + sign * bd))).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline class="envelope" data-k="{}" points="{}" fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="4 3" opacity="0.7"/>"#,
                    tr.k,
                    line.join(" ")
                );
            }
        }
    }
    for (i, tr) in trs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let line: Vec<String> =
            tr.points.iter().map(|p| format!("{:.2},{:.2}", f.px(p.b as f64), f.py(p.lambda))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="trajectory" data-k="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            tr.k,
            line.join(" ")
        );
        for p in &tr.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                f.px(p.b as f64),
                f.py(p.lambda)
            );
        }
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + f.width + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">k = {} ({})</text>"#,
            ly - 4.0,
            lx + 22.0,
            ly - 4.0,
            lx + 28.0,
            ly,
            tr.k,
            verdict_label(tr.verdict)
        );
    }
    if lcc {
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="#555">dashed: λ ± bound where 1 − |λ|e_r &gt; 0</text>"##,
            left + f.width + 14.0,
            top + f.height
        );
    }
    s.push_str("</svg>\n");
    s
}
