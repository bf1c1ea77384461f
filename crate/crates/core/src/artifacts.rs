//! Plan CSVs and SVG drawings.
//!
//! Plan CSV columns: `step`, `x0..`, nominal state; `u0..`, control applied from this step
//! (empty on the last row); `mean0..`; `sigma_i_j`, `lambda_i_j` and `cov_i_j` for every
//! matrix entry in row-major order. Numbers use the shortest representation that parses
//! back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::belief::GaussianBelief;
use crate::environment::{Environment, GoalRegion};
use crate::error::{Error, Result};
use crate::geometry::ConvexPolygon;
use crate::propagation::MotionPlan;
use crate::system::LinearSystem;

fn plan_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..n).map(|i| format!("x{i}")));
    h.extend((0..m).map(|i| format!("u{i}")));
    h.extend((0..n).map(|i| format!("mean{i}")));
    for name in ["sigma", "lambda", "cov"] {
        for i in 0..n {
            for j in 0..n {
                h.push(format!("{name}_{i}_{j}"));
            }
        }
    }
    h
}

pub fn plan_to_csv(plan: &MotionPlan) -> Result<String> {
    let n = plan.start().dim();
    let m = plan.controls.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(plan_header(n, m))?;
    for (k, b) in plan.beliefs.iter().enumerate() {
        let mut r = vec![k.to_string()];
        r.extend(plan.nominal_states[k].iter().map(f64::to_string));
        match plan.controls.get(k) {
            Some(u) => r.extend(u.iter().map(f64::to_string)),
            None => r.extend(std::iter::repeat_n(String::new(), m)),
        }
        r.extend(b.mean().iter().map(f64::to_string));
        for mat in [b.sigma(), b.lambda(), b.total_covariance()] {
            for i in 0..n {
                for j in 0..n {
                    r.push(mat[(i, j)].to_string());
                }
            }
        }
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

pub fn write_plan_csv(plan: &MotionPlan, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, plan_to_csv(plan)?)?;
    Ok(())
}

/// Contents of a plan CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub controls: Vec<DVector<f64>>,
    pub nominal_states: Vec<DVector<f64>>,
    pub beliefs: Vec<GaussianBelief>,
}

impl PlanFile {
    /// Re-propagates the stored controls from the stored start belief.
    pub fn replay(&self, sys: &LinearSystem, env: &Environment) -> Result<MotionPlan> {
        MotionPlan::from_controls(&self.beliefs[0], self.controls.clone(), sys, env)
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Invalid(format!("plan CSV: {}", msg.into()))
}

pub fn parse_plan_csv(text: &str) -> Result<PlanFile> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let count = |prefix: &str| header.iter().filter(|h| h.strip_prefix(prefix).is_some_and(|s| s.parse::<usize>().is_ok())).count();
    let n = count("x");
    let m = count("u");
    if n == 0 || header.len() != 1 + 2 * n + m + 3 * n * n {
        return Err(bad("unexpected columns"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
    let mut out = PlanFile { controls: vec![], nominal_states: vec![], beliefs: vec![] };
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?);
    }
    for (k, rec) in rows.iter().enumerate() {
        let mut col = 1;
        let mut take = |len: usize| {
            let v: Vec<&str> = (col..col + len).map(|i| &rec[i]).collect();
            col += len;
            v
        };
        let x = take(n).into_iter().map(num).collect::<Result<Vec<_>>>()?;
        let u = take(m);
        if k + 1 < rows.len() {
            out.controls.push(DVector::from_vec(u.into_iter().map(num).collect::<Result<Vec<_>>>()?));
        } else if u.iter().any(|s| !s.is_empty()) {
            return Err(bad("last row carries a control"));
        }
        let mean = take(n).into_iter().map(num).collect::<Result<Vec<_>>>()?;
        let mut mats = Vec::new();
        for _ in 0..2 {
            let e = take(n * n).into_iter().map(num).collect::<Result<Vec<_>>>()?;
            mats.push(DMatrix::from_row_slice(n, n, &e));
        }
        out.nominal_states.push(DVector::from_vec(x));
        let lambda = mats.pop().expect("two matrices");
        let sigma = mats.pop().expect("two matrices");
        out.beliefs.push(GaussianBelief::new(DVector::from_vec(mean), sigma, lambda)?);
    }
    if out.beliefs.is_empty() {
        return Err(bad("no rows"));
    }
    Ok(out)
}

pub fn read_plan_csv(path: impl AsRef<Path>) -> Result<PlanFile> {
    parse_plan_csv(&fs::read_to_string(path)?)
}

/// Semi-axes and rotation (degrees, counterclockwise from +x) of the 2σ ellipse of the
/// planar position block of `cov`.
pub fn two_sigma_ellipse(cov: &DMatrix<f64>) -> (f64, f64, f64) {
    let block = DMatrix::from_fn(2, 2, |i, j| if i < cov.nrows() && j < cov.ncols() { cov[(i, j)] } else { 0.0 });
    let eig = SymmetricEigen::new(block);
    let (a, b) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(a);
    let angle = v[1].atan2(v[0]).to_degrees();
    (
        2.0 * eig.eigenvalues[a].max(0.0).sqrt(),
        2.0 * eig.eigenvalues[b].max(0.0).sqrt(),
        angle,
    )
}

fn polygon_points(p: &ConvexPolygon) -> String {
    p.vertices().iter().map(|v| format!("{},{}", v[0], v[1])).collect::<Vec<_>>().join(" ")
}

/// Draws the workspace (gray: no measurements, white: measurement regions, red: obstacles,
/// green: goal, blue: start), each plan's nominal path and its 2σ ellipses.
pub fn render_svg(env: &Environment, start: &[f64], plans: &[&MotionPlan]) -> String {
    let (x0, y0) = (env.bounds.lower[0], env.bounds.lower[1]);
    let (w, h) = (env.bounds.upper[0] - x0, env.bounds.upper[1] - y0);
    let stroke = 0.003 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {} {w} {h}" width="600" height="{}">"#,
        -(y0 + h),
        (600.0 * h / w).round()
    );
    // flip y so the workspace reads with y up
    let _ = writeln!(s, r#"<g transform="scale(1,-1)">"#);
    let _ = writeln!(s, r##"<rect class="bounds" x="{x0}" y="{y0}" width="{w}" height="{h}" fill="#b0b0b0"/>"##);
    for m in &env.measurement_regions {
        let _ = writeln!(s, r##"<polygon class="measurement" points="{}" fill="#ffffff"/>"##, polygon_points(&m.region));
    }
    match &env.goal {
        GoalRegion::Box(b) => {
            let _ = writeln!(
                s,
                r##"<rect class="goal" x="{}" y="{}" width="{}" height="{}" fill="#3cb043" fill-opacity="0.7"/>"##,
                b.lower[0],
                b.lower[1],
                b.upper[0] - b.lower[0],
                b.upper[1] - b.lower[1]
            );
        }
        GoalRegion::Disc { center, radius } => {
            let _ = writeln!(
                s,
                r##"<circle class="goal" cx="{}" cy="{}" r="{radius}" fill="#3cb043" fill-opacity="0.7"/>"##,
                center[0], center[1]
            );
        }
    }
    for o in &env.obstacles {
        let _ = writeln!(s, r##"<polygon class="obstacle" points="{}" fill="#d62728"/>"##, polygon_points(o));
    }
    for plan in plans {
        for b in &plan.beliefs {
            let (rx, ry, angle) = two_sigma_ellipse(b.total_covariance());
            let (cx, cy) = (b.mean()[0], if b.dim() > 1 { b.mean()[1] } else { 0.0 });
            let _ = writeln!(
                s,
                r##"<ellipse class="covariance" cx="{cx}" cy="{cy}" rx="{rx}" ry="{ry}" transform="rotate({angle} {cx} {cy})" fill="none" stroke="#1f3b99" stroke-width="{}"/>"##,
                stroke * 0.5
            );
        }
        let pts: Vec<String> = plan
            .nominal_states
            .iter()
            .map(|x| format!("{},{}", x[0], if x.len() > 1 { x[1] } else { 0.0 }))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline class="nominal" points="{}" fill="none" stroke="#000000" stroke-width="{stroke}"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r##"<circle class="start" cx="{}" cy="{}" r="{}" fill="#1f77b4"/>"##,
        start[0],
        start.get(1).copied().unwrap_or(0.0),
        0.01 * w.max(h)
    );
    s.push_str("</g>\n</svg>\n");
    s
}

pub fn write_svg(env: &Environment, start: &[f64], plans: &[&MotionPlan], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_svg(env, start, plans))?;
    Ok(())
}
