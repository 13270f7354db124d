use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cases::TestCase;
use super::config::ExperimentConfig;
use super::sweep::{RealizationSeed, ResolvedConstants, SweepResult, SweepRow};
use crate::biot::Discretization;
use crate::error::{io_err, FslError, Result};

pub const CSV_HEADER: [&str; 9] = [
    "test_case",
    "disc",
    "kappa",
    "delta",
    "L",
    "iterations",
    "converged",
    "observed_rate",
    "delta_star",
];

fn csv_err(e: csv::Error) -> FslError {
    FslError::Config(format!("CSV: {e}"))
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.test_case.name().to_string(),
            r.discretization.name().to_string(),
            format!("{:e}", r.kappa),
            format!("{:e}", r.delta),
            format!("{:e}", r.l),
            format!("{:e}", r.iterations),
            r.converged.to_string(),
            r.observed_rate.map(|v| format!("{v:e}")).unwrap_or_default(),
            format!("{:e}", r.delta_star),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| FslError::Config(format!("CSV: {e}")))?;
    Ok(())
}

pub fn write_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| FslError::Config(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(FslError::Config(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str, field: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| FslError::Config(format!("bad {field} value '{s}'")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(SweepRow {
            test_case: rec[0].parse::<TestCase>()?,
            discretization: rec[1].parse::<Discretization>()?,
            kappa: num(&rec[2], "kappa")?,
            delta: num(&rec[3], "delta")?,
            l: num(&rec[4], "L")?,
            iterations: num(&rec[5], "iterations")?,
            converged: rec[6]
                .parse::<bool>()
                .map_err(|_| FslError::Config(format!("bad converged value '{}'", &rec[6])))?,
            observed_rate: if rec[7].is_empty() {
                None
            } else {
                Some(num(&rec[7], "observed_rate")?)
            },
            delta_star: num(&rec[8], "delta_star")?,
        });
    }
    Ok(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_csv(file)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn star_points(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let radius = if k % 2 == 0 { r } else { 0.45 * r };
            let ang = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + radius * ang.cos(), cy + radius * ang.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Iteration count against `δ`, one polyline per permeability with a star
/// at the theoretical optimum.
pub fn render_svg(result: &SweepResult) -> String {
    let (w, h) = (800.0, 600.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 60.0);
    let rows = &result.rows;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600">"#
    );
    let _ = writeln!(svg, r#"<rect width="800" height="600" fill="white"/>"#);
    let title = format!(
        "{} {}: total iterations vs delta",
        result.config.test_case, result.config.discretization.name()
    );
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{title}</text>"#, (left + w - right) / 2.0);
    if rows.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let dmin = rows.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
    let dmax = rows
        .iter()
        .map(|r| r.delta.max(r.delta_star))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(dmin + 1e-9);
    let dmin = dmin.min(rows.iter().map(|r| r.delta_star).fold(f64::INFINITY, f64::min));
    let imax = rows.iter().map(|r| r.iterations).fold(1.0, f64::max);
    let px = |d: f64| left + (d - dmin) / (dmax - dmin) * (w - left - right);
    let py = |it: f64| h - bottom - it / (imax * 1.05) * (h - top - bottom);
    let _ = writeln!(
        svg,
        r##"<g stroke="#333" stroke-width="1"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"##,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for k in 0..=5 {
        let d = dmin + (dmax - dmin) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{d:.2}</text>"#,
            px(d),
            h - bottom + 16.0
        );
        let it = imax * 1.05 * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{it:.0}</text>"#,
            left - 6.0,
            py(it) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">delta</text>"#,
        (left + w - right) / 2.0,
        h - 18.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">iterations</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, kappa) in result.kappas().into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let series = result.rows_for(kappa);
        let points: Vec<String> = series
            .iter()
            .filter(|r| r.converged)
            .map(|r| format!("{:.2},{:.2}", px(r.delta), py(r.iterations)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let star = series[0].delta_star;
        let at = interpolate(&series, star);
        let _ = writeln!(
            svg,
            r##"<polygon class="star" fill="{color}" stroke="#000" stroke-width="0.5" points="{}"/>"##,
            star_points(px(star), py(at), 8.0)
        );
        let ly = top + 20.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="12">kappa = {kappa:e}</text>"#,
            w - right + 10.0,
            w - right + 30.0,
            w - right + 36.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn interpolate(series: &[&SweepRow], delta: f64) -> f64 {
    let conv: Vec<&&SweepRow> = series.iter().filter(|r| r.converged).collect();
    if conv.is_empty() {
        return 0.0;
    }
    if delta <= conv[0].delta {
        return conv[0].iterations;
    }
    for w in conv.windows(2) {
        if delta <= w[1].delta {
            let s = (delta - w[0].delta) / (w[1].delta - w[0].delta);
            return w[0].iterations + s * (w[1].iterations - w[0].iterations);
        }
    }
    conv[conv.len() - 1].iterations
}

#[derive(Serialize)]
struct DeltaStar {
    kappa: f64,
    delta_star: f64,
    empirical_argmin: Option<f64>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    config: &'a ExperimentConfig,
    constants: &'a ResolvedConstants,
    realizations: &'a [RealizationSeed],
    delta_stars: Vec<DeltaStar>,
    cells: usize,
    all_converged: bool,
}

pub fn run_json(result: &SweepResult) -> Result<String> {
    let record = RunRecord {
        config: &result.config,
        constants: &result.constants,
        realizations: &result.realizations,
        delta_stars: result
            .kappas()
            .into_iter()
            .map(|k| DeltaStar {
                kappa: k,
                delta_star: result.delta_star(k).unwrap_or(f64::NAN),
                empirical_argmin: result.empirical_argmin(k),
            })
            .collect(),
        cells: result.rows.len(),
        all_converged: result.all_converged(),
    };
    serde_json::to_string_pretty(&record).map_err(|e| FslError::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub json: PathBuf,
}

/// Writes `sweep.csv`, `sweep.svg` and `run.json` into `dir`.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paths = OutputPaths {
        csv: dir.join("sweep.csv"),
        svg: dir.join("sweep.svg"),
        json: dir.join("run.json"),
    };
    let file = std::fs::File::create(&paths.csv).map_err(|e| io_err(&paths.csv, e))?;
    write_csv(&result.rows, std::io::BufWriter::new(file))?;
    std::fs::write(&paths.svg, render_svg(result)).map_err(|e| io_err(&paths.svg, e))?;
    let mut json = run_json(result)?;
    json.push('\n');
    std::fs::write(&paths.json, json).map_err(|e| io_err(&paths.json, e))?;
    Ok(paths)
}
