//! Report emission: line plots (SVG) and a summary JSON assembled from
//! completed run and sweep artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::diagnostics::TraceRecord;
use crate::error::{McasError, Result};
use crate::harness::{self, SweepResult};
use crate::integrator::SimState;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Render a plain line plot. Deterministic output: fixed canvas, fixed
/// decimal formatting.
pub fn line_plot_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let width = 800.0;
    let height = 500.0;
    let (ml, mr, mt, mb) = (75.0, 25.0, 40.0, 55.0);

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if xmax - xmin < 1e-300 {
        xmax = xmin + 1.0;
    }
    if ymax - ymin < 1e-300 {
        ymax = ymin + 1.0;
    }
    let ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    let px = |x: f64| ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    let py = |y: f64| height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
    let fmt = |v: f64| {
        let a = v.abs();
        if a != 0.0 && (a >= 1e4 || a < 1e-3) {
            format!("{v:.3e}")
        } else {
            format!("{v:.4}")
        }
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        width / 2.0,
        title
    ));

    // Axes with 5 ticks per side.
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let x = px(fx);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/>\n",
            py(ymin),
            py(ymax)
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            height - mb + 20.0,
            fmt(fx)
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let y = py(fy);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n",
            px(xmin),
            px(xmax)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
            ml - 8.0,
            fmt(fy)
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n",
        width - ml - mr,
        height - mt - mb
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>\n",
        width / 2.0,
        height - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{ylabel}</text>\n",
        height / 2.0,
        height / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            d.push_str(if j == 0 { "M" } else { "L" });
            d.push_str(&format!("{:.2} {:.2} ", px(x), py(y)));
        }
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            d.trim_end()
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>\n",
            width - mr - 160.0,
            mt + 18.0 + 16.0 * i as f64,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// One completed run loaded back from disk.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub records: Vec<TraceRecord>,
    pub initial: Option<SimState>,
    pub final_state: Option<SimState>,
}

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let read = |name: &str| -> Result<String> {
        fs::read_to_string(dir.join(name)).map_err(|e| McasError::Parse {
            path: dir.join(name).display().to_string(),
            message: e.to_string(),
        })
    };
    let config = ExperimentConfig::from_toml_str(&read("config.toml")?, &[])?;
    let trace_path = dir.join("trace.csv");
    let records = harness::trace_from_csv(&read("trace.csv")?, &trace_path.display().to_string())?;
    let load_state = |name: &str| -> Option<SimState> {
        let p = dir.join(name);
        fs::read_to_string(&p)
            .ok()
            .and_then(|text| harness::state_from_text(&text, &p.display().to_string()).ok())
    };
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        records,
        initial: load_state("initial_state.dat"),
        final_state: load_state("final_state.dat"),
    })
}

#[derive(Serialize)]
struct ReportRunEntry {
    dir: String,
    alpha: f64,
    cm_initial: Option<f64>,
    cm_final: Option<f64>,
}

#[derive(Serialize)]
struct ReportSummary {
    no_data: bool,
    runs: Vec<ReportRunEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepResult>,
    svg_files: Vec<String>,
}

/// Assemble plots and a summary from run and/or sweep directories. A sweep
/// directory contributes its member runs as well.
pub fn emit_report(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;

    let mut runs: Vec<LoadedRun> = Vec::new();
    let mut sweep: Option<SweepResult> = None;
    for input in inputs {
        let sweep_path = input.join("sweep.json");
        if sweep_path.exists() {
            let text = fs::read_to_string(&sweep_path)?;
            let parsed: SweepResult =
                serde_json::from_str(&text).map_err(|e| McasError::Parse {
                    path: sweep_path.display().to_string(),
                    message: e.to_string(),
                })?;
            for row in &parsed.rows {
                let member = input.join(harness::alpha_dir_name(row.alpha));
                if member.join("trace.csv").exists() {
                    runs.push(load_run(&member)?);
                }
            }
            sweep = Some(parsed);
        } else if input.join("trace.csv").exists() {
            runs.push(load_run(input)?);
        } else {
            return Err(McasError::Parse {
                path: input.display().to_string(),
                message: "neither trace.csv nor sweep.json found".to_string(),
            });
        }
    }

    let mut written = Vec::new();
    let mut write_svg = |name: &str, body: String| -> Result<PathBuf> {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path.clone());
        Ok(path)
    };

    if !runs.is_empty() {
        // Pheromone profiles, one curve per distinct configuration.
        let mut seen = Vec::new();
        let mut series = Vec::new();
        for run in &runs {
            let hash = run.config.hash();
            if seen.contains(&hash) {
                continue;
            }
            seen.push(hash);
            let profile = run.config.pheromone_profile()?;
            let extent = run.config.grid.extent;
            let pts: Vec<(f64, f64)> = (0..=400)
                .map(|i| {
                    let x = extent * i as f64 / 400.0;
                    (x, profile.eval(x, extent))
                })
                .collect();
            series.push(Series { label: run.config.pheromone.kind.clone(), points: pts });
        }
        write_svg(
            "pheromone.svg",
            line_plot_svg("Pheromone profiles", "x (um)", "f(x)", &series),
        )?;

        // Activator snapshots at t=0 and t_end.
        let mut series = Vec::new();
        for run in &runs {
            let alpha = run.config.kinetics.alpha;
            for (state, tag) in [(&run.initial, "t=0"), (&run.final_state, "t=end")] {
                if let Some(s) = state {
                    let g = s.u.grid();
                    let pts: Vec<(f64, f64)> = s
                        .u
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (g.x_of(i), *v))
                        .collect();
                    series.push(Series { label: format!("alpha={alpha} {tag}"), points: pts });
                }
            }
        }
        write_svg(
            "profiles.svg",
            line_plot_svg("Activator profiles", "x (um)", "u(x)", &series),
        )?;

        // Center-of-mass trajectories.
        let series: Vec<Series> = runs
            .iter()
            .map(|run| Series {
                label: format!("alpha={}", run.config.kinetics.alpha),
                points: run.records.iter().map(|r| (r.time, r.cm_plain)).collect(),
            })
            .collect();
        write_svg(
            "cm.svg",
            line_plot_svg("Center of mass", "t (s)", "CM_u(t) (um)", &series),
        )?;
    }

    if let Some(sw) = &sweep {
        let pts: Vec<(f64, f64)> = sw
            .rows
            .iter()
            .filter_map(|r| r.speed.map(|s| (r.alpha, s)))
            .collect();
        let mut series = vec![Series { label: "measured speed".to_string(), points: pts.clone() }];
        if let (Some(fit), Some(first), Some(last)) = (&sw.fit, pts.first(), pts.last()) {
            series.push(Series {
                label: format!("fit slope={:.4e}", fit.slope),
                points: vec![
                    (first.0, fit.intercept + fit.slope * first.0),
                    (last.0, fit.intercept + fit.slope * last.0),
                ],
            });
        }
        write_svg(
            "speed_vs_alpha.svg",
            line_plot_svg("Transport speed vs pheromone strength", "alpha (1/s)", "dCM/dt (um/s)", &series),
        )?;
    }

    let summary = ReportSummary {
        no_data: runs.is_empty() && sweep.is_none(),
        runs: runs
            .iter()
            .map(|r| ReportRunEntry {
                dir: r.dir.display().to_string(),
                alpha: r.config.kinetics.alpha,
                cm_initial: r.records.first().map(|rec| rec.cm_plain),
                cm_final: r.records.last().map(|rec| rec.cm_plain),
            })
            .collect(),
        sweep,
        svg_files: written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let json_path = out_dir.join("report.json");
    fs::write(
        &json_path,
        format!("{:#}\n", serde_json::to_value(&summary).expect("report serializes")),
    )?;
    written.push(json_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_no_data_marker() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[], dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["no_data"], serde_json::Value::Bool(true));
    }

    #[test]
    fn svg_is_deterministic() {
        let series = vec![Series {
            label: "a".to_string(),
            points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)],
        }];
        let a = line_plot_svg("t", "x", "y", &series);
        let b = line_plot_svg("t", "x", "y", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
    }

    #[test]
    fn report_on_unknown_dir_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&[dir.path().join("nope")], dir.path()).unwrap_err();
        assert!(matches!(err, McasError::Parse { .. }));
    }
}
