//! Experiment orchestration: the full pipeline (equilibrate, switch on the
//! pheromone, run, measure), alpha sweeps, regularity probes and convergence
//! studies. All artifacts are written with fixed 17-significant-digit decimal
//! formatting so identical configs yield byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::diagnostics::{self, RecordConfig, TraceRecord};
use crate::error::{McasError, Result};
use crate::grid::{Field, GridSpec, QuadratureRule};
use crate::integrator::{self, Observer, SimState, StepperConfig};
use crate::kinetics::System;
use crate::spectral;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time within which the CM must approach the pheromone peak for
/// time-to-peak reporting.
pub const TIME_TO_PEAK_RADIUS: f64 = 0.1;

/// Mandatory trace CSV column order.
pub const TRACE_COLUMNS: &str =
    "time,mass_u,cm_plain,cm_circular,u_min,u_max,h1_norm,h2_norm,peak_count";

/// Periodic Gaussian bump normalized to carry `mass`.
pub fn initial_bump(grid: GridSpec, center: f64, width: f64, mass: f64) -> Field {
    let extent = grid.extent();
    let mut f = Field::from_fn(grid, |x, y| {
        let mut v = 0.0;
        for ix in -2..=2i32 {
            let dx = x - center + ix as f64 * extent;
            match grid.dim() {
                1 => v += (-dx * dx / (2.0 * width * width)).exp(),
                _ => {
                    for iy in -2..=2i32 {
                        let dy = y - extent / 2.0 + iy as f64 * extent;
                        v += (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
                    }
                }
            }
        }
        v
    });
    let total = f.integrate(QuadratureRule::Trapezoid);
    let scale = mass / total;
    for v in f.values_mut() {
        *v *= scale;
    }
    f
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize a trace to CSV (header mandatory).
pub fn trace_to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_COLUMNS);
    out.push('\n');
    for r in records {
        let h1 = r.h_norm(1).unwrap_or(f64::NAN);
        let h2 = r.h_norm(2).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.time),
            fmt_f64(r.mass_u),
            fmt_f64(r.cm_plain),
            fmt_f64(r.cm_circular),
            fmt_f64(r.u_min),
            fmt_f64(r.u_max),
            fmt_f64(h1),
            fmt_f64(h2),
            r.peak_count
        ));
    }
    out
}

/// Parse a trace CSV produced by [`trace_to_csv`]. Errors name the bad row.
pub fn trace_from_csv(text: &str, path: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_COLUMNS => {}
        other => {
            return Err(McasError::Parse {
                path: path.to_string(),
                message: format!("bad or missing header: {other:?}"),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(McasError::Parse {
                path: path.to_string(),
                message: format!("row {row}: expected 9 columns, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| McasError::Parse {
                path: path.to_string(),
                message: format!("row {row}: bad number '{}'", fields[i]),
            })
        };
        records.push(TraceRecord {
            time: num(0)?,
            mass_u: num(1)?,
            cm_plain: num(2)?,
            cm_circular: num(3)?,
            u_min: num(4)?,
            u_max: num(5)?,
            h_norms: vec![(1, num(6)?), (2, num(7)?)],
            peak_count: fields[8].parse().map_err(|_| McasError::Parse {
                path: path.to_string(),
                message: format!("row {row}: bad peak count '{}'", fields[8]),
            })?,
        });
    }
    Ok(records)
}

/// Serialize a state (grid metadata + node values) to the final-state format.
pub fn state_to_text(state: &SimState) -> String {
    let g = state.u.grid();
    let mut out = String::new();
    out.push_str("# mcas state v1\n");
    out.push_str(&format!("dim {}\n", g.dim()));
    out.push_str(&format!("extent {}\n", fmt_f64(g.extent())));
    out.push_str(&format!("points_per_axis {}\n", g.points_per_axis()));
    out.push_str(&format!("time {}\n", fmt_f64(state.time)));
    out.push_str("values\n");
    for v in state.u.values() {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn state_from_text(text: &str, path: &str) -> Result<SimState> {
    let perr = |message: String| McasError::Parse { path: path.to_string(), message };
    let mut dim = None;
    let mut extent = None;
    let mut points = None;
    let mut time = None;
    let mut values = Vec::new();
    let mut in_values = false;
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if in_values {
            values.push(line.parse::<f64>().map_err(|_| perr(format!("bad value '{line}'")))?);
            continue;
        }
        if line == "values" {
            in_values = true;
            continue;
        }
        let (key, val) = line
            .split_once(' ')
            .ok_or_else(|| perr(format!("bad header line '{line}'")))?;
        match key {
            "dim" => dim = Some(val.parse::<usize>().map_err(|_| perr("bad dim".into()))?),
            "extent" => extent = Some(val.parse::<f64>().map_err(|_| perr("bad extent".into()))?),
            "points_per_axis" => {
                points = Some(val.parse::<usize>().map_err(|_| perr("bad points".into()))?)
            }
            "time" => time = Some(val.parse::<f64>().map_err(|_| perr("bad time".into()))?),
            other => return Err(perr(format!("unknown header key '{other}'"))),
        }
    }
    let grid = GridSpec::new(
        dim.ok_or_else(|| perr("missing dim".into()))?,
        extent.ok_or_else(|| perr("missing extent".into()))?,
        points.ok_or_else(|| perr("missing points_per_axis".into()))?,
    )?;
    let u = Field::from_values(grid, values)?;
    Ok(SimState::new(u, time.ok_or_else(|| perr("missing time".into()))?))
}

/// Per-run summary written next to the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub alpha: f64,
    pub equilibration_residual: f64,
    pub equilibration_time: f64,
    pub cm_initial: f64,
    pub cm_final: f64,
    pub time_to_peak: Option<f64>,
    pub mass_overflow: bool,
}

/// Everything a completed experiment produced, in memory.
pub struct RunOutcome {
    pub records: Vec<TraceRecord>,
    pub initial_state: SimState,
    pub final_state: SimState,
    pub summary: RunSummary,
}

fn write_error_manifest(dir: &Path, err: &McasError) {
    let body = serde_json::json!({ "error": err.to_string() });
    let _ = write_atomic(&dir.join("error.json"), &format!("{:#}\n", body));
}

/// First time at which |cm - x_peak| < 0.1 um, if any.
pub fn time_to_peak(records: &[TraceRecord], x_peak: f64) -> Option<f64> {
    records
        .iter()
        .find(|r| (r.cm_plain - x_peak).abs() < TIME_TO_PEAK_RADIUS)
        .map(|r| r.time)
}

/// Run the full pipeline for one config, writing artifacts into `out_dir`:
/// resolved config, equilibration residual history, the equilibrated initial
/// state, the trace CSV, the final state and a JSON run summary.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("config.toml"), &cfg.to_toml())?;
    match run_experiment_inner(cfg, out_dir) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            write_error_manifest(out_dir, &e);
            Err(e)
        }
    }
}

fn run_experiment_inner(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let grid = cfg.grid_spec()?;
    let spec = cfg.kinetics_spec();
    let profile = cfg.pheromone_profile()?;
    let system = System::new(grid, spec, profile)?;
    let stepper = cfg.stepper_config()?;

    // Seed bump, then relax the pheromone-free system to its steady profile.
    let u0 = initial_bump(
        grid,
        cfg.initial.bump_center,
        cfg.initial.bump_width,
        cfg.initial.bump_mass_fraction * spec.total_mass,
    );
    let seed = SimState::new(u0, 0.0);
    let eq = integrator::equilibrate(
        seed,
        &system,
        stepper,
        cfg.equilibration.tol,
        cfg.equilibration.t_cap,
    )
    .map_err(|e| {
        if let McasError::NonConvergence { ref history, .. } = e {
            let mut text = String::from("time,residual\n");
            for (t, r) in history {
                text.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*r)));
            }
            let _ = write_atomic(&out_dir.join("equilibration_residuals.csv"), &text);
        }
        e
    })?;

    let mut eq_history = String::from("time,residual\n");
    for (t, r) in &eq.history {
        eq_history.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*r)));
    }
    write_atomic(&out_dir.join("equilibration_residuals.csv"), &eq_history)?;

    let equilibration_time = eq.state.time;
    let mut state = eq.state;
    state.time = 0.0;
    state.step_count = 0;
    write_atomic(&out_dir.join("initial_state.dat"), &state_to_text(&state))?;
    let initial_state = state.clone();

    // Pheromone on; track the movement.
    let rec_cfg = RecordConfig {
        s_list: cfg.diagnostics.s_list.clone(),
        prominence_fraction: cfg.diagnostics.peak_prominence_fraction,
    };
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut record_err: Option<McasError> = None;
    {
        let mut observers = vec![Observer::new(cfg.sample_every, |s: &SimState| {
            if record_err.is_some() {
                return;
            }
            match diagnostics::record(s, &rec_cfg) {
                Ok(r) => records.push(r),
                Err(e) => record_err = Some(e),
            }
        })];
        let run_result =
            integrator::run_until(&mut state, &system, stepper, cfg.t_end, &mut observers);
        drop(observers);
        // Persist whatever was sampled even if the run failed midway.
        write_atomic(&out_dir.join("trace.csv"), &trace_to_csv(&records))?;
        run_result?;
    }
    if let Some(e) = record_err {
        return Err(e);
    }

    write_atomic(&out_dir.join("final_state.dat"), &state_to_text(&state))?;

    let summary = RunSummary {
        config_hash: cfg.hash(),
        alpha: cfg.kinetics.alpha,
        equilibration_residual: eq.residual,
        equilibration_time,
        cm_initial: records.first().map(|r| r.cm_plain).unwrap_or(f64::NAN),
        cm_final: records.last().map(|r| r.cm_plain).unwrap_or(f64::NAN),
        time_to_peak: time_to_peak(&records, cfg.pheromone.x_peak),
        mass_overflow: records.iter().any(|r| r.mass_u > spec.total_mass + 1e-9),
    };
    write_atomic(
        &out_dir.join("run.json"),
        &format!("{:#}\n", serde_json::to_value(&summary).expect("summary serializes")),
    )?;

    Ok(RunOutcome { records, initial_state, final_state: state, summary })
}

/// One row of a sweep result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub speed: Option<f64>,
    pub r2: Option<f64>,
    pub time_to_peak: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    pub fit: Option<SweepFitSummary>,
}

/// Directory name for one sweep member.
pub fn alpha_dir_name(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

/// Run one experiment per alpha (concurrently), fit each drift speed in the
/// configured CM window, then fit speed vs. alpha. A failed member marks its
/// row without aborting the sweep.
pub fn sweep_alpha(base: &ExperimentConfig, alphas: &[f64], out_dir: &Path) -> Result<SweepResult> {
    if alphas.len() < 4 {
        return Err(McasError::config(format!(
            "sweep needs at least 4 alpha values, got {}",
            alphas.len()
        )));
    }
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("config.toml"), &base.to_toml())?;
    let window = (base.diagnostics.speed_window[0], base.diagnostics.speed_window[1]);

    let mut sorted: Vec<f64> = alphas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("alpha values must be comparable"));

    let rows: Vec<SweepRow> = sorted
        .par_iter()
        .map(|&alpha| {
            let mut cfg = base.clone();
            cfg.kinetics.alpha = alpha;
            let member_dir = out_dir.join(alpha_dir_name(alpha));
            match run_experiment(&cfg, &member_dir) {
                Ok(outcome) => {
                    let settled: Vec<TraceRecord> = outcome
                        .records
                        .iter()
                        .filter(|r| r.time >= base.diagnostics.transient_skip)
                        .cloned()
                        .collect();
                    match diagnostics::speed_fit(&settled, window) {
                        Ok(fit) => SweepRow {
                            alpha,
                            speed: Some(fit.speed),
                            r2: Some(fit.r_squared),
                            time_to_peak: outcome.summary.time_to_peak,
                            error: None,
                        },
                        Err(e) => SweepRow {
                            alpha,
                            speed: None,
                            r2: None,
                            time_to_peak: outcome.summary.time_to_peak,
                            error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => SweepRow {
                    alpha,
                    speed: None,
                    r2: None,
                    time_to_peak: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let fit_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.speed.map(|s| (r.alpha, s)))
        .collect();
    let fit = if fit_pts.len() >= 2 {
        let (slope, intercept, r2) = diagnostics::fit_line_full(&fit_pts);
        Some(SweepFitSummary { slope, intercept, r2 })
    } else {
        None
    };

    let result = SweepResult { config_hash: base.hash(), rows, fit };
    write_atomic(
        &out_dir.join("sweep.json"),
        &format!("{:#}\n", serde_json::to_value(&result).expect("sweep serializes")),
    )?;
    Ok(result)
}

/// Output of a regularity probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityOutcome {
    pub config_hash: String,
    pub diffusion: bool,
    pub s_list: Vec<u32>,
    /// Per-s ratio max_{t in [T/2,T]} / max_{t in [0,T/2]} of the tracked norm.
    pub no_growth_ratios: Vec<f64>,
    pub all_finite: bool,
}

/// Run the configured system from the initial bump, tracking Sobolev norms,
/// and emit the windowed no-growth statistic.
pub fn regularity_probe(
    cfg: &ExperimentConfig,
    diffusion: bool,
    s_list: &[u32],
    out_dir: &Path,
) -> Result<RegularityOutcome> {
    if s_list.is_empty() {
        return Err(McasError::config("regularity probe needs a nonempty s_list".to_string()));
    }
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("config.toml"), &cfg.to_toml())?;

    let grid = cfg.grid_spec()?;
    for &s in s_list {
        if s as usize > grid.points_per_axis() / 4 {
            return Err(McasError::config(format!(
                "s={s} exceeds the aliasing bound for {} points per axis",
                grid.points_per_axis()
            )));
        }
    }
    let spec = cfg.kinetics_spec();
    let system = System::new(grid, spec, cfg.pheromone_profile()?)?;
    let mut stepper = cfg.stepper_config()?;
    stepper.diffusion = diffusion;

    let u0 = initial_bump(
        grid,
        cfg.initial.bump_center,
        cfg.initial.bump_width,
        cfg.initial.bump_mass_fraction * spec.total_mass,
    );
    let mut state = SimState::new(u0, 0.0);

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut norm_err: Option<McasError> = None;
    let run_result = {
        let mut observers = vec![Observer::new(cfg.sample_every, |s: &SimState| {
            if norm_err.is_some() {
                return;
            }
            let mut norms = Vec::with_capacity(s_list.len());
            for &order in s_list {
                match spectral::sobolev_norm(&s.u, order) {
                    Ok(n) => norms.push(n),
                    Err(e) => {
                        norm_err = Some(e);
                        return;
                    }
                }
            }
            rows.push((s.time, norms));
        })];
        integrator::run_until(&mut state, &system, stepper, cfg.t_end, &mut observers)
    };

    // Persist the norm history even when the stepper failed partway.
    let mut csv = String::from("time");
    for s in s_list {
        csv.push_str(&format!(",h{s}_norm"));
    }
    csv.push('\n');
    for (t, norms) in &rows {
        csv.push_str(&fmt_f64(*t));
        for n in norms {
            csv.push(',');
            csv.push_str(&fmt_f64(*n));
        }
        csv.push('\n');
    }
    write_atomic(&out_dir.join("norms.csv"), &csv)?;
    run_result?;
    if let Some(e) = norm_err {
        return Err(e);
    }

    let half = cfg.t_end / 2.0;
    let mut ratios = Vec::with_capacity(s_list.len());
    for i in 0..s_list.len() {
        let early = rows
            .iter()
            .filter(|(t, _)| *t <= half)
            .map(|(_, n)| n[i])
            .fold(0.0_f64, f64::max);
        let late = rows
            .iter()
            .filter(|(t, _)| *t > half)
            .map(|(_, n)| n[i])
            .fold(0.0_f64, f64::max);
        ratios.push(if early > 0.0 { late / early } else { f64::NAN });
    }
    let all_finite = rows.iter().all(|(_, n)| n.iter().all(|v| v.is_finite()));

    let outcome = RegularityOutcome {
        config_hash: cfg.hash(),
        diffusion,
        s_list: s_list.to_vec(),
        no_growth_ratios: ratios,
        all_finite,
    };
    write_atomic(
        &out_dir.join("regularity.json"),
        &format!("{:#}\n", serde_json::to_value(&outcome).expect("outcome serializes")),
    )?;
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    /// (points_per_axis, amplitude error) for the diffusion eigenmode test.
    pub spatial_errors: Vec<(usize, f64)>,
    /// log2 ratios of consecutive spatial errors.
    pub spatial_orders: Vec<f64>,
    pub observed_spatial_order: f64,
    /// (dt, error) for the fixed-grid explicit-stepper refinement.
    pub temporal_errors: Vec<(f64, f64)>,
    pub observed_temporal_order: f64,
    /// (points_per_axis, CM at the scenario horizon) for the full pipeline.
    pub cm_by_resolution: Vec<(usize, f64)>,
    /// |CM difference| between consecutive resolutions.
    pub cm_diffs: Vec<f64>,
}

/// Pure-diffusion decay of the first Fourier mode, compared to the analytic
/// amplitude; plus full-pipeline self-convergence of the CM.
pub fn convergence_study(
    base: &ExperimentConfig,
    resolutions: &[usize],
    dts: &[f64],
    out_dir: &Path,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 3 {
        return Err(McasError::config(format!(
            "convergence study needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    for w in resolutions.windows(2) {
        if w[1] <= w[0] {
            return Err(McasError::config("resolutions must be strictly increasing".to_string()));
        }
    }
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("config.toml"), &base.to_toml())?;

    let extent = base.grid.extent;
    let k_diff = base.kinetics.k;
    let kx = 2.0 * std::f64::consts::PI / extent;
    let t_probe = 100.0;

    // Effectively reaction-free system; the validator requires strictly
    // positive rates, so use denormal-range values.
    let diffusion_only = |grid: GridSpec| -> Result<System> {
        let spec = crate::kinetics::KineticsSpec {
            a: 1e-300,
            b: 1e-300,
            alpha: 0.0,
            k: k_diff,
            ..crate::kinetics::KineticsSpec::default()
        };
        System::new(grid, spec, crate::kinetics::PheromoneProfile::Zero)
    };

    let amp_error = |state: &SimState, reference: f64| -> f64 {
        let amp = (state.u.max() - state.u.min()) / 2.0;
        (amp - reference).abs()
    };
    let exact_amp = (-k_diff * kx * kx * t_probe).exp();

    let mut spatial_errors = Vec::new();
    for &n in resolutions {
        let grid = GridSpec::new(1, extent, n)?;
        let sys = diffusion_only(grid)?;
        let u0 = Field::from_fn(grid, |x, _| 2.0 + (kx * x).cos());
        let mut state = SimState::new(u0, 0.0);
        let cfg = StepperConfig { rel_tol: 1e-10, abs_tol: 1e-13, ..StepperConfig::default() };
        integrator::run_until(&mut state, &sys, cfg, t_probe, &mut [])?;
        spatial_errors.push((n, amp_error(&state, exact_amp)));
    }
    let spatial_orders: Vec<f64> = spatial_errors
        .windows(2)
        .map(|w| {
            let ratio = (w[1].0 as f64 / w[0].0 as f64).ln();
            (w[0].1 / w[1].1).ln() / ratio
        })
        .collect();
    let observed_spatial_order =
        spatial_orders.iter().sum::<f64>() / spatial_orders.len().max(1) as f64;

    // Temporal refinement on a fixed grid, compared against the semi-discrete
    // decay rate (the grid's own eigenvalue) so only time error is measured.
    let mut temporal_errors = Vec::new();
    if !dts.is_empty() {
        let n = resolutions[0];
        let grid = GridSpec::new(1, extent, n)?;
        let sys = diffusion_only(grid)?;
        let lam = spectral::fd_laplacian_eigenvalue(&grid, 1);
        let semi_discrete_amp = (k_diff * lam * t_probe).exp();
        for &dt in dts {
            let u0 = Field::from_fn(grid, |x, _| 2.0 + (kx * x).cos());
            let mut state = SimState::new(u0, 0.0);
            let cfg = StepperConfig {
                method: crate::integrator::Method::ExplicitRk4,
                dt_init: dt,
                ..StepperConfig::default()
            };
            integrator::run_until(&mut state, &sys, cfg, t_probe, &mut [])?;
            temporal_errors.push((dt, amp_error(&state, semi_discrete_amp)));
        }
    }
    let temporal_orders: Vec<f64> = temporal_errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    let observed_temporal_order = if temporal_orders.is_empty() {
        f64::NAN
    } else {
        temporal_orders.iter().sum::<f64>() / temporal_orders.len() as f64
    };

    // Full-pipeline self-convergence of the CM at the scenario horizon.
    let mut cm_by_resolution = Vec::new();
    for &n in resolutions {
        let mut cfg = base.clone();
        cfg.grid.points_per_axis = n;
        cfg.t_end = base.convergence.t_end;
        let member = out_dir.join(format!("n_{n}"));
        let outcome = run_experiment(&cfg, &member)?;
        cm_by_resolution.push((n, outcome.summary.cm_final));
    }
    let cm_diffs: Vec<f64> = cm_by_resolution
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs())
        .collect();

    let report = ConvergenceReport {
        config_hash: base.hash(),
        spatial_errors,
        spatial_orders,
        observed_spatial_order,
        temporal_errors,
        observed_temporal_order,
        cm_by_resolution,
        cm_diffs,
    };
    write_atomic(
        &out_dir.join("convergence.json"),
        &format!("{:#}\n", serde_json::to_value(&report).expect("report serializes")),
    )?;
    Ok(report)
}

/// Write a residual history CSV (exposed for the `equilibrate` subcommand).
pub fn write_residual_history(path: &Path, history: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("time,residual\n");
    for (t, r) in history {
        text.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*r)));
    }
    let mut fh = fs::File::create(path)?;
    fh.write_all(text.as_bytes())?;
    Ok(())
}
