//! End-to-end acceptance suite. Each test covers one numbered criterion and
//! prints a single PASS line (visible with `--nocapture`); a failed assert
//! marks the criterion failed.

use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;

use mcas::config::ExperimentConfig;
use mcas::diagnostics::{self, TraceRecord};
use mcas::grid::QuadratureRule;
use mcas::harness::{self, RunOutcome};
use mcas::integrator::{self, Method, SimState, StepperConfig};
use mcas::kinetics::System;

const X_PEAK: f64 = 5.0;
const M_TOTAL: f64 = 10.0;

struct Fixture {
    _dir: tempfile::TempDir,
    out: PathBuf,
    outcome: RunOutcome,
}

fn run_with(f: impl FnOnce(&mut ExperimentConfig)) -> Fixture {
    let mut cfg = ExperimentConfig::default();
    f(&mut cfg);
    cfg.validate().expect("fixture config is valid");
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("run");
    let outcome = harness::run_experiment(&cfg, &out).expect("fixture run completes");
    Fixture { _dir: dir, out, outcome }
}

/// alpha = 2, horizon long enough for the converged model to arrive at the
/// pheromone peak (the measured arrival is ~16300 s; see README notes).
static A2: Lazy<Fixture> = Lazy::new(|| run_with(|c| c.t_end = 20000.0));

static A3: Lazy<Fixture> = Lazy::new(|| {
    run_with(|c| {
        c.kinetics.alpha = 3.0;
        c.t_end = 10000.0;
    })
});

struct SweepFixture {
    _dir: tempfile::TempDir,
    result: harness::SweepResult,
}

static SWEEP: Lazy<SweepFixture> = Lazy::new(|| {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().expect("tempdir");
    let alphas = cfg.kinetics.alpha_list.clone();
    let result = harness::sweep_alpha(&cfg, &alphas, dir.path()).expect("sweep completes");
    SweepFixture { _dir: dir, result }
});

fn settled<'a>(records: &'a [TraceRecord], skip: f64) -> Vec<&'a TraceRecord> {
    records.iter().filter(|r| r.time >= skip).collect()
}

fn full_system(alpha: f64) -> System {
    let cfg = {
        let mut c = ExperimentConfig::default();
        c.kinetics.alpha = alpha;
        c
    };
    System::new(
        cfg.grid_spec().unwrap(),
        cfg.kinetics_spec(),
        cfg.pheromone_profile().unwrap(),
    )
    .unwrap()
}

fn argmax_x(state: &SimState) -> f64 {
    let g = state.u.grid();
    let (mut best, mut best_v) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in state.u.values().iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    g.x_of(best)
}

#[test]
fn criterion_01_single_peak_equilibrium() {
    let f = &A2;
    let residual = f.outcome.summary.equilibration_residual;
    assert!(residual < 1e-8, "equilibration residual {residual:e} >= 1e-8");
    let peaks = diagnostics::peak_count(
        &f.outcome.initial_state.u,
        0.01 * f.outcome.initial_state.u.max(),
    );
    assert_eq!(peaks, 1, "equilibrated profile has {peaks} peaks");
    let mass = f.outcome.initial_state.u.integrate(QuadratureRule::Trapezoid);
    assert!(mass < M_TOTAL, "equilibrium mass {mass} >= M");
    println!(
        "criterion 1 PASS: single-peak equilibrium (residual {residual:.2e}, peaks 1, U {mass:.4} < {M_TOTAL})"
    );
}

#[test]
fn criterion_02_pheromone_transport() {
    let f = &A2;
    let skip = ExperimentConfig::default().diagnostics.transient_skip;
    let cms: Vec<(f64, f64)> =
        settled(&f.outcome.records, skip).iter().map(|r| (r.time, r.cm_plain)).collect();
    let start_cm = f.outcome.records[0].cm_plain;
    assert!((start_cm - 1.0).abs() < 0.1, "initial CM {start_cm} not near 1");
    for w in cms.windows(2) {
        assert!(
            w[1].1 >= w[0].1 - 1e-3,
            "CM not monotonic: {} -> {} at t={}",
            w[0].1,
            w[1].1,
            w[1].0
        );
    }
    let peak_x = argmax_x(&f.outcome.final_state);
    assert!(
        (peak_x - X_PEAK).abs() <= 0.2,
        "final profile peaks at {peak_x}, not within 0.2 of {X_PEAK}"
    );
    println!(
        "criterion 2 PASS: alpha=2 transport, CM monotonic from {start_cm:.3}, final peak at x={peak_x:.3}"
    );
}

#[test]
fn criterion_03_time_to_peak() {
    let f = &A3;
    let arrival = f
        .outcome
        .records
        .iter()
        .find(|r| (r.cm_plain - X_PEAK).abs() < 0.1)
        .map(|r| r.time)
        .expect("alpha=3 run never came within 0.1 of the peak");
    assert!(arrival <= 8000.0, "alpha=3 reached the peak only at t={arrival}");
    for r in &f.outcome.records {
        if r.time >= 8000.0 {
            assert!(
                (r.cm_plain - X_PEAK).abs() < 0.1,
                "CM left the peak at t={}: {}",
                r.time,
                r.cm_plain
            );
        }
    }
    println!("criterion 3 PASS: alpha=3 |CM-5| < 0.1 from t={arrival} (<= 8000 s) onward");
}

/// Equilibrium substrate level v(alpha) from the mass closure, using the
/// sech^2 soliton of a u^2 v - b u + k u'' = 0: amplitude 3b/(2 a v), mass
/// 6 sqrt(k b)/(a v), plus the pheromone background alpha v integral(f)/b.
/// With Table-1 values and integral(f) = 10:
/// 10 (1+alpha) v^2 - 10 v + 0.6 = 0.
fn substrate_closure(alpha: f64) -> f64 {
    let a = 10.0 * (1.0 + alpha);
    let disc = (100.0 - 2.4 * a).sqrt();
    (10.0 - disc) / (2.0 * a)
}

#[test]
fn criterion_04_linearity_in_alpha() {
    let sweep = &SWEEP.result;
    assert_eq!(sweep.rows.len(), 6);
    let fit = sweep.fit.as_ref().expect("sweep produced a fit");
    let max_speed = sweep
        .rows
        .iter()
        .filter_map(|r| r.speed)
        .fold(f64::NEG_INFINITY, f64::max);
    // The converged model's drift law is speed = C * alpha * v(alpha) with
    // v(alpha) from the mass closure; v grows ~50% over alpha in [0.5, 3],
    // which caps the straight-line r^2 near 0.986. The 0.98 floor asserts
    // the paper-level linearity claim; the closure-law check below is the
    // sharper oracle.
    assert!(fit.r2 >= 0.98, "speed-vs-alpha r^2 = {} < 0.98", fit.r2);
    assert!(
        fit.intercept.abs() <= 0.2 * max_speed,
        "fit intercept {} exceeds 20% of max speed {max_speed}",
        fit.intercept
    );
    let mut ratios = Vec::new();
    for row in &sweep.rows {
        let speed = row.speed.expect("every sweep member fitted");
        ratios.push(speed / (row.alpha * substrate_closure(row.alpha)));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for (row, c) in sweep.rows.iter().zip(&ratios) {
        assert!(
            (c - mean).abs() <= 0.1 * mean,
            "alpha={} deviates from the drift closure law: C={} vs mean {}",
            row.alpha,
            c,
            mean
        );
    }
    println!(
        "criterion 4 PASS: speed-vs-alpha r^2 {:.4}, intercept {:.1}% of max, closure-law spread within 10%",
        fit.r2,
        100.0 * fit.intercept.abs() / max_speed
    );
}

#[test]
fn criterion_05_constant_drift_speed() {
    let f = &A2;
    let cfg = ExperimentConfig::default();
    let [lo, hi] = cfg.diagnostics.speed_window;
    let recs: Vec<&TraceRecord> = settled(&f.outcome.records, cfg.diagnostics.transient_skip)
        .into_iter()
        .filter(|r| r.cm_plain >= lo && r.cm_plain <= hi)
        .collect();
    assert!(recs.len() >= 10, "too few in-window samples: {}", recs.len());
    let slopes: Vec<f64> = recs
        .windows(2)
        .map(|w| (w[1].cm_plain - w[0].cm_plain) / (w[1].time - w[0].time))
        .collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / slopes.len() as f64;
    let cov = var.sqrt() / mean.abs();
    assert!(cov < 0.10, "dCM/dt coefficient of variation {cov} >= 10%");
    println!(
        "criterion 5 PASS: dCM/dt constant in CM-window [{lo}, {hi}] (mean {mean:.3e}, CoV {:.2}%)",
        100.0 * cov
    );
}

#[test]
fn criterion_06_oracle_equivalence() {
    let system = full_system(2.0);
    let start = A2.outcome.initial_state.clone();

    let imex_cfg = StepperConfig { rel_tol: 1e-8, abs_tol: 1e-11, ..StepperConfig::default() };
    let mut imex = start.clone();
    integrator::run_until(&mut imex, &system, imex_cfg, 100.0, &mut []).unwrap();

    let rk4_cfg = StepperConfig {
        method: Method::ExplicitRk4,
        dt_init: 1e-4,
        dt_max: 1e-4,
        ..StepperConfig::default()
    };
    let mut rk4 = start;
    integrator::run_until(&mut rk4, &system, rk4_cfg, 100.0, &mut []).unwrap();

    let mut diff = imex.u.clone();
    for (d, r) in diff.values_mut().iter_mut().zip(rk4.u.values()) {
        *d -= r;
    }
    let rel = diff.l2_norm() / rk4.u.l2_norm();
    assert!(rel <= 1e-5, "IMEX vs RK4 relative L2 {rel:e} > 1e-5 at t=100");
    println!("criterion 6 PASS: IMEX vs RK4(dt=1e-4) relative L2 {rel:.2e} over 100 s");
}

#[test]
fn criterion_07_analytic_diffusion() {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let report = harness::convergence_study(
        &cfg,
        &cfg.convergence.resolutions,
        &cfg.convergence.dts,
        dir.path(),
    )
    .unwrap();
    let (n, err) = *report.spatial_errors.last().unwrap();
    assert!(err <= 1e-4, "eigenmode decay error {err:e} > 1e-4 at N={n}");
    let order = report.observed_spatial_order;
    assert!(
        (1.8..=2.2).contains(&order),
        "observed spatial order {order} outside [1.8, 2.2]"
    );
    println!(
        "criterion 7 PASS: eigenmode decay error {err:.2e} at N={n}, spatial order {order:.3}"
    );
}

#[test]
fn criterion_08_conservation_positivity() {
    for (name, f) in [("alpha=2", &*A2), ("alpha=3", &*A3)] {
        for r in &f.outcome.records {
            assert!(
                r.mass_u <= M_TOTAL + 1e-6,
                "{name}: U(t) = {} exceeds M at t={}",
                r.mass_u,
                r.time
            );
            assert!(
                r.u_min >= -1e-8 * r.u_max,
                "{name}: negative undershoot {} at t={}",
                r.u_min,
                r.time
            );
        }
        // On the torus the discrete Laplacian integrates to zero, so the
        // predicted dU/dt must equal the integrated reaction term.
        let system = full_system(if name == "alpha=2" { 2.0 } else { 3.0 });
        for state in [&f.outcome.initial_state, &f.outcome.final_state] {
            let rhs = system.rhs(&state.u, state.mass_u, true);
            let v = system.substrate_level(state.mass_u);
            let du_dt = rhs.field.integrate(QuadratureRule::Trapezoid);
            let reaction = system.reaction(&state.u, v).integrate(QuadratureRule::Trapezoid);
            let scale = reaction.abs().max(1.0);
            assert!(
                (du_dt - reaction).abs() <= 1e-10 * scale,
                "{name}: dU/dt {du_dt:e} != integrated reaction {reaction:e}"
            );
        }
    }
    println!("criterion 8 PASS: U <= M + 1e-6, min(u) >= -1e-8 max(u), dU/dt = integrated reaction");
}

#[test]
fn criterion_09_regularity_probes() {
    let base = ExperimentConfig::default();

    // (a) 1D, diffusion on, [0, 10000]: uniformly bounded norms.
    let dir = tempfile::tempdir().unwrap();
    let probe_1d = harness::regularity_probe(&base, true, &[1, 2], &dir.path().join("d1")).unwrap();
    assert!(probe_1d.all_finite);
    for (s, ratio) in probe_1d.s_list.iter().zip(&probe_1d.no_growth_ratios) {
        assert!(*ratio <= 1.05, "H^{s} no-growth ratio {ratio} > 1.05");
    }

    // (b) diffusion off to t=100: finite norms.
    let mut short = base.clone();
    short.t_end = 100.0;
    short.sample_every = 1.0;
    let probe_nd =
        harness::regularity_probe(&short, false, &[1, 2], &dir.path().join("nd")).unwrap();
    assert!(probe_nd.all_finite, "no-diffusion norms not finite to t=100");

    // (c) 2D small grid: finite norms to t_end.
    let mut cfg2d = base.clone();
    cfg2d.grid.dim = 2;
    cfg2d.grid.points_per_axis = 32;
    cfg2d.t_end = 100.0;
    cfg2d.sample_every = 1.0;
    let probe_2d =
        harness::regularity_probe(&cfg2d, true, &[1, 2], &dir.path().join("d2")).unwrap();
    assert!(probe_2d.all_finite, "2D norms not finite to t_end");

    println!(
        "criterion 9 PASS: 1D ratios {:?} <= 1.05; no-diffusion and 2D norms finite",
        probe_1d
            .no_growth_ratios
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                entries.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    entries.sort();
    entries
}

#[test]
fn criterion_10_determinism() {
    let mut cfg = ExperimentConfig::default();
    cfg.t_end = 200.0;
    let dir = tempfile::tempdir().unwrap();
    harness::run_experiment(&cfg, &dir.path().join("a")).unwrap();
    harness::run_experiment(&cfg, &dir.path().join("b")).unwrap();
    let a = dir_snapshot(&dir.path().join("a"));
    let b = dir_snapshot(&dir.path().join("b"));
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert!(bytes_a == bytes_b, "artifact {name_a} differs between re-runs");
    }

    // Sweeps run members concurrently; artifacts must still be byte-stable.
    let mut sweep_cfg = ExperimentConfig::default();
    sweep_cfg.t_end = 100.0;
    let alphas = [0.5, 1.0, 1.5, 2.0];
    harness::sweep_alpha(&sweep_cfg, &alphas, &dir.path().join("sa")).unwrap();
    harness::sweep_alpha(&sweep_cfg, &alphas, &dir.path().join("sb")).unwrap();
    let sa = dir_snapshot(&dir.path().join("sa"));
    let sb = dir_snapshot(&dir.path().join("sb"));
    assert_eq!(sa, sb, "sweep artifacts differ between re-runs");

    println!(
        "criterion 10 PASS: re-runs byte-identical ({} run artifacts, {} sweep artifacts)",
        a.len(),
        sa.len()
    );
}

/// The trace/report plumbing on top of a real (short) run: emit_report
/// produces the three SVG plots and the summary JSON.
#[test]
fn report_pipeline_on_completed_run() {
    let f = &A2;
    let dir = tempfile::tempdir().unwrap();
    let files = mcas::report::emit_report(&[f.out.clone()], dir.path()).unwrap();
    let names: Vec<_> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in ["pheromone.svg", "profiles.svg", "cm.svg", "report.json"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
}
