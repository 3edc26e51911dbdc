//! Observables on simulation states: center of mass, drift-speed fits,
//! Sobolev norms, peak counting and trace assembly.

use crate::error::{McasError, Result};
use crate::grid::{Field, QuadratureRule};
use crate::integrator::SimState;
use crate::spectral;

/// How to compute the center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmMode {
    /// int x u dx / int u dx with x in [0, extent). Matches the quantity the
    /// production experiments report, but is misleading when the bump
    /// straddles the periodic seam.
    Plain,
    /// Argument of the first circular moment, mapped back to [0, extent).
    /// Immune to wrap-around.
    Circular,
}

/// Center of mass along axis 0. Errors when the total mass is not positive.
pub fn center_of_mass(f: &Field, mode: CmMode) -> Result<f64> {
    let total = f.integrate(QuadratureRule::Trapezoid);
    if !(total > 0.0) {
        return Err(McasError::UndefinedCm(total));
    }
    let grid = f.grid();
    let extent = grid.extent();
    match mode {
        CmMode::Plain => {
            let mut moment = 0.0;
            for (i, v) in f.values().iter().enumerate() {
                moment += grid.x_of(i) * v;
            }
            Ok(moment * grid.cell_measure() / total)
        }
        CmMode::Circular => {
            let two_pi = 2.0 * std::f64::consts::PI;
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, v) in f.values().iter().enumerate() {
                let theta = two_pi * grid.x_of(i) / extent;
                re += v * theta.cos();
                im += v * theta.sin();
            }
            let angle = im.atan2(re);
            Ok((angle / two_pi * extent).rem_euclid(extent))
        }
    }
}

/// Number of periodic local maxima whose height above the higher of the two
/// adjacent minima exceeds `prominence`. 2D fields are reduced to their
/// axis-0 marginal first.
pub fn peak_count(f: &Field, prominence: f64) -> usize {
    assert!(prominence > 0.0, "prominence must be positive");
    let n = f.grid().points_per_axis();
    let profile: Vec<f64> = match f.grid().dim() {
        1 => f.values().to_vec(),
        _ => {
            let mut marginal = vec![0.0; n];
            for (i, v) in f.values().iter().enumerate() {
                marginal[i % n] += v;
            }
            marginal
        }
    };

    let mut count = 0;
    for i in 0..n {
        let prev = profile[(i + n - 1) % n];
        let next = profile[(i + 1) % n];
        let here = profile[i];
        if here > prev && here >= next {
            // Walk down both sides to the adjacent local minima.
            let mut left = prev;
            let mut j = (i + n - 1) % n;
            loop {
                let jj = (j + n - 1) % n;
                if profile[jj] >= left || jj == i {
                    break;
                }
                left = profile[jj];
                j = jj;
            }
            let mut right = next;
            let mut j = (i + 1) % n;
            loop {
                let jj = (j + 1) % n;
                if profile[jj] >= right || jj == i {
                    break;
                }
                right = profile[jj];
                j = jj;
            }
            if here - left.max(right) > prominence {
                count += 1;
            }
        }
    }
    count
}

/// One time-stamped diagnostics row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub mass_u: f64,
    pub cm_plain: f64,
    pub cm_circular: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// (s, ||u||_{H^s}) pairs in ascending s.
    pub h_norms: Vec<(u32, f64)>,
    pub peak_count: usize,
}

impl TraceRecord {
    pub fn h_norm(&self, s: u32) -> Option<f64> {
        self.h_norms.iter().find(|(ss, _)| *ss == s).map(|(_, n)| *n)
    }
}

/// What [`record`] computes.
#[derive(Debug, Clone)]
pub struct RecordConfig {
    /// Sobolev orders to track.
    pub s_list: Vec<u32>,
    /// Peak prominence as a fraction of max(u).
    pub prominence_fraction: f64,
}

impl Default for RecordConfig {
    fn default() -> Self {
        RecordConfig { s_list: vec![1, 2], prominence_fraction: 0.01 }
    }
}

/// Assemble all configured observables for one state.
pub fn record(state: &SimState, cfg: &RecordConfig) -> Result<TraceRecord> {
    let u = &state.u;
    let cm_plain = center_of_mass(u, CmMode::Plain)?;
    let cm_circular = center_of_mass(u, CmMode::Circular)?;
    let mut h_norms = Vec::with_capacity(cfg.s_list.len());
    for &s in &cfg.s_list {
        h_norms.push((s, spectral::sobolev_norm(u, s)?));
    }
    let u_max = u.max();
    let prominence = (cfg.prominence_fraction * u_max).max(1e-300);
    Ok(TraceRecord {
        time: state.time,
        mass_u: state.mass_u,
        cm_plain,
        cm_circular,
        u_min: u.min(),
        u_max,
        h_norms,
        peak_count: peak_count(u, prominence),
    })
}

/// Least-squares drift speed of cm_plain vs. time, restricted to records
/// whose cm lies inside `window`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit {
    /// Slope in um/s.
    pub speed: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Minimum number of in-window records for a fit.
pub const SPEED_FIT_MIN_POINTS: usize = 10;

pub fn speed_fit(trace: &[TraceRecord], window: (f64, f64)) -> Result<SpeedFit> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|r| r.cm_plain >= window.0 && r.cm_plain <= window.1)
        .map(|r| (r.time, r.cm_plain))
        .collect();
    if pts.len() < SPEED_FIT_MIN_POINTS {
        return Err(McasError::InsufficientData { found: pts.len(), need: SPEED_FIT_MIN_POINTS });
    }
    Ok(fit_line(&pts))
}

/// Plain least-squares line fit; r^2 defined as 1 for a perfectly flat or
/// perfectly reproduced dataset.
pub fn fit_line(pts: &[(f64, f64)]) -> SpeedFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    SpeedFit { speed: slope, r_squared, n_points: pts.len() }
}

/// Intercept of the least-squares line through `pts` (used for the
/// speed-vs-alpha fit).
pub fn fit_line_full(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let fit = fit_line(pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    (fit.speed, my - fit.speed * mx, fit.r_squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn bump(g: GridSpec, center: f64, width: f64) -> Field {
        // Periodic Gaussian bump via image sums.
        Field::from_fn(g, |x, _| {
            let mut v = 0.0;
            for img in -2..=2 {
                let d = x - center + img as f64 * g.extent();
                v += (-d * d / (2.0 * width * width)).exp();
            }
            v
        })
    }

    #[test]
    fn cm_of_symmetric_bump() {
        let g = GridSpec::default_1d();
        let f = bump(g, 3.0, 0.4);
        let h = g.spacing();
        for mode in [CmMode::Plain, CmMode::Circular] {
            let cm = center_of_mass(&f, mode).unwrap();
            assert!((cm - 3.0).abs() < h, "{mode:?}: {cm}");
        }
    }

    #[test]
    fn cm_of_uniform_field_plain() {
        let g = GridSpec::default_1d();
        let f = Field::constant(g, 0.7);
        let cm = center_of_mass(&f, CmMode::Plain).unwrap();
        // Node-centered coordinates: mean of x_j = (L - h)/2.
        let expected = (10.0 - g.spacing()) / 2.0;
        assert!((cm - expected).abs() < 1e-10);
        assert!((cm - 5.0).abs() < g.spacing());
    }

    #[test]
    fn cm_circular_survives_seam_straddle() {
        let g = GridSpec::default_1d();
        let f = bump(g, 0.1, 0.3);
        let circ = center_of_mass(&f, CmMode::Circular).unwrap();
        let d = (circ - 0.1).abs().min((circ - 10.1).abs());
        assert!(d < g.spacing(), "circular cm {circ}");
        // The plain CM lands deep in the interior: that is why circular exists.
        let plain = center_of_mass(&f, CmMode::Plain).unwrap();
        assert!((plain - 0.1).abs() > 1.0, "plain cm {plain}");
    }

    #[test]
    fn cm_translation_covariance() {
        let g = GridSpec::default_1d();
        let h = g.spacing();
        let base = bump(g, 2.0, 0.5);
        let cm0 = center_of_mass(&base, CmMode::Circular).unwrap();
        // Shift by an integer number of cells.
        for shift_cells in [5usize, 40, 130] {
            let n = g.points_per_axis();
            let mut vals = vec![0.0; n];
            for i in 0..n {
                vals[(i + shift_cells) % n] = base.values()[i];
            }
            let shifted = Field::from_values(g, vals).unwrap();
            let cm = center_of_mass(&shifted, CmMode::Circular).unwrap();
            let expect = (cm0 + shift_cells as f64 * h).rem_euclid(10.0);
            let d = (cm - expect).abs();
            let d = d.min(10.0 - d);
            assert!(d < h, "shift {shift_cells}: {cm} vs {expect}");
        }
    }

    #[test]
    fn cm_zero_mass_is_error() {
        let g = GridSpec::default_1d();
        let f = Field::zeros(g);
        assert!(matches!(center_of_mass(&f, CmMode::Plain), Err(McasError::UndefinedCm(_))));
    }

    #[test]
    fn peak_count_cases() {
        let g = GridSpec::default_1d();
        assert_eq!(peak_count(&bump(g, 3.0, 0.4), 0.01), 1);
        assert_eq!(peak_count(&Field::constant(g, 2.0), 0.01), 0);
        let two = Field::from_fn(g, |x, _| {
            let d1 = x - 2.5;
            let d2 = x - 7.5;
            (-d1 * d1 / 0.3).exp() + (-d2 * d2 / 0.3).exp()
        });
        assert_eq!(peak_count(&two, 0.01), 2);
    }

    #[test]
    fn peak_count_ignores_small_ripples() {
        let g = GridSpec::default_1d();
        let f = Field::from_fn(g, |x, _| {
            let d = x - 5.0;
            (-d * d / 2.0).exp() + 1e-4 * (x * 20.0).sin()
        });
        assert_eq!(peak_count(&f, 0.01), 1);
    }

    #[test]
    fn speed_fit_exact_line() {
        let recs: Vec<TraceRecord> = (0..200)
            .map(|i| {
                let t = i as f64 * 10.0;
                TraceRecord {
                    time: t,
                    mass_u: 5.0,
                    cm_plain: 1.0 + 0.001 * t,
                    cm_circular: 1.0 + 0.001 * t,
                    u_min: 0.0,
                    u_max: 1.0,
                    h_norms: vec![],
                    peak_count: 1,
                }
            })
            .collect();
        let fit = speed_fit(&recs, (1.0, 2.5)).unwrap();
        assert!((fit.speed - 0.001).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_fit_constant_trace() {
        let recs: Vec<TraceRecord> = (0..50)
            .map(|i| TraceRecord {
                time: i as f64,
                mass_u: 5.0,
                cm_plain: 2.0,
                cm_circular: 2.0,
                u_min: 0.0,
                u_max: 1.0,
                h_norms: vec![],
                peak_count: 1,
            })
            .collect();
        let fit = speed_fit(&recs, (1.0, 2.5)).unwrap();
        assert_eq!(fit.speed, 0.0);
    }

    #[test]
    fn speed_fit_needs_enough_points() {
        let recs: Vec<TraceRecord> = (0..5)
            .map(|i| TraceRecord {
                time: i as f64,
                mass_u: 5.0,
                cm_plain: 1.5,
                cm_circular: 1.5,
                u_min: 0.0,
                u_max: 1.0,
                h_norms: vec![],
                peak_count: 1,
            })
            .collect();
        assert!(matches!(
            speed_fit(&recs, (1.0, 2.5)),
            Err(McasError::InsufficientData { .. })
        ));
    }

    #[test]
    fn speed_fit_resampling_invariance() {
        let make = |every: f64| -> Vec<TraceRecord> {
            let n = (1000.0 / every) as usize;
            (0..=n)
                .map(|i| {
                    let t = i as f64 * every;
                    TraceRecord {
                        time: t,
                        mass_u: 5.0,
                        cm_plain: 1.0 + 0.0012 * t,
                        cm_circular: 1.0 + 0.0012 * t,
                        u_min: 0.0,
                        u_max: 1.0,
                        h_norms: vec![],
                        peak_count: 1,
                    }
                })
                .collect()
        };
        let a = speed_fit(&make(10.0), (1.0, 2.5)).unwrap();
        let b = speed_fit(&make(5.0), (1.0, 2.5)).unwrap();
        assert!((a.speed - b.speed).abs() < 1e-6);
    }

    #[test]
    fn record_on_uniform_state() {
        let g = GridSpec::default_1d();
        let state = crate::integrator::SimState::new(Field::constant(g, 0.5), 0.0);
        let rec = record(&state, &RecordConfig::default()).unwrap();
        assert!((rec.cm_plain - 5.0).abs() < g.spacing());
        assert_eq!(rec.peak_count, 0);
        assert!((rec.mass_u - 5.0).abs() < 1e-10);
    }

    #[test]
    fn record_h0_matches_l2() {
        let g = GridSpec::default_1d();
        let f = bump(g, 4.0, 0.6);
        let l2 = f.l2_norm();
        let state = crate::integrator::SimState::new(f, 0.0);
        let cfg = RecordConfig { s_list: vec![0, 1], ..Default::default() };
        let rec = record(&state, &cfg).unwrap();
        assert!((rec.h_norm(0).unwrap() - l2).abs() < 1e-10 * l2);
    }
}
