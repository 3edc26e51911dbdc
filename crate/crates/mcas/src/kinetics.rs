//! Reaction terms F(u,v) = h(u)v - g(u)u, pheromone profiles f(x) and the
//! assembled right-hand side of the evolution equation
//!
//!   du/dt = (a u^2 + alpha f(x)) * (M - U(t)) / |T| - b u + k lap(u),
//!
//! where the substrate has been closed out as v(t) = (M - U(t)) / |T|.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{McasError, Result};
use crate::grid::{Field, GridSpec};

/// Which reaction kinetics to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticsVariant {
    /// h(u) = a u^2, g(u) = b.
    Simplest,
    /// h(u) = a u^2 + c u, g(u) = b.
    Goryachev,
    /// h(u) = 1, g(u) = b / (1 + u^2).
    Otsuji,
    /// h(u) = a u^2 + alpha f(x), g(u) = b.
    PheromoneModified,
}

/// Parameters of the reaction term. Defaults are the production values:
/// a = 1 (um^2), b = 1 (1/s), k = 0.01 (um^2/s), M = 10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsSpec {
    pub variant: KineticsVariant,
    /// Activation strength (um^2).
    pub a: f64,
    /// Depletion rate (1/s).
    pub b: f64,
    /// Linear activation coefficient (goryachev only).
    pub c: f64,
    /// Pheromone strength (1/s); production range 0.5 - 3.
    pub alpha: f64,
    /// Diffusion coefficient of u (um^2/s).
    pub k: f64,
    /// Total conserved mass of u + v.
    pub total_mass: f64,
    /// When true, the 1/|T| factor is absorbed into a and alpha
    /// (the rescaled form of the equation; b and k should be 1).
    pub rescaled: bool,
}

impl Default for KineticsSpec {
    fn default() -> Self {
        KineticsSpec {
            variant: KineticsVariant::PheromoneModified,
            a: 1.0,
            b: 1.0,
            c: 0.0,
            alpha: 2.0,
            k: 0.01,
            total_mass: 10.0,
            rescaled: false,
        }
    }
}

impl KineticsSpec {
    /// The rescaled form: depletion and diffusion normalized to 1 and the
    /// domain measure absorbed into the activation coefficients.
    pub fn rescaled_preset(a: f64, alpha: f64, total_mass: f64) -> Self {
        KineticsSpec {
            variant: KineticsVariant::PheromoneModified,
            a,
            b: 1.0,
            c: 0.0,
            alpha,
            k: 1.0,
            total_mass,
            rescaled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("k", self.k), ("M", self.total_mass)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(McasError::config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(McasError::config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    fn h(&self, u: f64, f_x: f64) -> f64 {
        match self.variant {
            KineticsVariant::Simplest => self.a * u * u,
            KineticsVariant::Goryachev => self.a * u * u + self.c * u,
            KineticsVariant::Otsuji => 1.0,
            KineticsVariant::PheromoneModified => self.a * u * u + self.alpha * f_x,
        }
    }

    fn g(&self, u: f64) -> f64 {
        match self.variant {
            KineticsVariant::Otsuji => self.b / (1.0 + u * u),
            _ => self.b,
        }
    }

    /// F(u,v) at one point; `f_x` is the pheromone level there.
    pub fn reaction_rate(&self, u: f64, v: f64, f_x: f64) -> f64 {
        self.h(u, f_x) * v - self.g(u) * u
    }
}

/// Spatial pheromone signal f(x) along the cell boundary. Evaluations are
/// periodic in x with period `extent` and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub enum PheromoneProfile {
    Zero,
    /// Trace of a 2D heat kernel along the cell boundary:
    /// f_h(x) = beta/(4 pi gamma t) exp(-(L^2 + r^2 - 2 L r cos((x-x_peak)/r)) / (4 gamma t))
    /// with cell radius r = extent/(2 pi).
    HeatKernel {
        /// Response strength.
        beta: f64,
        /// Diffusion coefficient of the source.
        gamma: f64,
        /// Diffusion time in the kernel.
        source_time: f64,
        /// Distance of the source.
        source_distance: f64,
        /// Location of maximum concentration.
        x_peak: f64,
    },
    /// Tent profile: rises linearly from 0 at x=0 to `peak_value` at `x_peak`,
    /// falls back to 0 at x=extent. Defaults reproduce
    /// f(x) = (2/5)x on [0,5], 4 - (2/5)x on [5,10].
    PiecewiseLinear { x_peak: f64, peak_value: f64 },
    /// Uniform samples over [0, extent), evaluated by periodic linear
    /// interpolation.
    Tabulated { samples: Vec<f64> },
}

impl PheromoneProfile {
    pub fn default_heat_kernel() -> Self {
        PheromoneProfile::HeatKernel {
            beta: 1500.0,
            gamma: 10.0,
            source_time: 1.0,
            source_distance: 10.0,
            x_peak: 5.0,
        }
    }

    pub fn default_piecewise_linear() -> Self {
        PheromoneProfile::PiecewiseLinear { x_peak: 5.0, peak_value: 2.0 }
    }

    pub fn validate(&self, extent: f64) -> Result<()> {
        match self {
            PheromoneProfile::Zero => Ok(()),
            PheromoneProfile::HeatKernel { beta, gamma, source_time, source_distance, x_peak } => {
                for (name, v) in [
                    ("beta", *beta),
                    ("gamma", *gamma),
                    ("source_time", *source_time),
                    ("source_distance", *source_distance),
                ] {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(McasError::config(format!(
                            "pheromone {name} must be positive, got {v}"
                        )));
                    }
                }
                if *x_peak < 0.0 || *x_peak >= extent {
                    return Err(McasError::config(format!(
                        "x_peak must lie in [0, {extent}), got {x_peak}"
                    )));
                }
                Ok(())
            }
            PheromoneProfile::PiecewiseLinear { x_peak, peak_value } => {
                if *x_peak <= 0.0 || *x_peak >= extent {
                    return Err(McasError::config(format!(
                        "x_peak must lie in (0, {extent}), got {x_peak}"
                    )));
                }
                if !(*peak_value >= 0.0) {
                    return Err(McasError::config("peak_value must be non-negative".to_string()));
                }
                Ok(())
            }
            PheromoneProfile::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(McasError::config("tabulated profile needs at least 2 samples".to_string()));
                }
                if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(McasError::config(
                        "tabulated profile values must be finite and non-negative".to_string(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Evaluate f at coordinate x on a cell of the given extent.
    pub fn eval(&self, x: f64, extent: f64) -> f64 {
        let x = x.rem_euclid(extent);
        match self {
            PheromoneProfile::Zero => 0.0,
            PheromoneProfile::HeatKernel { beta, gamma, source_time, source_distance, x_peak } => {
                let r = extent / (2.0 * PI);
                let phi = (x - x_peak) / r;
                let d2 = source_distance * source_distance + r * r
                    - 2.0 * source_distance * r * phi.cos();
                beta / (4.0 * PI * gamma * source_time)
                    * (-d2 / (4.0 * gamma * source_time)).exp()
            }
            PheromoneProfile::PiecewiseLinear { x_peak, peak_value } => {
                if x <= *x_peak {
                    peak_value * x / x_peak
                } else {
                    peak_value * (extent - x) / (extent - x_peak)
                }
            }
            PheromoneProfile::Tabulated { samples } => {
                let n = samples.len();
                let t = x / extent * n as f64;
                let i = t.floor() as usize % n;
                let frac = t - t.floor();
                samples[i] * (1.0 - frac) + samples[(i + 1) % n] * frac
            }
        }
    }
}

/// One evaluation of the right-hand side, plus per-call metadata.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub field: Field,
    /// Set when U(t) exceeded M; the evolution continues but keeps the flag.
    pub mass_overflow: bool,
}

/// A kinetics spec bound to a grid, with the pheromone profile sampled once
/// at the nodes (f is time-independent).
#[derive(Debug, Clone)]
pub struct System {
    grid: GridSpec,
    spec: KineticsSpec,
    profile: PheromoneProfile,
    pheromone_field: Field,
}

impl System {
    pub fn new(grid: GridSpec, spec: KineticsSpec, profile: PheromoneProfile) -> Result<Self> {
        spec.validate()?;
        profile.validate(grid.extent())?;
        // In 2D the profile varies along axis 0 only.
        let extent = grid.extent();
        let pheromone_field = Field::from_fn(grid, |x, _| profile.eval(x, extent));
        pheromone_field.check_finite(0.0)?;
        Ok(System { grid, spec, profile, pheromone_field })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spec(&self) -> &KineticsSpec {
        &self.spec
    }

    pub fn profile(&self) -> &PheromoneProfile {
        &self.profile
    }

    pub fn pheromone_field(&self) -> &Field {
        &self.pheromone_field
    }

    /// Same system with the pheromone switched off (used for equilibration).
    pub fn without_pheromone(&self) -> System {
        let mut spec = self.spec;
        spec.alpha = 0.0;
        System {
            grid: self.grid,
            spec,
            profile: self.profile.clone(),
            pheromone_field: self.pheromone_field.clone(),
        }
    }

    /// Substrate level for a given activator mass: v = (M - U) / |T|
    /// (without the measure factor in the rescaled form).
    pub fn substrate_level(&self, mass_u: f64) -> f64 {
        let depletion = self.spec.total_mass - mass_u;
        if self.spec.rescaled {
            depletion
        } else {
            depletion / self.grid.domain_measure()
        }
    }

    /// Right-hand side of the evolution equation for the field `u` with total
    /// mass `mass_u`. The nonlocal factor is computed once per call.
    pub fn rhs(&self, u: &Field, mass_u: f64, diffusion: bool) -> RhsEval {
        let v = self.substrate_level(mass_u);
        let mass_overflow = mass_u > self.spec.total_mass;
        let mut out = self.reaction(u, v);
        if diffusion && self.spec.k != 0.0 {
            let lap = u.laplacian();
            let k = self.spec.k;
            for (o, l) in out.values_mut().iter_mut().zip(lap.values()) {
                *o += k * l;
            }
        }
        RhsEval { field: out, mass_overflow }
    }

    /// Reaction-only part (the explicit half of the IMEX split).
    pub fn reaction(&self, u: &Field, v: f64) -> Field {
        let spec = &self.spec;
        let mut out = Field::zeros(self.grid);
        for ((o, &uu), &fx) in out
            .values_mut()
            .iter_mut()
            .zip(u.values())
            .zip(self.pheromone_field.values())
        {
            *o = spec.reaction_rate(uu, v, fx);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::QuadratureRule;

    #[test]
    fn piecewise_linear_values() {
        let p = PheromoneProfile::default_piecewise_linear();
        assert!((p.eval(5.0, 10.0) - 2.0).abs() < 1e-14);
        assert!(p.eval(0.0, 10.0).abs() < 1e-14);
        assert!(p.eval(10.0, 10.0).abs() < 1e-14);
        assert!((p.eval(2.5, 10.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_profile_is_zero() {
        let p = PheromoneProfile::Zero;
        for x in [0.0, 1.3, 9.99] {
            assert_eq!(p.eval(x, 10.0), 0.0);
        }
    }

    #[test]
    fn heat_kernel_peak_value() {
        // Direct evaluation of the closed form at x = x_peak with defaults:
        // (beta / (4 pi gamma t)) * exp(-(L - r)^2 / (4 gamma t)), r = 10/(2 pi).
        let p = PheromoneProfile::default_heat_kernel();
        let r = 10.0 / (2.0 * PI);
        let expected = 1500.0 / (40.0 * PI) * (-(10.0 - r) * (10.0 - r) / 40.0).exp();
        let got = p.eval(5.0, 10.0);
        assert!((got - expected).abs() < 1e-12 * expected);
        // Sanity: ~2.04 per hand evaluation.
        assert!((got - 2.04).abs() < 0.01, "got {got}");
    }

    #[test]
    fn heat_kernel_peaks_at_x_peak() {
        let p = PheromoneProfile::default_heat_kernel();
        let peak = p.eval(5.0, 10.0);
        for i in 0..200 {
            let x = i as f64 * 0.05;
            assert!(p.eval(x, 10.0) <= peak + 1e-12);
        }
    }

    #[test]
    fn heat_kernel_symmetric_about_peak() {
        let p = PheromoneProfile::default_heat_kernel();
        for i in 1..50 {
            let d = i as f64 * 0.07;
            let a = p.eval(5.0 + d, 10.0);
            let b = p.eval(5.0 - d, 10.0);
            assert!((a - b).abs() < 1e-12 * a.max(1e-30));
        }
    }

    #[test]
    fn reaction_rate_variants() {
        let mut spec = KineticsSpec { variant: KineticsVariant::Simplest, ..Default::default() };
        assert_eq!(spec.reaction_rate(0.0, 3.0, 0.0), 0.0);

        spec.variant = KineticsVariant::PheromoneModified;
        spec.alpha = 2.0;
        // (a*0 + alpha*f) * v - b*0 with f=2, v=1 -> 4
        assert!((spec.reaction_rate(0.0, 1.0, 2.0) - 4.0).abs() < 1e-14);

        spec.variant = KineticsVariant::Goryachev;
        spec.c = 1.0;
        // (u^2 + c u) v - b u = (1+1)*1 - 1 = 1
        assert!((spec.reaction_rate(1.0, 1.0, 0.0) - 1.0).abs() < 1e-14);

        spec.variant = KineticsVariant::Otsuji;
        // v - b u/(1+u^2) = 1 - 1*2/(1+4)
        assert!((spec.reaction_rate(2.0, 1.0, 0.0) - (1.0 - 2.0 / 5.0)).abs() < 1e-14);
    }

    #[test]
    fn pheromone_modified_with_zero_alpha_equals_simplest() {
        let pm = KineticsSpec {
            variant: KineticsVariant::PheromoneModified,
            alpha: 0.0,
            ..Default::default()
        };
        let simplest = KineticsSpec { variant: KineticsVariant::Simplest, ..Default::default() };
        for u in [0.0, 0.3, 1.7, 6.0] {
            for v in [0.0, 0.2, 1.0] {
                assert_eq!(pm.reaction_rate(u, v, 1.23), simplest.reaction_rate(u, v, 0.0));
            }
        }
    }

    #[test]
    fn rhs_zero_state_is_zero() {
        let g = GridSpec::default_1d();
        let sys = System::new(g, KineticsSpec::default(), PheromoneProfile::Zero).unwrap();
        let u = Field::zeros(g);
        let r = sys.rhs(&u, 0.0, true);
        assert_eq!(r.field.max_norm(), 0.0);
        assert!(!r.mass_overflow);
    }

    #[test]
    fn rhs_uniform_full_mass_is_pure_decay() {
        // u = M/|T| everywhere: activation dies (M - U = 0), diffusion is zero,
        // so rhs = -b u.
        let g = GridSpec::default_1d();
        let spec = KineticsSpec::default();
        let sys = System::new(g, spec, PheromoneProfile::default_piecewise_linear()).unwrap();
        let u = Field::constant(g, spec.total_mass / g.domain_measure());
        let mass = u.integrate(QuadratureRule::Trapezoid);
        assert!((mass - spec.total_mass).abs() < 1e-10);
        let r = sys.rhs(&u, mass, true);
        for (rv, uv) in r.field.values().iter().zip(u.values()) {
            assert!((rv + spec.b * uv).abs() < 1e-12);
        }
    }

    #[test]
    fn rhs_matches_scalar_oracle() {
        // Independent per-node re-implementation of the full right-hand side.
        let g = GridSpec::new(1, 10.0, 64).unwrap();
        let spec = KineticsSpec { alpha: 2.0, ..Default::default() };
        let profile = PheromoneProfile::default_piecewise_linear();
        let sys = System::new(g, spec, profile.clone()).unwrap();

        let u = Field::from_fn(g, |x, _| (-(x - 3.0) * (x - 3.0)).exp() + 0.1);
        let mass = u.integrate(QuadratureRule::Trapezoid);
        let got = sys.rhs(&u, mass, true);

        let n = g.points_per_axis();
        let h = g.spacing();
        let v = (spec.total_mass - mass) / 10.0;
        for i in 0..n {
            let x = i as f64 * h;
            let uu = u.values()[i];
            let lap = (u.values()[(i + n - 1) % n] - 2.0 * uu + u.values()[(i + 1) % n]) / (h * h);
            let expect = (spec.a * uu * uu + spec.alpha * profile.eval(x, 10.0)) * v
                - spec.b * uu
                + spec.k * lap;
            assert!(
                (got.field.values()[i] - expect).abs() < 1e-12,
                "node {i}: {} vs {expect}",
                got.field.values()[i]
            );
        }
    }

    #[test]
    fn rhs_nonnegative_where_u_is_zero() {
        let g = GridSpec::new(1, 10.0, 64).unwrap();
        let spec = KineticsSpec { alpha: 1.5, ..Default::default() };
        let sys = System::new(g, spec, PheromoneProfile::default_piecewise_linear()).unwrap();
        // u zero on half the domain, bump elsewhere; U < M.
        let u = Field::from_fn(g, |x, _| if x > 5.0 { (x - 5.0) * (10.0 - x) * 0.1 } else { 0.0 });
        let mass = u.integrate(QuadratureRule::Trapezoid);
        assert!(mass < spec.total_mass);
        let r = sys.rhs(&u, mass, false);
        for (rv, uv) in r.field.values().iter().zip(u.values()) {
            if *uv == 0.0 {
                assert!(*rv >= 0.0);
            }
        }
    }

    #[test]
    fn rhs_flags_mass_overflow() {
        let g = GridSpec::default_1d();
        let spec = KineticsSpec::default();
        let sys = System::new(g, spec, PheromoneProfile::Zero).unwrap();
        let u = Field::constant(g, 2.0 * spec.total_mass / g.domain_measure());
        let mass = u.integrate(QuadratureRule::Trapezoid);
        assert!(sys.rhs(&u, mass, true).mass_overflow);
    }

    #[test]
    fn mass_budget_matches_reaction_integral() {
        // d/dt U(t) predicted by integrate(rhs) equals the integral of the
        // reaction terms: the discrete Laplacian sums to zero on the torus.
        let g = GridSpec::new(1, 10.0, 128).unwrap();
        let spec = KineticsSpec { alpha: 2.0, ..Default::default() };
        let sys = System::new(g, spec, PheromoneProfile::default_piecewise_linear()).unwrap();
        let u = Field::from_fn(g, |x, _| (-(x - 2.0) * (x - 2.0) / 0.5).exp());
        let mass = u.integrate(QuadratureRule::Trapezoid);
        let with_diff = sys.rhs(&u, mass, true).field.integrate(QuadratureRule::Trapezoid);
        let reaction_only = sys.rhs(&u, mass, false).field.integrate(QuadratureRule::Trapezoid);
        assert!((with_diff - reaction_only).abs() < 1e-10);
    }
}
