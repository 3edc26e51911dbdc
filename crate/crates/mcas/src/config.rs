//! Declarative experiment configuration: a single TOML file mapping 1:1 onto
//! the simulation types, with dotted-path overrides and a content hash for
//! reproducibility. All defaults are the production parameter set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{McasError, Result};
use crate::grid::GridSpec;
use crate::integrator::{Method, StepperConfig};
use crate::kinetics::{KineticsSpec, KineticsVariant, PheromoneProfile};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub extent: f64,
    pub points_per_axis: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 1, extent: 10.0, points_per_axis: 256 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsSection {
    pub variant: KineticsVariant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub k: f64,
    pub total_mass: f64,
    pub rescaled: bool,
    /// Alpha values visited by the `sweep` subcommand.
    pub alpha_list: Vec<f64>,
}

impl Default for KineticsSection {
    fn default() -> Self {
        let s = KineticsSpec::default();
        KineticsSection {
            variant: s.variant,
            a: s.a,
            b: s.b,
            c: s.c,
            alpha: s.alpha,
            k: s.k,
            total_mass: s.total_mass,
            rescaled: s.rescaled,
            alpha_list: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PheromoneSection {
    /// One of: zero, heat_kernel, piecewise_linear, tabulated.
    pub kind: String,
    pub beta: f64,
    pub gamma: f64,
    pub source_time: f64,
    pub source_distance: f64,
    pub x_peak: f64,
    /// Peak value of the piecewise-linear tent.
    pub peak_value: f64,
    /// Samples for kind = "tabulated".
    pub samples: Vec<f64>,
}

impl Default for PheromoneSection {
    fn default() -> Self {
        PheromoneSection {
            kind: "piecewise_linear".to_string(),
            beta: 1500.0,
            gamma: 10.0,
            source_time: 1.0,
            source_distance: 10.0,
            x_peak: 5.0,
            peak_value: 2.0,
            samples: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    /// "imex_bdf2" or "explicit_rk4".
    pub method: String,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub diffusion: bool,
}

impl Default for StepperSection {
    fn default() -> Self {
        let s = StepperConfig::default();
        StepperSection {
            method: "imex_bdf2".to_string(),
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            diffusion: s.diffusion,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub bump_center: f64,
    pub bump_width: f64,
    pub bump_mass_fraction: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { bump_center: 1.0, bump_width: 0.5, bump_mass_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibrationSection {
    /// Max-norm residual tolerance.
    pub tol: f64,
    /// Give up past this simulated time.
    pub t_cap: f64,
}

impl Default for EquilibrationSection {
    fn default() -> Self {
        EquilibrationSection { tol: 1e-8, t_cap: 50_000.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    /// Sobolev orders tracked in the trace.
    pub s_list: Vec<u32>,
    /// Peak prominence as a fraction of max(u).
    pub peak_prominence_fraction: f64,
    /// CM window for drift-speed fits.
    pub speed_window: [f64; 2],
    /// Seconds dropped from the start of a trace before drift-speed fits;
    /// the pheromone switch-on redistributes mass within a few relaxation
    /// times (1/b), which would otherwise contaminate the slope.
    pub transient_skip: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            s_list: vec![1, 2],
            peak_prominence_fraction: 0.01,
            speed_window: [1.0, 2.5],
            transient_skip: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub resolutions: Vec<usize>,
    /// RK4 step sizes for the temporal-order check.
    pub dts: Vec<f64>,
    /// Horizon of the self-convergence scenario.
    pub t_end: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            resolutions: vec![64, 128, 256],
            dts: vec![0.2, 0.1, 0.05],
            t_end: 1000.0,
        }
    }
}

/// The full experiment configuration. Fully deterministic: no seeds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub t_end: f64,
    pub sample_every: f64,
    pub grid: GridSection,
    pub kinetics: KineticsSection,
    pub pheromone: PheromoneSection,
    pub stepper: StepperSection,
    pub initial: InitialSection,
    pub equilibration: EquilibrationSection,
    pub diagnostics: DiagnosticsSection,
    pub convergence: ConvergenceSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            t_end: 10_000.0,
            sample_every: 10.0,
            grid: GridSection::default(),
            kinetics: KineticsSection::default(),
            pheromone: PheromoneSection::default(),
            stepper: StepperSection::default(),
            initial: InitialSection::default(),
            equilibration: EquilibrationSection::default(),
            diagnostics: DiagnosticsSection::default(),
            convergence: ConvergenceSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Load from a TOML file and apply `key=value` overrides with dotted
    /// paths. Unknown keys, in the file or in an override, are hard errors.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            McasError::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            McasError::Config(m) => McasError::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        // Merge the file over the defaults so overrides can reference any
        // known key even when the file omits it.
        let mut tree = toml::Value::try_from(ExperimentConfig::default())
            .expect("default config serializes");
        let file_tree: toml::Value = text
            .parse()
            .map_err(|e| McasError::config(format!("TOML parse error: {e}")))?;
        merge_checked(&mut tree, &file_tree, String::new())?;
        for ov in overrides {
            apply_override(&mut tree, ov)?;
        }
        let cfg: ExperimentConfig = tree
            .try_into()
            .map_err(|e| McasError::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.kinetics_spec().validate()?;
        self.pheromone_profile()?.validate(self.grid.extent)?;
        self.stepper_config()?.validate()?;
        if !(self.t_end > 0.0) {
            return Err(McasError::config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.sample_every > 0.0) {
            return Err(McasError::config("sample_every must be positive".to_string()));
        }
        let frac = self.initial.bump_mass_fraction;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(McasError::config(format!(
                "bump_mass_fraction must lie in (0,1), got {frac}"
            )));
        }
        if !(self.initial.bump_width > 0.0) {
            return Err(McasError::config("bump_width must be positive".to_string()));
        }
        if self.diagnostics.speed_window[0] >= self.diagnostics.speed_window[1] {
            return Err(McasError::config("speed_window must be ordered".to_string()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.extent, self.grid.points_per_axis)
    }

    pub fn kinetics_spec(&self) -> KineticsSpec {
        KineticsSpec {
            variant: self.kinetics.variant,
            a: self.kinetics.a,
            b: self.kinetics.b,
            c: self.kinetics.c,
            alpha: self.kinetics.alpha,
            k: self.kinetics.k,
            total_mass: self.kinetics.total_mass,
            rescaled: self.kinetics.rescaled,
        }
    }

    pub fn pheromone_profile(&self) -> Result<PheromoneProfile> {
        match self.pheromone.kind.as_str() {
            "zero" => Ok(PheromoneProfile::Zero),
            "heat_kernel" => Ok(PheromoneProfile::HeatKernel {
                beta: self.pheromone.beta,
                gamma: self.pheromone.gamma,
                source_time: self.pheromone.source_time,
                source_distance: self.pheromone.source_distance,
                x_peak: self.pheromone.x_peak,
            }),
            "piecewise_linear" => Ok(PheromoneProfile::PiecewiseLinear {
                x_peak: self.pheromone.x_peak,
                peak_value: self.pheromone.peak_value,
            }),
            "tabulated" => Ok(PheromoneProfile::Tabulated { samples: self.pheromone.samples.clone() }),
            other => Err(McasError::config(format!("unknown pheromone kind '{other}'"))),
        }
    }

    pub fn stepper_config(&self) -> Result<StepperConfig> {
        let method = match self.stepper.method.as_str() {
            "imex_bdf2" => Method::ImexBdf2,
            "explicit_rk4" => Method::ExplicitRk4,
            other => return Err(McasError::config(format!("unknown stepper method '{other}'"))),
        };
        Ok(StepperConfig {
            method,
            dt_init: self.stepper.dt_init,
            dt_min: self.stepper.dt_min,
            dt_max: self.stepper.dt_max,
            rel_tol: self.stepper.rel_tol,
            abs_tol: self.stepper.abs_tol,
            diffusion: self.stepper.diffusion,
        })
    }

    /// Canonical TOML rendering of the resolved config.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex content hash of the resolved config (first 16 hex chars).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Merge `src` into `dst`, erroring on keys absent from `dst` (the schema
/// tree built from the defaults).
fn merge_checked(dst: &mut toml::Value, src: &toml::Value, path: String) -> Result<()> {
    match (dst, src) {
        (toml::Value::Table(d), toml::Value::Table(s)) => {
            for (k, v) in s {
                let child_path = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match d.get_mut(k) {
                    Some(slot) => merge_checked(slot, v, child_path)?,
                    None => {
                        return Err(McasError::config(format!("unknown config key '{child_path}'")))
                    }
                }
            }
            Ok(())
        }
        (d, s) => {
            *d = s.clone();
            Ok(())
        }
    }
}

/// Apply one `dotted.path=value` override. The value is parsed to match the
/// type of the existing entry; comma lists become arrays.
fn apply_override(tree: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| McasError::config(format!("override '{spec}' is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let mut node = &mut *tree;
    for part in path.split('.') {
        node = node
            .as_table_mut()
            .and_then(|t| t.get_mut(part))
            .ok_or_else(|| McasError::config(format!("override references unknown key '{path}'")))?;
    }
    *node = parse_override_value(node, raw, path)?;
    Ok(())
}

fn parse_override_value(existing: &toml::Value, raw: &str, path: &str) -> Result<toml::Value> {
    let err = |what: &str| {
        McasError::config(format!("override '{path}={raw}': cannot parse value as {what}"))
    };
    Ok(match existing {
        toml::Value::Boolean(_) => {
            toml::Value::Boolean(raw.parse().map_err(|_| err("bool"))?)
        }
        toml::Value::Integer(_) => toml::Value::Integer(raw.parse().map_err(|_| err("integer"))?),
        toml::Value::Float(_) => toml::Value::Float(raw.parse().map_err(|_| err("float"))?),
        toml::Value::String(_) => toml::Value::String(raw.to_string()),
        toml::Value::Array(a) => {
            let parts: Vec<&str> = if raw.is_empty() {
                vec![]
            } else {
                raw.split(',').map(str::trim).collect()
            };
            let int_like = a.first().map(|v| v.is_integer()).unwrap_or(false);
            let mut out = Vec::with_capacity(parts.len());
            for p in parts {
                if int_like {
                    out.push(toml::Value::Integer(p.parse().map_err(|_| err("integer list"))?));
                } else {
                    out.push(toml::Value::Float(p.parse().map_err(|_| err("float list"))?));
                }
            }
            toml::Value::Array(out)
        }
        _ => return Err(err("supported type")),
    })
}
