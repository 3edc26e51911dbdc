//! Time advancement: an adaptive IMEX multistep scheme (implicit diffusion,
//! explicit reaction) as the production stepper, a fixed-step classical RK4
//! as an independent cross-check, plus steady-state equilibration.

use crate::error::{McasError, Result};
use crate::grid::{Field, QuadratureRule};
use crate::kinetics::System;
use crate::solver;
use crate::spectral;

/// Relative undershoot tolerated before a negative minimum counts as an
/// integrity failure.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;

/// Simulation state: the activator field, current time and the cached total
/// mass U(t) = integrate(u).
#[derive(Debug, Clone)]
pub struct SimState {
    pub u: Field,
    pub time: f64,
    pub mass_u: f64,
    pub step_count: u64,
}

impl SimState {
    pub fn new(u: Field, time: f64) -> Self {
        let mass_u = u.integrate(QuadratureRule::Trapezoid);
        SimState { u, time, mass_u, step_count: 0 }
    }

    /// Recompute the cached mass and check the field invariants.
    pub fn refresh_and_check(&mut self) -> Result<()> {
        self.u.check_finite(self.time)?;
        self.mass_u = self.u.integrate(QuadratureRule::Trapezoid);
        let max = self.u.max();
        let min = self.u.min();
        // The relative bound is meaningless once the whole field has decayed
        // to solver-tolerance level; 1e-8 in absolute terms is still far
        // below any physically meaningful amplitude here.
        if min < -(NEGATIVITY_TOLERANCE * max.max(0.0)).max(1e-8) {
            return Err(McasError::Integrity {
                time: self.time,
                message: format!("negative undershoot: min(u)={min:.3e}, max(u)={max:.3e}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ImexBdf2,
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy)]
pub struct StepperConfig {
    pub method: Method,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub diffusion: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            method: Method::ImexBdf2,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 10.0,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            diffusion: true,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(McasError::config(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(McasError::config("tolerances must be positive".to_string()));
        }
        Ok(())
    }
}

/// Multistep history: the state one (sub)step back and its explicit term.
struct History {
    prev_u: Field,
    prev_e: Field,
    prev_dt: f64,
}

/// Adaptive IMEX stepper. The reaction (with the nonlocal factor frozen at
/// each sub-step's start) is explicit; k*lap(u) is implicit.
pub struct ImexStepper<'a> {
    system: &'a System,
    cfg: StepperConfig,
    dt: f64,
    history: Option<History>,
    mass_overflow: bool,
}

impl<'a> ImexStepper<'a> {
    pub fn new(system: &'a System, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ImexStepper { system, cfg, dt: cfg.dt_init, history: None, mass_overflow: false })
    }

    /// Whether U(t) > M was observed at any explicit-term evaluation.
    pub fn mass_overflow_seen(&self) -> bool {
        self.mass_overflow
    }

    pub fn current_dt(&self) -> f64 {
        self.dt
    }

    /// Solve (a0 I - c lap) x = rhs, consuming rhs.
    fn implicit_solve(&self, mut rhs: Field, a0: f64, c: f64) -> Field {
        if !self.cfg.diffusion || c == 0.0 {
            for v in rhs.values_mut() {
                *v /= a0;
            }
            return rhs;
        }
        match rhs.grid().dim() {
            1 => {
                let h = rhs.grid().spacing();
                let e = -c / (h * h);
                let d = a0 - 2.0 * e;
                solver::solve_cyclic_const(d, e, rhs.values_mut());
                rhs
            }
            _ => spectral::solve_helmholtz_2d(&rhs, a0, c),
        }
    }

    /// One sub-step of size `h` from (u_n, e_n). With history this is the
    /// variable-step two-step BDF with explicit extrapolation of the reaction;
    /// without, a single implicit-Euler bootstrap step.
    fn substep(&self, u_n: &Field, e_n: &Field, hist: Option<(&Field, &Field, f64)>, h: f64) -> Field {
        let c = h * self.system.spec().k;
        match hist {
            None => {
                let mut rhs = u_n.clone();
                for (r, e) in rhs.values_mut().iter_mut().zip(e_n.values()) {
                    *r += h * e;
                }
                self.implicit_solve(rhs, 1.0, c)
            }
            Some((u_prev, e_prev, dt_prev)) => {
                let w = h / dt_prev;
                let a0 = (1.0 + 2.0 * w) / (1.0 + w);
                let cu_n = 1.0 + w;
                let cu_prev = w * w / (1.0 + w);
                let ce_n = 1.0 + w;
                let ce_prev = w;
                let mut rhs = Field::zeros(*u_n.grid());
                for i in 0..rhs.values().len() {
                    rhs.values_mut()[i] = cu_n * u_n.values()[i] - cu_prev * u_prev.values()[i]
                        + h * (ce_n * e_n.values()[i] - ce_prev * e_prev.values()[i]);
                }
                self.implicit_solve(rhs, a0, c)
            }
        }
    }

    fn explicit_term(&mut self, u: &Field, mass: f64) -> Field {
        if mass > self.system.spec().total_mass {
            if !self.mass_overflow {
                log::warn!("mass overflow: U={mass:.6} exceeds M={}", self.system.spec().total_mass);
            }
            self.mass_overflow = true;
        }
        let v = self.system.substrate_level(mass);
        self.system.reaction(u, v)
    }

    /// Advance one adaptive step, at most `h_cap` in size. Updates `state`
    /// in place and returns the step actually taken.
    pub fn step(&mut self, state: &mut SimState, h_cap: f64) -> Result<f64> {
        let e_n = self.explicit_term(&state.u, state.mass_u);
        loop {
            // The event cap may push h below dt_min; that is not stiffness.
            let h = self.dt.min(h_cap);

            let hist = self
                .history
                .as_ref()
                .map(|hh| (&hh.prev_u, &hh.prev_e, hh.prev_dt));

            // Full step vs two half steps (step-doubling error estimate).
            let big = self.substep(&state.u, &e_n, hist, h);
            let mid = self.substep(&state.u, &e_n, hist, h / 2.0);
            let mid_mass = mid.integrate(QuadratureRule::Trapezoid);
            let e_mid = self.explicit_term(&mid, mid_mass);
            let small = self.substep(&mid, &e_mid, Some((&state.u, &e_n, h / 2.0)), h / 2.0);

            // Weighted RMS error norm.
            let mut acc = 0.0;
            let mut finite = true;
            for (b, s) in big.values().iter().zip(small.values()) {
                if !b.is_finite() || !s.is_finite() {
                    finite = false;
                    break;
                }
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * b.abs().max(s.abs());
                let d = (b - s) / sc;
                acc += d * d;
            }
            let err = if finite {
                (acc / big.values().len() as f64).sqrt()
            } else {
                f64::INFINITY
            };

            if err <= 1.0 {
                // Accept: keep the half-step solution; the mid state becomes
                // the multistep history.
                state.u = small;
                state.time += h;
                state.step_count += 1;
                state.refresh_and_check()?;
                self.history = Some(History { prev_u: mid, prev_e: e_mid, prev_dt: h / 2.0 });
                // Growth capped at 1.25 to keep the step-ratio of the
                // two-step formula inside its zero-stability range.
                let factor = if err > 0.0 {
                    (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 1.25)
                } else {
                    1.25
                };
                self.dt = (self.dt * factor).clamp(self.cfg.dt_min, self.cfg.dt_max);
                return Ok(h);
            }

            // Reject and shrink. Changing the step invalidates nothing: the
            // history belongs to already-accepted states.
            let factor = if err.is_finite() {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5)
            } else {
                0.1
            };
            let new_dt = h * factor;
            if new_dt < self.cfg.dt_min {
                return Err(McasError::StiffFailure { time: state.time, dt: new_dt });
            }
            self.dt = new_dt;
        }
    }
}

/// Fixed-step classical RK4 on the full method-of-lines system; recomputes
/// the nonlocal mass at every stage. Serves as the oracle for the IMEX path.
pub struct Rk4Stepper<'a> {
    system: &'a System,
    cfg: StepperConfig,
}

impl<'a> Rk4Stepper<'a> {
    pub fn new(system: &'a System, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Rk4Stepper { system, cfg })
    }

    fn eval(&self, u: &Field) -> Field {
        let mass = u.integrate(QuadratureRule::Trapezoid);
        self.system.rhs(u, mass, self.cfg.diffusion).field
    }

    pub fn step(&mut self, state: &mut SimState, h_cap: f64) -> Result<f64> {
        let h = self.cfg.dt_init.min(h_cap);
        let u = &state.u;
        let k1 = self.eval(u);
        let stage = |base: &Field, k: &Field, scale: f64| {
            let mut s = base.clone();
            for (sv, kv) in s.values_mut().iter_mut().zip(k.values()) {
                *sv += scale * kv;
            }
            s
        };
        let k2 = self.eval(&stage(u, &k1, h / 2.0));
        let k3 = self.eval(&stage(u, &k2, h / 2.0));
        let k4 = self.eval(&stage(u, &k3, h));
        let mut new_u = u.clone();
        for i in 0..new_u.values().len() {
            new_u.values_mut()[i] += h / 6.0
                * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]);
        }
        state.u = new_u;
        state.time += h;
        state.step_count += 1;
        state.refresh_and_check()?;
        Ok(h)
    }
}

enum AnyStepper<'a> {
    Imex(ImexStepper<'a>),
    Rk4(Rk4Stepper<'a>),
}

impl<'a> AnyStepper<'a> {
    fn new(system: &'a System, cfg: StepperConfig) -> Result<Self> {
        Ok(match cfg.method {
            Method::ImexBdf2 => AnyStepper::Imex(ImexStepper::new(system, cfg)?),
            Method::ExplicitRk4 => AnyStepper::Rk4(Rk4Stepper::new(system, cfg)?),
        })
    }

    fn step(&mut self, state: &mut SimState, h_cap: f64) -> Result<f64> {
        match self {
            AnyStepper::Imex(s) => s.step(state, h_cap),
            AnyStepper::Rk4(s) => s.step(state, h_cap),
        }
    }
}

/// A sampling hook invoked at fixed intervals of simulated time, including
/// both endpoints of the run.
pub struct Observer<'a> {
    every: f64,
    next_due: Option<f64>,
    last_fired: f64,
    callback: Box<dyn FnMut(&SimState) + 'a>,
}

impl<'a> Observer<'a> {
    pub fn new(every: f64, callback: impl FnMut(&SimState) + 'a) -> Self {
        assert!(every > 0.0, "sampling interval must be positive");
        Observer { every, next_due: None, last_fired: f64::NEG_INFINITY, callback: Box::new(callback) }
    }

    fn time_eps(t: f64) -> f64 {
        1e-9 * t.abs().max(1.0)
    }

    fn maybe_fire(&mut self, state: &SimState) {
        let due = *self.next_due.get_or_insert(state.time);
        if state.time >= due - Self::time_eps(state.time) {
            (self.callback)(state);
            self.last_fired = state.time;
            self.next_due = Some(due + self.every);
        }
    }

    fn next_event(&self, now: f64) -> f64 {
        self.next_due.unwrap_or(now)
    }

    fn fire_final(&mut self, state: &SimState) {
        if state.time > self.last_fired + Self::time_eps(state.time) {
            (self.callback)(state);
            self.last_fired = state.time;
        }
    }
}

/// Advance `state` to exactly `t_end`, invoking each observer at its
/// sampling interval (and at both endpoints). Propagates stepper errors.
pub fn run_until(
    state: &mut SimState,
    system: &System,
    cfg: StepperConfig,
    t_end: f64,
    observers: &mut [Observer<'_>],
) -> Result<()> {
    if t_end < state.time {
        return Err(McasError::config(format!(
            "t_end={t_end} is before current time {}",
            state.time
        )));
    }
    let mut stepper = AnyStepper::new(system, cfg)?;
    loop {
        for obs in observers.iter_mut() {
            obs.maybe_fire(state);
        }
        let eps = 1e-9 * t_end.abs().max(1.0);
        if state.time >= t_end - eps {
            break;
        }
        let mut target = t_end;
        for obs in observers.iter() {
            let due = obs.next_event(state.time);
            if due > state.time + eps {
                target = target.min(due);
            }
        }
        let h_cap = target - state.time;
        stepper.step(state, h_cap)?;
        // Snap to the event time when the cap was hit, avoiding drift.
        if (state.time - target).abs() <= eps {
            state.time = target;
        }
    }
    state.time = t_end.max(state.time);
    for obs in observers.iter_mut() {
        obs.fire_final(state);
    }
    Ok(())
}

/// Result of an equilibration run.
#[derive(Debug)]
pub struct Equilibration {
    pub state: SimState,
    /// Achieved max-norm residual of the right-hand side.
    pub residual: f64,
    /// Sampled (time, residual) history.
    pub history: Vec<(f64, f64)>,
}

/// Residual level at which equilibration switches to its fixed-step phase.
const POLISH_TRIGGER: f64 = 1e-3;
/// Fixed step for the polish phase; must keep the explicit reaction stable,
/// i.e. stay below ~1/|d(reaction)/du| at the equilibrium amplitude.
const POLISH_DT: f64 = 0.1;

/// Run the pheromone-free system until the max-norm of the right-hand side
/// drops below `tol`, or fail once `state.time` exceeds `t_cap`.
pub fn equilibrate(
    mut state: SimState,
    system: &System,
    cfg: StepperConfig,
    tol: f64,
    t_cap: f64,
) -> Result<Equilibration> {
    let quiet = system.without_pheromone();
    let mut stepper = AnyStepper::new(&quiet, cfg)?;
    let residual_of = |s: &SimState| quiet.rhs(&s.u, s.mass_u, cfg.diffusion).field.max_norm();

    let mut history = Vec::new();
    let mut residual = residual_of(&state);
    history.push((state.time, residual));
    let mut since_sample: u32 = 0;

    // Phase 1 (adaptive): the error controller accepts local errors near its
    // tolerance on every step, which keeps kicking the state off the
    // equilibrium; the residual floor is roughly tol * stiffest eigenvalue,
    // far above tight convergence targets. So only bring the state close
    // here, then hand over to a fixed-step phase.
    let trigger = tol.max(POLISH_TRIGGER);
    while residual >= trigger {
        if state.time > t_cap {
            return Err(McasError::NonConvergence { time: state.time, residual, history });
        }
        let cap = t_cap + 1.0 - state.time;
        stepper.step(&mut state, cap)?;
        residual = residual_of(&state);
        since_sample += 1;
        if since_sample >= 16 {
            history.push((state.time, residual));
            since_sample = 0;
        }
    }

    // Phase 2 (polish): a fixed-dt IMEX map has the true equilibrium as an
    // exact fixed point and contracts toward it, so the residual decays
    // without an error-control noise floor.
    if residual >= tol {
        let mut pcfg = cfg;
        pcfg.dt_init = POLISH_DT;
        pcfg.dt_max = POLISH_DT;
        pcfg.rel_tol = 1.0;
        pcfg.abs_tol = 1.0;
        let mut polisher = AnyStepper::new(&quiet, pcfg)?;
        while residual >= tol {
            if state.time > t_cap {
                return Err(McasError::NonConvergence { time: state.time, residual, history });
            }
            let cap = t_cap + 1.0 - state.time;
            polisher.step(&mut state, cap)?;
            residual = residual_of(&state);
            since_sample += 1;
            if since_sample >= 16 {
                history.push((state.time, residual));
                since_sample = 0;
            }
        }
    }
    history.push((state.time, residual));
    Ok(Equilibration { state, residual, history })
}
