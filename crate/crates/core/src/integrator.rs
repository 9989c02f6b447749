//! Fixed-step integration of `ü = −∇V` with energy monitoring, collision
//! detection and brake-instant (all velocities zero) detection.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::potential::ChainModel;

/// Minimum pair distance tolerated along a trajectory.
pub const TRAJECTORY_GUARD: f64 = 1e-4;

/// `2π / (1000 ν_max)`: a thousand steps per fastest linear period.
pub fn default_dt(nu_max: f64) -> f64 {
    2.0 * std::f64::consts::PI / (1000.0 * nu_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl PhaseState {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>, time: f64) -> Self {
        assert_eq!(positions.len(), velocities.len());
        PhaseState {
            positions,
            velocities,
            time,
        }
    }

    pub fn at_rest(positions: Vec<f64>) -> Self {
        let v = vec![0.0; positions.len()];
        PhaseState::new(positions, v, 0.0)
    }

    pub fn kinetic(&self) -> f64 {
        0.5 * dot(&self.velocities, &self.velocities)
    }

    pub fn energy(&self, model: &ChainModel) -> Result<f64> {
        Ok(self.kinetic() + model.energy(&self.positions)?)
    }

    pub fn momentum(&self) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (i, v) in self.velocities.iter().enumerate() {
            p[i % 2] += v;
        }
        p
    }

    pub fn speed(&self) -> f64 {
        norm(&self.velocities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Velocity Verlet, second order and symplectic.
    #[default]
    Verlet,
    /// Fourth-order symmetric composition of three Verlet steps.
    Yoshida4,
    /// Classical Runge-Kutta; not symplectic, used for cross-checks.
    Rk4,
}

/// Stepper that caches the gradient between steps.
pub struct Integrator<'a> {
    model: &'a ChainModel,
    pub scheme: Scheme,
    pub guard: f64,
    grad: Vec<f64>,
    grad_at: Vec<f64>,
    prev: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a ChainModel, scheme: Scheme) -> Self {
        Integrator {
            model,
            scheme,
            guard: TRAJECTORY_GUARD,
            grad: vec![0.0; model.dim()],
            grad_at: Vec::new(),
            prev: Vec::with_capacity(model.dim()),
        }
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn model(&self) -> &ChainModel {
        self.model
    }

    /// Refreshes the cached gradient at `x` unless it is already there.
    fn update_gradient(&mut self, x: &[f64], time: f64) -> Result<()> {
        if self.grad_at.as_slice() == x {
            return Ok(());
        }
        let min_sq = self.model.gradient_into(x, &mut self.grad).map_err(|e| {
            self.grad_at.clear();
            match e {
                Error::Collision { i, j, distance } | Error::TrajectoryCollision { i, j, distance, .. } => {
                    Error::TrajectoryCollision { i, j, distance, time }
                }
                other => other,
            }
        })?;
        if min_sq < self.guard * self.guard {
            self.grad_at.clear();
            let (i, j, x2) = self.model.closest_pair(x);
            return Err(Error::TrajectoryCollision {
                i,
                j,
                distance: x2.sqrt(),
                time,
            });
        }
        self.grad_at.clear();
        self.grad_at.extend_from_slice(x);
        Ok(())
    }

    /// Catches pairs that pass through each other within one drift, which
    /// the end-point distance check alone would miss.
    fn check_swept(&self, x1: &[f64], time: f64) -> Result<()> {
        let x0 = &self.prev;
        let n = x1.len() / 2;
        for i in 0..n {
            for j in (i + 1)..n {
                let d0 = [x0[2 * j] - x0[2 * i], x0[2 * j + 1] - x0[2 * i + 1]];
                let d1 = [x1[2 * j] - x1[2 * i], x1[2 * j + 1] - x1[2 * i + 1]];
                let e = [d1[0] - d0[0], d1[1] - d0[1]];
                let ee = e[0] * e[0] + e[1] * e[1];
                if ee == 0.0 {
                    continue;
                }
                let tau = (-(d0[0] * e[0] + d0[1] * e[1]) / ee).clamp(0.0, 1.0);
                let dist = (d0[0] + tau * e[0]).hypot(d0[1] + tau * e[1]);
                if dist < self.guard {
                    return Err(Error::TrajectoryCollision {
                        i,
                        j,
                        distance: dist,
                        time,
                    });
                }
            }
        }
        Ok(())
    }

    fn verlet(&mut self, s: &mut PhaseState, dt: f64) -> Result<()> {
        self.update_gradient(&s.positions, s.time)?;
        let h = 0.5 * dt;
        for (v, g) in s.velocities.iter_mut().zip(&self.grad) {
            *v -= h * g;
        }
        self.prev.clear();
        self.prev.extend_from_slice(&s.positions);
        for (x, v) in s.positions.iter_mut().zip(&s.velocities) {
            *x += dt * v;
        }
        s.time += dt;
        self.check_swept(&s.positions, s.time)?;
        self.update_gradient(&s.positions, s.time)?;
        for (v, g) in s.velocities.iter_mut().zip(&self.grad) {
            *v -= h * g;
        }
        Ok(())
    }

    fn rk4(&mut self, s: &mut PhaseState, dt: f64) -> Result<()> {
        let m = s.positions.len();
        let x0 = s.positions.clone();
        let v0 = s.velocities.clone();
        let t0 = s.time;
        let mut kx = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        let mut kv = kx.clone();
        let mut x = x0.clone();
        let mut v = v0.clone();
        let frac = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage > 0 {
                for i in 0..m {
                    x[i] = x0[i] + frac[stage] * dt * kx[stage - 1][i];
                    v[i] = v0[i] + frac[stage] * dt * kv[stage - 1][i];
                }
            }
            self.update_gradient(&x, t0 + frac[stage] * dt)?;
            kx[stage].copy_from_slice(&v);
            for i in 0..m {
                kv[stage][i] = -self.grad[i];
            }
        }
        for i in 0..m {
            s.positions[i] = x0[i] + dt / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            s.velocities[i] = v0[i] + dt / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
        }
        s.time = t0 + dt;
        Ok(())
    }

    /// One step of the configured scheme.
    pub fn step(&mut self, s: &mut PhaseState, dt: f64) -> Result<()> {
        match self.scheme {
            Scheme::Verlet => self.verlet(s, dt),
            Scheme::Yoshida4 => {
                let cbrt2 = 2f64.cbrt();
                let w1 = 1.0 / (2.0 - cbrt2);
                let w0 = -cbrt2 / (2.0 - cbrt2);
                self.verlet(s, w1 * dt)?;
                self.verlet(s, w0 * dt)?;
                self.verlet(s, w1 * dt)
            }
            Scheme::Rk4 => self.rk4(s, dt),
        }
    }

    /// Advances by `duration` in `steps` equal steps (negative durations
    /// integrate backwards).
    pub fn advance(&mut self, s: &mut PhaseState, duration: f64, steps: usize) -> Result<()> {
        let dt = duration / steps as f64;
        for _ in 0..steps {
            self.step(s, dt)?;
        }
        Ok(())
    }
}

/// One velocity-Verlet step.
pub fn step_verlet(s: &PhaseState, dt: f64, model: &ChainModel) -> Result<PhaseState> {
    let mut out = s.clone();
    Integrator::new(model, Scheme::Verlet).step(&mut out, dt)?;
    Ok(out)
}

/// One classical Runge-Kutta step.
pub fn step_rk4(s: &PhaseState, dt: f64, model: &ChainModel) -> Result<PhaseState> {
    let mut out = s.clone();
    Integrator::new(model, Scheme::Rk4).step(&mut out, dt)?;
    Ok(out)
}

/// Callback invoked on sampled states during [`integrate`].
pub trait Observer {
    /// `energy` is the total energy of `state`.
    fn observe(&mut self, state: &PhaseState, energy: f64) -> Result<()>;
}

/// Records the total energy at each sample.
#[derive(Debug, Default, Clone, Serialize)]
pub struct EnergyLog {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
}

impl EnergyLog {
    /// `max |E(t) − E(0)|` over the samples.
    pub fn max_deviation(&self) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        self.energies.iter().fold(0.0, |m, e| f64::max(m, (e - e0).abs()))
    }
}

impl Observer for EnergyLog {
    fn observe(&mut self, state: &PhaseState, energy: f64) -> Result<()> {
        self.times.push(state.time);
        self.energies.push(energy);
        Ok(())
    }
}

/// Keeps sampled states so brake instants can be located afterwards with
/// [`detect_brake_instants`].
#[derive(Debug, Default, Clone)]
pub struct StateRecorder {
    pub states: Vec<PhaseState>,
}

impl Observer for StateRecorder {
    fn observe(&mut self, state: &PhaseState, _energy: f64) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

/// Writes samples as CSV rows `t,x1,y1,...,xn,yn,vx1,vy1,...,vxn,vyn,E`.
pub struct CsvDump<W: Write> {
    writer: W,
    header_written: bool,
}

impl<W: Write> CsvDump<W> {
    pub fn new(writer: W) -> Self {
        CsvDump {
            writer,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).flat_map(|j| [format!("x{j}"), format!("y{j}")]));
    cols.extend((1..=n).flat_map(|j| [format!("vx{j}"), format!("vy{j}")]));
    cols.push("E".into());
    cols.join(",")
}

impl<W: Write> Observer for CsvDump<W> {
    fn observe(&mut self, state: &PhaseState, energy: f64) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        if !self.header_written {
            writeln!(self.writer, "{}", csv_header(state.positions.len() / 2)).map_err(io)?;
            self.header_written = true;
        }
        let mut row = Vec::with_capacity(2 * state.positions.len() + 2);
        row.push(state.time);
        row.extend_from_slice(&state.positions);
        row.extend_from_slice(&state.velocities);
        row.push(energy);
        let line = row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
        writeln!(self.writer, "{line}").map_err(io)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub scheme: Scheme,
    /// Observers see every `stride`-th step (and the first and last state).
    pub stride: usize,
    pub guard: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            scheme: Scheme::Verlet,
            stride: 1,
            guard: TRAJECTORY_GUARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrationSummary {
    pub final_state: PhaseState,
    pub steps: usize,
    pub dt: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
}

/// Integrates from `s` to `t_end` with velocity Verlet, calling every
/// observer on each step.
pub fn integrate(
    s: PhaseState,
    dt: f64,
    t_end: f64,
    model: &ChainModel,
    observers: &mut [&mut dyn Observer],
) -> Result<IntegrationSummary> {
    integrate_with(s, dt, t_end, model, observers, IntegrateOptions::default())
}

/// As [`integrate`] with an explicit scheme, sampling stride and guard.
///
/// The step is shrunk slightly if needed so that a whole number of steps
/// lands exactly on `t_end`.
pub fn integrate_with(
    mut s: PhaseState,
    dt: f64,
    t_end: f64,
    model: &ChainModel,
    observers: &mut [&mut dyn Observer],
    opts: IntegrateOptions,
) -> Result<IntegrationSummary> {
    if !(dt > 0.0) || !(t_end > s.time) {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and t_end > t0, got dt = {dt}, t0 = {}, t_end = {t_end}",
            s.time
        )));
    }
    let span = t_end - s.time;
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let t0 = s.time;
    let stride = opts.stride.max(1);

    let initial_energy = s.energy(model)?;
    for o in observers.iter_mut() {
        o.observe(&s, initial_energy)?;
    }
    let mut stepper = Integrator::new(model, opts.scheme).with_guard(opts.guard);
    let mut energy = initial_energy;
    for k in 1..=steps {
        stepper.step(&mut s, h)?;
        s.time = t0 + k as f64 * h;
        if k % stride == 0 || k == steps {
            energy = s.energy(model)?;
            for o in observers.iter_mut() {
                o.observe(&s, energy)?;
            }
        }
    }
    Ok(IntegrationSummary {
        final_state: s,
        steps,
        dt: h,
        initial_energy,
        final_energy: energy,
    })
}

/// A located instant of (near-)zero velocity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrakeEvent {
    pub time: f64,
    /// Velocity norm at the located instant.
    pub min_speed: f64,
    pub state: PhaseState,
}

/// `dK/dt = v · ü = −v · ∇V`.
fn kinetic_rate(model: &ChainModel, s: &PhaseState) -> Result<f64> {
    Ok(-dot(&s.velocities, &model.gradient(&s.positions)?))
}

fn partial_step(model: &ChainModel, scheme: Scheme, s: &PhaseState, tau: f64) -> Result<PhaseState> {
    let mut out = s.clone();
    if tau != 0.0 {
        Integrator::new(model, scheme).with_guard(0.0).step(&mut out, tau)?;
        out.time = s.time + tau;
    }
    Ok(out)
}

/// All brake instants in a window of consecutive sampled states.
///
/// A sample at rest is an event by itself. Otherwise an interval on which
/// `dK/dt` turns from negative to non-negative brackets a kinetic-energy
/// minimum; it is refined by bisection, each probe reached by a single
/// partial step from the left sample.
pub fn detect_brake_instants(
    window: &[PhaseState],
    model: &ChainModel,
    scheme: Scheme,
) -> Result<Vec<BrakeEvent>> {
    let mut events = Vec::new();
    if window.is_empty() {
        return Ok(events);
    }
    let rates = window
        .iter()
        .map(|s| kinetic_rate(model, s))
        .collect::<Result<Vec<_>>>()?;
    let at_rest = |s: &PhaseState| s.velocities.iter().all(|&v| v == 0.0);
    let mut skip_next = false;
    for i in 0..window.len() {
        if at_rest(&window[i]) {
            events.push(BrakeEvent {
                time: window[i].time,
                min_speed: 0.0,
                state: window[i].clone(),
            });
            skip_next = true;
            continue;
        }
        if i + 1 == window.len() {
            break;
        }
        if skip_next {
            skip_next = false;
            continue;
        }
        let (a, b) = (&window[i], &window[i + 1]);
        if rates[i] < 0.0 && rates[i + 1] >= 0.0 && !at_rest(b) {
            let (mut lo, mut hi) = (0.0, b.time - a.time);
            let mut best = if a.speed() <= b.speed() { a.clone() } else { b.clone() };
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let probe = partial_step(model, scheme, a, mid)?;
                if probe.speed() < best.speed() {
                    best = probe.clone();
                }
                if kinetic_rate(model, &probe)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let end = partial_step(model, scheme, a, 0.5 * (lo + hi))?;
            if end.speed() <= best.speed() {
                best = end;
            }
            events.push(BrakeEvent {
                time: best.time,
                min_speed: best.speed(),
                state: best,
            });
        }
    }
    Ok(events)
}

/// The first brake instant in the window, or `None` if there is none.
pub fn detect_brake_instant(
    window: &[PhaseState],
    model: &ChainModel,
    scheme: Scheme,
) -> Result<Option<BrakeEvent>> {
    Ok(detect_brake_instants(window, model, scheme)?.into_iter().next())
}
