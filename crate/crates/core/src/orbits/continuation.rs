//! Continuation of brake-orbit branches away from their bifurcation point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::potential::ChainModel;

use super::shooting::{shoot_core, Closure, ShootOptions, ShootResult};
use super::symmetry::SymmetryBasis;
use super::BrakeOrbit;

/// Why a branch stopped.
///
/// The first four are the outcomes of the global alternative; `StepLimit`
/// and `Stalled` mean the computation stopped before any of them was seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    MaxAmplitude,
    MaxPeriod,
    Collision,
    ReturnedToBifurcationPoint,
    StepLimit,
    /// The step shrank below its minimum without a collision.
    Stalled,
}

impl Termination {
    pub fn is_global_outcome(&self) -> bool {
        matches!(
            self,
            Termination::MaxAmplitude
                | Termination::MaxPeriod
                | Termination::Collision
                | Termination::ReturnedToBifurcationPoint
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxAmplitude => "max_amplitude",
            Termination::MaxPeriod => "max_period",
            Termination::Collision => "collision",
            Termination::ReturnedToBifurcationPoint => "returned_to_bifurcation_point",
            Termination::StepLimit => "step_limit",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Corrector {
    /// Each orbit is solved at a prescribed amplitude.
    #[default]
    AmplitudePin,
    /// Each orbit is solved on the hyperplane orthogonal to the secant
    /// through the last two orbits; the amplitude may turn back.
    Arclength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub grow: f64,
    /// Grow the step after a corrector converging within this many iterations.
    pub easy_iterations: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial: 0.01,
            min: 1e-6,
            max: 0.1,
            grow: 1.3,
            easy_iterations: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub max_amplitude: f64,
    /// Bound on the full period `2T½`.
    pub max_period: f64,
    pub max_steps: usize,
    /// Amplitude below which a branch counts as back at the equilibrium.
    pub eps_min: f64,
    /// Relative distance of `T½` to `π/ν_j` for a return to be recognized.
    pub return_tol: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_amplitude: 10.0,
            max_period: 1e3,
            max_steps: 500,
            eps_min: 1e-3,
            return_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ContinuationSettings {
    pub control: StepControl,
    pub limits: Limits,
    pub corrector: Corrector,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub seed_frequency: f64,
    pub symmetry: super::SymmetryClass,
    pub label: Option<&'static str>,
    pub orbits: Vec<BrakeOrbit>,
    pub termination: Termination,
    /// The other linear frequency the branch came back to, if any.
    pub returned_to: Option<f64>,
    /// Last corrector failure message, when the branch ended on one.
    pub last_failure: Option<String>,
}

/// Continues from a converged seed orbit until a termination event.
///
/// The step is halved after a failed corrector and grown by `grow` after
/// an easy one. `known_frequencies` are the linear frequencies used to
/// recognize a return to a different bifurcation point.
pub fn continue_branch(
    model: &ChainModel,
    slice: &SymmetryBasis,
    seed: &BrakeOrbit,
    seed_frequency: f64,
    known_frequencies: &[f64],
    settings: &ContinuationSettings,
    opts: &ShootOptions,
) -> Result<Branch> {
    let control = settings.control;
    let limits = settings.limits;
    if !(control.initial > 0.0 && control.min > 0.0 && control.grow >= 1.0) {
        return Err(Error::InvalidParams("step control needs positive steps and grow >= 1".into()));
    }
    let d = slice.dim();
    let mut orbits = vec![seed.clone()];
    let mut step = control.initial;

    let finish = |orbits: Vec<BrakeOrbit>, termination, returned_to, last_failure: Option<Error>| Branch {
        seed_frequency,
        symmetry: slice.class,
        label: slice.class.family_label(),
        orbits,
        termination,
        returned_to,
        last_failure: last_failure.map(|e| e.to_string()),
    };

    loop {
        if orbits.len() > limits.max_steps {
            return Ok(finish(orbits, Termination::StepLimit, None, None));
        }
        let cur = orbits.last().unwrap();
        let z_cur = cur.z();
        let prev = (orbits.len() >= 2).then(|| &orbits[orbits.len() - 2]);

        let (z_pred, closure) = match settings.corrector {
            Corrector::AmplitudePin => {
                let target = cur.amplitude + step;
                let z_pred = match prev {
                    Some(p) => {
                        let da = cur.amplitude - p.amplitude;
                        let zp = p.z();
                        z_cur
                            .iter()
                            .zip(&zp)
                            .map(|(c, q)| c + (c - q) / da * step)
                            .collect()
                    }
                    None => {
                        let mut z: Vec<f64> = cur.reduced.iter().map(|q| q * target / cur.amplitude).collect();
                        z.push(cur.half_period);
                        z
                    }
                };
                (z_pred, Closure::pin_largest(slice, &cur.reduced, target))
            }
            Corrector::Arclength => {
                let mut tangent: Vec<f64> = match prev {
                    Some(p) => z_cur.iter().zip(p.z()).map(|(c, q)| c - q).collect(),
                    None => {
                        let mut t = cur.reduced.clone();
                        t.push(0.0);
                        t
                    }
                };
                let norm = linalg::norm(&tangent);
                tangent.iter_mut().for_each(|t| *t /= norm);
                let z_pred: Vec<f64> = z_cur.iter().zip(&tangent).map(|(z, t)| z + step * t).collect();
                let value = linalg::dot(&tangent, &z_pred);
                (z_pred, Closure { coeffs: tangent, value })
            }
        };

        let steps = opts.steps_for(z_pred[d]);
        let attempt = shoot_core(model, slice, z_pred, &closure, steps, opts).and_then(|res: ShootResult| {
            let iterations = res.iterations;
            let orbit = BrakeOrbit::from_solution(model, slice, res)?;
            // A large jump in period means the corrector landed on another branch.
            if (orbit.half_period - cur.half_period).abs() > 0.25 * cur.half_period {
                return Err(Error::NonConvergence {
                    solver: "continuation (period jump)",
                    iterations,
                    residual: orbit.residual.unwrap_or(f64::NAN),
                    last_iterate: orbit.z(),
                });
            }
            if settings.corrector == Corrector::AmplitudePin && orbit.amplitude <= cur.amplitude {
                return Err(Error::NonConvergence {
                    solver: "continuation (amplitude not increasing)",
                    iterations,
                    residual: orbit.residual.unwrap_or(f64::NAN),
                    last_iterate: orbit.z(),
                });
            }
            Ok((orbit, iterations))
        });

        match attempt {
            Ok((orbit, iterations)) => {
                if iterations <= control.easy_iterations {
                    step = (step * control.grow).min(control.max);
                }
                let amplitude = orbit.amplitude;
                let period = 2.0 * orbit.half_period;
                let returned = (amplitude < limits.eps_min)
                    .then(|| {
                        known_frequencies.iter().copied().find(|&nu| {
                            let t = std::f64::consts::PI / nu;
                            (nu - seed_frequency).abs() > 1e-9 * seed_frequency
                                && (orbit.half_period - t).abs() <= limits.return_tol * t
                        })
                    })
                    .flatten();
                let back_home = amplitude < limits.eps_min && returned.is_none() && orbits.len() > 1;
                orbits.push(orbit);
                if amplitude >= limits.max_amplitude {
                    return Ok(finish(orbits, Termination::MaxAmplitude, None, None));
                }
                if period >= limits.max_period {
                    return Ok(finish(orbits, Termination::MaxPeriod, None, None));
                }
                if let Some(nu) = returned {
                    return Ok(finish(orbits, Termination::ReturnedToBifurcationPoint, Some(nu), None));
                }
                if back_home {
                    return Ok(finish(orbits, Termination::Stalled, None, None));
                }
            }
            Err(e) => {
                step *= 0.5;
                if step < control.min {
                    let t = if e.is_collision() {
                        Termination::Collision
                    } else {
                        Termination::Stalled
                    };
                    return Ok(finish(orbits, t, None, Some(e)));
                }
            }
        }
    }
}
