//! Periodic brake orbits bifurcating from the equilibria.
//!
//! Each positive non-resonant eigenvalue `ν²` seeds a branch inside a
//! symmetry slice where it is simple: the seed is the equilibrium displaced
//! along the eigenvector, released from rest, with half period `π/ν`.
//! Shooting converges it to a true brake orbit and continuation follows the
//! branch to larger amplitude.

pub mod continuation;
pub mod shooting;
pub mod symmetry;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{Integrator, PhaseState, Scheme};
use crate::linalg::sup_norm;
use crate::potential::{ChainModel, Configuration};
use crate::spectra::{self, BifurcationCandidate, BlockLabel, SpectralReport};

pub use continuation::{continue_branch, Branch, ContinuationSettings, Corrector, Limits, StepControl, Termination};
pub use shooting::{flow_from_rest, shoot_core, Closure, ShootOptions, ShootResult};
pub use symmetry::{
    slice_for_mode, symmetry_basis, symmetry_slices, SliceMode, SymmetryBasis, SymmetryClass, SymmetryFamily,
};

/// A periodic orbit released from rest at `initial_positions`, at rest
/// again after `half_period`.
#[derive(Debug, Clone, Serialize)]
pub struct BrakeOrbit {
    pub initial_positions: Configuration,
    /// Reduced coordinates of the initial positions in the slice.
    pub reduced: Vec<f64>,
    pub half_period: f64,
    pub symmetry: SymmetryClass,
    pub energy: f64,
    /// Sup-norm distance of the initial positions from the equilibrium.
    pub amplitude: f64,
    /// Shooting residual; `None` for unconverged guesses.
    pub residual: Option<f64>,
    pub iterations: usize,
    /// Integration steps per half period used by the shooting.
    pub steps: usize,
}

impl BrakeOrbit {
    /// `(q, T½)`.
    pub fn z(&self) -> Vec<f64> {
        let mut z = self.reduced.clone();
        z.push(self.half_period);
        z
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_period
    }

    fn new(model: &ChainModel, slice: &SymmetryBasis, reduced: Vec<f64>, half_period: f64) -> Result<Self> {
        let x = slice.expand(&reduced);
        let energy = model.energy(&x)?;
        let amplitude = sup_norm(&slice.displacement(&reduced));
        Ok(BrakeOrbit {
            initial_positions: Configuration::from_flat(x)?,
            reduced,
            half_period,
            symmetry: slice.class,
            energy,
            amplitude,
            residual: None,
            iterations: 0,
            steps: 0,
        })
    }

    pub(crate) fn from_solution(model: &ChainModel, slice: &SymmetryBasis, res: ShootResult) -> Result<Self> {
        let d = slice.dim();
        let mut orbit = BrakeOrbit::new(model, slice, res.z[..d].to_vec(), res.z[d])?;
        orbit.residual = Some(res.residual);
        orbit.iterations = res.iterations;
        orbit.steps = res.steps;
        Ok(orbit)
    }
}

/// Initial guess on the branch bifurcating from `ν`: the equilibrium
/// displaced by `ε` along the eigenvector (scaled to unit sup-norm, largest
/// entry positive), at rest, with half period `π/ν`.
///
/// Fails with [`Error::Resonant`] if some `l²ν²`, `l ≥ 2`, lies within
/// `resonance_tol` of the spectrum.
pub fn seed_from_mode(
    model: &ChainModel,
    slice: &SymmetryBasis,
    nu: f64,
    eigenvector: &[f64],
    epsilon: f64,
    spectrum: &[f64],
    resonance_tol: f64,
) -> Result<BrakeOrbit> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParams(format!("seed frequency must be positive, got {nu}")));
    }
    if let Some((l, eigenvalue)) = spectra::first_resonance(nu * nu, spectrum, 2, resonance_tol) {
        return Err(Error::Resonant {
            nu_sq: nu * nu,
            l,
            eigenvalue,
        });
    }
    let (i, sign) = shooting::largest_component(eigenvector);
    let scale = sign * epsilon / eigenvector[i].abs();
    let v: Vec<f64> = eigenvector.iter().map(|x| x * scale).collect();
    BrakeOrbit::new(model, slice, slice.project_vector(&v), PI / nu)
}

/// Sup-norm of the reduced velocity after flowing the orbit for `T½`.
pub fn orbit_residual(model: &ChainModel, slice: &SymmetryBasis, orbit: &BrakeOrbit, opts: &ShootOptions) -> Result<f64> {
    let steps = if orbit.steps > 0 { orbit.steps } else { opts.steps_for(orbit.half_period) };
    let end = flow_from_rest(model, slice.expand(&orbit.reduced), orbit.half_period, steps)?;
    Ok(sup_norm(&slice.project_vector(&end.velocities)))
}

/// Converges a guess by shooting with its amplitude pinned.
pub fn shoot(model: &ChainModel, slice: &SymmetryBasis, guess: &BrakeOrbit, opts: &ShootOptions) -> Result<BrakeOrbit> {
    let closure = Closure::pin_largest(slice, &guess.reduced, guess.amplitude);
    let steps = opts.steps_for(guess.half_period);
    let res = shoot_core(model, slice, guess.z(), &closure, steps, opts)?;
    BrakeOrbit::from_solution(model, slice, res)
}

/// Checks of an orbit along one full period, sampled at 33 equally spaced
/// instants `t_k = k T½ / 16`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitDiagnostics {
    /// Velocity sup-norm at `t = 0` and `t = T½`.
    pub brake_start: f64,
    pub brake_end: f64,
    /// `max ‖x(T½ + s) − x(T½ − s)‖∞`, i.e. time-reflection symmetry.
    pub reflection_error: f64,
    /// `‖x(2T½) − x(0)‖∞`.
    pub periodicity_error: f64,
    /// Defect of the declared spatial symmetry over the samples.
    pub symmetry_error: f64,
    /// For collinear classes, the smaller defect of
    /// `x_j(t) = −x_{n+1−j}(t)` and `x_j(t) = −x_{n+1−j}(t + T½)`.
    pub reversal_symmetry_error: Option<f64>,
    /// `max |E(t) − E(0)| / |E(0)|`.
    pub energy_drift: f64,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn diagnose(model: &ChainModel, slice: &SymmetryBasis, orbit: &BrakeOrbit, opts: &ShootOptions) -> Result<OrbitDiagnostics> {
    let steps = if orbit.steps > 0 { orbit.steps } else { opts.steps_for(orbit.half_period) };
    let per_sample = steps / 16;
    let h = orbit.half_period / steps as f64;
    let mut s = PhaseState::at_rest(slice.expand(&orbit.reduced));
    let e0 = s.energy(model)?;
    let mut samples = vec![s.clone()];
    let mut drift = 0.0f64;
    let mut stepper = Integrator::new(model, Scheme::Yoshida4);
    let total = if steps % 16 == 0 { 32 } else { 2 };
    let chunk = if steps % 16 == 0 { per_sample } else { steps };
    for _ in 0..total {
        for _ in 0..chunk {
            stepper.step(&mut s, h)?;
        }
        drift = drift.max((s.energy(model)? - e0).abs());
        samples.push(s.clone());
    }
    let half = samples.len() / 2;
    let last = samples.len() - 1;
    let x = |k: usize| &samples[k].positions;

    let reflection_error = (0..=half).fold(0.0f64, |m, k| m.max(max_diff(x(half + k), x(half - k))));
    let mut symmetry_error = samples.iter().fold(0.0f64, |m, st| m.max(slice.invariance_defect(&st.positions)));
    let reflect = |p: &[f64]| -> Vec<f64> { p.iter().enumerate().map(|(i, v)| if i % 2 == 1 { -v } else { *v }).collect() };
    match slice.class.family {
        SymmetryFamily::CollinearK0 => {
            symmetry_error = samples.iter().fold(symmetry_error, |m, st| m.max(max_diff(&st.positions, &reflect(&st.positions))));
        }
        SymmetryFamily::CollinearK1 => {
            symmetry_error = (0..=half).fold(symmetry_error, |m, k| m.max(max_diff(x(k), &reflect(x(k + half)))));
        }
        _ => {}
    }
    let reversal_symmetry_error = slice.class.is_collinear().then(|| {
        let n = model.n;
        let flip = |p: &[f64]| -> Vec<f64> {
            (0..n).flat_map(|j| [-p[2 * (n - 1 - j)], -p[2 * (n - 1 - j) + 1]]).collect()
        };
        let same = samples.iter().fold(0.0f64, |m, st| m.max(max_diff(&st.positions, &flip(&st.positions))));
        let shifted = (0..=half).fold(0.0f64, |m, k| m.max(max_diff(x(k), &flip(x(k + half)))));
        same.min(shifted)
    });
    Ok(OrbitDiagnostics {
        brake_start: sup_norm(&samples[0].velocities),
        brake_end: sup_norm(&samples[half].velocities),
        reflection_error,
        periodicity_error: max_diff(x(last), x(0)),
        symmetry_error,
        reversal_symmetry_error,
        energy_drift: drift / e0.abs().max(f64::MIN_POSITIVE),
    })
}

/// Symmetry class whose slice isolates a mode of the given block.
pub fn class_for_block(n: usize, label: BlockLabel) -> SymmetryClass {
    match label {
        BlockLabel::Collinear { block: 0 } => SymmetryClass::collinear_k0(),
        BlockLabel::Collinear { .. } => SymmetryClass::collinear_k1(),
        BlockLabel::Ring { k, .. } if k == n => SymmetryClass::ring_full(n),
        BlockLabel::Ring { k, .. } => {
            let k = k.min(n - k);
            if 2 * k == n {
                SymmetryClass::ring_half(n)
            } else {
                SymmetryClass::ring_brake(k)
            }
        }
    }
}

/// A bifurcation candidate with the slice in which it is simple.
#[derive(Debug, Clone)]
pub struct ModeSeed {
    pub candidate: BifurcationCandidate,
    pub class: SymmetryClass,
    pub mode: SliceMode,
}

impl ModeSeed {
    pub fn nu(&self) -> f64 {
        self.candidate.nu
    }

    pub fn guess(&self, model: &ChainModel, epsilon: f64, report: &SpectralReport) -> Result<BrakeOrbit> {
        seed_from_mode(
            model,
            &self.mode.slice,
            self.candidate.nu,
            &self.mode.eigenvector,
            epsilon,
            &report.eigenvalues,
            spectra::RESONANCE_TOL * report.hessian_norm.max(1.0),
        )
    }
}

/// Seeds for every bifurcation candidate of the report, in candidate order.
/// Resonant candidates and candidates without a simple slice come back as errors.
pub fn mode_seeds(
    model: &ChainModel,
    equilibrium: &[f64],
    report: &SpectralReport,
) -> Vec<(BifurcationCandidate, Result<ModeSeed>)> {
    let tol = spectra::RESONANCE_TOL * report.hessian_norm.max(1.0);
    report
        .candidates
        .iter()
        .map(|c| {
            let seed = (|| {
                if let Some((l, eigenvalue)) = spectra::first_resonance(c.lambda, &report.eigenvalues, 2, tol) {
                    return Err(Error::Resonant {
                        nu_sq: c.lambda,
                        l,
                        eigenvalue,
                    });
                }
                let label = c.block.ok_or_else(|| {
                    Error::IncompatibleSymmetry("eigenvalue has no block provenance".into())
                })?;
                let class = class_for_block(model.n, label);
                let mode = slice_for_mode(model, equilibrium, class, c.lambda, report.hessian_norm)?;
                Ok(ModeSeed {
                    candidate: c.clone(),
                    class,
                    mode,
                })
            })();
            (c.clone(), seed)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSettings {
    /// Amplitude of the seed orbit.
    pub epsilon: f64,
    pub shoot: ShootOptions,
    pub continuation: ContinuationSettings,
}

impl OrbitSettings {
    pub fn for_report(report: &SpectralReport) -> Self {
        let nu_max = report.eigenvalues.last().copied().unwrap_or(1.0).max(1e-12).sqrt();
        OrbitSettings {
            epsilon: 1e-3,
            shoot: ShootOptions::for_max_frequency(nu_max),
            continuation: ContinuationSettings::default(),
        }
    }
}

/// Seed, shoot and continue one branch.
pub fn run_branch(model: &ChainModel, seed: &ModeSeed, report: &SpectralReport, settings: &OrbitSettings) -> Result<Branch> {
    let guess = seed.guess(model, settings.epsilon, report)?;
    let first = shoot(model, &seed.mode.slice, &guess, &settings.shoot)?;
    let known: Vec<f64> = report.candidates.iter().map(|c| c.nu).collect();
    continue_branch(
        model,
        &seed.mode.slice,
        &first,
        seed.nu(),
        &known,
        &settings.continuation,
        &settings.shoot,
    )
}

/// Runs every seed in parallel; results keep the order of `seeds`.
pub fn run_branches(
    model: &ChainModel,
    seeds: &[ModeSeed],
    report: &SpectralReport,
    settings: &OrbitSettings,
) -> Vec<Result<Branch>> {
    seeds.par_iter().map(|s| run_branch(model, s, report, settings)).collect()
}
