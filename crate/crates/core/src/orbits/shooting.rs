//! Brake-orbit shooting inside a symmetry slice.
//!
//! Unknowns are `z = (q, T½)`: reduced initial positions (released from
//! rest) and the half period. The residual is the reduced velocity `Bᵀv`
//! after flowing for `T½`, closed by one linear equation `c·z = value`
//! (an amplitude pin or an arclength hyperplane).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{default_dt, Integrator, PhaseState, Scheme};
use crate::linalg::{self, sup_norm};
use crate::potential::ChainModel;

use super::symmetry::SymmetryBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    /// Convergence threshold on the sup-norm of the residual.
    pub tol: f64,
    pub max_newton: usize,
    /// Nominal step of the flow; the actual step divides `T½` evenly.
    pub dt: f64,
    /// Lower bound on the number of steps per half period.
    pub min_steps: usize,
    /// Relative finite-difference step of the Jacobian.
    pub fd_step: f64,
}

impl ShootOptions {
    /// Options with the default step `2π/(1000 ν_max)`.
    pub fn for_max_frequency(nu_max: f64) -> Self {
        ShootOptions {
            tol: 1e-9,
            max_newton: 25,
            dt: default_dt(nu_max),
            min_steps: 2000,
            fd_step: 1e-6,
        }
    }

    /// Steps per half period: at least `min_steps`, a multiple of 16 so
    /// diagnostics can sample the orbit on a regular grid.
    pub fn steps_for(&self, half_period: f64) -> usize {
        let raw = ((half_period / self.dt).ceil() as usize).max(self.min_steps).max(16);
        raw.div_ceil(16) * 16
    }
}

/// The closing linear equation `coeffs · z = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub coeffs: Vec<f64>,
    pub value: f64,
}

impl Closure {
    /// Pins `sign · (Bq)_index = value`.
    pub fn amplitude_pin(slice: &SymmetryBasis, index: usize, sign: f64, value: f64) -> Self {
        let mut coeffs: Vec<f64> = slice.basis.iter().map(|b| sign * b[index]).collect();
        coeffs.push(0.0);
        Closure { coeffs, value }
    }

    /// Pins the largest displacement component of `q` (keeping its sign) to `value`.
    pub fn pin_largest(slice: &SymmetryBasis, q: &[f64], value: f64) -> Self {
        let (index, sign) = largest_component(&slice.displacement(q));
        Closure::amplitude_pin(slice, index, sign, value)
    }

    fn eval(&self, z: &[f64]) -> f64 {
        linalg::dot(&self.coeffs, z) - self.value
    }
}

/// Index and sign of the largest-magnitude entry (first one on ties).
pub fn largest_component(v: &[f64]) -> (usize, f64) {
    let mut best = (0, 0.0f64);
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best.1.abs() {
            best = (i, x);
        }
    }
    (best.0, if best.1 < 0.0 { -1.0 } else { 1.0 })
}

/// State after releasing `positions` from rest and flowing for `duration`
/// in `steps` fourth-order steps.
pub fn flow_from_rest(model: &ChainModel, positions: Vec<f64>, duration: f64, steps: usize) -> Result<PhaseState> {
    let mut s = PhaseState::at_rest(positions);
    Integrator::new(model, Scheme::Yoshida4).advance(&mut s, duration, steps)?;
    Ok(s)
}

fn residual(model: &ChainModel, slice: &SymmetryBasis, closure: &Closure, z: &[f64], steps: usize) -> Result<Vec<f64>> {
    let d = slice.dim();
    let t = z[d];
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("half period must be positive, got {t}")));
    }
    let end = flow_from_rest(model, slice.expand(&z[..d]), t, steps)?;
    let mut f = slice.project_vector(&end.velocities);
    f.push(closure.eval(z));
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootResult {
    /// `(q, T½)`.
    pub z: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub steps: usize,
}

/// Newton iteration on `(q, T½)` with a central-difference Jacobian.
///
/// Once the residual is below `tol` a few more steps are taken while they
/// still reduce it substantially, which matters for slow modes where the
/// velocity scale is small.
pub fn shoot_core(
    model: &ChainModel,
    slice: &SymmetryBasis,
    z0: Vec<f64>,
    closure: &Closure,
    steps: usize,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let d = slice.dim();
    assert_eq!(z0.len(), d + 1);
    let mut z = z0;
    let mut f = residual(model, slice, closure, &z, steps)?;
    let mut fnorm = sup_norm(&f);
    let mut iterations = 0;
    let mut polish = 0;
    loop {
        if fnorm <= opts.tol && (polish >= 3 || fnorm == 0.0) {
            break;
        }
        if iterations >= opts.max_newton {
            if fnorm <= opts.tol {
                break;
            }
            return Err(Error::NonConvergence {
                solver: "brake-orbit shooting",
                iterations,
                residual: fnorm,
                last_iterate: z,
            });
        }

        let columns = (0..=d)
            .into_par_iter()
            .map(|i| {
                let h = opts.fd_step * z[i].abs().max(1.0);
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fp = residual(model, slice, closure, &zp, steps)?;
                let fm = residual(model, slice, closure, &zm, steps)?;
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let jac = nalgebra::DMatrix::from_fn(d + 1, d + 1, |r, c| columns[c][r]);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let dz = linalg::solve(&jac, &rhs, "shooting Jacobian")?;

        let mut t = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..8 {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + t * b).collect();
            match residual(model, slice, closure, &trial, steps) {
                Ok(ft) if sup_norm(&ft) < fnorm => {
                    accepted = Some((trial, ft));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((zn, fnew)) => {
                let new_norm = sup_norm(&fnew);
                let was_converged = fnorm <= opts.tol;
                let ratio = new_norm / fnorm;
                z = zn;
                f = fnew;
                fnorm = new_norm;
                if was_converged {
                    polish += 1;
                    if ratio > 0.1 {
                        break;
                    }
                }
            }
            None if fnorm <= opts.tol => break,
            None => {
                return Err(match last_err {
                    Some(e) if e.is_collision() => e,
                    _ => Error::NonConvergence {
                        solver: "brake-orbit shooting line search",
                        iterations,
                        residual: fnorm,
                        last_iterate: z,
                    },
                })
            }
        }
    }
    Ok(ShootResult {
        z,
        residual: fnorm,
        iterations,
        steps,
    })
}
