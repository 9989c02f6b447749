//! Symmetric equilibria: the collinear chain (open boundary) and the regular
//! polygon (periodic boundary).
//!
//! Both are found inside fixed-point spaces of the chain's symmetry group.
//! The collinear equilibrium minimizes the energy over configurations on the
//! x-axis with `a_{n+1-j} = -a_j`; the ring equilibrium reduces to the scalar
//! equation `S(a) = 1` for the polygon radius.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, sup_norm};
use crate::potential::{Boundary, ChainModel, Configuration, COLLISION_GUARD};

/// Chord factor `s_k = 2 sin(kπ/n)`: the distance between vertices `k`
/// apart on a unit-radius regular `n`-gon (up to sign).
pub fn chord_factor(n: usize, k: i64) -> f64 {
    2.0 * (k as f64 * PI / n as f64).sin()
}

fn require_periodic(model: &ChainModel) -> Result<()> {
    if model.boundary != Boundary::Periodic {
        return Err(Error::InvalidModel(
            "ring equilibria need a periodic chain".into(),
        ));
    }
    Ok(())
}

/// `S(a) - 1`, where
/// `S(a) = 1/(a s₁) - (1/(2 s₁²)) Σ_{k=1}^{n-1} W′(a² s_k²) s_k²`.
///
/// The polygon of radius `a` is a critical point exactly when this vanishes.
pub fn ring_residual(radius: f64, model: &ChainModel) -> Result<f64> {
    require_periodic(model)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParams(format!(
            "ring radius must be positive, got {radius}"
        )));
    }
    let n = model.n;
    let s1 = chord_factor(n, 1);
    let mut sum = 0.0;
    for k in 1..n {
        let s = chord_factor(n, k as i64);
        let x = radius * radius * s * s;
        sum += model.pair_terms(x, false).d1 * s * s;
    }
    Ok(1.0 / (radius * s1) - sum / (2.0 * s1 * s1) - 1.0)
}

/// Logarithmic radius grid searched for sign changes of [`ring_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingScan {
    pub a_min: f64,
    pub a_max: f64,
    pub points: usize,
}

impl Default for RingScan {
    fn default() -> Self {
        RingScan {
            a_min: 0.05,
            a_max: 50.0,
            points: 400,
        }
    }
}

/// Regular polygon `a_j = a (cos jζ, sin jζ)`, `ζ = 2π/n`, `j = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircularEquilibrium {
    pub n: usize,
    pub radius: f64,
    /// `S(radius) - 1` at the returned radius.
    pub residual: f64,
}

impl CircularEquilibrium {
    pub fn new(n: usize, radius: f64) -> Self {
        CircularEquilibrium {
            n,
            radius,
            residual: f64::NAN,
        }
    }

    /// Flat coordinates; particle index `i` (0-based) sits at angle `(i+1)ζ`.
    pub fn coords(&self) -> Vec<f64> {
        let zeta = 2.0 * PI / self.n as f64;
        (1..=self.n)
            .flat_map(|j| {
                let t = zeta * j as f64;
                [self.radius * t.cos(), self.radius * t.sin()]
            })
            .collect()
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_flat(self.coords()).expect("regular polygon is a valid configuration")
    }
}

/// All ring equilibria in the scan range, ascending in radius.
///
/// Each sign change of `S(a) - 1` on the grid is refined by bisection until
/// the bracket cannot shrink further; the root is accepted when
/// `|S(a) - 1| <= tol`.
pub fn circular_radius(
    model: &ChainModel,
    scan: RingScan,
    tol: f64,
) -> Result<Vec<CircularEquilibrium>> {
    require_periodic(model)?;
    if !(scan.a_min > 0.0 && scan.a_max > scan.a_min && scan.points >= 2) {
        return Err(Error::InvalidParams(format!(
            "invalid ring scan [{}, {}] with {} points",
            scan.a_min, scan.a_max, scan.points
        )));
    }
    let ratio = (scan.a_max / scan.a_min).ln() / (scan.points - 1) as f64;
    let grid: Vec<f64> = (0..scan.points)
        .map(|i| {
            if i + 1 == scan.points {
                scan.a_max
            } else {
                scan.a_min * (ratio * i as f64).exp()
            }
        })
        .collect();
    let values = grid
        .iter()
        .map(|&a| ring_residual(a, model))
        .collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        let root = if fa == 0.0 {
            Some(grid[i])
        } else if fa * fb < 0.0 {
            Some(bisect(model, grid[i], grid[i + 1], fa)?)
        } else {
            None
        };
        if let Some(a) = root {
            let residual = ring_residual(a, model)?;
            if residual.abs() > tol {
                return Err(Error::NonConvergence {
                    solver: "ring radius bisection",
                    iterations: 200,
                    residual,
                    last_iterate: vec![a],
                });
            }
            roots.push(CircularEquilibrium {
                n: model.n,
                radius: a,
                residual,
            });
        }
    }
    if let Some(&last) = values.last() {
        if last == 0.0 {
            roots.push(CircularEquilibrium {
                n: model.n,
                radius: scan.a_max,
                residual: 0.0,
            });
        }
    }
    if roots.is_empty() {
        return Err(Error::NoBracket {
            a_min: scan.a_min,
            a_max: scan.a_max,
            residual_min: values[0],
            residual_max: *values.last().unwrap(),
        });
    }
    Ok(roots)
}

fn bisect(model: &ChainModel, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = ring_residual(mid, model)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let f_hi = ring_residual(hi, model)?;
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// The ring root of lowest total energy.
pub fn lowest_energy_ring<'a>(
    model: &ChainModel,
    roots: &'a [CircularEquilibrium],
) -> Result<&'a CircularEquilibrium> {
    let mut best: Option<(&CircularEquilibrium, f64)> = None;
    for r in roots {
        let e = model.energy(&r.coords())?;
        if best.map_or(true, |(_, b)| e < b) {
            best = Some((r, e));
        }
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| Error::InvalidParams("no ring roots to choose from".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Symmetric collinear equilibrium, stored by its non-negative half.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearEquilibrium {
    pub n: usize,
    /// The ⌈n/2⌉ non-negative coordinates in increasing order (leading `0`
    /// for odd `n`); the rest of the chain is the mirror image `a_{n+1-j} = -a_j`.
    pub half_positions: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the reduced gradient at the returned iterate.
    pub residual: f64,
    /// Energy after each accepted Newton step, starting with the initial guess.
    pub energy_trace: Vec<f64>,
}

impl CollinearEquilibrium {
    /// x-coordinates of all particles, ascending.
    pub fn positions(&self) -> Vec<f64> {
        let free = if self.n % 2 == 1 {
            &self.half_positions[1..]
        } else {
            &self.half_positions[..]
        };
        expand_half(self.n, free)
    }

    pub fn coords(&self) -> Vec<f64> {
        self.positions().into_iter().flat_map(|x| [x, 0.0]).collect()
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_flat(self.coords()).expect("ordered chain is a valid configuration")
    }

    /// Largest coordinate, i.e. half the end-to-end length.
    pub fn half_length(&self) -> f64 {
        self.half_positions.last().copied().unwrap_or(0.0)
    }
}

/// Full ascending coordinates from the ⌊n/2⌋ positive ones.
fn expand_half(n: usize, half: &[f64]) -> Vec<f64> {
    let left = half.iter().rev().map(|h| -h);
    if n % 2 == 0 {
        left.chain(half.iter().copied()).collect()
    } else {
        left.chain(std::iter::once(0.0))
            .chain(half.iter().copied())
            .collect()
    }
}

/// Index pairs `(left, right)` of the mirrored particles driven by each free coordinate.
fn mirror_indices(n: usize) -> Vec<(usize, usize)> {
    let m = n / 2;
    (0..m).map(|k| (m - 1 - k, n - m + k)).collect()
}

fn with_center(odd: bool, free: Vec<f64>) -> Vec<f64> {
    if odd {
        std::iter::once(0.0).chain(free).collect()
    } else {
        free
    }
}

fn half_is_admissible(half: &[f64], odd: bool) -> bool {
    // Gaps between consecutive particles, including across the center.
    let first_gap = if odd { half[0] } else { 2.0 * half[0] };
    if !(first_gap >= COLLISION_GUARD) {
        return false;
    }
    half.windows(2).all(|w| w[1] - w[0] >= COLLISION_GUARD)
}

/// Minimizes the energy over the symmetric collinear subspace by damped
/// Newton with backtracking.
///
/// Free variables are the ⌊n/2⌋ positive coordinates; the initial guess is
/// unit spacing. Negative-curvature directions of the reduced Hessian are
/// flipped so every step is a descent step, and steps that would break the
/// ordering `a_1 < … < a_n` are shortened.
pub fn collinear_equilibrium(model: &ChainModel, opts: NewtonOptions) -> Result<CollinearEquilibrium> {
    if model.boundary != Boundary::Neumann {
        return Err(Error::InvalidModel(
            "the collinear equilibrium is computed for open (Neumann) chains".into(),
        ));
    }
    let n = model.n;
    let odd = n % 2 == 1;
    let m = n / 2;
    let pairs = mirror_indices(n);
    let mut half: Vec<f64> = (0..m)
        .map(|k| if odd { (k + 1) as f64 } else { k as f64 + 0.5 })
        .collect();

    let coords_of = |h: &[f64]| -> Vec<f64> {
        expand_half(n, h).into_iter().flat_map(|x| [x, 0.0]).collect()
    };
    let reduced_gradient = |coords: &[f64]| -> Result<Vec<f64>> {
        let g = model.gradient(coords)?;
        Ok(pairs.iter().map(|&(l, r)| g[2 * r] - g[2 * l]).collect())
    };

    let mut energy = model.energy(&coords_of(&half))?;
    let mut trace = vec![energy];
    let mut grad = reduced_gradient(&coords_of(&half))?;

    for iter in 0..opts.max_iter {
        let gnorm = sup_norm(&grad);
        if gnorm <= opts.tol {
            return Ok(CollinearEquilibrium {
                n,
                half_positions: with_center(odd, half),
                iterations: iter,
                residual: gnorm,
                energy_trace: trace,
            });
        }

        let coords = coords_of(&half);
        let h = model.hessian(&coords)?;
        let reduced = DMatrix::from_fn(m, m, |a, b| {
            let (la, ra) = pairs[a];
            let (lb, rb) = pairs[b];
            h[(2 * ra, 2 * rb)] - h[(2 * ra, 2 * lb)] - h[(2 * la, 2 * rb)] + h[(2 * la, 2 * lb)]
        });
        let direction = descent_direction(&reduced, &grad)?;
        let slope = linalg::dot(&grad, &direction);

        let mut t = 1.0;
        let mut accepted = false;
        let mut blocked_by_ordering = false;
        while t > 1e-14 {
            let trial: Vec<f64> = half.iter().zip(&direction).map(|(h, d)| h + t * d).collect();
            if !half_is_admissible(&trial, odd) {
                blocked_by_ordering = true;
                t *= 0.5;
                continue;
            }
            let tc = coords_of(&trial);
            let e = model.energy(&tc)?;
            let armijo = e <= energy + 1e-4 * t * slope;
            // Near convergence the energy change drowns in rounding; accept
            // steps that keep the energy flat and shrink the gradient.
            let flat = e <= energy + 4.0 * f64::EPSILON * energy.abs().max(1.0);
            if armijo || flat {
                let g = reduced_gradient(&tc)?;
                if armijo || sup_norm(&g) < gnorm {
                    half = trial;
                    energy = e.min(energy);
                    grad = g;
                    trace.push(e);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if blocked_by_ordering {
                let gaps = expand_half(n, &half);
                let (i, gap) = gaps
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| (i, w[1] - w[0]))
                    .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
                return Err(Error::Collision {
                    i,
                    j: i + 1,
                    distance: gap,
                });
            }
            return Err(Error::NonConvergence {
                solver: "collinear Newton line search",
                iterations: iter,
                residual: gnorm,
                last_iterate: half,
            });
        }
    }
    let residual = sup_norm(&grad);
    if residual <= opts.tol {
        return Ok(CollinearEquilibrium {
            n,
            half_positions: with_center(odd, half),
            iterations: opts.max_iter,
            residual,
            energy_trace: trace,
        });
    }
    Err(Error::NonConvergence {
        solver: "collinear Newton",
        iterations: opts.max_iter,
        residual,
        last_iterate: half,
    })
}

/// Newton direction with the reduced Hessian's eigenvalues replaced by their
/// absolute values (floored), so the step always descends.
fn descent_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Result<Vec<f64>> {
    let eig = linalg::symmetric_eigen(hess)?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let floor = 1e-10 * scale;
    let m = grad.len();
    let mut d = vec![0.0; m];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        let proj: f64 = (0..m).map(|i| v[i] * grad[i]).sum();
        let c = -proj / lambda.abs().max(floor);
        for i in 0..m {
            d[i] += c * v[i];
        }
    }
    Ok(d)
}

/// Outcome of checking `∇V = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumCheck {
    /// Sup-norm of the gradient.
    pub residual: f64,
    pub passed: bool,
}

pub fn verify_equilibrium(model: &ChainModel, c: &Configuration, tol: f64) -> EquilibriumCheck {
    match model.gradient(c.as_slice()) {
        Ok(g) => {
            let residual = sup_norm(&g);
            EquilibriumCheck {
                residual,
                passed: residual <= tol,
            }
        }
        Err(_) => EquilibriumCheck {
            residual: f64::INFINITY,
            passed: false,
        },
    }
}

/// Either of the two symmetric equilibrium families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Equilibrium {
    Collinear(CollinearEquilibrium),
    Ring(CircularEquilibrium),
}

impl Equilibrium {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Equilibrium::Collinear(c) => c.coords(),
            Equilibrium::Ring(r) => r.coords(),
        }
    }

    pub fn configuration(&self) -> Configuration {
        match self {
            Equilibrium::Collinear(c) => c.configuration(),
            Equilibrium::Ring(r) => r.configuration(),
        }
    }

    /// Half length for the collinear chain, radius for the ring.
    pub fn size_metric(&self) -> f64 {
        match self {
            Equilibrium::Collinear(c) => c.half_length(),
            Equilibrium::Ring(r) => r.radius,
        }
    }
}

/// Collinear equilibrium for open chains, lowest-energy ring for periodic ones.
pub fn solve_equilibrium(model: &ChainModel, opts: NewtonOptions) -> Result<Equilibrium> {
    match model.boundary {
        Boundary::Neumann => collinear_equilibrium(model, opts).map(Equilibrium::Collinear),
        Boundary::Periodic => {
            let roots = circular_radius(model, RingScan::default(), opts.tol)?;
            Ok(Equilibrium::Ring(lowest_energy_ring(model, &roots)?.clone()))
        }
    }
}
