//! Dimensionless chain energy: nearest-neighbour bond stretching plus
//! Lennard-Jones and Coulomb interactions between every pair.
//!
//! All pair potentials are functions of the *squared* distance `x = |Δ|²`.
//! The bond term is `U(x) = x - 2√x`, which differs from the `(√x - 1)²`
//! convention by the constant 1 per bond; forces are identical.
//!
//! Coordinates are stored flat as `[x₁, y₁, x₂, y₂, …]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Configurations with two particles closer than this are rejected.
pub const COLLISION_GUARD: f64 = 1e-8;

/// Value and first two derivatives of a pair potential in the squared distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairTerms {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl std::ops::Add for PairTerms {
    type Output = PairTerms;
    fn add(self, o: PairTerms) -> PairTerms {
        PairTerms {
            value: self.value + o.value,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

/// Dimensionless non-bonded coefficients: `W(x) = B/x⁶ - A/x³ + C/√x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceFieldParams {
    /// Lennard-Jones attraction `A`.
    pub attraction: f64,
    /// Lennard-Jones repulsion `B`.
    pub repulsion: f64,
    /// Coulomb coefficient `C`.
    pub coulomb: f64,
}

impl ForceFieldParams {
    pub fn new(attraction: f64, repulsion: f64, coulomb: f64) -> Result<Self> {
        let p = ForceFieldParams {
            attraction,
            repulsion,
            coulomb,
        };
        p.validate()?;
        Ok(p)
    }

    /// No non-bonded interaction at all.
    pub const fn zero() -> Self {
        ForceFieldParams {
            attraction: 0.0,
            repulsion: 0.0,
            coulomb: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("A", self.attraction),
            ("B", self.repulsion),
            ("C", self.coulomb),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Whether `(A, B)` lies in the box `[0, 1] × [0, 100]` covered by
    /// realistic force fields. Values outside are allowed but flagged.
    pub fn in_sweep_box(&self) -> bool {
        (0.0..=1.0).contains(&self.attraction) && (0.0..=100.0).contains(&self.repulsion)
    }

    /// Whether the non-bonded term is repulsive at short range, which is
    /// what keeps energy minimization away from collisions.
    pub fn has_repulsive_core(&self) -> bool {
        self.repulsion > 0.0 || self.coulomb > 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.attraction == 0.0 && self.repulsion == 0.0 && self.coulomb == 0.0
    }
}

/// Physical force-field constants (CHARMM style).
///
/// The bond stiffness is stored exactly as supplied. Tables commonly quote
/// it in kJ·nm⁻¹·mol⁻², although `k(√x - b)²` is only dimensionally
/// consistent with kJ·nm⁻²·mol⁻¹; no unit conversion is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Lennard-Jones well depth ε, kJ/mol.
    pub epsilon: f64,
    /// Lennard-Jones radius σ, nm.
    pub sigma: f64,
    /// Bond rest length b, nm.
    pub bond_length: f64,
    /// Bond stiffness k.
    pub stiffness: f64,
    /// Charge coefficient q.
    pub charge: f64,
    /// Particle mass m.
    pub mass: f64,
}

impl PhysicalParams {
    /// Carbon backbone constants; `mass` is 12 (g/mol).
    pub const CARBON: PhysicalParams = PhysicalParams {
        epsilon: 0.3,
        sigma: 0.35,
        bond_length: 0.13,
        stiffness: 255_224.0,
        charge: 0.0,
        mass: 12.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("sigma", self.sigma),
            ("b", self.bond_length),
            ("k", self.stiffness),
            ("m", self.mass),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !self.charge.is_finite() || self.charge < 0.0 {
            return Err(Error::InvalidParams(format!(
                "q must be finite and >= 0, got {}",
                self.charge
            )));
        }
        Ok(())
    }
}

/// Result of converting physical constants to the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rescaling {
    pub params: ForceFieldParams,
    /// Time scale: physical time is dimensionless time divided by `omega`.
    pub omega: f64,
    /// Length scale: physical positions are `length_scale` times dimensionless ones.
    pub length_scale: f64,
    /// Energy scale `k b²`.
    pub energy_scale: f64,
}

/// Maps physical constants to `(A, B, C)` under `w(t) = b·u(ωt)`, `ω = √(k/m)`.
pub fn rescale_physical(p: &PhysicalParams) -> Result<Rescaling> {
    p.validate()?;
    let (eps, sigma, b, k) = (p.epsilon, p.sigma, p.bond_length, p.stiffness);
    let sigma6 = sigma.powi(6);
    let params = ForceFieldParams {
        attraction: 4.0 * eps * sigma6 / (k * b.powi(8)),
        repulsion: 4.0 * eps * sigma6 * sigma6 / (k * b.powi(14)),
        coulomb: p.charge / (k * b.powi(3)),
    };
    Ok(Rescaling {
        params,
        omega: (k / p.mass).sqrt(),
        length_scale: b,
        energy_scale: k * b * b,
    })
}

/// Bond stretching `U(x) = x - 2√x`.
pub fn bond_potential(x: f64) -> Result<PairTerms> {
    if !(x > 0.0) {
        return Err(Error::Domain(x));
    }
    Ok(bond_terms(x))
}

/// Non-bonded `W(x) = B x⁻⁶ - A x⁻³ + C x^{-1/2}`.
pub fn nonbond_potential(x: f64, p: &ForceFieldParams) -> Result<PairTerms> {
    if !(x > 0.0) {
        return Err(Error::Domain(x));
    }
    Ok(nonbond_terms(x, p))
}

#[inline]
fn bond_terms(x: f64) -> PairTerms {
    let r = x.sqrt();
    PairTerms {
        value: x - 2.0 * r,
        d1: 1.0 - 1.0 / r,
        d2: 0.5 / (x * r),
    }
}

#[inline]
fn nonbond_terms(x: f64, p: &ForceFieldParams) -> PairTerms {
    let mut t = PairTerms {
        value: 0.0,
        d1: 0.0,
        d2: 0.0,
    };
    if p.repulsion != 0.0 || p.attraction != 0.0 {
        let inv = 1.0 / x;
        let inv3 = inv * inv * inv;
        let inv6 = inv3 * inv3;
        t.value += p.repulsion * inv6 - p.attraction * inv3;
        t.d1 += (-6.0 * p.repulsion * inv6 + 3.0 * p.attraction * inv3) * inv;
        t.d2 += (42.0 * p.repulsion * inv6 - 12.0 * p.attraction * inv3) * inv * inv;
    }
    if p.coulomb != 0.0 {
        let r = x.sqrt();
        t.value += p.coulomb / r;
        t.d1 += -0.5 * p.coulomb / (x * r);
        t.d2 += 0.75 * p.coulomb / (x * x * r);
    }
    t
}

/// Open chain (no bond between the end particles) or closed ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Neumann,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Neumann => "neumann",
            Boundary::Periodic => "periodic",
        })
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neumann" | "collinear" | "open" => Ok(Boundary::Neumann),
            "periodic" | "ring" | "circular" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidModel(format!("unknown boundary '{other}'"))),
        }
    }
}

/// `n` identical particles in the plane with the given boundary and
/// non-bonded parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainModel {
    pub n: usize,
    pub boundary: Boundary,
    pub params: ForceFieldParams,
}

impl ChainModel {
    pub fn new(n: usize, boundary: Boundary, params: ForceFieldParams) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidModel(format!("need at least 2 particles, got {n}")));
        }
        if boundary == Boundary::Periodic && n < 3 {
            return Err(Error::InvalidModel(format!(
                "a periodic chain needs at least 3 particles, got {n}"
            )));
        }
        params.validate()?;
        Ok(ChainModel {
            n,
            boundary,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Whether particles `i` and `j` share a bond.
    pub fn bonded(&self, i: usize, j: usize) -> bool {
        let (lo, hi) = (i.min(j), i.max(j));
        hi - lo == 1 || (self.boundary == Boundary::Periodic && lo == 0 && hi == self.n - 1)
    }

    /// `[δU + W]` and its derivatives at squared distance `x`.
    #[inline]
    pub fn pair_terms(&self, x: f64, bonded: bool) -> PairTerms {
        let w = nonbond_terms(x, &self.params);
        if bonded {
            w + bond_terms(x)
        } else {
            w
        }
    }

    fn check_len(&self, coords: &[f64]) {
        assert_eq!(
            coords.len(),
            self.dim(),
            "expected {} coordinates for {} particles",
            self.dim(),
            self.n
        );
    }

    /// Closest pair as `(i, j, squared distance)`.
    pub(crate) fn closest_pair(&self, coords: &[f64]) -> (usize, usize, f64) {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dx = coords[2 * i] - coords[2 * j];
                let dy = coords[2 * i + 1] - coords[2 * j + 1];
                let x = dx * dx + dy * dy;
                if x < best.2 {
                    best = (i, j, x);
                }
            }
        }
        best
    }

    fn guard(&self, coords: &[f64]) -> Result<()> {
        let (i, j, x) = self.closest_pair(coords);
        let d = x.sqrt();
        if !(d >= COLLISION_GUARD) {
            return Err(Error::Collision { i, j, distance: d });
        }
        Ok(())
    }

    /// Total energy `V`.
    pub fn energy(&self, coords: &[f64]) -> Result<f64> {
        self.check_len(coords);
        self.guard(coords)?;
        let mut e = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dx = coords[2 * i] - coords[2 * j];
                let dy = coords[2 * i + 1] - coords[2 * j + 1];
                e += self.pair_terms(dx * dx + dy * dy, self.bonded(i, j)).value;
            }
        }
        Ok(e)
    }

    /// Gradient of `V`.
    pub fn gradient(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(coords, &mut g)?;
        Ok(g)
    }

    /// Gradient of `V` written into `out`; returns the smallest squared
    /// pair distance encountered.
    pub fn gradient_into(&self, coords: &[f64], out: &mut [f64]) -> Result<f64> {
        self.check_len(coords);
        out.iter_mut().for_each(|g| *g = 0.0);
        let mut min_x = f64::INFINITY;
        let mut closest = (0, 1);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dx = coords[2 * i] - coords[2 * j];
                let dy = coords[2 * i + 1] - coords[2 * j + 1];
                let x = dx * dx + dy * dy;
                if x < min_x {
                    min_x = x;
                    closest = (i, j);
                }
                let f = 2.0 * self.pair_terms(x, self.bonded(i, j)).d1;
                out[2 * i] += f * dx;
                out[2 * i + 1] += f * dy;
                out[2 * j] -= f * dx;
                out[2 * j + 1] -= f * dy;
            }
        }
        if !(min_x.sqrt() >= COLLISION_GUARD) {
            return Err(Error::Collision {
                i: closest.0,
                j: closest.1,
                distance: min_x.sqrt(),
            });
        }
        Ok(min_x)
    }

    /// Hessian of `V`.
    ///
    /// Off-diagonal 2×2 minors are `A_ij = -(2f′ I + 4f″ ΔΔᵀ)` with
    /// `f = δ_ij U + W` evaluated at `|Δ|²`; each diagonal minor is minus the
    /// sum of the off-diagonal minors in its block row, so both translations
    /// lie in the kernel by construction.
    pub fn hessian(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(coords);
        self.guard(coords)?;
        let n = self.n;
        let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[2 * j] - coords[2 * i];
                let dy = coords[2 * j + 1] - coords[2 * i + 1];
                let t = self.pair_terms(dx * dx + dy * dy, self.bonded(i, j));
                let minor = [
                    -(2.0 * t.d1 + 4.0 * t.d2 * dx * dx),
                    -(4.0 * t.d2 * dx * dy),
                    -(2.0 * t.d1 + 4.0 * t.d2 * dy * dy),
                ];
                for (r, c, v) in [(0, 0, minor[0]), (0, 1, minor[1]), (1, 0, minor[1]), (1, 1, minor[2])] {
                    h[(2 * i + r, 2 * j + c)] = v;
                    h[(2 * j + r, 2 * i + c)] = v;
                }
            }
        }
        for i in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    let s: f64 = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| h[(2 * i + r, 2 * j + c)])
                        .sum();
                    h[(2 * i + r, 2 * i + c)] = -s;
                }
            }
        }
        Ok(h)
    }
}

/// Planar positions of the chain with the center of mass at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    coords: Vec<f64>,
}

impl Configuration {
    /// Builds a configuration from points, shifting it so the center of mass
    /// is the origin. Coincident points are rejected.
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let coords = points.iter().flat_map(|p| [p[0], p[1]]).collect();
        Self::from_flat(coords)
    }

    /// Same as [`Configuration::new`] from flat `[x₁, y₁, …]` coordinates.
    pub fn from_flat(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 4 || coords.len() % 2 != 0 {
            return Err(Error::InvalidConfiguration(format!(
                "need an even number (>= 4) of coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfiguration("non-finite coordinate".into()));
        }
        let n = coords.len() / 2;
        let cx = coords.iter().step_by(2).sum::<f64>() / n as f64;
        let cy = coords.iter().skip(1).step_by(2).sum::<f64>() / n as f64;
        for p in coords.chunks_exact_mut(2) {
            p[0] -= cx;
            p[1] -= cy;
        }
        let c = Configuration { coords };
        if c.min_pair_distance() == 0.0 {
            return Err(Error::InvalidConfiguration("coincident particles".into()));
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn point(&self, j: usize) -> [f64; 2] {
        [self.coords[2 * j], self.coords[2 * j + 1]]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.coords.chunks_exact(2).map(|p| [p[0], p[1]]).collect()
    }

    pub fn min_pair_distance(&self) -> f64 {
        min_pair_distance(&self.coords)
    }
}

/// Smallest distance between two particles of flat coordinates.
pub fn min_pair_distance(coords: &[f64]) -> f64 {
    let n = coords.len() / 2;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = coords[2 * i] - coords[2 * j];
            let dy = coords[2 * i + 1] - coords[2 * j + 1];
            best = best.min(dx * dx + dy * dy);
        }
    }
    best.sqrt()
}

pub fn total_energy(model: &ChainModel, c: &Configuration) -> Result<f64> {
    model.energy(c.as_slice())
}

pub fn gradient(model: &ChainModel, c: &Configuration) -> Result<Vec<f64>> {
    model.gradient(c.as_slice())
}

pub fn hessian(model: &ChainModel, c: &Configuration) -> Result<DMatrix<f64>> {
    model.hessian(c.as_slice())
}
