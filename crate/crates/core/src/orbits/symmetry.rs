//! Position-space slices of fixed-point subspaces.
//!
//! A spatial symmetry acts on flat coordinates by permuting particles and
//! applying a 2×2 orthogonal matrix, `(g·x)_{σ(i)} = Q x_i`. The slice of a
//! group is its fixed subspace through the equilibrium, with the symmetry
//! zero modes (translations, rotation) removed so the reduced Hessian is
//! nonsingular.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen};
use crate::potential::{Boundary, ChainModel};
use crate::spectra::symmetry_kernel;

type Mat2 = [[f64; 2]; 2];

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
/// Reflection in the x-axis.
const REFLECT: Mat2 = [[1.0, 0.0], [0.0, -1.0]];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            c[r][s] = a[r][0] * b[0][s] + a[r][1] * b[1][s];
        }
    }
    c
}

fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

fn scaled(m: &Mat2, k: f64) -> Mat2 {
    [[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]]
}

/// A particle permutation combined with a planar orthogonal map.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub perm: Vec<usize>,
    pub q: Mat2,
}

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        GroupElement {
            perm: (0..n).collect(),
            q: IDENTITY,
        }
    }

    /// Applies the element to flat coordinates (positions or displacements).
    pub fn act(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, &si) in self.perm.iter().enumerate() {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            y[2 * si] = self.q[0][0] * a + self.q[0][1] * b;
            y[2 * si + 1] = self.q[1][0] * a + self.q[1][1] * b;
        }
        y
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            perm: other.perm.iter().map(|&j| self.perm[j]).collect(),
            q: mat_mul(&self.q, &other.q),
        }
    }

    fn same_as(&self, other: &GroupElement) -> bool {
        self.perm == other.perm
            && (0..2).all(|r| (0..2).all(|c| (self.q[r][c] - other.q[r][c]).abs() < 1e-12))
    }
}

/// All elements generated by `gens`.
pub fn group_closure(n: usize, gens: &[GroupElement]) -> Vec<GroupElement> {
    let mut elems = vec![GroupElement::identity(n)];
    let mut frontier = 0;
    while frontier < elems.len() {
        let e = elems[frontier].clone();
        frontier += 1;
        for g in gens {
            let p = g.compose(&e);
            if !elems.iter().any(|x| x.same_as(&p)) {
                elems.push(p);
            }
        }
    }
    elems
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryFamily {
    /// Axial motions of the collinear chain, `x_j(t) = R x_j(t)`.
    CollinearK0,
    /// Transverse motions of the collinear chain, `x_j(t) = R x_j(t + T½)`.
    CollinearK1,
    /// Ring modes of a double block pair `k, n−k`, `x_j(t) = R x_{n−j}(t)`.
    RingBrake,
    /// Ring modes of the real block `k = n/2`.
    RingHalf,
    /// Ring modes of the real block `k = n`.
    RingFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryClass {
    pub family: SymmetryFamily,
    pub k: usize,
}

impl SymmetryClass {
    pub const fn collinear_k0() -> Self {
        SymmetryClass {
            family: SymmetryFamily::CollinearK0,
            k: 0,
        }
    }

    pub const fn collinear_k1() -> Self {
        SymmetryClass {
            family: SymmetryFamily::CollinearK1,
            k: 1,
        }
    }

    pub const fn ring_brake(k: usize) -> Self {
        SymmetryClass {
            family: SymmetryFamily::RingBrake,
            k,
        }
    }

    pub const fn ring_half(n: usize) -> Self {
        SymmetryClass {
            family: SymmetryFamily::RingHalf,
            k: n / 2,
        }
    }

    pub const fn ring_full(n: usize) -> Self {
        SymmetryClass {
            family: SymmetryFamily::RingFull,
            k: n,
        }
    }

    pub fn is_collinear(&self) -> bool {
        matches!(
            self.family,
            SymmetryFamily::CollinearK0 | SymmetryFamily::CollinearK1
        )
    }

    /// Branch label for output metadata.
    pub fn family_label(&self) -> Option<&'static str> {
        (self.family == SymmetryFamily::CollinearK1).then_some("figure-eight family")
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            SymmetryFamily::CollinearK0 => write!(f, "collinear-k0"),
            SymmetryFamily::CollinearK1 => write!(f, "collinear-k1"),
            SymmetryFamily::RingBrake => write!(f, "ring-brake-k{}", self.k),
            SymmetryFamily::RingHalf => write!(f, "ring-half-k{}", self.k),
            SymmetryFamily::RingFull => write!(f, "ring-full-k{}", self.k),
        }
    }
}

impl Serialize for SymmetryClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("unknown symmetry class '{s}'"));
        match s {
            "collinear-k0" => return Ok(SymmetryClass::collinear_k0()),
            "collinear-k1" => return Ok(SymmetryClass::collinear_k1()),
            _ => {}
        }
        let (family, k) = s.rsplit_once("-k").ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        let family = match family {
            "ring-brake" => SymmetryFamily::RingBrake,
            "ring-half" => SymmetryFamily::RingHalf,
            "ring-full" => SymmetryFamily::RingFull,
            _ => return Err(bad()),
        };
        Ok(SymmetryClass { family, k })
    }
}

/// Candidate generator sets for a class; a mode is sought in each in turn.
fn candidate_generators(n: usize, boundary: Boundary, class: SymmetryClass) -> Result<Vec<Vec<GroupElement>>> {
    let incompatible = |why: &str| Err(Error::IncompatibleSymmetry(format!("{class} ({why})")));
    let reverse: Vec<usize> = (0..n).map(|i| n - 1 - i).collect();
    let identity: Vec<usize> = (0..n).collect();
    match class.family {
        SymmetryFamily::CollinearK0 | SymmetryFamily::CollinearK1 if boundary != Boundary::Neumann => {
            incompatible("collinear classes need an open chain")
        }
        SymmetryFamily::CollinearK0 => Ok(vec![vec![GroupElement {
            perm: identity,
            q: REFLECT,
        }]]),
        SymmetryFamily::CollinearK1 => Ok(vec![
            vec![GroupElement {
                perm: reverse.clone(),
                q: scaled(&IDENTITY, -1.0),
            }],
            vec![GroupElement {
                perm: reverse,
                q: scaled(&REFLECT, -1.0),
            }],
        ]),
        _ if boundary != Boundary::Periodic => incompatible("ring classes need a periodic chain"),
        _ => {
            let zeta = 2.0 * PI / n as f64;
            let vertex = GroupElement {
                perm: (0..n).map(|i| (2 * n - 2 - i) % n).collect(),
                q: REFLECT,
            };
            let edge = GroupElement {
                perm: (0..n).map(|i| (2 * n - 1 - i) % n).collect(),
                q: mat_mul(&rotation(zeta), &REFLECT),
            };
            let shift = GroupElement {
                perm: (0..n).map(|i| (i + 1) % n).collect(),
                q: rotation(zeta),
            };
            match class.family {
                SymmetryFamily::RingBrake if class.k == 0 || 2 * class.k >= n => {
                    incompatible("block index must satisfy 1 <= k < n/2")
                }
                SymmetryFamily::RingBrake => Ok(vec![vec![vertex]]),
                SymmetryFamily::RingHalf if n % 2 == 1 || class.k != n / 2 => {
                    incompatible("the k = n/2 block exists only for even n")
                }
                SymmetryFamily::RingHalf => Ok(vec![vec![vertex], vec![edge]]),
                SymmetryFamily::RingFull if class.k != n => incompatible("k must equal n"),
                SymmetryFamily::RingFull => Ok(vec![vec![shift, vertex]]),
                _ => unreachable!(),
            }
        }
    }
}

/// Orthonormal basis `B` of a fixed-point slice with its expansion and
/// restriction maps `q ↦ a + Bq` and `x ↦ Bᵀ(x − a)`.
#[derive(Debug, Clone)]
pub struct SymmetryBasis {
    pub class: SymmetryClass,
    pub generators: Vec<GroupElement>,
    pub group_order: usize,
    pub equilibrium: Vec<f64>,
    /// `d` orthonormal vectors in `R^{2n}`.
    pub basis: Vec<Vec<f64>>,
    /// Number of symmetry zero modes that lay in the fixed subspace and were removed.
    pub removed_zero_modes: usize,
}

impl SymmetryBasis {
    fn build(class: SymmetryClass, generators: Vec<GroupElement>, equilibrium: &[f64]) -> Result<Self> {
        let dim = equilibrium.len();
        let n = dim / 2;
        let group = group_closure(n, &generators);
        let inv = group.iter().fold(0.0f64, |m, g| {
            m.max(linalg::sup_norm(
                &g.act(equilibrium)
                    .iter()
                    .zip(equilibrium)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            ))
        });
        let scale = linalg::sup_norm(equilibrium).max(1.0);
        if inv > 1e-9 * scale {
            return Err(Error::IncompatibleSymmetry(format!(
                "{class} (equilibrium not invariant, defect {inv:e})"
            )));
        }
        let project = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; dim];
            for g in &group {
                for (o, y) in out.iter_mut().zip(g.act(v)) {
                    *o += y;
                }
            }
            out.iter_mut().for_each(|o| *o /= group.len() as f64);
            out
        };
        // Unit inputs, so an absolute threshold separates real components
        // from projection round-off.
        let zero_modes: Vec<Vec<f64>> = symmetry_kernel(equilibrium)
            .iter()
            .map(|z| project(z))
            .filter(|p| linalg::norm(p) > 1e-8)
            .collect();
        let zero_in_slice = linalg::gram_schmidt(&zero_modes, &[], 1e-8);
        let projector = DMatrix::from_fn(dim, dim, |r, c| {
            let mut e = vec![0.0; dim];
            e[c] = 1.0;
            project(&e)[r]
        });
        let projector = 0.5 * (&projector + projector.transpose());
        let eig = symmetric_eigen(&projector)?;
        let range: Vec<Vec<f64>> = eig
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.5)
            .map(|(i, _)| eig.vectors.column(i).iter().copied().collect())
            .collect();
        let basis = linalg::gram_schmidt(&range, &zero_in_slice, 1e-8);
        if basis.is_empty() {
            return Err(Error::IncompatibleSymmetry(format!("{class} (empty slice)")));
        }
        Ok(SymmetryBasis {
            class,
            generators,
            group_order: group.len(),
            equilibrium: equilibrium.to_vec(),
            basis,
            removed_zero_modes: zero_in_slice.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Bq`.
    pub fn displacement(&self, q: &[f64]) -> Vec<f64> {
        assert_eq!(q.len(), self.dim());
        let mut out = vec![0.0; self.equilibrium.len()];
        for (qk, b) in q.iter().zip(&self.basis) {
            out.iter_mut().zip(b).for_each(|(o, bi)| *o += qk * bi);
        }
        out
    }

    /// `a + Bq`.
    pub fn expand(&self, q: &[f64]) -> Vec<f64> {
        let mut x = self.displacement(q);
        x.iter_mut().zip(&self.equilibrium).for_each(|(xi, ai)| *xi += ai);
        x
    }

    /// `Bᵀ(x − a)`.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.equilibrium).map(|(a, b)| a - b).collect();
        self.project_vector(&d)
    }

    /// `Bᵀv` for a tangent vector `v`.
    pub fn project_vector(&self, v: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| linalg::dot(b, v)).collect()
    }

    /// `BᵀHB` at the equilibrium.
    pub fn reduced_hessian(&self, model: &ChainModel) -> Result<DMatrix<f64>> {
        let h = model.hessian(&self.equilibrium)?;
        let d = self.dim();
        let hb: Vec<Vec<f64>> = self
            .basis
            .iter()
            .map(|b| {
                (0..b.len())
                    .map(|r| (0..b.len()).map(|c| h[(r, c)] * b[c]).sum())
                    .collect()
            })
            .collect();
        let mut m = DMatrix::from_fn(d, d, |i, j| linalg::dot(&self.basis[i], &hb[j]));
        let sym = 0.5 * (&m + m.transpose());
        m.copy_from(&sym);
        Ok(m)
    }

    /// Largest `‖g·x − x‖∞` over the generators.
    pub fn invariance_defect(&self, x: &[f64]) -> f64 {
        self.generators.iter().fold(0.0f64, |m, g| {
            let gx = g.act(x);
            m.max(gx.iter().zip(x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs())))
        })
    }
}

/// Every candidate slice for a class, in a fixed order.
pub fn symmetry_slices(model: &ChainModel, equilibrium: &[f64], class: SymmetryClass) -> Result<Vec<SymmetryBasis>> {
    if equilibrium.len() != model.dim() {
        return Err(Error::InvalidConfiguration(format!(
            "expected {} coordinates, got {}",
            model.dim(),
            equilibrium.len()
        )));
    }
    let mut out = Vec::new();
    let mut last_err = None;
    for gens in candidate_generators(model.n, model.boundary, class)? {
        match SymmetryBasis::build(class, gens, equilibrium) {
            Ok(b) => out.push(b),
            Err(e) => last_err = Some(e),
        }
    }
    match (out.is_empty(), last_err) {
        (true, Some(e)) => Err(e),
        _ => Ok(out),
    }
}

/// The first slice of a class.
pub fn symmetry_basis(model: &ChainModel, equilibrium: &[f64], class: SymmetryClass) -> Result<SymmetryBasis> {
    Ok(symmetry_slices(model, equilibrium, class)?.remove(0))
}

/// A slice in which `lambda` is a simple eigenvalue of the reduced Hessian,
/// with the matching unit eigenvector expanded to the full space.
#[derive(Debug, Clone)]
pub struct SliceMode {
    pub slice: SymmetryBasis,
    pub lambda: f64,
    pub eigenvector: Vec<f64>,
}

pub fn slice_for_mode(
    model: &ChainModel,
    equilibrium: &[f64],
    class: SymmetryClass,
    lambda: f64,
    hessian_norm: f64,
) -> Result<SliceMode> {
    let match_tol = 1e-6 * hessian_norm.max(1.0);
    let simple_tol = 1e-8 * hessian_norm.max(1.0);
    let mut not_simple = None;
    for slice in symmetry_slices(model, equilibrium, class)? {
        let eig = symmetric_eigen(&slice.reduced_hessian(model)?)?;
        let Some((idx, &value)) = eig
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
        else {
            continue;
        };
        if (value - lambda).abs() > match_tol {
            continue;
        }
        let multiplicity = eig.values.iter().filter(|v| (*v - value).abs() <= simple_tol).count();
        if multiplicity > 1 {
            not_simple = Some(Error::NotSimple {
                eigenvalue: lambda,
                class: class.to_string(),
                multiplicity,
            });
            continue;
        }
        let w: Vec<f64> = eig.vectors.column(idx).iter().copied().collect();
        let eigenvector = slice.displacement(&w);
        return Ok(SliceMode {
            slice,
            lambda: value,
            eigenvector,
        });
    }
    Err(not_simple.unwrap_or_else(|| {
        Error::IncompatibleSymmetry(format!("{class} (no slice contains eigenvalue {lambda})"))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names_round_trip() {
        for c in [
            SymmetryClass::collinear_k0(),
            SymmetryClass::collinear_k1(),
            SymmetryClass::ring_brake(2),
            SymmetryClass::ring_half(6),
            SymmetryClass::ring_full(6),
        ] {
            assert_eq!(c.to_string().parse::<SymmetryClass>().unwrap(), c);
        }
        assert!("ring-x-k2".parse::<SymmetryClass>().is_err());
    }

    #[test]
    fn closure_sizes() {
        let n = 6;
        let zeta = 2.0 * PI / n as f64;
        let shift = GroupElement {
            perm: (0..n).map(|i| (i + 1) % n).collect(),
            q: rotation(zeta),
        };
        let vertex = GroupElement {
            perm: (0..n).map(|i| (2 * n - 2 - i) % n).collect(),
            q: REFLECT,
        };
        assert_eq!(group_closure(n, &[shift.clone()]).len(), 6);
        assert_eq!(group_closure(n, &[shift, vertex.clone()]).len(), 12);
        assert_eq!(group_closure(n, &[vertex]).len(), 2);
    }
}
