//! Hessian spectra at the symmetric equilibria.
//!
//! At a collinear equilibrium the Hessian splits into an axial block `M0`
//! and a transverse block `M1`. At the regular polygon the discrete Fourier
//! transform over the cyclic shift reduces it to `n` Hermitian 2×2 blocks
//! `M_k = α_k I + β_k R − γ_k (iJ)` with closed-form eigenvalues
//! `α_k ± √(β_k² + γ_k²)`. Both reductions are cross-checked against a dense
//! eigensolve of the full `2n × 2n` matrix.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{
    self, CircularEquilibrium, CollinearEquilibrium, Equilibrium, NewtonOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen};
use crate::potential::{Boundary, ChainModel, Configuration, ForceFieldParams};

/// Default residual for accepting an eigenvector as a symmetry zero mode.
pub const KERNEL_TOL: f64 = 1e-6;
/// Eigenvalues below this multiple of `‖H‖` in magnitude count as zero.
pub const SIGN_THRESHOLD: f64 = 1e-10;
/// Relative tolerance (times `‖H‖`) for the resonance test of candidates.
pub const RESONANCE_TOL: f64 = 1e-6;

/// Axial (`m0`) and transverse (`m1`) blocks of the Hessian at a collinear
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CollinearBlocks {
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
}

impl CollinearBlocks {
    /// Ascending eigenvalues of `m0` and of `m1`.
    pub fn eigenvalues(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            symmetric_eigen(&self.m0)?.values,
            symmetric_eigen(&self.m1)?.values,
        ))
    }
}

pub fn collinear_blocks(eq: &CollinearEquilibrium, model: &ChainModel) -> Result<CollinearBlocks> {
    collinear_blocks_at(model, &eq.positions())
}

/// Blocks for particles at positions `x` on a common line.
///
/// `-a_ij = 2f′(d²) + 4d²f″(d²)` and `-b_ij = 2f′(d²)` with `d = x_j - x_i`
/// and `f = δ_ij U + W`; diagonals from row sums.
pub fn collinear_blocks_at(model: &ChainModel, x: &[f64]) -> Result<CollinearBlocks> {
    let n = model.n;
    assert_eq!(x.len(), n);
    let mut m0 = DMatrix::zeros(n, n);
    let mut m1 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = (x[j] - x[i]).powi(2);
            if !(d2 > 0.0) {
                return Err(Error::Collision {
                    i,
                    j,
                    distance: d2.sqrt(),
                });
            }
            let t = model.pair_terms(d2, model.bonded(i, j));
            let a = -(2.0 * t.d1 + 4.0 * d2 * t.d2);
            let b = -2.0 * t.d1;
            m0[(i, j)] = a;
            m0[(j, i)] = a;
            m1[(i, j)] = b;
            m1[(j, i)] = b;
        }
    }
    for m in [&mut m0, &mut m1] {
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            m[(i, i)] = -s;
        }
    }
    Ok(CollinearBlocks { m0, m1 })
}

/// Coefficients of the Fourier block `M_k` at the regular polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingBlock {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingBlockCoefficients {
    pub n: usize,
    pub radius: f64,
    /// Blocks for `k = 1..=n`, in order.
    pub blocks: Vec<RingBlock>,
}

impl RingBlockCoefficients {
    pub fn block(&self, k: usize) -> &RingBlock {
        &self.blocks[k - 1]
    }

    /// All `2n` block eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| [b.lambda_minus, b.lambda_plus])
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn ring_coefficients(eq: &CircularEquilibrium, model: &ChainModel) -> Result<RingBlockCoefficients> {
    ring_coefficients_at(model, eq.radius)
}

/// `α_k = Σ (b_j + c_j)(1 − cos kjζ cos jζ)`, `β_k = Σ c_j (cos kjζ − cos jζ)`,
/// `γ_k = Σ (b_j + c_j) sin kjζ sin jζ`, summed over `j = 1..n-1`, with
/// `b_j = 2f′(a²s_j²)`, `c_j = 2a²s_j² f″(a²s_j²)` and `f = δ_j U + W`.
pub fn ring_coefficients_at(model: &ChainModel, radius: f64) -> Result<RingBlockCoefficients> {
    if model.boundary != Boundary::Periodic {
        return Err(Error::InvalidModel("ring blocks need a periodic chain".into()));
    }
    let n = model.n;
    let zeta = 2.0 * PI / n as f64;
    let terms: Vec<(f64, f64)> = (1..n)
        .map(|j| {
            let s = equilibria::chord_factor(n, j as i64);
            let x = radius * radius * s * s;
            let t = model.pair_terms(x, j == 1 || j == n - 1);
            (2.0 * t.d1, 2.0 * x * t.d2)
        })
        .collect();
    let blocks = (1..=n)
        .map(|k| {
            let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
            for (idx, &(b, c)) in terms.iter().enumerate() {
                let j = (idx + 1) as f64;
                let (ckj, skj) = ((k as f64 * j * zeta).cos(), (k as f64 * j * zeta).sin());
                let (cj, sj) = ((j * zeta).cos(), (j * zeta).sin());
                alpha += (b + c) * (1.0 - ckj * cj);
                beta += c * (ckj - cj);
                gamma += (b + c) * skj * sj;
            }
            if k == n || 2 * k == n {
                gamma = 0.0;
            }
            let r = beta.hypot(gamma);
            RingBlock {
                k,
                alpha,
                beta,
                gamma,
                lambda_plus: alpha + r,
                lambda_minus: alpha - r,
            }
        })
        .collect();
    Ok(RingBlockCoefficients { n, radius, blocks })
}

/// Which reduced block an eigenvalue belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BlockLabel {
    /// `block` 0 is axial, 1 transverse.
    Collinear { block: u8 },
    Ring { k: usize, plus: bool },
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockLabel::Collinear { block } => write!(f, "M{block}"),
            BlockLabel::Ring { k, plus } => write!(f, "k={k}{}", if *plus { '+' } else { '-' }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeClass {
    Negative,
    Zero,
    Positive,
}

/// A positive eigenvalue (cluster) from which a branch of periodic orbits
/// may bifurcate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationCandidate {
    pub nu: f64,
    pub lambda: f64,
    pub block: Option<BlockLabel>,
    pub multiplicity: usize,
    pub nonresonant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Ascending eigenvalues of the full Hessian.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors as columns, matching `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
    pub classes: Vec<ModeClass>,
    /// Distance of each eigenvector from the span of the symmetry zero modes.
    pub kernel_residuals: Vec<f64>,
    pub negative_count: usize,
    pub zero_count: usize,
    pub positive_count: usize,
    /// Largest absolute eigenvalue.
    pub hessian_norm: f64,
    pub provenance: Vec<Option<BlockLabel>>,
    /// Largest gap between the sorted block and full spectra, when a block
    /// reduction applies.
    pub block_mismatch: Option<f64>,
    pub candidates: Vec<BifurcationCandidate>,
}

impl SpectralReport {
    /// Candidates with a given block label.
    pub fn candidates_in(&self, label: BlockLabel) -> impl Iterator<Item = &BifurcationCandidate> {
        self.candidates.iter().filter(move |c| c.block == Some(label))
    }
}

/// Orthonormal basis of the symmetry zero modes at `coords`: the two
/// translations and the infinitesimal rotation `J a`.
pub fn symmetry_kernel(coords: &[f64]) -> Vec<Vec<f64>> {
    let n = coords.len() / 2;
    let tx: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let ty: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect();
    let cx = (0..n).map(|j| coords[2 * j]).sum::<f64>() / n as f64;
    let cy = (0..n).map(|j| coords[2 * j + 1]).sum::<f64>() / n as f64;
    let rot: Vec<f64> = (0..n)
        .flat_map(|j| [-(coords[2 * j + 1] - cy), coords[2 * j] - cx])
        .collect();
    linalg::gram_schmidt(&[tx, ty, rot], &[], 1e-12)
}

enum Structure {
    Collinear(Vec<f64>),
    Ring(f64),
    General,
}

fn detect_structure(model: &ChainModel, coords: &[f64]) -> Structure {
    let n = model.n;
    let scale = coords.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if (0..n).all(|j| coords[2 * j + 1].abs() <= 1e-12 * scale) {
        return Structure::Collinear((0..n).map(|j| coords[2 * j]).collect());
    }
    if model.boundary == Boundary::Periodic {
        let radii: Vec<f64> = (0..n).map(|j| coords[2 * j].hypot(coords[2 * j + 1])).collect();
        let r = radii.iter().sum::<f64>() / n as f64;
        let zeta = 2.0 * PI / n as f64;
        let round = radii.iter().all(|x| (x - r).abs() <= 1e-10 * r);
        let steps = (0..n).all(|j| {
            let (p, q) = (j, (j + 1) % n);
            let a = coords[2 * q + 1].atan2(coords[2 * q]) - coords[2 * p + 1].atan2(coords[2 * p]);
            let d = (a - zeta).rem_euclid(2.0 * PI);
            let e = (a + zeta).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) < 1e-9 || e.min(2.0 * PI - e) < 1e-9
        });
        if round && steps {
            return Structure::Ring(r);
        }
    }
    Structure::General
}

/// Dense spectrum of the Hessian at `c`, with stability classification,
/// block provenance and bifurcation candidates.
///
/// An eigenvalue is classified as zero when its eigenvector lies within
/// `zero_tol` of the span of the translations and the rotation, or when its
/// magnitude is below `1e-10 ‖H‖`; every other eigenvalue is classified by
/// sign.
pub fn full_spectrum(model: &ChainModel, c: &Configuration, zero_tol: f64) -> Result<SpectralReport> {
    let coords = c.as_slice();
    let h = model.hessian(coords)?;
    let eig = symmetric_eigen(&h)?;
    let dim = model.dim();
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kernel = symmetry_kernel(coords);

    let mut classes = Vec::with_capacity(dim);
    let mut kernel_residuals = Vec::with_capacity(dim);
    for (i, &lambda) in eig.values.iter().enumerate() {
        let v: Vec<f64> = eig.vectors.column(i).iter().copied().collect();
        let mut r = v.clone();
        for b in &kernel {
            let c = linalg::dot(&r, b);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= c * bi);
        }
        let residual = linalg::norm(&r);
        kernel_residuals.push(residual);
        classes.push(if residual <= zero_tol || lambda.abs() <= SIGN_THRESHOLD * norm {
            ModeClass::Zero
        } else if lambda < 0.0 {
            ModeClass::Negative
        } else {
            ModeClass::Positive
        });
    }

    let labelled: Option<Vec<(f64, BlockLabel)>> = match detect_structure(model, coords) {
        Structure::Collinear(x) => {
            let (e0, e1) = collinear_blocks_at(model, &x)?.eigenvalues()?;
            Some(
                e0.into_iter()
                    .map(|v| (v, BlockLabel::Collinear { block: 0 }))
                    .chain(e1.into_iter().map(|v| (v, BlockLabel::Collinear { block: 1 })))
                    .collect(),
            )
        }
        Structure::Ring(r) => Some(
            ring_coefficients_at(model, r)?
                .blocks
                .iter()
                .flat_map(|b| {
                    [
                        (b.lambda_minus, BlockLabel::Ring { k: b.k, plus: false }),
                        (b.lambda_plus, BlockLabel::Ring { k: b.k, plus: true }),
                    ]
                })
                .collect(),
        ),
        Structure::General => None,
    };
    let (provenance, block_mismatch) = match labelled {
        Some(mut l) => {
            l.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mismatch = l
                .iter()
                .zip(&eig.values)
                .fold(0.0f64, |m, (b, f)| m.max((b.0 - f).abs()));
            let prov = if mismatch <= 1e-8 * norm.max(1.0) {
                l.iter().map(|b| Some(b.1)).collect()
            } else {
                vec![None; dim]
            };
            (prov, Some(mismatch))
        }
        None => (vec![None; dim], None),
    };

    let candidates = bifurcation_candidates(&eig.values, &classes, &provenance, norm);
    let count = |k: ModeClass| classes.iter().filter(|&&c| c == k).count();
    Ok(SpectralReport {
        negative_count: count(ModeClass::Negative),
        zero_count: count(ModeClass::Zero),
        positive_count: count(ModeClass::Positive),
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        classes,
        kernel_residuals,
        hessian_norm: norm,
        provenance,
        block_mismatch,
        candidates,
    })
}

fn bifurcation_candidates(
    values: &[f64],
    classes: &[ModeClass],
    provenance: &[Option<BlockLabel>],
    norm: f64,
) -> Vec<BifurcationCandidate> {
    let cluster_tol = 1e-8 * norm.max(1.0);
    let resonance_tol = RESONANCE_TOL * norm.max(1.0);
    let mut out: Vec<BifurcationCandidate> = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if classes[i] != ModeClass::Positive {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < values.len() && classes[j] == ModeClass::Positive && values[j] - values[j - 1] <= cluster_tol {
            j += 1;
        }
        let lambda = values[i..j].iter().sum::<f64>() / (j - i) as f64;
        // Prefer the lower Fourier index of a k, n-k pair.
        let block = provenance[i..j]
            .iter()
            .flatten()
            .copied()
            .min_by_key(|l| match l {
                BlockLabel::Ring { k, .. } => *k,
                BlockLabel::Collinear { block } => *block as usize,
            });
        out.push(BifurcationCandidate {
            nu: lambda.sqrt(),
            lambda,
            block,
            multiplicity: j - i,
            nonresonant: is_nonresonant(lambda, values, 2, resonance_tol),
        });
        i = j;
    }
    out
}

/// Smallest `l ≥ 2` with `l² nu_sq` beyond every eigenvalue.
pub fn default_l_max(nu_sq: f64, spectrum: &[f64]) -> u32 {
    let top = spectrum.iter().fold(0.0f64, |m, &v| m.max(v));
    ((top / nu_sq).sqrt().floor() as u32 + 1).max(2)
}

/// First `(l, eigenvalue)` with `|l² nu_sq − eigenvalue| ≤ tol`, for
/// `l = 2..=l_max`; `l_max` is raised if needed so that `l_max² nu_sq`
/// exceeds the largest eigenvalue.
pub fn first_resonance(nu_sq: f64, spectrum: &[f64], l_max: u32, tol: f64) -> Option<(u32, f64)> {
    assert!(nu_sq > 0.0, "nu_sq must be positive");
    let l_max = l_max.max(default_l_max(nu_sq, spectrum));
    (2..=l_max).find_map(|l| {
        let target = (l * l) as f64 * nu_sq;
        spectrum
            .iter()
            .find(|&&e| (target - e).abs() <= tol)
            .map(|&e| (l, e))
    })
}

/// `true` iff no `l² nu_sq` (`l ≥ 2`) lies within `tol` of the spectrum.
pub fn is_nonresonant(nu_sq: f64, spectrum: &[f64], l_max: u32, tol: f64) -> bool {
    first_resonance(nu_sq, spectrum, l_max, tol).is_none()
}

/// Spectrum at a solved equilibrium.
pub fn equilibrium_spectrum(model: &ChainModel, eq: &Equilibrium) -> Result<SpectralReport> {
    full_spectrum(model, &eq.configuration(), KERNEL_TOL)
}

/// One row of the negative-eigenvalue count table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub collinear: usize,
    pub ring: usize,
}

/// Negative eigenvalue counts of the collinear and ring equilibria for each
/// `n` in the range, computed in parallel and returned in `n` order.
pub fn negative_count_table(
    params: ForceFieldParams,
    n_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<CountRow>> {
    if *n_range.start() < 3 || *n_range.end() > 20 {
        return Err(Error::InvalidParams(format!(
            "count table needs 3 <= n <= 20, got {}..={}",
            n_range.start(),
            n_range.end()
        )));
    }
    let ns: Vec<usize> = n_range.collect();
    ns.par_iter()
        .map(|&n| {
            let count = |b: Boundary| -> Result<usize> {
                let model = ChainModel::new(n, b, params)?;
                let eq = equilibria::solve_equilibrium(&model, NewtonOptions::default())?;
                Ok(equilibrium_spectrum(&model, &eq)?.negative_count)
            };
            Ok(CountRow {
                n,
                collinear: count(Boundary::Neumann)?,
                ring: count(Boundary::Periodic)?,
            })
        })
        .collect()
}
