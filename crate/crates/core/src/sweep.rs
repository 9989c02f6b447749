//! Stability sweeps over the `(A, B)` plane.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{solve_equilibrium, NewtonOptions};
use crate::error::{Error, Result};
use crate::potential::{Boundary, ChainModel, ForceFieldParams};
use crate::spectra::equilibrium_spectrum;

/// Inclusive range `lo:hi` sampled at `steps` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || steps == 0 {
            return Err(Error::InvalidParams(format!(
                "grid axis needs finite lo <= hi and steps >= 1, got {lo}:{hi}:{steps}"
            )));
        }
        if steps == 1 && lo != hi {
            return Err(Error::InvalidParams(format!("a single-step axis needs lo == hi, got {lo}:{hi}")));
        }
        Ok(Axis { lo, hi, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + h * i as f64 })
            .collect()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::InvalidParams(format!("expected lo:hi:steps, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].parse().map_err(|_| bad())?;
        let hi = parts[1].parse().map_err(|_| bad())?;
        let steps = parts[2].parse().map_err(|_| bad())?;
        Axis::new(lo, hi, steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepGrid {
    pub a: Axis,
    pub b: Axis,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            a: Axis { lo: 0.0, hi: 1.0, steps: 21 },
            b: Axis { lo: 0.0, hi: 100.0, steps: 21 },
        }
    }
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.a.steps * self.b.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order: `A` outer, `B` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let bs = self.b.values();
        self.a
            .values()
            .into_iter()
            .flat_map(|a| bs.iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub a: f64,
    pub b: f64,
    /// Half length or radius; NaN when the cell failed.
    pub size_metric: f64,
    pub negative_count: Option<usize>,
    /// Short failure tag, `None` on success.
    pub failure: Option<String>,
}

impl SweepCell {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn status(&self) -> &str {
        self.failure.as_deref().unwrap_or("ok")
    }
}

fn failure_tag(e: &Error) -> &'static str {
    match e {
        Error::NoBracket { .. } => "no_bracket",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Collision { .. } | Error::TrajectoryCollision { .. } => "collision",
        Error::EigenNonConvergence { .. } => "eigen_non_convergence",
        Error::Domain(_) => "domain",
        _ => "error",
    }
}

fn solve_cell(n: usize, boundary: Boundary, coulomb: f64, a: f64, b: f64, opts: NewtonOptions) -> SweepCell {
    let run = || -> Result<(f64, usize)> {
        let model = ChainModel::new(n, boundary, ForceFieldParams::new(a, b, coulomb)?)?;
        let eq = solve_equilibrium(&model, opts)?;
        let report = equilibrium_spectrum(&model, &eq)?;
        Ok((eq.size_metric(), report.negative_count))
    };
    match run() {
        Ok((size_metric, count)) => SweepCell {
            a,
            b,
            size_metric,
            negative_count: Some(count),
            failure: None,
        },
        Err(e) => SweepCell {
            a,
            b,
            size_metric: f64::NAN,
            negative_count: None,
            failure: Some(failure_tag(&e).to_string()),
        },
    }
}

/// Solves every cell of the grid. Cells are independent and run in
/// parallel; the result is in row-major order regardless of scheduling.
pub fn sweep(n: usize, boundary: Boundary, coulomb: f64, grid: &SweepGrid, opts: NewtonOptions) -> Vec<SweepCell> {
    grid.cells()
        .into_par_iter()
        .map(|(a, b)| solve_cell(n, boundary, coulomb, a, b, opts))
        .collect()
}
