//! Numerical verification of the identities a transition function must obey.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{TailEstimate, TransitionKernel};
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, SpatialGrid};

/// Mass a kernel may place outside the grid before results are untrusted.
pub const DEFAULT_TRUNCATION_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ChapmanKolmogorovReport {
    pub max_error: f64,
    /// Number of source points `x` whose tails fit inside the grid.
    pub trusted_sources: usize,
    /// False when some tail estimate was unavailable.
    pub tail_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationReport {
    pub max_error: f64,
    pub trusted_sources: usize,
}

/// Grid indices `i` with tail mass of `p(x_i, ., t)` below `budget` at every
/// time in `times`, and whether every estimate was available.
pub fn trusted_sources(
    kernel: &TransitionKernel,
    grid: &SpatialGrid,
    times: &[f64],
    budget: f64,
) -> Result<(Vec<usize>, bool)> {
    let mut certified = true;
    let mut smallest = f64::INFINITY;
    let mut keep = Vec::new();
    for (i, x) in grid.points().enumerate() {
        let mut worst: f64 = 0.0;
        for &t in times {
            match kernel.tail_mass(x, t, grid.a(), grid.b()) {
                TailEstimate::Bound(m) => worst = worst.max(m),
                TailEstimate::Unknown => certified = false,
            }
        }
        smallest = smallest.min(worst);
        if worst <= budget {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(Error::TruncationBudgetExceeded { mass: smallest, budget });
    }
    Ok((keep, certified))
}

fn sample_matrix(kernel: &TransitionKernel, grid: &SpatialGrid, t: f64) -> Result<Vec<Complex64>> {
    let n = grid.len();
    if let Some(off) = kernel.convolution_offsets(grid, t)? {
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = off[i + n - 1 - j];
            }
        }
        return Ok(m);
    }
    let xs: Vec<f64> = grid.points().collect();
    let rows = xs
        .par_iter()
        .map(|&x| xs.iter().map(|&y| kernel.eval(x, y, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// `max |int p(x, z, t - s) p(z, y, s) dz - p(x, y, t)|` over trusted sources
/// `x` and all grid `y`, with trapezoid quadrature in `z`.
pub fn check_chapman_kolmogorov(
    kernel: &TransitionKernel,
    grid: &SpatialGrid,
    t: f64,
    s: f64,
) -> Result<ChapmanKolmogorovReport> {
    check_chapman_kolmogorov_with_budget(kernel, grid, t, s, DEFAULT_TRUNCATION_BUDGET)
}

pub fn check_chapman_kolmogorov_with_budget(
    kernel: &TransitionKernel,
    grid: &SpatialGrid,
    t: f64,
    s: f64,
    budget: f64,
) -> Result<ChapmanKolmogorovReport> {
    if !(s > 0.0 && s < t) {
        return Err(invalid(format!(
            "Chapman-Kolmogorov needs 0 < s < t, got s = {s}, t = {t}"
        )));
    }
    let (rows, certified) = trusted_sources(kernel, grid, &[s, t - s, t], budget)?;
    let n = grid.len();
    let h = grid.spacing();
    let first = sample_matrix(kernel, grid, t - s)?;
    let second = sample_matrix(kernel, grid, s)?;
    let full = sample_matrix(kernel, grid, t)?;
    let max_error = rows
        .par_iter()
        .map(|&i| {
            let a = &first[i * n..(i + 1) * n];
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (k, ak) in a.iter().enumerate() {
                let w = grid.weight(k) * h * ak;
                for (c, b) in acc.iter_mut().zip(&second[k * n..(k + 1) * n]) {
                    *c += w * b;
                }
            }
            acc.iter()
                .zip(&full[i * n..(i + 1) * n])
                .map(|(c, p)| (c - p).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(ChapmanKolmogorovReport {
        max_error,
        trusted_sources: rows.len(),
        tail_certified: certified,
    })
}

/// `max |int p(x, y, t) dy - 1|` over trusted sources.
pub fn check_normalization(kernel: &TransitionKernel, grid: &SpatialGrid, t: f64) -> Result<NormalizationReport> {
    let (rows, _) = trusted_sources(kernel, grid, &[t], DEFAULT_TRUNCATION_BUDGET)?;
    let ys: Vec<f64> = grid.points().collect();
    let max_error = rows
        .par_iter()
        .map(|&i| -> Result<f64> {
            let x = grid.point(i);
            let vals = ys.iter().map(|&y| kernel.eval(x, y, t)).collect::<Result<Vec<_>>>()?;
            Ok((crate::grid::quadrature(grid, &vals) - 1.0).norm())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(NormalizationReport {
        max_error,
        trusted_sources: rows.len(),
    })
}

/// `|int p(x, y, delta) g(y) dy - g(x)|` at the grid centre for each delta.
pub fn check_delta_limit(kernel: &TransitionKernel, test_function: &Field, deltas: &[f64]) -> Result<Vec<f64>> {
    let g = test_function.grid();
    check_delta_limit_at(kernel, test_function, g.point((g.len() - 1) / 2), deltas)
}

/// As [`check_delta_limit`], at the grid node `x`.
pub fn check_delta_limit_at(
    kernel: &TransitionKernel,
    test_function: &Field,
    x: f64,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    if deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("delta sequence must be positive and strictly decreasing"));
    }
    let grid = test_function.grid();
    let i = grid.require_index(x)?;
    let target = test_function.get(i);
    deltas
        .iter()
        .map(|&d| {
            let vals = grid
                .points()
                .zip(test_function.values())
                .map(|(y, g)| kernel.eval(x, y, d).map(|p| p * g))
                .collect::<Result<Vec<_>>>()?;
            Ok((crate::grid::quadrature(grid, &vals) - target).norm())
        })
        .collect()
}
