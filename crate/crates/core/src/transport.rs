//! Kernel application `g(x) = int p(x, y, dt) f(y) dy` on a grid.
//!
//! The direct method is an `O(n^2)` trapezoid sum and works for every kernel.
//! The spectral method applies `m(k, dt)` to the DFT of the samples; it is a
//! circular convolution, so kernels must carry less than the truncation budget
//! beyond half the domain width.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, ScalarKind, SpatialGrid};
use crate::kernel::{KernelKind, TailEstimate, TransitionKernel, DEFAULT_TRUNCATION_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    Direct,
    Spectral,
}

/// Precomputed action of the kernel for one time step.
#[derive(Debug, Clone)]
pub enum StepOperator {
    /// Multiplier on DFT coefficients, with the `1/n` normalization folded in.
    Spectral(Vec<Complex64>),
    /// Row-major `n x n` matrix with trapezoid weights folded in.
    Direct(Vec<Complex64>),
}

/// Kernel application on a fixed grid.
#[derive(Clone)]
pub struct Transport {
    kernel: TransitionKernel,
    grid: SpatialGrid,
    method: TransportMethod,
    budget: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Transport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transport")
            .field("kernel", &self.kernel)
            .field("grid", &self.grid)
            .field("method", &self.method)
            .field("budget", &self.budget)
            .finish()
    }
}

impl Transport {
    pub fn new(kernel: &TransitionKernel, grid: SpatialGrid, method: TransportMethod) -> Result<Self> {
        let wavenumbers = grid.wavenumbers();
        if method == TransportMethod::Spectral {
            if !kernel.has_symbol() {
                return Err(Error::NoSymbol);
            }
            for &k in &wavenumbers {
                let re = kernel.symbol(k)?.re;
                if re < -1e-9 {
                    return Err(Error::UnstableSymbol(format!(
                        "Re sigma(ik) = {re:e} < 0 at grid wavenumber {k}"
                    )));
                }
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            kernel: kernel.clone(),
            grid,
            method,
            budget: DEFAULT_TRUNCATION_BUDGET,
            fft: planner.plan_fft_forward(grid.len()),
            ifft: planner.plan_fft_inverse(grid.len()),
            wavenumbers,
        })
    }

    /// Spectral when the kernel has a symbol, direct otherwise.
    pub fn auto(kernel: &TransitionKernel, grid: SpatialGrid) -> Result<Self> {
        let method = if kernel.has_symbol() {
            TransportMethod::Spectral
        } else {
            TransportMethod::Direct
        };
        Self::new(kernel, grid, method)
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn method(&self) -> TransportMethod {
        self.method
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Kind of the output for an input of kind `input`.
    pub fn output_kind(&self, input: ScalarKind) -> ScalarKind {
        if input == ScalarKind::Real && self.kernel.is_real_valued() {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        }
    }

    fn check_truncation(&self, dt: f64) -> Result<()> {
        let g = &self.grid;
        match self.kernel.tail_mass(g.center(), dt, g.a(), g.b()) {
            TailEstimate::Bound(mass) if mass > self.budget => Err(Error::TruncationBudgetExceeded {
                mass,
                budget: self.budget,
            }),
            _ => Ok(()),
        }
    }

    /// Builds the one-step operator for time `dt > 0`.
    pub fn operator(&self, dt: f64) -> Result<StepOperator> {
        if !(dt > 0.0) {
            return Err(Error::NonPositiveTime(dt));
        }
        self.check_truncation(dt)?;
        let n = self.grid.len();
        match self.method {
            TransportMethod::Spectral => {
                let scale = 1.0 / n as f64;
                let m = self
                    .wavenumbers
                    .iter()
                    .map(|&k| self.kernel.multiplier(k, dt).map(|m| m * scale))
                    .collect::<Result<Vec<_>>>()?;
                Ok(StepOperator::Spectral(m))
            }
            TransportMethod::Direct => Ok(StepOperator::Direct(self.direct_matrix(dt)?)),
        }
    }

    fn direct_matrix(&self, dt: f64) -> Result<Vec<Complex64>> {
        let g = &self.grid;
        let n = g.len();
        let h = g.spacing();
        let weights: Vec<f64> = (0..n).map(|j| g.weight(j) * h).collect();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        if let Some(off) = self.kernel.convolution_offsets(g, dt)? {
            m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = off[i + n - 1 - j] * weights[j];
                }
            });
            return Ok(m);
        }
        if let KernelKind::Tabulated(tab) = self.kernel.kind() {
            if tab.grid() == g {
                let samples = tab.matrix(dt)?;
                for (i, row) in m.chunks_mut(n).enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = Complex64::new(samples[i * n + j] * weights[j], 0.0);
                    }
                }
                return Ok(m);
            }
        }
        let xs: Vec<f64> = g.points().collect();
        let kernel = &self.kernel;
        m.par_chunks_mut(n).enumerate().try_for_each(|(i, row)| -> Result<()> {
            for (j, v) in row.iter_mut().enumerate() {
                *v = kernel.eval(xs[i], xs[j], dt)? * weights[j];
            }
            Ok(())
        })?;
        Ok(m)
    }

    /// Maps samples into the working representation of this transport
    /// (DFT coefficients for spectral, samples for direct).
    pub fn to_work(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut w = values.to_vec();
        if self.method == TransportMethod::Spectral {
            self.fft.process(&mut w);
        }
        w
    }

    pub fn from_work(&self, mut work: Vec<Complex64>) -> Vec<Complex64> {
        if self.method == TransportMethod::Spectral {
            self.ifft.process(&mut work);
        }
        work
    }

    /// `acc += weight * op(work)` in the working representation.
    pub fn accumulate(&self, op: &StepOperator, work: &[Complex64], weight: f64, acc: &mut [Complex64]) {
        match op {
            StepOperator::Spectral(m) => {
                for ((a, w), mk) in acc.iter_mut().zip(work).zip(m) {
                    *a += weight * mk * w;
                }
            }
            StepOperator::Direct(mat) => {
                let n = work.len();
                acc.par_iter_mut().enumerate().for_each(|(i, a)| {
                    let row = &mat[i * n..(i + 1) * n];
                    let s: Complex64 = row.iter().zip(work).map(|(r, w)| r * w).sum();
                    *a += weight * s;
                });
            }
        }
    }

    /// Applies a prebuilt operator to raw samples.
    pub fn apply_values(&self, op: &StepOperator, values: &[Complex64]) -> Vec<Complex64> {
        match op {
            StepOperator::Spectral(m) => {
                let mut w = self.to_work(values);
                for (v, mk) in w.iter_mut().zip(m) {
                    *v *= mk;
                }
                self.from_work(w)
            }
            StepOperator::Direct(_) => {
                let mut acc = vec![Complex64::new(0.0, 0.0); values.len()];
                self.accumulate(op, values, 1.0, &mut acc);
                acc
            }
        }
    }

    pub fn apply_with(&self, op: &StepOperator, field: &Field) -> Result<Field> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let out = self.apply_values(op, field.values());
        Ok(field.with_values(out, self.output_kind(field.kind())))
    }

    /// `A f` for the generator `A` of a kernel with a symbol, evaluated as
    /// `-sigma(ik)` on DFT coefficients.
    pub fn generator(&self, field: &Field) -> Result<Field> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let mut w = field.values().to_vec();
        self.fft.process(&mut w);
        for (v, &k) in w.iter_mut().zip(&self.wavenumbers) {
            *v *= -self.kernel.symbol(k)? / n as f64;
        }
        self.ifft.process(&mut w);
        Ok(field.with_values(w, self.output_kind(field.kind())))
    }

    pub fn apply(&self, field: &Field, dt: f64) -> Result<Field> {
        let op = self.operator(dt)?;
        self.apply_with(&op, field)
    }
}

/// `g(x) = int p(x, y, dt) f(y) dy` by the requested method.
pub fn apply_kernel(field: &Field, kernel: &TransitionKernel, dt: f64, method: TransportMethod) -> Result<Field> {
    if field.is_empty() {
        return Err(invalid("empty field"));
    }
    Transport::new(kernel, *field.grid(), method)?.apply(field, dt)
}

/// Operators `T_{l dt}` for lags `l = 1..=max_lag`, built lazily and cached
/// while the cache stays under a memory cap.
pub(crate) struct LagOperators<'a> {
    transport: &'a Transport,
    dt: f64,
    cache: Option<Vec<OnceLock<StepOperator>>>,
}

const LAG_CACHE_BYTES: usize = 1 << 29;

impl<'a> LagOperators<'a> {
    pub(crate) fn new(transport: &'a Transport, dt: f64, max_lag: usize) -> Self {
        let n = transport.grid().len();
        let per_op = match transport.method() {
            TransportMethod::Spectral => n,
            TransportMethod::Direct => n * n,
        } * std::mem::size_of::<Complex64>();
        let cache = (per_op.saturating_mul(max_lag) <= LAG_CACHE_BYTES)
            .then(|| (0..max_lag).map(|_| OnceLock::new()).collect());
        Self { transport, dt, cache }
    }

    /// Runs `f` with the operator for lag `l >= 1`.
    pub(crate) fn with<R>(&self, lag: usize, f: impl FnOnce(&StepOperator) -> R) -> Result<R> {
        let tau = lag as f64 * self.dt;
        match &self.cache {
            Some(cells) => {
                let cell = &cells[lag - 1];
                if let Some(op) = cell.get() {
                    return Ok(f(op));
                }
                let op = self.transport.operator(tau)?;
                Ok(f(cell.get_or_init(|| op)))
            }
            None => Ok(f(&self.transport.operator(tau)?)),
        }
    }

    /// Builds every cached operator up front, in parallel.
    pub(crate) fn warm(&self) -> Result<()> {
        if let Some(cells) = &self.cache {
            cells.par_iter().enumerate().try_for_each(|(i, cell)| -> Result<()> {
                if cell.get().is_none() {
                    let op = self.transport.operator((i + 1) as f64 * self.dt)?;
                    let _ = cell.set(op);
                }
                Ok(())
            })?;
        }
        Ok(())
    }
}
