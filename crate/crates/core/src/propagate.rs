//! Time-sliced propagation: Lie/Strang splitting of `exp(t (A - V))`, the
//! perturbed fundamental solution, and deterministic cylinder limits of path
//! integrals.
//!
//! One Lie slice is `f <- T_dt (exp(-V dt) f)`; one Strang slice is
//! `f <- exp(-V dt/2) T_dt (exp(-V dt/2) f)`, where `T_dt` is kernel
//! application. Starting from the discrete delta at `y`, `N` slices give the
//! column `x -> phi_V(x, y; t)` of the `N`-slice cylinder approximation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::kernel::TransitionKernel;
use crate::potential::Potential;
use crate::transport::Transport;

const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingScheme {
    #[default]
    Lie,
    Strang,
}

/// `N` equal slices of `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSchedule {
    t: f64,
    slices: usize,
    dt: f64,
    scheme: SplittingScheme,
}

impl SliceSchedule {
    pub fn new(t: f64, slices: usize, scheme: SplittingScheme) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NonPositiveTime(t));
        }
        if slices == 0 {
            return Err(invalid("slice count must be >= 1"));
        }
        Ok(Self {
            t,
            slices,
            dt: t / slices as f64,
            scheme,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> SplittingScheme {
        self.scheme
    }
}

/// `exp(-V(x_j) tau)` on the grid, with an overflow guard.
pub(crate) fn potential_factor(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    v.iter()
        .map(|&vj| {
            let e = -vj * tau;
            if e > EXP_GUARD {
                Err(Error::Overflow(format!("exp(-V tau) with V tau = {:e}", vj * tau)))
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

fn scale_in_place(values: &mut [Complex64], factor: &[f64]) {
    for (v, f) in values.iter_mut().zip(factor) {
        *v *= f;
    }
}

/// Splitting propagation of `f0` with an explicit transport.
pub fn trotter_propagate_with(
    transport: &Transport,
    f0: &Field,
    v: &Potential,
    schedule: &SliceSchedule,
) -> Result<Field> {
    if f0.grid() != transport.grid() {
        return Err(Error::GridMismatch);
    }
    let vs = v.sample(transport.grid())?;
    let dt = schedule.dt();
    let op = transport.operator(dt)?;
    let mut values = f0.values().to_vec();
    match schedule.scheme() {
        SplittingScheme::Lie => {
            let factor = potential_factor(&vs, dt)?;
            for _ in 0..schedule.slices() {
                scale_in_place(&mut values, &factor);
                values = transport.apply_values(&op, &values);
            }
        }
        SplittingScheme::Strang => {
            let half = potential_factor(&vs, 0.5 * dt)?;
            for _ in 0..schedule.slices() {
                scale_in_place(&mut values, &half);
                values = transport.apply_values(&op, &values);
                scale_in_place(&mut values, &half);
            }
        }
    }
    Ok(f0.with_values(values, transport.output_kind(f0.kind())))
}

/// Approximates `exp(t (A - V)) f0` by `N` splitting slices.
pub fn trotter_propagate(
    f0: &Field,
    kernel: &TransitionKernel,
    v: &Potential,
    schedule: &SliceSchedule,
) -> Result<Field> {
    let transport = Transport::auto(kernel, *f0.grid())?;
    trotter_propagate_with(&transport, f0, v, schedule)
}

/// Column `x -> phi_V(x, y; t)` from the discrete delta at `y`.
pub fn fundamental_solution_v(
    kernel: &TransitionKernel,
    v: &Potential,
    grid: &SpatialGrid,
    schedule: &SliceSchedule,
    y: f64,
) -> Result<Field> {
    let delta = Field::delta(*grid, y)?;
    trotter_propagate(&delta, kernel, v, schedule)
}

/// `N`-slice cylinder approximation of `int exp(-int_0^t V) d mu^{x,y;t}`,
/// the `(x, y)` entry of the sliced `phi_V`.
#[allow(clippy::too_many_arguments)]
pub fn cylinder_integral_exp(
    kernel: &TransitionKernel,
    v: &Potential,
    grid: &SpatialGrid,
    x: f64,
    y: f64,
    t: f64,
    slices: usize,
    scheme: SplittingScheme,
) -> Result<Complex64> {
    if !v.bounded_below() {
        return Err(Error::UnboundedComposite(
            "exp(-action) needs a potential bounded below".into(),
        ));
    }
    let ix = grid.require_index(x)?;
    let schedule = SliceSchedule::new(t, slices, scheme)?;
    Ok(fundamental_solution_v(kernel, v, grid, &schedule, y)?.get(ix))
}

/// Path weights resolved by accumulated action: `weights[b][j]` is the weight
/// of paths ending at grid node `j` whose action `int V ds` lies at bin `b`.
#[derive(Debug, Clone)]
pub struct ActionHistogram {
    grid: SpatialGrid,
    lo: f64,
    hi: f64,
    weights: Vec<Vec<Complex64>>,
}

impl ActionHistogram {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / (self.bins() - 1) as f64
    }

    pub fn action(&self, b: usize) -> f64 {
        self.lo + b as f64 * self.bin_width()
    }

    pub fn action_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn weight(&self, j: usize, b: usize) -> Complex64 {
        self.weights[b][j]
    }

    /// Sum over bins at node `j`; equals the unweighted slice integral.
    pub fn total_weight(&self, j: usize) -> Complex64 {
        self.weights.iter().map(|layer| layer[j]).sum()
    }

    /// `sum_b f(a_b) weight(j, b)`.
    pub fn integrate(&self, j: usize, f: impl Fn(f64) -> f64) -> Complex64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(b, layer)| f(self.action(b)) * layer[j])
            .sum()
    }

    /// Propagates the discrete delta at `y` for `schedule`, shifting actions
    /// by `V(x) dt` with linear deposit and transporting every action layer.
    pub fn propagate(
        transport: &Transport,
        v: &Potential,
        y: f64,
        schedule: &SliceSchedule,
        bins: usize,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(invalid("action histogram needs at least 2 bins"));
        }
        let grid = *transport.grid();
        let vs = v
            .sample(&grid)
            .map_err(|e| Error::ActionRangeUnbounded(e.to_string()))?;
        let (vmin, vmax) = vs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        let t = schedule.t();
        let lo = (t * vmin).min(0.0);
        let mut hi = (t * vmax).max(0.0);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::ActionRangeUnbounded(format!("V range [{vmin}, {vmax}]")));
        }
        if hi - lo <= f64::MIN_POSITIVE {
            hi = lo + 1.0;
        }
        let n = grid.len();
        let mut hist = Self {
            grid,
            lo,
            hi,
            weights: vec![vec![Complex64::new(0.0, 0.0); n]; bins],
        };
        let src = grid.require_index(y)?;
        let pos = -lo / hist.bin_width();
        hist.deposit_point(src, pos, Complex64::new(1.0 / grid.spacing(), 0.0));

        let dt = schedule.dt();
        let op = transport.operator(dt)?;
        let step = |hist: &mut Self, tau: f64| {
            let shifts: Vec<f64> = vs.iter().map(|v| v * tau / hist.bin_width()).collect();
            hist.shift(&shifts);
        };
        for _ in 0..schedule.slices() {
            match schedule.scheme() {
                SplittingScheme::Lie => {
                    step(&mut hist, dt);
                    hist.transport(transport, &op);
                }
                SplittingScheme::Strang => {
                    step(&mut hist, 0.5 * dt);
                    hist.transport(transport, &op);
                    step(&mut hist, 0.5 * dt);
                }
            }
        }
        Ok(hist)
    }

    fn deposit_point(&mut self, j: usize, pos: f64, w: Complex64) {
        let last = self.bins() - 1;
        let pos = pos.clamp(0.0, last as f64);
        let i0 = (pos.floor() as usize).min(last - 1);
        let frac = pos - i0 as f64;
        self.weights[i0][j] += (1.0 - frac) * w;
        self.weights[i0 + 1][j] += frac * w;
    }

    /// Moves the weight at node `j` by `shifts[j]` bins.
    fn shift(&mut self, shifts: &[f64]) {
        let bins = self.bins();
        let n = self.grid.len();
        let mut next = vec![vec![Complex64::new(0.0, 0.0); n]; bins];
        let last = (bins - 1) as f64;
        for (j, &s) in shifts.iter().enumerate() {
            for b in 0..bins {
                let w = self.weights[b][j];
                if w.re == 0.0 && w.im == 0.0 {
                    continue;
                }
                let pos = (b as f64 + s).clamp(0.0, last);
                let i0 = (pos.floor() as usize).min(bins - 2);
                let frac = pos - i0 as f64;
                next[i0][j] += (1.0 - frac) * w;
                next[i0 + 1][j] += frac * w;
            }
        }
        self.weights = next;
    }

    fn transport(&mut self, transport: &Transport, op: &crate::transport::StepOperator) {
        self.weights.par_iter_mut().for_each(|layer| {
            if layer.iter().any(|w| w.re != 0.0 || w.im != 0.0) {
                *layer = transport.apply_values(op, layer);
            }
        });
    }
}

/// Deterministic cylinder limit of `int f(int_0^t V(gamma) ds) d mu^{x,y;t}`
/// through an [`ActionHistogram`] with `bins` action bins.
#[allow(clippy::too_many_arguments)]
pub fn cylinder_integral_general(
    kernel: &TransitionKernel,
    v: &Potential,
    f: impl Fn(f64) -> f64,
    grid: &SpatialGrid,
    x: f64,
    y: f64,
    t: f64,
    slices: usize,
    bins: usize,
) -> Result<Complex64> {
    let ix = grid.require_index(x)?;
    let schedule = SliceSchedule::new(t, slices, SplittingScheme::Lie)?;
    let transport = Transport::auto(kernel, *grid)?;
    let hist = ActionHistogram::propagate(&transport, v, y, &schedule, bins)?;
    Ok(hist.integrate(ix, f))
}
