//! Time marching for the integral equation
//! `phi_V(t) = T_t delta_y - int_0^t T_{t-s} (V phi_V(s)) ds`.
//!
//! Uniform steps with trapezoid weights. At `s = t` the kernel is the delta,
//! so the last node contributes `-(ds/2) V(x) phi_V(x, t)` and is moved to the
//! left-hand side.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, ScalarKind, SpatialGrid};
use crate::kernel::TransitionKernel;
use crate::potential::Potential;
use crate::transport::{LagOperators, Transport};

/// Columns `x -> phi_V(x, y; s_m)` on the uniform time grid `s_m = m t / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraState {
    grid: SpatialGrid,
    source: f64,
    times: Vec<f64>,
    columns: Vec<Field>,
}

#[derive(Serialize, Deserialize)]
struct ColumnRepr {
    time: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    grid: SpatialGrid,
    source: f64,
    scalar_kind: ScalarKind,
    columns: Vec<ColumnRepr>,
}

impl VolterraState {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn source(&self) -> f64 {
        self.source
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn columns(&self) -> &[Field] {
        &self.columns
    }

    pub fn column(&self, m: usize) -> &Field {
        &self.columns[m]
    }

    pub fn last(&self) -> &Field {
        self.columns.last().expect("state holds at least the initial column")
    }

    /// Mutable access for diagnostics such as corruption tests.
    pub fn column_mut(&mut self, m: usize) -> &mut Field {
        &mut self.columns[m]
    }

    pub fn to_json(&self) -> String {
        let repr = StateRepr {
            grid: self.grid,
            source: self.source,
            scalar_kind: self.last().kind(),
            columns: self
                .times
                .iter()
                .zip(&self.columns)
                .map(|(&time, c)| ColumnRepr {
                    time,
                    re: c.re(),
                    im: c.im(),
                })
                .collect(),
        };
        serde_json::to_string(&repr).expect("state serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: StateRepr = serde_json::from_str(s).map_err(|e| invalid(format!("volterra state json: {e}")))?;
        if repr.columns.len() < 2 {
            return Err(invalid("volterra state needs at least two time levels"));
        }
        let mut times = Vec::with_capacity(repr.columns.len());
        let mut columns = Vec::with_capacity(repr.columns.len());
        for c in repr.columns {
            if c.re.len() != repr.grid.len() || c.im.len() != repr.grid.len() {
                return Err(Error::GridMismatch);
            }
            let vals = c.re.iter().zip(&c.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            times.push(c.time);
            columns.push(Field::new(repr.grid, vals, repr.scalar_kind)?);
        }
        Ok(Self {
            grid: repr.grid,
            source: repr.source,
            times,
            columns,
        })
    }
}

fn times(t: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|m| t * m as f64 / steps as f64).collect()
}

fn validate(t: f64, steps: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if steps == 0 {
        return Err(invalid("time steps must be >= 1"));
    }
    Ok(())
}

pub fn volterra_solve(
    kernel: &TransitionKernel,
    v: &Potential,
    y: f64,
    t: f64,
    grid: &SpatialGrid,
    steps: usize,
) -> Result<VolterraState> {
    let transport = Transport::auto(kernel, *grid)?;
    volterra_solve_with(&transport, v, y, t, steps)
}

pub fn volterra_solve_with(
    transport: &Transport,
    v: &Potential,
    y: f64,
    t: f64,
    steps: usize,
) -> Result<VolterraState> {
    validate(t, steps)?;
    let grid = *transport.grid();
    let vs = v.sample(&grid)?;
    let ds = t / steps as f64;
    let denom: Vec<f64> = vs.iter().map(|v| 1.0 + 0.5 * ds * v).collect();
    if let Some(j) = denom.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::ImplicitDenominatorVanishes { x: grid.point(j) });
    }
    let lags = LagOperators::new(transport, ds, steps);
    lags.warm()?;

    let delta = Field::delta(grid, y)?;
    let kind = transport.output_kind(ScalarKind::Real);
    let n = grid.len();
    let delta_work = transport.to_work(delta.values());
    let weighted = |u: &Field| -> Vec<Complex64> {
        let vu: Vec<Complex64> = u.values().iter().zip(&vs).map(|(z, v)| z * v).collect();
        transport.to_work(&vu)
    };
    let mut work = vec![weighted(&delta)];
    let mut columns = vec![delta];

    for m in 1..=steps {
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        lags.with(m, |op| transport.accumulate(op, &delta_work, 1.0, &mut acc))?;
        for (j, wj) in work.iter().enumerate() {
            let w = if j == 0 { 0.5 * ds } else { ds };
            lags.with(m - j, |op| transport.accumulate(op, wj, -w, &mut acc))?;
        }
        let rhs = transport.from_work(acc);
        let col: Vec<Complex64> = rhs.iter().zip(&denom).map(|(r, d)| r / d).collect();
        let col = Field::new(grid, col, kind)?;
        if m < steps {
            work.push(weighted(&col));
        }
        columns.push(col);
    }

    Ok(VolterraState {
        grid,
        source: y,
        times: times(t, steps),
        columns,
    })
}

/// Composite Simpson weights over `m` intervals, with a closing 3/8 panel
/// when `m` is odd and the trapezoid rule for `m = 1`.
fn simpson_weights(m: usize, ds: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    if m == 1 {
        w[0] = 0.5 * ds;
        w[1] = 0.5 * ds;
        return w;
    }
    let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
    for j in (0..simpson_end).step_by(2) {
        w[j] += ds / 3.0;
        w[j + 1] += 4.0 * ds / 3.0;
        w[j + 2] += ds / 3.0;
    }
    if m % 2 == 1 {
        let s = simpson_end;
        for (k, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            w[s + k] += 3.0 * ds / 8.0 * c;
        }
    }
    w
}

/// Maximum defect of the integral equation at each stored time, evaluated
/// with Simpson weights instead of the trapezoid weights of the solve.
pub fn residual_profile(state: &VolterraState, kernel: &TransitionKernel, v: &Potential) -> Result<Vec<f64>> {
    let transport = Transport::auto(kernel, state.grid)?;
    let grid = state.grid;
    let vs = v.sample(&grid)?;
    let steps = state.steps();
    let ds = state.dt();
    let lags = LagOperators::new(&transport, ds, steps);
    lags.warm()?;
    let delta = Field::delta(grid, state.source)?;
    let delta_work = transport.to_work(delta.values());
    let work: Vec<Vec<Complex64>> = state
        .columns
        .par_iter()
        .map(|u| {
            let vu: Vec<Complex64> = u.values().iter().zip(&vs).map(|(z, v)| z * v).collect();
            transport.to_work(&vu)
        })
        .collect();
    let n = grid.len();
    let mut out = vec![0.0];
    let rest: Vec<f64> = (1..=steps)
        .into_par_iter()
        .map(|m| -> Result<f64> {
            let q = simpson_weights(m, ds);
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            lags.with(m, |op| transport.accumulate(op, &delta_work, 1.0, &mut acc))?;
            for j in 0..m {
                lags.with(m - j, |op| transport.accumulate(op, &work[j], -q[j], &mut acc))?;
            }
            let rhs = transport.from_work(acc);
            let u = state.columns[m].values();
            Ok(rhs
                .iter()
                .zip(u)
                .zip(&vs)
                .map(|((r, u), v)| (u - (r - q[m] * v * u)).norm())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    out.extend(rest);
    Ok(out)
}

/// Largest entry of [`residual_profile`]; `O(ds^2)` for a correct solve.
pub fn residual_check(state: &VolterraState, kernel: &TransitionKernel, v: &Potential) -> Result<f64> {
    Ok(residual_profile(state, kernel, v)?.into_iter().fold(0.0, f64::max))
}

/// Relative defect of `d_t u = A u - V u` over the second half of the time
/// grid, with a central difference in time and `A` applied spectrally.
pub fn pde_defect(state: &VolterraState, kernel: &TransitionKernel, v: &Potential) -> Result<f64> {
    if !kernel.has_symbol() {
        return Err(Error::NoSymbol);
    }
    let steps = state.steps();
    if steps < 4 {
        return Err(invalid("pde defect needs at least 4 time steps"));
    }
    let transport = Transport::auto(kernel, state.grid)?;
    let vs = v.sample(&state.grid)?;
    let ds = state.dt();
    (steps / 2..steps)
        .into_par_iter()
        .map(|m| -> Result<f64> {
            let u = &state.columns[m];
            let au = transport.generator(u)?;
            let rhs: Vec<Complex64> = au
                .values()
                .iter()
                .zip(u.values())
                .zip(&vs)
                .map(|((a, u), v)| a - v * u)
                .collect();
            let dt: Vec<Complex64> = state.columns[m + 1]
                .values()
                .iter()
                .zip(state.columns[m - 1].values())
                .map(|(p, q)| (p - q) / (2.0 * ds))
                .collect();
            let rhs = Field::new(state.grid, rhs, ScalarKind::Complex)?;
            let dt = Field::new(state.grid, dt, ScalarKind::Complex)?;
            dt.rel_l2_diff(&rhs)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|d| d.into_iter().fold(0.0, f64::max))
}
