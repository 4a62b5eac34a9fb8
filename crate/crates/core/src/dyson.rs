//! Perturbative expansion `phi_V = sum_n (-1)^n / n! K^n`.
//!
//! Terms come from the recurrence
//! `K^{n+1}(t) = (n+1) int_0^t T_{t-s} (V K^n(s)) ds`, evaluated with the
//! trapezoid rule on a uniform time grid. The node `s = t` uses `T_0 = I`.
//! Long times may be split into segments, each restarted from the partial
//! sum of the previous one.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::kernel::TransitionKernel;
use crate::potential::Potential;
use crate::transport::{LagOperators, Transport};

/// `K^n` at every time `s_m = m dt`, `m = 0..=M`.
#[derive(Debug, Clone)]
pub struct TermFamily {
    order: usize,
    dt: f64,
    columns: Vec<Field>,
}

impl TermFamily {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn columns(&self) -> &[Field] {
        &self.columns
    }

    pub fn at(&self, m: usize) -> &Field {
        &self.columns[m]
    }

    pub fn last(&self) -> &Field {
        self.columns.last().expect("family holds at least one column")
    }
}

/// Truncated series for one source and one time segment.
#[derive(Debug, Clone)]
pub struct DysonSeries {
    pub order: usize,
    /// Unscaled `K^n(., t)` for `n = 0..=order`.
    pub terms: Vec<Field>,
    pub source: f64,
    pub t: f64,
    pub remainder_bound: f64,
    /// `t sup|V|` over the grid.
    pub scale: f64,
    /// `exp(t max(0, -inf V))` over the grid.
    pub growth: f64,
    /// L1 norm of the initial data.
    pub initial_mass: f64,
}

impl DysonSeries {
    pub fn sum(&self) -> Field {
        partial_sum(&self.terms)
    }
}

/// One row of the order-by-order decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRow {
    pub order: usize,
    pub contribution: f64,
    pub cumulative: f64,
    pub remainder_bound: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn partial_sum(terms: &[Field]) -> Field {
    let mut acc = terms[0].clone();
    for (n, k) in terms.iter().enumerate().skip(1) {
        let c = if n % 2 == 0 { 1.0 } else { -1.0 } / factorial(n);
        acc = acc
            .axpby(Complex64::new(1.0, 0.0), k, Complex64::new(c, 0.0))
            .expect("terms share one grid");
    }
    acc
}

/// `(t s)^{M+1} / (M+1)! * growth * mass`.
fn remainder(scale: f64, order: usize, growth: f64, mass: f64) -> f64 {
    scale.powi(order as i32 + 1) / factorial(order + 1) * growth * mass
}

/// `K^0(s_m) = T_{s_m} f0`.
pub fn initial_family(transport: &Transport, f0: &Field, t: f64, steps: usize) -> Result<TermFamily> {
    validate(t, steps)?;
    if f0.grid() != transport.grid() {
        return Err(Error::GridMismatch);
    }
    let dt = t / steps as f64;
    let lags = LagOperators::new(transport, dt, steps);
    initial_with(transport, &lags, f0, dt, steps)
}

fn initial_with(
    transport: &Transport,
    lags: &LagOperators<'_>,
    f0: &Field,
    dt: f64,
    steps: usize,
) -> Result<TermFamily> {
    let kind = transport.output_kind(f0.kind());
    let rest = (1..=steps)
        .into_par_iter()
        .map(|m| lags.with(m, |op| transport.apply_values(op, f0.values())))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![f0.clone()];
    for vals in rest {
        columns.push(Field::new(*f0.grid(), vals, kind)?);
    }
    Ok(TermFamily { order: 0, dt, columns })
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

/// `K^{n+1}` from the family `K^n`.
pub fn dyson_next_term(kernel: &TransitionKernel, v: &Potential, kn: &TermFamily) -> Result<TermFamily> {
    let transport = Transport::auto(kernel, *kn.at(0).grid())?;
    let lags = LagOperators::new(&transport, kn.dt, kn.steps());
    let vs = v.sample(transport.grid())?;
    next_with(&transport, &lags, &vs, kn)
}

fn next_with(transport: &Transport, lags: &LagOperators<'_>, vs: &[f64], kn: &TermFamily) -> Result<TermFamily> {
    let grid = *transport.grid();
    let n = grid.len();
    let ds = kn.dt;
    let c = (kn.order + 1) as f64;
    let weighted: Vec<Vec<Complex64>> = kn
        .columns
        .par_iter()
        .map(|k| {
            let vk: Vec<Complex64> = k.values().iter().zip(vs).map(|(z, v)| z * v).collect();
            transport.to_work(&vk)
        })
        .collect();
    let kind = transport.output_kind(kn.at(0).kind());
    let rest = (1..=kn.steps())
        .into_par_iter()
        .map(|m| -> Result<Field> {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (j, w) in weighted.iter().enumerate().take(m) {
                let q = if j == 0 { 0.5 * ds } else { ds };
                lags.with(m - j, |op| transport.accumulate(op, w, c * q, &mut acc))?;
            }
            let mut vals = transport.from_work(acc);
            for ((out, k), v) in vals.iter_mut().zip(kn.at(m).values()).zip(vs) {
                *out += c * 0.5 * ds * v * k;
            }
            Field::new(grid, vals, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![Field::zeros(grid)];
    columns.extend(rest);
    Ok(TermFamily {
        order: kn.order + 1,
        dt: ds,
        columns,
    })
}

/// Series over one segment of length `t` from general initial data `f0`.
pub fn dyson_series_from(
    transport: &Transport,
    v: &Potential,
    f0: &Field,
    source: f64,
    t: f64,
    order: usize,
    steps: usize,
) -> Result<DysonSeries> {
    validate(t, steps)?;
    if f0.grid() != transport.grid() {
        return Err(Error::GridMismatch);
    }
    let vs = v.sample(transport.grid())?;
    let dt = t / steps as f64;
    let lags = LagOperators::new(transport, dt, steps);
    lags.warm()?;
    let mut family = initial_with(transport, &lags, f0, dt, steps)?;
    let mut terms = vec![family.last().clone()];
    for _ in 0..order {
        family = next_with(transport, &lags, &vs, &family)?;
        terms.push(family.last().clone());
    }
    let sup = vs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inf = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = t * sup;
    let growth = (t * (-inf).max(0.0)).exp();
    let initial_mass = f0.l1_norm();
    Ok(DysonSeries {
        order,
        terms,
        source,
        t,
        remainder_bound: remainder(scale, order, growth, initial_mass),
        scale,
        growth,
        initial_mass,
    })
}

/// Series for the column `x -> phi_V(x, y; t)`, single segment.
pub fn dyson_series(
    kernel: &TransitionKernel,
    v: &Potential,
    y: f64,
    t: f64,
    order: usize,
    grid: &SpatialGrid,
    steps: usize,
) -> Result<DysonSeries> {
    let transport = Transport::auto(kernel, *grid)?;
    let delta = Field::delta(*grid, y)?;
    dyson_series_from(&transport, v, &delta, y, t, order, steps)
}

/// `sum_{n<=M} (-1)^n / n! K^n(., t)` and the remainder bound.
pub fn dyson_sum(
    kernel: &TransitionKernel,
    v: &Potential,
    y: f64,
    t: f64,
    order: usize,
    grid: &SpatialGrid,
    steps: usize,
) -> Result<(Field, f64)> {
    dyson_sum_segmented(kernel, v, y, t, order, grid, steps, 1)
}

/// Splits `[0, t]` into `segments` equal parts of `steps` time steps each.
/// The remainder bound propagates earlier segment bounds through the
/// growth factor `exp(tau max(0, -inf V))`.
#[allow(clippy::too_many_arguments)]
pub fn dyson_sum_segmented(
    kernel: &TransitionKernel,
    v: &Potential,
    y: f64,
    t: f64,
    order: usize,
    grid: &SpatialGrid,
    steps: usize,
    segments: usize,
) -> Result<(Field, f64)> {
    validate(t, steps)?;
    let transport = Transport::auto(kernel, *grid)?;
    let delta = Field::delta(*grid, y)?;
    dyson_sum_segmented_from(&transport, v, &delta, y, t, order, steps, segments)
}

/// Segmented sum from general initial data with an explicit transport.
#[allow(clippy::too_many_arguments)]
pub fn dyson_sum_segmented_from(
    transport: &Transport,
    v: &Potential,
    f0: &Field,
    source: f64,
    t: f64,
    order: usize,
    steps: usize,
    segments: usize,
) -> Result<(Field, f64)> {
    if segments == 0 {
        return Err(invalid("segments must be >= 1"));
    }
    validate(t, steps)?;
    let tau = t / segments as f64;
    let mut u = f0.clone();
    let mut bound = 0.0;
    for _ in 0..segments {
        let s = dyson_series_from(transport, v, &u, source, tau, order, steps)?;
        let r = remainder(s.scale, order, s.growth, s.initial_mass + bound);
        bound = bound * s.growth + r;
        u = s.sum();
    }
    Ok((u, bound))
}

/// Smallest segment count with `tau sup|V| <= 1` over the grid.
pub fn auto_segments(t: f64, v: &Potential, grid: &SpatialGrid) -> Result<usize> {
    let (lo, hi) = v.grid_range(grid)?;
    let sup = lo.abs().max(hi.abs());
    Ok(((t * sup).ceil() as usize).max(1))
}

/// Signed column masses `(-1)^n / n! int K^n dx`, their partial sums and the
/// bound after truncating at each order.
pub fn scattering_report(series: &DysonSeries) -> Vec<ScatteringRow> {
    let mut cumulative = 0.0;
    series
        .terms
        .iter()
        .enumerate()
        .map(|(n, k)| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let contribution = sign / factorial(n) * k.quadrature().re;
            cumulative += contribution;
            ScatteringRow {
                order: n,
                contribution,
                cumulative,
                remainder_bound: remainder(series.scale, n, series.growth, series.initial_mass),
            }
        })
        .collect()
}

pub fn write_scattering_csv<W: Write>(rows: &[ScatteringRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::constant_potential_column;
    use crate::volterra::volterra_solve;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(-12.0, 12.0, 513).unwrap()
    }

    fn heat() -> TransitionKernel {
        TransitionKernel::heat(1.0).unwrap()
    }

    #[test]
    fn zero_potential_terms_vanish() {
        let s = dyson_series(&heat(), &Potential::zero(), 0.0, 1.0, 4, &grid(), 16).unwrap();
        for k in &s.terms[1..] {
            assert_eq!(k.max_abs(), 0.0);
        }
        assert_eq!(s.remainder_bound, 0.0);
    }

    #[test]
    fn order_zero_is_the_free_column() {
        let (u, _) = dyson_sum(&heat(), &Potential::harmonic(1.0), 0.0, 1.0, 0, &grid(), 8).unwrap();
        let t = Transport::auto(&heat(), grid()).unwrap();
        let free = t.apply(&Field::delta(grid(), 0.0).unwrap(), 1.0).unwrap();
        assert_eq!(u, free);
    }

    #[test]
    fn constant_potential_first_term() {
        let s = dyson_series(&heat(), &Potential::constant(0.7), 0.0, 1.0, 1, &grid(), 32).unwrap();
        let phi = constant_potential_column(grid(), 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!(s.terms[1].rel_l2_diff(&phi.scale_real(0.7)).unwrap() < 1e-9);
    }

    #[test]
    fn constant_potential_sum() {
        let (u, bound) = dyson_sum(&heat(), &Potential::constant(0.7), 0.0, 1.0, 8, &grid(), 1024).unwrap();
        let want = constant_potential_column(grid(), 1.0, 0.7, 0.0, 1.0).unwrap();
        assert!((bound - 0.7f64.powi(9) / 362880.0).abs() < 1e-20);
        let err = u.sub(&want).unwrap().l1_norm();
        assert!(err <= bound, "{err} > {bound}");
        assert!(u.rel_l2_diff(&want).unwrap() < 1e-6);
    }

    #[test]
    fn scattering_rows_for_constant_potential() {
        let s = dyson_series(&heat(), &Potential::constant(0.5), 0.0, 1.0, 5, &grid(), 256).unwrap();
        let rows = scattering_report(&s);
        let mut csum = 0.0;
        for r in &rows {
            let want = (-0.5f64).powi(r.order as i32) / factorial(r.order);
            assert!((r.contribution - want).abs() < 1e-4 * want.abs().max(1e-3), "{r:?}");
            csum += r.contribution;
            assert!((r.cumulative - csum).abs() < 1e-15);
        }
        let mut buf = Vec::new();
        write_scattering_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("order,contribution,cumulative,remainder_bound\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn harmonic_partial_sums_alternate() {
        let v = Potential::harmonic(1.0);
        let s = dyson_series(&heat(), &v, 0.0, 1.0, 8, &grid(), 64).unwrap();
        let rows = scattering_report(&s);
        let limit = volterra_solve(&heat(), &v, 0.0, 1.0, &grid(), 64)
            .unwrap()
            .last()
            .quadrature()
            .re;
        for r in &rows {
            let above = r.cumulative > limit;
            assert_eq!(above, r.order % 2 == 0, "{r:?} vs {limit}");
        }
    }

    #[test]
    fn high_order_sum_equals_discrete_volterra() {
        let v = Potential::harmonic(1.0);
        let (u, _) = dyson_sum(&heat(), &v, 0.0, 0.5, 10, &grid(), 64).unwrap();
        let w = volterra_solve(&heat(), &v, 0.0, 0.5, &grid(), 64).unwrap();
        assert!(u.rel_l2_diff(w.last()).unwrap() < 1e-7);
    }

    #[test]
    fn short_segments_converge_on_the_whole_grid() {
        let v = Potential::harmonic(1.0);
        let w = volterra_solve(&heat(), &v, 0.0, 1.0, &grid(), 128).unwrap();
        let segments = auto_segments(1.0, &v, &grid()).unwrap();
        assert_eq!(segments, 72);
        let (u, bound) = dyson_sum_segmented(&heat(), &v, 0.0, 1.0, 10, &grid(), 2, 64).unwrap();
        assert!(bound < 1e-5, "{bound}");
        let d = u.rel_l2_diff(w.last()).unwrap();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn next_term_api_matches_series() {
        let v = Potential::harmonic(1.0);
        let t = Transport::auto(&heat(), grid()).unwrap();
        let k0 = initial_family(&t, &Field::delta(grid(), 0.0).unwrap(), 1.0, 32).unwrap();
        let k1 = dyson_next_term(&heat(), &v, &k0).unwrap();
        let k2 = dyson_next_term(&heat(), &v, &k1).unwrap();
        let s = dyson_series(&heat(), &v, 0.0, 1.0, 2, &grid(), 32).unwrap();
        assert_eq!(k2.order(), 2);
        assert!(k2.last().max_abs_diff(&s.terms[2]).unwrap() < 1e-15);
        assert_eq!(k1.at(0).max_abs(), 0.0);
    }
}
