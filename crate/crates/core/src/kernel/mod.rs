//! Transition kernels (fundamental solutions) and their defining identities.
//!
//! A kernel is a two-point function `p(x, y, t)`. Convolution kernels depend on
//! `x - y` only and carry a Fourier multiplier `m(k, t) = exp(-t sigma(ik))`,
//! with `p(x, y, t) = (1/2pi) int exp(ik(x - y)) m(k, t) dk`. Applying a kernel
//! to a field means `g(x) = int p(x, y, t) f(y) dy`.

mod checks;

pub use checks::{
    check_chapman_kolmogorov, check_chapman_kolmogorov_with_budget, check_delta_limit, check_delta_limit_at,
    check_normalization, trusted_sources, ChapmanKolmogorovReport, NormalizationReport, DEFAULT_TRUNCATION_BUDGET,
};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::SpatialGrid;

/// Largest exponent accepted before a multiplier is declared unstable.
const OVERFLOW_EXPONENT: f64 = 700.0;
/// Tolerance of the stability gate `Re sigma(ik) >= -STABILITY_EPS`.
const STABILITY_EPS: f64 = 1e-9;

/// One term `coeff * (ik)^order` of an operator symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolTerm {
    pub order: u32,
    pub coeff: f64,
}

impl SymbolTerm {
    pub fn new(order: u32, coeff: f64) -> Self {
        Self { order, coeff }
    }
}

/// Wavenumber band `[-k_max, k_max]` and trapezoid node count used to invert
/// a spectral multiplier pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBand {
    pub k_max: f64,
    pub points: usize,
}

impl Default for SpectralBand {
    fn default() -> Self {
        Self {
            k_max: 256.0,
            points: 16385,
        }
    }
}

/// How Lagrangian velocity powers map onto spectral coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Coefficients are used verbatim in `exp(-t sum c (ik)^n)`.
    Literal,
    /// Positive coefficients on even orders are dissipative (`+d^2`, `-d^4`,
    /// ...); odd orders map to `+c d^n`. `[(2, 1)]` is the heat kernel.
    #[default]
    Dissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    Convolution,
    TwoPoint,
}

/// Grid samples `p(x_i, y_j, t)` at a finite set of times.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    grid: SpatialGrid,
    times: Vec<f64>,
    // values[k][i * n + j] = p(x_i, y_j, times[k])
    values: Vec<Vec<f64>>,
}

impl TabulatedKernel {
    pub fn new(grid: SpatialGrid, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.len();
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("tabulated kernel needs one sample matrix per time"));
        }
        if times.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("tabulated kernel times must be positive"));
        }
        if values.iter().any(|v| v.len() != n * n) {
            return Err(invalid(format!("tabulated kernel matrices must be {n} x {n}")));
        }
        Ok(Self { grid, times, values })
    }

    /// Samples `source` on `grid` at each of `times`.
    pub fn sample(source: &TransitionKernel, grid: SpatialGrid, times: &[f64]) -> Result<Self> {
        let n = grid.len();
        let xs: Vec<f64> = grid.points().collect();
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            let mut m = vec![0.0; n * n];
            if let Some(offsets) = source.convolution_offsets(&grid, t)? {
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = offsets[i + n - 1 - j].re;
                    }
                }
            } else {
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = source.eval(xs[i], xs[j], t)?.re;
                    }
                }
            }
            values.push(m);
        }
        Self::new(grid, times.to_vec(), values)
    }

    /// Adds `amount` to the sample nearest `(x, y)` at time `t`.
    pub fn perturb(&mut self, t: f64, x: f64, y: f64, amount: f64) -> Result<()> {
        let k = self.time_index(t)?;
        let i = self.grid.require_index(x)?;
        let j = self.grid.require_index(y)?;
        let n = self.grid.len();
        self.values[k][i * n + j] += amount;
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * s.max(1.0))
            .ok_or(Error::UnsampledTime(t))
    }

    pub fn matrix(&self, t: f64) -> Result<&[f64]> {
        Ok(&self.values[self.time_index(t)?])
    }

    fn eval(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let m = self.matrix(t)?;
        let g = &self.grid;
        let n = g.len();
        let locate = |p: f64| -> Option<(usize, f64)> {
            if p < g.a() || p > g.b() {
                return None;
            }
            let r = (p - g.a()) / g.spacing();
            let j = (r.floor() as usize).min(n - 2);
            Some((j, r - j as f64))
        };
        let (Some((i, wx)), Some((j, wy))) = (locate(x), locate(y)) else {
            return Ok(0.0);
        };
        let at = |a: usize, b: usize| m[a * n + b];
        Ok((1.0 - wx) * ((1.0 - wy) * at(i, j) + wy * at(i, j + 1))
            + wx * ((1.0 - wy) * at(i + 1, j) + wy * at(i + 1, j + 1)))
    }

    fn is_nonnegative(&self) -> bool {
        self.values.iter().flatten().all(|v| *v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `(4 pi D t)^{-1/2} exp(-(x - y)^2 / (4 D t))`
    Heat {
        d: f64,
    },
    /// Multiplier `exp(-t sum c_i (ik)^{n_i})`.
    Spectral {
        terms: Vec<SymbolTerm>,
        band: SpectralBand,
    },
    /// Gaussian in `y` with mean `x e^{-theta t}` and variance
    /// `sigma^2 (1 - e^{-2 theta t}) / (2 theta)`.
    OrnsteinUhlenbeck {
        theta: f64,
        sigma: f64,
    },
    Tabulated(Arc<TabulatedKernel>),
}

/// Mass of `|p(x, ., t)|` outside an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailEstimate {
    Bound(f64),
    /// No bound is available (dispersive kernels).
    Unknown,
}

/// A transition function `p(x, y, t)`; immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    kind: KernelKind,
    form: KernelForm,
    positive: bool,
}

impl TransitionKernel {
    pub fn heat(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(format!("diffusion coefficient must be positive, got {d}")));
        }
        Ok(Self {
            kind: KernelKind::Heat { d },
            form: KernelForm::Convolution,
            positive: true,
        })
    }

    pub fn ornstein_uhlenbeck(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "Ornstein-Uhlenbeck requires theta, sigma > 0, got theta = {theta}, sigma = {sigma}"
            )));
        }
        Ok(Self {
            kind: KernelKind::OrnsteinUhlenbeck { theta, sigma },
            form: KernelForm::TwoPoint,
            positive: true,
        })
    }

    pub fn spectral(terms: Vec<SymbolTerm>) -> Result<Self> {
        Self::spectral_with_band(terms, SpectralBand::default())
    }

    /// Builds a spectral kernel, rejecting symbols with
    /// `Re sigma(ik) < -eps` somewhere on the band.
    pub fn spectral_with_band(terms: Vec<SymbolTerm>, band: SpectralBand) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("spectral kernel needs at least one term"));
        }
        if let Some(t) = terms.iter().find(|t| t.order == 0 || !t.coeff.is_finite()) {
            return Err(invalid(format!(
                "spectral terms need order >= 1 and finite coefficients, got ({}, {})",
                t.order, t.coeff
            )));
        }
        if !(band.k_max > 0.0) || band.points < 3 {
            return Err(invalid("spectral band needs k_max > 0 and at least 3 points"));
        }
        check_stability(&terms, band.k_max)?;
        let positive = spectral_is_positive(&terms);
        Ok(Self {
            kind: KernelKind::Spectral { terms, band },
            form: KernelForm::Convolution,
            positive,
        })
    }

    pub fn tabulated(table: TabulatedKernel) -> Self {
        let positive = table.is_nonnegative();
        Self {
            kind: KernelKind::Tabulated(Arc::new(table)),
            form: KernelForm::TwoPoint,
            positive,
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    /// True iff every kernel value is real and nonnegative.
    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// True iff kernel values are real (no odd-order spectral terms).
    pub fn is_real_valued(&self) -> bool {
        match &self.kind {
            KernelKind::Spectral { terms, .. } => terms.iter().all(|t| t.order % 2 == 0),
            _ => true,
        }
    }

    pub fn has_symbol(&self) -> bool {
        matches!(self.kind, KernelKind::Heat { .. } | KernelKind::Spectral { .. })
    }

    /// Operator symbol `sigma(ik)`, so that `m(k, t) = exp(-t sigma(ik))`.
    pub fn symbol(&self, k: f64) -> Result<Complex64> {
        match &self.kind {
            KernelKind::Heat { d } => Ok(Complex64::new(d * k * k, 0.0)),
            KernelKind::Spectral { terms, .. } => Ok(eval_symbol(terms, k)),
            _ => Err(Error::NoSymbol),
        }
    }

    /// Fourier multiplier `m(k, t)`.
    pub fn multiplier(&self, k: f64, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("multiplier time must be >= 0, got {t}")));
        }
        multiplier_from_symbol(self.symbol(k)?, t)
    }

    /// Pointwise value `p(x, y, t)`.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        match &self.kind {
            KernelKind::Heat { d } => Ok(Complex64::new(heat_density(x - y, *d, t), 0.0)),
            KernelKind::OrnsteinUhlenbeck { theta, sigma } => {
                let (mean, var) = ou_moments(*theta, *sigma, x, t);
                Ok(Complex64::new(gaussian(y - mean, var), 0.0))
            }
            KernelKind::Spectral { terms, band } => invert_multiplier(terms, band, x - y, t),
            KernelKind::Tabulated(tab) => Ok(Complex64::new(tab.eval(x, y, t)?, 0.0)),
        }
    }

    /// For convolution kernels, values `phi(m h, t)` for offsets
    /// `m = -(n-1)..=(n-1)`, stored at index `m + n - 1`.
    pub(crate) fn convolution_offsets(&self, grid: &SpatialGrid, t: f64) -> Result<Option<Vec<Complex64>>> {
        if self.form != KernelForm::Convolution {
            return Ok(None);
        }
        let n = grid.len() as i64;
        let h = grid.spacing();
        let offsets = (-(n - 1)..n)
            .map(|m| self.eval(m as f64 * h, 0.0, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(offsets))
    }

    /// Mass of `|p(source, ., t)|` outside `[a, b]`.
    pub fn tail_mass(&self, source: f64, t: f64, a: f64, b: f64) -> TailEstimate {
        match &self.kind {
            KernelKind::Heat { d } => TailEstimate::Bound(gaussian_tail(source, 2.0 * d * t, a, b)),
            KernelKind::OrnsteinUhlenbeck { theta, sigma } => {
                let (mean, var) = ou_moments(*theta, *sigma, source, t);
                TailEstimate::Bound(gaussian_tail(mean, var, a, b))
            }
            KernelKind::Spectral { terms, .. } => match drift_diffusion(terms) {
                Some((drift, diff)) => {
                    let centre = source - drift * t;
                    if diff > 0.0 {
                        TailEstimate::Bound(gaussian_tail(centre, 2.0 * diff * t, a, b))
                    } else if centre > a && centre < b {
                        TailEstimate::Bound(0.0)
                    } else {
                        TailEstimate::Bound(1.0)
                    }
                }
                None => TailEstimate::Unknown,
            },
            KernelKind::Tabulated(tab) => {
                // Empirical: mass carried by the outermost sixteenth of the
                // tabulated grid on each side.
                let Ok(m) = tab.matrix(t) else {
                    return TailEstimate::Unknown;
                };
                let g = &tab.grid;
                let n = g.len();
                let Some(i) = g.index_of(source) else {
                    return TailEstimate::Unknown;
                };
                let edge = (n / 16).max(2).min(n / 2);
                let row = &m[i * n..(i + 1) * n];
                let mut mass: f64 = row[..edge].iter().chain(&row[n - edge..]).map(|v| v.abs()).sum();
                mass *= g.spacing();
                let lo = g.point(edge);
                let hi = g.point(n - 1 - edge);
                if a > lo || b < hi {
                    // The requested interval is narrower than the trusted core.
                    return TailEstimate::Unknown;
                }
                TailEstimate::Bound(mass)
            }
        }
    }
}

/// Maps Lagrangian velocity terms `c * gamma_dot^n` to the spectral kernel of
/// the associated operator. The potential part of a Lagrangian is not encoded
/// here; it enters as a [`crate::potential::Potential`].
pub fn lagrangian_to_kernel(terms: &[(u32, f64)], convention: SignConvention) -> Result<TransitionKernel> {
    if terms.is_empty() {
        return Err(invalid("Lagrangian needs at least one velocity term"));
    }
    let mapped = terms
        .iter()
        .map(|&(n, c)| {
            if n == 0 {
                return Err(invalid("velocity powers must be >= 1"));
            }
            let coeff = match convention {
                SignConvention::Literal => c,
                SignConvention::Dissipative => {
                    // generator sign s(n): +d^2, -d^4, +d^6, ...; odd orders +1
                    let s = if n % 4 == 0 { -1.0 } else { 1.0 };
                    -c * s
                }
            };
            Ok(SymbolTerm::new(n, coeff))
        })
        .collect::<Result<Vec<_>>>()?;
    TransitionKernel::spectral(mapped)
}

/// `i^n k^n`.
fn ik_pow(k: f64, n: u32) -> Complex64 {
    let mag = k.powi(n as i32);
    match n % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

pub(crate) fn eval_symbol(terms: &[SymbolTerm], k: f64) -> Complex64 {
    terms.iter().map(|t| t.coeff * ik_pow(k, t.order)).sum()
}

pub(crate) fn multiplier_from_symbol(sigma: Complex64, t: f64) -> Result<Complex64> {
    let z = -t * sigma;
    if z.re > OVERFLOW_EXPONENT {
        return Err(Error::UnstableSymbol(format!(
            "multiplier exponent {:e} exceeds overflow guard",
            z.re
        )));
    }
    Ok(z.exp())
}

fn check_stability(terms: &[SymbolTerm], k_max: f64) -> Result<()> {
    const SAMPLES: usize = 4096;
    for i in 0..=SAMPLES {
        let k = k_max * i as f64 / SAMPLES as f64;
        let re = eval_symbol(terms, k).re;
        if re < -STABILITY_EPS {
            return Err(Error::UnstableSymbol(format!(
                "Re sigma(ik) = {re:e} < 0 at k = {k}; the multiplier grows like exp({:e} t)",
                -re
            )));
        }
    }
    Ok(())
}

/// Collapses terms of order <= 2 into `(drift, diffusion)` with
/// `sigma(ik) = drift * ik + diffusion * k^2`; `None` for higher orders.
fn drift_diffusion(terms: &[SymbolTerm]) -> Option<(f64, f64)> {
    let mut drift = 0.0;
    let mut diff = 0.0;
    for t in terms {
        match t.order {
            1 => drift += t.coeff,
            2 => diff -= t.coeff,
            _ => return None,
        }
    }
    Some((drift, diff))
}

fn spectral_is_positive(terms: &[SymbolTerm]) -> bool {
    matches!(drift_diffusion(terms), Some((_, d)) if d > 0.0)
}

fn invert_multiplier(terms: &[SymbolTerm], band: &SpectralBand, r: f64, t: f64) -> Result<Complex64> {
    let p = band.points;
    let dk = 2.0 * band.k_max / (p - 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..p {
        let k = -band.k_max + i as f64 * dk;
        let w = if i == 0 || i == p - 1 { 0.5 } else { 1.0 };
        let m = multiplier_from_symbol(eval_symbol(terms, k), t)?;
        acc += w * m * Complex64::new(0.0, k * r).exp();
    }
    Ok(acc * dk / (2.0 * PI))
}

pub(crate) fn heat_density(r: f64, d: f64, t: f64) -> f64 {
    let s = 4.0 * d * t;
    (-(r * r) / s).exp() / (PI * s).sqrt()
}

fn gaussian(r: f64, var: f64) -> f64 {
    (-(r * r) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn ou_moments(theta: f64, sigma: f64, x: f64, t: f64) -> (f64, f64) {
    let mean = x * (-theta * t).exp();
    let var = -sigma * sigma * (-2.0 * theta * t).exp_m1() / (2.0 * theta);
    (mean, var)
}

fn gaussian_tail(mean: f64, var: f64, a: f64, b: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    0.5 * libm::erfc((mean - a) / s) + 0.5 * libm::erfc((b - mean) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn heat1() -> TransitionKernel {
        TransitionKernel::heat(1.0).unwrap()
    }

    #[test]
    fn heat_values() {
        let k = heat1();
        assert!((k.eval(0.0, 0.0, 1.0).unwrap().re - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert!((k.eval(2.0, 0.0, 1.0).unwrap().re - 0.103_776_874_355_148_7).abs() < 1e-15);
        let t = 1.0 / (4.0 * PI);
        assert!((k.eval(0.0, 0.0, t).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_time_is_rejected() {
        assert_eq!(heat1().eval(0.0, 0.0, 0.0), Err(Error::NonPositiveTime(0.0)));
        assert!(matches!(heat1().eval(0.0, 0.0, -1.0), Err(Error::NonPositiveTime(_))));
    }

    #[test]
    fn ou_tends_to_stationary_density() {
        let k = TransitionKernel::ornstein_uhlenbeck(1.0, 2f64.sqrt()).unwrap();
        let v = k.eval(0.0, 0.0, 40.0).unwrap().re;
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert_eq!(k.form(), KernelForm::TwoPoint);
        assert!(k.is_positive());
    }

    #[test]
    fn heat_multiplier_at_zero_is_one() {
        for t in [0.0, 0.3, 7.0] {
            assert_eq!(heat1().multiplier(0.0, t).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn cubic_multiplier_has_unit_modulus() {
        let k = TransitionKernel::spectral(vec![SymbolTerm::new(3, 1.0)]).unwrap();
        let m = k.multiplier(2.0, 1.0).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-15);
        // exp(-(2i)^3) = exp(8i)
        assert!((m - Complex64::new(0.0, 8.0).exp()).norm() < 1e-15);
        assert!(!k.is_positive());
    }

    #[test]
    fn quartic_multiplier() {
        let k = TransitionKernel::spectral(vec![SymbolTerm::new(4, 1.0)]).unwrap();
        assert!((k.multiplier(1.0, 1.0).unwrap().re - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn literal_second_order_is_unstable() {
        let r = TransitionKernel::spectral(vec![SymbolTerm::new(2, 1.0)]);
        assert!(matches!(r, Err(Error::UnstableSymbol(_))));
        let r = lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Literal);
        assert!(matches!(r, Err(Error::UnstableSymbol(_))));
    }

    #[test]
    fn multiplier_requires_symbol() {
        let ou = TransitionKernel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        assert_eq!(ou.multiplier(1.0, 1.0), Err(Error::NoSymbol));
    }

    #[test]
    fn overflow_guard_trips() {
        // A symbol that is stable on a tiny band but evaluated far outside it.
        let band = SpectralBand { k_max: 1e-6, points: 5 };
        let k = TransitionKernel::spectral_with_band(vec![SymbolTerm::new(4, 1.0), SymbolTerm::new(2, 1e-13)], band)
            .unwrap();
        let r = k.multiplier(1e8, 1.0);
        assert!(r.is_ok());
        let bad = multiplier_from_symbol(Complex64::new(-1e4, 0.0), 1.0);
        assert!(matches!(bad, Err(Error::UnstableSymbol(_))));
    }

    #[test]
    fn lagrangian_mapping() {
        let heat_like = lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Dissipative).unwrap();
        for k in [0.0, 0.5, 3.0] {
            let a = heat_like.multiplier(k, 0.7).unwrap();
            let b = heat1().multiplier(k, 0.7).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
        assert!(heat_like.is_positive());
        let airy = lagrangian_to_kernel(&[(3, 1.0)], SignConvention::Dissipative).unwrap();
        assert!((airy.multiplier(1.7, 2.0).unwrap().norm() - 1.0).abs() < 1e-15);
        let quartic = lagrangian_to_kernel(&[(4, 1.0)], SignConvention::Dissipative).unwrap();
        assert!((quartic.multiplier(1.3, 1.0).unwrap().re - (-(1.3f64.powi(4))).exp()).abs() < 1e-15);
        // mixed orders whose top order is anti-dissipative
        let r = lagrangian_to_kernel(&[(2, 1.0), (4, -1.0)], SignConvention::Dissipative);
        assert!(matches!(r, Err(Error::UnstableSymbol(_))));
        assert!(lagrangian_to_kernel(&[], SignConvention::Dissipative).is_err());
        assert!(lagrangian_to_kernel(&[(0, 1.0)], SignConvention::Dissipative).is_err());
    }

    #[test]
    fn spectral_heat_matches_closed_form_pointwise() {
        let s = lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Dissipative).unwrap();
        for r in [0.0, 0.5, 1.0, 2.5, 5.0] {
            let a = s.eval(r, 0.0, 1.0).unwrap();
            let b = heat1().eval(r, 0.0, 1.0).unwrap();
            assert!((a - b).norm() < 1e-8, "r = {r}: {a} vs {b}");
        }
    }

    #[test]
    fn heat_fourier_transform_matches_multiplier() {
        // Independent trapezoid Fourier transform of the closed-form density.
        let k = heat1();
        let t = 0.8;
        let g = SpatialGrid::new(-30.0, 30.0, 6001).unwrap();
        for kk in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let vals: Vec<Complex64> = g
                .points()
                .map(|x| k.eval(x, 0.0, t).unwrap() * Complex64::new(0.0, -kk * x).exp())
                .collect();
            let ft = crate::grid::quadrature(&g, &vals);
            let m = k.multiplier(kk, t).unwrap();
            assert!((ft - m).norm() < 1e-8, "k = {kk}");
        }
    }

    #[test]
    fn tail_mass_of_heat() {
        let TailEstimate::Bound(m) = heat1().tail_mass(0.0, 1.0, -12.0, 12.0) else {
            panic!()
        };
        assert!(m < 1e-15);
        let TailEstimate::Bound(m) = heat1().tail_mass(12.0, 1.0, -12.0, 12.0) else {
            panic!()
        };
        assert!((m - 0.5).abs() < 1e-12);
        let cubic = TransitionKernel::spectral(vec![SymbolTerm::new(3, 1.0)]).unwrap();
        assert_eq!(cubic.tail_mass(0.0, 1.0, -1.0, 1.0), TailEstimate::Unknown);
    }

    #[test]
    fn tabulated_interpolates_samples() {
        let g = SpatialGrid::new(-4.0, 4.0, 81).unwrap();
        let tab = TabulatedKernel::sample(&heat1(), g, &[0.5, 1.0]).unwrap();
        let k = TransitionKernel::tabulated(tab);
        assert!(k.is_positive());
        let exact = heat1().eval(0.3, -0.2, 1.0).unwrap().re;
        assert!((k.eval(0.3, -0.2, 1.0).unwrap().re - exact).abs() < 1e-12);
        // off-node value is close to the closed form
        let v = k.eval(0.25, -0.15, 1.0).unwrap().re;
        assert!((v - heat1().eval(0.25, -0.15, 1.0).unwrap().re).abs() < 1e-3);
        assert_eq!(k.eval(0.0, 0.0, 0.7), Err(Error::UnsampledTime(0.7)));
        assert_eq!(k.multiplier(0.0, 1.0), Err(Error::NoSymbol));
    }

    proptest! {
        #[test]
        fn convolution_kernels_are_translation_invariant(
            x in -5.0f64..5.0, y in -5.0f64..5.0, a in -20.0f64..20.0, t in 0.05f64..3.0,
        ) {
            let k = heat1();
            let u = k.eval(x, y, t).unwrap().re;
            let v = k.eval(x + a, y + a, t).unwrap().re;
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn spectral_multiplier_is_one_at_zero(
            orders in prop::collection::vec(1u32..7, 1..4),
            t in 0.0f64..5.0,
        ) {
            let terms: Vec<_> = orders.iter().map(|&n| (n, 1.0)).collect();
            if let Ok(k) = lagrangian_to_kernel(&terms, SignConvention::Dissipative) {
                prop_assert_eq!(k.multiplier(0.0, t).unwrap(), Complex64::new(1.0, 0.0));
            }
        }

        #[test]
        fn heat_and_ou_samples_are_nonnegative(x in -10.0f64..10.0, y in -10.0f64..10.0, t in 1e-3f64..5.0) {
            prop_assert!(heat1().eval(x, y, t).unwrap().re >= 0.0);
            let ou = TransitionKernel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
            prop_assert!(ou.eval(x, y, t).unwrap().re >= 0.0);
        }
    }
}
