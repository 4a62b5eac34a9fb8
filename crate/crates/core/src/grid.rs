//! Uniform 1D grids and complex-valued fields sampled on them.
//!
//! All deterministic solvers share this substrate: trapezoid quadrature with
//! weights `1/2, 1, ..., 1, 1/2`, and a discrete delta represented as `1/h`
//! at a single node so that `quadrature(delta * g) == g(y)` at interior nodes.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid `x_j = a + j h`, `j = 0..n`, `h = (b - a) / (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGrid {
    a: f64,
    b: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(invalid("grid endpoints must be finite"));
        }
        if b <= a {
            return Err(invalid(format!("grid requires b > a, got a = {a}, b = {b}")));
        }
        if n < 2 {
            return Err(invalid(format!("grid requires n >= 2, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        if j == self.n - 1 {
            self.b
        } else {
            self.a + j as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.point(j))
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Index of the grid node at `x`, if `x` is a node up to `1e-9 h`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        let r = (x - self.a) / h;
        let j = r.round();
        if j < 0.0 || j > (self.n - 1) as f64 || (r - j).abs() > 1e-9 {
            return None;
        }
        Some(j as usize)
    }

    pub fn require_index(&self, x: f64) -> Result<usize> {
        self.index_of(x)
            .ok_or_else(|| invalid(format!("position {x} is not a grid point")))
    }

    /// Trapezoid weight of node `j`, without the factor `h`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n - 1 {
            0.5
        } else {
            1.0
        }
    }

    /// Angular wavenumbers of the length-`n` DFT, in `fftfreq` order.
    ///
    /// The Nyquist mode of an even-length grid is reported as `-pi/h`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.spacing());
        (0..n)
            .map(|j| {
                let m = if j < n.div_ceil(2) {
                    j as i64
                } else {
                    j as i64 - n as i64
                };
                m as f64 * dk
            })
            .collect()
    }

    /// Largest resolvable wavenumber `pi / h`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Samples of a (generally complex) function on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    kind: ScalarKind,
}

impl Field {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>, kind: ScalarKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        let mut f = Self { grid, values, kind };
        if kind == ScalarKind::Real {
            f.strip_imaginary();
        }
        Ok(f)
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            kind: ScalarKind::Real,
        }
    }

    pub fn from_real(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(
            grid,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            ScalarKind::Real,
        )
    }

    pub fn from_fn_real(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.points().map(|x| Complex64::new(f(x), 0.0)).collect(),
            kind: ScalarKind::Real,
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.points().map(f).collect(),
            kind: ScalarKind::Complex,
        }
    }

    /// Discrete delta: `1/h` at the node `y`, zero elsewhere.
    pub fn delta(grid: SpatialGrid, y: f64) -> Result<Self> {
        let j = grid.require_index(y)?;
        let mut f = Self::zeros(grid);
        f.values[j] = Complex64::new(1.0 / grid.spacing(), 0.0);
        Ok(f)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, j: usize) -> Complex64 {
        self.values[j]
    }

    /// Value at the grid node `x`.
    pub fn at(&self, x: f64) -> Result<Complex64> {
        Ok(self.values[self.grid.require_index(x)?])
    }

    /// Linear interpolation; zero outside `[a, b]`.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let g = &self.grid;
        if x < g.a() || x > g.b() {
            return Complex64::new(0.0, 0.0);
        }
        let r = (x - g.a()) / g.spacing();
        let j = (r.floor() as usize).min(g.len() - 2);
        let w = r - j as f64;
        self.values[j] * (1.0 - w) + self.values[j + 1] * w
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>, kind: ScalarKind) -> Self {
        let mut f = Self {
            grid: self.grid,
            values,
            kind,
        };
        if kind == ScalarKind::Real {
            f.strip_imaginary();
        }
        f
    }

    fn strip_imaginary(&mut self) {
        for v in &mut self.values {
            v.im = 0.0;
        }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64, kind: ScalarKind) -> Self {
        let values = self.grid.points().zip(&self.values).map(|(x, v)| f(x, *v)).collect();
        self.with_values(values, kind)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let kind = if s.im == 0.0 { self.kind } else { ScalarKind::Complex };
        self.with_values(self.values.iter().map(|v| v * s).collect(), kind)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.with_values(self.values.iter().map(|v| v * s).collect(), self.kind)
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: Complex64, other: &Field, beta: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let kind =
            if self.kind == ScalarKind::Real && other.kind == ScalarKind::Real && alpha.im == 0.0 && beta.im == 0.0 {
                ScalarKind::Real
            } else {
                ScalarKind::Complex
            };
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| alpha * u + beta * v)
            .collect();
        Ok(self.with_values(values, kind))
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Trapezoid rule `sum_j w_j v_j h`.
    pub fn quadrature(&self) -> Complex64 {
        quadrature(&self.grid, &self.values)
    }

    /// Trapezoid integral of `|v|`.
    pub fn l1_norm(&self) -> f64 {
        let h = self.grid.spacing();
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.weight(j) * v.norm())
            .sum::<f64>()
            * h
    }

    /// Discrete L2 norm `sqrt(h sum |v_j|^2)` (uniform weights, so that a
    /// unit-modulus Fourier multiplier preserves it exactly).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// `||self - other|| / ||other||` in the discrete L2 norm.
    pub fn rel_l2_diff(&self, other: &Field) -> Result<f64> {
        let d = self.sub(other)?.l2_norm();
        let r = other.l2_norm();
        Ok(if r == 0.0 { d } else { d / r })
    }

    /// Writes `x,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "re", "im"]).map_err(csv_err)?;
        for (x, v) in self.grid.points().zip(&self.values) {
            wtr.write_record([x.to_string(), v.re.to_string(), v.im.to_string()])
                .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`]. The grid is rebuilt from
    /// the first and last `x` and must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "re", "im"] {
            return Err(invalid("field CSV must have columns x,re,im"));
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad number {:?}: {e}", &rec[i])))
            };
            xs.push(parse(0)?);
            values.push(Complex64::new(parse(1)?, parse(2)?));
        }
        if xs.len() < 2 {
            return Err(invalid("field CSV needs at least two rows"));
        }
        let grid = SpatialGrid::new(xs[0], xs[xs.len() - 1], xs.len())?;
        for (j, x) in xs.iter().enumerate() {
            if (x - grid.point(j)).abs() > 1e-9 * grid.spacing() {
                return Err(invalid(format!("field CSV grid is not uniform at row {j}")));
            }
        }
        let kind = if values.iter().all(|v| v.im == 0.0) {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        };
        Self::new(grid, values, kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("field JSON: {e}")))
    }

    /// Loads a field from a `.csv` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::read_csv(text.as_bytes()),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRepr {
    grid: SpatialGrid,
    scalar_kind: ScalarKind,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for Field {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRepr {
            grid: self.grid,
            scalar_kind: self.kind,
            re: self.re(),
            im: self.im(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = FieldRepr::deserialize(d)?;
        let grid = SpatialGrid::new(r.grid.a, r.grid.b, r.grid.n).map_err(D::Error::custom)?;
        if r.re.len() != r.im.len() {
            return Err(D::Error::custom("re and im lengths differ"));
        }
        let values =
            r.re.into_iter()
                .zip(r.im)
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
        Field::new(grid, values, r.scalar_kind).map_err(D::Error::custom)
    }
}

/// Trapezoid rule over raw samples on `grid`.
pub fn quadrature(grid: &SpatialGrid, values: &[Complex64]) -> Complex64 {
    let n = values.len();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let inner: Complex64 = values[1..n - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[n - 1])) * grid.spacing()
}
