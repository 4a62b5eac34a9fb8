//! Reference solutions that share no code path with the kernel transport:
//! Crank–Nicolson time stepping over compact finite differences for `d_t f = D f'' - V f` with
//! homogeneous Dirichlet boundaries, the exact OU transition density and the
//! constant-potential factorization of the heat kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, ScalarKind, SpatialGrid};
use crate::kernel::DEFAULT_TRUNCATION_BUDGET;
use crate::potential::Potential;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub method: String,
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub error_model: String,
}

impl ReferenceSolution {
    pub fn last(&self) -> &Field {
        self.fields
            .last()
            .expect("reference solution holds at least the initial field")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reference solution serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrankNicolsonOptions {
    /// Largest tolerated magnitude at the first interior nodes.
    pub boundary_budget: f64,
    /// Number of leading steps replaced by two implicit-Euler half steps,
    /// which damps the high modes of rough (delta) initial data.
    pub rannacher_steps: usize,
    /// Keep every time level instead of only the first and last.
    pub keep_all: bool,
}

impl Default for CrankNicolsonOptions {
    fn default() -> Self {
        Self {
            boundary_budget: DEFAULT_TRUNCATION_BUDGET,
            rannacher_steps: 0,
            keep_all: false,
        }
    }
}

/// Tridiagonal matrix with rows `(lower_j, diag_j, upper_j)`.
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn mul(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = u.len();
        for j in 0..n {
            let mut s = self.diag[j] * u[j];
            if j > 0 {
                s += self.lower[j] * u[j - 1];
            }
            if j + 1 < n {
                s += self.upper[j] * u[j + 1];
            }
            out[j] = s;
        }
    }
}

/// Thomas elimination, factored once.
struct Factored {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Factored {
    fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.diag.len();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for j in 0..n {
            let d = if j == 0 {
                m.diag[0]
            } else {
                m.diag[j] - m.lower[j] * c_prime[j - 1]
            };
            if d.abs() < 1e-300 {
                return Err(Error::Overflow("singular tridiagonal system".into()));
            }
            denom[j] = d;
            c_prime[j] = m.upper[j] / d;
        }
        Ok(Self {
            lower: m.lower.clone(),
            c_prime,
            denom,
        })
    }

    fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.lower[j] * rhs[j - 1]) / self.denom[j];
        }
        for j in (0..n - 1).rev() {
            let next = rhs[j + 1];
            rhs[j] -= self.c_prime[j] * next;
        }
    }
}

/// Crank–Nicolson for `d_t f = D f'' - V f` on the grid of `f0`.
pub fn crank_nicolson(f0: &Field, d: f64, v: &Potential, t: f64, steps: usize) -> Result<ReferenceSolution> {
    crank_nicolson_with(f0, d, v, t, steps, &CrankNicolsonOptions::default())
}

pub fn crank_nicolson_with(
    f0: &Field,
    d: f64,
    v: &Potential,
    t: f64,
    steps: usize,
    opts: &CrankNicolsonOptions,
) -> Result<ReferenceSolution> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("diffusion coefficient must be > 0, got {d}")));
    }
    if steps == 0 {
        return Err(invalid("time steps must be >= 1"));
    }
    let grid = *f0.grid();
    let n = grid.len();
    if n < 3 {
        return Err(invalid("Crank-Nicolson needs at least 3 grid points"));
    }
    let h = grid.spacing();
    let dt = t / steps as f64;
    let vs = v.sample(&grid)?;
    let interior = n - 2;

    // Compact (Numerov) discretization B u_t = -P u with
    // B = I + (h^2/12) d2 and P = -D d2 + B diag(V), which is fourth order in
    // space and keeps every matrix tridiagonal. Crank–Nicolson then solves
    // (B + dt/2 P) u' = (B - dt/2 P) u.
    let r = d / (h * h);
    let half = 0.5 * dt;
    let build = |sign: f64| -> Tridiagonal {
        let mut m = Tridiagonal {
            lower: vec![0.0; interior],
            diag: vec![0.0; interior],
            upper: vec![0.0; interior],
        };
        for i in 0..interior {
            let j = i + 1;
            m.diag[i] = 10.0 / 12.0 + sign * half * (2.0 * r + 10.0 / 12.0 * vs[j]);
            m.lower[i] = 1.0 / 12.0 + sign * half * (-r + vs[j - 1] / 12.0);
            m.upper[i] = 1.0 / 12.0 + sign * half * (-r + vs[j + 1] / 12.0);
        }
        m
    };
    let implicit = Factored::new(&build(1.0))?;
    let explicit = build(-1.0);
    let mass = build(0.0);

    let check_edges = |u: &[Complex64], time: f64| -> Result<()> {
        let edge = u[0].norm().max(u[interior - 1].norm());
        if edge > opts.boundary_budget {
            Err(Error::BoundaryMassLeak {
                value: edge,
                budget: opts.boundary_budget,
                time,
            })
        } else {
            Ok(())
        }
    };

    let mut u: Vec<Complex64> = f0.values()[1..n - 1].to_vec();
    check_edges(&u, 0.0)?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); interior];
    let mut times = vec![0.0];
    let mut fields = vec![f0.clone()];
    let pad = |u: &[Complex64]| -> Vec<Complex64> {
        let mut full = Vec::with_capacity(n);
        full.push(Complex64::new(0.0, 0.0));
        full.extend_from_slice(u);
        full.push(Complex64::new(0.0, 0.0));
        full
    };

    for step in 0..steps {
        if step < opts.rannacher_steps {
            // Two implicit Euler half steps: (B + dt/2 P) u' = B u.
            for _ in 0..2 {
                mass.mul(&u, &mut rhs);
                implicit.solve(&mut rhs);
                std::mem::swap(&mut u, &mut rhs);
            }
        } else {
            explicit.mul(&u, &mut rhs);
            implicit.solve(&mut rhs);
            std::mem::swap(&mut u, &mut rhs);
        }
        let time = (step + 1) as f64 * dt;
        check_edges(&u, time)?;
        if opts.keep_all || step + 1 == steps {
            times.push(time);
            fields.push(Field::new(grid, pad(&u), f0.kind())?);
        }
    }

    Ok(ReferenceSolution {
        method: "crank_nicolson".into(),
        grid,
        times,
        fields,
        error_model: format!(
            "O(dt^2 + h^4), dt = {dt:e}, h = {h:e}, dirichlet at [{}, {}]",
            grid.a(),
            grid.b()
        ),
    })
}

/// Gaussian density in `y` with mean `x e^{-theta t}` and variance
/// `sigma^2 (1 - e^{-2 theta t}) / (2 theta)`.
pub fn ou_exact_density(theta: f64, sigma: f64, x: f64, y: f64, t: f64) -> Result<f64> {
    if !(theta > 0.0 && sigma > 0.0) {
        return Err(invalid("OU density needs theta > 0 and sigma > 0"));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let mean = x * (-theta * t).exp();
    let var = sigma * sigma * (1.0 - (-2.0 * theta * t).exp()) / (2.0 * theta);
    let z = y - mean;
    Ok((-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
}

/// `e^{-c t} (4 pi D t)^{-1/2} exp(-(x - y)^2 / (4 D t))` on the grid.
pub fn constant_potential_column(grid: SpatialGrid, d: f64, c: f64, y: f64, t: f64) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(d > 0.0) {
        return Err(invalid("diffusion coefficient must be > 0"));
    }
    let scale = (-c * t).exp() / (4.0 * PI * d * t).sqrt();
    let vals = grid
        .points()
        .map(|x| Complex64::new(scale * (-(x - y) * (x - y) / (4.0 * d * t)).exp(), 0.0))
        .collect();
    Field::new(grid, vals, ScalarKind::Real)
}
