use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::SpatialGrid;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in shape of a potential, recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialShape {
    Zero,
    Constant {
        c: f64,
    },
    /// `omega^2 x^2 / 2`
    Harmonic {
        omega: f64,
    },
    /// `slope * x`
    Linear {
        slope: f64,
    },
    /// Piecewise-linear table, constant beyond the end points.
    Table {
        x: Vec<f64>,
        v: Vec<f64>,
    },
    Custom,
}

/// Perturbation `V(x)` with lower/upper bound metadata.
#[derive(Clone)]
pub struct Potential {
    eval: Evaluator,
    inf: f64,
    sup: f64,
    shape: PotentialShape,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("shape", &self.shape)
            .field("inf", &self.inf)
            .field("sup", &self.sup)
            .finish()
    }
}

impl Potential {
    /// Wraps an arbitrary function. `inf` may be `-inf` and `sup` may be `+inf`
    /// when no bound is known; finite values must be true bounds.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, inf: f64, sup: f64) -> Self {
        Self {
            eval: Arc::new(f),
            inf,
            sup,
            shape: PotentialShape::Custom,
        }
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            inf: 0.0,
            sup: 0.0,
            shape: PotentialShape::Zero,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            eval: Arc::new(move |_| c),
            inf: c,
            sup: c,
            shape: PotentialShape::Constant { c },
        }
    }

    pub fn harmonic(omega: f64) -> Self {
        let w2 = omega * omega;
        Self {
            eval: Arc::new(move |x| 0.5 * w2 * x * x),
            inf: 0.0,
            sup: if w2 == 0.0 { 0.0 } else { f64::INFINITY },
            shape: PotentialShape::Harmonic { omega },
        }
    }

    pub fn linear(slope: f64) -> Self {
        let (inf, sup) = if slope == 0.0 {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        Self {
            eval: Arc::new(move |x| slope * x),
            inf,
            sup,
            shape: PotentialShape::Linear { slope },
        }
    }

    pub fn table(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() || x.len() < 2 {
            return Err(invalid("potential table needs matching x and v with at least 2 rows"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("potential table x must be strictly increasing"));
        }
        if v.iter().chain(&x).any(|t| !t.is_finite()) {
            return Err(invalid("potential table entries must be finite"));
        }
        let inf = v.iter().copied().fold(f64::INFINITY, f64::min);
        let sup = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (xs, vs) = (x.clone(), v.clone());
        let eval = move |t: f64| -> f64 {
            if t <= xs[0] {
                return vs[0];
            }
            let last = xs.len() - 1;
            if t >= xs[last] {
                return vs[last];
            }
            let j = xs.partition_point(|p| *p <= t) - 1;
            let w = (t - xs[j]) / (xs[j + 1] - xs[j]);
            vs[j] * (1.0 - w) + vs[j + 1] * w
        };
        Ok(Self {
            eval: Arc::new(eval),
            inf,
            sup,
            shape: PotentialShape::Table { x, v },
        })
    }

    pub fn from_shape(shape: &PotentialShape) -> Result<Self> {
        match shape {
            PotentialShape::Zero => Ok(Self::zero()),
            PotentialShape::Constant { c } => Ok(Self::constant(*c)),
            PotentialShape::Harmonic { omega } => Ok(Self::harmonic(*omega)),
            PotentialShape::Linear { slope } => Ok(Self::linear(*slope)),
            PotentialShape::Table { x, v } => Self::table(x.clone(), v.clone()),
            PotentialShape::Custom => Err(invalid("custom potentials cannot be rebuilt from a shape")),
        }
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn inf_estimate(&self) -> f64 {
        self.inf
    }

    pub fn sup_estimate(&self) -> f64 {
        self.sup
    }

    pub fn bounded_below(&self) -> bool {
        self.inf.is_finite()
    }

    pub fn bounded_above(&self) -> bool {
        self.sup.is_finite()
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self.shape {
            PotentialShape::Zero => Some(0.0),
            PotentialShape::Constant { c } => Some(c),
            _ => None,
        }
    }

    /// Samples on the grid, rejecting non-finite values.
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        grid.points()
            .map(|x| {
                let v = self.eval(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Overflow(format!("V({x}) = {v} is not finite")))
                }
            })
            .collect()
    }

    /// `(min, max)` of `V` over the grid nodes.
    pub fn grid_range(&self, grid: &SpatialGrid) -> Result<(f64, f64)> {
        let v = self.sample(grid)?;
        Ok(v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        }))
    }
}
