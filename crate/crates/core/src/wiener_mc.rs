//! Monte Carlo under the pinned heat-kernel measure from `x` to `y` in time
//! `t`, which has total mass `phi(x - y, t)`.
//!
//! Paths are discrete Brownian bridges with generator variance `2D`. Path
//! `i` draws from `ChaCha8Rng` seeded with the master seed on stream `i`, and
//! per-path values are reduced by a fixed pairwise tree, so estimates do not
//! depend on the worker count.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::heat_density;
use crate::potential::Potential;

/// Discrete path with pinned endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub normalization: f64,
}

impl McEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serializes")
    }
}

/// What is known about `f`, used to certify that `f(int V)` is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Bounded,
    Increasing,
    Decreasing,
    Unknown,
}

/// Real function of the action `int_0^t V(gamma(s)) ds`.
#[derive(Clone)]
pub struct PathFunctional {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    kind: Monotonicity,
}

impl std::fmt::Debug for PathFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathFunctional").field("kind", &self.kind).finish()
    }
}

impl PathFunctional {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, kind: Monotonicity) -> Self {
        Self { f: Arc::new(f), kind }
    }

    pub fn one() -> Self {
        Self::new(|_| 1.0, Monotonicity::Bounded)
    }

    /// `exp(-s)`, the Feynman–Kac weight.
    pub fn exp_neg() -> Self {
        Self::new(|s| (-s).exp(), Monotonicity::Decreasing)
    }

    pub fn kind(&self) -> Monotonicity {
        self.kind
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    /// Bounded `f`; increasing `f` with `V` bounded above; decreasing `f`
    /// with `V` bounded below.
    pub fn certify(&self, v: &Potential) -> Result<()> {
        let ok = match self.kind {
            Monotonicity::Bounded => true,
            Monotonicity::Increasing => v.bounded_above(),
            Monotonicity::Decreasing => v.bounded_below(),
            Monotonicity::Unknown => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnboundedComposite(format!(
                "f is {:?} and V has bounds [{}, {}]",
                self.kind,
                v.inf_estimate(),
                v.sup_estimate()
            )))
        }
    }
}

fn validate(t: f64, steps: usize, d: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if steps == 0 {
        return Err(invalid("path steps must be >= 1"));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("diffusion coefficient must be > 0, got {d}")));
    }
    Ok(())
}

/// Random stream for path `index`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sequential exact bridge conditionals on the uniform grid `t_k = k t / M`.
pub fn sample_bridge<R: Rng + ?Sized>(x: f64, y: f64, t: f64, steps: usize, d: f64, rng: &mut R) -> Result<PathSample> {
    validate(t, steps, d)?;
    let dt = t / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| t * k as f64 / steps as f64).collect();
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(x);
    let mut g = x;
    for tk in &times[..steps - 1] {
        g = bridge_step(g, y, t - tk, dt, d, rng);
        positions.push(g);
    }
    positions.push(y);
    Ok(PathSample { times, positions })
}

/// Draws the next point of a bridge to `y`, `remaining` time away, after `dt`.
#[inline]
fn bridge_step<R: Rng + ?Sized>(g: f64, y: f64, remaining: f64, dt: f64, d: f64, rng: &mut R) -> f64 {
    let mean = g + (y - g) * dt / remaining;
    let var = 2.0 * d * dt * (remaining - dt) / remaining;
    let z: f64 = rng.sample(StandardNormal);
    mean + var.max(0.0).sqrt() * z
}

/// `phi(x - y, t)` times the sample mean of `f(sum_k V(gamma(t_k*)) dt)`,
/// where `gamma(t_k*)` is the bridge drawn at each slice midpoint.
#[allow(clippy::too_many_arguments)]
pub fn mc_functional(
    x: f64,
    y: f64,
    t: f64,
    d: f64,
    v: &Potential,
    f: &PathFunctional,
    n_paths: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    validate(t, steps, d)?;
    if n_paths < 2 {
        return Err(invalid("n_paths must be >= 2"));
    }
    f.certify(v)?;
    let dt = t / steps as f64;
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let action = path_action(x, y, t, steps, dt, d, v, &mut rng);
            f.eval(action)
        })
        .collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("path functional value {bad}")));
    }
    // Shifted by the first value, so identical samples give exactly zero
    // variance and return that value unchanged.
    let n = n_paths as f64;
    let shift = values[0];
    let centred: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let offset = pairwise_sum(&centred) / n;
    let dev: Vec<f64> = centred.iter().map(|c| (c - offset) * (c - offset)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    let mean = shift + offset;
    let normalization = heat_density(x - y, d, t);
    Ok(McEstimate {
        value: normalization * mean,
        stderr: normalization * (var / n).sqrt(),
        n_paths,
        steps,
        seed,
        normalization,
    })
}

#[allow(clippy::too_many_arguments)]
fn path_action<R: Rng + ?Sized>(
    x: f64,
    y: f64,
    t: f64,
    steps: usize,
    dt: f64,
    d: f64,
    v: &Potential,
    rng: &mut R,
) -> f64 {
    let mut g = x;
    let mut action = 0.0;
    for k in 0..steps {
        let next = if k + 1 == steps {
            y
        } else {
            bridge_step(g, y, t - k as f64 * dt, dt, d, rng)
        };
        // Midpoint of a bridge over dt between g and next.
        let z: f64 = rng.sample(StandardNormal);
        let mid = 0.5 * (g + next) + (0.5 * d * dt).sqrt() * z;
        action += v.eval(mid) * dt;
        g = next;
    }
    action
}

/// Pairwise summation with a fixed split, independent of scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `n_paths` bridges, path `i` drawn from stream `i`.
pub fn sample_paths(
    x: f64,
    y: f64,
    t: f64,
    steps: usize,
    d: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathSample>> {
    validate(t, steps, d)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| sample_bridge(x, y, t, steps, d, &mut path_stream(seed, i as u64)))
        .collect()
}

/// CSV with columns `path_id, time, position`.
pub fn write_paths_csv<W: Write>(paths: &[PathSample], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path_id", "time", "position"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for (id, p) in paths.iter().enumerate() {
        for (t, x) in p.times.iter().zip(&p.positions) {
            out.write_record([id.to_string(), format!("{t:?}"), format!("{x:?}")])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    out.flush()?;
    Ok(())
}
