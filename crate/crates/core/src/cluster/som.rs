//! Kohonen self-organizing map over unit-normalized inputs.
//!
//! For iteration `t` in `0..T` with `s = t/T`:
//! learning rate `a(t) = α₀(1 − s)`, width `δ(t) = δ₀(1 − s) + 0.01`, and
//! `h(c, i) = a(t) · exp(−‖c − i‖²_grid / (2δ(t)))`. Each sample, in index
//! order, pulls every neuron by `h·(z − w)`; the neuron is then renormalized.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{unit_normalize_rows, HardAssignment};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sq_dist, Matrix};

const DELTA_FLOOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SomSpec {
    pub rows: usize,
    pub cols: usize,
    pub iterations: usize,
    pub alpha0: f64,
    pub delta0: f64,
    pub seed: u64,
}

impl Default for SomSpec {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            iterations: 20,
            alpha0: 0.5,
            delta0: 1.0,
            seed: 0,
        }
    }
}

impl SomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("som grid", "rows and cols must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("som iterations", "must be at least 1"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) || !(self.delta0 >= 0.0 && self.delta0.is_finite()) {
            return Err(Error::invalid("som schedule", "alpha0 must be positive and delta0 nonnegative"));
        }
        Ok(())
    }

    pub fn neurons(&self) -> usize {
        self.rows * self.cols
    }

    pub fn learning_rate(&self, t: usize) -> f64 {
        self.alpha0 * (1.0 - t as f64 / self.iterations as f64)
    }

    pub fn width(&self, t: usize) -> f64 {
        self.delta0 * (1.0 - t as f64 / self.iterations as f64) + DELTA_FLOOR
    }
}

/// `h = a · exp(−sqdist / (2δ))`
pub fn neighborhood(a: f64, sqdist: f64, delta: f64) -> f64 {
    a * (-sqdist / (2.0 * delta)).exp()
}

pub fn grid_sq_dist(cols: usize, a: usize, b: usize) -> f64 {
    let (ra, ca) = ((a / cols) as f64, (a % cols) as f64);
    let (rb, cb) = ((b / cols) as f64, (b % cols) as f64);
    (ra - rb).powi(2) + (ca - cb).powi(2)
}

/// Neuron with the smallest squared distance; lowest index on ties.
pub fn winner(weights: &Matrix, z: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, w) in weights.iter_rows().enumerate() {
        let d = sq_dist(z, w);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Neuron with the largest cosine similarity. For unit vectors this is the
/// same neuron as [`winner`].
pub fn winner_by_cosine(weights: &Matrix, z: &[f64]) -> usize {
    let nz = norm(z);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in weights.iter_rows().enumerate() {
        let c = dot(z, w) / (nz * norm(w));
        if c > best.1 {
            best = (i, c);
        }
    }
    best.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub spec: SomSpec,
    /// `(rows·cols) × d`, every row unit length.
    pub weights: Matrix,
}

/// Per-iteration diagnostics from [`SomGrid::train`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SomTrace {
    /// Mean winner distance over the samples of each iteration.
    pub quantization_error: Vec<f64>,
    /// Largest `|‖w‖ − 1|` seen after any single update.
    pub max_norm_error: f64,
}

impl SomTrace {
    /// Mean quantization error over the first and last tenth of iterations.
    pub fn head_tail_means(&self) -> (f64, f64) {
        let n = self.quantization_error.len();
        let w = n.div_ceil(10).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&self.quantization_error[..w]), mean(&self.quantization_error[n - w..]))
    }
}

impl SomGrid {
    /// Neurons start at distinct normalized samples of `z`; if there are fewer
    /// samples than neurons, at random unit vectors.
    pub fn init(spec: SomSpec, z: &Matrix) -> Result<Self> {
        spec.validate()?;
        let d = z.cols();
        if d == 0 {
            return Err(Error::invalid("input", "zero-width input"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let m = spec.neurons();
        let weights = if z.rows() >= m {
            let mut idx = index::sample(&mut rng, z.rows(), m).into_vec();
            idx.sort_unstable();
            unit_normalize_rows(&z.select_rows(&idx))?
        } else {
            let raw = Matrix::from_fn(m, d, |_, _| StandardNormal.sample(&mut rng));
            unit_normalize_rows(&raw)?
        };
        Ok(Self { spec, weights })
    }

    pub fn neurons(&self) -> usize {
        self.weights.rows()
    }

    /// Runs the full schedule over `z` (normalized internally).
    pub fn train(&mut self, z: &Matrix) -> Result<SomTrace> {
        if z.cols() != self.weights.cols() {
            return Err(Error::shape("som input width", self.weights.cols(), z.cols()));
        }
        let z = unit_normalize_rows(z)?;
        let spec = self.spec;
        let m = self.neurons();
        let mut trace = SomTrace::default();
        for t in 0..spec.iterations {
            let a = spec.learning_rate(t);
            let delta = spec.width(t);
            let mut qe = 0.0;
            for sample in z.iter_rows() {
                let (c, dist) = winner(&self.weights, sample);
                qe += dist.sqrt();
                for i in 0..m {
                    let h = neighborhood(a, grid_sq_dist(spec.cols, c, i), delta);
                    if h == 0.0 {
                        continue;
                    }
                    let w = self.weights.row_mut(i);
                    for (wv, zv) in w.iter_mut().zip(sample) {
                        *wv += h * (zv - *wv);
                    }
                    let nw = norm(w);
                    // h < 1 and both endpoints are unit, so the blend only
                    // vanishes for exactly antipodal w and z
                    if nw > 0.0 {
                        for wv in w.iter_mut() {
                            *wv /= nw;
                        }
                    } else {
                        w.copy_from_slice(sample);
                    }
                    trace.max_norm_error = trace.max_norm_error.max((norm(w) - 1.0).abs());
                }
            }
            trace.quantization_error.push(qe / z.rows() as f64);
        }
        Ok(trace)
    }

    /// Winner index `row·cols + col` for every (normalized) input.
    pub fn assign(&self, z: &Matrix) -> Result<HardAssignment> {
        let z = unit_normalize_rows(z)?;
        Ok(HardAssignment {
            labels: z.iter_rows().map(|r| winner(&self.weights, r).0).collect(),
            k: self.neurons(),
        })
    }
}

/// Initializes, trains and labels in one call.
pub fn som_fit(z: &Matrix, spec: SomSpec) -> Result<(SomGrid, HardAssignment, SomTrace)> {
    let mut grid = SomGrid::init(spec, z)?;
    let trace = grid.train(z)?;
    let labels = grid.assign(z)?;
    Ok((grid, labels, trace))
}
