//! Lloyd's algorithm with seeded random initialization.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Centroids, CentroidOrigin, HardAssignment};
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub centroids: Matrix,
    pub assignment: HardAssignment,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn from_parts(centroids: Matrix, assignment: HardAssignment, z: Matrix) -> Self {
        let s = sse(&z, &centroids, &assignment.labels);
        Self {
            centroids,
            assignment,
            sse_trace: vec![s],
            iterations: 0,
        }
    }

    pub fn final_sse(&self) -> f64 {
        *self.sse_trace.last().expect("at least one assignment step")
    }

    /// Nearest-centroid labels for new points.
    pub fn assign(&self, z: &Matrix) -> HardAssignment {
        HardAssignment {
            labels: nearest(z, &self.centroids),
            k: self.centroids.rows(),
        }
    }
}

fn nearest(z: &Matrix, centroids: &Matrix) -> Vec<usize> {
    z.iter_rows()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, mu) in centroids.iter_rows().enumerate() {
                let d = sq_dist(p, mu);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn sse(z: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    z.iter_rows()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

/// `k` distinct rows of `z`, chosen uniformly.
pub fn random_init(z: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    check_k(z, k)?;
    let mut idx = index::sample(rng, z.rows(), k).into_vec();
    idx.sort_unstable();
    Ok(z.select_rows(&idx))
}

fn check_k(z: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if k > z.rows() {
        return Err(Error::invalid("k", format!("k = {k} exceeds n = {}", z.rows())));
    }
    Ok(())
}

/// Lloyd iterations from the given centroids until assignments stop changing
/// or `max_iter` updates have run.
///
/// A cluster that loses all its points is re-seeded at the point farthest
/// from its current centroid.
pub fn kmeans_from(z: &Matrix, init: Matrix, max_iter: usize) -> Result<KMeansFit> {
    let k = init.rows();
    check_k(z, k)?;
    if init.cols() != z.cols() {
        return Err(Error::shape("initial centroids width", z.cols(), init.cols()));
    }
    let d = z.cols();
    let mut centroids = init;
    let mut labels = nearest(z, &centroids);
    let mut sse_trace = vec![sse(z, &centroids, &labels)];
    let mut iterations = 0;
    while iterations < max_iter {
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (p, &l) in z.iter_rows().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (mu, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *mu = s * inv;
                }
            }
        }
        let mut taken = Vec::new();
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..z.rows())
                .filter(|i| !taken.contains(i))
                .map(|i| (i, sq_dist(z.row(i), centroids.row(labels[i]))))
                .fold(None::<(usize, f64)>, |best, (i, dd)| match best {
                    Some((_, bd)) if bd >= dd => best,
                    _ => Some((i, dd)),
                });
            if let Some((i, _)) = far {
                taken.push(i);
                centroids.row_mut(c).copy_from_slice(z.row(i));
            }
        }
        iterations += 1;
        let next = nearest(z, &centroids);
        sse_trace.push(sse(z, &centroids, &next));
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeansFit {
        centroids,
        assignment: HardAssignment { labels, k },
        sse_trace,
        iterations,
    })
}

/// One seeded K-means run.
pub fn kmeans(z: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<(Centroids, HardAssignment)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit = kmeans_from(z, random_init(z, k, &mut rng)?, max_iter)?;
    Ok((
        Centroids {
            matrix: fit.centroids,
            origin: CentroidOrigin::KMeans,
        },
        fit.assignment,
    ))
}

/// Lowest-SSE fit among `restarts` random starts plus an optional warm start.
/// Earlier candidates win ties; the warm start comes first.
pub fn kmeans_best_of(
    z: &Matrix,
    k: usize,
    max_iter: usize,
    restarts: usize,
    seed: u64,
    warm: Option<&Matrix>,
) -> Result<KMeansFit> {
    check_k(z, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    let mut consider = |fit: KMeansFit| {
        if best.as_ref().is_none_or(|b| fit.final_sse() < b.final_sse()) {
            best = Some(fit);
        }
    };
    if let Some(w) = warm {
        consider(kmeans_from(z, w.clone(), max_iter)?);
    }
    for _ in 0..restarts.max(usize::from(warm.is_none())) {
        consider(kmeans_from(z, random_init(z, k, &mut rng)?, max_iter)?);
    }
    Ok(best.expect("at least one candidate"))
}
