//! Training objectives and their analytic gradients.
//!
//! * instance contrastive loss (NT-Xent over the 2n augmented views),
//! * Student-t soft assignment `Q` and the sharpened target `P`,
//! * the KL self-training loss `mean_j KL(p_j ‖ q_j)`, with `P` held constant,
//! * their plain sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sq_dist, Matrix};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine operands", a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVectorCosine);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_z1: Matrix,
    pub grad_z2: Matrix,
}

pub fn validate_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", format!("{tau} not in (0, 1]")));
    }
    Ok(())
}

/// Mean NT-Xent loss over all `2n` views.
///
/// View `a` of instance `i` is positive with the other view of `i`; the
/// denominator runs over the remaining `2n − 1` views.
pub fn contrastive_loss(z1: &Matrix, z2: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    validate_tau(tau)?;
    if z1.shape() != z2.shape() {
        return Err(Error::shape(
            "second view batch",
            format!("{}x{}", z1.rows(), z1.cols()),
            format!("{}x{}", z2.rows(), z2.cols()),
        ));
    }
    let n = z1.rows();
    if n == 0 {
        return Err(Error::invalid("batch", "contrastive loss needs at least one instance"));
    }
    let d = z1.cols();
    let m = 2 * n;

    // stacked views: rows 0..n are z1, rows n..2n are z2
    let mut unit = Matrix::zeros(m, d);
    let mut norms = vec![0.0; m];
    for a in 0..m {
        let src = if a < n { z1.row(a) } else { z2.row(a - n) };
        let nv = norm(src);
        if nv == 0.0 || !nv.is_finite() {
            return Err(Error::ZeroVectorCosine);
        }
        norms[a] = nv;
        for (u, s) in unit.row_mut(a).iter_mut().zip(src) {
            *u = s / nv;
        }
    }
    let positive = |a: usize| if a < n { a + n } else { a - n };
    let sims = unit.matmul_t(&unit);

    // coeff[a][b] = ∂(mean loss)/∂s_ab from the term of anchor a
    let mut coeff = Matrix::zeros(m, m);
    let mut total = 0.0;
    for a in 0..m {
        let row = sims.row(a);
        let max = (0..m)
            .filter(|&b| b != a)
            .map(|b| row[b] / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..m)
            .filter(|&b| b != a)
            .map(|b| (row[b] / tau - max).exp())
            .sum();
        let lse = max + sum.ln();
        total += lse - row[positive(a)] / tau;
        for b in (0..m).filter(|&b| b != a) {
            let w = (row[b] / tau - max).exp() / sum;
            let target = if b == positive(a) { 1.0 } else { 0.0 };
            coeff[(a, b)] = (w - target) / (tau * m as f64);
        }
    }
    let loss = total / m as f64;

    // s_ab = ûaᵀûb is symmetric, so ∂L/∂ûa = Σ_b (c_ab + c_ba) ûb
    let mut grad_z1 = Matrix::zeros(n, d);
    let mut grad_z2 = Matrix::zeros(n, d);
    for a in 0..m {
        let mut g_unit = vec![0.0; d];
        for b in (0..m).filter(|&b| b != a) {
            let c = coeff[(a, b)] + coeff[(b, a)];
            for (g, u) in g_unit.iter_mut().zip(unit.row(b)) {
                *g += c * u;
            }
        }
        // through u/‖u‖: (g − û(ûᵀg)) / ‖u‖
        let ua = unit.row(a);
        let proj = dot(ua, &g_unit);
        let dst = if a < n {
            grad_z1.row_mut(a)
        } else {
            grad_z2.row_mut(a - n)
        };
        for ((o, g), u) in dst.iter_mut().zip(&g_unit).zip(ua) {
            *o = (g - u * proj) / norms[a];
        }
    }
    Ok(ContrastiveOutput {
        loss,
        grad_z1,
        grad_z2,
    })
}

/// Student-t soft assignment of each embedding to each centroid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    pub q: Matrix,
    pub alpha: f64,
}

pub fn soft_assign(embeddings: &Matrix, centroids: &Matrix, alpha: f64) -> Result<SoftAssignment> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
    }
    let k = centroids.rows();
    if k < 2 {
        return Err(Error::invalid("centroids", "soft assignment needs K >= 2"));
    }
    if embeddings.cols() != centroids.cols() {
        return Err(Error::shape("centroid width", embeddings.cols(), centroids.cols()));
    }
    for a in 0..k {
        for b in a + 1..k {
            if centroids.row(a) == centroids.row(b) {
                return Err(Error::invalid("centroids", format!("centroids {a} and {b} coincide")));
            }
        }
    }
    let expo = -(alpha + 1.0) / 2.0;
    let mut q = Matrix::zeros(embeddings.rows(), k);
    for j in 0..embeddings.rows() {
        let e = embeddings.row(j);
        let row = q.row_mut(j);
        // log-kernel, normalized with max subtraction
        for (c, out) in row.iter_mut().enumerate() {
            let dist = sq_dist(e, centroids.row(c));
            if !dist.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("distance from embedding {j} to centroid {c}"),
                });
            }
            *out = expo * (dist / alpha).ln_1p();
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(SoftAssignment { q, alpha })
}

/// Sharpened self-training target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub p: Matrix,
    /// Soft cluster frequencies `f_k = Σ_j q_jk`.
    pub f: Vec<f64>,
}

/// `p_jk ∝ q_jk² / f_k`, normalized per row.
pub fn target_distribution(q: &SoftAssignment) -> Result<TargetDistribution> {
    let (n, k) = q.q.shape();
    let mut f = vec![0.0; k];
    for row in q.q.iter_rows() {
        for (fk, v) in f.iter_mut().zip(row) {
            *fk += v;
        }
    }
    if let Some(cluster) = f.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::EmptySoftCluster { cluster });
    }
    let mut p = Matrix::zeros(n, k);
    for j in 0..n {
        let qr = q.q.row(j);
        let row = p.row_mut(j);
        for c in 0..k {
            row[c] = qr[c] * qr[c] / f[c];
        }
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(TargetDistribution { p, f })
}

/// `KL(p ‖ q)` with both sides floored at [`PROB_FLOOR`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| {
            let pv = pv.max(PROB_FLOOR);
            pv * (pv / qv.max(PROB_FLOOR)).ln()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct KlOutput {
    pub loss: f64,
    pub grad_embeddings: Matrix,
    pub grad_centroids: Matrix,
}

/// Mean per-row `KL(p_j ‖ q_j)` and its gradient with `P` fixed.
///
/// For the Student-t kernel with `d_jk = ‖e_j − μ_k‖²`:
/// `∂KL_j/∂e_j = (α+1)/α · Σ_k (p_jk − q_jk)(e_j − μ_k) / (1 + d_jk/α)`
/// and the centroid gradient is the negated sum over rows.
pub fn kl_cluster_loss(
    target: &TargetDistribution,
    q: &SoftAssignment,
    embeddings: &Matrix,
    centroids: &Matrix,
) -> Result<KlOutput> {
    let (n, k) = q.q.shape();
    if target.p.shape() != (n, k) {
        return Err(Error::shape(
            "target distribution",
            format!("{n}x{k}"),
            format!("{}x{}", target.p.rows(), target.p.cols()),
        ));
    }
    if embeddings.rows() != n {
        return Err(Error::shape("embedding rows", n, embeddings.rows()));
    }
    if centroids.rows() != k || centroids.cols() != embeddings.cols() {
        return Err(Error::shape(
            "centroids",
            format!("{k}x{}", embeddings.cols()),
            format!("{}x{}", centroids.rows(), centroids.cols()),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("batch", "KL loss needs at least one row"));
    }
    let alpha = q.alpha;
    let d = embeddings.cols();
    let mut loss = 0.0;
    let mut grad_e = Matrix::zeros(n, d);
    let mut grad_c = Matrix::zeros(k, d);
    let scale = (alpha + 1.0) / alpha / n as f64;
    for j in 0..n {
        let (pr, qr) = (target.p.row(j), q.q.row(j));
        loss += kl_divergence(pr, qr);
        let e = embeddings.row(j);
        for c in 0..k {
            let mu = centroids.row(c);
            let dist = sq_dist(e, mu);
            let w = scale * (pr[c] - qr[c]) / (1.0 + dist / alpha);
            for t in 0..d {
                let diff = w * (e[t] - mu[t]);
                grad_e[(j, t)] += diff;
                grad_c[(c, t)] -= diff;
            }
        }
    }
    Ok(KlOutput {
        loss: loss / n as f64,
        grad_embeddings: grad_e,
        grad_centroids: grad_c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub contrastive: f64,
    pub clustering: f64,
    pub total: f64,
}

pub fn total_loss(contrastive: f64, clustering: f64) -> LossBreakdown {
    LossBreakdown {
        contrastive,
        clustering,
        total: contrastive + clustering,
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}
