//! Fast invariant checks behind `dectext selftest`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{kmeans_from, random_init, som_fit, SomSpec};
use crate::embed::{EncoderConfig, EncoderParams};
use crate::error::Result;
use crate::linalg::{norm, Matrix};
use crate::losses::{contrastive_loss, kl_cluster_loss, kl_divergence, soft_assign, target_distribution};
use crate::metrics::clustering_accuracy;
use crate::synthetic::{gaussian_blobs, BlobSpec};
use crate::trainer::{train, HeadKind, TrainConfig, TrainInput};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub secs: f64,
}

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Largest relative error between `grad` and central differences of `f` at `x`.
fn worst_fd(x: &Matrix, grad: &Matrix, f: impl Fn(&Matrix) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.as_slice().len() {
        let mut p = x.clone();
        p.as_mut_slice()[i] += H;
        let mut m = x.clone();
        m.as_mut_slice()[i] -= H;
        let num = (f(&p) - f(&m)) / (2.0 * H);
        worst = worst.max(rel_err(grad.as_slice()[i], num));
    }
    worst
}

fn check_gradients() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (n, d) = (rng.random_range(2..=8), rng.random_range(2..=16));
        let z1 = random_matrix(&mut rng, n, d);
        let z2 = random_matrix(&mut rng, n, d);
        let out = contrastive_loss(&z1, &z2, 0.5)?;
        worst = worst.max(worst_fd(&z1, &out.grad_z1, |z| contrastive_loss(z, &z2, 0.5).unwrap().loss));
        worst = worst.max(worst_fd(&z2, &out.grad_z2, |z| contrastive_loss(&z1, z, 0.5).unwrap().loss));

        let k = rng.random_range(2..=4);
        let e = random_matrix(&mut rng, n, d);
        let mu = random_matrix(&mut rng, k, d);
        let q = soft_assign(&e, &mu, 1.0)?;
        let t = target_distribution(&q)?;
        let kl = kl_cluster_loss(&t, &q, &e, &mu)?;
        let loss = |e: &Matrix, mu: &Matrix| {
            let q = soft_assign(e, mu, 1.0).unwrap();
            kl_cluster_loss(&t, &q, e, mu).unwrap().loss
        };
        worst = worst.max(worst_fd(&e, &kl.grad_embeddings, |x| loss(x, &mu)));
        worst = worst.max(worst_fd(&mu, &kl.grad_centroids, |x| loss(&e, x)));
    }

    let cfg = EncoderConfig {
        d_model: 8,
        heads: 2,
        d_ff: 12,
        d_out: 6,
        ..EncoderConfig::default()
    };
    let params = EncoderParams::init(&cfg, 3)?;
    let x = random_matrix(&mut rng, 5, cfg.d_model);
    let g = (0..cfg.d_out).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let obj = |p: &EncoderParams| -> f64 {
        let out = p.forward_cached(&x).unwrap().0;
        out.iter().zip(&g).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = params.forward_cached(&x)?;
    let mut grads = params.zeros_like();
    params.backward(&cache, &g, &mut grads);
    let analytic: Vec<f64> = grads.tensors().concat();
    for (i, &a) in analytic.iter().enumerate().step_by(7) {
        let shifted = |delta: f64| {
            let mut p = params.clone();
            let mut left = i;
            for t in p.tensors_mut() {
                if left < t.len() {
                    t[left] += delta;
                    break;
                }
                left -= t.len();
            }
            obj(&p)
        };
        let num = (shifted(H) - shifted(-H)) / (2.0 * H);
        worst = worst.max(rel_err(a, num));
    }
    Ok((worst < TOL, format!("worst relative error {worst:.2e}")))
}

fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    fn go(perm: &mut Vec<usize>, k: usize, pred: &[usize], truth: &[usize], best: &mut usize) {
        if k == perm.len() {
            let hits = pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count();
            *best = (*best).max(hits);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            go(perm, k + 1, pred, truth, best);
            perm.swap(k, i);
        }
    }
    let slots = pred.iter().chain(truth).max().map_or(1, |m| m + 1);
    let mut best = 0;
    go(&mut (0..slots).collect(), 0, pred, truth, &mut best);
    best as f64 / pred.len() as f64
}

fn check_metrics() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let n = rng.random_range(1..=30);
        let (kp, kt) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
        let fast = clustering_accuracy(&pred, &truth)?.0;
        let slow = brute_force_acc(&pred, &truth);
        if (fast - slow).abs() > 1e-12 {
            return Ok((false, format!("case {case}: hungarian {fast} vs brute force {slow}")));
        }
    }
    Ok((true, "50 cases agree".into()))
}

fn check_distributions() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum = 0.0f64;
    let mut min_kl = f64::INFINITY;
    for _ in 0..200 {
        let (n, d, k) = (rng.random_range(1..=8), rng.random_range(1..=16), rng.random_range(2..=4));
        let q = soft_assign(&random_matrix(&mut rng, n, d), &random_matrix(&mut rng, k, d), 1.0)?;
        let t = target_distribution(&q)?;
        for (qr, pr) in q.q.iter_rows().zip(t.p.iter_rows()) {
            worst_sum = worst_sum
                .max((qr.iter().sum::<f64>() - 1.0).abs())
                .max((pr.iter().sum::<f64>() - 1.0).abs());
            min_kl = min_kl.min(kl_divergence(pr, qr));
            if kl_divergence(qr, qr).abs() > 1e-9 {
                return Ok((false, "KL(q||q) is not zero".into()));
            }
        }
    }
    Ok((
        worst_sum <= 1e-9 && min_kl >= -1e-12,
        format!("worst row-sum error {worst_sum:.1e}, min KL {min_kl:.1e}"),
    ))
}

fn check_monotonicity() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = random_matrix(&mut rng, 120, 5);
    let fit = kmeans_from(&z, random_init(&z, 4, &mut rng)?, 100)?;
    let sse_ok = fit.sse_trace.windows(2).all(|w| w[1] <= w[0]);
    let spec = SomSpec {
        rows: 2,
        cols: 3,
        iterations: 40,
        seed: 4,
        ..SomSpec::default()
    };
    let (grid, _, trace) = som_fit(&z, spec)?;
    let (head, tail) = trace.head_tail_means();
    let unit = grid.weights.iter_rows().all(|w| (norm(w) - 1.0).abs() <= 1e-6);
    Ok((
        sse_ok && tail <= head && trace.max_norm_error <= 1e-6 && unit,
        format!(
            "sse monotone {sse_ok}, qe {head:.4} -> {tail:.4}, max norm error {:.1e}",
            trace.max_norm_error
        ),
    ))
}

fn check_recovery() -> Result<(bool, String)> {
    let (set, labels) = gaussian_blobs(&BlobSpec::default())?;
    let input = TrainInput::Embeddings {
        set,
        labels: Some(labels),
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for head in [HeadKind::KMeans, HeadKind::Som] {
        let cfg = TrainConfig {
            head,
            ..TrainConfig::default()
        };
        let r = train(&cfg, &input)?.report.expect("blobs carry labels");
        ok &= r.acc >= 0.99 && r.nmi >= 0.95;
        detail.push(format!("{head} acc {:.3} nmi {:.3}", r.acc, r.nmi));
    }
    Ok((ok, detail.join(", ")))
}

/// Runs every check; a check that errors counts as failed.
pub fn run_all() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<(bool, String)>); 5] = [
        ("gradients", check_gradients),
        ("metric oracle", check_metrics),
        ("distributions", check_distributions),
        ("monotonicity", check_monotonicity),
        ("blob recovery", check_recovery),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome {
                name,
                passed,
                detail,
                secs: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
