//! A single transformer encoder block with a projection head, plus its
//! hand-written backward pass.
//!
//! Forward for a token matrix `X` (m×d):
//!
//! ```text
//! A_h  = softmax(X Wq_h (X Wk_h)ᵀ / √d_k)        per head
//! MH   = cat_h(A_h X Wv_h) Wc
//! Y1   = LN(X + MH)
//! Y2   = LN(Y1 + relu(Y1 W1 + b1) W2 + b2)
//! out  = mean_rows(Y2) · G
//! ```
//!
//! Layer norm has no affine parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hashing::token_bucket;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub d_out: usize,
    /// Tokens beyond this many are dropped.
    pub max_len: usize,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 16,
            heads: 2,
            d_ff: 32,
            d_out: 16,
            max_len: 32,
            hash_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model < 2 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::invalid(
                "encoder",
                format!(
                    "d_model ({}) must be >= 2 and divisible by heads ({})",
                    self.d_model, self.heads
                ),
            ));
        }
        if self.d_ff == 0 || self.d_out == 0 || self.max_len == 0 {
            return Err(Error::invalid("encoder", "d_ff, d_out and max_len must be positive"));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Trainable weights of the block. Also used as the gradient accumulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_c: Matrix,
    pub w_f1: Matrix,
    pub b_f1: Vec<f64>,
    pub w_f2: Matrix,
    pub b_f2: Vec<f64>,
    pub proj: Matrix,
}

pub type EncoderGrads = EncoderParams;

fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
}

impl EncoderParams {
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, dh) = (cfg.d_model, cfg.d_head());
        let heads = |rng: &mut ChaCha8Rng| (0..cfg.heads).map(|_| xavier(d, dh, rng)).collect();
        let w_q = heads(&mut rng);
        let w_k = heads(&mut rng);
        let w_v = heads(&mut rng);
        Ok(Self {
            w_q,
            w_k,
            w_v,
            w_c: xavier(cfg.heads * dh, d, &mut rng),
            w_f1: xavier(d, cfg.d_ff, &mut rng),
            b_f1: vec![0.0; cfg.d_ff],
            w_f2: xavier(cfg.d_ff, d, &mut rng),
            b_f2: vec![0.0; d],
            proj: xavier(d, cfg.d_out, &mut rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            w_q: self.w_q.iter().map(z).collect(),
            w_k: self.w_k.iter().map(z).collect(),
            w_v: self.w_v.iter().map(z).collect(),
            w_c: z(&self.w_c),
            w_f1: z(&self.w_f1),
            b_f1: vec![0.0; self.b_f1.len()],
            w_f2: z(&self.w_f2),
            b_f2: vec![0.0; self.b_f2.len()],
            proj: z(&self.proj),
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_c.cols()
    }

    pub fn d_out(&self) -> usize {
        self.proj.cols()
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for h in 0..self.w_q.len() {
            v.push(self.w_q[h].as_slice());
            v.push(self.w_k[h].as_slice());
            v.push(self.w_v[h].as_slice());
        }
        v.extend([
            self.w_c.as_slice(),
            self.w_f1.as_slice(),
            &self.b_f1,
            self.w_f2.as_slice(),
            &self.b_f2,
            self.proj.as_slice(),
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for ((q, k), w) in self.w_q.iter_mut().zip(&mut self.w_k).zip(&mut self.w_v) {
            v.push(q.as_mut_slice());
            v.push(k.as_mut_slice());
            v.push(w.as_mut_slice());
        }
        v.extend([
            self.w_c.as_mut_slice(),
            self.w_f1.as_mut_slice(),
            self.b_f1.as_mut_slice(),
            self.w_f2.as_mut_slice(),
            self.b_f2.as_mut_slice(),
            self.proj.as_mut_slice(),
        ]);
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let heads = self.w_q.len();
        if heads == 0 || self.w_k.len() != heads || self.w_v.len() != heads {
            return Err(Error::shape("w_q/w_k/w_v head count", heads, self.w_k.len().min(self.w_v.len())));
        }
        let d = self.w_c.cols();
        let dk = self.w_q[0].cols();
        let dv = self.w_v[0].cols();
        for h in 0..heads {
            for (name, m, cols) in [("w_q", &self.w_q[h], dk), ("w_k", &self.w_k[h], dk), ("w_v", &self.w_v[h], dv)] {
                if m.shape() != (d, cols) {
                    return Err(Error::shape(
                        format!("{name}[{h}]"),
                        format!("{d}x{cols}"),
                        format!("{}x{}", m.rows(), m.cols()),
                    ));
                }
            }
        }
        if self.w_c.rows() != heads * dv {
            return Err(Error::shape("w_c", format!("{}x{d}", heads * dv), format!("{}x{}", self.w_c.rows(), d)));
        }
        let dff = self.w_f1.cols();
        if self.w_f1.rows() != d {
            return Err(Error::shape("w_f1", format!("{d}x{dff}"), format!("{}x{}", self.w_f1.rows(), dff)));
        }
        if self.b_f1.len() != dff {
            return Err(Error::shape("b_f1", dff, self.b_f1.len()));
        }
        if self.w_f2.shape() != (dff, d) {
            return Err(Error::shape(
                "w_f2",
                format!("{dff}x{d}"),
                format!("{}x{}", self.w_f2.rows(), self.w_f2.cols()),
            ));
        }
        if self.b_f2.len() != d {
            return Err(Error::shape("b_f2", d, self.b_f2.len()));
        }
        if self.proj.rows() != d {
            return Err(Error::shape(
                "proj",
                format!("{d}x{}", self.proj.cols()),
                format!("{}x{}", self.proj.rows(), self.proj.cols()),
            ));
        }
        Ok(())
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    x: Matrix,
    q: Vec<Matrix>,
    k: Vec<Matrix>,
    v: Vec<Matrix>,
    attn: Vec<Matrix>,
    concat: Matrix,
    y1: Matrix,
    ln1_inv_std: Vec<f64>,
    hidden_pre: Matrix,
    hidden: Matrix,
    y2: Matrix,
    ln2_inv_std: Vec<f64>,
    pooled: Vec<f64>,
}

fn softmax_rows(s: &mut Matrix) {
    for i in 0..s.rows() {
        let row = s.row_mut(i);
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
}

fn attention_probs(q: &Matrix, k: &Matrix) -> Matrix {
    let mut s = q.matmul_t(k);
    s.scale(1.0 / (q.cols() as f64).sqrt());
    softmax_rows(&mut s);
    s
}

/// `softmax(Q Kᵀ / √d_k) V`
pub fn self_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix> {
    if q.cols() == 0 {
        return Err(Error::invalid("d_k", "must be at least 1"));
    }
    if k.shape() != q.shape() {
        return Err(Error::shape("K", format!("{}x{}", q.rows(), q.cols()), format!("{}x{}", k.rows(), k.cols())));
    }
    if v.rows() != q.rows() {
        return Err(Error::shape("V rows", q.rows(), v.rows()));
    }
    for (name, m) in [("Q", q), ("K", k), ("V", v)] {
        if !m.is_finite() {
            return Err(Error::NonFinite { what: name.into() });
        }
    }
    Ok(attention_probs(q, k).matmul(v))
}

/// Row-wise layer norm without gain or bias; also returns each row's `1/σ`.
fn layer_norm_rows(x: &Matrix) -> (Matrix, Vec<f64>) {
    let mut y = x.clone();
    let mut inv = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        inv.push(layer_norm_in_place(y.row_mut(i)));
    }
    (y, inv)
}

fn layer_norm_in_place(row: &mut [f64]) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for v in row.iter_mut() {
        *v = (*v - mean) * inv_std;
    }
    inv_std
}

pub fn layer_norm(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    layer_norm_in_place(&mut out);
    out
}

/// dx = (dy − mean(dy) − y·mean(dy⊙y)) / σ, per row.
fn layer_norm_backward(y: &Matrix, inv_std: &[f64], dy: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    let n = y.cols() as f64;
    for i in 0..y.rows() {
        let (yr, gr) = (y.row(i), dy.row(i));
        let mean_g = gr.iter().sum::<f64>() / n;
        let mean_gy = yr.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>() / n;
        for ((o, &yv), &gv) in dx.row_mut(i).iter_mut().zip(yr).zip(gr) {
            *o = inv_std[i] * (gv - mean_g - yv * mean_gy);
        }
    }
    dx
}

fn add_bias(m: &mut Matrix, b: &[f64]) {
    for i in 0..m.rows() {
        for (v, bj) in m.row_mut(i).iter_mut().zip(b) {
            *v += bj;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for r in m.iter_rows() {
        for (a, b) in s.iter_mut().zip(r) {
            *a += b;
        }
    }
    s
}

impl EncoderParams {
    pub fn forward_cached(&self, x: &Matrix) -> Result<(Vec<f64>, EncoderCache)> {
        self.check_shapes()?;
        if x.rows() == 0 {
            return Err(Error::invalid("token matrix", "needs at least one token"));
        }
        if x.cols() != self.d_model() {
            return Err(Error::shape("token matrix width", self.d_model(), x.cols()));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "token matrix".into() });
        }
        let heads = self.w_q.len();
        let dv = self.w_v[0].cols();
        let m = x.rows();

        let mut concat = Matrix::zeros(m, heads * dv);
        let (mut qs, mut ks, mut vs, mut attn) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for h in 0..heads {
            let q = x.matmul(&self.w_q[h]);
            let k = x.matmul(&self.w_k[h]);
            let v = x.matmul(&self.w_v[h]);
            let a = attention_probs(&q, &k);
            concat.set_columns(h * dv, &a.matmul(&v));
            qs.push(q);
            ks.push(k);
            vs.push(v);
            attn.push(a);
        }
        let mut r1 = concat.matmul(&self.w_c);
        r1.add_assign(x);
        let (y1, ln1_inv_std) = layer_norm_rows(&r1);

        let mut hidden_pre = y1.matmul(&self.w_f1);
        add_bias(&mut hidden_pre, &self.b_f1);
        let mut hidden = hidden_pre.clone();
        for v in hidden.as_mut_slice() {
            *v = v.max(0.0);
        }
        let mut r2 = hidden.matmul(&self.w_f2);
        add_bias(&mut r2, &self.b_f2);
        r2.add_assign(&y1);
        let (y2, ln2_inv_std) = layer_norm_rows(&r2);

        let mut pooled = column_sums(&y2);
        for p in &mut pooled {
            *p /= m as f64;
        }
        let out = Matrix::from_vec(1, pooled.len(), pooled.clone())?.matmul(&self.proj).into_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "encoder output".into() });
        }
        Ok((
            out,
            EncoderCache {
                x: x.clone(),
                q: qs,
                k: ks,
                v: vs,
                attn,
                concat,
                y1,
                ln1_inv_std,
                hidden_pre,
                hidden,
                y2,
                ln2_inv_std,
                pooled,
            },
        ))
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂out`.
    pub fn backward(&self, cache: &EncoderCache, d_out: &[f64], grads: &mut EncoderGrads) {
        let m = cache.x.rows();
        let d = self.d_model();
        let dv = self.w_v[0].cols();
        let scale = 1.0 / (self.w_q[0].cols() as f64).sqrt();

        // out = pooled · proj
        for (i, &p) in cache.pooled.iter().enumerate() {
            for (g, &dout) in grads.proj.row_mut(i).iter_mut().zip(d_out) {
                *g += p * dout;
            }
        }
        let d_pooled: Vec<f64> = (0..d)
            .map(|i| crate::linalg::dot(self.proj.row(i), d_out))
            .collect();

        let mut d_y2 = Matrix::zeros(m, d);
        for i in 0..m {
            for (g, &dp) in d_y2.row_mut(i).iter_mut().zip(&d_pooled) {
                *g = dp / m as f64;
            }
        }
        let d_r2 = layer_norm_backward(&cache.y2, &cache.ln2_inv_std, &d_y2);

        // feed-forward branch
        for (g, s) in grads.b_f2.iter_mut().zip(column_sums(&d_r2)) {
            *g += s;
        }
        grads.w_f2.add_assign(&cache.hidden.t_matmul(&d_r2));
        let mut d_hidden = d_r2.matmul_t(&self.w_f2);
        for (g, &pre) in d_hidden.as_mut_slice().iter_mut().zip(cache.hidden_pre.as_slice()) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        for (g, s) in grads.b_f1.iter_mut().zip(column_sums(&d_hidden)) {
            *g += s;
        }
        grads.w_f1.add_assign(&cache.y1.t_matmul(&d_hidden));
        let mut d_y1 = d_hidden.matmul_t(&self.w_f1);
        d_y1.add_assign(&d_r2);

        let d_r1 = layer_norm_backward(&cache.y1, &cache.ln1_inv_std, &d_y1);

        // attention branch; the residual path into X carries no parameters
        grads.w_c.add_assign(&cache.concat.t_matmul(&d_r1));
        let d_concat = d_r1.matmul_t(&self.w_c);
        for h in 0..self.w_q.len() {
            let d_o = d_concat.columns(h * dv, dv);
            let a = &cache.attn[h];
            let d_a = d_o.matmul_t(&cache.v[h]);
            let d_v = a.t_matmul(&d_o);
            let mut d_s = Matrix::zeros(m, m);
            for i in 0..m {
                let (ar, gr) = (a.row(i), d_a.row(i));
                let inner = crate::linalg::dot(ar, gr);
                for ((o, &av), &gv) in d_s.row_mut(i).iter_mut().zip(ar).zip(gr) {
                    *o = av * (gv - inner) * scale;
                }
            }
            let d_q = d_s.matmul(&cache.k[h]);
            let d_k = d_s.t_matmul(&cache.q[h]);
            grads.w_q[h].add_assign(&cache.x.t_matmul(&d_q));
            grads.w_k[h].add_assign(&cache.x.t_matmul(&d_k));
            grads.w_v[h].add_assign(&cache.x.t_matmul(&d_v));
        }
    }
}

pub fn encoder_forward(params: &EncoderParams, x: &Matrix) -> Result<Vec<f64>> {
    params.forward_cached(x).map(|(out, _)| out)
}

/// Standard sine/cosine position table, `positions × d`.
pub fn sinusoidal_positions(positions: usize, d: usize) -> Matrix {
    Matrix::from_fn(positions, d, |pos, j| {
        let i = (j / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Token inputs: each token hashed to a signed one-hot scaled by `√d`,
/// plus its sinusoidal position.
pub fn token_matrix(text: &str, cfg: &EncoderConfig) -> Result<Matrix> {
    let tokens: Vec<&str> = text.split_whitespace().take(cfg.max_len).collect();
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let d = cfg.d_model;
    let mut x = sinusoidal_positions(tokens.len(), d);
    let scale = (d as f64).sqrt();
    for (i, tok) in tokens.iter().enumerate() {
        let (b, s) = token_bucket(tok, d, cfg.hash_seed);
        x[(i, b)] += s * scale;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Three explicit loops, no shared helpers.
    fn naive_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Matrix {
        let (m, dk, dv) = (q.rows(), q.cols(), v.cols());
        let mut out = Matrix::zeros(m, dv);
        for i in 0..m {
            let mut scores = vec![0.0; m];
            for j in 0..m {
                let mut s = 0.0;
                for t in 0..dk {
                    s += q[(i, t)] * k[(j, t)];
                }
                scores[j] = s / (dk as f64).sqrt();
            }
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for j in 0..m {
                let w = scores[j].exp() / z;
                for c in 0..dv {
                    out[(i, c)] += w * v[(j, c)];
                }
            }
        }
        out
    }

    #[test]
    fn single_position_returns_v() {
        let q = Matrix::from_rows(&[[0.3, -1.2]]).unwrap();
        let k = Matrix::from_rows(&[[2.0, 0.5]]).unwrap();
        let v = Matrix::from_rows(&[[4.0, -5.0, 6.0]]).unwrap();
        assert_eq!(self_attention(&q, &k, &v).unwrap(), v);
    }

    #[test]
    fn zero_queries_average_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = rand_matrix(4, 3, &mut rng);
        let v = rand_matrix(4, 2, &mut rng);
        let out = self_attention(&Matrix::zeros(4, 3), &k, &v).unwrap();
        for c in 0..2 {
            let mean = (0..4).map(|r| v[(r, c)]).sum::<f64>() / 4.0;
            for r in 0..4 {
                assert!((out[(r, c)] - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_naive_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = rand_matrix(3, 4, &mut rng);
        let k = rand_matrix(3, 4, &mut rng);
        let v = rand_matrix(3, 4, &mut rng);
        let got = self_attention(&q, &k, &v).unwrap();
        let want = naive_attention(&q, &k, &v);
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = attention_probs(&rand_matrix(6, 4, &mut rng), &rand_matrix(6, 4, &mut rng));
        for r in a.iter_rows() {
            assert!(r.iter().all(|&p| p >= 0.0));
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut q = Matrix::zeros(2, 2);
        q[(0, 0)] = f64::NAN;
        assert!(self_attention(&q, &Matrix::zeros(2, 2), &Matrix::zeros(2, 2)).is_err());
    }

    fn identity_params(d: usize) -> EncoderParams {
        EncoderParams {
            w_q: vec![Matrix::identity(d)],
            w_k: vec![Matrix::identity(d)],
            w_v: vec![Matrix::identity(d)],
            w_c: Matrix::identity(d),
            w_f1: Matrix::zeros(d, 4),
            b_f1: vec![0.3; 4],
            w_f2: Matrix::zeros(4, d),
            b_f2: vec![0.0; d],
            proj: Matrix::identity(d),
        }
    }

    #[test]
    fn identity_path_is_double_layer_norm() {
        let x = Matrix::from_rows(&[[0.5, -1.0, 2.0, 0.25]]).unwrap();
        let out = encoder_forward(&identity_params(4), &x).unwrap();
        // attention over one token returns x; residual doubles it
        let doubled: Vec<f64> = x.row(0).iter().map(|v| 2.0 * v).collect();
        let want = layer_norm(&layer_norm(&doubled));
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{out:?} vs {want:?}");
        }
    }

    #[test]
    fn layer_norm_absorbs_input_scale() {
        // with one token attention is linear in x, so every post-norm
        // activation is invariant to a positive rescaling of x
        let cfg = EncoderConfig::default();
        let params = EncoderParams::init(&cfg, 5).unwrap();
        let x = token_matrix("generative", &cfg).unwrap();
        let mut x3 = x.clone();
        x3.scale(3.0);
        let (o1, c1) = params.forward_cached(&x).unwrap();
        let (o3, c3) = params.forward_cached(&x3).unwrap();
        for (a, b) in c1.y1.as_slice().iter().zip(c3.y1.as_slice()) {
            assert!((a - b).abs() < 1e-4);
        }
        for (a, b) in c1.y2.as_slice().iter().zip(c3.y2.as_slice()) {
            assert!((a - b).abs() < 1e-4);
        }
        for (a, b) in o1.iter().zip(&o3) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn shape_errors_name_the_parameter() {
        let mut p = identity_params(4);
        p.b_f2 = vec![0.0; 3];
        let err = encoder_forward(&p, &Matrix::zeros(1, 4)).unwrap_err().to_string();
        assert!(err.contains("b_f2"), "{err}");
        let mut p = identity_params(4);
        p.w_c = Matrix::zeros(3, 4);
        let err = encoder_forward(&p, &Matrix::zeros(1, 4)).unwrap_err().to_string();
        assert!(err.contains("w_c"), "{err}");
    }

    #[test]
    fn token_matrix_truncates() {
        let cfg = EncoderConfig {
            max_len: 3,
            ..EncoderConfig::default()
        };
        assert_eq!(token_matrix("a b c d e", &cfg).unwrap().rows(), 3);
        assert!(token_matrix("  ", &cfg).is_err());
    }

    fn scalar_loss(params: &EncoderParams, x: &Matrix, w: &[f64]) -> f64 {
        let out = encoder_forward(params, x).unwrap();
        out.iter().zip(w).map(|(o, w)| (o * w).sin()).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let cfg = EncoderConfig {
            d_model: 8,
            heads: 2,
            d_ff: 12,
            d_out: 5,
            max_len: 8,
            hash_seed: 3,
        };
        let mut params = EncoderParams::init(&cfg, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for b in params.b_f1.iter_mut().chain(params.b_f2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        let x = rand_matrix(5, 8, &mut rng);
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (out, cache) = params.forward_cached(&x).unwrap();
        let d_out: Vec<f64> = out.iter().zip(&w).map(|(o, w)| w * (o * w).cos()).collect();
        let mut grads = params.zeros_like();
        params.backward(&cache, &d_out, &mut grads);

        let h = 1e-5;
        let analytic: Vec<f64> = grads.tensors().concat();
        let mut idx = 0;
        let n_tensors = params.tensors().len();
        for t in 0..n_tensors {
            let len = params.tensors()[t].len();
            for e in 0..len {
                let orig = params.tensors()[t][e];
                params.tensors_mut()[t][e] = orig + h;
                let fp = scalar_loss(&params, &x, &w);
                params.tensors_mut()[t][e] = orig - h;
                let fm = scalar_loss(&params, &x, &w);
                params.tensors_mut()[t][e] = orig;
                let numeric = (fp - fm) / (2.0 * h);
                let a = analytic[idx];
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                assert!((a - numeric).abs() / denom < 1e-4, "tensor {t} elem {e}: {a} vs {numeric}");
                idx += 1;
            }
        }
    }
}
