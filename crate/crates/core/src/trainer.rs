//! The joint contrastive + clustering training loop and hyperparameter sweeps.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_pair, AugmentPolicy};
use crate::cluster::{kmeans_best_of, label_as_representation, unit_normalize_rows, SomGrid, SomSpec};
use crate::corpus::Corpus;
use crate::embed::{hashed_bow, token_matrix, EmbeddingSet, EncoderCache, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::linalg::{argmin, dot, norm, sq_dist, Matrix};
use crate::losses::{
    contrastive_loss, kl_cluster_loss, soft_assign, target_distribution, total_loss, validate_tau,
    LossBreakdown,
};
use crate::metrics::{evaluate, EvalReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeadKind {
    #[serde(rename = "som")]
    Som,
    #[serde(rename = "somr")]
    SomR,
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "kmeansr")]
    KMeansR,
    #[serde(rename = "label-as-rep")]
    LabelAsRep,
}

impl HeadKind {
    /// The four heads compared in the result tables, in table order.
    pub const TABLE: [HeadKind; 4] = [HeadKind::Som, HeadKind::SomR, HeadKind::KMeans, HeadKind::KMeansR];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Som => "som",
            HeadKind::SomR => "somr",
            HeadKind::KMeans => "kmeans",
            HeadKind::KMeansR => "kmeansr",
            HeadKind::LabelAsRep => "label-as-rep",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            HeadKind::Som => "SOM",
            HeadKind::SomR => "SOMR",
            HeadKind::KMeans => "Kmeans",
            HeadKind::KMeansR => "KmeansR",
            HeadKind::LabelAsRep => "LabelRep",
        }
    }

    /// Labels come from the argmax of a learned K-dimensional projection.
    pub fn is_projected(self) -> bool {
        matches!(self, HeadKind::SomR | HeadKind::KMeansR | HeadKind::LabelAsRep)
    }

    pub fn is_som(self) -> bool {
        matches!(self, HeadKind::Som | HeadKind::SomR)
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            HeadKind::Som,
            HeadKind::SomR,
            HeadKind::KMeans,
            HeadKind::KMeansR,
            HeadKind::LabelAsRep,
        ];
        all.into_iter()
            .find(|h| s.eq_ignore_ascii_case(h.name()) || s.eq_ignore_ascii_case(h.display_name()))
            .ok_or_else(|| Error::invalid("head", format!("unknown head {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// How texts become vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Precomputed vectors; nothing upstream of the head is trained.
    Fixed {},
    HashedBow { dim: usize, seed: u64 },
    Encoder(EncoderConfig),
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Fixed {}
    }
}

impl ProviderConfig {
    pub fn needs_text(&self) -> bool {
        !matches!(self, ProviderConfig::Fixed {})
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub iterations: usize,
    pub alpha0: f64,
    pub delta0: f64,
}

impl Default for SomConfig {
    fn default() -> Self {
        let s = SomSpec::default();
        Self {
            rows: s.rows,
            cols: s.cols,
            iterations: s.iterations,
            alpha0: s.alpha0,
            delta0: s.delta0,
        }
    }
}

impl SomConfig {
    pub fn spec(&self, seed: u64) -> SomSpec {
        SomSpec {
            rows: self.rows,
            cols: self.cols,
            iterations: self.iterations,
            alpha0: self.alpha0,
            delta0: self.delta0,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub word_delete_prob: f64,
    pub word_swap_prob: f64,
    pub span_mask_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let p = AugmentPolicy::default();
        Self {
            word_delete_prob: p.word_delete_prob,
            word_swap_prob: p.word_swap_prob,
            span_mask_prob: p.span_mask_prob,
        }
    }
}

impl AugmentConfig {
    pub fn policy(&self, seed: u64) -> AugmentPolicy {
        AugmentPolicy {
            word_delete_prob: self.word_delete_prob,
            word_swap_prob: self.word_swap_prob,
            span_mask_prob: self.span_mask_prob,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Name used in sweep tables.
    pub dataset: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau: f64,
    pub lr: f64,
    /// Multiplier on `lr` for the projection and the cluster centres.
    pub lr_scale: f64,
    /// Student-t degrees of freedom.
    pub alpha: f64,
    pub head: HeadKind,
    pub clusters: usize,
    pub som: SomConfig,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub provider: ProviderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dataset: "data".into(),
            epochs: 10,
            batch_size: 200,
            tau: 0.5,
            lr: 1e-5,
            lr_scale: 100.0,
            alpha: 1.0,
            head: HeadKind::KMeans,
            clusters: 4,
            som: SomConfig::default(),
            kmeans_max_iter: 100,
            kmeans_restarts: 10,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            augment: AugmentConfig::default(),
            provider: ProviderConfig::Fixed {},
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be positive")))
    }
}

impl TrainConfig {
    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        validate_tau(self.tau)?;
        positive("lr", self.lr)?;
        positive("lr_scale", self.lr_scale)?;
        positive("alpha", self.alpha)?;
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size", "must be at least 2"));
        }
        if self.clusters < 2 {
            return Err(Error::invalid("clusters", "must be at least 2"));
        }
        if self.head.is_som() {
            self.som.spec(0).validate()?;
            let grid = self.som.rows * self.som.cols;
            if grid != self.clusters {
                return Err(Error::invalid(
                    "clusters",
                    format!("SOM heads need clusters = rows·cols = {grid}, got {}", self.clusters),
                ));
            }
        }
        if self.kmeans_max_iter == 0 {
            return Err(Error::invalid("kmeans_max_iter", "must be at least 1"));
        }
        self.augment.policy(0).validate()?;
        match &self.provider {
            ProviderConfig::Fixed {} => {}
            ProviderConfig::HashedBow { dim, .. } => {
                if *dim == 0 {
                    return Err(Error::invalid("provider.dim", "must be positive"));
                }
            }
            ProviderConfig::Encoder(cfg) => cfg.validate()?,
        }
        Ok(())
    }
}

/// Data handed to [`train`].
#[derive(Clone, Debug)]
pub enum TrainInput {
    Corpus(Corpus),
    Embeddings {
        set: EmbeddingSet,
        labels: Option<Vec<usize>>,
    },
}

impl TrainInput {
    pub fn len(&self) -> usize {
        match self {
            TrainInput::Corpus(c) => c.len(),
            TrainInput::Embeddings { set, .. } => set.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        match self {
            TrainInput::Corpus(c) => c.labels(),
            TrainInput::Embeddings { labels, .. } => labels.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub contrastive: f64,
    pub clustering: f64,
    pub total: f64,
    /// Metrics of the batch labels, when truth is available.
    pub batch_acc: Option<f64>,
    pub batch_nmi: Option<f64>,
}

impl EpochRecord {
    pub fn losses(&self) -> LossBreakdown {
        LossBreakdown {
            contrastive: self.contrastive,
            clustering: self.clustering,
            total: self.total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: TrainConfig,
    pub report: Option<EvalReport>,
    pub trace: Vec<EpochRecord>,
    /// Final cluster label of every input, in input order.
    pub labels: Vec<usize>,
    pub wall_time_secs: f64,
}

impl RunResult {
    /// UTF-8 JSON with keys in sorted order.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::to_value(self)?)?)
    }
}

// ---------------------------------------------------------------------------
// parameters and optimizers

/// `h = z W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn init(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (d_in + d_out) as f64).sqrt();
        Self {
            w: Matrix::from_fn(d_in, d_out, |_, _| rng.random_range(-a..a)),
            b: vec![0.0; d_out],
        }
    }

    pub fn forward(&self, z: &Matrix) -> Matrix {
        let mut h = z.matmul(&self.w);
        for i in 0..h.rows() {
            for (v, b) in h.row_mut(i).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        h
    }

    /// Returns `(∂W, ∂b, ∂z)` given `∂h`.
    pub fn backward(&self, z: &Matrix, dh: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
        let gw = z.t_matmul(dh);
        let mut gb = vec![0.0; self.b.len()];
        for row in dh.iter_rows() {
            for (g, v) in gb.iter_mut().zip(row) {
                *g += v;
            }
        }
        (gw, gb, dh.matmul_t(&self.w))
    }
}

/// Backward of row-wise `y = x / ‖x‖`: `∂x = (∂y − y (y·∂y)) / ‖x‖`.
pub fn unit_normalize_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    for i in 0..x.rows() {
        let n = norm(x.row(i));
        let y: Vec<f64> = x.row(i).iter().map(|v| v / n).collect();
        let inner = dot(&y, dy.row(i));
        for ((o, &yv), &g) in dx.row_mut(i).iter_mut().zip(&y).zip(dy.row(i)) {
            *o = (g - yv * inner) / n;
        }
    }
    dx
}

/// SGD or Adam over a fixed list of flat tensors.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Optimizer {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, lr: f64, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (pv, gv) in p.iter_mut().zip(g) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                }
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    for i in 0..p.len() {
                        m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                        v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// providers

enum Provider<'a> {
    Fixed(Matrix),
    Hashed {
        texts: Vec<&'a str>,
        dim: usize,
        seed: u64,
    },
    Encoder {
        texts: Vec<&'a str>,
        cfg: EncoderConfig,
        params: EncoderParams,
    },
}

struct Views {
    z1: Matrix,
    z2: Matrix,
    caches1: Vec<EncoderCache>,
    caches2: Vec<EncoderCache>,
}

impl<'a> Provider<'a> {
    fn new(config: &TrainConfig, input: &'a TrainInput, rng: &mut ChaCha8Rng) -> Result<Self> {
        match (&config.provider, input) {
            (ProviderConfig::Fixed {}, TrainInput::Embeddings { set, .. }) => Ok(Provider::Fixed(set.to_matrix())),
            (ProviderConfig::HashedBow { dim, seed }, TrainInput::Corpus(c)) => Ok(Provider::Hashed {
                texts: c.texts().collect(),
                dim: *dim,
                seed: *seed,
            }),
            (ProviderConfig::Encoder(cfg), TrainInput::Corpus(c)) => Ok(Provider::Encoder {
                texts: c.texts().collect(),
                cfg: cfg.clone(),
                params: EncoderParams::init(cfg, rng.random())?,
            }),
            (ProviderConfig::Fixed {}, TrainInput::Corpus(_)) => Err(Error::invalid(
                "provider",
                "fixed provider needs an embedding set, got a corpus",
            )),
            (_, TrainInput::Embeddings { .. }) => Err(Error::invalid(
                "provider",
                "text provider needs a corpus, got an embedding set",
            )),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Provider::Fixed(z) => z.cols(),
            Provider::Hashed { dim, .. } => *dim,
            Provider::Encoder { params, .. } => params.d_out(),
        }
    }

    fn text_rows(
        texts: impl Iterator<Item = Result<String>>,
        embed: impl Fn(&str) -> Result<(Vec<f64>, Option<EncoderCache>)>,
        d: usize,
    ) -> Result<(Matrix, Vec<EncoderCache>)> {
        let mut data = Vec::new();
        let mut caches = Vec::new();
        let mut rows = 0;
        for t in texts {
            let (v, c) = embed(&t?)?;
            data.extend(v);
            caches.extend(c);
            rows += 1;
        }
        Ok((Matrix::from_vec(rows, d, data)?, caches))
    }

    fn embed_one(&self, text: &str) -> Result<(Vec<f64>, Option<EncoderCache>)> {
        match self {
            Provider::Fixed(_) => unreachable!("fixed provider has no text"),
            Provider::Hashed { dim, seed, .. } => Ok((hashed_bow(text, *dim, *seed), None)),
            Provider::Encoder { cfg, params, .. } => {
                let (out, cache) = params.forward_cached(&token_matrix(text, cfg)?)?;
                Ok((out, Some(cache)))
            }
        }
    }

    fn anchors(&self, idx: &[usize]) -> Result<(Matrix, Vec<EncoderCache>)> {
        match self {
            Provider::Fixed(z) => Ok((z.select_rows(idx), Vec::new())),
            Provider::Hashed { texts, .. } | Provider::Encoder { texts, .. } => Self::text_rows(
                idx.iter().map(|&i| Ok(texts[i].to_string())),
                |t| self.embed_one(t),
                self.dim(),
            ),
        }
    }

    fn views(&self, idx: &[usize], epoch: usize, policy: &AugmentPolicy, anchors: &Matrix) -> Result<Views> {
        let texts = match self {
            Provider::Fixed(_) => {
                return Ok(Views {
                    z1: anchors.clone(),
                    z2: anchors.clone(),
                    caches1: Vec::new(),
                    caches2: Vec::new(),
                })
            }
            Provider::Hashed { texts, .. } | Provider::Encoder { texts, .. } => texts,
        };
        let n = texts.len() as u64;
        let pairs: Vec<(String, String)> = idx
            .iter()
            .map(|&i| augment_pair(texts[i], policy, epoch as u64 * n + i as u64))
            .collect::<Result<_>>()?;
        let d = self.dim();
        let (z1, caches1) = Self::text_rows(pairs.iter().map(|p| Ok(p.0.clone())), |t| self.embed_one(t), d)?;
        let (z2, caches2) = Self::text_rows(pairs.iter().map(|p| Ok(p.1.clone())), |t| self.embed_one(t), d)?;
        Ok(Views {
            z1,
            z2,
            caches1,
            caches2,
        })
    }
}

// ---------------------------------------------------------------------------
// heads

enum HeadState {
    KMeans(Option<Matrix>),
    Som(Option<SomGrid>),
    /// Fixed one-hot centres in the projected space.
    Basis(Matrix),
}

impl HeadState {
    fn new(config: &TrainConfig) -> Self {
        match config.head {
            HeadKind::KMeans | HeadKind::KMeansR => HeadState::KMeans(None),
            HeadKind::Som | HeadKind::SomR => HeadState::Som(None),
            HeadKind::LabelAsRep => HeadState::Basis(Matrix::identity(config.clusters)),
        }
    }

    /// Recomputes the centres on `h`, warm-starting from the previous fit.
    fn fit(&mut self, config: &TrainConfig, h: &Matrix, seed: u64) -> Result<Matrix> {
        match self {
            HeadState::KMeans(warm) => {
                let fit = kmeans_best_of(
                    h,
                    config.clusters,
                    config.kmeans_max_iter,
                    config.kmeans_restarts,
                    seed,
                    warm.as_ref(),
                )?;
                *warm = Some(fit.centroids.clone());
                Ok(fit.centroids)
            }
            HeadState::Som(grid) => {
                if grid.is_none() {
                    *grid = Some(SomGrid::init(config.som.spec(seed), h)?);
                }
                let g = grid.as_mut().expect("initialized above");
                g.train(h)?;
                reseed_duplicates(&mut g.weights, h)?;
                Ok(g.weights.clone())
            }
            HeadState::Basis(b) => Ok(b.clone()),
        }
    }

    fn is_fitted(&self) -> bool {
        match self {
            HeadState::KMeans(c) => c.is_some(),
            HeadState::Som(g) => g.is_some(),
            HeadState::Basis(_) => true,
        }
    }

    fn centres_mut(&mut self) -> Option<&mut Matrix> {
        match self {
            HeadState::KMeans(c) => c.as_mut(),
            HeadState::Som(g) => g.as_mut().map(|g| &mut g.weights),
            HeadState::Basis(_) => None,
        }
    }

    /// Keeps SOM neurons on the unit sphere after a gradient step.
    fn renormalize(&mut self) -> Result<()> {
        if let HeadState::Som(Some(g)) = self {
            g.weights = unit_normalize_rows(&g.weights)?;
        }
        Ok(())
    }

    /// Nearest-centre labels for the non-projected heads.
    fn nearest(&self, h: &Matrix) -> Result<Vec<usize>> {
        match self {
            HeadState::KMeans(Some(c)) => Ok(h
                .iter_rows()
                .map(|r| argmin(&c.iter_rows().map(|m| sq_dist(r, m)).collect::<Vec<_>>()))
                .collect()),
            HeadState::Som(Some(g)) => Ok(g.assign(h)?.labels),
            _ => Err(Error::invalid("head", "not fitted")),
        }
    }
}

/// Neurons that never win drift together under shared neighbour pulls until
/// they coincide. Each later copy moves to the (normalized) sample farthest
/// from its winner.
fn reseed_duplicates(weights: &mut Matrix, h: &Matrix) -> Result<()> {
    let units = unit_normalize_rows(h)?;
    let mut taken: Vec<usize> = Vec::new();
    for i in 1..weights.rows() {
        if (0..i).all(|j| weights.row(j) != weights.row(i)) {
            continue;
        }
        let far = (0..units.rows())
            .filter(|s| !taken.contains(s))
            .map(|s| (s, crate::cluster::winner(weights, units.row(s)).1))
            .fold(None::<(usize, f64)>, |best, (s, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((s, d)),
            });
        if let Some((s, _)) = far {
            taken.push(s);
            weights.row_mut(i).copy_from_slice(units.row(s));
        }
    }
    Ok(())
}

struct Model<'a> {
    config: &'a TrainConfig,
    provider: Provider<'a>,
    projection: Option<Linear>,
    head: HeadState,
}

struct Spaces {
    z: Matrix,
    pre: Matrix,
    h: Matrix,
}

impl Model<'_> {
    fn spaces(&self, z: Matrix) -> Result<Spaces> {
        let pre = match &self.projection {
            Some(p) => p.forward(&z),
            None => z.clone(),
        };
        let h = if self.config.head.is_som() {
            unit_normalize_rows(&pre)?
        } else {
            pre.clone()
        };
        Ok(Spaces { z, pre, h })
    }

    fn labels(&self, s: &Spaces) -> Result<Vec<usize>> {
        if self.config.head.is_projected() {
            Ok(label_as_representation(&s.pre).labels)
        } else {
            self.head.nearest(&s.h)
        }
    }
}

fn sample_batch(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

fn diverged(epoch: usize, what: impl Into<String>) -> Error {
    Error::Diverged {
        epoch,
        what: what.into(),
    }
}

/// Runs `config.epochs` epochs of joint training and evaluates the final
/// labels on the whole input.
pub fn train(config: &TrainConfig, input: &TrainInput) -> Result<RunResult> {
    let start = Instant::now();
    config.validate()?;
    let n = input.len();
    if config.batch_size > n {
        return Err(Error::invalid(
            "batch_size",
            format!("{} exceeds the {n} available inputs", config.batch_size),
        ));
    }
    let truth = input.labels();
    if let TrainInput::Corpus(c) = input {
        c.validate()?;
    }
    if let (TrainInput::Embeddings { set, .. }, Some(t)) = (input, &truth) {
        if t.len() != set.n() {
            return Err(Error::CountMismatch {
                titles: set.n(),
                labels: t.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let provider = Provider::new(config, input, &mut rng)?;
    let projection = config
        .head
        .is_projected()
        .then(|| Linear::init(provider.dim(), config.clusters, &mut rng));
    let policy = config.augment.policy(rng.random());
    let mut model = Model {
        config,
        provider,
        projection,
        head: HeadState::new(config),
    };
    let mut opt_encoder = Optimizer::new(config.optimizer);
    let mut opt_projection = Optimizer::new(config.optimizer);
    let mut opt_centres = Optimizer::new(config.optimizer);
    let head_lr = config.lr * config.lr_scale;
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let idx = sample_batch(&mut rng, n, config.batch_size);
        let head_seed: u64 = rng.random();
        let (z, anchor_caches) = model.provider.anchors(&idx)?;
        if !z.is_finite() {
            return Err(diverged(epoch, "embeddings"));
        }
        let views = model.provider.views(&idx, epoch, &policy, &z)?;
        let co = contrastive_loss(&views.z1, &views.z2, config.tau)?;

        let s = model.spaces(z)?;
        let centres = model.head.fit(config, &s.h, head_seed)?;
        let q = soft_assign(&s.h, &centres, config.alpha)?;
        let target = target_distribution(&q)?;
        let kl = kl_cluster_loss(&target, &q, &s.h, &centres)?;
        let losses = total_loss(co.loss, kl.loss);
        if !losses.total.is_finite() {
            return Err(diverged(epoch, "total loss"));
        }

        let (batch_acc, batch_nmi) = match &truth {
            Some(t) => {
                let batch_truth: Vec<usize> = idx.iter().map(|&i| t[i]).collect();
                let r = evaluate(&model.labels(&s)?, &batch_truth)?;
                (Some(r.acc), Some(r.nmi))
            }
            None => (None, None),
        };
        trace.push(EpochRecord {
            epoch,
            contrastive: losses.contrastive,
            clustering: losses.clustering,
            total: losses.total,
            batch_acc,
            batch_nmi,
        });

        // backward: h -> pre -> z -> encoder
        let d_pre = if config.head.is_som() {
            unit_normalize_backward(&s.pre, &kl.grad_embeddings)
        } else {
            kl.grad_embeddings
        };
        let d_z = match &mut model.projection {
            Some(p) => {
                let (gw, gb, dz) = p.backward(&s.z, &d_pre);
                opt_projection.step(
                    head_lr,
                    vec![p.w.as_mut_slice(), &mut p.b],
                    vec![gw.as_slice(), &gb],
                );
                dz
            }
            None => d_pre,
        };
        if let Provider::Encoder { params, .. } = &mut model.provider {
            let mut grads = params.zeros_like();
            for (i, c) in anchor_caches.iter().enumerate() {
                params.backward(c, d_z.row(i), &mut grads);
            }
            for (i, c) in views.caches1.iter().enumerate() {
                params.backward(c, co.grad_z1.row(i), &mut grads);
            }
            for (i, c) in views.caches2.iter().enumerate() {
                params.backward(c, co.grad_z2.row(i), &mut grads);
            }
            if !grads.is_finite() {
                return Err(diverged(epoch, "encoder gradient"));
            }
            opt_encoder.step(config.lr, params.tensors_mut(), grads.tensors());
            if !params.is_finite() {
                return Err(diverged(epoch, "encoder parameters"));
            }
        }
        if let Some(c) = model.head.centres_mut() {
            opt_centres.step(head_lr, vec![c.as_mut_slice()], vec![kl.grad_centroids.as_slice()]);
            if !c.is_finite() {
                return Err(diverged(epoch, "cluster centres"));
            }
        }
        model.head.renormalize()?;
    }

    let all: Vec<usize> = (0..n).collect();
    let (z_all, _) = model.provider.anchors(&all)?;
    let s = model.spaces(z_all)?;
    if !config.head.is_projected() && !model.head.is_fitted() {
        let seed = rng.random();
        model.head.fit(config, &s.h, seed)?;
    }
    let labels = model.labels(&s)?;
    let report = truth.as_deref().map(|t| evaluate(&labels, t)).transpose()?;
    Ok(RunResult {
        config: config.clone(),
        report,
        trace,
        labels,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lr,
    LrScale,
    Tau,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lr => "lr",
            SweepAxis::LrScale => "lr_scale",
            SweepAxis::Tau => "tau",
        }
    }

    /// Standard grids for each axis.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepAxis::Lr => vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3],
            SweepAxis::LrScale => vec![50.0, 100.0, 150.0, 200.0, 250.0, 500.0],
            SweepAxis::Tau => vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        }
    }

    pub fn validate(self, v: f64) -> Result<()> {
        match self {
            SweepAxis::Tau => validate_tau(v),
            SweepAxis::Lr | SweepAxis::LrScale => positive(self.name(), v),
        }
    }

    pub fn apply(self, base: &TrainConfig, v: f64) -> TrainConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::Lr => c.lr = v,
            SweepAxis::LrScale => c.lr_scale = v,
            SweepAxis::Tau => c.tau = v,
        }
        c
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lr" => Ok(SweepAxis::Lr),
            "lr_scale" => Ok(SweepAxis::LrScale),
            "tau" => Ok(SweepAxis::Tau),
            _ => Err(Error::invalid("axis", format!("unknown axis {s:?}; expected lr, lr_scale or tau"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "NMI")]
    Nmi,
    #[serde(rename = "ACC")]
    Acc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Nmi => "NMI",
            Metric::Acc => "ACC",
        }
    }

    fn of(self, r: &EvalReport) -> f64 {
        match self {
            Metric::Nmi => r.nmi,
            Metric::Acc => r.acc,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub head: HeadKind,
    pub metric: Metric,
    pub values: Vec<f64>,
    /// Flags the best cell for this metric across the whole table.
    pub best: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub dataset: String,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub value: f64,
    pub head: HeadKind,
    pub result: RunResult,
}

/// One run per `(value, head)`, all from `base.seed`. Rows are NMI then ACC,
/// heads in the given order.
pub fn sweep(
    base: &TrainConfig,
    input: &TrainInput,
    axis: SweepAxis,
    values: &[f64],
    heads: &[HeadKind],
    jobs: usize,
) -> Result<(SweepTable, Vec<SweepCell>)> {
    if values.is_empty() {
        return Err(Error::invalid("values", "need at least one axis value"));
    }
    if heads.is_empty() {
        return Err(Error::invalid("heads", "need at least one head"));
    }
    for &v in values {
        axis.validate(v)?;
    }
    if input.labels().is_none() {
        return Err(Error::invalid("input", "a sweep needs ground-truth labels"));
    }
    let configs: Vec<(f64, HeadKind, TrainConfig)> = values
        .iter()
        .flat_map(|&v| {
            heads.iter().map(move |&h| {
                let mut c = axis.apply(base, v);
                c.head = h;
                (v, h, c)
            })
        })
        .collect();
    for (_, _, c) in &configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        configs
            .par_iter()
            .map(|(v, h, c)| {
                train(c, input).map(|result| SweepCell {
                    value: *v,
                    head: *h,
                    result,
                })
            })
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::new();
    for metric in [Metric::Nmi, Metric::Acc] {
        for (hi, &head) in heads.iter().enumerate() {
            let vals: Vec<f64> = (0..values.len())
                .map(|vi| {
                    let r = cells[vi * heads.len() + hi].result.report.as_ref().expect("labels checked");
                    metric.of(r)
                })
                .collect();
            rows.push(SweepRow {
                head,
                metric,
                best: vec![false; vals.len()],
                values: vals,
            });
        }
    }
    for metric in [Metric::Nmi, Metric::Acc] {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ri, row) in rows.iter().enumerate().filter(|(_, r)| r.metric == metric) {
            for (ci, &v) in row.values.iter().enumerate() {
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((ri, ci, v));
                }
            }
        }
        if let Some((ri, ci, _)) = best {
            rows[ri].best[ci] = true;
        }
    }
    Ok((
        SweepTable {
            dataset: base.dataset.clone(),
            values: values.to_vec(),
            rows,
        },
        cells,
    ))
}

impl SweepTable {
    /// `dataset,head,metric,<axis values…>`; the best cell per metric carries a
    /// trailing `*`. Floats use the shortest exact representation.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["dataset".to_string(), "head".into(), "metric".into()];
        header.extend(self.values.iter().map(|v| v.to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                self.dataset.clone(),
                row.head.display_name().to_string(),
                row.metric.name().to_string(),
            ];
            rec.extend(
                row.values
                    .iter()
                    .zip(&row.best)
                    .map(|(v, &b)| if b { format!("{v}*") } else { v.to_string() }),
            );
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: "<sweep csv>".into(),
            line,
            message,
        };
        let num = |line: usize, s: &str| {
            s.parse::<f64>()
                .map_err(|e| bad(line, format!("bad number {s:?}: {e}")))
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records.next().ok_or_else(|| bad(1, "empty table".into()))??;
        if header.len() < 4 || &header[0] != "dataset" || &header[1] != "head" || &header[2] != "metric" {
            return Err(bad(1, "header must be dataset,head,metric,<values>".into()));
        }
        let values = header
            .iter()
            .skip(3)
            .map(|s| num(1, s))
            .collect::<Result<Vec<_>>>()?;
        let mut dataset = None;
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != values.len() + 3 {
                return Err(bad(line, format!("expected {} fields, got {}", values.len() + 3, rec.len())));
            }
            dataset.get_or_insert_with(|| rec[0].to_string());
            let head: HeadKind = rec[1].parse().map_err(|e: Error| bad(line, e.to_string()))?;
            let metric = match &rec[2] {
                "NMI" => Metric::Nmi,
                "ACC" => Metric::Acc,
                m => return Err(bad(line, format!("unknown metric {m:?}"))),
            };
            let mut vals = Vec::new();
            let mut best = Vec::new();
            for cell in rec.iter().skip(3) {
                let (s, b) = match cell.strip_suffix('*') {
                    Some(s) => (s, true),
                    None => (cell, false),
                };
                vals.push(num(line, s)?);
                best.push(b);
            }
            rows.push(SweepRow {
                head,
                metric,
                values: vals,
                best,
            });
        }
        Ok(Self {
            dataset: dataset.unwrap_or_default(),
            values,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::synthetic::{gaussian_blobs, BlobSpec};

    fn blobs(seed: u64) -> TrainInput {
        let (set, labels) = gaussian_blobs(&BlobSpec {
            seed,
            ..BlobSpec::default()
        })
        .unwrap();
        TrainInput::Embeddings {
            set,
            labels: Some(labels),
        }
    }

    fn small(head: HeadKind) -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 64,
            head,
            ..TrainConfig::default()
        }
    }

    fn tiny_corpus() -> TrainInput {
        let words = ["apple pie recipe", "stock market falls", "team wins final", "new phone launch"];
        let mut c = Corpus::new("test", Some(4));
        for i in 0..24 {
            let text = format!("{} {}", words[i % 4], ["today", "again", "now"][i % 3]);
            c.documents.push(Document::new(i as u64, text).with_label(i % 4));
        }
        TrainInput::Corpus(c)
    }

    #[test]
    fn trace_totals_and_length() {
        for head in [HeadKind::KMeans, HeadKind::Som, HeadKind::KMeansR, HeadKind::SomR, HeadKind::LabelAsRep] {
            let r = train(&small(head), &blobs(1)).unwrap_or_else(|e| panic!("{head}: {e}"));
            assert_eq!(r.trace.len(), 3, "{head}");
            for e in &r.trace {
                assert_eq!(e.total, e.contrastive + e.clustering);
                assert!(e.clustering >= 0.0);
            }
            assert_eq!(r.labels.len(), 200);
        }
    }

    #[test]
    fn zero_epochs_is_untrained_pipeline() {
        let mut cfg = small(HeadKind::KMeans);
        cfg.epochs = 0;
        let r = train(&cfg, &blobs(2)).unwrap();
        assert!(r.trace.is_empty());
        // the untrained pipeline: seed stream -> one best-of K-means on all points
        let TrainInput::Embeddings { set, labels } = blobs(2) else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let _policy_seed: u64 = rng.random();
        let fit = kmeans_best_of(&set.to_matrix(), 4, cfg.kmeans_max_iter, cfg.kmeans_restarts, rng.random(), None).unwrap();
        assert_eq!(r.labels, fit.assignment.labels);
        assert_eq!(r.report.unwrap(), evaluate(&fit.assignment.labels, &labels.unwrap()).unwrap());
    }

    #[test]
    fn runs_are_deterministic() {
        for head in [HeadKind::Som, HeadKind::KMeansR] {
            let a = train(&small(head), &blobs(3)).unwrap();
            let b = train(&small(head), &blobs(3)).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.labels, b.labels);
            assert_eq!(a.report, b.report);
        }
        let mut cfg = small(HeadKind::KMeans);
        cfg.provider = ProviderConfig::Encoder(EncoderConfig::default());
        cfg.batch_size = 8;
        cfg.optimizer = OptimizerKind::Adam;
        let a = train(&cfg, &tiny_corpus()).unwrap();
        let b = train(&cfg, &tiny_corpus()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn fixed_provider_contrastive_is_constant_without_augmentation() {
        let mut cfg = small(HeadKind::KMeans);
        cfg.batch_size = 200;
        cfg.augment = AugmentConfig {
            word_delete_prob: 0.0,
            word_swap_prob: 0.0,
            span_mask_prob: 0.0,
        };
        let r = train(&cfg, &blobs(4)).unwrap();
        let first = r.trace[0].contrastive;
        assert!(r.trace.iter().all(|e| e.contrastive == first));
    }

    #[test]
    fn text_providers_train() {
        let mut cfg = small(HeadKind::KMeans);
        cfg.batch_size = 12;
        cfg.provider = ProviderConfig::HashedBow { dim: 32, seed: 1 };
        let r = train(&cfg, &tiny_corpus()).unwrap();
        assert!(r.report.is_some());
        cfg.provider = ProviderConfig::Encoder(EncoderConfig::default());
        cfg.head = HeadKind::SomR;
        cfg.optimizer = OptimizerKind::Adam;
        let r = train(&cfg, &tiny_corpus()).unwrap();
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn config_errors() {
        let input = blobs(0);
        let mut cfg = small(HeadKind::Som);
        cfg.clusters = 3;
        assert!(train(&cfg, &input).is_err());
        let mut cfg = small(HeadKind::KMeans);
        cfg.tau = 0.0;
        assert!(train(&cfg, &input).is_err());
        cfg.tau = 1.5;
        assert!(train(&cfg, &input).is_err());
        let mut cfg = small(HeadKind::KMeans);
        cfg.batch_size = 201;
        assert!(train(&cfg, &input).is_err());
        let mut cfg = small(HeadKind::KMeans);
        cfg.provider = ProviderConfig::HashedBow { dim: 8, seed: 0 };
        assert!(train(&cfg, &input).is_err());
        let cfg = small(HeadKind::KMeans);
        assert!(train(&cfg, &tiny_corpus()).is_err());
    }

    #[test]
    fn divergence_names_the_epoch() {
        let mut cfg = small(HeadKind::KMeans);
        cfg.lr = 1e300;
        cfg.lr_scale = 1e300;
        let err = train(&cfg, &blobs(5)).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0, .. }), "{err}");
    }

    #[test]
    fn config_round_trips() {
        let mut cfg = small(HeadKind::SomR);
        cfg.provider = ProviderConfig::Encoder(EncoderConfig::default());
        cfg.optimizer = OptimizerKind::Adam;
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), cfg);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), cfg);
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<TrainConfig>("[provider]\nkind = \"hashed-bow\"\ndim = 4\nseed = 0\nextra = 1").is_err());
    }

    #[test]
    fn head_names_parse() {
        for h in [HeadKind::Som, HeadKind::SomR, HeadKind::KMeans, HeadKind::KMeansR, HeadKind::LabelAsRep] {
            assert_eq!(h.name().parse::<HeadKind>().unwrap(), h);
            assert_eq!(h.display_name().parse::<HeadKind>().unwrap(), h);
        }
        assert!("dbscan".parse::<HeadKind>().is_err());
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn linear_and_normalize_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let lin = Linear::init(4, 3, &mut rng);
        let g = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        // scalar objective L = Σ g ⊙ normalize(zW + b)
        let obj = |lin: &Linear, z: &Matrix| {
            let h = unit_normalize_rows(&lin.forward(z)).unwrap();
            h.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let pre = lin.forward(&z);
        let d_pre = unit_normalize_backward(&pre, &g);
        let (gw, gb, dz) = lin.backward(&z, &d_pre);
        for i in 0..gw.as_slice().len() {
            let num = fd(
                |x| {
                    let mut l = lin.clone();
                    l.w.as_mut_slice()[i] = x;
                    obj(&l, &z)
                },
                lin.w.as_slice()[i],
            );
            assert!(rel(gw.as_slice()[i], num) < 1e-6);
        }
        for i in 0..gb.len() {
            let num = fd(
                |x| {
                    let mut l = lin.clone();
                    l.b[i] = x;
                    obj(&l, &z)
                },
                lin.b[i],
            );
            assert!(rel(gb[i], num) < 1e-6);
        }
        for i in 0..z.as_slice().len() {
            let num = fd(
                |x| {
                    let mut zz = z.clone();
                    zz.as_mut_slice()[i] = x;
                    obj(&lin, &zz)
                },
                z.as_slice()[i],
            );
            assert!(rel(dz.as_slice()[i], num) < 1e-6);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // bias-corrected first step is lr·g/(|g|+ε) ≈ lr·sign(g)
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.3, -4.0, 1e-3];
        let mut opt = Optimizer::new(OptimizerKind::Adam);
        opt.step(0.01, vec![&mut p], vec![&g]);
        let want = [1.0 - 0.01 * 0.3 / (0.3 + 1e-8), -2.0 + 0.01 * 4.0 / (4.0 + 1e-8), 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut q = vec![1.0];
        Optimizer::new(OptimizerKind::Sgd).step(0.5, vec![&mut q], vec![&[2.0]]);
        assert_eq!(q, vec![0.0]);
    }

    #[test]
    fn single_value_sweep_equals_train() {
        let base = small(HeadKind::KMeans);
        let input = blobs(6);
        let (table, cells) = sweep(&base, &input, SweepAxis::Tau, &[0.7], &[HeadKind::KMeans], 1).unwrap();
        assert_eq!(table.values, vec![0.7]);
        assert_eq!(table.rows.len(), 2);
        let mut cfg = base.clone();
        cfg.tau = 0.7;
        let lone = train(&cfg, &input).unwrap();
        assert_eq!(cells[0].result.trace, lone.trace);
        assert_eq!(cells[0].result.report, lone.report);
        assert_eq!(table.rows[0].values[0], lone.report.as_ref().unwrap().nmi);
        assert_eq!(table.rows[1].values[0], lone.report.unwrap().acc);
    }

    #[test]
    fn sweep_rejects_bad_values_before_running() {
        let base = small(HeadKind::KMeans);
        let err = sweep(&base, &blobs(0), SweepAxis::Tau, &[0.5, 1.2], &HeadKind::TABLE, 1).unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
        assert!(sweep(&base, &blobs(0), SweepAxis::Lr, &[-1.0], &HeadKind::TABLE, 1).is_err());
        assert!(sweep(&base, &blobs(0), SweepAxis::Lr, &[], &HeadKind::TABLE, 1).is_err());
    }

    #[test]
    fn sweep_csv_round_trip_and_parallel_agreement() {
        let mut base = small(HeadKind::KMeans);
        base.epochs = 2;
        base.dataset = "blobs, small".into();
        let input = blobs(7);
        let values = [1e-7, 1e-3];
        let (t1, _) = sweep(&base, &input, SweepAxis::Lr, &values, &HeadKind::TABLE, 1).unwrap();
        let (t4, _) = sweep(&base, &input, SweepAxis::Lr, &values, &HeadKind::TABLE, 4).unwrap();
        assert_eq!(t1, t4);
        assert_eq!(t1.rows.len(), 8);
        let csv = t1.to_csv().unwrap();
        assert!(csv.starts_with("dataset,head,metric,0.0000001,0.001\n"), "{csv}");
        assert_eq!(csv.matches('*').count(), 2);
        assert_eq!(SweepTable::from_csv(&csv).unwrap(), t1);
    }

    #[test]
    fn csv_parse_errors() {
        assert!(SweepTable::from_csv("").is_err());
        assert!(SweepTable::from_csv("a,b,c,1\n").is_err());
        assert!(SweepTable::from_csv("dataset,head,metric,1\nx,SOM,NMI,zz\n").is_err());
        assert!(SweepTable::from_csv("dataset,head,metric,1\nx,SOM,F1,0.5\n").is_err());
    }
}
