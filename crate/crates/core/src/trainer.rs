//! The training loop: per-position translation selection against the current
//! context, joint centre-word + translation negative-sampling updates, the
//! optional squared-distance penalty binding U to V, and data-parallel
//! execution over corpus shards with unsynchronized row updates.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    keep_probability, Lang, NoiseDistribution, Sentence, SentenceStream, Vocabulary, WordId,
};
use crate::dictionary::BilingualDictionary;
use crate::derive_seed;
use crate::model::{
    context_vector, context_vector_into, cosine_vs_row, save_embeddings, EmbeddingIoError,
    EmbeddingMatrices,
};

/// How the translation of a centre word is chosen during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Single-language CBOW; the translation term is off.
    Mono,
    /// Uniform random pick among the dictionary candidates.
    RandomSelection,
    /// Argmax of cos(v_w + h, v_candidate) over the candidates.
    EmSelection,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Mono => write!(f, "mono"),
            Mode::RandomSelection => write!(f, "random-selection"),
            Mode::EmSelection => write!(f, "em-selection"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mono" => Ok(Mode::Mono),
            "random-selection" => Ok(Mode::RandomSelection),
            "em-selection" => Ok(Mode::EmSelection),
            other => Err(format!(
                "unknown mode {other:?} (expected mono, random-selection or em-selection)"
            )),
        }
    }
}

/// Which output embedding a run emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineScheme {
    U,
    V,
    Interpolate,
    Concat,
    /// Spaces fused during training by δ; U is emitted.
    Regularize,
}

impl fmt::Display for CombineScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombineScheme::U => write!(f, "u"),
            CombineScheme::V => write!(f, "v"),
            CombineScheme::Interpolate => write!(f, "interpolate"),
            CombineScheme::Concat => write!(f, "concat"),
            CombineScheme::Regularize => write!(f, "regularize"),
        }
    }
}

impl FromStr for CombineScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "u" => Ok(CombineScheme::U),
            "v" => Ok(CombineScheme::V),
            "interpolate" => Ok(CombineScheme::Interpolate),
            "concat" => Ok(CombineScheme::Concat),
            "regularize" => Ok(CombineScheme::Regularize),
            other => Err(format!(
                "unknown combine scheme {other:?} (expected u, v, interpolate, concat or regularize)"
            )),
        }
    }
}

/// Every scalar hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Embedding dimension d.
    pub dim: usize,
    /// Full window size cs; up to cs/2 context tokens are taken per side.
    pub window: usize,
    /// Number of negative samples p per position.
    pub negatives: usize,
    /// Initial learning rate η.
    pub learning_rate: f64,
    /// Subsampling threshold t.
    pub subsample: f64,
    pub epochs: usize,
    /// Weight of the centre-word term against the translation term.
    pub alpha: f64,
    /// Regularization sensitivity δ; 0 disables the penalty.
    pub delta: f64,
    /// Interpolation weight γ used by the interpolate combination.
    pub gamma: f64,
    pub mode: Mode,
    /// When false, only the translation is predicted (α treated as 0).
    pub joint: bool,
    pub combine: CombineScheme,
    pub seed: u64,
    pub workers: usize,
    /// Shuffle sentence order each epoch. Off by default so runs are
    /// reproducible and the two corpora are processed in file order.
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            dim: 200,
            window: 48,
            negatives: 25,
            learning_rate: 0.025,
            subsample: 1e-4,
            epochs: 15,
            alpha: 0.5,
            delta: 0.01,
            gamma: 0.5,
            mode: Mode::EmSelection,
            joint: true,
            combine: CombineScheme::Regularize,
            seed: 1,
            workers: 1,
            shuffle: false,
        }
    }
}

impl TrainingConfig {
    /// Maximum context tokens per side; the per-position window is drawn
    /// uniformly from `1..=half_window()`.
    pub fn half_window(&self) -> usize {
        self.window / 2
    }

    /// The α actually used by gradient steps: mono mode turns the
    /// translation term off (α = 1) and non-joint training predicts only
    /// the translation (α = 0).
    pub fn resolved_alpha(&self) -> f64 {
        match self.mode {
            Mode::Mono => 1.0,
            _ if !self.joint => 0.0,
            _ => self.alpha,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if self.dim < 1 {
            return fail(format!("dim must be >= 1, got {}", self.dim));
        }
        if self.window < 2 {
            return fail(format!("window must be >= 2, got {}", self.window));
        }
        if self.negatives < 1 {
            return fail(format!("negatives must be >= 1, got {}", self.negatives));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("lr must be > 0, got {}", self.learning_rate));
        }
        if !(self.subsample > 0.0) {
            return fail(format!("subsample must be > 0, got {}", self.subsample));
        }
        if self.epochs < 1 {
            return fail(format!("epochs must be >= 1, got {}", self.epochs));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0,1], got {}", self.alpha));
        }
        if !(self.delta >= 0.0) {
            return fail(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0,1], got {}", self.gamma));
        }
        if self.workers < 1 {
            return fail(format!("workers must be >= 1, got {}", self.workers));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mode {0} requires a bilingual dictionary")]
    MissingDictionary(Mode),
    #[error("no training tokens: both sentence streams are empty")]
    EmptyStream,
    #[error(
        "non-finite value {value} in {matrix}[{row}] after an update; the learning rate is likely too high"
    )]
    NonFinite {
        matrix: &'static str,
        row: WordId,
        value: f64,
    },
    #[error(transparent)]
    Checkpoint(#[from] EmbeddingIoError),
    #[error("checkpoint directory: {0}")]
    CheckpointDir(#[from] std::io::Error),
    #[cfg(feature = "parallel")]
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One training step: the centre word, its observed context, the selected
/// translation when one exists, and the drawn negatives.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub center: WordId,
    pub context: &'a [WordId],
    /// Absent exactly when `dict(center)` is empty or the mode is mono.
    pub translation: Option<WordId>,
    /// Must exclude `center` and `translation`.
    pub negatives: &'a [WordId],
    pub learning_rate: f64,
}

/// Sparse per-row gradient accumulator. Rows are looked up linearly; a step
/// touches only a handful.
#[derive(Debug, Default)]
pub struct RowGrads {
    ids: Vec<WordId>,
    data: Vec<f64>,
    dim: usize,
}

impl RowGrads {
    fn new(dim: usize) -> RowGrads {
        RowGrads {
            ids: Vec::new(),
            data: Vec::new(),
            dim,
        }
    }

    fn clear(&mut self) {
        self.ids.clear();
        self.data.clear();
    }

    fn row_mut(&mut self, id: WordId) -> &mut [f64] {
        let pos = match self.ids.iter().position(|&x| x == id) {
            Some(p) => p,
            None => {
                self.ids.push(id);
                self.data.resize(self.data.len() + self.dim, 0.0);
                self.ids.len() - 1
            }
        };
        &mut self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: WordId) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|&x| x == id)
            .map(|p| &self.data[p * self.dim..(p + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(p, &id)| (id, &self.data[p * self.dim..(p + 1) * self.dim]))
    }
}

/// Gradients of one step plus the scratch buffers the computation reuses;
/// allocate once per worker.
#[derive(Debug)]
pub struct StepGradients {
    pub(crate) h: Vec<f64>,
    grad_h: Vec<f64>,
    row: Vec<f64>,
    wr: Vec<WordId>,
    u: RowGrads,
    v: RowGrads,
}

impl StepGradients {
    pub fn new(dim: usize) -> StepGradients {
        StepGradients {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            row: vec![0.0; dim],
            wr: Vec::new(),
            u: RowGrads::new(dim),
            v: RowGrads::new(dim),
        }
    }

    pub fn u_rows(&self) -> &RowGrads {
        &self.u
    }

    pub fn v_rows(&self) -> &RowGrads {
        &self.v
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable log σ(x).
#[inline]
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Selects the translation of `center` from the dictionary candidates. In
/// EM mode this is the argmax over cos(v_center + h, v_candidate), ties
/// broken towards the lowest word id; in random mode a uniform pick.
pub fn select_translation<R: Rng + ?Sized>(
    m: &EmbeddingMatrices,
    center: WordId,
    context: &[WordId],
    dict: &BilingualDictionary,
    lang: Lang,
    mode: Mode,
    rng: &mut R,
) -> Option<WordId> {
    if mode == Mode::Mono {
        return None;
    }
    let candidates = dict.translations(center, lang);
    if candidates.is_empty() {
        return None;
    }
    match mode {
        Mode::RandomSelection => Some(candidates[rng.random_range(0..candidates.len())]),
        Mode::EmSelection => {
            let mut s = context_vector(&m.v, context).expect("context must be nonempty");
            for (sj, cell) in s.iter_mut().zip(m.v.row(center as usize)) {
                *sj += cell.get();
            }
            Some(argmax_candidate(m, &s, candidates))
        }
        Mode::Mono => unreachable!(),
    }
}

/// Argmax of cos(s, v_candidate). Candidates are visited in the given
/// (ascending id) order with a strict comparison, so ties — including the
/// all-zero-rows case where every score is -inf — resolve to the lowest id.
pub(crate) fn argmax_candidate(m: &EmbeddingMatrices, s: &[f64], candidates: &[WordId]) -> WordId {
    let mut best = candidates[0];
    let mut best_score = cosine_vs_row(s, m.v.row(best as usize));
    for &c in &candidates[1..] {
        let score = cosine_vs_row(s, m.v.row(c as usize));
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    best
}

/// Computes the gradients of the per-position objective
///
/// ```text
/// L = a·log σ(u_c·h) + (1−α)·log σ(u_t·h) + Σ_j log σ(−u_j·h)
///     − δ·Σ_{x ∈ Wr} ‖u_x − v_x‖²
/// ```
///
/// where `a = α` when a translation is present and `1` otherwise (the
/// translation term is then dropped), `h` is the mean of the context rows of
/// V, and `Wr` is the deduplicated set {centre, translation, negatives}. The
/// context gradient is split equally over the context rows. Returns the loss.
pub fn step_gradients(
    m: &EmbeddingMatrices,
    ctx: &StepContext<'_>,
    alpha: f64,
    delta: f64,
    out: &mut StepGradients,
) -> f64 {
    context_vector_into(&m.v, ctx.context, &mut out.h).expect("context must be nonempty");
    step_gradients_with_h(m, ctx, alpha, delta, out)
}

/// Same as [`step_gradients`] but assumes `out.h` already holds the context
/// vector (the hot loop builds it once for translation selection).
pub(crate) fn step_gradients_with_h(
    m: &EmbeddingMatrices,
    ctx: &StepContext<'_>,
    alpha: f64,
    delta: f64,
    out: &mut StepGradients,
) -> f64 {
    debug_assert!(!ctx.context.is_empty());
    debug_assert!(!ctx.negatives.contains(&ctx.center));
    debug_assert!(ctx
        .translation
        .map_or(true, |t| !ctx.negatives.contains(&t)));

    out.u.clear();
    out.v.clear();
    out.grad_h.fill(0.0);
    let mut loss = 0.0;

    let word_coeff = if ctx.translation.is_some() { alpha } else { 1.0 };
    let positives = [
        (Some(ctx.center), word_coeff),
        (ctx.translation, 1.0 - alpha),
    ];
    for (target, coeff) in positives {
        let Some(target) = target else { continue };
        if coeff == 0.0 {
            continue;
        }
        m.u.read_row_into(target as usize, &mut out.row);
        let z: f64 = out.row.iter().zip(&out.h).map(|(u, h)| u * h).sum();
        loss += coeff * ln_sigmoid(z);
        let g = coeff * (1.0 - sigmoid(z));
        for (gu, h) in out.u.row_mut(target).iter_mut().zip(&out.h) {
            *gu += g * h;
        }
        for (gh, u) in out.grad_h.iter_mut().zip(&out.row) {
            *gh += g * u;
        }
    }

    for &neg in ctx.negatives {
        m.u.read_row_into(neg as usize, &mut out.row);
        let z: f64 = out.row.iter().zip(&out.h).map(|(u, h)| u * h).sum();
        loss += ln_sigmoid(-z);
        let g = -sigmoid(z);
        for (gu, h) in out.u.row_mut(neg).iter_mut().zip(&out.h) {
            *gu += g * h;
        }
        for (gh, u) in out.grad_h.iter_mut().zip(&out.row) {
            *gh += g * u;
        }
    }

    let inv = 1.0 / ctx.context.len() as f64;
    for &c in ctx.context {
        for (gv, gh) in out.v.row_mut(c).iter_mut().zip(&out.grad_h) {
            *gv += gh * inv;
        }
    }

    if delta > 0.0 {
        out.wr.clear();
        out.wr.push(ctx.center);
        if let Some(t) = ctx.translation {
            out.wr.push(t);
        }
        out.wr.extend_from_slice(ctx.negatives);
        out.wr.sort_unstable();
        out.wr.dedup();
        let two_delta = 2.0 * delta;
        for i in 0..out.wr.len() {
            let x = out.wr[i];
            let xi = x as usize;
            let (urow, vrow) = (m.u.row(xi), m.v.row(xi));
            let mut sq = 0.0;
            for (slot, (u, v)) in out.row.iter_mut().zip(urow.iter().zip(vrow)) {
                let d = u.get() - v.get();
                *slot = d;
                sq += d * d;
            }
            loss -= delta * sq;
            for (gu, d) in out.u.row_mut(x).iter_mut().zip(&out.row) {
                *gu -= two_delta * d;
            }
            for (gv, d) in out.v.row_mut(x).iter_mut().zip(&out.row) {
                *gv += two_delta * d;
            }
        }
    }

    loss
}

/// Gradient-ascent update of the touched rows: `θ += η·∂L/∂θ`. A non-finite
/// result aborts with diagnostics.
pub fn apply_step(
    m: &EmbeddingMatrices,
    grads: &StepGradients,
    eta: f64,
) -> Result<(), TrainError> {
    debug_assert!(eta > 0.0);
    for (id, grad) in grads.u.iter() {
        let row = m.u.row(id as usize);
        for (cell, g) in row.iter().zip(grad) {
            let next = cell.get() + eta * g;
            if !next.is_finite() {
                return Err(TrainError::NonFinite {
                    matrix: "U",
                    row: id,
                    value: next,
                });
            }
            cell.set(next);
        }
    }
    for (id, grad) in grads.v.iter() {
        let row = m.v.row(id as usize);
        for (cell, g) in row.iter().zip(grad) {
            let next = cell.get() + eta * g;
            if !next.is_finite() {
                return Err(TrainError::NonFinite {
                    matrix: "V",
                    row: id,
                    value: next,
                });
            }
            cell.set(next);
        }
    }
    Ok(())
}

/// Linear decay from η to η·10⁻² over all scheduled tokens, with a floor of
/// η·10⁻⁴ guarding against zero-step tail tokens.
pub(crate) fn learning_rate_at(eta: f64, done: u64, total: u64) -> f64 {
    let progress = (done as f64 / total as f64).min(1.0);
    (eta * (1.0 - 0.99 * progress)).max(eta * 1e-4)
}

/// Run-wide options that are not hyperparameters.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    /// When set, V and U are written there after every epoch in the text
    /// embedding format.
    pub checkpoint_dir: Option<PathBuf>,
    /// Print a per-epoch progress line to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainStats {
    pub scheduled_tokens: u64,
    pub trained_positions: u64,
    pub wall_seconds: f64,
    pub tokens_per_sec: f64,
    pub mean_loss: f64,
}

#[derive(Debug)]
pub struct TrainRun {
    pub matrices: EmbeddingMatrices,
    pub stats: TrainStats,
}

#[derive(Default)]
struct WorkerStats {
    positions: u64,
    loss_sum: f64,
}

struct EpochShared<'a> {
    cfg: &'a TrainingConfig,
    m: &'a EmbeddingMatrices,
    sentences: &'a [Sentence<'a>],
    keep: &'a [f64],
    noise: &'a NoiseDistribution,
    dict: Option<&'a BilingualDictionary>,
    alpha: f64,
    total_scheduled: u64,
    progress: &'a AtomicU64,
    abort: &'a AtomicBool,
}

fn run_worker(
    shared: &EpochShared<'_>,
    shard: &[u32],
    epoch: usize,
    worker: usize,
) -> Result<WorkerStats, TrainError> {
    let cfg = shared.cfg;
    let dim = cfg.dim;
    let k = cfg.half_window();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        epoch as u64 + 1,
        worker as u64 + 1,
    ));
    let mut grads = StepGradients::new(dim);
    let mut s_vec = vec![0.0; dim];
    let mut kept: Vec<WordId> = Vec::new();
    let mut ctx_ids: Vec<WordId> = Vec::new();
    let mut negatives: Vec<WordId> = Vec::new();
    let mut stats = WorkerStats::default();

    for &si in shard {
        if shared.abort.load(Ordering::Relaxed) {
            return Ok(stats);
        }
        let sentence = shared.sentences[si as usize];
        let done = shared
            .progress
            .fetch_add(sentence.ids.len() as u64, Ordering::Relaxed);
        let lr = learning_rate_at(cfg.learning_rate, done, shared.total_scheduled);

        kept.clear();
        for &w in sentence.ids {
            let r: f64 = rng.random();
            if r < shared.keep[w as usize] {
                kept.push(w);
            }
        }

        for pos in 0..kept.len() {
            let center = kept[pos];
            let b = rng.random_range(1..=k);
            ctx_ids.clear();
            ctx_ids.extend_from_slice(&kept[pos.saturating_sub(b)..pos]);
            ctx_ids.extend_from_slice(&kept[pos + 1..(pos + b + 1).min(kept.len())]);
            if ctx_ids.is_empty() {
                continue;
            }

            context_vector_into(&shared.m.v, &ctx_ids, &mut grads.h)
                .expect("nonempty context");

            let translation = match cfg.mode {
                Mode::Mono => None,
                _ => shared.dict.and_then(|d| {
                    let candidates = d.translations(center, sentence.lang);
                    if candidates.is_empty() {
                        None
                    } else {
                        Some(match cfg.mode {
                            Mode::RandomSelection => {
                                candidates[rng.random_range(0..candidates.len())]
                            }
                            _ => {
                                for (sj, (hj, cell)) in s_vec
                                    .iter_mut()
                                    .zip(grads.h.iter().zip(shared.m.v.row(center as usize)))
                                {
                                    *sj = hj + cell.get();
                                }
                                argmax_candidate(shared.m, &s_vec, candidates)
                            }
                        })
                    }
                }),
            };

            let exclude = [center, translation.unwrap_or(center)];
            shared
                .noise
                .sample_negatives_into(cfg.negatives, &mut rng, &exclude, &mut negatives);

            let ctx = StepContext {
                center,
                context: &ctx_ids,
                translation,
                negatives: &negatives,
                learning_rate: lr,
            };
            let loss = step_gradients_with_h(shared.m, &ctx, shared.alpha, cfg.delta, &mut grads);
            if let Err(e) = apply_step(shared.m, &grads, lr) {
                shared.abort.store(true, Ordering::Relaxed);
                return Err(e);
            }
            stats.positions += 1;
            stats.loss_sum += loss;
        }
    }
    Ok(stats)
}

/// Trains for `cfg.epochs` epochs over the concatenated streams (corpus e
/// first, then corpus f, per epoch). Worker count 1 with a fixed seed gives
/// bit-identical matrices; more workers update rows without synchronization.
pub fn train(
    cfg: &TrainingConfig,
    vocab: &Vocabulary,
    streams: &[SentenceStream],
    dict: Option<&BilingualDictionary>,
    noise: &NoiseDistribution,
    session: &SessionOptions,
) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    if cfg.mode != Mode::Mono && dict.is_none() {
        return Err(TrainError::MissingDictionary(cfg.mode));
    }

    let sentences: Vec<Sentence<'_>> = streams.iter().flat_map(|s| s.sentences()).collect();
    let tokens_per_epoch: u64 = streams.iter().map(|s| s.token_count()).sum();
    if tokens_per_epoch == 0 {
        return Err(TrainError::EmptyStream);
    }
    let total_scheduled = cfg.epochs as u64 * tokens_per_epoch;

    let keep: Vec<f64> = (0..vocab.len())
        .map(|i| keep_probability(vocab.count(i as WordId), vocab.total_tokens(), cfg.subsample))
        .collect();

    let m = EmbeddingMatrices::init(vocab.len(), cfg.dim, cfg.seed);
    let progress = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let alpha = cfg.resolved_alpha();

    let worker_count = cfg.workers.min(sentences.len().max(1));
    let base_order: Vec<u32> = (0..sentences.len() as u32).collect();

    #[cfg(feature = "parallel")]
    let pool = if worker_count > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(worker_count)
                .build()
                .map_err(|e| TrainError::Pool(e.to_string()))?,
        )
    } else {
        None
    };

    let start = Instant::now();
    let mut total = WorkerStats::default();

    for epoch in 0..cfg.epochs {
        let order: Vec<u32> = if cfg.shuffle {
            let mut o = base_order.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64 + 1, 0));
            use rand::seq::SliceRandom;
            o.shuffle(&mut rng);
            o
        } else {
            base_order.clone()
        };
        let chunk = order.len().div_ceil(worker_count);
        let shards: Vec<&[u32]> = order.chunks(chunk.max(1)).collect();

        let shared = EpochShared {
            cfg,
            m: &m,
            sentences: &sentences,
            keep: &keep,
            noise,
            dict,
            alpha,
            total_scheduled,
            progress: &progress,
            abort: &abort,
        };

        let epoch_start = Instant::now();
        if shards.len() == 1 {
            let st = run_worker(&shared, shards[0], epoch, 0)?;
            total.positions += st.positions;
            total.loss_sum += st.loss_sum;
        } else {
            let results: Vec<Mutex<Option<Result<WorkerStats, TrainError>>>> =
                shards.iter().map(|_| Mutex::new(None)).collect();
            #[cfg(feature = "parallel")]
            {
                let pool = pool.as_ref().expect("pool built for multi-worker run");
                let shared_ref = &shared;
                pool.scope(|scope| {
                    for (w, shard) in shards.iter().enumerate() {
                        let slot = &results[w];
                        scope.spawn(move |_| {
                            *slot.lock().unwrap() =
                                Some(run_worker(shared_ref, shard, epoch, w));
                        });
                    }
                });
            }
            #[cfg(not(feature = "parallel"))]
            for (w, shard) in shards.iter().enumerate() {
                // Sequential fallback: shards run one after another with the
                // same per-shard RNG streams as the parallel build.
                *results[w].lock().unwrap() = Some(run_worker(&shared, shard, epoch, w));
            }
            for slot in results {
                let st = slot
                    .into_inner()
                    .unwrap()
                    .expect("worker result missing")?;
                total.positions += st.positions;
                total.loss_sum += st.loss_sum;
            }
        }

        if let Some(dir) = &session.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            save_embeddings(
                &m.v.to_dense(),
                vocab,
                &dir.join(format!("epoch{:02}.v.txt", epoch + 1)),
            )?;
            save_embeddings(
                &m.u.to_dense(),
                vocab,
                &dir.join(format!("epoch{:02}.u.txt", epoch + 1)),
            )?;
        }
        if session.verbose {
            let secs = epoch_start.elapsed().as_secs_f64().max(1e-9);
            eprintln!(
                "epoch {}/{}: {:.0} tokens/s, mean loss {:.4}",
                epoch + 1,
                cfg.epochs,
                tokens_per_epoch as f64 / secs,
                if total.positions > 0 {
                    total.loss_sum / total.positions as f64
                } else {
                    f64::NAN
                },
            );
        }
    }

    let wall = start.elapsed();
    let stats = TrainStats {
        scheduled_tokens: total_scheduled,
        trained_positions: total.positions,
        wall_seconds: wall.as_secs_f64(),
        tokens_per_sec: total_scheduled as f64 / wall.as_secs_f64().max(1e-9),
        mean_loss: if total.positions > 0 {
            total.loss_sum / total.positions as f64
        } else {
            f64::NAN
        },
    };
    Ok(TrainRun {
        matrices: m,
        stats,
    })
}
