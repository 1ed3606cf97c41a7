//! Skip-gram with negative sampling, trained by plain SGD.
//!
//! For each center position `t` of a piece, `num_skips` offsets are drawn
//! without replacement from the window `{-c/2, …, -1, +1, …, +c/2}`
//! (truncated at the piece boundaries), giving `(w_t, w_{t+i})` training
//! pairs. Each pair is scored against `negative_samples` noise tokens drawn
//! from the unigram distribution raised to the 0.75 power. The per-pair loss
//!
//! ```text
//! L = -ln σ(u_ctx · v_cen) - Σ_neg ln σ(-u_neg · v_cen)
//! ```
//!
//! is averaged over a batch and minimized by plain minibatch SGD with a
//! fixed learning rate. Only the rows a batch touches move.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vocab::{EncodedCorpus, TokenId, Vocabulary};
use crate::FormatError;

/// Noise distribution exponent applied to unigram counts.
pub const NOISE_EXPONENT: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("corpus has no piece with at least two tokens")]
    EmptyCorpus,
    #[error("token id {id} out of range for vocabulary of {size}")]
    TokenOutOfRange { id: TokenId, size: usize },
    #[error("non-finite loss at step {step} for pair ({center}, {context})")]
    NonFinite {
        step: u64,
        center: TokenId,
        context: TokenId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub dims: usize,
    /// Total window span `c`; offsets run over `c/2` positions on each side.
    pub window: usize,
    /// Offsets sampled per center (`k`).
    pub num_skips: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: u64,
    /// Batches per loss checkpoint.
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dims: 256,
            window: 4,
            num_skips: 2,
            negative_samples: 5,
            learning_rate: 0.1,
            batch_size: 128,
            steps: 1_000_000,
            checkpoint_every: 2_000,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.dims == 0 {
            return bad("dims must be positive");
        }
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return bad("window must be a positive even number");
        }
        if self.num_skips == 0 || self.num_skips > self.window {
            return bad("num_skips must be in 1..=window");
        }
        if !(1..=64).contains(&self.negative_samples) {
            return bad("negative_samples must be in 1..=64");
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive");
        }
        Ok(())
    }

    fn half_window(&self) -> usize {
        self.window / 2
    }
}

/// Input (center) and output (context) vectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub vocab_size: usize,
    pub dims: usize,
    pub input_vectors: Vec<f64>,
    pub output_vectors: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Input rows uniform in `[-0.5/dims, 0.5/dims]`, output rows zero.
    pub fn initialize<R: Rng>(vocab_size: usize, dims: usize, rng: &mut R) -> Self {
        let scale = 0.5 / dims as f64;
        let input_vectors = (0..vocab_size * dims)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        EmbeddingMatrix {
            vocab_size,
            dims,
            input_vectors,
            output_vectors: vec![0.0; vocab_size * dims],
        }
    }

    pub fn input_row(&self, id: TokenId) -> &[f64] {
        let d = self.dims;
        &self.input_vectors[id as usize * d..(id as usize + 1) * d]
    }

    pub fn output_row(&self, id: TokenId) -> &[f64] {
        let d = self.dims;
        &self.output_vectors[id as usize * d..(id as usize + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.input_vectors.iter().chain(&self.output_vectors).all(|x| x.is_finite())
    }
}

/// Average loss per checkpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub checkpoints: Vec<(u64, f64)>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,avg_loss\n");
        for (step, loss) in &self.checkpoints {
            let _ = writeln!(out, "{step},{loss}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<LossTrace, FormatError> {
        let mut lines = text.lines();
        if lines.next() != Some("step,avg_loss") {
            return Err(FormatError::new(1, "expected `step,avg_loss` header"));
        }
        let mut checkpoints = Vec::new();
        for (i, line) in lines.enumerate() {
            let err = || FormatError::new(i + 2, "expected `<step>,<avg_loss>`");
            let (step, loss) = line.split_once(',').ok_or_else(err)?;
            checkpoints.push((step.parse().map_err(|_| err())?, loss.parse().map_err(|_| err())?));
        }
        Ok(LossTrace { checkpoints })
    }
}

/// Position in the corpus plus pairs generated for a center but not yet
/// handed out in a batch.
#[derive(Clone, Debug, Default)]
pub struct BatchCursor {
    piece: usize,
    pos: usize,
    pending: VecDeque<(TokenId, TokenId)>,
}

impl BatchCursor {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Next `batch_size` `(center, context)` pairs.
///
/// Every consumed center contributes `min(num_skips, available offsets)`
/// pairs, all of which are emitted (possibly spilling into the next batch).
/// Pieces shorter than two tokens are skipped; the cursor wraps around the
/// corpus.
pub fn generate_batch<R: Rng>(
    corpus: &EncodedCorpus,
    config: &TrainingConfig,
    cursor: &mut BatchCursor,
    rng: &mut R,
) -> Result<Vec<(TokenId, TokenId)>, TrainError> {
    if !corpus.pieces.iter().any(|p| p.len() >= 2) {
        return Err(TrainError::EmptyCorpus);
    }
    let h = config.half_window() as isize;
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut offsets: Vec<isize> = Vec::with_capacity(config.window);
    while batch.len() < config.batch_size {
        if let Some(pair) = cursor.pending.pop_front() {
            batch.push(pair);
            continue;
        }
        while corpus.pieces.get(cursor.piece).is_none_or(|p| p.len() < 2 || cursor.pos >= p.len()) {
            cursor.piece = (cursor.piece + 1) % corpus.pieces.len();
            cursor.pos = 0;
        }
        let piece = &corpus.pieces[cursor.piece];
        let t = cursor.pos as isize;
        offsets.clear();
        offsets.extend((-h..=h).filter(|&i| i != 0 && t + i >= 0 && t + i < piece.len() as isize));
        let take = config.num_skips.min(offsets.len());
        for idx in rand::seq::index::sample(rng, offsets.len(), take) {
            let ctx = (t + offsets[idx]) as usize;
            cursor.pending.push_back((piece[cursor.pos], piece[ctx]));
        }
        cursor.pos += 1;
    }
    Ok(batch)
}

/// Draws noise tokens with probability proportional to `count^0.75`.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    weights: Vec<f64>,
    dist: Option<WeightedIndex<f64>>,
    total: f64,
}

impl NoiseSampler {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self::from_counts(vocab.counts())
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)).collect();
        let total = weights.iter().sum();
        let dist = WeightedIndex::new(&weights).ok();
        NoiseSampler { weights, dist, total }
    }

    /// Number of tokens in the noise table.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn probability(&self, id: TokenId) -> f64 {
        if self.total > 0.0 {
            self.weights[id as usize] / self.total
        } else {
            1.0 / self.weights.len() as f64
        }
    }

    /// One noise token, never equal to `exclude`.
    ///
    /// Falls back to a uniform draw over the other tokens when they carry no
    /// noise mass. Requires at least two tokens.
    pub fn sample<R: Rng>(&self, rng: &mut R, exclude: Option<TokenId>) -> TokenId {
        let n = self.weights.len();
        debug_assert!(n >= 2);
        let other_mass = self.total - exclude.map_or(0.0, |e| self.weights[e as usize]);
        match &self.dist {
            Some(dist) if other_mass > 0.0 => loop {
                let id = dist.sample(rng) as TokenId;
                if Some(id) != exclude {
                    return id;
                }
            },
            _ => loop {
                let id = rng.random_range(0..n) as TokenId;
                if Some(id) != exclude {
                    return id;
                }
            },
        }
    }
}

/// `-ln σ(x)`, computed without overflow.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one pair.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(context, center))
        + negatives.iter().map(|u| neg_log_sigmoid(-dot(u, center))).sum::<f64>()
}

/// Gradient buffers for one pair, reused across pairs.
#[derive(Clone, Debug)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

impl PairGradient {
    pub fn new(dims: usize, negatives: usize) -> Self {
        PairGradient {
            center: vec![0.0; dims],
            context: vec![0.0; dims],
            negatives: vec![vec![0.0; dims]; negatives],
        }
    }

    /// Fill the buffers with ∂L/∂(rows) at the given rows; returns `L`.
    pub fn compute(&mut self, center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
        let x = dot(context, center);
        let g = sigmoid(x) - 1.0;
        let mut loss = neg_log_sigmoid(x);
        for (gc, &u) in self.center.iter_mut().zip(context) {
            *gc = g * u;
        }
        for (gx, &v) in self.context.iter_mut().zip(center) {
            *gx = g * v;
        }
        for (gn, u) in self.negatives.iter_mut().zip(negatives) {
            let xn = dot(u, center);
            let s = sigmoid(xn);
            loss += neg_log_sigmoid(-xn);
            for ((gnd, &v), (&ud, gc)) in gn.iter_mut().zip(center).zip(u.iter().zip(self.center.iter_mut())) {
                *gnd = s * v;
                *gc += s * ud;
            }
        }
        loss
    }

    fn scale(&mut self, k: f64) {
        let rows = std::iter::once(&mut self.center)
            .chain(std::iter::once(&mut self.context))
            .chain(self.negatives.iter_mut());
        for row in rows {
            row.iter_mut().for_each(|x| *x *= k);
        }
    }
}

fn sub_scaled(row: &mut [f64], grad: &[f64], lr: f64) {
    for (r, g) in row.iter_mut().zip(grad) {
        *r -= lr * g;
    }
}

/// Sparse sum of row gradients over one batch.
#[derive(Clone, Debug)]
struct RowAccumulator {
    dims: usize,
    sums: Vec<f64>,
    touched: Vec<TokenId>,
    marked: Vec<bool>,
}

impl RowAccumulator {
    fn new(rows: usize, dims: usize) -> Self {
        RowAccumulator {
            dims,
            sums: vec![0.0; rows * dims],
            touched: Vec::new(),
            marked: vec![false; rows],
        }
    }

    fn add(&mut self, id: TokenId, grad: &[f64]) {
        let i = id as usize;
        if !self.marked[i] {
            self.marked[i] = true;
            self.touched.push(id);
        }
        for (s, g) in self.sums[i * self.dims..(i + 1) * self.dims].iter_mut().zip(grad) {
            *s += g;
        }
    }

    /// Hand each touched row and its summed gradient to `apply`, then reset.
    fn drain(&mut self, mut apply: impl FnMut(TokenId, &[f64])) {
        let d = self.dims;
        for &id in &self.touched {
            let i = id as usize;
            apply(id, &self.sums[i * d..(i + 1) * d]);
            self.sums[i * d..(i + 1) * d].fill(0.0);
            self.marked[i] = false;
        }
        self.touched.clear();
    }
}

/// Reusable per-step state: noise table, gradient buffers, drawn negatives.
pub struct SgdWorkspace {
    noise: NoiseSampler,
    grad: PairGradient,
    negatives: Vec<TokenId>,
    input_acc: RowAccumulator,
    output_acc: RowAccumulator,
}

impl SgdWorkspace {
    pub fn new(vocab: &Vocabulary, config: &TrainingConfig) -> Self {
        Self::with_noise(NoiseSampler::new(vocab), config)
    }

    pub fn with_noise(noise: NoiseSampler, config: &TrainingConfig) -> Self {
        let rows = noise.len();
        SgdWorkspace {
            noise,
            grad: PairGradient::new(config.dims, config.negative_samples),
            negatives: Vec::with_capacity(config.negative_samples),
            input_acc: RowAccumulator::new(rows, config.dims),
            output_acc: RowAccumulator::new(rows, config.dims),
        }
    }
}

/// One minibatch SGD step; returns the mean pair loss.
///
/// Every pair is scored at the rows as they stand before the step. The
/// gradient of the mean loss is then applied once: each touched row (center
/// input rows, context and negative output rows) moves by
/// `-learning_rate × gradient`. No other rows change.
pub fn sgd_step<R: Rng>(
    emb: &mut EmbeddingMatrix,
    batch: &[(TokenId, TokenId)],
    config: &TrainingConfig,
    ws: &mut SgdWorkspace,
    rng: &mut R,
    step: u64,
) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let d = emb.dims;
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &(center, context) in batch {
        for &id in &[center, context] {
            if id as usize >= emb.vocab_size {
                return Err(TrainError::TokenOutOfRange {
                    id,
                    size: emb.vocab_size,
                });
            }
        }
        ws.negatives.clear();
        for _ in 0..config.negative_samples {
            ws.negatives.push(ws.noise.sample(rng, Some(context)));
        }
        let out = &emb.output_vectors;
        let row = |id: TokenId| &out[id as usize * d..(id as usize + 1) * d];
        let negs: Vec<&[f64]> = ws.negatives.iter().map(|&n| row(n)).collect();
        let loss = ws.grad.compute(emb.input_row(center), row(context), &negs);
        if !loss.is_finite() {
            ws.input_acc.drain(|_, _| {});
            ws.output_acc.drain(|_, _| {});
            return Err(TrainError::NonFinite { step, center, context });
        }
        total += loss;
        ws.grad.scale(scale);
        ws.input_acc.add(center, &ws.grad.center);
        ws.output_acc.add(context, &ws.grad.context);
        for (&n, g) in ws.negatives.iter().zip(&ws.grad.negatives) {
            ws.output_acc.add(n, g);
        }
    }
    let lr = config.learning_rate;
    if lr == 0.0 {
        ws.input_acc.drain(|_, _| {});
        ws.output_acc.drain(|_, _| {});
    } else {
        let (inp, out) = (&mut emb.input_vectors, &mut emb.output_vectors);
        ws.input_acc
            .drain(|id, g| sub_scaled(&mut inp[id as usize * d..(id as usize + 1) * d], g, lr));
        ws.output_acc
            .drain(|id, g| sub_scaled(&mut out[id as usize * d..(id as usize + 1) * d], g, lr));
    }
    Ok(total * scale)
}

fn check_corpus(corpus: &EncodedCorpus, vocab: &Vocabulary) -> Result<(), TrainError> {
    let size = vocab.size();
    if size < 2 {
        return Err(TrainError::InvalidConfig("vocabulary needs at least two tokens".into()));
    }
    if let Some(&id) = corpus.pieces.iter().flatten().find(|&&id| id as usize >= size) {
        return Err(TrainError::TokenOutOfRange { id, size });
    }
    Ok(())
}

/// Train single-threaded; bit-for-bit reproducible for a given seed.
///
/// The average batch loss is recorded every `checkpoint_every` batches, plus
/// a final partial checkpoint when `steps` is not a multiple of it.
pub fn train(
    corpus: &EncodedCorpus,
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingMatrix, LossTrace), TrainError> {
    config.validate()?;
    check_corpus(corpus, vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut emb = EmbeddingMatrix::initialize(vocab.size(), config.dims, &mut rng);
    let mut trace = LossTrace::default();
    if config.steps == 0 {
        return Ok((emb, trace));
    }

    let mut ws = SgdWorkspace::new(vocab, config);
    let mut cursor = BatchCursor::new();
    let mut window_loss = 0.0;
    let mut window_len = 0u64;
    for step in 1..=config.steps {
        let batch = generate_batch(corpus, config, &mut cursor, &mut rng)?;
        window_loss += sgd_step(&mut emb, &batch, config, &mut ws, &mut rng, step)?;
        window_len += 1;
        if step % config.checkpoint_every == 0 || step == config.steps {
            if !emb.is_finite() {
                return Err(TrainError::NonFinite {
                    step,
                    center: batch[0].0,
                    context: batch[0].1,
                });
            }
            let avg = window_loss / window_len as f64;
            log::info!("step {step}: average loss {avg:.5}");
            trace.checkpoints.push((step, avg));
            window_loss = 0.0;
            window_len = 0;
        }
    }
    Ok((emb, trace))
}

/// Lock-free parallel training over disjoint piece shards.
///
/// Each thread owns its shard, cursor and RNG and performs racy relaxed
/// reads and writes on shared rows. Results are not reproducible; use
/// [`train`] when determinism matters.
pub fn train_hogwild(
    corpus: &EncodedCorpus,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    threads: usize,
) -> Result<(EmbeddingMatrix, LossTrace), TrainError> {
    config.validate()?;
    check_corpus(corpus, vocab)?;
    let threads = threads.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = EmbeddingMatrix::initialize(vocab.size(), config.dims, &mut rng);
    if config.steps == 0 {
        return Ok((init, LossTrace::default()));
    }
    let shards: Vec<EncodedCorpus> = (0..threads)
        .map(|t| {
            let pieces: Vec<Vec<TokenId>> = corpus.pieces.iter().skip(t).step_by(threads).cloned().collect();
            let total_tokens = pieces.iter().map(Vec::len).sum();
            EncodedCorpus { pieces, total_tokens }
        })
        .filter(|s| s.pieces.iter().any(|p| p.len() >= 2))
        .collect();
    if shards.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    let to_atomic = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect::<Vec<_>>();
    let input = to_atomic(&init.input_vectors);
    let output = to_atomic(&init.output_vectors);
    let noise = NoiseSampler::new(vocab);
    let per_thread = config.steps.div_ceil(shards.len() as u64);

    let results: Vec<Result<Vec<f64>, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shards
            .iter()
            .enumerate()
            .map(|(t, shard)| {
                let (input, output, noise) = (&input, &output, &noise);
                scope.spawn(move || hogwild_worker(shard, config, noise, input, output, t as u64, per_thread))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });

    let mut per_step = Vec::new();
    for r in results {
        per_step.push(r?);
    }
    // Interleave thread losses into one nominal step sequence.
    let mut trace = LossTrace::default();
    let mut acc = 0.0;
    let mut n = 0u64;
    let mut step = 0u64;
    for i in 0..per_thread as usize {
        for losses in &per_step {
            step += 1;
            acc += losses[i];
            n += 1;
            if step.is_multiple_of(config.checkpoint_every) {
                trace.checkpoints.push((step, acc / n as f64));
                acc = 0.0;
                n = 0;
            }
        }
    }
    if n > 0 {
        trace.checkpoints.push((step, acc / n as f64));
    }
    let from_atomic = |v: Vec<AtomicU64>| v.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
    let emb = EmbeddingMatrix {
        vocab_size: init.vocab_size,
        dims: init.dims,
        input_vectors: from_atomic(input),
        output_vectors: from_atomic(output),
    };
    if !emb.is_finite() {
        return Err(TrainError::NonFinite {
            step,
            center: 0,
            context: 0,
        });
    }
    Ok((emb, trace))
}

fn hogwild_worker(
    shard: &EncodedCorpus,
    config: &TrainingConfig,
    noise: &NoiseSampler,
    input: &[AtomicU64],
    output: &[AtomicU64],
    thread: u64,
    steps: u64,
) -> Result<Vec<f64>, TrainError> {
    let d = config.dims;
    let lr = config.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (thread + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut cursor = BatchCursor::new();
    let mut grad = PairGradient::new(d, config.negative_samples);
    let mut input_acc = RowAccumulator::new(noise.len(), d);
    let mut output_acc = RowAccumulator::new(noise.len(), d);
    let load = |m: &[AtomicU64], id: TokenId, buf: &mut [f64]| {
        for (b, a) in buf.iter_mut().zip(&m[id as usize * d..]) {
            *b = f64::from_bits(a.load(Ordering::Relaxed));
        }
    };
    let store_sub = |m: &[AtomicU64], id: TokenId, g: &[f64]| {
        for (a, g) in m[id as usize * d..(id as usize + 1) * d].iter().zip(g) {
            let x = f64::from_bits(a.load(Ordering::Relaxed)) - lr * g;
            a.store(x.to_bits(), Ordering::Relaxed);
        }
    };
    let mut v = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut negs = vec![vec![0.0; d]; config.negative_samples];
    let mut neg_ids = vec![0; config.negative_samples];
    let mut losses = Vec::with_capacity(steps as usize);
    for step in 1..=steps {
        let batch = generate_batch(shard, config, &mut cursor, &mut rng)?;
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &(center, context) in &batch {
            for (slot, buf) in neg_ids.iter_mut().zip(negs.iter_mut()) {
                *slot = noise.sample(&mut rng, Some(context));
                load(output, *slot, buf);
            }
            load(input, center, &mut v);
            load(output, context, &mut u);
            let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let loss = grad.compute(&v, &u, &refs);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { step, center, context });
            }
            total += loss;
            grad.scale(scale);
            input_acc.add(center, &grad.center);
            output_acc.add(context, &grad.context);
            for (&n, g) in neg_ids.iter().zip(&grad.negatives) {
                output_acc.add(n, g);
            }
        }
        input_acc.drain(|id, g| store_sub(input, id, g));
        output_acc.drain(|id, g| store_sub(output, id, g));
        losses.push(total * scale);
    }
    Ok(losses)
}
