//! Dual-channel word composition, the skip-gram negative-sampling objective,
//! and its exact gradients for every parameter group.

mod adagrad;
mod lexicon;
mod sparse;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DweError, Result};
use crate::glyph_cnn::{CnnParamGrads, CnnParams, CnnTape};
use crate::real::{dot, log_sigmoid, sigmoid, Real};

pub use adagrad::{adagrad_step, apply_batch, AdagradState};
pub use lexicon::{observed_chars, Lexicon};
pub use sparse::SparseRows;

/// Which character channels contribute to a word vector.
///
/// `Dual` is the full model. `StrokeOnly` drops the glyph factor (it becomes
/// all ones), `GlyphOnly` drops the n-gram factor, and `WordOnly` ignores
/// characters entirely, which is plain skip-gram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ChannelMode {
    #[default]
    Dual,
    StrokeOnly,
    GlyphOnly,
    WordOnly,
}

impl ChannelMode {
    pub const ALL: [ChannelMode; 4] = [
        ChannelMode::Dual,
        ChannelMode::StrokeOnly,
        ChannelMode::GlyphOnly,
        ChannelMode::WordOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Dual => "dual",
            ChannelMode::StrokeOnly => "stroke",
            ChannelMode::GlyphOnly => "glyph",
            ChannelMode::WordOnly => "word",
        }
    }

    pub fn uses_strokes(self) -> bool {
        matches!(self, ChannelMode::Dual | ChannelMode::StrokeOnly)
    }

    pub fn uses_glyphs(self) -> bool {
        matches!(self, ChannelMode::Dual | ChannelMode::GlyphOnly)
    }

    pub fn uses_chars(self) -> bool {
        self != ChannelMode::WordOnly
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelMode {
    type Err = DweError;

    fn from_str(s: &str) -> Result<Self> {
        ChannelMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| DweError::UnknownName {
                kind: "channel mode",
                name: s.to_owned(),
                available: "dual, stroke, glyph, word".into(),
            })
    }
}

/// How the sampled negatives are weighted in the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NegativeScaling {
    /// Plain sum over the λ draws.
    #[default]
    Sum,
    /// Mean over the λ draws.
    Mean,
}

impl NegativeScaling {
    pub fn name(self) -> &'static str {
        match self {
            NegativeScaling::Sum => "sum",
            NegativeScaling::Mean => "mean",
        }
    }
}

impl fmt::Display for NegativeScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NegativeScaling {
    type Err = DweError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(NegativeScaling::Sum),
            "mean" => Ok(NegativeScaling::Mean),
            _ => Err(DweError::UnknownName {
                kind: "negative scaling",
                name: s.to_owned(),
                available: "sum, mean".into(),
            }),
        }
    }
}

/// Word-id vectors, context vectors and stroke n-gram vectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTables<F> {
    pub dim: usize,
    pub word_id: Vec<F>,
    pub context: Vec<F>,
    pub ngram: Vec<F>,
}

impl<F: Real> EmbeddingTables<F> {
    pub fn zeros(vocab_len: usize, ngram_len: usize, dim: usize) -> Self {
        EmbeddingTables {
            dim,
            word_id: vec![F::zero(); vocab_len * dim],
            context: vec![F::zero(); vocab_len * dim],
            ngram: vec![F::zero(); ngram_len * dim],
        }
    }

    /// Word-id and n-gram rows uniform in ±0.5/d; context rows zero.
    pub fn init(vocab_len: usize, ngram_len: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let mut t = Self::zeros(vocab_len, ngram_len, dim);
        let bound = 0.5 / dim as f64;
        for x in t.word_id.iter_mut().chain(t.ngram.iter_mut()) {
            *x = F::of(rng.gen_range(-bound..bound));
        }
        t
    }

    pub fn vocab_len(&self) -> usize {
        self.word_id.len() / self.dim
    }

    pub fn ngram_len(&self) -> usize {
        self.ngram.len() / self.dim
    }

    pub fn word_id_row(&self, id: u32) -> &[F] {
        let d = self.dim;
        &self.word_id[id as usize * d..(id as usize + 1) * d]
    }

    pub fn context_row(&self, id: u32) -> &[F] {
        let d = self.dim;
        &self.context[id as usize * d..(id as usize + 1) * d]
    }

    pub fn ngram_row(&self, id: u32) -> &[F] {
        let d = self.dim;
        &self.ngram[id as usize * d..(id as usize + 1) * d]
    }

    pub fn all_finite(&self) -> bool {
        self.word_id
            .iter()
            .chain(&self.context)
            .chain(&self.ngram)
            .all(|x| x.is_finite())
    }

    pub fn cast<G: Real>(&self) -> EmbeddingTables<G> {
        let conv = |v: &[F]| v.iter().map(|&x| G::of(x.as_f64())).collect();
        EmbeddingTables {
            dim: self.dim,
            word_id: conv(&self.word_id),
            context: conv(&self.context),
            ngram: conv(&self.ngram),
        }
    }
}

/// Cached forward state of one character.
#[derive(Clone, Debug)]
pub struct CharState<F> {
    pub slot: u32,
    /// `Σ_{g∈G(c)} g`; empty when the stroke channel is off.
    pub ngram_sum: Vec<F>,
    /// `CNN(I_c)` and its tape; `None` when the glyph channel is off.
    pub glyph: Option<(Vec<F>, CnnTape<F>)>,
    pub feature: Vec<F>,
}

/// A composed word vector together with the character states it came from.
#[derive(Clone, Debug)]
pub struct WordComposition<F> {
    pub word_id: u32,
    pub chars: Vec<CharState<F>>,
    pub vector: Vec<F>,
}

/// `(center, context)` pairs with `negatives_per_pair` negatives each, flattened.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub pairs: &'a [(u32, u32)],
    pub negatives: &'a [u32],
    pub negatives_per_pair: usize,
}

impl<'a> Batch<'a> {
    pub fn negatives_of(&self, pair: usize) -> &'a [u32] {
        let k = self.negatives_per_pair;
        &self.negatives[pair * k..(pair + 1) * k]
    }

    fn chunk(&self, range: std::ops::Range<usize>) -> Batch<'a> {
        let k = self.negatives_per_pair;
        Batch {
            pairs: &self.pairs[range.clone()],
            negatives: &self.negatives[range.start * k..range.end * k],
            negatives_per_pair: k,
        }
    }
}

/// Gradients of the summed objective over one batch. Rows are only present
/// for parameters that the batch touched.
#[derive(Clone, Debug)]
pub struct BatchGrads<F> {
    pub loss: f64,
    pub pairs: usize,
    pub word_id: SparseRows<F>,
    pub context: SparseRows<F>,
    pub ngram: SparseRows<F>,
    pub cnn: CnnParamGrads<F>,
    pub cnn_touched: bool,
}

impl<F: Real> BatchGrads<F> {
    fn new(dim: usize) -> Self {
        BatchGrads {
            loss: 0.0,
            pairs: 0,
            word_id: SparseRows::new(dim),
            context: SparseRows::new(dim),
            ngram: SparseRows::new(dim),
            cnn: CnnParams::zeros(dim),
            cnn_touched: false,
        }
    }

    pub fn merge(&mut self, other: BatchGrads<F>) {
        self.loss += other.loss;
        self.pairs += other.pairs;
        self.word_id.merge(&other.word_id);
        self.context.merge(&other.context);
        self.ngram.merge(&other.ngram);
        if other.cnn_touched {
            self.cnn.accumulate(&other.cnn);
            self.cnn_touched = true;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DweModel<F: Real> {
    pub tables: EmbeddingTables<F>,
    pub cnn: CnnParams<F>,
    pub mode: ChannelMode,
}

impl<F: Real> DweModel<F> {
    pub fn new(tables: EmbeddingTables<F>, cnn: CnnParams<F>, mode: ChannelMode) -> Result<Self> {
        if tables.dim != cnn.out_dim() {
            return Err(DweError::Shape(format!(
                "embedding dimension {} differs from CNN output {}",
                tables.dim,
                cnn.out_dim()
            )));
        }
        if tables.context.len() != tables.word_id.len() {
            return Err(DweError::Shape("word-id and context tables differ in size".into()));
        }
        Ok(DweModel { tables, cnn, mode })
    }

    pub fn init(vocab_len: usize, ngram_len: usize, dim: usize, mode: ChannelMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = EmbeddingTables::init(vocab_len, ngram_len, dim, &mut rng);
        let cnn = CnnParams::init(rng.gen(), dim);
        DweModel { tables, cnn, mode }
    }

    pub fn dim(&self) -> usize {
        self.tables.dim
    }

    pub fn cast<G: Real>(&self) -> DweModel<G> {
        DweModel {
            tables: self.tables.cast(),
            cnn: self.cnn.cast(),
            mode: self.mode,
        }
    }

    pub fn char_state(&self, lex: &Lexicon, slot: u32) -> CharState<F> {
        let d = self.dim();
        let ngram_sum = if self.mode.uses_strokes() {
            let mut sum = vec![F::zero(); d];
            for &g in lex.ngrams(slot) {
                for (s, &x) in sum.iter_mut().zip(self.tables.ngram_row(g)) {
                    *s += x;
                }
            }
            sum
        } else {
            Vec::new()
        };
        let glyph = self.mode.uses_glyphs().then(|| self.cnn.forward(lex.glyph(slot)));
        let feature = match (self.mode, &glyph) {
            (ChannelMode::Dual, Some((v, _))) => hadamard(&ngram_sum, v),
            (ChannelMode::StrokeOnly, _) => ngram_sum.clone(),
            (ChannelMode::GlyphOnly, Some((v, _))) => v.clone(),
            _ => vec![F::zero(); d],
        };
        CharState {
            slot,
            ngram_sum,
            glyph,
            feature,
        }
    }

    /// The character's contribution before averaging: `(Σg) ⊙ CNN(I_c)` in dual mode.
    pub fn char_feature(&self, lex: &Lexicon, slot: u32) -> Vec<F> {
        self.char_state(lex, slot).feature
    }

    pub fn compose_word(&self, lex: &Lexicon, word_id: u32) -> Result<WordComposition<F>> {
        if word_id as usize >= self.tables.vocab_len() {
            return Err(DweError::Shape(format!("word id {word_id} out of range")));
        }
        let chars: Vec<CharState<F>> = if self.mode.uses_chars() {
            lex.word_chars(word_id)
                .iter()
                .map(|&s| self.char_state(lex, s))
                .collect()
        } else {
            Vec::new()
        };
        let vector = compose_vector(
            self.tables.word_id_row(word_id),
            chars.iter().map(|c| c.feature.as_slice()),
        );
        Ok(WordComposition { word_id, chars, vector })
    }

    /// Objective and gradients for a single `(center, context)` pair.
    pub fn pair_loss_and_grads(
        &self,
        lex: &Lexicon,
        center: &WordComposition<F>,
        context: u32,
        negatives: &[u32],
        scaling: NegativeScaling,
    ) -> Result<(F, BatchGrads<F>)> {
        let d = self.dim();
        if center.vector.len() != d {
            return Err(DweError::Shape(format!(
                "composed vector has {} values, model dimension is {d}",
                center.vector.len()
            )));
        }
        self.check_ids(std::iter::once(context).chain(negatives.iter().copied()))?;
        let mut grads = BatchGrads::new(d);
        let mut upstream = vec![F::zero(); d];
        let loss = self.pair_terms(&center.vector, context, negatives, scaling, &mut upstream, &mut grads);
        grads.loss = loss.as_f64();
        grads.pairs = 1;
        self.backprop_word(lex, center.word_id, &upstream, center.chars.iter(), &mut grads)?;
        Ok((loss, grads))
    }

    /// Summed objective over a batch, forward only.
    pub fn batch_loss(&self, lex: &Lexicon, batch: &Batch<'_>, scaling: NegativeScaling) -> Result<F> {
        let (composed, _) = self.compose_centers(lex, batch)?;
        let mut total = F::zero();
        for (i, &(center, context)) in batch.pairs.iter().enumerate() {
            let w = &composed[&center].1;
            total += self.pair_loss(w, context, batch.negatives_of(i), scaling);
        }
        Ok(total)
    }

    /// Objective and gradients summed over a batch.
    ///
    /// Each distinct center word is composed once and each distinct character
    /// goes through the CNN once; since the gradients are linear in the
    /// upstream signal, per-pair signals are summed before backpropagation.
    pub fn batch_gradients(&self, lex: &Lexicon, batch: &Batch<'_>, scaling: NegativeScaling) -> Result<BatchGrads<F>> {
        let d = self.dim();
        let (composed, states) = self.compose_centers(lex, batch)?;
        let mut grads = BatchGrads::new(d);
        let mut upstream: HashMap<u32, Vec<F>> = HashMap::with_capacity(composed.len());
        let mut order = Vec::with_capacity(composed.len());
        for (i, &(center, context)) in batch.pairs.iter().enumerate() {
            let w = &composed[&center].1;
            let u = upstream.entry(center).or_insert_with(|| {
                order.push(center);
                vec![F::zero(); d]
            });
            let loss = self.pair_terms(w, context, batch.negatives_of(i), scaling, u, &mut grads);
            grads.loss += loss.as_f64();
        }
        grads.pairs = batch.pairs.len();

        let mut char_upstream: Vec<Option<Vec<F>>> = vec![None; states.len()];
        for center in order {
            let u = &upstream[&center];
            add_into(grads.word_id.row_mut(center), u);
            let locals = &composed[&center].0;
            if locals.is_empty() {
                continue;
            }
            let n = F::of(locals.len() as f64);
            for &l in locals {
                let acc = char_upstream[l].get_or_insert_with(|| vec![F::zero(); d]);
                for (a, &x) in acc.iter_mut().zip(u) {
                    *a += x / n;
                }
            }
        }
        for (state, gf) in states.iter().zip(&char_upstream) {
            if let Some(gf) = gf {
                self.backprop_char(lex, state, gf, &mut grads)?;
            }
        }
        Ok(grads)
    }

    /// [`Self::batch_gradients`] over `threads` contiguous chunks, merged in chunk order.
    pub fn batch_gradients_parallel(
        &self,
        lex: &Lexicon,
        batch: &Batch<'_>,
        scaling: NegativeScaling,
        threads: usize,
    ) -> Result<BatchGrads<F>> {
        let n = batch.pairs.len();
        if threads <= 1 || n < 2 * threads {
            return self.batch_gradients(lex, batch, scaling);
        }
        let per = n.div_ceil(threads);
        let parts: Vec<Result<BatchGrads<F>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..n)
                .step_by(per)
                .map(|start| {
                    let chunk = batch.chunk(start..(start + per).min(n));
                    scope.spawn(move || self.batch_gradients(lex, &chunk, scaling))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("gradient worker panicked"))
                .collect()
        });
        let mut total = BatchGrads::new(self.dim());
        for part in parts {
            total.merge(part?);
        }
        Ok(total)
    }

    fn check_ids(&self, ids: impl Iterator<Item = u32>) -> Result<()> {
        let v = self.tables.vocab_len();
        for id in ids {
            if id as usize >= v {
                return Err(DweError::Shape(format!(
                    "word id {id} out of range for vocabulary of {v}"
                )));
            }
        }
        Ok(())
    }

    /// Composes every distinct center of the batch, sharing character states.
    /// Returns `center → (local char indices, vector)` and the local states.
    #[allow(clippy::type_complexity)]
    fn compose_centers(
        &self,
        lex: &Lexicon,
        batch: &Batch<'_>,
    ) -> Result<(HashMap<u32, (Vec<usize>, Vec<F>)>, Vec<CharState<F>>)> {
        if batch.negatives.len() != batch.pairs.len() * batch.negatives_per_pair {
            return Err(DweError::Shape(format!(
                "{} negatives for {} pairs with {} each",
                batch.negatives.len(),
                batch.pairs.len(),
                batch.negatives_per_pair
            )));
        }
        self.check_ids(
            batch
                .pairs
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .chain(batch.negatives.iter().copied()),
        )?;

        let mut local_of: HashMap<u32, usize> = HashMap::new();
        let mut states: Vec<CharState<F>> = Vec::new();
        let mut composed = HashMap::new();
        for &(center, _) in batch.pairs {
            if composed.contains_key(&center) {
                continue;
            }
            let mut locals = Vec::new();
            if self.mode.uses_chars() {
                for &slot in lex.word_chars(center) {
                    let l = *local_of.entry(slot).or_insert_with(|| {
                        states.push(self.char_state(lex, slot));
                        states.len() - 1
                    });
                    locals.push(l);
                }
            }
            let vector = compose_vector(
                self.tables.word_id_row(center),
                locals.iter().map(|&l| states[l].feature.as_slice()),
            );
            composed.insert(center, (locals, vector));
        }
        Ok((composed, states))
    }

    fn pair_loss(&self, w: &[F], context: u32, negatives: &[u32], scaling: NegativeScaling) -> F {
        let weight = negative_weight::<F>(scaling, negatives.len());
        let mut loss = log_sigmoid(dot(w, self.tables.context_row(context)));
        for &neg in negatives {
            loss += weight * log_sigmoid(-dot(w, self.tables.context_row(neg)));
        }
        loss
    }

    /// Loss of one pair; adds context-row gradients to `grads` and `∂L/∂w` to `upstream`.
    fn pair_terms(
        &self,
        w: &[F],
        context: u32,
        negatives: &[u32],
        scaling: NegativeScaling,
        upstream: &mut [F],
        grads: &mut BatchGrads<F>,
    ) -> F {
        let weight = negative_weight::<F>(scaling, negatives.len());
        let e = self.tables.context_row(context);
        let s = dot(w, e);
        let mut loss = log_sigmoid(s);
        let coef = F::one() - sigmoid(s);
        axpy(upstream, coef, e);
        axpy(grads.context.row_mut(context), coef, w);
        for &neg in negatives {
            let e = self.tables.context_row(neg);
            let s = dot(w, e);
            loss += weight * log_sigmoid(-s);
            let coef = -weight * sigmoid(s);
            axpy(upstream, coef, e);
            axpy(grads.context.row_mut(neg), coef, w);
        }
        loss
    }

    fn backprop_word<'s>(
        &self,
        lex: &Lexicon,
        word_id: u32,
        upstream: &[F],
        chars: impl ExactSizeIterator<Item = &'s CharState<F>>,
        grads: &mut BatchGrads<F>,
    ) -> Result<()> {
        add_into(grads.word_id.row_mut(word_id), upstream);
        let n = chars.len();
        if n == 0 {
            return Ok(());
        }
        let nf = F::of(n as f64);
        let gf: Vec<F> = upstream.iter().map(|&x| x / nf).collect();
        for state in chars {
            self.backprop_char(lex, state, &gf, grads)?;
        }
        Ok(())
    }

    /// Backpropagates `∂L/∂feature_c` into the n-gram rows and the CNN.
    fn backprop_char(
        &self,
        lex: &Lexicon,
        state: &CharState<F>,
        grad_feature: &[F],
        grads: &mut BatchGrads<F>,
    ) -> Result<()> {
        match self.mode {
            ChannelMode::Dual => {
                let (v, tape) = state.glyph.as_ref().expect("dual mode records glyph features");
                let g_ngram = hadamard(grad_feature, v);
                for &g in lex.ngrams(state.slot) {
                    add_into(grads.ngram.row_mut(g), &g_ngram);
                }
                if !state.ngram_sum.iter().all(|x| x.is_zero()) {
                    let g_cnn = hadamard(grad_feature, &state.ngram_sum);
                    self.cnn.backward(tape, &g_cnn, &mut grads.cnn)?;
                    grads.cnn_touched = true;
                }
            }
            ChannelMode::StrokeOnly => {
                for &g in lex.ngrams(state.slot) {
                    add_into(grads.ngram.row_mut(g), grad_feature);
                }
            }
            ChannelMode::GlyphOnly => {
                let (_, tape) = state.glyph.as_ref().expect("glyph mode records glyph features");
                self.cnn.backward(tape, grad_feature, &mut grads.cnn)?;
                grads.cnn_touched = true;
            }
            ChannelMode::WordOnly => {}
        }
        Ok(())
    }
}

/// `w_ID + (1/N_c) Σ_c feature_c`, or `w_ID` when there are no characters.
pub fn compose_vector<'a, F: Real>(word_id_row: &[F], features: impl ExactSizeIterator<Item = &'a [F]>) -> Vec<F> {
    let n = features.len();
    let mut out = word_id_row.to_vec();
    if n == 0 {
        return out;
    }
    let mut sum = vec![F::zero(); out.len()];
    for f in features {
        add_into(&mut sum, f);
    }
    let nf = F::of(n as f64);
    for (o, s) in out.iter_mut().zip(sum) {
        *o += s / nf;
    }
    out
}

/// Average of character features without the word-id term.
pub fn average_features<'a, F: Real>(dim: usize, features: impl ExactSizeIterator<Item = &'a [F]>) -> Vec<F> {
    let n = features.len();
    let mut sum = vec![F::zero(); dim];
    for f in features {
        add_into(&mut sum, f);
    }
    let nf = F::of(n.max(1) as f64);
    sum.iter_mut().for_each(|x| *x /= nf);
    sum
}

pub fn score<F: Real>(w: &[F], e: &[F]) -> F {
    dot(w, e)
}

pub fn hadamard<F: Real>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

fn negative_weight<F: Real>(scaling: NegativeScaling, count: usize) -> F {
    match scaling {
        NegativeScaling::Sum => F::one(),
        NegativeScaling::Mean => F::one() / F::of(count.max(1) as f64),
    }
}

fn add_into<F: Real>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn axpy<F: Real>(dst: &mut [F], a: F, x: &[F]) {
    for (d, &v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

#[cfg(test)]
mod tests;
