//! Training orchestration: data preparation, epochs of mini-batch Adagrad,
//! checkpointing and vector export.

mod checkpoint;
mod config;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocab, extend_context_pairs, keep_probability, Corpus, NegativeSampler, Vocab};
use crate::error::{DweError, Result};
use crate::model::{apply_batch, observed_chars, AdagradState, Batch, DweModel, Lexicon};
use crate::morphology::{build_ngram_dict, load_glyph_pack, load_stroke_table, GlyphBitmap, StrokeTable};

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, export_vectors, load_checkpoint, save_checkpoint, write_vectors,
    CHECKPOINT_VERSION,
};
pub use config::*;

/// Everything needed to resume training or evaluate a model.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainingConfig,
    pub vocab: Vocab,
    pub lexicon: Lexicon,
    pub model: DweModel<f32>,
    pub optimizer: AdagradState<f32>,
    pub epoch: u64,
    pub step: u64,
}

impl PartialEq for Checkpoint {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.vocab == other.vocab
            && self.lexicon.dict() == other.lexicon.dict()
            && self.lexicon.glyph_map() == other.lexicon.glyph_map()
            && self.model == other.model
            && self.optimizer == other.optimizer
            && self.epoch == other.epoch
            && self.step == other.step
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number, counting epochs of earlier runs on the same checkpoint.
    pub epoch: u64,
    /// Mean per-pair objective, evaluated before each batch's update.
    pub mean_loss: f64,
    pub pairs: u64,
    pub batches: u64,
    pub elapsed_secs: f64,
}

impl EpochStats {
    pub fn status_line(&self) -> String {
        format!(
            "epoch={} loss={:.6} pairs={} elapsed={:.2}",
            self.epoch, self.mean_loss, self.pairs, self.elapsed_secs
        )
    }
}

/// Builds the vocabulary, the n-gram dictionary over the observed characters
/// and a freshly initialized model.
pub fn initialize(
    corpus: &Corpus,
    strokes: &StrokeTable,
    glyphs: &BTreeMap<char, GlyphBitmap>,
    config: &TrainingConfig,
) -> Result<Checkpoint> {
    config.validate()?;
    let vocab = build_vocab(corpus.tokens(), config.min_count)?;
    let dict = build_ngram_dict(strokes, &observed_chars(&vocab), config.n_min, config.n_max);
    let lexicon = Lexicon::new(&vocab, dict, glyphs);
    let model = DweModel::init(
        vocab.len(),
        lexicon.dict().len(),
        config.dim,
        config.channels,
        config.seed,
    );
    let optimizer = AdagradState::for_model(&model);
    Ok(Checkpoint {
        config: config.clone(),
        vocab,
        lexicon,
        model,
        optimizer,
        epoch: 0,
        step: 0,
    })
}

/// Loads the three input files, initializes, and trains for `config.epochs` epochs.
pub fn train(
    corpus_path: impl AsRef<Path>,
    stroke_table_path: impl AsRef<Path>,
    glyph_pack_path: impl AsRef<Path>,
    config: &TrainingConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(Checkpoint, Vec<EpochStats>)> {
    let corpus = Corpus::load(corpus_path)?;
    let strokes = load_stroke_table(stroke_table_path)?;
    let glyphs = load_glyph_pack(glyph_pack_path)?;
    let mut ckpt = initialize(&corpus, &strokes, &glyphs, config)?;
    let stats = run_epochs(&mut ckpt, &corpus, config.epochs, on_epoch)?;
    Ok((ckpt, stats))
}

/// Continues training `ckpt` for `epochs` more epochs over `corpus`, which is
/// mapped through the checkpoint's vocabulary. The checkpoint's config
/// governs all hyperparameters.
pub fn run_epochs(
    ckpt: &mut Checkpoint,
    corpus: &Corpus,
    epochs: usize,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    ckpt.config.validate()?;
    let sentences = corpus.to_ids(&ckpt.vocab);
    let mut all = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let stats = run_epoch(ckpt, &sentences)?;
        on_epoch(&stats);
        all.push(stats);
    }
    Ok(all)
}

fn epoch_seed(seed: u64, epoch: u64, stream: u64) -> u64 {
    seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn run_epoch(ckpt: &mut Checkpoint, sentences: &[Vec<u32>]) -> Result<EpochStats> {
    let start = Instant::now();
    let epoch = ckpt.epoch + 1;
    let cfg = ckpt.config.clone();
    let mut order_rng = ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch, 1));
    let mut sampler = NegativeSampler::new(ckpt.vocab.counts(), cfg.alpha, epoch_seed(cfg.seed, epoch, 2))?;

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut order_rng);

    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(cfg.batch_size * 2);
    let mut kept: Vec<u32> = Vec::new();
    let mut negatives: Vec<u32> = Vec::with_capacity(cfg.batch_size * cfg.negatives);
    let mut loss_sum = 0.0f64;
    let mut pair_count = 0u64;
    let mut batches = 0u64;

    let mut flush = |ckpt: &mut Checkpoint, pairs: &[(u32, u32)], sampler: &mut NegativeSampler| -> Result<()> {
        negatives.clear();
        for &(center, _) in pairs {
            sampler.draw_into(cfg.negatives, center, &mut negatives)?;
        }
        let batch = Batch {
            pairs,
            negatives: &negatives,
            negatives_per_pair: cfg.negatives,
        };
        let grads = match cfg.mode {
            ExecMode::Deterministic => ckpt
                .model
                .batch_gradients(&ckpt.lexicon, &batch, cfg.negative_scaling)?,
            ExecMode::Hogwild { threads } => {
                ckpt.model
                    .batch_gradients_parallel(&ckpt.lexicon, &batch, cfg.negative_scaling, threads)?
            }
        };
        if !grads.loss.is_finite() {
            return Err(DweError::NonFiniteLoss {
                epoch: epoch as usize,
                batch: batches as usize,
                step: ckpt.step,
            });
        }
        apply_batch(
            &mut ckpt.model,
            &mut ckpt.optimizer,
            &grads,
            cfg.lr as f32,
            cfg.eps as f32,
        );
        ckpt.step += 1;
        batches += 1;
        loss_sum += grads.loss;
        pair_count += grads.pairs as u64;
        Ok(())
    };

    for &si in &order {
        let sentence = match cfg.subsample {
            None => &sentences[si][..],
            Some(t) => {
                kept.clear();
                for &id in &sentences[si] {
                    let p = keep_probability(ckpt.vocab.count(id), ckpt.vocab.total_tokens(), t);
                    if order_rng.gen::<f64>() < p {
                        kept.push(id);
                    }
                }
                &kept[..]
            }
        };
        extend_context_pairs(sentence, cfg.window, &mut pairs);
        while pairs.len() >= cfg.batch_size {
            flush(ckpt, &pairs[..cfg.batch_size], &mut sampler)?;
            pairs.drain(..cfg.batch_size);
        }
    }
    if !pairs.is_empty() {
        flush(ckpt, &pairs, &mut sampler)?;
    }

    ckpt.epoch = epoch;
    Ok(EpochStats {
        epoch,
        mean_loss: if pair_count == 0 {
            0.0
        } else {
            loss_sum / pair_count as f64
        },
        pairs: pair_count,
        batches,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
