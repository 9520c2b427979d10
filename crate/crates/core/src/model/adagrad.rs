use crate::glyph_cnn::CnnParams;
use crate::real::Real;

use super::{BatchGrads, ChannelMode, DweModel};

/// One Adagrad ascent step: `acc += g²; param += lr · g / (sqrt(acc) + eps)`.
pub fn adagrad_step<F: Real>(param: &mut [F], grad: &[F], acc: &mut [F], lr: F, eps: F) {
    debug_assert!(param.len() == grad.len() && grad.len() == acc.len());
    for ((p, &g), a) in param.iter_mut().zip(grad).zip(acc.iter_mut()) {
        *a += g * g;
        *p += lr * g / (a.sqrt() + eps);
    }
}

/// Squared-gradient accumulators mirroring every parameter of a [`DweModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdagradState<F: Real> {
    pub word_id: Vec<F>,
    pub context: Vec<F>,
    pub ngram: Vec<F>,
    pub cnn: CnnParams<F>,
}

impl<F: Real> AdagradState<F> {
    pub fn for_model(model: &DweModel<F>) -> Self {
        let t = &model.tables;
        AdagradState {
            word_id: vec![F::zero(); t.word_id.len()],
            context: vec![F::zero(); t.context.len()],
            ngram: vec![F::zero(); t.ngram.len()],
            cnn: CnnParams::zeros(model.cnn.out_dim()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.word_id
            .iter()
            .chain(&self.context)
            .chain(&self.ngram)
            .all(|x| x.is_finite())
            && self.cnn.is_finite()
    }
}

/// Applies one batch of gradients. Only rows present in the sparse maps are
/// touched; channel parameters the mode does not use stay frozen.
pub fn apply_batch<F: Real>(
    model: &mut DweModel<F>,
    state: &mut AdagradState<F>,
    grads: &BatchGrads<F>,
    lr: F,
    eps: F,
) {
    let d = model.dim();
    let tables = &mut model.tables;
    for (row, g) in grads.word_id.iter() {
        let r = row as usize * d..(row as usize + 1) * d;
        adagrad_step(&mut tables.word_id[r.clone()], g, &mut state.word_id[r], lr, eps);
    }
    for (row, g) in grads.context.iter() {
        let r = row as usize * d..(row as usize + 1) * d;
        adagrad_step(&mut tables.context[r.clone()], g, &mut state.context[r], lr, eps);
    }
    if model.mode.uses_strokes() {
        for (row, g) in grads.ngram.iter() {
            let r = row as usize * d..(row as usize + 1) * d;
            adagrad_step(&mut tables.ngram[r.clone()], g, &mut state.ngram[r], lr, eps);
        }
    }
    if model.mode.uses_glyphs() && grads.cnn_touched {
        let acc = state.cnn.tensors_mut();
        for ((p, g), a) in model.cnn.tensors_mut().into_iter().zip(grads.cnn.tensors()).zip(acc) {
            adagrad_step(p, g, a, lr, eps);
        }
    }
    debug_assert!(model.mode != ChannelMode::WordOnly || grads.ngram.is_empty());
}
