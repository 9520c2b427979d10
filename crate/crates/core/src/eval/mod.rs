//! Word similarity, word analogy and nearest-neighbour queries over frozen vectors.

mod analogy;
mod datasets;
mod vectors;

use serde::Serialize;

use crate::error::{DweError, Result};

pub use analogy::{
    analogy_solvers, eval_analogy, solve_analogy, AnalogyReport, AnalogySolver, GroupAccuracy, ThreeCosAdd,
    ThreeCosMul, COSMUL_EPS,
};
pub use datasets::{AnalogyDataset, AnalogyQuad, SimilarityDataset, SimilarityRecord};
pub use vectors::{Embeddings, FrozenModel, TextVectors, VectorKind};

/// `a·b / sqrt((a·a)(b·b))`; `None` when either vector is zero.
///
/// Written with a single square root so that `cosine(a, a)` is exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    Some(ab / (aa * bb).sqrt())
}

pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Fractional (average) ranks, 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(DweError::Eval(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(DweError::Eval("Spearman's rho needs at least two observations".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(DweError::Eval("scores must be finite".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| DweError::Eval("rank variance is zero; rho is undefined".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub rho: f64,
    pub scored: usize,
    pub total: usize,
    pub coverage: f64,
}

/// Spearman's ρ between human scores and cosine similarities. Pairs where
/// either word has no usable vector are skipped and reported via coverage.
pub fn eval_similarity(dataset: &SimilarityDataset, emb: &dyn Embeddings) -> Result<SimilarityReport> {
    let mut human = Vec::new();
    let mut model = Vec::new();
    for rec in &dataset.records {
        let (Ok(a), Ok(b)) = (emb.vector(&rec.word_a), emb.vector(&rec.word_b)) else {
            continue;
        };
        if let Some(c) = cosine(&a, &b) {
            human.push(rec.score);
            model.push(c);
        }
    }
    let total = dataset.records.len();
    if model.len() < 2 {
        return Err(DweError::Eval(format!(
            "only {} of {total} pairs could be scored",
            model.len()
        )));
    }
    Ok(SimilarityReport {
        rho: spearman_rho(&human, &model)?,
        scored: model.len(),
        total,
        coverage: model.len() as f64 / total as f64,
    })
}

/// Top-`k` vocabulary words by cosine, excluding the query itself. Ties are
/// broken by vocabulary id.
pub fn nearest_neighbors(token: &str, emb: &dyn Embeddings, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(DweError::Eval("k must be at least 1".into()));
    }
    let q = emb.vector(token)?;
    if normalized(&q).is_none() {
        return Err(DweError::Unrepresentable(token.to_owned()));
    }
    let mut scored: Vec<(u32, f64)> = (0..emb.vocab_len() as u32)
        .filter(|&id| emb.word(id) != token)
        .filter_map(|id| cosine(&q, emb.vocab_vector(id)).map(|c| (id, c)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(id, c)| (emb.word(id).to_owned(), c))
        .collect())
}
