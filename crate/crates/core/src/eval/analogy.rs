use serde::Serialize;

use super::datasets::AnalogyDataset;
use super::normalized;
use super::vectors::Embeddings;
use crate::error::{DweError, Result};
use crate::real::dot;
use crate::registry::Registry;

pub const COSMUL_EPS: f64 = 1e-3;

/// Scores one unit-length candidate vector.
pub type Scorer<'q> = Box<dyn Fn(&[f64]) -> f64 + 'q>;

/// Scores candidates `t` for the analogy `a : b = h : t`. All vectors handed
/// to a solver are unit length.
pub trait AnalogySolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Candidate scoring function, or `None` when the query has no answer.
    fn scorer<'q>(&self, a: &'q [f64], b: &'q [f64], h: &'q [f64]) -> Option<Scorer<'q>>;
}

/// `cos(t, b − a + h)`.
pub struct ThreeCosAdd;

impl AnalogySolver for ThreeCosAdd {
    fn name(&self) -> &'static str {
        "3cosadd"
    }

    fn scorer<'q>(&self, a: &'q [f64], b: &'q [f64], h: &'q [f64]) -> Option<Scorer<'q>> {
        let target: Vec<f64> = (0..a.len()).map(|i| b[i] - a[i] + h[i]).collect();
        let target = normalized(&target)?;
        Some(Box::new(move |t| dot(t, &target)))
    }
}

/// `cos(t,b)·cos(t,h) / (cos(t,a) + ε)` on cosines shifted to `[0, 1]`.
pub struct ThreeCosMul {
    pub eps: f64,
}

impl Default for ThreeCosMul {
    fn default() -> Self {
        ThreeCosMul { eps: COSMUL_EPS }
    }
}

impl AnalogySolver for ThreeCosMul {
    fn name(&self) -> &'static str {
        "3cosmul"
    }

    fn scorer<'q>(&self, a: &'q [f64], b: &'q [f64], h: &'q [f64]) -> Option<Scorer<'q>> {
        let eps = self.eps;
        let shifted = |t: &[f64], x: &[f64]| (1.0 + dot(t, x)) / 2.0;
        Some(Box::new(move |t| shifted(t, b) * shifted(t, h) / (shifted(t, a) + eps)))
    }
}

pub fn analogy_solvers() -> Registry<dyn AnalogySolver> {
    let mut r: Registry<dyn AnalogySolver> = Registry::new("analogy method");
    let solvers: [Box<dyn AnalogySolver>; 2] = [Box::new(ThreeCosAdd), Box::new(ThreeCosMul::default())];
    for s in solvers {
        r.register(s.name(), s).expect("names are distinct");
    }
    r
}

fn unit_vocab(emb: &dyn Embeddings) -> Vec<Option<Vec<f64>>> {
    (0..emb.vocab_len() as u32)
        .map(|id| normalized(emb.vocab_vector(id)))
        .collect()
}

fn unit_query(emb: &dyn Embeddings, token: &str) -> Result<Vec<f64>> {
    normalized(&emb.vector(token)?).ok_or_else(|| DweError::Unrepresentable(token.to_owned()))
}

fn solve_with(
    solver: &dyn AnalogySolver,
    emb: &dyn Embeddings,
    units: &[Option<Vec<f64>>],
    a: &str,
    b: &str,
    h: &str,
) -> Result<Option<u32>> {
    let (ua, ub, uh) = (unit_query(emb, a)?, unit_query(emb, b)?, unit_query(emb, h)?);
    let Some(score) = solver.scorer(&ua, &ub, &uh) else {
        return Ok(None);
    };
    let excluded = [emb.id(a), emb.id(b), emb.id(h)];
    let mut best: Option<(u32, f64)> = None;
    for (id, unit) in units.iter().enumerate() {
        let id = id as u32;
        let Some(t) = unit else { continue };
        if excluded.contains(&Some(id)) {
            continue;
        }
        let s = score(t);
        if s.is_finite() && best.is_none_or(|(_, bs)| s > bs) {
            best = Some((id, s));
        }
    }
    Ok(best.map(|(id, _)| id))
}

/// Best in-vocabulary answer `t` for `a : b = h : t`, excluding the three
/// query words. Ties go to the lowest id.
pub fn solve_analogy(
    solver: &dyn AnalogySolver,
    emb: &dyn Embeddings,
    a: &str,
    b: &str,
    h: &str,
) -> Result<Option<String>> {
    let units = unit_vocab(emb);
    Ok(solve_with(solver, emb, &units, a, b, h)?.map(|id| emb.word(id).to_owned()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub correct: usize,
    pub total: usize,
    /// Queries whose words all had vectors.
    pub answered: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalogyReport {
    pub method: String,
    pub groups: Vec<GroupAccuracy>,
    pub total: GroupAccuracy,
}

/// Exact-match accuracy per group and overall. Unanswerable queries count as wrong.
pub fn eval_analogy(
    dataset: &AnalogyDataset,
    emb: &dyn Embeddings,
    solver: &dyn AnalogySolver,
) -> Result<AnalogyReport> {
    if dataset.is_empty() {
        return Err(DweError::Eval("analogy dataset has no questions".into()));
    }
    let units = unit_vocab(emb);
    let mut groups = Vec::new();
    let (mut all_correct, mut all_answered, mut all_total) = (0, 0, 0);
    for (name, quads) in &dataset.groups {
        let (mut correct, mut answered) = (0, 0);
        for q in quads {
            if let Ok(answer) = solve_with(solver, emb, &units, &q.a, &q.b, &q.h) {
                answered += 1;
                if answer.is_some_and(|id| emb.word(id) == q.t) {
                    correct += 1;
                }
            }
        }
        all_correct += correct;
        all_answered += answered;
        all_total += quads.len();
        groups.push(GroupAccuracy {
            group: name.clone(),
            correct,
            total: quads.len(),
            answered,
            accuracy: if quads.is_empty() {
                0.0
            } else {
                correct as f64 / quads.len() as f64
            },
        });
    }
    Ok(AnalogyReport {
        method: solver.name().to_owned(),
        groups,
        total: GroupAccuracy {
            group: "total".into(),
            correct: all_correct,
            total: all_total,
            answered: all_answered,
            accuracy: all_correct as f64 / all_total as f64,
        },
    })
}
