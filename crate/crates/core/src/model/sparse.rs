use std::collections::HashMap;

use crate::real::Real;

/// Gradient rows keyed by table row, in first-touch order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows<F> {
    dim: usize,
    index: HashMap<u32, usize>,
    ids: Vec<u32>,
    data: Vec<F>,
}

impl<F: Real> SparseRows<F> {
    pub fn new(dim: usize) -> Self {
        SparseRows {
            dim,
            index: HashMap::new(),
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The row for `id`, inserted as zeros on first access.
    pub fn row_mut(&mut self, id: u32) -> &mut [F] {
        let d = self.dim;
        let slot = match self.index.get(&id) {
            Some(&s) => s,
            None => {
                let s = self.ids.len();
                self.index.insert(id, s);
                self.ids.push(id);
                self.data.resize(self.data.len() + d, F::zero());
                s
            }
        };
        &mut self.data[slot * d..(slot + 1) * d]
    }

    pub fn get(&self, id: u32) -> Option<&[F]> {
        let d = self.dim;
        self.index.get(&id).map(|&s| &self.data[s * d..(s + 1) * d])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[F])> {
        self.ids.iter().copied().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    pub fn merge(&mut self, other: &SparseRows<F>) {
        for (id, row) in other.iter() {
            for (d, &s) in self.row_mut(id).iter_mut().zip(row) {
                *d += s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_accumulate_and_merge() {
        let mut a = SparseRows::<f64>::new(2);
        a.row_mut(5)[0] += 1.0;
        a.row_mut(3)[1] += 2.0;
        a.row_mut(5)[1] += 4.0;
        assert_eq!(a.get(5), Some(&[1.0, 4.0][..]));
        let mut b = SparseRows::new(2);
        b.row_mut(3)[0] = 1.0;
        b.row_mut(9)[0] = 7.0;
        a.merge(&b);
        let ids: Vec<u32> = a.iter().map(|(i, _)| i).collect();
        assert_eq!(ids, [5, 3, 9]);
        assert_eq!(a.get(3), Some(&[1.0, 2.0][..]));
        assert_eq!(a.get(1), None);
    }
}
