//! Dense component arrays over `n` coordinate indices.

use serde::{Serialize, Serializer};

use crate::jet::Jet;

/// Rank-`rank` array with every axis of length `n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    n: usize,
    rank: usize,
    data: Vec<S>,
}

impl<S> Tensor<S> {
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let len = n.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            advance(&mut idx, n);
        }
        Tensor { n, rank, data }
    }

    pub fn try_from_fn<E>(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> Result<S, E>) -> Result<Self, E> {
        let len = n.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx)?);
            advance(&mut idx, n);
        }
        Ok(Tensor { n, rank, data })
    }

    pub fn from_vec(n: usize, rank: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), n.pow(rank as u32), "component count does not match shape");
        Tensor { n, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.n);
            acc * self.n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.offset(idx)]
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> Tensor<T> {
        Tensor { n: self.n, rank: self.rank, data: self.data.iter().map(f).collect() }
    }

    /// Component slice for a fixed leading index (e.g. one derivative direction).
    pub fn leading_slice(&self, first: usize) -> &[S] {
        let block = self.n.pow(self.rank as u32 - 1);
        &self.data[first * block..(first + 1) * block]
    }
}

/// Odometer increment of a multi-index with each digit in `0..n`.
pub fn advance(idx: &mut [usize], n: usize) {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < n {
            return;
        }
        *slot = 0;
    }
}

/// All multi-indices of the given rank.
pub fn indices(n: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let len = n.pow(rank as u32);
    let mut idx = vec![0usize; rank];
    (0..len).map(move |k| {
        if k > 0 {
            advance(&mut idx, n);
        }
        idx.clone()
    })
}

impl Tensor<f64> {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor::from_fn(n, rank, |_| 0.0)
    }

    /// Frobenius norm over all components.
    pub fn norm(&self) -> f64 {
        frobenius(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Tensor<f64>) -> Tensor<f64> {
        assert_eq!((self.n, self.rank), (other.n, other.rank));
        Tensor { n: self.n, rank: self.rank, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }
}

impl Tensor<Jet> {
    pub fn values(&self) -> Tensor<f64> {
        self.map(Jet::value)
    }
}

pub fn frobenius(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * values.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

impl Serialize for Tensor<f64> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.data.serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let t = Tensor::from_fn(3, 2, |idx| (10 * idx[0] + idx[1]) as f64);
        assert_eq!(*t.get(&[2, 1]), 21.0);
        assert_eq!(t.offset(&[1, 2]), 5);
        assert_eq!(t.leading_slice(1), &[10.0, 11.0, 12.0]);
        let all: Vec<_> = indices(2, 3).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[5], vec![1, 0, 1]);
    }

    #[test]
    fn frobenius_is_overflow_safe() {
        assert_eq!(frobenius(&[3.0, 4.0]), 5.0);
        assert!((frobenius(&[3e200, 4e200]) - 5e200).abs() < 1e186);
        assert_eq!(frobenius(&[]), 0.0);
    }
}
