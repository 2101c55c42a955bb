//! Chebyshev collocation on the disk intervals with barycentric interpolation.

use crate::geometry::Interval;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul};

/// `degree + 1` first-kind Chebyshev nodes on every interval. First-kind
/// nodes avoid the endpoints, so all nodes lie strictly inside each interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevGrid {
    pub degree: usize,
    pub intervals: Vec<Interval>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ChebyshevGrid {
    pub fn new(intervals: &[Interval], degree: usize) -> Self {
        let n = degree + 1;
        let angles: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 * PI / (2 * n) as f64).collect();
        let weights = angles
            .iter()
            .enumerate()
            .map(|(i, t)| if i % 2 == 0 { t.sin() } else { -t.sin() })
            .collect();
        let nodes = intervals
            .iter()
            .map(|iv| angles.iter().map(|t| iv.center() + iv.half_width() * t.cos()).collect())
            .collect();
        ChebyshevGrid { degree, intervals: intervals.to_vec(), nodes, weights }
    }

    /// Nodes per interval.
    pub fn nodes_per_symbol(&self) -> usize {
        self.degree + 1
    }

    pub fn num_symbols(&self) -> usize {
        self.intervals.len()
    }

    /// Total number of collocation points.
    pub fn len(&self) -> usize {
        self.num_symbols() * self.nodes_per_symbol()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, symbol: usize, i: usize) -> usize {
        symbol * self.nodes_per_symbol() + i
    }

    pub fn nodes(&self, symbol: usize) -> &[f64] {
        &self.nodes[symbol]
    }

    pub fn node(&self, symbol: usize, i: usize) -> f64 {
        self.nodes[symbol][i]
    }

    /// Lagrange basis values at `x` for the nodes of `symbol`.
    pub fn basis(&self, symbol: usize, x: f64, out: &mut [f64]) {
        let nodes = &self.nodes[symbol];
        if let Some(hit) = nodes.iter().position(|&xi| xi == x) {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[hit] = 1.0;
            return;
        }
        let mut total = 0.0;
        for ((o, &xi), &w) in out.iter_mut().zip(nodes).zip(&self.weights) {
            *o = w / (x - xi);
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    /// Barycentric interpolation of the grid values `values` (one block per
    /// symbol, or just the block of `symbol`) at `x` in the interval of `symbol`.
    pub fn interpolate<T>(&self, symbol: usize, block: &[T], x: f64) -> T
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        let nodes = &self.nodes[symbol];
        if let Some(hit) = nodes.iter().position(|&xi| xi == x) {
            return block[hit];
        }
        let mut num = block[0] * 0.0;
        let mut den = 0.0;
        for ((&v, &xi), &w) in block.iter().zip(nodes).zip(&self.weights) {
            let c = w / (x - xi);
            num = num + v * c;
            den += c;
        }
        num * (1.0 / den)
    }

    /// Slice of a full grid vector belonging to `symbol`.
    pub fn block<'a, T>(&self, values: &'a [T], symbol: usize) -> &'a [T] {
        let n = self.nodes_per_symbol();
        &values[symbol * n..(symbol + 1) * n]
    }

    /// Samples `f` at every node.
    pub fn sample<T>(&self, mut f: impl FnMut(usize, f64) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for s in 0..self.num_symbols() {
            for &x in &self.nodes[s] {
                out.push(f(s, x));
            }
        }
        out
    }
}
