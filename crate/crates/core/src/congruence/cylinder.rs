//! Locally constant functions on depth-`D` cylinders with values in
//! `L^2(SL2(Z/q))`, and the congruence transfer operator acting on them.

use super::group::{Elem, GroupModQ};
use super::CongruenceError;
use crate::geometry::MarkovModel;
use crate::symbolic::{all_words, anchor, common_prefix, eval_point};
use crate::thermo::NormalizedPotential;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

/// Default cylinder depth.
pub const DEFAULT_DEPTH: usize = 8;

/// Admissible words of a fixed depth with their anchor points.
#[derive(Debug, Clone)]
pub struct CylinderSpace {
    pub depth: usize,
    pub num_symbols: usize,
    /// Words in lexicographic order.
    pub words: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    /// Coded anchor point of each cylinder.
    pub anchors: Vec<f64>,
    /// For each cylinder `w`: `(j, index of (j, w_0..w_{D-2}), g_j^{-1}(anchor))`.
    pub preimages: Vec<Vec<(usize, usize, f64)>>,
}

impl CylinderSpace {
    pub fn new(model: &MarkovModel, depth: usize) -> Result<Self, CongruenceError> {
        if depth == 0 {
            return Err(CongruenceError::DepthExhausted(0));
        }
        let t = &model.transitions;
        let words: Vec<Vec<usize>> = all_words(t, depth).into_iter().map(|w| w.0).collect();
        let index: HashMap<Vec<usize>, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let anchors = words
            .iter()
            .map(|w| eval_point(model, &anchor(t, w)))
            .collect::<Result<Vec<_>, _>>()?;
        let preimages = words
            .iter()
            .zip(&anchors)
            .map(|(w, &u)| {
                t.predecessors(w[0])
                    .map(|j| {
                        let mut src = Vec::with_capacity(depth);
                        src.push(j);
                        src.extend_from_slice(&w[..depth - 1]);
                        (j, index[&src], model.inverse_branch(j, u))
                    })
                    .collect()
            })
            .collect();
        Ok(CylinderSpace { depth, num_symbols: model.num_symbols(), words, index, anchors, preimages })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, w: &[usize]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Cylinder containing the sequence whose first `depth` symbols are `w`.
    pub fn locate(&self, seq: &[usize]) -> Option<usize> {
        self.position(&seq[..self.depth])
    }
}

/// Branch weights `exp(f^(a) + i b tau)` at the pulled-back anchors, shared by
/// every level `q`.
#[derive(Debug, Clone)]
pub struct BranchWeights {
    pub space: Arc<CylinderSpace>,
    pub a: f64,
    pub b: f64,
    /// Per target cylinder: `(j, source cylinder, weight)`.
    pub entries: Vec<Vec<(usize, usize, Complex64)>>,
}

impl BranchWeights {
    pub fn new(space: Arc<CylinderSpace>, potential: &NormalizedPotential, b: f64) -> Self {
        let entries = space
            .words
            .iter()
            .zip(&space.anchors)
            .zip(&space.preimages)
            .map(|((w, &u), pre)| {
                pre.iter().map(|&(j, src, x)| (j, src, potential.weight(b, j, w[0], x, u))).collect()
            })
            .collect();
        BranchWeights { space, a: potential.a, b, entries }
    }

    /// Left Perron vector of the scalar operator, normalized to total mass 1.
    /// At `a = b = 0` these are the cylinder masses of the invariant measure.
    pub fn invariant_masses(&self) -> Result<Vec<f64>, CongruenceError> {
        let n = self.space.len();
        let mut m = vec![1.0 / n as f64; n];
        for it in 0..100_000 {
            let mut next = vec![0.0; n];
            for (w, row) in self.entries.iter().enumerate() {
                for &(_, src, wt) in row {
                    next[src] += m[w] * wt.re;
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            let diff = next.iter().zip(&m).fold(0.0f64, |d, (x, y)| d.max((x - y).abs()));
            m = next;
            if it > 2 && diff < 1e-16 {
                return Ok(m);
            }
        }
        Err(CongruenceError::NoConvergence)
    }
}

/// The congruence transfer operator at level `q`: branch weights together
/// with the right translations by the cocycle values.
#[derive(Debug, Clone)]
pub struct CongruenceOperator {
    pub weights: Arc<BranchWeights>,
    pub group: Arc<GroupModQ>,
    /// `perms[j][g] = g * g_j`, realizing `(c(j, .)^{-1} phi)(g) = phi(g c^{-1})`.
    perms: Vec<Vec<Elem>>,
}

impl CongruenceOperator {
    pub fn new(model: &MarkovModel, weights: Arc<BranchWeights>, group: Arc<GroupModQ>) -> Self {
        let perms = model.forward.iter().map(|g| group.right_mul_perm(group.reduce(g))).collect();
        CongruenceOperator { weights, group, perms }
    }

    pub fn fiber_dim(&self) -> usize {
        self.group.order()
    }

    /// One application of the operator.
    pub fn apply(&self, h: &CongruenceFunction) -> Result<CongruenceFunction, CongruenceError> {
        if h.q != self.group.q {
            return Err(CongruenceError::ModulusMismatch(h.q, self.group.q));
        }
        if h.depth != self.weights.space.depth {
            return Err(CongruenceError::DepthMismatch(h.depth, self.weights.space.depth));
        }
        let nf = self.fiber_dim();
        let mut out = vec![Complex64::new(0.0, 0.0); h.data.len()];
        out.par_chunks_mut(nf).enumerate().for_each(|(w, fiber)| {
            for &(j, src, wt) in &self.weights.entries[w] {
                let perm = &self.perms[j];
                let s = &h.data[src * nf..(src + 1) * nf];
                for (o, &p) in fiber.iter_mut().zip(perm) {
                    *o += wt * s[p as usize];
                }
            }
        });
        Ok(CongruenceFunction { q: h.q, depth: h.depth, fiber_dim: nf, data: out })
    }

    /// `k` applications.
    pub fn apply_k(&self, h: &CongruenceFunction, k: usize) -> Result<CongruenceFunction, CongruenceError> {
        let mut cur = h.clone();
        for _ in 0..k {
            cur = self.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Operator norm bound `N exp(T_0)` on the sup norm.
    pub fn norm_bound(&self, t0: f64) -> f64 {
        self.weights.space.num_symbols as f64 * t0.exp()
    }
}

/// A function on cylinders with values in `C^{F_q}`, stored fiber by fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceFunction {
    pub q: u64,
    pub depth: usize,
    pub fiber_dim: usize,
    pub data: Vec<Complex64>,
}

impl CongruenceFunction {
    pub fn zeros(q: u64, depth: usize, cylinders: usize, fiber_dim: usize) -> Self {
        CongruenceFunction { q, depth, fiber_dim, data: vec![Complex64::new(0.0, 0.0); cylinders * fiber_dim] }
    }

    pub fn from_fibers(q: u64, depth: usize, fibers: &[Vec<Complex64>]) -> Self {
        let fiber_dim = fibers.first().map_or(0, |f| f.len());
        CongruenceFunction { q, depth, fiber_dim, data: fibers.concat() }
    }

    pub fn num_cylinders(&self) -> usize {
        self.data.len() / self.fiber_dim
    }

    pub fn fiber(&self, w: usize) -> &[Complex64] {
        &self.data[w * self.fiber_dim..(w + 1) * self.fiber_dim]
    }

    pub fn fiber_mut(&mut self, w: usize) -> &mut [Complex64] {
        let nf = self.fiber_dim;
        &mut self.data[w * nf..(w + 1) * nf]
    }

    pub fn fibers(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.fiber_dim)
    }

    /// Applies `f` to every fiber.
    pub fn map_fibers(&self, f: impl Fn(&[Complex64]) -> Vec<Complex64> + Sync + Send) -> CongruenceFunction {
        let fibers: Vec<Vec<Complex64>> = self.data.par_chunks(self.fiber_dim).map(f).collect();
        let fiber_dim = fibers.first().map_or(self.fiber_dim, |f| f.len());
        CongruenceFunction { q: self.q, depth: self.depth, fiber_dim, data: fibers.concat() }
    }

    /// `(sum_w m(w) ||H(w)||^2)^{1/2}` with counting measure on the fiber.
    pub fn l2_norm(&self, masses: &[f64]) -> f64 {
        self.fibers().zip(masses).map(|(f, m)| m * fiber_norm_sq(f)).sum::<f64>().sqrt()
    }

    /// L2 norm with every cylinder given equal mass.
    pub fn l2_norm_uniform(&self) -> f64 {
        let n = self.num_cylinders() as f64;
        (self.fibers().map(fiber_norm_sq).sum::<f64>() / n).sqrt()
    }

    /// `max_w ||H(w)||_2`.
    pub fn sup_norm(&self) -> f64 {
        self.fibers().map(|f| fiber_norm_sq(f).sqrt()).fold(0.0, f64::max)
    }

    /// Largest `||H(w) - H(w')|| / theta^n` over cylinders whose first
    /// disagreement is at index `n >= 1`.
    pub fn lipschitz(&self, space: &CylinderSpace, theta: f64) -> f64 {
        let words = &space.words;
        let n = words.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best: f64 = 0.0;
                let fi = self.fiber(i);
                // words sharing the first symbol are contiguous
                for k in i + 1..n {
                    let c = common_prefix(&words[i], &words[k]);
                    if c == 0 {
                        break;
                    }
                    let d: f64 = fi.iter().zip(self.fiber(k)).map(|(a, b)| (a - b).norm_sqr()).sum();
                    best = best.max(d.sqrt() / theta.powi(c as i32));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn sub(&self, other: &CongruenceFunction) -> CongruenceFunction {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CongruenceFunction { data, ..self.clone() }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub fn fiber_norm_sq(f: &[Complex64]) -> f64 {
    f.iter().map(|z| z.norm_sqr()).sum()
}
