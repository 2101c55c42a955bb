//! Subshift of finite type: words, eventually periodic points, the `d_theta`
//! metric, evaluation on the limit set and Birkhoff sums.

use crate::geometry::{MarkovModel, MobiusMap, TransitionMatrix};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Longest word `enumerate_words` materializes when there are four or more symbols.
pub const MAX_MATERIALIZED_LENGTH: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum SymbolicError {
    #[error("transition matrix is not mixing")]
    NotMixing,
    #[error("inadmissible word {0}")]
    InadmissibleWord(Word),
    #[error("inadmissible concatenation of {0} and {1}")]
    InadmissibleConcatenation(Word, SymbolicPoint),
    #[error("symbolic point has an empty period")]
    EmptyPeriod,
    #[error("symbol {0} out of range")]
    SymbolOutOfRange(usize),
    #[error("word length {0} too long to materialize")]
    WordTooLong(usize),
    #[error("integer overflow in cocycle product")]
    Overflow,
    #[error("cannot parse word: {0}")]
    Parse(String),
}

/// Finite word over the alphabet `0..N`. Printed 1-based and comma separated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }
    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }
    pub fn is_admissible(&self, t: &TransitionMatrix) -> bool {
        self.0.windows(2).all(|w| t.allowed(w[0], w[1]))
    }
    pub fn concat(&self, other: &Word) -> Word {
        Word(self.0.iter().chain(other.0.iter()).copied().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| (s + 1).to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Word {
    type Err = SymbolicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(Word::default());
        }
        s.split(',')
            .map(|p| match p.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(SymbolicError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

/// Eventually periodic sequence `preperiod · period^infinity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolicPoint {
    pub preperiod: Vec<usize>,
    pub period: Vec<usize>,
}

impl fmt::Display for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|({})", Word(self.preperiod.clone()), Word(self.period.clone()))
    }
}

impl SymbolicPoint {
    pub fn new(preperiod: Vec<usize>, period: Vec<usize>) -> Self {
        SymbolicPoint { preperiod, period }
    }

    pub fn periodic(period: Vec<usize>) -> Self {
        SymbolicPoint::new(Vec::new(), period)
    }

    /// Symbol at position `i`.
    pub fn at(&self, i: usize) -> usize {
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    pub fn first(&self) -> usize {
        self.at(0)
    }

    /// First `n` symbols.
    pub fn prefix(&self, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.at(i)).collect()
    }

    /// The point `(w, self)`.
    pub fn prepend(&self, w: &[usize]) -> SymbolicPoint {
        let mut pre = w.to_vec();
        pre.extend_from_slice(&self.preperiod);
        SymbolicPoint::new(pre, self.period.clone())
    }

    /// Shift by one symbol.
    pub fn shift(&self) -> SymbolicPoint {
        if let Some((_, rest)) = self.preperiod.split_first() {
            SymbolicPoint::new(rest.to_vec(), self.period.clone())
        } else {
            let mut p = self.period.clone();
            p.rotate_left(1);
            SymbolicPoint::periodic(p)
        }
    }

    pub fn check(&self, t: &TransitionMatrix) -> Result<(), SymbolicError> {
        if self.period.is_empty() {
            return Err(SymbolicError::EmptyPeriod);
        }
        let n = t.size();
        if let Some(&s) = self.preperiod.iter().chain(&self.period).find(|&&s| s >= n) {
            return Err(SymbolicError::SymbolOutOfRange(s));
        }
        let span = self.preperiod.len() + self.period.len() + 1;
        let w = Word(self.prefix(span));
        if w.is_admissible(t) {
            Ok(())
        } else {
            Err(SymbolicError::InadmissibleWord(w))
        }
    }
}

/// Smallest `n` with `T^n > 0` entrywise, searched up to `N^2`.
pub fn mixing_exponent(t: &TransitionMatrix) -> Result<usize, SymbolicError> {
    let n = t.size();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|j| (0..n).map(|k| t.allowed(j, k)).collect()).collect();
    for exponent in 1..=n * n {
        if reach.iter().all(|row| row.iter().all(|&x| x)) {
            return Ok(exponent);
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if reach[i][k] {
                    for j in t.successors(k) {
                        next[i][j] = true;
                    }
                }
            }
        }
        reach = next;
    }
    Err(SymbolicError::NotMixing)
}

/// Calls `visit` on every admissible word `(y, ..., z)` with `p` transitions,
/// in lexicographic order.
pub fn for_each_word(t: &TransitionMatrix, y: usize, z: usize, p: usize, mut visit: impl FnMut(&[usize])) {
    // reach[d][k]: can we get from k to z in d steps
    let n = t.size();
    let mut reach = vec![vec![false; n]; p + 1];
    reach[0][z] = true;
    for d in 1..=p {
        for k in 0..n {
            reach[d][k] = t.successors(k).any(|j| reach[d - 1][j]);
        }
    }
    if !reach[p][y] {
        return;
    }
    let mut buf = vec![y];
    fn rec(
        t: &TransitionMatrix,
        reach: &[Vec<bool>],
        remaining: usize,
        buf: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if remaining == 0 {
            visit(buf);
            return;
        }
        let last = *buf.last().expect("non-empty");
        for k in t.successors(last) {
            if reach[remaining - 1][k] {
                buf.push(k);
                rec(t, reach, remaining - 1, buf, visit);
                buf.pop();
            }
        }
    }
    rec(t, &reach, p, &mut buf, &mut visit);
}

/// All admissible words from `y` to `z` with `p` transitions (`p + 1` symbols).
pub fn enumerate_words(t: &TransitionMatrix, y: usize, z: usize, p: usize) -> Result<Vec<Word>, SymbolicError> {
    for s in [y, z] {
        if s >= t.size() {
            return Err(SymbolicError::SymbolOutOfRange(s));
        }
    }
    if t.size() >= 4 && p > MAX_MATERIALIZED_LENGTH {
        return Err(SymbolicError::WordTooLong(p));
    }
    let mut out = Vec::new();
    for_each_word(t, y, z, p, |w| out.push(Word(w.to_vec())));
    Ok(out)
}

/// Calls `visit` on every admissible word of `k` symbols whose last symbol may
/// precede `next`, in lexicographic order.
pub fn for_each_word_before(t: &TransitionMatrix, next: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let n = t.size();
    let mut buf = Vec::with_capacity(k);
    fn rec(t: &TransitionMatrix, n: usize, k: usize, next: usize, buf: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if buf.len() == k {
            visit(buf);
            return;
        }
        for s in 0..n {
            if let Some(&prev) = buf.last() {
                if !t.allowed(prev, s) {
                    continue;
                }
            }
            if buf.len() + 1 == k && !t.allowed(s, next) {
                continue;
            }
            buf.push(s);
            rec(t, n, k, next, buf, visit);
            buf.pop();
        }
    }
    if k == 0 {
        visit(&[]);
        return;
    }
    rec(t, n, k, next, &mut buf, &mut visit);
}

/// All admissible words of `d` symbols, in lexicographic order.
pub fn all_words(t: &TransitionMatrix, d: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let n = t.size();
    fn rec(t: &TransitionMatrix, n: usize, d: usize, buf: &mut Vec<usize>, out: &mut Vec<Word>) {
        if buf.len() == d {
            out.push(Word(buf.clone()));
            return;
        }
        for s in 0..n {
            if buf.last().is_none_or(|&p| t.allowed(p, s)) {
                buf.push(s);
                rec(t, n, d, buf, out);
                buf.pop();
            }
        }
    }
    rec(t, n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Canonical continuation after `y`: the lexicographically smallest admissible
/// infinite word that may follow `y`. It is eventually periodic because the
/// greedy choice depends only on the previous symbol.
pub fn omega(t: &TransitionMatrix, y: usize) -> SymbolicPoint {
    let smallest = |s: usize| t.successors(s).next().expect("every symbol has a successor");
    let mut seq = vec![smallest(y)];
    loop {
        let next = smallest(*seq.last().expect("non-empty"));
        if let Some(pos) = seq.iter().position(|&s| s == next) {
            let period = seq[pos..].to_vec();
            seq.truncate(pos);
            return SymbolicPoint::new(seq, period);
        }
        seq.push(next);
    }
}

/// Anchor of a cylinder: the word continued by `omega` of its last symbol.
pub fn anchor(t: &TransitionMatrix, w: &[usize]) -> SymbolicPoint {
    let last = *w.last().expect("cylinder words are non-empty");
    omega(t, last).prepend(w)
}

/// `theta^n` where `n` is the first index where the sequences differ; 0 when equal.
pub fn d_theta(x: &SymbolicPoint, y: &SymbolicPoint, theta: f64) -> f64 {
    match first_disagreement(x, y) {
        Some(n) => theta.powi(n as i32),
        None => 0.0,
    }
}

/// First index where two eventually periodic sequences differ.
pub fn first_disagreement(x: &SymbolicPoint, y: &SymbolicPoint) -> Option<usize> {
    let lcm = {
        let (a, b) = (x.period.len(), y.period.len());
        let mut g = (a, b);
        while g.1 != 0 {
            g = (g.1, g.0 % g.1);
        }
        a / g.0 * b
    };
    let span = x.preperiod.len().max(y.preperiod.len()) + lcm;
    (0..span).find(|&i| x.at(i) != y.at(i))
}

/// First index where two finite words differ, or the shorter length.
pub fn common_prefix(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Coding map: the point of the limit set with itinerary `x`.
pub fn eval_point(model: &MarkovModel, x: &SymbolicPoint) -> Result<f64, SymbolicError> {
    x.check(&model.transitions)?;
    let iv = model.intervals[x.period[0]];
    let mut u = iv.center();
    for _ in 0..200 {
        let mut v = u;
        for &s in x.period.iter().rev() {
            v = model.inverse_branch(s, v);
        }
        let done = (v - u).abs() <= 1e-16 * v.abs().max(1.0);
        u = v;
        if done {
            break;
        }
    }
    for &s in x.preperiod.iter().rev() {
        u = model.inverse_branch(s, u);
    }
    Ok(u)
}

/// Points `zeta(sigma^i y)` for `i = 0..=k` where `y = (alpha, x)`, given `zeta(x)`.
pub fn pullback_orbit(model: &MarkovModel, alpha: &[usize], base: f64) -> Vec<f64> {
    let mut pts = vec![0.0; alpha.len() + 1];
    pts[alpha.len()] = base;
    for i in (0..alpha.len()).rev() {
        pts[i] = model.inverse_branch(alpha[i], pts[i + 1]);
    }
    pts
}

/// A potential given on each cylinder `[j, k]` as a function of the point
/// `x` in `U_j` and its image `sigma(x)` in `U_k`.
pub trait Potential {
    fn value(&self, j: usize, k: usize, x: f64, sx: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffSums {
    pub tau: f64,
    pub cocycle: MobiusMap,
    pub f: f64,
}

/// Birkhoff sums of the roof, the cocycle and `potential` over `len(alpha)`
/// steps starting at `(alpha, x)`. Products run left to right in the order of
/// the symbols.
pub fn birkhoff(
    model: &MarkovModel,
    potential: &impl Potential,
    alpha: &Word,
    x: &SymbolicPoint,
) -> Result<BirkhoffSums, SymbolicError> {
    x.check(&model.transitions)?;
    let t = &model.transitions;
    if !alpha.is_admissible(t) || alpha.last().is_some_and(|l| !t.allowed(l, x.first())) {
        return Err(SymbolicError::InadmissibleConcatenation(alpha.clone(), x.clone()));
    }
    let base = eval_point(model, x)?;
    let pts = pullback_orbit(model, &alpha.0, base);
    let mut sums = BirkhoffSums { tau: 0.0, cocycle: MobiusMap::IDENTITY, f: 0.0 };
    for (i, &j) in alpha.0.iter().enumerate() {
        let k = if i + 1 < alpha.len() { alpha.0[i + 1] } else { x.first() };
        sums.tau += model.roof(j, pts[i]);
        sums.f += potential.value(j, k, pts[i], pts[i + 1]);
        sums.cocycle = sums.cocycle.checked_mul(&model.inverse[j]).map_err(|_| SymbolicError::Overflow)?;
    }
    Ok(sums)
}

/// Cocycle product along an admissible word of `k + 1` symbols (`k` factors).
pub fn cocycle_product(model: &MarkovModel, w: &[usize]) -> Result<MobiusMap, SymbolicError> {
    if !Word(w.to_vec()).is_admissible(&model.transitions) {
        return Err(SymbolicError::InadmissibleWord(Word(w.to_vec())));
    }
    let mut acc = MobiusMap::IDENTITY;
    for pair in w.windows(2) {
        acc = acc.checked_mul(&model.inverse[pair[0]]).map_err(|_| SymbolicError::Overflow)?;
    }
    Ok(acc)
}
