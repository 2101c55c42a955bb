//! Schottky data: integer generators, isometric disks, ping-pong validation
//! and the Markov coding of the boundary action.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Distance below which a Möbius denominator counts as a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;
/// Required separation between distinct disk intervals.
pub const DISJOINT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    ZeroLowerLeftEntry(usize),
    DeterminantNotOne(usize),
    NonHyperbolicGenerator(usize),
    OverlappingDisks(usize, usize),
    PingPongFailure(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroLowerLeftEntry(i) => write!(f, "generator {i} has c = 0"),
            Violation::DeterminantNotOne(i) => write!(f, "generator {i} has determinant != 1"),
            Violation::NonHyperbolicGenerator(i) => write!(f, "generator {i} has |trace| <= 2"),
            Violation::OverlappingDisks(i, j) => write!(f, "disk intervals {i} and {j} overlap"),
            Violation::PingPongFailure(j) => write!(f, "symbol {j} fails the ping-pong mapping check"),
        }
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid Schottky data: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("pole hit at x = {0}")]
    PoleHit(f64),
    #[error("integer overflow in matrix product")]
    Overflow,
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An element of SL2(Z) acting on the real line by fractional linear maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap { a: 1, b: 0, c: 0, d: 1 };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        MobiusMap { a, b, c, d }
    }

    pub fn det(&self) -> i128 {
        self.a as i128 * self.d as i128 - self.b as i128 * self.c as i128
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse(&self) -> Self {
        MobiusMap::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn checked_mul(&self, o: &MobiusMap) -> Result<MobiusMap, GeometryError> {
        let e = |x: i64, y: i64, z: i64, w: i64| -> Result<i64, GeometryError> {
            x.checked_mul(y)
                .and_then(|p| z.checked_mul(w).and_then(|q| p.checked_add(q)))
                .ok_or(GeometryError::Overflow)
        };
        Ok(MobiusMap::new(
            e(self.a, o.a, self.b, o.c)?,
            e(self.a, o.b, self.b, o.d)?,
            e(self.c, o.a, self.d, o.c)?,
            e(self.c, o.b, self.d, o.d)?,
        ))
    }

    /// Image and derivative at `x`; the derivative of a determinant-one map is `1/(cx+d)^2`.
    pub fn apply(&self, x: f64) -> Result<(f64, f64), GeometryError> {
        let den = self.c as f64 * x + self.d as f64;
        if den.abs() < POLE_TOLERANCE {
            return Err(GeometryError::PoleHit(x));
        }
        let y = (self.a as f64 * x + self.b as f64) / den;
        Ok((y, 1.0 / (den * den)))
    }

    /// Image only; callers guarantee `x` is away from the pole.
    #[inline]
    pub fn image(&self, x: f64) -> f64 {
        (self.a as f64 * x + self.b as f64) / (self.c as f64 * x + self.d as f64)
    }

    /// `log |g'(x)| = -2 log |cx + d|`.
    #[inline]
    pub fn log_derivative(&self, x: f64) -> f64 {
        -2.0 * (self.c as f64 * x + self.d as f64).abs().ln()
    }

    /// Isometric disk `{ |cx + d| <= 1 }` intersected with the real line.
    pub fn isometric_interval(&self) -> Option<Interval> {
        if self.c == 0 {
            return None;
        }
        let c = self.c as f64;
        let center = -(self.d as f64) / c;
        let radius = 1.0 / c.abs();
        Some(Interval::new(center - radius, center + radius))
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
    /// Strictly separated by at least `margin`.
    pub fn disjoint_from(&self, o: &Interval, margin: f64) -> bool {
        self.hi + margin < o.lo || o.hi + margin < self.lo
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigFile {
    generators: Vec<[[i64; 2]; 2]>,
}

/// Generators of a Schottky subgroup of SL2(Z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchottkyData {
    pub generators: Vec<MobiusMap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Disk interval for each symbol, ordered `g_1, g_1^{-1}, g_2, ...`.
    pub disks: Vec<Interval>,
    /// Smallest gap between two distinct disk intervals.
    pub min_gap: f64,
}

impl SchottkyData {
    pub fn new(generators: Vec<MobiusMap>) -> Self {
        SchottkyData { generators }
    }

    /// The two-generator example used throughout the tests.
    pub fn example() -> Self {
        SchottkyData::new(vec![MobiusMap::new(2, 3, 1, 2), MobiusMap::new(6, 35, 1, 6)])
    }

    pub fn from_json_str(s: &str) -> Result<Self, GeometryError> {
        let cfg: ConfigFile =
            serde_json::from_str(s).map_err(|e| GeometryError::Config(e.to_string()))?;
        if cfg.generators.is_empty() {
            return Err(GeometryError::Config("no generators".into()));
        }
        Ok(SchottkyData::new(
            cfg.generators
                .iter()
                .map(|m| MobiusMap::new(m[0][0], m[0][1], m[1][0], m[1][1]))
                .collect(),
        ))
    }

    pub fn from_json_file(path: &Path) -> Result<Self, GeometryError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let cfg = ConfigFile {
            generators: self.generators.iter().map(|g| [[g.a, g.b], [g.c, g.d]]).collect(),
        };
        serde_json::to_string(&cfg).expect("plain integer arrays serialize")
    }

    /// Symbol matrices `g_1, g_1^{-1}, g_2, g_2^{-1}, ...`.
    pub fn symbol_maps(&self) -> Vec<MobiusMap> {
        self.generators.iter().flat_map(|g| [*g, g.inverse()]).collect()
    }

    pub fn validate(&self) -> Result<ValidationReport, GeometryError> {
        let mut violations = Vec::new();
        for (i, g) in self.generators.iter().enumerate() {
            if g.c == 0 {
                violations.push(Violation::ZeroLowerLeftEntry(i));
            }
            if g.det() != 1 {
                violations.push(Violation::DeterminantNotOne(i));
            }
            if g.trace().abs() <= 2 {
                violations.push(Violation::NonHyperbolicGenerator(i));
            }
        }
        if !violations.is_empty() {
            return Err(GeometryError::Invalid(violations));
        }
        let maps = self.symbol_maps();
        let disks: Vec<Interval> = maps
            .iter()
            .map(|g| g.isometric_interval().expect("c != 0 checked"))
            .collect();
        let mut min_gap = f64::INFINITY;
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                if !disks[i].disjoint_from(&disks[j], DISJOINT_MARGIN) {
                    violations.push(Violation::OverlappingDisks(i, j));
                }
                let gap = (disks[j].lo - disks[i].hi).max(disks[i].lo - disks[j].hi);
                min_gap = min_gap.min(gap);
            }
        }
        // g maps the boundary of its own disk onto the boundary of the partner disk
        // and sends infinity to the partner's center.
        for (j, g) in maps.iter().enumerate() {
            let partner = disks[j ^ 1];
            let tol = 1e-9 * (1.0 + partner.hi.abs().max(partner.lo.abs()));
            let ends = [g.apply(disks[j].lo), g.apply(disks[j].hi)];
            let ok = match ends {
                [Ok((x, _)), Ok((y, _))] => {
                    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                    (lo - partner.lo).abs() < tol && (hi - partner.hi).abs() < tol
                }
                _ => false,
            };
            let at_infinity = g.a as f64 / g.c as f64;
            if !ok || (at_infinity - partner.center()).abs() > tol {
                violations.push(Violation::PingPongFailure(j));
            }
        }
        if !violations.is_empty() {
            return Err(GeometryError::Invalid(violations));
        }
        Ok(ValidationReport { disks, min_gap })
    }
}

/// Admissibility structure of the no-backtracking shift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl TransitionMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                entries.push(f(j, k));
            }
        }
        TransitionMatrix { n, entries }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |j, k| rows[j][k] != 0)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allowed(&self, j: usize, k: usize) -> bool {
        self.entries[j * self.n + k]
    }

    pub fn count_ones(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Successors of `j`, in increasing order.
    pub fn successors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&k| self.allowed(j, k))
    }

    /// Predecessors of `k`, in increasing order.
    pub fn predecessors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.allowed(j, k))
    }

    /// Integer matrix power, counting admissible paths.
    pub fn power_counts(&self, p: usize) -> Vec<Vec<u128>> {
        let n = self.n;
        let mut acc: Vec<Vec<u128>> =
            (0..n).map(|i| (0..n).map(|j| u128::from(i == j)).collect()).collect();
        for _ in 0..p {
            let mut next = vec![vec![0u128; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if acc[i][k] == 0 {
                        continue;
                    }
                    for j in self.successors(k) {
                        next[i][j] = next[i][j].saturating_add(acc[i][k]);
                    }
                }
            }
            acc = next;
        }
        acc
    }
}

/// Markov coding of the boundary map: on the interval of symbol `j` the
/// expanding map is the symbol matrix `g_j`, and the inverse branch into `U_j`
/// is `g_j^{-1}` regardless of the target symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovModel {
    pub data: SchottkyData,
    /// `g_j` for each symbol.
    pub forward: Vec<MobiusMap>,
    /// `g_j^{-1}`, the inverse branch into `U_j` and the cocycle value `c(j, .)`.
    pub inverse: Vec<MobiusMap>,
    pub intervals: Vec<Interval>,
    pub transitions: TransitionMatrix,
    /// Extreme values of the roof function over all cylinders.
    pub tau_min: f64,
    pub tau_max: f64,
}

impl MarkovModel {
    pub fn build(data: &SchottkyData) -> Result<Self, GeometryError> {
        let report = data.validate()?;
        let forward = data.symbol_maps();
        let inverse: Vec<MobiusMap> = forward.iter().map(|g| g.inverse()).collect();
        let n = forward.len();
        let transitions = TransitionMatrix::from_fn(n, |j, k| k != (j ^ 1));
        let mut model = MarkovModel {
            data: data.clone(),
            forward,
            inverse,
            intervals: report.disks,
            transitions,
            tau_min: f64::INFINITY,
            tau_max: f64::NEG_INFINITY,
        };
        // The roof at g_j^{-1}(u) is 2 log|-c u + a|, monotone on each U_k, so
        // its extremes over a cylinder sit at interval endpoints.
        for j in 0..n {
            for k in model.transitions.successors(j).collect::<Vec<_>>() {
                for u in [model.intervals[k].lo, model.intervals[k].hi] {
                    let t = model.roof_pulled(j, u);
                    model.tau_min = model.tau_min.min(t);
                    model.tau_max = model.tau_max.max(t);
                }
            }
        }
        Ok(model)
    }

    pub fn num_symbols(&self) -> usize {
        self.forward.len()
    }

    pub fn partner(&self, j: usize) -> usize {
        j ^ 1
    }

    /// Inverse branch `U_k -> U_j` evaluated at `u`.
    #[inline]
    pub fn inverse_branch(&self, j: usize, u: f64) -> f64 {
        self.inverse[j].image(u)
    }

    /// Forward map on `U_j`.
    #[inline]
    pub fn forward_map(&self, j: usize, x: f64) -> f64 {
        self.forward[j].image(x)
    }

    /// Roof `tau(x) = log |g_j'(x)|` for `x` in `U_j`.
    #[inline]
    pub fn roof(&self, j: usize, x: f64) -> f64 {
        self.forward[j].log_derivative(x)
    }

    /// Roof evaluated at the pulled-back point `g_j^{-1}(u)`.
    #[inline]
    pub fn roof_pulled(&self, j: usize, u: f64) -> f64 {
        -self.inverse[j].log_derivative(u)
    }

    /// Cocycle value `c(j, k)`.
    pub fn cocycle(&self, j: usize, k: usize) -> Option<MobiusMap> {
        self.transitions.allowed(j, k).then_some(self.inverse[j])
    }

    /// Maximal contraction of the inverse branches over their domains.
    pub fn contraction(&self) -> f64 {
        let n = self.num_symbols();
        let mut theta: f64 = 0.0;
        for j in 0..n {
            let g = self.inverse[j];
            let pole = -(g.d as f64) / g.c as f64;
            for k in self.transitions.successors(j) {
                let iv = self.intervals[k];
                let nearest = pole.clamp(iv.lo, iv.hi);
                theta = theta.max(1.0 / (g.c as f64 * nearest + g.d as f64).powi(2));
            }
        }
        theta
    }

    /// Number of ones in the transition matrix.
    pub fn transition_count(&self) -> usize {
        self.transitions.count_ones()
    }
}
