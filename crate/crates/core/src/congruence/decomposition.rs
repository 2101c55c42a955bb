//! Orthogonal splitting of `L^2(F_q)` into new-vector spaces `E^q_{q'}`,
//! `q' | q`, and the projection of lifted functions to lower levels.

use super::cylinder::{CongruenceFunction, CylinderSpace};
use super::group::{divisors, sl2_order, Elem, GroupModQ};
use super::CongruenceError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// At most this many prime factors are supported.
pub const MAX_PRIME_FACTORS: usize = 3;
/// Tolerance for a fiber to count as invariant under the reduction kernel.
pub const NEW_SPACE_TOLERANCE: f64 = 1e-9;

/// Reduction data for one divisor `d` of `q`.
#[derive(Debug, Clone)]
struct Level {
    group: Arc<GroupModQ>,
    /// Image in `F_d` of every element of `F_q`.
    reduction: Vec<Elem>,
}

/// The decomposition `L^2(F_q) = sum_{q' | q} E^q_{q'}`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub q: u64,
    pub group: Arc<GroupModQ>,
    pub divisors: Vec<u64>,
    levels: BTreeMap<u64, Level>,
}

/// Dimension table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub q: u64,
    pub divisor: u64,
    pub dimension: usize,
    /// Trace of the projector, computed from the operator itself.
    pub trace: f64,
}

/// `prod_{p | d} mu` coefficient of the Moebius function for square-free `d`.
fn moebius(d: u64, primes: &[u64]) -> f64 {
    if primes.iter().filter(|&&p| d.is_multiple_of(p)).count() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Decomposition {
    pub fn new(group: Arc<GroupModQ>) -> Result<Self, CongruenceError> {
        if group.primes.len() > MAX_PRIME_FACTORS {
            return Err(CongruenceError::TooManyPrimes(group.q));
        }
        let q = group.q;
        let divisors = divisors(q);
        let mut levels = BTreeMap::new();
        for &d in &divisors {
            let g = if d == q { group.clone() } else { Arc::new(GroupModQ::new(d)?) };
            let reduction = group.reduction_map(&g)?;
            levels.insert(d, Level { group: g, reduction });
        }
        Ok(Decomposition { q, group, divisors, levels })
    }

    pub fn level_group(&self, d: u64) -> Result<Arc<GroupModQ>, CongruenceError> {
        self.levels.get(&d).map(|l| l.group.clone()).ok_or(CongruenceError::ModulusMismatch(self.q, d))
    }

    /// `#F_q / #F_d`.
    pub fn spade(&self, d: u64) -> f64 {
        (sl2_order(self.q) / sl2_order(d)) as f64
    }

    /// Dimension of `E^q_d`: `prod_{p | d} (#SL2(F_p) - 1)`.
    pub fn dimension(&self, d: u64) -> usize {
        self.group
            .primes
            .iter()
            .filter(|&&p| d.is_multiple_of(p))
            .map(|&p| (p * (p * p - 1) - 1) as usize)
            .product()
    }

    fn level(&self, d: u64) -> Result<&Level, CongruenceError> {
        self.levels.get(&d).ok_or(CongruenceError::ModulusMismatch(self.q, d))
    }

    /// Values of `phi` averaged over the fibers of reduction to level `d`,
    /// indexed by `F_d`.
    pub fn push_forward(&self, d: u64, phi: &[Complex64]) -> Result<Vec<Complex64>, CongruenceError> {
        let lvl = self.level(d)?;
        let mut sums = vec![Complex64::new(0.0, 0.0); lvl.group.order()];
        for (v, &r) in phi.iter().zip(&lvl.reduction) {
            sums[r as usize] += v;
        }
        let spade = self.spade(d);
        sums.iter_mut().for_each(|s| *s /= spade);
        Ok(sums)
    }

    /// Orthogonal projection onto functions pulled back from level `d`.
    pub fn average(&self, d: u64, phi: &[Complex64]) -> Result<Vec<Complex64>, CongruenceError> {
        let lvl = self.level(d)?;
        let sums = self.push_forward(d, phi)?;
        Ok(lvl.reduction.iter().map(|&r| sums[r as usize]).collect())
    }

    /// Orthogonal projection onto `E^q_{q'}` by inclusion-exclusion over the
    /// commuting averaging projections.
    pub fn project(&self, q_prime: u64, phi: &[Complex64]) -> Result<Vec<Complex64>, CongruenceError> {
        if !self.q.is_multiple_of(q_prime) {
            return Err(CongruenceError::ModulusMismatch(self.q, q_prime));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
        for &d in self.divisors.iter().filter(|&&d| q_prime.is_multiple_of(d)) {
            let sign = moebius(q_prime / d, &self.group.primes);
            for (o, v) in out.iter_mut().zip(self.average(d, phi)?) {
                *o += sign * v;
            }
        }
        Ok(out)
    }

    /// Dimension table with projector traces `sum_g (e_{q'} delta_g)(g)`.
    pub fn dimension_table(&self) -> Result<Vec<DimensionRow>, CongruenceError> {
        let n = self.group.order();
        let mut rows = Vec::new();
        for &d in &self.divisors {
            let mut trace = 0.0;
            let mut basis = vec![Complex64::new(0.0, 0.0); n];
            for g in 0..n {
                basis[g] = Complex64::new(1.0, 0.0);
                trace += self.project(d, &basis)?[g].re;
                basis[g] = Complex64::new(0.0, 0.0);
            }
            rows.push(DimensionRow { q: self.q, divisor: d, dimension: self.dimension(d), trace });
        }
        Ok(rows)
    }

    /// Largest `|<e_a phi, e_b psi>| / (|phi| |psi|)` over distinct divisors.
    pub fn orthogonality_residual(&self, phis: &[Vec<Complex64>]) -> Result<f64, CongruenceError> {
        let mut worst: f64 = 0.0;
        for phi in phis {
            let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let parts: Vec<Vec<Complex64>> =
                self.divisors.iter().map(|&d| self.project(d, phi)).collect::<Result<_, _>>()?;
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    let ip: Complex64 = parts[i].iter().zip(&parts[j]).map(|(a, b)| a.conj() * b).sum();
                    worst = worst.max(ip.norm() / (norm * norm));
                }
            }
        }
        Ok(worst)
    }

    /// Applies the projection onto `E^q_{q'}` fiberwise.
    pub fn project_function(&self, q_prime: u64, h: &CongruenceFunction) -> Result<CongruenceFunction, CongruenceError> {
        let fibers: Vec<Vec<Complex64>> =
            h.fibers().map(|f| self.project(q_prime, f)).collect::<Result<_, _>>()?;
        Ok(CongruenceFunction::from_fibers(h.q, h.depth, &fibers))
    }
}

/// Result of pushing a function with fibers in `E^q_{q'}` down to level `q'`.
#[derive(Debug, Clone)]
pub struct Projected {
    pub function: CongruenceFunction,
    /// `#F_q / #F_{q'}`.
    pub spade: f64,
    pub norm_q: f64,
    pub norm_q_prime: f64,
    pub lipschitz_q: f64,
    pub lipschitz_q_prime: f64,
}

/// Pushes `h` down to level `q'`. Fibers must be invariant under the kernel
/// of `F_q -> F_{q'}`.
pub fn project_and_scale(
    dec: &Decomposition,
    space: &CylinderSpace,
    masses: &[f64],
    theta: f64,
    h: &CongruenceFunction,
    q_prime: u64,
) -> Result<Projected, CongruenceError> {
    if h.q != dec.q {
        return Err(CongruenceError::ModulusMismatch(h.q, dec.q));
    }
    let mut fibers = Vec::with_capacity(h.num_cylinders());
    for f in h.fibers() {
        let avg = dec.average(q_prime, f)?;
        let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff = f.iter().zip(&avg).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if diff > NEW_SPACE_TOLERANCE * norm.max(1e-300) && diff > 0.0 {
            return Err(CongruenceError::NotInNewSpace(diff / norm));
        }
        fibers.push(dec.push_forward(q_prime, f)?);
    }
    let function = CongruenceFunction::from_fibers(q_prime, h.depth, &fibers);
    Ok(Projected {
        spade: dec.spade(q_prime),
        norm_q: h.l2_norm(masses),
        norm_q_prime: function.l2_norm(masses),
        lipschitz_q: h.lipschitz(space, theta),
        lipschitz_q_prime: function.lipschitz(space, theta),
        function,
    })
}
