//! Return sets `S^p(y, z)`, generation of `SL2(Z/q)` and Cayley spectra.

use super::ExpanderError;
use crate::congruence::{Elem, GroupModQ};
use crate::geometry::{MarkovModel, MobiusMap};
use crate::linalg::top_eigenvalue_mean_zero;
use crate::symbolic::{cocycle_product, for_each_word};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

/// Largest number of paths enumerated for one return set.
pub const MAX_RETURN_WORDS: u128 = 4096;
/// Groups up to this order use a dense eigensolver for the Cayley spectrum.
const DENSE_LIMIT: usize = 600;
const LANCZOS_STEPS: usize = 200;

/// `S^p(y, z) = { c(alpha) c(alpha~)^{-1} }` over admissible paths `alpha`,
/// `alpha~` of `p + 1` transitions from `y` to `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub y: usize,
    pub z: usize,
    pub p: usize,
    pub elements: Vec<MobiusMap>,
}

pub fn build_return_set(model: &MarkovModel, y: usize, z: usize, p: usize) -> Result<ReturnSet, ExpanderError> {
    let count = model.transitions.power_counts(p + 1)[y][z];
    if count > MAX_RETURN_WORDS {
        return Err(ExpanderError::EnumerationTooLarge(count));
    }
    let mut products = Vec::new();
    let mut failure = None;
    for_each_word(&model.transitions, y, z, p + 1, |w| match cocycle_product(model, w) {
        Ok(m) => products.push(m),
        Err(e) => failure = Some(e),
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let mut set = BTreeSet::new();
    for a in &products {
        for b in &products {
            let e = a.checked_mul(&b.inverse()).map_err(|_| ExpanderError::EnumerationTooLarge(count))?;
            set.insert((e.a, e.b, e.c, e.d));
        }
    }
    Ok(ReturnSet { y, z, p, elements: set.into_iter().map(|(a, b, c, d)| MobiusMap::new(a, b, c, d)).collect() })
}

/// Distinct reductions of a return set.
pub fn reduce_set(set: &ReturnSet, group: &GroupModQ) -> Vec<Elem> {
    let s: BTreeSet<Elem> = set.elements.iter().map(|m| group.reduce(m)).collect();
    s.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationCertificate {
    pub q: u64,
    pub generated: bool,
    pub closure_size: usize,
    /// Largest word length needed to reach an element of the closure.
    pub diameter: usize,
}

/// Breadth-first closure of the reduced return set.
pub fn generates_full(set: &ReturnSet, group: &GroupModQ) -> GenerationCertificate {
    let gens = reduce_set(set, group);
    let n = group.order();
    let mut dist = vec![usize::MAX; n];
    let id = group.identity();
    dist[id as usize] = 0;
    let mut queue = VecDeque::from([id]);
    let mut diameter = 0;
    let mut size = 1;
    while let Some(g) = queue.pop_front() {
        let dg = dist[g as usize];
        for &h in &gens {
            let k = group.mul(g, h);
            if dist[k as usize] == usize::MAX {
                dist[k as usize] = dg + 1;
                diameter = diameter.max(dg + 1);
                size += 1;
                queue.push_back(k);
            }
        }
    }
    GenerationCertificate { q: group.q, generated: size == n, closure_size: size, diameter }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CayleySpectrum {
    pub q: u64,
    pub y: usize,
    pub z: usize,
    pub p: usize,
    /// `#S_q`, the eigenvalue on constants.
    pub lambda1: f64,
    /// Largest eigenvalue on the orthogonal complement of the constants.
    pub lambda2: f64,
    /// `1 - lambda2 / lambda1`.
    pub epsilon: f64,
}

/// Permutations `g -> g h^{-1}` for the adjacency `A phi = sum_h delta_h * phi`.
pub fn adjacency_perms(gens: &[Elem], group: &GroupModQ) -> Vec<Vec<Elem>> {
    gens.iter().map(|&h| group.right_mul_perm(group.inv(h))).collect()
}

/// Spectral gap of the Cayley graph of `SL2(Z/q)` with respect to `S_q`.
pub fn cayley_gap(set: &ReturnSet, group: &GroupModQ) -> Result<CayleySpectrum, ExpanderError> {
    let cert = generates_full(set, group);
    if !cert.generated {
        return Err(ExpanderError::NotGenerating(group.q, cert.closure_size));
    }
    let gens = reduce_set(set, group);
    let perms = adjacency_perms(&gens, group);
    let lambda2 = second_eigenvalue(group.order(), &perms);
    let lambda1 = gens.len() as f64;
    Ok(CayleySpectrum {
        q: group.q,
        y: set.y,
        z: set.z,
        p: set.p,
        lambda1,
        lambda2,
        epsilon: 1.0 - lambda2 / lambda1,
    })
}

/// Largest eigenvalue on mean-zero functions of `sum_h P_h`, `P_h phi(g) = phi(perm_h[g])`.
pub fn second_eigenvalue(n: usize, perms: &[Vec<Elem>]) -> f64 {
    if n <= DENSE_LIMIT {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for perm in perms {
            for (g, &k) in perm.iter().enumerate() {
                a[(g, k as usize)] += 1.0;
            }
        }
        // the constant eigenvector carries the largest eigenvalue exactly once
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        return ev.get(1).copied().unwrap_or(0.0);
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for perm in perms {
            for (o, &k) in out.iter_mut().zip(perm) {
                *o += v[k as usize];
            }
        }
    };
    top_eigenvalue_mean_zero(n, apply, LANCZOS_STEPS, 0x5eed)
}

/// Smallest level `p` at which every return set generates, and the primes
/// where generation fails even at the largest tested level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDetection {
    pub p: Option<usize>,
    pub bad_primes: Vec<u64>,
    pub tested_primes: Vec<u64>,
    pub max_level: usize,
}

impl LevelDetection {
    /// Product of the exceptional primes.
    pub fn q0(&self) -> u64 {
        self.bad_primes.iter().product()
    }

    /// Whether `q` avoids every exceptional prime.
    pub fn admissible(&self, q: u64) -> bool {
        self.bad_primes.iter().all(|p| !q.is_multiple_of(*p))
    }
}

/// Detects the exceptional primes among `primes` and the smallest generating level.
pub fn detect_level(model: &MarkovModel, primes: &[u64], max_level: usize) -> Result<LevelDetection, ExpanderError> {
    let n = model.num_symbols();
    let groups: Vec<GroupModQ> = primes.iter().map(|&p| GroupModQ::new(p)).collect::<Result<_, _>>()?;
    let all_generate = |p: usize, g: &GroupModQ| -> Result<bool, ExpanderError> {
        for y in 0..n {
            for z in 0..n {
                if !generates_full(&build_return_set(model, y, z, p)?, g).generated {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let mut bad_primes = Vec::new();
    for (g, &p) in groups.iter().zip(primes) {
        if !all_generate(max_level, g)? {
            bad_primes.push(p);
        }
    }
    let mut level = None;
    'levels: for p in 0..=max_level {
        for (g, prime) in groups.iter().zip(primes) {
            if !bad_primes.contains(prime) && !all_generate(p, g)? {
                continue 'levels;
            }
        }
        level = Some(p);
        break;
    }
    Ok(LevelDetection { p: level, bad_primes, tested_primes: primes.to_vec(), max_level })
}

/// Irreducible-block dimensions of the regular representation, read off as
/// eigenvalue multiplicities of a random self-adjoint convolution operator.
/// Each eigenvalue of `rho(X)` appears `dim rho` times, so the smallest
/// cluster other than the trivial one is the smallest nontrivial dimension.
pub fn min_irrep_dimension(group: &GroupModQ, seed: u64) -> usize {
    let n = group.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for h in 0..n {
        x[h] += coeffs[h];
        x[group.inv(h as Elem) as usize] += coeffs[h].conj();
    }
    // (X * phi)(g) = sum_h X(h) phi(g h^{-1})
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for h in 0..n {
        let hinv = group.inv(h as Elem);
        for g in 0..n {
            k[(g, group.mul(g as Elem, hinv) as usize)] += x[h];
        }
    }
    let trivial: Complex64 = x.iter().sum();
    let mut ev: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * scale;
    let mut min = usize::MAX;
    let mut start = 0;
    while start < ev.len() {
        let mut end = start + 1;
        while end < ev.len() && ev[end] - ev[end - 1] < tol {
            end += 1;
        }
        let is_trivial = end - start == 1 && (ev[start] - trivial.re).abs() < tol;
        if !is_trivial {
            min = min.min(end - start);
        }
        start = end;
    }
    min
}
