//! Block decomposition of the measure `nu_0` into convolutions of nearly flat
//! pieces, and the resulting flattening estimates.

use super::measures::{build_measures, convolve, convolve_measures, word_sums, FqMeasure};
use super::returns::{build_return_set, cayley_gap};
use super::ExpanderError;
use crate::congruence::{Decomposition, Elem, GroupModQ};
use crate::symbolic::{all_words, eval_point, omega, SymbolicPoint, Word};
use crate::thermo::NormalizedPotential;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Largest group for which the dense singular value check may run.
pub const DENSE_SVD_LIMIT: usize = 2000;
const POWER_STEPS: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatteningConfig {
    pub r_prime: usize,
    pub l: usize,
    pub p: usize,
    /// `(alpha_s, ..., alpha_{r+1})`.
    pub tail: Vec<usize>,
    pub x: SymbolicPoint,
    pub b: f64,
    pub seed: u64,
    /// Dense singular values are computed when `#F_q` is at most this (capped
    /// at [`DENSE_SVD_LIMIT`]).
    pub dense_limit: usize,
}

impl FlatteningConfig {
    pub fn r(&self) -> usize {
        self.r_prime * self.l
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatteningReport {
    pub q: u64,
    pub order: usize,
    pub r: usize,
    pub r_prime: usize,
    pub l: usize,
    pub p: usize,
    pub s: usize,
    /// Sup-norm gap between the convolution form of `nu_1` and its direct sum.
    pub nu1_identity_residual: f64,
    /// `max |log(nu_0 / nu_1)|` over atoms, against `r' C theta^l`.
    pub log_nu_ratio_max: f64,
    pub log_nu_ratio_bound: f64,
    /// `log(max E / min E)` over fill-ins, against `T_0 (theta / (1 - theta) + p)`.
    pub log_flat_ratio_max: f64,
    pub log_flat_bound: f64,
    /// Largest `||eta * phi|| / ||eta||_1` over mean-zero `phi` and all blocks.
    pub eta_ratio_max: f64,
    /// Smallest `1 - c` of the per-block contraction bound.
    pub eta_one_minus_c_min: f64,
    pub epsilon_min: f64,
    pub nu_l1: f64,
    /// `| ||nu * u||_2 - ||nu||_1 / sqrt(#F) |` for the normalized uniform `u`.
    pub uniform_identity_residual: f64,
    /// `||nu * phi|| / ||nu||_1` for a random mean-zero unit `phi`.
    pub nu_ratio: f64,
    /// `||mu * phi|| / ||nu||_1` for a random unit `phi` in `E^q_q`.
    pub mu_ratio: f64,
    pub mu_l2: f64,
    /// Dense singular value check, when the group is small enough.
    pub svd_norm: Option<f64>,
    pub svd_bound: Option<f64>,
    pub min_irrep_dimension: usize,
    pub passed: bool,
}

/// Block data for a fixed choice of the `(l - p)` tails.
struct Blocks<'a> {
    pot: &'a NormalizedPotential,
    group: &'a GroupModQ,
    steps: Vec<Elem>,
    cfg: &'a FlatteningConfig,
    base: f64,
    x0: usize,
}

impl Blocks<'_> {
    /// `alpha_{jl+1}`: last symbol of block `j + 1`'s tail part, or of the outer tail.
    fn successor(&self, bs: &[Vec<usize>], j: usize) -> usize {
        if j == self.cfg.r_prime {
            *self.cfg.tail.last().expect("non-empty tail")
        } else {
            *bs[j].last().expect("non-empty block")
        }
    }

    /// Log weight `log E_j` and the cocycle of block `j` for the fill-in `fill`.
    fn block_term(&self, bs: &[Vec<usize>], j: usize, fill: &[usize]) -> Option<(f64, Elem)> {
        let t = &self.pot.model.transitions;
        let cfg = self.cfg;
        let (l, p) = (cfg.l, cfg.p);
        let bj = &bs[j - 1];
        let next = self.successor(bs, j);
        // full block j: fill-in followed by its tail part
        let mut block: Vec<usize> = fill.to_vec();
        block.extend_from_slice(bj);
        let word = {
            let mut w = vec![next];
            w.extend_from_slice(&block);
            w
        };
        if !Word(word.clone()).is_admissible(t) {
            return None;
        }
        if j == 1 && !t.allowed(*block.last().expect("non-empty"), self.x0) {
            return None;
        }
        // cocycle c^l(alpha_{jl+1}, block): l factors starting at alpha_{jl+1}
        let g = word[..l + 1]
            .windows(2)
            .fold(self.group.identity(), |acc, pair| self.group.mul(acc, self.steps[pair[0]]));
        let log_e = if j == 1 {
            // f_{2l-p} over (B_2, block_1) in front of x
            let mut w: Vec<usize> = if cfg.r_prime >= 2 { bs[1].clone() } else { Vec::new() };
            w.extend_from_slice(&block);
            word_sums(self.pot, &w[..], self.x0, self.base).0
        } else if j < cfg.r_prime {
            // f_l over (B_{j+1}, block_j) continued by omega
            let mut w = bs[j].clone();
            w.extend_from_slice(&block);
            self.prefix_sum(&w, l)
        } else {
            self.prefix_sum(&block, p)
        };
        Some((log_e, g))
    }

    /// Birkhoff sum over the first `k` positions of `w` continued by `omega`.
    fn prefix_sum(&self, w: &[usize], k: usize) -> f64 {
        let t = &self.pot.model.transitions;
        let last = *w.last().expect("non-empty");
        let om = omega(t, last);
        let base = eval_point(&self.pot.model, &om).expect("omega is admissible");
        // pull back through the unsummed suffix, then sum over the first k symbols
        let (_, _, pt) = word_sums(self.pot, &w[k..], om.first(), base);
        word_sums(self.pot, &w[..k], w[k], pt).0
    }
}

/// Runs the flattening pipeline at level `q`.
pub fn flattening_pipeline(
    pot: &NormalizedPotential,
    group: Arc<GroupModQ>,
    cfg: &FlatteningConfig,
) -> Result<FlatteningReport, ExpanderError> {
    let model = &pot.model;
    let t = &model.transitions;
    let (l, p, rp) = (cfg.l, cfg.p, cfg.r_prime);
    if l <= p || rp < 2 {
        return Err(ExpanderError::NoConfiguration(format!("need l > p and r' >= 2 (l={l}, p={p}, r'={rp})")));
    }
    let r = cfg.r();
    let c = pot.constants;
    let theta = c.theta;
    let n_sym = model.num_symbols();
    let nf = group.order();
    let dec = Decomposition::new(group.clone())?;
    let blocks = Blocks {
        pot,
        group: &group,
        steps: model.inverse.iter().map(|g| group.reduce(g)).collect(),
        cfg,
        base: eval_point(model, &cfg.x)?,
        x0: cfg.x.first(),
    };

    let quad = build_measures(pot, cfg.b, &group, &cfg.x, r, &cfg.tail)?;

    // Cayley gaps of S^p(y, z) for every pair, reused across blocks.
    let mut eps: HashMap<(usize, usize), f64> = HashMap::new();
    for y in 0..n_sym {
        for z in 0..n_sym {
            let set = build_return_set(model, y, z, p)?;
            eps.insert((y, z), cayley_gap(&set, &group)?.epsilon);
        }
    }
    let log_c0 = c.t0 * (theta / (1.0 - theta) + p as f64);
    let fills = all_words(t, p);
    let tails = all_words(t, l - p);

    let mut nu1_conv = FqMeasure::zeros(&group);
    let mut nu1_direct = FqMeasure::zeros(&group);
    let mut log_flat_ratio_max: f64 = 0.0;
    let mut eta_ratio_max: f64 = 0.0;
    let mut eta_one_minus_c_min = f64::INFINITY;
    let mut epsilon_min = f64::INFINITY;
    let mut eta_cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // all tuples (B_1, ..., B_{r'}) of (l - p)-blocks
    let mut idx = vec![0usize; rp];
    loop {
        let bs: Vec<Vec<usize>> = idx.iter().map(|&i| tails[i].0.clone()).collect();
        let first_ok = t.allowed(*bs[0].last().expect("non-empty"), blocks.x0);
        if first_ok {
            let mut etas = Vec::with_capacity(rp + 1);
            let alpha1 = *bs[0].last().expect("non-empty");
            etas.push(FqMeasure::dirac(&group, blocks.steps[alpha1]));
            // per block: admissible fill-ins with (log E, cocycle)
            let mut terms: Vec<Vec<(f64, Elem)>> = Vec::with_capacity(rp);
            for j in 1..=rp {
                let tj: Vec<(f64, Elem)> = fills.iter().filter_map(|f| blocks.block_term(&bs, j, &f.0)).collect();
                if tj.is_empty() {
                    break;
                }
                let (lo, hi) = tj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
                log_flat_ratio_max = log_flat_ratio_max.max(hi - lo);
                let mut eta = FqMeasure::zeros(&group);
                for &(e, g) in &tj {
                    eta.add(g, Complex64::new(e.exp(), 0.0));
                }
                let y = blocks.successor(&bs, j);
                let z = bs[j - 1][0];
                let key: Vec<usize> = std::iter::once(j).chain(bs[j - 1].iter().copied()).chain(std::iter::once(y)).collect();
                let ratio = match eta_cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = mean_zero_operator_ratio(&group, &eta, &mut rng)?;
                        eta_cache.insert(key, v);
                        v
                    }
                };
                eta_ratio_max = eta_ratio_max.max(ratio);
                let e = eps[&(y, z)];
                epsilon_min = epsilon_min.min(e);
                // 1 - sqrt(1 - x) with x = eps^2 / (2 C0^2 N^{2p}), computed without cancellation
                let log_x = 2.0 * e.ln() - (2.0f64).ln() - 2.0 * log_c0 - 2.0 * p as f64 * (n_sym as f64).ln();
                let x = log_x.exp();
                eta_one_minus_c_min = eta_one_minus_c_min.min(-(0.5 * (-x).ln_1p()).exp_m1());
                etas.push(eta);
                terms.push(tj);
            }
            if terms.len() == rp {
                let mut acc = etas[0].clone();
                for eta in &etas[1..] {
                    acc = convolve_measures(&group, &acc, eta)?;
                }
                for (o, v) in nu1_conv.weights.iter_mut().zip(&acc.weights) {
                    *o += v;
                }
                // direct sum over all fill-in combinations
                let mut choice = vec![0usize; rp];
                loop {
                    let mut log_w = 0.0;
                    let mut g = etas[0].support().next().expect("dirac").0;
                    for j in 0..rp {
                        let (e, gj) = terms[j][choice[j]];
                        log_w += e;
                        g = group.mul(gj, g);
                    }
                    nu1_direct.add(g, Complex64::new(log_w.exp(), 0.0));
                    if !advance(&mut choice, &terms.iter().map(|v| v.len()).collect::<Vec<_>>()) {
                        break;
                    }
                }
            }
        }
        if !advance(&mut idx, &vec![tails.len(); rp]) {
            break;
        }
    }

    let sup1 = nu1_direct.weights.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let nu1_identity_residual = nu1_conv
        .weights
        .iter()
        .zip(&nu1_direct.weights)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
        / sup1.max(1e-300);
    let mut log_nu_ratio_max: f64 = 0.0;
    for (a, b) in quad.nu0.weights.iter().zip(&nu1_direct.weights) {
        if a.re > 0.0 || b.re > 0.0 {
            log_nu_ratio_max = log_nu_ratio_max.max((a.re / b.re).ln().abs());
        }
    }
    let c_nu = c.t0 * theta.powi(1 - p as i32) / (1.0 - theta);
    let log_nu_ratio_bound = rp as f64 * c_nu * theta.powi(l as i32);

    // convolution estimates
    let nu_l1 = quad.nu.l1();
    let uniform = vec![Complex64::new(1.0 / nf as f64, 0.0); nf];
    let nu_u = convolve(&group, &quad.nu, &uniform)?;
    let nu_u_norm = norm(&nu_u);
    let uniform_identity_residual = (nu_u_norm - nu_l1 / (nf as f64).sqrt()).abs();
    let phi0 = random_unit(&dec, 1, &mut rng)?;
    let phi_new = random_unit(&dec, group.q, &mut rng)?;
    let nu_ratio = norm(&convolve(&group, &quad.nu, &phi0)?) / nu_l1;
    let mu_ratio = norm(&convolve(&group, &quad.mu, &phi_new)?) / nu_l1;
    let d_min = min_new_dimension(&group.primes);
    let (svd_norm, svd_bound) = if nf <= cfg.dense_limit.min(DENSE_SVD_LIMIT) {
        let s = dense_restricted_norm(&group, &dec, &quad.mu)?;
        (Some(s), Some((nf as f64 / d_min as f64).sqrt() * quad.mu.l2()))
    } else {
        (None, None)
    };
    let log_flat_bound = log_c0;
    let passed = nu1_identity_residual <= 1e-10
        && log_nu_ratio_max <= log_nu_ratio_bound
        && log_flat_ratio_max <= log_flat_bound
        && eta_ratio_max < 1.0
        && eta_one_minus_c_min > 0.0
        && svd_norm.zip(svd_bound).is_none_or(|(s, b)| s <= b * (1.0 + 1e-12));
    Ok(FlatteningReport {
        q: group.q,
        order: nf,
        r,
        r_prime: rp,
        l,
        p,
        s: quad.s,
        nu1_identity_residual,
        log_nu_ratio_max,
        log_nu_ratio_bound,
        log_flat_ratio_max,
        log_flat_bound,
        eta_ratio_max,
        eta_one_minus_c_min,
        epsilon_min,
        nu_l1,
        uniform_identity_residual,
        nu_ratio,
        mu_ratio,
        mu_l2: quad.mu.l2(),
        svd_norm,
        svd_bound,
        min_irrep_dimension: d_min,
        passed,
    })
}

/// Odometer increment; false after the last combination.
fn advance(idx: &mut [usize], limits: &[usize]) -> bool {
    for (i, lim) in idx.iter_mut().zip(limits) {
        *i += 1;
        if *i < *lim {
            return true;
        }
        *i = 0;
    }
    false
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest irreducible dimension inside `E^q_q`: `prod (p - 1) / 2`.
pub fn min_new_dimension(primes: &[u64]) -> usize {
    primes.iter().map(|&p| ((p - 1) / 2).max(1) as usize).product()
}

/// Random complex Gaussian unit vector in `E^q_d`.
pub fn random_unit(dec: &Decomposition, d: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>, ExpanderError> {
    let nf = dec.group.order();
    let raw: Vec<Complex64> = (0..nf)
        .map(|_| Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
        .collect();
    // d = 1 means the mean-zero space
    let v = if d == 1 {
        let mean: Complex64 = raw.iter().sum::<Complex64>() / nf as f64;
        raw.iter().map(|z| z - mean).collect()
    } else {
        dec.project(d, &raw)?
    };
    let n = norm(&v);
    Ok(v.into_iter().map(|z| z / n).collect())
}

/// `sum conj(mu(h)) delta_{h^{-1}}`, the adjoint of convolution by `mu`.
fn adjoint(group: &GroupModQ, mu: &FqMeasure) -> FqMeasure {
    let mut out = FqMeasure::zeros(group);
    for (h, w) in mu.support() {
        out.add(group.inv(h), w.conj());
    }
    out
}

/// Operator norm of `phi -> mu * phi` on the range of the projection `proj`.
fn operator_norm_on(
    group: &GroupModQ,
    mu: &FqMeasure,
    proj: impl Fn(&[Complex64]) -> Vec<Complex64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ExpanderError> {
    let nf = group.order();
    let adj = adjoint(group, mu);
    let mut v: Vec<Complex64> = proj(
        &(0..nf)
            .map(|_| Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
            .collect::<Vec<_>>(),
    );
    let mut sigma = 0.0;
    for _ in 0..POWER_STEPS {
        let n = norm(&v);
        if n == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|z| *z /= n);
        let w = convolve(group, mu, &v)?;
        sigma = norm(&w);
        v = proj(&convolve(group, &adj, &w)?);
    }
    Ok(sigma)
}

fn mean_zero_operator_ratio(group: &GroupModQ, eta: &FqMeasure, rng: &mut ChaCha8Rng) -> Result<f64, ExpanderError> {
    let nf = group.order() as f64;
    let op = operator_norm_on(
        group,
        eta,
        |v| {
            let mean: Complex64 = v.iter().sum::<Complex64>() / nf;
            v.iter().map(|z| z - mean).collect()
        },
        rng,
    )?;
    Ok(op / eta.l1())
}

/// Largest singular value of convolution by `mu` restricted to `E^q_q`.
fn dense_restricted_norm(group: &GroupModQ, dec: &Decomposition, mu: &FqMeasure) -> Result<f64, ExpanderError> {
    let nf = group.order();
    let mut k = DMatrix::<Complex64>::zeros(nf, nf);
    for (h, w) in mu.support() {
        let hinv = group.inv(h);
        for g in 0..nf {
            k[(g, group.mul(g as Elem, hinv) as usize)] += w;
        }
    }
    let mut proj = DMatrix::<Complex64>::zeros(nf, nf);
    let mut e = vec![Complex64::new(0.0, 0.0); nf];
    for g in 0..nf {
        e[g] = Complex64::new(1.0, 0.0);
        let col = dec.project(group.q, &e)?;
        for (i, v) in col.into_iter().enumerate() {
            proj[(i, g)] = v;
        }
        e[g] = Complex64::new(0.0, 0.0);
    }
    let restricted = k * proj;
    Ok(restricted.singular_values().iter().copied().fold(0.0, f64::max))
}
