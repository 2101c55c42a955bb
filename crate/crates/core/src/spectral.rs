//! Decay experiments for the congruence transfer operators at small
//! frequencies and spectral radius estimates for the twisted base operator.

use crate::chebyshev::ChebyshevGrid;
use crate::congruence::{
    BranchWeights, CongruenceError, CongruenceFunction, CongruenceOperator, CylinderSpace, Decomposition, GroupModQ,
};
use crate::expander::{build_return_set, generates_full, ExpanderError};
use crate::linalg::slope;
use crate::symbolic::{d_theta, eval_point, SymbolicError, SymbolicPoint, Word};
use crate::thermo::{assemble_transfer, NormalizedPotential, PotentialConstants, ThermoError, Weighting};
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Default tested decay exponent.
pub const DEFAULT_KAPPA: f64 = 0.05;
/// Largest number of operator applications in one decay run.
pub const MAX_STEPS: usize = 400;
/// Norms below this fraction of the initial norm are treated as round-off.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("frequency |b| = {0} outside the small-frequency regime")]
    FrequencyRange(f64),
    #[error("return set does not generate SL2(Z/{0})")]
    NotGenerating(u64),
    #[error("{0} operator applications exceed the budget of {1}")]
    BudgetExceeded(usize, usize),
    #[error("input function vanishes")]
    ZeroInput,
    #[error("eigenvalue computation failed")]
    Eigen,
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error(transparent)]
    Expander(#[from] ExpanderError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// `C_1 = (1 + b0) (T_0 theta / (1 - theta)) exp(T_0 theta / (1 - theta))`.
pub fn small_b_constant(c: &PotentialConstants, b0: f64) -> f64 {
    let t = c.t0 * c.theta / (1.0 - c.theta);
    (1.0 + b0) * t * t.exp()
}

/// Step counts `r_q`, `s_q` for one modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub q: u64,
    pub r: usize,
    pub s: usize,
    pub c0: f64,
    pub l: usize,
    pub c1: f64,
    pub c_f: f64,
    /// `s / log N(q)`.
    pub c_s: f64,
    pub kappa: f64,
}

impl DecaySchedule {
    /// Smallest multiple of `l` that is at least `C_0 log N(q)`, followed by
    /// the fewest extra steps with `4 C_1 C_f theta^(s - r) <= N(q)^{-1}`.
    pub fn new(q: u64, l: usize, c0: f64, constants: &PotentialConstants, b0: f64, kappa: f64) -> Self {
        let log_n = (q as f64).ln();
        let c1 = small_b_constant(constants, b0);
        let r = l * (c0 * log_n / l as f64).ceil() as usize;
        let need = (4.0 * c1 * constants.c_f * q as f64).ln() / (1.0 / constants.theta).ln();
        let mut gap = need.ceil().max(1.0) as usize;
        // guard the float comparison itself
        while 4.0 * c1 * constants.c_f * constants.theta.powi(gap as i32) > 1.0 / q as f64 {
            gap += 1;
        }
        let s = r + gap;
        let c_s = if q > 1 { s as f64 / log_n } else { f64::INFINITY };
        DecaySchedule { q, r, s, c0, l, c1, c_f: constants.c_f, c_s, kappa }
    }

    /// Both schedule conditions.
    pub fn is_valid(&self, theta: f64) -> bool {
        let target = self.c0 * (self.q as f64).ln();
        self.r.is_multiple_of(self.l)
            && self.r as f64 >= target
            && (self.r as f64) < target + self.l as f64
            && 4.0 * self.c1 * self.c_f * theta.powi((self.s - self.r) as i32) <= 1.0 / self.q as f64
    }
}

/// `|1 - exp(S(alpha, y) - S(alpha, x))| / d_theta(x, y)` with
/// `S = f_s^(a) + i b tau_s`.
pub fn small_b_distortion(
    pot: &NormalizedPotential,
    b: f64,
    alpha: &[usize],
    x: &SymbolicPoint,
    y: &SymbolicPoint,
) -> Result<f64, SpectralError> {
    let t = &pot.model.transitions;
    let theta = pot.constants.theta;
    let d = d_theta(x, y, theta);
    if d == 0.0 {
        return Ok(0.0);
    }
    let check = |p: &SymbolicPoint| -> Result<f64, SpectralError> {
        let mut w = alpha.to_vec();
        w.push(p.first());
        if !Word(w).is_admissible(t) {
            return Err(SymbolicError::InadmissibleWord(Word(alpha.to_vec())).into());
        }
        Ok(eval_point(&pot.model, p)?)
    };
    let (bx, by) = (check(x)?, check(y)?);
    let (fx, tx, _) = crate::expander::measures::word_sums(pot, alpha, x.first(), bx);
    let (fy, ty, _) = crate::expander::measures::word_sums(pot, alpha, y.first(), by);
    let z = Complex64::new(fy - fx, b * (ty - tx)).exp();
    Ok((Complex64::new(1.0, 0.0) - z).norm() / d)
}

/// How random test functions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    /// Independent Gaussian fibers per cylinder.
    Cylinderwise,
    /// Gaussian fibers times Legendre-type polynomials of the anchor
    /// coordinate, of degree at most 2, separately on each interval.
    Smooth,
    /// The same vector on every cylinder.
    FiberConstant,
}

/// Shared data for decay runs: the base potential, cylinder space and masses.
#[derive(Debug, Clone)]
pub struct DecaySetup {
    pub pot: NormalizedPotential,
    pub space: Arc<CylinderSpace>,
    /// Cylinder masses of the invariant measure.
    pub masses: Vec<f64>,
    /// Return-set level used to certify generation.
    pub level: usize,
}

impl DecaySetup {
    pub fn new(pot: NormalizedPotential, depth: usize, level: usize) -> Result<Self, SpectralError> {
        let space = Arc::new(CylinderSpace::new(&pot.model, depth)?);
        let base = BranchWeights::new(space.clone(), &pot.with_a(0.0)?, 0.0);
        let masses = base.invariant_masses()?;
        Ok(DecaySetup { pot, space, masses, level })
    }

    /// Random input at level `q` with fibers in `E^q_q`, scaled so that
    /// `||H||_inf + Lip(H) = 1`. At `q = 1` the mean against the masses is removed.
    pub fn random_input(&self, group: &Arc<GroupModQ>, kind: InputKind, seed: u64) -> Result<CongruenceFunction, SpectralError> {
        let dec = Decomposition::new(group.clone())?;
        let nf = group.order();
        let q = group.q;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = || -> Vec<Complex64> {
            let raw: Vec<Complex64> = (0..nf)
                .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            dec.project(q, &raw).expect("q divides itself")
        };
        let space = &self.space;
        let n = space.len();
        let fibers: Vec<Vec<Complex64>> = match kind {
            InputKind::Cylinderwise => (0..n).map(|_| gauss()).collect(),
            InputKind::FiberConstant => {
                let v = gauss();
                vec![v; n]
            }
            InputKind::Smooth => {
                let coeffs: Vec<[Vec<Complex64>; 3]> =
                    (0..space.num_symbols).map(|_| [gauss(), gauss(), gauss()]).collect();
                (0..n)
                    .map(|w| {
                        let j = space.words[w][0];
                        let iv = self.pot.model.intervals[j];
                        let t = (space.anchors[w] - iv.center()) / iv.half_width();
                        let p = [1.0, t, 1.5 * t * t - 0.5];
                        (0..nf).map(|g| (0..3).map(|k| coeffs[j][k][g] * p[k]).sum()).collect()
                    })
                    .collect()
            }
        };
        let mut h = CongruenceFunction::from_fibers(q, space.depth, &fibers);
        if q == 1 && kind != InputKind::FiberConstant {
            let mean: Complex64 = h.data.iter().zip(&self.masses).map(|(v, m)| v * m).sum();
            h.data.iter_mut().for_each(|v| *v -= mean);
        }
        let norm = h.sup_norm() + h.lipschitz(space, self.pot.constants.theta);
        if norm == 0.0 {
            return Err(SpectralError::ZeroInput);
        }
        h.scale(1.0 / norm);
        Ok(h)
    }

    /// Congruence operator at `(a, b)` and level `q`.
    pub fn operator(&self, a: f64, b: f64, group: Arc<GroupModQ>) -> Result<CongruenceOperator, SpectralError> {
        let pot = self.pot.with_a(a)?;
        let weights = Arc::new(BranchWeights::new(self.space.clone(), &pot, b));
        Ok(CongruenceOperator::new(&self.pot.model, weights, group))
    }

    /// Certifies that `S^level(y, z)` generates `SL2(Z/q)` for every pair.
    pub fn certify(&self, group: &GroupModQ) -> Result<(), SpectralError> {
        let n = self.pot.model.num_symbols();
        for y in 0..n {
            for z in 0..n {
                let set = build_return_set(&self.pot.model, y, z, self.level)?;
                if !generates_full(&set, group).generated {
                    return Err(SpectralError::NotGenerating(group.q));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayConfig {
    pub q: u64,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    pub input: InputKind,
    /// Number of blocks of `s_q` steps.
    pub blocks: usize,
    pub kappa: f64,
    pub c0: f64,
    pub l: usize,
    pub b0: f64,
}

impl DecayConfig {
    pub fn new(q: u64, a: f64, b: f64, seed: u64) -> Self {
        DecayConfig { q, a, b, seed, input: InputKind::Smooth, blocks: 4, kappa: DEFAULT_KAPPA, c0: 1.0, l: 4, b0: 1.0 }
    }
}

/// Norms along the orbit `M^k H`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCurve {
    pub config: DecayConfig,
    pub schedule: DecaySchedule,
    /// `||H||_inf + Lip(H)`.
    pub lip_norm: f64,
    /// Mass-weighted norms after `k` steps, `k = 0..=blocks * s`.
    pub norms: Vec<f64>,
    /// Norms with every cylinder given equal weight.
    pub norms_uniform: Vec<f64>,
    /// `(j, ||M^{j s} H||_2, N(q)^{-j kappa} ||H||_Lip)`.
    pub blocks: Vec<(usize, f64, f64)>,
    /// Fitted contraction per single step.
    pub rate: f64,
    /// Largest one-step growth `||M^{k+1} H|| / ||M^k H||`.
    pub max_step_ratio: f64,
    /// `N exp(T_0)`.
    pub step_bound: f64,
    pub passed: bool,
}

/// Iterates the congruence operator on a random new-vector input.
pub fn decay_small_b(setup: &DecaySetup, cfg: &DecayConfig) -> Result<DecayCurve, SpectralError> {
    if cfg.b.abs() > cfg.b0 {
        return Err(SpectralError::FrequencyRange(cfg.b));
    }
    let group = Arc::new(GroupModQ::new(cfg.q)?);
    if cfg.q > 1 {
        setup.certify(&group)?;
    }
    let consts = setup.pot.constants;
    let schedule = DecaySchedule::new(cfg.q, cfg.l, cfg.c0, &consts, cfg.b0, cfg.kappa);
    let total = cfg.blocks * schedule.s;
    if total > MAX_STEPS {
        return Err(SpectralError::BudgetExceeded(total, MAX_STEPS));
    }
    let op = setup.operator(cfg.a, cfg.b, group.clone())?;
    let h0 = setup.random_input(&group, cfg.input, cfg.seed)?;
    let lip_norm = h0.sup_norm() + h0.lipschitz(&setup.space, consts.theta);
    let mut h = h0;
    let mut norms = vec![h.l2_norm(&setup.masses)];
    let mut norms_uniform = vec![h.l2_norm_uniform()];
    for _ in 0..total {
        h = op.apply(&h)?;
        norms.push(h.l2_norm(&setup.masses));
        norms_uniform.push(h.l2_norm_uniform());
    }
    let n_q = cfg.q as f64;
    let blocks: Vec<(usize, f64, f64)> = (0..=cfg.blocks)
        .map(|j| (j, norms[j * schedule.s], n_q.powf(-(j as f64) * cfg.kappa) * lip_norm))
        .collect();
    let rate = fitted_rate(&norms, schedule.s.min(norms.len() / 2));
    let max_step_ratio = norms
        .windows(2)
        .filter(|w| w[0] > NOISE_FLOOR * norms[0])
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    let step_bound = op.norm_bound(consts.t0);
    let passed = blocks.iter().all(|&(_, n, bound)| n <= bound) && max_step_ratio <= step_bound;
    Ok(DecayCurve {
        config: cfg.clone(),
        schedule,
        lip_norm,
        norms,
        norms_uniform,
        blocks,
        rate,
        max_step_ratio,
        step_bound,
        passed,
    })
}

/// `exp` of the least-squares slope of `log norms[k]` for `k >= skip`, stopping
/// at the round-off floor.
pub fn fitted_rate(norms: &[f64], skip: usize) -> f64 {
    let floor = NOISE_FLOOR * norms.first().copied().unwrap_or(0.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .enumerate()
        .skip(skip)
        .take_while(|(_, &n)| n > floor)
        .map(|(k, &n)| (k as f64, n.ln()))
        .unzip();
    if xs.len() < 2 {
        return 0.0;
    }
    slope(&xs, &ys).exp()
}

/// Sup norm and Lipschitz ratios after `s_q` steps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SupLipRatios {
    pub q: u64,
    pub s: usize,
    /// `||M^s H||_inf / (||H||_inf + Lip(H))`.
    pub ratio_sup: f64,
    /// `Lip(M^s H) / (||H||_inf + Lip(H))`.
    pub ratio_lip: f64,
    /// `N(q)^{-kappa} / 2`.
    pub bound: f64,
}

/// Applies `s_q` steps once and compares sup norm and Lipschitz seminorm.
pub fn supnorm_lipschitz_check(
    setup: &DecaySetup,
    cfg: &DecayConfig,
    h: Option<&CongruenceFunction>,
) -> Result<SupLipRatios, SpectralError> {
    let group = Arc::new(GroupModQ::new(cfg.q)?);
    let consts = setup.pot.constants;
    let schedule = DecaySchedule::new(cfg.q, cfg.l, cfg.c0, &consts, cfg.b0, cfg.kappa);
    let h = match h {
        Some(h) => h.clone(),
        None => setup.random_input(&group, cfg.input, cfg.seed)?,
    };
    let bound = 0.5 * (cfg.q as f64).powf(-cfg.kappa);
    let denom = h.sup_norm() + h.lipschitz(&setup.space, consts.theta);
    if denom == 0.0 {
        return Ok(SupLipRatios { q: cfg.q, s: schedule.s, ratio_sup: 0.0, ratio_lip: 0.0, bound });
    }
    let op = setup.operator(cfg.a, cfg.b, group)?;
    let out = op.apply_k(&h, schedule.s)?;
    Ok(SupLipRatios {
        q: cfg.q,
        s: schedule.s,
        ratio_sup: out.sup_norm() / denom,
        ratio_lip: out.lipschitz(&setup.space, consts.theta) / denom,
        bound,
    })
}

/// Spectral radius estimates for the twisted base operator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwistReport {
    pub b: f64,
    pub degree: usize,
    pub k_max: usize,
    /// Growth rate of `||L^k H||` over the second half of the iteration.
    pub radius: f64,
    /// Largest eigenvalue modulus of the collocation matrix, excluding the
    /// eigenvalue 1 at `b = 0`.
    pub dense_radius: f64,
    /// `||H||_{1,b}` of the input before scaling.
    pub input_norm: f64,
}

/// `||H||_inf + |H|_{C^1} / max(1, |b|)` with the derivative replaced by
/// difference quotients between neighbouring nodes.
pub fn norm_1b(grid: &ChebyshevGrid, h: &[Complex64], b: f64) -> f64 {
    let sup = h.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut c1: f64 = 0.0;
    for j in 0..grid.num_symbols() {
        let nodes = grid.nodes(j);
        let block = grid.block(h, j);
        for i in 1..nodes.len() {
            c1 = c1.max((block[i] - block[i - 1]).norm() / (nodes[i] - nodes[i - 1]).abs());
        }
    }
    sup + c1 / b.abs().max(1.0)
}

/// Estimates the spectral radius of `L_{f^(a) + i b tau}` at `q = 1` from
/// the growth of a random real input.
pub fn twisted_radius(
    pot: &NormalizedPotential,
    b: f64,
    degree: usize,
    k_max: usize,
    seed: u64,
) -> Result<TwistReport, SpectralError> {
    let grid = ChebyshevGrid::new(&pot.model.intervals, degree);
    let mat = assemble_transfer(&pot.model, &grid, Weighting::Normalized { potential: pot, b });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // smooth real input: low-degree polynomial per interval
    let coeffs: Vec<[f64; 3]> = (0..grid.num_symbols())
        .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
        .collect();
    let mut h: Vec<Complex64> = grid.sample(|j, x| {
        let iv = pot.model.intervals[j];
        let t = (x - iv.center()) / iv.half_width();
        Complex64::new(coeffs[j][0] + coeffs[j][1] * t + coeffs[j][2] * (1.5 * t * t - 0.5), 0.0)
    });
    let untwisted = b == 0.0;
    let left = if untwisted { Some(left_fixed_vector(&mat)?) } else { None };
    let deflate = |v: &mut Vec<Complex64>| {
        if let Some(l) = &left {
            let c: Complex64 = l.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<Complex64>()
                / l.iter().sum::<Complex64>();
            v.iter_mut().for_each(|z| *z -= c);
        }
    };
    deflate(&mut h);
    let input_norm = norm_1b(&grid, &h, b);
    h.iter_mut().for_each(|z| *z /= input_norm);
    let mut logs = Vec::with_capacity(k_max);
    let mut v = nalgebra::DVector::from_vec(h);
    for _ in 0..k_max {
        let mut w = &mat * &v;
        let mut wv: Vec<Complex64> = w.iter().copied().collect();
        deflate(&mut wv);
        w = nalgebra::DVector::from_vec(wv);
        let growth = w.norm() / v.norm();
        logs.push(growth.ln());
        let nw = w.norm();
        v = w / Complex64::new(nw, 0.0);
    }
    let half = &logs[k_max / 2..];
    let radius = (half.iter().sum::<f64>() / half.len() as f64).exp();
    let mut moduli: Vec<f64> = Schur::new(mat).eigenvalues().ok_or(SpectralError::Eigen)?.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let dense_radius = if untwisted { moduli.get(1).copied().unwrap_or(0.0) } else { moduli[0] };
    Ok(TwistReport { b, degree, k_max, radius, dense_radius, input_norm })
}

/// Left eigenvector for the eigenvalue 1 of a normalized collocation matrix.
fn left_fixed_vector(mat: &DMatrix<Complex64>) -> Result<Vec<Complex64>, SpectralError> {
    let t = mat.transpose();
    let n = t.nrows();
    let mut v = nalgebra::DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    for _ in 0..10_000 {
        let mut w = &t * &v;
        let scale = w.sum();
        w /= scale;
        let diff = (&w - &v).norm();
        v = w;
        if diff < 1e-14 * v.norm() {
            return Ok(v.iter().copied().collect());
        }
    }
    Err(SpectralError::Thermo(ThermoError::NoConvergence(10_000)))
}
