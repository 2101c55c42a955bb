//! Transfer operators on the collocation grid, the Ruelle-Perron-Frobenius
//! data, the critical exponent and the normalized potential.

use crate::chebyshev::ChebyshevGrid;
use crate::geometry::MarkovModel;
use crate::symbolic::{all_words, anchor, eval_point, omega, pullback_orbit, Potential};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 100_000;
/// Default half-width of the admissible range of the real parameter `a`.
pub const DEFAULT_A0_PRIME: f64 = 0.05;
/// Depth of the cylinder anchors used to measure Lipschitz constants.
pub const LIPSCHITZ_SAMPLE_DEPTH: usize = 7;
const MARGIN: f64 = 1.05;

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("pressure root not bracketed: P(0) = {0}, P(1) = {1}")]
    RootNotBracketed(f64, f64),
    #[error("critical exponent {0} is not below 1")]
    NotThin(f64),
    #[error("|a| = {0} exceeds the admissible range {1}")]
    OutOfRange(f64, f64),
    #[error("theta = {0} must lie in [{1}, 1)")]
    ThetaOutOfRange(f64, f64),
    #[error(transparent)]
    Symbolic(#[from] crate::symbolic::SymbolicError),
}

/// How the branch weights of the transfer operator are formed.
#[derive(Clone, Copy)]
pub enum Weighting<'a> {
    /// Weight `exp(xi * tau)`.
    Raw(Complex64),
    /// Weight `exp(f^(a) + i b tau)` of the given normalized potential.
    Normalized { potential: &'a NormalizedPotential, b: f64 },
}

/// Dense collocation matrix of the transfer operator: row `(k, i)` evaluates
/// the image at node `i` of `U_k`.
pub fn assemble_transfer(model: &MarkovModel, grid: &ChebyshevGrid, weighting: Weighting<'_>) -> DMatrix<Complex64> {
    let n = grid.len();
    let m = grid.nodes_per_symbol();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    let mut basis = vec![0.0; m];
    for k in 0..model.num_symbols() {
        for i in 0..m {
            let u = grid.node(k, i);
            let row = grid.index(k, i);
            for j in model.transitions.predecessors(k) {
                let x = model.inverse_branch(j, u);
                let w = match weighting {
                    Weighting::Raw(xi) => (xi * model.roof(j, x)).exp(),
                    Weighting::Normalized { potential, b } => potential.weight(b, j, k, x, u),
                };
                grid.basis(j, x, &mut basis);
                for (l, &bl) in basis.iter().enumerate() {
                    mat[(row, grid.index(j, l))] += w * bl;
                }
            }
        }
    }
    mat
}

/// Real collocation matrix of `L_{-s tau}`.
pub fn assemble_real(model: &MarkovModel, grid: &ChebyshevGrid, s: f64) -> DMatrix<f64> {
    let n = grid.len();
    let m = grid.nodes_per_symbol();
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut basis = vec![0.0; m];
    for k in 0..model.num_symbols() {
        for i in 0..m {
            let u = grid.node(k, i);
            let row = grid.index(k, i);
            for j in model.transitions.predecessors(k) {
                let x = model.inverse_branch(j, u);
                let w = (-s * model.roof(j, x)).exp();
                grid.basis(j, x, &mut basis);
                for (l, &bl) in basis.iter().enumerate() {
                    mat[(row, grid.index(j, l))] += w * bl;
                }
            }
        }
    }
    mat
}

/// Leading eigenpair of a matrix with a simple dominant positive eigenvalue.
pub fn power_iteration(mat: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>), ThermoError> {
    let n = mat.nrows();
    let mut v = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = 0.0;
    for it in 0..max_iter {
        let w = mat * &v;
        let norm = w.iter().map(|x| x.abs()).sum::<f64>();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ThermoError::NoConvergence(it));
        }
        let sign = if w.sum() < 0.0 { -1.0 } else { 1.0 };
        let w = w * (sign / norm);
        let new_lambda = sign * norm / v.iter().map(|x| x.abs()).sum::<f64>();
        let dv = (&w - &v).amax();
        v = w;
        if it > 2 && dv < tol && (new_lambda - lambda).abs() <= tol * new_lambda.abs() {
            return Ok((new_lambda, v.iter().copied().collect()));
        }
        lambda = new_lambda;
    }
    Err(ThermoError::NoConvergence(max_iter))
}

/// Eigenvalues of a real matrix sorted by decreasing modulus.
pub fn dense_spectrum(mat: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = mat.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    ev
}

/// Ruelle-Perron-Frobenius data of `L_{-s tau}` with `s = delta + a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpfData {
    pub s: f64,
    pub lambda: f64,
    /// Positive eigenfunction on the grid, scaled so that `nu(h) = 1`.
    pub h: Vec<f64>,
    /// Eigenfunctional as quadrature weights on the grid, total mass 1.
    pub nu: Vec<f64>,
    /// Modulus of the second eigenvalue.
    pub second: f64,
    /// `|lambda_2| / lambda`.
    pub gap: f64,
}

/// Solves for the leading eigendata of `L_{-s tau}`.
pub fn rpf_solve(model: &MarkovModel, grid: &ChebyshevGrid, s: f64) -> Result<RpfData, ThermoError> {
    let mat = assemble_real(model, grid, s);
    let (lambda, h) = power_iteration(&mat, POWER_TOLERANCE, POWER_MAX_ITERATIONS)?;
    let (_, mut nu) = power_iteration(&mat.transpose(), POWER_TOLERANCE, POWER_MAX_ITERATIONS)?;
    let mass: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|x| *x /= mass);
    let pairing: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
    let h: Vec<f64> = h.iter().map(|x| x / pairing).collect();
    let second = second_eigenvalue(&mat, lambda);
    Ok(RpfData { s, lambda, h, nu, second, gap: second / lambda })
}

fn second_eigenvalue(mat: &DMatrix<f64>, lambda: f64) -> f64 {
    let spectrum = dense_spectrum(mat);
    // drop the eigenvalue closest to lambda, keep the next largest modulus
    let lead = spectrum
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - lambda).norm().total_cmp(&(b.1 - lambda).norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lead)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
}

/// `log lambda(-s tau)`.
pub fn pressure(model: &MarkovModel, grid: &ChebyshevGrid, s: f64) -> Result<f64, ThermoError> {
    let mat = assemble_real(model, grid, s);
    Ok(power_iteration(&mat, POWER_TOLERANCE, POWER_MAX_ITERATIONS)?.0.ln())
}

/// Root of the pressure on `[0, 1]` by bisection.
pub fn critical_exponent(model: &MarkovModel, grid: &ChebyshevGrid) -> Result<f64, ThermoError> {
    let p0 = pressure(model, grid, 0.0)?;
    let p1 = pressure(model, grid, 1.0)?;
    if !(p0 > 0.0 && p1 < 0.0) {
        return Err(ThermoError::RootNotBracketed(p0, p1));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = pressure(model, grid, mid)?;
        if p == 0.0 {
            lo = mid;
            hi = mid;
        } else if p > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    if delta > 1.0 - 1e-6 {
        return Err(ThermoError::NotThin(delta));
    }
    Ok(delta)
}

/// Constants attached to the normalized family `f^(a)`, `|a| <= a0'`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub a0_prime: f64,
    /// `|f^(a) - f^(0)| <= A_f |a|`.
    pub a_f: f64,
    /// `exp(A_f a0')`.
    pub c_f: f64,
    /// Bound on the sup norm plus `d_theta`-Lipschitz seminorm of `tau` and `f^(a)`.
    pub t0: f64,
    pub theta: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

/// The normalized potential
/// `f^(a) = -(a + delta) tau + log h_0 - log h_0 o sigma - log lambda_a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedPotential {
    pub model: MarkovModel,
    pub grid: ChebyshevGrid,
    pub delta: f64,
    pub a: f64,
    pub lambda_a: f64,
    /// Base data at `a = 0`.
    pub base: RpfData,
    /// Eigenfunction of `L_{-(delta + a) tau}`.
    pub h_a: Vec<f64>,
    pub constants: PotentialConstants,
}

impl NormalizedPotential {
    /// `log h_0` at a point `x` of `U_j`.
    pub fn log_h0(&self, j: usize, x: f64) -> f64 {
        self.grid.interpolate(j, self.grid.block(&self.base.h, j), x).ln()
    }

    /// `f^(a)` on the cylinder `[j, k]` at `x`, with `sx = g_j(x)`.
    pub fn f(&self, j: usize, k: usize, x: f64, sx: f64) -> f64 {
        -(self.a + self.delta) * self.model.roof(j, x) + self.log_h0(j, x) - self.log_h0(k, sx)
            - self.lambda_a.ln()
    }

    /// `exp(f^(a) + i b tau)`.
    pub fn weight(&self, b: f64, j: usize, k: usize, x: f64, sx: f64) -> Complex64 {
        Complex64::new(self.f(j, k, x, sx), b * self.model.roof(j, x)).exp()
    }

    /// Same base data with a different real parameter.
    pub fn with_a(&self, a: f64) -> Result<NormalizedPotential, ThermoError> {
        if a.abs() > self.constants.a0_prime {
            return Err(ThermoError::OutOfRange(a, self.constants.a0_prime));
        }
        let rpf = rpf_solve(&self.model, &self.grid, self.delta + a)?;
        Ok(NormalizedPotential { a, lambda_a: rpf.lambda, h_a: rpf.h, ..self.clone() })
    }

    /// `nu_U = h_0 nu_0` as quadrature weights on the grid.
    pub fn nu_u(&self) -> Vec<f64> {
        self.base.nu.iter().zip(&self.base.h).map(|(a, b)| a * b).collect()
    }

    /// Applies the normalized operator at a single point `u` of `U_k` to the
    /// function `h(j, x)` defined on the intervals.
    pub fn apply_at(&self, b: f64, k: usize, u: f64, h: impl Fn(usize, f64) -> Complex64) -> Complex64 {
        self.model
            .transitions
            .predecessors(k)
            .map(|j| {
                let x = self.model.inverse_branch(j, u);
                self.weight(b, j, k, x, u) * h(j, x)
            })
            .sum()
    }
}

impl Potential for NormalizedPotential {
    fn value(&self, j: usize, k: usize, x: f64, sx: f64) -> f64 {
        self.f(j, k, x, sx)
    }
}

/// Builds the normalized potential at parameter `a` together with its constants.
pub fn normalize_potential(
    model: &MarkovModel,
    grid: &ChebyshevGrid,
    delta: f64,
    a: f64,
    a0_prime: f64,
) -> Result<NormalizedPotential, ThermoError> {
    normalize_potential_with_theta(model, grid, delta, a, a0_prime, None)
}

/// As [`normalize_potential`], with the metric parameter `theta` raised from
/// the measured contraction to a given value in `[contraction, 1)`.
pub fn normalize_potential_with_theta(
    model: &MarkovModel,
    grid: &ChebyshevGrid,
    delta: f64,
    a: f64,
    a0_prime: f64,
    theta: Option<f64>,
) -> Result<NormalizedPotential, ThermoError> {
    if a.abs() > a0_prime {
        return Err(ThermoError::OutOfRange(a, a0_prime));
    }
    let contraction = model.contraction();
    let theta = theta.unwrap_or(contraction);
    if !(theta >= contraction && theta < 1.0) {
        return Err(ThermoError::ThetaOutOfRange(theta, contraction));
    }
    let base = rpf_solve(model, grid, delta)?;

    // f^(a) - f^(0) = -a tau - log(lambda_a / lambda_0), and tau ranges over [tau_min, tau_max].
    let mut a_f: f64 = 0.0;
    let mut log_ratio = Vec::new();
    for frac in [-1.0, -0.8, -0.6, -0.4, -0.2, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let aa = frac * a0_prime;
        let l = (rpf_solve(model, grid, delta + aa)?.lambda / base.lambda).ln();
        log_ratio.push((aa, l));
        for t in [model.tau_min, model.tau_max] {
            a_f = a_f.max((t + l / aa).abs());
        }
    }
    a_f *= MARGIN;

    let mut pot = NormalizedPotential {
        model: model.clone(),
        grid: grid.clone(),
        delta,
        a: 0.0,
        lambda_a: base.lambda,
        h_a: base.h.clone(),
        base,
        constants: PotentialConstants {
            a0_prime,
            a_f,
            c_f: (a_f * a0_prime).exp(),
            t0: 0.0,
            theta,
            tau_min: model.tau_min,
            tau_max: model.tau_max,
        },
    };

    // T_0 bounds sup norm plus Lipschitz seminorm of tau and of f^(a) at the
    // extreme parameters, measured over anchors of deep cylinders.
    let words = all_words(&model.transitions, LIPSCHITZ_SAMPLE_DEPTH);
    let mut tau_vals = Vec::with_capacity(words.len());
    let mut f_vals = Vec::with_capacity(words.len());
    for w in &words {
        let base_pt = eval_point(model, &omega(&model.transitions, w.last().expect("non-empty")))?;
        let pts = pullback_orbit(model, &w.0, base_pt);
        let (j, k) = (w.0[0], w.0[1]);
        tau_vals.push(model.roof(j, pts[0]));
        f_vals.push(pot.f(j, k, pts[0], pts[1]));
    }
    let seqs: Vec<&[usize]> = words.iter().map(|w| w.symbols()).collect();
    let mut t0: f64 = 0.0;
    let (s, l) = lipschitz_scalar(&seqs, &tau_vals, theta);
    t0 = t0.max(s + l);
    for &(aa, lr) in log_ratio.iter().filter(|(aa, _)| aa.abs() >= a0_prime) {
        let shifted: Vec<f64> = f_vals.iter().zip(&tau_vals).map(|(f, t)| f - aa * t - lr).collect();
        let (s, l) = lipschitz_scalar(&seqs, &shifted, theta);
        t0 = t0.max(s + l);
    }
    let (s, l) = lipschitz_scalar(&seqs, &f_vals, theta);
    t0 = t0.max(s + l);
    pot.constants.t0 = MARGIN * t0;

    if a != 0.0 {
        pot = pot.with_a(a)?;
    }
    Ok(pot)
}

/// Sup norm and `d_theta`-Lipschitz seminorm of a scalar function given on
/// lexicographically sorted words of equal length.
pub fn lipschitz_scalar(words: &[&[usize]], values: &[f64], theta: f64) -> (f64, f64) {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let depth = words.first().map_or(0, |w| w.len());
    let mut lip: f64 = 0.0;
    for n in 0..depth {
        let scale = theta.powi(n as i32);
        let mut start = 0;
        while start < words.len() {
            let mut end = start + 1;
            while end < words.len() && words[end][..n] == words[start][..n] {
                end += 1;
            }
            // children by symbol at index n, each contiguous
            let mut ranges: Vec<(f64, f64)> = Vec::new();
            let mut c = start;
            while c < end {
                let mut e = c + 1;
                while e < end && words[e][n] == words[c][n] {
                    e += 1;
                }
                let (lo, hi) = values[c..e]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                ranges.push((lo, hi));
                c = e;
            }
            for (i, ri) in ranges.iter().enumerate() {
                for (jj, rj) in ranges.iter().enumerate() {
                    if i != jj {
                        lip = lip.max((ri.1 - rj.0) / scale);
                    }
                }
            }
            start = end;
        }
    }
    (sup, lip)
}

/// Anchor points of all depth-`d` cylinders with the orbit point and its image.
pub fn anchor_points(model: &MarkovModel, d: usize) -> Result<Vec<(Vec<usize>, f64, f64)>, ThermoError> {
    all_words(&model.transitions, d)
        .into_iter()
        .map(|w| {
            let pt = anchor(&model.transitions, &w.0);
            let x = eval_point(model, &pt)?;
            let sx = eval_point(model, &pt.shift())?;
            Ok((w.0, x, sx))
        })
        .collect()
}
