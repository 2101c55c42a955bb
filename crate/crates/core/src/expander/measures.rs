//! Complex measures on `F_q`, the measures attached to a tail word, and the
//! approximation of the iterated congruence operator by convolutions.

use super::ExpanderError;
use crate::congruence::{cocycle_mod, CongruenceFunction, CylinderSpace, Elem, GroupModQ};
use crate::symbolic::{eval_point, omega, SymbolicPoint, Word};
use crate::thermo::NormalizedPotential;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Largest supported `s - r`.
pub const MAX_TAIL: usize = 8;

/// A complex measure on `SL2(Z/q)`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct FqMeasure {
    pub q: u64,
    pub weights: Vec<Complex64>,
}

impl FqMeasure {
    pub fn zeros(group: &GroupModQ) -> Self {
        FqMeasure { q: group.q, weights: vec![Complex64::new(0.0, 0.0); group.order()] }
    }

    pub fn dirac(group: &GroupModQ, g: Elem) -> Self {
        let mut m = Self::zeros(group);
        m.weights[g as usize] = Complex64::new(1.0, 0.0);
        m
    }

    pub fn add(&mut self, g: Elem, w: Complex64) {
        self.weights[g as usize] += w;
    }

    pub fn l1(&self) -> f64 {
        self.weights.iter().map(|z| z.norm()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.weights.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> Complex64 {
        self.weights.iter().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = (Elem, Complex64)> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| w.norm() > 0.0).map(|(g, &w)| (g as Elem, w))
    }

    pub fn scaled(&self, s: f64) -> Self {
        FqMeasure { q: self.q, weights: self.weights.iter().map(|w| w * s).collect() }
    }
}

/// `(mu * phi)(g) = sum_h mu(h) phi(g h^{-1})`.
pub fn convolve(group: &GroupModQ, mu: &FqMeasure, phi: &[Complex64]) -> Result<Vec<Complex64>, ExpanderError> {
    if mu.q != group.q || phi.len() != group.order() {
        return Err(ExpanderError::ModulusMismatch(mu.q, group.q));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
    for (h, w) in mu.support() {
        let hinv = group.inv(h);
        for (g, o) in out.iter_mut().enumerate() {
            *o += w * phi[group.mul(g as Elem, hinv) as usize];
        }
    }
    Ok(out)
}

/// `mu1 * mu2 = sum mu1(h) mu2(k) delta_{kh}`, so that
/// `(mu1 * mu2) * phi = mu1 * (mu2 * phi)`.
pub fn convolve_measures(group: &GroupModQ, m1: &FqMeasure, m2: &FqMeasure) -> Result<FqMeasure, ExpanderError> {
    if m1.q != group.q || m2.q != group.q {
        return Err(ExpanderError::ModulusMismatch(m1.q, m2.q));
    }
    let mut out = FqMeasure::zeros(group);
    let s2: Vec<(Elem, Complex64)> = m2.support().collect();
    for (h, w1) in m1.support() {
        for &(k, w2) in &s2 {
            out.add(group.mul(k, h), w1 * w2);
        }
    }
    Ok(out)
}

/// The measures attached to a tail `(alpha_s, ..., alpha_{r+1})` at a point `x`.
#[derive(Debug, Clone)]
pub struct MeasureQuad {
    pub r: usize,
    pub s: usize,
    pub tail: Vec<usize>,
    /// `sum exp((f_s + i b tau_s)(alpha^s, x)) delta_{c^{r+1}}`.
    pub mu: FqMeasure,
    /// `sum exp(f_r(alpha^r, x)) delta_{c^{r+1}}`.
    pub nu0: FqMeasure,
    /// `sum exp(f_s(alpha^s, x)) delta_{c^{r+1}}`.
    pub mu_hat: FqMeasure,
    /// `exp(f_{s-r}(tail, omega)) nu0`.
    pub nu: FqMeasure,
}

/// Extremal atomwise ratios between the measures of a [`MeasureQuad`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeasureRatios {
    /// `max |mu| / mu_hat`.
    pub mu_over_hat: f64,
    /// `min` and `max` of `mu_hat / nu`.
    pub hat_over_nu_min: f64,
    pub hat_over_nu_max: f64,
}

impl MeasureQuad {
    pub fn ratios(&self) -> MeasureRatios {
        let mut r = MeasureRatios { mu_over_hat: 0.0, hat_over_nu_min: f64::INFINITY, hat_over_nu_max: 0.0 };
        for ((m, h), n) in self.mu.weights.iter().zip(&self.mu_hat.weights).zip(&self.nu.weights) {
            if h.re > 0.0 {
                r.mu_over_hat = r.mu_over_hat.max(m.norm() / h.re);
            }
            if n.re > 0.0 {
                let t = h.re / n.re;
                r.hat_over_nu_min = r.hat_over_nu_min.min(t);
                r.hat_over_nu_max = r.hat_over_nu_max.max(t);
            }
        }
        r
    }
}

/// Birkhoff sum of the potential over `word` placed in front of a point
/// `base` of `U_next`; returns the sum of `f`, the sum of `tau` and the
/// pulled-back point.
pub(crate) fn word_sums(pot: &NormalizedPotential, word: &[usize], next: usize, base: f64) -> (f64, f64, f64) {
    let mut p = base;
    let mut nxt = next;
    let (mut f, mut tau) = (0.0, 0.0);
    for &j in word.iter().rev() {
        let x = pot.model.inverse_branch(j, p);
        f += pot.f(j, nxt, x, p);
        tau += pot.model.roof(j, x);
        p = x;
        nxt = j;
    }
    (f, tau, p)
}

/// Visits every admissible `alpha^r = (alpha_r, ..., alpha_1)` in front of `x`
/// with `f_r`, `tau_r`, the pulled-back point, the leading symbol and the
/// cocycle `c^r(alpha^r, x)` mod `q`.
pub(crate) fn for_each_prefix(
    pot: &NormalizedPotential,
    group: &GroupModQ,
    steps: &[Elem],
    x0: usize,
    base: f64,
    r: usize,
    visit: &mut impl FnMut(&[usize], f64, f64, f64, Elem),
) {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        pot: &NormalizedPotential,
        group: &GroupModQ,
        steps: &[Elem],
        remaining: usize,
        next: usize,
        point: f64,
        f: f64,
        tau: f64,
        g: Elem,
        word: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize], f64, f64, f64, Elem),
    ) {
        if remaining == 0 {
            visit(word, f, tau, point, g);
            return;
        }
        for j in pot.model.transitions.predecessors(next) {
            let xj = pot.model.inverse_branch(j, point);
            let fj = pot.f(j, next, xj, point);
            let tj = pot.model.roof(j, xj);
            word.insert(0, j);
            rec(pot, group, steps, remaining - 1, j, xj, f + fj, tau + tj, group.mul(steps[j], g), word, visit);
            word.remove(0);
        }
    }
    let mut word = Vec::with_capacity(r);
    rec(pot, group, steps, r, x0, base, 0.0, 0.0, group.identity(), &mut word, visit);
}

/// Builds `mu`, `nu0`, `mu_hat` and `nu` for the tail `(alpha_s, ..., alpha_{r+1})`.
pub fn build_measures(
    pot: &NormalizedPotential,
    b: f64,
    group: &GroupModQ,
    x: &SymbolicPoint,
    r: usize,
    tail: &[usize],
) -> Result<MeasureQuad, ExpanderError> {
    let t = &pot.model.transitions;
    if tail.is_empty() || !Word(tail.to_vec()).is_admissible(t) {
        return Err(ExpanderError::NoConfiguration(format!("tail {}", Word(tail.to_vec()))));
    }
    let base = eval_point(&pot.model, x)?;
    let steps: Vec<Elem> = pot.model.inverse.iter().map(|g| group.reduce(g)).collect();
    let last = *tail.last().expect("non-empty");
    let mut quad = MeasureQuad {
        r,
        s: r + tail.len(),
        tail: tail.to_vec(),
        mu: FqMeasure::zeros(group),
        nu0: FqMeasure::zeros(group),
        mu_hat: FqMeasure::zeros(group),
        nu: FqMeasure::zeros(group),
    };
    let om = omega(t, last);
    let (f_om, _, _) = word_sums(pot, tail, om.first(), eval_point(&pot.model, &om)?);
    let scale_nu = f_om.exp();
    for_each_prefix(pot, group, &steps, x.first(), base, r, &mut |word, f, tau, point, g| {
        let lead = word.first().copied().unwrap_or(x.first());
        if !t.allowed(last, lead) {
            return;
        }
        let atom = group.mul(steps[last], g);
        let (ft, taut, _) = word_sums(pot, tail, lead, point);
        quad.mu.add(atom, Complex64::new(f + ft, b * (tau + taut)).exp());
        quad.nu0.add(atom, Complex64::new(f.exp(), 0.0));
        quad.mu_hat.add(atom, Complex64::new((f + ft).exp(), 0.0));
        quad.nu.add(atom, Complex64::new(f.exp() * scale_nu, 0.0));
    });
    Ok(quad)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ApproxReport {
    pub r: usize,
    pub s: usize,
    pub residual: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Compares `M^s H(x)` with `sum_tails mu_tail * phi_tail`.
#[allow(clippy::too_many_arguments)]
pub fn approx_transfer_check(
    pot: &NormalizedPotential,
    b: f64,
    group: &GroupModQ,
    space: &CylinderSpace,
    h: &CongruenceFunction,
    lipschitz: f64,
    x: &SymbolicPoint,
    r: usize,
    s: usize,
) -> Result<ApproxReport, ExpanderError> {
    if s <= r || s - r > MAX_TAIL {
        return Err(ExpanderError::StepRange(s.saturating_sub(r)));
    }
    if h.depth < s {
        return Err(ExpanderError::DepthExhausted(h.depth, s));
    }
    if h.q != group.q {
        return Err(ExpanderError::ModulusMismatch(h.q, group.q));
    }
    let t = &pot.model.transitions;
    let nf = group.order();
    let d = space.depth;
    let base = eval_point(&pot.model, x)?;
    let steps: Vec<Elem> = pot.model.inverse.iter().map(|g| group.reduce(g)).collect();
    let x_prefix = x.prefix(d);

    // exact side
    let mut exact = vec![Complex64::new(0.0, 0.0); nf];
    let mut missing = false;
    for_each_prefix(pot, group, &steps, x.first(), base, s, &mut |word, f, tau, _, g| {
        let mut seq = word.to_vec();
        seq.extend_from_slice(&x_prefix);
        let Some(cyl) = space.locate(&seq) else {
            missing = true;
            return;
        };
        let w = Complex64::new(f, b * tau).exp();
        let fib = h.fiber(cyl);
        let ginv = group.inv(g);
        for (k, o) in exact.iter_mut().enumerate() {
            *o += w * fib[group.mul(k as Elem, ginv) as usize];
        }
    });
    if missing {
        return Err(ExpanderError::NoConfiguration("sequence outside the cylinder space".into()));
    }

    // convolution side
    let mut approx = vec![Complex64::new(0.0, 0.0); nf];
    for tail in crate::symbolic::all_words(t, s - r) {
        let last = tail.last().expect("non-empty");
        let quad = build_measures(pot, b, group, x, r, &tail.0)?;
        if quad.mu.l1() == 0.0 {
            continue;
        }
        let om = omega(t, last);
        let mut seq = tail.0.clone();
        seq.extend(om.prefix(d));
        let cyl = space
            .locate(&seq)
            .ok_or_else(|| ExpanderError::NoConfiguration("tail cylinder".into()))?;
        let cb = cocycle_mod(&pot.model, &tail.0, group)?;
        let cbinv = group.inv(cb);
        let fib = h.fiber(cyl);
        let phi: Vec<Complex64> = (0..nf).map(|k| fib[group.mul(k as Elem, cbinv) as usize]).collect();
        for (o, v) in approx.iter_mut().zip(super::measures::convolve(group, &quad.mu, &phi)?) {
            *o += v;
        }
    }
    let residual = exact.iter().zip(&approx).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let c = &pot.constants;
    let bound = c.c_f * lipschitz * c.theta.powi((s - r) as i32);
    Ok(ApproxReport { r, s, residual, bound, ratio: if bound > 0.0 { residual / bound } else { 0.0 } })
}
