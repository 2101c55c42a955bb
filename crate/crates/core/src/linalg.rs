//! Small dense and Krylov helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest eigenvalue of a symmetric operator restricted to the orthogonal
/// complement of the constants, by Lanczos with full reorthogonalization.
pub fn top_eigenvalue_mean_zero(n: usize, apply: impl Fn(&[f64], &mut [f64]), steps: usize, seed: u64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let k = steps.min(n - 1).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let project = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for b in basis {
            let c: f64 = b.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    };
    project(&mut v, &basis);
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut alpha = Vec::with_capacity(k);
    let mut beta: Vec<f64> = Vec::with_capacity(k);
    let mut w = vec![0.0; n];
    for i in 0..k {
        apply(&v, &mut w);
        let a = dot(&v, &w);
        alpha.push(a);
        basis.push(v.clone());
        let mut r = w.clone();
        // full reorthogonalization, twice for stability
        project(&mut r, &basis);
        project(&mut r, &basis);
        let b = dot(&r, &r).sqrt();
        if i + 1 == k || b < 1e-12 {
            break;
        }
        beta.push(b);
        v = r.into_iter().map(|x| x / b).collect();
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
