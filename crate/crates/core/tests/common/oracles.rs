//! Reference computations that do not go through the library's numerics.

/// Integer 2x2 matrix `[a, b, c, d]`.
pub type Mat = [i128; 4];

pub fn mul(x: &Mat, y: &Mat) -> Mat {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

pub fn inv(x: &Mat) -> Mat {
    [x[3], -x[1], -x[2], x[0]]
}

/// Symbol matrices `g_1, g_1^{-1}, g_2, g_2^{-1}` of the example group.
pub fn example_symbols() -> Vec<Mat> {
    let a = [2, 3, 1, 2];
    let b = [6, 35, 1, 6];
    vec![a, inv(&a), b, inv(&b)]
}

/// Calls `f` with the trace of the product along every admissible cyclic word
/// of length `n` in the no-backtracking shift over `syms`.
pub fn for_each_cyclic_trace(syms: &[Mat], n: usize, f: &mut impl FnMut(i128)) {
    fn rec(syms: &[Mat], n: usize, word: &mut Vec<usize>, acc: Mat, f: &mut impl FnMut(i128)) {
        if word.len() == n {
            if word[n - 1] ^ 1 != word[0] {
                f(acc[0] + acc[3]);
            }
            return;
        }
        for s in 0..syms.len() {
            if let Some(&p) = word.last() {
                if s == p ^ 1 {
                    continue;
                }
            }
            word.push(s);
            rec(syms, n, word, mul(&acc, &syms[s]), f);
            word.pop();
        }
    }
    rec(syms, n, &mut Vec::new(), [1, 0, 0, 1], f);
}

/// Traces of all closed orbits of length `n`.
pub fn cyclic_traces(syms: &[Mat], n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for_each_cyclic_trace(syms, n, &mut |t| out.push(t as f64));
    out
}

/// Ruelle trace `tr L_s^n = sum kappa^{-2s} / (1 - kappa^{-2})` over periodic
/// orbits, where `kappa` is the larger eigenvalue of the orbit matrix.
pub fn ruelle_trace(traces: &[f64], s: f64) -> f64 {
    traces
        .iter()
        .map(|&t| {
            let t = t.abs();
            let kappa = 0.5 * (t + (t * t - 4.0).sqrt());
            let k2 = kappa * kappa;
            k2.powf(-s) / (1.0 - 1.0 / k2)
        })
        .sum()
}

/// Critical exponent from periodic orbits: the root of
/// `tr L_s^n / tr L_s^{n-1} = 1`.
pub fn periodic_orbit_delta(syms: &[Mat], n: usize) -> f64 {
    let hi_tr = cyclic_traces(syms, n);
    let lo_tr = cyclic_traces(syms, n - 1);
    let g = |s: f64| (ruelle_trace(&hi_tr, s) / ruelle_trace(&lo_tr, s)).ln();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `#SL2(Z/q)` by brute-force enumeration of all matrices mod `q`.
pub fn sl2_order_brute(q: u64) -> usize {
    let mut count = 0;
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    if (a * d + q * q - (b * c) % (q * q)) % q == 1 % q {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Critical exponent as the zero of the dynamical Fredholm determinant
/// `det(1 - L_s)`, expanded to order `n` from periodic-orbit traces.
pub fn fredholm_delta(syms: &[Mat], n: usize) -> f64 {
    let traces: Vec<Vec<f64>> = (1..=n).map(|k| cyclic_traces(syms, k)).collect();
    let det = |s: f64| {
        let t: Vec<f64> = traces.iter().map(|tr| ruelle_trace(tr, s)).collect();
        let mut d = vec![1.0];
        for k in 1..=n {
            let v: f64 = (1..=k).map(|j| t[j - 1] * d[k - j]).sum::<f64>() / k as f64;
            d.push(-v);
        }
        d.iter().sum::<f64>()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let dlo = det(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if det(mid).signum() == dlo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All elements of `SL2(Z/q)` as `[a, b, c, d]` with entries in `0..q`.
pub fn sl2_elements(q: i128) -> Vec<Mat> {
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    if (a * d - b * c).rem_euclid(q) == 1 % q {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// Second largest eigenvalue of the Cayley graph of `SL2(Z/q)` for the
/// symmetric multiset `gens`, from a dense symmetric eigensolve.
pub fn cayley_lambda2(q: i128, gens: &[Mat]) -> f64 {
    let elems = sl2_elements(q);
    let index: std::collections::HashMap<Mat, usize> = elems.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let n = elems.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, g) in elems.iter().enumerate() {
        for s in gens {
            let h = mul(g, s).map(|v| v.rem_euclid(q));
            a[(i, index[&h])] += 1.0;
        }
    }
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev[1]
}
