mod common;

use common::oracles;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;
use thinlab_core::chebyshev::ChebyshevGrid;
use thinlab_core::geometry::{MarkovModel, SchottkyData};
use thinlab_core::thermo::*;

/// Zero of the order-11 Fredholm determinant built from periodic orbits,
/// see `oracles::fredholm_delta`. Orders 10 and 12 agree with it to 5e-14.
const DELTA_ORACLE: f64 = 0.320604444393886;

struct Fixture {
    model: MarkovModel,
    grid: ChebyshevGrid,
    delta: f64,
    pot: NormalizedPotential,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = MarkovModel::build(&SchottkyData::example()).unwrap();
        let grid = ChebyshevGrid::new(&model.intervals, 16);
        let delta = critical_exponent(&model, &grid).unwrap();
        let pot = normalize_potential(&model, &grid, delta, 0.0, DEFAULT_A0_PRIME).unwrap();
        Fixture { model, grid, delta, pot }
    })
}

#[test]
fn oracle_value_is_reproduced_by_the_oracle() {
    let d = oracles::fredholm_delta(&oracles::example_symbols(), 11);
    assert!((d - DELTA_ORACLE).abs() < 1e-13, "{d}");
}

#[test]
fn critical_exponent_matches_periodic_orbit_oracle() {
    let f = fixture();
    assert!((f.delta - DELTA_ORACLE).abs() < 1e-10, "{}", f.delta);
    // the cruder trace-ratio estimate agrees to a few digits
    let ratio = oracles::periodic_orbit_delta(&oracles::example_symbols(), 10);
    assert!((f.delta - ratio).abs() < 1e-3, "{ratio}");
}

#[test]
fn critical_exponent_is_stable_under_degree_doubling() {
    let f = fixture();
    let grid = ChebyshevGrid::new(&f.model.intervals, 32);
    let d32 = critical_exponent(&f.model, &grid).unwrap();
    assert!((d32 - f.delta).abs() < 1e-8);
}

#[test]
fn pressure_decreases_through_zero() {
    let f = fixture();
    let p = |s: f64| pressure(&f.model, &f.grid, s).unwrap();
    // at s = 0 the operator counts transitions: spectral radius 3
    assert!((p(0.0) - 3f64.ln()).abs() < 1e-10);
    assert!(p(f.delta).abs() < 1e-12);
    let samples: Vec<f64> = (0..=10).map(|i| p(i as f64 / 10.0)).collect();
    assert!(samples.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn rpf_data_is_normalized() {
    let f = fixture();
    let r = &f.pot.base;
    assert!((r.lambda - 1.0).abs() < 1e-10);
    let mass: f64 = r.nu.iter().sum();
    let pairing: f64 = r.nu.iter().zip(&r.h).map(|(a, b)| a * b).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!((pairing - 1.0).abs() < 1e-12);
    assert!(r.h.iter().all(|&x| x > 0.0));
    assert!(r.gap > 0.0 && r.gap < 1.0);
    // frozen from this implementation at degree 16; a regression guard
    assert!((r.gap - 0.49657333).abs() < 1e-6, "{}", r.gap);
}

#[test]
fn left_vector_is_invariant() {
    let f = fixture();
    let mat = assemble_real(&f.model, &f.grid, f.delta);
    let nu = &f.pot.base.nu;
    let img = mat.transpose() * nalgebra::DVector::from_column_slice(nu);
    let err = img.iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn normalized_operator_fixes_constants() {
    let f = fixture();
    for k in 0..4 {
        let iv = f.model.intervals[k];
        for i in 0..=8 {
            let u = iv.lo + iv.width() * i as f64 / 8.0;
            let v = f.pot.apply_at(0.0, k, u, |_, _| Complex64::new(1.0, 0.0));
            assert!((v.re - 1.0).abs() < 1e-9 && v.im.abs() < 1e-15, "{v}");
        }
    }
}

#[test]
fn normalized_matrix_has_leading_eigenvalue_one() {
    let f = fixture();
    let mat = assemble_transfer(&f.model, &f.grid, Weighting::Normalized { potential: &f.pot, b: 0.0 });
    let ones = vec![Complex64::new(1.0, 0.0); f.grid.len()];
    let img = &mat * nalgebra::DVector::from_column_slice(&ones);
    assert!(img.iter().all(|z| (z - 1.0).norm() < 1e-9));
}

#[test]
fn constants_are_consistent() {
    let c = fixture().pot.constants;
    assert!((c.theta - 1.0 / 9.0).abs() < 1e-14);
    assert!(c.c_f >= 1.0);
    assert!(c.t0 > 0.0 && c.a_f > 0.0);
    assert!((c.tau_min - 9f64.ln()).abs() < 1e-12);
    assert!(c.tau_max > c.tau_min);
}

#[test]
fn parameter_range_is_enforced() {
    let f = fixture();
    assert!(matches!(f.pot.with_a(0.2), Err(ThermoError::OutOfRange(..))));
    let r = normalize_potential_with_theta(&f.model, &f.grid, f.delta, 0.0, 0.05, Some(0.05));
    assert!(matches!(r, Err(ThermoError::ThetaOutOfRange(..))));
    let raised = normalize_potential_with_theta(&f.model, &f.grid, f.delta, 0.0, 0.05, Some(0.3)).unwrap();
    assert_eq!(raised.constants.theta, 0.3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// `h_a / h_0` is fixed by the operator of `f^(a)`.
    #[test]
    fn shifted_potential_fixes_eigenfunction_ratio(a in -0.05f64..0.05, k in 0usize..4, t in 0.0f64..1.0) {
        let f = fixture();
        let pot = f.pot.with_a(a).unwrap();
        let g = &pot.grid;
        let ratio = |j: usize, x: f64| g.interpolate(j, g.block(&pot.h_a, j), x) / g.interpolate(j, g.block(&pot.base.h, j), x);
        let iv = f.model.intervals[k];
        let u = iv.lo + t * iv.width();
        let v = pot.apply_at(0.0, k, u, |j, x| Complex64::new(ratio(j, x), 0.0));
        prop_assert!((v.re - ratio(k, u)).abs() < 1e-8 * ratio(k, u), "{} vs {}", v.re, ratio(k, u));
    }

    #[test]
    fn twisted_weights_have_real_modulus(b in -50.0f64..50.0, k in 0usize..4, t in 0.0f64..1.0) {
        let f = fixture();
        let iv = f.model.intervals[k];
        let u = iv.lo + t * iv.width();
        for j in f.model.transitions.predecessors(k) {
            let x = f.model.inverse_branch(j, u);
            let w = f.pot.weight(b, j, k, x, u);
            prop_assert!((w.norm() - f.pot.f(j, k, x, u).exp()).abs() < 1e-12);
        }
    }
}
