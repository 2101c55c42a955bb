//! The example group and its normalized potential, built once per test binary.

use num_complex::Complex64;
use std::sync::OnceLock;
use thinlab_core::chebyshev::ChebyshevGrid;
use thinlab_core::congruence::{CongruenceFunction, Decomposition};
use thinlab_core::geometry::{MarkovModel, SchottkyData};
use thinlab_core::thermo::{critical_exponent, normalize_potential, NormalizedPotential, DEFAULT_A0_PRIME};

pub fn potential() -> &'static NormalizedPotential {
    static P: OnceLock<NormalizedPotential> = OnceLock::new();
    P.get_or_init(|| {
        let model = MarkovModel::build(&SchottkyData::example()).unwrap();
        let grid = ChebyshevGrid::new(&model.intervals, 16);
        let delta = critical_exponent(&model, &grid).unwrap();
        normalize_potential(&model, &grid, delta, 0.0, DEFAULT_A0_PRIME).unwrap()
    })
}

/// Pulls `psi` on `F_d` back to `F_q` along reduction.
pub fn lift(dec: &Decomposition, d: u64, psi: &[Complex64]) -> Vec<Complex64> {
    let coarse = dec.level_group(d).unwrap();
    let red = dec.group.reduction_map(&coarse).unwrap();
    red.iter().map(|&r| psi[r as usize]).collect()
}

pub fn max_diff(a: &CongruenceFunction, b: &CongruenceFunction) -> f64 {
    assert_eq!(a.data.len(), b.data.len());
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
