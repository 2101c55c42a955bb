//! Numerical laboratory for Schottky subgroups of SL2(Z): Markov coding,
//! transfer operators, congruence towers, expander gaps and spectral decay.

pub mod chebyshev;
pub mod congruence;
pub mod expander;
pub mod geometry;
pub mod linalg;
pub mod spectral;
pub mod symbolic;
pub mod thermo;
