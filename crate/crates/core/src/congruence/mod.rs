//! Congruence towers: `SL2(Z/q)`, the transfer operator with values in
//! `L^2(SL2(Z/q))`, and the new-vector decomposition.

pub mod cylinder;
pub mod decomposition;
pub mod group;

pub use cylinder::{BranchWeights, CongruenceFunction, CongruenceOperator, CylinderSpace, DEFAULT_DEPTH};
pub use decomposition::{project_and_scale, Decomposition, DimensionRow, Projected};
pub use group::{Elem, GroupModQ};

use crate::geometry::MarkovModel;
use crate::symbolic::{SymbolicError, Word};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CongruenceError {
    #[error("modulus {0} is not square-free")]
    NotSquareFree(u64),
    #[error("SL2(Z/{0}) has {1} elements, above the supported limit")]
    TooLarge(u64, u128),
    #[error("prime {0} divides the exceptional modulus")]
    BadPrime(u64),
    #[error("more than three prime factors in {0}")]
    TooManyPrimes(u64),
    #[error("inadmissible word {0}")]
    InadmissibleWord(Word),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
    #[error("cylinder depth {0} is too shallow")]
    DepthExhausted(usize),
    #[error("fiber is not invariant under the reduction kernel (relative residual {0})")]
    NotInNewSpace(f64),
    #[error("iteration did not converge")]
    NoConvergence,
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Cocycle product along an admissible word of `k + 1` symbols, reduced mod `q`.
pub fn cocycle_mod(model: &MarkovModel, word: &[usize], group: &GroupModQ) -> Result<Elem, CongruenceError> {
    if !Word(word.to_vec()).is_admissible(&model.transitions) {
        return Err(CongruenceError::InadmissibleWord(Word(word.to_vec())));
    }
    let steps: Vec<Elem> = model.inverse.iter().map(|g| group.reduce(g)).collect();
    Ok(word.windows(2).fold(group.identity(), |acc, pair| group.mul(acc, steps[pair[0]])))
}
