//! Level-truncated unitary lowest-weight Virasoro modules.
//!
//! Basis: partitions λ label L_{-λ1}⋯L_{-λk} v, levels ascending and
//! reverse-lexicographic inside a level. Each level is orthonormalized with
//! respect to the Shapovalov form after removing null directions, and the
//! generators are stored as real graded blocks in that basis.

mod module;
mod partition;
mod verma;

pub use module::{
    sobolev_norm, sobolev_weights, Block, GradedVector, ModeOp, ModuleData, ModuleParams, DEFAULT_NULLTOL,
};
pub use partition::{enumerate_basis, partition_count, partitions_of, Partition};
pub use verma::{normal_order_reduce, oracle_inner, rational, Combination, Scalar, VermaAction};

use crate::error::Result;

pub fn build_module(params: ModuleParams, nulltol: f64) -> Result<ModuleData> {
    ModuleData::build(params, nulltol)
}

/// Gram matrix of one level in the partition basis, in any coefficient field.
pub fn gram_matrix<S: Scalar>(c: S, h: S, level: usize) -> Vec<Vec<S>> {
    let basis = enumerate_basis(level);
    VermaAction::new(c, h).gram(&basis, level)
}

/// Gram matrix of one level computed entry by entry through the oracle.
pub fn oracle_gram<S: Scalar>(c: &S, h: &S, level: usize) -> Vec<Vec<S>> {
    let labels = partitions_of(level);
    labels
        .iter()
        .map(|lam| labels.iter().map(|mu| oracle_inner(lam, mu, c, h)).collect())
        .collect()
}
