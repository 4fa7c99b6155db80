//! Verification of strongly nonlocal unextendible product bases in `d x d x d`.
//!
//! The crate builds the layered product-state families, checks
//! orthogonality and unextendibility, solves the orthogonality-preserving
//! measurement (OPM) systems across each bipartite cut, and emits replayable
//! certificates for the triviality argument.

pub mod cli;
pub mod entangle;
pub mod error;
pub mod io;
pub mod report;
pub mod families;
pub mod lemma;
pub mod linalg;
pub mod opm;
pub mod states;
pub mod unextend;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/unextendibility.md")]
    mod unextendibility {}
    #[doc = include_str!("../../../book/src/opm.md")]
    mod opm {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/entanglement.md")]
    mod entanglement {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
