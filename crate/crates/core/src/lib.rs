//! Canonical Lindblad-type form of time-local master equations.
//!
//! Any time-local generator `ρ̇ = Λ_t[ρ]` can be rewritten as
//!
//! ```text
//! ρ̇ = −i[H(t), ρ] + Σ_k γ_k(t) ( L_k ρ L_k† − ½{L_k† L_k, ρ} )
//! ```
//!
//! with traceless, Hilbert–Schmidt orthonormal `L_k` and real (possibly
//! negative) rates `γ_k`. The rates are unique: they are the eigenvalues of
//! the decoherence matrix obtained by expanding the generator in an
//! orthonormal Hermitian operator basis. Negative rates signal
//! non-Markovian evolution, and the [`measures`] module turns them into
//! time series and integrated measures.
//!
//! Module map:
//!
//! * [`basis`]: generalized Gell-Mann basis, Hilbert–Schmidt inner product,
//!   column-stacking vectorization.
//! * [`generator`]: transfer matrices from Lindblad or raw `A ρ B†` terms,
//!   coefficient-matrix extraction and the Hamiltonian/dissipator split.
//! * [`canonical`]: Hermitian Jacobi eigensolver, canonicalization and
//!   reassembly.
//! * [`dynamics`]: generators from sampled dynamical maps, invertibility
//!   diagnostics, memory-kernel propagation.
//! * [`measures`]: branch-tracked rate series and non-Markovianity measures.
//! * [`expr`], [`models`], [`pipeline`]: rate expressions, model zoo and
//!   the config-driven pipeline used by the command line tool.

// `!(a > b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod canonical;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod generator;
pub mod linalg;
pub mod measures;
pub mod models;
pub mod pipeline;
pub mod policy;
#[cfg(test)]
mod testutil;

pub use basis::{hs_inner, unvec, vec, HSVector, OperatorBasis, State};
pub use canonical::{
    assemble, canonicalize, canonicalize_with, compare_canonical, hermitian_eig, CanonicalForm,
    Channel, EigenDecomposition,
};
pub use dynamics::{
    generator_from_maps, invertibility_report, propagate_memory_kernel, InvertibilityReport,
    MapFamily, MemoryKernel, MemoryKernelSpec, TimeGrid,
};
pub use error::{Error, ErrorClass, Result};
pub use generator::{
    extract_c, split, transfer_from_lindblad, transfer_from_terms, CMatrix, GeneratorTerms,
    LindbladTerms, SplitGenerator, TransferMatrix,
};
pub use linalg::{CMat, C64};
pub use measures::{
    canonical_series, f_of, integrated_f, nm_index, single_channel_equivalents, FnSource,
    GeneratorSource, MeasureReport, RateSeries,
};
pub use policy::NumericPolicy;
