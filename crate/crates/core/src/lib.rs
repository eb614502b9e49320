//! Non-commutative majorization: spectra of compressions onto block
//! algebras, Schubert-calculus feasibility tests, and explicit witnesses.

pub mod algebra;
pub mod decision;
pub mod error;
pub mod exec;
pub mod hermitian;
pub mod klyachko;
pub mod majorization;
pub mod nc_schur_horn;
pub mod oracle;

pub use decision::{Certificate, Decision, Verdict};
pub use error::{Error, Result};
pub use exec::Execution;

/// Partition, duality and admissibility conventions plus default
/// tolerances; stamped on memo files and verdicts.
pub const CONVENTIONS_VERSION: &str =
    "ncmaj-1;partition=(n-r)+j-i_j;dual=n+1-i_(r+1-j);admissible=cup-product;tol=hermitian:1e-12,eig:1e-10,witness:1e-9,psd:1e-9,majorization:1e-9";
