//! Exact-arithmetic engine for effective Breuil-Kisin modules over
//! truncated p-adic power-series rings.
//!
//! The crate computes Nygaard, Hodge and conjugate filtrations of effective
//! Breuil-Kisin modules over R_{N,M} = (Z/p^N)[u]/(u^M), analyses mod-p
//! Smith/Frobenius shape, verifies filtered Sen operators, and checks the
//! vanishing, torsion-bound and multiset-congruence theorems on concrete
//! modules. Everything is exact with explicit precision ledgers; a result
//! never silently depends on coefficients past the recorded window.

pub mod error;
pub mod zmod;
pub mod ring;
pub mod znlin;
pub mod submodule;
pub mod ht;
pub mod fplin;
pub mod bk;
pub mod modp;
pub mod sen;
pub mod format;
pub mod corpus;
pub mod report;
pub mod suite;

pub use bk::{Analysis, BKModule};
pub use error::{Error, Result};
pub use format::ModuleSpec;
pub use modp::ModpBK;
pub use report::{Report, Verdict};
pub use ring::{EisensteinPoly, Flavor, Prec, SeriesElt};
pub use submodule::{GradedInvariants, Submodule};
pub use suite::{run_suite, SuiteKind};
