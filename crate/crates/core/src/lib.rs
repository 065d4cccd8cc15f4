//! Branched rough paths on finite grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`forest`]: labeled rooted trees and forests in canonical form.
//! * [`hopf`]: coproduct, reduced coproduct, shuffles, `q_γ` and related
//!   combinatorial identities, all in exact integer arithmetic.
//! * [`increments`]: grids, 2- and 3-increments, Hölder norms and the
//!   discrete sewing map.
//! * [`brp`]: tree-indexed iterated integrals, extension, correction of
//!   almost rough paths and a deterministic non-geometric example.
//! * [`controlled`]: controlled paths, composition, rough integration and a
//!   Picard solver for rough differential equations.
//! * [`bseries`]: elementary differentials and tree-series steps.

pub mod brp;
pub mod bseries;
pub mod controlled;
pub mod error;
pub mod forest;
pub mod hopf;
pub mod increments;
pub mod io;
pub mod quadrature;

pub use error::{Error, Result};
pub use forest::{Forest, Label, Tree};
