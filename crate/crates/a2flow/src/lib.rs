//! Symbolic combinatorics of 2-associahedra and their fiber products over
//! associahedra, desk-scale flow categories in a C0/Morse setting, and exact
//! verification of the curved A-infinity and (A-infinity,2) equations by
//! Novikov counting.
//!
//! Everything is exact: energies are rationals, coefficients live in the
//! two-element field, and all identities are checked with tolerance zero.

pub mod flowcat;
pub mod flowio;
pub mod gen;
pub mod linearize;
pub mod novikov;
pub mod onecat;
pub mod rat;
pub mod shapes;
pub mod trees;
pub mod wpoly;

pub use novikov::{nov_count, Energy, EnergyCap, NovElem};
pub use rat::Rat;
