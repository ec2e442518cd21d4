//! Numerical laboratory for quadratic images of product measures.
//!
//! The crate discretizes Frostman-type probability measures on an interval,
//! pushes product measures forward under quadratic polynomials in three
//! variables, and measures the resulting L² concentration through smoothed
//! energies, coincidence counts, and δ-incidence counts between product
//! point sets and planar lines. A scan harness runs these quantities down a
//! dyadic δ-ladder and fits log-log slopes against conjectured exponents.

pub mod constructions;
pub mod energy;
pub mod harness;
pub mod incidence;
pub mod kernel;
pub mod measure;
pub mod quadpoly;
