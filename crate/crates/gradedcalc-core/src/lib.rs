//! Exact symbolic calculus on Z-graded coordinate domains: formal power
//! series in graded coordinates over exact rational-function coefficients,
//! together with domain morphisms, vector fields, differential forms with
//! Cartan calculus and Poincare primitives, and transition-function calculus
//! for graded vector bundles. Everything runs over exact rationals; one sign
//! engine (`grading::epsilon`) drives every product in the crate.

pub mod atlas;
pub mod bundles;
pub mod coeffs;
pub mod fields;
pub mod forms;
pub mod grading;
pub mod morphisms;
pub mod reference;
pub mod series;

mod matrix;
