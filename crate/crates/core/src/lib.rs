//! Tangential de Rham calculus on flat foliated tori, reduced leafwise
//! cohomology through harmonic forms, regularization of currents, and
//! numerical checks of dynamical Lefschetz and coincidence formulas.

pub mod coincidence;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod forms;
pub mod hodge;
pub mod lattice;
mod linalg;
pub mod models;
pub mod regularization;
pub mod runner;

pub use error::{Error, Result};
pub use forms::{FormJson, LatticeMode, MultiIndex, TangentialForm};
pub use lattice::{IntMatrix, RationalPoint};
pub use models::{
    check_foliated_map, check_transversal_submanifolds, h_factor, make_torus_model, AffineFoliatedMap,
    FoliatedTorusModel, LinearSubtorus, Model, ModelDescription, SuspensionModel,
};
