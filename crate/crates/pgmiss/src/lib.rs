//! Pattern-graph identifying restrictions for nonmonotone missing data.
//!
//! A pattern graph places response patterns on the nodes of a DAG rooted at
//! the fully observed pattern and ties each pattern's selection odds (or,
//! equivalently, its extrapolation density) to its parents. This crate
//! provides the graph algebra, selection-odds and pattern-mixture model
//! fitting, IPW / regression-adjustment / augmented-IPW estimation of mean
//! functionals, bootstrap confidence intervals, three sensitivity-analysis
//! sweeps, and a seeded simulation harness with exact discrete oracles for
//! the identification results.

pub mod data;
pub mod error;
pub mod functional;
pub mod golden;
pub mod graph;
pub mod imputation;
pub mod mvn;
pub mod odds;
pub mod propensity;

pub use error::{Error, Result};
