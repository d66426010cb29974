//! The functional θ whose population mean E[θ(L)] is the estimand.

use crate::error::{Error, Result};

/// Supported mean functionals.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    /// θ(L) = Σ_j a_j L_j.
    Linear(Vec<f64>),
    /// θ(L) = L_j; shorthand for a coordinate basis vector.
    Coordinate(usize),
    /// θ(L) = I(L_j <= c).
    Indicator { col: usize, threshold: f64 },
}

impl Functional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Functional::Linear(a) => a.iter().zip(x).map(|(ai, xi)| ai * xi).sum(),
            Functional::Coordinate(j) => x[*j],
            Functional::Indicator { col, threshold } => {
                if x[*col] <= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Linear coefficient vector when θ is linear in L, None otherwise.
    pub fn linear_coefficients(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            Functional::Linear(a) if a.len() == d => Some(a.clone()),
            Functional::Linear(_) => None,
            Functional::Coordinate(j) if *j < d => {
                let mut a = vec![0.0; d];
                a[*j] = 1.0;
                Some(a)
            }
            _ => None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Functional::Linear(a) if a.len() != d => Err(Error::UnsupportedFunctional(format!(
                "linear coefficients have length {}, data has d={d}",
                a.len()
            ))),
            Functional::Coordinate(j) if *j >= d => {
                Err(Error::UnsupportedFunctional(format!("coordinate {j} out of range for d={d}")))
            }
            Functional::Indicator { col, .. } if *col >= d => {
                Err(Error::UnsupportedFunctional(format!("indicator column {col} out of range for d={d}")))
            }
            _ => Ok(()),
        }
    }
}
