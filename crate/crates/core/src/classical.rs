//! Classical baseline kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel inputs",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearKernel;

impl Kernel for LinearKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        dot(a, b)
    }

    fn name(&self) -> String {
        "linear".into()
    }
}

/// `exp(-gamma ||a - b||^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub gamma: f64,
}

impl RbfKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("RBF gamma {gamma} must be positive")));
        }
        Ok(Self { gamma })
    }

    /// `gamma = 1 / d`.
    pub fn for_dim(d: usize) -> Result<Self> {
        Self::new(1.0 / d.max(1) as f64)
    }
}

impl Kernel for RbfKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "kernel inputs",
                expected: a.len(),
                actual: b.len(),
            });
        }
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        Ok((-self.gamma * d2).exp())
    }

    fn name(&self) -> String {
        format!("rbf(gamma={})", self.gamma)
    }
}

/// `(a . b + coef)^degree`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialKernel {
    pub degree: u32,
    pub coef: f64,
}

impl PolynomialKernel {
    pub fn new(degree: u32, coef: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("polynomial degree must be at least 1".into()));
        }
        if !coef.is_finite() {
            return Err(Error::InvalidParameter(format!("polynomial coef {coef} is not finite")));
        }
        Ok(Self { degree, coef })
    }
}

impl Kernel for PolynomialKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok((dot(a, b)? + self.coef).powi(self.degree as i32))
    }

    fn name(&self) -> String {
        format!("polynomial(degree={}, coef={})", self.degree, self.coef)
    }
}
