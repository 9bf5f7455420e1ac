//! Homogeneous degree-0 multipliers.
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Multiplier {
    /// `xi_j / |xi|` with `axis` zero-based.
    Riesz { axis: usize },
    ConstantOne,
    /// `tanh(kappa * xi_1 / |xi|) / tanh(kappa)`: a smoothed sign of the first coordinate.
    HalfSpaceSign { kappa: f64 },
}

impl Multiplier {
    pub fn riesz(axis: usize) -> Self {
        Multiplier::Riesz { axis }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Multiplier::Riesz { axis } if axis >= n => Err(Error::InvalidParameter(format!(
                "riesz axis {axis} out of range for dimension {n}"
            ))),
            Multiplier::HalfSpaceSign { kappa } if !(kappa > 0.0 && kappa.is_finite()) => {
                Err(Error::InvalidParameter(format!("half-space kappa must be positive, got {kappa}")))
            }
            _ => Ok(()),
        }
    }

    /// `m(xi)`; the origin is a singularity for every non-constant choice.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        if let Multiplier::ConstantOne = self {
            return Ok(1.0);
        }
        let r2: f64 = xi.iter().map(|t| t * t).sum();
        if r2 == 0.0 {
            return Err(Error::MultiplierSingularity);
        }
        let r = r2.sqrt();
        Ok(match *self {
            Multiplier::Riesz { axis } => xi[axis] / r,
            Multiplier::HalfSpaceSign { kappa } => (kappa * xi[0] / r).tanh() / kappa.tanh(),
            Multiplier::ConstantOne => unreachable!(),
        })
    }

    /// `m(xi)` with the removable origin mapped to 0.
    pub fn eval_or_zero(&self, xi: &[f64]) -> f64 {
        self.eval(xi).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn values() {
        assert_eq!(Multiplier::riesz(0).eval(&[3.0, 4.0]).unwrap(), 0.6);
        assert_eq!(Multiplier::riesz(1).eval(&[3.0, 4.0]).unwrap(), 0.8);
        assert_eq!(Multiplier::ConstantOne.eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(
            Multiplier::riesz(0).eval(&[0.0, 0.0]),
            Err(Error::MultiplierSingularity)
        ));
        let h = Multiplier::HalfSpaceSign { kappa: 3.0 };
        assert!((h.eval(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((h.eval(&[-1.0, 0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(h.eval(&[0.0, 2.0]).unwrap(), 0.0);
        assert!(Multiplier::riesz(2).validate(2).is_err());
        assert!(Multiplier::HalfSpaceSign { kappa: 0.0 }.validate(2).is_err());
    }

    #[test]
    fn serde_form() {
        let m: Multiplier = serde_json::from_str(r#"{"kind":"riesz","axis":0}"#).unwrap();
        assert_eq!(m, Multiplier::riesz(0));
        let m: Multiplier = serde_json::from_str(r#"{"kind":"constant-one"}"#).unwrap();
        assert_eq!(m, Multiplier::ConstantOne);
    }

    proptest! {
        #[test]
        fn homogeneous_and_bounded(x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3, e in -20i32..20) {
            prop_assume!(x != 0.0 || y != 0.0 || z != 0.0);
            let xi = [x, y, z];
            let s = 2f64.powi(e);
            let scaled: Vec<f64> = xi.iter().map(|t| t * s).collect();
            for m in [Multiplier::riesz(0), Multiplier::riesz(2), Multiplier::ConstantOne,
                      Multiplier::HalfSpaceSign { kappa: 2.5 }] {
                let a = m.eval(&xi).unwrap();
                prop_assert_eq!(a, m.eval(&scaled).unwrap());
                prop_assert!(a.abs() <= 1.0);
            }
        }
    }
}
