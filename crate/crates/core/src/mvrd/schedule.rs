use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the annealing horizon `N_e` is derived from the query budget `B`,
/// the selection interval `I` and the per-round batch `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    /// `N_e = k * B / I`.
    #[default]
    Literal,
    /// `N_e = I * B / k`, the epoch at which the budget runs out.
    RoundBased,
}

impl Horizon {
    pub fn epochs(self, budget: usize, interval: usize, k: usize) -> Result<f64> {
        if interval == 0 || k == 0 {
            return Err(Error::InvalidArgument("interval and batch size must be positive".into()));
        }
        let (b, i, k) = (budget as f64, interval as f64, k as f64);
        Ok(match self {
            Horizon::Literal => k * b / i,
            Horizon::RoundBased => i * b / k,
        })
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Horizon::Literal),
            "round-based" | "rounds" => Ok(Horizon::RoundBased),
            other => Err(Error::InvalidArgument(format!("unknown horizon '{other}'"))),
        }
    }
}

/// Fusion weight between the parameter-free and learned tracks at epoch
/// `epoch`: `omega * cos(pi * t) + phi` with `t = min(epoch / N_e, 1)`,
/// clamped to `[0, 1]`.
///
/// A zero horizon (zero budget) is an error.
pub fn lambda_schedule(epoch: usize, horizon_epochs: f64, omega: f64, phi: f64) -> Result<f64> {
    if !horizon_epochs.is_finite() || horizon_epochs <= 0.0 {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon_epochs}")));
    }
    if !omega.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidArgument("omega and phi must be finite".into()));
    }
    let t = (epoch as f64 / horizon_epochs).min(1.0);
    Ok((omega * (PI * t).cos() + phi).clamp(0.0, 1.0))
}

/// `lambda * wf + (1 - lambda) * wb`, elementwise.
pub fn fuse_scores(wf: &[f64], wb: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if wf.len() != wb.len() {
        return Err(Error::DimensionMismatch { expected: wf.len(), actual: wb.len() });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must be in [0, 1], got {lambda}")));
    }
    Ok(wf.iter().zip(wb).map(|(f, b)| lambda * f + (1.0 - lambda) * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let ne = Horizon::Literal.epochs(100, 10, 10).unwrap();
        assert_eq!(ne, 100.0);
        assert!((lambda_schedule(0, ne, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambda_schedule(50, ne, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!(lambda_schedule(100, ne, 0.5, 0.5).unwrap().abs() < 1e-12);
        // past the horizon the weight stays at its final value
        assert!(lambda_schedule(400, ne, 0.5, 0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn clamped_to_unit_interval() {
        assert_eq!(lambda_schedule(0, 10.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(lambda_schedule(10, 10.0, 1.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn horizons() {
        assert_eq!(Horizon::Literal.epochs(200, 10, 50).unwrap(), 1000.0);
        assert_eq!(Horizon::RoundBased.epochs(200, 10, 50).unwrap(), 40.0);
        assert!(Horizon::Literal.epochs(200, 0, 50).is_err());
        assert!(lambda_schedule(5, 0.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn fuse_example() {
        assert_eq!(fuse_scores(&[1.0, 0.0], &[0.0, 1.0], 0.25).unwrap(), vec![0.25, 0.75]);
        assert!(fuse_scores(&[1.0], &[1.0], 1.5).is_err());
        assert!(fuse_scores(&[1.0], &[], 0.5).is_err());
    }
}
