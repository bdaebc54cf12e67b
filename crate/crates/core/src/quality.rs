//! Achieved-quality models and the raw-to-effective capacity conversion.
//!
//! A segment with raw capacity `nu` promises quality `q` (smaller is better).
//! Its effective capacity `mu` is the largest carried throughput that still
//! meets `q`, and `eta = mu / nu` is the utilization factor.

use crate::error::{require, Result};

/// Default expected residual service time, in quality (time) units.
pub const DEFAULT_MEAN_RESIDUAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QualityModel {
    /// Mean queueing delay of an M/G/1 FIFO queue (Pollaczek-Khinchine):
    /// `Q(lambda, nu) = lambda / (nu - lambda) * E[R]`.
    Mg1Fifo { mean_residual: f64 },
    /// No explicit delay curve; the segment accepts up to `eta * nu`.
    DirectEta { eta: f64 },
}

impl QualityModel {
    pub fn mg1_fifo(mean_residual: f64) -> Result<Self> {
        require(
            mean_residual.is_finite() && mean_residual > 0.0,
            "mean_residual",
            "finite and > 0",
            mean_residual,
        )?;
        Ok(Self::Mg1Fifo { mean_residual })
    }

    pub fn direct_eta(eta: f64) -> Result<Self> {
        require(eta > 0.0 && eta <= 1.0, "eta", "in (0, 1]", eta)?;
        Ok(Self::DirectEta { eta })
    }

    /// Quality achieved when carrying `lambda` over raw capacity `nu`.
    ///
    /// For `DirectEta` there is no curve: the nominal quality is returned while
    /// `lambda <= eta * nu` and `+inf` beyond.
    pub fn achieved_quality(&self, lambda: f64, nu: f64, nominal: f64) -> Result<f64> {
        require(lambda >= 0.0, "lambda", ">= 0", lambda)?;
        require(nu > 0.0, "nu", "> 0", nu)?;
        Ok(match *self {
            Self::Mg1Fifo { mean_residual } => {
                if lambda >= nu {
                    f64::INFINITY
                } else {
                    lambda / (nu - lambda) * mean_residual
                }
            }
            Self::DirectEta { eta } => {
                if lambda <= eta * nu {
                    nominal
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// Largest throughput whose achieved quality is still `<= q`.
    pub fn max_throughput(&self, q: f64, nu: f64) -> Result<f64> {
        require(nu >= 0.0, "nu", ">= 0", nu)?;
        Ok(self.eta(q)? * nu)
    }

    /// Acceptable throughput per unit of raw capacity at quality `q`.
    pub fn eta(&self, q: f64) -> Result<f64> {
        match *self {
            Self::Mg1Fifo { mean_residual } => {
                require(q > 0.0, "quality", "> 0 for an M/G/1 segment", q)?;
                if q.is_infinite() {
                    return Ok(1.0);
                }
                Ok(q / (mean_residual + q))
            }
            Self::DirectEta { eta } => Ok(eta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pk_delay_at_half_load() {
        let m = QualityModel::mg1_fifo(1.0).unwrap();
        assert!((m.achieved_quality(5.0, 10.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.achieved_quality(0.0, 10.0, 0.0).unwrap(), 0.0);
        assert!(m.achieved_quality(10.0, 10.0, 0.0).unwrap().is_infinite());
    }

    #[test]
    fn max_throughput_values() {
        let m = QualityModel::mg1_fifo(1.0).unwrap();
        assert!((m.max_throughput(1.0, 10.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((m.achieved_quality(5.0, 10.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let d = QualityModel::direct_eta(0.3).unwrap();
        assert!((d.max_throughput(0.01, 14.0).unwrap() - 4.2).abs() < 1e-12);
        // large q approaches nu from below
        let mu = m.max_throughput(1e6, 10.0).unwrap();
        assert!(mu < 10.0 && mu > 9.9999);
    }

    #[test]
    fn eta_values() {
        let m = QualityModel::mg1_fifo(1.0).unwrap();
        assert!((m.eta(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.eta(0.01).unwrap() - 0.01 / 1.01).abs() < 1e-15);
        assert!((m.eta(0.01).unwrap() - 0.0099).abs() < 1e-4);
        assert_eq!(
            QualityModel::direct_eta(0.9).unwrap().eta(3.0).unwrap(),
            0.9
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = QualityModel::mg1_fifo(1.0).unwrap();
        assert!(m.eta(0.0).is_err());
        assert!(m.achieved_quality(1.0, 0.0, 0.0).is_err());
        assert!(QualityModel::mg1_fifo(0.0).is_err());
        assert!(QualityModel::direct_eta(0.0).is_err());
        assert!(QualityModel::direct_eta(1.2).is_err());
    }

    #[test]
    fn direct_eta_feasibility_predicate() {
        let d = QualityModel::direct_eta(0.5).unwrap();
        assert_eq!(d.achieved_quality(5.0, 10.0, 2.0).unwrap(), 2.0);
        assert!(d.achieved_quality(5.1, 10.0, 2.0).unwrap().is_infinite());
    }
}
