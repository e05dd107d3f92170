//! Vector-valued discrete-time signals and their power.

use nalgebra::DVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<DVector<f64>>,
    /// Set when `samples` holds one period of an `N`-periodic signal.
    pub period: Option<usize>,
}

impl Signal {
    pub fn new(samples: Vec<DVector<f64>>) -> Self {
        Self {
            samples,
            period: None,
        }
    }

    /// One period of a periodic signal.
    pub fn periodic(period: Vec<DVector<f64>>) -> Self {
        let n = period.len();
        Self {
            samples: period,
            period: Some(n),
        }
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        Self::new(vec![DVector::zeros(dim); len])
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample `k`; periodic signals wrap, finite ones are zero past their end.
    pub fn at(&self, k: usize) -> DVector<f64> {
        match self.period {
            Some(p) => self.samples[k % p].clone(),
            None => self
                .samples
                .get(k)
                .cloned()
                .unwrap_or_else(|| DVector::zeros(self.dim())),
        }
    }

    /// The first `horizon` samples.
    pub fn truncate(&self, horizon: usize) -> Vec<DVector<f64>> {
        (0..horizon).map(|k| self.at(k)).collect()
    }
}

/// `sqrt((1/horizon) Σ_{k<horizon} ‖x_k‖²)`.
///
/// For a periodic signal whose horizon is a multiple of the period, only one
/// period is summed, so the value does not depend on the number of periods.
pub fn signal_power(sig: &Signal, horizon: usize) -> f64 {
    assert!(horizon >= 1, "horizon must be positive");
    if let Some(p) = sig.period {
        if horizon % p == 0 {
            let s: f64 = sig.samples.iter().map(|x| x.norm_squared()).sum();
            return (s / p as f64).sqrt();
        }
    }
    let s: f64 = (0..horizon).map(|k| sig.at(k).norm_squared()).sum();
    (s / horizon as f64).sqrt()
}
