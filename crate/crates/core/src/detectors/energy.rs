//! Minimum-probability-of-error energy detector with Gaussian class models
//! fitted on dBW energies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hypothesis;
use crate::numerology::SymbolGrid;

use super::Prediction;

const MIN_VARIANCE: f64 = 1e-24;

/// Received energy over the CPI, `10·log10(Σ|R|²)` in dBW.
pub fn energy_statistic(rx: &SymbolGrid) -> Result<f64> {
    if rx.rows() == 0 || rx.cols() == 0 {
        return Err(Error::Domain("empty grid".into()));
    }
    let e = rx.frobenius_sq();
    if e <= 0.0 {
        return Err(Error::Domain("zero received energy has no dB value".into()));
    }
    Ok(10.0 * e.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianFit {
    fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            variance: variance.max(MIN_VARIANCE),
        }
    }
}

/// Fitted energy detector. Equal priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDetector {
    /// The likelihood-equality point between the two class means, dBW.
    pub threshold_dbw: f64,
    pub h0: GaussianFit,
    pub h1: GaussianFit,
    pub prior_h1: f64,
    /// Coefficients of `q(e) = log p(e|H1) − log p(e|H0) = a e² + b e + c`
    /// expressed in `u = e − centre`.
    centre: f64,
    a: f64,
    b: f64,
    c: f64,
    /// Real roots of `q`, ascending. Empty when the likelihoods never cross.
    roots: [Option<f64>; 2],
}

impl EnergyDetector {
    fn log_ratio(&self, e: f64) -> f64 {
        let u = e - self.centre;
        (self.a * u + self.b) * u + self.c
    }

    fn decide(&self, e: f64) -> bool {
        match self.roots {
            [Some(r), None] => (e - r) * (self.h1.mean - self.h0.mean) >= 0.0,
            [Some(lo), Some(hi)] => {
                if self.a > 0.0 {
                    e <= lo || e >= hi
                } else {
                    (lo..=hi).contains(&e)
                }
            }
            _ => self.log_ratio(e) >= 0.0,
        }
    }
}

/// Fits one Gaussian per class and places the threshold where the two
/// likelihoods are equal. With unequal variances the root between the class
/// means is used (or the root closest to their midpoint when none lies
/// between them).
pub fn fit_energy_threshold(energies: &[f64], labels: &[Hypothesis]) -> Result<EnergyDetector> {
    if energies.len() != labels.len() {
        return Err(Error::Fit(format!(
            "{} energies but {} labels",
            energies.len(),
            labels.len()
        )));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Fit("non-finite energy".into()));
    }
    let split = |h: Hypothesis| -> Vec<f64> {
        energies
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == h)
            .map(|(e, _)| *e)
            .collect()
    };
    let (e0, e1) = (split(Hypothesis::H0), split(Hypothesis::H1));
    if e0.len() < 2 || e1.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two samples per class, got {} H0 and {} H1",
            e0.len(),
            e1.len()
        )));
    }
    let (h0, h1) = (GaussianFit::from_samples(&e0), GaussianFit::from_samples(&e1));
    Ok(detector_from_fits(h0, h1))
}

pub(crate) fn detector_from_fits(h0: GaussianFit, h1: GaussianFit) -> EnergyDetector {
    let centre = 0.5 * (h0.mean + h1.mean);
    let (m0, m1) = (h0.mean - centre, h1.mean - centre);
    let (v0, v1) = (h0.variance, h1.variance);
    let a = 0.5 / v0 - 0.5 / v1;
    let b = m1 / v1 - m0 / v0;
    let c = m0 * m0 / (2.0 * v0) - m1 * m1 / (2.0 * v1) + 0.5 * (v0 / v1).ln();

    let linear = a.abs() <= 1e-12 * (0.5 / v0).max(0.5 / v1);
    let roots = if linear {
        [Some(centre - c / b), None]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            [None, None]
        } else {
            // Numerically stable pair.
            let s = disc.sqrt();
            let q = -0.5 * (b + b.signum() * s);
            let (r1, r2) = (q / a, if q != 0.0 { c / q } else { q / a });
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            [Some(lo + centre), Some(hi + centre)]
        }
    };
    let between = |r: f64| r >= h0.mean.min(h1.mean) && r <= h0.mean.max(h1.mean);
    let threshold_dbw = match roots {
        [Some(r), None] => r,
        [Some(lo), Some(hi)] => {
            if between(lo) && !between(hi) {
                lo
            } else if between(hi) && !between(lo) {
                hi
            } else if (lo - centre).abs() <= (hi - centre).abs() {
                lo
            } else {
                hi
            }
        }
        _ => centre,
    };
    EnergyDetector {
        threshold_dbw,
        h0,
        h1,
        prior_h1: 0.5,
        centre,
        a: if linear { 0.0 } else { a },
        b,
        c,
        roots,
    }
}

/// Likelihood-ratio decision with equal priors; a tie goes to H1.
pub fn classify_energy(det: &EnergyDetector, e: f64) -> Prediction {
    let h1 = det.decide(e);
    let posterior = 1.0 / (1.0 + (-det.log_ratio(e)).exp());
    let probability_h1 = if h1 { posterior.max(0.5) } else { posterior.min(0.5f64.next_down()) };
    Prediction {
        probability_h1,
        decision: Hypothesis::from_bit(h1),
    }
}
