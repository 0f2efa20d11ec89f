use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{classify_energy, cnn_forward, CnnModel, EnergyDetector, Prediction};
use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::geometry::{Hypothesis, Scenario};

use super::dataset::{Dataset, DatasetRecord, UseCase};

/// The part of a record a detector is allowed to look at.
pub trait DetectorInput: Sync {
    fn from_record(r: &DatasetRecord) -> &Self;
}

/// Received energy in dBW.
impl DetectorInput for f64 {
    fn from_record(r: &DatasetRecord) -> &Self {
        &r.energy_dbw
    }
}

impl DetectorInput for FeatureTensor {
    fn from_record(r: &DatasetRecord) -> &Self {
        &r.features
    }
}

pub trait Detector: Sync {
    type Input: DetectorInput + ?Sized;

    fn id(&self) -> &str;
    fn predict(&self, x: &Self::Input) -> Result<Prediction>;
}

pub struct EnergyBaseline(pub EnergyDetector);

impl Detector for EnergyBaseline {
    type Input = f64;

    fn id(&self) -> &str {
        "baseline"
    }

    fn predict(&self, x: &f64) -> Result<Prediction> {
        Ok(classify_energy(&self.0, *x))
    }
}

pub struct CnnDetector(pub CnnModel);

impl Detector for CnnDetector {
    type Input = FeatureTensor;

    fn id(&self) -> &str {
        "ai"
    }

    fn predict(&self, x: &FeatureTensor) -> Result<Prediction> {
        cnn_forward(&self.0, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: String,
    pub scenario: Scenario,
    pub use_case: UseCase,
    pub snr_db: f64,
    pub seed: u64,
    pub n_h0: usize,
    pub n_h1: usize,
    /// H1 decided on an H0 record.
    pub false_alarms: usize,
    /// H0 decided on an H1 record.
    pub missed_detections: usize,
    /// `p(target | null)`.
    pub p_fa: f64,
    /// `p(null | target)`.
    pub p_md: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_counts(
        detector: &str,
        ds: &Dataset,
        n_h0: usize,
        n_h1: usize,
        false_alarms: usize,
        missed_detections: usize,
    ) -> Result<Self> {
        if n_h0 == 0 || n_h1 == 0 {
            return Err(Error::Config(format!(
                "evaluation needs both classes, got {n_h0} H0 and {n_h1} H1 records"
            )));
        }
        let n = (n_h0 + n_h1) as f64;
        let p_fa = false_alarms as f64 / n_h0 as f64;
        let p_md = missed_detections as f64 / n_h1 as f64;
        let accuracy = 1.0 - (p_fa * (n_h0 as f64 / n) + p_md * (n_h1 as f64 / n));
        Ok(Self {
            detector: detector.to_string(),
            scenario: ds.spec.scenario(),
            use_case: ds.spec.use_case,
            snr_db: ds.spec.snr_db,
            seed: ds.spec.seed,
            n_h0,
            n_h1,
            false_alarms,
            missed_detections,
            p_fa,
            p_md,
            accuracy,
        })
    }

    pub fn n_test(&self) -> usize {
        self.n_h0 + self.n_h1
    }
}

/// Confusion counts and accuracy with empirical priors.
pub fn evaluate_detector<D: Detector>(detector: &D, test: &Dataset) -> Result<EvalReport> {
    let decisions = test
        .records
        .par_iter()
        .map(|r| Ok((r.label, detector.predict(D::Input::from_record(r))?.decision)))
        .collect::<Result<Vec<_>>>()?;
    let count = |truth: Hypothesis, said: Hypothesis| decisions.iter().filter(|(t, d)| *t == truth && *d == said).count();
    let n_h0 = test.count(Hypothesis::H0);
    let n_h1 = test.count(Hypothesis::H1);
    EvalReport::from_counts(
        detector.id(),
        test,
        n_h0,
        n_h1,
        count(Hypothesis::H0, Hypothesis::H1),
        count(Hypothesis::H1, Hypothesis::H0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use crate::harness::DatasetSpec;

    struct Oracle;
    impl Detector for Oracle {
        type Input = f64;
        fn id(&self) -> &str {
            "oracle"
        }
        fn predict(&self, e: &f64) -> Result<Prediction> {
            Ok(Prediction {
                probability_h1: 1.0,
                decision: Hypothesis::from_bit(*e >= 0.0),
            })
        }
    }

    struct AlwaysH1;
    impl Detector for AlwaysH1 {
        type Input = FeatureTensor;
        fn id(&self) -> &str {
            "h1"
        }
        fn predict(&self, _: &FeatureTensor) -> Result<Prediction> {
            Ok(Prediction {
                probability_h1: 1.0,
                decision: Hypothesis::H1,
            })
        }
    }

    /// H1 records carry energy +1, H0 records −1.
    fn balanced(n_h1: usize, n_h0: usize) -> Dataset {
        let spec = DatasetSpec::new(Scenario::Los, UseCase::Moving, n_h1.max(1), 10.0, 0);
        let records = (0..n_h1 + n_h0)
            .map(|i| {
                let h1 = i < n_h1;
                DatasetRecord {
                    index: i,
                    label: Hypothesis::from_bit(h1),
                    energy_dbw: if h1 { 1.0 } else { -1.0 },
                    features: FeatureTensor {
                        kind: FeatureKind::Ddp,
                        height: 1,
                        width: 1,
                        data: vec![0.0],
                        delay_offset: 0,
                        doppler_offset: 0,
                    },
                    scenario: Scenario::Los,
                    snr_db: 10.0,
                    seed: 0,
                }
            })
            .collect();
        Dataset { spec, records }
    }

    #[test]
    fn perfect_detector() {
        let r = evaluate_detector(&Oracle, &balanced(150, 150)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.n_test(), 300);
    }

    #[test]
    fn constant_detector_is_chance() {
        let r = evaluate_detector(&AlwaysH1, &balanced(150, 150)).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!((r.p_fa, r.p_md), (1.0, 0.0));
    }

    #[test]
    fn unbalanced_priors_follow_counts() {
        let r = evaluate_detector(&AlwaysH1, &balanced(30, 10)).unwrap();
        assert!((r.accuracy - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(evaluate_detector(&Oracle, &balanced(5, 0)).is_err());
    }
}
