use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::{cnn_train, fit_energy_threshold, CnnModel, EnergyDetector, LabeledTensor, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::features::RoiSpec;
use crate::geometry::{Hypothesis, Scenario, ScenarioSpec};
use crate::numerology::WaveformConfig;

use super::dataset::{derive_seed, generate_dataset, split_dataset, Dataset, DatasetSpec, UseCase};
use super::eval::{evaluate_detector, CnnDetector, EnergyBaseline, EvalReport};

const TEST_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub waveform: WaveformConfig,
    pub scenarios: Vec<Scenario>,
    pub use_case: UseCase,
    pub snr_db: Vec<f64>,
    /// Training records per class (split into train and validation).
    pub k_train: usize,
    /// Test records per class.
    pub k_test: usize,
    pub split_ratio: f64,
    /// Drives the room, waveform, records, split, initialization and
    /// shuffling.
    pub seed: u64,
    pub train: TrainConfig,
    /// Feature window; `None` picks the default for the use case.
    pub roi: Option<RoiSpec>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::desk(),
            scenarios: vec![Scenario::Los],
            use_case: UseCase::Moving,
            snr_db: vec![20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0],
            k_train: 400,
            k_test: 150,
            split_ratio: 0.7,
            seed: 1,
            train: TrainConfig::default(),
            roi: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::Config("empty snr list".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        if self.k_train == 0 || self.k_test == 0 {
            return Err(Error::Config("k_train and k_test must be positive".into()));
        }
        self.train.validate()
    }

    /// Training-set spec for one grid point.
    pub fn train_spec(&self, scenario: Scenario, snr_db: f64) -> DatasetSpec {
        DatasetSpec {
            waveform: self.waveform,
            waveform_seed: self.seed,
            scene: ScenarioSpec::new(scenario, Hypothesis::H1, self.use_case == UseCase::Moving, self.seed),
            use_case: self.use_case,
            count_per_class: self.k_train,
            snr_db,
            seed: self.seed,
            roi: self.roi.unwrap_or_else(|| RoiSpec::for_kind(self.use_case.feature_kind())),
        }
    }

    /// Same room, disjoint record seeds.
    pub fn test_spec(&self, scenario: Scenario, snr_db: f64) -> DatasetSpec {
        DatasetSpec {
            count_per_class: self.k_test,
            ..self.train_spec(scenario, snr_db).with_seed(derive_seed(self.seed, TEST_STREAM, 0))
        }
    }
}

pub struct TrainedDetectors {
    pub baseline: EnergyDetector,
    pub cnn: CnnModel,
    pub training: TrainOutcome,
}

fn labeled(d: &Dataset) -> Vec<LabeledTensor<'_>> {
    d.records
        .iter()
        .map(|r| LabeledTensor {
            x: &r.features,
            label: r.label,
        })
        .collect()
}

/// Fits the energy baseline on all training energies and trains the CNN on
/// a stratified split of the training features.
pub fn train_detectors(train: &Dataset, split_ratio: f64, config: &TrainConfig, seed: u64) -> Result<TrainedDetectors> {
    let baseline = fit_energy_threshold(&train.energies(), &train.labels()).map_err(|e| e.in_stage("fit-baseline"))?;
    let (fit, val) = split_dataset(train, split_ratio, seed).map_err(|e| e.in_stage("split"))?;
    let first = &train.records.first().ok_or_else(|| Error::Config("empty training set".into()))?.features;
    let cfg = TrainConfig {
        shuffle_seed: seed,
        ..config.clone()
    };
    let model = CnnModel::for_tensor(first, cfg, seed).map_err(|e| e.in_stage("train"))?;
    let training = cnn_train(model, &labeled(&fit), &labeled(&val)).map_err(|e| e.in_stage("train"))?;
    Ok(TrainedDetectors {
        baseline,
        cnn: training.model.clone(),
        training,
    })
}

/// For every scenario and SNR: generate, train, evaluate. Rows come out
/// ordered by scenario, then SNR, then detector (baseline first).
pub fn sweep_snr(cfg: &SweepConfig, mut on_row: impl FnMut(&EvalReport)) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.scenarios.len() * cfg.snr_db.len() * 2);
    for &scenario in &cfg.scenarios {
        for &snr in &cfg.snr_db {
            let train = generate_dataset(&cfg.train_spec(scenario, snr)).map_err(|e| e.in_stage("generate"))?;
            let test = generate_dataset(&cfg.test_spec(scenario, snr)).map_err(|e| e.in_stage("generate"))?;
            let trained = train_detectors(&train, cfg.split_ratio, &cfg.train, cfg.seed)?;
            drop(train);
            let mut base = evaluate_detector(&EnergyBaseline(trained.baseline), &test).map_err(|e| e.in_stage("evaluate"))?;
            let mut ai = evaluate_detector(&CnnDetector(trained.cnn), &test).map_err(|e| e.in_stage("evaluate"))?;
            base.seed = cfg.seed;
            ai.seed = cfg.seed;
            for r in [base, ai] {
                on_row(&r);
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: Scenario,
    pub use_case: UseCase,
    pub snr_db: f64,
    pub detector: String,
    pub accuracy: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub n_test: usize,
    pub seed: u64,
}

impl From<&EvalReport> for CsvRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            scenario: r.scenario,
            use_case: r.use_case,
            snr_db: r.snr_db,
            detector: r.detector.clone(),
            accuracy: r.accuracy,
            p_fa: r.p_fa,
            p_md: r.p_md,
            n_test: r.n_test(),
            seed: r.seed,
        }
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_fit(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().expect("two blocks") = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Lowest SNR at which the isotonic fit of `accuracy` reaches `level`,
/// interpolating linearly between grid points. `None` if it never does.
pub fn crossing_snr(snr_db: &[f64], accuracy: &[f64], level: f64) -> Option<f64> {
    let fit = isotonic_fit(accuracy);
    let i = fit.iter().position(|&a| a >= level)?;
    if i == 0 {
        return Some(snr_db[0]);
    }
    let (a0, a1) = (fit[i - 1], fit[i]);
    let (s0, s1) = (snr_db[i - 1], snr_db[i]);
    Some(s0 + (level - a0) / (a1 - a0) * (s1 - s0))
}
