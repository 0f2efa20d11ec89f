use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{noise_variance_from_snr, synthesize_rx_grid};
use crate::detectors::energy_statistic;
use crate::error::{Error, Result};
use crate::features::{extract_roi, FeatureKind, FeatureTensor, ProfileProcessor, RoiSpec};
use crate::geometry::{enumerate_paths, sample_deployment, Hypothesis, Scenario, ScenarioSpec};
use crate::numerology::{derive_params, generate_sensing_grid, WaveformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    Moving,
    Stationary,
}

impl UseCase {
    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::Moving => "moving",
            UseCase::Stationary => "stationary",
        }
    }

    /// Moving targets are detected on delay-Doppler maps, stationary ones on
    /// power delay profiles.
    pub fn feature_kind(self) -> FeatureKind {
        match self {
            UseCase::Moving => FeatureKind::Ddp,
            UseCase::Stationary => FeatureKind::Pdp,
        }
    }
}

impl FromStr for UseCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "moving" => Ok(UseCase::Moving),
            "stationary" => Ok(UseCase::Stationary),
            other => Err(Error::Config(format!("unknown use case '{other}'"))),
        }
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub waveform: WaveformConfig,
    pub waveform_seed: u64,
    /// Room template. Its `seed` fixes the clutter layout; the hypothesis
    /// is set per record.
    pub scene: ScenarioSpec,
    pub use_case: UseCase,
    /// Records per class.
    pub count_per_class: usize,
    pub snr_db: f64,
    /// Base of the per-record seeds.
    pub seed: u64,
    pub roi: RoiSpec,
}

impl DatasetSpec {
    /// Desk-scale waveform, default room for `scenario`, and one seed
    /// driving records, clutter and waveform.
    pub fn new(scenario: Scenario, use_case: UseCase, count_per_class: usize, snr_db: f64, seed: u64) -> Self {
        Self {
            waveform: WaveformConfig::desk(),
            waveform_seed: seed,
            scene: ScenarioSpec::new(scenario, Hypothesis::H1, use_case == UseCase::Moving, seed),
            use_case,
            count_per_class,
            snr_db,
            seed,
            roi: RoiSpec::for_kind(use_case.feature_kind()),
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scene.scenario
    }

    pub fn validate(&self) -> Result<()> {
        if self.count_per_class == 0 {
            return Err(Error::Config("need at least one record per class".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db is NaN".into()));
        }
        match (self.use_case, self.scene.is_moving()) {
            (UseCase::Stationary, true) => {
                return Err(Error::Config("stationary use case with a moving target scene".into()))
            }
            (UseCase::Moving, false) => {
                return Err(Error::Config("moving use case with a stationary target scene".into()))
            }
            _ => {}
        }
        self.waveform.validate()?;
        self.scene.validate()
    }

    pub fn len(&self) -> usize {
        2 * self.count_per_class
    }

    pub fn is_empty(&self) -> bool {
        self.count_per_class == 0
    }

    /// H1 for the first `count_per_class` indices, H0 after.
    pub fn label(&self, index: usize) -> Hypothesis {
        Hypothesis::from_bit(index < self.count_per_class)
    }

    /// Same room and waveform, different records.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub index: usize,
    pub label: Hypothesis,
    /// Received energy, dBW.
    pub energy_dbw: f64,
    pub features: FeatureTensor,
    pub scenario: Scenario,
    pub snr_db: f64,
    /// Seed of the target draw. Noise uses [`NOISE_STREAM`].
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// Sorted by `index`.
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, h: Hypothesis) -> usize {
        self.records.iter().filter(|r| r.label == h).count()
    }

    pub fn labels(&self) -> Vec<Hypothesis> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy_dbw).collect()
    }
}

const TARGET_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// SplitMix64 over `(base, stream, index)`: independent seeds for every
/// record without depending on generation order.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `K` target records followed by `K` target-free records. Record `i`
/// depends only on the spec and `i`; the noise realization is shared across
/// SNR values so sweeps use common random numbers.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let params = derive_params(&spec.waveform)?;
    let reference = generate_sensing_grid(&spec.waveform, spec.waveform_seed);
    let processor = ProfileProcessor::new(&params);
    let fc = spec.waveform.center_freq_hz;
    let kind = spec.use_case.feature_kind();

    let records = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let label = spec.label(i);
            let scene = ScenarioSpec {
                hypothesis: label,
                ..spec.scene.clone()
            };
            let seed = derive_seed(spec.seed, TARGET_STREAM, i as u64);
            let deployment = sample_deployment(&scene, seed)?;
            let paths = enumerate_paths(&deployment, fc)?;
            let noise = noise_variance_from_snr(spec.snr_db, &deployment, fc)?;
            let noise_seed = derive_seed(spec.seed, NOISE_STREAM, i as u64);
            let rx = synthesize_rx_grid(&reference, &paths, &noise, &params, noise_seed)?;
            let energy_dbw = energy_statistic(&rx)?;
            let features = match kind {
                FeatureKind::Ddp => extract_roi(&processor.ddp(&rx, &reference)?, &spec.roi)?,
                FeatureKind::Pdp => extract_roi(&processor.pdp(&rx, &reference)?, &spec.roi)?,
            };
            Ok(DatasetRecord {
                index: i,
                label,
                energy_dbw,
                features,
                scenario: spec.scenario(),
                snr_db: spec.snr_db,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        records,
    })
}

/// Stratified split: each class is shuffled with `seed` and cut so the
/// first part holds `ratio` of the dataset (rounded, with the remainder
/// going to the class with the larger fractional share). Both parts keep
/// index order.
pub fn split_dataset(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut classes: Vec<Vec<usize>> = [Hypothesis::H0, Hypothesis::H1]
        .iter()
        .map(|h| (0..ds.len()).filter(|&i| ds.records[i].label == *h).collect())
        .collect();
    if classes.iter().any(|c| c.is_empty()) {
        return Err(Error::Config("split needs records of both classes".into()));
    }
    let target = (ratio * ds.len() as f64).round() as usize;
    let shares: Vec<f64> = classes.iter().map(|c| ratio * c.len() as f64).collect();
    let mut take: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut by_remainder: Vec<usize> = (0..classes.len()).collect();
    by_remainder.sort_by(|&a, &b| (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())));
    for &c in by_remainder.iter().cycle().take(classes.len()) {
        if take.iter().sum::<usize>() >= target {
            break;
        }
        if take[c] < classes[c].len() {
            take[c] += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (c, idx) in classes.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        first.extend_from_slice(&idx[..take[c]]);
        second.extend_from_slice(&idx[take[c]..]);
    }
    if first.is_empty() || second.is_empty() {
        return Err(Error::Config(format!(
            "split ratio {ratio} leaves an empty part of {} records",
            ds.len()
        )));
    }
    first.sort_unstable();
    second.sort_unstable();
    let pick = |ix: &[usize]| Dataset {
        spec: ds.spec.clone(),
        records: ix.iter().map(|&i| ds.records[i].clone()).collect(),
    };
    Ok((pick(&first), pick(&second)))
}
