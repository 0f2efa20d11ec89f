//! On-disk datasets and trained detector bundles.
//!
//! A dataset directory holds `manifest.json` and `records.bin`. Each record
//! is packed as a label byte, the energy as little-endian f64, then the
//! feature tensor as little-endian f32 in row-major order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::{CnnModel, EnergyDetector};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTensor};
use crate::geometry::Hypothesis;

use super::dataset::{Dataset, DatasetRecord, DatasetSpec};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const RECORDS: &str = "records.bin";
const BASELINE: &str = "baseline.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub feature_kind: FeatureKind,
    pub height: usize,
    pub width: usize,
    pub delay_offset: usize,
    pub doppler_offset: usize,
    pub count: usize,
    pub records_bytes: u64,
    /// Full generation recipe, including scenario, use case, SNR and seeds.
    pub spec: DatasetSpec,
    /// Per-record target seeds, in index order.
    pub record_seeds: Vec<u64>,
}

impl DatasetManifest {
    pub fn record_size(&self) -> usize {
        1 + 8 + 4 * self.height * self.width
    }
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let first = ds.records.first().ok_or_else(|| Error::Config("cannot save an empty dataset".into()))?;
    let (h, w) = (first.features.height, first.features.width);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(ds.len() * (9 + 4 * h * w));
    for r in &ds.records {
        if (r.features.height, r.features.width) != (h, w) || r.features.data.len() != h * w {
            return Err(Error::Shape(format!("record {} has a different tensor shape", r.index)));
        }
        blob.push(u8::from(r.label.is_h1()));
        blob.extend_from_slice(&r.energy_dbw.to_le_bytes());
        for v in &r.features.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        feature_kind: first.features.kind,
        height: h,
        width: w,
        delay_offset: first.features.delay_offset,
        doppler_offset: first.features.doppler_offset,
        count: ds.len(),
        records_bytes: blob.len() as u64,
        spec: ds.spec.clone(),
        record_seeds: ds.records.iter().map(|r| r.seed).collect(),
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(RECORDS);
    fs::write(&path, blob).map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&text)?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let m = load_manifest(dir)?;
    let size = m.record_size();
    if m.records_bytes != (m.count * size) as u64 || m.record_seeds.len() != m.count {
        return Err(Error::ShapeMismatch(format!(
            "{} records of {}x{} need {} bytes, manifest says {}",
            m.count,
            m.height,
            m.width,
            m.count * size,
            m.records_bytes
        )));
    }
    let path = dir.join(RECORDS);
    let blob = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if blob.len() < m.count * size {
        return Err(Error::Truncated {
            record: blob.len() / size,
        });
    }
    if blob.len() > m.count * size {
        return Err(Error::ShapeMismatch(format!(
            "records.bin has {} bytes, expected {}",
            blob.len(),
            m.count * size
        )));
    }
    let records = blob
        .chunks_exact(size)
        .enumerate()
        .map(|(i, rec)| {
            let label = match rec[0] {
                0 => Hypothesis::H0,
                1 => Hypothesis::H1,
                b => return Err(Error::Domain(format!("record {i} has label byte {b}"))),
            };
            let energy_dbw = f64::from_le_bytes(rec[1..9].try_into().expect("8 bytes"));
            let data = rec[9..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Ok(DatasetRecord {
                index: i,
                label,
                energy_dbw,
                features: FeatureTensor {
                    kind: m.feature_kind,
                    height: m.height,
                    width: m.width,
                    data,
                    delay_offset: m.delay_offset,
                    doppler_offset: m.doppler_offset,
                },
                scenario: m.spec.scenario(),
                snr_db: m.spec.snr_db,
                seed: m.record_seeds[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { spec: m.spec, records })
}

/// Writes the CNN checkpoint and the fitted baseline into one directory.
pub fn save_detectors(cnn: &CnnModel, baseline: &EnergyDetector, dir: &Path) -> Result<()> {
    cnn.save(dir)?;
    let path = dir.join(BASELINE);
    fs::write(&path, serde_json::to_vec_pretty(baseline)?).map_err(|e| Error::io(&path, e))
}

pub fn load_detectors(dir: &Path) -> Result<(CnnModel, EnergyDetector)> {
    let cnn = CnnModel::load(dir)?;
    let path = dir.join(BASELINE);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok((cnn, serde_json::from_slice(&text)?))
}
