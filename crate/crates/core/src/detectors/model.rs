//! Trained-model container, inference and checkpoint files.

use std::borrow::Cow;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::geometry::Hypothesis;

use super::cnn::{sigmoid, Architecture, Network};
use super::train::TrainConfig;
use super::Prediction;

pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "model.json";
const PARAMS_FILE: &str = "params.bin";

/// Per-pixel centering and a global scale, fitted on the training inputs
/// and applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f32>,
    pub scale: f32,
}

impl InputNorm {
    pub fn fit<'a>(inputs: impl ExactSizeIterator<Item = &'a [f32]>) -> Self {
        let n = inputs.len().max(1) as f64;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for x in inputs {
            if sum.is_empty() {
                sum = vec![0.0; x.len()];
                sum_sq = vec![0.0; x.len()];
            }
            for ((s, q), v) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(x) {
                *s += *v as f64;
                *q += (*v as f64) * (*v as f64);
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let var = sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n - m * m).max(0.0))
            .sum::<f64>()
            / mean.len().max(1) as f64;
        Self {
            mean: mean.iter().map(|m| *m as f32).collect(),
            scale: if var > 0.0 { (1.0 / var.sqrt()) as f32 } else { 1.0 },
        }
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        x.iter().zip(&self.mean).map(|(v, m)| (v - m) * self.scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub net: Network<f32>,
    pub config: TrainConfig,
    /// Seed of the weight initialization.
    pub init_seed: u64,
    pub input_norm: Option<InputNorm>,
}

impl CnnModel {
    pub fn new(arch: Architecture, config: TrainConfig, init_seed: u64) -> Result<Self> {
        Ok(Self {
            net: Network::new(arch, init_seed)?,
            config,
            init_seed,
            input_norm: None,
        })
    }

    pub fn for_tensor(x: &FeatureTensor, config: TrainConfig, init_seed: u64) -> Result<Self> {
        Self::new(Architecture::for_tensor(x), config, init_seed)
    }

    pub fn arch(&self) -> &Architecture {
        &self.net.arch
    }

    pub fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        let a = &self.net.arch;
        if x.kind != a.kind || x.height != a.input_h || x.width != a.input_w || x.data.len() != a.input_h * a.input_w {
            return Err(Error::Shape(format!(
                "model expects {:?} {}x{}, got {:?} {}x{}",
                a.kind, a.input_h, a.input_w, x.kind, x.height, x.width
            )));
        }
        Ok(())
    }

    /// Network input for `x`, after the input normalization if any.
    pub fn prepare<'a>(&self, x: &'a FeatureTensor) -> Result<Cow<'a, [f32]>> {
        self.check_input(x)?;
        Ok(match &self.input_norm {
            Some(norm) => Cow::Owned(norm.apply(&x.data)),
            None => Cow::Borrowed(&x.data),
        })
    }

    pub fn logit(&self, x: &FeatureTensor) -> Result<f32> {
        Ok(self.net.logit(&self.prepare(x)?))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            version: CHECKPOINT_VERSION,
            arch: self.net.arch,
            layers: self
                .net
                .layers
                .iter()
                .map(|l| LayerEntry {
                    kind: l.name().to_string(),
                    params: l.params().len(),
                })
                .collect(),
            init_seed: self.init_seed,
            config: self.config.clone(),
            input_norm_scale: self.input_norm.as_ref().map(|n| n.scale),
        };
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        let mut blob = Vec::with_capacity(self.net.num_params() * 4);
        let norm = self.input_norm.iter().flat_map(|n| n.mean.iter());
        for v in self.net.layers.iter().flat_map(|l| l.params().iter()).chain(norm) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(PARAMS_FILE);
        fs::write(&path, blob).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_slice(&text)?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: manifest.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut net: Network<f32> = Network::new(manifest.arch, manifest.init_seed)?;
        if manifest.layers.len() != net.layers.len()
            || manifest
                .layers
                .iter()
                .zip(&net.layers)
                .any(|(e, l)| e.kind != l.name() || e.params != l.params().len())
        {
            return Err(Error::ShapeMismatch("layer list does not match the architecture".into()));
        }
        let path = dir.join(PARAMS_FILE);
        let blob = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let norm_len = if manifest.input_norm_scale.is_some() { net.input_len() } else { 0 };
        let expected = (net.num_params() + norm_len) * 4;
        if blob.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter bytes, expected {expected}",
                blob.len()
            )));
        }
        let mut words = blob.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        for layer in &mut net.layers {
            for v in layer.params_mut() {
                *v = words.next().expect("length checked");
            }
        }
        let input_norm = manifest.input_norm_scale.map(|scale| InputNorm {
            mean: words.by_ref().collect(),
            scale,
        });
        Ok(Self {
            net,
            config: manifest.config,
            init_seed: manifest.init_seed,
            input_norm,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    kind: String,
    params: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    arch: Architecture,
    layers: Vec<LayerEntry>,
    init_seed: u64,
    config: TrainConfig,
    /// Present when the input mean follows the parameters in the blob.
    #[serde(default)]
    input_norm_scale: Option<f32>,
}

/// Probability of H1 is the sigmoid of the logit; decides H1 at ≥ 0.5.
pub fn cnn_forward(model: &CnnModel, x: &FeatureTensor) -> Result<Prediction> {
    let z = model.logit(x)?;
    Ok(prediction_from_logit(z))
}

pub(crate) fn prediction_from_logit(z: f32) -> Prediction {
    Prediction {
        probability_h1: sigmoid(z as f64),
        decision: Hypothesis::from_bit(z >= 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn tensor(h: usize, w: usize, kind: FeatureKind) -> FeatureTensor {
        FeatureTensor {
            kind,
            height: h,
            width: w,
            data: (0..h * w).map(|i| ((i * 37 % 101) as f32) / 100.0).collect(),
            delay_offset: 0,
            doppler_offset: 0,
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let x = tensor(16, 16, FeatureKind::Ddp);
        let m = CnnModel::for_tensor(&x, TrainConfig::default(), 4).unwrap();
        let a = cnn_forward(&m, &x).unwrap();
        let b = cnn_forward(&m, &x).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.probability_h1));
    }

    #[test]
    fn input_norm_centres_each_pixel() {
        let xs = [vec![1.0f32, 10.0], vec![3.0, 10.0]];
        let norm = InputNorm::fit(xs.iter().map(|x| x.as_slice()));
        assert_eq!(norm.mean, vec![2.0, 10.0]);
        // Centered variance averaged over pixels: (1 + 0) / 2.
        assert!((norm.scale - 2f32.sqrt()).abs() < 1e-6);
        assert_eq!(norm.apply(&xs[0]), vec![-2f32.sqrt(), 0.0]);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let m = CnnModel::new(Architecture::ddp(16, 16), TrainConfig::default(), 0).unwrap();
        assert!(matches!(cnn_forward(&m, &tensor(16, 15, FeatureKind::Ddp)), Err(Error::Shape(_))));
        assert!(matches!(cnn_forward(&m, &tensor(1, 16, FeatureKind::Pdp)), Err(Error::Shape(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = CnnModel::new(Architecture::pdp(32), TrainConfig::default(), 11).unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(CnnModel::load(dir.path()).unwrap(), m);
        let xs: Vec<Vec<f32>> = (0..3).map(|i| (0..32).map(|j| (i * j) as f32).collect()).collect();
        m.input_norm = Some(InputNorm::fit(xs.iter().map(|x| x.as_slice())));
        m.save(dir.path()).unwrap();
        assert_eq!(CnnModel::load(dir.path()).unwrap(), m);

        std::fs::write(dir.path().join(PARAMS_FILE), [0u8; 12]).unwrap();
        assert!(matches!(CnnModel::load(dir.path()), Err(Error::ShapeMismatch(_))));
    }
}
