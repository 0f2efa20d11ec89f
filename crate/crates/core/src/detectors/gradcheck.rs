//! Finite-difference verification of the analytic parameter gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::geometry::Hypothesis;

use super::cnn::{bce_with_logit, Network};
use super::model::CnnModel;

pub const FD_STEP: f64 = 1e-5;
pub const SAMPLES_PER_LAYER: usize = 128;
/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub kind: &'static str,
    pub params: usize,
    pub sampled: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub layers: Vec<LayerCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares backprop against central differences in 64-bit arithmetic on
/// up to [`SAMPLES_PER_LAYER`] randomly chosen parameters of every layer
/// (all of them when a layer has fewer).
pub fn gradient_check(model: &CnnModel, x: &FeatureTensor, label: Hypothesis, seed: u64) -> Result<GradientCheck> {
    if !model.net.all_finite() {
        return Err(Error::Domain("model has non-finite parameters".into()));
    }
    let mut net: Network<f64> = model.net.cast();
    let input: Vec<f64> = model.prepare(x)?.iter().map(|v| *v as f64).collect();
    let y = if label.is_h1() { 1.0 } else { 0.0 };
    let mut grads = net.zero_grads();
    net.accumulate_gradient(&input, y, &mut grads);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for li in 0..net.layers.len() {
        let n = net.layers[li].params().len();
        if n == 0 {
            continue;
        }
        let picks = sample(&mut rng, n, n.min(SAMPLES_PER_LAYER)).into_vec();
        let mut worst = 0.0f64;
        for &pi in &picks {
            let orig = net.layers[li].params()[pi];
            net.layers[li].params_mut()[pi] = orig + FD_STEP;
            let up = bce_with_logit(net.logit(&input), y);
            net.layers[li].params_mut()[pi] = orig - FD_STEP;
            let down = bce_with_logit(net.logit(&input), y);
            net.layers[li].params_mut()[pi] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads[li][pi], numeric));
        }
        layers.push(LayerCheck {
            layer: li,
            kind: net.layers[li].name(),
            params: n,
            sampled: picks.len(),
            max_rel_error: worst,
        });
    }
    Ok(GradientCheck {
        max_rel_error: layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max),
        layers,
    })
}

/// Analytic gradient of every parameter for one sample, in 64-bit.
pub fn analytic_gradient(model: &CnnModel, x: &FeatureTensor, label: Hypothesis) -> Result<Vec<Vec<f64>>> {
    let net: Network<f64> = model.net.cast();
    let input: Vec<f64> = model.prepare(x)?.iter().map(|v| *v as f64).collect();
    let mut grads = net.zero_grads();
    net.accumulate_gradient(&input, if label.is_h1() { 1.0 } else { 0.0 }, &mut grads);
    Ok(grads)
}
