//! Frequency-domain received grid: each path multiplies the reference
//! symbols by a delay phase ramp across subcarriers and a Doppler phase
//! ramp across sensing symbols, plus white circular Gaussian noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{direct_gain, Deployment, PropagationPath};
use crate::numerology::{DerivedParams, SymbolGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Symbol energy over noise density, referenced to the direct path.
    pub snr_db: f64,
    /// Complex noise variance per grid entry.
    pub noise_variance: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            noise_variance: 0.0,
        }
    }
}

/// Noise variance giving `snr_db` relative to the direct-path symbol
/// energy `|b_0|²` (unit-energy QPSK).
///
/// The direct gain always uses the unobstructed tx-rx distance, so the SNR
/// axis means the same thing whether or not walls block the direct path.
pub fn noise_variance_from_snr(snr_db: f64, d: &Deployment, center_freq_hz: f64) -> Result<NoiseSpec> {
    if snr_db.is_nan() {
        return Err(Error::Config("snr_db is NaN".into()));
    }
    let b0 = direct_gain(d, center_freq_hz);
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(Error::DegenerateGeometry("direct-path gain is not computable".into()));
    }
    let es = b0 * b0;
    Ok(NoiseSpec {
        snr_db,
        noise_variance: es / 10f64.powf(snr_db / 10.0),
    })
}

fn phase_ramp(len: usize, cycles_per_step: f64, sign: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            let cycles = (i as f64 * cycles_per_step).fract();
            Complex64::cis(sign * 2.0 * PI * cycles)
        })
        .collect()
}

/// Noiseless per-entry channel `H[k, n] = Σ b_l e^{-j2πkΔfτ_l} e^{j2πnTν_l}`.
pub fn channel_response(paths: &[PropagationPath], params: &DerivedParams) -> SymbolGrid {
    let (m, n) = (params.num_subcarriers, params.num_sensing_symbols);
    let df = params.subcarrier_spacing_hz;
    let t = params.sensing_repetition_s;

    // Paths sharing a Doppler share a symbol-axis ramp; fold their delay
    // ramps together first.
    let mut groups: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for p in paths {
        let delay = phase_ramp(m, df * p.delay_s, -1.0);
        let idx = match groups.iter().position(|(nu, _)| *nu == p.doppler_hz) {
            Some(i) => i,
            None => {
                groups.push((p.doppler_hz, vec![Complex64::new(0.0, 0.0); m]));
                groups.len() - 1
            }
        };
        for (acc, z) in groups[idx].1.iter_mut().zip(&delay) {
            *acc += z * p.gain_amplitude;
        }
    }

    let mut h = SymbolGrid::zeros(m, n);
    for (nu, freq) in &groups {
        let doppler = phase_ramp(n, t * nu, 1.0);
        for (k, a) in freq.iter().enumerate() {
            for (out, d) in h.row_mut(k).iter_mut().zip(&doppler) {
                *out += a * d;
            }
        }
    }
    h
}

/// Adds i.i.d. circular complex Gaussian noise of the given variance,
/// drawn from ChaCha8 seeded with `seed`.
pub fn add_noise(grid: &mut SymbolGrid, noise_variance: f64, seed: u64) {
    if noise_variance <= 0.0 {
        return;
    }
    let sigma = (noise_variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in grid.as_mut_slice() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += Complex64::new(re * sigma, im * sigma);
    }
}

/// Received sensing grid `R = S ∘ H + W`.
pub fn synthesize_rx_grid(
    reference: &SymbolGrid,
    paths: &[PropagationPath],
    noise: &NoiseSpec,
    params: &DerivedParams,
    seed: u64,
) -> Result<SymbolGrid> {
    let expected = (params.num_subcarriers, params.num_sensing_symbols);
    if reference.shape() != expected {
        return Err(Error::Shape(format!(
            "reference grid is {:?}, waveform expects {:?}",
            reference.shape(),
            expected
        )));
    }
    let mut rx = channel_response(paths, params);
    for (r, s) in rx.as_mut_slice().iter_mut().zip(reference.as_slice()) {
        *r *= s;
    }
    add_noise(&mut rx, noise.noise_variance, seed);
    Ok(rx)
}
