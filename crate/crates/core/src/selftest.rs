//! Quick internal consistency checks, run by `bisense selftest`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{synthesize_rx_grid, NoiseSpec};
use crate::detectors::cnn::Architecture;
use crate::detectors::{fit_energy_threshold, gradient_check, CnnModel, TrainConfig};
use crate::error::Result;
use crate::features::{FeatureKind, FeatureTensor, ProfileProcessor};
use crate::geometry::{Hypothesis, PropagationPath, SourceKind};
use crate::numerology::{
    derive_params, derive_params_with_c, generate_sensing_grid, velocity_resolution, SymbolGrid, WaveformConfig,
    NOMINAL_SPEED_OF_LIGHT,
};
use crate::oracle::{brute_force_ddp, brute_force_pdp};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn small_config(m: usize, n: usize) -> WaveformConfig {
    WaveformConfig {
        num_subcarriers: m,
        subcarrier_spacing_hz: 500e6 / m as f64,
        num_sensing_symbols: n,
        ..WaveformConfig::desk()
    }
}

fn numerology() -> Result<Check> {
    let p = derive_params_with_c(&WaveformConfig::full_scale(), NOMINAL_SPEED_OF_LIGHT)?;
    let vr = velocity_resolution(20e-3, 28e9, NOMINAL_SPEED_OF_LIGHT);
    let ok = p.range_resolution_m == 0.6 && ((vr - 0.536) / 0.536).abs() < 1e-3 && (p.cpi_s / 20e-3 - 1.0).abs() <= 0.1;
    Ok(check(
        "numerology",
        ok,
        format!("range res {} m, velocity res {vr:.4} m/s, cpi {:.2} ms", p.range_resolution_m, p.cpi_s * 1e3),
    ))
}

fn oracle_equivalence() -> Result<Vec<Check>> {
    let cfg = small_config(16, 8);
    let params = derive_params(&cfg)?;
    let reference = generate_sensing_grid(&cfg, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.0, 1.0).expect("valid");
    let data = (0..16 * 8)
        .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    let rx = SymbolGrid::from_vec(16, 8, data)?;
    let proc = ProfileProcessor::new(&params);
    let ddp = proc.ddp(&rx, &reference)?;
    let pdp = proc.pdp(&rx, &reference)?;
    let want_ddp = brute_force_ddp(&rx, &reference);
    let want_pdp = brute_force_pdp(&rx, &reference);
    let (mut num, mut den) = (0.0, 0.0);
    for (d, row) in want_ddp.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            num += (ddp.get(d, j) - w).powi(2);
            den += w * w;
        }
    }
    let e_ddp = (num / den).sqrt();
    let num: f64 = pdp.data.iter().zip(&want_pdp).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want_pdp.iter().map(|b| b * b).sum();
    let e_pdp = (num / den).sqrt();
    let ratio_energy: f64 = (0..16)
        .flat_map(|k| (0..8).map(move |n| (k, n)))
        .map(|(k, n)| (rx.get(k, n) / reference.get(k, n)).norm_sqr())
        .sum();
    let parseval = (ddp.total() - ratio_energy * 8.0 / 16.0).abs() / ddp.total();
    Ok(vec![
        check("ddp-oracle", e_ddp <= 1e-9, format!("relative error {e_ddp:.2e}")),
        check("pdp-oracle", e_pdp <= 1e-9, format!("relative error {e_pdp:.2e}")),
        check("parseval", parseval <= 1e-9, format!("relative error {parseval:.2e}")),
    ])
}

fn peak_localization() -> Result<Check> {
    let cfg = WaveformConfig::desk();
    let p = derive_params(&cfg)?;
    let reference = generate_sensing_grid(&cfg, 1);
    let proc = ProfileProcessor::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = p.num_sensing_symbols as f64;
    let mut hits = 0;
    let trials = 20;
    for _ in 0..trials {
        let delay_bins = rng.random_range(1.0..100.0);
        let doppler_bins = rng.random_range(-40.0..40.0);
        let path = PropagationPath {
            gain_amplitude: 1.0,
            delay_s: delay_bins * p.delay_bin_s(),
            doppler_hz: doppler_bins * p.doppler_bin_hz(),
            dist_tx_m: 1.0,
            dist_rx_m: 1.0,
            num_reflections: 0,
            source_kind: SourceKind::Target,
            reflection_points: Vec::new(),
        };
        let rx = synthesize_rx_grid(&reference, &[path], &NoiseSpec::noiseless(), &p, 0)?;
        let (d, j) = proc.ddp(&rx, &reference)?.argmax();
        let want_j = doppler_bins + n / 2.0;
        if (d as f64 - delay_bins).abs() <= 1.0 && (j as f64 - want_j).abs() <= 1.0 {
            hits += 1;
        }
    }
    Ok(check("peak-localization", hits == trials, format!("{hits}/{trials} within one bin")))
}

fn energy_threshold() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (h0, h1) = (Normal::new(-100.0, 2.0).expect("valid"), Normal::new(-90.0, 2.0).expect("valid"));
    let mut e = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2000 {
        let is_h1 = i % 2 == 1;
        e.push(if is_h1 { h1.sample(&mut rng) } else { h0.sample(&mut rng) });
        labels.push(Hypothesis::from_bit(is_h1));
    }
    let det = fit_energy_threshold(&e, &labels)?;
    Ok(check(
        "energy-threshold",
        (det.threshold_dbw + 95.0).abs() <= 0.2,
        format!("threshold {:.3} dBW", det.threshold_dbw),
    ))
}

fn gradients() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = FeatureTensor {
        kind: FeatureKind::Ddp,
        height: 32,
        width: 32,
        data: (0..32 * 32).map(|_| rng.random::<f32>()).collect(),
        delay_offset: 0,
        doppler_offset: 0,
    };
    let model = CnnModel::new(Architecture::ddp(32, 32), TrainConfig::default(), 5)?;
    let r = gradient_check(&model, &x, Hypothesis::H1, 6)?;
    Ok(check(
        "gradient-check",
        r.max_rel_error <= 1e-4,
        format!("max relative error {:.2e}", r.max_rel_error),
    ))
}

pub fn run_all() -> Result<Vec<Check>> {
    let mut out = vec![numerology()?];
    out.extend(oracle_equivalence()?);
    out.push(peak_localization()?);
    out.push(energy_threshold()?);
    out.push(gradients()?);
    Ok(out)
}
