//! Simulates one noisy LOS snapshot and locates the target in its
//! delay-Doppler and power-delay profiles.

use bisense::channel::{noise_variance_from_snr, synthesize_rx_grid};
use bisense::features::{extract_roi, ProfileProcessor, RoiSpec};
use bisense::geometry::{enumerate_paths, sample_deployment, Hypothesis, Scenario, ScenarioSpec, SourceKind};
use bisense::numerology::{derive_params, generate_sensing_grid, WaveformConfig};

fn main() -> bisense::Result<()> {
    let cfg = WaveformConfig::desk();
    let params = derive_params(&cfg)?;
    let reference = generate_sensing_grid(&cfg, 1);
    let room = sample_deployment(&ScenarioSpec::new(Scenario::Los, Hypothesis::H1, true, 1), 9)?;
    let paths = enumerate_paths(&room, cfg.center_freq_hz)?;
    let noise = noise_variance_from_snr(120.0, &room, cfg.center_freq_hz)?;
    let rx = synthesize_rx_grid(&reference, &paths, &noise, &params, 3)?;

    let proc = ProfileProcessor::new(&params);
    let ddp = proc.ddp(&rx, &reference)?;
    let target = paths.iter().find(|p| p.source_kind == SourceKind::Target).expect("target path");
    println!(
        "target expected at delay bin {:.1}, doppler bin {:+.1}",
        target.delay_s / params.delay_bin_s(),
        target.doppler_hz / params.doppler_bin_hz()
    );

    // Strongest cell away from the static column.
    let zero = ddp.zero_doppler_col();
    let (mut best, mut at) = (0.0, (0, 0));
    for d in 0..ddp.delay_bins {
        for j in (0..ddp.doppler_bins).filter(|j| j.abs_diff(zero) > 1) {
            if ddp.get(d, j) > best {
                best = ddp.get(d, j);
                at = (d, j);
            }
        }
    }
    println!("moving peak at delay bin {}, doppler bin {:+}", at.0, at.1 as i64 - zero as i64);
    println!("ddp argmax (direct path) at {:?}", ddp.argmax());

    let pdp = proc.pdp(&rx, &reference)?;
    let roi = extract_roi(&ddp, &RoiSpec::default())?;
    println!("pdp has {} taps; ddp roi is {} x {}", pdp.data.len(), roi.height, roi.width);
    Ok(())
}
