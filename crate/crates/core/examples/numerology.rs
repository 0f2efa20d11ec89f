//! Resolution and timing figures for the full-scale and desk waveforms.

use bisense::numerology::{derive_params, derive_params_with_c, WaveformConfig, NOMINAL_SPEED_OF_LIGHT};

fn main() -> bisense::Result<()> {
    for (name, cfg) in [("full scale", WaveformConfig::full_scale()), ("desk", WaveformConfig::desk())] {
        let p = derive_params(&cfg)?;
        println!("{name}: {} x {} grid", cfg.num_subcarriers, cfg.num_sensing_symbols);
        println!("  symbol       {:.3} us", p.symbol_duration_s * 1e6);
        println!("  repetition   {:.3} us (stride {})", p.sensing_repetition_s * 1e6, p.sensing_stride);
        println!("  cpi          {:.2} ms", p.cpi_s * 1e3);
        println!("  range res    {:.4} m", p.range_resolution_m);
        println!("  velocity res {:.4} m/s", p.velocity_resolution_mps);
        println!("  max velocity {:.2} m/s", p.max_unambig_velocity_mps());
    }
    let nominal = derive_params_with_c(&WaveformConfig::full_scale(), NOMINAL_SPEED_OF_LIGHT)?;
    println!("full scale at c = 3e8: range res {} m", nominal.range_resolution_m);
    Ok(())
}
