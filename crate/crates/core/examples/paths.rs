//! Lists every propagation path of one LOS and one NLOS room.

use bisense::geometry::{enumerate_paths, sample_deployment, Hypothesis, Scenario, ScenarioSpec};

fn main() -> bisense::Result<()> {
    let fc = 28e9;
    for scenario in [Scenario::Los, Scenario::Nlos] {
        let spec = ScenarioSpec::new(scenario, Hypothesis::H1, true, 4);
        let room = sample_deployment(&spec, 17)?;
        let target = room.target.as_ref().expect("H1 room has a target");
        println!(
            "{}: target at ({:.2}, {:.2}) moving ({:.2}, {:.2}) m/s, {} walls",
            scenario.as_str(),
            target.position.x,
            target.position.y,
            target.velocity.x,
            target.velocity.y,
            room.walls.len()
        );
        for p in enumerate_paths(&room, fc)? {
            println!(
                "  {:8?} delay {:7.2} ns  doppler {:7.2} Hz  gain {:6.1} dB  bounces {}",
                p.source_kind,
                p.delay_s * 1e9,
                p.doppler_hz,
                20.0 * p.gain_amplitude.log10(),
                p.num_reflections
            );
        }
    }
    Ok(())
}
