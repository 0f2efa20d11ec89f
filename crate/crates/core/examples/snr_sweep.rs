//! Small SNR sweep with both detectors, written as CSV to stdout.
//! Pass a JSON sweep config path to override the built-in one.

use bisense::harness::{crossing_snr, sweep_snr, write_csv, SweepConfig, UseCase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => SweepConfig {
            use_case: UseCase::Stationary,
            snr_db: vec![40.0, 55.0, 70.0, 85.0, 100.0],
            k_train: 150,
            k_test: 100,
            ..SweepConfig::default()
        },
    };
    let rows = sweep_snr(&cfg, |r| eprintln!("{:6.1} dB {:8} {:.3}", r.snr_db, r.detector, r.accuracy))?;
    write_csv(&rows, std::io::stdout())?;

    for det in ["baseline", "ai"] {
        let (snr, acc): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.detector == det).map(|r| (r.snr_db, r.accuracy)).unzip();
        match crossing_snr(&snr, &acc, 0.8) {
            Some(x) => eprintln!("{det} reaches 0.8 at {x:.1} dB"),
            None => eprintln!("{det} never reaches 0.8"),
        }
    }
    Ok(())
}
