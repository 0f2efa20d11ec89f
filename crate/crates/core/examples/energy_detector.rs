//! Fits the energy baseline on a simulated training set and scores it on a
//! fresh test set at a few SNR values.

use bisense::detectors::fit_energy_threshold;
use bisense::geometry::Scenario;
use bisense::harness::{evaluate_detector, generate_dataset, DatasetSpec, EnergyBaseline, UseCase};

fn main() -> bisense::Result<()> {
    for snr in [60.0, 90.0, 120.0] {
        let train = generate_dataset(&DatasetSpec::new(Scenario::Los, UseCase::Moving, 100, snr, 1))?;
        let test = generate_dataset(&DatasetSpec::new(Scenario::Los, UseCase::Moving, 100, snr, 1).with_seed(2))?;
        let det = fit_energy_threshold(&train.energies(), &train.labels())?;
        let r = evaluate_detector(&EnergyBaseline(det), &test)?;
        println!(
            "snr {snr:5.1} dB  eta {:8.3} dBW  H0 {:8.3}±{:.3}  H1 {:8.3}±{:.3}  accuracy {:.3}",
            det.threshold_dbw,
            det.h0.mean,
            det.h0.variance.sqrt(),
            det.h1.mean,
            det.h1.variance.sqrt(),
            r.accuracy
        );
    }
    Ok(())
}
