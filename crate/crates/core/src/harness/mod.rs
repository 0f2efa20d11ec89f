//! Dataset generation, detector evaluation and SNR sweeps.

mod dataset;
mod eval;
pub mod io;
mod sweep;

pub use dataset::{derive_seed, generate_dataset, split_dataset, Dataset, DatasetRecord, DatasetSpec, UseCase};
pub use eval::{evaluate_detector, CnnDetector, Detector, DetectorInput, EnergyBaseline, EvalReport};
pub use sweep::{
    crossing_snr, isotonic_fit, read_csv, sweep_snr, train_detectors, write_csv, CsvRow, SweepConfig,
    TrainedDetectors,
};
