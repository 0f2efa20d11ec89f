//! Trains the 1-D CNN on stationary-target power-delay profiles, saves the
//! checkpoint and checks that the reloaded model scores the same.

use bisense::detectors::{cnn_train, CnnModel, LabeledTensor, TrainConfig};
use bisense::geometry::Scenario;
use bisense::harness::io::{load_detectors, save_detectors};
use bisense::harness::{evaluate_detector, generate_dataset, split_dataset, CnnDetector, Dataset, DatasetSpec, UseCase};

fn labeled(d: &Dataset) -> Vec<LabeledTensor<'_>> {
    d.records.iter().map(|r| LabeledTensor { x: &r.features, label: r.label }).collect()
}

fn main() -> bisense::Result<()> {
    let spec = DatasetSpec::new(Scenario::Los, UseCase::Stationary, 200, 70.0, 1);
    let data = generate_dataset(&spec)?;
    let test = generate_dataset(&spec.clone().with_seed(99))?;
    let (fit, val) = split_dataset(&data, 0.7, 1)?;
    let fit = labeled(&fit);
    let val = labeled(&val);

    let model = CnnModel::for_tensor(fit[0].x, TrainConfig::default(), 1)?;
    println!("{} parameters", model.net.num_params());
    let out = cnn_train(model, &fit, &val)?;
    for s in &out.history {
        println!("epoch {:2} loss {:.4} val {:.3}", s.epoch, s.train_loss, s.validation_accuracy.unwrap_or(f64::NAN));
    }
    let report = evaluate_detector(&CnnDetector(out.model.clone()), &test)?;
    println!("best epoch {}, test accuracy {:.3}", out.best_epoch, report.accuracy);

    let dir = std::env::temp_dir().join("bisense-example-model");
    let baseline = bisense::detectors::fit_energy_threshold(&data.energies(), &data.labels())?;
    save_detectors(&out.model, &baseline, &dir)?;
    let (reloaded, _) = load_detectors(&dir)?;
    let again = evaluate_detector(&CnnDetector(reloaded), &test)?;
    println!("reloaded from {}: accuracy {:.3}", dir.display(), again.accuracy);
    Ok(())
}
