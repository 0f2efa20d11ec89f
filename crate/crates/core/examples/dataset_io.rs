//! Writes a labelled dataset to disk, reads the manifest back and reloads
//! the records.

use bisense::geometry::Scenario;
use bisense::harness::io::{load_dataset, load_manifest, save_dataset};
use bisense::harness::{generate_dataset, DatasetSpec, UseCase};

fn main() -> bisense::Result<()> {
    let ds = generate_dataset(&DatasetSpec::new(Scenario::Nlos, UseCase::Moving, 8, 80.0, 5))?;
    let dir = std::env::temp_dir().join("bisense-example-data");
    save_dataset(&ds, &dir)?;

    let m = load_manifest(&dir)?;
    println!(
        "{}: {} records of {:?} {} x {}, {} bytes",
        dir.display(),
        m.count,
        m.feature_kind,
        m.height,
        m.width,
        m.records_bytes
    );
    let back = load_dataset(&dir)?;
    for (a, b) in ds.records.iter().zip(&back.records) {
        assert_eq!(a.features, b.features);
        println!("record {:2} {:?} energy {:9.3} dBW seed {:#018x}", b.index, b.label, b.energy_dbw, b.seed);
    }
    Ok(())
}
