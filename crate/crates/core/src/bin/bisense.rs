use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bisense::detectors::TrainConfig;
use bisense::geometry::Scenario;
use bisense::harness::io::{load_dataset, load_detectors, save_dataset, save_detectors};
use bisense::harness::{
    evaluate_detector, generate_dataset, sweep_snr, train_detectors, write_csv, CnnDetector, DatasetSpec,
    EnergyBaseline, SweepConfig, UseCase,
};

#[derive(Parser)]
#[command(name = "bisense", version, about = "Bi-static OFDM passive-target sensing simulator")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled dataset and write it to a directory.
    Generate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        use_case: UseCase,
        /// Records per class.
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the energy baseline and train the CNN on a stored dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of the data used for fitting; the rest validates.
        #[arg(long, default_value_t = 0.7)]
        split_ratio: f64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Score both trained detectors on a stored dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full SNR sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle and gradient checks.
    Selftest,
}

fn generate(scenario: Scenario, use_case: UseCase, k: usize, snr_db: f64, seed: u64, out: &Path) -> Result<()> {
    let spec = DatasetSpec::new(scenario, use_case, k, snr_db, seed);
    let ds = generate_dataset(&spec).context("generate")?;
    save_dataset(&ds, out).context("write-data")?;
    eprintln!("wrote {} records to {}", ds.records.len(), out.display());
    Ok(())
}

fn train(data: &Path, out: &Path, split_ratio: f64, epochs: Option<usize>, seed: u64) -> Result<()> {
    let ds = load_dataset(data).context("load-data")?;
    let mut cfg = TrainConfig::default();
    if let Some(e) = epochs {
        cfg.max_epochs = e;
    }
    let trained = train_detectors(&ds, split_ratio, &cfg, seed).context("train")?;
    save_detectors(&trained.cnn, &trained.baseline, out).context("save-model")?;
    for s in &trained.training.history {
        let acc = s.validation_accuracy.map_or("-".to_string(), |a| format!("{a:.3}"));
        eprintln!("epoch {:3} loss {:.4} val {acc}", s.epoch, s.train_loss);
    }
    eprintln!("best epoch {}, model in {}", trained.training.best_epoch, out.display());
    Ok(())
}

fn eval(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (cnn, baseline) = load_detectors(model).context("load-model")?;
    let ds = load_dataset(data).context("load-data")?;
    let rows = vec![
        evaluate_detector(&EnergyBaseline(baseline), &ds).context("evaluate")?,
        evaluate_detector(&CnnDetector(cnn), &ds).context("evaluate")?,
    ];
    write_rows(&rows, out)?;
    for r in &rows {
        eprintln!("{:8} accuracy {:.3} p_fa {:.3} p_md {:.3}", r.detector, r.accuracy, r.p_fa, r.p_md);
    }
    Ok(())
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("read-config: {}", config.display()))?;
    let cfg: SweepConfig = serde_json::from_str(&text).context("parse-config")?;
    let rows = sweep_snr(&cfg, |r| {
        eprintln!(
            "{} {} {:6.1} dB {:8} accuracy {:.3}",
            r.scenario.as_str(),
            r.use_case.as_str(),
            r.snr_db,
            r.detector,
            r.accuracy
        )
    })
    .context("sweep")?;
    write_rows(&rows, out)
}

fn write_rows(rows: &[bisense::harness::EvalReport], out: &Path) -> Result<()> {
    let f = File::create(out).with_context(|| format!("write-csv: {}", out.display()))?;
    write_csv(rows, BufWriter::new(f)).context("write-csv")
}

fn selftest() -> Result<()> {
    let checks = bisense::selftest::run_all().context("selftest")?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {:20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("selftest: {failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("threads")?;
    }
    match cli.command {
        Command::Generate { scenario, use_case, k, snr_db, seed, out } => generate(scenario, use_case, k, snr_db, seed, &out),
        Command::Train { data, out, split_ratio, epochs, seed } => train(&data, &out, split_ratio, epochs, seed),
        Command::Eval { model, data, out } => eval(&model, &data, &out),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Selftest => selftest(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
