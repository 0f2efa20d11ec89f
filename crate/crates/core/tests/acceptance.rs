//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use bisense::channel::{synthesize_rx_grid, NoiseSpec};
use bisense::detectors::cnn::Architecture;
use bisense::detectors::{
    classify_energy, fit_energy_threshold, gradient_check, CnnModel, LabeledTensor, TrainConfig, Trainer,
};
use bisense::features::{FeatureKind, FeatureTensor, ProfileProcessor};
use bisense::geometry::{enumerate_paths, sample_deployment, Hypothesis, Scenario, ScenarioSpec, SourceKind};
use bisense::harness::{crossing_snr, isotonic_fit, sweep_snr, write_csv, EvalReport, SweepConfig, UseCase};
use bisense::numerology::{
    derive_params, derive_params_with_c, generate_sensing_grid, velocity_resolution, SymbolGrid, WaveformConfig,
    NOMINAL_SPEED_OF_LIGHT,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn numerology() -> Outcome {
    let p = derive_params_with_c(&WaveformConfig::full_scale(), NOMINAL_SPEED_OF_LIGHT).unwrap();
    let vr = velocity_resolution(20e-3, 28e9, NOMINAL_SPEED_OF_LIGHT);
    let range_ok = (p.range_resolution_m - 0.600).abs() < 1e-12;
    let vel_ok = (vr / 0.536 - 1.0).abs() <= 1e-3;
    let cpi_ok = (p.cpi_s / 20e-3 - 1.0).abs() <= 0.10;
    outcome(
        range_ok && vel_ok && cpi_ok,
        format!(
            "R_r {:.4} m, V_r {vr:.4} m/s, T_c {:.2} ms",
            p.range_resolution_m,
            p.cpi_s * 1e3
        ),
    )
}

fn random_grid(m: usize, n: usize, rng: &mut ChaCha8Rng) -> SymbolGrid {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = (0..m * n)
        .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    SymbolGrid::from_vec(m, n, data).unwrap()
}

/// Literal double sum: IDFT over subcarriers (1/M), DFT over symbols,
/// zero Doppler moved to column N/2.
fn direct_ddp(g: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    let (m, n) = (g.len(), g[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for (d, row) in out.iter_mut().enumerate() {
        for l in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, gk) in g.iter().enumerate() {
                for (s, z) in gk.iter().enumerate() {
                    acc += z * Complex64::cis(2.0 * PI * ((k * d) as f64 / m as f64 - (s * l) as f64 / n as f64));
                }
            }
            row[(l + n / 2) % n] = (acc / m as f64).norm_sqr();
        }
    }
    out
}

fn direct_pdp(g: &[Vec<Complex64>]) -> Vec<f64> {
    let (m, n) = (g.len(), g[0].len());
    (0..m)
        .map(|d| {
            (0..n)
                .map(|s| {
                    let acc: Complex64 = (0..m)
                        .map(|k| g[k][s] * Complex64::cis(2.0 * PI * (k * d) as f64 / m as f64))
                        .sum();
                    (acc / m as f64).norm_sqr()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for (m, n) in [(16, 16), (16, 8), (8, 4), (4, 16), (2, 2), (12, 6)] {
        let cfg = WaveformConfig {
            num_subcarriers: m,
            subcarrier_spacing_hz: 500e6 / m as f64,
            num_sensing_symbols: n,
            ..WaveformConfig::desk()
        };
        let params = derive_params(&cfg).unwrap();
        let proc = ProfileProcessor::new(&params);
        let rx = random_grid(m, n, &mut rng);
        let reference = generate_sensing_grid(&cfg, rng.random());
        let g: Vec<Vec<Complex64>> = (0..m)
            .map(|k| (0..n).map(|s| rx.get(k, s) / reference.get(k, s)).collect())
            .collect();
        let energy: f64 = g.iter().flatten().map(|z| z.norm_sqr()).sum();

        let ddp = proc.ddp(&rx, &reference).unwrap();
        let got: Vec<f64> = (0..m).flat_map(|d| (0..n).map(move |j| (d, j))).map(|(d, j)| ddp.get(d, j)).collect();
        let want: Vec<f64> = direct_ddp(&g).concat();
        worst = worst.max(rel_err(&got, &want));
        let p_ddp = (ddp.total() - energy * n as f64 / m as f64).abs() / ddp.total();

        let pdp = proc.pdp(&rx, &reference).unwrap();
        worst = worst.max(rel_err(&pdp.data, &direct_pdp(&g)));
        let pdp_total: f64 = pdp.data.iter().sum();
        let p_pdp = (pdp_total - energy / (m * n) as f64).abs() / pdp_total;
        worst_parseval = worst_parseval.max(p_ddp).max(p_pdp);
    }
    outcome(
        worst <= 1e-9 && worst_parseval <= 1e-9,
        format!("max transform error {worst:.2e}, max Parseval error {worst_parseval:.2e}"),
    )
}

fn peak_localization() -> Outcome {
    let cfg = WaveformConfig::desk();
    let p = derive_params(&cfg).unwrap();
    let proc = ProfileProcessor::new(&p);
    let n = p.num_sensing_symbols as f64;
    let m_df = p.num_subcarriers as f64 * p.subcarrier_spacing_hz;
    let n_t = n * p.sensing_repetition_s;
    let mut spec = ScenarioSpec::new(Scenario::Los, Hypothesis::H1, true, 5);
    spec.num_clutter = 0;
    let mut hits = 0;
    let scenes = 100;
    for i in 0..scenes {
        let d = sample_deployment(&spec, 1000 + i).unwrap();
        let target: Vec<_> = enumerate_paths(&d, cfg.center_freq_hz)
            .unwrap()
            .into_iter()
            .filter(|q| q.source_kind == SourceKind::Target)
            .collect();
        let reference = generate_sensing_grid(&cfg, i);
        let rx = synthesize_rx_grid(&reference, &target, &NoiseSpec::noiseless(), &p, 0).unwrap();
        let (dd, jj) = proc.ddp(&rx, &reference).unwrap().argmax();
        let want_d = target[0].delay_s * m_df;
        let want_j = target[0].doppler_hz * n_t + n / 2.0;
        if (dd as f64 - want_d).abs() <= 1.0 && (jj as f64 - want_j).abs() <= 1.0 {
            hits += 1;
        }
    }
    outcome(hits == scenes, format!("{hits}/{scenes} peaks within one bin"))
}

fn energy_baseline() -> Outcome {
    let sigma = 4.0;
    let (mu0, mu1) = (-100.0, -90.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (h0, h1) = (Normal::new(mu0, sigma).unwrap(), Normal::new(mu1, sigma).unwrap());
    let n = 10_000;
    let draw = |rng: &mut ChaCha8Rng| {
        let mut e = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let is_h1 = i % 2 == 1;
            e.push(if is_h1 { h1.sample(rng) } else { h0.sample(rng) });
            labels.push(Hypothesis::from_bit(is_h1));
        }
        (e, labels)
    };
    let (train_e, train_l) = draw(&mut rng);
    let det = fit_energy_threshold(&train_e, &train_l).unwrap();
    let (test_e, test_l) = draw(&mut rng);
    let correct = test_e
        .iter()
        .zip(&test_l)
        .filter(|(e, l)| classify_energy(&det, **e).decision == **l)
        .count();
    let acc = correct as f64 / n as f64;
    let std = StatNormal::new(0.0, 1.0).unwrap();
    let closed = std.cdf((mu1 - mu0) / (2.0 * sigma));
    let eta_ok = (det.threshold_dbw - (mu0 + mu1) / 2.0).abs() <= 0.2;
    let acc_ok = (acc - closed).abs() <= 0.02;
    outcome(
        eta_ok && acc_ok,
        format!("eta {:.3} dBW, accuracy {acc:.4} vs closed form {closed:.4}", det.threshold_dbw),
    )
}

fn random_tensor(h: usize, w: usize, rng: &mut ChaCha8Rng) -> FeatureTensor {
    FeatureTensor {
        kind: if h == 1 { FeatureKind::Pdp } else { FeatureKind::Ddp },
        height: h,
        width: w,
        data: (0..h * w).map(|_| rng.random::<f32>()).collect(),
        delay_offset: 0,
        doppler_offset: 0,
    }
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    let mut min_sampled = usize::MAX;
    let mut short_layers = Vec::new();
    for arch in [Architecture::ddp(32, 32), Architecture::pdp(64)] {
        let (h, w) = (arch.input_h, arch.input_w);
        let model = CnnModel::new(arch, TrainConfig::default(), 7).unwrap();
        let probe = random_tensor(h, w, &mut rng);
        let mut checks = vec![gradient_check(&model, &probe, Hypothesis::H1, 1).unwrap()];

        let batch: Vec<FeatureTensor> = (0..16).map(|_| random_tensor(h, w, &mut rng)).collect();
        let labeled: Vec<LabeledTensor> = batch
            .iter()
            .enumerate()
            .map(|(i, x)| LabeledTensor {
                x,
                label: Hypothesis::from_bit(i % 2 == 0),
            })
            .collect();
        let mut trainer = Trainer::new(model).unwrap();
        for _ in 0..10 {
            trainer.step(&labeled).unwrap();
        }
        checks.push(gradient_check(&trainer.model, &probe, Hypothesis::H0, 2).unwrap());

        for c in &checks {
            worst = worst.max(c.max_rel_error);
            for l in &c.layers {
                if l.params < 100 {
                    // Small layers are checked exhaustively.
                    if l.sampled != l.params {
                        min_sampled = 0;
                    }
                    short_layers.push(format!("{}#{}={}", l.kind, l.layer, l.params));
                } else {
                    min_sampled = min_sampled.min(l.sampled);
                }
            }
        }
    }
    short_layers.sort();
    short_layers.dedup();
    outcome(
        worst <= 1e-4 && min_sampled >= 100,
        format!(
            "max relative error {worst:.2e}, min sampled {min_sampled} (exhaustive: {})",
            short_layers.join(" ")
        ),
    )
}

fn los_config() -> SweepConfig {
    SweepConfig {
        scenarios: vec![Scenario::Los],
        use_case: UseCase::Moving,
        snr_db: vec![30.0, 45.0, 60.0, 75.0, 90.0, 105.0, 120.0],
        ..SweepConfig::default()
    }
}

fn run_sweep(cfg: &SweepConfig) -> Vec<EvalReport> {
    sweep_snr(cfg, |r| {
        println!(
            "    {} {} {:6.1} dB {:8} accuracy {:.3}",
            r.scenario.as_str(),
            r.use_case.as_str(),
            r.snr_db,
            r.detector,
            r.accuracy
        )
    })
    .unwrap()
}

fn curve(rows: &[EvalReport], detector: &str) -> (Vec<f64>, Vec<f64>) {
    rows.iter().filter(|r| r.detector == detector).map(|r| (r.snr_db, r.accuracy)).unzip()
}

fn isotonic_residual(acc: &[f64]) -> f64 {
    acc.iter().zip(isotonic_fit(acc)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn fmt_crossing(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| format!("{v:.1} dB"))
}

fn end_to_end_los(rows: &[EvalReport]) -> Outcome {
    let (snr, base) = curve(rows, "baseline");
    let (_, ai) = curve(rows, "ai");
    let res_base = isotonic_residual(&base);
    let res_ai = isotonic_residual(&ai);
    let dominated: Vec<f64> = snr
        .iter()
        .zip(base.iter().zip(&ai))
        .filter(|(_, (b, a))| (0.55..=0.95).contains(*b) && a < b)
        .map(|(s, _)| *s)
        .collect();
    let x_base = crossing_snr(&snr, &base, 0.8);
    let x_ai = crossing_snr(&snr, &ai, 0.8);
    let gain = x_base.zip(x_ai).map(|(b, a)| b - a);
    let passed = res_base < 0.05 && res_ai < 0.05 && dominated.is_empty() && gain.is_some_and(|g| g >= 3.0);
    outcome(
        passed,
        format!(
            "isotonic residual baseline {res_base:.3} ai {res_ai:.3}; ai below baseline at {dominated:?}; \
             0.8 crossing baseline {} ai {}; gain {} (reference figure 10 dB)",
            fmt_crossing(x_base),
            fmt_crossing(x_ai),
            gain.map_or("n/a".into(), |g| format!("{g:.1} dB"))
        ),
    )
}

fn ai_crossing(rows: &[EvalReport], scenario: Scenario) -> Option<f64> {
    let (snr, acc): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.detector == "ai" && r.scenario == scenario)
        .map(|r| (r.snr_db, r.accuracy))
        .unzip();
    crossing_snr(&snr, &acc, 0.8)
}

fn end_to_end_nlos(los_moving: &[EvalReport]) -> Outcome {
    let moving_nlos = SweepConfig {
        scenarios: vec![Scenario::Nlos],
        use_case: UseCase::Moving,
        snr_db: vec![45.0, 55.0, 65.0, 75.0, 85.0],
        ..SweepConfig::default()
    };
    let stationary = SweepConfig {
        scenarios: vec![Scenario::Los, Scenario::Nlos],
        use_case: UseCase::Stationary,
        snr_db: vec![40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 80.0, 90.0],
        ..SweepConfig::default()
    };
    let nlos_moving = run_sweep(&moving_nlos);
    let still = run_sweep(&stationary);
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, los, nlos) in [
        ("moving", ai_crossing(los_moving, Scenario::Los), ai_crossing(&nlos_moving, Scenario::Nlos)),
        ("stationary", ai_crossing(&still, Scenario::Los), ai_crossing(&still, Scenario::Nlos)),
    ] {
        let ok = matches!((los, nlos), (Some(l), Some(n)) if n > l);
        passed &= ok;
        let gap = los.zip(nlos).map_or("n/a".into(), |(l, n)| format!("{:.1} dB", n - l));
        parts.push(format!("{name}: los {} nlos {} gap {gap}", fmt_crossing(los), fmt_crossing(nlos)));
    }
    outcome(passed, parts.join("; "))
}

fn csv_bytes(rows: &[EvalReport]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(rows, &mut out).unwrap();
    out
}

fn determinism(first: &[EvalReport]) -> Outcome {
    let here = rayon::current_num_threads();
    let threads = if here == 1 { 3 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let second = pool.install(|| run_sweep(&los_config()));
    let (a, b) = (csv_bytes(first), csv_bytes(&second));
    outcome(
        a == b,
        format!("{} rows, {here} vs {threads} worker threads, csv {} bytes identical: {}", first.len(), a.len(), a == b),
    )
}

fn report(id: usize, name: &str, start: Instant, o: &Outcome) -> bool {
    println!(
        "criterion {id} {:<22} {} ({:.1} s) {}",
        name,
        if o.passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o.passed
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "numerology", t, &numerology());
    let t = Instant::now();
    all &= report(2, "oracle-equivalence", t, &oracle_equivalence());
    let t = Instant::now();
    all &= report(3, "peak-localization", t, &peak_localization());
    let t = Instant::now();
    all &= report(4, "energy-baseline", t, &energy_baseline());
    let t = Instant::now();
    all &= report(5, "gradient-check", t, &gradients());

    let t = Instant::now();
    let los = run_sweep(&los_config());
    let c6 = end_to_end_los(&los);
    let c6 = Outcome {
        passed: c6.passed && t.elapsed().as_secs() <= 15 * 60,
        ..c6
    };
    all &= report(6, "end-to-end-los", t, &c6);
    let t = Instant::now();
    all &= report(7, "end-to-end-nlos", t, &end_to_end_nlos(&los));
    let t = Instant::now();
    all &= report(8, "determinism", t, &determinism(&los));

    if !all {
        std::process::exit(1);
    }
}
