//! Waveform numerology: the OFDM sensing parameters, the timing and
//! resolution quantities they imply, and the known QPSK reference grid.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The rounded value radio engineers use for quick resolution budgets
/// (c/B = 0.6 m at 500 MHz).
pub const NOMINAL_SPEED_OF_LIGHT: f64 = 3.0e8;

/// Largest allowed excess of the occupied band `M·Δf` over the nominal
/// bandwidth, relative.
const BANDWIDTH_EXCESS_TOL: f64 = 1e-6;
/// The occupied band must fill at least this fraction of the nominal
/// bandwidth (guard bands allowed below it).
const MIN_OCCUPANCY: f64 = 0.95;

/// OFDM sensing waveform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub bandwidth_hz: f64,
    pub center_freq_hz: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    /// Fraction of OFDM symbols carrying the sensing reference, in (0, 1].
    pub sensing_fraction: f64,
    pub num_sensing_symbols: usize,
    #[serde(default = "one")]
    pub num_tx_antennas: usize,
    #[serde(default = "one")]
    pub num_rx_antennas: usize,
}

fn one() -> usize {
    1
}

impl WaveformConfig {
    /// The full-scale numerology: 500 MHz at 28 GHz, 1024 subcarriers at
    /// 480 kHz, 10% sensing occupancy and 1024 sensing symbols.
    pub fn full_scale() -> Self {
        Self {
            bandwidth_hz: 500e6,
            center_freq_hz: 28e9,
            num_subcarriers: 1024,
            subcarrier_spacing_hz: 480e3,
            sensing_fraction: 0.1,
            num_sensing_symbols: 1024,
            num_tx_antennas: 1,
            num_rx_antennas: 1,
        }
    }

    /// Reduced grid (256 x 128) that keeps the full-scale range and
    /// velocity resolution: the 500 MHz band is split into 256 wider
    /// subcarriers and the sensing symbols are spread so the CPI stays
    /// near 21 ms.
    pub fn desk() -> Self {
        Self {
            bandwidth_hz: 500e6,
            center_freq_hz: 28e9,
            num_subcarriers: 256,
            subcarrier_spacing_hz: 500e6 / 256.0,
            sensing_fraction: 1.0 / 320.0,
            num_sensing_symbols: 128,
            num_tx_antennas: 1,
            num_rx_antennas: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("center_freq_hz", self.center_freq_hz),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("sensing_fraction", self.sensing_fraction),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.sensing_fraction > 1.0 {
            return Err(Error::Config(format!(
                "sensing_fraction must lie in (0, 1], got {}",
                self.sensing_fraction
            )));
        }
        if self.num_subcarriers == 0 || self.num_sensing_symbols == 0 {
            return Err(Error::Config("grid dimensions must be nonzero".into()));
        }
        if self.num_tx_antennas != 1 || self.num_rx_antennas != 1 {
            return Err(Error::Config("only single-antenna tx and rx are supported".into()));
        }
        let occupied = self.num_subcarriers as f64 * self.subcarrier_spacing_hz;
        if occupied > self.bandwidth_hz * (1.0 + BANDWIDTH_EXCESS_TOL)
            || occupied < self.bandwidth_hz * MIN_OCCUPANCY
        {
            return Err(Error::Config(format!(
                "occupied band M*df = {occupied} Hz does not fit bandwidth {} Hz",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.num_subcarriers, self.num_sensing_symbols)
    }
}

/// On-disk waveform description. The key set is fixed; antenna counts are
/// implied (single antenna).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformFile {
    pub bandwidth_hz: f64,
    pub center_freq_hz: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub sensing_fraction: f64,
    pub num_sensing_symbols: usize,
    pub seed: u64,
}

impl WaveformFile {
    pub fn new(cfg: &WaveformConfig, seed: u64) -> Self {
        Self {
            bandwidth_hz: cfg.bandwidth_hz,
            center_freq_hz: cfg.center_freq_hz,
            num_subcarriers: cfg.num_subcarriers,
            subcarrier_spacing_hz: cfg.subcarrier_spacing_hz,
            sensing_fraction: cfg.sensing_fraction,
            num_sensing_symbols: cfg.num_sensing_symbols,
            seed,
        }
    }

    pub fn config(&self) -> WaveformConfig {
        WaveformConfig {
            bandwidth_hz: self.bandwidth_hz,
            center_freq_hz: self.center_freq_hz,
            num_subcarriers: self.num_subcarriers,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            sensing_fraction: self.sensing_fraction,
            num_sensing_symbols: self.num_sensing_symbols,
            num_tx_antennas: 1,
            num_rx_antennas: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WaveformFile = serde_json::from_str(text)?;
        file.config().validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Timing, resolution and ambiguity quantities implied by a [`WaveformConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub symbol_duration_s: f64,
    /// Interval between consecutive sensing symbols.
    pub sensing_repetition_s: f64,
    pub cpi_s: f64,
    pub range_resolution_m: f64,
    pub velocity_resolution_mps: f64,
    pub wavelength_m: f64,
    pub max_unambig_delay_s: f64,
    pub max_unambig_doppler_hz: f64,
    pub speed_of_light: f64,
    /// Sensing symbols are placed on every `sensing_stride`-th OFDM symbol.
    pub sensing_stride: usize,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    pub num_sensing_symbols: usize,
}

impl DerivedParams {
    /// Delay spanned by one delay bin of an M-point transform.
    pub fn delay_bin_s(&self) -> f64 {
        1.0 / (self.num_subcarriers as f64 * self.subcarrier_spacing_hz)
    }

    /// Doppler spanned by one Doppler bin of an N-point transform.
    pub fn doppler_bin_hz(&self) -> f64 {
        1.0 / (self.num_sensing_symbols as f64 * self.sensing_repetition_s)
    }

    pub fn max_unambig_velocity_mps(&self) -> f64 {
        self.wavelength_m * self.max_unambig_doppler_hz
    }
}

pub fn range_resolution(bandwidth_hz: f64, c: f64) -> f64 {
    c / bandwidth_hz
}

/// Bi-static velocity resolution `c / (T_c f_c)`.
pub fn velocity_resolution(cpi_s: f64, center_freq_hz: f64, c: f64) -> f64 {
    c / (cpi_s * center_freq_hz)
}

pub fn derive_params(cfg: &WaveformConfig) -> Result<DerivedParams> {
    derive_params_with_c(cfg, SPEED_OF_LIGHT)
}

/// Same as [`derive_params`] with an explicit propagation speed.
pub fn derive_params_with_c(cfg: &WaveformConfig, c: f64) -> Result<DerivedParams> {
    cfg.validate()?;
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Config(format!("speed of light must be positive, got {c}")));
    }
    let symbol_duration_s = 1.0 / cfg.subcarrier_spacing_hz;
    let sensing_repetition_s = symbol_duration_s / cfg.sensing_fraction;
    let cpi_s = cfg.num_sensing_symbols as f64 * sensing_repetition_s;
    Ok(DerivedParams {
        symbol_duration_s,
        sensing_repetition_s,
        cpi_s,
        range_resolution_m: range_resolution(cfg.bandwidth_hz, c),
        velocity_resolution_mps: velocity_resolution(cpi_s, cfg.center_freq_hz, c),
        wavelength_m: c / cfg.center_freq_hz,
        max_unambig_delay_s: 1.0 / cfg.subcarrier_spacing_hz,
        max_unambig_doppler_hz: 1.0 / (2.0 * sensing_repetition_s),
        speed_of_light: c,
        sensing_stride: (1.0 / cfg.sensing_fraction).ceil() as usize,
        subcarrier_spacing_hz: cfg.subcarrier_spacing_hz,
        num_subcarriers: cfg.num_subcarriers,
        num_sensing_symbols: cfg.num_sensing_symbols,
    })
}

/// Complex M x N grid, subcarriers along rows and sensing symbols along
/// columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot form a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, k: usize, n: usize) -> Complex64 {
        self.data[k * self.cols + n]
    }

    pub fn set(&mut self, k: usize, n: usize, v: Complex64) {
        self.data[k * self.cols + n] = v;
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * a).collect(),
        }
    }
}

/// The four QPSK points `(±1 ± j)/√2`, indexed by two bits.
pub const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Known random QPSK sensing reference.
///
/// Symbols come from ChaCha8 seeded with `seed` (via `seed_from_u64`);
/// each 64-bit output supplies 32 symbols, two bits each, lowest bits
/// first, filling the grid row-major.
pub fn generate_sensing_grid(cfg: &WaveformConfig, seed: u64) -> SymbolGrid {
    let (m, n) = cfg.grid_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(m * n);
    let mut word = 0u64;
    for i in 0..m * n {
        if i % 32 == 0 {
            word = rng.next_u64();
        }
        data.push(QPSK[(word & 3) as usize]);
        word >>= 2;
    }
    SymbolGrid {
        rows: m,
        cols: n,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_resolutions_with_nominal_c() {
        let p = derive_params_with_c(&WaveformConfig::full_scale(), NOMINAL_SPEED_OF_LIGHT).unwrap();
        assert_eq!(p.range_resolution_m, 0.6);
        // T = 1/(480e3 * 0.1)
        assert!((p.sensing_repetition_s - 20.833_333e-6).abs() < 1e-11);
        assert!((p.cpi_s - 21.333_333e-3).abs() < 1e-8);
        let vr_20ms = velocity_resolution(20e-3, 28e9, NOMINAL_SPEED_OF_LIGHT);
        assert!((vr_20ms - 0.535_714).abs() < 1e-6);
    }

    #[test]
    fn derived_invariants_hold() {
        for cfg in [WaveformConfig::full_scale(), WaveformConfig::desk()] {
            let p = derive_params(&cfg).unwrap();
            let c = p.speed_of_light;
            assert!((p.range_resolution_m * cfg.bandwidth_hz / c - 1.0).abs() < 1e-15);
            assert!((p.velocity_resolution_mps * p.cpi_s * cfg.center_freq_hz / c - 1.0).abs() < 1e-15);
            assert_eq!(p.max_unambig_delay_s, 1.0 / cfg.subcarrier_spacing_hz);
            assert_eq!(p.max_unambig_doppler_hz, 1.0 / (2.0 * p.sensing_repetition_s));
            assert!(p.max_unambig_velocity_mps() > 10.0);
        }
    }

    #[test]
    fn full_scale_stride_is_ten() {
        assert_eq!(derive_params(&WaveformConfig::full_scale()).unwrap().sensing_stride, 10);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = WaveformConfig::full_scale();
        cfg.bandwidth_hz = f64::NAN;
        assert!(matches!(derive_params(&cfg), Err(Error::Config(_))));

        let mut cfg = WaveformConfig::full_scale();
        cfg.sensing_fraction = 0.0;
        assert!(derive_params(&cfg).is_err());
        cfg.sensing_fraction = 1.5;
        assert!(derive_params(&cfg).is_err());

        let mut cfg = WaveformConfig::desk();
        cfg.num_subcarriers = 512;
        assert!(derive_params(&cfg).is_err());

        let mut cfg = WaveformConfig::desk();
        cfg.num_rx_antennas = 2;
        assert!(derive_params(&cfg).is_err());
    }

    #[test]
    fn grid_is_deterministic_and_unit_magnitude() {
        let cfg = WaveformConfig::desk();
        let a = generate_sensing_grid(&cfg, 7);
        let b = generate_sensing_grid(&cfg, 7);
        assert_eq!(a, b);
        assert_ne!(a, generate_sensing_grid(&cfg, 8));
        for z in a.as_slice() {
            assert_eq!(z.norm(), 1.0);
        }
    }

    #[test]
    fn qpsk_symbol_frequencies_are_uniform() {
        let mut cfg = WaveformConfig::desk();
        cfg.num_subcarriers = 4;
        cfg.num_sensing_symbols = 2;
        let small = generate_sensing_grid(&cfg, 0);
        assert_eq!(small.shape(), (4, 2));

        // Same stream, extended to 10^6 draws.
        cfg.num_subcarriers = 1000;
        cfg.num_sensing_symbols = 1000;
        let big = generate_sensing_grid(&cfg, 0);
        assert_eq!(&big.as_slice()[..8], small.as_slice());

        let mut counts = [0usize; 4];
        for z in big.as_slice() {
            let idx = QPSK.iter().position(|q| q == z).unwrap();
            counts[idx] += 1;
        }
        let expected = 250_000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 3 degrees of freedom, p = 0.001
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / expected - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn waveform_file_keys_are_exact() {
        let text = r#"{"bandwidth_hz":5e8,"center_freq_hz":2.8e10,"num_subcarriers":1024,
            "subcarrier_spacing_hz":480000,"sensing_fraction":0.1,"num_sensing_symbols":1024,"seed":3}"#;
        let f = WaveformFile::from_json(text).unwrap();
        assert_eq!(f.config(), WaveformConfig::full_scale());
        assert_eq!(f.seed, 3);

        let extra = text.replace("\"seed\":3", "\"seed\":3,\"extra\":1");
        assert!(WaveformFile::from_json(&extra).is_err());

        let v: serde_json::Value = serde_json::to_value(f).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "bandwidth_hz",
                "center_freq_hz",
                "num_sensing_symbols",
                "num_subcarriers",
                "seed",
                "sensing_fraction",
                "subcarrier_spacing_hz"
            ]
        );
    }
}
