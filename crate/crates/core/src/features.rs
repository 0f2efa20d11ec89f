//! Delay-Doppler and power-delay profiles of a received grid, and the
//! cropped, normalized tensors the CNN detectors consume.
//!
//! DFT convention: the forward transform over sensing symbols is unscaled;
//! the inverse transform over subcarriers is scaled by 1/M. Under this
//! convention `Σ DDP = (N/M)·‖R⊘S‖²_F`, and for a stationary scene the
//! zero-Doppler DDP column equals `N²·PDP`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerology::{DerivedParams, SymbolGrid};

/// |R/S|² map; rows are delay bins, columns are Doppler bins with zero
/// Doppler at column `N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerProfile {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub data: Vec<f64>,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
}

impl DelayDopplerProfile {
    pub fn get(&self, delay: usize, doppler: usize) -> f64 {
        self.data[delay * self.doppler_bins + doppler]
    }

    pub fn zero_doppler_col(&self) -> usize {
        self.doppler_bins / 2
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// (delay bin, shifted Doppler column) of the largest entry.
    pub fn argmax(&self) -> (usize, usize) {
        let i = argmax(&self.data);
        (i / self.doppler_bins, i % self.doppler_bins)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub data: Vec<f64>,
    pub delay_bin_s: f64,
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// FFT plans for one grid shape. Reusable across frames.
pub struct ProfileProcessor {
    m: usize,
    n: usize,
    forward_n: Arc<dyn Fft<f64>>,
    inverse_m: Arc<dyn Fft<f64>>,
    delay_bin_s: f64,
    doppler_bin_hz: f64,
}

impl ProfileProcessor {
    pub fn new(params: &DerivedParams) -> Self {
        let (m, n) = (params.num_subcarriers, params.num_sensing_symbols);
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            forward_n: planner.plan_fft_forward(n),
            inverse_m: planner.plan_fft_inverse(m),
            delay_bin_s: params.delay_bin_s(),
            doppler_bin_hz: params.doppler_bin_hz(),
        }
    }

    fn equalize(&self, rx: &SymbolGrid, reference: &SymbolGrid) -> Result<SymbolGrid> {
        if rx.shape() != reference.shape() || rx.shape() != (self.m, self.n) {
            return Err(Error::Shape(format!(
                "received {:?} and reference {:?} grids must both be {:?}",
                rx.shape(),
                reference.shape(),
                (self.m, self.n)
            )));
        }
        let mut g = rx.clone();
        for k in 0..self.m {
            for (n, (z, s)) in g.row_mut(k).iter_mut().zip(reference.row(k)).enumerate() {
                if s.norm_sqr() == 0.0 {
                    return Err(Error::DivisionByZero { k, n });
                }
                *z /= s;
            }
        }
        Ok(g)
    }

    /// Inverse DFT over subcarriers (scaled 1/M) of every column, returned
    /// column-major: `out[n * M + m]`.
    fn delay_transform(&self, g: &SymbolGrid) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        let mut cols = vec![Complex64::new(0.0, 0.0); m * n];
        for k in 0..m {
            for (j, z) in g.row(k).iter().enumerate() {
                cols[j * m + k] = *z;
            }
        }
        self.inverse_m.process(&mut cols);
        let scale = 1.0 / m as f64;
        cols.iter_mut().for_each(|z| *z *= scale);
        cols
    }

    pub fn ddp(&self, rx: &SymbolGrid, reference: &SymbolGrid) -> Result<DelayDopplerProfile> {
        let mut g = self.equalize(rx, reference)?;
        // Rows are contiguous: Doppler transform in place.
        self.forward_n.process(g.as_mut_slice());
        let cols = self.delay_transform(&g);
        let (m, n) = (self.m, self.n);
        let mut data = vec![0.0; m * n];
        for l in 0..n {
            let j = (l + n / 2) % n;
            for d in 0..m {
                data[d * n + j] = cols[l * m + d].norm_sqr();
            }
        }
        Ok(DelayDopplerProfile {
            delay_bins: m,
            doppler_bins: n,
            data,
            delay_bin_s: self.delay_bin_s,
            doppler_bin_hz: self.doppler_bin_hz,
        })
    }

    pub fn pdp(&self, rx: &SymbolGrid, reference: &SymbolGrid) -> Result<PowerDelayProfile> {
        let g = self.equalize(rx, reference)?;
        let cols = self.delay_transform(&g);
        let (m, n) = (self.m, self.n);
        let mut data = vec![0.0; m];
        for col in cols.chunks_exact(m) {
            for (acc, z) in data.iter_mut().zip(col) {
                *acc += z.norm_sqr();
            }
        }
        let inv_n = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= inv_n);
        Ok(PowerDelayProfile {
            data,
            delay_bin_s: self.delay_bin_s,
        })
    }
}

pub fn compute_ddp(rx: &SymbolGrid, reference: &SymbolGrid, params: &DerivedParams) -> Result<DelayDopplerProfile> {
    ProfileProcessor::new(params).ddp(rx, reference)
}

pub fn compute_pdp(rx: &SymbolGrid, reference: &SymbolGrid, params: &DerivedParams) -> Result<PowerDelayProfile> {
    ProfileProcessor::new(params).pdp(rx, reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Ddp,
    Pdp,
}

/// How cropped powers are mapped onto `[0, 1]` after dividing by the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Scale {
    /// The plain ratio to the peak.
    Linear,
    /// `10·log10(ratio)` from `[-range_db, 0]` onto `[0, 1]`, clamped below.
    Log { range_db: f64 },
    /// Like `Log`, with the range running from `offset_db` above the median
    /// level of the crop up to the peak. The median tracks the noise floor,
    /// so noise maps near 0 at any SNR.
    LogAboveMedian { offset_db: f64 },
}

/// Fallback range when the median level is not finite.
const FALLBACK_RANGE_DB: f64 = 100.0;

/// Crop window and normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub delay_start: usize,
    pub delay_len: usize,
    /// Doppler columns kept, centred on zero Doppler. Ignored for PDPs.
    pub doppler_len: usize,
    pub scale: Scale,
}

impl Default for RoiSpec {
    fn default() -> Self {
        Self {
            delay_start: 0,
            delay_len: 128,
            doppler_len: 128,
            scale: Scale::LogAboveMedian { offset_db: 12.0 },
        }
    }
}

impl RoiSpec {
    /// Full-window default for a feature kind. A DDP cell is a single look
    /// and gets a 12 dB margin over the median; PDP cells already average
    /// over the symbols and use the median itself.
    pub fn for_kind(kind: FeatureKind) -> Self {
        let offset_db = match kind {
            FeatureKind::Ddp => 12.0,
            FeatureKind::Pdp => 0.0,
        };
        Self::default().with_scale(Scale::LogAboveMedian { offset_db })
    }

    pub fn with_scale(self, scale: Scale) -> Self {
        Self { scale, ..self }
    }
}

/// Detector-ready real array, row-major. A PDP crop has height 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub kind: FeatureKind,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub delay_offset: usize,
    pub doppler_offset: usize,
}

impl FeatureTensor {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .data
            .iter()
            .enumerate()
            .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
            .0;
        (i / self.width, i % self.width)
    }
}

/// Something a region of interest can be cut from.
pub trait RoiSource {
    /// Cropped values with (height, width, delay offset, Doppler offset).
    fn crop(&self, roi: &RoiSpec) -> Result<(Vec<f64>, usize, usize, usize, usize)>;
    fn kind(&self) -> FeatureKind;
}

impl RoiSource for DelayDopplerProfile {
    fn crop(&self, roi: &RoiSpec) -> Result<(Vec<f64>, usize, usize, usize, usize)> {
        if roi.delay_len == 0 || roi.doppler_len == 0 {
            return Err(Error::Bounds("empty region of interest".into()));
        }
        if roi.delay_start + roi.delay_len > self.delay_bins || roi.doppler_len > self.doppler_bins {
            return Err(Error::Bounds(format!(
                "{}+{} delay x {} Doppler bins exceeds {}x{} profile",
                roi.delay_start, roi.delay_len, roi.doppler_len, self.delay_bins, self.doppler_bins
            )));
        }
        let col0 = self.zero_doppler_col() - roi.doppler_len / 2;
        let mut out = Vec::with_capacity(roi.delay_len * roi.doppler_len);
        for d in roi.delay_start..roi.delay_start + roi.delay_len {
            let row = &self.data[d * self.doppler_bins..(d + 1) * self.doppler_bins];
            out.extend_from_slice(&row[col0..col0 + roi.doppler_len]);
        }
        Ok((out, roi.delay_len, roi.doppler_len, roi.delay_start, col0))
    }

    fn kind(&self) -> FeatureKind {
        FeatureKind::Ddp
    }
}

impl RoiSource for PowerDelayProfile {
    fn crop(&self, roi: &RoiSpec) -> Result<(Vec<f64>, usize, usize, usize, usize)> {
        if roi.delay_len == 0 {
            return Err(Error::Bounds("empty region of interest".into()));
        }
        if roi.delay_start + roi.delay_len > self.data.len() {
            return Err(Error::Bounds(format!(
                "{}+{} delay bins exceeds {}-bin profile",
                roi.delay_start,
                roi.delay_len,
                self.data.len()
            )));
        }
        let out = self.data[roi.delay_start..roi.delay_start + roi.delay_len].to_vec();
        Ok((out, 1, roi.delay_len, roi.delay_start, 0))
    }

    fn kind(&self) -> FeatureKind {
        FeatureKind::Pdp
    }
}

/// `10·log10(v·inv)` from `[floor_db, 0]` onto `[0, 1]`.
fn log_map(values: &[f64], inv: f64, floor_db: f64) -> Vec<f32> {
    let span = -floor_db;
    values
        .iter()
        .map(|&v| {
            let r = v * inv;
            if r > 0.0 {
                ((10.0 * r.log10() - floor_db) / span).max(0.0) as f32
            } else {
                0.0
            }
        })
        .collect()
}

/// Crops the profile and scales it so its peak is 1.
pub fn extract_roi<P: RoiSource>(profile: &P, roi: &RoiSpec) -> Result<FeatureTensor> {
    let (values, height, width, delay_offset, doppler_offset) = profile.crop(roi)?;
    let peak = values.iter().copied().fold(0.0f64, f64::max);
    let data = if peak > 0.0 {
        let inv = 1.0 / peak;
        match roi.scale {
            Scale::Linear => values.iter().map(|&v| (v * inv) as f32).collect(),
            Scale::Log { range_db } => log_map(&values, inv, -range_db),
            Scale::LogAboveMedian { offset_db } => {
                let mut levels: Vec<f64> = values.iter().map(|&v| 10.0 * (v * inv).log10()).collect();
                let mid = levels.len() / 2;
                let (_, median, _) = levels.select_nth_unstable_by(mid, f64::total_cmp);
                let floor = if median.is_finite() && *median < 0.0 {
                    (*median + offset_db).min(0.5 * *median)
                } else {
                    -FALLBACK_RANGE_DB
                };
                log_map(&values, inv, floor)
            }
        }
    } else {
        vec![0.0; values.len()]
    };
    Ok(FeatureTensor {
        kind: profile.kind(),
        height,
        width,
        data,
        delay_offset,
        doppler_offset,
    })
}
