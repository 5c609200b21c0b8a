//! Spectral front-end: STFT, 80-bin log-mel spectrograms, mel cepstra, and
//! mel-cepstral distortion with DTW alignment.

mod cache;
pub mod dtw;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::corpus::{LanguageId, Utterance};

pub use cache::{parse_mel_bytes, read_mel, write_mel};

/// Mel bins produced by the classifier front-end.
pub const N_MELS: usize = 80;

/// Power floor applied before the log.
pub const POWER_FLOOR: f64 = 1e-10;

/// dB scaling constant of the mel-cepstral distortion: 10 * sqrt(2) / ln 10.
pub const MCD_CONST: f64 = 6.141851463713754;

/// Default cepstral order for MCD.
pub const DEFAULT_MCD_ORDER: usize = 24;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio too short: {len} samples, analysis window needs {window}")]
    AudioTooShort { len: usize, window: usize },
    #[error("invalid mel band edges: fmin {fmin} Hz, fmax {fmax} Hz, nyquist {nyquist} Hz")]
    InvalidBand { fmin: f64, fmax: f64, nyquist: f64 },
    #[error("window of {window} samples does not fit fft size {fft}")]
    WindowExceedsFft { window: usize, fft: usize },
    #[error("window and hop must be at least one sample (window {window}, hop {hop})")]
    DegenerateFrame { window: usize, hop: usize },
    #[error("cepstral order {order} out of range 1..{bins}")]
    OrderOutOfRange { order: usize, bins: usize },
    #[error("cepstral order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("spectrogram must have at least one frame")]
    EmptyFrames,
    #[error("ragged frame: row {row} has {got} bins, expected {expected}")]
    RaggedFrame {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value at frame {frame}, bin {bin}")]
    NonFinite { frame: usize, bin: usize },
    #[error("feature cache parse error: {0}")]
    CacheParse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// STFT and mel filterbank parameters. Defaults are the common speech
/// settings: 25 ms Hann window, 10 ms hop, 1024-point FFT, 20-7600 Hz band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub fft_size: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            fft_size: 1024,
            fmin_hz: 20.0,
            fmax_hz: 7600.0,
        }
    }
}

/// Time x mel matrix of natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    n_bins: usize,
    /// Row-major, `n_frames * n_bins`.
    data: Vec<f64>,
    /// Seconds between consecutive frames.
    pub frame_shift: f64,
    pub language_id: Option<LanguageId>,
}

impl MelSpectrogram {
    /// Build from per-frame rows; all rows must share a width and every
    /// value must be finite.
    pub fn from_rows(rows: Vec<Vec<f64>>, frame_shift: f64) -> Result<Self, DspError> {
        if rows.is_empty() {
            return Err(DspError::EmptyFrames);
        }
        let n_bins = rows[0].len();
        if n_bins == 0 {
            return Err(DspError::RaggedFrame {
                row: 0,
                got: 0,
                expected: 1,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * n_bins);
        for (row_idx, row) in rows.iter().enumerate() {
            if row.len() != n_bins {
                return Err(DspError::RaggedFrame {
                    row: row_idx,
                    got: row.len(),
                    expected: n_bins,
                });
            }
            for (bin, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DspError::NonFinite {
                        frame: row_idx,
                        bin,
                    });
                }
                data.push(v);
            }
        }
        Ok(Self {
            n_bins,
            data,
            frame_shift,
            language_id: None,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.n_bins
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_bins)
    }
}

/// HTK mel scale: 2595 * log10(1 + f / 700).
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style filterbank: `N_MELS` rows over `fft_size / 2 + 1`
/// power bins, with filter edges equally spaced on the mel scale between
/// `fmin_hz` and `fmax_hz`.
pub fn mel_filterbank(cfg: &MelConfig, sample_rate: u32) -> Result<Vec<Vec<f64>>, DspError> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if !(cfg.fmin_hz >= 0.0 && cfg.fmin_hz < cfg.fmax_hz && cfg.fmax_hz <= nyquist) {
        return Err(DspError::InvalidBand {
            fmin: cfg.fmin_hz,
            fmax: cfg.fmax_hz,
            nyquist,
        });
    }
    let n_bins = cfg.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    let edges: Vec<f64> = (0..N_MELS + 2)
        .map(|m| mel_to_hz(mel_lo + (mel_hi - mel_lo) * m as f64 / (N_MELS + 1) as f64))
        .collect();

    let bin_hz = f64::from(sample_rate) / cfg.fft_size as f64;
    let mut bank = vec![vec![0.0; n_bins]; N_MELS];
    for (m, filter) in bank.iter_mut().enumerate() {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for (k, w) in filter.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            *w = rising.min(falling).max(0.0);
        }
    }
    Ok(bank)
}

/// Center frequencies (Hz) of the filterbank's triangles.
pub fn filterbank_centers(cfg: &MelConfig) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    (1..=N_MELS)
        .map(|m| mel_to_hz(mel_lo + (mel_hi - mel_lo) * m as f64 / (N_MELS + 1) as f64))
        .collect()
}

/// Compute the 80-bin log-mel spectrogram of an utterance.
///
/// Frames are `1 + floor((len - window) / hop)` windows of periodic-Hann
/// weighted samples; each frame becomes `ln(max(filterbank * |FFT|^2,
/// floor))`.
pub fn melspec(utterance: &Utterance, cfg: &MelConfig) -> Result<MelSpectrogram, DspError> {
    let rate = f64::from(utterance.sample_rate);
    let window = (cfg.window_s * rate).round() as usize;
    let hop = (cfg.hop_s * rate).round() as usize;
    if window == 0 || hop == 0 {
        return Err(DspError::DegenerateFrame { window, hop });
    }
    if window > cfg.fft_size {
        return Err(DspError::WindowExceedsFft {
            window,
            fft: cfg.fft_size,
        });
    }
    let len = utterance.samples.len();
    if len < window {
        return Err(DspError::AudioTooShort { len, window });
    }
    let bank = mel_filterbank(cfg, utterance.sample_rate)?;

    let n_frames = 1 + (len - window) / hop;
    let hann: Vec<f64> = (0..window)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / window as f64).cos())
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let n_power_bins = cfg.fft_size / 2 + 1;

    let mut data = Vec::with_capacity(n_frames * N_MELS);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut power = vec![0.0; n_power_bins];
    for t in 0..n_frames {
        let start = t * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            let s = if i < window {
                utterance.samples[start + i] * hann[i]
            } else {
                0.0
            };
            *c = Complex::new(s, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for filter in &bank {
            let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            data.push(energy.max(POWER_FLOOR).ln());
        }
    }

    Ok(MelSpectrogram {
        n_bins: N_MELS,
        data,
        frame_shift: cfg.hop_s,
        language_id: Some(utterance.language_id.clone()),
    })
}

/// Time x (order + 1) matrix of mel-cepstral coefficients c0..cD.
#[derive(Debug, Clone, PartialEq)]
pub struct MelCepstrum {
    pub order: usize,
    /// Row-major, `n_frames * (order + 1)`.
    data: Vec<f64>,
}

impl MelCepstrum {
    pub fn from_rows(rows: Vec<Vec<f64>>, order: usize) -> Result<Self, DspError> {
        if rows.is_empty() {
            return Err(DspError::EmptyFrames);
        }
        let width = order + 1;
        let mut data = Vec::with_capacity(rows.len() * width);
        for (row_idx, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(DspError::RaggedFrame {
                    row: row_idx,
                    got: row.len(),
                    expected: width,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { order, data })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / (self.order + 1)
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.order + 1;
        &self.data[t * w..(t + 1) * w]
    }
}

/// Per-frame orthonormal type-II DCT of the log-mel values, truncated to
/// coefficients 0..=order.
pub fn melcep(spec: &MelSpectrogram, order: usize) -> Result<MelCepstrum, DspError> {
    let n = spec.n_bins();
    if order == 0 || order >= n {
        return Err(DspError::OrderOutOfRange { order, bins: n });
    }
    // basis[k][j] = alpha_k * cos(pi * k * (2j + 1) / (2N))
    let mut basis = vec![vec![0.0; n]; order + 1];
    for (k, row) in basis.iter_mut().enumerate() {
        let alpha = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for (j, b) in row.iter_mut().enumerate() {
            *b = alpha
                * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64))
                    .cos();
        }
    }

    let mut data = Vec::with_capacity(spec.n_frames() * (order + 1));
    for frame in spec.frames() {
        for row in &basis {
            data.push(row.iter().zip(frame).map(|(b, x)| b * x).sum());
        }
    }
    Ok(MelCepstrum { order, data })
}

/// Mel-cepstral distortion in dB between two cepstral sequences.
///
/// Frames are aligned by DTW with local cost the Euclidean distance over
/// coefficients 1..=order (c0 excluded); the result is `MCD_CONST` times the
/// mean local cost along the optimal path. Symmetric in its arguments.
pub fn mcd(a: &MelCepstrum, b: &MelCepstrum) -> Result<f64, DspError> {
    if a.order != b.order {
        return Err(DspError::OrderMismatch(a.order, b.order));
    }
    let (total, len) = dtw::align_cost(a.n_frames(), b.n_frames(), |i, j| {
        cepstral_distance(a.frame(i), b.frame(j))
    });
    Ok(MCD_CONST * total / len as f64)
}

/// Euclidean distance over coefficients 1..=order (c0 excluded).
pub fn cepstral_distance(a: &[f64], b: &[f64]) -> f64 {
    a[1..]
        .iter()
        .zip(&b[1..])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
