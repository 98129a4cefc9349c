//! Low-frequency `beta / f^lambda` noise and trace augmentation.

use std::f64::consts::{PI, TAU};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::column_scales;
use crate::trace::{kinematic_matrix, ExecutionTrace, Frame, ARM_FEATURES, JAW_OFFSET, NUM_FEATURES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub beta: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Standard deviation of the added noise, per unit `sqrt(beta)`, as a
    /// fraction of each channel's max-abs value.
    pub scale: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            beta: 0.01,
            lambda: 7.5,
            seed: 0,
            scale: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.lambda > 0.0 && self.scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise needs beta > 0 and lambda > 0 (got {} and {})",
                self.beta, self.lambda
            )));
        }
        Ok(())
    }

    /// One-sided power spectral density at `f` Hz.
    pub fn psd(&self, f: f64) -> f64 {
        self.beta / f.powf(self.lambda)
    }
}

/// Spectral synthesis: bin `k` gets amplitude `sqrt(S(f_k) * fs * N / 2)`
/// and a uniform random phase, DC is zero, the Nyquist bin (even `N`) is
/// real. The inverse transform is normalized by `1/N`, so the periodogram
/// `2 |X_k|^2 / (fs N)` of the result equals `S(f_k)`.
pub fn synthesize_noise_with(rng: &mut ChaCha8Rng, length: usize, sample_rate: f64, cfg: &NoiseConfig) -> Vec<f64> {
    assert!(length >= 2, "noise needs at least two samples");
    let n = length;
    let df = sample_rate / n as f64;
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let s = cfg.psd(k as f64 * df);
        if 2 * k == n {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            spec[k] = Complex::new(sign * (s * sample_rate * n as f64).sqrt(), 0.0);
        } else {
            let amp = (s * sample_rate * n as f64 / 2.0).sqrt();
            let phase = rng.random::<f64>() * TAU;
            spec[k] = Complex::from_polar(amp, phase);
            spec[n - k] = spec[k].conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

pub fn synthesize_noise(length: usize, sample_rate: f64, cfg: &NoiseConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    synthesize_noise_with(&mut rng, length, sample_rate, cfg)
}

/// One-sided periodogram `2 |X_k|^2 / (fs N)` for bins `1..=N/2` (the
/// Nyquist bin is not doubled), paired with the bin frequencies.
pub fn periodogram(x: &[f64], sample_rate: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..=n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() / (sample_rate * n as f64);
            let p = if 2 * k == n { p } else { 2.0 * p };
            (k as f64 * sample_rate / n as f64, p)
        })
        .collect()
}

fn standardize(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in x.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Adds an independent noise realization to each of the 16 kinematic
/// channels. Each realization is standardized and scaled to
/// `sqrt(beta) * scale * max|channel|`. Quaternions are renormalized and jaw
/// angles clamped to `[0, pi]`; scene and annotations are copied unchanged.
pub fn augment_with_noise(trace: &ExecutionTrace, cfg: &NoiseConfig) -> Result<ExecutionTrace> {
    cfg.validate()?;
    let k = kinematic_matrix(trace);
    if k.len() < 2 {
        return Ok(trace.clone());
    }
    let scales = column_scales(&k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.beta.sqrt() * cfg.scale;
    let noise: Vec<Vec<f64>> = (0..NUM_FEATURES)
        .map(|c| {
            let mut x = synthesize_noise_with(&mut rng, k.len(), trace.sample_rate, cfg);
            standardize(&mut x);
            let s = amp * if k.iter().any(|r| r[c] != 0.0) { scales[c] } else { 0.0 };
            x.iter_mut().for_each(|v| *v *= s);
            x
        })
        .collect();
    let frames = trace
        .frames
        .iter()
        .zip(&k)
        .enumerate()
        .map(|(i, (frame, row))| {
            let mut r = *row;
            for (c, v) in r.iter_mut().enumerate() {
                *v += noise[c][i];
            }
            for arm in 0..2 {
                let j = arm * ARM_FEATURES + JAW_OFFSET;
                r[j] = r[j].clamp(0.0, PI);
            }
            Frame::from_features(frame.t, &r, frame.scene.clone())
        })
        .collect();
    let mut out = trace.clone();
    out.frames = frames;
    out.meta.insert("noise_beta".into(), cfg.beta.to_string());
    out.meta.insert("noise_lambda".into(), cfg.lambda.to_string());
    out.meta.insert("noise_seed".into(), cfg.seed.to_string());
    Ok(out)
}
