//! Zero-phase second-order Butterworth low-pass.

use std::f64::consts::{PI, SQRT_2};

/// Direct-form biquad coefficients, `a0` normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth low-pass via the bilinear transform with
    /// frequency prewarping.
    pub fn butterworth_lowpass(cutoff: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        }
    }

    /// Filter state for which a constant unit input produces a constant unit output.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, _, b2] = self.b;
        let [_, a2] = self.a;
        [1.0 - b0, b2 - a2]
    }

    /// Transposed direct-form II filtering starting from state `zi`.
    fn run(&self, x: &[f64], zi: [f64; 2]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = zi;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward filtering with odd-extension padding of `padlen`
    /// samples at both ends and steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = padlen.min(n - 1);
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.steady_state();
        let fwd = self.run(&ext, zi.map(|z| z * ext[0]));
        let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
        let start = rev[0];
        rev = self.run(&rev, zi.map(|z| z * start));
        rev.reverse();
        rev[pad..pad + n].to_vec()
    }
}

/// Padding long enough for the filter transient to decay: three periods of
/// the cutoff frequency.
pub fn default_padlen(cutoff: f64, sample_rate: f64) -> usize {
    ((3.0 * sample_rate / cutoff).round() as usize).max(9)
}

/// Zero-phase low-pass of a single series.
pub fn lowpass_series(x: &[f64], cutoff: f64, sample_rate: f64) -> Vec<f64> {
    Biquad::butterworth_lowpass(cutoff, sample_rate).filtfilt(x, default_padlen(cutoff, sample_rate))
}
