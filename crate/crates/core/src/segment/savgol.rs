//! Savitzky–Golay derivative filter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Convolution weights producing the `deriv`-th derivative at the window
/// center, in units of x per sample^deriv.
pub fn savgol_coefficients(window: usize, polyorder: usize, deriv: usize) -> Vec<f64> {
    assert!(window % 2 == 1 && window > polyorder && deriv <= polyorder);
    let half = (window / 2) as f64;
    let a = DMatrix::from_fn(window, polyorder + 1, |i, j| (i as f64 - half).powi(j as i32));
    let ata = a.transpose() * &a;
    let inv = ata
        .try_inverse()
        .expect("Vandermonde normal matrix of distinct nodes is invertible");
    let pinv = inv * a.transpose();
    let factorial: f64 = (1..=deriv).map(|v| v as f64).product();
    (0..window).map(|i| factorial * pinv[(deriv, i)]).collect()
}

/// Second derivative of `x` (units of x per second squared) from a local
/// polynomial fit of degree `polyorder` over `window` samples. Edges are
/// mirror-padded by `(window - 1) / 2` samples without repeating the edge
/// sample.
pub fn sg_second_derivative(x: &[f64], window: usize, polyorder: usize, dt: f64) -> Result<Vec<f64>> {
    if window % 2 == 0 || window <= polyorder + 1 || polyorder < 2 {
        return Err(Error::InvalidConfig(format!(
            "savitzky-golay window {window} must be odd and exceed polyorder {polyorder} + 1, polyorder >= 2"
        )));
    }
    if x.len() < window {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            window,
        });
    }
    let coeffs = savgol_coefficients(window, polyorder, 2);
    let scale = 1.0 / (dt * dt);
    let n = x.len() as isize;
    let half = (window / 2) as isize;
    let at = |k: isize| -> f64 {
        let idx = if k < 0 {
            -k
        } else if k >= n {
            2 * (n - 1) - k
        } else {
            k
        };
        x[idx as usize]
    };
    Ok((0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * at(i + j as isize - half))
                .sum::<f64>()
                * scale
        })
        .collect())
}
