//! Piecewise-linear paths with minimum-jerk corner blends.
//!
//! Between knots every channel moves at constant velocity. At each knot the
//! velocity changes from `v_in` to `v_out` along the minimum-jerk profile
//! `10s^3 - 15s^4 + 6s^5` over a window of width `w` centered on the knot,
//! so acceleration is smooth and concentrated at the knots. Outside the
//! windows the path coincides with the linear interpolation.

/// Doubly integrated blend: position gained by a unit velocity step whose
/// transition starts at `s = 0` and ends at `s = 1` (time in units of `w`).
pub fn blend_integral(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s < 1.0 {
        s.powi(4) * (2.5 - 3.0 * s + s * s)
    } else {
        0.5 + (s - 1.0)
    }
}

/// Minimum-jerk velocity profile on `[0, 1]`.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Scalar path through `(t, value)` knots, held constant before the first
/// and after the last knot.
#[derive(Clone, Debug)]
pub struct BlendedPath {
    start: f64,
    /// `(knot time, velocity change)`
    steps: Vec<(f64, f64)>,
    width: f64,
}

impl BlendedPath {
    /// `knots` must have strictly increasing times.
    pub fn new(knots: &[(f64, f64)], width: f64) -> Self {
        assert!(!knots.is_empty());
        let mut steps = Vec::with_capacity(knots.len());
        let mut v_prev = 0.0;
        for (i, &(t, x)) in knots.iter().enumerate() {
            let v_next = match knots.get(i + 1) {
                Some(&(t1, x1)) => (x1 - x) / (t1 - t),
                None => 0.0,
            };
            if v_next != v_prev {
                steps.push((t, v_next - v_prev));
            }
            v_prev = v_next;
        }
        BlendedPath {
            start: knots[0].1,
            steps,
            width,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = self.width;
        self.start
            + self
                .steps
                .iter()
                .map(|&(tk, dv)| dv * w * blend_integral((t - tk + 0.5 * w) / w))
                .sum::<f64>()
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let w = self.width;
        self.steps
            .iter()
            .map(|&(tk, dv)| dv * min_jerk((t - tk + 0.5 * w) / w))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_is_continuous_with_matching_slope() {
        let eps = 1e-7;
        assert!(blend_integral(1.0 - 1e-12) - 0.5 < 1e-9);
        let slope = (blend_integral(1.0 + eps) - blend_integral(1.0 - eps)) / (2.0 * eps);
        assert!((slope - 1.0).abs() < 1e-6);
        // derivative of the integral is the velocity profile
        for s in [0.1, 0.3, 0.5, 0.9] {
            let d = (blend_integral(s + eps) - blend_integral(s - eps)) / (2.0 * eps);
            assert!((d - min_jerk(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_linear_interpolation_away_from_knots() {
        let knots = [(1.0, 0.0), (3.0, 2.0), (4.0, 2.0), (5.0, 1.0)];
        let p = BlendedPath::new(&knots, 0.2);
        for (t, want) in [(0.0, 0.0), (0.85, 0.0), (2.0, 1.0), (1.2, 0.2), (3.5, 2.0), (4.5, 1.5), (6.0, 1.0)] {
            assert!((p.eval(t) - want).abs() < 1e-12, "t={t}: {}", p.eval(t));
        }
        assert!((p.velocity(2.0) - 1.0).abs() < 1e-12);
        assert_eq!(p.velocity(3.5), 0.0);
    }

    #[test]
    fn blend_window_endpoints_have_no_acceleration() {
        let p = BlendedPath::new(&[(1.0, 0.0), (2.0, 1.0)], 0.2);
        let h = 1e-4;
        for t in [0.9, 1.1, 1.9, 2.1] {
            let acc = (p.velocity(t + h) - p.velocity(t - h)) / (2.0 * h);
            assert!(acc.abs() < 1e-3, "t={t}: {acc}");
        }
        assert!(p.velocity(0.9).abs() < 1e-12 && (p.velocity(1.1) - 1.0).abs() < 1e-12);
    }
}
