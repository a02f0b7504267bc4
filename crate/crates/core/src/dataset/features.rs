use serde::{Deserialize, Serialize};

use super::window::{Window, WINDOW_LEN};
use crate::signal::lsq_slope;
use crate::Result;

/// Glucose features are divided by this (mg/dL).
pub const GLUCOSE_DIVISOR: f64 = 400.0;
/// Slope features are divided by this (mg/dL/min) before clipping.
pub const SLOPE_DIVISOR: f64 = 10.0;

pub const FEATURE_NAMES: [&str; 10] = [
    "last_glucose_norm",
    "mean_glucose_norm",
    "min_glucose_norm",
    "max_glucose_norm",
    "abs_slope_norm",
    "signed_slope_norm",
    "glucose_std_norm",
    "glucose_range_norm",
    "time_below_70_pct",
    "time_above_180_pct",
];

/// The ten normalised Gold features of one window, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 10]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn last_glucose_norm(&self) -> f64 {
        self.0[0]
    }
    pub fn mean_glucose_norm(&self) -> f64 {
        self.0[1]
    }
    pub fn min_glucose_norm(&self) -> f64 {
        self.0[2]
    }
    pub fn max_glucose_norm(&self) -> f64 {
        self.0[3]
    }
    pub fn abs_slope_norm(&self) -> f64 {
        self.0[4]
    }
    pub fn signed_slope_norm(&self) -> f64 {
        self.0[5]
    }
    pub fn glucose_std_norm(&self) -> f64 {
        self.0[6]
    }
    pub fn glucose_range_norm(&self) -> f64 {
        self.0[7]
    }
    pub fn time_below_70_pct(&self) -> f64 {
        self.0[8]
    }
    pub fn time_above_180_pct(&self) -> f64 {
        self.0[9]
    }

    /// Last reading back in mg/dL (saturates at the 400 mg/dL clip).
    pub fn last_glucose_mgdl(&self) -> f64 {
        self.last_glucose_norm() * GLUCOSE_DIVISOR
    }

    /// Window slope back in mg/dL/min (saturates at ±10).
    pub fn slope_mgdl_per_min(&self) -> f64 {
        (self.signed_slope_norm() - 0.5) * 2.0 * SLOPE_DIVISOR
    }
}

/// Least-squares glucose slope over the window, mg/dL per minute.
pub fn window_slope(w: &Window) -> f64 {
    lsq_slope(w.timestamps(), w.glucose()).unwrap_or(0.0)
}

pub fn extract_features(w: &Window) -> Result<FeatureVector> {
    let g = w.glucose();
    let n = WINDOW_LEN as f64;
    let last = g[WINDOW_LEN - 1];
    let mean = g.iter().sum::<f64>() / n;
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let slope = window_slope(w);
    let below = g.iter().filter(|&&x| x < 70.0).count() as f64 / n;
    let above = g.iter().filter(|&&x| x > 180.0).count() as f64 / n;
    let norm = |x: f64| (x / GLUCOSE_DIVISOR).clamp(0.0, 1.0);
    Ok(FeatureVector([
        norm(last),
        norm(mean),
        norm(min),
        norm(max),
        (slope.abs() / SLOPE_DIVISOR).clamp(0.0, 1.0),
        (slope / SLOPE_DIVISOR).clamp(-1.0, 1.0) / 2.0 + 0.5,
        norm(var.sqrt()),
        norm(max - min),
        below,
        above,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_window() {
        let w = Window::regular([100.0; 10], 0.0, false).unwrap();
        let f = extract_features(&w).unwrap();
        assert_eq!(f.0, [0.25, 0.25, 0.25, 0.25, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rising_line_60_to_240() {
        let g = std::array::from_fn(|i| 60.0 + 20.0 * i as f64);
        let f = extract_features(&Window::regular(g, 0.0, false).unwrap()).unwrap();
        assert!((f.max_glucose_norm() - 0.6).abs() < 1e-12);
        assert!((f.min_glucose_norm() - 0.15).abs() < 1e-12);
        assert!((f.glucose_range_norm() - 0.45).abs() < 1e-12);
        // 200, 220, 240 exceed 180; 60 is the only reading below 70
        assert_eq!(f.time_above_180_pct(), 0.3);
        assert_eq!(f.time_below_70_pct(), 0.1);
        // 20 mg/dL per 5 minutes
        assert!((f.abs_slope_norm() - 0.4).abs() < 1e-12);
        assert!((f.signed_slope_norm() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rebound_profile_time_below() {
        // four readings under 70 in the first half, recovering to 190
        let g = [
            120.0, 90.0, 65.0, 52.0, 55.0, 60.0, 95.0, 130.0, 165.0, 190.0,
        ];
        let f = extract_features(&Window::regular(g, 0.0, true).unwrap()).unwrap();
        assert_eq!(f.time_below_70_pct(), 0.4);
        assert!((f.last_glucose_norm() - 190.0 / 400.0).abs() < 1e-12);
    }

    fn monotone_window() -> impl Strategy<Value = [f64; 10]> {
        (40.0f64..300.0, prop::collection::vec(0.0f64..20.0, 9)).prop_map(|(start, steps)| {
            let mut g = [start; 10];
            for i in 1..10 {
                g[i] = g[i - 1] + steps[i - 1];
            }
            g
        })
    }

    #[test]
    fn decoders_invert_encoding() {
        // 100, 110, ... 190 at 5-min cadence: 2 mg/dL/min
        let g = std::array::from_fn(|i| 100.0 + 10.0 * i as f64);
        let f = extract_features(&Window::regular(g, 0.0, false).unwrap()).unwrap();
        assert!((f.last_glucose_mgdl() - 190.0).abs() < 1e-9);
        assert!((f.slope_mgdl_per_min() - 2.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn reversal_flips_signed_slope(g in monotone_window()) {
            let mut r = g;
            r.reverse();
            let f = extract_features(&Window::regular(g, 0.0, false).unwrap()).unwrap();
            let fr = extract_features(&Window::regular(r, 0.0, false).unwrap()).unwrap();
            prop_assert!((f.signed_slope_norm() - 0.5 + (fr.signed_slope_norm() - 0.5)).abs() < 1e-9);
            for k in [1usize, 2, 3, 6, 7] {
                prop_assert!((f.0[k] - fr.0[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn features_in_unit_interval(g in prop::array::uniform10(0.0f64..1000.0)) {
            let f = extract_features(&Window::regular(g, 0.0, false).unwrap()).unwrap();
            prop_assert!(f.0.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(f.time_below_70_pct() + f.time_above_180_pct() <= 1.0);
            prop_assert!(f.min_glucose_norm() <= f.mean_glucose_norm() + 1e-12);
            prop_assert!(f.mean_glucose_norm() <= f.max_glucose_norm() + 1e-12);
        }
    }
}
