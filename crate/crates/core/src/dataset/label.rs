use super::features::window_slope;
use super::window::Window;
use crate::Severity;

/// ADA 2023 threshold rules on the current reading and rate of change.
///
/// HIGH for level-2 excursions (< 54 or > 250 mg/dL) or |slope| > 3 mg/dL/min;
/// MEDIUM for the borderline bands [54, 70), (180, 250] or |slope| in [2, 3];
/// LOW otherwise.
pub fn ada_rules(last_mgdl: f64, slope_mgdl_per_min: f64) -> Severity {
    let rate = slope_mgdl_per_min.abs();
    if !(54.0..=250.0).contains(&last_mgdl) || rate > 3.0 {
        Severity::High
    } else if (54.0..70.0).contains(&last_mgdl)
        || (last_mgdl > 180.0 && last_mgdl <= 250.0)
        || (2.0..=3.0).contains(&rate)
    {
        Severity::Medium
    } else {
        Severity::Low
    }
}

/// Priority labelling: an annotated hypo event always wins, then the ADA rules.
pub fn ada_label(w: &Window) -> Severity {
    if w.hypo_event {
        return Severity::High;
    }
    ada_rules(w.last(), window_slope(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(last: f64, hypo: bool) -> Window {
        let mut g = [last; 10];
        g[9] = last;
        Window::regular(g, 0.0, hypo).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(ada_label(&flat(53.0, false)), Severity::High);
        assert_eq!(ada_label(&flat(100.0, false)), Severity::Low);
        assert_eq!(ada_label(&flat(190.0, false)), Severity::Medium);
        assert_eq!(ada_label(&flat(190.0, true)), Severity::High);
    }

    /// Independent truth table: enumerate the bands explicitly.
    fn oracle(last: f64, slope: f64) -> u8 {
        let r = slope.abs();
        let glucose_band = if last < 54.0 {
            2
        } else if last < 70.0 {
            1
        } else if last <= 180.0 {
            0
        } else if last <= 250.0 {
            1
        } else {
            2
        };
        let rate_band = if r > 3.0 {
            2
        } else if r >= 2.0 {
            1
        } else {
            0
        };
        glucose_band.max(rate_band)
    }

    #[test]
    fn boundaries() {
        for (g, s) in [
            (54.0, 0.0),
            (70.0, 0.0),
            (180.0, 0.0),
            (250.0, 0.0),
            (250.0001, 0.0),
            (100.0, 2.0),
            (100.0, 3.0),
            (100.0, 3.0001),
            (100.0, -2.0),
        ] {
            assert_eq!(ada_rules(g, s) as u8, oracle(g, s), "g={g} s={s}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn rules_match_truth_table(last in 30.0f64..400.0, slope in -6.0f64..6.0) {
            prop_assert_eq!(ada_rules(last, slope) as u8, oracle(last, slope));
        }
    }

    proptest! {
        #[test]
        fn annotation_never_lowers_label(g in prop::array::uniform10(40.0f64..400.0)) {
            let plain = ada_label(&Window::regular(g, 0.0, false).unwrap());
            let annotated = ada_label(&Window::regular(g, 0.0, true).unwrap());
            prop_assert!(annotated >= plain);
        }
    }
}
