use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::window::CADENCE_MIN;
use crate::signal::TraceRow;
use crate::{Error, Result};

const STEPS_PER_DAY: usize = (24.0 * 60.0 / CADENCE_MIN) as usize;
const OU_TAU_MIN: f64 = 180.0;
const OU_SD: f64 = 10.0;
const BASELINE_FLOOR: f64 = 80.0;
const BASELINE_CEIL: f64 = 180.0;

/// Synthetic cohort parameters. Rates are events per patient-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: u32,
    pub days: u32,
    pub meal_rate: f64,
    pub crash_rate: f64,
    pub noise_sd: f64,
    pub hypo_annotation_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patients: 30,
            days: 14,
            meal_rate: 6.0,
            crash_rate: 1.2,
            noise_sd: 3.0,
            hypo_annotation_rate: 0.8,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        for (name, x) in [
            ("meal_rate", self.meal_rate),
            ("crash_rate", self.crash_rate),
            ("noise_sd", self.noise_sd),
        ] {
            if !x.is_finite() || x < 0.0 {
                return bad(&format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        if !(0.0..=1.0).contains(&self.hypo_annotation_rate) {
            return bad("hypo_annotation_rate must lie in [0, 1]");
        }
        if self.n_patients == 0 || self.days == 0 {
            return bad("n_patients and days must be positive");
        }
        if self.days > 3650 {
            return bad("days capped at 3650");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn readings_per_patient(&self) -> usize {
        self.days as usize * STEPS_PER_DAY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientTrace {
    pub patient: u32,
    pub rows: Vec<TraceRow>,
}

/// Rise-then-decay excursion, mg/dL above baseline at `s` minutes after onset.
#[derive(Debug, Clone, Copy)]
struct Excursion {
    onset: f64,
    amplitude: f64,
    rise: f64,
    decay: f64,
}

impl Excursion {
    fn at(&self, t: f64) -> f64 {
        let s = t - self.onset;
        if s < 0.0 {
            0.0
        } else if s < self.rise {
            self.amplitude * s / self.rise
        } else {
            self.amplitude * (-(s - self.rise) / self.decay).exp()
        }
    }

    fn done(&self, t: f64) -> bool {
        t - self.onset > self.rise + 8.0 * self.decay
    }
}

/// An insulin-overshoot crash: linear descent to a nadir, a short hold, then
/// exponential recovery towards the undisturbed signal plus a rescue-carb
/// rebound.
#[derive(Debug, Clone, Copy)]
struct Crash {
    onset: f64,
    start_level: f64,
    nadir: f64,
    rate: f64,
    hold: f64,
    recovery_tau: f64,
    annotated: bool,
}

impl Crash {
    fn descent_end(&self) -> f64 {
        self.onset + (self.start_level - self.nadir) / self.rate
    }

    fn hold_end(&self) -> f64 {
        self.descent_end() + self.hold
    }

    fn end(&self) -> f64 {
        self.hold_end() + 6.0 * self.recovery_tau
    }

    /// Glucose under the crash given the undisturbed level `free`.
    fn apply(&self, t: f64, free: f64) -> f64 {
        if t < self.descent_end() {
            self.start_level - self.rate * (t - self.onset)
        } else if t < self.hold_end() {
            self.nadir
        } else {
            let k = (-(t - self.hold_end()) / self.recovery_tau).exp();
            self.nadir * k + free * (1.0 - k)
        }
    }
}

/// Generates one annotated trace per virtual patient, deterministic in
/// `cfg.seed`. Each patient draws from its own ChaCha stream so cohorts of
/// different sizes share their common prefix.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<PatientTrace>> {
    cfg.validate()?;
    Ok((0..cfg.n_patients)
        .map(|p| generate_patient(cfg, p))
        .collect())
}

fn generate_patient(cfg: &SynthConfig, patient: u32) -> PatientTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(patient as u64);
    let n = cfg.readings_per_patient();
    let dt = CADENCE_MIN;
    let meal_p = cfg.meal_rate * dt / (24.0 * 60.0);
    let crash_p = cfg.crash_rate * dt / (24.0 * 60.0);
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let baseline: f64 = rng.random_range(90.0..140.0);
    let ou_a = (-dt / OU_TAU_MIN).exp();
    let ou_step = OU_SD * (1.0 - ou_a * ou_a).sqrt();
    let mut ou = 0.0;

    let mut excursions: Vec<Excursion> = Vec::new();
    let mut crash: Option<Crash> = None;
    let mut rows = Vec::with_capacity(n);

    for k in 0..n {
        let t = k as f64 * dt;
        ou = ou * ou_a + ou_step * std_normal.sample(&mut rng);
        if rng.random::<f64>() < meal_p {
            excursions.push(Excursion {
                onset: t,
                amplitude: rng.random_range(50.0..160.0),
                rise: rng.random_range(30.0..70.0),
                decay: rng.random_range(80.0..160.0),
            });
        }
        excursions.retain(|e| !e.done(t));
        let base = (baseline + ou).clamp(BASELINE_FLOOR, BASELINE_CEIL);
        let free = base + excursions.iter().map(|e| e.at(t)).sum::<f64>();

        if crash.is_some_and(|c| t > c.end()) {
            crash = None;
        }
        if crash.is_none() && rng.random::<f64>() < crash_p {
            let nadir = rng.random_range(40.0..62.0);
            if free > nadir + 40.0 {
                let c = Crash {
                    onset: t,
                    start_level: free,
                    nadir,
                    rate: rng.random_range(2.0..4.0),
                    hold: rng.random_range(5.0..25.0),
                    recovery_tau: rng.random_range(10.0..25.0),
                    annotated: rng.random::<f64>() < cfg.hypo_annotation_rate,
                };
                // rescue carbs start as the hold ends
                excursions.push(Excursion {
                    onset: c.hold_end(),
                    amplitude: rng.random_range(20.0..110.0),
                    rise: rng.random_range(20.0..40.0),
                    decay: rng.random_range(40.0..80.0),
                });
                crash = Some(c);
            }
        }

        let (truth, hypo) = match crash {
            Some(c) => {
                let g = c.apply(t, free);
                (g, c.annotated && g < 70.0)
            }
            None => (free, false),
        };
        let noisy = truth + cfg.noise_sd * std_normal.sample(&mut rng);
        rows.push(TraceRow {
            t_min: t,
            glucose_mgdl: noisy.clamp(40.0, 400.0).round(),
            hypo_event: hypo,
        });
    }
    PatientTrace { patient, rows }
}
