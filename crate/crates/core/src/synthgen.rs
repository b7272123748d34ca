//! Synthetic two-domain sensor recordings with controllable covariate shift.
//!
//! Each class is a per-channel sinusoid (level, amplitude, frequency,
//! phase). A run is a sequence of class and null segments. The target
//! domain shares the latent signal model but passes it through channel-pair
//! rotations and a per-channel affine map before noise is added.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, RunId, SensorRecording, SplitSpec};
use crate::ModelRng;

pub const SOURCE_SUBJECT: u32 = 1;
pub const TARGET_SUBJECT: u32 = 2;

const DEFAULT_FIXTURE: &str = include_str!("../fixtures/shift_default.toml");

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid shift spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waveform {
    pub level: f64,
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Radians.
    pub phase: f64,
}

impl Waveform {
    fn at(&self, seconds: f64, jitter: f64) -> f64 {
        self.level + self.amplitude * (TAU * self.frequency * seconds + self.phase + jitter).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPrototype {
    /// One waveform per channel.
    pub channels: Vec<Waveform>,
}

/// Target-domain transform. Empty `gain` / `offset` mean 1 / 0 on every
/// channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shift {
    #[serde(default)]
    pub gain: Vec<f64>,
    #[serde(default)]
    pub offset: Vec<f64>,
    /// Rotation angle (radians) applied to channel pairs (0,1), (2,3), …
    #[serde(default)]
    pub rotation: f64,
}

impl Shift {
    pub fn is_identity(&self) -> bool {
        self.gain.iter().all(|&g| g == 1.0) && self.offset.iter().all(|&o| o == 0.0) && self.rotation == 0.0
    }

    fn apply(&self, x: &mut Array2<f64>) {
        if self.rotation != 0.0 {
            let (sin, cos) = self.rotation.sin_cos();
            for mut row in x.rows_mut() {
                for pair in (0..row.len() / 2).map(|k| 2 * k) {
                    let (a, b) = (row[pair], row[pair + 1]);
                    row[pair] = cos * a - sin * b;
                    row[pair + 1] = sin * a + cos * b;
                }
            }
        }
        for mut row in x.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                if let Some(g) = self.gain.get(c) {
                    *v *= g;
                }
                if let Some(o) = self.offset.get(c) {
                    *v += o;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub n_classes: usize,
    pub n_channels: usize,
    /// Instances per generated run.
    pub seq_length: usize,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    /// Inclusive range of segment lengths in instances.
    pub segment_length: [usize; 2],
    /// Probability that a segment is null.
    pub null_fraction: f64,
    /// Maximum random phase offset per segment (radians).
    #[serde(default)]
    pub phase_jitter: f64,
    pub class_prototypes: Vec<ClassPrototype>,
    #[serde(default)]
    pub shift: Shift,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Seed for the target domain's label track and noise; defaults to `seed`.
    #[serde(default)]
    pub target_seed: Option<u64>,
}

fn default_rate() -> f64 {
    30.0
}

impl ShiftSpec {
    /// The calibrated default fixture.
    pub fn fixture() -> Self {
        Self::from_toml_str(DEFAULT_FIXTURE).expect("bundled fixture is valid")
    }

    /// Spec with prototypes drawn from `seed` and no shift.
    pub fn seeded(n_classes: usize, n_channels: usize, seed: u64) -> Self {
        let mut rng = ModelRng::seed_from_u64(seed ^ 0x5eed_0f_7e57);
        let class_prototypes = (0..n_classes)
            .map(|_| ClassPrototype {
                channels: (0..n_channels)
                    .map(|_| Waveform {
                        level: rng.random_range(-1.0..1.0),
                        amplitude: rng.random_range(0.3..1.0),
                        frequency: rng.random_range(0.5..4.0),
                        phase: rng.random_range(0.0..TAU),
                    })
                    .collect(),
            })
            .collect();
        ShiftSpec {
            n_classes,
            n_channels,
            seq_length: 3000,
            sample_rate: 30.0,
            segment_length: [40, 90],
            null_fraction: 0.3,
            phase_jitter: TAU,
            class_prototypes,
            shift: Shift::default(),
            noise_sigma: 0.1,
            seed,
            target_seed: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let spec: ShiftSpec = toml::from_str(text).map_err(|e| SynthError::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("shift spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_channels == 0 {
            return bad("n_channels must be positive".into());
        }
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative".into());
        }
        if self.seq_length == 0 || !(self.sample_rate > 0.0) {
            return bad("seq_length and sample_rate must be positive".into());
        }
        let [lo, hi] = self.segment_length;
        if lo == 0 || lo > hi {
            return bad(format!("segment_length [{lo}, {hi}] is not a positive range"));
        }
        if !(0.0..1.0).contains(&self.null_fraction) {
            return bad("null_fraction must lie in [0, 1)".into());
        }
        if self.class_prototypes.len() != self.n_classes {
            return bad(format!(
                "{} class prototypes for {} classes",
                self.class_prototypes.len(),
                self.n_classes
            ));
        }
        if let Some(k) = self
            .class_prototypes
            .iter()
            .position(|p| p.channels.len() != self.n_channels)
        {
            return bad(format!("prototype {} does not have {} channels", k + 1, self.n_channels));
        }
        for (name, v) in [("gain", &self.shift.gain), ("offset", &self.shift.offset)] {
            if !v.is_empty() && v.len() != self.n_channels {
                return bad(format!("shift.{name} has {} entries for {} channels", v.len(), self.n_channels));
            }
        }
        Ok(())
    }

    /// Split over generated runs: source subject → target subject, ADL1-3 +
    /// Drill for training and ADL4-5 for evaluation.
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            source_subject: SOURCE_SUBJECT,
            target_subject: TARGET_SUBJECT,
            ..SplitSpec::paper_default()
        }
    }
}

fn run_seed(seed: u64, run: RunId) -> u64 {
    seed ^ (u64::from(run.code()) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Latent signal, labels and noise for one domain.
fn draw(spec: &ShiftSpec, seed: u64, shift: Option<&Shift>) -> (Array2<f64>, Vec<u16>) {
    let mut rng = ModelRng::seed_from_u64(seed);
    let (t_len, c) = (spec.seq_length, spec.n_channels);
    let mut x = Array2::zeros((t_len, c));
    let mut labels = vec![0u16; t_len];
    let [lo, hi] = spec.segment_length;
    let mut start = 0;
    while start < t_len {
        let len = rng.random_range(lo..=hi).min(t_len - start);
        let jitter = if spec.phase_jitter > 0.0 {
            rng.random_range(0.0..spec.phase_jitter)
        } else {
            0.0
        };
        if rng.random::<f64>() < spec.null_fraction {
            let drift = Waveform {
                level: 0.0,
                amplitude: 0.3,
                frequency: rng.random_range(0.2..1.0),
                phase: 0.0,
            };
            for t in start..start + len {
                let v = drift.at((t - start) as f64 / spec.sample_rate, jitter);
                x.row_mut(t).fill(v);
            }
        } else {
            let class = rng.random_range(0..spec.n_classes);
            let proto = &spec.class_prototypes[class];
            for t in start..start + len {
                let secs = (t - start) as f64 / spec.sample_rate;
                for (ch, w) in proto.channels.iter().enumerate() {
                    x[[t, ch]] = w.at(secs, jitter);
                }
                labels[t] = class as u16 + 1;
            }
        }
        start += len;
    }
    if let Some(shift) = shift {
        shift.apply(&mut x);
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        x.mapv_inplace(|v| v + noise.sample(&mut rng));
    }
    (x, labels)
}

/// One run per domain, tagged with `run`. The run tag is mixed into the
/// seed so different runs are independent draws.
pub fn generate_run(spec: &ShiftSpec, run: RunId) -> Result<(SensorRecording, SensorRecording), SynthError> {
    spec.validate()?;
    let (xs, ys) = draw(spec, run_seed(spec.seed, run), None);
    let target_seed = spec.target_seed.unwrap_or(spec.seed);
    let shift = (!spec.shift.is_identity()).then_some(&spec.shift);
    let (xt, yt) = draw(spec, run_seed(target_seed, run), shift);
    Ok((
        SensorRecording::new(SOURCE_SUBJECT, run, spec.sample_rate, xs, ys)?,
        SensorRecording::new(TARGET_SUBJECT, run, spec.sample_rate, xt, yt)?,
    ))
}

/// Source and target recordings for a single run (ADL1).
pub fn generate(spec: &ShiftSpec) -> Result<(SensorRecording, SensorRecording), SynthError> {
    generate_run(spec, RunId::Adl(1))
}

/// Both domains for every run in `runs`.
pub fn generate_runs(spec: &ShiftSpec, runs: &[RunId]) -> Result<Vec<SensorRecording>, SynthError> {
    let mut out = Vec::with_capacity(2 * runs.len());
    for run in runs {
        let (s, t) = generate_run(spec, *run)?;
        out.push(s);
        out.push(t);
    }
    Ok(out)
}

/// Every run the split of [`ShiftSpec::split_spec`] needs.
pub fn generate_split_runs(spec: &ShiftSpec) -> Result<Vec<SensorRecording>, SynthError> {
    let split = spec.split_spec();
    let runs: Vec<RunId> = split.train_runs.iter().chain(&split.eval_runs).copied().collect();
    generate_runs(spec, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_same_seed_is_bit_identical() {
        let spec = ShiftSpec::seeded(4, 6, 9);
        let (s, t) = generate(&spec).unwrap();
        assert_eq!(s.channels, t.channels);
        assert_eq!(s.labels, t.labels);
    }

    #[test]
    fn gain_scales_channel_before_noise() {
        let mut spec = ShiftSpec::seeded(3, 4, 2);
        spec.noise_sigma = 0.0;
        spec.shift.gain = vec![2.0, 1.0, 1.0, 1.0];
        let (s, t) = generate(&spec).unwrap();
        assert_eq!(t.channels.column(0), s.channels.column(0).mapv(|v| 2.0 * v));
        assert_eq!(t.channels.column(1), s.channels.column(1));
    }

    #[test]
    fn rotation_preserves_pair_norms() {
        let mut spec = ShiftSpec::seeded(3, 4, 2);
        spec.noise_sigma = 0.0;
        spec.shift.rotation = 0.7;
        let (s, t) = generate(&spec).unwrap();
        for (a, b) in s.channels.rows().into_iter().zip(t.channels.rows()) {
            let ns = a[0] * a[0] + a[1] * a[1];
            let nt = b[0] * b[0] + b[1] * b[1];
            assert!((ns - nt).abs() < 1e-12);
        }
    }

    #[test]
    fn distinct_runs_differ_and_generation_is_deterministic() {
        let spec = ShiftSpec::seeded(4, 3, 5);
        let (a, _) = generate_run(&spec, RunId::Adl(1)).unwrap();
        let (b, _) = generate_run(&spec, RunId::Adl(2)).unwrap();
        let (a2, _) = generate_run(&spec, RunId::Adl(1)).unwrap();
        assert_ne!(a.channels, b.channels);
        assert_eq!(a.channels, a2.channels);
        assert_eq!(a.labels, a2.labels);
    }

    #[test]
    fn every_class_and_null_appear() {
        let spec = ShiftSpec::seeded(4, 3, 5);
        let (s, _) = generate(&spec).unwrap();
        for class in 0..=4u16 {
            assert!(s.labels.contains(&class), "class {class} missing");
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut spec = ShiftSpec::seeded(4, 3, 5);
        spec.n_channels = 0;
        assert!(spec.validate().is_err());
        let mut spec = ShiftSpec::seeded(4, 3, 5);
        spec.noise_sigma = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = ShiftSpec::seeded(4, 3, 5);
        spec.shift.gain = vec![1.0];
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let spec = ShiftSpec::fixture();
        assert_eq!(ShiftSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
    }
}
