use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{
    interpolate, segment, ChannelStats, DataError, Domain, Result, RunId, SensorRecording,
    WindowBatches, WindowSet,
};

/// Which subjects and runs make up the four partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub source_subject: u32,
    pub target_subject: u32,
    /// Runs used for training (source labeled, target unlabeled).
    pub train_runs: Vec<RunId>,
    /// Runs used for source validation and target testing.
    pub eval_runs: Vec<RunId>,
    #[serde(default = "default_length")]
    pub window_length: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_length() -> usize {
    24
}

fn default_stride() -> usize {
    12
}

impl SplitSpec {
    /// Subject 3 → subject 4; ADL1-3 + Drill train, ADL4-5 evaluate.
    pub fn paper_default() -> Self {
        SplitSpec {
            source_subject: 3,
            target_subject: 4,
            train_runs: vec![RunId::Adl(1), RunId::Adl(2), RunId::Adl(3), RunId::Drill],
            eval_runs: vec![RunId::Adl(4), RunId::Adl(5)],
            window_length: 24,
            stride: 12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_runs.is_empty() || self.eval_runs.is_empty() {
            return Err(DataError::Split(
                "train_runs and eval_runs must both be non-empty".into(),
            ));
        }
        if self.window_length == 0 || self.stride == 0 {
            return Err(DataError::Split("window length and stride must be positive".into()));
        }
        if let Some(r) = self.train_runs.iter().find(|r| self.eval_runs.contains(r)) {
            return Err(DataError::Split(format!("run {r} is both a train and an eval run")));
        }
        Ok(())
    }

    fn required(&self) -> Vec<(u32, RunId)> {
        let mut out = Vec::new();
        for subject in [self.source_subject, self.target_subject] {
            for run in self.train_runs.iter().chain(&self.eval_runs) {
                if !out.contains(&(subject, *run)) {
                    out.push((subject, *run));
                }
            }
        }
        out
    }
}

/// Target training windows with their labels withheld.
#[derive(Debug, Clone)]
pub struct UnlabeledWindows(WindowSet);

impl UnlabeledWindows {
    pub fn new(set: WindowSet) -> Self {
        UnlabeledWindows(set)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn length(&self) -> usize {
        self.0.length
    }

    pub fn channel_count(&self) -> usize {
        self.0.channel_count
    }

    pub fn values(&self, i: usize) -> &Array2<f64> {
        &self.0.windows[i].values
    }

    pub fn batch(&self, indices: &[usize]) -> Array3<f64> {
        self.0.batch(indices)
    }
}

impl WindowBatches for UnlabeledWindows {
    fn window_count(&self) -> usize {
        self.len()
    }

    fn batch_values(&self, indices: &[usize]) -> Array3<f64> {
        self.batch(indices)
    }
}

#[derive(Debug, Clone)]
pub struct DomainSplit {
    pub source_train: WindowSet,
    pub source_val: WindowSet,
    pub target_train: UnlabeledWindows,
    pub target_test: WindowSet,
    /// Normalization statistics fitted on the source training runs.
    pub stats: ChannelStats,
}

impl DomainSplit {
    pub fn window_length(&self) -> usize {
        self.source_train.length
    }

    pub fn channel_count(&self) -> usize {
        self.source_train.channel_count
    }
}

fn find<'a>(recs: &'a [SensorRecording], subject: u32, run: RunId) -> Option<&'a SensorRecording> {
    recs.iter().find(|r| r.subject_id == subject && r.run == run)
}

/// Clean, normalize (with source-train statistics) and segment the runs the
/// spec names.
pub fn build_split(recordings: &[SensorRecording], spec: &SplitSpec) -> Result<DomainSplit> {
    spec.validate()?;
    let missing: Vec<(u32, RunId)> = spec
        .required()
        .into_iter()
        .filter(|(s, r)| find(recordings, *s, *r).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingRuns(missing));
    }
    let channels = find(recordings, spec.source_subject, spec.train_runs[0])
        .expect("checked above")
        .channel_count();
    for (s, r) in spec.required() {
        let rec = find(recordings, s, r).expect("checked above");
        rec.check()?;
        if rec.channel_count() != channels {
            return Err(DataError::Split(format!(
                "S{s}-{r} has {} channels, expected {channels}",
                rec.channel_count()
            )));
        }
    }

    let filled = |s: u32, r: RunId| interpolate(find(recordings, s, r).expect("checked above")).0;
    let source_fit: Vec<SensorRecording> = spec
        .train_runs
        .iter()
        .map(|r| filled(spec.source_subject, *r))
        .collect();
    let stats = ChannelStats::fit(&source_fit);

    let windows = |subject: u32, runs: &[RunId], domain: Domain| {
        let mut set = WindowSet::empty(spec.window_length, spec.stride, channels);
        for run in runs {
            let rec = stats.apply(&filled(subject, *run));
            set.extend(segment(&rec, spec.window_length, spec.stride, true, domain));
        }
        set
    };

    Ok(DomainSplit {
        source_train: windows(spec.source_subject, &spec.train_runs, Domain::Source),
        source_val: windows(spec.source_subject, &spec.eval_runs, Domain::Source),
        target_train: UnlabeledWindows(windows(
            spec.target_subject,
            &spec.train_runs,
            Domain::Target,
        )),
        target_test: windows(spec.target_subject, &spec.eval_runs, Domain::Target),
        stats,
    })
}

/// Labeled target windows for fine-tuning, normalized with the split's
/// statistics.
pub fn build_tuning_set(
    recordings: &[SensorRecording],
    subject: u32,
    runs: &[RunId],
    stats: &ChannelStats,
    length: usize,
    stride: usize,
) -> Result<WindowSet> {
    if runs.is_empty() {
        return Err(DataError::Split("tuning set names no runs".into()));
    }
    let missing: Vec<(u32, RunId)> = runs
        .iter()
        .filter(|r| find(recordings, subject, **r).is_none())
        .map(|r| (subject, *r))
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingRuns(missing));
    }
    let mut set = WindowSet::empty(length, stride, stats.channel_count());
    for run in runs {
        let rec = find(recordings, subject, *run).expect("checked above");
        if rec.channel_count() != stats.channel_count() {
            return Err(DataError::Split(format!(
                "S{subject}-{run} has {} channels, expected {}",
                rec.channel_count(),
                stats.channel_count()
            )));
        }
        let rec = stats.apply(&interpolate(rec).0);
        set.extend(segment(&rec, length, stride, true, Domain::Target));
    }
    Ok(set)
}
