use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{RunId, SensorRecording, NULL_CLASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    /// Index used as the domain classifier's target: source 0, target 1.
    pub fn index(self) -> usize {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowOrigin {
    pub subject_id: u32,
    pub run: RunId,
    pub start: usize,
}

/// A fixed-length slice of a recording, labeled by its last instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `[L × C]`.
    pub values: Array2<f64>,
    pub label: u16,
    pub domain: Domain,
    pub origin: WindowOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub length: usize,
    pub stride: usize,
    pub channel_count: usize,
}

impl WindowSet {
    pub fn empty(length: usize, stride: usize, channel_count: usize) -> Self {
        WindowSet {
            windows: Vec::new(),
            length,
            stride,
            channel_count,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<u16> {
        self.windows.iter().map(|w| w.label).collect()
    }

    /// Stack the selected windows into a `[B × L × C]` batch.
    pub fn batch(&self, indices: &[usize]) -> Array3<f64> {
        let mut out = Array3::zeros((indices.len(), self.length, self.channel_count));
        for (b, &i) in indices.iter().enumerate() {
            out.slice_mut(s![b, .., ..]).assign(&self.windows[i].values);
        }
        out
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<u16> {
        indices.iter().map(|&i| self.windows[i].label).collect()
    }

    /// Append another set's windows; shapes must agree.
    pub fn extend(&mut self, other: WindowSet) {
        assert_eq!(
            (self.length, self.channel_count),
            (other.length, other.channel_count),
            "window shape mismatch"
        );
        self.windows.extend(other.windows);
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        for w in &mut self.windows {
            w.domain = domain;
        }
        self
    }

    /// Windows whose index modulo `every` equals `every - 1` go to the
    /// second set, the rest to the first.
    pub fn split_every(&self, every: usize) -> (WindowSet, WindowSet) {
        let mut keep = WindowSet::empty(self.length, self.stride, self.channel_count);
        let mut held = keep.clone();
        for (i, w) in self.windows.iter().enumerate() {
            if every > 0 && i % every == every - 1 {
                held.windows.push(w.clone());
            } else {
                keep.windows.push(w.clone());
            }
        }
        (keep, held)
    }
}

/// Label-free access to window values.
pub trait WindowBatches {
    fn window_count(&self) -> usize;
    /// `[indices.len() × L × C]`.
    fn batch_values(&self, indices: &[usize]) -> Array3<f64>;
}

impl WindowBatches for WindowSet {
    fn window_count(&self) -> usize {
        self.len()
    }

    fn batch_values(&self, indices: &[usize]) -> Array3<f64> {
        self.batch(indices)
    }
}

/// Number of windows (before null filtering) that fit in `t` instants.
pub fn window_count(t: usize, length: usize, stride: usize) -> usize {
    if length == 0 || stride == 0 || length > t {
        0
    } else {
        (t - length) / stride + 1
    }
}

/// Slide a window of `length` instants with step `stride` over the
/// recording. Windows are labeled by their last instant; null-labeled
/// windows are dropped when `drop_null` is set.
pub fn segment(
    rec: &SensorRecording,
    length: usize,
    stride: usize,
    drop_null: bool,
    domain: Domain,
) -> WindowSet {
    assert!(length >= 1 && stride >= 1, "window length and stride must be positive");
    let mut set = WindowSet::empty(length, stride, rec.channel_count());
    let t = rec.len();
    if length > t {
        log::warn!(
            "S{}-{}: window length {length} exceeds recording length {t}; no windows",
            rec.subject_id,
            rec.run
        );
        return set;
    }
    for k in 0..window_count(t, length, stride) {
        let start = k * stride;
        let label = rec.labels[start + length - 1];
        if drop_null && label == NULL_CLASS {
            continue;
        }
        set.windows.push(Window {
            values: rec.channels.slice(s![start..start + length, ..]).to_owned(),
            label,
            domain,
            origin: WindowOrigin {
                subject_id: rec.subject_id,
                run: rec.run,
                start,
            },
        });
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec_with_labels(labels: Vec<u16>) -> SensorRecording {
        let t = labels.len();
        let channels = Array2::from_shape_fn((t, 2), |(i, j)| (i * 2 + j) as f64);
        SensorRecording::new(3, RunId::Adl(1), 30.0, channels, labels).unwrap()
    }

    #[test]
    fn two_windows_in_36_instants() {
        let set = segment(&rec_with_labels(vec![1; 36]), 24, 12, true, Domain::Source);
        let starts: Vec<usize> = set.windows.iter().map(|w| w.origin.start).collect();
        assert_eq!(starts, vec![0, 12]);
    }

    #[test]
    fn exactly_one_full_length_window() {
        let set = segment(&rec_with_labels(vec![2; 24]), 24, 12, true, Domain::Source);
        assert_eq!(set.len(), 1);
        assert_eq!(set.windows[0].values.dim(), (24, 2));
    }

    #[test]
    fn all_null_is_dropped() {
        let set = segment(&rec_with_labels(vec![0; 48]), 24, 12, true, Domain::Source);
        assert!(set.is_empty());
        let kept = segment(&rec_with_labels(vec![0; 48]), 24, 12, false, Domain::Source);
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn short_recording_gives_empty_set() {
        let set = segment(&rec_with_labels(vec![1; 10]), 24, 12, true, Domain::Source);
        assert!(set.is_empty());
        assert_eq!(set.channel_count, 2);
    }

    #[test]
    fn label_comes_from_last_instant() {
        let mut labels = vec![1; 30];
        labels[23] = 4;
        labels[29] = 0;
        let set = segment(&rec_with_labels(labels), 24, 6, true, Domain::Target);
        assert_eq!(set.len(), 1);
        assert_eq!(set.windows[0].label, 4);
        assert_eq!(set.windows[0].domain, Domain::Target);
        assert_eq!(set.windows[0].values[[0, 1]], 1.0);
    }

    #[test]
    fn batch_stacks_windows() {
        let set = segment(&rec_with_labels(vec![1; 48]), 24, 12, true, Domain::Source);
        let b = set.batch(&[2, 0]);
        assert_eq!(b.dim(), (2, 24, 2));
        assert_eq!(b[[0, 0, 0]], set.windows[2].values[[0, 0]]);
        assert_eq!(set.batch_labels(&[2, 0]), vec![1, 1]);
    }
}
