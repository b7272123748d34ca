use serde::{Deserialize, Serialize};

use super::SensorRecording;

/// What cleaning changed in a recording.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub filled_values: usize,
    /// Channels with no valid sample, masked out and zero-filled.
    pub masked_channels: Vec<usize>,
}

/// Fill missing values by linear interpolation along time. Gaps before the
/// first or after the last valid sample take the nearest valid value. A
/// channel with no valid sample is masked and zero-filled.
pub fn interpolate(rec: &SensorRecording) -> (SensorRecording, CleanReport) {
    let mut out = rec.clone();
    let mut report = CleanReport::default();
    for (j, mut col) in out.channels.columns_mut().into_iter().enumerate() {
        if !out.channel_mask[j] {
            col.fill(0.0);
            continue;
        }
        let anchors: Vec<usize> = (0..col.len()).filter(|&i| !col[i].is_nan()).collect();
        let missing = col.len() - anchors.len();
        if missing == 0 {
            continue;
        }
        let (Some(&first), Some(&last)) = (anchors.first(), anchors.last()) else {
            col.fill(0.0);
            out.channel_mask[j] = false;
            report.masked_channels.push(j);
            continue;
        };
        report.filled_values += missing;
        let (head, tail) = (col[first], col[last]);
        for i in 0..first {
            col[i] = head;
        }
        for i in last + 1..col.len() {
            col[i] = tail;
        }
        for pair in anchors.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b == a + 1 {
                continue;
            }
            let (va, vb) = (col[a], col[b]);
            let span = (b - a) as f64;
            for i in a + 1..b {
                col[i] = va + (vb - va) * ((i - a) as f64 / span);
            }
        }
    }
    (out, report)
}

/// Per-channel observed ranges used for the `[-1, 1]` rescaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// `None` for channels with no valid sample in the fitted recordings.
    pub ranges: Vec<Option<(f64, f64)>>,
}

impl ChannelStats {
    /// Observed min/max over unmasked, non-missing values.
    pub fn fit<'a>(recordings: impl IntoIterator<Item = &'a SensorRecording>) -> Self {
        let mut ranges: Vec<Option<(f64, f64)>> = Vec::new();
        for rec in recordings {
            if ranges.is_empty() {
                ranges = vec![None; rec.channel_count()];
            }
            assert_eq!(ranges.len(), rec.channel_count(), "channel count differs");
            for (j, col) in rec.channels.columns().into_iter().enumerate() {
                if !rec.channel_mask[j] {
                    continue;
                }
                for &v in col.iter().filter(|v| !v.is_nan()) {
                    ranges[j] = Some(match ranges[j] {
                        None => (v, v),
                        Some((lo, hi)) => (lo.min(v), hi.max(v)),
                    });
                }
            }
        }
        ChannelStats { ranges }
    }

    pub fn channel_count(&self) -> usize {
        self.ranges.len()
    }

    /// Affine map observed min → -1, max → +1, clamped to `[-1, 1]`.
    /// Constant channels map to 0. Channels without statistics are masked.
    pub fn apply(&self, rec: &SensorRecording) -> SensorRecording {
        assert_eq!(self.ranges.len(), rec.channel_count(), "channel count differs");
        let mut out = rec.clone();
        for (j, mut col) in out.channels.columns_mut().into_iter().enumerate() {
            match self.ranges[j] {
                _ if !out.channel_mask[j] => col.fill(0.0),
                None => {
                    col.fill(0.0);
                    out.channel_mask[j] = false;
                }
                // Already canonical: leave untouched so the map is a fixed point.
                Some((lo, hi)) if lo == -1.0 && hi == 1.0 => {
                    col.mapv_inplace(|v| v.clamp(-1.0, 1.0));
                }
                Some((lo, hi)) if hi == lo => col.fill(0.0),
                Some((lo, hi)) => {
                    let span = hi - lo;
                    col.mapv_inplace(|v| (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0));
                }
            }
        }
        out
    }
}

/// Interpolate, then rescale every channel with its own observed range.
pub fn clean_and_normalize(rec: &SensorRecording) -> (SensorRecording, CleanReport) {
    let (filled, report) = interpolate(rec);
    let stats = ChannelStats::fit([&filled]);
    (stats.apply(&filled), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RunId;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn rec(channels: Array2<f64>) -> SensorRecording {
        let t = channels.nrows();
        SensorRecording::new(1, RunId::Adl(1), 30.0, channels, vec![1; t]).unwrap()
    }

    #[test]
    fn midpoint_interpolation() {
        let (out, report) = interpolate(&rec(array![[1.0], [f64::NAN], [3.0]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(report.filled_values, 1);
    }

    #[test]
    fn boundary_gaps_take_nearest_value() {
        let (out, _) = interpolate(&rec(array![[f64::NAN], [2.0], [f64::NAN], [4.0], [f64::NAN]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![2.0, 2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn min_max_map() {
        let (out, _) = clean_and_normalize(&rec(array![[0.0], [5.0], [10.0]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let (out, _) = clean_and_normalize(&rec(array![[4.0], [4.0], [4.0]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn interpolated_then_scaled() {
        let (out, _) = clean_and_normalize(&rec(array![[1.0], [f64::NAN], [3.0]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn all_missing_channel_is_masked_not_fatal() {
        let (out, report) = clean_and_normalize(&rec(array![
            [1.0, f64::NAN],
            [2.0, f64::NAN]
        ]));
        assert_eq!(report.masked_channels, vec![1]);
        assert_eq!(out.channel_mask, vec![true, false]);
        assert_eq!(out.channels.column(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn foreign_statistics_are_clamped() {
        let stats = ChannelStats::fit([&rec(array![[0.0], [10.0]])]);
        let out = stats.apply(&rec(array![[-5.0], [5.0], [20.0]]));
        assert_eq!(out.channels.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
    }

    fn arb_recording() -> impl Strategy<Value = SensorRecording> {
        (1usize..40, 1usize..5).prop_flat_map(|(t, c)| {
            proptest::collection::vec(
                prop_oneof![9 => -1.0e4f64..1.0e4, 1 => Just(f64::NAN)],
                t * c,
            )
            .prop_map(move |v| rec(Array2::from_shape_vec((t, c), v).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(r in arb_recording()) {
            let (once, _) = clean_and_normalize(&r);
            let (twice, _) = clean_and_normalize(&once);
            prop_assert_eq!(&once.channel_mask, &twice.channel_mask);
            for (a, b) in once.channels.iter().zip(twice.channels.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn cleaned_values_are_finite_and_bounded(r in arb_recording()) {
            let (out, _) = clean_and_normalize(&r);
            for (j, col) in out.channels.columns().into_iter().enumerate() {
                if out.channel_mask[j] {
                    prop_assert!(col.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)));
                }
            }
        }
    }
}
