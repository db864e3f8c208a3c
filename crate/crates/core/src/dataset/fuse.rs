use super::{DatasetError, Frame, Stream, CHANNELS, GLOVE_CHANNELS, NOMINAL_RATE_HZ};
use serde::{Deserialize, Serialize};

/// Larger glove/tracker offsets are reported.
pub const MAX_TRACKER_GAP: f64 = 0.100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GloveReading {
    pub t: f64,
    pub bend: [f64; GLOVE_CHANNELS],
}

/// Position `l1..l3` and Euler angles `l4..l6` (roll, pitch, yaw).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerReading {
    pub t: f64,
    pub pose: [f64; 6],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    /// Glove frame indices whose nearest tracker frame was further than
    /// [`MAX_TRACKER_GAP`] away.
    pub gap_warnings: Vec<usize>,
}

/// Pairs each glove frame with the tracker frame closest in time. Ties go to the
/// earlier tracker frame.
pub fn fuse_streams(
    glove: &[GloveReading],
    tracker: &[TrackerReading],
) -> Result<(Stream, FuseReport), DatasetError> {
    if glove.is_empty() {
        return Err(DatasetError::Empty("glove stream"));
    }
    if tracker.is_empty() {
        return Err(DatasetError::Empty("tracker stream"));
    }
    let mut report = FuseReport::default();
    let mut frames = Vec::with_capacity(glove.len());
    let mut j = 0;
    for (i, g) in glove.iter().enumerate() {
        while j + 1 < tracker.len() && (tracker[j + 1].t - g.t).abs() < (tracker[j].t - g.t).abs() {
            j += 1;
        }
        let tr = &tracker[j];
        if (tr.t - g.t).abs() > MAX_TRACKER_GAP {
            tracing::warn!(glove_index = i, dt = tr.t - g.t, "tracker gap above 100 ms");
            report.gap_warnings.push(i);
        }
        let mut channels = [0.0; CHANNELS];
        channels[..GLOVE_CHANNELS].copy_from_slice(&g.bend);
        channels[GLOVE_CHANNELS..].copy_from_slice(&tr.pose);
        frames.push(Frame::new(g.t, channels));
    }
    let stream = Stream {
        frames,
        nominal_rate: NOMINAL_RATE_HZ,
    };
    Ok((stream, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn glove(t: f64) -> GloveReading {
        GloveReading {
            t,
            bend: [t; GLOVE_CHANNELS],
        }
    }

    fn tracker(t: f64, tag: f64) -> TrackerReading {
        TrackerReading { t, pose: [tag; 6] }
    }

    #[test]
    fn closest_in_time_wins() {
        let (s, report) =
            fuse_streams(&[glove(0.0)], &[tracker(-0.004, 1.0), tracker(0.005, 2.0)]).unwrap();
        assert_eq!(s.frames[0].channels[GLOVE_CHANNELS], 1.0);
        assert!(report.gap_warnings.is_empty());
    }

    #[test]
    fn identical_timestamps_pair_exactly() {
        let g: Vec<_> = (0..5).map(|i| glove(i as f64 * 0.01)).collect();
        let t: Vec<_> = (0..5).map(|i| tracker(i as f64 * 0.01, i as f64)).collect();
        let (s, _) = fuse_streams(&g, &t).unwrap();
        for (i, f) in s.frames.iter().enumerate() {
            assert_eq!(f.channels[CHANNELS - 1], i as f64);
        }
    }

    #[test]
    fn glove_rate_governs_length() {
        let g: Vec<_> = (0..100).map(|i| glove(i as f64 / 100.0)).collect();
        let t: Vec<_> = (0..120).map(|i| tracker(i as f64 / 120.0, i as f64)).collect();
        let (s, report) = fuse_streams(&g, &t).unwrap();
        assert_eq!(s.len(), 100);
        assert!(report.gap_warnings.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn large_gap_is_reported_but_fused() {
        let (s, report) = fuse_streams(&[glove(0.0), glove(1.0)], &[tracker(0.0, 1.0)]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(report.gap_warnings, vec![1]);
    }

    #[test]
    fn empty_inputs_error() {
        assert!(fuse_streams(&[], &[tracker(0.0, 0.0)]).is_err());
        assert!(fuse_streams(&[glove(0.0)], &[]).is_err());
    }
}
