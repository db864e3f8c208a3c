use super::mask::MotionMask;
use super::SegmentError;
use crate::dataset::{Frame, GestureKind, Stream};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Motion runs shorter than this are discarded as noise.
    pub min_dg_len: usize,
    /// Runs separated by fewer static frames than this are merged.
    pub merge_gap: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_dg_len: 10,
            merge_gap: 5,
        }
    }
}

impl SegmentConfig {
    /// No filtering and no merging: every maximal run becomes a DG candidate.
    pub fn exact() -> Self {
        Self {
            min_dg_len: 1,
            merge_gap: 0,
        }
    }

    fn close_after(&self) -> usize {
        self.merge_gap.max(1)
    }
}

/// A DG candidate (one merged motion run) or the SG candidate frame that
/// follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: GestureKind,
    pub start: usize,
    pub len: usize,
    pub frames: Vec<Frame>,
    /// False for a motion run still open at the end of the data.
    pub complete: bool,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentEvent {
    /// A frame labelled moving inside the current run; `j` counts frames
    /// from the run start (gap frames of merged runs included).
    Progress { start: usize, index: usize, j: usize },
    /// A run was closed and kept: the DG candidate and, when the run was
    /// followed by a static frame, the SG candidate.
    Closed {
        dynamic: Segment,
        static_frame: Option<Segment>,
    },
    /// A run was closed but was shorter than `min_dg_len`.
    Discarded { start: usize, len: usize },
}

#[derive(Debug, Clone)]
struct OpenRun {
    start: usize,
    /// Frames from `start` up to the last frame seen, gap included.
    frames: Vec<Frame>,
    /// Trailing static frames after the last moving frame.
    gap: usize,
}

/// Incremental candidate extraction over `(frame, motion bit)` pairs.
#[derive(Debug, Clone)]
pub struct SegmentTracker {
    config: SegmentConfig,
    next_index: usize,
    open: Option<OpenRun>,
}

impl SegmentTracker {
    pub fn new(config: SegmentConfig) -> Self {
        Self {
            config,
            next_index: 0,
            open: None,
        }
    }

    pub fn config(&self) -> &SegmentConfig {
        &self.config
    }

    /// Frames of the run in progress (from its first moving frame).
    pub fn open_frames(&self) -> Option<(usize, &[Frame])> {
        self.open.as_ref().map(|r| (r.start, r.frames.as_slice()))
    }

    pub fn in_motion(&self) -> bool {
        self.open.as_ref().is_some_and(|r| r.gap == 0)
    }

    fn close(&mut self, run: OpenRun, complete: bool, out: &mut Vec<SegmentEvent>) {
        let len = run.frames.len() - run.gap;
        if len < self.config.min_dg_len {
            out.push(SegmentEvent::Discarded {
                start: run.start,
                len,
            });
            return;
        }
        let static_frame = (run.gap > 0).then(|| Segment {
            kind: GestureKind::Static,
            start: run.start + len,
            len: 1,
            frames: vec![run.frames[len]],
            complete: true,
        });
        let mut frames = run.frames;
        frames.truncate(len);
        out.push(SegmentEvent::Closed {
            dynamic: Segment {
                kind: GestureKind::Dynamic,
                start: run.start,
                len,
                frames,
                complete,
            },
            static_frame,
        });
    }

    pub fn push(&mut self, frame: Frame, moving: bool) -> Vec<SegmentEvent> {
        let index = self.next_index;
        self.next_index += 1;
        let mut out = Vec::new();
        match (&mut self.open, moving) {
            (None, false) => {}
            (None, true) => {
                self.open = Some(OpenRun {
                    start: index,
                    frames: vec![frame],
                    gap: 0,
                });
                out.push(SegmentEvent::Progress {
                    start: index,
                    index,
                    j: 1,
                });
            }
            (Some(run), true) => {
                run.frames.push(frame);
                run.gap = 0;
                out.push(SegmentEvent::Progress {
                    start: run.start,
                    index,
                    j: run.frames.len(),
                });
            }
            (Some(run), false) => {
                run.frames.push(frame);
                run.gap += 1;
                if run.gap >= self.config.close_after() {
                    let run = self.open.take().expect("open run");
                    self.close(run, true, &mut out);
                }
            }
        }
        out
    }

    /// Closes whatever is open at the end of the data.
    pub fn finish(&mut self) -> Vec<SegmentEvent> {
        let mut out = Vec::new();
        if let Some(run) = self.open.take() {
            let complete = run.gap > 0;
            self.close(run, complete, &mut out);
        }
        out
    }
}

/// All SG/DG candidates of a labelled stream, in stream order.
pub fn extract_segments(
    stream: &Stream,
    mask: &MotionMask,
    config: SegmentConfig,
) -> Result<Vec<Segment>, SegmentError> {
    extract_from_frames(&stream.frames, mask.bits(), config)
}

pub(crate) fn extract_from_frames(
    frames: &[Frame],
    bits: &[bool],
    config: SegmentConfig,
) -> Result<Vec<Segment>, SegmentError> {
    if bits.len() != frames.len() {
        return Err(SegmentError::LengthMismatch {
            mask: bits.len(),
            stream: frames.len(),
        });
    }
    let mut tracker = SegmentTracker::new(config);
    let mut events = Vec::new();
    for (f, &m) in frames.iter().zip(bits) {
        events.extend(tracker.push(*f, m));
    }
    events.extend(tracker.finish());
    let mut segments = Vec::new();
    for e in events {
        if let SegmentEvent::Closed {
            dynamic,
            static_frame,
        } = e
        {
            segments.push(dynamic);
            segments.extend(static_frame);
        }
    }
    Ok(segments)
}
