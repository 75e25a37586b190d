//! Shared vocabulary of the pipeline: the four hands, the five tool
//! states, the 20-class taxonomy built from them, detection records,
//! and frame-indexed label timelines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of hands tracked in every frame.
pub const N_HANDS: usize = 4;
/// Number of tool states a hand can be in.
pub const N_STATES: usize = 5;
/// Number of (hand, state) detection classes.
pub const N_CLASSES: usize = N_HANDS * N_STATES;

/// One of the four hands involved in the procedure.
///
/// The ordering (surgeon right, surgeon left, assistant right,
/// assistant left) is fixed; class ids, report rows and all per-hand
/// arrays follow it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HandId {
    SurgeonRight,
    SurgeonLeft,
    AssistantRight,
    AssistantLeft,
}

impl HandId {
    pub const ALL: [HandId; N_HANDS] = [
        HandId::SurgeonRight,
        HandId::SurgeonLeft,
        HandId::AssistantRight,
        HandId::AssistantLeft,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::domain(format!("hand index {i} out of range 0..{N_HANDS}")))
    }

    /// Two-letter code used in annotation files and reports.
    pub fn code(self) -> &'static str {
        match self {
            HandId::SurgeonRight => "SR",
            HandId::SurgeonLeft => "SL",
            HandId::AssistantRight => "AR",
            HandId::AssistantLeft => "AL",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|h| h.code() == code)
            .ok_or_else(|| Error::field("hand", format!("unknown hand code `{code}`")))
    }
}

/// What a hand is holding: nothing or one of the four tools.
///
/// Ordering (E, N, F, S, M) is fixed and shared by class ids, feature
/// vector slots and classifier outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToolState {
    Empty,
    NeedleHolder,
    Forceps,
    Scissors,
    MosquitoForceps,
}

impl ToolState {
    pub const ALL: [ToolState; N_STATES] = [
        ToolState::Empty,
        ToolState::NeedleHolder,
        ToolState::Forceps,
        ToolState::Scissors,
        ToolState::MosquitoForceps,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::domain(format!("tool state index {i} out of range 0..{N_STATES}")))
    }

    /// One-letter code used in annotation files and reports.
    pub fn code(self) -> &'static str {
        match self {
            ToolState::Empty => "E",
            ToolState::NeedleHolder => "N",
            ToolState::Forceps => "F",
            ToolState::Scissors => "S",
            ToolState::MosquitoForceps => "M",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.code() == code)
            .ok_or_else(|| Error::field("state", format!("unknown state code `{code}`")))
    }
}

/// One of the two camera views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CameraId {
    TopView,
    CloseUp,
}

impl CameraId {
    pub const ALL: [CameraId; 2] = [CameraId::TopView, CameraId::CloseUp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            CameraId::TopView => "top",
            CameraId::CloseUp => "close",
        }
    }
}

/// A (hand, state) pair: one of the 20 detection classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionClass {
    pub hand: HandId,
    pub state: ToolState,
}

impl DetectionClass {
    pub fn new(hand: HandId, state: ToolState) -> Self {
        DetectionClass { hand, state }
    }

    /// Integer id in 0..20, hand-major.
    pub fn id(self) -> usize {
        class_encode(self.hand, self.state)
    }

    /// Three-letter code, e.g. `SRN` for surgeon-right needle holder.
    pub fn code(self) -> String {
        format!("{}{}", self.hand.code(), self.state.code())
    }

    pub fn from_code(code: &str) -> Result<Self> {
        if code.len() != 3 {
            return Err(Error::field(
                "class",
                format!("class code `{code}` must be 3 characters"),
            ));
        }
        let hand = HandId::from_code(&code[..2])
            .map_err(|_| Error::field("class", format!("unknown class code `{code}`")))?;
        let state = ToolState::from_code(&code[2..])
            .map_err(|_| Error::field("class", format!("unknown class code `{code}`")))?;
        Ok(DetectionClass { hand, state })
    }
}

/// Map a (hand, state) pair to its class id in 0..20.
pub fn class_encode(hand: HandId, state: ToolState) -> usize {
    hand.index() * N_STATES + state.index()
}

/// Inverse of [`class_encode`]; errors on ids outside 0..20.
pub fn class_decode(id: usize) -> Result<(HandId, ToolState)> {
    if id >= N_CLASSES {
        return Err(Error::domain(format!(
            "class id {id} out of range 0..{N_CLASSES}"
        )));
    }
    Ok((
        HandId::from_index(id / N_STATES)?,
        ToolState::from_index(id % N_STATES)?,
    ))
}

/// Axis-aligned bounding box in normalized center format: `x`/`y` give
/// the box center, `w`/`h` the width and height, all as fractions of
/// the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x", self.x), ("y", self.y)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::field(name, format!("{v} outside [0, 1]")));
            }
        }
        for (name, v) in [("w", self.w), ("h", self.h)] {
            if v <= 0.0 || v > 1.0 || v.is_nan() {
                return Err(Error::field(name, format!("{v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// One detected (hand, tool) object in one camera frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub camera: CameraId,
    /// Frame index at the nominal 30 fps of the stream.
    pub frame: usize,
    pub cls: DetectionClass,
    /// Detection probability in [0, 1].
    pub p: f64,
    pub bbox: BBox,
}

/// A contiguous run of frames during which one hand holds one state.
/// `end_frame` is exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInterval {
    pub hand: HandId,
    pub state: ToolState,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl EventInterval {
    pub fn new(hand: HandId, state: ToolState, start_frame: usize, end_frame: usize) -> Self {
        EventInterval {
            hand,
            state,
            start_frame,
            end_frame,
        }
    }
}

/// Per-hand tool state for every frame of a session, defined even when
/// the hand is invisible in both cameras. Doubles as the container for
/// predicted label sequences, which share the same shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTimeline {
    n_frames: usize,
    labels: [Vec<ToolState>; N_HANDS],
}

impl LabelTimeline {
    /// Timeline with every hand `Empty` for all frames.
    pub fn empty(n_frames: usize) -> Self {
        LabelTimeline {
            n_frames,
            labels: std::array::from_fn(|_| vec![ToolState::Empty; n_frames]),
        }
    }

    /// Assemble a timeline from per-hand label vectors, which must all
    /// have equal length.
    pub fn from_labels(labels: [Vec<ToolState>; N_HANDS]) -> Result<Self> {
        let n_frames = labels[0].len();
        if labels.iter().any(|l| l.len() != n_frames) {
            return Err(Error::domain("per-hand label vectors differ in length"));
        }
        Ok(LabelTimeline { n_frames, labels })
    }

    /// Expand event intervals into a dense per-hand, per-frame timeline.
    ///
    /// Frames covered by an interval take its state. Frames between two
    /// intervals of the same hand carry the earlier interval's state
    /// forward; frames before a hand's first interval are `Empty`.
    pub fn from_intervals(intervals: &[EventInterval], n_frames: usize) -> Result<Self> {
        let mut per_hand: [Vec<&EventInterval>; N_HANDS] = Default::default();
        for iv in intervals {
            if iv.start_frame >= iv.end_frame {
                return Err(Error::domain(format!(
                    "empty interval for hand {}: start {} >= end {}",
                    iv.hand.code(),
                    iv.start_frame,
                    iv.end_frame
                )));
            }
            per_hand[iv.hand.index()].push(iv);
        }

        let mut timeline = LabelTimeline::empty(n_frames);
        for (hand_idx, hand_ivs) in per_hand.iter_mut().enumerate() {
            hand_ivs.sort_by_key(|iv| iv.start_frame);
            for pair in hand_ivs.windows(2) {
                if pair[1].start_frame < pair[0].end_frame {
                    return Err(Error::domain(format!(
                        "overlapping intervals for hand {}: [{}, {}) and [{}, {})",
                        pair[0].hand.code(),
                        pair[0].start_frame,
                        pair[0].end_frame,
                        pair[1].start_frame,
                        pair[1].end_frame
                    )));
                }
            }
            let labels = &mut timeline.labels[hand_idx];
            let mut carried = ToolState::Empty;
            let mut cursor = 0usize;
            for iv in hand_ivs.iter() {
                let start = iv.start_frame.min(n_frames);
                let end = iv.end_frame.min(n_frames);
                // Gap before this interval inherits the previous state.
                labels[cursor..start].fill(carried);
                labels[start..end].fill(iv.state);
                carried = iv.state;
                cursor = end;
                if cursor >= n_frames {
                    break;
                }
            }
            labels[cursor.min(n_frames)..].fill(carried);
        }
        Ok(timeline)
    }

    /// Collapse the timeline back into one interval per run of equal
    /// state, covering every frame. Inverse of [`Self::from_intervals`]
    /// up to the carry-forward convention.
    pub fn to_intervals(&self) -> Vec<EventInterval> {
        let mut out = Vec::new();
        for hand in HandId::ALL {
            let labels = &self.labels[hand.index()];
            let mut start = 0usize;
            for f in 1..=self.n_frames {
                if f == self.n_frames || labels[f] != labels[f - 1] {
                    out.push(EventInterval::new(hand, labels[start], start, f));
                    start = f;
                }
            }
        }
        out
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn label(&self, hand: HandId, frame: usize) -> ToolState {
        self.labels[hand.index()][frame]
    }

    pub fn set_label(&mut self, hand: HandId, frame: usize, state: ToolState) {
        self.labels[hand.index()][frame] = state;
    }

    pub fn hand_labels(&self, hand: HandId) -> &[ToolState] {
        &self.labels[hand.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_ids_follow_fixed_order() {
        assert_eq!(class_encode(HandId::SurgeonRight, ToolState::Empty), 0);
        assert_eq!(class_encode(HandId::SurgeonRight, ToolState::NeedleHolder), 1);
        assert_eq!(
            class_encode(HandId::AssistantLeft, ToolState::MosquitoForceps),
            19
        );
    }

    #[test]
    fn class_decode_inverts_encode() {
        for id in 0..N_CLASSES {
            let (h, s) = class_decode(id).unwrap();
            assert_eq!(class_encode(h, s), id);
        }
        assert_eq!(
            class_decode(0).unwrap(),
            (HandId::SurgeonRight, ToolState::Empty)
        );
        assert_eq!(
            class_decode(19).unwrap(),
            (HandId::AssistantLeft, ToolState::MosquitoForceps)
        );
        assert!(class_decode(20).is_err());
    }

    #[test]
    fn class_codes_round_trip() {
        for id in 0..N_CLASSES {
            let (h, s) = class_decode(id).unwrap();
            let cls = DetectionClass::new(h, s);
            assert_eq!(DetectionClass::from_code(&cls.code()).unwrap(), cls);
        }
        assert_eq!(
            DetectionClass::from_code("SRN").unwrap(),
            DetectionClass::new(HandId::SurgeonRight, ToolState::NeedleHolder)
        );
        assert!(DetectionClass::from_code("XYZ").is_err());
        assert!(DetectionClass::from_code("SRNN").is_err());
    }

    #[test]
    fn timeline_carries_last_state_forward() {
        let ivs = [EventInterval::new(
            HandId::SurgeonRight,
            ToolState::NeedleHolder,
            0,
            10,
        )];
        let tl = LabelTimeline::from_intervals(&ivs, 20).unwrap();
        for f in 0..20 {
            assert_eq!(tl.label(HandId::SurgeonRight, f), ToolState::NeedleHolder);
        }
        // Other hands stay Empty.
        for f in 0..20 {
            assert_eq!(tl.label(HandId::AssistantRight, f), ToolState::Empty);
        }
    }

    #[test]
    fn timeline_direct_coverage() {
        let ivs = [
            EventInterval::new(HandId::SurgeonLeft, ToolState::Forceps, 0, 5),
            EventInterval::new(HandId::SurgeonLeft, ToolState::Empty, 5, 10),
        ];
        let tl = LabelTimeline::from_intervals(&ivs, 10).unwrap();
        for f in 0..5 {
            assert_eq!(tl.label(HandId::SurgeonLeft, f), ToolState::Forceps);
        }
        for f in 5..10 {
            assert_eq!(tl.label(HandId::SurgeonLeft, f), ToolState::Empty);
        }
    }

    #[test]
    fn timeline_defaults_to_empty() {
        let tl = LabelTimeline::from_intervals(&[], 10).unwrap();
        for f in 0..10 {
            assert_eq!(tl.label(HandId::AssistantRight, f), ToolState::Empty);
        }
    }

    #[test]
    fn timeline_rejects_overlap() {
        let ivs = [
            EventInterval::new(HandId::SurgeonLeft, ToolState::Forceps, 0, 30),
            EventInterval::new(HandId::SurgeonLeft, ToolState::Empty, 15, 45),
        ];
        assert!(LabelTimeline::from_intervals(&ivs, 60).is_err());
    }

    #[test]
    fn timeline_rejects_empty_interval() {
        let ivs = [EventInterval::new(
            HandId::AssistantLeft,
            ToolState::MosquitoForceps,
            75,
            75,
        )];
        assert!(LabelTimeline::from_intervals(&ivs, 100).is_err());
    }

    #[test]
    fn timeline_gap_before_first_interval_is_empty() {
        let ivs = [EventInterval::new(
            HandId::SurgeonRight,
            ToolState::Scissors,
            5,
            8,
        )];
        let tl = LabelTimeline::from_intervals(&ivs, 12).unwrap();
        for f in 0..5 {
            assert_eq!(tl.label(HandId::SurgeonRight, f), ToolState::Empty);
        }
        for f in 5..8 {
            assert_eq!(tl.label(HandId::SurgeonRight, f), ToolState::Scissors);
        }
        for f in 8..12 {
            assert_eq!(tl.label(HandId::SurgeonRight, f), ToolState::Scissors);
        }
    }

    #[test]
    fn interval_round_trip_covers_all_frames() {
        let ivs = [
            EventInterval::new(HandId::SurgeonRight, ToolState::NeedleHolder, 0, 4),
            EventInterval::new(HandId::SurgeonRight, ToolState::Empty, 4, 9),
            EventInterval::new(HandId::AssistantLeft, ToolState::Forceps, 2, 6),
        ];
        let tl = LabelTimeline::from_intervals(&ivs, 9).unwrap();
        let back = LabelTimeline::from_intervals(&tl.to_intervals(), 9).unwrap();
        assert_eq!(tl, back);
    }
}
