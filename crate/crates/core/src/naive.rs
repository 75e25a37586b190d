//! Rule-based fusion baseline.
//!
//! Three rules decide each hand's state at each frame: when both
//! cameras see the hand, the higher-probability detection wins; when
//! one camera sees it, that detection wins; when neither does, the
//! previously classified state is kept.

use serde::{Deserialize, Serialize};

use crate::ingest::SessionBundle;
use crate::model::{CameraId, DetectionRecord, HandId, LabelTimeline, ToolState, N_HANDS};

/// Which cameras a classification run consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CameraSelection {
    Top,
    Close,
    Both,
}

impl CameraSelection {
    pub fn includes(self, camera: CameraId) -> bool {
        match self {
            CameraSelection::Top => camera == CameraId::TopView,
            CameraSelection::Close => camera == CameraId::CloseUp,
            CameraSelection::Both => true,
        }
    }
}

/// Last classified state per hand; the memory component that keeps the
/// output defined while a hand is out of every selected view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HandMemory {
    states: [ToolState; N_HANDS],
}

impl HandMemory {
    /// All hands start as `Empty` before any detection is seen.
    pub fn new() -> Self {
        HandMemory {
            states: [ToolState::Empty; N_HANDS],
        }
    }

    pub fn state(&self, hand: HandId) -> ToolState {
        self.states[hand.index()]
    }
}

impl Default for HandMemory {
    fn default() -> Self {
        Self::new()
    }
}

/// Best detection per hand in one camera frame: the state and
/// probability of the max-p detection, if any.
pub type BestPerHand = [Option<(ToolState, f64)>; N_HANDS];

/// Reduce one camera's frame detections to at most one (state, p) per
/// hand, keeping the highest probability. Equal probabilities resolve
/// to the earlier state in the fixed E, N, F, S, M order.
pub fn best_per_hand(frame_records: &[DetectionRecord]) -> BestPerHand {
    let mut best: BestPerHand = [None; N_HANDS];
    for r in frame_records {
        let slot = &mut best[r.cls.hand.index()];
        let replace = match *slot {
            None => true,
            Some((state, p)) => {
                r.p > p || (r.p == p && r.cls.state.index() < state.index())
            }
        };
        if replace {
            *slot = Some((r.cls.state, r.p));
        }
    }
    best
}

/// Apply the fusion rules for one frame and update the memory.
/// Probability ties across cameras resolve to the top view.
pub fn naive_step(
    top: &BestPerHand,
    close: &BestPerHand,
    mem: &mut HandMemory,
) -> [ToolState; N_HANDS] {
    let mut out = [ToolState::Empty; N_HANDS];
    for hand in HandId::ALL {
        let i = hand.index();
        let fused = match (top[i], close[i]) {
            (Some((ts, tp)), Some((cs, cp))) => {
                if cp > tp {
                    cs
                } else {
                    ts
                }
            }
            (Some((ts, _)), None) => ts,
            (None, Some((cs, _))) => cs,
            (None, None) => mem.states[i],
        };
        mem.states[i] = fused;
        out[i] = fused;
    }
    out
}

/// Classify a whole session with the rule-based baseline over the
/// selected camera subset.
pub fn classify_session_naive(bundle: &SessionBundle, cameras: CameraSelection) -> LabelTimeline {
    let mut labels: [Vec<ToolState>; N_HANDS] =
        std::array::from_fn(|_| Vec::with_capacity(bundle.n_frames));
    let mut mem = HandMemory::new();
    let none: BestPerHand = [None; N_HANDS];
    for frame in 0..bundle.n_frames {
        let top = if cameras.includes(CameraId::TopView) {
            best_per_hand(bundle.top.frame_records(frame))
        } else {
            none
        };
        let close = if cameras.includes(CameraId::CloseUp) {
            best_per_hand(bundle.close.frame_records(frame))
        } else {
            none
        };
        let states = naive_step(&top, &close, &mut mem);
        for hand in HandId::ALL {
            labels[hand.index()].push(states[hand.index()]);
        }
    }
    LabelTimeline::from_labels(labels).expect("per-hand vectors share length")
}
