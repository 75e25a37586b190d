//! Detection-vector construction and dual-timescale window extraction.
//!
//! Each (hand, camera, frame) becomes a 25-element vector: five
//! `[p, x, y, w, h]` slots in the fixed state order, filled from the
//! max-p detection of that state and zero otherwise. A classifier input
//! timestep concatenates the top-view and close-up vectors (50 values).
//! Two windows feed the classifier at frame `t`: 30 consecutive frames
//! `t-29..=t`, and 120 frames sampled every 10th frame ending at `t`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ingest::SessionBundle;
use crate::model::{DetectionRecord, HandId, N_HANDS, N_STATES};

/// Values per state slot: probability plus four box coordinates.
pub const SLOT_DIM: usize = 5;
/// Per-hand, per-camera vector length.
pub const FEATURE_DIM: usize = N_STATES * SLOT_DIM;
/// Classifier input width per timestep: both cameras, top view first.
pub const STEP_DIM: usize = 2 * FEATURE_DIM;
/// Timesteps in the high-frequency window (1 s at 30 fps).
pub const HIGH_STEPS: usize = 30;
/// Timesteps in the low-frequency window (40 s sampled at 3 fps).
pub const LOW_STEPS: usize = 120;
/// Frame stride realizing 3 fps on the 30 fps grid.
pub const LOW_STRIDE: usize = 10;

/// All-zero timestep used for frames before the session start.
pub static ZERO_STEP: [f64; STEP_DIM] = [0.0; STEP_DIM];

/// Borrowed timestep rows of one window.
pub type WindowViews<'a> = Vec<&'a [f64]>;

/// 25-element detection vector for one hand in one camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandFeature(pub [f64; FEATURE_DIM]);

/// Build the detection vector for `hand` from one camera's detections
/// of one frame. Each state slot takes `[p, x, y, w, h]` from the
/// highest-probability detection of that (hand, state), zeros when the
/// state was not detected.
pub fn hand_feature(frame_records: &[DetectionRecord], hand: HandId) -> HandFeature {
    let mut out = [0.0; FEATURE_DIM];
    let mut best_p = [f64::NEG_INFINITY; N_STATES];
    for r in frame_records {
        if r.cls.hand != hand {
            continue;
        }
        let s = r.cls.state.index();
        if r.p > best_p[s] {
            best_p[s] = r.p;
            let base = s * SLOT_DIM;
            out[base] = r.p;
            out[base + 1] = r.bbox.x;
            out[base + 2] = r.bbox.y;
            out[base + 3] = r.bbox.w;
            out[base + 4] = r.bbox.h;
        }
    }
    HandFeature(out)
}

/// A dense sequence of feature timesteps, row-major `steps x STEP_DIM`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSeq {
    steps: usize,
    data: Vec<f64>,
}

impl WindowSeq {
    /// Assemble a window from dense rows, each `STEP_DIM` wide.
    pub fn from_steps(rows: &[Vec<f64>]) -> Result<WindowSeq> {
        if rows.iter().any(|r| r.len() != STEP_DIM) {
            return Err(Error::domain(format!(
                "window rows must be {STEP_DIM} wide"
            )));
        }
        Ok(WindowSeq {
            steps: rows.len(),
            data: rows.concat(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.data[i * STEP_DIM..(i + 1) * STEP_DIM]
    }

    pub fn step_views(&self) -> Vec<&[f64]> {
        (0..self.steps).map(|i| self.step(i)).collect()
    }
}

/// The two input sequences feeding the classifier for one hand at one
/// frame: `high` covers frames `t-29..=t`, `low` covers every 10th
/// frame ending at `t`. Frames before the session start are zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindowPair {
    pub high: WindowSeq,
    pub low: WindowSeq,
}

/// Precomputed per-frame timesteps for all hands of a session.
///
/// Row layout: hand-major, then frame; each row is one `STEP_DIM`
/// timestep (top-view vector followed by close-up vector).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    n_frames: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    pub fn build(bundle: &SessionBundle) -> FeatureTable {
        let n_frames = bundle.n_frames;
        let mut data = vec![0.0; N_HANDS * n_frames * STEP_DIM];
        for hand in HandId::ALL {
            for frame in 0..n_frames {
                let row_start = (hand.index() * n_frames + frame) * STEP_DIM;
                let top = hand_feature(bundle.top.frame_records(frame), hand);
                let close = hand_feature(bundle.close.frame_records(frame), hand);
                data[row_start..row_start + FEATURE_DIM].copy_from_slice(&top.0);
                data[row_start + FEATURE_DIM..row_start + STEP_DIM].copy_from_slice(&close.0);
            }
        }
        FeatureTable { n_frames, data }
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// One timestep; `frame` must be within the session.
    pub fn row(&self, hand: HandId, frame: usize) -> &[f64] {
        let start = (hand.index() * self.n_frames + frame) * STEP_DIM;
        &self.data[start..start + STEP_DIM]
    }

    fn row_or_zero(&self, hand: HandId, frame: isize) -> &[f64] {
        if frame < 0 || frame as usize >= self.n_frames {
            &ZERO_STEP
        } else {
            self.row(hand, frame as usize)
        }
    }

    /// High-window timesteps (frames `t-29..=t`) as borrowed rows; the
    /// cheap path used by training and prediction. `t` must be in range.
    pub fn high_window_views(&self, hand: HandId, t: usize) -> WindowViews<'_> {
        (0..HIGH_STEPS)
            .map(|i| self.row_or_zero(hand, t as isize - (HIGH_STEPS - 1 - i) as isize))
            .collect()
    }

    /// Low-window timesteps (every 10th frame ending at `t`).
    pub fn low_window_views(&self, hand: HandId, t: usize) -> WindowViews<'_> {
        (0..LOW_STEPS)
            .map(|i| {
                self.row_or_zero(hand, t as isize - ((LOW_STEPS - 1 - i) * LOW_STRIDE) as isize)
            })
            .collect()
    }

    /// Borrowed views of both windows at frame `t`.
    pub fn window_views(&self, hand: HandId, t: usize) -> Result<(WindowViews<'_>, WindowViews<'_>)> {
        if t >= self.n_frames {
            return Err(Error::domain(format!(
                "frame {t} out of range 0..{}",
                self.n_frames
            )));
        }
        Ok((
            self.high_window_views(hand, t),
            self.low_window_views(hand, t),
        ))
    }

    /// Owned window pair at frame `t`.
    pub fn window_pair(&self, hand: HandId, t: usize) -> Result<FeatureWindowPair> {
        let (high, low) = self.window_views(hand, t)?;
        let pack = |views: Vec<&[f64]>| WindowSeq {
            steps: views.len(),
            data: views.concat(),
        };
        Ok(FeatureWindowPair {
            high: pack(high),
            low: pack(low),
        })
    }

    /// Serialize to the binary cache format: little-endian header
    /// (`magic, version, n_frames, n_hands, step_dim`) followed by the
    /// row-major payload as 32-bit floats.
    pub fn write_cache(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_frames as u64).to_le_bytes())?;
        w.write_all(&(N_HANDS as u32).to_le_bytes())?;
        w.write_all(&(STEP_DIM as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Read a cache written by [`Self::write_cache`]. Values come back
    /// at f32 precision.
    pub fn read_cache(mut r: impl Read) -> Result<FeatureTable> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::domain("not a feature cache file (bad magic)"));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != CACHE_VERSION {
            return Err(Error::domain(format!(
                "unsupported feature cache version {version}"
            )));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let n_frames = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u32buf)?;
        let n_hands = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let step_dim = u32::from_le_bytes(u32buf) as usize;
        if n_hands != N_HANDS || step_dim != STEP_DIM {
            return Err(Error::domain(format!(
                "feature cache dims {n_hands}x{step_dim} do not match {N_HANDS}x{STEP_DIM}"
            )));
        }
        let n_values = N_HANDS * n_frames * STEP_DIM;
        let mut payload = vec![0u8; n_values * 4];
        r.read_exact(&mut payload)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(FeatureTable { n_frames, data })
    }
}

const CACHE_MAGIC: &[u8; 4] = b"MCFC";
const CACHE_VERSION: u32 = 1;

/// Convenience wrapper building the table for a single query. Callers
/// with many queries should build a [`FeatureTable`] once.
pub fn window_pair(bundle: &SessionBundle, hand: HandId, t: usize) -> Result<FeatureWindowPair> {
    FeatureTable::build(bundle).window_pair(hand, t)
}
