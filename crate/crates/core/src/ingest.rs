//! Parsing and serialization of the pipeline's on-disk formats, and
//! assembly of synchronized two-camera sessions.
//!
//! Three formats are handled here:
//! - detection streams: one JSON object per line with keys `frame`,
//!   `class`, `p`, `x`, `y`, `w`, `h` (unknown keys are ignored);
//! - event intervals: CSV with header `hand,state,start_s,stop_s`;
//! - session manifests: a JSON list of per-session file paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BBox, CameraId, DetectionClass, DetectionRecord, EventInterval, HandId, LabelTimeline,
    ToolState,
};

/// Nominal frame rate of all detection streams.
pub const DEFAULT_FPS: f64 = 30.0;

/// Guard added before flooring a seconds-to-frames conversion so that
/// frame-aligned times written with shortest-round-trip formatting map
/// back to the exact frame.
const FRAME_EPS: f64 = 1e-6;

/// Convert a time in seconds to a frame index by flooring.
pub fn seconds_to_frame(t: f64, fps: f64) -> usize {
    (t * fps + FRAME_EPS).floor().max(0.0) as usize
}

/// All detections of one camera over one session, sorted by frame and
/// within a frame by a fixed canonical key so that parsing is
/// insensitive to input line order.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionStream {
    camera: CameraId,
    fps: f64,
    records: Vec<DetectionRecord>,
    /// First record index of each frame, for slice lookups.
    frame_index: BTreeMap<usize, (usize, usize)>,
}

impl DetectionStream {
    /// Build a stream from unordered records, normalizing the order.
    pub fn new(camera: CameraId, mut records: Vec<DetectionRecord>) -> Self {
        for r in &mut records {
            r.camera = camera;
        }
        records.sort_by(|a, b| {
            a.frame
                .cmp(&b.frame)
                .then(a.cls.id().cmp(&b.cls.id()))
                .then(a.p.total_cmp(&b.p))
                .then(a.bbox.x.total_cmp(&b.bbox.x))
                .then(a.bbox.y.total_cmp(&b.bbox.y))
                .then(a.bbox.w.total_cmp(&b.bbox.w))
                .then(a.bbox.h.total_cmp(&b.bbox.h))
        });
        let mut frame_index = BTreeMap::new();
        let mut start = 0usize;
        for i in 1..=records.len() {
            if i == records.len() || records[i].frame != records[start].frame {
                frame_index.insert(records[start].frame, (start, i));
                start = i;
            }
        }
        DetectionStream {
            camera,
            fps: DEFAULT_FPS,
            records,
            frame_index,
        }
    }

    pub fn empty(camera: CameraId) -> Self {
        Self::new(camera, Vec::new())
    }

    pub fn camera(&self) -> CameraId {
        self.camera
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// One past the last frame that carries a detection; 0 when empty.
    pub fn n_frames(&self) -> usize {
        self.records.last().map_or(0, |r| r.frame + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DetectionRecord] {
        &self.records
    }

    /// All detections of one frame. Frames beyond the stream end yield
    /// an empty slice, which is how shorter streams pad out a session.
    pub fn frame_records(&self, frame: usize) -> &[DetectionRecord] {
        match self.frame_index.get(&frame) {
            Some(&(start, end)) => &self.records[start..end],
            None => &[],
        }
    }
}

/// Wire format of one detection stream line.
#[derive(Debug, Serialize, Deserialize)]
struct RawDetection {
    frame: usize,
    class: String,
    p: f64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Parse a JSONL detection stream for one camera.
///
/// Every non-blank line must decode to a record; malformed lines report
/// their 1-based line number, out-of-range values report the offending
/// field.
pub fn parse_detections(camera: CameraId, input: &str) -> Result<DetectionStream> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDetection = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&raw.p) || !raw.p.is_finite() {
            return Err(Error::field(
                "p",
                format!("{} outside [0, 1] at line {}", raw.p, idx + 1),
            ));
        }
        let bbox = BBox::new(raw.x, raw.y, raw.w, raw.h);
        bbox.validate()?;
        records.push(DetectionRecord {
            camera,
            frame: raw.frame,
            cls: DetectionClass::from_code(&raw.class)?,
            p: raw.p,
            bbox,
        });
    }
    Ok(DetectionStream::new(camera, records))
}

/// Serialize a stream back to its JSONL form, one record per line in
/// canonical order. `parse_detections` of the output reproduces the
/// stream exactly.
pub fn serialize_detections(stream: &DetectionStream) -> String {
    let mut out = String::new();
    for r in stream.records() {
        let raw = RawDetection {
            frame: r.frame,
            class: r.cls.code(),
            p: r.p,
            x: r.bbox.x,
            y: r.bbox.y,
            w: r.bbox.w,
            h: r.bbox.h,
        };
        out.push_str(&serde_json::to_string(&raw).expect("detection record serializes"));
        out.push('\n');
    }
    out
}

/// Parse an event-interval CSV (`hand,state,start_s,stop_s`) into
/// frame-indexed intervals, validating per-hand non-overlap.
pub fn parse_intervals(input: &str, fps: f64) -> Result<Vec<EventInterval>> {
    #[derive(Debug, Deserialize)]
    struct Row {
        hand: String,
        state: String,
        start_s: f64,
        stop_s: f64,
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input.as_bytes());
    let mut intervals = Vec::new();
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: idx + 2,
            msg: e.to_string(),
        })?;
        let hand = HandId::from_code(&row.hand)?;
        let state = ToolState::from_code(&row.state)?;
        if row.stop_s <= row.start_s {
            return Err(Error::field(
                "stop_s",
                format!(
                    "interval for {} at line {} is empty: stop {} <= start {}",
                    hand.code(),
                    idx + 2,
                    row.stop_s,
                    row.start_s
                ),
            ));
        }
        let start_frame = seconds_to_frame(row.start_s, fps);
        let end_frame = seconds_to_frame(row.stop_s, fps);
        if end_frame <= start_frame {
            return Err(Error::field(
                "stop_s",
                format!(
                    "interval for {} at line {} spans no whole frame at {fps} fps",
                    hand.code(),
                    idx + 2
                ),
            ));
        }
        intervals.push(EventInterval::new(hand, state, start_frame, end_frame));
    }
    validate_no_overlap(&intervals)?;
    Ok(intervals)
}

fn validate_no_overlap(intervals: &[EventInterval]) -> Result<()> {
    for hand in HandId::ALL {
        let mut hand_ivs: Vec<_> = intervals.iter().filter(|iv| iv.hand == hand).collect();
        hand_ivs.sort_by_key(|iv| iv.start_frame);
        for pair in hand_ivs.windows(2) {
            if pair[1].start_frame < pair[0].end_frame {
                return Err(Error::domain(format!(
                    "overlapping intervals for hand {}: [{}, {}) and [{}, {})",
                    hand.code(),
                    pair[0].start_frame,
                    pair[0].end_frame,
                    pair[1].start_frame,
                    pair[1].end_frame
                )));
            }
        }
    }
    Ok(())
}

/// Serialize intervals to the CSV wire format. Frame bounds are written
/// as seconds with shortest-round-trip formatting so parsing them back
/// at the same fps recovers the exact frames.
pub fn serialize_intervals(intervals: &[EventInterval], fps: f64) -> String {
    let mut out = String::from("hand,state,start_s,stop_s\n");
    for iv in intervals {
        out.push_str(&format!(
            "{},{},{},{}\n",
            iv.hand.code(),
            iv.state.code(),
            iv.start_frame as f64 / fps,
            iv.end_frame as f64 / fps
        ));
    }
    out
}

/// Both camera streams of one session plus, when annotations exist,
/// the derived ground-truth timeline.
#[derive(Clone, Debug)]
pub struct SessionBundle {
    pub session_id: String,
    pub n_frames: usize,
    pub top: DetectionStream,
    pub close: DetectionStream,
    pub truth: Option<LabelTimeline>,
}

/// Combine two streams and optional intervals into a session.
///
/// The session length is the maximum extent of either stream and the
/// intervals; a shorter stream simply has no detections in the tail
/// frames. A missing camera is represented by an empty stream.
pub fn bundle_session(
    session_id: impl Into<String>,
    top: DetectionStream,
    close: DetectionStream,
    intervals: Option<&[EventInterval]>,
) -> Result<SessionBundle> {
    let mut n_frames = top.n_frames().max(close.n_frames());
    if let Some(ivs) = intervals {
        for iv in ivs {
            n_frames = n_frames.max(iv.end_frame);
        }
    }
    let truth = match intervals {
        Some(ivs) => Some(LabelTimeline::from_intervals(ivs, n_frames)?),
        None => None,
    };
    Ok(SessionBundle {
        session_id: session_id.into(),
        n_frames,
        top,
        close,
        truth,
    })
}

impl SessionBundle {
    pub fn stream(&self, camera: CameraId) -> &DetectionStream {
        match camera {
            CameraId::TopView => &self.top,
            CameraId::CloseUp => &self.close,
        }
    }
}

/// One session's file locations inside a manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub top_path: String,
    pub close_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals_path: Option<String>,
}

/// A JSON manifest listing the sessions of a dataset. Relative paths
/// are resolved against the manifest file's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionManifest {
    pub sessions: Vec<SessionEntry>,
}

impl SessionManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path)?;
        let manifest: SessionManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok((manifest, base))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Load every session in manifest order.
    pub fn load_sessions(&self, base: &Path) -> Result<Vec<SessionBundle>> {
        self.sessions
            .iter()
            .map(|entry| load_session(entry, base))
            .collect()
    }
}

/// Read one session's files and bundle them.
pub fn load_session(entry: &SessionEntry, base: &Path) -> Result<SessionBundle> {
    let read = |rel: &str| -> Result<String> { Ok(fs::read_to_string(base.join(rel))?) };
    let top = parse_detections(CameraId::TopView, &read(&entry.top_path)?)?;
    let close = parse_detections(CameraId::CloseUp, &read(&entry.close_path)?)?;
    let intervals = match &entry.intervals_path {
        Some(p) => Some(parse_intervals(&read(p)?, DEFAULT_FPS)?),
        None => None,
    };
    bundle_session(&entry.session_id, top, close, intervals.as_deref())
}

/// Write per-hand labels as CSV: `frame,SR,SL,AR,AL` with one state
/// code per hand. Used for both ground-truth dumps and predictions.
pub fn serialize_labels(labels: &LabelTimeline) -> String {
    let mut out = String::from("frame,SR,SL,AR,AL\n");
    for f in 0..labels.n_frames() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f,
            labels.label(HandId::SurgeonRight, f).code(),
            labels.label(HandId::SurgeonLeft, f).code(),
            labels.label(HandId::AssistantRight, f).code(),
            labels.label(HandId::AssistantLeft, f).code(),
        ));
    }
    out
}

/// Parse the CSV form written by [`serialize_labels`].
pub fn parse_labels(input: &str) -> Result<LabelTimeline> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input.as_bytes());
    let mut labels: [Vec<ToolState>; 4] = Default::default();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: idx + 2,
            msg: e.to_string(),
        })?;
        if row.len() != 5 {
            return Err(Error::Parse {
                line: idx + 2,
                msg: format!("expected 5 columns, got {}", row.len()),
            });
        }
        for (hand, field) in HandId::ALL.iter().zip(row.iter().skip(1)) {
            labels[hand.index()].push(ToolState::from_code(field)?);
        }
    }
    LabelTimeline::from_labels(labels)
}
