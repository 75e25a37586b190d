//! Seeded scenario simulator.
//!
//! Produces synthetic sessions (a ground-truth timeline per hand plus
//! noisy detection streams for both cameras) from a JSON-configurable
//! model: geometric tool-segment durations with a transition matrix,
//! a two-state visibility Markov chain per (hand, camera), and a noise
//! layer with misses, class confusion, probability draws, bounding-box
//! jitter and clutter duplicates. Everything is deterministic given the
//! config and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{bundle_session, DetectionStream, SessionBundle};
use crate::model::{
    BBox, CameraId, DetectionClass, DetectionRecord, HandId, LabelTimeline, ToolState, N_HANDS,
    N_STATES,
};

/// Per-state segment-duration and transition model. Arrays are indexed
/// in the fixed tool-state order (E, N, F, S, M).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentModel {
    /// Mean segment duration per state, in seconds.
    pub mean_duration_s: [f64; N_STATES],
    /// Unnormalized transition weights between states; the diagonal is
    /// ignored (a segment ends by moving to a different state).
    pub transition_weights: [[f64; N_STATES]; N_STATES],
}

/// Two-state per-frame visibility chain for one camera.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CameraVisibility {
    /// P(visible -> hidden) per frame.
    pub p_hide: f64,
    /// P(hidden -> visible) per frame.
    pub p_reveal: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VisibilityModel {
    pub top: CameraVisibility,
    pub close: CameraVisibility,
}

/// Detection noise layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    /// P(no detection emitted | hand visible).
    pub miss_rate: f64,
    /// Row-stochastic class-confusion matrix: row = true state, column
    /// = emitted state.
    pub confusion: [[f64; N_STATES]; N_STATES],
    /// Uniform range the detection probability is drawn from when the
    /// emitted class is correct.
    pub p_correct_range: [f64; 2],
    /// Uniform range used when the emitted class is a confusion.
    pub p_confused_range: [f64; 2],
    /// Standard deviation of Gaussian jitter added to box coordinates.
    pub bbox_jitter_std: f64,
    /// P(an extra duplicate detection of the hand's true class is
    /// emitted alongside the primary one, at strictly lower p).
    pub clutter_rate: f64,
}

/// Full generation recipe for one synthetic session.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_frames: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub seed: u64,
    pub segments: SegmentModel,
    pub visibility: VisibilityModel,
    pub noise: NoiseModel,
    /// P(a scheduled tool change is allowed to happen while the hand is
    /// hidden from both cameras). At 0 every change lands on a frame
    /// where the hand is visible somewhere.
    pub switch_while_hidden_rate: f64,
}

fn default_fps() -> f64 {
    30.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Named built-in configurations.
    ///
    /// - `fullvis-clean`: every hand visible in both cameras at every
    ///   frame, no misses, no confusion, p fixed at 1.0, no jitter.
    /// - `occluded-noisy`: per-camera hidden stints averaging 10 s, 20%
    ///   class confusion, misses, jitter and clutter.
    pub fn preset(name: &str) -> Result<ScenarioConfig> {
        let segments = SegmentModel {
            mean_duration_s: [6.0, 10.0, 7.0, 3.0, 5.0],
            transition_weights: [
                [0.0, 0.35, 0.30, 0.15, 0.20],
                [0.55, 0.0, 0.20, 0.10, 0.15],
                [0.50, 0.20, 0.0, 0.15, 0.15],
                [0.60, 0.15, 0.15, 0.0, 0.10],
                [0.55, 0.15, 0.15, 0.15, 0.0],
            ],
        };
        let identity = {
            let mut m = [[0.0; N_STATES]; N_STATES];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            m
        };
        match name {
            "fullvis-clean" => Ok(ScenarioConfig {
                n_frames: 1000,
                fps: 30.0,
                seed: 0,
                segments,
                visibility: VisibilityModel {
                    top: CameraVisibility {
                        p_hide: 0.0,
                        p_reveal: 1.0,
                    },
                    close: CameraVisibility {
                        p_hide: 0.0,
                        p_reveal: 1.0,
                    },
                },
                noise: NoiseModel {
                    miss_rate: 0.0,
                    confusion: identity,
                    p_correct_range: [1.0, 1.0],
                    p_confused_range: [0.5, 0.5],
                    bbox_jitter_std: 0.0,
                    clutter_rate: 0.0,
                },
                switch_while_hidden_rate: 0.0,
            }),
            "occluded-noisy" => {
                // 20% total confusion mass spread over the four wrong states.
                let mut confusion = [[0.05; N_STATES]; N_STATES];
                for (i, row) in confusion.iter_mut().enumerate() {
                    row[i] = 0.80;
                }
                Ok(ScenarioConfig {
                    n_frames: 1200,
                    fps: 30.0,
                    seed: 0,
                    segments,
                    visibility: VisibilityModel {
                        // Visible stints ~20 s, hidden stints ~10 s.
                        top: CameraVisibility {
                            p_hide: 1.0 / 600.0,
                            p_reveal: 1.0 / 300.0,
                        },
                        close: CameraVisibility {
                            p_hide: 1.0 / 450.0,
                            p_reveal: 1.0 / 300.0,
                        },
                    },
                    noise: NoiseModel {
                        miss_rate: 0.10,
                        confusion,
                        p_correct_range: [0.55, 1.0],
                        p_confused_range: [0.20, 0.75],
                        bbox_jitter_std: 0.02,
                        clutter_rate: 0.10,
                    },
                    switch_while_hidden_rate: 0.05,
                })
            }
            other => Err(Error::domain(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fps <= 0.0 {
            return Err(Error::field("fps", "must be positive"));
        }
        for (i, &m) in self.segments.mean_duration_s.iter().enumerate() {
            if m <= 0.0 || m.is_nan() {
                return Err(Error::field(
                    "mean_duration_s",
                    format!("state {} mean {m} must be > 0", ToolState::ALL[i].code()),
                ));
            }
        }
        for (name, p) in [
            ("visibility.top.p_hide", self.visibility.top.p_hide),
            ("visibility.top.p_reveal", self.visibility.top.p_reveal),
            ("visibility.close.p_hide", self.visibility.close.p_hide),
            ("visibility.close.p_reveal", self.visibility.close.p_reveal),
            ("noise.miss_rate", self.noise.miss_rate),
            ("noise.clutter_rate", self.noise.clutter_rate),
            ("switch_while_hidden_rate", self.switch_while_hidden_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::field(name, format!("{p} outside [0, 1]")));
            }
        }
        for (i, row) in self.noise.confusion.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::field(
                    "noise.confusion",
                    format!("row {i} must be non-negative and sum to 1 (sum {sum})"),
                ));
            }
        }
        for (name, range) in [
            ("noise.p_correct_range", self.noise.p_correct_range),
            ("noise.p_confused_range", self.noise.p_confused_range),
        ] {
            if !(0.0..=1.0).contains(&range[0]) || !(0.0..=1.0).contains(&range[1]) || range[0] > range[1]
            {
                return Err(Error::field(name, format!("{range:?} is not a sub-range of [0, 1]")));
            }
        }
        if self.noise.bbox_jitter_std < 0.0 {
            return Err(Error::field("noise.bbox_jitter_std", "must be >= 0"));
        }
        Ok(())
    }
}

/// Visibility of each hand in each camera at each frame.
#[derive(Clone, Debug)]
pub struct VisibilityGrid {
    n_frames: usize,
    grid: [[Vec<bool>; 2]; N_HANDS],
}

impl VisibilityGrid {
    pub fn visible(&self, hand: HandId, camera: CameraId, frame: usize) -> bool {
        self.grid[hand.index()][camera.index()][frame]
    }

    pub fn visible_anywhere(&self, hand: HandId, frame: usize) -> bool {
        self.visible(hand, CameraId::TopView, frame) || self.visible(hand, CameraId::CloseUp, frame)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }
}

/// A generated session: the ingest-facing bundle plus the visibility
/// grid that produced it, kept for diagnostics and tests.
#[derive(Clone, Debug)]
pub struct SyntheticSession {
    pub bundle: SessionBundle,
    pub visibility: VisibilityGrid,
}

// Fixed tags for deriving independent RNG substreams from one seed.
const TAG_VISIBILITY: u64 = 1;
const TAG_TIMELINE: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_SESSION: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. one per session of a batch, from a master
/// seed. Children are independent for distinct indices.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(TAG_SESSION ^ index))
}

fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &p in parts {
        s = splitmix64(s ^ splitmix64(p));
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// Geometric segment length in frames with the given mean, min 1.
fn sample_geometric(rng: &mut ChaCha8Rng, mean_frames: f64) -> usize {
    let q = (1.0 / mean_frames.max(1.0)).min(1.0);
    if q >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen();
    // Inversion of the geometric CDF; u in [0, 1).
    let len = ((1.0 - u).ln() / (1.0 - q).ln()).floor() as usize + 1;
    len.max(1)
}

fn sample_categorical(rng: &mut ChaCha8Rng, weights: &[f64; N_STATES]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut u: f64 = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return Some(i);
        }
    }
    Some(N_STATES - 1)
}

fn sample_range(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    range[0] + rng.gen::<f64>() * (range[1] - range[0])
}

/// Box-Muller standard normal draw.
fn sample_gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate the per-(hand, camera) visibility chains for a config.
pub fn visibility_grid(cfg: &ScenarioConfig) -> VisibilityGrid {
    let grid = std::array::from_fn(|hand_idx| {
        std::array::from_fn(|cam_idx| {
            let chain = match CameraId::ALL[cam_idx] {
                CameraId::TopView => cfg.visibility.top,
                CameraId::CloseUp => cfg.visibility.close,
            };
            let mut rng = substream(cfg.seed, &[TAG_VISIBILITY, hand_idx as u64, cam_idx as u64]);
            let stationary_visible = if chain.p_hide + chain.p_reveal == 0.0 {
                1.0
            } else {
                chain.p_reveal / (chain.p_hide + chain.p_reveal)
            };
            let mut visible = rng.gen::<f64>() < stationary_visible;
            let mut states = Vec::with_capacity(cfg.n_frames);
            for _ in 0..cfg.n_frames {
                states.push(visible);
                if visible {
                    if rng.gen::<f64>() < chain.p_hide {
                        visible = false;
                    }
                } else if rng.gen::<f64>() < chain.p_reveal {
                    visible = true;
                }
            }
            states
        })
    });
    VisibilityGrid {
        n_frames: cfg.n_frames,
        grid,
    }
}

fn timeline_with_grid(cfg: &ScenarioConfig, grid: &VisibilityGrid) -> LabelTimeline {
    let mut timeline = LabelTimeline::empty(cfg.n_frames);
    for hand in HandId::ALL {
        let mut rng = substream(cfg.seed, &[TAG_TIMELINE, hand.index() as u64]);
        let mut state = ToolState::Empty;
        let mut pos = 0usize;
        while pos < cfg.n_frames {
            let mean_frames = cfg.segments.mean_duration_s[state.index()] * cfg.fps;
            let dur = sample_geometric(&mut rng, mean_frames);
            let mut switch_at = pos + dur;
            if switch_at < cfg.n_frames && !grid.visible_anywhere(hand, switch_at) {
                // A change while hidden from both cameras is normally
                // deferred to the next frame the hand is seen again.
                let allow_hidden: f64 = rng.gen();
                if allow_hidden >= cfg.switch_while_hidden_rate {
                    switch_at = (switch_at..cfg.n_frames)
                        .find(|&f| grid.visible_anywhere(hand, f))
                        .unwrap_or(cfg.n_frames);
                }
            }
            let end = switch_at.min(cfg.n_frames);
            for f in pos..end {
                timeline.set_label(hand, f, state);
            }
            pos = end;
            if pos >= cfg.n_frames {
                break;
            }
            let mut weights = cfg.segments.transition_weights[state.index()];
            weights[state.index()] = 0.0;
            match sample_categorical(&mut rng, &weights) {
                Some(next) => state = ToolState::ALL[next],
                None => {
                    // No other state reachable: hold until the end.
                    for f in pos..cfg.n_frames {
                        timeline.set_label(hand, f, state);
                    }
                    pos = cfg.n_frames;
                }
            }
        }
    }
    timeline
}

/// Generate the ground-truth timeline for a config. Deterministic in
/// (config, seed) and consistent with [`render_detections`], which
/// reuses the same visibility chains.
pub fn generate_timeline(cfg: &ScenarioConfig) -> LabelTimeline {
    let grid = visibility_grid(cfg);
    timeline_with_grid(cfg, &grid)
}

/// Smooth center path detections for one (hand, camera) wobble around.
struct AnchorPath {
    cx: f64,
    cy: f64,
    amp_x: f64,
    amp_y: f64,
    period_x: f64,
    period_y: f64,
    phase_x: f64,
    phase_y: f64,
    bw: f64,
    bh: f64,
}

impl AnchorPath {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        AnchorPath {
            cx: 0.3 + 0.4 * rng.gen::<f64>(),
            cy: 0.3 + 0.4 * rng.gen::<f64>(),
            amp_x: 0.05 + 0.10 * rng.gen::<f64>(),
            amp_y: 0.05 + 0.10 * rng.gen::<f64>(),
            period_x: 300.0 + 600.0 * rng.gen::<f64>(),
            period_y: 300.0 + 600.0 * rng.gen::<f64>(),
            phase_x: std::f64::consts::TAU * rng.gen::<f64>(),
            phase_y: std::f64::consts::TAU * rng.gen::<f64>(),
            bw: 0.08 + 0.08 * rng.gen::<f64>(),
            bh: 0.08 + 0.08 * rng.gen::<f64>(),
        }
    }

    fn center(&self, frame: usize) -> (f64, f64) {
        let t = frame as f64;
        (
            self.cx + self.amp_x * (std::f64::consts::TAU * t / self.period_x + self.phase_x).sin(),
            self.cy + self.amp_y * (std::f64::consts::TAU * t / self.period_y + self.phase_y).sin(),
        )
    }
}

fn jittered_box(path: &AnchorPath, frame: usize, std: f64, rng: &mut ChaCha8Rng) -> BBox {
    let (ax, ay) = path.center(frame);
    let (dx, dy, dw, dh) = if std > 0.0 {
        (
            sample_gauss(rng) * std,
            sample_gauss(rng) * std,
            sample_gauss(rng) * std,
            sample_gauss(rng) * std,
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    BBox::new(
        (ax + dx).clamp(0.0, 1.0),
        (ay + dy).clamp(0.0, 1.0),
        (path.bw + dw).clamp(0.01, 1.0),
        (path.bh + dh).clamp(0.01, 1.0),
    )
}

/// Render noisy detection streams for a timeline.
///
/// For each (hand, camera, frame): nothing is emitted while hidden;
/// when visible, with probability `1 - miss_rate` a record is emitted
/// whose state is drawn from the confusion row of the true state, with
/// p drawn from the correct/confused range and the box jittered around
/// the hand's anchor path. Clutter adds a lower-p duplicate of the true
/// class. Deterministic given (config, seed).
pub fn render_detections(
    session_id: impl Into<String>,
    timeline: &LabelTimeline,
    cfg: &ScenarioConfig,
) -> SyntheticSession {
    let grid = visibility_grid(cfg);
    render_with_grid(session_id, timeline, cfg, grid)
}

fn render_with_grid(
    session_id: impl Into<String>,
    timeline: &LabelTimeline,
    cfg: &ScenarioConfig,
    grid: VisibilityGrid,
) -> SyntheticSession {
    let mut per_camera: [Vec<DetectionRecord>; 2] = Default::default();
    for hand in HandId::ALL {
        for camera in CameraId::ALL {
            let mut rng = substream(
                cfg.seed,
                &[TAG_NOISE, hand.index() as u64, camera.index() as u64],
            );
            let path = AnchorPath::draw(&mut rng);
            let records = &mut per_camera[camera.index()];
            for frame in 0..cfg.n_frames {
                if !grid.visible(hand, camera, frame) {
                    continue;
                }
                if cfg.noise.miss_rate > 0.0 && rng.gen::<f64>() < cfg.noise.miss_rate {
                    continue;
                }
                let truth = timeline.label(hand, frame);
                let emitted_idx =
                    sample_categorical(&mut rng, &cfg.noise.confusion[truth.index()])
                        .unwrap_or(truth.index());
                let emitted = ToolState::ALL[emitted_idx];
                let p = if emitted == truth {
                    sample_range(&mut rng, cfg.noise.p_correct_range)
                } else {
                    sample_range(&mut rng, cfg.noise.p_confused_range)
                };
                records.push(DetectionRecord {
                    camera,
                    frame,
                    cls: DetectionClass::new(hand, emitted),
                    p,
                    bbox: jittered_box(&path, frame, cfg.noise.bbox_jitter_std, &mut rng),
                });
                if cfg.noise.clutter_rate > 0.0 && rng.gen::<f64>() < cfg.noise.clutter_rate {
                    let p_clutter = p * (0.3 + 0.6 * rng.gen::<f64>());
                    records.push(DetectionRecord {
                        camera,
                        frame,
                        cls: DetectionClass::new(hand, truth),
                        p: p_clutter,
                        bbox: jittered_box(&path, frame, cfg.noise.bbox_jitter_std, &mut rng),
                    });
                }
            }
        }
    }
    let [top_records, close_records] = per_camera;
    let top = DetectionStream::new(CameraId::TopView, top_records);
    let close = DetectionStream::new(CameraId::CloseUp, close_records);
    let mut bundle = bundle_session(session_id, top, close, Some(&timeline.to_intervals()))
        .expect("generated intervals are valid");
    // The reconstructed truth equals the generated timeline; keep the
    // original to make the equivalence explicit.
    bundle.truth = Some(timeline.clone());
    bundle.n_frames = cfg.n_frames;
    SyntheticSession {
        bundle,
        visibility: grid,
    }
}

/// Generate one complete synthetic session.
pub fn generate_session(cfg: &ScenarioConfig, session_id: impl Into<String>) -> SyntheticSession {
    let grid = visibility_grid(cfg);
    let timeline = timeline_with_grid(cfg, &grid);
    render_with_grid(session_id, &timeline, cfg, grid)
}

/// Generate a batch of sessions with per-session seeds derived from the
/// config seed. Session ids are `s000`, `s001`, ...
pub fn generate_batch(cfg: &ScenarioConfig, n_sessions: usize) -> Vec<SyntheticSession> {
    (0..n_sessions)
        .map(|i| {
            let mut session_cfg = cfg.clone();
            session_cfg.seed = derive_seed(cfg.seed, i as u64);
            generate_session(&session_cfg, format!("s{i:03}"))
        })
        .collect()
}
