//! Property tests for the structural invariants of the label timeline,
//! the stream parser and the window extractor, plus the golden-file
//! round trip of the detection format.

use std::sync::OnceLock;

use proptest::prelude::*;

use multicam_core::features::{FeatureTable, HIGH_STEPS, LOW_STEPS, STEP_DIM};
use multicam_core::ingest::{parse_detections, serialize_detections};
use multicam_core::model::{EventInterval, HandId, LabelTimeline, ToolState};
use multicam_core::sim::{generate_batch, ScenarioConfig};

/// Build a valid non-overlapping interval list for one hand by walking
/// forward through (gap, length, state) triples.
fn walk_intervals(hand: HandId, steps: &[(u8, u8, u8)], n_frames: usize) -> Vec<EventInterval> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    for &(gap, len, state) in steps {
        let start = pos + gap as usize;
        let end = start + 1 + len as usize;
        if end > n_frames {
            break;
        }
        out.push(EventInterval::new(
            hand,
            ToolState::ALL[state as usize % 5],
            start,
            end,
        ));
        pos = end;
    }
    out
}

fn interval_steps() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    prop::collection::vec((0u8..20, 0u8..30, 0u8..5), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every (hand, frame) of a timeline is defined: exactly n_frames
    /// labels per hand regardless of the interval layout.
    #[test]
    fn timeline_is_total(
        steps_per_hand in prop::collection::vec(interval_steps(), 4),
        n_frames in 1usize..400,
    ) {
        let mut intervals = Vec::new();
        for (h, steps) in steps_per_hand.iter().enumerate() {
            intervals.extend(walk_intervals(HandId::ALL[h], steps, n_frames));
        }
        let tl = LabelTimeline::from_intervals(&intervals, n_frames).unwrap();
        for hand in HandId::ALL {
            prop_assert_eq!(tl.hand_labels(hand).len(), n_frames);
        }
    }

    /// Concatenating two interval lists, the second shifted in time and
    /// anchored at its first frame for every hand, yields the
    /// concatenation of the two timelines.
    #[test]
    fn timeline_concatenation_is_compositional(
        steps_a in prop::collection::vec(interval_steps(), 4),
        steps_b in prop::collection::vec(interval_steps(), 4),
        n_a in 30usize..200,
        n_b in 30usize..200,
    ) {
        let mut list_a = Vec::new();
        for (h, steps) in steps_a.iter().enumerate() {
            list_a.extend(walk_intervals(HandId::ALL[h], steps, n_a));
        }
        // The premise: every hand's second list starts with an interval
        // at frame 0, so nothing carries across the boundary.
        let mut list_b = Vec::new();
        for (h, steps) in steps_b.iter().enumerate() {
            let hand = HandId::ALL[h];
            let mut ivs = walk_intervals(hand, steps, n_b);
            match ivs.first_mut() {
                Some(first) => first.start_frame = 0,
                None => ivs.push(EventInterval::new(hand, ToolState::Empty, 0, 1)),
            }
            list_b.extend(ivs);
        }

        let tl_a = LabelTimeline::from_intervals(&list_a, n_a).unwrap();
        let tl_b = LabelTimeline::from_intervals(&list_b, n_b).unwrap();

        let mut combined = list_a.clone();
        combined.extend(list_b.iter().map(|iv| EventInterval::new(
            iv.hand,
            iv.state,
            iv.start_frame + n_a,
            iv.end_frame + n_a,
        )));
        let tl_all = LabelTimeline::from_intervals(&combined, n_a + n_b).unwrap();

        for hand in HandId::ALL {
            for f in 0..n_a {
                prop_assert_eq!(tl_all.label(hand, f), tl_a.label(hand, f));
            }
            for f in 0..n_b {
                prop_assert_eq!(tl_all.label(hand, f + n_a), tl_b.label(hand, f));
            }
        }
    }

    /// Parsing is insensitive to input line order.
    #[test]
    fn detection_parsing_is_order_insensitive(
        shuffle_seed in 0u64..1000,
        n_lines in 1usize..60,
    ) {
        use multicam_core::model::CameraId;
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed);
        let codes = ["SRE", "SRN", "SLF", "ARM", "ALS", "ALM"];
        let mut lines: Vec<String> = (0..n_lines)
            .map(|i| {
                use rand::Rng;
                format!(
                    "{{\"frame\":{},\"class\":\"{}\",\"p\":{},\"x\":0.5,\"y\":0.5,\"w\":0.1,\"h\":0.2}}",
                    i % 7,
                    codes[i % codes.len()],
                    (rng.gen_range(1..=10) as f64) / 10.0,
                )
            })
            .collect();
        let original = parse_detections(CameraId::TopView, &lines.join("\n")).unwrap();
        lines.shuffle(&mut rng);
        let shuffled = parse_detections(CameraId::TopView, &lines.join("\n")).unwrap();
        prop_assert_eq!(&original, &shuffled);
        prop_assert_eq!(serialize_detections(&original), serialize_detections(&shuffled));
    }
}

fn shared_table() -> &'static FeatureTable {
    static TABLE: OnceLock<FeatureTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut cfg = ScenarioConfig::preset("occluded-noisy").unwrap();
        cfg.n_frames = 600;
        cfg.seed = 3;
        FeatureTable::build(&generate_batch(&cfg, 1).remove(0).bundle)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Window shapes hold for arbitrary t, and both windows share the
    /// final timestep.
    #[test]
    fn window_shapes_hold_for_random_t(t in 0usize..600, hand_idx in 0usize..4) {
        let table = shared_table();
        let pair = table.window_pair(HandId::ALL[hand_idx], t).unwrap();
        prop_assert_eq!(pair.high.steps(), HIGH_STEPS);
        prop_assert_eq!(pair.low.steps(), LOW_STEPS);
        prop_assert_eq!(pair.high.step(0).len(), STEP_DIM);
        prop_assert_eq!(
            pair.high.step(HIGH_STEPS - 1),
            pair.low.step(LOW_STEPS - 1)
        );
    }
}

#[test]
fn golden_detection_file_round_trips() {
    use multicam_core::model::CameraId;
    let golden = include_str!("data/golden_top.jsonl");
    let stream = parse_detections(CameraId::TopView, golden).unwrap();
    assert_eq!(serialize_detections(&stream), golden);
}
