use std::collections::VecDeque;

use ordinalflow::bgsub::BackgroundSubtractor;
use ordinalflow::fusion::{
    adjust_and_classify, aggregate_segment, compute_alpha, run_pipeline, smooth_segments,
    CongestionLevel, PipelineConfig, WindowSummary,
};
use ordinalflow::imaging::{self, StructuringElement};
use ordinalflow::motion::MotionWindow;
use ordinalflow::synthgen::{generate, generate_corpus, Scene, SceneSpec, Vehicle};

fn lvl(v: u8) -> CongestionLevel {
    CongestionLevel::new(v).unwrap()
}

fn small_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.pipeline.segment_len = 20;
    c
}

#[test]
fn moving_block_is_tracked() {
    let spec = SceneSpec::new(lvl(1), 90, 21);
    let block = Vehicle {
        x: 0.0,
        y: 100,
        w: 20,
        h: 12,
        speed: 4.0,
        intensity: 30,
    };
    let scene = Scene::with_vehicles(spec, vec![block]).unwrap();
    let mut sub = BackgroundSubtractor::new(224, 224, Default::default()).unwrap();
    let se = StructuringElement::default();
    let (mut good, mut total) = (0, 0);
    let mut worst_fp = 0.0f64;
    for t in 0..90 {
        let raw = sub.apply(&scene.render(t)).unwrap();
        let mask = imaging::close(&imaging::open(&raw, &se), &se);
        if t < 30 {
            continue;
        }
        let truth = scene.truth_mask(t);
        total += 1;
        if truth.count() == 0 || mask.iou(&truth) >= 0.7 {
            good += 1;
        }
        let fp = mask
            .bits()
            .iter()
            .zip(truth.bits())
            .filter(|(m, t)| **m && !**t)
            .count();
        worst_fp = worst_fp.max(fp as f64 / truth.bits().iter().filter(|t| !**t).count() as f64);
    }
    assert!(good as f64 >= 0.9 * total as f64, "{good}/{total}");
    assert!(worst_fp <= 0.01, "false positive rate {worst_fp}");
}

#[test]
fn clean_level_two_clip() {
    let clip = generate(&SceneSpec::new(lvl(2), 100, 4)).unwrap();
    let out = run_pipeline(
        &clip.frames,
        &clip.scores,
        &clip.detections,
        &PipelineConfig::default(),
    )
    .unwrap();
    assert_eq!(out.segments.len(), 1);
    assert_eq!(out.segments[0].level, lvl(2));
    assert_eq!(out.segments[0].smoothed_level, lvl(2));
    assert_eq!(out.frames.len(), 100);
}

#[test]
fn pipeline_is_deterministic() {
    let clip = generate_corpus(&[lvl(1), lvl(4)], 1, 30, 8, 0.3).unwrap();
    let config = small_config();
    let a = run_pipeline(&clip.frames, &clip.scores, &clip.detections, &config).unwrap();
    let b = run_pipeline(&clip.frames, &clip.scores, &clip.detections, &config).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn pipeline_equals_staged_composition() {
    let clip = generate_corpus(&[lvl(2), lvl(5), lvl(3)], 1, 20, 13, 0.4).unwrap();
    let config = small_config();
    let out = run_pipeline(&clip.frames, &clip.scores, &clip.detections, &config).unwrap();

    let se = StructuringElement::ellipse(2, 2);
    let mut sub = BackgroundSubtractor::new(224, 224, config.bgsub.clone()).unwrap();
    let mut window = MotionWindow::new(config.motion.clone()).unwrap();
    let mut ring = VecDeque::new();
    let mut prev = None;
    let mut frames = Vec::new();
    for (t, frame) in clip.frames.iter().enumerate() {
        let gray = imaging::to_grayscale(&imaging::preprocess(frame, 224, 224).unwrap());
        let mask = imaging::close(&imaging::open(&sub.apply(&gray).unwrap(), &se), &se);
        let comps = imaging::connected_components(&mask, 25).unwrap();
        let feats = window.step(&mask, prev.as_ref(), &gray, &comps).unwrap();
        ring.push_back(feats.coverage);
        if ring.len() > 15 {
            ring.pop_front();
        }
        let summary = WindowSummary {
            mean_coverage: ring.iter().sum::<f64>() / ring.len() as f64,
            stability: feats.stability,
            contour_density: feats.contour_density,
        };
        let alpha = compute_alpha(&summary, &clip.detections[t], &config.fusion);
        let pred = adjust_and_classify(&clip.scores[t], &alpha).unwrap();
        assert_eq!(out.frames[t].prediction, pred);
        assert_eq!(out.frames[t].motion.coverage, feats.coverage);
        frames.push(pred);
        prev = Some(gray);
    }
    let levels: Vec<_> = frames
        .chunks(20)
        .map(|c| aggregate_segment(c, config.fusion.aggregator).unwrap().level)
        .collect();
    let smoothed = smooth_segments(&levels, 3).unwrap();
    assert_eq!(out.segments.len(), 3);
    for (i, seg) in out.segments.iter().enumerate() {
        assert_eq!(seg.segment_index, i);
        assert_eq!(seg.start_frame, 20 * i);
        assert_eq!(seg.level, levels[i]);
        assert_eq!(seg.smoothed_level, smoothed[i]);
    }
}

#[test]
fn trailing_partial_segment_is_kept() {
    let clip = generate(&SceneSpec::new(lvl(3), 45, 2)).unwrap();
    let out = run_pipeline(&clip.frames, &clip.scores, &clip.detections, &small_config()).unwrap();
    let counts: Vec<_> = out.segments.iter().map(|s| s.frame_count).collect();
    assert_eq!(counts, vec![20, 20, 5]);
}
