mod common;

use std::collections::BTreeMap;

use common::pixel_iou;
use maskfuse_core::synth::{scene_cut, static_object, translating_square, write_scene};
use maskfuse_core::tracking::{AutoResolver, FailResolver, ScriptedResolver, Tracker};
use maskfuse_core::{
    choose_mask, track, BinaryMask, Error, EventKind, ManifestDir, TrackingPolicy,
};
use proptest::prelude::*;

fn policies() -> [TrackingPolicy; 3] {
    [
        TrackingPolicy::PreviousFrame,
        TrackingPolicy::FirstFrame,
        TrackingPolicy::adaptive(0.5, None).unwrap(),
    ]
}

#[test]
fn translating_square_follows_truth() {
    let scene = translating_square(20);
    // period 1 re-anchors every frame, which is previous-frame tracking
    for policy in [TrackingPolicy::PreviousFrame, TrackingPolicy::adaptive(0.5, Some(1)).unwrap()] {
        let trace = track(&scene.frames, policy, scene.truth[0].unwrap(), &mut FailResolver).unwrap();
        for (t, truth) in scene.truth.iter().enumerate() {
            assert_eq!(trace.chosen(t), *truth, "{policy:?} frame {t}");
        }
        assert!(trace.events.is_empty());
    }
}

#[test]
fn translating_square_distractors_score_below_truth() {
    let scene = translating_square(20);
    for t in 1..20 {
        let prev = &scene.frames[t - 1][scene.truth[t - 1].unwrap()];
        let truth = scene.truth[t].unwrap();
        let gt_iou = pixel_iou(&scene.frames[t][truth], prev);
        assert!(gt_iou > 0.7);
        for (i, c) in scene.frames[t].iter().enumerate() {
            if i != truth {
                assert!(pixel_iou(c, prev) < gt_iou, "frame {t} candidate {i}");
            }
        }
    }
}

#[test]
fn trace_iou_matches_pixel_oracle() {
    let scene = translating_square(20);
    let trace = track(&scene.frames, TrackingPolicy::PreviousFrame, 0, &mut FailResolver).unwrap();
    for e in &trace.frames[1..] {
        let chosen = &scene.frames[e.frame][e.chosen_index.unwrap()];
        let reference = &scene.frames[e.reference_frame][trace.chosen(e.reference_frame).unwrap()];
        assert_eq!(e.iou, pixel_iou(chosen, reference));
    }
}

#[test]
fn static_object_traces_identical_across_policies() {
    let scene = static_object(12);
    let traces: Vec<_> = policies()
        .into_iter()
        .map(|p| track(&scene.frames, p, 0, &mut FailResolver).unwrap())
        .collect();
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[1], traces[2]);
    assert!(traces[0].frames.iter().all(|e| e.chosen_index == Some(0) && e.iou == 1.0));
}

#[test]
fn scene_cut_requires_reselection_at_cut() {
    let scene = scene_cut(10, 5);
    let tau = TrackingPolicy::adaptive(0.5, None).unwrap();
    let err = track(&scene.frames, tau, 0, &mut FailResolver).unwrap_err();
    assert!(matches!(err, Error::ReselectionRequired { frame: 5 }));

    let answers = BTreeMap::from([(5, 1)]);
    let trace = track(&scene.frames, tau, 0, &mut ScriptedResolver::new(answers)).unwrap();
    let reselected: Vec<_> = trace.events_of(EventKind::Reselected).map(|e| e.frame).collect();
    assert_eq!(reselected, [5]);
    assert_eq!(trace.events.len(), 1);
    for (t, truth) in scene.truth.iter().enumerate() {
        assert_eq!(trace.chosen(t), *truth);
    }
    assert_eq!(trace.frames[5].reference_frame, 5);
    assert_eq!(trace.frames[6].reference_frame, 5);
}

#[test]
fn scene_cut_auto_records_auto_pick() {
    let scene = scene_cut(8, 5);
    let policy = TrackingPolicy::adaptive(0.5, None).unwrap();
    let trace = track(&scene.frames, policy, 0, &mut AutoResolver).unwrap();
    let events: Vec<_> = trace.events.iter().map(|e| (e.frame, e.kind)).collect();
    assert_eq!(events, [(5, EventKind::AutoPicked)]);
}

#[test]
fn non_adaptive_policies_never_pause_on_cut() {
    let scene = scene_cut(8, 5);
    for p in [TrackingPolicy::PreviousFrame, TrackingPolicy::FirstFrame] {
        let trace = track(&scene.frames, p, 0, &mut FailResolver).unwrap();
        assert!(trace.events.is_empty());
        assert_eq!(trace.frames[5].iou, 0.0);
    }
}

#[test]
fn failed_step_leaves_tracker_unchanged() {
    let scene = scene_cut(8, 5);
    let policy = TrackingPolicy::adaptive(0.5, None).unwrap();
    let mut tracker = Tracker::start(policy, &scene.frames[0], 0).unwrap();
    for t in 1..5 {
        tracker.step(&scene.frames[t], &mut FailResolver).unwrap();
    }
    let before = tracker.trace().clone();
    assert!(tracker.step(&scene.frames[5], &mut FailResolver).is_err());
    let mut bad = |_: usize, _: &[BinaryMask], _: &BinaryMask| Some(maskfuse_core::Resolution::Selected(9));
    assert!(matches!(
        tracker.step(&scene.frames[5], &mut bad),
        Err(Error::InvalidSelection { frame: 5, index: 9, count: 3 })
    ));
    assert_eq!(tracker.trace(), &before);
    assert_eq!(tracker.next_frame(), 5);
}

#[test]
fn periodic_refresh_steps_by_period() {
    let scene = translating_square(20);
    for n in 1..7 {
        // tau 0 never trips, so only the period moves the reference
        let policy = TrackingPolicy::adaptive(0.0, Some(n)).unwrap();
        let trace = track(&scene.frames, policy, 0, &mut FailResolver).unwrap();
        assert!(trace.events.is_empty());
        for e in &trace.frames[1..] {
            assert_eq!(e.reference_frame % n, 0, "period {n}: {e:?}");
            let gap = e.frame - e.reference_frame;
            assert!((1..=n).contains(&gap), "period {n}: {e:?}");
        }
    }
}

#[test]
fn manifest_source_matches_memory_source() {
    let dir = tempfile::tempdir().unwrap();
    let scene = translating_square(8);
    let path = write_scene(dir.path(), &scene, None).unwrap();
    let fg = ManifestDir::open(path).unwrap();
    for p in policies() {
        let a = track(&scene.frames, p, 0, &mut AutoResolver).unwrap();
        let b = track(&fg, p, 0, &mut AutoResolver).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}

#[test]
fn candidates_at_other_resolution_are_resized() {
    let reference = BinaryMask::from_fn(8, 8, |x, _| x < 4).unwrap();
    let half = BinaryMask::from_fn(4, 4, |x, _| x < 2).unwrap();
    let other = BinaryMask::from_fn(4, 4, |_, y| y < 2).unwrap();
    assert_eq!(choose_mask(&[other, half], &reference).unwrap(), (1, 1.0));
}

fn arb_frame(w: u32, h: u32) -> impl Strategy<Value = Vec<BinaryMask>> {
    proptest::collection::vec(
        proptest::collection::vec(any::<bool>(), (w * h) as usize)
            .prop_map(move |bits| BinaryMask::from_bits(w, h, &bits).unwrap()),
        1..6,
    )
}

proptest! {
    #[test]
    fn argmax_is_first_maximum(cands in arb_frame(9, 7), reference in arb_frame(9, 7)) {
        let reference = &reference[0];
        let scores: Vec<f64> = cands.iter().map(|c| pixel_iou(c, reference)).collect();
        let best = scores.iter().cloned().fold(f64::MIN, f64::max);
        let first = scores.iter().position(|&s| s == best).unwrap();
        prop_assert_eq!(choose_mask(&cands, reference).unwrap(), (first, best));
    }

    #[test]
    fn first_frame_scores_against_frame_zero(frames in proptest::collection::vec(arb_frame(6, 6), 2..6)) {
        let trace = track(&frames, TrackingPolicy::FirstFrame, 0, &mut FailResolver).unwrap();
        for e in &trace.frames[1..] {
            prop_assert_eq!(e.reference_frame, 0);
            let chosen = &frames[e.frame][e.chosen_index.unwrap()];
            prop_assert_eq!(e.iou, pixel_iou(chosen, &frames[0][0]));
        }
    }

    #[test]
    fn tracking_is_deterministic(frames in proptest::collection::vec(arb_frame(6, 6), 2..6), tau in 0.0f64..1.0) {
        let policy = TrackingPolicy::adaptive(tau, Some(2)).unwrap();
        let a = track(&frames, policy, 0, &mut AutoResolver).unwrap();
        let b = track(&frames, policy, 0, &mut AutoResolver).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(a.len(), frames.len());
    }

    #[test]
    fn adaptive_events_only_below_tau(frames in proptest::collection::vec(arb_frame(6, 6), 2..6), tau in 0.0f64..1.0) {
        let policy = TrackingPolicy::adaptive(tau, None).unwrap();
        let trace = track(&frames, policy, 0, &mut AutoResolver).unwrap();
        // replay: each event frame must have had its best IoU below tau
        let mut reference = frames[0][0].clone();
        let mut events = trace.events.iter();
        for t in 1..frames.len() {
            let (best, score) = choose_mask(&frames[t], &reference).unwrap();
            if score < tau {
                let ev = events.next().unwrap();
                prop_assert_eq!(ev.frame, t);
                prop_assert_eq!(ev.kind, EventKind::AutoPicked);
                reference = frames[t][best].clone();
            }
        }
        prop_assert!(events.next().is_none());
    }
}
