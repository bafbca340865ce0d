use std::collections::{BTreeMap, BTreeSet};

use maskfuse_core::metrics::mean_iou_all;
use maskfuse_core::{mean_iou, panoptic_quality, BinaryMask, LabeledSegmentation};
use proptest::prelude::*;

fn seg(w: u32, h: u32, parts: &[(u32, &[(u32, u32)])]) -> LabeledSegmentation {
    let mut s = LabeledSegmentation::new(w, h).unwrap();
    for &(id, pixels) in parts {
        let m = BinaryMask::from_fn(w, h, |x, y| pixels.contains(&(x, y))).unwrap();
        s.insert(id, m).unwrap();
    }
    s
}

fn row(y: u32, xs: std::ops::Range<u32>) -> Vec<(u32, u32)> {
    xs.map(|x| (x, y)).collect()
}

#[test]
fn single_match_at_point_six() {
    // prediction covers 6 of the 10 truth pixels and nothing else
    let gt = seg(10, 2, &[(1, &row(0, 0..10))]);
    let pred = seg(10, 2, &[(7, &row(0, 0..6))]);
    let r = panoptic_quality(&pred, &gt).unwrap();
    assert!((r.pq - 0.6).abs() <= 1e-9);
    assert_eq!(r.rq, 1.0);
    assert_eq!((r.tp, r.fp, r.fn_), (1, 0, 0));
}

#[test]
fn extra_prediction_lowers_pq() {
    let gt = seg(10, 2, &[(1, &row(0, 0..10))]);
    let pred = seg(10, 2, &[(7, &row(0, 0..6)), (8, &row(1, 0..3))]);
    let r = panoptic_quality(&pred, &gt).unwrap();
    assert!((r.pq - 0.4).abs() <= 1e-9);
    assert!((r.rq - 2.0 / 3.0).abs() <= 1e-9);
    assert!((r.sq - 0.6).abs() <= 1e-9);
    assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
}

#[test]
fn exactly_half_is_not_a_match() {
    let gt = seg(4, 1, &[(1, &row(0, 0..4))]);
    let pred = seg(4, 1, &[(1, &row(0, 0..2))]);
    let r = panoptic_quality(&pred, &gt).unwrap();
    assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    assert_eq!(r.pq, 0.0);
}

#[test]
fn perfect_prediction_mean_iou_is_one() {
    let labels: Vec<u32> = (0..64).map(|i| (i * 7 % 5) as u32).collect();
    let gt = LabeledSegmentation::from_label_map(8, 8, &labels).unwrap();
    let m = mean_iou_all(&gt, &gt).unwrap();
    assert_eq!(m.miou, Some(1.0));
    assert!(m.per_class.values().all(|&v| v == 1.0));
    let r = panoptic_quality(&gt, &gt).unwrap();
    assert_eq!((r.pq, r.sq, r.rq), (1.0, 1.0, 1.0));
}

#[test]
fn classes_empty_on_both_sides_are_skipped() {
    let gt = seg(4, 1, &[(1, &row(0, 0..2))]);
    let pred = seg(4, 1, &[(1, &row(0, 0..1))]);
    let m = mean_iou(&pred, &gt, [1, 2, 3]).unwrap();
    assert_eq!(m.per_class.keys().copied().collect::<Vec<_>>(), [1]);
    assert_eq!(m.miou, Some(0.5));
    assert_eq!(mean_iou(&pred, &gt, [9]).unwrap().miou, None);
}

fn label_map(w: u32, h: u32, classes: u32) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0..classes, (w * h) as usize)
}

/// Brute force: every pair, IoU > 0.5 counts as a match.
fn oracle_pq(pred: &[u32], gt: &[u32]) -> (f64, usize, usize, usize) {
    let ids = |v: &[u32]| v.iter().copied().collect::<BTreeSet<u32>>();
    let mut tp = 0;
    let mut sum = 0.0;
    let mut matched_pred = BTreeSet::new();
    for g in ids(gt) {
        for p in ids(pred) {
            let inter = pred.iter().zip(gt).filter(|(a, b)| **a == p && **b == g).count();
            let union = pred.iter().zip(gt).filter(|(a, b)| **a == p || **b == g).count();
            let iou = inter as f64 / union as f64;
            if iou > 0.5 {
                tp += 1;
                sum += iou;
                matched_pred.insert(p);
            }
        }
    }
    let fp = ids(pred).len() - matched_pred.len();
    let fn_ = ids(gt).len() - tp;
    (sum, tp, fp, fn_)
}

proptest! {
    #[test]
    fn pq_is_sq_times_rq(pred in label_map(12, 9, 6), gt in label_map(12, 9, 6)) {
        let p = LabeledSegmentation::from_label_map(12, 9, &pred).unwrap();
        let g = LabeledSegmentation::from_label_map(12, 9, &gt).unwrap();
        let r = panoptic_quality(&p, &g).unwrap();
        prop_assert!((r.pq - r.sq * r.rq).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.pq));
    }

    #[test]
    fn pq_matches_oracle(pred in label_map(6, 6, 3), gt in label_map(6, 6, 3)) {
        let p = LabeledSegmentation::from_label_map(6, 6, &pred).unwrap();
        let g = LabeledSegmentation::from_label_map(6, 6, &gt).unwrap();
        let r = panoptic_quality(&p, &g).unwrap();
        let (sum, tp, fp, fn_) = oracle_pq(&pred, &gt);
        prop_assert_eq!((r.tp, r.fp, r.fn_), (tp, fp, fn_));
        prop_assert!((r.matched_iou_sum - sum).abs() <= 1e-12);
    }

    #[test]
    fn metrics_symmetric_in_inputs(pred in label_map(8, 8, 4), gt in label_map(8, 8, 4)) {
        let p = LabeledSegmentation::from_label_map(8, 8, &pred).unwrap();
        let g = LabeledSegmentation::from_label_map(8, 8, &gt).unwrap();
        let a = panoptic_quality(&p, &g).unwrap();
        let b = panoptic_quality(&g, &p).unwrap();
        prop_assert!((a.pq - b.pq).abs() <= 1e-12);
        prop_assert_eq!((a.fp, a.fn_), (b.fn_, b.fp));
        let ma = mean_iou_all(&p, &g).unwrap();
        let mb = mean_iou_all(&g, &p).unwrap();
        prop_assert_eq!(ma, mb);
    }

    #[test]
    fn mean_iou_matches_oracle(pred in label_map(8, 8, 4), gt in label_map(8, 8, 4)) {
        let p = LabeledSegmentation::from_label_map(8, 8, &pred).unwrap();
        let g = LabeledSegmentation::from_label_map(8, 8, &gt).unwrap();
        let mut expected = BTreeMap::new();
        for c in 0..4u32 {
            let inter = pred.iter().zip(&gt).filter(|(a, b)| **a == c && **b == c).count();
            let union = pred.iter().zip(&gt).filter(|(a, b)| **a == c || **b == c).count();
            if union > 0 {
                expected.insert(c, inter as f64 / union as f64);
            }
        }
        let m = mean_iou_all(&p, &g).unwrap();
        prop_assert_eq!(&m.per_class, &expected);
    }
}
