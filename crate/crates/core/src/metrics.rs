//! Segmentation quality: class-wise mean IoU and panoptic PQ/SQ/RQ.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::tracking::{CandidateSource, TrackingTrace};

/// Segment or class id to mask, all masks sharing one size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSegmentation {
    width: u32,
    height: u32,
    segments: BTreeMap<u32, BinaryMask>,
}

impl LabeledSegmentation {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        Ok(Self {
            width,
            height,
            segments: BTreeMap::new(),
        })
    }

    /// One segment per distinct value of a row-major label map.
    pub fn from_label_map(width: u32, height: u32, labels: &[u32]) -> Result<Self> {
        let mut seg = Self::new(width, height)?;
        if labels.len() != width as usize * height as usize {
            return Err(Error::Format(format!(
                "label map has {} entries, expected {}",
                labels.len(),
                width as usize * height as usize
            )));
        }
        let ids: BTreeSet<u32> = labels.iter().copied().collect();
        for id in ids {
            let bits: Vec<bool> = labels.iter().map(|&l| l == id).collect();
            seg.segments.insert(id, BinaryMask::from_bits(width, height, &bits)?);
        }
        Ok(seg)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn insert(&mut self, id: u32, mask: BinaryMask) -> Result<()> {
        if mask.dims() != self.dims() {
            return Err(Error::dims(self.dims(), mask.dims()));
        }
        self.segments.insert(id, mask);
        Ok(())
    }

    pub fn remove(&mut self, id: u32) -> Option<BinaryMask> {
        self.segments.remove(&id)
    }

    pub fn get(&self, id: u32) -> Option<&BinaryMask> {
        self.segments.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.segments.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &BinaryMask)> {
        self.segments.iter().map(|(&id, m)| (id, m))
    }

    /// Errors naming the first overlapping pair of segments.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BinaryMask::new(self.width, self.height)?;
        let mut owners: Vec<(u32, &BinaryMask)> = Vec::new();
        for (&id, m) in &self.segments {
            if seen.intersection_area(m)? > 0 {
                let other = owners
                    .iter()
                    .find(|(_, o)| o.intersection_area(m).unwrap_or(0) > 0)
                    .map(|(oid, _)| *oid)
                    .unwrap_or(id);
                return Err(Error::Validation(format!(
                    "segments {other} and {id} overlap"
                )));
            }
            seen = seen.union(m)?;
            owners.push((id, m));
        }
        Ok(())
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIou {
    /// `None` when no class could be evaluated.
    pub miou: Option<f64>,
    pub per_class: BTreeMap<u32, f64>,
}

/// Mean of per-class IoU. A class missing from one side counts as an empty
/// mask there; classes empty on both sides are left out of the mean.
pub fn mean_iou(
    pred: &LabeledSegmentation,
    gt: &LabeledSegmentation,
    classes: impl IntoIterator<Item = u32>,
) -> Result<MeanIou> {
    pred.check_same_dims(gt)?;
    let empty = BinaryMask::new(pred.width, pred.height)?;
    let mut per_class = BTreeMap::new();
    for class in classes {
        let p = pred.get(class).unwrap_or(&empty);
        let g = gt.get(class).unwrap_or(&empty);
        if p.area() == 0 && g.area() == 0 {
            continue;
        }
        per_class.insert(class, p.iou(g)?);
    }
    let miou = if per_class.is_empty() {
        None
    } else {
        Some(per_class.values().sum::<f64>() / per_class.len() as f64)
    };
    Ok(MeanIou { miou, per_class })
}

/// Mean IoU over every class id present in either input.
pub fn mean_iou_all(pred: &LabeledSegmentation, gt: &LabeledSegmentation) -> Result<MeanIou> {
    let classes: BTreeSet<u32> = pred.ids().chain(gt.ids()).collect();
    mean_iou(pred, gt, classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanopticReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matched_iou_sum: f64,
}

/// Panoptic quality with strict IoU > 0.5 matching. Within disjoint inputs a
/// segment can have at most one partner above 0.5, so the matching is
/// unique. Empty segments are ignored.
pub fn panoptic_quality(
    pred: &LabeledSegmentation,
    gt: &LabeledSegmentation,
) -> Result<PanopticReport> {
    pred.check_same_dims(gt)?;
    pred.check_disjoint()?;
    gt.check_disjoint()?;

    let preds: Vec<&BinaryMask> = pred.segments.values().filter(|m| m.area() > 0).collect();
    let gts: Vec<&BinaryMask> = gt.segments.values().filter(|m| m.area() > 0).collect();

    let mut pred_matched = vec![false; preds.len()];
    let mut tp = 0usize;
    let mut matched_iou_sum = 0.0;
    for g in &gts {
        for (pi, p) in preds.iter().enumerate() {
            if pred_matched[pi] {
                continue;
            }
            let iou = p.iou(g)?;
            if iou > 0.5 {
                pred_matched[pi] = true;
                tp += 1;
                matched_iou_sum += iou;
                break;
            }
        }
    }
    let fp = preds.len() - tp;
    let fn_ = gts.len() - tp;
    let denom = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
    let (pq, sq, rq) = if denom == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        let sq = if tp == 0 { 0.0 } else { matched_iou_sum / tp as f64 };
        (matched_iou_sum / denom, sq, tp as f64 / denom)
    };
    Ok(PanopticReport {
        pq,
        sq,
        rq,
        tp,
        fp,
        fn_,
        matched_iou_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceScore {
    /// `None` for frames skipped because both sides are empty of content.
    pub per_frame: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

/// Scores a trace's chosen masks against per-frame ground truth. A frame
/// without a choice scores 0 against nonempty truth and is skipped when the
/// truth is empty.
pub fn trace_vs_ground_truth<S: CandidateSource + ?Sized>(
    trace: &TrackingTrace,
    source: &S,
    gt: &[BinaryMask],
) -> Result<TraceScore> {
    if trace.len() != gt.len() || source.frame_count() != gt.len() {
        return Err(Error::Validation(format!(
            "length mismatch: trace {} frames, manifest {}, ground truth {}",
            trace.len(),
            source.frame_count(),
            gt.len()
        )));
    }
    let mut per_frame = Vec::with_capacity(gt.len());
    for (t, truth) in gt.iter().enumerate() {
        let score = match trace.chosen(t) {
            Some(i) => Some(source.candidate(t, i)?.iou(truth)?),
            None if truth.area() == 0 => None,
            None => Some(0.0),
        };
        per_frame.push(score);
    }
    let scored: Vec<f64> = per_frame.iter().flatten().copied().collect();
    let mean = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(TraceScore { per_frame, mean })
}
