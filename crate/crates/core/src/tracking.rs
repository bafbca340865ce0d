//! Mask propagation across frames.
//!
//! Frame 0 takes the user's pick. Every later frame takes the candidate with
//! the highest IoU against a reference mask. The policy decides where that
//! reference comes from:
//!
//! * [`TrackingPolicy::PreviousFrame`]: the mask chosen at the last frame
//!   that had a choice.
//! * [`TrackingPolicy::FirstFrame`]: the frame 0 pick, always.
//! * [`TrackingPolicy::Adaptive`]: the current reference, replaced by a
//!   [`ReselectionResolver`] answer whenever the best IoU drops below `tau`
//!   and, if `period` is set, re-anchored on the chosen mask once it is
//!   `period` frames old.
//!
//! `reference_frame` in the trace is the frame whose chosen mask supplied
//! the reference content. Under `PreviousFrame` a choice that is bitwise
//! equal to the current reference leaves the reference untouched, so a
//! static object keeps provenance 0 just like `FirstFrame`.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ManifestDir;
use crate::mask::BinaryMask;

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackingPolicy {
    PreviousFrame,
    FirstFrame,
    Adaptive {
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<usize>,
    },
}

impl TrackingPolicy {
    pub fn adaptive(tau: f64, period: Option<usize>) -> Result<Self> {
        let policy = TrackingPolicy::Adaptive { tau, period };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if let TrackingPolicy::Adaptive { tau, period } = *self {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::Validation(format!("tau must lie in [0, 1], got {tau}")));
            }
            if period == Some(0) {
                return Err(Error::Validation("period must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Reselected,
    AutoPicked,
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub frame: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub frame: usize,
    pub chosen_index: Option<usize>,
    /// IoU of the chosen mask against the reference it was scored with;
    /// 0 when nothing was chosen.
    pub iou: f64,
    pub reference_frame: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingTrace {
    pub frames: Vec<TraceEntry>,
    pub events: Vec<TraceEvent>,
}

impl TrackingTrace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn chosen(&self, frame: usize) -> Option<usize> {
        self.frames.get(frame).and_then(|e| e.chosen_index)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("trace serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Per-frame candidate masks, loaded on demand.
pub trait CandidateSource {
    fn frame_count(&self) -> usize;
    fn candidates(&self, frame: usize) -> Result<Vec<BinaryMask>>;

    fn candidate(&self, frame: usize, index: usize) -> Result<BinaryMask> {
        let mut all = self.candidates(frame)?;
        let count = all.len();
        if index >= count {
            return Err(Error::InvalidSelection { frame, index, count });
        }
        Ok(all.swap_remove(index))
    }
}

impl CandidateSource for [Vec<BinaryMask>] {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn candidates(&self, frame: usize) -> Result<Vec<BinaryMask>> {
        self.get(frame)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("frame {frame} out of range")))
    }
}

impl CandidateSource for Vec<Vec<BinaryMask>> {
    fn frame_count(&self) -> usize {
        self.as_slice().frame_count()
    }

    fn candidates(&self, frame: usize) -> Result<Vec<BinaryMask>> {
        self.as_slice().candidates(frame)
    }
}

impl CandidateSource for ManifestDir {
    fn frame_count(&self) -> usize {
        ManifestDir::frame_count(self)
    }

    fn candidates(&self, frame: usize) -> Result<Vec<BinaryMask>> {
        self.candidate_masks(frame)
    }

    fn candidate(&self, frame: usize, index: usize) -> Result<BinaryMask> {
        self.candidate_mask(frame, index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// A human picked this candidate.
    Selected(usize),
    /// Picked without a human, e.g. the argmax in batch runs.
    Auto(usize),
}

impl Resolution {
    pub fn index(self) -> usize {
        match self {
            Resolution::Selected(i) | Resolution::Auto(i) => i,
        }
    }

    fn event(self) -> EventKind {
        match self {
            Resolution::Selected(_) => EventKind::Reselected,
            Resolution::Auto(_) => EventKind::AutoPicked,
        }
    }
}

/// Answers re-selection prompts under the adaptive policy. `None` means no
/// answer is available yet and the run must stop at this frame.
pub trait ReselectionResolver {
    fn resolve(
        &mut self,
        frame: usize,
        candidates: &[BinaryMask],
        reference: &BinaryMask,
    ) -> Option<Resolution>;
}

impl<F> ReselectionResolver for F
where
    F: FnMut(usize, &[BinaryMask], &BinaryMask) -> Option<Resolution>,
{
    fn resolve(
        &mut self,
        frame: usize,
        candidates: &[BinaryMask],
        reference: &BinaryMask,
    ) -> Option<Resolution> {
        self(frame, candidates, reference)
    }
}

/// Never answers.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailResolver;

impl ReselectionResolver for FailResolver {
    fn resolve(&mut self, _: usize, _: &[BinaryMask], _: &BinaryMask) -> Option<Resolution> {
        None
    }
}

/// Takes the argmax regardless of how low it is.
#[derive(Debug, Default, Clone, Copy)]
pub struct AutoResolver;

impl ReselectionResolver for AutoResolver {
    fn resolve(
        &mut self,
        _: usize,
        candidates: &[BinaryMask],
        reference: &BinaryMask,
    ) -> Option<Resolution> {
        choose_mask(candidates, reference)
            .ok()
            .map(|(i, _)| Resolution::Auto(i))
    }
}

/// Replays recorded answers by frame, optionally falling back to [`AutoResolver`].
#[derive(Debug, Default, Clone)]
pub struct ScriptedResolver {
    answers: BTreeMap<usize, usize>,
    auto_fallback: bool,
}

impl ScriptedResolver {
    pub fn new(answers: BTreeMap<usize, usize>) -> Self {
        Self {
            answers,
            auto_fallback: false,
        }
    }

    pub fn with_auto_fallback(mut self, on: bool) -> Self {
        self.auto_fallback = on;
        self
    }
}

impl ReselectionResolver for ScriptedResolver {
    fn resolve(
        &mut self,
        frame: usize,
        candidates: &[BinaryMask],
        reference: &BinaryMask,
    ) -> Option<Resolution> {
        match self.answers.get(&frame) {
            Some(&i) => Some(Resolution::Selected(i)),
            None if self.auto_fallback => AutoResolver.resolve(frame, candidates, reference),
            None => None,
        }
    }
}

fn resized<'a>(mask: &'a BinaryMask, dims: (u32, u32)) -> Cow<'a, BinaryMask> {
    if mask.dims() == dims {
        Cow::Borrowed(mask)
    } else {
        Cow::Owned(
            mask.resize_nearest(dims.0, dims.1)
                .expect("reference dims are nonzero"),
        )
    }
}

/// Index and IoU of the candidate closest to `reference`; ties go to the
/// lowest index. Candidates of other sizes are resized to the reference first.
pub fn choose_mask(candidates: &[BinaryMask], reference: &BinaryMask) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let score = resized(c, reference.dims()).iou(reference)?;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.ok_or(Error::NoCandidates { frame: 0 })
}

/// True when no candidate reaches `tau` (strictly below), or there are none.
pub fn needs_reselection(candidates: &[BinaryMask], reference: &BinaryMask, tau: f64) -> bool {
    match choose_mask(candidates, reference) {
        Ok((_, best)) => best < tau,
        Err(_) => true,
    }
}

/// Stepwise tracker. [`track`] drives it over a whole source; the session
/// engine drives it directly so it can stop at a pending re-selection.
#[derive(Debug, Clone)]
pub struct Tracker {
    policy: TrackingPolicy,
    reference: BinaryMask,
    reference_frame: usize,
    trace: TrackingTrace,
}

impl Tracker {
    pub fn start(
        policy: TrackingPolicy,
        first_frame: &[BinaryMask],
        initial_index: usize,
    ) -> Result<Self> {
        policy.validate()?;
        let reference = first_frame
            .get(initial_index)
            .ok_or(Error::InvalidSelection {
                frame: 0,
                index: initial_index,
                count: first_frame.len(),
            })?
            .clone();
        Ok(Self {
            policy,
            reference,
            reference_frame: 0,
            trace: TrackingTrace {
                frames: vec![TraceEntry {
                    frame: 0,
                    chosen_index: Some(initial_index),
                    iou: 1.0,
                    reference_frame: 0,
                }],
                events: Vec::new(),
            },
        })
    }

    /// The frame the next [`Tracker::step`] call will process.
    pub fn next_frame(&self) -> usize {
        self.trace.frames.len()
    }

    pub fn reference(&self) -> (&BinaryMask, usize) {
        (&self.reference, self.reference_frame)
    }

    pub fn trace(&self) -> &TrackingTrace {
        &self.trace
    }

    pub fn into_trace(self) -> TrackingTrace {
        self.trace
    }

    /// Processes the next frame. On [`Error::ReselectionRequired`] or a bad
    /// resolver answer the tracker is left unchanged.
    pub fn step(
        &mut self,
        candidates: &[BinaryMask],
        resolver: &mut dyn ReselectionResolver,
    ) -> Result<&TraceEntry> {
        let frame = self.next_frame();
        if candidates.is_empty() {
            self.trace.events.push(TraceEvent {
                frame,
                kind: EventKind::NoCandidates,
            });
            self.trace.frames.push(TraceEntry {
                frame,
                chosen_index: None,
                iou: 0.0,
                reference_frame: self.reference_frame,
            });
            return Ok(self.trace.frames.last().expect("just pushed"));
        }

        let (best, best_iou) = choose_mask(candidates, &self.reference)?;
        let mut entry = TraceEntry {
            frame,
            chosen_index: Some(best),
            iou: best_iou,
            reference_frame: self.reference_frame,
        };

        match self.policy {
            TrackingPolicy::PreviousFrame => {
                let chosen = resized(&candidates[best], self.reference.dims());
                if *chosen != self.reference {
                    self.reference = chosen.into_owned();
                    self.reference_frame = frame;
                }
            }
            TrackingPolicy::FirstFrame => {}
            TrackingPolicy::Adaptive { tau, period } => {
                if best_iou < tau {
                    let answer = resolver
                        .resolve(frame, candidates, &self.reference)
                        .ok_or(Error::ReselectionRequired { frame })?;
                    let index = answer.index();
                    if index >= candidates.len() {
                        return Err(Error::InvalidSelection {
                            frame,
                            index,
                            count: candidates.len(),
                        });
                    }
                    self.reference = resized(&candidates[index], self.reference.dims()).into_owned();
                    self.reference_frame = frame;
                    entry = TraceEntry {
                        frame,
                        chosen_index: Some(index),
                        iou: 1.0,
                        reference_frame: frame,
                    };
                    self.trace.events.push(TraceEvent {
                        frame,
                        kind: answer.event(),
                    });
                } else if period.is_some_and(|n| frame - self.reference_frame >= n) {
                    self.reference = resized(&candidates[best], self.reference.dims()).into_owned();
                    self.reference_frame = frame;
                }
            }
        }

        self.trace.frames.push(entry);
        Ok(self.trace.frames.last().expect("just pushed"))
    }
}

/// Runs the tracker over every frame of `source`.
pub fn track<S: CandidateSource + ?Sized>(
    source: &S,
    policy: TrackingPolicy,
    initial_index: usize,
    resolver: &mut dyn ReselectionResolver,
) -> Result<TrackingTrace> {
    if source.frame_count() == 0 {
        return Err(Error::Validation("cannot track an empty frame sequence".into()));
    }
    let mut tracker = Tracker::start(policy, &source.candidates(0)?, initial_index)?;
    for frame in 1..source.frame_count() {
        tracker.step(&source.candidates(frame)?, resolver)?;
    }
    Ok(tracker.into_trace())
}
