//! Persisted run sessions.
//!
//! A session directory holds everything a run needs to stop at a pending
//! selection and continue later, possibly from another process:
//!
//! ```text
//! session.json         phase, config, fingerprint, recorded selections
//! trace.partial.json   trace up to a pending re-selection
//! trace.json           final trace (tracked mode)
//! report.json          run summary
//! outputs/             composited frames and output_manifest.json
//! ```
//!
//! Resuming replays tracking from frame 0 with the recorded answers, which
//! reproduces the exact same trace up to the frame that was waiting.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compositing::{composite_sequence, CompositeJob, CompositeMode, MismatchPolicy};
use crate::error::{Error, Result};
use crate::io::list_frames;
use crate::manifest::ManifestDir;
use crate::tracking::{EventKind, ScriptedResolver, Tracker, TrackingPolicy, TrackingTrace};

pub const SESSION_FILE_NAME: &str = "session.json";
pub const PARTIAL_TRACE_FILE_NAME: &str = "trace.partial.json";
pub const TRACE_FILE_NAME: &str = "trace.json";
pub const REPORT_FILE_NAME: &str = "report.json";
pub const OUTPUTS_DIR_NAME: &str = "outputs";
const SESSION_VERSION: u32 = 1;

/// What happens when the adaptive policy needs a new reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnReselect {
    /// Stop and leave the session waiting for `resume`.
    #[default]
    Fail,
    /// Take the best candidate anyway and record an auto pick.
    Auto,
    /// Stop and wait for the selection service.
    Serve,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelector {
    #[default]
    Tracked,
    LabelSet,
}

/// A user's answer to a selection prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Candidate(usize),
    Labels(BTreeSet<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub background: PathBuf,
    pub policy: TrackingPolicy,
    pub mode: ModeSelector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<usize>>,
    pub mismatch: MismatchPolicy,
    pub on_reselect: OnReselect,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        match (self.mode, &self.select, &self.labels) {
            (ModeSelector::Tracked, _, Some(_)) => Err(Error::Validation(
                "label list given for a tracked run; use either a candidate index or labels".into(),
            )),
            (ModeSelector::LabelSet, Some(_), _) => Err(Error::Validation(
                "candidate index given for a label-set run; use either a candidate index or labels".into(),
            )),
            (_, None, None) if self.on_reselect != OnReselect::Serve => Err(Error::Validation(
                "no initial selection; pass a candidate index or label list, or serve the session".into(),
            )),
            _ => Ok(()),
        }
    }

    fn initial_choice(&self) -> Option<Choice> {
        match self.mode {
            ModeSelector::Tracked => self.select.map(Choice::Candidate),
            ModeSelector::LabelSet => self.labels.clone().map(Choice::Labels),
        }
    }

    /// Hash over the run settings and input file contents. Paths and the
    /// initial selection are excluded so sessions can move and be answered
    /// interactively without changing it.
    pub fn fingerprint(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Settings<'a> {
            policy: &'a TrackingPolicy,
            mode: ModeSelector,
            mismatch: MismatchPolicy,
            on_reselect: OnReselect,
        }
        let mut hasher = Sha256::new();
        let settings = Settings {
            policy: &self.policy,
            mode: self.mode,
            mismatch: self.mismatch,
            on_reselect: self.on_reselect,
        };
        hasher.update(serde_json::to_vec(&settings).expect("settings serialize"));
        hash_file(&mut hasher, &self.manifest)?;
        for frame in list_frames(&self.background)? {
            hash_file(&mut hasher, &frame)?;
        }
        Ok(hex::encode(hasher.finalize()))
    }
}

fn hash_file(hasher: &mut Sha256, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(&bytes);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum Phase {
    AwaitingInitialSelection,
    Tracking,
    AwaitingReselection { frame: usize },
    Compositing,
    Done,
    Failed { reason: String },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitingInitialSelection => "AwaitingInitialSelection",
            Phase::Tracking => "Tracking",
            Phase::AwaitingReselection { .. } => "AwaitingReselection",
            Phase::Compositing => "Compositing",
            Phase::Done => "Done",
            Phase::Failed { .. } => "Failed",
        }
    }

    /// Frame waiting for a selection, if any.
    pub fn pending(&self) -> Option<usize> {
        match self {
            Phase::AwaitingInitialSelection => Some(0),
            Phase::AwaitingReselection { frame } => Some(*frame),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub version: u32,
    pub phase: Phase,
    pub fingerprint: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Choice>,
    /// Re-selection answers by frame.
    #[serde(default)]
    pub answers: BTreeMap<usize, usize>,
}

/// Summary written to `report.json`. Contains no paths or timestamps, so
/// identical runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub mode: ModeSelector,
    pub policy: TrackingPolicy,
    pub mismatch: MismatchPolicy,
    pub foreground_frames: usize,
    pub background_frames: usize,
    pub output_frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_candidate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<usize>>,
    pub reselected_frames: Vec<usize>,
    pub auto_picked_frames: Vec<usize>,
    pub no_candidate_frames: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_iou_to_reference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectOutcome {
    Accepted,
    /// The same selection was accepted before; nothing changed.
    AlreadyAccepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Done { output_frames: usize },
    AwaitingSelection { frame: usize },
}

#[derive(Debug, Clone)]
pub struct Session {
    dir: PathBuf,
    state: SessionState,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::MissingAsset(path.to_path_buf()));
    }
    fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

/// Removes what an earlier run left in a session directory.
fn clear_artifacts(dir: &Path) -> Result<()> {
    for name in [SESSION_FILE_NAME, PARTIAL_TRACE_FILE_NAME, TRACE_FILE_NAME, REPORT_FILE_NAME] {
        let path = dir.join(name);
        if path.exists() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    let outputs = dir.join(OUTPUTS_DIR_NAME);
    if outputs.exists() {
        fs::remove_dir_all(&outputs).map_err(|e| Error::io(&outputs, e))?;
    }
    Ok(())
}

impl Session {
    /// Validates inputs and writes a fresh session into `config.output`.
    pub fn create(mut config: RunConfig) -> Result<Self> {
        config.validate()?;
        config.manifest = absolute(&config.manifest)?;
        config.background = absolute(&config.background)?;
        let manifest = ManifestDir::open(&config.manifest)?;
        if list_frames(&config.background)?.is_empty() {
            return Err(Error::EmptyBackground);
        }
        let fingerprint = config.fingerprint()?;
        let dir = config.output.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        clear_artifacts(&dir)?;
        config.output = absolute(&dir)?;

        let mut session = Session {
            dir,
            state: SessionState {
                version: SESSION_VERSION,
                phase: Phase::AwaitingInitialSelection,
                fingerprint,
                initial: None,
                answers: BTreeMap::new(),
                config: config.clone(),
            },
        };
        if let Some(choice) = config.initial_choice() {
            session.check_choice(&manifest, 0, &choice)?;
            session.state.initial = Some(choice);
            session.state.phase = Phase::Tracking;
        }
        session.save()?;
        Ok(session)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(SESSION_FILE_NAME);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingAsset(path))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let state: SessionState = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if state.version != SESSION_VERSION {
            return Err(Error::Validation(format!(
                "unsupported session version {}",
                state.version
            )));
        }
        Ok(Session { dir, state })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn phase(&self) -> &Phase {
        &self.state.phase
    }

    pub fn outputs_dir(&self) -> PathBuf {
        self.dir.join(OUTPUTS_DIR_NAME)
    }

    pub fn save(&self) -> Result<()> {
        write_json(&self.dir.join(SESSION_FILE_NAME), &self.state)
    }

    pub fn foreground(&self) -> Result<ManifestDir> {
        ManifestDir::open(&self.state.config.manifest)
    }

    /// Current trace: final, partial, or empty when tracking has not run.
    pub fn current_trace(&self) -> Result<TrackingTrace> {
        for name in [TRACE_FILE_NAME, PARTIAL_TRACE_FILE_NAME] {
            let path = self.dir.join(name);
            if path.exists() {
                return TrackingTrace::read(path);
            }
        }
        Ok(TrackingTrace::default())
    }

    /// Refuses to continue when the inputs or settings changed since creation.
    pub fn verify_fingerprint(&self) -> Result<()> {
        let now = self.state.config.fingerprint()?;
        if now != self.state.fingerprint {
            return Err(Error::Validation(format!(
                "session fingerprint mismatch: stored {}, inputs now hash to {now}",
                self.state.fingerprint
            )));
        }
        Ok(())
    }

    fn check_choice(&self, manifest: &ManifestDir, frame: usize, choice: &Choice) -> Result<()> {
        let count = manifest.candidate_count(frame)?;
        match (self.state.config.mode, choice) {
            (ModeSelector::Tracked, Choice::Candidate(i)) => {
                if *i >= count {
                    return Err(Error::InvalidSelection { frame, index: *i, count });
                }
            }
            (ModeSelector::LabelSet, Choice::Labels(labels)) if frame == 0 => {
                if let Some(&i) = labels.iter().find(|&&i| i >= count) {
                    return Err(Error::InvalidSelection { frame, index: i, count });
                }
            }
            (ModeSelector::LabelSet, _) => {
                return Err(Error::Validation(
                    "label-set sessions take a label list at frame 0".into(),
                ))
            }
            (ModeSelector::Tracked, Choice::Labels(_)) => {
                return Err(Error::Validation(
                    "tracked sessions take a single candidate index".into(),
                ))
            }
        }
        Ok(())
    }

    fn already_accepted(&self, frame: usize, choice: &Choice) -> bool {
        match choice {
            _ if frame == 0 => self.state.initial.as_ref() == Some(choice),
            Choice::Candidate(i) => self.state.answers.get(&frame) == Some(i),
            Choice::Labels(_) => false,
        }
    }

    /// Records a selection for the pending frame. Repeating an accepted
    /// selection is a no-op; anything else outside the pending frame is a
    /// phase error. State is untouched on error.
    pub fn select(&mut self, frame: usize, choice: Choice) -> Result<SelectOutcome> {
        if self.already_accepted(frame, &choice) {
            return Ok(SelectOutcome::AlreadyAccepted);
        }
        match self.state.phase.pending() {
            Some(pending) if pending == frame => {}
            _ => {
                return Err(Error::WrongPhase(format!(
                    "session is {}; no selection pending for frame {frame}",
                    self.state.phase.name()
                )))
            }
        }
        let manifest = self.foreground()?;
        self.check_choice(&manifest, frame, &choice)?;
        let mut next = self.state.clone();
        match (&next.phase, choice) {
            (Phase::AwaitingInitialSelection, choice) => next.initial = Some(choice),
            (_, Choice::Candidate(i)) => {
                next.answers.insert(frame, i);
            }
            (_, Choice::Labels(_)) => unreachable!("checked by check_choice"),
        }
        next.phase = Phase::Tracking;
        write_json(&self.dir.join(SESSION_FILE_NAME), &next)?;
        self.state = next;
        Ok(SelectOutcome::Accepted)
    }

    fn set_phase(&mut self, phase: Phase) -> Result<()> {
        self.state.phase = phase;
        self.save()
    }

    /// Runs tracking and compositing until the session finishes or needs a
    /// selection. Failures other than a pending selection mark the session
    /// failed.
    pub fn advance(&mut self) -> Result<Progress> {
        match &self.state.phase {
            Phase::Tracking => {}
            Phase::AwaitingInitialSelection => return Ok(Progress::AwaitingSelection { frame: 0 }),
            Phase::AwaitingReselection { frame } => {
                return Ok(Progress::AwaitingSelection { frame: *frame })
            }
            other => {
                return Err(Error::WrongPhase(format!(
                    "cannot advance a session that is {}",
                    other.name()
                )))
            }
        }
        match self.run_to_completion() {
            Ok(progress) => Ok(progress),
            Err(e) => {
                let reason = e.to_string();
                let _ = self.set_phase(Phase::Failed { reason });
                Err(e)
            }
        }
    }

    fn run_to_completion(&mut self) -> Result<Progress> {
        self.verify_fingerprint()?;
        let config = self.state.config.clone();
        let foreground = ManifestDir::open(&config.manifest)?;
        let background = list_frames(&config.background)?;

        let (mode, trace) = match self.state.initial.clone() {
            Some(Choice::Candidate(initial)) => {
                match self.track(&foreground, config.policy, initial)? {
                    Ok(trace) => (CompositeMode::Tracked(trace.clone()), Some(trace)),
                    Err((frame, partial)) => {
                        partial.write(self.dir.join(PARTIAL_TRACE_FILE_NAME))?;
                        self.set_phase(Phase::AwaitingReselection { frame })?;
                        return Ok(Progress::AwaitingSelection { frame });
                    }
                }
            }
            Some(Choice::Labels(labels)) => (CompositeMode::LabelSet(labels), None),
            None => {
                return Err(Error::WrongPhase("no initial selection recorded".into()));
            }
        };

        self.set_phase(Phase::Compositing)?;
        let n_fg = foreground.frame_count();
        let n_bg = background.len();
        let job = CompositeJob {
            foreground,
            background,
            mode,
            mismatch: config.mismatch,
            output: self.outputs_dir(),
        };
        let output_frames = composite_sequence(&job)?;

        if let Some(trace) = &trace {
            trace.write(self.dir.join(TRACE_FILE_NAME))?;
        }
        let partial = self.dir.join(PARTIAL_TRACE_FILE_NAME);
        if partial.exists() {
            fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
        }
        let frames_of = |kind: EventKind| -> Vec<usize> {
            trace
                .iter()
                .flat_map(|t| t.events_of(kind).map(|e| e.frame))
                .collect()
        };
        let report = RunReport {
            fingerprint: self.state.fingerprint.clone(),
            mode: config.mode,
            policy: config.policy,
            mismatch: config.mismatch,
            foreground_frames: n_fg,
            background_frames: n_bg,
            output_frames,
            initial_candidate: match &self.state.initial {
                Some(Choice::Candidate(i)) => Some(*i),
                _ => None,
            },
            labels: match &self.state.initial {
                Some(Choice::Labels(l)) => Some(l.clone()),
                _ => None,
            },
            reselected_frames: frames_of(EventKind::Reselected),
            auto_picked_frames: frames_of(EventKind::AutoPicked),
            no_candidate_frames: frames_of(EventKind::NoCandidates),
            mean_iou_to_reference: trace.as_ref().and_then(|t| {
                let scored: Vec<f64> = t
                    .frames
                    .iter()
                    .filter(|e| e.chosen_index.is_some())
                    .map(|e| e.iou)
                    .collect();
                (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64)
            }),
        };
        write_json(&self.dir.join(REPORT_FILE_NAME), &report)?;
        self.set_phase(Phase::Done)?;
        Ok(Progress::Done { output_frames })
    }

    /// Replays tracking with the recorded answers. `Err((frame, partial))`
    /// when an unanswered re-selection is reached.
    #[allow(clippy::type_complexity)]
    fn track(
        &self,
        foreground: &ManifestDir,
        policy: TrackingPolicy,
        initial: usize,
    ) -> Result<std::result::Result<TrackingTrace, (usize, TrackingTrace)>> {
        let mut resolver = ScriptedResolver::new(self.state.answers.clone())
            .with_auto_fallback(self.state.config.on_reselect == OnReselect::Auto);
        let mut tracker = Tracker::start(policy, &foreground.candidate_masks(0)?, initial)?;
        for frame in 1..foreground.frame_count() {
            match tracker.step(&foreground.candidate_masks(frame)?, &mut resolver) {
                Ok(_) => {}
                Err(Error::ReselectionRequired { frame }) => {
                    return Ok(Err((frame, tracker.trace().clone())))
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Ok(tracker.into_trace()))
    }
}
