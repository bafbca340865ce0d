//! Command line definition.

use std::collections::BTreeSet;
use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maskfuse_core::session::ModeSelector;
use maskfuse_core::tracking::DEFAULT_TAU;
use maskfuse_core::{Error, MismatchPolicy, OnReselect, Result, RunConfig, TrackingPolicy};

#[derive(Debug, Parser)]
#[command(name = "maskfuse", version, about = "Track a selected mask through a clip and composite it onto another")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Prev,
    First,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MismatchArg {
    Truncate,
    Loop,
    Hold,
}

impl From<MismatchArg> for MismatchPolicy {
    fn from(m: MismatchArg) -> Self {
        match m {
            MismatchArg::Truncate => MismatchPolicy::Truncate,
            MismatchArg::Loop => MismatchPolicy::LoopBackground,
            MismatchArg::Hold => MismatchPolicy::HoldLastBackground,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnReselectArg {
    Fail,
    Auto,
    Serve,
}

impl From<OnReselectArg> for OnReselect {
    fn from(o: OnReselectArg) -> Self {
        match o {
            OnReselectArg::Fail => OnReselect::Fail,
            OnReselectArg::Auto => OnReselect::Auto,
            OnReselectArg::Serve => OnReselect::Serve,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Tracked,
    LabelSet,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Foreground candidate manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Background frame directory.
    #[arg(long = "bg", global = true)]
    pub background: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Prev)]
    pub policy: PolicyArg,
    /// Re-selection threshold for the adaptive policy [default: 0.5].
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Refresh the adaptive reference every N frames.
    #[arg(long, global = true)]
    pub every: Option<usize>,
    /// Candidate index tracked from frame 0.
    #[arg(long, global = true)]
    pub select: Option<usize>,
    /// Frame 0 candidate indices to keep, separated by spaces or commas.
    #[arg(long, global = true)]
    pub labels: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = MismatchArg::Loop)]
    pub mismatch: MismatchArg,
    #[arg(long = "on-reselect", global = true, value_enum, default_value_t = OnReselectArg::Fail)]
    pub on_reselect: OnReselectArg,
    /// Output directory or file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ServeOpts {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 0)]
    pub port: u16,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track, composite and write a session directory.
    Run {
        /// Selection mode when serving without an initial selection.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        serve: ServeOpts,
    },
    /// Answer a pending selection and continue a session.
    Resume {
        session: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        choice: Option<usize>,
    },
    /// Track only, writing the trace JSON.
    Track,
    /// Composite from a trace file or a label list.
    Composite {
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Segmentation metrics between label maps, or a trace against ground truth masks.
    Metrics {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Label values left out of every metric.
        #[arg(long, value_delimiter = ',')]
        ignore: Vec<u32>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Directory of per-frame ground truth masks.
        #[arg(long)]
        gt_dir: Option<PathBuf>,
    },
    /// Print the candidate labels of a frame.
    ListLabels {
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
    /// Write the complement of a mask image.
    InvertMask { input: PathBuf, output: PathBuf },
    /// Serve a session directory for interactive selection.
    Serve {
        session: PathBuf,
        #[command(flatten)]
        serve: ServeOpts,
    },
}

pub fn parse_labels(text: &str) -> Result<BTreeSet<usize>> {
    let labels: BTreeSet<usize> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Validation(format!("label index {s:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if labels.is_empty() {
        return Err(Error::Validation("empty label list".into()));
    }
    Ok(labels)
}

impl GlobalOpts {
    pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
        value
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("{flag} is required")))
    }

    pub fn policy(&self) -> Result<TrackingPolicy> {
        match self.policy {
            PolicyArg::Adaptive => {
                TrackingPolicy::adaptive(self.tau.unwrap_or(DEFAULT_TAU), self.every)
            }
            _ if self.tau.is_some() || self.every.is_some() => Err(Error::Validation(
                "--tau and --every apply only to --policy adaptive".into(),
            )),
            PolicyArg::Prev => Ok(TrackingPolicy::PreviousFrame),
            PolicyArg::First => Ok(TrackingPolicy::FirstFrame),
        }
    }

    pub fn labels(&self) -> Result<Option<BTreeSet<usize>>> {
        self.labels.as_deref().map(parse_labels).transpose()
    }

    pub fn run_config(&self, mode: Option<ModeArg>) -> Result<RunConfig> {
        let labels = self.labels()?;
        let mode = match mode {
            Some(ModeArg::Tracked) => ModeSelector::Tracked,
            Some(ModeArg::LabelSet) => ModeSelector::LabelSet,
            None if labels.is_some() && self.select.is_none() => ModeSelector::LabelSet,
            None => ModeSelector::Tracked,
        };
        Ok(RunConfig {
            manifest: Self::require(&self.manifest, "--manifest")?.clone(),
            background: Self::require(&self.background, "--bg")?.clone(),
            policy: self.policy()?,
            mode,
            select: self.select,
            labels,
            mismatch: self.mismatch.into(),
            on_reselect: self.on_reselect.into(),
            output: Self::require(&self.out, "--out")?.clone(),
        })
    }
}
