//! One function per subcommand.

use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;

use maskfuse_core::io::list_frames;
use maskfuse_core::metrics::mean_iou;
use maskfuse_core::preview::label_table;
use maskfuse_core::session::REPORT_FILE_NAME;
use maskfuse_core::tracking::{AutoResolver, FailResolver, ReselectionResolver};
use maskfuse_core::{
    composite_sequence, io, load_mask_image, panoptic_quality, track, trace_vs_ground_truth,
    write_mask_image, Choice, CompositeJob, CompositeMode, Error, ManifestDir, OnReselect, Phase,
    Progress, Result, RunConfig, Session, TrackingTrace,
};
use serde_json::{json, Value};

use crate::args::{Cli, Command, GlobalOpts, ServeOpts};
use crate::{service, CliError, Output};

pub fn dispatch(cli: Cli) -> std::result::Result<Output, CliError> {
    let opts = &cli.opts;
    match cli.command {
        Command::Run { mode, serve } => cmd_run(opts.run_config(mode)?, &serve),
        Command::Resume { session, frame, choice } => {
            let choice = match (choice, opts.labels()?) {
                (Some(i), None) => Choice::Candidate(i),
                (None, Some(labels)) => Choice::Labels(labels),
                _ => {
                    return Err(Error::Validation(
                        "resume takes either --choice or --labels".into(),
                    )
                    .into())
                }
            };
            cmd_resume(&session, frame, choice)
        }
        Command::Track => Ok(cmd_track(opts)?),
        Command::Composite { trace } => Ok(cmd_composite(opts, trace.as_deref())?),
        Command::Metrics { pred, gt, ignore, trace, gt_dir } => Ok(cmd_metrics(
            opts,
            pred.as_deref(),
            gt.as_deref(),
            &ignore,
            trace.as_deref(),
            gt_dir.as_deref(),
        )?),
        Command::ListLabels { frame } => {
            let manifest = GlobalOpts::require(&opts.manifest, "--manifest")?;
            Ok(cmd_list_labels(manifest, frame)?)
        }
        Command::InvertMask { input, output } => Ok(cmd_invert_mask(&input, &output)?),
        Command::Serve { session, serve } => cmd_serve(&session, &serve),
    }
}

fn with_session(dir: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |error| CliError {
        error,
        session: Some(dir.to_path_buf()),
    }
}

fn report_output(session: &Session) -> std::result::Result<Output, CliError> {
    let path = session.dir().join(REPORT_FILE_NAME);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Io { path: path.clone(), source: e })
        .map_err(with_session(session.dir()))?;
    let report: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
    let frames = report["output_frames"].as_u64().unwrap_or(0);
    Ok(Output::new(
        format!("wrote {frames} frames to {}", session.outputs_dir().display()),
        report,
    ))
}

/// Runs the session to completion or the first unanswered selection, which
/// becomes a re-selection error carrying the session directory.
fn drive(session: &mut Session) -> std::result::Result<Output, CliError> {
    let dir = session.dir().to_path_buf();
    match session.advance().map_err(with_session(&dir))? {
        Progress::Done { .. } => report_output(session),
        Progress::AwaitingSelection { frame } => Err(CliError {
            error: Error::ReselectionRequired { frame },
            session: Some(dir),
        }),
    }
}

pub fn cmd_run(config: RunConfig, serve: &ServeOpts) -> std::result::Result<Output, CliError> {
    let on_reselect = config.on_reselect;
    let mut session = Session::create(config)?;
    if on_reselect == OnReselect::Serve {
        return cmd_serve(session.dir(), serve);
    }
    drive(&mut session)
}

pub fn cmd_resume(dir: &Path, frame: usize, choice: Choice) -> std::result::Result<Output, CliError> {
    let mut session = Session::open(dir).map_err(with_session(dir))?;
    if session.phase().pending() != Some(frame) {
        return Err(CliError {
            error: Error::WrongPhase(format!(
                "session is {}; no selection pending for frame {frame}",
                session.phase().name()
            )),
            session: Some(dir.to_path_buf()),
        });
    }
    session.select(frame, choice).map_err(with_session(dir))?;
    drive(&mut session)
}

pub fn cmd_serve(dir: &Path, serve: &ServeOpts) -> std::result::Result<Output, CliError> {
    let session = Session::open(dir).map_err(with_session(dir))?;
    let addr = SocketAddr::new(serve.host, serve.port);
    let session = service::serve_blocking(session, addr).map_err(with_session(dir))?;
    match session.phase() {
        Phase::Done => report_output(&session),
        Phase::Failed { reason } => Err(CliError {
            error: Error::Validation(format!("session failed: {reason}")),
            session: Some(dir.to_path_buf()),
        }),
        other => Ok(Output::new(
            format!("stopped while {}", other.name()),
            json!({ "phase": other.name(), "pending": other.pending() }),
        )),
    }
}

pub fn cmd_track(opts: &GlobalOpts) -> Result<Output> {
    let fg = ManifestDir::open(GlobalOpts::require(&opts.manifest, "--manifest")?)?;
    let initial = opts
        .select
        .ok_or_else(|| Error::Validation("--select is required".into()))?;
    let mut resolver: Box<dyn ReselectionResolver> = match opts.on_reselect.into() {
        OnReselect::Fail => Box::new(FailResolver),
        OnReselect::Auto => Box::new(AutoResolver),
        OnReselect::Serve => {
            return Err(Error::Validation(
                "track cannot serve; use run --on-reselect serve".into(),
            ))
        }
    };
    let trace = track(&fg, opts.policy()?, initial, resolver.as_mut())?;
    let text = match &opts.out {
        Some(path) => {
            trace.write(path)?;
            format!("wrote {} frames to {}", trace.len(), path.display())
        }
        None => trace.to_json().trim_end().to_owned(),
    };
    Ok(Output::new(text, serde_json::to_value(&trace).expect("trace serializes")))
}

pub fn cmd_composite(opts: &GlobalOpts, trace: Option<&Path>) -> Result<Output> {
    let fg = ManifestDir::open(GlobalOpts::require(&opts.manifest, "--manifest")?)?;
    let background = list_frames(GlobalOpts::require(&opts.background, "--bg")?)?;
    let out = GlobalOpts::require(&opts.out, "--out")?;
    let mode = match (trace, opts.labels()?) {
        (Some(path), None) => CompositeMode::Tracked(TrackingTrace::read(path)?),
        (None, Some(labels)) => CompositeMode::LabelSet(labels),
        _ => {
            return Err(Error::Validation(
                "composite takes either --trace or --labels".into(),
            ))
        }
    };
    let n = composite_sequence(&CompositeJob {
        foreground: fg,
        background,
        mode,
        mismatch: opts.mismatch.into(),
        output: out.clone(),
    })?;
    Ok(Output::new(
        format!("wrote {n} frames to {}", out.display()),
        json!({ "output_frames": n }),
    ))
}

pub fn cmd_metrics(
    opts: &GlobalOpts,
    pred: Option<&Path>,
    gt: Option<&Path>,
    ignore: &[u32],
    trace: Option<&Path>,
    gt_dir: Option<&Path>,
) -> Result<Output> {
    match (pred, gt, trace, gt_dir) {
        (Some(pred), Some(gt), None, None) => {
            let mut p = io::load_label_map(pred)?;
            let mut g = io::load_label_map(gt)?;
            for id in ignore {
                p.remove(*id);
                g.remove(*id);
            }
            let classes: BTreeSet<u32> = p.ids().chain(g.ids()).collect();
            let miou = mean_iou(&p, &g, classes)?;
            let pq = panoptic_quality(&p, &g)?;
            let body = json!({
                "miou": miou.miou,
                "per_class": miou.per_class,
                "pq": pq.pq,
                "sq": pq.sq,
                "rq": pq.rq,
                "tp": pq.tp,
                "fp": pq.fp,
                "fn": pq.fn_,
            });
            let miou_text = miou.miou.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
            Ok(Output::new(
                format!(
                    "miou {miou_text}  pq {:.6}  sq {:.6}  rq {:.6}  tp {} fp {} fn {}",
                    pq.pq, pq.sq, pq.rq, pq.tp, pq.fp, pq.fn_
                ),
                body,
            ))
        }
        (None, None, Some(trace), Some(gt_dir)) => {
            let fg = ManifestDir::open(GlobalOpts::require(&opts.manifest, "--manifest")?)?;
            let trace = TrackingTrace::read(trace)?;
            let truth = list_frames(gt_dir)?
                .iter()
                .map(load_mask_image)
                .collect::<Result<Vec<_>>>()?;
            let score = trace_vs_ground_truth(&trace, &fg, &truth)?;
            let mean = score.mean.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
            Ok(Output::new(
                format!("mean iou {mean} over {} frames", score.per_frame.len()),
                serde_json::to_value(&score).expect("score serializes"),
            ))
        }
        _ => Err(Error::Validation(
            "metrics takes --pred and --gt, or --trace, --gt-dir and --manifest".into(),
        )),
    }
}

pub fn cmd_list_labels(manifest: &Path, frame: usize) -> Result<Output> {
    let fg = ManifestDir::open(manifest)?;
    let table = label_table(fg.manifest(), frame)?;
    let labels: Vec<Value> = fg
        .manifest()
        .frame(frame)?
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| json!({ "index": i, "label": c.meta.label }))
        .collect();
    Ok(Output::new(table.trim_end(), Value::Array(labels)))
}

pub fn cmd_invert_mask(input: &Path, output: &Path) -> Result<Output> {
    let mask = load_mask_image(input)?;
    let inverted = mask.invert();
    write_mask_image(&inverted, output)?;
    Ok(Output::new(
        format!("wrote {}", output.display()),
        json!({
            "width": mask.width(),
            "height": mask.height(),
            "area_in": mask.area(),
            "area_out": inverted.area(),
        }),
    ))
}
