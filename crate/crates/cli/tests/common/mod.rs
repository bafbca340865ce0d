#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use maskfuse_core::session::ModeSelector;
use maskfuse_core::synth::{write_background, write_scene, Scene};
use maskfuse_core::{MismatchPolicy, OnReselect, RunConfig, TrackingPolicy};
use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maskfuse"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `scene` under `root/fg` and `n_bg` background frames under `root/bg`.
pub fn fixture(root: &Path, scene: &Scene, labels: Option<&[&str]>, n_bg: usize) -> (PathBuf, PathBuf) {
    let manifest = write_scene(&root.join("fg"), scene, labels).unwrap();
    let bg = root.join("bg");
    write_background(&bg, n_bg, scene.width, scene.height).unwrap();
    (manifest, bg)
}

pub fn config(manifest: &Path, bg: &Path, out: &Path, policy: TrackingPolicy, on_reselect: OnReselect, select: Option<usize>) -> RunConfig {
    RunConfig {
        manifest: manifest.to_path_buf(),
        background: bg.to_path_buf(),
        policy,
        mode: ModeSelector::Tracked,
        select,
        labels: None,
        mismatch: MismatchPolicy::LoopBackground,
        on_reselect,
        output: out.to_path_buf(),
    }
}

pub struct Api {
    pub base: String,
    pub client: reqwest::Client,
}

impl Api {
    pub fn new(addr: std::net::SocketAddr) -> Self {
        Self { base: format!("http://{addr}"), client: reqwest::Client::new() }
    }

    pub async fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.bytes().await.unwrap().to_vec())
    }

    pub async fn get_json(&self, path: &str) -> (u16, Value) {
        let (status, body) = self.get(path).await;
        (status, serde_json::from_slice(&body).unwrap())
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    /// Polls the session until its phase is one of `phases`.
    pub async fn wait_for(&self, phases: &[&str]) -> Value {
        let start = Instant::now();
        loop {
            let (_, body) = self.get_json("/api/session").await;
            if phases.contains(&body["phase"].as_str().unwrap_or_default()) {
                return body;
            }
            assert!(start.elapsed() < Duration::from_secs(20), "stuck in {body}");
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }
}
