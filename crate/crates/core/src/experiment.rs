//! Experiment manifests and the run pipeline shared by the CLI and the
//! benchmark tests: build or load θ₀, build or load the clean sequence,
//! corrupt it, run each requested method and write the result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conv::PaddingMode;
use crate::denoiser::{load_checkpoint, pretrain, Architecture, DenoiserParams, PretrainConfig};
use crate::error::{Result, RfrError};
use crate::finetune::{FineTuneConfig, FineTuneResult};
use crate::frame::Frame;
use crate::methods::{MethodContext, MethodRegistry};
use crate::metrics::QualityReport;
use crate::noise::{corrupt_sequence, NoiseSpec};
use crate::video::{self, build_texture_corpus, generate_recurrent_video, SynthSpec, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    pub size: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 1000,
            count: 40,
            size: 96,
        }
    }
}

impl CorpusSpec {
    pub fn build(&self) -> Result<Vec<Frame>> {
        build_texture_corpus(self.seed, self.count, self.size)
    }
}

fn default_radius() -> i64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub scenario: String,
    pub corpus: CorpusSpec,
    pub architecture: Architecture,
    pub video: SynthSpec,
    /// Test noise.
    pub noise: NoiseSpec,
    pub pretrain: PretrainConfig,
    pub finetune: FineTuneConfig,
    #[serde(default = "default_radius")]
    pub search_radius: i64,
    pub methods: Vec<String>,
    /// Pretrained weights; when absent θ₀ is trained from `corpus`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Clean sequence directory; when absent it is generated from `video`.
    #[serde(default)]
    pub sequence: Option<PathBuf>,
    pub output: PathBuf,
}

/// The network used by the shipped benchmark scenarios.
pub fn benchmark_architecture() -> Architecture {
    Architecture {
        depth: 5,
        channels: 12,
        image_channels: 1,
        kernel_size: 3,
        padding: PaddingMode::Circular,
        residual: true,
    }
}

impl ExperimentManifest {
    /// Recurrent benchmark: 30 frames of 96×96, a bank of 3 tiles, test
    /// σ = 25 against a network pretrained at σ = 15.
    pub fn recurrent(seed: u64) -> Self {
        ExperimentManifest {
            scenario: "recurrent".into(),
            corpus: CorpusSpec::default(),
            architecture: benchmark_architecture(),
            video: SynthSpec {
                seed: 100 + seed,
                ..SynthSpec::default()
            },
            noise: NoiseSpec::gaussian(25.0, 500 + seed),
            pretrain: PretrainConfig::default(),
            finetune: FineTuneConfig {
                iterations: 10,
                lr: 1e-3,
                seed,
                ..FineTuneConfig::default()
            },
            search_radius: 4,
            methods: ["baseline", "online", "offline"].map(String::from).to_vec(),
            checkpoint: None,
            sequence: None,
            output: PathBuf::from("runs/recurrent"),
        }
    }

    /// Same as [`Self::recurrent`] with per-frame motion of up to 16 pixels,
    /// beyond the block-matching search radius.
    pub fn large_motion(seed: u64) -> Self {
        let mut m = Self::recurrent(seed);
        m.scenario = "large-motion".into();
        m.video.max_shift = 16;
        m.methods = ["baseline", "online", "offline", "f2f_oracle", "f2f_blockmatch"]
            .map(String::from)
            .to_vec();
        m.output = PathBuf::from("runs/large-motion");
        m
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "recurrent" => Ok(Self::recurrent(0)),
            "large-motion" => Ok(Self::large_motion(0)),
            _ => Err(RfrError::InvalidArgument(format!(
                "unknown preset `{name}` (expected recurrent or large-motion)"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(RfrError::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| RfrError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self, registry: &MethodRegistry) -> Result<()> {
        self.architecture.validate()?;
        self.video.validate()?;
        self.noise.validate()?;
        self.finetune.validate()?;
        if self.methods.is_empty() {
            return Err(RfrError::InvalidArgument("no methods requested".into()));
        }
        for m in &self.methods {
            registry.get(m)?;
        }
        for p in [&self.checkpoint, &self.sequence].into_iter().flatten() {
            if !p.exists() {
                return Err(RfrError::MissingInput(p.clone()));
            }
        }
        Ok(())
    }
}

/// Inputs shared by every method of one run.
pub struct Prepared {
    pub theta0: DenoiserParams,
    pub clean: VideoSequence,
    pub noisy: VideoSequence,
}

pub fn load_or_pretrain(manifest: &ExperimentManifest) -> Result<DenoiserParams> {
    match &manifest.checkpoint {
        Some(path) => load_checkpoint(path),
        None => Ok(pretrain(manifest.architecture, &manifest.pretrain, &manifest.corpus.build()?)?.params),
    }
}

pub fn prepare_with(manifest: &ExperimentManifest, theta0: DenoiserParams) -> Result<Prepared> {
    let clean = match &manifest.sequence {
        Some(dir) => video::load_sequence(dir)?.0,
        None => generate_recurrent_video(&manifest.video)?,
    };
    let noisy = corrupt_sequence(&clean, &manifest.noise)?;
    Ok(Prepared { theta0, clean, noisy })
}

pub fn prepare(manifest: &ExperimentManifest) -> Result<Prepared> {
    prepare_with(manifest, load_or_pretrain(manifest)?)
}

pub struct MethodOutcome {
    pub name: String,
    pub result: FineTuneResult,
    pub quality: QualityReport,
}

pub struct RunOutcome {
    pub baseline: QualityReport,
    pub methods: Vec<MethodOutcome>,
}

impl RunOutcome {
    pub fn get(&self, name: &str) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Runs the baseline (always, as the reference column) and every requested
/// method, in manifest order.
pub fn run_methods(
    manifest: &ExperimentManifest,
    prepared: &Prepared,
    registry: &MethodRegistry,
) -> Result<RunOutcome> {
    let clean = &prepared.clean.frames[..];
    let ctx = MethodContext {
        theta0: &prepared.theta0,
        noisy: &prepared.noisy,
        clean: Some(clean),
        config: &manifest.finetune,
        test_noise: &manifest.noise,
        search_radius: manifest.search_radius,
    };
    let wrap = |name: &str| {
        let name = name.to_string();
        move |e| RfrError::Method {
            method: name,
            source: Box::new(e),
        }
    };
    let base = registry.get("baseline")?.run(&ctx).map_err(wrap("baseline"))?;
    let baseline = QualityReport::evaluate(&base.denoised.frames, clean)?;
    let mut methods = Vec::new();
    for name in &manifest.methods {
        let result = if name == "baseline" {
            base.clone()
        } else {
            registry.get(name)?.run(&ctx).map_err(wrap(name))?
        };
        let quality = QualityReport::evaluate(&result.denoised.frames, clean)?;
        methods.push(MethodOutcome {
            name: name.clone(),
            result,
            quality,
        });
    }
    Ok(RunOutcome { baseline, methods })
}

fn num(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// `t,psnr_baseline,psnr_method,ssim_baseline,ssim_method`; the method
/// columns stay empty for the baseline itself.
pub fn metrics_csv(baseline: &QualityReport, method: Option<&QualityReport>) -> String {
    let mut s = String::from("t,psnr_baseline,psnr_method,ssim_baseline,ssim_method\n");
    for (i, b) in baseline.per_frame.iter().enumerate() {
        let (pm, sm) = match method {
            Some(m) => (num(m.per_frame[i].psnr), num(m.per_frame[i].ssim)),
            None => (String::new(), String::new()),
        };
        writeln!(s, "{},{},{},{},{}", b.t, num(b.psnr), pm, num(b.ssim), sm).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub delta_psnr: f64,
    pub gradient_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest: ExperimentManifest,
    pub seeds: Seeds,
    pub baseline_mean_psnr: f64,
    pub baseline_mean_ssim: f64,
    pub results: Vec<MethodSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub corpus: u64,
    pub pretrain: u64,
    pub video: u64,
    pub test_noise: u64,
    pub finetune: u64,
}

impl Seeds {
    pub fn of(m: &ExperimentManifest) -> Self {
        Seeds {
            corpus: m.corpus.seed,
            pretrain: m.pretrain.seed,
            video: m.video.seed,
            test_noise: m.noise.seed,
            finetune: m.finetune.seed,
        }
    }
}

pub fn summarize(manifest: &ExperimentManifest, outcome: &RunOutcome) -> RunRecord {
    let results = outcome
        .methods
        .iter()
        .map(|m| MethodSummary {
            method: m.name.clone(),
            mean_psnr: m.quality.mean_psnr,
            mean_ssim: m.quality.mean_ssim,
            delta_psnr: m.quality.mean_psnr - outcome.baseline.mean_psnr,
            gradient_steps: m.result.loss_trace.len(),
        })
        .collect();
    RunRecord {
        manifest: manifest.clone(),
        seeds: Seeds::of(manifest),
        baseline_mean_psnr: outcome.baseline.mean_psnr,
        baseline_mean_ssim: outcome.baseline.mean_ssim,
        results,
    }
}

/// Aligned text table, one row per method.
pub fn summary_table(record: &RunRecord) -> String {
    let mut s = format!("scenario: {}\n", record.manifest.scenario);
    writeln!(s, "{:<16} {:>10} {:>8} {:>9}", "method", "PSNR (dB)", "SSIM", "dPSNR").unwrap();
    for r in &record.results {
        writeln!(
            s,
            "{:<16} {:>10.4} {:>8.4} {:>+9.4}",
            r.method, r.mean_psnr, r.mean_ssim, r.delta_psnr
        )
        .unwrap();
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| RfrError::io(path, e))
}

/// Writes `run.json`, `summary.csv` and one directory per method holding
/// `metrics.csv` and the clamped denoised frames.
pub fn write_outputs(dir: &Path, record: &RunRecord, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| RfrError::io(dir, e))?;
    write(&dir.join("run.json"), &(serde_json::to_string_pretty(record)? + "\n"))?;
    let mut summary = String::from("method,mean_psnr,mean_ssim,delta_psnr\n");
    for r in &record.results {
        writeln!(
            summary,
            "{},{},{},{}",
            r.method,
            num(r.mean_psnr),
            num(r.mean_ssim),
            num(r.delta_psnr)
        )
        .unwrap();
    }
    write(&dir.join("summary.csv"), &summary)?;
    for m in &outcome.methods {
        let sub = dir.join(&m.name);
        fs::create_dir_all(&sub).map_err(|e| RfrError::io(&sub, e))?;
        let method_q = (m.name != "baseline").then_some(&m.quality);
        write(&sub.join("metrics.csv"), &metrics_csv(&outcome.baseline, method_q))?;
        for (t, f) in m.result.denoised.frames.iter().enumerate() {
            video::save_frame(&sub.join(video::frame_file_name(t, f.channels())), &f.clamp01())?;
        }
    }
    Ok(())
}

/// Aggregate of several runs: one row per scenario, one column per method
/// (mean PSNR), `n/a` where a run lacks the method.
pub fn aggregate(records: &[RunRecord]) -> (String, String) {
    let mut columns: Vec<String> = Vec::new();
    for r in records {
        for m in &r.results {
            if !columns.contains(&m.method) {
                columns.push(m.method.clone());
            }
        }
    }
    let cell = |r: &RunRecord, c: &str| {
        r.results
            .iter()
            .find(|m| m.method == c)
            .map(|m| format!("{:.4}", m.mean_psnr))
            .unwrap_or_else(|| "n/a".into())
    };
    let mut csv = format!("scenario,{}\n", columns.join(","));
    let width = columns.iter().map(|c| c.len()).max().unwrap_or(0).max(10);
    let name_w = records
        .iter()
        .map(|r| r.manifest.scenario.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut table = format!("{:<name_w$}", "scenario");
    for c in &columns {
        write!(table, " {c:>width$}").unwrap();
    }
    table.push('\n');
    for r in records {
        let cells: Vec<String> = columns.iter().map(|c| cell(r, c)).collect();
        writeln!(csv, "{},{}", r.manifest.scenario, cells.join(",")).unwrap();
        write!(table, "{:<name_w$}", r.manifest.scenario).unwrap();
        for c in &cells {
            write!(table, " {c:>width$}").unwrap();
        }
        table.push('\n');
    }
    (csv, table)
}

pub fn load_record(run_dir: &Path) -> Result<RunRecord> {
    let path = run_dir.join("run.json");
    if !path.exists() {
        return Err(RfrError::MissingInput(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| RfrError::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
