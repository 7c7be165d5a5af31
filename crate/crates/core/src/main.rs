use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rfr::conv::PaddingMode;
use rfr::denoiser::{self, Architecture, PretrainConfig};
use rfr::experiment::{self, CorpusSpec, ExperimentManifest};
use rfr::finetune::equivariance_report;
use rfr::methods::MethodRegistry;
use rfr::noise::{add_noise, variance_reduction_oracle, NoiseSpec};
use rfr::rng::{self, domain};
use rfr::video::{self, generate_recurrent_video, SynthSpec};
use rfr::{parallel, Result, RfrError};

#[derive(Parser)]
#[command(name = "rfr", version, about = "Test-time self-supervised video denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recurrent video (clean frames + manifest.json).
    Gen(GenArgs),
    /// Pretrain the denoiser on the procedural texture corpus.
    Pretrain(PretrainArgs),
    /// Run baseline and fine-tuning methods described by a manifest.
    Run(RunArgs),
    /// Aggregate the summaries of one or more run directories.
    Report(ReportArgs),
    /// Measure shift-equivariance of a checkpoint.
    Equivariance(EquivarianceArgs),
    /// Monte-Carlo check of noise reduction by averaging T realizations.
    Variance(VarianceArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Frame height and width.
    #[arg(long, default_value_t = 96)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Number of distinct tiles in the bank.
    #[arg(long, default_value_t = 3)]
    tiles: usize,
    #[arg(long, default_value_t = 16)]
    tile_size: usize,
    #[arg(long, default_value_t = 4)]
    max_shift: i64,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct PretrainArgs {
    /// Output directory for checkpoint.rfr, metrics.csv and loss.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    depth: usize,
    #[arg(long, default_value_t = 12)]
    channels: usize,
    #[arg(long, default_value_t = 1)]
    image_channels: usize,
    #[arg(long, default_value = "circular")]
    padding: PaddingMode,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    steps_per_epoch: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 32)]
    patch: usize,
    /// Training noise std on the 0-255 scale.
    #[arg(long, default_value_t = 15.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    corpus_seed: u64,
    #[arg(long, default_value_t = 40)]
    corpus_count: usize,
    #[arg(long, default_value_t = 96)]
    corpus_size: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment manifest (JSON).
    #[arg(long, conflicts_with = "preset")]
    manifest: Option<PathBuf>,
    /// Built-in scenario: recurrent or large-motion.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Offline iterations K.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Test noise std on the 0-255 scale.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    finetune_sigma: Option<f64>,
    #[arg(long)]
    no_second_term: bool,
    #[arg(long)]
    updates_per_frame: Option<usize>,
    #[arg(long)]
    search_radius: Option<i64>,
    #[arg(long)]
    max_shift: Option<i64>,
    #[arg(long)]
    video_seed: Option<u64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    finetune_seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories (each holding run.json).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Write the aggregate CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EquivarianceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 96)]
    size: usize,
    #[arg(long, default_value_t = 10)]
    shifts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VarianceArgs {
    /// Noise std on the 0-255 scale.
    #[arg(long, default_value_t = 40.0)]
    sigma: f64,
    /// Frame counts to average.
    #[arg(long, value_delimiter = ',', default_value = "1,4,8")]
    frames: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Residual std of pseudo-clean frames (0-255 scale) instead of the input noise.
    #[arg(long)]
    residual_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    parallel::configure_from_env();
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Equivariance(a) => cmd_equivariance(a),
        Command::Variance(a) => cmd_variance(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| RfrError::io(path, e))
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    if !a.force {
        if let Ok(mut entries) = fs::read_dir(&a.out) {
            if entries.next().is_some() {
                return Err(RfrError::InvalidArgument(format!(
                    "{} is not empty (use --force to overwrite)",
                    a.out.display()
                )));
            }
        }
    }
    let spec = SynthSpec {
        frames: a.frames,
        height: a.size,
        width: a.size,
        channels: a.channels,
        tile_bank_size: a.tiles,
        tile_size: a.tile_size,
        max_shift: a.max_shift,
        seed: a.seed,
    };
    let seq = generate_recurrent_video(&spec)?;
    video::save_sequence(&a.out, &seq, a.seed, Some(&spec))?;
    println!(
        "wrote {} frames ({}x{}, {:?} recurrence) to {}",
        seq.len(),
        a.size,
        a.size,
        seq.recurrence_level,
        a.out.display()
    );
    Ok(())
}

fn cmd_pretrain(a: PretrainArgs) -> Result<()> {
    let arch = Architecture {
        depth: a.depth,
        channels: a.channels,
        image_channels: a.image_channels,
        kernel_size: 3,
        padding: a.padding,
        residual: true,
    };
    arch.validate()?;
    let cfg = PretrainConfig {
        epochs: a.epochs,
        steps_per_epoch: a.steps_per_epoch,
        batch_patches: a.batch,
        patch_size: a.patch,
        train_sigma: a.sigma,
        lr: a.lr,
        seed: a.seed,
    };
    let corpus_spec = CorpusSpec {
        seed: a.corpus_seed,
        count: a.corpus_count,
        size: a.corpus_size,
    };
    let mut corpus = corpus_spec.build()?;
    if a.image_channels != 1 {
        for f in &mut corpus {
            let data = f.data().repeat(a.image_channels);
            *f = rfr::Frame::from_vec(a.image_channels, f.height(), f.width(), data)?;
        }
    }
    let out = denoiser::pretrain(arch, &cfg, &corpus)?;
    fs::create_dir_all(&a.out).map_err(|e| RfrError::io(&a.out, e))?;
    denoiser::save_checkpoint(&a.out.join("checkpoint.rfr"), &out.params)?;

    let mut loss = String::from("step,loss\n");
    for (i, l) in out.loss_trace.iter().enumerate() {
        writeln!(loss, "{},{:.9e}", i + 1, l).unwrap();
    }
    write_file(&a.out.join("loss.csv"), &loss)?;
    let (noisy, den) = (
        format!("{:.4}", out.held_out_psnr_noisy),
        format!("{:.4}", out.held_out_psnr_denoised),
    );
    let gain = format!("{:.4}", out.held_out_gain());
    write_file(
        &a.out.join("metrics.csv"),
        &format!(
            "held_out_frames,psnr_noisy,psnr_denoised,gain\n{},{noisy},{den},{gain}\n",
            out.held_out_count
        ),
    )?;
    let config = serde_json::json!({ "architecture": arch, "pretrain": cfg, "corpus": corpus_spec });
    write_file(
        &a.out.join("config.json"),
        &(serde_json::to_string_pretty(&config)? + "\n"),
    )?;
    println!(
        "held-out PSNR over {} frames: noisy {noisy} dB, denoised {den} dB, gain {gain} dB",
        out.held_out_count
    );
    println!("checkpoint: {}", a.out.join("checkpoint.rfr").display());
    Ok(())
}

fn apply_overrides(m: &mut ExperimentManifest, a: &RunArgs) {
    if let Some(v) = &a.output {
        m.output = v.clone();
    }
    if let Some(v) = &a.methods {
        m.methods = v.clone();
    }
    if let Some(v) = &a.checkpoint {
        m.checkpoint = Some(v.clone());
    }
    if let Some(v) = &a.sequence {
        m.sequence = Some(v.clone());
    }
    if let Some(v) = &a.scenario {
        m.scenario = v.clone();
    }
    if let Some(v) = a.k {
        m.finetune.iterations = v;
    }
    if let Some(v) = a.lr {
        m.finetune.lr = v;
    }
    if let Some(v) = a.sigma {
        m.noise.sigma255 = v;
    }
    if let Some(v) = a.finetune_sigma {
        m.finetune.finetune_sigma255 = Some(v);
    }
    if a.no_second_term {
        m.finetune.use_second_term = false;
    }
    if let Some(v) = a.updates_per_frame {
        m.finetune.updates_per_frame = v;
    }
    if let Some(v) = a.search_radius {
        m.search_radius = v;
    }
    if let Some(v) = a.max_shift {
        m.video.max_shift = v;
    }
    if let Some(v) = a.video_seed {
        m.video.seed = v;
    }
    if let Some(v) = a.noise_seed {
        m.noise.seed = v;
    }
    if let Some(v) = a.finetune_seed {
        m.finetune.seed = v;
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut manifest = match (&a.manifest, &a.preset) {
        (Some(path), _) => ExperimentManifest::load(path)?,
        (None, Some(name)) => ExperimentManifest::preset(name)?,
        (None, None) => return Err(RfrError::InvalidArgument("pass --manifest or --preset".into())),
    };
    apply_overrides(&mut manifest, &a);
    let registry = MethodRegistry::default();
    manifest.validate(&registry)?;

    let prepared = experiment::prepare(&manifest)?;
    let outcome = experiment::run_methods(&manifest, &prepared, &registry)?;
    let record = experiment::summarize(&manifest, &outcome);
    experiment::write_outputs(&manifest.output, &record, &outcome)?;
    print!("{}", experiment::summary_table(&record));
    println!("results: {}", manifest.output.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let records = a
        .runs
        .iter()
        .map(|d| experiment::load_record(d))
        .collect::<Result<Vec<_>>>()?;
    let (csv, table) = experiment::aggregate(&records);
    if let Some(path) = &a.csv {
        write_file(path, &csv)?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_equivariance(a: EquivarianceArgs) -> Result<()> {
    use rand::Rng;
    let params = denoiser::load_checkpoint(&a.checkpoint)?;
    let mut clean = experiment::CorpusSpec {
        seed: a.seed,
        count: 1,
        size: a.size,
    }
    .build()?
    .remove(0);
    if params.arch.image_channels != 1 {
        let data = clean.data().repeat(params.arch.image_channels);
        clean = rfr::Frame::from_vec(params.arch.image_channels, a.size, a.size, data)?;
    }
    let frame = add_noise(&clean, &NoiseSpec::gaussian(25.0, a.seed), 0);
    let mut pick = rng::stream(a.seed, rng::stream_id(&[domain::VIDEO, 0x5348_4946]));
    let n = a.size as i64;
    let shifts: Vec<(i64, i64)> = (0..a.shifts)
        .map(|_| (pick.gen_range(-n + 1..n), pick.gen_range(-n + 1..n)))
        .collect();
    let dev = equivariance_report(&params, &frame, &shifts)?;
    println!("padding: {:?}", params.arch.padding);
    println!("shifts: {shifts:?}");
    println!("max |f(shift(y)) - shift(f(y))| = {dev:.3e}");
    Ok(())
}

fn cmd_variance(a: VarianceArgs) -> Result<()> {
    let clean = rfr::Frame::filled(1, a.size, a.size, 0.5);
    let spec = NoiseSpec::gaussian(a.sigma, a.seed);
    println!("{:>4} {:>12} {:>12} {:>10}", "T", "predicted", "measured", "rel.err");
    for &t in &a.frames {
        let r = variance_reduction_oracle(&clean, &spec, t, a.residual_sigma.map(|s| s / 255.0))?;
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>9.2}%",
            t,
            r.predicted_sigma(),
            r.averaged_sigma,
            100.0 * r.relative_error()
        );
    }
    Ok(())
}
