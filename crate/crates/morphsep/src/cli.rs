//! `morphsep` subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphsep_core::kam::{binarize_kernel, train_kernel};
use morphsep_core::metrics::{detection_metrics, separation_score};
use morphsep_core::resample::resample;
use morphsep_core::stft::stft;
use morphsep_core::{
    detect_pipeline, separate, AudioSignal, DetectionLattice, Method, RpcaConfig, SeparateConfig, SourceRole, TvConfig,
    VadConfig, YinConfig,
};
use rayon::prelude::*;

use crate::formats::{
    read_detection_csv, read_kernels, read_segments, write_detection_csv, write_json, write_kernels, write_segments,
    BssReport, KernelFile, SourceReport, VadReport, DEFAULT_KERNEL_THRESHOLD,
};
use crate::fsutil::{atomic_write_str, OUT_DIR_ENV};
use crate::manifest::{parse_role_path, Manifest, ManifestEntry};
use crate::synth::{synth_mixture, Recipe};
use crate::wav::{load_wav, save_wav};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "morphsep",
    version,
    about = "Singing-voice separation and unsupervised voice detection"
)]
pub struct Cli {
    /// Directory for outputs.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a mixture into source WAVs.
    Separate(SeparateArgs),
    /// Learn a KAM kernel from an isolated source.
    TrainKernel(TrainArgs),
    /// Frame-level voice detection; writes a CSV.
    Detect(DetectArgs),
    /// Score estimates against references (RQF, SDR, SIR, SAR).
    EvalBss(EvalBssArgs),
    /// Score a detection CSV against truth segments.
    EvalVad(EvalVadArgs),
    /// Render a synthetic mixture, its sources and voice segments.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Oracle,
    Tv,
    Rpca,
    KamRepet,
    KamCust,
}

#[derive(Debug, Clone, Args)]
pub struct SepArgs {
    /// Mixture WAV (omit with --manifest).
    pub input: Option<PathBuf>,
    /// Batch file of mixtures, references and truth segments.
    #[arg(long, conflicts_with = "input")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "kam-repet")]
    pub method: MethodName,
    /// Wiener exponent.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Iterations of the chosen method.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Kernel files for kam-cust.
    #[arg(long, num_args = 1..)]
    pub kernels: Vec<PathBuf>,
    /// `role=path` isolated sources for the oracle method.
    #[arg(long = "reference", value_name = "ROLE=PATH")]
    pub references: Vec<String>,
    /// Harmonic/percussive KAM split before the method.
    #[arg(long)]
    pub hpss: bool,
    /// Keep only the F0 partials of the voice estimate.
    #[arg(long)]
    pub f0_filter: bool,
    /// Processing sample rate; inputs are resampled to it.
    #[arg(long, default_value_t = 22050)]
    pub rate: u32,
    /// Repetition period in frames for kam-repet (estimated when absent).
    #[arg(long)]
    pub period: Option<usize>,
    /// Sparse-part weight: lambda = scale / sqrt(max(F, T)).
    #[arg(long, default_value_t = 1.0)]
    pub lambda_scale: f64,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[command(flatten)]
    pub sep: SepArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub sep: SepArgs,
    /// Voice threshold on the voice-to-music ratio.
    #[arg(long, default_value_t = 0.5)]
    pub gamma_v: f64,
    /// Silence threshold on frame energy.
    #[arg(long, default_value_t = 1e-4)]
    pub gamma_s: f64,
    #[arg(long, default_value_t = VadConfig::DEFAULT_FRAME_MS)]
    pub frame_ms: f64,
    #[arg(long, default_value_t = VadConfig::DEFAULT_STEP_MS)]
    pub step_ms: f64,
    #[arg(long, default_value_t = 120.0)]
    pub band_low: f64,
    #[arg(long, default_value_t = 3000.0)]
    pub band_high: f64,
    /// Truth segments; adds a score report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// CSV path (single input only).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 21)]
    pub h: usize,
    #[arg(long, default_value_t = 35)]
    pub w: usize,
    /// Binarization threshold, as a fraction of the kernel's peak value.
    #[arg(long, default_value_t = DEFAULT_KERNEL_THRESHOLD)]
    pub gamma_thr: f64,
    /// Compare --gamma-thr against the raw kernel values instead.
    #[arg(long)]
    pub absolute: bool,
    /// Source role the kernel stands for.
    #[arg(long, default_value = "harmonic")]
    pub label: String,
    /// Store the real-valued kernel; it is binarized when loaded.
    #[arg(long)]
    pub real: bool,
    #[arg(long, default_value_t = 22050)]
    pub rate: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalBssArgs {
    /// Estimate WAVs, scored against the reference at the same position.
    #[arg(long, required = true, num_args = 1..)]
    pub estimates: Vec<PathBuf>,
    /// `role=path` reference WAVs.
    #[arg(long = "reference", value_name = "ROLE=PATH", required = true)]
    pub references: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalVadArgs {
    /// Detection CSV.
    pub csv: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in recipe.
    #[arg(long, default_value = "voice-drone-clicks", value_parser = clap::builder::PossibleValuesParser::new(Recipe::PRESETS))]
    pub preset: String,
    /// JSON recipe file; overrides --preset.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Prefix of the written files.
    #[arg(long, default_value = "synth")]
    pub name: String,
}

pub fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(c) => {
                let _ = c.print();
                ExitCode::from(u8::try_from(c.exit_code()).unwrap_or(2))
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match &cli.command {
        Command::Separate(a) => cmd_separate(&cli.out_dir, &a.sep),
        Command::Detect(a) => cmd_detect(&cli.out_dir, a),
        Command::TrainKernel(a) => cmd_train(&cli.out_dir, a),
        Command::EvalBss(a) => cmd_eval_bss(&cli.out_dir, a),
        Command::EvalVad(a) => cmd_eval_vad(&cli.out_dir, a),
        Command::Synth(a) => cmd_synth(&cli.out_dir, a),
    }
}

fn load_at(path: &Path, rate: u32) -> Result<AudioSignal, Error> {
    Ok(resample(&load_wav(path)?, rate)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Mixtures to process, from a single input or a manifest.
fn entries(sep: &SepArgs) -> anyhow::Result<Vec<ManifestEntry>> {
    if let Some(m) = &sep.manifest {
        return Ok(Manifest::load(m)?.entries);
    }
    let input = sep
        .input
        .clone()
        .ok_or_else(|| anyhow::anyhow!("an input WAV or --manifest is required"))?;
    let references = sep
        .references
        .iter()
        .map(|s| parse_role_path(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vec![ManifestEntry {
        mixture: input,
        references,
        segments: None,
    }])
}

pub fn build_method(sep: &SepArgs, references: &[(SourceRole, PathBuf)], len: usize) -> anyhow::Result<Method> {
    Ok(match sep.method {
        MethodName::Oracle => {
            if references.len() < 2 {
                anyhow::bail!("the oracle method needs at least two --reference role=path sources");
            }
            let mut refs = Vec::with_capacity(references.len());
            for (_, p) in references {
                let mut r = load_at(p, sep.rate)?;
                if r.len().abs_diff(len) > 1 {
                    anyhow::bail!("reference {} has {} samples, mixture has {len}", p.display(), r.len());
                }
                r.samples.resize(len, 0.0);
                refs.push(r);
            }
            Method::Oracle {
                references: refs,
                roles: references.iter().map(|(r, _)| *r).collect(),
            }
        }
        MethodName::Tv => {
            let mut cfg = TvConfig::default();
            if let Some(n) = sep.iters {
                cfg.n_iter = n;
            }
            Method::Tv(cfg)
        }
        MethodName::Rpca => {
            let mut cfg = RpcaConfig {
                lambda_scale: sep.lambda_scale,
                ..RpcaConfig::default()
            };
            if let Some(n) = sep.iters {
                cfg.n_iter = n;
            }
            Method::Rpca(cfg)
        }
        MethodName::KamRepet => match Method::kam_repet() {
            Method::KamRepet {
                count, voice_kernel, ..
            } => Method::KamRepet {
                period: sep.period,
                count,
                voice_kernel,
            },
            _ => unreachable!("kam_repet builds KamRepet"),
        },
        MethodName::KamCust => {
            if sep.kernels.is_empty() {
                anyhow::bail!("kam-cust needs --kernels");
            }
            let mut kernels = Vec::new();
            for p in &sep.kernels {
                for k in read_kernels(p)? {
                    kernels.push(k.to_kernel()?);
                }
            }
            Method::KamCustom(kernels)
        }
    })
}

pub fn separate_config(sep: &SepArgs) -> SeparateConfig {
    let mut cfg = SeparateConfig::for_rate(sep.rate);
    cfg.alpha = sep.alpha;
    if matches!(sep.method, MethodName::KamRepet | MethodName::KamCust) {
        if let Some(n) = sep.iters {
            cfg.kam_iters = n;
        }
    }
    if sep.hpss {
        cfg.hpss = Some(SeparateConfig::DEFAULT_HPSS);
    }
    if sep.f0_filter {
        cfg.f0 = Some(YinConfig::default());
    }
    cfg
}

/// Runs `job` on every entry in parallel and reports each failure.
fn for_each_entry<F>(list: &[ManifestEntry], job: F) -> anyhow::Result<()>
where
    F: Fn(&ManifestEntry) -> anyhow::Result<()> + Sync,
{
    let failures: Vec<String> = list
        .par_iter()
        .filter_map(|e| job(e).err().map(|err| format!("{}: {err:#}", e.mixture.display())))
        .collect();
    for f in &failures {
        eprintln!("error: {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("{} of {} inputs failed", failures.len(), list.len())
    }
}

fn cmd_separate(out_dir: &Path, sep: &SepArgs) -> anyhow::Result<()> {
    let list = entries(sep)?;
    let cfg = separate_config(sep);
    for_each_entry(&list, |entry| {
        let x = load_at(&entry.mixture, sep.rate)?;
        let method = build_method(sep, &entry.references, x.len())?;
        let result = separate(&x, &method, &cfg)?;
        let name = stem(&entry.mixture);
        for src in &result.sources {
            let path = out_dir.join(format!("{name}_{}.wav", src.role));
            save_wav(&path, &src.signal)?;
            println!("{}", path.display());
        }
        Ok(())
    })
}

pub fn vad_config(a: &DetectArgs) -> VadConfig {
    let mut vad = VadConfig::from_ms(a.frame_ms, a.step_ms, a.sep.rate);
    vad.voice_thr = a.gamma_v;
    vad.silence_thr = a.gamma_s;
    vad.band = (a.band_low, a.band_high);
    vad
}

fn score_lattice(lattice: &DetectionLattice, segments: &[(f64, f64)]) -> anyhow::Result<VadReport> {
    let scored = lattice.clone().with_truth_segments(segments);
    let truth = scored.truth.as_ref().expect("truth attached");
    let score = detection_metrics(&scored.decisions(), truth)?;
    Ok(VadReport::new(lattice.len(), &score))
}

fn cmd_detect(out_dir: &Path, a: &DetectArgs) -> anyhow::Result<()> {
    let list = entries(&a.sep)?;
    if a.out.is_some() && list.len() > 1 {
        anyhow::bail!("--out applies to a single input; use --out-dir with --manifest");
    }
    let cfg = separate_config(&a.sep);
    let vad = vad_config(a);
    vad.validate()?;
    for_each_entry(&list, |entry| {
        let x = load_at(&entry.mixture, a.sep.rate)?;
        let method = build_method(&a.sep, &entry.references, x.len())?;
        let lattice = detect_pipeline(&x, &method, &cfg, &vad)?;
        let name = stem(&entry.mixture);
        let csv = a.out.clone().unwrap_or_else(|| out_dir.join(format!("{name}.csv")));
        write_detection_csv(&csv, &lattice)?;
        println!("{}", csv.display());
        if let Some(seg_path) = a.truth.as_ref().or(entry.segments.as_ref()) {
            let report = score_lattice(&lattice, &read_segments(seg_path)?)?;
            let json = csv.with_file_name(format!("{}_vad.json", stem(&csv)));
            write_json(&json, &report)?;
            print!("{}", report.table());
        }
        Ok(())
    })
}

fn cmd_train(out_dir: &Path, a: &TrainArgs) -> anyhow::Result<()> {
    let role = SourceRole::parse(&a.label).ok_or_else(|| anyhow::anyhow!("unknown label `{}`", a.label))?;
    let x = load_at(&a.input, a.rate)?;
    let cfg = SeparateConfig::for_rate(a.rate).stft;
    let kernel = train_kernel(&stft(&x, &cfg)?, a.h, a.w, role)?;
    let threshold = if a.absolute {
        a.gamma_thr
    } else {
        a.gamma_thr * kernel.values().max()
    };
    let file = if a.real {
        KernelFile::from_kernel(&kernel, threshold)
    } else {
        KernelFile::from_kernel(&binarize_kernel(&kernel, threshold)?, threshold)
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{}_{}.kernel.jsonl", stem(&a.input), role)));
    write_kernels(&out, &[file])?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_eval_bss(out_dir: &Path, a: &EvalBssArgs) -> anyhow::Result<()> {
    if a.estimates.len() > a.references.len() {
        anyhow::bail!(
            "{} estimates but only {} references",
            a.estimates.len(),
            a.references.len()
        );
    }
    let refs = a
        .references
        .iter()
        .map(|s| parse_role_path(s))
        .collect::<Result<Vec<_>, _>>()?;
    let ref_signals = refs.iter().map(|(_, p)| load_wav(p)).collect::<Result<Vec<_>, _>>()?;
    let mut sources = Vec::new();
    for (i, est_path) in a.estimates.iter().enumerate() {
        let target = &ref_signals[i];
        let mut est = load_at(est_path, target.sample_rate)?;
        if est.len().abs_diff(target.len()) > 1 {
            anyhow::bail!(
                "estimate {} has {} samples, reference has {}",
                est_path.display(),
                est.len(),
                target.len()
            );
        }
        est.samples.resize(target.len(), 0.0);
        let score = separation_score(&est, &ref_signals, i)?;
        sources.push(SourceReport::new(
            refs[i].0.as_str(),
            &est_path.display().to_string(),
            &score,
        ));
    }
    let report = BssReport { sources };
    let out = a.out.clone().unwrap_or_else(|| out_dir.join("bss_scores.json"));
    write_json(&out, &report)?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_eval_vad(out_dir: &Path, a: &EvalVadArgs) -> anyhow::Result<()> {
    let lattice = read_detection_csv(&a.csv)?;
    let report = score_lattice(&lattice, &read_segments(&a.truth)?)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{}_vad.json", stem(&a.csv))));
    write_json(&out, &report)?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_synth(out_dir: &Path, a: &SynthArgs) -> anyhow::Result<()> {
    let mut recipe = match &a.recipe {
        Some(p) => crate::formats::read_json::<Recipe>(p)?,
        None => Recipe::preset(&a.preset).expect("preset names are validated by clap"),
    };
    if let Some(seed) = a.seed {
        recipe.seed = seed;
    }
    if let Some(d) = a.duration {
        recipe.duration_s = d;
    }
    let synth = synth_mixture(&recipe)?;
    let mix = out_dir.join(format!("{}_mix.wav", a.name));
    save_wav(&mix, &synth.mixture)?;
    let mut refs = Vec::new();
    for s in &synth.sources {
        let p = out_dir.join(format!("{}_{}.wav", a.name, s.name));
        save_wav(&p, &s.signal)?;
        refs.push((s.role, p));
    }
    let truth = out_dir.join(format!("{}_truth.txt", a.name));
    write_segments(&truth, &synth.segments)?;
    let manifest = Manifest {
        entries: vec![ManifestEntry {
            mixture: PathBuf::from(mix.file_name().expect("file name")),
            references: refs
                .iter()
                .map(|(r, p)| (*r, PathBuf::from(p.file_name().expect("file name"))))
                .collect(),
            segments: Some(PathBuf::from(truth.file_name().expect("file name"))),
        }],
    };
    let manifest_path = out_dir.join(format!("{}_manifest.txt", a.name));
    atomic_write_str(&manifest_path, &manifest.to_text())?;
    println!("{}", mix.display());
    for (_, p) in &refs {
        println!("{}", p.display());
    }
    println!("{}", truth.display());
    println!("{}", manifest_path.display());
    Ok(())
}
