//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audit::{render_report, run_audit, run_blur_triplet_with_region, AuditReport, ReportFormat};
use crate::dataset::{load_image_folder, write_image_folder, LabeledImageSet, SplitSpec};
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::idx::load_idx_pair;
use crate::probes::{build_feature_matrix, BlurRegion, ProbeId};
use crate::synthgen::{generate_with_foreground, BiasChannel, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "leakprobe", about = "Audit image datasets for label-correlated capture bias")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest on a probe and compare test accuracy to chance
    Audit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "8px")]
        probe: ProbeArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Blur-probe audits of full, foreground-only and background-only images on one split
    BlurTriplet {
        /// Folder-per-class image tree
        #[arg(long)]
        dataset: PathBuf,
        /// Foreground tree with the same layout; pure black marks background
        #[arg(long)]
        foreground: PathBuf,
        /// Pixels scored on the foreground and background images
        #[arg(long, value_enum, default_value = "unmasked")]
        blur_region: BlurRegionArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write probe features as CSV
    ProbeDump {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "8px")]
        probe: ProbeArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a synthetic folder-per-class dataset with known bias
    Synth {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 1.0)]
        bias: f64,
        #[arg(long, value_enum, default_value = "bg")]
        bias_channel: BiasChannelArg,
        #[arg(long, default_value_t = 5.0)]
        noise_sd: f64,
        /// Image size as WxH
        #[arg(long, default_value = "64x64", value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the foreground-only companion tree here
        #[arg(long)]
        foreground_out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the toolkit version
    Version,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Folder-per-class image tree
    #[arg(long, conflicts_with_all = ["idx_images", "idx_labels"])]
    pub dataset: Option<PathBuf>,
    /// IDX images file (use with --idx-labels)
    #[arg(long, requires = "idx_labels")]
    pub idx_images: Option<PathBuf>,
    /// IDX labels file
    #[arg(long, requires = "idx_images")]
    pub idx_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Seed for the split and the forest
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Fraction of images used for training
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProbeArg {
    #[value(name = "8px")]
    EightPixel,
    Blur,
}

impl From<ProbeArg> for ProbeId {
    fn from(p: ProbeArg) -> Self {
        match p {
            ProbeArg::EightPixel => ProbeId::EightPixel,
            ProbeArg::Blur => ProbeId::Blur,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BlurRegionArg {
    Unmasked,
    FullFrame,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BiasChannelArg {
    Bg,
    Blur,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    Ok((w, h))
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().ansi().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> std::result::Result<T, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn load(data: &DataArgs) -> std::result::Result<LabeledImageSet, Failure> {
    match (&data.dataset, &data.idx_images, &data.idx_labels) {
        (Some(dir), None, None) => Ok(load_image_folder(dir).map_err(|e| e.at_stage("ingest"))?),
        (None, Some(images), Some(labels)) => Ok(load_idx_pair(images, labels).map_err(|e| e.at_stage("ingest"))?),
        _ => Err(Failure::Usage(
            "give either --dataset <dir> or both --idx-images and --idx-labels".into(),
        )),
    }
}

fn settings(run: &RunArgs) -> std::result::Result<(SplitSpec, ForestConfig, ReportFormat), Failure> {
    let split = SplitSpec::new(run.train_frac, run.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    if run.trees == 0 {
        return Err(Failure::Usage("--trees must be at least 1".into()));
    }
    let forest = ForestConfig {
        n_trees: run.trees,
        seed: run.seed,
        ..ForestConfig::default()
    };
    let format = match run.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
    };
    Ok((split, forest, format))
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e).at_stage("output"))?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e).at_stage("output"))?,
    }
    Ok(())
}

fn render_triplet(reports: &[AuditReport; 3], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            for r in reports {
                s.push_str(&render_report(r, ReportFormat::Text));
                s.push('\n');
            }
            s.push_str(&format!(
                "{:>10} {:>10} {:>10} {:>13}\n{:>9.1}% {:>9.1}% {:>9.1}% {:>12.1}%\n",
                "full",
                "fg",
                "bg",
                "random guess",
                reports[0].accuracy_percent,
                reports[1].accuracy_percent,
                reports[2].accuracy_percent,
                reports[0].chance_percent
            ));
            s
        }
    }
}

fn probe_csv(set: &LabeledImageSet, probe: ProbeId) -> Result<String> {
    let m = build_feature_matrix(set, probe)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut header = vec!["path".to_string(), "label".to_string()];
    header.extend((0..m.cols).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(ser)?;
    for (i, r) in set.records.iter().enumerate() {
        let mut row = vec![r.source_path.display().to_string(), r.label.clone()];
        row.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn execute(command: Command, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Version => {
            emit(&format!("leakprobe {}\n", crate::VERSION), None, stdout)
        }
        Command::Audit { data, probe, run } => {
            let (split, forest, format) = settings(&run)?;
            let text = with_threads(run.threads, || -> std::result::Result<String, Failure> {
                let set = load(&data)?;
                let report = run_audit(&set, probe.into(), &split, &forest)?;
                let mut s = render_report(&report, format);
                if !s.ends_with('\n') {
                    s.push('\n');
                }
                Ok(s)
            })??;
            emit(&text, run.out.as_deref(), stdout)
        }
        Command::BlurTriplet { dataset, foreground, blur_region, run } => {
            let region = match blur_region {
                BlurRegionArg::Unmasked => BlurRegion::Unmasked,
                BlurRegionArg::FullFrame => BlurRegion::FullFrame,
            };
            let (split, forest, format) = settings(&run)?;
            let text = with_threads(run.threads, || -> std::result::Result<String, Failure> {
                let original = load_image_folder(&dataset).map_err(|e| e.at_stage("ingest"))?;
                let fg = load_image_folder(&foreground).map_err(|e| e.at_stage("ingest"))?;
                let reports = run_blur_triplet_with_region(&original, &fg, &split, &forest, region)?;
                Ok(render_triplet(&reports, format))
            })??;
            emit(&text, run.out.as_deref(), stdout)
        }
        Command::ProbeDump { data, probe, out, threads } => {
            let text = with_threads(threads, || -> std::result::Result<String, Failure> {
                let set = load(&data)?;
                Ok(probe_csv(&set, probe.into()).map_err(|e| e.at_stage("probe"))?)
            })??;
            emit(&text, out.as_deref(), stdout)
        }
        Command::Synth {
            classes,
            per_class,
            bias,
            bias_channel,
            noise_sd,
            size,
            seed,
            out,
            foreground_out,
            threads,
        } => {
            let config = SynthConfig {
                n_classes: classes,
                n_per_class: per_class,
                width: size.0,
                height: size.1,
                bias_strength: bias,
                bias_channel: match bias_channel {
                    BiasChannelArg::Bg => BiasChannel::BackgroundLevel,
                    BiasChannelArg::Blur => BiasChannel::Blur,
                },
                background_noise_sd: noise_sd,
                seed,
            };
            config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            with_threads(threads, || -> std::result::Result<(), Failure> {
                let generated = generate_with_foreground(&config)?;
                write_image_folder(&generated.images, &out).map_err(|e| e.at_stage("write"))?;
                if let Some(fg) = &foreground_out {
                    write_image_folder(&generated.foreground, fg).map_err(|e| e.at_stage("write"))?;
                }
                Ok(())
            })??;
            emit(
                &format!(
                    "wrote {} images in {} classes to {}\n",
                    config.n_classes * config.n_per_class,
                    config.n_classes,
                    out.display()
                ),
                None,
                stdout,
            )
        }
    }
}
