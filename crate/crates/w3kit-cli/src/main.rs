//! Command-line harness: data generation, two-stage training, prediction,
//! ensembling, evaluation, gradient checking and the full toy experiment.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 filesystem conflict, 3 vocabulary
//! mismatch, 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use w3kit::backbone::AttentionVariant;
use w3kit::config::RunConfig;
use w3kit::data::markov::MarkovActionScript;
use w3kit::data::NoiseProfile;
use w3kit::error::Error;
use w3kit::experiment::run_experiment;
use w3kit::gradsuite;
use w3kit::parallel::ExecMode;
use w3kit::pipeline;
use w3kit::predictions::PredictionFile;
use w3kit::report::{render_attention_table, ExperimentReport};

const EXIT_FAILURE: u8 = 1;
const EXIT_FS_CONFLICT: u8 = 2;
const EXIT_VOCAB_MISMATCH: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "w3kit", version, about = "Factorized video attention and temporal-context scoring on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run configuration (unknown keys rejected).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single configuration keys, e.g. --set epochs=5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        base.with_overrides(&self.set)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenData {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Clip count (ignored when a context script drives generation).
        #[arg(long, default_value_t = 2000)]
        n_clips: usize,
        /// Split tag recorded in the manifest.
        #[arg(long, default_value = "s1")]
        split: String,
        /// Modality stand-in: rgb, flow or audio.
        #[arg(long, default_value = "rgb")]
        noise_profile: String,
        /// Markov action script (JSON); organizes clips into videos.
        #[arg(long)]
        context_script: Option<PathBuf>,
        /// Video count when generating from a context script.
        #[arg(long, default_value_t = 100)]
        n_videos: usize,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Stage one: train the video backbone with SGD.
    TrainBackbone {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// none, w2 or w3.
        #[arg(long, default_value = "w3")]
        attention: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Stage two: train the context network with Adam on a frozen
    /// first-stage prediction dump.
    TrainCtxtnet {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a checkpoint over a dataset and write the prediction file.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Context-network checkpoint; attaches action scores.
        #[arg(long)]
        ctxtnet: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge prediction files by weighted logit averaging.
    Ensemble {
        /// Prediction files to merge.
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Comma-separated nonnegative weights, one per input (default equal).
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction file against dataset ground truth.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the machine-readable report here as well.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Finite-difference checks for every differentiable operation; exits
    /// nonzero iff any check fails.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full toy experiment: attention and temporal-context comparisons.
    Experiment {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        quiet: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::OutputExists(_) => EXIT_FS_CONFLICT,
        Error::VocabMismatch { .. } => EXIT_VOCAB_MISMATCH,
        Error::Config(_) | Error::EmptyInput(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn validate_input_paths(paths: &[&Path]) -> Result<(), Error> {
    for p in paths {
        if !p.exists() {
            return Err(Error::Config(format!("path {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData {
            seed,
            out,
            n_clips,
            split,
            noise_profile,
            context_script,
            n_videos,
            force,
            config,
        } => {
            let cfg = config.resolve()?.with_overrides(&[format!("seed={seed}")])?;
            let profile = NoiseProfile::parse(&noise_profile)?;
            let script = match &context_script {
                Some(path) => {
                    validate_input_paths(&[path])?;
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let script: MarkovActionScript = serde_json::from_str(&text)?;
                    Some(script)
                }
                None => None,
            };
            let n = pipeline::gen_data(
                &cfg,
                &out,
                &split,
                n_clips,
                profile,
                script.as_ref(),
                n_videos,
                force,
                ExecMode::Parallel,
            )?;
            println!("wrote {n} clips to {}", out.display());
            Ok(())
        }
        Command::TrainBackbone {
            data,
            out,
            attention,
            seed,
            epochs,
            config,
        } => {
            validate_input_paths(&[&data])?;
            let mut overrides = Vec::new();
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            if let Some(e) = epochs {
                overrides.push(format!("epochs={e}"));
            }
            let cfg = config.resolve()?.with_overrides(&overrides)?;
            let variant = AttentionVariant::parse(&attention)?;
            pipeline::train_backbone_cmd(&data, &out, variant, &cfg, ExecMode::Parallel, |log| {
                println!(
                    "epoch {:>3}: loss {:.4} verb {:.3} noun {:.3}",
                    log.epoch, log.loss, log.verb_accuracy, log.noun_accuracy
                );
            })?;
            println!("checkpoint written to {}", out.display());
            Ok(())
        }
        Command::TrainCtxtnet {
            predictions,
            data,
            out,
            seed,
            config,
        } => {
            validate_input_paths(&[&predictions, &data])?;
            let mut overrides = Vec::new();
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = config.resolve()?.with_overrides(&overrides)?;
            let losses = pipeline::train_ctxtnet_cmd(&predictions, &data, &out, &cfg)?;
            for (epoch, loss) in losses.iter().enumerate() {
                println!("epoch {epoch:>3}: loss {loss:.4}");
            }
            println!("checkpoint written to {}", out.display());
            Ok(())
        }
        Command::Predict {
            data,
            checkpoint,
            ctxtnet,
            out,
        } => {
            validate_input_paths(&[&data, &checkpoint])?;
            if let Some(c) = &ctxtnet {
                validate_input_paths(&[c])?;
            }
            pipeline::predict_cmd(&data, &checkpoint, ctxtnet.as_deref(), &out, ExecMode::Parallel)?;
            println!("predictions written to {}", out.display());
            Ok(())
        }
        Command::Ensemble { inputs, weights, out } => {
            for p in &inputs {
                validate_input_paths(&[p])?;
            }
            let weights = match weights {
                Some(s) => s
                    .split(',')
                    .map(|w| {
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad weight {w:?}")))
                    })
                    .collect::<Result<Vec<f64>, Error>>()?,
                None => vec![1.0; inputs.len()],
            };
            let mut loaded: Vec<(String, PredictionFile)> = inputs
                .iter()
                .map(|p| {
                    let tag = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().to_string())
                        .unwrap_or_else(|| p.display().to_string());
                    PredictionFile::load(p).map(|f| (tag, f))
                })
                .collect::<Result<_, Error>>()?;
            // Deterministic modality order regardless of argument order.
            let mut order: Vec<usize> = (0..loaded.len()).collect();
            order.sort_by(|&a, &b| loaded[a].0.cmp(&loaded[b].0));
            let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
            loaded = order.into_iter().map(|i| loaded[i].clone()).collect();
            pipeline::ensemble_cmd(&loaded, &weights, &out)?;
            println!("ensemble written to {}", out.display());
            Ok(())
        }
        Command::Evaluate {
            predictions,
            data,
            json_out,
        } => {
            validate_input_paths(&[&predictions, &data])?;
            let name = predictions
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "model".into());
            let row = pipeline::evaluate_cmd(&predictions, &data, &name)?;
            print!("{}", render_attention_table(std::slice::from_ref(&row)));
            if let Some(path) = json_out {
                let mut report = ExperimentReport::new();
                report.attention.push(row);
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .map_err(|e| Error::io(&path, e))?;
                println!("json report written to {}", path.display());
            }
            Ok(())
        }
        Command::Gradcheck { seed } => {
            let mut all_ok = true;
            for case in gradsuite::full_suite(seed) {
                println!("{:<24} {}", case.name, case.report);
                all_ok &= case.report.passed();
            }
            if all_ok {
                Ok(())
            } else {
                Err(Error::Diverged("gradient checks failed".into()))
            }
        }
        Command::Experiment {
            out,
            force,
            quiet,
            config,
        } => {
            let cfg = config.resolve()?;
            let report = run_experiment(&cfg, &out, force, ExecMode::Parallel, |line| {
                if !quiet {
                    println!("{line}");
                }
            })?;
            print!("{}", w3kit::report::render_report(&report));
            println!("report written to {}", out.join("report.txt").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
