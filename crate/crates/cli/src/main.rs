use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memeforge_cli::config::load_lexicon;
use memeforge_cli::{
    cmd_eval, cmd_features, cmd_ingest, cmd_ocr, cmd_predict, cmd_report, cmd_synth, cmd_train, parse_families, CaptionInput,
    CliError, EvalKind, Result, RunConfig,
};
use memeforge_core::synth::SynthConfig;
use memeforge_core::ModelKind;

#[derive(Parser)]
#[command(name = "memeforge", version, about = "Classify code-switched memes as non-offensive, satirical or hate-inducing")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a JSONL manifest from an image directory and a labels CSV.
    Ingest {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill in captions, either from an offline captions file or the OCR service.
    Ocr {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Offline captions JSONL; overrides the configured OCR mode.
        #[arg(long)]
        offline: Option<PathBuf>,
        /// Write the updated manifest here instead of in place.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute baseline image features into a CSV.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "glcm,colorfulness,tamura,face")]
        families: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on the whole manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// fusion, cnn_only or lstm_only.
        #[arg(long, default_value = "fusion")]
        kind: String,
        /// Embedding variant, e.g. glove+fasttext; defaults to the first configured.
        #[arg(long)]
        embedding: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a classifier and write report.json, report.txt and predictions.csv.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// fusion, cnn, lstm, svm or rf.
        #[arg(long)]
        kind: String,
        /// Feature families for svm/rf, comma separated (default: all).
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, conflicts_with = "ocr")]
        caption: Option<String>,
        /// Obtain the caption through OCR as configured.
        #[arg(long)]
        ocr: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Class distribution, annotator agreement and multilingual index.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a labelled synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { images, labels, out } => {
            let m = cmd_ingest(&images, &labels, &out)?;
            println!("{} records -> {}", m.records.len(), out.display());
        }
        Command::Ocr { manifest, config, offline, out } => {
            let cfg = load_config(config.as_deref(), None)?;
            let s = cmd_ocr(&manifest, &cfg, offline.as_deref(), out.as_deref())?;
            println!("{} of {} records captioned, {} warnings", s.filled, s.records, s.warnings.len());
        }
        Command::Features { manifest, families, out } => {
            let t = cmd_features(&manifest, &parse_families(&families)?, &out)?;
            println!("{} rows, {} skipped -> {}", t.rows.len(), t.skipped.len(), out.display());
        }
        Command::Train { manifest, config, kind, embedding, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let kind: ModelKind = kind.parse().map_err(|e: memeforge_core::nn::NnError| CliError::Usage(e.to_string()))?;
            let s = cmd_train(&manifest, &cfg, kind, embedding.as_deref(), &out)?;
            println!(
                "{} trained for {} epochs, training accuracy {:.4} -> {} ({})",
                kind.as_str(),
                s.epochs,
                s.train_accuracy,
                s.checkpoint.display(),
                s.history.display()
            );
        }
        Command::Eval { manifest, config, kind, family, k, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let kind: EvalKind = kind.parse()?;
            let families = match family {
                Some(f) => parse_families(&f)?,
                None => Vec::new(),
            };
            let report = cmd_eval(&manifest, &cfg, kind, &families, k, &out)?;
            print!("{}", report.to_text());
        }
        Command::Predict { model, image, caption, ocr, config } => {
            let cfg = load_config(config.as_deref(), None)?;
            let input = match (&caption, ocr) {
                (Some(c), _) => Some(CaptionInput::Text(c)),
                (None, true) => Some(CaptionInput::Ocr),
                (None, false) => None,
            };
            print!("{}", cmd_predict(&model, &image, input, &cfg)?.to_text());
        }
        Command::Report { manifest, config, json } => {
            let cfg = load_config(config.as_deref(), None)?;
            let report = cmd_report(&manifest, &load_lexicon(cfg.lexicon_dir.as_deref())?)?;
            print!("{}", report.to_text());
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report)? + "\n";
                std::fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            }
        }
        Command::Synth { out, per_class, size, seed } => {
            if size < 32 || per_class == 0 {
                return Err(CliError::Usage("synth needs --size >= 32 and --per-class >= 1".into()));
            }
            let cfg = SynthConfig { per_class, width: size, height: size, seed, ..Default::default() };
            let s = cmd_synth(&out, &cfg)?;
            println!("{} memes -> {} (config {})", s.memes, out.display(), s.config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
