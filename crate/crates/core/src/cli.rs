//! Command-line pipeline: `synth`, `train`, `embed` and `eval`.
//!
//! Every command reads the same TOML run configuration. The run seed comes
//! from the top-level `seed` key when the config sets it, otherwise from
//! `--seed`, otherwise 0. `--out` and `--extension` override their config
//! counterparts when given. Dataset paths are relative to the config file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::contrast::{self, format_attention_trace, format_loss_trace, ContrastConfig, Problem, TrainOutput};
use crate::data::{self, Dataset, EmbeddingMatrix, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate_embeddings, EvalConfig, MetricsReport};
use crate::extensions::{train_gan, train_mixing, GanConfig, MixConfig};

pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const LOSS_TRACE_FILE: &str = "loss_trace.tsv";
pub const ATTENTION_TRACE_FILE: &str = "attention_trace.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";
pub const REPORT_TSV_FILE: &str = "report.tsv";
pub const REPORT_TEXT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    #[default]
    None,
    Mu,
    Gan,
}

/// Everything one run needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Dataset directory (or manifest file) in the on-disk format.
    pub dataset: Option<PathBuf>,
    /// Generated in memory when `dataset` is absent.
    pub synth: Option<SynthSpec>,
    pub extension: Extension,
    pub train: ContrastConfig,
    pub mix: MixConfig,
    pub gan: GanConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(d), Some(base)) = (cfg.dataset.as_mut(), path.parent()) {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.mix.validate()?;
        self.gan.validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if self.dataset.is_some() && self.synth.is_some() {
            return Err(Error::Config("give either dataset or synth, not both".into()));
        }
        Ok(())
    }

    /// Applies command-line overrides and seed precedence, and copies the
    /// run seed into the training and evaluation settings.
    pub fn resolve(mut self, flags: &Flags) -> Self {
        let seed = self.seed.or(flags.seed).unwrap_or(0);
        self.seed = Some(seed);
        self.train.seed = seed;
        self.eval.seed = seed;
        if let Some(out) = &flags.out {
            self.out = Some(out.clone());
        }
        if let Some(ext) = flags.extension {
            self.extension = ext;
        }
        self
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory: set `out` or pass --out".into()))
    }

    pub fn dataset(&self) -> Result<Dataset> {
        match (&self.dataset, &self.synth) {
            (Some(path), _) => data::load_dataset(path),
            (None, Some(spec)) => data::generate_synthetic(spec),
            (None, None) => Err(Error::Config("no dataset: set `dataset` or a [synth] table".into())),
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; a `seed` key in the config takes precedence.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Negative-sample extension.
    #[arg(long, global = true, value_enum)]
    pub extension: Option<Extension>,
}

#[derive(Debug, Parser)]
#[command(name = "cocontrast", version, about = "Cross-view co-contrastive embeddings for heterogeneous graphs")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic dataset to the output directory.
    Synth,
    /// Train and write embeddings, traces, checkpoint and config snapshot.
    Train,
    /// Recompute embeddings from a checkpoint.
    Embed {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate an embedding file against the dataset labels.
    Eval {
        /// Embedding file written by `train` or `embed`.
        #[arg(long)]
        embeddings: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let spec = cfg.synth.as_ref().ok_or_else(|| Error::Config("synth needs a [synth] table".into()))?;
    let out = cfg.out_dir()?;
    data::write_dataset(out, &data::generate_synthetic(spec)?)?;
    Ok(out.to_path_buf())
}

/// Trains with the configured extension and writes every artifact.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput> {
    let out = cfg.out_dir()?;
    let dataset = cfg.dataset()?;
    let (g, mps) = (&dataset.graph, &dataset.metapaths);
    let output = match cfg.extension {
        Extension::None => contrast::train(g, mps, &cfg.train)?,
        Extension::Mu => train_mixing(g, mps, &cfg.train, &cfg.mix)?,
        Extension::Gan => train_gan(g, mps, &cfg.train, &cfg.gan)?.output,
    };
    create_dir(out)?;
    data::save_embeddings(&out.join(EMBEDDINGS_FILE), &output.embeddings)?;
    write(&out.join(LOSS_TRACE_FILE), &format_loss_trace(&output.losses))?;
    write(&out.join(ATTENTION_TRACE_FILE), &format_attention_trace(&output.attention))?;
    output.params.save_checkpoint(&out.join(CHECKPOINT_FILE))?;
    data::save_config_snapshot(&out.join(CONFIG_SNAPSHOT_FILE), cfg)?;
    Ok(output)
}

pub fn cmd_embed(cfg: &RunConfig, checkpoint: &Path) -> Result<EmbeddingMatrix> {
    let out = cfg.out_dir()?;
    let dataset = cfg.dataset()?;
    let problem = Problem::new(&dataset.graph, &dataset.metapaths, &cfg.train)?;
    let mut store = ParamStore::new();
    for (name, value) in ParamStore::read_checkpoint(checkpoint)? {
        store.insert(name, value)?;
    }
    let eval = problem.evaluate(&store)?;
    let embeddings = EmbeddingMatrix {
        values: eval.z_mp,
        view: "mp".into(),
        epoch: 0,
        config_hash: cfg.train.fingerprint(),
    };
    create_dir(out)?;
    data::save_embeddings(&out.join(EMBEDDINGS_FILE), &embeddings)?;
    Ok(embeddings)
}

pub fn cmd_eval(cfg: &RunConfig, embeddings: &Path) -> Result<MetricsReport> {
    let dataset = cfg.dataset()?;
    let e = data::load_embeddings(embeddings)?;
    if e.values.nrows() != dataset.labels.len() {
        return Err(Error::Input(format!(
            "{} embedding rows for {} labelled target nodes",
            e.values.nrows(),
            dataset.labels.len()
        )));
    }
    let report = evaluate_embeddings(&e.values, &dataset.labels, &cfg.eval)?;
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write(&out.join(REPORT_TSV_FILE), &report.to_tsv())?;
        write(&out.join(REPORT_TEXT_FILE), &report.to_text())?;
    }
    Ok(report)
}

/// Runs one command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cocontrast: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = cfg.resolve(&cli.flags);
    match &cli.command {
        Command::Synth => {
            let dir = cmd_synth(&cfg)?;
            println!("wrote dataset to {}", dir.display());
        }
        Command::Train => {
            match cfg.extension {
                Extension::None => {}
                Extension::Mu => eprintln!("extension mu: {} mixed hard negatives per anchor and view", cfg.mix.k),
                Extension::Gan => eprintln!(
                    "extension gan: {} warm-up epochs, then up to {} outer iterations",
                    cfg.gan.k0, cfg.gan.max_outer
                ),
            }
            let output = cmd_train(&cfg)?;
            println!(
                "trained {} epochs, best epoch {}, artifacts in {}",
                output.epochs_run,
                output.best_epoch,
                cfg.out_dir()?.display()
            );
        }
        Command::Embed { checkpoint } => {
            let e = cmd_embed(&cfg, checkpoint)?;
            println!("wrote {} x {} embeddings", e.values.nrows(), e.values.ncols());
        }
        Command::Eval { embeddings } => {
            print!("{}", cmd_eval(&cfg, embeddings)?.to_text());
        }
    }
    Ok(())
}
