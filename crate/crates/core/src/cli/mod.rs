//! The `hydrosense` command line.
//!
//! Every command except `report` writes its outputs atomically under
//! `--out` and finishes with a hash-verified `manifest_<command>.json`.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::dataio::{
    dataset_files, generate_synthetic, load_dataset, BasinRecord, DatasetLayout, FeatureCatalog,
    Standardizer,
};
use crate::sensitivity::{
    exclusions_csv, read_report_csv, render_text_summary, report_csv, run_pipeline, summarize,
    summary_csv, top_group_csv,
};
use crate::training::{evaluate_nse, log_csv, train};

pub use config::RunConfig;
pub use output::{sha256_hex, write_atomic, OutputSet, RunManifest};

pub const LOG_ENV: &str = "HYDROSENSE_LOG";

#[derive(Parser, Debug)]
#[command(
    name = "hydrosense",
    version,
    about = "EA-LSTM rainfall-runoff model and static-feature sensitivity analysis"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Fit standardization statistics and train a model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Feature catalog (default: <data>/catalog.csv).
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Per-basin NSE on the validation range.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Flow-regime static-feature sensitivity reports.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Catalog supplying feature groups; names must match the checkpoint.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Print top features per regime from a sensitivity output directory.
    Report {
        dir: PathBuf,
        /// Also write report.txt and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Run<'a> {
    command: &'static str,
    common: &'a Common,
    cfg: RunConfig,
    clock: Instant,
    inputs: Vec<String>,
    epoch_wall_seconds: Option<Vec<f64>>,
}

impl<'a> Run<'a> {
    fn start(command: &'static str, common: &'a Common) -> anyhow::Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        Ok(Self {
            command,
            common,
            cfg,
            clock: Instant::now(),
            inputs: Vec::new(),
            epoch_wall_seconds: None,
        })
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    fn finish(self, outputs: OutputSet) -> anyhow::Result<()> {
        let out = &self.common.out;
        let artifacts = outputs
            .commit(out)
            .with_context(|| format!("writing outputs to {}", out.display()))?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.common.config.as_ref().map(|p| p.display().to_string()),
            seed: Some(self.cfg.seed),
            inputs: self.inputs,
            out_dir: out.display().to_string(),
            artifacts,
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            epoch_wall_seconds: self.epoch_wall_seconds,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        finish_manifest(&manifest)
    }
}

fn finish_manifest(manifest: &RunManifest) -> anyhow::Result<()> {
    let out = Path::new(&manifest.out_dir);
    let path = manifest.write(out)?;
    RunManifest::read(&path)?
        .verify(out)
        .context("manifest verification")?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load_catalog(explicit: Option<&Path>, data: &Path) -> anyhow::Result<(PathBuf, FeatureCatalog)> {
    let path = explicit.map_or_else(|| DatasetLayout::new(data).catalog(), Path::to_path_buf);
    let catalog = FeatureCatalog::load(&path)?;
    Ok((path, catalog))
}

fn load_basins(data: &Path, catalog: &FeatureCatalog) -> anyhow::Result<Vec<BasinRecord>> {
    let basins = load_dataset(data, catalog)?;
    if basins.is_empty() {
        bail!("no basins in {}", data.display());
    }
    Ok(basins)
}

/// Catalog for a checkpoint: the stored one, or an explicit file whose
/// names match it in order (its groups win).
fn checkpoint_catalog(ck: &Checkpoint, explicit: Option<&Path>) -> anyhow::Result<FeatureCatalog> {
    let Some(path) = explicit else {
        return Ok(ck.catalog.clone());
    };
    let catalog = FeatureCatalog::load(path)?;
    if !catalog.names().eq(ck.catalog.names()) {
        bail!(
            "catalog {} does not list the checkpoint's static features in order",
            path.display()
        );
    }
    Ok(catalog)
}

pub fn cmd_synth(common: &Common) -> anyhow::Result<()> {
    let run = Run::start("synth", common)?;
    let (basins, catalog) = generate_synthetic(&run.cfg.synth, run.cfg.seed)?;
    let mut outputs = OutputSet::new();
    for (rel, text) in dataset_files(&catalog, &basins) {
        outputs.add(rel.to_string_lossy().replace('\\', "/"), text);
    }
    log::info!("synthesized {} basins", basins.len());
    run.finish(outputs)
}

pub fn cmd_train(common: &Common, data: &Path, catalog: Option<&Path>) -> anyhow::Result<()> {
    let mut run = Run::start("train", common)?;
    let (catalog_path, catalog) = load_catalog(catalog, data)?;
    run.input(data);
    run.input(&catalog_path);
    let basins = load_basins(data, &catalog)?;
    for b in &basins {
        b.check_min_length(run.cfg.lookback)?;
    }
    let (train_range, valid_range) = run.cfg.split(&basins[0].full_range())?;
    let train_cfg = run.cfg.train_config(train_range, valid_range)?;
    let standardizer = Standardizer::fit(&basins, &catalog, Some(&train_range))?;
    let standardized = basins
        .iter()
        .map(|b| standardizer.apply(b))
        .collect::<crate::Result<Vec<_>>>()?;
    let outcome = train(&train_cfg, &standardized)?;
    log::info!("best validation epoch {}", outcome.best_epoch);
    run.epoch_wall_seconds = Some(outcome.log.iter().map(|e| e.wall_seconds).collect());
    let ck = Checkpoint::new(outcome.params, train_cfg.lookback, catalog, standardizer)?;
    let mut outputs = OutputSet::new();
    outputs.add("model.ckpt", ck.to_text()?);
    outputs.add("training_log.csv", log_csv(&outcome.log));
    run.finish(outputs)
}

pub fn cmd_evaluate(common: &Common, data: &Path, checkpoint: &Path) -> anyhow::Result<()> {
    let mut run = Run::start("evaluate", common)?;
    let ck = Checkpoint::load(checkpoint)?;
    run.input(data);
    run.input(checkpoint);
    let basins = load_basins(data, &ck.catalog)?;
    let (_, valid_range) = run.cfg.split(&basins[0].full_range())?;
    let mut csv = String::from("basin_id,nse\n");
    for b in &basins {
        let z = ck.standardizer.apply(b)?;
        let nse = evaluate_nse(
            &ck.params,
            &ck.standardizer,
            &z,
            b.discharge(),
            ck.lookback,
            &valid_range,
        )?;
        log::info!("{}: NSE {nse:.3}", b.id());
        csv.push_str(&format!("{},{nse}\n", b.id()));
    }
    let mut outputs = OutputSet::new();
    outputs.add("evaluation.csv", csv);
    run.finish(outputs)
}

pub fn cmd_sensitivity(
    common: &Common,
    data: &Path,
    checkpoint: &Path,
    catalog: Option<&Path>,
) -> anyhow::Result<()> {
    let mut run = Run::start("sensitivity", common)?;
    let ck = Checkpoint::load(checkpoint)
        .with_context(|| format!("loading {}", checkpoint.display()))?;
    let catalog = checkpoint_catalog(&ck, catalog)?;
    run.input(data);
    run.input(checkpoint);
    let basins = load_basins(data, &catalog)?;
    let range = run.cfg.sensitivity_range()?;
    let result = run_pipeline(
        &ck.params,
        &ck.standardizer,
        &basins,
        ck.lookback,
        range.as_ref(),
        &catalog,
    )?;
    for e in &result.exclusions {
        log::warn!("excluded {} ({:?}): {}", e.basin_id, e.regime, e.reason);
    }
    let mut outputs = OutputSet::new();
    outputs.add("sensitivity.csv", report_csv(&result.reports, &catalog));
    outputs.add("summary.csv", summary_csv(&result.summary, &catalog));
    outputs.add("top_groups.csv", top_group_csv(&result.reports));
    outputs.add("exclusions.csv", exclusions_csv(&result.exclusions));
    run.finish(outputs)
}

/// Renders the text summary of `dir/sensitivity.csv`.
pub fn report_text(dir: &Path) -> anyhow::Result<String> {
    let path = dir.join("sensitivity.csv");
    if !path.is_file() {
        bail!("no sensitivity.csv in {}", dir.display());
    }
    let (reports, catalog) = read_report_csv(&path)?;
    Ok(render_text_summary(
        &summarize(&reports, &catalog),
        &catalog,
        5,
    ))
}

pub fn cmd_report(dir: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let clock = Instant::now();
    let text = report_text(dir)?;
    print!("{text}");
    if let Some(out) = out {
        let mut outputs = OutputSet::new();
        outputs.add("report.txt", text);
        let manifest = RunManifest {
            command: "report".into(),
            config: None,
            seed: None,
            inputs: vec![dir.join("sensitivity.csv").display().to_string()],
            out_dir: out.display().to_string(),
            artifacts: outputs.commit(out)?,
            wall_seconds: clock.elapsed().as_secs_f64(),
            epoch_wall_seconds: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        finish_manifest(&manifest)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let run = || match &cli.command {
        Command::Synth { common } => cmd_synth(common),
        Command::Train {
            common,
            data,
            catalog,
        } => cmd_train(common, data, catalog.as_deref()),
        Command::Evaluate {
            common,
            data,
            checkpoint,
        } => cmd_evaluate(common, data, checkpoint),
        Command::Sensitivity {
            common,
            data,
            checkpoint,
            catalog,
        } => cmd_sensitivity(common, data, checkpoint, catalog.as_deref()),
        Command::Report { dir, out } => cmd_report(dir, out.as_deref()),
    };
    match cli.threads {
        Some(0) => bail!("--threads must be positive"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(run),
        None => run(),
    }
}

/// Binary entry point.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
