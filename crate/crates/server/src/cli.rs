//! Command-line front end. Every preparation step the service relies on is
//! available headless.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use styleprobe::classifier::{load_model, save_model, train, TrainConfig};
use styleprobe::config::WorkbenchConfig;
use styleprobe::directions::{fit_direction, sample_latent_dataset, save_direction};
use styleprobe::generator::Generator;
use styleprobe::scenario::{export_dataset, find_scenario, import_dataset, make_dataset};

use crate::state::AppState;

#[derive(Debug, Parser)]
#[command(
    name = "styleprobe",
    version,
    about = "Probe image classifiers with a style-based generator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Workbench TOML file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> anyhow_like::Result<WorkbenchConfig> {
        let mut cfg = match &self.config {
            Some(path) => WorkbenchConfig::load(path)?,
            None => WorkbenchConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides the configured port and STYLEPROBE_PORT.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Render a labeled dataset to PNG files plus a manifest.
    PrepareDataset {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "toy-faces")]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        /// Label/confounder coupling in [0, 1].
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        confounder: Option<String>,
        /// Store age brackets instead of binary labels.
        #[arg(long)]
        ordinal: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a classifier on an exported dataset.
    TrainClassifier {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "toy-faces")]
        scenario: String,
        /// Model file to write (`.spm`).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a latent edit direction for a trained classifier.
    FitDirection {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        model: PathBuf,
        /// Direction file to write (`.json`).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "score")]
        attribute: String,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Minimal boxed-error result for command bodies.
mod anyhow_like {
    pub type Result<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;
}

pub fn run(cli: Cli) -> anyhow_like::Result<()> {
    match cli.command {
        Command::Serve { config, port } => {
            let mut cfg = config.load()?;
            if let Some(port) = port {
                cfg.service.port = port;
            }
            serve(cfg)
        }
        Command::PrepareDataset {
            config,
            scenario,
            out,
            n_train,
            n_val,
            rho,
            confounder,
            ordinal,
            seed,
        } => {
            let cfg = config.load()?;
            let mut data_cfg = cfg.dataset.clone();
            data_cfg.n_train = n_train.unwrap_or(data_cfg.n_train);
            data_cfg.n_val = n_val.unwrap_or(data_cfg.n_val);
            data_cfg.confound_rho = rho.unwrap_or(data_cfg.confound_rho);
            data_cfg.confounder = confounder.or(data_cfg.confounder);
            data_cfg.ordinal |= ordinal;
            data_cfg.seed = seed.unwrap_or(data_cfg.seed);
            let scenarios = cfg.scenarios();
            let scene = find_scenario(&scenarios, &scenario)?;
            let generator = Generator::new(cfg.generator.clone())?;
            let dataset = make_dataset(&generator, scene, &data_cfg)?;
            export_dataset(&dataset, scene, &out)?;
            print_json(json!({
                "scenario": scene.id,
                "out": out,
                "n_train": dataset.train.len(),
                "n_val": dataset.val.len(),
            }));
            Ok(())
        }
        Command::TrainClassifier {
            config,
            dataset,
            scenario,
            out,
            epochs,
            lr,
            seed,
        } => {
            let cfg = config.load()?;
            let scenarios = cfg.scenarios();
            let scene = find_scenario(&scenarios, &scenario)?;
            let data = import_dataset(&dataset, scene)?;
            let train_cfg = TrainConfig {
                epochs: epochs.unwrap_or(cfg.training.epochs),
                lr: lr.unwrap_or(cfg.training.lr),
                seed: seed.unwrap_or(cfg.training.seed),
                ..cfg.training.clone()
            };
            let (model, report) = train(&data, &train_cfg)?;
            ensure_parent(&out)?;
            save_model(&model, &out)?;
            print_json(json!({
                "out": out,
                "selected_epoch": report.selected_epoch,
                "final": report.final_metrics(),
                "epochs": report.epochs,
            }));
            Ok(())
        }
        Command::FitDirection {
            config,
            model,
            out,
            attribute,
            n_train,
            n_val,
            seed,
        } => {
            let cfg = config.load()?;
            let model = load_model(&model)?;
            let scenarios = cfg.scenarios();
            let scene = find_scenario(&scenarios, &model.scenario)?;
            let generator = Generator::new(cfg.generator.clone())?;
            let d = &cfg.directions;
            let data = sample_latent_dataset(
                &generator,
                &model,
                scene,
                n_train.unwrap_or(d.n_train),
                n_val.unwrap_or(d.n_val),
                seed.unwrap_or(d.seed),
            )?;
            let direction = fit_direction(&data, &attribute, &scene.id, &d.fit)?;
            ensure_parent(&out)?;
            save_direction(&direction, &out)?;
            print_json(json!({ "out": out, "metrics": direction.metrics }));
            Ok(())
        }
    }
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p),
        _ => Ok(()),
    }
}

fn print_json(value: serde_json::Value) {
    println!("{value}");
}

fn serve(cfg: WorkbenchConfig) -> anyhow_like::Result<()> {
    let addr = format!("{}:{}", cfg.service.host, cfg.service.port);
    let state = AppState::load(cfg)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        // Tests and scripts read the bound address from this line.
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, crate::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
