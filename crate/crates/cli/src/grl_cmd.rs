//! `grl-demo`: adversarial training on synthetic data, then a post-hoc probe
//! of the learned representations.

use std::path::PathBuf;

use clap::Args;
use fairaudit_core::grl::{
    encode, gen_synthetic, posthoc_probe, train_adversarial, AdvSetup, Architecture, GrlConfig, PosthocConfig,
    PosthocReport, SyntheticDataSpec, TrainReport,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{read_config, to_json, write_all};

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct DemoConfig {
    data: SyntheticDataSpec,
    architecture: Architecture,
    training: GrlConfig,
    posthoc: PosthocConfig,
}

#[derive(Debug, Args)]
pub struct GrlDemoArgs {
    /// JSON with optional `data`, `architecture`, `training` and `posthoc` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `training.lambda`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct DemoReport {
    training: TrainReport,
    posthoc: PosthocReport,
}

pub fn grl_demo(args: GrlDemoArgs) -> CliResult<()> {
    let mut config: DemoConfig = match &args.config {
        Some(path) => read_config(path)?,
        None => DemoConfig::default(),
    };
    if let Some(l) = args.lambda {
        config.training.lambda = l;
    }
    if let Some(s) = args.seed {
        config.data.seed = s;
        config.training.seed = s;
        config.posthoc.seed = s;
    }
    let dims = config.data.task_dims + config.data.protected_dims;
    if config.architecture.encoder.first() != Some(&dims) {
        return Err(CliError::Usage(format!(
            "encoder input width must equal the {dims} synthetic feature dimensions"
        )));
    }

    let data = gen_synthetic(&config.data)?;
    let mut setup = AdvSetup::new(&config.architecture, config.training.seed)?;
    let training = train_adversarial(&data, &mut setup, &config.training)?;
    let reps = encode(&setup, &data.features)?;
    let posthoc = posthoc_probe(&reps, &data.protected, &config.posthoc)?;

    let summary = format!(
        "lambda {}: task accuracy {:.4}, adversary accuracy {} (chance {:.4})\npost-hoc probe on the representations:\n{posthoc}",
        training.lambda,
        training.final_task_accuracy,
        training
            .final_adversary_accuracy
            .map_or("n/a".to_string(), |a| format!("{a:.4}")),
        training.adversary_chance,
    );
    let report = DemoReport { training, posthoc };
    write_all(
        &args.out,
        &[
            ("grl_report.json".to_string(), to_json(&report)),
            ("grl_summary.txt".to_string(), summary.clone()),
        ],
    )?;
    print!("{summary}");
    Ok(())
}
