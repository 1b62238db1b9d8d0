//! Batch pipeline behind the `vtgrid` binary: gridify frame directories, prompt
//! a backend, score the replies, and account for tokens.
//!
//! Every subcommand writes under `--out`:
//!
//! ```text
//! out/grids/<video_id>/wNNNN.png   composed grids
//! out/grids/manifest.jsonl         one GridRecord per grid, ordered by (video_id, window_index)
//! out/grids/samples.jsonl          frame times per video
//! out/prompts.jsonl                the prompt sent for every sample
//! out/predictions.jsonl            one record per answered sample (appended, resumable)
//! out/eval_report.json, per_sample.csv
//! out/token_report.json
//! out/instructions.jsonl
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod synth;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{
    cmd_emit_dataset, cmd_estimate_tokens, cmd_evaluate, cmd_gridify, cmd_run, PredictionRecord,
};
pub use config::{BackendKind, DatasetKind, RunArgs, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vtgrid", version, about = "Grid-based video temporal grounding pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose grid images and the grid manifest.
    Gridify(RunArgs),
    /// Prompt the backend for every annotation and append predictions.
    Run(RunArgs),
    /// Score predictions against the annotations.
    Evaluate(RunArgs),
    /// Token budgets of the gridified videos.
    EstimateTokens(RunArgs),
    /// Write supervised instruction records.
    EmitDataset(RunArgs),
    /// Write a seeded corpus of marker videos with matching annotations.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "synth")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub videos: usize,
    #[arg(long, default_value_t = 60)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialize")
}

/// Runs one subcommand and returns what it prints on stdout.
pub fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Gridify(a) => Ok(to_json(&cmd_gridify(&RunConfig::from_args(a)?)?)),
        Command::Run(a) => Ok(to_json(&cmd_run(&RunConfig::from_args(a)?)?)),
        Command::Evaluate(a) => Ok(to_json(&cmd_evaluate(&RunConfig::from_args(a)?)?)),
        Command::EstimateTokens(a) => Ok(to_json(&cmd_estimate_tokens(&RunConfig::from_args(a)?)?)),
        Command::EmitDataset(a) => {
            let n = cmd_emit_dataset(&RunConfig::from_args(a)?)?;
            Ok(to_json(&serde_json::json!({ "instructions": n })))
        }
        Command::Synth(a) => {
            let plan = synth::plan_marker_corpus(a.videos, a.max_frames, a.seed);
            let annotations = synth::write_marker_corpus(&a.out, &plan)?;
            Ok(to_json(&serde_json::json!({
                "videos": plan.len(),
                "frames_dir": a.out.join("frames"),
                "annotations": annotations,
            })))
        }
    }
}
