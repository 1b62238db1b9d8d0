//! Run configuration: command-line flags layered over an optional TOML or JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use vtgrid::client::{BackendConfig, ImageTransport};
use vtgrid::gridify::{parse_grid_config, GridConfig, TokenizerModel};
use vtgrid::ingest::{DecoderCommand, SampleTarget};
use vtgrid::TimeUnit;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Charades,
    Activitynet,
}

/// Flags shared by every subcommand. Each one may also come from the file given
/// by `--config` (same names, kebab-case); a flag on the command line wins.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// TOML or JSON file holding any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Grid layout and stride, e.g. `g43_s7` or `g4x3_s12`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Unit of prompt timestamps and expected answers.
    #[arg(long)]
    pub unit: Option<TimeUnit>,
    /// Resample every video to this frame rate.
    #[arg(long, conflicts_with = "frames")]
    pub fps: Option<f64>,
    /// Resample every video to this many frames.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Black separator between grid cells, in pixels.
    #[arg(long)]
    pub gutter: Option<u32>,

    /// Directory with one numbered-frame subdirectory per video.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Directory of video files (`<video_id>.<ext>`) to decode first.
    #[arg(long)]
    pub videos_dir: Option<PathBuf>,
    #[arg(skip)]
    pub decoder: Option<DecoderCommand>,
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Only use the first N annotations.
    #[arg(long)]
    pub limit: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for gridification and requests in flight for `run`.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, value_enum)]
    pub image_transport: Option<ImageTransportArg>,
    #[arg(long)]
    pub system_prompt: Option<String>,
    /// Backend failures tolerated before `run` aborts.
    #[arg(long)]
    pub max_failures: Option<usize>,

    /// Comma-separated IoU thresholds.
    #[arg(long, value_delimiter = ',')]
    pub iou: Option<Vec<f64>>,
    /// Pixels per visual token side.
    #[arg(long)]
    pub merge_px: Option<u32>,
    /// Constant tokens added per image.
    #[arg(long)]
    pub image_overhead: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageTransportArg {
    Inline,
    FileUrl,
}

macro_rules! prefer {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        RunArgs { config: $flags.config, $($field: $flags.$field.or($file.$field)),* }
    };
}

impl RunArgs {
    /// Fills every unset flag from `file`.
    pub fn layered_over(self, file: RunArgs) -> RunArgs {
        let flags = self;
        prefer!(flags, file;
            grid, unit, fps, frames, gutter, frames_dir, videos_dir, decoder, dataset,
            annotations, limit, out, concurrency, seed, backend, endpoint, model, api_key_env,
            timeout, retries, max_tokens, image_transport, system_prompt, max_failures, iou,
            merge_px, image_overhead)
    }
}

/// Reads a config file; `.json` is JSON, anything else TOML.
pub fn read_config_file(path: &Path) -> Result<RunArgs, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub unit: TimeUnit,
    pub sampling: Option<SampleTarget>,
    pub frames_dir: Option<PathBuf>,
    pub videos_dir: Option<PathBuf>,
    pub decoder: DecoderCommand,
    pub dataset: DatasetKind,
    pub annotations: Option<PathBuf>,
    pub limit: Option<usize>,
    pub out: PathBuf,
    pub concurrency: usize,
    pub seed: u64,
    pub backend: BackendKind,
    pub backend_config: BackendConfig,
    pub system_prompt: Option<String>,
    pub max_failures: usize,
    pub thresholds: Vec<f64>,
    pub tokenizer: TokenizerModel,
}

pub const DEFAULT_GRID: &str = "g43_s7";

fn existing(path: Option<PathBuf>, what: &str) -> Result<Option<PathBuf>, CliError> {
    match path {
        Some(p) if !p.exists() => Err(CliError::Config(format!("{what} {} does not exist", p.display()))),
        other => Ok(other),
    }
}

impl RunConfig {
    /// Merges the config file (if any) under the flags and validates the result.
    pub fn from_args(args: RunArgs) -> Result<Self, CliError> {
        let args = match &args.config {
            Some(path) => {
                let file = read_config_file(path)?;
                args.layered_over(file)
            }
            None => args,
        };
        Self::resolve(args)
    }

    pub fn resolve(a: RunArgs) -> Result<Self, CliError> {
        let grid_spec = a.grid.as_deref().unwrap_or(DEFAULT_GRID);
        let grid = parse_grid_config(grid_spec)
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_gutter(a.gutter.unwrap_or(0));
        let sampling = match (a.fps, a.frames) {
            (Some(_), Some(_)) => return Err(CliError::Config("--fps and --frames are exclusive".into())),
            (Some(f), None) if !(f.is_finite() && f > 0.0) => {
                return Err(CliError::Config(format!("--fps must be > 0, got {f}")))
            }
            (Some(f), None) => Some(SampleTarget::Fps(f)),
            (None, Some(0)) => return Err(CliError::Config("--frames must be at least 1".into())),
            (None, Some(n)) => Some(SampleTarget::Count(n)),
            (None, None) => None,
        };
        let annotations = existing(a.annotations, "annotations")?;
        let dataset = a.dataset.unwrap_or_else(|| match &annotations {
            Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => DatasetKind::Activitynet,
            _ => DatasetKind::Charades,
        });
        let concurrency = a.concurrency.unwrap_or(1);
        if concurrency == 0 {
            return Err(CliError::Config("--concurrency must be at least 1".into()));
        }
        let seed = a.seed.unwrap_or(0);
        let mut backend_config = BackendConfig {
            max_concurrent: concurrency,
            seed,
            ..BackendConfig::default()
        };
        if let Some(v) = a.endpoint {
            backend_config.endpoint_url = v;
        }
        if let Some(v) = a.model {
            backend_config.model_name = v;
        }
        backend_config.auth_token_env = a.api_key_env;
        if let Some(v) = a.timeout {
            backend_config.timeout_s = v;
        }
        if let Some(v) = a.retries {
            backend_config.retries = v;
        }
        backend_config.max_tokens = a.max_tokens.or(backend_config.max_tokens);
        if let Some(t) = a.image_transport {
            backend_config.image_transport = match t {
                ImageTransportArg::Inline => ImageTransport::Inline,
                ImageTransportArg::FileUrl => ImageTransport::FileUrl,
            };
        }
        let backend = a.backend.unwrap_or(BackendKind::Mock);
        if backend == BackendKind::Http {
            backend_config
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let thresholds = a.iou.unwrap_or_default();
        if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(CliError::Config(format!("IoU threshold {t} outside [0, 1]")));
        }
        let tokenizer = TokenizerModel {
            merge_px: a.merge_px.unwrap_or(TokenizerModel::default().merge_px),
            per_image_overhead: a.image_overhead.unwrap_or(0),
        };
        if tokenizer.merge_px == 0 {
            return Err(CliError::Config("--merge-px must be positive".into()));
        }
        Ok(Self {
            grid,
            unit: a.unit.unwrap_or_default(),
            sampling,
            frames_dir: existing(a.frames_dir, "frames directory")?,
            videos_dir: existing(a.videos_dir, "videos directory")?,
            decoder: a.decoder.unwrap_or_default(),
            dataset,
            annotations,
            limit: a.limit,
            out: a.out.unwrap_or_else(|| PathBuf::from("out")),
            concurrency,
            seed,
            backend,
            backend_config,
            system_prompt: a.system_prompt,
            max_failures: a.max_failures.unwrap_or(0),
            thresholds,
            tokenizer,
        })
    }

    pub fn grid_dir(&self) -> PathBuf {
        self.out.join("grids")
    }
}
