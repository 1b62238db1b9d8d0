use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vtgrid::client::{run_bounded, Backend, HttpBackend, MockBackend};
use vtgrid::eval::{
    evaluate, frames_to_seconds_with, load_activitynet_captions, load_charades_sta,
    parse_grounding_answer_as, EvalReport, GroundingSample, TemporalInterval,
};
use vtgrid::gridify::{approx_text_tokens, compose_all, estimate_tokens_from, TokenBudget};
use vtgrid::ingest::{
    decode_to_frame_directory, load_frame_directory, sample_uniform, FrameSequence, SampleTarget,
};
use vtgrid::manifest::{
    grid_image_rel_path, read_manifest, read_manifest_located, read_sample_maps, write_jsonl,
    GridRecord, SampleMap, MANIFEST_FILE, SAMPLE_MAP_FILE,
};
use vtgrid::prompt::{
    assemble_interleaved, composite_timestamp, emit_instruction_dataset, render_vtg_query,
    PromptSequence,
};
use vtgrid::TimeUnit;

use crate::config::{BackendKind, DatasetKind, RunConfig};
use crate::error::{io_error, CliError};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const PER_SAMPLE_FILE: &str = "per_sample.csv";
pub const TOKEN_REPORT_FILE: &str = "token_report.json";
pub const INSTRUCTIONS_FILE: &str = "instructions.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).expect("reports serialize");
    body.push('\n');
    fs::write(path, body).map_err(|e| io_error(path, e))
}

fn worker_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Other(format!("cannot start worker pool: {e}")))
}

/// Annotations named by the run, truncated to `limit`.
pub fn load_samples(cfg: &RunConfig) -> Result<Vec<GroundingSample>, CliError> {
    let path = cfg
        .annotations
        .as_deref()
        .ok_or_else(|| CliError::Config("--annotations is required".into()))?;
    let mut samples = match cfg.dataset {
        DatasetKind::Charades => {
            let loaded = load_charades_sta(path)?;
            if loaded.skipped > 0 {
                log::warn!("{}: skipped {} malformed lines", path.display(), loaded.skipped);
            }
            loaded.samples
        }
        DatasetKind::Activitynet => load_activitynet_captions(path)?,
    };
    if let Some(n) = cfg.limit {
        samples.truncate(n);
    }
    Ok(samples)
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_dir() == want_dirs {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Videos to process: those referenced by the annotations, or else every source found.
pub fn video_ids(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    if cfg.annotations.is_some() {
        let ids: BTreeSet<String> = load_samples(cfg)?.into_iter().map(|s| s.video_id).collect();
        return Ok(ids.into_iter().collect());
    }
    let (dir, dirs) = match (&cfg.frames_dir, &cfg.videos_dir) {
        (Some(d), _) => (d, true),
        (None, Some(d)) => (d, false),
        (None, None) => return Err(CliError::Config("one of --frames-dir or --videos-dir is required".into())),
    };
    let ids: BTreeSet<String> = sorted_entries(dir, dirs)?
        .iter()
        .filter_map(|p| if dirs { p.file_name() } else { p.file_stem() })
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    Ok(ids.into_iter().collect())
}

fn find_video_file(dir: &Path, video_id: &str) -> Result<PathBuf, CliError> {
    sorted_entries(dir, false)?
        .into_iter()
        .find(|p| p.file_stem().is_some_and(|s| s == video_id))
        .ok_or_else(|| CliError::Io(format!("no video file for `{video_id}` in {}", dir.display())))
}

/// Loads (decoding first if needed) and resamples one video.
pub fn load_video(cfg: &RunConfig, video_id: &str) -> Result<FrameSequence, CliError> {
    let seq = if let Some(frames_dir) = &cfg.frames_dir {
        let dir = frames_dir.join(video_id);
        if !dir.is_dir() {
            return Err(CliError::Io(format!("no frame directory {}", dir.display())));
        }
        load_frame_directory(&dir, None)?
    } else if let Some(videos_dir) = &cfg.videos_dir {
        let file = find_video_file(videos_dir, video_id)?;
        let decode_fps = match cfg.sampling {
            Some(SampleTarget::Fps(f)) => f,
            _ => 1.0,
        };
        let dir = cfg.out.join("frames").join(video_id);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        }
        decode_to_frame_directory(&cfg.decoder, &file, &dir, decode_fps)?;
        load_frame_directory(&dir, Some(decode_fps))?
    } else {
        return Err(CliError::Config("one of --frames-dir or --videos-dir is required".into()));
    };
    match cfg.sampling {
        Some(target) => Ok(sample_uniform(&seq, target)?),
        None => Ok(seq),
    }
}

fn gridify_video(cfg: &RunConfig, video_id: &str, grid_dir: &Path) -> Result<(Vec<GridRecord>, SampleMap), CliError> {
    let seq = load_video(cfg, video_id)?;
    let grids = compose_all(&seq, &cfg.grid)?;
    let video_dir = grid_dir.join(video_id);
    if video_dir.exists() {
        fs::remove_dir_all(&video_dir).map_err(|e| io_error(&video_dir, e))?;
    }
    create_dir(&video_dir)?;
    let mut records = Vec::with_capacity(grids.len());
    for grid in &grids {
        let rel = grid_image_rel_path(video_id, grid.plan().window_index);
        let path = grid_dir.join(&rel);
        grid.image().save(&path).map_err(|e| io_error(&path, e))?;
        records.push(GridRecord::from_grid(grid, rel));
    }
    Ok((records, SampleMap::from_sequence(&seq)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridifySummary {
    pub videos: usize,
    pub grids: usize,
    pub manifest: PathBuf,
}

/// Writes `grids/<video_id>/wNNNN.png`, `grids/manifest.jsonl` and `grids/samples.jsonl` under `out`.
pub fn cmd_gridify(cfg: &RunConfig) -> Result<GridifySummary, CliError> {
    let ids = video_ids(cfg)?;
    let grid_dir = cfg.grid_dir();
    create_dir(&grid_dir)?;
    let per_video: Vec<(Vec<GridRecord>, SampleMap)> = worker_pool(cfg.concurrency)?.install(|| {
        ids.par_iter()
            .map(|id| gridify_video(cfg, id, &grid_dir).map_err(|e| e.context(format!("video `{id}`"))))
            .collect::<Result<_, _>>()
    })?;
    let (records, maps): (Vec<Vec<GridRecord>>, Vec<SampleMap>) = per_video.into_iter().unzip();
    let records: Vec<GridRecord> = records.into_iter().flatten().collect();
    let manifest = grid_dir.join(MANIFEST_FILE);
    write_jsonl(&manifest, &records)?;
    write_jsonl(&grid_dir.join(SAMPLE_MAP_FILE), &maps)?;
    Ok(GridifySummary {
        videos: ids.len(),
        grids: records.len(),
        manifest,
    })
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub video_id: String,
    pub reply_text: String,
    /// Interval as parsed, in the unit the prompt asked for.
    pub interval: Option<TemporalInterval>,
    pub interval_s: Option<TemporalInterval>,
    pub latency_s: f64,
}

#[derive(Serialize)]
struct PromptLine<'a> {
    id: &'a str,
    prompt: &'a PromptSequence,
}

/// Reads predictions, dropping (and reporting) lines that do not parse, such as
/// a record cut short by an interrupted run.
pub fn read_predictions(path: &Path) -> Result<(Vec<PredictionRecord>, usize), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut records = Vec::new();
    let mut bad = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}:{}: dropping unreadable prediction: {e}", path.display(), i + 1);
                bad += 1;
            }
        }
    }
    Ok((records, bad))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub samples: usize,
    pub already_done: usize,
    pub requested: usize,
    pub completed: usize,
    pub backend_failures: usize,
    pub unparsed: usize,
}

fn grids_by_video(records: Vec<GridRecord>) -> BTreeMap<String, Vec<GridRecord>> {
    let mut by_video: BTreeMap<String, Vec<GridRecord>> = BTreeMap::new();
    for r in records {
        by_video.entry(r.video_id.clone()).or_default().push(r);
    }
    by_video
}

fn to_seconds(interval: &TemporalInterval, times: &[f64]) -> Option<TemporalInterval> {
    match interval.unit {
        TimeUnit::Seconds => Some(*interval),
        TimeUnit::Frames => frames_to_seconds_with(interval, times)
            .map_err(|e| log::warn!("cannot convert {interval:?} to seconds: {e}"))
            .ok(),
    }
}

fn make_backend(cfg: &RunConfig, located: &[GridRecord]) -> Result<Box<dyn Backend>, CliError> {
    Ok(match cfg.backend {
        BackendKind::Mock => Box::new(MockBackend::new(located.iter().cloned())),
        BackendKind::Http => {
            let mut bc = cfg.backend_config.clone();
            bc.audit_log.get_or_insert_with(|| cfg.out.join(AUDIT_FILE));
            Box::new(HttpBackend::new(bc)?)
        }
    })
}

/// Prompts every sample not yet in `predictions.jsonl` and appends the replies.
///
/// Grids are produced first when no manifest exists. Samples whose request
/// fails are left out of the file, so a later run retries them.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let samples = load_samples(cfg)?;
    let grid_dir = cfg.grid_dir();
    let manifest_path = grid_dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        log::info!("no grid manifest at {}; gridifying first", manifest_path.display());
        cmd_gridify(cfg)?;
    }
    let by_video = grids_by_video(read_manifest(&manifest_path)?);
    let times: HashMap<String, Vec<f64>> = read_sample_maps(&grid_dir.join(SAMPLE_MAP_FILE))?
        .into_iter()
        .map(|m| (m.video_id, m.times))
        .collect();

    let mut prompts = Vec::with_capacity(samples.len());
    let mut dumped = Vec::with_capacity(samples.len());
    for s in &samples {
        let records = by_video
            .get(&s.video_id)
            .ok_or_else(|| CliError::Other(format!("video `{}` has no grids in {}", s.video_id, manifest_path.display())))?;
        let query = render_vtg_query(&s.query, cfg.unit).map_err(|e| CliError::from(e).context(&s.id))?;
        let with_system = |p: PromptSequence| match &cfg.system_prompt {
            Some(sys) => p.with_system(sys.clone()),
            None => p,
        };
        let rel = with_system(assemble_interleaved(records, cfg.unit, &query)?);
        let located: Vec<GridRecord> = records.iter().map(|r| r.located(&grid_dir)).collect();
        prompts.push(with_system(assemble_interleaved(&located, cfg.unit, &query)?));
        dumped.push(rel);
    }
    create_dir(&cfg.out)?;
    let lines: Vec<PromptLine> = samples
        .iter()
        .zip(&dumped)
        .map(|(s, p)| PromptLine { id: &s.id, prompt: p })
        .collect();
    write_jsonl(&cfg.out.join(PROMPTS_FILE), &lines)?;

    let pred_path = cfg.out.join(PREDICTIONS_FILE);
    let mut done = HashSet::new();
    if pred_path.exists() {
        let (existing, bad) = read_predictions(&pred_path)?;
        if bad > 0 {
            write_jsonl(&pred_path, &existing)?;
        }
        done.extend(existing.into_iter().map(|r| r.id));
    }
    let todo: Vec<(&GroundingSample, &PromptSequence)> = samples
        .iter()
        .zip(&prompts)
        .filter(|(s, _)| !done.contains(&s.id))
        .collect();
    let mut summary = RunSummary {
        samples: samples.len(),
        already_done: samples.len() - todo.len(),
        requested: todo.len(),
        ..Default::default()
    };
    if todo.is_empty() {
        return Ok(summary);
    }

    let located: Vec<GridRecord> = by_video.values().flatten().map(|r| r.located(&grid_dir)).collect();
    let backend = make_backend(cfg, &located)?;
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&pred_path)
        .map_err(|e| io_error(&pred_path, e))?;
    let mut out = BufWriter::new(file);
    for chunk in todo.chunks(cfg.concurrency) {
        let replies = run_bounded(chunk, cfg.concurrency, |(_, prompt)| backend.send(prompt));
        for ((sample, _), reply) in chunk.iter().zip(replies) {
            let reply = match reply {
                Ok(r) => r,
                Err(e) => {
                    summary.backend_failures += 1;
                    log::warn!("{}: {e}", sample.id);
                    if summary.backend_failures > cfg.max_failures {
                        out.flush().map_err(|e| io_error(&pred_path, e))?;
                        return Err(CliError::Backend(format!(
                            "{} failed requests exceed the budget of {}; last ({}): {e}",
                            summary.backend_failures, cfg.max_failures, sample.id
                        )));
                    }
                    continue;
                }
            };
            let interval = parse_grounding_answer_as(&reply.text, cfg.unit).ok();
            let interval_s = interval.as_ref().and_then(|iv| {
                let times = times.get(&sample.video_id)?;
                to_seconds(iv, times)
            });
            if interval_s.is_none() {
                summary.unparsed += 1;
            }
            let record = PredictionRecord {
                id: sample.id.clone(),
                video_id: sample.video_id.clone(),
                reply_text: reply.text,
                interval,
                interval_s,
                latency_s: reply.latency_s,
            };
            serde_json::to_writer(&mut out, &record).expect("prediction serializes");
            out.write_all(b"\n").map_err(|e| io_error(&pred_path, e))?;
            summary.completed += 1;
        }
        out.flush().map_err(|e| io_error(&pred_path, e))?;
    }
    Ok(summary)
}

/// Scores `predictions.jsonl` against the annotations and writes the report files.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let samples = load_samples(cfg)?;
    let pred_path = cfg.out.join(PREDICTIONS_FILE);
    let (predictions, _) = read_predictions(&pred_path)?;
    let by_id: HashMap<String, Option<TemporalInterval>> =
        predictions.into_iter().map(|p| (p.id, p.interval_s)).collect();
    let report = evaluate(&samples, &by_id, &cfg.thresholds)?;
    write_json(&cfg.out.join(EVAL_REPORT_FILE), &report)?;
    let csv_path = cfg.out.join(PER_SAMPLE_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    report
        .write_per_sample_csv(file)
        .map_err(|e| io_error(&csv_path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoTokens {
    pub video_id: String,
    pub grids: usize,
    #[serde(flatten)]
    pub budget: TokenBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenReport {
    pub per_video: Vec<VideoTokens>,
    /// What `mToken` averages over: `samples` when annotations were given
    /// (each adds its question), otherwise `videos`.
    pub averaged_over: &'static str,
    #[serde(rename = "mToken")]
    pub m_token: f64,
}

/// Token budget per video from the grid manifest (image headers only) and the mean.
pub fn cmd_estimate_tokens(cfg: &RunConfig) -> Result<TokenReport, CliError> {
    let manifest = cfg.grid_dir().join(MANIFEST_FILE);
    let by_video = grids_by_video(read_manifest_located(&manifest)?);
    let mut per_video = Vec::with_capacity(by_video.len());
    for (video_id, records) in &by_video {
        let mut items = Vec::with_capacity(records.len());
        for r in records {
            let dims = image::image_dimensions(&r.image_path).map_err(|e| io_error(&r.image_path, e))?;
            items.push((dims, composite_timestamp(r, cfg.unit)));
        }
        per_video.push(VideoTokens {
            video_id: video_id.clone(),
            grids: records.len(),
            budget: estimate_tokens_from(items, &cfg.tokenizer)?,
        });
    }
    let (averaged_over, totals): (_, Vec<u64>) = if cfg.annotations.is_some() {
        let per: HashMap<&str, u64> = per_video.iter().map(|v| (v.video_id.as_str(), v.budget.grand_total)).collect();
        let mut totals = Vec::new();
        for s in load_samples(cfg)? {
            let video = per
                .get(s.video_id.as_str())
                .ok_or_else(|| CliError::Other(format!("video `{}` has no grids in {}", s.video_id, manifest.display())))?;
            totals.push(video + approx_text_tokens(&render_vtg_query(&s.query, cfg.unit)?));
        }
        ("samples", totals)
    } else {
        ("videos", per_video.iter().map(|v| v.budget.grand_total).collect())
    };
    let m_token = if totals.is_empty() {
        0.0
    } else {
        totals.iter().sum::<u64>() as f64 / totals.len() as f64
    };
    let report = TokenReport {
        per_video,
        averaged_over,
        m_token,
    };
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join(TOKEN_REPORT_FILE), &report)?;
    Ok(report)
}

/// Writes `instructions.jsonl`: one supervised example per annotation, answers in frames.
pub fn cmd_emit_dataset(cfg: &RunConfig) -> Result<usize, CliError> {
    let samples = load_samples(cfg)?;
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.video_id.as_str()).collect();
    let sequences: HashMap<String, FrameSequence> = worker_pool(cfg.concurrency)?.install(|| {
        ids.par_iter()
            .map(|id| {
                load_video(cfg, id)
                    .map(|seq| (id.to_string(), seq))
                    .map_err(|e| e.context(format!("video `{id}`")))
            })
            .collect::<Result<_, CliError>>()
    })?;
    let records = emit_instruction_dataset(&samples, &sequences, &cfg.grid)?;
    create_dir(&cfg.out)?;
    write_jsonl(&cfg.out.join(INSTRUCTIONS_FILE), &records)?;
    Ok(records.len())
}
