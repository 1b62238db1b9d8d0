//! Charades-STA (`<vid> <start> <end>##<sentence>` per line) and
//! ActivityNet Captions (JSON keyed by video id) annotation readers.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{EvalError, GroundingSample, TemporalInterval};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedAnnotations {
    pub samples: Vec<GroundingSample>,
    /// Lines that could not be read as annotations.
    pub skipped: usize,
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|source| EvalError::IoError {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Default)]
struct IdCounter(HashMap<String, usize>);

impl IdCounter {
    fn next(&mut self, video_id: &str) -> String {
        let n = self.0.entry(video_id.to_string()).or_default();
        let id = format!("{video_id}#{n}");
        *n += 1;
        id
    }
}

fn charades_line(line: &str) -> Option<(String, f64, f64, String)> {
    let (head, sentence) = line.split_once("##")?;
    let mut parts = head.split_whitespace();
    let video_id = parts.next()?.to_string();
    let start: f64 = parts.next()?.parse().ok()?;
    let end: f64 = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    let sentence = sentence.trim();
    if sentence.is_empty() {
        return None;
    }
    Some((video_id, start, end, sentence.to_string()))
}

/// Parses Charades-STA annotation text. Blank lines are ignored; malformed
/// lines are skipped and counted.
pub fn parse_charades_sta(text: &str) -> LoadedAnnotations {
    let mut out = LoadedAnnotations::default();
    let mut ids = IdCounter::default();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = charades_line(line).and_then(|(vid, s, e, sentence)| {
            TemporalInterval::seconds(s, e).ok().map(|gt| (vid, gt, sentence))
        });
        match parsed {
            Some((video_id, gt, query)) => out.samples.push(GroundingSample {
                id: ids.next(&video_id),
                video_id,
                query,
                gt,
                duration: None,
            }),
            None => {
                log::warn!("skipping malformed annotation line {}", lineno + 1);
                out.skipped += 1;
            }
        }
    }
    out
}

pub fn load_charades_sta(path: &Path) -> Result<LoadedAnnotations, EvalError> {
    Ok(parse_charades_sta(&read(path)?))
}

#[derive(Deserialize)]
struct AnetEntry {
    duration: f64,
    timestamps: Vec<[f64; 2]>,
    sentences: Vec<String>,
}

/// Parses ActivityNet Captions JSON. Videos come out in id order; each span is
/// clamped to `[0, duration]`.
pub fn parse_activitynet_captions(text: &str) -> Result<Vec<GroundingSample>, EvalError> {
    let entries: BTreeMap<String, AnetEntry> =
        serde_json::from_str(text).map_err(|e| EvalError::Json(e.to_string()))?;
    let mut samples = Vec::new();
    for (video_id, entry) in entries {
        let schema = |reason: String| EvalError::SchemaError {
            video_id: video_id.clone(),
            reason,
        };
        if entry.timestamps.len() != entry.sentences.len() {
            return Err(schema(format!(
                "{} timestamps but {} sentences",
                entry.timestamps.len(),
                entry.sentences.len()
            )));
        }
        if !(entry.duration.is_finite() && entry.duration > 0.0) {
            return Err(schema(format!("duration {} is not positive", entry.duration)));
        }
        for (n, ([s, e], sentence)) in entry.timestamps.iter().zip(&entry.sentences).enumerate() {
            if !(s.is_finite() && e.is_finite()) {
                return Err(schema(format!("timestamp {n} is not finite")));
            }
            let clamp = |v: f64| v.clamp(0.0, entry.duration);
            let gt = TemporalInterval::seconds(clamp(*s), clamp(*e))
                .map_err(|err| schema(err.to_string()))?;
            samples.push(GroundingSample {
                id: format!("{video_id}#{n}"),
                video_id: video_id.clone(),
                query: sentence.trim().to_string(),
                gt,
                duration: Some(entry.duration),
            });
        }
    }
    Ok(samples)
}

pub fn load_activitynet_captions(path: &Path) -> Result<Vec<GroundingSample>, EvalError> {
    parse_activitynet_captions(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charades_fixture() {
        let text = "AO8RW 0.0 6.9##a person is putting a book on a shelf.\n\
                    AO8RW 5.0 1.5##person begins to play on a phone.\n\
                    \n\
                    Y6R7T 11.2 24.5##a person opens the door\n";
        let out = parse_charades_sta(text);
        assert_eq!(out.skipped, 0);
        assert_eq!(out.samples.len(), 3);
        let s = &out.samples[0];
        assert_eq!((s.id.as_str(), s.video_id.as_str()), ("AO8RW#0", "AO8RW"));
        assert_eq!((s.gt.start, s.gt.end), (0.0, 6.9));
        assert_eq!(s.query, "a person is putting a book on a shelf.");
        assert_eq!(out.samples[1].id, "AO8RW#1");
        assert_eq!((out.samples[1].gt.start, out.samples[1].gt.end), (1.5, 5.0));
        assert_eq!(out.samples[2].id, "Y6R7T#0");
    }

    #[test]
    fn charades_empty_and_malformed() {
        assert_eq!(parse_charades_sta(""), LoadedAnnotations::default());
        let out = parse_charades_sta("AO8RW 0.0 6.9 a person\nX 1 2 3##s\nX a 2##s\nX 1 2##  \nX -1 2##s\nok 1 2##fine");
        assert_eq!(out.skipped, 5);
        assert_eq!(out.samples.len(), 1);
    }

    #[test]
    fn charades_missing_file() {
        assert!(matches!(
            load_charades_sta(Path::new("/nonexistent/charades.txt")),
            Err(EvalError::IoError { .. })
        ));
    }

    #[test]
    fn activitynet_pairs_and_clamp() {
        let text = r#"{
            "v_b": {"duration": 10.0, "timestamps": [[-1, 5], [4, 12]], "sentences": ["first.", " second. "]},
            "v_a": {"duration": 3.0, "timestamps": [[0, 1]], "sentences": ["only"]}
        }"#;
        let samples = parse_activitynet_captions(text).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[0].id, "v_a#0");
        let b0 = &samples[1];
        assert_eq!((b0.gt.start, b0.gt.end), (0.0, 5.0));
        assert_eq!(b0.duration, Some(10.0));
        assert_eq!((samples[2].gt.start, samples[2].gt.end), (4.0, 10.0));
        assert_eq!(samples[2].query, "second.");
    }

    #[test]
    fn activitynet_schema_errors() {
        let text = r#"{"v": {"duration": 10, "timestamps": [[0,1],[1,2],[2,3]], "sentences": ["a","b"]}}"#;
        match parse_activitynet_captions(text) {
            Err(EvalError::SchemaError { video_id, .. }) => assert_eq!(video_id, "v"),
            other => panic!("expected SchemaError, got {other:?}"),
        }
        assert!(matches!(parse_activitynet_captions("[1,2]"), Err(EvalError::Json(_))));
        assert!(matches!(
            parse_activitynet_captions(r#"{"v": {"duration": 0, "timestamps": [], "sentences": []}}"#),
            Err(EvalError::SchemaError { .. })
        ));
    }
}
