use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use super::{EvalError, GroundingSample, TemporalInterval};
use crate::TimeUnit;

/// IoU thresholds reported by default.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.3, 0.5, 0.7];

/// Temporal IoU `|a ∩ b| / |a ∪ b|`.
///
/// Two identical points score 1; a point against anything else scores 0.
pub fn iou(a: &TemporalInterval, b: &TemporalInterval) -> Result<f64, EvalError> {
    if a.unit != b.unit {
        return Err(EvalError::UnitMismatch(a.unit, b.unit));
    }
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.length() + b.length() - inter;
    if union <= 0.0 {
        return Ok(if a.start == b.start && a.end == b.end { 1.0 } else { 0.0 });
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleScore {
    pub id: String,
    pub video_id: String,
    pub iou: f64,
    /// `None` when the reply could not be parsed or no prediction exists.
    pub prediction: Option<TemporalInterval>,
    pub gt: TemporalInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_sample: Vec<SampleScore>,
    /// `(threshold, recall)` in the order the thresholds were given.
    pub recall_at: Vec<(f64, f64)>,
    pub miou: f64,
    pub n_failed_parse: usize,
}

impl EvalReport {
    pub fn n(&self) -> usize {
        self.per_sample.len()
    }

    pub fn per_sample_iou(&self) -> Vec<f64> {
        self.per_sample.iter().map(|s| s.iou).collect()
    }

    pub fn recall(&self, threshold: f64) -> Option<f64> {
        self.recall_at
            .iter()
            .find(|(m, _)| *m == threshold)
            .map(|(_, r)| *r)
    }

    /// Per-sample CSV: `video_id,iou,pred_start,pred_end,gt_start,gt_end`.
    /// Failed samples leave the prediction columns empty.
    pub fn write_per_sample_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["video_id", "iou", "pred_start", "pred_end", "gt_start", "gt_end"])?;
        for s in &self.per_sample {
            let (ps, pe) = match s.prediction {
                Some(p) => (p.start.to_string(), p.end.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                s.video_id.clone(),
                s.iou.to_string(),
                ps,
                pe,
                s.gt.start.to_string(),
                s.gt.end.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct RecallTable<'a>(&'a [(f64, f64)]);

impl Serialize for RecallTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (m, r) in self.0 {
            map.serialize_entry(&m.to_string(), r)?;
        }
        map.end()
    }
}

/// Serializes as `{miou, recall: {"0.3": …}, n, n_failed_parse}`.
impl Serialize for EvalReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EvalReport", 4)?;
        st.serialize_field("miou", &self.miou)?;
        st.serialize_field("recall", &RecallTable(&self.recall_at))?;
        st.serialize_field("n", &self.n())?;
        st.serialize_field("n_failed_parse", &self.n_failed_parse)?;
        st.end()
    }
}

/// Scores predictions (in seconds) against ground truth.
///
/// `predictions` maps sample id to the parsed interval, or `None` for a reply
/// that failed to parse. Missing ids count as failures. Every failure scores
/// IoU 0. An empty `thresholds` slice means [`DEFAULT_THRESHOLDS`].
pub fn evaluate(
    samples: &[GroundingSample],
    predictions: &HashMap<String, Option<TemporalInterval>>,
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    let thresholds = if thresholds.is_empty() { &DEFAULT_THRESHOLDS[..] } else { thresholds };
    let mut seen = HashSet::with_capacity(samples.len());
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut n_failed_parse = 0;
    for sample in samples {
        if !seen.insert(sample.id.as_str()) {
            return Err(EvalError::DuplicateSample(sample.id.clone()));
        }
        let prediction = match predictions.get(&sample.id) {
            Some(p) => *p,
            None => {
                log::warn!("no prediction for sample {}", sample.id);
                None
            }
        };
        let score = match &prediction {
            Some(p) => {
                if p.unit != TimeUnit::Seconds {
                    return Err(EvalError::UnitMismatch(p.unit, TimeUnit::Seconds));
                }
                iou(p, &sample.gt)?
            }
            None => {
                n_failed_parse += 1;
                0.0
            }
        };
        per_sample.push(SampleScore {
            id: sample.id.clone(),
            video_id: sample.video_id.clone(),
            iou: score,
            prediction,
            gt: sample.gt,
        });
    }
    let n = per_sample.len();
    let mean = |count: f64| if n == 0 { 0.0 } else { count / n as f64 };
    let miou = mean(per_sample.iter().map(|s| s.iou).sum());
    let recall_at = thresholds
        .iter()
        .map(|&m| (m, mean(per_sample.iter().filter(|s| s.iou >= m).count() as f64)))
        .collect();
    Ok(EvalReport {
        per_sample,
        recall_at,
        miou,
        n_failed_parse,
    })
}
