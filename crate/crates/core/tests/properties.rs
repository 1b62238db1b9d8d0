use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use vtgrid::eval::{evaluate, iou, parse_grounding_answer, GroundingSample, TemporalInterval};
use vtgrid::gridify::{
    compose_grid, estimate_tokens_from, extract_cell, frame_index_of_cell, frame_index_of_patch,
    plan_windows, GridConfig, TokenizerModel,
};
use vtgrid::ingest::{sample_uniform, SampleTarget};
use vtgrid::prompt::{emit_instruction_dataset, format_timestamp};
use vtgrid::synthetic::{marker_video, patterned_video};
use vtgrid::TimeUnit;

fn grid_config() -> impl Strategy<Value = GridConfig> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(c, r)| (Just(c), Just(r), 1..=c * r))
        .prop_map(|(c, r, s)| GridConfig::new(c, r, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampling_keeps_sequence_invariants(total in 1usize..80, count in 1usize..100, fps in 0.05f64..5.0) {
        let seq = marker_video("v", total, (2, 2), None, 1.0);
        for target in [SampleTarget::Count(count), SampleTarget::Fps(fps)] {
            let out = sample_uniform(&seq, target).unwrap();
            prop_assert!(!out.is_empty() && out.len() <= total);
            let idx: Vec<usize> = out.frames().iter().map(|f| f.index).collect();
            prop_assert_eq!(idx, (0..out.len()).collect::<Vec<_>>());
            prop_assert!(out.times().windows(2).all(|w| w[0] < w[1]));
        }
        let out = sample_uniform(&seq, SampleTarget::Count(count)).unwrap();
        if count.min(total) > 1 {
            prop_assert_eq!(out.times()[0], 0.0);
            prop_assert_eq!(*out.times().last().unwrap(), (total - 1) as f64);
        }
    }

    #[test]
    fn windows_cover_every_frame(total in 1usize..=200, cfg in grid_config()) {
        let plans = plan_windows(total, &cfg).unwrap();
        let covered: BTreeSet<usize> = plans.iter().flat_map(|p| p.frame_indices.iter().copied()).collect();
        prop_assert_eq!(covered, (0..total).collect::<BTreeSet<_>>());
        let starts: BTreeSet<usize> = plans.iter().map(|p| p.start_frame).collect();
        prop_assert_eq!(starts.len(), plans.len());
        prop_assert!(plans.iter().all(|p| p.frame_indices.len() == cfg.k()));
    }

    #[test]
    fn tokens_grow_as_stride_shrinks(total in 1usize..=200, cols in 1usize..=4, rows in 1usize..=4) {
        let model = TokenizerModel { merge_px: 28, per_image_overhead: 3 };
        let k = cols * rows;
        let mut prev = None;
        for stride in (1..=k).rev() {
            let cfg = GridConfig::new(cols, rows, stride).unwrap();
            let n = plan_windows(total, &cfg).unwrap().len();
            let b = estimate_tokens_from((0..n).map(|_| ((cols as u32 * 64, rows as u32 * 48), "")), &model).unwrap();
            if let Some(p) = prev {
                prop_assert!(b.total_visual_tokens >= p);
            }
            prev = Some(b.total_visual_tokens);
        }
    }

    #[test]
    fn composition_round_trips(total in 1usize..20, w in 1u32..12, h in 1u32..12, gutter in 0u32..3, cfg in grid_config(), seed: u64) {
        let cfg = cfg.with_gutter(gutter);
        let seq = patterned_video("v", seed, total, (w, h), 1.0);
        for plan in plan_windows(total, &cfg).unwrap() {
            let grid = compose_grid(&seq, &plan, &cfg).unwrap();
            let (gw, gh) = grid.image().dimensions();
            prop_assert_eq!(gw, cfg.cols() as u32 * w + (cfg.cols() as u32 - 1) * gutter);
            prop_assert_eq!(gh, cfg.rows() as u32 * h + (cfg.rows() as u32 - 1) * gutter);
            for slot in 0..cfg.k() {
                let cell = extract_cell(&grid, slot / cfg.cols(), slot % cfg.cols(), &cfg).unwrap();
                prop_assert_eq!(cell.as_raw(), seq.frames()[plan.frame_indices[slot]].image.as_raw());
            }
        }
    }

    #[test]
    fn patch_index_matches_cell_index(cols in 1usize..6, r_p in 0usize..200, c_p in 0usize..200, ph in 1usize..17, pw in 1usize..17) {
        let cell_c = c_p / pw;
        let expected = frame_index_of_cell(r_p / ph, cell_c, cols);
        prop_assert_eq!(frame_index_of_patch(r_p, c_p, ph, pw, cols), expected);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0, d in 0.0f64..100.0) {
        let x = TemporalInterval::seconds(a, b).unwrap();
        let y = TemporalInterval::seconds(c, d).unwrap();
        let v = iou(&x, &y).unwrap();
        prop_assert_eq!(v, iou(&y, &x).unwrap());
        prop_assert!((0.0..=1.0).contains(&v));
        if x.length() > 0.0 {
            prop_assert_eq!(iou(&x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn recall_non_increasing(ious in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        let gt = TemporalInterval::seconds(0.0, 1.0).unwrap();
        let samples: Vec<GroundingSample> = (0..ious.len())
            .map(|i| GroundingSample { id: i.to_string(), video_id: "v".into(), query: "q".into(), gt, duration: None })
            .collect();
        let preds: HashMap<String, Option<TemporalInterval>> = ious
            .iter()
            .enumerate()
            .map(|(i, v)| (i.to_string(), Some(TemporalInterval::seconds(0.0, *v).unwrap())))
            .collect();
        let thresholds: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let r = evaluate(&samples, &preds, &thresholds).unwrap();
        prop_assert!(r.recall_at.windows(2).all(|w| w[0].1 >= w[1].1));
        let mean = r.per_sample_iou().iter().sum::<f64>() / ious.len() as f64;
        prop_assert!((r.miou - mean).abs() <= 1e-12);
    }

    #[test]
    fn frame_timestamps_are_injective(a in (0usize..500, 0usize..500), b in (0usize..500, 0usize..500)) {
        let ta = format_timestamp(a, (0.0, 0.0), TimeUnit::Frames);
        let tb = format_timestamp(b, (0.0, 0.0), TimeUnit::Frames);
        prop_assert_eq!(ta == tb, a == b);
    }

    #[test]
    fn instruction_answers_parse_back(total in 1usize..120, fps in 0.2f64..4.0, s in 0.0f64..1.0, e in 0.0f64..1.0) {
        let seq = marker_video("v", total, (1, 1), None, fps);
        let duration = seq.duration();
        let sample = GroundingSample {
            id: "v#0".into(),
            video_id: "v".into(),
            query: "something happens".into(),
            gt: TemporalInterval::seconds(s * duration, e * duration).unwrap(),
            duration: None,
        };
        let seqs: HashMap<_, _> = [("v".to_string(), seq)].into_iter().collect();
        let cfg = GridConfig::new(4, 3, 7).unwrap();
        let rec = emit_instruction_dataset(&[sample], &seqs, &cfg).unwrap().remove(0);
        let parsed = parse_grounding_answer(&rec.answer).unwrap();
        prop_assert_eq!((parsed.start, parsed.end), (rec.gt_interval_frames.0 as f64, rec.gt_interval_frames.1 as f64));
        prop_assert_eq!(parsed.unit, TimeUnit::Frames);
    }
}
