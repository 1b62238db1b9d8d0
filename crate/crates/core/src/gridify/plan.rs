use serde::{Deserialize, Serialize};

use super::{GridConfig, GridError};

/// The frames of one window, in cell order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_index: usize,
    pub start_frame: usize,
    pub frame_indices: Vec<usize>,
    /// Trailing cells filled by repeating the last real frame.
    pub pad_count: usize,
}

impl WindowPlan {
    /// Number of distinct real frames in the window.
    pub fn real_len(&self) -> usize {
        self.frame_indices.len() - self.pad_count
    }

    /// Global index of the last real (non-padded) frame.
    pub fn end_frame(&self) -> usize {
        self.frame_indices[self.real_len() - 1]
    }
}

/// Plans the sliding windows over `total` frames.
///
/// Starts follow `i·s`; the first window that would run past the end is moved
/// back to `T−k` and ends the plan. With `T < k` a single padded window is
/// produced.
pub fn plan_windows(total: usize, config: &GridConfig) -> Result<Vec<WindowPlan>, GridError> {
    if total == 0 {
        return Err(GridError::EmptySequence);
    }
    let (k, s) = (config.k(), config.stride());
    if total <= k {
        let frame_indices: Vec<usize> = (0..k).map(|j| j.min(total - 1)).collect();
        return Ok(vec![WindowPlan {
            window_index: 0,
            start_frame: 0,
            frame_indices,
            pad_count: k - total,
        }]);
    }
    let last_start = total - k;
    let mut starts: Vec<usize> = (0..).map(|i| i * s).take_while(|&st| st <= last_start).collect();
    if *starts.last().expect("start 0 always fits") < last_start {
        starts.push(last_start);
    }
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(window_index, start_frame)| WindowPlan {
            window_index,
            start_frame,
            frame_indices: (start_frame..start_frame + k).collect(),
            pad_count: 0,
        })
        .collect())
}
