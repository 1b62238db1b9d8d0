use image::RgbImage;

use super::{plan_windows, GridConfig, GridError, WindowPlan};
use crate::ingest::FrameSequence;

const CHANNELS: usize = 3;

/// One composed window. Immutable once built.
#[derive(Debug, Clone)]
pub struct GridImage {
    video_id: String,
    plan: WindowPlan,
    config: GridConfig,
    image: RgbImage,
    cell_size: (u32, u32),
    start_time: f64,
    end_time: f64,
}

impl GridImage {
    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn plan(&self) -> &WindowPlan {
        &self.plan
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    /// Width and height of one cell (the source frame resolution).
    pub fn cell_size(&self) -> (u32, u32) {
        self.cell_size
    }

    pub fn start_frame(&self) -> usize {
        self.plan.start_frame
    }

    /// Last real frame; padded cells are never counted.
    pub fn end_frame(&self) -> usize {
        self.plan.end_frame()
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }
}

/// Composite dimensions for `cols × rows` cells of `cell` pixels separated by `gutter`.
pub fn composite_size(cell: (u32, u32), config: &GridConfig) -> Result<(u32, u32), GridError> {
    let side = |n: usize, len: u32| -> Option<u32> {
        let n = u32::try_from(n).ok()?;
        n.checked_mul(len)?
            .checked_add((n - 1).checked_mul(config.gutter_px())?)
    };
    match (side(config.cols(), cell.0), side(config.rows(), cell.1)) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(GridError::InvalidGeometry("composite dimensions overflow".into())),
    }
}

fn cell_origin(r: usize, c: usize, cell: (u32, u32), gutter: u32) -> (usize, usize) {
    let x = c * (cell.0 + gutter) as usize;
    let y = r * (cell.1 + gutter) as usize;
    (x, y)
}

/// Lays the plan's frames out row-major at original resolution. Gutter pixels are black.
pub fn compose_grid(
    seq: &FrameSequence,
    plan: &WindowPlan,
    config: &GridConfig,
) -> Result<GridImage, GridError> {
    let k = config.k();
    if plan.frame_indices.len() != k {
        return Err(GridError::PlanMismatch(format!(
            "plan has {} cells, grid {config} needs {k}",
            plan.frame_indices.len()
        )));
    }
    if plan.pad_count >= k {
        return Err(GridError::PlanMismatch(format!(
            "pad count {} leaves no real frame",
            plan.pad_count
        )));
    }
    if let Some(&bad) = plan.frame_indices.iter().find(|&&i| i >= seq.len()) {
        return Err(GridError::PlanMismatch(format!(
            "frame {bad} is outside a sequence of {}",
            seq.len()
        )));
    }
    let cell = seq.resolution();
    let (width, height) = composite_size(cell, config)?;
    let mut image = RgbImage::new(width, height);
    let dst_stride = width as usize * CHANNELS;
    let row_bytes = cell.0 as usize * CHANNELS;
    {
        let dst = image.as_mut();
        for (slot, &frame_index) in plan.frame_indices.iter().enumerate() {
            let (r, c) = (slot / config.cols(), slot % config.cols());
            let (x0, y0) = cell_origin(r, c, cell, config.gutter_px());
            let src = seq.frames()[frame_index].image.as_raw();
            for y in 0..cell.1 as usize {
                let from = y * row_bytes;
                let to = (y0 + y) * dst_stride + x0 * CHANNELS;
                dst[to..to + row_bytes].copy_from_slice(&src[from..from + row_bytes]);
            }
        }
    }
    let first = &seq.frames()[plan.start_frame];
    let last = &seq.frames()[plan.end_frame()];
    Ok(GridImage {
        video_id: seq.video_id().to_string(),
        plan: plan.clone(),
        config: *config,
        image,
        cell_size: cell,
        start_time: first.source_time,
        end_time: last.source_time,
    })
}

/// Plans and composes every window of a sequence, in window order.
pub fn compose_all(seq: &FrameSequence, config: &GridConfig) -> Result<Vec<GridImage>, GridError> {
    plan_windows(seq.len(), config)?
        .iter()
        .map(|plan| compose_grid(seq, plan, config))
        .collect()
}

/// Copies the cell at `(r, c)` out of a composite with the given cell size.
pub fn extract_cell_from(
    image: &RgbImage,
    cell: (u32, u32),
    r: usize,
    c: usize,
    config: &GridConfig,
) -> Result<RgbImage, GridError> {
    if r >= config.rows() || c >= config.cols() {
        return Err(GridError::CellOutOfRange {
            r,
            c,
            rows: config.rows(),
            cols: config.cols(),
        });
    }
    let expected = composite_size(cell, config)?;
    if image.dimensions() != expected {
        return Err(GridError::InvalidGeometry(format!(
            "composite is {:?}, expected {expected:?} for {config} with {cell:?} cells",
            image.dimensions()
        )));
    }
    let (x0, y0) = cell_origin(r, c, cell, config.gutter_px());
    let src_stride = image.width() as usize * CHANNELS;
    let row_bytes = cell.0 as usize * CHANNELS;
    let src = image.as_raw();
    let mut buf = Vec::with_capacity(row_bytes * cell.1 as usize);
    for y in 0..cell.1 as usize {
        let from = (y0 + y) * src_stride + x0 * CHANNELS;
        buf.extend_from_slice(&src[from..from + row_bytes]);
    }
    Ok(RgbImage::from_raw(cell.0, cell.1, buf).expect("buffer sized to cell"))
}

pub fn extract_cell(grid: &GridImage, r: usize, c: usize, config: &GridConfig) -> Result<RgbImage, GridError> {
    extract_cell_from(&grid.image, grid.cell_size, r, c, config)
}
