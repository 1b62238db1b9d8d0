use super::GridError;

/// Window-local frame index of the cell at `(r_f, c_f)`: `r_f · cols + c_f`.
pub fn frame_index_of_cell(r_f: usize, c_f: usize, cols: usize) -> Result<usize, GridError> {
    if cols == 0 {
        return Err(GridError::InvalidGeometry("cols must be at least 1".into()));
    }
    if c_f >= cols {
        return Err(GridError::InvalidCell { c: c_f, cols });
    }
    r_f.checked_mul(cols)
        .and_then(|v| v.checked_add(c_f))
        .ok_or_else(|| GridError::InvalidGeometry("frame index overflows".into()))
}

/// Window-local frame index seen by the vision patch at `(r_p, c_p)`, where a
/// frame spans `h_patch × w_patch` patches:
/// `⌊r_p / h_patch⌋ · cols + ⌊c_p / w_patch⌋`.
///
/// Assumes a gutter-free composite.
pub fn frame_index_of_patch(
    r_p: usize,
    c_p: usize,
    h_patch: usize,
    w_patch: usize,
    cols: usize,
) -> Result<usize, GridError> {
    if h_patch == 0 || w_patch == 0 {
        return Err(GridError::InvalidGeometry(format!(
            "frame must span at least one patch, got {h_patch}x{w_patch}"
        )));
    }
    frame_index_of_cell(r_p / h_patch, c_p / w_patch, cols)
}
