use std::fmt;
use std::str::FromStr;

use super::GridError;

/// Grid shape and window stride, written `g<cols><rows>_s<stride>` (for
/// example `g43_s12`) or `g<cols>x<rows>_s<stride>` when a side reaches ten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridConfig {
    cols: usize,
    rows: usize,
    stride: usize,
    gutter_px: u32,
}

impl GridConfig {
    pub fn new(cols: usize, rows: usize, stride: usize) -> Result<Self, GridError> {
        if cols == 0 || rows == 0 {
            return Err(GridError::InvalidGeometry(format!(
                "grid must be at least 1x1, got {cols}x{rows}"
            )));
        }
        let k = cols
            .checked_mul(rows)
            .ok_or_else(|| GridError::InvalidGeometry("grid too large".into()))?;
        if stride == 0 || stride > k {
            return Err(GridError::InvalidStride { stride, k });
        }
        Ok(Self {
            cols,
            rows,
            stride,
            gutter_px: 0,
        })
    }

    /// Width of the black separator between cells. With a gutter the composite
    /// is no longer a seamless tiling, but [`extract_cell`](super::extract_cell)
    /// still recovers each frame exactly.
    pub fn with_gutter(mut self, gutter_px: u32) -> Self {
        self.gutter_px = gutter_px;
        self
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn gutter_px(&self) -> u32 {
        self.gutter_px
    }

    /// Frames per window.
    pub fn k(&self) -> usize {
        self.cols * self.rows
    }

    pub fn overlaps(&self) -> bool {
        self.stride < self.k()
    }
}

fn parse_dim(spec: &str, digits: &str, what: &str) -> Result<usize, GridError> {
    let bad = |reason: String| GridError::ParseError {
        spec: spec.to_string(),
        reason,
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(format!("{what} must be a decimal number, got `{digits}`")));
    }
    digits
        .parse()
        .map_err(|_| bad(format!("{what} `{digits}` is out of range")))
}

/// Parses `g43_s12` / `g10x2_s5`. Gutter is not part of the notation and defaults to 0.
pub fn parse_grid_config(spec: &str) -> Result<GridConfig, GridError> {
    let bad = |reason: &str| GridError::ParseError {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let body = spec
        .strip_prefix('g')
        .ok_or_else(|| bad("expected leading `g`"))?;
    let (shape, stride) = body
        .split_once("_s")
        .ok_or_else(|| bad("expected `_s<stride>`"))?;
    let (cols, rows) = match shape.split_once('x') {
        Some((c, r)) => (parse_dim(spec, c, "cols")?, parse_dim(spec, r, "rows")?),
        None => {
            let b = shape.as_bytes();
            if b.len() != 2 || !b.iter().all(u8::is_ascii_digit) {
                return Err(bad("compact shape takes exactly two digits; use `<cols>x<rows>` otherwise"));
            }
            ((b[0] - b'0') as usize, (b[1] - b'0') as usize)
        }
    };
    if cols == 0 || rows == 0 {
        return Err(bad("cols and rows must be at least 1"));
    }
    let stride = parse_dim(spec, stride, "stride")?;
    match GridConfig::new(cols, rows, stride) {
        Err(GridError::InvalidGeometry(reason)) => Err(bad(&reason)),
        other => other,
    }
}

impl FromStr for GridConfig {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_grid_config(s)
    }
}

impl fmt::Display for GridConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cols < 10 && self.rows < 10 {
            write!(f, "g{}{}_s{}", self.cols, self.rows, self.stride)
        } else {
            write!(f, "g{}x{}_s{}", self.cols, self.rows, self.stride)
        }
    }
}
