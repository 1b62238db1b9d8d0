use serde::{Deserialize, Serialize};

use super::{GridError, GridImage};
use crate::prompt::composite_timestamp;
use crate::TimeUnit;

/// Visual tokenizer geometry: one token per `merge_px × merge_px` block of
/// the image (partial blocks count) plus a constant per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerModel {
    pub merge_px: u32,
    pub per_image_overhead: u64,
}

impl Default for TokenizerModel {
    fn default() -> Self {
        Self {
            merge_px: 28,
            per_image_overhead: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub total_visual_tokens: u64,
    pub per_grid_tokens: Vec<u64>,
    pub text_tokens_estimate: u64,
    pub grand_total: u64,
}

pub fn visual_tokens(width: u32, height: u32, model: &TokenizerModel) -> Result<u64, GridError> {
    if model.merge_px == 0 {
        return Err(GridError::InvalidModel("merge_px must be positive".into()));
    }
    let p = model.merge_px as u64;
    Ok((width as u64).div_ceil(p) * (height as u64).div_ceil(p) + model.per_image_overhead)
}

/// Rough text token count: every run of alphanumerics is one token, and so is
/// every other non-space character.
pub fn approx_text_tokens(text: &str) -> u64 {
    let mut count = 0;
    let mut in_word = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !ch.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

/// Budget for images of the given sizes, each preceded by its timestamp text.
pub fn estimate_tokens_from<I, S>(items: I, model: &TokenizerModel) -> Result<TokenBudget, GridError>
where
    I: IntoIterator<Item = ((u32, u32), S)>,
    S: AsRef<str>,
{
    if model.merge_px == 0 {
        return Err(GridError::InvalidModel("merge_px must be positive".into()));
    }
    let mut budget = TokenBudget::default();
    for ((w, h), stamp) in items {
        let tokens = visual_tokens(w, h, model)?;
        budget.per_grid_tokens.push(tokens);
        budget.total_visual_tokens += tokens;
        budget.text_tokens_estimate += approx_text_tokens(stamp.as_ref());
    }
    budget.grand_total = budget.total_visual_tokens + budget.text_tokens_estimate;
    Ok(budget)
}

pub fn estimate_tokens(
    grids: &[GridImage],
    model: &TokenizerModel,
    unit: TimeUnit,
) -> Result<TokenBudget, GridError> {
    estimate_tokens_from(
        grids
            .iter()
            .map(|g| (g.image().dimensions(), composite_timestamp(g, unit))),
        model,
    )
}
