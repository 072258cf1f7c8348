//! Heuristic geometric reading order for the lines of one block.
//!
//! Used twice by the pipeline: to fix the argument order in the prompt, and as
//! the fallback order whenever the LLM result is not used.
//!
//! The heuristic is a simple row/column clustering, not a learned model:
//! lines are grouped into rows (or columns, for vertical text) by connected
//! components of "centre distance below half the median line height", rows
//! are read top to bottom and each row left to right. Ties on every key are
//! broken by ascending line id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geometry::AlignedRect;
use crate::model::LineId;

/// Fraction of the median line extent under which two centres share a row.
pub const ROW_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderingMode {
    /// Rows top to bottom, each row left to right.
    #[serde(rename = "TTB_LTR")]
    TopToBottomLeftToRight,
    /// Columns left to right, each column top to bottom.
    #[serde(rename = "LTR_TTB")]
    LeftToRightTopToBottom,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Horizontal lines stack into rows; vertical lines stand side by side as columns.
///
/// Decided by the median width/height ratio; square lines count as horizontal.
///
/// Panics on an empty slice.
pub fn choose_mode(lines: &[(LineId, AlignedRect)]) -> OrderingMode {
    assert!(!lines.is_empty(), "choose_mode needs at least one line");
    let aspect = median(lines.iter().map(|(_, r)| r.width() / r.height()).collect());
    if aspect >= 1.0 {
        OrderingMode::TopToBottomLeftToRight
    } else {
        OrderingMode::LeftToRightTopToBottom
    }
}

/// Line ids in reading order under the mode picked by [`choose_mode`].
pub fn geometric_order(lines: &[(LineId, AlignedRect)]) -> Vec<LineId> {
    if lines.is_empty() {
        return Vec::new();
    }
    order_with_mode(lines, choose_mode(lines))
}

struct Item {
    id: LineId,
    /// centre along the axis that separates rows (y for rows, x for columns)
    across: f64,
    /// leading edge along the reading direction inside a row
    along: f64,
    extent: f64,
}

pub fn order_with_mode(lines: &[(LineId, AlignedRect)], mode: OrderingMode) -> Vec<LineId> {
    let mut items: Vec<Item> = lines
        .iter()
        .map(|&(id, r)| {
            let c = r.center();
            match mode {
                OrderingMode::TopToBottomLeftToRight => Item { id, across: c.y, along: r.x_min, extent: r.height() },
                OrderingMode::LeftToRightTopToBottom => Item { id, across: c.x, along: r.y_min, extent: r.width() },
            }
        })
        .collect();
    if items.is_empty() {
        return Vec::new();
    }
    let threshold = ROW_THRESHOLD * median(items.iter().map(|i| i.extent).collect());

    items.sort_by(|a, b| a.across.total_cmp(&b.across).then(a.id.cmp(&b.id)));
    let mut rows: Vec<Vec<Item>> = Vec::new();
    let mut last_center = f64::NEG_INFINITY;
    for item in items {
        let center = item.across;
        match rows.last_mut() {
            Some(row) if center - last_center < threshold => row.push(item),
            _ => rows.push(vec![item]),
        }
        last_center = center;
    }

    let mut keyed: Vec<(f64, LineId, Vec<Item>)> = rows
        .into_iter()
        .map(|mut row| {
            let mean = row.iter().map(|i| i.across).sum::<f64>() / row.len() as f64;
            row.sort_by(|a, b| a.along.total_cmp(&b.along).then(a.id.cmp(&b.id)));
            let min_id = row.iter().map(|i| i.id).min().expect("rows are non-empty");
            (mean, min_id, row)
        })
        .collect();
    keyed.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        other => other,
    });
    keyed.into_iter().flat_map(|(_, _, row)| row.into_iter().map(|i| i.id)).collect()
}
