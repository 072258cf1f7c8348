//! Block-text evaluation against ground truth.
//!
//! Detection quality is deliberately not scored. Each predicted block is
//! paired with the ground-truth block whose box overlaps it most (several
//! predictions may share one ground-truth block). Because a prediction may
//! cover only part of its ground-truth block, it is compared with its best
//! fuzzy substring match inside the gold text rather than with the whole
//! string. Aggregates are unweighted means over matched pairs.

use std::fmt::Write as _;

use serde::Serialize;

use crate::fuzzy::{best_fuzzy_substring, FuzzyConfig};
use crate::geometry::iou;
use crate::metrics::MetricVector;
use crate::model::{Block, Document, Quad};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("predicted block {0} has no text")]
    MissingBlockText(usize),
    #[error("min IoU must be in [0, 1), got {0}")]
    InvalidMinIou(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub fuzzy: FuzzyConfig,
    /// Pairs with IoU at or below this value are left unmatched.
    pub min_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { fuzzy: FuzzyConfig::default(), min_iou: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMatch {
    pub pred_index: usize,
    pub gt_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPair {
    pub pred_block_index: usize,
    pub gt_block_index: usize,
    pub iou: f64,
    pub pred_text: String,
    pub gt_substring: String,
    pub metrics: MetricVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub pairs: Vec<EvalPair>,
    pub unmatched_pred: usize,
    pub unmatched_pred_indices: Vec<usize>,
    /// Absent when there are no pairs.
    pub mean_nld: Option<f64>,
    pub mean_jw: Option<f64>,
    pub mean_ro: Option<f64>,
    pub config: EvalConfig,
}

/// Axis-aligned bounding rectangle of all member line boxes.
pub fn block_hull(doc: &Document, block: &Block) -> Quad {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for line in doc.block_lines(block) {
        let (a, b, c, d) = line.quad.bounds();
        x0 = x0.min(a);
        y0 = y0.min(b);
        x1 = x1.max(c);
        y1 = y1.max(d);
    }
    Quad::from_bounds(x0, y0, x1, y1).expect("bounds of positive-area quads have positive area")
}

/// Pairs each predicted block with its highest-IoU ground-truth block
/// (lowest index on ties). Predictions whose best IoU is `<= min_iou` are
/// left out.
pub fn match_blocks(pred: &Document, gt: &Document, min_iou: f64) -> Vec<BlockMatch> {
    let gt_hulls: Vec<Quad> = gt.blocks().iter().map(|b| block_hull(gt, b)).collect();
    pred.blocks()
        .iter()
        .enumerate()
        .filter_map(|(pred_index, block)| {
            let hull = block_hull(pred, block);
            let (gt_index, best) = gt_hulls.iter().map(|g| iou(&hull, g)).enumerate().fold(
                None,
                |acc: Option<(usize, f64)>, (i, v)| match acc {
                    Some((_, b)) if b >= v => acc,
                    _ => Some((i, v)),
                },
            )?;
            (best > min_iou).then_some(BlockMatch { pred_index, gt_index, iou: best })
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn evaluate(pred: &Document, gt: &Document, config: &EvalConfig) -> Result<EvalReport, EvalError> {
    if !(0.0..1.0).contains(&config.min_iou) {
        return Err(EvalError::InvalidMinIou(config.min_iou));
    }
    if let Some(i) = pred.blocks().iter().position(|b| b.text.is_none()) {
        return Err(EvalError::MissingBlockText(i));
    }
    let matches = match_blocks(pred, gt, config.min_iou);
    let pairs: Vec<EvalPair> = matches
        .iter()
        .map(|m| {
            let pred_text = pred.blocks()[m.pred_index].text.clone().expect("checked above");
            let gold = gt.gold_text(&gt.blocks()[m.gt_index]);
            let gt_substring = best_fuzzy_substring(&pred_text, &gold, &config.fuzzy).substring;
            let metrics = MetricVector::between(&pred_text, &gt_substring);
            EvalPair {
                pred_block_index: m.pred_index,
                gt_block_index: m.gt_index,
                iou: m.iou,
                pred_text,
                gt_substring,
                metrics,
            }
        })
        .collect();
    let unmatched_pred_indices: Vec<usize> =
        (0..pred.blocks().len()).filter(|i| !matches.iter().any(|m| m.pred_index == *i)).collect();

    Ok(EvalReport {
        mean_nld: mean(pairs.iter().map(|p| p.metrics.nld)),
        mean_jw: mean(pairs.iter().map(|p| p.metrics.jaro_winkler)),
        mean_ro: mean(pairs.iter().map(|p| p.metrics.ratcliff_obershelp)),
        unmatched_pred: unmatched_pred_indices.len(),
        unmatched_pred_indices,
        pairs,
        config: *config,
    })
}

/// Plain-text summary table of the three string metrics.
pub fn render_table(report: &EvalReport) -> String {
    let rows = [
        ("Jaro-Winkler Similarity \u{2191}", report.mean_jw),
        ("Ratcliff-Obershelp Similarity \u{2191}", report.mean_ro),
        ("Normalized Levenshtein Distance \u{2193}", report.mean_nld),
    ];
    let width = rows.iter().map(|(name, _)| name.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  Result", "Metric");
    for (name, value) in rows {
        let value = value.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
        let pad = width - name.chars().count();
        let _ = writeln!(out, "{name}{}  {value}", " ".repeat(pad));
    }
    if report.pairs.is_empty() {
        let _ = writeln!(out, "zero matched pairs; {} unmatched predicted blocks", report.unmatched_pred);
    } else {
        let _ = writeln!(
            out,
            "matched pairs: {}; unmatched predicted blocks: {}",
            report.pairs.len(),
            report.unmatched_pred
        );
    }
    out
}
