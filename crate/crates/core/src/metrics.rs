//! Character-level string similarity metrics used by the evaluator.
//!
//! All three work on unicode scalar values.

use serde::{Deserialize, Serialize};

use crate::fuzzy::levenshtein_chars;

/// Winkler prefix scale.
pub const WINKLER_SCALE: f64 = 0.1;
/// Longest common prefix credited by the Winkler boost.
pub const WINKLER_PREFIX_CAP: usize = 4;
/// The prefix boost applies only when the Jaro similarity exceeds this.
pub const WINKLER_BOOST_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub nld: f64,
    pub jaro_winkler: f64,
    pub ratcliff_obershelp: f64,
}

impl MetricVector {
    pub fn between(a: &str, b: &str) -> Self {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        Self {
            nld: normalized_levenshtein_chars(&a, &b),
            jaro_winkler: jaro_winkler_chars(&a, &b),
            ratcliff_obershelp: ratcliff_obershelp_chars(&a, &b),
        }
    }
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    normalized_levenshtein_chars(&a, &b)
}

fn normalized_levenshtein_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein_chars(a, b) as f64 / longest as f64
}

pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut a_matched = Vec::new();
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_used[j] && b[j] == ca {
                b_used[j] = true;
                a_matched.push(ca);
                break;
            }
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let b_matched = b.iter().zip(&b_used).filter(|(_, &used)| used).map(|(c, _)| c);
    // half the out-of-order matches, rounded down as in the reference C code
    let transpositions = (a_matched.iter().zip(b_matched).filter(|(x, y)| x != y).count() / 2) as f64;
    let m = m as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - transpositions) / m) / 3.0
}

/// Jaro similarity with the Winkler common-prefix boost (scale 0.1, prefix up
/// to 4), applied when the Jaro similarity is above 0.7.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_winkler_chars(&a, &b)
}

fn jaro_winkler_chars(a: &[char], b: &[char]) -> f64 {
    let j = jaro_chars(a, b);
    if j <= WINKLER_BOOST_THRESHOLD {
        return j;
    }
    let prefix = a.iter().zip(b).take(WINKLER_PREFIX_CAP).take_while(|(x, y)| x == y).count();
    (j + prefix as f64 * WINKLER_SCALE * (1.0 - j)).min(1.0)
}

/// Gestalt pattern matching: `2 * matched / (len(a) + len(b))`, 1 for two empty strings.
///
/// Matched characters come from recursively taking the longest common
/// substring (leftmost in `a`, then in `b`) and recursing on both sides of
/// it. The tie rule makes the score order-sensitive: `("tide", "diet")` and
/// `("diet", "tide")` differ.
pub fn ratcliff_obershelp(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratcliff_obershelp_chars(&a, &b)
}

fn ratcliff_obershelp_chars(a: &[char], b: &[char]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * matched_chars(a, b) as f64 / total as f64
}

fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut matched = 0;
    let mut pending = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = pending.pop() {
        let (i, j, k) = longest_common_substring(a, b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        matched += k;
        if alo < i && blo < j {
            pending.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            pending.push((i + k, ahi, j + k, bhi));
        }
    }
    matched
}

/// Longest common substring of `a[alo..ahi]` and `b[blo..bhi]` as `(i, j, len)`;
/// among equally long ones, the earliest in `a`, then in `b`.
#[allow(clippy::needless_range_loop)]
fn longest_common_substring(
    a: &[char],
    b: &[char],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    // run[j - blo + 1]: length of the common suffix ending at a[i], b[j]
    let mut prev = vec![0usize; bhi - blo + 1];
    let mut cur = vec![0usize; bhi - blo + 1];
    for i in alo..ahi {
        for j in blo..bhi {
            let k = if a[i] == b[j] { prev[j - blo] + 1 } else { 0 };
            cur[j - blo + 1] = k;
            if k > best_k {
                best_i = i + 1 - k;
                best_j = j + 1 - k;
                best_k = k;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_i, best_j, best_k)
}
