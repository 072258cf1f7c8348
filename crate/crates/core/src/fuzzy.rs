//! Levenshtein distance and best fuzzy substring search.
//!
//! The best fuzzy substring match of `query` in `corpus` is the non-empty
//! substring of `corpus` with the smallest edit distance to `query`; ties go
//! to the earlier start, then the shorter substring.
//!
//! [`best_fuzzy_substring_bruteforce`] scores every substring.
//! [`best_fuzzy_substring`] gets the same answer on ordinary text far more
//! cheaply with two scans:
//!
//! 1. a coarse scan with a query-sized window and a step of
//!    `len(query) / stage_1_factor`, which keeps the regions around the
//!    `stage_1_candidates` best windows (one window per region);
//! 2. step-1 scans of each region with window lengths from half to one and a
//!    half times the query length, spaced `len(query) / stage_2_factor` apart,
//!    followed by a hill climb on the start and end offsets of the best window.
//!
//! The two-stage search only ever looks at a subset of substrings, so its
//! distance is never below the brute-force one. Strings with long runs of a
//! repeated character or of whitespace can mislead the coarse scan.
//!
//! All positions and lengths count unicode scalar values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    /// Stage-1 step is `len(query) / stage_1_factor`.
    pub stage_1_factor: f64,
    /// Stage-2 window lengths are spaced `len(query) / stage_2_factor` apart.
    pub stage_2_factor: f64,
    /// Number of stage-1 windows whose surroundings stage 2 explores.
    #[serde(default = "default_candidates")]
    pub stage_1_candidates: usize,
}

fn default_candidates() -> usize {
    8
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self { stage_1_factor: 2.0, stage_2_factor: 4.0, stage_1_candidates: default_candidates() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error(
    "fuzzy search factors must be positive and finite and candidates at least 1, \
     got {stage_1_factor}, {stage_2_factor} and {stage_1_candidates}"
)]
pub struct InvalidFuzzyConfig {
    pub stage_1_factor: f64,
    pub stage_2_factor: f64,
    pub stage_1_candidates: usize,
}

impl FuzzyConfig {
    pub fn new(stage_1_factor: f64, stage_2_factor: f64) -> Result<Self, InvalidFuzzyConfig> {
        Self::with_candidates(stage_1_factor, stage_2_factor, default_candidates())
    }

    pub fn with_candidates(
        stage_1_factor: f64,
        stage_2_factor: f64,
        stage_1_candidates: usize,
    ) -> Result<Self, InvalidFuzzyConfig> {
        let ok = |f: f64| f.is_finite() && f > 0.0;
        if ok(stage_1_factor) && ok(stage_2_factor) && stage_1_candidates > 0 {
            Ok(Self { stage_1_factor, stage_2_factor, stage_1_candidates })
        } else {
            Err(InvalidFuzzyConfig { stage_1_factor, stage_2_factor, stage_1_candidates })
        }
    }
}

/// A substring of the corpus, `corpus[start..end]` in characters, and its distance to the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub substring: String,
    pub start: usize,
    pub end: usize,
    pub distance: usize,
}

/// How much work a search did: one comparison per scored substring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub comparisons: u64,
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

/// Two-row Wagner-Fischer over character slices.
pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Number of non-empty substrings of a corpus of `n` characters.
pub fn bruteforce_comparisons(n: usize) -> u64 {
    let n = n as u64;
    n * (n + 1) / 2
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    distance: usize,
    start: usize,
    len: usize,
}

fn to_result(corpus: &[char], best: Candidate) -> MatchResult {
    MatchResult {
        substring: corpus[best.start..best.start + best.len].iter().collect(),
        start: best.start,
        end: best.start + best.len,
        distance: best.distance,
    }
}

fn empty_match(query_len: usize) -> MatchResult {
    MatchResult { substring: String::new(), start: 0, end: 0, distance: query_len }
}

/// Scores every substring. `O(len(query) * len(corpus)^2)`.
pub fn best_fuzzy_substring_bruteforce(query: &str, corpus: &str) -> MatchResult {
    let q: Vec<char> = query.chars().collect();
    let c: Vec<char> = corpus.chars().collect();
    let (result, _) = exhaustive(&q, &c, 0, c.len());
    result
}

/// Exhaustive search of `corpus[lo..hi]`: one DP pass per start covers every end.
fn exhaustive(q: &[char], c: &[char], lo: usize, hi: usize) -> (MatchResult, SearchStats) {
    if q.is_empty() {
        return (empty_match(0), SearchStats::default());
    }
    if lo >= hi {
        return (empty_match(q.len()), SearchStats::default());
    }
    let m = q.len();
    let mut best: Option<Candidate> = None;
    let mut stats = SearchStats::default();
    let mut prev = vec![0usize; m + 1];
    let mut cur = vec![0usize; m + 1];
    for start in lo..hi {
        // prev[j]: distance between q[..j] and the empty substring at `start`
        for (j, v) in prev.iter_mut().enumerate() {
            *v = j;
        }
        for (end, &ch) in c.iter().enumerate().take(hi).skip(start) {
            cur[0] = end - start + 1;
            for j in 1..=m {
                let sub = prev[j - 1] + usize::from(q[j - 1] != ch);
                cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
            }
            std::mem::swap(&mut prev, &mut cur);
            stats.comparisons += 1;
            let cand = Candidate { distance: prev[m], start, len: end - start + 1 };
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
            }
        }
    }
    (to_result(c, best.expect("range is non-empty")), stats)
}

/// Two-stage search with the default factors.
pub fn best_fuzzy_substring(query: &str, corpus: &str, config: &FuzzyConfig) -> MatchResult {
    best_fuzzy_substring_with_stats(query, corpus, config).0
}

struct Scorer<'a> {
    q: &'a [char],
    c: &'a [char],
    best: Option<Candidate>,
    stats: SearchStats,
}

impl Scorer<'_> {
    fn score(&mut self, start: usize, len: usize) -> usize {
        let distance = levenshtein_chars(self.q, &self.c[start..start + len]);
        self.stats.comparisons += 1;
        let cand = Candidate { distance, start, len };
        if self.best.is_none_or(|b| cand < b) {
            self.best = Some(cand);
        }
        distance
    }
}

fn scaled_step(len: usize, factor: f64) -> usize {
    ((len as f64 / factor).floor() as usize).max(1)
}

pub fn best_fuzzy_substring_with_stats(query: &str, corpus: &str, config: &FuzzyConfig) -> (MatchResult, SearchStats) {
    let q: Vec<char> = query.chars().collect();
    let c: Vec<char> = corpus.chars().collect();
    let (m, n) = (q.len(), c.len());
    if m == 0 {
        return (empty_match(0), SearchStats::default());
    }
    if n == 0 {
        return (empty_match(m), SearchStats::default());
    }
    if n < m {
        // too short for a query-sized window: search all of it
        return exhaustive(&q, &c, 0, n);
    }

    // Stage 1: coarse scan with a query-sized window.
    let step_1 = scaled_step(m, config.stage_1_factor);
    let mut coarse = Scorer { q: &q, c: &c, best: None, stats: SearchStats::default() };
    let mut positions: Vec<usize> = (0..=n - m).step_by(step_1).collect();
    if positions.last() != Some(&(n - m)) {
        positions.push(n - m);
    }
    let mut windows: Vec<(usize, usize)> = positions.iter().map(|&p| (coarse.score(p, m), p)).collect();
    windows.sort_unstable();
    let k = config.stage_1_candidates;
    let mut anchors: Vec<usize> = Vec::new();
    for &(_, p) in &windows {
        if anchors.len() == k {
            break;
        }
        if anchors.iter().all(|&a| a.abs_diff(p) > step_1) {
            anchors.push(p);
        }
    }

    let mut fine = Scorer { q: &q, c: &c, best: None, stats: coarse.stats };
    let step_2 = scaled_step(m, config.stage_2_factor);
    for anchor in anchors {
        let lo = anchor.saturating_sub(m);
        let hi = (anchor + 2 * m).min(n);
        let region = hi - lo;

        // Stage 2: fine scans over the region with several window lengths.
        let min_len = (m / 2).max(1);
        let max_len = region.min(m + m.div_ceil(2));
        let mut lengths: Vec<usize> = (min_len..=max_len).step_by(step_2).collect();
        if m <= max_len && !lengths.contains(&m) {
            lengths.push(m);
        }
        for &len in &lengths {
            for start in lo..=hi - len {
                fine.score(start, len);
            }
        }
    }

    // Hill-climb both edges from the best window.
    let mut best = fine.best.expect("stage 2 scores at least one window");
    loop {
        let (s0, e0) = (best.start, best.start + best.len);
        for start in s0.saturating_sub(step_2)..=(s0 + step_2).min(n - 1) {
            let first_end = e0.saturating_sub(step_2).max(start + 1);
            for end in first_end..=(e0 + step_2).min(n) {
                fine.score(start, end - start);
            }
        }
        let improved = fine.best.expect("non-empty");
        if improved.distance == best.distance {
            break;
        }
        best = improved;
    }

    let best = fine.best.expect("non-empty");
    (to_result(&c, best), fine.stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("ÉCOLE", "ECOLE"), 1);
    }

    #[test]
    fn bruteforce_examples() {
        let r = best_fuzzy_substring_bruteforce("CYCLNG", "20 REASONS TO LOVE CYCLING");
        assert_eq!((r.substring.as_str(), r.distance), ("CYCLING", 1));
        assert_eq!((r.start, r.end), (19, 26));

        let r = best_fuzzy_substring_bruteforce("same", "same");
        assert_eq!((r.substring.as_str(), r.distance, r.start), ("same", 0, 0));

        let r = best_fuzzy_substring_bruteforce("", "anything");
        assert_eq!((r.substring.as_str(), r.start, r.end, r.distance), ("", 0, 0, 0));
    }

    #[test]
    fn bruteforce_tie_break_prefers_earlier_then_shorter() {
        // "ab" and "ba" are both distance 1 from "a?"; first start wins
        let r = best_fuzzy_substring_bruteforce("ax", "ab ab");
        assert_eq!((r.start, r.end, r.distance), (0, 1, 1));
        let r = best_fuzzy_substring_bruteforce("abc", "xyz");
        assert_eq!((r.start, r.end, r.distance), (0, 1, 3));
    }

    #[test]
    fn two_stage_examples() {
        let cfg = FuzzyConfig::default();
        let r = best_fuzzy_substring("CYCLNG", "20 REASONS TO LOVE CYCLING", &cfg);
        assert_eq!((r.substring.as_str(), r.distance), ("CYCLING", 1));

        let r = best_fuzzy_substring("", "corpus", &cfg);
        assert_eq!((r.substring.as_str(), r.distance), ("", 0));

        let r = best_fuzzy_substring("abc", "", &cfg);
        assert_eq!((r.substring.as_str(), r.distance), ("", 3));

        let (q, c) = ("A LONG QUERY STRING", "LONG QRY");
        assert_eq!(best_fuzzy_substring(q, c, &cfg), best_fuzzy_substring_bruteforce(q, c));
    }

    #[test]
    fn match_is_self_consistent() {
        let cfg = FuzzyConfig::default();
        let corpus = "THE QUICK BROWN FOX JUMPS OVER THE LAZY DOG";
        for q in ["QUIK BROWN", "LAZY DOG", "JUMPED", "x"] {
            for r in [best_fuzzy_substring(q, corpus, &cfg), best_fuzzy_substring_bruteforce(q, corpus)] {
                let chars: Vec<char> = corpus.chars().collect();
                assert_eq!(r.substring, chars[r.start..r.end].iter().collect::<String>());
                assert_eq!(r.distance, levenshtein(q, &r.substring));
            }
        }
    }

    #[test]
    fn invalid_factors() {
        assert!(FuzzyConfig::new(0.0, 4.0).is_err());
        assert!(FuzzyConfig::new(2.0, f64::NAN).is_err());
        assert!(FuzzyConfig::new(2.0, 4.0).is_ok());
        assert!(FuzzyConfig::with_candidates(2.0, 4.0, 0).is_err());
    }
}
