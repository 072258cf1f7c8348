#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use blockspot::model::{Block, Document, DocumentKind, Line, LineId, ParseOptions, Point, Quad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn figure2() -> Document {
    let raw = std::fs::read(data_path("figure2.json")).unwrap();
    blockspot::model::parse_document(&raw, DocumentKind::Prediction).unwrap()
}

const NORMAL_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Alphanumerics and single spaces, no character repeated more than three times in a row.
pub fn normal_string(rng: &mut impl Rng, len: usize) -> String {
    let mut out: Vec<char> = Vec::with_capacity(len);
    while out.len() < len {
        let c = if rng.random_bool(0.15) && out.last().is_some_and(|c| *c != ' ') && out.len() + 1 < len {
            ' '
        } else {
            NORMAL_ALPHABET[rng.random_range(0..NORMAL_ALPHABET.len())] as char
        };
        let run = out.iter().rev().take_while(|x| **x == c).count();
        if run < 3 {
            out.push(c);
        }
    }
    out.into_iter().collect()
}

/// A copy of `s` with `edits` random single-character insertions, deletions or substitutions.
pub fn perturb(rng: &mut impl Rng, s: &str, edits: usize) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..edits {
        let c = NORMAL_ALPHABET[rng.random_range(0..NORMAL_ALPHABET.len())] as char;
        match rng.random_range(0..3) {
            0 => {
                let at = rng.random_range(0..=chars.len());
                chars.insert(at, c);
            }
            1 if chars.len() > 1 => {
                let at = rng.random_range(0..chars.len());
                chars.remove(at);
            }
            _ if !chars.is_empty() => {
                let at = rng.random_range(0..chars.len());
                chars[at] = c;
            }
            _ => chars.push(c),
        }
    }
    chars.into_iter().collect()
}

/// Edit distance by memoized recursion on suffixes.
pub fn levenshtein_oracle(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo).min(go(a, b, i, j + 1, memo)).min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Minimum distance over every non-empty substring, each scored independently.
/// An empty query matches the empty string.
pub fn naive_best_substring(query: &str, corpus: &str) -> usize {
    let q: Vec<char> = query.chars().collect();
    let c: Vec<char> = corpus.chars().collect();
    if q.is_empty() {
        return 0;
    }
    if c.is_empty() {
        return q.len();
    }
    let mut best = usize::MAX;
    for i in 0..c.len() {
        for j in i + 1..=c.len() {
            best = best.min(levenshtein_oracle(&q, &c[i..j]));
        }
    }
    best
}

/// Sellers' semi-global alignment: free start and end in the corpus.
pub fn sellers_best_distance(query: &str, corpus: &str) -> usize {
    let q: Vec<char> = query.chars().collect();
    let c: Vec<char> = corpus.chars().collect();
    let mut col: Vec<usize> = (0..=q.len()).collect();
    let mut best = col[q.len()];
    for &ch in &c {
        let mut diag = col[0];
        col[0] = 0;
        for i in 1..=q.len() {
            let up = col[i];
            col[i] = (diag + usize::from(q[i - 1] != ch)).min(col[i - 1] + 1).min(up + 1);
            diag = up;
        }
        best = best.min(col[q.len()]);
    }
    best
}

/// Gestalt similarity computed by plain recursion with an O(n^3) longest-block search.
pub fn gestalt_oracle(a: &str, b: &str) -> f64 {
    fn matched(a: &[char], b: &[char]) -> usize {
        let (mut bi, mut bj, mut bk) = (0, 0, 0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut k = 0;
                while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                    k += 1;
                }
                if k > bk {
                    (bi, bj, bk) = (i, j, k);
                }
            }
        }
        if bk == 0 {
            return 0;
        }
        bk + matched(&a[..bi], &b[..bj]) + matched(&a[bi + bk..], &b[bj + bk..])
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * matched(&a, &b) as f64 / (a.len() + b.len()) as f64
}

/// IoU of two axis-aligned rectangles by counting sample points on a `cell`-spaced grid.
pub fn raster_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), cell: f64) -> f64 {
    let inside = |r: (f64, f64, f64, f64), x: f64, y: f64| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
    let x0 = a.0.min(b.0);
    let y0 = a.1.min(b.1);
    let nx = ((a.2.max(b.2) - x0) / cell).ceil() as usize;
    let ny = ((a.3.max(b.3) - y0) / cell).ceil() as usize;
    let (mut inter, mut union) = (0usize, 0usize);
    for ix in 0..nx {
        let x = x0 + (ix as f64 + 0.5) * cell;
        for iy in 0..ny {
            let y = y0 + (iy as f64 + 0.5) * cell;
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += usize::from(ia && ib);
            union += usize::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

const WORDS: &[&str] = &[
    "20",
    "REASONS",
    "TO",
    "LOVE",
    "CYCLING",
    "OPEN",
    "DAILY",
    "CAFE",
    "NORTH",
    "STREET",
    "EXIT",
    "SALE",
    "FRESH",
    "BREAD",
    "PARKING",
    "ONLY",
    "MUSEUM",
    "OF",
    "MODERN",
    "ART",
    "the",
    "quick",
    "river",
    "bridge",
    "Zone",
    "B",
    "7",
    "Hôtel",
    "naïve",
    "\"quoted\"",
    "back\\slash",
    "It's",
];

pub fn random_text(rng: &mut impl Rng, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn rotated_box(cx: f64, cy: f64, w: f64, h: f64, deg: f64) -> Quad {
    let (s, c) = deg.to_radians().sin_cos();
    let corner = |dx: f64, dy: f64| Point { x: cx + dx * c - dy * s, y: cy + dx * s + dy * c };
    Quad::new([
        corner(-w / 2.0, -h / 2.0),
        corner(w / 2.0, -h / 2.0),
        corner(w / 2.0, h / 2.0),
        corner(-w / 2.0, h / 2.0),
    ])
    .unwrap()
}

/// A document of `blocks` blocks laid out on a grid, each with 1 to 4 stacked lines.
///
/// Ground-truth documents carry block texts (gold order is top to bottom).
pub fn synthetic_document(seed: u64, blocks: usize, kind: DocumentKind) -> Document {
    let mut rng = rng(seed);
    let cols = 5usize;
    let (cell_w, cell_h) = (400.0, 300.0);
    let rows = blocks.div_ceil(cols);
    let mut lines = Vec::new();
    let mut out_blocks = Vec::new();
    let mut next_id = 1i64;
    for b in 0..blocks {
        let (col, row) = ((b % cols) as f64, (b / cols) as f64);
        let n = rng.random_range(1..=4);
        let tilt = if rng.random_bool(0.3) { rng.random_range(-8.0..8.0) } else { 0.0 };
        let mut ids = Vec::new();
        let mut texts = Vec::new();
        for k in 0..n {
            let text = random_text(&mut rng, 4);
            let h = rng.random_range(24.0..40.0);
            let w = rng.random_range(80.0..300.0);
            let cx = col * cell_w + 30.0 + w / 2.0 + rng.random_range(0.0..40.0);
            let cy = row * cell_h + 40.0 + k as f64 * 55.0 + h / 2.0;
            lines.push(Line {
                id: LineId(next_id),
                quad: rotated_box(cx, cy, w, h, tilt),
                text: text.clone(),
                confidence: None,
            });
            ids.push(LineId(next_id));
            texts.push(text);
            next_id += 1;
        }
        let text = match kind {
            DocumentKind::GroundTruth => Some(texts.join(" ")),
            DocumentKind::Prediction => None,
        };
        out_blocks.push(Block { line_ids: ids, text });
    }
    let width = (cols as f64 * cell_w) as u32;
    let height = (rows as f64 * cell_h) as u32;
    Document::new(width, height, lines, out_blocks, kind, &ParseOptions::default()).unwrap()
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Regenerate golden files instead of comparing against them.
pub fn blessing() -> bool {
    std::env::var_os("BLOCKSPOT_BLESS").is_some()
}

pub const PROMPT_FIXTURE: &str = "prompt_fixture.json";

/// The 50-block prompt fixture document, written on first use or when blessing.
pub fn prompt_fixture() -> Document {
    let path = data_path(PROMPT_FIXTURE);
    if blessing() || !path.exists() {
        let doc = synthetic_document(2023, 50, DocumentKind::Prediction);
        std::fs::write(&path, blockspot::model::serialize_document(&doc)).unwrap();
    }
    blockspot::model::parse_document(&std::fs::read(&path).unwrap(), DocumentKind::Prediction).unwrap()
}

/// Compares each block's rendered prompt with its golden file; returns the mismatching block indices.
pub fn check_prompt_goldens() -> Vec<usize> {
    let doc = prompt_fixture();
    let dir = golden_dir().join("prompts");
    std::fs::create_dir_all(&dir).unwrap();
    let mut mismatches = Vec::new();
    for (i, block) in doc.blocks().iter().enumerate() {
        let (_, prompt) = blockspot::pipeline::prepare_block(&doc, block).unwrap();
        let rendered = blockspot::cli::format_prompt(&prompt);
        let path = dir.join(format!("block-{i:02}.txt"));
        if blessing() {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(golden) if golden == rendered => {}
            _ => mismatches.push(i),
        }
    }
    mismatches
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the `blockspot` binary with a clean `BLOCKSPOT_*` environment plus `env`.
pub fn blockspot(args: &[&str], env: &[(&str, &str)]) -> CliRun {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_blockspot"));
    cmd.args(args);
    for (key, _) in std::env::vars() {
        if key.starts_with("BLOCKSPOT_") {
            cmd.env_remove(key);
        }
    }
    cmd.envs(env.iter().copied());
    let out = cmd.output().expect("binary runs");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}
