//! Core document types and the JSON schema shared by predictions and ground truth.
//!
//! A [`Document`] holds the detected lines of one image and their grouping into
//! blocks. Ground-truth documents use the same schema; there the `line_ids`
//! order of each block is the gold reading order and the block `text` is the
//! gold block string.
//!
//! Documents are validated on construction and immutable afterwards, so they
//! can be shared freely between worker threads.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Default slack (in pixels) allowed for vertices outside the image bounds.
pub const DEFAULT_BOUNDS_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Why a set of four vertices does not form a usable quadrilateral.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("zero area")]
    ZeroArea,
    #[error("polygon is not convex")]
    NotConvex,
}

/// A convex, non-degenerate quadrilateral in image pixel coordinates.
///
/// Vertices are stored with positive signed shoelace area (counter-clockwise
/// in a y-up frame). Construction reverses the winding when needed but keeps
/// the first vertex in place, so normalization is idempotent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    vertices: [Point; 4],
}

const AREA_EPSILON: f64 = 1e-9;

impl Quad {
    pub fn new(vertices: [Point; 4]) -> Result<Self, QuadError> {
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(QuadError::NonFinite);
        }
        let mut vertices = vertices;
        let area = signed_area(&vertices);
        if area.abs() <= AREA_EPSILON {
            return Err(QuadError::ZeroArea);
        }
        if area < 0.0 {
            vertices[1..].reverse();
        }
        // every turn must be left (or straight) once winding is positive
        for i in 0..4 {
            let a = vertices[i];
            let b = vertices[(i + 1) % 4];
            let c = vertices[(i + 2) % 4];
            let turn = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if turn < -AREA_EPSILON {
                return Err(QuadError::NotConvex);
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle as a quad: (x_min, y_min), (x_max, y_min), ...
    pub fn from_bounds(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, QuadError> {
        Self::new([
            Point::new(x_min, y_min),
            Point::new(x_max, y_min),
            Point::new(x_max, y_max),
            Point::new(x_min, y_max),
        ])
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// `(x_min, y_min, x_max, y_max)` of the vertices.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            b.0 = b.0.min(p.x);
            b.1 = b.1.min(p.y);
            b.2 = b.2.max(p.x);
            b.3 = b.3.max(p.y);
        }
        b
    }
}

pub(crate) fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub i64);

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: LineId,
    pub quad: Quad,
    pub text: String,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub line_ids: Vec<LineId>,
    pub text: Option<String>,
}

impl Block {
    pub fn new(line_ids: Vec<LineId>) -> Self {
        Self { line_ids, text: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Prediction,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Pixels a vertex may lie outside `[0, width] x [0, height]`.
    pub bounds_margin: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { bounds_margin: DEFAULT_BOUNDS_MARGIN }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image dimensions must be positive, got {width}x{height}")]
    InvalidDimensions { width: i64, height: i64 },
    #[error("{path}: duplicate line id {id}")]
    DuplicateLineId { path: String, id: LineId },
    #[error("{path}: line id {id} has {count} vertices, expected 4")]
    VertexCount { path: String, id: LineId, count: usize },
    #[error("{path}: degenerate quad for line id {id}: {reason}")]
    DegenerateQuad { path: String, id: LineId, reason: QuadError },
    #[error("{path}: vertex ({x}, {y}) of line id {id} lies outside the image")]
    OutOfBounds { path: String, id: LineId, x: f64, y: f64 },
    #[error("{path}: text of line id {id} contains a control character")]
    ControlCharacter { path: String, id: LineId },
    #[error("{path}: confidence {value} of line id {id} is outside [0, 1]")]
    InvalidConfidence { path: String, id: LineId, value: f64 },
    #[error("{path}: block has no lines")]
    EmptyBlock { path: String },
    #[error("{path}: unknown line id {id}")]
    UnknownLineId { path: String, id: LineId },
    #[error("{path}: line id {id} listed twice in the same block")]
    DuplicateInBlock { path: String, id: LineId },
    #[error("{path}: line in multiple blocks: line id {id}")]
    LineInMultipleBlocks { path: String, id: LineId },
}

/// A validated document: image size, lines and their grouping into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    image_width: u32,
    image_height: u32,
    lines: Vec<Line>,
    blocks: Vec<Block>,
    kind: DocumentKind,
    index: HashMap<LineId, usize>,
}

impl Document {
    pub fn new(
        image_width: u32,
        image_height: u32,
        lines: Vec<Line>,
        blocks: Vec<Block>,
        kind: DocumentKind,
        options: &ParseOptions,
    ) -> Result<Self, DocumentError> {
        if image_width == 0 || image_height == 0 {
            return Err(DocumentError::InvalidDimensions { width: image_width.into(), height: image_height.into() });
        }
        let w = f64::from(image_width);
        let h = f64::from(image_height);
        let m = options.bounds_margin;
        let mut index = HashMap::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let path = format!("lines[{i}]");
            if index.insert(line.id, i).is_some() {
                return Err(DocumentError::DuplicateLineId { path, id: line.id });
            }
            for p in line.quad.vertices() {
                if p.x < -m || p.y < -m || p.x > w + m || p.y > h + m {
                    return Err(DocumentError::OutOfBounds { path, id: line.id, x: p.x, y: p.y });
                }
            }
            if line.text.chars().any(char::is_control) {
                return Err(DocumentError::ControlCharacter { path, id: line.id });
            }
            if let Some(c) = line.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(DocumentError::InvalidConfidence { path, id: line.id, value: c });
                }
            }
        }

        let mut owner: HashMap<LineId, usize> = HashMap::new();
        for (b, block) in blocks.iter().enumerate() {
            if block.line_ids.is_empty() {
                return Err(DocumentError::EmptyBlock { path: format!("blocks[{b}]") });
            }
            let mut seen = HashSet::new();
            for (k, &id) in block.line_ids.iter().enumerate() {
                let path = format!("blocks[{b}].line_ids[{k}]");
                if !index.contains_key(&id) {
                    return Err(DocumentError::UnknownLineId { path, id });
                }
                if !seen.insert(id) {
                    return Err(DocumentError::DuplicateInBlock { path, id });
                }
                if owner.insert(id, b).is_some() {
                    return Err(DocumentError::LineInMultipleBlocks { path, id });
                }
            }
        }

        Ok(Self { image_width, image_height, lines, blocks, kind, index })
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn kind(&self) -> DocumentKind {
        self.kind
    }

    pub fn is_ground_truth(&self) -> bool {
        self.kind == DocumentKind::GroundTruth
    }

    pub fn line(&self, id: LineId) -> Option<&Line> {
        self.index.get(&id).map(|&i| &self.lines[i])
    }

    /// Member lines of a block, in block order.
    ///
    /// Panics if the block does not belong to this document.
    pub fn block_lines<'a, 'b>(&'a self, block: &'b Block) -> impl Iterator<Item = &'a Line> + use<'a, 'b> {
        block.line_ids.iter().map(move |id| self.line(*id).expect("block references a line outside its document"))
    }

    /// Ids of lines that belong to no block, in document line order.
    pub fn ungrouped_line_ids(&self) -> Vec<LineId> {
        let grouped: HashSet<LineId> = self.blocks.iter().flat_map(|b| b.line_ids.iter().copied()).collect();
        self.lines.iter().map(|l| l.id).filter(|id| !grouped.contains(id)).collect()
    }

    /// Text of a ground-truth block: its explicit `text`, or its lines joined
    /// by single spaces in gold order when the file carries no block string.
    pub fn gold_text(&self, block: &Block) -> String {
        match &block.text {
            Some(t) => t.clone(),
            None => self.block_lines(block).map(|l| l.text.as_str()).collect::<Vec<_>>().join(" "),
        }
    }

    /// Same document with the block list replaced; revalidated.
    pub fn with_blocks(&self, blocks: Vec<Block>) -> Result<Self, DocumentError> {
        let options = ParseOptions { bounds_margin: f64::INFINITY };
        Self::new(self.image_width, self.image_height, self.lines.clone(), blocks, self.kind, &options)
    }

    /// Same document with line texts replaced by id; lines absent from the map keep their text.
    pub fn with_line_texts(&self, texts: &HashMap<LineId, String>) -> Result<Self, DocumentError> {
        let lines = self
            .lines
            .iter()
            .map(|l| Line { text: texts.get(&l.id).cloned().unwrap_or_else(|| l.text.clone()), ..l.clone() })
            .collect();
        let options = ParseOptions { bounds_margin: f64::INFINITY };
        Self::new(self.image_width, self.image_height, lines, self.blocks.clone(), self.kind, &options)
    }
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    image_width: i64,
    image_height: i64,
    lines: Vec<RawLine>,
    #[serde(default)]
    blocks: Vec<RawBlock>,
}

#[derive(Serialize, Deserialize)]
struct RawLine {
    id: i64,
    vertices: Vec<[f64; 2]>,
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBlock {
    line_ids: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

pub fn parse_document(raw: &[u8], kind: DocumentKind) -> Result<Document, DocumentError> {
    parse_document_with(raw, kind, &ParseOptions::default())
}

pub fn parse_document_with(raw: &[u8], kind: DocumentKind, options: &ParseOptions) -> Result<Document, DocumentError> {
    let doc: RawDocument = serde_json::from_slice(raw)?;
    let (width, height) = match (u32::try_from(doc.image_width), u32::try_from(doc.image_height)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(DocumentError::InvalidDimensions { width: doc.image_width, height: doc.image_height }),
    };

    let mut lines = Vec::with_capacity(doc.lines.len());
    for (i, raw) in doc.lines.into_iter().enumerate() {
        let id = LineId(raw.id);
        let path = format!("lines[{i}]");
        let vertices: [[f64; 2]; 4] = raw.vertices.as_slice().try_into().map_err(|_| DocumentError::VertexCount {
            path: path.clone(),
            id,
            count: raw.vertices.len(),
        })?;
        let quad = Quad::new(vertices.map(|[x, y]| Point::new(x, y)))
            .map_err(|reason| DocumentError::DegenerateQuad { path, id, reason })?;
        lines.push(Line { id, quad, text: raw.text, confidence: raw.confidence });
    }
    let blocks = doc
        .blocks
        .into_iter()
        .map(|b| Block { line_ids: b.line_ids.into_iter().map(LineId).collect(), text: b.text })
        .collect();

    Document::new(width, height, lines, blocks, kind, options)
}

/// Pretty-printed JSON with a fixed key order and a trailing newline.
pub fn serialize_document(doc: &Document) -> Vec<u8> {
    let raw = RawDocument {
        image_width: doc.image_width.into(),
        image_height: doc.image_height.into(),
        lines: doc
            .lines
            .iter()
            .map(|l| RawLine {
                id: l.id.0,
                vertices: l.quad.vertices().iter().map(|p| [p.x, p.y]).collect(),
                text: l.text.clone(),
                confidence: l.confidence,
            })
            .collect(),
        blocks: doc
            .blocks
            .iter()
            .map(|b| RawBlock { line_ids: b.line_ids.iter().map(|id| id.0).collect(), text: b.text.clone() })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&raw).expect("document serialization cannot fail");
    out.push(b'\n');
    out
}
