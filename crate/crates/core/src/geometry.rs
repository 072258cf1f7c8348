//! Quadrilateral geometry for line boxes.
//!
//! Covers the per-line recognizer preprocessing plan (rotation snapping, crop
//! rectangle, aspect-preserving split), polygon IoU for evaluation, and the
//! integer box translation used when boxes are written into prompts.

use serde::{Deserialize, Serialize};

use crate::model::{signed_area, Point, Quad};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate quad: edge {edge} has zero length")]
    ZeroLengthEdge { edge: usize },
    #[error("degenerate crop: {width:.3}x{height:.3} px is smaller than one pixel")]
    DegenerateCrop { width: f64, height: f64 },
    #[error("invalid rectangle ({x_min}, {y_min})-({x_max}, {y_max})")]
    InvalidRect { x_min: f64, y_min: f64, x_max: f64, y_max: f64 },
    #[error("invalid recognizer input size {height}x{width}")]
    InvalidRecognizerSpec { height: u32, width: u32 },
    #[error("no boxes given")]
    Empty,
}

/// Axis-aligned rectangle with real coordinates, `x_min < x_max` and `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AlignedRect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidRect { x_min, y_min, x_max, y_max });
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    /// Bounds of a quad. Always valid because quads have positive area.
    pub fn of_quad(quad: &Quad) -> Self {
        let (x_min, y_min, x_max, y_max) = quad.bounds();
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point {
        Point::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn to_quad(&self) -> Quad {
        Quad::from_bounds(self.x_min, self.y_min, self.x_max, self.y_max).expect("a valid rectangle is a valid quad")
    }
}

/// Integer rectangle as written into prompts: `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl PixelRect {
    pub fn as_array(&self) -> [i64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Input size of the line recognizer, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognizerSpec {
    pub input_height: u32,
    pub input_width: u32,
}

impl Default for RecognizerSpec {
    fn default() -> Self {
        Self { input_height: 32, input_width: 128 }
    }
}

impl RecognizerSpec {
    pub fn new(input_height: u32, input_width: u32) -> Result<Self, GeometryError> {
        if input_height == 0 || input_width == 0 {
            return Err(GeometryError::InvalidRecognizerSpec { height: input_height, width: input_width });
        }
        Ok(Self { input_height, input_width })
    }

    /// Width over height.
    pub fn aspect(&self) -> f64 {
        f64::from(self.input_width) / f64::from(self.input_height)
    }
}

fn edges(quad: &Quad) -> impl Iterator<Item = (Point, Point)> + '_ {
    let v = quad.vertices();
    (0..4).map(move |i| (v[i], v[(i + 1) % 4]))
}

/// Angle in degrees of the quad's longest edge, folded into `(-90, 90]`.
///
/// Image coordinates are used as-is (y grows downwards), so a positive angle
/// means the edge descends to the right.
pub fn dominant_angle(quad: &Quad) -> Result<f64, GeometryError> {
    let mut lengths = [0.0; 4];
    for (i, (a, b)) in edges(quad).enumerate() {
        let len = (b.x - a.x).hypot(b.y - a.y);
        if len <= EPS {
            return Err(GeometryError::ZeroLengthEdge { edge: i });
        }
        lengths[i] = len;
    }
    let longest = lengths.iter().cloned().fold(0.0, f64::max);
    // first edge within rounding of the maximum, so squares pick edge 0
    let i = lengths.iter().position(|&l| l >= longest * (1.0 - EPS)).unwrap_or(0);
    let v = quad.vertices();
    let (a, b) = (v[i], v[(i + 1) % 4]);
    let mut angle = (b.y - a.y).atan2(b.x - a.x).to_degrees();
    if angle > 90.0 + EPS {
        angle -= 180.0;
    } else if angle <= -90.0 + EPS {
        angle += 180.0;
    }
    Ok(angle)
}

/// Rotation (degrees) that axis-aligns the box.
///
/// Boxes tilted by at most 45 degrees are rotated back onto the x-axis, the
/// rest onto the y-axis, so the result always satisfies `|theta| <= 45`.
pub fn snap_rotation(quad: &Quad) -> Result<f64, GeometryError> {
    let alpha = dominant_angle(quad)?;
    let theta = if alpha.abs() <= 45.0 + EPS { -alpha } else { alpha.signum() * 90.0 - alpha };
    // avoid handing out -0.0
    Ok(if theta == 0.0 { 0.0 } else { theta })
}

pub fn rotate_point(p: Point, theta_deg: f64) -> Point {
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    Point::new(p.x * cos - p.y * sin, p.x * sin + p.y * cos)
}

/// Axis-aligned bounds of the quad after rotating it by `theta` about the image origin.
pub fn crop_rect(quad: &Quad, theta: f64) -> Result<AlignedRect, GeometryError> {
    let rotated = quad.vertices().map(|p| rotate_point(p, theta));
    let x_min = rotated.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x_max = rotated.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y_min = rotated.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_max = rotated.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (width, height) = (x_max - x_min, y_max - y_min);
    if width < 1.0 - EPS || height < 1.0 - EPS {
        return Err(GeometryError::DegenerateCrop { width, height });
    }
    Ok(AlignedRect { x_min, y_min, x_max, y_max })
}

/// Splits a crop into equal-width parts whose aspect does not exceed the recognizer's.
///
/// `n = ceil(w / (h * aspect))` parts, left to right, tiling the crop exactly.
pub fn split_for_recognizer(rect: &AlignedRect, spec: &RecognizerSpec) -> Vec<AlignedRect> {
    let (w, h) = (rect.width(), rect.height());
    let parts = ((w / (h * spec.aspect())) - EPS).ceil().max(1.0) as usize;
    let step = w / parts as f64;
    (0..parts)
        .map(|i| {
            let x_min = rect.x_min + step * i as f64;
            // pin the last edge so the parts cover the rect exactly
            let x_max = if i + 1 == parts { rect.x_max } else { rect.x_min + step * (i + 1) as f64 };
            AlignedRect { x_min, y_min: rect.y_min, x_max, y_max: rect.y_max }
        })
        .collect()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let r = Point::new(q.x - p.x, q.y - p.y);
    let s = Point::new(b.x - a.x, b.y - a.y);
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < f64::MIN_POSITIVE {
        return q;
    }
    let t = ((a.x - p.x) * s.y - (a.y - p.y) * s.x) / denom;
    Point::new(p.x + t * r.x, p.y + t * r.y)
}

/// Sutherland-Hodgman clip of `subject` against the convex, positively wound `clip` polygon.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

/// Intersection over union of two quads, by exact convex clipping.
pub fn iou(a: &Quad, b: &Quad) -> f64 {
    let inter = clip_convex(a.vertices(), b.vertices());
    let inter_area = if inter.len() < 3 { 0.0 } else { signed_area(&inter).max(0.0) };
    let union = a.area() + b.area() - inter_area;
    if union <= 0.0 {
        return 0.0;
    }
    (inter_area / union).clamp(0.0, 1.0)
}

/// Bounds of each box, shifted so the block's minimum x and y are zero, rounded
/// half away from zero.
pub fn translate_block_boxes(boxes: &[Quad]) -> Result<Vec<PixelRect>, GeometryError> {
    if boxes.is_empty() {
        return Err(GeometryError::Empty);
    }
    let rects: Vec<AlignedRect> = boxes.iter().map(AlignedRect::of_quad).collect();
    let dx = rects.iter().map(|r| r.x_min).fold(f64::INFINITY, f64::min);
    let dy = rects.iter().map(|r| r.y_min).fold(f64::INFINITY, f64::min);
    let px = |v: f64, d: f64| (v - d).round() as i64;
    Ok(rects
        .iter()
        .map(|r| PixelRect {
            x_min: px(r.x_min, dx),
            y_min: px(r.y_min, dy),
            x_max: px(r.x_max, dx),
            y_max: px(r.y_max, dy),
        })
        .collect())
}
