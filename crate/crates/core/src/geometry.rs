//! Pixel-space points and rectangles shared by the windowing, reward and
//! environment modules.

use serde::{Deserialize, Serialize};

/// A location in pixel coordinates. `x` grows rightward, `y` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scaled(&self, factor: f64) -> Point {
        Point::new(self.x * factor, self.y * factor)
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub const fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Geometric center in continuous pixel coordinates.
    pub fn center(&self) -> Point {
        Point::new(
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        )
    }

    /// Whether the pixel at integer position `(px, py)` lies inside.
    pub fn contains_pixel(&self, px: usize, py: usize) -> bool {
        px >= self.x0 && px < self.x1 && py >= self.y0 && py < self.y1
    }

    /// Closed containment test for a continuous point.
    pub fn contains_point(&self, p: &Point) -> bool {
        p.x >= self.x0 as f64 && p.x <= self.x1 as f64 && p.y >= self.y0 as f64 && p.y <= self.y1 as f64
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Grow by `margin` pixels on every side, saturating at zero.
    pub fn inflate(&self, margin: usize) -> Rect {
        Rect::new(
            self.x0.saturating_sub(margin),
            self.y0.saturating_sub(margin),
            self.x1 + margin,
            self.y1 + margin,
        )
    }
}
