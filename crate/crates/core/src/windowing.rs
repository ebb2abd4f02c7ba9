//! Grid partition of an image into rectangular windows and per-window
//! intensity entropy.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};
use crate::imaging::{GrayImage, Screenshot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("point ({x}, {y}) outside image bounds {width}x{height}")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Window size in pixels and histogram resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub cell_height: usize,
    pub cell_width: usize,
    pub bins: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cell_height: 50,
            cell_width: 50,
            bins: 256,
        }
    }
}

impl GridConfig {
    pub fn new(cell_height: usize, cell_width: usize, bins: usize) -> Result<Self, WindowError> {
        let cfg = Self {
            cell_height,
            cell_width,
            bins,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.cell_height == 0 || self.cell_width == 0 {
            return Err(WindowError::InvalidGrid("cell dimensions must be positive".into()));
        }
        if self.bins == 0 || self.bins > 256 || 256 % self.bins != 0 {
            return Err(WindowError::InvalidGrid(format!(
                "bins must divide 256, got {}",
                self.bins
            )));
        }
        Ok(())
    }

    /// `(M, N) = (⌈H/h⌉, ⌈W/w⌉)`.
    pub fn grid_dims(&self, height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(self.cell_height), width.div_ceil(self.cell_width))
    }
}

/// Pixel span `[⌊i·len/parts⌋, ⌊(i+1)·len/parts⌋)` of part `i`.
fn span(i: usize, len: usize, parts: usize) -> (usize, usize) {
    (i * len / parts, (i + 1) * len / parts)
}

/// Row-major list of the `M·N` window rectangles tiling an `height × width`
/// image. Boundaries are floored, so trailing windows absorb the remainder.
pub fn partition_bounds(height: usize, width: usize, cfg: &GridConfig) -> Vec<Rect> {
    let (rows, cols) = cfg.grid_dims(height, width);
    grid_rects(height, width, rows, cols)
}

fn grid_rects(height: usize, width: usize, rows: usize, cols: usize) -> Vec<Rect> {
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let (y0, y1) = span(i, height, rows);
        for j in 0..cols {
            let (x0, x1) = span(j, width, cols);
            out.push(Rect::new(x0, y0, x1, y1));
        }
    }
    out
}

/// Entropy of each window on an `rows × cols` grid, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyMap {
    rows: usize,
    cols: usize,
    image_height: usize,
    image_width: usize,
    entropies: Vec<f64>,
    max_entropy: f64,
}

impl EntropyMap {
    /// Build a map from known entropies (row-major).
    pub fn from_entropies(
        rows: usize,
        cols: usize,
        image_height: usize,
        image_width: usize,
        entropies: Vec<f64>,
    ) -> Result<Self, WindowError> {
        if rows == 0 || cols == 0 || rows > image_height || cols > image_width {
            return Err(WindowError::InvalidGrid(format!(
                "{rows}x{cols} grid does not fit a {image_height}x{image_width} image"
            )));
        }
        if entropies.len() != rows * cols {
            return Err(WindowError::InvalidGrid(format!(
                "expected {} entropies, got {}",
                rows * cols,
                entropies.len()
            )));
        }
        if entropies.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(WindowError::InvalidGrid("entropies must be finite and non-negative".into()));
        }
        let max_entropy = entropies.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            rows,
            cols,
            image_height,
            image_width,
            entropies,
            max_entropy,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn len(&self) -> usize {
        self.entropies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entropies.is_empty()
    }

    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn max_entropy(&self) -> f64 {
        self.max_entropy
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entropies[row * self.cols + col]
    }

    /// Pixel rectangle of window `(row, col)` (zero-based).
    pub fn cell_rect(&self, row: usize, col: usize) -> Rect {
        let (y0, y1) = span(row, self.image_height, self.rows);
        let (x0, x1) = span(col, self.image_width, self.cols);
        Rect::new(x0, y0, x1, y1)
    }

    pub fn cell_rects(&self) -> Vec<Rect> {
        grid_rects(self.image_height, self.image_width, self.rows, self.cols)
    }

    /// Entropies divided by `max + epsilon`; all zero for a blank map.
    pub fn normalized(&self, epsilon: f64) -> Vec<f64> {
        let denom = self.max_entropy + epsilon;
        self.entropies.iter().map(|h| h / denom).collect()
    }

    /// Zero-based window containing `(x, y)`.
    ///
    /// Uses `i = ⌈y·M/H⌉`, `j = ⌈x·N/W⌉` clamped into `1..=M`, `1..=N`, then
    /// shifted to zero-based. Points on the outer edge land in the last window.
    pub fn cell_of_point(&self, x: f64, y: f64) -> Result<(usize, usize), WindowError> {
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        if !(x >= 0.0 && x <= w && y >= 0.0 && y <= h) {
            return Err(WindowError::OutOfBounds {
                x,
                y,
                width: self.image_width,
                height: self.image_height,
            });
        }
        let index = |v: f64, parts: usize, len: f64| {
            let k = (v * parts as f64 / len).ceil() as usize;
            k.clamp(1, parts) - 1
        };
        Ok((index(y, self.rows, h), index(x, self.cols, w)))
    }

    pub fn cell_of(&self, p: &Point) -> Result<(usize, usize), WindowError> {
        self.cell_of_point(p.x, p.y)
    }

    /// Index of the highest-entropy window; ties resolve to the first in
    /// row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &h) in self.entropies.iter().enumerate() {
            if h > self.entropies[best] {
                best = k;
            }
        }
        (best / self.cols, best % self.cols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("entropy map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WindowError> {
        let raw: EntropyMap =
            serde_json::from_str(text).map_err(|e| WindowError::InvalidGrid(e.to_string()))?;
        Self::from_entropies(raw.rows, raw.cols, raw.image_height, raw.image_width, raw.entropies)
    }

    /// One pixel per window, intensity `round(255·ℋ/max(ℋ_max, ε))`.
    pub fn heatmap(&self, epsilon: f64) -> Screenshot {
        let denom = self.max_entropy.max(epsilon);
        let pixels = self
            .entropies
            .iter()
            .map(|h| (255.0 * h / denom).round().clamp(0.0, 255.0) as u8)
            .collect();
        Screenshot::new(self.cols, self.rows, 1, pixels).expect("heatmap geometry is valid")
    }
}

/// Shannon entropy (bits) of the histogram of `counts` over `total` samples.
pub fn histogram_entropy(counts: &[u32], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Per-window entropy of `img` over `cfg.bins` equal-width intensity bins.
pub fn entropy_map(img: &GrayImage, cfg: &GridConfig) -> EntropyMap {
    let (height, width) = (img.height(), img.width());
    let (rows, cols) = cfg.grid_dims(height, width);
    let shift = 256 / cfg.bins;
    let mut counts = vec![0u32; cfg.bins];
    let entropies = grid_rects(height, width, rows, cols)
        .into_iter()
        .map(|rect| {
            counts.iter_mut().for_each(|c| *c = 0);
            for y in rect.y0..rect.y1 {
                for &v in &img.row(y)[rect.x0..rect.x1] {
                    counts[v as usize / shift] += 1;
                }
            }
            histogram_entropy(&counts, rect.area())
        })
        .collect();
    EntropyMap::from_entropies(rows, cols, height, width, entropies).expect("grid fits image")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> GrayImage {
        let mut px = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                px.push(f(x, y));
            }
        }
        GrayImage::new(width, height, px).unwrap()
    }

    #[test]
    fn grid_config_validation() {
        assert!(GridConfig::new(0, 5, 256).is_err());
        assert!(GridConfig::new(5, 5, 3).is_err());
        assert!(GridConfig::new(5, 5, 512).is_err());
        assert!(GridConfig::new(5, 5, 16).is_ok());
    }

    #[test]
    fn partition_examples() {
        let cfg = GridConfig::new(50, 50, 256).unwrap();
        let cells = partition_bounds(100, 100, &cfg);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|r| r.width() == 50 && r.height() == 50));

        // floor(i·101/3) for i = 0..=3 gives 0, 33, 67, 101
        let b: Vec<usize> = (0..=3).map(|i| i * 101 / 3).collect();
        assert_eq!(b, vec![0, 33, 67, 101]);
        let cells = partition_bounds(101, 100, &cfg);
        let heights: Vec<usize> = cells.iter().step_by(2).map(Rect::height).collect();
        assert_eq!(heights, vec![33, 34, 34]);

        let cells = partition_bounds(10, 10, &cfg);
        assert_eq!(cells, vec![Rect::new(0, 0, 10, 10)]);
    }

    #[test]
    fn entropy_examples() {
        let cfg = GridConfig::default();
        let flat = gray(16, 16, |_, _| 77);
        assert_eq!(entropy_map(&flat, &cfg).entropies(), &[0.0]);

        let half = gray(16, 16, |x, _| if x < 8 { 0 } else { 255 });
        assert!((entropy_map(&half, &cfg).get(0, 0) - 1.0).abs() < 1e-12);

        let all = gray(16, 16, |x, y| (y * 16 + x) as u8);
        assert!((entropy_map(&all, &cfg).get(0, 0) - 8.0).abs() < 1e-12);

        // four bins: each pixel value band of width 64 is one bin
        let coarse = GridConfig::new(50, 50, 4).unwrap();
        assert!((entropy_map(&all, &coarse).get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cell_of_point_examples() {
        let map = EntropyMap::from_entropies(2, 2, 100, 100, vec![0.0; 4]).unwrap();
        assert_eq!(map.cell_of_point(0.0, 0.0).unwrap(), (0, 0));
        assert_eq!(map.cell_of_point(100.0, 100.0).unwrap(), (1, 1));
        // ⌈25·2/100⌉ = 1, ⌈75·2/100⌉ = 2
        assert_eq!(map.cell_of_point(75.0, 25.0).unwrap(), (0, 1));
        assert!(matches!(
            map.cell_of_point(100.5, 3.0),
            Err(WindowError::OutOfBounds { .. })
        ));
        assert!(map.cell_of_point(-0.1, 3.0).is_err());
        assert!(map.cell_of_point(f64::NAN, 3.0).is_err());
    }

    #[test]
    fn cell_of_point_matches_partition_on_pixel_centers() {
        // For every pixel center, the ceiling rule and the floored tiling can
        // only disagree on the single pixel row/column sitting on a fractional
        // boundary whose fractional part is at least one half.
        for &(h, w, ch, cw) in &[(100, 100, 50, 50), (12, 9, 4, 3), (101, 100, 50, 50), (17, 23, 5, 7), (7, 7, 2, 3)] {
            let cfg = GridConfig::new(ch, cw, 256).unwrap();
            let img = gray(w, h, |_, _| 0);
            let map = entropy_map(&img, &cfg);
            let rects = map.cell_rects();
            let straddles = |p: usize, len: usize, parts: usize| {
                (1..parts).any(|i| {
                    let b = (i * len) as f64 / parts as f64;
                    p == b.floor() as usize && b.fract() >= 0.5
                })
            };
            for py in 0..h {
                for px in 0..w {
                    let (i, j) = map.cell_of_point(px as f64 + 0.5, py as f64 + 0.5).unwrap();
                    let owner = rects.iter().position(|r| r.contains_pixel(px, py)).unwrap();
                    let agrees = owner == i * map.cols() + j;
                    let exempt = straddles(py, h, map.rows()) || straddles(px, w, map.cols());
                    assert!(agrees || exempt, "disagreement at ({px},{py}) for {h}x{w}");
                    if h % map.rows() == 0 && w % map.cols() == 0 {
                        assert!(agrees);
                    }
                }
            }
        }
    }

    #[test]
    fn json_and_heatmap_export() {
        let map = EntropyMap::from_entropies(2, 2, 100, 100, vec![0.0, 2.0, 4.0, 8.0]).unwrap();
        let back = EntropyMap::from_json(&map.to_json()).unwrap();
        assert_eq!(back, map);
        assert!(map.to_json().contains("\"entropies\":[0.0,2.0,4.0,8.0]"));
        let hm = map.heatmap(1e-6);
        assert_eq!((hm.width(), hm.height()), (2, 2));
        assert_eq!(hm.pixels(), &[0, 64, 128, 255]);

        let blank = EntropyMap::from_entropies(1, 2, 10, 10, vec![0.0, 0.0]).unwrap();
        assert_eq!(blank.heatmap(1e-6).pixels(), &[0, 0]);
        assert_eq!(map.argmax(), (1, 1));
    }

    proptest! {
        #[test]
        fn tiling_and_bounds(h in 1usize..80, w in 1usize..80, ch in 1usize..30, cw in 1usize..30,
                             bins_pow in 0u32..9, seed in any::<u64>()) {
            let bins = 1usize << bins_pow;
            let cfg = GridConfig::new(ch, cw, bins).unwrap();
            let rects = partition_bounds(h, w, &cfg);
            prop_assert_eq!(rects.iter().map(Rect::area).sum::<usize>(), h * w);
            for (a, ra) in rects.iter().enumerate() {
                for rb in &rects[a + 1..] {
                    prop_assert!(!ra.intersects(rb));
                }
            }
            let img = gray(w, h, |x, y| ((x as u64 * 31 + y as u64 * 17) ^ seed).wrapping_mul(2654435761) as u8);
            let map = entropy_map(&img, &cfg);
            for (k, r) in rects.iter().enumerate() {
                let bound = (bins.min(r.area()) as f64).log2();
                prop_assert!(map.entropies()[k] >= 0.0);
                prop_assert!(map.entropies()[k] <= bound + 1e-9);
            }
            let max = map.entropies().iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(map.max_entropy(), max);
        }

        #[test]
        fn entropy_invariant_under_gray_permutation(seed in any::<u64>(), rot in 1u8..=255) {
            let img = gray(30, 20, |x, y| ((x * 7 + y * 13) as u64 ^ seed).wrapping_mul(0x9E3779B97F4A7C15).to_le_bytes()[3]);
            // value ↦ value·odd + rot is a bijection on u8
            let perm = gray(30, 20, |x, y| img.get(x, y).wrapping_mul(37).wrapping_add(rot));
            let cfg = GridConfig::new(7, 9, 256).unwrap();
            let a = entropy_map(&img, &cfg);
            let b = entropy_map(&perm, &cfg);
            for (ha, hb) in a.entropies().iter().zip(b.entropies()) {
                prop_assert!((ha - hb).abs() < 1e-12);
            }
        }
    }
}
