//! Screenshot decoding, longest-edge resizing and grayscale conversion.
//!
//! Supported inputs are binary PGM (`P5`), binary PPM (`P6`), both with
//! maxval 255, and RAW payloads described by a JSON sidecar header
//! `{"width": W, "height": H, "channels": C}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Default longest edge after preprocessing.
pub const DEFAULT_LONGEST_EDGE: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u64),
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("unrecognized image format for {0}")]
    UnknownFormat(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major 8-bit image with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screenshot {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Screenshot {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Channel values of pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.pixels[start..start + self.channels]
    }
}

/// Row-major 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn into_screenshot(self) -> Screenshot {
        Screenshot {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels: self.pixels,
        }
    }
}

/// Sidecar header for RAW payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl RawHeader {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ImageError> {
        serde_json::from_slice(bytes).map_err(|e| ImageError::MalformedHeader(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("raw header serializes")
    }
}

/// Declared container format of an encoded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary PGM, `P5`.
    Pgm,
    /// Binary PPM, `P6`.
    Ppm,
    /// Headerless payload; geometry supplied out of band.
    Raw(RawHeader),
}

pub fn decode(bytes: &[u8], format: ImageFormat) -> Result<Screenshot, ImageError> {
    match format {
        ImageFormat::Pgm => decode_pnm(bytes, Some(1)),
        ImageFormat::Ppm => decode_pnm(bytes, Some(3)),
        ImageFormat::Raw(header) => decode_raw(&header, bytes),
    }
}

/// Decode a `P5` or `P6` file. `expect_channels` pins the magic when given.
pub fn decode_pnm(bytes: &[u8], expect_channels: Option<usize>) -> Result<Screenshot, ImageError> {
    let mut cursor = PnmCursor { bytes, pos: 0 };
    let magic = cursor.take(2)?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(ImageError::MalformedHeader(format!(
                "unknown magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    if let Some(expected) = expect_channels {
        if expected != channels {
            return Err(ImageError::MalformedHeader(format!(
                "expected a {}-channel file, found {}",
                expected,
                String::from_utf8_lossy(magic)
            )));
        }
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match cursor.bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let (width, height) = (width as usize, height as usize);
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    let expected = width * height * channels;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(ImageError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    Screenshot::new(width, height, channels, payload[..expected].to_vec())
}

pub fn decode_raw(header: &RawHeader, payload: &[u8]) -> Result<Screenshot, ImageError> {
    if header.width == 0 || header.height == 0 {
        return Err(ImageError::InvalidDimensions {
            width: header.width,
            height: header.height,
        });
    }
    if header.channels != 1 && header.channels != 3 {
        return Err(ImageError::UnsupportedChannels(header.channels));
    }
    let expected = header.width * header.height * header.channels;
    if payload.len() < expected {
        return Err(ImageError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    Screenshot::new(header.width, header.height, header.channels, payload[..expected].to_vec())
}

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        if self.pos + n > self.bytes.len() {
            return Err(ImageError::MalformedHeader("unexpected end of header".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, ImageError> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Encode as `P5` (one channel) or `P6` (three channels), maxval 255.
pub fn encode_pnm(img: &Screenshot) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn encode_raw(img: &Screenshot) -> (RawHeader, Vec<u8>) {
    (
        RawHeader {
            width: img.width,
            height: img.height,
            channels: img.channels,
        },
        img.pixels.clone(),
    )
}

/// Location of the sidecar header for a RAW payload: same stem, `.json`.
pub fn raw_sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

/// Read an image from disk, choosing the decoder by file extension.
///
/// `.pgm`, `.ppm` and `.pnm` are sniffed by magic; `.raw` reads its header
/// from [`raw_sidecar_path`].
pub fn load(path: &Path) -> Result<Screenshot, ImageError> {
    let read = |p: &Path| {
        fs::read(p).map_err(|source| ImageError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "ppm" | "pnm" => decode_pnm(&read(path)?, None),
        "raw" => {
            let header = RawHeader::from_json(&read(&raw_sidecar_path(path))?)?;
            decode_raw(&header, &read(path)?)
        }
        _ => Err(ImageError::UnknownFormat(path.to_path_buf())),
    }
}

/// Downscale so the longest edge equals `target`, preserving aspect ratio.
///
/// The shorter edge is rounded half away from zero with a floor of one pixel.
/// Images already within bound come back unchanged with scale `1.0`.
/// Returns the uniform scale `target / longest`.
pub fn resize_longest_edge(img: &Screenshot, target: usize) -> (Screenshot, f64) {
    assert!(target >= 1, "resize target must be at least one pixel");
    let longest = img.width.max(img.height);
    if longest <= target {
        return (img.clone(), 1.0);
    }
    let scale = target as f64 / longest as f64;
    let fit = |edge: usize| {
        if edge == longest {
            target
        } else {
            ((edge as f64 * scale).round() as usize).max(1)
        }
    };
    let (nw, nh) = (fit(img.width), fit(img.height));
    (bilinear(img, nw, nh), scale)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
fn bilinear(img: &Screenshot, nw: usize, nh: usize) -> Screenshot {
    let c = img.channels;
    let sx = img.width as f64 / nw as f64;
    let sy = img.height as f64 / nh as f64;
    let taps = |dst: usize, step: f64, src_len: usize| {
        let pos = ((dst as f64 + 0.5) * step - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let columns: Vec<_> = (0..nw).map(|x| taps(x, sx, img.width)).collect();
    let mut out = Vec::with_capacity(nw * nh * c);
    for y in 0..nh {
        let (y0, y1, fy) = taps(y, sy, img.height);
        for &(x0, x1, fx) in &columns {
            for ch in 0..c {
                let at = |xx: usize, yy: usize| img.pixels[(yy * img.width + xx) * c + ch] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Screenshot {
        width: nw,
        height: nh,
        channels: c,
        pixels: out,
    }
}

/// BT.601 luminance for RGB input; single-channel input passes through.
pub fn to_gray(img: &Screenshot) -> GrayImage {
    let pixels = if img.channels == 1 {
        img.pixels.clone()
    } else {
        img.pixels
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect()
    };
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Resize to the canonical frame (unless `resize` is false) and convert to
/// gray. Returns the gray image together with the applied scale factor.
pub fn preprocess(img: &Screenshot, resize: bool) -> (GrayImage, f64) {
    if resize {
        let (resized, scale) = resize_longest_edge(img, DEFAULT_LONGEST_EDGE);
        (to_gray(&resized), scale)
    } else {
        (to_gray(img), 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pnm(magic: &str, w: usize, h: usize, maxval: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn decodes_p5_identity() {
        let bytes = pnm("P5", 2, 2, 255, &[0, 0, 255, 255]);
        let img = decode(&bytes, ImageFormat::Pgm).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.pixels(), &[0, 0, 255, 255]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        let img = decode_pnm(&bytes, None).unwrap();
        assert_eq!(img.pixels(), &[7, 9]);
    }

    #[test]
    fn rejects_16_bit_maxval() {
        let bytes = pnm("P6", 1, 1, 65535, &[0; 6]);
        let err = decode(&bytes, ImageFormat::Ppm).unwrap_err();
        assert!(matches!(err, ImageError::UnsupportedMaxval(65535)));
        assert!(err.to_string().contains("unsupported maxval"));
    }

    #[test]
    fn raw_truncation_is_reported() {
        let header = RawHeader::from_json(br#"{"width":3,"height":3,"channels":3}"#).unwrap();
        let err = decode(&[0u8; 26], ImageFormat::Raw(header)).unwrap_err();
        assert!(matches!(err, ImageError::TruncatedPayload { expected: 27, actual: 26 }));
        assert!(err.to_string().contains("truncated payload"));
    }

    #[test]
    fn truncated_pnm_and_bad_magic() {
        assert!(matches!(
            decode_pnm(&pnm("P5", 2, 2, 255, &[1, 2, 3]), None),
            Err(ImageError::TruncatedPayload { .. })
        ));
        assert!(matches!(
            decode_pnm(b"P2\n1 1\n255\n0", None),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode(&pnm("P6", 1, 1, 255, &[1, 2, 3]), ImageFormat::Pgm),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(decode_pnm(b"P5\n1", None).is_err());
    }

    #[test]
    fn resize_examples() {
        let img = Screenshot::filled(2000, 1000, 1, 9).unwrap();
        let (out, scale) = resize_longest_edge(&img, 1000);
        assert_eq!((out.width(), out.height(), scale), (1000, 500, 0.5));

        let img = Screenshot::filled(800, 600, 3, 9).unwrap();
        let (out, scale) = resize_longest_edge(&img, 1000);
        assert_eq!(out, img);
        assert_eq!(scale, 1.0);

        // round(1000 * 2/3) = round(666.67) = 667
        assert_eq!((1000.0_f64 * 2.0 / 3.0).round(), 667.0);
        let img = Screenshot::filled(1000, 1500, 1, 9).unwrap();
        let (out, scale) = resize_longest_edge(&img, 1000);
        assert_eq!((out.width(), out.height()), (667, 1000));
        assert!((scale - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_aspect_keeps_one_pixel() {
        let img = Screenshot::filled(5000, 1, 1, 3).unwrap();
        let (out, _) = resize_longest_edge(&img, 1000);
        assert_eq!((out.width(), out.height()), (1000, 1));
    }

    #[test]
    fn gray_conversion() {
        let gray = Screenshot::new(2, 1, 1, vec![3, 250]).unwrap();
        assert_eq!(to_gray(&gray).pixels(), &[3, 250]);
        let rgb = Screenshot::new(2, 1, 3, vec![255, 255, 255, 255, 0, 0]).unwrap();
        // round(0.299 * 255) = round(76.245) = 76
        assert_eq!(to_gray(&rgb).pixels(), &[255, 76]);
    }

    fn arb_screenshot() -> impl Strategy<Value = Screenshot> {
        (1usize..12, 1usize..12, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
            proptest::collection::vec(any::<u8>(), w * h * c)
                .prop_map(move |px| Screenshot::new(w, h, c, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pnm_and_raw_round_trip(img in arb_screenshot()) {
            let fmt = if img.channels() == 1 { ImageFormat::Pgm } else { ImageFormat::Ppm };
            prop_assert_eq!(decode(&encode_pnm(&img), fmt).unwrap(), img.clone());
            let (header, payload) = encode_raw(&img);
            let header = RawHeader::from_json(header.to_json().as_bytes()).unwrap();
            prop_assert_eq!(decode(&payload, ImageFormat::Raw(header)).unwrap(), img);
        }

        #[test]
        fn constant_images_stay_constant(w in 1usize..60, h in 1usize..60, v in any::<u8>(), target in 1usize..20) {
            let img = Screenshot::filled(w, h, 1, v).unwrap();
            let (out, _) = resize_longest_edge(&img, target);
            prop_assert!(out.pixels().iter().all(|&p| p == v));
            prop_assert_eq!(out.width().max(out.height()), w.max(h).min(target));
        }

        #[test]
        fn gray_within_channel_range(img in arb_screenshot()) {
            let gray = to_gray(&img);
            for (i, &g) in gray.pixels().iter().enumerate() {
                let px = &img.pixels()[i * img.channels()..(i + 1) * img.channels()];
                let lo = *px.iter().min().unwrap();
                let hi = *px.iter().max().unwrap();
                prop_assert!(g >= lo && g <= hi);
            }
        }
    }
}
