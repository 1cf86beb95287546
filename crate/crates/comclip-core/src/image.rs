//! Raw RGB image buffers and counterfactual subimage construction.
//!
//! A subimage keeps the source pixels inside a union of boxes and replaces
//! everything else with a fill (black zeros, or a Gaussian blur of the
//! source). All subimages keep the source dimensions so subject, object,
//! and predicate views share geometry and encoder preprocessing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("pixel buffer length {got} does not match {width}x{height}x3")]
    BufferSize { width: u32, height: u32, got: usize },
    #[error("invalid box ({x1},{y1},{x2},{y2}) for {width}x{height} image")]
    InvalidBox {
        x1: i64,
        y1: i64,
        x2: i64,
        y2: i64,
        width: u32,
        height: u32,
    },
    #[error("no regions to build a predicate subimage from")]
    NoRegions,
}

/// Row-major RGB8 pixel buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBuf {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuf {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        let expect = width as usize * height as usize * CHANNELS;
        if pixels.len() != expect || width == 0 || height == 0 {
            return Err(ImageError::BufferSize {
                width,
                height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * CHANNELS],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn is_black(&self) -> bool {
        self.pixels.iter().all(|&b| b == 0)
    }

    /// Content hash of the canonical byte form ("IMG1" ++ width ++ height
    /// ++ pixels, integers little-endian). Stable across encodings.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"IMG1");
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        h.finalize().into()
    }

    /// Copy out the rectangle covered by `region`.
    pub fn crop(&self, region: &BoxRegion) -> ImageBuf {
        let w = (region.x2 - region.x1) as usize;
        let h = (region.y2 - region.y1) as usize;
        let mut pixels = Vec::with_capacity(w * h * CHANNELS);
        for y in region.y1..region.y2 {
            let start = (y as usize * self.width as usize + region.x1 as usize) * CHANNELS;
            pixels.extend_from_slice(&self.pixels[start..start + w * CHANNELS]);
        }
        ImageBuf {
            width: w as u32,
            height: h as u32,
            pixels,
        }
    }
}

/// Axis-aligned pixel box, origin top-left, half-open in neither end:
/// covers x in [x1, x2) and y in [y1, y2) with x1 < x2 and y1 < y2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoxRegion {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BoxRegion {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, ImageError> {
        if x1 >= x2 || y1 >= y2 {
            return Err(ImageError::InvalidBox {
                x1: x1 as i64,
                y1: y1 as i64,
                x2: x2 as i64,
                y2: y2 as i64,
                width: 0,
                height: 0,
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Validate raw wire coordinates against image bounds, clamping
    /// overshoots of at most one pixel (dense captioners emit those).
    pub fn clamp_for(
        coords: [i64; 4],
        width: u32,
        height: u32,
    ) -> Result<Self, ImageError> {
        let [x1, y1, x2, y2] = coords;
        let err = || ImageError::InvalidBox {
            x1,
            y1,
            x2,
            y2,
            width,
            height,
        };
        let clamp = |v: i64, hi: u32| -> Result<u32, ImageError> {
            if v < -1 || v > hi as i64 + 1 {
                Err(err())
            } else {
                Ok(v.clamp(0, hi as i64) as u32)
            }
        };
        let b = Self {
            x1: clamp(x1, width)?,
            y1: clamp(y1, height)?,
            x2: clamp(x2, width)?,
            y2: clamp(y2, height)?,
        };
        if b.x1 >= b.x2 || b.y1 >= b.y2 {
            return Err(err());
        }
        Ok(b)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    fn check_within(&self, width: u32, height: u32) -> Result<(), ImageError> {
        if self.x2 > width || self.y2 > height {
            return Err(ImageError::InvalidBox {
                x1: self.x1 as i64,
                y1: self.y1 as i64,
                x2: self.x2 as i64,
                y2: self.y2 as i64,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Smallest box covering all the given boxes.
pub fn union_bounding_box(boxes: &[BoxRegion]) -> Option<BoxRegion> {
    let first = boxes.first()?;
    let mut out = *first;
    for b in &boxes[1..] {
        out.x1 = out.x1.min(b.x1);
        out.y1 = out.y1.min(b.y1);
        out.x2 = out.x2.max(b.x2);
        out.y2 = out.y2.max(b.y2);
    }
    Some(out)
}

/// Which entity a subimage isolates, or the whole-image fallback used when
/// an entity could not be grounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubimageKind {
    Subject,
    Object,
    Predicate,
    FallbackOriginal,
}

/// How background pixels outside the preserved regions are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    Black,
    Blur,
}

/// Fill policy plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillStyle {
    pub policy: FillPolicy,
    /// Blur kernel radius as a fraction of min(width, height).
    pub blur_radius_frac: f64,
}

impl Default for FillStyle {
    fn default() -> Self {
        Self {
            policy: FillPolicy::Black,
            blur_radius_frac: 0.05,
        }
    }
}

impl FillStyle {
    pub fn black() -> Self {
        Self::default()
    }

    pub fn blur(radius_frac: f64) -> Self {
        Self {
            policy: FillPolicy::Blur,
            blur_radius_frac: radius_frac,
        }
    }
}

/// A counterfactual view of the source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subimage {
    pub image: ImageBuf,
    pub kind: SubimageKind,
    pub source_boxes: Vec<BoxRegion>,
    pub fill: FillPolicy,
}

fn masked(
    src: &ImageBuf,
    boxes: &[BoxRegion],
    fill: FillStyle,
) -> Result<ImageBuf, ImageError> {
    for b in boxes {
        b.check_within(src.width, src.height)?;
    }
    let mut out = match fill.policy {
        FillPolicy::Black => ImageBuf::zeros(src.width, src.height),
        FillPolicy::Blur => gaussian_blur(src, blur_radius(src.width, src.height, fill.blur_radius_frac)),
    };
    let row = src.width as usize * CHANNELS;
    for b in boxes {
        for y in b.y1..b.y2 {
            let start = y as usize * row + b.x1 as usize * CHANNELS;
            let end = y as usize * row + b.x2 as usize * CHANNELS;
            out.pixels[start..end].copy_from_slice(&src.pixels[start..end]);
        }
    }
    Ok(out)
}

/// Subimage retaining the union of `boxes`; the background follows `fill`.
pub fn build_entity_subimage(
    src: &ImageBuf,
    boxes: &[BoxRegion],
    kind: SubimageKind,
    fill: FillStyle,
) -> Result<Subimage, ImageError> {
    Ok(Subimage {
        image: masked(src, boxes, fill)?,
        kind,
        source_boxes: boxes.to_vec(),
        fill: fill.policy,
    })
}

/// Predicate subimage: the union of the subject and object regions.
/// Errors with `NoRegions` when both lists are empty so the caller can
/// substitute the whole-image fallback.
pub fn build_predicate_subimage(
    src: &ImageBuf,
    subject_boxes: &[BoxRegion],
    object_boxes: &[BoxRegion],
    fill: FillStyle,
) -> Result<Subimage, ImageError> {
    if subject_boxes.is_empty() && object_boxes.is_empty() {
        return Err(ImageError::NoRegions);
    }
    let mut boxes = subject_boxes.to_vec();
    boxes.extend_from_slice(object_boxes);
    let mut sub = build_entity_subimage(src, &boxes, SubimageKind::Predicate, fill)?;
    sub.kind = SubimageKind::Predicate;
    Ok(sub)
}

/// Whole-image stand-in used when an entity has no grounded region.
pub fn fallback_subimage(src: &ImageBuf) -> Subimage {
    Subimage {
        image: src.clone(),
        kind: SubimageKind::FallbackOriginal,
        source_boxes: Vec::new(),
        fill: FillPolicy::Black,
    }
}

/// Kernel radius used for blur fills: `frac` of the shorter side, at least 1.
pub fn blur_radius(width: u32, height: u32, frac: f64) -> u32 {
    let r = libm::round(frac * width.min(height) as f64);
    (r as u32).max(1)
}

/// Separable Gaussian blur with sigma = radius / 2 and clamped edges.
pub fn gaussian_blur(src: &ImageBuf, radius: u32) -> ImageBuf {
    let r = radius as i64;
    let sigma = (radius as f64 / 2.0).max(0.5);
    let kernel: Vec<f64> = (-r..=r)
        .map(|k| libm::exp(-(k as f64 * k as f64) / (2.0 * sigma * sigma)))
        .collect();
    let ksum: f64 = kernel.iter().sum();

    let w = src.width as i64;
    let h = src.height as i64;
    let mut horiz = vec![0.0f64; src.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sx = (x + ki as i64 - r).clamp(0, w - 1);
                    acc += kv * src.pixels[((y * w + sx) as usize) * CHANNELS + c] as f64;
                }
                horiz[((y * w + x) as usize) * CHANNELS + c] = acc / ksum;
            }
        }
    }
    let mut out = vec![0u8; src.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sy = (y + ki as i64 - r).clamp(0, h - 1);
                    acc += kv * horiz[((sy * w + x) as usize) * CHANNELS + c];
                }
                out[((y * w + x) as usize) * CHANNELS + c] =
                    libm::round(acc / ksum).clamp(0.0, 255.0) as u8;
            }
        }
    }
    ImageBuf {
        width: src.width,
        height: src.height,
        pixels: out,
    }
}
