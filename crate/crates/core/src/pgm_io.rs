//! Grid types plus the image plumbing around the pipeline: PGM decoding and
//! encoding, 16-bit label persistence, synthetic test images, and renderers
//! that turn sign maps and label maps back into viewable images.
//!
//! Only 8-bit grayscale PGM (`P2` ASCII or `P5` binary, maxval 1..=255) is
//! accepted on input. Label maps persist as `P5` with maxval 65535 and
//! big-endian 16-bit samples.

use crate::error::Error;

/// Row-major grayscale image with intensities normalized to `[0.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    intensities: Vec<f64>,
}

impl GrayImage {
    /// Validates dimensions, buffer length, and the `[0, 1]` intensity range.
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self, Error> {
        let expected = checked_pixel_count(width, height)?;
        if intensities.len() != expected {
            return Err(Error::PixelCountMismatch {
                expected,
                found: intensities.len(),
            });
        }
        for (index, &value) in intensities.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::IntensityOutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            intensities,
        })
    }

    /// Builds an image by evaluating `f(x, y)` over the grid in raster order.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, Error> {
        checked_pixel_count(width, height)?;
        let mut intensities = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                intensities.push(f(x, y));
            }
        }
        Self::new(width, height, intensities)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.intensities.len()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.intensities[y * self.width + x]
    }
}

/// Classification of a pixel's settled net carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

/// Per-pixel sign classification, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMap {
    width: usize,
    height: usize,
    signs: Vec<Sign>,
}

impl SignMap {
    pub fn new(width: usize, height: usize, signs: Vec<Sign>) -> Result<Self, Error> {
        let expected = checked_pixel_count(width, height)?;
        if signs.len() != expected {
            return Err(Error::PixelCountMismatch {
                expected,
                found: signs.len(),
            });
        }
        Ok(Self {
            width,
            height,
            signs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn get(&self, x: usize, y: usize) -> Sign {
        self.signs[y * self.width + x]
    }
}

/// Row-major region labels covering the contiguous range `0..region_count`.
///
/// Producers in this crate additionally guarantee that every label's pixel
/// set is 4-connected; the constructor checks contiguity only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl LabelMap {
    /// Validates dimensions, buffer length, and label contiguity.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, Error> {
        let expected = checked_pixel_count(width, height)?;
        if labels.len() != expected {
            return Err(Error::PixelCountMismatch {
                expected,
                found: labels.len(),
            });
        }
        let max = *labels.iter().max().expect("dimensions are positive") as usize;
        // More distinct labels than pixels can never be contiguous, so the
        // presence scan only needs to cover 0..len.
        let scan = max.min(labels.len() - 1) + 1;
        let mut seen = vec![false; scan];
        for &label in &labels {
            if (label as usize) < scan {
                seen[label as usize] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::NonContiguousLabels {
                region_count: max + 1,
                missing: missing as u32,
            });
        }
        if max >= labels.len() {
            // All of 0..len present plus a label beyond it: still a gap.
            return Err(Error::NonContiguousLabels {
                region_count: max + 1,
                missing: labels.len() as u32,
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            region_count: max + 1,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, labels: Vec<u32>, region_count: usize) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        debug_assert_eq!(
            labels.iter().max().map(|&m| m as usize + 1),
            Some(region_count)
        );
        Self {
            width,
            height,
            labels,
            region_count,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }
}

fn checked_pixel_count(width: usize, height: usize) -> Result<usize, Error> {
    if width == 0 {
        return Err(Error::NonpositiveDimension {
            field: "width",
            value: 0,
        });
    }
    if height == 0 {
        return Err(Error::NonpositiveDimension {
            field: "height",
            value: 0,
        });
    }
    width
        .checked_mul(height)
        .ok_or(Error::ImageTooLarge { width, height })
}

/// Decodes an 8-bit PGM (`P2` or `P5`, maxval 1..=255). `#` comments are
/// allowed wherever header whitespace is; raw samples divide by maxval to
/// produce normalized intensities. Trailing bytes after the raster are
/// ignored.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, Error> {
    let ascii = match bytes.get(0..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        _ => {
            return Err(Error::UnsupportedMagic {
                found: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
            })
        }
    };
    if let Some(&after) = bytes.get(2) {
        if !after.is_ascii_whitespace() && after != b'#' {
            return Err(Error::UnsupportedMagic {
                found: String::from_utf8_lossy(&bytes[..3]).into_owned(),
            });
        }
    }
    let mut scanner = HeaderScanner::new(bytes, 2);
    let width = scanner.dimension("width")?;
    let height = scanner.dimension("height")?;
    let maxval = scanner.integer("maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(Error::MaxvalOutOfRange { maxval });
    }
    let maxval = maxval as u16;
    let count = checked_pixel_count(width, height)?;
    let denom = f64::from(maxval);
    let mut intensities = Vec::with_capacity(count);
    if ascii {
        for index in 0..count {
            let token = scanner
                .next_token()
                .ok_or(Error::TruncatedPixelData {
                    expected: count,
                    found: index,
                })?;
            let value: u32 = std::str::from_utf8(token)
                .ok()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidSampleToken {
                    index,
                    token: String::from_utf8_lossy(token).into_owned(),
                })?;
            if value > u32::from(maxval) {
                return Err(Error::SampleOutOfRange {
                    index,
                    value,
                    maxval,
                });
            }
            intensities.push(f64::from(value) / denom);
        }
    } else {
        scanner.require_raster_separator()?;
        let data = &bytes[scanner.pos..];
        if data.len() < count {
            return Err(Error::TruncatedPixelData {
                expected: count,
                found: data.len(),
            });
        }
        for (index, &raw) in data[..count].iter().enumerate() {
            if u16::from(raw) > maxval {
                return Err(Error::SampleOutOfRange {
                    index,
                    value: u32::from(raw),
                    maxval,
                });
            }
            intensities.push(f64::from(raw) / denom);
        }
    }
    GrayImage::new(width, height, intensities)
}

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn integer(&mut self, field: &'static str) -> Result<i64, Error> {
        let token = self
            .next_token()
            .ok_or(Error::MissingHeaderField { field })?;
        std::str::from_utf8(token)
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidHeaderToken {
                field,
                token: String::from_utf8_lossy(token).into_owned(),
            })
    }

    fn dimension(&mut self, field: &'static str) -> Result<usize, Error> {
        let value = self.integer(field)?;
        if value <= 0 {
            return Err(Error::NonpositiveDimension { field, value });
        }
        usize::try_from(value).map_err(|_| Error::ImageTooLarge {
            width: usize::MAX,
            height: usize::MAX,
        })
    }

    /// Binary rasters begin after exactly one whitespace byte.
    fn require_raster_separator(&mut self) -> Result<(), Error> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::MissingRasterSeparator),
        }
    }
}

/// Tolerance for snapping an intensity scaled by 255 onto a half-integer, so
/// decimal-valued intensities such as 0.3 (whose nearest double lands a hair
/// below 76.5) quantize to the level implied by their decimal form.
const HALF_SNAP: f64 = 2e-9;

fn quantize_u8(v: f64) -> u8 {
    let x = v * 255.0;
    let doubled = (x * 2.0).round();
    let x = if (x * 2.0 - doubled).abs() <= HALF_SNAP {
        doubled / 2.0
    } else {
        x
    };
    // Round half away from zero; intensities are confined to [0, 1].
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes a binary 8-bit PGM (`P5`, maxval 255), quantizing each intensity
/// to its nearest level with halves rounding up.
pub fn write_pgm8(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixel_count());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.intensities.iter().map(|&v| quantize_u8(v)));
    out
}

/// Maximum region count a 16-bit label file can hold.
pub const LABEL_CAPACITY: usize = 65_536;

/// Encodes a label map as `P5` with maxval 65535 and big-endian 16-bit
/// samples. Fails if the map holds more regions than 16 bits can address.
pub fn write_labels16(labels: &LabelMap) -> Result<Vec<u8>, Error> {
    if labels.region_count() > LABEL_CAPACITY {
        return Err(Error::LabelCapacityExceeded {
            count: labels.region_count(),
        });
    }
    let header = format!("P5\n{} {}\n65535\n", labels.width, labels.height);
    let mut out = Vec::with_capacity(header.len() + 2 * labels.labels.len());
    out.extend_from_slice(header.as_bytes());
    for &label in &labels.labels {
        out.extend_from_slice(&(label as u16).to_be_bytes());
    }
    Ok(out)
}

/// Decodes a label map written by [`write_labels16`], validating that the
/// stored labels still form a contiguous range.
pub fn read_labels16(bytes: &[u8]) -> Result<LabelMap, Error> {
    match bytes.get(0..2) {
        Some(b"P5") => {}
        _ => {
            return Err(Error::UnsupportedMagic {
                found: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
            })
        }
    }
    let mut scanner = HeaderScanner::new(bytes, 2);
    let width = scanner.dimension("width")?;
    let height = scanner.dimension("height")?;
    let maxval = scanner.integer("maxval")?;
    if maxval != 65_535 {
        return Err(Error::LabelMaxvalMismatch { maxval });
    }
    scanner.require_raster_separator()?;
    let count = checked_pixel_count(width, height)?;
    let data = &bytes[scanner.pos..];
    if data.len() < 2 * count {
        return Err(Error::TruncatedPixelData {
            expected: count,
            found: data.len() / 2,
        });
    }
    let labels = data[..2 * count]
        .chunks_exact(2)
        .map(|pair| u32::from(u16::from_be_bytes([pair[0], pair[1]])))
        .collect();
    LabelMap::new(width, height, labels)
}

/// The synthetic images used to exercise the pipeline end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestImageKind {
    /// Left half at 0.3, right half at 0.7, split at `width / 2`.
    TwoHalves,
    /// Centered `(width/2) x (height/2)` rectangle at 0.3 on a 0.7 background.
    Rectangle,
    /// Square (0.2), disk (0.3), and triangle (0.4) on a 0.8 background,
    /// mutually separated and clear of the border.
    ThreeShapes,
}

impl TestImageKind {
    pub fn name(self) -> &'static str {
        match self {
            TestImageKind::TwoHalves => "TwoHalves",
            TestImageKind::Rectangle => "Rectangle",
            TestImageKind::ThreeShapes => "ThreeShapes",
        }
    }
}

/// Builds one of the synthetic test images, or a geometry error when the
/// requested dimensions cannot host the layout.
pub fn make_test_image(
    kind: TestImageKind,
    width: usize,
    height: usize,
) -> Result<GrayImage, Error> {
    match kind {
        TestImageKind::TwoHalves => {
            if width < 2 {
                return Err(geometry_error(kind, width, height));
            }
            GrayImage::from_fn(width, height, |x, _| if x < width / 2 { 0.3 } else { 0.7 })
        }
        TestImageKind::Rectangle => {
            if width < 2 || height < 2 {
                return Err(geometry_error(kind, width, height));
            }
            let (rw, rh) = (width / 2, height / 2);
            let (left, top) = ((width - rw) / 2, (height - rh) / 2);
            GrayImage::from_fn(width, height, |x, y| {
                let inside = (left..left + rw).contains(&x) && (top..top + rh).contains(&y);
                if inside {
                    0.3
                } else {
                    0.7
                }
            })
        }
        TestImageKind::ThreeShapes => three_shapes(width, height),
    }
}

fn geometry_error(kind: TestImageKind, width: usize, height: usize) -> Error {
    Error::GeometryTooSmall {
        kind: kind.name(),
        width,
        height,
    }
}

/// Inclusive pixel bounds of one shape.
#[derive(Clone, Copy)]
struct Bounds {
    left: isize,
    right: isize,
    top: isize,
    bottom: isize,
}

impl Bounds {
    /// Blank columns or rows between two boxes (negative when they overlap).
    fn gap(self, other: Bounds) -> isize {
        let col_gap = (other.left - self.right - 1).max(self.left - other.right - 1);
        let row_gap = (other.top - self.bottom - 1).max(self.top - other.bottom - 1);
        col_gap.max(row_gap)
    }
}

fn three_shapes(width: usize, height: usize) -> Result<GrayImage, Error> {
    let err = || geometry_error(TestImageKind::ThreeShapes, width, height);
    let (w, h) = (width as isize, height as isize);
    let side = (w.min(h)) / 4;
    let (sq_left, sq_top) = (w / 8, h / 8);
    let square = Bounds {
        left: sq_left,
        right: sq_left + side - 1,
        top: sq_top,
        bottom: sq_top + side - 1,
    };
    let (cx, cy, radius) = (3 * w / 4, h / 4, w.min(h) / 8);
    let disk = Bounds {
        left: cx - radius,
        right: cx + radius,
        top: cy - radius,
        bottom: cy + radius,
    };
    let (apex_y, base_y, tri_cx, half_base) = (5 * h / 8, 7 * h / 8 - 1, w / 2, w / 4);
    let triangle = Bounds {
        left: tri_cx - half_base,
        right: tri_cx + half_base,
        top: apex_y,
        bottom: base_y,
    };

    if side < 1 || radius < 1 || half_base < 1 || base_y <= apex_y {
        return Err(err());
    }
    // Every shape stays at least one pixel off the border, and each pair is
    // separated by at least two blank columns or rows.
    for b in [square, disk, triangle] {
        if b.left < 1 || b.top < 1 || b.right > w - 2 || b.bottom > h - 2 {
            return Err(err());
        }
    }
    for (a, b) in [(square, disk), (square, triangle), (disk, triangle)] {
        if a.gap(b) < 2 {
            return Err(err());
        }
    }

    GrayImage::from_fn(width, height, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let in_square = x >= square.left && x <= square.right && y >= square.top && y <= square.bottom;
        let in_disk = {
            let (dx, dy) = (x - cx, y - cy);
            dx * dx + dy * dy <= radius * radius
        };
        let in_triangle = y >= apex_y && y <= base_y && {
            let hw = (y - apex_y) * half_base / (base_y - apex_y);
            (x - tri_cx).abs() <= hw
        };
        if in_square {
            0.2
        } else if in_disk {
            0.3
        } else if in_triangle {
            0.4
        } else {
            0.8
        }
    })
}

/// Renders signs as a three-level image: positive white, negative black,
/// zero mid-gray (128/255).
pub fn render_sign_map(map: &SignMap) -> GrayImage {
    let intensities = map
        .signs
        .iter()
        .map(|sign| match sign {
            Sign::Positive => 1.0,
            Sign::Negative => 0.0,
            Sign::Zero => 128.0 / 255.0,
        })
        .collect();
    GrayImage {
        width: map.width,
        height: map.height,
        intensities,
    }
}

/// Renders region ids as spread gray levels for viewing: label `i` maps to
/// byte `(i * (255 / max(R - 1, 1))) % 256`, which keeps all levels distinct
/// while the region count stays within 256.
pub fn render_label_map(labels: &LabelMap) -> GrayImage {
    let step = 255 / labels.region_count().saturating_sub(1).max(1);
    let intensities = labels
        .labels
        .iter()
        .map(|&label| ((label as usize * step) % 256) as f64 / 255.0)
        .collect();
    GrayImage {
        width: labels.width,
        height: labels.height,
        intensities,
    }
}
