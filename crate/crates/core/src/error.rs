/// Everything that can go wrong across parsing, validation, and merging.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported magic {found:?}: expected \"P2\" or \"P5\"")]
    UnsupportedMagic { found: String },

    #[error("missing {field} in header")]
    MissingHeaderField { field: &'static str },

    #[error("invalid {field} token {token:?} in header")]
    InvalidHeaderToken { field: &'static str, token: String },

    #[error("{field} must be positive (got {value})")]
    NonpositiveDimension { field: &'static str, value: i64 },

    #[error("maxval {maxval} outside supported range 1..=255")]
    MaxvalOutOfRange { maxval: i64 },

    #[error("label files use maxval 65535 (got {maxval})")]
    LabelMaxvalMismatch { maxval: i64 },

    #[error("image dimensions {width}x{height} overflow the addressable pixel count")]
    ImageTooLarge { width: usize, height: usize },

    #[error("pixel data ends early: expected {expected} samples, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },

    #[error("invalid sample token {token:?} at index {index}")]
    InvalidSampleToken { index: usize, token: String },

    #[error("sample {value} at index {index} exceeds maxval {maxval}")]
    SampleOutOfRange { index: usize, value: u32, maxval: u16 },

    #[error("missing whitespace separator before binary pixel data")]
    MissingRasterSeparator,

    #[error("intensity {value} at index {index} outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },

    #[error("pixel buffer length {found} does not match width x height = {expected}")]
    PixelCountMismatch { expected: usize, found: usize },

    #[error("labels are not contiguous: inferred region count {region_count} but label {missing} is absent")]
    NonContiguousLabels { region_count: usize, missing: u32 },

    #[error("{width}x{height} is too small to host the {kind} layout")]
    GeometryTooSmall {
        kind: &'static str,
        width: usize,
        height: usize,
    },

    #[error("{count} regions exceed the 16-bit label capacity of 65536")]
    LabelCapacityExceeded { count: usize },

    #[error("{name} must be positive (got {value})")]
    NonPositiveParam { name: &'static str, value: f64 },

    #[error("{name} must not be negative (got {value})")]
    NegativeParam { name: &'static str, value: f64 },

    #[error("k2 = {k2} is unstable: the synchronous update requires k2 < 0.25")]
    UnstableDiffusion { k2: f64 },

    #[error("max_iters must be at least 1")]
    ZeroMaxIters,

    #[error("snapshot iterations must be strictly ascending and start at 1 or later")]
    SnapshotsNotAscending,

    #[error("dimensions differ: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("cannot merge a partition with {count} region(s)")]
    TooFewRegions { count: usize },
}
