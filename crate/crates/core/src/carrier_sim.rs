//! Virtual-charge relaxation over the pixel grid.
//!
//! Every pixel holds a net carrier value that starts at zero. Across each
//! 4-neighbor interface, a drift term pushes carriers along the intensity
//! difference (a brighter pixel attracts negative carriers, so its own net
//! carrier falls) while a diffusion term levels carrier differences.
//! Iterating the synchronous update drives the grid toward a balance state
//! whose sign pattern splits the image into patches brighter and darker than
//! the overall mean; [`closed_form_balance`] gives that state directly for
//! cross-checking.
//!
//! The update is double-buffered: every pixel reads only pre-step state, so
//! results do not depend on evaluation order, and the contribution a pixel
//! receives across an interface is the exact negation of what its neighbor
//! receives, which pins the grid total at zero up to rounding.

use rayon::prelude::*;

use crate::error::Error;
use crate::fmt::format_sig12;
use crate::pgm_io::{GrayImage, Sign, SignMap};

/// Largest diffusion gain for which the synchronous update keeps shrinking
/// every non-conserved mode: the per-step factor on a mode with grid
/// Laplacian eigenvalue `lambda` is `1 - k2 * lambda`, and `lambda` climbs
/// toward 8 on large 4-neighbor grids, so the margin vanishes at 1/4.
pub const MAX_STABLE_K2: f64 = 0.25;

/// Per-pixel net carrier state, updated in lockstep across the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierGrid {
    width: usize,
    height: usize,
    net_carrier: Vec<f64>,
}

impl CarrierGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            net_carrier: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, net_carrier: Vec<f64>) -> Result<Self, Error> {
        if net_carrier.len() != width * height {
            return Err(Error::PixelCountMismatch {
                expected: width * height,
                found: net_carrier.len(),
            });
        }
        Ok(Self {
            width,
            height,
            net_carrier,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn net_carrier(&self) -> &[f64] {
        &self.net_carrier
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.net_carrier[y * self.width + x]
    }
}

/// Tunables for [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Drift gain applied to the intensity difference across an interface.
    pub k1: f64,
    /// Diffusion gain applied to the net-carrier difference across an interface.
    pub k2: f64,
    /// Stop once the mean absolute per-pixel change falls below this.
    pub epsilon: f64,
    /// Hard cap on iterations when the threshold is not reached.
    pub max_iters: u64,
    /// 1-based iterations at which to capture sign-map snapshots; must be
    /// strictly ascending. Iterations past the final pass are skipped.
    pub snapshot_iters: Vec<u64>,
    /// Half-width of the net-carrier band classified as zero sign.
    pub zero_tol: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            k1: 0.05,
            k2: 0.2,
            epsilon: 1e-6,
            max_iters: 100_000,
            snapshot_iters: Vec::new(),
            zero_tol: 0.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, value) in [("k1", self.k1), ("k2", self.k2), ("epsilon", self.epsilon)] {
            // NaN must fail here too, so test the accepting range directly.
            let positive = value.is_finite() && value > 0.0;
            if !positive {
                return Err(Error::NonPositiveParam { name, value });
            }
        }
        if self.k2 >= MAX_STABLE_K2 {
            return Err(Error::UnstableDiffusion { k2: self.k2 });
        }
        if self.max_iters == 0 {
            return Err(Error::ZeroMaxIters);
        }
        let tol_ok = self.zero_tol.is_finite() && self.zero_tol >= 0.0;
        if !tol_ok {
            return Err(Error::NegativeParam {
                name: "zero_tol",
                value: self.zero_tol,
            });
        }
        let ascending = self.snapshot_iters.windows(2).all(|w| w[0] < w[1]);
        if !ascending || self.snapshot_iters.first().is_some_and(|&s| s == 0) {
            return Err(Error::SnapshotsNotAscending);
        }
        Ok(())
    }
}

/// Virtual field across an interface: positive when the pixel of interest is
/// brighter than its neighbor.
pub fn interface_field(g: f64, g_neighbor: f64, k: f64) -> f64 {
    k * (g - g_neighbor)
}

/// Drift change of the pixel of interest across one interface. A brighter
/// pixel attracts negative carriers, so its net carrier falls: the returned
/// change is `k1 * (g_neighbor - g)`.
pub fn drift_flux(g: f64, g_neighbor: f64, k1: f64) -> f64 {
    k1 * (g_neighbor - g)
}

/// Diffusion change of the pixel of interest across one interface; net
/// carrier flows from the higher concentration toward the lower.
pub fn diffuse_flux(c: f64, c_neighbor: f64, k2: f64) -> f64 {
    k2 * (c_neighbor - c)
}

/// Pixel counts at or above this run the row updates through rayon.
const PARALLEL_THRESHOLD: usize = 1 << 15;

/// One synchronous relaxation pass over the whole grid. Returns the updated
/// grid and the mean absolute per-pixel change.
///
/// # Panics
/// Panics if `grid` and `img` dimensions differ.
pub fn step(grid: &CarrierGrid, img: &GrayImage, params: &SimParams) -> (CarrierGrid, f64) {
    let mut next = CarrierGrid::zeros(grid.width, grid.height);
    let mean_abs_change = step_into(grid, img, params.k1, params.k2, &mut next);
    (next, mean_abs_change)
}

pub(crate) fn step_into(
    src: &CarrierGrid,
    img: &GrayImage,
    k1: f64,
    k2: f64,
    dst: &mut CarrierGrid,
) -> f64 {
    assert_eq!(
        (src.width, src.height),
        (img.width(), img.height()),
        "grid and image dimensions must match"
    );
    let n = src.net_carrier.len();
    step_rows(src, img, k1, k2, dst, n >= PARALLEL_THRESHOLD)
}

/// The parallel split is by whole rows and the row partial sums are combined
/// in row order, so the result is bit-identical however many threads run.
pub(crate) fn step_rows(
    src: &CarrierGrid,
    img: &GrayImage,
    k1: f64,
    k2: f64,
    dst: &mut CarrierGrid,
    parallel: bool,
) -> f64 {
    let (w, h) = (src.width, src.height);
    let g = img.intensities();
    let c = &src.net_carrier[..];

    let update_row = |y: usize, out: &mut [f64]| -> f64 {
        let base = y * w;
        let g_row = &g[base..base + w];
        let c_row = &c[base..base + w];
        let above = (y > 0).then(|| (&g[base - w..base], &c[base - w..base]));
        let below = (y + 1 < h).then(|| (&g[base + w..base + 2 * w], &c[base + w..base + 2 * w]));
        let mut row_abs_change = 0.0;
        for x in 0..w {
            let gq = g_row[x];
            let cq = c_row[x];
            let mut change = 0.0;
            if x > 0 {
                change += drift_flux(gq, g_row[x - 1], k1) + diffuse_flux(cq, c_row[x - 1], k2);
            }
            if x + 1 < w {
                change += drift_flux(gq, g_row[x + 1], k1) + diffuse_flux(cq, c_row[x + 1], k2);
            }
            if let Some((ga, ca)) = above {
                change += drift_flux(gq, ga[x], k1) + diffuse_flux(cq, ca[x], k2);
            }
            if let Some((gb, cb)) = below {
                change += drift_flux(gq, gb[x], k1) + diffuse_flux(cq, cb[x], k2);
            }
            let updated = cq + change;
            out[x] = updated;
            row_abs_change += (updated - cq).abs();
        }
        row_abs_change
    };

    let mut total_abs_change = 0.0;
    if parallel && h > 1 {
        let partials: Vec<f64> = dst
            .net_carrier
            .par_chunks_mut(w)
            .enumerate()
            .map(|(y, row)| update_row(y, row))
            .collect();
        for partial in partials {
            total_abs_change += partial;
        }
    } else {
        for (y, row) in dst.net_carrier.chunks_mut(w).enumerate() {
            total_abs_change += update_row(y, row);
        }
    }
    total_abs_change / (w * h) as f64
}

/// Mean absolute change per iteration, in iteration order starting at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: u64,
    pub mean_abs_change: f64,
}

impl ConvergenceTrace {
    /// CSV with header `iteration,mean_abs_change`; values carry at least
    /// twelve significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mean_abs_change\n");
        for entry in &self.entries {
            out.push_str(&entry.iteration.to_string());
            out.push(',');
            out.push_str(&format_sig12(entry.mean_abs_change));
            out.push('\n');
        }
        out
    }
}

/// Outcome of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimResult {
    /// Net carrier state after the final pass.
    pub grid: CarrierGrid,
    /// One entry per pass that ran.
    pub trace: ConvergenceTrace,
    /// Sign maps captured at the requested iterations, in order.
    pub snapshots: Vec<(u64, SignMap)>,
    /// Whether the threshold was reached within the iteration cap.
    pub converged: bool,
    /// Number of passes that ran.
    pub iterations: u64,
}

/// Runs the relaxation from an all-zero grid until the mean absolute change
/// drops below `params.epsilon` or `params.max_iters` passes have run.
/// Identical inputs always produce identical results.
pub fn simulate(img: &GrayImage, params: &SimParams) -> Result<SimResult, Error> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let mut current = CarrierGrid::zeros(w, h);
    let mut next = CarrierGrid::zeros(w, h);
    let mut entries = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending_snapshots = params.snapshot_iters.iter().copied().peekable();
    let mut converged = false;
    let mut iterations = 0;
    for iteration in 1..=params.max_iters {
        let mean_abs_change = step_into(&current, img, params.k1, params.k2, &mut next);
        std::mem::swap(&mut current, &mut next);
        entries.push(TraceEntry {
            iteration,
            mean_abs_change,
        });
        iterations = iteration;
        if pending_snapshots.next_if_eq(&iteration).is_some() {
            snapshots.push((iteration, sign_map(&current, params.zero_tol)));
        }
        if mean_abs_change < params.epsilon {
            converged = true;
            break;
        }
    }
    Ok(SimResult {
        grid: current,
        trace: ConvergenceTrace { entries },
        snapshots,
        converged,
        iterations,
    })
}

/// Classifies each pixel's net carrier against a symmetric zero band.
///
/// # Panics
/// Panics if `zero_tol` is negative or NaN.
pub fn sign_map(grid: &CarrierGrid, zero_tol: f64) -> SignMap {
    assert!(zero_tol >= 0.0, "zero_tol must be non-negative");
    let signs = grid
        .net_carrier
        .iter()
        .map(|&c| {
            if c > zero_tol {
                Sign::Positive
            } else if c < -zero_tol {
                Sign::Negative
            } else {
                Sign::Zero
            }
        })
        .collect();
    SignMap::new(grid.width, grid.height, signs).expect("grid dimensions are valid")
}

/// Balance state the relaxation approaches on a (always connected) pixel
/// grid: at the fixed point every interface's drift cancels against its
/// diffusion, which forces `k1*g + k2*c` to be constant across the grid, and
/// the zero grid total pins the constant to the image mean. Hence
/// `c = -(k1/k2) * (g - mean)`.
///
/// # Panics
/// Panics if `k1` or `k2` is not positive.
pub fn closed_form_balance(img: &GrayImage, k1: f64, k2: f64) -> CarrierGrid {
    assert!(k1 > 0.0 && k2 > 0.0, "gains must be positive");
    let mean = img.intensities().iter().sum::<f64>() / img.pixel_count() as f64;
    let ratio = k1 / k2;
    let net_carrier = img
        .intensities()
        .iter()
        .map(|&g| -(ratio * (g - mean)))
        .collect();
    CarrierGrid {
        width: img.width(),
        height: img.height(),
        net_carrier,
    }
}
