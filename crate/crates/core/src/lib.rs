//! Image segmentation by simulated charge relaxation.

pub mod carrier_sim;
mod error;
mod fmt;
pub mod pgm_io;
pub mod region_ops;

pub use carrier_sim::{
    closed_form_balance, diffuse_flux, drift_flux, interface_field, sign_map, simulate, step,
    CarrierGrid, ConvergenceTrace, SimParams, SimResult, TraceEntry, MAX_STABLE_K2,
};
pub use error::Error;
pub use region_ops::{build_rag, group_regions, merge_once, merge_to_target, Partition, RegionStats};
pub use pgm_io::{
    make_test_image, read_labels16, read_pgm, render_label_map, render_sign_map, write_labels16,
    write_pgm8, GrayImage, LabelMap, Sign, SignMap, TestImageKind, LABEL_CAPACITY,
};
