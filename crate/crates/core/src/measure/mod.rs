//! Finite-shot Wigner measurement records and datasets.

mod affine;
mod dataset;
mod descriptor;
mod external;
mod grid;
mod image;
mod sampling;
pub mod seeds;

pub use affine::{affine_sample, AffineParams, DEFAULT_EVAL_BOUND, ZETA_MAX, ZETA_MIN};
pub use dataset::{
    build_dataset, validation_count, ImageConfig, LabeledDataset, Split, StateFamily,
    DATASET_FORMAT_VERSION,
};
pub use descriptor::{Channel, Preparation, StateDescriptor};
pub use external::{
    ingest_external_grid, parse_external_grid, subsample_external, write_external_grid,
    EXTERNAL_RANGE_SLACK,
};
pub use grid::{default_extent, GridSpec};
pub use image::{DataImage, Shots, IMAGE_FORMAT_VERSION};
pub use sampling::{
    make_data_image, parity_probability, sample_pixel, sample_wigner_value, select_pixels,
    WignerGrid,
};
