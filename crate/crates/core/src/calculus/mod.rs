//! Discrete calculus on boxes: geometry, fields, increments and Hölder norms.

pub mod field;
pub mod geometry;
pub mod gridfile;
pub mod holder;
pub mod ops;

pub use field::{matmul_into, Field, GridSamples, Source};
pub use geometry::{Domain, Grid, Rectangle, Segment, MAX_DIM};
pub use gridfile::{read_grid_csv, read_grid_file, write_grid_csv, write_grid_file};
pub use holder::{holder_seminorm, HolderOptions, HolderReport, HolderScheme, ScaleRow};
pub use ops::{delta, delta2};
