//! Hyperspectral cubes, the HSIC file format, patch extraction, stratified
//! splits, a synthetic scene generator and class-map rendering.

mod cube;
pub mod format;
mod patches;
pub mod ppm;
mod split;
mod synthetic;

pub use cube::HsiCube;
pub use format::{load_cube, read_cube, save_cube, write_cube};
pub use patches::{extract_patches, PatchSet};
pub use split::{stratified_split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};
