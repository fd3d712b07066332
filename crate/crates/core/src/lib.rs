pub mod batching;
pub mod bench;
pub mod camera;
pub mod config;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod grad;
pub mod io;
pub mod math;
pub mod ops;
pub mod points;
pub mod raster;
pub mod render;
pub mod shading;
pub mod templates;
