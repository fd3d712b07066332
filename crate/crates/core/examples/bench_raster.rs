//! Tiled vs naive rasterization and alpha vs norm compositing timings.
//!
//! cargo run --release --example bench_raster

use rast3d::bench::{rows_csv, run_bench, BenchOp, BenchSpec, TrackingAllocator};
use rast3d::error::Result;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

fn main() -> Result<()> {
    let raster = BenchSpec {
        batch_size: 1,
        size: 10_000.0,
        image_size: 128,
        batches: 2,
        runs: 3,
        ..BenchSpec::new(BenchOp::Rasterize)
    };
    let composite = BenchSpec {
        batch_size: 1,
        size: 50_000.0,
        k: 150,
        image_size: 64,
        feature_dim: 3,
        batches: 2,
        runs: 5,
        ..BenchSpec::new(BenchOp::Composite)
    };
    let mut rows = run_bench(&raster)?;
    rows.extend(run_bench(&composite)?);
    print!("{}", rows_csv(&rows));
    Ok(())
}
