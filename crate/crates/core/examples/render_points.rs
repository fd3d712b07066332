//! Splats a colored point cloud and composites it with both compositors.
//!
//! cargo run --example render_points -- /tmp

use std::path::PathBuf;

use rast3d::batching::PointCloudBatch;
use rast3d::camera::{Camera, Projection};
use rast3d::error::Result;
use rast3d::geometry::sample_points_from_meshes;
use rast3d::io::save_png;
use rast3d::points::{composite, rasterize_points, splat_opacity, Compositor, PointRasterSettings};
use rast3d::templates::unit_cube;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let pc: PointCloudBatch = sample_points_from_meshes(&unit_cube(6)?, 20_000, 3)?;
    // color by position, alpha channel of 1 so coverage lands in channel 3
    let features: Vec<f64> = pc
        .points_packed()
        .iter()
        .flat_map(|p| [p[0] + 0.5, p[1] + 0.5, p[2] + 0.5, 1.0])
        .collect();
    let cam = Camera::look_at(
        [1.5, 1.2, -2.0],
        [0.0; 3],
        [0.0, 1.0, 0.0],
        Projection::Perspective {
            focal_length: 1.6,
            principal_point: [0.0, 0.0],
        },
        0.1,
        10.0,
    )?;
    let settings = PointRasterSettings::new((128, 128), 16, 0.02);
    let frag = rasterize_points(&pc, &cam, &settings)?;
    let alphas = splat_opacity(&frag, settings.radius);
    for compositor in [Compositor::Alpha, Compositor::Norm] {
        let out = composite(
            compositor,
            &frag,
            &alphas,
            &features,
            4,
            &[1.0, 1.0, 1.0, 0.0],
        )?;
        let path = dir.join(format!("cube_points_{compositor:?}.png").to_lowercase());
        save_png(&path, 128, 128, 4, &out.image)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
