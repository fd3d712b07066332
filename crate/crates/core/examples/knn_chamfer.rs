//! Exact K nearest neighbors and Chamfer distance on heterogeneous point
//! clouds, followed by a few gradient steps pulling one cloud onto another.
//!
//! cargo run --example knn_chamfer

use rast3d::batching::PointCloudBatch;
use rast3d::error::Result;
use rast3d::geometry::{chamfer_backward, chamfer_forward, knn_points, sample_points_from_meshes};
use rast3d::templates::{ico_sphere, unit_cube};

fn main() -> Result<()> {
    let sphere = sample_points_from_meshes(&ico_sphere(2)?, 400, 1)?;
    let cube = sample_points_from_meshes(&unit_cube(4)?, 300, 2)?;
    let p = PointCloudBatch::new(vec![
        sphere.points_list(0).to_vec(),
        cube.points_list(0)[..150].to_vec(),
    ])?;
    let q = PointCloudBatch::new(vec![
        cube.points_list(0).to_vec(),
        sphere.points_list(0)[..250].to_vec(),
    ])?;

    let nn = knn_points(&p, &q, 4)?;
    let (d, i) = nn.row(0);
    println!("4 nearest of p[0]: idx {i:?}, squared dists {d:.4?}");

    let mut p = p;
    for step in 0..=50 {
        let fwd = chamfer_forward(&p, &q)?;
        if step % 10 == 0 {
            println!(
                "step {step:>2}: chamfer {:.5} per element {:.5?}",
                fwd.value, fwd.per_element
            );
        }
        let (gp, _) = chamfer_backward(&p, &q, &fwd, 1.0);
        let moved = p
            .points_packed()
            .iter()
            .zip(&gp)
            .map(|(x, g)| [0, 1, 2].map(|c| x[c] - 30.0 * g[c]))
            .collect();
        p = p.with_points_packed(moved)?;
    }
    Ok(())
}
