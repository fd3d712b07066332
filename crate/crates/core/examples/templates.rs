//! Procedural templates: ico-spheres, subdivided cubes and the synthetic
//! ladder used for benchmark batches.
//!
//! cargo run --example templates

use rast3d::error::Result;
use rast3d::templates::{closest_template, ico_sphere, template_ladder, unit_cube};

fn main() -> Result<()> {
    for level in 0..=4 {
        let m = ico_sphere(level)?;
        let r = m
            .verts_packed()
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
        println!(
            "ico_sphere({level}): {:>5} verts {:>5} faces, radius in [{:.6}, {:.6}]",
            m.verts_packed().len(),
            m.faces_packed().len(),
            r.0,
            r.1
        );
    }
    let cube = unit_cube(3)?;
    println!(
        "unit_cube(3): {} verts {} faces",
        cube.verts_packed().len(),
        cube.faces_packed().len()
    );
    println!("ladder has {} rungs", template_ladder().len());
    for target in [100.0, 5000.0, 10_000.0] {
        let t = closest_template(target);
        println!("closest to {target} faces: {t:?} with {}", t.num_faces());
    }
    Ok(())
}
