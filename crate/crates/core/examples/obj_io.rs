//! Writes a colored mesh to OBJ, reads it back and renders it.
//!
//! cargo run --example obj_io -- /tmp

use std::path::PathBuf;

use rast3d::config::{Geometry, MeshSource, SceneConfig, Shader};
use rast3d::error::Result;
use rast3d::io::{load_obj, save_obj};
use rast3d::render::render_to_png;
use rast3d::templates::ico_sphere;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let mesh = ico_sphere(3)?;
    let colors: Vec<_> = mesh
        .verts_packed()
        .iter()
        .map(|v| v.map(|c| 0.5 + 0.5 * c))
        .collect();
    let obj = dir.join("colored_sphere.obj");
    save_obj(&obj, &mesh, 0, Some(&colors))?;

    let back = load_obj(&obj)?;
    assert_eq!(back.mesh.faces_packed(), mesh.faces_packed());
    println!(
        "{}: {} verts, colors: {}",
        obj.display(),
        back.mesh.verts_packed().len(),
        back.colors.is_some()
    );

    let scene = SceneConfig {
        geometry: Geometry::Mesh(MeshSource::File(obj)),
        shader: Shader::Softmax,
        ..SceneConfig::default()
    };
    let png = dir.join("colored_sphere.png");
    render_to_png(&scene, &png)?;
    println!("wrote {}", png.display());
    Ok(())
}
