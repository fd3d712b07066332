//! Renders an ico-sphere with each mesh shader and writes PNGs to the
//! directory given as the first argument (default: current directory).
//!
//! cargo run --example render_mesh -- /tmp

use std::path::PathBuf;

use rast3d::config::{CameraConfig, SceneConfig, Shader};
use rast3d::error::Result;
use rast3d::render::render_to_png;
use rast3d::shading::Lighting;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let base = SceneConfig {
        camera: CameraConfig {
            eye: [1.2, 1.0, -2.6],
            ..CameraConfig::default()
        },
        color: [0.9, 0.55, 0.3],
        ..SceneConfig::default()
    };
    let variants = [
        ("silhouette", Shader::Silhouette, Lighting::Phong),
        ("hard_flat", Shader::Hard, Lighting::Flat),
        ("softmax_gouraud", Shader::Softmax, Lighting::Gouraud),
        ("softmax_phong", Shader::Softmax, Lighting::Phong),
    ];
    for (name, shader, lighting) in variants {
        let mut c = base.clone();
        c.raster.image_size = (128, 128);
        c.shader = shader;
        c.lighting = lighting;
        let path = dir.join(format!("sphere_{name}.png"));
        let out = render_to_png(&c, &path)?;
        let stages: Vec<String> = out
            .stages
            .iter()
            .map(|s| format!("{} {:.2}ms", s.stage, s.elapsed.as_secs_f64() * 1e3))
            .collect();
        println!("{}: {}", path.display(), stages.join(", "));
    }
    Ok(())
}
