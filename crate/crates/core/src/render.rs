//! End-to-end rendering of a [`SceneConfig`] with per-stage timings.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::batching::PointCloudBatch;
use crate::config::{Geometry, SceneConfig, Shader};
use crate::error::Result;
use crate::io::save_png;
use crate::math::Vec3;
use crate::points::{composite, rasterize_points, splat_opacity};
use crate::raster::rasterize_meshes;
use crate::shading::{covering_slot, hard_blend, shade_fragments, silhouette_blend, softmax_blend};

#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub elapsed: Duration,
}

/// An RGBA image (`height × width × 4`, top row first) and how long each
/// stage took.
#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub height: usize,
    pub width: usize,
    pub rgba: Vec<f64>,
    pub stages: Vec<StageTiming>,
    pub wall: Duration,
}

impl RenderOutput {
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 4] {
        let i = 4 * (row * self.width + col);
        [
            self.rgba[i],
            self.rgba[i + 1],
            self.rgba[i + 2],
            self.rgba[i + 3],
        ]
    }

    pub fn staged_total(&self) -> Duration {
        self.stages.iter().map(|s| s.elapsed).sum()
    }
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage,
            elapsed: now - self.last,
        });
        self.last = now;
    }
}

fn per_vertex_colors(colors: Option<Vec<Vec3>>, n: usize, fallback: Vec3) -> Vec<Vec3> {
    colors.unwrap_or_else(|| vec![fallback; n])
}

fn render_timed(c: &SceneConfig, sw: &mut Stopwatch) -> Result<(usize, usize, Vec<f64>)> {
    let (h, w) = c.raster.image_size;
    let bg = c.blend.background_color;
    if let Geometry::Mesh(src) = &c.geometry {
        let (mesh, colors) = src.load()?;
        let colors = per_vertex_colors(colors, mesh.verts_packed().len(), c.color);
        sw.lap("load");
        let cam = c.camera.camera()?;
        sw.lap("camera");
        let frag = rasterize_meshes(&mesh, &cam, &c.raster)?;
        sw.lap("rasterize");
        let lit = match c.shader {
            Shader::Silhouette => Vec::new(),
            _ => shade_fragments(c.lighting, &mesh, &frag, &cam, &c.light, &colors)?,
        };
        sw.lap("shade");
        let rgba: Vec<f64> = match c.shader {
            Shader::Silhouette => silhouette_blend(&frag, c.blend.sigma)?
                .into_iter()
                .flat_map(|a| [1.0, 1.0, 1.0, a])
                .collect(),
            Shader::Hard => {
                let rgb = hard_blend(&frag, &lit, bg)?;
                rgb.iter()
                    .enumerate()
                    .flat_map(|(px, p)| {
                        let hit = covering_slot(&frag, px).is_some();
                        [p[0], p[1], p[2], if hit { 1.0 } else { 0.0 }]
                    })
                    .collect()
            }
            Shader::Softmax => softmax_blend(&frag, &lit, &c.blend, cam.znear(), cam.zfar())?
                .into_iter()
                .flatten()
                .collect(),
        };
        sw.lap("blend");
        Ok((h, w, rgba))
    } else {
        let (points, colors) = c.geometry.load_points(c.seed)?;
        let colors = per_vertex_colors(colors, points.len(), c.color);
        let pc = PointCloudBatch::new(vec![points])?;
        let features: Vec<f64> = colors
            .iter()
            .flat_map(|p| [p[0], p[1], p[2], 1.0])
            .collect();
        sw.lap("load");
        let cam = c.camera.camera()?;
        sw.lap("camera");
        let s = c.point_settings();
        let frag = rasterize_points(&pc, &cam, &s)?;
        sw.lap("rasterize");
        let alphas = splat_opacity(&frag, s.radius);
        sw.lap("shade");
        let out = composite(
            c.compositor,
            &frag,
            &alphas,
            &features,
            4,
            &[bg[0], bg[1], bg[2], 0.0],
        )?;
        sw.lap("blend");
        Ok((h, w, out.image))
    }
}

/// Loads geometry, builds the camera, rasterizes, shades and blends.
pub fn render_scene(c: &SceneConfig) -> Result<RenderOutput> {
    let mut sw = Stopwatch::new();
    c.validate()?;
    let (height, width, rgba) = render_timed(c, &mut sw)?;
    Ok(RenderOutput {
        height,
        width,
        rgba,
        wall: sw.start.elapsed(),
        stages: sw.stages,
    })
}

/// [`render_scene`] followed by a PNG write, timed as a final stage.
pub fn render_to_png(c: &SceneConfig, path: &Path) -> Result<RenderOutput> {
    let mut sw = Stopwatch::new();
    c.validate()?;
    let (height, width, rgba) = render_timed(c, &mut sw)?;
    save_png(path, height, width, 4, &rgba)?;
    sw.lap("write");
    Ok(RenderOutput {
        height,
        width,
        rgba,
        wall: sw.start.elapsed(),
        stages: sw.stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MeshSource, MeshTemplate};
    use crate::points::Compositor;

    fn scene(shader: Shader) -> SceneConfig {
        SceneConfig {
            shader,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn silhouette_covers_center_not_corners() {
        let mut c = scene(Shader::Silhouette);
        let soft = render_scene(&c).unwrap();
        assert!(soft.pixel(32, 32)[3] > 0.9);
        c.blend.sigma = 1e-7;
        let sharp = render_scene(&c).unwrap();
        assert!(sharp.pixel(32, 32)[3] > 0.999);
        for out in [soft, sharp] {
            for (r, c) in [(0, 0), (0, 63), (63, 0), (63, 63)] {
                assert!(out.pixel(r, c)[3] < 1e-6);
            }
        }
    }

    #[test]
    fn hard_matches_sharp_softmax_inside() {
        let mut soft = scene(Shader::Softmax);
        soft.blend.gamma = 1e-6;
        soft.blend.sigma = 1e-7;
        let a = render_scene(&scene(Shader::Hard)).unwrap();
        let b = render_scene(&soft).unwrap();
        let mut mask = scene(Shader::Silhouette);
        mask.blend.sigma = 1e-7;
        let sil = render_scene(&mask).unwrap();
        let mut interior = 0;
        let covered = |r: usize, c: usize| sil.pixel(r, c)[3] > 0.999;
        for r in 2..62 {
            for c in 2..62 {
                if !(r - 2..=r + 2).all(|rr| (c - 2..=c + 2).all(|cc| covered(rr, cc))) {
                    continue;
                }
                interior += 1;
                for ch in 0..3 {
                    let d = (a.pixel(r, c)[ch] - b.pixel(r, c)[ch]).abs();
                    assert!(d <= 2.0 / 255.0, "({r},{c}) {d}");
                }
            }
        }
        assert!(interior > 500);
    }

    #[test]
    fn stage_list_is_complete() {
        let out = render_scene(&scene(Shader::Softmax)).unwrap();
        let names: Vec<_> = out.stages.iter().map(|s| s.stage).collect();
        assert_eq!(names, ["load", "camera", "rasterize", "shade", "blend"]);
        assert!(out.staged_total() <= out.wall);
    }

    #[test]
    fn points_render_with_both_compositors() {
        for compositor in [Compositor::Alpha, Compositor::Norm] {
            let c = SceneConfig {
                geometry: Geometry::SampledPoints {
                    template: MeshTemplate::Sphere(1),
                    count: 4000,
                },
                compositor,
                ..SceneConfig::default()
            };
            let out = render_scene(&c).unwrap();
            assert_eq!(out.rgba.len(), 64 * 64 * 4);
            assert!(out.pixel(32, 32)[3] > 0.5);
            assert_eq!(out.pixel(0, 0), [1.0, 1.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn missing_mesh_file_is_an_error() {
        let c = SceneConfig {
            geometry: Geometry::Mesh(MeshSource::File("/nonexistent/x.obj".into())),
            ..SceneConfig::default()
        };
        assert!(render_scene(&c).is_err());
    }
}
