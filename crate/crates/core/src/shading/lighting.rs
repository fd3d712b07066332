use rayon::prelude::*;

use super::{check_faces, check_slots};
use crate::batching::MeshBatch;
use crate::camera::{view_direction_world, Camera};
use crate::error::{Error, Result};
use crate::math::{cross3, dot3, norm3, normalize3, sub3, Vec3};
use crate::raster::MeshFragments;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lighting {
    Flat,
    Gouraud,
    Phong,
}

impl std::str::FromStr for Lighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "gouraud" => Ok(Self::Gouraud),
            "phong" => Ok(Self::Phong),
            _ => Err(Error::Usage(format!(
                "unknown lighting model `{s}` (flat, gouraud, phong)"
            ))),
        }
    }
}

/// A single directional light. `direction` points from the surface toward
/// the light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalLight {
    pub direction: Vec3,
    pub ambient: Vec3,
    pub diffuse: Vec3,
    pub specular: Vec3,
    pub shininess: f64,
}

impl Default for DirectionalLight {
    fn default() -> Self {
        Self {
            direction: [0.0, 0.0, -1.0],
            ambient: [0.3; 3],
            diffuse: [0.7; 3],
            specular: [0.2; 3],
            shininess: 32.0,
        }
    }
}

impl DirectionalLight {
    pub fn validate(&self) -> Result<()> {
        if (norm3(self.direction) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "light direction must be unit length, got {:?}",
                self.direction
            )));
        }
        let intensities = self
            .ambient
            .iter()
            .chain(&self.diffuse)
            .chain(&self.specular);
        for &v in intensities {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "light intensity {v} must be finite and ≥ 0"
                )));
            }
        }
        if !(self.shininess >= 0.0 && self.shininess.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shininess {} must be ≥ 0",
                self.shininess
            )));
        }
        Ok(())
    }

    /// `(max(0, n·l), max(0, r·v)^shininess)` for a unit normal.
    fn terms(&self, n: Vec3, view: Vec3) -> (f64, f64) {
        let l = self.direction;
        let nl = dot3(n, l);
        let rv = 2.0 * nl * dot3(n, view) - dot3(l, view);
        (nl.max(0.0), rv.max(0.0).powf(self.shininess))
    }

    fn intensity(&self, diff: f64, spec: f64) -> Vec3 {
        std::array::from_fn(|c| self.ambient[c] + self.diffuse[c] * diff + self.specular[c] * spec)
    }

    fn shade(&self, n: Vec3, view: Vec3, surface: Vec3) -> Vec3 {
        let (diff, spec) = self.terms(n, view);
        let i = self.intensity(diff, spec);
        std::array::from_fn(|c| surface[c] * i[c])
    }

    /// Gradient of `g · (surface ⊙ light(n))` with respect to the unit normal.
    fn normal_vjp(&self, n: Vec3, view: Vec3, surface: Vec3, g: Vec3) -> Vec3 {
        let l = self.direction;
        let nl = dot3(n, l);
        let nv = dot3(n, view);
        let rv = 2.0 * nl * nv - dot3(l, view);
        let w: Vec3 = std::array::from_fn(|c| g[c] * surface[c]);
        let wd: f64 = (0..3).map(|c| w[c] * self.diffuse[c]).sum();
        let ws: f64 = (0..3).map(|c| w[c] * self.specular[c]).sum();
        let mut out = [0.0; 3];
        if nl > 0.0 {
            for i in 0..3 {
                out[i] += wd * l[i];
            }
        }
        if rv > 0.0 && self.shininess > 0.0 {
            let ds = self.shininess * rv.powf(self.shininess - 1.0);
            for i in 0..3 {
                out[i] += ws * ds * 2.0 * (nv * l[i] + nl * view[i]);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LightGrads {
    pub ambient: Vec3,
    pub diffuse: Vec3,
    pub specular: Vec3,
}

impl LightGrads {
    fn add_shade(&mut self, light: &DirectionalLight, n: Vec3, view: Vec3, surface: Vec3, g: Vec3) {
        let (diff, spec) = light.terms(n, view);
        for c in 0..3 {
            let w = g[c] * surface[c];
            self.ambient[c] += w;
            self.diffuse[c] += w * diff;
            self.specular[c] += w * spec;
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.ambient
            .iter()
            .chain(&self.diffuse)
            .chain(&self.specular)
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadingGrads {
    /// Per packed vertex.
    pub colors: Vec<Vec3>,
    pub light: LightGrads,
    /// Per slot; feeds the rasterizer backward.
    pub bary: Vec<[f64; 3]>,
}

/// Area-weighted face normals: the cross product of two edges, whose length
/// is twice the face area.
pub fn face_normals(m: &MeshBatch) -> Vec<Vec3> {
    let v = m.verts_packed();
    m.faces_packed()
        .par_iter()
        .map(|f| cross3(sub3(v[f[1]], v[f[0]]), sub3(v[f[2]], v[f[0]])))
        .collect()
}

/// Unit vertex normals averaged from incident faces by area. Vertices with
/// no non-degenerate incident face get a zero normal.
pub fn vertex_normals(m: &MeshBatch) -> Vec<Vec3> {
    let mut acc = vec![[0.0; 3]; m.verts_packed().len()];
    for (f, n) in m.faces_packed().iter().zip(face_normals(m)) {
        for &v in f {
            for c in 0..3 {
                acc[v][c] += n[c];
            }
        }
    }
    acc.into_iter()
        .map(|n| normalize3(n).unwrap_or([0.0; 3]))
        .collect()
}

fn check_inputs(
    m: &MeshBatch,
    frag: &MeshFragments,
    light: &DirectionalLight,
    colors: &[Vec3],
) -> Result<()> {
    light.validate()?;
    check_faces(m, frag)?;
    if colors.len() != m.verts_packed().len() {
        return Err(Error::shape(format!(
            "{} vertex colors for {} verts",
            colors.len(),
            m.verts_packed().len()
        )));
    }
    Ok(())
}

fn face_color(colors: &[Vec3], f: [usize; 3]) -> Vec3 {
    std::array::from_fn(|c| (colors[f[0]][c] + colors[f[1]][c] + colors[f[2]][c]) / 3.0)
}

fn interp(values: &[Vec3], f: [usize; 3], b: [f64; 3]) -> Vec3 {
    std::array::from_fn(|c| {
        b[0] * values[f[0]][c] + b[1] * values[f[1]][c] + b[2] * values[f[2]][c]
    })
}

/// Per-slot lit colors; empty slots are black.
pub fn shade_fragments(
    mode: Lighting,
    m: &MeshBatch,
    frag: &MeshFragments,
    cam: &Camera,
    light: &DirectionalLight,
    colors: &[Vec3],
) -> Result<Vec<Vec3>> {
    check_inputs(m, frag, light, colors)?;
    let view = view_direction_world(cam);
    let faces = m.faces_packed();
    let slot = |s: usize, eval: &dyn Fn(usize) -> Vec3| {
        let f = frag.pix_to_face[s];
        if f < 0 {
            [0.0; 3]
        } else {
            eval(s)
        }
    };
    let n = frag.num_slots();
    let out = match mode {
        Lighting::Flat => {
            let lit: Vec<Vec3> = faces
                .iter()
                .zip(face_normals(m))
                .map(|(&f, n)| match normalize3(n) {
                    Some(n) => light.shade(n, view, face_color(colors, f)),
                    None => [0.0; 3],
                })
                .collect();
            (0..n)
                .into_par_iter()
                .map(|s| slot(s, &|s| lit[frag.pix_to_face[s] as usize]))
                .collect()
        }
        Lighting::Gouraud => {
            let lit = lit_vertices(m, light, view, colors);
            (0..n)
                .into_par_iter()
                .map(|s| {
                    slot(s, &|s| {
                        interp(&lit, faces[frag.pix_to_face[s] as usize], frag.bary[s])
                    })
                })
                .collect()
        }
        Lighting::Phong => {
            let normals = vertex_normals(m);
            (0..n)
                .into_par_iter()
                .map(|s| {
                    slot(s, &|s| {
                        let f = faces[frag.pix_to_face[s] as usize];
                        let b = frag.bary[s];
                        match normalize3(interp(&normals, f, b)) {
                            Some(nrm) => light.shade(nrm, view, interp(colors, f, b)),
                            None => [0.0; 3],
                        }
                    })
                })
                .collect()
        }
    };
    Ok(out)
}

fn lit_vertices(m: &MeshBatch, light: &DirectionalLight, view: Vec3, colors: &[Vec3]) -> Vec<Vec3> {
    vertex_normals(m)
        .iter()
        .zip(colors)
        .map(|(&n, &c)| {
            if n == [0.0; 3] {
                [0.0; 3]
            } else {
                light.shade(n, view, c)
            }
        })
        .collect()
}

pub fn flat_shading(
    m: &MeshBatch,
    frag: &MeshFragments,
    cam: &Camera,
    light: &DirectionalLight,
    colors: &[Vec3],
) -> Result<Vec<Vec3>> {
    shade_fragments(Lighting::Flat, m, frag, cam, light, colors)
}

pub fn gouraud_shading(
    m: &MeshBatch,
    frag: &MeshFragments,
    cam: &Camera,
    light: &DirectionalLight,
    colors: &[Vec3],
) -> Result<Vec<Vec3>> {
    shade_fragments(Lighting::Gouraud, m, frag, cam, light, colors)
}

pub fn phong_shading(
    m: &MeshBatch,
    frag: &MeshFragments,
    cam: &Camera,
    light: &DirectionalLight,
    colors: &[Vec3],
) -> Result<Vec<Vec3>> {
    shade_fragments(Lighting::Phong, m, frag, cam, light, colors)
}

/// Cotangents of [`shade_fragments`] for vertex colors, light intensities
/// and slot barycentrics. Vertex normals are treated as constants.
pub fn shade_fragments_backward(
    mode: Lighting,
    m: &MeshBatch,
    frag: &MeshFragments,
    cam: &Camera,
    light: &DirectionalLight,
    colors: &[Vec3],
    grad: &[Vec3],
) -> Result<ShadingGrads> {
    check_inputs(m, frag, light, colors)?;
    check_slots(frag, grad, "grad")?;
    let view = view_direction_world(cam);
    let faces = m.faces_packed();
    let mut out = ShadingGrads {
        colors: vec![[0.0; 3]; colors.len()],
        light: LightGrads::default(),
        bary: vec![[0.0; 3]; frag.num_slots()],
    };
    let occupied =
        (0..frag.num_slots()).filter(|&s| frag.pix_to_face[s] >= 0 && grad[s] != [0.0; 3]);
    match mode {
        Lighting::Flat => {
            let mut face_grad = vec![[0.0; 3]; faces.len()];
            for s in occupied {
                let fg = &mut face_grad[frag.pix_to_face[s] as usize];
                for c in 0..3 {
                    fg[c] += grad[s][c];
                }
            }
            for ((&f, n), g) in faces.iter().zip(face_normals(m)).zip(&face_grad) {
                let Some(n) = normalize3(n) else { continue };
                if *g == [0.0; 3] {
                    continue;
                }
                let surface = face_color(colors, f);
                out.light.add_shade(light, n, view, surface, *g);
                let (diff, spec) = light.terms(n, view);
                let i = light.intensity(diff, spec);
                for &v in &f {
                    for c in 0..3 {
                        out.colors[v][c] += g[c] * i[c] / 3.0;
                    }
                }
            }
        }
        Lighting::Gouraud => {
            let normals = vertex_normals(m);
            let lit = lit_vertices(m, light, view, colors);
            let mut g_lit = vec![[0.0; 3]; colors.len()];
            for s in occupied {
                let f = faces[frag.pix_to_face[s] as usize];
                let b = frag.bary[s];
                for i in 0..3 {
                    out.bary[s][i] = dot3(grad[s], lit[f[i]]);
                    for c in 0..3 {
                        g_lit[f[i]][c] += b[i] * grad[s][c];
                    }
                }
            }
            for (v, g) in g_lit.iter().enumerate() {
                let n = normals[v];
                if n == [0.0; 3] || *g == [0.0; 3] {
                    continue;
                }
                out.light.add_shade(light, n, view, colors[v], *g);
                let (diff, spec) = light.terms(n, view);
                let i = light.intensity(diff, spec);
                for c in 0..3 {
                    out.colors[v][c] += g[c] * i[c];
                }
            }
        }
        Lighting::Phong => {
            let normals = vertex_normals(m);
            for s in occupied {
                let f = faces[frag.pix_to_face[s] as usize];
                let b = frag.bary[s];
                let raw = interp(&normals, f, b);
                let len = norm3(raw);
                let Some(n) = normalize3(raw) else { continue };
                let g = grad[s];
                let surface = interp(colors, f, b);
                out.light.add_shade(light, n, view, surface, g);
                let (diff, spec) = light.terms(n, view);
                let inten = light.intensity(diff, spec);
                let g_surf: Vec3 = std::array::from_fn(|c| g[c] * inten[c]);
                let g_n = light.normal_vjp(n, view, surface, g);
                let gn_dot = dot3(g_n, n);
                let g_raw: Vec3 = std::array::from_fn(|c| (g_n[c] - n[c] * gn_dot) / len);
                for i in 0..3 {
                    out.bary[s][i] = dot3(g_surf, colors[f[i]]) + dot3(g_raw, normals[f[i]]);
                    for c in 0..3 {
                        out.colors[f[i]][c] += b[i] * g_surf[c];
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projection;
    use crate::raster::{rasterize_meshes, RasterSettings};

    fn camera() -> Camera {
        Camera::new(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0; 3],
            Projection::Orthographic { scale: [1.0, 1.0] },
            0.1,
            10.0,
        )
        .unwrap()
    }

    /// A triangle in the z=2 plane facing the camera (normal −z).
    fn facing() -> MeshBatch {
        MeshBatch::new(
            vec![vec![[-4.0, -4.0, 2.0], [0.0, 4.0, 2.0], [4.0, -4.0, 2.0]]],
            vec![vec![[0, 1, 2]]],
        )
        .unwrap()
    }

    fn light(direction: Vec3) -> DirectionalLight {
        DirectionalLight {
            direction,
            ambient: [0.0; 3],
            diffuse: [1.0; 3],
            specular: [0.0; 3],
            shininess: 1.0,
        }
    }

    #[test]
    fn normals_face_the_camera() {
        let n = vertex_normals(&facing());
        for v in n {
            assert!((v[2] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perpendicular_light_is_black_and_aligned_light_is_full() {
        let m = facing();
        let cam = camera();
        let frag = rasterize_meshes(&m, &cam, &RasterSettings::new((4, 4), 1, 0.0)).unwrap();
        let white = [[1.0; 3]; 3];
        for mode in [Lighting::Flat, Lighting::Gouraud, Lighting::Phong] {
            let dark =
                shade_fragments(mode, &m, &frag, &cam, &light([1.0, 0.0, 0.0]), &white).unwrap();
            assert!(dark.iter().flatten().all(|v| v.abs() < 1e-12));
            let full =
                shade_fragments(mode, &m, &frag, &cam, &light([0.0, 0.0, -1.0]), &white).unwrap();
            assert!(full.iter().flatten().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn gouraud_equals_phong_on_flat_triangle() {
        let m = facing();
        let cam = camera();
        let frag = rasterize_meshes(&m, &cam, &RasterSettings::new((8, 8), 1, 0.0)).unwrap();
        let colors = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let l = DirectionalLight {
            direction: normalize3([0.3, 0.2, -1.0]).unwrap(),
            ..DirectionalLight::default()
        };
        let g = gouraud_shading(&m, &frag, &cam, &l, &colors).unwrap();
        let p = phong_shading(&m, &frag, &cam, &l, &colors).unwrap();
        for (a, b) in g.iter().flatten().zip(p.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn curved() -> MeshBatch {
        MeshBatch::new(
            vec![vec![
                [-0.9, -0.8, 2.0],
                [0.8, -0.9, 2.3],
                [0.1, 0.9, 2.6],
                [0.9, 0.8, 3.1],
            ]],
            vec![vec![[0, 2, 1], [1, 2, 3]]],
        )
        .unwrap()
    }

    fn bump(l: &DirectionalLight, i: usize, d: f64) -> DirectionalLight {
        let mut out = *l;
        match i / 3 {
            0 => out.ambient[i % 3] += d,
            1 => out.diffuse[i % 3] += d,
            _ => out.specular[i % 3] += d,
        }
        out
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = curved();
        let cam = camera();
        let frag = rasterize_meshes(&m, &cam, &RasterSettings::new((6, 6), 1, 0.0)).unwrap();
        let colors = [
            [0.9, 0.2, 0.4],
            [0.3, 0.7, 0.5],
            [0.6, 0.6, 0.1],
            [0.2, 0.4, 0.9],
        ];
        let l = DirectionalLight {
            direction: normalize3([0.4, -0.3, -1.0]).unwrap(),
            ambient: [0.1, 0.2, 0.3],
            diffuse: [0.6, 0.5, 0.7],
            specular: [0.4, 0.3, 0.2],
            shininess: 3.0,
        };
        let grad: Vec<Vec3> = (0..frag.num_slots())
            .map(|s| [(s as f64 * 0.37).sin(), (s as f64 * 0.91).cos(), 0.5])
            .collect();
        let loss = |mode, fr: &MeshFragments, l: &DirectionalLight, c: &[Vec3]| -> f64 {
            let out = shade_fragments(mode, &m, fr, &cam, l, c).unwrap();
            out.iter().zip(&grad).map(|(o, g)| dot3(*o, *g)).sum()
        };
        let h = 1e-6;
        for mode in [Lighting::Flat, Lighting::Gouraud, Lighting::Phong] {
            let g = shade_fragments_backward(mode, &m, &frag, &cam, &l, &colors, &grad).unwrap();
            for v in 0..4 {
                for c in 0..3 {
                    let mut a = colors;
                    let mut b = colors;
                    a[v][c] += h;
                    b[v][c] -= h;
                    let fd = (loss(mode, &frag, &l, &a) - loss(mode, &frag, &l, &b)) / (2.0 * h);
                    assert!((fd - g.colors[v][c]).abs() < 1e-6, "{mode:?} color");
                }
            }
            let lv = g.light.to_vec();
            for i in 0..9 {
                let (a, b) = (bump(&l, i, h), bump(&l, i, -h));
                let fd =
                    (loss(mode, &frag, &a, &colors) - loss(mode, &frag, &b, &colors)) / (2.0 * h);
                assert!(
                    (fd - lv[i]).abs() < 1e-6,
                    "{mode:?} light {i}: {fd} vs {}",
                    lv[i]
                );
            }
            for s in 0..frag.num_slots() {
                if frag.pix_to_face[s] < 0 {
                    continue;
                }
                for i in 0..3 {
                    let mut a = frag.clone();
                    let mut b = frag.clone();
                    a.bary[s][i] += h;
                    b.bary[s][i] -= h;
                    let fd =
                        (loss(mode, &a, &l, &colors) - loss(mode, &b, &l, &colors)) / (2.0 * h);
                    assert!(
                        (fd - g.bary[s][i]).abs() < 1e-5,
                        "{mode:?} bary: {fd} vs {}",
                        g.bary[s][i]
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_light() {
        let bad = DirectionalLight {
            direction: [0.0, 0.0, 2.0],
            ..DirectionalLight::default()
        };
        assert!(bad.validate().is_err());
        let bad = DirectionalLight {
            ambient: [-0.1, 0.0, 0.0],
            ..DirectionalLight::default()
        };
        assert!(bad.validate().is_err());
        assert!("toon".parse::<Lighting>().is_err());
    }
}
