//! Mesh rasterization into per-pixel fragment buffers.
//!
//! For every pixel the rasterizer keeps the `K` faces nearest along `z` whose
//! signed squared xy-distance to the pixel center is at most `blur_radius`.
//! [`rasterize_meshes`] runs in two passes: faces are first binned into
//! `tile_size × tile_size` tiles by a bounding box inflated by
//! `√blur_radius`, then each pixel scans only its tile's bin.
//! [`rasterize_meshes_naive`] scans every face for every pixel and produces
//! bit-identical output.
//!
//! Barycentrics are affine in NDC. Stored barycentrics are clamped to
//! `[0, 1]` and renormalized, and depth is interpolated with the stored
//! weights. Faces with every vertex in front of `znear` are culled; faces
//! with a vertex at or behind the perspective center are skipped; remaining
//! fragments with interpolated depth below `znear` are dropped.

pub mod bins;
pub mod topk;
pub mod triangle;

use rayon::prelude::*;

use crate::batching::MeshBatch;
use crate::camera::{pixel_center_ndc, Camera};
use crate::error::{Error, Result};
use crate::grad::{GradBuffer, Quantity};
use crate::math::{Vec2, Vec3};

use bins::TileBins;
use topk::{Candidate, TopK};
use triangle::{
    barycentric_coords, barycentric_vjp, clamp_barycentrics, clamp_barycentrics_vjp,
    edge_dist2_vjp, edge_fn, nearest_edge, DEGENERATE_AREA,
};

/// Default squared-NDC blur radius.
pub const DEFAULT_BLUR_RADIUS: f64 = 1e-4;
pub const DEFAULT_TILE_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterSettings {
    /// `(height, width)` in pixels.
    pub image_size: (usize, usize),
    pub faces_per_pixel: usize,
    /// Squared NDC distance beyond which a face does not reach a pixel.
    pub blur_radius: f64,
    pub tile_size: usize,
}

impl Default for RasterSettings {
    fn default() -> Self {
        Self {
            image_size: (64, 64),
            faces_per_pixel: 1,
            blur_radius: DEFAULT_BLUR_RADIUS,
            tile_size: DEFAULT_TILE_SIZE,
        }
    }
}

impl RasterSettings {
    pub fn new(image_size: (usize, usize), faces_per_pixel: usize, blur_radius: f64) -> Self {
        Self {
            image_size,
            faces_per_pixel,
            blur_radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::InvalidParameter(
                "image size must be at least 1×1".into(),
            ));
        }
        if self.faces_per_pixel == 0 {
            return Err(Error::InvalidParameter(
                "faces_per_pixel must be at least 1".into(),
            ));
        }
        if !(self.blur_radius >= 0.0) || !self.blur_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "blur_radius must be finite and non-negative, got {}",
                self.blur_radius
            )));
        }
        if self.tile_size == 0 {
            return Err(Error::InvalidParameter(
                "tile_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel record of the `K` nearest faces, laid out `B × H × W × K`.
/// Empty slots hold face `-1`, depth `-1`, distance `-1` and barycentrics
/// `[-1; 3]`; they always trail the occupied slots.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFragments {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    /// Packed face ids.
    pub pix_to_face: Vec<i64>,
    pub zbuf: Vec<f64>,
    pub bary: Vec<[f64; 3]>,
    /// Signed squared xy-distance to the face boundary, negative inside.
    pub dists: Vec<f64>,
}

impl MeshFragments {
    fn empty(batch: usize, height: usize, width: usize, k: usize) -> Self {
        let n = batch * height * width * k;
        Self {
            batch,
            height,
            width,
            k,
            pix_to_face: vec![-1; n],
            zbuf: vec![-1.0; n],
            bary: vec![[-1.0; 3]; n],
            dists: vec![-1.0; n],
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.batch * self.height * self.width
    }

    pub fn num_slots(&self) -> usize {
        self.pix_to_face.len()
    }

    /// Index of slot `k` of pixel `(b, row, col)`.
    #[inline]
    pub fn slot(&self, b: usize, row: usize, col: usize, k: usize) -> usize {
        ((b * self.height + row) * self.width + col) * self.k + k
    }

    /// Equality of every stored bit, including the sign of zeros.
    pub fn bit_identical(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        (self.batch, self.height, self.width, self.k)
            == (other.batch, other.height, other.width, other.k)
            && self.pix_to_face == other.pix_to_face
            && bits(&self.zbuf) == bits(&other.zbuf)
            && bits(&self.dists) == bits(&other.dists)
            && bits(self.bary.as_flattened()) == bits(other.bary.as_flattened())
    }
}

/// A face in NDC with view-space depths.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ProjectedFace {
    pub xy: [Vec2; 3],
    pub z: [f64; 3],
    pub valid: bool,
}

pub(crate) fn project_faces(m: &MeshBatch, cam: &Camera) -> Vec<ProjectedFace> {
    let ndc: Vec<Option<Vec3>> = m
        .verts_packed()
        .par_iter()
        .map(|&p| cam.project(p))
        .collect();
    m.faces_packed()
        .par_iter()
        .map(|f| {
            let v = [ndc[f[0]], ndc[f[1]], ndc[f[2]]];
            match v {
                [Some(a), Some(b), Some(c)] => {
                    let xy = [[a[0], a[1]], [b[0], b[1]], [c[0], c[1]]];
                    let z = [a[2], b[2], c[2]];
                    let behind = z.iter().all(|&z| z < cam.znear());
                    let finite = xy.as_flattened().iter().chain(&z).all(|v| v.is_finite());
                    let area = edge_fn(xy[0], xy[1], xy[2]);
                    ProjectedFace {
                        xy,
                        z,
                        valid: !behind && finite && area.abs() >= DEGENERATE_AREA,
                    }
                }
                _ => ProjectedFace {
                    xy: [[0.0; 2]; 3],
                    z: [0.0; 3],
                    valid: false,
                },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceHit {
    pub bary: [f64; 3],
    pub dist: f64,
}

/// The fragment a face leaves at pixel center `p`, if any.
#[inline]
pub(crate) fn face_fragment(
    face: &ProjectedFace,
    p: Vec2,
    blur_radius: f64,
    znear: f64,
) -> Option<(f64, FaceHit)> {
    let w = barycentric_coords(p, &face.xy)?;
    let inside = w[0] > 0.0 && w[1] > 0.0 && w[2] > 0.0;
    let (_, d2, _) = nearest_edge(p, &face.xy);
    if !inside && d2 > blur_radius {
        return None;
    }
    let bary = clamp_barycentrics(w);
    let z = bary[0] * face.z[0] + bary[1] * face.z[1] + bary[2] * face.z[2];
    if z < znear {
        return None;
    }
    Some((
        z,
        FaceHit {
            bary,
            dist: if inside { -d2 } else { d2 },
        },
    ))
}

fn face_bbox(face: &ProjectedFace, blur_radius: f64) -> bins::NdcBox {
    let r = blur_radius.sqrt();
    let xs = [face.xy[0][0], face.xy[1][0], face.xy[2][0]];
    let ys = [face.xy[0][1], face.xy[1][1], face.xy[2][1]];
    [
        xs.iter().copied().fold(f64::INFINITY, f64::min) - r,
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r,
        ys.iter().copied().fold(f64::INFINITY, f64::min) - r,
        ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r,
    ]
}

/// Shared per-pixel pass; `candidates(b, row, col)` lists face ids to test in
/// ascending order.
fn rasterize_pixels<'a, F>(
    faces: &[ProjectedFace],
    batch: usize,
    cam: &Camera,
    s: &RasterSettings,
    candidates: F,
) -> MeshFragments
where
    F: Fn(usize, usize, usize) -> &'a [u32] + Sync,
{
    let (h, w) = s.image_size;
    let k = s.faces_per_pixel;
    let mut frag = MeshFragments::empty(batch, h, w, k);
    let row_len = w * k;
    frag.pix_to_face
        .par_chunks_mut(row_len)
        .zip(frag.zbuf.par_chunks_mut(row_len))
        .zip(frag.bary.par_chunks_mut(row_len))
        .zip(frag.dists.par_chunks_mut(row_len))
        .enumerate()
        .for_each(|(r, (((p2f, zb), bary), dists))| {
            let b = r / h;
            let row = r % h;
            for col in 0..w {
                let p = pixel_center_ndc(h, w, row, col);
                let mut top = TopK::new(k);
                for &fid in candidates(b, row, col) {
                    let face = &faces[fid as usize];
                    if let Some((z, hit)) = face_fragment(face, p, s.blur_radius, cam.znear()) {
                        top.push(Candidate {
                            z,
                            id: fid,
                            payload: hit,
                        });
                    }
                }
                for (slot, c) in top.into_sorted().into_iter().enumerate() {
                    let i = col * k + slot;
                    p2f[i] = c.id as i64;
                    zb[i] = c.z;
                    bary[i] = c.payload.bary;
                    dists[i] = c.payload.dist;
                }
            }
        });
    frag
}

/// Two-pass tiled rasterization; see the module docs.
pub fn rasterize_meshes(m: &MeshBatch, cam: &Camera, s: &RasterSettings) -> Result<MeshFragments> {
    s.validate()?;
    let faces = project_faces(m, cam);
    let (h, w) = s.image_size;
    let owner = m.face_to_mesh();
    let bins = TileBins::build(
        m.batch_size(),
        h,
        w,
        s.tile_size,
        faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.valid)
            .map(|(i, f)| (owner[i], i, face_bbox(f, s.blur_radius))),
    );
    Ok(rasterize_pixels(
        &faces,
        m.batch_size(),
        cam,
        s,
        |b, row, col| bins.bin(b, row, col),
    ))
}

/// Every pixel against every face of its mesh. Correctness oracle and
/// benchmark baseline for [`rasterize_meshes`].
pub fn rasterize_meshes_naive(
    m: &MeshBatch,
    cam: &Camera,
    s: &RasterSettings,
) -> Result<MeshFragments> {
    s.validate()?;
    let faces = project_faces(m, cam);
    let lists: Vec<Vec<u32>> = (0..m.batch_size())
        .map(|b| {
            (m.face_offsets()[b]..m.face_offsets()[b + 1])
                .filter(|&i| faces[i].valid)
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    Ok(rasterize_pixels(
        &faces,
        m.batch_size(),
        cam,
        s,
        |b, _, _| lists[b].as_slice(),
    ))
}

/// Discrete state behind every slot: the face id, the sign pattern of the
/// unclamped barycentrics and the closest boundary feature (edge interior
/// or corner). Within a region where this
/// is constant the fragment buffers are smooth in the vertex positions.
pub fn fragment_regimes(m: &MeshBatch, cam: &Camera, frag: &MeshFragments) -> Vec<i64> {
    let faces = project_faces(m, cam);
    let (h, w, k) = (frag.height, frag.width, frag.k);
    (0..frag.num_slots())
        .into_par_iter()
        .map(|i| {
            let fid = frag.pix_to_face[i];
            if fid < 0 {
                return -1;
            }
            let px = i / k;
            let (row, col) = ((px / w) % h, px % w);
            let p = pixel_center_ndc(h, w, row, col);
            let face = &faces[fid as usize];
            let signs = barycentric_coords(p, &face.xy)
                .map(|b| {
                    b.iter()
                        .enumerate()
                        .fold(0, |acc, (j, &v)| acc | (((v > 0.0) as i64) << j))
                })
                .unwrap_or(0);
            let (edge, _, t) = nearest_edge(p, &face.xy);
            let feature = match t {
                t if t <= 0.0 => 3 + edge,
                t if t >= 1.0 => 3 + (edge + 1) % 3,
                _ => edge,
            };
            (fid << 6) | (signs << 3) | feature as i64
        })
        .collect()
}

/// Output cotangents for the three differentiable fragment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentCotangents {
    pub zbuf: Vec<f64>,
    pub bary: Vec<[f64; 3]>,
    pub dists: Vec<f64>,
}

impl FragmentCotangents {
    pub fn zeros(frag: &MeshFragments) -> Self {
        let n = frag.num_slots();
        Self {
            zbuf: vec![0.0; n],
            bary: vec![[0.0; 3]; n],
            dists: vec![0.0; n],
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct FaceGrad {
    xy: [Vec2; 3],
    z: [f64; 3],
}

impl FaceGrad {
    fn add(&mut self, o: &FaceGrad) {
        for v in 0..3 {
            self.xy[v][0] += o.xy[v][0];
            self.xy[v][1] += o.xy[v][1];
            self.z[v] += o.z[v];
        }
    }
}

fn slot_grad(face: &ProjectedFace, p: Vec2, g_z: f64, g_bary: [f64; 3], g_dist: f64) -> FaceGrad {
    let mut out = FaceGrad::default();
    let Some(w) = barycentric_coords(p, &face.xy) else {
        return out;
    };
    let bary = clamp_barycentrics(w);
    let mut gb = g_bary;
    for i in 0..3 {
        out.z[i] = g_z * bary[i];
        gb[i] += g_z * face.z[i];
    }
    let gw = clamp_barycentrics_vjp(w, gb);
    let gxy = barycentric_vjp(p, &face.xy, gw);
    if g_dist != 0.0 {
        let inside = w[0] > 0.0 && w[1] > 0.0 && w[2] > 0.0;
        let (edge, _, t) = nearest_edge(p, &face.xy);
        let sign = if inside { -1.0 } else { 1.0 };
        let gd = edge_dist2_vjp(p, &face.xy, edge, t, sign * g_dist);
        for v in 0..3 {
            out.xy[v][0] += gd[v][0];
            out.xy[v][1] += gd[v][1];
        }
    }
    for v in 0..3 {
        out.xy[v][0] += gxy[v][0];
        out.xy[v][1] += gxy[v][1];
    }
    out
}

/// Pulls fragment cotangents back to packed vertex positions.
///
/// Which faces occupy which slots is treated as fixed. Per-pixel
/// contributions are gathered per image row in parallel and reduced in row
/// order, so the result does not depend on the thread count.
pub fn rasterize_backward(
    m: &MeshBatch,
    cam: &Camera,
    s: &RasterSettings,
    frag: &MeshFragments,
    cot: &FragmentCotangents,
) -> Result<GradBuffer> {
    let verts = rasterize_backward_verts(m, cam, s, frag, cot)?;
    let mut g = GradBuffer::new();
    g.accumulate_vec3(Quantity::Verts, &verts)?;
    Ok(g)
}

pub fn rasterize_backward_verts(
    m: &MeshBatch,
    cam: &Camera,
    s: &RasterSettings,
    frag: &MeshFragments,
    cot: &FragmentCotangents,
) -> Result<Vec<Vec3>> {
    let (h, w) = s.image_size;
    let expected = (m.batch_size(), h, w, s.faces_per_pixel);
    if (frag.batch, frag.height, frag.width, frag.k) != expected {
        return Err(Error::shape(format!(
            "fragments are {}×{}×{}×{} but settings imply {:?}",
            frag.batch, frag.height, frag.width, frag.k, expected
        )));
    }
    let n = frag.num_slots();
    if cot.zbuf.len() != n || cot.bary.len() != n || cot.dists.len() != n {
        return Err(Error::shape(format!(
            "fragment cotangents must have {n} slots (zbuf {}, bary {}, dists {})",
            cot.zbuf.len(),
            cot.bary.len(),
            cot.dists.len()
        )));
    }
    let faces = project_faces(m, cam);
    let k = frag.k;
    let row_len = w * k;
    let per_row: Vec<Vec<(u32, FaceGrad)>> = (0..frag.batch * h)
        .into_par_iter()
        .map(|r| {
            let row = r % h;
            let mut out = Vec::new();
            for col in 0..w {
                let p = pixel_center_ndc(h, w, row, col);
                for slot in 0..k {
                    let i = r * row_len + col * k + slot;
                    let fid = frag.pix_to_face[i];
                    if fid < 0 {
                        break;
                    }
                    let (gz, gb, gd) = (cot.zbuf[i], cot.bary[i], cot.dists[i]);
                    if gz == 0.0 && gd == 0.0 && gb == [0.0; 3] {
                        continue;
                    }
                    out.push((fid as u32, slot_grad(&faces[fid as usize], p, gz, gb, gd)));
                }
            }
            out
        })
        .collect();
    let mut face_grads = vec![FaceGrad::default(); faces.len()];
    for row in &per_row {
        for (fid, g) in row {
            face_grads[*fid as usize].add(g);
        }
    }
    let verts = m.verts_packed();
    let mut ndc_grads = vec![[0.0; 3]; verts.len()];
    for (f, g) in m.faces_packed().iter().zip(&face_grads) {
        for v in 0..3 {
            let t = &mut ndc_grads[f[v]];
            t[0] += g.xy[v][0];
            t[1] += g.xy[v][1];
            t[2] += g.z[v];
        }
    }
    Ok(verts
        .par_iter()
        .zip(&ndc_grads)
        .map(|(&p, &g)| {
            if g == [0.0; 3] {
                [0.0; 3]
            } else {
                cam.project_vjp(p, g)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projection;

    fn ortho_camera() -> Camera {
        Camera::new(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0; 3],
            Projection::Orthographic { scale: [1.0, 1.0] },
            0.1,
            100.0,
        )
        .unwrap()
    }

    fn big_triangle(z: f64) -> MeshBatch {
        MeshBatch::new(
            vec![vec![[-4.0, -4.0, z], [4.0, -4.0, z], [0.0, 4.0, z]]],
            vec![vec![[0, 1, 2]]],
        )
        .unwrap()
    }

    #[test]
    fn single_face_covers_image() {
        let s = RasterSettings::new((16, 16), 1, 0.0);
        let f = rasterize_meshes(&big_triangle(2.0), &ortho_camera(), &s).unwrap();
        assert!(f.pix_to_face.iter().all(|&p| p == 0));
        assert!(f.zbuf.iter().all(|&z| (z - 2.0).abs() < 1e-12));
        assert!(f.dists.iter().all(|&d| d < 0.0));
        for b in &f.bary {
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_pixels_are_empty() {
        let m = MeshBatch::new(
            vec![vec![[-0.1, -0.1, 2.0], [0.1, -0.1, 2.0], [0.0, 0.1, 2.0]]],
            vec![vec![[0, 1, 2]]],
        )
        .unwrap();
        let s = RasterSettings::new((16, 16), 3, 1e-4);
        let f = rasterize_meshes(&m, &ortho_camera(), &s).unwrap();
        let corner = f.slot(0, 0, 0, 0);
        assert!(f.pix_to_face[corner..corner + 3].iter().all(|&p| p == -1));
        let center = f.slot(0, 8, 8, 0);
        assert_eq!(f.pix_to_face[center], 0);
        assert_eq!(f.pix_to_face[center + 1], -1);
    }

    #[test]
    fn empty_batch_and_large_k() {
        let m = MeshBatch::new(vec![vec![[0.0; 3]]], vec![vec![]]).unwrap();
        let s = RasterSettings::new((8, 8), 4, 1e-4);
        let f = rasterize_meshes_naive(&m, &ortho_camera(), &s).unwrap();
        assert!(f.pix_to_face.iter().all(|&p| p == -1));

        let f = rasterize_meshes_naive(&big_triangle(2.0), &ortho_camera(), &s).unwrap();
        for px in f.pix_to_face.chunks(4) {
            assert_eq!(px, &[0, -1, -1, -1]);
        }
    }

    #[test]
    fn occupied_slots_sorted_by_depth() {
        let m = MeshBatch::new(
            vec![vec![
                [-4.0, -4.0, 5.0],
                [4.0, -4.0, 5.0],
                [0.0, 4.0, 5.0],
                [-4.0, -4.0, 3.0],
                [4.0, -4.0, 3.0],
                [0.0, 4.0, 3.0],
            ]],
            vec![vec![[0, 1, 2], [3, 4, 5]]],
        )
        .unwrap();
        let s = RasterSettings::new((8, 8), 2, 0.0);
        let f = rasterize_meshes(&m, &ortho_camera(), &s).unwrap();
        for px in 0..64 {
            assert_eq!(&f.pix_to_face[px * 2..px * 2 + 2], &[1, 0]);
            assert!(f.zbuf[px * 2] <= f.zbuf[px * 2 + 1]);
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let m = big_triangle(2.0);
        let cam = ortho_camera();
        let s = RasterSettings::new((8, 8), 1, 1e-4);
        let f = rasterize_meshes(&m, &cam, &s).unwrap();
        let g = rasterize_backward_verts(&m, &cam, &s, &f, &FragmentCotangents::zeros(&f)).unwrap();
        assert!(g.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn depth_gradient_is_barycentric_weight() {
        let m = MeshBatch::new(
            vec![vec![[-0.8, -0.7, 2.0], [0.9, -0.6, 2.5], [0.1, 0.8, 3.0]]],
            vec![vec![[0, 1, 2]]],
        )
        .unwrap();
        let cam = ortho_camera();
        let s = RasterSettings::new((8, 8), 1, 0.0);
        let f = rasterize_meshes(&m, &cam, &s).unwrap();
        let i = f.slot(0, 4, 4, 0);
        assert_eq!(f.pix_to_face[i], 0);
        let mut cot = FragmentCotangents::zeros(&f);
        cot.zbuf[i] = 1.0;
        let g = rasterize_backward_verts(&m, &cam, &s, &f, &cot).unwrap();
        for v in 0..3 {
            assert!((g[v][2] - f.bary[i][v]).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_cotangents_are_rejected() {
        let m = big_triangle(2.0);
        let cam = ortho_camera();
        let s = RasterSettings::new((8, 8), 1, 1e-4);
        let f = rasterize_meshes(&m, &cam, &s).unwrap();
        let mut cot = FragmentCotangents::zeros(&f);
        cot.dists.pop();
        assert!(matches!(
            rasterize_backward(&m, &cam, &s, &f, &cot),
            Err(Error::Shape(_))
        ));
        let s2 = RasterSettings::new((8, 8), 2, 1e-4);
        assert!(rasterize_backward(&m, &cam, &s2, &f, &FragmentCotangents::zeros(&f)).is_err());
    }

    #[test]
    fn faces_behind_camera_are_culled() {
        let cam = Camera::new(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0; 3],
            Projection::Perspective {
                focal_length: 1.0,
                principal_point: [0.0, 0.0],
            },
            1.0,
            100.0,
        )
        .unwrap();
        let s = RasterSettings::new((8, 8), 1, 0.0);
        let f = rasterize_meshes(&big_triangle(0.5), &cam, &s).unwrap();
        assert!(f.pix_to_face.iter().all(|&p| p == -1));
        let f = rasterize_meshes(&big_triangle(-2.0), &cam, &s).unwrap();
        assert!(f.pix_to_face.iter().all(|&p| p == -1));
    }

    #[test]
    fn settings_validation() {
        let mut s = RasterSettings::default();
        assert!(s.validate().is_ok());
        s.faces_per_pixel = 0;
        assert!(s.validate().is_err());
        let s = RasterSettings {
            blur_radius: -1.0,
            ..RasterSettings::default()
        };
        assert!(s.validate().is_err());
        let s = RasterSettings {
            tile_size: 0,
            ..RasterSettings::default()
        };
        assert!(s.validate().is_err());
    }
}
