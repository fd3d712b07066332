//! Point-cloud splatting and compositing.
//!
//! Each point covers a disk of NDC radius `r` around its projection. A pixel
//! keeps the `K` nearest covering points along `z` (ties by point index),
//! with opacity `α = 1 − d²/r²` falling off from the disk center. Features are
//! then combined either front to back ([`alpha_composite`]) or as an
//! opacity-weighted mean ([`norm_composite`]).

mod composite;

pub use composite::{
    alpha_composite, composite, composite_backward, norm_composite, CompositeOutput, Compositor,
};

use rayon::prelude::*;

use crate::batching::PointCloudBatch;
use crate::camera::{pixel_center_ndc, Camera};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::raster::bins::TileBins;
use crate::raster::topk::{Candidate, TopK};
use crate::raster::DEFAULT_TILE_SIZE;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRasterSettings {
    pub image_size: (usize, usize),
    pub points_per_pixel: usize,
    /// Splat radius in NDC units.
    pub radius: f64,
    pub tile_size: usize,
}

impl Default for PointRasterSettings {
    fn default() -> Self {
        Self {
            image_size: (64, 64),
            points_per_pixel: 8,
            radius: 0.01,
            tile_size: DEFAULT_TILE_SIZE,
        }
    }
}

impl PointRasterSettings {
    pub fn new(image_size: (usize, usize), points_per_pixel: usize, radius: f64) -> Self {
        Self {
            image_size,
            points_per_pixel,
            radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::InvalidParameter(
                "image size must be at least 1×1".into(),
            ));
        }
        if self.points_per_pixel == 0 {
            return Err(Error::InvalidParameter(
                "points_per_pixel must be at least 1".into(),
            ));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
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

/// `B × H × W × K` point slots; empty slots hold `-1` everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFragments {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub idx: Vec<i64>,
    pub zbuf: Vec<f64>,
    pub dists2: Vec<f64>,
}

impl PointFragments {
    fn empty(batch: usize, height: usize, width: usize, k: usize) -> Self {
        let n = batch * height * width * k;
        Self {
            batch,
            height,
            width,
            k,
            idx: vec![-1; n],
            zbuf: vec![-1.0; n],
            dists2: vec![-1.0; n],
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.batch * self.height * self.width
    }

    pub fn num_slots(&self) -> usize {
        self.idx.len()
    }

    #[inline]
    pub fn slot(&self, b: usize, row: usize, col: usize, k: usize) -> usize {
        ((b * self.height + row) * self.width + col) * self.k + k
    }

    pub fn bit_identical(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        (self.batch, self.height, self.width, self.k)
            == (other.batch, other.height, other.width, other.k)
            && self.idx == other.idx
            && bits(&self.zbuf) == bits(&other.zbuf)
            && bits(&self.dists2) == bits(&other.dists2)
    }
}

fn project_points(pc: &PointCloudBatch, cam: &Camera) -> Vec<Option<Vec3>> {
    pc.points_packed()
        .par_iter()
        .map(|&p| {
            cam.project(p)
                .filter(|v| v[2] >= cam.znear() && v.iter().all(|c| c.is_finite()))
        })
        .collect()
}

fn rasterize_point_pixels<'a, F>(
    proj: &[Option<Vec3>],
    batch: usize,
    s: &PointRasterSettings,
    candidates: F,
) -> PointFragments
where
    F: Fn(usize, usize, usize) -> &'a [u32] + Sync,
{
    let (h, w) = s.image_size;
    let k = s.points_per_pixel;
    let r2 = s.radius * s.radius;
    let mut frag = PointFragments::empty(batch, h, w, k);
    let row_len = w * k;
    frag.idx
        .par_chunks_mut(row_len)
        .zip(frag.zbuf.par_chunks_mut(row_len))
        .zip(frag.dists2.par_chunks_mut(row_len))
        .enumerate()
        .for_each(|(r, ((idx, zb), d2))| {
            let b = r / h;
            let row = r % h;
            for col in 0..w {
                let p = pixel_center_ndc(h, w, row, col);
                let mut top = TopK::new(k);
                for &i in candidates(b, row, col) {
                    let Some(q) = proj[i as usize] else { continue };
                    let dx = p[0] - q[0];
                    let dy = p[1] - q[1];
                    let dist2 = dx * dx + dy * dy;
                    if dist2 <= r2 {
                        top.push(Candidate {
                            z: q[2],
                            id: i,
                            payload: dist2,
                        });
                    }
                }
                for (slot, c) in top.into_sorted().into_iter().enumerate() {
                    let j = col * k + slot;
                    idx[j] = c.id as i64;
                    zb[j] = c.z;
                    d2[j] = c.payload;
                }
            }
        });
    frag
}

/// Tiled splat rasterization.
pub fn rasterize_points(
    pc: &PointCloudBatch,
    cam: &Camera,
    s: &PointRasterSettings,
) -> Result<PointFragments> {
    s.validate()?;
    let proj = project_points(pc, cam);
    let (h, w) = s.image_size;
    let owner = pc.points_packed_view().item_to_element();
    let r = s.radius;
    let bins = TileBins::build(
        pc.batch_size(),
        h,
        w,
        s.tile_size,
        proj.iter().enumerate().filter_map(|(i, q)| {
            q.map(|q| (owner[i], i, [q[0] - r, q[0] + r, q[1] - r, q[1] + r]))
        }),
    );
    Ok(rasterize_point_pixels(
        &proj,
        pc.batch_size(),
        s,
        |b, row, col| bins.bin(b, row, col),
    ))
}

/// Every pixel against every point of its cloud.
pub fn rasterize_points_naive(
    pc: &PointCloudBatch,
    cam: &Camera,
    s: &PointRasterSettings,
) -> Result<PointFragments> {
    s.validate()?;
    let proj = project_points(pc, cam);
    let offsets = pc.cloud_offsets();
    let lists: Vec<Vec<u32>> = (0..pc.batch_size())
        .map(|b| (offsets[b]..offsets[b + 1]).map(|i| i as u32).collect())
        .collect();
    Ok(rasterize_point_pixels(
        &proj,
        pc.batch_size(),
        s,
        |b, _, _| lists[b].as_slice(),
    ))
}

/// `α = 1 − d²/r²` per occupied slot, zero for empty slots.
pub fn splat_opacity(frag: &PointFragments, radius: f64) -> Vec<f64> {
    let r2 = radius * radius;
    frag.idx
        .iter()
        .zip(&frag.dists2)
        .map(|(&i, &d2)| if i < 0 { 0.0 } else { 1.0 - d2 / r2 })
        .collect()
}

/// Pulls per-slot opacity cotangents back to packed point positions through
/// the splat falloff and the camera.
pub fn splat_opacity_backward(
    pc: &PointCloudBatch,
    cam: &Camera,
    s: &PointRasterSettings,
    frag: &PointFragments,
    grad_alphas: &[f64],
) -> Result<Vec<Vec3>> {
    let (h, w) = s.image_size;
    if (frag.batch, frag.height, frag.width, frag.k) != (pc.batch_size(), h, w, s.points_per_pixel)
    {
        return Err(Error::shape(
            "point fragments do not match the settings".to_string(),
        ));
    }
    if grad_alphas.len() != frag.num_slots() {
        return Err(Error::shape(format!(
            "{} opacity cotangents for {} slots",
            grad_alphas.len(),
            frag.num_slots()
        )));
    }
    let proj = project_points(pc, cam);
    let r2 = s.radius * s.radius;
    let k = frag.k;
    let per_row: Vec<Vec<(u32, [f64; 2])>> = (0..frag.batch * h)
        .into_par_iter()
        .map(|r| {
            let row = r % h;
            let mut out = Vec::new();
            for col in 0..w {
                let p = pixel_center_ndc(h, w, row, col);
                for slot in 0..k {
                    let i = (r * w + col) * k + slot;
                    let id = frag.idx[i];
                    if id < 0 {
                        break;
                    }
                    let g = grad_alphas[i];
                    if g == 0.0 {
                        continue;
                    }
                    let Some(q) = proj[id as usize] else { continue };
                    // dα/dd² = −1/r², dd²/dq = −2(p − q)
                    let c = 2.0 * g / r2;
                    out.push((id as u32, [c * (p[0] - q[0]), c * (p[1] - q[1])]));
                }
            }
            out
        })
        .collect();
    let pts = pc.points_packed();
    let mut ndc = vec![[0.0; 2]; pts.len()];
    for row in &per_row {
        for (id, g) in row {
            ndc[*id as usize][0] += g[0];
            ndc[*id as usize][1] += g[1];
        }
    }
    Ok(pts
        .par_iter()
        .zip(&ndc)
        .map(|(&p, g)| {
            if *g == [0.0; 2] {
                [0.0; 3]
            } else {
                cam.project_vjp(p, [g[0], g[1], 0.0])
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projection;

    fn cam() -> Camera {
        Camera::new(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0; 3],
            Projection::Orthographic { scale: [1.0, 1.0] },
            0.1,
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn point_on_pixel_center() {
        let c = pixel_center_ndc(8, 8, 3, 5);
        let pc = PointCloudBatch::new(vec![vec![[c[0], c[1], 2.0]]]).unwrap();
        let s = PointRasterSettings::new((8, 8), 2, 0.05);
        let f = rasterize_points(&pc, &cam(), &s).unwrap();
        let i = f.slot(0, 3, 5, 0);
        assert_eq!(f.idx[i], 0);
        assert_eq!(f.dists2[i], 0.0);
        assert_eq!(f.idx[i + 1], -1);
        assert_eq!(f.idx.iter().filter(|&&v| v >= 0).count(), 1);
        assert_eq!(splat_opacity(&f, 0.05)[i], 1.0);
    }

    #[test]
    fn slots_sorted_with_index_ties() {
        let pc = PointCloudBatch::new(vec![vec![
            [0.0, 0.0, 3.0],
            [0.01, 0.0, 1.0],
            [0.0, 0.01, 3.0],
        ]])
        .unwrap();
        let s = PointRasterSettings::new((4, 4), 3, 2.0);
        let f = rasterize_points(&pc, &cam(), &s).unwrap();
        for px in 0..16 {
            assert_eq!(&f.idx[px * 3..px * 3 + 3], &[1, 0, 2]);
        }
    }

    #[test]
    fn opacity_falloff() {
        let f = PointFragments {
            batch: 1,
            height: 1,
            width: 1,
            k: 3,
            idx: vec![0, 1, -1],
            zbuf: vec![1.0, 1.0, -1.0],
            dists2: vec![0.5 * 0.04, 0.04, -1.0],
        };
        let a = splat_opacity(&f, 0.2);
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!(a[1].abs() < 1e-15);
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn backward_matches_fd() {
        let pc = PointCloudBatch::new(vec![vec![[0.11, -0.07, 2.0], [-0.2, 0.15, 2.5]]]).unwrap();
        let s = PointRasterSettings::new((8, 8), 2, 0.3);
        let camera = cam();
        let f = rasterize_points(&pc, &camera, &s).unwrap();
        let g: Vec<f64> = (0..f.num_slots())
            .map(|i| ((i * 7) % 5) as f64 - 2.0)
            .collect();
        let grad = splat_opacity_backward(&pc, &camera, &s, &f, &g).unwrap();
        let loss = |p: &PointCloudBatch| -> f64 {
            let a = splat_opacity(&rasterize_points(p, &camera, &s).unwrap(), s.radius);
            a.iter().zip(&g).map(|(a, g)| a * g).sum()
        };
        for i in 0..2 {
            for c in 0..2 {
                let h = 1e-6;
                let mut a = pc.points_packed().to_vec();
                let mut b = a.clone();
                a[i][c] += h;
                b[i][c] -= h;
                let fd = (loss(&pc.with_points_packed(a).unwrap())
                    - loss(&pc.with_points_packed(b).unwrap()))
                    / (2.0 * h);
                assert!((fd - grad[i][c]).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn settings_validation() {
        assert!(PointRasterSettings::new((8, 8), 0, 0.1).validate().is_err());
        assert!(PointRasterSettings::new((8, 8), 1, 0.0).validate().is_err());
        assert!(PointRasterSettings::default().validate().is_ok());
    }
}
