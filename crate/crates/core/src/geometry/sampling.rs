//! Uniform sampling of points on mesh surfaces.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::batching::{MeshBatch, PointCloudBatch};
use crate::error::{Error, Result};
use crate::math::{cross3, norm3, sub3, Vec3};

/// Sampled points plus the packed face each point came from.
#[derive(Clone, Debug)]
pub struct SurfaceSamples {
    pub points: PointCloudBatch,
    pub face_ids: Vec<usize>,
}

pub fn face_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
}

/// `n` points per mesh, faces picked with probability proportional to area.
pub fn sample_points_from_meshes(m: &MeshBatch, n: usize, seed: u64) -> Result<PointCloudBatch> {
    Ok(sample_points_with_faces(m, n, seed)?.points)
}

pub fn sample_points_with_faces(m: &MeshBatch, n: usize, seed: u64) -> Result<SurfaceSamples> {
    let verts = m.verts_packed();
    let faces = m.faces_packed();
    let per_mesh: Vec<Result<(Vec<Vec3>, Vec<usize>)>> = (0..m.batch_size())
        .into_par_iter()
        .map(|mesh| {
            let lo = m.face_offsets()[mesh];
            let hi = m.face_offsets()[mesh + 1];
            let areas: Vec<f64> = faces[lo..hi]
                .iter()
                .map(|f| face_area(verts[f[0]], verts[f[1]], verts[f[2]]))
                .collect();
            let pick = WeightedIndex::new(&areas).map_err(|_| Error::DegenerateMesh(mesh))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(mesh as u64);
            let mut pts = Vec::with_capacity(n);
            let mut ids = Vec::with_capacity(n);
            for _ in 0..n {
                let fi = lo + pick.sample(&mut rng);
                let f = faces[fi];
                let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                let w = 1.0 - u - v;
                let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
                pts.push([
                    w * a[0] + u * b[0] + v * c[0],
                    w * a[1] + u * b[1] + v * c[1],
                    w * a[2] + u * b[2] + v * c[2],
                ]);
                ids.push(fi);
            }
            Ok((pts, ids))
        })
        .collect();
    let mut lists = Vec::with_capacity(per_mesh.len());
    let mut face_ids = Vec::new();
    for r in per_mesh {
        let (p, ids) = r?;
        lists.push(p);
        face_ids.extend(ids);
    }
    Ok(SurfaceSamples {
        points: PointCloudBatch::new(lists)?,
        face_ids,
    })
}
