//! Shaders and blending over [`MeshFragments`].
//!
//! Per-slot colors are laid out like the fragment buffers (`B × H × W × K`,
//! one `Vec3` per slot). Blenders reduce them to one value per pixel.

mod blend;
mod lighting;

pub use blend::{
    covering_slot, hard_blend, hard_blend_backward, silhouette_blend, silhouette_blend_backward,
    softmax_blend, softmax_blend_backward, softmax_weights, BlendParams, Rgba, SoftmaxGrads,
};
pub use lighting::{
    face_normals, flat_shading, gouraud_shading, phong_shading, shade_fragments,
    shade_fragments_backward, vertex_normals, DirectionalLight, LightGrads, Lighting, ShadingGrads,
};

use crate::batching::MeshBatch;
use crate::error::{Error, Result};
use crate::raster::MeshFragments;

pub(crate) fn check_slots<T>(frag: &MeshFragments, values: &[T], what: &str) -> Result<()> {
    if values.len() != frag.num_slots() {
        return Err(Error::shape(format!(
            "{what} has {} entries, fragments have {} slots",
            values.len(),
            frag.num_slots()
        )));
    }
    Ok(())
}

pub(crate) fn check_pixels<T>(frag: &MeshFragments, values: &[T], what: &str) -> Result<()> {
    if values.len() != frag.num_pixels() {
        return Err(Error::shape(format!(
            "{what} has {} entries, image has {} pixels",
            values.len(),
            frag.num_pixels()
        )));
    }
    Ok(())
}

fn check_faces(m: &MeshBatch, frag: &MeshFragments) -> Result<()> {
    let nf = m.faces_packed().len() as i64;
    if let Some(&f) = frag.pix_to_face.iter().find(|&&f| f >= nf) {
        return Err(Error::IndexOutOfRange {
            context: "fragment face id",
            index: f as usize,
            len: nf as usize,
        });
    }
    Ok(())
}

/// Barycentric interpolation of per-vertex attributes (`V × dim`, aligned
/// with packed verts) into every slot. Empty slots are zero.
pub fn interpolate_face_attributes(
    m: &MeshBatch,
    frag: &MeshFragments,
    attrs: &[f64],
    dim: usize,
) -> Result<Vec<f64>> {
    check_attrs(m, attrs, dim)?;
    check_faces(m, frag)?;
    let faces = m.faces_packed();
    let mut out = vec![0.0; frag.num_slots() * dim];
    if dim == 0 {
        return Ok(out);
    }
    for (s, dst) in out.chunks_mut(dim).enumerate() {
        let f = frag.pix_to_face[s];
        if f < 0 {
            continue;
        }
        let face = faces[f as usize];
        let b = frag.bary[s];
        for (i, &v) in face.iter().enumerate() {
            for (d, a) in dst.iter_mut().zip(&attrs[v * dim..(v + 1) * dim]) {
                *d += b[i] * a;
            }
        }
    }
    Ok(out)
}

/// Returns cotangents for the attributes (`V × dim`) and for every slot's
/// barycentrics.
pub fn interpolate_face_attributes_backward(
    m: &MeshBatch,
    frag: &MeshFragments,
    attrs: &[f64],
    dim: usize,
    grad_out: &[f64],
) -> Result<(Vec<f64>, Vec<[f64; 3]>)> {
    check_attrs(m, attrs, dim)?;
    check_faces(m, frag)?;
    if grad_out.len() != frag.num_slots() * dim {
        return Err(Error::shape(format!(
            "grad_out has {} values, expected {}",
            grad_out.len(),
            frag.num_slots() * dim
        )));
    }
    let faces = m.faces_packed();
    let mut g_attrs = vec![0.0; attrs.len()];
    let mut g_bary = vec![[0.0; 3]; frag.num_slots()];
    for s in 0..frag.num_slots() {
        let f = frag.pix_to_face[s];
        if f < 0 {
            continue;
        }
        let g = &grad_out[s * dim..(s + 1) * dim];
        let b = frag.bary[s];
        for (i, &v) in faces[f as usize].iter().enumerate() {
            let a = &attrs[v * dim..(v + 1) * dim];
            g_bary[s][i] = g.iter().zip(a).map(|(g, a)| g * a).sum();
            for (ga, g) in g_attrs[v * dim..(v + 1) * dim].iter_mut().zip(g) {
                *ga += b[i] * g;
            }
        }
    }
    Ok((g_attrs, g_bary))
}

fn check_attrs(m: &MeshBatch, attrs: &[f64], dim: usize) -> Result<()> {
    let nv = m.verts_packed().len();
    if attrs.len() != nv * dim {
        return Err(Error::shape(format!(
            "attributes have {} values, expected {nv} verts × {dim}",
            attrs.len()
        )));
    }
    Ok(())
}
