//! Mesh regularizers and the silhouette IoU loss, each with its backward.

use crate::batching::MeshBatch;
use crate::error::{Error, Result};
use crate::math::{add_assign3, dot3, scale3, sub3, Vec3};

/// Mean squared length of each mesh's unique undirected edges, averaged over
/// meshes. Meshes without edges contribute 0.
pub fn edge_length_loss(m: &MeshBatch) -> f64 {
    let verts = m.verts_packed();
    let edges = m.edges_packed();
    let b = m.batch_size() as f64;
    (0..m.batch_size())
        .map(|mesh| {
            let e = edges.element(mesh);
            if e.is_empty() {
                return 0.0;
            }
            let s: f64 = e
                .iter()
                .map(|&[a, c]| {
                    let d = sub3(verts[a], verts[c]);
                    dot3(d, d)
                })
                .sum();
            s / e.len() as f64
        })
        .sum::<f64>()
        / b
}

pub fn edge_length_loss_backward(m: &MeshBatch, grad_out: f64) -> Vec<Vec3> {
    let verts = m.verts_packed();
    let edges = m.edges_packed();
    let b = m.batch_size() as f64;
    let mut g = vec![[0.0; 3]; verts.len()];
    for mesh in 0..m.batch_size() {
        let e = edges.element(mesh);
        if e.is_empty() {
            continue;
        }
        let w = 2.0 * grad_out / (b * e.len() as f64);
        for &[a, c] in e {
            let d = scale3(sub3(verts[a], verts[c]), w);
            add_assign3(&mut g[a], d);
            add_assign3(&mut g[c], scale3(d, -1.0));
        }
    }
    g
}

/// Packed neighbor lists derived from unique edges.
fn neighbor_lists(m: &MeshBatch) -> Result<Vec<Vec<usize>>> {
    let nv = m.verts_packed().len();
    let mut nbrs = vec![Vec::new(); nv];
    for &[a, b] in m.edges_packed().data() {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let owner = m.verts_packed_view().item_to_element();
    for (v, n) in nbrs.iter_mut().enumerate() {
        if n.is_empty() {
            let mesh = owner[v];
            return Err(Error::IsolatedVertex {
                mesh,
                vertex: v - m.vert_offsets()[mesh],
            });
        }
        n.sort_unstable();
    }
    Ok(nbrs)
}

fn laplacian_rows(verts: &[Vec3], nbrs: &[Vec<usize>]) -> Vec<Vec3> {
    verts
        .iter()
        .zip(nbrs)
        .map(|(v, n)| {
            let mut mean = [0.0; 3];
            for &u in n {
                add_assign3(&mut mean, verts[u]);
            }
            sub3(scale3(mean, 1.0 / n.len() as f64), *v)
        })
        .collect()
}

/// `‖L·v‖₁` with the uniform Laplacian `L = D⁻¹A − I`, averaged over the
/// vertices of each mesh and then over meshes.
pub fn laplacian_loss(m: &MeshBatch) -> Result<f64> {
    let nbrs = neighbor_lists(m)?;
    let rows = laplacian_rows(m.verts_packed(), &nbrs);
    let offs = m.vert_offsets();
    let total: f64 = (0..m.batch_size())
        .map(|mesh| {
            let s: f64 = rows[offs[mesh]..offs[mesh + 1]]
                .iter()
                .map(|r| r[0].abs() + r[1].abs() + r[2].abs())
                .sum();
            s / (offs[mesh + 1] - offs[mesh]) as f64
        })
        .sum();
    Ok(total / m.batch_size() as f64)
}

pub fn laplacian_loss_backward(m: &MeshBatch, grad_out: f64) -> Result<Vec<Vec3>> {
    let nbrs = neighbor_lists(m)?;
    let verts = m.verts_packed();
    let rows = laplacian_rows(verts, &nbrs);
    let offs = m.vert_offsets();
    let owner = m.verts_packed_view().item_to_element();
    let b = m.batch_size() as f64;
    let mut g = vec![[0.0; 3]; verts.len()];
    for (i, r) in rows.iter().enumerate() {
        let mesh = owner[i];
        let c = grad_out / (b * (offs[mesh + 1] - offs[mesh]) as f64);
        let s = [signum(r[0]) * c, signum(r[1]) * c, signum(r[2]) * c];
        add_assign3(&mut g[i], scale3(s, -1.0));
        let share = scale3(s, 1.0 / nbrs[i].len() as f64);
        for &u in &nbrs[i] {
            add_assign3(&mut g[u], share);
        }
    }
    Ok(g)
}

fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1 − Σ(p·g) / Σ(p + g − p·g)` over pixels; two empty masks give 0.
pub fn silhouette_iou_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    let (i, u) = iou_terms(pred, gt)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - i / u)
}

fn iou_terms(pred: &[f64], gt: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "silhouettes have {} and {} pixels",
            pred.len(),
            gt.len()
        )));
    }
    let mut inter = 0.0;
    let mut union = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        inter += p * g;
        union += p + g - p * g;
    }
    Ok((inter, union))
}

/// Gradient with respect to `pred`.
pub fn silhouette_iou_loss_backward(pred: &[f64], gt: &[f64], grad_out: f64) -> Result<Vec<f64>> {
    let (i, u) = iou_terms(pred, gt)?;
    if u == 0.0 {
        return Ok(vec![0.0; pred.len()]);
    }
    Ok(gt
        .iter()
        .map(|g| -grad_out * (g * u - i * (1.0 - g)) / (u * u))
        .collect())
}
