//! Symmetric Chamfer distance between batches of point clouds.
//!
//! For each element, `|P|⁻¹ Σ_p ‖p − nn_Q(p)‖² + |Q|⁻¹ Σ_q ‖q − nn_P(q)‖²`,
//! computed from two `K = 1` nearest-neighbor searches. The batch value is the
//! mean over elements.

use crate::batching::PointCloudBatch;
use crate::error::{Error, Result};
use crate::geometry::knn::{knn_points, KnnResult};
use crate::math::{add_assign3, scale3, sub3, Vec3};

/// Forward result, retaining the nearest-neighbor assignments for backward.
#[derive(Clone, Debug)]
pub struct ChamferForward {
    pub value: f64,
    pub per_element: Vec<f64>,
    pub p_to_q: KnnResult,
    pub q_to_p: KnnResult,
}

fn check_inputs(p: &PointCloudBatch, q: &PointCloudBatch) -> Result<()> {
    if p.batch_size() != q.batch_size() {
        return Err(Error::shape(format!(
            "chamfer batch sizes differ: {} vs {}",
            p.batch_size(),
            q.batch_size()
        )));
    }
    for (e, (np, nq)) in p
        .num_points_per_cloud()
        .into_iter()
        .zip(q.num_points_per_cloud())
        .enumerate()
    {
        if np == 0 || nq == 0 {
            return Err(Error::EmptyInput(format!("chamfer: cloud {e} is empty")));
        }
    }
    Ok(())
}

pub fn chamfer_forward(p: &PointCloudBatch, q: &PointCloudBatch) -> Result<ChamferForward> {
    check_inputs(p, q)?;
    let p_to_q = knn_points(p, q, 1)?;
    let q_to_p = knn_points(q, p, 1)?;
    let po = p.cloud_offsets();
    let qo = q.cloud_offsets();
    let per_element: Vec<f64> = (0..p.batch_size())
        .map(|e| {
            let a: f64 = p_to_q.dists[po[e]..po[e + 1]].iter().sum();
            let b: f64 = q_to_p.dists[qo[e]..qo[e + 1]].iter().sum();
            a / (po[e + 1] - po[e]) as f64 + b / (qo[e + 1] - qo[e]) as f64
        })
        .collect();
    let value = per_element.iter().sum::<f64>() / per_element.len() as f64;
    Ok(ChamferForward {
        value,
        per_element,
        p_to_q,
        q_to_p,
    })
}

pub fn chamfer_distance(p: &PointCloudBatch, q: &PointCloudBatch) -> Result<f64> {
    Ok(chamfer_forward(p, q)?.value)
}

/// Gradients of `grad_out · chamfer` with respect to the packed points of
/// `p` and `q`. Nearest-neighbor assignments are held fixed.
pub fn chamfer_backward(
    p: &PointCloudBatch,
    q: &PointCloudBatch,
    fwd: &ChamferForward,
    grad_out: f64,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let pp = p.points_packed();
    let qp = q.points_packed();
    let po = p.cloud_offsets();
    let qo = q.cloud_offsets();
    let b = p.batch_size() as f64;
    let mut gp = vec![[0.0; 3]; pp.len()];
    let mut gq = vec![[0.0; 3]; qp.len()];
    for e in 0..p.batch_size() {
        let wp = 2.0 * grad_out / (b * (po[e + 1] - po[e]) as f64);
        for i in po[e]..po[e + 1] {
            let j = qo[e] + fwd.p_to_q.idx[i] as usize;
            let d = scale3(sub3(pp[i], qp[j]), wp);
            add_assign3(&mut gp[i], d);
            add_assign3(&mut gq[j], scale3(d, -1.0));
        }
        let wq = 2.0 * grad_out / (b * (qo[e + 1] - qo[e]) as f64);
        for j in qo[e]..qo[e + 1] {
            let i = po[e] + fwd.q_to_p.idx[j] as usize;
            let d = scale3(sub3(qp[j], pp[i]), wq);
            add_assign3(&mut gq[j], d);
            add_assign3(&mut gp[i], scale3(d, -1.0));
        }
    }
    (gp, gq)
}
