//! Multi-view silhouette fitting by gradient descent on vertex positions.

use std::fmt::Write as _;
use std::path::Path;

use crate::batching::MeshBatch;
use crate::camera::Camera;
use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    edge_length_loss, edge_length_loss_backward, laplacian_loss, laplacian_loss_backward,
    silhouette_iou_loss, silhouette_iou_loss_backward,
};
use crate::io::save_obj;
use crate::math::{add_assign3, scale3, Vec3};
use crate::raster::{
    rasterize_backward_verts, rasterize_meshes, FragmentCotangents, MeshFragments, RasterSettings,
};
use crate::shading::{covering_slot, silhouette_blend, silhouette_blend_backward};
use crate::templates::ico_sphere;

/// One row of the loss trace. `l_s` is the silhouette loss averaged over
/// views; `total` uses the sum over views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitRecord {
    pub iter: usize,
    pub l_s: f64,
    pub l_l: f64,
    pub l_e: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub mesh: MeshBatch,
    pub trace: Vec<FitRecord>,
    /// Silhouette loss of the returned mesh, averaged over views.
    pub final_l_s: f64,
}

impl FitReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,L_s,L_l,L_e,total\n");
        for r in &self.trace {
            writeln!(s, "{},{},{},{},{}", r.iter, r.l_s, r.l_l, r.l_e, r.total)
                .expect("writing to a String");
        }
        s
    }
}

/// 1 where some face covers the pixel center, 0 elsewhere.
pub fn coverage_mask(frag: &MeshFragments) -> Vec<f64> {
    (0..frag.num_pixels())
        .map(|px| {
            if covering_slot(frag, px).is_some() {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Binary silhouettes of `mesh` from each camera.
pub fn render_masks(
    mesh: &MeshBatch,
    cams: &[Camera],
    raster: &RasterSettings,
) -> Result<Vec<Vec<f64>>> {
    cams.iter()
        .map(|cam| Ok(coverage_mask(&rasterize_meshes(mesh, cam, raster)?)))
        .collect()
}

/// Mean silhouette loss over views and its vertex gradient (of the sum).
pub fn silhouette_loss_and_grad(
    mesh: &MeshBatch,
    cams: &[Camera],
    raster: &RasterSettings,
    sigma: f64,
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<Vec3>)> {
    let mut grad = vec![[0.0; 3]; mesh.verts_packed().len()];
    let mut sum = 0.0;
    for (cam, target) in cams.iter().zip(targets) {
        let frag = rasterize_meshes(mesh, cam, raster)?;
        let alpha = silhouette_blend(&frag, sigma)?;
        sum += silhouette_iou_loss(&alpha, target)?;
        let g_alpha = silhouette_iou_loss_backward(&alpha, target, 1.0)?;
        let mut cot = FragmentCotangents::zeros(&frag);
        cot.dists = silhouette_blend_backward(&frag, sigma, &g_alpha)?;
        for (g, d) in grad
            .iter_mut()
            .zip(rasterize_backward_verts(mesh, cam, raster, &frag, &cot)?)
        {
            add_assign3(g, d);
        }
    }
    Ok((sum / cams.len() as f64, grad))
}

/// Deforms `init` toward the silhouettes in `targets` (one per camera) by
/// `iters` fixed-size gradient steps on
/// `Σ_views L_s + lambda_l·L_l + lambda_e·L_e`.
pub fn fit_silhouettes(
    init: &MeshBatch,
    cams: &[Camera],
    targets: &[Vec<f64>],
    c: &FitConfig,
    mut on_iter: impl FnMut(&FitRecord),
) -> Result<FitReport> {
    if cams.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} cameras for {} targets",
            cams.len(),
            targets.len()
        )));
    }
    let views = cams.len() as f64;
    let mut mesh = init.clone();
    let mut trace = Vec::with_capacity(c.iters);
    for iter in 0..c.iters {
        let (l_s, mut grad) = silhouette_loss_and_grad(&mesh, cams, &c.raster, c.sigma, targets)?;
        let l_l = laplacian_loss(&mesh)?;
        let l_e = edge_length_loss(&mesh);
        let rec = FitRecord {
            iter,
            l_s,
            l_l,
            l_e,
            total: views * l_s + c.lambda_l * l_l + c.lambda_e * l_e,
        };
        if !rec.total.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss diverged at iteration {iter} (L_s={l_s}, L_l={l_l}, L_e={l_e})"
            )));
        }
        on_iter(&rec);
        trace.push(rec);
        if c.lambda_l > 0.0 {
            for (g, d) in grad
                .iter_mut()
                .zip(laplacian_loss_backward(&mesh, c.lambda_l)?)
            {
                add_assign3(g, d);
            }
        }
        if c.lambda_e > 0.0 {
            for (g, d) in grad
                .iter_mut()
                .zip(edge_length_loss_backward(&mesh, c.lambda_e))
            {
                add_assign3(g, d);
            }
        }
        if grad.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient diverged at iteration {iter}"
            )));
        }
        let verts = mesh
            .verts_packed()
            .iter()
            .zip(&grad)
            .map(|(v, g)| {
                let mut v = *v;
                add_assign3(&mut v, scale3(*g, -c.step));
                v
            })
            .collect();
        mesh = mesh.with_verts_packed(verts)?;
    }
    let final_l_s = silhouette_loss_and_grad(&mesh, cams, &c.raster, c.sigma, targets)?.0;
    Ok(FitReport {
        mesh,
        trace,
        final_l_s,
    })
}

/// Renders binary target silhouettes from every view, then fits the template
/// sphere to those silhouettes.
pub fn run_fit(c: &FitConfig, on_iter: impl FnMut(&FitRecord)) -> Result<FitReport> {
    c.validate()?;
    let (target, _) = c.target.load()?;
    let target = target.with_verts_packed(
        target
            .verts_packed()
            .iter()
            .map(|v| scale3(*v, c.target_scale))
            .collect(),
    )?;
    let cams = c.cameras()?;
    let targets = render_masks(&target, &cams, &c.raster)?;
    fit_silhouettes(&ico_sphere(c.template_level)?, &cams, &targets, c, on_iter)
}

/// [`run_fit`], then writes the fitted OBJ and the loss trace.
pub fn run_fit_to_files(c: &FitConfig, on_iter: impl FnMut(&FitRecord)) -> Result<FitReport> {
    let report = run_fit(c, on_iter)?;
    save_obj(&c.output, &report.mesh, 0, None)?;
    write_trace(&c.trace, &report)?;
    Ok(report)
}

pub fn write_trace(path: &Path, report: &FitReport) -> Result<()> {
    std::fs::write(path, report.trace_csv())?;
    Ok(())
}
