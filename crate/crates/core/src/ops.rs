//! [`DifferentiableOp`] adapters for the library's differentiable
//! operators, and the finite-difference suite that checks them.
//!
//! Every adapter works on flat `f64` buffers; 3-vectors are stored as
//! consecutive triples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::batching::{MeshBatch, PointCloudBatch};
use crate::camera::{Camera, Projection};
use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_backward, chamfer_forward, edge_length_loss, edge_length_loss_backward, graph_conv,
    graph_conv_backward, laplacian_loss, laplacian_loss_backward, silhouette_iou_loss,
    silhouette_iou_loss_backward, ChamferForward, GraphConvWeights,
};
use crate::grad::{fd_check, DifferentiableOp, FdOptions, FdReport, Forward, Quantity};
use crate::math::{sub3, Vec3};
use crate::points::{
    composite, composite_backward, rasterize_points, splat_opacity, splat_opacity_backward,
    CompositeOutput, Compositor, PointFragments, PointRasterSettings,
};
use crate::raster::{
    fragment_regimes, rasterize_backward_verts, rasterize_meshes, FragmentCotangents,
    MeshFragments, RasterSettings,
};
use crate::shading::{
    interpolate_face_attributes, interpolate_face_attributes_backward, shade_fragments,
    shade_fragments_backward, silhouette_blend, silhouette_blend_backward, softmax_blend,
    softmax_blend_backward, BlendParams, DirectionalLight, Lighting,
};
use crate::templates::ico_sphere;

/// Relative error accepted by [`run_gradcheck`].
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

pub fn to_vec3(flat: &[f64]) -> Result<Vec<Vec3>> {
    if !flat.len().is_multiple_of(3) {
        return Err(Error::shape(format!(
            "{} values do not form 3-vectors",
            flat.len()
        )));
    }
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

pub fn flatten3(v: &[Vec3]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::shape(format!(
            "{name}: expected {want} values, got {got}"
        )));
    }
    Ok(())
}

fn scalar_cotangent(name: &str, cot: &[f64]) -> Result<f64> {
    check_len(name, cot.len(), 1)?;
    Ok(cot[0])
}

/// Chamfer distance over `P ++ Q` (packed, flattened).
pub struct ChamferOp {
    pub p_lengths: Vec<usize>,
    pub q_lengths: Vec<usize>,
}

impl ChamferOp {
    fn clouds(&self, input: &[f64]) -> Result<(PointCloudBatch, PointCloudBatch)> {
        let np: usize = self.p_lengths.iter().sum();
        check_len(
            "chamfer",
            input.len(),
            3 * (np + self.q_lengths.iter().sum::<usize>()),
        )?;
        let p = PointCloudBatch::from_packed(to_vec3(&input[..3 * np])?, &self.p_lengths)?;
        let q = PointCloudBatch::from_packed(to_vec3(&input[3 * np..])?, &self.q_lengths)?;
        Ok((p, q))
    }
}

impl DifferentiableOp for ChamferOp {
    fn name(&self) -> &str {
        "chamfer"
    }

    fn output_len(&self) -> Option<usize> {
        Some(1)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let (p, q) = self.clouds(input)?;
        let fwd = chamfer_forward(&p, &q)?;
        Ok(Forward::new(vec![fwd.value], fwd))
    }

    fn backward(&self, input: &[f64], fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let g = scalar_cotangent("chamfer", cot)?;
        let (p, q) = self.clouds(input)?;
        let (gp, gq) = chamfer_backward(&p, &q, fwd.residual::<ChamferForward>()?, g);
        let mut out = flatten3(&gp);
        out.extend(flatten3(&gq));
        Ok(out)
    }

    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let (p, q) = self.clouds(input)?;
        let f = chamfer_forward(&p, &q)?;
        Ok(Some(
            f.p_to_q.idx.iter().chain(&f.q_to_p.idx).copied().collect(),
        ))
    }
}

/// Graph convolution over `features ++ W0 ++ W1 ++ bias`.
pub struct GraphConvOp {
    pub num_verts: usize,
    pub edges: Vec<[usize; 2]>,
    pub d_in: usize,
    pub d_out: usize,
}

impl GraphConvOp {
    fn split(&self, input: &[f64]) -> Result<(Vec<f64>, GraphConvWeights)> {
        let nf = self.num_verts * self.d_in;
        let nw = self.d_in * self.d_out;
        check_len("graph_conv", input.len(), nf + 2 * nw + self.d_out)?;
        let w = GraphConvWeights::new(
            self.d_in,
            self.d_out,
            input[nf..nf + nw].to_vec(),
            input[nf + nw..nf + 2 * nw].to_vec(),
            Some(input[nf + 2 * nw..].to_vec()),
        )?;
        Ok((input[..nf].to_vec(), w))
    }
}

impl DifferentiableOp for GraphConvOp {
    fn name(&self) -> &str {
        "graph_conv"
    }

    fn input_len(&self) -> Option<usize> {
        Some(self.num_verts * self.d_in + 2 * self.d_in * self.d_out + self.d_out)
    }

    fn output_len(&self) -> Option<usize> {
        Some(self.num_verts * self.d_out)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let (f, w) = self.split(input)?;
        Ok(Forward::without_residual(graph_conv(
            &f,
            self.num_verts,
            &self.edges,
            &w,
        )?))
    }

    fn backward(&self, input: &[f64], _fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let (f, w) = self.split(input)?;
        let g = graph_conv_backward(&f, self.num_verts, &self.edges, &w, cot)?;
        let mut out = g.features;
        out.extend(g.w0);
        out.extend(g.w1);
        out.extend(g.bias.unwrap_or_default());
        Ok(out)
    }
}

/// Uniform Laplacian smoothing loss over packed vertex positions.
pub struct LaplacianOp {
    pub mesh: MeshBatch,
}

impl DifferentiableOp for LaplacianOp {
    fn name(&self) -> &str {
        "laplacian_loss"
    }

    fn input_len(&self) -> Option<usize> {
        Some(3 * self.mesh.verts_packed().len())
    }

    fn output_len(&self) -> Option<usize> {
        Some(1)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        Ok(Forward::without_residual(vec![laplacian_loss(&m)?]))
    }

    fn backward(&self, input: &[f64], _fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        Ok(flatten3(&laplacian_loss_backward(
            &m,
            scalar_cotangent("laplacian_loss", cot)?,
        )?))
    }

    /// Signs of the Laplacian coordinates, where the L1 norm has kinks.
    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let verts = to_vec3(input)?;
        let m = self.mesh.with_verts_packed(verts.clone())?;
        let mut sum = vec![[0.0; 3]; verts.len()];
        let mut deg = vec![0usize; verts.len()];
        for &[a, b] in m.edges_packed().data() {
            for (u, v) in [(a, b), (b, a)] {
                for c in 0..3 {
                    sum[u][c] += verts[v][c];
                }
                deg[u] += 1;
            }
        }
        Ok(Some(
            (0..verts.len())
                .flat_map(|i| {
                    let d = deg[i].max(1) as f64;
                    let l = sub3(sum[i].map(|s| s / d), verts[i]);
                    l.map(|x| x.signum() as i64)
                })
                .collect(),
        ))
    }
}

/// Mean squared edge length over packed vertex positions.
pub struct EdgeLossOp {
    pub mesh: MeshBatch,
}

impl DifferentiableOp for EdgeLossOp {
    fn name(&self) -> &str {
        "edge_loss"
    }

    fn input_len(&self) -> Option<usize> {
        Some(3 * self.mesh.verts_packed().len())
    }

    fn output_len(&self) -> Option<usize> {
        Some(1)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        Ok(Forward::without_residual(vec![edge_length_loss(&m)]))
    }

    fn backward(&self, input: &[f64], _fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        Ok(flatten3(&edge_length_loss_backward(
            &m,
            scalar_cotangent("edge_loss", cot)?,
        )))
    }
}

/// Soft IoU loss of a predicted silhouette against a fixed target.
pub struct IouLossOp {
    pub target: Vec<f64>,
}

impl DifferentiableOp for IouLossOp {
    fn name(&self) -> &str {
        "silhouette_iou_loss"
    }

    fn input_len(&self) -> Option<usize> {
        Some(self.target.len())
    }

    fn output_len(&self) -> Option<usize> {
        Some(1)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        Ok(Forward::without_residual(vec![silhouette_iou_loss(
            input,
            &self.target,
        )?]))
    }

    fn backward(&self, input: &[f64], _fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        silhouette_iou_loss_backward(
            input,
            &self.target,
            scalar_cotangent("silhouette_iou_loss", cot)?,
        )
    }
}

/// Rasterize packed vertex positions, then blend the soft silhouette.
pub struct SilhouetteRenderOp {
    pub mesh: MeshBatch,
    pub camera: Camera,
    pub raster: RasterSettings,
    pub sigma: f64,
}

impl SilhouetteRenderOp {
    fn image_len(&self) -> usize {
        self.mesh.batch_size() * self.raster.image_size.0 * self.raster.image_size.1
    }
}

impl DifferentiableOp for SilhouetteRenderOp {
    fn name(&self) -> &str {
        "silhouette_blend∘rasterize"
    }

    fn input_len(&self) -> Option<usize> {
        Some(3 * self.mesh.verts_packed().len())
    }

    fn output_len(&self) -> Option<usize> {
        Some(self.image_len())
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        let frag = rasterize_meshes(&m, &self.camera, &self.raster)?;
        let alpha = silhouette_blend(&frag, self.sigma)?;
        Ok(Forward::new(alpha, (m, frag)))
    }

    fn backward(&self, _input: &[f64], fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let (m, frag) = fwd.residual::<(MeshBatch, MeshFragments)>()?;
        let mut fc = FragmentCotangents::zeros(frag);
        fc.dists = silhouette_blend_backward(frag, self.sigma, cot)?;
        Ok(flatten3(&rasterize_backward_verts(
            m,
            &self.camera,
            &self.raster,
            frag,
            &fc,
        )?))
    }

    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        let frag = rasterize_meshes(&m, &self.camera, &self.raster)?;
        Ok(Some(fragment_regimes(&m, &self.camera, &frag)))
    }
}

/// Rasterize packed vertex positions, interpolate fixed vertex colors and
/// softmax-blend to RGBA.
pub struct SoftmaxRenderOp {
    pub mesh: MeshBatch,
    pub camera: Camera,
    pub raster: RasterSettings,
    pub blend: BlendParams,
    /// Flattened per-vertex RGB.
    pub colors: Vec<f64>,
}

impl DifferentiableOp for SoftmaxRenderOp {
    fn name(&self) -> &str {
        "softmax_blend∘rasterize"
    }

    fn input_len(&self) -> Option<usize> {
        Some(3 * self.mesh.verts_packed().len())
    }

    fn output_len(&self) -> Option<usize> {
        Some(4 * self.mesh.batch_size() * self.raster.image_size.0 * self.raster.image_size.1)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        let frag = rasterize_meshes(&m, &self.camera, &self.raster)?;
        let slot_colors = to_vec3(&interpolate_face_attributes(&m, &frag, &self.colors, 3)?)?;
        let rgba = softmax_blend(
            &frag,
            &slot_colors,
            &self.blend,
            self.camera.znear(),
            self.camera.zfar(),
        )?;
        Ok(Forward::new(
            rgba.iter().flatten().copied().collect(),
            (m, frag, slot_colors),
        ))
    }

    fn backward(&self, _input: &[f64], fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let (m, frag, slot_colors) = fwd.residual::<(MeshBatch, MeshFragments, Vec<Vec3>)>()?;
        check_len(self.name(), cot.len(), 4 * frag.num_pixels())?;
        let g: Vec<[f64; 4]> = cot
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        let sg = softmax_blend_backward(
            frag,
            slot_colors,
            &self.blend,
            self.camera.znear(),
            self.camera.zfar(),
            &g,
        )?;
        let (_, g_bary) =
            interpolate_face_attributes_backward(m, frag, &self.colors, 3, &flatten3(&sg.colors))?;
        let fc = FragmentCotangents {
            zbuf: sg.zbuf,
            bary: g_bary,
            dists: sg.dists,
        };
        Ok(flatten3(&rasterize_backward_verts(
            m,
            &self.camera,
            &self.raster,
            frag,
            &fc,
        )?))
    }

    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let m = self.mesh.with_verts_packed(to_vec3(input)?)?;
        let frag = rasterize_meshes(&m, &self.camera, &self.raster)?;
        Ok(Some(fragment_regimes(&m, &self.camera, &frag)))
    }
}

/// Lighting on fixed fragments, differentiated in `vertex colors ++ light
/// intensities (ambient, diffuse, specular)` and softmax-blended to RGBA.
pub struct ShadeOp {
    pub mode: Lighting,
    pub mesh: MeshBatch,
    pub fragments: MeshFragments,
    pub camera: Camera,
    /// Direction and shininess are fixed; intensities come from the input.
    pub light: DirectionalLight,
    pub blend: BlendParams,
}

impl ShadeOp {
    fn split(&self, input: &[f64]) -> Result<(Vec<Vec3>, DirectionalLight)> {
        let nv = self.mesh.verts_packed().len();
        check_len("shade", input.len(), 3 * nv + 9)?;
        let l = &input[3 * nv..];
        let light = DirectionalLight {
            ambient: [l[0], l[1], l[2]],
            diffuse: [l[3], l[4], l[5]],
            specular: [l[6], l[7], l[8]],
            ..self.light
        };
        Ok((to_vec3(&input[..3 * nv])?, light))
    }
}

impl DifferentiableOp for ShadeOp {
    fn name(&self) -> &str {
        match self.mode {
            Lighting::Flat => "flat_shading",
            Lighting::Gouraud => "gouraud_shading",
            Lighting::Phong => "phong_shading",
        }
    }

    fn input_len(&self) -> Option<usize> {
        Some(3 * self.mesh.verts_packed().len() + 9)
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let (colors, light) = self.split(input)?;
        let lit = shade_fragments(
            self.mode,
            &self.mesh,
            &self.fragments,
            &self.camera,
            &light,
            &colors,
        )?;
        let rgba = softmax_blend(
            &self.fragments,
            &lit,
            &self.blend,
            self.camera.znear(),
            self.camera.zfar(),
        )?;
        Ok(Forward::new(rgba.iter().flatten().copied().collect(), lit))
    }

    fn backward(&self, input: &[f64], fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let (colors, light) = self.split(input)?;
        let lit = fwd.residual::<Vec<Vec3>>()?;
        check_len(self.name(), cot.len(), 4 * self.fragments.num_pixels())?;
        let g: Vec<[f64; 4]> = cot
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        let (zn, zf) = (self.camera.znear(), self.camera.zfar());
        let sg = softmax_blend_backward(&self.fragments, lit, &self.blend, zn, zf, &g)?;
        let shg = shade_fragments_backward(
            self.mode,
            &self.mesh,
            &self.fragments,
            &self.camera,
            &light,
            &colors,
            &sg.colors,
        )?;
        let mut out = flatten3(&shg.colors);
        out.extend(shg.light.to_vec());
        Ok(out)
    }
}

/// Splat packed point positions, composite per-point features:
/// input `points ++ features`.
pub struct PointRenderOp {
    pub lengths: Vec<usize>,
    pub dim: usize,
    pub camera: Camera,
    pub raster: PointRasterSettings,
    pub compositor: Compositor,
    pub background: Vec<f64>,
}

impl PointRenderOp {
    fn split<'a>(&self, input: &'a [f64]) -> Result<(PointCloudBatch, &'a [f64])> {
        let n: usize = self.lengths.iter().sum();
        check_len(self.name(), input.len(), n * (3 + self.dim))?;
        let pc = PointCloudBatch::from_packed(to_vec3(&input[..3 * n])?, &self.lengths)?;
        Ok((pc, &input[3 * n..]))
    }
}

impl DifferentiableOp for PointRenderOp {
    fn name(&self) -> &str {
        match self.compositor {
            Compositor::Alpha => "alpha_composite∘rasterize_points",
            Compositor::Norm => "norm_composite∘rasterize_points",
        }
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let (pc, feats) = self.split(input)?;
        let frag = rasterize_points(&pc, &self.camera, &self.raster)?;
        let alphas = splat_opacity(&frag, self.raster.radius);
        let out = composite(
            self.compositor,
            &frag,
            &alphas,
            feats,
            self.dim,
            &self.background,
        )?;
        Ok(Forward::new(out.image.clone(), (pc, frag, alphas, out)))
    }

    fn backward(&self, input: &[f64], fwd: &Forward, cot: &[f64]) -> Result<Vec<f64>> {
        let (_, feats) = self.split(input)?;
        let (pc, frag, alphas, out) =
            fwd.residual::<(PointCloudBatch, PointFragments, Vec<f64>, CompositeOutput)>()?;
        let g = composite_backward(self.compositor, frag, alphas, feats, out, cot)?;
        let ga = g.get(Quantity::Alphas).unwrap_or_default();
        let gp = splat_opacity_backward(pc, &self.camera, &self.raster, frag, ga)?;
        let mut res = flatten3(&gp);
        res.extend_from_slice(g.get(Quantity::Features).unwrap_or_default());
        Ok(res)
    }

    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let (pc, _) = self.split(input)?;
        Ok(Some(rasterize_points(&pc, &self.camera, &self.raster)?.idx))
    }
}

/// A registered op with the input it is checked at.
pub struct GradCase {
    pub op: Box<dyn DifferentiableOp>,
    pub input: Vec<f64>,
}

fn jittered_sphere(rng: &mut ChaCha8Rng, level: usize, amount: f64) -> Result<MeshBatch> {
    let m = ico_sphere(level)?;
    let verts = m
        .verts_packed()
        .iter()
        .map(|v| v.map(|c| c * (1.0 + amount * rng.gen_range(-1.0..1.0))))
        .collect();
    m.with_verts_packed(verts)
}

fn suite_camera(eye: Vec3) -> Result<Camera> {
    Camera::look_at(
        eye,
        [0.0; 3],
        [0.0, 1.0, 0.0],
        Projection::Perspective {
            focal_length: 1.8,
            principal_point: [0.0, 0.0],
        },
        0.5,
        10.0,
    )
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| [0; 3].map(|_| rng.gen_range(-scale..scale)))
        .collect()
}

/// The standard gradient-check configurations: every differentiable op of
/// the library at a small randomized input.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();

    let (p_lengths, q_lengths) = (vec![24, 17], vec![19, 30]);
    let mut input = flatten3(&random_cloud(&mut rng, 41, 1.0));
    input.extend(flatten3(&random_cloud(&mut rng, 49, 1.0)));
    cases.push(GradCase {
        op: Box::new(ChamferOp {
            p_lengths,
            q_lengths,
        }),
        input,
    });

    let num_verts = 14;
    let mut edges: Vec<[usize; 2]> = (0..num_verts - 1).map(|i| [i, i + 1]).collect();
    for _ in 0..10 {
        let a = rng.gen_range(0..num_verts);
        let b = rng.gen_range(0..num_verts);
        if a != b {
            edges.push([a.min(b), a.max(b)]);
        }
    }
    let op = GraphConvOp {
        num_verts,
        edges,
        d_in: 3,
        d_out: 4,
    };
    let input = (0..op.input_len().unwrap_or(0))
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    cases.push(GradCase {
        op: Box::new(op),
        input,
    });

    let mesh = jittered_sphere(&mut rng, 0, 0.1)?;
    let input = flatten3(mesh.verts_packed());
    cases.push(GradCase {
        op: Box::new(LaplacianOp { mesh: mesh.clone() }),
        input: input.clone(),
    });
    cases.push(GradCase {
        op: Box::new(EdgeLossOp { mesh }),
        input,
    });

    let target: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let input = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
    cases.push(GradCase {
        op: Box::new(IouLossOp { target }),
        input,
    });

    let camera = suite_camera([0.4, 0.3, -3.0])?;
    let mesh = jittered_sphere(&mut rng, 0, 0.08)?;
    let input = flatten3(mesh.verts_packed());
    let raster = RasterSettings {
        image_size: (20, 20),
        faces_per_pixel: 4,
        blur_radius: 2e-3,
        tile_size: 8,
    };
    cases.push(GradCase {
        op: Box::new(SilhouetteRenderOp {
            mesh: mesh.clone(),
            camera,
            raster,
            sigma: 5e-4,
        }),
        input: input.clone(),
    });
    let colors = (0..3 * mesh.verts_packed().len())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    cases.push(GradCase {
        op: Box::new(SoftmaxRenderOp {
            mesh: mesh.clone(),
            camera,
            raster,
            blend: BlendParams {
                sigma: 1e-3,
                gamma: 0.05,
                background_color: [1.0; 3],
            },
            colors,
        }),
        input,
    });

    let fragments = rasterize_meshes(&mesh, &camera, &raster)?;
    let light = DirectionalLight {
        direction: crate::math::normalize3([0.3, 0.5, -1.0]).unwrap_or([0.0, 0.0, -1.0]),
        shininess: 5.0,
        ..DirectionalLight::default()
    };
    for mode in [Lighting::Flat, Lighting::Gouraud, Lighting::Phong] {
        let mut input: Vec<f64> = (0..3 * mesh.verts_packed().len())
            .map(|_| rng.gen_range(0.1..1.0))
            .collect();
        input.extend([0.2, 0.25, 0.3, 0.6, 0.5, 0.7, 0.3, 0.2, 0.4]);
        cases.push(GradCase {
            op: Box::new(ShadeOp {
                mode,
                mesh: mesh.clone(),
                fragments: fragments.clone(),
                camera,
                light,
                blend: BlendParams {
                    sigma: 5e-4,
                    gamma: 0.02,
                    background_color: [0.0; 3],
                },
            }),
            input,
        });
    }

    let lengths = vec![40, 25];
    let dim = 3;
    let pcam = suite_camera([0.0, 0.0, -3.0])?;
    for compositor in [Compositor::Alpha, Compositor::Norm] {
        let mut input = flatten3(&random_cloud(&mut rng, 65, 0.6));
        input.extend((0..65 * dim).map(|_| rng.gen_range(0.0..1.0)));
        cases.push(GradCase {
            op: Box::new(PointRenderOp {
                lengths: lengths.clone(),
                dim,
                camera: pcam,
                raster: PointRasterSettings {
                    image_size: (16, 16),
                    points_per_pixel: 6,
                    radius: 0.2,
                    tile_size: 8,
                },
                compositor,
                background: vec![0.0; dim],
            }),
            input,
        });
    }
    Ok(cases)
}

#[derive(Clone, Debug)]
pub struct GradcheckOutcome {
    pub report: FdReport,
    pub passed: bool,
}

/// Runs [`fd_check`] on every case. A case passes when its worst relative
/// error is at most `tolerance` and at least one direction was stable.
pub fn run_gradcheck(
    cases: &[GradCase],
    opts: FdOptions,
    tolerance: f64,
) -> Result<Vec<GradcheckOutcome>> {
    cases
        .par_iter()
        .map(|c| {
            let report = fd_check(c.op.as_ref(), &c.input, opts)?;
            let passed = report.directions > 0 && report.max_rel_error <= tolerance;
            Ok(GradcheckOutcome { report, passed })
        })
        .collect()
}
