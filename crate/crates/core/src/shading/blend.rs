use rayon::prelude::*;

use super::{check_pixels, check_slots};
use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid, Vec3};
use crate::raster::MeshFragments;

pub type Rgba = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendParams {
    /// Opacity falloff scale in squared NDC units.
    pub sigma: f64,
    /// Softmax depth temperature.
    pub gamma: f64,
    pub background_color: Vec3,
}

impl Default for BlendParams {
    fn default() -> Self {
        Self {
            sigma: 1e-4,
            gamma: 1e-4,
            background_color: [1.0; 3],
        }
    }
}

impl BlendParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.background_color.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("background color".into()));
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

/// Soft occupancy per pixel: `1 − Π(1 − σ(−d_k/sigma))` over the slots,
/// with empty slots contributing nothing.
pub fn silhouette_blend(frag: &MeshFragments, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let k = frag.k;
    Ok((0..frag.num_pixels())
        .into_par_iter()
        .map(|px| {
            let mut keep = 1.0;
            for s in px * k..(px + 1) * k {
                if frag.pix_to_face[s] < 0 {
                    continue;
                }
                // 1 − σ(−x) = σ(x)
                keep *= sigmoid(frag.dists[s] / sigma);
            }
            1.0 - keep
        })
        .collect())
}

/// Cotangent of every slot's signed distance.
pub fn silhouette_blend_backward(
    frag: &MeshFragments,
    sigma: f64,
    grad_alpha: &[f64],
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_pixels(frag, grad_alpha, "grad_alpha")?;
    let k = frag.k;
    let mut out = vec![0.0; frag.num_slots()];
    out.par_chunks_mut(k).enumerate().for_each(|(px, g)| {
        let ga = grad_alpha[px];
        if ga == 0.0 {
            return;
        }
        let base = px * k;
        let q: Vec<f64> = (0..k)
            .map(|i| {
                if frag.pix_to_face[base + i] < 0 {
                    1.0
                } else {
                    sigmoid(frag.dists[base + i] / sigma)
                }
            })
            .collect();
        let mut suffix = vec![1.0; k + 1];
        for i in (0..k).rev() {
            suffix[i] = suffix[i + 1] * q[i];
        }
        let mut prefix = 1.0;
        for i in 0..k {
            if frag.pix_to_face[base + i] >= 0 {
                let others = prefix * suffix[i + 1];
                g[i] = -ga * others * q[i] * (1.0 - q[i]) / sigma;
            }
            prefix *= q[i];
        }
    });
    Ok(out)
}

/// Normalized per-slot softmax weights of one pixel, or `None` when no slot
/// is occupied. Computed in log space so that far-away fragments never
/// underflow the whole pixel to zero.
fn pixel_weights(
    frag: &MeshFragments,
    px: usize,
    p: &BlendParams,
    znear: f64,
    zfar: f64,
) -> Option<Vec<f64>> {
    let k = frag.k;
    let base = px * k;
    let occupied = (0..k)
        .take_while(|&i| frag.pix_to_face[base + i] >= 0)
        .count();
    if occupied == 0 {
        return None;
    }
    let zinv = |s: usize| (zfar - frag.zbuf[s].clamp(znear, zfar)) / (zfar - znear);
    let zmax = (base..base + occupied)
        .map(zinv)
        .fold(f64::NEG_INFINITY, f64::max);
    let logw: Vec<f64> = (base..base + occupied)
        .map(|s| log_sigmoid(-frag.dists[s] / p.sigma) + (zinv(s) - zmax) / p.gamma)
        .collect();
    let lmax = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|l| (l - lmax).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Some(w)
}

fn check_depth_range(znear: f64, zfar: f64) -> Result<()> {
    if znear < zfar && znear.is_finite() && zfar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "need znear < zfar, got {znear} and {zfar}"
        )))
    }
}

/// Per-slot softmax weights (zero for empty slots).
pub fn softmax_weights(
    frag: &MeshFragments,
    p: &BlendParams,
    znear: f64,
    zfar: f64,
) -> Result<Vec<f64>> {
    p.validate()?;
    check_depth_range(znear, zfar)?;
    let mut out = vec![0.0; frag.num_slots()];
    out.par_chunks_mut(frag.k)
        .enumerate()
        .for_each(|(px, dst)| {
            if let Some(w) = pixel_weights(frag, px, p, znear, zfar) {
                dst[..w.len()].copy_from_slice(&w);
            }
        });
    Ok(out)
}

/// Depth-aware softmax of slot colors; alpha is the silhouette. Pixels with
/// no occupied slot take the background color.
pub fn softmax_blend(
    frag: &MeshFragments,
    colors: &[Vec3],
    p: &BlendParams,
    znear: f64,
    zfar: f64,
) -> Result<Vec<Rgba>> {
    p.validate()?;
    check_depth_range(znear, zfar)?;
    check_slots(frag, colors, "colors")?;
    let alpha = silhouette_blend(frag, p.sigma)?;
    let k = frag.k;
    Ok((0..frag.num_pixels())
        .into_par_iter()
        .map(|px| {
            let rgb = match pixel_weights(frag, px, p, znear, zfar) {
                None => p.background_color,
                Some(w) => {
                    let mut c = [0.0; 3];
                    for (i, wi) in w.iter().enumerate() {
                        let col = colors[px * k + i];
                        for ch in 0..3 {
                            c[ch] += wi * col[ch];
                        }
                    }
                    c
                }
            };
            [rgb[0], rgb[1], rgb[2], alpha[px]]
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxGrads {
    pub colors: Vec<Vec3>,
    pub zbuf: Vec<f64>,
    pub dists: Vec<f64>,
}

pub fn softmax_blend_backward(
    frag: &MeshFragments,
    colors: &[Vec3],
    p: &BlendParams,
    znear: f64,
    zfar: f64,
    grad: &[Rgba],
) -> Result<SoftmaxGrads> {
    p.validate()?;
    check_depth_range(znear, zfar)?;
    check_slots(frag, colors, "colors")?;
    check_pixels(frag, grad, "grad")?;
    let n = frag.num_slots();
    let k = frag.k;
    let grad_alpha: Vec<f64> = grad.iter().map(|g| g[3]).collect();
    let mut out = SoftmaxGrads {
        colors: vec![[0.0; 3]; n],
        zbuf: vec![0.0; n],
        dists: silhouette_blend_backward(frag, p.sigma, &grad_alpha)?,
    };
    out.colors
        .par_chunks_mut(k)
        .zip(out.zbuf.par_chunks_mut(k))
        .zip(out.dists.par_chunks_mut(k))
        .enumerate()
        .for_each(|(px, ((gc, gz), gd))| {
            let g = [grad[px][0], grad[px][1], grad[px][2]];
            if g == [0.0; 3] {
                return;
            }
            let Some(w) = pixel_weights(frag, px, p, znear, zfar) else {
                return;
            };
            let base = px * k;
            let mut c = [0.0; 3];
            for (i, wi) in w.iter().enumerate() {
                for ch in 0..3 {
                    c[ch] += wi * colors[base + i][ch];
                }
            }
            for (i, wi) in w.iter().enumerate() {
                let s = base + i;
                let col = colors[s];
                gc[i] = [g[0] * wi, g[1] * wi, g[2] * wi];
                let g_log = wi * (0..3).map(|ch| g[ch] * (col[ch] - c[ch])).sum::<f64>();
                // d ln σ(−d/σ) / dd = −σ(d/σ)/σ
                gd[i] -= g_log * sigmoid(frag.dists[s] / p.sigma) / p.sigma;
                let z = frag.zbuf[s];
                if z >= znear && z <= zfar {
                    gz[i] = -g_log / (p.gamma * (zfar - znear));
                }
            }
        });
    Ok(out)
}

/// The nearest slot whose face covers the pixel center. Slots kept only
/// through the blur radius are skipped.
pub fn covering_slot(frag: &MeshFragments, px: usize) -> Option<usize> {
    (px * frag.k..(px + 1) * frag.k).find(|&s| frag.pix_to_face[s] >= 0 && frag.dists[s] < 0.0)
}

/// The covering slot's color ([`covering_slot`]), background elsewhere.
pub fn hard_blend(frag: &MeshFragments, colors: &[Vec3], background: Vec3) -> Result<Vec<Vec3>> {
    check_slots(frag, colors, "colors")?;
    Ok((0..frag.num_pixels())
        .into_par_iter()
        .map(|px| covering_slot(frag, px).map_or(background, |s| colors[s]))
        .collect())
}

/// Color cotangents for [`hard_blend`]; only winning slots receive any.
pub fn hard_blend_backward(frag: &MeshFragments, grad: &[Vec3]) -> Result<Vec<Vec3>> {
    check_pixels(frag, grad, "grad")?;
    let mut out = vec![[0.0; 3]; frag.num_slots()];
    for (px, g) in grad.iter().enumerate() {
        if let Some(s) = covering_slot(frag, px) {
            out[s] = *g;
        }
    }
    Ok(out)
}
