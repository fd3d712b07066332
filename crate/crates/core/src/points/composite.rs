use rayon::prelude::*;

use super::PointFragments;
use crate::error::{Error, Result};
use crate::grad::{GradBuffer, Quantity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compositor {
    /// Front to back with transmittance.
    Alpha,
    /// Opacity-weighted mean, order independent.
    Norm,
}

impl std::str::FromStr for Compositor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "norm" => Ok(Self::Norm),
            _ => Err(Error::Usage(format!(
                "unknown compositor `{s}` (alpha, norm)"
            ))),
        }
    }
}

/// Composited image (`B × H × W × dim`) tagged with the compositor that
/// produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeOutput {
    pub compositor: Compositor,
    pub dim: usize,
    pub image: Vec<f64>,
}

fn check(
    frag: &PointFragments,
    alphas: &[f64],
    features: &[f64],
    dim: usize,
    background: &[f64],
) -> Result<()> {
    if alphas.len() != frag.num_slots() {
        return Err(Error::shape(format!(
            "{} alphas for {} slots",
            alphas.len(),
            frag.num_slots()
        )));
    }
    if dim == 0 || !features.len().is_multiple_of(dim) {
        return Err(Error::shape(format!(
            "{} feature values do not split into rows of {dim}",
            features.len()
        )));
    }
    if background.len() != dim {
        return Err(Error::shape(format!(
            "background has {} values, features have {dim}",
            background.len()
        )));
    }
    let n = (features.len() / dim) as i64;
    if let Some(&i) = frag.idx.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            context: "point fragment index",
            index: i as usize,
            len: n as usize,
        });
    }
    Ok(())
}

fn occupied(frag: &PointFragments, px: usize) -> usize {
    let base = px * frag.k;
    (0..frag.k).take_while(|&i| frag.idx[base + i] >= 0).count()
}

/// `Σ αᵢ Πⱼ<ᵢ(1 − αⱼ) fᵢ` over occupied slots in depth order. `features` are
/// per packed point. Pixels without any slot take `background`.
pub fn alpha_composite(
    frag: &PointFragments,
    alphas: &[f64],
    features: &[f64],
    dim: usize,
    background: &[f64],
) -> Result<Vec<f64>> {
    check(frag, alphas, features, dim, background)?;
    let mut out = vec![0.0; frag.num_pixels() * dim];
    out.par_chunks_mut(dim).enumerate().for_each(|(px, dst)| {
        let n = occupied(frag, px);
        if n == 0 {
            dst.copy_from_slice(background);
            return;
        }
        let slots = px * frag.k..px * frag.k + n;
        let mut trans = 1.0;
        for (&i, &a) in frag.idx[slots.clone()].iter().zip(&alphas[slots]) {
            let w = a * trans;
            let i = i as usize;
            for (d, f) in dst.iter_mut().zip(&features[i * dim..(i + 1) * dim]) {
                *d += w * f;
            }
            trans *= 1.0 - a;
        }
    });
    Ok(out)
}

/// `Σ αᵢ fᵢ / Σ αᵢ` over occupied slots. Pixels with no slot or zero total
/// opacity take `background`.
pub fn norm_composite(
    frag: &PointFragments,
    alphas: &[f64],
    features: &[f64],
    dim: usize,
    background: &[f64],
) -> Result<Vec<f64>> {
    check(frag, alphas, features, dim, background)?;
    let mut out = vec![0.0; frag.num_pixels() * dim];
    out.par_chunks_mut(dim).enumerate().for_each(|(px, dst)| {
        let n = occupied(frag, px);
        let slots = px * frag.k..px * frag.k + n;
        let mut total = 0.0;
        for (&i, &a) in frag.idx[slots.clone()].iter().zip(&alphas[slots]) {
            total += a;
            let i = i as usize;
            for (d, f) in dst.iter_mut().zip(&features[i * dim..(i + 1) * dim]) {
                *d += a * f;
            }
        }
        if total == 0.0 {
            dst.copy_from_slice(background);
        } else {
            for d in dst.iter_mut() {
                *d /= total;
            }
        }
    });
    Ok(out)
}

pub fn composite(
    compositor: Compositor,
    frag: &PointFragments,
    alphas: &[f64],
    features: &[f64],
    dim: usize,
    background: &[f64],
) -> Result<CompositeOutput> {
    let image = match compositor {
        Compositor::Alpha => alpha_composite(frag, alphas, features, dim, background)?,
        Compositor::Norm => norm_composite(frag, alphas, features, dim, background)?,
    };
    Ok(CompositeOutput {
        compositor,
        dim,
        image,
    })
}

/// Cotangents for per-slot opacities ([`Quantity::Alphas`]) and per-point
/// features ([`Quantity::Features`]). `forward` must come from the same
/// compositor.
pub fn composite_backward(
    compositor: Compositor,
    frag: &PointFragments,
    alphas: &[f64],
    features: &[f64],
    forward: &CompositeOutput,
    d_out: &[f64],
) -> Result<GradBuffer> {
    if forward.compositor != compositor {
        return Err(Error::Usage(format!(
            "backward for {compositor:?} compositing given a {:?} forward",
            forward.compositor
        )));
    }
    let dim = forward.dim;
    if d_out.len() != frag.num_pixels() * dim || forward.image.len() != d_out.len() {
        return Err(Error::shape(format!(
            "output cotangent has {} values, expected {}",
            d_out.len(),
            frag.num_pixels() * dim
        )));
    }
    let k = frag.k;
    let mut g_alpha = vec![0.0; frag.num_slots()];
    let per_pixel = |px: usize, ga: &mut [f64]| -> Vec<(usize, f64)> {
        let n = occupied(frag, px);
        let g = &d_out[px * dim..(px + 1) * dim];
        let base = px * k;
        let feat = |s: usize| {
            let i = frag.idx[s] as usize;
            &features[i * dim..(i + 1) * dim]
        };
        let dot = |s: usize| feat(s).iter().zip(g).map(|(f, g)| f * g).sum::<f64>();
        let mut scatter = Vec::with_capacity(n);
        match compositor {
            Compositor::Alpha => {
                // suffix composite R_i = α_i c_i + (1 − α_i) R_{i+1}
                let mut suffix = vec![0.0; n + 1];
                for i in (0..n).rev() {
                    let a = alphas[base + i];
                    suffix[i] = a * dot(base + i) + (1.0 - a) * suffix[i + 1];
                }
                let mut trans = 1.0;
                for i in 0..n {
                    let s = base + i;
                    ga[i] = trans * (dot(s) - suffix[i + 1]);
                    scatter.push((frag.idx[s] as usize, alphas[s] * trans));
                    trans *= 1.0 - alphas[s];
                }
            }
            Compositor::Norm => {
                let total: f64 = (base..base + n).map(|s| alphas[s]).sum();
                if total == 0.0 {
                    return scatter;
                }
                let out = &forward.image[px * dim..(px + 1) * dim];
                let og: f64 = out.iter().zip(g).map(|(o, g)| o * g).sum();
                for i in 0..n {
                    let s = base + i;
                    ga[i] = (dot(s) - og) / total;
                    scatter.push((frag.idx[s] as usize, alphas[s] / total));
                }
            }
        }
        scatter
    };
    let scatters: Vec<Vec<(usize, f64)>> = g_alpha
        .par_chunks_mut(k)
        .enumerate()
        .map(|(px, ga)| per_pixel(px, ga))
        .collect();
    let mut g_feat = vec![0.0; features.len()];
    for (px, list) in scatters.iter().enumerate() {
        let g = &d_out[px * dim..(px + 1) * dim];
        for &(i, w) in list {
            for (gf, g) in g_feat[i * dim..(i + 1) * dim].iter_mut().zip(g) {
                *gf += w * g;
            }
        }
    }
    let mut buf = GradBuffer::new();
    buf.accumulate(Quantity::Alphas, &g_alpha)?;
    buf.accumulate(Quantity::Features, &g_feat)?;
    Ok(buf)
}
