//! Graph convolution over packed vertex features:
//! `f'_v = W0·f_v + Σ_{u ∈ N(v)} W1·f_u (+ b)`.
//!
//! Edges are undirected; each pair contributes in both directions. Neighbor
//! sums run in ascending neighbor order, fixed by a CSR built once per call,
//! so results do not depend on thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense weights, stored row-major as `d_in × d_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphConvWeights {
    pub d_in: usize,
    pub d_out: usize,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl GraphConvWeights {
    pub fn new(
        d_in: usize,
        d_out: usize,
        w0: Vec<f64>,
        w1: Vec<f64>,
        bias: Option<Vec<f64>>,
    ) -> Result<Self> {
        if w0.len() != d_in * d_out || w1.len() != d_in * d_out {
            return Err(Error::shape(format!(
                "graph conv weights must be {d_in}×{d_out}, got {} and {} values",
                w0.len(),
                w1.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != d_out {
                return Err(Error::shape(format!(
                    "bias has {} values, expected {d_out}",
                    b.len()
                )));
            }
        }
        Ok(Self {
            d_in,
            d_out,
            w0,
            w1,
            bias,
        })
    }

    pub fn identity(d: usize) -> Self {
        let mut eye = vec![0.0; d * d];
        for i in 0..d {
            eye[i * d + i] = 1.0;
        }
        Self {
            d_in: d,
            d_out: d,
            w0: eye.clone(),
            w1: eye,
            bias: None,
        }
    }
}

/// Undirected adjacency in compressed-row form.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Adjacency {
    pub fn from_edges(num_verts: usize, edges: &[[usize; 2]]) -> Result<Self> {
        let mut degree = vec![0usize; num_verts];
        for &[a, b] in edges {
            for v in [a, b] {
                if v >= num_verts {
                    return Err(Error::IndexOutOfRange {
                        context: "graph conv edge",
                        index: v,
                        len: num_verts,
                    });
                }
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(num_verts + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_verts].to_vec();
        let mut neighbors = vec![0usize; offsets[num_verts]];
        for &[a, b] in edges {
            neighbors[fill[a]] = b;
            fill[a] += 1;
            neighbors[fill[b]] = a;
            fill[b] += 1;
        }
        for v in 0..num_verts {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok(Self { offsets, neighbors })
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn num_verts(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `out_v = Σ_{u ∈ N(v)} x_u` for rows of width `d`.
    pub fn aggregate(&self, x: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_verts() * d];
        out.par_chunks_mut(d.max(1))
            .enumerate()
            .for_each(|(v, row)| {
                for &u in self.neighbors(v) {
                    for (o, x) in row.iter_mut().zip(&x[u * d..(u + 1) * d]) {
                        *o += x;
                    }
                }
            });
        out
    }
}

fn matmul_rows(x: &[f64], d_in: usize, w: &[f64], d_out: usize, out: &mut [f64]) {
    out.par_chunks_mut(d_out.max(1))
        .zip(x.par_chunks(d_in.max(1)))
        .for_each(|(o, xr)| {
            for (i, xv) in xr.iter().enumerate() {
                for (j, ov) in o.iter_mut().enumerate() {
                    *ov += xv * w[i * d_out + j];
                }
            }
        });
}

fn check_features(features: &[f64], num_verts: usize, w: &GraphConvWeights) -> Result<()> {
    if features.len() != num_verts * w.d_in {
        return Err(Error::shape(format!(
            "{} feature values for {num_verts} vertices of width {}",
            features.len(),
            w.d_in
        )));
    }
    Ok(())
}

/// Row-major `num_verts × d_out` output.
pub fn graph_conv(
    features: &[f64],
    num_verts: usize,
    edges: &[[usize; 2]],
    w: &GraphConvWeights,
) -> Result<Vec<f64>> {
    check_features(features, num_verts, w)?;
    let adj = Adjacency::from_edges(num_verts, edges)?;
    let agg = adj.aggregate(features, w.d_in);
    let mut out = vec![0.0; num_verts * w.d_out];
    if let Some(b) = &w.bias {
        for row in out.chunks_mut(w.d_out.max(1)) {
            row.copy_from_slice(b);
        }
    }
    matmul_rows(features, w.d_in, &w.w0, w.d_out, &mut out);
    matmul_rows(&agg, w.d_in, &w.w1, w.d_out, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphConvGrads {
    pub features: Vec<f64>,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

pub fn graph_conv_backward(
    features: &[f64],
    num_verts: usize,
    edges: &[[usize; 2]],
    w: &GraphConvWeights,
    grad_out: &[f64],
) -> Result<GraphConvGrads> {
    check_features(features, num_verts, w)?;
    if grad_out.len() != num_verts * w.d_out {
        return Err(Error::shape(format!(
            "graph conv cotangent has {} values, expected {}",
            grad_out.len(),
            num_verts * w.d_out
        )));
    }
    let adj = Adjacency::from_edges(num_verts, edges)?;
    let (d_in, d_out) = (w.d_in, w.d_out);
    let w0t = transpose(&w.w0, d_in, d_out);
    let w1t = transpose(&w.w1, d_in, d_out);

    // d_features = g·W0ᵀ + A·(g·W1ᵀ), A symmetric
    let mut g_w1t = vec![0.0; num_verts * d_in];
    matmul_rows(grad_out, d_out, &w1t, d_in, &mut g_w1t);
    let mut d_features = adj.aggregate(&g_w1t, d_in);
    matmul_rows(grad_out, d_out, &w0t, d_in, &mut d_features);

    let agg = adj.aggregate(features, d_in);
    let d_w0 = outer_sum(features, grad_out, num_verts, d_in, d_out);
    let d_w1 = outer_sum(&agg, grad_out, num_verts, d_in, d_out);
    let bias = w.bias.as_ref().map(|_| {
        let mut b = vec![0.0; d_out];
        for row in grad_out.chunks(d_out.max(1)) {
            for (bv, g) in b.iter_mut().zip(row) {
                *bv += g;
            }
        }
        b
    });
    Ok(GraphConvGrads {
        features: d_features,
        w0: d_w0,
        w1: d_w1,
        bias,
    })
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = m[i * cols + j];
        }
    }
    t
}

/// `Xᵀ·G` summed over rows in ascending order.
fn outer_sum(x: &[f64], g: &[f64], n: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; d_in * d_out];
    for v in 0..n {
        let xr = &x[v * d_in..(v + 1) * d_in];
        let gr = &g[v * d_out..(v + 1) * d_out];
        for (i, xv) in xr.iter().enumerate() {
            for (j, gv) in gr.iter().enumerate() {
                out[i * d_out + j] += xv * gv;
            }
        }
    }
    out
}
