//! Exact K-nearest-neighbor search over heterogeneous batches of points.
//!
//! Distances are squared Euclidean. Ties are broken by the smaller index, so
//! results are reproducible and a `K' < K` query returns a prefix of the `K`
//! result. Low dimensions (2, 3, 4) with `K <= 32` take a specialized path
//! with a fixed-size insertion buffer; everything else goes through a bounded
//! binary heap. Both paths compute identical distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::batching::PointCloudBatch;
use crate::error::{Error, Result};

/// Largest `K` served by the fixed-size path.
pub const MAX_TUNED_K: usize = 32;

/// Batched `dim`-dimensional points, stored flat and packed by element.
#[derive(Clone, Debug)]
pub struct PointSets<'a> {
    coords: &'a [f64],
    dim: usize,
    offsets: Vec<usize>,
}

impl<'a> PointSets<'a> {
    pub fn new(coords: &'a [f64], dim: usize, lengths: &[usize]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "point dimension must be positive".into(),
            ));
        }
        let total: usize = lengths.iter().sum();
        if total * dim != coords.len() {
            return Err(Error::shape(format!(
                "{} coordinates for {total} points of dimension {dim}",
                coords.len()
            )));
        }
        let mut offsets = vec![0];
        let mut acc = 0;
        for l in lengths {
            acc += l;
            offsets.push(acc);
        }
        Ok(Self {
            coords,
            dim,
            offsets,
        })
    }

    pub fn from_cloud(pc: &'a PointCloudBatch) -> Self {
        Self {
            coords: pc.points_packed().as_flattened(),
            dim: 3,
            offsets: pc.cloud_offsets().to_vec(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    fn element(&self, e: usize) -> &'a [f64] {
        &self.coords[self.offsets[e] * self.dim..self.offsets[e + 1] * self.dim]
    }

    fn point(&self, i: usize) -> &'a [f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// For every packed query point, its `k` nearest points in the matching
/// element of the reference set.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    k: usize,
    /// `num_queries × k` squared distances; `f64::INFINITY` in empty slots.
    pub dists: Vec<f64>,
    /// `num_queries × k` element-local reference indices, `-1` in empty slots.
    pub idx: Vec<i64>,
    query_offsets: Vec<usize>,
}

impl KnnResult {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_queries(&self) -> usize {
        self.dists.len() / self.k
    }

    pub fn query_offsets(&self) -> &[usize] {
        &self.query_offsets
    }

    pub fn row(&self, query: usize) -> (&[f64], &[i64]) {
        let r = query * self.k..(query + 1) * self.k;
        (&self.dists[r.clone()], &self.idx[r])
    }
}

#[inline]
fn sq_dist<const D: usize>(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..D {
        let d = a[t] - b[t];
        s += d * d;
    }
    s
}

#[inline]
fn sq_dist_dyn(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

fn knn_row_fixed<const D: usize>(
    query: &[f64],
    refs: &[f64],
    k: usize,
    dists: &mut [f64],
    idx: &mut [i64],
) {
    let mut best_d = [f64::INFINITY; MAX_TUNED_K];
    let mut best_i = [-1i64; MAX_TUNED_K];
    let mut filled = 0usize;
    for (j, r) in refs.chunks_exact(D).enumerate() {
        let d = sq_dist::<D>(query, r);
        if filled == k && !(d < best_d[k - 1]) {
            continue;
        }
        // later indices sit after earlier ones at equal distance
        let mut pos = filled.min(k - 1);
        while pos > 0 && best_d[pos - 1] > d {
            best_d[pos] = best_d[pos - 1];
            best_i[pos] = best_i[pos - 1];
            pos -= 1;
        }
        best_d[pos] = d;
        best_i[pos] = j as i64;
        if filled < k {
            filled += 1;
        }
    }
    dists.copy_from_slice(&best_d[..k]);
    idx.copy_from_slice(&best_i[..k]);
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn knn_row_heap(
    query: &[f64],
    refs: &[f64],
    dim: usize,
    k: usize,
    dists: &mut [f64],
    idx: &mut [i64],
) {
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (j, r) in refs.chunks_exact(dim).enumerate() {
        let c = Candidate(sq_dist_dyn(query, r), j);
        if heap.len() < k {
            heap.push(c);
        } else if let Some(top) = heap.peek() {
            if c < *top {
                heap.pop();
                heap.push(c);
            }
        }
    }
    dists.fill(f64::INFINITY);
    idx.fill(-1);
    for (slot, Candidate(d, j)) in heap.into_sorted_vec().into_iter().enumerate() {
        dists[slot] = d;
        idx[slot] = j as i64;
    }
}

/// Exact `k` nearest neighbors of every point of `p` among the points of the
/// same batch element of `q`.
pub fn knn(p: &PointSets, q: &PointSets, k: usize) -> Result<KnnResult> {
    knn_impl(p, q, k, true)
}

/// [`knn`] forced through the heap path regardless of dimension and `k`.
pub fn knn_generic(p: &PointSets, q: &PointSets, k: usize) -> Result<KnnResult> {
    knn_impl(p, q, k, false)
}

fn knn_impl(p: &PointSets, q: &PointSets, k: usize, allow_tuned: bool) -> Result<KnnResult> {
    if p.batch_size() != q.batch_size() {
        return Err(Error::shape(format!(
            "knn batch sizes differ: {} vs {}",
            p.batch_size(),
            q.batch_size()
        )));
    }
    if p.dim() != q.dim() {
        return Err(Error::shape(format!(
            "knn point dimensions differ: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("knn needs k >= 1".into()));
    }
    let n = p.len();
    let mut dists = vec![f64::INFINITY; n * k];
    let mut idx = vec![-1i64; n * k];
    let owner: Vec<usize> = (0..p.batch_size())
        .flat_map(|e| std::iter::repeat_n(e, p.offsets[e + 1] - p.offsets[e]))
        .collect();
    let tuned = allow_tuned && k <= MAX_TUNED_K;
    dists
        .par_chunks_mut(k)
        .zip(idx.par_chunks_mut(k))
        .enumerate()
        .for_each(|(i, (d, ix))| {
            let query = p.point(i);
            let refs = q.element(owner[i]);
            match (tuned, p.dim()) {
                (true, 2) => knn_row_fixed::<2>(query, refs, k, d, ix),
                (true, 3) => knn_row_fixed::<3>(query, refs, k, d, ix),
                (true, 4) => knn_row_fixed::<4>(query, refs, k, d, ix),
                _ => knn_row_heap(query, refs, p.dim(), k, d, ix),
            }
        });
    Ok(KnnResult {
        k,
        dists,
        idx,
        query_offsets: p.offsets.clone(),
    })
}

/// [`knn`] for 3D point-cloud batches.
pub fn knn_points(p: &PointCloudBatch, q: &PointCloudBatch, k: usize) -> Result<KnnResult> {
    knn(&PointSets::from_cloud(p), &PointSets::from_cloud(q), k)
}
