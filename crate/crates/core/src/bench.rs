//! Timing and peak-memory benchmarks over synthetic batches.
//!
//! Each benchmark draws `batches` random inputs and times `runs` calls on
//! each, reporting the mean and median wall time and the peak number of
//! bytes allocated above the starting level. Peak memory is only tracked
//! when [`TrackingAllocator`] is the global allocator:
//!
//! ```ignore
//! #[global_allocator]
//! static ALLOC: rast3d::bench::TrackingAllocator = rast3d::bench::TrackingAllocator;
//! ```

use std::alloc::{GlobalAlloc, Layout, System};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::batching::{MeshBatch, PointCloudBatch};
use crate::camera::{Camera, Projection};
use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_distance, graph_conv, knn_points, sample_points_from_meshes, GraphConvWeights,
};
use crate::math::{dot3, sub3};
use crate::points::{
    alpha_composite, norm_composite, rasterize_points, splat_opacity, PointRasterSettings,
};
use crate::raster::{rasterize_meshes, rasterize_meshes_naive, RasterSettings};
use crate::templates::{synthetic_batch, synthetic_face_targets};

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static ACTIVE: AtomicBool = AtomicBool::new(false);

/// System allocator that keeps a running total and high-water mark.
pub struct TrackingAllocator;

fn grow(n: usize) {
    let now = CURRENT.fetch_add(n, Ordering::Relaxed) + n;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            ACTIVE.store(true, Ordering::Relaxed);
            grow(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            ACTIVE.store(true, Ordering::Relaxed);
            grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            if new_size > layout.size() {
                grow(new_size - layout.size());
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

/// Runs `f` and returns the peak bytes allocated above the level at entry,
/// or `None` when [`TrackingAllocator`] is not installed. Concurrent
/// allocations from other threads are counted too.
pub fn measure_peak<R>(f: impl FnOnce() -> R) -> (R, Option<usize>) {
    let base = CURRENT.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let r = f();
    let peak = PEAK.load(Ordering::Relaxed).saturating_sub(base);
    (r, ACTIVE.load(Ordering::Relaxed).then_some(peak))
}

/// Chamfer distance from a full pairwise distance matrix per element.
pub fn chamfer_dense(p: &PointCloudBatch, q: &PointCloudBatch) -> Result<f64> {
    if p.batch_size() != q.batch_size() {
        return Err(Error::shape("chamfer batch sizes differ"));
    }
    let mut total = 0.0;
    for e in 0..p.batch_size() {
        let (a, b) = (p.points_list(e), q.points_list(e));
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyInput(format!("chamfer: cloud {e} is empty")));
        }
        let mut d = vec![0.0; a.len() * b.len()];
        d.par_chunks_mut(b.len()).zip(a).for_each(|(row, pa)| {
            for (x, pb) in row.iter_mut().zip(b) {
                let v = sub3(*pa, *pb);
                *x = dot3(v, v);
            }
        });
        let row_min: f64 = d
            .chunks(b.len())
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .sum();
        let mut col_min = vec![f64::INFINITY; b.len()];
        for r in d.chunks(b.len()) {
            for (m, x) in col_min.iter_mut().zip(r) {
                *m = m.min(*x);
            }
        }
        total += row_min / a.len() as f64 + col_min.iter().sum::<f64>() / b.len() as f64;
    }
    Ok(total / p.batch_size() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchOp {
    Knn,
    Chamfer,
    GraphConv,
    Rasterize,
    Composite,
}

impl FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Self::Knn),
            "chamfer" => Ok(Self::Chamfer),
            "graph_conv" => Ok(Self::GraphConv),
            "rasterize" => Ok(Self::Rasterize),
            "composite" => Ok(Self::Composite),
            _ => Err(Error::Usage(format!(
                "unknown benchmark `{s}` (knn, chamfer, graph_conv, rasterize, composite)"
            ))),
        }
    }
}

impl BenchOp {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::Chamfer => "chamfer",
            Self::GraphConv => "graph_conv",
            Self::Rasterize => "rasterize",
            Self::Composite => "composite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSpec {
    pub op: BenchOp,
    pub batch_size: usize,
    /// Mean faces per mesh, or mean points per cloud.
    pub size: f64,
    /// Spread of `size` across the batch; 0 gives a homogeneous batch.
    pub sigma: f64,
    /// Points in the second cloud for chamfer and knn; `size` when `None`.
    pub size_q: Option<usize>,
    /// Neighbors, faces or points per pixel.
    pub k: usize,
    pub image_size: usize,
    pub feature_dim: usize,
    pub batches: usize,
    pub runs: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(op: BenchOp) -> Self {
        Self {
            op,
            batch_size: 8,
            size: 2000.0,
            sigma: 0.0,
            size_q: None,
            k: 10,
            image_size: 64,
            feature_dim: 16,
            batches: 5,
            runs: 10,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.batches == 0
            || self.runs == 0
            || self.k == 0
            || self.feature_dim == 0
        {
            return Err(Error::Usage(
                "batch size, batches, runs, k and feature dim must be positive".into(),
            ));
        }
        if !(self.size >= 1.0 && self.sigma >= 0.0) {
            return Err(Error::Usage(format!(
                "size {} / sigma {} out of range",
                self.size, self.sigma
            )));
        }
        if self.image_size < 8 {
            return Err(Error::Usage(format!(
                "image size must be at least 8, got {}",
                self.image_size
            )));
        }
        Ok(())
    }
}

/// Timings for one implementation of a benchmarked op.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub op: &'static str,
    pub variant: &'static str,
    pub batch_size: usize,
    pub size: f64,
    pub k: usize,
    pub image_size: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub peak_bytes: Option<usize>,
}

pub fn rows_csv(rows: &[BenchRow]) -> String {
    let mut s =
        String::from("op,variant,batch_size,size,k,image_size,mean_ms,median_ms,peak_bytes\n");
    for r in rows {
        let peak = r.peak_bytes.map_or_else(String::new, |b| b.to_string());
        writeln!(
            s,
            "{},{},{},{},{},{},{:.4},{:.4},{}",
            r.op, r.variant, r.batch_size, r.size, r.k, r.image_size, r.mean_ms, r.median_ms, peak
        )
        .expect("writing to a String");
    }
    s
}

struct Samples {
    ms: Vec<f64>,
    peak: Option<usize>,
}

impl Samples {
    fn new() -> Self {
        Self {
            ms: Vec::new(),
            peak: None,
        }
    }

    fn time<R>(&mut self, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let t = Instant::now();
        let (r, peak) = measure_peak(f);
        self.ms.push(t.elapsed().as_secs_f64() * 1e3);
        if let Some(p) = peak {
            self.peak = Some(self.peak.map_or(p, |q| q.max(p)));
        }
        r
    }

    fn row(mut self, spec: &BenchSpec, variant: &'static str) -> BenchRow {
        self.ms.sort_by(f64::total_cmp);
        let n = self.ms.len();
        let median = if n % 2 == 1 {
            self.ms[n / 2]
        } else {
            0.5 * (self.ms[n / 2 - 1] + self.ms[n / 2])
        };
        BenchRow {
            op: spec.op.name(),
            variant,
            batch_size: spec.batch_size,
            size: spec.size,
            k: spec.k,
            image_size: spec.image_size,
            mean_ms: self.ms.iter().sum::<f64>() / n as f64,
            median_ms: median,
            peak_bytes: self.peak,
        }
    }
}

/// Heterogeneous point clouds sampled from synthetic meshes, with sizes
/// drawn around `mean`.
pub fn synthetic_clouds(
    mean: f64,
    sigma: f64,
    batch_size: usize,
    seed: u64,
) -> Result<PointCloudBatch> {
    let sizes = synthetic_face_targets(mean, sigma, batch_size, seed)?;
    let mesh = synthetic_batch(mean.max(20.0), 0.0, batch_size, seed)?;
    let max = sizes.iter().fold(0.0f64, |m, s| m.max(*s)).round().max(1.0) as usize;
    let full = sample_points_from_meshes(&mesh, max, seed ^ 0x5eed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = sizes
        .iter()
        .enumerate()
        .map(|(e, s)| {
            let n = (s.round() as usize).clamp(1, max);
            // jitter so clouds from the same template differ
            full.points_list(e)[..n]
                .iter()
                .map(|p| p.map(|c| c + 1e-3 * rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    PointCloudBatch::new(lists)
}

fn bench_camera() -> Result<Camera> {
    Camera::look_at(
        [0.3, 0.4, -4.0],
        [0.0; 3],
        [0.0, 1.0, 0.0],
        Projection::Perspective {
            focal_length: 2.5,
            principal_point: [0.0, 0.0],
        },
        0.1,
        100.0,
    )
}

fn mesh_for(spec: &BenchSpec, b: usize) -> Result<MeshBatch> {
    synthetic_batch(
        spec.size,
        spec.sigma,
        spec.batch_size,
        spec.seed.wrapping_add(b as u64),
    )
}

/// Runs every variant of `spec.op` and returns one row per variant.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let seed_of = |b: usize| spec.seed.wrapping_add(1000 * b as u64);
    match spec.op {
        BenchOp::Knn | BenchOp::Chamfer => {
            let (mut fast, mut dense) = (Samples::new(), Samples::new());
            for b in 0..spec.batches {
                let p = synthetic_clouds(spec.size, spec.sigma, spec.batch_size, seed_of(b))?;
                let q = match spec.size_q {
                    Some(n) => synthetic_clouds(n as f64, 0.0, spec.batch_size, seed_of(b) + 1)?,
                    None => {
                        synthetic_clouds(spec.size, spec.sigma, spec.batch_size, seed_of(b) + 1)?
                    }
                };
                for _ in 0..spec.runs {
                    if spec.op == BenchOp::Knn {
                        fast.time(|| knn_points(&p, &q, spec.k))?;
                    } else {
                        fast.time(|| chamfer_distance(&p, &q))?;
                        dense.time(|| chamfer_dense(&p, &q))?;
                    }
                }
            }
            let mut rows = vec![fast.row(
                spec,
                if spec.op == BenchOp::Knn {
                    "exact"
                } else {
                    "knn"
                },
            )];
            if spec.op == BenchOp::Chamfer {
                rows.push(dense.row(spec, "dense"));
            }
            Ok(rows)
        }
        BenchOp::GraphConv => {
            let mut s = Samples::new();
            let d = spec.feature_dim;
            for b in 0..spec.batches {
                let mesh = mesh_for(spec, b)?;
                let n = mesh.verts_packed().len();
                let mut rng = ChaCha8Rng::seed_from_u64(seed_of(b));
                let mut draw = |len: usize| -> Vec<f64> {
                    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
                };
                let feats = draw(n * d);
                let w = GraphConvWeights::new(d, d, draw(d * d), draw(d * d), Some(draw(d)))?;
                let edges = mesh.edges_packed().data().to_vec();
                for _ in 0..spec.runs {
                    s.time(|| graph_conv(&feats, n, &edges, &w))?;
                }
            }
            Ok(vec![s.row(spec, "sparse")])
        }
        BenchOp::Rasterize => {
            let (mut tiled, mut naive) = (Samples::new(), Samples::new());
            let cam = bench_camera()?;
            let settings = RasterSettings::new((spec.image_size, spec.image_size), spec.k, 1e-4);
            for b in 0..spec.batches {
                let mesh = mesh_for(spec, b)?;
                for _ in 0..spec.runs {
                    tiled.time(|| rasterize_meshes(&mesh, &cam, &settings))?;
                    naive.time(|| rasterize_meshes_naive(&mesh, &cam, &settings))?;
                }
            }
            Ok(vec![tiled.row(spec, "tiled"), naive.row(spec, "naive")])
        }
        BenchOp::Composite => {
            let (mut alpha, mut norm) = (Samples::new(), Samples::new());
            let cam = bench_camera()?;
            let d = spec.feature_dim;
            let settings =
                PointRasterSettings::new((spec.image_size, spec.image_size), spec.k, 0.05);
            for b in 0..spec.batches {
                let pc = synthetic_clouds(spec.size, spec.sigma, spec.batch_size, seed_of(b))?;
                let frag = rasterize_points(&pc, &cam, &settings)?;
                let alphas = splat_opacity(&frag, settings.radius);
                let mut rng = ChaCha8Rng::seed_from_u64(seed_of(b));
                let feats: Vec<f64> = (0..pc.points_packed().len() * d)
                    .map(|_| rng.gen_range(0.0..1.0))
                    .collect();
                let bg = vec![0.0; d];
                for _ in 0..spec.runs {
                    alpha.time(|| alpha_composite(&frag, &alphas, &feats, d, &bg))?;
                    norm.time(|| norm_composite(&frag, &alphas, &feats, d, &bg))?;
                }
            }
            Ok(vec![alpha.row(spec, "alpha"), norm.row(spec, "norm")])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(op: BenchOp) -> BenchSpec {
        BenchSpec {
            batch_size: 2,
            size: 200.0,
            sigma: 20.0,
            image_size: 16,
            batches: 2,
            runs: 2,
            ..BenchSpec::new(op)
        }
    }

    #[test]
    fn dense_chamfer_agrees_with_knn_path() {
        let p = synthetic_clouds(150.0, 30.0, 3, 1).unwrap();
        let q = synthetic_clouds(90.0, 10.0, 3, 2).unwrap();
        let a = chamfer_distance(&p, &q).unwrap();
        let b = chamfer_dense(&p, &q).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn every_op_produces_rows() {
        for (op, variants) in [
            (BenchOp::Knn, vec!["exact"]),
            (BenchOp::Chamfer, vec!["knn", "dense"]),
            (BenchOp::GraphConv, vec!["sparse"]),
            (BenchOp::Rasterize, vec!["tiled", "naive"]),
            (BenchOp::Composite, vec!["alpha", "norm"]),
        ] {
            let rows = run_bench(&tiny(op)).unwrap();
            assert_eq!(rows.iter().map(|r| r.variant).collect::<Vec<_>>(), variants);
            assert!(rows.iter().all(|r| r.mean_ms >= 0.0 && r.median_ms >= 0.0));
        }
    }

    #[test]
    fn unknown_op_is_usage_error() {
        assert!(matches!("sort".parse::<BenchOp>(), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let rows = run_bench(&tiny(BenchOp::Rasterize)).unwrap();
        let csv = rows_csv(&rows);
        assert!(csv.starts_with("op,variant,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn synthetic_clouds_are_heterogeneous_and_seeded() {
        let a = synthetic_clouds(300.0, 50.0, 6, 9).unwrap();
        let b = synthetic_clouds(300.0, 50.0, 6, 9).unwrap();
        assert_eq!(a.points_packed(), b.points_packed());
        let n = a.num_points_per_cloud();
        assert!(n.iter().any(|&x| x != n[0]));
    }
}
