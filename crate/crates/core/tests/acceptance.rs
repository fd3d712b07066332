//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stderr
//! (visible without `--nocapture`) and then asserts.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rast3d::batching::{MeshBatch, PointCloudBatch};
use rast3d::bench::{run_bench, BenchOp, BenchRow, BenchSpec, TrackingAllocator};
use rast3d::camera::{Camera, Projection};
use rast3d::config::FitConfig;
use rast3d::config::{Geometry, MeshSource, MeshTemplate, SceneConfig, Shader};
use rast3d::fit::{run_fit, FitReport};
use rast3d::geometry::{chamfer_distance, graph_conv, knn, GraphConvWeights, PointSets};
use rast3d::grad::FdOptions;
use rast3d::ops::{gradcheck_suite, run_gradcheck, GRADCHECK_TOLERANCE};
use rast3d::points::{alpha_composite, norm_composite, Compositor, PointFragments};
use rast3d::raster::{rasterize_meshes, rasterize_meshes_naive, MeshFragments, RasterSettings};
use rast3d::render::render_scene;
use rast3d::shading::{silhouette_blend, softmax_blend, BlendParams, Lighting};
use rast3d::templates::ico_sphere;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

// Timings and the allocator's high-water mark are process-wide.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, title: &str, ok: bool, detail: String) {
    let line = format!(
        "{} criterion {n} ({title}): {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(ok, "{line}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- oracles

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All reference distances of one query, ascending.
fn brute_force_row(query: &[f64], refs: &[f64], dim: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = refs
        .chunks(dim)
        .enumerate()
        .map(|(j, r)| (sq_dist(query, r), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

fn dense_chamfer(p: &[Vec<[f64; 3]>], q: &[Vec<[f64; 3]>]) -> f64 {
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        let m: Vec<Vec<f64>> = a
            .iter()
            .map(|x| b.iter().map(|y| sq_dist(x, y)).collect())
            .collect();
        let rows: f64 = m
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .sum();
        let cols: f64 = (0..b.len())
            .map(|j| m.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
            .sum();
        total += rows / a.len() as f64 + cols / b.len() as f64;
    }
    total / p.len() as f64
}

/// `F·W0 + A·F·W1 + b` with a dense symmetric adjacency matrix.
fn dense_graph_conv(f: &[f64], n: usize, edges: &[[usize; 2]], w: &GraphConvWeights) -> Vec<f64> {
    let (di, dout) = (w.d_in, w.d_out);
    let mut adj = vec![0.0; n * n];
    for &[a, b] in edges {
        adj[a * n + b] += 1.0;
        adj[b * n + a] += 1.0;
    }
    let matmul = |x: &[f64], rows: usize, inner: usize, y: &[f64], cols: usize| -> Vec<f64> {
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[r * cols + c] = (0..inner).map(|i| x[r * inner + i] * y[i * cols + c]).sum();
            }
        }
        out
    };
    let af = matmul(&adj, n, n, f, di);
    let a = matmul(f, n, di, &w.w0, dout);
    let b = matmul(&af, n, di, &w.w1, dout);
    (0..n * dout)
        .map(|i| a[i] + b[i] + w.bias.as_ref().map_or(0.0, |bias| bias[i % dout]))
        .collect()
}

// ---------------------------------------------------------------- 1

#[test]
fn c01_knn_matches_brute_force() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let mut queries = 0usize;
    for batch in 0..200 {
        let b = rng.gen_range(1..=8);
        let dim = [2, 3, 4][rng.gen_range(0..3)];
        let k = [1, 4, 16][rng.gen_range(0..3)];
        // every other batch sits on a coarse lattice to force ties
        let lattice = batch % 2 == 0;
        let (lp, lq): (Vec<usize>, Vec<usize>) = (0..b)
            .map(|_| (rng.gen_range(0..=256), rng.gen_range(0..=256)))
            .unzip();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n * dim)
                .map(|_| {
                    if lattice {
                        rng.gen_range(-3i32..=3) as f64
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect()
        };
        let pc = draw(lp.iter().sum());
        let qc = draw(lq.iter().sum());
        let ps = PointSets::new(&pc, dim, &lp).unwrap();
        let qs = PointSets::new(&qc, dim, &lq).unwrap();
        let res = knn(&ps, &qs, k).unwrap();
        let (po, qo) = (ps.offsets().to_vec(), qs.offsets().to_vec());
        for e in 0..b {
            let refs = &qc[qo[e] * dim..qo[e + 1] * dim];
            for i in po[e]..po[e + 1] {
                queries += 1;
                let query = &pc[i * dim..(i + 1) * dim];
                let oracle = brute_force_row(query, refs, dim);
                if let Err(msg) = check_knn_row(
                    query,
                    refs,
                    dim,
                    k,
                    &oracle,
                    &res.dists[i * k..(i + 1) * k],
                    &res.idx[i * k..(i + 1) * k],
                ) {
                    failures.push(format!("batch {batch} query {i}: {msg}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(30);
    report(
        1,
        "KNN vs brute force",
        ok,
        format!(
            "200 batches, {queries} queries, {} mismatches{}, {:.2} s (limit 30 s)",
            failures.len(),
            failures
                .first()
                .map_or(String::new(), |f| format!(" (first: {f})")),
            secs(elapsed)
        ),
    );
}

fn check_knn_row(
    query: &[f64],
    refs: &[f64],
    dim: usize,
    k: usize,
    oracle: &[(f64, usize)],
    dists: &[f64],
    idx: &[i64],
) -> Result<(), String> {
    let filled = k.min(oracle.len());
    for s in 0..k {
        if s >= filled {
            if idx[s] != -1 || dists[s] != f64::INFINITY {
                return Err(format!("slot {s} should be empty"));
            }
            continue;
        }
        if dists[s].to_bits() != oracle[s].0.to_bits() {
            return Err(format!("slot {s}: {} vs oracle {}", dists[s], oracle[s].0));
        }
        let j = usize::try_from(idx[s]).map_err(|_| format!("slot {s} has index {}", idx[s]))?;
        if j * dim >= refs.len()
            || sq_dist(query, &refs[j * dim..(j + 1) * dim]).to_bits() != dists[s].to_bits()
        {
            return Err(format!(
                "slot {s}: index {j} does not have distance {}",
                dists[s]
            ));
        }
    }
    if filled == 0 {
        return Ok(());
    }
    // strictly-closer points are forced; at the boundary distance any tied
    // subset of the right size is acceptable
    let boundary = oracle[filled - 1].0;
    let got: BTreeSet<usize> = idx[..filled].iter().map(|&j| j as usize).collect();
    if got.len() != filled {
        return Err("duplicate indices".into());
    }
    let inner_got: BTreeSet<usize> = idx[..filled]
        .iter()
        .zip(dists)
        .filter(|(_, d)| **d < boundary)
        .map(|(&j, _)| j as usize)
        .collect();
    let inner_oracle: BTreeSet<usize> = oracle
        .iter()
        .filter(|(d, _)| *d < boundary)
        .map(|(_, j)| *j)
        .collect();
    let tied: BTreeSet<usize> = oracle
        .iter()
        .filter(|(d, _)| *d == boundary)
        .map(|(_, j)| *j)
        .collect();
    if inner_got != inner_oracle {
        return Err("neighbors strictly inside the k-th distance differ".into());
    }
    if !got.difference(&inner_got).all(|j| tied.contains(j)) {
        return Err("boundary neighbors are not from the tie set".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- 2

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    let shift = rng.gen_range(-0.5..0.5);
    (0..n)
        .map(|_| [0; 3].map(|_| rng.gen_range(-1.0..1.0) + shift))
        .collect()
}

#[test]
fn c02_chamfer_matches_dense() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let b = rng.gen_range(1..=6);
        let p: Vec<_> = (0..b)
            .map(|_| {
                let n = rng.gen_range(1..=300);
                random_cloud(&mut rng, n)
            })
            .collect();
        let q: Vec<_> = (0..b)
            .map(|_| {
                let n = rng.gen_range(1..=300);
                random_cloud(&mut rng, n)
            })
            .collect();
        let got = chamfer_distance(
            &PointCloudBatch::new(p.clone()).unwrap(),
            &PointCloudBatch::new(q.clone()).unwrap(),
        )
        .unwrap();
        let want = dense_chamfer(&p, &q);
        worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    report(
        2,
        "Chamfer via KNN vs dense",
        worst <= 1e-6,
        format!("100 batches, worst relative error {worst:.3e} (limit 1e-6)"),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn c03_graph_conv_matches_dense() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=100);
        let (di, dout) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let mut pairs: Vec<[usize; 2]> = Vec::new();
        if n > 1 {
            let m = rng.gen_range(0..=3 * n);
            let mut seen = BTreeSet::new();
            for _ in 0..m {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if a != b && seen.insert((a.min(b), a.max(b))) {
                    pairs.push([a, b]);
                }
            }
        }
        let mut draw =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let f = draw(n * di);
        let bias = if n % 2 == 0 { Some(draw(dout)) } else { None };
        let w = GraphConvWeights::new(di, dout, draw(di * dout), draw(di * dout), bias).unwrap();
        let got = graph_conv(&f, n, &pairs, &w).unwrap();
        let want = dense_graph_conv(&f, n, &pairs, &w);
        let scale = want
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    report(
        3,
        "graph conv vs dense F·W0 + A·F·W1",
        worst <= 1e-6,
        format!("100 graphs, worst relative error {worst:.3e} (limit 1e-6)"),
    );
}

// ---------------------------------------------------------------- 4

fn random_scene_mesh(rng: &mut ChaCha8Rng) -> MeshBatch {
    let b = rng.gen_range(1..=3);
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for _ in 0..b {
        if rng.gen_bool(0.5) {
            let sphere = ico_sphere(rng.gen_range(0..=2)).unwrap();
            let s = rng.gen_range(0.3..1.2);
            let off = [0; 3].map(|_| rng.gen_range(-0.5..0.5));
            verts.push(
                sphere
                    .verts_packed()
                    .iter()
                    .map(|v| {
                        [0, 1, 2].map(|c| v[c] * s * (1.0 + rng.gen_range(-0.05..0.05)) + off[c])
                    })
                    .collect::<Vec<_>>(),
            );
            faces.push(sphere.faces_list(0).to_vec());
        } else {
            let n = rng.gen_range(1..=150);
            let mut v = Vec::new();
            let mut f = Vec::new();
            for t in 0..n {
                let c = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
                let size = rng.gen_range(0.02..0.6);
                for _ in 0..3 {
                    v.push([0, 1, 2].map(|i| c[i] + rng.gen_range(-size..size)));
                }
                f.push([3 * t, 3 * t + 1, 3 * t + 2]);
            }
            verts.push(v);
            faces.push(f);
        }
    }
    MeshBatch::new(verts, faces).unwrap()
}

fn random_camera(rng: &mut ChaCha8Rng) -> Camera {
    let dist = rng.gen_range(2.0..5.0);
    let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.gen_range(-1.0..1.0);
    let eye = [
        dist * el.cos() * az.sin(),
        dist * el.sin(),
        -dist * el.cos() * az.cos(),
    ];
    let projection = if rng.gen_bool(0.75) {
        Projection::Perspective {
            focal_length: rng.gen_range(1.0..3.0),
            principal_point: [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)],
        }
    } else {
        let s = rng.gen_range(0.4..1.0);
        Projection::Orthographic { scale: [s, s] }
    };
    Camera::look_at(eye, [0.0; 3], [0.0, 1.0, 0.0], projection, 0.1, 20.0).unwrap()
}

#[test]
fn c04_tiled_rasterizer_is_bit_identical_to_naive() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = Vec::new();
    let mut combos = BTreeSet::new();
    for scene in 0..100 {
        let k = [1, 10, 50][scene % 3];
        let size = [32, 64, 128][(scene / 3) % 3];
        let blur: f64 = [0.0, 1e-4][(scene / 9) % 2];
        combos.insert((k, size, blur.to_bits()));
        let mesh = random_scene_mesh(&mut rng);
        let cam = random_camera(&mut rng);
        let s = RasterSettings {
            tile_size: [8, 16, 32][rng.gen_range(0..3)],
            ..RasterSettings::new((size, size), k, blur)
        };
        let tiled = rasterize_meshes(&mesh, &cam, &s).unwrap();
        let naive = rasterize_meshes_naive(&mesh, &cam, &s).unwrap();
        if !tiled.bit_identical(&naive) {
            mismatches.push(scene);
        }
    }
    report(
        4,
        "tiled vs naive rasterizer",
        mismatches.is_empty(),
        format!(
            "100 scenes over {} (K, size, blur) combinations, {} not bit-identical {:?}",
            combos.len(),
            mismatches.len(),
            mismatches
        ),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn c05_gradient_suite() {
    let _g = serial();
    let start = Instant::now();
    let cases = gradcheck_suite(0).unwrap();
    let out = run_gradcheck(&cases, FdOptions::default(), GRADCHECK_TOLERANCE).unwrap();
    let elapsed = start.elapsed();
    let names: Vec<&str> = out.iter().map(|o| o.report.op.as_str()).collect();
    let required = [
        "chamfer",
        "graph_conv",
        "laplacian_loss",
        "edge_loss",
        "silhouette_blend∘rasterize",
        "softmax_blend∘rasterize",
        "alpha_composite∘rasterize_points",
        "norm_composite∘rasterize_points",
    ];
    let missing: Vec<_> = required.iter().filter(|r| !names.contains(r)).collect();
    let failed: Vec<String> = out
        .iter()
        .filter(|o| !o.passed)
        .map(|o| {
            format!(
                "{} {:.2e} ({} dirs)",
                o.report.op, o.report.max_rel_error, o.report.directions
            )
        })
        .collect();
    let worst = out
        .iter()
        .max_by(|a, b| a.report.max_rel_error.total_cmp(&b.report.max_rel_error))
        .unwrap();
    let ok = missing.is_empty() && failed.is_empty() && elapsed < Duration::from_secs(120);
    report(
        5,
        "gradient suite",
        ok,
        format!(
            "{} ops, worst {} at {:.2e} (limit {GRADCHECK_TOLERANCE:.0e}), failed {failed:?}, missing {missing:?}, {:.3} s (limit 120 s)",
            out.len(),
            worst.report.op,
            worst.report.max_rel_error,
            secs(elapsed)
        ),
    );
}

// ---------------------------------------------------------------- 6

fn one_pixel(k: usize, dists: Vec<f64>, zbuf: Vec<f64>) -> MeshFragments {
    let occupied = dists.len();
    let pad = |v: Vec<f64>| {
        v.into_iter()
            .chain(std::iter::repeat(-1.0))
            .take(k)
            .collect::<Vec<_>>()
    };
    MeshFragments {
        batch: 1,
        height: 1,
        width: 1,
        k,
        pix_to_face: (0..k as i64)
            .map(|i| if (i as usize) < occupied { i } else { -1 })
            .collect(),
        zbuf: pad(zbuf),
        bary: vec![[1.0 / 3.0; 3]; k],
        dists: pad(dists),
    }
}

fn point_pixel(idx: Vec<i64>) -> PointFragments {
    let k = idx.len();
    PointFragments {
        batch: 1,
        height: 1,
        width: 1,
        k,
        idx,
        zbuf: (0..k).map(|i| 1.0 + i as f64).collect(),
        dists2: vec![0.0; k],
    }
}

#[test]
fn c06_blending_identities() {
    let _g = serial();
    let mut errs: Vec<(&str, f64)> = Vec::new();
    let sigma = 1e-4;

    let single = silhouette_blend(&one_pixel(1, vec![0.0], vec![2.0]), sigma).unwrap()[0];
    errs.push(("silhouette single slot at d=0", (single - 0.5).abs()));
    let double = silhouette_blend(&one_pixel(2, vec![0.0, 0.0], vec![2.0, 2.5]), sigma).unwrap()[0];
    errs.push(("silhouette two slots at d=0", (double - 0.75).abs()));

    let color = [0.3, 0.6, 0.9];
    let p = BlendParams {
        sigma,
        gamma: 1e-4,
        background_color: [1.0, 0.0, 1.0],
    };
    for d in [-1e-3, 0.0, 1e-5] {
        let rgba =
            softmax_blend(&one_pixel(1, vec![d], vec![2.0]), &[color], &p, 0.1, 10.0).unwrap()[0];
        let e = (0..3)
            .map(|c| (rgba[c] - color[c]).abs())
            .fold(0.0, f64::max);
        errs.push(("softmax with K=1 returns the slot color", e));
    }

    let f = [0.25, -1.5, 4.0];
    let a = 0.37;
    let out = alpha_composite(&point_pixel(vec![0]), &[a], &f, 3, &[0.0; 3]).unwrap();
    let e = (0..3)
        .map(|c| (out[c] - a * f[c]).abs())
        .fold(0.0, f64::max);
    errs.push(("alpha compositing K=1 gives α₁f₁", e));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let k = 7;
    let feats: Vec<f64> = (0..k * 4).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let alphas: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let base = norm_composite(
        &point_pixel((0..k as i64).collect()),
        &alphas,
        &feats,
        4,
        &[0.0; 4],
    )
    .unwrap();
    let mut worst_perm = 0.0f64;
    for _ in 0..20 {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let idx = order.iter().map(|&i| i as i64).collect();
        let perm_alphas: Vec<f64> = order.iter().map(|&i| alphas[i]).collect();
        let out = norm_composite(&point_pixel(idx), &perm_alphas, &feats, 4, &[0.0; 4]).unwrap();
        for (x, y) in out.iter().zip(&base) {
            worst_perm = worst_perm.max((x - y).abs());
        }
    }
    errs.push((
        "normalized compositing is permutation invariant",
        worst_perm,
    ));

    let worst = errs.iter().fold(0.0f64, |m, e| m.max(e.1));
    let bad: Vec<_> = errs.iter().filter(|e| !(e.1 <= 1e-12)).collect();
    report(
        6,
        "blending identities",
        bad.is_empty(),
        format!(
            "{} identities, worst deviation {worst:.2e} (limit 1e-12), violated {bad:?}",
            errs.len()
        ),
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn c07_template_sizes() {
    let _g = serial();
    let sizes: Vec<(usize, usize)> = [2, 3]
        .iter()
        .map(|&l| {
            let m = ico_sphere(l).unwrap();
            (m.verts_packed().len(), m.faces_packed().len())
        })
        .collect();
    report(
        7,
        "ico-sphere template sizes",
        sizes == [(642, 1280), (2562, 5120)],
        format!(
            "level 2 = {:?}, level 3 = {:?} (want 642/1280, 2562/5120)",
            sizes[0], sizes[1]
        ),
    );
}

// ---------------------------------------------------------------- 8

fn timed_fit(c: &FitConfig) -> (FitReport, Duration) {
    let start = Instant::now();
    let r = run_fit(c, |_| {}).unwrap();
    (r, start.elapsed())
}

#[test]
fn c08_silhouette_fits_converge() {
    let _g = serial();
    let sphere = FitConfig::default();
    assert_eq!(
        (
            sphere.views,
            sphere.raster.image_size,
            sphere.lambda_l,
            sphere.lambda_e
        ),
        (2, (64, 64), 19.0, 0.2)
    );
    let (rs, ts) = timed_fit(&sphere);
    let cube = FitConfig {
        target: MeshSource::Template(MeshTemplate::Cube(4)),
        target_scale: 1.0,
        views: 4,
        iters: 1000,
        ..FitConfig::default()
    };
    let (rc, tc) = timed_fit(&cube);
    let ok = rs.trace.len() <= 400
        && rs.final_l_s < 0.05
        && ts < Duration::from_secs(60)
        && rc.trace.len() <= 1000
        && rc.final_l_s < 0.1;
    report(
        8,
        "silhouette fitting",
        ok,
        format!(
            "sphere x{}: L_s {:.4} -> {:.4} in {} iters, {:.1} s (limits 0.05, 60 s); cube, 4 views: L_s {:.4} -> {:.4} in {} iters, {:.1} s (limit 0.1)",
            sphere.target_scale,
            rs.trace[0].l_s,
            rs.final_l_s,
            rs.trace.len(),
            secs(ts),
            rc.trace[0].l_s,
            rc.final_l_s,
            rc.trace.len(),
            secs(tc)
        ),
    );
}

// ---------------------------------------------------------------- 9

fn rows(spec: BenchSpec) -> (BenchRow, BenchRow) {
    let r = run_bench(&spec).unwrap();
    (r[0].clone(), r[1].clone())
}

#[test]
fn c09_performance_ordering() {
    let _g = serial();
    let (tiled, naive) = rows(BenchSpec {
        batch_size: 1,
        size: 10_000.0,
        k: 10,
        image_size: 256,
        batches: 1,
        runs: 10,
        ..BenchSpec::new(BenchOp::Rasterize)
    });
    let (via_knn, dense) = rows(BenchSpec {
        batch_size: 1,
        size: 1000.0,
        size_q: Some(10_000),
        batches: 1,
        runs: 10,
        ..BenchSpec::new(BenchOp::Chamfer)
    });
    let (alpha, norm) = rows(BenchSpec {
        batch_size: 1,
        size: 50_000.0,
        k: 150,
        image_size: 128,
        feature_dim: 16,
        batches: 1,
        runs: 31,
        ..BenchSpec::new(BenchOp::Composite)
    });
    let raster_ok = tiled.median_ms < naive.median_ms;
    let peak = |r: &BenchRow| r.peak_bytes.unwrap_or(usize::MAX);
    let chamfer_ok = via_knn.median_ms < dense.median_ms && peak(&via_knn) < peak(&dense);
    let composite_ok = norm.median_ms <= alpha.median_ms;
    report(
        9,
        "performance ordering",
        raster_ok && chamfer_ok && composite_ok,
        format!(
            "raster 10k faces/256²/K=10 tiled {:.1} ms vs naive {:.1} ms [{}]; chamfer |P|=1k |Q|=10k knn {:.1} ms/{} B vs dense {:.1} ms/{} B [{}]; K=150 norm {:.2} ms vs alpha {:.2} ms [{}]",
            tiled.median_ms,
            naive.median_ms,
            if raster_ok { "ok" } else { "FAIL" },
            via_knn.median_ms,
            peak(&via_knn),
            dense.median_ms,
            peak(&dense),
            if chamfer_ok { "ok" } else { "FAIL" },
            norm.median_ms,
            alpha.median_ms,
            if composite_ok { "ok" } else { "FAIL" },
        ),
    );
}

// ---------------------------------------------------------------- 10

/// Bit patterns of every gradient buffer and image produced by a fixed
/// workload.
fn fingerprint() -> Vec<u64> {
    let mut bits = Vec::new();
    let mut push = |v: &[f64]| bits.extend(v.iter().map(|x| x.to_bits()));
    for (n, case) in gradcheck_suite(0).unwrap().into_iter().enumerate() {
        let fwd = case.op.forward(&case.input).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let cot: Vec<f64> = (0..fwd.output.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        push(&fwd.output);
        push(&case.op.backward(&case.input, &fwd, &cot).unwrap());
    }
    let mut scenes = Vec::new();
    for (shader, lighting) in [
        (Shader::Softmax, Lighting::Phong),
        (Shader::Softmax, Lighting::Gouraud),
        (Shader::Hard, Lighting::Flat),
        (Shader::Silhouette, Lighting::Phong),
    ] {
        scenes.push(SceneConfig {
            geometry: Geometry::Mesh(MeshSource::Template(MeshTemplate::Sphere(3))),
            shader,
            lighting,
            ..SceneConfig::default()
        });
    }
    for compositor in [Compositor::Alpha, Compositor::Norm] {
        scenes.push(SceneConfig {
            geometry: Geometry::SampledPoints {
                template: MeshTemplate::Cube(4),
                count: 5000,
            },
            compositor,
            seed: 9,
            ..SceneConfig::default()
        });
    }
    for s in &scenes {
        push(&render_scene(s).unwrap().rgba);
    }
    let fit = run_fit(
        &FitConfig {
            iters: 15,
            ..FitConfig::default()
        },
        |_| {},
    )
    .unwrap();
    for r in &fit.trace {
        push(&[r.l_s, r.l_l, r.l_e, r.total]);
    }
    push(fit.mesh.verts_packed().as_flattened());
    bits
}

#[test]
fn c10_determinism_across_threads_and_runs() {
    let _g = serial();
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(fingerprint)
    };
    let reference = in_pool(1);
    let mut differing = Vec::new();
    for threads in [4, 8] {
        if in_pool(threads) != reference {
            differing.push(format!("{threads} threads"));
        }
    }
    if in_pool(4) != in_pool(4) {
        differing.push("repeat run".into());
    }
    report(
        10,
        "determinism",
        differing.is_empty(),
        format!(
            "{} values compared across 1/4/8 threads and a repeated run; differing: {differing:?}",
            reference.len()
        ),
    );
}
