//! 2D triangle primitives in NDC: barycentrics, signed boundary distance, and
//! their vector-Jacobian products.

use crate::math::Vec2;

/// Triangles with `|2·area|` below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// Twice the signed area of `(a, b, p)`; positive when counter-clockwise.
#[inline]
pub fn edge_fn(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Returns cotangents for `(a, b, p)`.
#[inline]
fn edge_fn_vjp(a: Vec2, b: Vec2, p: Vec2, g: f64) -> (Vec2, Vec2, Vec2) {
    (
        [g * (b[1] - p[1]), g * (p[0] - b[0])],
        [g * (p[1] - a[1]), -g * (p[0] - a[0])],
        [-g * (b[1] - a[1]), g * (b[0] - a[0])],
    )
}

/// Affine barycentric coordinates of `p`, or `None` for a degenerate triangle.
#[inline]
pub fn barycentric_coords(p: Vec2, tri: &[Vec2; 3]) -> Option<[f64; 3]> {
    let area = edge_fn(tri[0], tri[1], tri[2]);
    if !(area.abs() >= DEGENERATE_AREA) {
        return None;
    }
    Some([
        edge_fn(tri[1], tri[2], p) / area,
        edge_fn(tri[2], tri[0], p) / area,
        edge_fn(tri[0], tri[1], p) / area,
    ])
}

/// Pulls a cotangent on the barycentrics back to the triangle's vertices.
pub fn barycentric_vjp(p: Vec2, tri: &[Vec2; 3], g: [f64; 3]) -> [Vec2; 3] {
    let area = edge_fn(tri[0], tri[1], tri[2]);
    let e = [
        edge_fn(tri[1], tri[2], p),
        edge_fn(tri[2], tri[0], p),
        edge_fn(tri[0], tri[1], p),
    ];
    let g_area = -(g[0] * e[0] + g[1] * e[1] + g[2] * e[2]) / (area * area);
    let mut out = [[0.0; 2]; 3];
    let mut add = |i: usize, v: Vec2| {
        out[i][0] += v[0];
        out[i][1] += v[1];
    };
    for (k, (ia, ib)) in [(1usize, 2usize), (2, 0), (0, 1)].into_iter().enumerate() {
        let (ga, gb, _) = edge_fn_vjp(tri[ia], tri[ib], p, g[k] / area);
        add(ia, ga);
        add(ib, gb);
    }
    let (g0, g1, g2) = edge_fn_vjp(tri[0], tri[1], tri[2], g_area);
    add(0, g0);
    add(1, g1);
    add(2, g2);
    out
}

/// Each weight clamped to `[0, 1]`, then renormalized to sum to one.
#[inline]
pub fn clamp_barycentrics(w: [f64; 3]) -> [f64; 3] {
    let c = [
        w[0].clamp(0.0, 1.0),
        w[1].clamp(0.0, 1.0),
        w[2].clamp(0.0, 1.0),
    ];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

pub fn clamp_barycentrics_vjp(w: [f64; 3], g: [f64; 3]) -> [f64; 3] {
    let c = [
        w[0].clamp(0.0, 1.0),
        w[1].clamp(0.0, 1.0),
        w[2].clamp(0.0, 1.0),
    ];
    let s = c[0] + c[1] + c[2];
    let gc = (g[0] * c[0] + g[1] * c[1] + g[2] * c[2]) / (s * s);
    let mut out = [0.0; 3];
    for i in 0..3 {
        if w[i] > 0.0 && w[i] < 1.0 {
            out[i] = g[i] / s - gc;
        }
    }
    out
}

/// Squared distance from `p` to segment `ab`, with the segment parameter of
/// the closest point.
#[inline]
pub fn segment_dist2(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1], t)
}

/// Nearest boundary edge `(index, squared distance, segment parameter)`;
/// edge `k` runs from vertex `k` to vertex `(k + 1) % 3`. Ties go to the lower
/// edge index.
#[inline]
pub fn nearest_edge(p: Vec2, tri: &[Vec2; 3]) -> (usize, f64, f64) {
    let mut best = (0, f64::INFINITY, 0.0);
    for k in 0..3 {
        let (d2, t) = segment_dist2(p, tri[k], tri[(k + 1) % 3]);
        if d2 < best.1 {
            best = (k, d2, t);
        }
    }
    best
}

/// Signed squared distance from `p` to the triangle boundary: negative
/// strictly inside, zero on the boundary, positive outside. Degenerate
/// triangles are treated as segments and never report inside.
pub fn point_triangle_dist2(p: Vec2, tri: &[Vec2; 3]) -> f64 {
    let (_, d2, _) = nearest_edge(p, tri);
    match barycentric_coords(p, tri) {
        Some(w) if w[0] > 0.0 && w[1] > 0.0 && w[2] > 0.0 => -d2,
        _ => d2,
    }
}

/// Cotangent of the (unsigned) squared distance to edge `k`, pulled back to
/// the triangle's vertices. The closest point's parameter is held at its
/// optimum, whose derivative vanishes.
pub fn edge_dist2_vjp(p: Vec2, tri: &[Vec2; 3], edge: usize, t: f64, g: f64) -> [Vec2; 3] {
    let a = tri[edge];
    let b = tri[(edge + 1) % 3];
    let d = [
        p[0] - a[0] - t * (b[0] - a[0]),
        p[1] - a[1] - t * (b[1] - a[1]),
    ];
    let mut out = [[0.0; 2]; 3];
    out[edge] = [-2.0 * g * d[0] * (1.0 - t), -2.0 * g * d[1] * (1.0 - t)];
    let nb = (edge + 1) % 3;
    out[nb] = [-2.0 * g * d[0] * t, -2.0 * g * d[1] * t];
    out
}
