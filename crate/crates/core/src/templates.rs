//! Procedural meshes: subdivided icospheres, subdivided cubes, and
//! synthetic heterogeneous batches drawn from a ladder of both.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batching::{Face, MeshBatch};
use crate::error::{Error, Result};
use crate::math::{cross3, dot3, normalize3, sub3, Vec3};

pub const MAX_ICO_LEVEL: usize = 6;
const MAX_SUBDIVISIONS: usize = MAX_ICO_LEVEL + 1;
pub const MAX_CUBE_DIVISIONS: usize = 80;

/// Icosahedron on the unit sphere, midpoint-subdivided `subdivisions` times
/// with shared midpoints deduplicated and every new vertex reprojected.
/// Winding is outward. Yields `10·4ⁿ + 2` vertices and `20·4ⁿ` faces.
pub fn subdivided_icosahedron(subdivisions: usize) -> Result<(Vec<Vec3>, Vec<Face>)> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::Range {
            what: "icosahedron subdivisions",
            value: subdivisions as f64,
            allowed: "[0, 7]",
        });
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| normalize3(v).expect("nonzero"))
    .collect();
    let mut faces: Vec<Face> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(faces.len() * 3 / 2);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                let m = [
                    (p[0] + q[0]) / 2.0,
                    (p[1] + q[1]) / 2.0,
                    (p[2] + q[2]) / 2.0,
                ];
                verts.push(normalize3(m).expect("midpoint of distinct sphere points"));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok((verts, faces))
}

/// Vertices and faces of [`ico_sphere`].
pub fn ico_sphere_parts(level: usize) -> Result<(Vec<Vec3>, Vec<Face>)> {
    if level > MAX_ICO_LEVEL {
        return Err(Error::Range {
            what: "ico_sphere level",
            value: level as f64,
            allowed: "[0, 6]",
        });
    }
    subdivided_icosahedron(level + 1)
}

/// Single-mesh batch holding a unit icosphere with `10·4^(level+1) + 2`
/// vertices: level 0 has 42, level 2 has 642 (1280 faces), level 3 has 2562
/// (5120 faces). The bare icosahedron is [`subdivided_icosahedron`]`(0)`.
pub fn ico_sphere(level: usize) -> Result<MeshBatch> {
    let (v, f) = ico_sphere_parts(level)?;
    MeshBatch::new(vec![v], vec![f])
}

/// Axis-aligned cube `[-h, h]³` with each side split into `n × n` quads.
pub fn cube_parts(divisions: usize, half_extent: f64) -> Result<(Vec<Vec3>, Vec<Face>)> {
    if divisions == 0 || divisions > MAX_CUBE_DIVISIONS {
        return Err(Error::Range {
            what: "cube divisions",
            value: divisions as f64,
            allowed: "[1, 80]",
        });
    }
    if !(half_extent > 0.0 && half_extent.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half extent must be positive, got {half_extent}"
        )));
    }
    let n = divisions;
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut verts = Vec::new();
    let mut vid = |lattice: [usize; 3], verts: &mut Vec<Vec3>| -> usize {
        *index.entry(lattice).or_insert_with(|| {
            verts.push(lattice.map(|c| (2.0 * c as f64 / n as f64 - 1.0) * half_extent));
            verts.len() - 1
        })
    };
    let mut faces = Vec::with_capacity(12 * n * n);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            let mut outward = [0.0; 3];
            outward[axis] = if side == 0 { -1.0 } else { 1.0 };
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut l = [0; 3];
                        l[axis] = side;
                        l[u] = i + di;
                        l[v] = j + dj;
                        l
                    };
                    let q = [
                        vid(corner(0, 0), &mut verts),
                        vid(corner(1, 0), &mut verts),
                        vid(corner(1, 1), &mut verts),
                        vid(corner(0, 1), &mut verts),
                    ];
                    for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                        let nrm = cross3(
                            sub3(verts[tri[1]], verts[tri[0]]),
                            sub3(verts[tri[2]], verts[tri[0]]),
                        );
                        faces.push(if dot3(nrm, outward) > 0.0 {
                            tri
                        } else {
                            [tri[0], tri[2], tri[1]]
                        });
                    }
                }
            }
        }
    }
    Ok((verts, faces))
}

/// Single-mesh batch holding the cube of side 1 centered at the origin.
pub fn unit_cube(divisions: usize) -> Result<MeshBatch> {
    let (v, f) = cube_parts(divisions, 0.5)?;
    MeshBatch::new(vec![v], vec![f])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Template {
    Sphere { subdivisions: usize },
    Cube { divisions: usize },
}

impl Template {
    pub fn num_faces(&self) -> usize {
        match *self {
            Template::Sphere { subdivisions } => 20 << (2 * subdivisions),
            Template::Cube { divisions } => 12 * divisions * divisions,
        }
    }

    pub fn parts(&self) -> Result<(Vec<Vec3>, Vec<Face>)> {
        match *self {
            Template::Sphere { subdivisions } => subdivided_icosahedron(subdivisions),
            Template::Cube { divisions } => cube_parts(divisions, 1.0),
        }
    }
}

/// All generator sizes, ascending by face count.
pub fn template_ladder() -> Vec<Template> {
    let mut out: Vec<Template> = (0..=MAX_ICO_LEVEL)
        .map(|subdivisions| Template::Sphere { subdivisions })
        .chain((1..=MAX_CUBE_DIVISIONS).map(|divisions| Template::Cube { divisions }))
        .collect();
    out.sort_by_key(|t| t.num_faces());
    out
}

/// Template whose face count is nearest `target`; ties go to the smaller.
pub fn closest_template(target: f64) -> Template {
    let ladder = template_ladder();
    *ladder
        .iter()
        .min_by(|a, b| {
            let da = (a.num_faces() as f64 - target).abs();
            let db = (b.num_faces() as f64 - target).abs();
            da.total_cmp(&db)
        })
        .expect("ladder is non-empty")
}

/// Per-element target face counts, uniform with the given mean and
/// standard deviation.
pub fn synthetic_face_targets(
    mean_faces: f64,
    sigma: f64,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(mean_faces > 0.0 && mean_faces.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean_faces must be positive, got {mean_faces}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be ≥ 0, got {sigma}"
        )));
    }
    if batch_size == 0 {
        return Err(Error::EmptyInput("batch_size must be at least 1".into()));
    }
    if sigma == 0.0 {
        return Ok(vec![mean_faces; batch_size]);
    }
    let half_width = 3f64.sqrt() * sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..batch_size)
        .map(|_| rng.gen_range(mean_faces - half_width..=mean_faces + half_width))
        .collect())
}

/// Heterogeneous batch of spheres and cubes whose face counts follow
/// [`synthetic_face_targets`]. With `sigma = 0` every element is the same mesh.
pub fn synthetic_batch(
    mean_faces: f64,
    sigma: f64,
    batch_size: usize,
    seed: u64,
) -> Result<MeshBatch> {
    let targets = synthetic_face_targets(mean_faces, sigma, batch_size, seed)?;
    let mut verts = Vec::with_capacity(batch_size);
    let mut faces = Vec::with_capacity(batch_size);
    let mut cache: HashMap<Template, (Vec<Vec3>, Vec<Face>)> = HashMap::new();
    for t in targets {
        let template = closest_template(t);
        let parts = match cache.get(&template) {
            Some(p) => p.clone(),
            None => {
                let p = template.parts()?;
                cache.insert(template, p.clone());
                p
            }
        };
        verts.push(parts.0);
        faces.push(parts.1);
    }
    MeshBatch::new(verts, faces)
}
