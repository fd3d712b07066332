//! Flat `key = value` configuration for rendering and fitting runs.
//!
//! Blank lines and `#` comments are skipped. Later assignments override
//! earlier ones, which is how command-line flags are layered on top of a
//! file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::batching::MeshBatch;
use crate::camera::{Camera, Projection};
use crate::error::{Error, Result};
use crate::geometry::sample_points_from_meshes;
use crate::io::load_obj;
use crate::math::{normalize3, Vec3};
use crate::points::{Compositor, PointRasterSettings};
use crate::raster::RasterSettings;
use crate::shading::{BlendParams, DirectionalLight, Lighting};
use crate::templates::{cube_parts, ico_sphere_parts};

/// `(key, description)` for every scene key.
pub const SCENE_KEYS: &[(&str, &str)] = &[
    ("mesh", "OBJ path, `sphere:<level>` or `cube:<divisions>`"),
    (
        "points",
        "OBJ path (vertices are the points) or `<mesh template>:<count>` surface samples",
    ),
    ("image_size", "square output size in pixels, at least 8"),
    ("k", "faces or points kept per pixel"),
    (
        "blur_radius",
        "squared NDC distance within which faces reach a pixel",
    ),
    ("tile_size", "rasterizer tile edge in pixels"),
    ("radius", "point splat radius in NDC"),
    ("shader", "silhouette, hard or softmax"),
    ("lighting", "flat, gouraud or phong"),
    ("compositor", "alpha or norm"),
    ("sigma", "silhouette sharpness"),
    ("gamma", "softmax depth temperature"),
    ("background", "r,g,b"),
    ("color", "r,g,b used when the geometry carries no colors"),
    ("light_direction", "x,y,z pointing toward the light"),
    ("ambient", "r,g,b"),
    ("diffuse", "r,g,b"),
    ("specular", "r,g,b"),
    ("shininess", "specular exponent"),
    ("eye", "x,y,z camera position"),
    ("target", "x,y,z point the camera looks at"),
    ("up", "x,y,z"),
    ("projection", "perspective or orthographic"),
    ("focal_length", "perspective focal length in NDC units"),
    ("principal_point", "x,y perspective principal point"),
    ("ortho_scale", "x,y orthographic scale"),
    ("znear", "near plane"),
    ("zfar", "far plane"),
    ("seed", "RNG seed for sampled geometry"),
    ("output", "PNG path"),
];

/// `(key, description)` for every fit key.
pub const FIT_KEYS: &[(&str, &str)] = &[
    ("target", "OBJ path, `sphere:<level>` or `cube:<divisions>`"),
    ("target_scale", "uniform scale applied to the target"),
    ("template_level", "ico-sphere level of the initial mesh"),
    ("views", "number of cameras, at least 2"),
    ("distance", "camera distance from the origin"),
    ("focal_length", "perspective focal length in NDC units"),
    ("image_size", "square silhouette size in pixels, at least 8"),
    ("k", "faces kept per pixel"),
    (
        "blur_radius",
        "squared NDC distance within which faces reach a pixel",
    ),
    ("sigma", "silhouette sharpness"),
    ("step", "gradient descent step size"),
    ("iters", "iteration budget"),
    ("lambda_l", "Laplacian weight"),
    ("lambda_e", "edge length weight"),
    ("output", "fitted OBJ path"),
    ("trace", "loss trace CSV path"),
];

/// Parses `key = value` lines.
pub fn parse_key_values(src: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Usage(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let vals: Vec<f64> = v
        .split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect::<Result<_>>()?;
    vals.try_into().map_err(|_| {
        Error::Usage(format!(
            "`{key}` takes {N} comma-separated numbers, got `{v}`"
        ))
    })
}

/// A built-in mesh: `sphere:<level>` or `cube:<divisions>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshTemplate {
    Sphere(usize),
    Cube(usize),
}

impl MeshTemplate {
    pub fn build(&self) -> Result<MeshBatch> {
        let (v, f) = match *self {
            Self::Sphere(level) => ico_sphere_parts(level)?,
            Self::Cube(d) => cube_parts(d, 0.5)?,
        };
        MeshBatch::new(vec![v], vec![f])
    }
}

impl FromStr for MeshTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s.split_once(':').ok_or_else(|| {
            Error::Usage(format!("`{s}` is not a template (sphere:<n> or cube:<n>)"))
        })?;
        let n = parse_num::<usize>(kind, n)?;
        match kind {
            "sphere" => Ok(Self::Sphere(n)),
            "cube" => Ok(Self::Cube(n)),
            _ => Err(Error::Usage(format!(
                "unknown template `{kind}` (sphere, cube)"
            ))),
        }
    }
}

impl fmt::Display for MeshTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere(n) => write!(f, "sphere:{n}"),
            Self::Cube(n) => write!(f, "cube:{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Template(MeshTemplate),
}

impl MeshSource {
    fn parse(s: &str) -> Self {
        match s.parse::<MeshTemplate>() {
            Ok(t) => Self::Template(t),
            Err(_) => Self::File(PathBuf::from(s)),
        }
    }

    /// The mesh and its per-vertex colors, if any.
    pub fn load(&self) -> Result<(MeshBatch, Option<Vec<Vec3>>)> {
        match self {
            Self::File(p) => {
                let obj = load_obj(p)?;
                Ok((obj.mesh, obj.colors))
            }
            Self::Template(t) => Ok((t.build()?, None)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Mesh(MeshSource),
    /// Points from an OBJ's vertices.
    PointFile(PathBuf),
    /// Points sampled uniformly from a template's surface.
    SampledPoints {
        template: MeshTemplate,
        count: usize,
    },
}

impl Geometry {
    pub fn is_points(&self) -> bool {
        !matches!(self, Self::Mesh(_))
    }

    fn parse_points(s: &str) -> Result<Self> {
        if let Some((head, count)) = s.rsplit_once(':') {
            if let Ok(template) = head.parse::<MeshTemplate>() {
                return Ok(Self::SampledPoints {
                    template,
                    count: parse_num("points", count)?,
                });
            }
        }
        Ok(Self::PointFile(PathBuf::from(s)))
    }

    /// Packed points and their per-point colors, if any.
    pub fn load_points(&self, seed: u64) -> Result<(Vec<Vec3>, Option<Vec<Vec3>>)> {
        match self {
            Self::PointFile(p) => {
                let obj = load_obj(p)?;
                Ok((obj.mesh.verts_packed().to_vec(), obj.colors))
            }
            Self::SampledPoints { template, count } => {
                let pc = sample_points_from_meshes(&template.build()?, *count, seed)?;
                Ok((pc.points_packed().to_vec(), None))
            }
            Self::Mesh(_) => Err(Error::Usage("scene geometry is a mesh, not points".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shader {
    Silhouette,
    Hard,
    Softmax,
}

impl FromStr for Shader {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silhouette" => Ok(Self::Silhouette),
            "hard" => Ok(Self::Hard),
            "softmax" => Ok(Self::Softmax),
            _ => Err(Error::Usage(format!(
                "unknown shader `{s}` (silhouette, hard, softmax)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraConfig {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub projection: Projection,
    pub znear: f64,
    pub zfar: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            eye: [0.0, 0.0, -3.0],
            target: [0.0; 3],
            up: [0.0, 1.0, 0.0],
            projection: Projection::Perspective {
                focal_length: 1.8,
                principal_point: [0.0, 0.0],
            },
            znear: 0.1,
            zfar: 100.0,
        }
    }
}

impl CameraConfig {
    pub fn camera(&self) -> Result<Camera> {
        Camera::look_at(
            self.eye,
            self.target,
            self.up,
            self.projection,
            self.znear,
            self.zfar,
        )
    }

    fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "eye" => self.eye = parse_list(key, v)?,
            "target" => self.target = parse_list(key, v)?,
            "up" => self.up = parse_list(key, v)?,
            "znear" => self.znear = parse_num(key, v)?,
            "zfar" => self.zfar = parse_num(key, v)?,
            "projection" => {
                self.projection = match (v, self.projection) {
                    ("perspective", p @ Projection::Perspective { .. }) => p,
                    ("perspective", _) => CameraConfig::default().projection,
                    ("orthographic", p @ Projection::Orthographic { .. }) => p,
                    ("orthographic", _) => Projection::Orthographic { scale: [0.5, 0.5] },
                    _ => {
                        return Err(Error::Usage(format!(
                            "unknown projection `{v}` (perspective, orthographic)"
                        )))
                    }
                }
            }
            "focal_length" | "principal_point" => {
                let Projection::Perspective {
                    mut focal_length,
                    mut principal_point,
                } = self.projection
                else {
                    return Err(Error::Usage(format!(
                        "`{key}` needs projection = perspective"
                    )));
                };
                if key == "focal_length" {
                    focal_length = parse_num(key, v)?;
                } else {
                    principal_point = parse_list(key, v)?;
                }
                self.projection = Projection::Perspective {
                    focal_length,
                    principal_point,
                };
            }
            "ortho_scale" => {
                if !matches!(self.projection, Projection::Orthographic { .. }) {
                    return Err(Error::Usage(
                        "`ortho_scale` needs projection = orthographic".into(),
                    ));
                }
                self.projection = Projection::Orthographic {
                    scale: parse_list(key, v)?,
                };
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Everything needed to render one image.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub geometry: Geometry,
    pub camera: CameraConfig,
    pub raster: RasterSettings,
    pub point_radius: f64,
    pub shader: Shader,
    pub lighting: Lighting,
    pub compositor: Compositor,
    pub blend: BlendParams,
    pub color: Vec3,
    pub light: DirectionalLight,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::Mesh(MeshSource::Template(MeshTemplate::Sphere(2))),
            camera: CameraConfig::default(),
            raster: RasterSettings {
                image_size: (64, 64),
                faces_per_pixel: 8,
                blur_radius: 1e-4,
                tile_size: 16,
            },
            point_radius: 0.05,
            shader: Shader::Softmax,
            lighting: Lighting::Phong,
            compositor: Compositor::Alpha,
            blend: BlendParams::default(),
            color: [0.8, 0.8, 0.8],
            light: DirectionalLight::default(),
            seed: 0,
            output: PathBuf::from("render.png"),
        }
    }
}

impl SceneConfig {
    /// Applies `key = value` pairs over the defaults and validates.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        let mut mesh = None;
        let mut points = None;
        for (k, v) in pairs {
            match k.as_str() {
                "mesh" => mesh = Some(MeshSource::parse(v)),
                "points" => points = Some(Geometry::parse_points(v)?),
                _ => c.set(k, v)?,
            }
        }
        c.geometry = match (mesh, points) {
            (Some(_), Some(_)) => {
                return Err(Error::Usage(
                    "set exactly one of `mesh` and `points`".into(),
                ))
            }
            (Some(m), None) => Geometry::Mesh(m),
            (None, Some(p)) => p,
            (None, None) => c.geometry,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_str_config(src: &str) -> Result<Self> {
        Self::from_pairs(&parse_key_values(src)?)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if self.camera.set(key, v)? {
            return Ok(());
        }
        match key {
            "image_size" => {
                let n = parse_num(key, v)?;
                self.raster.image_size = (n, n);
            }
            "k" => self.raster.faces_per_pixel = parse_num(key, v)?,
            "blur_radius" => self.raster.blur_radius = parse_num(key, v)?,
            "tile_size" => self.raster.tile_size = parse_num(key, v)?,
            "radius" => self.point_radius = parse_num(key, v)?,
            "shader" => self.shader = v.parse()?,
            "lighting" => self.lighting = v.parse()?,
            "compositor" => self.compositor = v.parse()?,
            "sigma" => self.blend.sigma = parse_num(key, v)?,
            "gamma" => self.blend.gamma = parse_num(key, v)?,
            "background" => self.blend.background_color = parse_list(key, v)?,
            "color" => self.color = parse_list(key, v)?,
            "light_direction" => {
                self.light.direction = normalize3(parse_list(key, v)?)
                    .ok_or_else(|| Error::InvalidParameter("light direction is zero".into()))?
            }
            "ambient" => self.light.ambient = parse_list(key, v)?,
            "diffuse" => self.light.diffuse = parse_list(key, v)?,
            "specular" => self.light.specular = parse_list(key, v)?,
            "shininess" => self.light.shininess = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            _ => return Err(Error::Usage(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn point_settings(&self) -> PointRasterSettings {
        PointRasterSettings {
            image_size: self.raster.image_size,
            points_per_pixel: self.raster.faces_per_pixel,
            radius: self.point_radius,
            tile_size: self.raster.tile_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.raster.image_size;
        if h < 8 || w < 8 {
            return Err(Error::Usage(format!(
                "image size must be at least 8, got {h}×{w}"
            )));
        }
        if self.geometry.is_points() {
            self.point_settings().validate()?;
        } else {
            self.raster.validate()?;
        }
        self.blend.validate()?;
        self.light.validate()?;
        self.camera.camera()?;
        Ok(())
    }
}

/// Multi-view silhouette fitting of an ico-sphere to a target mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub target: MeshSource,
    pub target_scale: f64,
    pub template_level: usize,
    pub views: usize,
    pub distance: f64,
    pub focal_length: f64,
    pub raster: RasterSettings,
    pub sigma: f64,
    pub step: f64,
    pub iters: usize,
    pub lambda_l: f64,
    pub lambda_e: f64,
    pub output: PathBuf,
    pub trace: PathBuf,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            target: MeshSource::Template(MeshTemplate::Sphere(2)),
            target_scale: 0.7,
            template_level: 2,
            views: 2,
            distance: 3.0,
            focal_length: 1.8,
            raster: RasterSettings {
                image_size: (64, 64),
                faces_per_pixel: 8,
                blur_radius: 1e-4,
                tile_size: 16,
            },
            sigma: 1e-5,
            step: 0.3,
            iters: 400,
            lambda_l: 19.0,
            lambda_e: 0.2,
            output: PathBuf::from("fit.obj"),
            trace: PathBuf::from("fit.csv"),
        }
    }
}

impl FitConfig {
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_str_config(src: &str) -> Result<Self> {
        Self::from_pairs(&parse_key_values(src)?)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "target" => self.target = MeshSource::parse(v),
            "target_scale" => self.target_scale = parse_num(key, v)?,
            "template_level" => self.template_level = parse_num(key, v)?,
            "views" => self.views = parse_num(key, v)?,
            "distance" => self.distance = parse_num(key, v)?,
            "focal_length" => self.focal_length = parse_num(key, v)?,
            "image_size" => {
                let n = parse_num(key, v)?;
                self.raster.image_size = (n, n);
            }
            "k" => self.raster.faces_per_pixel = parse_num(key, v)?,
            "blur_radius" => self.raster.blur_radius = parse_num(key, v)?,
            "sigma" => self.sigma = parse_num(key, v)?,
            "step" => self.step = parse_num(key, v)?,
            "iters" => self.iters = parse_num(key, v)?,
            "lambda_l" => self.lambda_l = parse_num(key, v)?,
            "lambda_e" => self.lambda_e = parse_num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "trace" => self.trace = PathBuf::from(v),
            _ => return Err(Error::Usage(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(Error::Usage(format!(
                "fitting needs at least 2 views, got {}",
                self.views
            )));
        }
        let (h, w) = self.raster.image_size;
        if h < 8 || w < 8 {
            return Err(Error::Usage(format!(
                "image size must be at least 8, got {h}×{w}"
            )));
        }
        for (name, v) in [("lambda_l", self.lambda_l), ("lambda_e", self.lambda_e)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Range {
                    what: if name == "lambda_l" {
                        "lambda_l"
                    } else {
                        "lambda_e"
                    },
                    value: v,
                    allowed: "finite and ≥ 0",
                });
            }
        }
        for (what, v) in [
            ("step", self.step),
            ("target_scale", self.target_scale),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )));
            }
        }
        if !(self.distance > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "distance must exceed 1, got {}",
                self.distance
            )));
        }
        self.raster.validate()?;
        self.cameras()?;
        Ok(())
    }

    /// Known view poses: azimuths spread over half a turn, alternating
    /// elevations, all looking at the origin.
    pub fn cameras(&self) -> Result<Vec<Camera>> {
        (0..self.views)
            .map(|i| {
                let az = (20.0 + 180.0 * i as f64 / self.views as f64).to_radians();
                let el = if i % 2 == 0 { 10f64 } else { 30f64 }.to_radians();
                let eye = [
                    self.distance * el.cos() * az.sin(),
                    self.distance * el.sin(),
                    -self.distance * el.cos() * az.cos(),
                ];
                Camera::look_at(
                    eye,
                    [0.0; 3],
                    [0.0, 1.0, 0.0],
                    Projection::Perspective {
                        focal_length: self.focal_length,
                        principal_point: [0.0, 0.0],
                    },
                    0.1,
                    10.0 * self.distance,
                )
            })
            .collect()
    }
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    parse_key_values(&std::fs::read_to_string(path)?)
}
