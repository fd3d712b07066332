//! Rigid world-to-view transforms and orthographic/perspective projection.
//!
//! Conventions: the camera looks down `+z` in view space, `+y` is up in NDC
//! and `+x` is right. NDC spans `[-1, 1]` on both axes; pixel `(i, j)` (row,
//! column) has its center at
//! `x = (2j + 1)/W - 1`, `y = 1 - (2i + 1)/H`.
//! Projection keeps the view-space depth as the third coordinate.

use crate::error::{Error, Result};
use crate::math::{
    add3, cross3, mat_mul, mat_t_vec, mat_vec, normalize3, sub3, transpose, Mat3, Vec2, Vec3,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Orthographic {
        scale: Vec2,
    },
    Perspective {
        focal_length: f64,
        principal_point: Vec2,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    rotation: Mat3,
    translation: Vec3,
    projection: Projection,
    znear: f64,
    zfar: f64,
}

impl Camera {
    pub fn new(
        rotation: Mat3,
        translation: Vec3,
        projection: Projection,
        znear: f64,
        zfar: f64,
    ) -> Result<Self> {
        let rtr = mat_mul(&transpose(&rotation), &rotation);
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (v - expect).abs() > 1e-6 {
                    return Err(Error::InvalidParameter(
                        "camera rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        if !(znear > 0.0 && znear < zfar) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < znear < zfar, got znear={znear}, zfar={zfar}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
            projection,
            znear,
            zfar,
        })
    }

    /// Camera at `eye` looking at `target`; `up` fixes the roll.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        projection: Projection,
        znear: f64,
        zfar: f64,
    ) -> Result<Self> {
        let z = normalize3(sub3(target, eye))
            .ok_or_else(|| Error::InvalidParameter("eye coincides with target".into()))?;
        let x = normalize3(cross3(up, z)).ok_or_else(|| {
            Error::InvalidParameter("up is parallel to the view direction".into())
        })?;
        let y = cross3(z, x);
        let rotation = [x, y, z];
        let t = mat_vec(&rotation, eye);
        Self::new(rotation, [-t[0], -t[1], -t[2]], projection, znear, zfar)
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn znear(&self) -> f64 {
        self.znear
    }

    pub fn zfar(&self) -> f64 {
        self.zfar
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        let c = mat_t_vec(&self.rotation, self.translation);
        [-c[0], -c[1], -c[2]]
    }

    pub fn world_to_view(&self, p: Vec3) -> Vec3 {
        add3(mat_vec(&self.rotation, p), self.translation)
    }

    pub fn view_to_world(&self, v: Vec3) -> Vec3 {
        mat_t_vec(&self.rotation, sub3(v, self.translation))
    }

    /// `None` when a perspective camera sees the point at `z <= 0`.
    pub fn view_to_ndc(&self, v: Vec3) -> Option<Vec3> {
        match self.projection {
            Projection::Orthographic { scale } => Some([scale[0] * v[0], scale[1] * v[1], v[2]]),
            Projection::Perspective {
                focal_length: f,
                principal_point: c,
            } => {
                if v[2] <= 0.0 {
                    None
                } else {
                    Some([f * v[0] / v[2] + c[0], f * v[1] / v[2] + c[1], v[2]])
                }
            }
        }
    }

    pub fn project(&self, p: Vec3) -> Option<Vec3> {
        self.view_to_ndc(self.world_to_view(p))
    }

    /// Pulls a cotangent on `(ndc_x, ndc_y, view_z)` back to view space.
    pub fn view_to_ndc_vjp(&self, v: Vec3, g: Vec3) -> Vec3 {
        match self.projection {
            Projection::Orthographic { scale } => [scale[0] * g[0], scale[1] * g[1], g[2]],
            Projection::Perspective {
                focal_length: f, ..
            } => {
                let iz = 1.0 / v[2];
                [
                    f * iz * g[0],
                    f * iz * g[1],
                    g[2] - f * v[0] * iz * iz * g[0] - f * v[1] * iz * iz * g[1],
                ]
            }
        }
    }

    /// Pulls a cotangent on the projected point back to world space.
    pub fn project_vjp(&self, p: Vec3, g: Vec3) -> Vec3 {
        let v = self.world_to_view(p);
        mat_t_vec(&self.rotation, self.view_to_ndc_vjp(v, g))
    }
}

/// Continuous pixel coordinates `(row, col)` of an NDC point; pixel `(i, j)`
/// covers `[i, i+1) × [j, j+1)`.
pub fn ndc_to_screen(height: usize, width: usize, ndc: Vec2) -> Vec2 {
    [
        (1.0 - ndc[1]) * height as f64 / 2.0,
        (ndc[0] + 1.0) * width as f64 / 2.0,
    ]
}

pub fn screen_to_ndc(height: usize, width: usize, rc: Vec2) -> Vec2 {
    [
        2.0 * rc[1] / width as f64 - 1.0,
        1.0 - 2.0 * rc[0] / height as f64,
    ]
}

/// NDC `(x, y)` of the center of pixel `(row, col)`.
#[inline]
pub fn pixel_center_ndc(height: usize, width: usize, row: usize, col: usize) -> Vec2 {
    [
        (2 * col + 1) as f64 / width as f64 - 1.0,
        1.0 - (2 * row + 1) as f64 / height as f64,
    ]
}

/// Unit vector pointing from the scene toward the camera, in world space.
pub fn view_direction_world(camera: &Camera) -> Vec3 {
    let f = mat_t_vec(camera.rotation(), [0.0, 0.0, 1.0]);
    [-f[0], -f[1], -f[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{axis_angle, dot3};
    use rand::{Rng, SeedableRng};

    fn distance(a: Vec3, b: Vec3) -> f64 {
        let d = sub3(a, b);
        dot3(d, d).sqrt()
    }

    const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn persp(f: f64) -> Projection {
        Projection::Perspective {
            focal_length: f,
            principal_point: [0.0, 0.0],
        }
    }

    fn random_camera(rng: &mut impl Rng) -> Camera {
        let axis = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r = axis_angle(axis, rng.gen_range(-3.0..3.0));
        let t = [
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ];
        Camera::new(r, t, persp(1.7), 0.1, 100.0).unwrap()
    }

    #[test]
    fn identity_and_translation() {
        let c = Camera::new(IDENTITY, [0.0; 3], persp(1.0), 0.1, 10.0).unwrap();
        assert_eq!(c.world_to_view([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        let c = Camera::new(IDENTITY, [0.0, 0.0, 2.0], persp(1.0), 0.1, 10.0).unwrap();
        assert_eq!(c.world_to_view([0.0; 3]), [0.0, 0.0, 2.0]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut r = IDENTITY;
        r[0][0] = 1.1;
        assert!(Camera::new(r, [0.0; 3], persp(1.0), 0.1, 10.0).is_err());
        assert!(Camera::new(IDENTITY, [0.0; 3], persp(1.0), 0.0, 10.0).is_err());
        assert!(Camera::new(IDENTITY, [0.0; 3], persp(1.0), 5.0, 1.0).is_err());
    }

    #[test]
    fn round_trip_and_rigidity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = random_camera(&mut rng);
            let p: Vec3 = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let q: Vec3 = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let back = c.view_to_world(c.world_to_view(p));
            for k in 0..3 {
                assert!((back[k] - p[k]).abs() < 1e-9);
            }
            let d0 = distance(p, q);
            let d1 = distance(c.world_to_view(p), c.world_to_view(q));
            assert!((d0 - d1).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_examples() {
        let c = Camera::new(IDENTITY, [0.0; 3], persp(2.0), 0.1, 10.0).unwrap();
        assert_eq!(c.view_to_ndc([0.0, 0.0, 3.0]).unwrap()[..2], [0.0, 0.0]);
        assert_eq!(c.view_to_ndc([1.0, 1.0, 2.0]).unwrap(), [1.0, 1.0, 2.0]);
        assert!(c.view_to_ndc([1.0, 1.0, 0.0]).is_none());
        assert!(c.view_to_ndc([1.0, 1.0, -1.0]).is_none());
        let o = Camera::new(
            IDENTITY,
            [0.0; 3],
            Projection::Orthographic { scale: [1.0, 1.0] },
            0.1,
            10.0,
        )
        .unwrap();
        assert_eq!(o.view_to_ndc([0.3, -0.4, 5.0]).unwrap(), [0.3, -0.4, 5.0]);
    }

    #[test]
    fn perspective_is_scale_invariant_along_rays() {
        let c = Camera::new(IDENTITY, [0.0; 3], persp(1.3), 0.1, 10.0).unwrap();
        let p = [0.4, -0.7, 2.5];
        let a = c.view_to_ndc(p).unwrap();
        for lambda in [0.3, 1.0, 4.0] {
            let b = c
                .view_to_ndc([p[0] * lambda, p[1] * lambda, p[2] * lambda])
                .unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn screen_mapping() {
        assert_eq!(ndc_to_screen(64, 64, [0.0, 0.0]), [32.0, 32.0]);
        assert_eq!(ndc_to_screen(64, 64, [-1.0, 1.0]), [0.0, 0.0]);
        let c = pixel_center_ndc(64, 64, 0, 0);
        assert_eq!(ndc_to_screen(64, 64, c), [0.5, 0.5]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rc = [rng.gen_range(0.0..48.0), rng.gen_range(0.0..80.0)];
            let back = ndc_to_screen(48, 80, screen_to_ndc(48, 80, rc));
            assert!((back[0] - rc[0]).abs() < 1e-9 && (back[1] - rc[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn look_at_puts_target_on_axis() {
        let c = Camera::look_at(
            [0.0, 0.0, -3.0],
            [0.0; 3],
            [0.0, 1.0, 0.0],
            persp(1.0),
            0.1,
            10.0,
        )
        .unwrap();
        assert_eq!(c.world_to_view([0.0; 3]), [0.0, 0.0, 3.0]);
        // +y world maps to +y NDC and +x world to +x NDC for this placement
        assert!(c.project([0.0, 1.0, 0.0]).unwrap()[1] > 0.0);
        assert!(c.project([1.0, 0.0, 0.0]).unwrap()[0] > 0.0);
        let center = c.center();
        assert!((center[2] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = Camera::look_at(
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), -4.0],
                [0.0; 3],
                [0.0, 1.0, 0.0],
                persp(1.5),
                0.1,
                10.0,
            )
            .unwrap();
            let p: Vec3 = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            for out in 0..3 {
                let mut g = [0.0; 3];
                g[out] = 1.0;
                let analytic = c.project_vjp(p, g);
                for k in 0..3 {
                    let h = 1e-6;
                    let mut pp = p;
                    let mut pm = p;
                    pp[k] += h;
                    pm[k] -= h;
                    let fd =
                        (c.project(pp).unwrap()[out] - c.project(pm).unwrap()[out]) / (2.0 * h);
                    let denom = fd.abs().max(analytic[k].abs()).max(1e-8);
                    assert!(
                        (fd - analytic[k]).abs() / denom < 1e-5,
                        "{fd} vs {}",
                        analytic[k]
                    );
                }
            }
        }
    }
}
