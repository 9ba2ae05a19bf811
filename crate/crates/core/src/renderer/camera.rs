use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Largest accepted camera coordinate or extent, world units.
pub const MAX_COORD: f64 = 1e9;

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn normalize(a: Vec3) -> Option<Vec3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12 && n.is_finite()).then(|| a.map(|v| v / n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// `f_norm` is the focal length over half the image width.
    Pinhole { f_norm: f64 },
    /// Parallel rays; `half_width` is half the image width in world units.
    Orthographic { half_width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

/// Camera frame: image columns grow along `right`, rows along `down`, and
/// the optical axis is `forward`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
    pub projection: Projection,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn look_at(position: Vec3, target: Vec3, up: Vec3, projection: Projection, near: f64, far: f64) -> Result<Self> {
        let bad = || Error::InvalidArgument("degenerate look-at: target coincides with position or is parallel to up".into());
        let forward = normalize([target[0] - position[0], target[1] - position[1], target[2] - position[2]]).ok_or_else(bad)?;
        let right = normalize(cross(forward, up)).ok_or_else(bad)?;
        let down = cross(forward, right);
        let cam = Self { position, right, down, forward, projection, near, far };
        cam.validate()?;
        Ok(cam)
    }

    /// Looking straight down from height `z` over `(x, y)`, image rows running toward -y.
    pub fn top_down(x: f64, y: f64, z: f64, half_width: f64, near: f64, far: f64) -> Result<Self> {
        Self::look_at([x, y, z], [x, y, z - 1.0], [0.0, 1.0, 0.0], Projection::Orthographic { half_width }, near, far)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.far > self.near && self.far.is_finite()) {
            return Err(Error::InvalidArgument(format!("need 0 < near < far, got {} and {}", self.near, self.far)));
        }
        // Bounds keep every ray finite.
        if !self.position.iter().all(|v| v.abs() <= MAX_COORD) || self.far > MAX_COORD {
            return Err(Error::InvalidArgument(format!("camera coordinates must stay within {MAX_COORD:e}")));
        }
        match self.projection {
            Projection::Pinhole { f_norm } if !(1e-6..=1e6).contains(&f_norm) => {
                return Err(Error::InvalidArgument(format!("f_norm must lie in [1e-6, 1e6], got {f_norm}")));
            }
            Projection::Orthographic { half_width } if !(half_width > 0.0 && half_width <= MAX_COORD) => {
                return Err(Error::InvalidArgument(format!("half_width must lie in (0, {MAX_COORD:e}], got {half_width}")));
            }
            _ => {}
        }
        let basis = [self.right, self.down, self.forward];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(basis[i], basis[j]) - want).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("camera basis is not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    pub fn translated(&self, t: Vec3) -> Self {
        Self { position: [self.position[0] + t[0], self.position[1] + t[1], self.position[2] + t[2]], ..*self }
    }

    /// Ray through continuous image coordinates `(x, y)` of a `w x h` image;
    /// pixel `(r, c)` has its center at `(c + 0.5, r + 0.5)`.
    pub fn ray_at(&self, w: usize, h: usize, x: f64, y: f64) -> Ray {
        let u = 2.0 * x / w as f64 - 1.0;
        let v = (2.0 * y / h as f64 - 1.0) * (h as f64 / w as f64);
        let along = |a: f64, b: f64, c: f64| -> Vec3 {
            [0, 1, 2].map(|i| a * self.right[i] + b * self.down[i] + c * self.forward[i])
        };
        match self.projection {
            Projection::Pinhole { f_norm } => {
                let d = along(u / f_norm, v / f_norm, 1.0);
                Ray { origin: self.position, direction: normalize(d).expect("forward component is 1") }
            }
            Projection::Orthographic { half_width } => {
                let o = along(u * half_width, v * half_width, 0.0);
                Ray { origin: [0, 1, 2].map(|i| self.position[i] + o[i]), direction: self.forward }
            }
        }
    }
}

/// One ray per pixel center, row-major.
pub fn make_rays(cam: &Camera, w: usize, h: usize) -> Vec<Ray> {
    let mut rays = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            rays.push(cam.ray_at(w, h, c as f64 + 0.5, r as f64 + 0.5));
        }
    }
    rays
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pinhole(f_norm: f64) -> Camera {
        Camera::look_at([0.0, 0.0, 2.0], [0.0, 5.0, 0.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm }, 0.1, 20.0).unwrap()
    }

    #[test]
    fn center_pixel_looks_down_the_axis() {
        let cam = pinhole(1.3);
        let rays = make_rays(&cam, 5, 3);
        let d = rays[5 + 2].direction;
        for i in 0..3 {
            assert!((d[i] - cam.forward[i]).abs() < 1e-15);
        }
        assert!(rays.iter().all(|r| (dot(r.direction, r.direction) - 1.0).abs() < 1e-9));
    }

    #[test]
    fn half_fov_matches_focal_length() {
        for f in [0.5, 1.0, 2.0] {
            let cam = pinhole(f);
            // Image edge (x = 0) at the middle row.
            let d = cam.ray_at(64, 32, 0.0, 16.0).direction;
            let angle = dot(d, cam.forward).acos();
            assert!((angle - (1.0 / f).atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn top_down_basis() {
        let cam = Camera::top_down(1.0, 2.0, 5.0, 8.0, 1.0, 6.0).unwrap();
        assert_eq!(cam.right, [1.0, 0.0, 0.0]);
        assert_eq!(cam.down, [0.0, -1.0, 0.0]);
        assert_eq!(cam.forward, [0.0, 0.0, -1.0]);
        let r = cam.ray_at(16, 16, 0.5, 0.5);
        assert_eq!(r.origin, [1.0 - 7.5, 2.0 + 7.5, 5.0]);
    }

    #[test]
    fn rejects_invalid_cameras() {
        assert!(Camera::look_at([0.0; 3], [0.0; 3], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: 1.0 }, 0.1, 1.0).is_err());
        assert!(Camera::look_at([0.0; 3], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: 1.0 }, 0.1, 1.0).is_err());
        assert!(Camera::look_at([0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: 0.0 }, 0.1, 1.0).is_err());
        assert!(Camera::top_down(0.0, 0.0, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(Camera::look_at([0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: 1e-300 }, 0.1, 1.0).is_err());
        assert!(Camera::top_down(1e300, 0.0, 1.0, 1.0, 0.1, 2.0).is_err());
    }

    #[test]
    fn extreme_valid_cameras_give_finite_rays() {
        for f_norm in [1e-6, 1e6] {
            let cam = Camera::look_at([0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm }, 0.1, 1.0).unwrap();
            assert!(make_rays(&cam, 4, 3).iter().all(|r| r.direction.iter().all(|v| v.is_finite())));
        }
    }
}
