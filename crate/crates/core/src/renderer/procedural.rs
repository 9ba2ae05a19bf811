use serde::{Deserialize, Serialize};

use super::camera::Vec3;
use crate::bevmap::{BevMap, SceneObject, Shape, CLEVR_COLORS};
use crate::generator::RadianceField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundStyle {
    Solid { albedo: Vec3 },
    /// Squares of side `cell` world units alternating between `a` and `b`.
    Checker { a: Vec3, b: Vec3, cell: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProceduralConfig {
    pub sigma_max: f64,
    /// Half-width of the density falloff around each surface, world units.
    pub edge: f64,
    /// `None` leaves the space below `z = 0` empty.
    pub ground: Option<GroundStyle>,
    pub palette: Vec<Vec3>,
}

impl Default for ProceduralConfig {
    fn default() -> Self {
        Self {
            sigma_max: 50.0,
            edge: 0.02,
            ground: Some(GroundStyle::Solid { albedo: [0.5, 0.5, 0.5] }),
            palette: CLEVR_COLORS.to_vec(),
        }
    }
}

/// Analytic scene: one signed-distance solid per object resting on `z = 0`,
/// above an optional ground half-space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProceduralField {
    objects: Vec<SceneObject>,
    cfg: ProceduralConfig,
}

/// 1 well inside, 0 well outside, smooth in between.
fn occupancy(sdf: f64, edge: f64) -> f64 {
    let t = ((edge - sdf) / (2.0 * edge)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

pub fn signed_distance(o: &SceneObject, p: Vec3) -> f64 {
    let (dx, dy) = (p[0] - o.center[0], p[1] - o.center[1]);
    let r = o.footprint_radius;
    match o.shape {
        Shape::Sphere => (dx * dx + dy * dy + (p[2] - r) * (p[2] - r)).sqrt() - r,
        Shape::Cube => {
            let q = [dx.abs() - r, dy.abs() - r, (p[2] - r).abs() - r];
            let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            outside + q[0].max(q[1]).max(q[2]).min(0.0)
        }
        Shape::Cylinder => {
            let half = 0.5 * o.height;
            let q = [(dx * dx + dy * dy).sqrt() - r, (p[2] - half).abs() - half];
            let outside = (q[0].max(0.0).powi(2) + q[1].max(0.0).powi(2)).sqrt();
            outside + q[0].max(q[1]).min(0.0)
        }
    }
}

impl ProceduralField {
    pub fn new(objects: Vec<SceneObject>, cfg: ProceduralConfig) -> Self {
        Self { objects, cfg }
    }

    /// The objects of `b`, re-expressed relative to its pixel (0, 0) corner.
    pub fn from_bev_local(b: &BevMap, cfg: ProceduralConfig) -> Self {
        let (x0, y0) = b.transform().to_world(0.0, 0.0);
        let objects = b
            .objects()
            .iter()
            .map(|o| SceneObject { center: [o.center[0] - x0, o.center[1] - y0], ..o.clone() })
            .collect();
        Self::new(objects, cfg)
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    fn ground_albedo(&self, p: Vec3) -> Option<Vec3> {
        match self.cfg.ground? {
            GroundStyle::Solid { albedo } => Some(albedo),
            GroundStyle::Checker { a, b, cell } => {
                let parity = ((p[0] / cell).floor() + (p[1] / cell).floor()).rem_euclid(2.0);
                Some(if parity == 0.0 { a } else { b })
            }
        }
    }
}

impl RadianceField for ProceduralField {
    fn query(&self, p: Vec3, _d: Vec3) -> (f64, Vec3) {
        let mut sigma = 0.0;
        let mut color = [0.0; 3];
        let mut add = |s: f64, c: Vec3| {
            if s > 0.0 {
                sigma += s;
                for k in 0..3 {
                    color[k] += s * c[k];
                }
            }
        };
        for o in &self.objects {
            let reach = o.bounding_radius().max(o.height) + self.cfg.edge;
            if (p[0] - o.center[0]).abs() > reach || (p[1] - o.center[1]).abs() > reach {
                continue;
            }
            let c = self.cfg.palette.get(o.color).copied().unwrap_or([1.0; 3]);
            add(self.cfg.sigma_max * occupancy(signed_distance(o, p), self.cfg.edge), c);
        }
        if let Some(albedo) = self.ground_albedo(p) {
            add(self.cfg.sigma_max * occupancy(p[2], self.cfg.edge), albedo);
        }
        if sigma > 0.0 {
            color = color.map(|c| c / sigma);
        }
        (sigma, color)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(shape: Shape, x: f64, y: f64, r: f64) -> SceneObject {
        SceneObject { id: 0, shape, color: 2, center: [x, y], footprint_radius: r, height: 2.0 * r }
    }

    #[test]
    fn solid_interiors_reach_sigma_max() {
        let f = ProceduralField::new(
            vec![obj(Shape::Sphere, 1.0, 1.0, 0.5), obj(Shape::Cube, 4.0, 1.0, 0.5), obj(Shape::Cylinder, 7.0, 1.0, 0.5)],
            ProceduralConfig { ground: None, ..Default::default() },
        );
        for x in [1.0, 4.0, 7.0] {
            let (s, c) = f.query([x, 1.0, 0.5], [0.0, 0.0, -1.0]);
            assert!((s - 50.0).abs() < 1e-9);
            assert_eq!(c, CLEVR_COLORS[2]);
        }
        assert_eq!(f.query([2.5, 1.0, 0.5], [0.0, 0.0, -1.0]).0, 0.0);
    }

    #[test]
    fn sdfs_are_exact_on_axes() {
        let p = [0.0, 0.0, 0.5];
        assert!((signed_distance(&obj(Shape::Sphere, 1.0, 0.0, 0.5), p) - 0.5).abs() < 1e-15);
        assert!((signed_distance(&obj(Shape::Cube, 1.0, 0.0, 0.25), p) - 0.75).abs() < 1e-15);
        assert!((signed_distance(&obj(Shape::Cylinder, 0.0, 0.0, 0.5), [0.0, 0.0, 1.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_scene_is_only_ground() {
        let f = ProceduralField::new(vec![], ProceduralConfig::default());
        assert_eq!(f.query([3.0, 3.0, 1.0], [0.0; 3]).0, 0.0);
        assert_eq!(f.query([3.0, 3.0, -1.0], [0.0; 3]), (50.0, [0.5; 3]));
    }

    #[test]
    fn translation_covariance_is_exact() {
        let objs = vec![obj(Shape::Sphere, 1.25, 2.5, 0.75), obj(Shape::Cube, 3.0, 1.0, 0.5)];
        let t = [2.75, -1.5];
        let moved = objs.iter().map(|o| SceneObject { center: [o.center[0] + t[0], o.center[1] + t[1]], ..o.clone() }).collect();
        let a = ProceduralField::new(objs, ProceduralConfig::default());
        let b = ProceduralField::new(moved, ProceduralConfig::default());
        for p in [[1.0, 2.0, 0.5], [1.5, 2.75, 1.25], [3.25, 1.125, 0.0625], [0.5, 0.5, -0.01]] {
            assert_eq!(a.query(p, [0.0; 3]), b.query([p[0] + t[0], p[1] + t[1], p[2]], [0.0; 3]));
        }
    }

    #[test]
    fn checker_ground_alternates() {
        let cfg = ProceduralConfig {
            ground: Some(GroundStyle::Checker { a: [0.0; 3], b: [1.0; 3], cell: 0.5 }),
            ..Default::default()
        };
        let f = ProceduralField::new(vec![], cfg);
        assert_eq!(f.query([0.25, 0.25, -1.0], [0.0; 3]).1, [0.0; 3]);
        assert_eq!(f.query([0.75, 0.25, -1.0], [0.0; 3]).1, [1.0; 3]);
        assert_eq!(f.query([-0.25, 0.25, -1.0], [0.0; 3]).1, [1.0; 3]);
    }
}
