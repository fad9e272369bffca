//! Triangle-mesh scenes and their JSON representation.
//!
//! ```json
//! { "materials": { "metal": { "kind": "perfect-conductor", "scattering": 0.3 } },
//!   "triangles": [ { "v0": [0,0,0], "v1": [1,0,0], "v2": [0,1,0], "material": "metal" } ] }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::material::{Material, MaterialKind};
use crate::geom::{intersect, GeomError, Hit, Ray, Rotation, Triangle, Vec3, SELF_HIT_EPS};

/// Segment ends closer than this to an occluder are treated as touching it.
pub const OCCLUSION_END_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("triangle {index} references unknown material `{material}`")]
    UnknownMaterial { index: usize, material: String },
    #[error("triangle {index}: {source}")]
    Degenerate { index: usize, source: GeomError },
    #[error("triangle {index} has a non-finite vertex")]
    NonFinite { index: usize },
    #[error("material `{name}`: {reason}")]
    InvalidMaterial { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindSpec {
    PerfectConductor,
    Dielectric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialSpec {
    kind: KindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scattering: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriangleSpec {
    v0: [f64; 3],
    v1: [f64; 3],
    v2: [f64; 3],
    material: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSpec {
    materials: BTreeMap<String, MaterialSpec>,
    triangles: Vec<TriangleSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    triangles: Vec<Triangle>,
    materials: Vec<Material>,
}

impl Scene {
    /// Builds a scene; `material_id` of each triangle indexes `materials`.
    pub fn new(triangles: Vec<Triangle>, materials: Vec<Material>) -> Result<Self, SceneError> {
        for m in &materials {
            validate_material(m)?;
        }
        for (index, t) in triangles.iter().enumerate() {
            if !(t.v0.is_finite() && t.v1.is_finite() && t.v2.is_finite()) {
                return Err(SceneError::NonFinite { index });
            }
            Triangle::new(t.v0, t.v1, t.v2, t.material_id)
                .map_err(|source| SceneError::Degenerate { index, source })?;
            if t.material_id >= materials.len() {
                return Err(SceneError::UnknownMaterial {
                    index,
                    material: t.material_id.to_string(),
                });
            }
        }
        Ok(Self { triangles, materials })
    }

    pub fn empty() -> Self {
        Self {
            triangles: Vec::new(),
            materials: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        let mut index_of = BTreeMap::new();
        let mut materials = Vec::with_capacity(spec.materials.len());
        for (name, m) in spec.materials {
            let material = match m.kind {
                KindSpec::PerfectConductor => {
                    if m.eps_r.is_some() || m.sigma_a.is_some() || m.sigma_b.is_some() {
                        return Err(SceneError::InvalidMaterial {
                            name,
                            reason: "perfect conductors take no eps_r/sigma parameters".into(),
                        });
                    }
                    Material::perfect_conductor(name.clone(), m.scattering.unwrap_or(0.0))
                }
                KindSpec::Dielectric => {
                    let Some(eps_r) = m.eps_r else {
                        return Err(SceneError::InvalidMaterial {
                            name,
                            reason: "dielectric requires eps_r".into(),
                        });
                    };
                    Material::dielectric(
                        name.clone(),
                        eps_r,
                        m.sigma_a.unwrap_or(0.0),
                        m.sigma_b.unwrap_or(0.0),
                        m.scattering.unwrap_or(0.0),
                    )
                }
            };
            index_of.insert(name, materials.len());
            materials.push(material);
        }
        let mut triangles = Vec::with_capacity(spec.triangles.len());
        for (index, t) in spec.triangles.into_iter().enumerate() {
            let Some(&id) = index_of.get(&t.material) else {
                return Err(SceneError::UnknownMaterial {
                    index,
                    material: t.material,
                });
            };
            triangles.push(Triangle {
                v0: Vec3::from_array(t.v0),
                v1: Vec3::from_array(t.v1),
                v2: Vec3::from_array(t.v2),
                material_id: id,
            });
        }
        Self::new(triangles, materials)
    }

    pub fn to_json(&self) -> String {
        let materials = self
            .materials
            .iter()
            .map(|m| {
                let spec = match m.kind {
                    MaterialKind::PerfectConductor => MaterialSpec {
                        kind: KindSpec::PerfectConductor,
                        eps_r: None,
                        sigma_a: None,
                        sigma_b: None,
                        scattering: Some(m.scattering),
                    },
                    MaterialKind::Dielectric => MaterialSpec {
                        kind: KindSpec::Dielectric,
                        eps_r: Some(m.eps_r),
                        sigma_a: Some(m.sigma_a),
                        sigma_b: Some(m.sigma_b),
                        scattering: Some(m.scattering),
                    },
                };
                (m.name.clone(), spec)
            })
            .collect();
        let triangles = self
            .triangles
            .iter()
            .map(|t| TriangleSpec {
                v0: t.v0.to_array(),
                v1: t.v1.to_array(),
                v2: t.v2.to_array(),
                material: self.materials[t.material_id].name.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&SceneSpec { materials, triangles }).expect("scene serialization cannot fail")
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn material_of(&self, triangle: usize) -> &Material {
        &self.materials[self.triangles[triangle].material_id]
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    /// Nearest hit along `ray`, with the index of the triangle hit.
    pub fn first_hit(&self, ray: &Ray) -> Option<(usize, Hit)> {
        self.triangles
            .iter()
            .enumerate()
            .filter_map(|(i, t)| intersect(ray, t).map(|h| (i, h)))
            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
    }

    /// True when no triangle blocks the open segment `a → b`.
    pub fn segment_clear(&self, a: Vec3, b: Vec3) -> bool {
        let Some(ray) = Ray::toward(a, b) else {
            return true;
        };
        let len = a.distance(b);
        let far = len - OCCLUSION_END_TOL;
        if far <= SELF_HIT_EPS {
            return true;
        }
        !self
            .triangles
            .iter()
            .any(|t| intersect(&ray, t).is_some_and(|h| h.distance < far))
    }

    /// Parity test for points enclosed by a closed mesh. A point counts as
    /// inside only when rays in both senses of a direction cross an odd number
    /// of facets, so open plates never enclose anything.
    pub fn contains_point(&self, p: Vec3) -> bool {
        const DIRS: [Vec3; 3] = [
            Vec3::new(0.577_215_664_9, 0.316_227_766, 0.752_470_2),
            Vec3::new(-0.267_949_192, 0.894_427_191, 0.358_979_3),
            Vec3::new(0.141_421_356, -0.412_310_562, 0.900_000_1),
        ];
        let crossings = |d: Vec3| {
            let ray = Ray {
                origin: p,
                direction: d.normalized().unwrap(),
            };
            self.triangles.iter().filter(|t| intersect(&ray, t).is_some()).count()
        };
        let votes = DIRS
            .iter()
            .filter(|&&d| crossings(d) % 2 == 1 && crossings(-d) % 2 == 1)
            .count();
        votes >= 2
    }

    /// Applies `p ↦ R p + t` to every vertex.
    pub fn transformed(&self, rotation: &Rotation, translation: Vec3) -> Scene {
        let f = |p: Vec3| rotation.apply(p) + translation;
        Scene {
            triangles: self
                .triangles
                .iter()
                .map(|t| Triangle {
                    v0: f(t.v0),
                    v1: f(t.v1),
                    v2: f(t.v2),
                    material_id: t.material_id,
                })
                .collect(),
            materials: self.materials.clone(),
        }
    }

    /// Area-weighted surface sampler over all triangles.
    pub fn surface_sampler(&self) -> Option<SurfaceSampler<'_>> {
        SurfaceSampler::new(self)
    }
}

fn validate_material(m: &Material) -> Result<(), SceneError> {
    let bad = |reason: &str| SceneError::InvalidMaterial {
        name: m.name.clone(),
        reason: reason.to_string(),
    };
    if !(0.0..=1.0).contains(&m.scattering) {
        return Err(bad("scattering coefficient must lie in [0, 1]"));
    }
    if m.kind == MaterialKind::Dielectric {
        if !(m.eps_r >= 1.0) {
            return Err(bad("eps_r must be >= 1"));
        }
        if !(m.sigma_a >= 0.0) || !m.sigma_b.is_finite() {
            return Err(bad("conductivity model must be non-negative and finite"));
        }
    }
    Ok(())
}

/// Draws points area-uniformly: a triangle proportional to its area, then a
/// uniform barycentric point inside it.
pub struct SurfaceSampler<'a> {
    scene: &'a Scene,
    cumulative: Vec<f64>,
}

impl<'a> SurfaceSampler<'a> {
    fn new(scene: &'a Scene) -> Option<Self> {
        if scene.is_empty() {
            return None;
        }
        let mut acc = 0.0;
        let cumulative = scene
            .triangles
            .iter()
            .map(|t| {
                acc += t.area();
                acc
            })
            .collect();
        Some(Self { scene, cumulative })
    }

    /// Returns the chosen triangle index and the sampled point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec3) {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1);
        let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        (idx, self.scene.triangles[idx].point_at(u, v))
    }
}

/// Twelve outward-wound triangles of an axis-aligned cube.
pub fn cube_triangles(center: Vec3, edge: f64, material_id: usize) -> Vec<Triangle> {
    let h = edge / 2.0;
    let c = |sx: f64, sy: f64, sz: f64| center + Vec3::new(sx * h, sy * h, sz * h);
    let quads = [
        // -x, +x
        [c(-1., -1., -1.), c(-1., -1., 1.), c(-1., 1., 1.), c(-1., 1., -1.)],
        [c(1., -1., -1.), c(1., 1., -1.), c(1., 1., 1.), c(1., -1., 1.)],
        // -y, +y
        [c(-1., -1., -1.), c(1., -1., -1.), c(1., -1., 1.), c(-1., -1., 1.)],
        [c(-1., 1., -1.), c(-1., 1., 1.), c(1., 1., 1.), c(1., 1., -1.)],
        // -z, +z
        [c(-1., -1., -1.), c(-1., 1., -1.), c(1., 1., -1.), c(1., -1., -1.)],
        [c(-1., -1., 1.), c(1., -1., 1.), c(1., 1., 1.), c(-1., 1., 1.)],
    ];
    quads
        .iter()
        .flat_map(|q| {
            [
                Triangle {
                    v0: q[0],
                    v1: q[1],
                    v2: q[2],
                    material_id,
                },
                Triangle {
                    v0: q[0],
                    v1: q[2],
                    v2: q[3],
                    material_id,
                },
            ]
        })
        .collect()
}

/// Disk of `radius` in the plane `z = center.z`, as a fan of `segments`
/// triangles.
pub fn disk_triangles(center: Vec3, radius: f64, segments: usize, material_id: usize) -> Vec<Triangle> {
    (0..segments)
        .map(|k| {
            let a0 = std::f64::consts::TAU * k as f64 / segments as f64;
            let a1 = std::f64::consts::TAU * (k + 1) as f64 / segments as f64;
            Triangle {
                v0: center,
                v1: center + Vec3::new(radius * a0.cos(), radius * a0.sin(), 0.0),
                v2: center + Vec3::new(radius * a1.cos(), radius * a1.sin(), 0.0),
                material_id,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube() -> Scene {
        Scene::new(
            cube_triangles(Vec3::ZERO, 1.0, 0),
            vec![Material::perfect_conductor("metal", 0.3)],
        )
        .unwrap()
    }

    #[test]
    fn cube_normals_point_outward() {
        for t in cube().triangles() {
            assert!(t.normal().dot(t.centroid()) > 0.0);
        }
        assert!((cube().total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = cube();
        let back = Scene::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn inside_detection() {
        let s = cube();
        assert!(s.contains_point(Vec3::new(0.1, -0.2, 0.05)));
        assert!(!s.contains_point(Vec3::new(0.0, 0.0, 2.0)));
        assert!(!s.contains_point(Vec3::new(5.0, -5.0, 1.0)));
        let plate = Scene::new(
            disk_triangles(Vec3::ZERO, 1.0, 16, 0),
            vec![Material::perfect_conductor("metal", 0.0)],
        )
        .unwrap();
        assert!(!plate.contains_point(Vec3::new(0.0, 0.0, 1.0)));
        assert!(!plate.contains_point(Vec3::new(0.0, 0.0, -1.0)));
    }

    #[test]
    fn occlusion_by_cube() {
        let s = cube();
        assert!(!s.segment_clear(Vec3::new(-3.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)));
        assert!(s.segment_clear(Vec3::new(-3.0, 0.0, 2.0), Vec3::new(3.0, 0.0, 2.0)));
        // Ends touching a face are not occluded by it.
        assert!(s.segment_clear(Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, 3.0)));
    }

    const GOOD: &str = r#"{"materials":{"m":{"kind":"perfect-conductor"}},
        "triangles":[{"v0":[0,0,0],"v1":[1,0,0],"v2":[0,1,0],"material":"m"}]}"#;

    #[test]
    fn parses_minimal_scene() {
        let s = Scene::from_json(GOOD).unwrap();
        assert_eq!(s.triangles().len(), 1);
        assert_eq!(s.materials()[0].scattering, 0.0);
    }

    #[test]
    fn parse_rejects_each_violation() {
        let cases = [
            // unknown top-level key
            r#"{"materials":{},"triangles":[],"extra":1}"#,
            // unknown material key
            r#"{"materials":{"m":{"kind":"perfect-conductor","colour":"red"}},"triangles":[]}"#,
            // unknown triangle key
            r#"{"materials":{"m":{"kind":"perfect-conductor"}},
               "triangles":[{"v0":[0,0,0],"v1":[1,0,0],"v2":[0,1,0],"material":"m","id":3}]}"#,
            // unknown kind
            r#"{"materials":{"m":{"kind":"plastic"}},"triangles":[]}"#,
            // missing triangles
            r#"{"materials":{}}"#,
            // unresolved material
            r#"{"materials":{},"triangles":[{"v0":[0,0,0],"v1":[1,0,0],"v2":[0,1,0],"material":"x"}]}"#,
            // degenerate triangle
            r#"{"materials":{"m":{"kind":"perfect-conductor"}},
               "triangles":[{"v0":[0,0,0],"v1":[1,0,0],"v2":[2,0,0],"material":"m"}]}"#,
            // dielectric without permittivity
            r#"{"materials":{"m":{"kind":"dielectric"}},"triangles":[]}"#,
            // permittivity below 1
            r#"{"materials":{"m":{"kind":"dielectric","eps_r":0.5}},"triangles":[]}"#,
            // scattering out of range
            r#"{"materials":{"m":{"kind":"perfect-conductor","scattering":1.5}},"triangles":[]}"#,
            // PEC with dielectric parameters
            r#"{"materials":{"m":{"kind":"perfect-conductor","eps_r":2.0}},"triangles":[]}"#,
            // wrong vertex arity
            r#"{"materials":{"m":{"kind":"perfect-conductor"}},
               "triangles":[{"v0":[0,0],"v1":[1,0,0],"v2":[0,1,0],"material":"m"}]}"#,
        ];
        for (i, c) in cases.iter().enumerate() {
            assert!(Scene::from_json(c).is_err(), "case {i} should be rejected");
        }
    }

    #[test]
    fn sampler_stays_on_surface() {
        let s = cube();
        let sampler = s.surface_sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (i, p) = sampler.sample(&mut rng);
            assert!(s.triangles()[i].signed_distance(p).abs() < 1e-12);
            assert!(p.x.abs() <= 0.5 + 1e-12 && p.y.abs() <= 0.5 + 1e-12 && p.z.abs() <= 0.5 + 1e-12);
        }
        assert!(Scene::empty().surface_sampler().is_none());
    }
}
