use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::material::Material;
use super::scene::Scene;
use super::{Drop, PathComponent, SPEED_OF_LIGHT};
use crate::geom::{angles_from_direction, intersect, mirror_point, Ray, Triangle, Vec3};

/// Points closer than this to a plane are treated as lying on it.
const PLANE_TOL: f64 = 1e-9;

/// Bounce points closer than this are considered the same interaction.
const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("transmitter and receiver coincide")]
    CoincidentEndpoints,
    #[error("{0} position is not finite")]
    NonFinite(&'static str),
    #[error("{0} lies inside a closed mesh")]
    InsideMesh(&'static str),
    #[error("path length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("invalid trace configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuseConfig {
    /// Hemisphere samples spawned at each diffuse interaction.
    pub samples_per_hit: usize,
    /// Surface points probed from the transmitter per drop.
    pub launch_points: usize,
}

impl Default for DiffuseConfig {
    fn default() -> Self {
        Self {
            samples_per_hit: 16,
            launch_points: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub carrier_hz: f64,
    pub tx_power_dbm: f64,
    pub cutoff_dbm: f64,
    pub max_bounces: u32,
    pub diffuse: Option<DiffuseConfig>,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 6.75e9,
            tx_power_dbm: 0.0,
            cutoff_dbm: -160.0,
            max_bounces: 2,
            diffuse: None,
            seed: 0,
        }
    }
}

impl TraceConfig {
    fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::InvalidConfig(m.to_string()));
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return bad("carrier frequency must be positive");
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("transmit power must be finite");
        }
        if self.cutoff_dbm.is_nan() {
            return bad("cutoff must be a number");
        }
        if self.max_bounces > 2 {
            return bad("at most two specular bounces are supported");
        }
        if let Some(d) = self.diffuse {
            if d.samples_per_hit == 0 {
                return bad("diffuse sample count must be at least 1");
            }
        }
        Ok(())
    }
}

pub fn free_space_path_loss_db(distance: f64, frequency_hz: f64) -> f64 {
    20.0 * (4.0 * PI * distance * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// One specular interaction along a path.
#[derive(Debug, Clone, Copy)]
pub struct Reflection<'a> {
    pub material: &'a Material,
    pub cos_incidence: f64,
}

/// Received amplitude of a specular path: Friis free-space loss over the
/// unfolded length plus the Fresnel magnitude of every bounce, with carrier
/// phase `−2π f τ`. Isotropic 0 dBi antennas.
pub fn specular_gain(
    path_length: f64,
    reflections: &[Reflection<'_>],
    carrier_hz: f64,
    tx_power_dbm: f64,
) -> Result<Complex64, TraceError> {
    if !(path_length > 0.0) {
        return Err(TraceError::NonPositiveLength(path_length));
    }
    let bounce_db: f64 = reflections
        .iter()
        .map(|r| 20.0 * r.material.reflection_magnitude(r.cos_incidence, carrier_hz).log10())
        .sum();
    let power_dbm = tx_power_dbm - free_space_path_loss_db(path_length, carrier_hz) + bounce_db;
    let tau = path_length / SPEED_OF_LIGHT;
    Ok(Complex64::from_polar(
        10f64.powf(power_dbm / 20.0),
        -TAU * carrier_hz * tau,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceHit<'a> {
    pub point: Vec3,
    pub normal: Vec3,
    pub material: &'a Material,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuseSample {
    pub direction: Vec3,
    /// Linear energy (mW).
    pub energy: f64,
    /// Uniform on `[0, 2π)`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSplit {
    pub samples: Vec<DiffuseSample>,
    pub specular_energy: f64,
}

impl ScatterSplit {
    pub fn diffuse_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.energy).sum()
    }
}

/// Splits the reflected energy at a surface hit into a specular remainder
/// `(1−s)|Γ|²E` and `n` diffuse rays of `s|Γ|²E/n` each, directions uniform
/// over the hemisphere facing the incident ray.
pub fn diffuse_samples(
    hit: &SurfaceHit<'_>,
    incident: &Ray,
    incident_energy: f64,
    n: usize,
    carrier_hz: f64,
    seed: u64,
) -> Result<ScatterSplit, TraceError> {
    if n == 0 {
        return Err(TraceError::InvalidConfig(
            "diffuse sample count must be at least 1".into(),
        ));
    }
    let cos_i = incident.direction.dot(hit.normal);
    let gamma = hit.material.reflection_magnitude(cos_i, carrier_hz);
    let reflected = incident_energy * gamma * gamma;
    let s = hit.material.scattering;
    if s <= 0.0 {
        return Ok(ScatterSplit {
            samples: Vec::new(),
            specular_energy: reflected,
        });
    }
    let up = if cos_i < 0.0 { hit.normal } else { -hit.normal };
    let (t, b) = orthonormal_basis(up);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_sample = s * reflected / n as f64;
    let samples = (0..n)
        .map(|_| {
            // cos θ uniform on [0,1] gives uniform density in solid angle.
            let z: f64 = rng.gen();
            let lon = TAU * rng.gen::<f64>();
            let r = (1.0 - z * z).max(0.0).sqrt();
            let direction = t * (r * lon.cos()) + b * (r * lon.sin()) + up * z;
            let phase = TAU * rng.gen::<f64>();
            DiffuseSample {
                direction,
                energy: per_sample,
                phase,
            }
        })
        .collect();
    Ok(ScatterSplit {
        samples,
        specular_energy: (1.0 - s) * reflected,
    })
}

fn orthonormal_basis(n: Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let t = n.cross(helper).normalized().unwrap();
    (t, n.cross(t))
}

/// Keeps the paths whose received power reaches `cutoff_dbm`, in order.
pub fn apply_cutoff(drop: Drop, cutoff_dbm: f64) -> Drop {
    Drop {
        paths: drop.paths.into_iter().filter(|p| p.power_dbm() >= cutoff_dbm).collect(),
        ..drop
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A geometric candidate before gains are attached.
struct Candidate {
    /// tx, interaction points..., rx
    vertices: Vec<Vec3>,
    facets: Vec<usize>,
}

impl Candidate {
    fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    fn bounce_points(&self) -> &[Vec3] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    fn same_as(&self, other: &Candidate) -> bool {
        self.vertices.len() == other.vertices.len()
            && self
                .bounce_points()
                .iter()
                .zip(other.bounce_points())
                .all(|(a, b)| a.distance(*b) < DEDUP_TOL)
    }
}

/// Where the segment `from → to` crosses triangle `t`, if it does strictly
/// between the endpoints.
fn segment_hits(from: Vec3, to: Vec3, t: &Triangle) -> Option<Vec3> {
    let ray = Ray::toward(from, to)?;
    let h = intersect(&ray, t)?;
    (h.distance < from.distance(to)).then_some(h.point)
}

fn same_plane(a: &Triangle, b: &Triangle) -> bool {
    a.normal().dot(b.normal()).abs() > 1.0 - 1e-12 && a.signed_distance(b.v0).abs() < PLANE_TOL
}

fn first_order(scene: &Scene, tx: Vec3, rx: Vec3) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    for (i, t) in scene.triangles().iter().enumerate() {
        let (dt, dr) = (t.signed_distance(tx), t.signed_distance(rx));
        if dt.abs() <= PLANE_TOL || dr.abs() <= PLANE_TOL || dt.signum() != dr.signum() {
            continue;
        }
        let image = mirror_point(tx, t);
        let Some(p) = segment_hits(rx, image, t) else {
            continue;
        };
        if !(scene.segment_clear(tx, p) && scene.segment_clear(p, rx)) {
            continue;
        }
        let c = Candidate {
            vertices: vec![tx, p, rx],
            facets: vec![i],
        };
        if !out.iter().any(|o| o.same_as(&c)) {
            out.push(c);
        }
    }
    out
}

fn second_order(scene: &Scene, tx: Vec3, rx: Vec3) -> Vec<Candidate> {
    let tris = scene.triangles();
    let mut out: Vec<Candidate> = Vec::new();
    for (i, ti) in tris.iter().enumerate() {
        let dt = ti.signed_distance(tx);
        if dt.abs() <= PLANE_TOL {
            continue;
        }
        let image1 = mirror_point(tx, ti);
        for (j, tj) in tris.iter().enumerate() {
            if i == j || same_plane(ti, tj) {
                continue;
            }
            let image2 = mirror_point(image1, tj);
            let (d_img, d_rx) = (tj.signed_distance(image1), tj.signed_distance(rx));
            if d_img.abs() <= PLANE_TOL || d_rx.abs() <= PLANE_TOL || d_img.signum() != d_rx.signum() {
                continue;
            }
            let Some(p2) = segment_hits(rx, image2, tj) else {
                continue;
            };
            let s2 = ti.signed_distance(p2);
            if s2.abs() <= PLANE_TOL || s2.signum() != dt.signum() {
                continue;
            }
            let Some(p1) = segment_hits(p2, image1, ti) else {
                continue;
            };
            if !(scene.segment_clear(tx, p1) && scene.segment_clear(p1, p2) && scene.segment_clear(p2, rx)) {
                continue;
            }
            let c = Candidate {
                vertices: vec![tx, p1, p2, rx],
                facets: vec![i, j],
            };
            if !out.iter().any(|o| o.same_as(&c)) {
                out.push(c);
            }
        }
    }
    out
}

fn unit(from: Vec3, to: Vec3) -> Vec3 {
    (to - from).normalized().expect("path vertices are distinct")
}

fn make_path(vertices: &[Vec3], gain: Complex64, length: f64) -> PathComponent {
    let n = vertices.len();
    let aod = angles_from_direction(unit(vertices[0], vertices[1])).expect("unit");
    let aoa = angles_from_direction(unit(vertices[n - 2], vertices[n - 1])).expect("unit");
    PathComponent {
        aod,
        aoa,
        delay: length / SPEED_OF_LIGHT,
        gain,
        bounce_count: (n - 2) as u32,
        is_los: n == 2,
        interaction: (n > 2).then(|| vertices[n - 2]),
    }
}

/// Traces every path between `tx` and `rx` in `scene` and returns them sorted
/// by delay, with everything below `cfg.cutoff_dbm` removed.
pub fn trace_drop(scene: &Scene, tx: Vec3, rx: Vec3, drop_id: u32, cfg: &TraceConfig) -> Result<Drop, TraceError> {
    cfg.validate()?;
    if !tx.is_finite() {
        return Err(TraceError::NonFinite("transmitter"));
    }
    if !rx.is_finite() {
        return Err(TraceError::NonFinite("receiver"));
    }
    if tx.distance(rx) <= PLANE_TOL {
        return Err(TraceError::CoincidentEndpoints);
    }
    if scene.contains_point(tx) {
        return Err(TraceError::InsideMesh("transmitter"));
    }
    if scene.contains_point(rx) {
        return Err(TraceError::InsideMesh("receiver"));
    }

    let f = cfg.carrier_hz;
    let mut paths = Vec::new();

    if scene.segment_clear(tx, rx) {
        let len = tx.distance(rx);
        let g = specular_gain(len, &[], f, cfg.tx_power_dbm)?;
        paths.push(make_path(&[tx, rx], g, len));
    }

    let mut candidates = Vec::new();
    if cfg.max_bounces >= 1 {
        candidates.extend(first_order(scene, tx, rx));
    }
    if cfg.max_bounces >= 2 {
        candidates.extend(second_order(scene, tx, rx));
    }
    for c in &candidates {
        let reflections: Vec<Reflection<'_>> = c
            .facets
            .iter()
            .enumerate()
            .map(|(k, &fi)| Reflection {
                material: scene.material_of(fi),
                cos_incidence: unit(c.vertices[k], c.vertices[k + 1])
                    .dot(scene.triangles()[fi].normal())
                    .abs(),
            })
            .collect();
        let len = c.length();
        let mut g = specular_gain(len, &reflections, f, cfg.tx_power_dbm)?;
        if cfg.diffuse.is_some() {
            // Scattered energy leaves the specular lobe at every bounce.
            let kept: f64 = reflections.iter().map(|r| 1.0 - r.material.scattering).product();
            g *= kept.sqrt();
        }
        if g.norm_sqr() > 0.0 {
            paths.push(make_path(&c.vertices, g, len));
        }
    }

    if let Some(dcfg) = cfg.diffuse {
        paths.extend(diffuse_paths(scene, tx, rx, drop_id, cfg, &dcfg)?);
    }

    paths.retain(|p| p.power_dbm() >= cfg.cutoff_dbm);
    paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(Drop { drop_id, tx, rx, paths })
}

/// First-order diffuse returns. Surface points are drawn area-uniformly, the
/// transmitter ray toward each one finds the actual first hit, and the
/// hemisphere samples spawned there that fall inside the receiver's reception
/// cone (solid angle `2π/n`, one sample's share) carry energy to the receiver.
fn diffuse_paths(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    drop_id: u32,
    cfg: &TraceConfig,
    dcfg: &DiffuseConfig,
) -> Result<Vec<PathComponent>, TraceError> {
    let Some(sampler) = scene.surface_sampler() else {
        return Ok(Vec::new());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(drop_id as u64)));
    let n = dcfg.samples_per_hit;
    let cone_cos = 1.0 - 1.0 / n as f64;
    let f = cfg.carrier_hz;
    let mut out = Vec::new();
    for _ in 0..dcfg.launch_points {
        let (_, target) = sampler.sample(&mut rng);
        let hit_seed = rng.next_u64();
        let Some(ray) = Ray::toward(tx, target) else {
            continue;
        };
        let Some((fi, hit)) = scene.first_hit(&ray) else {
            continue;
        };
        let material = scene.material_of(fi);
        if material.scattering <= 0.0 {
            continue;
        }
        let tri = &scene.triangles()[fi];
        let p = hit.point;
        let (dt, dr) = (tri.signed_distance(tx), tri.signed_distance(rx));
        if dt.abs() <= PLANE_TOL || dr.abs() <= PLANE_TOL || dt.signum() != dr.signum() {
            continue;
        }
        if !scene.segment_clear(p, rx) {
            continue;
        }
        let len = tx.distance(p) + p.distance(rx);
        let incident_mw = 10f64.powf((cfg.tx_power_dbm - free_space_path_loss_db(len, f)) / 10.0);
        let split = diffuse_samples(
            &SurfaceHit {
                point: p,
                normal: tri.normal(),
                material,
            },
            &ray,
            incident_mw,
            n,
            f,
            hit_seed,
        )?;
        let to_rx = unit(p, rx);
        let caught: Vec<&DiffuseSample> = split
            .samples
            .iter()
            .filter(|s| s.direction.dot(to_rx) >= cone_cos)
            .collect();
        let Some(first) = caught.first() else {
            continue;
        };
        let energy: f64 = caught.iter().map(|s| s.energy).sum();
        let tau = len / SPEED_OF_LIGHT;
        let gain = Complex64::from_polar(energy.sqrt(), first.phase - TAU * f * tau);
        out.push(make_path(&[tx, p, rx], gain, len));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{direction_from_angles, reflect};
    use crate::pathgen::{cube_triangles, Material};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn wall_y1() -> Scene {
        // Square in the plane y = 1 with its normal toward -y.
        let a = Vec3::new(-2.0, 1.0, -2.0);
        let b = Vec3::new(2.0, 1.0, -2.0);
        let c = Vec3::new(2.0, 1.0, 2.0);
        let d = Vec3::new(-2.0, 1.0, 2.0);
        Scene::new(
            vec![
                Triangle {
                    v0: a,
                    v1: b,
                    v2: c,
                    material_id: 0,
                },
                Triangle {
                    v0: a,
                    v1: c,
                    v2: d,
                    material_id: 0,
                },
            ],
            vec![Material::perfect_conductor("metal", 0.0)],
        )
        .unwrap()
    }

    fn cube(edge: f64, scattering: f64) -> Scene {
        Scene::new(
            cube_triangles(Vec3::ZERO, edge, 0),
            vec![Material::perfect_conductor("metal", scattering)],
        )
        .unwrap()
    }

    fn seven_drops() -> Vec<(Vec3, Vec3)> {
        let v = Vec3::new;
        vec![
            (v(-5., 0., 5.), v(5., 0., 5.)),
            (v(0., -5., 5.), v(0., 5., 5.)),
            (v(0., -5., 5.), v(5., 0., 5.)),
            (v(0., 5., 5.), v(-5., 0., 5.)),
            (v(5., -5., 1.), v(-5., -5., 1.)),
            (v(5., -5., 1.), v(5., 5., 1.)),
            (v(5., -5., 3.), v(-5., -5., 3.)),
        ]
    }

    #[test]
    fn fspl_at_one_metre() {
        // 20·log10(4π·1·6.75e9/c), evaluated by hand: 49.0345 dB.
        let want = 20.0 * (4.0 * PI * 6.75e9 / 299_792_458.0f64).log10();
        assert!((free_space_path_loss_db(1.0, 6.75e9) - want).abs() < 1e-12);
        let g = specular_gain(1.0, &[], 6.75e9, 0.0).unwrap();
        let dbm = 10.0 * g.norm_sqr().log10();
        assert!((dbm + 49.03).abs() < 0.01, "{dbm}");
    }

    #[test]
    fn pec_bounce_leaves_power_unchanged() {
        let metal = Material::perfect_conductor("m", 0.0);
        let a = specular_gain(3.0, &[], 6.75e9, 0.0).unwrap();
        for c in [0.1, 0.5, 1.0] {
            let b = specular_gain(
                3.0,
                &[Reflection {
                    material: &metal,
                    cos_incidence: c,
                }],
                6.75e9,
                0.0,
            )
            .unwrap();
            assert!((a.norm() - b.norm()).abs() < 1e-18);
        }
        assert!(matches!(
            specular_gain(0.0, &[], 6.75e9, 0.0),
            Err(TraceError::NonPositiveLength(_))
        ));
    }

    #[test]
    fn gain_phase_follows_delay() {
        let d = 2.5;
        let g = specular_gain(d, &[], 6.75e9, 0.0).unwrap();
        let want = Complex64::from_polar(1.0, -TAU * 6.75e9 * d / SPEED_OF_LIGHT);
        assert!((g / g.norm() - want).norm() < 1e-9);
    }

    #[test]
    fn mirror_wall_example() {
        let tx = Vec3::new(-1.0, 0.0, 0.0);
        let rx = Vec3::new(1.0, 0.0, 0.0);
        let d = trace_drop(&wall_y1(), tx, rx, 1, &TraceConfig::default()).unwrap();
        assert_eq!(d.paths.len(), 2);
        let los = &d.paths[0];
        assert!(los.is_los && los.bounce_count == 0 && los.interaction.is_none());
        assert!((los.delay - 2.0 / SPEED_OF_LIGHT).abs() < 1e-24);
        let b = &d.paths[1];
        assert!(!b.is_los && b.bounce_count == 1);
        assert!((b.delay - 2.0 * 2f64.sqrt() / SPEED_OF_LIGHT).abs() < 1e-22);
        assert!((b.aod.azimuth - FRAC_PI_4).abs() < 1e-12);
        assert!((b.aod.zenith - FRAC_PI_2).abs() < 1e-12);
        assert!((b.aoa.azimuth - 7.0 * FRAC_PI_4).abs() < 1e-12);
        assert!((b.aoa.zenith - FRAC_PI_2).abs() < 1e-12);
        assert!(b.interaction.unwrap().distance(Vec3::new(0.0, 1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn occluded_los_is_dropped() {
        let tx = Vec3::new(-3.0, 0.0, 0.0);
        let rx = Vec3::new(3.0, 0.0, 0.0);
        let d = trace_drop(&cube(1.0, 0.0), tx, rx, 1, &TraceConfig::default()).unwrap();
        assert!(d.paths.iter().all(|p| !p.is_los));
    }

    #[test]
    fn empty_scene_gives_los_only() {
        let d = trace_drop(
            &Scene::empty(),
            Vec3::ZERO,
            Vec3::new(0.0, 0.0, 4.0),
            1,
            &TraceConfig::default(),
        )
        .unwrap();
        assert_eq!(d.paths.len(), 1);
        assert!(d.paths[0].is_los);
    }

    #[test]
    fn endpoint_errors() {
        let s = cube(1.0, 0.0);
        let cfg = TraceConfig::default();
        let far = Vec3::new(4.0, 0.0, 0.0);
        assert_eq!(trace_drop(&s, far, far, 1, &cfg), Err(TraceError::CoincidentEndpoints));
        assert_eq!(
            trace_drop(&s, Vec3::new(0.1, 0.1, 0.1), far, 1, &cfg),
            Err(TraceError::InsideMesh("transmitter"))
        );
        assert_eq!(
            trace_drop(&s, far, Vec3::ZERO, 1, &cfg),
            Err(TraceError::InsideMesh("receiver"))
        );
        let bad = TraceConfig {
            max_bounces: 3,
            ..TraceConfig::default()
        };
        assert!(matches!(
            trace_drop(&s, far, -far, 1, &bad),
            Err(TraceError::InvalidConfig(_))
        ));
    }

    /// Forward replay: launch from tx along the AoD, reflect off each first
    /// hit, and check the final leg passes through rx.
    fn replay_closes(scene: &Scene, tx: Vec3, rx: Vec3, p: &PathComponent) -> bool {
        let mut origin = tx;
        let mut dir = direction_from_angles(p.aod);
        let mut travelled = 0.0;
        for _ in 0..p.bounce_count {
            let ray = Ray { origin, direction: dir };
            let Some((fi, h)) = scene.first_hit(&ray) else {
                return false;
            };
            travelled += h.distance;
            origin = h.point;
            dir = reflect(dir, scene.triangles()[fi].normal());
        }
        let to_rx = rx - origin;
        let along = to_rx.dot(dir);
        let miss = (to_rx - dir * along).norm();
        let total = travelled + along;
        along > 0.0 && miss < 1e-6 && (total - p.delay * SPEED_OF_LIGHT).abs() < 1e-12 * total.max(1.0) * 10.0
    }

    #[test]
    fn cube_paths_replay_forward() {
        let s = cube(1.0, 0.0);
        let mut specular = 0;
        for (k, (tx, rx)) in seven_drops().into_iter().enumerate() {
            let d = trace_drop(&s, tx, rx, k as u32 + 1, &TraceConfig::default()).unwrap();
            for p in d.paths.iter().filter(|p| !p.is_los) {
                assert!(replay_closes(&s, tx, rx, p), "drop {k}: {p:?}");
                specular += 1;
            }
            assert!(d.paths.windows(2).all(|w| w[0].delay <= w[1].delay));
        }
        assert!(specular >= 2);
    }

    #[test]
    fn corner_reflector_double_bounce() {
        // Two walls meeting at a right angle along the z axis: x = 0 (y > 0)
        // and y = 0 (x > 0), open toward the +x+y quadrant.
        let m = vec![Material::perfect_conductor("m", 0.0)];
        let v = Vec3::new;
        let tris = vec![
            Triangle {
                v0: v(0., 0., -3.),
                v1: v(0., 3., -3.),
                v2: v(0., 3., 3.),
                material_id: 0,
            },
            Triangle {
                v0: v(0., 0., -3.),
                v1: v(0., 3., 3.),
                v2: v(0., 0., 3.),
                material_id: 0,
            },
            Triangle {
                v0: v(0., 0., -3.),
                v1: v(3., 0., 3.),
                v2: v(3., 0., -3.),
                material_id: 0,
            },
            Triangle {
                v0: v(0., 0., -3.),
                v1: v(0., 0., 3.),
                v2: v(3., 0., 3.),
                material_id: 0,
            },
        ];
        let s = Scene::new(tris, m).unwrap();
        let tx = v(2.0, 1.0, 0.3);
        let rx = v(1.0, 2.0, -0.2);
        let d = trace_drop(&s, tx, rx, 1, &TraceConfig::default()).unwrap();
        let doubles: Vec<_> = d.paths.iter().filter(|p| p.bounce_count == 2).collect();
        // Only the y = 0 wall first, then x = 0, closes for this placement.
        assert_eq!(doubles.len(), 1, "{:#?}", d.paths);
        for p in &d.paths {
            if !p.is_los {
                assert!(replay_closes(&s, tx, rx, p));
            }
        }
        // Double bounce off a right-angle corner: unfolded length is |tx − R(rx)|
        // with R the point reflection through the corner axis.
        let unfolded = tx.distance(v(-rx.x, -rx.y, rx.z));
        for p in doubles {
            assert!((p.delay * SPEED_OF_LIGHT - unfolded).abs() < 1e-9);
        }
    }

    #[test]
    fn cutoff_behaviour() {
        let tx = Vec3::new(-1.0, 0.0, 0.0);
        let rx = Vec3::new(1.0, 0.0, 0.0);
        let d = trace_drop(&wall_y1(), tx, rx, 1, &TraceConfig::default()).unwrap();
        assert_eq!(apply_cutoff(d.clone(), -160.0), d);
        assert!(apply_cutoff(d.clone(), f64::INFINITY).paths.is_empty());
        let los_only = apply_cutoff(d.clone(), d.paths[1].power_dbm() + 1e-9);
        assert_eq!(los_only.paths.len(), 1);
        assert!(los_only.paths[0].is_los);
    }

    #[test]
    fn diffuse_split_examples() {
        let m = Material::perfect_conductor("m", 1.0);
        let hit = SurfaceHit {
            point: Vec3::ZERO,
            normal: Vec3::new(0.0, 0.0, 1.0),
            material: &m,
        };
        let inc = Ray::toward(Vec3::new(1.0, 0.0, 1.0), Vec3::ZERO).unwrap();
        let s = diffuse_samples(&hit, &inc, 8.0, 4, 6.75e9, 3).unwrap();
        assert_eq!(s.samples.len(), 4);
        assert!(s.samples.iter().all(|x| x.energy == 2.0));
        assert_eq!(s.specular_energy, 0.0);
        for x in &s.samples {
            assert!(x.direction.z >= 0.0 && (x.direction.norm() - 1.0).abs() < 1e-12);
            assert!((0.0..TAU).contains(&x.phase));
        }

        let half = Material::perfect_conductor("m", 0.5);
        let s = diffuse_samples(&SurfaceHit { material: &half, ..hit }, &inc, 8.0, 1, 6.75e9, 3).unwrap();
        assert_eq!(s.samples.len(), 1);
        assert_eq!((s.samples[0].energy, s.specular_energy), (4.0, 4.0));

        let none = Material::perfect_conductor("m", 0.0);
        let s = diffuse_samples(&SurfaceHit { material: &none, ..hit }, &inc, 8.0, 5, 6.75e9, 3).unwrap();
        assert!(s.samples.is_empty());
        assert!(diffuse_samples(&hit, &inc, 8.0, 0, 6.75e9, 3).is_err());
    }

    #[test]
    fn diffuse_hemisphere_faces_incident_side() {
        let m = Material::perfect_conductor("m", 1.0);
        let hit = SurfaceHit {
            point: Vec3::ZERO,
            normal: Vec3::new(0.0, 0.0, 1.0),
            material: &m,
        };
        // Incident from below: samples must fill the lower hemisphere.
        let inc = Ray::toward(Vec3::new(0.3, 0.0, -1.0), Vec3::ZERO).unwrap();
        let s = diffuse_samples(&hit, &inc, 1.0, 64, 6.75e9, 9).unwrap();
        assert!(s.samples.iter().all(|x| x.direction.z <= 0.0));
    }

    #[test]
    fn diffuse_energy_conserved_for_dielectric() {
        let wood = Material {
            scattering: 0.35,
            ..Material::wood()
        };
        let hit = SurfaceHit {
            point: Vec3::ZERO,
            normal: Vec3::new(0.0, 0.0, 1.0),
            material: &wood,
        };
        for (k, c) in [0.2f64, 0.6, 0.95].into_iter().enumerate() {
            let d = Vec3::new((1.0 - c * c).sqrt(), 0.0, -c);
            let inc = Ray::new(Vec3::new(-d.x, 0.0, c), d).unwrap();
            let e = 3.7;
            let s = diffuse_samples(&hit, &inc, e, 7, 6.75e9, k as u64).unwrap();
            let gamma = wood.reflection_magnitude(c, 6.75e9);
            let total = s.specular_energy + s.diffuse_energy();
            assert!((total - e * gamma * gamma).abs() <= 1e-9 * total);
        }
    }

    #[test]
    fn diffuse_directions_are_uniform_on_hemisphere() {
        // Chi-square over equal-solid-angle bins: 10 bands in cos θ × 8 sectors.
        let m = Material::perfect_conductor("m", 1.0);
        let hit = SurfaceHit {
            point: Vec3::ZERO,
            normal: Vec3::new(0.0, 0.0, 1.0),
            material: &m,
        };
        let inc = Ray::toward(Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO).unwrap();
        let n = 100_000;
        let s = diffuse_samples(&hit, &inc, 1.0, n, 6.75e9, 2024).unwrap();
        let (bands, sectors) = (10usize, 8usize);
        let mut counts = vec![0usize; bands * sectors];
        for x in &s.samples {
            let d = x.direction;
            let band = ((d.z * bands as f64) as usize).min(bands - 1);
            let lon = d.y.atan2(d.x).rem_euclid(TAU);
            let sector = ((lon / TAU * sectors as f64) as usize).min(sectors - 1);
            counts[band * sectors + sector] += 1;
        }
        let expected = n as f64 / counts.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 79 degrees of freedom: the 0.99 quantile of χ² is about 111.1.
        assert!(chi2 < 111.1, "chi-square {chi2}");
    }

    #[test]
    fn diffuse_tracing_is_reproducible_and_geometric() {
        let s = cube(1.0, 0.4);
        let cfg = TraceConfig {
            diffuse: Some(DiffuseConfig::default()),
            seed: 11,
            ..TraceConfig::default()
        };
        let tx = Vec3::new(-5.0, 0.0, 5.0);
        let rx = Vec3::new(5.0, 0.0, 5.0);
        let a = trace_drop(&s, tx, rx, 1, &cfg).unwrap();
        let b = trace_drop(&s, tx, rx, 1, &cfg).unwrap();
        assert_eq!(a, b);
        let diffuse: Vec<_> = a.paths.iter().filter(|p| p.bounce_count == 1).collect();
        assert!(diffuse.len() > 10, "only {} one-bounce paths", diffuse.len());
        for p in diffuse {
            let q = p.interaction.unwrap();
            let len = tx.distance(q) + q.distance(rx);
            assert!((p.delay * SPEED_OF_LIGHT - len).abs() <= 1e-12 * len);
            // Points lie on the top face, the only one both ends can see.
            assert!((q.z - 0.5).abs() < 1e-12);
        }
        let other = trace_drop(
            &s,
            tx,
            rx,
            1,
            &TraceConfig {
                seed: 12,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn specular_energy_is_reduced_when_diffuse_enabled() {
        let s = cube(1.0, 0.4);
        let tx = Vec3::new(-5.0, 0.0, 5.0);
        let rx = Vec3::new(5.0, 0.0, 5.0);
        let plain = trace_drop(&s, tx, rx, 1, &TraceConfig::default()).unwrap();
        let with = trace_drop(
            &s,
            tx,
            rx,
            1,
            &TraceConfig {
                diffuse: Some(DiffuseConfig::default()),
                ..TraceConfig::default()
            },
        )
        .unwrap();
        let spec = |d: &Drop| {
            d.paths
                .iter()
                .find(|p| {
                    p.interaction
                        .is_some_and(|q| q.distance(Vec3::new(0.0, 0.0, 0.5)) < 1e-9)
                })
                .unwrap()
                .gain
                .norm_sqr()
        };
        assert!((spec(&with) / spec(&plain) - 0.6).abs() < 1e-12);
    }
}
