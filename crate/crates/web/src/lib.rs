//! Browser demo bindings: trace and image a bundled scene, sweep the
//! Chamfer distance over fused drops, and solve a single hand-made path.

use wasm_bindgen::prelude::*;

use isac_imaging::cloud::{image_drops, sample_reference, tradeoff_curve, FusionConfig, ImageStats, PointCloud};
use isac_imaging::erp::{path_length, solve_drop, solve_segments, SegmentGeometry};
use isac_imaging::formats::read_drops;
use isac_imaging::geom::{direction_from_angles, AnglePair, Vec3};
use isac_imaging::pathgen::{trace_drop, DiffuseConfig, Drop, Scene, TraceConfig, SPEED_OF_LIGHT};

/// Bundled scenes by name, with their JSON.
pub const SCENES: [(&str, &str); 4] = [
    ("cube_1m", include_str!("../../../data/cube_1m.json")),
    ("cube_4m", include_str!("../../../data/cube_4m.json")),
    ("triangle_plate", include_str!("../../../data/triangle_plate.json")),
    ("circle_plate", include_str!("../../../data/circle_plate.json")),
];

const DROPS: &str = include_str!("../../../data/seven_drops.csv");

pub fn bundled_scene(name: &str) -> Result<Scene, String> {
    let (_, json) = SCENES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| format!("unknown scene {name:?}"))?;
    Scene::from_json(json).map_err(|e| e.to_string())
}

fn bundled_drops() -> Vec<(Vec3, Vec3)> {
    read_drops(DROPS.as_bytes()).expect("bundled drop list parses")
}

/// Settings shared by the imaging and tradeoff views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub gamma: f64,
    pub cutoff_dbm: f64,
    /// Diffuse samples per hit; 0 disables diffuse scattering.
    pub diffuse: usize,
    pub seed: u64,
}

impl DemoConfig {
    fn trace(&self) -> TraceConfig {
        TraceConfig {
            cutoff_dbm: self.cutoff_dbm,
            diffuse: (self.diffuse > 0).then(|| DiffuseConfig {
                samples_per_hit: self.diffuse,
                ..DiffuseConfig::default()
            }),
            seed: self.seed,
            ..TraceConfig::default()
        }
    }

    fn fusion(&self) -> FusionConfig {
        FusionConfig {
            gamma: self.gamma,
            drop_subset: None,
        }
    }
}

fn trace_first(scene: &Scene, drops: usize, cfg: &DemoConfig) -> Result<Vec<Drop>, String> {
    let all = bundled_drops();
    if drops == 0 || drops > all.len() {
        return Err(format!("drop count must be 1..={}", all.len()));
    }
    all[..drops]
        .iter()
        .enumerate()
        .map(|(i, &(tx, rx))| trace_drop(scene, tx, rx, i as u32 + 1, &cfg.trace()).map_err(|e| e.to_string()))
        .collect()
}

/// Fused cloud of the first `drops` bundled placements.
pub fn run_imaging(scene: &str, drops: usize, cfg: &DemoConfig) -> Result<(PointCloud, ImageStats), String> {
    let s = bundled_scene(scene)?;
    let traced = trace_first(&s, drops, cfg)?;
    image_drops(&traced, &cfg.fusion()).map_err(|e| e.to_string())
}

/// Chamfer distance after fusing 1, 2, … 7 drops (NaN where nothing survived).
pub fn run_tradeoff(scene: &str, cfg: &DemoConfig, ref_points: usize) -> Result<Vec<f64>, String> {
    let s = bundled_scene(scene)?;
    let n = bundled_drops().len();
    let groups: Vec<_> = trace_first(&s, n, cfg)?.iter().map(solve_drop).collect();
    let reference = sample_reference(&s, ref_points, cfg.seed).map_err(|e| e.to_string())?;
    let ks: Vec<usize> = (1..=n).collect();
    let rows = tradeoff_curve(&groups, &reference, &cfg.fusion(), &ks).map_err(|e| e.to_string())?;
    Ok(rows.iter().map(|r| r.chamfer_m).collect())
}

/// `[erp, a, b]` (nine coordinates) followed by `α, β, ‖a − b‖`.
pub fn explore_erp(tx: Vec3, rx: Vec3, aod: AnglePair, aoa: AnglePair, length: f64) -> Result<[f64; 12], String> {
    let l = path_length(length / SPEED_OF_LIGHT).map_err(|e| e.to_string())?;
    let g = SegmentGeometry {
        tx,
        rx,
        d_t: direction_from_angles(aod),
        d_r: direction_from_angles(aoa),
    };
    let s = solve_segments(&g, l).map_err(|e| e.to_string())?;
    let erp = s.a_end.midpoint(s.b_end);
    let mut out = [0.0; 12];
    for (k, p) in [erp, s.a_end, s.b_end].iter().enumerate() {
        out[3 * k..3 * k + 3].copy_from_slice(&p.to_array());
    }
    out[9] = s.alpha;
    out[10] = s.beta;
    out[11] = s.a_end.distance(s.b_end);
    Ok(out)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Triangle vertices, nine coordinates per triangle.
#[wasm_bindgen(js_name = sceneMesh)]
pub fn scene_mesh(scene: &str) -> Result<Vec<f64>, JsError> {
    let s = bundled_scene(scene).map_err(js)?;
    Ok(s.triangles()
        .iter()
        .flat_map(|t| [t.v0, t.v1, t.v2])
        .flat_map(Vec3::to_array)
        .collect())
}

/// TX/RX positions of the bundled drops, six coordinates per drop.
#[wasm_bindgen(js_name = dropPositions)]
pub fn drop_positions() -> Vec<f64> {
    bundled_drops()
        .iter()
        .flat_map(|(t, r)| t.to_array().into_iter().chain(r.to_array()))
        .collect()
}

#[wasm_bindgen]
pub struct ImageView {
    cloud: PointCloud,
    stats: ImageStats,
}

#[wasm_bindgen]
impl ImageView {
    pub fn positions(&self) -> Vec<f64> {
        self.cloud.points().iter().flat_map(|p| p.position.to_array()).collect()
    }

    #[wasm_bindgen(js_name = gainsDb)]
    pub fn gains_db(&self) -> Vec<f64> {
        self.cloud.points().iter().map(|p| p.gain_db).collect()
    }

    #[wasm_bindgen(js_name = dropIds)]
    pub fn drop_ids(&self) -> Vec<u32> {
        self.cloud.points().iter().map(|p| p.drop_id).collect()
    }

    #[wasm_bindgen(getter, js_name = pathsIn)]
    pub fn paths_in(&self) -> usize {
        self.stats.paths_in
    }

    #[wasm_bindgen(getter, js_name = losSkipped)]
    pub fn los_skipped(&self) -> usize {
        self.stats.los_skipped
    }

    #[wasm_bindgen(getter)]
    pub fn rejected(&self) -> usize {
        self.stats.rejected_by_gamma
    }

    #[wasm_bindgen(getter)]
    pub fn kept(&self) -> usize {
        self.stats.kept
    }
}

#[wasm_bindgen]
pub fn image(
    scene: &str,
    drops: usize,
    gamma: f64,
    cutoff_dbm: f64,
    diffuse: usize,
    seed: u32,
) -> Result<ImageView, JsError> {
    let cfg = DemoConfig {
        gamma,
        cutoff_dbm,
        diffuse,
        seed: seed.into(),
    };
    let (cloud, stats) = run_imaging(scene, drops, &cfg).map_err(js)?;
    Ok(ImageView { cloud, stats })
}

#[wasm_bindgen]
pub fn tradeoff(
    scene: &str,
    gamma: f64,
    cutoff_dbm: f64,
    diffuse: usize,
    seed: u32,
    ref_points: usize,
) -> Result<Vec<f64>, JsError> {
    let cfg = DemoConfig {
        gamma,
        cutoff_dbm,
        diffuse,
        seed: seed.into(),
    };
    run_tradeoff(scene, &cfg, ref_points).map_err(js)
}

/// Angles in radians; see [`explore_erp`] for the layout of the result.
#[wasm_bindgen(js_name = solvePath)]
#[allow(clippy::too_many_arguments)]
pub fn solve_path(
    tx: &[f64],
    rx: &[f64],
    aod_azimuth: f64,
    aod_zenith: f64,
    aoa_azimuth: f64,
    aoa_zenith: f64,
    length: f64,
) -> Result<Vec<f64>, JsError> {
    let point = |v: &[f64]| -> Result<Vec3, JsError> {
        match v {
            [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
            _ => Err(JsError::new("positions need three coordinates")),
        }
    };
    explore_erp(
        point(tx)?,
        point(rx)?,
        AnglePair::new(aod_azimuth, aod_zenith),
        AnglePair::new(aoa_azimuth, aoa_zenith),
        length,
    )
    .map(|a| a.to_vec())
    .map_err(js)
}
