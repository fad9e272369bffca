//! Deterministic desk-scale multipath generator.
//!
//! Produces six-tuple path components (AoD, AoA, delay, complex gain) for the
//! line-of-sight path, first- and second-order specular reflections found with
//! the image method, and optional first-order diffuse scattering.

mod material;
mod scene;
mod trace;

pub use material::{Material, MaterialKind, EPSILON_0};
pub use scene::{cube_triangles, disk_triangles, Scene, SceneError, SurfaceSampler};
pub use trace::{
    apply_cutoff, diffuse_samples, free_space_path_loss_db, specular_gain, trace_drop, DiffuseConfig, DiffuseSample,
    Reflection, ScatterSplit, SurfaceHit, TraceConfig, TraceError,
};

use num_complex::Complex64;

use crate::geom::{AnglePair, Vec3};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One multipath component between a TX and an RX.
///
/// `gain` is the received complex amplitude in √mW, so `20·log10|gain|` is the
/// received power in dBm for the configured transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    pub aod: AnglePair,
    pub aoa: AnglePair,
    /// Seconds.
    pub delay: f64,
    pub gain: Complex64,
    pub bounce_count: u32,
    pub is_los: bool,
    /// Last scattering point of the traced trajectory (`None` for LOS).
    pub interaction: Option<Vec3>,
}

impl PathComponent {
    pub fn power_dbm(&self) -> f64 {
        10.0 * self.gain.norm_sqr().log10()
    }

    pub fn gain_db(&self) -> f64 {
        self.power_dbm()
    }
}

/// One TX/RX placement and the paths traced between them, sorted by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub drop_id: u32,
    pub tx: Vec3,
    pub rx: Vec3,
    pub paths: Vec<PathComponent>,
}
