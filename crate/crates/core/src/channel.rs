//! MIMO channel impulse response synthesized from path components.
//!
//! Uniform planar arrays are modelled as the Kronecker product of two uniform
//! linear arrays, `a = a_y ⊗ a_x`, each normalized to unit norm. Both arrays
//! share the world axes.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::geom::AnglePair;
use crate::pathgen::Drop;

/// Taps whose delays differ by less than this (seconds) are merged.
pub const TAP_MERGE_TOL: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("array needs at least one element per axis")]
    EmptyArray,
    #[error("element spacing and wavelength must be positive and finite")]
    BadSpacing,
    #[error("no paths to synthesize")]
    NoPaths,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub m_x: usize,
    pub m_y: usize,
    pub d_x: f64,
    pub d_y: f64,
    pub wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(m_x: usize, m_y: usize, d_x: f64, d_y: f64, wavelength: f64) -> Result<Self, ChannelError> {
        if m_x == 0 || m_y == 0 {
            return Err(ChannelError::EmptyArray);
        }
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(d_x) && ok(d_y) && ok(wavelength)) {
            return Err(ChannelError::BadSpacing);
        }
        Ok(Self {
            m_x,
            m_y,
            d_x,
            d_y,
            wavelength,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(m_x: usize, m_y: usize, wavelength: f64) -> Result<Self, ChannelError> {
        Self::new(m_x, m_y, wavelength / 2.0, wavelength / 2.0, wavelength)
    }

    /// A single isotropic element.
    pub fn single(wavelength: f64) -> Self {
        Self::half_wavelength(1, 1, wavelength).expect("single element is valid")
    }

    pub fn elements(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// `a_axis[m] = exp(−j 2π/λ · m · d · u) / √M` with `u = sinφ cosθ` (x) or
/// `sinφ sinθ` (y).
pub fn steering_vector_axis(geom: &ArrayGeometry, axis: Axis, a: AnglePair) -> Vec<Complex64> {
    let (sin_z, _) = a.zenith.sin_cos();
    let (sin_a, cos_a) = a.azimuth.sin_cos();
    let (m, d, u) = match axis {
        Axis::X => (geom.m_x, geom.d_x, sin_z * cos_a),
        Axis::Y => (geom.m_y, geom.d_y, sin_z * sin_a),
    };
    let scale = 1.0 / (m as f64).sqrt();
    let k = TAU / geom.wavelength * d * u;
    (0..m).map(|i| Complex64::from_polar(scale, -k * i as f64)).collect()
}

/// `a_y ⊗ a_x`: element `m_y·M_x + m_x` is `a_y[m_y]·a_x[m_x]`.
pub fn steering_vector_3d(geom: &ArrayGeometry, a: AnglePair) -> Vec<Complex64> {
    let ax = steering_vector_axis(geom, Axis::X, a);
    let ay = steering_vector_axis(geom, Axis::Y, a);
    ay.iter().flat_map(|&y| ax.iter().map(move |&x| y * x)).collect()
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    /// `self += g · u vᵀ` (plain transpose, no conjugation).
    fn add_outer(&mut self, g: Complex64, u: &[Complex64], v: &[Complex64]) {
        for (r, &ur) in u.iter().enumerate() {
            for (c, &vc) in v.iter().enumerate() {
                self.data[r * self.cols + c] += g * ur * vc;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// One delta-weighted term of `H(t)`: an `N_rx × N_tx` matrix at `delay`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirTap {
    pub delay: f64,
    pub matrix: CMatrix,
    /// Number of paths merged into this tap.
    pub paths: usize,
}

/// `H(t) = Σ_j g_j a_RX(θ_RX,j, φ_RX,j) a_TX(θ_TX,j, φ_TX,j)ᵀ δ(t − τ_j)`,
/// one tap per distinct delay, sorted ascending.
pub fn synthesize_cir(
    drop: &Drop,
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
) -> Result<Vec<CirTap>, ChannelError> {
    if drop.paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let mut order: Vec<usize> = (0..drop.paths.len()).collect();
    order.sort_by(|&a, &b| drop.paths[a].delay.total_cmp(&drop.paths[b].delay));
    let mut taps: Vec<CirTap> = Vec::new();
    for i in order {
        let p = &drop.paths[i];
        let a_rx = steering_vector_3d(rx_geom, p.aoa);
        let a_tx = steering_vector_3d(tx_geom, p.aod);
        let merge = taps.last().is_some_and(|t| (p.delay - t.delay).abs() < TAP_MERGE_TOL);
        if !merge {
            taps.push(CirTap {
                delay: p.delay,
                matrix: CMatrix::zeros(a_rx.len(), a_tx.len()),
                paths: 0,
            });
        }
        let tap = taps.last_mut().unwrap();
        tap.matrix.add_outer(p.gain, &a_rx, &a_tx);
        tap.paths += 1;
    }
    Ok(taps)
}
