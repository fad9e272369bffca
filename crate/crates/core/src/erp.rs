//! Equivalent reflection points.
//!
//! For each non-line-of-sight path the transmitter segment
//! `a(α) = p_tx + α d_T` and the receiver segment `b(β) = p_rx − β d_R` are
//! fitted under the delay budget `α + β = L`, `0 ≤ α, β ≤ L`, minimizing
//! `f(α, β) = ‖a(α) − b(β)‖²`. With `β = L − α` the stationary point is
//!
//! ```text
//! α* = −[(p_tx − p_rx) + L d_R]ᵀ (d_T − d_R) / ‖d_T − d_R‖²
//! ```
//!
//! and when `α*` leaves `[0, L]` the better of the two endpoints `(0, L)` and
//! `(L, 0)` is taken. The ERP is the midpoint of `a(α)` and `b(β)`; the chord
//! `‖a − b‖` is the residual later used for γ filtering.

use thiserror::Error;

use crate::geom::{direction_from_angles, Vec3};
use crate::pathgen::{Drop, PathComponent, SPEED_OF_LIGHT};

/// Directions with `‖d_T − d_R‖²` at or below this are treated as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErpError {
    #[error("delay must be positive, got {0} s")]
    NonPositiveDelay(f64),
    #[error("transmit and receive directions are parallel (‖d_T − d_R‖² = {0:e})")]
    DegenerateDirections(f64),
    #[error("line-of-sight paths carry no reflection point")]
    LosPath,
}

/// `L ≈ c τ`.
pub fn path_length(tau: f64) -> Result<f64, ErpError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ErpError::NonPositiveDelay(tau));
    }
    Ok(SPEED_OF_LIGHT * tau)
}

/// The two rays of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGeometry {
    pub tx: Vec3,
    pub rx: Vec3,
    pub d_t: Vec3,
    pub d_r: Vec3,
}

impl SegmentGeometry {
    pub fn a(&self, alpha: f64) -> Vec3 {
        self.tx + self.d_t * alpha
    }

    pub fn b(&self, beta: f64) -> Vec3 {
        self.rx - self.d_r * beta
    }

    /// `v(α, β) = p_tx − p_rx + α d_T + β d_R`, so that `f = vᵀv`.
    pub fn v(&self, alpha: f64, beta: f64) -> Vec3 {
        self.tx - self.rx + self.d_t * alpha + self.d_r * beta
    }

    pub fn cost(&self, alpha: f64, beta: f64) -> f64 {
        self.v(alpha, beta).norm_sq()
    }

    /// `(∂f/∂α, ∂f/∂β) = (2 vᵀd_T, 2 vᵀd_R)`.
    pub fn gradient(&self, alpha: f64, beta: f64) -> (f64, f64) {
        let v = self.v(alpha, beta);
        (2.0 * v.dot(self.d_t), 2.0 * v.dot(self.d_r))
    }
}

/// Unconstrained stationary `α` of `f(α, L − α)`.
pub fn solve_alpha(tx: Vec3, rx: Vec3, d_t: Vec3, d_r: Vec3, total_length: f64) -> Result<f64, ErpError> {
    let diff = d_t - d_r;
    let denom = diff.norm_sq();
    if !(denom > PARALLEL_EPS) {
        return Err(ErpError::DegenerateDirections(denom));
    }
    let offset = tx - rx + d_r * total_length;
    Ok(-offset.dot(diff) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPair {
    pub a_end: Vec3,
    pub b_end: Vec3,
    pub alpha: f64,
    pub beta: f64,
}

impl SegmentPair {
    /// True when neither box constraint is active.
    pub fn is_interior(&self) -> bool {
        self.alpha > 0.0 && self.beta > 0.0
    }
}

/// Box-constrained minimizer of `f` on the line `α + β = L`.
pub fn solve_segments(geom: &SegmentGeometry, total_length: f64) -> Result<SegmentPair, ErpError> {
    let l = total_length;
    let alpha_star = solve_alpha(geom.tx, geom.rx, geom.d_t, geom.d_r, l)?;
    let (alpha, beta) = if (0.0..=l).contains(&alpha_star) {
        (alpha_star, l - alpha_star)
    } else if geom.cost(l, 0.0) < geom.cost(0.0, l) {
        (l, 0.0)
    } else {
        // Ties resolve to (0, L).
        (0.0, l)
    };
    Ok(SegmentPair {
        a_end: geom.a(alpha),
        b_end: geom.b(beta),
        alpha,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErpSolution {
    pub erp: Vec3,
    pub segments: SegmentPair,
    /// Chord `‖a − b‖`, metres.
    pub residual: f64,
    pub total_length: f64,
    pub drop_id: u32,
    pub path_id: u32,
    pub gain_db: f64,
}

impl ErpSolution {
    /// `f(α_opt, β_opt)`, m².
    pub fn cost(&self) -> f64 {
        self.residual * self.residual
    }
}

/// Solves one NLOS path. `d_T` comes from the AoD, `d_R` from the AoA, which
/// points from the last interaction toward the receiver.
pub fn solve_erp(
    tx: Vec3,
    rx: Vec3,
    path: &PathComponent,
    drop_id: u32,
    path_id: u32,
) -> Result<ErpSolution, ErpError> {
    if path.is_los {
        return Err(ErpError::LosPath);
    }
    let total_length = path_length(path.delay)?;
    let geom = SegmentGeometry {
        tx,
        rx,
        d_t: direction_from_angles(path.aod),
        d_r: direction_from_angles(path.aoa),
    };
    let segments = solve_segments(&geom, total_length)?;
    Ok(ErpSolution {
        erp: segments.a_end.midpoint(segments.b_end),
        residual: segments.a_end.distance(segments.b_end),
        segments,
        total_length,
        drop_id,
        path_id,
        gain_db: path.gain_db(),
    })
}

/// Per-drop solutions plus counters for every path that produced none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropSolution {
    pub drop_id: u32,
    pub paths_in: usize,
    pub solutions: Vec<ErpSolution>,
    pub los_skipped: usize,
    pub degenerate_skipped: usize,
    pub invalid_delay_skipped: usize,
}

/// Runs [`solve_erp`] over every path of a drop, in path order.
pub fn solve_drop(drop: &Drop) -> DropSolution {
    let mut out = DropSolution {
        drop_id: drop.drop_id,
        paths_in: drop.paths.len(),
        solutions: Vec::with_capacity(drop.paths.len()),
        ..DropSolution::default()
    };
    for (i, p) in drop.paths.iter().enumerate() {
        match solve_erp(drop.tx, drop.rx, p, drop.drop_id, i as u32) {
            Ok(s) => out.solutions.push(s),
            Err(ErpError::LosPath) => out.los_skipped += 1,
            Err(ErpError::DegenerateDirections(_)) => out.degenerate_skipped += 1,
            Err(ErpError::NonPositiveDelay(_)) => out.invalid_delay_skipped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{angles_from_direction, AnglePair};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn nlos(d_t: Vec3, d_r: Vec3, length: f64) -> PathComponent {
        PathComponent {
            aod: angles_from_direction(d_t).unwrap(),
            aoa: angles_from_direction(d_r).unwrap(),
            delay: length / SPEED_OF_LIGHT,
            gain: Complex64::new(1e-5, 0.0),
            bounce_count: 1,
            is_los: false,
            interaction: None,
        }
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(1.0).unwrap(), 299_792_458.0);
        assert!((path_length(10e-9).unwrap() - 2.997_924_58).abs() < 1e-12);
        let l = path_length(2.0 * SQRT_2 / SPEED_OF_LIGHT).unwrap();
        assert!((l - 2.0 * SQRT_2).abs() < 1e-15);
        assert!(path_length(0.0).is_err());
        assert!(path_length(-1e-9).is_err());
    }

    #[test]
    fn mirror_example() {
        let tx = Vec3::new(-1.0, 0.0, 0.0);
        let rx = Vec3::new(1.0, 0.0, 0.0);
        let d_t = Vec3::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0);
        let d_r = Vec3::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0);
        let alpha = solve_alpha(tx, rx, d_t, d_r, 2.0 * SQRT_2).unwrap();
        assert!((alpha - SQRT_2).abs() < 1e-14);

        let s = solve_erp(tx, rx, &nlos(d_t, d_r, 2.0 * SQRT_2), 1, 0).unwrap();
        assert!(s.erp.distance(Vec3::new(0.0, 1.0, 0.0)) < 1e-12);
        assert!(s.residual < 1e-12);
        assert!((s.segments.alpha - SQRT_2).abs() < 1e-12);
        assert!((s.segments.beta - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn parallel_directions_rejected() {
        let d = Vec3::new(0.0, 0.0, 1.0);
        assert!(matches!(
            solve_alpha(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), d, d, 3.0),
            Err(ErpError::DegenerateDirections(_))
        ));
    }

    #[test]
    fn los_rejected() {
        let mut p = nlos(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 2.0);
        p.is_los = true;
        p.bounce_count = 0;
        assert_eq!(
            solve_erp(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), &p, 1, 0),
            Err(ErpError::LosPath)
        );
    }

    #[test]
    fn inconsistent_short_delay_clamps_to_best_endpoint() {
        let tx = Vec3::ZERO;
        let rx = Vec3::new(10.0, 0.0, 0.0);
        let geom = SegmentGeometry {
            tx,
            rx,
            d_t: Vec3::new(1.0, 0.0, 0.0),
            d_r: Vec3::new(0.0, 1.0, 0.0),
        };
        let alpha_star = solve_alpha(tx, rx, geom.d_t, geom.d_r, 1.0).unwrap();
        assert!(!(0.0..=1.0).contains(&alpha_star));
        // f(0, 1) = ‖(-10, 1, 0)‖² = 101, f(1, 0) = ‖(-9, 0, 0)‖² = 81.
        assert_eq!(geom.cost(0.0, 1.0), 101.0);
        assert_eq!(geom.cost(1.0, 0.0), 81.0);
        let s = solve_segments(&geom, 1.0).unwrap();
        assert_eq!((s.alpha, s.beta), (1.0, 0.0));
        assert!(!s.is_interior());
    }

    #[test]
    fn equal_endpoints_put_the_minimizer_inside() {
        // f restricted to α + β = L is a convex parabola, so f(0, L) = f(L, 0)
        // forces α* = L/2 and the endpoint tie rule is never reached.
        let g = SegmentGeometry {
            tx: Vec3::new(-5.0, 0.0, 0.0),
            rx: Vec3::new(5.0, 0.0, 0.0),
            d_t: Vec3::new(0.0, 0.0, 1.0),
            d_r: Vec3::new(0.0, 0.0, -1.0),
        };
        assert_eq!(g.cost(0.0, 4.0), g.cost(4.0, 0.0));
        let s = solve_segments(&g, 4.0).unwrap();
        assert_eq!((s.alpha, s.beta), (2.0, 2.0));
    }

    #[test]
    fn solve_drop_counts_skips() {
        let tx = Vec3::new(-1.0, 0.0, 0.0);
        let rx = Vec3::new(1.0, 0.0, 0.0);
        let los = PathComponent {
            is_los: true,
            bounce_count: 0,
            ..nlos(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 2.0)
        };
        let only_los = Drop {
            drop_id: 4,
            tx,
            rx,
            paths: vec![los.clone()],
        };
        let r = solve_drop(&only_los);
        assert!(r.solutions.is_empty());
        assert_eq!((r.los_skipped, r.paths_in), (1, 1));

        let d_t = Vec3::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0);
        let d_r = Vec3::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0);
        let degenerate = nlos(d_t, d_t, 3.0);
        let good = nlos(d_t, d_r, 2.0 * SQRT_2);
        let d = Drop {
            drop_id: 2,
            tx,
            rx,
            paths: vec![los, good.clone(), degenerate, good],
        };
        let r = solve_drop(&d);
        assert_eq!(r.solutions.len(), 2);
        assert_eq!(r.degenerate_skipped, 1);
        assert_eq!(r.solutions[0].path_id, 1);
        assert_eq!(r.solutions[1].path_id, 3);
        assert!(r.solutions.iter().all(|s| s.drop_id == 2));
    }

    fn unit_vec() -> impl Strategy<Value = Vec3> {
        (-1.0f64..=1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, lon)| {
            let r = (1.0 - z * z).sqrt();
            Vec3::new(r * lon.cos(), r * lon.sin(), z)
        })
    }

    fn pos() -> impl Strategy<Value = Vec3> {
        (-8.0f64..8.0, -8.0f64..8.0, -8.0f64..8.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn constraints_hold(tx in pos(), rx in pos(), d_t in unit_vec(), d_r in unit_vec(),
                            extra in 0.01f64..20.0) {
            prop_assume!((d_t - d_r).norm_sq() > 1e-6);
            let l = tx.distance(rx) + extra;
            let g = SegmentGeometry { tx, rx, d_t, d_r };
            let s = solve_segments(&g, l).unwrap();
            prop_assert!(s.alpha >= 0.0 && s.alpha <= l);
            prop_assert!(s.beta >= 0.0 && s.beta <= l);
            prop_assert!((s.alpha + s.beta - l).abs() <= 1e-9 * l);
            if s.is_interior() {
                // Central differences with step 1e-4·L.
                let h = 1e-4 * l;
                let dfa = (g.cost(s.alpha + h, s.beta) - g.cost(s.alpha - h, s.beta)) / (2.0 * h);
                let dfb = (g.cost(s.alpha, s.beta + h) - g.cost(s.alpha, s.beta - h)) / (2.0 * h);
                prop_assert!((dfa - dfb).abs() < 1e-6, "{} vs {}", dfa, dfb);
                let (ga, gb) = g.gradient(s.alpha, s.beta);
                prop_assert!((ga - gb).abs() < 1e-8);
            }
            // The constrained minimizer is no worse than either endpoint.
            let f = g.cost(s.alpha, s.beta);
            prop_assert!(f <= g.cost(0.0, l) + 1e-9 && f <= g.cost(l, 0.0) + 1e-9);
        }

        #[test]
        fn single_bounce_is_exact(tx in pos(), rx in pos(), p in pos()) {
            prop_assume!(tx.distance(p) > 0.1 && rx.distance(p) > 0.1);
            let d_t = (p - tx).normalized().unwrap();
            let d_r = (rx - p).normalized().unwrap();
            prop_assume!((d_t - d_r).norm_sq() > 1e-4);
            let l = tx.distance(p) + p.distance(rx);
            let s = solve_erp(tx, rx, &nlos(d_t, d_r, l), 1, 0).unwrap();
            prop_assert!(s.erp.distance(p) < 1e-6);
            prop_assert!(s.cost() < 1e-18);
        }
    }

    #[test]
    fn angles_reconstruct_directions() {
        // d_R derived from the AoA must match the geometric direction
        // scatterer → receiver, not its negation.
        let p = nlos(Vec3::new(0.0, 0.6, 0.8), Vec3::new(0.0, 0.6, -0.8), 10.0);
        let d_r = direction_from_angles(p.aoa);
        assert!(d_r.distance(Vec3::new(0.0, 0.6, -0.8)) < 1e-15);
        assert_eq!(p.aod, AnglePair::new(p.aod.azimuth, p.aod.zenith));
    }
}
