//! RF images as point clouds: γ filtering, multi-vantage fusion, reference
//! sampling and Chamfer-distance evaluation.

mod kdtree;

pub use kdtree::KdTree;

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::erp::{solve_erp, DropSolution, ErpError, ErpSolution};
use crate::geom::Vec3;
use crate::pathgen::{Drop, Scene};

/// Default γ, metres.
pub const DEFAULT_GAMMA: f64 = 10.0;

/// Default reference-cloud size.
pub const DEFAULT_REFERENCE_POINTS: usize = 10_000;

/// Target clouds larger than this are searched through a [`KdTree`].
pub const NN_TREE_THRESHOLD: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("scene has no surfaces to sample")]
    EmptyScene,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("point ({drop_id}, {path_id}) appears twice")]
    DuplicatePoint { drop_id: u32, path_id: u32 },
    #[error("point ({drop_id}, {path_id}) has non-finite coordinates")]
    NonFinite { drop_id: u32, path_id: u32 },
    #[error("pair count {requested} outside 1..={available}")]
    PairCountOutOfRange { requested: usize, available: usize },
    #[error("pair counts must be strictly ascending")]
    PairCountsNotAscending,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Vec3,
    pub gain_db: f64,
    pub residual: f64,
    pub drop_id: u32,
    pub path_id: u32,
}

impl From<&ErpSolution> for CloudPoint {
    fn from(s: &ErpSolution) -> Self {
        Self {
            position: s.erp,
            gain_db: s.gain_db,
            residual: s.residual,
            drop_id: s.drop_id,
            path_id: s.path_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<CloudPoint>) -> Result<Self, CloudError> {
        if let Some(p) = points.iter().find(|p| !p.position.is_finite()) {
            return Err(CloudError::NonFinite {
                drop_id: p.drop_id,
                path_id: p.path_id,
            });
        }
        if !ids_grouped_and_ascending(&points) {
            let mut seen = HashSet::with_capacity(points.len());
            if let Some(p) = points.iter().find(|p| !seen.insert((p.drop_id, p.path_id))) {
                return Err(CloudError::DuplicatePoint {
                    drop_id: p.drop_id,
                    path_id: p.path_id,
                });
            }
        }
        Ok(Self { points })
    }

    /// Bare positions, numbered `(0, i)`.
    pub fn from_positions(positions: &[Vec3]) -> Result<Self, CloudError> {
        Self::new(
            positions
                .iter()
                .enumerate()
                .map(|(i, &position)| CloudPoint {
                    position,
                    gain_db: 0.0,
                    residual: 0.0,
                    drop_id: 0,
                    path_id: i as u32,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points whose drop id is in `drops`, order preserved.
    pub fn restricted_to(&self, drops: &[u32]) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .filter(|p| drops.contains(&p.drop_id))
                .copied()
                .collect(),
        }
    }
}

/// Cheap uniqueness proof for the usual layout: each drop's points form one
/// contiguous run with strictly increasing path ids.
fn ids_grouped_and_ascending(points: &[CloudPoint]) -> bool {
    let mut runs = HashSet::new();
    let mut prev: Option<(u32, u32)> = None;
    for p in points {
        match prev {
            Some((d, path)) if d == p.drop_id => {
                if p.path_id <= path {
                    return false;
                }
            }
            _ => {
                if !runs.insert(p.drop_id) {
                    return false;
                }
            }
        }
        prev = Some((p.drop_id, p.path_id));
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub gamma: f64,
    /// Drop ids to fuse; `None` fuses all.
    pub drop_subset: Option<Vec<u32>>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            drop_subset: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), CloudError> {
        if !(self.gamma > 0.0) || self.gamma.is_nan() {
            return Err(CloudError::InvalidGamma(self.gamma));
        }
        Ok(())
    }
}

/// Union over the selected drops of every ERP with chord `‖a − b‖ < γ`.
pub fn filter_and_fuse(groups: &[DropSolution], cfg: &FusionConfig) -> Result<PointCloud, CloudError> {
    cfg.validate()?;
    let gamma = cfg.gamma;
    filter_and_fuse_with(groups, cfg.drop_subset.as_deref(), |s| s.residual < gamma)
}

/// Fusion with a caller-supplied acceptance test in place of the fixed γ
/// radius (e.g. an adaptive per-path bound).
pub fn filter_and_fuse_with<F>(
    groups: &[DropSolution],
    drop_subset: Option<&[u32]>,
    accept: F,
) -> Result<PointCloud, CloudError>
where
    F: Fn(&ErpSolution) -> bool,
{
    let points = groups
        .iter()
        .filter(|g| drop_subset.is_none_or(|s| s.contains(&g.drop_id)))
        .flat_map(|g| g.solutions.iter())
        .filter(|s| accept(s))
        .map(CloudPoint::from)
        .collect();
    PointCloud::new(points)
}

/// Where every input path of [`image_drops`] ended up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImageStats {
    pub paths_in: usize,
    pub los_skipped: usize,
    pub degenerate_skipped: usize,
    pub invalid_delay_skipped: usize,
    pub rejected_by_gamma: usize,
    pub kept: usize,
}

/// Solves and γ-filters drops in one pass, without keeping the per-drop
/// solutions; the result equals `filter_and_fuse` over `solve_drop`.
pub fn image_drops(drops: &[Drop], cfg: &FusionConfig) -> Result<(PointCloud, ImageStats), CloudError> {
    cfg.validate()?;
    let mut stats = ImageStats::default();
    let mut points = Vec::new();
    let selected = drops
        .iter()
        .filter(|d| cfg.drop_subset.as_ref().is_none_or(|s| s.contains(&d.drop_id)));
    for d in selected {
        stats.paths_in += d.paths.len();
        for (i, p) in d.paths.iter().enumerate() {
            match solve_erp(d.tx, d.rx, p, d.drop_id, i as u32) {
                Ok(s) if s.residual < cfg.gamma => points.push(CloudPoint::from(&s)),
                Ok(_) => stats.rejected_by_gamma += 1,
                Err(ErpError::LosPath) => stats.los_skipped += 1,
                Err(ErpError::DegenerateDirections(_)) => stats.degenerate_skipped += 1,
                Err(ErpError::NonPositiveDelay(_)) => stats.invalid_delay_skipped += 1,
            }
        }
    }
    stats.kept = points.len();
    Ok((PointCloud::new(points)?, stats))
}

/// `n` points drawn area-uniformly over the scene's triangles.
pub fn sample_reference(scene: &Scene, n: usize, seed: u64) -> Result<PointCloud, CloudError> {
    if n == 0 {
        return Err(CloudError::NoSamples);
    }
    let sampler = scene.surface_sampler().ok_or(CloudError::EmptyScene)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vec3> = (0..n).map(|_| sampler.sample(&mut rng).1).collect();
    PointCloud::from_positions(&positions)
}

/// Mean over `from` of the distance to the nearest point of `to`.
pub fn directed_mean_nn(from: &[Vec3], to: &[Vec3]) -> f64 {
    let sum: f64 = if to.len() > NN_TREE_THRESHOLD {
        let tree = KdTree::build(to);
        from.iter()
            .map(|&q| tree.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
            .sum()
    } else {
        from.iter()
            .map(|&q| {
                to.iter()
                    .map(|&p| (q - p).norm_sq())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum()
    };
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: the two directed mean nearest-neighbour
/// distances, added.
pub fn chamfer(recon: &PointCloud, reference: &PointCloud) -> Result<f64, CloudError> {
    if recon.is_empty() || reference.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let a = recon.positions();
    let b = reference.positions();
    Ok(directed_mean_nn(&a, &b) + directed_mean_nn(&b, &a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub num_pairs: usize,
    /// NaN when the fused cloud is empty.
    pub chamfer_m: f64,
    pub points_kept: usize,
}

/// For each `k`, fuses the first `k` drop groups and scores the result
/// against `reference`.
pub fn tradeoff_curve(
    groups: &[DropSolution],
    reference: &PointCloud,
    cfg: &FusionConfig,
    pair_counts: &[usize],
) -> Result<Vec<TradeoffRow>, CloudError> {
    let fused = filter_and_fuse(
        groups,
        &FusionConfig {
            gamma: cfg.gamma,
            drop_subset: None,
        },
    )?;
    let order: Vec<u32> = groups.iter().map(|g| g.drop_id).collect();
    prefix_tradeoff(&fused, &order, reference, pair_counts)
}

/// Scores the part of an already fused cloud that belongs to the first `k`
/// entries of `drop_order`, for each `k` in `pair_counts`.
pub fn prefix_tradeoff(
    fused: &PointCloud,
    drop_order: &[u32],
    reference: &PointCloud,
    pair_counts: &[usize],
) -> Result<Vec<TradeoffRow>, CloudError> {
    if reference.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    if pair_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CloudError::PairCountsNotAscending);
    }
    if let Some(&bad) = pair_counts.iter().find(|&&k| k == 0 || k > drop_order.len()) {
        return Err(CloudError::PairCountOutOfRange {
            requested: bad,
            available: drop_order.len(),
        });
    }
    let ref_positions = reference.positions();
    let tree = (ref_positions.len() > NN_TREE_THRESHOLD).then(|| KdTree::build(&ref_positions));
    Ok(pair_counts
        .iter()
        .map(|&k| {
            let recon = fused.restricted_to(&drop_order[..k]).positions();
            let chamfer_m = if recon.is_empty() {
                f64::NAN
            } else {
                let forward = match &tree {
                    Some(t) => {
                        recon
                            .iter()
                            .map(|&q| t.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
                            .sum::<f64>()
                            / recon.len() as f64
                    }
                    None => directed_mean_nn(&recon, &ref_positions),
                };
                forward + directed_mean_nn(&ref_positions, &recon)
            };
            TradeoffRow {
                num_pairs: k,
                chamfer_m,
                points_kept: recon.len(),
            }
        })
        .collect())
}
