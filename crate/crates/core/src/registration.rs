//! Rotation between two point clouds related by an unknown similarity
//! transform, from averaged 3-point hypotheses.
//!
//! Correspondences are positional: point `i` of the source matches point `i`
//! of the destination.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitBall};

use crate::average::{robust_average, AveragingResult, TludConfig};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::so3::{project_rank2, Mat3, Rotation, Vec3};
use crate::synth::{domain, random_outlier, stream_rng};

/// Minimum triangle side length.
pub const MIN_SIDE: f64 = 1e-9;
/// Attempts drawn from one random stream while harvesting.
pub const HARVEST_BATCH: usize = 4096;
const BATCHES_PER_ROUND: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewPoints { have: 0, need: 1 });
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinitePoint);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.points.iter().fold(
            (self.points[0], self.points[0]),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        )
    }
}

/// Random downsample to `target_count` points, then a uniform scale and
/// translation placing the bounding box inside `[-0.5, 0.5]³` with its
/// longest side spanning exactly 1.
pub fn normalize_cloud(cloud: &PointCloud, target_count: usize, seed: u64) -> Result<PointCloud> {
    if target_count == 0 || cloud.len() < target_count {
        return Err(Error::TooFewPoints {
            have: cloud.len(),
            need: target_count.max(1),
        });
    }
    let mut rng = stream_rng(seed, domain::DOWNSAMPLE, 0);
    let mut picked = index::sample(&mut rng, cloud.len(), target_count).into_vec();
    picked.sort_unstable();
    let points: Vec<Vec3> = picked.into_iter().map(|i| cloud.points[i]).collect();
    let sub = PointCloud { points };

    let (lo, hi) = sub.bounds();
    let longest = (hi - lo).max();
    if !(longest > 0.0) {
        return Err(Error::DegenerateCloud);
    }
    let center = (lo + hi) / 2.0;
    let points = sub.points.iter().map(|p| (p - center) / longest).collect();
    Ok(PointCloud { points })
}

/// Ground-truth similarity transform and corruption/harvest settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationScenario {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
    /// Per-coordinate Gaussian noise added after the transform.
    pub noise_sigma: f64,
    /// Fraction of destination points replaced by random points.
    pub outlier_fraction: f64,
    pub n_hypotheses: usize,
    /// Accepted spread `max/min - 1` of the three side ratios.
    pub ratio_tolerance: f64,
    pub attempt_cap: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl RegistrationScenario {
    pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;
    pub const DEFAULT_HYPOTHESES: usize = 2000;
    pub const DEFAULT_RATIO_TOLERANCE: f64 = 0.1;
    pub const DEFAULT_ATTEMPT_CAP: usize = 1_000_000;
    pub const MAX_OUTLIER_FRACTION: f64 = 0.98;

    /// Scale uniform in `(1, 5)`, uniform rotation and translation uniform in
    /// `[-1, 1]³`, all drawn from `seed`.
    pub fn random(seed: u64, outlier_fraction: f64) -> Self {
        let mut rng = stream_rng(seed, domain::SCENARIO, 0);
        let scale = loop {
            let s = 1.0 + 4.0 * rng.random::<f64>();
            if s > 1.0 {
                break s;
            }
        };
        let rotation = random_outlier(&mut rng);
        let translation = Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        Self {
            scale,
            rotation,
            translation,
            noise_sigma: Self::DEFAULT_NOISE_SIGMA,
            outlier_fraction,
            n_hypotheses: Self::DEFAULT_HYPOTHESES,
            ratio_tolerance: Self::DEFAULT_RATIO_TOLERANCE,
            attempt_cap: Self::DEFAULT_ATTEMPT_CAP,
            seed,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidScenario("scale must be positive and finite"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidScenario("noise sigma must be finite and non-negative"));
        }
        if !(0.0..=Self::MAX_OUTLIER_FRACTION).contains(&self.outlier_fraction) {
            return Err(Error::InvalidScenario("outlier fraction must lie in [0, 0.98]"));
        }
        if !self.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidScenario("translation must be finite"));
        }
        if self.n_hypotheses == 0 || self.attempt_cap == 0 {
            return Err(Error::InvalidScenario("hypothesis count and attempt cap must be positive"));
        }
        if !(self.ratio_tolerance >= 0.0) {
            return Err(Error::InvalidScenario("ratio tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// `p ↦ s·R·p + t`, Gaussian noise, then `round(fraction·n)` points replaced
/// by points uniform in the ball of diameter `√3·s` around the transformed
/// centroid.
pub fn corrupt_cloud(cloud: &PointCloud, scen: &RegistrationScenario) -> Result<PointCloud> {
    scen.validate()?;
    let mut rng = stream_rng(scen.seed, domain::CORRUPT, 0);
    let mut points: Vec<Vec3> = cloud
        .points
        .iter()
        .map(|p| scen.rotation.rotate(p) * scen.scale + scen.translation)
        .collect();
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;

    if scen.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, scen.noise_sigma).expect("validated sigma");
        for p in &mut points {
            for c in p.iter_mut() {
                *c += normal.sample(&mut rng);
            }
        }
    }

    let n_replace = libm::round(scen.outlier_fraction * points.len() as f64) as usize;
    let radius = libm::sqrt(3.0) * scen.scale / 2.0;
    for i in index::sample(&mut rng, points.len(), n_replace.min(points.len())) {
        let [x, y, z]: [f64; 3] = UnitBall.sample(&mut rng);
        points[i] = centroid + Vec3::new(x, y, z) * radius;
    }
    PointCloud::new(points)
}

fn sides(tri: &[Vec3; 3]) -> [f64; 3] {
    [
        (tri[1] - tri[0]).norm(),
        (tri[2] - tri[1]).norm(),
        (tri[0] - tri[2]).norm(),
    ]
}

/// Accepts when the three side ratios `|dst side| / |src side|` agree:
/// `max/min - 1 ≤ tol`.
pub fn triangle_ratio_check(src: &[Vec3; 3], dst: &[Vec3; 3], tol: f64) -> Result<bool> {
    let (a, b) = (sides(src), sides(dst));
    if a.iter().chain(&b).any(|&s| !(s > MIN_SIDE)) {
        return Err(Error::DegenerateTriangle);
    }
    let ratios = [b[0] / a[0], b[1] / a[1], b[2] / a[2]];
    let hi = ratios[0].max(ratios[1]).max(ratios[2]);
    let lo = ratios[0].min(ratios[1]).min(ratios[2]);
    Ok(hi / lo - 1.0 <= tol)
}

fn centered_unit_rms(tri: &[Vec3; 3]) -> Result<[Vec3; 3]> {
    let c = (tri[0] + tri[1] + tri[2]) / 3.0;
    let d = [tri[0] - c, tri[1] - c, tri[2] - c];
    let rms = libm::sqrt(d.iter().map(|v| v.norm_squared()).sum::<f64>() / 3.0);
    if !(rms > 1e-12) {
        return Err(Error::CollinearPoints);
    }
    Ok([d[0] / rms, d[1] / rms, d[2] / rms])
}

/// Rotation aligning `src` onto `dst` with per-side centring and scale
/// normalisation: the SO(3) projection of `Σ dst'ᵢ src'ᵢᵀ`.
pub fn align_three_points(src: &[Vec3; 3], dst: &[Vec3; 3]) -> Result<Rotation> {
    let s = centered_unit_rms(src)?;
    let d = centered_unit_rms(dst)?;
    let cross = (0..3).fold(Mat3::zeros(), |acc, i| acc + d[i] * s[i].transpose());
    project_rank2(&cross, 1e-9).map_err(|_| Error::CollinearPoints)
}

fn harvest_batch(src: &PointCloud, dst: &PointCloud, scen: &RegistrationScenario, batch: usize) -> Vec<Rotation> {
    let n = src.len();
    let attempts = HARVEST_BATCH.min(scen.attempt_cap - batch * HARVEST_BATCH);
    let mut rng = stream_rng(scen.seed, domain::HARVEST, batch as u64);
    let mut accepted = Vec::new();
    for _ in 0..attempts {
        let i = rng.random_range(0..n);
        let j = loop {
            let j = rng.random_range(0..n);
            if j != i {
                break j;
            }
        };
        let k = loop {
            let k = rng.random_range(0..n);
            if k != i && k != j {
                break k;
            }
        };
        let a = [src.points[i], src.points[j], src.points[k]];
        let b = [dst.points[i], dst.points[j], dst.points[k]];
        if let Ok(true) = triangle_ratio_check(&a, &b, scen.ratio_tolerance) {
            if let Ok(r) = align_three_points(&a, &b) {
                accepted.push(r);
            }
        }
    }
    accepted
}

/// Collects `n_hypotheses` rotations from random filtered 3-point samples.
///
/// Attempts are grouped in batches of [`HARVEST_BATCH`], each with its own
/// random stream; accepted rotations are kept in batch order, so the result
/// does not depend on `scen.parallel`.
pub fn harvest_hypotheses(
    src: &PointCloud,
    dst: &PointCloud,
    scen: &RegistrationScenario,
) -> Result<Vec<Rotation>> {
    scen.validate()?;
    if src.len() != dst.len() {
        return Err(Error::CloudLengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints {
            have: src.len(),
            need: 3,
        });
    }

    let total_batches = scen.attempt_cap.div_ceil(HARVEST_BATCH);
    let mut hypotheses = Vec::with_capacity(scen.n_hypotheses);
    let mut next = 0;
    while hypotheses.len() < scen.n_hypotheses && next < total_batches {
        let end = (next + BATCHES_PER_ROUND).min(total_batches);
        let rounds = map_indexed(end - next, scen.parallel, |g| {
            harvest_batch(src, dst, scen, next + g)
        });
        for batch in rounds {
            hypotheses.extend(batch);
        }
        next = end;
    }
    if hypotheses.len() < scen.n_hypotheses {
        return Err(Error::AttemptCapExceeded {
            collected: hypotheses.len(),
            attempts: scen.attempt_cap,
        });
    }
    hypotheses.truncate(scen.n_hypotheses);
    Ok(hypotheses)
}

/// Harvests hypotheses and averages them with [`robust_average`].
pub fn register_rotation(
    src: &PointCloud,
    dst: &PointCloud,
    scen: &RegistrationScenario,
    config: &TludConfig,
) -> Result<AveragingResult> {
    let hypotheses = harvest_hypotheses(src, dst, scen)?;
    robust_average(&hypotheses, config)
}

/// Normalised source cloud and its corrupted transformed copy.
pub fn registration_pair(
    base: &PointCloud,
    target_count: usize,
    scen: &RegistrationScenario,
) -> Result<(PointCloud, PointCloud)> {
    let src = normalize_cloud(base, target_count, scen.seed)?;
    let dst = corrupt_cloud(&src, scen)?;
    Ok((src, dst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_map, geodesic_distance, RotationVector};

    fn tri() -> [Vec3; 3] {
        [
            Vec3::new(0.1, 0.2, -0.3),
            Vec3::new(0.9, -0.1, 0.2),
            Vec3::new(-0.2, 0.7, 0.4),
        ]
    }

    #[test]
    fn similar_triangles_pass_any_tolerance() {
        let a = tri();
        let b = a.map(|p| p * 3.0);
        assert!(triangle_ratio_check(&a, &b, 0.0).unwrap() || {
            // Rounding can put the spread a few ulps above zero.
            triangle_ratio_check(&a, &b, 1e-15).unwrap()
        });
        assert!(triangle_ratio_check(&a, &b, 0.1).unwrap());
    }

    #[test]
    fn stretched_side_is_rejected() {
        let a = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let b = [Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(!triangle_ratio_check(&a, &b, 0.1).unwrap());
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let a = tri();
        let b = [a[0], a[0], a[2]];
        assert_eq!(triangle_ratio_check(&a, &b, 0.1), Err(Error::DegenerateTriangle));
    }

    #[test]
    fn alignment_recovers_similarity() {
        let r = exp_map(&RotationVector::new(0.7, -1.2, 2.0));
        let t = Vec3::new(1.0, -2.0, 0.5);
        let a = tri();
        let b = a.map(|p| r.rotate(&p) * 3.0 + t);
        let est = align_three_points(&a, &b).unwrap();
        assert!((est.matrix() - r.matrix()).norm() < 1e-9);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let a = [Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0)];
        assert_eq!(align_three_points(&a, &a), Err(Error::CollinearPoints));
        let p = [Vec3::zeros(); 3];
        assert_eq!(align_three_points(&p, &p), Err(Error::CollinearPoints));
    }

    fn grid_cloud() -> PointCloud {
        let mut points = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (x, y) = (i as f64 * 0.1, j as f64 * 0.07);
                points.push(Vec3::new(x, y, 0.3 * libm::sin(3.0 * x) * libm::cos(2.0 * y)));
            }
        }
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn normalized_cloud_fits_unit_cube() {
        let c = normalize_cloud(&grid_cloud(), 60, 4).unwrap();
        assert_eq!(c.len(), 60);
        let (lo, hi) = c.bounds();
        assert!(lo.iter().all(|&v| v >= -0.5) && hi.iter().all(|&v| v <= 0.5));
        assert!(((hi - lo).max() - 1.0).abs() < 1e-12);
        assert!(matches!(
            normalize_cloud(&grid_cloud(), 101, 0),
            Err(Error::TooFewPoints { have: 100, need: 101 })
        ));
    }

    #[test]
    fn cloud_rejects_bad_points() {
        assert!(PointCloud::new(Vec::new()).is_err());
        assert_eq!(
            PointCloud::new(alloc::vec![Vec3::new(f64::NAN, 0.0, 0.0)]),
            Err(Error::NonFinitePoint)
        );
    }

    #[test]
    fn clean_corruption_is_exact_similarity() {
        let src = normalize_cloud(&grid_cloud(), 100, 1).unwrap();
        let mut scen = RegistrationScenario::random(5, 0.0);
        scen.noise_sigma = 0.0;
        let dst = corrupt_cloud(&src, &scen).unwrap();
        for (p, q) in src.points().iter().zip(dst.points()) {
            let expected = scen.rotation.rotate(p) * scen.scale + scen.translation;
            assert!((q - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn replaced_points_lie_in_ball() {
        let src = normalize_cloud(&grid_cloud(), 100, 1).unwrap();
        let mut scen = RegistrationScenario::random(6, 0.9);
        scen.noise_sigma = 0.0;
        let dst = corrupt_cloud(&src, &scen).unwrap();
        let clean: Vec<Vec3> = src
            .points()
            .iter()
            .map(|p| scen.rotation.rotate(p) * scen.scale + scen.translation)
            .collect();
        let centroid = clean.iter().sum::<Vec3>() / clean.len() as f64;
        let radius = libm::sqrt(3.0) * scen.scale / 2.0;
        let replaced: Vec<_> = dst
            .points()
            .iter()
            .zip(&clean)
            .filter(|(q, c)| (*q - *c).norm() > 1e-12)
            .collect();
        assert_eq!(replaced.len(), 90);
        for (q, _) in replaced {
            assert!((q - centroid).norm() <= radius);
        }
    }

    #[test]
    fn scenario_validation() {
        let mut s = RegistrationScenario::random(1, 0.5);
        assert!(s.scale > 1.0 && s.scale < 5.0);
        assert!(s.validate().is_ok());
        s.outlier_fraction = 0.99;
        assert!(s.validate().is_err());
    }

    #[test]
    fn clean_harvest_gives_truth() {
        let base = grid_cloud();
        let mut scen = RegistrationScenario::random(11, 0.0);
        scen.noise_sigma = 0.0;
        scen.n_hypotheses = 200;
        let (src, dst) = registration_pair(&base, 100, &scen).unwrap();
        let hyps = harvest_hypotheses(&src, &dst, &scen).unwrap();
        assert_eq!(hyps.len(), 200);
        for h in &hyps {
            assert!(geodesic_distance(h, &scen.rotation) < 1e-9);
        }
    }

    #[test]
    fn harvest_reports_cap() {
        let base = grid_cloud();
        let mut scen = RegistrationScenario::random(12, 0.0);
        scen.ratio_tolerance = 0.1;
        scen.n_hypotheses = 100;
        scen.attempt_cap = 50;
        let (src, dst) = registration_pair(&base, 100, &scen).unwrap();
        assert!(matches!(
            harvest_hypotheses(&src, &dst, &scen),
            Err(Error::AttemptCapExceeded { attempts: 50, .. })
        ));
        let short = PointCloud::new(alloc::vec![Vec3::zeros(), Vec3::x()]).unwrap();
        assert!(matches!(
            harvest_hypotheses(&short, &short, &scen),
            Err(Error::TooFewPoints { have: 2, need: 3 })
        ));
    }
}
