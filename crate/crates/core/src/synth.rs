//! Synthetic rotation sets: Gaussian inliers around a ground truth and
//! outliers built column by column from random unit vectors.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::so3::{exp_map, Mat3, Rotation, RotationVector, Vec3};

/// Stream domains keep the random sequences of unrelated consumers apart.
pub mod domain {
    pub const TRIAL: u64 = 1;
    pub const DOWNSAMPLE: u64 = 2;
    pub const CORRUPT: u64 = 3;
    pub const HARVEST: u64 = 4;
    pub const SCENARIO: u64 = 5;
}

/// Counter-based generator for `(seed, domain, index)`. Distinct indices get
/// independent ChaCha streams, so work items can run in any order.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

/// `Exp(e)·truth` with `e` isotropic Gaussian, per-axis standard deviation
/// `sigma_deg` degrees.
pub fn random_inlier<R: Rng + ?Sized>(truth: &Rotation, sigma_deg: f64, rng: &mut R) -> Rotation {
    if sigma_deg == 0.0 {
        return *truth;
    }
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("finite non-negative sigma");
    let e = Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    exp_map(&RotationVector::from_vector(e)) * *truth
}

/// First column uniform on the sphere, second uniform on the great circle
/// perpendicular to it, third their cross product.
pub fn random_outlier<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let c1 = random_unit_vector(rng);
    let c2 = loop {
        let u = random_unit_vector(rng);
        let w = u - c1 * u.dot(&c1);
        let n = w.norm();
        if n > 1e-6 {
            break w / n;
        }
    };
    let c3 = c1.cross(&c2);
    Rotation::from_matrix_unchecked(Mat3::from_columns(&[c1, c2, c3]))
}

/// `(n_inliers, n_outliers)` with `n_outliers = round(ratio·n)`.
pub fn outlier_split(n_samples: usize, outlier_ratio: f64) -> Result<(usize, usize)> {
    if n_samples == 0 {
        return Err(Error::InvalidScenario("n_samples must be at least 1"));
    }
    if !(0.0..1.0).contains(&outlier_ratio) {
        return Err(Error::InvalidScenario("outlier_ratio must lie in [0, 1)"));
    }
    let n_outliers = libm::round(outlier_ratio * n_samples as f64) as usize;
    if n_outliers >= n_samples {
        return Err(Error::InvalidScenario("at least one inlier is required"));
    }
    Ok((n_samples - n_outliers, n_outliers))
}

/// One Monte-Carlo experiment setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchScenario {
    pub n_samples: usize,
    pub outlier_ratio: f64,
    pub sigma_deg: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl BenchScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_deg >= 0.0 && self.sigma_deg.is_finite()) {
            return Err(Error::InvalidScenario("sigma_deg must be finite and non-negative"));
        }
        outlier_split(self.n_samples, self.outlier_ratio).map(|_| ())
    }

    /// Data for trial `index`; depends only on `(seed, index)`.
    pub fn trial(&self, index: usize) -> Result<SyntheticSet> {
        self.validate()?;
        let mut rng = stream_rng(self.seed, domain::TRIAL, index as u64);
        synthetic_set(self.n_samples, self.outlier_ratio, self.sigma_deg, &mut rng)
    }
}

/// Shuffled samples with their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub truth: Rotation,
    pub samples: Vec<Rotation>,
    pub is_inlier: Vec<bool>,
}

impl SyntheticSet {
    pub fn inlier_indices(&self) -> Vec<usize> {
        self.is_inlier
            .iter()
            .enumerate()
            .filter(|(_, &inlier)| inlier)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Draws a uniform truth, the inliers around it and the outliers, then shuffles.
pub fn synthetic_set<R: Rng + ?Sized>(
    n_samples: usize,
    outlier_ratio: f64,
    sigma_deg: f64,
    rng: &mut R,
) -> Result<SyntheticSet> {
    let (n_inliers, n_outliers) = outlier_split(n_samples, outlier_ratio)?;
    let truth = random_outlier(rng);
    let mut tagged: Vec<(Rotation, bool)> = Vec::with_capacity(n_samples);
    tagged.extend((0..n_inliers).map(|_| (random_inlier(&truth, sigma_deg, rng), true)));
    tagged.extend((0..n_outliers).map(|_| (random_outlier(rng), false)));
    tagged.shuffle(rng);
    let (samples, is_inlier) = tagged.into_iter().unzip();
    Ok(SyntheticSet {
        truth,
        samples,
        is_inlier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{geodesic_distance, log_map};

    #[test]
    fn zero_sigma_returns_truth() {
        let mut rng = stream_rng(1, 0, 0);
        let truth = random_outlier(&mut rng);
        assert_eq!(random_inlier(&truth, 0.0, &mut rng), truth);
    }

    #[test]
    fn outliers_are_rotations() {
        let mut rng = stream_rng(2, 0, 0);
        for _ in 0..1000 {
            assert!(random_outlier(&mut rng).is_valid());
        }
    }

    #[test]
    fn split_rounds_outlier_count() {
        assert_eq!(outlier_split(100, 0.9).unwrap(), (10, 90));
        assert_eq!(outlier_split(1000, 0.99).unwrap(), (10, 990));
        assert_eq!(outlier_split(3, 0.5).unwrap(), (1, 2));
        assert!(outlier_split(10, 1.0).is_err());
        assert!(outlier_split(1, 0.9).is_err());
        assert!(outlier_split(0, 0.0).is_err());
    }

    #[test]
    fn trial_is_deterministic_and_tagged() {
        let s = BenchScenario {
            n_samples: 50,
            outlier_ratio: 0.8,
            sigma_deg: 5.0,
            n_trials: 3,
            seed: 9,
        };
        let a = s.trial(1).unwrap();
        assert_eq!(a, s.trial(1).unwrap());
        assert_ne!(a.truth, s.trial(2).unwrap().truth);
        assert_eq!(a.inlier_indices().len(), 10);
        for i in a.inlier_indices() {
            assert!(geodesic_distance(&a.samples[i], &a.truth) < 40f64.to_radians());
        }
    }

    #[test]
    fn inlier_noise_is_tangent_gaussian() {
        let mut rng = stream_rng(3, 0, 0);
        let truth = random_outlier(&mut rng);
        let n = 10_000;
        let residuals: Vec<Vec3> = (0..n)
            .map(|_| {
                let r = random_inlier(&truth, 5.0, &mut rng);
                log_map(&(r * truth.transpose())).into_inner()
            })
            .collect();
        let sigma = 5f64.to_radians();
        for axis in 0..3 {
            let mean = residuals.iter().map(|v| v[axis]).sum::<f64>() / n as f64;
            let var = residuals.iter().map(|v| (v[axis] - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "axis {axis} mean {mean}");
            assert!((var.sqrt() / sigma - 1.0).abs() < 0.05, "axis {axis} std {}", var.sqrt());
        }
    }
}
