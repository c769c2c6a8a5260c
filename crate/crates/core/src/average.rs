//! Robust single rotation averaging with a truncated L1 (TLUD) cost.
//!
//! The estimator picks the input rotation with the smallest truncated chordal
//! cost against all other inputs (the proxy), keeps the inputs within the
//! chordal threshold of it, seeds with their chordal L2 mean and refines with
//! the Weiszfeld iteration for the geodesic L1 median of that inlier set.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::so3::{
    chordal_distance, exp_map, geodesic_distance, geodesic_from_chordal, log_map, project_to_so3,
    Mat3, Rotation, RotationVector, Vec3,
};

/// Tangent norm below which a sample is treated as coincident with the
/// current Weiszfeld iterate and left out of that iteration's weights.
pub const COINCIDENT_TOL: f64 = 1e-9;

/// Parameters of [`robust_average`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TludConfig {
    /// Chordal inlier threshold, in `(0, 2√2)`.
    pub epsilon_c: f64,
    /// Stop once the Weiszfeld update norm drops below this (radians).
    pub delta: f64,
    /// Maximum number of Weiszfeld iterations.
    pub it_max: usize,
    /// Extra rounds of inlier re-selection around the refined estimate.
    /// Zero reproduces the single-pass estimator.
    pub realternate: usize,
    /// Rows per block in the pairwise proxy evaluation.
    pub block_rows: usize,
    /// Evaluate proxy blocks on the rayon pool (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for TludConfig {
    fn default() -> Self {
        Self {
            epsilon_c: 0.5,
            delta: 0.001,
            it_max: 10,
            realternate: 0,
            block_rows: 256,
            parallel: false,
        }
    }
}

impl TludConfig {
    pub fn new(epsilon_c: f64, delta: f64, it_max: usize) -> Result<Self> {
        let config = Self {
            epsilon_c,
            delta,
            it_max,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let max_chordal = 2.0 * core::f64::consts::SQRT_2;
        if !(self.epsilon_c > 0.0 && self.epsilon_c < max_chordal) {
            return Err(Error::InvalidConfig("epsilon_c must lie in (0, 2*sqrt(2))"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig("delta must be positive"));
        }
        if self.it_max == 0 {
            return Err(Error::InvalidConfig("it_max must be at least 1"));
        }
        if self.block_rows == 0 {
            return Err(Error::InvalidConfig("block_rows must be at least 1"));
        }
        Ok(())
    }

    /// Geodesic threshold matching `epsilon_c`: `2 asin(ε_c / 2√2)`.
    pub fn epsilon_g(&self) -> f64 {
        geodesic_from_chordal(self.epsilon_c)
    }
}

/// Sorted set of distinct sample positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Sorts and deduplicates `indices`; every index must be below `len`.
    pub fn new(mut indices: Vec<usize>, len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&index) = indices.last().filter(|&&i| i >= len) {
            return Err(Error::IndexOutOfRange { index, len });
        }
        Ok(Self(indices))
    }

    /// `0..len`.
    pub fn all(len: usize) -> Self {
        Self((0..len).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Output of the Weiszfeld refinement and of [`robust_average`].
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingResult {
    pub estimate: Rotation,
    pub inliers: IndexSet,
    /// Input chosen by the proxy; `None` for the plain L1 baseline.
    pub init_index: Option<usize>,
    pub iterations: usize,
    /// `‖Δv‖` of every iteration, radians.
    pub update_norms: Vec<f64>,
    /// Sum of geodesic distances from the estimate to the inliers, radians.
    pub final_cost: f64,
    /// Inlier L1 cost at the seed followed by the cost after each iteration.
    pub cost_history: Vec<f64>,
    /// Per iteration: whether some sample coincided with the iterate and was
    /// left out of the weights.
    pub guarded: Vec<bool>,
    /// The update norm dropped below `delta` (or every sample coincided).
    pub converged: bool,
}

impl AveragingResult {
    /// Iterations whose cost rose by more than `tol` while no sample was
    /// excluded by the coincidence guard.
    pub fn descent_violations(&self, tol: f64) -> usize {
        self.cost_history
            .windows(2)
            .zip(&self.guarded)
            .filter(|(w, &guarded)| !guarded && w[1] > w[0] + tol)
            .count()
    }
}

fn nonempty(samples: &[Rotation]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

/// `Σᵢ min(ε_g, d_g(Rᵢ, center))`.
pub fn tlud_cost_geodesic(center: &Rotation, samples: &[Rotation], epsilon_g: f64) -> Result<f64> {
    nonempty(samples)?;
    Ok(samples
        .iter()
        .map(|r| geodesic_distance(r, center).min(epsilon_g))
        .sum())
}

/// `Σᵢ min(ε_c, ‖Rᵢ - center‖_F)`.
pub fn tlud_cost_chordal(center: &Rotation, samples: &[Rotation], epsilon_c: f64) -> Result<f64> {
    nonempty(samples)?;
    Ok(samples
        .iter()
        .map(|r| chordal_distance(r, center).min(epsilon_c))
        .sum())
}

/// Sum of geodesic distances from `center` to the samples in `subset`.
pub fn l1_cost(center: &Rotation, samples: &[Rotation], subset: &IndexSet) -> f64 {
    subset
        .iter()
        .map(|i| geodesic_distance(&samples[i], center))
        .sum()
}

/// Proxy cost of every input used as the center, evaluated in row blocks.
///
/// Each block materialises `block_rows × N` squared chordal distances with
/// nine elementwise passes over the flattened samples, then truncates and
/// sums per row. Rows are independent, so serial and parallel evaluation
/// produce identical costs.
pub fn proxy_costs(
    samples: &[Rotation],
    epsilon_c: f64,
    block_rows: usize,
    parallel: bool,
) -> Result<Vec<f64>> {
    nonempty(samples)?;
    if block_rows == 0 {
        return Err(Error::InvalidConfig("block_rows must be at least 1"));
    }
    let n = samples.len();
    // Entry k of every sample, contiguous, in row-major order so that the
    // rounding matches a plain double loop over rows and columns.
    let columns: Vec<Vec<f64>> = (0..9)
        .map(|k| samples.iter().map(|r| r.matrix()[(k / 3, k % 3)]).collect())
        .collect();

    let n_blocks = n.div_ceil(block_rows);
    let blocks = map_indexed(n_blocks, parallel, |b| {
        let rows = b * block_rows..((b + 1) * block_rows).min(n);
        let mut squared = vec![0.0f64; rows.len() * n];
        for column in &columns {
            for (r, j) in rows.clone().enumerate() {
                let center = column[j];
                let out = &mut squared[r * n..(r + 1) * n];
                for (acc, &x) in out.iter_mut().zip(column) {
                    let d = x - center;
                    *acc += d * d;
                }
            }
        }
        squared
            .chunks_exact(n)
            .map(|row| {
                row.iter()
                    .map(|&s| libm::sqrt(s).min(epsilon_c))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    Ok(blocks.into_iter().flatten().collect())
}

/// Index of the first minimum.
fn argmin_first(costs: &[f64]) -> usize {
    let mut best = 0;
    for (j, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = j;
        }
    }
    best
}

/// Input rotation minimising the truncated chordal cost; ties go to the lowest index.
pub fn proxy_initialize(samples: &[Rotation], epsilon_c: f64) -> Result<(usize, Rotation)> {
    let defaults = TludConfig::default();
    proxy_initialize_with(samples, epsilon_c, defaults.block_rows, defaults.parallel)
}

pub fn proxy_initialize_with(
    samples: &[Rotation],
    epsilon_c: f64,
    block_rows: usize,
    parallel: bool,
) -> Result<(usize, Rotation)> {
    let costs = proxy_costs(samples, epsilon_c, block_rows, parallel)?;
    let j = argmin_first(&costs);
    Ok((j, samples[j]))
}

/// `{ i : ‖Rᵢ - center‖_F ≤ ε_c }`.
pub fn select_inliers(center: &Rotation, samples: &[Rotation], epsilon_c: f64) -> IndexSet {
    IndexSet(
        samples
            .iter()
            .enumerate()
            .filter(|(_, r)| chordal_distance(r, center) <= epsilon_c)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Projection onto SO(3) of the sum of the selected rotations.
pub fn chordal_l2_mean(samples: &[Rotation], subset: &IndexSet) -> Result<Rotation> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    check_subset(samples, subset)?;
    let sum = subset
        .iter()
        .fold(Mat3::zeros(), |acc, i| acc + samples[i].matrix());
    project_to_so3(&sum)
}

fn check_subset(samples: &[Rotation], subset: &IndexSet) -> Result<()> {
    match subset.as_slice().last() {
        Some(&index) if index >= samples.len() => Err(Error::IndexOutOfRange {
            index,
            len: samples.len(),
        }),
        _ => Ok(()),
    }
}

/// Weiszfeld iteration for the geodesic L1 median of `samples[subset]`.
///
/// Each step maps the samples to the tangent space at the iterate, takes the
/// inverse-distance weighted mean `Δv` and moves to `Exp(Δv)·R`. Samples
/// closer than [`COINCIDENT_TOL`] are skipped for that step; if all of them
/// coincide the iterate is already the median and the loop stops.
pub fn weiszfeld_geodesic_l1(
    samples: &[Rotation],
    subset: &IndexSet,
    seed: Rotation,
    delta: f64,
    it_max: usize,
) -> Result<AveragingResult> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    check_subset(samples, subset)?;

    let mut estimate = seed;
    let mut cost_history = vec![l1_cost(&estimate, samples, subset)];
    let mut update_norms = Vec::with_capacity(it_max);
    let mut guarded = Vec::with_capacity(it_max);
    let mut converged = false;

    for _ in 0..it_max {
        let inverse = estimate.transpose();
        let mut weighted = Vec3::zeros();
        let mut weight_sum = 0.0;
        let mut skipped = false;
        for i in subset.iter() {
            let v = log_map(&(samples[i] * inverse)).into_inner();
            let norm = v.norm();
            if norm < COINCIDENT_TOL {
                skipped = true;
                continue;
            }
            weighted += v / norm;
            weight_sum += 1.0 / norm;
        }
        guarded.push(skipped);

        if weight_sum == 0.0 {
            update_norms.push(0.0);
            cost_history.push(*cost_history.last().unwrap_or(&0.0));
            converged = true;
            break;
        }

        let step = weighted / weight_sum;
        estimate = exp_map(&RotationVector::from_vector(step)) * estimate;
        let norm = step.norm();
        update_norms.push(norm);
        cost_history.push(l1_cost(&estimate, samples, subset));
        if norm < delta {
            converged = true;
            break;
        }
    }

    Ok(AveragingResult {
        estimate,
        inliers: subset.clone(),
        init_index: None,
        iterations: update_norms.len(),
        final_cost: *cost_history.last().unwrap_or(&0.0),
        update_norms,
        cost_history,
        guarded,
        converged,
    })
}

/// Geodesic L1 median of all samples, seeded with their chordal L2 mean.
/// This is the non-robust baseline.
pub fn geodesic_l1_mean(samples: &[Rotation], delta: f64, it_max: usize) -> Result<AveragingResult> {
    nonempty(samples)?;
    let all = IndexSet::all(samples.len());
    let seed = match chordal_l2_mean(samples, &all) {
        Ok(seed) => seed,
        Err(Error::DegenerateMatrix(_)) => samples[0],
        Err(e) => return Err(e),
    };
    weiszfeld_geodesic_l1(samples, &all, seed, delta, it_max)
}

/// The full TLUD estimator: proxy initialisation, chordal inlier selection,
/// chordal L2 seed and Weiszfeld refinement over the inliers.
pub fn robust_average(samples: &[Rotation], config: &TludConfig) -> Result<AveragingResult> {
    config.validate()?;
    nonempty(samples)?;
    let (init_index, init) =
        proxy_initialize_with(samples, config.epsilon_c, config.block_rows, config.parallel)?;
    let inliers = select_inliers(&init, samples, config.epsilon_c);
    assert!(
        inliers.contains(init_index),
        "the proxy rotation is always its own inlier"
    );
    let seed = chordal_l2_mean(samples, &inliers)?;
    let mut result = weiszfeld_geodesic_l1(samples, &inliers, seed, config.delta, config.it_max)?;

    for _ in 0..config.realternate {
        let reselected = select_inliers(&result.estimate, samples, config.epsilon_c);
        if reselected.is_empty() || reselected == result.inliers {
            break;
        }
        result = weiszfeld_geodesic_l1(
            samples,
            &reselected,
            result.estimate,
            config.delta,
            config.it_max,
        )?;
    }

    result.init_index = Some(init_index);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::geodesic_distance;

    fn rot(x: f64, y: f64, z: f64) -> Rotation {
        exp_map(&RotationVector::new(x, y, z))
    }

    fn half_turn_x() -> Rotation {
        rot(core::f64::consts::PI, 0.0, 0.0)
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = TludConfig::default();
        assert_eq!((c.epsilon_c, c.delta, c.it_max), (0.5, 0.001, 10));
        assert!((c.epsilon_g() - 0.3554).abs() < 1e-4);
        assert!(TludConfig::new(0.0, 0.001, 10).is_err());
        assert!(TludConfig::new(3.0, 0.001, 10).is_err());
        assert!(TludConfig::new(0.5, 0.0, 10).is_err());
        assert!(TludConfig::new(0.5, 0.001, 0).is_err());
    }

    #[test]
    fn index_set_sorts_and_checks_range() {
        let s = IndexSet::new(vec![3, 1, 3, 0], 4).unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 3]);
        assert!(matches!(
            IndexSet::new(vec![4], 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn costs_on_trivial_inputs() {
        let r = rot(0.2, 0.1, -0.4);
        assert_eq!(tlud_cost_geodesic(&r, &[r, r, r], 0.3).unwrap(), 0.0);
        assert_eq!(tlud_cost_chordal(&r, &[r, r, r], 0.5).unwrap(), 0.0);
        let id = Rotation::identity();
        assert_eq!(tlud_cost_geodesic(&id, &[half_turn_x()], 0.3554).unwrap(), 0.3554);
        assert_eq!(tlud_cost_chordal(&id, &[half_turn_x()], 0.5).unwrap(), 0.5);
        assert_eq!(tlud_cost_geodesic(&id, &[], 0.3), Err(Error::EmptyInput));
        assert_eq!(tlud_cost_chordal(&id, &[], 0.3), Err(Error::EmptyInput));
    }

    #[test]
    fn proxy_tie_break_and_single_sample() {
        let r = rot(0.1, 0.2, 0.3);
        assert_eq!(proxy_initialize(&[r], 0.5).unwrap().0, 0);
        let id = Rotation::identity();
        let samples = [id, id, rot(0.0, 0.0, 3.0)];
        let costs = proxy_costs(&samples, 0.5, 256, false).unwrap();
        assert_eq!(costs[0], 0.5);
        assert_eq!(costs[1], 0.5);
        assert_eq!(proxy_initialize(&samples, 0.5).unwrap().0, 0);
        assert_eq!(proxy_initialize(&[], 0.5), Err(Error::EmptyInput));
    }

    #[test]
    fn proxy_blocks_do_not_change_costs() {
        let samples: Vec<_> = (0..37)
            .map(|i| {
                let t = i as f64;
                rot(0.1 * t.sin(), 0.07 * t, 0.3 * t.cos())
            })
            .collect();
        let whole = proxy_costs(&samples, 0.5, 1000, false).unwrap();
        for block in [1, 5, 36] {
            assert_eq!(proxy_costs(&samples, 0.5, block, false).unwrap(), whole);
        }
    }

    #[test]
    fn inliers_edge_cases() {
        let samples = [rot(0.1, 0.0, 0.0), rot(0.0, 0.1, 0.0), half_turn_x()];
        assert!(select_inliers(&samples[0], &samples, 0.5).contains(0));
        let far = [half_turn_x(), half_turn_x()];
        assert!(select_inliers(&Rotation::identity(), &far, 0.5).is_empty());
    }

    #[test]
    fn chordal_mean_cases() {
        let r = rot(0.3, -0.1, 0.2);
        let same = chordal_l2_mean(&[r, r, r], &IndexSet::all(3)).unwrap();
        assert!((same.matrix() - r.matrix()).norm() < 1e-14);
        let pair = [rot(0.0, 0.0, 0.3), rot(0.0, 0.0, -0.3)];
        let mean = chordal_l2_mean(&pair, &IndexSet::all(2)).unwrap();
        assert!((mean.matrix() - Mat3::identity()).norm() < 1e-14);
        assert_eq!(
            chordal_l2_mean(&pair, &IndexSet::default()),
            Err(Error::EmptySubset)
        );
        // I + half turn about x sums to diag(2, 0, 0).
        let opposed = [Rotation::identity(), half_turn_x()];
        assert!(matches!(
            chordal_l2_mean(&opposed, &IndexSet::all(2)),
            Err(Error::DegenerateMatrix(_))
        ));
    }

    #[test]
    fn weiszfeld_on_copies_stops_after_one_iteration() {
        let r = rot(0.5, 0.5, -0.2);
        let out = weiszfeld_geodesic_l1(&[r, r, r], &IndexSet::all(3), r, 1e-3, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.update_norms, vec![0.0]);
        assert!(out.converged);
        assert_eq!(out.estimate, r);
    }

    #[test]
    fn weiszfeld_finds_median_of_collinear_samples() {
        let samples = [rot(0.0, 0.0, -0.2), rot(0.0, 0.0, 0.0), rot(0.0, 0.0, 0.2)];
        let out = weiszfeld_geodesic_l1(
            &samples,
            &IndexSet::all(3),
            rot(0.0, 0.0, 0.05),
            1e-3,
            10,
        )
        .unwrap();
        assert!(geodesic_distance(&out.estimate, &Rotation::identity()) < 1e-3);
        assert_eq!(out.update_norms.len(), out.iterations);
    }

    #[test]
    fn weiszfeld_rejects_bad_subsets() {
        let r = Rotation::identity();
        assert_eq!(
            weiszfeld_geodesic_l1(&[r], &IndexSet::default(), r, 1e-3, 10),
            Err(Error::EmptySubset)
        );
        let subset = IndexSet(vec![0, 5]);
        assert!(matches!(
            weiszfeld_geodesic_l1(&[r], &subset, r, 1e-3, 10),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn robust_average_single_sample() {
        let r = rot(-0.4, 0.9, 0.1);
        let out = robust_average(&[r], &TludConfig::default()).unwrap();
        assert!((out.estimate.matrix() - r.matrix()).norm() < 1e-14);
        assert_eq!(out.inliers.as_slice(), &[0]);
        assert_eq!(out.init_index, Some(0));
        assert_eq!(robust_average(&[], &TludConfig::default()), Err(Error::EmptyInput));
    }

    #[test]
    fn realternation_is_stable_on_clean_cluster() {
        let samples: Vec<_> = (0..9)
            .map(|i| rot(0.02 * (i as f64 - 4.0), 0.01 * (i % 3) as f64, 0.0))
            .collect();
        let single = robust_average(&samples, &TludConfig::default()).unwrap();
        let config = TludConfig {
            realternate: 3,
            ..TludConfig::default()
        };
        let alternated = robust_average(&samples, &config).unwrap();
        assert_eq!(single.inliers, alternated.inliers);
        assert!(geodesic_distance(&single.estimate, &alternated.estimate) < 1e-12);
    }
}
