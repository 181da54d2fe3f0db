//! Distribution families over the positive orthant, seeded sampling,
//! region counting, and the computable balance score.
//!
//! Sampling is reproducible: batch `b` of a draw always comes from ChaCha
//! stream `b` of the given seed, so splitting work across threads cannot
//! change the output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regions::{Classification, RegionPartition, RegionsError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: batch has dimension {batch}, partition {partition}")]
    DimensionMismatch { batch: usize, partition: usize },
    #[error(transparent)]
    Regions(#[from] RegionsError),
}

/// Scalars that rand_distr can produce directly.
pub trait SampleScalar: Real {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;
}

impl SampleScalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
        Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
    }
}

impl SampleScalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
        Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
    }
}

/// Product of independent Fisher (F) distributions, one per coordinate.
///
/// `coeffs = (d1^1, d2^1, ..., d1^N, d2^N)`; coordinate `j` is the ratio of
/// two scaled chi-square variates with those degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherProduct<F> {
    coeffs: Vec<F>,
}

impl<F: Real> FisherProduct<F> {
    pub fn new(coeffs: Vec<F>) -> Result<Self, SamplerError> {
        if coeffs.is_empty() || coeffs.len() % 2 != 0 {
            return Err(SamplerError::InvalidDistribution(format!(
                "Fisher coefficient vector must have positive even length, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !(*c > F::zero())) {
            return Err(SamplerError::InvalidDistribution(
                "Fisher coefficients must be strictly positive".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn dimension(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }
}

/// Componentwise square of a multivariate Gaussian `N(mean, chol cholᵀ)`.
///
/// The covariance enters through its lower-triangular Cholesky factor, which
/// keeps it positive definite with `N + N(N+1)/2` free scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredGaussian<F> {
    mean: Vec<F>,
    /// Row-major packed lower triangle, row r holding r+1 entries.
    chol: Vec<Vec<F>>,
}

impl<F: Real> SquaredGaussian<F> {
    pub fn new(mean: Vec<F>, chol: Vec<Vec<F>>) -> Result<Self, SamplerError> {
        let n = mean.len();
        if n == 0 {
            return Err(SamplerError::InvalidDistribution("empty mean".into()));
        }
        if chol.len() != n {
            return Err(SamplerError::InvalidDistribution(format!(
                "Cholesky factor has {} rows for dimension {}",
                chol.len(),
                n
            )));
        }
        for (r, row) in chol.iter().enumerate() {
            if row.len() != r + 1 {
                return Err(SamplerError::InvalidDistribution(format!(
                    "Cholesky row {} must have {} entries, got {}",
                    r,
                    r + 1,
                    row.len()
                )));
            }
            if !(row[r] > F::zero()) {
                return Err(SamplerError::InvalidDistribution(
                    "Cholesky diagonal must be strictly positive".into(),
                ));
            }
        }
        Ok(Self { mean, chol })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn chol(&self) -> &[Vec<F>] {
        &self.chol
    }
}

/// Either distribution family.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec<F> {
    Fisher(FisherProduct<F>),
    SquaredGaussian(SquaredGaussian<F>),
}

impl<F: Real> DistributionSpec<F> {
    pub fn dimension(&self) -> usize {
        match self {
            DistributionSpec::Fisher(d) => d.dimension(),
            DistributionSpec::SquaredGaussian(d) => d.dimension(),
        }
    }
}

const BATCH_SIZE: usize = 4096;

fn draw_point<F: SampleScalar, R: Rng + ?Sized>(dist: &DistributionSpec<F>, rng: &mut R) -> Vec<F> {
    let two = F::lit(2.0);
    let half = F::lit(0.5);
    match dist {
        DistributionSpec::Fisher(f) => (0..f.dimension())
            .map(|j| {
                let d1 = f.coeffs[2 * j];
                let d2 = f.coeffs[2 * j + 1];
                let g1 = F::gamma_variate(rng, half * d1, two);
                let g2 = F::gamma_variate(rng, half * d2, two);
                (g1 / d1) / (g2 / d2)
            })
            .collect(),
        DistributionSpec::SquaredGaussian(g) => {
            let n = g.dimension();
            let normals: Vec<F> = (0..n).map(|_| F::standard_normal(rng)).collect();
            (0..n)
                .map(|i| {
                    let mut z = g.mean[i];
                    for (j, l) in g.chol[i].iter().enumerate() {
                        z += *l * normals[j];
                    }
                    z * z
                })
                .collect()
        }
    }
}

/// Draw `k` iid points in the positive orthant; deterministic for a fixed
/// seed down to the batch-substream layout.
pub fn sample<F: SampleScalar>(
    dist: &DistributionSpec<F>,
    k: usize,
    seed: u64,
) -> Vec<Vec<F>> {
    let n_batches = k.div_ceil(BATCH_SIZE);
    let mut points = vec![Vec::new(); k];
    points
        .par_chunks_mut(BATCH_SIZE)
        .enumerate()
        .for_each(|(batch, chunk)| {
            debug_assert!(batch < n_batches);
            let mut rng = batch_rng(seed, batch as u64);
            for slot in chunk {
                *slot = draw_point(dist, &mut rng);
            }
        });
    points
}

/// RNG for one batch substream of a seed.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Per-region sample counts; boundary and unmatched points are excluded and
/// tallied separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    region_ids: Vec<u32>,
    k: u64,
    excluded: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>, region_ids: Vec<u32>, k: u64, excluded: u64) -> Self {
        debug_assert_eq!(counts.len(), region_ids.len());
        debug_assert!(counts.iter().sum::<u64>() + excluded == k);
        Self { counts, region_ids, k, excluded }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn region_ids(&self) -> &[u32] {
        &self.region_ids
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn excluded(&self) -> u64 {
        self.excluded
    }
}

/// Count how many batch points land in each region of the partition.
pub fn count<F: Real>(
    batch: &[Vec<F>],
    partition: &RegionPartition,
) -> Result<CountVector, SamplerError> {
    if let Some(p) = batch.first() {
        if p.len() != partition.dimension() {
            return Err(SamplerError::DimensionMismatch {
                batch: p.len(),
                partition: partition.dimension(),
            });
        }
    }
    let ids = partition.region_ids();
    let index: std::collections::HashMap<u32, usize> =
        ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut counts = vec![0u64; ids.len()];
    let mut excluded = 0u64;
    for point in batch {
        match partition.classify(point)? {
            Classification::Region(id) => counts[index[&id]] += 1,
            Classification::Boundary | Classification::Unmatched => excluded += 1,
        }
    }
    Ok(CountVector::new(counts, ids, batch.len() as u64, excluded))
}

/// Balance score `min_i c_i / max_i c_i`, zero when every region is empty.
pub fn score(c: &CountVector) -> f64 {
    let max = c.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return 0.0;
    }
    let min = c.counts.iter().copied().min().unwrap_or(0);
    min as f64 / max as f64
}

/// Empirical region frequencies `c_i / k`; sums to one minus the excluded
/// fraction.
pub fn frequencies(c: &CountVector) -> Vec<f64> {
    c.counts.iter().map(|&v| v as f64 / c.k as f64).collect()
}

/// Write a batch as CSV, one point per row.
pub fn points_to_csv<F: Real, W: std::io::Write>(
    points: &[Vec<F>],
    mut out: W,
) -> std::io::Result<()> {
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{}", v.as_f64())).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

// --- JSON schema -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum DistJson {
    Fisher { coeffs: Vec<f64> },
    SquaredGaussian { mean: Vec<f64>, chol: Vec<Vec<f64>> },
}

/// Parse `{family: "fisher", coeffs} | {family: "squared_gaussian", mean, chol}`.
pub fn distribution_from_json(text: &str) -> Result<DistributionSpec<f64>, SamplerError> {
    let raw: DistJson = serde_json::from_str(text)
        .map_err(|e| SamplerError::InvalidDistribution(e.to_string()))?;
    Ok(match raw {
        DistJson::Fisher { coeffs } => DistributionSpec::Fisher(FisherProduct::new(coeffs)?),
        DistJson::SquaredGaussian { mean, chol } => {
            DistributionSpec::SquaredGaussian(SquaredGaussian::new(mean, chol)?)
        }
    })
}

pub fn distribution_to_json(dist: &DistributionSpec<f64>) -> String {
    let raw = match dist {
        DistributionSpec::Fisher(f) => DistJson::Fisher { coeffs: f.coeffs.clone() },
        DistributionSpec::SquaredGaussian(g) => {
            DistJson::SquaredGaussian { mean: g.mean.clone(), chol: g.chol.clone() }
        }
    };
    serde_json::to_string_pretty(&raw).expect("distribution serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{partition_from_json, toggle_partition};
    use proptest::prelude::*;

    fn fisher(coeffs: Vec<f64>) -> DistributionSpec<f64> {
        DistributionSpec::Fisher(FisherProduct::new(coeffs).unwrap())
    }

    fn two_region_line() -> crate::regions::RegionPartition {
        partition_from_json(
            r#"{
                "dim": 1,
                "variables": ["x"],
                "regions": [
                    {"id": 1, "constraints": [{"lhs": "x", "rel": "<", "rhs": "1"}]},
                    {"id": 2, "constraints": [{"lhs": "x", "rel": ">", "rhs": "1"}]}
                ],
                "adjacency": [[1, 2]]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn fisher_mean_matches_moment_formula() {
        // E[F(d1, d2)] = d2 / (d2 - 2) = 1.25 for (5, 10).
        let dist = fisher(vec![5.0, 10.0]);
        let points = sample(&dist, 100_000, 123);
        let mean: f64 = points.iter().map(|p| p[0]).sum::<f64>() / points.len() as f64;
        assert!((1.20..=1.30).contains(&mean), "mean {}", mean);
    }

    #[test]
    fn squared_standard_gaussian_has_unit_mean() {
        let dist = DistributionSpec::SquaredGaussian(
            SquaredGaussian::new(vec![0.0], vec![vec![1.0]]).unwrap(),
        );
        let points = sample(&dist, 100_000, 7);
        let mean: f64 = points.iter().map(|p| p[0]).sum::<f64>() / points.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {}", mean);
    }

    #[test]
    fn same_seed_same_batch() {
        let dist = fisher(vec![2.0, 3.0, 4.0, 5.0]);
        let a = sample(&dist, 10_000, 99);
        let b = sample(&dist, 10_000, 99);
        assert_eq!(a, b);
        let c = sample(&dist, 10_000, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn batches_follow_the_substream_layout() {
        // The parallel scheme must equal the per-batch sequential draw.
        let dist = fisher(vec![2.0, 3.0]);
        let k = 9000; // spans three batches
        let points = sample(&dist, k, 5);
        let mut expected = Vec::with_capacity(k);
        for batch in 0..k.div_ceil(BATCH_SIZE) {
            let mut rng = batch_rng(5, batch as u64);
            let len = BATCH_SIZE.min(k - batch * BATCH_SIZE);
            for _ in 0..len {
                expected.push(draw_point(&dist, &mut rng));
            }
        }
        assert_eq!(points, expected);
    }

    #[test]
    fn fisher_coordinates_are_uncorrelated() {
        let dist = fisher(vec![6.0, 8.0, 5.0, 12.0]);
        let points = sample(&dist, 100_000, 17);
        let n = points.len() as f64;
        let mean0: f64 = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let mean1: f64 = points.iter().map(|p| p[1]).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var0 = 0.0;
        let mut var1 = 0.0;
        for p in &points {
            cov += (p[0] - mean0) * (p[1] - mean1);
            var0 += (p[0] - mean0) * (p[0] - mean0);
            var1 += (p[1] - mean1) * (p[1] - mean1);
        }
        let rho = cov / (var0.sqrt() * var1.sqrt());
        assert!(rho.abs() < 0.02, "correlation {}", rho);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(FisherProduct::new(vec![1.0, -1.0]).is_err());
        assert!(FisherProduct::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(FisherProduct::<f64>::new(vec![]).is_err());
        assert!(SquaredGaussian::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(SquaredGaussian::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(SquaredGaussian::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn counts_on_the_split_line() {
        let partition = two_region_line();
        let batch = vec![vec![0.5], vec![2.0], vec![3.0]];
        let c = count(&batch, &partition).unwrap();
        assert_eq!(c.counts(), &[1, 2]);
        assert_eq!(c.excluded(), 0);

        // All points exactly on the boundary are excluded.
        let boundary_batch = vec![vec![1.0], vec![1.0]];
        let c = count(&boundary_batch, &partition).unwrap();
        assert_eq!(c.counts(), &[0, 0]);
        assert_eq!(c.excluded(), 2);
        assert_eq!(score(&c), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let partition = two_region_line();
        let batch = vec![vec![0.5, 0.5]];
        assert!(matches!(
            count(&batch, &partition),
            Err(SamplerError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn toggle_counts_conserve_the_sample() {
        let partition = toggle_partition();
        let dist = fisher(vec![1.0; 10]);
        let batch = sample(&dist, 10_000, 3);
        let c = count(&batch, &partition).unwrap();
        // Brute-force recount.
        let mut by_hand = 0u64;
        for p in &batch {
            if let crate::regions::Classification::Region(_) = partition.classify(p).unwrap() {
                by_hand += 1;
            }
        }
        assert_eq!(c.counts().iter().sum::<u64>(), by_hand);
        assert_eq!(c.counts().iter().sum::<u64>() + c.excluded(), 10_000);
    }

    #[test]
    fn score_examples() {
        let c = CountVector::new(vec![5, 5, 5], vec![1, 2, 3], 15, 0);
        assert_eq!(score(&c), 1.0);
        let c = CountVector::new(vec![0, 10], vec![1, 2], 10, 0);
        assert_eq!(score(&c), 0.0);
        let c = CountVector::new(vec![2, 8], vec![1, 2], 10, 0);
        assert_eq!(score(&c), 0.25);
    }

    #[test]
    fn frequency_examples() {
        let c = CountVector::new(vec![5, 5], vec![1, 2], 10, 0);
        assert_eq!(frequencies(&c), vec![0.5, 0.5]);
        let c = CountVector::new(vec![7], vec![1], 7, 0);
        assert_eq!(frequencies(&c), vec![1.0]);
        let c = CountVector::new(vec![3, 4], vec![1, 2], 10, 3);
        let f = frequencies(&c);
        assert!((f.iter().sum::<f64>() - 0.7).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn score_is_bounded_and_permutation_invariant(
            mut counts in proptest::collection::vec(0u64..500, 1..9)
        ) {
            let k: u64 = counts.iter().sum();
            let ids: Vec<u32> = (0..counts.len() as u32).collect();
            let c = CountVector::new(counts.clone(), ids.clone(), k, 0);
            let s = score(&c);
            prop_assert!((0.0..=1.0).contains(&s));
            let uniform = counts.iter().all(|&v| v == counts[0]) && counts[0] > 0;
            prop_assert_eq!(s == 1.0, uniform);
            counts.reverse();
            let c2 = CountVector::new(counts, ids, k, 0);
            prop_assert_eq!(score(&c2), s);
        }
    }

    #[test]
    fn csv_export_is_one_point_per_row() {
        let mut buf = Vec::new();
        points_to_csv(&[vec![1.5, 2.0], vec![0.25, 3.0]], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1.5,2\n0.25,3\n");
    }

    #[test]
    fn distribution_json_round_trip() {
        let f = fisher(vec![1.5, 2.5]);
        let parsed = distribution_from_json(&distribution_to_json(&f)).unwrap();
        assert_eq!(parsed, f);
        let g = DistributionSpec::SquaredGaussian(
            SquaredGaussian::new(vec![0.5, -0.5], vec![vec![1.0], vec![0.3, 2.0]]).unwrap(),
        );
        let parsed = distribution_from_json(&distribution_to_json(&g)).unwrap();
        assert_eq!(parsed, g);
        assert!(distribution_from_json("{\"family\": \"fisher\"}").is_err());
    }

    #[test]
    fn sampling_works_at_f32() {
        let dist = DistributionSpec::Fisher(FisherProduct::<f32>::new(vec![4.0, 6.0]).unwrap());
        let points = sample(&dist, 100, 1);
        assert!(points.iter().all(|p| p[0] > 0.0));
    }
}
