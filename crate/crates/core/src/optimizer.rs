//! Derivative-free maximization of the balance score: Nelder-Mead on
//! `1 - score` over unconstrained coefficients, with a positivity-preserving
//! reparameterization and multi-restart driver.
//!
//! The sampled score is a random function of the coefficients; fixing one
//! sampling seed per run (common random numbers) turns the objective into a
//! deterministic function so the simplex iteration is well posed.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::regions::RegionPartition;
use crate::sampler::{
    count, sample, score, DistributionSpec, FisherProduct, SampleScalar, SamplerError,
    SquaredGaussian,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("objective not finite at initial simplex (vertex {0})")]
    NonFiniteStart(usize),
    #[error("invalid Nelder-Mead configuration: {0}")]
    InvalidConfig(String),
    #[error("restarts must be at least 1")]
    NoRestarts,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Simplex coefficients and termination controls.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig<F> {
    pub reflection: F,
    pub expansion: F,
    pub contraction: F,
    pub shrink: F,
    pub x_tol: F,
    pub f_tol: F,
    pub max_iter: usize,
    pub init_step: F,
}

impl<F: Real> Default for NelderMeadConfig<F> {
    fn default() -> Self {
        Self {
            reflection: F::one(),
            expansion: F::lit(2.0),
            contraction: F::lit(0.5),
            shrink: F::lit(0.5),
            x_tol: F::lit(1e-8),
            f_tol: F::lit(1e-12),
            max_iter: 400,
            init_step: F::lit(0.5),
        }
    }
}

impl<F: Real> NelderMeadConfig<F> {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.reflection > F::zero()) {
            return Err(OptimizerError::InvalidConfig("reflection must be > 0".into()));
        }
        if !(self.expansion > F::one()) {
            return Err(OptimizerError::InvalidConfig("expansion must be > 1".into()));
        }
        if !(self.contraction > F::zero() && self.contraction < F::one()) {
            return Err(OptimizerError::InvalidConfig("contraction must be in (0,1)".into()));
        }
        if !(self.shrink > F::zero() && self.shrink < F::one()) {
            return Err(OptimizerError::InvalidConfig("shrink must be in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    XTol,
    FTol,
    MaxIter,
}

/// One iteration record of a Nelder-Mead run.
#[derive(Debug, Clone, Serialize)]
pub struct NmIterate {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct NmResult<F> {
    pub x: Vec<F>,
    pub value: F,
    pub iterations: usize,
    pub evals: usize,
    pub termination: Termination,
    pub trace: Vec<NmIterate>,
}

struct Vertex<F> {
    x: Vec<F>,
    value: F,
    /// Insertion order, the tie-breaker for the stable vertex sort.
    birth: usize,
}

/// Minimize `objective` from `x0` with the standard reflect/expand/contract/
/// shrink iteration. Returns the best vertex when the simplex diameter drops
/// below `x_tol`, the value spread below `f_tol`, or `max_iter` is reached.
pub fn nelder_mead<F: Real>(
    mut objective: impl FnMut(&[F]) -> F,
    x0: &[F],
    cfg: &NelderMeadConfig<F>,
) -> Result<NmResult<F>, OptimizerError> {
    cfg.validate()?;
    let m = x0.len();
    let mut evals = 0usize;
    let mut births = 0usize;

    let mut simplex: Vec<Vertex<F>> = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let mut x = x0.to_vec();
        if i > 0 {
            x[i - 1] += cfg.init_step;
        }
        evals += 1;
        let v = objective(&x);
        if !v.is_finite() {
            return Err(OptimizerError::NonFiniteStart(i));
        }
        simplex.push(Vertex { x, value: v, birth: births });
        births += 1;
    }

    // Inside the loop, non-finite values lose the ordering instead of
    // aborting the run.
    let mut eval = |x: &[F], evals: &mut usize| -> F {
        *evals += 1;
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            F::max_value().unwrap_or_else(F::one)
        }
    };

    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let termination = loop {
        simplex.sort_by(|a, b| {
            a.value.partial_cmp(&b.value).unwrap().then(a.birth.cmp(&b.birth))
        });
        trace.push(NmIterate {
            best_x: simplex[0].x.iter().map(|v| v.as_f64()).collect(),
            best_value: simplex[0].value.as_f64(),
            evals,
        });

        let spread = simplex[m].value - simplex[0].value;
        if spread < cfg.f_tol {
            break Termination::FTol;
        }
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.x.iter()
                    .zip(&simplex[0].x)
                    .map(|(a, b)| (*a - *b).abs())
                    .fold(F::zero(), |acc, d| acc.max(d))
            })
            .fold(F::zero(), |acc, d| acc.max(d));
        if diameter < cfg.x_tol {
            break Termination::XTol;
        }
        if iterations >= cfg.max_iter {
            break Termination::MaxIter;
        }
        iterations += 1;

        let centroid: Vec<F> = (0..m)
            .map(|j| {
                let mut s = F::zero();
                for v in &simplex[..m] {
                    s += v.x[j];
                }
                s / F::from_usize(m).unwrap()
            })
            .collect();
        let worst = simplex[m].x.clone();
        let f_worst = simplex[m].value;
        let f_best = simplex[0].value;
        let f_second = simplex[m - 1].value;

        let reflected: Vec<F> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| *c + cfg.reflection * (*c - *w))
            .collect();
        let f_reflected = eval(&reflected, &mut evals);

        let mut replace = |simplex: &mut Vec<Vertex<F>>, x: Vec<F>, value: F| {
            births += 1;
            simplex[m] = Vertex { x, value, birth: births };
        };

        if f_reflected < f_best {
            let expanded: Vec<F> = centroid
                .iter()
                .zip(&reflected)
                .map(|(c, r)| *c + cfg.expansion * (*r - *c))
                .collect();
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                replace(&mut simplex, expanded, f_expanded);
            } else {
                replace(&mut simplex, reflected, f_reflected);
            }
        } else if f_reflected < f_second {
            replace(&mut simplex, reflected, f_reflected);
        } else {
            let (contracted, threshold): (Vec<F>, F) = if f_reflected < f_worst {
                // Outside contraction toward the reflected point.
                (
                    centroid
                        .iter()
                        .zip(&reflected)
                        .map(|(c, r)| *c + cfg.contraction * (*r - *c))
                        .collect(),
                    f_reflected,
                )
            } else {
                // Inside contraction toward the worst vertex.
                (
                    centroid
                        .iter()
                        .zip(&worst)
                        .map(|(c, w)| *c + cfg.contraction * (*w - *c))
                        .collect(),
                    f_worst,
                )
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted <= threshold {
                replace(&mut simplex, contracted, f_contracted);
            } else {
                let best = simplex[0].x.clone();
                for v in simplex[1..].iter_mut() {
                    for (xj, bj) in v.x.iter_mut().zip(&best) {
                        *xj = *bj + cfg.shrink * (*xj - *bj);
                    }
                    births += 1;
                    v.birth = births;
                    v.value = eval(&v.x.clone(), &mut evals);
                }
            }
        }
    };

    simplex.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap().then(a.birth.cmp(&b.birth)));
    Ok(NmResult {
        x: simplex[0].x.clone(),
        value: simplex[0].value,
        iterations,
        evals,
        termination,
        trace,
    })
}

/// Which family the coefficient vector parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistFamily {
    Fisher,
    SquaredGaussian,
}

impl DistFamily {
    /// Number of unconstrained search coordinates for dimension `n`.
    pub fn coeff_len(&self, n: usize) -> usize {
        match self {
            DistFamily::Fisher => 2 * n,
            DistFamily::SquaredGaussian => n + n * (n + 1) / 2,
        }
    }
}

/// Map an unconstrained search vector to a valid distribution: Fisher
/// degrees of freedom and Cholesky diagonals go through `exp`, Gaussian
/// means and off-diagonals pass through unchanged.
pub fn unpack_coefficients<F: Real>(
    family: DistFamily,
    n: usize,
    w: &[F],
) -> Result<DistributionSpec<F>, SamplerError> {
    match family {
        DistFamily::Fisher => {
            let coeffs = w.iter().map(|v| v.exp()).collect();
            Ok(DistributionSpec::Fisher(FisherProduct::new(coeffs)?))
        }
        DistFamily::SquaredGaussian => {
            let mean = w[..n].to_vec();
            let mut chol = Vec::with_capacity(n);
            let mut pos = n;
            for r in 0..n {
                let mut row = Vec::with_capacity(r + 1);
                for c in 0..=r {
                    let v = w[pos];
                    pos += 1;
                    row.push(if c == r { v.exp() } else { v });
                }
                chol.push(row);
            }
            Ok(DistributionSpec::SquaredGaussian(SquaredGaussian::new(mean, chol)?))
        }
    }
}

/// The map coefficients -> sample -> count -> `1 - score`, with a fixed
/// sampling seed so equal inputs give equal outputs.
pub fn score_objective<F: SampleScalar>(
    family: DistFamily,
    partition: RegionPartition,
    k: usize,
    seed: u64,
) -> impl Fn(&[F]) -> F {
    move |w: &[F]| {
        let s = evaluate_score(family, &partition, k, seed, w);
        F::lit(1.0 - s)
    }
}

/// Score (not objective) of a coefficient vector under a fixed seed.
pub fn evaluate_score<F: SampleScalar>(
    family: DistFamily,
    partition: &RegionPartition,
    k: usize,
    seed: u64,
    w: &[F],
) -> f64 {
    let dist = match unpack_coefficients(family, partition.dimension(), w) {
        Ok(d) => d,
        Err(_) => return 0.0,
    };
    let batch = sample(&dist, k, seed);
    match count(&batch, partition) {
        Ok(c) => score(&c),
        Err(_) => 0.0,
    }
}

/// Noise flag threshold: sample standard deviation of the score across ten
/// fresh seeds at the optimum above this marks the run as noisy.
pub const NOISE_STD_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct RestartReport {
    pub restart: usize,
    pub initial_score: f64,
    pub final_score: f64,
    pub iterations: usize,
    pub evals: usize,
    pub termination: Termination,
    /// Best-so-far score after each iteration; nondecreasing.
    pub score_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome<F> {
    pub best: DistributionSpec<F>,
    pub best_coeffs: Vec<F>,
    pub best_score: f64,
    pub best_frequencies: Vec<f64>,
    /// Score of the all-ones coefficient vector under the same seed.
    pub baseline_score: f64,
    /// Sample std of the best score over ten fresh seeds.
    pub score_std: f64,
    pub noisy: bool,
    pub restarts: Vec<RestartReport>,
}

/// Run `nelder_mead` on the score objective from `restarts` random starting
/// points and keep the best final coefficient vector. Non-convergence is
/// reported in the per-restart records, never as an error.
pub fn optimize_distribution<F: SampleScalar>(
    family: DistFamily,
    partition: &RegionPartition,
    k: usize,
    cfg: &NelderMeadConfig<F>,
    restarts: usize,
    seed: u64,
) -> Result<OptimizeOutcome<F>, OptimizerError> {
    if restarts == 0 {
        return Err(OptimizerError::NoRestarts);
    }
    cfg.validate()?;
    let n = partition.dimension();
    let m = family.coeff_len(n);

    // Validate the pipeline once so sampler errors surface as errors.
    let probe = vec![F::zero(); m];
    let dist = unpack_coefficients(family, n, &probe)?;
    let batch = sample(&dist, 16.min(k), seed);
    count(&batch, partition)?;

    let runs: Vec<(NmResult<F>, Vec<f64>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::sampler::batch_rng(seed, 0x5eed_0000 + r as u64);
            let x0: Vec<F> = (0..m)
                .map(|_| F::standard_normal(&mut rng) * F::lit(0.5))
                .collect();
            let objective = score_objective::<F>(family, partition.clone(), k, seed);
            let result = nelder_mead(objective, &x0, cfg).expect("finite objective");
            let mut best_so_far = f64::NEG_INFINITY;
            let score_trace: Vec<f64> = result
                .trace
                .iter()
                .map(|it| {
                    best_so_far = best_so_far.max(1.0 - it.best_value);
                    best_so_far
                })
                .collect();
            let initial = score_trace.first().copied().unwrap_or(0.0);
            (result, score_trace, initial)
        })
        .collect();

    let reports: Vec<RestartReport> = runs
        .iter()
        .enumerate()
        .map(|(r, (result, score_trace, initial))| RestartReport {
            restart: r,
            initial_score: *initial,
            final_score: 1.0 - result.value.as_f64(),
            iterations: result.iterations,
            evals: result.evals,
            termination: result.termination,
            score_trace: score_trace.clone(),
        })
        .collect();

    let best_idx = reports
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.final_score.partial_cmp(&b.1.final_score).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let best_coeffs = runs[best_idx].0.x.clone();
    let best = unpack_coefficients(family, n, &best_coeffs)?;
    let best_score = reports[best_idx].final_score;

    let reeval: Vec<f64> = (1..=10)
        .map(|i| evaluate_score(family, partition, k, seed.wrapping_add(i), &best_coeffs))
        .collect();
    let mean = reeval.iter().sum::<f64>() / reeval.len() as f64;
    let var =
        reeval.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (reeval.len() - 1) as f64;
    let score_std = var.sqrt();

    let baseline = vec![F::zero(); m];
    let baseline_score = evaluate_score(family, partition, k, seed, &baseline);

    let best_batch = sample(&best, k, seed);
    let best_frequencies = crate::sampler::frequencies(&count(&best_batch, partition)?);

    Ok(OptimizeOutcome {
        best,
        best_coeffs,
        best_score,
        best_frequencies,
        baseline_score,
        score_std,
        noisy: score_std > NOISE_STD_THRESHOLD,
        restarts: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{partition_from_json, toggle_partition, RegionPartition};

    fn cfg_tight() -> NelderMeadConfig<f64> {
        NelderMeadConfig { max_iter: 2000, x_tol: 1e-9, f_tol: 1e-15, ..Default::default() }
    }

    #[test]
    fn finds_the_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], &cfg_tight()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] - 2.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn converges_x_tol_on_strictly_convex_quadratic() {
        let f = |x: &[f64]| 2.0 * x[0] * x[0] + 3.0 * x[1] * x[1] + x[0] * x[1];
        let cfg = NelderMeadConfig { max_iter: 5000, x_tol: 1e-7, f_tol: -1.0, ..Default::default() };
        let r = nelder_mead(f, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(r.termination, Termination::XTol);
    }

    #[test]
    fn finds_the_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &cfg_tight()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn constant_objective_stops_immediately_by_spread() {
        let f = |_: &[f64]| 3.5;
        let r = nelder_mead(f, &[0.0, 0.0, 0.0], &NelderMeadConfig::default()).unwrap();
        assert_eq!(r.termination, Termination::FTol);
        assert!(r.iterations <= 5); // m + 2 with m = 3
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |x: &[f64]| if x[0] > 0.1 { f64::NAN } else { 0.0 };
        assert!(matches!(
            nelder_mead(f, &[0.0, 0.0], &NelderMeadConfig::default()),
            Err(OptimizerError::NonFiniteStart(_))
        ));
    }

    #[test]
    fn trace_best_value_never_increases() {
        let f = |x: &[f64]| (x[0] + 2.0).powi(2) * (1.0 + 0.1 * (x[1]).sin()) + x[1] * x[1];
        let r = nelder_mead(f, &[3.0, -4.0], &cfg_tight()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
    }

    #[test]
    fn config_invariants_enforced() {
        let bad = NelderMeadConfig { expansion: 0.9, ..NelderMeadConfig::<f64>::default() };
        assert!(matches!(bad.validate(), Err(OptimizerError::InvalidConfig(_))));
        let bad = NelderMeadConfig { contraction: 1.0, ..NelderMeadConfig::<f64>::default() };
        assert!(bad.validate().is_err());
    }

    fn single_region() -> RegionPartition {
        partition_from_json(
            r#"{"dim": 1, "variables": ["x"],
                "regions": [{"id": 1, "constraints": [{"lhs": "x", "rel": ">", "rhs": "0"}]}],
                "adjacency": []}"#,
        )
        .unwrap()
    }

    fn mirrored_halves() -> RegionPartition {
        partition_from_json(
            r#"{"dim": 1, "variables": ["x"],
                "regions": [
                    {"id": 1, "constraints": [{"lhs": "x", "rel": "<", "rhs": "1"}]},
                    {"id": 2, "constraints": [{"lhs": "x", "rel": ">", "rhs": "1"}]}],
                "adjacency": [[1, 2]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_region_objective_is_identically_zero() {
        let objective = score_objective::<f64>(DistFamily::Fisher, single_region(), 1000, 42);
        for w in [[0.0, 0.0], [1.0, -2.0], [-3.0, 0.5]] {
            assert_eq!(objective(&w), 0.0);
        }
    }

    #[test]
    fn symmetric_fisher_beats_skewed_on_mirrored_halves() {
        // F(a, a) has median one, so both half-lines get equal mass.
        let partition = mirrored_halves();
        let symmetric = evaluate_score::<f64>(DistFamily::Fisher, &partition, 10_000, 9, &[
            5.0f64.ln(),
            5.0f64.ln(),
        ]);
        let skewed = evaluate_score::<f64>(DistFamily::Fisher, &partition, 10_000, 9, &[
            20.0f64.ln(),
            1.0f64.ln(),
        ]);
        assert!(symmetric >= skewed, "symmetric {} vs skewed {}", symmetric, skewed);
        assert!(symmetric > 0.9);
    }

    #[test]
    fn objective_is_deterministic_under_common_random_numbers() {
        let objective = score_objective::<f64>(DistFamily::Fisher, toggle_partition(), 2000, 31);
        let w = vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4, 0.2, 0.1, -0.1, 0.3];
        assert_eq!(objective(&w), objective(&w));
    }

    #[test]
    fn unpacked_parameters_are_strictly_positive() {
        let w: Vec<f64> = vec![-30.0, 0.0, 4.0, -2.0, 1.0, -7.5];
        match unpack_coefficients(DistFamily::Fisher, 3, &w).unwrap() {
            DistributionSpec::Fisher(f) => {
                assert!(f.coeffs().iter().all(|c| *c > 0.0));
            }
            _ => unreachable!(),
        }
        let n = 2;
        let w = vec![-1.0, 2.0, -5.0, 0.7, -3.0];
        match unpack_coefficients(DistFamily::SquaredGaussian, n, &w).unwrap() {
            DistributionSpec::SquaredGaussian(g) => {
                assert_eq!(g.mean(), &[-1.0, 2.0]);
                assert!(g.chol()[0][0] > 0.0 && g.chol()[1][1] > 0.0);
                assert_eq!(g.chol()[1][0], 0.7);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn optimize_improves_over_its_starting_scores() {
        let cfg = NelderMeadConfig { max_iter: 60, x_tol: 1e-4, f_tol: 1e-6, ..Default::default() };
        let out =
            optimize_distribution::<f64>(DistFamily::Fisher, &toggle_partition(), 2000, &cfg, 3, 7)
                .unwrap();
        for r in &out.restarts {
            assert!(r.final_score >= r.initial_score);
            for w in r.score_trace.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
        assert!(out.best_score >= out.restarts.iter().map(|r| r.initial_score).fold(0.0, f64::max));
        assert_eq!(out.best_frequencies.len(), 9);
    }

    #[test]
    fn tiny_sample_size_is_flagged_noisy() {
        let cfg = NelderMeadConfig { max_iter: 40, x_tol: 1e-4, f_tol: 1e-6, ..Default::default() };
        let out =
            optimize_distribution::<f64>(DistFamily::Fisher, &mirrored_halves(), 10, &cfg, 2, 11)
                .unwrap();
        assert!(out.noisy, "score std {} should exceed the threshold", out.score_std);

        // The same partition at a serious sample size is quiet.
        let out =
            optimize_distribution::<f64>(DistFamily::Fisher, &mirrored_halves(), 10_000, &cfg, 2, 11)
                .unwrap();
        assert!(!out.noisy, "score std {} should stay below the threshold", out.score_std);
    }

    #[test]
    fn restarts_must_be_positive() {
        assert!(matches!(
            optimize_distribution::<f64>(
                DistFamily::Fisher,
                &toggle_partition(),
                100,
                &NelderMeadConfig::default(),
                0,
                1
            ),
            Err(OptimizerError::NoRestarts)
        ));
    }

    #[test]
    fn nelder_mead_works_at_f32() {
        let f = |x: &[f32]| (x[0] - 1.0) * (x[0] - 1.0);
        let cfg = NelderMeadConfig::<f32> { x_tol: 1e-4, f_tol: 1e-6, ..Default::default() };
        let r = nelder_mead(f, &[0.0], &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-2);
    }
}
