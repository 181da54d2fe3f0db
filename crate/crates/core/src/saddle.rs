//! Saddle-node bifurcation detection along Hill-exponent paths.
//!
//! Strategy: count equilibria on a subdivision of the path, bisect every
//! interval across which the count changes, build a candidate `(x, v, s)`
//! from the near-merging equilibrium pair, then run Newton on the extended
//! map `G = (g; Dxg v; v'v - 1)` and verify the regularity conditions. All
//! failure modes are data, not errors.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::equilibria::{enclosure_within, hill_equilibria, EquilibriaError, EquilibriumSet};
use crate::hill::{builtin_reduced_toggle, HillError, HillModel, ReducedToggleParams};
use crate::newton::{newton, NewtonOptions};
use crate::scalar::{complex_abs, Real};

#[derive(Debug, Error)]
pub enum SaddleError {
    #[error(transparent)]
    Hill(#[from] HillError),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error("path requires a shared-exponent model")]
    NotSharedExponent,
    #[error("subdivision count must be at least 1")]
    NoSubdivision,
    #[error("equilibrium counts agree at the interval endpoints")]
    NoCountChange,
}

/// Hill exponent at the start and end of every path.
pub const PATH_D_MIN: f64 = 1.0;
pub const PATH_D_MAX: f64 = 100.0;

/// One-parameter family through parameter space along the shared Hill
/// exponent: `d(s) = 1 + 99 s`, all other parameters frozen.
#[derive(Debug, Clone)]
pub struct HillPath<F: Real> {
    model: HillModel<F>,
}

impl<F: Real> HillPath<F> {
    pub fn new(model: HillModel<F>) -> Result<Self, SaddleError> {
        if !model.shared_exponent() {
            return Err(SaddleError::NotSharedExponent);
        }
        Ok(Self { model })
    }

    pub fn for_reduced_toggle(params: &ReducedToggleParams<F>) -> Result<Self, SaddleError> {
        Ok(Self::new(builtin_reduced_toggle(params)?)?)
    }

    pub fn d_of_s(s: F) -> F {
        F::lit(PATH_D_MIN) + F::lit(PATH_D_MAX - PATH_D_MIN) * s
    }

    /// Chain-rule factor `dd/ds`.
    fn d_slope() -> F {
        F::lit(PATH_D_MAX - PATH_D_MIN)
    }

    /// The model at path position `s`; only the shared exponent changes.
    pub fn model_at(&self, s: F) -> HillModel<F> {
        let mut m = self.model.clone();
        m.set_hill_exponent(Self::d_of_s(s));
        m
    }

    pub fn base_model(&self) -> &HillModel<F> {
        &self.model
    }
}

/// Derivatives of a parameterized vector field `g(x, s)` used to assemble
/// the extended saddle-node system.
#[derive(Debug, Clone)]
pub struct PathDerivatives<F: Real> {
    pub dxg: DMatrix<F>,
    pub dx2g: Vec<DMatrix<F>>,
    pub dsg: DVector<F>,
    pub dxdsg: DMatrix<F>,
}

/// A smooth one-parameter family of vector fields.
pub trait PathVectorField<F: Real> {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<F>, s: F) -> DVector<F>;
    fn jacobian_x(&self, x: &DVector<F>, s: F) -> DMatrix<F>;
    fn path_derivatives(&self, x: &DVector<F>, s: F) -> PathDerivatives<F>;
}

impl<F: Real> PathVectorField<F> for HillPath<F> {
    fn dim(&self) -> usize {
        self.model.n_nodes()
    }

    fn eval(&self, x: &DVector<F>, s: F) -> DVector<F> {
        self.model_at(s).vector_field(x)
    }

    fn jacobian_x(&self, x: &DVector<F>, s: F) -> DMatrix<F> {
        self.model_at(s).jacobian(x)
    }

    fn path_derivatives(&self, x: &DVector<F>, s: F) -> PathDerivatives<F> {
        let model = self.model_at(s);
        let d = model.derivatives(x).expect("state in the nonnegative orthant");
        let slope = Self::d_slope();
        PathDerivatives {
            dxg: d.dxf,
            dx2g: d.dx2f,
            dsg: d.ddf * slope,
            dxdsg: d.dxddf * slope,
        }
    }
}

/// A point on the extended system: state, kernel direction, path position.
#[derive(Debug, Clone)]
pub struct SaddleCandidate<F: Real> {
    pub x: DVector<F>,
    pub v: DVector<F>,
    pub s: F,
}

/// Extended map `G(x, v, s) = (g; Dxg v; v'v - 1)` and its Jacobian.
pub fn saddle_map<F: Real>(
    field: &dyn PathVectorField<F>,
    u: &DVector<F>,
) -> (DVector<F>, DMatrix<F>) {
    let n = field.dim();
    debug_assert_eq!(u.len(), 2 * n + 1);
    let x = DVector::from_iterator(n, u.iter().take(n).copied());
    let v = DVector::from_iterator(n, u.iter().skip(n).take(n).copied());
    let s = u[2 * n];

    let g = field.eval(&x, s);
    let d = field.path_derivatives(&x, s);
    let dxg_v = &d.dxg * &v;

    let mut value = DVector::zeros(2 * n + 1);
    for i in 0..n {
        value[i] = g[i];
        value[n + i] = dxg_v[i];
    }
    value[2 * n] = v.dot(&v) - F::one();

    let mut jac = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    // Row block 1: [Dxg, 0, Dsg]
    for i in 0..n {
        for j in 0..n {
            jac[(i, j)] = d.dxg[(i, j)];
        }
        jac[(i, 2 * n)] = d.dsg[i];
    }
    // Row block 2: [Dx(Dxg v), Dxg, Ds(Dxg) v]
    for i in 0..n {
        for j in 0..n {
            let mut acc = F::zero();
            for k in 0..n {
                acc += d.dx2g[i][(j, k)] * v[k];
            }
            jac[(n + i, j)] = acc;
            jac[(n + i, n + j)] = d.dxg[(i, j)];
        }
        let mut acc = F::zero();
        for k in 0..n {
            acc += d.dxdsg[(i, k)] * v[k];
        }
        jac[(n + i, 2 * n)] = acc;
    }
    // Last row: [0, 2 v', 0]
    for j in 0..n {
        jac[(2 * n, n + j)] = v[j] + v[j];
    }

    (value, jac)
}

/// Equilibria and count at one path position.
#[derive(Debug, Clone)]
pub struct PathCount<F: Real> {
    pub s: F,
    pub equilibria: EquilibriumSet<F>,
}

impl<F: Real> PathCount<F> {
    pub fn count(&self) -> usize {
        self.equilibria.len()
    }
}

/// Memoized equilibrium counts along one path, keyed by the bit pattern of
/// `s`, so shared endpoints of adjacent subintervals reuse the same call.
pub struct PathCounter<'a, F: Real> {
    path: &'a HillPath<F>,
    grid_k: usize,
    enclosure_eps: F,
    cache: HashMap<u64, Rc<PathCount<F>>>,
}

impl<'a, F: Real> PathCounter<'a, F> {
    pub fn new(path: &'a HillPath<F>, grid_k: usize, enclosure_eps: F) -> Self {
        Self { path, grid_k, enclosure_eps, cache: HashMap::new() }
    }

    pub fn at(&mut self, s: F) -> Result<Rc<PathCount<F>>, SaddleError> {
        let key = s.as_f64().to_bits();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let model = self.path.model_at(s);
        // An unconverged rectangle is still a valid equilibrium enclosure;
        // near the bifurcation the iteration slows to sub-geometric and
        // waiting out the strict criterion would dominate the bisection.
        let (rect, _) = enclosure_within(&model, self.enclosure_eps, 5_000)?;
        let equilibria = hill_equilibria(&model, &rect, self.grid_k);
        let entry = Rc::new(PathCount { s, equilibria });
        self.cache.insert(key, entry.clone());
        Ok(entry)
    }
}

/// Pipeline controls.
#[derive(Debug, Clone, Copy)]
pub struct SaddleConfig<F> {
    /// Number of subintervals of `[0, 1]` in the first pass.
    pub subdivisions: usize,
    /// Grid density for the equilibrium search at each path point.
    pub grid_k: usize,
    /// Bisection stops when the bracketing interval is this narrow.
    pub tol_s: F,
    /// Residual target for Newton on the extended map.
    pub newton_tol: F,
    /// Splitting depth for subintervals whose count jumps by more than one.
    pub max_split_depth: usize,
    pub enclosure_eps: F,
}

impl<F: Real> Default for SaddleConfig<F> {
    fn default() -> Self {
        Self {
            subdivisions: 100,
            grid_k: 4,
            tol_s: F::lit(1e-6),
            newton_tol: F::lit(1e-10),
            max_split_depth: 12,
            enclosure_eps: F::lit(1e-10),
        }
    }
}

/// A numerically confirmed saddle-node bifurcation.
#[derive(Debug, Clone, Serialize)]
pub struct VerifiedSaddle<F: Real> {
    pub x: Vec<F>,
    pub v: Vec<F>,
    pub s: F,
    /// Hill exponent at the bifurcation, `1 + 99 s`.
    pub d: F,
    /// Final sup-norm of the extended map.
    pub residual: F,
    /// Magnitude of the near-zero eigenvalue of `Dxg`.
    pub smallest_eigenvalue: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BadCandidateReason {
    NewtonDiverged,
    SingularExtendedJacobian,
    DegenerateSpectrum,
    OutsidePath,
    CountChangeLost,
}

/// Candidate the extended solver could not confirm.
#[derive(Debug, Clone, Serialize)]
pub struct BadCandidate<F: Real> {
    pub x: Vec<F>,
    pub s: F,
    pub reason: BadCandidateReason,
}

/// Everything one parameter produced.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleOutcome<F: Real> {
    /// Verified saddles in increasing exponent order.
    pub saddles: Vec<VerifiedSaddle<F>>,
    pub bad_candidates: Vec<BadCandidate<F>>,
    pub multiple: bool,
}

/// Heat-map category of an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCategory {
    None,
    One,
    Multiple,
    Bad,
}

impl<F: Real> SaddleOutcome<F> {
    pub fn category(&self) -> OutcomeCategory {
        match self.saddles.len() {
            0 if self.bad_candidates.is_empty() => OutcomeCategory::None,
            0 => OutcomeCategory::Bad,
            1 => OutcomeCategory::One,
            _ => OutcomeCategory::Multiple,
        }
    }

    /// Smallest exponent among the verified saddles.
    pub fn d_min(&self) -> Option<F> {
        self.saddles.first().map(|s| s.d)
    }
}

/// Equilibrium counts at `subdivisions + 1` evenly spaced path positions.
pub fn count_along_path<F: Real>(
    path: &HillPath<F>,
    subdivisions: usize,
    grid_k: usize,
) -> Result<Vec<Rc<PathCount<F>>>, SaddleError> {
    if subdivisions == 0 {
        return Err(SaddleError::NoSubdivision);
    }
    let mut counter = PathCounter::new(path, grid_k, F::lit(1e-10));
    (0..=subdivisions)
        .map(|i| counter.at(F::from_usize(i).unwrap() / F::from_usize(subdivisions).unwrap()))
        .collect()
}

/// Refined bracket produced by bisection.
pub struct BisectResult<F: Real> {
    pub lo: Rc<PathCount<F>>,
    pub hi: Rc<PathCount<F>>,
    pub candidate: SaddleCandidate<F>,
}

/// Halve the interval while keeping a count change inside, then seed a
/// candidate from the equilibrium pair closest to merging on the
/// higher-count side.
pub fn bisect_change<F: Real>(
    counter: &mut PathCounter<'_, F>,
    mut lo: Rc<PathCount<F>>,
    mut hi: Rc<PathCount<F>>,
    tol_s: F,
) -> Result<BisectResult<F>, SaddleError> {
    if lo.count() == hi.count() {
        return Err(SaddleError::NoCountChange);
    }
    while hi.s - lo.s > tol_s {
        let mid = counter.at((lo.s + hi.s) * F::lit(0.5))?;
        if mid.count() != lo.count() {
            hi = mid;
        } else {
            // mid agrees with lo, so the change sits in the upper half.
            lo = mid;
        }
    }

    let higher = if lo.count() > hi.count() { &lo } else { &hi };
    let model = counter.path.model_at(higher.s);
    let points: Vec<DVector<F>> =
        higher.equilibria.points.iter().map(|e| e.point()).collect();
    let x = closest_to_neighbor(&points);
    let v = kernel_direction(&model.jacobian(&x));
    Ok(BisectResult {
        lo: lo.clone(),
        hi: hi.clone(),
        candidate: SaddleCandidate { x, v, s: higher.s },
    })
}

/// Of the given points, the one whose nearest neighbor is closest; with a
/// single point, that point.
fn closest_to_neighbor<F: Real>(points: &[DVector<F>]) -> DVector<F> {
    if points.len() < 2 {
        return points.first().cloned().expect("at least one equilibrium");
    }
    let mut best = (0, F::inf());
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let d = (&points[i] - &points[j]).norm();
            if d < best.1 {
                best = (i.min(j), d);
            }
        }
    }
    points[best.0].clone()
}

/// Unit eigenvector for the smallest-magnitude eigenvalue, sign-fixed so the
/// first nonzero component is positive.
pub fn kernel_direction<F: Real>(m: &DMatrix<F>) -> DVector<F> {
    let eigs = m.complex_eigenvalues();
    let lambda = eigs
        .iter()
        .min_by(|a, b| complex_abs(a).partial_cmp(&complex_abs(b)).unwrap())
        .map(|z| z.re)
        .unwrap_or_else(F::zero);
    let n = m.nrows();
    let shifted = m.clone() - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("svd with right singular vectors");
    let mut arg_min = 0;
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv < svd.singular_values[arg_min] {
            arg_min = i;
        }
    }
    let mut v: DVector<F> = v_t.row(arg_min).transpose();
    let norm = v.norm();
    if norm > F::zero() {
        v /= norm;
    }
    if let Some(first) = v.iter().find(|c| c.abs() > F::lit(1e-12)) {
        if *first < F::zero() {
            v = -v;
        }
    }
    v
}

/// Condition-number cap for accepting the extended Jacobian as regular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Eigenvalues other than the critical one must have real part beyond this.
pub const SPECTRAL_GAP: f64 = 1e-8;

/// Newton on the extended map from a candidate, then the two regularity
/// checks: the extended Jacobian is well conditioned and every non-critical
/// eigenvalue of `Dxg` keeps a nonzero real part.
pub fn solve_saddle<F: Real>(
    field: &dyn PathVectorField<F>,
    candidate: &SaddleCandidate<F>,
    tol: F,
) -> Result<VerifiedSaddle<F>, BadCandidate<F>> {
    let n = field.dim();
    let mut u0 = DVector::zeros(2 * n + 1);
    for i in 0..n {
        u0[i] = candidate.x[i];
        u0[n + i] = candidate.v[i];
    }
    u0[2 * n] = candidate.s;

    let bad = |reason| BadCandidate {
        x: candidate.x.iter().copied().collect(),
        s: candidate.s,
        reason,
    };

    let opts = NewtonOptions { tol, max_iter: 100, max_damping: 30, clamp_nonnegative: false };
    let sol = newton(
        |u| saddle_map(field, u).0,
        |u| saddle_map(field, u).1,
        &u0,
        &opts,
    )
    .map_err(|_| bad(BadCandidateReason::NewtonDiverged))?;

    let u = sol.x;
    let s = u[2 * n];
    if !(s >= F::zero() && s <= F::one()) {
        return Err(bad(BadCandidateReason::OutsidePath));
    }
    let x = DVector::from_iterator(n, u.iter().take(n).copied());
    let v = DVector::from_iterator(n, u.iter().skip(n).take(n).copied());
    if x.iter().any(|c| *c < F::zero()) {
        return Err(bad(BadCandidateReason::OutsidePath));
    }

    let (_, jac) = saddle_map(field, &u);
    let svd = jac.svd(false, false);
    let smax = svd.singular_values.iter().fold(F::zero(), |a, b| a.max(*b));
    let smin = svd.singular_values.iter().fold(F::inf(), |a, b| a.min(*b));
    if !(smin > F::zero()) || smax / smin > F::lit(CONDITION_LIMIT) {
        return Err(bad(BadCandidateReason::SingularExtendedJacobian));
    }

    let eigs = field.jacobian_x(&x, s).complex_eigenvalues();
    let mut order: Vec<usize> = (0..eigs.len()).collect();
    order.sort_by(|&a, &b| complex_abs(&eigs[a]).partial_cmp(&complex_abs(&eigs[b])).unwrap());
    let critical = order[0];
    for &i in &order[1..] {
        if eigs[i].re.abs() <= F::lit(SPECTRAL_GAP) {
            return Err(bad(BadCandidateReason::DegenerateSpectrum));
        }
    }

    Ok(VerifiedSaddle {
        x: x.iter().copied().collect(),
        v: v.iter().copied().collect(),
        s,
        d: HillPath::<F>::d_of_s(s),
        residual: sol.residual,
        smallest_eigenvalue: complex_abs(&eigs[critical]),
    })
}

/// Full pipeline for one path: subdivide, split multi-jumps, bisect every
/// count change, solve and verify each candidate.
pub fn detect_saddles<F: Real>(
    path: &HillPath<F>,
    cfg: &SaddleConfig<F>,
) -> Result<SaddleOutcome<F>, SaddleError> {
    if cfg.subdivisions == 0 {
        return Err(SaddleError::NoSubdivision);
    }
    let mut counter = PathCounter::new(path, cfg.grid_k, cfg.enclosure_eps);
    let mut intervals: Vec<(Rc<PathCount<F>>, Rc<PathCount<F>>, usize)> = Vec::new();
    {
        let mut prev =
            counter.at(F::zero())?;
        for i in 1..=cfg.subdivisions {
            let s = F::from_usize(i).unwrap() / F::from_usize(cfg.subdivisions).unwrap();
            let next = counter.at(s)?;
            if next.count() != prev.count() {
                intervals.push((prev.clone(), next.clone(), 0));
            }
            prev = next;
        }
    }

    let mut saddles: Vec<VerifiedSaddle<F>> = Vec::new();
    let mut bad: Vec<BadCandidate<F>> = Vec::new();

    while let Some((lo, hi, depth)) = intervals.pop() {
        let jump = (lo.count() as i64 - hi.count() as i64).abs();
        if jump > 1 && depth < cfg.max_split_depth && hi.s - lo.s > cfg.tol_s {
            // Separate coincident bifurcations before bisecting.
            let mid = counter.at((lo.s + hi.s) * F::lit(0.5))?;
            if mid.count() != lo.count() {
                intervals.push((lo.clone(), mid.clone(), depth + 1));
            }
            if mid.count() != hi.count() {
                intervals.push((mid, hi, depth + 1));
            }
            continue;
        }

        match bisect_change(&mut counter, lo, hi, cfg.tol_s) {
            Ok(result) => match solve_saddle(path, &result.candidate, cfg.newton_tol) {
                Ok(saddle) => saddles.push(saddle),
                Err(b) => bad.push(b),
            },
            Err(SaddleError::NoCountChange) => {
                // The change evaporated; record the artifact.
                bad.push(BadCandidate {
                    x: Vec::new(),
                    s: F::zero(),
                    reason: BadCandidateReason::CountChangeLost,
                });
            }
            Err(e) => return Err(e),
        }
    }

    // Distinct candidates can converge to the same bifurcation point.
    saddles.sort_by(|a, b| a.d.partial_cmp(&b.d).unwrap());
    let mut deduped: Vec<VerifiedSaddle<F>> = Vec::new();
    for s in saddles {
        let dup = deduped.iter().any(|k| {
            (k.d - s.d).abs() < F::lit(1e-4)
                && k.x
                    .iter()
                    .zip(&s.x)
                    .map(|(a, b)| (*a - *b).abs())
                    .fold(F::zero(), |acc, d| acc.max(d))
                    < F::lit(1e-6)
        });
        if !dup {
            deduped.push(s);
        }
    }

    let multiple = deduped.len() > 1;
    Ok(SaddleOutcome { saddles: deduped, bad_candidates: bad, multiple })
}

/// The pipeline specialized to a reduced Toggle Switch parameter.
pub fn classify_parameter<F: Real>(
    params: &ReducedToggleParams<F>,
    cfg: &SaddleConfig<F>,
) -> Result<SaddleOutcome<F>, SaddleError> {
    let path = HillPath::for_reduced_toggle(params)?;
    detect_saddles(&path, cfg)
}
