//! Equilibrium enumeration for Hill models at fixed parameters.
//!
//! The pipeline: a monotone bootstrap iteration encloses all equilibria in a
//! rectangle, a uniform grid over the rectangle seeds damped Newton runs, and
//! a radii-polynomial test decides which numerical roots are distinct.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hill::{EdgeSign, HillError, HillModel};
use crate::newton::{newton, NewtonOptions};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum EquilibriaError {
    #[error(transparent)]
    Hill(#[from] HillError),
    #[error("bootstrap iteration did not converge within {0} iterations")]
    EnclosureDiverged(usize),
    #[error("rectangle is not a fixed point of the bootstrap map (defect {0})")]
    RectangleNotFixed(f64),
    #[error("corner point failed verification: {0}")]
    CornerVerification(String),
    #[error("model must have exactly two nodes, got {0}")]
    NotPlanar(usize),
}

/// Axis-aligned rectangle `prod_i [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle<F: Real> {
    pub lower: DVector<F>,
    pub upper: DVector<F>,
}

impl<F: Real> Rectangle<F> {
    pub fn new(lower: DVector<F>, upper: DVector<F>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        debug_assert!(lower.iter().zip(upper.iter()).all(|(a, b)| a <= b));
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn max_width(&self) -> F {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(a, b)| *b - *a)
            .fold(F::zero(), |acc, w| acc.max(w))
    }

    pub fn is_degenerate(&self, tol: F) -> bool {
        self.max_width() < tol
    }

    pub fn contains(&self, x: &DVector<F>, slack: F) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (a, b))| *v >= *a - slack && *v <= *b + slack)
    }
}

/// Monotone factorization of the nonlinear part: per node, the product of its
/// activating summands (increasing) and repressing summands (decreasing).
/// Exists exactly when no summand mixes signs.
fn check_monotone_factorization<F: Real>(model: &HillModel<F>) -> Result<(), HillError> {
    for i in 0..model.n_nodes() {
        for summand in model.topology().interaction(i) {
            let mut signs = summand.iter().map(|&e| model.topology().edges()[e].sign);
            if let Some(first) = signs.next() {
                if signs.any(|s| s != first) {
                    return Err(HillError::NoMonotoneFactorization(format!(
                        "node {} has a summand mixing activation and repression",
                        i
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Product over the node's summands of the given sign, with each response
/// evaluated at `x`.
fn signed_factor<F: Real>(model: &HillModel<F>, i: usize, sign: EdgeSign, x: &DVector<F>) -> F {
    let mut prod = F::one();
    for summand in model.topology().interaction(i) {
        if summand.is_empty() {
            continue;
        }
        let edge0 = &model.topology().edges()[summand[0]];
        if edge0.sign != sign {
            continue;
        }
        let mut s = F::zero();
        for &e in summand {
            let edge = &model.topology().edges()[e];
            s += crate::hill::response_derivatives(
                x[edge.source],
                edge.sign,
                &model.edge_params()[e],
            )
            .value;
        }
        prod *= s;
    }
    prod
}

/// Limit of a signed factor: activating summands at `x -> 0` and repressing
/// at `x -> inf` both give the summand's `sum ell`; the opposite limits give
/// `sum (ell + delta)`.
fn signed_factor_limit<F: Real>(model: &HillModel<F>, i: usize, sign: EdgeSign, low: bool) -> F {
    let mut prod = F::one();
    for summand in model.topology().interaction(i) {
        if summand.is_empty() {
            continue;
        }
        if model.topology().edges()[summand[0]].sign != sign {
            continue;
        }
        let mut s = F::zero();
        for &e in summand {
            let p = &model.edge_params()[e];
            s += if low { p.ell } else { p.ell + p.delta };
        }
        prod *= s;
    }
    prod
}

/// One application of the bootstrap map `Phi` to the interval pair
/// `(alpha, beta)`.
pub fn bootstrap_map<F: Real>(
    model: &HillModel<F>,
    alpha: &DVector<F>,
    beta: &DVector<F>,
) -> Result<(DVector<F>, DVector<F>), EquilibriaError> {
    check_monotone_factorization(model)?;
    let n = model.n_nodes();
    let mut a = DVector::zeros(n);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let gp_alpha = signed_factor(model, i, EdgeSign::Activating, alpha);
        let gp_beta = signed_factor(model, i, EdgeSign::Activating, beta);
        let gm_alpha = signed_factor(model, i, EdgeSign::Repressing, alpha);
        let gm_beta = signed_factor(model, i, EdgeSign::Repressing, beta);
        a[i] = gp_alpha * gm_beta / model.gamma()[i];
        b[i] = gp_beta * gm_alpha / model.gamma()[i];
    }
    Ok((a, b))
}

/// The canonical starting pair: `alpha0_i = g_i^+(0) liminf g_i^- / gamma_i`
/// and `beta0_i = limsup g_i^+ g_i^-(0) / gamma_i`.
pub fn canonical_start<F: Real>(
    model: &HillModel<F>,
) -> Result<(DVector<F>, DVector<F>), EquilibriaError> {
    check_monotone_factorization(model)?;
    let n = model.n_nodes();
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    for i in 0..n {
        let gp_low = signed_factor_limit(model, i, EdgeSign::Activating, true);
        let gp_high = signed_factor_limit(model, i, EdgeSign::Activating, false);
        let gm_low = signed_factor_limit(model, i, EdgeSign::Repressing, true);
        let gm_high = signed_factor_limit(model, i, EdgeSign::Repressing, false);
        alpha[i] = gp_low * gm_low / model.gamma()[i];
        beta[i] = gp_high * gm_high / model.gamma()[i];
    }
    Ok((alpha, beta))
}

pub const ENCLOSURE_EPS: f64 = 1e-10;
pub const ENCLOSURE_ITERATION_CAP: usize = 100_000;

/// Iterate the bootstrap map from the canonical start until successive
/// iterates differ by less than `eps` in sup norm. The returned rectangle
/// contains every equilibrium of the model.
pub fn root_enclosure<F: Real>(model: &HillModel<F>, eps: F) -> Result<Rectangle<F>, EquilibriaError> {
    let (rect, converged) = enclosure_within(model, eps, ENCLOSURE_ITERATION_CAP)?;
    if !converged {
        return Err(EquilibriaError::EnclosureDiverged(ENCLOSURE_ITERATION_CAP));
    }
    Ok(rect)
}

/// Bounded-effort enclosure. Every iterate already contains all equilibria,
/// so callers that only need a search box may accept an unconverged
/// rectangle; the flag reports whether the `eps` criterion was reached.
/// Convergence of the iteration is sub-geometric right at a bifurcation.
pub fn enclosure_within<F: Real>(
    model: &HillModel<F>,
    eps: F,
    cap: usize,
) -> Result<(Rectangle<F>, bool), EquilibriaError> {
    let (mut alpha, mut beta) = canonical_start(model)?;
    for _ in 0..cap {
        let (a, b) = bootstrap_map(model, &alpha, &beta)?;
        let diff = (&a - &alpha)
            .iter()
            .chain((&b - &beta).iter())
            .fold(F::zero(), |acc, d| acc.max(d.abs()));
        alpha = a;
        beta = b;
        if diff < eps {
            return Ok((Rectangle::new(alpha, beta), true));
        }
    }
    Ok((Rectangle::new(alpha, beta), false))
}

/// Damped Newton on the vector field; `None` when the iteration stalls,
/// diverges, or hits a singular Jacobian.
pub fn find_root<F: Real>(model: &HillModel<F>, x0: &DVector<F>) -> Option<DVector<F>> {
    let opts = NewtonOptions { clamp_nonnegative: true, ..NewtonOptions::default() };
    newton(
        |x| model.vector_field(x),
        |x| model.jacobian(x),
        x0,
        &opts,
    )
    .ok()
    .map(|sol| sol.x)
}

/// Why the radii polynomial gave no radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiiFailure {
    SingularJacobian,
    /// `Z0 >= 1`: the approximate inverse does not contract.
    NoContraction,
    NegativeDiscriminant,
}

/// Largest existence radius from the radii polynomial
/// `p(r) = Z1 r^2 + (Z0 - 1) r + Y` built at the numerical zero `x_hat`:
/// `r* = (1 - Z0 + sqrt((1 - Z0)^2 - 4 Z1 Y)) / (2 Z1)`.
///
/// All norms are sup norms; `Z1` uses the constant bound `|A D2f(x_hat)|`.
/// A vanishing `Z1` (affine systems) yields an infinite radius.
pub fn radii_pol<F: Real>(model: &HillModel<F>, x_hat: &DVector<F>) -> Result<F, RadiiFailure> {
    let (y, z0, z1) = radii_bounds(model, x_hat)?;
    if z0 >= F::one() {
        return Err(RadiiFailure::NoContraction);
    }
    let point_radius = radii_star(y, z0, z1)?;

    // The constant-Z1 shortcut evaluates the second derivative only at
    // x_hat. For steep Hill responses that can certify a radius reaching far
    // across a threshold where the curvature is enormous, which would merge
    // genuinely distinct equilibria. Shrink the radius until the curvature
    // bound probed over the ball actually supports it.
    let jac = model.jacobian(x_hat);
    let a = match jac.lu().try_inverse() {
        Some(a) => a,
        None => return Err(RadiiFailure::SingularJacobian),
    };
    let state_scale = F::lit(4.0) * (F::one() + sup_norm_vec(x_hat));
    let mut r = point_radius.min(state_scale);
    for _ in 0..80 {
        let z1_ball = probe_z1(model, &a, x_hat, r).max(z1);
        let p = z1_ball * r * r + (z0 - F::one()) * r + y;
        if p < F::zero() {
            return Ok(r.min(point_radius));
        }
        r *= F::lit(0.5);
    }
    Err(RadiiFailure::NegativeDiscriminant)
}

/// Curvature bound `|A D2f|` probed over the ball of radius `r` around
/// `x_hat`: the ball's axis extremes plus, per edge, the points near the
/// threshold where a Hill response curves hardest.
fn probe_z1<F: Real>(model: &HillModel<F>, a: &DMatrix<F>, x_hat: &DVector<F>, r: F) -> F {
    let n = model.n_nodes();
    let z1_at = |x: &DVector<F>| -> F {
        let derivs = match model.derivatives(x) {
            Ok(d) => d,
            Err(_) => return F::zero(),
        };
        let mut z1 = F::zero();
        for i in 0..n {
            let mut row_sum = F::zero();
            for j in 0..n {
                for k in 0..n {
                    let mut entry = F::zero();
                    for l in 0..n {
                        entry += a[(i, l)] * derivs.dx2f[l][(j, k)];
                    }
                    row_sum += entry.abs();
                }
            }
            z1 = z1.max(row_sum);
        }
        z1
    };

    let mut bound = z1_at(x_hat);
    let mut probe = |coord: usize, value: F| {
        let lo = (x_hat[coord] - r).max(F::zero());
        let hi = x_hat[coord] + r;
        if value < lo || value > hi {
            return;
        }
        let mut x = x_hat.clone();
        x[coord] = value;
        bound = bound.max(z1_at(&x));
    };
    for j in 0..n {
        probe(j, (x_hat[j] - r).max(F::zero()));
        probe(j, x_hat[j] + r);
    }
    for (e, p) in model.edge_params().iter().enumerate() {
        let source = model.topology().edges()[e].source;
        let d = p.hill.max(F::one());
        for off in [-3.0, -1.5, 0.0, 1.5, 3.0] {
            probe(source, p.theta * (F::one() + F::lit(off) / d));
        }
    }
    bound
}

/// The three bounds `(Y, Z0, Z1)` entering the radii polynomial.
pub fn radii_bounds<F: Real>(
    model: &HillModel<F>,
    x_hat: &DVector<F>,
) -> Result<(F, F, F), RadiiFailure> {
    let n = model.n_nodes();
    let fx = model.vector_field(x_hat);
    let jac = model.jacobian(x_hat);
    let a = jac.clone().lu().try_inverse().ok_or(RadiiFailure::SingularJacobian)?;

    let y = sup_norm_vec(&(&a * &fx));
    let z0 = operator_norm(&(DMatrix::identity(n, n) - &a * &jac));
    let derivs = model.derivatives(x_hat).map_err(|_| RadiiFailure::SingularJacobian)?;
    // max_i sum_{j,k} |(A D2f)_{i j k}|
    let mut z1 = F::zero();
    for i in 0..n {
        let mut row_sum = F::zero();
        for j in 0..n {
            for k in 0..n {
                let mut entry = F::zero();
                for l in 0..n {
                    entry += a[(i, l)] * derivs.dx2f[l][(j, k)];
                }
                row_sum += entry.abs();
            }
        }
        z1 = z1.max(row_sum);
    }
    Ok((y, z0, z1))
}

/// Radius from precomputed bounds; exposed for direct checking.
pub fn radii_star<F: Real>(y: F, z0: F, z1: F) -> Result<F, RadiiFailure> {
    if z0 >= F::one() {
        return Err(RadiiFailure::NoContraction);
    }
    if z1 == F::zero() {
        return Ok(F::inf());
    }
    let one_minus = F::one() - z0;
    let disc = one_minus * one_minus - F::lit(4.0) * z1 * y;
    if disc < F::zero() {
        return Err(RadiiFailure::NegativeDiscriminant);
    }
    Ok((one_minus + disc.sqrt()) / (F::lit(2.0) * z1))
}

fn sup_norm_vec<F: Real>(v: &DVector<F>) -> F {
    v.iter().fold(F::zero(), |acc, x| acc.max(x.abs()))
}

/// Induced sup-norm of a matrix: max absolute row sum.
fn operator_norm<F: Real>(m: &DMatrix<F>) -> F {
    let mut norm = F::zero();
    for i in 0..m.nrows() {
        let mut row = F::zero();
        for j in 0..m.ncols() {
            row += m[(i, j)].abs();
        }
        norm = norm.max(row);
    }
    norm
}

/// Merge tolerance used when the radii polynomial fails on a candidate.
pub const FALLBACK_MERGE_TOL: f64 = 1e-8;

/// One kept equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium<F: Real> {
    pub x: Vec<F>,
    pub residual: F,
    /// Existence radius; `None` when the radii polynomial failed and the
    /// fixed fallback tolerance was used instead.
    pub radius: Option<F>,
}

impl<F: Real> Equilibrium<F> {
    pub fn point(&self) -> DVector<F> {
        DVector::from_vec(self.x.clone())
    }
}

/// Deduplicated equilibria; survivors are pairwise approximately distinct.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSet<F: Real> {
    pub points: Vec<Equilibrium<F>>,
    /// True when any pairwise comparison fell back to the fixed tolerance.
    pub merge_fallback_used: bool,
}

impl<F: Real> EquilibriumSet<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Scan candidates in order; a later candidate within the larger of the two
/// existence radii of an earlier survivor is deleted as a duplicate.
pub fn unique<F: Real>(model: &HillModel<F>, candidates: &[DVector<F>]) -> EquilibriumSet<F> {
    // Numerically identical candidates (grid seeds converging to the same
    // root) are merged first so the radii polynomial runs once per distinct
    // point.
    let mut reps: Vec<DVector<F>> = Vec::new();
    for c in candidates {
        if !reps.iter().any(|r| sup_norm_vec(&(c - r)) < F::lit(1e-12)) {
            reps.push(c.clone());
        }
    }

    let radii: Vec<Result<F, RadiiFailure>> = reps.iter().map(|x| radii_pol(model, x)).collect();
    let mut fallback_used = false;
    let mut kept: Vec<usize> = Vec::new();
    'candidates: for i in 0..reps.len() {
        for &j in &kept {
            let dist = sup_norm_vec(&(&reps[i] - &reps[j]));
            let merged = match (&radii[i], &radii[j]) {
                (Ok(ri), Ok(rj)) => dist < ri.max(*rj),
                _ => {
                    fallback_used = true;
                    dist < F::lit(FALLBACK_MERGE_TOL)
                }
            };
            if merged {
                continue 'candidates;
            }
        }
        kept.push(i);
    }
    EquilibriumSet {
        points: kept
            .into_iter()
            .map(|i| Equilibrium {
                x: reps[i].iter().copied().collect(),
                residual: sup_norm_vec(&model.vector_field(&reps[i])),
                radius: radii[i].as_ref().ok().copied(),
            })
            .collect(),
        merge_fallback_used: fallback_used,
    }
}

/// Grid-seeded Newton over a rectangle: `(k+1)^N` uniform seeds, with
/// non-converging seeds dropped and survivors deduplicated.
pub fn hill_equilibria<F: Real>(
    model: &HillModel<F>,
    rect: &Rectangle<F>,
    k: usize,
) -> EquilibriumSet<F> {
    assert!(k >= 1, "grid density must be at least 1");
    let n = model.n_nodes();
    let nodes_per_dim = k + 1;
    let total = nodes_per_dim.pow(n as u32);
    let roots: Vec<Option<DVector<F>>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = flat;
            let mut seed = DVector::zeros(n);
            for i in 0..n {
                let step = idx % nodes_per_dim;
                idx /= nodes_per_dim;
                let t = F::from_usize(step).unwrap() / F::from_usize(k).unwrap();
                seed[i] = rect.lower[i] + t * (rect.upper[i] - rect.lower[i]);
            }
            find_root(model, &seed)
        })
        .collect();
    let candidates: Vec<DVector<F>> = roots.into_iter().flatten().collect();
    unique(model, &candidates)
}

/// Tolerance below which an enclosure rectangle counts as a single point.
pub const DEGENERATE_WIDTH: f64 = 1e-8;

/// Outcome of the corner dichotomy for the two-node repressing loop.
#[derive(Debug, Clone)]
pub enum ToggleEquilibria<F: Real> {
    /// Degenerate rectangle: the single point is the unique stable
    /// equilibrium.
    Unique { x: DVector<F>, residual: F, eigen_real_parts: [F; 2] },
    /// Nondegenerate rectangle: the two opposite corners are stable
    /// equilibria.
    Bistable { corners: [CornerEquilibrium<F>; 2] },
}

#[derive(Debug, Clone)]
pub struct CornerEquilibrium<F: Real> {
    pub x: DVector<F>,
    pub residual: F,
    pub eigen_real_parts: [F; 2],
    pub eigen_imag_parts: [F; 2],
}

/// Evaluate the corner dichotomy on a converged bootstrap rectangle: either
/// the rectangle is a point and the unique equilibrium is stable, or the
/// corners `(alpha_1, beta_2)` and `(beta_1, alpha_2)` are stable equilibria.
pub fn toggle_corner_equilibria<F: Real>(
    model: &HillModel<F>,
    rect: &Rectangle<F>,
) -> Result<ToggleEquilibria<F>, EquilibriaError> {
    if model.n_nodes() != 2 {
        return Err(EquilibriaError::NotPlanar(model.n_nodes()));
    }
    let (a, b) = bootstrap_map(model, &rect.lower, &rect.upper)?;
    let defect = sup_norm_vec(&(&a - &rect.lower)).max(sup_norm_vec(&(&b - &rect.upper)));
    if defect > F::lit(1e-7) {
        return Err(EquilibriaError::RectangleNotFixed(defect.as_f64()));
    }

    let residual_tol = F::lit(1e-10);
    let eig_parts = |x: &DVector<F>| {
        let eig = model.jacobian(x).complex_eigenvalues();
        ([eig[0].re, eig[1].re], [eig[0].im, eig[1].im])
    };

    if rect.is_degenerate(F::lit(DEGENERATE_WIDTH)) {
        let x = (&rect.lower + &rect.upper) * F::lit(0.5);
        let residual = sup_norm_vec(&model.vector_field(&x));
        if residual > residual_tol {
            return Err(EquilibriaError::CornerVerification(format!(
                "degenerate point residual {}",
                residual.as_f64()
            )));
        }
        let (re, _) = eig_parts(&x);
        if re.iter().any(|r| !(*r < F::zero())) {
            return Err(EquilibriaError::CornerVerification(
                "degenerate point is not stable".into(),
            ));
        }
        return Ok(ToggleEquilibria::Unique { x, residual, eigen_real_parts: re });
    }

    let corner_points = [
        DVector::from_vec(vec![rect.lower[0], rect.upper[1]]),
        DVector::from_vec(vec![rect.upper[0], rect.lower[1]]),
    ];
    let mut corners = Vec::with_capacity(2);
    for x in corner_points {
        let residual = sup_norm_vec(&model.vector_field(&x));
        if residual > residual_tol {
            return Err(EquilibriaError::CornerVerification(format!(
                "corner residual {}",
                residual.as_f64()
            )));
        }
        let (re, im) = eig_parts(&x);
        if re.iter().any(|r| !(*r < F::zero())) {
            return Err(EquilibriaError::CornerVerification("corner is not stable".into()));
        }
        corners.push(CornerEquilibrium { x, residual, eigen_real_parts: re, eigen_imag_parts: im });
    }
    let corners: [CornerEquilibrium<F>; 2] =
        [corners[0].clone(), corners[1].clone()];
    Ok(ToggleEquilibria::Bistable { corners })
}

/// JSON export rows for an equilibrium set: residuals, radii and the real
/// parts of the Jacobian spectrum at each point.
pub fn equilibria_to_json<F: Real>(model: &HillModel<F>, set: &EquilibriumSet<F>) -> String {
    #[derive(Serialize)]
    struct Row {
        x: Vec<f64>,
        residual: f64,
        radius: Option<f64>,
        eigen_real_parts: Vec<f64>,
    }
    let rows: Vec<Row> = set
        .points
        .iter()
        .map(|eq| {
            let x = eq.point();
            let eig = model.jacobian(&x).complex_eigenvalues();
            Row {
                x: eq.x.iter().map(|v| v.as_f64()).collect(),
                residual: eq.residual.as_f64(),
                radius: eq.radius.map(|r| r.as_f64()),
                eigen_real_parts: eig.iter().map(|z| z.re.as_f64()).collect(),
            }
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("equilibria serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hill::{builtin_reduced_toggle, builtin_toggle_switch, ReducedToggleParams};

    fn reduced(coords: [f64; 5], d: f64) -> HillModel<f64> {
        builtin_reduced_toggle(&ReducedToggleParams::new(
            coords[0], coords[1], coords[2], coords[3], coords[4], d,
        ))
        .unwrap()
    }

    const REGION_1: [f64; 5] = [2.0, 1.0, 1.0, 0.1, 0.2];
    const REGION_5: [f64; 5] = [0.5, 1.0, 1.0, 0.5, 1.0];
    const REGION_7: [f64; 5] = [0.3, 0.5, 2.0, 0.1, 0.2];

    #[test]
    fn fixed_points_of_phi_are_equilibria() {
        let model = reduced(REGION_7, 10.0);
        let rect = root_enclosure(&model, 1e-12).unwrap();
        // Degenerate rectangle: the fixed point of Phi is a zero of f.
        let x = (&rect.lower + &rect.upper) * 0.5;
        let f = model.vector_field(&x);
        assert!(f.amax() < 1e-10, "residual {}", f.amax());
    }

    #[test]
    fn collapsed_interval_duplicates_components() {
        let model = reduced(REGION_5, 3.0);
        let x = DVector::from_vec(vec![0.8, 0.9]);
        let (a, b) = bootstrap_map(&model, &x, &x).unwrap();
        // With alpha = beta both halves agree componentwise.
        assert_eq!(a, b);
        // And they reproduce H12(x2), H21(x1)/gamma2.
        let f = model.vector_field(&x);
        assert!((a[0] - (f[0] + x[0])).abs() < 1e-14);
        assert!((a[1] - (f[1] / model.gamma()[1] + x[1])).abs() < 1e-14);
    }

    #[test]
    fn iterates_are_nested_from_the_canonical_start() {
        let model = reduced(REGION_5, 100.0);
        let (mut alpha, mut beta) = canonical_start(&model).unwrap();
        for _ in 0..50 {
            let (a, b) = bootstrap_map(&model, &alpha, &beta).unwrap();
            for i in 0..2 {
                assert!(a[i] >= alpha[i] - 1e-14, "alpha must not decrease");
                assert!(b[i] <= beta[i] + 1e-14, "beta must not increase");
                assert!(a[i] <= b[i], "interval stays ordered");
            }
            alpha = a;
            beta = b;
        }
    }

    #[test]
    fn monostable_parameters_collapse_the_rectangle() {
        let model = reduced(REGION_7, 10.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        assert!(rect.max_width() < 1e-9, "width {}", rect.max_width());
    }

    #[test]
    fn bistable_parameters_keep_a_fat_rectangle() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        assert!(rect.max_width() > 0.5, "width {}", rect.max_width());
    }

    #[test]
    fn every_equilibrium_lies_in_the_enclosure() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let set = hill_equilibria(&model, &rect, 4);
        assert_eq!(set.len(), 3);
        for eq in &set.points {
            assert!(rect.contains(&eq.point(), 1e-8));
        }
    }

    #[test]
    fn zero_exponent_newton_converges_in_one_step() {
        let mut model = builtin_toggle_switch::<f64>();
        model.set_hill_exponent(0.0);
        // Affine field: -Gamma x + P.
        let p1 = model.edge_params()[1].ell + 0.5 * model.edge_params()[1].delta;
        let p0 = model.edge_params()[0].ell + 0.5 * model.edge_params()[0].delta;
        let expect = DVector::from_vec(vec![p1 / model.gamma()[0], p0 / model.gamma()[1]]);
        for start in [[3.0, 0.1], [0.2, 5.0], [1.0, 1.0]] {
            let x = find_root(&model, &DVector::from_vec(start.to_vec())).unwrap();
            assert!((x - &expect).amax() < 1e-12);
        }
    }

    #[test]
    fn newton_from_an_exact_root_returns_it() {
        let model = reduced(REGION_5, 2.0);
        let x0 = DVector::from_vec(vec![1.0, 1.0]); // exact equilibrium
        let x = find_root(&model, &x0).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn corner_seed_reaches_a_stable_equilibrium() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let corner = DVector::from_vec(vec![rect.lower[0], rect.upper[1]]);
        let x = find_root(&model, &corner).unwrap();
        assert!(model.vector_field(&x).amax() <= 1e-12);
        let eigs = model.jacobian(&x).complex_eigenvalues();
        assert!(eigs.iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn radii_star_closed_forms() {
        // Exact root with exact inverse: roots of Z1 r^2 - r, largest is 1/Z1.
        assert_eq!(radii_star(0.0, 0.0, 4.0).unwrap(), 0.25);
        // Affine problem: infinite radius.
        assert_eq!(radii_star(0.1, 0.0, 0.0).unwrap(), f64::INFINITY);
        assert!(matches!(radii_star(0.1, 1.0, 1.0), Err(RadiiFailure::NoContraction)));
        assert!(matches!(radii_star(1.0, 0.9, 1.0), Err(RadiiFailure::NegativeDiscriminant)));
    }

    #[test]
    fn radius_is_a_root_of_the_polynomial() {
        let model = reduced(REGION_5, 100.0);
        // The interior equilibrium sits where the curvature is live, so the
        // closed form and its bounds share a sane scale.
        let x = find_root(&model, &DVector::from_vec(vec![1.05, 0.95])).unwrap();
        let (y, z0, z1) = radii_bounds(&model, &x).unwrap();
        let r = radii_star(y, z0, z1).unwrap();
        let p = z1 * r * r + (z0 - 1.0) * r + y;
        assert!(p.abs() < 1e-10, "p(r*) = {}", p);
    }

    #[test]
    fn distinct_equilibria_exceed_their_radii() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let x1 = find_root(&model, &DVector::from_vec(vec![rect.lower[0], rect.upper[1]])).unwrap();
        let x2 = find_root(&model, &DVector::from_vec(vec![rect.upper[0], rect.lower[1]])).unwrap();
        let r1 = radii_pol(&model, &x1).unwrap();
        let r2 = radii_pol(&model, &x2).unwrap();
        assert!((&x1 - &x2).amax() > r1.max(r2));
    }

    #[test]
    fn unique_merges_duplicates_and_keeps_distinct_roots() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let x1 = find_root(&model, &DVector::from_vec(vec![rect.lower[0], rect.upper[1]])).unwrap();
        let x2 = find_root(&model, &DVector::from_vec(vec![rect.upper[0], rect.lower[1]])).unwrap();
        let mut shifted = x1.clone();
        shifted[0] += 1e-13;
        let set = unique(&model, &[x1.clone(), shifted, x2.clone()]);
        assert_eq!(set.len(), 2);

        let empty = unique(&model, &[]);
        assert!(empty.is_empty());

        // Idempotence.
        let points: Vec<DVector<f64>> = set.points.iter().map(|e| e.point()).collect();
        let again = unique(&model, &points);
        assert_eq!(again.len(), set.len());
        for (a, b) in again.points.iter().zip(&set.points) {
            assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn equilibrium_counts_match_the_phase_portraits() {
        let mut model = builtin_toggle_switch::<f64>();
        model.set_hill_exponent(0.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        assert_eq!(hill_equilibria(&model, &rect, 2).len(), 1);

        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let set = hill_equilibria(&model, &rect, 4);
        assert_eq!(set.len(), 3);
        // Two stable, one unstable.
        let stable = set
            .points
            .iter()
            .filter(|e| {
                model
                    .jacobian(&e.point())
                    .complex_eigenvalues()
                    .iter()
                    .all(|z| z.re < 0.0)
            })
            .count();
        assert_eq!(stable, 2);

        let model = reduced(REGION_1, 10.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        assert_eq!(hill_equilibria(&model, &rect, 4).len(), 1);
    }

    #[test]
    fn refining_the_grid_never_loses_equilibria() {
        for (coords, d) in [(REGION_5, 100.0), (REGION_1, 10.0), (REGION_7, 10.0)] {
            let model = reduced(coords, d);
            let rect = root_enclosure(&model, 1e-10).unwrap();
            let mut last = 0;
            for k in [1, 2, 4, 8] {
                let n = hill_equilibria(&model, &rect, k).len();
                assert!(n >= last, "count dropped from {} to {} at k = {}", last, n, k);
                last = n;
            }
        }
    }

    #[test]
    fn corner_dichotomy_degenerate_case() {
        let model = reduced(REGION_7, 10.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        match toggle_corner_equilibria(&model, &rect).unwrap() {
            ToggleEquilibria::Unique { residual, eigen_real_parts, .. } => {
                assert!(residual <= 1e-10);
                assert!(eigen_real_parts.iter().all(|r| *r < 0.0));
            }
            ToggleEquilibria::Bistable { .. } => panic!("expected a unique equilibrium"),
        }
    }

    #[test]
    fn corner_dichotomy_bistable_case() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        match toggle_corner_equilibria(&model, &rect).unwrap() {
            ToggleEquilibria::Bistable { corners } => {
                for c in &corners {
                    assert!(c.residual <= 1e-10);
                    assert!(c.eigen_real_parts.iter().all(|r| *r < 0.0));
                    // The proof gives a positive discriminant: real spectrum.
                    assert!(c.eigen_imag_parts.iter().all(|i| i.abs() < 1e-12));
                }
            }
            ToggleEquilibria::Unique { .. } => panic!("expected two corners"),
        }
    }

    #[test]
    fn corner_dichotomy_rejects_non_fixed_rectangles() {
        let model = reduced(REGION_5, 100.0);
        let rect = Rectangle::new(
            DVector::from_vec(vec![0.1, 0.1]),
            DVector::from_vec(vec![3.0, 3.0]),
        );
        assert!(matches!(
            toggle_corner_equilibria(&model, &rect),
            Err(EquilibriaError::RectangleNotFixed(_))
        ));
    }

    #[test]
    fn json_export_carries_spectra() {
        let model = reduced(REGION_5, 100.0);
        let rect = root_enclosure(&model, 1e-10).unwrap();
        let set = hill_equilibria(&model, &rect, 4);
        let text = equilibria_to_json(&model, &set);
        let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(rows.as_array().unwrap().len(), 3);
        assert!(rows[0]["eigen_real_parts"].as_array().unwrap().len() == 2);
        assert!(rows[0]["residual"].as_f64().unwrap() <= 1e-10);
    }
}
