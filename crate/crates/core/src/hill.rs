//! Hill models: network topology, sigmoid response functions, the vector
//! field and every analytic derivative the downstream solvers need.
//!
//! A model couples a [`NetworkTopology`] (who regulates whom, and how the
//! in-edges of each node combine into a product-of-sums interaction) with a
//! decay rate per node and four positive parameters per edge. The vector
//! field has coordinates `f_i(x) = -gamma_i x_i + p_i(H(x))` where each `H`
//! is an activating or repressing Hill response.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{logistic, logistic_prime, Real};

#[derive(Debug, Error)]
pub enum HillError {
    #[error("negative state value not allowed")]
    NegativeState,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("model has no monotone factorization: {0}")]
    NoMonotoneFactorization(String),
}

/// Regulation sign of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSign {
    Activating,
    Repressing,
}

/// The four positive parameters of one regulatory edge.
///
/// `hill` is the Hill exponent `d`; the definition requires `d >= 1` but
/// `d = 0` is admitted so the constant-response limit can be exercised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEdgeParams<F> {
    pub ell: F,
    pub delta: F,
    pub theta: F,
    pub hill: F,
}

impl<F: Real> HillEdgeParams<F> {
    pub fn new(ell: F, delta: F, theta: F, hill: F) -> Result<Self, HillError> {
        let p = Self { ell, delta, theta, hill };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HillError> {
        if !(self.ell > F::zero()) {
            return Err(HillError::InvalidParameter(format!(
                "ell must be positive, got {}",
                self.ell.as_f64()
            )));
        }
        if !(self.delta > F::zero()) {
            return Err(HillError::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta.as_f64()
            )));
        }
        if !(self.theta > F::zero()) {
            return Err(HillError::InvalidParameter(format!(
                "theta must be positive, got {}",
                self.theta.as_f64()
            )));
        }
        if !(self.hill >= F::zero()) {
            return Err(HillError::InvalidParameter(format!(
                "hill exponent must be nonnegative, got {}",
                self.hill.as_f64()
            )));
        }
        Ok(())
    }
}

/// Value and partial derivatives of one Hill response at a point.
///
/// `dd` and `dx_dd` are derivatives with respect to the Hill exponent; at
/// `x = 0` the term `x^d ln(x/theta)` is taken to be 0 (its limit for d > 0).
#[derive(Debug, Clone, Copy)]
pub struct ResponseDerivatives<F> {
    pub value: F,
    pub dx: F,
    pub dxx: F,
    pub dd: F,
    pub dx_dd: F,
}

/// Evaluate an activating or repressing Hill response at `x >= 0`.
///
/// Activating: `ell + delta x^d / (theta^d + x^d)`; repressing swaps the
/// fraction. Computed through the logistic of `d ln(x/theta)` so exponents up
/// to 100 never overflow `theta^d`.
pub fn eval_hill_response<F: Real>(
    x: F,
    sign: EdgeSign,
    params: &HillEdgeParams<F>,
) -> Result<F, HillError> {
    params.validate()?;
    if x < F::zero() {
        return Err(HillError::NegativeState);
    }
    Ok(response_derivatives(x, sign, params).value)
}

/// All response derivatives at once. Callers must ensure `x >= 0`.
pub fn response_derivatives<F: Real>(
    x: F,
    sign: EdgeSign,
    params: &HillEdgeParams<F>,
) -> ResponseDerivatives<F> {
    let d = params.hill;
    let delta = params.delta;
    let theta = params.theta;
    let orient = match sign {
        EdgeSign::Activating => F::one(),
        EdgeSign::Repressing => -F::one(),
    };

    if x == F::zero() {
        // s = logistic(d ln(x/theta)) degenerates; take limits componentwise.
        let (s, dx, dxx) = boundary_response(d, delta, theta);
        let frac = match sign {
            EdgeSign::Activating => s,
            EdgeSign::Repressing => F::one() - s,
        };
        return ResponseDerivatives {
            value: params.ell + delta * frac,
            dx: orient * dx,
            dxx: orient * dxx,
            dd: F::zero(),
            dx_dd: F::zero(),
        };
    }

    let lam = (x / theta).ln();
    let z = d * lam;
    let s = logistic(z);
    let w = logistic_prime(z); // s (1 - s)

    let frac = match sign {
        EdgeSign::Activating => s,
        EdgeSign::Repressing => F::one() - s,
    };
    let value = params.ell + delta * frac;
    let dx = orient * delta * d * w / x;
    let one_minus_two_s = F::one() - (s + s);
    let dxx = orient * delta * d * w * (d * one_minus_two_s - F::one()) / (x * x);
    let dd = orient * delta * lam * w;
    let dx_dd = orient * delta * w * (F::one() + z * one_minus_two_s) / x;

    ResponseDerivatives { value, dx, dxx, dd, dx_dd }
}

/// Limits of `(s, H'/orient, H''/orient)` at `x = 0` for the activating case.
fn boundary_response<F: Real>(d: F, delta: F, theta: F) -> (F, F, F) {
    let zero = F::zero();
    let one = F::one();
    let two = F::lit(2.0);
    if d == zero {
        return (F::lit(0.5), zero, zero);
    }
    let s = zero;
    let dx = if d == one {
        delta / theta
    } else if d > one {
        zero
    } else {
        F::inf()
    };
    let dxx = if d == one {
        -two * delta / (theta * theta)
    } else if d == two {
        two * delta / (theta * theta)
    } else if d > two {
        zero
    } else if d > one {
        F::inf()
    } else {
        -F::inf()
    };
    (s, dx, dxx)
}

/// One directed regulatory edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub sign: EdgeSign,
}

/// Directed regulation graph plus the per-node interaction structure.
///
/// For node `i`, `interactions[i]` partitions its in-edges into summands;
/// each summand lists edge indices (into `edges`). The node's nonlinearity is
/// the product over summands of the sum of responses in the summand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    n_nodes: usize,
    edges: Vec<Edge>,
    interactions: Vec<Vec<Vec<usize>>>,
}

impl NetworkTopology {
    /// Build a topology. `interactions_by_source[i]` lists the summands of
    /// node `i`, each summand given by source-node indices.
    pub fn new(
        n_nodes: usize,
        edges: Vec<Edge>,
        interactions_by_source: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self, HillError> {
        if interactions_by_source.len() != n_nodes {
            return Err(HillError::InvalidTopology(format!(
                "need one interaction per node: {} nodes, {} interactions",
                n_nodes,
                interactions_by_source.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.source >= n_nodes || e.target >= n_nodes {
                return Err(HillError::InvalidTopology(format!(
                    "edge ({}, {}) out of range for {} nodes",
                    e.source, e.target, n_nodes
                )));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(HillError::InvalidTopology(format!(
                    "duplicate edge from {} to {}",
                    e.source, e.target
                )));
            }
        }

        let mut interactions = vec![Vec::new(); n_nodes];
        for (target, summands) in interactions_by_source.iter().enumerate() {
            let mut used = std::collections::HashSet::new();
            for summand in summands {
                let mut idxs = Vec::with_capacity(summand.len());
                for &source in summand {
                    let idx = edges
                        .iter()
                        .position(|e| e.source == source && e.target == target)
                        .ok_or_else(|| {
                            HillError::InvalidTopology(format!(
                                "interaction of node {} references missing edge from {}",
                                target, source
                            ))
                        })?;
                    if !used.insert(idx) {
                        return Err(HillError::InvalidTopology(format!(
                            "edge from {} appears twice in interaction of node {}",
                            source, target
                        )));
                    }
                    idxs.push(idx);
                }
                interactions[target].push(idxs);
            }
            let in_degree = edges.iter().filter(|e| e.target == target).count();
            if used.len() != in_degree {
                return Err(HillError::InvalidTopology(format!(
                    "interaction of node {} covers {} of {} in-edges",
                    target,
                    used.len(),
                    in_degree
                )));
            }
        }

        Ok(Self { n_nodes, edges, interactions })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Summands of node `i` as lists of edge indices.
    pub fn interaction(&self, node: usize) -> &[Vec<usize>] {
        &self.interactions[node]
    }
}

/// A Hill model: topology plus decay rates and per-edge parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HillModel<F> {
    topology: NetworkTopology,
    gamma: Vec<F>,
    edge_params: Vec<HillEdgeParams<F>>,
    shared_exponent: bool,
}

/// State and exponent derivatives of the vector field at a point.
///
/// `dx2f[i][(j, k)]` is the second state derivative of coordinate `i`;
/// `ddf` and `dxddf` differentiate with respect to the shared Hill exponent
/// (the sum of per-edge exponent derivatives, which coincides with the
/// derivative along an identified exponent).
#[derive(Debug, Clone)]
pub struct Derivatives<F: Real> {
    pub dxf: DMatrix<F>,
    pub dx2f: Vec<DMatrix<F>>,
    pub ddf: DVector<F>,
    pub dxddf: DMatrix<F>,
}

impl<F: Real> HillModel<F> {
    pub fn new(
        topology: NetworkTopology,
        gamma: Vec<F>,
        edge_params: Vec<HillEdgeParams<F>>,
    ) -> Result<Self, HillError> {
        if gamma.len() != topology.n_nodes() {
            return Err(HillError::DimensionMismatch {
                expected: topology.n_nodes(),
                got: gamma.len(),
            });
        }
        if edge_params.len() != topology.n_edges() {
            return Err(HillError::DimensionMismatch {
                expected: topology.n_edges(),
                got: edge_params.len(),
            });
        }
        for g in &gamma {
            if !(*g > F::zero()) {
                return Err(HillError::InvalidParameter(format!(
                    "gamma must be positive, got {}",
                    g.as_f64()
                )));
            }
        }
        for p in &edge_params {
            p.validate()?;
        }
        Ok(Self { topology, gamma, edge_params, shared_exponent: false })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }

    pub fn gamma(&self) -> &[F] {
        &self.gamma
    }

    pub fn edge_params(&self) -> &[HillEdgeParams<F>] {
        &self.edge_params
    }

    pub fn shared_exponent(&self) -> bool {
        self.shared_exponent
    }

    /// Identify all Hill exponents with one scalar; per-edge exponents remain
    /// available by leaving the flag off.
    pub fn with_shared_exponent(mut self, d: F) -> Self {
        self.set_hill_exponent(d);
        self.shared_exponent = true;
        self
    }

    /// Overwrite every edge exponent with `d`.
    pub fn set_hill_exponent(&mut self, d: F) {
        for p in &mut self.edge_params {
            p.hill = d;
        }
    }

    /// Total number of scalar parameters, `N + 4E`.
    pub fn parameter_count(&self) -> usize {
        self.n_nodes() + 4 * self.topology.n_edges()
    }

    /// Free parameters in shared-exponent mode, `N + 3E + 1`.
    pub fn shared_parameter_count(&self) -> usize {
        self.n_nodes() + 3 * self.topology.n_edges() + 1
    }

    /// Flatten to `(gamma, ell, delta, theta, hill)`, each block ordered
    /// lexicographically by (target node, source node).
    pub fn parameter_vector(&self) -> Vec<F> {
        let order = self.edge_order();
        let mut v = Vec::with_capacity(self.parameter_count());
        v.extend_from_slice(&self.gamma);
        for &i in &order {
            v.push(self.edge_params[i].ell);
        }
        for &i in &order {
            v.push(self.edge_params[i].delta);
        }
        for &i in &order {
            v.push(self.edge_params[i].theta);
        }
        for &i in &order {
            v.push(self.edge_params[i].hill);
        }
        v
    }

    /// Inverse of [`Self::parameter_vector`]; keeps the topology.
    pub fn set_parameter_vector(&mut self, v: &[F]) -> Result<(), HillError> {
        if v.len() != self.parameter_count() {
            return Err(HillError::DimensionMismatch {
                expected: self.parameter_count(),
                got: v.len(),
            });
        }
        let n = self.n_nodes();
        let e = self.topology.n_edges();
        let order = self.edge_order();
        for (i, g) in v[..n].iter().enumerate() {
            if !(*g > F::zero()) {
                return Err(HillError::InvalidParameter("gamma must be positive".into()));
            }
            self.gamma[i] = *g;
        }
        for (pos, &i) in order.iter().enumerate() {
            let p = HillEdgeParams::new(
                v[n + pos],
                v[n + e + pos],
                v[n + 2 * e + pos],
                v[n + 3 * e + pos],
            )?;
            self.edge_params[i] = p;
        }
        Ok(())
    }

    /// Shared-exponent flattening `(gamma, ell, delta, theta, d)` of length
    /// `N + 3E + 1`.
    pub fn shared_parameter_vector(&self) -> Vec<F> {
        let order = self.edge_order();
        let mut v = Vec::with_capacity(self.shared_parameter_count());
        v.extend_from_slice(&self.gamma);
        for &i in &order {
            v.push(self.edge_params[i].ell);
        }
        for &i in &order {
            v.push(self.edge_params[i].delta);
        }
        for &i in &order {
            v.push(self.edge_params[i].theta);
        }
        v.push(self.edge_params.first().map(|p| p.hill).unwrap_or_else(F::one));
        v
    }

    pub fn set_shared_parameter_vector(&mut self, v: &[F]) -> Result<(), HillError> {
        if v.len() != self.shared_parameter_count() {
            return Err(HillError::DimensionMismatch {
                expected: self.shared_parameter_count(),
                got: v.len(),
            });
        }
        let n = self.n_nodes();
        let e = self.topology.n_edges();
        let d = v[n + 3 * e];
        let mut full = Vec::with_capacity(self.parameter_count());
        full.extend_from_slice(&v[..n + 3 * e]);
        full.extend(std::iter::repeat(d).take(e));
        self.set_parameter_vector(&full)?;
        self.shared_exponent = true;
        Ok(())
    }

    fn edge_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.topology.n_edges()).collect();
        order.sort_by_key(|&i| {
            let e = &self.topology.edges()[i];
            (e.target, e.source)
        });
        order
    }

    fn check_state(&self, x: &DVector<F>) -> Result<(), HillError> {
        if x.len() != self.n_nodes() {
            return Err(HillError::DimensionMismatch {
                expected: self.n_nodes(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| *v < F::zero()) {
            return Err(HillError::NegativeState);
        }
        Ok(())
    }

    /// `f_i(x) = -gamma_i x_i + p_i(H(x))`.
    pub fn eval_vector_field(&self, x: &DVector<F>) -> Result<DVector<F>, HillError> {
        self.check_state(x)?;
        Ok(self.vector_field(x))
    }

    /// Unchecked vector field evaluation; `x` must be componentwise `>= 0`.
    pub fn vector_field(&self, x: &DVector<F>) -> DVector<F> {
        let n = self.n_nodes();
        let mut f = DVector::zeros(n);
        for i in 0..n {
            let mut prod = F::one();
            for summand in self.topology.interaction(i) {
                let mut s = F::zero();
                for &e in summand {
                    let edge = &self.topology.edges()[e];
                    s += response_derivatives(x[edge.source], edge.sign, &self.edge_params[e])
                        .value;
                }
                prod *= s;
            }
            f[i] = -self.gamma[i] * x[i] + prod;
        }
        f
    }

    /// First state derivative `Dxf`.
    pub fn jacobian(&self, x: &DVector<F>) -> DMatrix<F> {
        let n = self.n_nodes();
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] -= self.gamma[i];
            let summands = self.node_summand_values(i, x);
            for (m, summand) in self.topology.interaction(i).iter().enumerate() {
                let outer = partial_product(&summands, &[m]);
                for &e in summand {
                    let edge = &self.topology.edges()[e];
                    let r = response_derivatives(x[edge.source], edge.sign, &self.edge_params[e]);
                    jac[(i, edge.source)] += outer * r.dx;
                }
            }
        }
        jac
    }

    /// All derivatives used by the saddle-node machinery.
    pub fn derivatives(&self, x: &DVector<F>) -> Result<Derivatives<F>, HillError> {
        self.check_state(x)?;
        let n = self.n_nodes();
        let mut dxf = DMatrix::zeros(n, n);
        let mut dx2f = vec![DMatrix::zeros(n, n); n];
        let mut ddf = DVector::zeros(n);
        let mut dxddf = DMatrix::zeros(n, n);

        for i in 0..n {
            dxf[(i, i)] -= self.gamma[i];
            let interaction = self.topology.interaction(i);
            let summands = self.node_summand_values(i, x);
            // Per-summand response data: (edge index, summand, derivatives).
            let mut edge_data: Vec<(usize, usize, ResponseDerivatives<F>)> = Vec::new();
            let mut summand_dd = vec![F::zero(); interaction.len()];
            for (m, summand) in interaction.iter().enumerate() {
                for &e in summand {
                    let edge = &self.topology.edges()[e];
                    let r = response_derivatives(x[edge.source], edge.sign, &self.edge_params[e]);
                    summand_dd[m] += r.dd;
                    edge_data.push((e, m, r));
                }
            }

            for m in 0..interaction.len() {
                ddf[i] += partial_product(&summands, &[m]) * summand_dd[m];
            }

            for &(e, m, r) in &edge_data {
                let j = self.topology.edges()[e].source;
                let outer = partial_product(&summands, &[m]);
                dxf[(i, j)] += outer * r.dx;
                dx2f[i][(j, j)] += outer * r.dxx;

                let mut outer_dd = F::zero();
                for m2 in 0..interaction.len() {
                    if m2 != m {
                        outer_dd += partial_product(&summands, &[m, m2]) * summand_dd[m2];
                    }
                }
                dxddf[(i, j)] += outer_dd * r.dx + outer * r.dx_dd;

                for &(e2, m2, r2) in &edge_data {
                    if e2 == e || m2 == m {
                        continue;
                    }
                    let k = self.topology.edges()[e2].source;
                    dx2f[i][(j, k)] += partial_product(&summands, &[m, m2]) * r.dx * r2.dx;
                }
            }
        }

        Ok(Derivatives { dxf, dx2f, ddf, dxddf })
    }

    fn node_summand_values(&self, i: usize, x: &DVector<F>) -> Vec<F> {
        self.topology
            .interaction(i)
            .iter()
            .map(|summand| {
                let mut s = F::zero();
                for &e in summand {
                    let edge = &self.topology.edges()[e];
                    s += response_derivatives(x[edge.source], edge.sign, &self.edge_params[e])
                        .value;
                }
                s
            })
            .collect()
    }
}

/// Product of summand values excluding the listed indices.
fn partial_product<F: Real>(summands: &[F], exclude: &[usize]) -> F {
    let mut p = F::one();
    for (m, s) in summands.iter().enumerate() {
        if !exclude.contains(&m) {
            p *= *s;
        }
    }
    p
}

/// Reduced Toggle Switch parameters: `gamma_1 = theta_21 = theta_12 = 1` and
/// one shared exponent `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedToggleParams<F> {
    pub ell12: F,
    pub delta12: F,
    pub gamma2: F,
    pub ell21: F,
    pub delta21: F,
    pub hill: F,
}

impl<F: Real> ReducedToggleParams<F> {
    pub fn new(ell12: F, delta12: F, gamma2: F, ell21: F, delta21: F, hill: F) -> Self {
        Self { ell12, delta12, gamma2, ell21, delta21, hill }
    }

    /// The exponent-free coordinates `(ell12, delta12, gamma2, ell21, delta21)`.
    pub fn reduced_coords(&self) -> [F; 5] {
        [self.ell12, self.delta12, self.gamma2, self.ell21, self.delta21]
    }

    pub fn from_coords(coords: &[F], hill: F) -> Result<Self, HillError> {
        if coords.len() != 5 {
            return Err(HillError::DimensionMismatch { expected: 5, got: coords.len() });
        }
        Ok(Self::new(coords[0], coords[1], coords[2], coords[3], coords[4], hill))
    }
}

/// Two mutually repressing nodes; edge `1 -> 0` carries the `(1,2)` block of
/// parameters and `0 -> 1` the `(2,1)` block.
pub fn builtin_toggle_switch<F: Real>() -> HillModel<F> {
    let topology = NetworkTopology::new(
        2,
        vec![
            Edge { source: 1, target: 0, sign: EdgeSign::Repressing },
            Edge { source: 0, target: 1, sign: EdgeSign::Repressing },
        ],
        vec![vec![vec![1]], vec![vec![0]]],
    )
    .expect("toggle topology is valid");
    let one = F::one();
    let p = HillEdgeParams { ell: one, delta: one, theta: one, hill: one };
    HillModel::new(topology, vec![one, one], vec![p, p]).expect("toggle defaults are valid")
}

/// Toggle Switch constrained to the reduced parameter space.
pub fn builtin_reduced_toggle<F: Real>(
    params: &ReducedToggleParams<F>,
) -> Result<HillModel<F>, HillError> {
    let mut model = builtin_toggle_switch::<F>();
    let one = F::one();
    model.gamma = vec![one, params.gamma2];
    model.edge_params = vec![
        HillEdgeParams::new(params.ell12, params.delta12, one, params.hill)?,
        HillEdgeParams::new(params.ell21, params.delta21, one, params.hill)?,
    ];
    model.shared_exponent = true;
    if !(params.gamma2 > F::zero()) {
        return Err(HillError::InvalidParameter("gamma2 must be positive".into()));
    }
    Ok(model)
}

/// Six-node epithelial-mesenchymal transition network: 12 edges, each node's
/// interaction a product of single-edge summands.
pub fn builtin_emt<F: Real>() -> HillModel<F> {
    use EdgeSign::{Activating, Repressing};
    let edges = vec![
        Edge { source: 1, target: 0, sign: Repressing },
        Edge { source: 3, target: 0, sign: Repressing },
        Edge { source: 2, target: 1, sign: Repressing },
        Edge { source: 4, target: 1, sign: Repressing },
        Edge { source: 0, target: 2, sign: Activating },
        Edge { source: 5, target: 2, sign: Repressing },
        Edge { source: 4, target: 3, sign: Repressing },
        Edge { source: 1, target: 4, sign: Repressing },
        Edge { source: 2, target: 4, sign: Activating },
        Edge { source: 3, target: 4, sign: Repressing },
        Edge { source: 2, target: 5, sign: Repressing },
        Edge { source: 4, target: 5, sign: Repressing },
    ];
    let interactions = vec![
        vec![vec![1], vec![3]],
        vec![vec![2], vec![4]],
        vec![vec![0], vec![5]],
        vec![vec![4]],
        vec![vec![1], vec![2], vec![3]],
        vec![vec![2], vec![4]],
    ];
    let topology = NetworkTopology::new(6, edges, interactions).expect("EMT topology is valid");
    let one = F::one();
    let p = HillEdgeParams { ell: one, delta: one, theta: one, hill: one };
    HillModel::new(topology, vec![one; 6], vec![p; 12]).expect("EMT defaults are valid")
}

// --- JSON schema -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ModelJson {
    nodes: usize,
    edges: Vec<Edge>,
    /// Per node: summands listing source-node indices.
    interactions: Vec<Vec<Vec<usize>>>,
    params: ModelParamsJson,
    #[serde(default)]
    shared_exponent: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelParamsJson {
    gamma: Vec<f64>,
    edges: Vec<EdgeParamsJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeParamsJson {
    ell: f64,
    delta: f64,
    theta: f64,
    hill: f64,
}

/// Parse a model from the JSON schema
/// `{nodes, edges:[{source,target,sign}], interactions, params:{gamma[], edges:[{ell,delta,theta,hill}]}}`.
pub fn model_from_json(text: &str) -> Result<HillModel<f64>, HillError> {
    let raw: ModelJson =
        serde_json::from_str(text).map_err(|e| HillError::Schema(e.to_string()))?;
    let topology = NetworkTopology::new(raw.nodes, raw.edges, raw.interactions)?;
    if raw.params.edges.len() != topology.n_edges() {
        return Err(HillError::Schema(format!(
            "expected {} edge parameter blocks, got {}",
            topology.n_edges(),
            raw.params.edges.len()
        )));
    }
    let edge_params = raw
        .params
        .edges
        .iter()
        .map(|p| HillEdgeParams::new(p.ell, p.delta, p.theta, p.hill))
        .collect::<Result<Vec<_>, _>>()?;
    let mut model = HillModel::new(topology, raw.params.gamma, edge_params)?;
    if raw.shared_exponent {
        let d = first_d(&model);
        model = model.with_shared_exponent(d);
    }
    Ok(model)
}

fn first_d(model: &HillModel<f64>) -> f64 {
    model.edge_params.first().map(|p| p.hill).unwrap_or(1.0)
}

/// Serialize a model to the JSON schema.
pub fn model_to_json(model: &HillModel<f64>) -> String {
    let interactions = (0..model.n_nodes())
        .map(|i| {
            model
                .topology
                .interaction(i)
                .iter()
                .map(|summand| {
                    summand.iter().map(|&e| model.topology.edges()[e].source).collect()
                })
                .collect()
        })
        .collect();
    let raw = ModelJson {
        nodes: model.n_nodes(),
        edges: model.topology.edges().to_vec(),
        interactions,
        params: ModelParamsJson {
            gamma: model.gamma.clone(),
            edges: model
                .edge_params
                .iter()
                .map(|p| EdgeParamsJson { ell: p.ell, delta: p.delta, theta: p.theta, hill: p.hill })
                .collect(),
        },
        shared_exponent: model.shared_exponent,
    };
    serde_json::to_string_pretty(&raw).expect("model serializes")
}
