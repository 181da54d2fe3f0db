//! Semi-algebraic region partitions over the positive orthant.
//!
//! A partition is an ordered list of open regions, each cut out by strict
//! polynomial inequalities over named variables. Constraints are stored as
//! expression trees (a small `+`, `-`, `*` arithmetic DSL parsed from JSON)
//! so user-supplied partitions can be loaded from files. The built-in Toggle
//! Switch partition carries the nine reduced-inequality regions and the
//! twelve parameter-graph edges.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RegionsError {
    #[error("point must be strictly positive")]
    NonPositivePoint,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point satisfies regions {0} and {1}; partition is not disjoint")]
    Overlap(u32, u32),
    #[error("expression parse error: {0}")]
    Parse(String),
    #[error("partition schema error: {0}")]
    Schema(String),
    #[error("stable counts missing for region {0}")]
    MissingCount(u32),
}

/// Arithmetic expression over named variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn eval<F: Real>(&self, point: &[F]) -> F {
        match self {
            Expr::Const(c) => F::lit(*c),
            Expr::Var(i) => point[*i],
            Expr::Add(a, b) => a.eval(point) + b.eval(point),
            Expr::Sub(a, b) => a.eval(point) - b.eval(point),
            Expr::Mul(a, b) => a.eval(point) * b.eval(point),
            Expr::Neg(a) => -a.eval(point),
        }
    }

    fn to_text(&self, variables: &[String]) -> String {
        match self {
            Expr::Const(c) => format!("{}", c),
            Expr::Var(i) => variables[*i].clone(),
            Expr::Add(a, b) => format!("({} + {})", a.to_text(variables), b.to_text(variables)),
            Expr::Sub(a, b) => format!("({} - {})", a.to_text(variables), b.to_text(variables)),
            Expr::Mul(a, b) => format!("({} * {})", a.to_text(variables), b.to_text(variables)),
            Expr::Neg(a) => format!("(-{})", a.to_text(variables)),
        }
    }
}

/// Parse `+`, `-`, `*`, parentheses, numbers and variable names.
pub fn parse_expr(text: &str, variables: &[String]) -> Result<Expr, RegionsError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, variables };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(RegionsError::Parse(format!("trailing input in '{}'", text)));
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Token>, RegionsError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| RegionsError::Parse(format!("bad number '{}'", s)))?;
                tokens.push(Token::Num(v));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(RegionsError::Parse(format!("unexpected character '{}'", c))),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    variables: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Expr, RegionsError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, RegionsError> {
        let mut lhs = self.factor()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, RegionsError> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                let idx = self
                    .variables
                    .iter()
                    .position(|v| *v == name)
                    .ok_or_else(|| RegionsError::Parse(format!("unknown variable '{}'", name)))?;
                Ok(Expr::Var(idx))
            }
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !matches!(self.peek(), Some(Token::RParen)) {
                    return Err(RegionsError::Parse("missing ')'".into()));
                }
                self.pos += 1;
                Ok(inner)
            }
            other => Err(RegionsError::Parse(format!("unexpected token {:?}", other))),
        }
    }
}

/// Strict inequality relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

/// One strict polynomial inequality `lhs REL rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: Expr,
}

/// How one constraint sees a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConstraintState {
    Holds,
    Fails,
    Equal,
}

impl Constraint {
    fn state<F: Real>(&self, point: &[F]) -> ConstraintState {
        let l = self.lhs.eval(point);
        let r = self.rhs.eval(point);
        if l == r {
            return ConstraintState::Equal;
        }
        let holds = match self.rel {
            Rel::Lt => l < r,
            Rel::Gt => l > r,
        };
        if holds {
            ConstraintState::Holds
        } else {
            ConstraintState::Fails
        }
    }
}

/// Open region cut out by strict inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiAlgebraicRegion {
    pub id: u32,
    pub constraints: Vec<Constraint>,
    /// A point known to lie in the region; used to check non-emptiness.
    pub witness: Option<Vec<f64>>,
}

/// Where a point landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Region(u32),
    /// Some constraint held with exact equality: the point sits on the
    /// measure-zero skeleton between regions.
    Boundary,
    /// No region matched and no equality was hit; only possible when the
    /// regions do not tile the orthant.
    Unmatched,
}

impl Classification {
    pub fn label(&self) -> String {
        match self {
            Classification::Region(id) => id.to_string(),
            Classification::Boundary => "boundary".into(),
            Classification::Unmatched => "unmatched".into(),
        }
    }
}

/// Ordered list of disjoint open regions with a region-graph adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    dimension: usize,
    variables: Vec<String>,
    regions: Vec<SemiAlgebraicRegion>,
    adjacency: Vec<(u32, u32)>,
}

impl RegionPartition {
    pub fn new(
        dimension: usize,
        variables: Vec<String>,
        regions: Vec<SemiAlgebraicRegion>,
        adjacency: Vec<(u32, u32)>,
    ) -> Result<Self, RegionsError> {
        if variables.len() != dimension {
            return Err(RegionsError::Schema(format!(
                "{} variable names for dimension {}",
                variables.len(),
                dimension
            )));
        }
        let partition = Self {
            dimension,
            variables,
            regions,
            adjacency: adjacency.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect(),
        };
        for region in &partition.regions {
            if let Some(w) = &region.witness {
                let point: Vec<f64> = w.clone();
                match partition.classify(&point)? {
                    Classification::Region(id) if id == region.id => {}
                    other => {
                        return Err(RegionsError::Schema(format!(
                            "witness of region {} classifies as {:?}",
                            region.id, other
                        )))
                    }
                }
            }
        }
        Ok(partition)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn regions(&self) -> &[SemiAlgebraicRegion] {
        &self.regions
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// Region-graph edges, stored with the smaller id first.
    pub fn adjacency(&self) -> &[(u32, u32)] {
        &self.adjacency
    }

    pub fn region_ids(&self) -> Vec<u32> {
        self.regions.iter().map(|r| r.id).collect()
    }

    /// Classify a strictly positive point into the unique region whose
    /// constraints all hold, or `Boundary` on exact equality.
    pub fn classify<F: Real>(&self, point: &[F]) -> Result<Classification, RegionsError> {
        if point.len() != self.dimension {
            return Err(RegionsError::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        if point.iter().any(|v| !(*v > F::zero())) {
            return Err(RegionsError::NonPositivePoint);
        }
        let mut matched: Option<u32> = None;
        let mut equality_hit = false;
        for region in &self.regions {
            let mut all_hold = true;
            for c in &region.constraints {
                match c.state(point) {
                    ConstraintState::Holds => {}
                    ConstraintState::Fails => {
                        all_hold = false;
                        break;
                    }
                    ConstraintState::Equal => {
                        equality_hit = true;
                        all_hold = false;
                        break;
                    }
                }
            }
            if all_hold {
                if let Some(first) = matched {
                    return Err(RegionsError::Overlap(first, region.id));
                }
                matched = Some(region.id);
            }
        }
        Ok(match (matched, equality_hit) {
            (Some(id), _) => Classification::Region(id),
            (None, true) => Classification::Boundary,
            (None, false) => Classification::Unmatched,
        })
    }

    /// Adjacent region pairs whose stable-equilibrium counts differ by
    /// exactly one.
    pub fn saddle_node_edges(
        &self,
        stable_counts: &HashMap<u32, u32>,
    ) -> Result<Vec<(u32, u32)>, RegionsError> {
        for region in &self.regions {
            if !stable_counts.contains_key(&region.id) {
                return Err(RegionsError::MissingCount(region.id));
            }
        }
        Ok(self
            .adjacency
            .iter()
            .copied()
            .filter(|(a, b)| {
                let ca = stable_counts[a] as i64;
                let cb = stable_counts[b] as i64;
                (ca - cb).abs() == 1
            })
            .collect())
    }
}

// --- Built-in Toggle Switch partitions --------------------------------------

const TOGGLE_ADJACENCY: [(u32, u32); 12] = [
    (1, 2),
    (1, 4),
    (2, 3),
    (2, 5),
    (3, 6),
    (4, 5),
    (4, 7),
    (5, 6),
    (5, 8),
    (6, 9),
    (7, 8),
    (8, 9),
];

/// Witness points for the nine reduced regions, region 1 first.
pub const TOGGLE_WITNESSES: [[f64; 5]; 9] = [
    [2.0, 1.0, 1.0, 0.1, 0.2],
    [2.0, 1.0, 1.0, 0.5, 1.0],
    [2.0, 1.0, 1.0, 2.0, 1.0],
    [0.5, 1.0, 2.0, 0.1, 0.2],
    [0.5, 1.0, 1.0, 0.5, 1.0],
    [0.5, 1.0, 1.0, 2.0, 1.0],
    [0.3, 0.5, 2.0, 0.1, 0.2],
    [0.3, 0.5, 1.0, 0.5, 1.0],
    [0.3, 0.5, 1.0, 2.0, 1.0],
];

fn toggle_rows() -> [&'static [&'static str]; 9] {
    // Reduced inequalities, one row per region; `x` comparisons are spelled
    // as constraint strings "lhs REL rhs".
    [
        &["1 < ell12", "ell21 + delta21 < gamma2"],
        &["1 < ell12", "ell21 < gamma2", "gamma2 < ell21 + delta21"],
        &["1 < ell12", "gamma2 < ell21"],
        &["ell12 < 1", "1 < ell12 + delta12", "ell21 + delta21 < gamma2"],
        &["ell12 < 1", "1 < ell12 + delta12", "ell21 < gamma2", "gamma2 < ell21 + delta21"],
        &["ell12 < 1", "1 < ell12 + delta12", "gamma2 < ell21"],
        &["ell12 + delta12 < 1", "ell21 + delta21 < gamma2"],
        &["ell12 + delta12 < 1", "ell21 < gamma2", "gamma2 < ell21 + delta21"],
        &["ell12 + delta12 < 1", "gamma2 < ell21"],
    ]
}

fn parse_constraint(text: &str, variables: &[String]) -> Result<Constraint, RegionsError> {
    let (lhs, rel, rhs) = if let Some((l, r)) = text.split_once('<') {
        (l, Rel::Lt, r)
    } else if let Some((l, r)) = text.split_once('>') {
        (l, Rel::Gt, r)
    } else {
        return Err(RegionsError::Parse(format!("no relation in '{}'", text)));
    };
    Ok(Constraint {
        lhs: parse_expr(lhs, variables)?,
        rel,
        rhs: parse_expr(rhs, variables)?,
    })
}

/// The nine-region partition of the reduced Toggle Switch parameter space
/// `(ell12, delta12, gamma2, ell21, delta21)` with its parameter-graph edges.
pub fn toggle_partition() -> RegionPartition {
    let variables: Vec<String> =
        ["ell12", "delta12", "gamma2", "ell21", "delta21"].iter().map(|s| s.to_string()).collect();
    let regions = toggle_rows()
        .iter()
        .enumerate()
        .map(|(i, row)| SemiAlgebraicRegion {
            id: i as u32 + 1,
            constraints: row
                .iter()
                .map(|c| parse_constraint(c, &variables).expect("builtin constraint parses"))
                .collect(),
            witness: Some(TOGGLE_WITNESSES[i].to_vec()),
        })
        .collect();
    RegionPartition::new(5, variables, regions, TOGGLE_ADJACENCY.to_vec())
        .expect("builtin toggle partition is valid")
}

/// The same nine regions in the unreduced eight-dimensional coordinates
/// `(gamma1, ell12, delta12, theta12, gamma2, ell21, delta21, theta21)`.
pub fn toggle_partition_unreduced() -> RegionPartition {
    let variables: Vec<String> =
        ["gamma1", "ell12", "delta12", "theta12", "gamma2", "ell21", "delta21", "theta21"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let rows: [&[&str]; 9] = [
        &["gamma1 * theta21 < ell12", "ell21 + delta21 < gamma2 * theta12"],
        &[
            "gamma1 * theta21 < ell12",
            "ell21 < gamma2 * theta12",
            "gamma2 * theta12 < ell21 + delta21",
        ],
        &["gamma1 * theta21 < ell12", "gamma2 * theta12 < ell21"],
        &[
            "ell12 < gamma1 * theta21",
            "gamma1 * theta21 < ell12 + delta12",
            "ell21 + delta21 < gamma2 * theta12",
        ],
        &[
            "ell12 < gamma1 * theta21",
            "gamma1 * theta21 < ell12 + delta12",
            "ell21 < gamma2 * theta12",
            "gamma2 * theta12 < ell21 + delta21",
        ],
        &[
            "ell12 < gamma1 * theta21",
            "gamma1 * theta21 < ell12 + delta12",
            "gamma2 * theta12 < ell21",
        ],
        &["ell12 + delta12 < gamma1 * theta21", "ell21 + delta21 < gamma2 * theta12"],
        &[
            "ell12 + delta12 < gamma1 * theta21",
            "ell21 < gamma2 * theta12",
            "gamma2 * theta12 < ell21 + delta21",
        ],
        &["ell12 + delta12 < gamma1 * theta21", "gamma2 * theta12 < ell21"],
    ];
    let regions = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            // Unreduced witness: embed the reduced witness at gamma1 = theta = 1.
            let w = TOGGLE_WITNESSES[i];
            SemiAlgebraicRegion {
                id: i as u32 + 1,
                constraints: row
                    .iter()
                    .map(|c| parse_constraint(c, &variables).expect("builtin constraint parses"))
                    .collect(),
                witness: Some(vec![1.0, w[0], w[1], 1.0, w[2], w[3], w[4], 1.0]),
            }
        })
        .collect();
    RegionPartition::new(8, variables, regions, TOGGLE_ADJACENCY.to_vec())
        .expect("builtin unreduced toggle partition is valid")
}

// --- JSON schema -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PartitionJson {
    dim: usize,
    variables: Vec<String>,
    regions: Vec<RegionJson>,
    adjacency: Vec<[u32; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionJson {
    id: u32,
    constraints: Vec<ConstraintJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConstraintJson {
    lhs: String,
    rel: Rel,
    rhs: String,
}

/// Parse a partition from the JSON schema
/// `{dim, variables, regions:[{id, constraints:[{lhs,rel,rhs}]}], adjacency:[[i,j]]}`.
pub fn partition_from_json(text: &str) -> Result<RegionPartition, RegionsError> {
    let raw: PartitionJson =
        serde_json::from_str(text).map_err(|e| RegionsError::Schema(e.to_string()))?;
    let regions = raw
        .regions
        .into_iter()
        .map(|r| {
            Ok(SemiAlgebraicRegion {
                id: r.id,
                constraints: r
                    .constraints
                    .iter()
                    .map(|c| {
                        Ok(Constraint {
                            lhs: parse_expr(&c.lhs, &raw.variables)?,
                            rel: c.rel,
                            rhs: parse_expr(&c.rhs, &raw.variables)?,
                        })
                    })
                    .collect::<Result<Vec<_>, RegionsError>>()?,
                witness: r.witness,
            })
        })
        .collect::<Result<Vec<_>, RegionsError>>()?;
    RegionPartition::new(
        raw.dim,
        raw.variables,
        regions,
        raw.adjacency.into_iter().map(|[a, b]| (a, b)).collect(),
    )
}

/// Serialize a partition back into the JSON schema.
pub fn partition_to_json(partition: &RegionPartition) -> String {
    let raw = PartitionJson {
        dim: partition.dimension,
        variables: partition.variables.clone(),
        regions: partition
            .regions
            .iter()
            .map(|r| RegionJson {
                id: r.id,
                constraints: r
                    .constraints
                    .iter()
                    .map(|c| ConstraintJson {
                        lhs: c.lhs.to_text(&partition.variables),
                        rel: c.rel,
                        rhs: c.rhs.to_text(&partition.variables),
                    })
                    .collect(),
                witness: r.witness.clone(),
            })
            .collect(),
        adjacency: partition.adjacency.iter().map(|&(a, b)| [a, b]).collect(),
    };
    serde_json::to_string_pretty(&raw).expect("partition serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_arithmetic() {
        let vars: Vec<String> = vec!["a".into(), "b".into()];
        let e = parse_expr("a + 2 * (b - 1)", &vars).unwrap();
        assert_eq!(e.eval(&[3.0, 5.0]), 11.0);
        let e = parse_expr("-a * b", &vars).unwrap();
        assert_eq!(e.eval(&[3.0, 5.0]), -15.0);
        assert!(parse_expr("a + unknown", &vars).is_err());
        assert!(parse_expr("a +", &vars).is_err());
        assert!(parse_expr("(a", &vars).is_err());
    }

    #[test]
    fn classifies_spec_points() {
        let p = toggle_partition();
        assert_eq!(
            p.classify(&[0.5, 1.0, 1.0, 0.5, 1.0]).unwrap(),
            Classification::Region(5)
        );
        assert_eq!(
            p.classify(&[2.0, 1.0, 1.0, 0.1, 0.2]).unwrap(),
            Classification::Region(1)
        );
        // ell12 exactly on the region-boundary surface.
        assert_eq!(
            p.classify(&[1.0, 1.0, 1.0, 0.5, 1.0]).unwrap(),
            Classification::Boundary
        );
    }

    #[test]
    fn rejects_bad_points() {
        let p = toggle_partition();
        assert!(matches!(
            p.classify(&[0.5, 1.0, 1.0, 0.5]),
            Err(RegionsError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            p.classify(&[0.5, -1.0, 1.0, 0.5, 1.0]),
            Err(RegionsError::NonPositivePoint)
        ));
        assert!(matches!(
            p.classify(&[0.5, 0.0, 1.0, 0.5, 1.0]),
            Err(RegionsError::NonPositivePoint)
        ));
    }

    #[test]
    fn region5_constraints_match_the_table_row() {
        let p = toggle_partition();
        let region5 = &p.regions()[4];
        assert_eq!(region5.id, 5);
        assert_eq!(region5.constraints.len(), 4);
        // ell12 < 1, 1 < ell12+delta12, ell21 < gamma2, gamma2 < ell21+delta21
        let inside = [0.5, 1.0, 1.0, 0.5, 1.0];
        assert!(region5
            .constraints
            .iter()
            .all(|c| matches!(c.state(&inside), ConstraintState::Holds)));
        let outside = [2.0, 1.0, 1.0, 0.5, 1.0];
        assert!(region5
            .constraints
            .iter()
            .any(|c| matches!(c.state(&outside), ConstraintState::Fails)));
    }

    #[test]
    fn adjacency_matches_the_parameter_graph() {
        let p = toggle_partition();
        assert_eq!(p.adjacency().len(), 12);
        for pair in [(2, 5), (4, 5), (5, 6), (5, 8)] {
            assert!(p.adjacency().contains(&pair), "missing edge {:?}", pair);
        }
        assert!(!p.adjacency().contains(&(1, 5)));
    }

    #[test]
    fn every_witness_lands_in_its_region() {
        for partition in [toggle_partition(), toggle_partition_unreduced()] {
            for region in partition.regions() {
                let w = region.witness.as_ref().unwrap();
                assert_eq!(
                    partition.classify(w).unwrap(),
                    Classification::Region(region.id)
                );
            }
        }
    }

    #[test]
    fn unreduced_partition_agrees_with_reduced_on_embedded_points() {
        let reduced = toggle_partition();
        let full = toggle_partition_unreduced();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let xi: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..3.0)).collect();
            let embedded = vec![1.0, xi[0], xi[1], 1.0, xi[2], xi[3], xi[4], 1.0];
            assert_eq!(
                reduced.classify(&xi).unwrap(),
                full.classify(&embedded).unwrap()
            );
        }
    }

    #[test]
    fn random_points_hit_exactly_one_region() {
        let p = toggle_partition();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut boundary = 0usize;
        for _ in 0..100_000 {
            let point: Vec<f64> = (0..5).map(|_| rng.random_range(1e-3..10.0)).collect();
            // classify errors on overlap, so Ok means at most one region.
            match p.classify(&point).unwrap() {
                Classification::Region(_) => {}
                Classification::Boundary => boundary += 1,
                Classification::Unmatched => panic!("toggle partition tiles the orthant"),
            }
        }
        assert_eq!(boundary, 0);
    }

    #[test]
    fn saddle_edges_need_count_gap_of_one() {
        let p = toggle_partition();
        let mut counts: HashMap<u32, u32> = (1..=9).map(|i| (i, 1)).collect();
        counts.insert(5, 2);
        let mut edges = p.saddle_node_edges(&counts).unwrap();
        edges.sort();
        assert_eq!(edges, vec![(2, 5), (4, 5), (5, 6), (5, 8)]);

        let uniform: HashMap<u32, u32> = (1..=9).map(|i| (i, 1)).collect();
        assert!(p.saddle_node_edges(&uniform).unwrap().is_empty());

        let mut gap_two: HashMap<u32, u32> = (1..=9).map(|i| (i, 1)).collect();
        gap_two.insert(5, 3);
        assert!(p.saddle_node_edges(&gap_two).unwrap().is_empty());

        let missing: HashMap<u32, u32> = (1..=8).map(|i| (i, 1)).collect();
        assert!(matches!(
            p.saddle_node_edges(&missing),
            Err(RegionsError::MissingCount(9))
        ));
    }

    #[test]
    fn overlap_is_detected() {
        let vars: Vec<String> = vec!["x".into()];
        let mk = |id: u32, text: &str| SemiAlgebraicRegion {
            id,
            constraints: vec![parse_constraint(text, &vars).unwrap()],
            witness: None,
        };
        let p = RegionPartition::new(
            1,
            vars.clone(),
            vec![mk(1, "x < 2"), mk(2, "x < 3")],
            vec![],
        )
        .unwrap();
        assert!(matches!(p.classify(&[1.0]), Err(RegionsError::Overlap(1, 2))));
        // Outside both: unmatched, not boundary.
        assert_eq!(p.classify(&[5.0]).unwrap(), Classification::Unmatched);
    }

    #[test]
    fn json_round_trip() {
        let p = toggle_partition();
        let text = partition_to_json(&p);
        let parsed = partition_from_json(&text).unwrap();
        assert_eq!(parsed.n_regions(), 9);
        assert_eq!(parsed.adjacency(), p.adjacency());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let point: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..4.0)).collect();
            assert_eq!(parsed.classify(&point).unwrap(), p.classify(&point).unwrap());
        }
        assert!(partition_from_json("{\"dim\": 2}").is_err());
        // A witness that classifies elsewhere must be rejected.
        let bad = text.replace("[\n        2.0,\n        1.0,\n        1.0,\n        0.1,\n        0.2\n      ]", "[\n        0.5,\n        1.0,\n        1.0,\n        0.1,\n        0.2\n      ]");
        assert!(partition_from_json(&bad).is_err());
    }
}
