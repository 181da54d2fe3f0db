//! Contingency matrices, the chi-square independence test, and the 2D
//! projection used for heat-map export of saddle results.
//!
//! P-values come from the upper tail of the chi-square(1) distribution via
//! the regularized incomplete gamma function, evaluated in log space so
//! statistics far beyond double underflow still report a finite `log10(p)`.

use serde::Serialize;
use thiserror::Error;

use crate::hill::ReducedToggleParams;
use crate::saddle::{OutcomeCategory, SaddleOutcome};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("chi-square test needs positive row and column sums")]
    ZeroMarginal,
    #[error("projection bound too small: a = {a} exceeds abar = {abar}")]
    ProjectionBound { a: f64, abar: f64 },
}

/// 2x2 counts: rows are the region labels A and B, columns are
/// saddle / no-saddle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContingencyMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn row_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[0][1], self.counts[1][0] + self.counts[1][1]]
    }

    pub fn col_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[1][0], self.counts[0][1] + self.counts[1][1]]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Region label of a sampled parameter in the dichotomy experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    A,
    B,
}

/// Tally outcomes into the 2x2 matrix. Parameters with at least one
/// verified saddle land in the saddle column, parameters with none and no
/// bad candidates in the other; bad-candidate-only outcomes are numerical
/// artifacts and are excluded (returned separately).
pub fn build_contingency<F: Real>(
    outcomes: &[(RegionLabel, &SaddleOutcome<F>)],
) -> (ContingencyMatrix, u64) {
    let mut counts = [[0u64; 2]; 2];
    let mut excluded = 0;
    for (label, outcome) in outcomes {
        let row = match label {
            RegionLabel::A => 0,
            RegionLabel::B => 1,
        };
        if !outcome.saddles.is_empty() {
            counts[row][0] += 1;
        } else if outcome.bad_candidates.is_empty() {
            counts[row][1] += 1;
        } else {
            excluded += 1;
        }
    }
    (ContingencyMatrix::new(counts), excluded)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    /// Upper-tail probability; underflows to zero for extreme statistics.
    pub p: f64,
    /// Finite even when `p` underflows.
    pub log10_p: f64,
}

/// Pearson chi-square independence test on a 2x2 table with one degree of
/// freedom; `yates` applies the continuity correction.
pub fn chi_square_test(
    m: &ContingencyMatrix,
    yates: bool,
) -> Result<ChiSquareResult, StatsError> {
    let rows = m.row_sums();
    let cols = m.col_sums();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::ZeroMarginal);
    }
    let total = m.total() as f64;
    let mut chi2 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let expected = rows[r] as f64 * cols[c] as f64 / total;
            let mut dev = (m.counts[r][c] as f64 - expected).abs();
            if yates {
                dev = (dev - 0.5).max(0.0);
            }
            chi2 += dev * dev / expected;
        }
    }
    let ln_p = ln_chi2_sf_1dof(chi2);
    Ok(ChiSquareResult { chi2, p: ln_p.exp(), log10_p: ln_p / std::f64::consts::LN_10 })
}

/// `ln P(X > chi2)` for `X ~ chi-square(1)`, i.e. the log of the regularized
/// upper incomplete gamma `Q(1/2, chi2/2)`.
pub fn ln_chi2_sf_1dof(chi2: f64) -> f64 {
    ln_gamma_q_half(chi2 / 2.0)
}

const LN_GAMMA_HALF: f64 = 0.5723649429247001; // ln(sqrt(pi))

/// `ln Q(1/2, x)` with the standard series / continued-fraction split.
fn ln_gamma_q_half(x: f64) -> f64 {
    let a = 0.5;
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series for P(a, x), then Q = 1 - P.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= x / (a + n);
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (a * x.ln() - x - LN_GAMMA_HALF).exp() * sum;
        return (1.0 - p).ln();
    }
    // Lentz continued fraction for Q(a, x); the prefactor stays in logs.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    a * x.ln() - x - LN_GAMMA_HALF + h.ln()
}

/// `(a1, b1, a2, b2) = (ell12, ell12 + delta12, ell21/gamma2,
/// (ell21 + delta21)/gamma2)`: the coordinates in which the nine regions
/// become products of intervals.
pub fn project_psi<F: Real>(params: &ReducedToggleParams<F>) -> (F, F, F, F) {
    let a1 = params.ell12;
    let b1 = params.ell12 + params.delta12;
    let a2 = params.ell21 / params.gamma2;
    let b2 = (params.ell21 + params.delta21) / params.gamma2;
    (a1, b1, a2, b2)
}

/// Piecewise projection of `(a, b)` coordinates into `[0, 3]^2`; each region
/// lands in its own unit square with boundaries on the integer grid lines.
pub fn project_g<F: Real>(
    a1: F,
    b1: F,
    a2: F,
    b2: F,
    abar1: F,
    abar2: F,
) -> Result<(F, F), StatsError> {
    let leg = |a: F, b: F, abar: F| -> Result<F, StatsError> {
        if a > abar {
            return Err(StatsError::ProjectionBound { a: a.as_f64(), abar: abar.as_f64() });
        }
        let one = F::one();
        Ok(if b <= one {
            b
        } else if a < one {
            one + (one - a) / (b - a)
        } else {
            F::lit(2.0) + (a - one) / (abar - one)
        })
    };
    Ok((leg(a2, b2, abar2)?, leg(a1, b1, abar1)?))
}

/// One heat-map row.
#[derive(Debug, Clone, Serialize)]
pub struct HeatmapRow {
    pub g1: f64,
    pub g2: f64,
    pub d_min: Option<f64>,
    pub category: OutcomeCategory,
}

/// Project every parameter and attach the smallest verified exponent and the
/// outcome category. Bounds default to `max(a_i) + 1` over the dataset so no
/// point falls outside the box.
pub fn heatmap_rows<F: Real>(
    results: &[(ReducedToggleParams<F>, &SaddleOutcome<F>)],
) -> Result<Vec<HeatmapRow>, StatsError> {
    let mut abar1 = F::lit(2.0);
    let mut abar2 = F::lit(2.0);
    for (params, _) in results {
        let (a1, _, a2, _) = project_psi(params);
        abar1 = abar1.max(a1 + F::one());
        abar2 = abar2.max(a2 + F::one());
    }
    results
        .iter()
        .map(|(params, outcome)| {
            let (a1, b1, a2, b2) = project_psi(params);
            let (g1, g2) = project_g(a1, b1, a2, b2, abar1, abar2)?;
            Ok(HeatmapRow {
                g1: g1.as_f64(),
                g2: g2.as_f64(),
                d_min: outcome.d_min().map(|d| d.as_f64()),
                category: outcome.category(),
            })
        })
        .collect()
}

/// CSV with header `g1,g2,d_min,category`; `NA` marks parameters without a
/// verified saddle.
pub fn heatmap_to_csv<W: std::io::Write>(rows: &[HeatmapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "g1,g2,d_min,category")?;
    for row in rows {
        let d = row.d_min.map(|d| d.to_string()).unwrap_or_else(|| "NA".into());
        let cat = match row.category {
            OutcomeCategory::None => "none",
            OutcomeCategory::One => "one",
            OutcomeCategory::Multiple => "multiple",
            OutcomeCategory::Bad => "bad",
        };
        writeln!(out, "{},{},{},{}", row.g1, row.g2, d, cat)?;
    }
    Ok(())
}
