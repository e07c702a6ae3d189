//! Closed-form sample-complexity bounds and the Chernoff tails they rest on.
//!
//! All logarithms are natural. Sample sizes are ceilings of the real-valued
//! expressions; anything beyond the `u64` range is reported as
//! [`SampleSize::Astronomical`].
//!
//! | bound | expression |
//! |---|---|
//! | finite class | `8/(ε²γψ) · ln(8|Γ||H| / (δλ))` |
//! | graph dimension | `C_graph · (d + ln(|Γ||Y|/δ)) / (ε²ψ²γ)` |
//! | lower | `C_lower · ln(1/δ) / (ψγε²)` |
//! | subpopulation coverage | `(8/γ) · ln(|Γ|/δ)` |
//! | binary uniform convergence | `C_fund · (d + ln(1/δ)) / ε²` |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_open, Error, Result};

/// Multiplicative constants of the bounds stated only up to `O(·)`/`Ω(·)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_graph: f64,
    pub c_fund: f64,
    pub c_lower: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c_graph: 64.0,
            c_fund: 8.0,
            c_lower: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub psi: f64,
    /// Interval width; finite-class mode only.
    pub lambda: f64,
    /// |Γ|
    pub card_gamma: u64,
    /// |H|; finite-class mode only.
    pub card_h: u64,
    /// |Y|; graph mode only.
    pub card_y: u64,
    /// Graph-dimension bound; graph mode only.
    pub dimension: u64,
    pub constants: BoundConstants,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            epsilon: 0.05,
            delta: 0.05,
            gamma: 0.1,
            psi: 0.1,
            lambda: 0.1,
            card_gamma: 1,
            card_h: 1,
            card_y: 2,
            dimension: 1,
            constants: BoundConstants::default(),
        }
    }
}

impl BoundParams {
    fn check_common(&self) -> Result<()> {
        check_unit_open("epsilon", self.epsilon)?;
        check_unit_open("delta", self.delta)?;
        check_unit_open("gamma", self.gamma)?;
        check_unit_open("psi", self.psi)?;
        check_count("card_gamma", self.card_gamma)
    }

    fn check_finite(&self) -> Result<()> {
        self.check_common()?;
        check_unit_open("lambda", self.lambda)?;
        check_count("card_h", self.card_h)
    }

    fn check_graph(&self) -> Result<()> {
        self.check_common()?;
        check_count("card_y", self.card_y)?;
        check_positive("c_graph", self.constants.c_graph)
    }
}

fn check_count(name: &'static str, n: u64) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: n as f64,
            reason: "must be at least 1",
        })
    }
}

fn check_positive(name: &'static str, c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: c,
            reason: "must be positive",
        })
    }
}

/// A required sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Count(u64),
    /// Exceeds the `u64` range; carries the real-valued requirement.
    Astronomical(f64),
}

impl SampleSize {
    pub fn from_real(x: f64) -> Self {
        let c = x.ceil();
        // 2^64 is the first f64 strictly above u64::MAX.
        if c.is_finite() && c < 18_446_744_073_709_551_616.0 {
            SampleSize::Count(c.max(0.0) as u64)
        } else {
            SampleSize::Astronomical(x)
        }
    }

    pub fn count(self) -> Option<u64> {
        match self {
            SampleSize::Count(n) => Some(n),
            SampleSize::Astronomical(_) => None,
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Count(n) => write!(f, "{n}"),
            SampleSize::Astronomical(x) => write!(f, "astronomical ({x:e})"),
        }
    }
}

pub fn finite_class_bound_real(p: &BoundParams) -> Result<f64> {
    p.check_finite()?;
    let categories = 8.0 * p.card_gamma as f64 * p.card_h as f64;
    Ok(8.0 / (p.epsilon * p.epsilon * p.gamma * p.psi) * (categories / (p.delta * p.lambda)).ln())
}

/// Samples sufficient for uniform convergence of a finite class.
pub fn finite_class_bound(p: &BoundParams) -> Result<SampleSize> {
    finite_class_bound_real(p).map(SampleSize::from_real)
}

pub fn graph_dim_bound_real(p: &BoundParams) -> Result<f64> {
    p.check_graph()?;
    let log_term = (p.card_gamma as f64 * p.card_y as f64 / p.delta).ln();
    Ok(p.constants.c_graph * (p.dimension as f64 + log_term)
        / (p.epsilon * p.epsilon * p.psi * p.psi * p.gamma))
}

/// Samples sufficient for a class of graph dimension at most `d`.
pub fn graph_dim_bound(p: &BoundParams) -> Result<SampleSize> {
    graph_dim_bound_real(p).map(SampleSize::from_real)
}

pub fn lower_bound_real(p: &BoundParams) -> Result<f64> {
    check_unit_open("epsilon", p.epsilon)?;
    check_unit_open("delta", p.delta)?;
    check_unit_open("gamma", p.gamma)?;
    check_unit_open("psi", p.psi)?;
    check_positive("c_lower", p.constants.c_lower)?;
    Ok(p.constants.c_lower * (1.0 / p.delta).ln() / (p.psi * p.gamma * p.epsilon * p.epsilon))
}

/// Samples necessary for uniform convergence, up to the constant `c_lower`.
pub fn lower_bound(p: &BoundParams) -> Result<SampleSize> {
    lower_bound_real(p).map(SampleSize::from_real)
}

pub fn subpopulation_coverage_bound_real(gamma: f64, delta: f64, card_gamma: u64) -> Result<f64> {
    check_open_interval("gamma", gamma)?;
    check_open_interval("delta", delta)?;
    check_count("card_gamma", card_gamma)?;
    Ok(8.0 / gamma * (card_gamma as f64 / delta).ln())
}

/// Sample size after which every subpopulation of mass ≥ γ holds more than
/// `γm/2` draws, with probability at least 1 − δ.
pub fn subpopulation_coverage_bound(gamma: f64, delta: f64, card_gamma: u64) -> Result<SampleSize> {
    subpopulation_coverage_bound_real(gamma, delta, card_gamma).map(SampleSize::from_real)
}

fn check_open_interval(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must lie in (0, 1)",
        })
    }
}

/// `2·exp(−2ε²n)` before clamping.
pub fn chernoff_absolute_tail_raw(n: u64, epsilon: f64) -> f64 {
    2.0 * (-2.0 * epsilon * epsilon * n as f64).exp()
}

/// Bound on `Pr[|mean − μ| ≥ ε]` for `n` i.i.d. Bernoulli draws, clamped to 1.
pub fn chernoff_absolute_tail(n: u64, epsilon: f64) -> f64 {
    chernoff_absolute_tail_raw(n, epsilon).min(1.0)
}

/// Bound on `Pr[X ≤ (1−ε)E[X]]` for a sum of i.i.d. Bernoulli draws.
pub fn chernoff_relative_tail(expectation: f64, epsilon: f64) -> Result<f64> {
    if expectation.is_nan() || expectation < 0.0 {
        return Err(Error::InvalidParameter {
            name: "expectation",
            value: expectation,
            reason: "must be nonnegative",
        });
    }
    check_open_interval("epsilon", epsilon)?;
    Ok((-epsilon * epsilon * expectation / 2.0).exp())
}

pub fn binary_uc_bound_real(d: u64, epsilon: f64, delta: f64, c_fund: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    check_unit_open("delta", delta)?;
    check_positive("c_fund", c_fund)?;
    Ok(c_fund * (d as f64 + (1.0 / delta).ln()) / (epsilon * epsilon))
}

/// Uniform-convergence sample size for a binary class of VC dimension `d`.
pub fn binary_uc_bound(d: u64, epsilon: f64, delta: f64, c_fund: f64) -> Result<SampleSize> {
    binary_uc_bound_real(d, epsilon, delta, c_fund).map(SampleSize::from_real)
}

/// Per-category occupancy `l = (2/ε²)·ln(8|Γ||H|/(δλ))` used in the
/// finite-class argument. Diagnostic only.
pub fn occupancy_threshold(p: &BoundParams) -> Result<f64> {
    p.check_finite()?;
    let categories = 8.0 * p.card_gamma as f64 * p.card_h as f64;
    Ok(2.0 / (p.epsilon * p.epsilon) * (categories / (p.delta * p.lambda)).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Finite,
    Graph,
}

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-9;

fn bound_at(p: &BoundParams, mode: BoundMode, epsilon: f64) -> Result<SampleSize> {
    let q = BoundParams { epsilon, ..*p };
    match mode {
        BoundMode::Finite => finite_class_bound(&q),
        BoundMode::Graph => graph_dim_bound(&q),
    }
}

fn fits(size: SampleSize, m: u64) -> bool {
    matches!(size, SampleSize::Count(n) if n <= m)
}

/// Smallest ε whose bound is at most `m`, with all other parameters from `p`.
///
/// Finite mode inverts the closed form and then corrects by single ulps for
/// rounding in the ceiling; graph mode bisects to [`BISECTION_TOLERANCE`]
/// and returns the feasible end of the bracket.
pub fn achievable_epsilon(m: u64, p: &BoundParams, mode: BoundMode) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if !fits(bound_at(p, mode, 1.0)?, m) {
        return Err(Error::Infeasible { m });
    }
    match mode {
        BoundMode::Finite => {
            let at_one = finite_class_bound_real(&BoundParams { epsilon: 1.0, ..*p })?;
            let mut eps = (at_one / m as f64).sqrt().min(1.0);
            while !fits(bound_at(p, mode, eps)?, m) {
                eps = eps.next_up();
            }
            loop {
                let lower = eps.next_down();
                if lower <= 0.0 || !fits(bound_at(p, mode, lower)?, m) {
                    break;
                }
                eps = lower;
            }
            Ok(eps)
        }
        BoundMode::Graph => {
            let mut hi = 1.0;
            let mut lo = f64::MIN_POSITIVE;
            if fits(bound_at(p, mode, lo)?, m) {
                return Ok(lo);
            }
            while hi - lo > BISECTION_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if fits(bound_at(p, mode, mid)?, m) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}
