//! Machine checks of pointwise and norm inequalities, and the structural
//! experiments built from them.
//!
//! Every check returns a [`CheckReport`]. Assertive checks carry a signed
//! worst violation and fail exactly when it exceeds the tolerance. Recording
//! checks (`assertive == false`) only measure a quantity; they never fail.
//! `Inconclusive` marks inputs on which a check has nothing to say (a zero
//! function, a window clamped at the grid edge), so truncation artifacts
//! are never reported as violations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{Grid1D, GridFunction, Window};

mod pointwise;
mod structural;
mod sweep;

pub use pointwise::*;
pub use structural::*;
pub use sweep::*;

/// Tolerance for inequalities whose two sides are evaluated exactly up to
/// rounding.
pub const ANALYTIC_TOL: f64 = 1e-12;
/// Tolerance for inequalities that involve bisection-based maximal values.
pub const BISECTION_TOL: f64 = 1e-9;
/// Largest admissible growth of a recorded constant per grid doubling.
pub const STABILITY_TOL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        })
    }
}

/// Scalar parameters a check was run with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(with = "crate::ext_float::option", default)]
    pub p: Option<f64>,
    #[serde(with = "crate::ext_float::option", default)]
    pub delta: Option<f64>,
    #[serde(with = "crate::ext_float::option", default)]
    pub lambda: Option<f64>,
    #[serde(with = "crate::ext_float::option", default)]
    pub r: Option<f64>,
    #[serde(with = "crate::ext_float::option", default)]
    pub eps: Option<f64>,
}

impl Params {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }
    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
}

/// Where the worst case was found.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub member: Option<String>,
    pub cell: Option<usize>,
    pub window: Option<Window>,
    pub note: Option<String>,
}

impl Witness {
    pub fn at_cell(cell: usize) -> Self {
        Self {
            cell: Some(cell),
            ..Self::default()
        }
    }

    pub fn with_member(mut self, member: impl Into<String>) -> Self {
        self.member = Some(member.into());
        self
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(m) = &self.member {
            parts.push(format!("f={m}"));
        }
        if let Some(q) = self.window {
            parts.push(format!("Q={q}"));
        }
        if let Some(c) = self.cell {
            parts.push(format!("x={c}"));
        }
        if let Some(n) = &self.note {
            parts.push(n.clone());
        }
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    /// The statement being checked, in words.
    pub anchor: String,
    pub status: Status,
    /// Signed margin: relative excess of the left side over the right side
    /// at the worst point (≤ 0 when the inequality holds). `-inf` when
    /// nothing was evaluated.
    #[serde(with = "crate::ext_float")]
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    /// The measured quantity of a recording check.
    #[serde(with = "crate::ext_float::option", default)]
    pub recorded: Option<f64>,
    pub assertive: bool,
    pub params: Params,
    pub cells: usize,
    pub radius: f64,
    pub trials: usize,
}

impl CheckReport {
    pub fn new(check: &str, anchor: &str, grid: &Grid1D, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            anchor: anchor.into(),
            status: Status::Pass,
            worst_violation: f64::NEG_INFINITY,
            witness: None,
            tolerance,
            recorded: None,
            assertive: true,
            params: Params::default(),
            cells: grid.cells(),
            radius: grid.radius(),
            trials: 1,
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    /// Sets the margin and derives the status from it.
    pub fn assert_margin(mut self, margin: f64, witness: Option<Witness>) -> Self {
        self.assertive = true;
        self.worst_violation = margin;
        self.witness = witness;
        self.status = if margin > self.tolerance {
            Status::Fail
        } else {
            Status::Pass
        };
        self
    }

    /// Turns the report into a recording of `value`.
    pub fn record(mut self, value: f64, witness: Option<Witness>) -> Self {
        self.assertive = false;
        self.recorded = Some(value);
        self.witness = witness;
        self.status = Status::Pass;
        self
    }

    pub fn inconclusive(mut self, note: impl Into<String>) -> Self {
        self.status = Status::Inconclusive;
        self.witness = Some(Witness::default().with_note(note));
        self
    }

    pub fn is_fail(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Relative excess of `lhs` over `rhs`: `(lhs − rhs)/|rhs|`, `0` when the
/// two agree, and `±inf` when `rhs = 0` and they differ.
pub fn margin(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        0.0
    } else if rhs == 0.0 {
        if lhs > rhs {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (lhs - rhs) / rhs.abs()
    }
}

/// Worst pointwise margin of `lhs ≤ rhs` and the first cell attaining it.
pub fn pointwise_margin(lhs: &GridFunction, rhs: &GridFunction) -> crate::Result<(f64, usize)> {
    lhs.check_same_grid(rhs)?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, (&a, &b)) in lhs.values().iter().zip(rhs.values()).enumerate() {
        let m = margin(a, b);
        if m > worst.0 {
            worst = (m, i);
        }
    }
    Ok(worst)
}

/// Combines reports of one check over a sweep. The result fails if any
/// input failed, is inconclusive only if every input was, and carries the
/// worst input's margin, witness and parameters.
pub fn merge_reports(check: &str, reports: Vec<CheckReport>) -> Option<CheckReport> {
    let trials = reports.iter().map(|r| r.trials).sum();
    let any_conclusive = reports.iter().any(|r| r.status != Status::Inconclusive);
    let mut best: Option<CheckReport> = None;
    for r in reports {
        let better = match &best {
            None => true,
            Some(b) => {
                let rank = |x: &CheckReport| x.status != Status::Inconclusive;
                (rank(&r) && !rank(b))
                    || (rank(&r) == rank(b)
                        && if r.assertive {
                            r.worst_violation > b.worst_violation
                        } else {
                            r.recorded.unwrap_or(f64::NEG_INFINITY)
                                > b.recorded.unwrap_or(f64::NEG_INFINITY)
                        })
            }
        };
        if better {
            best = Some(r);
        }
    }
    best.map(|mut b| {
        b.check = check.into();
        b.trials = trials;
        if !any_conclusive {
            b.status = Status::Inconclusive;
        }
        b
    })
}

/// One point of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementPoint {
    pub cells: usize,
    #[serde(with = "crate::ext_float")]
    pub value: f64,
}

/// Asserts that a recorded constant grows by less than `max_growth`
/// (relative) between consecutive ladder points. The margin is the largest
/// observed growth; infinite or undefined values fail.
pub fn refinement_stability(
    check: &str,
    anchor: &str,
    points: &[RefinementPoint],
    radius: f64,
    max_growth: f64,
    params: Params,
) -> CheckReport {
    let mut report = CheckReport {
        check: check.into(),
        anchor: anchor.into(),
        status: Status::Pass,
        worst_violation: f64::NEG_INFINITY,
        witness: None,
        tolerance: max_growth,
        recorded: points.last().map(|p| p.value),
        assertive: true,
        params,
        cells: points.last().map_or(0, |p| p.cells),
        radius,
        trials: points.len(),
    };
    if points.len() < 2 {
        return report.inconclusive("refinement ladder needs at least two grids");
    }
    let mut worst = (f64::NEG_INFINITY, 1);
    for k in 1..points.len() {
        let (a, b) = (points[k - 1].value, points[k].value);
        let g = if a.is_finite() && b.is_finite() && a > 0.0 {
            b / a - 1.0
        } else if a == b && a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if g > worst.0 || g.is_nan() {
            worst = (if g.is_nan() { f64::INFINITY } else { g }, k);
        }
    }
    let k = worst.1;
    let series = points
        .iter()
        .map(|p| format!("{}:{}", p.cells, crate::ext_float::format_f64(p.value)))
        .collect::<Vec<_>>()
        .join(",");
    let w = Witness::default().with_note(format!(
        "growth N={}->{};series={series}",
        points[k - 1].cells,
        points[k].cells
    ));
    report = report.assert_margin(worst.0, Some(w));
    report.recorded = points.last().map(|p| p.value);
    report
}
