//! Norm-level experiments: the `λ₀` search, localization and support of
//! `m_λ` on indicators, the doubling step, and the weight coherence table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::family::{make_test_family, FamilyKind, FamilySpec, TestFamily};
use crate::grid::{
    check_lambda, lp_w_norm, scale_window, weighted_measure, Grid1D, GridFunction, Weight, Window,
};
use crate::maximal::{local_maximal, maximal, sharp_delta};
use crate::singular::NondegeneracyReport;
use crate::weights::{
    ap_constant, cp_estimate, doubling_constant, make_weight, np_integral, ConstantEstimate,
    WeightSpec, WindowFamily,
};

use super::{
    margin, merge_reports, refinement_stability, CheckReport, Params, RefinementPoint, Status,
    Witness, ANALYTIC_TOL, BISECTION_TOL, STABILITY_TOL,
};

/// Factor of the `λ₀` criterion `‖Mf‖ ≤ 2‖m_{λ₀}f‖`.
pub const LAMBDA0_FACTOR: f64 = 2.0;

/// `{0.05, 0.10, …, 0.95}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

fn norm_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn check_family(family: &TestFamily) -> Result<()> {
    if family.is_empty() {
        Err(Error::Validation("test family is empty".into()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub lambda: f64,
    /// `max_f ‖Mf‖_{L^p(w)}/‖m_λ f‖_{L^p(w)}`: the smallest factor that
    /// works for every family member at this `λ`.
    #[serde(with = "crate::ext_float")]
    pub worst_ratio: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearchResult {
    pub p: f64,
    pub entries: Vec<LambdaEntry>,
    /// Smallest `λ` whose worst ratio is at most 2.
    pub lambda0: Option<f64>,
    /// Worst ratio is non-decreasing in `λ`.
    pub monotone: bool,
    pub members: usize,
    pub cells: usize,
    pub radius: f64,
}

impl LambdaSearchResult {
    pub fn entry(&self, lambda: f64) -> Option<&LambdaEntry> {
        self.entries.iter().find(|e| e.lambda == lambda)
    }

    /// Asserts monotonicity in `λ` exactly; records `λ₀`.
    pub fn to_report(&self) -> CheckReport {
        let mut r = CheckReport {
            check: "search_lambda0".into(),
            anchor: "exists lambda0 with ||Mf|| <= 2 ||m_lambda0 f|| for all f".into(),
            status: Status::Pass,
            worst_violation: f64::NEG_INFINITY,
            witness: None,
            tolerance: 0.0,
            recorded: None,
            assertive: true,
            params: Params::default().with_p(self.p),
            cells: self.cells,
            radius: self.radius,
            trials: self.members,
        };
        let mut worst = (f64::NEG_INFINITY, 0);
        for k in 1..self.entries.len() {
            let m = margin(self.entries[k - 1].worst_ratio, self.entries[k].worst_ratio);
            if m > worst.0 {
                worst = (m, k);
            }
        }
        let ratios = self
            .entries
            .iter()
            .map(|e| {
                format!(
                    "{}:{}",
                    e.lambda,
                    crate::ext_float::format_f64(e.worst_ratio)
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        let lambda0 = self.lambda0.map_or("none".to_string(), |l| l.to_string());
        let mut note = format!("lambda0={lambda0};ratios={ratios}");
        if let Some(l) = self.lambda0 {
            r.params = r.params.with_lambda(l);
            if let Some(w) = self.entry(l).and_then(|e| e.witness.clone()) {
                note.push_str(&format!(";witness@lambda0={w}"));
            }
        } else if let Some(e) = self.entries.iter().find(|e| e.worst_ratio.is_infinite()) {
            note.push_str(&format!(
                ";zero_denominator@{}={}",
                e.lambda,
                e.witness.clone().unwrap_or_default()
            ));
        }
        r = r.assert_margin(worst.0, Some(Witness::default().with_note(note)));
        r.recorded = self.lambda0;
        r
    }
}

/// For each `λ`, the worst ratio `‖Mf‖_{L^p(w)}/‖m_λ f‖_{L^p(w)}` over the
/// family (zero denominators give `+inf`), and the smallest `λ` whose worst
/// ratio is at most 2.
pub fn search_lambda0(
    w: &Weight,
    p: f64,
    family: &TestFamily,
    lambdas: &[f64],
) -> Result<LambdaSearchResult> {
    check_family(family)?;
    for &l in lambdas {
        check_lambda(l)?;
    }
    // ratios[member][lambda]
    let ratios: Vec<Vec<f64>> = family
        .members
        .par_iter()
        .map(|m| -> Result<Vec<f64>> {
            let num = lp_w_norm(&maximal(&m.f), w, p)?;
            lambdas
                .iter()
                .map(|&l| Ok(norm_ratio(num, lp_w_norm(&local_maximal(&m.f, l)?, w, p)?)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let entries: Vec<LambdaEntry> = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let mut best: Option<(f64, usize)> = None;
            for (i, row) in ratios.iter().enumerate() {
                if best.is_none_or(|(b, _)| row[k] > b) {
                    best = Some((row[k], i));
                }
            }
            let (worst_ratio, i) = best.expect("family is nonempty");
            LambdaEntry {
                lambda,
                worst_ratio,
                witness: Some(family.members[i].label.clone()),
            }
        })
        .collect();
    let monotone = entries
        .windows(2)
        .all(|e| e[0].worst_ratio <= e[1].worst_ratio);
    let lambda0 = entries
        .iter()
        .find(|e| e.worst_ratio <= LAMBDA0_FACTOR)
        .map(|e| e.lambda);
    Ok(LambdaSearchResult {
        p,
        entries,
        lambda0,
        monotone,
        members: family.len(),
        cells: w.grid().cells(),
        radius: w.grid().radius(),
    })
}

/// Records `sup_f ‖M(Mf)‖_{L^p(w)}/‖Mf‖_{L^p(w)}`.
pub fn wp_ratio(w: &Weight, p: f64, family: &TestFamily) -> Result<CheckReport> {
    check_family(family)?;
    let ratios: Vec<f64> = family
        .members
        .par_iter()
        .map(|m| {
            let mf = maximal(&m.f);
            Ok(norm_ratio(
                lp_w_norm(&maximal(&mf), w, p)?,
                lp_w_norm(&mf, w, p)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (i, &worst) = ratios
        .iter()
        .enumerate()
        .fold(None, |b: Option<(usize, &f64)>, (i, r)| match b {
            Some((_, br)) if br >= r => b,
            _ => Some((i, r)),
        })
        .expect("family is nonempty");
    let mut r = CheckReport::new(
        "wp_ratio",
        "||M(Mf)||_Lp(w) <= C ||Mf||_Lp(w)",
        w.grid(),
        0.0,
    )
    .with_params(Params::default().with_p(p))
    .record(
        worst,
        Some(Witness::default().with_member(family.members[i].label.clone())),
    );
    r.trials = family.len();
    Ok(r)
}

/// Largest `ε = k/m` with `ε < λ₀(1/4 − ε/2)`, or `None` if even `1/m`
/// violates it.
pub fn admissible_epsilon(lambda0: f64, m: usize) -> Option<f64> {
    let admissible = |e: f64| e < lambda0 * (0.25 - e / 2.0);
    let bound = lambda0 / (4.0 + 2.0 * lambda0);
    let mut k = (bound * m as f64).ceil() as usize;
    while k > 0 && !admissible(k as f64 / m as f64) {
        k -= 1;
    }
    (k > 0).then(|| k as f64 / m as f64)
}

/// `m_{λ₀}(χ_{εQ})` vanishes exactly outside `Q/2` when
/// `ε < λ₀(1/4 − ε/2)`; also `m_{λ₀}(χ_{εQ}) = 1` on `εQ`. When `ε`, or the
/// realized ratio `|εQ|/|Q|`, is not admissible the largest value outside
/// `Q/2` is only recorded.
pub fn localization_check(grid: &Grid1D, lambda0: f64, eps: f64, q: Window) -> Result<CheckReport> {
    check_lambda(lambda0)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(param("eps", format!("must lie in (0, 1], got {eps}")));
    }
    grid.check_window(q)?;
    let eq = scale_window(grid, q, eps)?.window;
    let half = scale_window(grid, q, 0.5)?.window;
    let f = GridFunction::indicator(*grid, eq)?;
    let ml = local_maximal(&f, lambda0)?;
    let mut worst = (f64::NEG_INFINITY, 0, "");
    for (i, &v) in ml.values().iter().enumerate() {
        let (viol, kind) = if half.contains(i) {
            if eq.contains(i) {
                (1.0 - v, "inside eQ below 1")
            } else {
                continue;
            }
        } else {
            (v, "outside Q/2 nonzero")
        };
        if viol > worst.0 {
            worst = (viol, i, kind);
        }
    }
    // `εQ` has `⌈εm⌉` cells, so the realized ratio can exceed `ε` on short
    // windows; the claim is asserted only when both satisfy the inequality.
    let realized = eq.len() as f64 / q.len() as f64;
    let admissible = [eps, realized]
        .iter()
        .all(|&e| e < lambda0 * (0.25 - e / 2.0));
    let report = CheckReport::new(
        "localization",
        "m_lambda0(chi_eQ) vanishes outside Q/2 when eps < lambda0 (1/4 - eps/2)",
        grid,
        0.0,
    )
    .with_params(Params::default().with_lambda(lambda0).with_eps(eps));
    let w = Witness::at_cell(worst.1)
        .with_window(q)
        .with_note(format!("eQ={eq};Q/2={half};{}", worst.2));
    Ok(if admissible {
        report.assert_margin(worst.0, Some(w))
    } else {
        let outside = ml
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| !half.contains(*i))
            .map(|(_, &v)| v)
            .fold(0.0, f64::max);
        let note = format!(
            "{};eps or |eQ|/|Q|={realized} not admissible; report only",
            w.note.clone().unwrap_or_default()
        );
        report.record(outside, Some(w.with_note(note)))
    })
}

/// `m_{λ₀}(χ_Q)` vanishes exactly outside `rQ`, `r = 1 + 2/λ₀`, and equals
/// 1 on `Q`. Inconclusive when `rQ` is cut by the grid edge.
pub fn support_check_rq(grid: &Grid1D, lambda0: f64, q: Window) -> Result<CheckReport> {
    check_lambda(lambda0)?;
    let r = 1.0 + 2.0 / lambda0;
    let scaled = scale_window(grid, q, r)?;
    let report = CheckReport::new(
        "support_rq",
        "m_lambda0(chi_Q) is supported in rQ with ((r-1)/2) = 1/lambda0",
        grid,
        0.0,
    )
    .with_params(Params::default().with_lambda(lambda0).with_r(r));
    if scaled.clamped {
        return Ok(report.inconclusive(format!("rQ={} clamped at the grid edge", scaled.window)));
    }
    let rq = scaled.window;
    let ml = local_maximal(&GridFunction::indicator(*grid, q)?, lambda0)?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, &v) in ml.values().iter().enumerate() {
        let viol = if q.contains(i) {
            1.0 - v
        } else if rq.contains(i) {
            continue;
        } else {
            v
        };
        if viol > worst.0 {
            worst = (viol, i);
        }
    }
    Ok(report.assert_margin(
        worst.0,
        Some(
            Witness::at_cell(worst.1)
                .with_window(q)
                .with_note(format!("rQ={rq}")),
        ),
    ))
}

/// Seeded windows of `20..=min(160, n/2)` cells anywhere on the grid.
pub fn localization_placements(grid: &Grid1D, count: usize, seed: u64) -> Result<Vec<Window>> {
    let n = grid.cells();
    let hi = 160.min(n / 2);
    if hi < 20 {
        return Err(Error::Validation(format!(
            "{n} cells are too few for localization placements"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let m = rng.random_range(20..=hi);
            Window::with_len(rng.random_range(0..=n - m), m).expect("nonzero length")
        })
        .collect())
}

/// [`localization_check`] over seeded placements, merged.
pub fn localization_sweep(
    grid: &Grid1D,
    lambda0: f64,
    eps: f64,
    count: usize,
    seed: u64,
) -> Result<CheckReport> {
    let reports = localization_placements(grid, count, seed)?
        .into_par_iter()
        .map(|q| localization_check(grid, lambda0, eps, q))
        .collect::<Result<Vec<_>>>()?;
    merge_reports("localization", reports).ok_or_else(|| Error::Validation("no placements".into()))
}

/// Seeded windows of `2..=16` cells placed so that `rQ`, `r = 1 + 2/λ₀`,
/// stays on the grid.
pub fn support_placements(
    grid: &Grid1D,
    lambda0: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Window>> {
    check_lambda(lambda0)?;
    let n = grid.cells();
    let r = 1.0 + 2.0 / lambda0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let m = rng.random_range(2..=16usize);
        let margin = ((r - 1.0) / 2.0 * m as f64).ceil() as usize + 1;
        if n < m + 2 * margin {
            return Err(Error::Validation(format!(
                "{n} cells cannot hold rQ for r = {r}"
            )));
        }
        out.push(
            Window::with_len(rng.random_range(margin..=n - m - margin), m).expect("nonzero length"),
        );
    }
    Ok(out)
}

/// [`support_check_rq`] over seeded placements, merged.
pub fn support_sweep(grid: &Grid1D, lambda0: f64, count: usize, seed: u64) -> Result<CheckReport> {
    let reports = support_placements(grid, lambda0, count, seed)?
        .into_par_iter()
        .map(|q| support_check_rq(grid, lambda0, q))
        .collect::<Result<Vec<_>>>()?;
    merge_reports("support_rq", reports).ok_or_else(|| Error::Validation("no placements".into()))
}

/// `w(Q) ≤ (2/ε)^p·w(Q/2)` for every window of the family. `ε` must satisfy
/// `ε < λ₀(1/4 − ε/2)`.
pub fn doubling_step_check(
    w: &Weight,
    p: f64,
    lambda0: f64,
    eps: f64,
    family: WindowFamily,
) -> Result<CheckReport> {
    check_lambda(lambda0)?;
    if !(eps > 0.0 && eps < lambda0 * (0.25 - eps / 2.0)) {
        return Err(param(
            "eps",
            format!("{eps} violates eps < lambda0 (1/4 - eps/2) for lambda0 = {lambda0}"),
        ));
    }
    let grid = *w.grid();
    let n = grid.cells();
    let c = (2.0 / eps).powf(p);
    let per_start: Vec<Option<(f64, Window)>> = (0..n)
        .into_par_iter()
        .map(|lo| -> Result<Option<(f64, Window)>> {
            let mut best: Option<(f64, Window)> = None;
            for q in family.windows(n).filter(|q| q.lo() == lo) {
                let half = scale_window(&grid, q, 0.5)?.window;
                let m = margin(weighted_measure(w, &q)?, c * weighted_measure(w, &half)?);
                if best.is_none_or(|(b, _)| m > b) {
                    best = Some((m, q));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let (worst, q) = per_start
        .into_iter()
        .flatten()
        .fold(None, |b: Option<(f64, Window)>, c| match b {
            Some(bb) if bb.0 >= c.0 => Some(bb),
            _ => Some(c),
        })
        .expect("grid has at least one window");
    let half = scale_window(&grid, q, 0.5)?.window;
    let note = format!(
        "w(Q)={:e};w(Q/2)={:e};Q/2={half}",
        weighted_measure(w, &q)?,
        weighted_measure(w, &half)?
    );
    Ok(CheckReport::new(
        "doubling_step",
        "w(Q) <= (2/eps)^p w(Q/2)",
        &grid,
        ANALYTIC_TOL,
    )
    .with_params(
        Params::default()
            .with_p(p)
            .with_lambda(lambda0)
            .with_eps(eps),
    )
    .assert_margin(
        worst,
        Some(Witness::default().with_window(q).with_note(note)),
    ))
}

/// Records `sup_f ‖Mf‖_{L^p(w)}/‖f#_δ‖_{L^p(w)}`. Members with
/// `‖f#_δ‖ = 0` are skipped and counted in the witness note.
pub fn fs_inequality_ratio(
    w: &Weight,
    p: f64,
    delta: f64,
    family: &TestFamily,
) -> Result<CheckReport> {
    check_family(family)?;
    let ratios: Vec<Option<f64>> = family
        .members
        .par_iter()
        .map(|m| {
            let den = lp_w_norm(&sharp_delta(&m.f, delta)?, w, p)?;
            if den == 0.0 {
                return Ok(None);
            }
            Ok(Some(lp_w_norm(&maximal(&m.f), w, p)? / den))
        })
        .collect::<Result<_>>()?;
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let report = CheckReport::new(
        "fs_ratio",
        "||Mf||_Lp(w) <= C ||f#_delta||_Lp(w)",
        w.grid(),
        0.0,
    )
    .with_params(Params::default().with_p(p).with_delta(delta));
    let best = ratios
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .fold(None, |b: Option<(usize, f64)>, c| match b {
            Some(bb) if bb.1 >= c.1 => Some(bb),
            _ => Some(c),
        });
    let mut r = match best {
        None => report.inconclusive(format!("all {skipped} members have zero sharp function")),
        Some((i, v)) => report.record(
            v,
            Some(
                Witness::default()
                    .with_member(family.members[i].label.clone())
                    .with_note(format!("skipped={skipped}")),
            ),
        ),
    };
    r.trials = family.len();
    Ok(r)
}

/// `R ↦ M(f·χ_{|·|>R})(x)` is non-increasing (relative tolerance `1e−9`)
/// and exactly 0 once `R` reaches the support radius of `f`.
pub fn decay_check(f: &GridFunction, x: usize, radii: &[f64]) -> Result<CheckReport> {
    let grid = *f.grid();
    if x >= grid.cells() {
        return Err(Error::Validation(format!(
            "cell {x} outside a grid of {} cells",
            grid.cells()
        )));
    }
    if radii.is_empty() || radii.windows(2).any(|r| r[0] >= r[1]) {
        return Err(Error::Validation(
            "radii must be nonempty and strictly increasing".into(),
        ));
    }
    let support = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| grid.center(i).abs())
        .fold(0.0, f64::max);
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let tail = GridFunction::from_parts(
                grid,
                f.values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| if grid.center(i).abs() > r { v } else { 0.0 })
                    .collect(),
            );
            maximal(&tail).values()[x]
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, 0, "");
    for k in 0..values.len() {
        if k > 0 {
            let m = margin(values[k], values[k - 1]);
            if m > worst.0 {
                worst = (m, k, "increase");
            }
        }
        if radii[k] >= support && values[k] != 0.0 && f64::INFINITY > worst.0 {
            worst = (f64::INFINITY, k, "nonzero beyond support");
        }
    }
    let series = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| format!("{r}:{v:e}"))
        .collect::<Vec<_>>()
        .join(",");
    let mut rep = CheckReport::new(
        "decay",
        "M(f chi_{|y|>R})(x) -> 0 as R -> infinity",
        &grid,
        BISECTION_TOL,
    )
    .assert_margin(
        worst.0,
        Some(
            Witness::at_cell(x)
                .with_note(format!("R={};{};series={series}", radii[worst.1], worst.2)),
        ),
    );
    rep.trials = radii.len();
    Ok(rep)
}

/// `f_j = χ_{|x|≥j}` decreases to 0 while `‖Mf_j‖_{L^p(w)}` stays bounded
/// below: asserts the minimum over `j` is positive and records it.
pub fn order_continuity_witness(w: &Weight, p: f64, js: &[f64]) -> Result<CheckReport> {
    let grid = *w.grid();
    let mut min = (f64::INFINITY, 0.0);
    let mut notes = Vec::new();
    for &j in js {
        let f = GridFunction::from_fn(grid, |x| if x.abs() >= j { 1.0 } else { 0.0 })?;
        if f.is_zero() {
            return Err(param(
                "j",
                format!("{j} leaves no cell with |x| >= j on the grid"),
            ));
        }
        let norm_m = lp_w_norm(&maximal(&f), w, p)?;
        let norm_f = lp_w_norm(&f, w, p)?;
        notes.push(format!("{j}:|f|={norm_f:e}:|Mf|={norm_m:e}"));
        if norm_m < min.0 {
            min = (norm_m, j);
        }
    }
    let violation = if min.0 > 0.0 { -min.0 } else { f64::INFINITY };
    let mut r = CheckReport::new(
        "order_continuity",
        "f_j = chi_{|x|>=j} decreases to 0 but ||Mf_j|| stays bounded below",
        &grid,
        0.0,
    )
    .with_params(Params::default().with_p(p))
    .assert_margin(
        violation,
        Some(Witness::default().with_note(format!("min@j={};{}", min.1, notes.join(",")))),
    );
    r.recorded = Some(min.0);
    r.trials = js.len();
    Ok(r)
}

/// Turns a non-degeneracy sweep into a check report: every tested ratio
/// must be at most the constant `C`.
pub fn nondegeneracy_report(grid: &Grid1D, report: &NondegeneracyReport) -> CheckReport {
    let m1 = margin(report.worst_ratio, report.constant);
    let m2 = report
        .worst_ratio_paired
        .map_or(f64::NEG_INFINITY, |r| margin(r, report.constant));
    let (m, wit, which) = if m2 > m1 {
        (m2, report.witness_paired.as_ref(), "condition 2")
    } else {
        (m1, report.witness.as_ref(), "condition 1")
    };
    let witness = wit.map(|w| {
        let mut out = Witness::at_cell(w.cell).with_window(w.window);
        let mut note = format!("trial={};{which}", w.trial);
        if let Some(qp) = w.paired {
            note.push_str(&format!(";Q'={qp}"));
        }
        out = out.with_note(format!("{note};skipped={}", report.skipped));
        out
    });
    let (name, anchor) = match report.mode {
        crate::singular::NondegeneracyMode::Shifted => (
            "nondegeneracy_shifted",
            "avg_Q f <= C |T(f chi_Q)(x)| on the shifted cubes",
        ),
        crate::singular::NondegeneracyMode::Paired => (
            "nondegeneracy_paired",
            "avg_Q f <= C |T(f chi_Q)| on Q' and 1 <= C |T chi_Q'| on Q",
        ),
    };
    let mut r = CheckReport::new(name, anchor, grid, 0.0).assert_margin(m, witness);
    r.recorded = Some(
        report
            .worst_ratio
            .max(report.worst_ratio_paired.unwrap_or(0.0)),
    );
    r.trials = report.trials;
    r
}

/// Outcome of evaluating one recording check on every member of a family
/// across a refinement ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    /// Worst per-member growth of the recorded value between consecutive
    /// grids.
    pub stability: CheckReport,
    /// Supremum of the recorded value over the family, per grid.
    pub series: Vec<RefinementPoint>,
    /// All per-member reports merged (carries any assertion the check makes
    /// on each trial).
    pub trials: CheckReport,
}

/// Evaluates `eval` on the family generated from `spec` on
/// `[−radius, radius]` with each cell count of `ladder`. Members are matched
/// by position, so `spec` should describe resolution-independent functions.
pub fn refinement_study<F>(
    check: &str,
    anchor: &str,
    spec: &FamilySpec,
    radius: f64,
    ladder: &[usize],
    params: Params,
    eval: F,
) -> Result<RefinementStudy>
where
    F: Fn(&GridFunction) -> Result<CheckReport> + Sync + Send,
{
    if ladder.len() < 2 || ladder.windows(2).any(|l| l[0] >= l[1]) {
        return Err(Error::Validation(
            "refinement ladder must be strictly increasing with two or more grids".into(),
        ));
    }
    let mut per_grid: Vec<(usize, TestFamily, Vec<CheckReport>)> = Vec::new();
    for &n in ladder {
        let family = make_test_family(spec, Grid1D::symmetric(radius, n)?, None, 2.0)?;
        let reports = family
            .members
            .par_iter()
            .map(|m| {
                eval(&m.f).map(|mut r| {
                    let mut w = r.witness.take().unwrap_or_default();
                    w.member = Some(m.label.clone());
                    r.witness = Some(w);
                    r
                })
            })
            .collect::<Result<Vec<_>>>()?;
        per_grid.push((n, family, reports));
    }
    let count = per_grid[0].2.len();
    if count == 0 || per_grid.iter().any(|g| g.2.len() != count) {
        return Err(Error::Validation(
            "family members do not match across the ladder".into(),
        ));
    }
    let series = per_grid
        .iter()
        .map(|(n, _, reports)| RefinementPoint {
            cells: *n,
            value: reports
                .iter()
                .filter_map(|r| r.recorded)
                .fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let stabilities: Vec<CheckReport> = (0..count)
        .filter_map(|j| {
            let points: Option<Vec<RefinementPoint>> = per_grid
                .iter()
                .map(|(n, _, reports)| {
                    reports[j]
                        .recorded
                        .map(|value| RefinementPoint { cells: *n, value })
                })
                .collect();
            points.map(|pts| {
                let mut r =
                    refinement_stability(check, anchor, &pts, radius, STABILITY_TOL, params);
                let label = per_grid.last().expect("nonempty ladder").1.members[j]
                    .label
                    .clone();
                if let Some(w) = r.witness.as_mut() {
                    w.member = Some(label);
                }
                r
            })
        })
        .collect();
    let stability = merge_reports(&format!("{check}_stability"), stabilities)
        .ok_or_else(|| Error::Validation("no member produced a recorded value".into()))?;
    let trials =
        merge_reports(check, per_grid.into_iter().flat_map(|g| g.2).collect()).expect("nonempty");
    Ok(RefinementStudy {
        stability,
        series,
        trials,
    })
}

/// Resolution-independent family for refinement studies: random steps, the
/// decaying profile, a centered interval indicator and an origin spike.
pub fn refinement_family(seed: u64) -> FamilySpec {
    FamilySpec {
        kinds: vec![
            FamilyKind::Steps {
                pieces: 8,
                count: 3,
            },
            FamilyKind::Decaying,
            FamilyKind::IndicatorAt {
                eps: 0.25,
                a: -1.0,
                b: 1.0,
            },
            FamilyKind::SpikesAt {
                positions: vec![0.0],
            },
        ],
        seed,
    }
}

/// Family used by the coherence table: generic inputs plus the witnesses
/// that detect a weight vanishing on an interval (a spike and `χ_{εQ}`
/// centered at the origin). `χ_{εQ}` comes first so that it is the reported
/// witness wherever it ties with the spike.
pub fn gallery_family(seed: u64) -> FamilySpec {
    FamilySpec {
        kinds: vec![
            FamilyKind::IndicatorAt {
                eps: 0.05,
                a: -0.5,
                b: 0.5,
            },
            FamilyKind::Uniform { count: 3 },
            FamilyKind::SpikesAt {
                positions: vec![0.0, 3.0, -5.0],
            },
            FamilyKind::Decaying,
            FamilyKind::Steps {
                pieces: 8,
                count: 2,
            },
        ],
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub p: f64,
    /// Cell counts of the refinement ladder on `[−radius, radius]`.
    pub ladder: Vec<usize>,
    pub radius: f64,
    /// Exponent of the `C_p` estimate.
    pub delta: f64,
    /// Domain radii for the `N_p` integral (cell width fixed by the finest
    /// ladder grid).
    pub np_radii: Vec<f64>,
    pub family: FamilySpec,
    pub lambdas: Vec<f64>,
}

impl CoherenceConfig {
    pub fn standard(p: f64, seed: u64) -> Self {
        Self {
            p,
            ladder: vec![128, 256, 512],
            radius: 8.0,
            delta: 0.5,
            np_radii: vec![8.0, 16.0, 32.0],
            family: gallery_family(seed),
            lambdas: default_lambda_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpPoint {
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub weight: String,
    pub search: LambdaSearchResult,
    pub ap: Vec<ConstantEstimate>,
    pub ap_stability: CheckReport,
    pub cp: Vec<ConstantEstimate>,
    pub cp_stability: CheckReport,
    pub doubling: ConstantEstimate,
    pub np: Vec<NpPoint>,
    /// `np(2L)/np(L)` for the first two radii.
    #[serde(with = "crate::ext_float")]
    pub np_growth: f64,
    /// Increments of `np` shrink: `(np₃ − np₂)/(np₂ − np₁) < 0.9`.
    pub np_bounded: bool,
    /// Run at `λ₀` when one was found, otherwise at `λ = 0.3`.
    pub doubling_step: CheckReport,
    /// `λ₀ ∧ C_p ∧ N_p ⇒ A_p` (finite and stable).
    pub implication_holds: bool,
    /// `λ₀` found ⇒ the doubling step passes.
    pub doubling_implication_holds: bool,
}

impl CoherenceRow {
    pub fn ap_finite_stable(&self) -> bool {
        self.ap_stability.status == Status::Pass
    }

    pub fn cp_finite_stable(&self) -> bool {
        self.cp_stability.status == Status::Pass
    }

    /// Asserts both implications; records the finest-grid `A_p` constant.
    pub fn to_report(&self) -> CheckReport {
        let ok = self.implication_holds && self.doubling_implication_holds;
        let finest = self.ap.last().expect("ladder is nonempty");
        let note = format!(
            "w={};lambda0={};ap={};ap_stable={};cp_stable={};np_growth={:.4};np_bounded={};doubling={};doubling_step={}",
            self.weight,
            self.search.lambda0.map_or("none".into(), |l| l.to_string()),
            crate::ext_float::format_f64(finest.value),
            self.ap_finite_stable(),
            self.cp_finite_stable(),
            self.np_growth,
            self.np_bounded,
            crate::ext_float::format_f64(self.doubling.value),
            self.doubling_step.status,
        );
        let mut r = CheckReport {
            check: "coherence".into(),
            anchor: "lambda0 and C_p and N_p imply A_p; lambda0 implies doubling".into(),
            status: Status::Pass,
            worst_violation: 0.0,
            witness: None,
            tolerance: 0.0,
            recorded: Some(finest.value),
            assertive: true,
            params: Params {
                delta: self.cp[0].delta,
                ..Params::default().with_p(self.search.p)
            },
            cells: finest.cells,
            radius: finest.radius,
            trials: self.ap.len(),
        };
        if let Some(l) = self.search.lambda0 {
            r.params = r.params.with_lambda(l);
        }
        let mut w = Witness::default()
            .with_member(self.weight.clone())
            .with_note(note);
        if let Some(q) = finest.witness {
            w = w.with_window(q);
        }
        let mut r = r.assert_margin(if ok { 0.0 } else { 1.0 }, Some(w));
        r.recorded = Some(finest.value);
        r
    }
}

fn estimate_points(ests: &[ConstantEstimate]) -> Vec<RefinementPoint> {
    ests.iter()
        .map(|e| RefinementPoint {
            cells: e.cells,
            value: e.value,
        })
        .collect()
}

/// One row of the coherence table for `spec`.
pub fn coherence_row(spec: &WeightSpec, cfg: &CoherenceConfig) -> Result<CoherenceRow> {
    if cfg.ladder.is_empty() || cfg.np_radii.len() < 3 {
        return Err(Error::Validation(
            "coherence needs a ladder and three N_p radii".into(),
        ));
    }
    let grids: Vec<Grid1D> = cfg
        .ladder
        .iter()
        .map(|&n| Grid1D::symmetric(cfg.radius, n))
        .collect::<Result<_>>()?;
    let weights: Vec<Weight> = grids
        .iter()
        .map(|&g| make_weight(spec, g))
        .collect::<Result<_>>()?;
    let ap: Vec<ConstantEstimate> = weights
        .iter()
        .map(|w| ap_constant(w, cfg.p, WindowFamily::All))
        .collect::<Result<_>>()?;
    let cp: Vec<ConstantEstimate> = weights
        .iter()
        .map(|w| cp_estimate(w, cfg.p, cfg.delta, WindowFamily::All))
        .collect::<Result<_>>()?;
    let params = Params::default().with_p(cfg.p);
    let ap_stability = refinement_stability(
        "ap_stability",
        "A_p constant finite and stable under refinement",
        &estimate_points(&ap),
        cfg.radius,
        STABILITY_TOL,
        params,
    );
    let cp_stability = refinement_stability(
        "cp_stability",
        "C_p constant finite and stable under refinement",
        &estimate_points(&cp),
        cfg.radius,
        STABILITY_TOL,
        params.with_delta(cfg.delta),
    );
    let finest = weights.last().expect("ladder is nonempty");
    let doubling = doubling_constant(finest, WindowFamily::All)?;
    let family = make_test_family(&cfg.family, *finest.grid(), Some(finest), cfg.p)?;
    let search = search_lambda0(finest, cfg.p, &family, &cfg.lambdas)?;

    let h = finest.grid().h();
    let np: Vec<NpPoint> = cfg
        .np_radii
        .iter()
        .map(|&l| {
            let cells = (2.0 * l / h).round() as usize;
            let g = Grid1D::symmetric(l, cells + (cells & 1))?;
            Ok(NpPoint {
                radius: l,
                value: np_integral(&make_weight(spec, g)?, cfg.p)?,
            })
        })
        .collect::<Result<_>>()?;
    let np_growth = np[1].value / np[0].value;
    let np_bounded = (np[2].value - np[1].value) < 0.9 * (np[1].value - np[0].value);

    let lambda_step = search.lambda0.unwrap_or(0.3);
    let eps = admissible_epsilon(lambda_step, finest.grid().cells())
        .ok_or_else(|| param("eps", "no admissible grid value"))?;
    let doubling_step = doubling_step_check(finest, cfg.p, lambda_step, eps, WindowFamily::All)?;

    let antecedent = search.lambda0.is_some() && cp_stability.status == Status::Pass && np_bounded;
    let implication_holds = !antecedent || ap_stability.status == Status::Pass;
    let doubling_implication_holds =
        search.lambda0.is_none() || doubling_step.status == Status::Pass;
    Ok(CoherenceRow {
        weight: spec.label(),
        search,
        ap,
        ap_stability,
        cp,
        cp_stability,
        doubling,
        np,
        np_growth,
        np_bounded,
        doubling_step,
        implication_holds,
        doubling_implication_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyKind;

    fn grid(n: usize) -> Grid1D {
        Grid1D::symmetric(8.0, n).unwrap()
    }

    #[test]
    fn constants_give_lambda0_at_first_grid_point() {
        let g = grid(64);
        let w = Weight::constant(g, 1.0).unwrap();
        let family = TestFamily {
            spec: FamilySpec {
                kinds: vec![],
                seed: 0,
            },
            members: vec![crate::family::Member {
                label: "one".into(),
                f: GridFunction::constant(g, 1.0).unwrap(),
            }],
        };
        let res = search_lambda0(&w, 2.0, &family, &default_lambda_grid()).unwrap();
        assert!(res.entries.iter().all(|e| e.worst_ratio == 1.0));
        assert_eq!(res.lambda0, Some(0.05));
        assert!(res.monotone);
        assert_eq!(res.to_report().status, Status::Pass);
        let wp = wp_ratio(&w, 2.0, &family).unwrap();
        assert_eq!(wp.recorded, Some(1.0));
    }

    #[test]
    fn vanishing_weight_defeats_search() {
        let g = grid(512);
        let w = make_weight(&WeightSpec::Vanishing, g).unwrap();
        let spec = FamilySpec {
            kinds: vec![
                FamilyKind::IndicatorAt {
                    eps: 0.05,
                    a: -0.5,
                    b: 0.5,
                },
                FamilyKind::SpikesAt {
                    positions: vec![0.0],
                },
            ],
            seed: 0,
        };
        let fam = make_test_family(&spec, g, None, 2.0).unwrap();
        let res = search_lambda0(&w, 2.0, &fam, &default_lambda_grid()).unwrap();
        assert_eq!(res.lambda0, None);
        assert!(res.monotone);
        for e in res.entries.iter().filter(|e| e.lambda >= 0.3) {
            assert!(e.worst_ratio.is_infinite(), "{e:?}");
        }
    }

    #[test]
    fn epsilon_rule() {
        let e = admissible_epsilon(0.3, 100).unwrap();
        assert_eq!(e, 0.06);
        assert!(e < 0.3 * (0.25 - e / 2.0));
        let next = 0.07;
        assert!(next >= 0.3 * (0.25 - next / 2.0));
        assert_eq!(admissible_epsilon(0.05, 10), None);
    }

    #[test]
    fn localization_example() {
        let g = grid(512);
        let q = Window::new(200, 299).unwrap();
        let r = localization_check(&g, 0.3, 0.05, q).unwrap();
        assert!(r.assertive);
        assert_eq!(r.status, Status::Pass, "{r:?}");
        // Non-admissible ε: report only.
        let r = localization_check(&g, 0.3, 0.5, q).unwrap();
        assert!(!r.assertive);
        assert!(r.recorded.unwrap() > 0.0);
        // ε admissible, but ⌈εm⌉/m = 1/6 is not.
        let short = Window::new(250, 255).unwrap();
        let r = localization_check(&g, 0.3, 0.05, short).unwrap();
        assert!(!r.assertive);
    }

    #[test]
    fn support_examples() {
        let g = grid(512);
        let q = Window::new(250, 259).unwrap();
        assert_eq!(support_check_rq(&g, 0.5, q).unwrap().status, Status::Pass);
        assert_eq!(support_check_rq(&g, 0.5, q).unwrap().params.r, Some(5.0));
        assert_eq!(support_check_rq(&g, 0.25, q).unwrap().params.r, Some(9.0));
        let edge = Window::new(0, 9).unwrap();
        assert_eq!(
            support_check_rq(&g, 0.5, edge).unwrap().status,
            Status::Inconclusive
        );
    }

    #[test]
    fn placement_sweeps_pass() {
        let g = grid(512);
        let loc = localization_sweep(&g, 0.3, 0.05, 20, 3).unwrap();
        assert_eq!(loc.status, Status::Pass, "{loc:?}");
        assert!(loc.assertive);
        assert_eq!(loc.trials, 20);
        let sup = support_sweep(&g, 0.5, 20, 3).unwrap();
        assert_eq!(sup.status, Status::Pass, "{sup:?}");
        for q in support_placements(&g, 0.5, 20, 3).unwrap() {
            assert!(!scale_window(&g, q, 5.0).unwrap().clamped);
        }
    }

    #[test]
    fn coifman_rochberg_is_stable_on_small_ladder() {
        let study = refinement_study(
            "coifman_rochberg",
            "M_delta(Mf) <= C Mf",
            &refinement_family(1),
            8.0,
            &[64, 128],
            Params::default().with_delta(0.5),
            |f| crate::checks::coifman_rochberg_ratio(f, 0.5),
        )
        .unwrap();
        assert_eq!(study.series.len(), 2);
        assert_eq!(study.stability.trials, 6 * 2);
        assert_ne!(study.trials.status, Status::Fail);
        assert!(refinement_study(
            "x",
            "y",
            &refinement_family(1),
            8.0,
            &[64],
            Params::default(),
            |f| { crate::checks::coifman_rochberg_ratio(f, 0.5) }
        )
        .is_err());
    }

    #[test]
    fn doubling_step_examples() {
        let g = grid(64);
        let one = Weight::constant(g, 1.0).unwrap();
        let eps = admissible_epsilon(0.3, 64).unwrap();
        assert_eq!(
            doubling_step_check(&one, 2.0, 0.3, eps, WindowFamily::All)
                .unwrap()
                .status,
            Status::Pass
        );
        assert!(doubling_step_check(&one, 2.0, 0.3, 0.2, WindowFamily::All).is_err());
        let chi = Weight::from_function(
            GridFunction::from_fn(g, |x| if x.abs() >= 1.0 { 1.0 } else { 0.0 }).unwrap(),
        )
        .unwrap();
        let r = doubling_step_check(&chi, 2.0, 0.3, eps, WindowFamily::All).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert!(r.worst_violation.is_infinite());
    }

    #[test]
    fn decay_examples() {
        let g = grid(128);
        let compact = GridFunction::from_fn(g, |x| if x.abs() < 2.0 { 1.0 } else { 0.0 }).unwrap();
        let r = decay_check(&compact, 64, &[0.5, 1.0, 1.5, 2.0, 3.0]).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        let dec = GridFunction::from_fn(g, |x| 1.0 / (1.0 + x.abs()).powi(2)).unwrap();
        let r = decay_check(&dec, 64, &[0.5, 1.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(decay_check(&dec, 64, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn order_continuity_with_compact_weight() {
        let g = grid(128);
        let w = Weight::from_function(
            GridFunction::from_fn(g, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }).unwrap(),
        )
        .unwrap();
        let r = order_continuity_witness(&w, 2.0, &[2.0, 4.0, 6.0, 7.5]).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(r.recorded.unwrap() > 0.0);
    }

    #[test]
    fn fs_ratio_skips_constants() {
        let g = grid(64);
        let w = Weight::constant(g, 1.0).unwrap();
        let family = TestFamily {
            spec: FamilySpec {
                kinds: vec![],
                seed: 0,
            },
            members: vec![
                crate::family::Member {
                    label: "one".into(),
                    f: GridFunction::constant(g, 1.0).unwrap(),
                },
                crate::family::Member {
                    label: "box".into(),
                    f: GridFunction::indicator(g, Window::new(28, 35).unwrap()).unwrap(),
                },
            ],
        };
        let r = fs_inequality_ratio(&w, 2.0, 0.5, &family).unwrap();
        assert!(!r.assertive);
        let wit = r.witness.unwrap();
        assert_eq!(wit.member.as_deref(), Some("box"));
        assert_eq!(wit.note.as_deref(), Some("skipped=1"));
        assert!(r.recorded.unwrap().is_finite());
    }
}
