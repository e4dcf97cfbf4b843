//! Weight gallery and weight-class constants.
//!
//! Each estimator is a maximum over a [`WindowFamily`] and returns a
//! [`ConstantEstimate`] holding the value and the window that attains it.
//! The reported value is always re-evaluated at the witness with the public
//! per-window function (`ap_window_value`, `ainfty_ratio`, ...), so
//! re-evaluating the witness reproduces it bit for bit.
//!
//! Zero-weight cells make `[w]_{A_p}` and the (am) functional infinite, and
//! the estimate carries the offending window. The `A_∞` and `C_p` sweeps skip
//! windows whose denominator vanishes, since `0/0` says nothing.
//!
//! All estimates are grid-scale lower bounds except `C_p`, whose denominator
//! `∫(Mχ_Q)^p w` is truncated to the grid and is therefore biased upward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{
    heaviest_subset, scale_window, weighted_measure, CellSet, Grid1D, Weight, Window,
};
use crate::maximal::indicator_maximal_value;
use crate::sum::pairwise_sum_by;

/// Exponents `δ` at which the `A_∞` and `C_p` estimators are reported.
pub const DELTA_LADDER: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// `|x|^a`.
    Power {
        exponent: f64,
    },
    /// `χ_{|x| ≥ 1}`.
    Vanishing,
    /// `χ_{ℝ∖[s, t]}`.
    IndicatorComplement {
        s: f64,
        t: f64,
    },
    /// Explicit cell values.
    Custom {
        values: Vec<f64>,
    },
}

impl WeightSpec {
    pub fn label(&self) -> String {
        match self {
            WeightSpec::Constant { value } => format!("const({value})"),
            WeightSpec::Power { exponent } => format!("|x|^{exponent}"),
            WeightSpec::Vanishing => "chi(|x|>=1)".into(),
            WeightSpec::IndicatorComplement { s, t } => format!("chi(R\\[{s};{t}])"),
            WeightSpec::Custom { values } => format!("custom({} cells)", values.len()),
        }
    }
}

pub fn make_weight(spec: &WeightSpec, grid: Grid1D) -> Result<Weight> {
    let values: Vec<f64> = match spec {
        WeightSpec::Constant { value } => {
            if !(*value >= 0.0 && value.is_finite()) {
                return Err(Error::Validation(format!(
                    "constant weight must be finite and nonnegative, got {value}"
                )));
            }
            vec![*value; grid.cells()]
        }
        WeightSpec::Power { exponent } => {
            if !exponent.is_finite() {
                return Err(param("exponent", "must be finite"));
            }
            if *exponent < 0.0 && grid.centers().any(|x| x == 0.0) {
                return Err(Error::Validation(
                    "negative power evaluated at a cell center at the origin".into(),
                ));
            }
            grid.centers().map(|x| x.abs().powf(*exponent)).collect()
        }
        WeightSpec::Vanishing => grid
            .centers()
            .map(|x| if x.abs() >= 1.0 { 1.0 } else { 0.0 })
            .collect(),
        WeightSpec::IndicatorComplement { s, t } => {
            if s > t {
                return Err(Error::Validation(format!("empty interval [{s}, {t}]")));
            }
            grid.centers()
                .map(|x| if x >= *s && x <= *t { 0.0 } else { 1.0 })
                .collect()
        }
        WeightSpec::Custom { values } => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(
                    "custom weight has non-finite values".into(),
                ));
            }
            values.clone()
        }
    };
    Weight::new(grid, values)
}

/// Which windows a supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFamily {
    /// Every window inside the grid.
    #[default]
    All,
    /// Lengths `2^j`, every position.
    Dyadic,
}

impl WindowFamily {
    pub fn admits_len(&self, len: usize) -> bool {
        match self {
            WindowFamily::All => len >= 1,
            WindowFamily::Dyadic => len.is_power_of_two(),
        }
    }

    pub fn windows(&self, cells: usize) -> impl Iterator<Item = Window> + '_ {
        (0..cells).flat_map(move |lo| {
            (1..=cells - lo)
                .filter(move |&len| self.admits_len(len))
                .map(move |len| Window::with_len(lo, len).expect("nonzero length"))
        })
    }
}

/// A supremum-type constant and its extremal witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub estimator: String,
    /// `f64::INFINITY` when the constant is infinite on this grid.
    #[serde(with = "crate::ext_float")]
    pub value: f64,
    pub witness: Option<Window>,
    pub witness_set: Option<CellSet>,
    #[serde(with = "crate::ext_float::option")]
    pub p: Option<f64>,
    #[serde(with = "crate::ext_float::option")]
    pub delta: Option<f64>,
    pub family: WindowFamily,
    pub cells: usize,
    pub radius: f64,
}

impl ConstantEstimate {
    fn new(estimator: &str, grid: &Grid1D, family: WindowFamily) -> Self {
        Self {
            estimator: estimator.into(),
            value: 0.0,
            witness: None,
            witness_set: None,
            p: None,
            delta: None,
            family,
            cells: grid.cells(),
            radius: grid.radius(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

struct Candidate {
    value: f64,
    window: Window,
    k: usize,
}

/// Deterministic max over windows: `per_start(lo)` returns the best window
/// starting at `lo`; ties go to the smaller start.
fn sweep_starts<F>(cells: usize, per_start: F) -> Option<Candidate>
where
    F: Fn(usize) -> Option<Candidate> + Sync + Send,
{
    let per: Vec<Option<Candidate>> = (0..cells).into_par_iter().map(per_start).collect();
    per.into_iter()
        .flatten()
        .fold(None, |best: Option<Candidate>, c| match best {
            Some(b) if b.value >= c.value => Some(b),
            _ => Some(c),
        })
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(param("p", format!("must exceed 1, got {p}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(param("delta", format!("must lie in (0, 1], got {delta}")))
    }
}

/// Conjugate exponent `p' = p/(p−1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `σ = w^{−1/(p−1)}`; zero cells map to `+∞`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    check_p(p)?;
    let e = -1.0 / (p - 1.0);
    let vals = w
        .values()
        .iter()
        .map(|&v| if v == 0.0 { f64::INFINITY } else { v.powf(e) })
        .collect();
    Weight::new(*w.grid(), vals)
}

fn window_mean(vals: &[f64], q: Window) -> f64 {
    let s = &vals[q.range()];
    pairwise_sum_by(s.len(), |i| s[i]) / q.len() as f64
}

/// `⟨w⟩_Q·⟨σ⟩_Q^{p−1}` on one window, `+∞` if `σ` is infinite there.
pub fn ap_window_value(w: &Weight, sigma: &Weight, q: Window, p: f64) -> f64 {
    let sv = &sigma.values()[q.range()];
    if sv.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    window_mean(w.values(), q) * window_mean(sigma.values(), q).powf(p - 1.0)
}

/// `[w]_{A_p} = sup_Q ⟨w⟩_Q·⟨w^{−1/(p−1)}⟩_Q^{p−1}`.
pub fn ap_constant(w: &Weight, p: f64, family: WindowFamily) -> Result<ConstantEstimate> {
    let sigma = dual_weight(w, p)?;
    let n = w.len();
    let mut zero_prefix = vec![0usize; n + 1];
    for i in 0..n {
        zero_prefix[i + 1] = zero_prefix[i] + usize::from(sigma.values()[i].is_infinite());
    }
    let best = sweep_starts(n, |lo| {
        let mut best: Option<Candidate> = None;
        for len in (1..=n - lo).filter(|&l| family.admits_len(l)) {
            let q = Window::with_len(lo, len).expect("nonzero length");
            let value = if zero_prefix[lo + len] > zero_prefix[lo] {
                f64::INFINITY
            } else {
                ap_window_value(w, &sigma, q, p)
            };
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(Candidate {
                    value,
                    window: q,
                    k: 0,
                });
            }
            if value.is_infinite() {
                break;
            }
        }
        best
    });
    let mut est = ConstantEstimate::new("ap_constant", w.grid(), family);
    est.p = Some(p);
    if let Some(c) = best {
        est.value = ap_window_value(w, &sigma, c.window, p);
        est.witness = Some(c.window);
    }
    Ok(est)
}

/// `w(E_k)·(m/k)^δ / w(Q)` with `E_k` the `k` heaviest cells of `Q`.
pub fn ainfty_ratio(w: &Weight, q: Window, k: usize, delta: f64) -> Result<f64> {
    let e = heaviest_subset(w, q, k)?;
    let we = weighted_measure(w, &e)?;
    let wq = weighted_measure(w, &q)?;
    Ok(we * (q.len() as f64 / k as f64).powf(delta) / wq)
}

/// `∫(Mχ_Q)^p w` over the grid.
pub fn cp_denominator(w: &Weight, q: Window, p: f64) -> f64 {
    let m = q.len() as f64;
    let vals = w.values();
    w.grid().h()
        * pairwise_sum_by(vals.len(), |i| {
            let d = if i < q.lo() {
                q.lo() - i
            } else if i > q.hi() {
                i - q.hi()
            } else {
                0
            };
            weighted_power(vals[i], indicator_maximal_value(m, d), p)
        })
}

fn weighted_power(w: f64, base: f64, p: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * base.powf(p)
    }
}

/// `w(E_k)·(m/k)^δ / ∫(Mχ_Q)^p w`.
pub fn cp_ratio(w: &Weight, q: Window, k: usize, p: f64, delta: f64) -> Result<f64> {
    let e = heaviest_subset(w, q, k)?;
    let we = weighted_measure(w, &e)?;
    Ok(we * (q.len() as f64 / k as f64).powf(delta) / cp_denominator(w, q, p))
}

/// Shared subset sweep for `A_∞` and `C_p`: for each start, grow the window
/// one cell at a time, keep its values sorted, and scan every `k`.
fn subset_sweep<D>(
    w: &Weight,
    delta: f64,
    family: WindowFamily,
    denominator: D,
) -> Option<Candidate>
where
    D: Fn(Window) -> f64 + Sync + Send,
{
    let n = w.len();
    let h = w.grid().h();
    let vals = w.values();
    sweep_starts(n, |lo| {
        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<f64> = Vec::with_capacity(n - lo);
        for len in 1..=n - lo {
            let v = vals[lo + len - 1];
            let pos = sorted.partition_point(|&s| s >= v);
            sorted.insert(pos, v);
            if !family.admits_len(len) {
                continue;
            }
            let q = Window::with_len(lo, len).expect("nonzero length");
            let den = denominator(q);
            if den == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (i, &s) in sorted.iter().enumerate() {
                let k = i + 1;
                acc += s;
                let value = h * acc * (len as f64 / k as f64).powf(delta) / den;
                if best.as_ref().is_none_or(|b| value > b.value) {
                    best = Some(Candidate {
                        value,
                        window: q,
                        k,
                    });
                }
            }
        }
        best
    })
}

/// `A_∞` constant at fixed `δ`: `sup_{Q, E⊂Q} w(E)·(|Q|/|E|)^δ / w(Q)`.
pub fn ainfty_estimate(w: &Weight, delta: f64, family: WindowFamily) -> Result<ConstantEstimate> {
    check_delta(delta)?;
    let best = subset_sweep(w, delta, family, |q| {
        weighted_measure(w, &q).expect("window inside grid")
    });
    let mut est = ConstantEstimate::new("ainfty_estimate", w.grid(), family);
    est.delta = Some(delta);
    if let Some(c) = best {
        est.value = ainfty_ratio(w, c.window, c.k, delta)?;
        est.witness = Some(c.window);
        est.witness_set = Some(heaviest_subset(w, c.window, c.k)?);
    }
    Ok(est)
}

/// `C_p` constant at fixed `δ`: `sup_{Q, E⊂Q} w(E)·(|Q|/|E|)^δ / ∫(Mχ_Q)^p w`.
pub fn cp_estimate(
    w: &Weight,
    p: f64,
    delta: f64,
    family: WindowFamily,
) -> Result<ConstantEstimate> {
    check_p(p)?;
    check_delta(delta)?;
    let best = subset_sweep(w, delta, family, |q| cp_denominator(w, q, p));
    let mut est = ConstantEstimate::new("cp_estimate", w.grid(), family);
    est.p = Some(p);
    est.delta = Some(delta);
    if let Some(c) = best {
        est.value = cp_ratio(w, c.window, c.k, p, delta)?;
        est.witness = Some(c.window);
        est.witness_set = Some(heaviest_subset(w, c.window, c.k)?);
    }
    Ok(est)
}

/// `w(2Q)/w(Q)`, or `None` when both vanish or `2Q` leaves the grid.
pub fn doubling_ratio(w: &Weight, q: Window) -> Result<Option<f64>> {
    let doubled = scale_window(w.grid(), q, 2.0)?;
    if doubled.clamped {
        return Ok(None);
    }
    let wq = weighted_measure(w, &q)?;
    let w2q = weighted_measure(w, &doubled.window)?;
    Ok(match (wq == 0.0, w2q == 0.0) {
        (true, true) => None,
        (true, false) => Some(f64::INFINITY),
        _ => Some(w2q / wq),
    })
}

/// Doubling constant `sup_Q w(2Q)/w(Q)` over windows whose double fits.
pub fn doubling_constant(w: &Weight, family: WindowFamily) -> Result<ConstantEstimate> {
    let n = w.len();
    let best = sweep_starts(n, |lo| {
        let mut best: Option<Candidate> = None;
        for len in (1..=n - lo).filter(|&l| family.admits_len(l)) {
            let q = Window::with_len(lo, len).expect("nonzero length");
            if let Some(value) = doubling_ratio(w, q).expect("window inside grid") {
                if best.as_ref().is_none_or(|b| value > b.value) {
                    best = Some(Candidate {
                        value,
                        window: q,
                        k: 0,
                    });
                }
            }
        }
        best
    });
    let mut est = ConstantEstimate::new("doubling_constant", w.grid(), family);
    if let Some(c) = best {
        est.value = doubling_ratio(w, c.window)?.expect("witness has a ratio");
        est.witness = Some(c.window);
    }
    Ok(est)
}

/// `h·Σ w_i/(1+|x_i|)^p`.
pub fn np_integral(w: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    let g = w.grid();
    let vals = w.values();
    Ok(g.h() * pairwise_sum_by(vals.len(), |i| vals[i] / (1.0 + g.center(i).abs()).powf(p)))
}

/// `w(Q)^{1/p}·σ(Q)^{1/p'} / |Q|` on one window.
pub fn am_window_value(w: &Weight, sigma: &Weight, q: Window, p: f64) -> f64 {
    let sv = &sigma.values()[q.range()];
    if sv.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    let wq = weighted_measure(w, &q).expect("window inside grid");
    let sq = weighted_measure(sigma, &q).expect("window inside grid");
    wq.powf(1.0 / p) * sq.powf(1.0 / conjugate(p)) / q.measure(w.grid())
}

/// `sup_Q ‖χ_Q‖_{L^p(w)}·‖χ_Q‖_{L^{p'}(σ)} / |Q|`, which equals
/// `[w]_{A_p}^{1/p}` window by window.
pub fn am_functional(w: &Weight, p: f64, family: WindowFamily) -> Result<ConstantEstimate> {
    let sigma = dual_weight(w, p)?;
    let n = w.len();
    let best = sweep_starts(n, |lo| {
        let mut best: Option<Candidate> = None;
        for len in (1..=n - lo).filter(|&l| family.admits_len(l)) {
            let q = Window::with_len(lo, len).expect("nonzero length");
            let value = am_window_value(w, &sigma, q, p);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(Candidate {
                    value,
                    window: q,
                    k: 0,
                });
            }
            if value.is_infinite() {
                break;
            }
        }
        best
    });
    let mut est = ConstantEstimate::new("am_functional", w.grid(), family);
    est.p = Some(p);
    if let Some(c) = best {
        est.value = am_window_value(w, &sigma, c.window, p);
        est.witness = Some(c.window);
    }
    Ok(est)
}

/// `w + ε`.
pub fn perturb_weight(w: &Weight, eps: f64) -> Result<Weight> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(param("epsilon", format!("must be nonnegative, got {eps}")));
    }
    Weight::new(*w.grid(), w.values().iter().map(|v| v + eps).collect())
}
