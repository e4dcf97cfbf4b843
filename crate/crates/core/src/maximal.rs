//! Maximal-type operators on a grid: `M`, `M_r`, the local maximal operator
//! `m_λ`, the sharp function `f#` and its powered variant `f#_δ`.
//!
//! Every operator takes the supremum over all windows containing a cell.
//! `M` and `m_λ` come with exhaustive reference implementations
//! ([`maximal_oracle`], [`local_maximal_oracle`]) capped at
//! [`ORACLE_CAP`] cells.
//!
//! The two-sided `M` is not the larger of the two one-sided maximal averages
//! (`f = (10, 0, 10)` has `Mf = 20/3` in the middle and one-sided value 5), so
//! the fast path bisects on the level `t` per cell, testing whether some
//! window through the cell has `Σ(|f| − t) ≥ 0`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{check_lambda, kth_largest, rearrangement_rank, Grid1D, GridFunction, Window};
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Largest grid the exhaustive reference implementations accept.
pub const ORACLE_CAP: usize = 256;

/// Relative bracket width at which the bisection for `M` stops.
pub const BISECTION_RTOL: f64 = 1e-9;

/// Iteration cap for the bisection.
pub const BISECTION_MAX_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fast,
    Oracle,
}

/// An operator evaluation together with how it was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorOutput {
    pub input: GridFunction,
    pub output: GridFunction,
    pub algorithm: Algorithm,
    /// Relative tolerance of the evaluation; 0 for exact selections.
    pub tolerance: f64,
}

/// Level `N` of the truncation `f_N = min(|f|, N)·χ_{|x| ≤ N}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(level: f64) -> Result<Self> {
        if level > 0.0 && !level.is_nan() {
            Ok(Self(level))
        } else {
            Err(param(
                "truncation level",
                format!("must be positive, got {level}"),
            ))
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

fn prefix_sums(vals: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(vals.len() + 1);
    let mut acc = 0.0;
    s.push(acc);
    for &v in vals {
        acc += v;
        s.push(acc);
    }
    s
}

/// Hardy–Littlewood maximal function, by per-cell bisection on the level.
///
/// The returned value at each cell is the actual average of the best window
/// the bisection certified, so it never exceeds the exact maximum and trails
/// it by at most [`BISECTION_RTOL`] relative.
pub fn maximal(f: &GridFunction) -> GridFunction {
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let top = abs.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return GridFunction::from_parts(*f.grid(), vec![0.0; abs.len()]);
    }
    let s = prefix_sums(&abs);
    let n = abs.len();
    let out = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = abs[x];
            let (mut lo_t, mut hi_t) = (0.0, top);
            for _ in 0..BISECTION_MAX_ITERS {
                if hi_t - lo_t <= BISECTION_RTOL * hi_t {
                    break;
                }
                let t = 0.5 * (lo_t + hi_t);
                // Window [a, b) with a ≤ x < b: feasible iff
                // max_b (S_b − t·b) − min_a (S_a − t·a) ≥ 0.
                let (mut a_best, mut a_val) = (0, f64::INFINITY);
                for a in 0..=x {
                    let v = s[a] - t * a as f64;
                    if v < a_val {
                        a_val = v;
                        a_best = a;
                    }
                }
                let (mut b_best, mut b_val) = (x + 1, f64::NEG_INFINITY);
                for b in x + 1..=n {
                    let v = s[b] - t * b as f64;
                    if v > b_val {
                        b_val = v;
                        b_best = b;
                    }
                }
                if b_val - a_val >= 0.0 {
                    lo_t = t;
                    let avg = (s[b_best] - s[a_best]) / (b_best - a_best) as f64;
                    best = best.max(avg);
                } else {
                    hi_t = t;
                }
            }
            best
        })
        .collect();
    GridFunction::from_parts(*f.grid(), out)
}

/// Exhaustive `M`: every window's prefix-sum average is max-updated into each
/// cell it covers.
pub fn maximal_oracle(f: &GridFunction) -> Result<GridFunction> {
    let n = f.len();
    if n > ORACLE_CAP {
        return Err(Error::Size {
            cells: n,
            cap: ORACLE_CAP,
        });
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let s = prefix_sums(&abs);
    let mut out = abs.clone();
    for lo in 0..n {
        for hi in lo..n {
            let avg = (s[hi + 1] - s[lo]) / (hi - lo + 1) as f64;
            for o in &mut out[lo..=hi] {
                if avg > *o {
                    *o = avg;
                }
            }
        }
    }
    Ok(GridFunction::from_parts(*f.grid(), out))
}

/// `M(χ_Q)` in closed form: 1 on `Q`, and `m/(m + d)` at distance `d` cells
/// outside it, where the best window runs from the cell to the far end of `Q`.
pub fn maximal_of_indicator(grid: &Grid1D, q: Window) -> Result<GridFunction> {
    grid.check_window(q)?;
    let m = q.len() as f64;
    let out = (0..grid.cells())
        .map(|i| {
            let d = if i < q.lo() {
                q.lo() - i
            } else if i > q.hi() {
                i - q.hi()
            } else {
                0
            };
            indicator_maximal_value(m, d)
        })
        .collect();
    Ok(GridFunction::from_parts(*grid, out))
}

pub(crate) fn indicator_maximal_value(m: f64, d: usize) -> f64 {
    if d == 0 {
        1.0
    } else {
        m / (m + d as f64)
    }
}

/// `M_r f = (M(|f|^r))^{1/r}`.
pub fn maximal_r(f: &GridFunction, r: f64) -> Result<GridFunction> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param("r", format!("must be positive, got {r}")));
    }
    if r == 1.0 {
        return Ok(maximal(f));
    }
    Ok(maximal(&f.abs_pow(r)).map(|v| v.powf(1.0 / r)))
}

/// Binary indexed tree over value ranks, used as a sliding order-statistic
/// structure.
struct RankTree {
    tree: Vec<u32>,
    top_bit: usize,
}

impl RankTree {
    fn new(n: usize) -> Self {
        let mut top_bit = 1;
        while top_bit * 2 <= n {
            top_bit *= 2;
        }
        Self {
            tree: vec![0; n + 1],
            top_bit,
        }
    }

    fn clear(&mut self) {
        self.tree.iter_mut().for_each(|c| *c = 0);
    }

    /// `rank` is 0-based.
    fn add(&mut self, rank: usize, delta: i32) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// 0-based rank of the `k`-th (1-based) present element.
    fn kth(&self, mut k: u32) -> usize {
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < k {
                pos = next;
                k -= self.tree[next];
            }
            step /= 2;
        }
        pos
    }
}

/// Max-update `out[x]` with the largest `window_vals[lo]` over windows
/// `[lo, lo + m)` that contain `x` (monotone deque).
fn propagate_window_values(window_vals: &[f64], m: usize, out: &mut [f64]) {
    let n = out.len();
    let mut dq: VecDeque<usize> = VecDeque::new();
    for x in 0..n {
        if x + m <= n {
            while let Some(&back) = dq.back() {
                if window_vals[back] <= window_vals[x] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(x);
        }
        while let Some(&front) = dq.front() {
            if front + m <= x {
                dq.pop_front();
            } else {
                break;
            }
        }
        if let Some(&front) = dq.front() {
            if window_vals[front] > out[x] {
                out[x] = window_vals[front];
            }
        }
    }
}

fn elementwise_max(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        if y > *x {
            *x = y;
        }
    }
    a
}

/// Local maximal operator `m_λ f(x) = sup_{Q∋x} (fχ_Q)^*(λ|Q|)`.
///
/// Window lengths are processed independently: for each length the
/// `(⌊λm⌋+1)`-th largest value is tracked with a sliding rank tree and then
/// pushed to the covered cells with a sliding maximum. `O(N² log N)`.
pub fn local_maximal(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    let n = f.len();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted: Vec<f64> = order.iter().map(|&i| abs[i]).collect();

    let out = (1..=n)
        .into_par_iter()
        .fold(
            || (vec![0.0; n], RankTree::new(n), Vec::new()),
            |(mut acc, mut tree, mut vals), m| {
                let k = rearrangement_rank(lambda, m);
                if k >= m {
                    return (acc, tree, vals);
                }
                tree.clear();
                vals.clear();
                for &r in &rank[..m] {
                    tree.add(r, 1);
                }
                vals.push(sorted[tree.kth(k as u32 + 1)]);
                for lo in 1..=n - m {
                    tree.add(rank[lo - 1], -1);
                    tree.add(rank[lo + m - 1], 1);
                    vals.push(sorted[tree.kth(k as u32 + 1)]);
                }
                propagate_window_values(&vals, m, &mut acc);
                (acc, tree, vals)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(|| vec![0.0; n], elementwise_max);
    Ok(GridFunction::from_parts(*f.grid(), out))
}

/// Exhaustive `m_λ`: sort every window.
pub fn local_maximal_oracle(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    let n = f.len();
    if n > ORACLE_CAP {
        return Err(Error::Size {
            cells: n,
            cap: ORACLE_CAP,
        });
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mut out = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    for lo in 0..n {
        for hi in lo..n {
            buf.clear();
            buf.extend_from_slice(&abs[lo..=hi]);
            let v = kth_largest(&mut buf, rearrangement_rank(lambda, hi - lo + 1));
            for o in &mut out[lo..=hi] {
                if v > *o {
                    *o = v;
                }
            }
        }
    }
    Ok(GridFunction::from_parts(*f.grid(), out))
}

/// Mean oscillation `(1/m)Σ|f_i − ⟨f⟩_Q|` with the signed mean `⟨f⟩_Q`.
pub fn mean_oscillation(vals: &[f64]) -> f64 {
    let m = vals.len() as f64;
    let mean = pairwise_sum(vals) / m;
    pairwise_sum_by(vals.len(), |i| (vals[i] - mean).abs()) / m
}

/// Fefferman–Stein sharp function: the largest mean oscillation over windows
/// containing each cell.
pub fn sharp(f: &GridFunction) -> GridFunction {
    let n = f.len();
    let vals = f.values();
    let out = (2..=n)
        .into_par_iter()
        .fold(
            || vec![0.0; n],
            |mut acc, m| {
                let osc: Vec<f64> = (0..=n - m)
                    .map(|lo| mean_oscillation(&vals[lo..lo + m]))
                    .collect();
                propagate_window_values(&osc, m, &mut acc);
                acc
            },
        )
        .reduce(|| vec![0.0; n], elementwise_max);
    GridFunction::from_parts(*f.grid(), out)
}

/// `f#_δ = ((|f|^δ)#)^{1/δ}`.
pub fn sharp_delta(f: &GridFunction, delta: f64) -> Result<GridFunction> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(param("delta", format!("must lie in (0, 1], got {delta}")));
    }
    if delta == 1.0 {
        return Ok(sharp(&f.abs()));
    }
    Ok(sharp(&f.abs_pow(delta)).map(|v| v.powf(1.0 / delta)))
}

/// `f_N = min(|f|, N)·χ_{|x| ≤ N}`.
pub fn truncate_f_n(f: &GridFunction, level: TruncationLevel) -> GridFunction {
    let cap = level.get();
    let grid = *f.grid();
    let out = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if grid.center(i).abs() <= cap {
                v.abs().min(cap)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::from_parts(grid, out)
}
