//! Discrete Hilbert transform and non-degeneracy checks.
//!
//! The kernel is `K(t) = 1/t` at cell-center differences with the diagonal
//! omitted, so `Hf(x_i) = Σ_{j≠i} f_j/(i − j)` (the factor `h` cancels). On
//! `ℓ²` this matrix has norm at most `π`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{Grid1D, GridFunction, Window};
use crate::sum::pairwise_sum_by;

/// `K(t) = 1/t` with the lower bound `|K(t)| ≥ c_K/|t|`, `c_K = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub lower_bound: f64,
}

impl Default for KernelModel {
    fn default() -> Self {
        Self { lower_bound: 1.0 }
    }
}

impl KernelModel {
    /// Kernel at a signed cell offset `t ≠ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        1.0 / t
    }

    /// Whether `|K(t)|·|t| ≥ c_K`.
    pub fn satisfies_lower_bound(&self, t: f64) -> bool {
        self.eval(t).abs() * t.abs() >= self.lower_bound
    }
}

/// `Hf(x_i) = Σ_{j≠i} f_j/(i − j)`, pairwise per output cell.
pub fn hilbert(f: &GridFunction) -> GridFunction {
    let vals = f.values();
    let n = vals.len();
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            pairwise_sum_by(n, |j| {
                if j == i {
                    0.0
                } else {
                    vals[j] / (i as f64 - j as f64)
                }
            })
        })
        .collect();
    GridFunction::from_parts(*f.grid(), out)
}

/// `H*f(x_i) = max_{k≥1} |Σ_{|i−j|≥k} f_j/(i − j)|`.
///
/// The `k = 1` term is taken from [`hilbert`] itself so that `H*f ≥ |Hf|`
/// holds exactly; the deeper truncations accumulate from the far end inward.
pub fn hilbert_truncated_max(f: &GridFunction) -> GridFunction {
    let vals = f.values();
    let n = vals.len();
    let hf = hilbert(f);
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = hf.values()[i].abs();
            let mut tail = 0.0;
            for k in (2..n.max(2)).rev() {
                let kf = k as f64;
                if i >= k {
                    tail += vals[i - k] / kf;
                }
                if i + k < n {
                    tail -= vals[i + k] / kf;
                }
                best = best.max(tail.abs());
            }
            best
        })
        .collect();
    GridFunction::from_parts(*f.grid(), out)
}

/// `H(fχ_Q)(x)` evaluated directly from the window's cells.
fn hilbert_of_window_at(vals: &[f64], q: Window, x: usize) -> f64 {
    pairwise_sum_by(q.len(), |t| {
        let j = q.lo() + t;
        if j == x {
            0.0
        } else {
            vals[j] / (x as f64 - j as f64)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NondegeneracyMode {
    /// Shift by one window length in both directions.
    Shifted,
    /// Paired window `Q' = Q + ℓ`, both conditions.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyWitness {
    pub trial: usize,
    pub window: Window,
    pub paired: Option<Window>,
    pub cell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub mode: NondegeneracyMode,
    pub constant: f64,
    pub trials: usize,
    pub skipped: usize,
    /// Worst `avg_Q f / |H(fχ_Q)(x)|` over tested cells.
    #[serde(with = "crate::ext_float")]
    pub worst_ratio: f64,
    pub witness: Option<NondegeneracyWitness>,
    /// Worst `1/|H(χ_{Q'})(x)|` over `x ∈ Q` (paired mode only).
    #[serde(with = "crate::ext_float::option")]
    pub worst_ratio_paired: Option<f64>,
    pub witness_paired: Option<NondegeneracyWitness>,
    pub pass: bool,
}

/// One seeded `(Q, f)` draw: a window of at most a quarter of the grid and
/// nonnegative values on it. Every tenth trial uses `f ≡ 0`.
#[derive(Debug, Clone)]
pub struct NondegeneracyTrial {
    pub window: Window,
    pub values: Vec<f64>,
}

pub fn nondegeneracy_trials(grid: &Grid1D, trials: usize, seed: u64) -> Vec<NondegeneracyTrial> {
    let n = grid.cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|t| {
            let m = rng.random_range(1..=(n / 4).max(1));
            let lo = rng.random_range(0..=n - m);
            let window = Window::with_len(lo, m).expect("nonzero length");
            let mut values = vec![0.0; n];
            if t % 10 != 9 {
                for v in &mut values[window.range()] {
                    *v = rng.random::<f64>();
                }
            } else {
                // Keep the stream aligned with the nonzero trials.
                for _ in window.range() {
                    let _: f64 = rng.random();
                }
            }
            NondegeneracyTrial { window, values }
        })
        .collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn check_constant(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(param("C", format!("must be positive, got {c}")))
    }
}

/// Tracks the worst ratio and where it happened.
struct Worst {
    ratio: f64,
    witness: Option<NondegeneracyWitness>,
}

impl Worst {
    fn new() -> Self {
        Self {
            ratio: 0.0,
            witness: None,
        }
    }

    fn update(&mut self, r: f64, w: impl FnOnce() -> NondegeneracyWitness) {
        if self.witness.is_none() || r > self.ratio {
            self.ratio = r;
            self.witness = Some(w());
        }
    }
}

/// `avg_Q f ≤ C·|H(fχ_Q)(x)|` for every grid cell `x` in `(Q + ℓ) ∪ (Q − ℓ)`,
/// with `ℓ` the window length.
pub fn nondegeneracy_check_shifted(
    grid: &Grid1D,
    c: f64,
    trials: usize,
    seed: u64,
) -> Result<NondegeneracyReport> {
    check_constant(c)?;
    let n = grid.cells();
    let mut worst = Worst::new();
    let mut skipped = 0;
    for (t, trial) in nondegeneracy_trials(grid, trials, seed).iter().enumerate() {
        let q = trial.window;
        let m = q.len();
        let avg = pairwise_sum_by(m, |i| trial.values[q.lo() + i]) / m as f64;
        let shift = m as isize;
        let cells: Vec<usize> = [-shift, shift]
            .iter()
            .flat_map(|&s| {
                (q.lo() as isize + s..=q.hi() as isize + s)
                    .filter(|&x| x >= 0 && (x as usize) < n)
                    .map(|x| x as usize)
            })
            .collect();
        if cells.is_empty() {
            skipped += 1;
            continue;
        }
        for &x in &cells {
            let r = ratio(avg, hilbert_of_window_at(&trial.values, q, x).abs());
            worst.update(r, || NondegeneracyWitness {
                trial: t,
                window: q,
                paired: None,
                cell: x,
            });
        }
    }
    Ok(NondegeneracyReport {
        mode: NondegeneracyMode::Shifted,
        constant: c,
        trials,
        skipped,
        worst_ratio: worst.ratio,
        pass: worst.ratio <= c,
        witness: worst.witness,
        worst_ratio_paired: None,
        witness_paired: None,
    })
}

/// With `Q' = Q + ℓ`: `avg_Q f ≤ C·|H(fχ_Q)(x)|` on `Q'`, and
/// `1 ≤ C·|H(χ_{Q'})(x)|` on `Q`. Trials whose `Q'` leaves the grid are
/// skipped.
pub fn nondegeneracy_check_paired(
    grid: &Grid1D,
    c: f64,
    trials: usize,
    seed: u64,
) -> Result<NondegeneracyReport> {
    check_constant(c)?;
    let n = grid.cells();
    let mut cond1 = Worst::new();
    let mut cond2 = Worst::new();
    let mut skipped = 0;
    let mut ones = vec![0.0; n];
    for (t, trial) in nondegeneracy_trials(grid, trials, seed).iter().enumerate() {
        let q = trial.window;
        let m = q.len();
        let qp = match q.shifted(m as isize) {
            Some(w) if w.hi() < n => w,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let avg = pairwise_sum_by(m, |i| trial.values[q.lo() + i]) / m as f64;
        for x in qp.range() {
            let r = ratio(avg, hilbert_of_window_at(&trial.values, q, x).abs());
            cond1.update(r, || NondegeneracyWitness {
                trial: t,
                window: q,
                paired: Some(qp),
                cell: x,
            });
        }
        for v in &mut ones[qp.range()] {
            *v = 1.0;
        }
        for x in q.range() {
            let r = ratio(1.0, hilbert_of_window_at(&ones, qp, x).abs());
            cond2.update(r, || NondegeneracyWitness {
                trial: t,
                window: q,
                paired: Some(qp),
                cell: x,
            });
        }
        for v in &mut ones[qp.range()] {
            *v = 0.0;
        }
    }
    let pass = cond1.ratio <= c && cond2.ratio <= c;
    Ok(NondegeneracyReport {
        mode: NondegeneracyMode::Paired,
        constant: c,
        trials,
        skipped,
        worst_ratio: cond1.ratio,
        witness: cond1.witness,
        worst_ratio_paired: Some(cond2.ratio),
        witness_paired: cond2.witness,
        pass,
    })
}
