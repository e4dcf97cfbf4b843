//! Seeded randomized sweeps of the pointwise checks.
//!
//! Draw `i` of a sweep is generated from its own ChaCha8 stream, so a
//! failing configuration can be regenerated from `(seed, i)` alone; the
//! merged report names it in the witness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction, Window};

use super::{
    check_chebyshev, check_local_maximal_oracle, check_local_of_maximal, check_maximal_oracle,
    check_mla, check_prop_splitting, hilbert_l2_check, merge_reports, sharp_delta_bound_check,
    CheckReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseCheck {
    Chebyshev,
    PropSplitting,
    Mla,
    SharpDeltaBound,
    LocalOfMaximal,
    HilbertL2,
    OracleMaximal,
    OracleLocalMaximal,
}

impl PointwiseCheck {
    pub const ALL: [PointwiseCheck; 8] = [
        PointwiseCheck::Chebyshev,
        PointwiseCheck::PropSplitting,
        PointwiseCheck::Mla,
        PointwiseCheck::SharpDeltaBound,
        PointwiseCheck::LocalOfMaximal,
        PointwiseCheck::HilbertL2,
        PointwiseCheck::OracleMaximal,
        PointwiseCheck::OracleLocalMaximal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PointwiseCheck::Chebyshev => "chebyshev",
            PointwiseCheck::PropSplitting => "prop_splitting",
            PointwiseCheck::Mla => "mla",
            PointwiseCheck::SharpDeltaBound => "sharp_delta_bound",
            PointwiseCheck::LocalOfMaximal => "local_of_maximal",
            PointwiseCheck::HilbertL2 => "hilbert_l2",
            PointwiseCheck::OracleMaximal => "oracle_maximal",
            PointwiseCheck::OracleLocalMaximal => "oracle_local_maximal",
        }
    }
}

/// One random configuration: uniform `[0, 1)` values per cell and the
/// scalar parameters every pointwise check may need.
#[derive(Debug, Clone)]
pub struct SweepDraw {
    pub f: GridFunction,
    pub window: Window,
    pub tau: f64,
    /// `r ≥ 1` (Chebyshev).
    pub r_cheb: f64,
    /// `r > 1` (splitting).
    pub r_split: f64,
    pub lambda: f64,
    pub delta: f64,
}

pub fn sweep_draw(grid: &Grid1D, seed: u64, i: usize) -> SweepDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let n = grid.cells();
    let vals: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let len = rng.random_range(1..=n);
    let lo = rng.random_range(0..=n - len);
    SweepDraw {
        f: GridFunction::new(*grid, vals).expect("finite values"),
        window: Window::with_len(lo, len).expect("nonzero length"),
        tau: rng.random_range(0.01..0.99),
        r_cheb: rng.random_range(1.0..4.0),
        r_split: rng.random_range(1.05..4.0),
        lambda: rng.random_range(0.05..0.95),
        delta: rng.random_range(0.1..=1.0),
    }
}

/// Runs `check` on draws `0..configs` and merges the reports. Oracle checks
/// add `perturbation` to the oracle side (nonzero only in failure fixtures).
pub fn run_sweep(
    check: PointwiseCheck,
    grid: &Grid1D,
    configs: usize,
    seed: u64,
    perturbation: f64,
) -> Result<CheckReport> {
    if configs == 0 {
        return Err(Error::Validation(
            "a sweep needs at least one configuration".into(),
        ));
    }
    let reports: Vec<CheckReport> = (0..configs)
        .into_par_iter()
        .map(|i| {
            let d = sweep_draw(grid, seed, i);
            let mut r = match check {
                PointwiseCheck::Chebyshev => check_chebyshev(&d.f, d.window, d.tau, d.r_cheb)?,
                PointwiseCheck::PropSplitting => check_prop_splitting(&d.f, d.r_split, d.lambda)?,
                PointwiseCheck::Mla => check_mla(&d.f, d.lambda, d.delta)?,
                PointwiseCheck::SharpDeltaBound => sharp_delta_bound_check(&d.f, d.delta)?,
                PointwiseCheck::LocalOfMaximal => check_local_of_maximal(&d.f, d.lambda)?,
                PointwiseCheck::HilbertL2 => hilbert_l2_check(&d.f),
                PointwiseCheck::OracleMaximal => check_maximal_oracle(&d.f, perturbation)?,
                PointwiseCheck::OracleLocalMaximal => {
                    check_local_maximal_oracle(&d.f, d.lambda, perturbation)?
                }
            };
            let member = format!("uniform(seed={seed};draw={i})");
            let mut w = r.witness.take().unwrap_or_default();
            w.member = Some(member);
            r.witness = Some(w);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(merge_reports(check.name(), reports).expect("at least one configuration"))
}
