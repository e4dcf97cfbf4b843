//! A discrete laboratory for weighted norm inequalities on 1-D grids.
//!
//! The crate models functions as piecewise constant on uniform cells and
//! cubes as cell windows. On top of that it provides the Hardy–Littlewood
//! maximal operator and its relatives ([`maximal`]), Muckenhoupt-type weight
//! constants ([`weights`]), a discrete Hilbert transform with non-degeneracy
//! checks ([`singular`]) and a suite of pointwise and norm inequality checks
//! ([`checks`]).

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected;
// index loops mirror the prefix-sum formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod error;
pub mod ext_float;
pub mod family;
pub mod grid;
pub mod maximal;
pub mod singular;
pub mod sum;
pub mod weights;

pub use checks::{CheckReport, Params, Status, Witness};
pub use error::{Error, Result};
pub use family::{make_test_family, FamilyKind, FamilySpec, Member, TestFamily};
pub use grid::{
    heaviest_subset, lp_w_norm, rearrangement_value, scale_window, weighted_measure,
    window_average, CellSelection, CellSet, Grid1D, GridFunction, ScaledWindow, Weight, Window,
};
pub use maximal::{
    local_maximal, local_maximal_oracle, maximal, maximal_of_indicator, maximal_oracle, maximal_r,
    sharp, sharp_delta, truncate_f_n, TruncationLevel,
};
pub use singular::{
    hilbert, hilbert_truncated_max, nondegeneracy_check_paired, nondegeneracy_check_shifted,
    KernelModel, NondegeneracyReport,
};
pub use weights::{
    ainfty_estimate, am_functional, ap_constant, cp_estimate, doubling_constant, dual_weight,
    make_weight, np_integral, perturb_weight, ConstantEstimate, WeightSpec, WindowFamily,
};
