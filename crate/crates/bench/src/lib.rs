//! Input fixtures shared by the benchmark targets.

use maxlab_core::{Grid1D, GridFunction, Weight};

/// Deterministic, non-smooth test input on `[-8, 8]`.
pub fn rough_function(cells: usize) -> GridFunction {
    let grid = Grid1D::symmetric(8.0, cells).expect("even cell count");
    GridFunction::from_fn(grid, |x| (3.7 * x).sin().abs() + (x * x * 0.9).cos() * 0.5)
        .expect("finite samples")
}

/// `|x|^a` on `[-8, 8]`.
pub fn power_weight(cells: usize, a: f64) -> Weight {
    let grid = Grid1D::symmetric(8.0, cells).expect("even cell count");
    Weight::new(grid, grid.centers().map(|x| x.abs().powf(a)).collect()).expect("nonnegative")
}
