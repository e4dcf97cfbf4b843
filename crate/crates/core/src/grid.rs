//! Uniform 1-D grids, piecewise-constant functions on them, and cell windows.
//!
//! A function is constant on each cell `[origin + i·h, origin + (i+1)·h)`.
//! Cubes are modelled by [`Window`]s, contiguous runs of whole cells, so every
//! supremum over cubes becomes a finite maximum and every rearrangement is an
//! exact order statistic.
//!
//! Suprema only range over windows that fit inside the grid (no wrap-around),
//! so every constant computed on a grid is a lower bound for its continuum
//! counterpart.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Slack used when a product like `λ·m` or `c·m` should land on an integer
/// but picks up rounding error (`0.05 * 40 = 2.0000000000000004`).
const SNAP: f64 = 1e-9;

pub(crate) fn snapped_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

pub(crate) fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    origin: f64,
    h: f64,
    cells: usize,
}

impl Grid1D {
    pub fn new(origin: f64, h: f64, cells: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(param("origin", "must be finite"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(param("h", format!("cell width must be positive, got {h}")));
        }
        if cells == 0 {
            return Err(param("cells", "a grid needs at least one cell"));
        }
        Ok(Self { origin, h, cells })
    }

    /// Grid covering `[-radius, radius]` with an even number of cells, so that
    /// no cell center sits at the origin.
    pub fn symmetric(radius: f64, cells: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(param("radius", format!("must be positive, got {radius}")));
        }
        if cells == 0 || !cells.is_multiple_of(2) {
            return Err(param(
                "cells",
                format!("symmetric grids need an even, nonzero cell count, got {cells}"),
            ));
        }
        Self::new(-radius, 2.0 * radius / cells as f64, cells)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(|i| self.center(i))
    }

    pub fn measure(&self) -> f64 {
        self.cells as f64 * self.h
    }

    /// Largest `|x|` over the covered interval.
    pub fn radius(&self) -> f64 {
        self.origin.abs().max((self.origin + self.measure()).abs())
    }

    pub fn full_window(&self) -> Window {
        Window {
            lo: 0,
            hi: self.cells - 1,
        }
    }

    pub fn fits(&self, q: Window) -> bool {
        q.hi < self.cells
    }

    pub(crate) fn check_window(&self, q: Window) -> Result<()> {
        if self.fits(q) {
            Ok(())
        } else {
            Err(Error::WindowOutOfGrid {
                lo: q.lo,
                hi: q.hi,
                cells: self.cells,
            })
        }
    }

    /// Cell-aligned window whose centers lie in `[a, b]`, if any.
    pub fn window_covering(&self, a: f64, b: f64) -> Option<Window> {
        let lo = (0..self.cells).find(|&i| self.center(i) >= a)?;
        let hi = (0..self.cells).rev().find(|&i| self.center(i) <= b)?;
        (lo <= hi).then_some(Window { lo, hi })
    }
}

/// Contiguous run of cells `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    lo: usize,
    hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(param("window", format!("lo {lo} exceeds hi {hi}")));
        }
        Ok(Self { lo, hi })
    }

    /// Window of `len` cells starting at `lo`.
    pub fn with_len(lo: usize, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(param("window", "a window covers at least one cell"));
        }
        Self::new(lo, lo + len - 1)
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    /// Cell count `m`.
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn contains_window(&self, other: Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }

    pub fn measure(&self, grid: &Grid1D) -> f64 {
        self.len() as f64 * grid.h()
    }

    /// Midpoint of the covered coordinates.
    pub fn center(&self, grid: &Grid1D) -> f64 {
        grid.origin() + (self.lo + self.hi + 1) as f64 * 0.5 * grid.h()
    }

    /// Window shifted by `offset` cells, if it stays at nonnegative indices.
    pub fn shifted(&self, offset: isize) -> Option<Window> {
        let lo = self.lo as isize + offset;
        let hi = self.hi as isize + offset;
        (lo >= 0).then_some(Window {
            lo: lo as usize,
            hi: hi as usize,
        })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{};{}]", self.lo, self.hi)
    }
}

/// Distinct, sorted cells inside a parent window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSet {
    parent: Window,
    cells: Vec<usize>,
}

impl CellSet {
    pub fn new(parent: Window, cells: Vec<usize>) -> Result<Self> {
        if cells.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "cell set must be sorted and distinct".into(),
            ));
        }
        if let Some(&bad) = cells.iter().find(|&&c| !parent.contains(c)) {
            return Err(Error::Validation(format!(
                "cell {bad} lies outside {parent}"
            )));
        }
        Ok(Self { parent, cells })
    }

    pub fn parent(&self) -> Window {
        self.parent
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn measure(&self, grid: &Grid1D) -> f64 {
        self.cells.len() as f64 * grid.h()
    }
}

/// A selection of cells that a weight can be integrated over.
pub trait CellSelection {
    /// Pairwise sum of `values` over the selected cells.
    fn sum_of(&self, values: &[f64]) -> f64;
    fn cell_count(&self) -> usize;
    fn max_cell(&self) -> Option<usize>;
}

impl CellSelection for Window {
    fn sum_of(&self, values: &[f64]) -> f64 {
        pairwise_sum(&values[self.range()])
    }

    fn cell_count(&self) -> usize {
        self.len()
    }

    fn max_cell(&self) -> Option<usize> {
        Some(self.hi)
    }
}

impl CellSelection for CellSet {
    fn sum_of(&self, values: &[f64]) -> f64 {
        pairwise_sum_by(self.cells.len(), |i| values[self.cells[i]])
    }

    fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn max_cell(&self) -> Option<usize> {
        self.cells.last().copied()
    }
}

/// A real function, constant on each cell of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Shape {
                left: grid.cells(),
                right: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "value at cell {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Function sampled at cell centers.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid1D, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.cells()])
    }

    /// Indicator of a window.
    pub fn indicator(grid: Grid1D, q: Window) -> Result<Self> {
        grid.check_window(q)?;
        let values = (0..grid.cells())
            .map(|i| if q.contains(i) { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { grid, values })
    }

    /// Internal constructor for operator outputs that are finite by
    /// construction.
    pub(crate) fn from_parts(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// Cellwise `|f|^r`.
    pub fn abs_pow(&self, r: f64) -> GridFunction {
        self.map(|v| v.abs().powf(r))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `h·Σ values`, pairwise.
    pub fn integral(&self) -> f64 {
        self.grid.h() * pairwise_sum(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

/// Nonnegative grid function. Cells may carry `+∞` (used by dual weights of
/// weights that vanish somewhere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight(GridFunction);

impl Weight {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Shape {
                left: grid.cells(),
                right: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Validation(format!(
                "weight value at cell {i} is negative or NaN ({})",
                values[i]
            )));
        }
        Ok(Self(GridFunction { grid, values }))
    }

    pub fn from_function(f: GridFunction) -> Result<Self> {
        Self::new(f.grid, f.values)
    }

    pub fn constant(grid: Grid1D, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.cells()])
    }

    pub fn grid(&self) -> &Grid1D {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_infinite_cell(&self) -> bool {
        self.values().iter().any(|v| v.is_infinite())
    }

    /// View as a plain grid function. Fails if any cell is infinite.
    pub fn to_function(&self) -> Result<GridFunction> {
        GridFunction::new(*self.grid(), self.values().to_vec())
    }
}

/// `(1/m)·Σ_{i∈Q} |f_i|`.
pub fn window_average(f: &GridFunction, q: Window) -> Result<f64> {
    f.grid().check_window(q)?;
    let vals = &f.values()[q.range()];
    Ok(pairwise_sum_by(vals.len(), |i| vals[i].abs()) / q.len() as f64)
}

/// Number of window values that may exceed the rearrangement level:
/// `k = ⌊λ·m⌋`. The rearrangement is then the `(k+1)`-th largest value.
pub fn rearrangement_rank(lambda: f64, m: usize) -> usize {
    snapped_floor(lambda * m as f64) as usize
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(param("lambda", format!("must lie in (0, 1), got {lambda}")))
    }
}

/// `(fχ_Q)^*(λ|Q|)`: the smallest level `α ≥ 0` such that at most `λ|Q|` of
/// the window's measure has `|f| > α`.
pub fn rearrangement_value(f: &GridFunction, q: Window, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    f.grid().check_window(q)?;
    let mut vals: Vec<f64> = f.values()[q.range()].iter().map(|v| v.abs()).collect();
    Ok(kth_largest(&mut vals, rearrangement_rank(lambda, q.len())))
}

/// The `(k+1)`-th largest entry, or 0 when `k` runs past the end.
pub(crate) fn kth_largest(vals: &mut [f64], k: usize) -> f64 {
    if k >= vals.len() {
        return 0.0;
    }
    let (_, v, _) = vals.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    *v
}

/// `(h·Σ|f_i|^p·w_i)^{1/p}`, with the convention `0·∞ = 0`.
pub fn lp_w_norm(f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(param("p", format!("must be positive, got {p}")));
    }
    if f.len() != w.len() {
        return Err(Error::Shape {
            left: f.len(),
            right: w.len(),
        });
    }
    let fv = f.values();
    let wv = w.values();
    let s = pairwise_sum_by(fv.len(), |i| {
        let a = fv[i].abs();
        if a == 0.0 || wv[i] == 0.0 {
            0.0
        } else {
            a.powf(p) * wv[i]
        }
    });
    Ok((f.grid().h() * s).powf(1.0 / p))
}

/// Result of concentric scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledWindow {
    pub window: Window,
    /// True if the scaled window had to be cut at a grid edge.
    pub clamped: bool,
}

/// Concentric scaling `cQ`: `max(1, ⌈c·m⌉)` cells around Q's center, shifted
/// half a cell toward lower indices when the centered placement is fractional,
/// then clamped to the grid.
pub fn scale_window(grid: &Grid1D, q: Window, c: f64) -> Result<ScaledWindow> {
    grid.check_window(q)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(param(
            "c",
            format!("scale factor must be positive, got {c}"),
        ));
    }
    let m = q.len();
    let scaled = (snapped_ceil(c * m as f64) as i64).max(1);
    // Twice the center, in cell-edge units.
    let twice_center = (q.lo + q.hi + 1) as i64;
    let lo = (twice_center - scaled).div_euclid(2);
    let hi = lo + scaled - 1;
    let last = grid.cells() as i64 - 1;
    let clamped = lo < 0 || hi > last;
    let window = Window {
        lo: lo.max(0) as usize,
        hi: hi.min(last) as usize,
    };
    Ok(ScaledWindow { window, clamped })
}

/// `w(S) = h·Σ_{i∈S} w_i`.
pub fn weighted_measure<S: CellSelection>(w: &Weight, s: &S) -> Result<f64> {
    if let Some(c) = s.max_cell() {
        if c >= w.len() {
            return Err(Error::Validation(format!(
                "cell {c} outside a grid of {} cells",
                w.len()
            )));
        }
    }
    Ok(w.grid().h() * s.sum_of(w.values()))
}

/// The `k` heaviest cells of `Q` (ties go to the lower index).
pub fn heaviest_subset(w: &Weight, q: Window, k: usize) -> Result<CellSet> {
    w.grid().check_window(q)?;
    if k == 0 || k > q.len() {
        return Err(param("k", format!("must lie in 1..={}, got {k}", q.len())));
    }
    let vals = w.values();
    let mut idx: Vec<usize> = q.range().collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    CellSet::new(q, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    fn func(vals: &[f64]) -> GridFunction {
        GridFunction::new(unit_grid(vals.len()), vals.to_vec()).unwrap()
    }

    fn win(lo: usize, hi: usize) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(-1.0, 0.5, 4).unwrap();
        assert_eq!(g.center(0), -0.75);
        assert_eq!(g.center(3), 0.75);
        assert_eq!(g.measure(), 2.0);
        assert!(Grid1D::new(0.0, 0.0, 3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 0).is_err());
        assert!(Grid1D::symmetric(1.0, 3).is_err());
        let s = Grid1D::symmetric(8.0, 512).unwrap();
        assert!(s.centers().all(|x| x != 0.0));
    }

    #[test]
    fn window_average_examples() {
        assert_eq!(
            window_average(&func(&[1.0, 2.0, 3.0]), win(0, 2)).unwrap(),
            2.0
        );
        assert_eq!(window_average(&func(&[-3.0; 5]), win(1, 3)).unwrap(), 3.0);
        // Prefix sums 0, 10, 10, 20 over three cells.
        assert_eq!(
            window_average(&func(&[10.0, 0.0, 10.0]), win(0, 2)).unwrap(),
            20.0 / 3.0
        );
        assert!(window_average(&func(&[1.0]), win(0, 1)).is_err());
    }

    /// Smallest α among candidate levels with `#{|f| > α} ≤ λm`, enumerated
    /// straight from the distribution-function definition.
    fn rearrangement_by_definition(vals: &[f64], lambda: f64) -> f64 {
        let m = vals.len() as f64;
        let mut levels: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        levels.push(0.0);
        levels.sort_by(f64::total_cmp);
        levels
            .into_iter()
            .find(|&a| vals.iter().filter(|v| v.abs() > a).count() as f64 <= lambda * m)
            .unwrap()
    }

    #[test]
    fn rearrangement_examples() {
        let f = func(&[3.0, 1.0, 2.0]);
        assert_eq!(rearrangement_value(&f, win(0, 2), 0.5).unwrap(), 2.0);
        assert_eq!(rearrangement_value(&f, win(0, 2), 0.9).unwrap(), 1.0);
        assert_eq!(rearrangement_by_definition(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(rearrangement_by_definition(&[3.0, 1.0, 2.0], 0.9), 1.0);
        let c = func(&[-4.0; 6]);
        for lambda in [0.1, 0.5, 0.99] {
            assert_eq!(rearrangement_value(&c, win(0, 5), lambda).unwrap(), 4.0);
        }
        assert!(rearrangement_value(&f, win(0, 2), 0.0).is_err());
        assert!(rearrangement_value(&f, win(0, 2), 1.0).is_err());
    }

    #[test]
    fn rank_snaps_decimal_products() {
        assert_eq!(rearrangement_rank(0.3, 10), 3);
        assert_eq!(rearrangement_rank(0.7, 10), 7);
        assert_eq!(rearrangement_rank(0.05, 40), 2);
        assert_eq!(rearrangement_rank(0.5, 3), 1);
    }

    #[test]
    fn lp_w_norm_examples() {
        let g = unit_grid(4);
        let one = GridFunction::constant(g, 1.0).unwrap();
        let w1 = Weight::constant(g, 1.0).unwrap();
        assert_eq!(lp_w_norm(&one, &w1, 2.0).unwrap(), 2.0);
        let w0 = Weight::constant(g, 0.0).unwrap();
        assert_eq!(
            lp_w_norm(&func(&[1.0, -7.0, 2.0, 3.0]), &w0, 3.0).unwrap(),
            0.0
        );
        let g2 = unit_grid(2);
        let f = GridFunction::new(g2, vec![1.0, 2.0]).unwrap();
        let w = Weight::new(g2, vec![1.0, 4.0]).unwrap();
        assert_eq!(lp_w_norm(&f, &w, 2.0).unwrap(), 17f64.sqrt());
    }

    #[test]
    fn scale_window_examples() {
        let g = unit_grid(16);
        let q = win(4, 7);
        assert_eq!(scale_window(&g, q, 1.0).unwrap().window, q);
        let twice = scale_window(&g, q, 2.0).unwrap();
        assert_eq!(twice.window, win(2, 9));
        assert!(!twice.clamped);
        assert_eq!(scale_window(&g, q, 0.5).unwrap().window, win(5, 6));
        // Odd count in an even window: shift half a cell left.
        assert_eq!(scale_window(&g, q, 0.75).unwrap().window, win(4, 6));
        let big = scale_window(&g, q, 5.0).unwrap();
        assert!(big.clamped);
        assert_eq!(big.window, win(0, 15));
        assert_eq!(scale_window(&g, q, 1e-6).unwrap().window.len(), 1);
        assert_eq!(scale_window(&g, win(0, 7), 0.05).unwrap().window.len(), 1);
    }

    #[test]
    fn weighted_measure_examples() {
        let g = Grid1D::new(0.0, 0.5, 3).unwrap();
        let w = Weight::new(g, vec![1.0, 0.0, 4.0]).unwrap();
        let s = CellSet::new(win(0, 2), vec![0, 2]).unwrap();
        assert_eq!(weighted_measure(&w, &s).unwrap(), 2.5);
        let empty = CellSet::new(win(0, 2), vec![]).unwrap();
        assert_eq!(weighted_measure(&w, &empty).unwrap(), 0.0);
        let ones = Weight::constant(unit_grid(9), 1.0).unwrap();
        assert_eq!(weighted_measure(&ones, &win(2, 6)).unwrap(), 5.0);
    }

    #[test]
    fn heaviest_subset_examples() {
        let g = unit_grid(4);
        let flat = Weight::constant(g, 2.0).unwrap();
        assert_eq!(
            heaviest_subset(&flat, win(0, 3), 2).unwrap().cells(),
            &[0, 1]
        );
        let w = Weight::new(g, vec![4.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(heaviest_subset(&w, win(0, 3), 1).unwrap().cells(), &[0]);
        assert_eq!(
            heaviest_subset(&w, win(1, 3), 3).unwrap().cells(),
            &[1, 2, 3]
        );
        assert!(heaviest_subset(&w, win(0, 3), 0).is_err());
        assert!(heaviest_subset(&w, win(0, 3), 5).is_err());
    }

    #[test]
    fn cell_set_validation() {
        assert!(CellSet::new(win(2, 4), vec![3, 2]).is_err());
        assert!(CellSet::new(win(2, 4), vec![1]).is_err());
        assert!(CellSet::new(win(2, 4), vec![2, 4]).is_ok());
    }

    #[test]
    fn weights_reject_negative_values() {
        assert!(Weight::new(unit_grid(2), vec![1.0, -0.5]).is_err());
        assert!(Weight::new(unit_grid(2), vec![1.0, f64::INFINITY]).is_ok());
        assert!(GridFunction::new(unit_grid(2), vec![1.0, f64::NAN]).is_err());
    }

    fn vals_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..24)
    }

    proptest! {
        #[test]
        fn rearrangement_matches_definition(vals in vals_strategy(), lambda in 0.01f64..0.99) {
            let f = func(&vals);
            let q = f.grid().full_window();
            prop_assert_eq!(
                rearrangement_value(&f, q, lambda).unwrap(),
                rearrangement_by_definition(&vals, lambda)
            );
        }

        #[test]
        fn rearrangement_monotone(vals in vals_strategy(), a in 0.01f64..0.99, b in 0.01f64..0.99, bump in 0.0f64..3.0) {
            let f = func(&vals);
            let q = f.grid().full_window();
            let (l1, l2) = if a <= b { (a, b) } else { (b, a) };
            let v1 = rearrangement_value(&f, q, l1).unwrap();
            let v2 = rearrangement_value(&f, q, l2).unwrap();
            prop_assert!(v1 >= v2);
            prop_assert!(v1 <= f.max_abs() && v2 >= 0.0);
            let bigger = f.map(|v| v.abs() + bump);
            prop_assert!(rearrangement_value(&bigger, q, l1).unwrap() >= v1);
        }

        #[test]
        fn average_between_extremes(vals in vals_strategy(), s in 0usize..24, t in 0usize..24) {
            let f = func(&vals);
            let n = vals.len();
            let (lo, hi) = (s.min(t) % n, s.max(t) % n);
            let q = win(lo.min(hi), lo.max(hi));
            let avg = window_average(&f, q).unwrap();
            let abs: Vec<f64> = vals[q.range()].iter().map(|v| v.abs()).collect();
            let mn = abs.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = abs.iter().cloned().fold(0.0, f64::max);
            prop_assert!(avg >= mn * (1.0 - 1e-12) && avg <= mx * (1.0 + 1e-12));
        }

        #[test]
        fn scaling_idempotent_under_unit_factor(lo in 0usize..40, len in 1usize..20, c in 0.1f64..4.0) {
            let g = unit_grid(64);
            let q = Window::with_len(lo, len).unwrap();
            let s = scale_window(&g, q, c).unwrap().window;
            prop_assert_eq!(scale_window(&g, s, 1.0).unwrap().window, s);
            if c >= 1.0 {
                let sc = scale_window(&g, q, c).unwrap();
                prop_assert!(sc.window.contains_window(q));
            }
        }

        #[test]
        fn measure_additive(vals in prop::collection::vec(0.0f64..5.0, 2..20), split in 0usize..20) {
            let g = unit_grid(vals.len());
            let w = Weight::new(g, vals.clone()).unwrap();
            let full = g.full_window();
            let cut = split % (vals.len() - 1);
            let left = CellSet::new(full, (0..=cut).collect()).unwrap();
            let right = CellSet::new(full, (cut + 1..vals.len()).collect()).unwrap();
            let total = weighted_measure(&w, &full).unwrap();
            let parts = weighted_measure(&w, &left).unwrap() + weighted_measure(&w, &right).unwrap();
            prop_assert!((total - parts).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn heaviest_subset_is_optimal(vals in prop::collection::vec(0.0f64..5.0, 1..=12), k in 1usize..=12) {
            let m = vals.len();
            let k = (k - 1) % m + 1;
            let g = unit_grid(m);
            let w = Weight::new(g, vals.clone()).unwrap();
            let q = g.full_window();
            let best = weighted_measure(&w, &heaviest_subset(&w, q, k).unwrap()).unwrap();
            let mut brute = 0.0f64;
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let cells: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
                let s = CellSet::new(q, cells).unwrap();
                brute = brute.max(weighted_measure(&w, &s).unwrap());
            }
            prop_assert!((best - brute).abs() <= 1e-12 * brute.max(1.0));
        }
    }
}
