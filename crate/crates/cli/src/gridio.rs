//! Grid functions as CSV: header `x,value`, one row per cell center.

use std::path::Path;

use maxlab_core::ext_float::format_f64;
use maxlab_core::{Grid1D, GridFunction};

#[derive(Debug, serde::Deserialize)]
struct Row {
    x: f64,
    value: f64,
}

/// Reads `x,value` rows and checks that the `x` column matches the cell
/// centers of `grid` (to within a millionth of a cell).
pub fn read_grid_csv(path: &Path, grid: Grid1D) -> Result<Vec<f64>, String> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = reader
        .headers()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if headers != vec!["x", "value"] {
        return Err(format!(
            "{}: expected header x,value, got {headers:?}",
            path.display()
        ));
    }
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if rows.len() != grid.cells() {
        return Err(format!(
            "{}: {} rows for a grid of {} cells",
            path.display(),
            rows.len(),
            grid.cells()
        ));
    }
    for (i, (row, c)) in rows.iter().zip(grid.centers()).enumerate() {
        if (row.x - c).abs() > 1e-6 * grid.h() {
            return Err(format!(
                "{}: row {i} has x = {}, cell center is {c}",
                path.display(),
                row.x
            ));
        }
    }
    Ok(rows.into_iter().map(|r| r.value).collect())
}

pub fn write_grid_csv(path: &Path, f: &GridFunction) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "value"])?;
    for (x, v) in f.grid().centers().zip(f.values()) {
        w.write_record([format_f64(x), format_f64(*v)])?;
    }
    w.flush()
}
