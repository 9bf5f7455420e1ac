//! Grid-resolved sets `E` and direction fields `N`.
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DyadicCube;
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetIndicator {
    grid: Grid,
    member: Vec<bool>,
}

impl SetIndicator {
    pub fn new(grid: Grid, member: Vec<bool>) -> Result<Self> {
        if member.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "indicator has {} cells, grid has {}",
                member.len(),
                grid.len()
            )));
        }
        Ok(SetIndicator { grid, member })
    }

    pub fn empty(grid: Grid) -> Self {
        SetIndicator {
            grid,
            member: vec![false; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> bool) -> Self {
        SetIndicator {
            grid,
            member: (0..grid.len()).map(|i| f(&grid.point(i))).collect(),
        }
    }

    /// All grid points inside a dyadic cube.
    pub fn cube(grid: Grid, c: &DyadicCube) -> Self {
        let mut member = vec![false; grid.len()];
        for i in grid.points_in_cube(c) {
            member[i] = true;
        }
        SetIndicator { grid, member }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    /// Writes `<stem>.json` and a byte-per-cell `<stem>.mask`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let data = stem.with_extension("mask");
        write_header(stem, &self.grid, "mask-u8", 1, &data)?;
        std::fs::write(data, self.member.iter().map(|&m| m as u8).collect::<Vec<u8>>())?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (grid, bytes) = read_body(stem, "mask-u8")?;
        if bytes.len() != grid.len() {
            return Err(Error::Parse("mask file has the wrong length".into()));
        }
        SetIndicator::new(grid, bytes.iter().map(|&b| b != 0).collect())
    }
}

/// Piecewise-constant frequency vector per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    grid: Grid,
    values: Vec<f64>,
}

impl DirectionField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim {
            return Err(Error::InvalidParameter("direction field has the wrong length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("direction field must be finite".into()));
        }
        Ok(DirectionField { grid, values })
    }

    pub fn constant(grid: Grid, zeta: &[f64]) -> Result<Self> {
        if zeta.len() != grid.dim {
            return Err(Error::DimensionMismatch(zeta.len(), grid.dim));
        }
        DirectionField::new(grid, zeta.iter().copied().cycle().take(grid.len() * grid.dim).collect())
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * grid.dim);
        for i in 0..grid.len() {
            let v = f(&grid.point(i));
            if v.len() != grid.dim {
                return Err(Error::DimensionMismatch(v.len(), grid.dim));
            }
            values.extend(v);
        }
        DirectionField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.dim..(i + 1) * self.grid.dim]
    }

    /// Whether `N(x_i)` lies in the half-open cube.
    pub fn in_cube(&self, i: usize, c: &DyadicCube) -> bool {
        c.contains_point(self.at(i))
    }

    /// Writes `<stem>.json` and `<stem>.vec` (little-endian f64, `dim` per cell).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let data = stem.with_extension("vec");
        write_header(stem, &self.grid, "f64-le-vector", 8 * self.grid.dim, &data)?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(data, bytes)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (grid, bytes) = read_body(stem, "f64-le-vector")?;
        if bytes.len() != grid.len() * grid.dim * 8 {
            return Err(Error::Parse("vector file has the wrong length".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        DirectionField::new(grid, values)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    dim: usize,
    log2_l: i32,
    side: f64,
    s: u32,
    layout: String,
    encoding: String,
    cell_bytes: usize,
    data: String,
}

fn write_header(stem: &Path, grid: &Grid, encoding: &str, cell_bytes: usize, data: &Path) -> Result<()> {
    let h = FieldHeader {
        dim: grid.dim,
        log2_l: grid.log2_l,
        side: grid.side(),
        s: grid.s,
        layout: "row-major".into(),
        encoding: encoding.into(),
        cell_bytes,
        data: data
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&h)?)?;
    Ok(())
}

fn read_body(stem: &Path, encoding: &str) -> Result<(Grid, Vec<u8>)> {
    let h: FieldHeader = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
    if h.layout != "row-major" || h.encoding != encoding {
        return Err(Error::Parse(format!("expected {encoding} row-major data, found {}", h.encoding)));
    }
    let grid = Grid::new(h.dim, h.log2_l, h.s)?;
    Ok((grid, std::fs::read(stem.with_file_name(&h.data))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_and_round_trip() {
        let g = Grid::new(2, 3, 4).unwrap();
        let unit = DyadicCube::new(0, vec![0, 0]).unwrap();
        let e = SetIndicator::cube(g, &unit);
        assert_eq!(e.count(), 4);
        assert_eq!(e.measure(), 1.0);
        assert_eq!(SetIndicator::empty(g).measure(), 0.0);
        let n = DirectionField::from_fn(g, |x| vec![x[0] * 0.5, 1.0 - x[1]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        e.save(&dir.path().join("e")).unwrap();
        n.save(&dir.path().join("n")).unwrap();
        assert_eq!(SetIndicator::load(&dir.path().join("e")).unwrap(), e);
        assert_eq!(DirectionField::load(&dir.path().join("n")).unwrap(), n);
        assert!(SetIndicator::load(&dir.path().join("n")).is_err());
    }

    #[test]
    fn membership_is_half_open() {
        let g = Grid::new(1, 2, 2).unwrap();
        let n = DirectionField::new(g, vec![0.0, 0.5, 1.0, -0.25]).unwrap();
        let w = DyadicCube::new(0, vec![0]).unwrap();
        let hits: Vec<bool> = (0..4).map(|i| n.in_cube(i, &w)).collect();
        assert_eq!(hits, vec![true, true, false, false]);
        assert!(DirectionField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
