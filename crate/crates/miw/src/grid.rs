//! Axis-aligned uniform grids and scalar fields defined on them.

use crate::{MiwError, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Axis-aligned box with the same number of points per side on every axis.
///
/// Nodes include both endpoints; flat indices are row-major with axis 0
/// slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: usize) -> Result<Self> {
        let spec = GridSpec { lo, hi, points };
        spec.validate()?;
        Ok(spec)
    }

    /// Cube [lo, hi]^d.
    pub fn cubic(d: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], points)
    }

    /// Default boxes: [-2, 2] A per axis with 200/40/15 points per side
    /// for 1, 2 and 3 dimensions.
    pub fn preset(d: usize) -> Result<Self> {
        let points = match d {
            1 => 200,
            2 => 40,
            3 => 15,
            _ => return Err(MiwError::InvalidGrid(format!("unsupported dimension {d}"))),
        };
        Self::cubic(d, -2.0, 2.0, points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(MiwError::InvalidGrid("axis extents mismatch".into()));
        }
        if self.points < 8 {
            return Err(MiwError::InvalidGrid(format!(
                "need at least 8 points per side, got {}",
                self.points
            )));
        }
        for (lo, hi) in self.lo.iter().zip(&self.hi) {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(MiwError::InvalidGrid(format!("bad extent [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Total number of nodes, points^D.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points - 1) as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.step(a)).product()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lo[a] + i as f64 * self.step(a))
            .collect()
    }
}

/// Scalar density values on a grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MiwError::InvalidGrid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridField { grid, values })
    }

    /// Riemann-sum integral over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescale so the Riemann-sum integral equals 1.
    pub fn normalize(&mut self) -> Result<()> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(MiwError::FlatDensity);
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(())
    }

    /// Second-difference Laplacian at every node, with the field treated
    /// as zero outside the box.
    pub fn laplacian(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let n = self.grid.points;
        let mut lap = vec![0.0; self.values.len()];
        for flat in 0..self.values.len() {
            let idx = self.grid.multi_index(flat);
            let mut acc = 0.0;
            for a in 0..d {
                let h2 = self.grid.step(a).powi(2);
                let mut up = idx.clone();
                let prev = if idx[a] > 0 {
                    up[a] = idx[a] - 1;
                    self.values[self.grid.flat_index(&up)]
                } else {
                    0.0
                };
                let next = if idx[a] + 1 < n {
                    up[a] = idx[a] + 1;
                    self.values[self.grid.flat_index(&up)]
                } else {
                    0.0
                };
                acc += (prev - 2.0 * self.values[flat] + next) / h2;
            }
            lap[flat] = acc;
        }
        lap
    }

    /// One row per node: coordinates then value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        let header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
        writeln!(w, "{},density", header.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let coords: Vec<String> = self
                .grid
                .node(flat)
                .iter()
                .map(|c| format!("{c:.10e}"))
                .collect();
            writeln!(w, "{},{v:.10e}", coords.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_expected_sizes() {
        assert_eq!(GridSpec::preset(1).unwrap().len(), 200);
        assert_eq!(GridSpec::preset(2).unwrap().len(), 1600);
        assert_eq!(GridSpec::preset(3).unwrap().len(), 3375);
    }

    #[test]
    fn flat_and_multi_index_roundtrip() {
        let g = GridSpec::cubic(3, -2.0, 2.0, 15).unwrap();
        for flat in [0usize, 1, 14, 15, 224, 3374] {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.node(0), vec![-2.0, -2.0, -2.0]);
        let last = g.node(g.len() - 1);
        for c in last {
            assert!((c - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(GridSpec::cubic(1, 0.0, 0.0, 200).is_err());
        assert!(GridSpec::cubic(1, -1.0, 1.0, 4).is_err());
    }

    #[test]
    fn normalization_fixes_integral() {
        let g = GridSpec::cubic(1, -2.0, 2.0, 200).unwrap();
        let values: Vec<f64> = (0..g.len())
            .map(|i| (-g.node(i)[0].powi(2)).exp())
            .collect();
        let mut f = GridField::new(g, values).unwrap();
        f.normalize().unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-12);
    }
}
