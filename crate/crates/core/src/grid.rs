//! Periodic grids and functions sampled on them.
//!
//! Points are linearized row-major: the last axis varies fastest. Coordinates
//! are reported in the centered fundamental domain `(-L/2, L/2]` per axis, so
//! index 0 sits at the origin and reflections map coordinates to their exact
//! negatives.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted point count per axis.
pub const MIN_AXIS_COUNT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dims: Vec<usize>,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl PeriodicGrid {
    pub fn new(dims: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Grid("at least one axis is required".into()));
        }
        if dims.len() != lengths.len() {
            return Err(Error::Grid(format!(
                "{} axis counts but {} lengths",
                dims.len(),
                lengths.len()
            )));
        }
        for (axis, (&n, &l)) in dims.iter().zip(&lengths).enumerate() {
            if n < MIN_AXIS_COUNT {
                return Err(Error::Grid(format!(
                    "axis {axis} has {n} points, need at least {MIN_AXIS_COUNT}"
                )));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Grid(format!("axis {axis} has non-positive length {l}")));
            }
        }
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len() - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let len = dims.iter().product();
        let spacing = dims.iter().zip(&lengths).map(|(&n, &l)| l / n as f64).collect();
        Ok(Self {
            dims,
            lengths,
            spacing,
            strides,
            len,
        })
    }

    /// Circle of `count` points with period `length`.
    pub fn circle(count: usize, length: f64) -> Result<Self> {
        Self::new(vec![count], vec![length])
    }

    /// Torus `[0, 2π)^d` with the given point counts.
    pub fn torus(dims: &[usize]) -> Result<Self> {
        Self::new(dims.to_vec(), vec![std::f64::consts::TAU; dims.len()])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Total number of points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len {
            Ok(())
        } else {
            Err(Error::Index {
                index,
                len: self.len,
            })
        }
    }

    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (index / s) % n)
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .zip(&self.dims)
            .map(|((&m, &s), &n)| (m % n) * s)
            .sum()
    }

    /// Index reached from `index` by moving `steps` cells per axis, with wraparound.
    pub fn shifted(&self, index: usize, steps: &[i64]) -> usize {
        let mut out = 0;
        for ((&n, &stride), &step) in self.dims.iter().zip(&self.strides).zip(steps) {
            let m = ((index / stride) % n) as i64;
            let t = (m + step).rem_euclid(n as i64);
            out += t as usize * stride;
        }
        out
    }

    /// Canonical representative of a step count on `axis`, in `(-n/2, n/2]`.
    pub fn canonical_step(&self, axis: usize, step: i64) -> i64 {
        let n = self.dims[axis] as i64;
        let d = step.rem_euclid(n);
        if 2 * d > n {
            d - n
        } else {
            d
        }
    }

    pub fn canonical_steps(&self, steps: &[i64]) -> Vec<i64> {
        steps
            .iter()
            .enumerate()
            .map(|(a, &s)| self.canonical_step(a, s))
            .collect()
    }

    /// Minimal signed cell counts from `from` to `to`; half-period ties go positive.
    pub fn wrap_steps(&self, from: usize, to: usize) -> Result<Vec<i64>> {
        self.check_index(from)?;
        self.check_index(to)?;
        Ok(self.wrap_steps_unchecked(from, to))
    }

    pub(crate) fn wrap_steps_unchecked(&self, from: usize, to: usize) -> Vec<i64> {
        (0..self.ndim())
            .map(|a| {
                let f = ((from / self.strides[a]) % self.dims[a]) as i64;
                let t = ((to / self.strides[a]) % self.dims[a]) as i64;
                self.canonical_step(a, t - f)
            })
            .collect()
    }

    /// Minimal-magnitude displacement from `from` to `to` in physical units.
    pub fn wrap_displacement(&self, from: usize, to: usize) -> Result<Vec<f64>> {
        let steps = self.wrap_steps(from, to)?;
        Ok(self.steps_to_displacement(&steps))
    }

    pub fn steps_to_displacement(&self, steps: &[i64]) -> Vec<f64> {
        steps
            .iter()
            .zip(&self.spacing)
            .map(|(&k, &h)| k as f64 * h)
            .collect()
    }

    /// Centered coordinates of a point, each in `(-L/2, L/2]`.
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        let steps = self.wrap_steps_unchecked(0, index);
        self.steps_to_displacement(&steps)
    }

    /// Index of the grid point nearest to the given coordinates.
    pub fn nearest_index(&self, coords: &[f64]) -> usize {
        let multi: Vec<usize> = coords
            .iter()
            .zip(&self.spacing)
            .zip(&self.dims)
            .map(|((&x, &h), &n)| ((x / h).round() as i64).rem_euclid(n as i64) as usize)
            .collect();
        self.linear_index(&multi)
    }
}

/// Real values on every point of a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Builder used internally where finiteness is already established.
    pub(crate) fn from_parts(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn constant(grid: &PeriodicGrid, value: f64) -> Self {
        Self::from_parts(grid.clone(), vec![value; grid.len()])
    }

    pub fn from_fn(grid: &PeriodicGrid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect();
        Self::new(grid.clone(), values)
    }

    /// Uniform random values in `[0, amplitude)` from a seeded ChaCha stream.
    pub fn random(grid: &PeriodicGrid, seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| amplitude * rng.random::<f64>())
            .collect();
        Self::from_parts(grid.clone(), values)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, grid: &PeriodicGrid) -> Result<()> {
        if &self.grid == grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "function on {:?} applied on {:?}",
                self.grid.dims(),
                grid.dims()
            )))
        }
    }

    /// `u - u(anchor)`; the anchor value becomes exactly zero.
    pub fn normalize(&self, anchor: usize) -> Result<Self> {
        self.grid.check_index(anchor)?;
        let base = self.values[anchor];
        Ok(self.map(|v| v - base))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn add_constant(&self, a: f64) -> Self {
        self.map(|v| v + a)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sup-norm of `self - other`.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes one row per point: coordinates then value, row-major order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.grid.ndim()).map(|a| format!("x{a}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self
                .grid
                .coordinates(i)
                .iter()
                .map(|c| format!("{c:e}"))
                .collect();
            row.push(format!("{:e}", self.values[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`GridFunction::write_csv`] onto a known grid.
    pub fn read_csv<R: Read>(reader: R, grid: &PeriodicGrid) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let ncols = grid.ndim() + 1;
        let mut values = Vec::with_capacity(grid.len());
        for (row, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != ncols {
                return Err(Error::Config(format!(
                    "row {row}: expected {ncols} columns, found {}",
                    record.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("row {row}: {e}")))
            };
            if row < grid.len() {
                let expect = grid.coordinates(row);
                for (a, e) in expect.iter().enumerate() {
                    let c = parse(&record[a])?;
                    if (c - e).abs() > 1e-9 * (1.0 + grid.lengths()[a]) {
                        return Err(Error::Config(format!(
                            "row {row}: coordinate {c} on axis {a} does not match grid point {e}"
                        )));
                    }
                }
            }
            values.push(parse(&record[grid.ndim()])?);
        }
        Self::new(grid.clone(), values)
    }
}
