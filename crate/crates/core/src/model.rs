//! Lagrangian and Hamiltonian models on periodic configuration spaces.
//!
//! A [`LagrangianModel`] is either mechanical, `L(x, v) = ½ vᵀ A v − U(x)` with
//! a constant positive-definite kinetic matrix `A`, or tabulated on a
//! position/velocity table. Every model carries a constant covector `P`; the
//! effective Lagrangian is `L(x, v) − P·v`, whose dual Hamiltonian is
//! `H(x, p + P)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PeriodicGrid};

pub mod legendre;

pub use legendre::{conjugate_sorted, legendre_transform, UniformAxis};

/// Potential energy `U(x)`.
#[derive(Clone, Debug)]
pub enum Potential {
    Zero,
    /// `amplitude · cos(2π x_axis / period)`.
    Cosine {
        axis: usize,
        amplitude: f64,
        period: f64,
    },
    /// Samples on a periodic grid, interpolated multilinearly.
    Tabulated(GridFunction),
}

impl Potential {
    pub fn cosine(axis: usize, amplitude: f64) -> Self {
        Potential::Cosine {
            axis,
            amplitude,
            period: std::f64::consts::TAU,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Cosine {
                axis,
                amplitude,
                period,
            } => amplitude * (x[*axis] * (std::f64::consts::TAU / period)).cos(),
            Potential::Tabulated(table) => interpolate_periodic(table, x),
        }
    }
}

/// Multilinear interpolation of a periodic grid function at arbitrary coordinates.
pub fn interpolate_periodic(f: &GridFunction, x: &[f64]) -> f64 {
    let grid = f.grid();
    let d = grid.ndim();
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for a in 0..d {
        let n = grid.dims()[a];
        let t = x[a] / grid.spacing()[a];
        let fl = t.floor();
        frac[a] = t - fl;
        base[a] = (fl as i64).rem_euclid(n as i64) as usize;
    }
    let mut acc = 0.0;
    let mut corner = vec![0usize; d];
    for mask in 0..(1usize << d) {
        let mut w = 1.0;
        for a in 0..d {
            let bit = (mask >> a) & 1;
            corner[a] = (base[a] + bit) % grid.dims()[a];
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w != 0.0 {
            acc += w * f.get(grid.linear_index(&corner));
        }
    }
    acc
}

/// Constant positive-definite kinetic matrix.
#[derive(Clone, Debug)]
pub struct KineticForm {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl KineticForm {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Model("kinetic matrix must be square".into()));
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * (1.0 + matrix.amax()) {
            return Err(Error::Model("kinetic matrix must be symmetric".into()));
        }
        let chol = matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Model("kinetic matrix is not positive definite".into()))?;
        let inverse = chol.inverse();
        Ok(Self { matrix, inverse })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is positive definite")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let rows = (0..diag.len())
            .map(|i| (0..diag.len()).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
        let n = v.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * m[(i, j)] * v[j];
            }
        }
        0.5 * s
    }

    /// `½ vᵀ A v`
    pub fn energy(&self, v: &[f64]) -> f64 {
        Self::quad(&self.matrix, v)
    }

    /// `½ pᵀ A⁻¹ p`
    pub fn dual_energy(&self, p: &[f64]) -> f64 {
        Self::quad(&self.inverse, p)
    }

    /// `A v`
    pub fn momentum(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|i| (0..v.len()).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// One-dimensional Lagrangian tabulated on a periodic position grid times a
/// uniform velocity axis, interpolated bilinearly.
#[derive(Clone, Debug)]
pub struct TabulatedLagrangian {
    positions: PeriodicGrid,
    velocities: UniformAxis,
    /// Row-major `[position][velocity]`.
    table: Vec<f64>,
}

impl TabulatedLagrangian {
    pub fn new(positions: PeriodicGrid, velocities: UniformAxis, table: Vec<f64>) -> Result<Self> {
        if positions.ndim() != 1 {
            return Err(Error::Model("tabulated Lagrangians are one-dimensional".into()));
        }
        if velocities.count < 2 {
            return Err(Error::Model("velocity axis needs at least two samples".into()));
        }
        if table.len() != positions.len() * velocities.count {
            return Err(Error::Model(format!(
                "table has {} entries, expected {}",
                table.len(),
                positions.len() * velocities.count
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("table contains non-finite entries".into()));
        }
        Ok(Self {
            positions,
            velocities,
            table,
        })
    }

    /// Samples `f(x, v)` on the given position grid and velocity axis.
    pub fn sample(
        positions: PeriodicGrid,
        velocities: UniformAxis,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(positions.len() * velocities.count);
        for i in 0..positions.len() {
            let x = positions.coordinates(i)[0];
            for j in 0..velocities.count {
                table.push(f(x, velocities.point(j)));
            }
        }
        Self::new(positions, velocities, table)
    }

    pub fn velocity_range(&self) -> (f64, f64) {
        (self.velocities.start, self.velocities.end())
    }

    fn eval(&self, x: f64, v: f64) -> Option<f64> {
        let (lo, hi) = self.velocity_range();
        if !(v >= lo && v <= hi) {
            return None;
        }
        let n = self.positions.len();
        let t = x / self.positions.spacing()[0];
        let fl = t.floor();
        let fx = t - fl;
        let i0 = (fl as i64).rem_euclid(n as i64) as usize;
        let i1 = (i0 + 1) % n;
        let s = (v - lo) / self.velocities.step;
        let j0 = (s.floor() as usize).min(self.velocities.count - 2);
        let fv = s - j0 as f64;
        let m = self.velocities.count;
        let at = |i: usize, j: usize| self.table[i * m + j];
        let a = at(i0, j0) * (1.0 - fv) + at(i0, j0 + 1) * fv;
        let b = at(i1, j0) * (1.0 - fv) + at(i1, j0 + 1) * fv;
        Some(a * (1.0 - fx) + b * fx)
    }
}

#[derive(Clone, Debug)]
pub enum LagrangianKind {
    Mechanical {
        kinetic: KineticForm,
        potential: Potential,
    },
    Tabulated(TabulatedLagrangian),
}

#[derive(Clone, Debug)]
pub struct LagrangianModel {
    kind: LagrangianKind,
    shift: Vec<f64>,
}

impl LagrangianModel {
    pub fn mechanical(kinetic: KineticForm, potential: Potential) -> Self {
        let dim = kinetic.dim();
        Self {
            kind: LagrangianKind::Mechanical { kinetic, potential },
            shift: vec![0.0; dim],
        }
    }

    /// `L = |v|²/2` in `dim` dimensions.
    pub fn free(dim: usize) -> Self {
        Self::mechanical(KineticForm::identity(dim), Potential::Zero)
    }

    /// `L = |v|²/2 − cos x₀` in `dim` dimensions.
    pub fn pendulum(dim: usize) -> Self {
        Self::mechanical(KineticForm::identity(dim), Potential::cosine(0, 1.0))
    }

    pub fn tabulated(table: TabulatedLagrangian) -> Self {
        Self {
            kind: LagrangianKind::Tabulated(table),
            shift: vec![0.0],
        }
    }

    /// Replaces the cohomology shift `P`.
    pub fn with_shift(mut self, shift: Vec<f64>) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::Model(format!(
                "shift has {} components for a {}-dimensional model",
                shift.len(),
                self.dim()
            )));
        }
        self.shift = shift;
        Ok(self)
    }

    pub fn kind(&self) -> &LagrangianKind {
        &self.kind
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LagrangianKind::Mechanical { kinetic, .. } => kinetic.dim(),
            LagrangianKind::Tabulated(_) => 1,
        }
    }

    /// Effective Lagrangian `L(x, v) − P·v`.
    pub fn eval(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let base = match &self.kind {
            LagrangianKind::Mechanical { kinetic, potential } => {
                kinetic.energy(v) - potential.eval(x)
            }
            LagrangianKind::Tabulated(t) => t.eval(x[0], v[0]).ok_or_else(|| {
                let (lo, hi) = t.velocity_range();
                Error::Model(format!("velocity {} outside tabulated range [{lo}, {hi}]", v[0]))
            })?,
        };
        let pv: f64 = self.shift.iter().zip(v).map(|(p, v)| p * v).sum();
        let out = base - pv;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Model(format!("non-finite value at x={x:?}, v={v:?}")))
        }
    }

    /// `∂L/∂v` of the effective Lagrangian by central differences.
    pub fn velocity_gradient(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(v.len());
        let mut w = v.to_vec();
        for a in 0..v.len() {
            let step = 1e-6 * (1.0 + v[a].abs());
            w[a] = v[a] + step;
            let plus = self.eval(x, &w)?;
            w[a] = v[a] - step;
            let minus = self.eval(x, &w)?;
            w[a] = v[a];
            out.push((plus - minus) / (2.0 * step));
        }
        Ok(out)
    }

    /// Oscillation `max U − min U` of the potential over the grid points;
    /// for tabulated models, of `−L(x, 0)`.
    pub fn potential_oscillation(&self, grid: &PeriodicGrid) -> f64 {
        let zero = vec![0.0; self.dim()];
        let vals: Vec<f64> = (0..grid.len())
            .filter_map(|i| self.eval(&grid.coordinates(i), &zero).ok())
            .collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if vals.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn hamiltonian(&self) -> HamiltonianModel {
        HamiltonianModel {
            lagrangian: self.clone(),
        }
    }
}

/// Convex dual of a [`LagrangianModel`].
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    lagrangian: LagrangianModel,
}

impl HamiltonianModel {
    /// `H(x, p)` dual to the effective Lagrangian, i.e. `H₀(x, p + P)`.
    ///
    /// Exact for mechanical models; for tabulated ones the sup runs over the
    /// tabulated velocities.
    pub fn eval(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        let shift = &self.lagrangian.shift;
        let q: Vec<f64> = p.iter().zip(shift).map(|(p, s)| p + s).collect();
        match &self.lagrangian.kind {
            LagrangianKind::Mechanical { kinetic, potential } => {
                Ok(kinetic.dual_energy(&q) + potential.eval(x))
            }
            LagrangianKind::Tabulated(t) => {
                let mut best = f64::NEG_INFINITY;
                for j in 0..t.velocities.count {
                    let v = t.velocities.point(j);
                    let l = t.eval(x[0], v).expect("tabulated velocity in range");
                    best = best.max(q[0] * v - l);
                }
                Ok(best)
            }
        }
    }

    /// Smallest second difference of `p ↦ H(x, p)` along each axis over the
    /// sampled positions and momentum range. Non-negative means no convexity
    /// violation was found.
    pub fn check_convexity(&self, positions: &[Vec<f64>], momenta: &UniformAxis) -> Result<f64> {
        let dim = self.lagrangian.dim();
        let mut worst = f64::INFINITY;
        for x in positions {
            for a in 0..dim {
                let mut p = vec![0.0; dim];
                let mut vals = Vec::with_capacity(momenta.count);
                for j in 0..momenta.count {
                    p[a] = momenta.point(j);
                    vals.push(self.eval(x, &p)?);
                }
                for w in vals.windows(3) {
                    worst = worst.min(w[0] - 2.0 * w[1] + w[2]);
                }
            }
        }
        Ok(worst)
    }
}

/// Sample set for the superlinearity check: positions times a cube of
/// velocities `|v_a| ≤ half_width` with `count` samples per axis.
#[derive(Clone, Debug)]
pub struct SampleBox {
    pub positions: Vec<Vec<f64>>,
    pub half_width: f64,
    pub count: usize,
}

impl SampleBox {
    pub fn on_grid(grid: &PeriodicGrid, half_width: f64, count: usize) -> Self {
        Self {
            positions: (0..grid.len()).map(|i| grid.coordinates(i)).collect(),
            half_width,
            count,
        }
    }
}

/// Worst constant `C_K = min (L(x, v) − K‖v‖)` over the sample box.
pub fn check_superlinearity(model: &LagrangianModel, slope: f64, samples: &SampleBox) -> Result<f64> {
    let dim = model.dim();
    let axis = UniformAxis::symmetric(samples.half_width, samples.count);
    let total = samples.count.pow(dim as u32);
    let mut worst = f64::INFINITY;
    let mut v = vec![0.0; dim];
    for x in &samples.positions {
        for mut flat in 0..total {
            for c in v.iter_mut() {
                *c = axis.point(flat % samples.count);
                flat /= samples.count;
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            worst = worst.min(model.eval(x, &v)? - slope * norm);
        }
    }
    Ok(worst)
}
