//! Discrete Lax-Oleinik semigroups.
//!
//! One time step of the backward operator is the min-plus product
//! `(T⁻u)(x) = min_y [u(y) + h(y, x)]` with the one-step action
//! `h(y, x) = dt · L(x, Δ(y, x)/dt)`, where `Δ` is the wraparound displacement.
//! The forward operator is `(T⁺u)(x) = max_y [u(y) − h(x, y)]`.
//!
//! Kernels are banded: every point sees the same stencil of step offsets, so
//! entries are stored as `weights[x * n_offsets + o] = h(x − o, x)`.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::model::LagrangianModel;

/// How the position argument of `L` is placed along each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    /// `h(y, x) = dt · L(x, Δ/dt)`
    #[default]
    Endpoint,
    /// `h(y, x) = dt · L(x − Δ/2, Δ/dt)`
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

/// Banded min-plus kernel of one-step discrete actions.
#[derive(Clone, Debug)]
pub struct ActionKernel {
    grid: PeriodicGrid,
    dt: f64,
    vmax: f64,
    offsets: Vec<Vec<i64>>,
    offset_lookup: HashMap<Vec<i64>, usize>,
    /// `pred[x * n + o]` = index of `x − offset[o]`.
    pred: Vec<usize>,
    /// `succ[x * n + o]` = index of `x + offset[o]`.
    succ: Vec<usize>,
    weights: Vec<f64>,
}

impl ActionKernel {
    /// Kernel built from a model; pairs with `‖Δ‖/dt ≤ vmax` are stored.
    pub fn build(
        model: &LagrangianModel,
        grid: &PeriodicGrid,
        dt: f64,
        vmax: f64,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::Config(format!("vmax must be positive, got {vmax}")));
        }
        if model.dim() != grid.ndim() {
            return Err(Error::Config(format!(
                "{}-dimensional model on a {}-dimensional grid",
                model.dim(),
                grid.ndim()
            )));
        }
        let band: Vec<usize> = grid
            .spacing()
            .iter()
            .zip(grid.dims())
            .map(|(&h, &n)| ((vmax * dt / h).floor() as usize).min(n / 2))
            .collect();
        if let Some(axis) = band.iter().position(|&b| b == 0) {
            return Err(Error::Config(format!(
                "band is empty on axis {axis}: vmax·dt = {} is below the spacing {}",
                vmax * dt,
                grid.spacing()[axis]
            )));
        }
        let offsets: Vec<Vec<i64>> = box_offsets(grid, &band)
            .into_iter()
            .filter(|k| {
                let d = grid.steps_to_displacement(k);
                d.iter().map(|c| c * c).sum::<f64>().sqrt() / dt <= vmax
            })
            .collect();
        let mut kernel = Self::with_offsets(grid.clone(), dt, vmax, offsets);
        let n = kernel.offsets.len();
        let displacements: Vec<Vec<f64>> = kernel
            .offsets
            .iter()
            .map(|k| grid.steps_to_displacement(k))
            .collect();
        let weights: Result<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|x| {
                let xc = grid.coordinates(x);
                displacements.iter().map(move |d| {
                    let v: Vec<f64> = d.iter().map(|c| c / dt).collect();
                    let pos: Vec<f64> = match rule {
                        QuadratureRule::Endpoint => xc.clone(),
                        QuadratureRule::Midpoint => {
                            xc.iter().zip(d).map(|(a, b)| a - 0.5 * b).collect()
                        }
                    };
                    model.eval(&pos, &v).map(|l| dt * l)
                })
            })
            .collect();
        kernel.weights = weights?;
        debug_assert_eq!(kernel.weights.len(), grid.len() * n);
        Ok(kernel)
    }

    /// Kernel with explicit entries `h(y, x)` on the box stencil `|k_a| ≤ band_a`.
    pub fn from_fn(
        grid: &PeriodicGrid,
        dt: f64,
        band: &[usize],
        h: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        if band.len() != grid.ndim() {
            return Err(Error::Config("band needs one entry per axis".into()));
        }
        let offsets = box_offsets(grid, band);
        let vmax = offsets
            .iter()
            .map(|k| {
                let d = grid.steps_to_displacement(k);
                d.iter().map(|c| c * c).sum::<f64>().sqrt() / dt
            })
            .fold(0.0, f64::max);
        let mut kernel = Self::with_offsets(grid.clone(), dt, vmax, offsets);
        let n = kernel.offsets.len();
        let mut weights = Vec::with_capacity(grid.len() * n);
        for x in 0..grid.len() {
            for o in 0..n {
                let w = h(kernel.pred[x * n + o], x);
                if !w.is_finite() {
                    return Err(Error::Config(format!("non-finite kernel entry at {x}")));
                }
                weights.push(w);
            }
        }
        kernel.weights = weights;
        Ok(kernel)
    }

    fn with_offsets(grid: PeriodicGrid, dt: f64, vmax: f64, offsets: Vec<Vec<i64>>) -> Self {
        let n = offsets.len();
        let offset_lookup = offsets
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        let mut pred = Vec::with_capacity(grid.len() * n);
        let mut succ = Vec::with_capacity(grid.len() * n);
        for x in 0..grid.len() {
            for k in &offsets {
                let neg: Vec<i64> = k.iter().map(|s| -s).collect();
                pred.push(grid.shifted(x, &neg));
                succ.push(grid.shifted(x, k));
            }
        }
        Self {
            grid,
            dt,
            vmax,
            offsets,
            offset_lookup,
            pred,
            succ,
            weights: Vec::new(),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    /// Stencil of canonical step offsets (predecessor to target).
    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    /// Largest `|k_a|` in the stencil per axis.
    pub fn band(&self) -> Vec<usize> {
        (0..self.grid.ndim())
            .map(|a| {
                self.offsets
                    .iter()
                    .map(|k| k[a].unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// `(predecessor, weight)` pairs of all stored edges into `x`.
    pub fn incoming(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.offsets.len();
        (0..n).map(move |o| (self.pred[x * n + o], self.weights[x * n + o]))
    }

    /// `(successor, weight)` pairs of all stored edges out of `y`.
    pub fn outgoing(&self, y: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.offsets.len();
        (0..n).map(move |o| {
            let x = self.succ[y * n + o];
            (x, self.weights[x * n + o])
        })
    }

    /// Stored entry `h(y, x)`, or `None` when the pair is outside the band.
    pub fn entry(&self, y: usize, x: usize) -> Option<f64> {
        let steps = self.grid.wrap_steps_unchecked(y, x);
        let o = *self.offset_lookup.get(&steps)?;
        Some(self.weights[x * self.offsets.len() + o])
    }

    pub fn self_loop(&self, x: usize) -> f64 {
        self.entry(x, x).expect("every kernel stores self-loops")
    }

    /// Maps every entry through `f(y, x, h)`; used for shifted and perturbed kernels.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let n = self.offsets.len();
        let mut out = self.clone();
        for x in 0..self.grid.len() {
            for o in 0..n {
                let i = x * n + o;
                out.weights[i] = f(self.pred[i], x, self.weights[i]);
            }
        }
        out
    }

    /// Kernel with `hᵀ(y, x) = h(x, y)`.
    pub fn transpose(&self) -> Self {
        let offsets: Vec<Vec<i64>> = self
            .offsets
            .iter()
            .map(|k| self.grid.canonical_steps(&k.iter().map(|s| -s).collect::<Vec<_>>()))
            .collect();
        let mut out = Self::with_offsets(self.grid.clone(), self.dt, self.vmax, offsets);
        let n = out.offsets.len();
        out.weights = (0..self.grid.len() * n)
            .map(|i| {
                let x = i / n;
                let y = out.pred[i];
                self.entry(x, y).expect("stencil is closed under negation")
            })
            .collect();
        out
    }

    /// Min-plus square: `h₂(y, x) = min_z [h(y, z) + h(z, x)]` with doubled `dt`.
    pub fn compose(&self) -> Result<Self> {
        for (axis, (&b, &n)) in self.band().iter().zip(self.grid.dims()).enumerate() {
            if 2 * b >= n {
                return Err(Error::BandOverflow {
                    axis,
                    band: b,
                    count: n,
                });
            }
        }
        let n1 = self.offsets.len();
        let mut sums: Vec<Vec<i64>> = Vec::with_capacity(n1 * n1);
        for a in &self.offsets {
            for b in &self.offsets {
                let s: Vec<i64> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                sums.push(self.grid.canonical_steps(&s));
            }
        }
        let mut stencil = sums.clone();
        stencil.sort();
        stencil.dedup();
        let mut out = Self::with_offsets(self.grid.clone(), 2.0 * self.dt, self.vmax, stencil);
        // slot[o1 * n1 + o2]: composed offset of a step o1 followed by o2
        let slot: Vec<usize> = sums.iter().map(|k| out.offset_lookup[k]).collect();
        let n2 = out.offsets.len();
        let mut weights = vec![f64::INFINITY; self.grid.len() * n2];
        weights
            .par_chunks_mut(n2)
            .enumerate()
            .for_each(|(x, row)| {
                for o2 in 0..n1 {
                    let z = self.pred[x * n1 + o2];
                    let hzx = self.weights[x * n1 + o2];
                    for o1 in 0..n1 {
                        let hyz = self.weights[z * n1 + o1];
                        let s = slot[o1 * n1 + o2];
                        let w = hyz + hzx;
                        if w < row[s] {
                            row[s] = w;
                        }
                    }
                }
            });
        out.weights = weights;
        Ok(out)
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        u.ensure_same_grid(&self.grid)
    }

    /// `(T⁻u)(x) = min_y [u(y) + h(y, x)]`.
    pub fn apply_backward(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let n = self.offsets.len();
        let vals = u.values();
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|x| {
                let base = x * n;
                let mut best = f64::INFINITY;
                for o in 0..n {
                    let c = vals[self.pred[base + o]] + self.weights[base + o];
                    if c < best {
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(GridFunction::from_parts(self.grid.clone(), out))
    }

    /// `(T⁺u)(x) = max_y [u(y) − h(x, y)]`.
    pub fn apply_forward(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let n = self.offsets.len();
        let vals = u.values();
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|x| {
                let mut best = f64::NEG_INFINITY;
                for o in 0..n {
                    let y = self.succ[x * n + o];
                    let c = vals[y] - self.weights[y * n + o];
                    if c > best {
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(GridFunction::from_parts(self.grid.clone(), out))
    }

    pub fn apply(&self, u: &GridFunction, direction: Direction) -> Result<GridFunction> {
        match direction {
            Direction::Backward => self.apply_backward(u),
            Direction::Forward => self.apply_forward(u),
        }
    }

    /// Minimizing predecessor of `x` for `T⁻`, lowest index among ties, with its offset slot.
    pub fn argmin_predecessor(&self, u: &GridFunction, x: usize) -> (usize, usize) {
        let n = self.offsets.len();
        let mut best = (f64::INFINITY, usize::MAX, 0);
        for o in 0..n {
            let y = self.pred[x * n + o];
            let c = u.get(y) + self.weights[x * n + o];
            if c < best.0 || (c == best.0 && y < best.1) {
                best = (c, y, o);
            }
        }
        (best.1, best.2)
    }

    /// Whether offset slot `o` lies on the outer layer of the stencil.
    pub fn is_boundary_offset(&self, o: usize) -> bool {
        let k = &self.offsets[o];
        (0..k.len()).any(|a| {
            [-1i64, 1].iter().any(|&s| {
                let mut m = k.clone();
                m[a] += s;
                m[a].abs() > k[a].abs() && !self.offset_lookup.contains_key(&m)
            })
        })
    }
}

/// All canonical offsets of the box `|k_a| ≤ band_a`, deduplicated, sorted.
fn box_offsets(grid: &PeriodicGrid, band: &[usize]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &b in &band[..grid.ndim()] {
        let b = b as i64;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-b..=b).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    let mut canon: Vec<Vec<i64>> = out.iter().map(|k| grid.canonical_steps(k)).collect();
    canon.sort();
    canon.dedup();
    canon
}

/// Default velocity cap `2·(1 + osc U)·max(1, spacing/dt)`.
pub fn default_vmax(model: &LagrangianModel, grid: &PeriodicGrid, dt: f64) -> f64 {
    let osc = model.potential_oscillation(grid);
    2.0 * (1.0 + osc) * (grid.max_spacing() / dt).max(1.0)
}

/// One row of the solver's residual history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub sup_change: f64,
    pub shift: f64,
    pub c_est: f64,
}

pub fn write_history_csv<W: Write>(history: &[ResidualRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "sup_change", "shift", "c_est"])?;
    for r in history {
        w.write_record(&[
            r.iteration.to_string(),
            format!("{:e}", r.sup_change),
            format!("{:e}", r.shift),
            format!("{:e}", r.c_est),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct WeakKamSolution {
    pub u: GridFunction,
    pub c_est: f64,
    pub iterations: usize,
    pub direction: Direction,
    pub history: Vec<ResidualRecord>,
    /// Points whose minimizing step uses an offset on the stencil boundary.
    pub boundary_argmins: usize,
}

const SHIFT_WINDOW: usize = 10;

/// Normalized value iteration `u ← T u − (T u)(0)` until the sup-norm change
/// drops to `tol`.
///
/// `c_est` averages the mean shift over the last ten iterations. Iteration
/// continues until ten consecutive changes are within `tol`, so the window
/// never mixes in transient shifts. Hitting `max_iter` while settled still
/// succeeds, averaging over the settled run only.
pub fn solve_weak_kam(
    kernel: &ActionKernel,
    direction: Direction,
    seed: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<WeakKamSolution> {
    if tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    seed.ensure_same_grid(kernel.grid())?;
    let sign = match direction {
        Direction::Backward => -1.0,
        Direction::Forward => 1.0,
    };
    let dt = kernel.dt();
    let mut u = seed.normalize(0)?;
    let mut history: Vec<ResidualRecord> = Vec::new();
    let mut shifts: Vec<f64> = Vec::new();
    let mut settled = 0usize;
    for iteration in 1..=max_iter {
        let w = kernel.apply(&u, direction)?;
        let shift = w
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a - b)
            .sum::<f64>()
            / u.len() as f64;
        let next = w.normalize(0)?;
        let change = next.sup_distance(&u);
        shifts.push(shift);
        settled = if change <= tol { settled + 1 } else { 0 };
        let span = settled.clamp(1, SHIFT_WINDOW);
        let window = &shifts[shifts.len() - span.min(shifts.len())..];
        let c_est = sign * window.iter().sum::<f64>() / window.len() as f64 / dt;
        history.push(ResidualRecord {
            iteration,
            sup_change: change,
            shift,
            c_est,
        });
        u = next;
        if settled >= SHIFT_WINDOW || (settled > 0 && iteration == max_iter) {
            let boundary_argmins = match direction {
                Direction::Backward => (0..u.len())
                    .filter(|&x| kernel.is_boundary_offset(kernel.argmin_predecessor(&u, x).1))
                    .count(),
                Direction::Forward => 0,
            };
            return Ok(WeakKamSolution {
                u,
                c_est,
                iterations: iteration,
                direction,
                history,
                boundary_argmins,
            });
        }
    }
    Err(Error::NonConvergence { history })
}

/// `‖T u − u ± c·dt‖∞` (plus sign for backward, minus for forward).
pub fn fixed_point_residual(
    kernel: &ActionKernel,
    direction: Direction,
    u: &GridFunction,
    c: f64,
) -> Result<f64> {
    let tu = kernel.apply(u, direction)?;
    let s = match direction {
        Direction::Backward => c * kernel.dt(),
        Direction::Forward => -c * kernel.dt(),
    };
    Ok(tu
        .values()
        .iter()
        .zip(u.values())
        .map(|(t, v)| (t - v + s).abs())
        .fold(0.0, f64::max))
}

/// Slack tolerance used when listing violating edges.
pub const DOMINATION_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DominationReport {
    /// `max over edges of u(x) − u(y) − h(y, x) − c·dt`.
    pub worst: f64,
    pub worst_edge: (usize, usize),
    /// `(y, x, excess)` for every edge whose excess is above [`DOMINATION_SLACK`].
    pub violations: Vec<(usize, usize, f64)>,
}

impl DominationReport {
    pub fn dominated(&self) -> bool {
        self.worst <= DOMINATION_SLACK
    }
}

pub fn check_domination(u: &GridFunction, c: f64, kernel: &ActionKernel) -> Result<DominationReport> {
    u.ensure_same_grid(kernel.grid())?;
    let cdt = c * kernel.dt();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_edge = (0, 0);
    let mut violations = Vec::new();
    for x in 0..u.len() {
        for (y, h) in kernel.incoming(x) {
            let e = u.get(x) - u.get(y) - h - cdt;
            if e > worst {
                worst = e;
                worst_edge = (y, x);
            }
            if e > DOMINATION_SLACK {
                violations.push((y, x, e));
            }
        }
    }
    Ok(DominationReport {
        worst,
        worst_edge,
        violations,
    })
}

/// Backward argmin chain from a point.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedOrbit {
    /// `points[0]` is the start; later entries go back in time.
    pub points: Vec<usize>,
    /// Per step, `h(y*, x) + c·dt − (u(x) − u(y*))`: the slack in the domination inequality.
    pub defects: Vec<f64>,
}

impl CalibratedOrbit {
    pub fn write_csv<W: Write>(&self, grid: &PeriodicGrid, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string()];
        header.extend((0..grid.ndim()).map(|a| format!("x{a}")));
        header.push("defect".into());
        w.write_record(&header)?;
        for (step, &p) in self.points.iter().enumerate() {
            let mut row = vec![step.to_string()];
            row.extend(grid.coordinates(p).iter().map(|c| format!("{c:e}")));
            let d = if step == 0 { 0.0 } else { self.defects[step - 1] };
            row.push(format!("{d:e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn backward_orbit(
    u: &GridFunction,
    kernel: &ActionKernel,
    c: f64,
    start: usize,
    steps: usize,
) -> Result<CalibratedOrbit> {
    u.ensure_same_grid(kernel.grid())?;
    kernel.grid().check_index(start)?;
    let cdt = c * kernel.dt();
    let n = kernel.n_offsets();
    let mut points = vec![start];
    let mut defects = Vec::with_capacity(steps);
    let mut x = start;
    for _ in 0..steps {
        let (y, o) = kernel.argmin_predecessor(u, x);
        let h = kernel.weights[x * n + o];
        defects.push(h + cdt - (u.get(x) - u.get(y)));
        points.push(y);
        x = y;
    }
    Ok(CalibratedOrbit { points, defects })
}
