//! Finite symmetry groups acting on periodic grids by index permutations.
//!
//! Axis translations stand in for rotations isotopic to the identity and are
//! labelled [`GroupKind::ConnectedAnalog`]; any group containing a reflection
//! is [`GroupKind::Disconnected`]. Averaging uses the uniform measure, which is
//! the Haar measure of a finite group.

use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::critical_classes;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::semigroup::{solve_weak_kam, ActionKernel, Direction, WeakKamSolution};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SymmetryDescriptor {
    Identity,
    Shift { axis: usize, amount: i64 },
    Reflection { axis: usize },
    Composite,
}

/// Bijection of grid indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSymmetry {
    perm: Vec<usize>,
    descriptor: SymmetryDescriptor,
}

impl GridSymmetry {
    pub fn new(perm: Vec<usize>, descriptor: SymmetryDescriptor) -> Result<Self> {
        let mut hit = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut hit[p], true) {
                return Err(Error::Symmetry("permutation is not bijective".into()));
            }
        }
        Ok(Self { perm, descriptor })
    }

    pub fn identity(grid: &PeriodicGrid) -> Self {
        Self {
            perm: (0..grid.len()).collect(),
            descriptor: SymmetryDescriptor::Identity,
        }
    }

    pub fn shift(grid: &PeriodicGrid, axis: usize, amount: i64) -> Result<Self> {
        check_axis(grid, axis)?;
        let mut steps = vec![0i64; grid.ndim()];
        steps[axis] = amount;
        let perm = (0..grid.len()).map(|x| grid.shifted(x, &steps)).collect();
        Ok(Self {
            perm,
            descriptor: SymmetryDescriptor::Shift { axis, amount },
        })
    }

    /// `x_axis ↦ −x_axis`.
    pub fn reflection(grid: &PeriodicGrid, axis: usize) -> Result<Self> {
        check_axis(grid, axis)?;
        let n = grid.dims()[axis];
        let perm = (0..grid.len())
            .map(|x| {
                let mut m = grid.multi_index(x);
                m[axis] = (n - m[axis]) % n;
                grid.linear_index(&m)
            })
            .collect();
        Ok(Self {
            perm,
            descriptor: SymmetryDescriptor::Reflection { axis },
        })
    }

    pub fn apply(&self, x: usize) -> usize {
        self.perm[x]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn descriptor(&self) -> &SymmetryDescriptor {
        &self.descriptor
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &GridSymmetry) -> GridSymmetry {
        GridSymmetry {
            perm: other.perm.iter().map(|&i| self.perm[i]).collect(),
            descriptor: SymmetryDescriptor::Composite,
        }
    }

    pub fn inverse(&self) -> GridSymmetry {
        let mut perm = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            perm[p] = i;
        }
        GridSymmetry {
            perm,
            descriptor: SymmetryDescriptor::Composite,
        }
    }

    /// `u ∘ g`
    pub fn pull_back(&self, u: &GridFunction) -> GridFunction {
        let vals = self.perm.iter().map(|&p| u.get(p)).collect();
        GridFunction::from_parts(u.grid().clone(), vals)
    }

    /// Image of a set of indices.
    pub fn image(&self, points: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = points.iter().map(|&p| self.perm[p]).collect();
        out.sort_unstable();
        out
    }
}

fn check_axis(grid: &PeriodicGrid, axis: usize) -> Result<()> {
    if axis < grid.ndim() {
        Ok(())
    } else {
        Err(Error::Symmetry(format!(
            "axis {axis} out of range for a {}-dimensional grid",
            grid.ndim()
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    /// Generated by translations: a discrete stand-in for a connected group.
    ConnectedAnalog,
    Disconnected,
}

/// Finite group of grid symmetries, identity first.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    grid: PeriodicGrid,
    elements: Vec<GridSymmetry>,
    kind: GroupKind,
}

/// Generator entry of a group descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Shift {
        axis: usize,
        #[serde(default = "one")]
        amount: i64,
    },
    Reflection {
        axis: usize,
    },
}

fn one() -> i64 {
    1
}

impl SymmetryGroup {
    /// Verifies that `elements` contains the identity and is closed under
    /// composition and inverses.
    pub fn new(grid: &PeriodicGrid, elements: Vec<GridSymmetry>, kind: GroupKind) -> Result<Self> {
        if elements.iter().any(|g| g.perm.len() != grid.len()) {
            return Err(Error::Symmetry("element acts on a different grid".into()));
        }
        let set: HashSet<&[usize]> = elements.iter().map(|g| g.perm.as_slice()).collect();
        if set.len() != elements.len() {
            return Err(Error::Symmetry("duplicate elements".into()));
        }
        let id = GridSymmetry::identity(grid);
        if !set.contains(id.perm.as_slice()) {
            return Err(Error::Symmetry("identity missing".into()));
        }
        for a in &elements {
            if !set.contains(a.inverse().perm.as_slice()) {
                return Err(Error::Symmetry("not closed under inverses".into()));
            }
            for b in &elements {
                if !set.contains(a.compose(b).perm.as_slice()) {
                    return Err(Error::Symmetry("not closed under composition".into()));
                }
            }
        }
        let mut elements = elements;
        let pos = elements.iter().position(|g| g.is_identity()).expect("checked");
        elements.swap(0, pos);
        Ok(Self {
            grid: grid.clone(),
            elements,
            kind,
        })
    }

    /// Closure of a set of generators.
    pub fn generated(grid: &PeriodicGrid, generators: Vec<GridSymmetry>) -> Result<Self> {
        let kind = if generators
            .iter()
            .any(|g| matches!(g.descriptor, SymmetryDescriptor::Reflection { .. }))
        {
            GroupKind::Disconnected
        } else {
            GroupKind::ConnectedAnalog
        };
        let mut elements = vec![GridSymmetry::identity(grid)];
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        seen.insert(elements[0].perm.clone());
        let mut queue: VecDeque<usize> = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            for g in &generators {
                let next = g.compose(&elements[i]);
                if seen.insert(next.perm.clone()) {
                    let next = if next.perm == g.perm {
                        g.clone()
                    } else {
                        next
                    };
                    elements.push(next);
                    queue.push_back(elements.len() - 1);
                }
            }
        }
        Self::new(grid, elements, kind)
    }

    pub fn from_specs(grid: &PeriodicGrid, specs: &[GeneratorSpec]) -> Result<Self> {
        let gens = specs
            .iter()
            .map(|s| match *s {
                GeneratorSpec::Shift { axis, amount } => GridSymmetry::shift(grid, axis, amount),
                GeneratorSpec::Reflection { axis } => GridSymmetry::reflection(grid, axis),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::generated(grid, gens)
    }

    /// All translations along one axis; order equals the axis point count.
    pub fn shifts(grid: &PeriodicGrid, axis: usize) -> Result<Self> {
        check_axis(grid, axis)?;
        let n = grid.dims()[axis] as i64;
        let elements = (0..n)
            .map(|k| {
                if k == 0 {
                    Ok(GridSymmetry::identity(grid))
                } else {
                    GridSymmetry::shift(grid, axis, k)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, elements, GroupKind::ConnectedAnalog)
    }

    /// `{id, x_axis ↦ −x_axis}`
    pub fn reflection(grid: &PeriodicGrid, axis: usize) -> Result<Self> {
        Self::new(
            grid,
            vec![GridSymmetry::identity(grid), GridSymmetry::reflection(grid, axis)?],
            GroupKind::Disconnected,
        )
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn elements(&self) -> &[GridSymmetry] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Sorted orbit of `x`, with multiplicity.
    pub fn orbit(&self, x: usize) -> Vec<usize> {
        let mut o: Vec<usize> = self.elements.iter().map(|g| g.apply(x)).collect();
        o.sort_unstable();
        o
    }
}

/// Shorthand for [`SymmetryGroup::shifts`].
pub fn make_shift_group(grid: &PeriodicGrid, axis: usize) -> Result<SymmetryGroup> {
    SymmetryGroup::shifts(grid, axis)
}

/// `max |h(gy, gx) − h(y, x)|` over group elements and stored edges.
pub fn verify_symmetry(group: &SymmetryGroup, kernel: &ActionKernel) -> Result<f64> {
    if group.grid() != kernel.grid() {
        return Err(Error::GridMismatch("group and kernel live on different grids".into()));
    }
    let mut worst: f64 = 0.0;
    for g in group.elements() {
        for x in 0..kernel.grid().len() {
            let gx = g.apply(x);
            for (y, h) in kernel.incoming(x) {
                let gy = g.apply(y);
                let image = kernel.entry(gy, gx).ok_or_else(|| {
                    Error::Symmetry(format!(
                        "edge {y}→{x} is stored but its image {gy}→{gx} is not"
                    ))
                })?;
                worst = worst.max((image - h).abs());
            }
        }
    }
    Ok(worst)
}

/// Uniform group average `(1/|G|) Σ_g u(g(x))`.
///
/// Orbit values are summed in sorted index order, so the result is exactly
/// invariant; an orbit of identical values averages to that value.
pub fn average(u: &GridFunction, group: &SymmetryGroup) -> Result<GridFunction> {
    u.ensure_same_grid(group.grid())?;
    let vals: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|x| {
            let orbit = group.orbit(x);
            let first = u.get(orbit[0]);
            if orbit.iter().all(|&p| u.get(p) == first) {
                first
            } else {
                orbit.iter().map(|&p| u.get(p)).sum::<f64>() / orbit.len() as f64
            }
        })
        .collect();
    Ok(GridFunction::from_parts(u.grid().clone(), vals))
}

/// `max |u(g(x)) − u(x)|`
pub fn check_invariance(u: &GridFunction, group: &SymmetryGroup) -> f64 {
    group
        .elements()
        .iter()
        .map(|g| {
            (0..u.len())
                .map(|x| (u.get(g.apply(x)) - u.get(x)).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Tolerance on `verify_symmetry` used before building invariant solutions.
pub const KERNEL_SYMMETRY_TOL: f64 = 1e-12;

/// Weak KAM solution started from the group average of `seed`.
pub fn invariant_weak_kam(
    kernel: &ActionKernel,
    group: &SymmetryGroup,
    direction: Direction,
    seed: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<WeakKamSolution> {
    let dev = verify_symmetry(group, kernel)?;
    if dev > KERNEL_SYMMETRY_TOL {
        return Err(Error::Symmetry(format!(
            "kernel is not invariant under the group (deviation {dev:.3e})"
        )));
    }
    let start = average(seed, group)?;
    solve_weak_kam(kernel, direction, &start, tol, max_iter)
}

/// Outcome of one solve in the invariance harness.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceTrial {
    pub seed: u64,
    pub direction: Direction,
    pub c_est: f64,
    pub iterations: usize,
    pub seed_deviation: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub kind: GroupKind,
    pub kernel_deviation: f64,
    pub critical_classes: usize,
    /// The discrete fixed point is unique modulo constants.
    pub unique: bool,
    /// Whether the invariance bound is a claim for this kernel and group
    /// (connected-analog group and unique fixed point) or only reported.
    pub asserted: bool,
    pub bound: f64,
    pub trials: Vec<InvarianceTrial>,
}

impl InvarianceReport {
    pub fn max_deviation(&self) -> f64 {
        self.trials.iter().map(|t| t.deviation).fold(0.0, f64::max)
    }

    /// False only when the bound is asserted and some trial exceeds it.
    pub fn holds(&self) -> bool {
        !self.asserted || self.max_deviation() <= self.bound
    }
}

/// Solves from random seeds in both directions and measures invariance of
/// every converged solution.
pub fn invariance_harness(
    kernel: &ActionKernel,
    group: &SymmetryGroup,
    seeds: &[u64],
    amplitude: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InvarianceReport> {
    let kernel_deviation = verify_symmetry(group, kernel)?;
    let grid = kernel.grid();
    let reference = solve_weak_kam(
        kernel,
        Direction::Backward,
        &GridFunction::constant(grid, 0.0),
        tol,
        max_iter,
    )?;
    let eps = 1e3 * tol.max(1e-12);
    let classes = critical_classes(kernel, &reference.u, reference.c_est, eps)?.len();
    let unique = classes == 1;
    let mut trials = Vec::with_capacity(2 * seeds.len());
    for &seed in seeds {
        let start = GridFunction::random(grid, seed, amplitude);
        for direction in [Direction::Backward, Direction::Forward] {
            let sol = solve_weak_kam(kernel, direction, &start, tol, max_iter)?;
            trials.push(InvarianceTrial {
                seed,
                direction,
                c_est: sol.c_est,
                iterations: sol.iterations,
                seed_deviation: check_invariance(&start, group),
                deviation: check_invariance(&sol.u, group),
            });
        }
    }
    Ok(InvarianceReport {
        kind: group.kind(),
        kernel_deviation,
        critical_classes: classes,
        unique,
        asserted: group.kind() == GroupKind::ConnectedAnalog
            && unique
            && kernel_deviation <= KERNEL_SYMMETRY_TOL,
        bound: 10.0 * tol,
        trials,
    })
}
