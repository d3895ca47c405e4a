//! Mather set approximation from conjugate backward/forward solutions.
//!
//! `u⁺` is obtained by forward iteration seeded with `u⁻`, then shifted so that
//! `min (u⁻ − u⁺) = 0`. The zero set of the gap, together with the support of
//! a minimum mean cycle, approximates the projected Mather set from above (it
//! is really an Aubry-type set).

use std::io::Write;

use serde::Serialize;

use crate::critical::{karp_min_mean_cycle, MinMeanCycle};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::model::LagrangianModel;
use crate::semigroup::{solve_weak_kam, ActionKernel, Direction};
use crate::symmetry::GridSymmetry;

/// Largest negative gap tolerated after alignment.
pub const GAP_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ConjugatePair {
    pub u_minus: GridFunction,
    pub u_plus: GridFunction,
    pub c: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    /// `u⁻ − u⁺`, non-negative with minimum 0.
    pub gap: GridFunction,
}

pub fn conjugate_pair(
    kernel: &ActionKernel,
    seed: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<ConjugatePair> {
    let minus = solve_weak_kam(kernel, Direction::Backward, seed, tol, max_iter)?;
    let plus = solve_weak_kam(kernel, Direction::Forward, &minus.u, tol, max_iter)?;
    let allowed = 2.0 * tol / kernel.dt();
    if (minus.c_est - plus.c_est).abs() > allowed {
        return Err(Error::Consistency {
            what: "backward and forward critical values",
            first: minus.c_est,
            second: plus.c_est,
            allowed,
        });
    }
    let raw: Vec<f64> = minus
        .u
        .values()
        .iter()
        .zip(plus.u.values())
        .map(|(a, b)| a - b)
        .collect();
    let offset = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_plus = plus.u.add_constant(offset);
    let gap: Vec<f64> = minus
        .u
        .values()
        .iter()
        .zip(u_plus.values())
        .map(|(a, b)| a - b)
        .collect();
    if let Some(i) = gap.iter().position(|&g| g < -GAP_SLACK) {
        return Err(Error::Consistency {
            what: "gap sign after alignment",
            first: gap[i],
            second: 0.0,
            allowed: GAP_SLACK,
        });
    }
    let grid = kernel.grid().clone();
    Ok(ConjugatePair {
        c: 0.5 * (minus.c_est + plus.c_est),
        c_minus: minus.c_est,
        c_plus: plus.c_est,
        u_minus: minus.u,
        u_plus,
        gap: GridFunction::new(grid, gap)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatherSetApprox {
    /// Sorted grid indices.
    pub points: Vec<usize>,
    pub tol: f64,
}

impl MatherSetApprox {
    pub fn contains(&self, x: usize) -> bool {
        self.points.binary_search(&x).is_ok()
    }

    /// Exact set equality `g(S) = S`.
    pub fn is_invariant_under(&self, g: &GridSymmetry) -> bool {
        g.image(&self.points) == self.points
    }

    pub fn write_csv<W: Write>(&self, grid: &PeriodicGrid, writer: W) -> Result<()> {
        crate::critical::write_cycle_points(grid, &self.points, writer)
    }
}

/// `{x : gap(x) ≤ tol}` united with a minimum-mean-cycle witness.
pub fn mather_set_approx(pair: &ConjugatePair, kernel: &ActionKernel, tol: f64) -> MatherSetApprox {
    let witness = karp_min_mean_cycle(kernel);
    mather_set_with_cycle(pair, &witness, tol)
}

pub fn mather_set_with_cycle(pair: &ConjugatePair, witness: &MinMeanCycle, tol: f64) -> MatherSetApprox {
    let mut points: Vec<usize> = (0..pair.gap.len())
        .filter(|&x| pair.gap.get(x) <= tol)
        .chain(witness.cycle.iter().copied())
        .collect();
    points.sort_unstable();
    points.dedup();
    MatherSetApprox { points, tol }
}

/// Centered difference of `u` at `x` along every axis.
pub fn discrete_gradient(u: &GridFunction, x: usize) -> Vec<f64> {
    let grid = u.grid();
    (0..grid.ndim())
        .map(|a| {
            let mut e = vec![0i64; grid.ndim()];
            e[a] = 1;
            let fwd = grid.shifted(x, &e);
            e[a] = -1;
            let bwd = grid.shifted(x, &e);
            (u.get(fwd) - u.get(bwd)) / (2.0 * grid.spacing()[a])
        })
        .collect()
}

/// Largest componentwise gap between the discrete gradient of `u⁻` and
/// `∂L/∂v(x, Δ/dt)` along the cycle's edges.
pub fn gradient_consistency(
    pair: &ConjugatePair,
    model: &LagrangianModel,
    kernel: &ActionKernel,
    cycle: &[usize],
) -> Result<f64> {
    let grid = kernel.grid();
    let n = cycle.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let y = cycle[i];
        let x = cycle[(i + 1) % n];
        if kernel.entry(y, x).is_none() {
            return Err(Error::Domain(format!("cycle edge {y}→{x} is not in the kernel")));
        }
        let v: Vec<f64> = grid
            .wrap_displacement(y, x)?
            .iter()
            .map(|d| d / kernel.dt())
            .collect();
        let p = model.velocity_gradient(&grid.coordinates(x), &v)?;
        let du = discrete_gradient(&pair.u_minus, x);
        for (a, b) in du.iter().zip(&p) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::QuadratureRule;
    use std::f64::consts::TAU;

    fn build(model: &LagrangianModel, n: usize) -> ActionKernel {
        let g = PeriodicGrid::circle(n, TAU).unwrap();
        ActionKernel::build(model, &g, 0.2, 3.0, QuadratureRule::Endpoint).unwrap()
    }

    #[test]
    fn free_pair_is_flat() {
        let k = build(&LagrangianModel::free(1), 32);
        let seed = GridFunction::constant(k.grid(), 0.0);
        let pair = conjugate_pair(&k, &seed, 1e-12, 100).unwrap();
        assert!(pair.gap.values().iter().all(|&g| g == 0.0));
        let set = mather_set_approx(&pair, &k, 1e-6);
        assert_eq!(set.points, (0..32).collect::<Vec<_>>());
        let cyc = karp_min_mean_cycle(&k);
        assert_eq!(gradient_consistency(&pair, &LagrangianModel::free(1), &k, &cyc.cycle).unwrap(), 0.0);
    }

    #[test]
    fn pendulum_gap_vanishes_only_at_origin() {
        let k = build(&LagrangianModel::pendulum(1), 64);
        let seed = GridFunction::constant(k.grid(), 0.0);
        let pair = conjugate_pair(&k, &seed, 1e-12, 100_000).unwrap();
        assert_eq!(pair.gap.get(0), 0.0);
        assert!((1..64).all(|x| pair.gap.get(x) > 1e-6));
        assert!((pair.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discrete_gradient_of_linear_profile() {
        let g = PeriodicGrid::circle(16, TAU).unwrap();
        let u = GridFunction::new(g.clone(), (0..16).map(|i| i as f64).collect()).unwrap();
        let d = discrete_gradient(&u, 5);
        assert!((d[0] - 1.0 / g.spacing()[0]).abs() < 1e-12);
    }
}
