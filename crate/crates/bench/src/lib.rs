//! Fixtures shared by the criterion benchmarks in `benches/`.

use std::f64::consts::TAU;

use weakkam_core::{ActionKernel, GridFunction, LagrangianModel, PeriodicGrid, QuadratureRule};

/// Pendulum kernel on a circle of `count` points at `dt = 0.05`, `vmax = 4`.
pub fn pendulum_circle(count: usize) -> ActionKernel {
    let grid = PeriodicGrid::circle(count, TAU).expect("valid circle");
    ActionKernel::build(&LagrangianModel::pendulum(1), &grid, 0.05, 4.0, QuadratureRule::Endpoint)
        .expect("non-empty band")
}

/// Pendulum kernel on an `n × n` torus at `dt = 0.1`, `vmax = 3`.
pub fn pendulum_torus(n: usize) -> ActionKernel {
    let grid = PeriodicGrid::new(vec![n, n], vec![TAU, TAU]).expect("valid torus");
    ActionKernel::build(&LagrangianModel::pendulum(2), &grid, 0.1, 3.0, QuadratureRule::Endpoint)
        .expect("non-empty band")
}

pub fn random_function(kernel: &ActionKernel, seed: u64) -> GridFunction {
    GridFunction::random(kernel.grid(), seed, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(pendulum_circle(64).grid().len(), 64);
        assert_eq!(pendulum_torus(32).grid().len(), 1024);
    }
}
