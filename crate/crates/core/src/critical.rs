//! Discrete critical value as the min-plus eigenvalue of the action kernel.
//!
//! The eigenvalue of a min-plus matrix is its minimum cycle mean. Karp's
//! recurrence computes it exactly; power iteration (`solve_weak_kam`) reaches
//! the same number through the mean shift, which gives two independent routes
//! to `c = −λ/dt`.

use std::io::Write;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::semigroup::{solve_weak_kam, ActionKernel, Direction};

#[derive(Clone, Debug, PartialEq)]
pub struct MinMeanCycle {
    /// Minimum mean edge weight, recomputed along `cycle`.
    pub lambda: f64,
    /// Vertices in traversal order; the last one steps back to the first.
    pub cycle: Vec<usize>,
}

impl MinMeanCycle {
    /// `−λ/dt`
    pub fn critical_value(&self, dt: f64) -> f64 {
        -self.lambda / dt
    }

    /// Edge weights along the cycle, starting with `cycle[0] → cycle[1]`.
    pub fn edge_weights(&self, kernel: &ActionKernel) -> Vec<f64> {
        let n = self.cycle.len();
        (0..n)
            .map(|i| {
                kernel
                    .entry(self.cycle[i], self.cycle[(i + 1) % n])
                    .expect("cycle edges are stored")
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, kernel: &ActionKernel, writer: W) -> Result<()> {
        let grid = kernel.grid();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string()];
        header.extend((0..grid.ndim()).map(|a| format!("x{a}")));
        header.push("edge_weight".into());
        w.write_record(&header)?;
        for (i, (&p, h)) in self.cycle.iter().zip(self.edge_weights(kernel)).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(grid.coordinates(p).iter().map(|c| format!("{c:e}")));
            row.push(format!("{h:e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean edge weight of a closed walk, summed from its lowest vertex onward so
/// that every rotation of the same cycle gives a bit-identical value.
pub fn cycle_mean(kernel: &ActionKernel, cycle: &[usize]) -> Option<f64> {
    let n = cycle.len();
    if n == 0 {
        return None;
    }
    let start = (0..n).min_by_key(|&i| cycle[i])?;
    let mut sum = 0.0;
    for i in 0..n {
        let a = cycle[(start + i) % n];
        let b = cycle[(start + i + 1) % n];
        sum += kernel.entry(a, b)?;
    }
    Some(sum / n as f64)
}

/// Karp's minimum mean cycle on the kernel graph (`y → x` weighted `h(y, x)`).
pub fn karp_min_mean_cycle(kernel: &ActionKernel) -> MinMeanCycle {
    let n = kernel.grid().len();
    // dist[k][x]: lightest walk of exactly k edges ending at x, from anywhere.
    let mut dist: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(n + 1);
    dist.push(vec![0.0; n]);
    back.push(vec![u32::MAX; n]);
    for k in 1..=n {
        let prev = &dist[k - 1];
        let (row, brow): (Vec<f64>, Vec<u32>) = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut best = (f64::INFINITY, usize::MAX);
                for (y, h) in kernel.incoming(x) {
                    let c = prev[y] + h;
                    if c < best.0 || (c == best.0 && y < best.1) {
                        best = (c, y);
                    }
                }
                (best.0, best.1 as u32)
            })
            .unzip();
        dist.push(row);
        back.push(brow);
    }

    let last = &dist[n];
    let score: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .map(|k| (last[x] - dist[k][x]) / (n - k) as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut best_x = 0;
    for x in 1..n {
        if score[x] < score[best_x] {
            best_x = x;
        }
    }

    // Walk back n edges from best_x; the first repeated vertex closes a cycle.
    let mut walk = Vec::with_capacity(n + 1);
    let mut seen = vec![usize::MAX; n];
    let mut x = best_x;
    let mut k = n;
    let cycle = loop {
        if seen[x] != usize::MAX {
            let from = seen[x];
            // walk holds vertices backward in time; reverse into traversal order.
            let mut c: Vec<usize> = walk[from..].to_vec();
            c.reverse();
            break c;
        }
        seen[x] = walk.len();
        walk.push(x);
        x = back[k][x] as usize;
        k -= 1;
    };
    let lambda = cycle_mean(kernel, &cycle).expect("walk edges are stored");
    MinMeanCycle { lambda, cycle }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalReport {
    /// `−λ/dt` from Karp; exact for the discrete system.
    pub c_karp: f64,
    /// Power-iteration estimate.
    pub c_est: f64,
    pub gap: f64,
    pub allowed_gap: f64,
    pub lambda_karp: f64,
    pub lambda_power: f64,
    pub iterations: usize,
    pub cycle: Vec<usize>,
}

/// Runs Karp and backward value iteration and cross-checks the two.
pub fn critical_value(
    kernel: &ActionKernel,
    seed: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<CriticalReport> {
    let karp = karp_min_mean_cycle(kernel);
    let dt = kernel.dt();
    let sol = solve_weak_kam(kernel, Direction::Backward, seed, tol, max_iter)?;
    let c_karp = karp.critical_value(dt);
    let gap = (c_karp - sol.c_est).abs();
    let allowed_gap = 10.0 * tol / dt;
    if gap > allowed_gap {
        return Err(Error::Consistency {
            what: "Karp and power-iteration critical values",
            first: c_karp,
            second: sol.c_est,
            allowed: allowed_gap,
        });
    }
    Ok(CriticalReport {
        c_karp,
        c_est: sol.c_est,
        gap,
        allowed_gap,
        lambda_karp: karp.lambda,
        lambda_power: -sol.c_est * dt,
        iterations: sol.iterations,
        cycle: karp.cycle,
    })
}

/// Strongly connected classes of the critical graph.
///
/// With `u` a backward fixed point for value `c`, an edge is tight when
/// `h(y, x) + c·dt − (u(x) − u(y)) ≤ eps`. Cycles of tight edges have mean
/// exactly `−c·dt`, so the critical classes are the cyclic components of the
/// tight subgraph. The fixed point is unique modulo constants exactly when
/// there is one class.
pub fn critical_classes(kernel: &ActionKernel, u: &GridFunction, c: f64, eps: f64) -> Result<Vec<Vec<usize>>> {
    u.ensure_same_grid(kernel.grid())?;
    let n = kernel.grid().len();
    let cdt = c * kernel.dt();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    let mut tight_loop = vec![false; n];
    for x in 0..n {
        for (y, h) in kernel.incoming(x) {
            if h + cdt - (u.get(x) - u.get(y)) <= eps {
                if y == x {
                    tight_loop[x] = true;
                } else {
                    g.add_edge(nodes[y], nodes[x], ());
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|comp| {
            let mut c: Vec<usize> = comp.into_iter().map(|i| i.index()).collect();
            c.sort_unstable();
            c
        })
        .filter(|c| c.len() > 1 || tight_loop[c[0]])
        .collect();
    classes.sort();
    Ok(classes)
}

pub fn write_cycle_points<W: Write>(grid: &PeriodicGrid, points: &[usize], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..grid.ndim()).map(|a| format!("x{a}")).collect();
    w.write_record(&header)?;
    for &p in points {
        w.write_record(grid.coordinates(p).iter().map(|c| format!("{c:e}")))?;
    }
    w.flush()?;
    Ok(())
}
