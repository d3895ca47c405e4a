//! Discrete Legendre–Fenchel transform in linear time.
//!
//! The conjugate `g(v) = max_i [p_i v − f_i]` only depends on the lower convex
//! hull of the samples, and its maximizer moves monotonically along that hull
//! as `v` increases. Building the hull (monotone chain) and sweeping the sorted
//! targets against it costs `O(n + m)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced points `start + j·step`, `j = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl UniformAxis {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 || end.partial_cmp(&start) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Domain(format!(
                "axis [{start}, {end}] with {count} points"
            )));
        }
        Ok(Self {
            start,
            step: (end - start) / (count - 1) as f64,
            count,
        })
    }

    /// `count` points spanning `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, count: usize) -> Self {
        Self::new(-half_width, half_width, count.max(2)).expect("valid symmetric axis")
    }

    pub fn point(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.point(j)).collect()
    }
}

/// Indices of the lower convex hull of `(xs[i], ys[i])`, `xs` strictly increasing.
fn lower_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b is dropped when it lies strictly above the chord a→i.
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Conjugate values and maximizing sample index for every target.
///
/// `points` must be strictly increasing and `targets` non-decreasing. Ties
/// between hull vertices resolve toward the larger sample index.
pub fn conjugate_sorted(points: &[f64], values: &[f64], targets: &[f64]) -> Vec<(f64, usize)> {
    assert_eq!(points.len(), values.len());
    assert!(!points.is_empty());
    debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(targets.windows(2).all(|w| w[0] <= w[1]));
    let hull = lower_hull(points, values);
    let obj = |i: usize, v: f64| points[i] * v - values[i];
    let mut j = 0;
    targets
        .iter()
        .map(|&v| {
            while j + 1 < hull.len() && obj(hull[j + 1], v) >= obj(hull[j], v) {
                j += 1;
            }
            (obj(hull[j], v), hull[j])
        })
        .collect()
}

/// Legendre–Fenchel transform of uniform samples of `f`, evaluated on `targets`.
///
/// Fails when some target's supremum is attained only at the first or last
/// sample: the sampled range is then too narrow to contain the maximizer.
pub fn legendre_transform(
    samples: &[f64],
    sample_axis: &UniformAxis,
    targets: &UniformAxis,
) -> Result<Vec<f64>> {
    if samples.len() < 3 || samples.len() != sample_axis.count {
        return Err(Error::Domain(format!(
            "need at least 3 samples matching the axis, got {} for {}",
            samples.len(),
            sample_axis.count
        )));
    }
    let points = sample_axis.points();
    let vs = targets.points();
    let last = samples.len() - 1;
    let obj = |i: usize, v: f64| points[i] * v - samples[i];
    let out = conjugate_sorted(&points, samples, &vs);
    let mut values = Vec::with_capacity(out.len());
    for (&v, &(g, arg)) in vs.iter().zip(&out) {
        let slack = 1e-12 * (1.0 + g.abs());
        let interior_tie = match arg {
            0 => (1..last).any(|i| obj(i, v) >= g - slack),
            a if a == last => (1..last).rev().any(|i| obj(i, v) >= g - slack),
            _ => true,
        };
        if !interior_tie {
            return Err(Error::RangeTooSmall { target: v });
        }
        values.push(g);
    }
    Ok(values)
}
