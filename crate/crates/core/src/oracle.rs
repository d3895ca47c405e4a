//! Closed-form weak KAM solutions of the pendulum, used as references.
//!
//! On the n-sphere with potential equal to the height coordinate the backward
//! solution depends on the height `z` only:
//!
//! ```text
//! u±(z) = ± ∫_z^1 √((2 − 2s)/(1 − s²)) ds,     u(N) = 0.
//! ```
//!
//! Restricting to a great circle through the north pole with `z = cos θ` gives
//! the circle pendulum `L = v²/2 − cos θ`, whose solution is `±(4 − 4 cos(θ/2))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Absolute accuracy requested from the quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;

// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and |Kronrod − Gauss| on one interval.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration by recursive bisection.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    rec(&f, a, b, tol, 40)
}

/// The height integrand `√((2 − 2s)/(1 − s²))`.
pub fn height_integrand(s: f64) -> f64 {
    ((2.0 - 2.0 * s) / ((1.0 - s) * (1.0 + s))).sqrt()
}

/// `u±(z)` on the sphere, with `u(N) = 0`.
///
/// The integral is evaluated after substituting `s = cos t`, which removes the
/// endpoint singularity at `s = −1`.
pub fn sphere_reference(z: f64, branch: Branch) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("height {z} outside [-1, 1]")));
    }
    let upper = z.acos();
    let val = integrate(
        |t: f64| height_integrand(t.cos()) * t.sin(),
        0.0,
        upper,
        QUADRATURE_TOL,
    );
    Ok(branch.sign() * val)
}

/// `u±(θ)` on the circle pendulum, `θ ∈ [−π, π]`.
pub fn circle_reference(theta: f64, branch: Branch) -> Result<f64> {
    use std::f64::consts::PI;
    if !(-PI..=PI).contains(&theta) {
        return Err(Error::Domain(format!("angle {theta} outside [-π, π]")));
    }
    sphere_reference(theta.cos(), branch)
}

/// `4 − 4 cos(θ/2)` with the branch sign.
pub fn circle_closed_form(theta: f64, branch: Branch) -> f64 {
    branch.sign() * (4.0 - 4.0 * (0.5 * theta).cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub branch: Branch,
}

impl ReferenceSolution {
    pub fn plus() -> Self {
        Self { branch: Branch::Plus }
    }

    pub fn minus() -> Self {
        Self {
            branch: Branch::Minus,
        }
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        circle_reference(theta, self.branch)
    }
}

/// Sup-norm distance to the reference after aligning both at `θ = 0`.
pub fn compare_to_reference(u: &GridFunction, reference: &ReferenceSolution) -> Result<f64> {
    let grid = u.grid();
    if grid.ndim() != 1 {
        return Err(Error::GridMismatch(format!(
            "reference comparison needs a circle, got {} axes",
            grid.ndim()
        )));
    }
    let anchor = grid.nearest_index(&[0.0]);
    let theta0 = grid.coordinates(anchor)[0];
    let base = u.get(anchor) - reference.eval(theta0)?;
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let theta = grid.coordinates(i)[0];
        worst = worst.max((u.get(i) - base - reference.eval(theta)?).abs());
    }
    Ok(worst)
}

/// Writes `theta,u_plus,u_minus` on `count` points spanning `[−π, π]`.
pub fn write_reference_csv<W: Write>(count: usize, writer: W) -> Result<()> {
    use std::f64::consts::PI;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["theta", "u_plus", "u_minus"])?;
    for i in 0..count {
        let theta = -PI + 2.0 * PI * i as f64 / (count.max(2) - 1) as f64;
        let theta = theta.clamp(-PI, PI);
        w.write_record(&[
            format!("{theta:e}"),
            format!("{:e}", circle_reference(theta, Branch::Plus)?),
            format!("{:e}", circle_reference(theta, Branch::Minus)?),
        ])?;
    }
    w.flush()?;
    Ok(())
}
