//! Effective lattice parameters from the periodic Schrödinger operator
//! `H_B = -h^2 d^2/dx^2 + V0 sin^2(kL x)` plus a compactly supported tilt `F W(x)`.
//!
//! Everything is discretized with second-order central differences on grids
//! whose period holds an even number of points, so that well centres and
//! barrier tops sit on grid points and a lattice translation is an index shift.

mod bands;
mod basis;
pub use basis::{build_basis, LocalizedBasis, Supercell};
mod effective;
pub use effective::{effective_parameters, hopping_scaling_report, linear_fit, scaling_point, EffectiveParameters, LogFit, ScalingPoint, ScalingReport, XiEntry};
mod well;
pub use well::{filling, single_well_state, SingleWell};

pub use bands::{band_edges, solve_bands, BandData, BandEdges};




use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the Stark-type potential `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StarkShape {
    /// `W(x) = x` up to the barrier beyond the last window well, then a smoothstep to 0 over two cells.
    #[default]
    Tapered,
    /// `W(x) = x` everywhere on the grid.
    Linear,
}

/// Grid and solver knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Grid points per de Broglie length `h / sqrt(V0)`.
    pub points_per_length: f64,
    pub min_cell_points: usize,
    /// Half-width of the unfilled region around the kept well, in periods.
    pub fill_delta: f64,
    /// Filling height as a fraction of `V0`.
    pub fill_eps: f64,
    /// Cells of padding on each side of the single-well domain.
    pub well_padding: usize,
    /// Relative band-edge drift allowed under grid doubling.
    pub drift_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            points_per_length: 10.0,
            min_cell_points: 64,
            fill_delta: 0.25,
            fill_eps: 0.5,
            well_padding: 2,
            drift_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumModel {
    pub v0: f64,
    pub k_l: f64,
    pub h: f64,
    /// Tilt strength `F`.
    pub field: f64,
    pub eta: f64,
    /// Linear window half-width `N` in periods.
    pub window_n: i64,
    #[serde(default)]
    pub stark: StarkShape,
    #[serde(default)]
    pub numerics: Numerics,
}

impl ContinuumModel {
    /// `F = eta = h^2`, `N = 8`.
    pub fn new(v0: f64, k_l: f64, h: f64) -> Result<Self> {
        let m = Self {
            v0,
            k_l,
            h,
            field: h * h,
            eta: h * h,
            window_n: 8,
            stark: StarkShape::Tapered,
            numerics: Numerics::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("V0", self.v0), ("kL", self.k_l), ("h", self.h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be positive")));
            }
        }
        if !self.field.is_finite() || !self.eta.is_finite() {
            return Err(Error::Domain("F and eta must be finite".into()));
        }
        if self.window_n < 0 {
            return Err(Error::Domain(format!("window N = {} must be >= 0", self.window_n)));
        }
        let n = &self.numerics;
        if !(n.points_per_length > 0.0) || n.min_cell_points < 16 {
            return Err(Error::Domain("grid needs at least 16 points per period".into()));
        }
        if !(n.fill_delta > 0.0 && n.fill_delta < 0.5) || !(n.fill_eps > 0.0) {
            return Err(Error::Domain("filling needs 0 < delta < a/2 and eps > 0".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::PI / self.k_l
    }

    pub fn potential(&self, x: f64) -> f64 {
        let s = (self.k_l * x).sin();
        self.v0 * s * s
    }

    /// Points per period: `max(min, ceil(c a sqrt(V0) / h))`, rounded up to even.
    pub fn cell_points(&self) -> usize {
        let raw = (self.numerics.points_per_length * self.period() * self.v0.sqrt() / self.h).ceil() as usize;
        let n = raw.max(self.numerics.min_cell_points);
        n + n % 2
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.cell_points() as f64
    }

    /// Half-open position where the taper of `W` starts.
    pub fn linear_edge(&self) -> f64 {
        (self.window_n as f64 + 0.5) * self.period()
    }

    pub fn stark_w(&self, x: f64) -> f64 {
        match self.stark {
            StarkShape::Linear => x,
            StarkShape::Tapered => {
                let edge = self.linear_edge();
                let t = (x.abs() - edge) / (2.0 * self.period());
                if t <= 0.0 {
                    x
                } else if t >= 1.0 {
                    0.0
                } else {
                    x * (1.0 - smoothstep(t))
                }
            }
        }
    }

    /// Same model at a different grid density.
    pub fn refined(&self, factor: f64) -> Self {
        let mut m = *self;
        m.numerics.points_per_length *= factor;
        m.numerics.min_cell_points = (m.numerics.min_cell_points as f64 * factor).ceil() as usize;
        m
    }

    pub fn agmon_action(&self) -> f64 {
        agmon_action(self)
    }
}

/// Cubic smoothstep on `[0, 1]`, clamped outside.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Uniform grid `x_i = x_min + i * spacing`, `i < n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub n_points: usize,
    pub spacing: f64,
}

impl Grid1D {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n_points - 1)
    }

    /// Grid-weighted inner product.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.spacing
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// `sqrt(||v||^2 + ||v'||^2)` with a central-difference derivative and zero ghosts.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
        let grad: f64 = (0..n as isize)
            .map(|i| {
                let d = (at(i + 1) - at(i - 1)) / (2.0 * self.spacing);
                d * d
            })
            .sum();
        (self.dot(v, v) + grad * self.spacing).sqrt()
    }
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `S0 = int_0^a sqrt(V)`: Agmon distance between adjacent wells.
pub fn agmon_action(model: &ContinuumModel) -> f64 {
    let f = |x: f64| model.potential(x).sqrt();
    integrate(&f, 0.0, model.period(), 1e-14)
}

/// Points `a_- < 0 < a_+` at Agmon distance `S0 / 2` from the well at 0.
pub fn half_agmon_points(model: &ContinuumModel) -> (f64, f64) {
    let s0 = agmon_action(model);
    let f = |x: f64| model.potential(x).sqrt();
    let solve = |sign: f64| {
        let dist = |t: f64| integrate(&f, 0.0, sign * t, 1e-15).abs() - 0.5 * s0;
        let (mut lo, mut hi) = (0.0, model.period());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dist(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * model.period() {
                break;
            }
        }
        sign * 0.5 * (lo + hi)
    };
    (solve(-1.0), solve(1.0))
}

/// `<p, H_B q>` in difference form on an unweighted grid vector, zero ghosts at both ends.
pub(crate) fn dirichlet_energy(c: f64, pot: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    let mut kin = p[0] * q[0] + p[n - 1] * q[n - 1];
    for i in 0..n - 1 {
        kin += (p[i + 1] - p[i]) * (q[i + 1] - q[i]);
    }
    let pot: f64 = pot.iter().zip(p.iter().zip(q)).map(|(v, (x, y))| v * x * y).sum();
    c * kin + pot
}

/// `H_B q` on an unweighted grid vector, zero ghosts.
pub(crate) fn apply_dirichlet(c: f64, pot: &[f64], q: &[f64]) -> Vec<f64> {
    let n = q.len();
    (0..n)
        .map(|i| {
            let l = if i > 0 { q[i - 1] } else { 0.0 };
            let r = if i + 1 < n { q[i + 1] } else { 0.0 };
            c * (2.0 * q[i] - l - r) + pot[i] * q[i]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn agmon_action_closed_form() {
        for (v0, kl) in [(1.0, PI), (4.0, PI), (1.0, 2.0 * PI), (2.5, 1.3)] {
            let m = ContinuumModel::new(v0, kl, 0.05).unwrap();
            assert!((agmon_action(&m) - 2.0 * v0.sqrt() / kl).abs() < 1e-10);
        }
        let base = agmon_action(&ContinuumModel::new(1.0, PI, 0.05).unwrap());
        assert!((agmon_action(&ContinuumModel::new(4.0, PI, 0.05).unwrap()) - 2.0 * base).abs() < 1e-10);
        assert!((agmon_action(&ContinuumModel::new(1.0, 2.0 * PI, 0.05).unwrap()) - 0.5 * base).abs() < 1e-10);
    }

    #[test]
    fn half_agmon_points_are_half_periods() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        let (lo, hi) = half_agmon_points(&m);
        assert!((lo + 0.5).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn potential_and_grid() {
        let m = ContinuumModel::new(1.0, PI, 0.02).unwrap();
        assert_eq!(m.potential(0.0), 0.0);
        assert!((m.potential(0.5) - 1.0).abs() < 1e-15);
        assert!((m.potential(0.3) - m.potential(1.3)).abs() < 1e-14);
        assert_eq!(m.cell_points(), 500);
        assert_eq!(ContinuumModel::new(1.0, PI, 1.0).unwrap().cell_points(), 64);
        assert_eq!(m.field, 4e-4);
    }

    #[test]
    fn stark_taper() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        assert_eq!(m.stark_w(3.2), 3.2);
        assert_eq!(m.stark_w(-8.5), -8.5);
        assert_eq!(m.stark_w(10.5), 0.0);
        assert_eq!(m.stark_w(-11.0), 0.0);
        let mid = m.stark_w(9.5);
        assert!(mid > 0.0 && mid < 9.5);
        let mut lin = m;
        lin.stark = StarkShape::Linear;
        assert_eq!(lin.stark_w(40.0), 40.0);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ContinuumModel::new(0.0, 1.0, 0.1).is_err());
        assert!(ContinuumModel::new(1.0, -1.0, 0.1).is_err());
        assert!(ContinuumModel::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn difference_form_matches_operator() {
        let pot = [0.3, 1.0, 0.2, 0.7];
        let p = [1.0, -2.0, 0.5, 3.0];
        let q = [0.1, 0.4, -1.0, 2.0];
        let hq = apply_dirichlet(2.0, &pot, &q);
        let direct: f64 = p.iter().zip(&hq).map(|(a, b)| a * b).sum();
        assert!((direct - dirichlet_energy(2.0, &pot, &p, &q)).abs() < 1e-13);
    }

    #[test]
    fn h1_norm_of_constant_interior() {
        let g = Grid1D { x_min: 0.0, n_points: 5, spacing: 0.5 };
        let v = [0.0, 1.0, 1.0, 1.0, 0.0];
        // gradient nonzero at i = 0, 1, 3, 4 with value 1
        assert!((g.h1_norm(&v) - (1.5f64 + 4.0 * 0.5).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn simpson_on_polynomials_and_gaussians() {
        assert!((integrate(&|x: f64| x * x * x, 0.0, 2.0, 1e-13) - 4.0).abs() < 1e-12);
        let g = integrate(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14);
        assert!((g - PI.sqrt()).abs() < 1e-12);
    }
}
