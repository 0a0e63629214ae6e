//! Ground state of the potential with every well but the one at 0 filled.

use serde::Serialize;

use super::bands::inverse_iteration;
use super::{dirichlet_energy, smoothstep, ContinuumModel, Grid1D};
use crate::error::Result;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleWell {
    pub lambda1: f64,
    /// Interior points of `[-(P + 1/2) a, (P + 1/2) a]`.
    pub grid: Grid1D,
    /// Positive, `L^2`-normalized.
    pub w0: Vec<f64>,
    /// Index of `x = 0`.
    pub centre: usize,
    /// `max |w0(x) - w0(-x)|`.
    pub evenness_defect: f64,
}

impl SingleWell {
    pub fn half_points(&self) -> usize {
        self.centre
    }
}

/// `theta(x) = eps * smoothstep((|x| - delta) / delta)`.
pub fn filling(model: &ContinuumModel, x: f64) -> f64 {
    let delta = model.numerics.fill_delta * model.period();
    model.numerics.fill_eps * model.v0 * smoothstep((x.abs() - delta) / delta)
}

pub fn single_well_state(model: &ContinuumModel) -> Result<SingleWell> {
    model.validate()?;
    let n_cell = model.cell_points();
    let dx = model.spacing();
    let a = model.period();
    let pad = model.numerics.well_padding;
    let total = (2 * pad + 1) * n_cell;
    let half_len = (pad as f64 + 0.5) * a;
    let grid = Grid1D { x_min: -half_len + dx, n_points: total - 1, spacing: dx };
    let pot: Vec<f64> = (0..grid.n_points)
        .map(|i| {
            let x = grid.x(i);
            model.potential(x) + filling(model, x)
        })
        .collect();
    let c = model.h * model.h / (dx * dx);
    let off = vec![-c; grid.n_points - 1];
    let t = Tridiagonal::new(off.clone(), pot.iter().map(|v| 2.0 * c + v).collect(), off)?;
    let mut w = inverse_iteration(&t)?;
    let lambda1 = dirichlet_energy(c, &pot, &w, &w) / w.iter().map(|v| v * v).sum::<f64>();
    let norm = grid.norm(&w);
    w.iter_mut().for_each(|v| *v /= norm);
    let centre = total / 2 - 1;
    let evenness_defect = (1..=centre).fold(0.0f64, |m, j| m.max((w[centre + j] - w[centre - j]).abs()));
    Ok(SingleWell { lambda1, grid, w0: w, centre, evenness_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiclassical::band_edges;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_oracle() {
        let m = ContinuumModel::new(1.0, PI, 0.02).unwrap();
        let w = single_well_state(&m).unwrap();
        let omega = m.h * m.k_l * m.v0.sqrt();
        assert!((w.lambda1 - omega).abs() < 0.1 * omega);
        assert!(w.grid.x(w.centre).abs() < 1e-12);
        assert!((w.grid.norm(&w.w0) - 1.0).abs() < 1e-14);
        assert!(w.evenness_defect < 1e-8);
        assert!(w.w0.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn close_to_the_first_band() {
        for h in [0.03, 0.02] {
            let m = ContinuumModel::new(1.0, PI, h).unwrap();
            let w = single_well_state(&m).unwrap();
            let e = band_edges(&m).unwrap();
            let delta = 1e-3 * h;
            assert!(w.lambda1 > e.e1_bottom - delta && w.lambda1 < e.e1_top + delta, "h = {h}");
        }
    }

    #[test]
    fn filling_profile() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        assert_eq!(filling(&m, 0.0), 0.0);
        assert_eq!(filling(&m, 0.2), 0.0);
        assert_eq!(filling(&m, -0.6), 0.5);
        assert!(filling(&m, 0.4) > 0.0 && filling(&m, 0.4) < 0.5);
    }
}

