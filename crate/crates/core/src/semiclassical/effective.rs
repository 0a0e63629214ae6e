//! Lattice parameters read off the localized basis, and their `h` scaling.

use serde::Serialize;

use super::{agmon_action, band_edges, build_basis, half_agmon_points, single_well_state, BandEdges, ContinuumModel, LocalizedBasis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiEntry {
    pub n: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveParameters {
    pub h: f64,
    /// Single-well ground energy.
    pub lambda1: f64,
    /// `<u_0, H_B u_0>`.
    pub onsite: f64,
    /// `-<u_0, H_B u_1>`.
    pub beta: f64,
    pub c0: f64,
    pub c1: f64,
    pub s0: f64,
    /// `<u_n, W u_n> / a` for `|n| <= W`.
    pub xi_tilde: Vec<XiEntry>,
    /// `eta C1`.
    pub nu: f64,
    /// `F a`.
    pub f: f64,
    pub edges: BandEdges,
    /// Distance from `lambda1` to `[E_1^b, E_1^t]`.
    pub lambda1_band_distance: f64,
}

impl EffectiveParameters {
    pub fn xi(&self, n: i64) -> Option<f64> {
        self.xi_tilde.iter().find(|e| e.n == n).map(|e| e.value)
    }

    /// `max_n |xi~(n) - C0/a - n|`.
    pub fn xi_residual(&self, period: f64) -> f64 {
        self.xi_tilde.iter().fold(0.0f64, |m, e| m.max((e.value - self.c0 / period - e.n as f64).abs()))
    }
}

pub fn effective_parameters(model: &ContinuumModel, basis: &LocalizedBasis) -> Result<EffectiveParameters> {
    let edges = band_edges(model)?;
    let well = single_well_state(model)?;
    let grid = basis.grid();
    let k0 = basis.index(0).ok_or_else(|| Error::Domain("basis has no site 0".into()))?;
    let beta = -basis.hamiltonian[(k0, k0 + 1)];
    let onsite = basis.hamiltonian[(k0, k0)];
    let u0 = basis.site(0);
    let c1 = u0.iter().map(|v| v.powi(4)).sum::<f64>() * grid.spacing;
    let (lo, hi) = half_agmon_points(model);
    let c0 = (0..grid.n_points)
        .map(|i| {
            let x = grid.x(i);
            let w = if x < lo || x > hi {
                0.0
            } else if (x - lo).abs() < 0.5 * grid.spacing || (hi - x).abs() < 0.5 * grid.spacing {
                0.5
            } else {
                1.0
            };
            w * x * u0[i] * u0[i]
        })
        .sum::<f64>()
        * grid.spacing;
    let stark = basis.supercell.stark();
    let a = model.period();
    let w = basis.supercell.window;
    let xi_tilde = (-w..=w)
        .map(|n| {
            let u = basis.site(n);
            let value = u.iter().zip(&stark).map(|(x, s)| s * x * x).sum::<f64>() * grid.spacing / a;
            XiEntry { n, value }
        })
        .collect();
    let lambda1_band_distance = if well.lambda1 < edges.e1_bottom {
        edges.e1_bottom - well.lambda1
    } else if well.lambda1 > edges.e1_top {
        well.lambda1 - edges.e1_top
    } else {
        0.0
    };
    Ok(EffectiveParameters {
        h: model.h,
        lambda1: well.lambda1,
        onsite,
        beta,
        c0,
        c1,
        s0: agmon_action(model),
        xi_tilde,
        nu: model.eta * c1,
        f: model.field * a,
        edges,
        lambda1_band_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub h: f64,
    pub params: EffectiveParameters,
    /// `|4 beta - (E_1^t - E_1^b)| / (E_1^t - E_1^b)`.
    pub beta_band_mismatch: f64,
    pub gap_over_h: f64,
    pub c1_sqrt_h: f64,
    /// `e^{-(S0 + rho)/h} <= beta <= e^{-(S0 - rho)/h}`.
    pub bracket_ok: bool,
    /// `||u_0 u_1||_{L^1}`.
    pub overlap_l1: f64,
    /// `||u_0||_inf h^{1/4}`.
    pub u_inf_scaled: f64,
    /// `max_x sum_n |u_n(x)| h^{1/2}`.
    pub sum_abs_scaled: f64,
    pub xi_residual: f64,
    pub translation_defect: f64,
    pub orthonormality_defect: f64,
}

/// Everything the scaling report needs at one `h`.
pub fn scaling_point(model: &ContinuumModel, window: i64, rho_fraction: f64) -> Result<ScalingPoint> {
    let basis = build_basis(model, window)?;
    let p = effective_parameters(model, &basis)?;
    let h = model.h;
    let bw = p.edges.bandwidth();
    let rho = rho_fraction * p.s0;
    let grid = basis.grid();
    let overlap_l1 = basis.site(0).iter().zip(basis.site(1)).map(|(a, b)| (a * b).abs()).sum::<f64>() * grid.spacing;
    let u_inf = basis.site(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ScalingPoint {
        h,
        beta_band_mismatch: (4.0 * p.beta - bw).abs() / bw,
        gap_over_h: p.edges.gap() / h,
        c1_sqrt_h: p.c1 * h.sqrt(),
        bracket_ok: (-(p.s0 + rho) / h).exp() <= p.beta && p.beta <= (-(p.s0 - rho) / h).exp(),
        overlap_l1,
        u_inf_scaled: u_inf * h.powf(0.25),
        sum_abs_scaled: basis.sum_abs_max() * h.sqrt(),
        xi_residual: p.xi_residual(model.period()),
        translation_defect: basis.translation_defect(0),
        orthonormality_defect: basis.orthonormality_defect,
        params: p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LogFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    LogFit { slope, intercept: my - slope * mx, r_squared: sxy * sxy / (sxx * syy) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub s0: f64,
    pub rho: f64,
    /// `log beta` against `-1/h`.
    pub beta_fit: LogFit,
    pub slope_ratio: f64,
    /// `log (E_1^t - E_1^b)` against `-1/h`.
    pub bandwidth_fit: LogFit,
    /// `log ||u_0 u_1||_1` against `-1/h`.
    pub overlap_fit: LogFit,
    pub all_beta_positive: bool,
    pub points: Vec<ScalingPoint>,
}

/// Fit over at least four `h` values.
pub fn hopping_scaling_report(points: Vec<ScalingPoint>, rho_fraction: f64) -> Result<ScalingReport> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 h values, got {}", points.len())));
    }
    let s0 = points[0].params.s0;
    let x: Vec<f64> = points.iter().map(|p| -1.0 / p.h).collect();
    let ln = |f: &dyn Fn(&ScalingPoint) -> f64| points.iter().map(|p| f(p).ln()).collect::<Vec<_>>();
    let beta_fit = linear_fit(&x, &ln(&|p| p.params.beta));
    let bandwidth_fit = linear_fit(&x, &ln(&|p| p.params.edges.bandwidth()));
    let overlap_fit = linear_fit(&x, &ln(&|p| p.overlap_l1));
    Ok(ScalingReport {
        s0,
        rho: rho_fraction * s0,
        slope_ratio: beta_fit.slope / s0,
        beta_fit,
        bandwidth_fit,
        overlap_fit,
        all_beta_positive: points.iter().all(|p| p.params.beta > 0.0),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameters_at_moderate_h() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        let p = scaling_point(&m, 3, 0.2).unwrap();
        assert!(p.params.beta > 0.0);
        assert!(p.params.c1 > 0.0);
        assert!(p.params.c0.abs() < 1e-8);
        assert!(p.beta_band_mismatch < 0.2, "{}", p.beta_band_mismatch);
        assert!((p.params.nu - m.eta * p.params.c1).abs() < 1e-18);
        assert!((p.params.f - m.field).abs() < 1e-18);
        assert!(p.xi_residual < 1e-2);
        assert!(p.bracket_ok);
    }

    #[test]
    fn too_few_points() {
        assert!(hopping_scaling_report(vec![], 0.2).is_err());
    }
}

