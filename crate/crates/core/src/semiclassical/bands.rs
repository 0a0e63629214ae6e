//! One-cell Bloch problem with quasi-periodic closure `psi(x + a) = e^{ika} psi(x)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::ContinuumModel;
use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEdges {
    /// `E_1(0)`.
    pub e1_bottom: f64,
    /// `E_1(b/2)`.
    pub e1_top: f64,
    /// `E_2(b/2)`.
    pub e2_bottom: f64,
    /// Largest relative edge drift under grid doubling.
    pub drift: f64,
    pub cell_points: usize,
}

impl BandEdges {
    pub fn bandwidth(&self) -> f64 {
        self.e1_top - self.e1_bottom
    }

    pub fn gap(&self) -> f64 {
        self.e2_bottom - self.e1_top
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandData {
    /// Samples in `(-b/2, b/2]`.
    pub k: Vec<f64>,
    /// `energies[l][j] = E_{l+1}(k_j)`.
    pub energies: Vec<Vec<f64>>,
    /// `vectors[j][l]`: Bloch vector on the cell grid `x_i = -a/2 + i dx`.
    #[serde(skip)]
    pub vectors: Vec<Vec<Vec<Complex64>>>,
}

pub(super) fn inverse_iteration(t: &Tridiagonal) -> Result<Vec<f64>> {
    let lu = t.factor()?;
    let mut x = vec![1.0; t.len()];
    for _ in 0..1000 {
        let mut y = lu.solve(&x)?;
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        y.iter_mut().for_each(|v| *v /= scale);
        let change = y.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = y;
        if change < 1e-15 {
            break;
        }
    }
    Ok(x)
}

/// `[c sum |v_{i+1} - v_i|^2 + sum V |v|^2] / sum |v|^2` with `v_n = phase v_0`.
fn bloch_rayleigh(c: f64, pot: &[f64], v: &[Complex64], phase: Complex64) -> f64 {
    let n = v.len();
    let mut kin = 0.0;
    for i in 0..n {
        let next = if i + 1 < n { v[i + 1] } else { phase * v[0] };
        kin += (next - v[i]).norm_sqr();
    }
    let pot: f64 = pot.iter().zip(v).map(|(p, z)| p * z.norm_sqr()).sum();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (c * kin + pot) / norm
}

fn cell_potential(model: &ContinuumModel) -> (usize, f64, Vec<f64>) {
    let n = model.cell_points();
    let dx = model.spacing();
    let a = model.period();
    let pot = (0..n).map(|i| model.potential(-0.5 * a + i as f64 * dx)).collect();
    (n, model.h * model.h / (dx * dx), pot)
}

fn half_cell_problem(c: f64, v: &[f64], lo_even: bool, hi_even: bool) -> Tridiagonal {
    // Unknowns on j = first..=last of the half cell [0, a/2].
    let m = v.len() - 1;
    let first = if lo_even { 0 } else { 1 };
    let last = if hi_even { m } else { m - 1 };
    let len = last - first + 1;
    let diag = (first..=last).map(|j| 2.0 * c + v[j]).collect();
    let mut sub = vec![-c; len - 1];
    let mut sup = vec![-c; len - 1];
    if lo_even {
        sup[0] = -2.0 * c;
    }
    if hi_even {
        sub[len - 2] = -2.0 * c;
    }
    Tridiagonal { sub, diag, sup }
}

fn edges_at(model: &ContinuumModel) -> Result<[f64; 3]> {
    let (n, c, pot) = cell_potential(model);
    let m = n / 2;
    // half[j] = V(j dx) for j = 0..=m.
    let half: Vec<f64> = (0..=m).map(|j| pot[(m + j) % n]).collect();
    let full = |f: &dyn Fn(i64) -> f64| -> Vec<Complex64> {
        (0..n).map(|i| Complex64::new(f(i as i64 - m as i64), 0.0)).collect()
    };
    let one = Complex64::new(1.0, 0.0);

    let a = inverse_iteration(&half_cell_problem(c, &half, true, true))?;
    let e1b = bloch_rayleigh(c, &pot, &full(&|j| a[j.unsigned_abs() as usize]), one);

    let b = inverse_iteration(&half_cell_problem(c, &half, true, false))?;
    let vb = full(&|j| if j.unsigned_abs() as usize >= m { 0.0 } else { b[j.unsigned_abs() as usize] });
    let e1t = bloch_rayleigh(c, &pot, &vb, -one);

    let d = inverse_iteration(&half_cell_problem(c, &half, false, true))?;
    let vd = full(&|j| if j == 0 { 0.0 } else { j.signum() as f64 * d[j.unsigned_abs() as usize - 1] });
    let e2b = bloch_rayleigh(c, &pot, &vd, -one);
    Ok([e1b, e1t, e2b])
}

/// First-band edges and the bottom of the second band, from the parity
/// reductions of the `k = 0` and `k = b/2` problems, with a grid-doubling check.
pub fn band_edges(model: &ContinuumModel) -> Result<BandEdges> {
    model.validate()?;
    let coarse = edges_at(model)?;
    let fine = edges_at(&model.refined(2.0))?;
    let drift = coarse.iter().zip(&fine).fold(0.0f64, |m, (c, f)| m.max(((c - f) / f).abs()));
    if drift > model.numerics.drift_tol {
        return Err(Error::Resolution { drift });
    }
    Ok(BandEdges {
        e1_bottom: coarse[0],
        e1_top: coarse[1],
        e2_bottom: coarse[2],
        drift,
        cell_points: model.cell_points(),
    })
}

/// Dense Bloch eigenproblems at `n_k` momenta in `(-b/2, b/2]`.
pub fn solve_bands(model: &ContinuumModel, n_k: usize, n_bands: usize) -> Result<BandData> {
    model.validate()?;
    let (n, c, pot) = cell_potential(model);
    if n_k == 0 || n_bands == 0 || n_bands > n {
        return Err(Error::Domain(format!("need n_k >= 1 and 1 <= n_bands <= {n}")));
    }
    let a = model.period();
    let b = 2.0 * std::f64::consts::PI / a;
    let ks: Vec<f64> = (0..n_k).map(|j| -0.5 * b + (j + 1) as f64 * b / n_k as f64).collect();
    let mut energies = vec![Vec::with_capacity(n_k); n_bands];
    let mut vectors = Vec::with_capacity(n_k);
    for &k in &ks {
        let phase = Complex64::from_polar(1.0, k * a);
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = Complex64::new(2.0 * c + pot[i], 0.0);
            if i + 1 < n {
                h[(i, i + 1)] = Complex64::new(-c, 0.0);
                h[(i + 1, i)] = Complex64::new(-c, 0.0);
            }
        }
        h[(0, n - 1)] += -c * phase.conj();
        h[(n - 1, 0)] += -c * phase;
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let mut at_k = Vec::with_capacity(n_bands);
        for (l, &col) in order.iter().take(n_bands).enumerate() {
            let v: Vec<Complex64> = eig.eigenvectors.column(col).iter().copied().collect();
            energies[l].push(bloch_rayleigh(c, &pot, &v, phase));
            at_k.push(v);
        }
        vectors.push(at_k);
    }
    Ok(BandData { k: ks, energies, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn coarse(h: f64) -> ContinuumModel {
        ContinuumModel::new(1.0, PI, h).unwrap()
    }

    #[test]
    fn free_particle_bands() {
        // V0 -> 0: E_1(k) = h^2 k^2 up to the O(dx^2) finite-difference error.
        let mut m = coarse(0.1);
        m.v0 = 1e-12;
        m.numerics.min_cell_points = 400;
        let data = solve_bands(&m, 8, 2).unwrap();
        for (j, k) in data.k.iter().enumerate() {
            let exact = m.h * m.h * k * k;
            assert!((data.energies[0][j] - exact).abs() < 1e-4 * (1.0 + exact), "{k}");
        }
        // second band at k = b/2 is degenerate with the first
        let last = data.k.len() - 1;
        assert!((data.energies[1][last] - data.energies[0][last]).abs() < 1e-8);
    }

    #[test]
    fn bands_are_even_and_ordered() {
        let data = solve_bands(&coarse(0.1), 8, 3).unwrap();
        let nk = data.k.len();
        for j in 0..nk - 1 {
            let mirror = nk - 2 - j;
            if mirror == j {
                continue;
            }
            assert!((data.k[j] + data.k[mirror]).abs() < 1e-12);
            for band in &data.energies {
                assert!((band[j] - band[mirror]).abs() < 1e-9);
            }
        }
        for j in 0..nk {
            assert!(data.energies[0][j] <= data.energies[1][j]);
            assert!(data.energies[1][j] <= data.energies[2][j]);
        }
    }

    #[test]
    fn parity_edges_match_dense_bands() {
        let m = coarse(0.1);
        let edges = band_edges(&m).unwrap();
        let data = solve_bands(&m, 4, 2).unwrap();
        // k samples: -b/4, 0, b/4, b/2
        assert!((data.energies[0][1] - edges.e1_bottom).abs() < 1e-12);
        assert!((data.energies[0][3] - edges.e1_top).abs() < 1e-12);
        assert!((data.energies[1][3] - edges.e2_bottom).abs() < 1e-12);
        assert!(edges.e1_bottom < edges.e1_top && edges.e1_top < edges.e2_bottom);
    }

    #[test]
    fn harmonic_estimate() {
        let m = coarse(0.02);
        let edges = band_edges(&m).unwrap();
        let omega = m.h * m.k_l * m.v0.sqrt();
        assert!((edges.e1_bottom - omega).abs() < 0.1 * omega);
        assert!(edges.drift < 1e-4);
        assert!(edges.bandwidth() > 0.0 && edges.bandwidth() < 1e-12);
    }

    #[test]
    fn resolution_error_on_coarse_grid() {
        let mut m = coarse(0.05);
        m.numerics.points_per_length = 0.1;
        m.numerics.min_cell_points = 16;
        m.numerics.drift_tol = 1e-8;
        assert!(matches!(band_edges(&m), Err(Error::Resolution { .. })));
    }

    #[test]
    fn second_order_convergence() {
        let m = coarse(0.05);
        let e = |f: f64| edges_at(&m.refined(f)).unwrap()[0];
        let (e1, e2, e4) = (e(1.0), e(2.0), e(4.0));
        let ratio = (e1 - e2) / (e2 - e4);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }
}
