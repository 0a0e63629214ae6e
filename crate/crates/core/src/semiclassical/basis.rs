//! Orthonormal, exponentially localized functions spanning the first band on a supercell.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{apply_dirichlet, band_edges, dirichlet_energy, single_well_state, ContinuumModel, Grid1D};
use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

/// Dirichlet box `[-(W + 5/2) a, (W + 5/2) a]`, edges on barrier tops, wells at `-(W+2)..=(W+2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Supercell {
    pub model: ContinuumModel,
    pub window: i64,
    pub grid: Grid1D,
    pub cell_points: usize,
    #[serde(skip)]
    pub potential: Vec<f64>,
    /// `h^2 / dx^2`.
    pub kinetic: f64,
}

impl Supercell {
    pub fn new(model: &ContinuumModel, window: i64) -> Result<Self> {
        model.validate()?;
        if window < 0 {
            return Err(Error::Domain(format!("window = {window} must be >= 0")));
        }
        let n_cell = model.cell_points();
        let dx = model.spacing();
        let cells = (2 * window + 5) as usize;
        let half_len = (window as f64 + 2.5) * model.period();
        let grid = Grid1D { x_min: -half_len + dx, n_points: cells * n_cell - 1, spacing: dx };
        let potential = (0..grid.n_points).map(|i| model.potential(grid.x(i))).collect();
        Ok(Self { model: *model, window, grid, cell_points: n_cell, potential, kinetic: model.h * model.h / (dx * dx) })
    }

    pub fn wells(&self) -> std::ops::RangeInclusive<i64> {
        -(self.window + 2)..=(self.window + 2)
    }

    /// Grid index of the well centre `x = m a`.
    pub fn well_index(&self, m: i64) -> usize {
        ((m + self.window + 2) as usize * 2 + 1) * self.cell_points / 2 - 1
    }

    pub fn len(&self) -> usize {
        self.grid.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.grid.n_points == 0
    }

    /// `H_B v` on function samples.
    pub fn apply_h(&self, v: &[f64]) -> Vec<f64> {
        apply_dirichlet(self.kinetic, &self.potential, v)
    }

    /// `<p, H_B q>` in `L^2`, difference form.
    pub fn energy(&self, p: &[f64], q: &[f64]) -> f64 {
        dirichlet_energy(self.kinetic, &self.potential, p, q) * self.grid.spacing
    }

    pub fn stark(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.model.stark_w(self.grid.x(i))).collect()
    }

    /// `v(x - shift a)`, zero where undefined.
    pub fn translate(&self, v: &[f64], shift: i64) -> Vec<f64> {
        let d = shift * self.cell_points as i64;
        (0..v.len() as i64)
            .map(|i| {
                let j = i - d;
                if j < 0 || j >= v.len() as i64 {
                    0.0
                } else {
                    v[j as usize]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizedBasis {
    pub supercell: Supercell,
    pub sites: Vec<i64>,
    /// `u[k]` is `u_{sites[k]}` sampled on the supercell grid, `L^2`-normalized.
    #[serde(skip)]
    pub u: Vec<Vec<f64>>,
    /// `<u_m, H_B u_n>`.
    #[serde(skip)]
    pub hamiltonian: DMatrix<f64>,
    /// Ritz values of the first band on the supercell.
    pub band_energies: Vec<f64>,
    pub orthonormality_defect: f64,
    /// `||H Q - Q (Q^T H Q)||_F` of the converged band subspace.
    pub subspace_residual: f64,
    pub iterations: usize,
    pub gauge_flipped: bool,
}

impl LocalizedBasis {
    pub fn index(&self, n: i64) -> Option<usize> {
        self.sites.iter().position(|s| *s == n)
    }

    pub fn site(&self, n: i64) -> &[f64] {
        &self.u[self.index(n).expect("site outside the basis")]
    }

    pub fn grid(&self) -> &Grid1D {
        &self.supercell.grid
    }

    /// `<u_n, v>` for every site.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        self.u.iter().map(|u| self.grid().dot(u, v)).collect()
    }

    /// `sum_n c_n u_n`; `c` is indexed like `sites`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.supercell.len()];
        for (cn, u) in c.iter().zip(&self.u) {
            if *cn != 0.0 {
                out.iter_mut().zip(u).for_each(|(o, x)| *o += cn * x);
            }
        }
        out
    }

    /// `Pi_perp v = v - sum_n <u_n, v> u_n`.
    pub fn project_out(&self, v: &[f64]) -> Vec<f64> {
        let c = self.coefficients(v);
        let p = self.synthesize(&c);
        v.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    /// `max_x |u_{n+1}(x) - u_n(x - a)|`.
    pub fn translation_defect(&self, n: i64) -> f64 {
        let shifted = self.supercell.translate(self.site(n), 1);
        shifted.iter().zip(self.site(n + 1)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max_x sum_{|n| <= W} |u_n(x)|`.
    pub fn sum_abs_max(&self) -> f64 {
        let w = self.supercell.window;
        let mut acc = vec![0.0; self.supercell.len()];
        for (s, u) in self.sites.iter().zip(&self.u) {
            if s.abs() <= w {
                acc.iter_mut().zip(u).for_each(|(a, x)| *a += x.abs());
            }
        }
        acc.into_iter().fold(0.0, f64::max)
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    let q = m.qr().q();
    q.columns(0, k).into_owned()
}

/// Projected single-well translates, symmetrically orthonormalized.
pub fn build_basis(model: &ContinuumModel, window: i64) -> Result<LocalizedBasis> {
    let cell = Supercell::new(model, window)?;
    let edges = band_edges(model)?;
    let well = single_well_state(model)?;
    let sites: Vec<i64> = cell.wells().collect();
    let n = cell.len();
    let k = sites.len();
    let root_dx = cell.grid.spacing.sqrt();

    // Unweighted translates of w0.
    let mut w = DMatrix::<f64>::zeros(n, k);
    for (col, &m) in sites.iter().enumerate() {
        let centre = cell.well_index(m) as i64;
        for (j, val) in well.w0.iter().enumerate() {
            let i = centre + j as i64 - well.centre as i64;
            if i >= 0 && (i as usize) < n {
                w[(i as usize, col)] = val * root_dx;
            }
        }
    }

    let sigma = edges.e1_bottom - 0.2 * edges.gap();
    let off = vec![-cell.kinetic; n - 1];
    let shifted = Tridiagonal::new(off.clone(), cell.potential.iter().map(|v| 2.0 * cell.kinetic + v - sigma).collect(), off)?;
    let lu = shifted.factor()?;
    let mut q = orthonormalize(w.clone());
    let mut iterations = 0;
    for it in 1..=200 {
        let mut y = DMatrix::<f64>::zeros(n, k);
        for col in 0..k {
            let x: Vec<f64> = q.column(col).iter().copied().collect();
            let s = lu.solve(&x)?;
            y.column_mut(col).copy_from_slice(&s);
        }
        let next = orthonormalize(y);
        let overlap = q.transpose() * &next;
        let change = (&next - &q * overlap).amax();
        q = next;
        iterations = it;
        if change < 1e-15 {
            break;
        }
    }

    let cols: Vec<Vec<f64>> = (0..k).map(|c| q.column(c).iter().copied().collect()).collect();
    let mut a_q = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let e = dirichlet_energy(cell.kinetic, &cell.potential, &cols[i], &cols[j]);
            a_q[(i, j)] = e;
            a_q[(j, i)] = e;
        }
    }
    let mut resid = 0.0;
    for (c, col) in cols.iter().enumerate() {
        let hq = apply_dirichlet(cell.kinetic, &cell.potential, col);
        for (i, v) in hq.iter().enumerate() {
            let fit: f64 = (0..k).map(|j| q[(i, j)] * a_q[(j, c)]).sum();
            resid += (v - fit) * (v - fit);
        }
    }
    let mut band_energies: Vec<f64> = SymmetricEigen::new(a_q.clone()).eigenvalues.iter().copied().collect();
    band_energies.sort_by(f64::total_cmp);

    let b = q.transpose() * &w;
    let gram = b.transpose() * &b;
    let eig = SymmetricEigen::new(gram);
    let floor = 1e-8 * eig.eigenvalues.amax();
    let available = eig.eigenvalues.iter().filter(|v| **v > floor).count();
    if available < k {
        return Err(Error::RankDeficient { available, requested: k });
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let mut c = b * inv_sqrt;

    let shift = a_q.trace() / k as f64;
    let centred = &a_q - DMatrix::<f64>::identity(k, k) * shift;
    let mut ham = c.transpose() * centred * &c + DMatrix::<f64>::identity(k, k) * shift;
    let k0 = (window + 2) as usize;
    let gauge_flipped = ham[(k0, k0 + 1)] > 0.0;
    if gauge_flipped {
        for (col, &m) in sites.iter().enumerate() {
            if m.rem_euclid(2) == 1 {
                c.column_mut(col).neg_mut();
                ham.column_mut(col).neg_mut();
                ham.row_mut(col).neg_mut();
            }
        }
    }
    let u_mat = &q * &c;
    let gram_u = u_mat.transpose() * &u_mat;
    let orthonormality_defect = (gram_u - DMatrix::<f64>::identity(k, k)).amax();
    let u = (0..k).map(|col| u_mat.column(col).iter().map(|v| v / root_dx).collect()).collect();

    Ok(LocalizedBasis {
        supercell: cell,
        sites,
        u,
        hamiltonian: ham,
        band_energies,
        orthonormality_defect,
        subspace_residual: resid.sqrt(),
        iterations,
        gauge_flipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn basis(h: f64, window: i64) -> LocalizedBasis {
        build_basis(&ContinuumModel::new(1.0, PI, h).unwrap(), window).unwrap()
    }

    #[test]
    fn supercell_geometry() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        let cell = Supercell::new(&m, 3).unwrap();
        for w in cell.wells() {
            assert!((cell.grid.x(cell.well_index(w)) - w as f64).abs() < 1e-12);
        }
        assert!((cell.grid.x(0) + 5.5 - cell.grid.spacing).abs() < 1e-12);
        assert!((cell.grid.x_max() - 5.5 + cell.grid.spacing).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_and_covariant() {
        let b = basis(0.05, 2);
        assert!(b.orthonormality_defect < 1e-10);
        let g = b.grid();
        assert!(g.dot(b.site(0), b.site(1)).abs() < 1e-10);
        assert!(b.translation_defect(0) < 1e-6);
        assert!(b.translation_defect(-1) < 1e-6);
        assert!(b.subspace_residual < 1e-10);
        assert!(b.hamiltonian[(4, 5)] < 0.0);
    }

    #[test]
    fn band_energies_match_bloch_edges() {
        let m = ContinuumModel::new(1.0, PI, 0.05).unwrap();
        let b = build_basis(&m, 2).unwrap();
        let e = band_edges(&m).unwrap();
        let slack = 0.05 * e.bandwidth();
        assert!(b.band_energies[0] > e.e1_bottom - slack);
        assert!(*b.band_energies.last().unwrap() < e.e1_top + slack);
    }

    #[test]
    fn projector_is_idempotent() {
        let b = basis(0.05, 1);
        let v: Vec<f64> = (0..b.supercell.len()).map(|i| (i as f64 * 0.001).sin()).collect();
        let p = b.project_out(&v);
        assert!(b.coefficients(&p).iter().all(|c| c.abs() < 1e-12));
        let pp = b.project_out(&p);
        assert!(p.iter().zip(&pp).all(|(a, c)| (a - c).abs() < 1e-12));
    }
}
