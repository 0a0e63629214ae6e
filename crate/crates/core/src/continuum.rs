//! Stationary states of `H_B psi + F W psi + eta psi^3 = lambda psi` built as
//! `psi = sum_n c_n u_n + psi_perp`, with `psi_perp` from a contraction on the
//! complement of the first band.

use serde::Serialize;

use crate::anticontinuous::{positive_solution, SolutionSet};
use crate::error::{Error, Result};
use crate::lattice::{continue_normalized, NewtonOptions};
use crate::params::{ModelParams, TiltProfile};
use crate::semiclassical::{build_basis, effective_parameters, ContinuumModel, EffectiveParameters, LocalizedBasis, Supercell};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest admissible `||c||_1`.
    pub delta0: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, delta0: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerpSolution {
    #[serde(skip)]
    pub psi_perp: Vec<f64>,
    pub iterations: usize,
    /// `||psi_perp^{k+1} - psi_perp^k||_2` per iterate.
    pub displacements: Vec<f64>,
    /// Largest ratio of successive displacements.
    pub contraction_factor: f64,
    /// Largest `|<u_n, psi_perp>|` over all iterates.
    pub leakage: f64,
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// `psi_perp = -(H_B - lambda)^{-1} Pi_perp [F W psi + eta psi^3]` iterated to a fixed point.
///
/// `H_B` commutes with the band projector, so the resolvent is applied on the
/// whole supercell and the result projected again.
pub fn fixed_point_perp(
    c: &[f64],
    lambda: f64,
    basis: &LocalizedBasis,
    opts: &FixedPointOptions,
) -> Result<PerpSolution> {
    check_len(basis.sites.len(), c.len())?;
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    if l1 > opts.delta0 {
        return Err(Error::Domain(format!("||c||_1 = {l1} exceeds delta0 = {}", opts.delta0)));
    }
    let cell = &basis.supercell;
    let model = &cell.model;
    let n = cell.len();
    let off = vec![-cell.kinetic; n - 1];
    let diag = cell.potential.iter().map(|v| 2.0 * cell.kinetic + v - lambda).collect();
    let lu = Tridiagonal::new(off.clone(), diag, off)?
        .factor()
        .map_err(|e| Error::Resolvent(e.to_string()))?;
    let stark = cell.stark();
    let psi1 = basis.synthesize(c);
    let grid = basis.grid();

    let mut perp = vec![0.0; n];
    let mut displacements = Vec::new();
    let mut leakage = 0.0f64;
    let mut iterations = 0;
    loop {
        let forcing: Vec<f64> = (0..n)
            .map(|i| {
                let p = psi1[i] + perp[i];
                -model.field * stark[i] * p - model.eta * p * p * p
            })
            .collect();
        let rhs = basis.project_out(&forcing);
        let solved = lu.solve(&rhs).map_err(|e| Error::Resolvent(e.to_string()))?;
        let next = basis.project_out(&solved);
        leakage = basis.coefficients(&next).iter().fold(leakage, |m, v| m.max(v.abs()));
        let step: Vec<f64> = next.iter().zip(&perp).map(|(a, b)| a - b).collect();
        let disp = grid.norm(&step);
        displacements.push(disp);
        perp = next;
        iterations += 1;
        if disp < opts.tol {
            break;
        }
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: disp });
        }
    }
    let contraction_factor = displacements
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    if contraction_factor >= 1.0 {
        return Err(Error::NonContraction { factor: contraction_factor });
    }
    Ok(PerpSolution { psi_perp: perp, iterations, displacements, contraction_factor, leakage })
}

/// `sum_n c_n u_n + psi_perp`.
pub fn assemble_psi(c: &[f64], psi_perp: &[f64], basis: &LocalizedBasis) -> Result<Vec<f64>> {
    check_len(basis.sites.len(), c.len())?;
    check_len(basis.supercell.len(), psi_perp.len())?;
    let mut psi = basis.synthesize(c);
    psi.iter_mut().zip(psi_perp).for_each(|(a, b)| *a += b);
    Ok(psi)
}

/// Pointwise `H_B psi + F W psi + eta psi^3 - lambda psi`.
pub fn residual_field(psi: &[f64], lambda: f64, cell: &Supercell) -> Vec<f64> {
    let model = &cell.model;
    let hpsi = cell.apply_h(psi);
    psi.iter()
        .enumerate()
        .map(|(i, p)| hpsi[i] + model.field * model.stark_w(cell.grid.x(i)) * p + model.eta * p * p * p - lambda * p)
        .collect()
}

/// `||H_B psi + F W psi + eta psi^3 - lambda psi||_2 / ||psi||_2`.
pub fn continuum_residual(psi: &[f64], lambda: f64, cell: &Supercell) -> f64 {
    cell.grid.norm(&residual_field(psi, lambda, cell)) / cell.grid.norm(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuumSolution {
    pub lambda: f64,
    pub c: Vec<f64>,
    #[serde(skip)]
    pub psi: Vec<f64>,
    #[serde(skip)]
    pub psi_perp: Vec<f64>,
    pub perp_h1_norm: f64,
    pub residual_l2: f64,
    pub contraction_factor: f64,
    pub iterations: usize,
    pub leakage: f64,
}

pub fn solve_continuum(
    c: &[f64],
    lambda: f64,
    basis: &LocalizedBasis,
    opts: &FixedPointOptions,
) -> Result<ContinuumSolution> {
    let perp = fixed_point_perp(c, lambda, basis, opts)?;
    let psi = assemble_psi(c, &perp.psi_perp, basis)?;
    Ok(ContinuumSolution {
        lambda,
        c: c.to_vec(),
        perp_h1_norm: basis.grid().h1_norm(&perp.psi_perp),
        residual_l2: continuum_residual(&psi, lambda, &basis.supercell),
        psi,
        psi_perp: perp.psi_perp,
        contraction_factor: perp.contraction_factor,
        iterations: perp.iterations,
        leakage: perp.leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderCheck {
    pub shift: i64,
    pub original: f64,
    pub shifted: f64,
    pub ratio: f64,
}

/// Residual of `psi(x - s a)` at `lambda + s F a` against that of `psi`, both
/// restricted to the linear window `|x| <= N a`.
pub fn ladder_translation_check(sol: &ContinuumSolution, cell: &Supercell, shift: i64) -> Result<LadderCheck> {
    let model = &cell.model;
    let a = model.period();
    let limit = (model.window_n - 2) as f64 * a;
    let peak = sol.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = (0..cell.len())
        .filter(|&i| cell.grid.x(i).abs() > limit)
        .fold(0.0f64, |m, i| m.max(sol.psi[i].abs()))
        / peak;
    if tail > 1e-6 {
        return Err(Error::SupportTouchesTaper { tail });
    }
    let window = model.window_n as f64 * a;
    let restricted = |psi: &[f64], lambda: f64| {
        let r = residual_field(psi, lambda, cell);
        let inside = |i: usize| cell.grid.x(i).abs() <= window;
        let num: f64 = (0..r.len()).filter(|&i| inside(i)).map(|i| r[i] * r[i]).sum();
        let den: f64 = (0..r.len()).filter(|&i| inside(i)).map(|i| psi[i] * psi[i]).sum();
        (num / den).sqrt()
    };
    let original = restricted(&sol.psi, sol.lambda);
    if shift == 0 {
        return Ok(LadderCheck { shift, original, shifted: original, ratio: 1.0 });
    }
    let moved = cell.translate(&sol.psi, shift);
    let shifted = restricted(&moved, sol.lambda + shift as f64 * model.field * a);
    Ok(LadderCheck { shift, original, shifted, ratio: shifted / original })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R4Report {
    /// `<u_n, psi^3> - C1 c_n^3`, indexed like the basis sites.
    pub r4: Vec<f64>,
    pub r4_l1: f64,
    pub bound: f64,
    /// Smallest `K` with `r4_l1 <= K bound`.
    pub k_min: f64,
}

pub fn r4_diagnostic(c: &[f64], psi_perp: &[f64], basis: &LocalizedBasis, s0: f64, rho_fraction: f64) -> Result<R4Report> {
    let psi = assemble_psi(c, psi_perp, basis)?;
    let grid = basis.grid();
    let h = basis.supercell.model.h;
    let c1 = basis.site(0).iter().map(|v| v.powi(4)).sum::<f64>() * grid.spacing;
    let cube: Vec<f64> = psi.iter().map(|p| p * p * p).collect();
    let r4: Vec<f64> = basis.coefficients(&cube).iter().zip(c).map(|(p, cn)| p - c1 * cn * cn * cn).collect();
    let r4_l1 = r4.iter().map(|v| v.abs()).sum();
    let perp = grid.h1_norm(psi_perp);
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    let rho = rho_fraction * s0;
    let bound = h.powf(-0.5) * perp.powi(3)
        + l1 * perp * perp
        + l1 * l1 * h.powf(-0.25) * perp
        + l1.powi(3) * (-(s0 - rho) / h).exp();
    Ok(R4Report { r4, r4_l1, bound, k_min: r4_l1 / bound })
}

/// `max_q ||psi_perp(c + q) - psi_perp(c)||_{H^1} / (h ||q||_1)`.
pub fn lipschitz_constant(
    c: &[f64],
    lambda: f64,
    basis: &LocalizedBasis,
    perturbations: &[Vec<f64>],
    opts: &FixedPointOptions,
) -> Result<f64> {
    let h = basis.supercell.model.h;
    let base = fixed_point_perp(c, lambda, basis, opts)?.psi_perp;
    let mut k = 0.0f64;
    for q in perturbations {
        check_len(c.len(), q.len())?;
        let moved: Vec<f64> = c.iter().zip(q).map(|(a, b)| a + b).collect();
        let other = fixed_point_perp(&moved, lambda, basis, opts)?.psi_perp;
        let diff: Vec<f64> = other.iter().zip(&base).map(|(a, b)| a - b).collect();
        let q1: f64 = q.iter().map(|v| v.abs()).sum();
        if q1 > 0.0 {
            k = k.max(basis.grid().h1_norm(&diff) / (h * q1));
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEnd {
    pub h: f64,
    pub params: EffectiveParameters,
    pub lattice: ModelParams,
    /// Continued `lambda~`.
    pub lambda_tilde: f64,
    pub mu: f64,
    pub solution: ContinuumSolution,
    /// Residual with `lambda~ = mu^S`.
    pub residual_decoupled: f64,
    pub ladder: LadderCheck,
}

/// Lattice parameters `nu = eta C1`, `f = F a` with the clamped tilt of window `N`.
pub fn lattice_params(model: &ContinuumModel, p: &EffectiveParameters) -> Result<ModelParams> {
    ModelParams::new(p.nu, p.f, p.beta, TiltProfile::clamped(model.window_n))
}

/// Effective parameters, lattice continuation of `set`, fixed point, residual.
pub fn end_to_end(model: &ContinuumModel, set: &SolutionSet, opts: &FixedPointOptions) -> Result<EndToEnd> {
    let basis = build_basis(model, model.window_n)?;
    let params = effective_parameters(model, &basis)?;
    let lattice = lattice_params(model, &params)?;
    let sol0 = positive_solution(set, &lattice.with_beta(0.0))?;
    let cont = continue_normalized(&sol0, &lattice.with_beta(0.0), params.beta, &NewtonOptions::default())?;
    let c: Vec<f64> = basis.sites.iter().map(|n| cont.solution.site(*n)).collect();
    let base = params.lambda1 + model.field * params.c0;
    let solution = solve_continuum(&c, base + cont.lambda_tilde, &basis, opts)?;
    let residual_decoupled = continuum_residual(&solution.psi, base + sol0.mu, &basis.supercell);
    let ladder = ladder_translation_check(&solution, &basis.supercell, 1)?;
    Ok(EndToEnd {
        h: model.h,
        params,
        lattice,
        lambda_tilde: cont.lambda_tilde,
        mu: sol0.mu,
        solution,
        residual_decoupled,
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiclassical::StarkShape;
    use std::f64::consts::PI;

    fn basis(h: f64, n: i64) -> (ContinuumModel, LocalizedBasis) {
        let mut m = ContinuumModel::new(1.0, PI, h).unwrap();
        m.window_n = n;
        let b = build_basis(&m, n).unwrap();
        (m, b)
    }

    fn unit(b: &LocalizedBasis, n: i64) -> Vec<f64> {
        let mut c = vec![0.0; b.sites.len()];
        c[b.index(n).unwrap()] = 1.0;
        c
    }

    #[test]
    fn zero_forcing_gives_zero_perp() {
        let (mut m, _) = basis(0.05, 3);
        m.field = 0.0;
        m.eta = 0.0;
        let b = build_basis(&m, 3).unwrap();
        let out = fixed_point_perp(&unit(&b, 0), 0.15, &b, &FixedPointOptions::default()).unwrap();
        assert!(out.psi_perp.iter().all(|v| *v == 0.0));
        assert_eq!(out.contraction_factor, 0.0);
    }

    #[test]
    fn assembly_and_pythagoras() {
        let (_, b) = basis(0.05, 3);
        let c = unit(&b, 0);
        let psi = assemble_psi(&c, &vec![0.0; b.supercell.len()], &b).unwrap();
        assert_eq!(psi, b.site(0).to_vec());
        let mut c = vec![0.0; b.sites.len()];
        c[b.index(0).unwrap()] = 0.8;
        c[b.index(1).unwrap()] = -0.3;
        let e = effective_parameters(&b.supercell.model, &b).unwrap();
        let perp = fixed_point_perp(&c, e.lambda1 + 0.01, &b, &FixedPointOptions::default()).unwrap();
        assert!(perp.leakage < 1e-8);
        let psi = assemble_psi(&c, &perp.psi_perp, &b).unwrap();
        let g = b.grid();
        let lhs = g.dot(&psi, &psi);
        let rhs = c.iter().map(|v| v * v).sum::<f64>() + g.dot(&perp.psi_perp, &perp.psi_perp);
        assert!((lhs - rhs).abs() < 1e-8);
        assert!(perp.contraction_factor < 1.0);
        assert!(matches!(assemble_psi(&c[1..], &perp.psi_perp, &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn linear_eigenpair_has_tiny_residual() {
        let (mut m, _) = basis(0.05, 2);
        m.field = 0.0;
        m.eta = 0.0;
        let b = build_basis(&m, 2).unwrap();
        let eig = nalgebra::SymmetricEigen::new(b.hamiltonian.clone());
        let k = eig.eigenvalues.imin();
        let c: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let psi = b.synthesize(&c);
        assert!(continuum_residual(&psi, eig.eigenvalues[k], &b.supercell) < 1e-8);
    }

    #[test]
    fn ladder_exact_for_global_stark() {
        let (mut m, _) = basis(0.05, 6);
        m.stark = StarkShape::Linear;
        let b = build_basis(&m, 6).unwrap();
        let e = effective_parameters(&m, &b).unwrap();
        let sol = solve_continuum(&unit(&b, 0), e.lambda1 + e.nu, &b, &FixedPointOptions::default()).unwrap();
        let check = ladder_translation_check(&sol, &b.supercell, 1).unwrap();
        assert!((check.shifted - check.original).abs() < 1e-10 * check.original.max(1e-300) + 1e-14);
        let zero = ladder_translation_check(&sol, &b.supercell, 0).unwrap();
        assert_eq!(zero.ratio, 1.0);
    }

    #[test]
    fn support_near_taper_is_rejected() {
        let (m, b) = basis(0.05, 4);
        let e = effective_parameters(&m, &b).unwrap();
        let sol = solve_continuum(&unit(&b, 3), e.lambda1 + 3.0 * m.field + e.nu, &b, &FixedPointOptions::default()).unwrap();
        assert!(matches!(
            ladder_translation_check(&sol, &b.supercell, 1),
            Err(Error::SupportTouchesTaper { .. })
        ));
    }

    #[test]
    fn r4_structure() {
        let (m, b) = basis(0.05, 3);
        let e = effective_parameters(&m, &b).unwrap();
        let zero = vec![0.0; b.supercell.len()];
        let rep = r4_diagnostic(&unit(&b, 0), &zero, &b, e.s0, 0.2).unwrap();
        assert!(rep.r4[b.index(0).unwrap()].abs() < 1e-12);
        assert!(rep.r4[b.index(1).unwrap()].abs() < 1e-3);
        let c0 = vec![0.0; b.sites.len()];
        let perp: Vec<f64> = b.project_out(&b.supercell.translate(b.site(0), 0).iter().map(|v| v * v).collect::<Vec<_>>());
        let rep = r4_diagnostic(&c0, &perp, &b, e.s0, 0.2).unwrap();
        let cube: Vec<f64> = perp.iter().map(|p| p * p * p).collect();
        let direct = b.coefficients(&cube);
        assert!(rep.r4.iter().zip(&direct).all(|(a, d)| (a - d).abs() < 1e-14));
    }

    #[test]
    fn rejects_large_coefficients() {
        let (_, b) = basis(0.05, 2);
        let c = vec![1.0; b.sites.len()];
        assert!(fixed_point_perp(&c, 0.1, &b, &FixedPointOptions::default()).is_err());
    }
}
