//! The tilted discrete nonlinear Schrödinger lattice
//!
//! `R_n = -beta (g_{n+1} + g_{n-1}) + f xi(n) g_n + nu g_n^3 - lambda g_n`
//!
//! on a truncated lattice `[-N_lat, N_lat]` with zero Dirichlet closure, and
//! Newton continuation of decoupled (`beta = 0`) solutions to `beta > 0`.

use serde::Serialize;

use crate::anticontinuous::{energy_of, positive_solution, FiniteModeSolution, SolutionSet};
use crate::error::{Error, Result};
use crate::params::{is_integer_ratio, ModelParams};
use crate::tridiag::Tridiagonal;

/// Extra sites beyond the tilt window kept by default.
pub const LATTICE_PADDING: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub condition_cap: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, condition_cap: 1e12, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSolution {
    pub lattice_halfwidth: i64,
    /// `amplitudes[i]` is site `i - lattice_halfwidth`.
    pub amplitudes: Vec<f64>,
    pub lambda_tilde: f64,
    pub beta: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// `||R||_inf` before each Newton step and after the last one.
    pub residual_history: Vec<f64>,
}

impl LatticeSolution {
    pub fn site(&self, n: i64) -> f64 {
        let i = n + self.lattice_halfwidth;
        if i < 0 || i as usize >= self.amplitudes.len() {
            0.0
        } else {
            self.amplitudes[i as usize]
        }
    }

    pub fn norm_l2(&self) -> f64 {
        self.amplitudes.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.amplitudes.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Largest edge amplitude relative to the peak.
    pub fn edge_ratio(&self) -> f64 {
        let peak = self.amplitudes.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let edge = self.amplitudes[0].abs().max(self.amplitudes.last().unwrap().abs());
        edge / peak
    }
}

fn halfwidth_of(len: usize) -> i64 {
    (len as i64 - 1) / 2
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual on a lattice of odd length `2 N_lat + 1` centred on site 0.
pub fn dnlswe_residual(g: &[f64], lambda_tilde: f64, params: &ModelParams) -> Vec<f64> {
    let hw = halfwidth_of(g.len());
    let n = g.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            let right = if i + 1 < n { g[i + 1] } else { 0.0 };
            let site = i as i64 - hw;
            let gi = g[i];
            -params.beta * (left + right) + params.f * params.xi(site) * gi + params.nu * gi * gi * gi
                - lambda_tilde * gi
        })
        .collect()
}

/// `dR_n/dg_m`: `-beta` off the diagonal, `f xi(n) + 3 nu g_n^2 - lambda` on it.
pub fn jacobian(g: &[f64], lambda_tilde: f64, params: &ModelParams) -> Tridiagonal {
    let hw = halfwidth_of(g.len());
    let diag = g
        .iter()
        .enumerate()
        .map(|(i, gi)| params.f * params.xi(i as i64 - hw) + 3.0 * params.nu * gi * gi - lambda_tilde)
        .collect();
    let off = vec![-params.beta; g.len().saturating_sub(1)];
    Tridiagonal { sub: off.clone(), diag, sup: off }
}

/// Residual of the rescaled form `(1 - g'^2) g' = -beta' (g'_{n+1} + g'_{n-1}) + f' xi(n) g'`,
/// written as `-(1 - g'^2) g' - beta'(...) + f' xi g'`.
pub fn rescaled_residual(g_prime: &[f64], beta_prime: f64, f_prime: f64, params: &ModelParams) -> Vec<f64> {
    let hw = halfwidth_of(g_prime.len());
    let n = g_prime.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { g_prime[i - 1] } else { 0.0 };
            let right = if i + 1 < n { g_prime[i + 1] } else { 0.0 };
            let x = g_prime[i];
            -(1.0 - x * x) * x - beta_prime * (left + right) + f_prime * params.xi(i as i64 - hw) * x
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub sites: Vec<i64>,
    pub t: Vec<f64>,
    pub inf_abs: f64,
    pub min_abs_on_set: f64,
    pub exceeds_half: bool,
}

/// Diagonal of the rescaled linearization at `beta = 0`:
/// `T_n = (f xi(n) - mu)/mu` off the set and `-2 (f xi(n) - mu)/mu` on it.
///
/// Sites scanned cover every distinct value of the bounded tilt.
pub fn stability_diagnostic(set: &SolutionSet, params: &ModelParams) -> Result<StabilityReport> {
    let mu = energy_of(set, params);
    if mu == 0.0 {
        return Err(Error::SingularScaling { mu });
    }
    positive_solution(set, params)?;
    let reach = params.window_n() + params.tilt.taper_width + 1;
    let reach = reach.max(set.rung_j.abs() + 1).max(set.max_site().abs() + 1);
    let sites: Vec<i64> = (-reach..=reach).collect();
    let t: Vec<f64> = sites
        .iter()
        .map(|&n| {
            let x = (params.f * params.xi(n) - mu) / mu;
            if set.contains(n) {
                -2.0 * x
            } else {
                x
            }
        })
        .collect();
    let inf_abs = t.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let min_abs_on_set = sites
        .iter()
        .zip(&t)
        .filter(|(n, _)| set.contains(**n))
        .fold(f64::INFINITY, |m, (_, v)| m.min(v.abs()));
    Ok(StabilityReport { sites, t, inf_abs, min_abs_on_set, exceeds_half: inf_abs > 0.5 })
}

/// Newton's method at fixed `lambda_tilde`, tridiagonal linear solves,
/// step halving when the residual grows.
pub fn newton_solve(
    seed: &[f64],
    lambda_tilde: f64,
    params: &ModelParams,
    opts: &NewtonOptions,
) -> Result<LatticeSolution> {
    if seed.len() % 2 == 0 {
        return Err(Error::Domain("lattice length must be odd (centred on site 0)".into()));
    }
    let cond = jacobian(seed, lambda_tilde, params).condition_1();
    match cond {
        Ok(c) if c <= opts.condition_cap => {}
        Ok(c) => return Err(Error::IllConditioned { condition: c }),
        Err(_) => return Err(Error::IllConditioned { condition: f64::INFINITY }),
    }

    let mut g = seed.to_vec();
    let mut r = dnlswe_residual(&g, lambda_tilde, params);
    let mut res = inf_norm(&r);
    let mut history = vec![res];
    let mut iterations = 0;
    while res >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        let j = jacobian(&g, lambda_tilde, params);
        let step = j.solve(&r).map_err(|_| Error::IllConditioned { condition: f64::INFINITY })?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = g.iter().zip(&step).map(|(gi, si)| gi - scale * si).collect();
            let tr = dnlswe_residual(&trial, lambda_tilde, params);
            let tres = inf_norm(&tr);
            if tres.is_finite() && tres <= res {
                accepted = Some((trial, tr, tres));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, tr, tres)) => {
                g = trial;
                r = tr;
                res = tres;
                history.push(res);
            }
            // No decrease at the round-off floor: nothing left to gain.
            None if res < 1e3 * opts.tol => break,
            None => return Err(Error::NoConvergence { iterations, residual: res }),
        }
    }
    if res >= opts.tol {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    Ok(LatticeSolution {
        lattice_halfwidth: halfwidth_of(g.len()),
        amplitudes: g,
        lambda_tilde,
        beta: params.beta,
        residual_norm: res,
        iterations,
        residual_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub beta: f64,
    pub solution: LatticeSolution,
    /// `||g(beta) - d||_1`.
    pub l1_error: f64,
}

/// Hopping values visited on the way to `beta_target`.
pub fn beta_schedule(beta_target: f64, lambda_tilde: f64, n_steps: usize) -> Vec<f64> {
    if beta_target == 0.0 {
        return vec![0.0];
    }
    if n_steps <= 1 || beta_target / lambda_tilde.abs() < 1e-4 {
        return vec![beta_target];
    }
    let lo = (1e-4 * beta_target).ln();
    let hi = beta_target.ln();
    (0..n_steps)
        .map(|k| {
            if k + 1 == n_steps {
                beta_target
            } else {
                (lo + (hi - lo) * k as f64 / (n_steps - 1) as f64).exp()
            }
        })
        .collect()
}

fn check_ratio(params: &ModelParams) -> Result<()> {
    let ratio = params.ratio();
    if is_integer_ratio(ratio) {
        return Err(Error::BifurcationPoint { ratio });
    }
    Ok(())
}

fn default_halfwidth(sol0: &FiniteModeSolution, params: &ModelParams) -> i64 {
    (params.window_n() + LATTICE_PADDING)
        .max(sol0.set.max_site().abs() + LATTICE_PADDING)
        .max(sol0.set.rung_j.abs() + LATTICE_PADDING)
}

/// Walk `beta` from 0 to `beta_target` at fixed `lambda_tilde = mu^S`,
/// each step seeded by the previous solution. Failed steps are bisected.
pub fn continue_in_beta(
    sol0: &FiniteModeSolution,
    params: &ModelParams,
    beta_target: f64,
    n_steps: usize,
    opts: &NewtonOptions,
) -> Result<Vec<ContinuationStep>> {
    check_ratio(params)?;
    if !(beta_target >= 0.0) {
        return Err(Error::Domain(format!("beta_target = {beta_target} must be >= 0")));
    }
    let hw = default_halfwidth(sol0, params);
    let d = sol0.dense(hw);
    let lambda = sol0.mu;
    walk(&d, params, beta_target, lambda, n_steps, |seed, beta| {
        let p = params.with_beta(beta);
        newton_solve(seed, lambda, &p, opts)
    })
}

fn walk<F>(
    d: &[f64],
    params: &ModelParams,
    beta_target: f64,
    lambda: f64,
    n_steps: usize,
    mut corrector: F,
) -> Result<Vec<ContinuationStep>>
where
    F: FnMut(&[f64], f64) -> Result<LatticeSolution>,
{
    let _ = params;
    let mut out = Vec::new();
    let mut seed = d.to_vec();
    let mut last_beta = 0.0;
    for target in beta_schedule(beta_target, lambda, n_steps) {
        let mut goal = target;
        let mut bisections = 0;
        loop {
            match corrector(&seed, goal) {
                Ok(sol) => {
                    seed = sol.amplitudes.clone();
                    last_beta = goal;
                    let l1_error = sol.l1_distance(d);
                    out.push(ContinuationStep { beta: goal, solution: sol, l1_error });
                    if goal == target {
                        break;
                    }
                    goal = target;
                }
                Err(_) if bisections < 12 => {
                    bisections += 1;
                    goal = 0.5 * (last_beta + goal);
                }
                Err(_) => return Err(Error::ContinuationFailed { last_beta }),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedSolution {
    pub solution: LatticeSolution,
    pub lambda_tilde: f64,
    /// `lambda_tilde - mu^S`.
    pub lambda_shift: f64,
}

/// Newton on `{R(g, lambda) = 0, ||g||^2 = 1}` with `lambda` free, via a
/// bordered tridiagonal elimination.
pub fn newton_normalized(
    seed: &[f64],
    lambda0: f64,
    params: &ModelParams,
    opts: &NewtonOptions,
) -> Result<LatticeSolution> {
    let mut g = seed.to_vec();
    let mut lambda = lambda0;
    let eval = |g: &[f64], lambda: f64| {
        let r = dnlswe_residual(g, lambda, params);
        let c = 0.5 * (g.iter().map(|x| x * x).sum::<f64>() - 1.0);
        let res = inf_norm(&r).max(c.abs());
        (r, c, res)
    };
    let (mut r, mut c, mut res) = eval(&g, lambda);
    let mut history = vec![res];
    let mut iterations = 0;
    let mut polished = false;
    loop {
        if res < opts.tol {
            // One extra step pins the norm constraint to round-off.
            if polished || res == 0.0 {
                break;
            }
            polished = true;
        }
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        let j = jacobian(&g, lambda, params);
        let lu = j.factor().map_err(|_| Error::IllConditioned { condition: f64::INFINITY })?;
        // J dg - g dl = -R,  g . dg = -c
        let minus_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let y = lu.solve(&minus_r)?;
        let z = lu.solve(&g)?;
        let gz: f64 = g.iter().zip(&z).map(|(a, b)| a * b).sum();
        if gz.abs() < 1e-300 {
            return Err(Error::IllConditioned { condition: f64::INFINITY });
        }
        let gy: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        let dl = (-c - gy) / gz;
        let dg: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + dl * b).collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = g.iter().zip(&dg).map(|(a, b)| a + scale * b).collect();
            let tl = lambda + scale * dl;
            let (tr, tc, tres) = eval(&trial, tl);
            if tres.is_finite() && tres <= res {
                accepted = Some((trial, tl, tr, tc, tres));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, tl, tr, tc, tres)) => {
                g = trial;
                lambda = tl;
                r = tr;
                c = tc;
                res = tres;
                history.push(res);
            }
            None if res < 1e3 * opts.tol => break,
            None => return Err(Error::NoConvergence { iterations, residual: res }),
        }
    }
    if res >= opts.tol {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    Ok(LatticeSolution {
        lattice_halfwidth: halfwidth_of(g.len()),
        amplitudes: g,
        lambda_tilde: lambda,
        beta: params.beta,
        residual_norm: res,
        iterations,
        residual_history: history,
    })
}

/// Normalized continuation: exactly unit-norm `g` with the corrected `lambda_tilde`.
pub fn continue_normalized(
    sol0: &FiniteModeSolution,
    params: &ModelParams,
    beta_target: f64,
    opts: &NewtonOptions,
) -> Result<NormalizedSolution> {
    let steps = continue_normalized_path(sol0, params, beta_target, 8, opts)?;
    let last = steps.into_iter().last().expect("schedule is never empty").solution;
    let lambda_tilde = last.lambda_tilde;
    Ok(NormalizedSolution { lambda_shift: lambda_tilde - sol0.mu, lambda_tilde, solution: last })
}

/// Every step of the normalized homotopy.
pub fn continue_normalized_path(
    sol0: &FiniteModeSolution,
    params: &ModelParams,
    beta_target: f64,
    n_steps: usize,
    opts: &NewtonOptions,
) -> Result<Vec<ContinuationStep>> {
    check_ratio(params)?;
    if !(beta_target >= 0.0) {
        return Err(Error::Domain(format!("beta_target = {beta_target} must be >= 0")));
    }
    let hw = default_halfwidth(sol0, params);
    let d = sol0.dense(hw);
    let mut lambda = sol0.mu;
    walk(&d, params, beta_target, sol0.mu, n_steps, |seed, beta| {
        let p = params.with_beta(beta);
        let sol = newton_normalized(seed, lambda, &p, opts)?;
        lambda = sol.lambda_tilde;
        Ok(sol)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Converged,
    /// The seed violates positivity: below the set's existence threshold.
    BelowThreshold,
    BifurcationPoint,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub nu_over_f: f64,
    pub lambda_over_f: Option<f64>,
    pub l1_error: Option<f64>,
    pub status: BranchStatus,
}

/// `lambda_tilde(nu/f)` for one set at fixed hopping, re-seeding from the
/// decoupled solution at each ratio. `template` supplies `f` and the tilt.
pub fn branch_sweep_nu(
    set: &SolutionSet,
    template: &ModelParams,
    ratios: &[f64],
    beta: f64,
    opts: &NewtonOptions,
) -> Vec<BranchRow> {
    ratios
        .iter()
        .map(|&ratio| {
            let mut p = template.with_beta(0.0);
            p.nu = ratio * template.f;
            let blank = |status| BranchRow { nu_over_f: ratio, lambda_over_f: None, l1_error: None, status };
            if is_integer_ratio(ratio) {
                return blank(BranchStatus::BifurcationPoint);
            }
            let sol0 = match positive_solution(set, &p) {
                Ok(s) => s,
                Err(Error::Positivity { .. }) => return blank(BranchStatus::BelowThreshold),
                Err(e) => return blank(BranchStatus::Failed(e.to_string())),
            };
            match continue_normalized_path(&sol0, &p, beta, 4, opts) {
                Ok(steps) => {
                    let last = steps.last().unwrap();
                    BranchRow {
                        nu_over_f: ratio,
                        lambda_over_f: Some(last.solution.lambda_tilde / p.f),
                        l1_error: Some(last.l1_error),
                        status: BranchStatus::Converged,
                    }
                }
                Err(e) => blank(BranchStatus::Failed(e.to_string())),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::TiltProfile;

    fn pair_params(beta: f64) -> ModelParams {
        ModelParams::new(5.5, 1.0, beta, TiltProfile::clamped(8)).unwrap()
    }

    fn pair() -> (SolutionSet, FiniteModeSolution) {
        let set = SolutionSet::new(0, vec![0, 1]).unwrap();
        let sol = positive_solution(&set, &pair_params(0.0)).unwrap();
        (set, sol)
    }

    #[test]
    fn residual_vanishes_on_decoupled_solution() {
        let (_, sol) = pair();
        let p = pair_params(0.0);
        let g = sol.dense(18);
        assert!(inf_norm(&dnlswe_residual(&g, sol.mu, &p)) < 1e-14);
        assert!(dnlswe_residual(&vec![0.0; 37], 0.7, &p).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_hand_substitution() {
        let p = ModelParams::new(2.0, 0.5, 0.1, TiltProfile::clamped(5)).unwrap();
        let mut g = vec![0.0; 11];
        g[5] = 1.0;
        let r = dnlswe_residual(&g, p.nu, &p);
        assert!((r[4] + 0.1).abs() < 1e-15);
        assert!((r[6] + 0.1).abs() < 1e-15);
        assert!(r[5].abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = ModelParams::new(1.3, 0.2, 0.37, TiltProfile::clamped(4)).unwrap();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..100 {
            let g: Vec<f64> = (0..9).map(|_| next()).collect();
            let lam = next();
            let jac = jacobian(&g, lam, &p);
            assert!(jac.is_symmetric());
            let h = 1e-6;
            for m in 0..g.len() {
                let mut gp = g.clone();
                let mut gm = g.clone();
                gp[m] += h;
                gm[m] -= h;
                let rp = dnlswe_residual(&gp, lam, &p);
                let rm = dnlswe_residual(&gm, lam, &p);
                for n in 0..g.len() {
                    let fd = (rp[n] - rm[n]) / (2.0 * h);
                    assert!((fd - jac.get(n, m)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn jacobian_diagonal_is_mu_times_t() {
        let p = pair_params(0.0);
        let (set, sol) = pair();
        let g = sol.dense(12);
        let jac = jacobian(&g, sol.mu, &p);
        let t = stability_diagnostic(&set, &p).unwrap();
        for n in -9i64..=9 {
            let k = t.sites.iter().position(|s| *s == n).unwrap();
            assert!((jac.diag[(n + 12) as usize] - sol.mu * t.t[k]).abs() < 1e-13);
        }
        let zero = jacobian(&vec![0.0; 5], 0.3, &p);
        assert_eq!(zero.diag, vec![-2.0 - 0.3, -1.3, -0.3, 0.7, 1.7]);
    }

    #[test]
    fn one_mode_stability() {
        let p = ModelParams::anticontinuous(100.0, 1.0, 8).unwrap();
        let rep = stability_diagnostic(&SolutionSet::singleton(0), &p).unwrap();
        let t0 = rep.t[rep.sites.iter().position(|s| *s == 0).unwrap()];
        assert!((t0 - 2.0).abs() < 1e-12);
        assert!(rep.exceeds_half);
        let far = rep.t[0];
        assert!((far + 1.0).abs() < 0.1);
    }

    #[test]
    fn threshold_breakdown_is_detected() {
        let set = SolutionSet::new(0, vec![0, 1, 2]).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let p = ModelParams::anticontinuous(3.0 + eps, 1.0, 8).unwrap();
            let m = stability_diagnostic(&set, &p).unwrap().min_abs_on_set;
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn singular_scaling_error() {
        let p = ModelParams::anticontinuous(0.0, 1.0, 8).unwrap();
        assert!(matches!(
            stability_diagnostic(&SolutionSet::singleton(0), &p),
            Err(Error::SingularScaling { .. })
        ));
    }

    #[test]
    fn newton_at_zero_hopping_keeps_seed() {
        let (_, sol) = pair();
        let seed = sol.dense(18);
        let out = newton_solve(&seed, sol.mu, &pair_params(0.0), &NewtonOptions::default()).unwrap();
        assert!(out.iterations <= 1);
        assert!(out.l1_distance(&seed) < 1e-14);
    }

    #[test]
    fn newton_small_hopping() {
        let (_, sol) = pair();
        let seed = sol.dense(18);
        let beta = 1e-3 * sol.mu;
        let out = newton_solve(&seed, sol.mu, &pair_params(beta), &NewtonOptions::default()).unwrap();
        assert!(out.iterations <= 10);
        assert!(out.residual_norm < 1e-12);
        assert!(out.l1_distance(&seed) <= 10.0 * 1e-3);
        assert!(out.edge_ratio() < 1e-6);
    }

    #[test]
    fn newton_converges_quadratically() {
        let (_, sol) = pair();
        let mut seed = sol.dense(18);
        seed[18] += 0.02;
        seed[19] -= 0.01;
        let out = newton_solve(&seed, sol.mu, &pair_params(1e-3), &NewtonOptions::default()).unwrap();
        let h = &out.residual_history;
        // Take the last pair of steps well above round-off.
        let usable: Vec<f64> = h.iter().copied().filter(|r| *r > 1e-14 && *r < 1e-1).collect();
        assert!(usable.len() >= 3, "{h:?}");
        let k = usable.len() - 1;
        let order = usable[k].ln() / usable[k - 1].ln();
        let prev = usable[k - 1].ln() / usable[k - 2].ln();
        assert!((order - 2.0).abs() < 0.3 || (prev - 2.0).abs() < 0.3, "{h:?}");
    }

    #[test]
    fn strong_hopping_failure_is_reported() {
        let (_, sol) = pair();
        let seed = sol.dense(18);
        let beta = 0.5 * sol.mu;
        let opts = NewtonOptions { max_iter: 6, ..Default::default() };
        // Either a converged answer or an explicit error: never a silent bad state.
        match newton_solve(&seed, sol.mu, &pair_params(beta), &opts) {
            Ok(s) => assert!(s.residual_norm < 1e-12),
            Err(e) => assert!(matches!(e, Error::NoConvergence { .. } | Error::IllConditioned { .. })),
        }
    }

    #[test]
    fn ill_conditioned_seed_is_rejected() {
        // Site 2 sits exactly at f xi(n) = mu: singular Jacobian.
        let p = ModelParams::anticontinuous(3.0, 1.0, 8).unwrap();
        let sol = positive_solution(&SolutionSet::new(0, vec![0, 1]).unwrap(), &p).unwrap();
        assert_eq!(sol.mu, 2.0);
        let r = newton_solve(&sol.dense(18), sol.mu, &p, &NewtonOptions::default());
        assert!(matches!(r, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn beta_continuation_is_linear_and_monotone() {
        let (_, sol) = pair();
        let p = pair_params(0.0);
        let steps = continue_in_beta(&sol, &p, 1e-3 * sol.mu, 9, &NewtonOptions::default()).unwrap();
        for w in steps.windows(2) {
            assert!(w[1].l1_error > w[0].l1_error);
        }
        for s in &steps {
            assert!((s.solution.norm_l2() - 1.0).abs() <= s.l1_error + 1e-15);
        }
        let err = |b: f64| {
            continue_in_beta(&sol, &p, b * sol.mu, 1, &NewtonOptions::default()).unwrap()[0].l1_error
        };
        for b in [1e-5, 1e-4, 1e-3] {
            let ratio = err(b) / err(b / 2.0);
            assert!((1.5..=2.5).contains(&ratio), "ratio {ratio} at {b}");
        }
    }

    #[test]
    fn zero_target_returns_seed() {
        let (_, sol) = pair();
        let steps = continue_in_beta(&sol, &pair_params(0.0), 0.0, 5, &NewtonOptions::default()).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].solution.amplitudes, sol.dense(18));
        assert_eq!(steps[0].l1_error, 0.0);
    }

    #[test]
    fn integer_ratio_is_refused() {
        let p = ModelParams::anticontinuous(4.0, 1.0, 8).unwrap();
        let sol = positive_solution(&SolutionSet::singleton(0), &p).unwrap();
        assert!(matches!(
            continue_in_beta(&sol, &p, 1e-3, 3, &NewtonOptions::default()),
            Err(Error::BifurcationPoint { .. })
        ));
    }

    #[test]
    fn normalized_continuation() {
        let (_, sol) = pair();
        let p = pair_params(0.0);
        let zero = continue_normalized(&sol, &p, 0.0, &NewtonOptions::default()).unwrap();
        assert_eq!(zero.lambda_tilde, sol.mu);
        assert!(zero.solution.l1_distance(&sol.dense(18)) < 1e-15);
        let mut shifts = vec![];
        for b in [1e-4, 1e-3, 1e-2] {
            let out = continue_normalized(&sol, &p, b * sol.mu, &NewtonOptions::default()).unwrap();
            assert!((out.solution.norm_l2() - 1.0).abs() < 1e-13);
            shifts.push(out.lambda_shift.abs() / (b * sol.mu));
        }
        // |lambda - mu| <= C beta with a bounded measured C.
        assert!(shifts.iter().all(|c| *c < 10.0), "{shifts:?}");
    }

    #[test]
    fn scaling_identity_round_trip() {
        let (_, sol) = pair();
        let beta = 1e-2 * sol.mu;
        let p = pair_params(beta);
        let g = newton_solve(&sol.dense(18), sol.mu, &p, &NewtonOptions::default()).unwrap();
        let lam = g.lambda_tilde;
        let s = (p.nu / lam).sqrt();
        let gp: Vec<f64> = g.amplitudes.iter().map(|x| x * s).collect();
        assert!(inf_norm(&rescaled_residual(&gp, beta / lam, p.f / lam, &p)) < 1e-12);
        let back: Vec<f64> = gp.iter().map(|x| x / s).collect();
        assert!(inf_norm(&dnlswe_residual(&back, lam, &p)) < 1e-12);
    }

    #[test]
    fn symmetric_seed_stays_symmetric() {
        // No tilt: the problem is reflection symmetric about the set centre.
        let p = ModelParams::new(3.0, 0.0, 0.05, TiltProfile::clamped(6)).unwrap();
        let set = SolutionSet::new(-1, vec![0, 2]).unwrap();
        let sol = positive_solution(&set, &p.with_beta(0.0)).unwrap();
        let out = newton_solve(&sol.dense(16), sol.mu, &p, &NewtonOptions::default()).unwrap();
        for n in 0..=16 {
            assert!((out.site(n) - out.site(-n)).abs() < 1e-10);
        }
    }

    #[test]
    fn branch_sweep() {
        let template = ModelParams::new(1.0, 1.0, 0.0, TiltProfile::clamped(8)).unwrap();
        let triple = SolutionSet::new(0, vec![0, 1, 2]).unwrap();
        let rows = branch_sweep_nu(&triple, &template, &[2.5, 3.0, 3.5, 5.5], 1e-6, &NewtonOptions::default());
        assert_eq!(rows[0].status, BranchStatus::BelowThreshold);
        assert_eq!(rows[1].status, BranchStatus::BifurcationPoint);
        assert_eq!(rows[2].status, BranchStatus::Converged);
        assert_eq!(rows[3].status, BranchStatus::Converged);

        let single = SolutionSet::singleton(0);
        for row in branch_sweep_nu(&single, &template, &[2.5, 7.5], 1e-6, &NewtonOptions::default()) {
            assert!((row.lambda_over_f.unwrap() - row.nu_over_f).abs() < 1e-4);
        }
        // At zero hopping the table reproduces the decoupled energies.
        let diag = crate::anticontinuous::diagram_data(&[5.5], 3).unwrap();
        let rows = branch_sweep_nu(&triple, &template, &[5.5], 0.0, &NewtonOptions::default());
        let d = diag.iter().find(|r| r.set_id == "0+1+2").unwrap();
        assert!((rows[0].lambda_over_f.unwrap() - d.mu_over_f).abs() < 1e-12);
    }
}
