//! Finite-mode stationary solutions of the decoupled (`beta = 0`) lattice.
//!
//! A solution set `S = {j, j + l_1, ..., j + l_{N-1}}` carries amplitudes
//! `d_n^2 = (mu - f xi(n)) / nu` on its sites, where the energy is fixed by
//! normalization: `mu = nu / N + (f / N) sum_S xi`.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{is_integer_ratio, ModelParams};
use crate::partitions::{distinct_partition_table, largest_integer_below};

/// Occupied sites `rung_j + offsets[k]`, offsets strictly increasing from 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SolutionSet {
    pub rung_j: i64,
    pub offsets: Vec<i64>,
}

impl SolutionSet {
    pub fn new(rung_j: i64, offsets: Vec<i64>) -> Result<Self> {
        if offsets.first() != Some(&0) {
            return Err(Error::Domain("solution-set offsets must start at 0".into()));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("solution-set offsets must be strictly increasing".into()));
        }
        Ok(Self { rung_j, offsets })
    }

    pub fn singleton(rung_j: i64) -> Self {
        Self { rung_j, offsets: vec![0] }
    }

    /// Build from absolute site indices (any order).
    pub fn from_sites(sites: &[i64]) -> Result<Self> {
        let mut s = sites.to_vec();
        s.sort_unstable();
        let j = *s.first().ok_or_else(|| Error::Domain("empty solution set".into()))?;
        Self::new(j, s.iter().map(|n| n - j).collect())
    }

    pub fn cardinality(&self) -> usize {
        self.offsets.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        self.offsets.iter().map(move |l| self.rung_j + l)
    }

    pub fn contains(&self, site: i64) -> bool {
        self.offsets.binary_search(&(site - self.rung_j)).is_ok()
    }

    pub fn max_site(&self) -> i64 {
        self.rung_j + self.offsets.last().copied().unwrap_or(0)
    }

    pub fn translate(&self, by: i64) -> Self {
        Self { rung_j: self.rung_j + by, offsets: self.offsets.clone() }
    }

    /// Branch identity: offsets joined by `+`, e.g. `0+1+2`.
    pub fn id(&self) -> String {
        self.offsets.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("+")
    }

    /// `sum_{l in S} (max S - l)`; the set exists iff this is below `nu/f`
    /// on the linear window.
    pub fn gap_statistic(&self) -> i64 {
        let max = *self.offsets.last().unwrap();
        self.offsets.iter().map(|l| max - l).sum()
    }

    fn check_window(&self, window: i64) -> Result<()> {
        for site in [self.rung_j, self.max_site()] {
            if site.abs() > window {
                return Err(Error::WindowOverflow { site, window });
            }
        }
        Ok(())
    }
}

impl fmt::Display for SolutionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sites: Vec<String> = self.sites().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", sites.join(","))
    }
}

/// Existence condition: `xi(max S) < nu/(f N) + (1/N) sum xi`, with the
/// strict inequality evaluated against the rounded ratio at bifurcation points.
fn admissible(set: &SolutionSet, params: &ModelParams) -> bool {
    let card = set.cardinality() as f64;
    let xi_sum: f64 = set.sites().map(|n| params.xi(n)).sum();
    let xi_max = set.sites().map(|n| params.xi(n)).fold(f64::NEG_INFINITY, f64::max);
    let mut ratio = params.ratio();
    if is_integer_ratio(ratio) {
        ratio = ratio.round();
    }
    card * xi_max - xi_sum < ratio
}

/// All admissible solution sets on rung `j` with at most `max_card` sites,
/// sorted by cardinality then offsets. Includes the singleton `{j}`.
pub fn enumerate_solution_sets(
    params: &ModelParams,
    rung_j: i64,
    max_card: usize,
) -> Result<Vec<SolutionSet>> {
    if max_card < 1 {
        return Err(Error::Domain("max_card must be >= 1".into()));
    }
    params.validate()?;
    let window = params.window_n();
    let singleton = SolutionSet::singleton(rung_j);
    singleton.check_window(window)?;

    let ratio = params.ratio();
    let max_offset = if ratio.is_finite() { ratio.floor() as i64 } else { i64::MAX };
    let mut out = vec![singleton];
    if max_card == 1 || max_offset < 1 {
        return Ok(out);
    }
    let far = rung_j + max_offset;
    if far.abs() > window {
        return Err(Error::WindowOverflow { site: far, window });
    }

    // Depth-first over offset sets; appending a larger offset never lowers
    // the gap statistic on a linear window, so prune on it.
    let threshold = largest_integer_below(ratio);
    let mut stack = vec![0i64];
    extend(&mut stack, max_offset, max_card, threshold, rung_j, params, &mut out);
    out.sort_by(|a, b| a.cardinality().cmp(&b.cardinality()).then_with(|| a.offsets.cmp(&b.offsets)));
    Ok(out)
}

fn extend(
    stack: &mut Vec<i64>,
    max_offset: i64,
    max_card: usize,
    threshold: i64,
    rung_j: i64,
    params: &ModelParams,
    out: &mut Vec<SolutionSet>,
) {
    if stack.len() >= max_card {
        return;
    }
    let last = *stack.last().unwrap();
    for next in (last + 1)..=max_offset {
        let stat: i64 = stack.iter().map(|l| next - l).sum();
        if stat > threshold {
            break;
        }
        stack.push(next);
        let set = SolutionSet { rung_j, offsets: stack.clone() };
        if admissible(&set, params) {
            out.push(set);
        }
        extend(stack, max_offset, max_card, threshold, rung_j, params, out);
        stack.pop();
    }
}

/// `mu^S = nu/N + (f/N) sum xi(n)`.
pub fn energy_of(set: &SolutionSet, params: &ModelParams) -> f64 {
    let card = set.cardinality() as f64;
    let xi_sum: f64 = set.sites().map(|n| params.xi(n)).sum();
    params.nu / card + params.f * xi_sum / card
}

/// Energy as an exact linear form `mu = nu_coeff * nu + f_coeff * f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExactEnergy {
    pub nu_coeff: Ratio<i64>,
    pub f_coeff: Ratio<i64>,
}

impl ExactEnergy {
    pub fn eval(&self, nu: f64, f: f64) -> f64 {
        to_f64(self.nu_coeff) * nu + to_f64(self.f_coeff) * f
    }

    /// `mu / f` for a rational `nu / f`.
    pub fn over_f(&self, nu_over_f: Ratio<i64>) -> Ratio<i64> {
        self.nu_coeff * nu_over_f + self.f_coeff
    }
}

fn to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact energy when `xi` is integer-valued on the set; `None` otherwise.
pub fn energy_exact(set: &SolutionSet, params: &ModelParams) -> Option<ExactEnergy> {
    let card = set.cardinality() as i64;
    let mut xi_sum = 0i64;
    for n in set.sites() {
        xi_sum += params.tilt.xi_integer(n)?;
    }
    Some(ExactEnergy { nu_coeff: Ratio::new(1, card), f_coeff: Ratio::new(xi_sum, card) })
}

/// A normalized finite-mode solution of the decoupled lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteModeSolution {
    pub set: SolutionSet,
    pub mu: f64,
    /// Amplitudes aligned with `set.sites()`.
    pub amplitudes: Vec<f64>,
    pub signs: Vec<i8>,
}

impl FiniteModeSolution {
    pub fn amplitude_at(&self, site: i64) -> f64 {
        match self.set.offsets.binary_search(&(site - self.set.rung_j)) {
            Ok(k) => self.amplitudes[k],
            Err(_) => 0.0,
        }
    }

    /// Amplitudes on `[-halfwidth, halfwidth]`, index `i` holding site `i - halfwidth`.
    pub fn dense(&self, halfwidth: i64) -> Vec<f64> {
        (-halfwidth..=halfwidth).map(|n| self.amplitude_at(n)).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|d| d * d).sum()
    }

    pub fn normalization_defect(&self) -> f64 {
        (self.norm_sq() - 1.0).abs()
    }

    /// Largest `|(mu - nu d^2) d - f xi(n) d|` over the support (zero elsewhere).
    pub fn max_residual(&self, params: &ModelParams) -> f64 {
        self.set
            .sites()
            .zip(&self.amplitudes)
            .map(|(n, &d)| ((self.mu - params.nu * d * d) * d - params.f * params.xi(n) * d).abs())
            .fold(0.0, f64::max)
    }

    pub fn negated(&self) -> Self {
        Self {
            set: self.set.clone(),
            mu: self.mu,
            amplitudes: self.amplitudes.iter().map(|d| -d).collect(),
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// Positive amplitude at `min S`.
    pub fn is_canonical(&self) -> bool {
        self.signs.first() == Some(&1)
    }
}

/// Amplitudes `d_n = ±sqrt((mu - f xi(n)) / nu)` on `S`, normalized.
pub fn amplitudes(set: &SolutionSet, params: &ModelParams, signs: &[i8]) -> Result<FiniteModeSolution> {
    if signs.len() != set.cardinality() {
        return Err(Error::Dimension { expected: set.cardinality(), got: signs.len() });
    }
    if !(params.nu > 0.0) {
        return Err(Error::Domain("finite-mode amplitudes need nu > 0".into()));
    }
    let mu = energy_of(set, params);
    let mut amps = Vec::with_capacity(signs.len());
    for (n, &s) in set.sites().zip(signs) {
        if s != 1 && s != -1 {
            return Err(Error::Domain(format!("sign {s} must be +1 or -1")));
        }
        let deficit = mu - params.f * params.xi(n);
        if !(deficit > 0.0) {
            return Err(Error::Positivity { site: n, deficit });
        }
        amps.push(f64::from(s) * (deficit / params.nu).sqrt());
    }
    // The analytic squares sum to one; this removes the last ulp or two.
    let norm = amps.iter().map(|d| d * d).sum::<f64>().sqrt();
    for d in &mut amps {
        *d /= norm;
    }
    Ok(FiniteModeSolution { set: set.clone(), mu, amplitudes: amps, signs: signs.to_vec() })
}

/// Canonical solution: all signs positive.
pub fn positive_solution(set: &SolutionSet, params: &ModelParams) -> Result<FiniteModeSolution> {
    amplitudes(set, params, &vec![1; set.cardinality()])
}

/// All `2^N` sign patterns, canonical ones (positive at `min S`) first.
pub fn sign_variants(sol: &FiniteModeSolution) -> Vec<FiniteModeSolution> {
    let card = sol.set.cardinality();
    let mags: Vec<f64> = sol.amplitudes.iter().map(|d| d.abs()).collect();
    let mut out = Vec::with_capacity(1 << card);
    for leading in [1i8, -1] {
        for mask in 0u64..(1u64 << (card - 1)) {
            let mut signs = vec![leading];
            signs.extend((0..card - 1).map(|b| if mask >> b & 1 == 1 { -1i8 } else { 1 }));
            let amplitudes = mags.iter().zip(&signs).map(|(m, &s)| f64::from(s) * m).collect();
            out.push(FiniteModeSolution { set: sol.set.clone(), mu: sol.mu, amplitudes, signs });
        }
    }
    out
}

/// Sets appearing as `nu/f` crosses the integer `m`.
#[derive(Debug, Clone, Serialize)]
pub struct Threshold {
    pub nu_over_f: i64,
    /// `Q(m)`: all new sets, regardless of the cardinality cap.
    pub q: u128,
    pub new_sets: Vec<SolutionSet>,
    /// `Some(N)` when `m = N (N - 1) / 2`, where the consecutive `N`-site branch appears.
    pub consecutive_cardinality: Option<usize>,
}

/// Thresholds `m = 1 ..= K(K-1)/2` for `K = max_card`, each with the new
/// sets of cardinality `<= max_card` born there.
pub fn bifurcation_thresholds(max_card: usize) -> Result<Vec<Threshold>> {
    if max_card < 2 {
        return Err(Error::Domain("bifurcation thresholds need max_card >= 2".into()));
    }
    let last = (max_card * (max_card - 1) / 2) as i64;
    let q = distinct_partition_table(last as usize);
    let mut out = Vec::new();
    for m in 1..=last {
        // New sets at m are those whose gap statistic equals m exactly.
        let params = ModelParams::anticontinuous(m as f64 + 0.5, 1.0, m + 1)?;
        let new_sets: Vec<SolutionSet> = enumerate_solution_sets(&params, 0, max_card)?
            .into_iter()
            .filter(|s| s.cardinality() > 1 && s.gap_statistic() == m)
            .collect();
        let consecutive_cardinality = (2..=max_card).find(|&n| (n * (n - 1) / 2) as i64 == m);
        out.push(Threshold { nu_over_f: m, q: q[m as usize], new_sets, consecutive_cardinality });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRow {
    pub nu_over_f: f64,
    pub set_id: String,
    pub cardinality: usize,
    pub mu_over_f: f64,
    /// `nu/f` is an integer: branches born here are excluded.
    pub bifurcation_point: bool,
}

/// `mu/f` of every admissible rung-0 set at each ratio (units `f = 1`).
pub fn diagram_data(ratios: &[f64], max_card: usize) -> Result<Vec<DiagramRow>> {
    let mut rows = Vec::new();
    for &r in ratios {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Domain(format!("nu/f = {r} must be positive and finite")));
        }
        let window = r.floor() as i64 + 1;
        let params = ModelParams::anticontinuous(r, 1.0, window)?;
        let flag = is_integer_ratio(r);
        for set in enumerate_solution_sets(&params, 0, max_card)? {
            rows.push(DiagramRow {
                nu_over_f: r,
                set_id: set.id(),
                cardinality: set.cardinality(),
                mu_over_f: energy_of(&set, &params),
                bifurcation_point: flag,
            });
        }
    }
    Ok(rows)
}
