//! Subcommand bodies: configuration in, table out.

use rayon::prelude::*;
use swlab_core::{
    amplitudes, continue_in_beta, count_solution_sets, counting_asymptotics, diagram_data, end_to_end,
    enumerate_solution_sets, hopping_scaling_report, is_integer_ratio, scaling_point, sign_variants,
    solve_bands, ContinuationStep, Error, FixedPointOptions, ModelParams, NewtonOptions, ScalingPoint,
    SolutionSet, TiltProfile,
};
use swlab_core::lattice::continue_normalized_path;

use crate::config::{
    BandsConfig, ContinueConfig, ContinueMode, CountConfig, DiagramConfig, EffectiveConfig, EnumerateConfig,
    VerifyConfig,
};
use crate::table::{format_float, Cell, Table};

/// Why a command did not produce a clean result.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad configuration or arguments: exit 2, nothing written.
    Usage(String),
    /// A numerical stage failed: exit 1, nothing written.
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::WindowOverflow { .. }
            | Error::Dimension { .. }
            | Error::BifurcationPoint { .. }
            | Error::Positivity { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

/// A finished table; `passed = false` still writes output but exits 1.
pub struct Report {
    pub table: Table,
    pub passed: bool,
}

impl Report {
    fn ok(table: Table) -> Self {
        Self { table, passed: true }
    }
}

fn positive_finite(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{name} = {v} must be positive and finite")))
    }
}

fn status_text(e: &Error) -> String {
    match e {
        Error::Positivity { .. } => "positivity_violated".into(),
        Error::SingularScaling { .. } => "singular_scaling".into(),
        Error::Resolution { .. } => "insufficient_resolution".into(),
        Error::NonContraction { .. } => "non_contraction".into(),
        Error::SupportTouchesTaper { .. } => "support_touches_taper".into(),
        other => format!("error: {other}"),
    }
}

pub fn enumerate(cfg: &EnumerateConfig) -> Result<Report, Failure> {
    positive_finite("nu_over_f", cfg.nu_over_f)?;
    positive_finite("f", cfg.f)?;
    let window = cfg.window_n.unwrap_or(cfg.nu_over_f.floor() as i64 + cfg.rung.abs() + 1);
    let params = ModelParams::new(cfg.nu_over_f * cfg.f, cfg.f, 0.0, cfg.tilt.profile(window))?;
    let sets = enumerate_solution_sets(&params, cfg.rung, cfg.max_card.unwrap_or(usize::MAX))?;

    let mut t = Table::new(vec!["set_id", "sites", "cardinality", "mu", "mu_over_f", "signs", "amplitudes", "status"]);
    for set in &sets {
        let sites = set.sites().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
        let plus = vec![1i8; set.cardinality()];
        let patterns = match amplitudes(set, &params, &plus) {
            Ok(sol) if cfg.all_signs => {
                sign_variants(&sol).into_iter().filter(|s| s.is_canonical()).map(Ok).collect()
            }
            other => vec![other],
        };
        for sol in patterns {
            let mu = swlab_core::energy_of(set, &params);
            let (signs, amps, status) = match sol {
                Ok(s) => (
                    s.signs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
                    s.amplitudes.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(";"),
                    "ok".to_string(),
                ),
                Err(e) => (String::new(), String::new(), status_text(&e)),
            };
            t.push(vec![
                set.id().into(),
                sites.clone().into(),
                set.cardinality().into(),
                mu.into(),
                (mu / cfg.f).into(),
                signs.into(),
                amps.into(),
                status.into(),
            ]);
        }
    }
    Ok(Report::ok(t))
}

pub fn count(cfg: &CountConfig) -> Result<Report, Failure> {
    if cfg.nu_over_f.is_empty() {
        return Err(Failure::Usage("count needs at least one nu_over_f".into()));
    }
    let mut t = Table::new(vec![
        "nu_over_f",
        "multi_site_sets",
        "total_sets",
        "m_asymptotic",
        "m_ratio",
        "bifurcation_point",
    ]);
    for &r in &cfg.nu_over_f {
        positive_finite("nu_over_f", r)?;
        let m = count_solution_sets(r)?;
        // M(r) sums Q(n) for n < ceil(r), which is exactly the n = ceil(r) asymptotic entry.
        let n = if is_integer_ratio(r) { r.round() as usize } else { r.ceil() as usize };
        let asym = counting_asymptotics(n.max(1))?;
        let ratio = if m == 0 { Cell::Empty } else { asym.m_ratio.into() };
        t.push(vec![
            r.into(),
            Cell::UInt(m),
            Cell::UInt(m + 1),
            asym.m_asymptotic.into(),
            ratio,
            is_integer_ratio(r).into(),
        ]);
    }
    Ok(Report::ok(t))
}

/// `nu_min + i step` up to `nu_max`, snapped to 12 decimals so grid points land on integers.
pub fn diagram_ratios(cfg: &DiagramConfig) -> Result<Vec<f64>, Failure> {
    positive_finite("nu_min", cfg.nu_min)?;
    positive_finite("step", cfg.step)?;
    if !(cfg.nu_max >= cfg.nu_min) || !cfg.nu_max.is_finite() {
        return Err(Failure::Usage(format!("nu_max = {} must be >= nu_min", cfg.nu_max)));
    }
    let count = ((cfg.nu_max - cfg.nu_min) / cfg.step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Failure::Usage(format!("{count} diagram points exceed the limit of 1000000")));
    }
    Ok((0..count).map(|i| ((cfg.nu_min + i as f64 * cfg.step) * 1e12).round() / 1e12).collect())
}

pub fn diagram(cfg: &DiagramConfig) -> Result<Report, Failure> {
    let ratios = diagram_ratios(cfg)?;
    let rows = diagram_data(&ratios, cfg.max_card.unwrap_or(usize::MAX))?;
    let mut t = Table::new(vec!["nu_over_f", "set_id", "cardinality", "mu_over_f", "bifurcation_point"]);
    for r in rows {
        t.push(vec![r.nu_over_f.into(), r.set_id.into(), r.cardinality.into(), r.mu_over_f.into(), r.bifurcation_point.into()]);
    }
    Ok(Report::ok(t))
}

pub fn continue_branch(cfg: &ContinueConfig) -> Result<Report, Failure> {
    positive_finite("nu_over_f", cfg.nu_over_f)?;
    positive_finite("f", cfg.f)?;
    if cfg.steps == 0 {
        return Err(Failure::Usage("steps must be >= 1".into()));
    }
    let params = ModelParams::new(cfg.nu_over_f * cfg.f, cfg.f, 0.0, TiltProfile::clamped(cfg.window_n))?;
    let set = SolutionSet::new(cfg.rung, cfg.offsets.clone())?;
    let signs = if cfg.signs.is_empty() { vec![1; set.cardinality()] } else { cfg.signs.clone() };
    let sol0 = amplitudes(&set, &params, &signs)?;
    let beta = cfg.beta_over_lambda * sol0.mu;
    if !(beta >= 0.0) {
        return Err(Failure::Usage(format!("beta = {beta} must be >= 0")));
    }
    let opts = NewtonOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..NewtonOptions::default() };
    let steps: Vec<ContinuationStep> = match cfg.mode {
        ContinueMode::Fixed => continue_in_beta(&sol0, &params, beta, cfg.steps, &opts)?,
        ContinueMode::Normalized => continue_normalized_path(&sol0, &params, beta, cfg.steps, &opts)?,
    };
    let mut t = Table::new(vec!["beta", "lambda_tilde", "l1_error", "iterations", "residual"]);
    for s in steps {
        t.push(vec![
            s.beta.into(),
            s.solution.lambda_tilde.into(),
            s.l1_error.into(),
            s.solution.iterations.into(),
            s.solution.residual_norm.into(),
        ]);
    }
    Ok(Report::ok(t))
}

fn check_h_list(h: &[f64]) -> Result<(), Failure> {
    if h.is_empty() {
        return Err(Failure::Usage("need at least one h".into()));
    }
    h.iter().try_for_each(|&v| positive_finite("h", v))
}

const EFFECTIVE_COLUMNS: [&str; 33] = [
    "h",
    "status",
    "lambda1",
    "onsite",
    "beta",
    "c0",
    "c1",
    "s0",
    "nu",
    "f",
    "e1_bottom",
    "e1_top",
    "e2_bottom",
    "bandwidth",
    "gap",
    "edge_drift",
    "cell_points",
    "lambda1_band_distance",
    "beta_band_mismatch",
    "gap_over_h",
    "c1_sqrt_h",
    "bracket_ok",
    "overlap_l1",
    "u_inf_scaled",
    "sum_abs_scaled",
    "xi_residual",
    "translation_defect",
    "orthonormality_defect",
    "fit_beta_slope",
    "fit_beta_r_squared",
    "fit_slope_ratio",
    "fit_bandwidth_slope",
    "fit_all_beta_positive",
];

pub fn effective(cfg: &EffectiveConfig) -> Result<Report, Failure> {
    check_h_list(&cfg.h)?;
    if !(cfg.rho_fraction > 0.0 && cfg.rho_fraction < 1.0) {
        return Err(Failure::Usage(format!("rho_fraction = {} must lie in (0, 1)", cfg.rho_fraction)));
    }
    let models = cfg.h.iter().map(|&h| cfg.model.model(h)).collect::<swlab_core::Result<Vec<_>>>()?;
    let results: Vec<swlab_core::Result<ScalingPoint>> =
        models.par_iter().map(|m| scaling_point(m, m.window_n, cfg.rho_fraction)).collect();

    let good: Vec<ScalingPoint> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let fit = if good.len() == results.len() { hopping_scaling_report(good, cfg.rho_fraction).ok() } else { None };
    let fit_cells: Vec<Cell> = match &fit {
        Some(f) => vec![
            f.beta_fit.slope.into(),
            f.beta_fit.r_squared.into(),
            f.slope_ratio.into(),
            f.bandwidth_fit.slope.into(),
            f.all_beta_positive.into(),
        ],
        None => vec![Cell::Empty; 5],
    };

    let mut t = Table::new(EFFECTIVE_COLUMNS.to_vec());
    let mut passed = true;
    for (h, r) in cfg.h.iter().zip(results) {
        let mut row: Vec<Cell> = vec![(*h).into()];
        match r {
            Ok(p) => {
                let e = &p.params.edges;
                row.push("ok".into());
                row.extend([
                    p.params.lambda1,
                    p.params.onsite,
                    p.params.beta,
                    p.params.c0,
                    p.params.c1,
                    p.params.s0,
                    p.params.nu,
                    p.params.f,
                    e.e1_bottom,
                    e.e1_top,
                    e.e2_bottom,
                    e.bandwidth(),
                    e.gap(),
                    e.drift,
                ].map(Cell::from));
                row.push(e.cell_points.into());
                row.extend([p.params.lambda1_band_distance, p.beta_band_mismatch, p.gap_over_h, p.c1_sqrt_h].map(Cell::from));
                row.push(p.bracket_ok.into());
                row.extend([
                    p.overlap_l1,
                    p.u_inf_scaled,
                    p.sum_abs_scaled,
                    p.xi_residual,
                    p.translation_defect,
                    p.orthonormality_defect,
                ].map(Cell::from));
            }
            Err(e) => {
                passed = false;
                row.push(status_text(&e).into());
                row.extend(std::iter::repeat(Cell::Empty).take(26));
            }
        }
        row.extend(fit_cells.iter().cloned());
        t.push(row);
    }
    Ok(Report { table: t, passed })
}

pub fn bands(cfg: &BandsConfig) -> Result<Report, Failure> {
    positive_finite("h", cfg.h)?;
    if cfg.n_k == 0 || cfg.n_bands == 0 {
        return Err(Failure::Usage("n_k and n_bands must be >= 1".into()));
    }
    let model = cfg.model.model(cfg.h)?;
    let data = solve_bands(&model, cfg.n_k, cfg.n_bands)?;
    let mut t = Table::new(vec!["band", "k", "energy"]);
    for (l, row) in data.energies.iter().enumerate() {
        for (k, e) in data.k.iter().zip(row) {
            t.push(vec![(l + 1).into(), (*k).into(), (*e).into()]);
        }
    }
    Ok(Report::ok(t))
}

pub fn verify_pde(cfg: &VerifyConfig) -> Result<Report, Failure> {
    check_h_list(&cfg.h)?;
    if !(cfg.ladder_min <= cfg.ladder_max) {
        return Err(Failure::Usage("ladder_min must not exceed ladder_max".into()));
    }
    let set = SolutionSet::new(cfg.rung, cfg.offsets.clone())?;
    let mut hs = cfg.h.clone();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    let models = hs.iter().map(|&h| cfg.model.model(h)).collect::<swlab_core::Result<Vec<_>>>()?;
    let opts = FixedPointOptions { tol: cfg.fixed_point_tol, max_iter: cfg.fixed_point_max_iter, ..FixedPointOptions::default() };
    let runs: Vec<_> = models.par_iter().map(|m| end_to_end(m, &set, &opts)).collect();

    let mut t = Table::new(vec![
        "h",
        "status",
        "residual",
        "residual_decoupled",
        "lambda",
        "lambda_tilde",
        "mu",
        "beta",
        "contraction_factor",
        "iterations",
        "perp_h1_norm",
        "ladder_ratio",
        "residual_ok",
        "residual_decreasing",
        "contraction_ok",
        "ladder_ok",
        "pass",
    ]);
    let finest = hs.len() - 1;
    let mut previous: Option<f64> = None;
    let mut all = true;
    for (i, (h, run)) in hs.iter().zip(runs).enumerate() {
        let row = match run {
            Ok(r) => {
                let res = r.solution.residual_l2;
                let residual_ok = i != finest || res < cfg.residual_max;
                let decreasing = !cfg.monotone || previous.map_or(true, |p| res < p);
                previous = Some(res);
                let contraction_ok = r.solution.contraction_factor < cfg.contraction_max;
                let ladder_ok = (cfg.ladder_min..=cfg.ladder_max).contains(&r.ladder.ratio);
                let pass = residual_ok && decreasing && contraction_ok && ladder_ok;
                all &= pass;
                let mut row: Vec<Cell> = vec![(*h).into(), "ok".into()];
                row.extend(
                    [res, r.residual_decoupled, r.solution.lambda, r.lambda_tilde, r.mu, r.params.beta, r.solution.contraction_factor]
                        .map(Cell::from),
                );
                row.push(r.solution.iterations.into());
                row.extend([r.solution.perp_h1_norm, r.ladder.ratio].map(Cell::from));
                row.extend([residual_ok, decreasing, contraction_ok, ladder_ok, pass].map(Cell::from));
                row
            }
            Err(e) => {
                all = false;
                previous = None;
                let mut row: Vec<Cell> = vec![(*h).into(), status_text(&e).into()];
                row.extend(std::iter::repeat(Cell::Empty).take(10));
                row.extend([false; 5].map(Cell::from));
                row
            }
        };
        t.push(row);
    }
    Ok(Report { table: t, passed: all })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column<'a>(t: &'a Table, name: &str) -> Vec<&'a Cell> {
        let i = t.columns.iter().position(|c| *c == name).unwrap();
        t.rows.iter().map(|r| &r[i]).collect()
    }

    #[test]
    fn enumerate_row_counts() {
        let rows = |r: f64| enumerate(&EnumerateConfig { nu_over_f: r, ..Default::default() }).unwrap().table.rows.len();
        assert_eq!(rows(3.5), 5);
        assert_eq!(rows(0.5), 1);
        // One row per set: the singleton plus M(nu/f).
        for r in [1.5, 2.5, 4.5, 7.25, 9.9] {
            assert_eq!(rows(r) as u128, count_solution_sets(r).unwrap() + 1);
        }
    }

    #[test]
    fn enumerate_all_signs_emits_canonical_patterns() {
        let cfg = EnumerateConfig { nu_over_f: 3.5, all_signs: true, ..Default::default() };
        let t = enumerate(&cfg).unwrap().table;
        // {0}: 1, {0,1}, {0,2}, {0,3}: 2 each, {0,1,2}: 4.
        assert_eq!(t.rows.len(), 1 + 2 * 3 + 4);
        assert!(column(&t, "signs").iter().all(|c| matches!(c, Cell::Text(s) if s.starts_with('1'))));
    }

    #[test]
    fn enumerate_window_overflow_is_usage_error() {
        let cfg = EnumerateConfig { nu_over_f: 6.5, window_n: Some(3), ..Default::default() };
        assert_eq!(enumerate(&cfg).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn diagram_grid_hits_integers() {
        let cfg = DiagramConfig::default();
        let r = diagram_ratios(&cfg).unwrap();
        assert_eq!(r.len(), 200);
        assert_eq!(*r.last().unwrap(), 10.0);
        assert!(r.contains(&3.0));
    }

    #[test]
    fn diagram_rows_match_counts() {
        let cfg = DiagramConfig { nu_min: 0.25, nu_max: 10.0, step: 0.25, ..Default::default() };
        let t = diagram(&cfg).unwrap().table;
        for r in diagram_ratios(&cfg).unwrap() {
            let n = column(&t, "nu_over_f").iter().filter(|c| **c == &Cell::Float(r)).count();
            assert_eq!(n as u128, count_solution_sets(r).unwrap() + 1, "nu/f = {r}");
        }
    }

    #[test]
    fn continue_fixed_mode_errors_shrink_with_beta() {
        let t = continue_branch(&ContinueConfig::default()).unwrap().table;
        let errs: Vec<f64> = column(&t, "l1_error")
            .iter()
            .map(|c| match c {
                Cell::Float(v) => *v,
                _ => panic!(),
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[0] <= w[1]));
        assert!(column(&t, "residual").iter().all(|c| matches!(c, Cell::Float(v) if *v < 1e-12)));
    }

    #[test]
    fn continue_at_integer_ratio_is_usage_error() {
        let cfg = ContinueConfig { nu_over_f: 5.0, ..Default::default() };
        assert_eq!(continue_branch(&cfg).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn count_matches_partitions() {
        let t = count(&CountConfig { nu_over_f: vec![0.5, 3.5, 10.0, 10.5], ..Default::default() }).unwrap().table;
        let m: Vec<&Cell> = column(&t, "multi_site_sets");
        assert_eq!(m, [&Cell::UInt(0), &Cell::UInt(4), &Cell::UInt(32), &Cell::UInt(42)]);
    }
}
