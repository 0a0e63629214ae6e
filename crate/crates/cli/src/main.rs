//! `swlab`: stationary states of the nonlinear Stark-Wannier problem from the command line.

mod commands;
mod config;
mod table;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swlab_core::{StarkShape, TiltKind};

use commands::{Failure, Report};
use config::{load, ContinueMode, ModelConfig, OutputConfig};
use table::Format;

#[derive(Parser)]
#[command(name = "swlab", version, about = "Stark-Wannier lattice and continuum stationary states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration document for the subcommand.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    k_l: Option<f64>,
    /// Tilt strength F (default h^2).
    #[arg(long)]
    field: Option<f64>,
    /// Nonlinearity eta (default h^2).
    #[arg(long)]
    eta: Option<f64>,
    /// Linear window half-width N in periods.
    #[arg(long)]
    window_n: Option<i64>,
    #[arg(long, value_enum)]
    stark: Option<StarkArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StarkArg {
    Tapered,
    Linear,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TiltArg {
    LinearClamped,
    LinearTapered,
}

impl ModelFlags {
    fn apply(&self, m: &mut ModelConfig) {
        set(&mut m.v0, self.v0);
        set(&mut m.k_l, self.k_l);
        if self.field.is_some() {
            m.field = self.field;
        }
        if self.eta.is_some() {
            m.eta = self.eta;
        }
        set(&mut m.window_n, self.window_n);
        if let Some(s) = self.stark {
            m.stark = match s {
                StarkArg::Tapered => StarkShape::Tapered,
                StarkArg::Linear => StarkShape::Linear,
            };
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Finite-mode solutions of the decoupled lattice, one row per solution.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nu_over_f: Option<f64>,
        #[arg(long)]
        f: Option<f64>,
        #[arg(long)]
        window_n: Option<i64>,
        #[arg(long, allow_hyphen_values = true)]
        rung: Option<i64>,
        #[arg(long)]
        max_card: Option<usize>,
        #[arg(long, value_enum)]
        tilt: Option<TiltArg>,
        #[arg(long)]
        taper_width: Option<i64>,
        /// Every sign pattern positive at the first site.
        #[arg(long)]
        all_signs: bool,
    },
    /// Number of multi-site solution sets M(nu/f).
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        nu_over_f: Option<Vec<f64>>,
    },
    /// mu/f of every branch on a grid of nu/f.
    Diagram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nu_min: Option<f64>,
        #[arg(long)]
        nu_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        max_card: Option<usize>,
    },
    /// Continue a finite-mode solution to nonzero hopping.
    Continue {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nu_over_f: Option<f64>,
        #[arg(long)]
        f: Option<f64>,
        #[arg(long)]
        window_n: Option<i64>,
        #[arg(long, allow_hyphen_values = true)]
        rung: Option<i64>,
        /// Site offsets from the rung, e.g. 0,1,3.
        #[arg(long, value_delimiter = ',')]
        offsets: Option<Vec<i64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        signs: Option<Vec<i8>>,
        #[arg(long)]
        beta_over_lambda: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ContinueMode>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Lattice coefficients derived from the periodic potential, with scaling fits.
    Effective {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long)]
        rho_fraction: Option<f64>,
    },
    /// Bloch bands E_l(k) of the periodic potential.
    Bands {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        n_k: Option<usize>,
        #[arg(long)]
        n_bands: Option<usize>,
    },
    /// End-to-end continuum solution and residual checks; exit 1 on any failed check.
    VerifyPde {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        rung: Option<i64>,
        #[arg(long, value_delimiter = ',')]
        offsets: Option<Vec<i64>>,
        #[arg(long)]
        residual_max: Option<f64>,
        #[arg(long)]
        contraction_max: Option<f64>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_output(out: &mut OutputConfig, common: &Common) {
    if common.out.is_some() {
        out.path = common.out.clone();
    }
    if common.format.is_some() {
        out.format = common.format;
    }
}

fn usage(e: config::ConfigError) -> Failure {
    Failure::Usage(e.to_string())
}

fn run(cli: Cli) -> Result<(Report, OutputConfig), Failure> {
    match cli.command {
        Command::Enumerate { common, nu_over_f, f, window_n, rung, max_card, tilt, taper_width, all_signs } => {
            let mut c: config::EnumerateConfig = load(common.config.as_deref()).map_err(usage)?;
            set(&mut c.nu_over_f, nu_over_f);
            set(&mut c.f, f);
            if window_n.is_some() {
                c.window_n = window_n;
            }
            set(&mut c.rung, rung);
            if max_card.is_some() {
                c.max_card = max_card;
            }
            if let Some(t) = tilt {
                c.tilt.kind = match t {
                    TiltArg::LinearClamped => TiltKind::LinearClamped,
                    TiltArg::LinearTapered => TiltKind::LinearTapered,
                };
            }
            set(&mut c.tilt.taper_width, taper_width);
            c.all_signs |= all_signs;
            apply_output(&mut c.output, &common);
            Ok((commands::enumerate(&c)?, c.output))
        }
        Command::Count { common, nu_over_f } => {
            let mut c: config::CountConfig = load(common.config.as_deref()).map_err(usage)?;
            set(&mut c.nu_over_f, nu_over_f);
            apply_output(&mut c.output, &common);
            Ok((commands::count(&c)?, c.output))
        }
        Command::Diagram { common, nu_min, nu_max, step, max_card } => {
            let mut c: config::DiagramConfig = load(common.config.as_deref()).map_err(usage)?;
            set(&mut c.nu_min, nu_min);
            set(&mut c.nu_max, nu_max);
            set(&mut c.step, step);
            if max_card.is_some() {
                c.max_card = max_card;
            }
            apply_output(&mut c.output, &common);
            Ok((commands::diagram(&c)?, c.output))
        }
        Command::Continue {
            common,
            nu_over_f,
            f,
            window_n,
            rung,
            offsets,
            signs,
            beta_over_lambda,
            steps,
            mode,
            tol,
            max_iter,
        } => {
            let mut c: config::ContinueConfig = load(common.config.as_deref()).map_err(usage)?;
            set(&mut c.nu_over_f, nu_over_f);
            set(&mut c.f, f);
            set(&mut c.window_n, window_n);
            set(&mut c.rung, rung);
            set(&mut c.offsets, offsets);
            set(&mut c.signs, signs);
            set(&mut c.beta_over_lambda, beta_over_lambda);
            set(&mut c.steps, steps);
            set(&mut c.mode, mode);
            set(&mut c.tol, tol);
            set(&mut c.max_iter, max_iter);
            apply_output(&mut c.output, &common);
            Ok((commands::continue_branch(&c)?, c.output))
        }
        Command::Effective { common, model, h, rho_fraction } => {
            let mut c: config::EffectiveConfig = load(common.config.as_deref()).map_err(usage)?;
            model.apply(&mut c.model);
            set(&mut c.h, h);
            set(&mut c.rho_fraction, rho_fraction);
            apply_output(&mut c.output, &common);
            Ok((commands::effective(&c)?, c.output))
        }
        Command::Bands { common, model, h, n_k, n_bands } => {
            let mut c: config::BandsConfig = load(common.config.as_deref()).map_err(usage)?;
            model.apply(&mut c.model);
            set(&mut c.h, h);
            set(&mut c.n_k, n_k);
            set(&mut c.n_bands, n_bands);
            apply_output(&mut c.output, &common);
            Ok((commands::bands(&c)?, c.output))
        }
        Command::VerifyPde { common, model, h, rung, offsets, residual_max, contraction_max } => {
            let mut c: config::VerifyConfig = load(common.config.as_deref()).map_err(usage)?;
            model.apply(&mut c.model);
            set(&mut c.h, h);
            set(&mut c.rung, rung);
            set(&mut c.offsets, offsets);
            set(&mut c.residual_max, residual_max);
            set(&mut c.contraction_max, contraction_max);
            apply_output(&mut c.output, &common);
            Ok((commands::verify_pde(&c)?, c.output))
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SWLAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("SWLAB_THREADS = {v:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn emit(report: &Report, out: &OutputConfig) -> Result<(), Failure> {
    let text = report.table.render(out.format.unwrap_or(Format::Csv));
    match &out.path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(format!("cannot write output: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(cli)).and_then(|(report, out)| {
        emit(&report, &out)?;
        Ok(report.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("swlab: tolerance check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("swlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
