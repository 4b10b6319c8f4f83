use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use frontier_core::analysis::{
    acceleration_check, classify_outcome, compute_cstar_with_dispersal, estimate_speed, flattening_metric,
    reference_solution, truncation_ladder, AnalysisError, Front, SpeedEstimate,
};
use frontier_core::ap_ode::{ap_mean, solve_scalar, stable_dt, ApError};
use frontier_core::experiment::config::{defaults, ConfigError, ExperimentConfig};
use frontier_core::experiment::io::{self, fmt_num, IoError};
use frontier_core::experiment::{load_config, read_series, read_snapshots, run_sweep};
use frontier_core::kernels::{thin_tail_identity_check, validate_h1, AnyKernel, DispersalKernel};
use frontier_core::lyapunov::{find_lstar, lyapunov_exponent, LyapunovError};
use frontier_core::solver::{run, SolverError};
use frontier_core::ExtReal;

#[derive(Parser)]
#[command(name = "frontier", version, about = "Nonlocal-dispersal KPP free-boundary simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Right,
    Left,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write series.csv, snapshots and summary.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit front speeds from a run directory.
    Speed {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        front: Which,
        #[arg(long, default_value_t = defaults::WINDOW_FRACTION)]
        window_fraction: f64,
    },
    /// Spreading / vanishing verdict for a run directory.
    Classify {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = defaults::WIDTH_THRESHOLD)]
        width_threshold: f64,
        #[arg(long, default_value_t = defaults::DECAY_TOL)]
        decay_tol: f64,
    },
    /// Deviation from the attracting state behind the fronts, per snapshot.
    Flatten {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        eps_fraction: Option<f64>,
        /// Also write the (t, deviation) series to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Superlinear growth test h(T)/T vs h(T/4)/(T/4).
    Accel {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Theoretical spreading speed for a config.
    Cstar {
        #[arg(long)]
        config: PathBuf,
    },
    /// c* of successive truncations of the configured kernel.
    Ladder {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        cutoffs: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
    },
    /// Long-time mean of the attracting solution of u' = u f(t,u).
    Apmean {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4000.0)]
        horizon: f64,
        #[arg(long, default_value_t = 4)]
        doublings: u32,
    },
    /// Principal Lyapunov exponent on (-L, L).
    Lyapunov {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "L")]
        half_length: f64,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0)]
        renorm_every: f64,
    },
    /// Smallest half-length with a positive Lyapunov exponent.
    Lstar {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        lmax: f64,
    },
    /// Check the configured kernel against the structural hypotheses.
    CheckKernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Run a one-parameter sweep from the config's [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "FRONTIER_JOBS", default_value_t = 1)]
        jobs: usize,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(m) => Failure::Config(format!("ValidationError: {m}")),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

macro_rules! numerical {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Numerical(e.to_string())
            }
        })*
    };
}
numerical!(AnalysisError, ApError, LyapunovError);

fn speed_block(name: &str, est: &SpeedEstimate<f64>) -> String {
    format!(
        "{name}.c_hat = {}\n{name}.stderr = {}\n{name}.window = [{}, {}]\n{name}.endpoint_ratio = {}\n{name}.disagreement = {}\n",
        fmt_num(est.slope.c_hat),
        fmt_num(est.slope.stderr),
        est.slope.window.0,
        est.slope.window.1,
        fmt_num(est.endpoint.c_hat),
        fmt_num(est.disagreement()),
    )
}

fn target_for(cfg: &ExperimentConfig) -> Result<frontier_core::Target, Failure> {
    Ok(compute_cstar_with_dispersal(cfg.run.mu, cfg.run.d, &cfg.run.growth, &cfg.run.kernel)?)
}

fn base_kernel(cfg: &ExperimentConfig) -> frontier_core::Kernel {
    match &cfg.run.kernel {
        AnyKernel::Base(k) => *k,
        AnyKernel::Truncated(t) => *t.base(),
    }
}

fn series_path(dir: &Path) -> PathBuf {
    dir.join(io::SERIES_FILE)
}

fn execute(command: Command) -> Result<String, Failure> {
    let mut out = String::new();
    match command {
        Command::Simulate { config, out: dir } => {
            let cfg = load_config(&config)?;
            let record = run(&cfg.run)?;
            io::write_record(&dir, &record, Some(&cfg.source))?;
            out = io::summary(&record);
        }
        Command::Speed { dir, front, window_fraction } => {
            let series = read_series(&series_path(&dir))?;
            if matches!(front, Which::Right | Which::Both) {
                out += &speed_block("right", &estimate_speed(&series, Front::Right, window_fraction)?);
            }
            if matches!(front, Which::Left | Which::Both) {
                out += &speed_block("left", &estimate_speed(&series, Front::Left, window_fraction)?);
            }
        }
        Command::Classify { dir, width_threshold, decay_tol } => {
            let series = read_series(&series_path(&dir))?;
            let last = series.last().ok_or_else(|| Failure::Numerical("empty series".into()))?;
            let outcome = classify_outcome(&series, width_threshold, decay_tol);
            let _ = write!(
                out,
                "outcome = {outcome}\nfinal_width = {}\numax_final = {}\nwidth_threshold = {width_threshold}\ndecay_tol = {decay_tol}\n",
                fmt_num(last.h - last.g),
                fmt_num(last.umax)
            );
        }
        Command::Flatten { config, dir, eps_fraction, csv } => {
            let cfg = load_config(&config)?;
            let eps = eps_fraction.unwrap_or(cfg.analysis.eps_fraction);
            let snaps = read_snapshots(&dir)?;
            let t_end = snaps.last().map_or(0.0, |s| s.t);
            let target = target_for(&cfg)?;
            let ap = reference_solution(&cfg.run.growth, t_end.max(1.0))?;
            let metric = flattening_metric(&snaps, &target, eps, &ap)?;
            let mut table = String::from("t,deviation\n");
            for (t, dev) in &metric {
                let _ = writeln!(table, "{},{}", fmt_num(*t), fmt_num(*dev));
            }
            if let Some(path) = csv {
                std::fs::write(&path, &table).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            }
            let _ = write!(out, "c_star = {}\neps_fraction = {eps}\nsnapshots = {}\n", target.c_star, metric.len());
            if let Some((t, dev)) = metric.last() {
                let _ = write!(out, "t_final = {t}\ndeviation_final = {}\n", fmt_num(*dev));
            }
            out += &table;
        }
        Command::Accel { dir } => {
            let series = read_series(&series_path(&dir))?;
            let (verdict, ratio) = acceleration_check(&series)?;
            let _ = write!(out, "accelerated = {verdict}\nratio = {}\n", fmt_num(ratio));
        }
        Command::Cstar { config } => {
            out = target_for(&load_config(&config)?)?.to_key_value();
        }
        Command::Ladder { config, cutoffs, width } => {
            let cfg = load_config(&config)?;
            let ladder =
                truncation_ladder(cfg.run.mu, cfg.run.d, &cfg.run.growth, &base_kernel(&cfg), &cutoffs, width)?;
            out += "cutoff,c_star,u_mean,m1\n";
            for (n, t) in cutoffs.iter().zip(&ladder) {
                let _ = writeln!(out, "{n},{},{},{}", t.c_star, fmt_num(t.u_mean), t.m1);
            }
        }
        Command::Apmean { config, horizon, doublings } => {
            let cfg = load_config(&config)?;
            let growth = &cfg.run.growth;
            let u_init = growth.saturation().max(1e-3);
            let sol = solve_scalar(growth, 0.0, u_init, horizon, stable_dt(growth, 0.0, u_init))?;
            let m = ap_mean(&sol, doublings)?;
            let _ = write!(
                out,
                "u_mean = {}\nrelative_change = {:.3e}\ntransient_cut = {}\nci_width = {:.3e}\n",
                fmt_num(m.mean),
                m.relative_change,
                sol.transient_cut,
                sol.mean_ci_width
            );
        }
        Command::Lyapunov { config, half_length, horizon, renorm_every } => {
            let cfg = load_config(&config)?;
            let est = lyapunov_exponent(
                cfg.run.growth.intrinsic(),
                cfg.run.d,
                &cfg.run.kernel,
                half_length,
                horizon,
                renorm_every,
            )?;
            let slopes: Vec<String> = est.window_slopes.iter().map(|s| format!("{s:.6}")).collect();
            let _ = write!(
                out,
                "L = {half_length}\nlambda = {}\nci_width = {:.3e}\nwindow_slopes = [{}]\n",
                fmt_num(est.lambda),
                est.ci_width,
                slopes.join(", ")
            );
        }
        Command::Lstar { config, lmax } => {
            let cfg = load_config(&config)?;
            let l = find_lstar(cfg.run.growth.intrinsic(), cfg.run.d, &cfg.run.kernel, lmax)?;
            let _ = writeln!(out, "lstar = {}", l.map_or("none".to_string(), |l| l.to_string()));
        }
        Command::CheckKernel { config, samples } => {
            let cfg = load_config(&config)?;
            let k = &cfg.run.kernel;
            let _ = writeln!(out, "kernel = {}", k.describe());
            out += &validate_h1(k, samples).to_key_value();
            let _ = writeln!(out, "half_first_moment = {}", k.half_first_moment());
            if let ExtReal::Finite(_) = k.half_first_moment() {
                let residual =
                    thin_tail_identity_check(k, k.reach(1e-13)).map_err(|e| Failure::Numerical(e.to_string()))?;
                let _ = writeln!(out, "thin_tail_residual = {residual:.3e}");
            }
        }
        Command::Sweep { config, out: dir, jobs } => {
            let cfg = load_config(&config)?;
            let report = run_sweep(&cfg, jobs, dir.as_deref()).map_err(|e| Failure::Config(e.to_string()))?;
            out += &report.to_table();
            let _ = write!(
                out,
                "transitions = {}\nmonotone = {}\n",
                report.transitions(),
                report.monotone.map_or("n/a".to_string(), |m| m.to_string())
            );
            if let Some(dir) = dir {
                let path = dir.join("sweep.csv");
                std::fs::write(&path, report.to_table())
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Config(m) | Failure::Numerical(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.exit_code())
        }
    }
}
