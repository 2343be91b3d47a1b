//! `mma-doa` command line.
//!
//! Exit status: 0 on success, 1 on invalid arguments or input, 2 on runtime failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::measurement::{load_measurement, measurement_to_string};
use super::{crb_csv, fmt_sig, run_sweep, CrbRow, Experiment, FovSpec, GridSpec, SweepConfig};
use crate::basis::{BasisSpec, Dimension};
use crate::crb::crb_sweep;
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, Objective};
use crate::pattern::{
    eval_pattern, fit_pattern, load_model, load_pattern_samples, save_model, synth_pattern, FitOptions,
};
use crate::signal::{simulate_power, stream_rng, SignalParams};

#[derive(Debug, Parser)]
#[command(
    name = "mma-doa",
    version,
    about = "Power-based direction finding with a multi-mode antenna"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random smooth nonnegative pattern.
    Synth {
        #[arg(long)]
        ports: usize,
        /// Amplitude order; the stored power pattern has twice this order.
        #[arg(long)]
        order: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "3d")]
        dim: Dimension,
        /// Per-degree energy decay rate of the amplitude.
        #[arg(long, default_value_t = 0.5)]
        smoothness: f64,
    },
    /// Least-squares fit of calibration samples.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        dim: Dimension,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
        /// Relative tail energy below which trailing degrees are dropped.
        #[arg(long, default_value_t = 1e-6, conflicts_with = "no_truncate")]
        truncation_tol: f64,
        #[arg(long)]
        no_truncate: bool,
    },
    /// Per-port gains at one direction.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta_deg: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        phi_deg: f64,
    },
    /// One simulated power measurement.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta_deg: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        phi_deg: f64,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
    },
    /// Direction estimate from one measurement.
    Estimate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        meas: PathBuf,
        #[arg(long, default_value = "ml")]
        objective: Objective,
        /// Theta search interval `lo:hi` in degrees.
        #[arg(long, allow_hyphen_values = true)]
        fov_deg: Option<FovSpec>,
        /// Snapshot count, overriding the measurement file.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        coarse_step_deg: Option<f64>,
        #[arg(long)]
        refine_tol: Option<f64>,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cramér–Rao bounds over an angle grid.
    Crb {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        k: usize,
        /// Grid step in degrees.
        #[arg(long)]
        grid_deg: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
    },
    /// Monte Carlo experiment from a config file.
    Sweep {
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (results do not depend on this).
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Parses `argv` (program name first), runs the command, returns the exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn write_out(stdout: &mut dyn std::io::Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

/// Direction flags in degrees: finite, and theta within [0, 180] for 3D models.
fn check_direction(dimension: Dimension, theta_deg: f64, phi_deg: f64) -> Result<()> {
    if !(theta_deg.is_finite() && phi_deg.is_finite()) {
        return Err(Error::InvalidInput("direction must be finite".into()));
    }
    if dimension == Dimension::ThreeD && !(0.0..=180.0).contains(&theta_deg) {
        return Err(Error::InvalidInput(format!(
            "theta {theta_deg} deg is outside [0, 180]"
        )));
    }
    Ok(())
}

fn run(command: Command, stdout: &mut dyn std::io::Write) -> Result<()> {
    match command {
        Command::Synth {
            ports,
            order,
            seed,
            out,
            dim,
            smoothness,
        } => {
            let model = synth_pattern(seed, ports, BasisSpec { dimension: dim, order }, smoothness)?;
            save_model(&model, &out)?;
            write_out(
                stdout,
                &format!(
                    "wrote {} ({} M={} order={})\n",
                    out.display(),
                    dim.label(),
                    model.ports(),
                    model.basis().order
                ),
            )
        }
        Command::Fit {
            samples,
            dim,
            order,
            out,
            truncation_tol,
            no_truncate,
        } => {
            let samples = load_pattern_samples(&samples)?;
            let options = FitOptions {
                truncation_tol: (!no_truncate).then_some(truncation_tol),
                normalize: true,
            };
            let (model, report) = fit_pattern(&samples, BasisSpec { dimension: dim, order }, &options)?;
            save_model(&model, &out)?;
            write_out(
                stdout,
                &format!(
                    "residual_rms={} condition={} order={} symmetry_defect={}\n",
                    fmt_sig(report.residual_rms),
                    fmt_sig(report.condition_number),
                    model.basis().order,
                    fmt_sig(report.symmetry_defect)
                ),
            )
        }
        Command::Eval {
            model,
            theta_deg,
            phi_deg,
        } => {
            let model = load_model(&model)?;
            check_direction(model.dimension(), theta_deg, phi_deg)?;
            let gains = eval_pattern(&model, theta_deg.to_radians(), phi_deg.to_radians());
            let mut text = String::from("port,gain\n");
            for (m, g) in gains.values.iter().enumerate() {
                writeln!(text, "{},{}", m + 1, fmt_sig(*g)).unwrap();
            }
            write_out(stdout, &text)
        }
        Command::Simulate {
            model,
            theta_deg,
            phi_deg,
            snr_db,
            k,
            seed,
            out,
            noise_var,
        } => {
            let model = load_model(&model)?;
            check_direction(model.dimension(), theta_deg, phi_deg)?;
            let params = SignalParams::from_snr_db(theta_deg.to_radians(), phi_deg.to_radians(), snr_db, noise_var)?;
            let meas = simulate_power(&model, &params, k, &mut stream_rng(seed, 0))?;
            fs::write(&out, measurement_to_string(&meas))?;
            Ok(())
        }
        Command::Estimate {
            model,
            meas,
            objective,
            fov_deg,
            k,
            coarse_step_deg,
            refine_tol,
            out,
        } => {
            let model = load_model(&model)?;
            let meas = load_measurement(&meas, k)?;
            let dim = model.dimension();
            let mut cfg = EstimatorConfig::default_for(dim)
                .with_objective(objective)
                .with_fov(fov_deg.unwrap_or(FovSpec::Full).to_fov(dim)?);
            if let Some(step) = coarse_step_deg {
                cfg.coarse_grid_step = step.to_radians();
            }
            if let Some(tol) = refine_tol {
                cfg.refine_tol = tol;
            }
            let est = estimate(&meas, &model, &cfg)?;
            let p = est.params_hat;
            let text = format!(
                "theta_deg,phi_deg,signal_power,noise_var,objective_value,converged,floor_active\n{},{},{},{},{},{},{}\n",
                fmt_sig(p.theta.to_degrees()),
                fmt_sig(p.phi.to_degrees()),
                fmt_sig(p.signal_power),
                fmt_sig(p.noise_var),
                fmt_sig(est.objective_value),
                est.converged,
                est.floor_active
            );
            match out {
                Some(path) => {
                    fs::write(path, text)?;
                    Ok(())
                }
                None => write_out(stdout, &text),
            }
        }
        Command::Crb {
            model,
            snr_db,
            k,
            grid_deg,
            out,
            noise_var,
        } => {
            let model_path = model;
            let model = load_model(&model_path)?;
            let dim = model.dimension();
            let angles: Vec<(f64, f64)> = match dim {
                Dimension::TwoD => GridSpec::new(-180.0, 180.0, grid_deg)?
                    .values()
                    .into_iter()
                    .map(|t| (t.to_radians(), 0.0))
                    .collect(),
                Dimension::ThreeD => {
                    let thetas = GridSpec::new(grid_deg / 2.0, 180.0, grid_deg)?.values();
                    let phis = GridSpec::new(0.0, 360.0, grid_deg)?.values();
                    thetas
                        .iter()
                        .flat_map(|t| phis.iter().map(move |p| (t.to_radians(), p.to_radians())))
                        .collect()
                }
            };
            if !(noise_var > 0.0) {
                return Err(Error::InvalidInput("noise variance must be positive".into()));
            }
            let ps = noise_var * 10f64.powf(snr_db / 10.0);
            let rows: Vec<CrbRow> = crb_sweep(&model, ps, noise_var, k, &angles)?
                .into_iter()
                .map(|p| CrbRow {
                    snr_db,
                    theta: p.theta,
                    phi: p.phi,
                    crb_sqrt_theta: p.crb_theta.sqrt(),
                    crb_sqrt_phi: p.crb_phi.map(f64::sqrt),
                    singular: p.singular,
                })
                .collect();
            let header = format!(
                "mma-doa {} crb model={} snr_db={snr_db} k={k} grid_deg={grid_deg} noise_var={noise_var}",
                env!("CARGO_PKG_VERSION"),
                model_path.display()
            );
            fs::write(&out, crb_csv(&header, dim, &rows))?;
            Ok(())
        }
        Command::Sweep {
            experiment,
            config,
            out,
            workers,
        } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = SweepConfig::parse_for(&text, &config, Some(experiment))?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let model = cfg.load_pattern(base)?;
            let result = run_sweep(&cfg, &model)?;
            let files = result.write(&out)?;
            let mut msg = String::new();
            for f in files {
                writeln!(msg, "wrote {}", f.display()).unwrap();
            }
            stdout.flush()?;
            write_out(stdout, &msg)
        }
    }
}
