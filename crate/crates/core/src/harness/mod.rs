//! Monte Carlo experiments and the command-line front end.
//!
//! Every trial draws its noise from `stream_rng(seed, (point << 24) | trial)`,
//! where `point` indexes the truth grid. The same noise therefore feeds every
//! SNR, objective and field of view (common random numbers), and results do not
//! depend on the number of workers.

pub mod cli;
mod config;
mod measurement;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{Experiment, FovSpec, GridSpec, SweepConfig};
pub use measurement::{load_measurement, measurement_to_string, save_measurement};

use crate::basis::Dimension;
use crate::crb::{crb_sweep, fisher_information};
use crate::error::{Error, Result};
use crate::estimator::{wrap_pi, Estimator, Objective};
use crate::pattern::PatternModel;
use crate::signal::{simulate_power_from_gains, stream_rng, SignalParams};

/// Trial errors beyond this many local `sqrt(CRB)` count as ambiguous.
pub const AMBIGUITY_FACTOR: f64 = 3.0;

/// Statistics of one (SNR, objective, field of view, direction) cell. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub snr_db: f64,
    pub objective: Objective,
    pub fov: FovSpec,
    pub theta: f64,
    pub phi: f64,
    /// Wrapped in 2D, plain difference in 3D.
    pub rmse_theta: f64,
    /// 3D only, wrapped.
    pub rmse_phi: Option<f64>,
    /// 3D only, great-circle angle between true and estimated directions.
    pub rmse_great_circle: Option<f64>,
    pub crb_sqrt_theta: f64,
    pub crb_sqrt_phi: Option<f64>,
    /// Mean floored gain across ports at the true direction.
    pub mean_gain: f64,
    pub trials: usize,
    pub ambiguity_rate: f64,
    pub floor_rate: f64,
}

/// Manifold means for one (SNR, objective, field of view).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStats {
    pub snr_db: f64,
    pub objective: Objective,
    pub fov: FovSpec,
    pub points: usize,
    pub trials_per_point: usize,
    pub rmse_theta: f64,
    pub crb_sqrt_theta: f64,
    pub rmse_phi: Option<f64>,
    pub crb_sqrt_phi: Option<f64>,
    pub ambiguity_rate: f64,
    pub floor_rate: f64,
}

impl MeanStats {
    /// Mean RMSE over mean `sqrt(CRB)` in theta.
    pub fn efficiency_ratio(&self) -> f64 {
        self.rmse_theta / self.crb_sqrt_theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbRow {
    pub snr_db: f64,
    pub theta: f64,
    pub phi: f64,
    pub crb_sqrt_theta: f64,
    pub crb_sqrt_phi: Option<f64>,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: Experiment,
    pub dimension: Dimension,
    /// Config echo written as the comment header of every CSV.
    pub header: String,
    pub points: Vec<PointStats>,
    pub means: Vec<MeanStats>,
    pub crb: Vec<CrbRow>,
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn header_line(config: &SweepConfig, dimension: Dimension) -> String {
    format!("mma-doa {} {}", env!("CARGO_PKG_VERSION"), config.echo(dimension))
}

fn check_dimension(model: &PatternModel, want: Dimension, experiment: Experiment) -> Result<()> {
    if model.dimension() != want {
        return Err(Error::DimensionMismatch(format!(
            "experiment {experiment} needs a {} pattern, got {}",
            want.label(),
            model.dimension().label()
        )));
    }
    Ok(())
}

fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn great_circle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let u = unit_vector(a.0, a.1);
    let v = unit_vector(b.0, b.1);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    sin.atan2(cos)
}

#[derive(Default, Clone, Copy)]
struct Accum {
    sq_theta: f64,
    sq_phi: f64,
    sq_gc: f64,
    ambiguous: usize,
    floored: usize,
}

/// Runs every (SNR, objective, field of view) combination over the truth grid.
fn monte_carlo(config: &SweepConfig, model: &PatternModel) -> Result<(Vec<PointStats>, Vec<MeanStats>)> {
    config.validate()?;
    let dim = model.dimension();
    let three_d = dim == Dimension::ThreeD;
    let truths = config.truth_grid(dim);
    if truths.len() as u64 >= 1 << 40 {
        return Err(Error::InvalidInput("truth grid is too large".into()));
    }
    let mut combos = Vec::new();
    for &objective in &config.objectives {
        for &fov in &config.fovs {
            let est = Estimator::new(model, config.estimator_config(dim, objective, fov)?)?;
            combos.push((objective, fov, est));
        }
    }
    let ports = model.ports();
    let k = config.snapshots;
    let s2 = config.noise_var;

    let mut points = Vec::new();
    let mut means = Vec::new();
    for &snr in &config.snr_db {
        let ps = s2 * 10f64.powf(snr / 10.0);
        let per_point: Vec<Vec<PointStats>> = with_pool(config.workers, || {
            truths
                .par_iter()
                .enumerate()
                .map(|(pi, &(theta, phi))| {
                    let params = SignalParams::new(theta, phi, ps, s2)?;
                    let fi = fisher_information(model, &params, k)?;
                    let crb_t = fi.crb_theta.sqrt();
                    let crb_p = fi.crb_phi.map(f64::sqrt);
                    let mut gains = vec![0.0; ports];
                    model.gains_into(theta, phi, &mut gains);
                    let mean_gain = gains.iter().sum::<f64>() / ports as f64;
                    let mut acc = vec![Accum::default(); combos.len()];
                    for t in 0..config.trials {
                        let mut rng = stream_rng(config.seed, ((pi as u64) << 24) | t as u64);
                        let meas = simulate_power_from_gains(&gains, ps, s2, k, &mut rng)?;
                        for ((_, _, est), a) in combos.iter().zip(acc.iter_mut()) {
                            let e = est.estimate(&meas)?;
                            let (th, ph) = (e.params_hat.theta, e.params_hat.phi);
                            let (et, ep) = if three_d {
                                (th - theta, wrap_pi(ph - phi))
                            } else {
                                (wrap_pi(th - theta), 0.0)
                            };
                            a.sq_theta += et * et;
                            a.sq_phi += ep * ep;
                            if three_d {
                                let gc = great_circle((theta, phi), (th, ph));
                                a.sq_gc += gc * gc;
                            }
                            let amb = et.abs() > AMBIGUITY_FACTOR * crb_t
                                || crb_p.is_some_and(|c| ep.abs() > AMBIGUITY_FACTOR * c);
                            a.ambiguous += usize::from(amb);
                            a.floored += usize::from(e.floor_active);
                        }
                    }
                    let n = config.trials as f64;
                    Ok(combos
                        .iter()
                        .zip(&acc)
                        .map(|((objective, fov, _), a)| PointStats {
                            snr_db: snr,
                            objective: *objective,
                            fov: *fov,
                            theta,
                            phi,
                            rmse_theta: (a.sq_theta / n).sqrt(),
                            rmse_phi: three_d.then(|| (a.sq_phi / n).sqrt()),
                            rmse_great_circle: three_d.then(|| (a.sq_gc / n).sqrt()),
                            crb_sqrt_theta: crb_t,
                            crb_sqrt_phi: crb_p,
                            mean_gain,
                            trials: config.trials,
                            ambiguity_rate: a.ambiguous as f64 / n,
                            floor_rate: a.floored as f64 / n,
                        })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for (ci, (objective, fov, _)) in combos.iter().enumerate() {
            let rows: Vec<PointStats> = per_point.iter().map(|r| r[ci]).collect();
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&PointStats) -> f64| rows.iter().map(f).sum::<f64>() / n;
            means.push(MeanStats {
                snr_db: snr,
                objective: *objective,
                fov: *fov,
                points: rows.len(),
                trials_per_point: config.trials,
                rmse_theta: mean(&|r| r.rmse_theta),
                crb_sqrt_theta: mean(&|r| r.crb_sqrt_theta),
                rmse_phi: three_d.then(|| mean(&|r| r.rmse_phi.unwrap_or(0.0))),
                crb_sqrt_phi: three_d.then(|| mean(&|r| r.crb_sqrt_phi.unwrap_or(0.0))),
                ambiguity_rate: mean(&|r| r.ambiguity_rate),
                floor_rate: mean(&|r| r.floor_rate),
            });
            points.extend(rows);
        }
    }
    Ok((points, means))
}

/// RMSE and `sqrt(CRB)` per true angle (2D).
pub fn run_angle_sweep_2d(config: &SweepConfig, model: &PatternModel) -> Result<SweepResult> {
    check_dimension(model, Dimension::TwoD, Experiment::AngleSweep2D)?;
    let (points, means) = monte_carlo(config, model)?;
    Ok(SweepResult {
        experiment: Experiment::AngleSweep2D,
        dimension: Dimension::TwoD,
        header: header_line(config, Dimension::TwoD),
        points,
        means,
        crb: Vec::new(),
    })
}

/// Manifold-mean RMSE and `sqrt(CRB)` per SNR, objective and field of view (2D).
pub fn run_snr_sweep_2d(config: &SweepConfig, model: &PatternModel) -> Result<SweepResult> {
    check_dimension(model, Dimension::TwoD, Experiment::SnrSweep2D)?;
    let (points, means) = monte_carlo(config, model)?;
    Ok(SweepResult {
        experiment: Experiment::SnrSweep2D,
        dimension: Dimension::TwoD,
        header: header_line(config, Dimension::TwoD),
        points,
        means,
        crb: Vec::new(),
    })
}

/// Per-cell bounds, RMSE and ambiguity rate over a (theta, phi) grid (3D).
pub fn run_map_3d(config: &SweepConfig, model: &PatternModel) -> Result<SweepResult> {
    check_dimension(model, Dimension::ThreeD, Experiment::Map3D)?;
    let (points, means) = monte_carlo(config, model)?;
    Ok(SweepResult {
        experiment: Experiment::Map3D,
        dimension: Dimension::ThreeD,
        header: header_line(config, Dimension::ThreeD),
        points,
        means,
        crb: Vec::new(),
    })
}

/// Bounds only, over the truth grid, for each configured SNR.
pub fn run_crb_grid(config: &SweepConfig, model: &PatternModel) -> Result<SweepResult> {
    config.validate()?;
    let dim = model.dimension();
    let angles = config.truth_grid(dim);
    let mut crb = Vec::new();
    for &snr in &config.snr_db {
        let ps = config.noise_var * 10f64.powf(snr / 10.0);
        let pts = with_pool(config.workers, || {
            crb_sweep(model, ps, config.noise_var, config.snapshots, &angles)
        })??;
        crb.extend(pts.into_iter().map(|p| CrbRow {
            snr_db: snr,
            theta: p.theta,
            phi: p.phi,
            crb_sqrt_theta: p.crb_theta.sqrt(),
            crb_sqrt_phi: p.crb_phi.map(f64::sqrt),
            singular: p.singular,
        }));
    }
    Ok(SweepResult {
        experiment: Experiment::CrbOnly,
        dimension: dim,
        header: header_line(config, dim),
        points: Vec::new(),
        means: Vec::new(),
        crb,
    })
}

/// Dispatches on `config.experiment`.
pub fn run_sweep(config: &SweepConfig, model: &PatternModel) -> Result<SweepResult> {
    match config.experiment {
        Experiment::AngleSweep2D => run_angle_sweep_2d(config, model),
        Experiment::SnrSweep2D => run_snr_sweep_2d(config, model),
        Experiment::Map3D => run_map_3d(config, model),
        Experiment::CrbOnly => run_crb_grid(config, model),
    }
}

/// `x` rounded to 9 significant digits, without trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-4..1e9).contains(&a) {
        let decimals = (8 - a.log10().floor() as i32).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

fn deg(x: f64) -> String {
    fmt_sig(x * 180.0 / PI)
}

fn opt_deg(x: Option<f64>) -> String {
    x.map_or_else(String::new, deg)
}

impl SweepResult {
    /// One row per cell.
    pub fn points_csv(&self) -> String {
        let mut out = format!("# {}\n", self.header);
        let three_d = self.dimension == Dimension::ThreeD;
        if three_d {
            out.push_str(
                "snr_db,objective,fov_deg,theta_deg,phi_deg,rmse_theta_deg,rmse_phi_deg,rmse_great_circle_deg,\
                 crb_sqrt_theta_deg,crb_sqrt_phi_deg,mean_gain,trials,ambiguity_rate,floor_rate\n",
            );
        } else {
            out.push_str(
                "snr_db,objective,fov_deg,theta_deg,rmse_deg,crb_sqrt_deg,mean_gain,trials,ambiguity_rate,floor_rate\n",
            );
        }
        for p in &self.points {
            let mut cols = vec![
                fmt_sig(p.snr_db),
                p.objective.to_string(),
                p.fov.to_string(),
                deg(p.theta),
            ];
            if three_d {
                cols.extend([
                    deg(p.phi),
                    deg(p.rmse_theta),
                    opt_deg(p.rmse_phi),
                    opt_deg(p.rmse_great_circle),
                    deg(p.crb_sqrt_theta),
                    opt_deg(p.crb_sqrt_phi),
                ]);
            } else {
                cols.extend([deg(p.rmse_theta), deg(p.crb_sqrt_theta)]);
            }
            cols.extend([
                fmt_sig(p.mean_gain),
                p.trials.to_string(),
                fmt_sig(p.ambiguity_rate),
                fmt_sig(p.floor_rate),
            ]);
            writeln!(out, "{}", cols.join(",")).unwrap();
        }
        out
    }

    /// One row per (SNR, objective, field of view) with manifold means.
    pub fn summary_csv(&self) -> String {
        let mut out = format!("# {}\n", self.header);
        let three_d = self.dimension == Dimension::ThreeD;
        out.push_str("snr_db,objective,fov_deg,points,trials_per_point,rmse_deg,crb_sqrt_deg,rmse_over_crb");
        if three_d {
            out.push_str(",rmse_phi_deg,crb_sqrt_phi_deg");
        }
        out.push_str(",ambiguity_rate,floor_rate\n");
        for m in &self.means {
            let mut cols = vec![
                fmt_sig(m.snr_db),
                m.objective.to_string(),
                m.fov.to_string(),
                m.points.to_string(),
                m.trials_per_point.to_string(),
                deg(m.rmse_theta),
                deg(m.crb_sqrt_theta),
                fmt_sig(m.efficiency_ratio()),
            ];
            if three_d {
                cols.extend([opt_deg(m.rmse_phi), opt_deg(m.crb_sqrt_phi)]);
            }
            cols.extend([fmt_sig(m.ambiguity_rate), fmt_sig(m.floor_rate)]);
            writeln!(out, "{}", cols.join(",")).unwrap();
        }
        out
    }

    /// Bound-only rows.
    pub fn crb_csv(&self) -> String {
        crb_csv(&self.header, self.dimension, &self.crb)
    }

    /// Writes `<experiment>_points.csv` and `<experiment>_summary.csv` (or `crb.csv`) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let name = self.experiment.label();
        let files = if self.experiment == Experiment::CrbOnly {
            vec![(dir.join(format!("{name}.csv")), self.crb_csv())]
        } else {
            vec![
                (dir.join(format!("{name}_points.csv")), self.points_csv()),
                (dir.join(format!("{name}_summary.csv")), self.summary_csv()),
            ]
        };
        for (path, text) in &files {
            fs::write(path, text)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

pub(crate) fn crb_csv(header: &str, dimension: Dimension, rows: &[CrbRow]) -> String {
    let mut out = format!("# {header}\n");
    let three_d = dimension == Dimension::ThreeD;
    out.push_str(if three_d {
        "snr_db,theta_deg,phi_deg,crb_sqrt_theta_deg,crb_sqrt_phi_deg,singular\n"
    } else {
        "snr_db,theta_deg,crb_sqrt_deg,singular\n"
    });
    for r in rows {
        let mut cols = vec![fmt_sig(r.snr_db), deg(r.theta)];
        if three_d {
            cols.extend([deg(r.phi), deg(r.crb_sqrt_theta), opt_deg(r.crb_sqrt_phi)]);
        } else {
            cols.push(deg(r.crb_sqrt_theta));
        }
        cols.push(r.singular.to_string());
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(30.0), "30");
        assert_eq!(fmt_sig(0.123456789123), "0.123456789");
        assert_eq!(fmt_sig(-1.5), "-1.5");
        assert_eq!(fmt_sig(123456.789012), "123456.789");
        assert_eq!(fmt_sig(1.23456789012e-7), "1.23456789e-7");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(-1e-12 * 0.0), "0");
    }

    #[test]
    fn great_circle_distance() {
        let d = great_circle((PI / 2.0, 0.0), (PI / 2.0, PI / 2.0));
        assert!((d - PI / 2.0).abs() < 1e-15);
        // near the pole a large phi error is a small directional error
        let d = great_circle((0.01, 0.0), (0.01, PI));
        assert!((d - 0.02).abs() < 1e-12);
    }
}
