//! Maximum-likelihood and simplified direction estimators.
//!
//! Both minimise a sum over ports of a Gaussian-approximation criterion in
//! `(theta[, phi], Ps, sigma^2)`:
//! - ML: `sum ln(2 pi v_m) + r_m^2 / v_m`, i.e. `-2` times the log-likelihood;
//! - simplified: `sum r_m^2 / (Ps g_m + 2 sigma^2)`,
//!
//! with residual `r_m = P_m - Ps g_m - sigma^2` and `v_m` the power variance.
//!
//! The search scans a coarse angle grid with method-of-moments nuisance
//! values, then refines the best grid minima jointly with a box-constrained
//! simplex.

mod simplex;

use std::cell::Cell;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::basis::{Dimension, POLE_EPSILON};
use crate::error::{Error, Result};
use crate::pattern::PatternModel;
use crate::signal::{power_var, PowerMeasurement, SignalParams};

/// Relative floor on the noise variance, in units of the largest measured power.
pub const NOISE_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Ml,
    Simplified,
}

impl Objective {
    pub fn label(self) -> &'static str {
        match self {
            Objective::Ml => "ml",
            Objective::Simplified => "simplified",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(Objective::Ml),
            "simplified" => Ok(Objective::Simplified),
            other => Err(Error::InvalidInput(format!(
                "unknown objective {other:?} (expected ml or simplified)"
            ))),
        }
    }
}

/// Closed angular interval `[lo, hi]` in radians. A width of `2 pi` is a full circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonFinite("angle interval bound".into()));
        }
        if lo > hi {
            return Err(Error::InvalidInput(format!("empty angle interval [{lo}, {hi}]")));
        }
        Ok(AngleInterval { lo, hi })
    }

    pub fn from_degrees(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo.to_radians(), hi.to_radians())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full_circle(&self) -> bool {
        self.width() >= TAU - 1e-9
    }

    pub fn contains(&self, x: f64) -> bool {
        self.is_full_circle() || (x >= self.lo && x <= self.hi)
    }
}

/// Search region for the angles. In 2D only `theta` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView {
    pub theta: AngleInterval,
    pub phi: AngleInterval,
}

impl FieldOfView {
    /// The whole manifold: `[-pi, pi]` in 2D, `[0, pi] x [0, 2 pi]` in 3D.
    pub fn full(dimension: Dimension) -> Self {
        match dimension {
            Dimension::TwoD => FieldOfView {
                theta: AngleInterval { lo: -PI, hi: PI },
                phi: AngleInterval { lo: 0.0, hi: 0.0 },
            },
            Dimension::ThreeD => FieldOfView {
                theta: AngleInterval { lo: 0.0, hi: PI },
                phi: AngleInterval { lo: 0.0, hi: TAU },
            },
        }
    }

    /// Full manifold except `theta`, which is restricted to `[lo, hi]`.
    pub fn theta_range(dimension: Dimension, lo: f64, hi: f64) -> Result<Self> {
        let mut fov = Self::full(dimension);
        fov.theta = AngleInterval::new(lo, hi)?;
        fov.validate(dimension)?;
        Ok(fov)
    }

    pub fn validate(&self, dimension: Dimension) -> Result<()> {
        let eps = 1e-12;
        match dimension {
            Dimension::TwoD => {
                if self.theta.lo < -PI - eps || self.theta.hi > PI + eps || self.theta.lo > self.theta.hi {
                    return Err(Error::InvalidInput(
                        "2D field of view must lie within [-180, 180] degrees".into(),
                    ));
                }
            }
            Dimension::ThreeD => {
                if self.theta.lo < -eps || self.theta.hi > PI + eps || self.theta.lo > self.theta.hi {
                    return Err(Error::InvalidInput(
                        "3D theta field of view must lie within [0, 180] degrees".into(),
                    ));
                }
                if self.theta.hi.min(PI - POLE_EPSILON) < self.theta.lo.max(POLE_EPSILON) {
                    return Err(Error::InvalidInput(
                        "3D theta field of view is empty away from the poles".into(),
                    ));
                }
                if self.phi.lo > self.phi.hi || self.phi.width() > TAU + eps {
                    return Err(Error::InvalidInput(
                        "phi field of view must span at most 360 degrees".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, dimension: Dimension, theta: f64, phi: f64) -> bool {
        match dimension {
            Dimension::TwoD => self.theta.contains(theta),
            Dimension::ThreeD => self.theta.contains(theta) && self.phi.contains(phi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub objective: Objective,
    pub fov: FieldOfView,
    /// Coarse angle grid step, radians.
    pub coarse_grid_step: f64,
    /// Refinement stops once the objective spread is below `refine_tol` (relative to
    /// `max(1, |objective|)`) and the simplex spans less than `refine_tol` radians in
    /// each angle and `refine_tol * max(P)` in each power.
    pub refine_tol: f64,
    pub max_refine_iters: usize,
    /// Number of distinct coarse-grid local minima that are refined.
    pub refine_candidates: usize,
}

impl EstimatorConfig {
    /// 1 degree grid in 2D, 4 degrees in 3D, full field of view, ML objective.
    pub fn default_for(dimension: Dimension) -> Self {
        EstimatorConfig {
            objective: Objective::Ml,
            fov: FieldOfView::full(dimension),
            coarse_grid_step: match dimension {
                Dimension::TwoD => 1f64.to_radians(),
                Dimension::ThreeD => 4f64.to_radians(),
            },
            refine_tol: 1e-8,
            max_refine_iters: 2000,
            refine_candidates: 3,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_fov(mut self, fov: FieldOfView) -> Self {
        self.fov = fov;
        self
    }

    pub fn validate(&self, dimension: Dimension) -> Result<()> {
        if !(self.coarse_grid_step > 0.0 && self.coarse_grid_step.is_finite()) {
            return Err(Error::InvalidInput("coarse grid step must be positive".into()));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol.is_finite()) {
            return Err(Error::InvalidInput("refine tolerance must be positive".into()));
        }
        if self.refine_candidates == 0 {
            return Err(Error::InvalidInput(
                "at least one refinement candidate is required".into(),
            ));
        }
        self.fov.validate(dimension)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub params_hat: SignalParams,
    pub objective_value: f64,
    pub converged: bool,
    /// The gain floor was active at some evaluated direction.
    pub floor_active: bool,
}

/// Objective value with nuisance parameters optimised at one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
    pub signal_power: f64,
    pub noise_var: f64,
}

fn criterion(objective: Objective, powers: &[f64], gains: &[f64], ps: f64, s2: f64, k: usize) -> f64 {
    let mut acc = 0.0;
    match objective {
        Objective::Ml => {
            for (&p, &g) in powers.iter().zip(gains) {
                let v = power_var(g, ps, s2, k);
                let r = p - g * ps - s2;
                acc += (TAU * v).ln() + r * r / v;
            }
        }
        Objective::Simplified => {
            for (&p, &g) in powers.iter().zip(gains) {
                let r = p - g * ps - s2;
                acc += r * r / (g * ps + 2.0 * s2);
            }
        }
    }
    acc
}

/// Nonnegative least squares of `P` on `[g, 1]`, with the intercept floored.
fn moments_init(powers: &[f64], gains: &[f64], noise_floor: f64) -> (f64, f64) {
    let m = powers.len() as f64;
    let (mut sg, mut sgg, mut sp, mut sgp) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &g) in powers.iter().zip(gains) {
        sg += g;
        sgg += g * g;
        sp += p;
        sgp += g * p;
    }
    let mean = sp / m;
    let det = m * sgg - sg * sg;
    let (mut a, mut b) = if det > 1e-12 * m * sgg {
        ((m * sgp - sg * sp) / det, (sgg * sp - sg * sgp) / det)
    } else {
        (0.0, mean)
    };
    if a < 0.0 {
        a = 0.0;
        b = mean;
    } else if b < 0.0 {
        b = 0.0;
        a = if sgg > 0.0 { sgp / sgg } else { 0.0 };
    }
    (a.max(0.0), b.max(noise_floor))
}

/// Checks port count and identifiability.
fn check_inputs(meas: &PowerMeasurement, model: &PatternModel) -> Result<()> {
    if meas.ports() != model.ports() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} ports, pattern has {}",
            meas.ports(),
            model.ports()
        )));
    }
    let unknowns = match model.dimension() {
        Dimension::TwoD => 3,
        Dimension::ThreeD => 4,
    };
    if meas.ports() < unknowns {
        return Err(Error::NotIdentifiable {
            ports: meas.ports(),
            unknowns,
        });
    }
    Ok(())
}

/// Evaluates the chosen criterion at `params` (floored gains).
pub fn objective_at(
    objective: Objective,
    meas: &PowerMeasurement,
    params: &SignalParams,
    model: &PatternModel,
) -> Result<f64> {
    if meas.ports() != model.ports() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} ports, pattern has {}",
            meas.ports(),
            model.ports()
        )));
    }
    params.validate()?;
    let mut gains = vec![0.0; model.ports()];
    model.gains_into(params.theta, params.phi, &mut gains);
    Ok(criterion(
        objective,
        meas.port_powers(),
        &gains,
        params.signal_power,
        params.noise_var,
        meas.snapshots(),
    ))
}

/// Gaussian-approximation log-likelihood of a measurement.
pub fn log_likelihood(meas: &PowerMeasurement, params: &SignalParams, model: &PatternModel) -> Result<f64> {
    Ok(-0.5 * objective_at(Objective::Ml, meas, params, model)?)
}

/// Points along one axis of the coarse grid.
fn axis(lo: f64, hi: f64, step: f64, periodic: bool) -> Vec<f64> {
    if periodic {
        let n = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
        return (0..n).map(|i| lo + i as f64 * step).collect();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - pts[n] > 1e-9 * step {
        pts.push(hi);
    }
    pts
}

/// Precomputed coarse grid and floored gain table for one pattern and configuration.
///
/// Reusing an `Estimator` across measurements avoids re-evaluating the pattern on the grid.
#[derive(Debug, Clone)]
pub struct Estimator<'a> {
    model: &'a PatternModel,
    config: EstimatorConfig,
    thetas: Vec<f64>,
    phis: Vec<f64>,
    theta_periodic: bool,
    phi_periodic: bool,
    theta_bounds: (f64, f64),
    phi_bounds: (f64, f64),
    gains: Vec<f64>,
    floor: Vec<bool>,
}

impl<'a> Estimator<'a> {
    pub fn new(model: &'a PatternModel, config: EstimatorConfig) -> Result<Self> {
        let dim = model.dimension();
        config.validate(dim)?;
        let fov = config.fov;
        let step = config.coarse_grid_step;
        let (thetas, phis, theta_periodic, phi_periodic, theta_bounds, phi_bounds);
        match dim {
            Dimension::TwoD => {
                theta_periodic = fov.theta.is_full_circle();
                thetas = axis(fov.theta.lo, fov.theta.hi, step, theta_periodic);
                theta_bounds = if theta_periodic {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (fov.theta.lo, fov.theta.hi)
                };
                phis = vec![0.0];
                phi_periodic = false;
                phi_bounds = (0.0, 0.0);
            }
            Dimension::ThreeD => {
                theta_periodic = false;
                let lo = fov.theta.lo.max(POLE_EPSILON);
                let hi = fov.theta.hi.min(PI - POLE_EPSILON);
                thetas = axis(lo, hi, step, false);
                theta_bounds = (lo, hi);
                phi_periodic = fov.phi.is_full_circle();
                phis = axis(fov.phi.lo, fov.phi.hi, step, phi_periodic);
                phi_bounds = if phi_periodic {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (fov.phi.lo, fov.phi.hi)
                };
            }
        }
        let ports = model.ports();
        let mut gains = vec![0.0; thetas.len() * phis.len() * ports];
        let mut floor = vec![false; thetas.len() * phis.len()];
        let mut idx = 0;
        for &t in &thetas {
            for &p in &phis {
                floor[idx] = model.gains_into(t, p, &mut gains[idx * ports..(idx + 1) * ports]);
                idx += 1;
            }
        }
        Ok(Estimator {
            model,
            config,
            thetas,
            phis,
            theta_periodic,
            phi_periodic,
            theta_bounds,
            phi_bounds,
            gains,
            floor,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn model(&self) -> &PatternModel {
        self.model
    }

    /// Coarse grid directions in scan order (theta outer, phi inner).
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.thetas
            .iter()
            .flat_map(|&t| self.phis.iter().map(move |&p| (t, p)))
            .collect()
    }

    fn is_3d(&self) -> bool {
        self.model.dimension() == Dimension::ThreeD
    }

    /// Indices of grid neighbours of `idx`.
    fn neighbours(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let (nt, np) = (self.thetas.len() as i64, self.phis.len() as i64);
        let (it, ip) = ((idx as i64) / np, (idx as i64) % np);
        for dt in -1..=1i64 {
            for dp in -1..=1i64 {
                if dt == 0 && dp == 0 {
                    continue;
                }
                let mut t = it + dt;
                let mut p = ip + dp;
                if self.theta_periodic {
                    t = t.rem_euclid(nt);
                } else if t < 0 || t >= nt {
                    continue;
                }
                if self.phi_periodic {
                    p = p.rem_euclid(np);
                } else if p < 0 || p >= np {
                    continue;
                }
                let j = (t * np + p) as usize;
                if j != idx && !out.contains(&j) {
                    out.push(j);
                }
            }
        }
    }

    /// Coarse scan: objective at each grid point with method-of-moments nuisances.
    fn scan(&self, meas: &PowerMeasurement, noise_floor: f64) -> Vec<(f64, f64, f64)> {
        let ports = self.model.ports();
        let powers = meas.port_powers();
        let k = meas.snapshots();
        self.gains
            .chunks_exact(ports)
            .map(|g| {
                let (ps, s2) = moments_init(powers, g, noise_floor);
                (criterion(self.config.objective, powers, g, ps, s2, k), ps, s2)
            })
            .collect()
    }

    /// Minimises the configured objective for one measurement.
    pub fn estimate(&self, meas: &PowerMeasurement) -> Result<Estimate> {
        check_inputs(meas, self.model)?;
        let powers = meas.port_powers();
        let k = meas.snapshots();
        let max_p = powers.iter().cloned().fold(0.0, f64::max);
        let noise_floor = (NOISE_FLOOR_REL * max_p).max(f64::MIN_POSITIVE);
        let scan = self.scan(meas, noise_floor);

        // grid local minima, best first; ties resolve to the earlier (smaller) angle
        let mut nb = Vec::with_capacity(8);
        let mut minima: Vec<usize> = (0..scan.len())
            .filter(|&i| {
                self.neighbours(i, &mut nb);
                nb.iter().all(|&j| scan[i].0 <= scan[j].0)
            })
            .collect();
        if minima.is_empty() {
            minima = (0..scan.len()).collect();
        }
        minima.sort_by(|&a, &b| scan[a].0.total_cmp(&scan[b].0).then(a.cmp(&b)));
        minima.truncate(self.config.refine_candidates);

        let three_d = self.is_3d();
        let np = self.phis.len();
        let angle_dims = if three_d { 2 } else { 1 };
        let tol = self.config.refine_tol;
        let power_scale = max_p.max(noise_floor);
        let mut x_tol = vec![tol; angle_dims];
        x_tol.extend([tol * power_scale, tol * power_scale]);
        let opts = simplex::Options {
            f_tol: tol,
            x_tol: &x_tol,
            max_iters: self.config.max_refine_iters,
            restarts: 1,
        };
        let mut lo = vec![self.theta_bounds.0];
        let mut hi = vec![self.theta_bounds.1];
        if three_d {
            lo.push(self.phi_bounds.0);
            hi.push(self.phi_bounds.1);
        }
        lo.extend([0.0, noise_floor]);
        hi.extend([f64::INFINITY, f64::INFINITY]);

        let floor_hit = Cell::new(false);
        let mut buf = vec![0.0; self.model.ports()];
        let mut best: Option<(Vec<f64>, f64, bool)> = None;
        for &idx in &minima {
            let (f0, ps0, s20) = scan[idx];
            if self.floor[idx] {
                floor_hit.set(true);
            }
            let (t0, p0) = (self.thetas[idx / np], self.phis[idx % np]);
            let mut x0 = vec![t0];
            let mut steps = vec![0.5 * self.config.coarse_grid_step];
            if three_d {
                x0.push(p0);
                steps.push(0.5 * self.config.coarse_grid_step);
            }
            x0.extend([ps0, s20]);
            steps.extend([0.2 * ps0 + 0.05 * max_p, (0.2 * s20).max(noise_floor)]);
            let out = simplex::minimize(
                |x| {
                    let (t, p) = if three_d { (x[0], x[1]) } else { (x[0], 0.0) };
                    if self.model.gains_into(t, p, &mut buf) {
                        floor_hit.set(true);
                    }
                    criterion(self.config.objective, powers, &buf, x[angle_dims], x[angle_dims + 1], k)
                },
                &x0,
                &steps,
                &lo,
                &hi,
                &opts,
            );
            debug_assert!(out.f <= f0);
            if best.as_ref().map_or(true, |b| out.f < b.1) {
                best = Some((out.x, out.f, out.converged));
            }
        }
        let (x, f, converged) = best.expect("grid is non-empty");
        let (mut theta, mut phi) = if three_d { (x[0], x[1]) } else { (x[0], 0.0) };
        if !three_d && self.theta_periodic {
            theta = wrap_pi(theta);
        }
        if three_d && self.phi_periodic {
            phi = phi.rem_euclid(TAU);
        }
        theta = if self.theta_periodic {
            theta
        } else {
            theta.clamp(self.theta_bounds.0, self.theta_bounds.1)
        };
        Ok(Estimate {
            params_hat: SignalParams {
                theta,
                phi,
                signal_power: x[angle_dims],
                noise_var: x[angle_dims + 1],
            },
            objective_value: f,
            converged,
            floor_active: floor_hit.get(),
        })
    }

    /// Objective with `(Ps, sigma^2)` optimised at each given direction.
    pub fn profile(&self, meas: &PowerMeasurement, angles: &[(f64, f64)]) -> Result<Vec<ProfilePoint>> {
        check_inputs(meas, self.model)?;
        let powers = meas.port_powers();
        let k = meas.snapshots();
        let max_p = powers.iter().cloned().fold(0.0, f64::max);
        let noise_floor = (NOISE_FLOOR_REL * max_p).max(f64::MIN_POSITIVE);
        let tol = self.config.refine_tol;
        let scale = max_p.max(noise_floor);
        let x_tol = [tol * scale, tol * scale];
        let opts = simplex::Options {
            f_tol: tol,
            x_tol: &x_tol,
            max_iters: self.config.max_refine_iters,
            restarts: 1,
        };
        let mut gains = vec![0.0; self.model.ports()];
        angles
            .iter()
            .map(|&(theta, phi)| {
                if !(theta.is_finite() && phi.is_finite()) {
                    return Err(Error::NonFinite("profile angle".into()));
                }
                self.model.gains_into(theta, phi, &mut gains);
                let (ps0, s20) = moments_init(powers, &gains, noise_floor);
                let out = simplex::minimize(
                    |x| criterion(self.config.objective, powers, &gains, x[0], x[1], k),
                    &[ps0, s20],
                    &[0.2 * ps0 + 0.05 * max_p, (0.2 * s20).max(noise_floor)],
                    &[0.0, noise_floor],
                    &[f64::INFINITY, f64::INFINITY],
                    &opts,
                );
                Ok(ProfilePoint {
                    theta,
                    phi,
                    value: out.f,
                    signal_power: out.x[0],
                    noise_var: out.x[1],
                })
            })
            .collect()
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Minimises the configured objective.
pub fn estimate(meas: &PowerMeasurement, model: &PatternModel, config: &EstimatorConfig) -> Result<Estimate> {
    Estimator::new(model, *config)?.estimate(meas)
}

/// Maximum-likelihood estimate (ML objective regardless of `config.objective`).
pub fn ml_estimate(meas: &PowerMeasurement, model: &PatternModel, config: &EstimatorConfig) -> Result<Estimate> {
    estimate(meas, model, &config.with_objective(Objective::Ml))
}

/// Simplified-objective estimate (regardless of `config.objective`).
pub fn simplified_estimate(
    meas: &PowerMeasurement,
    model: &PatternModel,
    config: &EstimatorConfig,
) -> Result<Estimate> {
    estimate(meas, model, &config.with_objective(Objective::Simplified))
}

/// Profiled objective over `angles` using `config.objective`.
pub fn profile_objective(
    meas: &PowerMeasurement,
    model: &PatternModel,
    config: &EstimatorConfig,
    angles: &[(f64, f64)],
) -> Result<Vec<ProfilePoint>> {
    Estimator::new(model, *config)?.profile(meas, angles)
}

/// Local minima of a 1D profile within `margin` of its global minimum.
///
/// Plateaus count once. With `periodic`, the ends are neighbours.
pub fn count_local_minima(values: &[f64], periodic: bool, margin: f64) -> usize {
    let n = values.len();
    if n == 0 {
        return 0;
    }
    let global = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let at = |i: i64| -> Option<f64> {
        if periodic {
            Some(values[i.rem_euclid(n as i64) as usize])
        } else if i < 0 || i >= n as i64 {
            None
        } else {
            Some(values[i as usize])
        }
    };
    (0..n as i64)
        .filter(|&i| {
            let v = values[i as usize];
            let left_ok = at(i - 1).map_or(true, |l| v < l);
            let right_ok = at(i + 1).map_or(true, |r| v <= r);
            // a plateau counts at its left edge only
            left_ok && right_ok && v <= global + margin
        })
        .count()
        .max(usize::from(n > 0 && values.iter().all(|&v| v == global)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{asymmetric_pattern_2d, mirror_symmetric_pattern_2d, model_from_amplitudes};

    fn noiseless(model: &PatternModel, theta: f64, ps: f64, s2: f64, k: usize) -> PowerMeasurement {
        let g = model.raw_gains(theta, 0.0);
        PowerMeasurement::new(g.iter().map(|g| g * ps + s2).collect(), k).unwrap()
    }

    #[test]
    fn wrap() {
        assert_eq!(wrap_pi(PI), -PI);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_pi(0.25), 0.25);
    }

    #[test]
    fn grid_axes() {
        let a = axis(-PI, PI, 1f64.to_radians(), true);
        assert_eq!(a.len(), 360);
        let b = axis(0.0, 1.0, 0.3, false);
        assert_eq!(b.len(), 5);
        assert_eq!(*b.last().unwrap(), 1.0);
        assert_eq!(axis(0.5, 0.5, 0.1, false), vec![0.5]);
    }

    #[test]
    fn moments_init_recovers_exact_line() {
        let g = [0.1, 0.5, 0.9, 0.3];
        let p: Vec<f64> = g.iter().map(|g| 3.0 * g + 0.2).collect();
        let (a, b) = moments_init(&p, &g, 1e-12);
        assert!((a - 3.0).abs() < 1e-12 && (b - 0.2).abs() < 1e-12);
        // negative slope clamps to a noise-only fit
        let p: Vec<f64> = g.iter().map(|g| 1.0 - g).collect();
        let (a, b) = moments_init(&p, &g, 1e-12);
        assert_eq!(a, 0.0);
        assert!((b - p.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn simplified_recovers_noiseless_truth() {
        let model = asymmetric_pattern_2d();
        let cfg = EstimatorConfig::default_for(Dimension::TwoD);
        for theta in [-2.7, -0.4, 0.3, 1.9] {
            let meas = noiseless(&model, theta, 100.0, 1.0, 100);
            let est = simplified_estimate(&meas, &model, &cfg).unwrap();
            assert!(est.converged);
            assert!(
                (wrap_pi(est.params_hat.theta - theta)).abs() < 1e-6,
                "{theta}: {:?}",
                est
            );
            assert!((est.params_hat.signal_power - 100.0).abs() < 1e-4);
            assert!((est.params_hat.noise_var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn identifiability_gate() {
        let cfg = EstimatorConfig::default_for(Dimension::TwoD);
        let two = model_from_amplitudes(Dimension::TwoD, 1, 2, |m, t, _| 1.0 + 0.5 * (t - m as f64).cos()).unwrap();
        let meas = PowerMeasurement::new(vec![1.0, 2.0], 10).unwrap();
        assert!(matches!(
            ml_estimate(&meas, &two, &cfg),
            Err(Error::NotIdentifiable { ports: 2, unknowns: 3 })
        ));
        let four = asymmetric_pattern_2d();
        assert!(matches!(
            ml_estimate(&meas, &four, &cfg),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn fov_bounds_the_estimate() {
        let model = mirror_symmetric_pattern_2d();
        let meas = noiseless(&model, -0.6, 50.0, 1.0, 100);
        let fov = FieldOfView::theta_range(Dimension::TwoD, 0.0, PI / 2.0).unwrap();
        let cfg = EstimatorConfig::default_for(Dimension::TwoD).with_fov(fov);
        let est = ml_estimate(&meas, &model, &cfg).unwrap();
        assert!(est.params_hat.theta >= 0.0 && est.params_hat.theta <= PI / 2.0);
        // mirror image of the truth
        assert!((est.params_hat.theta - 0.6).abs() < 1e-2);
    }

    #[test]
    fn minima_counting() {
        assert_eq!(count_local_minima(&[3.0, 1.0, 2.0, 0.5, 4.0], false, 1.0), 2);
        assert_eq!(count_local_minima(&[3.0, 1.0, 2.0, 0.5, 4.0], false, 0.1), 1);
        assert_eq!(count_local_minima(&[0.0, 1.0, 2.0, 1.0], true, 10.0), 1);
        assert_eq!(count_local_minima(&[1.0, 0.0, 0.0, 1.0], false, 1.0), 1);
        assert_eq!(count_local_minima(&[2.0, 2.0], false, 1.0), 1);
    }
}
