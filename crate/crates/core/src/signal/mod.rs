//! Received-power statistics and measurement simulation.
//!
//! A port with gain `g` observes `K` snapshots `y_k = sqrt(g Ps) + n_k`, with
//! `n_k ~ CN(0, sigma^2)`. The time-averaged power `P = sum |y_k|^2 / K` has
//! `K P ~ sigma^2/2 * chi'^2(2K, 2 K g Ps / sigma^2)`.

mod bessel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use bessel::log_bessel_i_scaled;

use crate::error::{Error, Result};
use crate::pattern::PatternModel;

/// Below this noncentrality the central chi-square density is used.
pub const CENTRAL_LIMIT: f64 = 1e-300;

/// Unknowns of the measurement model. `phi` is 0 in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    pub theta: f64,
    pub phi: f64,
    pub signal_power: f64,
    pub noise_var: f64,
}

impl SignalParams {
    pub fn new(theta: f64, phi: f64, signal_power: f64, noise_var: f64) -> Result<Self> {
        let p = SignalParams {
            theta,
            phi,
            signal_power,
            noise_var,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters at the given SNR in dB relative to `noise_var`.
    pub fn from_snr_db(theta: f64, phi: f64, snr_db: f64, noise_var: f64) -> Result<Self> {
        Self::new(theta, phi, noise_var * 10f64.powf(snr_db / 10.0), noise_var)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.phi.is_finite()) {
            return Err(Error::NonFinite("angle".into()));
        }
        if !(self.signal_power >= 0.0 && self.signal_power.is_finite()) {
            return Err(Error::Domain(format!(
                "signal power {} must be finite and >= 0",
                self.signal_power
            )));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance {} must be finite and > 0",
                self.noise_var
            )));
        }
        Ok(())
    }
}

/// `10 log10(Ps / sigma^2)`; `-inf` when `Ps = 0`.
pub fn snr_db(params: &SignalParams) -> f64 {
    10.0 * (params.signal_power / params.noise_var).log10()
}

/// Time-averaged per-port power over `snapshots` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMeasurement {
    port_powers: Vec<f64>,
    snapshots: usize,
}

impl PowerMeasurement {
    pub fn new(port_powers: Vec<f64>, snapshots: usize) -> Result<Self> {
        if snapshots == 0 {
            return Err(Error::InvalidInput("snapshot count must be >= 1".into()));
        }
        if port_powers.is_empty() {
            return Err(Error::InvalidInput("measurement has no ports".into()));
        }
        for (m, p) in port_powers.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("power at port {}", m + 1)));
            }
            if *p < 0.0 {
                return Err(Error::Domain(format!("power {p} at port {} is negative", m + 1)));
            }
        }
        Ok(PowerMeasurement { port_powers, snapshots })
    }

    pub fn port_powers(&self) -> &[f64] {
        &self.port_powers
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn ports(&self) -> usize {
        self.port_powers.len()
    }

    /// Same measurement with every power multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.port_powers.iter().map(|p| p * factor).collect(), self.snapshots)
    }
}

/// `E[P] = g Ps + sigma^2`.
pub fn power_mean(gain: f64, signal_power: f64, noise_var: f64) -> f64 {
    gain * signal_power + noise_var
}

/// `Var[P] = (sigma^4 + 2 g Ps sigma^2) / K`.
pub fn power_var(gain: f64, signal_power: f64, noise_var: f64, snapshots: usize) -> f64 {
    (noise_var * noise_var + 2.0 * gain * signal_power * noise_var) / snapshots as f64
}

/// Log of the exact density of the time-averaged power `P` at `x`.
pub fn power_log_pdf(x: f64, gain: f64, signal_power: f64, noise_var: f64, snapshots: usize) -> f64 {
    if !(x >= 0.0) || snapshots == 0 {
        return f64::NEG_INFINITY;
    }
    let k = snapshots as f64;
    let lambda = k * gain * signal_power;
    let y = k * x;
    let log_k = k.ln();
    let log_s2 = noise_var.ln();
    if lambda < CENTRAL_LIMIT {
        // K P ~ Gamma(K, sigma^2)
        if y == 0.0 {
            return if snapshots == 1 {
                log_k - log_s2
            } else {
                f64::NEG_INFINITY
            };
        }
        return log_k + (k - 1.0) * y.ln() - y / noise_var - libm::lgamma(k) - k * log_s2;
    }
    if y == 0.0 {
        return if snapshots == 1 {
            log_k - log_s2 - lambda / noise_var
        } else {
            f64::NEG_INFINITY
        };
    }
    let z = 2.0 * (lambda * y).sqrt() / noise_var;
    let gap = y.sqrt() - lambda.sqrt();
    log_k - log_s2 + 0.5 * (k - 1.0) * (y.ln() - lambda.ln()) - gap * gap / noise_var + log_bessel_i_scaled(k - 1.0, z)
}

/// Exact density of `P`; 0 for `x < 0` and in tails beyond `f64` range.
pub fn power_pdf(x: f64, gain: f64, signal_power: f64, noise_var: f64, snapshots: usize) -> f64 {
    power_log_pdf(x, gain, signal_power, noise_var, snapshots).exp()
}

/// ChaCha8 generator for `(seed, stream)`.
///
/// Independent work items use distinct stream ids under one root seed, so
/// results do not depend on how items are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one power per port from the given gains.
pub fn simulate_power_from_gains<R: Rng + ?Sized>(
    gains: &[f64],
    signal_power: f64,
    noise_var: f64,
    snapshots: usize,
    rng: &mut R,
) -> Result<PowerMeasurement> {
    if snapshots == 0 {
        return Err(Error::InvalidInput("snapshot count must be >= 1".into()));
    }
    let sd = (0.5 * noise_var).sqrt();
    let powers = gains
        .iter()
        .map(|&g| {
            let amp = (g.max(0.0) * signal_power).sqrt();
            let mut acc = 0.0;
            for _ in 0..snapshots {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let (re, im) = (amp + sd * re, sd * im);
                acc += re * re + im * im;
            }
            acc / snapshots as f64
        })
        .collect();
    PowerMeasurement::new(powers, snapshots)
}

/// Simulates one measurement of a source at `params` through `model`.
pub fn simulate_power<R: Rng + ?Sized>(
    model: &PatternModel,
    params: &SignalParams,
    snapshots: usize,
    rng: &mut R,
) -> Result<PowerMeasurement> {
    params.validate()?;
    let mut gains = vec![0.0; model.ports()];
    model.gains_into(params.theta, params.phi, &mut gains);
    simulate_power_from_gains(&gains, params.signal_power, params.noise_var, snapshots, rng)
}
