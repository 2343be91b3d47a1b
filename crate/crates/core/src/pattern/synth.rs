//! Synthetic power patterns.
//!
//! Every pattern here is the square of a band-limited amplitude, so it is
//! nonnegative and exactly representable at twice the amplitude order.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fit_sampling_matrix, normalize_pattern, PatternModel, PatternSample, PatternSamples};
use crate::basis::{spherical_eval, BasisSpec, Dimension};
use crate::error::{Error, Result};

/// Dense grid on which a pattern of the given power order is exactly recoverable.
fn dense_grid(dimension: Dimension, power_order: usize) -> Vec<(f64, f64)> {
    match dimension {
        Dimension::TwoD => {
            let n = 4 * power_order + 4;
            (0..n).map(|i| (-PI + 2.0 * PI * i as f64 / n as f64, 0.0)).collect()
        }
        Dimension::ThreeD => {
            let ntheta = 2 * power_order + 2;
            let nphi = 4 * power_order + 4;
            let mut grid = Vec::with_capacity(ntheta * nphi);
            for i in 0..ntheta {
                let theta = (i as f64 + 0.5) * PI / ntheta as f64;
                for j in 0..nphi {
                    grid.push((theta, 2.0 * PI * j as f64 / nphi as f64));
                }
            }
            grid
        }
    }
}

/// Fits `amplitude(port, theta, phi)^2` at twice `amplitude_order` and normalises.
///
/// `amplitude` must be band-limited to `amplitude_order` for the fit to be exact.
pub fn model_from_amplitudes<F>(
    dimension: Dimension,
    amplitude_order: usize,
    ports: usize,
    amplitude: F,
) -> Result<PatternModel>
where
    F: Fn(usize, f64, f64) -> f64,
{
    if ports == 0 {
        return Err(Error::InvalidInput("pattern needs at least one port".into()));
    }
    let power_order = 2 * amplitude_order;
    let entries = dense_grid(dimension, power_order)
        .into_iter()
        .map(|(theta, phi)| PatternSample {
            theta,
            phi,
            gains: (0..ports)
                .map(|m| {
                    let a = amplitude(m, theta, phi);
                    a * a
                })
                .collect(),
        })
        .collect();
    let samples = PatternSamples::new(ports, entries)?;
    let spec = BasisSpec {
        dimension,
        order: power_order,
    };
    let (model, _) = fit_sampling_matrix(&samples, spec)?;
    normalize_pattern(&model)
}

/// Random smooth pattern, reproducible from `seed`.
///
/// Each port's amplitude has per-degree energy decaying as `exp(-smoothness * l)`
/// up to `spec.order`; the returned power pattern has order `2 * spec.order`.
pub fn synth_pattern(seed: u64, ports: usize, spec: BasisSpec, smoothness: f64) -> Result<PatternModel> {
    if ports == 0 {
        return Err(Error::InvalidInput("pattern needs at least one port".into()));
    }
    if !smoothness.is_finite() {
        return Err(Error::InvalidInput(format!("smoothness {smoothness} is not finite")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = spec.order;
    let coeffs: Vec<Vec<f64>> = (0..ports)
        .map(|_| match spec.dimension {
            // [c0, a1, b1, a2, b2, ...] for c0 + sum a_n cos(n theta) + b_n sin(n theta)
            Dimension::TwoD => {
                let mut c = Vec::with_capacity(2 * order + 1);
                let g: f64 = StandardNormal.sample(&mut rng);
                c.push(g);
                for n in 1..=order {
                    let sd = (0.5 * (-smoothness * n as f64).exp()).sqrt();
                    for _ in 0..2 {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        c.push(sd * g);
                    }
                }
                c
            }
            Dimension::ThreeD => (0..spec.len())
                .map(|idx| {
                    let l = spec.degree_of(idx);
                    let sd = ((-smoothness * l as f64).exp() / (2 * l + 1) as f64).sqrt();
                    let g: f64 = StandardNormal.sample(&mut rng);
                    sd * g
                })
                .collect(),
        })
        .collect();
    model_from_amplitudes(spec.dimension, order, ports, |m, theta, phi| {
        let c = &coeffs[m];
        match spec.dimension {
            Dimension::TwoD => {
                let mut a = c[0];
                for n in 1..=order {
                    let (s, co) = (n as f64 * theta).sin_cos();
                    a += c[2 * n - 1] * co + c[2 * n] * s;
                }
                a
            }
            Dimension::ThreeD => {
                let ev = spherical_eval(order, theta, phi, false).expect("basis values are total");
                ev.values.iter().zip(c).map(|(y, k)| y * k).sum()
            }
        }
    })
}

/// Four-port 2D pattern without mirror symmetry: lobes of different width and
/// strength pointing in irregular directions.
pub fn asymmetric_pattern_2d() -> PatternModel {
    // (offset, first-harmonic weight, lobe direction, second-harmonic weight, its direction)
    const PORTS: [(f64, f64, f64, f64, f64); 4] = [
        (1.0, 0.85, 0.35, 0.25, 1.1),
        (0.9, 0.75, 2.2, 0.35, -0.4),
        (1.1, 0.9, -2.4, 0.2, 0.6),
        (0.8, 0.7, -0.9, 0.3, 2.5),
    ];
    model_from_amplitudes(Dimension::TwoD, 2, PORTS.len(), |m, theta, _| {
        let (c, a1, d1, a2, d2) = PORTS[m];
        c + a1 * (theta - d1).cos() + a2 * (2.0 * (theta - d2)).cos()
    })
    .expect("fixed pattern is well conditioned")
}

/// Four-port 2D pattern with `g(theta) = g(-theta)` on every port.
pub fn mirror_symmetric_pattern_2d() -> PatternModel {
    // cosine-only amplitudes
    const PORTS: [(f64, f64, f64); 4] = [(1.0, 0.9, 0.2), (0.6, -0.3, 0.8), (0.7, 0.2, -0.7), (0.5, -0.8, 0.1)];
    model_from_amplitudes(Dimension::TwoD, 2, PORTS.len(), |m, theta, _| {
        let (c, a1, a2) = PORTS[m];
        c + a1 * theta.cos() + a2 * (2.0 * theta).cos()
    })
    .expect("fixed pattern is well conditioned")
}

/// Four-port 3D pattern whose gain fades toward `theta = pi`, leaving a wide
/// low-gain band below the horizon.
///
/// Amplitude of port `m`: `(1 + cos(theta)) (1 + 0.8 u_m . r)`, with `u_m` a unit
/// vector at azimuth `m * 90` degrees and elevation 30, -10, 50 or 10 degrees.
pub fn low_gain_band_pattern_3d() -> PatternModel {
    const ELEVATIONS_DEG: [f64; 4] = [30.0, -10.0, 50.0, 10.0];
    model_from_amplitudes(Dimension::ThreeD, 2, 4, |m, theta, phi| {
        let elev = ELEVATIONS_DEG[m].to_radians();
        let az = m as f64 * PI / 2.0;
        let u = [elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin()];
        let r = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let dot = u[0] * r[0] + u[1] * r[1] + u[2] * r[2];
        (1.0 + theta.cos()) * (1.0 + 0.8 * dot)
    })
    .expect("fixed pattern is well conditioned")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{coefficient_energy, normalization_grid};

    #[test]
    fn synth_is_deterministic() {
        let a = synth_pattern(11, 3, BasisSpec::spherical(2), 0.5).unwrap();
        let b = synth_pattern(11, 3, BasisSpec::spherical(2), 0.5).unwrap();
        assert_eq!(a, b);
        let c = synth_pattern(12, 3, BasisSpec::spherical(2), 0.5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_is_nonnegative_and_normalized() {
        for spec in [BasisSpec::fourier(3), BasisSpec::spherical(2)] {
            let model = synth_pattern(5, 4, spec, 0.7).unwrap();
            assert_eq!(model.basis().order, 2 * spec.order);
            let mut max: f64 = 0.0;
            let mut buf = vec![0.0; 4];
            for (t, p) in normalization_grid(spec.dimension) {
                model.raw_gains_into(t, p, &mut buf);
                for &g in &buf {
                    assert!(g >= -1e-12, "negative gain {g}");
                    max = max.max(g);
                }
            }
            assert!((max - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_pattern_is_symmetric() {
        let model = mirror_symmetric_pattern_2d();
        for theta in [0.1, 0.8, 1.5, 2.9] {
            let a = model.raw_gains(theta, 0.0);
            let b = model.raw_gains(-theta, 0.0);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn engineered_patterns_are_band_limited() {
        let e = coefficient_energy(&low_gain_band_pattern_3d());
        assert_eq!(e.len(), 5);
        let e = coefficient_energy(&asymmetric_pattern_2d());
        assert_eq!(e.len(), 5);
        assert!(e[4] > 0.0);
    }
}
