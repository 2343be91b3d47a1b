//! Exponentially scaled modified Bessel function of the first kind, in log space.
//!
//! Three regimes:
//! - order >= 25: Debye uniform asymptotic expansion (terms through `u_5`);
//! - small order, `z <= 50 + 2 nu^2`: power series summed outward from its largest term;
//! - small order, large `z`: Hankel large-argument expansion.

use std::f64::consts::PI;

const DEBYE_MIN_ORDER: f64 = 25.0;

/// `ln(I_nu(z)) - z` for `nu >= 0`, `z >= 0`.
pub fn log_bessel_i_scaled(nu: f64, z: f64) -> f64 {
    debug_assert!(nu >= 0.0 && z >= 0.0);
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if nu >= DEBYE_MIN_ORDER {
        debye(nu, z)
    } else if z <= 50.0 + 2.0 * nu * nu {
        series(nu, z) - z
    } else {
        hankel(nu, z)
    }
}

/// `ln I_nu(z)` from `sum_k (z/2)^{2k+nu} / (k! Gamma(k + nu + 1))`.
fn series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    // index of the largest term: first k with (k+1)(k+nu+1) >= q
    let peak = ((-nu + (nu * nu + 4.0 * q).sqrt()) / 2.0 - 1.0).ceil().max(0.0);
    let log_peak = (2.0 * peak + nu) * (0.5 * z).ln() - libm::lgamma(peak + 1.0) - libm::lgamma(peak + nu + 1.0);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = peak;
    loop {
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += term;
        k += 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    term = 1.0;
    k = peak;
    while k > 0.0 {
        term *= k * (k + nu) / q;
        sum += term;
        k -= 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    log_peak + sum.ln()
}

/// `ln I_nu(z) - z` from `e^z / sqrt(2 pi z) sum_k (-1)^k a_k(nu) / z^k`.
fn hankel(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -0.5 * (2.0 * PI * z).ln() + sum.ln()
}

/// Debye expansion of `I_nu(nu t)`, scaled by `e^{-nu t}`.
fn debye(nu: f64, z: f64) -> f64 {
    let t = z / nu;
    let s = (1.0 + t * t).sqrt();
    let p = 1.0 / s;
    let p2 = p * p;
    let u1 = p * (3.0 - 5.0 * p2) / 24.0;
    let u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0;
    let u3 = p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2 * p2 - 425425.0 * p2 * p2 * p2) / 414720.0;
    let p4 = p2 * p2;
    let u4 = p4 * (4465125.0 - 94121676.0 * p2 + 349922430.0 * p4 - 446185740.0 * p4 * p2 + 185910725.0 * p4 * p4)
        / 39813120.0;
    let u5 = p4
        * p
        * (1519035525.0 - 49286948607.0 * p2 + 284499769554.0 * p4 - 614135872350.0 * p4 * p2
            + 566098157625.0 * p4 * p4
            - 188699385875.0 * p4 * p4 * p2)
        / 6688604160.0;
    let inv = 1.0 / nu;
    let series = 1.0 + inv * (u1 + inv * (u2 + inv * (u3 + inv * (u4 + inv * u5))));
    // nu * (eta - t) with eta = s + ln(t / (1 + s)), and s - t = 1 / (s + t)
    let exponent = nu / (s + t) + nu * (t / (1.0 + s)).ln();
    exponent - 0.5 * (2.0 * PI * nu).ln() - 0.5 * s.ln() + series.ln()
}
