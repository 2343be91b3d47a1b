#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Product rule on the sphere: `(theta, phi, weight)` exact for polynomials of
/// degree `< 2 n` in `cos(theta)` and trigonometric degree `< nphi` in `phi`.
pub fn sphere_quadrature(n: usize, nphi: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (x, w) in gauss_legendre(n) {
        for j in 0..nphi {
            out.push((x.acos(), 2.0 * PI * j as f64 / nphi as f64, w * 2.0 * PI / nphi as f64));
        }
    }
    out
}

/// Five-point central difference of `f` at `x`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// `|a - b| / max(|a|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(floor)
}

/// Deterministic points in the open rectangle `(lo, hi) x (plo, phi)`.
pub fn interior_points(n: usize, lo: f64, hi: f64, plo: f64, phi: f64) -> Vec<(f64, f64)> {
    // additive recurrence with the plastic-number constants
    let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);
    (1..=n)
        .map(|i| {
            let u = (0.5 + a1 * i as f64).fract();
            let v = (0.5 + a2 * i as f64).fract();
            (
                lo + (hi - lo) * (0.02 + 0.96 * u),
                plo + (phi - plo) * (0.02 + 0.96 * v),
            )
        })
        .collect()
}

/// Composite 20-point Gauss-Legendre integral of `f` over `[a, b]` in `panels` pieces.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in &rule {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    acc * 0.5 * h
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Fisher information assembled from finite-difference partials of the mean
/// and variance of every port's power (step `1e-6` relative to each parameter).
pub fn fd_fisher(
    model: &mma_doa::pattern::PatternModel,
    params: &mma_doa::signal::SignalParams,
    k: usize,
) -> Vec<Vec<f64>> {
    use mma_doa::basis::Dimension;
    use mma_doa::signal::{power_mean, power_var};
    let three_d = model.dimension() == Dimension::ThreeD;
    let mut x = vec![params.theta];
    if three_d {
        x.push(params.phi);
    }
    x.extend([params.signal_power, params.noise_var]);
    let n = x.len();
    let moments = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let phi = if three_d { x[1] } else { 0.0 };
        let (ps, s2) = (x[n - 2], x[n - 1]);
        let g = model.raw_gains(x[0], phi);
        let mu = g.iter().map(|&g| power_mean(g, ps, s2)).collect();
        let var = g.iter().map(|&g| power_var(g, ps, s2, k)).collect();
        (mu, var)
    };
    let (_, var) = moments(&x);
    let ports = var.len();
    let mut dmu = vec![vec![0.0; n]; ports];
    let mut dvar = vec![vec![0.0; n]; ports];
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut up = x.clone();
        let mut down = x.clone();
        up[i] += h;
        down[i] -= h;
        let (mu_u, var_u) = moments(&up);
        let (mu_d, var_d) = moments(&down);
        for m in 0..ports {
            dmu[m][i] = (mu_u[m] - mu_d[m]) / (2.0 * h);
            dvar[m][i] = (var_u[m] - var_d[m]) / (2.0 * h);
        }
    }
    let mut fim = vec![vec![0.0; n]; n];
    for m in 0..ports {
        for i in 0..n {
            for j in 0..n {
                fim[i][j] += dmu[m][i] * dmu[m][j] / var[m] + dvar[m][i] * dvar[m][j] / (2.0 * var[m] * var[m]);
            }
        }
    }
    fim
}

/// Largest entrywise error of `a` against `b`, relative to `|b_ij|` floored at
/// `floor * sqrt(b_ii b_jj)`.
pub fn matrix_rel_err(a: &nalgebra::DMatrix<f64>, b: &[Vec<f64>], floor: f64) -> f64 {
    let n = b.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let scale = b[i][j].abs().max(floor * (b[i][i] * b[j][j]).sqrt());
            worst = worst.max((a[(i, j)] - b[i][j]).abs() / scale);
        }
    }
    worst
}

/// Runs the command-line binary; returns exit code, stdout and stderr.
pub fn run_cli<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_mma-doa"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Directory of the shipped fixtures.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
}

/// Random model, interior parameters away from the gain floor, and snapshot count.
pub fn random_fim_config(
    rng: &mut impl rand::Rng,
) -> (mma_doa::pattern::PatternModel, mma_doa::signal::SignalParams, usize) {
    loop {
        let three_d = rng.random_bool(0.5);
        let ports = rng.random_range(4..=6);
        let seed = rng.random();
        let model = if three_d {
            mma_doa::pattern::synth_pattern(
                seed,
                ports,
                mma_doa::basis::BasisSpec::spherical(rng.random_range(1..=2)),
                0.5,
            )
            .unwrap()
        } else {
            mma_doa::pattern::synth_pattern(
                seed,
                ports,
                mma_doa::basis::BasisSpec::fourier(rng.random_range(1..=3)),
                0.5,
            )
            .unwrap()
        };
        let (theta, phi) = if three_d {
            (rng.random_range(0.2..PI - 0.2), rng.random_range(0.0..2.0 * PI))
        } else {
            (rng.random_range(-PI..PI), 0.0)
        };
        let s2 = rng.random_range(0.1..10.0);
        let snr: f64 = rng.random_range(0.0..30.0);
        let params = mma_doa::signal::SignalParams::new(theta, phi, s2 * 10f64.powf(snr / 10.0), s2).unwrap();
        if mma_doa::pattern::eval_pattern(&model, theta, phi).floor_active {
            continue;
        }
        return (model, params, rng.random_range(1..=1000));
    }
}
