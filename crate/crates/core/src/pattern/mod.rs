//! Multi-port antenna power pattern `g(theta, phi) = G Psi(theta, phi)`.
//!
//! A [`PatternModel`] stores the sampling matrix `G` (one row per port) for a
//! given [`BasisSpec`]. In 2D the Fourier coefficients are complex and kept
//! conjugate-symmetric about `n = 0`, so the evaluated pattern is real. In 3D the
//! spherical-harmonic coefficients are real.
//!
//! Evaluated gains are divided by a normalisation scale and floored at
//! [`GAIN_FLOOR`] before they are handed to likelihoods and bounds; the floor is
//! reported, never hidden.

mod io;
mod synth;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{spherical_eval, BasisSpec, Dimension, POLE_EPSILON};
use crate::error::{Error, Result};

pub(crate) use io::fmt_exact;
pub use io::{load_model, load_pattern_samples, model_to_string, save_model, save_pattern_samples};
pub use synth::{
    asymmetric_pattern_2d, low_gain_band_pattern_3d, mirror_symmetric_pattern_2d, model_from_amplitudes, synth_pattern,
};

/// Smallest gain handed to likelihood and bound computations.
pub const GAIN_FLOOR: f64 = 1e-9;

/// Largest design-matrix condition number accepted by the fit.
pub const MAX_CONDITION: f64 = 1e12;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One calibration direction and its per-port power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSample {
    pub theta: f64,
    pub phi: f64,
    pub gains: Vec<f64>,
}

/// Calibration-grid samples of the per-port power gain.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSamples {
    ports: usize,
    entries: Vec<PatternSample>,
}

impl PatternSamples {
    pub fn new(ports: usize, entries: Vec<PatternSample>) -> Result<Self> {
        if ports == 0 {
            return Err(Error::InvalidInput("pattern needs at least one port".into()));
        }
        if entries.is_empty() {
            return Err(Error::InvalidInput("no pattern samples".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.gains.len() != ports {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has {} gains, expected {ports}",
                    e.gains.len()
                )));
            }
            if !e.theta.is_finite() || !e.phi.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} has a non-finite angle")));
            }
            if let Some(g) = e.gains.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
                return Err(Error::InvalidInput(format!("sample {i} has invalid gain {g}")));
            }
        }
        Ok(PatternSamples { ports, entries })
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn entries(&self) -> &[PatternSample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Coefficients of the pattern expansion, one row per port.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingMatrix {
    Fourier(DMatrix<Complex64>),
    Spherical(DMatrix<f64>),
}

impl SamplingMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            SamplingMatrix::Fourier(g) => g.nrows(),
            SamplingMatrix::Spherical(g) => g.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            SamplingMatrix::Fourier(g) => g.ncols(),
            SamplingMatrix::Spherical(g) => g.ncols(),
        }
    }

    fn scaled(&self, factor: f64) -> SamplingMatrix {
        match self {
            SamplingMatrix::Fourier(g) => SamplingMatrix::Fourier(g.map(|z| z * factor)),
            SamplingMatrix::Spherical(g) => SamplingMatrix::Spherical(g * factor),
        }
    }
}

/// Interpolated multi-port power pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternModel {
    matrix: SamplingMatrix,
    basis: BasisSpec,
    scale: f64,
}

/// Gains at one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub values: Vec<f64>,
    /// At least one port was raised to [`GAIN_FLOOR`].
    pub floor_active: bool,
}

/// Angular gradient of the gains; never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGradient {
    pub dtheta: Vec<f64>,
    pub dphi: Vec<f64>,
    /// The floor is active on the gains at this direction.
    pub floor_active: bool,
}

/// Diagnostics produced by [`fit_sampling_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub residual_rms: f64,
    pub condition_number: f64,
    /// Frobenius distance moved when projecting `G` onto the conjugate-symmetric
    /// subspace (always 0 in 3D).
    pub symmetry_defect: f64,
}

impl PatternModel {
    /// Wraps a sampling matrix. 2D matrices are projected onto the
    /// conjugate-symmetric subspace.
    pub fn new(matrix: SamplingMatrix, basis: BasisSpec) -> Result<Self> {
        let ok_kind = matches!(
            (&matrix, basis.dimension),
            (SamplingMatrix::Fourier(_), Dimension::TwoD) | (SamplingMatrix::Spherical(_), Dimension::ThreeD)
        );
        if !ok_kind {
            return Err(Error::DimensionMismatch(
                "sampling matrix kind does not match the basis dimension".into(),
            ));
        }
        if matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "sampling matrix has {} columns, basis has {} functions",
                matrix.ncols(),
                basis.len()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidInput("pattern needs at least one port".into()));
        }
        let matrix = match matrix {
            SamplingMatrix::Fourier(g) => SamplingMatrix::Fourier(conjugate_symmetrize(&g).0),
            m => m,
        };
        Ok(PatternModel {
            matrix,
            basis,
            scale: 1.0,
        })
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn dimension(&self) -> Dimension {
        self.basis.dimension
    }

    pub fn ports(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn normalization_scale(&self) -> f64 {
        self.scale
    }

    /// Stored coefficients, before division by the normalisation scale.
    pub fn raw_matrix(&self) -> &SamplingMatrix {
        &self.matrix
    }

    /// Coefficients of the normalised pattern (`G / scale`).
    pub fn sampling_matrix(&self) -> SamplingMatrix {
        self.matrix.scaled(1.0 / self.scale)
    }

    /// Same pattern with the coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PatternModel {
        PatternModel {
            matrix: self.matrix.scaled(factor),
            basis: self.basis,
            scale: self.scale,
        }
    }

    /// Pattern with the port rows reordered as `order[i]` -> row `i`.
    pub fn permuted(&self, order: &[usize]) -> Result<PatternModel> {
        let mut seen = vec![false; self.ports()];
        if order.len() != self.ports()
            || order
                .iter()
                .any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::InvalidInput("port order is not a permutation".into()));
        }
        let matrix = match &self.matrix {
            SamplingMatrix::Fourier(g) => SamplingMatrix::Fourier(g.select_rows(order)),
            SamplingMatrix::Spherical(g) => SamplingMatrix::Spherical(g.select_rows(order)),
        };
        Ok(PatternModel {
            matrix,
            basis: self.basis,
            scale: self.scale,
        })
    }

    /// Unclamped gains `Re(G Psi) / scale` written into `out`.
    pub fn raw_gains_into(&self, theta: f64, phi: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.ports());
        let inv = 1.0 / self.scale;
        match &self.matrix {
            SamplingMatrix::Fourier(g) => {
                let order = self.basis.order;
                let trig: Vec<(f64, f64)> = (0..=order)
                    .map(|k| {
                        let (s, c) = (k as f64 * theta).sin_cos();
                        (c, s)
                    })
                    .collect();
                for (m, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (col, n) in (-(order as i64)..=order as i64).enumerate() {
                        let z = g[(m, col)];
                        let (c, s) = trig[n.unsigned_abs() as usize];
                        let s = if n < 0 { -s } else { s };
                        acc += z.re * c - z.im * s;
                    }
                    *o = acc * INV_SQRT_2PI * inv;
                }
            }
            SamplingMatrix::Spherical(g) => {
                let ev =
                    spherical_eval(self.basis.order, theta, phi, false).expect("basis values are defined everywhere");
                for (m, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (col, y) in ev.values.iter().enumerate() {
                        acc += g[(m, col)] * y;
                    }
                    *o = acc * inv;
                }
            }
        }
    }

    /// Unclamped gains as a fresh vector.
    pub fn raw_gains(&self, theta: f64, phi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ports()];
        self.raw_gains_into(theta, phi, &mut out);
        out
    }

    /// Gains floored at [`GAIN_FLOOR`], written into `out`; returns whether the floor was hit.
    pub fn gains_into(&self, theta: f64, phi: f64, out: &mut [f64]) -> bool {
        self.raw_gains_into(theta, phi, out);
        apply_floor(out)
    }

    /// Unclamped `(d/dtheta, d/dphi)` of the gains.
    pub fn raw_gradient(&self, theta: f64, phi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let ports = self.ports();
        let inv = 1.0 / self.scale;
        let mut dtheta = vec![0.0; ports];
        let mut dphi = vec![0.0; ports];
        match &self.matrix {
            SamplingMatrix::Fourier(g) => {
                let order = self.basis.order as i64;
                for (m, d) in dtheta.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (col, n) in (-order..=order).enumerate() {
                        let z = g[(m, col)];
                        let (s, c) = (n as f64 * theta).sin_cos();
                        // Re(z * j n e^{j n theta})
                        acc += -(n as f64) * (z.re * s + z.im * c);
                    }
                    *d = acc * INV_SQRT_2PI * inv;
                }
            }
            SamplingMatrix::Spherical(g) => {
                let ev = spherical_eval(self.basis.order, theta, phi, true)?;
                for m in 0..ports {
                    let (mut at, mut ap) = (0.0, 0.0);
                    for col in 0..ev.values.len() {
                        at += g[(m, col)] * ev.dtheta[col];
                        ap += g[(m, col)] * ev.dphi[col];
                    }
                    dtheta[m] = at * inv;
                    dphi[m] = ap * inv;
                }
            }
        }
        Ok((dtheta, dphi))
    }
}

fn apply_floor(gains: &mut [f64]) -> bool {
    let mut hit = false;
    for g in gains.iter_mut() {
        if !(*g >= GAIN_FLOOR) {
            *g = GAIN_FLOOR;
            hit = true;
        }
    }
    hit
}

/// `G_{m,-n} = conj(G_{m,n})`, by averaging each pair. Returns the projected
/// matrix and the Frobenius distance moved.
fn conjugate_symmetrize(g: &DMatrix<Complex64>) -> (DMatrix<Complex64>, f64) {
    let cols = g.ncols();
    let mut out = g.clone();
    for m in 0..g.nrows() {
        for j in 0..cols {
            let mirror = cols - 1 - j;
            out[(m, j)] = (g[(m, j)] + g[(m, mirror)].conj()) * 0.5;
        }
    }
    let defect = (&out - g).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (out, defect)
}

/// Floored gains at a direction.
pub fn eval_pattern(model: &PatternModel, theta: f64, phi: f64) -> Gains {
    let mut values = vec![0.0; model.ports()];
    let floor_active = model.gains_into(theta, phi, &mut values);
    Gains { values, floor_active }
}

/// Raw angular gradient of the gains, with the floor flag of the gains at the
/// same direction. `dphi` is identically zero in 2D.
pub fn eval_pattern_grad(model: &PatternModel, theta: f64, phi: f64) -> Result<GainGradient> {
    let (dtheta, dphi) = model.raw_gradient(theta, phi)?;
    let floor_active = model.raw_gains(theta, phi).iter().any(|g| !(*g >= GAIN_FLOOR));
    Ok(GainGradient {
        dtheta,
        dphi,
        floor_active,
    })
}

/// Directions of the normalisation grid: 1 degree in 2D, 1 x 1 degree in 3D with
/// theta kept off the poles.
pub fn normalization_grid(dimension: Dimension) -> Vec<(f64, f64)> {
    let deg = PI / 180.0;
    match dimension {
        Dimension::TwoD => (-180..180).map(|i| (i as f64 * deg, 0.0)).collect(),
        Dimension::ThreeD => {
            let mut grid = Vec::with_capacity(181 * 360);
            for i in 0..=180 {
                let theta = (i as f64 * deg).clamp(POLE_EPSILON, PI - POLE_EPSILON);
                for j in 0..360 {
                    grid.push((theta, j as f64 * deg));
                }
            }
            grid
        }
    }
}

/// Rescales the model so that the largest port gain on the normalisation grid is 1.
pub fn normalize_pattern(model: &PatternModel) -> Result<PatternModel> {
    let unit = PatternModel {
        scale: 1.0,
        ..model.clone()
    };
    let mut buf = vec![0.0; model.ports()];
    let mut max = f64::NEG_INFINITY;
    for (theta, phi) in normalization_grid(model.dimension()) {
        unit.raw_gains_into(theta, phi, &mut buf);
        for &g in &buf {
            max = max.max(g);
        }
    }
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::DegeneratePattern(format!(
            "maximum gain on the normalisation grid is {max}"
        )));
    }
    Ok(PatternModel {
        scale: max,
        ..model.clone()
    })
}

/// Coefficient energy `sum_m |G_{m,n}|^2` aggregated by degree `l` (3D) or `|n|` (2D),
/// computed on the normalised coefficients.
pub fn coefficient_energy(model: &PatternModel) -> Vec<f64> {
    let spec = model.basis();
    let mut energy = vec![0.0; spec.order + 1];
    let inv2 = 1.0 / (model.scale * model.scale);
    match &model.matrix {
        SamplingMatrix::Fourier(g) => {
            for (j, col) in g.column_iter().enumerate() {
                energy[spec.degree_of(j)] += col.iter().map(|z| z.norm_sqr()).sum::<f64>() * inv2;
            }
        }
        SamplingMatrix::Spherical(g) => {
            for (j, col) in g.column_iter().enumerate() {
                energy[spec.degree_of(j)] += col.iter().map(|x| x * x).sum::<f64>() * inv2;
            }
        }
    }
    energy
}

/// Smallest order whose tail energy is below `rel_tol` of the total.
pub fn select_truncation_order(energy: &[f64], rel_tol: f64) -> usize {
    let total: f64 = energy.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut tail = 0.0;
    for order in (0..energy.len()).rev() {
        if tail + energy[order] >= rel_tol * total {
            return order;
        }
        tail += energy[order];
    }
    0
}

/// Least-squares fit of `G` to calibration samples, via SVD of the design matrix.
///
/// The returned model has normalisation scale 1.
pub fn fit_sampling_matrix(samples: &PatternSamples, spec: BasisSpec) -> Result<(PatternModel, FitReport)> {
    let rows = samples.len();
    let cols = spec.len();
    if rows < cols {
        return Err(Error::Underdetermined {
            samples: rows,
            coefficients: cols,
        });
    }
    let ports = samples.ports();
    let targets = DMatrix::from_fn(rows, ports, |i, m| samples.entries[i].gains[m]);
    let (matrix, condition, defect) = match spec.dimension {
        Dimension::TwoD => {
            let mut design = DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0));
            for (i, e) in samples.entries.iter().enumerate() {
                for (j, z) in crate::basis::fourier_basis(e.theta, spec.order).into_iter().enumerate() {
                    design[(i, j)] = z;
                }
            }
            let svd = design.svd(true, true);
            let condition = condition_number(svd.singular_values.as_slice());
            if condition > MAX_CONDITION {
                return Err(Error::IllConditioned(condition));
            }
            let rhs = targets.map(|x| Complex64::new(x, 0.0));
            let x = svd
                .solve(&rhs, 0.0)
                .map_err(|e| Error::NonFinite(format!("least-squares solve failed: {e}")))?;
            let (g, defect) = conjugate_symmetrize(&x.transpose());
            (SamplingMatrix::Fourier(g), condition, defect)
        }
        Dimension::ThreeD => {
            let mut design = DMatrix::zeros(rows, cols);
            for (i, e) in samples.entries.iter().enumerate() {
                let ev = spherical_eval(spec.order, e.theta, e.phi, false)?;
                for (j, y) in ev.values.into_iter().enumerate() {
                    design[(i, j)] = y;
                }
            }
            let svd = design.svd(true, true);
            let condition = condition_number(svd.singular_values.as_slice());
            if condition > MAX_CONDITION {
                return Err(Error::IllConditioned(condition));
            }
            let x = svd
                .solve(&targets, 0.0)
                .map_err(|e| Error::NonFinite(format!("least-squares solve failed: {e}")))?;
            (SamplingMatrix::Spherical(x.transpose()), condition, 0.0)
        }
    };
    let model = PatternModel {
        matrix,
        basis: spec,
        scale: 1.0,
    };
    let residual_rms = fit_residual_rms(&model, samples);
    if !residual_rms.is_finite() {
        return Err(Error::NonFinite("fit residual".into()));
    }
    Ok((
        model,
        FitReport {
            residual_rms,
            condition_number: condition,
            symmetry_defect: defect,
        },
    ))
}

/// RMS of `g~ - G Psi` over all samples and ports (unclamped model gains).
pub fn fit_residual_rms(model: &PatternModel, samples: &PatternSamples) -> f64 {
    let mut buf = vec![0.0; model.ports()];
    let mut acc = 0.0;
    for e in samples.entries() {
        model.raw_gains_into(e.theta, e.phi, &mut buf);
        acc += buf.iter().zip(&e.gains).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    (acc / (samples.len() * samples.ports()) as f64).sqrt()
}

fn condition_number(singular: &[f64]) -> f64 {
    let max = singular.iter().cloned().fold(0.0, f64::max);
    let min = singular.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Options for [`fit_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Drop trailing degrees whose energy is below this fraction of the total,
    /// then refit at the reduced order.
    pub truncation_tol: Option<f64>,
    /// Rescale so the grid maximum is 1.
    pub normalize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            truncation_tol: Some(1e-6),
            normalize: true,
        }
    }
}

/// Fit with optional energy-based truncation and normalisation.
pub fn fit_pattern(
    samples: &PatternSamples,
    spec: BasisSpec,
    options: &FitOptions,
) -> Result<(PatternModel, FitReport)> {
    let (mut model, mut report) = fit_sampling_matrix(samples, spec)?;
    if let Some(tol) = options.truncation_tol {
        let order = select_truncation_order(&coefficient_energy(&model), tol);
        if order < spec.order {
            (model, report) = fit_sampling_matrix(samples, BasisSpec { order, ..spec })?;
        }
    }
    if options.normalize {
        model = normalize_pattern(&model)?;
    }
    Ok((model, report))
}

/// Samples the model's unclamped gains at the given directions.
pub fn sample_model(model: &PatternModel, directions: &[(f64, f64)]) -> Result<PatternSamples> {
    let entries = directions
        .iter()
        .map(|&(theta, phi)| PatternSample {
            theta,
            phi,
            gains: model.raw_gains(theta, phi),
        })
        .collect();
    PatternSamples::new(model.ports(), entries)
}
