//! Fisher information and Cramér–Rao bounds under the Gaussian power model.
//!
//! Parameter order is `[theta, Ps, sigma^2]` in 2D and `[theta, phi, Ps, sigma^2]`
//! in 3D. Bounds are in radians squared.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::Dimension;
use crate::error::{Error, Result};
use crate::pattern::PatternModel;
use crate::signal::{power_var, SignalParams};

/// Condition number above which the information matrix is pseudo-inverted.
pub const MAX_FIM_CONDITION: f64 = 1e12;

/// Null-space component above which a parameter is reported unidentifiable.
const NULL_COMPONENT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub matrix: DMatrix<f64>,
    pub crb_theta: f64,
    /// `None` in 2D.
    pub crb_phi: Option<f64>,
    /// Condition number of the information matrix with the power parameters
    /// expressed relative to `max(Ps, sigma^2)` and `sigma^2`.
    pub condition: f64,
    /// The pseudo-inverse path was taken.
    pub singular: bool,
    pub floor_active: bool,
}

/// Reference magnitudes of each parameter; angles are taken as radians.
fn scales_of(n: usize, signal_power: f64, noise_var: f64) -> Vec<f64> {
    let mut s = vec![1.0; n];
    s[n - 2] = signal_power.max(noise_var);
    s[n - 1] = noise_var;
    s
}

/// Returns the diagonal of the (pseudo-)inverse, the scaled condition number
/// and whether the pseudo-inverse was used.
fn invert_diag(matrix: &DMatrix<f64>, scales: &[f64]) -> (Vec<f64>, f64, bool) {
    let n = matrix.nrows();
    let scaled = DMatrix::from_fn(n, n, |i, j| matrix[(i, j)] * scales[i] * scales[j]);
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let singular = !(condition <= MAX_FIM_CONDITION);
    let cutoff = if singular { max / MAX_FIM_CONDITION } else { 0.0 };
    let mut diag = vec![0.0; n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lambda > cutoff && lambda > 0.0 {
            for i in 0..n {
                diag[i] += v[i] * v[i] / lambda;
            }
        } else {
            for i in 0..n {
                if v[i].abs() > NULL_COMPONENT {
                    diag[i] = f64::INFINITY;
                }
            }
        }
    }
    for i in 0..n {
        diag[i] *= scales[i] * scales[i];
    }
    (diag, condition, singular)
}

/// Per-port partials of the mean and variance, the clamped gains and whether any gain sits on the floor.
pub type MomentPartials = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, bool);

/// Closed-form partials `(d mu / d Gamma, d var / d Gamma)` for every port.
pub fn moment_partials(model: &PatternModel, params: &SignalParams, snapshots: usize) -> Result<MomentPartials> {
    params.validate()?;
    if snapshots == 0 {
        return Err(Error::InvalidInput("snapshot count must be >= 1".into()));
    }
    let three_d = model.dimension() == Dimension::ThreeD;
    let (theta, phi) = (params.theta, params.phi);
    let mut gains = vec![0.0; model.ports()];
    let floor_active = model.gains_into(theta, phi, &mut gains);
    let (dth, dph) = model.raw_gradient(theta, phi)?;
    let (ps, s2, k) = (params.signal_power, params.noise_var, snapshots as f64);
    let mut dmu = Vec::with_capacity(gains.len());
    let mut dvar = Vec::with_capacity(gains.len());
    for m in 0..gains.len() {
        let g = gains[m];
        let mut a = vec![ps * dth[m]];
        let mut b = vec![2.0 * ps * s2 * dth[m] / k];
        if three_d {
            a.push(ps * dph[m]);
            b.push(2.0 * ps * s2 * dph[m] / k);
        }
        a.extend([g, 1.0]);
        b.extend([2.0 * g * s2 / k, (2.0 * s2 + 2.0 * g * ps) / k]);
        dmu.push(a);
        dvar.push(b);
    }
    Ok((dmu, dvar, gains, floor_active))
}

/// Fisher information of one `K`-snapshot measurement at `params`.
pub fn fisher_information(model: &PatternModel, params: &SignalParams, snapshots: usize) -> Result<FisherInfo> {
    let (dmu, dvar, gains, floor_active) = moment_partials(model, params, snapshots)?;
    let n = dmu[0].len();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for m in 0..gains.len() {
        let v = power_var(gains[m], params.signal_power, params.noise_var, snapshots);
        for i in 0..n {
            for j in i..n {
                let e = dmu[m][i] * dmu[m][j] / v + dvar[m][i] * dvar[m][j] / (2.0 * v * v);
                matrix[(i, j)] += e;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            matrix[(i, j)] = matrix[(j, i)];
        }
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Fisher information entry".into()));
    }
    let scales = scales_of(n, params.signal_power, params.noise_var);
    let (diag, condition, singular) = invert_diag(&matrix, &scales);
    Ok(FisherInfo {
        crb_theta: diag[0],
        crb_phi: (n == 4).then(|| diag[1]),
        matrix,
        condition,
        singular,
        floor_active,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbPoint {
    pub theta: f64,
    pub phi: f64,
    pub crb_theta: f64,
    pub crb_phi: Option<f64>,
    pub singular: bool,
    pub floor_active: bool,
}

/// Bounds at each direction of `angles` (evaluated in parallel, returned in input order).
pub fn crb_sweep(
    model: &PatternModel,
    signal_power: f64,
    noise_var: f64,
    snapshots: usize,
    angles: &[(f64, f64)],
) -> Result<Vec<CrbPoint>> {
    angles
        .par_iter()
        .map(|&(theta, phi)| {
            let params = SignalParams::new(theta, phi, signal_power, noise_var)?;
            let fi = fisher_information(model, &params, snapshots)?;
            Ok(CrbPoint {
                theta,
                phi,
                crb_theta: fi.crb_theta,
                crb_phi: fi.crb_phi,
                singular: fi.singular,
                floor_active: fi.floor_active,
            })
        })
        .collect()
}
