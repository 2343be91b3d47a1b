//! Orthonormal angular bases for the antenna manifold.
//!
//! Two bases are provided:
//!
//! - the complex Fourier basis `e^{j n theta} / sqrt(2 pi)`, `n = -N..=N`, for the
//!   single-angle (2D) manifold `theta in [-pi, pi)`;
//! - the real spherical harmonics `Y_l^m(theta, phi)` for the sphere, with `theta`
//!   the co-elevation and `phi` the azimuth. Coefficients are laid out on the flat
//!   index `n = (l + 1) l + m`.
//!
//! Associated Legendre functions carry the Condon-Shortley phase `(-1)^m`.
//! Angular derivatives with respect to `theta` divide by `sin(theta)` and are
//! therefore rejected at the poles; callers sampling the sphere clamp to
//! `[POLE_EPSILON, pi - POLE_EPSILON]`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Distance kept from the poles by grids that need theta derivatives.
pub const POLE_EPSILON: f64 = 1e-3;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    TwoD,
    ThreeD,
}

impl Dimension {
    pub fn label(self) -> &'static str {
        match self {
            Dimension::TwoD => "2d",
            Dimension::ThreeD => "3d",
        }
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2d" => Ok(Dimension::TwoD),
            "3d" => Ok(Dimension::ThreeD),
            other => Err(Error::InvalidInput(format!(
                "unknown dimension {other:?}, expected 2d or 3d"
            ))),
        }
    }
}

/// Basis family plus truncation order (`N` for Fourier, `L` for spherical harmonics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub dimension: Dimension,
    pub order: usize,
}

impl BasisSpec {
    pub fn fourier(order: usize) -> Self {
        BasisSpec {
            dimension: Dimension::TwoD,
            order,
        }
    }

    pub fn spherical(order: usize) -> Self {
        BasisSpec {
            dimension: Dimension::ThreeD,
            order,
        }
    }

    /// Number of basis functions: `2N + 1` or `(L + 1)^2`.
    pub fn len(&self) -> usize {
        match self.dimension {
            Dimension::TwoD => 2 * self.order + 1,
            Dimension::ThreeD => (self.order + 1) * (self.order + 1),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Degree (3D) or `|n|` (2D) carried by the coefficient at flat index `idx`.
    pub fn degree_of(&self, idx: usize) -> usize {
        match self.dimension {
            Dimension::TwoD => (idx as i64 - self.order as i64).unsigned_abs() as usize,
            Dimension::ThreeD => sh_degree_order(idx).0,
        }
    }
}

/// Flat index `n = (l + 1) l + m` of the real spherical harmonic `Y_l^m`.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    ((l * (l + 1)) as i64 + m) as usize
}

/// Inverse of [`sh_index`].
#[inline]
pub fn sh_degree_order(n: usize) -> (usize, i64) {
    let mut l = (n as f64).sqrt() as usize;
    // guard against rounding in the square root
    while (l + 1) * (l + 1) <= n {
        l += 1;
    }
    while l * l > n {
        l -= 1;
    }
    (l, n as i64 - (l * (l + 1)) as i64)
}

/// A basis vector `Psi(theta[, phi])` in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisVector {
    Fourier(Vec<Complex64>),
    Spherical(Vec<f64>),
}

impl BasisVector {
    pub fn len(&self) -> usize {
        match self {
            BasisVector::Fourier(v) => v.len(),
            BasisVector::Spherical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry `i` as a complex number (3D entries have zero imaginary part).
    pub fn get(&self, i: usize) -> Complex64 {
        match self {
            BasisVector::Fourier(v) => v[i],
            BasisVector::Spherical(v) => Complex64::new(v[i], 0.0),
        }
    }
}

/// `(1 / sqrt(2 pi)) e^{j n theta}` for `n = -N..=N`.
pub fn fourier_basis(theta: f64, order: usize) -> Vec<Complex64> {
    let n = order as i64;
    (-n..=n)
        .map(|k| Complex64::from_polar(INV_SQRT_2PI, k as f64 * theta))
        .collect()
}

/// `(j n / sqrt(2 pi)) e^{j n theta}` for `n = -N..=N`.
pub fn fourier_basis_dtheta(theta: f64, order: usize) -> Vec<Complex64> {
    let n = order as i64;
    (-n..=n)
        .map(|k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k as f64) * Complex64::from_polar(INV_SQRT_2PI, k as f64 * theta)
            }
        })
        .collect()
}

/// Associated Legendre function `P_l^m(x)` (Condon-Shortley phase included).
///
/// Evaluated by upward recurrence in `l` from the closed-form seed `P_m^m`.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order m = {m} exceeds degree l = {l}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("|x| = {} > 1", x.abs())));
    }
    Ok(legendre_column(l, m, x))
}

/// `P_m^m, P_{m+1}^m, ..., P_l^m` recurrence, returning `P_l^m`.
fn legendre_column(l: usize, m: usize, x: f64) -> f64 {
    let mut pmm = seed_pmm(m, x);
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = next;
    }
    pm1
}

/// `P_m^m(x) = (-1)^m (2m - 1)!! (1 - x^2)^{m/2}`.
fn seed_pmm(m: usize, x: f64) -> f64 {
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut p = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        p *= -fact * s;
        fact += 2.0;
    }
    p
}

fn check_interior(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(Error::Pole { theta })
    }
}

/// `d/dtheta P_l^m(cos theta)` for `theta` strictly inside `(0, pi)`.
pub fn assoc_legendre_dtheta(l: usize, m: usize, theta: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order m = {m} exceeds degree l = {l}")));
    }
    check_interior(theta)?;
    let x = theta.cos();
    let (s, c) = theta.sin_cos();
    let p_next = legendre_column(l + 1, m, x);
    let p = legendre_column(l, m, x);
    Ok((1 + l - m) as f64 / s * p_next - (l + 1) as f64 * c / s * p)
}

/// Normalisation `N_l^m = sqrt((2l + 1)/(4 pi) (l - m)!/(l + m)!)`.
pub fn sh_normalization(l: usize, m: usize) -> f64 {
    if l <= CACHED_DEGREE {
        let table = NORMS.get_or_init(|| {
            let mut t = Vec::with_capacity((CACHED_DEGREE + 1) * (CACHED_DEGREE + 2) / 2);
            for l in 0..=CACHED_DEGREE {
                for m in 0..=l {
                    t.push(normalization_direct(l, m));
                }
            }
            t
        });
        return table[LegendreTable::idx(l, m)];
    }
    normalization_direct(l, m)
}

const CACHED_DEGREE: usize = 64;
static NORMS: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();

fn normalization_direct(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

fn check_order(l: usize, m: i64) -> Result<()> {
    if m.unsigned_abs() as usize > l {
        Err(Error::Domain(format!("|m| = {} exceeds degree l = {l}", m.abs())))
    } else {
        Ok(())
    }
}

/// Real spherical harmonic `Y_l^m(theta, phi)`.
pub fn sph_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    check_order(l, m)?;
    let am = m.unsigned_abs() as usize;
    let p = legendre_column(l, am, theta.cos());
    let norm = sh_normalization(l, am);
    Ok(match m {
        0 => norm * p,
        m if m > 0 => SQRT_2 * norm * (am as f64 * phi).cos() * p,
        _ => SQRT_2 * norm * (am as f64 * phi).sin() * p,
    })
}

/// `d/dtheta Y_l^m(theta, phi)`, interior `theta` only.
pub fn sph_harmonic_dtheta(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    check_order(l, m)?;
    let am = m.unsigned_abs() as usize;
    let dp = assoc_legendre_dtheta(l, am, theta)?;
    let norm = sh_normalization(l, am);
    Ok(match m {
        0 => norm * dp,
        m if m > 0 => SQRT_2 * norm * (am as f64 * phi).cos() * dp,
        _ => SQRT_2 * norm * (am as f64 * phi).sin() * dp,
    })
}

/// `d/dphi Y_l^m(theta, phi)`; identically zero for `m = 0`.
pub fn sph_harmonic_dphi(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    check_order(l, m)?;
    let am = m.unsigned_abs() as usize;
    let p = legendre_column(l, am, theta.cos());
    let norm = sh_normalization(l, am);
    let mf = m as f64;
    Ok(match m {
        0 => 0.0,
        m if m > 0 => SQRT_2 * norm * (-mf) * (mf * phi).sin() * p,
        _ => SQRT_2 * norm * (-mf) * (mf * phi).cos() * p,
    })
}

/// Triangular table of `P_l^m(x)` for `0 <= m <= l <= lmax`.
struct LegendreTable {
    values: Vec<f64>,
}

impl LegendreTable {
    fn new(lmax: usize, x: f64) -> Self {
        let mut values = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
        for m in 0..=lmax {
            let mut pmm = seed_pmm(m, x);
            values[Self::idx(m, m)] = pmm;
            if m == lmax {
                break;
            }
            let mut pm1 = x * (2 * m + 1) as f64 * pmm;
            values[Self::idx(m + 1, m)] = pm1;
            for l in (m + 2)..=lmax {
                let next = ((2 * l - 1) as f64 * x * pm1 - (l + m - 1) as f64 * pmm) / (l - m) as f64;
                pmm = pm1;
                pm1 = next;
                values[Self::idx(l, m)] = next;
            }
        }
        LegendreTable { values }
    }

    #[inline]
    fn idx(l: usize, m: usize) -> usize {
        l * (l + 1) / 2 + m
    }

    #[inline]
    fn get(&self, l: usize, m: usize) -> f64 {
        self.values[Self::idx(l, m)]
    }
}

/// Fills `cos(m phi)` and `sin(m phi)` for `m = 0..=mmax`.
fn harmonics_of(phi: f64, mmax: usize) -> (Vec<f64>, Vec<f64>) {
    let mut cos = Vec::with_capacity(mmax + 1);
    let mut sin = Vec::with_capacity(mmax + 1);
    for m in 0..=mmax {
        let (s, c) = (m as f64 * phi).sin_cos();
        cos.push(c);
        sin.push(s);
    }
    (cos, sin)
}

/// Real spherical harmonics and optionally their angular derivatives, in flat order.
pub(crate) struct SphericalEval {
    pub values: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub dphi: Vec<f64>,
}

pub(crate) fn spherical_eval(lmax: usize, theta: f64, phi: f64, gradient: bool) -> Result<SphericalEval> {
    if gradient {
        check_interior(theta)?;
    }
    let (s, c) = theta.sin_cos();
    let table = LegendreTable::new(lmax + usize::from(gradient), c);
    let (cos_m, sin_m) = harmonics_of(phi, lmax);
    let len = (lmax + 1) * (lmax + 1);
    let mut values = vec![0.0; len];
    let (mut dtheta, mut dphi) = if gradient {
        (vec![0.0; len], vec![0.0; len])
    } else {
        (Vec::new(), Vec::new())
    };
    for l in 0..=lmax {
        for am in 0..=l {
            let norm = sh_normalization(l, am);
            let p = table.get(l, am);
            let dp = if gradient {
                (1 + l - am) as f64 / s * table.get(l + 1, am) - (l + 1) as f64 * c / s * p
            } else {
                0.0
            };
            if am == 0 {
                let i = sh_index(l, 0);
                values[i] = norm * p;
                if gradient {
                    dtheta[i] = norm * dp;
                }
                continue;
            }
            let a = SQRT_2 * norm;
            let mf = am as f64;
            let ip = sh_index(l, am as i64);
            let ineg = sh_index(l, -(am as i64));
            values[ip] = a * cos_m[am] * p;
            values[ineg] = a * sin_m[am] * p;
            if gradient {
                dtheta[ip] = a * cos_m[am] * dp;
                dtheta[ineg] = a * sin_m[am] * dp;
                dphi[ip] = -a * mf * sin_m[am] * p;
                dphi[ineg] = a * mf * cos_m[am] * p;
            }
        }
    }
    Ok(SphericalEval { values, dtheta, dphi })
}

/// The full basis vector in enumeration order; `phi` is ignored in 2D.
pub fn basis_vector(spec: BasisSpec, theta: f64, phi: f64) -> Result<BasisVector> {
    Ok(match spec.dimension {
        Dimension::TwoD => BasisVector::Fourier(fourier_basis(theta, spec.order)),
        Dimension::ThreeD => BasisVector::Spherical(spherical_eval(spec.order, theta, phi, false)?.values),
    })
}

/// Derivatives of the basis vector with respect to `theta` and `phi`.
///
/// In 2D the `phi` derivative is the all-zero vector.
pub fn basis_gradient(spec: BasisSpec, theta: f64, phi: f64) -> Result<(BasisVector, BasisVector)> {
    Ok(match spec.dimension {
        Dimension::TwoD => (
            BasisVector::Fourier(fourier_basis_dtheta(theta, spec.order)),
            BasisVector::Fourier(vec![Complex64::new(0.0, 0.0); spec.len()]),
        ),
        Dimension::ThreeD => {
            let ev = spherical_eval(spec.order, theta, phi, true)?;
            (BasisVector::Spherical(ev.dtheta), BasisVector::Spherical(ev.dphi))
        }
    })
}
