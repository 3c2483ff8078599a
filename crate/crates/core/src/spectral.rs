//! Periodic spectral representation and the Fourier-multiplier operators.
//!
//! Coefficients follow the convention `c_j = (1/n) sum_m u(x_m) exp(-i xi_j x_m)`
//! and are stored in FFT order: slot `i` holds mode `j = i` for `i <= n/2` and
//! `j = i - n` above. The Nyquist slot `n/2` is carried as a real-only mode.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT in place (`sum u_m exp(-2 pi i j m / n)`).
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Unnormalized inverse DFT in place (`sum c_j exp(+2 pi i j m / n)`).
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Signed mode index of FFT slot `i` for a transform of length `n`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Uniform periodic lattice on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "n_points must be even and >= 8, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("length must be positive, got {length}")));
        }
        Ok(Self { n_points, length })
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    /// Spacing of the wavenumber lattice, `2 pi / L`.
    #[inline]
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    #[inline]
    pub fn nyquist_slot(&self) -> usize {
        self.n_points / 2
    }

    #[inline]
    pub fn mode_index(&self, slot: usize) -> i64 {
        signed_index(slot, self.n_points)
    }

    /// Wavenumber housed in FFT slot `slot`.
    #[inline]
    pub fn wavenumber(&self, slot: usize) -> f64 {
        self.dxi() * self.mode_index(slot) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.wavenumber(i)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points).map(|m| m as f64 * dx).collect()
    }

    /// FFT slot of signed mode `j`, if the grid houses it.
    pub fn slot_of(&self, j: i64) -> Option<usize> {
        let half = (self.n_points / 2) as i64;
        if j > half || j <= -half {
            return None;
        }
        Some(if j >= 0 {
            j as usize
        } else {
            (j + self.n_points as i64) as usize
        })
    }
}

/// Forward transform of real samples into normalized spectral coefficients.
pub fn forward_transform(grid: &Grid, samples: &[f64]) -> Result<Vec<Complex64>> {
    if samples.len() != grid.n_points() {
        return Err(Error::Config(format!(
            "expected {} samples, got {}",
            grid.n_points(),
            samples.len()
        )));
    }
    let scale = 1.0 / grid.n_points() as f64;
    let mut buf: Vec<Complex64> = samples.iter().map(|&u| Complex64::new(u, 0.0)).collect();
    fft_in_place(&mut buf);
    for c in buf.iter_mut() {
        *c *= scale;
    }
    Ok(buf)
}

/// Inverse transform back to complex samples (imaginary part is the realness defect).
pub fn inverse_transform_complex(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    ifft_in_place(&mut buf);
    buf
}

/// Inverse transform returning real samples.
pub fn inverse_transform(coeffs: &[Complex64]) -> Vec<f64> {
    inverse_transform_complex(coeffs)
        .into_iter()
        .map(|z| z.re)
        .collect()
}

/// One real-valued function on the grid, held by its spectral coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_samples(grid: Grid, samples: &[f64]) -> Result<Self> {
        let coeffs = forward_transform(&grid, samples)?;
        Ok(Self { grid, coeffs })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().into_iter().map(f).collect();
        Self::from_samples(grid, &samples).expect("sample count matches grid")
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_points() {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                grid.n_points(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn samples(&self) -> Vec<f64> {
        inverse_transform(&self.coeffs)
    }

    /// Spatial mean, the real part of the zero mode.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `sqrt(sum_j |c_j|^2)`, the L2 norm divided by `sqrt(L)`.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.length()).sqrt() * self.coeff_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples().iter().fold(0.0_f64, |m, &u| m.max(u.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// True when the zero mode is negligible relative to the rest of the field.
    pub fn is_mean_zero(&self, rel_tol: f64) -> bool {
        self.coeffs[0].norm() <= rel_tol * self.coeff_norm()
    }

    pub fn require_mean_zero(&self, rel_tol: f64) -> Result<()> {
        if self.is_mean_zero(rel_tol) {
            Ok(())
        } else {
            Err(Error::MeanZeroViolation { mean: self.mean() })
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn axpy(&self, a: f64, other: &Field) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + y * a)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Self {
        self.axpy(-1.0, other)
    }

    /// Largest imaginary sample after inverse transform, relative to the largest real one.
    pub fn realness_defect(&self) -> f64 {
        let z = inverse_transform_complex(&self.coeffs);
        let re = z.iter().fold(0.0_f64, |m, v| m.max(v.re.abs()));
        let im = z.iter().fold(0.0_f64, |m, v| m.max(v.im.abs()));
        if re == 0.0 {
            im
        } else {
            im / re
        }
    }

    /// Largest violation of `c_{-j} = conj(c_j)`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst = self.coeffs[0].im.abs().max(self.coeffs[n / 2].im.abs());
        for i in 1..n / 2 {
            worst = worst.max((self.coeffs[n - i] - self.coeffs[i].conj()).norm());
        }
        worst
    }
}

/// The dispersion symbol `phi(xi) = beta xi^3 + gamma / xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSymbol {
    pub beta: f64,
    pub gamma: f64,
}

impl PhaseSymbol {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma }
    }

    pub fn value(&self, xi: f64) -> Result<f64> {
        if xi == 0.0 {
            return Err(Error::Domain("phase is singular at xi = 0".into()));
        }
        Ok(self.at(xi))
    }

    /// `phi(xi)` without the singularity check; callers guarantee `xi != 0`.
    #[inline]
    pub fn at(&self, xi: f64) -> f64 {
        self.beta * xi * xi * xi + self.gamma / xi
    }

    /// `phi'(xi) = 3 beta xi^2 - gamma / xi^2`.
    #[inline]
    pub fn derivative_at(&self, xi: f64) -> f64 {
        3.0 * self.beta * xi * xi - self.gamma / (xi * xi)
    }

    /// Per-slot values on `grid`, with the zero mode set to 0.
    pub fn table(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_points())
            .map(|i| {
                let xi = grid.wavenumber(i);
                if i == 0 {
                    0.0
                } else if self.gamma == 0.0 {
                    self.beta * xi * xi * xi
                } else {
                    self.at(xi)
                }
            })
            .collect()
    }
}

/// Frequency threshold `a = 2^[A]`, where `[A]` is the largest integer strictly
/// below `A = max{1, |6g/7b|^(1/4), |g/3b|^(1/2), |g/b|, 100|b|, 100|g|}`.
pub fn default_threshold(beta: f64, gamma: f64) -> f64 {
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { (num / den).abs() };
    let a_big = [
        1.0,
        ratio(6.0 * gamma, 7.0 * beta).powf(0.25),
        ratio(gamma, 3.0 * beta).sqrt(),
        ratio(gamma, beta),
        100.0 * beta.abs(),
        100.0 * gamma.abs(),
    ]
    .into_iter()
    .fold(f64::MIN, f64::max);
    let floor = a_big.floor();
    let exponent = if floor == a_big { floor - 1.0 } else { floor };
    2f64.powf(exponent)
}

/// The Fourier multipliers the solver and probes need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierSpec {
    /// `(i xi)^m`; negative orders require mean-zero input.
    Derivative(i32),
    /// `|xi|^alpha`; the zero mode maps to 0 for `alpha < 0`.
    FractionalD(f64),
    /// `<xi>^alpha` with `<xi> = 1 + |xi|`.
    FractionalJ(f64),
    /// Keep `|xi| < cutoff`.
    LowPass(f64),
    /// Keep `|xi| >= cutoff`.
    HighPass(f64),
    /// `exp(-i t phi(xi))`.
    Propagator { symbol: PhaseSymbol, t: f64 },
}

/// Relative zero-mode tolerance used for mean-zero preconditions.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

impl MultiplierSpec {
    fn odd(&self) -> bool {
        match self {
            MultiplierSpec::Derivative(m) => m % 2 != 0,
            MultiplierSpec::Propagator { .. } => true,
            _ => false,
        }
    }

    /// Multiplier value at wavenumber `xi` (zero mode conventions applied when `xi == 0`).
    pub fn value(&self, xi: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            MultiplierSpec::Derivative(m) => {
                if m == 0 {
                    one
                } else if xi == 0.0 {
                    zero
                } else {
                    Complex64::new(0.0, xi).powi(m)
                }
            }
            MultiplierSpec::FractionalD(alpha) => {
                if xi == 0.0 {
                    if alpha == 0.0 {
                        one
                    } else {
                        zero
                    }
                } else {
                    Complex64::new(xi.abs().powf(alpha), 0.0)
                }
            }
            MultiplierSpec::FractionalJ(alpha) => Complex64::new((1.0 + xi.abs()).powf(alpha), 0.0),
            MultiplierSpec::LowPass(cut) => {
                if xi.abs() < cut {
                    one
                } else {
                    zero
                }
            }
            MultiplierSpec::HighPass(cut) => {
                if xi.abs() >= cut {
                    one
                } else {
                    zero
                }
            }
            MultiplierSpec::Propagator { symbol, t } => {
                if xi == 0.0 {
                    one
                } else {
                    let theta = -t * symbol.at(xi);
                    Complex64::new(theta.cos(), theta.sin())
                }
            }
        }
    }

    /// Per-slot multiplier table on `grid`, Nyquist zeroed for odd symbols.
    pub fn table(&self, grid: &Grid) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = (0..grid.n_points())
            .map(|i| self.value(grid.wavenumber(i)))
            .collect();
        if self.odd() {
            out[grid.nyquist_slot()] = Complex64::new(0.0, 0.0);
        }
        out
    }
}

/// Applies a multiplier to a field, enforcing the antiderivative precondition.
pub fn apply_multiplier(field: &Field, spec: &MultiplierSpec) -> Result<Field> {
    if let MultiplierSpec::Derivative(m) = spec {
        if *m < 0 {
            field.require_mean_zero(MEAN_ZERO_TOL)?;
        }
    }
    let table = spec.table(field.grid());
    Ok(Field {
        grid: field.grid,
        coeffs: field.coeffs.iter().zip(&table).map(|(c, m)| c * m).collect(),
    })
}

/// Zeroes the mean; every other mode is untouched.
pub fn project_zero_mean(field: &Field) -> Field {
    let mut out = field.clone();
    out.coeffs[0] = Complex64::new(0.0, 0.0);
    out
}

/// Largest retained `|j|` for a product of degree `degree`: `floor(n / (degree + 1))`.
pub fn dealias_cutoff(n_points: usize, degree: usize) -> usize {
    n_points / (degree + 1)
}

/// Sharp spectral truncation removing aliasing from products of `degree` factors.
pub fn dealias(field: &Field, degree: usize) -> Result<Field> {
    if degree < 2 {
        return Err(Error::Config(format!("product degree must be >= 2, got {degree}")));
    }
    let mut out = field.clone();
    dealias_in_place(&mut out.coeffs, degree);
    Ok(out)
}

pub(crate) fn dealias_in_place(coeffs: &mut [Complex64], degree: usize) {
    let n = coeffs.len();
    let cut = dealias_cutoff(n, degree) as i64;
    for (i, c) in coeffs.iter_mut().enumerate() {
        if signed_index(i, n).abs() > cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}
