//! Sobolev, `X_s`, mixed space-time Lebesgue and discrete Bourgain norms.
//!
//! Spatial integrals use the coefficient convention of [`crate::spectral`], so
//! `||f||_{L2}^2 = L sum_j |c_j|^2`. Space-time tables follow the same rule in
//! both variables: `F_{j,l} = (1/(n n_t)) sum_{m,r} u(x_m, t_r) e^{-i xi_j x_m - i tau_l t_r}`
//! with `tau_l = 2 pi l / T_win`, and `||u||_{L2_{xt}}^2 = L T_win sum |F|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    fft_in_place, forward_transform, inverse_transform, signed_index, Field, Grid, PhaseSymbol,
    MEAN_ZERO_TOL,
};

/// `(L sum_j <xi_j>^{2s} |c_j|^2)^{1/2}` with `<xi> = 1 + |xi|`.
pub fn h_s_norm(field: &Field, s: f64) -> f64 {
    let grid = field.grid();
    let sum: f64 = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (1.0 + grid.wavenumber(i).abs()).powf(2.0 * s) * c.norm_sqr())
        .sum();
    (grid.length() * sum).sqrt()
}

/// `||f||_{H^s} + ||F^{-1}(F f / xi)||_{H^s}`; requires a mean-zero field.
pub fn x_s_norm(field: &Field, s: f64) -> Result<f64> {
    field.require_mean_zero(MEAN_ZERO_TOL)?;
    let grid = field.grid();
    let divided: Vec<Complex64> = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / grid.wavenumber(i)
            }
        })
        .collect();
    let g = Field::from_coeffs(*grid, divided)?;
    Ok(h_s_norm(field, s) + h_s_norm(&g, s))
}

/// Smooth cutoff: 1 on `|t| <= 1`, 0 on `|t| >= 2`, C^2 raised-cosine transition.
pub fn time_cutoff(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let s = a - 1.0;
        1.0 - (s - (2.0 * PI * s).sin() / (2.0 * PI))
    }
}

/// `psi(t / delta)`.
pub fn scaled_time_cutoff(t: f64, delta: f64) -> f64 {
    time_cutoff(t / delta)
}

/// The cutoff stretched so its support `[-2, 2]` covers the window `[0, window]`.
pub fn window_cutoff(t: f64, window: f64) -> f64 {
    time_cutoff(4.0 * t / window - 2.0)
}

/// Real samples `u(x_m, t_r)` on the periodic space-time lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    window: f64,
    n_t: usize,
    /// Row-major by time: `values[r * n + m]`.
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, window: f64, n_t: usize, values: Vec<f64>) -> Result<Self> {
        if n_t < 2 || !n_t.is_multiple_of(2) {
            return Err(Error::Config(format!("n_t must be even and >= 2, got {n_t}")));
        }
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Config(format!("time window must be positive, got {window}")));
        }
        if values.len() != n_t * grid.n_points() {
            return Err(Error::Config(format!(
                "expected {} space-time samples, got {}",
                n_t * grid.n_points(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            window,
            n_t,
            values,
        })
    }

    pub fn from_fn(grid: Grid, window: f64, n_t: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let dt = window / n_t as f64;
        let xs = grid.points();
        let mut values = Vec::with_capacity(n_t * xs.len());
        for r in 0..n_t {
            let t = r as f64 * dt;
            values.extend(xs.iter().map(|&x| f(x, t)));
        }
        Self::new(grid, window, n_t, values)
    }

    /// Builds the table from per-time spatial coefficient rows.
    pub fn from_coeff_rows(grid: Grid, window: f64, rows: &[Vec<Complex64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * grid.n_points());
        for row in rows {
            if row.len() != grid.n_points() {
                return Err(Error::Config("coefficient row length mismatch".into()));
            }
            values.extend(inverse_transform(row));
        }
        Self::new(grid, window, rows.len(), values)
    }

    /// Samples the free evolution `U(t) u0` on the window.
    pub fn from_propagator(u0: &Field, symbol: &PhaseSymbol, window: f64, n_t: usize) -> Result<Self> {
        Self::from_modulated_propagator(u0, symbol, window, n_t, |_| 1.0)
    }

    /// Samples `chi(t) U(t) u0` on the window for a scalar time profile `chi`.
    pub fn from_modulated_propagator(
        u0: &Field,
        symbol: &PhaseSymbol,
        window: f64,
        n_t: usize,
        chi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let grid = *u0.grid();
        let phi = symbol.table(&grid);
        let nyq = grid.nyquist_slot();
        let dt = window / n_t as f64;
        let rows: Vec<Vec<Complex64>> = (0..n_t)
            .map(|r| {
                let t = r as f64 * dt;
                let amp = chi(t);
                u0.coeffs()
                    .iter()
                    .zip(&phi)
                    .enumerate()
                    .map(|(i, (c, p))| {
                        if i == nyq && i != 0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            c * Complex64::from_polar(amp, -t * p)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::from_coeff_rows(grid, window, &rows)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn window(&self) -> f64 {
        self.window
    }

    #[inline]
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.window / self.n_t as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.grid.n_points();
        &self.values[r * n..(r + 1) * n]
    }

    #[inline]
    pub fn at(&self, r: usize, m: usize) -> f64 {
        self.values[r * self.grid.n_points() + m]
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_t).map(|r| r as f64 * dt).collect()
    }

    /// Temporal frequency of time slot `l`.
    pub fn tau(&self, l: usize) -> f64 {
        2.0 * PI * signed_index(l, self.n_t) as f64 / self.window
    }

    /// Spatial coefficient rows `c_j(t_r)`.
    pub fn coeff_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.n_t)
            .map(|r| forward_transform(&self.grid, self.row(r)).expect("row length matches grid"))
            .collect()
    }

    /// Normalized 2-D DFT table, indexed `[j_slot * n_t + l_slot]`.
    pub fn spectral_table(&self) -> SpectralTable {
        SpectralTable::from_coeff_rows(self.grid, self.window, &self.coeff_rows())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

/// 2-D spectral table of a space-time field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    grid: Grid,
    window: f64,
    n_t: usize,
    data: Vec<Complex64>,
}

impl SpectralTable {
    pub fn from_coeff_rows(grid: Grid, window: f64, rows: &[Vec<Complex64>]) -> Self {
        let n = grid.n_points();
        let n_t = rows.len();
        let scale = 1.0 / n_t as f64;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n_t];
        let mut column = vec![Complex64::new(0.0, 0.0); n_t];
        for j in 0..n {
            for (r, row) in rows.iter().enumerate() {
                column[r] = row[j];
            }
            fft_in_place(&mut column);
            for (l, c) in column.iter().enumerate() {
                data[j * n_t + l] = c * scale;
            }
        }
        Self {
            grid,
            window,
            n_t,
            data,
        }
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize) -> Complex64 {
        self.data[j * self.n_t + l]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn tau(&self, l: usize) -> f64 {
        2.0 * PI * signed_index(l, self.n_t) as f64 / self.window
    }

    /// Applies a spatial multiplier to every column, e.g. `1/(i xi)`.
    pub fn map_spatial(&self, m: impl Fn(usize, f64) -> Complex64) -> Self {
        let mut out = self.clone();
        for j in 0..self.grid.n_points() {
            let w = m(j, self.grid.wavenumber(j));
            for l in 0..self.n_t {
                out.data[j * self.n_t + l] *= w;
            }
        }
        out
    }
}

/// Modulation weights `<sigma>_{j,l} = 1 + |tau_l + phi(xi_j)|` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationWeight {
    n_t: usize,
    values: Vec<f64>,
}

impl ModulationWeight {
    pub fn new(grid: &Grid, window: f64, n_t: usize, symbol: &PhaseSymbol) -> Self {
        let phi = symbol.table(grid);
        let mut values = Vec::with_capacity(grid.n_points() * n_t);
        for p in &phi {
            for l in 0..n_t {
                let tau = 2.0 * PI * signed_index(l, n_t) as f64 / window;
                values.push(1.0 + (tau + p).abs());
            }
        }
        Self { n_t, values }
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.values[j * self.n_t + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Discrete Bourgain norm of a precomputed spectral table.
pub fn xsb_norm_of_table(table: &SpectralTable, s: f64, b: f64, symbol: &PhaseSymbol) -> f64 {
    let grid = table.grid();
    let weight = ModulationWeight::new(grid, table.window(), table.n_t(), symbol);
    let mut sum = 0.0;
    for j in 0..grid.n_points() {
        let wx = (1.0 + grid.wavenumber(j).abs()).powf(2.0 * s);
        let mut col = 0.0;
        for l in 0..table.n_t() {
            let c = table.get(j, l);
            if c.re != 0.0 || c.im != 0.0 {
                col += weight.get(j, l).powf(2.0 * b) * c.norm_sqr();
            }
        }
        sum += wx * col;
    }
    (grid.length() * table.window() * sum).sqrt()
}

/// `[L T sum <xi>^{2s} <sigma>^{2b} |F u|^2]^{1/2}`.
pub fn xsb_norm(stf: &SpaceTimeField, s: f64, b: f64, symbol: &PhaseSymbol) -> f64 {
    xsb_norm_of_table(&stf.spectral_table(), s, b, symbol)
}

/// `||u||_{X_{s,b}} + ||dx^{-1} u||_{X_{s,b}}`; every time slice must be mean-zero.
pub fn xsb_tilde_norm(stf: &SpaceTimeField, s: f64, b: f64, symbol: &PhaseSymbol) -> Result<f64> {
    let table = stf.spectral_table();
    let scale = (0..table.n_t())
        .map(|l| table.get(0, l).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let total = (0..stf.grid().n_points() * table.n_t())
        .map(|i| table.data[i].norm_sqr())
        .sum::<f64>()
        .sqrt();
    if scale > MEAN_ZERO_TOL * total {
        let mean = stf.values().iter().sum::<f64>() / stf.values().len() as f64;
        return Err(Error::MeanZeroViolation { mean });
    }
    let anti = table.map_spatial(|j, xi| {
        if j == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / xi)
        }
    });
    Ok(xsb_norm_of_table(&table, s, b, symbol) + xsb_norm_of_table(&anti, s, b, symbol))
}

/// Which variable carries the outer exponent of a mixed norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    /// `L^p_x L^q_t`: inner norm over `t`, outer over `x`.
    XOuter,
    /// `L^p_t L^q_x`: inner norm over `x`, outer over `t`.
    TOuter,
}

/// Riemann-sum `L^p` norm with cell measure `measure`; `p = inf` takes the maximum.
pub fn lp_norm(values: impl Iterator<Item = f64> + Clone, p: f64, measure: f64) -> f64 {
    let max = values.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    let sum: f64 = values.map(|v| (v.abs() / max).powf(p)).sum();
    max * (sum * measure).powf(1.0 / p)
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Lebesgue exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// Mixed norm with outer exponent `p` and inner exponent `q`.
pub fn mixed_norm(stf: &SpaceTimeField, p: f64, q: f64, order: NormOrder) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    let n = stf.grid().n_points();
    let n_t = stf.n_t();
    let dx = stf.grid().dx();
    let dt = stf.dt();
    let inner: Vec<f64> = match order {
        NormOrder::TOuter => (0..n_t)
            .map(|r| lp_norm(stf.row(r).iter().copied(), q, dx))
            .collect(),
        NormOrder::XOuter => (0..n)
            .map(|m| lp_norm((0..n_t).map(|r| stf.at(r, m)), q, dt))
            .collect(),
    };
    let outer_measure = match order {
        NormOrder::TOuter => dt,
        NormOrder::XOuter => dx,
    };
    Ok(lp_norm(inner.iter().copied(), p, outer_measure))
}

/// Serialized norm report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub norm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub value: f64,
}

impl NormRecord {
    pub fn xsb(s: f64, b: f64, value: f64) -> Self {
        Self {
            norm: "Xsb".into(),
            s: Some(s),
            b: Some(b),
            value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{apply_multiplier, MultiplierSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g2pi(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn random_field(grid: Grid, seed: u64, mean_zero: bool) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..grid.n_points()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Field::from_samples(grid, &s).unwrap();
        if mean_zero {
            crate::spectral::project_zero_mean(&f)
        } else {
            f
        }
    }

    fn random_stf(grid: Grid, window: f64, n_t: usize, seed: u64) -> SpaceTimeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..grid.n_points() * n_t)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        SpaceTimeField::new(grid, window, n_t, v).unwrap()
    }

    #[test]
    fn h_s_of_cosine() {
        let f = Field::from_fn(g2pi(64), f64::cos);
        assert_abs_diff_eq!(h_s_norm(&f, 0.0), PI.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(h_s_norm(&f, 1.0), 2.0 * PI.sqrt(), epsilon = 1e-13);
        let z = Field::zeros(g2pi(64));
        assert_eq!(h_s_norm(&z, 3.0), 0.0);
    }

    #[test]
    fn x_s_of_cosines() {
        let f = Field::from_fn(g2pi(64), f64::cos);
        assert_abs_diff_eq!(x_s_norm(&f, 0.0).unwrap(), 2.0 * PI.sqrt(), epsilon = 1e-13);
        let f2 = Field::from_fn(g2pi(64), |x| (2.0 * x).cos());
        assert_abs_diff_eq!(
            x_s_norm(&f2, 0.0).unwrap(),
            PI.sqrt() * 1.5,
            epsilon = 1e-13
        );
        let bad = Field::from_fn(g2pi(64), |x| 1.0 + x.cos());
        assert!(matches!(x_s_norm(&bad, 0.0), Err(Error::MeanZeroViolation { .. })));
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(time_cutoff(0.3), 1.0);
        assert_eq!(time_cutoff(-1.0), 1.0);
        assert_eq!(time_cutoff(2.5), 0.0);
        assert_abs_diff_eq!(time_cutoff(1.5), 0.5, epsilon = 1e-15);
        // C^2 at the junctions: one-sided second differences vanish.
        let h = 1e-4;
        for t0 in [1.0, 2.0] {
            let d2 = (time_cutoff(t0 + 2.0 * h) - 2.0 * time_cutoff(t0 + h) + time_cutoff(t0)) / (h * h);
            assert!(d2.abs() < 1e-2, "second derivative {d2} at {t0}");
        }
        assert_eq!(scaled_time_cutoff(0.05, 0.05), 1.0);
        assert_eq!(window_cutoff(0.0, 3.0), 0.0);
        assert_eq!(window_cutoff(1.5, 3.0), 1.0);
    }

    #[test]
    fn mixed_norm_of_constant() {
        let stf = SpaceTimeField::from_fn(g2pi(32), 1.0, 16, |_, _| 1.0).unwrap();
        for order in [NormOrder::XOuter, NormOrder::TOuter] {
            assert_abs_diff_eq!(
                mixed_norm(&stf, 2.0, 2.0, order).unwrap(),
                (2.0 * PI).sqrt(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn mixed_norm_sup_in_time() {
        for window in [1.0, 7.0] {
            let stf = SpaceTimeField::from_fn(g2pi(64), window, 8, |x, _| x.sin()).unwrap();
            let v = mixed_norm(&stf, f64::INFINITY, 2.0, NormOrder::TOuter).unwrap();
            assert_abs_diff_eq!(v, PI.sqrt(), epsilon = 1e-13);
        }
    }

    #[test]
    fn mixed_norm_random_matches_direct_sum() {
        let stf = random_stf(Grid::new(64, 3.0).unwrap(), 2.0, 32, 9);
        let direct = (stf.values().iter().map(|v| v * v).sum::<f64>() * stf.grid().dx() * stf.dt()).sqrt();
        for order in [NormOrder::XOuter, NormOrder::TOuter] {
            let v = mixed_norm(&stf, 2.0, 2.0, order).unwrap();
            assert!((v - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn mixed_norm_rejects_small_exponents() {
        let stf = random_stf(g2pi(8), 1.0, 4, 1);
        assert!(matches!(mixed_norm(&stf, 0.5, 2.0, NormOrder::XOuter), Err(Error::Domain(_))));
        assert!(matches!(mixed_norm(&stf, 2.0, 0.9, NormOrder::TOuter), Err(Error::Domain(_))));
    }

    #[test]
    fn xsb_zero_and_parseval() {
        let symbol = PhaseSymbol::new(-1.0, 1.0);
        let z = SpaceTimeField::from_fn(g2pi(16), 1.0, 8, |_, _| 0.0).unwrap();
        assert_eq!(xsb_norm(&z, 1.0, 0.6, &symbol), 0.0);
        let stf = random_stf(Grid::new(32, 5.0).unwrap(), 1.5, 16, 4);
        let a = xsb_norm(&stf, 0.0, 0.0, &symbol);
        let b = mixed_norm(&stf, 2.0, 2.0, NormOrder::XOuter).unwrap();
        assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn xsb_of_free_evolution_with_b_zero() {
        let grid = Grid::new(128, 20.0).unwrap();
        let symbol = PhaseSymbol::new(-1.0, 1.0);
        let u0 = crate::spectral::project_zero_mean(&Field::from_fn(grid, |x| (-(x - 10.0).powi(2)).exp()));
        let window = 2.0;
        let stf = SpaceTimeField::from_propagator(&u0, &symbol, window, 64).unwrap();
        for s in [0.0, 0.5, 2.0] {
            let lhs = xsb_norm(&stf, s, 0.0, &symbol);
            let rhs = window.sqrt() * h_s_norm(&u0, s);
            assert!((lhs - rhs).abs() <= 0.02 * rhs, "s={s}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn free_evolution_concentrates_on_characteristic() {
        // A single mode whose frequency sits on the temporal lattice lands in one cell with sigma = 0.
        let grid = g2pi(16);
        let symbol = PhaseSymbol::new(-1.0, 0.0);
        let u0 = Field::from_fn(grid, |x| (2.0 * x).cos());
        let window = 2.0 * PI;
        let stf = SpaceTimeField::from_propagator(&u0, &symbol, window, 32).unwrap();
        let plain = xsb_norm(&stf, 0.0, 0.0, &symbol);
        let weighted = xsb_norm(&stf, 0.0, 3.0, &symbol);
        assert!((plain - weighted).abs() <= 1e-10 * plain);
    }

    #[test]
    fn tilde_norm_adds_antiderivative() {
        let grid = g2pi(32);
        let symbol = PhaseSymbol::new(-1.0, 1.0);
        let stf = SpaceTimeField::from_fn(grid, 1.0, 8, |x, t| (2.0 * x - t).cos()).unwrap();
        let plain = xsb_norm(&stf, 0.0, 0.0, &symbol);
        let tilde = xsb_tilde_norm(&stf, 0.0, 0.0, &symbol).unwrap();
        assert_abs_diff_eq!(tilde, 1.5 * plain, epsilon = 1e-12);
        let biased = stf.map(|v| v + 1.0);
        assert!(xsb_tilde_norm(&biased, 0.0, 0.0, &symbol).is_err());
    }

    #[test]
    fn modulation_weight_at_least_one() {
        let grid = Grid::new(16, 3.0).unwrap();
        let w = ModulationWeight::new(&grid, 2.0, 8, &PhaseSymbol::new(-1.0, 1.0));
        assert!(w.values().iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn norm_record_json() {
        let r = NormRecord::xsb(1.0, 0.5, 2.25);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"norm":"Xsb","s":1.0,"b":0.5,"value":2.25}"#);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn h_s_monotone_and_x_s_dominates(seed in any::<u64>(), s1 in -1.0f64..2.0, ds in 0.0f64..2.0) {
            let f = random_field(Grid::new(64, 9.0).unwrap(), seed, true);
            prop_assert!(h_s_norm(&f, s1) <= h_s_norm(&f, s1 + ds) * (1.0 + 1e-14));
            prop_assert!(x_s_norm(&f, s1).unwrap() >= h_s_norm(&f, s1));
        }

        #[test]
        fn triangle_inequalities(seed in any::<u64>(), s in 0.0f64..2.0, b in 0.0f64..1.0) {
            let grid = Grid::new(32, 6.0).unwrap();
            let f = random_field(grid, seed, true);
            let g = random_field(grid, seed ^ 0x55, true);
            let sum = f.axpy(1.0, &g);
            prop_assert!(h_s_norm(&sum, s) <= h_s_norm(&f, s) + h_s_norm(&g, s) + 1e-10);
            prop_assert!(x_s_norm(&sum, s).unwrap() <= x_s_norm(&f, s).unwrap() + x_s_norm(&g, s).unwrap() + 1e-10);

            let symbol = PhaseSymbol::new(-1.0, 0.5);
            let a = random_stf(grid, 2.0, 8, seed);
            let c = random_stf(grid, 2.0, 8, seed.wrapping_add(1));
            let ac = SpaceTimeField::new(grid, 2.0, 8, a.values().iter().zip(c.values()).map(|(x, y)| x + y).collect()).unwrap();
            prop_assert!(xsb_norm(&ac, s, b, &symbol) <= xsb_norm(&a, s, b, &symbol) + xsb_norm(&c, s, b, &symbol) + 1e-10);
            for (p, q) in [(2.0, 4.0), (f64::INFINITY, 2.0), (3.0, f64::INFINITY)] {
                for order in [NormOrder::XOuter, NormOrder::TOuter] {
                    let lhs = mixed_norm(&ac, p, q, order).unwrap();
                    let rhs = mixed_norm(&a, p, q, order).unwrap() + mixed_norm(&c, p, q, order).unwrap();
                    prop_assert!(lhs <= rhs + 1e-10);
                }
            }
        }

        #[test]
        fn xsb_is_translation_invariant(seed in any::<u64>(), shift in 0.0f64..10.0, s in 0.0f64..2.0, b in 0.0f64..1.0) {
            let grid = Grid::new(64, 10.0).unwrap();
            let symbol = PhaseSymbol::new(-1.0, 1.0);
            let u0 = random_field(grid, seed, true);
            let window = 1.0;
            let stf = SpaceTimeField::from_modulated_propagator(&u0, &symbol, window, 16, |t| window_cutoff(t, window)).unwrap();
            // Translate every time slice by `shift` via the exact spectral shift.
            let rows: Vec<Vec<Complex64>> = stf.coeff_rows().into_iter().map(|row| {
                row.iter().enumerate().map(|(i, c)| {
                    let xi = grid.wavenumber(i);
                    if i == grid.nyquist_slot() { *c } else { c * Complex64::from_polar(1.0, -xi * shift) }
                }).collect()
            }).collect();
            let moved = SpaceTimeField::from_coeff_rows(grid, window, &rows).unwrap();
            let a = xsb_norm(&stf, s, b, &symbol);
            let m = xsb_norm(&moved, s, b, &symbol);
            prop_assert!((a - m).abs() <= 1e-10 * a);
            let _ = apply_multiplier(&u0, &MultiplierSpec::Derivative(1)).unwrap();
        }
    }
}
