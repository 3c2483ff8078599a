//! Monte-Carlo ratio tests for the linear, bilinear and multilinear estimates.
//!
//! Every probe draws an ensemble of inputs, evaluates `LHS / RHS` per draw and
//! repeats the ensemble on refined lattices; a uniform constant shows up as a
//! maximum ratio that stays put under refinement.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{mixed_norm, window_cutoff, xsb_norm_of_table, NormOrder, SpaceTimeField, SpectralTable};
use crate::spectral::{fft_in_place, ifft_in_place, signed_index, Field, Grid, PhaseSymbol};

/// Default `epsilon` wherever an estimate exponent depends on it.
pub const DEFAULT_EPS: f64 = 1e-3;

/// Default modulation exponent for the Bourgain right-hand sides.
pub const DEFAULT_B: f64 = 0.5 + 1.0 / 48.0;

/// Refinement factor above which a constant is reported unstable.
pub const STABILITY_FACTOR: f64 = 4.0;

/// Largest multilinear lattice (cells per factor).
pub const MULTILINEAR_MAX_CELLS: usize = 256 * 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateTag {
    /// `||U(t) u0||_{L^8_{xt}} <= C ||u0||_{L^2}`.
    Strichartz,
    /// `||D^{1/6} P^a u||_{L^6_{xt}} <= C ||u||_{X_{0,b}}`.
    Smoothing6,
    /// `||D P^a u||_{L^inf_x L^2_t} <= C ||u||_{X_{0,b}}`.
    LocalSmoothing,
    /// `||D^{s1} psi P_M u||_{L^2_x L^inf_t} <= C ||u||_{X_{0,b}}`.
    Maximal,
    /// Bilinear smoothing with weight `|phi'(xi1) - phi'(xi2)|^{1/2}`.
    Bilinear,
    /// `||psi u||_{L^inf_{xt}} <= C N^{1/4 - eps} ||u||_{X_{0,b}}` on `[N, 4N]`.
    BlockSup,
    /// `||psi u||_{L^{2/(1-2eps)}_x L^inf_t} <= C ||D^{-1/4} u||_{X_{0,b}}` on `(0, a]`.
    LowMaximal,
    /// `||D^{-1/2-4eps} P^a u||_{L^inf_{xt}} <= C ||u||_{X_{0,b}}`.
    HighSup,
    /// The weighted `(k+2)`-fold convolution bound.
    Multilinear,
}

impl EstimateTag {
    pub const ALL: [EstimateTag; 9] = [
        EstimateTag::Strichartz,
        EstimateTag::Smoothing6,
        EstimateTag::LocalSmoothing,
        EstimateTag::Maximal,
        EstimateTag::Bilinear,
        EstimateTag::BlockSup,
        EstimateTag::LowMaximal,
        EstimateTag::HighSup,
        EstimateTag::Multilinear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateTag::Strichartz => "2.03",
            EstimateTag::Smoothing6 => "2.05",
            EstimateTag::LocalSmoothing => "2.08",
            EstimateTag::Maximal => "2.09",
            EstimateTag::Bilinear => "2.027",
            EstimateTag::BlockSup => "2.055",
            EstimateTag::LowMaximal => "2.057",
            EstimateTag::HighSup => "2.060",
            EstimateTag::Multilinear => "3.03",
        }
    }

    pub fn valid_tags() -> String {
        Self::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for EstimateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimateTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown estimate tag '{s}'; valid tags: {}", Self::valid_tags())))
    }
}

/// Distribution of the random initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataLaw {
    /// Complex Gaussian coefficients with envelope `exp(-decay xi^2)`.
    GaussianSpectrum { decay: f64 },
    /// Complex Gaussian coefficients on `N <= |xi| <= 4N`.
    BandLimited { n_block: f64 },
    /// Complex Gaussian coefficients on `0 < |xi| <= cutoff`.
    LowFrequency { cutoff: f64 },
    /// Complex Gaussian coefficients on `|xi| >= cutoff`, envelope `exp(-decay (|xi| - cutoff)^2)`.
    HighFrequency { cutoff: f64, decay: f64 },
}

const ENVELOPE_FLOOR: f64 = 1e-16;

impl DataLaw {
    pub fn envelope(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a == 0.0 {
            return 0.0;
        }
        let v = match *self {
            DataLaw::GaussianSpectrum { decay } => (-decay * a * a).exp(),
            DataLaw::BandLimited { n_block } => f64::from(a >= n_block && a <= 4.0 * n_block),
            DataLaw::LowFrequency { cutoff } => f64::from(a <= cutoff),
            DataLaw::HighFrequency { cutoff, decay } => {
                if a >= cutoff {
                    (-decay * (a - cutoff).powi(2)).exp()
                } else {
                    0.0
                }
            }
        };
        if v < ENVELOPE_FLOOR {
            0.0
        } else {
            v
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DataLaw::GaussianSpectrum { decay } => decay > 0.0,
            DataLaw::BandLimited { n_block } => n_block > 0.0,
            DataLaw::LowFrequency { cutoff } => cutoff > 0.0,
            DataLaw::HighFrequency { cutoff, decay } => cutoff > 0.0 && decay > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid data law {self:?}")))
        }
    }
}

/// Reproducible family of random initial data on a periodic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub n_draws: usize,
    pub law: DataLaw,
    pub n_points: usize,
    pub length: f64,
    /// Time window of the space-time lattice.
    pub window: f64,
    /// Lower bound for the number of time samples.
    pub n_t_min: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Overall factor applied to every draw.
    pub amplitude: f64,
}

impl Ensemble {
    pub fn new(seed: u64, n_draws: usize, law: DataLaw, grid: Grid, window: f64, beta: f64, gamma: f64) -> Result<Self> {
        let e = Self {
            seed,
            n_draws,
            law,
            n_points: grid.n_points(),
            length: grid.length(),
            window,
            n_t_min: 64,
            beta,
            gamma,
            amplitude: 1.0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        Grid::new(self.n_points, self.length)?;
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be positive".into()));
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::Config(format!("window must be positive, got {}", self.window)));
        }
        if !self.beta.is_finite() || !self.gamma.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::Config("beta, gamma and amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n_points, self.length).expect("validated grid")
    }

    pub fn symbol(&self) -> PhaseSymbol {
        PhaseSymbol::new(self.beta, self.gamma)
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_law(mut self, law: DataLaw) -> Self {
        self.law = law;
        self
    }

    /// Same box, twice the spatial resolution.
    pub fn refined_grid(&self) -> Self {
        Self {
            n_points: 2 * self.n_points,
            ..self.clone()
        }
    }

    /// Twice the time window.
    pub fn refined_window(&self) -> Self {
        Self {
            window: 2.0 * self.window,
            n_t_min: 2 * self.n_t_min,
            ..self.clone()
        }
    }

    /// Time samples: at least `n_t_min`, and at least eight per period of the fastest supported phase.
    pub fn n_t(&self) -> usize {
        let grid = self.grid();
        let sym = self.symbol();
        let fastest = (1..grid.nyquist_slot())
            .map(|i| grid.wavenumber(i))
            .filter(|&xi| self.law.envelope(xi) > 0.0)
            .map(|xi| sym.at(xi).abs())
            .fold(0.0, f64::max);
        let need = (4.0 * self.window * fastest / PI).ceil() as usize;
        need.max(self.n_t_min).max(2).next_power_of_two()
    }

    /// Draw `i`: modes are filled in order of increasing `|j|`, so a coarse draw is a truncation of the fine one.
    pub fn draw(&self, i: usize) -> Field {
        let grid = self.grid();
        let n = grid.n_points();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for m in 1..n / 2 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let env = self.law.envelope(grid.wavenumber(m));
            let c = Complex64::new(re, im) * (self.amplitude * env / SQRT_2);
            coeffs[m] = c;
            coeffs[n - m] = c.conj();
        }
        Field::from_coeffs(grid, coeffs).expect("hermitian coefficients")
    }
}

/// Per-draw ratios on one lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub label: String,
    pub n_points: usize,
    pub length: f64,
    pub window: f64,
    pub n_t: usize,
    pub max_ratio: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub tag: String,
    /// Indices of the evaluated draws on the base lattice.
    pub draws: Vec<usize>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub skipped: usize,
    pub levels: Vec<RefinementLevel>,
    /// `max / min` of the per-level maximum ratios.
    pub refinement_factor: f64,
    pub stable: bool,
    /// Two successive grid doublings both raised the maximum ratio by more than 1.5x.
    pub geometric_growth: bool,
}

impl RatioReport {
    pub fn all_finite_nonnegative(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite() && *r >= 0.0)
    }
}

struct LevelResult {
    draws: Vec<usize>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    skipped: usize,
}

impl LevelResult {
    fn from_pairs(pairs: Vec<Result<Option<(f64, f64)>>>) -> Result<Self> {
        let mut out = LevelResult {
            draws: Vec::new(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            skipped: 0,
        };
        for (i, p) in pairs.into_iter().enumerate() {
            match p? {
                Some((l, r)) if r > 0.0 && r.is_finite() && l.is_finite() => {
                    out.draws.push(i);
                    out.lhs.push(l);
                    out.rhs.push(r);
                }
                _ => out.skipped += 1,
            }
        }
        Ok(out)
    }

    fn max_ratio(&self) -> f64 {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| l / r).fold(0.0, f64::max)
    }
}

fn assemble(tag: EstimateTag, levels: Vec<(String, usize, f64, f64, usize, LevelResult)>) -> RatioReport {
    let base = &levels[0].5;
    let ratios: Vec<f64> = base.lhs.iter().zip(&base.rhs).map(|(l, r)| l / r).collect();
    let lv: Vec<RefinementLevel> = levels
        .iter()
        .map(|(label, n, length, window, n_t, res)| RefinementLevel {
            label: label.clone(),
            n_points: *n,
            length: *length,
            window: *window,
            n_t: *n_t,
            max_ratio: res.max_ratio(),
            skipped: res.skipped,
        })
        .collect();
    let hi = lv.iter().map(|l| l.max_ratio).fold(0.0, f64::max);
    let lo = lv.iter().map(|l| l.max_ratio).fold(f64::INFINITY, f64::min);
    let refinement_factor = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let grid_levels: Vec<f64> = lv.iter().filter(|l| l.label.starts_with("grid") || l.label == "base").map(|l| l.max_ratio).collect();
    let geometric_growth = grid_levels.len() >= 3 && grid_levels.windows(2).all(|w| w[1] > 1.5 * w[0]);
    RatioReport {
        tag: tag.as_str().to_string(),
        draws: base.draws.clone(),
        lhs: base.lhs.clone(),
        rhs: base.rhs.clone(),
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
        skipped: base.skipped,
        levels: lv,
        refinement_factor,
        stable: refinement_factor.is_finite() && refinement_factor <= STABILITY_FACTOR,
        geometric_growth,
    }
}

/// Runs `eval` on the base ensemble, two grid doublings and one window doubling.
fn refine(tag: EstimateTag, ens: &Ensemble, eval: impl Fn(&Ensemble) -> Result<LevelResult>) -> Result<RatioReport> {
    ens.validate()?;
    let g1 = ens.refined_grid();
    let g2 = g1.refined_grid();
    let w1 = ens.refined_window();
    let mut levels = Vec::new();
    for (label, e) in [("base", ens), ("grid x2", &g1), ("grid x4", &g2), ("window x2", &w1)] {
        let res = eval(e)?;
        levels.push((label.to_string(), e.n_points, e.length, e.window, e.n_t(), res));
    }
    Ok(assemble(tag, levels))
}

/// Tunable exponents shared by the linear probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub b: f64,
    pub eps: f64,
    /// Frequency threshold `a`.
    pub threshold: f64,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            b: DEFAULT_B,
            eps: DEFAULT_EPS,
            threshold: 1.0,
        }
    }
}

/// `chi(t) m(xi) exp(-i t phi(xi)) u0` on the space-time lattice of `ens`.
fn propagated(ens: &Ensemble, u0: &Field, chi: impl Fn(f64) -> f64, m: impl Fn(f64) -> f64) -> Result<SpaceTimeField> {
    let grid = *u0.grid();
    let phi = ens.symbol().table(&grid);
    let n_t = ens.n_t();
    let dt = ens.window / n_t as f64;
    let nyq = grid.nyquist_slot();
    let weights: Vec<f64> = (0..grid.n_points()).map(|j| if j == 0 || j == nyq { 0.0 } else { m(grid.wavenumber(j)) }).collect();
    let rows: Vec<Vec<Complex64>> = (0..n_t)
        .map(|r| {
            let t = r as f64 * dt;
            let a = chi(t);
            u0.coeffs()
                .iter()
                .zip(&phi)
                .zip(&weights)
                .map(|((c, p), w)| if *w == 0.0 { Complex64::new(0.0, 0.0) } else { c * Complex64::from_polar(a * w, -t * p) })
                .collect()
        })
        .collect();
    SpaceTimeField::from_coeff_rows(grid, ens.window, &rows)
}

fn windowed_table(ens: &Ensemble, u0: &Field) -> Result<SpectralTable> {
    let w = ens.window;
    Ok(propagated(ens, u0, |t| window_cutoff(t, w), |_| 1.0)?.spectral_table())
}

fn check_law(tag: EstimateTag, law: &DataLaw, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("estimate {tag} does not accept data law {law:?}")))
    }
}

/// Ratio probe for the linear space-time estimates `2.03`, `2.05`, `2.08` and `2.09`.
pub fn strichartz_ratio(ens: &Ensemble, tag: EstimateTag, params: &EstimateParams) -> Result<RatioReport> {
    let a = params.threshold;
    match tag {
        EstimateTag::Strichartz | EstimateTag::Smoothing6 | EstimateTag::LocalSmoothing => {}
        EstimateTag::Maximal => check_law(tag, &ens.law, matches!(ens.law, DataLaw::LowFrequency { cutoff } if cutoff <= 1.0))?,
        _ => return Err(Error::Config(format!("{tag} is not a linear space-time estimate"))),
    }
    let s1 = 0.25 + params.eps;
    let b = params.b;
    refine(tag, ens, |e| {
        let sym = e.symbol();
        let w = e.window;
        let pairs: Vec<Result<Option<(f64, f64)>>> = (0..e.n_draws)
            .into_par_iter()
            .map(|i| {
                let u0 = e.draw(i);
                let (lhs, rhs) = match tag {
                    EstimateTag::Strichartz => {
                        let u = propagated(e, &u0, |_| 1.0, |_| 1.0)?;
                        (mixed_norm(&u, 8.0, 8.0, NormOrder::XOuter)?, u0.l2_norm())
                    }
                    EstimateTag::Smoothing6 => {
                        let u = propagated(e, &u0, |t| window_cutoff(t, w), |xi| if xi.abs() >= a { xi.abs().powf(1.0 / 6.0) } else { 0.0 })?;
                        (mixed_norm(&u, 6.0, 6.0, NormOrder::XOuter)?, xsb_norm_of_table(&windowed_table(e, &u0)?, 0.0, b, &sym))
                    }
                    EstimateTag::LocalSmoothing => {
                        let u = propagated(e, &u0, |t| window_cutoff(t, w), |xi| if xi.abs() >= a { xi.abs() } else { 0.0 })?;
                        (mixed_norm(&u, f64::INFINITY, 2.0, NormOrder::XOuter)?, xsb_norm_of_table(&windowed_table(e, &u0)?, 0.0, b, &sym))
                    }
                    _ => {
                        let u = propagated(e, &u0, |t| window_cutoff(t, w).powi(2), |xi| xi.abs().powf(s1))?;
                        (mixed_norm(&u, 2.0, f64::INFINITY, NormOrder::XOuter)?, xsb_norm_of_table(&windowed_table(e, &u0)?, 0.0, b, &sym))
                    }
                };
                Ok(Some((lhs, rhs)))
            })
            .collect();
        LevelResult::from_pairs(pairs)
    })
}

/// Ratio probe for the `L^inf`-type bounds `2.055`, `2.057` and `2.060`.
///
/// For `2.055` the reported ratio already carries the factor `N^{1/4 - eps}` in its denominator.
pub fn linfty_bounds_ratio(ens: &Ensemble, tag: EstimateTag, params: &EstimateParams) -> Result<RatioReport> {
    let a = params.threshold;
    let eps = params.eps;
    let b = params.b;
    match tag {
        EstimateTag::BlockSup => check_law(tag, &ens.law, matches!(ens.law, DataLaw::BandLimited { .. }))?,
        EstimateTag::LowMaximal => check_law(tag, &ens.law, matches!(ens.law, DataLaw::LowFrequency { cutoff } if cutoff <= a))?,
        EstimateTag::HighSup => check_law(tag, &ens.law, matches!(ens.law, DataLaw::HighFrequency { cutoff, .. } if cutoff >= a))?,
        _ => return Err(Error::Config(format!("{tag} is not an L-infinity bound"))),
    }
    refine(tag, ens, |e| {
        let sym = e.symbol();
        let w = e.window;
        let pairs: Vec<Result<Option<(f64, f64)>>> = (0..e.n_draws)
            .into_par_iter()
            .map(|i| {
                let u0 = e.draw(i);
                let table = windowed_table(e, &u0)?;
                let (lhs, rhs) = match tag {
                    EstimateTag::BlockSup => {
                        let n_block = match e.law {
                            DataLaw::BandLimited { n_block } => n_block,
                            _ => unreachable!(),
                        };
                        let u = propagated(e, &u0, |t| window_cutoff(t, w).powi(2), |_| 1.0)?;
                        let lhs = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        (lhs, n_block.powf(0.25 - eps) * xsb_norm_of_table(&table, 0.0, b, &sym))
                    }
                    EstimateTag::LowMaximal => {
                        let u = propagated(e, &u0, |t| window_cutoff(t, w).powi(2), |_| 1.0)?;
                        let lhs = mixed_norm(&u, 2.0 / (1.0 - 2.0 * eps), f64::INFINITY, NormOrder::XOuter)?;
                        let weighted = table.map_spatial(|j, xi| {
                            if j == 0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                Complex64::new(xi.abs().powf(-0.25), 0.0)
                            }
                        });
                        (lhs, xsb_norm_of_table(&weighted, 0.0, b, &sym))
                    }
                    _ => {
                        let u = propagated(e, &u0, |t| window_cutoff(t, w), |xi| {
                            if xi.abs() >= a {
                                xi.abs().powf(-0.5 - 4.0 * eps)
                            } else {
                                0.0
                            }
                        })?;
                        let lhs = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        (lhs, xsb_norm_of_table(&table, 0.0, b, &sym))
                    }
                };
                Ok(Some((lhs, rhs)))
            })
            .collect();
        LevelResult::from_pairs(pairs)
    })
}

/// Signed mode indices and coefficients of the nonzero spectrum.
fn support(f: &Field) -> Vec<(i64, Complex64)> {
    let n = f.grid().n_points();
    f.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(i, c)| (signed_index(i, n), *c))
        .collect()
}

/// `||I^s(U f1, U f2)||_{L^2_{xt}}` over the window, by direct weighted convolution.
pub fn bilinear_lhs(f1: &Field, f2: &Field, s: f64, symbol: &PhaseSymbol, window: f64, n_t: usize) -> Result<f64> {
    if f1.grid() != f2.grid() {
        return Err(Error::LatticeMismatch("bilinear inputs live on different grids".into()));
    }
    let grid = *f1.grid();
    if f1.coeffs()[0].norm() > 0.0 || f2.coeffs()[0].norm() > 0.0 {
        return Err(Error::MeanZeroViolation {
            mean: f1.mean().abs().max(f2.mean().abs()),
        });
    }
    let dxi = grid.dxi();
    let s1 = support(f1);
    let s2 = support(f2);
    let n = grid.n_points() as i64;
    let width = (2 * n + 1) as usize;
    let mut pairs = Vec::with_capacity(s1.len() * s2.len());
    for &(j1, c1) in &s1 {
        let x1 = j1 as f64 * dxi;
        for &(j2, c2) in &s2 {
            let x2 = j2 as f64 * dxi;
            let w = (symbol.derivative_at(x1) - symbol.derivative_at(x2)).abs().powf(s);
            if w != 0.0 {
                pairs.push(((j1 + j2 + n) as usize, c1 * c2 * w, symbol.at(x1) + symbol.at(x2)));
            }
        }
    }
    let dt = window / n_t as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); width];
    let mut total = 0.0;
    for r in 0..n_t {
        let t = r as f64 * dt;
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for &(m, c, p) in &pairs {
            out[m] += c * Complex64::from_polar(1.0, -t * p);
        }
        total += out.iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    Ok((total * grid.length() * dt).sqrt())
}

/// Bilinear ratio `||I^s(U f1, U f2)||_{L^2_{xt}} / (||f1|| ||f2||)` over pairs of band-limited draws.
pub fn bilinear_ratio(ens: &Ensemble, s: f64) -> Result<RatioReport> {
    if !(0.0..=0.5).contains(&s) {
        return Err(Error::Domain(format!("bilinear exponent must lie in [0, 1/2], got {s}")));
    }
    check_law(EstimateTag::Bilinear, &ens.law, matches!(ens.law, DataLaw::BandLimited { .. }))?;
    refine(EstimateTag::Bilinear, ens, |e| {
        let sym = e.symbol();
        let n_t = e.n_t();
        let pairs: Vec<Result<Option<(f64, f64)>>> = (0..e.n_draws)
            .into_par_iter()
            .map(|i| {
                let f1 = e.draw(2 * i);
                let f2 = e.draw(2 * i + 1);
                match bilinear_lhs(&f1, &f2, s, &sym, e.window, n_t) {
                    Ok(lhs) => Ok(Some((lhs, f1.l2_norm() * f2.l2_norm()))),
                    Err(Error::MeanZeroViolation { .. }) => Ok(None),
                    Err(err) => Err(err),
                }
            })
            .collect();
        LevelResult::from_pairs(pairs)
    })
}

/// Frequency-modulation lattice for the multilinear probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilinearSetup {
    pub n_xi: usize,
    pub n_tau: usize,
    pub d_xi: f64,
    pub d_tau: f64,
    pub k: u32,
    pub s: f64,
    pub b: f64,
    pub eps: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MultilinearSetup {
    pub fn new(k: u32) -> Self {
        let eps = DEFAULT_EPS;
        Self {
            n_xi: 64,
            n_tau: 64,
            d_xi: 0.25,
            d_tau: 1.0,
            k,
            s: 0.5 - 2.0 / k as f64 + 2.0 * eps,
            b: 0.5 + eps / 24.0,
            eps,
            beta: -1.0,
            gamma: 1.0,
        }
    }

    /// Same extents, twice the cells per axis.
    pub fn refined(&self) -> Self {
        Self {
            n_xi: 2 * self.n_xi,
            n_tau: 2 * self.n_tau,
            d_xi: 0.5 * self.d_xi,
            d_tau: 0.5 * self.d_tau,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 5 {
            return Err(Error::Config(format!("multilinear probe needs k >= 5, got {}", self.k)));
        }
        if self.n_xi < 2 || self.n_tau < 2 || !self.n_xi.is_multiple_of(2) || !self.n_tau.is_multiple_of(2) {
            return Err(Error::Config("lattice sizes must be even and >= 2".into()));
        }
        if self.n_xi * self.n_tau > MULTILINEAR_MAX_CELLS {
            return Err(Error::SizeGuard {
                requested: self.n_xi * self.n_tau,
                limit: MULTILINEAR_MAX_CELLS,
            });
        }
        if !(self.d_xi > 0.0 && self.d_tau > 0.0) {
            return Err(Error::Config("lattice spacings must be positive".into()));
        }
        Ok(())
    }

    pub fn xi(&self, j: usize) -> f64 {
        (j as f64 - (self.n_xi / 2) as f64) * self.d_xi
    }

    pub fn tau(&self, l: usize) -> f64 {
        (l as f64 - (self.n_tau / 2) as f64) * self.d_tau
    }

    fn sigma(&self, j: usize, l: usize) -> f64 {
        let xi = self.xi(j);
        let phi = if xi == 0.0 { 0.0 } else { PhaseSymbol::new(self.beta, self.gamma).at(xi) };
        1.0 + (self.tau(l) + phi).abs()
    }

    /// Weight divided into every input factor.
    pub fn input_weight(&self, j: usize, l: usize) -> f64 {
        (1.0 + self.xi(j).abs()).powf(self.s) * self.sigma(j, l).powf(self.b)
    }

    /// Weight multiplying the output factor.
    pub fn output_weight(&self, j: usize, l: usize) -> f64 {
        let xi = self.xi(j);
        xi.abs() * (1.0 + xi.abs()).powf(self.s) / self.sigma(j, l).powf(0.5 - self.eps / 12.0)
    }

    /// Uniform `[0, 1)` draws for the output and the `k + 1` inputs; the `xi = 0` column is zero.
    pub fn draw(&self, seed: u64, i: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let zero = self.n_xi / 2;
        (0..self.k + 2)
            .map(|_| {
                (0..self.n_xi * self.n_tau)
                    .map(|c| {
                        let v: f64 = rng.random();
                        if c / self.n_tau == zero {
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn fft2(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let run = |b: &mut [Complex64]| if inverse { ifft_in_place(b) } else { fft_in_place(b) };
    for r in 0..rows {
        run(&mut buf[r * cols..(r + 1) * cols]);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = buf[r * cols + c];
        }
        run(&mut col);
        for r in 0..rows {
            buf[r * cols + c] = col[r];
        }
    }
}

/// Left-hand side of the multilinear bound for output `f` and inputs `fs` (row-major by `xi`).
pub fn multilinear_lhs(setup: &MultilinearSetup, f: &[f64], fs: &[Vec<f64>]) -> Result<f64> {
    setup.validate()?;
    let (nx, nt) = (setup.n_xi, setup.n_tau);
    let factors = setup.k as usize + 1;
    if fs.len() != factors || f.len() != nx * nt || fs.iter().any(|g| g.len() != nx * nt) {
        return Err(Error::Config(format!("expected {factors} input arrays of {} cells", nx * nt)));
    }
    let px = (factors * (nx - 1) + 1).next_power_of_two();
    let pt = (factors * (nt - 1) + 1).next_power_of_two();
    let mut acc = vec![Complex64::new(1.0, 0.0); px * pt];
    let mut buf = vec![Complex64::new(0.0, 0.0); px * pt];
    for g in fs {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for j in 0..nx {
            for l in 0..nt {
                buf[j * pt + l] = Complex64::new(g[j * nt + l] / setup.input_weight(j, l), 0.0);
            }
        }
        fft2(&mut buf, px, pt, false);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a *= b);
    }
    fft2(&mut acc, px, pt, true);
    let norm = 1.0 / (px * pt) as f64;
    let shift_x = (factors - 1) * nx / 2;
    let shift_t = (factors - 1) * nt / 2;
    let mut sum = 0.0;
    for j in 0..nx {
        for l in 0..nt {
            let v = f[j * nt + l];
            if v != 0.0 {
                let conv = acc[(j + shift_x) * pt + l + shift_t].re * norm;
                sum += setup.output_weight(j, l) * v * conv;
            }
        }
    }
    Ok((setup.d_xi * setup.d_tau).powi(factors as i32) * sum)
}

fn lattice_l2(setup: &MultilinearSetup, f: &[f64]) -> f64 {
    (f.iter().map(|v| v * v).sum::<f64>() * setup.d_xi * setup.d_tau).sqrt()
}

/// Ensemble ratio for the multilinear bound with nonnegative random spectra, on the base and doubled lattice.
pub fn multilinear_ratio(setup: &MultilinearSetup, seed: u64, n_draws: usize, amplitude: f64) -> Result<RatioReport> {
    setup.validate()?;
    if n_draws == 0 {
        return Err(Error::Config("n_draws must be positive".into()));
    }
    let fine = setup.refined();
    let mut levels = Vec::new();
    for (label, st) in [("base", *setup), ("lattice x2", fine)] {
        st.validate()?;
        let pairs: Vec<Result<Option<(f64, f64)>>> = (0..n_draws)
            .into_par_iter()
            .map(|i| {
                let mut arrays = st.draw(seed, i);
                arrays.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v *= amplitude));
                let (f, fs) = arrays.split_first().expect("k + 2 arrays");
                let lhs = multilinear_lhs(&st, f, fs)?;
                let rhs = arrays.iter().map(|a| lattice_l2(&st, a)).product::<f64>();
                Ok(Some((lhs, rhs)))
            })
            .collect();
        let res = LevelResult::from_pairs(pairs)?;
        levels.push((label.to_string(), st.n_xi, st.n_xi as f64 * st.d_xi, st.n_tau as f64 * st.d_tau, st.n_tau, res));
    }
    Ok(assemble(EstimateTag::Multilinear, levels))
}

/// Complete probe configuration for one tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetup {
    pub tag: EstimateTag,
    pub ensemble: Ensemble,
    pub params: EstimateParams,
    pub bilinear_s: f64,
    pub multilinear: MultilinearSetup,
}

impl ProbeSetup {
    /// Lattices sized so the fastest supported phase is resolved without aliasing.
    pub fn default_for(tag: EstimateTag, seed: u64, n_draws: usize) -> Result<Self> {
        let (beta, gamma) = (-1.0, 1.0);
        let (law, n, length, window) = match tag {
            EstimateTag::Strichartz | EstimateTag::Smoothing6 | EstimateTag::LocalSmoothing => {
                (DataLaw::GaussianSpectrum { decay: 0.25 }, 128, 8.0 * PI, 0.5)
            }
            EstimateTag::Maximal => (DataLaw::LowFrequency { cutoff: 1.0 }, 256, 128.0 * PI, 2.0),
            EstimateTag::Bilinear => (DataLaw::BandLimited { n_block: 1.0 }, 64, 8.0 * PI, 1.0),
            EstimateTag::BlockSup => (DataLaw::BandLimited { n_block: 1.0 }, 256, 8.0 * PI, 0.25),
            EstimateTag::LowMaximal => (DataLaw::LowFrequency { cutoff: 1.0 }, 256, 32.0 * PI, 2.0),
            EstimateTag::HighSup | EstimateTag::Multilinear => {
                (DataLaw::HighFrequency { cutoff: 1.0, decay: 0.25 }, 128, 8.0 * PI, 0.5)
            }
        };
        Ok(Self {
            tag,
            ensemble: Ensemble::new(seed, n_draws, law, Grid::new(n, length)?, window, beta, gamma)?,
            params: EstimateParams::default(),
            bilinear_s: 0.5,
            multilinear: MultilinearSetup::new(5),
        })
    }
}

/// Dispatches a probe by tag.
pub fn run_probe(setup: &ProbeSetup) -> Result<RatioReport> {
    match setup.tag {
        EstimateTag::Strichartz | EstimateTag::Smoothing6 | EstimateTag::LocalSmoothing | EstimateTag::Maximal => {
            strichartz_ratio(&setup.ensemble, setup.tag, &setup.params)
        }
        EstimateTag::BlockSup | EstimateTag::LowMaximal | EstimateTag::HighSup => {
            linfty_bounds_ratio(&setup.ensemble, setup.tag, &setup.params)
        }
        EstimateTag::Bilinear => bilinear_ratio(&setup.ensemble, setup.bilinear_s),
        EstimateTag::Multilinear => multilinear_ratio(
            &setup.multilinear,
            setup.ensemble.seed,
            setup.ensemble.n_draws,
            setup.ensemble.amplitude,
        ),
    }
}
