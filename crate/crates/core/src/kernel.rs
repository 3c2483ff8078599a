//! The dyadic dispersive kernel
//!
//! ```text
//! K(x, t) = int_{N <= |xi| <= 4N} exp(i (x xi - t phi(xi))) dxi
//! ```
//!
//! evaluated by oscillation-adaptive Gauss-Kronrod panels, plus its region-wise
//! decay checks and the `L^{p}_x L^inf_t` mixed norm.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::linear_fit;
use crate::quadrature::gk15_complex;
use crate::spectral::{fft_in_place, ifft_in_place, PhaseSymbol};

/// Constant in the boundary `|x| = C a N^2 t` between the two outer regions.
pub const REGION_CONSTANT: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Lower edge `N` of the frequency block `[N, 4N]`.
    pub n_block: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Absolute quadrature tolerance.
    pub tol: f64,
    /// Frequency threshold `a` entering the region boundary.
    pub threshold: f64,
    pub max_panels: usize,
}

impl KernelSpec {
    pub fn new(n_block: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(n_block > 0.0) || !n_block.is_finite() {
            return Err(Error::Config(format!("N must be positive, got {n_block}")));
        }
        if !beta.is_finite() || beta == 0.0 || !gamma.is_finite() {
            return Err(Error::Config("beta must be nonzero and finite".into()));
        }
        Ok(Self {
            n_block,
            beta,
            gamma,
            tol: 1e-9,
            threshold: 1.0,
            max_panels: 200_000,
        })
    }

    pub fn with_threshold(mut self, a: f64) -> Self {
        self.threshold = a;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_n(mut self, n_block: f64) -> Self {
        self.n_block = n_block;
        self
    }

    pub fn symbol(&self) -> PhaseSymbol {
        PhaseSymbol::new(self.beta, self.gamma)
    }

    /// Range of `phi'` over the positive block; stationary points sit at `x = t phi'(xi)`.
    pub fn group_velocity_range(&self) -> (f64, f64) {
        let sym = self.symbol();
        let n = self.n_block;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=256 {
            let xi = n + 3.0 * n * i as f64 / 256.0;
            let v = sym.derivative_at(xi);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integral over one signed block `[lo, hi]`, with its error bound and panel count.
fn block_integral(x: f64, t: f64, spec: &KernelSpec, lo: f64, hi: f64) -> Result<(Complex64, f64, usize)> {
    let sym = spec.symbol();
    let integrand = |xi: f64| Complex64::from_polar(1.0, x * xi - t * sym.at(xi));
    let dphase = |xi: f64| (x - t * sym.derivative_at(xi)).abs();
    let width = hi - lo;
    let hmax = width / 4.0;
    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut a = lo;
    while a < hi {
        let quarter = |xi: f64| {
            let d = dphase(xi);
            if d > 0.0 {
                0.5 * PI / d
            } else {
                f64::INFINITY
            }
        };
        let mut h = hmax.min(quarter(a));
        h = h.min(quarter((a + h).min(hi)));
        h = h.min(quarter(a + 0.5 * h));
        let b = if a + h >= hi - 1e-12 * width { hi } else { a + h };
        let (v, e) = gk15_complex(integrand, a, b);
        total += v;
        err += e;
        heap.push(Panel { a, b, value: v, err: e });
        if heap.len() > spec.max_panels {
            return Err(Error::Accuracy {
                requested: spec.tol,
                achieved: f64::INFINITY,
            });
        }
        a = b;
    }
    while err > 0.5 * spec.tol {
        if heap.len() >= spec.max_panels {
            return Err(Error::Accuracy {
                requested: spec.tol,
                achieved: err,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15_complex(integrand, worst.a, mid);
        let (v2, e2) = gk15_complex(integrand, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
    Ok((total, err.max(0.0), heap.len()))
}

/// `K(x, t)` from both signed blocks; the imaginary part is quadrature noise.
pub fn kernel_eval(x: f64, t: f64, spec: &KernelSpec) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("kernel requires t >= 0, got {t}")));
    }
    let n = spec.n_block;
    let (pos, _, _) = block_integral(x, t, spec, n, 4.0 * n)?;
    let (neg, _, _) = block_integral(x, t, spec, -4.0 * n, -n)?;
    Ok(pos + neg)
}

/// `K(x, t) = 2 Re int_N^{4N}`, using the conjugate symmetry of the two blocks.
pub fn kernel_real(x: f64, t: f64, spec: &KernelSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("kernel requires t >= 0, got {t}")));
    }
    let n = spec.n_block;
    let (pos, _, _) = block_integral(x, t, spec, n, 4.0 * n)?;
    Ok(2.0 * pos.re)
}

/// Closed form at `t = 0`: `2 (sin(4Nx) - sin(Nx)) / x`.
pub fn kernel_at_time_zero(x: f64, n_block: f64) -> f64 {
    if x == 0.0 {
        6.0 * n_block
    } else {
        2.0 * ((4.0 * n_block * x).sin() - (n_block * x).sin()) / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    /// `|x| <= 1/N`.
    Omega1,
    /// `|x| > 1/N` and `|x| >= C a N^2 t`.
    Omega2,
    /// `|x| > 1/N` and `|x| < C a N^2 t`.
    Omega3,
}

impl RegionTag {
    pub const ALL: [RegionTag; 3] = [RegionTag::Omega1, RegionTag::Omega2, RegionTag::Omega3];

    pub fn classify(x: f64, t: f64, spec: &KernelSpec) -> Self {
        let n = spec.n_block;
        if x.abs() <= 1.0 / n {
            RegionTag::Omega1
        } else if x.abs() >= REGION_CONSTANT * spec.threshold * n * n * t {
            RegionTag::Omega2
        } else {
            RegionTag::Omega3
        }
    }

    /// Membership predicate written independently of [`RegionTag::classify`].
    pub fn contains(&self, x: f64, t: f64, spec: &KernelSpec) -> bool {
        let n = spec.n_block;
        let boundary = REGION_CONSTANT * spec.threshold * n * n * t;
        match self {
            RegionTag::Omega1 => x.abs() <= 1.0 / n,
            RegionTag::Omega2 => x.abs() > 1.0 / n && x.abs() >= boundary,
            RegionTag::Omega3 => x.abs() > 1.0 / n && x.abs() < boundary,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RegionTag::Omega1 => "omega1",
            RegionTag::Omega2 => "omega2",
            RegionTag::Omega3 => "omega3",
        }
    }

    fn index(&self) -> usize {
        match self {
            RegionTag::Omega1 => 0,
            RegionTag::Omega2 => 1,
            RegionTag::Omega3 => 2,
        }
    }

    /// Region bound shape: `N`, `N^{-1} x^{-2}`, `t^{-1/3}`.
    pub fn bound(&self, x: f64, t: f64, n_block: f64) -> f64 {
        match self {
            RegionTag::Omega1 => n_block,
            RegionTag::Omega2 => 1.0 / (n_block * x * x),
            RegionTag::Omega3 => t.powf(-1.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub region: RegionTag,
    pub x: f64,
    pub t: f64,
    pub abs_k: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region: RegionTag,
    pub evaluated: usize,
    pub skipped: usize,
    /// Empirical constant `sup |K| / bound`.
    pub sup_ratio: f64,
    pub max_abs_k: f64,
}

/// Sampling and fitting knobs of [`region_decay_check_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub samples_per_region: usize,
    pub seed: u64,
    /// Largest sampled `N |x|`.
    pub scaled_x_max: f64,
    /// Largest sampled `N^3 t` in the third region.
    pub scaled_t_max: f64,
    pub fit_exponent: bool,
    /// Range of `N^3 t` over which the third-region envelope is fitted.
    pub fit_range: (f64, f64),
    pub fit_points: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            samples_per_region: 200,
            seed: 0,
            scaled_x_max: 32.0,
            scaled_t_max: 64.0,
            fit_exponent: true,
            fit_range: (1.0, 64.0),
            fit_points: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n_block: f64,
    pub samples: Vec<RegionSample>,
    pub stats: Vec<RegionStats>,
    /// Fitted exponent of `sup_x |K(x, t)|` against `t` in the third region.
    pub omega3_exponent: Option<f64>,
    /// `(t, sup_x |K|)` pairs behind the fit.
    pub omega3_envelope: Vec<(f64, f64)>,
    pub skip_fraction: f64,
    /// No more than 10% skips, all constants finite, `|K| <= 6N` in the first region
    /// and the fitted exponent at most `-1/3 + 0.1`.
    pub passed: bool,
}

impl DecayReport {
    pub fn stat(&self, region: RegionTag) -> &RegionStats {
        &self.stats[region.index()]
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Sample points of one region in the scaled coordinates `X = N x`, `T = N^3 t`.
fn draw_region_point(region: RegionTag, rng: &mut ChaCha8Rng, spec: &KernelSpec, opts: &DecayOptions) -> (f64, f64) {
    let n = spec.n_block;
    let c = REGION_CONSTANT * spec.threshold;
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let (xs, ts) = match region {
        RegionTag::Omega1 => {
            let xs = rng.random_range(-1.0..=1.0);
            let ts = log_uniform(rng, 1e-3, opts.scaled_t_max);
            (xs, ts)
        }
        RegionTag::Omega2 => {
            let xs = sign * log_uniform(rng, 1.0 + 1e-9, opts.scaled_x_max);
            let top = xs.abs() / c;
            (xs, log_uniform(rng, 1e-3 * top, top))
        }
        RegionTag::Omega3 => {
            let xs = sign * log_uniform(rng, 1.0 + 1e-9, opts.scaled_x_max);
            let lo = xs.abs() / c * (1.0 + 1e-9);
            (xs, log_uniform(rng, lo.max(1e-3), opts.scaled_t_max.max(2.0 * lo)))
        }
    };
    (xs / n, ts / (n * n * n))
}

/// Default-option region check.
pub fn region_decay_check(spec: &KernelSpec, samples_per_region: usize) -> Result<DecayReport> {
    let opts = DecayOptions {
        samples_per_region,
        ..DecayOptions::default()
    };
    region_decay_check_with(spec, &opts)
}

pub fn region_decay_check_with(spec: &KernelSpec, opts: &DecayOptions) -> Result<DecayReport> {
    if opts.samples_per_region == 0 {
        return Err(Error::Config("samples_per_region must be positive".into()));
    }
    let n = spec.n_block;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = Vec::with_capacity(3 * opts.samples_per_region);
    for region in RegionTag::ALL {
        for _ in 0..opts.samples_per_region {
            let (x, t) = draw_region_point(region, &mut rng, spec, opts);
            debug_assert_eq!(RegionTag::classify(x, t, spec), region);
            points.push((region, x, t));
        }
    }
    let evaluated: Vec<(RegionTag, f64, f64, Option<f64>)> = points
        .par_iter()
        .map(|&(region, x, t)| (region, x, t, kernel_real(x, t, spec).ok().map(f64::abs)))
        .collect();
    let mut samples = Vec::new();
    let mut stats: Vec<RegionStats> = RegionTag::ALL
        .iter()
        .map(|&region| RegionStats {
            region,
            evaluated: 0,
            skipped: 0,
            sup_ratio: 0.0,
            max_abs_k: 0.0,
        })
        .collect();
    for (region, x, t, value) in evaluated {
        let st = &mut stats[region.index()];
        match value {
            Some(abs_k) => {
                let bound = region.bound(x, t, n);
                let ratio = abs_k / bound;
                st.evaluated += 1;
                st.sup_ratio = st.sup_ratio.max(ratio);
                st.max_abs_k = st.max_abs_k.max(abs_k);
                samples.push(RegionSample {
                    region,
                    x,
                    t,
                    abs_k,
                    bound,
                    ratio,
                });
            }
            None => st.skipped += 1,
        }
    }
    let total = 3 * opts.samples_per_region;
    let skipped: usize = stats.iter().map(|s| s.skipped).sum();
    let skip_fraction = skipped as f64 / total as f64;
    let (omega3_exponent, omega3_envelope) = if opts.fit_exponent {
        let (exp, env) = omega3_exponent_fit(spec, opts.fit_range, opts.fit_points)?;
        (Some(exp), env)
    } else {
        (None, Vec::new())
    };
    let passed = skip_fraction <= 0.1
        && stats.iter().all(|s| s.sup_ratio.is_finite())
        && stats[0].max_abs_k <= 6.0 * n * (1.0 + 1e-9)
        && omega3_exponent.is_none_or(|e| e <= -1.0 / 3.0 + 0.1);
    Ok(DecayReport {
        n_block: n,
        samples,
        stats,
        omega3_exponent,
        omega3_envelope,
        skip_fraction,
        passed,
    })
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Trapezoid sums `sum_j g_j h exp(sign i k s_j)`, `s_j = s0 + j h`, at `k_l = l dk`
/// with `l` wrapped to `[-P/2, P/2)` and `dk <= dk_target`.
fn fourier_sums(g: &[Complex64], h: f64, s0: f64, sign: f64, dk_target: f64) -> (f64, Vec<Complex64>) {
    let need = (2.0 * PI / (h * dk_target)).ceil() as usize;
    let p = need.max(g.len()).next_power_of_two();
    let dk = 2.0 * PI / (p as f64 * h);
    let mut buf = vec![Complex64::new(0.0, 0.0); p];
    let last = g.len() - 1;
    for (j, v) in g.iter().enumerate() {
        let w = if j == 0 || j == last { 0.5 } else { 1.0 };
        buf[j] = v * (w * h);
    }
    if sign > 0.0 {
        ifft_in_place(&mut buf);
    } else {
        fft_in_place(&mut buf);
    }
    for (l, v) in buf.iter_mut().enumerate() {
        let k = wrapped(l, p) as f64 * dk;
        *v *= Complex64::from_polar(1.0, sign * k * s0);
    }
    (dk, buf)
}

fn wrapped(l: usize, p: usize) -> i64 {
    if l < p / 2 {
        l as i64
    } else {
        l as i64 - p as i64
    }
}

/// Golden-section refinement of the `count` largest local maxima of coarse samples `(k, |f|)`.
fn refine_peaks(f: &impl Fn(f64) -> f64, coarse: &[(f64, f64)], h: f64, lo: f64, hi: f64, count: usize) -> (f64, f64) {
    let m = coarse.len();
    let mut peaks: Vec<usize> = (0..m)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { coarse[i - 1].1 };
            let right = if i + 1 == m { f64::NEG_INFINITY } else { coarse[i + 1].1 };
            coarse[i].1 >= left && coarse[i].1 >= right
        })
        .collect();
    peaks.sort_by(|a, b| coarse[*b].1.total_cmp(&coarse[*a].1));
    peaks.truncate(count.max(1));
    let mut best = (lo, f64::NEG_INFINITY);
    for i in peaks {
        let c = coarse[i].0;
        let (x, v) = golden_max(f, (c - h).max(lo), (c + h).min(hi), 24);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// `sup_x |K(x, t)|` over the third region at time `t`, searched around the stationary cone.
///
/// Candidates come from an FFT of the sampled block; the returned value is the
/// adaptive-quadrature kernel at the refined maximizer.
pub fn omega3_envelope(spec: &KernelSpec, t: f64) -> (f64, f64) {
    let n = spec.n_block;
    let sym = spec.symbol();
    let (vlo, vhi) = spec.group_velocity_range();
    let (clo, chi) = (t * vlo, t * vhi);
    let width = (chi - clo).max(8.0 / n);
    let outer = REGION_CONSTANT * spec.threshold * n * n * t;
    let lo = (clo - 0.25 * width).max(-outer);
    let hi = (chi + 0.25 * width).min(outer);
    let reach = lo.abs().max(hi.abs()) + t * vlo.abs().max(vhi.abs());
    let mut m = (3.0 * n / (0.25 * PI / reach)).ceil() as usize + 1;
    m = m.max(64);
    let h = 3.0 * n / (m - 1) as f64;
    let g: Vec<Complex64> = (0..m)
        .map(|j| Complex64::from_polar(1.0, -t * sym.at(n + j as f64 * h)))
        .collect();
    let (dk, sums) = fourier_sums(&g, h, n, 1.0, PI / (16.0 * n));
    let p = sums.len();
    let mut coarse: Vec<(f64, f64)> = (0..p)
        .map(|l| (wrapped(l, p) as f64 * dk, 2.0 * sums[l].re))
        .filter(|&(x, _)| x >= lo && x <= hi && x.abs() > 1.0 / n && x.abs() < outer)
        .map(|(x, v)| (x, v.abs()))
        .collect();
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0));
    let f = |x: f64| {
        if x.abs() <= 1.0 / n || x.abs() >= outer {
            return 0.0;
        }
        kernel_real(x, t, spec).map(f64::abs).unwrap_or(0.0)
    };
    refine_peaks(&f, &coarse, dk, lo, hi, 6)
}

/// Fits `log sup_x |K|` against `log t` over `N^3 t` in `range`.
pub fn omega3_exponent_fit(spec: &KernelSpec, range: (f64, f64), points: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    if points < 2 || !(range.0 > 0.0 && range.1 > range.0) {
        return Err(Error::Config("exponent fit needs a positive range and >= 2 points".into()));
    }
    let n3 = spec.n_block.powi(3);
    let env: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            let tau = range.0 * (range.1 / range.0).powf(s);
            let t = tau / n3;
            (t, omega3_envelope(spec, t).1)
        })
        .collect();
    let lx: Vec<f64> = env.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = env.iter().map(|p| p.1.ln()).collect();
    let (slope, _, _) = linear_fit(&lx, &ly);
    Ok((slope, env))
}

/// Decay checks repeated over several block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayStudy {
    pub reports: Vec<DecayReport>,
    /// `max / min` of each region's empirical constant across the block sizes.
    pub spreads: Vec<(RegionTag, f64)>,
    pub stable: bool,
}

/// Runs [`region_decay_check_with`] for every `N`, fitting the exponent only for the first.
pub fn decay_study(base: &KernelSpec, ns: &[f64], opts: &DecayOptions) -> Result<DecayStudy> {
    let mut reports = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let o = DecayOptions {
            fit_exponent: opts.fit_exponent && i == 0,
            ..opts.clone()
        };
        reports.push(region_decay_check_with(&base.with_n(n), &o)?);
    }
    let spreads: Vec<(RegionTag, f64)> = RegionTag::ALL
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = reports.iter().map(|rep| rep.stat(r).sup_ratio).collect();
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            (r, hi / lo)
        })
        .collect();
    let stable = spreads.iter().all(|(_, s)| s.is_finite() && *s <= 4.0);
    Ok(DecayStudy {
        reports,
        spreads,
        stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormOptions {
    /// Half-width of the box in `N x`; when absent it starts at 16 and doubles until the tail bound is met.
    pub scaled_x_box: Option<f64>,
    /// Box height in `N^3 t`; defaults to cover every stationary time inside the box.
    pub scaled_t_box: Option<f64>,
    /// Spacing of the `x` grid in `N x`.
    pub scaled_dx: f64,
    /// Allowed relative tail contribution to the norm.
    pub tail_limit: f64,
}

impl Default for MixedNormOptions {
    fn default() -> Self {
        Self {
            scaled_x_box: None,
            scaled_t_box: None,
            scaled_dx: 0.1,
            tail_limit: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormReport {
    pub n_block: f64,
    pub gamma_exp: f64,
    /// Outer spatial exponent `gamma_exp / 2`.
    pub p: f64,
    pub norm: f64,
    /// `norm / N^{(gamma_exp - 2)/gamma_exp}`.
    pub ratio: f64,
    pub x_box: f64,
    pub t_box: f64,
    /// Relative increase of the norm that the estimated tail could cause.
    pub tail_fraction: f64,
}

/// Tail of `int |sup_t K / N|^p dX` beyond `|X| = xs`, from the stationary-phase
/// envelope `sqrt(16 pi / |X|)` on the dispersive side and `6 / |X|` on the other.
fn scaled_tail(xs: f64, p: f64) -> f64 {
    let half = 0.5 * p;
    (16.0 * PI).powf(half) * xs.powf(1.0 - half) / (half - 1.0) + 6f64.powf(p) * xs.powf(1.0 - p) / (p - 1.0)
}

/// `||K||_{L^{gamma_exp/2}_x L^inf_t}` on a truncated box with default options.
pub fn kernel_mixed_norm(spec: &KernelSpec, gamma_exp: f64) -> Result<f64> {
    Ok(kernel_mixed_norm_report(spec, gamma_exp, &MixedNormOptions::default())?.norm)
}

pub fn kernel_mixed_norm_report(spec: &KernelSpec, gamma_exp: f64, opts: &MixedNormOptions) -> Result<MixedNormReport> {
    if !(gamma_exp >= 7.0) {
        return Err(Error::Domain(format!("gamma_exp must be >= 7, got {gamma_exp}")));
    }
    let n = spec.n_block;
    let p = 0.5 * gamma_exp;
    let (vlo, vhi) = spec.group_velocity_range();
    let slowest = vlo.abs().min(vhi.abs()).max(1e-300) / (n * n);
    let mut xs = opts.scaled_x_box.unwrap_or(16.0);
    loop {
        let ts = opts.scaled_t_box.unwrap_or(1.25 * xs / slowest);
        let (x_box, t_box) = (xs / n, ts / n.powi(3));
        let m = (2.0 * xs / opts.scaled_dx).ceil() as usize;
        let dx = 2.0 * x_box / m as f64;
        let sups: Vec<Result<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let x = -x_box + (i as f64 + 0.5) * dx;
                time_sup(spec, x, t_box).ok_or(Error::Accuracy {
                    requested: spec.tol,
                    achieved: f64::NAN,
                })
            })
            .collect();
        let mut integral = 0.0;
        for s in sups {
            integral += s?.powf(p) * dx;
        }
        let norm = integral.powf(1.0 / p);
        let scaled_integral = integral * n / n.powf(p);
        let tail_fraction = ((scaled_integral + scaled_tail(xs, p)) / scaled_integral).powf(1.0 / p) - 1.0;
        if tail_fraction > opts.tail_limit && opts.scaled_x_box.is_none() && xs < 1024.0 {
            xs *= 2.0;
            continue;
        }
        if tail_fraction > opts.tail_limit {
            return Err(Error::BoxTooSmall {
                tail_fraction,
                limit: opts.tail_limit,
            });
        }
        return Ok(MixedNormReport {
            n_block: n,
            gamma_exp,
            p,
            norm,
            ratio: norm / n.powf((gamma_exp - 2.0) / gamma_exp),
            x_box,
            t_box,
            tail_fraction,
        });
    }
}

/// `sup_{0 <= t <= t_max} |K(x, t)|`.
///
/// With a monotone phase on the block, candidates come from an FFT in the
/// variable `w = phi(xi)`; otherwise from a uniform time grid.
fn time_sup(spec: &KernelSpec, x: f64, t_max: f64) -> Option<f64> {
    let n = spec.n_block;
    let sym = spec.symbol();
    let f = |t: f64| kernel_real(x, t.clamp(0.0, t_max), spec).map(f64::abs).unwrap_or(f64::NAN);
    let nodes: Vec<f64> = (0..=256).map(|i| n + 3.0 * n * i as f64 / 256.0).collect();
    let dphi: Vec<f64> = nodes.iter().map(|&xi| sym.derivative_at(xi)).collect();
    let fastest = nodes.iter().map(|&xi| sym.at(xi).abs()).fold(0.0, f64::max);
    let t_step = 2.0 * PI / (8.0 * fastest.max(1e-300));
    let monotone = dphi.iter().all(|&d| d < 0.0) || dphi.iter().all(|&d| d > 0.0);
    let coarse: Vec<(f64, f64)> = if monotone {
        let (wa, wb) = {
            let (u, v) = (sym.at(n), sym.at(4.0 * n));
            (u.min(v), u.max(v))
        };
        let slope_min = dphi.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        let mut dw = 0.25 * PI / (x.abs() / slope_min + t_max);
        let m = (((wb - wa) / dw).ceil() as usize + 1).max(64);
        dw = (wb - wa) / (m - 1) as f64;
        let increasing = dphi[0] > 0.0;
        let mut xi = if increasing { n } else { 4.0 * n };
        let g: Vec<Complex64> = (0..m)
            .map(|j| {
                let w = wa + j as f64 * dw;
                for _ in 0..50 {
                    let step = (sym.at(xi) - w) / sym.derivative_at(xi);
                    xi = (xi - step).clamp(n, 4.0 * n);
                    if step.abs() <= 1e-14 * xi {
                        break;
                    }
                }
                Complex64::from_polar(1.0 / sym.derivative_at(xi).abs(), x * xi)
            })
            .collect();
        let (dt, sums) = fourier_sums(&g, dw, wa, -1.0, t_step);
        let top = ((t_max / dt).floor() as usize).min(sums.len() / 2 - 1);
        (0..=top).map(|l| (l as f64 * dt, (2.0 * sums[l].re).abs())).collect()
    } else {
        let m = ((t_max / t_step).ceil() as usize).max(2);
        let h = t_max / m as f64;
        (0..=m).map(|i| (i as f64 * h, f(i as f64 * h))).collect()
    };
    let h = if coarse.len() > 1 { coarse[1].0 - coarse[0].0 } else { t_max };
    let (_, v) = refine_peaks(&f, &coarse, h, 0.0, t_max, 4);
    let v = v.max(f(0.0));
    v.is_finite().then_some(v)
}
