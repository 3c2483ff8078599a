//! Time integration of `u_t = beta u_xxx + gamma dx^{-1} u - u^k u_x` on the periodic grid.
//!
//! The linear part is propagated exactly by `exp(-i phi dt)`; the nonlinearity
//! is advanced by integrating-factor RK4 (default) or Strang splitting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{h_s_norm, scaled_time_cutoff, x_s_norm, SpaceTimeField};
use crate::spectral::{
    dealias_in_place, fft_in_place, ifft_in_place, Field, Grid, PhaseSymbol, MEAN_ZERO_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Ifrk4,
    SplitStep,
}

/// Everything needed to advance one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub beta: f64,
    pub gamma: f64,
    pub k: u32,
    pub dt: f64,
    pub t_end: f64,
    pub grid: Grid,
    pub integrator: Integrator,
    pub cfl_safety: f64,
    /// Off switch for the nonlinear term.
    pub nonlinear: bool,
    /// Sobolev index of the recorded `H^s` and `X_s` traces.
    pub monitor_s: f64,
}

/// Smallest `k` covered by the well-posedness theory.
pub const WELL_POSED_MIN_K: u32 = 5;

/// Relative L2 growth that counts as blowup.
pub const BLOWUP_GROWTH: f64 = 10.0;

impl SolverConfig {
    pub fn new(grid: Grid, beta: f64, gamma: f64, k: u32, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            beta,
            gamma,
            k,
            dt,
            t_end,
            grid,
            integrator: Integrator::Ifrk4,
            cfl_safety: 0.5,
            nonlinear: true,
            monitor_s: 2.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be negative, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0) || !self.cfl_safety.is_finite() {
            return Err(Error::Config(format!(
                "cfl_safety must be positive, got {}",
                self.cfl_safety
            )));
        }
        if self.cfl_safety > 1.0 {
            log::warn!("cfl_safety = {} loosens the CFL guard beyond its stable range", self.cfl_safety);
        }
        Ok(())
    }

    /// `dt <= cfl_safety dx / max(1, max|u0|)^k`.
    pub fn check_cfl(&self, u0: &Field) -> Result<()> {
        let amp = u0.max_abs().max(1.0);
        let limit = self.cfl_safety * self.grid.dx() / amp.powi(self.k as i32);
        if self.nonlinear && self.dt > limit {
            return Err(Error::Config(format!(
                "dt = {} violates the CFL limit {limit:e}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn outside_well_posed_range(&self) -> bool {
        self.k < WELL_POSED_MIN_K
    }

    pub fn symbol(&self) -> PhaseSymbol {
        PhaseSymbol::new(self.beta, self.gamma)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }
}

/// Reusable buffers for the nonlinear term.
struct Workspace {
    buf: Vec<Complex64>,
    deriv: Vec<Complex64>,
    k: u32,
}

impl Workspace {
    fn new(grid: &Grid, k: u32) -> Self {
        let n = grid.n_points();
        let scale = -1.0 / (n as f64 * (k as f64 + 1.0));
        let nyq = grid.nyquist_slot();
        let deriv = (0..n)
            .map(|i| {
                if i == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, grid.wavenumber(i) * scale)
                }
            })
            .collect();
        Self {
            buf: vec![Complex64::new(0.0, 0.0); n],
            deriv,
            k,
        }
    }

    fn nonlinear(&mut self, coeffs: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.buf.copy_from_slice(coeffs);
        ifft_in_place(&mut self.buf);
        let p = self.k as i32 + 1;
        for z in self.buf.iter_mut() {
            *z = Complex64::new(z.re.powi(p), 0.0);
        }
        fft_in_place(&mut self.buf);
        dealias_in_place(&mut self.buf, self.k as usize + 1);
        let mut finite = true;
        for ((o, b), d) in out.iter_mut().zip(&self.buf).zip(&self.deriv) {
            *o = b * d;
            finite &= o.re.is_finite() && o.im.is_finite();
        }
        out[0] = Complex64::new(0.0, 0.0);
        if !finite {
            return Err(Error::NonFinite("overflow in the nonlinear power".into()));
        }
        Ok(())
    }
}

/// `-(1/(k+1)) dx [dealias(u^{k+1})]`, mean-zero.
pub fn nonlinear_term(u: &Field, k: u32) -> Result<Field> {
    let mut ws = Workspace::new(u.grid(), k);
    let mut out = vec![Complex64::new(0.0, 0.0); u.grid().n_points()];
    ws.nonlinear(u.coeffs(), &mut out)?;
    Field::from_coeffs(*u.grid(), out)
}

/// Stateful single-run stepper holding the propagator tables.
pub struct Stepper {
    cfg: SolverConfig,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    ws: Workspace,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
    steps_taken: usize,
}

fn propagator_table(grid: &Grid, symbol: &PhaseSymbol, t: f64) -> Vec<Complex64> {
    let mut table: Vec<Complex64> = symbol
        .table(grid)
        .into_iter()
        .map(|p| Complex64::from_polar(1.0, -t * p))
        .collect();
    table[grid.nyquist_slot()] = Complex64::new(0.0, 0.0);
    table
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid;
        let symbol = cfg.symbol();
        let n = grid.n_points();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            cfg: *cfg,
            full: propagator_table(&grid, &symbol, cfg.dt),
            half: propagator_table(&grid, &symbol, 0.5 * cfg.dt),
            ws: Workspace::new(&grid, cfg.k),
            k1: zero.clone(),
            k2: zero.clone(),
            k3: zero.clone(),
            k4: zero.clone(),
            stage: zero,
            steps_taken: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Advances the coefficients by one `dt`.
    pub fn advance(&mut self, uh: &mut [Complex64]) -> Result<()> {
        let dt = self.cfg.dt;
        if !self.cfg.nonlinear {
            for (u, e) in uh.iter_mut().zip(&self.full) {
                *u *= e;
            }
        } else {
            let outcome = match self.cfg.integrator {
                Integrator::Ifrk4 => self.ifrk4(uh, dt),
                Integrator::SplitStep => self.strang(uh, dt),
            };
            if let Err(e) = outcome {
                return Err(Error::Blowup {
                    step: self.steps_taken + 1,
                    time: (self.steps_taken + 1) as f64 * dt,
                    reason: e.to_string(),
                });
            }
        }
        self.steps_taken += 1;
        if uh.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Blowup {
                step: self.steps_taken,
                time: self.steps_taken as f64 * dt,
                reason: "nonfinite coefficients".into(),
            });
        }
        Ok(())
    }

    fn ifrk4(&mut self, uh: &mut [Complex64], dt: f64) -> Result<()> {
        let (e, e2) = (&self.full, &self.half);
        self.ws.nonlinear(uh, &mut self.k1)?;
        for i in 0..uh.len() {
            self.stage[i] = e2[i] * (uh[i] + 0.5 * dt * self.k1[i]);
        }
        self.ws.nonlinear(&self.stage, &mut self.k2)?;
        for i in 0..uh.len() {
            self.stage[i] = e2[i] * uh[i] + 0.5 * dt * self.k2[i];
        }
        self.ws.nonlinear(&self.stage, &mut self.k3)?;
        for i in 0..uh.len() {
            self.stage[i] = e[i] * uh[i] + dt * e2[i] * self.k3[i];
        }
        self.ws.nonlinear(&self.stage, &mut self.k4)?;
        for i in 0..uh.len() {
            uh[i] = e[i] * uh[i]
                + dt / 6.0
                    * (e[i] * self.k1[i] + 2.0 * e2[i] * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
        Ok(())
    }

    fn strang(&mut self, uh: &mut [Complex64], dt: f64) -> Result<()> {
        for (u, e) in uh.iter_mut().zip(&self.half) {
            *u *= e;
        }
        self.ws.nonlinear(uh, &mut self.k1)?;
        for i in 0..uh.len() {
            self.stage[i] = uh[i] + 0.5 * dt * self.k1[i];
        }
        self.ws.nonlinear(&self.stage, &mut self.k2)?;
        for i in 0..uh.len() {
            self.stage[i] = uh[i] + 0.5 * dt * self.k2[i];
        }
        self.ws.nonlinear(&self.stage, &mut self.k3)?;
        for i in 0..uh.len() {
            self.stage[i] = uh[i] + dt * self.k3[i];
        }
        self.ws.nonlinear(&self.stage, &mut self.k4)?;
        for i in 0..uh.len() {
            uh[i] += dt / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
            uh[i] *= self.half[i];
        }
        Ok(())
    }
}

fn require_admissible(u: &Field, cfg: &SolverConfig) -> Result<()> {
    if u.grid() != &cfg.grid {
        return Err(Error::Config("field grid differs from solver grid".into()));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    if cfg.gamma > 0.0 {
        u.require_mean_zero(MEAN_ZERO_TOL)?;
    }
    Ok(())
}

/// One `dt` advance of `u`.
pub fn step(u: &Field, cfg: &SolverConfig) -> Result<Field> {
    require_admissible(u, cfg)?;
    let mut stepper = Stepper::new(cfg)?;
    let mut coeffs = u.coeffs().to_vec();
    stepper.advance(&mut coeffs)?;
    Field::from_coeffs(cfg.grid, coeffs)
}

/// `H[u] = int [-(beta/2) u_x^2 - (gamma/2)(dx^{-1} u)^2 - u^{k+2}/((k+1)(k+2))] dx`.
pub fn hamiltonian(u: &Field, beta: f64, gamma: f64, k: u32) -> f64 {
    let grid = u.grid();
    let length = grid.length();
    let mut grad = 0.0;
    let mut anti = 0.0;
    for (i, c) in u.coeffs().iter().enumerate() {
        let xi = grid.wavenumber(i);
        grad += xi * xi * c.norm_sqr();
        if i != 0 && gamma != 0.0 {
            anti += c.norm_sqr() / (xi * xi);
        }
    }
    let p = k as i32 + 2;
    let pot: f64 = u.samples().iter().map(|v| v.powi(p)).sum::<f64>() * grid.dx();
    let kf = k as f64;
    -0.5 * beta * length * grad - 0.5 * gamma * length * anti - pot / ((kf + 1.0) * (kf + 2.0))
}

/// Snapshots and conserved-quantity traces of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub l2: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub hs: Vec<f64>,
    /// `NaN` where the snapshot is not mean-zero.
    pub xs: Vec<f64>,
    pub s: f64,
    pub steps: usize,
    /// Largest relative L2 deviation seen at any step, not just at snapshots.
    pub max_l2_drift: f64,
    /// Largest absolute zero-mode change seen at any step.
    pub max_mean_change: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory holds the initial snapshot")
    }

    pub fn l2_drift(&self) -> f64 {
        relative_drift(&self.l2).max(self.max_l2_drift)
    }

    pub fn hamiltonian_drift(&self) -> f64 {
        relative_drift(&self.hamiltonian)
    }
}

fn relative_drift(trace: &[f64]) -> f64 {
    let Some(&first) = trace.first() else {
        return 0.0;
    };
    let scale = trace.iter().fold(first.abs(), |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    trace
        .iter()
        .map(|v| (v - first).abs())
        .fold(0.0, f64::max)
        / scale
}

fn record(traj: &mut Trajectory, t: f64, field: Field, cfg: &SolverConfig) {
    traj.times.push(t);
    traj.l2.push(field.l2_norm());
    traj.hamiltonian
        .push(hamiltonian(&field, cfg.beta, cfg.gamma, cfg.k));
    traj.hs.push(h_s_norm(&field, traj.s));
    traj.xs.push(x_s_norm(&field, traj.s).unwrap_or(f64::NAN));
    traj.fields.push(field);
}

/// Runs from `0` to `t_end`, recording a snapshot every `snapshot_every` steps and at the end.
pub fn evolve(u0: &Field, cfg: &SolverConfig, snapshot_every: usize) -> Result<Trajectory> {
    if snapshot_every == 0 {
        return Err(Error::Config("snapshot_every must be positive".into()));
    }
    require_admissible(u0, cfg)?;
    cfg.check_cfl(u0)?;
    let mut stepper = Stepper::new(cfg)?;
    let n_steps = cfg.n_steps();
    let mut traj = Trajectory {
        times: Vec::new(),
        fields: Vec::new(),
        l2: Vec::new(),
        hamiltonian: Vec::new(),
        hs: Vec::new(),
        xs: Vec::new(),
        s: cfg.monitor_s,
        steps: 0,
        max_l2_drift: 0.0,
        max_mean_change: 0.0,
    };
    record(&mut traj, 0.0, u0.clone(), cfg);
    let norm0 = u0.coeff_norm();
    let mean0 = u0.coeffs()[0];
    let mut uh = u0.coeffs().to_vec();
    for s in 1..=n_steps {
        stepper.advance(&mut uh)?;
        let norm = uh.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let t = s as f64 * cfg.dt;
        if norm > BLOWUP_GROWTH * norm0 {
            return Err(Error::Blowup {
                step: s,
                time: t,
                reason: format!("L2 norm grew from {norm0:e} to {norm:e}"),
            });
        }
        if norm0 > 0.0 {
            traj.max_l2_drift = traj.max_l2_drift.max((norm - norm0).abs() / norm0);
        }
        traj.max_mean_change = traj.max_mean_change.max((uh[0] - mean0).norm());
        if s % snapshot_every == 0 || s == n_steps {
            record(&mut traj, t, Field::from_coeffs(cfg.grid, uh.clone())?, cfg);
        }
    }
    traj.steps = n_steps;
    log::debug!(
        "evolve: {} steps, L2 drift {:e}, H drift {:e}",
        n_steps,
        traj.l2_drift(),
        traj.hamiltonian_drift()
    );
    Ok(traj)
}

/// Mean-zero Gaussian bump `amplitude exp(-((x - L/2)/width)^2)` with its mean removed.
pub fn gaussian_bump(grid: Grid, amplitude: f64, width: f64) -> Field {
    let center = 0.5 * grid.length();
    let f = Field::from_fn(grid, |x| amplitude * (-((x - center) / width).powi(2)).exp());
    crate::spectral::project_zero_mean(&f)
}

/// Relative residual accepted by the soliton constructor.
pub const SOLITON_RESIDUAL_TOL: f64 = 1e-8;

/// Output of [`soliton_initial_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonData {
    /// The traveling-wave profile `Q(x - L/2)` exactly as sampled.
    pub profile: Field,
    /// `profile` with its mean removed.
    pub projected: Field,
    /// L2 norm of the removed constant.
    pub projection_defect: f64,
    /// Relative residual from the closed-form derivatives.
    pub residual: f64,
    /// Same residual with spectral derivatives; limited by grid resolution.
    pub spectral_residual: f64,
    pub speed: f64,
    pub amplitude: f64,
    /// Inverse width of the sech profile.
    pub kappa: f64,
}

fn soliton_constants(c: f64, k: u32, beta: f64) -> (f64, f64) {
    let kf = k as f64;
    let amplitude = (c * (kf + 1.0) * (kf + 2.0) / 2.0).powf(1.0 / kf);
    let kappa = kf * c.sqrt() / (2.0 * beta.abs().sqrt());
    (amplitude, kappa)
}

/// Profile `Q` and its first and third derivatives at offset `y = x - x0`.
fn soliton_derivatives(amp: f64, kappa: f64, k: u32, y: f64) -> (f64, f64, f64) {
    let p = 2.0 / k as f64;
    let z = kappa * y;
    let sech = 1.0 / z.cosh();
    let tanh = z.tanh();
    let sp = sech.powf(p);
    let q = amp * sp;
    let q1 = -amp * p * kappa * sp * tanh;
    let q3 = -amp * p * kappa.powi(3) * sp * tanh * (p * p * tanh * tanh - (3.0 * p + 2.0) * sech * sech);
    (q, q1, q3)
}

/// The gKdV traveling wave of speed `c`, residual-verified.
pub fn soliton_initial_data(c: f64, k: u32, beta: f64, grid: Grid) -> Result<SolitonData> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("soliton speed must be positive, got {c}")));
    }
    if !(beta < 0.0) {
        return Err(Error::Config(format!("beta must be negative, got {beta}")));
    }
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let (amp, kappa) = soliton_constants(c, k, beta);
    let center = 0.5 * grid.length();
    let xs = grid.points();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut samples = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (q, q1, q3) = soliton_derivatives(amp, kappa, k, x - center);
        let r = beta * q3 - q.powi(k as i32) * q1 + c * q1;
        num += r * r;
        den += q * q;
        samples.push(q);
    }
    let residual = (num / den).sqrt();
    if !(residual < SOLITON_RESIDUAL_TOL) {
        return Err(Error::NotASoliton {
            residual,
            tolerance: SOLITON_RESIDUAL_TOL,
        });
    }
    let profile = Field::from_samples(grid, &samples)?;
    let spectral_residual = {
        let d1 = crate::spectral::apply_multiplier(&profile, &crate::MultiplierSpec::Derivative(1))?;
        let d3 = crate::spectral::apply_multiplier(&profile, &crate::MultiplierSpec::Derivative(3))?;
        let (q1, q3) = (d1.samples(), d3.samples());
        let r: f64 = samples
            .iter()
            .zip(q1.iter().zip(&q3))
            .map(|(q, (a, b))| {
                let v = beta * b - q.powi(k as i32) * a + c * a;
                v * v
            })
            .sum();
        (r / den).sqrt()
    };
    let projected = crate::spectral::project_zero_mean(&profile);
    let projection_defect = profile.mean().abs() * grid.length().sqrt();
    Ok(SolitonData {
        profile,
        projected,
        projection_defect,
        residual,
        spectral_residual,
        speed: c,
        amplitude: amp,
        kappa,
    })
}

/// Final state and diagnostics of [`picard_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub times: Vec<f64>,
    /// Spatial coefficients of the final iterate at every lattice time.
    pub rows: Vec<Vec<Complex64>>,
    /// `sup_t ||v^{m+1}(t) - v^m(t)||_{L2}` for `m = 0, 1, ...`.
    pub differences: Vec<f64>,
    /// Ratios of successive differences.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Iteration at which convergence was declared.
    pub iterations: usize,
    grid: Grid,
    delta: f64,
}

/// Relative successive-difference size at which Picard declares convergence.
pub const PICARD_TOL: f64 = 1e-10;

impl PicardResult {
    pub fn final_field(&self) -> Field {
        Field::from_coeffs(self.grid, self.rows.last().cloned().unwrap_or_default())
            .expect("rows match grid")
    }

    /// The iterate on `[0, delta)` as a periodic-window space-time table.
    pub fn space_time(&self) -> Result<SpaceTimeField> {
        let m = self.rows.len() - 1;
        SpaceTimeField::from_coeff_rows(self.grid, self.delta, &self.rows[..m])
    }
}

fn l2_of(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (grid.length() * s).sqrt()
}

/// Duhamel-Picard iteration of the time-cut integral equation on `[0, delta]`.
pub fn picard_iterate(u0: &Field, cfg: &SolverConfig, delta: f64, n_iters: usize) -> Result<PicardResult> {
    require_admissible(u0, cfg)?;
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    if n_iters == 0 {
        return Err(Error::Config("n_iters must be positive".into()));
    }
    let grid = cfg.grid;
    let n = grid.n_points();
    let m = (delta / cfg.dt).round().max(1.0) as usize;
    let h = delta / m as f64;
    let times: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let phi = cfg.symbol().table(&grid);
    let nyq = grid.nyquist_slot();
    let prop = |t: f64| -> Vec<Complex64> {
        phi.iter()
            .enumerate()
            .map(|(i, p)| {
                if i == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, -t * p)
                }
            })
            .collect()
    };
    let forward: Vec<Vec<Complex64>> = times.iter().map(|&t| prop(t)).collect();
    let u0h = u0.coeffs();
    let mut current: Vec<Vec<Complex64>> = forward
        .iter()
        .map(|e| e.iter().zip(u0h).map(|(a, b)| a * b).collect())
        .collect();
    let mut ws = Workspace::new(&grid, cfg.k);
    let mut nl = vec![Complex64::new(0.0, 0.0); n];
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut bad_run = 0;
    for iter in 1..=n_iters {
        // Interaction-picture integrand g(t) = e^{i phi t} N(psi v(t)).
        let mut integrand: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        for (r, &t) in times.iter().enumerate() {
            let cut = scaled_time_cutoff(t, delta);
            let scaled: Vec<Complex64> = current[r].iter().map(|c| c * cut).collect();
            if cfg.nonlinear {
                ws.nonlinear(&scaled, &mut nl)?;
            } else {
                nl.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            }
            integrand.push(
                nl.iter()
                    .zip(&forward[r])
                    .map(|(a, e)| a * e.conj())
                    .collect(),
            );
        }
        let mut acc = u0h.to_vec();
        let mut next = Vec::with_capacity(m + 1);
        next.push(current[0].iter().map(|_| Complex64::new(0.0, 0.0)).collect::<Vec<_>>());
        for (i, (e, c)) in forward[0].iter().zip(u0h).enumerate() {
            next[0][i] = e * c;
        }
        for r in 1..=m {
            for i in 0..n {
                acc[i] += 0.5 * h * (integrand[r - 1][i] + integrand[r][i]);
            }
            next.push(acc.iter().zip(&forward[r]).map(|(a, e)| a * e).collect());
        }
        let diff = (0..=m)
            .map(|r| l2_of(&grid, &next[r], &current[r]))
            .fold(0.0, f64::max);
        let scale = next
            .iter()
            .map(|row| row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * grid.length().sqrt())
            .fold(0.0, f64::max);
        if let Some(&prev) = differences.last() {
            let ratio = if prev > 0.0 { diff / prev } else { 0.0 };
            ratios.push(ratio);
            bad_run = if ratio >= 1.0 { bad_run + 1 } else { 0 };
        }
        differences.push(diff);
        current = next;
        iterations = iter;
        if diff <= PICARD_TOL * scale || diff == 0.0 {
            converged = true;
            break;
        }
        if bad_run >= 3 {
            return Err(Error::ContractionFailure {
                iteration: iter,
                ratios,
            });
        }
    }
    Ok(PicardResult {
        times,
        rows: current,
        differences,
        ratios,
        converged,
        iterations,
        grid,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{apply_multiplier, project_zero_mean, MultiplierSpec};
    use std::f64::consts::PI;

    fn cfg(n: usize, length: f64, gamma: f64, k: u32, dt: f64, t_end: f64) -> SolverConfig {
        SolverConfig::new(Grid::new(n, length).unwrap(), -1.0, gamma, k, dt, t_end).unwrap()
    }

    #[test]
    fn config_validation() {
        let g = Grid::new(32, 10.0).unwrap();
        assert!(SolverConfig::new(g, 1.0, 1.0, 5, 0.01, 1.0).is_err());
        assert!(SolverConfig::new(g, -1.0, -0.1, 5, 0.01, 1.0).is_err());
        assert!(SolverConfig::new(g, -1.0, 1.0, 0, 0.01, 1.0).is_err());
        assert!(SolverConfig::new(g, -1.0, 1.0, 5, 0.0, 1.0).is_err());
        let c = SolverConfig::new(g, -1.0, 1.0, 2, 0.01, 1.0).unwrap();
        assert!(c.outside_well_posed_range());
        assert!(!SolverConfig::new(g, -1.0, 1.0, 5, 0.01, 1.0).unwrap().outside_well_posed_range());
    }

    #[test]
    fn cfl_guard_uses_amplitude() {
        let c = cfg(64, 10.0, 1.0, 5, 0.05, 1.0);
        let small = gaussian_bump(c.grid, 0.5, 1.0);
        assert!(c.check_cfl(&small).is_ok());
        let big = gaussian_bump(c.grid, 3.0, 1.0);
        assert!(matches!(c.check_cfl(&big), Err(Error::Config(_))));
    }

    #[test]
    fn nonlinear_term_of_cosine() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let u = Field::from_fn(g, f64::cos);
        let n = nonlinear_term(&u, 1).unwrap().samples();
        let err = g
            .points()
            .iter()
            .zip(&n)
            .map(|(x, v)| (v - 0.5 * (2.0 * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let z = nonlinear_term(&Field::zeros(g), 5).unwrap();
        assert_eq!(z.coeff_norm(), 0.0);
    }

    #[test]
    fn nonlinear_term_matches_oversampled_oracle() {
        let n = 128;
        let k = 5;
        let g = Grid::new(n, 7.0).unwrap();
        let cut = crate::spectral::dealias_cutoff(n, k as usize + 1) as i64;
        // Band-limited random data within the dealiasing band.
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for j in 1..=cut.min(10) {
            let c = Complex64::new(next(), next()) * 0.3;
            coeffs[j as usize] = c;
            coeffs[n - j as usize] = c.conj();
        }
        let u = Field::from_coeffs(g, coeffs.clone()).unwrap();
        let fast = nonlinear_term(&u, k).unwrap();

        // Oracle: zero-pad by 4, take the power exactly, truncate to the same band.
        let big = 4 * n;
        let gb = Grid::new(big, 7.0).unwrap();
        let mut padded = vec![Complex64::new(0.0, 0.0); big];
        for i in 0..n {
            let j = crate::spectral::signed_index(i, n);
            if j.abs() < (n / 2) as i64 {
                padded[gb.slot_of(j).unwrap()] = coeffs[i];
            }
        }
        let samples: Vec<f64> = crate::spectral::inverse_transform(&padded)
            .into_iter()
            .map(|v| v.powi(k as i32 + 1))
            .collect();
        let pow = crate::spectral::forward_transform(&gb, &samples).unwrap();
        let mut expect = vec![Complex64::new(0.0, 0.0); n];
        for (i, e) in expect.iter_mut().enumerate() {
            let j = crate::spectral::signed_index(i, n);
            if j != 0 && j.abs() <= cut && i != g.nyquist_slot() {
                let xi = g.wavenumber(i);
                *e = Complex64::new(0.0, -xi / (k as f64 + 1.0)) * pow[gb.slot_of(j).unwrap()];
            }
        }
        let err = fast
            .coeffs()
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = expect.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-11 * scale.max(1.0), "err {err} scale {scale}");
    }

    #[test]
    fn linear_steps_match_propagator() {
        let c = cfg(128, 20.0, 1.0, 5, 0.01, 1.0).linear_only();
        let u0 = gaussian_bump(c.grid, 1.0, 1.5);
        let traj = evolve(&u0, &c, 100).unwrap();
        let exact = apply_multiplier(
            &u0,
            &MultiplierSpec::Propagator {
                symbol: c.symbol(),
                t: 1.0,
            },
        )
        .unwrap();
        let err = traj.last().sub(&exact).l2_norm() / u0.l2_norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn stationary_cosine_without_nonlinearity() {
        let c = cfg(32, 2.0 * PI, 1.0, 5, 0.1, 3.0).linear_only();
        let u0 = Field::from_fn(c.grid, f64::cos);
        let traj = evolve(&u0, &c, 10).unwrap();
        for f in &traj.fields {
            assert!(f.sub(&u0).l2_norm() < 1e-13);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let c = cfg(64, 10.0, 1.0, 5, 0.01, 0.2);
        let traj = evolve(&Field::zeros(c.grid), &c, 5).unwrap();
        assert!(traj.fields.iter().all(|f| f.coeff_norm() == 0.0));
    }

    #[test]
    fn first_snapshot_is_bitwise_initial_data() {
        let c = cfg(64, 10.0, 1.0, 5, 0.01, 0.1);
        let u0 = gaussian_bump(c.grid, 0.5, 1.0);
        let traj = evolve(&u0, &c, 3).unwrap();
        assert_eq!(traj.fields[0], u0);
        let expect = [0.0, 0.03, 0.06, 0.09, 0.1];
        assert!(traj.times.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.len(), 5);
        assert!(evolve(&u0, &c, 0).is_err());
    }

    #[test]
    fn mean_violation_rejected_when_rotating() {
        let c = cfg(64, 10.0, 1.0, 5, 0.01, 0.1);
        let u = Field::from_fn(c.grid, |x| 1.0 + 0.1 * x.sin());
        assert!(matches!(step(&u, &c), Err(Error::MeanZeroViolation { .. })));
        assert!(step(&u, &c.with_gamma(0.0)).is_ok());
    }

    #[test]
    fn blowup_is_reported() {
        let c = cfg(64, 10.0, 0.0, 5, 0.15, 5.0);
        let big = gaussian_bump(c.grid, 3.0, 0.5);
        let c = SolverConfig { cfl_safety: 1.0, ..c };
        assert!(c.check_cfl(&big).is_err());
        let c = SolverConfig { nonlinear: true, ..c };
        let mut st = Stepper::new(&c).unwrap();
        let mut uh = big.coeffs().to_vec();
        let mut outcome = Ok(());
        for _ in 0..200 {
            outcome = st.advance(&mut uh);
            if outcome.is_err() {
                break;
            }
        }
        assert!(matches!(outcome, Err(Error::Blowup { .. })), "{outcome:?}");
        assert!(matches!(evolve(&big, &c, 1), Err(Error::Config(_))));
    }

    fn self_error(c: &SolverConfig, u0: &Field, reference: &Field) -> f64 {
        evolve(u0, c, usize::MAX).unwrap().last().sub(reference).l2_norm()
    }

    #[test]
    fn ifrk4_converges_at_fourth_order() {
        let base = cfg(128, 30.0, 1.0, 5, 0.004, 0.4);
        let u0 = gaussian_bump(base.grid, 1.2, 1.5);
        let dt = base.dt;
        let reference = evolve(&u0, &base.with_dt(dt / 32.0), usize::MAX).unwrap().last().clone();
        let e1 = self_error(&base, &u0, &reference);
        let e2 = self_error(&base.with_dt(dt / 2.0), &u0, &reference);
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order} ({e1:e} -> {e2:e})");
    }

    #[test]
    fn split_step_is_second_order() {
        let base = cfg(128, 30.0, 1.0, 5, 0.004, 0.4).with_integrator(Integrator::SplitStep);
        let u0 = gaussian_bump(base.grid, 1.2, 1.5);
        let reference = evolve(&u0, &base.with_integrator(Integrator::Ifrk4).with_dt(0.0005), usize::MAX)
            .unwrap()
            .last()
            .clone();
        let e1 = self_error(&base, &u0, &reference);
        let e2 = self_error(&base.with_dt(0.002), &u0, &reference);
        let order = (e1 / e2).log2();
        assert!((1.7..2.5).contains(&order), "{order}");
    }

    #[test]
    fn hamiltonian_formula_passes_finite_difference_oracle() {
        // Along a trajectory, dH/dt from centered differences must vanish relative to the
        // rate of change of the individual energy terms.
        let c = cfg(512, 40.0, 1.0, 5, 1e-4, 0.02);
        let u0 = gaussian_bump(c.grid, 1.0, 1.0);
        let traj = evolve(&u0, &c, 50).unwrap();
        let h = traj.hamiltonian.clone();
        let dt = traj.times[1] - traj.times[0];
        let grad_term = |f: &Field| -> f64 {
            let g = f.grid();
            f.coeffs().iter().enumerate().map(|(i, c)| g.wavenumber(i).powi(2) * c.norm_sqr()).sum::<f64>() * g.length() * 0.5
        };
        let gt: Vec<f64> = traj.fields.iter().map(grad_term).collect();
        for i in 1..h.len() - 1 {
            let dh = (h[i + 1] - h[i - 1]) / (2.0 * dt);
            let dterm = (gt[i + 1] - gt[i - 1]) / (2.0 * dt);
            assert!(dterm.abs() > 1e-3, "term derivative too small to be informative");
            assert!(dh.abs() < 1e-6 * dterm.abs().max(1.0), "dH/dt = {dh}, term rate {dterm}");
        }
        // Flipping the sign of the potential breaks conservation.
        let wrong: Vec<f64> = traj
            .fields
            .iter()
            .map(|f| {
                let p: f64 = f.samples().iter().map(|v| v.powi(7)).sum::<f64>() * f.grid().dx() / 42.0;
                hamiltonian(f, -1.0, 1.0, 5) + 2.0 * p
            })
            .collect();
        let dw = (wrong[2] - wrong[0]) / (2.0 * dt);
        assert!(dw.abs() > 1e-3);
    }

    #[test]
    fn conservation_on_short_run() {
        let c = cfg(512, 40.0, 1.0, 5, 1e-3, 0.2);
        let u0 = gaussian_bump(c.grid, 1.0, 1.0);
        let traj = evolve(&u0, &c, 20).unwrap();
        assert!(traj.l2_drift() < 1e-8, "{}", traj.l2_drift());
        assert!(traj.hamiltonian_drift() < 1e-6, "{}", traj.hamiltonian_drift());
        assert!(traj.max_mean_change < 1e-13);
    }

    #[test]
    fn soliton_constants_and_shape() {
        let g = Grid::new(1024, 80.0).unwrap();
        let sol = soliton_initial_data(1.0, 5, -1.0, g).unwrap();
        assert!(sol.residual < 1e-8);
        let samples = sol.profile.samples();
        let (imax, _) = samples
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        assert_eq!(imax, 512);
        assert!(sol.projection_defect > 0.0);
        assert!(project_zero_mean(&sol.profile) == sol.projected);
        assert!(soliton_initial_data(-1.0, 5, -1.0, g).is_err());
    }

    fn fwhm(field: &Field) -> f64 {
        let s = field.samples();
        let dx = field.grid().dx();
        let peak = s.iter().cloned().fold(f64::MIN, f64::max);
        let half = 0.5 * peak;
        let imax = s.iter().position(|&v| v == peak).unwrap();
        let cross = |dir: i64| -> f64 {
            let mut i = imax as i64;
            loop {
                let j = i + dir;
                if s[j as usize] < half {
                    let (a, b) = (s[i as usize], s[j as usize]);
                    return (i as f64 + dir as f64 * (a - half) / (a - b)) * dx;
                }
                i = j;
            }
        };
        cross(1) - cross(-1)
    }

    #[test]
    fn soliton_width_scales_like_inverse_root_speed() {
        let g = Grid::new(2048, 80.0).unwrap();
        let w1 = fwhm(&soliton_initial_data(1.0, 5, -1.0, g).unwrap().profile);
        let w2 = fwhm(&soliton_initial_data(2.0, 5, -1.0, g).unwrap().profile);
        let ratio = w1 / w2;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn picard_zero_data_is_fixed_point() {
        let c = cfg(64, 10.0, 1.0, 5, 0.005, 1.0);
        let r = picard_iterate(&Field::zeros(c.grid), &c, 0.05, 10).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.differences, vec![0.0]);
    }

    #[test]
    fn picard_agrees_with_stepper() {
        let c = cfg(256, 40.0, 1.0, 5, 0.001, 0.05);
        let u0 = gaussian_bump(c.grid, 0.3, 1.0);
        let r = picard_iterate(&u0, &c, 0.05, 30).unwrap();
        assert!(r.converged, "{:?}", r.differences);
        assert!(r.ratios.iter().all(|&q| q < 0.5), "{:?}", r.ratios);
        let stepped = evolve(&u0, &c, usize::MAX).unwrap();
        let err = r.final_field().sub(stepped.last()).l2_norm();
        assert!(err < 1e-6, "{err}");
        let stf = r.space_time().unwrap();
        assert_eq!(stf.n_t(), 50);
    }

    #[test]
    fn picard_detects_non_contraction() {
        let c = cfg(64, 10.0, 1.0, 5, 0.01, 1.0);
        let u0 = gaussian_bump(c.grid, 4.0, 0.5);
        match picard_iterate(&u0, &c, 1.0, 40) {
            Err(Error::ContractionFailure { .. }) => {}
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected a contraction failure, got {other:?}"),
        }
    }
}
