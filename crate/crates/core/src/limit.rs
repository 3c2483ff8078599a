//! Weak-rotation limit: convergence of the rotating solution to the `gamma = 0`
//! solution as `gamma -> 0`, with Gronwall and `X_s` growth diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::x_s_norm;
use crate::solver::{evolve, SolverConfig, Trajectory};
use crate::spectral::Field;

/// Relative L2 drift above which a run is excluded from the fit.
pub const L2_DRIFT_GATE: f64 = 1e-8;
/// Relative Hamiltonian drift above which a run is excluded from the fit.
pub const HAMILTONIAN_DRIFT_GATE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    /// Shared solver settings; `gamma` is overridden per point and `t_end` by `t_cmp`.
    pub template: SolverConfig,
    pub t_cmp: f64,
    pub s: f64,
    pub snapshot_every: usize,
    /// Points whose error is within this factor of the self-error are floor-limited.
    pub floor_factor: f64,
    /// Rotation of the comparison solution; 0 gives the gKdV reference.
    pub reference_gamma: f64,
}

impl SweepConfig {
    pub fn new(template: SolverConfig, t_cmp: f64) -> Self {
        Self {
            gammas: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            template,
            t_cmp,
            s: 2.0,
            snapshot_every: 10,
            floor_factor: 10.0,
            reference_gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::Config("the gamma list is empty".into()));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::Config(format!("every gamma must be positive, got {g}")));
        }
        let mut sorted = self.gammas.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("gamma values must be distinct".into()));
        }
        if !(self.t_cmp > 0.0 && self.t_cmp <= self.template.t_end) {
            return Err(Error::Config(format!(
                "t_cmp = {} must lie in (0, t_end = {}]",
                self.t_cmp, self.template.t_end
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        if !(self.reference_gamma >= 0.0) {
            return Err(Error::Config("reference_gamma must be >= 0".into()));
        }
        self.template.validate()
    }

    fn run_config(&self, gamma: f64) -> SolverConfig {
        let mut cfg = self.template.with_gamma(gamma).with_t_end(self.t_cmp);
        cfg.monitor_s = self.s;
        cfg
    }
}

/// One `gamma` of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub gamma: f64,
    /// `||u^gamma(T) - v(T)||_{L2}`; `NaN` when the run failed.
    pub error: f64,
    pub floor_limited: bool,
    pub conserved: bool,
    pub l2_drift: f64,
    pub hamiltonian_drift: f64,
    pub failure: Option<String>,
    /// Gronwall constant of this point.
    pub c_star: f64,
    pub envelope_ok: bool,
    /// `sup_t ||u^gamma||_{X_s}`.
    pub sup_xs: f64,
    #[serde(skip)]
    pub xs_trace: Vec<f64>,
}

impl RatePoint {
    pub fn in_fit(&self) -> bool {
        self.failure.is_none() && self.conserved && !self.floor_limited && self.error > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Sorted by decreasing `gamma`.
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
    pub n_fit: usize,
    /// Estimated discretization error of the reference run.
    pub self_error: f64,
    pub max_error_over_gamma: f64,
    /// `max / min` of `e(gamma)/gamma` over fitted points.
    pub error_over_gamma_spread: f64,
    /// `max / min` of the Gronwall constant over fitted points.
    pub c_star_spread: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub reference_xs: Vec<f64>,
}

/// Least-squares line `y = slope x + intercept`; returns `(slope, intercept, rms residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Runs the reference and every rotating solution from the same data and fits `log e` against `log gamma`.
pub fn rotation_limit_sweep(cfg: &SweepConfig, u0: &Field) -> Result<RateReport> {
    cfg.validate()?;
    u0.require_mean_zero(crate::spectral::MEAN_ZERO_TOL)?;
    let ref_cfg = cfg.run_config(cfg.reference_gamma);
    let (reference, half) = rayon::join(
        || evolve(u0, &ref_cfg, cfg.snapshot_every),
        || {
            let fine = ref_cfg.with_dt(0.5 * ref_cfg.dt);
            evolve(u0, &fine, usize::MAX)
        },
    );
    let reference = reference?;
    let self_error = reference.last().sub(half?.last()).l2_norm() * 16.0 / 15.0;

    let mut gammas = cfg.gammas.clone();
    gammas.sort_by(|a, b| b.total_cmp(a));
    let points: Vec<RatePoint> = gammas
        .par_iter()
        .map(|&gamma| run_point(cfg, gamma, u0, &reference, self_error))
        .collect();

    let fitted: Vec<&RatePoint> = points.iter().filter(|p| p.in_fit()).collect();
    let lx: Vec<f64> = fitted.iter().map(|p| p.gamma.ln()).collect();
    let ly: Vec<f64> = fitted.iter().map(|p| p.error.ln()).collect();
    let (slope, intercept, fit_residual) = linear_fit(&lx, &ly);
    let max_error_over_gamma = fitted
        .iter()
        .map(|p| p.error / p.gamma)
        .fold(0.0, f64::max);
    log::info!(
        "sweep: slope {slope:.4} over {} points, self-error {self_error:e}",
        fitted.len()
    );
    Ok(RateReport {
        n_fit: fitted.len(),
        error_over_gamma_spread: spread(fitted.iter().map(|p| p.error / p.gamma)),
        c_star_spread: spread(fitted.iter().map(|p| p.c_star)),
        points,
        slope,
        intercept,
        fit_residual,
        self_error,
        max_error_over_gamma,
        times: reference.times.clone(),
        reference_xs: reference.xs.clone(),
    })
}

fn run_point(
    cfg: &SweepConfig,
    gamma: f64,
    u0: &Field,
    reference: &Trajectory,
    self_error: f64,
) -> RatePoint {
    let failed = |msg: String| RatePoint {
        gamma,
        error: f64::NAN,
        floor_limited: false,
        conserved: false,
        l2_drift: f64::NAN,
        hamiltonian_drift: f64::NAN,
        failure: Some(msg),
        c_star: f64::NAN,
        envelope_ok: false,
        sup_xs: f64::NAN,
        xs_trace: Vec::new(),
    };
    let traj = match evolve(u0, &cfg.run_config(gamma), cfg.snapshot_every) {
        Ok(t) => t,
        Err(e) => return failed(e.to_string()),
    };
    let error = traj.last().sub(reference.last()).l2_norm();
    let l2_drift = traj.l2_drift();
    let hamiltonian_drift = traj.hamiltonian_drift();
    let gron = gronwall_consistency_check(&traj, reference, gamma, cfg.template.k);
    let (c_star, envelope_ok) = match &gron {
        Ok(g) => (g.c_star, g.envelope_ok),
        Err(_) => (f64::NAN, false),
    };
    RatePoint {
        gamma,
        error,
        floor_limited: error <= cfg.floor_factor * self_error,
        conserved: l2_drift < L2_DRIFT_GATE && hamiltonian_drift < HAMILTONIAN_DRIFT_GATE,
        l2_drift,
        hamiltonian_drift,
        failure: None,
        c_star,
        envelope_ok,
        sup_xs: traj.xs.iter().cloned().fold(0.0, f64::max),
        xs_trace: traj.xs,
    }
}

/// Second-order finite-difference derivative on a uniform lattice.
pub fn lattice_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::LatticeMismatch("at least three snapshots are needed".into()));
    }
    let h = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(Error::LatticeMismatch("snapshot times are not uniform".into()));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub gamma: f64,
    pub c_star: f64,
    /// `sup_t (||u||_{X_s} + ||v||_{X_s})`.
    pub m_sum: f64,
    /// `sup_t ||u||_{X_s}`.
    pub m_u: f64,
    pub w_norms: Vec<f64>,
    pub dw_dt: Vec<f64>,
    pub envelope: Vec<f64>,
    pub envelope_ok: bool,
}

/// Smallest `C` with `d/dt ||w|| <= C (M^k ||w|| + gamma M_u)` on the lattice, `w = u - v`.
pub fn gronwall_consistency_check(u: &Trajectory, v: &Trajectory, gamma: f64, k: u32) -> Result<GronwallReport> {
    if u.times.len() != v.times.len()
        || u.times.iter().zip(&v.times).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::LatticeMismatch("trajectories use different snapshot times".into()));
    }
    if u.fields[0].grid() != v.fields[0].grid() {
        return Err(Error::LatticeMismatch("trajectories use different grids".into()));
    }
    let h = uniform_step(&u.times)?;
    let s = u.s;
    let xs = |f: &Field| x_s_norm(f, s).unwrap_or(f64::NAN);
    let xu: Vec<f64> = u.fields.iter().map(xs).collect();
    let xv: Vec<f64> = v.fields.iter().map(xs).collect();
    let m_sum = xu.iter().zip(&xv).map(|(a, b)| a + b).fold(0.0, f64::max);
    let m_u = xu.iter().cloned().fold(0.0, f64::max);
    let w_norms: Vec<f64> = u
        .fields
        .iter()
        .zip(&v.fields)
        .map(|(a, b)| a.sub(b).l2_norm())
        .collect();
    let dw_dt = lattice_derivative(&w_norms, h);
    let growth = m_sum.powi(k as i32);
    let mut c_star: f64 = 0.0;
    for (w, d) in w_norms.iter().zip(&dw_dt) {
        let denom = growth * w + gamma.abs() * m_u;
        if *d > 0.0 && denom > 0.0 {
            c_star = c_star.max(d / denom);
        }
    }
    let a = c_star * growth;
    let b = c_star * gamma.abs() * m_u;
    let w0 = w_norms[0];
    let envelope: Vec<f64> = u
        .times
        .iter()
        .map(|&t| {
            if a > 0.0 {
                let grow = if w0 == 0.0 { 0.0 } else { w0 * (a * t).exp() };
                grow + b / a * (a * t).exp_m1()
            } else {
                w0 + b * t
            }
        })
        .collect();
    let slack = 1e-12 * w_norms.iter().cloned().fold(0.0, f64::max);
    let envelope_ok = w_norms
        .iter()
        .zip(&envelope)
        .all(|(w, e)| *w <= e * (1.0 + 1e-3) + slack);
    Ok(GronwallReport {
        gamma,
        c_star,
        m_sum,
        m_u,
        w_norms,
        dw_dt,
        envelope,
        envelope_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XsGrowthReport {
    pub s: f64,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Smallest `C0` with `d/dt ||u||_{X_s} <= C0 ||u||_{X_s}^{k+1}` on the lattice.
    pub c0: f64,
    pub max_xs: f64,
    pub bounded: bool,
    /// Strictly increasing with growing increments over the whole run.
    pub monotone_blowup: bool,
}

/// Records `||u(t)||_{X_s}` and fits the differential-inequality constant.
pub fn xs_growth_monitor(traj: &Trajectory, s: f64, k: u32) -> Result<XsGrowthReport> {
    let h = uniform_step(&traj.times)?;
    let xs: Vec<f64> = traj
        .fields
        .iter()
        .map(|f| x_s_norm(f, s))
        .collect::<Result<_>>()?;
    let deriv = lattice_derivative(&xs, h);
    let mut c0: f64 = 0.0;
    for (x, d) in xs.iter().zip(&deriv) {
        let noise = 64.0 * f64::EPSILON * x / h;
        if *d > noise && *x > 0.0 {
            c0 = c0.max(d / x.powi(k as i32 + 1));
        }
    }
    let max_xs = xs.iter().cloned().fold(0.0, f64::max);
    let incr: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone_blowup = incr.len() >= 2
        && incr.iter().all(|d| *d > 0.0)
        && incr.windows(2).all(|w| w[1] > w[0]);
    Ok(XsGrowthReport {
        s,
        times: traj.times.clone(),
        bounded: max_xs.is_finite() && !monotone_blowup,
        xs,
        c0,
        max_xs,
        monotone_blowup,
    })
}
