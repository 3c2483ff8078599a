use std::path::Path;

use anyhow::{bail, Result};
use log::info;
use ostrovsky::estimates::{run_probe, EstimateTag, MultilinearSetup, ProbeSetup, RatioReport};
use ostrovsky::kernel::{decay_study, kernel_mixed_norm_report, DecayOptions, KernelSpec, MixedNormOptions, RegionTag};
use ostrovsky::limit::{rotation_limit_sweep, SweepConfig};
use ostrovsky::norms::h_s_norm;
use ostrovsky::snapshot::Snapshot;
use ostrovsky::solver::{evolve, gaussian_bump, picard_iterate, soliton_initial_data, SolverConfig, Trajectory};
use ostrovsky::{Field, Grid};
use serde_json::json;

use crate::config::{
    self, EstimatesConfig, InitialData, InvariantsConfig, KernelConfig, PicardConfig, SolveConfig, SweepGammaConfig,
};
use crate::output::{jnum, jnums, loglog_svg, num, RunDir, Series};
use crate::{CheckFailed, ConfigError};

fn initial_field(init: &InitialData, grid: Grid, beta: f64, k: u32) -> Result<Field> {
    Ok(match init {
        InitialData::Gaussian { amplitude, width } => gaussian_bump(grid, *amplitude, *width),
        InitialData::GaussianH1 { h1_norm, width } => {
            let bump = gaussian_bump(grid, 1.0, *width);
            bump.scaled(h1_norm / h_s_norm(&bump, 1.0))
        }
        InitialData::Soliton { speed } => soliton_initial_data(*speed, k, beta, grid)?.profile,
        InitialData::Snapshot { path } => {
            let snap = Snapshot::load(path)?;
            if snap.header.n != grid.n_points() || snap.header.length != grid.length() {
                return Err(ConfigError(format!(
                    "snapshot {} is on n = {}, L = {}, but the run grid is n = {}, L = {}",
                    path.display(),
                    snap.header.n,
                    snap.header.length,
                    grid.n_points(),
                    grid.length()
                ))
                .into());
            }
            snap.field()?
        }
        InitialData::Zero => Field::zeros(grid),
    })
}

fn trace_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    (0..traj.len())
        .map(|i| {
            vec![
                num(traj.times[i]),
                num(traj.l2[i]),
                num(traj.hamiltonian[i]),
                num(traj.hs[i]),
                num(traj.xs[i]),
            ]
        })
        .collect()
}

const TRACE_HEADER: [&str; 5] = ["t", "l2", "hamiltonian", "hs", "xs"];

pub fn solve(config_path: Option<&Path>, out: &Path) -> Result<()> {
    let Some(path) = config_path else {
        return Err(ConfigError("solve requires --config".into()).into());
    };
    let c: SolveConfig = config::load(path)?;
    let grid = Grid::new(c.grid.n_points, c.grid.length)?;
    let mut sc = SolverConfig::new(grid, c.equation.beta, c.equation.gamma, c.equation.k, c.time.dt, c.time.t_end)?
        .with_integrator(c.time.integrator);
    sc.monitor_s = c.time.monitor_s;
    sc.cfl_safety = c.time.cfl_safety;
    let u0 = initial_field(&c.initial, grid, c.equation.beta, c.equation.k)?;
    let dir = RunDir::create(out)?;
    info!("solve: n = {}, {} steps", grid.n_points(), sc.n_steps());
    let traj = evolve(&u0, &sc, c.time.snapshot_every)?;

    dir.write_csv("traces.csv", &TRACE_HEADER, &trace_rows(&traj))?;
    std::fs::create_dir_all(dir.file("snapshots"))?;
    for (i, (t, f)) in traj.times.iter().zip(&traj.fields).enumerate() {
        Snapshot::from_field(f, sc.beta, sc.gamma, sc.k, *t).save(&dir.file(&format!("snapshots/snap_{i:05}.txt")))?;
    }
    dir.write_json(
        "summary.json",
        &json!({
            "steps": traj.steps,
            "snapshots": traj.len(),
            "l2_drift": jnum(traj.l2_drift()),
            "hamiltonian_drift": jnum(traj.hamiltonian_drift()),
            "max_mean_change": jnum(traj.max_mean_change),
        }),
    )?;
    dir.write_manifest("solve", &c, None, traj.steps)?;
    println!(
        "solve: {} steps, L2 drift {:e}, H drift {:e}",
        traj.steps,
        traj.l2_drift(),
        traj.hamiltonian_drift()
    );
    Ok(())
}

pub fn sweep_gamma(config_path: Option<&Path>, out: &Path) -> Result<()> {
    let c: SweepGammaConfig = config::load_or_default(config_path)?;
    let grid = Grid::new(c.grid.n_points, c.grid.length)?;
    let template = SolverConfig::new(grid, c.beta, c.sweep.reference_gamma, c.k, c.dt, c.sweep.t_cmp)?;
    let sweep = SweepConfig {
        gammas: c.sweep.gammas.clone(),
        template,
        t_cmp: c.sweep.t_cmp,
        s: c.sweep.s,
        snapshot_every: c.sweep.snapshot_every,
        floor_factor: c.sweep.floor_factor,
        reference_gamma: c.sweep.reference_gamma,
    };
    let u0 = initial_field(&c.initial, grid, c.beta, c.k)?;
    let dir = RunDir::create(out)?;
    let r = rotation_limit_sweep(&sweep, &u0)?;

    let rows: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|p| {
            vec![
                num(p.gamma),
                num(p.error),
                num(p.error / p.gamma),
                p.in_fit().to_string(),
                p.floor_limited.to_string(),
                p.conserved.to_string(),
                num(p.l2_drift),
                num(p.hamiltonian_drift),
                num(p.c_star),
                num(p.sup_xs),
            ]
        })
        .collect();
    dir.write_csv(
        "rate.csv",
        &[
            "gamma",
            "error",
            "error_over_gamma",
            "in_fit",
            "floor_limited",
            "conserved",
            "l2_drift",
            "hamiltonian_drift",
            "c_star",
            "sup_xs",
        ],
        &rows,
    )?;
    dir.write_json(
        "rate.json",
        &json!({
            "slope": jnum(r.slope),
            "intercept": jnum(r.intercept),
            "fit_residual": jnum(r.fit_residual),
            "n_fit": r.n_fit,
            "self_error": jnum(r.self_error),
            "max_error_over_gamma": jnum(r.max_error_over_gamma),
            "error_over_gamma_spread": jnum(r.error_over_gamma_spread),
            "c_star_spread": jnum(r.c_star_spread),
            "gammas": jnums(&r.points.iter().map(|p| p.gamma).collect::<Vec<_>>()),
            "errors": jnums(&r.points.iter().map(|p| p.error).collect::<Vec<_>>()),
            "failures": r.points.iter().map(|p| p.failure.clone()).collect::<Vec<_>>(),
        }),
    )?;
    let measured: Vec<(f64, f64)> = r.points.iter().map(|p| (p.gamma, p.error)).collect();
    let fit: Vec<(f64, f64)> = r
        .points
        .iter()
        .filter(|p| p.in_fit())
        .map(|p| (p.gamma, (r.intercept + r.slope * p.gamma.ln()).exp()))
        .collect();
    let svg = loglog_svg(
        "weak-rotation error",
        "gamma",
        "||u_gamma(T) - v(T)||",
        &[
            Series {
                label: "measured",
                points: measured,
                color: "#1f77b4",
                dashed: false,
            },
            Series {
                label: &format!("fit, slope {:.3}", r.slope),
                points: fit,
                color: "#d62728",
                dashed: true,
            },
        ],
    );
    dir.write("rate.svg", &svg)?;
    dir.write_manifest("sweep-gamma", &c, None, r.points.len() + 2)?;
    println!("sweep-gamma: slope {:.4} over {} points", r.slope, r.n_fit);
    Ok(())
}

pub fn probe_kernel(config_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut c: KernelConfig = config::load_or_default(config_path)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    if c.n_blocks.is_empty() {
        return Err(ConfigError("n_blocks must not be empty".into()).into());
    }
    let base = KernelSpec::new(c.n_blocks[0], c.beta, c.gamma)?
        .with_tol(c.tol)
        .with_threshold(c.threshold);
    let opts = DecayOptions {
        samples_per_region: c.samples_per_region,
        seed: c.seed,
        scaled_x_max: c.scaled_x_max,
        scaled_t_max: c.scaled_t_max,
        fit_exponent: c.fit_exponent,
        fit_range: (c.fit_range[0], c.fit_range[1]),
        fit_points: c.fit_points,
    };
    let dir = RunDir::create(out)?;
    let study = decay_study(&base, &c.n_blocks, &opts)?;

    let mut rows = Vec::new();
    for rep in &study.reports {
        for s in &rep.samples {
            rows.push(vec![
                num(rep.n_block),
                s.region.label().to_string(),
                num(s.x),
                num(s.t),
                num(s.abs_k),
                num(s.bound),
                num(s.ratio),
            ]);
        }
    }
    dir.write_csv("kernel_regions.csv", &["n_block", "region", "x", "t", "abs_k", "bound", "ratio"], &rows)?;

    let mixed: Vec<serde_json::Value> = if c.gamma_exp > 0.0 {
        c.n_blocks
            .iter()
            .map(|&n| {
                let m = kernel_mixed_norm_report(&base.with_n(n), c.gamma_exp, &MixedNormOptions::default())?;
                Ok(json!({
                    "n_block": jnum(n),
                    "norm": jnum(m.norm),
                    "ratio": jnum(m.ratio),
                    "x_box": jnum(m.x_box),
                    "t_box": jnum(m.t_box),
                    "tail_fraction": jnum(m.tail_fraction),
                }))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let ratios: Vec<f64> = mixed.iter().filter_map(|m| m["ratio"].as_f64()).collect();
    let mixed_spread = if ratios.is_empty() {
        f64::NAN
    } else {
        ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let first = &study.reports[0];
    let per_n: Vec<serde_json::Value> = study
        .reports
        .iter()
        .map(|rep| {
            let stats: serde_json::Map<String, serde_json::Value> = RegionTag::ALL
                .iter()
                .map(|&r| {
                    let s = rep.stat(r);
                    (
                        r.label().to_string(),
                        json!({
                            "evaluated": s.evaluated,
                            "skipped": s.skipped,
                            "sup_ratio": jnum(s.sup_ratio),
                            "max_abs_k": jnum(s.max_abs_k),
                        }),
                    )
                })
                .collect();
            json!({
                "n_block": jnum(rep.n_block),
                "skip_fraction": jnum(rep.skip_fraction),
                "passed": rep.passed,
                "regions": stats,
            })
        })
        .collect();
    let spreads: serde_json::Map<String, serde_json::Value> =
        study.spreads.iter().map(|(r, s)| (r.label().to_string(), jnum(*s))).collect();
    dir.write_json(
        "kernel.json",
        &json!({
            "omega3_exponent": first.omega3_exponent.map(jnum),
            "omega3_envelope": first.omega3_envelope.iter().map(|(t, k)| json!([jnum(*t), jnum(*k)])).collect::<Vec<_>>(),
            "reports": per_n,
            "sup_ratio_spreads": spreads,
            "stable": study.stable,
            "gamma_exp": jnum(c.gamma_exp),
            "mixed_norm": mixed,
            "mixed_norm_spread": jnum(mixed_spread),
        }),
    )?;
    if !first.omega3_envelope.is_empty() {
        let env = first.omega3_envelope.clone();
        let (t0, k0) = env[0];
        let reference: Vec<(f64, f64)> = env.iter().map(|(t, _)| (*t, k0 * (t / t0).powf(-1.0 / 3.0))).collect();
        let svg = loglog_svg(
            &format!("third-region envelope, N = {}", first.n_block),
            "t",
            "sup_x |K(x, t)|",
            &[
                Series {
                    label: "measured",
                    points: env,
                    color: "#1f77b4",
                    dashed: false,
                },
                Series {
                    label: "t^(-1/3)",
                    points: reference,
                    color: "#7f7f7f",
                    dashed: true,
                },
            ],
        );
        dir.write("kernel_decay.svg", &svg)?;
    }
    dir.write_manifest("probe-kernel", &c, Some(c.seed), study.reports.len())?;
    println!(
        "probe-kernel: exponent {}, stable {}, mixed-norm spread {:.4}",
        first.omega3_exponent.map_or("n/a".to_string(), |e| format!("{e:.4}")),
        study.stable,
        mixed_spread
    );
    Ok(())
}

fn probe_setup(c: &EstimatesConfig, tag: EstimateTag, seed: u64, draws: usize) -> Result<ProbeSetup> {
    let mut s = ProbeSetup::default_for(tag, seed, draws)?;
    if let Some(n) = c.n_points {
        s.ensemble.n_points = n;
    }
    if let Some(l) = c.length {
        s.ensemble.length = l;
    }
    if let Some(w) = c.window {
        s.ensemble.window = w;
    }
    if let Some(a) = c.amplitude {
        s.ensemble.amplitude = a;
    }
    if let Some(law) = c.law {
        s.ensemble.law = law;
    }
    if let Some(p) = c.params {
        s.params = p;
    }
    if let Some(b) = c.bilinear_s {
        s.bilinear_s = b;
    }
    if let Some(k) = c.multilinear_k {
        s.multilinear = MultilinearSetup::new(k);
    }
    s.ensemble.validate()?;
    Ok(s)
}

fn write_ratio_report(dir: &RunDir, r: &RatioReport) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..r.ratios.len())
        .map(|i| vec![r.draws[i].to_string(), num(r.lhs[i]), num(r.rhs[i]), num(r.ratios[i])])
        .collect();
    dir.write_csv(&format!("ratios_{}.csv", r.tag), &["draw", "lhs", "rhs", "ratio"], &rows)?;
    let levels: Vec<serde_json::Value> = r
        .levels
        .iter()
        .map(|l| {
            json!({
                "label": l.label,
                "n_points": l.n_points,
                "length": jnum(l.length),
                "window": jnum(l.window),
                "n_t": l.n_t,
                "max_ratio": jnum(l.max_ratio),
                "skipped": l.skipped,
            })
        })
        .collect();
    dir.write_json(
        &format!("summary_{}.json", r.tag),
        &json!({
            "tag": r.tag,
            "max_ratio": jnum(r.max_ratio),
            "refinement_factor": jnum(r.refinement_factor),
            "skipped": r.skipped,
            "stable": r.stable,
            "geometric_growth": r.geometric_growth,
            "levels": levels,
        }),
    )
}

pub fn probe_estimates(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    which: &[String],
    draws: Option<usize>,
) -> Result<()> {
    let mut c: EstimatesConfig = config::load_or_default(config_path)?;
    if !which.is_empty() {
        c.which = which.to_vec();
    }
    if seed.is_some() {
        c.seed = seed;
    }
    if draws.is_some() {
        c.draws = draws;
    }
    let tags: Vec<EstimateTag> = if c.which.is_empty() {
        EstimateTag::ALL.to_vec()
    } else {
        c.which
            .iter()
            .map(|w| w.parse::<EstimateTag>())
            .collect::<std::result::Result<_, _>>()?
    };
    let seed = c.seed.unwrap_or(1);
    let mut setups = Vec::with_capacity(tags.len());
    for &tag in &tags {
        let n = c.draws.unwrap_or(if tag == EstimateTag::Multilinear { 20 } else { 100 });
        if n == 0 {
            return Err(ConfigError("draws must be positive".into()).into());
        }
        setups.push(probe_setup(&c, tag, seed, n)?);
    }
    let dir = RunDir::create(out)?;
    let mut total_draws = 0;
    for s in &setups {
        let r = run_probe(s)?;
        total_draws += r.draws.len();
        write_ratio_report(&dir, &r)?;
        println!(
            "probe-estimates {}: max ratio {:.6}, refinement factor {:.4}, skipped {}, stable {}",
            r.tag, r.max_ratio, r.refinement_factor, r.skipped, r.stable
        );
    }
    dir.write_manifest("probe-estimates", &json!({ "request": c, "setups": setups }), Some(seed), total_draws)?;
    Ok(())
}

pub fn picard_check(config_path: Option<&Path>, out: &Path) -> Result<()> {
    let c: PicardConfig = config::load_or_default(config_path)?;
    let grid = Grid::new(c.grid.n_points, c.grid.length)?;
    let sc = SolverConfig::new(grid, c.beta, c.gamma, c.k, c.dt, c.delta)?;
    let u0 = initial_field(&c.initial, grid, c.beta, c.k)?;
    let dir = RunDir::create(out)?;
    let r = picard_iterate(&u0, &sc, c.delta, c.iterations)?;
    let stepped = evolve(&u0, &sc, usize::MAX)?;
    let gap = r.final_field().sub(stepped.last()).l2_norm();
    let fixed_point = r.converged && r.iterations == 1 && r.differences.iter().all(|d| *d == 0.0);

    let rows: Vec<Vec<String>> = r
        .differences
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let ratio = if i == 0 { f64::NAN } else { r.ratios[i - 1] };
            vec![(i + 1).to_string(), num(*d), num(ratio)]
        })
        .collect();
    dir.write_csv("picard.csv", &["iteration", "difference", "ratio"], &rows)?;
    dir.write_json(
        "picard.json",
        &json!({
            "converged": r.converged,
            "iterations": r.iterations,
            "fixed_point": fixed_point,
            "differences": jnums(&r.differences),
            "ratios": jnums(&r.ratios),
            "stepper_gap": jnum(gap),
            "h1_norm": jnum(h_s_norm(&u0, 1.0)),
        }),
    )?;
    dir.write_manifest("picard-check", &c, None, r.iterations)?;
    if fixed_point {
        println!("picard-check: fixed point at iteration 1");
    } else {
        println!(
            "picard-check: converged {} after {} iterations, stepper gap {gap:e}",
            r.converged, r.iterations
        );
    }
    Ok(())
}

pub fn invariants(config_path: Option<&Path>, out: &Path, snapshot: Option<&Path>) -> Result<()> {
    let mut c: InvariantsConfig = config::load_or_default(config_path)?;
    if let Some(p) = snapshot {
        c.snapshot = Some(p.to_path_buf());
    }
    let Some(path) = c.snapshot.clone() else {
        return Err(ConfigError("invariants requires a snapshot (--snapshot or `snapshot` key)".into()).into());
    };
    let snap = Snapshot::load(&path)?;
    let u0 = snap.field()?;
    let h = snap.header;
    let sc = SolverConfig::new(*u0.grid(), h.beta, h.gamma, h.k, c.dt, c.t_end)?;
    let dir = RunDir::create(out)?;
    let traj = evolve(&u0, &sc, c.snapshot_every)?;
    let (l2, ham) = (traj.l2_drift(), traj.hamiltonian_drift());
    let passed = l2 < c.l2_gate && ham < c.hamiltonian_gate;
    dir.write_csv("traces.csv", &TRACE_HEADER, &trace_rows(&traj))?;
    dir.write_json(
        "invariants.json",
        &json!({
            "snapshot_time": jnum(h.t),
            "l2_drift": jnum(l2),
            "hamiltonian_drift": jnum(ham),
            "max_mean_change": jnum(traj.max_mean_change),
            "l2_gate": jnum(c.l2_gate),
            "hamiltonian_gate": jnum(c.hamiltonian_gate),
            "passed": passed,
        }),
    )?;
    dir.write_manifest("invariants", &c, None, traj.steps)?;
    println!("invariants: L2 drift {l2:e}, H drift {ham:e}, passed {passed}");
    if !passed {
        bail!(CheckFailed(format!(
            "conservation gates failed: L2 drift {l2:e} (gate {:e}), H drift {ham:e} (gate {:e})",
            c.l2_gate, c.hamiltonian_gate
        )));
    }
    Ok(())
}
