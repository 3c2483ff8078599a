use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ostrovsky::estimates::{run_probe, EstimateTag, ProbeSetup};
use ostrovsky::kernel::{
    decay_study, kernel_mixed_norm_report, omega3_exponent_fit, DecayOptions, KernelSpec, MixedNormOptions, RegionTag,
};
use ostrovsky::limit::{rotation_limit_sweep, SweepConfig};
use ostrovsky::norms::h_s_norm;
use ostrovsky::solver::{evolve, gaussian_bump, hamiltonian, picard_iterate, soliton_initial_data, SolverConfig};
use ostrovsky::spectral::{apply_multiplier, MultiplierSpec, PhaseSymbol};
use ostrovsky::{Field, Grid};

fn report(id: u32, name: &str, pass: bool, detail: &str, start: Instant, budget_s: f64) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let ok = pass && secs < budget_s;
    println!(
        "criterion {id} [{name}]: {} ({detail}; {secs:.1} s of {budget_s:.0} s)",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn band_limited_data(grid: Grid, seed: u64) -> Field {
    let n = grid.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..n / 2 {
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        coeffs[j] = c;
        coeffs[n - j] = c.conj();
    }
    Field::from_coeffs(grid, coeffs).unwrap()
}

fn shift(f: &Field, s: f64) -> Field {
    let g = *f.grid();
    let coeffs: Vec<Complex64> = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == g.nyquist_slot() {
                Complex64::new(0.0, 0.0)
            } else {
                c * Complex64::from_polar(1.0, -g.wavenumber(i) * s)
            }
        })
        .collect();
    Field::from_coeffs(g, coeffs).unwrap()
}

#[test]
fn criterion_1_linear_machinery() {
    let start = Instant::now();
    let symbol = PhaseSymbol::new(-1.0, 1.0);
    let prop = |t: f64| MultiplierSpec::Propagator { symbol, t };
    let mut worst = [0.0_f64; 3];
    for n in [64, 256, 1024] {
        let grid = Grid::new(n, 40.0).unwrap();
        let u = band_limited_data(grid, n as u64);
        let norm = u.l2_norm();
        let (t1, t2) = (0.37, -1.21);
        let a = apply_multiplier(&apply_multiplier(&u, &prop(t1)).unwrap(), &prop(t2)).unwrap();
        let b = apply_multiplier(&u, &prop(t1 + t2)).unwrap();
        worst[0] = worst[0].max(a.sub(&b).l2_norm() / norm);
        for t in [0.1, 1.0, 10.0] {
            let v = apply_multiplier(&u, &prop(t)).unwrap();
            worst[1] = worst[1].max((v.l2_norm() - norm).abs() / norm);
        }
        let d = apply_multiplier(&u, &MultiplierSpec::Derivative(1)).unwrap();
        let back = apply_multiplier(&d, &MultiplierSpec::Derivative(-1)).unwrap();
        let anti = apply_multiplier(&u, &MultiplierSpec::Derivative(-1)).unwrap();
        let fwd = apply_multiplier(&anti, &MultiplierSpec::Derivative(1)).unwrap();
        let e = back.sub(&u).l2_norm().max(fwd.sub(&u).l2_norm()) / norm;
        worst[2] = worst[2].max(e);
    }
    let pass = worst[0] < 1e-10 && worst[1] < 1e-12 && worst[2] < 1e-12;
    let detail = format!("group {:.1e}, isometry {:.1e}, inversion {:.1e}", worst[0], worst[1], worst[2]);
    assert!(report(1, "linear machinery", pass, &detail, start, 5.0), "{detail}");
}

#[test]
fn criterion_2_conservation() {
    let start = Instant::now();
    let grid = Grid::new(1024, 80.0).unwrap();

    // Short finite-difference check of the Hamiltonian formula along a trajectory.
    let probe = SolverConfig::new(grid, -1.0, 1.0, 5, 1e-4, 0.01).unwrap();
    let u0 = gaussian_bump(grid, 1.0, 1.0);
    let short = evolve(&u0, &probe, 25).unwrap();
    let h = &short.hamiltonian;
    let dt = short.times[1] - short.times[0];
    let gradient_energy = |f: &Field| {
        let p: f64 = f.samples().iter().map(|v| v.powi(7)).sum::<f64>() * f.grid().dx() / 42.0;
        hamiltonian(f, -1.0, 1.0, 5) + 2.0 * p
    };
    let wrong: Vec<f64> = short.fields.iter().map(gradient_energy).collect();
    let mut fd_ok = true;
    for i in 1..h.len() - 1 {
        let dh = (h[i + 1] - h[i - 1]) / (2.0 * dt);
        let dw = (wrong[i + 1] - wrong[i - 1]) / (2.0 * dt);
        fd_ok &= dh.abs() < 1e-6 * dw.abs().max(1.0) && dw.abs() > 1e-3;
    }

    let cfg = SolverConfig::new(grid, -1.0, 1.0, 5, 1e-3, 1.0).unwrap();
    let traj = evolve(&u0, &cfg, 50).unwrap();
    let (l2, ham) = (traj.l2_drift(), traj.hamiltonian_drift());
    let pass = fd_ok && l2 < 1e-8 && ham < 1e-6;
    let detail = format!("fd oracle {fd_ok}, L2 drift {l2:.2e}, H drift {ham:.2e}");
    assert!(report(2, "conservation", pass, &detail, start, 60.0), "{detail}");
}

#[test]
fn criterion_3_picard_duhamel() {
    let start = Instant::now();
    let grid = Grid::new(256, 40.0).unwrap();
    let cfg = SolverConfig::new(grid, -1.0, 1.0, 5, 1e-3, 0.05).unwrap();
    let bump = gaussian_bump(grid, 1.0, 1.0);
    let u0 = bump.scaled(0.1 / h_s_norm(&bump, 1.0));
    let r = picard_iterate(&u0, &cfg, 0.05, 40).unwrap();
    let stepped = evolve(&u0, &cfg, usize::MAX).unwrap();
    let err = r.final_field().sub(stepped.last()).l2_norm();
    let max_ratio = r.ratios.iter().cloned().fold(0.0, f64::max);
    let pass = r.converged && max_ratio < 0.5 && err < 1e-6;
    let detail = format!(
        "H1 norm {:.3}, {} iterations, max ratio {max_ratio:.3e}, stepper gap {err:.2e}",
        h_s_norm(&u0, 1.0),
        r.iterations
    );
    assert!(report(3, "Picard-Duhamel", pass, &detail, start, 120.0), "{detail}");
}

#[test]
fn criterion_4_weak_rotation_limit() {
    let start = Instant::now();
    let grid = Grid::new(256, 40.0).unwrap();
    let template = SolverConfig::new(grid, -1.0, 0.1, 5, 0.002, 0.5).unwrap();
    let sweep = SweepConfig::new(template, 0.5);
    let u0 = gaussian_bump(grid, 0.8, 1.5);
    let r = rotation_limit_sweep(&sweep, &u0).unwrap();
    let pass = r.n_fit >= 2
        && (0.8..=1.2).contains(&r.slope)
        && r.max_error_over_gamma.is_finite()
        && r.error_over_gamma_spread < 3.0
        && r.c_star_spread < 3.0;
    let detail = format!(
        "slope {:.4} over {} points, max e/gamma {:.3e} (spread {:.3}), C* spread {:.3}",
        r.slope, r.n_fit, r.max_error_over_gamma, r.error_over_gamma_spread, r.c_star_spread
    );
    assert!(report(4, "weak rotation limit", pass, &detail, start, 900.0), "{detail}");
}

#[test]
fn criterion_5_kernel_decay() {
    let start = Instant::now();
    let base = KernelSpec::new(16.0, -1.0, 1.0).unwrap();
    let (exponent, _) = omega3_exponent_fit(&base, (1.0, 64.0), 13).unwrap();
    let opts = DecayOptions {
        fit_exponent: false,
        ..DecayOptions::default()
    };
    let study = decay_study(&base, &[16.0, 32.0, 64.0], &opts).unwrap();
    let omega2_spread = study
        .spreads
        .iter()
        .find(|(r, _)| *r == RegionTag::Omega2)
        .map(|(_, s)| *s)
        .unwrap();
    let omega2_finite = study
        .reports
        .iter()
        .all(|r| r.stat(RegionTag::Omega2).sup_ratio.is_finite());
    let ratios: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|&n| {
            kernel_mixed_norm_report(&base.with_n(n), 8.0, &MixedNormOptions::default())
                .unwrap()
                .ratio
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mixed_spread = hi / lo;
    let exponent_ok = (-0.43..=-0.23).contains(&exponent);
    let pass = exponent_ok && omega2_finite && omega2_spread <= 4.0 && mixed_spread <= 4.0;
    let detail = format!(
        "Omega3 exponent {exponent:.4} (in window: {exponent_ok}), Omega2 spread {omega2_spread:.3}, \
         mixed-norm ratios {ratios:.4?} spread {mixed_spread:.4}"
    );
    assert!(report(5, "kernel decay", pass, &detail, start, 600.0), "{detail}");
}

#[test]
fn criterion_6_estimate_ensembles() {
    let start = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    for tag in EstimateTag::ALL {
        let draws = if tag == EstimateTag::Multilinear { 20 } else { 100 };
        let setup = ProbeSetup::default_for(tag, 1, draws).unwrap();
        let a = run_probe(&setup).unwrap();
        let b = run_probe(&setup).unwrap();
        let reproducible = a == b;
        let ok = a.max_ratio.is_finite() && a.stable && !a.geometric_growth && a.all_finite_nonnegative() && reproducible;
        pass &= ok;
        lines.push(format!(
            "{tag}: max {:.4} factor {:.3} skipped {} reproducible {reproducible}",
            a.max_ratio, a.refinement_factor, a.skipped
        ));
    }
    let detail = lines.join("; ");
    assert!(report(6, "estimate ensembles", pass, &detail, start, 1200.0), "{detail}");
}

#[test]
fn criterion_7_gkdv_soliton() {
    let start = Instant::now();
    let grid = Grid::new(1024, 80.0).unwrap();
    let sol = soliton_initial_data(1.0, 5, -1.0, grid).unwrap();
    let cfg = SolverConfig::new(grid, -1.0, 0.0, 5, 5e-4, 1.0).unwrap();
    let traj = evolve(&sol.profile, &cfg, usize::MAX).unwrap();
    let end = traj.last();
    let t_end = *traj.times.last().unwrap();
    let norm = sol.profile.l2_norm();
    let err_at = |s: f64| end.sub(&shift(&sol.profile, s)).l2_norm() / norm;
    let nominal = err_at(sol.speed * t_end);
    let (mut a, mut b) = (sol.speed * t_end - 0.5, sol.speed * t_end + 0.5);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if err_at(c) < err_at(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let best = 0.5 * (a + b);
    let recentered = err_at(best);
    let pass = sol.residual < 1e-8 && recentered < 1e-3;
    let detail = format!(
        "residual {:.2e}, recentered shape error {recentered:.2e} at shift {best:.6} (nominal {:.2e})",
        sol.residual, nominal
    );
    assert!(report(7, "gKdV soliton", pass, &detail, start, 60.0), "{detail}");
}
