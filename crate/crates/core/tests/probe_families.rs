use ostrovsky::estimates::{bilinear_ratio, run_probe, DataLaw, EstimateTag, ProbeSetup};
use ostrovsky::kernel::{kernel_mixed_norm_report, KernelSpec, MixedNormOptions};

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(0.0, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[test]
fn low_frequency_maximal_is_uniform_in_cutoff() {
    let mut maxima = Vec::new();
    for m in [0.125, 0.25, 0.5, 1.0] {
        let mut setup = ProbeSetup::default_for(EstimateTag::Maximal, 7, 20).unwrap();
        setup.ensemble.law = DataLaw::LowFrequency { cutoff: m };
        let r = run_probe(&setup).unwrap();
        assert!(r.stable, "M = {m}: refinement factor {}", r.refinement_factor);
        maxima.push(r.max_ratio);
    }
    assert!(spread(&maxima) <= 4.0, "{maxima:?}");
}

#[test]
fn block_sup_constant_is_uniform_in_block() {
    let mut maxima = Vec::new();
    for n_block in [1.0, 2.0, 4.0] {
        let mut setup = ProbeSetup::default_for(EstimateTag::BlockSup, 7, 20).unwrap();
        setup.ensemble.n_points = 512;
        setup.ensemble.law = DataLaw::BandLimited { n_block };
        let r = run_probe(&setup).unwrap();
        assert!(r.stable, "N = {n_block}: refinement factor {}", r.refinement_factor);
        maxima.push(r.max_ratio);
    }
    assert!(spread(&maxima) <= 4.0, "{maxima:?}");
}

#[test]
fn bilinear_ratio_is_refinement_stable_across_s() {
    let setup = ProbeSetup::default_for(EstimateTag::Bilinear, 3, 40).unwrap();
    for s in [0.0, 0.25, 0.5] {
        let r = bilinear_ratio(&setup.ensemble, s).unwrap();
        assert!(r.stable && !r.geometric_growth, "s = {s}: factor {}", r.refinement_factor);
        assert!(r.all_finite_nonnegative());
    }
}

#[test]
fn mixed_norm_survives_box_doubling() {
    let spec = KernelSpec::new(16.0, -1.0, 1.0).unwrap();
    let adaptive = kernel_mixed_norm_report(&spec, 8.0, &MixedNormOptions::default()).unwrap();
    let doubled = kernel_mixed_norm_report(
        &spec,
        8.0,
        &MixedNormOptions {
            scaled_x_box: Some(2.0 * adaptive.x_box * spec.n_block),
            ..MixedNormOptions::default()
        },
    )
    .unwrap();
    assert!(adaptive.tail_fraction <= 0.01);
    let change = (doubled.norm / adaptive.norm - 1.0).abs();
    assert!(change < 0.02, "relative change {change}");
}
