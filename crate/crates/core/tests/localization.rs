use vdwlab_core::feshbach::{build_p, DEFAULT_CUTOFF_FRACTION};
use vdwlab_core::localization::{build_partition, case_split, ims_residual, stability_bound};
use vdwlab_core::spectral::{decomposition_levels, linear_fit};
use vdwlab_core::symmetry::{self, SymmetryType};
use vdwlab_core::{assemble_full, enumerate_decompositions, SystemSpec};

#[test]
fn two_electron_ims_identity_and_gradient_scaling() {
    let mut pts = Vec::new();
    for r in [10.0, 14.0, 20.0] {
        let spec = SystemSpec::hydrogen_pair(r);
        let a = enumerate_decompositions(2, &spec.charges()).unwrap();
        let part = build_partition(&spec, &a, r).unwrap();
        assert!(part.normalization_error() < 1e-12);
        assert!(part.support_within(0.2 - 1e-12, &spec));
        let h = assemble_full(&spec).unwrap();
        let rep = ims_residual(&h, &part).unwrap();
        assert!(rep.residual < 1e-8 * rep.h_norm, "{rep:?}");
        pts.push((r.ln(), rep.localization_error.ln()));
    }
    let (slope, _) = linear_fit(&pts);
    assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn stability_bound_holds_at_large_separation() {
    let spec = SystemSpec::hydrogen_pair(14.0);
    let a = enumerate_decompositions(2, &spec.charges()).unwrap();
    let levels = decomposition_levels(&spec, &a, 1e-10).unwrap();
    let part = build_partition(&spec, &a, 14.0).unwrap();
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).unwrap();
    let h = assemble_full(&spec).unwrap();
    let rep = stability_bound(&spec, &h, &p.vectors(), None, &part, levels.e_inf, levels.gamma0).unwrap();
    eprintln!("{rep:?} {levels:?}");
    assert!(rep.passes);

    let sign = SymmetryType::sign(2);
    let ps = build_p(&spec, DEFAULT_CUTOFF_FRACTION, Some(&sign), 1e-10).unwrap();
    let q = symmetry::projector(&sign, spec.grid().len()).unwrap();
    let rep = stability_bound(&spec, &h, &ps.active(), Some(&q), &part, levels.e_inf, levels.gamma0).unwrap();
    eprintln!("sign {rep:?}");

    let split = case_split(&spec, &a, &p).unwrap();
    eprintln!("{split:?}");
    for c in split {
        if !c.atomic {
            assert!(c.bottom >= levels.e_inf + levels.gamma2.unwrap() - 1e-9);
        }
    }
}

#[test]
fn stability_bound_reports_failure_at_short_range() {
    let spec = SystemSpec::hydrogen_pair(3.0);
    let a = enumerate_decompositions(2, &spec.charges()).unwrap();
    let levels = decomposition_levels(&spec, &a, 1e-10).unwrap();
    let part = build_partition(&spec, &a, 3.0).unwrap();
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).unwrap();
    let h = assemble_full(&spec).unwrap();
    let rep = stability_bound(&spec, &h, &p.vectors(), None, &part, levels.e_inf, levels.gamma0).unwrap();
    eprintln!("{rep:?}");
    assert!(!rep.passes);
}
