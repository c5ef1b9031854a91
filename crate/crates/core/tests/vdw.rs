use nalgebra::Vector3;
use vdwlab_core::vdw::{
    c6_coefficient, c6_hydrogen_3d, c6_hydrogen_3d_sum_over_states, c6_sum_over_states, multipole_expand,
    selection_rule,
};
use vdwlab_core::{build_grid, Decomposition, SystemSpec};

fn small_pair(r: f64) -> SystemSpec {
    SystemSpec::hydrogen_pair_on(r, build_grid(81, (-10.0, 10.0)).unwrap())
}

#[test]
fn line_c6_from_linear_solve_matches_sum_over_states() {
    let spec = small_pair(10.0);
    let solved = c6_coefficient(&spec, (0, 1), 1e-12).unwrap();
    let sos = c6_sum_over_states(&spec, (0, 1)).unwrap();
    assert!(solved.sigma > 0.0);
    assert!((solved.sigma - sos).abs() < 1e-8 * sos, "{} vs {sos}", solved.sigma);
    assert!(solved.deflation_residual < 1e-8);
}

#[test]
fn radial_c6_from_linear_solve_matches_sum_over_states() {
    let dir = Vector3::new(0.0, 0.0, 1.0);
    let solved = c6_hydrogen_3d(300, 30.0, &dir, 1e-12).unwrap();
    let sos = c6_hydrogen_3d_sum_over_states(300, 30.0, &dir).unwrap();
    assert!((solved.sigma - sos).abs() < 1e-8 * sos, "{} vs {sos}", solved.sigma);
}

#[test]
fn disjoint_pair_couplings_are_orthogonal() {
    let grid = build_grid(61, (-8.0, 8.0)).unwrap();
    let (cross, diag) = selection_rule(&grid, 3, (0, 1), (1, 2), 1e-12).unwrap();
    assert!(diag > 1e-3);
    assert!(cross.abs() < 1e-10 * diag, "cross {cross} diag {diag}");
}

#[test]
fn multipole_remainder_shrinks_with_order() {
    let spec = small_pair(12.0);
    let atomic = Decomposition::from_clusters(&[vec![0], vec![1]], &[1, 1]).unwrap();
    let low = multipole_expand(&spec, &atomic, (0, 1), 2, 3.0).unwrap();
    let high = multipole_expand(&spec, &atomic, (0, 1), 3, 3.0).unwrap();
    assert!(high.remainder_sup < low.remainder_sup);
    assert!(multipole_expand(&spec, &atomic, (0, 1), 2, 4.5).is_err());
}
