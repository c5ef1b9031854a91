use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdwlab_core::feshbach::{build_p, FeshbachProblem, DEFAULT_CUTOFF_FRACTION};
use vdwlab_core::linalg::{self, LinearOperator};
use vdwlab_core::spectral;
use vdwlab_core::symmetry::{self, SymmetryType};
use vdwlab_core::{assemble_full, build_grid, SystemSpec};

fn random_problem(n: usize, r: usize, seed: u64) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = (&a + a.transpose()) * 0.5;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..r {
        let mut v = linalg::random_vector(n, seed * 31 + k as u64);
        linalg::orthogonalize_against(&mut v, &basis);
        linalg::normalize(&mut v);
        basis.push(v);
    }
    (h, basis)
}

#[test]
fn random_fixed_points_are_eigenvalues_below_the_complement() {
    for seed in 1..6 {
        let (h, basis) = random_problem(50, 3, seed);
        let problem = FeshbachProblem::new(&h, basis, None).unwrap();
        let (eigs, _) = linalg::sorted_eigen(h.clone());
        let below: Vec<f64> = eigs
            .iter()
            .copied()
            .filter(|&e| e < problem.perp_bottom() - 1e-6)
            .collect();
        let fps = problem.all_fixed_points().unwrap();
        assert_eq!(fps.len(), below.len(), "seed {seed}");
        for (fp, e) in fps.iter().zip(&below) {
            assert!((fp.energy - e).abs() < 1e-9, "seed {seed}: {} vs {e}", fp.energy);
            assert!(fp.eigen_residual < 1e-8);
        }
    }
}

#[test]
fn lowest_branch_is_nonincreasing() {
    let (h, basis) = random_problem(50, 2, 11);
    let problem = FeshbachProblem::new(&h, basis, None).unwrap();
    let top = problem.perp_bottom() - 1e-3;
    let lambdas: Vec<f64> = (0..20).map(|i| top - 5.0 + 5.0 * i as f64 / 19.0).collect();
    let mu = problem.lowest_branch_samples(&lambdas).unwrap();
    for w in mu.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

fn small_pair(r: f64) -> SystemSpec {
    SystemSpec::hydrogen_pair_on(r, build_grid(61, (-12.0, 12.0)).unwrap())
}

#[test]
fn hydrogen_pair_fixed_point_matches_direct_ground_state() {
    let spec = small_pair(8.0);
    let h = assemble_full(&spec).unwrap();
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).unwrap();
    assert_eq!(p.rank(), 2);
    assert!(p.max_overlap < 1e-14);
    let problem = FeshbachProblem::new(&h, p.active(), None).unwrap();
    let fp = problem.solve_fixed_point(-1.3).unwrap();
    let direct = spectral::low_spectrum(&h, 2, 1e-11).unwrap();
    assert!(
        (fp.energy - direct.eigenvalues[0]).abs() < 1e-7,
        "{} vs {}",
        fp.energy,
        direct.eigenvalues[0]
    );
    assert!(fp.eigen_residual < 1e-7);
}

#[test]
fn projection_commutes_with_permutations() {
    let spec = small_pair(8.0);
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).unwrap();
    let axis = spec.grid().len();
    let swap = symmetry::PermutationAction::new(vec![1, 0], axis, 2);
    let x = linalg::random_vector(axis * axis, 5);
    let lhs = p.project(&swap.apply_vec(&x));
    let rhs = swap.apply_vec(&p.project(&x));
    let diff: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12);
}

#[test]
fn antisymmetric_projection_has_rank_one() {
    let spec = small_pair(8.0);
    let sign = SymmetryType::sign(2);
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, Some(&sign), 1e-10).unwrap();
    assert_eq!(p.rank(), 2);
    assert_eq!(p.active().len(), 1);
    let h = assemble_full(&spec).unwrap();
    let q = symmetry::projector(&sign, spec.grid().len()).unwrap();
    let problem = FeshbachProblem::new(&h, p.active(), Some(&q)).unwrap();
    let fp = problem.solve_fixed_point(-1.3).unwrap();
    let restrict = |v: &mut [f64]| q.apply_in_place(v);
    let direct = spectral::low_spectrum_with(
        &h,
        &spectral::SpectralOptions {
            k: 1,
            tol: 1e-11,
            restrict: Some(&restrict),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((fp.energy - direct.eigenvalues[0]).abs() < 1e-7);
    assert!(h.dim() > 0);
}
