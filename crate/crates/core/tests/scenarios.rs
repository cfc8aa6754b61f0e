use nlsnet::dictionary::{assemble, default_library, synthesize};
use nlsnet::field::rel_err_vector;
use nlsnet::{LinearMode, Scenario};

#[test]
fn exact_solutions_survive_the_forward_solve() {
    // Four layers leave Example 1 with splitting error; refine time for it.
    let cases = [
        Scenario::example1().with_steps(200),
        Scenario::example2(),
        Scenario::example3(),
    ];
    for s in cases {
        let e = s.forward_error().unwrap();
        assert!(e <= 1e-6, "{}: e_psi {e:e}", s.name);
    }
}

#[test]
fn desk_example1_error_is_splitting_dominated() {
    let s = Scenario::example1();
    assert!(s.forward_error().unwrap() > 1e-3);
    // e_psi is quadratic in the L2 error, so halving dt divides it by ~16
    // once in the asymptotic regime.
    let coarse = s.clone().with_steps(50).forward_error().unwrap();
    let fine = s.clone().with_steps(100).forward_error().unwrap();
    assert!((coarse / fine - 16.0).abs() < 1.0, "ratio {}", coarse / fine);
}

#[test]
fn true_coefficients_reproduce_true_potential() {
    for s in [Scenario::example1(), Scenario::example2()] {
        let grid = s.grid().unwrap();
        let phi = assemble(&default_library(), &grid).unwrap();
        let v = synthesize(&phi, &s.true_coeffs().unwrap()).unwrap();
        assert!(rel_err_vector(&v, &s.true_potential().unwrap()).unwrap() < 1e-14);
    }
}

#[test]
fn single_precision_tracks_double() {
    let s64 = Scenario::example2().with_grid_size(128);
    let s32 = nlsnet::f32::Scenario::example2().with_grid_size(128);
    let e64 = s64.forward_error().unwrap();
    let e32 = s32.forward_error().unwrap();
    assert!(e64 < 1e-20);
    assert!(e32 < 1e-10, "f32 e_psi {e32:e}");

    let d32 = s32.misfit_data(LinearMode::Spectral).unwrap();
    let v32 = s32.true_potential().unwrap();
    let g = d32.grad_potential(&v32).unwrap();
    assert!(g.grad.iter().all(|x| x.is_finite()));
}
