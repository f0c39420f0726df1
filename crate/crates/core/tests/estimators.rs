use spme_core::{
    gronwall_check, mc_moment, viscosity_convergence, FnSpec, Grid, InitialData, PhiSpec, ProblemSpec,
    SolverConfig, Statistic,
};

/// Heat equation with additive noise along the first eigenmode: the modal
/// coefficient is a discrete Ornstein–Uhlenbeck chain with known variance.
#[test]
fn terminal_second_moment_matches_ou_variance() {
    let (nodes, horizon, dt, amp) = (15, 0.1, 1e-3, 0.8);
    let mut spec = ProblemSpec::new(1, nodes, horizon, PhiSpec::linear(), InitialData::Function(FnSpec::zero()));
    spec.coeffs.g = vec![FnSpec::sine(amp, &[1.0])];
    let cfg = SolverConfig::new(dt).with_seed(21);
    let est = mc_moment(&spec, &cfg, 4000, Statistic::TerminalLp(2.0)).unwrap();

    let h = 1.0 / (nodes + 1) as f64;
    let lambda = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
    let steps = (horizon / dt).round() as i32;
    let damp = 1.0 / (1.0 + dt * lambda);
    let var: f64 = (1..=steps).map(|j| amp * amp * dt * damp.powi(2 * j)).sum();
    // discrete L2 norm of sin(πx) squared is exactly 1/2
    let want = var / 2.0;
    assert!(
        (est.mean - want).abs() <= 4.0 * est.stderr,
        "mean {} vs {} (stderr {})",
        est.mean,
        want,
        est.stderr
    );
}

#[test]
fn gronwall_bound_holds_for_noisy_pme() {
    let mut spec = ProblemSpec::new(1, 31, 0.5, PhiSpec::power(2.0), InitialData::Function(FnSpec::sine(1.0, &[1.0])));
    spec.coeffs.nu = vec![FnSpec::constant(0.5)];
    spec.coeffs.g = vec![FnSpec::sine(0.5, &[1.0])];
    let r = gronwall_check(&spec, &SolverConfig::new(2e-3).with_seed(5), 50, 2.0, 2.0).unwrap();
    assert!(r.consistent);
    assert!(r.rhs > 0.0);
    assert!(r.fitted_n > 0.0 && r.fitted_n < 10.0, "N = {}", r.fitted_n);
}

#[test]
fn gronwall_moment_vanishes_with_zero_data() {
    let mut spec = ProblemSpec::new(1, 15, 0.2, PhiSpec::power(2.0), InitialData::Function(FnSpec::zero()));
    spec.coeffs.nu = vec![FnSpec::constant(0.5)];
    let r = gronwall_check(&spec, &SolverConfig::new(2e-3).with_seed(5), 4, 2.0, 2.0).unwrap();
    assert_eq!(r.lhs.mean, 0.0);
    assert!(r.consistent);
}

#[test]
fn viscous_solutions_form_a_cauchy_sequence() {
    let spec = ProblemSpec::new(1, 31, 0.2, PhiSpec::power(2.0), InitialData::Function(FnSpec::sine(1.0, &[1.0])));
    let r = viscosity_convergence(&spec, &SolverConfig::new(1e-3), 2, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
    assert!(r.strictly_decreasing(), "{:?}", r.means());
}

#[test]
fn grid_sine_mode_is_discrete_eigenvector() {
    let g = Grid::<f64>::unit(2, 9).unwrap();
    let e = g.sine_mode(&[2, 3]);
    let le = g.apply_laplacian(&e).unwrap();
    let lam = g.eigenvalue(&[2, 3]);
    for (a, b) in le.iter().zip(e.iter()) {
        assert!((a + lam * b).abs() <= 1e-9 * lam);
    }
}
