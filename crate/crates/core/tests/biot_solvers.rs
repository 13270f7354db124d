use fsl_core::harness::{build_problem, manufactured_solution, Modification};
use fsl_core::sparse::CsrMatrix;
use fsl_core::tuning::estimate_poincare;
use fsl_core::{
    optimal_delta, run_time_stepping, run_time_stepping_with, BiotProblem, BiotSystem,
    Discretization, DiscreteState, FixedStressConfig, FixedStressSolver, Method, MonolithicSolver,
    RateModel, RunOptions, TestCase,
};

const TOL: f64 = 1e-12;

fn problem(case: TestCase, kappa: f64, n: Option<usize>) -> BiotProblem {
    build_problem(case, Discretization::P2P1, kappa, n, &Modification::default()).unwrap()
}

fn system(case: TestCase, kappa: f64) -> BiotSystem {
    BiotSystem::new(problem(case, kappa, None)).unwrap()
}

fn delta_star(system: &BiotSystem, case: TestCase) -> (f64, f64) {
    let c = &system.problem().coefficients;
    let bnd = system.dirichlet_p(system.problem().time(1)).unwrap();
    let k_dr = case.k_dr(case.calibrated_c());
    let model = RateModel {
        alpha: c.alpha,
        m: c.m,
        tau: system.problem().tau,
        kappa: c.kappa,
        c_omega: estimate_poincare(system.p_space(), bnd.indices()).unwrap(),
        beta: k_dr,
        k_dr,
    };
    (optimal_delta(&model).unwrap(), k_dr)
}

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn row_sum_norm(m: &CsrMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn manufactured_solution_error_decreases_under_refinement() {
    let errors: Vec<(f64, f64)> = [4, 8]
        .iter()
        .map(|&n| {
            let sys = BiotSystem::new(problem(TestCase::UnitSquareSetup1, 1e-10, Some(n))).unwrap();
            let t = sys.problem().t_end;
            let p_ref = sys.problem().p_ref;
            let out = run_time_stepping(&sys, Method::Monolithic).unwrap();
            let s = out.final_state();
            let eu = sys.u_space().l2_error(&s.u, |x| manufactured_solution(x, t, p_ref).0);
            let ep = sys.p_space().l2_error(&s.p, |x| [manufactured_solution(x, t, p_ref).1, 0.0]);
            (eu, ep)
        })
        .collect();
    let (u_ratio, p_ratio) = (errors[0].0 / errors[1].0, errors[0].1 / errors[1].1);
    assert!(u_ratio > 3.0, "displacement error ratio {u_ratio}");
    assert!(p_ratio > 3.0, "pressure error ratio {p_ratio}");
}

#[test]
fn fixed_stress_reproduces_monolithic_solution() {
    let case = TestCase::UnitSquareSetup1;
    let sys = system(case, 1e-15);
    let (delta, k_dr) = delta_star(&sys, case);
    let mono = run_time_stepping(&sys, Method::Monolithic).unwrap();
    let fs = run_time_stepping(
        &sys,
        Method::FixedStress(FixedStressConfig::with_delta(delta, k_dr, TOL, 500)),
    )
    .unwrap();
    assert!(fs.report.converged());
    let (a, b) = (fs.final_state(), mono.final_state());
    assert!(rel_inf(&a.u, &b.u) <= 1e-8);
    assert!(rel_inf(&a.p, &b.p) <= 1e-8);
}

#[test]
fn solution_does_not_depend_on_the_stabilization() {
    let case = TestCase::LShape;
    let sys = system(case, 1e-12);
    let k_dr = case.k_dr(case.calibrated_c());
    let solve = |delta| {
        let cfg = FixedStressConfig::with_delta(delta, k_dr, TOL, 500);
        let out = run_time_stepping(&sys, Method::FixedStress(cfg)).unwrap();
        assert!(out.report.converged());
        out.final_state().clone()
    };
    let (a, b) = (solve(1.0), solve(2.0));
    assert!(rel_inf(&a.p, &b.p) <= 1e-6);
    assert!(rel_inf(&a.u, &b.u) <= 1e-6);
}

#[test]
fn converged_iterate_satisfies_the_coupled_equations() {
    for case in [TestCase::UnitSquareSetup1, TestCase::UnitSquareSetup2] {
        let sys = system(case, 1e-13);
        let k_dr = case.k_dr(case.calibrated_c());
        let cfg = FixedStressConfig::with_delta(1.5, k_dr, TOL, 500);
        let solver = FixedStressSolver::new(&sys, cfg).unwrap();
        let prev = sys.initial_state().unwrap();
        let (state, report) = solver.step(&prev).unwrap();
        assert!(report.converged);
        let (ru, rp) = sys.monolithic_residual(&prev, &state).unwrap();
        let c = &sys.problem().coefficients;
        let ops = sys.operators();
        let (nu, np) = (inf(&state.u), inf(&state.p));
        let d_norm = row_sum_norm(&ops.d);
        let dt_norm = row_sum_norm(&ops.d.transpose());
        let flow = ops.mp.linear_combination(1.0 / c.m + solver.l(), &ops.kp, sys.problem().tau);
        let ru_bound = TOL * (row_sum_norm(&ops.a) * nu + c.alpha * dt_norm * np);
        let rp_bound = TOL * (row_sum_norm(&flow) * np + c.alpha * d_norm * nu);
        assert!(ru <= 10.0 * ru_bound, "{case}: r_u {ru:e} vs {ru_bound:e}");
        assert!(rp <= 10.0 * rp_bound, "{case}: r_p {rp:e} vs {rp_bound:e}");
    }
}

#[test]
fn monolithic_start_converges_immediately() {
    let sys = system(TestCase::UnitSquareSetup1, 1e-12);
    let prev = sys.initial_state().unwrap();
    let exact = MonolithicSolver::new(&sys).unwrap().step(&prev).unwrap();
    let cfg = FixedStressConfig::with_delta(1.5, TestCase::UnitSquareSetup1.k_dr(1.6), 1e-8, 100);
    let solver = FixedStressSolver::new(&sys, cfg).unwrap();
    let (state, report) = solver.step_observed(&prev, Some(&exact), &mut |_| {}).unwrap();
    assert!(report.converged);
    assert_eq!(report.iteration_count(), 1);
    assert!(rel_inf(&state.p, &exact.p) <= 1e-8);
}

#[test]
fn unstabilized_scheme_fails_in_the_incompressible_limit() {
    let mut prob = problem(TestCase::UnitSquareSetup1, 1e-15, None);
    prob.coefficients.m = 1e16;
    let sys = BiotSystem::new(prob).unwrap();
    let cfg = FixedStressConfig::with_l(0.0, TOL, 60);
    let out = run_time_stepping(&sys, Method::FixedStress(cfg)).unwrap();
    assert!(!out.report.converged());
    assert_eq!(out.report.steps.last().unwrap().iteration_count(), 60);
    let rate = out.report.observed_rate().unwrap();
    assert!(rate >= 1.0, "observed rate {rate}");
}

#[test]
fn pressure_increments_contract_above_roundoff() {
    let case = TestCase::UnitSquareSetup1;
    let sys = system(case, 1e-12);
    let cfg = FixedStressConfig::with_delta(1.5, case.k_dr(case.calibrated_c()), TOL, 500);
    let out = run_time_stepping(&sys, Method::FixedStress(cfg)).unwrap();
    for (step, level) in out.report.steps.iter().zip(&out.trajectory[1..]) {
        let floor = 1e-11 * sys.pressure_l2_squared(&level.p).sqrt();
        let inc: Vec<f64> = step.iterations.iter().map(|r| r.dp_l2).collect();
        for i in 2..inc.len() {
            if inc[i - 1] > floor {
                assert!(inc[i] <= inc[i - 1], "step {} iteration {}", step.step, i + 1);
            }
        }
    }
}

#[test]
fn mandel_run_respects_drained_edge_and_counts() {
    let case = TestCase::Mandel;
    let sys = system(case, 1e-10);
    let (delta, k_dr) = delta_star(&sys, case);
    let cfg = FixedStressConfig::with_delta(delta, k_dr, TOL, 500);
    let out = run_time_stepping(&sys, Method::FixedStress(cfg)).unwrap();
    assert_eq!(out.report.steps.len(), 5);
    assert!(out.report.converged());
    let total: usize = out.report.steps.iter().map(|s| s.iterations.len()).sum();
    assert_eq!(out.report.total_iterations(), total);
    let a = sys.problem().mesh.vertices().iter().fold(0.0f64, |m, v| m.max(v[0]));
    let right: Vec<usize> = (0..sys.p_space().num_nodes())
        .filter(|&n| sys.p_space().node_coords()[n][0] == a)
        .collect();
    assert!(!right.is_empty());
    for level in &out.trajectory[1..] {
        assert!(right.iter().all(|&i| level.p[i] == 0.0));
    }
}

#[test]
fn initial_state_override_is_used() {
    let sys = system(TestCase::UnitSquareSetup1, 1e-12);
    let base = sys.initial_state().unwrap();
    let shifted = DiscreteState {
        p: base.p.iter().map(|_| 1e6).collect(),
        ..base.clone()
    };
    let run = |s: Option<DiscreteState>| {
        let opts = RunOptions {
            initial_state: s,
            keep_trajectory: false,
            ..RunOptions::default()
        };
        run_time_stepping_with(&sys, Method::Monolithic, &opts).unwrap()
    };
    let (a, b) = (run(None), run(Some(shifted)));
    assert_eq!(a.trajectory.len(), 2);
    assert_ne!(a.final_state().p, b.final_state().p);
    let bad = DiscreteState {
        p: vec![0.0; 3],
        ..base
    };
    let opts = RunOptions {
        initial_state: Some(bad),
        ..RunOptions::default()
    };
    assert!(run_time_stepping_with(&sys, Method::Monolithic, &opts).is_err());
}
