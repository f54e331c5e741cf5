mod common;

use potapprox::diagnostics::{self, CheckStatus};
use potapprox::solver::{self, Kappa, SolverConfig};
use potapprox::{multistart, problems, tensor};
use proptest::prelude::*;

use common::*;

fn problem() -> impl Strategy<Value = (Vec<usize>, usize, usize, u64)> {
    (prop::collection::vec(2usize..=5, 3..=4), 1usize..=3, 1usize..=3, any::<u64>()).prop_map(|(dims, r, s, seed)| {
        let s = s.min(dims.len());
        let r = r.min(dims[..s].iter().copied().min().unwrap());
        (dims, r, s, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_run_satisfies_the_guarantees((dims, r, s, seed) in problem(), tight in any::<bool>()) {
        let a = gaussian_tensor(&dims, seed);
        let mut cfg = SolverConfig { max_sweeps: 400, record_inner: true, seed, ..SolverConfig::default() };
        if tight {
            let f0 = solver::initialize(&a, r, s, &cfg).unwrap().initial_objective;
            cfg.kappa = Kappa::Fixed(0.9 * (f0 / r as f64).sqrt());
        }
        let out = solver::solve(&a, r, s, &cfg).unwrap();
        for rec in &out.records {
            prop_assert!(rec.feasibility_error <= 1e-8, "sweep {} infeasible {}", rec.sweep, rec.feasibility_error);
        }
        prop_assert!(diagnostics::assert_monotone_after_truncation(&out.records, out.norm_a).passed);
        let inc = diagnostics::assert_sufficient_increase(&out.records, out.epsilon, out.kappa, out.norm_a);
        prop_assert!(inc.passed, "{:?}", inc.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect::<Vec<_>>());
        let budget = diagnostics::assert_truncation_budget(&out.records, out.initial_rank, out.kappa, out.norm_a);
        prop_assert!(budget.passed);
        prop_assert!(budget.total_truncated <= r);
        prop_assert!(diagnostics::assert_lambda_chain(&out.traces).passed);
        prop_assert!(out.objective() <= r as f64 * out.norm_a.powi(2) * (1.0 + 1e-12));
    }

    #[test]
    fn more_restarts_never_hurt((dims, r, s, seed) in problem()) {
        let a = gaussian_tensor(&dims, seed);
        let cfg = SolverConfig { max_sweeps: 200, seed, ..SolverConfig::default() };
        let one = multistart::solve_restarts(&a, r, s, &cfg, 1).unwrap();
        let three = multistart::solve_restarts(&a, r, s, &cfg, 3).unwrap();
        prop_assert!(three.best.objective() >= one.best.objective());
        prop_assert_eq!(three.objectives[0], one.objectives[0]);
    }
}

#[test]
fn suite_runs_converge_to_kkt_points() {
    for (case, out) in run_suite() {
        assert_eq!(out.status, potapprox::SolveStatus::Converged, "case {}", case.index);
        let k = diagnostics::kkt_residual(&case.tensor, &out.factors).unwrap();
        assert!(k.total <= 1e-6 * out.norm_a, "case {}: {:e}", case.index, k.total);
    }
}

#[test]
fn truncating_suite_respects_the_budget() {
    let mut total = 0;
    for (case, out) in run_truncating_suite() {
        let rep = diagnostics::assert_truncation_budget(&out.records, out.initial_rank, out.kappa, out.norm_a);
        assert!(rep.passed, "case {}", case.index);
        assert!(rep.cumulative_drop <= case.r as f64 * out.kappa.powi(2) + 1e-10);
        assert!(diagnostics::assert_monotone_after_truncation(&out.records, out.norm_a).passed);
        total += rep.total_truncated;
    }
    assert!(total > 0);
}

#[test]
fn planted_instances_are_recovered() {
    for s in 1..=3 {
        let p = problems::plant(&[6, 6, 6], 2, s, &[2.0, 1.0], 0.0, 40 + s as u64).unwrap();
        let m = multistart::solve_restarts(&p.tensor, 2, s, &SolverConfig::default(), 5).unwrap();
        let rel = m.best.residual(&p.tensor).unwrap() / tensor::hs_norm(&p.tensor);
        assert!(rel <= 1e-8, "s = {s}: {rel:e}");
        let score = problems::factor_match_score(&m.best.factors, &p.true_factors, &p.true_sigmas).unwrap();
        assert!(score.score >= 0.999 && !score.partial);
    }
}
