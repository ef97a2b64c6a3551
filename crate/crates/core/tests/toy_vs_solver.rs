use banditpath::instanton::{solve_saddle, SolveStrategy, SolverOptions};
use banditpath::toy::{branch_count, critical_regret, find_branches, minimal_branch, ToySpec};

fn toy() -> ToySpec {
    ToySpec::new([1.0, 2.0], 0.16, 10.0).unwrap()
}

#[test]
fn critical_regret_of_reference_toy() {
    let rc = critical_regret(&toy(), (1.0, 3.0)).unwrap();
    assert!((rc - 1.9533).abs() <= 1e-3, "r_c = {rc}");
    assert_eq!(branch_count(1.0, &toy(), 10_000).unwrap(), 1);
    assert_eq!(branch_count(3.0, &toy(), 10_000).unwrap(), 3);
}

#[test]
fn branches_match_saddle_solutions_one_to_one() {
    let toy = toy();
    for c in [0.0, 0.4] {
        let spec = toy.to_bandit_spec(c).unwrap();
        for r in [-1.0, 0.5, 1.0, 1.9, 2.1, 2.5, 3.0, 4.0, 6.0] {
            let branches = find_branches(r, &toy, None, 10_000).unwrap();
            let found = solve_saddle(&spec, r, &SolveStrategy::default(), &SolverOptions::default()).unwrap();
            assert_eq!(branches.len(), found.len(), "c = {c}, r = {r}");
            for b in &branches {
                let hit = found
                    .iter()
                    .filter(|f| (f.warmup_gap() - b.delta_s0).abs() <= 1e-5)
                    .count();
                assert_eq!(hit, 1, "c = {c}, r = {r}, branch at {}", b.delta_s0);
                let f = found.iter().find(|f| (f.warmup_gap() - b.delta_s0).abs() <= 1e-5).unwrap();
                assert!((f.action - b.action).abs() <= 1e-8 * b.action.abs().max(1.0));
                assert!((f.ir_hat - b.ir_hat).abs() <= 1e-6 * b.ir_hat.abs().max(1.0));
            }
            let best = minimal_branch(&branches).unwrap();
            assert!((found[0].warmup_gap() - best.delta_s0).abs() <= 1e-5);
        }
    }
}

#[test]
fn solution_count_examples() {
    let spec = toy().to_bandit_spec(0.4).unwrap();
    let strategy = SolveStrategy::default();
    let opts = SolverOptions::default();
    assert_eq!(solve_saddle(&spec, 3.0, &strategy, &opts).unwrap().len(), 3);
    assert_eq!(solve_saddle(&spec, 1.0, &strategy, &opts).unwrap().len(), 1);
}
