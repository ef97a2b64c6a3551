use banditpath::instanton::{solve_saddle, SaddleField, SolveStrategy, SolverOptions, Variant};
use banditpath::{rate_curve, BanditSpec, RateOptions};

fn reseeded(spec: &BanditSpec, r: f64, seeds: &[SaddleField], variant: Variant) -> Vec<SaddleField> {
    let strategy = SolveStrategy {
        multistarts: 0,
        structured: false,
        seeds: seeds.to_vec(),
        ..SolveStrategy::default()
    };
    let opts = SolverOptions {
        variant,
        ..SolverOptions::default()
    };
    solve_saddle(spec, r, &strategy, &opts).unwrap()
}

fn least_action(a: &[SaddleField], b: &[SaddleField]) -> f64 {
    a.iter().chain(b).map(|f| f.action).fold(f64::INFINITY, f64::min)
}

fn certified(f: &SaddleField, spec: &BanditSpec, r: f64) -> bool {
    let t_max = spec.horizon();
    let counts = (0..=t_max).all(|t| (f.n.column(t).sum() - (spec.arms() + t) as f64).abs() <= 1e-9);
    let terminal = (0..spec.arms()).all(|k| (f.is_hat[(k, t_max)] + f.ir_hat).abs() <= 1e-12 * f.ir_hat.abs().max(1.0));
    f.converged
        && f.residual <= 1e-10
        && counts
        && terminal
        && (f.total_reward() - (spec.oracle_reward() - r)).abs() <= 1e-8
}

// With a sharp softmax the pull-noise terms of the full equations are tiny,
// so both variants must give the same rate function. Each variant's
// solutions seed the other so that both searches see the same branches.
#[test]
fn full_and_simplified_agree_at_sharp_softmax() {
    let spec = BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.36, 1e3, 0.4).unwrap();
    let grid: Vec<f64> = (0..=7).map(|i| -5.0 + 5.0 * i as f64).collect();
    let simplified = rate_curve(&spec, &grid, &RateOptions::default()).unwrap();
    let mut opts = RateOptions::default();
    opts.solver.variant = Variant::Full;
    let full = rate_curve(&spec, &grid, &opts).unwrap();
    for (i, &r) in grid.iter().enumerate() {
        let s = &simplified.solutions[i];
        let f = &full.solutions[i];
        assert!(!s.is_empty() && !f.is_empty(), "nothing converged at r = {r}");
        let s2 = reseeded(&spec, r, f, Variant::Simplified);
        let f2 = reseeded(&spec, r, s, Variant::Full);
        let a_s = least_action(s, &s2);
        let a_f = least_action(f, &f2);
        let rel = (a_s - a_f).abs() / a_s.abs().max(1e-12);
        assert!(rel <= 1e-3, "r = {r}: simplified {a_s}, full {a_f}");
        for field in s.iter().chain(f).chain(&s2).chain(&f2) {
            assert!(field.action >= -1e-10, "negative action at r = {r}");
            assert!(certified(field, &spec, r), "uncertified solution at r = {r}");
        }
    }
}
