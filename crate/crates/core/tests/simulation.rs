use misselect::path;
use misselect::simbench::{evaluate, generate, run_experiment, Method, Scenario, ScenarioConfig};
use misselect::Family;

fn small(scenario: Scenario, reps: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(scenario, 30);
    c.n_reps = reps;
    c.test_size = 500;
    c.path.n_lambda = 40;
    c
}

#[test]
fn experiments_replay_identically_on_any_pool() {
    let config = small(Scenario::LinearInteractionWeak, 6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&config).unwrap())
    };
    let a = run(1);
    let b = run(1);
    let c = run(3);
    assert_eq!(a.csv(), b.csv());
    assert_eq!(a.csv(), c.csv());
    assert_eq!(a.replications, c.replications);
}

#[test]
fn inclusion_bounds_consistency() {
    for scenario in Scenario::ALL {
        let exp = run_experiment(&small(scenario, 4)).unwrap();
        for row in &exp.rows {
            assert!(row.inclusion_pct >= row.consistent_pct, "{scenario} {}", row.method);
        }
        for rep in &exp.replications {
            for (_, o) in &rep.outcomes {
                assert!(!o.consistent || o.includes);
                let p = exp.config.design_columns();
                assert!(o.false_positives <= p);
            }
        }
        assert_eq!(exp.row(Method::Oracle).consistent_pct, 100.0);
    }
}

#[test]
fn oracle_error_without_noise_is_the_interaction_variance() {
    let mut config = ScenarioConfig::new(Scenario::LinearInteractionWeak, 20);
    config.sigma = 0.0;
    config.n = 2000;
    config.test_size = 10_000;
    let data = generate(&config, 0).unwrap();
    let m0 = &data.oracle.m0;
    let fitted = path::refit(&Family::gaussian(), &data.y, &data.x, m0, false).unwrap();
    let out = evaluate(m0, m0, Some(&fitted), &data, false);
    // E(x1 x2)^2 = 1; the test mean has standard error ~ sqrt(8 / 10000)
    let err = out.error.unwrap();
    assert!((err - 1.0).abs() < 0.1, "{err}");
}

#[test]
fn selection_bookkeeping() {
    let config = small(Scenario::LinearInteractionWeak, 1);
    let data = generate(&config, 0).unwrap();
    let target = data.oracle.target.clone();
    let exact = evaluate(&target, &target, None, &data, false);
    assert!(exact.consistent && exact.includes);
    assert_eq!(exact.false_positives, 0);
    assert!(exact.error.is_none());

    let mut wider = target.clone();
    wider.extend([20, 25]);
    let out = evaluate(&wider, &target, None, &data, false);
    assert!(!out.consistent && out.includes);
    assert_eq!(out.false_positives, 2);
    // the weak effects are all missed
    assert_eq!(out.false_negatives_weak, 5);
    assert_eq!(out.false_negatives_strong, 0);
}
