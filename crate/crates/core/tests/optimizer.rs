use opbo::acquisition::{AcquisitionKind, AcquisitionSpec};
use opbo::benchfn::{FunctionName, ObjectiveFunction};
use opbo::optimizer::{
    run, run_opbo, run_standard_bo, run_trust_region, Framework, OptimizationTrace, RunConfig, SurrogateKind,
};

fn config(f: FunctionName, d: usize, framework: Framework, surrogate: SurrogateKind, r: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(ObjectiveFunction::new(f, d).unwrap(), framework, surrogate, r);
    c.seed = seed;
    c
}

/// Everything except wall-clock fields.
fn strip_timing(t: &OptimizationTrace) -> OptimizationTrace {
    let mut t = t.clone();
    t.total_seconds = 0.0;
    for r in &mut t.records {
        r.fit_seconds = 0.0;
        r.iter_seconds = 0.0;
    }
    t
}

fn check_trace_invariants(t: &OptimizationTrace, k: usize) {
    let mut evals = 0u64;
    let mut best = f64::INFINITY;
    for (i, r) in t.records.iter().enumerate() {
        assert_eq!(r.iteration, i);
        assert_eq!(r.suggested.len(), r.observed.len());
        evals += r.observed.len() as u64;
        assert_eq!(r.evals_cumulative, evals);
        best = r.observed.iter().copied().fold(best, f64::min);
        assert_eq!(r.incumbent, best);
        assert!(r.suggested.iter().flatten().all(|u| (0.0..=1.0).contains(u)));
    }
    assert_eq!(t.records[0].observed.len(), k);
    assert!(t.records.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
    assert_eq!(t.best_value, best);
}

#[test]
fn standard_bo_makes_progress_on_levy_2d() {
    for seed in 0..10 {
        let mut c = config(FunctionName::Levy, 2, Framework::StandardBo, SurrogateKind::Gp, 30, seed);
        c.candidate_size = Some(200);
        let t = run_standard_bo(&c).unwrap();
        check_trace_invariants(&t, 10);
        assert!(t.final_incumbent() < t.initial_incumbent(), "seed {seed}");
    }
}

#[test]
fn budget_arithmetic() {
    let t = run_standard_bo(&config(FunctionName::Rosenbrock, 3, Framework::StandardBo, SurrogateKind::Gp, 1, 0)).unwrap();
    assert_eq!(t.evaluations(), 11);
    let mut c = config(FunctionName::Ackley, 4, Framework::Opbo, SurrogateKind::Op, 5, 0);
    c.train.epochs = 5;
    let t = run_opbo(&c).unwrap();
    assert_eq!(t.evaluations(), 60);
    check_trace_invariants(&t, 10);
}

#[test]
fn seeded_runs_are_reproducible() {
    for (framework, surrogate) in [
        (Framework::StandardBo, SurrogateKind::Gp),
        (Framework::Opbo, SurrogateKind::Op),
        (Framework::Opbo, SurrogateKind::Nn),
        (Framework::TrustRegion, SurrogateKind::Gp),
        (Framework::RandomSearch, SurrogateKind::Op),
    ] {
        let mut c = config(FunctionName::DixonPrice, 5, framework, surrogate, 6, 42);
        c.train.epochs = 10;
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(strip_timing(&a), strip_timing(&b), "{framework}/{surrogate}");
        c.seed = 43;
        assert_ne!(strip_timing(&a).records, strip_timing(&run(&c).unwrap()).records);
    }
}

#[test]
fn opbo_with_g1_matches_standard_bo() {
    let bo = config(FunctionName::Levy, 3, Framework::StandardBo, SurrogateKind::Gp, 8, 7);
    let mut op = config(FunctionName::Levy, 3, Framework::Opbo, SurrogateKind::Gp, 8, 7);
    op.good_enough_size = 1;
    op.acquisition = Some(AcquisitionSpec::new(AcquisitionKind::Ts));
    let a = run_standard_bo(&bo).unwrap();
    let b = run_opbo(&op).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.suggested, rb.suggested);
        assert_eq!(rb.suggested.len(), if ra.iteration == 0 { 10 } else { 1 });
    }
}

#[test]
fn every_framework_and_surrogate_keeps_invariants() {
    let cases = [
        (Framework::StandardBo, SurrogateKind::Op, AcquisitionKind::Ei),
        (Framework::StandardBo, SurrogateKind::Gp, AcquisitionKind::Ucb),
        (Framework::Opbo, SurrogateKind::Gp, AcquisitionKind::Ei),
        (Framework::Opbo, SurrogateKind::Nn, AcquisitionKind::Greedy),
        (Framework::TrustRegion, SurrogateKind::Op, AcquisitionKind::Greedy),
        (Framework::TrustRegion, SurrogateKind::Nn, AcquisitionKind::Ucb),
    ];
    for (framework, surrogate, kind) in cases {
        let mut c = config(FunctionName::Ackley, 6, framework, surrogate, 8, 3);
        c.acquisition = Some(AcquisitionSpec::new(kind));
        c.train.epochs = 5;
        let t = run(&c).unwrap();
        check_trace_invariants(&t, 10);
    }
}

#[test]
fn trust_region_restarts_are_charged() {
    let mut c = config(FunctionName::Levy, 2, Framework::TrustRegion, SurrogateKind::Gp, 40, 1);
    c.candidate_size = Some(50);
    c.good_enough_size = 2;
    c.trust_region.failure_tolerance = Some(1);
    let t = run_trust_region(&c).unwrap();
    check_trace_invariants(&t, 10);
    let restarts: Vec<_> = t.records.iter().filter(|r| r.restarted).collect();
    assert!(!restarts.is_empty(), "expected the region to collapse at tolerance 1");
    for r in restarts {
        assert_eq!(r.observed.len(), 10);
        assert_eq!(r.trust_region_length, Some(0.8));
    }
    assert!(t
        .records
        .iter()
        .filter_map(|r| r.trust_region_length)
        .all(|l| (1.0 / 128.0..=1.6).contains(&l)));
}

#[test]
fn trust_region_helps_or_ties_on_ackley_100() {
    let mut wins = 0;
    for seed in 0..10 {
        let tr = run(&config(FunctionName::Ackley, 100, Framework::TrustRegion, SurrogateKind::Op, 50, seed)).unwrap();
        let op = run(&config(FunctionName::Ackley, 100, Framework::Opbo, SurrogateKind::Op, 50, seed)).unwrap();
        assert_eq!(tr.evaluations(), op.evaluations());
        if tr.best_value <= op.best_value {
            wins += 1;
        }
    }
    assert!(wins >= 6, "trust region at or below OPBO in {wins}/10 seeds");
}
