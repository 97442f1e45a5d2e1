use sieve_core::env::solve_optimal;
use sieve_core::eval::{
    default_plan, emit_results, parse_results, render_results, rollout_return, run_experiment, Budget,
    CriterionChoice, EvalConfig, EvalPlan, ExperimentPlan, LearnerPlan, RowStatus,
};
use sieve_core::learn::{train, Algorithm};

fn small_plan() -> ExperimentPlan {
    ExperimentPlan {
        env_params: vec!["n=4".into(), "slip=0.1".into()],
        episodes: 60,
        n_seeds: 3,
        checkpoints: vec![2, 10, 60],
        eval: EvalPlan {
            n_episodes: 100,
            gamma: 1.0,
        },
        ..default_plan()
    }
}

#[test]
fn unfiltered_cell_equals_direct_training_and_rollout() {
    let plan = ExperimentPlan {
        criteria: vec![CriterionChoice::None],
        ..small_plan()
    };
    let t = run_experiment(&plan).unwrap();
    let m = plan.env().unwrap();
    for i in 0..plan.n_seeds {
        let d = plan.dataset_for_seed(&m, i).unwrap();
        for l in &plan.learners {
            for &c in &plan.checkpoints {
                let seed = plan.dataset_seed + i as u64;
                let model = train(&d, &l.config(c, seed)).unwrap();
                let stats = rollout_return(&m, &model.policy, &plan.eval_config(i)).unwrap();
                let row = t
                    .rows
                    .iter()
                    .find(|r| r.algorithm == l.algorithm && r.seed == seed && r.checkpoint == c)
                    .unwrap();
                assert_eq!(row.mean_return, Some(stats.mean), "{:?} seed {seed} checkpoint {c}", l.algorithm);
                assert_eq!(row.dataset_size_transitions, d.transition_count());
                assert_eq!(row.fallback_steps, stats.fallback_steps);
            }
        }
    }
}

#[test]
fn noiseless_expert_data_recovers_optimal_return() {
    let plan = ExperimentPlan {
        env_params: vec!["n=4".into(), "slip=0".into()],
        mix: [0, 0, 1],
        episodes: 20,
        n_seeds: 2,
        criteria: vec![CriterionChoice::None],
        checkpoints: vec![200],
        behavior: sieve_core::eval::BehaviorPlan {
            epsilon: 0.0,
            ..Default::default()
        },
        ..small_plan()
    };
    let t = run_experiment(&plan).unwrap();
    let m = plan.env().unwrap();
    let sol = solve_optimal(&m, 0.99).unwrap();
    let optimal: Vec<Option<usize>> = sol.policy.iter().map(|&a| Some(a)).collect();
    let best = rollout_return(&m, &optimal, &EvalConfig { n_episodes: 100, ..Default::default() }).unwrap().mean;
    for r in &t.rows {
        let got = r.mean_return.unwrap();
        assert!(got >= 0.95 * best, "{:?}: {got} vs optimal {best}", r.algorithm);
    }
}

#[test]
fn default_plan_rows_cover_the_cross_product() {
    let plan = default_plan();
    let t = run_experiment(&plan).unwrap();
    assert_eq!(t.rows.len(), 3 * 3 * plan.n_seeds * plan.checkpoints.len());
    let summary = t.summary();
    assert_eq!(summary.len(), 3 * 3 * plan.checkpoints.len());
    for s in &summary {
        assert_eq!(s.seeds_ok + s.seeds_degenerate, plan.n_seeds);
    }
}

#[test]
fn summary_matches_independent_aggregation() {
    let t = run_experiment(&small_plan()).unwrap();
    let parsed = parse_results(&render_results(&t)).unwrap();
    assert_eq!(parsed.table, t);
    assert_eq!(parsed.summary, t.summary());
    for s in &parsed.summary {
        let means: Vec<f64> = t
            .rows
            .iter()
            .filter(|r| r.algorithm == s.algorithm && r.criterion == s.criterion && r.checkpoint == s.checkpoint)
            .filter_map(|r| r.mean_return)
            .collect();
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let std = (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((s.mean_return.unwrap() - mean).abs() < 1e-12);
        assert!((s.std_return.unwrap() - std).abs() < 1e-12);
    }
}

#[test]
fn results_are_identical_across_runs_and_thread_counts() {
    let plan = small_plan();
    let a = render_results(&run_experiment(&plan).unwrap());
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| render_results(&run_experiment(&plan).unwrap()));
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_results(&run_experiment(&plan).unwrap(), &p1).unwrap();
    emit_results(&run_experiment(&plan).unwrap(), &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(std::fs::read_to_string(&p1).unwrap(), a);
}

#[test]
fn constant_reward_environment_yields_degenerate_cells() {
    let plan = ExperimentPlan {
        env: "chain".into(),
        env_params: vec!["left_reward=0".into(), "right_reward=0".into()],
        ..small_plan()
    };
    let t = run_experiment(&plan).unwrap();
    for r in &t.rows {
        if r.criterion == CriterionChoice::None {
            assert_eq!(r.status, RowStatus::Ok);
        } else {
            assert_eq!(r.status, RowStatus::Degenerate);
            assert_eq!((r.mean_return, r.dataset_size_transitions), (None, 0));
        }
    }
    for s in t.summary().iter().filter(|s| s.criterion != CriterionChoice::None) {
        assert_eq!((s.seeds_ok, s.seeds_degenerate, s.mean_return), (0, plan.n_seeds, None));
    }
    let text = render_results(&t);
    assert!(text.contains("DEGENERATE"));
    assert_eq!(parse_results(&text).unwrap().table, t);
}

#[test]
fn filtered_datasets_are_strictly_smaller() {
    let t = run_experiment(&small_plan()).unwrap();
    for r in t.rows.iter().filter(|r| r.criterion != CriterionChoice::None && r.status == RowStatus::Ok) {
        let base = t
            .rows
            .iter()
            .find(|b| b.criterion == CriterionChoice::None && b.seed == r.seed)
            .unwrap();
        assert!(r.dataset_size_transitions < base.dataset_size_transitions);
    }
}

#[test]
fn equal_updates_budget_scales_sweeps_by_dataset_ratio() {
    let plan = ExperimentPlan {
        budget: Budget::EqualUpdates,
        criteria: vec![CriterionChoice::None, CriterionChoice::Avg],
        learners: vec![LearnerPlan::new(Algorithm::BcRegularizedQ)],
        n_seeds: 1,
        ..small_plan()
    };
    let t = run_experiment(&plan).unwrap();
    let m = plan.env().unwrap();
    let d = plan.dataset_for_seed(&m, 0).unwrap();
    let f = plan.filtered(&d, CriterionChoice::Avg).unwrap().unwrap();
    let (b, fb) = (d.transition_count(), f.transition_count());
    for &c in &plan.checkpoints {
        let sweeps = (c * b).div_ceil(fb);
        let model = train(&f, &plan.learners[0].config(sweeps, plan.dataset_seed)).unwrap();
        let want = rollout_return(&m, &model.policy, &plan.eval_config(0)).unwrap().mean;
        let row = t
            .rows
            .iter()
            .find(|r| r.criterion == CriterionChoice::Avg && r.checkpoint == c)
            .unwrap();
        assert_eq!(row.mean_return, Some(want), "checkpoint {c}");
        assert!(row.sweeps <= sweeps);
    }
}

#[test]
fn plan_file_round_trip_runs_the_same_experiment() {
    let plan = small_plan();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.toml");
    std::fs::write(&path, plan.to_toml()).unwrap();
    let loaded = sieve_core::eval::load_plan(&path).unwrap();
    assert_eq!(loaded, plan);
}
