mod common;

use std::path::Path;

use metacontrol::decision::{
    bayes_update, optimal_primary_decision, preposterior, prior_decision, select_method,
    value_of_information, Channel, ControlProblem, Distribution, MethodKind, MethodModel,
};
use metacontrol::methods::{
    is_unbiased, make_recommendation_channel, solve_recommendation_problem, Dispersion,
    RecommendationChannel, RecommendationLoss, RecommendationProblem,
};
use metacontrol::scenario::{load_scenario, parse_scenario, Scenario};
use metacontrol::scheduler::{
    match_triggers, resolve_conflict, run, ChangeEvent, ChangeSource, FactWrite, Handler,
    KnowledgeSpace, ResolutionContext, RunConfig, SchedulerSetup, Step, Task, Tier, TraceEvent,
    TraceKind, Trigger,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-12;
/// Selections are compared only when every pair of EUs is at least this far
/// apart or within `TOL`, so rounding cannot move a method across the tie
/// threshold.
const SEPARATION: f64 = 1e-6;

fn problem_from(seed: u64) -> (common::RawProblem, ControlProblem<f64>) {
    let raw = common::random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
    let problem = raw.build();
    (raw, problem)
}

fn well_separated(values: &[f64], scale: f64) -> bool {
    values.iter().enumerate().all(|(i, a)| {
        values[i + 1..].iter().all(|b| {
            let gap = (a - b).abs();
            gap <= TOL || gap >= SEPARATION * scale
        })
    })
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn affine_transform_keeps_selection(seed: u64, a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let (_, problem) = problem_from(seed);
        let scaled = problem.with_utility(problem.utility().affine(a, b)).unwrap();
        let before = select_method(&problem).unwrap();
        let after = select_method(&scaled).unwrap();
        for (x, y) in before.reports.iter().zip(&after.reports) {
            let want = a * x.expected_utility + b;
            prop_assert!((y.expected_utility - want).abs() <= 1e-7 * want.abs().max(1.0));
        }
        let eus: Vec<f64> = before.reports.iter().map(|r| r.expected_utility).collect();
        let costs: Vec<f64> = before.reports.iter().map(|r| r.expected_cost).collect();
        if well_separated(&eus, 1.0) && well_separated(&costs, 1.0) && a >= 1.0 {
            prop_assert_eq!(&before.selected, &after.selected);
        }
        let (d0, _) = prior_decision(&problem);
        let (d1, _) = prior_decision(&scaled);
        let priors: Vec<f64> = (0..problem.decisions().len())
            .map(|d| problem.prior().expect_indexed(|x| *problem.utility().primary(x, d)))
            .collect();
        if well_separated(&priors, 1.0) {
            prop_assert_eq!(d0, d1);
        }
    }

    #[test]
    fn duplicate_method_keeps_selected_eu(seed: u64, pick: usize) {
        let (_, problem) = problem_from(seed);
        let mut methods = problem.methods().to_vec();
        let mut copy = methods[pick % methods.len()].clone();
        copy.id = "copy".into();
        methods.push(copy);
        let extended = problem.with_methods(methods).unwrap();
        let before = select_method(&problem).unwrap();
        let after = select_method(&extended).unwrap();
        prop_assert_eq!(
            before.selected_report().expected_utility,
            after.selected_report().expected_utility
        );
        prop_assert_eq!(before.selected, after.selected);
    }

    #[test]
    fn produced_distributions_are_normalized(seed: u64) {
        let (_, problem) = problem_from(seed);
        for m in problem.methods() {
            let channel = problem.state_channel(m).unwrap();
            let pre = preposterior(problem.prior(), &channel).unwrap();
            prop_assert!((pre.total() - 1.0).abs() <= NORMALIZATION_TOL);
            for (s, mass) in pre.iter() {
                if *mass > 0.0 {
                    let post = bayes_update(problem.prior(), &channel, s).unwrap();
                    prop_assert!((post.total() - 1.0).abs() <= NORMALIZATION_TOL);
                }
            }
        }
    }

    #[test]
    fn free_methods_never_fall_below_acting_now(seed: u64) {
        let (_, problem) = problem_from(seed);
        let (_, now) = prior_decision(&problem);
        let free: Vec<MethodModel<f64>> = problem
            .methods()
            .iter()
            .map(|m| m.with_cost(Distribution::point(0.0)))
            .collect();
        let free = problem.with_methods(free).unwrap();
        for r in select_method(&free).unwrap().reports {
            prop_assert!(r.expected_utility >= now - TOL);
        }
        for m in problem.methods() {
            prop_assert!(value_of_information(&problem, &m.id).unwrap() >= -TOL);
        }
    }

    #[test]
    fn reports_are_deterministic(seed: u64) {
        let (_, problem) = problem_from(seed);
        let a = format!("{:?}", select_method(&problem).unwrap());
        let b = format!("{:?}", select_method(&problem.clone()).unwrap());
        prop_assert_eq!(a, b);
        for m in problem.methods() {
            for s in m.channel.signals() {
                let x = optimal_primary_decision(&problem, &m.id, s);
                let y = optimal_primary_decision(&problem, &m.id, s);
                prop_assert_eq!(format!("{x:?}"), format!("{y:?}"));
            }
        }
    }

    #[test]
    fn recommendation_rows_are_normalized(k in 2usize..6, p in 0.0f64..=1.0) {
        let spec = RecommendationChannel::uniform(common::labels("d", k), p);
        let channel = make_recommendation_channel(&spec).unwrap();
        for row in channel.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL);
        }
    }

    #[test]
    fn better_recommendations_never_hurt(seed: u64, p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=4);
        let decisions = common::labels("d", k);
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let prior = Distribution::from_weights(decisions.clone(), weights).unwrap();
        let loss: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { rng.gen_range(1.0..50.0) }).collect())
            .collect();
        let dispersion: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let w: Vec<f64> =
                    (0..k).map(|j| if i == j { 0.0 } else { rng.gen_range(0.01..1.0) }).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect()
            })
            .collect();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let eu = |p_optimal: f64| {
            let rp = RecommendationProblem {
                method_id: "rec".into(),
                prior: prior.clone(),
                loss: RecommendationLoss::Matrix(loss.clone()),
                channel: RecommendationChannel {
                    decisions: decisions.clone(),
                    p_optimal,
                    dispersion: Dispersion::Rows(dispersion.clone()),
                },
                cost: Distribution::point(3.0),
            };
            solve_recommendation_problem(&rp).unwrap().expected_utility
        };
        prop_assert!(eu(hi) >= eu(lo) - TOL);
    }

    #[test]
    fn unbiasedness_survives_relabeling(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=4);
        let values: Vec<i32> = (0..k as i32).map(|i| 2 * i - 1).collect();
        let plain: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let spelled: Vec<String> = values.iter().map(|v| format!("{v}.0")).collect();
        // symmetric rows about their own centre are unbiased; random rows mostly are not
        let rows: Vec<Vec<f64>> = if rng.gen_bool(0.5) {
            (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        } else {
            (0..k)
                .map(|_| {
                    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter().map(|v| v / total).collect()
                })
                .collect()
        };
        let original = Channel::new(plain.clone(), plain.clone(), rows.clone()).unwrap();
        let mut order: Vec<usize> = (0..k).collect();
        order.reverse();
        order.rotate_left(rng.gen_range(0..k));
        let permuted_signals: Vec<String> = order.iter().map(|&j| spelled[j].clone()).collect();
        let permuted_rows: Vec<Vec<f64>> =
            rows.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
        let relabeled = Channel::new(spelled.clone(), permuted_signals, permuted_rows).unwrap();
        prop_assert_eq!(is_unbiased(&original).unwrap(), is_unbiased(&relabeled).unwrap());
    }

    #[test]
    fn scenario_round_trip(seed: u64) {
        let (_, problem) = problem_from(seed);
        // the file format draws recommendation signals from the decisions
        let expressible: Vec<MethodModel<f64>> = problem
            .methods()
            .iter()
            .filter(|m| m.kind == MethodKind::StateEstimation)
            .cloned()
            .collect();
        prop_assume!(!expressible.is_empty());
        let problem = problem.with_methods(expressible).unwrap();
        let scenario = Scenario {
            context: "random".into(),
            problem: Some(problem),
            handlers: Vec::new(),
            rules: Vec::new(),
            config: None,
            annotations: Vec::new(),
            pathplan: None,
        };
        let reloaded = parse_scenario(&scenario.to_json()).unwrap();
        prop_assert_eq!(reloaded, scenario);
    }
}

fn handler(id: &str, priority: i64, aging: i64, key: &str, writes: &str) -> Handler {
    Handler {
        id: id.into(),
        trigger: Trigger::on_fact(key),
        base_priority: priority,
        aging_rate: aging,
        body: vec![Step {
            duration: 1,
            writes: vec![FactWrite {
                key: writes.into(),
                value: "done".into(),
            }],
        }],
        method: None,
        goal: None,
        event_handler: false,
        annotation: None,
    }
}

/// `high` is retriggered every tick for `flood` ticks and saturates the
/// processor; `low` is triggered once at tick 0. Returns the tick of the
/// first dispatch of `low`'s task.
fn low_dispatch_tick(p_high: i64, p_low: i64, aging_low: i64, flood: u64) -> u64 {
    let setup = SchedulerSetup {
        handlers: vec![
            handler("high", p_high, 1, "pulse", "h"),
            handler("low", p_low, aging_low, "goal", "l"),
        ],
        config: RunConfig::default(),
        ..SchedulerSetup::default()
    };
    let mut trace = vec![TraceEvent {
        tick: 0,
        kind: TraceKind::Fact,
        key: "goal".into(),
        value: "dock".into(),
    }];
    trace.extend((0..flood).map(|t| TraceEvent {
        tick: t,
        kind: TraceKind::Fact,
        key: "pulse".into(),
        value: t.to_string(),
    }));
    let out = run(setup, &trace).unwrap();
    let low = out.tasks.iter().find(|t| t.handler_id == "low").unwrap();
    let id = low.id.to_string();
    let tick = out
        .log
        .of_kind("dispatch")
        .find(|r| r.field("task") == Some(id.as_str()))
        .map(|r| r.tick)
        .expect("every task is dispatched eventually");
    tick
}

const FLOOD: u64 = 80;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aging_prevents_starvation(p_high in 0i64..30, gap in 0i64..30, aging in 1i64..5) {
        let p_low = p_high - gap;
        let tick = low_dispatch_tick(p_high, p_low, aging, FLOOD);
        // waiting `high` tasks gain at most a couple of points before running
        let bound = ((gap + 2) as u64).div_ceil(aging as u64) + 3;
        prop_assert!(tick <= bound, "dispatched at {tick}, bound {bound}");
    }

    #[test]
    fn zero_budget_is_priority_order(priorities in prop::collection::vec(-10i64..10, 2..6), seed: u64) {
        let (_, problem) = problem_from(seed);
        let (handlers, mut tasks) = conflict_set(priorities.len(), |i| {
            problem.methods().get(i).map(|m| m.id.clone())
        });
        for (t, p) in tasks.iter_mut().zip(&priorities) {
            t.current_priority = *p;
        }
        let space = KnowledgeSpace::default();
        let ctx = ResolutionContext {
            handlers: &handlers,
            rules: &[],
            problem: Some(&problem),
            space: &space,
            tiers: &Tier::ALL,
        };
        let set: Vec<&Task> = tasks.iter().collect();
        let resolution = resolve_conflict(&set, &ctx, 0);
        prop_assert_eq!(resolution.tier, Tier::DefaultPriority);
        let mut expected: Vec<&Task> = tasks.iter().collect();
        expected.sort_by_key(|t| (-t.current_priority, t.enqueue_tick, t.handler_id.clone(), t.id));
        prop_assert_eq!(resolution.order, expected.iter().map(|t| t.id).collect::<Vec<_>>());
    }

    #[test]
    fn decision_tier_follows_method_ranking(seed: u64) {
        let (_, problem) = problem_from(seed);
        let n = problem.methods().len();
        prop_assume!(n >= 2);
        let (handlers, tasks) = conflict_set(n, |i| Some(problem.methods()[i].id.clone()));
        let space = KnowledgeSpace::default();
        let ctx = ResolutionContext {
            handlers: &handlers,
            rules: &[],
            problem: Some(&problem),
            space: &space,
            tiers: &Tier::ALL,
        };
        let set: Vec<&Task> = tasks.iter().collect();
        let resolution = resolve_conflict(&set, &ctx, u64::MAX);
        prop_assert_eq!(resolution.tier, Tier::DecisionTheoretic);
        let ranking = select_method(&problem).unwrap().ranking;
        let order: Vec<usize> = resolution.order.iter().map(|id| *id as usize).collect();
        prop_assert_eq!(order, ranking);
    }
}

/// `n` handlers writing the same key, one task each, ids `0..n` in handler
/// order.
fn conflict_set(n: usize, method: impl Fn(usize) -> Option<String>) -> (Vec<Handler>, Vec<Task>) {
    let handlers: Vec<Handler> = (0..n)
        .map(|i| Handler {
            method: method(i),
            ..handler(&format!("h{i}"), 0, 1, "goal", "plan")
        })
        .collect();
    let event = ChangeEvent {
        seq: 0,
        tick: 0,
        key: "goal".into(),
        value: "dock".into(),
        source: ChangeSource::External,
    };
    let tasks = match_triggers(&handlers, &[event], 0);
    (handlers, tasks)
}

#[test]
fn starvation_without_aging() {
    // the contrast case: with no aging the low task waits out the flood
    assert!(low_dispatch_tick(10, 0, 0, FLOOD) >= FLOOD);
    assert!(low_dispatch_tick(10, 0, 1, FLOOD) <= 14);
}

#[test]
fn fixtures_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let scenario = load_scenario(&path).unwrap();
        let reloaded = parse_scenario(&scenario.to_json()).unwrap();
        assert_eq!(reloaded, scenario, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
    assert!(fixture("p1.json").exists());
}
