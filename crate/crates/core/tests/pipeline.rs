mod common;

use std::collections::BTreeSet;

use common::*;
use houseplan::pddl::{parse_problem, serialize_problem, Domain};
use houseplan::pipeline::{
    parse_output, render_output, replay_check, solve_sequence, write_composed, PipelineOptions, PolicyOutput, Subgoal,
    Subtask,
};
use houseplan::planner::{self, validate_plan, Algorithm, SearchConfig};
use houseplan::reward::{CompletionLabel, RewardBreakdown};
use houseplan::scene_graph::parse_scene_graph;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn open_and_retrieve_matches_golden_listing() {
    let domain = Domain::household();
    let sg = parse_scene_graph(&fixture("home_scene.json")).unwrap();
    let out = parse_output(&fixture("open_and_retrieve.policy")).unwrap();
    let result = solve_sequence(&sg, &out, &domain, &PipelineOptions::default()).unwrap();
    assert!(result.feasible());
    replay_check(&sg, &out, &result, &domain).unwrap();
    assert_eq!(write_composed(&result), fixture("golden/open_and_retrieve.plan.txt"));
}

#[test]
fn second_subtask_sees_effects_of_the_first() {
    let domain = Domain::household();
    let sg = parse_scene_graph(&fixture("home_scene.json")).unwrap();
    let out = parse_output(&fixture("open_and_retrieve.policy")).unwrap();
    let threaded = solve_sequence(&sg, &out, &domain, &PipelineOptions::default()).unwrap();
    let opts = PipelineOptions {
        thread_scene: false,
        ..PipelineOptions::default()
    };
    let isolated = solve_sequence(&sg, &out, &domain, &opts).unwrap();
    assert!(threaded.feasible());
    // Without threading the cabinet is still closed when the cup is fetched,
    // and the pruned problem for subtask 2 does not include the cabinet.
    assert!(!isolated.feasible());
    assert_eq!(isolated.failure.as_ref().map(|f| f.k), Some(2));
}

fn small_instance(seed: u64) -> (houseplan::scene_graph::SceneGraph, Vec<houseplan::pddl::Literal>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sg = random_scene(&mut rng, 2, 2, 2, false);
    let goal = random_goal(&mut rng, &sg, 2);
    (sg, goal)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn plans_are_valid_and_bfs_is_optimal(seed in any::<u64>()) {
        let domain = Domain::household();
        let (sg, goal) = small_instance(seed);
        let problem = full_problem(&sg, &goal, &domain);
        let actions = naive_ground(&domain, &problem);
        let best = oracle_shortest(&problem, &actions, 200_000);
        for algorithm in [Algorithm::AstarHadd, Algorithm::Bfs] {
            let cfg = SearchConfig { algorithm, ..SearchConfig::default() };
            let r = planner::solve(&domain, &problem, &cfg).unwrap();
            match (r.plan(), best) {
                (Some(p), Some(n)) => {
                    // h_add can overestimate, so only breadth-first search
                    // promises a shortest plan.
                    match algorithm {
                        Algorithm::Bfs => prop_assert_eq!(p.len(), n),
                        Algorithm::AstarHadd => prop_assert!(p.len() >= n),
                    }
                    prop_assert!(validate_plan(&domain, &problem, p).is_valid());
                    prop_assert!(oracle_accepts(&problem, &p.actions));
                }
                (None, None) => {}
                (p, n) => prop_assert!(false, "planner {:?} vs oracle {:?}", p.map(|p| p.len()), n),
            }
        }
    }

    #[test]
    fn problem_text_round_trips(seed in any::<u64>()) {
        let domain = Domain::household();
        let (sg, goal) = small_instance(seed);
        let problem = full_problem(&sg, &goal, &domain);
        let text = serialize_problem(&problem);
        let back = parse_problem(&text, &domain).unwrap();
        prop_assert_eq!(&back, &problem);
        prop_assert_eq!(serialize_problem(&back), text);
    }

    #[test]
    fn scene_json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sg = random_scene(&mut rng, 3, 4, 5, true);
        prop_assert_eq!(parse_scene_graph(&sg.to_json()).unwrap(), sg);
    }

    #[test]
    fn rendered_outputs_parse_back(
        steps in prop::collection::vec(("[a-z]{1,8}( [a-z]{1,8}){0,3}", prop::collection::btree_set("[a-z]{1,6}_[0-9]", 1..4)), 1..5)
    ) {
        let out = PolicyOutput {
            trace: steps.iter().enumerate().map(|(i, (t, _))| Subtask { index: i + 1, text: t.clone() }).collect(),
            subgoals: steps
                .iter()
                .enumerate()
                .map(|(i, (_, objs))| {
                    let first = objs.iter().next().unwrap().clone();
                    Subgoal {
                        index: i + 1,
                        objects: objs.clone(),
                        literals: vec![houseplan::pddl::Literal::pos(houseplan::pddl::Atom::new("clean", [first]))],
                    }
                })
                .collect(),
        };
        let text = render_output(&out);
        prop_assert_eq!(parse_output(&text).unwrap(), out);
    }

    #[test]
    fn reward_is_bounded_and_zero_when_infeasible(feasible in any::<bool>(), label in 0u8..3) {
        let label = [CompletionLabel::Bad, CompletionLabel::Normal, CompletionLabel::Good][label as usize];
        let b = RewardBreakdown::new(feasible, label);
        prop_assert!((0.0..=1.0).contains(&b.reward));
        if !feasible {
            prop_assert_eq!(b.reward, 0.0);
        }
    }
}

#[test]
fn pruned_objects_are_a_subset_of_the_scene() {
    let domain = Domain::household();
    for seed in 0..30 {
        let (sg, goal) = small_instance(seed);
        let objects: BTreeSet<String> = goal.iter().flat_map(|l| l.atom.args.iter().cloned()).collect();
        let sub = Subgoal {
            index: 1,
            objects,
            literals: goal,
        };
        let problem = houseplan::pipeline::construct_problem(&sg, &sub, &domain, true).unwrap();
        let full = full_problem(&sg, &sub.literals, &domain);
        assert!(problem.objects.len() <= full.objects.len());
        for o in problem.objects.keys() {
            assert!(full.objects.iter().any(|(f, _)| f == o), "{o}");
        }
    }
}

