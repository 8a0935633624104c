mod common;

use std::collections::HashMap;

use antnas_core::evaluation::{enumerate_walks, LandscapeSpec, BASELINE_SCORE};
use antnas_core::protocol::{decode, encode, Message};
use antnas_core::select::{aco_select, argmax, wheel_probabilities, Candidate};
use antnas_core::space::{complete_layers, default_space, ArchitectureDescriptor};
use antnas_core::SelectionParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::SHAPE;

fn descriptor(seed: u64, depth: usize) -> ArchitectureDescriptor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    default_space().sample_walk(SHAPE, depth, &mut rng)
}

fn candidates() -> impl Strategy<Value = Vec<Candidate>> {
    prop::collection::vec((1e-3f64..10.0, 1e-3f64..10.0), 1..8)
        .prop_map(|v| v.into_iter().map(|(t, h)| Candidate::new(t, h)).collect())
}

#[test]
fn json_round_trip_is_exhaustive_to_depth_three() {
    let space = default_space();
    for len in 1..=3 {
        for mut layers in enumerate_walks(&space, len) {
            complete_layers(&mut layers, &space);
            let d = ArchitectureDescriptor::new(SHAPE, layers);
            assert_eq!(ArchitectureDescriptor::from_json(&d.to_json()).unwrap(), d);
        }
    }
}

#[test]
fn canonical_string_is_injective_to_depth_three() {
    let space = default_space();
    let mut by_string: HashMap<String, String> = HashMap::new();
    let mut by_json: HashMap<String, String> = HashMap::new();
    for len in 1..=3 {
        for mut layers in enumerate_walks(&space, len) {
            complete_layers(&mut layers, &space);
            let d = ArchitectureDescriptor::new(SHAPE, layers);
            let s = d.canonical_string(&space).unwrap();
            let j = d.to_json();
            assert_eq!(by_string.entry(s.clone()).or_insert_with(|| j.clone()), &j);
            assert_eq!(by_json.entry(j).or_insert(s.clone()), &s);
        }
    }
    assert_eq!(by_string.len(), by_json.len());
}

#[test]
fn graph_laws_hold_under_random_operations() {
    for seed in 0..200 {
        common::fuzz_graph(seed, 25);
    }
}

proptest! {
    #[test]
    fn json_round_trip_deep(seed in any::<u64>(), depth in 4usize..12) {
        let d = descriptor(seed, depth);
        prop_assert_eq!(ArchitectureDescriptor::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn argmax_ignores_common_scale(c in candidates(), k in 1e-3f64..1e3, beta in 0.0f64..3.0) {
        let scaled: Vec<Candidate> = c.iter().map(|x| Candidate::new(x.pheromone * k, x.heuristic)).collect();
        let mut a = ChaCha8Rng::seed_from_u64(0);
        let mut b = ChaCha8Rng::seed_from_u64(0);
        let p = SelectionParams { greediness: 1.0, beta };
        prop_assert_eq!(aco_select(&c, &p, &mut a), aco_select(&scaled, &p, &mut b));
    }

    #[test]
    fn wheel_probabilities_sum_to_one(c in candidates(), beta in 0.0f64..3.0) {
        let p = wheel_probabilities(&c, beta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn selection_stays_in_range(c in candidates(), q0 in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = SelectionParams { greediness: q0, beta: 1.0 };
        for _ in 0..20 {
            prop_assert!(aco_select(&c, &p, &mut rng).unwrap() < c.len());
        }
    }

    #[test]
    fn scores_stay_in_unit_interval(
        landscape_seed in any::<u64>(),
        target_depth in 1usize..6,
        walk_seed in any::<u64>(),
        walk_depth in 1usize..10,
        sigma in 0.0f64..0.5,
    ) {
        let space = default_space();
        let mut l = LandscapeSpec::generate(&space, SHAPE, target_depth, landscape_seed);
        let d = descriptor(walk_seed, walk_depth);
        let clean = l.clean_score(&d);
        prop_assert!((BASELINE_SCORE..=1.0).contains(&clean));
        l.noise_sigma = sigma;
        let noisy = l.score(&d);
        prop_assert!((0.0..=1.0).contains(&noisy));
        prop_assert_eq!(noisy, l.score(&d));
    }

    #[test]
    fn protocol_messages_round_trip(
        id in any::<u64>(),
        seed in any::<u64>(),
        accuracy in 0.0f64..=1.0,
        wall in 0.0f64..1e7,
        key in prop::option::of("[a-z0-9_]{1,12}"),
        reuse in 0usize..6,
    ) {
        let messages = [
            Message::Hello { version: 1, input_shape: SHAPE },
            Message::HelloAck { version: 1, supports_weight_reuse: reuse % 2 == 0 },
            Message::EvalRequest { id, descriptor: descriptor(seed, 3), reuse_prefix_len: reuse, reuse_key: key.clone() },
            Message::EvalResult { id, accuracy, loss: Some(wall / 3.0), wall_ms: wall, stored_key: key.clone() },
            Message::EvalError { id, code: "OOM".into(), message: format!("{key:?}") },
            Message::Shutdown,
        ];
        for m in messages {
            let line = encode(&m);
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(decode(&line).unwrap(), m);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn greediness_interpolates(c in candidates(), q0 in 0.0f64..=1.0, seed in any::<u64>()) {
        let draws = 10_000;
        let best = argmax(&c, 1.0);
        let p = wheel_probabilities(&c, 1.0)[best];
        let expected = q0 + (1.0 - q0) * p;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = SelectionParams { greediness: q0, beta: 1.0 };
        let hits = (0..draws)
            .filter(|_| aco_select(&c, &params, &mut rng).unwrap() == best)
            .count();
        prop_assert!((hits as f64 / draws as f64 - expected).abs() <= 0.02);
    }

    #[test]
    fn graph_laws_random_sequences(seed in any::<u64>()) {
        common::fuzz_graph(seed, 40);
    }
}

#[test]
fn decode_rejects_garbage() {
    assert!(decode("not json").is_err());
    assert!(decode(r#"{"type":"eval_result","id":1}"#).is_err());
    assert!(decode(r#"{"type":"launch_missiles"}"#).is_err());
    let ack = decode(r#"{"type":"hello_ack","version":1}"#).unwrap();
    assert_eq!(ack, Message::HelloAck { version: 1, supports_weight_reuse: false });
}
