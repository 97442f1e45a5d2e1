mod common;

use common::{arb_dataset, chained, spec};
use proptest::prelude::*;
use serde_json::json;
use sieve_core::dataset::{
    from_orld_str, load_dataset, save_dataset, segment_episodes, to_orld_string, validate_dataset, Dataset,
    EnvSpec, Episode, Payload, SpaceKind, Transition,
};
use sieve_core::Error;

/// Writes ORLD text straight from the struct fields, without going through
/// the library's writer, so invalid datasets can be serialized too.
fn hand_render(d: &Dataset) -> String {
    let kind = |k: SpaceKind| match k {
        SpaceKind::Discrete(n) => json!({ "discrete": n }),
        SpaceKind::Continuous(n) => json!({ "continuous": n }),
    };
    let payload = |p: &Payload| match p {
        Payload::Id(i) => json!(i),
        Payload::Vector(v) => json!(v),
    };
    let mut out = json!({
        "orld": 1,
        "env_id": d.env_spec.env_id,
        "state_kind": kind(d.env_spec.state_kind),
        "action_kind": kind(d.env_spec.action_kind),
        "horizon": d.env_spec.horizon,
        "provenance": d.provenance,
    })
    .to_string();
    out.push('\n');
    for e in &d.episodes {
        for (t, tr) in e.transitions.iter().enumerate() {
            let rec = json!({
                "ep": e.index, "t": t, "s": payload(&tr.state), "a": payload(&tr.action),
                "r": tr.reward, "s2": payload(&tr.next_state), "term": tr.terminal, "tout": tr.timeout,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
    }
    out
}

/// Linear-scan segmentation oracle: cut after every flagged transition.
fn oracle_segments(log: &[Transition]) -> Vec<Vec<Transition>> {
    let mut cuts = vec![0];
    for (i, t) in log.iter().enumerate() {
        if t.terminal || t.timeout {
            cuts.push(i + 1);
        }
    }
    if *cuts.last().unwrap() != log.len() {
        cuts.push(log.len());
    }
    cuts.windows(2).map(|w| log[w[0]..w[1]].to_vec()).collect()
}

#[derive(Debug, Clone)]
enum Corruption {
    None,
    BreakChain(usize),
    MidFlag(usize),
    BothFlags(usize),
    NanReward(usize),
    ActionOutOfRange(usize),
}

fn corrupt(d: &mut Dataset, c: &Corruption) {
    let n = d.transition_count();
    let mut all: Vec<&mut Transition> = d.episodes.iter_mut().flat_map(|e| e.transitions.iter_mut()).collect();
    match *c {
        Corruption::None => {}
        Corruption::BreakChain(i) => {
            let t = &mut all[i % n];
            t.next_state = Payload::Id((t.next_state.as_id().unwrap() + 1) % common::N_STATES as u64);
        }
        Corruption::MidFlag(i) => all[i % n].terminal = true,
        Corruption::BothFlags(i) => {
            all[i % n].terminal = true;
            all[i % n].timeout = true;
        }
        Corruption::NanReward(i) => all[i % n].reward = f64::NAN,
        Corruption::ActionOutOfRange(i) => all[i % n].action = Payload::Id(common::N_ACTIONS as u64),
    }
}

fn arb_corruption() -> impl Strategy<Value = Corruption> {
    prop_oneof![
        Just(Corruption::None),
        any::<usize>().prop_map(Corruption::BreakChain),
        any::<usize>().prop_map(Corruption::MidFlag),
        any::<usize>().prop_map(Corruption::BothFlags),
        any::<usize>().prop_map(Corruption::NanReward),
        any::<usize>().prop_map(Corruption::ActionOutOfRange),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn orld_round_trip_is_bit_exact(d in arb_dataset(8, 12), scale in -1e300f64..1e300) {
        let d = common::map_rewards(&d, |r| r * scale);
        let text = to_orld_string(&d).unwrap();
        let back = from_orld_str(&text).unwrap();
        prop_assert_eq!(&back, &d);
        for (a, b) in back.transitions().zip(d.transitions()) {
            prop_assert_eq!(a.reward.to_bits(), b.reward.to_bits());
        }
        prop_assert_eq!(to_orld_string(&back).unwrap(), text);
    }

    #[test]
    fn library_writer_matches_independent_writer(d in arb_dataset(5, 8)) {
        let ours = to_orld_string(&d).unwrap();
        let theirs = hand_render(&d);
        prop_assert_eq!(ours.lines().count(), theirs.lines().count());
        for (a, b) in ours.lines().zip(theirs.lines()) {
            let a: serde_json::Value = serde_json::from_str(a).unwrap();
            let b: serde_json::Value = serde_json::from_str(b).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn load_succeeds_iff_validation_passes(d in arb_dataset(5, 8), c in arb_corruption()) {
        let mut d = d;
        corrupt(&mut d, &c);
        let valid = validate_dataset(&d).is_ok();
        let loaded = from_orld_str(&hand_render(&d));
        prop_assert_eq!(loaded.is_ok(), valid, "{:?}", c);
        if let Ok(back) = loaded {
            prop_assert_eq!(back, d);
        } else if !matches!(c, Corruption::NanReward(_)) {
            let is_invariant = matches!(loaded, Err(Error::Invariant { .. }));
            prop_assert!(is_invariant, "{:?}", loaded);
        }
    }

    #[test]
    fn segmentation_matches_linear_scan(
        steps in prop::collection::vec((0u64..6, 0u64..3, -1.0f64..1.0, 0u8..6), 0..60)
    ) {
        // flags: 0 => terminal, 1 => timeout, otherwise none
        let log: Vec<Transition> = steps
            .iter()
            .map(|&(s, a, r, f)| Transition::discrete(s, a, r, (s + 1) % 6).with_terminal(f == 0).with_timeout(f == 1))
            .collect();
        let d = segment_episodes(&log, spec()).unwrap();
        let expected = oracle_segments(&log);
        prop_assert_eq!(d.len(), expected.len());
        for (i, (e, want)) in d.episodes.iter().zip(&expected).enumerate() {
            prop_assert_eq!(e.index, i);
            prop_assert_eq!(&e.transitions, want);
        }
        let tail = log.last().is_some_and(|t| !t.terminal && !t.timeout);
        prop_assert_eq!(d.has_truncated_tail(), tail);
        prop_assert_eq!(d.transitions().count(), log.len());
    }
}

#[test]
fn nan_reward_is_rejected_as_parse_or_invariant() {
    // JSON has no NaN literal, so the independent writer emits null
    let mut d = Dataset::new(spec(), vec![chained(0, 0, &[(1, 0.5, 2)], 1)], "");
    d.episodes[0].transitions[0].reward = f64::NAN;
    assert!(from_orld_str(&hand_render(&d)).is_err());
    assert!(to_orld_string(&d).is_err());
}

#[test]
fn continuous_dataset_round_trips_through_file() {
    let spec = EnvSpec::new("pendulum", SpaceKind::Continuous(2), SpaceKind::Continuous(1), 3).unwrap();
    let v = |x: f64, y: f64| Payload::Vector(vec![x, y]);
    let t = |s: Payload, a: f64, r: f64, s2: Payload| Transition {
        state: s,
        action: Payload::Vector(vec![a]),
        reward: r,
        next_state: s2,
        terminal: false,
        timeout: false,
    };
    let d = Dataset::new(
        spec,
        vec![Episode::new(
            0,
            vec![
                t(v(0.1, -0.2), 0.3, -1.5, v(0.15, -0.25)),
                t(v(0.15, -0.25), -0.7, 1.0 / 3.0, v(1e-300, 2.5)).with_timeout(true),
            ],
        )],
        "source=hand",
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.orld");
    save_dataset(&d, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), d);
}

#[test]
fn save_refuses_invalid_dataset_and_leaves_no_file() {
    let mut d = Dataset::new(spec(), vec![chained(0, 0, &[(1, 0.5, 2), (0, 0.0, 3)], 1)], "");
    d.episodes[0].transitions[0].next_state = Payload::Id(5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.orld");
    let err = save_dataset(&d, &path).unwrap_err();
    assert!(err.to_string().contains("episode 0 step 0"), "{err}");
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_dataset("/nonexistent/x.orld"), Err(Error::Io { .. })));
}
