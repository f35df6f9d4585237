//! Invariants checked over randomized runs.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use proact_core::adaptive::{Grammar, SaliencyParams};
use proact_core::config::{default_body_parts, Condition, Config, PolicyKind, ScriptEntry};
use proact_core::contextual::{build_igarf, narrate, Detail, GoalKind, Inventory};
use proact_core::engine::Engine;
use proact_core::harness::metrics;
use proact_core::harness::policy::{from_config, PolicyView};
use proact_core::log::{EventKind, EventLog, Source};
use proact_core::reactive::DriveKind;
use proact_core::world::{Hand, HumanInput, Region, RobotPrimitive};

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

const PHRASES: [&str; 12] = [
    "Take the cube.",
    "Give me the octopus.",
    "Point to the duck.",
    "Take the duck.",
    "This is the cube.",
    "I am Daniel.",
    "What have you done the other day?",
    "What happened next?",
    "Why did you do that?",
    "How do you call this action?",
    "What have you learned from your arm babbling?",
    "the weather is nice",
];

fn region() -> impl Strategy<Value = Region> {
    prop_oneof![Just(Region::I), Just(Region::S), Just(Region::H)]
}

fn object() -> impl Strategy<Value = String> {
    (1..=3u8).prop_map(|i| format!("obj_{i}"))
}

fn human_input() -> impl Strategy<Value = HumanInput> {
    prop_oneof![
        3 => (0..PHRASES.len()).prop_map(|i| HumanInput::Speak { text: PHRASES[i].into() }),
        2 => (object(), region(), region()).prop_map(|(object, from, to)| HumanInput::MoveObject { object, from, to }),
        1 => object().prop_map(|object| HumanInput::PointAt { object }),
        1 => (10..=16u32).prop_map(|joint| HumanInput::TouchBodyPart { joint }),
        1 => (prop_oneof![Just("push"), Just("wave"), Just("lift")], object(), any::<bool>()).prop_map(
            |(a, object, left)| HumanInput::PerformAction {
                action: a.into(),
                object,
                hand: if left { Hand::Left } else { Hand::Right },
            }
        ),
    ]
}

fn scenario() -> impl Strategy<Value = Config> {
    (
        any::<u64>(),
        prop_oneof![Just(Condition::Slow), Just(Condition::Medium), Just(Condition::Fast)],
        prop_oneof![
            Just(PolicyKind::Cooperative),
            Just(PolicyKind::Silent),
            Just(PolicyKind::TaskDriven)
        ],
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec((1..700u64, human_input()), 0..12),
    )
        .prop_map(|(seed, condition, kind, present, known, parts, inputs)| {
            let mut cfg = Config {
                seed,
                condition,
                ticks: 700,
                task: Some(Default::default()),
                ..Default::default()
            };
            cfg.human.present = present;
            cfg.human.known = known;
            if parts {
                cfg.body_parts = default_body_parts();
            }
            cfg.policy.kind = kind;
            cfg.policy.script = inputs.into_iter().map(|(t, i)| ScriptEntry::at_tick(t, i)).collect();
            cfg
        })
}

// ---------------------------------------------------------------------------
// Checked run
// ---------------------------------------------------------------------------

/// Runs the scenario tick by tick, checking per-tick invariants against the
/// live engine, and returns the log.
fn run_checked(cfg: &Config) -> Result<EventLog, TestCaseError> {
    let mut e = Engine::new(cfg.clone()).expect("valid config");
    let mut p = from_config(cfg);
    let deltas: BTreeMap<DriveKind, f64> = cfg.drive_specs().iter().map(|s| (s.kind, s.delta)).collect();
    let mut prev: Option<Vec<(DriveKind, f64, bool)>> = None;
    for _ in 0..cfg.ticks {
        let fresh = e.step().to_vec();
        e.world().check_consistency().map_err(TestCaseError::fail)?;

        // Brute-force modulator recount.
        let incomplete = e
            .opc()
            .iter()
            .filter(|x| x.in_scene() && x.missing_information())
            .count();
        let complete = e
            .opc()
            .iter()
            .filter(|x| x.in_scene() && !x.missing_information())
            .count();
        let counts = e.opc().modulator_counts();
        prop_assert_eq!((counts.incomplete, counts.complete), (incomplete, complete));

        // Label lookup is injective over known entities.
        let labels: Vec<&str> = e.opc().iter().filter_map(|x| x.label.as_deref()).collect();
        let unique: BTreeSet<&str> = labels.iter().copied().collect();
        prop_assert_eq!(labels.len(), unique.len(), "duplicate labels {:?}", labels);

        // Linear decay while unfrozen.
        let now: Vec<(DriveKind, f64, bool)> = fresh
            .iter()
            .find_map(|r| match &r.event {
                EventKind::DriveLevels { levels } => {
                    Some(levels.iter().map(|l| (l.drive, l.level, l.frozen)).collect())
                }
                _ => None,
            })
            .expect("one drive record per tick");
        if let Some(before) = &prev {
            for ((kind, a, fa), (_, b, fb)) in before.iter().zip(&now) {
                if !fa && !fb {
                    let n = match kind {
                        DriveKind::KnowledgeAcquisition => incomplete,
                        DriveKind::KnowledgeExpression => complete,
                    } as f64;
                    let want = (a - n * deltas[kind] * cfg.tick_length).max(0.0);
                    prop_assert!((b - want).abs() < 1e-9, "{:?}: {} -> {}, want {}", kind, a, b, want);
                }
            }
        }

        // Below threshold and unfrozen means something starts this tick.
        let started = fresh.iter().any(|r| {
            matches!(
                r.event,
                EventKind::BehaviorStarted { .. } | EventKind::PlanStarted { .. }
            )
        });
        for (kind, level, frozen) in &now {
            if !frozen && *level < cfg.drive_spec(*kind).threshold {
                prop_assert!(started, "{:?} at {} below threshold with nothing started", kind, level);
            }
        }
        prev = Some(now);

        let view = PolicyView {
            tick: e.tick(),
            tick_length: cfg.tick_length,
            world: e.world(),
            robot_idle: e.is_idle(),
            idle_since: e.idle_since(),
            pending_goals: e.has_pending_goals(),
            task_completed: e.task_completed(),
        };
        for input in p.poll(&view, &fresh) {
            e.submit(input);
        }
    }
    let episodes = e.abm().episodes().len();
    let log = e.into_log();
    check_log(&log, episodes, cfg)?;
    Ok(log)
}

/// Invariants readable from the log alone.
fn check_log(log: &EventLog, episodes: usize, cfg: &Config) -> Result<(), TestCaseError> {
    let mut open: Option<u64> = None;
    let mut finished = 0;
    let mut reset_pending: Option<(u64, DriveKind)> = None;
    for r in log.records() {
        match &r.event {
            EventKind::BehaviorStarted {
                activity, initiator, ..
            } => {
                prop_assert!(open.is_none(), "activity {} started while {:?} runs", activity, open);
                open = Some(*activity);
                if let proact_core::contextual::Initiator::RobotDrive(d) = initiator {
                    reset_pending = Some((r.tick + 1, *d));
                }
            }
            EventKind::PlanStarted { activity, .. } => {
                prop_assert!(open.is_none(), "plan {} started while {:?} runs", activity, open);
                open = Some(*activity);
            }
            EventKind::BehaviorFinished { activity, .. } | EventKind::PlanFinished { activity, .. } => {
                prop_assert_eq!(open, Some(*activity));
                open = None;
                finished += 1;
            }
            EventKind::DriveLevels { levels } => {
                if let Some((tick, d)) = reset_pending {
                    if r.tick == tick {
                        let l = levels.iter().find(|l| l.drive == d).expect("drive present");
                        prop_assert_eq!(l.level, cfg.drive_spec(d).default_level);
                        reset_pending = None;
                    }
                }
            }
            EventKind::ObjectMoved { from, to, .. } => match r.source {
                Source::Human => prop_assert!(
                    *from != Region::I && *to != Region::I,
                    "human moved {:?}->{:?}",
                    from,
                    to
                ),
                Source::Robot => prop_assert!(
                    *from != Region::H && *to != Region::H,
                    "robot moved {:?}->{:?}",
                    from,
                    to
                ),
                Source::World => {}
            },
            _ => {}
        }
    }
    prop_assert_eq!(finished, episodes, "one episode per finished activity");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn engine_invariants_hold(cfg in scenario()) {
        run_checked(&cfg)?;
    }

    #[test]
    fn replay_is_deterministic(cfg in scenario()) {
        let a = proact_core::harness::run(&cfg).unwrap().log;
        let b = proact_core::harness::run(&cfg).unwrap().log;
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn metrics_survive_reserialization(cfg in scenario()) {
        let log = proact_core::harness::run(&cfg).unwrap().log;
        let again = EventLog::from_jsonl(&log.to_jsonl()).unwrap();
        prop_assert_eq!(metrics(&log), metrics(&again));
    }
}

// ---------------------------------------------------------------------------
// World reach rules
// ---------------------------------------------------------------------------

fn primitive() -> impl Strategy<Value = RobotPrimitive> {
    prop_oneof![
        object().prop_map(RobotPrimitive::Push),
        object().prop_map(RobotPrimitive::Pull),
        object().prop_map(RobotPrimitive::PointAt),
        Just(RobotPrimitive::RaiseHand),
        Just(RobotPrimitive::Say("hello there".into())),
    ]
}

proptest! {
    #[test]
    fn world_stays_consistent(
        seed in any::<u64>(),
        p_fail in 0.0..0.5f64,
        actions in prop::collection::vec((any::<bool>(), human_input(), primitive()), 1..60),
    ) {
        let mut cfg = Config { seed, failure_probability: p_fail, ..Default::default() };
        cfg.body_parts = default_body_parts();
        let mut w = cfg.build_world();
        for (human, input, prim) in actions {
            let mut events = if human { w.step(vec![input]) } else { w.execute_primitive(prim) };
            for _ in 0..5 {
                events.extend(w.step(Vec::new()));
            }
            w.check_consistency().map_err(TestCaseError::fail)?;
            for (source, e) in events {
                if let EventKind::ObjectMoved { from, to, .. } = e {
                    match source {
                        Source::Human => prop_assert!(from != Region::I && to != Region::I),
                        Source::Robot => prop_assert!(from != Region::H && to != Region::H),
                        Source::World => {}
                    }
                }
            }
        }
    }

    #[test]
    fn saliency_bounded_and_decays(speeds in prop::collection::vec((0.0..2.0f64, any::<bool>()), 1..80), quiet in 1..40usize) {
        let p = SaliencyParams::default();
        let mut s = 0.0;
        for (v, pointed) in speeds {
            s = p.update(s, v, pointed, 0.1);
            prop_assert!((0.0..=1.0).contains(&s));
        }
        for _ in 0..quiet {
            let next = p.update(s, 0.0, false, 0.1);
            prop_assert!(next <= s && next >= 0.0);
            s = next;
        }
    }

    #[test]
    fn first_trigger_scales_inversely_with_delta(scale in 0.4..3.0f64) {
        let first = |delta: f64| {
            let mut cfg = Config::default();
            cfg.human.known = true;
            cfg.drives.acquisition.delta = Some(delta);
            let mut e = Engine::new(cfg).unwrap();
            (0..5000).find_map(|_| {
                e.step().iter().find_map(|r| matches!(r.event, EventKind::DriveTriggered { .. }).then_some(r.time_s))
            }).unwrap()
        };
        // Continuous crossing time (0.5 - 0.25) / (3 * delta), against the
        // tick-quantized trigger.
        let exact = |delta: f64| 0.25 / (3.0 * delta);
        prop_assert!((first(0.01) - exact(0.01)).abs() <= 0.1 + 1e-9);
        let scaled = first(0.01 * scale);
        prop_assert!((scaled - exact(0.01) / scale).abs() <= 0.1 + 1e-9, "{} vs {}", scaled, exact(0.01) / scale);
    }
}

// ---------------------------------------------------------------------------
// Narrative soundness
// ---------------------------------------------------------------------------

const LABELS: [&str; 5] = ["toy", "ball", "cube", "duck", "octopus"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn narration_mentions_only_story_objects(i in 0..LABELS.len(), give in any::<bool>(), start in region()) {
        let label = LABELS[i];
        let (order, goal) = if give { ("Give me the", GoalKind::Give) } else { ("Take the", GoalKind::Take) };
        let mut cfg = Config { ticks: 900, ..Default::default() };
        cfg.human.known = true;
        cfg.policy.kind = PolicyKind::Cooperative;
        cfg.objects = vec![proact_core::config::ObjectConfig {
            label: label.into(),
            region: start,
            known: true,
            ..proact_core::config::default_objects()[0].clone()
        }];
        cfg.policy.script = vec![ScriptEntry::at_tick(5, HumanInput::Speak { text: format!("{order} {label}.") })];
        let mut e = Engine::new(cfg.clone()).unwrap();
        let mut p = from_config(&cfg);
        proact_core::harness::drive(&mut e, p.as_mut(), cfg.ticks, Default::default());
        let ep = e.abm().episodes().iter().find(|ep| ep.goal.as_ref().is_some_and(|g| g.kind == goal)).unwrap();
        let g = build_igarf(&[ep]);
        for line in narrate(&g, &Inventory::standard(), &Grammar::default(), Detail::Full) {
            let words: BTreeSet<String> = line
                .split(|c: char| !c.is_alphanumeric())
                .map(str::to_lowercase)
                .collect();
            for other in LABELS.iter().filter(|l| **l != label) {
                prop_assert!(!words.contains(*other), "{:?} mentions {}", line, other);
            }
        }
    }
}
