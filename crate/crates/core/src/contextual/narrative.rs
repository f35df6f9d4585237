//! Narrative generation from a story graph, and learning of discourse
//! constructions from a partner's narration of a known story.

use serde::{Deserialize, Serialize};

use super::abm::EpisodeRecord;
use super::igarf::{relation_meaning, EdgeKind, Igarf, IgarfNode, NodeKind};
use super::relation::Relation;
use super::Initiator;
use crate::adaptive::{Bindings, Grammar, Paor};
use crate::reactive::DriveKind;

/// Where a discourse function word attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "slot", content = "edge", rename_all = "snake_case")]
pub enum Slot {
    /// Before the goal and initial-state sentences.
    Opening,
    /// Before an action that follows another one.
    Sequence,
    /// Before the last action.
    Closing,
    /// Before the final-state sentence.
    Present,
    /// `DFW <cause>, <effect>`.
    Prefix(EdgeKind),
    /// `<effect> DFW <cause>`.
    Infix(EdgeKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Construction {
    pub slot: Slot,
    pub dfw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    #[serde(default, rename = "construction")]
    pub constructions: Vec<Construction>,
}

impl Inventory {
    /// The constructions of the reference narrative shipped with the robot.
    pub fn standard() -> Self {
        let mut inv = Self::default();
        for (slot, w) in [
            (Slot::Opening, "first"),
            (Slot::Sequence, "then"),
            (Slot::Closing, "finally"),
            (Slot::Present, "now"),
            (Slot::Prefix(EdgeKind::Recovery), "after"),
            (Slot::Prefix(EdgeKind::Motivation), "because"),
            (Slot::Infix(EdgeKind::Effect), "because"),
            (Slot::Infix(EdgeKind::Motivation), "because"),
        ] {
            inv.insert(slot, w);
        }
        inv
    }

    pub fn insert(&mut self, slot: Slot, dfw: &str) {
        let dfw = dfw.to_lowercase();
        match self.constructions.iter_mut().find(|c| c.slot == slot) {
            Some(c) => c.dfw = dfw,
            None => self.constructions.push(Construction { slot, dfw }),
        }
    }

    pub fn word(&self, slot: Slot) -> Option<&str> {
        self.constructions
            .iter()
            .find(|c| c.slot == slot)
            .map(|c| c.dfw.as_str())
    }

    pub fn merge(&mut self, other: &Inventory) {
        for c in &other.constructions {
            self.insert(c.slot, &c.dfw);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.constructions.is_empty()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("inventory serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detail {
    /// Only the timeline.
    Summary,
    /// Timeline plus causal explanations.
    Full,
}

// ---------------------------------------------------------------------------
// Clause realization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Full,
    Short,
    Pronoun,
    /// Full clause with the object before the recipient.
    Explained,
}

fn template_for(r: &Relation, form: Form) -> &'static str {
    use Form::*;
    match (r.subject.as_str(), r.verb.as_str(), form) {
        (_, "want_get", Pronoun) | (_, "want_give", Pronoun) | (_, "want_show", Pronoun) => "narr_want_it",
        (_, "want_know", Pronoun) | (_, "want_tell", Pronoun) => "narr_want_it",
        (_, "want_get", _) => "narr_want_get",
        (_, "want_give", _) => "narr_want_give",
        (_, "want_show", _) => "narr_want_show",
        (_, "want_know", _) => "narr_want_know",
        (_, "want_tell", _) => "narr_want_tell",
        (_, "want_answer", _) => "narr_want_answer",
        ("i", "have", _) => "narr_i_have",
        ("you", "have", _) => "narr_you_have",
        (_, "is_in", _) => "narr_in_shared",
        (_, "know", _) => "narr_i_know",
        (_, "fail_grasp", Pronoun) => "narr_fail_grasp_it",
        (_, "fail_grasp", Short) => "narr_fail_grasp_short",
        (_, "fail_grasp", _) => "narr_fail_grasp",
        (_, "fail_push", Pronoun) => "narr_fail_push_it",
        (_, "fail_push", Short) => "narr_fail_push_short",
        (_, "fail_push", _) => "narr_fail_push",
        (_, "pull", Pronoun) => "narr_pulled_it",
        (_, "pull", _) => "narr_pulled",
        (_, "push", Pronoun) => "narr_pushed_it",
        (_, "push", _) => "narr_pushed",
        (_, "reason", _) => "narr_reasoned",
        (_, "ask_for", Pronoun) => "narr_ask_for_it",
        (_, "ask_for", _) => "narr_ask_for",
        (_, "ask_take", Pronoun) => "narr_ask_take_it",
        (_, "ask_take", _) => "narr_ask_take",
        (_, "ask_point", _) => "narr_ask_point",
        (_, "ask_name", _) => "narr_ask_name",
        (_, "ask_touch", _) => "narr_ask_touch",
        ("you", "give", Pronoun) => "narr_gave_it",
        ("you", "give", Explained) => "narr_gave_to_me",
        ("you", "give", _) => "narr_gave_me",
        ("you", "take", Pronoun) => "narr_took_it",
        ("you", "take", _) => "narr_took",
        ("you", "point", _) => "narr_pointed_you",
        ("you", "tell", _) => "narr_told",
        ("you", "touch", _) => "narr_touched",
        ("i", "point", _) => "narr_pointed",
        ("i", "tell", Pronoun) => "narr_said_it",
        ("i", "tell", _) => "narr_said",
        _ => "narr_answered",
    }
}

fn clause(grammar: &Grammar, r: &Relation, form: Form) -> String {
    let id = template_for(r, form);
    let mut b = Bindings::new();
    let object = match r.verb.as_str() {
        "is_in" => Some(r.subject.clone()),
        _ => r.object.clone(),
    };
    if let Some(o) = object {
        b.insert("object".into(), o);
    }
    grammar
        .generate(id, &b)
        .unwrap_or_else(|e| panic!("narration template {id} failed for {r}: {e}"))
}

fn sentence(parts: &[&str]) -> String {
    let mut s = parts.join(" ");
    if let Some(first) = s.get(0..1) {
        let upper = first.to_uppercase();
        s.replace_range(0..1, &upper);
    }
    s.push('.');
    s
}

fn with_dfw(dfw: Option<&str>, clause: &str) -> String {
    match dfw {
        Some(w) => sentence(&[w, clause]),
        None => sentence(&[clause]),
    }
}

/// One generated sentence and the graph elements it expresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeLine {
    pub text: String,
    pub nodes: Vec<usize>,
    pub dfw: Option<String>,
}

pub fn narrate_lines(g: &Igarf, inv: &Inventory, grammar: &Grammar, detail: Detail) -> Vec<NarrativeLine> {
    let mut out = Vec::new();
    let line = |text: String, nodes: Vec<usize>, dfw: Option<&str>| NarrativeLine {
        text,
        nodes,
        dfw: dfw.map(String::from),
    };
    let actions = g.actions();
    let opening = inv.word(Slot::Opening);
    let goal = g.goal();
    if !actions.is_empty() {
        out.push(line(
            with_dfw(opening, &clause(grammar, &goal.relation, Form::Full)),
            vec![goal.id],
            opening,
        ));
    }
    for n in g.of_kind(NodeKind::Initial) {
        out.push(line(
            with_dfw(opening, &clause(grammar, &n.relation, Form::Full)),
            vec![n.id],
            opening,
        ));
    }
    for (i, n) in actions.iter().enumerate() {
        let cause = g.edges_into(n.id).find_map(|e| {
            let src = g.node(e.from);
            let w = inv.word(Slot::Prefix(e.kind))?;
            (src.kind == NodeKind::Action && e.kind != EdgeKind::Sequence).then_some((src, w))
        });
        match cause {
            Some((src, w)) => {
                let text = sentence(&[
                    &format!("{w} {},", clause(grammar, &src.relation, Form::Short)),
                    &clause(grammar, &n.relation, Form::Full),
                ]);
                out.push(line(text, vec![src.id, n.id], Some(w)));
            }
            None => {
                let slot = if i + 1 == actions.len() && i > 0 {
                    Slot::Closing
                } else if i == 0 && inv.word(Slot::Sequence).is_none() {
                    Slot::Opening
                } else {
                    Slot::Sequence
                };
                let w = inv.word(slot);
                out.push(line(
                    with_dfw(w, &clause(grammar, &n.relation, Form::Full)),
                    vec![n.id],
                    w,
                ));
            }
        }
    }
    let present = inv.word(Slot::Present);
    for n in g.of_kind(NodeKind::Final) {
        out.push(line(
            with_dfw(present, &clause(grammar, &n.relation, Form::Full)),
            vec![n.id],
            present,
        ));
    }
    let effect_word = inv
        .word(Slot::Infix(EdgeKind::Effect))
        .filter(|_| detail == Detail::Full);
    for r in g.of_kind(NodeKind::Result) {
        let cause = g
            .edges_into(r.id)
            .find(|e| e.kind == EdgeKind::Effect)
            .map(|e| g.node(e.from));
        match (cause, effect_word) {
            (Some(c), Some(w)) => {
                let text = sentence(&[
                    &clause(grammar, &r.relation, Form::Full),
                    w,
                    &clause(grammar, &c.relation, Form::Pronoun),
                ]);
                out.push(line(text, vec![r.id, c.id], Some(w)));
            }
            _ => {
                let covered = out.iter().any(|l: &NarrativeLine| {
                    l.nodes
                        .iter()
                        .any(|id| g.node(*id).kind == NodeKind::Final && g.node(*id).relation.same_fact(&r.relation))
                });
                let text = clause(grammar, &r.relation, Form::Full);
                if !covered || detail == Detail::Full {
                    out.push(line(sentence(&[&text]), vec![r.id], None));
                }
            }
        }
    }
    if let Some(w) = inv
        .word(Slot::Infix(EdgeKind::Motivation))
        .filter(|_| detail == Detail::Full)
    {
        for e in g
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Motivation && e.from == goal.id)
        {
            let a = g.node(e.to);
            let text = sentence(&[
                &clause(grammar, &a.relation, Form::Explained),
                w,
                &clause(grammar, &goal.relation, Form::Pronoun),
            ]);
            out.push(line(text, vec![a.id, goal.id], Some(w)));
        }
    }
    out
}

pub fn narrate(g: &Igarf, inv: &Inventory, grammar: &Grammar, detail: Detail) -> Vec<String> {
    narrate_lines(g, inv, grammar, detail)
        .into_iter()
        .map(|l| l.text)
        .collect()
}

/// Answer "why" for the last robot action of a story from the drive levels
/// and goal stored at the start of its episode.
pub fn why_answer(g: &Igarf, episode: &EpisodeRecord, grammar: &Grammar) -> String {
    let act = g
        .actions()
        .into_iter()
        .rev()
        .find(|n| n.relation.subject == "i")
        .map(|n| clause(grammar, &n.relation, Form::Full))
        .unwrap_or_else(|| "I did it".to_string());
    let reason = match (episode.initiator, &episode.pre.goal) {
        (Initiator::HumanOrder, Some(_)) => clause(grammar, &g.goal().relation, Form::Pronoun),
        (Initiator::RobotDrive(d), _) => {
            let name = match d {
                DriveKind::KnowledgeAcquisition => "knowledge acquisition",
                DriveKind::KnowledgeExpression => "knowledge expression",
            };
            grammar
                .say("narr_drive_low", &[("drive", name)])
                .expect("shipped narration template")
        }
        _ => clause(grammar, &g.goal().relation, Form::Full),
    };
    sentence(&[&act, "because", &reason])
}

// ---------------------------------------------------------------------------
// Construction learning
// ---------------------------------------------------------------------------

pub const DFW_CANDIDATES: [&str; 12] = [
    "first", "then", "after", "because", "finally", "now", "next", "later", "so", "before", "when", "since",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Learned {
    pub inventory: Inventory,
    pub skipped: Vec<String>,
}

fn node_forms(n: &IgarfNode) -> Vec<Form> {
    vec![Form::Full, Form::Short, Form::Pronoun, Form::Explained]
        .into_iter()
        .filter(|f| *f == Form::Full || template_for(&n.relation, *f) != template_for(&n.relation, Form::Full))
        .collect()
}

fn align(g: &Igarf, grammar: &Grammar, text: &str) -> Vec<usize> {
    let Ok(parsed) = grammar.parse(text) else {
        return Vec::new();
    };
    let meaning: Paor = parsed.meaning;
    g.nodes
        .iter()
        .filter(|n| {
            node_forms(n).into_iter().any(|f| {
                let generated = clause(grammar, &n.relation, f);
                grammar.parse(&generated).is_ok_and(|p| p.meaning == meaning)
            }) || relation_meaning(&n.relation) == meaning
        })
        .map(|n| n.id)
        .collect()
}

fn edge_kind(g: &Igarf, from: &[usize], to: &[usize]) -> Option<EdgeKind> {
    let mut best = None;
    for e in &g.edges {
        if from.contains(&e.from) && to.contains(&e.to) {
            if e.kind != EdgeKind::Sequence {
                return Some(e.kind);
            }
            best = Some(e.kind);
        }
    }
    best
}

/// Align each narration sentence to the story and record which discourse
/// word the partner used for which part of the story.
pub fn learn_constructions(sentences: &[&str], g: &Igarf, grammar: &Grammar) -> Learned {
    let mut learned = Learned::default();
    let actions: Vec<usize> = g.actions().iter().map(|n| n.id).collect();
    for raw in sentences {
        let text = raw.trim().trim_end_matches(['.', '!', '?']).trim();
        let words: Vec<&str> = text.split_whitespace().collect();
        let Some(first) = words.first() else { continue };
        let lower = |w: &str| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        let mut skip = |why: &str| learned.skipped.push(format!("{raw}: {why}"));
        if DFW_CANDIDATES.contains(&lower(first).as_str()) {
            let dfw = lower(first);
            let rest = words[1..].join(" ");
            if let Some((a, b)) = rest.split_once(',') {
                let (na, nb) = (align(g, grammar, a.trim()), align(g, grammar, b.trim()));
                if na.is_empty() || nb.is_empty() {
                    skip("clause does not match the story");
                    continue;
                }
                match edge_kind(g, &na, &nb) {
                    Some(kind) if kind != EdgeKind::Sequence => learned.inventory.insert(Slot::Prefix(kind), &dfw),
                    _ => skip("no causal link between the clauses"),
                }
            } else {
                let nodes = align(g, grammar, &rest);
                if nodes.is_empty() {
                    skip("clause does not match the story");
                    continue;
                }
                let kinds: Vec<NodeKind> = nodes.iter().map(|id| g.node(*id).kind).collect();
                let slot = if kinds.iter().any(|k| matches!(k, NodeKind::Goal | NodeKind::Initial)) {
                    Slot::Opening
                } else if kinds.contains(&NodeKind::Final) {
                    Slot::Present
                } else if nodes.iter().any(|id| actions.last() == Some(id) && actions.len() > 1) {
                    Slot::Closing
                } else if kinds.contains(&NodeKind::Action) {
                    Slot::Sequence
                } else {
                    Slot::Present
                };
                learned.inventory.insert(slot, &dfw);
            }
            continue;
        }
        let infix = words
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, w)| DFW_CANDIDATES.contains(&lower(w).as_str()));
        if let Some((i, w)) = infix {
            let dfw = lower(w);
            let (a, b) = (words[..i].join(" "), words[i + 1..].join(" "));
            let (na, nb) = (align(g, grammar, &a), align(g, grammar, &b));
            if na.is_empty() || nb.is_empty() {
                skip("clause does not match the story");
                continue;
            }
            match edge_kind(g, &nb, &na) {
                Some(kind) if kind != EdgeKind::Sequence => learned.inventory.insert(Slot::Infix(kind), &dfw),
                _ => skip("no causal link between the clauses"),
            }
        }
    }
    learned
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::{Entity, EntityKind, Payload};
    use crate::contextual::abm::{EpisodeRecord, Snapshot};
    use crate::contextual::build_igarf;
    use crate::contextual::{ActivityOutcome, Goal, StepKind};
    use crate::log::{EventKind, LogRecord, Source};
    use crate::reactive::BehaviorKind;
    use crate::world::{Region, RobotPrimitive};

    fn snap(label: &str, region: Region) -> Snapshot {
        Snapshot {
            tick: 0,
            time_s: 0.0,
            opc: vec![Entity {
                id: "obj_1".into(),
                kind: EntityKind::Object,
                label: Some(label.into()),
                present: true,
                saliency: 0.0,
                payload: Payload::Object {
                    object: "obj_1".into(),
                    region,
                    position: [0.6, 0.45],
                    dimensions: [0.1, 0.1],
                },
            }],
            drives: Vec::new(),
            goal: Some(Goal::take(label)),
        }
    }

    fn story(label: &str) -> EpisodeRecord {
        let ev = |seq: u64, source, event| LogRecord {
            seq,
            tick: seq,
            time_s: seq as f64,
            source,
            event,
        };
        EpisodeRecord {
            id: 0,
            session: "s".into(),
            activity: 0,
            start_tick: 0,
            end_tick: 10,
            start_s: 0.0,
            end_s: 1.0,
            behavior: BehaviorKind::MoveObject,
            goal: Some(Goal::take(label)),
            target: Some("obj_1".into()),
            initiator: Initiator::HumanOrder,
            outcome: ActivityOutcome::Success,
            pre: snap(label, Region::S),
            post: snap(label, Region::I),
            stream: Vec::new(),
            events: vec![
                ev(
                    0,
                    Source::Human,
                    EventKind::ObjectMoved {
                        object: "obj_1".into(),
                        from: Region::S,
                        to: Region::H,
                    },
                ),
                ev(
                    1,
                    Source::Robot,
                    EventKind::PrimitiveFinished {
                        primitive: RobotPrimitive::Pull("obj_1".into()),
                        success: false,
                    },
                ),
                ev(
                    2,
                    Source::Robot,
                    EventKind::PlanReplanned {
                        activity: 0,
                        from: Region::H,
                        actions: Vec::new(),
                    },
                ),
                ev(
                    3,
                    Source::Robot,
                    EventKind::PlanStepStarted {
                        activity: 0,
                        step: StepKind::AskPush,
                        attempt: 1,
                    },
                ),
                ev(
                    4,
                    Source::Human,
                    EventKind::ObjectMoved {
                        object: "obj_1".into(),
                        from: Region::H,
                        to: Region::S,
                    },
                ),
                ev(
                    5,
                    Source::Robot,
                    EventKind::PrimitiveFinished {
                        primitive: RobotPrimitive::Pull("obj_1".into()),
                        success: true,
                    },
                ),
            ],
        }
    }

    #[test]
    fn standard_narrative_of_toy_story() {
        let g = Grammar::default();
        let ep = story("toy");
        let lines = narrate(&build_igarf(&[&ep]), &Inventory::standard(), &g, Detail::Full);
        assert_eq!(
            lines,
            [
                "First I wanted to get the toy.",
                "First the toy is in the shared area.",
                "Then you took the toy.",
                "Then I fail to grasp the toy.",
                "After I fail to grasp, I reasoned.",
                "Because I reasoned, I ask for the toy to you.",
                "Then you gave me the toy.",
                "Finally I pulled the toy.",
                "Now I have the toy.",
                "I have the toy because you gave it to me.",
                "You gave the toy to me because I wanted it.",
            ]
        );
    }

    #[test]
    fn why_cites_the_want() {
        let g = Grammar::default();
        let ep = story("toy");
        let answer = why_answer(&build_igarf(&[&ep]), &ep, &g);
        assert_eq!(answer, "I pulled the toy because I wanted it.");
    }

    #[test]
    fn learn_from_reference_and_transfer() {
        let g = Grammar::default();
        let a = story("toy");
        let ga = build_igarf(&[&a]);
        let narration = narrate(&ga, &Inventory::standard(), &g, Detail::Full);
        let refs: Vec<&str> = narration.iter().map(String::as_str).collect();
        let learned = learn_constructions(&refs, &ga, &g);
        assert!(learned.skipped.is_empty(), "{:?}", learned.skipped);
        let mut want = Inventory::standard().constructions;
        let mut got = learned.inventory.constructions.clone();
        want.sort_by_key(|c| format!("{:?}", c.slot));
        got.sort_by_key(|c| format!("{:?}", c.slot));
        assert_eq!(got, want);

        let b = story("ball");
        let gb = build_igarf(&[&b]);
        assert_eq!(
            narrate(&gb, &learned.inventory, &g, Detail::Full),
            narrate(&gb, &Inventory::standard(), &g, Detail::Full)
        );
    }

    #[test]
    fn custom_words_are_learned() {
        let g = Grammar::default();
        let a = story("toy");
        let ga = build_igarf(&[&a]);
        let learned = learn_constructions(
            &[
                "Later I fail to grasp the toy.",
                "Since I reasoned, I ask for the toy to you.",
                "I like bananas.",
            ],
            &ga,
            &g,
        );
        assert_eq!(learned.inventory.word(Slot::Sequence), Some("later"));
        assert_eq!(
            learned.inventory.word(Slot::Prefix(EdgeKind::Motivation)),
            Some("since")
        );
        assert!(learned.skipped.is_empty(), "no DFW means no delta and no warning");
    }

    #[test]
    fn no_dfw_gives_empty_delta() {
        let g = Grammar::default();
        let a = story("toy");
        let learned = learn_constructions(&["I pulled the toy."], &build_igarf(&[&a]), &g);
        assert!(learned.inventory.is_empty());
    }

    #[test]
    fn degenerate_story() {
        let g = Grammar::default();
        let mut ep = story("toy");
        ep.events.clear();
        ep.post = ep.pre.clone();
        let lines = narrate(&build_igarf(&[&ep]), &Inventory::standard(), &g, Detail::Full);
        assert_eq!(
            lines,
            [
                "First the toy is in the shared area.",
                "Now the toy is in the shared area."
            ]
        );
    }

    #[test]
    fn inventory_toml_round_trip() {
        let inv = Inventory::standard();
        assert_eq!(Inventory::from_toml(&inv.to_toml()).unwrap(), inv);
    }
}
