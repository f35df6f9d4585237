//! Closed, bidirectional template grammar between sentences and PAOR frames.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Predicate with its thematic roles.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Paor {
    pub predicate: String,
    pub agent: Option<String>,
    pub object: Option<String>,
    pub recipient: Option<String>,
}

impl Paor {
    pub fn new(predicate: impl Into<String>) -> Self {
        Self {
            predicate: predicate.into(),
            agent: None,
            object: None,
            recipient: None,
        }
    }

    pub fn agent(mut self, a: impl Into<String>) -> Self {
        self.agent = Some(a.into());
        self
    }

    pub fn object(mut self, o: impl Into<String>) -> Self {
        self.object = Some(o.into());
        self
    }

    pub fn recipient(mut self, r: impl Into<String>) -> Self {
        self.recipient = Some(r.into());
        self
    }
}

impl fmt::Display for Paor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<String>| v.clone().unwrap_or_else(|| "\u{2205}".to_string());
        write!(
            f,
            "{{P:{}, A:{}, O:{}, R:{}}}",
            self.predicate,
            show(&self.agent),
            show(&self.object),
            show(&self.recipient)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotType {
    /// One or more words, captured verbatim.
    Word,
    Action,
    Hand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Literal(String),
    Slot(String),
}

impl Value {
    fn parse(s: &str) -> Self {
        match s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            Some(name) => Value::Slot(name.to_string()),
            None => Value::Literal(s.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
struct Frame {
    predicate: Value,
    agent: Option<Value>,
    object: Option<Value>,
    recipient: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub text: String,
    tokens: Vec<Token>,
    frame: Frame,
}

impl Template {
    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Slot(s) => Some(s.as_str()),
            Token::Literal(_) => None,
        })
    }
}

/// Slot name to canonical value.
pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed {
    pub template: String,
    pub meaning: Paor,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("utterance not covered by the grammar: {0:?}")]
    NoParse(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}`: slot `{slot}` is unbound")]
    UnboundSlot { template: String, slot: String },
    #[error("template `{template}`: `{value}` is not a valid {slot_type:?} value")]
    BadValue {
        template: String,
        slot_type: SlotType,
        value: String,
    },
    #[error("no template expresses {0}")]
    NoTemplateFor(String),
    #[error("grammar file: {0}")]
    File(String),
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarFile {
    slot_types: BTreeMap<String, SlotType>,
    #[serde(default)]
    lexicon: BTreeMap<String, BTreeMap<String, String>>,
    template: Vec<TemplateFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    id: String,
    text: String,
    meaning: FrameFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    predicate: String,
    agent: Option<String>,
    object: Option<String>,
    recipient: Option<String>,
}

// ---------------------------------------------------------------------------
// Grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Grammar {
    templates: Vec<Template>,
    slot_types: BTreeMap<String, SlotType>,
    /// Per closed slot type: canonical value to surface form.
    lexicon: BTreeMap<SlotType, BTreeMap<String, String>>,
}

pub const DEFAULT_GRAMMAR: &str = include_str!("../../assets/grammar.toml");

fn normalize(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '_')
        .to_lowercase()
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '_'))
        .filter(|w| !w.is_empty())
        .collect()
}

impl Default for Grammar {
    fn default() -> Self {
        Self::from_toml(DEFAULT_GRAMMAR).expect("shipped grammar is valid")
    }
}

impl Grammar {
    pub fn from_toml(source: &str) -> Result<Self, GrammarError> {
        let file: GrammarFile = toml::from_str(source).map_err(|e| GrammarError::File(e.to_string()))?;
        let mut lexicon = BTreeMap::new();
        for (name, entries) in file.lexicon {
            let ty = match name.as_str() {
                "action" => SlotType::Action,
                "hand" => SlotType::Hand,
                other => return Err(GrammarError::File(format!("lexicon for unknown closed type `{other}`"))),
            };
            lexicon.insert(ty, entries);
        }
        let mut templates = Vec::new();
        for t in file.template {
            let tokens: Vec<Token> = t
                .text
                .split_whitespace()
                .filter_map(|raw| {
                    let trimmed = raw.trim_matches(|c: char| matches!(c, '.' | ',' | '?' | '!'));
                    if let Some(name) = trimmed.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                        Some(Token::Slot(name.to_string()))
                    } else {
                        let w = normalize(trimmed);
                        (!w.is_empty()).then_some(Token::Literal(w))
                    }
                })
                .collect();
            for tok in &tokens {
                if let Token::Slot(s) = tok {
                    if !file.slot_types.contains_key(s) {
                        return Err(GrammarError::File(format!(
                            "template `{}`: undeclared slot `{s}`",
                            t.id
                        )));
                    }
                }
            }
            let frame = Frame {
                predicate: Value::parse(&t.meaning.predicate),
                agent: t.meaning.agent.as_deref().map(Value::parse),
                object: t.meaning.object.as_deref().map(Value::parse),
                recipient: t.meaning.recipient.as_deref().map(Value::parse),
            };
            if templates.iter().any(|x: &Template| x.id == t.id) {
                return Err(GrammarError::File(format!("duplicate template id `{}`", t.id)));
            }
            templates.push(Template {
                id: t.id,
                text: t.text,
                tokens,
                frame,
            });
        }
        Ok(Self {
            templates,
            slot_types: file.slot_types,
            lexicon,
        })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn slot_type(&self, slot: &str) -> Option<SlotType> {
        self.slot_types.get(slot).copied()
    }

    /// Canonical values accepted by a closed slot type.
    pub fn closed_values(&self, ty: SlotType) -> Vec<String> {
        self.lexicon
            .get(&ty)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn surface_to_canonical(&self, ty: SlotType, word: &str) -> Option<String> {
        let w = normalize(word);
        self.lexicon
            .get(&ty)?
            .iter()
            .find(|(_, surface)| surface.to_lowercase() == w)
            .map(|(canonical, _)| canonical.clone())
    }

    fn canonical_to_surface(&self, ty: SlotType, value: &str) -> Option<String> {
        match ty {
            SlotType::Word => Some(value.to_string()),
            closed => self.lexicon.get(&closed)?.get(value).cloned(),
        }
    }

    /// Case-insensitive parse; the first matching template wins.
    pub fn parse(&self, text: &str) -> Result<Parsed, GrammarError> {
        let input = words(text);
        for t in &self.templates {
            let mut bindings = Bindings::new();
            if self.match_tokens(&t.tokens, &input, &mut bindings) {
                let meaning = self.fill_frame(t, &bindings).expect("all slots bound after a match");
                return Ok(Parsed {
                    template: t.id.clone(),
                    meaning,
                    bindings,
                });
            }
        }
        Err(GrammarError::NoParse(text.to_string()))
    }

    fn match_tokens(&self, tokens: &[Token], input: &[&str], bindings: &mut Bindings) -> bool {
        let Some((first, rest)) = tokens.split_first() else {
            return input.is_empty();
        };
        match first {
            Token::Literal(lit) => match input.split_first() {
                Some((w, tail)) if normalize(w) == *lit => self.match_tokens(rest, tail, bindings),
                _ => false,
            },
            Token::Slot(name) => {
                let ty = self.slot_types[name];
                match ty {
                    SlotType::Word => {
                        for take in 1..=input.len() {
                            let value = input[..take].join(" ");
                            if let Some(existing) = bindings.get(name) {
                                if *existing != value {
                                    continue;
                                }
                            }
                            let mut trial = bindings.clone();
                            trial.insert(name.clone(), value);
                            if self.match_tokens(rest, &input[take..], &mut trial) {
                                *bindings = trial;
                                return true;
                            }
                        }
                        false
                    }
                    closed => match input.split_first() {
                        Some((w, tail)) => match self.surface_to_canonical(closed, w) {
                            Some(canonical) => {
                                bindings.insert(name.clone(), canonical);
                                self.match_tokens(rest, tail, bindings)
                            }
                            None => false,
                        },
                        None => false,
                    },
                }
            }
        }
    }

    fn fill_frame(&self, t: &Template, b: &Bindings) -> Result<Paor, GrammarError> {
        let get = |v: &Value| -> Result<String, GrammarError> {
            match v {
                Value::Literal(s) => Ok(s.clone()),
                Value::Slot(s) => b.get(s).cloned().ok_or_else(|| GrammarError::UnboundSlot {
                    template: t.id.clone(),
                    slot: s.clone(),
                }),
            }
        };
        Ok(Paor {
            predicate: get(&t.frame.predicate)?,
            agent: t.frame.agent.as_ref().map(get).transpose()?,
            object: t.frame.object.as_ref().map(get).transpose()?,
            recipient: t.frame.recipient.as_ref().map(get).transpose()?,
        })
    }

    /// Realize a template with canonical slot values.
    pub fn generate(&self, template: &str, bindings: &Bindings) -> Result<String, GrammarError> {
        let t = self
            .template(template)
            .ok_or_else(|| GrammarError::UnknownTemplate(template.to_string()))?;
        let mut out = t.text.clone();
        for slot in t.slots() {
            let value = bindings.get(slot).ok_or_else(|| GrammarError::UnboundSlot {
                template: t.id.clone(),
                slot: slot.to_string(),
            })?;
            let ty = self.slot_types[slot];
            let surface = self
                .canonical_to_surface(ty, value)
                .ok_or_else(|| GrammarError::BadValue {
                    template: t.id.clone(),
                    slot_type: ty,
                    value: value.clone(),
                })?;
            out = out.replace(&format!("{{{slot}}}"), &surface);
        }
        Ok(out)
    }

    /// Convenience for templates with at most one slot.
    pub fn say(&self, template: &str, pairs: &[(&str, &str)]) -> Result<String, GrammarError> {
        let b: Bindings = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.generate(template, &b)
    }

    /// Realize a meaning with the first template whose frame unifies with it.
    pub fn generate_meaning(&self, m: &Paor) -> Result<(String, String), GrammarError> {
        for t in &self.templates {
            if let Some(b) = self.unify(t, m) {
                if t.slots().all(|s| b.contains_key(s)) {
                    return Ok((t.id.clone(), self.generate(&t.id, &b)?));
                }
            }
        }
        Err(GrammarError::NoTemplateFor(m.to_string()))
    }

    fn unify(&self, t: &Template, m: &Paor) -> Option<Bindings> {
        let mut b = Bindings::new();
        let mut role = |pattern: Option<&Value>, value: Option<&String>| -> bool {
            match (pattern, value) {
                (None, None) => true,
                (Some(Value::Literal(l)), Some(v)) => l == v,
                (Some(Value::Slot(s)), Some(v)) => {
                    let ty = self.slot_types[s];
                    if ty != SlotType::Word && self.canonical_to_surface(ty, v).is_none() {
                        return false;
                    }
                    match b.get(s) {
                        Some(prev) => prev == v,
                        None => {
                            b.insert(s.clone(), v.clone());
                            true
                        }
                    }
                }
                _ => false,
            }
        };
        let ok = role(Some(&t.frame.predicate), Some(&m.predicate))
            && role(t.frame.agent.as_ref(), m.agent.as_ref())
            && role(t.frame.object.as_ref(), m.object.as_ref())
            && role(t.frame.recipient.as_ref(), m.recipient.as_ref());
        ok.then_some(b)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn b(pairs: &[(&str, &str)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn tag_reply_meaning() {
        let g = Grammar::default();
        let p = g.parse("This is the cube").unwrap();
        assert_eq!(p.meaning, Paor::new("is").agent("this").object("cube"));
        assert_eq!(p.meaning.to_string(), "{P:is, A:this, O:cube, R:\u{2205}}");
    }

    #[test]
    fn give_order_meaning() {
        let g = Grammar::default();
        let p = g.parse("Give me the octopus").unwrap();
        assert_eq!(
            p.meaning,
            Paor::new("give").agent("you").object("octopus").recipient("me")
        );
    }

    #[test]
    fn parse_is_case_insensitive_and_ignores_punctuation() {
        let g = Grammar::default();
        let p = g.parse("  tAKe   THE duck!! ").unwrap();
        assert_eq!(p.template, "order_take");
        assert_eq!(p.meaning.object.as_deref(), Some("duck"));
    }

    #[test]
    fn word_slots_span_several_words() {
        let g = Grammar::default();
        let p = g.parse("This is the blue cube.").unwrap();
        assert_eq!(p.meaning.object.as_deref(), Some("blue cube"));
    }

    #[test]
    fn out_of_grammar() {
        let g = Grammar::default();
        assert!(matches!(g.parse("flibber jab"), Err(GrammarError::NoParse(_))));
        assert!(g.parse("").is_err());
    }

    #[test]
    fn action_reply_uses_past_tense() {
        let g = Grammar::default();
        let s = g
            .generate(
                "action_reply",
                &b(&[("action", "push"), ("object", "cube"), ("hand", "left")]),
            )
            .unwrap();
        assert_eq!(s, "You pushed the cube with your left hand.");
        let p = g.parse(&s).unwrap();
        assert_eq!(
            p.meaning,
            Paor::new("push").agent("you").object("cube").recipient("left")
        );
    }

    #[test]
    fn tag_request_text() {
        let g = Grammar::default();
        assert_eq!(g.say("tag_request", &[]).unwrap(), "What is this object?");
        assert_eq!(g.say("agent_request", &[]).unwrap(), "I do not know you, who are you?");
        assert_eq!(
            g.say("touch_request", &[("name", "index")]).unwrap(),
            "Can you touch my index while I move it, please?"
        );
    }

    #[test]
    fn unbound_slot_is_an_error() {
        let g = Grammar::default();
        assert!(matches!(
            g.generate("tag_reply", &Bindings::new()),
            Err(GrammarError::UnboundSlot { .. })
        ));
        assert!(matches!(
            g.generate(
                "action_reply",
                &b(&[("action", "dance"), ("object", "cube"), ("hand", "left")])
            ),
            Err(GrammarError::BadValue { .. })
        ));
        assert!(matches!(
            g.generate("nope", &Bindings::new()),
            Err(GrammarError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn generate_from_meaning_picks_first_template() {
        let g = Grammar::default();
        let (id, text) = g
            .generate_meaning(&Paor::new("take").agent("you").object("cube"))
            .unwrap();
        assert_eq!(id, "order_take");
        assert_eq!(text, "Take the cube.");
        assert!(g.generate_meaning(&Paor::new("dance")).is_err());
    }

    #[test]
    fn grammar_file_errors_are_reported() {
        assert!(Grammar::from_toml("nonsense = [").is_err());
        let undeclared = r#"
            slot_types = {}
            [[template]]
            id = "x"
            text = "hello {who}"
            meaning = { predicate = "hello" }
        "#;
        assert!(matches!(Grammar::from_toml(undeclared), Err(GrammarError::File(_))));
    }
}
