use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::notation::{Technique, TechniqueRegistry};
use crate::represent::{split_token, token_pitch_class};

/// Rules applied to every test set unless a file overrides them.
pub const DEFAULT_RULES: &str = "\
; rests never carry a technique
when rest forbid tk ft tr ua la po br
; a breath mark needs something to breathe after
when first forbid br
; sixteenths and shorter are too short to trill
when dur<1/4 forbid tr
";

/// A context test at one position of a token sequence. Every predicate is
/// defined at every position; neighbours past either end make `prev.`/`next.`
/// predicates false.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Always,
    First,
    Last,
    Rest,
    /// Same pitch as the previous note.
    Repeat,
    Token(String),
    PitchClass(String),
    Duration(String),
    DurationBelow(Rational64),
    DurationAbove(Rational64),
    Prev(Box<Predicate>),
    Next(Box<Predicate>),
    Not(Box<Predicate>),
    All(Vec<Predicate>),
}

/// Parses token duration text such as `1`, `0.5`, `1.5` or `1/3`.
pub fn parse_duration_text(s: &str) -> Option<Rational64> {
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (i64, i64) = (p.parse().ok()?, q.parse().ok()?);
        return (q > 0).then(|| Rational64::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let scale = 10i64.pow(frac.len() as u32);
    let numer = int.parse::<i64>().ok()?.checked_mul(scale)? + if frac.is_empty() { 0 } else { frac.parse::<i64>().ok()? };
    Some(Rational64::new(numer, scale))
}

fn is_rest(token: &str) -> bool {
    token.starts_with('R')
}

impl Predicate {
    pub fn holds(&self, tokens: &[String], i: usize) -> bool {
        let tok = tokens[i].as_str();
        match self {
            Predicate::Always => true,
            Predicate::First => i == 0,
            Predicate::Last => i + 1 == tokens.len(),
            Predicate::Rest => is_rest(tok),
            Predicate::Repeat => {
                i > 0 && !is_rest(tok) && !is_rest(&tokens[i - 1]) && split_token(tok).0 == split_token(&tokens[i - 1]).0
            }
            Predicate::Token(t) => tok == t,
            Predicate::PitchClass(pc) => token_pitch_class(tok) == pc,
            Predicate::Duration(d) => split_token(tok).1 == d,
            Predicate::DurationBelow(r) => parse_duration_text(split_token(tok).1).is_some_and(|d| d < *r),
            Predicate::DurationAbove(r) => parse_duration_text(split_token(tok).1).is_some_and(|d| d > *r),
            Predicate::Prev(p) => i > 0 && p.holds(tokens, i - 1),
            Predicate::Next(p) => i + 1 < tokens.len() && p.holds(tokens, i + 1),
            Predicate::Not(p) => !p.holds(tokens, i),
            Predicate::All(ps) => ps.iter().all(|p| p.holds(tokens, i)),
        }
    }

    fn parse_atom(word: &str, line: usize) -> Result<Self> {
        let err = |m: String| Error::Rule { line, message: m };
        if let Some(rest) = word.strip_prefix("prev.") {
            return Ok(Predicate::Prev(Box::new(Self::parse_atom(rest, line)?)));
        }
        if let Some(rest) = word.strip_prefix("next.") {
            return Ok(Predicate::Next(Box::new(Self::parse_atom(rest, line)?)));
        }
        let nonempty = |v: &str, what: &str| {
            if v.is_empty() {
                Err(err(format!("empty {what} in `{word}`")))
            } else {
                Ok(v.to_string())
            }
        };
        let duration = |v: &str| parse_duration_text(v).ok_or_else(|| err(format!("bad duration `{v}`")));
        Ok(match word {
            "always" => Predicate::Always,
            "first" => Predicate::First,
            "last" => Predicate::Last,
            "rest" => Predicate::Rest,
            "repeat" => Predicate::Repeat,
            _ => {
                if let Some(v) = word.strip_prefix("token=") {
                    Predicate::Token(nonempty(v, "token")?)
                } else if let Some(v) = word.strip_prefix("pc=") {
                    Predicate::PitchClass(nonempty(v, "pitch class")?)
                } else if let Some(v) = word.strip_prefix("dur=") {
                    Predicate::Duration(nonempty(v, "duration")?)
                } else if let Some(v) = word.strip_prefix("dur<") {
                    Predicate::DurationBelow(duration(v)?)
                } else if let Some(v) = word.strip_prefix("dur>") {
                    Predicate::DurationAbove(duration(v)?)
                } else {
                    return Err(err(format!("unknown predicate `{word}`")));
                }
            }
        })
    }

    /// `atom (and atom)*`, each atom optionally preceded by `not`.
    fn parse(words: &[&str], line: usize) -> Result<Self> {
        let err = |m: &str| Error::Rule {
            line,
            message: m.to_string(),
        };
        let mut terms = Vec::new();
        let mut i = 0;
        loop {
            let mut negate = false;
            while words.get(i) == Some(&"not") {
                negate = !negate;
                i += 1;
            }
            let word = words.get(i).ok_or_else(|| err("missing predicate"))?;
            let atom = Self::parse_atom(word, line)?;
            terms.push(if negate { Predicate::Not(Box::new(atom)) } else { atom });
            i += 1;
            match words.get(i) {
                None => break,
                Some(&"and") => i += 1,
                Some(w) => return Err(err(&format!("expected `and`, found `{w}`"))),
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Predicate::All(terms) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Forbid(Vec<Technique>),
    Boost(Technique, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub predicate: Predicate,
    pub effect: Effect,
}

/// Ordered decoding constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The built-in rules, checked against `tags`.
    pub fn default_rules(registry: &TechniqueRegistry) -> Self {
        Self::parse(DEFAULT_RULES, registry).expect("built-in rules are valid")
    }

    /// Forbids every technique except `None` on rests.
    pub fn rests_untagged(tags: &[Technique]) -> Self {
        RuleSet {
            rules: vec![Rule {
                predicate: Predicate::Rest,
                effect: Effect::Forbid(tags.iter().filter(|t| !t.is_none()).cloned().collect()),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }

    /// Parses the line-oriented rule format. `;` starts a comment. Technique
    /// codes resolve through `registry`; a forbid list naming every
    /// registered technique is rejected.
    pub fn parse(text: &str, registry: &TechniqueRegistry) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split(';').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |m: String| Error::Rule { line, message: m };
            let words: Vec<&str> = content.split_whitespace().collect();
            if words[0] != "when" {
                return Err(err("rule must start with `when`".into()));
            }
            let split = words
                .iter()
                .position(|w| *w == "forbid" || *w == "boost")
                .ok_or_else(|| err("expected `forbid` or `boost`".into()))?;
            let predicate = Predicate::parse(&words[1..split], line)?;
            let tag = |code: &str| {
                registry
                    .lookup(code)
                    .ok_or_else(|| err(format!("unknown technique `{code}`")))
            };
            let args = &words[split + 1..];
            let effect = if words[split] == "forbid" {
                if args.is_empty() {
                    return Err(err("forbid needs at least one technique".into()));
                }
                let mut tags: Vec<Technique> = args.iter().map(|c| tag(c)).collect::<Result<_>>()?;
                tags.dedup();
                if registry.techniques().iter().all(|t| tags.contains(t)) {
                    return Err(err("rule forbids every technique".into()));
                }
                Effect::Forbid(tags)
            } else {
                let [code, score] = args else {
                    return Err(err("expected `boost <technique> <score>`".into()));
                };
                let score: f64 = score
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite())
                    .ok_or_else(|| err(format!("bad score `{score}`")))?;
                Effect::Boost(tag(code)?, score)
            };
            rules.push(Rule { predicate, effect });
        }
        Ok(RuleSet { rules })
    }

    /// Adds each rule's effect to the per-position, per-tag score lattice.
    /// Techniques absent from `tags` are ignored.
    pub fn apply(&self, tokens: &[String], tags: &[Technique], scores: &mut [Vec<f64>]) -> Result<()> {
        for (i, row) in scores.iter_mut().enumerate() {
            for rule in &self.rules {
                if !rule.predicate.holds(tokens, i) {
                    continue;
                }
                match &rule.effect {
                    Effect::Forbid(list) => {
                        for t in list {
                            if let Some(y) = tags.iter().position(|x| x == t) {
                                row[y] = f64::NEG_INFINITY;
                            }
                        }
                    }
                    Effect::Boost(t, s) => {
                        if let Some(y) = tags.iter().position(|x| x == t) {
                            row[y] += s;
                        }
                    }
                }
            }
            if row.iter().all(|s| *s == f64::NEG_INFINITY) {
                return Err(Error::AllTagsForbidden(i));
            }
        }
        Ok(())
    }
}
