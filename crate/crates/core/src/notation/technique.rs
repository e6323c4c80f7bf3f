use std::fmt;

use crate::error::{Error, Result};

/// A per-note playing technique.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Technique {
    #[default]
    None,
    Tonguing,
    FlutterTonguing,
    Trill,
    UpperAcciaccatura,
    LowerAcciaccatura,
    Portamento,
    Breath,
    /// A technique added through [`TechniqueRegistry::register`].
    Custom(String),
}

const BUILTIN: [(Technique, &str); 8] = [
    (Technique::None, "none"),
    (Technique::Tonguing, "tk"),
    (Technique::FlutterTonguing, "ft"),
    (Technique::Trill, "tr"),
    (Technique::UpperAcciaccatura, "ua"),
    (Technique::LowerAcciaccatura, "la"),
    (Technique::Portamento, "po"),
    (Technique::Breath, "br"),
];

impl Technique {
    /// Short code used after `!` in scores, in lyrics, and in rule files.
    pub fn code(&self) -> &str {
        match self {
            Technique::Custom(code) => code,
            builtin => BUILTIN
                .iter()
                .find(|(t, _)| t == builtin)
                .map(|(_, c)| *c)
                .unwrap_or("none"),
        }
    }

    pub fn is_none(&self) -> bool {
        *self == Technique::None
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Ordered set of known techniques. Index 0 is always [`Technique::None`];
/// the order fixes tag indices for the tagger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueRegistry {
    entries: Vec<Technique>,
}

impl Default for TechniqueRegistry {
    fn default() -> Self {
        TechniqueRegistry {
            entries: BUILTIN.iter().map(|(t, _)| t.clone()).collect(),
        }
    }
}

impl TechniqueRegistry {
    /// Adds a custom technique code (lowercase ASCII letters and digits).
    pub fn register(&mut self, code: &str) -> Result<Technique> {
        if code.is_empty()
            || !code
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        {
            return Err(Error::Config(format!("invalid technique code `{code}`")));
        }
        if self.lookup(code).is_some() {
            return Err(Error::Config(format!("technique `{code}` already registered")));
        }
        let t = Technique::Custom(code.to_string());
        self.entries.push(t.clone());
        Ok(t)
    }

    pub fn lookup(&self, code: &str) -> Option<Technique> {
        self.entries.iter().find(|t| t.code() == code).cloned()
    }

    pub fn techniques(&self) -> &[Technique] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
