//! A corpus is a directory of `.jp` files, one song each, with the school
//! taken from each file's header.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::notation::{parse_score, School, Score};

/// Parsed songs in file-name order, plus files that failed to read or parse.
#[derive(Debug, Default)]
pub struct Corpus {
    pub songs: Vec<(PathBuf, Score)>,
    pub failures: Vec<(PathBuf, Error)>,
}

impl Corpus {
    /// Reads every `*.jp` file directly inside `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jp"))
            .collect();
        paths.sort();
        let mut corpus = Corpus::default();
        for p in paths {
            match std::fs::read_to_string(&p).map_err(Error::from).and_then(|s| parse_score(&s).map_err(Error::from)) {
                Ok(score) => corpus.songs.push((p, score)),
                Err(e) => corpus.failures.push((p, e)),
            }
        }
        Ok(corpus)
    }

    /// Like [`Corpus::load`] but the first failure is an error naming the file.
    pub fn load_strict(dir: &Path) -> Result<Self> {
        let corpus = Self::load(dir)?;
        if let Some((p, e)) = corpus.failures.first() {
            return Err(Error::Config(format!("{}: {e}", p.display())));
        }
        Ok(corpus)
    }

    pub fn scores(&self) -> impl Iterator<Item = &Score> {
        self.songs.iter().map(|(_, s)| s)
    }

    pub fn stats(&self) -> CorpusStats {
        let mut st = CorpusStats::default();
        for s in self.scores() {
            st.songs += 1;
            let n = s.note_count();
            st.notes += n;
            let school = st.schools.entry(s.school.as_str().to_string()).or_default();
            school.songs += 1;
            school.notes += n;
            for note in s.notes().filter(|n| !n.technique.is_none()) {
                *school.techniques.entry(note.technique.code().to_string()).or_default() += 1;
            }
        }
        st.failures = self
            .failures
            .iter()
            .map(|(p, e)| format!("{}: {e}", p.display()))
            .collect();
        st
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SchoolStats {
    pub songs: usize,
    /// Notes and rests.
    pub notes: usize,
    pub techniques: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub songs: usize,
    pub notes: usize,
    pub schools: BTreeMap<String, SchoolStats>,
    pub failures: Vec<String>,
}

impl CorpusStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "songs: {}   notes: {}", self.songs, self.notes);
        for (name, s) in &self.schools {
            let _ = writeln!(out, "{name:<6}  songs {:>4}  notes {:>7}", s.songs, s.notes);
            for (code, c) in &s.techniques {
                let _ = writeln!(out, "        {code:<6} {c:>7}");
            }
        }
        for f in &self.failures {
            let _ = writeln!(out, "error: {f}");
        }
        out
    }
}

/// Songs whose school is north or south; others cannot train a classifier.
pub fn labelled(scores: &[Score]) -> Vec<&Score> {
    scores.iter().filter(|s| s.school != School::Other).collect()
}
