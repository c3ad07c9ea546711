//! The closed intent label set and its per-class feature summaries.
//!
//! File format: UTF-8, one record per line, `name<TAB>summary` with the summary
//! optional. Lines starting with `#` and blank lines are skipped. Label order in
//! the file is the canonical id order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_TAXONOMY: &str = include_str!("../assets/taxonomy.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntentLabel {
    pub id: usize,
    pub name: String,
    pub group: String,
}

impl IntentLabel {
    /// Human-readable behaviour phrase: `Walk` → `walking`,
    /// `maintenance_shake.head` → `shake head`.
    pub fn display_name(&self) -> String {
        match self.name.split_once('_') {
            Some((_, rest)) => rest.replace(['_', '.'], " "),
            None => gerund(&self.name.to_lowercase()),
        }
    }
}

fn gerund(verb: &str) -> String {
    let chars: Vec<char> = verb.chars().collect();
    let is_vowel = |c: char| "aeiou".contains(c);
    let n = chars.len();
    if n >= 2 && chars[n - 1] == 'e' && chars[n - 2] != 'e' {
        return format!("{}ing", &verb[..verb.len() - 1]);
    }
    // consonant-vowel-consonant short verbs double the final consonant
    if n >= 3 && n <= 4 {
        let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
        if !is_vowel(a) && is_vowel(b) && !is_vowel(c) && !"wxy".contains(c) {
            return format!("{verb}{c}ing");
        }
    }
    format!("{verb}ing")
}

fn group_of(name: &str) -> String {
    match name.split_once('_') {
        Some((prefix, _)) => prefix.to_string(),
        None => "basic".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentTaxonomy {
    labels: Vec<IntentLabel>,
    summaries: Vec<String>,
    by_name: HashMap<String, usize>,
}

impl IntentTaxonomy {
    pub fn parse(source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, summary) = match line.split_once('\t') {
                Some((n, s)) => (n, s.trim()),
                None => (line, ""),
            };
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::MalformedEntry {
                    line: line_no,
                    reason: format!("label name `{name}` is empty or contains whitespace"),
                });
            }
            entries.push((name.to_string(), summary.to_string(), line_no));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn default_taxonomy() -> Self {
        Self::parse(DEFAULT_TAXONOMY).expect("shipped taxonomy is valid")
    }

    /// Builds a taxonomy from `(name, summary)` pairs in canonical order.
    pub fn from_pairs<S: AsRef<str>, T: AsRef<str>>(pairs: &[(S, T)]) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, (n, s)) in pairs.iter().enumerate() {
            let name = n.as_ref();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::MalformedEntry {
                    line: i + 1,
                    reason: format!("label name `{name}` is empty or contains whitespace"),
                });
            }
            entries.push((name.to_string(), s.as_ref().to_string(), i + 1));
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<(String, String, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        let mut labels = Vec::with_capacity(entries.len());
        let mut summaries = Vec::with_capacity(entries.len());
        let mut by_name = HashMap::new();
        for (name, summary, line) in entries {
            if name == "other" || name.contains("ambiguous") {
                return Err(Error::MalformedEntry {
                    line,
                    reason: format!("`{name}` is a discarded catch-all label"),
                });
            }
            if by_name.contains_key(&name) {
                return Err(Error::DuplicateLabel(name));
            }
            let id = labels.len();
            by_name.insert(name.clone(), id);
            labels.push(IntentLabel { id, group: group_of(&name), name });
            summaries.push(summary);
        }
        Ok(IntentTaxonomy { labels, summaries, by_name })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (l, s) in self.labels.iter().zip(&self.summaries) {
            if s.is_empty() {
                let _ = writeln!(out, "{}", l.name);
            } else {
                let _ = writeln!(out, "{}\t{}", l.name, s);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[IntentLabel] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> Option<&IntentLabel> {
        self.labels.get(id)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// Exact, case-sensitive lookup.
    pub fn parse_label(&self, name: &str) -> Result<&IntentLabel> {
        self.by_name
            .get(name)
            .map(|&i| &self.labels[i])
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn feature_summary(&self, label: &IntentLabel) -> Result<&str> {
        match self.by_name.get(&label.name) {
            Some(&i) if self.labels[i] == *label => Ok(&self.summaries[i]),
            _ => Err(Error::UnknownLabel(label.name.clone())),
        }
    }

    pub fn feature_summary_by_name(&self, name: &str) -> Result<&str> {
        let l = self.parse_label(name)?;
        Ok(&self.summaries[l.id])
    }

    /// Sub-taxonomy of the named labels, re-indexed in the given order.
    pub fn subset(&self, names: &[&str]) -> Result<Self> {
        let pairs = names
            .iter()
            .map(|n| Ok((n.to_string(), self.feature_summary_by_name(n)?.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(&pairs)
    }
}
