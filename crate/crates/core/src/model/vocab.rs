//! Character + word vocabulary with greedy longest-match tokenization and the
//! time-series control-token surgery.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

pub const PAD: &str = "<|pad|>";
pub const EOT: &str = "<|endoftext|>";
pub const UNK: &str = "<|unk|>";
pub const VIS_START: &str = "<|vis_start|>";
pub const VIS_UNIT: &str = "<|vis_unit|>";
pub const VIS_END: &str = "<|vis_end|>";
pub const AUD_START: &str = "<|aud_start|>";
pub const AUD_UNIT: &str = "<|aud_unit|>";
pub const AUD_END: &str = "<|aud_end|>";
pub const TS_START: &str = "<|ts_start|>";
pub const TS_UNIT: &str = "<|ts_unit|>";
pub const TS_END: &str = "<|ts_end|>";

pub const SPECIALS: [&str; 9] = [PAD, EOT, UNK, VIS_START, VIS_UNIT, VIS_END, AUD_START, AUD_UNIT, AUD_END];
pub const TS_CONTROLS: [&str; 3] = [TS_START, TS_UNIT, TS_END];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerIds {
    pub start: usize,
    pub unit: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    base_size: usize,
    max_token_bytes: usize,
}

impl Vocab {
    /// Base vocabulary: special tokens, newline, tab and printable ASCII, then
    /// each word both bare and with a leading space.
    pub fn base<S: AsRef<str>>(words: &[S]) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.push("\n".into());
        tokens.push("\t".into());
        tokens.extend((32u8..127).map(|b| (b as char).to_string()));
        for w in words {
            let w = w.as_ref();
            tokens.push(w.to_string());
            tokens.push(format!(" {w}"));
        }
        let mut seen = std::collections::HashSet::new();
        tokens.retain(|t| !t.is_empty() && seen.insert(t.clone()));
        Self::from_tokens(tokens, None).expect("base tokens are unique")
    }

    /// Builds a vocabulary from an ordered token list. When `base_size` is
    /// absent it is inferred: tokens before a trailing control triple.
    pub fn from_tokens(tokens: Vec<String>, base_size: Option<usize>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Checkpoint(format!("empty token at id {i}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate token `{}`", escape(t))));
            }
        }
        let n = tokens.len();
        let inferred = if n >= 3 && tokens[n - 3..].iter().zip(TS_CONTROLS).all(|(a, b)| a == b) { n - 3 } else { n };
        let max_token_bytes = tokens.iter().map(String::len).max().unwrap_or(1);
        Ok(Vocab { tokens, index, base_size: base_size.unwrap_or(inferred), max_token_bytes })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn eot(&self) -> usize {
        self.index[EOT]
    }

    pub fn pad(&self) -> usize {
        self.index[PAD]
    }

    pub fn ts_ids(&self) -> Option<MarkerIds> {
        self.markers(TS_START, TS_UNIT, TS_END)
    }

    pub fn vision_ids(&self) -> Option<MarkerIds> {
        self.markers(VIS_START, VIS_UNIT, VIS_END)
    }

    pub fn audio_ids(&self) -> Option<MarkerIds> {
        self.markers(AUD_START, AUD_UNIT, AUD_END)
    }

    fn markers(&self, s: &str, u: &str, e: &str) -> Option<MarkerIds> {
        Some(MarkerIds { start: self.id(s)?, unit: self.id(u)?, end: self.id(e)? })
    }

    /// Ids of the option letters `A`..`D`.
    pub fn letter_ids(&self) -> [usize; 4] {
        ["A", "B", "C", "D"].map(|l| self.index[l])
    }

    /// Greedy longest-match encoding; characters outside the vocabulary map to
    /// the unknown token.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        let mut i = 0;
        while i < text.len() {
            let mut matched = None;
            let mut len = self.max_token_bytes.min(text.len() - i);
            while len > 0 {
                if text.is_char_boundary(i + len) {
                    if let Some(&id) = self.index.get(&text[i..i + len]) {
                        matched = Some((id, len));
                        break;
                    }
                }
                len -= 1;
            }
            match matched {
                Some((id, len)) => {
                    ids.push(id);
                    i += len;
                }
                None => {
                    ids.push(self.index[UNK]);
                    i += text[i..].chars().next().map_or(1, char::len_utf8);
                }
            }
        }
        ids
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK)).collect()
    }

    /// One token per line, id = line number; `\`, newline and tab are escaped.
    pub fn to_file_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            let _ = writeln!(out, "{}", escape(t));
        }
        out
    }

    pub fn parse_file_text(text: &str) -> Result<Self> {
        let tokens = text.lines().map(unescape).collect::<Result<Vec<_>>>()?;
        Self::from_tokens(tokens, None)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_file_text(&std::fs::read_to_string(path)?)
    }
}

fn escape(t: &str) -> String {
    t.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t")
}

fn unescape(line: &str) -> Result<String> {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            other => return Err(Error::Checkpoint(format!("bad escape `\\{}` in vocab file", other.unwrap_or(' ')))),
        }
    }
    Ok(out)
}

/// Appends `<|ts_start|>`, `<|ts_unit|>`, `<|ts_end|>` after the base tokens.
pub fn extend_vocab(base: &Vocab) -> Result<Vocab> {
    for t in TS_CONTROLS {
        if base.id(t).is_some() {
            return Err(Error::ControlTokenCollision(t.to_string()));
        }
    }
    let mut tokens = base.tokens.clone();
    tokens.extend(TS_CONTROLS.iter().map(|s| s.to_string()));
    Vocab::from_tokens(tokens, Some(base.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn padded_base(size: usize) -> Vocab {
        let b = Vocab::base::<&str>(&[]);
        let mut tokens = b.tokens().to_vec();
        let mut i = 0;
        while tokens.len() < size {
            tokens.push(format!("w{i}"));
            i += 1;
        }
        tokens.truncate(size);
        Vocab::from_tokens(tokens, None).unwrap()
    }

    #[test]
    fn control_ids_follow_base() {
        let base = padded_base(100);
        let v = extend_vocab(&base).unwrap();
        let ts = v.ts_ids().unwrap();
        assert_eq!((ts.start, ts.unit, ts.end), (100, 101, 102));
        assert_eq!(v.len(), 103);
        assert_eq!(v.base_size(), 100);
        for (i, t) in base.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some(i));
        }
    }

    #[test]
    fn collision_is_rejected() {
        let b = Vocab::base(&["<|ts_unit|>"]);
        assert!(matches!(extend_vocab(&b), Err(Error::ControlTokenCollision(t)) if t == TS_UNIT));
        let v = extend_vocab(&Vocab::base(&["cat"])).unwrap();
        assert!(extend_vocab(&v).is_err());
    }

    #[test]
    fn control_tokens_are_single_ids() {
        let v = extend_vocab(&Vocab::base(&["window", "cat"])).unwrap();
        let text = "a window <|ts_start|><|ts_unit|><|ts_end|> cat\n";
        let ids = v.encode(text);
        assert_eq!(v.decode(&ids), text);
        let ts = v.ts_ids().unwrap();
        let pos = ids.iter().position(|&i| i == ts.start).unwrap();
        assert_eq!(&ids[pos..pos + 3], &[ts.start, ts.unit, ts.end]);
        assert!(ids.contains(&v.id(" window").unwrap()));
    }

    #[test]
    fn unknown_characters_become_unk() {
        let v = Vocab::base::<&str>(&[]);
        assert_eq!(v.encode("é"), vec![v.id(UNK).unwrap()]);
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = extend_vocab(&Vocab::base(&["a\\b", "x"])).unwrap();
        let again = Vocab::parse_file_text(&v.to_file_text()).unwrap();
        assert_eq!(again, v);
        assert_eq!(again.base_size(), v.base_size());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(parts in proptest::collection::vec(0usize..6, 0..40), text in "[ -~\n]{0,40}") {
            let v = extend_vocab(&Vocab::base(&["the", "cat", "walking"])).unwrap();
            let pieces = ["<|ts_start|>", "<|ts_unit|>", "<|ts_end|>", " cat", "thewalking", "x"];
            let mut s: String = parts.iter().map(|&p| pieces[p]).collect();
            s.push_str(&text);
            prop_assert_eq!(v.decode(&v.encode(&s)), s);
        }
    }
}
