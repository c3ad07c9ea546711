use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::vocab::{TS_END, TS_START, TS_UNIT};
use crate::seed;
use crate::taxonomy::{IntentLabel, IntentTaxonomy};
use crate::{Error, Result};

pub const DEFAULT_TEMPLATES: &str = include_str!("../../assets/templates.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryFamily {
    WindowOnly,
    HorizonOnly,
    WindowAndHorizon,
    Basic,
}

impl QueryFamily {
    pub const ALL: [QueryFamily; 4] =
        [QueryFamily::WindowOnly, QueryFamily::HorizonOnly, QueryFamily::WindowAndHorizon, QueryFamily::Basic];

    /// Family key used in template files.
    pub fn key(self) -> &'static str {
        match self {
            QueryFamily::WindowOnly => "window",
            QueryFamily::HorizonOnly => "horizon",
            QueryFamily::WindowAndHorizon => "window_horizon",
            QueryFamily::Basic => "basic",
        }
    }

    fn needs(self) -> (bool, bool) {
        match self {
            QueryFamily::WindowOnly => (true, false),
            QueryFamily::HorizonOnly => (false, true),
            QueryFamily::WindowAndHorizon => (true, true),
            QueryFamily::Basic => (false, false),
        }
    }
}

const RESPONSE: &str = "response";
const RESPONSE_HEDGED: &str = "response_hedged";

/// Editable template bank, keyed by family.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    families: BTreeMap<String, Vec<String>>,
}

impl TemplateBank {
    /// Parses `family<TAB>template` lines; `#` lines and blanks are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut families: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let triple = format!("{TS_START}{TS_UNIT}{TS_END}");
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
            let (family, template) = line.split_once('\t').ok_or_else(|| err("expected family<TAB>template".into()))?;
            let is_query = QueryFamily::ALL.iter().any(|f| f.key() == family);
            if is_query {
                if template.matches(&triple).count() != 1
                    || template.matches(TS_START).count() != 1
                    || template.matches(TS_UNIT).count() != 1
                    || template.matches(TS_END).count() != 1
                {
                    return Err(err("query template must contain the time-series token triple exactly once".into()));
                }
            } else if family != RESPONSE && family != RESPONSE_HEDGED {
                return Err(err(format!("unknown template family `{family}`")));
            }
            families.entry(family.to_string()).or_default().push(template.to_string());
        }
        Ok(TemplateBank { families })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn templates(&self, family: &str) -> &[String] {
        self.families.get(family).map_or(&[], Vec::as_slice)
    }

    fn pick(&self, family: &str, seed: u64) -> Result<&str> {
        let bank = self.templates(family);
        if bank.is_empty() {
            return Err(Error::EmptyTemplateBank(family.to_string()));
        }
        let mut rng = seed::rng(seed, family);
        Ok(&bank[rng.random_range(0..bank.len())])
    }
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES, Path::new("templates.tsv")).expect("shipped templates are valid")
    }
}

/// Picks a template of `family` uniformly by seed and fills `{A}` / `{B}`.
pub fn build_query(
    family: QueryFamily,
    a: Option<usize>,
    b: Option<usize>,
    bank: &TemplateBank,
    seed: u64,
) -> Result<String> {
    let (need_a, need_b) = family.needs();
    let missing = |which| Error::MissingParameter { family: family.key().to_string(), which };
    if need_a && a.is_none() {
        return Err(missing('A'));
    }
    if need_b && b.is_none() {
        return Err(missing('B'));
    }
    let mut text = bank.pick(family.key(), seed)?.to_string();
    if let Some(a) = a {
        text = text.replace("{A}", &a.to_string());
    }
    if let Some(b) = b {
        text = text.replace("{B}", &b.to_string());
    }
    Ok(text)
}

/// One sentence naming the behaviour and paraphrasing its feature summary;
/// `hedged` selects the transition templates.
pub fn build_response(
    target: &IntentLabel,
    hedged: bool,
    taxonomy: &IntentTaxonomy,
    bank: &TemplateBank,
    seed: u64,
) -> Result<String> {
    let summary = taxonomy.feature_summary(target)?;
    let features = summary.trim().trim_end_matches('.');
    let features = if features.is_empty() { "shows its usual pattern" } else { features };
    let family = if hedged { RESPONSE_HEDGED } else { RESPONSE };
    Ok(bank
        .pick(family, seed)?
        .replace("{behavior}", &target.display_name())
        .replace("{features}", features))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple_in_order(q: &str) -> bool {
        let (s, u, e) = (q.find(TS_START), q.find(TS_UNIT), q.find(TS_END));
        q.matches(TS_START).count() == 1
            && q.matches(TS_UNIT).count() == 1
            && q.matches(TS_END).count() == 1
            && matches!((s, u, e), (Some(s), Some(u), Some(e)) if s < u && u < e)
    }

    #[test]
    fn first_window_horizon_template() {
        let bank = TemplateBank::default();
        let t = &bank.templates("window_horizon")[0];
        let single = TemplateBank::parse(&format!("window_horizon\t{t}\n"), Path::new("t")).unwrap();
        let q = build_query(QueryFamily::WindowAndHorizon, Some(5), Some(2), &single, 42).unwrap();
        assert_eq!(q, "Given a 5-second window <|ts_start|><|ts_unit|><|ts_end|>, predict the behavior after 2 seconds.");
    }

    #[test]
    fn every_family_has_ten_templates_and_the_triple() {
        let bank = TemplateBank::default();
        for f in QueryFamily::ALL {
            assert!(bank.templates(f.key()).len() >= 10);
            for seed in 0..50 {
                let q = build_query(f, Some(7), Some(3), &bank, seed).unwrap();
                assert!(triple_in_order(&q), "{q}");
                assert!(!q.contains('{'));
            }
        }
        assert!(bank.templates(RESPONSE).len() >= 10);
        assert!(bank.templates(RESPONSE_HEDGED).len() >= 10);
    }

    #[test]
    fn queries_are_deterministic_and_checked() {
        let bank = TemplateBank::default();
        let a = build_query(QueryFamily::Basic, None, None, &bank, 9).unwrap();
        assert_eq!(a, build_query(QueryFamily::Basic, None, None, &bank, 9).unwrap());
        assert!(matches!(
            build_query(QueryFamily::WindowOnly, None, Some(2), &bank, 0),
            Err(Error::MissingParameter { which: 'A', .. })
        ));
        assert!(matches!(
            build_query(QueryFamily::HorizonOnly, Some(5), None, &bank, 0),
            Err(Error::MissingParameter { which: 'B', .. })
        ));
        let empty = TemplateBank::parse("", Path::new("t")).unwrap();
        assert!(matches!(build_query(QueryFamily::Basic, None, None, &empty, 0), Err(Error::EmptyTemplateBank(_))));
    }

    #[test]
    fn bad_templates_are_rejected() {
        assert!(TemplateBank::parse("basic\tno tokens here\n", Path::new("t")).is_err());
        assert!(TemplateBank::parse("mystery\tx\n", Path::new("t")).is_err());
        assert!(TemplateBank::parse("basic no tab\n", Path::new("t")).is_err());
    }

    #[test]
    fn responses() {
        let tax = IntentTaxonomy::default_taxonomy();
        let bank = TemplateBank::default();
        let walk = tax.parse_label("Walk").unwrap();
        for seed in 0..20 {
            let r = build_response(walk, false, &tax, &bank, seed).unwrap();
            assert!(r.contains("walking") && r.contains("smooth and regular temporal changes"), "{r}");
            assert_eq!(r, build_response(walk, false, &tax, &bank, seed).unwrap());
        }
        let rest = tax.parse_label("Rest").unwrap();
        let hedged = build_response(rest, true, &tax, &bank, 3).unwrap();
        assert!(bank.templates(RESPONSE_HEDGED).iter().any(|t| {
            t.replace("{behavior}", "resting").replace("{features}", tax.feature_summary(rest).unwrap().trim_end_matches('.'))
                == hedged
        }));
        let stranger = IntentLabel { id: 99, name: "Fly".into(), group: "basic".into() };
        assert!(matches!(build_response(&stranger, false, &tax, &bank, 0), Err(Error::UnknownLabel(_))));
    }
}
