//! Command settings: a flat config file plus command-line overrides, with a
//! record of every value actually used so the run can be replayed.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quadfuse::config::FlatConfig;
use quadfuse::evaluation::{EvalConfig, McqTemplate, DEFAULT_MCQ_TEMPLATE};
use quadfuse::taxonomy::IntentTaxonomy;

use crate::failure::{input, runtime, CliResult};

pub const SNAPSHOT: &str = "resolved.conf";

pub struct Settings {
    flat: FlatConfig,
    resolved: BTreeMap<String, String>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Settings {
    pub fn load(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> CliResult<Self> {
        let mut flat = match config {
            Some(p) => FlatConfig::load(p).map_err(input)?,
            None => FlatConfig::default(),
        };
        if let Some(s) = seed {
            flat.set("seed", s);
        }
        if let Some(o) = out {
            flat.set("output_dir", o.display());
        }
        let mut s = Settings { flat, resolved: BTreeMap::new(), seed: 0, out: PathBuf::new() };
        s.seed = s.get("seed", 0u64)?;
        s.out = s.required_path("output_dir")?;
        Ok(s)
    }

    /// Command-line selector that takes precedence over the config file.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.flat.set(key, value);
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> CliResult<T> {
        let v = self.flat.get_or(key, default).map_err(input)?;
        self.record(key, &v);
        Ok(v)
    }

    pub fn list<T: FromStr + Display>(&mut self, key: &str, default: &[T]) -> CliResult<Vec<T>>
    where
        T: Clone,
    {
        let v = self.flat.get_list(key).map_err(input)?.unwrap_or_else(|| default.to_vec());
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        self.record(key, text);
        Ok(v)
    }

    pub fn optional_path(&mut self, key: &str) -> CliResult<Option<PathBuf>> {
        let v = self.flat.raw(key).filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(p) = &v {
            self.record(key, p.display());
        }
        Ok(v)
    }

    pub fn required_path(&mut self, key: &str) -> CliResult<PathBuf> {
        self.optional_path(key)?.ok_or_else(|| input(format!("missing required setting `{key}`")))
    }

    /// An input path that must exist.
    pub fn existing_path(&mut self, key: &str) -> CliResult<PathBuf> {
        let p = self.required_path(key)?;
        must_exist(&p)?;
        Ok(p)
    }

    /// Lets a module parse its own keys, then records its rendered values.
    pub fn with_flat<T>(
        &mut self,
        parse: impl FnOnce(&mut FlatConfig) -> quadfuse::Result<T>,
        render: impl FnOnce(&T) -> String,
    ) -> CliResult<T> {
        let v = parse(&mut self.flat).map_err(input)?;
        for line in render(&v).lines() {
            if let Some((k, val)) = line.split_once('=') {
                self.record(k.trim(), val.trim());
            }
        }
        Ok(v)
    }

    pub fn taxonomy(&mut self) -> CliResult<IntentTaxonomy> {
        match self.optional_path("taxonomy_path")? {
            Some(p) => {
                must_exist(&p)?;
                IntentTaxonomy::load(&p).map_err(input)
            }
            None => Ok(IntentTaxonomy::default_taxonomy()),
        }
    }

    /// Prompt rendering shared by training and evaluation.
    pub fn eval_config(&mut self) -> CliResult<EvalConfig> {
        let template = match self.optional_path("eval.template_path")? {
            Some(p) => {
                must_exist(&p)?;
                McqTemplate::load(&p).map_err(input)?
            }
            None => McqTemplate::new(DEFAULT_MCQ_TEMPLATE).map_err(input)?,
        };
        let question = self.get("eval.question", String::new())?;
        let prefix = self.get("eval.answer_prefix", String::new())?;
        Ok(EvalConfig { template, question, answer_prefix: (!prefix.is_empty()).then_some(prefix) })
    }

    /// Rejects unknown keys, creates the output directory and writes the
    /// snapshot. Call after every key has been read.
    pub fn finish(&mut self) -> CliResult<()> {
        self.finish_as(SNAPSHOT)
    }

    pub fn finish_as(&mut self, snapshot: &str) -> CliResult<()> {
        self.flat.finish().map_err(input)?;
        std::fs::create_dir_all(&self.out).map_err(runtime)?;
        let mut text = String::new();
        for (k, v) in &self.resolved {
            text.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::write(self.out.join(snapshot), text).map_err(runtime)?;
        Ok(())
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn must_exist(p: &Path) -> CliResult<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(input(format!("{}: no such file or directory", p.display())))
    }
}
