//! Checkpoint directories: a text `manifest`, the vocabulary file and one
//! little-endian f32 array per parameter group.

use std::fmt::Write as _;
use std::path::Path;

use super::config::FusionConfig;
use super::fusion::FusionModel;
use super::params::{FusionParams, Group};
use super::vocab::Vocab;
use crate::config::FlatConfig;
use crate::seed;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest";
pub const VOCAB_FILE: &str = "vocab.txt";

pub fn group_file(g: Group) -> String {
    format!("{}.f32", g.name())
}

/// Writes the model; `lineage` records how the seed was used (free text).
pub fn save(dir: &Path, model: &FusionModel, lineage: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = &model.params;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "format_version = {FORMAT_VERSION}");
    let _ = writeln!(manifest, "seed_lineage = {}", lineage.replace('\n', " "));
    let _ = writeln!(manifest, "vocab_base_size = {}", model.vocab.base_size());
    manifest.push_str(&model.config.render());
    for g in Group::ALL {
        let shapes: Vec<String> = p
            .tensors()
            .into_iter()
            .filter(|t| t.group == g)
            .map(|t| format!("{}:{}x{}", t.name, t.mat.rows, t.mat.cols))
            .collect();
        let _ = writeln!(manifest, "group.{}.frozen = {}", g.name(), p.is_frozen(g));
        let _ = writeln!(manifest, "group.{}.shapes = {}", g.name(), shapes.join(";"));
        let values = p.group_values(g);
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        std::fs::write(dir.join(group_file(g)), bytes)?;
    }
    std::fs::write(dir.join(MANIFEST), manifest)?;
    model.vocab.save(&dir.join(VOCAB_FILE))?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<FusionModel> {
    let bad = |m: String| Error::Checkpoint(format!("{}: {m}", dir.display()));
    let text = std::fs::read_to_string(dir.join(MANIFEST)).map_err(|e| bad(format!("manifest: {e}")))?;
    let mut flat = FlatConfig::parse(&text)?;
    let version: u32 = flat.get("format_version")?.ok_or_else(|| bad("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let _ = flat.raw("seed_lineage");
    let base_size: usize = flat.get("vocab_base_size")?.ok_or_else(|| bad("missing vocab_base_size".into()))?;
    let config = FusionConfig::from_flat(&mut flat, &FusionConfig::default())?;
    let tokens = Vocab::load(&dir.join(VOCAB_FILE))?.tokens().to_vec();
    let vocab = Vocab::from_tokens(tokens, Some(base_size))?;
    if vocab.len() != config.vocab_size {
        return Err(bad(format!("vocab file has {} tokens, config says {}", vocab.len(), config.vocab_size)));
    }
    let mut params = FusionParams::init(&config, &mut seed::rng(0, "checkpoint-shape"))?;
    let mut frozen = Vec::new();
    for g in Group::ALL {
        if flat.get::<bool>(&format!("group.{}.frozen", g.name()))?.unwrap_or(false) {
            frozen.push(g);
        }
        let _ = flat.raw(&format!("group.{}.shapes", g.name()));
        let bytes = std::fs::read(dir.join(group_file(g))).map_err(|e| bad(format!("{}: {e}", group_file(g))))?;
        if bytes.len() % 4 != 0 {
            return Err(bad(format!("{} is not a whole number of f32 values", group_file(g))));
        }
        let values: Vec<f64> =
            bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        params.set_group_values(g, &values).map_err(|e| bad(e.to_string()))?;
    }
    flat.finish().map_err(|e| bad(e.to_string()))?;
    params.set_frozen(frozen);
    Ok(FusionModel { config, vocab, params })
}

/// Rounds every parameter to f32, matching what a save/load cycle yields.
pub fn round_to_f32(params: &mut FusionParams) {
    for t in params.tensors_mut() {
        for v in &mut t.mat.data {
            *v = *v as f32 as f64;
        }
    }
}
