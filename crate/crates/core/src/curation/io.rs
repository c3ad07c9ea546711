//! JSON Lines persistence. Media arrays go to `.npy` sidecars under
//! `<stem>_media/`, referenced by paths relative to the JSONL file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sample::{McqItem, MultimodalSample, LETTERS};
use crate::biosignal::TsWindow;
use crate::model::FrameStack;
use crate::npy::{self, NpyArray};
use crate::taxonomy::{IntentLabel, IntentTaxonomy};
use crate::tensor::Mat;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct TsRef {
    path: String,
    subject_id: String,
    session_id: String,
    start_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    video: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<TsRef>,
    #[serde(default)]
    text_query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_distribution: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts_label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct McqRecord {
    #[serde(flatten)]
    sample: SampleRecord,
    options: Vec<String>,
    answer: char,
}

fn media_dir(path: &Path) -> (PathBuf, String) {
    let parent = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("items");
    (parent, format!("{stem}_media"))
}

fn write_media(parent: &Path, rel_dir: &str, index: usize, s: &MultimodalSample) -> Result<SampleRecord> {
    let put = |kind: &str, shape: Vec<usize>, data: &[f64]| -> Result<String> {
        let rel = format!("{rel_dir}/{index:05}_{kind}.npy");
        npy::write(&parent.join(&rel), &NpyArray::new(shape, data.to_vec())?)?;
        Ok(rel)
    };
    let video = s.video.as_ref().map(|v| put("video", v.shape().to_vec(), &v.data)).transpose()?;
    let audio = s.audio.as_ref().map(|a| put("audio", vec![a.rows, a.cols], &a.data)).transpose()?;
    let ts = s
        .ts
        .as_ref()
        .map(|w| -> Result<TsRef> {
            Ok(TsRef {
                path: put("ts", vec![w.values.rows, w.values.cols], &w.values.data)?,
                subject_id: w.subject_id.clone(),
                session_id: w.session_id.clone(),
                start_s: w.start_s,
            })
        })
        .transpose()?;
    Ok(SampleRecord {
        id: s.id.clone(),
        session_id: s.session_id.clone(),
        video,
        audio,
        ts,
        text_query: s.text_query.clone(),
        label: s.label.as_ref().map(|l| l.name.clone()),
        label_distribution: s.label_distribution.clone(),
        ts_label: s.ts_label.as_ref().map(|l| l.name.clone()),
    })
}

fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples(path: &Path, samples: &[MultimodalSample]) -> Result<()> {
    let (parent, rel) = media_dir(path);
    fs::create_dir_all(parent.join(&rel))?;
    let records = samples
        .iter()
        .enumerate()
        .map(|(i, s)| write_media(&parent, &rel, i, s))
        .collect::<Result<Vec<_>>>()?;
    write_lines(path, &records)
}

pub fn write_mcq_items(path: &Path, items: &[McqItem]) -> Result<()> {
    let (parent, rel) = media_dir(path);
    fs::create_dir_all(parent.join(&rel))?;
    let records = items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            Ok(McqRecord {
                sample: write_media(&parent, &rel, i, &item.sample)?,
                options: item.options.iter().map(|o| o.name.clone()).collect(),
                answer: item.answer_letter(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_lines(path, &records)
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, msg: e.to_string() })
        })
        .collect()
}

fn load_sample(parent: &Path, r: SampleRecord, tax: &IntentTaxonomy) -> Result<MultimodalSample> {
    let label = |n: &Option<String>| -> Result<Option<IntentLabel>> {
        n.as_deref().map(|n| tax.parse_label(n).cloned()).transpose()
    };
    let matrix = |rel: &str| -> Result<Mat> {
        let a = npy::read(&parent.join(rel))?;
        match a.shape[..] {
            [r, c] => Ok(Mat::from_vec(r, c, a.data)),
            _ => Err(Error::ShapeMismatch(format!("{rel}: expected 2-D array, got {:?}", a.shape))),
        }
    };
    let video = r
        .video
        .as_deref()
        .map(|rel| -> Result<FrameStack> {
            let a = npy::read(&parent.join(rel))?;
            match a.shape[..] {
                [t, h, w, c] => FrameStack::new(t, h, w, c, a.data),
                _ => Err(Error::ShapeMismatch(format!("{rel}: expected 4-D array, got {:?}", a.shape))),
            }
        })
        .transpose()?;
    let audio = r.audio.as_deref().map(matrix).transpose()?;
    let ts = r
        .ts
        .as_ref()
        .map(|t| -> Result<TsWindow> { Ok(TsWindow::new(matrix(&t.path)?, &t.subject_id, &t.session_id, t.start_s)) })
        .transpose()?;
    let s = MultimodalSample {
        label: label(&r.label)?,
        ts_label: label(&r.ts_label)?,
        id: r.id,
        session_id: r.session_id,
        video,
        audio,
        ts,
        text_query: r.text_query,
        label_distribution: r.label_distribution,
    };
    s.validate()?;
    Ok(s)
}

pub fn read_samples(path: &Path, taxonomy: &IntentTaxonomy) -> Result<Vec<MultimodalSample>> {
    let parent = path.parent().unwrap_or(Path::new(""));
    read_lines::<SampleRecord>(path)?
        .into_iter()
        .map(|(_, r)| load_sample(parent, r, taxonomy))
        .collect()
}

pub fn read_mcq_items(path: &Path, taxonomy: &IntentTaxonomy) -> Result<Vec<McqItem>> {
    let parent = path.parent().unwrap_or(Path::new(""));
    read_lines::<McqRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let bad = |msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
            let answer_index = LETTERS.iter().position(|&c| c == r.answer).ok_or_else(|| bad(format!("answer `{}`", r.answer)))?;
            let options = r
                .options
                .iter()
                .map(|n| taxonomy.parse_label(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            let options: [IntentLabel; 4] =
                options.try_into().map_err(|o: Vec<_>| bad(format!("{} options, expected 4", o.len())))?;
            let item = McqItem { sample: load_sample(parent, r.sample, taxonomy)?, options, answer_index };
            item.validate()?;
            Ok(item)
        })
        .collect()
}
