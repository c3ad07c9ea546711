use serde::{Deserialize, Serialize};

use super::prompt::{build_query, build_response, QueryFamily, TemplateBank};
use super::stream::{SensorStream, StreamSample};
use crate::seed;
use crate::taxonomy::{IntentLabel, IntentTaxonomy};
use crate::tensor::Mat;
use crate::{Error, Result};

/// Averages raw samples into half-open one-second buckets `[k, k+1)`.
///
/// Empty seconds between the first and last bucket become gap markers with
/// zero channels. Streams already at second level are returned unchanged.
pub fn aggregate_to_seconds(stream: &SensorStream) -> Result<SensorStream> {
    if stream.second_level {
        return Ok(stream.clone());
    }
    if stream.samples.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !(stream.sample_rate_hz >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate {} Hz is below 1 Hz",
            stream.sample_rate_hz
        )));
    }
    for i in 1..stream.samples.len() {
        if !(stream.samples[i].timestamp_s > stream.samples[i - 1].timestamp_s) {
            return Err(Error::NonMonotonicTimestamps(i));
        }
    }
    let k = stream.channel_count;
    let first = stream.samples[0].timestamp_s.floor() as i64;
    let last = stream.samples[stream.samples.len() - 1].timestamp_s.floor() as i64;
    let mut out = SensorStream {
        second_level: true,
        sample_rate_hz: 1.0,
        samples: Vec::with_capacity((last - first + 1) as usize),
        ..stream.clone()
    };
    let mut i = 0;
    for sec in first..=last {
        let begin = i;
        while i < stream.samples.len() && stream.samples[i].timestamp_s.floor() as i64 == sec {
            i += 1;
        }
        let bucket = &stream.samples[begin..i];
        if bucket.is_empty() {
            out.samples.push(StreamSample {
                timestamp_s: sec as f64,
                channels: vec![0.0; k],
                label: None,
                transient: false,
                gap: true,
                raw_count: 0,
            });
            continue;
        }
        let mut mean = vec![0.0; k];
        for s in bucket {
            if s.channels.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "sample at {} has {} channels, expected {k}",
                    s.timestamp_s,
                    s.channels.len()
                )));
            }
            for (m, v) in mean.iter_mut().zip(&s.channels) {
                *m += v;
            }
        }
        let n = bucket.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        out.samples.push(StreamSample {
            timestamp_s: sec as f64,
            channels: mean,
            label: majority_label(bucket),
            transient: bucket.iter().any(|s| s.transient),
            gap: false,
            raw_count: bucket.len(),
        });
    }
    Ok(out)
}

/// Most frequent label (unlabelled counts as its own value); ties go to the
/// value seen first in the bucket.
fn majority_label(bucket: &[StreamSample]) -> Option<String> {
    let mut tally: Vec<(&Option<String>, usize)> = Vec::new();
    for s in bucket {
        match tally.iter_mut().find(|(l, _)| **l == s.label) {
            Some((_, c)) => *c += 1,
            None => tally.push((&s.label, 1)),
        }
    }
    let mut best = 0;
    for (i, (_, c)) in tally.iter().enumerate() {
        if *c > tally[best].1 {
            best = i;
        }
    }
    tally[best].0.clone()
}

/// A fixed window of `window_len_s` consecutive seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TsWindow {
    pub values: Mat,
    pub window_len_s: usize,
    pub subject_id: String,
    pub session_id: String,
    pub start_s: f64,
}

impl TsWindow {
    pub fn new(values: Mat, subject_id: &str, session_id: &str, start_s: f64) -> Self {
        TsWindow {
            window_len_s: values.rows,
            values,
            subject_id: subject_id.to_string(),
            session_id: session_id.to_string(),
            start_s,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.values.cols
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.values.rows).map(|i| self.values.row(i).to_vec()).collect()
    }
}

/// A segmented window with its target, before query/response text exists.
#[derive(Debug, Clone, PartialEq)]
pub struct NbpWindow {
    pub window: TsWindow,
    pub horizon_s: usize,
    pub target: IntentLabel,
    pub target_s: f64,
    /// Label of the window's last second, used to flag transitions.
    pub final_label: Option<String>,
}

impl NbpWindow {
    /// True when the behaviour changes between the window's end and the target.
    pub fn is_transition(&self) -> bool {
        self.final_label.as_deref() != Some(self.target.name.as_str())
    }
}

/// Emits every window whose seconds and target second form one contiguous
/// gap-free run, in ascending start order.
///
/// The target is the second `start + A - 1 + B`, i.e. `B` seconds after the
/// window's last second. Targets that are unlabelled, outside the taxonomy or
/// transient are skipped.
pub fn segment_nbp(
    stream: &SensorStream,
    window_len_s: usize,
    horizon_s: usize,
    stride_s: usize,
    taxonomy: &IntentTaxonomy,
) -> Result<Vec<NbpWindow>> {
    if !stream.second_level {
        return Err(Error::StreamNotSecondLevel);
    }
    if window_len_s == 0 || horizon_s == 0 || stride_s == 0 {
        return Err(Error::InvalidParameter(format!(
            "window {window_len_s}, horizon {horizon_s} and stride {stride_s} must all be >= 1"
        )));
    }
    let s = &stream.samples;
    let n = s.len();
    // run[i]: length of the contiguous gap-free run ending at i
    let mut run = vec![0usize; n];
    for i in 0..n {
        if s[i].gap {
            continue;
        }
        let joined = i > 0 && !s[i - 1].gap && s[i].timestamp_s - s[i - 1].timestamp_s == 1.0;
        run[i] = if joined { run[i - 1] + 1 } else { 1 };
    }
    let span = window_len_s + horizon_s;
    let mut out = Vec::new();
    let mut start = 0;
    while start + span <= n {
        let t = start + span - 1;
        if run[t] >= span {
            let target = &s[t];
            let label = target.label.as_deref().filter(|_| !target.transient).and_then(|l| taxonomy.parse_label(l).ok());
            if let Some(label) = label {
                let rows: Vec<Vec<f64>> = s[start..start + window_len_s].iter().map(|r| r.channels.clone()).collect();
                out.push(NbpWindow {
                    window: TsWindow::new(
                        Mat::from_rows(&rows),
                        &stream.subject_id,
                        &stream.session_id,
                        s[start].timestamp_s,
                    ),
                    horizon_s,
                    target: label.clone(),
                    target_s: target.timestamp_s,
                    final_label: s[start + window_len_s - 1].label.clone(),
                });
            }
        }
        start += stride_s;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbpExample {
    pub window: TsWindow,
    pub horizon_s: usize,
    pub target: IntentLabel,
    pub family: QueryFamily,
    pub query: String,
    pub response: String,
}

impl NbpExample {
    /// Attaches a query of a seed-chosen family and a response. The hedged
    /// response bank is used for transition windows.
    pub fn build(w: &NbpWindow, taxonomy: &IntentTaxonomy, bank: &TemplateBank, seed: u64) -> Result<Self> {
        let key = format!("{}/{}/{}/{}/{}", w.window.subject_id, w.window.session_id, w.window.start_s, w.window.window_len_s, w.horizon_s);
        let item = seed::derive_item(seed, "nbp-example", &key);
        let mut rng = seed::rng_from(item);
        let family = QueryFamily::ALL[rand::Rng::random_range(&mut rng, 0..QueryFamily::ALL.len())];
        let query = build_query(
            family,
            Some(w.window.window_len_s),
            Some(w.horizon_s),
            bank,
            seed::derive(item, "query"),
        )?;
        let response = build_response(&w.target, w.is_transition(), taxonomy, bank, seed::derive(item, "response"))?;
        Ok(NbpExample {
            window: w.window.clone(),
            horizon_s: w.horizon_s,
            target: w.target.clone(),
            family,
            query,
            response,
        })
    }

    pub fn to_record(&self) -> NbpRecord {
        NbpRecord {
            window: self.window.rows(),
            window_len_s: self.window.window_len_s,
            horizon_s: self.horizon_s,
            target: self.target.name.clone(),
            query: self.query.clone(),
            response: self.response.clone(),
            subject_id: self.window.subject_id.clone(),
            session_id: self.window.session_id.clone(),
            start_s: self.window.start_s,
        }
    }
}

/// One JSON Lines row of the NBP dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbpRecord {
    pub window: Vec<Vec<f64>>,
    pub window_len_s: usize,
    pub horizon_s: usize,
    pub target: String,
    pub query: String,
    pub response: String,
    pub subject_id: String,
    pub session_id: String,
    pub start_s: f64,
}

impl NbpRecord {
    pub fn to_window(&self) -> Result<TsWindow> {
        if self.window.len() != self.window_len_s || self.window.iter().any(|r| r.len() != self.window[0].len()) {
            return Err(Error::ShapeMismatch(format!(
                "record window has {} rows, declares {}",
                self.window.len(),
                self.window_len_s
            )));
        }
        Ok(TsWindow::new(Mat::from_rows(&self.window), &self.subject_id, &self.session_id, self.start_s))
    }
}
