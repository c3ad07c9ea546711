use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub timestamp_s: f64,
    pub channels: Vec<f64>,
    /// Raw label text; whether it belongs to the taxonomy is decided later.
    pub label: Option<String>,
    /// Marks transient intermediate movement (excluded as an NBP target).
    pub transient: bool,
    /// Second-level discontinuity marker: no raw samples fell in this second.
    pub gap: bool,
    /// Number of raw samples averaged into this row (1 for raw streams).
    pub raw_count: usize,
}

impl StreamSample {
    pub fn raw(timestamp_s: f64, channels: Vec<f64>, label: Option<&str>) -> Self {
        StreamSample {
            timestamp_s,
            channels,
            label: label.map(str::to_string),
            transient: false,
            gap: false,
            raw_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    pub subject_id: String,
    pub session_id: String,
    pub sample_rate_hz: f64,
    pub channel_count: usize,
    pub second_level: bool,
    pub samples: Vec<StreamSample>,
}

impl SensorStream {
    pub fn new(subject_id: &str, session_id: &str, sample_rate_hz: f64, channel_count: usize) -> Self {
        SensorStream {
            subject_id: subject_id.to_string(),
            session_id: session_id.to_string(),
            sample_rate_hz,
            channel_count,
            second_level: false,
            samples: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_count < 3 {
            return Err(Error::InvalidParameter(format!(
                "channel_count {} < 3 (tri-axial minimum)",
                self.channel_count
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate {} must be positive", self.sample_rate_hz)));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.channels.len() != self.channel_count {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} channels, stream declares {}",
                    s.channels.len(),
                    self.channel_count
                )));
            }
            if i > 0 && !(s.timestamp_s > self.samples[i - 1].timestamp_s) {
                return Err(Error::NonMonotonicTimestamps(i));
            }
        }
        Ok(())
    }

    /// Parses the whitespace-separated stream format:
    /// header `subject_id session_id sample_rate_hz channel_count`, then rows
    /// `timestamp_s c1 … cK label_or_dash transient_flag`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(err(hline, "header must be `subject_id session_id sample_rate_hz channel_count`".into()));
        }
        let rate: f64 = h[2].parse().map_err(|_| err(hline, format!("bad sample rate `{}`", h[2])))?;
        let k: usize = h[3].parse().map_err(|_| err(hline, format!("bad channel count `{}`", h[3])))?;
        let mut stream = SensorStream::new(h[0], h[1], rate, k);
        for (line, row) in lines {
            let f: Vec<&str> = row.split_whitespace().collect();
            if f.len() != k + 3 {
                return Err(err(line, format!("expected {} fields, found {}", k + 3, f.len())));
            }
            let ts: f64 = f[0].parse().map_err(|_| err(line, format!("bad timestamp `{}`", f[0])))?;
            let channels = f[1..=k]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| err(line, format!("bad channel value `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            if channels.iter().any(|v| !v.is_finite()) || !ts.is_finite() {
                return Err(err(line, "non-finite value".into()));
            }
            let label = match f[k + 1] {
                "-" => None,
                l => Some(l.to_string()),
            };
            let transient = match f[k + 2] {
                "0" => false,
                "1" => true,
                o => return Err(err(line, format!("transient flag must be 0 or 1, got `{o}`"))),
            };
            stream.samples.push(StreamSample { timestamp_s: ts, channels, label, transient, gap: false, raw_count: 1 });
        }
        stream.validate().map_err(|e| match e {
            Error::NonMonotonicTimestamps(i) => err(0, format!("timestamps not strictly increasing at sample {i}")),
            other => err(0, other.to_string()),
        })?;
        Ok(stream)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Inverse of [`SensorStream::parse`] for raw streams.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!(
            "{} {} {} {}\n",
            self.subject_id, self.session_id, self.sample_rate_hz, self.channel_count
        );
        for s in &self.samples {
            let _ = write!(out, "{}", s.timestamp_s);
            for c in &s.channels {
                let _ = write!(out, " {c}");
            }
            let _ = writeln!(out, " {} {}", s.label.as_deref().unwrap_or("-"), u8::from(s.transient));
        }
        out
    }
}
