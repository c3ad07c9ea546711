//! Static SVG bar charts. Every drawn number is printed verbatim from the
//! input CSV, and the rows drawn are copied to a CSV beside the chart.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::failure::{input, CliResult};
use crate::settings::{must_exist, Settings};

const WIDTH: f64 = 640.0;
const BAR_H: f64 = 28.0;
const LEFT: f64 = 110.0;
const RIGHT: f64 = 90.0;

/// One bar: label, the value's exact CSV text and its parsed value.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub text: String,
    pub value: f64,
}

fn read_bars(path: &Path, label_col: &str, value_col: &str) -> CliResult<Vec<Bar>> {
    must_exist(path)?;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| input(format!("{}: missing column `{name}`", path.display())))
    };
    let (li, vi) = (col(label_col)?, col(value_col)?);
    let mut bars = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || input(format!("{}:{}: malformed row", path.display(), n + 2));
        let (label, raw) = (f.get(li).ok_or_else(bad)?, f.get(vi).ok_or_else(bad)?);
        let value: f64 = raw.parse().map_err(|_| bad())?;
        bars.push(Bar { label: label.to_string(), text: raw.to_string(), value });
    }
    if bars.is_empty() {
        return Err(input(format!("{}: no rows", path.display())));
    }
    Ok(bars)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bars scaled to `max` (or the largest value when absent).
pub fn bar_chart(title: &str, bars: &[Bar], max: Option<f64>) -> String {
    let top = 40.0;
    let height = top + bars.len() as f64 * BAR_H + 20.0;
    let scale_max = max.unwrap_or_else(|| bars.iter().map(|b| b.value).fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    let span = WIDTH - LEFT - RIGHT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" font-weight="bold">{}</text>"#, LEFT, escape(title));
    for (i, b) in bars.iter().enumerate() {
        let y = top + i as f64 * BAR_H;
        let w = (b.value.max(0.0) / scale_max).min(1.0) * span;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 18.0, escape(&b.label));
        let _ = writeln!(s, r##"<rect x="{LEFT}" y="{}" width="{w:.2}" height="{}" fill="#4c72b0"/>"##, y + 4.0, BAR_H - 8.0);
        let _ = writeln!(s, r#"<text class="value" x="{:.2}" y="{}">{}</text>"#, LEFT + w + 6.0, y + 18.0, escape(&b.text));
    }
    s.push_str("</svg>\n");
    s
}

fn bars_csv(label_col: &str, value_col: &str, bars: &[Bar]) -> String {
    let mut s = format!("{label_col},{value_col}\n");
    for b in bars {
        let _ = writeln!(s, "{},{}", b.label, b.text);
    }
    s
}

pub fn run(s: &mut Settings) -> CliResult<()> {
    let ablation = s.optional_path("plot.ablation_csv")?;
    let uq = s.optional_path("plot.uq_csv")?;
    s.finish()?;
    if ablation.is_none() && uq.is_none() {
        return Err(input("plot needs `plot.ablation_csv`, `plot.uq_csv` or both"));
    }
    if let Some(p) = ablation {
        let bars = read_bars(&p, "modalities", "accuracy")?;
        fs::write(s.output("ablation.svg"), bar_chart("Accuracy by modality subset", &bars, Some(1.0)))?;
        fs::write(s.output("ablation_plot.csv"), bars_csv("modalities", "accuracy", &bars))?;
    }
    if let Some(p) = uq {
        let bars = read_bars(&p, "group", "mean_bits")?;
        fs::write(s.output("entropy.svg"), bar_chart("Mean predictive entropy (bits)", &bars, None))?;
        fs::write(s.output("entropy_plot.csv"), bars_csv("group", "mean_bits", &bars))?;
    }
    Ok(())
}
