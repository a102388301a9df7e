//! File emission: CSV with full round-trip precision, JSON summaries, and
//! gnuplot scripts that consume the CSVs.

use agrofin_core::EquilibriumMetrics;
use anyhow::Context;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// 17 significant digits: enough to regenerate the golden files bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    fmt_f64(x.unwrap_or(f64::NAN))
}

/// Comma-separated, header row, LF line endings.
pub struct CsvWriter {
    buffer: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut buffer = String::new();
        buffer.push_str(&header.join(","));
        buffer.push('\n');
        Self {
            buffer,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        self.buffer.push_str(&cells.join(","));
        self.buffer.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> anyhow::Result<()> {
        write_text(path, &self.buffer)
    }
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serialize to JSON")?;
    text.push('\n');
    write_text(path, &text)
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Metric cells in the canonical column order used by sweep and metrics CSVs.
pub const METRIC_COLUMNS: [&str; 15] = [
    "q_mean",
    "q_std",
    "price_mean",
    "price_std",
    "default_frac",
    "default_frac_std",
    "pi_f",
    "m_f",
    "mu_f",
    "sigma_f",
    "sigma_f_aggregate",
    "pi_s",
    "m_s",
    "mu_s",
    "sigma_s",
];

pub fn metric_cells(m: &EquilibriumMetrics) -> Vec<String> {
    vec![
        fmt_f64(m.q_mean),
        fmt_f64(m.q_std),
        fmt_f64(m.price_mean),
        fmt_f64(m.price_std),
        fmt_f64(m.default_frac),
        fmt_f64(m.default_frac_std),
        fmt_f64(m.pi_f),
        fmt_f64(m.m_f),
        fmt_f64(m.mu_f),
        fmt_f64(m.sigma_f),
        fmt_f64(m.sigma_f_aggregate),
        fmt_f64(m.pi_s),
        fmt_f64(m.m_s),
        fmt_opt(m.mu_s),
        fmt_opt(m.sigma_s),
    ]
}

/// Minimal gnuplot script plotting the named columns of a CSV.
pub fn gnuplot_script(csv_name: &str, title: &str, ylabel: &str, series: &[(usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script; run: gnuplot -p {}", csv_name.replace(".csv", ".gp"));
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set grid");
    let plots: Vec<String> = series
        .iter()
        .map(|(column, label)| {
            format!("'{csv_name}' using 1:{column} with linespoints title '{label}'")
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
