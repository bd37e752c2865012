//! Result tables and files. Printed numbers carry 9 significant digits; JSON
//! files keep full binary64.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::{Format, RunConfig};
use qcorr::Result;

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let s = format!("{:.*}", (8 - exp) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.8e}");
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Two-column result table.
#[derive(Default)]
pub struct Table {
    rows: Vec<(String, String)>,
    bits: bool,
}

impl Table {
    pub fn new(cfg: &RunConfig) -> Self {
        Self { rows: Vec::new(), bits: cfg.bits }
    }

    /// An entropic quantity, shown in bits when asked.
    pub fn info(&mut self, key: impl Into<String>, nats: f64) -> &mut Self {
        let (v, unit) = if self.bits { (nats / std::f64::consts::LN_2, "bits") } else { (nats, "nats") };
        self.rows.push((key.into(), format!("{} {unit}", sig9(v))));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, x: f64) -> &mut Self {
        self.rows.push((key.into(), sig9(x)));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl ToString) -> &mut Self {
        self.rows.push((key.into(), v.to_string()));
        self
    }

    /// Aligned two-column text.
    pub fn plain(&self) -> String {
        self.render(Format::Json)
    }

    fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                s.push_str("key,value\n");
                for (k, v) in &self.rows {
                    s.push_str(&format!("{},{}\n", csv_field(k), csv_field(v)));
                }
            }
            Format::Json => {
                let w = self.rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
                for (k, v) in &self.rows {
                    s.push_str(&format!("{k:<w$}  {v}\n"));
                }
            }
        }
        s
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Prints the table; with `--out`, also writes `record` (json) or the table (csv).
pub fn emit(cfg: &RunConfig, table: &Table, record: Value) -> Result<()> {
    print(&table.render(cfg.format))?;
    if let Some(path) = &cfg.out {
        let text = match cfg.format {
            Format::Json => serde_json::to_string_pretty(&record)? + "\n",
            Format::Csv => table.render(Format::Csv),
        };
        write_file(path, &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(3.0 * std::f64::consts::LN_2), "2.07944154");
        assert_eq!(sig9(std::f64::consts::LN_2), "0.693147181");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-0.25), "-0.25");
        assert_eq!(sig9(1.234e-9), "1.234e-9");
        assert_eq!(sig9(123456789012.0), "1.23456789e11");
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn csv_quotes_separators() {
        assert_eq!(csv_field("A1|A2"), "A1|A2");
        assert_eq!(csv_field("H(A,B)"), "\"H(A,B)\"");
    }
}
