use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Header shared by every histogram-like CSV output.
pub const HISTOGRAM_HEADER: &str = "bin_center_s,value,error";

/// Renders rows of (bin centre, value, error) as CSV.
pub fn histogram_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::with_capacity(32 * rows.len() + 32);
    out.push_str(HISTOGRAM_HEADER);
    out.push('\n');
    for (c, v, e) in rows {
        let _ = writeln!(out, "{c:e},{v},{e}");
    }
    out
}

/// Renders any serializable report as a key/value summary.
pub fn summary_text<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(format!("cannot render summary: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
