use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{CatalogError, CatalogRecord, RecordKey, Result};

const FIELDS: usize = 8;
const MIN_SIGNIFICANT: usize = 6;

/// Shortest decimal that parses back to `v`, padded with trailing zeros to
/// at least six significant digits.
pub fn format_percent(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    let mut s = format!("{v}");
    let significant = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if significant < MIN_SIGNIFICANT {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat('0').take(MIN_SIGNIFICANT - significant));
    }
    s
}

fn opt_percent(v: Option<f64>) -> String {
    v.map(format_percent).unwrap_or_default()
}

/// One newline-terminated log line: tab-separated fields in record order,
/// empty for absent values, mask references joined by commas.
pub fn record_line(r: &CatalogRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        r.tile_id,
        r.capture_date.format("%Y-%m-%d"),
        opt_percent(r.water_percent),
        opt_percent(r.burnt_percent),
        r.water_sfv_ref.as_deref().unwrap_or(""),
        r.burnt_sfv_ref.as_deref().unwrap_or(""),
        r.mask_refs.join(","),
        r.total_pixels,
    )
}

/// Parses one line without its terminator.
pub fn parse_line(line: &str) -> std::result::Result<CatalogRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != FIELDS {
        return Err(format!("expected {FIELDS} fields, found {}", f.len()));
    }
    let percent = |s: &str| -> std::result::Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("bad percentage {s:?}"))
        }
    };
    let reference = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let record = CatalogRecord {
        tile_id: f[0].to_string(),
        capture_date: NaiveDate::parse_from_str(f[1], "%Y-%m-%d").map_err(|e| format!("bad date {:?}: {e}", f[1]))?,
        water_percent: percent(f[2])?,
        burnt_percent: percent(f[3])?,
        water_sfv_ref: reference(f[4]),
        burnt_sfv_ref: reference(f[5]),
        mask_refs: if f[6].is_empty() { vec![] } else { f[6].split(',').map(str::to_string).collect() },
        total_pixels: f[7].parse().map_err(|_| format!("bad pixel count {:?}", f[7]))?,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Rebuilds the index from the log. Later lines for a key supersede earlier
/// ones; an unterminated final line is an interrupted write and is skipped.
/// Also returns the byte length covered by complete lines.
pub(super) fn replay(path: &Path) -> Result<(BTreeMap<RecordKey, CatalogRecord>, u64)> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((BTreeMap::new(), 0)),
        Err(source) => return Err(CatalogError::IoFailure { path: path.to_path_buf(), source }),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let text = std::str::from_utf8(&bytes[..complete])
        .map_err(|e| CatalogError::Corrupt { line: 0, message: format!("not UTF-8: {e}") })?;
    let mut records = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let r = parse_line(line).map_err(|message| CatalogError::Corrupt { line: i + 1, message })?;
        records.insert(r.key(), r);
    }
    Ok((records, complete as u64))
}
