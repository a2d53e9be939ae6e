use std::path::Path;

use serde::Serialize;
use vocscreen::data::{load_dataset, Dataset, RoleConfig, Schema};

use crate::Failure;

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(vocscreen::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes a header and string rows as CSV.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(vocscreen::Error::from)?;
    w.write_record(header).map_err(vocscreen::Error::from)?;
    for row in rows {
        w.write_record(&row).map_err(vocscreen::Error::from)?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

pub fn load_roles(path: &Path) -> Result<RoleConfig, Failure> {
    Ok(RoleConfig::load(path)?)
}

pub fn load_data(path: &Path, id: &str) -> Result<Dataset, Failure> {
    let schema = Schema::infer(path, id)?;
    Ok(load_dataset(path, &schema)?)
}

pub fn num(x: f64) -> String {
    vocscreen::data::format_number(x)
}
