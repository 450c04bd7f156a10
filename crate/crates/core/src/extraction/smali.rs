//! Mnemonic counting over smali text, one class per `.smali` file.

use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::histogram::OpcodeHistogram;
use crate::opcodes::InstructionFormatTable;

use super::{Diagnostics, ExtractError, Extraction};

/// All `.smali` files under `dir`, recursively, in file-name order.
pub fn smali_files(dir: &Path) -> Result<Vec<PathBuf>, ExtractError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ExtractError::Io {
            path: e.path().unwrap_or(dir).to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|ext| ext == "smali")
        {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

pub fn extract_from_smali(
    dir: &Path,
    table: &InstructionFormatTable,
) -> Result<Extraction, ExtractError> {
    let files = smali_files(dir)?;
    if files.is_empty() {
        return Err(ExtractError::NoSmaliFiles(dir.to_path_buf()));
    }
    let mut histogram = OpcodeHistogram::new("");
    let mut diagnostics = Diagnostics::default();
    for path in &files {
        let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
            path: path.clone(),
            source,
        })?;
        count_smali_text(&text, table, &mut histogram, &mut diagnostics);
    }
    Ok(Extraction {
        histogram,
        diagnostics,
    })
}

/// Counts the leading mnemonic of every instruction line in `text`.
///
/// Directives (`.`), labels (`:`) and comments (`#`) are skipped. Any other
/// leading token that is not a known mnemonic goes to the diagnostics tally.
pub fn count_smali_text(
    text: &str,
    table: &InstructionFormatTable,
    histogram: &mut OpcodeHistogram,
    diagnostics: &mut Diagnostics,
) {
    for line in text.lines() {
        let Some(token) = line.split_whitespace().next() else {
            continue;
        };
        if token.starts_with(['.', ':', '#']) {
            continue;
        }
        match table.lookup(token) {
            Some(op) => histogram.record(op),
            None => {
                *diagnostics
                    .unmatched_tokens
                    .entry(token.to_string())
                    .or_default() += 1
            }
        }
    }
}
