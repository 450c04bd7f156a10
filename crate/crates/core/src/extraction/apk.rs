//! APK (ZIP) containers: every `classes.dex` / `classesN.dex` entry.

use std::fs::File;
use std::io::{BufReader, Read, Seek};
use std::path::Path;

use crate::opcodes::InstructionFormatTable;

use super::{dex, ExtractError, Extraction};

/// Multidex index of an entry name: 1 for `classes.dex`, N for `classesN.dex` (N >= 2).
pub fn dex_entry_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        return Some(1);
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok().filter(|&n| n >= 2)
}

/// Names of the DEX entries in numeric multidex order.
pub fn dex_entries<R: Read + Seek>(archive: &zip::ZipArchive<R>) -> Vec<String> {
    let mut entries: Vec<(u32, String)> = archive
        .file_names()
        .filter_map(|name| dex_entry_index(name).map(|n| (n, name.to_string())))
        .collect();
    entries.sort();
    entries.into_iter().map(|(_, name)| name).collect()
}

pub fn extract_from_apk(
    apk: &Path,
    table: &InstructionFormatTable,
) -> Result<Extraction, ExtractError> {
    let file = File::open(apk).map_err(|source| ExtractError::Io {
        path: apk.to_path_buf(),
        source,
    })?;
    let zip_err = |source| ExtractError::Zip {
        path: apk.to_path_buf(),
        source,
    };
    let mut archive = zip::ZipArchive::new(BufReader::new(file)).map_err(zip_err)?;
    let entries = dex_entries(&archive);
    if entries.is_empty() {
        return Err(ExtractError::NoDexEntries(apk.to_path_buf()));
    }

    let mut total = Extraction::default();
    let mut buf = Vec::new();
    for name in entries {
        buf.clear();
        archive
            .by_name(&name)
            .map_err(zip_err)?
            .read_to_end(&mut buf)
            .map_err(|source| ExtractError::Io {
                path: apk.join(&name),
                source,
            })?;
        let part = dex::extract_from_dex(&buf, table).map_err(|e| ExtractError::InEntry {
            entry: name.clone(),
            source: Box::new(e),
        })?;
        total.merge(&part);
    }
    Ok(total)
}
