#![allow(dead_code)]

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Names of every DEX fixture, sorted.
pub fn dex_fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures().join("dex"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "dex"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

pub fn dex_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixtures().join("dex").join(format!("{name}.dex"))).unwrap()
}

pub fn smali_dir(name: &str) -> PathBuf {
    fixtures().join("smali").join(name)
}

/// Opcode counts read off a reference disassembler listing: one
/// `<opcode value> <name>` line per instruction. Values above 0xff are
/// payload tables and are not instructions.
pub fn listing_counts(name: &str) -> [u64; 256] {
    let text =
        std::fs::read_to_string(fixtures().join("listings").join(format!("{name}.txt"))).unwrap();
    let mut counts = [0u64; 256];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (value, mnemonic) = line.split_once(' ').unwrap();
        let value = u32::from_str_radix(value.trim_start_matches("0x"), 16).unwrap();
        if value > 0xff {
            assert!(mnemonic.ends_with("-payload"), "{line}");
            continue;
        }
        counts[value as usize] += 1;
    }
    counts
}

/// Writes a stored (uncompressed) or deflated ZIP with the given entries.
pub fn write_zip(path: &Path, entries: &[(&str, &[u8])]) {
    let file = File::create(path).unwrap();
    let mut zip = zip::ZipWriter::new(file);
    for (i, (name, data)) in entries.iter().enumerate() {
        let method = if i % 2 == 0 {
            zip::CompressionMethod::Deflated
        } else {
            zip::CompressionMethod::Stored
        };
        let options = zip::write::SimpleFileOptions::default().compression_method(method);
        zip.start_file(*name, options).unwrap();
        zip.write_all(data).unwrap();
    }
    zip.finish().unwrap();
}
