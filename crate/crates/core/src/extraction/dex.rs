//! Native DEX walker: class_defs -> class_data -> code_item -> insns.

use crate::histogram::OpcodeHistogram;
use crate::opcodes::{
    InstructionFormatTable, FILL_ARRAY_DATA_PAYLOAD, PACKED_SWITCH_PAYLOAD, SPARSE_SWITCH_PAYLOAD,
};

use super::{Diagnostics, ExtractError, Extraction};

const HEADER_SIZE: usize = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const CLASS_DEF_SIZE: usize = 32;
const CODE_ITEM_HEADER: usize = 16;

/// Lowest and highest accepted `dex\n0NN\0` version numbers.
pub const MIN_VERSION: u32 = 35;
pub const MAX_VERSION: u32 = 39;

/// Returns the three-digit version if `bytes` starts with a DEX magic of any version.
pub fn dex_magic_version(bytes: &[u8]) -> Option<u32> {
    if bytes.len() < 8 || &bytes[..4] != b"dex\n" || bytes[7] != 0 {
        return None;
    }
    let digits = &bytes[4..7];
    if !digits.iter().all(u8::is_ascii_digit) {
        return None;
    }
    Some(
        digits
            .iter()
            .fold(0, |acc, d| acc * 10 + u32::from(d - b'0')),
    )
}

fn malformed(offset: usize, reason: impl Into<String>) -> ExtractError {
    ExtractError::MalformedDex {
        offset,
        reason: reason.into(),
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn at(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos }
    }

    fn uleb128(&mut self) -> Option<u32> {
        let mut result: u32 = 0;
        for i in 0..5 {
            let byte = *self.data.get(self.pos)?;
            self.pos += 1;
            result |= u32::from(byte & 0x7f) << (7 * i);
            if byte & 0x80 == 0 {
                return Some(result);
            }
        }
        None
    }
}

fn read_u32(data: &[u8], off: usize) -> Option<u32> {
    let b = data.get(off..off.checked_add(4)?)?;
    Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Counts every instruction of every method reachable from `class_defs`.
///
/// A code_item referenced by several methods is walked once per reference,
/// matching a per-method smali dump.
pub fn extract_from_dex(
    bytes: &[u8],
    table: &InstructionFormatTable,
) -> Result<Extraction, ExtractError> {
    let version = dex_magic_version(bytes).ok_or_else(|| malformed(0, "missing DEX magic"))?;
    if !(MIN_VERSION..=MAX_VERSION).contains(&version) {
        return Err(malformed(
            0,
            format!("unsupported DEX version {version:03}"),
        ));
    }
    if bytes.len() < HEADER_SIZE {
        return Err(malformed(0, "truncated header"));
    }
    let header_u32 = |off| read_u32(bytes, off).expect("header length checked");

    let file_size = header_u32(0x20) as usize;
    if file_size < HEADER_SIZE || file_size > bytes.len() {
        return Err(malformed(
            0x20,
            format!("file_size {file_size} out of bounds"),
        ));
    }
    let data = &bytes[..file_size];
    if header_u32(0x28) != ENDIAN_CONSTANT {
        return Err(malformed(0x28, "unsupported endian tag"));
    }
    let map_off = header_u32(0x34) as usize;
    if map_off != 0 && map_off >= file_size {
        return Err(malformed(
            0x34,
            format!("map_off {map_off:#x} out of bounds"),
        ));
    }

    let class_defs_size = header_u32(0x60) as usize;
    let class_defs_off = header_u32(0x64) as usize;
    let defs_end = class_defs_size
        .checked_mul(CLASS_DEF_SIZE)
        .and_then(|len| len.checked_add(class_defs_off));
    if class_defs_size > 0 && defs_end.is_none_or(|end| end > file_size) {
        return Err(malformed(0x64, "class_defs out of bounds"));
    }

    let mut histogram = OpcodeHistogram::new("");
    let mut diagnostics = Diagnostics::default();
    let mut units = Vec::new();

    for i in 0..class_defs_size {
        let def_off = class_defs_off + i * CLASS_DEF_SIZE;
        let class_data_off =
            read_u32(data, def_off + 24).expect("class_defs bounds checked") as usize;
        if class_data_off == 0 {
            continue;
        }
        for code_off in method_code_offsets(data, class_data_off)? {
            load_insns(data, code_off, &mut units)?;
            walk_insns(&units, code_off, table, &mut histogram, &mut diagnostics)?;
            diagnostics.methods += 1;
        }
    }

    Ok(Extraction {
        histogram,
        diagnostics,
    })
}

/// Non-zero code offsets of the direct and virtual methods in a class_data_item.
fn method_code_offsets(data: &[u8], class_data_off: usize) -> Result<Vec<usize>, ExtractError> {
    if class_data_off >= data.len() {
        return Err(malformed(class_data_off, "class_data_off out of bounds"));
    }
    let truncated = || malformed(class_data_off, "truncated class_data_item");
    let mut cur = Cursor::at(data, class_data_off);
    let static_fields = cur.uleb128().ok_or_else(truncated)?;
    let instance_fields = cur.uleb128().ok_or_else(truncated)?;
    let direct_methods = cur.uleb128().ok_or_else(truncated)?;
    let virtual_methods = cur.uleb128().ok_or_else(truncated)?;

    for _ in 0..u64::from(static_fields) + u64::from(instance_fields) {
        cur.uleb128().ok_or_else(truncated)?; // field_idx_diff
        cur.uleb128().ok_or_else(truncated)?; // access_flags
    }
    let mut offsets = Vec::new();
    for _ in 0..u64::from(direct_methods) + u64::from(virtual_methods) {
        cur.uleb128().ok_or_else(truncated)?; // method_idx_diff
        cur.uleb128().ok_or_else(truncated)?; // access_flags
        let code_off = cur.uleb128().ok_or_else(truncated)? as usize;
        if code_off != 0 {
            offsets.push(code_off);
        }
    }
    Ok(offsets)
}

fn load_insns(data: &[u8], code_off: usize, units: &mut Vec<u16>) -> Result<(), ExtractError> {
    let insns_size = read_u32(data, code_off + 12)
        .filter(|_| code_off + CODE_ITEM_HEADER <= data.len())
        .ok_or_else(|| malformed(code_off, "code_item out of bounds"))?
        as usize;
    let start = code_off + CODE_ITEM_HEADER;
    let end = insns_size
        .checked_mul(2)
        .and_then(|len| len.checked_add(start))
        .filter(|&end| end <= data.len())
        .ok_or_else(|| malformed(code_off, format!("truncated insns ({insns_size} units)")))?;
    units.clear();
    units.extend(
        data[start..end]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]])),
    );
    Ok(())
}

/// Length in code units of the payload starting at `pc`, or `None` if the
/// unit there is not a payload identifier.
fn payload_len(units: &[u16], pc: usize) -> Option<Result<usize, ()>> {
    let ident = units[pc];
    let unit = |i: usize| units.get(pc + i).copied().map(u64::from);
    let len = match ident {
        PACKED_SWITCH_PAYLOAD => unit(1).map(|size| 4 + 2 * size),
        SPARSE_SWITCH_PAYLOAD => unit(1).map(|size| 2 + 4 * size),
        FILL_ARRAY_DATA_PAYLOAD => (|| {
            let width = unit(1)?;
            let size = unit(2)? | (unit(3)? << 16);
            Some(4 + (size * width).div_ceil(2))
        })(),
        _ => return None,
    };
    Some(len.map(|l| l as usize).ok_or(()))
}

/// Walks one insns array, visiting each code unit at most once and stopping
/// exactly at its end.
pub(crate) fn walk_insns(
    units: &[u16],
    code_off: usize,
    table: &InstructionFormatTable,
    histogram: &mut OpcodeHistogram,
    diagnostics: &mut Diagnostics,
) -> Result<(), ExtractError> {
    let n = units.len();
    let mut pc = 0;
    while pc < n {
        if let Some(len) = payload_len(units, pc) {
            let len =
                len.map_err(|_| malformed(code_off, format!("truncated payload at unit {pc}")))?;
            if len > n - pc {
                return Err(malformed(
                    code_off,
                    format!("payload at unit {pc} overruns insns"),
                ));
            }
            diagnostics.payloads += 1;
            pc += len;
            continue;
        }

        let opcode = (units[pc] & 0xff) as u8;
        let width = table.width(opcode);
        if width > n - pc {
            return Err(malformed(
                code_off,
                format!("{} at unit {pc} overruns insns", table.mnemonic(opcode)),
            ));
        }
        if !table.is_defined(opcode) {
            log::warn!("undefined opcode {opcode:#04x} in code_item {code_off:#x} at unit {pc}");
            *diagnostics.unknown_opcodes.entry(opcode).or_default() += 1;
        }
        histogram.record(opcode);
        pc += width;
    }
    Ok(())
}
