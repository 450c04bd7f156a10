//! The single-byte Dalvik opcode table: mnemonic, instruction width and
//! whether the slot is defined.
//!
//! Widths are in 16-bit code units and follow the instruction formats of the
//! Dalvik bytecode reference (format `21c` is two units wide, `35c` three, and
//! so on). Unused slots are given width 1 (format `10x`) so a walker can step
//! over them.

use std::collections::HashMap;
use std::sync::OnceLock;

/// Number of opcode slots.
pub const OPCODE_COUNT: usize = 256;

/// First code unit of a packed-switch payload.
pub const PACKED_SWITCH_PAYLOAD: u16 = 0x0100;
/// First code unit of a sparse-switch payload.
pub const SPARSE_SWITCH_PAYLOAD: u16 = 0x0200;
/// First code unit of a fill-array-data payload.
pub const FILL_ARRAY_DATA_PAYLOAD: u16 = 0x0300;

// (first opcode, width, mnemonics...) runs; anything not listed is unused.
const RUNS: &[(u8, u8, &[&str])] = &[
    (0x00, 1, &["nop", "move"]),
    (0x02, 2, &["move/from16"]),
    (0x03, 3, &["move/16"]),
    (0x04, 1, &["move-wide"]),
    (0x05, 2, &["move-wide/from16"]),
    (0x06, 3, &["move-wide/16"]),
    (0x07, 1, &["move-object"]),
    (0x08, 2, &["move-object/from16"]),
    (0x09, 3, &["move-object/16"]),
    (
        0x0a,
        1,
        &[
            "move-result",
            "move-result-wide",
            "move-result-object",
            "move-exception",
            "return-void",
            "return",
            "return-wide",
            "return-object",
            "const/4",
        ],
    ),
    (0x13, 2, &["const/16"]),
    (0x14, 3, &["const"]),
    (0x15, 2, &["const/high16", "const-wide/16"]),
    (0x17, 3, &["const-wide/32"]),
    (0x18, 5, &["const-wide"]),
    (0x19, 2, &["const-wide/high16", "const-string"]),
    (0x1b, 3, &["const-string/jumbo"]),
    (0x1c, 2, &["const-class"]),
    (0x1d, 1, &["monitor-enter", "monitor-exit"]),
    (0x1f, 2, &["check-cast", "instance-of"]),
    (0x21, 1, &["array-length"]),
    (0x22, 2, &["new-instance", "new-array"]),
    (
        0x24,
        3,
        &[
            "filled-new-array",
            "filled-new-array/range",
            "fill-array-data",
        ],
    ),
    (0x27, 1, &["throw", "goto"]),
    (0x29, 2, &["goto/16"]),
    (0x2a, 3, &["goto/32", "packed-switch", "sparse-switch"]),
    (
        0x2d,
        2,
        &[
            "cmpl-float",
            "cmpg-float",
            "cmpl-double",
            "cmpg-double",
            "cmp-long",
            "if-eq",
            "if-ne",
            "if-lt",
            "if-ge",
            "if-gt",
            "if-le",
            "if-eqz",
            "if-nez",
            "if-ltz",
            "if-gez",
            "if-gtz",
            "if-lez",
        ],
    ),
    (
        0x44,
        2,
        &[
            "aget",
            "aget-wide",
            "aget-object",
            "aget-boolean",
            "aget-byte",
            "aget-char",
            "aget-short",
            "aput",
            "aput-wide",
            "aput-object",
            "aput-boolean",
            "aput-byte",
            "aput-char",
            "aput-short",
            "iget",
            "iget-wide",
            "iget-object",
            "iget-boolean",
            "iget-byte",
            "iget-char",
            "iget-short",
            "iput",
            "iput-wide",
            "iput-object",
            "iput-boolean",
            "iput-byte",
            "iput-char",
            "iput-short",
            "sget",
            "sget-wide",
            "sget-object",
            "sget-boolean",
            "sget-byte",
            "sget-char",
            "sget-short",
            "sput",
            "sput-wide",
            "sput-object",
            "sput-boolean",
            "sput-byte",
            "sput-char",
            "sput-short",
        ],
    ),
    (
        0x6e,
        3,
        &[
            "invoke-virtual",
            "invoke-super",
            "invoke-direct",
            "invoke-static",
            "invoke-interface",
        ],
    ),
    (
        0x74,
        3,
        &[
            "invoke-virtual/range",
            "invoke-super/range",
            "invoke-direct/range",
            "invoke-static/range",
            "invoke-interface/range",
        ],
    ),
    (
        0x7b,
        1,
        &[
            "neg-int",
            "not-int",
            "neg-long",
            "not-long",
            "neg-float",
            "neg-double",
            "int-to-long",
            "int-to-float",
            "int-to-double",
            "long-to-int",
            "long-to-float",
            "long-to-double",
            "float-to-int",
            "float-to-long",
            "float-to-double",
            "double-to-int",
            "double-to-long",
            "double-to-float",
            "int-to-byte",
            "int-to-char",
            "int-to-short",
        ],
    ),
    (0x90, 2, BINOPS),
    (0xd0, 2, LIT16_OPS),
    (0xd8, 2, LIT8_OPS),
    (0xfa, 4, &["invoke-polymorphic", "invoke-polymorphic/range"]),
    (0xfc, 3, &["invoke-custom", "invoke-custom/range"]),
    (0xfe, 2, &["const-method-handle", "const-method-type"]),
];

const BINOPS: &[&str] = &[
    "add-int",
    "sub-int",
    "mul-int",
    "div-int",
    "rem-int",
    "and-int",
    "or-int",
    "xor-int",
    "shl-int",
    "shr-int",
    "ushr-int",
    "add-long",
    "sub-long",
    "mul-long",
    "div-long",
    "rem-long",
    "and-long",
    "or-long",
    "xor-long",
    "shl-long",
    "shr-long",
    "ushr-long",
    "add-float",
    "sub-float",
    "mul-float",
    "div-float",
    "rem-float",
    "add-double",
    "sub-double",
    "mul-double",
    "div-double",
    "rem-double",
];

const LIT16_OPS: &[&str] = &[
    "add-int/lit16",
    "rsub-int",
    "mul-int/lit16",
    "div-int/lit16",
    "rem-int/lit16",
    "and-int/lit16",
    "or-int/lit16",
    "xor-int/lit16",
];

const LIT8_OPS: &[&str] = &[
    "add-int/lit8",
    "rsub-int/lit8",
    "mul-int/lit8",
    "div-int/lit8",
    "rem-int/lit8",
    "and-int/lit8",
    "or-int/lit8",
    "xor-int/lit8",
    "shl-int/lit8",
    "shr-int/lit8",
    "ushr-int/lit8",
];

/// Width, mnemonic and validity for each of the 256 opcode slots.
///
/// Immutable once built; share it freely across threads.
#[derive(Debug, Clone)]
pub struct InstructionFormatTable {
    widths: [u8; OPCODE_COUNT],
    mnemonics: [String; OPCODE_COUNT],
    valid: [bool; OPCODE_COUNT],
    by_mnemonic: HashMap<String, u8>,
}

impl InstructionFormatTable {
    /// The standard table covering DEX versions 035 through 039.
    pub fn dalvik() -> Self {
        let mut widths = [1u8; OPCODE_COUNT];
        let mut mnemonics: [String; OPCODE_COUNT] = std::array::from_fn(|op| unused_name(op as u8));
        let mut valid = [false; OPCODE_COUNT];

        for &(first, width, names) in RUNS {
            for (i, name) in names.iter().enumerate() {
                let op = first as usize + i;
                widths[op] = width;
                mnemonics[op] = (*name).to_string();
                valid[op] = true;
            }
        }
        // the /2addr block mirrors the binop names one-for-one
        for (i, name) in BINOPS.iter().enumerate() {
            let op = 0xb0 + i;
            widths[op] = 1;
            mnemonics[op] = format!("{name}/2addr");
            valid[op] = true;
        }

        let by_mnemonic = (0..OPCODE_COUNT)
            .filter(|&op| valid[op])
            .map(|op| (mnemonics[op].clone(), op as u8))
            .collect();

        Self {
            widths,
            mnemonics,
            valid,
            by_mnemonic,
        }
    }

    /// A lazily built process-wide instance of [`InstructionFormatTable::dalvik`].
    pub fn shared() -> &'static Self {
        static TABLE: OnceLock<InstructionFormatTable> = OnceLock::new();
        TABLE.get_or_init(Self::dalvik)
    }

    /// Instruction length in 16-bit code units.
    pub fn width(&self, opcode: u8) -> usize {
        self.widths[opcode as usize] as usize
    }

    pub fn mnemonic(&self, opcode: u8) -> &str {
        &self.mnemonics[opcode as usize]
    }

    pub fn is_defined(&self, opcode: u8) -> bool {
        self.valid[opcode as usize]
    }

    /// Opcode for a smali mnemonic; `None` for unknown tokens and unused slots.
    pub fn lookup(&self, mnemonic: &str) -> Option<u8> {
        self.by_mnemonic.get(mnemonic).copied()
    }

    pub fn defined_opcodes(&self) -> impl Iterator<Item = u8> + '_ {
        (0..=255u8).filter(move |&op| self.is_defined(op))
    }
}

impl Default for InstructionFormatTable {
    fn default() -> Self {
        Self::dalvik()
    }
}

fn unused_name(op: u8) -> String {
    format!("unused-{op:02x}")
}
