//! Per-app opcode occurrence counts and their CSV record format.

use std::io::{Read, Write};
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::opcodes::OPCODE_COUNT;

/// Occurrence counts of every opcode byte value in one app.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpcodeHistogram {
    pub app_id: String,
    #[serde(with = "counts_serde")]
    counts: [u64; OPCODE_COUNT],
    total: u64,
}

impl OpcodeHistogram {
    pub fn new(app_id: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            counts: [0; OPCODE_COUNT],
            total: 0,
        }
    }

    pub fn from_counts(app_id: impl Into<String>, counts: [u64; OPCODE_COUNT]) -> Self {
        let total = counts.iter().sum();
        Self {
            app_id: app_id.into(),
            counts,
            total,
        }
    }

    #[inline]
    pub fn record(&mut self, opcode: u8) {
        self.counts[opcode as usize] += 1;
        self.total += 1;
    }

    pub fn count(&self, opcode: u8) -> u64 {
        self.counts[opcode as usize]
    }

    pub fn counts(&self) -> &[u64; OPCODE_COUNT] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Share of `opcode` among all instructions, 0 for an empty histogram.
    pub fn relative(&self, opcode: u8) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[opcode as usize] as f64 / self.total as f64
        }
    }
}

impl AddAssign<&OpcodeHistogram> for OpcodeHistogram {
    fn add_assign(&mut self, rhs: &OpcodeHistogram) {
        for (a, b) in self.counts.iter_mut().zip(rhs.counts.iter()) {
            *a += b;
        }
        self.total += rhs.total;
    }
}

mod counts_serde {
    use super::OPCODE_COUNT;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(counts: &[u64; OPCODE_COUNT], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(counts.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u64; OPCODE_COUNT], D::Error> {
        let v = Vec::<u64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<u64>| serde::de::Error::invalid_length(v.len(), &"256 counts"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected histogram header: {0}")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
}

/// Column names of a histogram record: `app_id,label,op_00..op_ff,total`.
pub fn record_header() -> Vec<String> {
    let mut cols = Vec::with_capacity(OPCODE_COUNT + 3);
    cols.push("app_id".to_string());
    cols.push("label".to_string());
    cols.extend((0..OPCODE_COUNT).map(|op| format!("op_{op:02x}")));
    cols.push("total".to_string());
    cols
}

/// Writes histogram records; a missing label is written as an empty field.
pub fn write_records<'a, W, I>(writer: W, records: I) -> Result<(), RecordError>
where
    W: Write,
    I: IntoIterator<Item = (&'a OpcodeHistogram, Option<Label>)>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(record_header())?;
    let mut row: Vec<String> = Vec::with_capacity(OPCODE_COUNT + 3);
    for (h, label) in records {
        row.clear();
        row.push(h.app_id.clone());
        row.push(label.map(|l| l.as_str().to_string()).unwrap_or_default());
        row.extend(h.counts.iter().map(u64::to_string));
        row.push(h.total.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads histogram records. Lines starting with `#` are treated as comments.
pub fn read_records<R: Read>(
    reader: R,
) -> Result<Vec<(OpcodeHistogram, Option<Label>)>, RecordError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = r.headers()?.clone();
    let expected = record_header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(RecordError::BadHeader(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }

    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| RecordError::BadRow { line, message };

        let app_id = rec[0].to_string();
        let label = match rec[1].trim() {
            "" => None,
            s => Some(s.parse::<Label>().map_err(|e| bad(e.to_string()))?),
        };
        let mut counts = [0u64; OPCODE_COUNT];
        for (op, slot) in counts.iter_mut().enumerate() {
            let field = &rec[op + 2];
            *slot = field
                .parse()
                .map_err(|_| bad(format!("op_{op:02x}: not a count: {field:?}")))?;
        }
        let total: u64 = rec[OPCODE_COUNT + 2]
            .parse()
            .map_err(|_| bad("total: not a count".to_string()))?;
        let h = OpcodeHistogram::from_counts(app_id, counts);
        if h.total != total {
            return Err(bad(format!("total {total} != sum of counts {}", h.total)));
        }
        out.push((h, label));
    }
    Ok(out)
}
