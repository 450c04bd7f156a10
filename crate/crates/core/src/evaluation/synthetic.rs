//! Synthetic labeled corpora with known discriminative opcodes.
//!
//! Both classes share a log-normal base profile over the defined opcodes.
//! Each class then gets extra weight on its own set of planted opcodes,
//! scaled by `separation`. Every app perturbs its class profile with
//! log-normal noise, draws a uniform length, and samples its counts as a
//! multinomial.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal};

use super::EvaluationError;
use crate::corpus::{LabeledHistogram, LabeledHistogramSet, Provenance};
use crate::histogram::OpcodeHistogram;
use crate::label::Label;
use crate::opcodes::{InstructionFormatTable, OPCODE_COUNT};

/// Planted opcodes per class.
pub const PLANTED_PER_CLASS: usize = 10;
/// Extra weight of a planted opcode at separation 1, in units of the mean
/// base weight.
const BOOST: f64 = 1.5;
/// Log-scale spread of each app's private perturbation of its class profile.
const APP_JITTER: f64 = 0.7;
const MIN_LENGTH: u64 = 1500;
const MAX_LENGTH: u64 = 3500;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub set: LabeledHistogramSet,
    /// Opcodes boosted for malware.
    pub malware_planted: Vec<u8>,
    /// Opcodes boosted for benign apps.
    pub benign_planted: Vec<u8>,
}

impl SyntheticCorpus {
    /// Every planted opcode, sorted.
    pub fn discriminative(&self) -> Vec<u8> {
        let mut all = [self.malware_planted.clone(), self.benign_planted.clone()].concat();
        all.sort_unstable();
        all
    }
}

/// Multinomial draw as a chain of conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64; OPCODE_COUNT]) -> [u64; OPCODE_COUNT] {
    let mut out = [0u64; OPCODE_COUNT];
    let mut left = n;
    let mut mass = 1.0f64;
    for (op, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        out[op] = k;
        left -= k;
        mass -= p;
    }
    // rounding can leave a few draws over; give them to the last opcode used
    if left > 0 {
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        out[last] += left;
    }
    out
}

pub fn generate_synthetic_corpus(
    n_benign: usize,
    n_malware: usize,
    separation: f64,
    seed: u64,
) -> Result<SyntheticCorpus, EvaluationError> {
    if n_benign == 0 || n_malware == 0 {
        return Err(EvaluationError::InvalidParam(
            "both classes need at least one app".into(),
        ));
    }
    if !(0.0..=1.0).contains(&separation) {
        return Err(EvaluationError::InvalidParam(format!(
            "separation must lie in [0, 1], got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let defined: Vec<u8> = InstructionFormatTable::shared().defined_opcodes().collect();

    let lognormal = LogNormal::new(0.0, 1.0).expect("valid parameters");
    let mut base = [0f64; OPCODE_COUNT];
    for &op in &defined {
        base[op as usize] = lognormal.sample(&mut rng);
    }
    let mean_w = base.iter().sum::<f64>() / defined.len() as f64;

    let mut chosen: Vec<u8> = defined
        .choose_multiple(&mut rng, 2 * PLANTED_PER_CLASS)
        .copied()
        .collect();
    let mut benign_planted = chosen.split_off(PLANTED_PER_CLASS);
    let mut malware_planted = chosen;
    malware_planted.sort_unstable();
    benign_planted.sort_unstable();

    let profile = |planted: &[u8]| {
        let mut w = base;
        for &op in planted {
            w[op as usize] += separation * BOOST * mean_w;
        }
        w
    };
    let profiles = [profile(&benign_planted), profile(&malware_planted)];

    let jitter = LogNormal::new(0.0, APP_JITTER).expect("valid parameters");
    let mut rows = Vec::with_capacity(n_benign + n_malware);
    for (label, n) in [(Label::Benign, n_benign), (Label::Malware, n_malware)] {
        for i in 0..n {
            let mut w = profiles[label.index()];
            for v in w.iter_mut().filter(|v| **v > 0.0) {
                *v *= jitter.sample(&mut rng);
            }
            let z: f64 = w.iter().sum();
            let probs = w.map(|v| v / z);
            let length = rng.gen_range(MIN_LENGTH..=MAX_LENGTH);
            let counts = multinomial(&mut rng, length, &probs);
            rows.push(LabeledHistogram {
                histogram: OpcodeHistogram::from_counts(format!("synth-{label}-{i:05}"), counts),
                label,
            });
        }
    }

    let provenance = Provenance {
        manifest_checksum: format!(
            "synthetic:benign={n_benign},malware={n_malware},separation={separation},seed={seed}"
        ),
        extraction_config: "synthetic".into(),
    };
    Ok(SyntheticCorpus {
        set: LabeledHistogramSet::new(rows, provenance),
        malware_planted,
        benign_planted,
    })
}
