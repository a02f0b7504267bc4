use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gold::GoldRecord;
use crate::{Error, Result};

pub const DEFAULT_SPLIT_FRACTIONS: [f64; 3] = [0.90, 0.055, 0.045];

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<GoldRecord>,
    pub val: Vec<GoldRecord>,
    pub test: Vec<GoldRecord>,
}

impl Split {
    pub fn parts(&self) -> [&[GoldRecord]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Patient counts per split by the largest-remainder rule, every split
/// receiving at least one patient.
fn allocate(n: usize, fractions: &[f64; 3]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    // stable on ties: earlier split wins
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    // an empty split is useless; take from the largest
    for k in 0..3 {
        if counts[k] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).unwrap();
            counts[donor] -= 1;
            counts[k] += 1;
        }
    }
    counts
}

/// Splits records into train/val/test so that all windows of one patient
/// land in the same part. Patients are shuffled with `seed` before allocation.
pub fn split_by_patient(records: &[GoldRecord], fractions: [f64; 3], seed: u64) -> Result<Split> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0)
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-6
    {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be non-negative and sum to 1"
        )));
    }
    let patients: BTreeSet<u32> = records.iter().map(|r| r.window_id.patient).collect();
    if patients.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 patients to split, got {}",
            patients.len()
        )));
    }
    let mut ids: Vec<u32> = patients.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let counts = allocate(ids.len(), &fractions);
    let mut part_of = std::collections::HashMap::new();
    let mut it = ids.into_iter();
    for (k, &c) in counts.iter().enumerate() {
        for p in it.by_ref().take(c) {
            part_of.insert(p, k);
        }
    }
    let mut out = Split::default();
    for r in records {
        match part_of[&r.window_id.patient] {
            0 => out.train.push(r.clone()),
            1 => out.val.push(r.clone()),
            _ => out.test.push(r.clone()),
        }
    }
    Ok(out)
}
