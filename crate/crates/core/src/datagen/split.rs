use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatagenError;
use crate::model::{QuestionRecord, Split};

/// Assigns whole `base_id` families to train or test.
///
/// Families are sorted by id, shuffled with a generator seeded by `rng_seed`,
/// and the first `round(ratio * families)` go to train.
pub fn split_dataset(
    mut records: Vec<QuestionRecord>,
    ratio: f64,
    rng_seed: u64,
) -> Result<Vec<QuestionRecord>, DatagenError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatagenError::InvalidConfig(format!(
            "split ratio {ratio} must lie strictly between 0 and 1"
        )));
    }
    if let Some(r) = records.iter().find(|r| r.split != Split::Unassigned) {
        return Err(DatagenError::InvalidConfig(format!(
            "record {} already has a split assigned",
            r.id
        )));
    }
    let mut families: Vec<&str> = records
        .iter()
        .map(|r| r.base_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    families.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let train_families = (ratio * families.len() as f64).round() as usize;
    let assignment: BTreeMap<String, Split> = families
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let split = if i < train_families {
                Split::Train
            } else {
                Split::Test
            };
            (f.to_string(), split)
        })
        .collect();
    for r in &mut records {
        r.split = assignment[&r.base_id];
    }
    Ok(records)
}
