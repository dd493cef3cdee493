use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::area::AcceptedArea;
use super::qualification::check_clicks;
use super::{ErrorCode, ProtocolError};
use crate::evaluation::ManifestEntry;
use crate::geometry::{ExtremeClicks, Role};

/// Images per batch, golden included.
pub const BATCH_SIZE: usize = 10;

/// Nine task images and one hidden golden image, all of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub class: String,
    pub items: Vec<ManifestEntry>,
    pub golden_index: usize,
}

impl Batch {
    pub fn golden(&self) -> &ManifestEntry {
        &self.items[self.golden_index]
    }
}

/// Takes the first nine entries of `pool` and inserts a golden entry of the
/// same class at a position drawn uniformly under `seed`. The golden entry
/// is also drawn under `seed`, among `golden_pool` entries of that class.
pub fn build_batch(pool: &[ManifestEntry], golden_pool: &[ManifestEntry], seed: u64) -> Result<Batch, ProtocolError> {
    let tasks = BATCH_SIZE - 1;
    if pool.len() < tasks {
        return Err(ProtocolError::new(
            ErrorCode::InsufficientPool,
            format!("need {tasks} task images, have {}", pool.len()),
        ));
    }
    let class = pool[0].class.clone();
    if let Some(other) = pool[..tasks].iter().find(|e| e.class != class) {
        return Err(ProtocolError::new(
            ErrorCode::MixedClass,
            format!("batch mixes classes {class:?} and {:?}", other.class),
        ));
    }
    let candidates: Vec<&ManifestEntry> = golden_pool.iter().filter(|g| g.class == class).collect();
    if candidates.is_empty() {
        return Err(ProtocolError::new(
            ErrorCode::InsufficientPool,
            format!("no golden image of class {class:?}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = candidates[rng.random_range(0..candidates.len())].clone();
    let golden_index = rng.random_range(0..BATCH_SIZE);
    let mut items: Vec<ManifestEntry> = pool[..tasks].to_vec();
    items.insert(golden_index, golden);
    Ok(Batch {
        class,
        items,
        golden_index,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Accepted,
    /// The golden clicks for these roles missed their areas.
    Blocked { failed: Vec<Role> },
}

/// Accepted iff all four golden clicks fall inside their areas. Every image
/// needs clicks.
pub fn submit_batch(
    batch: &Batch,
    clicks: &[Option<ExtremeClicks>],
    golden_areas: &[AcceptedArea; 4],
) -> Result<SubmitOutcome, ProtocolError> {
    let missing: Vec<usize> = (0..batch.items.len()).filter(|&i| clicks.get(i).is_none_or(Option::is_none)).collect();
    if !missing.is_empty() {
        return Err(ProtocolError::new(ErrorCode::Incomplete, format!("no clicks for batch positions {missing:?}")));
    }
    let golden = clicks[batch.golden_index].as_ref().expect("checked above");
    let checks = check_clicks(golden, golden_areas);
    let failed: Vec<Role> = Role::ALL.into_iter().filter(|r| !checks[*r as usize].accepted()).collect();
    Ok(if failed.is_empty() {
        SubmitOutcome::Accepted
    } else {
        SubmitOutcome::Blocked { failed }
    })
}
