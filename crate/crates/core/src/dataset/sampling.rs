use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::labels::Maneuver;
use super::windows::{SampleSet, VehicleKey};
use crate::rng::{rng_from, TAG_BALANCE, TAG_FOLDS, TAG_UNDERSAMPLE};
use crate::{Error, Result, MAX_TTLC};

/// Keeps every sample whose true TTLC lies inside the 7 s horizon and a
/// uniformly random `floor(n / 3)` of the lane-following ones. Original
/// sample order is preserved.
pub fn undersample_flw(set: &SampleSet, seed: u64) -> SampleSet {
    let flw: Vec<usize> = (0..set.len())
        .filter(|&i| set.samples()[i].maneuver(MAX_TTLC) == Maneuver::Flw)
        .collect();
    let mut chosen = flw.clone();
    chosen.shuffle(&mut rng_from(seed, &[TAG_UNDERSAMPLE]));
    chosen.truncate(flw.len() / 3);
    let mut keep = vec![true; set.len()];
    for &i in &flw {
        keep[i] = false;
    }
    for &i in &chosen {
        keep[i] = true;
    }
    let idx: Vec<usize> = (0..set.len()).filter(|&i| keep[i]).collect();
    set.subset(&idx)
}

/// Fold index per vehicle. Vehicles are shuffled and dealt round-robin, so
/// fold vehicle counts differ by at most one.
pub fn assign_vehicle_folds(keys: &[VehicleKey], k: usize, seed: u64) -> Result<BTreeMap<VehicleKey, usize>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    let mut uniq = keys.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() < k {
        return Err(Error::config(format!("{} vehicles cannot fill {k} folds", uniq.len())));
    }
    uniq.shuffle(&mut rng_from(seed, &[TAG_FOLDS]));
    Ok(uniq.into_iter().enumerate().map(|(i, key)| (key, i % k)).collect())
}

/// Sample indices of each fold; all windows of one vehicle share a fold.
pub fn split_folds(set: &SampleSet, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let keys: Vec<_> = set.samples().iter().map(|s| s.key()).collect();
    let assignment = assign_vehicle_folds(&keys, k, seed)?;
    Ok(folds_from_assignment(set, &assignment, k))
}

pub fn folds_from_assignment(set: &SampleSet, assignment: &BTreeMap<VehicleKey, usize>, k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for (i, s) in set.samples().iter().enumerate() {
        if let Some(&f) = assignment.get(&s.key()) {
            folds[f].push(i);
        }
    }
    folds
}

/// Downsamples each single-label class (at `horizon`) to the size of the
/// rarest one. Original sample order is preserved.
pub fn balance_by_maneuver(set: &SampleSet, horizon: f64, seed: u64) -> Result<SampleSet> {
    let mut by_class: [Vec<usize>; 3] = Default::default();
    for (i, s) in set.samples().iter().enumerate() {
        by_class[s.maneuver(horizon).index()].push(i);
    }
    let n = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if n == 0 {
        let counts: Vec<_> = by_class.iter().map(Vec::len).collect();
        return Err(Error::config(format!("cannot balance with an empty class, counts {counts:?}")));
    }
    let mut idx = Vec::with_capacity(3 * n);
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng_from(seed, &[TAG_BALANCE, c as u64]));
        idx.extend_from_slice(&members[..n]);
    }
    idx.sort_unstable();
    Ok(set.subset(&idx))
}
