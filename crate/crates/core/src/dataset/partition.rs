//! Moving-partition validation: the time-ordered sequence is cut into
//! contiguous parts and a window of parts slides forward one part per round,
//! training on all but the last part of the window and testing on the last.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DatasetError, UserPostSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub parts: usize,
    pub window: usize,
    pub rounds: usize,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            parts: 14,
            window: 10,
            rounds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRound {
    /// 1-based.
    pub round_index: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Sizes of `parts` contiguous parts covering `n` items; sizes differ by at
/// most one and the earlier parts take the remainder.
pub fn part_sizes(n: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| n / parts + usize::from(i < n % parts))
        .collect()
}

pub fn moving_partition(
    seq: &UserPostSequence,
    params: PartitionParams,
) -> Result<Vec<PartitionRound>, DatasetError> {
    let PartitionParams {
        parts,
        window,
        rounds,
    } = params;
    if parts == 0 || window < 2 || window > parts || rounds != parts - window + 1 {
        return Err(DatasetError::Partition(format!(
            "need 2 <= window <= parts and rounds = parts - window + 1 (got parts={parts}, window={window}, rounds={rounds})"
        )));
    }
    if seq.len() < parts {
        return Err(DatasetError::Partition(format!(
            "sequence of {} records cannot be split into {parts} parts",
            seq.len()
        )));
    }
    let mut starts = Vec::with_capacity(parts + 1);
    starts.push(0);
    for size in part_sizes(seq.len(), parts) {
        starts.push(starts.last().unwrap() + size);
    }
    Ok((0..rounds)
        .map(|k| PartitionRound {
            round_index: k + 1,
            train: starts[k]..starts[k + window - 1],
            test: starts[k + window - 1]..starts[k + window],
        })
        .collect())
}

/// Checks the protocol invariants: the expected number of rounds, test parts
/// pairwise disjoint and in round order, and within every round no test
/// record earlier than a training record.
pub fn verify_partition(
    seq: &UserPostSequence,
    rounds: &[PartitionRound],
    expected_rounds: usize,
) -> Result<(), DatasetError> {
    let fail = |msg: String| Err(DatasetError::Partition(msg));
    if rounds.len() != expected_rounds {
        return fail(format!("expected {expected_rounds} rounds, got {}", rounds.len()));
    }
    let recs = seq.records();
    for (i, r) in rounds.iter().enumerate() {
        if r.round_index != i + 1 || r.train.is_empty() || r.test.is_empty() {
            return fail(format!("round {} is malformed", r.round_index));
        }
        if r.test.end > recs.len() || r.train.end > r.test.start {
            return fail(format!("round {} ranges out of order", r.round_index));
        }
        let max_train = recs[r.train.clone()].iter().map(|x| x.timestamp).max();
        let min_test = recs[r.test.clone()].iter().map(|x| x.timestamp).min();
        if min_test < max_train {
            return fail(format!(
                "round {}: a test record precedes a training record",
                r.round_index
            ));
        }
        if let Some(prev) = i.checked_sub(1).map(|j| &rounds[j]) {
            if r.test.start < prev.test.end {
                return fail(format!(
                    "test parts of rounds {} and {} overlap or are out of order",
                    prev.round_index, r.round_index
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PostRecord;
    use crate::timebase::Timestamp;
    use proptest::prelude::*;

    fn seq_of(timestamps: &[i64]) -> UserPostSequence {
        let records = timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| PostRecord {
                user_id: "u".into(),
                post_id: format!("p{i}"),
                timestamp: Timestamp::new(t).unwrap(),
                user_features: vec![0.0; 5],
                visual_features: vec![0.0],
                view_count: 1,
                days_since_post: 1.0,
            })
            .collect();
        UserPostSequence::new(records, 1).unwrap()
    }

    #[test]
    fn hundred_forty_records() {
        let ts: Vec<i64> = (0..140).collect();
        let rounds = moving_partition(&seq_of(&ts), PartitionParams::default()).unwrap();
        assert_eq!(rounds.len(), 5);
        assert_eq!(rounds[0].train, 0..90);
        assert_eq!(rounds[0].test, 90..100);
        assert_eq!(rounds[4].train, 40..130);
        assert_eq!(rounds[4].test, 130..140);
        for r in &rounds {
            assert_eq!(r.train.len(), 9 * r.test.len());
        }
    }

    #[test]
    fn minimal_sequence() {
        let ts: Vec<i64> = (0..14).collect();
        let rounds = moving_partition(&seq_of(&ts), PartitionParams::default()).unwrap();
        assert_eq!(rounds[4].test, 13..14);
        assert!(moving_partition(&seq_of(&ts[..13]), PartitionParams::default()).is_err());
    }

    #[test]
    fn remainder_goes_to_early_parts() {
        assert_eq!(part_sizes(17, 5), vec![4, 4, 3, 3, 3]);
    }

    #[test]
    fn inconsistent_params_rejected() {
        let ts: Vec<i64> = (0..50).collect();
        let bad = PartitionParams {
            parts: 14,
            window: 10,
            rounds: 4,
        };
        assert!(moving_partition(&seq_of(&ts), bad).is_err());
    }

    proptest! {
        #[test]
        fn protocol_invariants(mut ts in proptest::collection::vec(0i64..1_000, 14..400)) {
            ts.sort();
            let seq = seq_of(&ts);
            let rounds = moving_partition(&seq, PartitionParams::default()).unwrap();
            verify_partition(&seq, &rounds, 5).unwrap();
            let sizes = part_sizes(ts.len(), 14);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
