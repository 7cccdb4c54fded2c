use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::timebase::Timestamp;

/// Number of user-level features: average views, photo count, contact
/// count, mean group-member count, pro-account flag.
pub const USER_FEATURE_DIM: usize = 5;

pub const DEFAULT_VISUAL_DIM: usize = 2048;

/// One user-post sharing event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub user_id: String,
    pub post_id: String,
    pub timestamp: Timestamp,
    pub user_features: Vec<f64>,
    pub visual_features: Vec<f64>,
    pub view_count: u64,
    pub days_since_post: f64,
}

impl PostRecord {
    pub fn validate(&self, visual_dim: usize) -> Result<(), DatasetError> {
        let invalid = |reason: String| DatasetError::InvalidRecord {
            post_id: self.post_id.clone(),
            reason,
        };
        if self.user_features.len() != USER_FEATURE_DIM {
            return Err(invalid(format!(
                "expected {USER_FEATURE_DIM} user features, found {}",
                self.user_features.len()
            )));
        }
        if self.visual_features.len() != visual_dim {
            return Err(invalid(format!(
                "expected {visual_dim} visual features, found {}",
                self.visual_features.len()
            )));
        }
        if !(self.days_since_post > 0.0) || !self.days_since_post.is_finite() {
            return Err(invalid(format!(
                "days_since_post must be positive, found {}",
                self.days_since_post
            )));
        }
        if let Some(x) = self
            .user_features
            .iter()
            .chain(&self.visual_features)
            .find(|x| !x.is_finite())
        {
            return Err(invalid(format!("non-finite feature value {x}")));
        }
        Ok(())
    }

    pub fn popularity(&self) -> Popularity {
        normalize_popularity(self.view_count, self.days_since_post)
            .expect("validated records have positive days_since_post")
    }
}

/// Records ordered by timestamp (non-decreasing). Equal timestamps keep
/// their original relative order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserPostSequence {
    records: Vec<PostRecord>,
    visual_dim: usize,
}

impl UserPostSequence {
    /// Validates every record and stably sorts by timestamp.
    pub fn new(mut records: Vec<PostRecord>, visual_dim: usize) -> Result<Self, DatasetError> {
        for r in &records {
            r.validate(visual_dim)?;
        }
        records.sort_by_key(|r| r.timestamp);
        Ok(Self {
            records,
            visual_dim,
        })
    }

    pub fn records(&self) -> &[PostRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn visual_dim(&self) -> usize {
        self.visual_dim
    }

    pub fn get(&self, i: usize) -> Option<&PostRecord> {
        self.records.get(i)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.records.iter().map(|r| r.timestamp)
    }

    /// Normalized popularity of every record, in sequence order.
    pub fn popularities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.popularity().value).collect()
    }
}

/// Normalized popularity `log2(r / d) + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Popularity {
    pub value: f64,
    /// Set when `r = 0` and the count was shifted to 1.
    pub zero_shifted: bool,
}

/// `log2(r / d) + 1`. A zero view count is replaced by 1 (and flagged),
/// since the logarithm is undefined there.
pub fn normalize_popularity(view_count: u64, days: f64) -> Result<Popularity, DatasetError> {
    if !(days > 0.0) || !days.is_finite() {
        return Err(DatasetError::NonPositiveDays(days));
    }
    let zero_shifted = view_count == 0;
    let r = if zero_shifted { 1.0 } else { view_count as f64 };
    Ok(Popularity {
        value: (r / days).log2() + 1.0,
        zero_shifted,
    })
}
