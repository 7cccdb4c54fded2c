//! Synthetic user-post streams with planted structure.
//!
//! The normalized popularity of every post is
//!
//! ```text
//! s = base_level + user_base[u]
//!     + periodic_amplitude * (day_of_week_profile[dow] + period_of_day_profile[pod])
//!     + trend(t) + noise
//! ```
//!
//! where `trend` is a stationary AR(1) process on an hourly grid with
//! standard deviation `trend_amplitude`. The view count is then recovered by
//! inverting `s = log2(r / d) + 1` and rounding. Visual features carry a
//! low-dimensional signal correlated with the user base level, projected into
//! `visual_dim` dimensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DatasetError, PostRecord, UserPostSequence};
use crate::timebase::{Timestamp, UtcOffset, SECONDS_PER_DAY, SECONDS_PER_HOUR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_records: usize,
    pub visual_dim: usize,
    /// Start of the stream, epoch seconds.
    pub start_epoch: i64,
    pub span_days: u32,
    pub utc_offset: UtcOffset,
    pub base_level: f64,
    /// Standard deviation of the per-user base level.
    pub user_base_sd: f64,
    pub periodic_amplitude: f64,
    /// Monday..Sunday.
    pub day_of_week_profile: [f64; 7],
    /// Indexed by period of day (morning, lunch, afternoon, dinner, evening, night).
    pub period_of_day_profile: [f64; 6],
    /// Stationary standard deviation of the hourly AR(1) trend.
    pub trend_amplitude: f64,
    /// Hour-to-hour AR(1) coefficient of the trend.
    pub trend_phi: f64,
    pub noise: f64,
    pub visual_signal_dim: usize,
    pub visual_noise: f64,
    /// Days between the end of the stream and the (virtual) collection time.
    pub collection_lag_days: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 50,
            n_records: 5000,
            visual_dim: 32,
            // 2017-01-02T00:00:00Z, a Monday.
            start_epoch: 1_483_315_200,
            span_days: 112,
            utc_offset: UtcOffset::UTC,
            base_level: 5.0,
            user_base_sd: 0.7,
            periodic_amplitude: 1.0,
            day_of_week_profile: [-0.4, -0.5, -0.2, 0.0, 0.3, 0.9, 0.6],
            period_of_day_profile: [0.2, 0.7, -0.1, 0.4, 0.9, -1.1],
            trend_amplitude: 1.0,
            trend_phi: 0.95,
            noise: 0.3,
            visual_signal_dim: 4,
            visual_noise: 0.5,
            collection_lag_days: 30.0,
        }
    }
}

impl SyntheticConfig {
    /// Parses and validates a TOML generator configuration; missing keys
    /// take their defaults.
    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let cfg: Self = toml::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serializes")
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Config(m.to_string()));
        if self.n_users == 0 || self.n_records == 0 || self.visual_dim == 0 {
            return bad("n_users, n_records and visual_dim must be positive");
        }
        if self.span_days == 0 || self.visual_signal_dim == 0 {
            return bad("span_days and visual_signal_dim must be positive");
        }
        if self.start_epoch < 0 {
            return bad("start_epoch must be non-negative");
        }
        if !(0.0..1.0).contains(&self.trend_phi) {
            return bad("trend_phi must be in [0, 1)");
        }
        let amplitudes = [
            self.user_base_sd,
            self.periodic_amplitude,
            self.trend_amplitude,
            self.noise,
            self.visual_noise,
        ];
        if amplitudes.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return bad("amplitudes and noise levels must be finite and non-negative");
        }
        if !(self.collection_lag_days > 0.0) {
            return bad("collection_lag_days must be positive");
        }
        Ok(())
    }

    pub fn periodic_effect(&self, day_of_week: u8, period_of_day: u8) -> f64 {
        self.periodic_amplitude
            * (self.day_of_week_profile[day_of_week as usize]
                + self.period_of_day_profile[period_of_day as usize])
    }
}

/// Generated stream plus the planted (pre-rounding) popularity of each
/// record, aligned with the sequence order.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub sequence: UserPostSequence,
    pub latent_popularity: Vec<f64>,
    pub user_base: Vec<f64>,
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset, DatasetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let user_base: Vec<f64> = (0..config.n_users)
        .map(|_| config.user_base_sd * normal(&mut rng))
        .collect();
    let user_features: Vec<Vec<f64>> = user_base
        .iter()
        .map(|&b| {
            let avg_views = 2f64.powf(config.base_level + b - 1.0) * (1.0 + 0.05 * normal(&mut rng)).max(0.1);
            let photo_count = (5.0 + normal(&mut rng)).exp().round();
            let contacts = (4.0 + normal(&mut rng)).exp().round();
            let group_members = (6.0 + 0.5 * normal(&mut rng)).exp();
            let pro = if rng.random_bool(0.3) { 1.0 } else { 0.0 };
            vec![avg_views, photo_count, contacts, group_members, pro]
        })
        .collect();

    let k = config.visual_signal_dim;
    let proj_scale = Normal::new(0.0, 1.0 / (k as f64).sqrt()).expect("valid normal");
    let projection: Vec<f64> = (0..k * config.visual_dim)
        .map(|_| proj_scale.sample(&mut rng))
        .collect();

    let span_secs = config.span_days as i64 * SECONDS_PER_DAY;
    let hours = (span_secs / SECONDS_PER_HOUR + 1) as usize;
    let innovation = config.trend_amplitude * (1.0 - config.trend_phi * config.trend_phi).sqrt();
    let mut trend = Vec::with_capacity(hours);
    let mut level = config.trend_amplitude * normal(&mut rng);
    for _ in 0..hours {
        trend.push(level);
        level = config.trend_phi * level + innovation * normal(&mut rng);
    }

    let mut offsets: Vec<i64> = (0..config.n_records)
        .map(|_| rng.random_range(0..span_secs))
        .collect();
    offsets.sort_unstable();

    let collection = config.start_epoch + span_secs + (config.collection_lag_days * SECONDS_PER_DAY as f64) as i64;
    let user_base_scale = if config.user_base_sd > 0.0 { config.user_base_sd } else { 1.0 };
    let mut records = Vec::with_capacity(config.n_records);
    let mut latent = Vec::with_capacity(config.n_records);
    for (i, off) in offsets.into_iter().enumerate() {
        let timestamp = Timestamp::new(config.start_epoch + off).map_err(|e| DatasetError::Config(e.to_string()))?;
        let u = rng.random_range(0..config.n_users);
        let tv = config.utc_offset.calendar(timestamp).time_vector();
        let s = config.base_level
            + user_base[u]
            + config.periodic_effect(tv.day_of_week, tv.period_of_day)
            + trend[(off / SECONDS_PER_HOUR) as usize]
            + config.noise * normal(&mut rng);

        let days = (collection - timestamp.epoch_seconds()) as f64 / SECONDS_PER_DAY as f64;
        let view_count = (2f64.powf(s - 1.0) * days).round().max(0.0) as u64;

        let mut signal = vec![0.0; k];
        signal[0] = user_base[u] / user_base_scale + 0.5 * normal(&mut rng);
        for z in signal.iter_mut().skip(1) {
            *z = normal(&mut rng);
        }
        let visual_features: Vec<f64> = (0..config.visual_dim)
            .map(|j| {
                let planted: f64 = (0..k).map(|m| signal[m] * projection[m * config.visual_dim + j]).sum();
                planted + config.visual_noise * normal(&mut rng)
            })
            .collect();

        records.push(PostRecord {
            user_id: format!("u{u:04}"),
            post_id: format!("p{i:06}"),
            timestamp,
            user_features: user_features[u].clone(),
            visual_features,
            view_count,
            days_since_post: days,
        });
        latent.push(s);
    }
    Ok(SyntheticDataset {
        sequence: UserPostSequence::new(records, config.visual_dim)?,
        latent_popularity: latent,
        user_base,
    })
}
