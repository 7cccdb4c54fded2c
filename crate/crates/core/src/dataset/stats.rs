use std::fmt::Write as _;

use super::{DatasetError, UserPostSequence};
use crate::timebase::UtcOffset;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub count: usize,
    pub span_seconds: i64,
    pub zero_view_records: usize,
    pub popularity_mean: f64,
    /// Min, 25%, median, 75%, max of normalized popularity.
    pub popularity_quantiles: [f64; 5],
    pub minute_of_hour: [usize; 60],
    pub period_of_day: [usize; 6],
    pub day_of_week: [usize; 7],
    pub week_of_month: [usize; 5],
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn dataset_stats(seq: &UserPostSequence, offset: UtcOffset) -> Result<DatasetStats, DatasetError> {
    let recs = seq.records();
    let (Some(first), Some(last)) = (recs.first(), recs.last()) else {
        return Err(DatasetError::Empty);
    };
    let mut pops = Vec::with_capacity(recs.len());
    let mut zero_view_records = 0;
    let mut stats = DatasetStats {
        count: recs.len(),
        span_seconds: last.timestamp.seconds_since(first.timestamp),
        zero_view_records: 0,
        popularity_mean: 0.0,
        popularity_quantiles: [0.0; 5],
        minute_of_hour: [0; 60],
        period_of_day: [0; 6],
        day_of_week: [0; 7],
        week_of_month: [0; 5],
    };
    for r in recs {
        let p = r.popularity();
        zero_view_records += usize::from(p.zero_shifted);
        pops.push(p.value);
        let v = offset.calendar(r.timestamp).time_vector();
        stats.minute_of_hour[v.minute_of_hour as usize] += 1;
        stats.period_of_day[v.period_of_day as usize] += 1;
        stats.day_of_week[v.day_of_week as usize] += 1;
        stats.week_of_month[v.week_of_month as usize] += 1;
    }
    stats.zero_view_records = zero_view_records;
    stats.popularity_mean = pops.iter().sum::<f64>() / pops.len() as f64;
    pops.sort_by(f64::total_cmp);
    for (slot, q) in stats.popularity_quantiles.iter_mut().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
        *slot = quantile(&pops, q);
    }
    Ok(stats)
}

impl DatasetStats {
    /// `metric,value` rows.
    pub fn summary_csv(&self) -> String {
        let q = &self.popularity_quantiles;
        let mut out = String::from("metric,value\n");
        let rows: [(&str, String); 9] = [
            ("count", self.count.to_string()),
            ("span_seconds", self.span_seconds.to_string()),
            ("zero_view_records", self.zero_view_records.to_string()),
            ("popularity_mean", format!("{:.6}", self.popularity_mean)),
            ("popularity_min", format!("{:.6}", q[0])),
            ("popularity_q25", format!("{:.6}", q[1])),
            ("popularity_median", format!("{:.6}", q[2])),
            ("popularity_q75", format!("{:.6}", q[3])),
            ("popularity_max", format!("{:.6}", q[4])),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    /// `scale,bin,count` rows for the four time-scale histograms.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("scale,bin,count\n");
        let tables: [(&str, &[usize]); 4] = [
            ("minute_of_hour", &self.minute_of_hour),
            ("period_of_day", &self.period_of_day),
            ("day_of_week", &self.day_of_week),
            ("week_of_month", &self.week_of_month),
        ];
        for (name, counts) in tables {
            for (bin, c) in counts.iter().enumerate() {
                let _ = writeln!(out, "{name},{bin},{c}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, PostRecord, SyntheticConfig};
    use crate::timebase::Timestamp;

    fn rec(t: i64, views: u64) -> PostRecord {
        PostRecord {
            user_id: "u".into(),
            post_id: format!("p{t}"),
            timestamp: Timestamp::new(t).unwrap(),
            user_features: vec![0.0; 5],
            visual_features: vec![0.0],
            view_count: views,
            days_since_post: 1.0,
        }
    }

    #[test]
    fn single_and_pair() {
        let one = UserPostSequence::new(vec![rec(1000, 4)], 1).unwrap();
        let s = dataset_stats(&one, UtcOffset::UTC).unwrap();
        assert_eq!((s.count, s.span_seconds), (1, 0));
        assert_eq!(s.popularity_quantiles, [3.0; 5]);

        let two = UserPostSequence::new(vec![rec(1000, 0), rec(1000 + 86_400, 8)], 1).unwrap();
        let s = dataset_stats(&two, UtcOffset::UTC).unwrap();
        assert_eq!(s.span_seconds, 86_400);
        assert_eq!(s.zero_view_records, 1);
        assert_eq!(s.popularity_quantiles[2], 2.5);
        assert_eq!(s.day_of_week.iter().sum::<usize>(), 2);
    }

    #[test]
    fn empty_rejected() {
        let empty = UserPostSequence::new(vec![], 1).unwrap();
        assert!(matches!(dataset_stats(&empty, UtcOffset::UTC), Err(DatasetError::Empty)));
    }

    #[test]
    fn csv_shapes() {
        let seq = UserPostSequence::new(vec![rec(0, 1), rec(60, 2)], 1).unwrap();
        let s = dataset_stats(&seq, UtcOffset::UTC).unwrap();
        assert_eq!(s.summary_csv().lines().count(), 10);
        assert_eq!(s.histogram_csv().lines().count(), 1 + 60 + 6 + 7 + 5);
    }

    #[test]
    fn planted_periodicity_shows_in_day_of_week_popularity() {
        // Recount mean popularity per weekday straight from the records: the
        // planted weekday profile must be visible.
        let cfg = SyntheticConfig {
            n_records: 3000,
            visual_dim: 4,
            trend_amplitude: 0.0,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg, 9).unwrap();
        let mut sums = [0.0; 7];
        let mut counts = [0usize; 7];
        for r in data.sequence.records() {
            let d = UtcOffset::UTC.calendar(r.timestamp).weekday as usize;
            sums[d] += r.popularity().value;
            counts[d] += 1;
        }
        let means: Vec<f64> = (0..7).map(|d| sums[d] / counts[d] as f64).collect();
        let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.8, "weekday means {means:?}");
    }
}
