//! Rank correlation, absolute error and per-round aggregation.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::PartitionRound;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} truths vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("no rounds to evaluate")]
    NoRounds,
}

fn check(truth: &[f64], pred: &[f64], min: usize) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.len() < min {
        return Err(MetricsError::TooShort {
            need: min,
            got: truth.len(),
        });
    }
    if let Some(i) = truth.iter().chain(pred).position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i % truth.len()));
    }
    Ok(())
}

/// One-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation. `Ok(None)` when either input is constant, in
/// which case the correlation is undefined.
pub fn spearman(truth: &[f64], pred: &[f64]) -> Result<Option<f64>, MetricsError> {
    check(truth, pred, 2)?;
    let (rx, ry) = (average_ranks(truth), average_ranks(pred));
    let k = rx.len() as f64;
    let mean = (k + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        let (dx, dy) = (x - mean, y - mean);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check(truth, pred, 1)?;
    Ok(truth.iter().zip(pred).map(|(t, p)| (p - t).abs()).sum::<f64>() / truth.len() as f64)
}

/// Ground truth and predictions for one round's test split, aligned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundPredictions {
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

/// Produces predictions for a round, typically by training a fresh model on
/// its train split.
pub trait Predictor {
    type Error: From<MetricsError>;

    fn predict_round(&mut self, round: &PartitionRound) -> Result<RoundPredictions, Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round_index: usize,
    pub src: Option<f64>,
    pub mae: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rounds: Vec<RoundResult>,
    /// Over rounds with a defined SRC; `None` if there are none.
    pub src_mean: Option<f64>,
    pub src_std: Option<f64>,
    pub mae_mean: f64,
    pub mae_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvaluationReport {
    pub fn from_rounds(rounds: Vec<RoundResult>) -> Result<Self, MetricsError> {
        if rounds.is_empty() {
            return Err(MetricsError::NoRounds);
        }
        let srcs: Vec<f64> = rounds.iter().filter_map(|r| r.src).collect();
        let maes: Vec<f64> = rounds.iter().map(|r| r.mae).collect();
        let (src_mean, src_std) = if srcs.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&srcs);
            (Some(m), Some(s))
        };
        let (mae_mean, mae_std) = mean_std(&maes);
        Ok(Self {
            rounds,
            src_mean,
            src_std,
            mae_mean,
            mae_std,
        })
    }

    /// `round_index,src,mae,n_test`; undefined SRC is written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round_index,src,mae,n_test\n");
        for r in &self.rounds {
            let _ = writeln!(out, "{},{},{:.6},{}", r.round_index, fmt_src(r.src), r.mae, r.n_test);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>5}  {:>10}  {:>10}  {:>6}", "round", "src", "mae", "n_test");
        for r in &self.rounds {
            let _ = writeln!(
                out,
                "{:>5}  {:>10}  {:>10.6}  {:>6}",
                r.round_index,
                fmt_src(r.src),
                r.mae,
                r.n_test
            );
        }
        let _ = writeln!(
            out,
            "\nSRC mean {} std {}\nMAE mean {:.6} std {:.6}",
            fmt_src(self.src_mean),
            fmt_src(self.src_std),
            self.mae_mean,
            self.mae_std
        );
        let undefined = self.rounds.iter().filter(|r| r.src.is_none()).count();
        if undefined > 0 {
            let _ = writeln!(out, "{undefined} round(s) with undefined SRC excluded from the SRC aggregate");
        }
        out
    }
}

fn fmt_src(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// Runs `predictor` on every round and aggregates SRC and MAE.
pub fn evaluate_rounds<P: Predictor>(rounds: &[PartitionRound], predictor: &mut P) -> Result<EvaluationReport, P::Error> {
    if rounds.is_empty() {
        return Err(MetricsError::NoRounds.into());
    }
    let mut results = Vec::with_capacity(rounds.len());
    for round in rounds {
        let p = predictor.predict_round(round)?;
        let src = spearman(&p.truth, &p.pred)?;
        if src.is_none() {
            log::warn!(
                "round {}: SRC undefined (constant truth or prediction); excluded from aggregate",
                round.round_index
            );
        }
        results.push(RoundResult {
            round_index: round.round_index,
            src,
            mae: mae(&p.truth, &p.pred)?,
            n_test: p.truth.len(),
        });
    }
    Ok(EvaluationReport::from_rounds(results)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_antitone_exact() {
        let t = [0.3, 1.7, -2.0, 5.5, 4.0];
        let cubed: Vec<f64> = t.iter().map(|x: &f64| x.powi(3) + 10.0).collect();
        assert_eq!(spearman(&t, &cubed).unwrap(), Some(1.0));
        let neg: Vec<f64> = t.iter().map(|x| -x).collect();
        assert_eq!(spearman(&t, &neg).unwrap(), Some(-1.0));
    }

    #[test]
    fn constant_is_undefined_not_zero() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap(), None);
        assert_eq!(spearman(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn errors() {
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(MetricsError::TooShort { .. })));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0]), Err(MetricsError::LengthMismatch(2, 1))));
        assert!(matches!(mae(&[], &[]), Err(MetricsError::TooShort { .. })));
        assert!(matches!(mae(&[1.0, f64::NAN], &[1.0, 2.0]), Err(MetricsError::NonFinite(1))));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn mae_hand_sum() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    struct Fixed(Vec<RoundPredictions>);

    impl Predictor for Fixed {
        type Error = MetricsError;
        fn predict_round(&mut self, round: &PartitionRound) -> Result<RoundPredictions, MetricsError> {
            Ok(self.0[round.round_index].clone())
        }
    }

    fn rounds(n: usize) -> Vec<PartitionRound> {
        (0..n)
            .map(|i| PartitionRound {
                round_index: i,
                train: 0..10,
                test: 10..13,
            })
            .collect()
    }

    #[test]
    fn oracle_and_constant_predictors() {
        let truth = vec![1.0, 3.0, 2.0];
        let mut oracle = Fixed(vec![RoundPredictions { truth: truth.clone(), pred: truth.clone() }; 5]);
        let rep = evaluate_rounds(&rounds(5), &mut oracle).unwrap();
        assert_eq!(rep.rounds.len(), 5);
        assert!(rep.rounds.iter().all(|r| r.src == Some(1.0) && r.mae == 0.0));

        let mut constant = Fixed(vec![RoundPredictions { truth, pred: vec![2.0; 3] }; 2]);
        let rep = evaluate_rounds(&rounds(2), &mut constant).unwrap();
        assert_eq!(rep.src_mean, None);
        assert!((rep.mae_mean - 2.0 / 3.0).abs() < 1e-15);
        assert!(rep.to_csv().contains(",NA,"));
        assert!(rep.to_text().contains("excluded"));
    }

    #[test]
    fn undefined_round_excluded_from_mean() {
        let rs = vec![
            RoundResult { round_index: 0, src: Some(0.5), mae: 1.0, n_test: 3 },
            RoundResult { round_index: 1, src: None, mae: 2.0, n_test: 3 },
            RoundResult { round_index: 2, src: Some(0.7), mae: 3.0, n_test: 3 },
        ];
        let rep = EvaluationReport::from_rounds(rs).unwrap();
        assert!((rep.src_mean.unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rep.mae_mean, 2.0);
        assert_eq!(rep.mae_std, 1.0);
        assert_eq!(rep.to_csv().lines().count(), 4);
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn spearman_symmetric_and_monotone_invariant((x, y) in vecs()) {
            let a = spearman(&x, &y).unwrap();
            prop_assert_eq!(a, spearman(&y, &x).unwrap());
            let ex: Vec<f64> = x.iter().map(|v| (v / 50.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(a, spearman(&ex, &y).unwrap());
            if let Some(v) = a {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn mae_symmetric_and_shift_invariant((x, y) in vecs(), c in -50.0f64..50.0) {
            let m = mae(&x, &y).unwrap();
            prop_assert_eq!(m, mae(&y, &x).unwrap());
            let xs: Vec<f64> = x.iter().map(|v| v + c).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            prop_assert!((m - mae(&xs, &ys).unwrap()).abs() < 1e-9);
            prop_assert!(m >= 0.0);
        }
    }
}
