//! Acceptance checks, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line with the measured quantity next to its bound, then
//! asserts.
//!
//! Criteria 7 and 8 train several models over the full five-round protocol
//! and take a few minutes on one core.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use chrono::{DateTime, Datelike, FixedOffset, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dtcn_core::context::{context_indices, ContextKind, ContextSpec};
use dtcn_core::dataset::{
    generate_synthetic, moving_partition, normalize_popularity, verify_partition, PartitionParams, PartitionRound,
    PostRecord, SyntheticConfig, UserPostSequence,
};
use dtcn_core::dtcn::micro::micro_model_check;
use dtcn_core::dtcn::{
    attention_weights, temporal_attention, train, weights_from_scores, ContextSpecs, DtcnModel, ModelConfig,
    PreparedData, TrainConfig,
};
use dtcn_core::metrics::spearman;
use dtcn_core::numerics::gradcheck::{primitive_checks, GradCheckConfig};
use dtcn_core::numerics::Activation;
use dtcn_core::run::{evaluate, run_eval, OutputGuard, RunConfig};
use dtcn_core::timebase::{normalized_time_vector, MultiScaleTimeVector, TimeUnit, Timestamp, UtcOffset};

/// Written straight to stderr so the line shows without `--nocapture`.
fn verdict(criterion: u32, ok: bool, detail: impl AsRef<str>) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let line = format!("{tag} criterion {criterion:>2}: {}\n", detail.as_ref());
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {criterion} failed: {}", detail.as_ref());
}

// ---------------------------------------------------------------------------
// 1. gradients

#[test]
fn c01_gradient_checks() {
    let cfg = GradCheckConfig {
        step: 1e-4,
        rel_tol: 1e-5,
        ..GradCheckConfig::default()
    };
    let start = Instant::now();
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for seed in 0..20 {
        let mut outcomes = primitive_checks(seed, cfg).unwrap();
        for gate in [Activation::Sigmoid, Activation::HardSigmoid] {
            outcomes.push(micro_model_check(seed, gate, cfg).unwrap());
        }
        for o in outcomes {
            checks += o.checked;
            worst = worst.max(o.max_rel_error);
            if !o.passed() {
                failed.push(format!("seed {seed}: {o}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        failed.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{checks} partials over 20 seeds, max rel err {worst:.2e} (< 1e-5), {:.1}s (< 60s){}",
            elapsed.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!("; {}", failed.join("; ")) }
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. spearman

/// Average ranks by counting, then Pearson on the ranks.
fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                1.0 + less + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

#[test]
fn c02_spearman_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    let mut with_ties = 0;
    for i in 0..200 {
        let n = rng.random_range(2..=50);
        let tied = i % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if tied {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-1e3..1e3)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let distinct: BTreeSet<u64> = x.iter().map(|v| v.to_bits()).collect();
        if distinct.len() < n {
            with_ties += 1;
        }
        match (spearman(&x, &y).unwrap(), brute_spearman(&x, &y)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            _ => mismatches += 1,
        }
    }

    let mut exact = true;
    for n in [2usize, 3, 10, 50] {
        let x: Vec<f64> = (0..n).map(|i| (i as f64).powi(3) - 4.0).collect();
        let up: Vec<f64> = x.iter().map(|v| v.signum() * v.abs().ln_1p()).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        exact &= spearman(&x, &up).unwrap() == Some(1.0);
        exact &= spearman(&x, &down).unwrap() == Some(-1.0);
    }
    verdict(
        2,
        worst <= 1e-9 && mismatches == 0 && exact,
        format!(
            "200 instances ({with_ties} with ties), max |diff| {worst:.1e} (<= 1e-9), \
             definedness mismatches {mismatches}, identity/antitone exact: {exact}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. contexts

fn record(user: usize, i: usize, t: i64) -> PostRecord {
    PostRecord {
        user_id: format!("u{user}"),
        post_id: format!("p{i}"),
        timestamp: Timestamp::new(t).unwrap(),
        user_features: vec![1.0; 5],
        visual_features: vec![0.0; 1],
        view_count: 10,
        days_since_post: 1.0,
    }
}

/// Local calendar fields computed with chrono: (block of the unit, enclosing
/// cycle of the unit).
fn block_and_cycle(t: i64, offset_secs: i32, unit: TimeUnit) -> (u32, (i64, i64)) {
    let tz = FixedOffset::east_opt(offset_secs).unwrap();
    let local = DateTime::from_timestamp(t, 0).unwrap().with_timezone(&tz);
    let date = local.date_naive();
    let day = date.num_days_from_ce() as i64;
    match unit {
        TimeUnit::MinuteOfHour => (local.minute(), (day, local.hour() as i64)),
        TimeUnit::PeriodOfDay => {
            let period = match local.hour() {
                8..=11 => 0,
                12..=13 => 1,
                14..=16 => 2,
                17..=19 => 3,
                20..=23 => 4,
                _ => 5,
            };
            (period, (day, 0))
        }
        TimeUnit::DayOfWeek => {
            let w = date.iso_week();
            (date.weekday().num_days_from_monday(), (w.year() as i64, w.week() as i64))
        }
        TimeUnit::WeekOfMonth => (((date.day() - 1) / 7).min(4), (date.year() as i64, date.month() as i64)),
    }
}

fn brute_context(recs: &[PostRecord], target: usize, spec: &ContextSpec, offset_secs: i32) -> Vec<usize> {
    let tp = recs[target].timestamp.epoch_seconds();
    let members: Vec<usize> = (0..target)
        .filter(|&j| {
            let ts = recs[j].timestamp.epoch_seconds();
            let gap = tp - ts;
            if spec.per_user && recs[j].user_id != recs[target].user_id {
                return false;
            }
            match spec.kind {
                ContextKind::Neighboring => gap < spec.range_seconds,
                ContextKind::Periodic => {
                    let (bp, cp) = block_and_cycle(tp, offset_secs, spec.time_unit);
                    let (bs, cs) = block_and_cycle(ts, offset_secs, spec.time_unit);
                    gap > 0 && gap <= spec.range_seconds && bp == bs && cp != cs
                }
            }
        })
        .collect();
    let skip = members.len().saturating_sub(spec.max_items);
    members[skip..].to_vec()
}

#[test]
fn c03_context_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut compared = 0usize;
    let mut nonempty = 0usize;
    let mut mismatches = Vec::new();
    let mut combos = BTreeSet::new();
    for s in 0..500 {
        let n = if s % 100 == 0 { 10_000 } else { rng.random_range(2..=600) };
        // Mean gap from a minute to about a day so every unit sees both
        // members and non-members.
        let mean_gap = [60.0, 900.0, 3600.0, 6.0 * 3600.0, 86_400.0][s % 5];
        let users = rng.random_range(1..=4);
        let mut t = 1_400_000_000 + rng.random_range(0..10_000_000i64);
        let recs: Vec<PostRecord> = (0..n)
            .map(|i| {
                if rng.random_bool(0.9) {
                    t += (rng.random::<f64>() * 2.0 * mean_gap) as i64;
                }
                record(rng.random_range(0..users), i, t)
            })
            .collect();
        let seq = UserPostSequence::new(recs, 1).unwrap();
        let offset_secs = rng.random_range(-12..=14) * 3600;
        let offset = UtcOffset::from_seconds(offset_secs).unwrap();
        for kind in [ContextKind::Neighboring, ContextKind::Periodic] {
            for unit in TimeUnit::ALL {
                let range = match kind {
                    ContextKind::Neighboring => unit.duration_seconds() * rng.random_range(1..=8),
                    ContextKind::Periodic => rng.random_range(1..=40) * 86_400,
                };
                let max_items = if rng.random_bool(0.5) { usize::MAX } else { rng.random_range(1..=5) };
                let spec = ContextSpec::new(kind, unit, range)
                    .with_max_items(max_items)
                    .with_per_user(rng.random_bool(0.3));
                combos.insert((kind.code(), unit.code()));
                let targets: Vec<usize> = if n <= 50 {
                    (0..n).collect()
                } else {
                    (0..8).map(|_| rng.random_range(0..n)).chain([n - 1]).collect()
                };
                for target in targets {
                    let got = context_indices(&seq, target, &spec, offset);
                    let want = brute_context(seq.records(), target, &spec, offset_secs);
                    compared += 1;
                    nonempty += usize::from(!want.is_empty());
                    if got != want && mismatches.len() < 5 {
                        mismatches.push(format!("seq {s} target {target} {kind:?} {unit:?}"));
                    }
                }
            }
        }
    }
    verdict(
        3,
        mismatches.is_empty() && combos.len() == 8,
        format!(
            "500 sequences, {compared} contexts over {} kind/unit pairs ({nonempty} non-empty), \
             mismatches: {}",
            combos.len(),
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join(", ") }
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. attention

fn random_tv(rng: &mut ChaCha8Rng) -> MultiScaleTimeVector {
    MultiScaleTimeVector {
        minute_of_hour: rng.random_range(0..=59),
        period_of_day: rng.random_range(0..=5),
        day_of_week: rng.random_range(0..=6),
        week_of_month: rng.random_range(0..=4),
    }
}

/// Reference weights from log-space: `ln a_j = 1/e_j - logsumexp(1/e)`.
fn log_weights(scores: &[f64]) -> Vec<f64> {
    let x: Vec<f64> = scores.iter().map(|e| 1.0 / e).collect();
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Whether the exact gap between two weights survives rounding to f64.
fn resolvable(a: f64, b: f64) -> bool {
    (a - b).abs() > 8.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn c04_attention_properties() {
    let eps = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = [0usize; 4];
    let mut underflowed = 0usize;
    let mut unresolvable = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let dim = rng.random_range(1..=8);
        let target = random_tv(&mut rng);
        let ctx: Vec<MultiScaleTimeVector> = (0..n).map(|_| random_tv(&mut rng)).collect();
        let h1: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let h2: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();

        // Positive wherever the exact weight is a representable number.
        let a = temporal_attention(&target, &ctx, &h1, eps).unwrap();
        let sum: f64 = a.weights.iter().sum();
        let reference = log_weights(&a.scores);
        let mut positive = true;
        for (w, lw) in a.weights.iter().zip(&reference) {
            if *lw > f64::MIN_POSITIVE.ln() {
                positive &= *w > 0.0;
            } else {
                underflowed += 1;
                positive &= *w >= 0.0;
            }
        }
        if !(positive && (sum - 1.0).abs() <= 1e-9) {
            failures[0] += 1;
        }

        let same = vec![ctx[0]; n];
        let u = temporal_attention(&target, &same, &h1, eps).unwrap();
        if u.weights.iter().any(|w| (w - 1.0 / n as f64).abs() > 1e-12) {
            failures[1] += 1;
        }

        let b = temporal_attention(&target, &ctx, &h2, eps).unwrap();
        if a.weights != b.weights {
            failures[2] += 1;
        }

        // Lowering one score moves weight onto that item and off every
        // other; strictly so whenever the exact change is resolvable.
        let t = normalized_time_vector(&target);
        let cs: Vec<[f64; 4]> = ctx.iter().map(normalized_time_vector).collect();
        let (scores, w0) = attention_weights(&t, &cs, eps);
        let j = rng.random_range(0..n);
        let mut lowered = scores.clone();
        lowered[j] = eps.max(scores[j] * rng.random_range(0.1..0.99));
        if lowered[j] == scores[j] {
            continue;
        }
        let w1 = weights_from_scores(&lowered);
        let (r0, r1) = (log_weights(&scores), log_weights(&lowered));
        let mut concentrated = true;
        for k in 0..n {
            let (e0, e1) = (r0[k].exp(), r1[k].exp());
            let up = k == j;
            if resolvable(e0, e1) {
                concentrated &= if up { w1[k] > w0[k] } else { w1[k] < w0[k] };
            } else {
                unresolvable += 1;
                concentrated &= if up { w1[k] >= w0[k] } else { w1[k] <= w0[k] };
            }
        }
        if !concentrated {
            failures[3] += 1;
        }
    }

    let (_, worked) = attention_weights(&[0.0; 4], &[], eps);
    let example = weights_from_scores(&[0.5, 1.0]);
    let e = std::f64::consts::E;
    let example_ok = worked.is_empty()
        && (example[0] - e * e / (e * e + e)).abs() < 1e-15
        && (example[1] - e / (e * e + e)).abs() < 1e-15;
    verdict(
        4,
        failures.iter().all(|&f| f == 0) && example_ok,
        format!(
            "1000 instances; failures: positive/normalized {}, uniform {}, hidden-independent {}, monotone {}; \
             worked example ok: {example_ok}; weights below f64 range: {underflowed}, \
             changes below f64 resolution: {unresolvable}",
            failures[0], failures[1], failures[2], failures[3]
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. popularity normalization

#[test]
fn c05_popularity_exactness() {
    let csv = include_str!("data/popularity_oracle.csv");
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let r: u64 = f[0].parse().unwrap();
        let d: f64 = f[1].parse().unwrap();
        let expected: f64 = f[2].parse().unwrap();
        let got = normalize_popularity(r, d).unwrap().value;
        worst = worst.max((got - expected).abs());
        rows += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_scale = 0.0f64;
    for _ in 0..1000 {
        let r = rng.random_range(1..1_000_000_000u64);
        let d = rng.random_range(0.01..5000.0);
        let c = rng.random_range(1..1000u64);
        let a = normalize_popularity(r, d).unwrap().value;
        let b = normalize_popularity(c * r, c as f64 * d).unwrap().value;
        worst_scale = worst_scale.max((a - b).abs());
    }
    verdict(
        5,
        rows == 1000 && worst <= 1e-12 && worst_scale <= 1e-12,
        format!("{rows} high-precision rows, max err {worst:.1e}; scale invariance max diff {worst_scale:.1e} (both <= 1e-12)"),
    );
}

// ---------------------------------------------------------------------------
// 6. overfit

#[test]
fn c06_single_target_overfit() {
    let start = Instant::now();
    let scfg = SyntheticConfig {
        n_records: 400,
        ..SyntheticConfig::default()
    };
    let seq = generate_synthetic(&scfg, 6).unwrap().sequence;
    let specs = ContextSpecs::from_list(&["NTC:1P:1D:8".parse().unwrap(), "PTC:1P:5D:8".parse().unwrap()]).unwrap();
    let data = PreparedData::new(&seq, scfg.utc_offset, specs);
    let target = seq.len() - 1;
    let truth = data.popularity(target);

    let mut model = DtcnModel::new(ModelConfig::default(), seq.visual_dim(), 6).unwrap();
    let tcfg = TrainConfig {
        epochs: 500,
        batch_size: 1,
        patience: 0,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, &[target], &tcfg).unwrap();
    let pred = model.predict_indices(&data, &[target]).unwrap()[0];
    let mse = (pred - truth).powi(2);
    let elapsed = start.elapsed();
    verdict(
        6,
        mse < 1e-4 && report.loss_history.len() <= 500 && elapsed < Duration::from_secs(60),
        format!(
            "eval-mode MSE {mse:.2e} (< 1e-4) after {} epochs, context sizes {}/{}, {:.1}s (< 60s)",
            report.loss_history.len(),
            data.context(0, target).len(),
            data.context(1, target).len(),
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 7 and 8. ablations on planted data

const NTC: &str = "NTC:1P:1D:16";
const PTC: &str = "PTC:1P:5D:16";
const TRAIN_SEEDS: [u64; 3] = [0, 1, 2];
const DATA_SEED: u64 = 1;

/// A reduced network so the protocol runs in minutes.
fn desk_config(contexts: &[&str], seed: u64) -> RunConfig {
    RunConfig {
        contexts: contexts.iter().map(|s| s.to_string()).collect(),
        seed,
        stream_hidden: [32, 16],
        stream_output: 8,
        lstm_hidden: 16,
        head_hidden: 16,
        epochs: 10,
        patience: 5,
        ..RunConfig::default()
    }
}

fn mean_src(seq: &UserPostSequence, offset: UtcOffset, contexts: &[&str]) -> f64 {
    let srcs: Vec<f64> = TRAIN_SEEDS
        .iter()
        .map(|&seed| {
            let report = evaluate(&desk_config(contexts, seed), seq, offset).unwrap();
            report.src_mean.expect("SRC defined on synthetic data")
        })
        .collect();
    srcs.iter().sum::<f64>() / srcs.len() as f64
}

#[test]
fn c07_directional_ablation() {
    let start = Instant::now();
    let scfg = SyntheticConfig::default();
    let seq = generate_synthetic(&scfg, DATA_SEED).unwrap().sequence;
    let off = scfg.utc_offset;
    let full = mean_src(&seq, off, &[NTC, PTC]);
    let ntc = mean_src(&seq, off, &[NTC]);
    let ptc = mean_src(&seq, off, &[PTC]);
    let none = mean_src(&seq, off, &[]);
    let elapsed = start.elapsed();
    let ok = full >= ntc - 0.01
        && full >= ptc - 0.01
        && [full, ntc, ptc].iter().all(|&s| s >= none + 0.05)
        && elapsed < Duration::from_secs(30 * 60);
    verdict(
        7,
        ok,
        format!(
            "mean SRC over 5 rounds x 3 seeds: full {full:.4}, NTC {ntc:.4}, PTC {ptc:.4}, none {none:.4}; {:.0}s (< 1800s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c08_pattern_specificity() {
    let trend_cfg = SyntheticConfig {
        periodic_amplitude: 0.0,
        ..SyntheticConfig::default()
    };
    let periodic_cfg = SyntheticConfig {
        trend_amplitude: 0.0,
        ..SyntheticConfig::default()
    };
    let trend = generate_synthetic(&trend_cfg, DATA_SEED).unwrap().sequence;
    let periodic = generate_synthetic(&periodic_cfg, DATA_SEED).unwrap().sequence;
    let off = trend_cfg.utc_offset;
    let (t_ntc, t_ptc) = (mean_src(&trend, off, &[NTC]), mean_src(&trend, off, &[PTC]));
    let (p_ntc, p_ptc) = (mean_src(&periodic, off, &[NTC]), mean_src(&periodic, off, &[PTC]));
    verdict(
        8,
        t_ntc - t_ptc >= 0.03 && p_ptc - p_ntc >= 0.03,
        format!(
            "trend-only: NTC {t_ntc:.4} vs PTC {t_ptc:.4} (margin {:+.4}); \
             periodic-only: PTC {p_ptc:.4} vs NTC {p_ntc:.4} (margin {:+.4}); need >= 0.03",
            t_ntc - t_ptc,
            p_ptc - p_ntc
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. protocol

#[test]
fn c09_partition_integrity() {
    let seq = generate_synthetic(&SyntheticConfig::default(), 9).unwrap().sequence;
    let params = PartitionParams::default();
    let rounds = moving_partition(&seq, params).unwrap();
    let recs = seq.records();

    let mut ok = rounds.len() == 5 && verify_partition(&seq, &rounds, 5).is_ok();
    for (i, r) in rounds.iter().enumerate() {
        let max_train = recs[r.train.clone()].iter().map(|x| x.timestamp).max().unwrap();
        let min_test = recs[r.test.clone()].iter().map(|x| x.timestamp).min().unwrap();
        ok &= min_test >= max_train;
        for later in &rounds[i + 1..] {
            ok &= r.test.end <= later.test.start;
        }
    }

    // The check that guards every evaluation rejects broken partitions.
    let mut overlapping: Vec<PartitionRound> = rounds.clone();
    overlapping[2].test.start -= 1;
    overlapping[1].test.end += 1;
    let mut leaking = rounds.clone();
    leaking[0].train = leaking[0].train.start..leaking[0].test.end;
    leaking[0].test = 0..10;
    let rejects = verify_partition(&seq, &overlapping, 5).is_err()
        && verify_partition(&seq, &leaking, 5).is_err()
        && verify_partition(&seq, &rounds[..4], 5).is_err();

    let bad_cfg = RunConfig {
        rounds: 4,
        ..desk_config(&[], 0)
    };
    let eval_refuses = evaluate(&bad_cfg, &seq, UtcOffset::UTC).is_err();
    verdict(
        9,
        ok && rejects && eval_refuses,
        format!(
            "{} rounds, test parts {:?}; invariants hold: {ok}; tampered partitions rejected: {rejects}; \
             eval refuses inconsistent round count: {eval_refuses}",
            rounds.len(),
            rounds.iter().map(|r| r.test.clone()).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. determinism

#[test]
fn c10_eval_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let base = RunConfig {
        epochs: 2,
        stream_hidden: [8, 8],
        stream_output: 4,
        lstm_hidden: 4,
        head_hidden: 4,
        contexts: vec!["NTC:1P:1D:4".into(), "PTC:1D:3W:4".into()],
        seed: 7,
        ..RunConfig::default()
    };
    let mut outputs = Vec::new();
    for (name, parallel) in [("a", false), ("b", false), ("c", true)] {
        let cfg = RunConfig {
            output_dir: tmp.path().join(name),
            parallel_rounds: parallel,
            ..base.clone()
        };
        let mut guard = OutputGuard::new();
        run_eval(&cfg, &mut guard).unwrap();
        guard.commit();
        let read = |f: &str| std::fs::read(cfg.output_dir.join(f)).unwrap();
        outputs.push((read("report.csv"), read("report.txt")));
    }
    let identical = outputs[0] == outputs[1];
    let parallel_identical = outputs[0] == outputs[2];
    verdict(
        10,
        identical && parallel_identical,
        format!(
            "two sequential eval runs byte-identical: {identical}; parallel-rounds run identical: {parallel_identical} \
             ({} + {} bytes)",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    );
}
