use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DtcnError, DtcnModel, PreparedData, Scalers, TrainConfig};
use crate::numerics::{clip_global_norm, NumericsError, RmspropState, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training objective per epoch.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Fits the feature scalers on `targets` and trains with RMSprop.
pub fn train(
    model: &mut DtcnModel,
    data: &PreparedData<'_>,
    targets: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport, DtcnError> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(DtcnError::EmptyTrainSet);
    }
    model.set_scalers(Scalers::fit(data.seq, targets))?;
    let mut opt = RmspropState::new(cfg.optimizer, model.params())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut order = targets.to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let diverged = |source: NumericsError| DtcnError::Diverged {
                epoch,
                batch: bi + 1,
                source,
            };
            let mut tape = Tape::new();
            let p = model.params().bind(&mut tape);
            let g = match model.batch_graph(&mut tape, &p, data, batch, true, &mut rng) {
                Err(DtcnError::Numerics(e @ NumericsError::NonFinite { .. })) => return Err(diverged(e)),
                other => other?,
            };
            let loss = tape.value(g.loss).item();
            let grads = tape.backward(g.loss)?;
            let mut grads = p.gradients(&tape, &grads);
            if grads.iter().flatten().any(|v| !v.is_finite()) {
                return Err(diverged(NumericsError::NonFinite { op: "backward" }));
            }
            if cfg.clip_norm > 0.0 {
                clip_global_norm(&mut grads, cfg.clip_norm);
            }
            opt.step(model.params_mut(), &grads)?;
            total += loss * batch.len() as f64;
        }
        let epoch_loss = total / order.len() as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6}");
        history.push(epoch_loss);
        if epoch_loss < best {
            best = epoch_loss;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                return Ok(TrainReport {
                    loss_history: history,
                    stopped_early: true,
                });
            }
        }
    }
    Ok(TrainReport {
        loss_history: history,
        stopped_early: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub post_id: String,
    pub predicted: f64,
    pub truth: f64,
}

/// Eval-mode predictions for `targets`, order preserved.
pub fn predict(model: &DtcnModel, data: &PreparedData<'_>, targets: &[usize]) -> Result<Vec<Prediction>, DtcnError> {
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let preds = model.predict_indices(data, targets)?;
    Ok(targets
        .iter()
        .zip(preds)
        .map(|(&t, predicted)| Prediction {
            post_id: data.seq.records()[t].post_id.clone(),
            predicted,
            truth: data.popularity(t),
        })
        .collect())
}
