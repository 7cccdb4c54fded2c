//! Finite-difference check of the whole network at toy size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ContextSpecs, DtcnError, DtcnModel, ModelConfig, PreparedData, Scalers};
use crate::dataset::{generate_synthetic, SyntheticConfig};
use crate::numerics::gradcheck::{check_gradients, CheckOutcome, GradCheckConfig, LossEval};
use crate::numerics::{Activation, Tape};

pub fn micro_config(gate: Activation) -> ModelConfig {
    ModelConfig {
        stream_hidden: [4, 4],
        stream_output: 4,
        lstm_hidden: 8,
        head_hidden: 4,
        gate_activation: gate,
        ..ModelConfig::default()
    }
}

/// Checks every parameter of a micro-model (8 visual dims, contexts of at
/// most 3 items, dropout active with fixed masks) against central
/// differences of the full training objective.
pub fn micro_model_check(seed: u64, gate: Activation, cfg: GradCheckConfig) -> Result<CheckOutcome, DtcnError> {
    let data_cfg = SyntheticConfig {
        n_users: 4,
        n_records: 40,
        visual_dim: 8,
        span_days: 4,
        ..SyntheticConfig::default()
    };
    let synth = generate_synthetic(&data_cfg, seed)?;
    let seq = &synth.sequence;
    let specs = ContextSpecs {
        ntc: Some("NTC:1P:1D:3".parse()?),
        ptc: Some("PTC:1P:3D:3".parse()?),
    };
    let data = PreparedData::new(seq, data_cfg.utc_offset, specs);
    let mut model = DtcnModel::new(micro_config(gate), 8, seed)?;
    let all: Vec<usize> = (0..seq.len()).collect();
    model.set_scalers(Scalers::fit(seq, &all))?;
    let targets: Vec<usize> = (seq.len() - 4..seq.len()).collect();

    let name = format!("micro_model_{}_seed{seed}", gate.name());
    let template = model.clone();
    check_gradients(&name, model.params_mut(), cfg, |params, want| {
        let mut m = template.clone();
        m.params_mut().tensors_mut().clone_from_slice(params.tensors());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let p = m.params().bind(&mut tape);
        let g = m.batch_graph(&mut tape, &p, &data, &targets, true, &mut rng)?;
        let grads = if want {
            let gr = tape.backward(g.loss)?;
            Some(p.gradients(&tape, &gr))
        } else {
            None
        };
        Ok(LossEval {
            loss: tape.value(g.loss).item(),
            grads,
        })
    })
}
