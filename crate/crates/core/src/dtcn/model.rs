use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::attention_weights;
use super::{DtcnError, ModelConfig, PreparedData};
use crate::dataset::{PostRecord, UserPostSequence, USER_FEATURE_DIM};
use crate::numerics::{
    dropout, read_checkpoint, softmax, write_checkpoint, Bound, Dense, LstmCell, NumericsError, ParamStore, Tape,
    Tensor, Var,
};

const BUFFER_PREFIX: &str = "buffer.";

/// `sign(x) ln(1 + |x|)`: compresses heavy-tailed count features.
pub fn signed_log(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

/// Per-feature standardization fitted on training records. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalers {
    pub user_mean: Vec<f64>,
    pub user_std: Vec<f64>,
    pub visual_mean: Vec<f64>,
    pub visual_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(columns: usize, rows: impl Iterator<Item = Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; columns];
    let mut sq = vec![0.0; columns];
    let mut n = 0.0;
    for r in rows {
        for (j, v) in r.into_iter().enumerate() {
            sum[j] += v;
            sq[j] += v * v;
        }
        n += 1.0;
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| guard((s / n - m * m).max(0.0).sqrt()))
        .collect();
    (mean, std)
}

fn guard(std: f64) -> f64 {
    if std > 1e-9 {
        std
    } else {
        1.0
    }
}

impl Scalers {
    pub fn identity(visual_dim: usize) -> Self {
        Self {
            user_mean: vec![0.0; USER_FEATURE_DIM],
            user_std: vec![1.0; USER_FEATURE_DIM],
            visual_mean: vec![0.0; visual_dim],
            visual_std: vec![1.0; visual_dim],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    pub fn fit(seq: &UserPostSequence, indices: &[usize]) -> Self {
        let recs = seq.records();
        let rows = || indices.iter().map(|&i| &recs[i]);
        let (user_mean, user_std) = mean_std(
            USER_FEATURE_DIM,
            rows().map(|r| r.user_features.iter().map(|&x| signed_log(x)).collect()),
        );
        let (visual_mean, visual_std) = mean_std(seq.visual_dim(), rows().map(|r| r.visual_features.clone()));
        let (tm, ts) = mean_std(1, rows().map(|r| vec![r.popularity().value]));
        Self {
            user_mean,
            user_std,
            visual_mean,
            visual_std,
            target_mean: tm[0],
            target_std: ts[0],
        }
    }

    fn push_user(&self, raw: &[f64], out: &mut Vec<f64>) {
        for ((x, m), s) in raw.iter().zip(&self.user_mean).zip(&self.user_std) {
            out.push((signed_log(*x) - m) / s);
        }
    }

    fn push_visual(&self, raw: &[f64], out: &mut Vec<f64>) {
        for ((x, m), s) in raw.iter().zip(&self.visual_mean).zip(&self.visual_std) {
            out.push((x - m) / s);
        }
    }

    pub fn scale_target(&self, s: f64) -> f64 {
        (s - self.target_mean) / self.target_std
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }

    fn entries(&self) -> Vec<(String, Tensor)> {
        vec![
            ("user_mean".into(), Tensor::vector(self.user_mean.clone())),
            ("user_std".into(), Tensor::vector(self.user_std.clone())),
            ("visual_mean".into(), Tensor::vector(self.visual_mean.clone())),
            ("visual_std".into(), Tensor::vector(self.visual_std.clone())),
            ("target".into(), Tensor::vector(vec![self.target_mean, self.target_std])),
        ]
    }

    fn from_entries(visual_dim: usize, entries: HashMap<String, Tensor>) -> Result<Self, DtcnError> {
        let take = |name: &str, len: usize| -> Result<Vec<f64>, DtcnError> {
            let t = entries
                .get(name)
                .ok_or_else(|| DtcnError::Checkpoint(format!("missing buffer `{name}`")))?;
            if t.len() != len {
                return Err(DtcnError::Checkpoint(format!("buffer `{name}` has {} values, expected {len}", t.len())));
            }
            Ok(t.data().to_vec())
        };
        let target = take("target", 2)?;
        Ok(Self {
            user_mean: take("user_mean", USER_FEATURE_DIM)?,
            user_std: take("user_std", USER_FEATURE_DIM)?,
            visual_mean: take("visual_mean", visual_dim)?,
            visual_std: take("visual_std", visual_dim)?,
            target_mean: target[0],
            target_std: target[1],
        })
    }
}

/// Parameters and structure of the full network.
#[derive(Debug, Clone)]
pub struct DtcnModel {
    config: ModelConfig,
    visual_dim: usize,
    params: ParamStore,
    user_stream: [Dense; 3],
    photo_stream: [Dense; 3],
    /// Neighboring then periodic; identical when shared.
    lstms: [LstmCell; 2],
    head: [Dense; 2],
    scalers: Scalers,
}

/// Output of a batched forward pass.
pub(crate) struct BatchGraph {
    /// `[B, 1]` predictions in standardized units.
    pub pred: Var,
    /// Scalar training objective.
    pub loss: Var,
}

fn stream_layers<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, cfg: &ModelConfig, rng: &mut R) -> [Dense; 3] {
    let [h1, h2] = cfg.stream_hidden;
    [
        Dense::new(store, &format!("{prefix}.0"), input, h1, rng),
        Dense::new(store, &format!("{prefix}.1"), h1, h2, rng),
        Dense::new(store, &format!("{prefix}.2"), h2, cfg.stream_output, rng),
    ]
}

impl DtcnModel {
    pub fn new(config: ModelConfig, visual_dim: usize, seed: u64) -> Result<Self, DtcnError> {
        config.validate()?;
        if visual_dim == 0 {
            return Err(DtcnError::Config("visual_dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let user_stream = stream_layers(&mut params, "user", USER_FEATURE_DIM, &config, &mut rng);
        let photo_stream = stream_layers(&mut params, "photo", visual_dim, &config, &mut rng);
        let (input, hidden) = (config.lstm_input(), config.lstm_hidden);
        let lstms = if config.share_lstm {
            let l = LstmCell::new(&mut params, "lstm", input, hidden, &mut rng);
            [l, l]
        } else {
            [
                LstmCell::new(&mut params, "ntc_lstm", input, hidden, &mut rng),
                LstmCell::new(&mut params, "ptc_lstm", input, hidden, &mut rng),
            ]
        };
        let head_in = config.embedding_dim() + 2 * hidden;
        let head = [
            Dense::new(&mut params, "head.0", head_in, config.head_hidden, &mut rng),
            Dense::new(&mut params, "head.1", config.head_hidden, 1, &mut rng),
        ];
        Ok(Self {
            config,
            visual_dim,
            params,
            user_stream,
            photo_stream,
            lstms,
            head,
            scalers: Scalers::identity(visual_dim),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn visual_dim(&self) -> usize {
        self.visual_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn scalers(&self) -> &Scalers {
        &self.scalers
    }

    pub fn set_scalers(&mut self, scalers: Scalers) -> Result<(), DtcnError> {
        if scalers.visual_mean.len() != self.visual_dim || scalers.visual_std.len() != self.visual_dim {
            return Err(DtcnError::InputLength {
                what: "visual scaler",
                expected: self.visual_dim,
                got: scalers.visual_mean.len(),
            });
        }
        self.scalers = scalers;
        Ok(())
    }

    fn check_record(&self, r: &PostRecord) -> Result<(), DtcnError> {
        if r.user_features.len() != USER_FEATURE_DIM {
            return Err(DtcnError::InputLength {
                what: "user features",
                expected: USER_FEATURE_DIM,
                got: r.user_features.len(),
            });
        }
        if r.visual_features.len() != self.visual_dim {
            return Err(DtcnError::InputLength {
                what: "visual features",
                expected: self.visual_dim,
                got: r.visual_features.len(),
            });
        }
        Ok(())
    }

    fn stream<R: Rng>(
        &self,
        tape: &mut Tape,
        p: &Bound,
        layers: &[Dense; 3],
        mut x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NumericsError> {
        for (i, layer) in layers.iter().enumerate() {
            x = layer.forward(tape, p, x)?;
            x = tape.tanh(x)?;
            if i < 2 {
                x = dropout(tape, x, self.config.dropout, training, rng)?;
            }
        }
        Ok(x)
    }

    /// User and photo stream outputs for already-scaled `[R, 5]` and
    /// `[R, D_v]` inputs.
    fn embed<R: Rng>(
        &self,
        tape: &mut Tape,
        p: &Bound,
        user: Tensor,
        visual: Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<(Var, Var), NumericsError> {
        let u = tape.constant(user);
        let v = tape.constant(visual);
        let xu = self.stream(tape, p, &self.user_stream, u, training, rng)?;
        let xv = self.stream(tape, p, &self.photo_stream, v, training, rng)?;
        Ok((xu, xv))
    }

    /// Joint embedding `[x_u; x_v]` of one user-post pair from raw features.
    pub fn embed_pair<R: Rng>(
        &self,
        user_features: &[f64],
        visual_features: &[f64],
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>, DtcnError> {
        if user_features.len() != USER_FEATURE_DIM {
            return Err(DtcnError::InputLength {
                what: "user features",
                expected: USER_FEATURE_DIM,
                got: user_features.len(),
            });
        }
        if visual_features.len() != self.visual_dim {
            return Err(DtcnError::InputLength {
                what: "visual features",
                expected: self.visual_dim,
                got: visual_features.len(),
            });
        }
        let mut u = Vec::with_capacity(USER_FEATURE_DIM);
        self.scalers.push_user(user_features, &mut u);
        let mut v = Vec::with_capacity(self.visual_dim);
        self.scalers.push_visual(visual_features, &mut v);
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let (xu, xv) = self.embed(
            &mut tape,
            &p,
            Tensor::from_parts(vec![1, USER_FEATURE_DIM], u),
            Tensor::from_parts(vec![1, self.visual_dim], v),
            training,
            rng,
        )?;
        let z = tape.concat(&[xu, xv])?;
        Ok(tape.value(z).data().to_vec())
    }

    /// Builds the forward pass and training objective for a batch of target
    /// record indices.
    pub(crate) fn batch_graph<R: Rng>(
        &self,
        tape: &mut Tape,
        p: &Bound,
        data: &PreparedData<'_>,
        targets: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<BatchGraph, DtcnError> {
        let b = targets.len();
        if b == 0 {
            return Err(DtcnError::EmptyTrainSet);
        }
        let recs = data.seq.records();
        if let Some(&bad) = targets.iter().find(|&&t| t >= recs.len()) {
            return Err(DtcnError::IndexOutOfRange(bad));
        }

        // Every record the batch touches is embedded exactly once.
        let mut row_of: HashMap<usize, usize> = HashMap::new();
        let mut unique = Vec::new();
        let mut intern = |i: usize| {
            *row_of.entry(i).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        };
        let target_rows: Vec<usize> = targets.iter().map(|&t| intern(t)).collect();
        for s in 0..2 {
            for &t in targets {
                data.context(s, t).iter().for_each(|&j| {
                    intern(j);
                });
            }
        }
        let mut user = Vec::with_capacity(unique.len() * USER_FEATURE_DIM);
        let mut visual = Vec::with_capacity(unique.len() * self.visual_dim);
        for &i in &unique {
            self.check_record(&recs[i])?;
            self.scalers.push_user(&recs[i].user_features, &mut user);
            self.scalers.push_visual(&recs[i].visual_features, &mut visual);
        }
        let n = unique.len();
        let (xu, xv) = self.embed(
            tape,
            p,
            Tensor::from_parts(vec![n, USER_FEATURE_DIM], user),
            Tensor::from_parts(vec![n, self.visual_dim], visual),
            training,
            rng,
        )?;
        let z = tape.concat(&[xu, xv])?;
        let z_target = tape.gather_rows(z, &target_rows)?;

        let hidden = self.config.lstm_hidden;
        let mut readouts = Vec::with_capacity(2);
        for s in 0..2 {
            let ctxs: Vec<&[usize]> = targets.iter().map(|&t| data.context(s, t)).collect();
            let k = ctxs.iter().map(|c| c.len()).max().unwrap_or(0);
            if k == 0 {
                readouts.push(tape.constant(Tensor::zeros(&[b, hidden])));
                continue;
            }
            // Left-pad so every context ends at the last step.
            let mut weights = vec![0.0; b * k];
            for (bi, ctx) in ctxs.iter().enumerate() {
                if ctx.is_empty() {
                    continue;
                }
                let tvs: Vec<[f64; 4]> = ctx.iter().map(|&j| data.time_vectors[j]).collect();
                let (_, w) = attention_weights(&data.time_vectors[targets[bi]], &tvs, self.config.eps_clamp);
                let pad = k - ctx.len();
                weights[bi * k + pad..(bi + 1) * k].copy_from_slice(&w);
            }
            let cell = &self.lstms[s];
            let mut h = tape.constant(Tensor::zeros(&[b, hidden]));
            let mut c = tape.constant(Tensor::zeros(&[b, hidden]));
            let mut states = Vec::with_capacity(k);
            for step in 0..k {
                let mut rows = Vec::with_capacity(b);
                let mut live = Vec::with_capacity(b);
                let mut pops = Vec::with_capacity(b);
                for ctx in &ctxs {
                    let pad = k - ctx.len();
                    if step >= pad {
                        let j = ctx[step - pad];
                        rows.push(row_of[&j]);
                        live.push(true);
                        pops.push(self.scalers.scale_target(data.popularity[j]));
                    } else {
                        rows.push(0);
                        live.push(false);
                        pops.push(0.0);
                    }
                }
                let mut x = tape.gather_rows(z, &rows)?;
                if self.config.context_popularity {
                    let pv = tape.constant(Tensor::from_parts(vec![b, 1], pops));
                    x = tape.concat(&[x, pv])?;
                }
                let (h2, c2) = cell.step(
                    tape,
                    p,
                    x,
                    h,
                    c,
                    self.config.gate_activation,
                    self.config.candidate_activation,
                )?;
                if live.iter().all(|&l| l) {
                    (h, c) = (h2, c2);
                } else {
                    h = tape.select_rows(&live, h2, h)?;
                    c = tape.select_rows(&live, c2, c)?;
                }
                states.push(h);
            }
            readouts.push(tape.weighted_sum(&states, weights)?);
        }

        let joint = tape.concat(&[z_target, readouts[0], readouts[1]])?;
        let hid = self.head[0].forward(tape, p, joint)?;
        let hid = tape.tanh(hid)?;
        let pred = self.head[1].forward(tape, p, hid)?;

        let truth: Vec<f64> = targets
            .iter()
            .map(|&t| self.scalers.scale_target(data.popularity[t]))
            .collect();
        let truth = tape.constant(Tensor::from_parts(vec![b, 1], truth));
        let mut loss = tape.mse(pred, truth)?;
        if self.config.lambda_emb > 0.0 {
            let u = tape.gather_rows(xu, &target_rows)?;
            let v = tape.gather_rows(xv, &target_rows)?;
            let su = tape.softmax(u)?;
            let sv = tape.softmax(v)?;
            let d = tape.sub(su, sv)?;
            let align = tape.sum_squares(d)?;
            let align = tape.scale(align, self.config.lambda_emb / b as f64)?;
            loss = tape.add(loss, align)?;
        }
        Ok(BatchGraph { pred, loss })
    }

    /// Eval-mode predictions in popularity units, in `targets` order.
    pub fn predict_indices(&self, data: &PreparedData<'_>, targets: &[usize]) -> Result<Vec<f64>, DtcnError> {
        let mut out = Vec::with_capacity(targets.len());
        // Eval mode draws no random numbers; the generator only satisfies the
        // signature.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in targets.chunks(128) {
            let mut tape = Tape::new();
            let p = self.params.bind(&mut tape);
            let g = self.batch_graph(&mut tape, &p, data, chunk, false, &mut rng)?;
            out.extend(tape.value(g.pred).data().iter().map(|&y| self.scalers.unscale_target(y)));
        }
        Ok(out)
    }

    /// Prediction for one target.
    pub fn forward<R: Rng>(
        &self,
        data: &PreparedData<'_>,
        target: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<f64, DtcnError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let g = self.batch_graph(&mut tape, &p, data, &[target], training, rng)?;
        Ok(self.scalers.unscale_target(tape.value(g.pred).item()))
    }

    pub fn write_checkpoint<W: Write>(&self, w: W) -> Result<(), DtcnError> {
        let buffers: Vec<(String, Tensor)> = self
            .scalers
            .entries()
            .into_iter()
            .map(|(n, t)| (format!("{BUFFER_PREFIX}{n}"), t))
            .collect();
        let entries = self
            .params
            .entries()
            .chain(buffers.iter().map(|(n, t)| (n.as_str(), t)));
        write_checkpoint(w, entries)?;
        Ok(())
    }

    /// Rebuilds a model of the given shape and loads its values.
    pub fn read_checkpoint<R: Read>(config: ModelConfig, visual_dim: usize, r: R) -> Result<Self, DtcnError> {
        let mut model = Self::new(config, visual_dim, 0)?;
        let mut params = Vec::new();
        let mut buffers = HashMap::new();
        for (name, t) in read_checkpoint(r)? {
            match name.strip_prefix(BUFFER_PREFIX) {
                Some(b) => {
                    buffers.insert(b.to_string(), t);
                }
                None => params.push((name, t)),
            }
        }
        model.params.load(params)?;
        model.scalers = Scalers::from_entries(visual_dim, buffers)?;
        Ok(model)
    }
}

/// `||softmax(x_u) - softmax(x_v)||^2`.
pub fn embedding_loss(x_u: &[f64], x_v: &[f64]) -> Result<f64, DtcnError> {
    if x_u.len() != x_v.len() || x_u.is_empty() {
        return Err(DtcnError::InputLength {
            what: "embedding",
            expected: x_u.len(),
            got: x_v.len(),
        });
    }
    let (a, b) = (softmax(x_u), softmax(x_v));
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum())
}
