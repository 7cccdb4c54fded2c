use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Bound, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    HardSigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, NumericsError> {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::HardSigmoid => tape.hard_sigmoid(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::HardSigmoid => "hard_sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "hard_sigmoid" => Ok(Activation::HardSigmoid),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let weight = store.add(format!("{prefix}.weight"), glorot_uniform(input, output, rng));
        let bias = store.add(format!("{prefix}.bias"), Tensor::zeros(&[output]));
        Self {
            weight,
            bias,
            input,
            output,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Var, NumericsError> {
        let y = tape.matmul(x, params.var(self.weight))?;
        tape.add_row(y, params.var(self.bias))
    }
}

/// LSTM cell with fused gate weights, columns ordered input, forget, output,
/// candidate.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_x = store.add(format!("{prefix}.w_x"), glorot_uniform(input, 4 * hidden, rng));
        let w_h = store.add(format!("{prefix}.w_h"), glorot_uniform(hidden, 4 * hidden, rng));
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{prefix}.bias"), Tensor::vector(b));
        Self {
            w_x,
            w_h,
            bias,
            input,
            hidden,
        }
    }

    /// One step over a batch: `x` is `[B, input]`, `h` and `c` are
    /// `[B, hidden]`. Returns `(h', c')`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        tape: &mut Tape,
        params: &Bound,
        x: Var,
        h: Var,
        c: Var,
        gate: Activation,
        candidate: Activation,
    ) -> Result<(Var, Var), NumericsError> {
        let n = self.hidden;
        let zx = tape.matmul(x, params.var(self.w_x))?;
        let zh = tape.matmul(h, params.var(self.w_h))?;
        let z = tape.add(zx, zh)?;
        let z = tape.add_row(z, params.var(self.bias))?;
        let i = tape.slice_cols(z, 0, n)?;
        let i = gate.apply(tape, i)?;
        let f = tape.slice_cols(z, n, n)?;
        let f = gate.apply(tape, f)?;
        let o = tape.slice_cols(z, 2 * n, n)?;
        let o = gate.apply(tape, o)?;
        let g = tape.slice_cols(z, 3 * n, n)?;
        let g = candidate.apply(tape, g)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next)?;
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

fn check_rate(rate: f64) -> Result<(), NumericsError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumericsError::InvalidHyperparameter {
            name: "dropout rate",
            value: rate,
        });
    }
    Ok(())
}

/// Inverted-dropout mask: zero with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>, NumericsError> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Inverted dropout in training mode, identity otherwise (and for rate 0).
pub fn dropout<R: Rng>(tape: &mut Tape, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var, NumericsError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).len(), rate, rng)?;
    tape.mul_const(x, mask)
}
