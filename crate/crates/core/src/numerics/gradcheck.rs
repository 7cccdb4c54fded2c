//! Central finite-difference verification of analytic gradients.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, Bound, Dense, LstmCell, NumericsError, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            rel_tol: 1e-6,
            abs_floor: 1e-8,
        }
    }
}

impl GradCheckConfig {
    pub fn agrees(&self, analytic: f64, numeric: f64) -> bool {
        let diff = (analytic - numeric).abs();
        diff <= self.abs_floor || diff <= self.rel_tol * analytic.abs().max(numeric.abs())
    }
}

/// Loss value and, when requested, per-parameter gradients in store order.
pub struct LossEval {
    pub loss: f64,
    pub grads: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    pub max_rel_error: f64,
    pub worst_parameter: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:<28} checked={:<6} failures={:<4} max_rel_err={:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.failures,
            self.max_rel_error
        )?;
        if let (false, Some(p)) = (self.passed(), &self.worst_parameter) {
            write!(f, " worst={p}")?;
        }
        Ok(())
    }
}

/// Compares the gradients reported by `eval` against central differences
/// on every scalar of every parameter in `store`.
pub fn check_gradients<E: From<NumericsError>>(
    name: &str,
    store: &mut ParamStore,
    cfg: GradCheckConfig,
    mut eval: impl FnMut(&ParamStore, bool) -> Result<LossEval, E>,
) -> Result<CheckOutcome, E> {
    let analytic = eval(store, true)?
        .grads
        .ok_or(NumericsError::EmptyInput("gradient"))?;
    let mut out = CheckOutcome {
        name: name.to_string(),
        checked: 0,
        failures: 0,
        max_rel_error: 0.0,
        worst_parameter: None,
    };
    let ids: Vec<_> = store.ids().collect();
    for (p, id) in ids.into_iter().enumerate() {
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + cfg.step;
            let plus = eval(store, false)?.loss;
            store.get_mut(id).data_mut()[i] = orig - cfg.step;
            let minus = eval(store, false)?.loss;
            store.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[p][i];
            let scale = a.abs().max(numeric.abs());
            let rel = if scale > 0.0 { (a - numeric).abs() / scale } else { 0.0 };
            out.checked += 1;
            if !cfg.agrees(a, numeric) {
                out.failures += 1;
                if rel >= out.max_rel_error {
                    out.worst_parameter = Some(format!("{}[{i}]", store.name(id)));
                }
            }
            if (a - numeric).abs() > cfg.abs_floor {
                out.max_rel_error = out.max_rel_error.max(rel);
            }
        }
    }
    Ok(out)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).expect("non-empty shape")
}

/// Values kept at least `gap` away from the kinks of hard_sigmoid.
fn kink_free(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor {
    let mut t = random_tensor(rng, shape, 4.0);
    for v in t.data_mut() {
        if (v.abs() - 2.5).abs() < gap {
            *v = v.signum() * (2.5 + gap);
        }
    }
    t
}

type Builder = Box<dyn Fn(&mut Tape, &Bound, &[crate::numerics::ParamId]) -> Result<Var, NumericsError>>;

fn run_case(
    name: &str,
    mut store: ParamStore,
    cfg: GradCheckConfig,
    rng: &mut ChaCha8Rng,
    build: Builder,
) -> Result<CheckOutcome, NumericsError> {
    let ids: Vec<_> = store.ids().collect();
    let probe = {
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let y = build(&mut tape, &bound, &ids)?;
        tape.value(y).len()
    };
    // A fixed random projection turns any output into a scalar loss with a
    // non-trivial upstream gradient.
    let proj: Vec<f64> = (0..probe).map(|_| rng.random_range(-1.0..1.0)).collect();
    check_gradients(name, &mut store, cfg, |s, want| {
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape);
        let y = build(&mut tape, &bound, &ids)?;
        let y = tape.mul_const(y, proj.clone())?;
        let loss = tape.sum(y)?;
        let grads = if want {
            let g = tape.backward(loss)?;
            Some(bound.gradients(&tape, &g))
        } else {
            None
        };
        Ok(LossEval {
            loss: tape.value(loss).item(),
            grads,
        })
    })
}

fn store_of(tensors: Vec<Tensor>) -> ParamStore {
    let mut s = ParamStore::new();
    for (i, t) in tensors.into_iter().enumerate() {
        s.add(format!("x{i}"), t);
    }
    s
}

/// Finite-difference checks for every differentiable primitive, an LSTM
/// unrolled over three steps and a random three-layer network.
pub fn primitive_checks(seed: u64, cfg: GradCheckConfig) -> Result<Vec<CheckOutcome>, NumericsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut out = Vec::new();
    macro_rules! case {
        ($name:expr, [$($t:expr),*], $f:expr) => {{
            let store = store_of(vec![$($t),*]);
            out.push(run_case($name, store, cfg, r, Box::new($f))?);
        }};
    }
    let (m, k, n) = (3, 4, 2);
    let a = random_tensor(r, &[m, k], 1.0);
    let b = random_tensor(r, &[k, n], 1.0);
    case!("matmul", [a, b], |t, p, i| t.matmul(p.var(i[0]), p.var(i[1])));
    let (a, b) = (random_tensor(r, &[m, k], 1.0), random_tensor(r, &[m, k], 1.0));
    case!("add", [a.clone(), b.clone()], |t, p, i| t.add(p.var(i[0]), p.var(i[1])));
    case!("sub", [a.clone(), b.clone()], |t, p, i| t.sub(p.var(i[0]), p.var(i[1])));
    case!("mul", [a.clone(), b], |t, p, i| t.mul(p.var(i[0]), p.var(i[1])));
    let row = random_tensor(r, &[k], 1.0);
    case!("add_row", [a.clone(), row], |t, p, i| t.add_row(p.var(i[0]), p.var(i[1])));
    let col = random_tensor(r, &[m], 1.0);
    case!("mul_col", [a.clone(), col], |t, p, i| t.mul_col(p.var(i[0]), p.var(i[1])));
    case!("scale", [a.clone()], |t, p, i| t.scale(p.var(i[0]), -1.7));
    case!("shift", [a.clone()], |t, p, i| t.shift(p.var(i[0]), 0.3));
    let mask: Vec<f64> = (0..m * k).map(|j| if j % 3 == 0 { 0.0 } else { 2.0 }).collect();
    case!("mul_const", [a.clone()], move |t, p, i| t.mul_const(p.var(i[0]), mask.clone()));
    let wide = random_tensor(r, &[m, k], 2.0);
    case!("tanh", [wide.clone()], |t, p, i| t.tanh(p.var(i[0])));
    case!("sigmoid", [wide.clone()], |t, p, i| t.sigmoid(p.var(i[0])));
    let hs = kink_free(r, &[m, k], 0.05);
    case!("hard_sigmoid", [hs], |t, p, i| t.hard_sigmoid(p.var(i[0])));
    case!("square", [wide.clone()], |t, p, i| t.square(p.var(i[0])));
    case!("softmax", [wide.clone()], |t, p, i| t.softmax(p.var(i[0])));
    let c = random_tensor(r, &[m, 2], 1.0);
    case!("concat", [a.clone(), c], |t, p, i| t.concat(&[p.var(i[0]), p.var(i[1]), p.var(i[0])]));
    case!("slice_cols", [a.clone()], |t, p, i| t.slice_cols(p.var(i[0]), 1, 2));
    case!("gather_rows", [a.clone()], |t, p, i| t.gather_rows(p.var(i[0]), &[2, 0, 2, 1]));
    let b = random_tensor(r, &[m, k], 1.0);
    case!("select_rows", [a.clone(), b.clone()], |t, p, i| t
        .select_rows(&[true, false, true], p.var(i[0]), p.var(i[1])));
    let w: Vec<f64> = (0..m * 2).map(|_| r.random_range(0.0..1.0)).collect();
    case!("weighted_sum", [a.clone(), b.clone()], move |t, p, i| t
        .weighted_sum(&[p.var(i[0]), p.var(i[1])], w.clone()));
    case!("sum", [a.clone()], |t, p, i| t.sum(p.var(i[0])));
    case!("mean", [a.clone()], |t, p, i| t.mean(p.var(i[0])));
    case!("sum_squares", [a.clone()], |t, p, i| t.sum_squares(p.var(i[0])));
    case!("mse", [a.clone(), b], |t, p, i| t.mse(p.var(i[0]), p.var(i[1])));

    for (name, gate) in [("lstm_unroll_sigmoid", Activation::Sigmoid), ("lstm_unroll_hard_sigmoid", Activation::HardSigmoid)] {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "lstm", 3, 4, r);
        let xs: Vec<Tensor> = (0..3).map(|_| random_tensor(r, &[2, 3], 1.0)).collect();
        let f: Builder = Box::new(move |t, p, _| {
            let mut h = t.constant(Tensor::zeros(&[2, 4]));
            let mut c = t.constant(Tensor::zeros(&[2, 4]));
            for x in &xs {
                let x = t.constant(x.clone());
                (h, c) = cell.step(t, p, x, h, c, gate, Activation::Tanh)?;
            }
            Ok(h)
        });
        out.push(run_case(name, store, cfg, r, f)?);
    }

    let mut store = ParamStore::new();
    let layers = [
        Dense::new(&mut store, "l1", 5, 6, r),
        Dense::new(&mut store, "l2", 6, 4, r),
        Dense::new(&mut store, "l3", 4, 1, r),
    ];
    let x = random_tensor(r, &[4, 5], 1.0);
    let y = random_tensor(r, &[4, 1], 1.0);
    let f: Builder = Box::new(move |t, p, _| {
        let mut h = t.constant(x.clone());
        for (j, l) in layers.iter().enumerate() {
            h = l.forward(t, p, h)?;
            if j < 2 {
                h = t.tanh(h)?;
            }
        }
        let target = t.constant(y.clone());
        t.mse(h, target)
    });
    out.push(run_case("three_layer_network", store, cfg, r, f)?);
    Ok(out)
}
