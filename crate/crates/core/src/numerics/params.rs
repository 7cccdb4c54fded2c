use rand::Rng;

use super::{NumericsError, Tape, Tensor, Var};

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_parts(vec![rows, cols], data)
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Replaces every value from `(name, tensor)` pairs. The set of names and
    /// their shapes must match exactly.
    pub fn load(&mut self, entries: Vec<(String, Tensor)>) -> Result<(), NumericsError> {
        if entries.len() != self.tensors.len() {
            return Err(NumericsError::Checkpoint(format!(
                "expected {} parameters, found {}",
                self.tensors.len(),
                entries.len()
            )));
        }
        for (name, t) in entries {
            let id = self.find(&name).ok_or(NumericsError::UnknownParameter(name))?;
            let slot = &mut self.tensors[id.0];
            if slot.shape() != t.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "load",
                    left: slot.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(())
    }

    /// Puts every parameter on `tape` as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self.tensors.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        Bound { vars }
    }
}

/// Tape handles of a bound [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Gradient per parameter, in store order; zeros where unreached.
    pub fn gradients(&self, tape: &Tape, grads: &super::Gradients) -> Vec<Vec<f64>> {
        self.vars.iter().map(|&v| grads.get_or_zeros(v, tape.value(v).len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = glorot_uniform(10, 20, &mut rng);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= limit));
        assert_eq!(t.shape(), &[10, 20]);
    }

    #[test]
    fn load_checks_names_and_shapes() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[2, 2]));
        assert!(s.load(vec![("v".into(), Tensor::zeros(&[2, 2]))]).is_err());
        assert!(s.load(vec![("w".into(), Tensor::zeros(&[4]))]).is_err());
        s.load(vec![("w".into(), Tensor::full(&[2, 2], 3.0))]).unwrap();
        assert_eq!(s.get(s.find("w").unwrap()).data(), &[3.0; 4]);
    }

    #[test]
    fn unreached_bound_gradient_is_zero() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::vector(vec![1.0, 2.0]));
        s.add("b", Tensor::vector(vec![5.0]));
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape);
        let loss = tape.sum_squares(bound.var(a)).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(bound.gradients(&tape, &g), vec![vec![2.0, 4.0], vec![0.0]]);
    }
}
