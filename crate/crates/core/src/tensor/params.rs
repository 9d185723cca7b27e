use super::{lit, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub(crate) m: Tensor<T>,
    pub(crate) v: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn moments(&self) -> (&Tensor<T>, &Tensor<T>) {
        (&self.m, &self.v)
    }
}

/// Named parameters in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    step: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId, TensorError> {
        if self.find(name).is_some() {
            return Err(TensorError::DuplicateName(name.to_string()));
        }
        let zeros = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.to_string(),
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub(crate) fn set_moments(&mut self, id: ParamId, m: Tensor<T>, v: Tensor<T>) {
        let p = &mut self.params[id.0];
        p.m = m;
        p.v = v;
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.params.iter().all(|p| p.grad.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                    m: p.m.cast(),
                    v: p.v.cast(),
                })
                .collect(),
            step: self.step,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    /// One update over every parameter; gradients are zeroed afterwards.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) {
        store.step += 1;
        let t = store.step as i32;
        let (b1, b2): (T, T) = (lit(self.beta1), lit(self.beta2));
        let c1: T = lit(1.0 - self.beta1.powi(t));
        let c2: T = lit(1.0 - self.beta2.powi(t));
        let lr: T = lit(self.lr);
        let eps: T = lit(self.eps);
        for p in &mut store.params {
            let Param {
                value, grad, m, v, ..
            } = p;
            for (((w, g), m), v) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data_mut())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (T::one() - b1) * *g;
                *v = b2 * *v + (T::one() - b2) * *g * *g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w = *w - lr * mhat / (vhat.sqrt() + eps);
                *g = T::zero();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> (ParamStore<f64>, ParamId) {
        let mut s = ParamStore::new();
        let id = s
            .add("w", Tensor::new(&[values.len()], values.to_vec()).unwrap())
            .unwrap();
        (s, id)
    }

    #[test]
    fn names_are_unique() {
        let (mut s, _) = store(&[1.0]);
        assert_eq!(
            s.add("w", Tensor::zeros(&[1])),
            Err(TensorError::DuplicateName("w".into()))
        );
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut s, id) = store(&[1.0, -2.0]);
        Adam::with_lr(0.1).step(&mut s);
        assert_eq!(s.value(id).data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let (mut s, id) = store(&[1.0, 1.0, 1.0]);
        s.get_mut(id)
            .grad
            .data_mut()
            .copy_from_slice(&[3.0, -0.02, 500.0]);
        Adam::with_lr(1e-3).step(&mut s);
        let expected = [1.0 - 1e-3, 1.0 + 1e-3, 1.0 - 1e-3];
        for (w, e) in s.value(id).data().iter().zip(expected) {
            assert!((w - e).abs() < 1e-8, "{w} vs {e}");
        }
        assert!(s.grad(id).data().iter().all(|&g| g == 0.0));
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn quadratic_loss_decreases_monotonically() {
        let (mut s, id) = store(&[3.0]);
        let adam = Adam::with_lr(0.01);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let w = s.value(id).data()[0];
            let loss = w * w;
            assert!(loss < last, "loss went up: {loss} >= {last}");
            last = loss;
            s.get_mut(id).grad.data_mut()[0] = 2.0 * w;
            adam.step(&mut s);
        }
        assert!(last < 5.0);
    }
}
