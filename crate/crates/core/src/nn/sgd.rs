use super::{Gradients, NnError, ParamStore};

/// Plain SGD with inverse-time learning-rate decay and L2 weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub eta0: f64,
    pub decay: f64,
    pub lambda: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd {
            eta0: 0.1,
            decay: 0.05,
            lambda: 1e-6,
        }
    }
}

impl Sgd {
    /// Learning rate for zero-based epoch `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.eta0 / (1.0 + self.decay * epoch as f64)
    }

    /// `θ ← θ − lr·(g + λ·θ)` on every trainable tensor. Nothing is modified when any
    /// gradient is non-finite.
    pub fn update(
        &self,
        store: &mut ParamStore,
        grads: &Gradients,
        lr: f64,
    ) -> Result<(), NnError> {
        for (id, p) in store.iter() {
            if let Some(g) = grads.get(id) {
                if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                    return Err(NnError::NonFinite(format!("gradient {}[{i}]", p.name)));
                }
            }
        }
        let ids: Vec<_> = store
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, _)| id)
            .collect();
        for id in ids {
            let lambda = self.lambda;
            let grad = grads.get(id);
            let value = store.value_mut(id).data_mut();
            match grad {
                Some(g) => {
                    for (v, g) in value.iter_mut().zip(g) {
                        *v -= lr * (g + lambda * *v);
                    }
                }
                None if lambda != 0.0 => {
                    for v in value.iter_mut() {
                        *v -= lr * lambda * *v;
                    }
                }
                None => {}
            }
            if let Some(i) = value.iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite(format!(
                    "updated parameter {}[{i}]",
                    store.get(id).name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Graph, Tensor};

    #[test]
    fn schedule() {
        let sgd = Sgd::default();
        assert_eq!(sgd.learning_rate(0), 0.1);
        assert!((sgd.learning_rate(10) - 0.1 / 1.5).abs() < 1e-15);
        assert_eq!(sgd.lambda, 1e-6);
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut s = ParamStore::new();
        let t = s.add("t", Tensor::from_vec(&[2], vec![1.5, -3.0]).unwrap(), true);
        let before = s.clone();
        let sgd = Sgd {
            lambda: 0.0,
            ..Sgd::default()
        };
        let mut grads = Gradients::new(s.len());
        grads.slot(t, 2);
        sgd.update(&mut s, &grads, 0.1).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn quadratic_step_matches_closed_form() {
        // loss = θ·θ, so g = 2θ and θ' = θ − lr(2θ + λθ) = θ(1 − lr(2 + λ)).
        let mut s = ParamStore::new();
        let t = s.add("t", Tensor::from_vec(&[2], vec![0.5, -2.0]).unwrap(), true);
        let frozen = s.add("f", Tensor::from_vec(&[1], vec![7.0]).unwrap(), false);
        let grads = {
            let mut g = Graph::new(&s);
            let p = g.param(t);
            let sq = g.mul(p, p);
            let l = g.sum(sq);
            g.backward(l).unwrap()
        };
        let sgd = Sgd {
            eta0: 0.1,
            decay: 0.05,
            lambda: 0.01,
        };
        sgd.update(&mut s, &grads, 0.1).unwrap();
        let factor = 1.0 - 0.1 * (2.0 + 0.01);
        for (got, want) in s.value(t).data().iter().zip([0.5 * factor, -2.0 * factor]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(s.value(frozen).data(), &[7.0]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = ParamStore::new();
        let t = s.add("t", Tensor::zeros(&[1]), true);
        let mut grads = Gradients::new(1);
        grads.slot(t, 1)[0] = f64::INFINITY;
        let before = s.clone();
        assert!(Sgd::default().update(&mut s, &grads, 0.1).is_err());
        assert_eq!(s, before);
    }
}
