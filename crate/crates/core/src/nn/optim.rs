use serde::{Deserialize, Serialize};

use super::net::DenseNet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anything exposing an ordered, fixed list of trainable tensors.
pub trait Parameterized<T: Scalar> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;
}

impl<T: Scalar> Parameterized<T> for DenseNet<T> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        DenseNet::params_mut(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimState<T: Scalar> {
    pub method: Method,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    /// Weight-clip bound; only set for WGAN adversaries.
    pub w_clip: Option<T>,
    step: u64,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> OptimState<T> {
    pub fn sgd(learning_rate: T) -> Self {
        Self::with_method(Method::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: T) -> Self {
        Self::with_method(Method::Adam, learning_rate)
    }

    pub fn with_method(method: Method, learning_rate: T) -> Self {
        Self {
            method,
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            w_clip: None,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn with_betas(mut self, beta1: T, beta2: T) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_clip(mut self, bound: T) -> Self {
        self.w_clip = Some(bound);
        self
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the populated gradients, then clears them.
    pub fn step<M: Parameterized<T> + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        if !(self.learning_rate > T::zero()) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        let mut params = model.params_mut();
        if params.iter().any(|p| p.grad().is_none()) {
            return Err(Error::Contract(
                "optimizer step requested before gradients were populated".into(),
            ));
        }
        if self.method == Method::Adam && self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.method == Method::Adam
            && (self.first_moment.len() != params.len()
                || self.first_moment.iter().zip(&params).any(|(m, p)| m.len() != p.len()))
        {
            return Err(Error::Dimension("moment buffers do not match parameters".into()));
        }
        self.step += 1;
        let lr = self.learning_rate;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let t = self.step as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        for (pi, p) in params.iter_mut().enumerate() {
            let grad = p.grad().expect("checked above").to_vec();
            match self.method {
                Method::Sgd => {
                    for (w, g) in p.data_mut().iter_mut().zip(&grad) {
                        *w -= lr * *g;
                    }
                }
                Method::Adam => {
                    let m = &mut self.first_moment[pi];
                    let v = &mut self.second_moment[pi];
                    for (i, w) in p.data_mut().iter_mut().enumerate() {
                        let g = grad[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * g;
                        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        *w -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
            if let Some(c) = self.w_clip {
                for w in p.data_mut() {
                    *w = w.max(-c).min(c);
                }
            }
            p.clear_grad();
            if !p.all_finite() {
                return Err(Error::Contract("non-finite parameter after update".into()));
            }
        }
        Ok(())
    }
}
