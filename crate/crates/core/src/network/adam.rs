use serde::{Deserialize, Serialize};

use super::{Gradients, Model};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon.is_finite()
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid Adam settings {self:?}"
            )))
        }
    }
}

/// Moment accumulators, flattened in the model's canonical parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let n = model.num_params();
        Self {
            config,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
        }
    }

    /// In-place bias-corrected Adam update.
    pub fn apply(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        let n = model.num_params();
        let gn: usize = grads.blocks().iter().map(|b| b.len()).sum();
        if gn != n || self.first_moment.len() != n || self.second_moment.len() != n {
            return Err(Error::Shape(format!(
                "Adam state for {} params, gradients {gn}, model {n}",
                self.first_moment.len()
            )));
        }
        if grads.w1.shape() != model.w1.shape() {
            return Err(Error::Shape("gradient W1 shape differs from model".into()));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let params = model
            .param_blocks_mut()
            .into_iter()
            .flat_map(|b| b.iter_mut());
        let gs = grads.blocks().into_iter().flatten();
        let moments = self
            .first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut());
        for ((p, &g), (m, v)) in params.zip(gs).zip(moments) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::apply`].
pub fn adam_step(
    model: &Model,
    grads: &Gradients,
    state: &AdamState,
) -> Result<(Model, AdamState)> {
    let mut model = model.clone();
    let mut state = state.clone();
    state.apply(&mut model, grads)?;
    Ok((model, state))
}
