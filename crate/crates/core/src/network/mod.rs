//! Two-layer fully connected fragment scorer.
//!
//! ```text
//! X (m x D) --FC-1--> Z1 --ReLU--> R --dropout--> A1 --FC-2--> z2 --sigmoid--> scores
//!                                  |
//!                                  +--> clustering representation
//! ```
//!
//! The clustering representation is `R`, taken after the ReLU and before
//! dropout, so it is a deterministic function of the parameters.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng::RngHandle;

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    /// FC-1 weights, `D x H1`.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// FC-2 weights, one per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub dropout_rate: f64,
}

impl Model {
    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_params(&self) -> usize {
        let h = self.hidden_width();
        self.input_dim() * h + h + h + 1
    }

    /// Parameter blocks in canonical order: W1, b1, W2, b2.
    pub fn param_blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            &self.b1,
            &self.w2,
            std::slice::from_ref(&self.b2),
        ]
    }

    pub fn param_blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            &mut self.w2,
            std::slice::from_mut(&mut self.b2),
        ]
    }

    /// All parameters flattened in canonical order.
    pub fn params(&self) -> Vec<f64> {
        self.param_blocks().concat()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "model has {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for block in self.param_blocks_mut() {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.param_blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Initialize a scorer with Glorot-uniform weights and zero biases.
pub fn init_model(
    input_dim: usize,
    hidden_width: usize,
    dropout_rate: f64,
    rng: RngHandle,
) -> Result<Model> {
    if input_dim == 0 || hidden_width == 0 {
        return Err(Error::InvalidConfig(format!(
            "network dims must be >= 1, got D={input_dim}, H1={hidden_width}"
        )));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::InvalidConfig(format!(
            "dropout rate must be in [0, 1), got {dropout_rate}"
        )));
    }
    let mut r = rng.stream();
    let limit1 = (6.0 / (input_dim + hidden_width) as f64).sqrt();
    let limit2 = (6.0 / (hidden_width + 1) as f64).sqrt();
    let w1: Vec<f64> = (0..input_dim * hidden_width)
        .map(|_| r.random_range(-limit1..=limit1))
        .collect();
    let w2: Vec<f64> = (0..hidden_width)
        .map(|_| r.random_range(-limit2..=limit2))
        .collect();
    Ok(Model {
        w1: Matrix::from_vec(input_dim, hidden_width, w1)?,
        b1: vec![0.0; hidden_width],
        w2,
        b2: 0.0,
        dropout_rate,
    })
}

pub enum Mode<'a> {
    /// Dropout active, masks drawn from the given generator.
    Train(&'a mut dyn RngCore),
    Infer,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub input: Matrix,
    pub z1: Matrix,
    /// Post-ReLU, pre-dropout hidden representation.
    pub hidden: Matrix,
    /// Inverted-dropout mask: each entry is 0 or `1/(1-p)`.
    pub mask: Matrix,
    pub logits: Vec<f64>,
    pub scores: Vec<f64>,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn forward(model: &Model, x: &Matrix, mode: Mode<'_>) -> Result<ForwardCache> {
    let (m, d) = x.shape();
    if d != model.input_dim() {
        return Err(Error::Shape(format!(
            "input has {d} features, model expects {}",
            model.input_dim()
        )));
    }
    let h = model.hidden_width();

    let mut z1 = Matrix::zeros(m, h);
    for i in 0..m {
        let xi = x.row(i);
        let zi = z1.row_mut(i);
        zi.copy_from_slice(&model.b1);
        for (a, &xv) in xi.iter().enumerate() {
            if xv != 0.0 {
                for (z, &w) in zi.iter_mut().zip(model.w1.row(a)) {
                    *z += xv * w;
                }
            }
        }
    }
    let mut hidden = z1.clone();
    hidden
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = v.max(0.0));

    let mut mask = Matrix::zeros(m, h);
    match mode {
        Mode::Train(rng) if model.dropout_rate > 0.0 => {
            let p = model.dropout_rate;
            let scale = 1.0 / (1.0 - p);
            for v in mask.as_mut_slice() {
                *v = if rng.random::<f64>() < p { 0.0 } else { scale };
            }
        }
        _ => mask.as_mut_slice().iter_mut().for_each(|v| *v = 1.0),
    }

    let mut logits = Vec::with_capacity(m);
    let mut dropped = vec![0.0; h];
    for i in 0..m {
        for ((o, &r), &k) in dropped.iter_mut().zip(hidden.row(i)).zip(mask.row(i)) {
            *o = r * k;
        }
        logits.push(dot(&dropped, &model.w2) + model.b2);
    }
    let scores = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok(ForwardCache {
        input: x.clone(),
        z1,
        hidden,
        mask,
        logits,
        scores,
    })
}

/// Inference-mode scores only.
pub fn score(model: &Model, x: &Matrix) -> Result<Vec<f64>> {
    forward(model, x, Mode::Infer).map(|c| c.scores)
}

/// Gradients with the same block layout as [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let (d, h) = model.w1.shape();
        Self {
            w1: Matrix::zeros(d, h),
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            &self.b1,
            &self.w2,
            std::slice::from_ref(&self.b2),
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }
}

/// Backpropagate a scalar loss given its partials with respect to the scores
/// and, optionally, the pre-dropout hidden representation.
///
/// `d_hidden` joins after dropout (clustering reads the undropped values) and
/// before the ReLU gate.
#[allow(clippy::needless_range_loop)]
pub fn backward(
    model: &Model,
    cache: &ForwardCache,
    d_scores: &[f64],
    d_hidden: Option<&Matrix>,
) -> Result<Gradients> {
    let (m, d) = cache.input.shape();
    let h = model.hidden_width();
    if d != model.input_dim() || cache.z1.shape() != (m, h) || cache.mask.shape() != (m, h) {
        return Err(Error::Shape(
            "forward cache does not belong to this model".into(),
        ));
    }
    if d_scores.len() != m || cache.scores.len() != m {
        return Err(Error::Shape(format!(
            "score gradient has length {}, expected {m}",
            d_scores.len()
        )));
    }
    if let Some(g) = d_hidden {
        if g.shape() != (m, h) {
            return Err(Error::Shape(format!(
                "hidden gradient is {:?}, expected {:?}",
                g.shape(),
                (m, h)
            )));
        }
    }

    let mut grads = Gradients::zeros_like(model);
    let mut d_z1_row = vec![0.0; h];
    for i in 0..m {
        let s = cache.scores[i];
        let dz2 = d_scores[i] * s * (1.0 - s);
        grads.b2 += dz2;
        let mask = cache.mask.row(i);
        let hid = cache.hidden.row(i);
        let z1 = cache.z1.row(i);
        for u in 0..h {
            grads.w2[u] += dz2 * hid[u] * mask[u];
            let mut d_r = dz2 * model.w2[u] * mask[u];
            if let Some(g) = d_hidden {
                d_r += g.get(i, u);
            }
            d_z1_row[u] = if z1[u] > 0.0 { d_r } else { 0.0 };
        }
        for (b, &g) in grads.b1.iter_mut().zip(&d_z1_row) {
            *b += g;
        }
        for (a, &xv) in cache.input.row(i).iter().enumerate() {
            if xv != 0.0 {
                for (w, &g) in grads.w1.row_mut(a).iter_mut().zip(&d_z1_row) {
                    *w += xv * g;
                }
            }
        }
    }
    Ok(grads)
}
