//! Attention fusion of the two channel embeddings and the three-term
//! binary cross-entropy objective.

use super::layers::{Linear, LinearGrads, Parameter};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-12;

/// Shared attention head plus the shared classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// `h' x h`
    pub w: Parameter,
    /// `1 x h'`
    pub b: Parameter,
    /// `1 x h'`
    pub q: Parameter,
    /// Maps any pair embedding (`z_t`, `z_s` or fused) to one logit.
    pub classifier: Linear,
    pub alpha_loss: f64,
    pub beta_loss: f64,
}

impl FusionParams {
    pub fn new(h: usize, h_att: usize, rng: &mut Rng) -> Self {
        FusionParams {
            w: Parameter::glorot(h_att, h, rng),
            b: Parameter::zeros(1, h_att),
            q: Parameter::glorot(1, h_att, rng),
            classifier: Linear::new(h, 1, rng),
            alpha_loss: 1.0,
            beta_loss: 1.0,
        }
    }

    pub fn width(&self) -> usize {
        self.w.value.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_loss >= 0.0 && self.beta_loss >= 0.0) {
            return Err(Error::validation("loss weights alpha and beta must be non-negative"));
        }
        Ok(())
    }

    /// `q · tanh(W z + b)` and the hidden activation.
    fn score(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let w = &self.w.value;
        let b = self.b.value.row(0);
        let q = self.q.value.row(0);
        let act: Vec<f64> = (0..w.rows())
            .map(|r| (w.row(r).iter().zip(z).map(|(a, x)| a * x).sum::<f64>() + b[r]).tanh())
            .collect();
        (act.iter().zip(q).map(|(a, q)| a * q).sum(), act)
    }

    pub fn logit(&self, z: &[f64]) -> Result<f64> {
        Ok(self.classifier.forward(z)?[0])
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.w, &self.b, &self.q, &self.classifier.weight, &self.classifier.bias]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w,
            &mut self.b,
            &mut self.q,
            &mut self.classifier.weight,
            &mut self.classifier.bias,
        ]
    }
}

/// Both channel embeddings of one pair and their attention-weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbedding {
    pub z_t: Vec<f64>,
    pub z_s: Vec<f64>,
    pub fused: Vec<f64>,
    /// `(α_T, α_S)`
    pub weights: (f64, f64),
    /// Raw attention scores `(ω_T, ω_S)`.
    pub scores: (f64, f64),
    act_t: Vec<f64>,
    act_s: Vec<f64>,
}

/// Two-way softmax, shifted by the max for stability.
pub fn softmax2(a: f64, b: f64) -> (f64, f64) {
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let s = ea + eb;
    (ea / s, eb / s)
}

pub fn attention_fuse(params: &FusionParams, z_t: &[f64], z_s: &[f64]) -> Result<PairEmbedding> {
    let h = params.width();
    if z_t.len() != h || z_s.len() != h {
        return Err(Error::shape(format!(
            "fusion expects width {h}, got {} and {}",
            z_t.len(),
            z_s.len()
        )));
    }
    let (om_t, act_t) = params.score(z_t);
    let (om_s, act_s) = params.score(z_s);
    let (a_t, a_s) = softmax2(om_t, om_s);
    let fused = z_t.iter().zip(z_s).map(|(t, s)| a_t * t + a_s * s).collect();
    Ok(PairEmbedding {
        z_t: z_t.to_vec(),
        z_s: z_s.to_vec(),
        fused,
        weights: (a_t, a_s),
        scores: (om_t, om_s),
        act_t,
        act_s,
    })
}

#[derive(Debug, Clone)]
pub struct FusionGrads {
    pub w: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub d_z_t: Vec<f64>,
    pub d_z_s: Vec<f64>,
}

/// Backpropagates `∂L/∂fused` through the weighted sum, the softmax and both
/// attention scores.
pub fn attention_backward(params: &FusionParams, pair: &PairEmbedding, d_fused: &[f64]) -> FusionGrads {
    let (a_t, a_s) = pair.weights;
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let da_t = dot(d_fused, &pair.z_t);
    let da_s = dot(d_fused, &pair.z_s);
    let mean = a_t * da_t + a_s * da_s;
    let dom_t = a_t * (da_t - mean);
    let dom_s = a_s * (da_s - mean);

    let q = params.q.value.row(0);
    let w = &params.w.value;
    let (h_att, h) = w.shape();
    let mut gw = Matrix::zeros(h_att, h);
    let mut gb = vec![0.0; h_att];
    let mut gq = vec![0.0; h_att];
    let mut d_z_t: Vec<f64> = d_fused.iter().map(|g| a_t * g).collect();
    let mut d_z_s: Vec<f64> = d_fused.iter().map(|g| a_s * g).collect();
    for (dom, act, z, dz) in [
        (dom_t, &pair.act_t, &pair.z_t, &mut d_z_t),
        (dom_s, &pair.act_s, &pair.z_s, &mut d_z_s),
    ] {
        for r in 0..h_att {
            gq[r] += dom * act[r];
            let d_pre = dom * q[r] * (1.0 - act[r] * act[r]);
            gb[r] += d_pre;
            for c in 0..h {
                gw.set(r, c, gw.get(r, c) + d_pre * z[c]);
                dz[c] += d_pre * w.get(r, c);
            }
        }
    }
    FusionGrads {
        w: gw,
        b: Matrix::row_vector(gb),
        q: Matrix::row_vector(gq),
        d_z_t,
        d_z_s,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// BCE of a logit against `y`, with the probability clamped. Returns the
/// loss and `∂loss/∂logit` (zero where the clamp is active).
pub fn bce_with_logit(logit: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(logit);
    let clamped = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let loss = -y * clamped.ln() - (1.0 - y) * (1.0 - clamped).ln();
    let grad = if p == clamped { p - y } else { 0.0 };
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    pub total: f64,
    /// `(topology, semantic, fused)` logits.
    pub logits: (f64, f64, f64),
}

#[derive(Debug, Clone)]
pub struct JointLossGrads {
    pub d_z_t: Vec<f64>,
    pub d_z_s: Vec<f64>,
    pub d_fused: Vec<f64>,
    pub classifier: LinearGrads,
}

fn check_label(y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("link label must be 0 or 1, got {y}")))
    }
}

/// `α·BCE(z_t) + β·BCE(z_s) + BCE(fused)` through the shared classifier.
pub fn joint_loss(pair: &PairEmbedding, y: f64, params: &FusionParams) -> Result<JointLoss> {
    Ok(joint_loss_with_grad(pair, y, params)?.0)
}

pub fn joint_loss_with_grad(pair: &PairEmbedding, y: f64, params: &FusionParams) -> Result<(JointLoss, JointLossGrads)> {
    check_label(y)?;
    params.validate()?;
    let head = &params.classifier;
    let terms = [
        (params.alpha_loss, &pair.z_t),
        (params.beta_loss, &pair.z_s),
        (1.0, &pair.fused),
    ];
    let mut total = 0.0;
    let mut logits = [0.0; 3];
    let mut d_inputs: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut gw = Matrix::zeros(head.d_in(), 1);
    let mut gb = Matrix::zeros(1, 1);
    for (k, (weight, z)) in terms.into_iter().enumerate() {
        let logit = head.forward(z)?[0];
        logits[k] = logit;
        let (loss, g) = bce_with_logit(logit, y);
        total += weight * loss;
        let (d_z, lg) = head.backward(z, &[weight * g]);
        gw.add_assign(&lg.weight);
        gb.add_assign(&lg.bias);
        d_inputs.push(d_z);
    }
    let d_fused = d_inputs.pop().unwrap();
    let d_z_s = d_inputs.pop().unwrap();
    let d_z_t = d_inputs.pop().unwrap();
    Ok((
        JointLoss {
            total,
            logits: (logits[0], logits[1], logits[2]),
        },
        JointLossGrads {
            d_z_t,
            d_z_s,
            d_fused,
            classifier: LinearGrads { weight: gw, bias: gb },
        },
    ))
}
