//! Finite-difference verification of the hand-written backward passes.
//!
//! A probe packs a component's parameters and inputs into one flat vector
//! and exposes `x -> (objective, ∂objective/∂x)`. Vector-valued components
//! are reduced to a scalar with a fixed random projection of the output.

use rand::seq::index::sample;
use rand::Rng as _;

use super::fusion::{attention_backward, attention_fuse, joint_loss_with_grad, FusionParams};
use super::layers::{GcnLayer, Linear, NormAdj, Parameter, Readout};
use super::matrix::Matrix;
use super::model::{BsalModel, Example, ModelConfig};
use crate::graph::Graph;
use crate::rng::{self, Rng};
use crate::subgraph::{extract_enclosing, SubgraphConfig};

type Objective = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

pub struct Probe {
    pub name: &'static str,
    pub point: Vec<f64>,
    objective: Objective,
}

impl Probe {
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.objective)(x)
    }

    pub fn check(&self, eps: f64, max_coords: usize, seed: u64) -> f64 {
        grad_check(|x| self.eval(x), &self.point, eps, max_coords, seed)
    }
}

/// Largest relative error `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)` between the
/// analytic gradient and central differences. Above `max_coords` a random
/// subset of coordinates is checked.
pub fn grad_check<F>(f: F, x: &[f64], eps: f64, max_coords: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!((1e-7..=1e-4).contains(&eps), "eps must lie in [1e-7, 1e-4]");
    let (_, analytic) = f(x);
    assert_eq!(analytic.len(), x.len(), "gradient length must match the input");
    let coords: Vec<usize> = if x.len() > max_coords {
        let mut r = rng::rng_from(seed);
        sample(&mut r, x.len(), max_coords).into_vec()
    } else {
        (0..x.len()).collect()
    };
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in coords {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe).0;
        probe[i] = orig - eps;
        let minus = f(&probe).0;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

fn randn(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn take(x: &[f64], off: &mut usize, rows: usize, cols: usize) -> Matrix {
    let m = Matrix::new(rows, cols, x[*off..*off + rows * cols].to_vec()).unwrap();
    *off += rows * cols;
    m
}

fn flatten(parts: &[&Matrix]) -> Vec<f64> {
    parts.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn random_small_graph(rng: &mut Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    edges
}

/// Plain linear layer `x W + b`.
pub fn linear_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let (d_in, d_out) = (5, 4);
    let proj = randn(&mut r, d_out, 1.0);
    let point = randn(&mut r, d_in * d_out + d_out + d_in, 1.0);
    Probe {
        name: "linear",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let w = take(x, &mut off, d_in, d_out);
            let b = take(x, &mut off, 1, d_out);
            let input = x[off..off + d_in].to_vec();
            let layer = Linear {
                weight: Parameter::new(w),
                bias: Parameter::new(b),
            };
            let y = layer.forward(&input).unwrap();
            let obj = y.iter().zip(&proj).map(|(a, b)| a * b).sum();
            let (d_x, g) = layer.backward(&input, &proj);
            let mut grad = flatten(&[&g.weight, &g.bias]);
            grad.extend(d_x);
            (obj, grad)
        }),
    }
}

/// Classifier head: one logit from a pair embedding.
pub fn classifier_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let h = 6;
    let point = randn(&mut r, h + 1 + h, 1.0);
    Probe {
        name: "classifier",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let w = take(x, &mut off, h, 1);
            let b = take(x, &mut off, 1, 1);
            let z = x[off..off + h].to_vec();
            let head = Linear {
                weight: Parameter::new(w),
                bias: Parameter::new(b),
            };
            let logit = head.forward(&z).unwrap()[0];
            let (d_z, g) = head.backward(&z, &[1.0]);
            let mut grad = flatten(&[&g.weight, &g.bias]);
            grad.extend(d_z);
            (logit, grad)
        }),
    }
}

/// One GCN layer on a random 6-node graph; checks weight, bias and input.
pub fn gcn_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let (n, d_in, d_out) = (6, 4, 3);
    let adj = NormAdj::from_edges(n, &random_small_graph(&mut r, n));
    let proj = randn(&mut r, n * d_out, 1.0);
    let point = randn(&mut r, d_in * d_out + d_out + n * d_in, 1.0);
    Probe {
        name: "gcn_layer",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let w = take(x, &mut off, d_in, d_out);
            let b = take(x, &mut off, 1, d_out);
            let h = take(x, &mut off, n, d_in);
            let layer = GcnLayer {
                weight: Parameter::new(w),
                bias: Parameter::new(b),
            };
            let cache = layer.forward(&adj, &h).unwrap();
            let obj = cache.output.as_slice().iter().zip(&proj).map(|(a, b)| a * b).sum();
            let d_out_m = Matrix::new(n, d_out, proj.clone()).unwrap();
            let (d_h, g) = layer.backward(&adj, &cache, &d_out_m).unwrap();
            (obj, flatten(&[&g.weight, &g.bias, &d_h]))
        }),
    }
}

/// Pair readout including the product block.
pub fn readout_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let (n, c, out) = (5, 3, 4);
    let proj = randn(&mut r, out, 1.0);
    let point = randn(&mut r, 4 * c * out + out + n * c, 1.0);
    Probe {
        name: "readout",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let w = take(x, &mut off, 4 * c, out);
            let b = take(x, &mut off, 1, out);
            let h = take(x, &mut off, n, c);
            let readout = Readout {
                proj: Linear {
                    weight: Parameter::new(w),
                    bias: Parameter::new(b),
                },
                pair_product: true,
            };
            let (pooled, y) = readout.forward(&h, 0, 1).unwrap();
            let obj = y.iter().zip(&proj).map(|(a, b)| a * b).sum();
            let (d_h, g) = readout.backward(&h, 0, 1, &pooled, &proj);
            (obj, flatten(&[&g.weight, &g.bias, &d_h]))
        }),
    }
}

/// Attention fusion: W, b, q and both channel embeddings.
pub fn fusion_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let (h, h_att) = (5, 3);
    let proj = randn(&mut r, h, 1.0);
    let point = randn(&mut r, h_att * h + 2 * h_att + 2 * h, 1.0);
    let template = FusionParams::new(h, h_att, &mut r);
    Probe {
        name: "attention_fuse",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let mut p = template.clone();
            p.w = Parameter::new(take(x, &mut off, h_att, h));
            p.b = Parameter::new(take(x, &mut off, 1, h_att));
            p.q = Parameter::new(take(x, &mut off, 1, h_att));
            let z_t = x[off..off + h].to_vec();
            let z_s = x[off + h..off + 2 * h].to_vec();
            let pair = attention_fuse(&p, &z_t, &z_s).unwrap();
            let obj = pair.fused.iter().zip(&proj).map(|(a, b)| a * b).sum();
            let g = attention_backward(&p, &pair, &proj);
            let mut grad = flatten(&[&g.w, &g.b, &g.q]);
            grad.extend(g.d_z_t);
            grad.extend(g.d_z_s);
            (obj, grad)
        }),
    }
}

/// Fusion plus the three-term loss, differentiated w.r.t. the attention
/// parameters, the classifier and both channel embeddings.
pub fn fused_loss_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let (h, h_att) = (5, 3);
    let y = if r.random_bool(0.5) { 1.0 } else { 0.0 };
    let template = FusionParams::new(h, h_att, &mut r);
    let point = randn(&mut r, h_att * h + 2 * h_att + h + 1 + 2 * h, 1.0);
    Probe {
        name: "joint_loss_head",
        point,
        objective: Box::new(move |x| {
            let mut off = 0;
            let mut p = template.clone();
            p.w = Parameter::new(take(x, &mut off, h_att, h));
            p.b = Parameter::new(take(x, &mut off, 1, h_att));
            p.q = Parameter::new(take(x, &mut off, 1, h_att));
            p.classifier.weight = Parameter::new(take(x, &mut off, h, 1));
            p.classifier.bias = Parameter::new(take(x, &mut off, 1, 1));
            let z_t = x[off..off + h].to_vec();
            let z_s = x[off + h..off + 2 * h].to_vec();
            let pair = attention_fuse(&p, &z_t, &z_s).unwrap();
            let (loss, lg) = joint_loss_with_grad(&pair, y, &p).unwrap();
            let fg = attention_backward(&p, &pair, &lg.d_fused);
            let mut grad = flatten(&[&fg.w, &fg.b, &fg.q, &lg.classifier.weight, &lg.classifier.bias]);
            grad.extend(lg.d_z_t.iter().zip(&fg.d_z_t).map(|(a, b)| a + b));
            grad.extend(lg.d_z_s.iter().zip(&fg.d_z_s).map(|(a, b)| a + b));
            (loss.total, grad)
        }),
    }
}

/// Whole model on the enclosing subgraph of a random 10-node graph: every
/// parameter plus the semantic node features.
pub fn full_model_probe(seed: u64) -> Probe {
    let mut r = rng::rng_from(seed);
    let n = 10;
    let graph = Graph::from_edges(n, random_small_graph(&mut r, n)).unwrap();
    let sub = extract_enclosing(&graph, 0, n - 1, &SubgraphConfig { hop: 2, ..Default::default() }).unwrap();
    let y = if r.random_bool(0.5) { 1.0 } else { 0.0 };
    let ex = Example::new(&sub, y);
    let sem_dim = 4;
    let cfg = ModelConfig {
        label_dim: 8,
        semantic_dim: sem_dim,
        hidden: vec![6, 5, 4],
        pair_dim: 5,
        attention_dim: 3,
        pair_product: true,
        alpha: 1.0,
        beta: 1.0,
    };
    let mut model = BsalModel::new(cfg, r.random()).unwrap();
    // Non-zero biases so every ReLU sees a generic input.
    let mut flat = model.to_flat();
    for x in &mut flat {
        *x += r.random_range(-0.1..0.1);
    }
    model.set_flat(&flat);
    let k = model.parameter_count();
    let rows = sub.node_count();
    let mut point = flat;
    point.extend(randn(&mut r, rows * sem_dim, 1.0));
    Probe {
        name: "joint_loss_full",
        point,
        objective: Box::new(move |x| {
            let mut m = model.clone();
            m.set_flat(&x[..k]);
            let sem = Matrix::new(rows, sem_dim, x[k..].to_vec()).unwrap();
            let (loss, grads) = m.loss_and_grad_with_input(&ex, &sem).unwrap();
            let grad = grads.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
            (loss.total, grad)
        }),
    }
}

/// All probes for one seed.
pub fn all_probes(seed: u64) -> Vec<Probe> {
    vec![
        linear_probe(seed),
        classifier_probe(seed),
        gcn_probe(seed),
        readout_probe(seed),
        fusion_probe(seed),
        fused_loss_probe(seed),
        full_model_probe(seed),
    ]
}
