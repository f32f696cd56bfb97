//! GCN layers, linear maps and the pair readout, each with a hand-written
//! backward pass.

use rand::Rng as _;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::subgraph::EnclosingSubgraph;

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    /// Glorot-uniform initialization.
    pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Self::new(Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit)))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Sparse `D̃^{-1/2} (A + I) D̃^{-1/2}` of a small undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormAdj {
    /// `neighbors(i)` must be symmetric and loop-free.
    pub fn from_neighbors<'a>(n: usize, neighbors: impl Fn(usize) -> &'a [usize]) -> Self {
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| 1.0 / ((neighbors(i).len() + 1) as f64).sqrt())
            .collect();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            let mut entries: Vec<usize> = neighbors(i).to_vec();
            entries.push(i);
            entries.sort_unstable();
            for j in entries {
                cols.push(j);
                vals.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            offsets.push(cols.len());
        }
        NormAdj { offsets, cols, vals }
    }

    pub fn from_subgraph(sub: &EnclosingSubgraph) -> Self {
        Self::from_neighbors(sub.node_count(), |i| sub.neighbors(i))
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        Self::from_neighbors(n, |i| &lists[i])
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.node_count();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                m.set(i, self.cols[k], self.vals[k]);
            }
        }
        m
    }

    /// `Â · h`. `Â` is symmetric, so this also serves the backward pass.
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.node_count() {
            return Err(Error::shape(format!(
                "adjacency over {} nodes applied to {} rows",
                self.node_count(),
                h.rows()
            )));
        }
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for i in 0..self.node_count() {
            let orow = out.row_mut(i);
            for k in self.offsets[i]..self.offsets[i + 1] {
                let w = self.vals[k];
                for (o, x) in orow.iter_mut().zip(h.row(self.cols[k])) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }
}

/// `ReLU(Â H W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: Parameter,
    pub bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct GcnCache {
    aggregated: Matrix,
    pub output: Matrix,
}

#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl GcnLayer {
    pub fn new(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        GcnLayer {
            weight: Parameter::glorot(d_in, d_out, rng),
            bias: Parameter::zeros(1, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, adj: &NormAdj, h: &Matrix) -> Result<GcnCache> {
        if h.cols() != self.d_in() {
            return Err(Error::shape(format!(
                "GCN layer expects width {}, got {}",
                self.d_in(),
                h.cols()
            )));
        }
        let aggregated = adj.apply(h)?;
        let mut output = aggregated.matmul(&self.weight.value)?;
        let bias = self.bias.value.row(0);
        for r in 0..output.rows() {
            for (o, b) in output.row_mut(r).iter_mut().zip(bias) {
                *o = (*o + b).max(0.0);
            }
        }
        Ok(GcnCache { aggregated, output })
    }

    /// Returns `∂L/∂H` and the parameter gradients.
    pub fn backward(&self, adj: &NormAdj, cache: &GcnCache, d_out: &Matrix) -> Result<(Matrix, GcnGrads)> {
        let mut d_pre = d_out.clone();
        for (g, &o) in d_pre.as_mut_slice().iter_mut().zip(cache.output.as_slice()) {
            if o <= 0.0 {
                *g = 0.0;
            }
        }
        let weight = cache.aggregated.t_matmul(&d_pre)?;
        let bias = d_pre.column_sums();
        let d_agg = d_pre.matmul_t(&self.weight.value)?;
        let d_h = adj.apply(&d_agg)?;
        Ok((d_h, GcnGrads { weight, bias }))
    }
}

/// `y = x W + b` on row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    pub fn new(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        Linear {
            weight: Parameter::glorot(d_in, d_out, rng),
            bias: Parameter::zeros(1, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in() {
            return Err(Error::shape(format!(
                "linear layer expects width {}, got {}",
                self.d_in(),
                x.len()
            )));
        }
        let mut y = self.bias.value.row(0).to_vec();
        for (i, &xi) in x.iter().enumerate() {
            for (o, w) in y.iter_mut().zip(self.weight.value.row(i)) {
                *o += xi * w;
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &[f64], d_y: &[f64]) -> (Vec<f64>, LinearGrads) {
        let w = &self.weight.value;
        let d_x = (0..w.rows())
            .map(|i| w.row(i).iter().zip(d_y).map(|(a, b)| a * b).sum())
            .collect();
        let weight = Matrix::from_fn(w.rows(), w.cols(), |i, o| x[i] * d_y[o]);
        (
            d_x,
            LinearGrads {
                weight,
                bias: Matrix::row_vector(d_y.to_vec()),
            },
        )
    }
}

/// Pools node states into one pair vector:
/// `linear([mean(H), H[u], H[v], H[u] ⊙ H[v]])`, the product block only
/// when `pair_product` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub proj: Linear,
    pub pair_product: bool,
}

impl Readout {
    pub fn new(width: usize, out: usize, pair_product: bool, rng: &mut Rng) -> Self {
        let blocks = if pair_product { 4 } else { 3 };
        Readout {
            proj: Linear::new(blocks * width, out, rng),
            pair_product,
        }
    }

    pub fn pooled(&self, h: &Matrix, u: usize, v: usize) -> Result<Vec<f64>> {
        if h.rows() < 2 || u >= h.rows() || v >= h.rows() {
            return Err(Error::shape("readout needs at least two rows and valid targets"));
        }
        let c = h.cols();
        let mut pooled = h.column_sums().as_slice().to_vec();
        let n = h.rows() as f64;
        pooled.iter_mut().for_each(|x| *x /= n);
        pooled.extend_from_slice(h.row(u));
        pooled.extend_from_slice(h.row(v));
        if self.pair_product {
            pooled.extend((0..c).map(|k| h.get(u, k) * h.get(v, k)));
        }
        Ok(pooled)
    }

    pub fn forward(&self, h: &Matrix, u: usize, v: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let pooled = self.pooled(h, u, v)?;
        let out = self.proj.forward(&pooled)?;
        Ok((pooled, out))
    }

    pub fn backward(&self, h: &Matrix, u: usize, v: usize, pooled: &[f64], d_out: &[f64]) -> (Matrix, LinearGrads) {
        let (d_pooled, grads) = self.proj.backward(pooled, d_out);
        let c = h.cols();
        let n = h.rows();
        let mut d_h = Matrix::zeros(n, c);
        let d_mean = &d_pooled[..c];
        for r in 0..n {
            for (g, &dm) in d_h.row_mut(r).iter_mut().zip(d_mean) {
                *g = dm / n as f64;
            }
        }
        for k in 0..c {
            let mut du = d_pooled[c + k];
            let mut dv = d_pooled[2 * c + k];
            if self.pair_product {
                let dp = d_pooled[3 * c + k];
                du += dp * h.get(v, k);
                dv += dp * h.get(u, k);
            }
            d_h.set(u, k, d_h.get(u, k) + du);
            d_h.set(v, k, d_h.get(v, k) + dv);
        }
        (d_h, grads)
    }
}

/// Stack of GCN layers followed by the pair readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gnn {
    pub layers: Vec<GcnLayer>,
    pub readout: Readout,
}

pub struct GnnCache {
    layers: Vec<GcnCache>,
    pooled: Vec<f64>,
}

pub struct GnnGrads {
    pub layers: Vec<GcnGrads>,
    pub readout: LinearGrads,
}

impl Gnn {
    pub fn new(d_in: usize, hidden: &[usize], out: usize, pair_product: bool, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = d_in;
        for &h in hidden {
            layers.push(GcnLayer::new(width, h, rng));
            width = h;
        }
        Gnn {
            layers,
            readout: Readout::new(width, out, pair_product, rng),
        }
    }

    pub fn forward(&self, adj: &NormAdj, x: &Matrix, u: usize, v: usize) -> Result<(Vec<f64>, GnnCache)> {
        let mut caches: Vec<GcnCache> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = caches.last().map_or(x, |c| &c.output);
            let cache = layer.forward(adj, input)?;
            caches.push(cache);
        }
        let last = caches.last().map_or(x, |c| &c.output);
        let (pooled, z) = self.readout.forward(last, u, v)?;
        Ok((
            z,
            GnnCache {
                layers: caches,
                pooled,
            },
        ))
    }

    /// Parameter gradients and `∂L/∂x`.
    pub fn backward(&self, adj: &NormAdj, x: &Matrix, u: usize, v: usize, cache: &GnnCache, d_z: &[f64]) -> Result<(GnnGrads, Matrix)> {
        let last = cache.layers.last().map_or(x, |c| &c.output);
        let (mut d_h, readout) = self.readout.backward(last, u, v, &cache.pooled, d_z);
        let mut layers = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (d_in, g) = layer.backward(adj, c, &d_h)?;
            layers.push(g);
            d_h = d_in;
        }
        layers.reverse();
        Ok((GnnGrads { layers, readout }, d_h))
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.readout.proj.weight);
        out.push(&self.readout.proj.bias);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.readout.proj.weight);
        out.push(&mut self.readout.proj.bias);
        out
    }
}

impl GnnGrads {
    /// Gradients in [`Gnn::parameters`] order.
    pub fn into_flat(self) -> Vec<Matrix> {
        let mut out = Vec::new();
        for g in self.layers {
            out.push(g.weight);
            out.push(g.bias);
        }
        out.push(self.readout.weight);
        out.push(self.readout.bias);
        out
    }
}
