//! Residual MLP with batch normalization mapping `(theta, x)` to a scalar logit.
//!
//! Wiring:
//!
//! ```text
//! a0 = W_in [theta, x] + b_in
//! block(a) = relu(a + BN2(W2 relu(BN1(W1 a))))
//! logit = w_out . block_n(... block_1(a0)) + b_out
//! ```
//!
//! Dense layers feeding a batch norm carry no bias; the batch-norm shift takes
//! that role. All parameters live in one flat vector; [`ParamLayout`] records
//! where each tensor sits so the optimizer, checkpoints and gradient checks can
//! treat the network as a single `&[f64]`.

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::{gemm_ab, gemm_abt, gemm_atb, Matrix};
use crate::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchPreset {
    /// 2 residual blocks of 50 units.
    Small,
    /// 3 residual blocks of 128 units.
    Large,
}

impl ArchPreset {
    pub fn hidden_and_blocks(self) -> (usize, usize) {
        match self {
            ArchPreset::Small => (50, 2),
            ArchPreset::Large => (128, 3),
        }
    }
}

impl std::str::FromStr for ArchPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(ArchPreset::Small),
            "large" => Ok(ArchPreset::Large),
            other => Err(Error::Config(format!("unknown architecture preset {other:?}"))),
        }
    }
}

impl std::fmt::Display for ArchPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArchPreset::Small => "small",
            ArchPreset::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: usize, blocks: usize) -> Self {
        Self {
            input_dim,
            hidden,
            blocks,
        }
    }

    pub fn from_preset(preset: ArchPreset, dim_theta: usize, dim_x: usize) -> Self {
        let (hidden, blocks) = preset.hidden_and_blocks();
        Self::new(dim_theta + dim_x, hidden, blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy)]
struct DenseIdx {
    w: usize,
    b: Option<usize>,
    inp: usize,
    out: usize,
}

#[derive(Debug, Clone, Copy)]
struct NormIdx {
    gamma: usize,
    beta: usize,
}

#[derive(Debug, Clone, Copy)]
struct BlockIdx {
    d1: DenseIdx,
    n1: NormIdx,
    d2: DenseIdx,
    n2: NormIdx,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    proj: DenseIdx,
    blocks: Vec<BlockIdx>,
    out: DenseIdx,
    len: usize,
}

impl ParamLayout {
    fn new(arch: &Architecture) -> Self {
        let mut at = 0usize;
        let dense = |inp: usize, out: usize, bias: bool, at: &mut usize| {
            let w = *at;
            *at += inp * out;
            let b = if bias {
                let b = *at;
                *at += out;
                Some(b)
            } else {
                None
            };
            DenseIdx { w, b, inp, out }
        };
        let h = arch.hidden;
        let proj = dense(arch.input_dim, h, true, &mut at);
        let mut blocks = Vec::with_capacity(arch.blocks);
        for _ in 0..arch.blocks {
            let d1 = dense(h, h, false, &mut at);
            let n1 = NormIdx {
                gamma: at,
                beta: at + h,
            };
            at += 2 * h;
            let d2 = dense(h, h, false, &mut at);
            let n2 = NormIdx {
                gamma: at,
                beta: at + h,
            };
            at += 2 * h;
            blocks.push(BlockIdx { d1, n1, d2, n2 });
        }
        let out = dense(h, 1, true, &mut at);
        Self {
            proj,
            blocks,
            out,
            len: at,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Range of the output layer's weights and bias (the bias is the last entry).
    pub fn output_layer(&self) -> std::ops::Range<usize> {
        self.out.w..self.len
    }

    pub fn output_bias(&self) -> usize {
        self.out.b.expect("output layer has a bias")
    }

    /// Named tensors, for diagnostics and error messages.
    pub fn tensors(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut v = Vec::new();
        let dense = |name: &str, d: &DenseIdx, v: &mut Vec<(String, std::ops::Range<usize>)>| {
            v.push((format!("{name}.weight"), d.w..d.w + d.inp * d.out));
            if let Some(b) = d.b {
                v.push((format!("{name}.bias"), b..b + d.out));
            }
        };
        dense("input", &self.proj, &mut v);
        for (i, b) in self.blocks.iter().enumerate() {
            let h = b.d1.out;
            dense(&format!("block{i}.dense1"), &b.d1, &mut v);
            v.push((format!("block{i}.norm1.gamma"), b.n1.gamma..b.n1.gamma + h));
            v.push((format!("block{i}.norm1.beta"), b.n1.beta..b.n1.beta + h));
            dense(&format!("block{i}.dense2"), &b.d2, &mut v);
            v.push((format!("block{i}.norm2.gamma"), b.n2.gamma..b.n2.gamma + h));
            v.push((format!("block{i}.norm2.beta"), b.n2.beta..b.n2.beta + h));
        }
        dense("output", &self.out, &mut v);
        v
    }
}

/// Running batch-norm statistics for one normalization layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

struct BlockCache {
    input: Vec<f64>,
    xhat1: Vec<f64>,
    inv_std1: Vec<f64>,
    act1: Vec<f64>,
    xhat2: Vec<f64>,
    inv_std2: Vec<f64>,
    output: Vec<f64>,
}

struct ForwardCache {
    rows: usize,
    input: Vec<f64>,
    blocks: Vec<BlockCache>,
}

/// The ratio network `h_w(theta, x)`.
pub struct RatioNet {
    arch: Architecture,
    layout: ParamLayout,
    params: Vec<f64>,
    running: Vec<RunningStats>,
    mode: Mode,
    cache: Option<ForwardCache>,
}

impl Clone for RatioNet {
    fn clone(&self) -> Self {
        Self {
            arch: self.arch,
            layout: self.layout.clone(),
            params: self.params.clone(),
            running: self.running.clone(),
            mode: self.mode,
            cache: None,
        }
    }
}

impl std::fmt::Debug for RatioNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RatioNet")
            .field("arch", &self.arch)
            .field("params", &self.params.len())
            .field("mode", &self.mode)
            .finish()
    }
}

impl RatioNet {
    /// Dense weights and biases uniform in `±sqrt(1/fan_in)`; batch-norm scale 1, shift 0.
    pub fn new<R: rand::Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        if arch.input_dim == 0 || arch.hidden == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        let layout = ParamLayout::new(&arch);
        let mut params = vec![0.0; layout.len];
        let init_dense = |d: &DenseIdx, params: &mut [f64], rng: &mut R| {
            let bound = (1.0 / d.inp as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for w in &mut params[d.w..d.w + d.inp * d.out] {
                *w = dist.sample(rng);
            }
            if let Some(b) = d.b {
                for w in &mut params[b..b + d.out] {
                    *w = dist.sample(rng);
                }
            }
        };
        init_dense(&layout.proj, &mut params, rng);
        for b in &layout.blocks {
            init_dense(&b.d1, &mut params, rng);
            init_dense(&b.d2, &mut params, rng);
            for n in [b.n1, b.n2] {
                params[n.gamma..n.gamma + arch.hidden].fill(1.0);
            }
        }
        init_dense(&layout.out, &mut params, rng);
        let running = (0..2 * arch.blocks)
            .map(|_| RunningStats {
                mean: vec![0.0; arch.hidden],
                var: vec![1.0; arch.hidden],
            })
            .collect();
        Ok(Self {
            arch,
            layout,
            params,
            running,
            mode: Mode::Train,
            cache: None,
        })
    }

    /// Rebuilds a network from stored parameters and running statistics.
    pub fn from_parts(arch: Architecture, params: Vec<f64>, running: Vec<RunningStats>) -> Result<Self> {
        let layout = ParamLayout::new(&arch);
        if params.len() != layout.len {
            return Err(Error::Shape(format!(
                "architecture needs {} parameters, got {}",
                layout.len,
                params.len()
            )));
        }
        if running.len() != 2 * arch.blocks
            || running
                .iter()
                .any(|r| r.mean.len() != arch.hidden || r.var.len() != arch.hidden)
        {
            return Err(Error::Shape("running statistics do not match the architecture".into()));
        }
        Ok(Self {
            arch,
            layout,
            params,
            running,
            mode: Mode::Eval,
            cache: None,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Eval {
            self.cache = None;
        }
    }

    /// Sets the output layer to zero so every logit is exactly 0.
    pub fn zero_output_layer(&mut self) {
        let r = self.layout.output_layer();
        self.params[r].fill(0.0);
    }

    /// Forward pass on `[theta, x]` pairs, one logit per row.
    pub fn forward_pairs(&mut self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        if theta.rows() != x.rows() {
            return Err(Error::Shape(format!(
                "theta has {} rows but x has {}",
                theta.rows(),
                x.rows()
            )));
        }
        let input = theta.hstack(x)?;
        self.forward(&input)
    }

    /// Forward pass in the current mode. Train mode normalizes with batch
    /// statistics, updates running statistics and caches activations for
    /// [`RatioNet::backward`].
    pub fn forward(&mut self, input: &Matrix) -> Result<Vec<f64>> {
        match self.mode {
            Mode::Eval => self.forward_eval(input),
            Mode::Train => self.forward_train(input),
        }
    }

    /// Eval-mode forward using running statistics; never mutates the network.
    pub fn forward_eval(&self, input: &Matrix) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let n = input.rows();
        let h = self.arch.hidden;
        let p = &self.params;
        let mut a = self.dense(&self.layout.proj, input.data(), n);
        check_finite(&a, "input")?;
        let mut z = vec![0.0; n * h];
        for (bi, b) in self.layout.blocks.iter().enumerate() {
            gemm_abt(&a, &p[b.d1.w..b.d1.w + h * h], &mut z, n, h, h, 0.0);
            self.normalize_eval(&mut z, &self.running[2 * bi], b.n1);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            let mut z2 = vec![0.0; n * h];
            gemm_abt(&z, &p[b.d2.w..b.d2.w + h * h], &mut z2, n, h, h, 0.0);
            self.normalize_eval(&mut z2, &self.running[2 * bi + 1], b.n2);
            for (ai, zi) in a.iter_mut().zip(&z2) {
                *ai = (*ai + zi).max(0.0);
            }
            check_finite(&a, &format!("block{bi}"))?;
        }
        let logits = self.dense(&self.layout.out, &a, n);
        check_finite(&logits, "output")?;
        Ok(logits)
    }

    fn forward_train(&mut self, input: &Matrix) -> Result<Vec<f64>> {
        self.check_input(input)?;
        self.cache = None;
        let n = input.rows();
        let h = self.arch.hidden;
        let mut a = self.dense(&self.layout.proj, input.data(), n);
        check_finite(&a, "input")?;
        let mut blocks = Vec::with_capacity(self.arch.blocks);
        for bi in 0..self.arch.blocks {
            let b = self.layout.blocks[bi];
            let mut z1 = vec![0.0; n * h];
            gemm_abt(&a, &self.params[b.d1.w..b.d1.w + h * h], &mut z1, n, h, h, 0.0);
            let (xhat1, inv_std1) = self.normalize_train(&mut z1, 2 * bi, b.n1, n);
            z1.iter_mut().for_each(|v| *v = v.max(0.0));
            let act1 = z1;
            let mut z2 = vec![0.0; n * h];
            gemm_abt(&act1, &self.params[b.d2.w..b.d2.w + h * h], &mut z2, n, h, h, 0.0);
            let (xhat2, inv_std2) = self.normalize_train(&mut z2, 2 * bi + 1, b.n2, n);
            let mut output = z2;
            for (o, ai) in output.iter_mut().zip(&a) {
                *o = (*o + ai).max(0.0);
            }
            check_finite(&output, &format!("block{bi}"))?;
            let input_a = std::mem::replace(&mut a, output.clone());
            blocks.push(BlockCache {
                input: input_a,
                xhat1,
                inv_std1,
                act1,
                xhat2,
                inv_std2,
                output,
            });
        }
        let logits = self.dense(&self.layout.out, &a, n);
        check_finite(&logits, "output")?;
        self.cache = Some(ForwardCache {
            rows: n,
            input: input.data().to_vec(),
            blocks,
        });
        Ok(logits)
    }

    /// Gradient of a scalar loss with respect to every parameter, given
    /// `upstream[i] = dL/dlogit_i` for the rows of the last train-mode forward.
    /// Consumes the cached activations.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward requires a preceding train-mode forward".into()))?;
        let n = cache.rows;
        if upstream.len() != n {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries for {n} rows",
                upstream.len()
            )));
        }
        let h = self.arch.hidden;
        let d_in = self.arch.input_dim;
        let p = &self.params;
        let mut g = vec![0.0; self.layout.len];

        let out = self.layout.out;
        let last: &[f64] = match cache.blocks.last() {
            Some(b) => &b.output,
            None => &[],
        };
        let proj_out;
        let last = if cache.blocks.is_empty() {
            proj_out = self.dense(&self.layout.proj, &cache.input, n);
            &proj_out[..]
        } else {
            last
        };
        // output layer: logits = last . w + b
        gemm_atb(upstream, last, &mut g[out.w..out.w + h], n, 1, h, 0.0);
        g[out.b.unwrap()] = upstream.iter().sum();
        let mut d = vec![0.0; n * h];
        gemm_ab(upstream, &p[out.w..out.w + h], &mut d, n, 1, h, 0.0);

        for (bi, bc) in cache.blocks.iter().enumerate().rev() {
            let b = self.layout.blocks[bi];
            // relu after the skip connection
            for (di, o) in d.iter_mut().zip(&bc.output) {
                if *o <= 0.0 {
                    *di = 0.0;
                }
            }
            // `d` now holds dL/ds; it flows to the block input unchanged and into BN2
            let dz2 = norm_backward(&d, &bc.xhat2, &bc.inv_std2, &p[b.n2.gamma..b.n2.gamma + h], &mut g, b.n2, n, h);
            gemm_atb(&dz2, &bc.act1, &mut g[b.d2.w..b.d2.w + h * h], n, h, h, 0.0);
            let mut dact = vec![0.0; n * h];
            gemm_ab(&dz2, &p[b.d2.w..b.d2.w + h * h], &mut dact, n, h, h, 0.0);
            for (da, a) in dact.iter_mut().zip(&bc.act1) {
                if *a <= 0.0 {
                    *da = 0.0;
                }
            }
            let dz1 = norm_backward(&dact, &bc.xhat1, &bc.inv_std1, &p[b.n1.gamma..b.n1.gamma + h], &mut g, b.n1, n, h);
            gemm_atb(&dz1, &bc.input, &mut g[b.d1.w..b.d1.w + h * h], n, h, h, 0.0);
            gemm_ab(&dz1, &p[b.d1.w..b.d1.w + h * h], &mut d, n, h, h, 1.0);
        }

        let proj = self.layout.proj;
        gemm_atb(&d, &cache.input, &mut g[proj.w..proj.w + h * d_in], n, h, d_in, 0.0);
        let gb = &mut g[proj.b.unwrap()..proj.b.unwrap() + h];
        for row in d.chunks_exact(h) {
            for (a, v) in gb.iter_mut().zip(row) {
                *a += v;
            }
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
        }
        Ok(g)
    }

    /// ReLU on/off pattern of the last train-mode forward, if one is cached.
    /// Gradient checks use it to detect finite-difference steps that cross a kink.
    pub fn activation_pattern(&self) -> Option<Vec<bool>> {
        self.cache.as_ref().map(|c| {
            c.blocks
                .iter()
                .flat_map(|b| b.act1.iter().chain(&b.output).map(|v| *v > 0.0))
                .collect()
        })
    }

    /// Per-feature statistics of the normalized (pre scale/shift) values of
    /// every batch-norm layer in the last train-mode forward: `(mean, variance)`.
    pub fn normalized_stats(&self) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        let c = self.cache.as_ref()?;
        let h = self.arch.hidden;
        let mut out = Vec::new();
        for b in &c.blocks {
            for xhat in [&b.xhat1, &b.xhat2] {
                let m = Matrix::from_vec(c.rows, h, xhat.clone()).ok()?;
                out.push((m.column_means(), m.column_variances()));
            }
        }
        Some(out)
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} input columns, got {}",
                self.arch.input_dim,
                input.cols()
            )));
        }
        if !input.all_finite() {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        Ok(())
    }

    fn dense(&self, d: &DenseIdx, input: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * d.out];
        if let Some(b) = d.b {
            let bias = &self.params[b..b + d.out];
            for row in out.chunks_exact_mut(d.out) {
                row.copy_from_slice(bias);
            }
        }
        gemm_abt(input, &self.params[d.w..d.w + d.inp * d.out], &mut out, n, d.inp, d.out, 1.0);
        out
    }

    fn normalize_eval(&self, z: &mut [f64], stats: &RunningStats, idx: NormIdx) {
        let h = self.arch.hidden;
        let gamma = &self.params[idx.gamma..idx.gamma + h];
        let beta = &self.params[idx.beta..idx.beta + h];
        let scale: Vec<f64> = (0..h).map(|j| gamma[j] / (stats.var[j] + BN_EPS).sqrt()).collect();
        for row in z.chunks_exact_mut(h) {
            for j in 0..h {
                row[j] = (row[j] - stats.mean[j]) * scale[j] + beta[j];
            }
        }
    }

    /// Normalizes `z` in place with batch statistics, returning `(xhat, 1/sigma)`.
    fn normalize_train(&mut self, z: &mut [f64], layer: usize, idx: NormIdx, n: usize) -> (Vec<f64>, Vec<f64>) {
        let h = self.arch.hidden;
        let mut mean = vec![0.0; h];
        for row in z.chunks_exact(h) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; h];
        for row in z.chunks_exact(h) {
            for j in 0..h {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = vec![0.0; n * h];
        let gamma = &self.params[idx.gamma..idx.gamma + h];
        let beta = &self.params[idx.beta..idx.beta + h];
        for (row, xrow) in z.chunks_exact_mut(h).zip(xhat.chunks_exact_mut(h)) {
            for j in 0..h {
                let xh = (row[j] - mean[j]) * inv_std[j];
                xrow[j] = xh;
                row[j] = gamma[j] * xh + beta[j];
            }
        }
        let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
        let rs = &mut self.running[layer];
        for j in 0..h {
            rs.mean[j] = (1.0 - BN_MOMENTUM) * rs.mean[j] + BN_MOMENTUM * mean[j];
            rs.var[j] = (1.0 - BN_MOMENTUM) * rs.var[j] + BN_MOMENTUM * var[j] * unbias;
        }
        (xhat, inv_std)
    }
}

/// Batch-norm backward. Accumulates scale/shift gradients into `g` and returns
/// the gradient with respect to the normalized layer's input.
#[allow(clippy::too_many_arguments)]
fn norm_backward(
    dy: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    g: &mut [f64],
    idx: NormIdx,
    n: usize,
    h: usize,
) -> Vec<f64> {
    let mut sum_dy = vec![0.0; h];
    let mut sum_dy_xhat = vec![0.0; h];
    for (drow, xrow) in dy.chunks_exact(h).zip(xhat.chunks_exact(h)) {
        for j in 0..h {
            sum_dy[j] += drow[j];
            sum_dy_xhat[j] += drow[j] * xrow[j];
        }
    }
    for j in 0..h {
        g[idx.gamma + j] = sum_dy_xhat[j];
        g[idx.beta + j] = sum_dy[j];
    }
    let nf = n as f64;
    let mut dz = vec![0.0; n * h];
    for ((zrow, drow), xrow) in dz.chunks_exact_mut(h).zip(dy.chunks_exact(h)).zip(xhat.chunks_exact(h)) {
        for j in 0..h {
            // dxhat = dy * gamma; the means below carry the same gamma factor
            zrow[j] = gamma[j] * inv_std[j] * (drow[j] - sum_dy[j] / nf - xrow[j] * sum_dy_xhat[j] / nf);
        }
    }
    dz
}

fn check_finite(v: &[f64], layer: &str) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite activation in layer {layer}")))
    }
}

/// Concatenates `theta` and `x` rows into network input.
pub fn pair_input(theta: &Matrix, x: &Matrix) -> Result<Matrix> {
    theta.hstack(x)
}

#[doc(hidden)]
pub fn random_input<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_net(seed: u64) -> RatioNet {
        RatioNet::new(Architecture::new(3, 6, 2), &mut rng::stream(seed, 0)).unwrap()
    }

    #[test]
    fn zero_output_layer_gives_zero_logits() {
        let mut net = small_net(1);
        net.zero_output_layer();
        let x = random_input(5, 3, &mut rng::stream(2, 0));
        assert!(net.forward(&x).unwrap().iter().all(|&v| v == 0.0));
        net.set_mode(Mode::Eval);
        assert!(net.forward(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut net = small_net(3);
        let x = random_input(7, 3, &mut rng::stream(4, 0));
        net.forward(&x).unwrap();
        net.set_mode(Mode::Eval);
        let a = net.forward(&x).unwrap();
        let b = net.forward_eval(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_blocks_is_a_linear_map_of_the_input() {
        // input 2 -> hidden 1 (w = 2, 3; b = 0.5) -> output (w = 4, b = -1)
        let arch = Architecture::new(2, 1, 0);
        let net = RatioNet::from_parts(arch, vec![2.0, 3.0, 0.5, 4.0, -1.0], vec![]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        // (2*1 + 3*2 + 0.5) * 4 - 1 = 33
        assert_eq!(net.forward_eval(&x).unwrap(), vec![33.0]);
    }

    #[test]
    fn shape_and_state_errors() {
        let mut net = small_net(5);
        let bad = random_input(2, 4, &mut rng::stream(1, 1));
        assert!(matches!(net.forward(&bad), Err(Error::Shape(_))));
        assert!(matches!(net.backward(&[0.0, 0.0]), Err(Error::State(_))));
        let theta = random_input(2, 1, &mut rng::stream(1, 2));
        let x = random_input(3, 2, &mut rng::stream(1, 3));
        assert!(matches!(net.forward_pairs(&theta, &x), Err(Error::Shape(_))));
    }

    #[test]
    fn non_finite_input_is_a_numeric_error() {
        let net = small_net(6);
        let x = Matrix::from_rows(&[[f64::NAN, 0.0, 0.0]]).unwrap();
        assert!(matches!(net.forward_eval(&x), Err(Error::Numeric(_))));
    }

    #[test]
    fn mean_logit_loss_with_zero_output_layer() {
        let mut net = small_net(7);
        net.zero_output_layer();
        let b = 4;
        let x = random_input(b, 3, &mut rng::stream(8, 0));
        net.forward(&x).unwrap();
        let g = net.backward(&vec![1.0 / b as f64; b]).unwrap();
        assert!((g[net.layout().output_bias()] - 1.0).abs() < 1e-15);
        // with a zero output layer nothing upstream of it receives gradient
        let out_start = net.layout().output_layer().start;
        assert!(g[..out_start].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut net = small_net(9);
        let x = random_input(6, 3, &mut rng::stream(10, 0));
        let logits = net.forward(&x).unwrap();
        let upstream: Vec<f64> = logits.iter().map(|_| 0.0).collect();
        let g = net.backward(&upstream).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn running_stats_only_move_in_train_mode() {
        let mut net = small_net(11);
        let x = random_input(8, 3, &mut rng::stream(12, 0));
        net.set_mode(Mode::Eval);
        net.forward(&x).unwrap();
        assert!(net.running_stats().iter().all(|r| r.mean.iter().all(|&m| m == 0.0)));
        net.set_mode(Mode::Train);
        net.forward(&x).unwrap();
        assert!(net.running_stats().iter().any(|r| r.mean.iter().any(|&m| m != 0.0)));
    }

    #[test]
    fn batch_norm_normalizes_in_train_mode() {
        let mut net = small_net(13);
        let x = random_input(32, 3, &mut rng::stream(14, 0));
        net.forward(&x).unwrap();
        for (mean, var) in net.normalized_stats().unwrap() {
            assert!(mean.iter().all(|m| m.abs() < 1e-12));
            // variance of xhat is v / (v + eps) for the feature's batch variance v
            assert!(var.iter().all(|v| *v <= 1.0 && *v > 0.99));
        }
    }

    #[test]
    fn layout_covers_all_parameters() {
        let net = small_net(15);
        let total: usize = net.layout().tensors().iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, net.num_params());
    }
}
