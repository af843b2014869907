//! Minimal feedforward binary classifier with analytic gradients.
//!
//! The architecture is a stack of dense layers with rectifier hidden units
//! and a logistic output, trained full-batch with Adam. Targets may be soft
//! (probabilities in `[0, 1]`) and examples may carry weights; the loss is
//! pluggable through [`BatchLoss`] so the same engine drives plain
//! cross-entropy training and the regularized M-step objective.
//!
//! Outputs are clamped to `(1e-7, 1 - 1e-7)`, so no forward pass ever
//! returns exactly 0 or 1 and log losses stay finite.

use crate::error::{Error, Result};
use crate::rng::{stream, tag};
use crate::scalar::{clamp_prob, sigmoid, Scalar};
use rand::Rng;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::path::Path;

/// Row-major feature matrix: `n` examples by `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Features<S> {
    data: Vec<S>,
    n: usize,
    d: usize,
}

impl<S: Scalar> Features<S> {
    pub fn new(data: Vec<S>, d: usize) -> Self {
        assert!(d > 0 && data.len() % d == 0, "ragged feature matrix");
        let n = data.len() / d;
        Features { data, n, d }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            assert_eq!(r.len(), d, "ragged feature matrix");
            data.extend_from_slice(r);
        }
        Features {
            data,
            n: rows.len(),
            d,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Select a subset of rows, preserving order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Features {
            data,
            n: idx.len(),
            d: self.d,
        }
    }
}

/// A soft training target: a probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftTarget<S>(S);

impl<S: Scalar> SoftTarget<S> {
    pub fn new(value: S) -> Result<Self> {
        if value >= S::zero() && value <= S::one() {
            Ok(SoftTarget(value))
        } else {
            Err(Error::OutOfRange(format!(
                "soft target {value} outside [0, 1]"
            )))
        }
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// Binary cross-entropy `weight * [-t ln p - (1-t) ln(1-p)]`.
///
/// The prediction is clamped, so the result is finite for any input.
pub fn bce<S: Scalar>(target: S, pred: S, weight: S) -> S {
    let p = clamp_prob(pred);
    weight * (-(target * p.ln()) - (S::one() - target) * (S::one() - p).ln())
}

/// Per-example loss on the network output, differentiable in the output
/// logit. `eval` returns `(loss, d loss / d logit)` for example `idx` given
/// its predicted probability `p`.
pub trait BatchLoss<S>: Sync {
    fn len(&self) -> usize;
    fn eval(&self, idx: usize, p: S) -> (S, S);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plain or weighted binary cross-entropy against fixed targets.
#[derive(Debug, Clone)]
pub struct WeightedBce<S> {
    pub targets: Vec<S>,
    pub weights: Option<Vec<S>>,
}

impl<S: Scalar> WeightedBce<S> {
    pub fn new(targets: Vec<S>, weights: Option<Vec<S>>) -> Self {
        if let Some(w) = &weights {
            assert_eq!(w.len(), targets.len(), "weights/targets length mismatch");
        }
        WeightedBce { targets, weights }
    }

    pub fn from_soft(targets: &[SoftTarget<S>], weights: Option<Vec<S>>) -> Self {
        Self::new(targets.iter().map(|t| t.value()).collect(), weights)
    }
}

impl<S: Scalar> BatchLoss<S> for WeightedBce<S> {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn eval(&self, idx: usize, p: S) -> (S, S) {
        let w = self.weights.as_ref().map_or(S::one(), |ws| ws[idx]);
        let t = self.targets[idx];
        (bce(t, p, w), w * (p - t))
    }
}

/// Censorship-aware M-step objective, summed per example:
/// `bce(q, p) + q * bce(y_obs, p * t_hat)`.
///
/// `q` is the pseudo-label, `y_obs` the observed proxy label, and `t_hat`
/// the (frozen) testing propensity. The product `p * t_hat` is clamped
/// before the logs; where the clamp binds the term is constant, so its
/// gradient contribution is zero.
#[derive(Debug, Clone)]
pub struct MStepLoss<S> {
    pub q: Vec<S>,
    pub y_obs: Vec<S>,
    pub t_hat: Vec<S>,
}

impl<S: Scalar> MStepLoss<S> {
    pub fn new(q: Vec<S>, y_obs: Vec<S>, t_hat: Vec<S>) -> Self {
        assert_eq!(q.len(), y_obs.len());
        assert_eq!(q.len(), t_hat.len());
        MStepLoss { q, y_obs, t_hat }
    }
}

impl<S: Scalar> BatchLoss<S> for MStepLoss<S> {
    fn len(&self) -> usize {
        self.q.len()
    }

    fn eval(&self, idx: usize, p: S) -> (S, S) {
        let (q, y, t) = (self.q[idx], self.y_obs[idx], self.t_hat[idx]);
        let loss = m_step_loss(q, y, p, t);
        let pt = p * t;
        let eps = crate::scalar::prob_eps::<S>();
        let reg_dz = if pt > eps && pt < S::one() - eps {
            -(y * (S::one() - p))
                + (S::one() - y) * t * p * (S::one() - p) / (S::one() - pt)
        } else {
            S::zero()
        };
        (loss, (p - q) + q * reg_dz)
    }
}

/// The per-example M-step loss value `bce(q, y_hat) + q * bce(y_obs, y_hat * t_hat)`.
pub fn m_step_loss<S: Scalar>(q: S, y_obs: S, y_hat: S, t_hat: S) -> S {
    bce(q, y_hat, S::one()) + q * bce(y_obs, clamp_prob(y_hat * t_hat), S::one())
}

/// Training settings for Adam.
#[derive(Debug, Clone)]
pub struct TrainConfig<S> {
    pub learning_rate: S,
    pub weight_decay: S,
    pub epochs: usize,
    /// Examples per gradient step; `None` runs full-batch. The default is
    /// 128: at the standard learning rate, full-batch training takes too
    /// few optimizer steps per epoch budget to fit sharp boundaries.
    pub batch_size: Option<usize>,
    /// Consecutive validation checks without improvement before stopping.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        TrainConfig {
            learning_rate: S::from_f64_lossy(1e-3),
            weight_decay: S::zero(),
            epochs: 1000,
            batch_size: Some(128),
            patience: None,
            seed: 42,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Layer<S> {
    /// Row-major `out x in` weights.
    w: Vec<S>,
    b: Vec<S>,
    n_in: usize,
    n_out: usize,
}

/// Feedforward network: dense layers, rectifier hidden units, logistic
/// output clamped to the open unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    dims: Vec<usize>,
    layers: Vec<Layer<S>>,
}

impl<S: Scalar> Network<S> {
    /// Fresh network with uniform fan-in initialization, deterministic in
    /// the seed: weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(*dims.last().unwrap(), 1, "single logistic output");
        let mut rng = stream(seed, &[tag("net-init")]);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for win in dims.windows(2) {
            let (n_in, n_out) = (win[0], win[1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let mut draw = || S::from_f64_lossy(rng.gen::<f64>() * 2.0 * bound - bound);
            let w = (0..n_in * n_out).map(|_| draw()).collect();
            let b = (0..n_out).map(|_| draw()).collect();
            layers.push(Layer { w, b, n_in, n_out });
        }
        Network {
            dims: dims.to_vec(),
            layers,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flatten parameters layer by layer: weights row-major, then biases.
    pub fn flat_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Rebuild a network from flattened parameters.
    pub fn from_flat(dims: &[usize], params: &[S]) -> Result<Self> {
        let mut net = Network::new(dims, 0);
        let expected = net.param_count();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut net.layers {
            for w in &mut l.w {
                *w = it.next().unwrap();
            }
            for b in &mut l.b {
                *b = it.next().unwrap();
            }
        }
        Ok(net)
    }

    /// Output logit (pre-sigmoid) for one example.
    pub fn logit(&self, x: &[S]) -> Result<S> {
        if x.len() != self.dims[0] {
            return Err(Error::DimensionMismatch {
                expected: self.dims[0],
                got: x.len(),
            });
        }
        let mut cur: Vec<S> = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut next = vec![S::zero(); l.n_out];
            for o in 0..l.n_out {
                let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                let mut acc = l.b[o];
                for (wv, xv) in row.iter().zip(cur.iter()) {
                    acc = acc + *wv * *xv;
                }
                next[o] = if li < last { acc.max(S::zero()) } else { acc };
            }
            cur = next;
        }
        Ok(cur[0])
    }

    /// Predicted probability for one example, clamped inside `(0, 1)`.
    pub fn forward(&self, x: &[S]) -> Result<S> {
        Ok(clamp_prob(sigmoid(self.logit(x)?)))
    }

    /// Predicted probabilities for a whole feature matrix.
    pub fn predict(&self, inputs: &Features<S>) -> Result<Vec<S>> {
        if inputs.dim() != self.dims[0] {
            return Err(Error::DimensionMismatch {
                expected: self.dims[0],
                got: inputs.dim(),
            });
        }
        Ok(batch_probs(self, inputs))
    }

    /// Write parameters as a flat list of decimal floats with an
    /// architecture header. The `Display` form round-trips exactly.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("dims");
        for d in &self.dims {
            out.push(' ');
            out.push_str(&d.to_string());
        }
        out.push('\n');
        for p in self.flat_params() {
            out.push_str(&format!("{p}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path.display().to_string(), 1, "empty checkpoint"))?;
        let header = header.map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("dims") {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                "expected `dims` header",
            ));
        }
        let dims: Vec<usize> = parts
            .map(|p| {
                p.parse::<usize>().map_err(|_| {
                    Error::parse(path.display().to_string(), 1, format!("bad dim `{p}`"))
                })
            })
            .collect::<Result<_>>()?;
        let mut params = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.is_empty() {
                continue;
            }
            let v = S::parse_exact(&line).ok_or_else(|| {
                Error::parse(
                    path.display().to_string(),
                    i + 1,
                    format!("bad parameter `{line}`"),
                )
            })?;
            params.push(v);
        }
        Network::from_flat(&dims, &params)
    }
}

// ---------------------------------------------------------------------------
// Batched kernels
//
// Activations for a chunk of examples are stored unit-major: `buf[u * C + c]`
// holds unit `u` of lane `c`. Inner loops run over lanes, which keeps them
// independent and lets the compiler vectorize without reordering any
// reduction.
// ---------------------------------------------------------------------------

const CHUNK: usize = 128;
/// Output-unit block width for the layer kernels.
const BLOCK: usize = 8;
/// Chunks are accumulated into a fixed number of slabs combined in index
/// order, so gradients are bit-identical for any thread count.
const SLABS: usize = 4;

struct Workspace<S> {
    acts: Vec<Vec<S>>,
    deltas: Vec<Vec<S>>,
    probs: Vec<S>,
    dz_out: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    fn new(dims: &[usize]) -> Self {
        Workspace {
            acts: dims.iter().map(|&d| vec![S::zero(); d * CHUNK]).collect(),
            deltas: dims
                .iter()
                .skip(1)
                .map(|&d| vec![S::zero(); d * CHUNK])
                .collect(),
            probs: vec![S::zero(); CHUNK],
            dz_out: vec![S::zero(); CHUNK],
        }
    }
}

#[derive(Clone)]
struct GradBuf<S> {
    layers: Vec<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> GradBuf<S> {
    fn zeros(net: &Network<S>) -> Self {
        GradBuf {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![S::zero(); l.w.len()], vec![S::zero(); l.b.len()]))
                .collect(),
        }
    }

    fn add(&mut self, other: &GradBuf<S>) {
        for (dst, src) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (a, b) in dst.0.iter_mut().zip(src.0.iter()) {
                *a += *b;
            }
            for (a, b) in dst.1.iter_mut().zip(src.1.iter()) {
                *a += *b;
            }
        }
    }

    fn scale(&mut self, s: S) {
        for l in &mut self.layers {
            for v in &mut l.0 {
                *v *= s;
            }
            for v in &mut l.1 {
                *v *= s;
            }
        }
    }

    fn flat(&self) -> Vec<S> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.0);
            out.extend_from_slice(&l.1);
        }
        out
    }
}

/// Register panel of the forward kernel: `FWD_OUT x FWD_LANES` accumulators.
const FWD_OUT: usize = 4;
const FWD_LANES: usize = 8;
/// Register panel of the delta pull-back: `BWD_OUT x BWD_LANES` accumulators.
const BWD_OUT: usize = 2;
const BWD_LANES: usize = 16;

/// Fixed-size accumulator panel: `BLOCK` output units by `TILE` lanes held
/// in registers across the whole input reduction, so each result is stored
/// exactly once. Per-element accumulation order is bias then ascending
/// input index, the same as the naive loop.
#[inline]
fn forward_panel<S: Scalar>(
    w: &[S],
    b: &[S],
    n_in: usize,
    ob: usize,
    input: &[S],
    output: &mut [S],
    t: usize,
    relu: bool,
) {
    let mut acc = [[S::zero(); FWD_LANES]; FWD_OUT];
    for (j, row) in acc.iter_mut().enumerate() {
        let bias = b[ob + j];
        for v in row.iter_mut() {
            *v = bias;
        }
    }
    for i in 0..n_in {
        let src: &[S] = &input[i * CHUNK + t..i * CHUNK + t + FWD_LANES];
        for (j, row) in acc.iter_mut().enumerate() {
            let wv = w[(ob + j) * n_in + i];
            for (av, sv) in row.iter_mut().zip(src.iter()) {
                *av = *av + wv * *sv;
            }
        }
    }
    for (j, row) in acc.iter().enumerate() {
        let base = (ob + j) * CHUNK + t;
        let out = &mut output[base..base + FWD_LANES];
        for (ov, av) in out.iter_mut().zip(row.iter()) {
            *ov = if relu { av.max(S::zero()) } else { *av };
        }
    }
}

/// Dense layer over unit-major lanes: `output[o] = b[o] + sum_i w[o][i] * input[i]`.
///
/// Full `BLOCK x TILE` panels take the register-tiled fast path; ragged
/// edges fall back to a simple blocked loop with identical accumulation
/// order.
fn layer_forward<S: Scalar>(
    w: &[S],
    b: &[S],
    n_in: usize,
    n_out: usize,
    input: &[S],
    output: &mut [S],
    len: usize,
    relu: bool,
) {
    let full_tiles = len / FWD_LANES * FWD_LANES;
    let mut ob = 0;
    while ob < n_out {
        let obe = (ob + FWD_OUT).min(n_out);
        if obe - ob == FWD_OUT {
            let mut t = 0;
            while t < full_tiles {
                forward_panel(w, b, n_in, ob, input, output, t, relu);
                t += FWD_LANES;
            }
        }
        let t0 = if obe - ob == FWD_OUT { full_tiles } else { 0 };
        if t0 < len {
            for o in ob..obe {
                let bias = b[o];
                for v in output[o * CHUNK + t0..o * CHUNK + len].iter_mut() {
                    *v = bias;
                }
            }
            for i in 0..n_in {
                let src = &input[i * CHUNK + t0..i * CHUNK + len];
                for o in ob..obe {
                    let wv = w[o * n_in + i];
                    let out_lane = &mut output[o * CHUNK + t0..o * CHUNK + len];
                    for (ov, sv) in out_lane.iter_mut().zip(src.iter()) {
                        *ov = *ov + wv * *sv;
                    }
                }
            }
            if relu {
                for o in ob..obe {
                    for v in output[o * CHUNK + t0..o * CHUNK + len].iter_mut() {
                        *v = v.max(S::zero());
                    }
                }
            }
        }
        ob = obe;
    }
}

/// Forward a chunk of `len` examples starting at `start`; fills activations
/// and clamped output probabilities.
fn forward_chunk<S: Scalar>(
    net: &Network<S>,
    inputs: &Features<S>,
    start: usize,
    len: usize,
    ws: &mut Workspace<S>,
) {
    let d = inputs.dim();
    // transpose the input rows into unit-major lanes
    for c in 0..len {
        let row = inputs.row(start + c);
        for i in 0..d {
            ws.acts[0][i * CHUNK + c] = row[i];
        }
    }
    let last = net.layers.len() - 1;
    for (li, l) in net.layers.iter().enumerate() {
        let (prev, rest) = ws.acts.split_at_mut(li + 1);
        layer_forward(
            &l.w,
            &l.b,
            l.n_in,
            l.n_out,
            &prev[li],
            &mut rest[0],
            len,
            li < last,
        );
    }
    let z = &ws.acts[net.layers.len()];
    for c in 0..len {
        ws.probs[c] = clamp_prob(sigmoid(z[c]));
    }
}

/// Strided reduction with `LANES` independent accumulators combined in a
/// fixed order: bit-deterministic, but free of a single serial dependency
/// chain so the compiler can vectorize it.
#[inline]
fn dot_strided<S: Scalar>(a: &[S], b: &[S]) -> S {
    const LANES: usize = 8;
    let mut acc = [S::zero(); LANES];
    for (ca, cb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for j in 0..LANES {
            acc[j] = acc[j] + ca[j] * cb[j];
        }
    }
    let mut total = S::zero();
    for v in acc {
        total += v;
    }
    let rem = a.len() - a.len() % LANES;
    for i in rem..a.len() {
        total += a[i] * b[i];
    }
    total
}

#[inline]
fn sum_strided<S: Scalar>(a: &[S]) -> S {
    const LANES: usize = 8;
    let mut acc = [S::zero(); LANES];
    for ca in a.chunks_exact(LANES) {
        for j in 0..LANES {
            acc[j] = acc[j] + ca[j];
        }
    }
    let mut total = S::zero();
    for v in acc {
        total += v;
    }
    let rem = a.len() - a.len() % LANES;
    for i in rem..a.len() {
        total += a[i];
    }
    total
}

/// Parameter gradients of one layer over a chunk:
/// `gw[o][i] += dot(delta[o], input[i])`, `gb[o] += sum(delta[o])`.
fn layer_grads<S: Scalar>(
    gw: &mut [S],
    gb: &mut [S],
    n_in: usize,
    n_out: usize,
    delta: &[S],
    input: &[S],
    len: usize,
) {
    let mut ob = 0;
    while ob < n_out {
        let obe = (ob + BLOCK).min(n_out);
        for o in ob..obe {
            gb[o] += sum_strided(&delta[o * CHUNK..o * CHUNK + len]);
        }
        for i in 0..n_in {
            let src = &input[i * CHUNK..i * CHUNK + len];
            for o in ob..obe {
                let d = &delta[o * CHUNK..o * CHUNK + len];
                gw[o * n_in + i] += dot_strided(d, src);
            }
        }
        ob = obe;
    }
}

/// Register panel of the delta pull-back: `BLOCK` input units by `TILE`
/// lanes, reducing over all output units before a single masked store.
/// `wt` is the transposed weight matrix (`n_in x n_out`), so the inner
/// loads walk it sequentially.
#[inline]
fn backward_delta_panel<S: Scalar>(
    wt: &[S],
    n_out: usize,
    ib: usize,
    delta_out: &[S],
    delta_in: &mut [S],
    acts: &[S],
    t: usize,
) {
    let mut acc = [[S::zero(); BWD_LANES]; BWD_OUT];
    for o in 0..n_out {
        let dsrc: &[S] = &delta_out[o * CHUNK + t..o * CHUNK + t + BWD_LANES];
        for (j, row) in acc.iter_mut().enumerate() {
            let wv = wt[(ib + j) * n_out + o];
            for (av, sv) in row.iter_mut().zip(dsrc.iter()) {
                *av = *av + wv * *sv;
            }
        }
    }
    for (j, row) in acc.iter().enumerate() {
        let base = (ib + j) * CHUNK + t;
        let dst = &mut delta_in[base..base + BWD_LANES];
        let a = &acts[base..base + BWD_LANES];
        for ((dv, av), mask) in dst.iter_mut().zip(row.iter()).zip(a.iter()) {
            *dv = if *mask <= S::zero() { S::zero() } else { *av };
        }
    }
}

/// Pull the loss gradient back through one layer and its rectifier mask:
/// `delta_in[i] = relu_mask(act[i]) * sum_o wt[i][o] * delta_out[o]`.
fn layer_backward_delta<S: Scalar>(
    wt: &[S],
    n_in: usize,
    n_out: usize,
    delta_out: &[S],
    delta_in: &mut [S],
    acts: &[S],
    len: usize,
) {
    let full_tiles = len / BWD_LANES * BWD_LANES;
    let mut ib = 0;
    while ib < n_in {
        let ibe = (ib + BWD_OUT).min(n_in);
        if ibe - ib == BWD_OUT {
            let mut t = 0;
            while t < full_tiles {
                backward_delta_panel(wt, n_out, ib, delta_out, delta_in, acts, t);
                t += BWD_LANES;
            }
        }
        let t0 = if ibe - ib == BWD_OUT { full_tiles } else { 0 };
        if t0 < len {
            for i in ib..ibe {
                for v in delta_in[i * CHUNK + t0..i * CHUNK + len].iter_mut() {
                    *v = S::zero();
                }
            }
            for o in 0..n_out {
                let dsrc = &delta_out[o * CHUNK + t0..o * CHUNK + len];
                for i in ib..ibe {
                    let wv = wt[i * n_out + o];
                    let dst = &mut delta_in[i * CHUNK + t0..i * CHUNK + len];
                    for (dv, sv) in dst.iter_mut().zip(dsrc.iter()) {
                        *dv = *dv + wv * *sv;
                    }
                }
            }
            for i in ib..ibe {
                let lane = &mut delta_in[i * CHUNK + t0..i * CHUNK + len];
                let a = &acts[i * CHUNK + t0..i * CHUNK + len];
                for (dv, av) in lane.iter_mut().zip(a.iter()) {
                    if *av <= S::zero() {
                        *dv = S::zero();
                    }
                }
            }
        }
        ib = ibe;
    }
}

/// Transposed weight matrices (`n_in x n_out` each) for the delta pull-back.
fn transposed_weights<S: Scalar>(net: &Network<S>) -> Vec<Vec<S>> {
    net.layers
        .iter()
        .map(|l| {
            let mut wt = vec![S::zero(); l.w.len()];
            for o in 0..l.n_out {
                for i in 0..l.n_in {
                    wt[i * l.n_out + o] = l.w[o * l.n_in + i];
                }
            }
            wt
        })
        .collect()
}

/// Backpropagate a chunk given `dz_out` (loss gradient in the output logit),
/// accumulating parameter gradients into `grads`.
fn backward_chunk<S: Scalar>(
    net: &Network<S>,
    wts: &[Vec<S>],
    len: usize,
    ws: &mut Workspace<S>,
    grads: &mut GradBuf<S>,
) {
    let n_layers = net.layers.len();
    ws.deltas[n_layers - 1][..len].copy_from_slice(&ws.dz_out[..len]);
    for li in (0..n_layers).rev() {
        let l = &net.layers[li];
        let (gw, gb) = &mut grads.layers[li];
        layer_grads(gw, gb, l.n_in, l.n_out, &ws.deltas[li], &ws.acts[li], len);
        if li == 0 {
            break;
        }
        let (lower, upper) = ws.deltas.split_at_mut(li);
        layer_backward_delta(
            &wts[li],
            l.n_in,
            l.n_out,
            &upper[0],
            &mut lower[li - 1],
            &ws.acts[li],
            len,
        );
    }
}

fn slab_ranges(n: usize) -> Vec<(usize, usize)> {
    let n_chunks = n.div_ceil(CHUNK);
    let per = n_chunks.div_ceil(SLABS);
    (0..SLABS)
        .map(|s| {
            let lo = (s * per * CHUNK).min(n);
            let hi = ((s + 1) * per * CHUNK).min(n);
            (lo, hi)
        })
        .collect()
}

/// Worst relative disagreement between the analytic gradient and central
/// finite differences of the mean batch loss, over every parameter.
pub fn finite_difference_check(
    net: &Network<f64>,
    inputs: &Features<f64>,
    loss: &dyn BatchLoss<f64>,
    step: f64,
) -> f64 {
    let (_, grad) = batch_loss_and_grad(net, inputs, loss);
    let params = net.flat_params();
    let dims = net.dims().to_vec();
    let mut max_rel = 0.0f64;
    for k in 0..params.len() {
        let mut plus = params.clone();
        plus[k] += step;
        let mut minus = params.clone();
        minus[k] -= step;
        let lp = batch_loss(&Network::from_flat(&dims, &plus).unwrap(), inputs, loss);
        let lm = batch_loss(&Network::from_flat(&dims, &minus).unwrap(), inputs, loss);
        let fd = (lp - lm) / (2.0 * step);
        let denom = grad[k].abs().max(fd.abs()).max(1e-6);
        max_rel = max_rel.max((grad[k] - fd).abs() / denom);
    }
    max_rel
}

/// Mean loss and mean parameter gradient over the whole batch.
pub fn batch_loss_and_grad<S: Scalar>(
    net: &Network<S>,
    inputs: &Features<S>,
    loss: &dyn BatchLoss<S>,
) -> (S, Vec<S>) {
    let (l, g) = accumulate(net, inputs, loss);
    (l, g.flat())
}

fn accumulate<S: Scalar>(
    net: &Network<S>,
    inputs: &Features<S>,
    loss: &dyn BatchLoss<S>,
) -> (S, GradBuf<S>) {
    let n = inputs.len();
    assert_eq!(loss.len(), n, "loss/batch length mismatch");
    let wts = transposed_weights(net);
    let parts: Vec<(GradBuf<S>, S)> = slab_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut ws = Workspace::new(net.dims());
            let mut grads = GradBuf::zeros(net);
            let mut lsum = S::zero();
            let mut start = lo;
            while start < hi {
                let len = CHUNK.min(hi - start);
                forward_chunk(net, inputs, start, len, &mut ws);
                for c in 0..len {
                    let (lv, dz) = loss.eval(start + c, ws.probs[c]);
                    lsum += lv;
                    ws.dz_out[c] = dz;
                }
                backward_chunk(net, &wts, len, &mut ws, &mut grads);
                start += len;
            }
            (grads, lsum)
        })
        .collect();
    let mut grads = GradBuf::zeros(net);
    let mut lsum = S::zero();
    for (g, l) in &parts {
        grads.add(g);
        lsum += *l;
    }
    let inv_n = S::one() / S::from_usize(n).unwrap();
    grads.scale(inv_n);
    (lsum * inv_n, grads)
}

/// Clamped output probabilities for every row of `inputs`.
pub fn batch_probs<S: Scalar>(net: &Network<S>, inputs: &Features<S>) -> Vec<S> {
    let n = inputs.len();
    let parts: Vec<Vec<S>> = slab_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut ws = Workspace::new(net.dims());
            let mut out = Vec::with_capacity(hi - lo);
            let mut start = lo;
            while start < hi {
                let len = CHUNK.min(hi - start);
                forward_chunk(net, inputs, start, len, &mut ws);
                out.extend_from_slice(&ws.probs[..len]);
                start += len;
            }
            out
        })
        .collect();
    parts.concat()
}

/// Mean loss of `net` on `inputs` under `loss`, forward only.
pub fn batch_loss<S: Scalar>(net: &Network<S>, inputs: &Features<S>, loss: &dyn BatchLoss<S>) -> S {
    let probs = batch_probs(net, inputs);
    let mut acc = S::zero();
    for (i, p) in probs.iter().enumerate() {
        acc += loss.eval(i, *p).0;
    }
    acc / S::from_usize(inputs.len().max(1)).unwrap()
}

/// Validation set: inputs plus the loss evaluated on them.
pub struct ValSet<'a, S> {
    pub inputs: &'a Features<S>,
    pub loss: &'a dyn BatchLoss<S>,
}

/// Result of a training run.
pub struct TrainOutcome<S> {
    pub network: Network<S>,
    /// Mean training loss per epoch, at the parameters entering the epoch.
    pub history: Vec<S>,
    /// Best validation loss seen, when a validation set was supplied.
    pub best_val: Option<S>,
    /// Number of epochs actually run.
    pub epochs_run: usize,
}

/// Full-batch Adam on a pluggable per-example loss.
///
/// Deterministic given the initial network and config. With a validation
/// set and `patience` configured, stops once the validation loss has failed
/// to improve for `patience` consecutive epochs and returns the
/// best-validation parameters; otherwise runs all epochs and returns the
/// final ones.
pub fn train_with_loss<S: Scalar>(
    init: &Network<S>,
    inputs: &Features<S>,
    loss: &dyn BatchLoss<S>,
    cfg: &TrainConfig<S>,
    val: Option<ValSet<'_, S>>,
) -> Result<TrainOutcome<S>> {
    if inputs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if inputs.dim() != init.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: init.input_dim(),
            got: inputs.dim(),
        });
    }
    assert_eq!(loss.len(), inputs.len(), "loss/batch length mismatch");

    let mut state = AdamState::new(init.clone(), cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(S, Network<S>)> = None;
    let mut bad_checks = 0usize;
    let mut epochs_run = 0usize;

    let n = inputs.len();
    let batch = cfg.batch_size.filter(|&b| b > 0 && b < n);
    let mut mb = batch.map(|b| MinibatchScratch::new(inputs, b, cfg.seed, state.net.dims()));

    for epoch in 0..cfg.epochs {
        let loss_val = match &mut mb {
            None => {
                let (loss_val, grads) = accumulate(&state.net, inputs, loss);
                state.step(&grads, cfg);
                loss_val
            }
            Some(mb) => mb.epoch(&mut state, inputs, loss, cfg),
        };
        if loss_val.is_nan() {
            return Err(Error::NanLoss { epoch });
        }
        history.push(loss_val);
        epochs_run = epoch + 1;

        if let (Some(patience), Some(vs)) = (cfg.patience, val.as_ref()) {
            let vl = batch_loss(&state.net, vs.inputs, vs.loss);
            if vl.is_nan() {
                return Err(Error::NanLoss { epoch });
            }
            match &best {
                Some((bv, _)) if vl >= *bv => {
                    bad_checks += 1;
                    if bad_checks >= patience {
                        break;
                    }
                }
                _ => {
                    best = Some((vl, state.net.clone()));
                    bad_checks = 0;
                }
            }
        }
    }

    let (network, best_val) = match best {
        Some((bv, bnet)) => (bnet, Some(bv)),
        None => (state.net, None),
    };
    Ok(TrainOutcome {
        network,
        history,
        best_val,
        epochs_run,
    })
}

/// Adam optimizer state over a network's parameters.
struct AdamState<S> {
    net: Network<S>,
    m: GradBuf<S>,
    v: GradBuf<S>,
    steps: usize,
}

impl<S: Scalar> AdamState<S> {
    fn new(net: Network<S>, _cfg: &TrainConfig<S>) -> Self {
        let m = GradBuf::zeros(&net);
        let v = GradBuf::zeros(&net);
        AdamState {
            net,
            m,
            v,
            steps: 0,
        }
    }

    /// One Adam update from mean gradients (weight decay applied here).
    fn step(&mut self, grads: &GradBuf<S>, cfg: &TrainConfig<S>) {
        self.steps += 1;
        let b1 = S::from_f64_lossy(ADAM_BETA1);
        let b2 = S::from_f64_lossy(ADAM_BETA2);
        let adam_eps = S::from_f64_lossy(ADAM_EPS);
        let t = S::from_usize(self.steps).unwrap();
        let corr1 = S::one() - b1.powf(t);
        let corr2 = S::one() - b2.powf(t);
        let lr = cfg.learning_rate;
        let wd = cfg.weight_decay;
        for li in 0..self.net.layers.len() {
            let g = &grads.layers[li];
            let (mw, mbi) = &mut self.m.layers[li];
            let (vw, vb) = &mut self.v.layers[li];
            let l = &mut self.net.layers[li];
            for k in 0..l.w.len() {
                let gk = g.0[k] + wd * l.w[k];
                mw[k] = b1 * mw[k] + (S::one() - b1) * gk;
                vw[k] = b2 * vw[k] + (S::one() - b2) * gk * gk;
                l.w[k] = l.w[k] - lr * (mw[k] / corr1) / ((vw[k] / corr2).sqrt() + adam_eps);
            }
            for k in 0..l.b.len() {
                let gk = g.1[k] + wd * l.b[k];
                mbi[k] = b1 * mbi[k] + (S::one() - b1) * gk;
                vb[k] = b2 * vb[k] + (S::one() - b2) * gk * gk;
                l.b[k] = l.b[k] - lr * (mbi[k] / corr1) / ((vb[k] / corr2).sqrt() + adam_eps);
            }
        }
    }
}

/// Scratch state for minibatch epochs: a seeded shuffle, a gathered batch
/// panel, and reusable gradient buffers. Single-threaded and sequential,
/// so results are bit-identical for any worker count.
struct MinibatchScratch<S> {
    batch: usize,
    order: Vec<usize>,
    gathered: Features<S>,
    rng: rand_chacha::ChaCha8Rng,
    ws: Workspace<S>,
    grads: GradBuf<S>,
    wts: Vec<Vec<S>>,
}

impl<S: Scalar> MinibatchScratch<S> {
    fn new(inputs: &Features<S>, batch: usize, seed: u64, dims: &[usize]) -> Self {
        MinibatchScratch {
            batch,
            order: (0..inputs.len()).collect(),
            gathered: Features::new(vec![S::zero(); batch * inputs.dim()], inputs.dim()),
            rng: stream(seed, &[tag("shuffle")]),
            ws: Workspace::new(dims),
            grads: GradBuf {
                layers: dims
                    .windows(2)
                    .map(|w| (vec![S::zero(); w[0] * w[1]], vec![S::zero(); w[1]]))
                    .collect(),
            },
            wts: Vec::new(),
        }
    }

    /// One epoch of shuffled minibatch steps; returns the mean training
    /// loss at the parameters each batch was evaluated with.
    fn epoch(
        &mut self,
        state: &mut AdamState<S>,
        inputs: &Features<S>,
        loss: &dyn BatchLoss<S>,
        cfg: &TrainConfig<S>,
    ) -> S {
        let n = inputs.len();
        for i in (1..n).rev() {
            let j = self.rng.gen_range(0..=i);
            self.order.swap(i, j);
        }
        let mut loss_sum = S::zero();
        let mut start = 0;
        while start < n {
            let len = self.batch.min(n - start);
            for c in 0..len {
                let row = inputs.row(self.order[start + c]);
                self.gathered.data[c * inputs.dim()..(c + 1) * inputs.dim()].copy_from_slice(row);
            }
            refresh_transposes(&state.net, &mut self.wts);
            for g in &mut self.grads.layers {
                g.0.iter_mut().for_each(|v| *v = S::zero());
                g.1.iter_mut().for_each(|v| *v = S::zero());
            }
            let mut lsum = S::zero();
            let mut cstart = 0;
            while cstart < len {
                let clen = CHUNK.min(len - cstart);
                forward_chunk(&state.net, &self.gathered, cstart, clen, &mut self.ws);
                for c in 0..clen {
                    let orig = self.order[start + cstart + c];
                    let (lv, dz) = loss.eval(orig, self.ws.probs[c]);
                    lsum += lv;
                    self.ws.dz_out[c] = dz;
                }
                backward_chunk(&state.net, &self.wts, clen, &mut self.ws, &mut self.grads);
                cstart += clen;
            }
            let inv = S::one() / S::from_usize(len).unwrap();
            self.grads.scale(inv);
            loss_sum += lsum;
            state.step(&self.grads, cfg);
            start += len;
        }
        loss_sum / S::from_usize(n).unwrap()
    }
}

fn refresh_transposes<S: Scalar>(net: &Network<S>, wts: &mut Vec<Vec<S>>) {
    if wts.len() != net.layers.len() {
        *wts = net.layers.iter().map(|l| vec![S::zero(); l.w.len()]).collect();
    }
    for (l, wt) in net.layers.iter().zip(wts.iter_mut()) {
        for o in 0..l.n_out {
            for i in 0..l.n_in {
                wt[i * l.n_out + o] = l.w[o * l.n_in + i];
            }
        }
    }
}

/// Cross-entropy training on soft targets with optional per-example
/// weights. Convenience wrapper over [`train_with_loss`].
pub fn train<S: Scalar>(
    init: &Network<S>,
    inputs: &Features<S>,
    targets: &[SoftTarget<S>],
    weights: Option<Vec<S>>,
    cfg: &TrainConfig<S>,
    val: Option<(&Features<S>, &[SoftTarget<S>])>,
) -> Result<(Network<S>, Vec<S>)> {
    let loss = WeightedBce::from_soft(targets, weights);
    let val_loss = val.map(|(_, t)| WeightedBce::from_soft(t, None));
    let val_set = match (&val, &val_loss) {
        (Some((vi, _)), Some(vl)) => Some(ValSet {
            inputs: *vi,
            loss: vl,
        }),
        _ => None,
    };
    let out = train_with_loss(init, inputs, &loss, cfg, val_set)?;
    Ok((out.network, out.history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_unit(w: &[f64], b: f64) -> Network<f64> {
        let dims = vec![w.len(), 1];
        let mut params = w.to_vec();
        params.push(b);
        Network::from_flat(&dims, &params).unwrap()
    }

    #[test]
    fn forward_zero_weights_is_half() {
        let dims = [2usize, 64, 64, 1];
        let zeros = vec![0.0f64; Network::<f64>::new(&dims, 0).param_count()];
        let net = Network::from_flat(&dims, &zeros).unwrap();
        assert_eq!(net.forward(&[0.3, -1.2]).unwrap(), 0.5);
    }

    #[test]
    fn forward_linear_unit_examples() {
        let net = single_unit(&[1.0, 1.0], 0.0);
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap(), 0.5);
        let net = single_unit(&[1.0, 0.0], 0.0);
        let p = net.forward(&[3.0f64.ln(), 7.0]).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = Network::<f64>::new(&[2, 4, 1], 1);
        assert!(matches!(
            net.forward(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bce_examples() {
        assert!(bce(1.0f64, 1.0 - 1e-7, 1.0) < 1e-6);
        assert!((bce(0.5f64, 0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce(0.0f64, 0.25, 1.0) - (-(0.75f64.ln()))).abs() < 1e-12);
    }

    #[test]
    fn clamping_keeps_output_strictly_inside_unit_interval() {
        let net = single_unit(&[1000.0], 0.0);
        let hi = net.forward(&[100.0]).unwrap();
        let lo = net.forward(&[-100.0]).unwrap();
        assert!(hi < 1.0 && hi > 0.0);
        assert!(lo > 0.0 && lo < 1.0);
    }

    #[test]
    fn batched_forward_matches_single_example_path() {
        let net = Network::<f64>::new(&[3, 16, 16, 1], 7);
        let mut rng = crate::rng::stream(9, &[1]);
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let feats = Features::from_rows(&rows);
        let batched = batch_probs(&net, &feats);
        for (i, row) in rows.iter().enumerate() {
            let single = net.forward(row).unwrap();
            assert!((batched[i] - single).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let (feats, targets) = toy_problem();
        let cfg = TrainConfig::<f64> {
            epochs: 50,
            ..Default::default()
        };
        let init = Network::new(&[1, 8, 1], cfg.seed);
        let (a, _) = train(&init, &feats, &targets, None, &cfg, None).unwrap();
        let (b, _) = train(&init, &feats, &targets, None, &cfg, None).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
    }

    fn toy_problem() -> (Features<f64>, Vec<SoftTarget<f64>>) {
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in 0..200 {
            // separable with margin 0.5 around zero
            let x = if i % 2 == 0 {
                0.25 + (i as f64 / 200.0)
            } else {
                -0.25 - (i as f64 / 200.0)
            };
            rows.push(vec![x]);
            targets.push(SoftTarget::new(if x > 0.0 { 1.0 } else { 0.0 }).unwrap());
        }
        (Features::from_rows(&rows), targets)
    }

    #[test]
    fn separable_problem_reaches_perfect_training_accuracy() {
        let (feats, targets) = toy_problem();
        let cfg = TrainConfig::<f64>::default();
        let init = Network::new(&[1, 64, 64, 1], cfg.seed);
        let (net, _) = train(&init, &feats, &targets, None, &cfg, None).unwrap();
        let preds = net.predict(&feats).unwrap();
        let correct = preds
            .iter()
            .zip(targets.iter())
            .filter(|(p, t)| (**p > 0.5) == (t.value() > 0.5))
            .count();
        assert_eq!(correct, feats.len());
    }

    #[test]
    fn convex_subproblem_loss_is_non_increasing_over_windows() {
        // logistic regression (single linear unit) on a non-separable batch
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut rng = crate::rng::stream(5, &[2]);
        use rand::Rng;
        for _ in 0..256 {
            let x = rng.gen::<f64>() * 4.0 - 2.0;
            let p = 1.0 / (1.0 + (-1.5 * x).exp());
            let y = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
            rows.push(vec![x]);
            targets.push(SoftTarget::new(y).unwrap());
        }
        let feats = Features::from_rows(&rows);
        let cfg = TrainConfig::<f64> {
            epochs: 400,
            batch_size: None,
            ..Default::default()
        };
        let init = Network::new(&[1, 1], cfg.seed);
        let (_, history) = train(&init, &feats, &targets, None, &cfg, None).unwrap();
        for e in 50..history.len() {
            assert!(
                history[e] <= history[e - 50] + 1e-8,
                "window regression at epoch {e}: {} vs {}",
                history[e],
                history[e - 50]
            );
        }
    }

    #[test]
    fn early_stopping_returns_best_validation_parameters() {
        let (feats, targets) = toy_problem();
        let loss = WeightedBce::from_soft(&targets, None);
        let cfg = TrainConfig::<f64> {
            epochs: 300,
            patience: Some(5),
            ..Default::default()
        };
        let init = Network::new(&[1, 8, 1], cfg.seed);
        let out = train_with_loss(
            &init,
            &feats,
            &loss,
            &cfg,
            Some(ValSet {
                inputs: &feats,
                loss: &loss,
            }),
        )
        .unwrap();
        let best = out.best_val.unwrap();
        let final_loss = batch_loss(&out.network, &feats, &loss);
        assert!((final_loss - best).abs() < 1e-12);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let feats = Features::<f64>::new(Vec::new(), 1);
        let loss = WeightedBce::new(Vec::new(), None);
        let init = Network::new(&[1, 1], 0);
        assert!(matches!(
            train_with_loss(&init, &feats, &loss, &TrainConfig::default(), None),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let net = Network::<f64>::new(&[2, 8, 1], 3);
        let dir = std::env::temp_dir().join("dcem-nnet-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.txt");
        net.save_checkpoint(&path).unwrap();
        let loaded = Network::<f64>::load_checkpoint(&path).unwrap();
        assert_eq!(net.flat_params(), loaded.flat_params());
        assert_eq!(net.dims(), loaded.dims());
    }

    #[test]
    fn soft_target_rejects_out_of_range() {
        assert!(SoftTarget::new(1.2f64).is_err());
        assert!(SoftTarget::new(-0.1f64).is_err());
        assert!(SoftTarget::new(0.7f64).is_ok());
    }

    #[test]
    fn gradient_matches_finite_differences_for_all_losses() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, &[3]);
        let dims = [2usize, 8, 8, 1];
        let n = 16;
        for draw in 0..3 {
            let seed = 100 + draw;
            let net = Network::<f64>::new(&dims, seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let feats = Features::from_rows(&rows);
            let targets: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
            let q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let y_obs: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen::<f64>() < 0.5))).collect();
            let t_hat: Vec<f64> = (0..n).map(|_| 0.05 + 0.9 * rng.gen::<f64>()).collect();
            let losses: Vec<Box<dyn BatchLoss<f64>>> = vec![
                Box::new(WeightedBce::new(targets.clone(), None)),
                Box::new(WeightedBce::new(targets.clone(), Some(weights.clone()))),
                Box::new(MStepLoss::new(q.clone(), y_obs.clone(), t_hat.clone())),
            ];
            for loss in &losses {
                let max_rel = finite_difference_check(&net, &feats, loss.as_ref(), 1e-5);
                assert!(max_rel <= 1e-4, "draw {draw}: max rel error {max_rel:e}");
            }
        }
    }

    #[test]
    fn nan_loss_is_reported() {
        let feats = Features::from_rows(&[vec![f64::NAN]]);
        let targets = vec![SoftTarget::new(1.0).unwrap()];
        let init = Network::new(&[1, 1], 0);
        let err = train(&init, &feats, &targets, None, &TrainConfig::default(), None);
        assert!(matches!(err, Err(Error::NanLoss { .. })));
    }

    #[test]
    fn f32_training_smoke() {
        let rows: Vec<Vec<f32>> = (0..64)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
        let targets: Vec<SoftTarget<f32>> = (0..64)
            .map(|i| SoftTarget::new(if i % 2 == 0 { 1.0 } else { 0.0 }).unwrap())
            .collect();
        let feats = Features::from_rows(&rows);
        let cfg = TrainConfig::<f32> {
            epochs: 200,
            ..Default::default()
        };
        let init = Network::new(&[1, 4, 1], cfg.seed);
        let (net, _) = train(&init, &feats, &targets, None, &cfg, None).unwrap();
        assert!(net.forward(&[1.0f32]).unwrap() > 0.5);
        assert!(net.forward(&[-1.0f32]).unwrap() < 0.5);
    }
}
