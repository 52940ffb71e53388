//! Two-hidden-layer ReLU Q-network with an optional dueling head, analytic
//! backprop of the squared TD loss, and Adam.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::gemm;
use crate::rng::{self, Stream};

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];

const MAGIC: &[u8; 8] = b"UAVQNET\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetMode {
    #[default]
    Dueling,
    Vanilla,
}

/// Named parameter blocks. `Output` is the advantage head in dueling mode
/// and the Q head in vanilla mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Hidden1,
    Hidden2,
    Value,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: Layer,
    pub fan_in: usize,
    pub fan_out: usize,
    w_off: usize,
    b_off: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.w_off..self.w_off + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.b_off..self.b_off + self.fan_out
    }
}

fn layer_shapes(mode: NetMode, input_dim: usize, hidden: [usize; 2], n_actions: usize) -> Vec<LayerShape> {
    let mut dims = vec![
        (Layer::Hidden1, input_dim, hidden[0]),
        (Layer::Hidden2, hidden[0], hidden[1]),
    ];
    if mode == NetMode::Dueling {
        dims.push((Layer::Value, hidden[1], 1));
    }
    dims.push((Layer::Output, hidden[1], n_actions));
    let mut off = 0;
    dims.into_iter()
        .map(|(layer, fan_in, fan_out)| {
            let w_off = off;
            let b_off = w_off + fan_in * fan_out;
            off = b_off + fan_out;
            LayerShape {
                layer,
                fan_in,
                fan_out,
                w_off,
                b_off,
            }
        })
        .collect()
}

/// Raw head outputs for a batch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum Heads {
    Dueling { v: Vec<f64>, a: Vec<f64> },
    Vanilla { q: Vec<f64> },
}

impl Heads {
    pub fn into_q(self, n_actions: usize) -> Result<Vec<f64>> {
        match self {
            Heads::Dueling { v, a } => aggregate_q(&v, &a, n_actions),
            Heads::Vanilla { q } => Ok(q),
        }
    }
}

/// `Q = V + A - mean(A)` row by row.
pub fn aggregate_q(v: &[f64], a: &[f64], n_actions: usize) -> Result<Vec<f64>> {
    if n_actions == 0 || a.len() != v.len() * n_actions {
        return Err(Error::ShapeMismatch {
            context: "advantage rows",
            expected: v.len() * n_actions,
            actual: a.len(),
        });
    }
    let mut q = a.to_vec();
    for (row, vb) in q.chunks_exact_mut(n_actions).zip(v) {
        let mean = row.iter().sum::<f64>() / n_actions as f64;
        for x in row.iter_mut() {
            *x = vb + (*x - mean);
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    mode: NetMode,
    input_dim: usize,
    hidden: [usize; 2],
    n_actions: usize,
    params: Vec<f64>,
}

struct Activations {
    batch: usize,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    heads: Heads,
}

impl QNetwork {
    /// All-zero network.
    pub fn zeros(input_dim: usize, hidden: [usize; 2], n_actions: usize, mode: NetMode) -> Result<Self> {
        for (name, v) in [
            ("input_dim", input_dim),
            ("hidden[0]", hidden[0]),
            ("hidden[1]", hidden[1]),
            ("n_actions", n_actions),
        ] {
            if v == 0 {
                return Err(Error::invalid("network dims", format!("{name} must be >= 1")));
            }
        }
        let n = Self::param_count_for(input_dim, hidden, n_actions, mode);
        Ok(QNetwork {
            mode,
            input_dim,
            hidden,
            n_actions,
            params: vec![0.0; n],
        })
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: [usize; 2],
        n_actions: usize,
        mode: NetMode,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, n_actions, mode)?;
        for shape in net.shapes() {
            let bound = 1.0 / (shape.fan_in as f64).sqrt();
            for w in &mut net.params[shape.weight_range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Default-width network initialized from the init stream of `seed`.
    pub fn from_seed(input_dim: usize, n_actions: usize, mode: NetMode, seed: u64) -> Result<Self> {
        Self::init(input_dim, DEFAULT_HIDDEN, n_actions, mode, &mut rng::stream(seed, Stream::Init))
    }

    pub fn param_count_for(input_dim: usize, hidden: [usize; 2], n_actions: usize, mode: NetMode) -> usize {
        layer_shapes(mode, input_dim, hidden, n_actions)
            .iter()
            .map(|s| s.fan_out * (s.fan_in + 1))
            .sum()
    }

    pub fn mode(&self) -> NetMode {
        self.mode
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> [usize; 2] {
        self.hidden
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        layer_shapes(self.mode, self.input_dim, self.hidden, self.n_actions)
    }

    pub fn shape(&self, layer: Layer) -> Result<LayerShape> {
        self.shapes()
            .into_iter()
            .find(|s| s.layer == layer)
            .ok_or_else(|| Error::invalid("layer", format!("{layer:?} does not exist in {:?} mode", self.mode)))
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_batch(&self, states: &[f64]) -> Result<usize> {
        if states.is_empty() || !states.len().is_multiple_of(self.input_dim) {
            return Err(Error::ShapeMismatch {
                context: "state width",
                expected: self.input_dim,
                actual: states.len(),
            });
        }
        Ok(states.len() / self.input_dim)
    }

    fn dense(&self, shape: LayerShape, x: &[f64], batch: usize) -> Vec<f64> {
        let bias = &self.params[shape.bias_range()];
        let mut out: Vec<f64> = bias.iter().copied().cycle().take(batch * shape.fan_out).collect();
        gemm(
            batch,
            shape.fan_in,
            shape.fan_out,
            x,
            false,
            &self.params[shape.weight_range()],
            false,
            1.0,
            &mut out,
        );
        out
    }

    fn run(&self, states: &[f64]) -> Result<Activations> {
        let batch = self.check_batch(states)?;
        let shapes = self.shapes();
        let z1 = self.dense(shapes[0], states, batch);
        let a1: Vec<f64> = z1.iter().map(|z| z.max(0.0)).collect();
        let z2 = self.dense(shapes[1], &a1, batch);
        let a2: Vec<f64> = z2.iter().map(|z| z.max(0.0)).collect();
        let heads = match self.mode {
            NetMode::Dueling => Heads::Dueling {
                v: self.dense(shapes[2], &a2, batch),
                a: self.dense(shapes[3], &a2, batch),
            },
            NetMode::Vanilla => Heads::Vanilla {
                q: self.dense(shapes[2], &a2, batch),
            },
        };
        Ok(Activations {
            batch,
            z1,
            a1,
            z2,
            a2,
            heads,
        })
    }

    /// Head outputs for a row-major batch of states.
    pub fn forward(&self, states: &[f64]) -> Result<Heads> {
        Ok(self.run(states)?.heads)
    }

    /// `batch x n_actions` Q-values.
    pub fn q_values(&self, states: &[f64]) -> Result<Vec<f64>> {
        self.forward(states)?.into_q(self.n_actions)
    }

    /// Mean squared TD error over the batch and its gradient with respect
    /// to every parameter (same layout as [`QNetwork::params`]).
    pub fn td_loss_and_gradients(&self, states: &[f64], actions: &[usize], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let acts = self.run(states)?;
        let batch = acts.batch;
        if actions.len() != batch || targets.len() != batch {
            return Err(Error::ShapeMismatch {
                context: "td batch",
                expected: batch,
                actual: actions.len().min(targets.len()),
            });
        }
        if let Some(&a) = actions.iter().find(|a| **a >= self.n_actions) {
            return Err(Error::ActionOutOfRange {
                index: a,
                count: self.n_actions,
            });
        }
        if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid("targets", format!("non-finite target {t}")));
        }
        let na = self.n_actions;
        let q = acts.heads.clone().into_q(na)?;
        let mut loss = 0.0;
        // d loss / d Q(s_b, a_b)
        let mut dq = vec![0.0; batch];
        for b in 0..batch {
            let err = q[b * na + actions[b]] - targets[b];
            loss += err * err;
            dq[b] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;

        let shapes = self.shapes();
        let mut grads = vec![0.0; self.params.len()];
        let h2 = self.hidden[1];
        let mut da2 = vec![0.0; batch * h2];

        let mut d_out = vec![0.0; batch * na];
        match self.mode {
            NetMode::Dueling => {
                for b in 0..batch {
                    let row = &mut d_out[b * na..(b + 1) * na];
                    row.iter_mut().for_each(|x| *x = -dq[b] / na as f64);
                    row[actions[b]] += dq[b];
                }
                let value = shapes[2];
                // dV = dq; value head is h2 x 1.
                gemm(h2, batch, 1, &acts.a2, true, &dq, false, 0.0, &mut grads[value.weight_range()]);
                grads[value.b_off] = dq.iter().sum();
                let wv = &self.params[value.weight_range()];
                for b in 0..batch {
                    for j in 0..h2 {
                        da2[b * h2 + j] = dq[b] * wv[j];
                    }
                }
            }
            NetMode::Vanilla => {
                for b in 0..batch {
                    d_out[b * na + actions[b]] = dq[b];
                }
            }
        }
        let out = *shapes.last().expect("output layer");
        self.backprop_dense(out, &acts.a2, &d_out, batch, &mut grads, Some(&mut da2));

        let mut dz2 = da2;
        mask_relu(&mut dz2, &acts.z2);
        let mut da1 = vec![0.0; batch * self.hidden[0]];
        self.backprop_dense(shapes[1], &acts.a1, &dz2, batch, &mut grads, Some(&mut da1));

        let mut dz1 = da1;
        mask_relu(&mut dz1, &acts.z1);
        self.backprop_dense(shapes[0], states, &dz1, batch, &mut grads, None);
        Ok((loss, grads))
    }

    /// Writes weight and bias gradients of one dense layer and accumulates
    /// the input gradient into `d_in` when given.
    fn backprop_dense(
        &self,
        shape: LayerShape,
        x: &[f64],
        d_out: &[f64],
        batch: usize,
        grads: &mut [f64],
        d_in: Option<&mut Vec<f64>>,
    ) {
        gemm(
            shape.fan_in,
            batch,
            shape.fan_out,
            x,
            true,
            d_out,
            false,
            0.0,
            &mut grads[shape.weight_range()],
        );
        let gb = &mut grads[shape.bias_range()];
        for row in d_out.chunks_exact(shape.fan_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if let Some(d_in) = d_in {
            gemm(
                batch,
                shape.fan_out,
                shape.fan_in,
                d_out,
                false,
                &self.params[shape.weight_range()],
                true,
                1.0,
                d_in,
            );
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(match self.mode {
            NetMode::Dueling => 0,
            NetMode::Vanilla => 1,
        });
        for d in [self.input_dim, self.hidden[0], self.hidden[1], self.n_actions] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Checkpoint {
            path: origin.to_path_buf(),
            reason,
        };
        let mut cur = Reader { rest: bytes };
        if cur.take(8).ok_or_else(|| bad("truncated".into()))? != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated".into()))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mode = match cur.take(1).ok_or_else(|| bad("truncated".into()))?[0] {
            0 => NetMode::Dueling,
            1 => NetMode::Vanilla,
            m => return Err(bad(format!("unknown mode byte {m}"))),
        };
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = cur.u32().ok_or_else(|| bad("truncated".into()))? as usize;
        }
        let count = cur
            .take(8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
            .ok_or_else(|| bad("truncated".into()))?;
        let mut net = Self::zeros(dims[0], [dims[1], dims[2]], dims[3], mode).map_err(|e| bad(e.to_string()))?;
        if count != net.params.len() {
            return Err(bad(format!("parameter count {count} does not match dims (want {})", net.params.len())));
        }
        let body = cur.take(8 * count).ok_or_else(|| bad("truncated".into()))?;
        for (p, chunk) in net.params.iter_mut().zip(body.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        if !cur.rest.is_empty() {
            return Err(bad("trailing bytes".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Hex SHA-256 of the serialized network.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

struct Reader<'a> {
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.rest.len() < n {
            return None;
        }
        let (head, rest) = self.rest.split_at(n);
        self.rest = rest;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

fn mask_relu(grad: &mut [f64], pre: &[f64]) {
    for (g, z) in grad.iter_mut().zip(pre) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                context: "adam",
                expected: self.m.len(),
                actual: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        if let Some(g) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::invalid("gradients", format!("non-finite gradient {g}")));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powf(self.t as f64);
        let c2 = 1.0 - self.beta2.powf(self.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
