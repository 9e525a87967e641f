//! A small fully connected network engine: rectifier hidden layers, affine
//! output, reverse-mode gradients for parameters and inputs, Adam, MSE, and
//! a binary model format.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// One affine map `y = W x + b`, with `W` stored as (out × in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Rectifier after every layer except the last, which is affine.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Dense>,
    /// Changes whenever parameters change; tapes remember the value they saw.
    generation: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl DenseNet {
    /// Scaled-uniform initialization in ±√(6/(fan_in+fan_out)), zero biases.
    pub fn new<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dimensions {layer_dims:?}")));
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            generation: next_generation(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Dimension(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::Dimension(format!("layer {k} bias length mismatch")));
            }
        }
        Ok(Self {
            layers,
            generation: next_generation(),
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the parameters; invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation = next_generation();
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].input_dim()];
        dims.extend(self.layers.iter().map(Dense::output_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// Forward pass over a batch laid out as (batch × input).
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Tape> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = activations[k].dot(&layer.weights.t());
            z += &layer.bias;
            if k < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        Ok(Tape {
            activations,
            generation: self.generation,
        })
    }

    /// Gradients of a scalar loss whose output-gradient is `dl_dy`
    /// (batch × output). Parameter gradients are summed over the batch.
    pub fn backward_batch(&self, tape: &Tape, dl_dy: ArrayView2<'_, f64>) -> Result<(Gradients, Array2<f64>)> {
        if tape.generation != self.generation {
            return Err(Error::StaleTape {
                tape: tape.generation,
                net: self.generation,
            });
        }
        let out = tape.output();
        if dl_dy.dim() != out.dim() {
            return Err(Error::Dimension(format!(
                "output gradient shape {:?} does not match output {:?}",
                dl_dy.dim(),
                out.dim()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = dl_dy.to_owned();
        for k in (0..self.layers.len()).rev() {
            let input = &tape.activations[k];
            grads.push(Dense {
                weights: delta.t().dot(input),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut upstream = delta.dot(&self.layers[k].weights);
            if k > 0 {
                ndarray::Zip::from(&mut upstream).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = upstream;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    /// Input gradient only, for networks whose parameters stay fixed.
    pub fn input_gradient_batch(&self, tape: &Tape, dl_dy: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if tape.generation != self.generation {
            return Err(Error::StaleTape {
                tape: tape.generation,
                net: self.generation,
            });
        }
        if dl_dy.dim() != tape.output().dim() {
            return Err(Error::Dimension("output gradient shape does not match output".into()));
        }
        let mut delta = dl_dy.to_owned();
        for k in (0..self.layers.len()).rev() {
            let mut upstream = delta.dot(&self.layers[k].weights);
            if k > 0 {
                ndarray::Zip::from(&mut upstream)
                    .and(&tape.activations[k])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = upstream;
        }
        Ok(delta)
    }

    /// Single-vector forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let tape = self.forward_batch(view)?;
        let y = tape.output().row(0).to_vec();
        Ok((y, tape))
    }

    /// Single-vector backward pass; returns parameter and input gradients.
    pub fn backward(&self, tape: &Tape, dl_dy: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let view = ArrayView2::from_shape((1, dl_dy.len()), dl_dy).expect("row view");
        let (g, dx) = self.backward_batch(tape, view)?;
        Ok((g, dx.row(0).to_vec()))
    }

    /// Outputs only, for inference.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward_batch(x).map(|t| t.activations.into_iter().last().expect("output"))
    }
}

/// Activations cached by a forward pass: the input, each hidden output, and
/// the network output.
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Array2<f64>>,
    generation: u64,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape has an output")
    }

    /// Pre-output activations (the outputs of every hidden layer).
    pub fn hidden(&self) -> &[Array2<f64>] {
        &self.activations[1..self.activations.len() - 1]
    }
}

/// Parameter gradients shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.bias *= s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|&x| x == 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Shuffled mini-batches of `0..n`; the final partial batch is kept.
pub fn shuffled_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Gathers rows of `data` (row-major, `width` columns) into a batch matrix.
pub fn gather_rows(width: usize, indices: &[usize], row: impl Fn(usize) -> Vec<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), width));
    for (r, &i) in indices.iter().enumerate() {
        let src = row(i);
        out.row_mut(r).assign(&Array1::from(src));
    }
    out
}

#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<Dense>,
    second_moment: Vec<Dense>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet, learning_rate: f64) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
            .collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], st: &AdamState, c1: f64, c2: f64) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = st.beta1 * *m + (1.0 - st.beta1) * g;
        *v = st.beta2 * *v + (1.0 - st.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= st.learning_rate * m_hat / (v_hat.sqrt() + st.epsilon);
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(net: &mut DenseNet, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.first_moment.len() != net.layers.len() {
        return Err(Error::Dimension("gradient/optimizer state does not match network".into()));
    }
    for ((l, g), m) in net.layers.iter().zip(&grads.layers).zip(&state.first_moment) {
        if l.weights.dim() != g.weights.dim() || l.weights.dim() != m.weights.dim() {
            return Err(Error::Dimension("gradient shape does not match layer".into()));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let snapshot = AdamState {
        first_moment: Vec::new(),
        second_moment: Vec::new(),
        ..*state
    };
    for (((layer, g), m), v) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        adam_update(
            layer.weights.as_slice_mut().expect("standard layout"),
            g.weights.as_slice().expect("standard layout"),
            m.weights.as_slice_mut().expect("standard layout"),
            v.weights.as_slice_mut().expect("standard layout"),
            &snapshot,
            c1,
            c2,
        );
        adam_update(
            layer.bias.as_slice_mut().expect("standard layout"),
            g.bias.as_slice().expect("standard layout"),
            m.bias.as_slice_mut().expect("standard layout"),
            v.bias.as_slice_mut().expect("standard layout"),
            &snapshot,
            c1,
            c2,
        );
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

pub const MODEL_MAGIC: &[u8; 4] = b"CAPN";
pub const MODEL_VERSION: u16 = 1;

/// A network plus the header fields stored with it: a role tag and named
/// scalar metadata (scenario dimensions, input scaling, encodings).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub role: String,
    pub meta: Vec<(String, f64)>,
    pub net: DenseNet,
}

impl ModelFile {
    pub fn meta(&self, key: &str) -> Option<f64> {
        self.meta.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.meta(key)
            .ok_or_else(|| Error::format("model", format!("missing header field {key:?}")))
    }

    /// Layout: magic, u16 version, role (u8 length + bytes), u16 metadata
    /// count with (u8 key length, key, f64) entries, u32 layer count, each
    /// layer as u32 rows, u32 cols, row-major weights, biases; then a CRC-32
    /// of everything before it. Integers and floats little-endian.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(64 + 8 * self.net.parameter_count());
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        write_short_str(&mut buf, &self.role)?;
        let count = u16::try_from(self.meta.len()).map_err(|_| Error::format("model", "too many header fields"))?;
        buf.extend_from_slice(&count.to_le_bytes());
        for (k, v) in &self.meta {
            write_short_str(&mut buf, k)?;
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let layers = self.net.layers();
        buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
        for l in layers {
            buf.extend_from_slice(&(l.output_dim() as u32).to_le_bytes());
            buf.extend_from_slice(&(l.input_dim() as u32).to_le_bytes());
            for w in l.weights.iter() {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            for b in l.bias.iter() {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 2 + 4 {
            return Err(Error::format("model", "file truncated"));
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(Error::format("model", "bad magic, not a model file"));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        let mut r = ByteReader::new(body, "model");
        r.take(4)?;
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::format("model", format!("unsupported version {version}")));
        }
        if crc32fast::hash(body) != stored {
            return Err(Error::format("model", "checksum mismatch (corrupted or truncated)"));
        }
        let role = r.short_str()?;
        let meta_count = r.u16()? as usize;
        let mut meta = Vec::with_capacity(meta_count);
        for _ in 0..meta_count {
            let k = r.short_str()?;
            meta.push((k, r.f64()?));
        }
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let weights = r.f64_vec(rows * cols)?;
            let bias = r.f64_vec(rows)?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((rows, cols), weights).expect("length checked"),
                bias: Array1::from(bias),
            });
        }
        if !r.is_done() {
            return Err(Error::format("model", "trailing bytes after last layer"));
        }
        Ok(Self {
            role,
            meta,
            net: DenseNet::from_layers(layers)?,
        })
    }
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_bytes(&bytes)
}

fn write_short_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u8::try_from(s.len()).map_err(|_| Error::format("model", format!("string {s:?} too long")))?;
    buf.push(len);
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], kind: &'static str) -> Self {
        Self { bytes, pos: 0, kind }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.kind, "file truncated"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.kind, "length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn short_str(&mut self) -> Result<String> {
        let len = self.u8()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::format(self.kind, "non-UTF-8 string"))
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
