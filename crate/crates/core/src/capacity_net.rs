//! Capacity-Net: a regression network from (received pilots, candidate
//! phases) to achievable rate, trained against rates computed from the
//! channels that produced the pilots.

use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::channel::{
    rate, sample_channel, seeded_rng, split_seed, wrap_angle, ChannelRealization, Geometry, RisPhases, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::nn::{adam_step, shuffled_batches, AdamState, DenseNet, ModelFile, TrainConfig};
use crate::pilots::{build_codebook, observe, PilotShape, PilotTensor};

pub const CAPACITY_NET_ROLE: &str = "capacity-net";

/// How the candidate phases enter the network after the pilots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseEncoding {
    /// N angles reduced to [0, 2π).
    #[default]
    RawAngles,
    /// N cosines followed by N sines.
    CosSin,
}

impl PhaseEncoding {
    pub fn width(self, n_elements: usize) -> usize {
        match self {
            PhaseEncoding::RawAngles => n_elements,
            PhaseEncoding::CosSin => 2 * n_elements,
        }
    }

    fn code(self) -> f64 {
        match self {
            PhaseEncoding::RawAngles => 0.0,
            PhaseEncoding::CosSin => 1.0,
        }
    }

    fn from_code(code: f64) -> Result<Self> {
        match code as u32 {
            0 => Ok(PhaseEncoding::RawAngles),
            1 => Ok(PhaseEncoding::CosSin),
            _ => Err(Error::format("model", format!("unknown phase encoding {code}"))),
        }
    }

    pub fn encode_into(self, theta: &[f64], out: &mut [f64]) {
        match self {
            PhaseEncoding::RawAngles => {
                for (o, t) in out.iter_mut().zip(theta) {
                    *o = wrap_angle(*t);
                }
            }
            PhaseEncoding::CosSin => {
                let n = theta.len();
                for (i, t) in theta.iter().enumerate() {
                    out[i] = t.cos();
                    out[n + i] = t.sin();
                }
            }
        }
    }

    /// Chain rule from encoded-feature gradients back to angle gradients.
    pub fn angle_gradient(self, theta: &[f64], d_features: &[f64]) -> Vec<f64> {
        match self {
            PhaseEncoding::RawAngles => d_features.to_vec(),
            PhaseEncoding::CosSin => {
                let n = theta.len();
                theta
                    .iter()
                    .enumerate()
                    .map(|(i, t)| -t.sin() * d_features[i] + t.cos() * d_features[n + i])
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityNet {
    pub net: DenseNet,
    pub shape: PilotShape,
    pub n_elements: usize,
    pub encoding: PhaseEncoding,
    /// Multiplier applied to the flattened pilots.
    pub input_scale: f64,
    /// Added to the network output; set to the mean training label.
    pub label_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityNetSpec<'a> {
    pub shape: PilotShape,
    pub n_elements: usize,
    pub hidden: &'a [usize],
    pub encoding: PhaseEncoding,
    pub input_scale: f64,
    pub label_shift: f64,
}

impl CapacityNet {
    pub fn new<R: Rng + ?Sized>(spec: CapacityNetSpec<'_>, rng: &mut R) -> Result<Self> {
        let mut dims = vec![spec.shape.flat_len() + spec.encoding.width(spec.n_elements)];
        dims.extend_from_slice(spec.hidden);
        dims.push(1);
        Ok(Self {
            net: DenseNet::new(&dims, rng)?,
            shape: spec.shape,
            n_elements: spec.n_elements,
            encoding: spec.encoding,
            input_scale: spec.input_scale,
            label_shift: spec.label_shift,
        })
    }

    /// Flattened-pilot slice length of the input.
    pub fn pilot_width(&self) -> usize {
        self.shape.flat_len()
    }

    pub fn phase_width(&self) -> usize {
        self.encoding.width(self.n_elements)
    }

    fn check(&self, y: &PilotTensor, theta: &RisPhases) -> Result<()> {
        if y.flat.len() != self.pilot_width() || theta.len() != self.n_elements {
            return Err(Error::Dimension(format!(
                "capacity net expects {} pilot values and {} phases, got {} and {}",
                self.pilot_width(),
                self.n_elements,
                y.flat.len(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Network input: scaled flat(Y) followed by the encoded phases.
    pub fn assemble_input(&self, y: &PilotTensor, theta: &RisPhases) -> Result<Vec<f64>> {
        self.check(y, theta)?;
        let mut x = vec![0.0; self.net.input_dim()];
        self.fill_row(&y.flat, &theta.theta, &mut x);
        Ok(x)
    }

    pub(crate) fn fill_row(&self, flat: &[f64], theta: &[f64], out: &mut [f64]) {
        let (pilot, phase) = out.split_at_mut(self.pilot_width());
        for (o, v) in pilot.iter_mut().zip(flat) {
            *o = v * self.input_scale;
        }
        self.encoding.encode_into(theta, phase);
    }

    pub(crate) fn input_batch(&self, rows: &[(&[f64], &[f64])]) -> Array2<f64> {
        let mut x = Array2::zeros((rows.len(), self.net.input_dim()));
        for (r, (flat, theta)) in rows.iter().enumerate() {
            let mut row = x.row_mut(r);
            self.fill_row(flat, theta, row.as_slice_mut().expect("contiguous row"));
        }
        x
    }

    pub(crate) fn predict_inputs(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let out = self.net.predict(x)?;
        Ok(out.column(0).iter().map(|v| v + self.label_shift).collect())
    }

    pub fn to_model(&self) -> ModelFile {
        ModelFile {
            role: CAPACITY_NET_ROLE.into(),
            meta: vec![
                ("n_r".into(), self.shape.n_r as f64),
                ("m".into(), self.shape.m as f64),
                ("l".into(), self.shape.l as f64),
                ("n_elements".into(), self.n_elements as f64),
                ("phase_encoding".into(), self.encoding.code()),
                ("input_scale".into(), self.input_scale),
                ("label_shift".into(), self.label_shift),
            ],
            net: self.net.clone(),
        }
    }

    pub fn from_model(model: ModelFile) -> Result<Self> {
        if model.role != CAPACITY_NET_ROLE {
            return Err(Error::format(
                "model",
                format!("expected role {CAPACITY_NET_ROLE:?}, found {:?}", model.role),
            ));
        }
        let shape = PilotShape {
            n_r: model.require("n_r")? as usize,
            m: model.require("m")? as usize,
            l: model.require("l")? as usize,
        };
        let n_elements = model.require("n_elements")? as usize;
        let encoding = PhaseEncoding::from_code(model.require("phase_encoding")?)?;
        if model.net.input_dim() != shape.flat_len() + encoding.width(n_elements) || model.net.output_dim() != 1 {
            return Err(Error::format("model", "header dimensions disagree with layer shapes"));
        }
        Ok(Self {
            input_scale: model.require("input_scale")?,
            label_shift: model.require("label_shift")?,
            net: model.net,
            shape,
            n_elements,
            encoding,
        })
    }
}

/// Where a sample came from; not part of the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub realization_seed: u64,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapnetSample {
    pub y: PilotTensor,
    pub theta: RisPhases,
    /// True achievable rate of the generating channel under `theta`.
    pub rate: f64,
    /// Absent for samples read back from a dataset file.
    pub provenance: Option<Provenance>,
}

/// Candidate phases: with probability 1/2 uniform angles in [0, 2π)ᴺ,
/// otherwise a uniformly chosen codebook entry.
pub fn sample_candidate_phases<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> RisPhases {
    let n = config.n_elements();
    if rng.random::<bool>() {
        RisPhases::new((0..n).map(|_| rng.random_range(0.0..TAU)).collect())
    } else {
        let cb = build_codebook(config.n_h, config.n_v);
        cb.phases(rng.random_range(0..cb.len()))
    }
}

/// One channel and one candidate phase vector per sample.
pub fn gen_capnet_dataset<R: Rng + ?Sized>(config: &ScenarioConfig, n_samples: usize, rng: &mut R) -> Result<Vec<CapnetSample>> {
    gen_capnet_dataset_grouped(config, n_samples, 1, rng)
}

/// `n_channels` realizations, each observed once through the codebook sweep
/// and labeled under `phases_per_channel` candidate phase vectors. The seed
/// base is the first value drawn from `rng`.
pub fn gen_capnet_dataset_grouped<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    n_channels: usize,
    phases_per_channel: usize,
    rng: &mut R,
) -> Result<Vec<CapnetSample>> {
    let base: u64 = rng.random();
    Ok(gen_labeled_channels(config, n_channels, phases_per_channel, base)?
        .into_iter()
        .flat_map(|(samples, _)| samples)
        .collect())
}

/// Channel `i` is drawn from `split_seed(base, i)`; that one generator then
/// supplies the channel, the pilot noise, and the candidate phases in turn.
/// Returns each channel's samples together with the realization.
pub fn gen_labeled_channels(
    config: &ScenarioConfig,
    n_channels: usize,
    phases_per_channel: usize,
    base: u64,
) -> Result<Vec<(Vec<CapnetSample>, ChannelRealization)>> {
    config.validate()?;
    if n_channels == 0 || phases_per_channel == 0 {
        return Err(Error::Config("capacity-net dataset needs at least one sample".into()));
    }
    par_map(n_channels, |i| {
        let seed = split_seed(base, i as u64);
        let mut local = seeded_rng(seed);
        let re = sample_channel(config, &mut local);
        let y = observe(&re, config, &mut local)?;
        let mut samples = Vec::with_capacity(phases_per_channel);
        for _ in 0..phases_per_channel {
            let theta = sample_candidate_phases(config, &mut local);
            let label = rate(&re, &theta, config)?;
            samples.push(CapnetSample {
                y: y.clone(),
                theta,
                rate: label,
                provenance: Some(Provenance {
                    realization_seed: seed,
                    geometry: re.geometry.clone(),
                }),
            });
        }
        Ok((samples, re))
    })
    .into_iter()
    .collect()
}

pub fn mean_label(data: &[CapnetSample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|s| s.rate).sum::<f64>() / data.len() as f64
}

/// Surrogate rate R̂(Y, θ).
pub fn predict_rate(cn: &CapacityNet, y: &PilotTensor, theta: &RisPhases) -> Result<f64> {
    let x = cn.assemble_input(y, theta)?;
    let (out, _) = cn.net.forward(&x)?;
    Ok(out[0] + cn.label_shift)
}

/// Predictions for many samples at once.
pub fn predict_samples(cn: &CapacityNet, data: &[CapnetSample]) -> Result<Vec<f64>> {
    let mut preds = Vec::with_capacity(data.len());
    for chunk in data.chunks(512) {
        for s in chunk {
            cn.check(&s.y, &s.theta)?;
        }
        let rows: Vec<(&[f64], &[f64])> = chunk.iter().map(|s| (&s.y.flat[..], &s.theta.theta[..])).collect();
        preds.extend(cn.predict_inputs(cn.input_batch(&rows).view())?);
    }
    Ok(preds)
}

/// Mean squared error of the surrogate on a labeled set.
pub fn capnet_mse(cn: &CapacityNet, data: &[CapnetSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = predict_samples(cn, data)?;
    Ok(preds.iter().zip(data).map(|(p, s)| (p - s.rate).powi(2)).sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapnetReport {
    pub train_mse: Vec<f64>,
    /// Held-out MSE before the first update.
    pub initial_heldout_mse: Option<f64>,
    pub heldout_mse: Vec<f64>,
}

/// Minimizes MSE(R̂, R) over `data`; `heldout` (possibly empty) is only
/// measured, once before training and after every epoch.
pub fn train_capacity_net(
    cn: &mut CapacityNet,
    data: &[CapnetSample],
    heldout: &[CapnetSample],
    tc: &TrainConfig,
) -> Result<CapnetReport> {
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in data {
        cn.check(&s.y, &s.theta)?;
    }
    let measure = |cn: &CapacityNet| -> Result<Option<f64>> {
        if heldout.is_empty() {
            Ok(None)
        } else {
            capnet_mse(cn, heldout).map(Some)
        }
    };
    let initial_heldout_mse = measure(cn)?;
    let mut adam = AdamState::new(&cn.net, tc.learning_rate);
    let mut rng = seeded_rng(tc.seed);
    let mut train_mse = Vec::with_capacity(tc.epochs);
    let mut heldout_mse = Vec::with_capacity(tc.epochs);
    for _ in 0..tc.epochs {
        let mut sq = 0.0;
        for batch in shuffled_batches(data.len(), tc.batch_size, &mut rng) {
            let rows: Vec<(&[f64], &[f64])> = batch
                .iter()
                .map(|&i| (&data[i].y.flat[..], &data[i].theta.theta[..]))
                .collect();
            let tape = cn.net.forward_batch(cn.input_batch(&rows).view())?;
            let out = tape.output();
            let inv = 1.0 / batch.len() as f64;
            let mut dl = Array2::zeros((batch.len(), 1));
            for (r, &i) in batch.iter().enumerate() {
                let err = out[[r, 0]] + cn.label_shift - data[i].rate;
                sq += err * err;
                dl[[r, 0]] = 2.0 * err * inv;
            }
            let (grads, _) = cn.net.backward_batch(&tape, dl.view())?;
            adam_step(&mut cn.net, &grads, &mut adam)?;
        }
        train_mse.push(sq / data.len() as f64);
        if let Some(m) = measure(cn)? {
            heldout_mse.push(m);
        }
    }
    Ok(CapnetReport {
        train_mse,
        initial_heldout_mse,
        heldout_mse,
    })
}

/// Pearson correlation of two equally long series.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
