//! The phase-selection network: flattened pilots in, one phase angle per
//! surface element out. Training here uses known channels to differentiate
//! the true rate.

use ndarray::Array2;
use rand::Rng;

use crate::channel::{rate, rate_gradient, seeded_rng, ChannelRealization, RisPhases, ScenarioConfig};
use crate::error::{Error, Result};
use crate::nn::{adam_step, gather_rows, shuffled_batches, AdamState, DenseNet, ModelFile, TrainConfig};
use crate::pilots::{Codebook, PilotShape, PilotTensor};

pub const PHASE_NET_ROLE: &str = "phase-net";

/// How raw network outputs become surface phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseOutput {
    /// Outputs are used directly as angles.
    #[default]
    Continuous,
    /// Outputs are snapped to the codebook entry with the largest
    /// correlation `|⟨v, c⟩|`.
    Codebook,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNet {
    pub net: DenseNet,
    pub shape: PilotShape,
    /// Multiplier applied to the flattened pilots before the first layer.
    pub input_scale: f64,
}

impl PhaseNet {
    /// `hidden` lists the widths of the rectifier layers.
    pub fn new<R: Rng + ?Sized>(
        shape: PilotShape,
        n_elements: usize,
        hidden: &[usize],
        input_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![shape.flat_len()];
        dims.extend_from_slice(hidden);
        dims.push(n_elements);
        Ok(Self {
            net: DenseNet::new(&dims, rng)?,
            shape,
            input_scale,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.net.output_dim()
    }

    pub(crate) fn check_input(&self, y: &PilotTensor) -> Result<()> {
        if y.flat.len() != self.net.input_dim() {
            return Err(Error::Dimension(format!(
                "phase net expects {} pilot values, got {}",
                self.net.input_dim(),
                y.flat.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn input_batch(&self, pilots: &[&PilotTensor]) -> Array2<f64> {
        let idx: Vec<usize> = (0..pilots.len()).collect();
        gather_rows(self.net.input_dim(), &idx, |i| {
            pilots[i].flat.iter().map(|x| x * self.input_scale).collect()
        })
    }

    pub fn infer(&self, y: &PilotTensor, mode: PhaseOutput, cb: Option<&Codebook>) -> Result<RisPhases> {
        let raw = infer_phases(self, y)?;
        match mode {
            PhaseOutput::Continuous => Ok(raw),
            PhaseOutput::Codebook => {
                let cb = cb.ok_or_else(|| Error::Config("codebook output mode needs a codebook".into()))?;
                Ok(cb.phases(nearest_codeword(cb, &raw)))
            }
        }
    }

    /// Phases for a batch of pilot tensors.
    pub fn infer_batch(&self, pilots: &[&PilotTensor]) -> Result<Vec<RisPhases>> {
        for y in pilots {
            self.check_input(y)?;
        }
        let out = self.net.predict(self.input_batch(pilots).view())?;
        Ok(out.rows().into_iter().map(|r| RisPhases::new(r.to_vec())).collect())
    }

    pub fn to_model(&self) -> ModelFile {
        ModelFile {
            role: PHASE_NET_ROLE.into(),
            meta: vec![
                ("n_r".into(), self.shape.n_r as f64),
                ("m".into(), self.shape.m as f64),
                ("l".into(), self.shape.l as f64),
                ("n_elements".into(), self.n_elements() as f64),
                ("input_scale".into(), self.input_scale),
            ],
            net: self.net.clone(),
        }
    }

    pub fn from_model(model: ModelFile) -> Result<Self> {
        if model.role != PHASE_NET_ROLE {
            return Err(Error::format("model", format!("expected role {PHASE_NET_ROLE:?}, found {:?}", model.role)));
        }
        let shape = PilotShape {
            n_r: model.require("n_r")? as usize,
            m: model.require("m")? as usize,
            l: model.require("l")? as usize,
        };
        let n_elements = model.require("n_elements")? as usize;
        if model.net.input_dim() != shape.flat_len() || model.net.output_dim() != n_elements {
            return Err(Error::format("model", "header dimensions disagree with layer shapes"));
        }
        Ok(Self {
            input_scale: model.require("input_scale")?,
            net: model.net,
            shape,
        })
    }
}

fn nearest_codeword(cb: &Codebook, phases: &RisPhases) -> usize {
    let v = phases.response();
    let mut best = (0, f64::NEG_INFINITY);
    for (idx, entry) in cb.entries.iter().enumerate() {
        let corr = entry.iter().zip(&v).map(|(c, x)| c.conj() * x).sum::<num_complex::Complex64>().norm();
        if corr > best.1 {
            best = (idx, corr);
        }
    }
    best.0
}

/// θ = g(Y); the unit-modulus constraint holds because θ parametrizes v = e^{jθ}.
pub fn infer_phases(pn: &PhaseNet, y: &PilotTensor) -> Result<RisPhases> {
    pn.check_input(y)?;
    let x: Vec<f64> = y.flat.iter().map(|v| v * pn.input_scale).collect();
    let (theta, _) = pn.net.forward(&x)?;
    Ok(RisPhases::new(theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training-set rate seen during each epoch (bits/s/Hz).
    pub epoch_mean_rate: Vec<f64>,
}

impl TrainReport {
    pub fn best_epoch(&self) -> Option<usize> {
        self.epoch_mean_rate
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &r)| match best {
                Some((_, b)) if b >= r => best,
                _ => Some((i, r)),
            })
            .map(|(i, _)| i)
    }
}

/// Minimizes the batch mean of −R(g(Y)) using the analytic rate gradient of
/// each sample's known channel.
pub fn train_unsupervised_csi(
    pn: &mut PhaseNet,
    dataset: &[(PilotTensor, ChannelRealization)],
    config: &ScenarioConfig,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    tc.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (y, re) in dataset {
        pn.check_input(y)?;
        if re.n_elements() != pn.n_elements() {
            return Err(Error::Dimension(format!(
                "channel has {} elements, phase net emits {}",
                re.n_elements(),
                pn.n_elements()
            )));
        }
    }
    let mut adam = AdamState::new(&pn.net, tc.learning_rate);
    let mut rng = seeded_rng(tc.seed);
    let mut epoch_mean_rate = Vec::with_capacity(tc.epochs);
    for _ in 0..tc.epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(dataset.len(), tc.batch_size, &mut rng) {
            let pilots: Vec<&PilotTensor> = batch.iter().map(|&i| &dataset[i].0).collect();
            let tape = pn.net.forward_batch(pn.input_batch(&pilots).view())?;
            let theta = tape.output();
            let mut dl_dtheta = Array2::zeros(theta.dim());
            let inv = 1.0 / batch.len() as f64;
            for (row, &i) in batch.iter().enumerate() {
                let ph = RisPhases::new(theta.row(row).to_vec());
                let re = &dataset[i].1;
                total += rate(re, &ph, config)?;
                let g = rate_gradient(re, &ph, config)?;
                for (d, gi) in dl_dtheta.row_mut(row).iter_mut().zip(g) {
                    *d = -gi * inv;
                }
            }
            let (grads, _) = pn.net.backward_batch(&tape, dl_dtheta.view())?;
            adam_step(&mut pn.net, &grads, &mut adam)?;
        }
        epoch_mean_rate.push(total / dataset.len() as f64);
    }
    Ok(TrainReport { epoch_mean_rate })
}
