//! Training the phase-selection network through a frozen Capacity-Net.
//!
//! The optimizer sees received pilots and the surrogate only; no channel
//! realization can be passed to [`train_unsupervised_surrogate`]. Gradients of
//! −R̂(Y, g(Y)) reach the phase network through the surrogate's input
//! gradient restricted to its phase slice.

use ndarray::Array2;

use crate::capacity_net::CapacityNet;
use crate::channel::seeded_rng;
use crate::error::{Error, Result};
use crate::nn::{adam_step, shuffled_batches, AdamState, TrainConfig};
use crate::phase_net::PhaseNet;
use crate::pilots::PilotTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateReport {
    /// Mean surrogate rate R̂ over the training set, per epoch.
    pub epoch_mean_surrogate_rate: Vec<f64>,
    /// Per-batch mean surrogate rate in update order.
    pub step_surrogate_rate: Vec<f64>,
    /// Values returned by the audit callback after each epoch, if any.
    pub audit: Vec<f64>,
}

pub fn train_unsupervised_surrogate(
    pn: &mut PhaseNet,
    frozen: &CapacityNet,
    dataset: &[PilotTensor],
    tc: &TrainConfig,
) -> Result<SurrogateReport> {
    train_with_audit(pn, frozen, dataset, tc, None)
}

/// Same as [`train_unsupervised_surrogate`], calling `audit` on the phase
/// network after every epoch. The callback's result is recorded but never
/// feeds back into training.
pub fn train_unsupervised_surrogate_audited(
    pn: &mut PhaseNet,
    frozen: &CapacityNet,
    dataset: &[PilotTensor],
    tc: &TrainConfig,
    audit: &dyn Fn(&PhaseNet) -> f64,
) -> Result<SurrogateReport> {
    train_with_audit(pn, frozen, dataset, tc, Some(audit))
}

fn train_with_audit(
    pn: &mut PhaseNet,
    frozen: &CapacityNet,
    dataset: &[PilotTensor],
    tc: &TrainConfig,
    audit: Option<&dyn Fn(&PhaseNet) -> f64>,
) -> Result<SurrogateReport> {
    tc.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if pn.n_elements() != frozen.n_elements {
        return Err(Error::Dimension(format!(
            "phase net emits {} phases but the surrogate's phase slice takes {}",
            pn.n_elements(),
            frozen.n_elements
        )));
    }
    if pn.shape != frozen.shape {
        return Err(Error::Dimension(format!(
            "phase net pilots {:?} differ from surrogate pilots {:?}",
            pn.shape, frozen.shape
        )));
    }
    for y in dataset {
        pn.check_input(y)?;
    }
    let pilot_width = frozen.pilot_width();
    let mut adam = AdamState::new(&pn.net, tc.learning_rate);
    let mut rng = seeded_rng(tc.seed);
    let mut report = SurrogateReport {
        epoch_mean_surrogate_rate: Vec::with_capacity(tc.epochs),
        step_surrogate_rate: Vec::new(),
        audit: Vec::new(),
    };
    for _ in 0..tc.epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(dataset.len(), tc.batch_size, &mut rng) {
            let pilots: Vec<&PilotTensor> = batch.iter().map(|&i| &dataset[i]).collect();
            let tape = pn.net.forward_batch(pn.input_batch(&pilots).view())?;
            let theta = tape.output();
            let rows: Vec<(&[f64], &[f64])> = pilots
                .iter()
                .zip(theta.rows())
                .map(|(y, t)| (&y.flat[..], t.to_slice().expect("contiguous row")))
                .collect();
            let surrogate_in = frozen.input_batch(&rows);
            let surrogate_tape = frozen.net.forward_batch(surrogate_in.view())?;
            let batch_rate: f64 = surrogate_tape.output().column(0).iter().map(|v| v + frozen.label_shift).sum();
            total += batch_rate;
            report.step_surrogate_rate.push(batch_rate / batch.len() as f64);

            let inv = 1.0 / batch.len() as f64;
            let dl_dy = Array2::from_elem((batch.len(), 1), -inv);
            let dx = frozen.net.input_gradient_batch(&surrogate_tape, dl_dy.view())?;
            let mut dl_dtheta = Array2::zeros(theta.dim());
            for r in 0..batch.len() {
                let t = theta.row(r);
                let d_features = dx.row(r);
                let d_phase = &d_features.as_slice().expect("contiguous row")[pilot_width..];
                let g = frozen.encoding.angle_gradient(t.as_slice().expect("contiguous row"), d_phase);
                dl_dtheta.row_mut(r).assign(&ndarray::Array1::from(g));
            }
            let (grads, _) = pn.net.backward_batch(&tape, dl_dtheta.view())?;
            adam_step(&mut pn.net, &grads, &mut adam)?;
        }
        report.epoch_mean_surrogate_rate.push(total / dataset.len() as f64);
        if let Some(f) = audit {
            report.audit.push(f(pn));
        }
    }
    Ok(report)
}
