//! The surrogate-driven pipeline: train Capacity-Net, freeze it, and train
//! the phase network on pilots only. The true rate is measured afterwards on
//! held-out channels.

use ris_capnet::experiments::pipeline::heldout_dataset;
use ris_capnet::experiments::{evaluate, train_models, Pipeline, RunManifest};

fn main() -> ris_capnet::Result<()> {
    let mut m = RunManifest::small(Pipeline::CapnetUnsup);
    m.data.capnet_channels = 10000;
    m.capacity_net.train.epochs = 10;
    m.data.train_realizations = 5000;
    m.phase_net.csi_train.epochs = 20;
    m.phase_net.surrogate_train.epochs = 20;

    let methods = [Pipeline::CapnetUnsup, Pipeline::UnsupCsi, Pipeline::Dsm, Pipeline::Random];
    let models = train_models(&m, &methods)?;
    let held = heldout_dataset(&m, &m.scenario)?;
    for s in evaluate(&m, &m.scenario, &models, &methods, &held)? {
        println!("{:<13} {:.4} +- {:.4}", s.method, s.mean, s.std_err);
    }
    Ok(())
}
