//! Phase network trained against the true rate of known channels, then
//! scored on held-out channels from pilots alone.

use ris_capnet::experiments::pipeline::{heldout_dataset, run_unsup_csi, train_dataset};
use ris_capnet::experiments::{evaluate, Models, Pipeline, RunManifest};

fn main() -> ris_capnet::Result<()> {
    let mut m = RunManifest::small(Pipeline::UnsupCsi);
    m.data.train_realizations = 4000;
    m.phase_net.csi_train.epochs = 15;

    let train = train_dataset(&m)?;
    let (pn, report) = run_unsup_csi(&m, &train)?;
    for (e, r) in report.epoch_mean_rate.iter().enumerate().step_by(3) {
        println!("epoch {e:>2}: training rate {r:.4}");
    }

    let held = heldout_dataset(&m, &m.scenario)?;
    let models = Models {
        phase_csi: Some(pn),
        ..Models::default()
    };
    for s in evaluate(&m, &m.scenario, &models, &[Pipeline::UnsupCsi, Pipeline::Dsm, Pipeline::Random], &held)? {
        println!("{:<10} {:.4} +- {:.4}", s.method, s.mean, s.std_err);
    }
    Ok(())
}
