//! Fit the rate surrogate R^(Y, theta) and check it on unseen channels.

use ris_capnet::capacity_net::{mean_label, pearson, predict_samples};
use ris_capnet::experiments::pipeline::{capnet_heldout_dataset, capnet_train_dataset, run_capnet};
use ris_capnet::experiments::{Pipeline, RunManifest};

fn main() -> ris_capnet::Result<()> {
    let mut m = RunManifest::small(Pipeline::Capnet);
    m.data.capnet_channels = 8000;
    m.capacity_net.train.epochs = 8;

    let train = capnet_train_dataset(&m)?;
    let held = capnet_heldout_dataset(&m)?;
    println!("{} training samples, {} held out", train.len(), held.len());
    let (cn, report) = run_capnet(&m, &train, &held)?;
    println!("held-out mse before training {:.4}", report.initial_heldout_mse.unwrap_or(f64::NAN));
    for (e, (t, h)) in report.train_mse.iter().zip(&report.heldout_mse).enumerate() {
        println!("epoch {e}: train {t:.4} held-out {h:.4}");
    }

    let pred = predict_samples(&cn, &held.samples)?;
    let labels: Vec<f64> = held.samples.iter().map(|s| s.rate).collect();
    let mu = mean_label(&held.samples);
    let const_mse = labels.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / labels.len() as f64;
    println!("pearson {:.4}, constant-predictor mse {const_mse:.4}", pearson(&pred, &labels));
    Ok(())
}
