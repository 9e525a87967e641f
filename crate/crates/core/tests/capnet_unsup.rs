mod common;

use common::*;
use ris_capnet::capacity_net::*;
use ris_capnet::capnet_unsup::*;
use ris_capnet::channel::{rate, sample_channel, seeded_rng, RisPhases, ScenarioConfig};
use ris_capnet::nn::TrainConfig;
use ris_capnet::phase_net::{infer_phases, PhaseNet};
use ris_capnet::pilots::{observe, pilot_input_scale, PilotShape, PilotTensor};
use ris_capnet::{Error, Result};

fn pilots(cfg: &ScenarioConfig, n: u64, base: u64) -> Vec<PilotTensor> {
    (0..n)
        .map(|i| {
            let mut rng = seeded_rng(base + i);
            let re = sample_channel(cfg, &mut rng);
            observe(&re, cfg, &mut rng).unwrap()
        })
        .collect()
}

fn surrogate(cfg: &ScenarioConfig, ys: &[PilotTensor], encoding: PhaseEncoding, seed: u64) -> CapacityNet {
    CapacityNet::new(
        CapacityNetSpec {
            shape: PilotShape::of(cfg),
            n_elements: cfg.n_elements(),
            hidden: &[24, 12],
            encoding,
            input_scale: pilot_input_scale(ys),
            label_shift: 6.0,
        },
        &mut seeded_rng(seed),
    )
    .unwrap()
}

fn phase_net(cfg: &ScenarioConfig, ys: &[PilotTensor], seed: u64) -> PhaseNet {
    PhaseNet::new(PilotShape::of(cfg), cfg.n_elements(), &[16], pilot_input_scale(ys), &mut seeded_rng(seed)).unwrap()
}

fn tc(lr: f64, epochs: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        batch_size: batch,
        learning_rate: lr,
        epochs,
        seed: 5,
    }
}

#[test]
fn training_signature_admits_no_channel() {
    // The only inputs are the phase net, the frozen surrogate, pilots and
    // hyperparameters; this binding fails to compile if that ever changes.
    let f: fn(&mut PhaseNet, &CapacityNet, &[PilotTensor], &TrainConfig) -> Result<SurrogateReport> =
        train_unsupervised_surrogate;
    let _ = f;
}

#[test]
fn frozen_surrogate_is_bitwise_unchanged() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 40, 0);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::CosSin, 1);
    let before = frozen.to_model().to_bytes().unwrap();
    let mut pn = phase_net(&cfg, &ys, 2);
    train_unsupervised_surrogate(&mut pn, &frozen, &ys, &tc(1e-2, 5, 8)).unwrap();
    assert_eq!(frozen.to_model().to_bytes().unwrap(), before);
}

#[test]
fn zero_learning_rate_leaves_everything_constant() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 20, 10);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::RawAngles, 3);
    let mut pn = phase_net(&cfg, &ys, 4);
    let before = pn.clone();
    let rep = train_unsupervised_surrogate(&mut pn, &frozen, &ys, &tc(0.0, 4, 20)).unwrap();
    assert_eq!(pn, before);
    assert!(rep.step_surrogate_rate.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12));
    assert!(rep.epoch_mean_surrogate_rate.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12));
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 4, 20);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::CosSin, 5);
    let mut wrong_out = PhaseNet::new(PilotShape::of(&cfg), 9, &[8], 1.0, &mut seeded_rng(6)).unwrap();
    let err = train_unsupervised_surrogate(&mut wrong_out, &frozen, &ys, &tc(1e-3, 1, 2)).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));

    let other = ScenarioConfig { l: 4, ..cfg.clone() };
    let mut wrong_in = phase_net(&other, &pilots(&other, 2, 0), 7);
    let err = train_unsupervised_surrogate(&mut wrong_in, &frozen, &ys, &tc(1e-3, 1, 2)).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));

    let mut pn = phase_net(&cfg, &ys, 8);
    assert!(matches!(
        train_unsupervised_surrogate(&mut pn, &frozen, &[], &tc(1e-3, 1, 2)),
        Err(Error::EmptyDataset)
    ));
}

#[test]
fn surrogate_phase_gradient_matches_finite_differences() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 3, 30);
    for encoding in [PhaseEncoding::RawAngles, PhaseEncoding::CosSin] {
        let cn = surrogate(&cfg, &ys, encoding, 9);
        for y in &ys {
            let theta = vec![0.4, 1.9, 3.3, 5.1];
            let x = cn.assemble_input(y, &RisPhases::new(theta.clone())).unwrap();
            let (_, tape) = cn.net.forward(&x).unwrap();
            let (_, dx) = cn.net.backward(&tape, &[1.0]).unwrap();
            let g = encoding.angle_gradient(&theta, &dx[cn.pilot_width()..]);
            let fd = central_difference(
                |t| predict_rate(&cn, y, &RisPhases::new(t.to_vec())).unwrap(),
                &theta,
                1e-5,
            );
            for (a, b) in g.iter().zip(&fd) {
                assert!(close(*a, *b, 1e-4, 1e-7), "{encoding:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn overfit_run_raises_the_surrogate_rate_steadily() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 1, 40);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::CosSin, 11);
    let mut pn = phase_net(&cfg, &ys, 12);
    let rep = train_unsupervised_surrogate(&mut pn, &frozen, &ys, &tc(1e-3, 300, 1)).unwrap();
    let windows: Vec<f64> = rep
        .step_surrogate_rate
        .chunks(10)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    for w in windows.windows(2) {
        // Loss is −R̂: nonincreasing loss up to 1% upticks.
        assert!(-w[1] <= -w[0] + 0.01 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
    assert!(windows.last().unwrap() > &windows[0]);
}

#[test]
fn audit_is_measurement_only() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 30, 50);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::CosSin, 13);
    let audit_channel = sample_channel(&cfg, &mut seeded_rng(999));
    let audit_y = observe(&audit_channel, &cfg, &mut seeded_rng(998)).unwrap();
    let audit = |pn: &PhaseNet| rate(&audit_channel, &infer_phases(pn, &audit_y).unwrap(), &cfg).unwrap();

    let mut plain = phase_net(&cfg, &ys, 14);
    let mut audited = plain.clone();
    let r1 = train_unsupervised_surrogate(&mut plain, &frozen, &ys, &tc(1e-3, 3, 8)).unwrap();
    let r2 = train_unsupervised_surrogate_audited(&mut audited, &frozen, &ys, &tc(1e-3, 3, 8), &audit).unwrap();
    assert_eq!(plain, audited);
    assert_eq!(r1.step_surrogate_rate, r2.step_surrogate_rate);
    assert!(r1.audit.is_empty());
    assert_eq!(r2.audit.len(), 3);
    assert_eq!(*r2.audit.last().unwrap(), audit(&audited));
}

#[test]
fn training_is_deterministic() {
    let cfg = ScenarioConfig::small();
    let ys = pilots(&cfg, 16, 60);
    let frozen = surrogate(&cfg, &ys, PhaseEncoding::CosSin, 15);
    let run = || {
        let mut pn = phase_net(&cfg, &ys, 16);
        let rep = train_unsupervised_surrogate(&mut pn, &frozen, &ys, &tc(1e-3, 3, 4)).unwrap();
        (pn, rep)
    };
    assert_eq!(run(), run());
}
