use crate::baselines::{dsm_optimize, exhaustive_codebook, random_codebook};
use crate::capacity_net::{mean_label, predict_rate, train_capacity_net, CapacityNet, CapacityNetSpec, CapnetReport};
use crate::capnet_unsup::{train_unsupervised_surrogate, SurrogateReport};
use crate::channel::{rate, seeded_rng, split_seed, ScenarioConfig};
use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::phase_net::{train_unsupervised_csi, PhaseNet, TrainReport};
use crate::pilots::{build_codebook, pilot_input_scale, PilotShape, PilotTensor};

use super::dataset::Dataset;
use super::manifest::{Pipeline, RunManifest};

/// Phase-net training set: one candidate phase vector per realization, with
/// the realizations kept for CSI-based training.
pub fn train_dataset(m: &RunManifest) -> Result<Dataset> {
    Dataset::generate(&m.scenario, m.data.train_realizations, 1, m.seeds.train_data, true)
}

/// Held-out evaluation set under `scenario`, realizations included.
pub fn heldout_dataset(m: &RunManifest, scenario: &ScenarioConfig) -> Result<Dataset> {
    Dataset::generate(scenario, m.data.heldout_realizations, 1, m.seeds.heldout_data, true)
}

pub fn capnet_train_dataset(m: &RunManifest) -> Result<Dataset> {
    Dataset::generate(
        &m.scenario,
        m.data.capnet_channels,
        m.data.capnet_phases_per_channel,
        m.seeds.capnet_data,
        false,
    )
}

pub fn capnet_heldout_dataset(m: &RunManifest) -> Result<Dataset> {
    Dataset::generate(
        &m.scenario,
        m.data.capnet_heldout_channels,
        m.data.capnet_phases_per_channel,
        m.seeds.capnet_heldout_data,
        false,
    )
}

/// Phase network trained against the true rate of the stored channels.
pub fn run_unsup_csi(m: &RunManifest, train: &Dataset) -> Result<(PhaseNet, TrainReport)> {
    train.check_scenario(&m.scenario)?;
    let pairs = train.pairs()?;
    let scale = pilot_input_scale(pairs.iter().map(|(y, _)| y));
    let mut pn = PhaseNet::new(
        PilotShape::of(&m.scenario),
        m.scenario.n_elements(),
        &m.phase_net.hidden,
        scale,
        &mut seeded_rng(m.seeds.phase_net_init),
    )?;
    let report = train_unsupervised_csi(&mut pn, &pairs, &m.scenario, &m.phase_net.csi_train)?;
    Ok((pn, report))
}

/// Capacity-Net fitted to the surrogate training set; `heldout` is only measured.
pub fn run_capnet(m: &RunManifest, train: &Dataset, heldout: &Dataset) -> Result<(CapacityNet, CapnetReport)> {
    train.check_scenario(&m.scenario)?;
    heldout.check_scenario(&m.scenario)?;
    let spec = CapacityNetSpec {
        shape: PilotShape::of(&m.scenario),
        n_elements: m.scenario.n_elements(),
        hidden: &m.capacity_net.hidden,
        encoding: m.capacity_net.encoding,
        input_scale: pilot_input_scale(train.samples.iter().map(|s| &s.y)),
        label_shift: mean_label(&train.samples),
    };
    let mut cn = CapacityNet::new(spec, &mut seeded_rng(m.seeds.capnet_init))?;
    let report = train_capacity_net(&mut cn, &train.samples, &heldout.samples, &m.capacity_net.train)?;
    Ok((cn, report))
}

/// Phase network trained through `frozen` on pilots alone.
pub fn run_capnet_unsup(m: &RunManifest, frozen: &CapacityNet, pilots: &[PilotTensor]) -> Result<(PhaseNet, SurrogateReport)> {
    let mut pn = PhaseNet::new(
        frozen.shape,
        frozen.n_elements,
        &m.phase_net.hidden,
        pilot_input_scale(pilots),
        &mut seeded_rng(m.seeds.capnet_unsup_init),
    )?;
    let report = train_unsupervised_surrogate(&mut pn, frozen, pilots, &m.phase_net.surrogate_train)?;
    Ok((pn, report))
}

/// Trained networks available to [`evaluate`].
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub phase_csi: Option<PhaseNet>,
    pub phase_capnet: Option<PhaseNet>,
    pub capnet: Option<CapacityNet>,
}

/// Trains every network the given methods need.
pub fn train_models(m: &RunManifest, methods: &[Pipeline]) -> Result<Models> {
    let mut models = Models::default();
    let need_csi = methods.contains(&Pipeline::UnsupCsi);
    let need_unsup = methods.contains(&Pipeline::CapnetUnsup);
    let need_capnet = need_unsup || methods.contains(&Pipeline::Capnet);
    let train = if need_csi || need_unsup { Some(train_dataset(m)?) } else { None };
    if need_csi {
        models.phase_csi = Some(run_unsup_csi(m, train.as_ref().expect("built above"))?.0);
    }
    if need_capnet {
        let (cn, _) = run_capnet(m, &capnet_train_dataset(m)?, &capnet_heldout_dataset(m)?)?;
        if need_unsup {
            let pilots = train.as_ref().expect("built above").pilots();
            models.phase_capnet = Some(run_capnet_unsup(m, &cn, &pilots)?.0);
        }
        models.capnet = Some(cn);
    }
    Ok(models)
}

/// Mean and standard error of one method on a held-out set. For `capnet`
/// the statistic is the surrogate's squared error against the stored
/// labels; every other method reports its true achievable rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Pipeline,
    pub mean: f64,
    pub std_err: f64,
    pub n_eval: usize,
    /// Per-realization values in dataset order.
    pub values: Vec<f64>,
}

impl MethodSummary {
    pub fn from_values(method: Pipeline, values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            method,
            mean,
            std_err,
            n_eval: n,
            values,
        }
    }
}

fn require<T>(model: &Option<T>, method: Pipeline) -> Result<&T> {
    model
        .as_ref()
        .ok_or_else(|| Error::Config(format!("method {method} needs a trained model")))
}

/// Scores each method on `heldout` under `scenario`.
pub fn evaluate(
    m: &RunManifest,
    scenario: &ScenarioConfig,
    models: &Models,
    methods: &[Pipeline],
    heldout: &Dataset,
) -> Result<Vec<MethodSummary>> {
    heldout.check_scenario(scenario)?;
    if heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let res = heldout.require_realizations()?;
    let cb = build_codebook(scenario.n_h, scenario.n_v);
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let values: Vec<Result<f64>> = match method {
            Pipeline::UnsupCsi | Pipeline::CapnetUnsup => {
                let pn = if method == Pipeline::UnsupCsi {
                    require(&models.phase_csi, method)?
                } else {
                    require(&models.phase_capnet, method)?
                };
                if pn.shape != heldout.shape || pn.n_elements() != heldout.n_elements {
                    return Err(Error::Dimension(format!("{method} model does not match the held-out dims")));
                }
                par_map(heldout.len(), |i| {
                    let ph = pn.infer(&heldout.samples[i].y, m.phase_net.output, Some(&cb))?;
                    rate(&res[i], &ph, scenario)
                })
            }
            Pipeline::Capnet => {
                let cn = require(&models.capnet, method)?;
                par_map(heldout.len(), |i| {
                    let s = &heldout.samples[i];
                    Ok((predict_rate(cn, &s.y, &s.theta)? - s.rate).powi(2))
                })
            }
            Pipeline::Dsm => par_map(heldout.len(), |i| {
                Ok(dsm_optimize(&res[i], scenario, m.dsm.grid_points, m.dsm.max_sweeps, m.dsm.tol)?.rate)
            }),
            Pipeline::Random => par_map(heldout.len(), |i| {
                let mut rng = seeded_rng(split_seed(m.seeds.random_baseline, i as u64));
                rate(&res[i], &random_codebook(&cb, &mut rng), scenario)
            }),
            Pipeline::Exhaustive => par_map(heldout.len(), |i| Ok(exhaustive_codebook(&res[i], &cb, scenario)?.1)),
        };
        let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
        out.push(MethodSummary::from_values(method, values));
    }
    Ok(out)
}
