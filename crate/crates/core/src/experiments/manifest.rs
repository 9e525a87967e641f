use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::DsmSettings;
use crate::capacity_net::PhaseEncoding;
use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::{TrainConfig, MODEL_VERSION};
use crate::phase_net::PhaseOutput;

use super::dataset::DATASET_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    UnsupCsi,
    Capnet,
    CapnetUnsup,
    Dsm,
    Random,
    Exhaustive,
}

impl Pipeline {
    pub const ALL: [Pipeline; 6] = [
        Pipeline::UnsupCsi,
        Pipeline::Capnet,
        Pipeline::CapnetUnsup,
        Pipeline::Dsm,
        Pipeline::Random,
        Pipeline::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::UnsupCsi => "unsup-csi",
            Pipeline::Capnet => "capnet",
            Pipeline::CapnetUnsup => "capnet-unsup",
            Pipeline::Dsm => "dsm",
            Pipeline::Random => "random",
            Pipeline::Exhaustive => "exhaustive",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Pipeline::Dsm | Pipeline::Random | Pipeline::Exhaustive)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline or method {s:?}")))
    }
}

/// Dataset sizes. Channel counts are realizations; the surrogate's sets label
/// each channel under several candidate phase vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSizes {
    pub train_realizations: usize,
    pub heldout_realizations: usize,
    pub capnet_channels: usize,
    pub capnet_phases_per_channel: usize,
    pub capnet_heldout_channels: usize,
}

/// Seed bases of the independent random streams of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub train_data: u64,
    pub heldout_data: u64,
    pub capnet_data: u64,
    pub capnet_heldout_data: u64,
    pub random_baseline: u64,
    pub phase_net_init: u64,
    pub capnet_init: u64,
    pub capnet_unsup_init: u64,
}

impl Seeds {
    /// Derives every stream from one master seed. Each base is a splitmix64
    /// output truncated to 63 bits, so blocks of consecutive realization
    /// seeds from different streams do not overlap in practice.
    pub fn derive(master: u64) -> Self {
        let s = |stream: u64| splitmix64(master ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)) >> 1;
        Self {
            train_data: s(1),
            heldout_data: s(2),
            capnet_data: s(3),
            capnet_heldout_data: s(4),
            random_baseline: s(5),
            phase_net_init: s(6),
            capnet_init: s(7),
            capnet_unsup_init: s(8),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNetConfig {
    pub hidden: Vec<usize>,
    pub output: PhaseOutput,
    /// Training against the true rate with known channels.
    pub csi_train: TrainConfig,
    /// Training through the frozen surrogate.
    pub surrogate_train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityNetConfig {
    pub hidden: Vec<usize>,
    pub encoding: PhaseEncoding,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Versions {
    pub crate_version: String,
    pub model_format: u16,
    pub dataset_format: u16,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            model_format: MODEL_VERSION,
            dataset_format: DATASET_VERSION,
        }
    }
}

/// Everything that determines a run. Written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub pipeline: Pipeline,
    pub scenario: ScenarioConfig,
    pub data: DataSizes,
    pub seeds: Seeds,
    pub phase_net: PhaseNetConfig,
    pub capacity_net: CapacityNetConfig,
    pub dsm: DsmSettings,
    pub outputs: Outputs,
    pub versions: Versions,
}

fn train(batch_size: usize, learning_rate: f64, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size,
        learning_rate,
        epochs,
        seed,
    }
}

impl RunManifest {
    /// Desk-scale preset on the small scenario.
    pub fn small(pipeline: Pipeline) -> Self {
        let scenario = ScenarioConfig::small();
        let seeds = Seeds::derive(scenario.seed);
        Self {
            pipeline,
            data: DataSizes {
                train_realizations: 20000,
                heldout_realizations: 500,
                capnet_channels: 40000,
                capnet_phases_per_channel: 4,
                capnet_heldout_channels: 500,
            },
            phase_net: PhaseNetConfig {
                hidden: vec![256],
                output: PhaseOutput::Continuous,
                csi_train: train(64, 1e-3, 30, seeds.phase_net_init ^ 1),
                surrogate_train: train(64, 1e-3, 30, seeds.capnet_unsup_init ^ 1),
            },
            capacity_net: CapacityNetConfig {
                hidden: vec![256, 256],
                encoding: PhaseEncoding::CosSin,
                train: train(64, 1e-3, 20, seeds.capnet_init ^ 1),
            },
            dsm: DsmSettings::default(),
            outputs: Outputs { dir: "out".into() },
            versions: Versions::current(),
            scenario,
            seeds,
        }
    }

    /// Full-size dimensions with the hidden width and learning rate of the
    /// original setup. Sample counts are left at desk scale; raise them in the
    /// config file for long runs.
    pub fn paper_shape(pipeline: Pipeline) -> Self {
        let mut m = Self::small(pipeline);
        m.scenario = ScenarioConfig {
            seed: m.scenario.seed,
            ..ScenarioConfig::paper_shape()
        };
        m.phase_net.hidden = vec![4096];
        m.capacity_net.hidden = vec![4096];
        m.capacity_net.encoding = PhaseEncoding::RawAngles;
        for tc in [
            &mut m.phase_net.csi_train,
            &mut m.phase_net.surrogate_train,
            &mut m.capacity_net.train,
        ] {
            tc.learning_rate = 1e-5;
        }
        m
    }

    pub fn preset(name: &str, pipeline: Pipeline) -> Result<Self> {
        match name {
            "small" => Ok(Self::small(pipeline)),
            "paper-shape" => Ok(Self::paper_shape(pipeline)),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    /// Replaces the master seed and re-derives every stream from it.
    pub fn reseed(&mut self, master: u64) {
        self.scenario.seed = master;
        self.seeds = Seeds::derive(master);
        self.phase_net.csi_train.seed = self.seeds.phase_net_init ^ 1;
        self.phase_net.surrogate_train.seed = self.seeds.capnet_unsup_init ^ 1;
        self.capacity_net.train.seed = self.seeds.capnet_init ^ 1;
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for tc in [&self.phase_net.csi_train, &self.phase_net.surrogate_train, &self.capacity_net.train] {
            tc.validate()?;
        }
        let d = &self.data;
        for (name, v) in [
            ("train_realizations", d.train_realizations),
            ("heldout_realizations", d.heldout_realizations),
            ("capnet_channels", d.capnet_channels),
            ("capnet_phases_per_channel", d.capnet_phases_per_channel),
            ("capnet_heldout_channels", d.capnet_heldout_channels),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.dsm.grid_points < 3 {
            return Err(Error::Config("dsm.grid_points must be at least 3".into()));
        }
        if self.scenario.m < self.scenario.n_t {
            return Err(Error::Config(format!(
                "pilot length m = {} is shorter than n_t = {}",
                self.scenario.m, self.scenario.n_t
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("bad manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the serialized manifest.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
