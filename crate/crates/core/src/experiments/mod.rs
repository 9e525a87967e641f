//! Reproducible runs: manifests, dataset files, the training pipelines,
//! held-out evaluation and parameter sweeps with CSV output.
//!
//! The functions at this level back the command-line verbs. Each reads and
//! writes fixed file names inside an output directory and echoes the effective
//! manifest there as `manifest.toml`.

pub mod dataset;
pub mod manifest;
pub mod pipeline;
pub mod sweep;

use std::path::{Path, PathBuf};

use crate::capacity_net::CapacityNet;
use crate::error::{Error, Result};
use crate::nn::{load_model, save_model};
use crate::phase_net::PhaseNet;

pub use dataset::{load_dataset, save_dataset, Dataset, DATASET_MAGIC, DATASET_VERSION};
pub use manifest::{Pipeline, RunManifest, Seeds};
pub use pipeline::{evaluate, train_models, MethodSummary, Models};
pub use sweep::{run_sweep, summaries_csv, AxisValue, SweepAxis, SweepOutcome, SweepSpec, CSV_HEADER};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRAIN_DATA_FILE: &str = "train.risd";
pub const HELDOUT_DATA_FILE: &str = "heldout.risd";
pub const CAPNET_TRAIN_FILE: &str = "capnet_train.risd";
pub const CAPNET_HELDOUT_FILE: &str = "capnet_heldout.risd";
pub const PHASE_NET_CSI_FILE: &str = "phase_net_csi.capn";
pub const CAPACITY_NET_FILE: &str = "capacity_net.capn";
pub const PHASE_NET_CAPNET_FILE: &str = "phase_net_capnet.capn";

/// An output directory bound to one manifest.
#[derive(Debug, Clone)]
pub struct Run {
    pub manifest: RunManifest,
    pub dir: PathBuf,
}

impl Run {
    /// Validates the manifest, creates `dir` and writes the manifest into it.
    pub fn create(manifest: RunManifest, dir: impl Into<PathBuf>) -> Result<Self> {
        manifest.validate()?;
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        manifest.save(dir.join(MANIFEST_FILE))?;
        Ok(Self { manifest, dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn dataset(&self, name: &str, make: impl FnOnce(&RunManifest) -> Result<Dataset>) -> Result<Dataset> {
        let path = self.path(name);
        if path.exists() {
            let ds = load_dataset(&path)?;
            ds.check_scenario(&self.manifest.scenario)?;
            return Ok(ds);
        }
        let ds = make(&self.manifest)?;
        save_dataset(&ds, &path)?;
        Ok(ds)
    }

    pub fn train_data(&self) -> Result<Dataset> {
        self.dataset(TRAIN_DATA_FILE, pipeline::train_dataset)
    }

    pub fn heldout_data(&self) -> Result<Dataset> {
        self.dataset(HELDOUT_DATA_FILE, |m| pipeline::heldout_dataset(m, &m.scenario))
    }

    pub fn capnet_train_data(&self) -> Result<Dataset> {
        self.dataset(CAPNET_TRAIN_FILE, pipeline::capnet_train_dataset)
    }

    pub fn capnet_heldout_data(&self) -> Result<Dataset> {
        self.dataset(CAPNET_HELDOUT_FILE, pipeline::capnet_heldout_dataset)
    }

    /// Writes every dataset the manifest's pipeline consumes and returns the paths.
    pub fn gen_data(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let p = self.manifest.pipeline;
        if matches!(p, Pipeline::UnsupCsi | Pipeline::CapnetUnsup) {
            self.train_data()?;
            written.push(self.path(TRAIN_DATA_FILE));
        }
        if matches!(p, Pipeline::Capnet | Pipeline::CapnetUnsup) {
            self.capnet_train_data()?;
            self.capnet_heldout_data()?;
            written.push(self.path(CAPNET_TRAIN_FILE));
            written.push(self.path(CAPNET_HELDOUT_FILE));
        }
        self.heldout_data()?;
        written.push(self.path(HELDOUT_DATA_FILE));
        Ok(written)
    }

    pub fn train_phase_net(&self) -> Result<(PhaseNet, crate::phase_net::TrainReport)> {
        let (pn, report) = pipeline::run_unsup_csi(&self.manifest, &self.train_data()?)?;
        save_model(&pn.to_model(), self.path(PHASE_NET_CSI_FILE))?;
        Ok((pn, report))
    }

    pub fn train_capnet(&self) -> Result<(CapacityNet, crate::capacity_net::CapnetReport)> {
        let (cn, report) = pipeline::run_capnet(&self.manifest, &self.capnet_train_data()?, &self.capnet_heldout_data()?)?;
        save_model(&cn.to_model(), self.path(CAPACITY_NET_FILE))?;
        Ok((cn, report))
    }

    /// Uses the saved Capacity-Net when present, training it first otherwise.
    /// Only the pilots of the training set reach the optimizer.
    pub fn train_capnet_unsup(&self) -> Result<(PhaseNet, crate::capnet_unsup::SurrogateReport)> {
        let frozen = match self.load_capnet()? {
            Some(cn) => cn,
            None => self.train_capnet()?.0,
        };
        let pilots = self.train_data()?.pilots();
        let (pn, report) = pipeline::run_capnet_unsup(&self.manifest, &frozen, &pilots)?;
        save_model(&pn.to_model(), self.path(PHASE_NET_CAPNET_FILE))?;
        Ok((pn, report))
    }

    fn load_capnet(&self) -> Result<Option<CapacityNet>> {
        load_if_exists(&self.path(CAPACITY_NET_FILE), CapacityNet::from_model)
    }

    /// Models already saved in the directory.
    pub fn saved_models(&self) -> Result<Models> {
        Ok(Models {
            phase_csi: load_if_exists(&self.path(PHASE_NET_CSI_FILE), PhaseNet::from_model)?,
            phase_capnet: load_if_exists(&self.path(PHASE_NET_CAPNET_FILE), PhaseNet::from_model)?,
            capnet: self.load_capnet()?,
        })
    }

    /// Evaluates `methods` on the held-out set and writes `<name>.csv`.
    pub fn evaluate_to_csv(&self, models: &Models, methods: &[Pipeline], name: &str) -> Result<Vec<MethodSummary>> {
        let heldout = self.heldout_data()?;
        let summaries = evaluate(&self.manifest, &self.manifest.scenario, models, methods, &heldout)?;
        let csv = summaries_csv("heldout", &summaries, &self.manifest.hash()?);
        let path = self.path(&format!("{name}.csv"));
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        Ok(summaries)
    }

    /// The manifest's baseline pipeline on the held-out set, to `baseline.csv`.
    pub fn baseline(&self) -> Result<MethodSummary> {
        let p = self.manifest.pipeline;
        if !p.is_baseline() {
            return Err(Error::Config(format!("pipeline {p} is not a baseline")));
        }
        Ok(self.evaluate_to_csv(&Models::default(), &[p], "baseline")?.remove(0))
    }

    /// Every method whose model is saved, plus all baselines, to `evaluate.csv`.
    pub fn evaluate_all(&self) -> Result<Vec<MethodSummary>> {
        let models = self.saved_models()?;
        let mut methods = Vec::new();
        if models.phase_csi.is_some() {
            methods.push(Pipeline::UnsupCsi);
        }
        if models.phase_capnet.is_some() {
            methods.push(Pipeline::CapnetUnsup);
        }
        if models.capnet.is_some() {
            methods.push(Pipeline::Capnet);
        }
        methods.extend([Pipeline::Dsm, Pipeline::Random, Pipeline::Exhaustive]);
        self.evaluate_to_csv(&models, &methods, "evaluate")
    }

    /// Runs the sweep and writes `sweep_<axis>.csv`.
    pub fn sweep(&self, spec: &SweepSpec, axis_name: &str) -> Result<SweepOutcome> {
        let outcome = run_sweep(&self.manifest, spec)?;
        let path = self.path(&format!("sweep_{axis_name}.csv"));
        std::fs::write(&path, outcome.to_csv()).map_err(|e| Error::io(&path, e))?;
        Ok(outcome)
    }
}

fn load_if_exists<T>(path: &Path, parse: impl FnOnce(crate::nn::ModelFile) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        parse(load_model(path)?).map(Some)
    } else {
        Ok(None)
    }
}
