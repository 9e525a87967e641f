//! Binary dataset files ("RISD").
//!
//! Layout, little-endian: magic `RISD`, u16 version, u32 fields n_r, m, l,
//! N, flat pilot length, n_t, a u8 flag telling whether realizations are
//! stored, u64 record count. Each record holds the flat pilots (f64), N phase
//! angles (f64), the rate label (f64) and, when flagged, H_t (N × n_t) then
//! H_rᴴ (n_r × N) as row-major (re, im) f64 pairs. A CRC-32 of everything
//! before it closes the file.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::capacity_net::{gen_labeled_channels, CapnetSample};
use crate::channel::{ChannelRealization, RisPhases, ScenarioConfig};
use crate::error::{Error, Result};
use crate::nn::ByteReader;
use crate::numerics::ComplexMatrix;
use crate::pilots::{PilotShape, PilotTensor};

pub const DATASET_MAGIC: &[u8; 4] = b"RISD";
pub const DATASET_VERSION: u16 = 1;

/// Labeled pilot records, optionally with the realizations behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shape: PilotShape,
    pub n_elements: usize,
    pub n_t: usize,
    pub samples: Vec<CapnetSample>,
    /// One per sample when present.
    pub realizations: Option<Vec<ChannelRealization>>,
}

impl Dataset {
    /// `n_channels` channels with `phases_per_channel` labeled candidate
    /// phase vectors each, from seed base `base`. With `keep_realizations`
    /// the channel is stored next to every sample.
    pub fn generate(
        config: &ScenarioConfig,
        n_channels: usize,
        phases_per_channel: usize,
        base: u64,
        keep_realizations: bool,
    ) -> Result<Self> {
        let groups = gen_labeled_channels(config, n_channels, phases_per_channel, base)?;
        let mut samples = Vec::with_capacity(n_channels * phases_per_channel);
        let mut realizations = Vec::new();
        for (group, re) in groups {
            if keep_realizations {
                realizations.extend(std::iter::repeat_n(re, group.len()));
            }
            samples.extend(group);
        }
        Ok(Self {
            shape: PilotShape::of(config),
            n_elements: config.n_elements(),
            n_t: config.n_t,
            samples,
            realizations: keep_realizations.then_some(realizations),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn flat_len(&self) -> usize {
        self.shape.flat_len()
    }

    pub fn pilots(&self) -> Vec<PilotTensor> {
        self.samples.iter().map(|s| s.y.clone()).collect()
    }

    /// (pilots, realization) pairs; fails when realizations were not stored.
    pub fn pairs(&self) -> Result<Vec<(PilotTensor, ChannelRealization)>> {
        Ok(self
            .samples
            .iter()
            .zip(self.require_realizations()?)
            .map(|(s, re)| (s.y.clone(), re.clone()))
            .collect())
    }

    pub fn require_realizations(&self) -> Result<&[ChannelRealization]> {
        self.realizations
            .as_deref()
            .ok_or_else(|| Error::Config("dataset carries no channel realizations".into()))
    }

    /// Checks the dimensions against a scenario.
    pub fn check_scenario(&self, config: &ScenarioConfig) -> Result<()> {
        if self.shape != PilotShape::of(config) || self.n_elements != config.n_elements() || self.n_t != config.n_t {
            return Err(Error::Dimension(format!(
                "dataset dims {:?}, N={}, n_t={} do not match the scenario",
                self.shape, self.n_elements, self.n_t
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let flat_len = self.flat_len();
        let mut buf = Vec::with_capacity(64 + self.len() * 8 * (flat_len + self.n_elements + 1));
        buf.extend_from_slice(DATASET_MAGIC);
        buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        for v in [self.shape.n_r, self.shape.m, self.shape.l, self.n_elements, flat_len, self.n_t] {
            let v = u32::try_from(v).map_err(|_| Error::format("dataset", "dimension exceeds u32"))?;
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(u8::from(self.realizations.is_some()));
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        if let Some(res) = &self.realizations {
            if res.len() != self.len() {
                return Err(Error::format("dataset", "realization count differs from sample count"));
            }
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.y.flat.len() != flat_len || s.theta.len() != self.n_elements {
                return Err(Error::format("dataset", format!("record {i} has the wrong dimensions")));
            }
            for x in s.y.flat.iter().chain(&s.theta.theta).chain(std::iter::once(&s.rate)) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            if let Some(res) = &self.realizations {
                let re = &res[i];
                if re.h_t.shape() != (self.n_elements, self.n_t) || re.h_r_adj.shape() != (self.shape.n_r, self.n_elements) {
                    return Err(Error::format("dataset", format!("realization {i} has the wrong dimensions")));
                }
                for z in re.h_t.as_slice().iter().chain(re.h_r_adj.as_slice()) {
                    buf.extend_from_slice(&z.re.to_le_bytes());
                    buf.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 2 + 4 {
            return Err(Error::format("dataset", "file truncated"));
        }
        if &bytes[..4] != DATASET_MAGIC {
            return Err(Error::format("dataset", "bad magic, not a dataset file"));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        let mut r = ByteReader::new(body, "dataset");
        r.take(4)?;
        let version = r.u16()?;
        if version != DATASET_VERSION {
            return Err(Error::format("dataset", format!("unsupported version {version}")));
        }
        if crc32fast::hash(body) != stored {
            return Err(Error::format("dataset", "checksum mismatch (corrupted or truncated)"));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let [n_r, m, l, n_elements, flat_len, n_t] = dims;
        let shape = PilotShape { n_r, m, l };
        if shape.flat_len() != flat_len {
            return Err(Error::format("dataset", "flat length disagrees with n_r, m, l"));
        }
        let has_realizations = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::format("dataset", format!("bad realization flag {other}"))),
        };
        let count = usize::try_from(r.u64()?).map_err(|_| Error::format("dataset", "record count overflow"))?;
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        let mut realizations = Vec::new();
        for _ in 0..count {
            let flat = r.f64_vec(flat_len)?;
            let theta = r.f64_vec(n_elements)?;
            let rate = r.f64()?;
            samples.push(CapnetSample {
                y: PilotTensor::from_flat(flat, n_r, m, l)?,
                theta: RisPhases::new(theta),
                rate,
                provenance: None,
            });
            if has_realizations {
                let h_t = read_complex(&mut r, n_elements, n_t)?;
                let h_r_adj = read_complex(&mut r, n_r, n_elements)?;
                realizations.push(ChannelRealization::from_matrices(h_t, h_r_adj)?);
            }
        }
        if !r.is_done() {
            return Err(Error::format("dataset", "trailing bytes after last record"));
        }
        Ok(Self {
            shape,
            n_elements,
            n_t,
            samples,
            realizations: has_realizations.then_some(realizations),
        })
    }
}

fn read_complex(r: &mut ByteReader<'_>, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    let raw = r.f64_vec(2 * rows * cols)?;
    let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ComplexMatrix::from_vec(rows, cols, data)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = dataset.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_bytes(&bytes)
}
