//! Beam-steering codebook, pilot codewords, and the received pilot tensor.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{effective_channel, steering_vector, ChannelRealization, RisPhases, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numerics::{kron, matmul, ComplexMatrix};

/// Kronecker-structured steering beams with angles quantized on a
/// `2(i-1)/n_h`, `2(j-1)/n_v` grid, ordered horizontal-index major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub entries: Vec<Vec<Complex64>>,
    pub n_h: usize,
    pub n_v: usize,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phases(&self, index: usize) -> RisPhases {
        RisPhases::from_response(&self.entries[index])
    }
}

pub fn build_codebook(n_h: usize, n_v: usize) -> Codebook {
    let mut entries = Vec::with_capacity(n_h * n_v);
    for i in 0..n_h {
        let h = steering_vector(n_h, 2.0 * i as f64 / n_h as f64);
        for j in 0..n_v {
            let v = steering_vector(n_v, 2.0 * j as f64 / n_v as f64);
            entries.push(kron(&h, &v).as_slice().to_vec());
        }
    }
    Codebook { entries, n_h, n_v }
}

/// Known n_t × m pilot block, identical in every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotCodeword {
    pub s: ComplexMatrix,
}

/// First n_t rows of the unitary m-point DFT, scaled to ‖s‖²_F = m·P_T.
pub fn make_pilot(config: &ScenarioConfig) -> Result<PilotCodeword> {
    let (n_t, m) = (config.n_t, config.m);
    if m < n_t {
        return Err(Error::Config(format!(
            "pilot length m = {m} cannot excite {n_t} transmit antennas"
        )));
    }
    let amp = (m as f64 * config.transmit_power() / n_t as f64).sqrt() / (m as f64).sqrt();
    let s = ComplexMatrix::from_fn(n_t, m, |r, c| {
        let phase = -TAU * ((r * c) % m) as f64 / m as f64;
        Complex64::from_polar(amp, phase)
    });
    Ok(PilotCodeword { s })
}

/// Slot ℓ (0-based) reflects with codebook entry ℓ mod |cb|.
pub fn ris_schedule(cb: &Codebook, l: usize) -> Vec<RisPhases> {
    (0..l).map(|slot| cb.phases(slot % cb.len())).collect()
}

/// Dimensions of a pilot tensor: n_r × m blocks, l of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PilotShape {
    pub n_r: usize,
    pub m: usize,
    pub l: usize,
}

impl PilotShape {
    pub fn of(config: &ScenarioConfig) -> Self {
        Self {
            n_r: config.n_r,
            m: config.m,
            l: config.l,
        }
    }

    /// 2 · n_r · m · l.
    pub fn flat_len(&self) -> usize {
        2 * self.n_r * self.m * self.l
    }
}

/// Reciprocal RMS of the flattened pilots, used to bring network inputs to
/// unit scale. Returns 1 for an empty or all-zero set.
pub fn pilot_input_scale<'a>(tensors: impl IntoIterator<Item = &'a PilotTensor>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for t in tensors {
        sum += t.flat.iter().map(|x| x * x).sum::<f64>();
        count += t.flat.len();
    }
    if count == 0 || sum == 0.0 {
        return 1.0;
    }
    (count as f64 / sum).sqrt()
}

/// Received pilot blocks Y = [r(1) … r(L)] with their network-facing flattening.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotTensor {
    pub blocks: Vec<ComplexMatrix>,
    pub flat: Vec<f64>,
}

impl PilotTensor {
    /// Flattens block-major: all real parts of a block (row-major), then its
    /// imaginary parts, then the next block.
    pub fn from_blocks(blocks: Vec<ComplexMatrix>) -> Self {
        let mut flat = Vec::with_capacity(blocks.iter().map(|b| 2 * b.as_slice().len()).sum());
        for b in &blocks {
            flat.extend(b.as_slice().iter().map(|z| z.re));
            flat.extend(b.as_slice().iter().map(|z| z.im));
        }
        Self { blocks, flat }
    }

    pub fn from_flat(flat: Vec<f64>, n_r: usize, m: usize, l: usize) -> Result<Self> {
        let per_block = n_r * m;
        if flat.len() != 2 * per_block * l {
            return Err(Error::Dimension(format!(
                "flat pilot length {} does not match 2*{n_r}*{m}*{l}",
                flat.len()
            )));
        }
        let blocks = flat
            .chunks_exact(2 * per_block)
            .map(|chunk| {
                let (re, im) = chunk.split_at(per_block);
                let data = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                ComplexMatrix::from_vec(n_r, m, data).expect("chunk length")
            })
            .collect();
        Ok(Self { blocks, flat })
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

/// r(ℓ) = H_rᴴ diag(v(ℓ)) H_t s + w(ℓ) with w(ℓ) i.i.d. CN(0, σ²), fresh per slot.
pub fn receive_pilots<R: Rng + ?Sized>(
    re: &ChannelRealization,
    schedule: &[RisPhases],
    pilot: &PilotCodeword,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<PilotTensor> {
    let noise_std = (config.noise_variance() / 2.0).sqrt();
    let mut blocks = Vec::with_capacity(schedule.len());
    for phases in schedule {
        let mut r = matmul(&effective_channel(re, phases)?, &pilot.s)?;
        for z in r.as_mut_slice() {
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(noise_std * nr, noise_std * ni);
        }
        blocks.push(r);
    }
    Ok(PilotTensor::from_blocks(blocks))
}

/// Codebook-swept pilots for one realization under `config`.
pub fn observe<R: Rng + ?Sized>(re: &ChannelRealization, config: &ScenarioConfig, rng: &mut R) -> Result<PilotTensor> {
    let cb = build_codebook(config.n_h, config.n_v);
    let schedule = ris_schedule(&cb, config.l);
    let pilot = make_pilot(config)?;
    receive_pilots(re, &schedule, &pilot, config, rng)
}
