//! Rician mmWave channels through a reflecting surface, the achievable rate
//! of the cascaded link, and its gradient with respect to the surface phases.

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adjoint, hermitian_pd_inverse, kron, log2_det_identity_plus_gram, matmul, ComplexMatrix};

/// Converts a dB (or dBm) quantity into linear scale (milliwatts for dBm).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Physical scenario. All dB/dBm fields are converted to linear milliwatt
/// scale by the accessor methods; downstream math never sees decibels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub n_h: usize,
    pub n_v: usize,
    pub lambda_t: usize,
    pub lambda_r: usize,
    /// Rician factor of the transmitter-surface link, linear.
    pub k_t: f64,
    /// Rician factor of the surface-receiver link, linear.
    pub k_r: f64,
    pub pathloss_t_db: f64,
    pub pathloss_r_db: f64,
    pub noise_dbm: f64,
    pub p_t_dbm: f64,
    /// Pilot block length M.
    pub m: usize,
    /// Number of pilot slots L.
    pub l: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Desk-scale preset: 2x2 surface, 2x2 MIMO, M = L = 8.
    pub fn small() -> Self {
        Self {
            n_t: 2,
            n_r: 2,
            n_h: 2,
            n_v: 2,
            lambda_t: 3,
            lambda_r: 3,
            k_t: 10.0,
            k_r: 10.0,
            pathloss_t_db: -72.0,
            pathloss_r_db: -66.0,
            noise_dbm: -120.0,
            p_t_dbm: 30.0,
            m: 8,
            l: 8,
            seed: 2024,
        }
    }

    /// Full-size dimensions: 4x4 surface, 2 transmit and 6 receive antennas,
    /// M = L = 16, transmit SNR P_T/σ² = 180 dB.
    pub fn paper_shape() -> Self {
        Self {
            n_t: 2,
            n_r: 6,
            n_h: 4,
            n_v: 4,
            m: 16,
            l: 16,
            p_t_dbm: 60.0,
            ..Self::small()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_t", self.n_t),
            ("n_r", self.n_r),
            ("n_h", self.n_h),
            ("n_v", self.n_v),
            ("m", self.m),
            ("l", self.l),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.k_t.is_nan() || self.k_t < 0.0 || self.k_r.is_nan() || self.k_r < 0.0 {
            return Err(Error::Config("Rician factors must be non-negative".into()));
        }
        for (name, v) in [
            ("pathloss_t_db", self.pathloss_t_db),
            ("pathloss_r_db", self.pathloss_r_db),
            ("noise_dbm", self.noise_dbm),
            ("p_t_dbm", self.p_t_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Number of surface elements N = n_h · n_v.
    pub fn n_elements(&self) -> usize {
        self.n_h * self.n_v
    }

    /// σ² in milliwatts.
    pub fn noise_variance(&self) -> f64 {
        db_to_linear(self.noise_dbm)
    }

    /// P_T in milliwatts.
    pub fn transmit_power(&self) -> f64 {
        db_to_linear(self.p_t_dbm)
    }

    pub fn pathloss_t(&self) -> f64 {
        db_to_linear(self.pathloss_t_db)
    }

    pub fn pathloss_r(&self) -> f64 {
        db_to_linear(self.pathloss_r_db)
    }

    /// P_T / σ² in dB.
    pub fn transmit_snr_db(&self) -> f64 {
        self.p_t_dbm - self.noise_dbm
    }

    /// ρ = P_T / (σ² N_t), the per-antenna SNR factor in the rate expression.
    pub fn rate_snr(&self) -> f64 {
        self.transmit_power() / (self.noise_variance() * self.n_t as f64)
    }

    /// Length of a flattened pilot tensor, 2 · n_r · m · l.
    pub fn flat_pilot_len(&self) -> usize {
        2 * self.n_r * self.m * self.l
    }
}

/// Seed of the `index`-th realization drawn from `base`.
pub fn split_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Deterministic generator for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One propagation path of the transmitter → surface link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRisPath {
    pub departure_tx: f64,
    pub arrival_azimuth: f64,
    pub arrival_elevation: f64,
    pub gain: Complex64,
}

/// One propagation path of the surface → receiver link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisRxPath {
    pub departure_azimuth: f64,
    pub departure_elevation: f64,
    pub arrival_rx: f64,
    pub gain: Complex64,
}

/// Every drawn angle and gain. Index 0 of each link is the LOS path, whose
/// gain is fixed at 1; indices 1.. are the scattered paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub tx_ris: Vec<TxRisPath>,
    pub ris_rx: Vec<RisRxPath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Transmitter → surface, N × n_t.
    pub h_t: ComplexMatrix,
    /// Surface → receiver (already adjoint), n_r × N.
    pub h_r_adj: ComplexMatrix,
    pub geometry: Geometry,
}

impl ChannelRealization {
    /// Builds the realization from explicit matrices with empty geometry.
    pub fn from_matrices(h_t: ComplexMatrix, h_r_adj: ComplexMatrix) -> Result<Self> {
        if h_t.rows() != h_r_adj.cols() {
            return Err(Error::Shape {
                op: "channel",
                left: h_r_adj.shape(),
                right: h_t.shape(),
            });
        }
        Ok(Self {
            h_t,
            h_r_adj,
            geometry: Geometry {
                tx_ris: Vec::new(),
                ris_rx: Vec::new(),
            },
        })
    }

    /// Rebuilds both channel matrices from stored geometry.
    pub fn from_geometry(config: &ScenarioConfig, geometry: Geometry) -> Self {
        let (los_w, nlos_w) = rician_weights(config.k_t, config.pathloss_t());
        let mut h_t = ComplexMatrix::zeros(config.n_elements(), config.n_t);
        for (p, path) in geometry.tx_ris.iter().enumerate() {
            let w = if p == 0 { los_w } else { nlos_w * path.gain };
            if w != Complex64::new(0.0, 0.0) {
                h_t = h_t.add(&tx_ris_component(config, path).scale(w)).expect("shape");
            }
        }
        let (los_w, nlos_w) = rician_weights(config.k_r, config.pathloss_r());
        let mut h_r_adj = ComplexMatrix::zeros(config.n_r, config.n_elements());
        for (p, path) in geometry.ris_rx.iter().enumerate() {
            let w = if p == 0 { los_w } else { nlos_w * path.gain };
            if w != Complex64::new(0.0, 0.0) {
                h_r_adj = h_r_adj.add(&ris_rx_component(config, path).scale(w)).expect("shape");
            }
        }
        Self { h_t, h_r_adj, geometry }
    }

    pub fn n_elements(&self) -> usize {
        self.h_t.rows()
    }
}

fn rician_weights(k: f64, pathloss: f64) -> (Complex64, f64) {
    if k.is_infinite() {
        return (Complex64::new(pathloss.sqrt(), 0.0), 0.0);
    }
    let los = (pathloss * k / (k + 1.0)).sqrt();
    let nlos = (pathloss / (k + 1.0)).sqrt();
    (Complex64::new(los, 0.0), nlos)
}

/// Surface phase angles θ, one per element, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    pub theta: Vec<f64>,
}

impl RisPhases {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(n: usize) -> Self {
        Self { theta: vec![0.0; n] }
    }

    /// Phases of a unit-modulus response vector.
    pub fn from_response(v: &[Complex64]) -> Self {
        Self {
            theta: v.iter().map(|z| wrap_angle(z.arg())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// v_i = e^{jθ_i}.
    pub fn response(&self) -> Vec<Complex64> {
        self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }

    /// Angles reduced to [0, 2π), for reporting.
    pub fn wrapped(&self) -> Vec<f64> {
        self.theta.iter().map(|&t| wrap_angle(t)).collect()
    }
}

/// Reduces an angle to [0, 2π). `rem_euclid` alone can round up to 2π for
/// tiny negative inputs.
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Half-wavelength steering row vector, entry k = e^{jπkψ}.
pub fn steering_vector(n: usize, psi: f64) -> ComplexMatrix {
    ComplexMatrix::row_vector((0..n).map(|k| Complex64::from_polar(1.0, PI * k as f64 * psi)).collect())
}

/// `[a_{N_h}ᴴ(cos φ sin θ) ⊗ a_{N_v}ᴴ(sin φ)] a_{N_t}(sin θ_D)`, unit-modulus entries.
pub fn tx_ris_component(config: &ScenarioConfig, path: &TxRisPath) -> ComplexMatrix {
    let horizontal = adjoint(&steering_vector(
        config.n_h,
        path.arrival_elevation.cos() * path.arrival_azimuth.sin(),
    ));
    let vertical = adjoint(&steering_vector(config.n_v, path.arrival_elevation.sin()));
    let ris = kron(&horizontal, &vertical);
    matmul(&ris, &steering_vector(config.n_t, path.departure_tx.sin())).expect("column times row")
}

/// `a_{N_r}ᴴ(sin θ_A) [a_{N_v}(sin φ) ⊗ a_{N_h}(cos φ sin θ)]`, unit-modulus entries.
pub fn ris_rx_component(config: &ScenarioConfig, path: &RisRxPath) -> ComplexMatrix {
    let rx = adjoint(&steering_vector(config.n_r, path.arrival_rx.sin()));
    let vertical = steering_vector(config.n_v, path.departure_elevation.sin());
    let horizontal = steering_vector(
        config.n_h,
        path.departure_elevation.cos() * path.departure_azimuth.sin(),
    );
    matmul(&rx, &kron(&vertical, &horizontal)).expect("column times row")
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..PI)
}

/// Draws a realization: LOS angles first, then for each scattered path its
/// angles followed by its gain; transmitter link before receiver link.
pub fn sample_channel<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> ChannelRealization {
    let mut tx_ris = Vec::with_capacity(config.lambda_t + 1);
    for p in 0..=config.lambda_t {
        let departure_tx = angle(rng);
        let arrival_azimuth = angle(rng);
        let arrival_elevation = angle(rng);
        let gain = if p == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            complex_gaussian(rng, 1.0 / config.lambda_t as f64)
        };
        tx_ris.push(TxRisPath {
            departure_tx,
            arrival_azimuth,
            arrival_elevation,
            gain,
        });
    }
    let mut ris_rx = Vec::with_capacity(config.lambda_r + 1);
    for p in 0..=config.lambda_r {
        let departure_azimuth = angle(rng);
        let departure_elevation = angle(rng);
        let arrival_rx = angle(rng);
        let gain = if p == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            complex_gaussian(rng, 1.0 / config.lambda_r as f64)
        };
        ris_rx.push(RisRxPath {
            departure_azimuth,
            departure_elevation,
            arrival_rx,
            gain,
        });
    }
    ChannelRealization::from_geometry(config, Geometry { tx_ris, ris_rx })
}

/// H_eff = H_rᴴ diag(e^{jθ}) H_t.
pub fn effective_channel(re: &ChannelRealization, ph: &RisPhases) -> Result<ComplexMatrix> {
    let n = re.n_elements();
    if re.h_r_adj.cols() != n || ph.len() != n {
        return Err(Error::Dimension(format!(
            "surface has {n} elements, receiver channel has {} columns and {} phases were given",
            re.h_r_adj.cols(),
            ph.len()
        )));
    }
    let v = ph.response();
    let (n_r, n_t) = (re.h_r_adj.rows(), re.h_t.cols());
    let mut out = ComplexMatrix::zeros(n_r, n_t);
    for (elem, &vn) in v.iter().enumerate() {
        let ht_row = re.h_t.row(elem);
        for i in 0..n_r {
            let coeff = re.h_r_adj[(i, elem)] * vn;
            for (k, &h) in ht_row.iter().enumerate() {
                out[(i, k)] += coeff * h;
            }
        }
    }
    Ok(out)
}

fn rate_matrix(h_eff: &ComplexMatrix, rho: f64) -> Result<ComplexMatrix> {
    let gram = matmul(&adjoint(h_eff), h_eff)?;
    ComplexMatrix::identity(h_eff.cols()).add(&gram.scale_real(rho))
}

/// R = log₂ det(I + ρ H_effᴴ H_eff) in bits/s/Hz.
pub fn achievable_rate(h_eff: &ComplexMatrix, config: &ScenarioConfig) -> Result<f64> {
    if h_eff.shape() != (config.n_r, config.n_t) {
        return Err(Error::Shape {
            op: "achievable_rate",
            left: h_eff.shape(),
            right: (config.n_r, config.n_t),
        });
    }
    log2_det_identity_plus_gram(h_eff, config.rate_snr())
}

/// Rate of a realization under the given phases.
pub fn rate(re: &ChannelRealization, ph: &RisPhases, config: &ScenarioConfig) -> Result<f64> {
    achievable_rate(&effective_channel(re, ph)?, config)
}

/// ∂R/∂θ_n for every element.
///
/// With A = I + ρ Hᴴ H and B = A⁻¹ Hᴴ, the derivative is
/// `(2ρ / ln 2) Re(j v_n · h_t[n,:] B h_r[:,n])`.
pub fn rate_gradient(re: &ChannelRealization, ph: &RisPhases, config: &ScenarioConfig) -> Result<Vec<f64>> {
    let h = effective_channel(re, ph)?;
    let rho = config.rate_snr();
    let a_inv = hermitian_pd_inverse(&rate_matrix(&h, rho)?)?;
    let b = matmul(&a_inv, &adjoint(&h))?; // n_t × n_r
    let v = ph.response();
    let (n_r, n_t) = (h.rows(), h.cols());
    let scale = 2.0 * rho / LN_2;
    let grad = v
        .iter()
        .enumerate()
        .map(|(elem, &vn)| {
            let ht_row = re.h_t.row(elem);
            let mut q = Complex64::new(0.0, 0.0);
            for k in 0..n_t {
                let mut bk = Complex64::new(0.0, 0.0);
                for i in 0..n_r {
                    bk += b[(k, i)] * re.h_r_adj[(i, elem)];
                }
                q += ht_row[k] * bk;
            }
            scale * (Complex64::new(0.0, 1.0) * vn * q).re
        })
        .collect();
    Ok(grad)
}
