//! Per-topology channel state: lognormal shadowing, distance-dependent
//! Nakagami parameters and the normalized powers fed to the outage formula.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::topology::{fmt_f64, NetworkConfig, Topology};

/// Channel parameters. Ratios are stored on a linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub path_loss_exponent: f64,
    /// Shadowing standard deviation in dB; zero disables shadowing.
    pub shadowing_std_db: f64,
    /// Line-of-sight radius of the distance-dependent fading model.
    pub los_radius: f64,
    /// SNR `Γ` at unit distance without fading or shadowing.
    pub snr: f64,
    /// Ratio `G/h` of spreading factor to chip factor.
    pub spreading_over_chip: f64,
    pub sinr_threshold: f64,
    pub reference_distance: f64,
}

impl ChannelConfig {
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.path_loss_exponent >= 2.0) {
            return bad(format!(
                "path-loss exponent must be ≥ 2, got {}",
                self.path_loss_exponent
            ));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return bad(format!(
                "shadowing standard deviation must be ≥ 0 dB, got {}",
                self.shadowing_std_db
            ));
        }
        if !(self.los_radius > 0.0) {
            return bad(format!("line-of-sight radius must be > 0, got {}", self.los_radius));
        }
        if !(self.snr > 0.0) {
            return bad(format!("SNR must be > 0, got {}", self.snr));
        }
        if !(self.spreading_over_chip > 0.0) {
            return bad(format!("G/h must be > 0, got {}", self.spreading_over_chip));
        }
        if !(self.sinr_threshold > 0.0) {
            return bad(format!("SINR threshold must be > 0, got {}", self.sinr_threshold));
        }
        if !(self.reference_distance > 0.0) {
            return bad(format!(
                "reference distance must be > 0, got {}",
                self.reference_distance
            ));
        }
        if net.exclusion_radius < self.reference_distance {
            return bad(format!(
                "exclusion radius {} must be ≥ reference distance {}",
                net.exclusion_radius, self.reference_distance
            ));
        }
        Ok(())
    }

    /// `z = Γ⁻¹`.
    pub fn inv_snr(&self) -> f64 {
        1.0 / self.snr
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Power-law path loss `(d/d0)^-α`, defined for `d ≥ d0`.
pub fn path_loss(d: f64, d0: f64, alpha: f64) -> Result<f64> {
    if !(d0 > 0.0) || !(d >= d0) {
        return Err(SimError::InvalidInput(format!(
            "path loss needs d ≥ d0 > 0, got d={d}, d0={d0}"
        )));
    }
    Ok((d / d0).powf(-alpha))
}

/// Distance-dependent Nakagami parameter: 3 within half the line-of-sight
/// radius, 2 within the radius, 1 beyond.
pub fn nakagami_param(d: f64, los_radius: f64) -> u32 {
    if d <= los_radius / 2.0 {
        3
    } else if d <= los_radius {
        2
    } else {
        1
    }
}

/// Shadowing factors in dB for every ordered pair `(i, j)`, `i ≠ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowTable {
    n: usize,
    values: Vec<f64>,
}

impl ShadowTable {
    pub fn zeros(n: usize) -> Self {
        ShadowTable {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, db: f64) {
        self.values[i * self.n + j] = db;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Off-diagonal entries in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.values
            .iter()
            .enumerate()
            .filter(move |(idx, _)| idx / n != idx % n)
            .map(|(_, v)| *v)
    }

    /// Debug dump: `i,j,xi_db`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "xi_db"])?;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    w.write_record([i.to_string(), j.to_string(), fmt_f64(self.get(i, j))])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws an independent `N(0, σ²)` dB value for every ordered pair. The
/// normal deviates are consumed even when `σ = 0` so that the random stream
/// stays aligned across parameter sweeps.
pub fn draw_shadowing<R: Rng + ?Sized>(topology: &Topology, std_db: f64, rng: &mut R) -> ShadowTable {
    let n = topology.len();
    let mut table = ShadowTable::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let z: f64 = rng.sample(StandardNormal);
                table.set(i, j, if std_db == 0.0 { 0.0 } else { std_db * z });
            }
        }
    }
    table
}

/// Channel state of one topology, fixed across all of its trials.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    n: usize,
    shadow: ShadowTable,
    /// `10^(ξ/10) · d^-α` per ordered pair.
    gain: Vec<f64>,
    nakagami: Vec<u32>,
    powers: Vec<f64>,
    interference_scale: f64,
}

impl ChannelRealization {
    /// Builds the realization with equal transmit powers.
    pub fn new(topology: &Topology, shadow: ShadowTable, cfg: &ChannelConfig) -> Result<Self> {
        Self::with_powers(topology, shadow, cfg, vec![1.0; topology.len()])
    }

    pub fn with_powers(
        topology: &Topology,
        shadow: ShadowTable,
        cfg: &ChannelConfig,
        powers: Vec<f64>,
    ) -> Result<Self> {
        let n = topology.len();
        if shadow.len() != n || powers.len() != n {
            return Err(SimError::InvalidInput(format!(
                "channel tables sized for {} / {} mobiles, topology has {n}",
                shadow.len(),
                powers.len()
            )));
        }
        if powers.iter().any(|p| !(*p > 0.0)) {
            return Err(SimError::InvalidInput("transmit powers must be positive".into()));
        }
        let mut gain = vec![0.0; n * n];
        let mut nakagami = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = topology.distance(i, j);
                if !(d > 0.0) {
                    return Err(SimError::InvalidInput(format!(
                        "mobiles {i} and {j} are co-located"
                    )));
                }
                gain[i * n + j] = db_to_linear(shadow.get(i, j)) * d.powf(-cfg.path_loss_exponent);
                nakagami[i * n + j] = nakagami_param(d, cfg.los_radius);
            }
        }
        Ok(ChannelRealization {
            n,
            shadow,
            gain,
            nakagami,
            powers,
            interference_scale: 1.0 / cfg.spreading_over_chip,
        })
    }

    pub fn num_mobiles(&self) -> usize {
        self.n
    }

    pub fn shadow(&self) -> &ShadowTable {
        &self.shadow
    }

    pub fn nakagami(&self, i: usize, j: usize) -> u32 {
        self.nakagami[i * self.n + j]
    }

    /// Shadowed path gain `10^(ξ_ij/10) ‖X_i − X_j‖^-α`.
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.n + j]
    }

    /// Normalized power of mobile `i` at receiver `j` when `k` is the desired
    /// transmitter. Interfering powers carry the despreading factor `h/G`.
    pub fn normalized_power(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(i != j);
        let g = self.gain(i, j);
        if i == k {
            g
        } else {
            self.interference_scale * self.powers[i] / self.powers[k] * g
        }
    }
}
