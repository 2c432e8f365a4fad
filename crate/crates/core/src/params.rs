//! System parameters with built-in defaults, optionally overridden by a
//! TOML file and then by command-line flags.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinetics::{LigandPanel, LigandType, ReceptorArray};
use crate::mobility::{MobilityConfig, Sampling};
use crate::simulator::{CampaignConfig, Modulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Receptor count.
    pub n_r: u64,
    /// Ligand diffusion coefficient, μm²/s.
    pub d: f64,
    /// Tx/Rx diffusion coefficient, μm²/s.
    pub d_txrx: f64,
    /// Initial Tx–Rx distance, μm.
    pub r0: f64,
    /// Shared binding rate, μm³/s.
    pub k_on: f64,
    pub k1_off: f64,
    pub k2_off: f64,
    /// Signaling interval, s.
    pub t_s: f64,
    /// Largest received concentration at `r0`, in units of `K_D1`.
    pub max_power_kd1: f64,
    pub messages: u64,
    pub runs: u64,
    /// Past transmissions contributing interference when ISI is on.
    pub isi_window: usize,
    /// Fixed sampling delay in s; peak sampling when absent.
    pub tau_s: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_r: 1000,
            d: 100.0,
            d_txrx: 0.001,
            r0: 25.0,
            k_on: 20.0,
            k1_off: 10.0,
            k2_off: 5.0,
            t_s: 60.0,
            max_power_kd1: 5.0,
            messages: 1000,
            runs: 2000,
            isi_window: 5,
            tau_s: None,
        }
    }
}

impl SystemParams {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn gamma(&self) -> f64 {
        self.k1_off / self.k2_off
    }

    /// Sets `k1_off = gamma * k2_off`.
    pub fn set_gamma(&mut self, gamma: f64) {
        self.k1_off = gamma * self.k2_off;
    }

    pub fn panel(&self) -> Result<LigandPanel> {
        LigandPanel::new(
            LigandType::new(self.k_on, self.k1_off)?,
            LigandType::new(self.k_on, self.k2_off)?,
        )
    }

    /// The CSK ligand, type 1 of the panel.
    pub fn csk_ligand(&self) -> Result<LigandType> {
        Ok(*self.panel()?.ligand1())
    }

    pub fn receptors(&self) -> Result<ReceptorArray> {
        ReceptorArray::new(self.n_r)
    }

    pub fn mobility(&self) -> Result<MobilityConfig> {
        MobilityConfig::new(self.d, self.d_txrx, self.r0, self.t_s)
    }

    pub fn max_concentration(&self) -> Result<f64> {
        Ok(self.max_power_kd1 * self.csk_ligand()?.kd())
    }

    pub fn sampling(&self) -> Sampling {
        match self.tau_s {
            Some(t) => Sampling::Fixed(t),
            None => Sampling::Peak,
        }
    }

    pub fn campaign(&self, modulation: Modulation, seed: u64, isi_enabled: bool) -> Result<CampaignConfig> {
        let config = CampaignConfig {
            modulation,
            messages_per_run: self.messages,
            runs: self.runs,
            mobility: self.mobility()?,
            panel: self.panel()?,
            receptors: self.receptors()?,
            max_concentration: self.max_concentration()?,
            sampling: self.sampling(),
            isi_enabled,
            isi_window: self.isi_window,
            master_seed: seed,
        };
        config.validate()?;
        Ok(config)
    }
}
