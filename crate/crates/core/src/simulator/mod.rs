//! Monte Carlo link simulation for the mobile channel.
//!
//! Each run starts the transmitter at the origin and the receiver at
//! `(r0, 0, 0)`. Message `k` is released at `t_R = k T_s`; the Tx–Rx
//! distance is read once at `t_R` and held for the whole interval, then both
//! nodes take one random-walk step of length `T_s`. Detectors are designed
//! once from the initial distance and never adapt.

mod link;

pub use link::{csk_count_stats, CskLink, RskLink, COUNT_VARIANCE_FLOOR};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::{Duration, Instant};

use crate::error::{ensure, Error, Result};
use crate::kinetics::{LigandPanel, ReceptorArray};
use crate::mobility::{
    bound_receptor_moments_mobile, cir, distance_moments, received_concentration_moments_fixed,
    received_concentration_moments_peak, MobilityConfig, Sampling,
};
use crate::modem::{analytical_sep, symbol_error_probability, SymbolStats, M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Rsk,
    Csk,
}

impl Modulation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rsk => "rsk",
            Self::Csk => "csk",
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsk" => Ok(Self::Rsk),
            "csk" => Ok(Self::Csk),
            other => Err(Error::InvalidParameter(format!(
                "unknown modulation '{other}' (expected rsk or csk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub modulation: Modulation,
    pub messages_per_run: u64,
    pub runs: u64,
    pub mobility: MobilityConfig,
    pub panel: LigandPanel,
    pub receptors: ReceptorArray,
    /// Received CSK concentration of the top level at `r0`, μm⁻³.
    pub max_concentration: f64,
    pub sampling: Sampling,
    pub isi_enabled: bool,
    /// Past intervals whose tails reach the current sample.
    pub isi_window: usize,
    pub master_seed: u64,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.messages_per_run >= 1, || {
            "need at least one message per run".into()
        })?;
        ensure(self.runs >= 1, || "need at least one run".into())?;
        self.mobility.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config is always serializable");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub sep: f64,
    /// Standard error of `sep` from the spread of per-run error rates.
    pub std_error: f64,
    pub runs_completed: u64,
    pub errors: u64,
    pub symbols: u64,
    #[serde(skip)]
    pub elapsed: Duration,
    pub config_digest: String,
}

impl TrialReport {
    /// Half-width of the normal 95% interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.std_error
    }
}

/// Per-run seed from the master seed (SplitMix64 finalizer applied twice).
pub fn hash64(master_seed: u64, run_index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master_seed) ^ run_index)
}

pub fn run_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(master_seed, run_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub tx: [f64; 3],
    pub rx: [f64; 3],
}

impl Positions {
    pub fn initial(r0: f64) -> Self {
        Self {
            tx: [0.0; 3],
            rx: [r0, 0.0, 0.0],
        }
    }

    pub fn distance(&self) -> f64 {
        let d: f64 = (0..3).map(|i| (self.rx[i] - self.tx[i]).powi(2)).sum();
        d.sqrt()
    }
}

/// Advances both nodes by an independent `N(0, 2 D_txrx dt)` step per
/// coordinate. Six normals are drawn whatever `d_txrx` is, so the generator
/// stream does not depend on mobility.
pub fn step_positions<R: Rng + ?Sized>(state: &mut Positions, dt: f64, d_txrx: f64, rng: &mut R) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let sd = (2.0 * d_txrx * dt).sqrt();
    for x in state.tx.iter_mut().chain(state.rx.iter_mut()) {
        let z: f64 = StandardNormal.sample(rng);
        *x += sd * z;
    }
    Ok(())
}

enum Link {
    Rsk(RskLink),
    Csk(CskLink),
}

fn build_link(config: &CampaignConfig) -> Result<Link> {
    Ok(match config.modulation {
        Modulation::Rsk => Link::Rsk(RskLink::design(&config.panel, &config.receptors)?),
        Modulation::Csk => Link::Csk(CskLink::design(
            config.panel.ligand1(),
            &config.receptors,
            config.max_concentration,
            config.mobility.r0,
            config.mobility.d,
            config.sampling,
        )?),
    })
}

/// Past transmissions still in flight: `(symbol, frozen distance)`, newest first.
struct History {
    window: usize,
    past: Vec<(usize, f64)>,
}

impl History {
    fn new(window: usize) -> Self {
        Self {
            window,
            past: Vec::with_capacity(window + 1),
        }
    }

    fn push(&mut self, m: usize, r: f64) {
        if self.window == 0 {
            return;
        }
        self.past.insert(0, (m, r));
        self.past.truncate(self.window);
    }

    /// `(j, symbol, distance)` for `j = 1..=W` intervals back.
    fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.past.iter().enumerate().map(|(i, &(m, r))| (i + 1, m, r))
    }
}

fn run_single(config: &CampaignConfig, link: &Link, run_index: u64) -> u64 {
    let mut rng = run_rng(config.master_seed, run_index);
    let mob = &config.mobility;
    let mut pos = Positions::initial(mob.r0);
    let mut history = History::new(if config.isi_enabled { config.isi_window } else { 0 });
    let mut errors = 0u64;
    for k in 0..config.messages_per_run {
        if k > 0 {
            step_positions(&mut pos, mob.t_s, mob.d_txrx, &mut rng).expect("positive interval");
        }
        let r = pos.distance();
        let m = rng.random_range(0..M);
        let detected = match link {
            Link::Rsk(l) => {
                let alpha = l.constellation.levels[m];
                let alpha = if history.window > 0 {
                    rsk_isi_ratio(l, config, alpha, r, &history)
                } else {
                    alpha
                };
                l.run_interval(alpha, &mut rng)
            }
            Link::Csk(l) => {
                let mut c = l.received_concentration(m, r);
                if history.window > 0 {
                    let tau = link::sampling_delay(l.sampling, r, l.d);
                    for (j, mj, rj) in history.iter() {
                        let delay = j as f64 * mob.t_s + tau;
                        c += l.n_tx[mj] * cir(rj, delay, l.d).unwrap_or(0.0);
                    }
                }
                l.detect_at(c, &mut rng)
            }
        };
        if detected != m {
            errors += 1;
        }
        history.push(m, r);
    }
    errors
}

/// Realized type-1 fraction when tails of earlier mixtures overlap the
/// current one. Every RSK symbol releases the same total count, so only
/// the CIR weights matter.
fn rsk_isi_ratio(link: &RskLink, config: &CampaignConfig, alpha: f64, r: f64, history: &History) -> f64 {
    let d = config.mobility.d;
    let tau = link::sampling_delay(config.sampling, r, d);
    let now = cir(r, tau, d).unwrap_or(0.0);
    let (mut type1, mut total) = (alpha * now, now);
    for (j, mj, rj) in history.iter() {
        let w = cir(rj, j as f64 * config.mobility.t_s + tau, d).unwrap_or(0.0);
        type1 += link.constellation.levels[mj] * w;
        total += w;
    }
    if total > 0.0 {
        (type1 / total).clamp(0.0, 1.0)
    } else {
        alpha
    }
}

fn run(config: &CampaignConfig) -> Result<TrialReport> {
    config.validate()?;
    let start = Instant::now();
    let link = build_link(config)?;
    let per_run: Vec<u64> = (0..config.runs)
        .into_par_iter()
        .map(|i| run_single(config, &link, i))
        .collect();
    let n = config.messages_per_run as f64;
    let runs = per_run.len() as f64;
    let errors: u64 = per_run.iter().sum();
    let sep = errors as f64 / (runs * n);
    let var = if per_run.len() > 1 {
        per_run.iter().map(|&e| (e as f64 / n - sep).powi(2)).sum::<f64>() / (runs - 1.0)
    } else {
        0.0
    };
    Ok(TrialReport {
        sep,
        std_error: (var / runs).sqrt(),
        runs_completed: config.runs,
        errors,
        symbols: config.runs * config.messages_per_run,
        elapsed: start.elapsed(),
        config_digest: config.digest(),
    })
}

/// Runs the campaign with interference switched off.
pub fn run_campaign(config: &CampaignConfig) -> Result<TrialReport> {
    if config.isi_enabled {
        let mut plain = config.clone();
        plain.isi_enabled = false;
        return run(&plain);
    }
    run(config)
}

/// Runs the campaign with tails of the last `isi_window` transmissions added
/// at each sampling instant.
pub fn run_campaign_isi(config: &CampaignConfig) -> Result<TrialReport> {
    if !config.isi_enabled {
        return Err(Error::InvalidParameter("interference mode requires isi_enabled".into()));
    }
    run(config)
}

/// Analytical SEP averaged over the messages of a run.
///
/// RSK statistics do not depend on distance, so this is the static SEP of
/// the designed constellation. For CSK each message index gets its own
/// bound-count moments from the distance distribution at `t_R`, detected
/// against the thresholds designed at `r0`. Identical RSK ligands carry no
/// information, and the best receiver guesses.
pub fn analytical_campaign_sep(config: &CampaignConfig) -> Result<f64> {
    config.validate()?;
    if config.modulation == Modulation::Rsk && config.panel.gamma() == 1.0 {
        return Ok(1.0 - 1.0 / M as f64);
    }
    match build_link(config)? {
        Link::Rsk(l) => Ok(analytical_sep(&l.constellation)),
        Link::Csk(l) => {
            let mut total = 0.0;
            for k in 0..config.messages_per_run {
                let t_r = k as f64 * config.mobility.t_s;
                let stats = csk_mobile_stats(&l, config, t_r)?;
                total += symbol_error_probability(&stats, &l.constellation.thresholds);
            }
            Ok(total / config.messages_per_run as f64)
        }
    }
}

/// Bound-count moments of each CSK symbol at release time `t_r`.
pub fn csk_mobile_stats(link: &CskLink, config: &CampaignConfig, t_r: f64) -> Result<[SymbolStats; M]> {
    let dist = distance_moments(t_r, &config.mobility)?;
    let mut out = link.constellation.stats;
    for m in 0..M {
        let conc = match link.sampling {
            Sampling::Peak => received_concentration_moments_peak(link.n_tx[m], &dist)?,
            Sampling::Fixed(tau) => received_concentration_moments_fixed(link.n_tx[m], &dist, tau, link.d)?,
        };
        let b = bound_receptor_moments_mobile(&conc, &link.receptors, &link.ligand)?;
        out[m] = SymbolStats::new(b.mean, b.variance.max(COUNT_VARIANCE_FLOOR), m)?;
    }
    Ok(out)
}
