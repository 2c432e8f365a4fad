//! Designed links: the transmit constellation, what each symbol emits and
//! how one signaling interval is received and detected.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    build_mom_weights, default_alpha_grid, mom_estimator_variance, optimize_threshold, MomWeights, ThresholdScheme,
};
use crate::kinetics::{sample_bound_time, LigandPanel, LigandType, ReceptorArray};
use crate::mobility::{cir, peak_time, Sampling};
use crate::modem::{design_constellation, Constellation, SymbolStats};

/// Variance given to a symbol whose bound count is deterministic (`c = 0`):
/// that of a count spread uniformly over one integer step.
pub const COUNT_VARIANCE_FLOOR: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RskLink {
    pub panel: LigandPanel,
    pub receptors: ReceptorArray,
    pub scheme: ThresholdScheme,
    pub weights: MomWeights,
    /// Levels are type-1 ratios; stats are moments of the moment estimate.
    pub constellation: Constellation,
}

impl RskLink {
    pub fn design(panel: &LigandPanel, receptors: &ReceptorArray) -> Result<Self> {
        let scheme = optimize_threshold(panel, receptors, &default_alpha_grid())?;
        let weights = build_mom_weights(panel, &scheme)?;
        let map = |x: f64| SymbolStats::new(x, mom_estimator_variance(x, panel, &scheme, receptors)?, 0);
        let constellation = design_constellation(map, 0.0, 1.0)?;
        Ok(Self {
            panel: *panel,
            receptors: *receptors,
            scheme,
            weights,
            constellation,
        })
    }

    /// Bound times of every receptor are drawn from the mixture at ratio
    /// `alpha`, split at the threshold, turned into a moment estimate and
    /// detected. Distance does not enter: both ligands see the same channel.
    pub fn run_interval<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> usize {
        let t = self.scheme.threshold();
        let n = self.receptors.count();
        let long = (0..n)
            .filter(|_| sample_bound_time(alpha, &self.panel, rng) >= t)
            .count() as f64;
        let nf = n as f64;
        let w = self.weights.w()[0];
        let alpha_hat = ((nf - long) * w[0] + long * w[1]) / nf;
        self.constellation.detect(alpha_hat.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CskLink {
    pub ligand: LigandType,
    pub receptors: ReceptorArray,
    /// Ligand diffusion coefficient, μm²/s.
    pub d: f64,
    pub sampling: Sampling,
    /// Levels are received concentrations at `r0`; stats are bound counts.
    pub constellation: Constellation,
    /// Molecules released per symbol.
    pub n_tx: [f64; 4],
}

/// Static bound-count statistics for a known concentration.
pub fn csk_count_stats(c: f64, ligand: &LigandType, receptors: &ReceptorArray) -> Result<SymbolStats> {
    let p = c / (c + ligand.kd());
    let n = receptors.count_f64();
    SymbolStats::new(n * p, (n * p * (1.0 - p)).max(COUNT_VARIANCE_FLOOR), 0)
}

pub(crate) fn sampling_delay(sampling: Sampling, r: f64, d: f64) -> f64 {
    match sampling {
        Sampling::Peak => peak_time(r, d),
        Sampling::Fixed(tau) => tau,
    }
}

impl CskLink {
    /// Designs levels on `[0, c_max]` in received-concentration space at the
    /// initial distance and converts them to release counts through the CIR.
    pub fn design(
        ligand: &LigandType,
        receptors: &ReceptorArray,
        c_max: f64,
        r0: f64,
        d: f64,
        sampling: Sampling,
    ) -> Result<Self> {
        if !(c_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maximum concentration must be positive, got {c_max}"
            )));
        }
        let constellation = design_constellation(|c| csk_count_stats(c, ligand, receptors), 0.0, c_max)?;
        let gain = cir(r0, sampling_delay(sampling, r0, d), d)?;
        let n_tx = constellation.levels.map(|c| c / gain);
        Ok(Self {
            ligand: *ligand,
            receptors: *receptors,
            d,
            sampling,
            constellation,
            n_tx,
        })
    }

    /// Concentration seen at distance `r` for symbol `m`, at this interval's
    /// sampling delay.
    pub fn received_concentration(&self, m: usize, r: f64) -> f64 {
        let tau = sampling_delay(self.sampling, r, self.d);
        if self.n_tx[m] == 0.0 || !(tau > 0.0) {
            return 0.0;
        }
        self.n_tx[m] * cir(r, tau, self.d).unwrap_or(0.0)
    }

    /// Samples the bound count at concentration `c` and detects.
    pub fn detect_at<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> usize {
        let p = if c > 0.0 { c / (c + self.ligand.kd()) } else { 0.0 };
        let n_b = Binomial::new(self.receptors.count(), p)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        self.constellation.detect(n_b as f64)
    }

    pub fn run_interval<R: Rng + ?Sized>(&self, distance: f64, m: usize, rng: &mut R) -> usize {
        self.detect_at(self.received_concentration(m, distance), rng)
    }
}
