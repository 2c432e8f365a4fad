//! Equilibrium ligand–receptor binding statistics.
//!
//! Units are fixed crate-wide: μm, s, molecules/μm³, 1/s and μm³/s.
//!
//! A receptor exposed to a stationary ligand concentration `c` is bound with
//! probability `c / (c + K_D)`, and `N_R` independent receptors give a
//! binomial bound count. With two ligand types sharing the same binding rate,
//! a single bound-time duration is drawn from the two-component exponential
//! mixture weighted by the concentration ratio `alpha` of type 1.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Relative tolerance for "equal" binding rates within a panel.
const RATE_EQ_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LigandType {
    k_on: f64,
    k_off: f64,
}

impl LigandType {
    pub fn new(k_on: f64, k_off: f64) -> Result<Self> {
        ensure(k_on > 0.0 && k_on.is_finite(), || {
            format!("binding rate must be positive, got {k_on}")
        })?;
        ensure(k_off > 0.0 && k_off.is_finite(), || {
            format!("unbinding rate must be positive, got {k_off}")
        })?;
        Ok(Self { k_on, k_off })
    }

    /// Builds a ligand from its binding rate and dissociation constant.
    pub fn from_kd(k_on: f64, kd: f64) -> Result<Self> {
        Self::new(k_on, kd * k_on)
    }

    pub fn k_on(&self) -> f64 {
        self.k_on
    }

    pub fn k_off(&self) -> f64 {
        self.k_off
    }

    /// Dissociation constant `k_off / k_on`.
    pub fn kd(&self) -> f64 {
        self.k_off / self.k_on
    }
}

/// Two ligand types used for ratio encoding, stored so that `ligand1` has
/// the larger unbinding rate (the lower-affinity ligand) and `gamma >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LigandPanel {
    ligand1: LigandType,
    ligand2: LigandType,
    gamma: f64,
    /// The caller passed the higher-affinity ligand first.
    swapped: bool,
}

impl LigandPanel {
    pub fn new(first: LigandType, second: LigandType) -> Result<Self> {
        let (a, b) = (first.k_on, second.k_on);
        ensure((a - b).abs() <= RATE_EQ_RTOL * a.max(b), || {
            format!("binding rates must be equal, got {a} and {b}")
        })?;
        let swapped = first.k_off < second.k_off;
        let (ligand1, ligand2) = if swapped { (second, first) } else { (first, second) };
        Ok(Self {
            ligand1,
            ligand2,
            gamma: ligand1.k_off / ligand2.k_off,
            swapped,
        })
    }

    /// Panel with `k1_off = gamma * k2_off` and a shared binding rate.
    /// `gamma < 1` is accepted and canonicalized.
    pub fn from_gamma(k_on: f64, k2_off: f64, gamma: f64) -> Result<Self> {
        ensure(gamma > 0.0 && gamma.is_finite(), || {
            format!("similarity parameter must be positive, got {gamma}")
        })?;
        Self::new(LigandType::new(k_on, gamma * k2_off)?, LigandType::new(k_on, k2_off)?)
    }

    pub fn ligand1(&self) -> &LigandType {
        &self.ligand1
    }

    pub fn ligand2(&self) -> &LigandType {
        &self.ligand2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k1_off(&self) -> f64 {
        self.ligand1.k_off
    }

    pub fn k2_off(&self) -> f64 {
        self.ligand2.k_off
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    /// Maps the ratio of the ligand the caller listed first onto the
    /// canonical type-1 ratio (and back; the map is an involution).
    pub fn caller_to_canonical(&self, alpha: f64) -> f64 {
        if self.swapped {
            1.0 - alpha
        } else {
            alpha
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptorArray {
    n_receptors: u64,
}

impl ReceptorArray {
    pub fn new(n_receptors: u64) -> Result<Self> {
        ensure(n_receptors >= 1, || "need at least one receptor".into())?;
        Ok(Self { n_receptors })
    }

    pub fn count(&self) -> u64 {
        self.n_receptors
    }

    pub fn count_f64(&self) -> f64 {
        self.n_receptors as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    alpha: f64,
    c_total: f64,
}

impl MixtureState {
    pub fn new(alpha: f64, c_total: f64) -> Result<Self> {
        check_ratio(alpha)?;
        ensure(c_total >= 0.0 && c_total.is_finite(), || {
            format!("total concentration must be non-negative, got {c_total}")
        })?;
        Ok(Self { alpha, c_total })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_total(&self) -> f64 {
        self.c_total
    }

    pub fn c1(&self) -> f64 {
        self.alpha * self.c_total
    }

    pub fn c2(&self) -> f64 {
        (1.0 - self.alpha) * self.c_total
    }
}

pub(crate) fn check_ratio(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("ratio must lie in [0, 1], got {alpha}")))
    }
}

pub fn bound_probability_single(c: f64, ligand: &LigandType) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("concentration must be non-negative, got {c}")));
    }
    if c.is_infinite() {
        return Ok(1.0);
    }
    Ok(c / (c + ligand.kd()))
}

pub fn bound_probability_mixture(state: &MixtureState, panel: &LigandPanel) -> f64 {
    let occ = state.c1() / panel.ligand1.kd() + state.c2() / panel.ligand2.kd();
    occ / (1.0 + occ)
}

fn check_time(tau: f64) -> Result<()> {
    if tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("bound time must be non-negative, got {tau}")))
    }
}

pub fn bound_time_density(tau: f64, alpha: f64, panel: &LigandPanel) -> Result<f64> {
    check_time(tau)?;
    check_ratio(alpha)?;
    let (k1, k2) = (panel.k1_off(), panel.k2_off());
    Ok(alpha * k1 * (-k1 * tau).exp() + (1.0 - alpha) * k2 * (-k2 * tau).exp())
}

pub fn bound_time_cdf(tau: f64, alpha: f64, panel: &LigandPanel) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    -(alpha * (-panel.k1_off() * tau).exp_m1() + (1.0 - alpha) * (-panel.k2_off() * tau).exp_m1())
}

/// `ln p(tau | alpha)` via log-sum-exp of the two weighted components.
pub(crate) fn ln_density(tau: f64, alpha: f64, panel: &LigandPanel) -> f64 {
    let (k1, k2) = (panel.k1_off(), panel.k2_off());
    let a = alpha.ln() + k1.ln() - k1 * tau;
    let b = (1.0 - alpha).ln() + k2.ln() - k2 * tau;
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Log-likelihood of independent bound-time observations.
pub fn log_likelihood_ratio(bound_times: &[f64], alpha: f64, panel: &LigandPanel) -> Result<f64> {
    if bound_times.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_ratio(alpha)?;
    for &t in bound_times {
        check_time(t)?;
    }
    Ok(bound_times.iter().map(|&t| ln_density(t, alpha, panel)).sum())
}

/// Same likelihood written around the type-2 component:
/// `ln(k2 e^{-k2 τ} (1 - α + α γ e^{(1-γ) k2 τ}))`.
pub fn log_likelihood_gamma_form(bound_times: &[f64], alpha: f64, panel: &LigandPanel) -> Result<f64> {
    if bound_times.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_ratio(alpha)?;
    let (k2, g) = (panel.k2_off(), panel.gamma());
    let mut sum = 0.0;
    for &t in bound_times {
        check_time(t)?;
        let mix = 1.0 - alpha + alpha * g * ((1.0 - g) * k2 * t).exp();
        sum += k2.ln() - k2 * t + mix.ln();
    }
    Ok(sum)
}

pub fn sample_bound_receptors<R: Rng + ?Sized>(p_bound: f64, receptors: &ReceptorArray, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p_bound) {
        return Err(Error::Domain(format!(
            "bound probability must lie in [0, 1], got {p_bound}"
        )));
    }
    let dist = Binomial::new(receptors.count(), p_bound).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// One bound-time draw: pick the ligand type with probability `alpha`, then
/// invert the exponential CDF.
#[inline]
pub fn sample_bound_time<R: Rng + ?Sized>(alpha: f64, panel: &LigandPanel, rng: &mut R) -> f64 {
    let k = if rng.random::<f64>() < alpha {
        panel.k1_off()
    } else {
        panel.k2_off()
    };
    // 1 - U lies in (0, 1], so the log is finite
    -(1.0 - rng.random::<f64>()).ln() / k
}

/// One bound-time sample per receptor.
pub fn sample_bound_times<R: Rng + ?Sized>(
    alpha: f64,
    panel: &LigandPanel,
    receptors: &ReceptorArray,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_ratio(alpha)?;
    Ok((0..receptors.count())
        .map(|_| sample_bound_time(alpha, panel, rng))
        .collect())
}
