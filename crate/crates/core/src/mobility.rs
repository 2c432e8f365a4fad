//! Statistics of the mobile channel: Tx–Rx distance, peak sampling time,
//! received concentration and bound-receptor counts.
//!
//! Transmitter and receiver both random-walk with coefficient `D_txrx`, so
//! each coordinate of their difference at time `t` is Gaussian with
//! variance `4 D_txrx t`. The scaled distance `B = r / √(4 D_txrx t)` is
//! noncentral chi with 3 degrees of freedom and noncentrality `r0 / √(4 D_txrx t)`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::kinetics::{LigandType, ReceptorArray};
use crate::quadrature::{integrate, Tolerance};

/// Half-width, in standard deviations, of every Gaussian integration window.
const WINDOW_SIGMAS: f64 = 10.0;
const TAIL_RENORMALIZE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    /// Ligand diffusion coefficient, μm²/s.
    pub d: f64,
    /// Tx and Rx diffusion coefficient, μm²/s.
    pub d_txrx: f64,
    /// Initial Tx–Rx distance, μm.
    pub r0: f64,
    /// Signaling interval, s.
    pub t_s: f64,
}

impl MobilityConfig {
    pub fn new(d: f64, d_txrx: f64, r0: f64, t_s: f64) -> Result<Self> {
        let cfg = Self { d, d_txrx, r0, t_s };
        cfg.validate()?;
        if d_txrx > 0.1 * d {
            log::warn!("Tx/Rx diffusion {d_txrx} is not small against ligand diffusion {d}");
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.d > 0.0 && self.d.is_finite(), || {
            format!("diffusion coefficient must be positive, got {}", self.d)
        })?;
        ensure(self.d_txrx >= 0.0 && self.d_txrx.is_finite(), || {
            format!("Tx/Rx diffusion must be non-negative, got {}", self.d_txrx)
        })?;
        ensure(self.r0 > 0.0 && self.r0.is_finite(), || {
            format!("initial distance must be positive, got {}", self.r0)
        })?;
        ensure(self.t_s > 0.0 && self.t_s.is_finite(), || {
            format!("signaling interval must be positive, got {}", self.t_s)
        })
    }
}

/// Free-space impulse response `(4πDτ)^{-3/2} exp(-r²/4Dτ)`.
pub fn cir(r: f64, tau: f64, d: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("sampling delay must be positive, got {tau}")));
    }
    if !(r >= 0.0) || !(d > 0.0) {
        return Err(Error::Domain(format!("need r >= 0 and D > 0, got r={r}, D={d}")));
    }
    Ok((4.0 * PI * d * tau).powf(-1.5) * (-r * r / (4.0 * d * tau)).exp())
}

pub fn peak_time(r: f64, d: f64) -> f64 {
    r * r / (6.0 * d)
}

/// Concentration at the peak time, `n_tx (2πr²/3)^{-3/2} e^{-3/2}`.
pub fn peak_concentration(n_tx: f64, r: f64) -> f64 {
    n_tx * (2.0 * PI * r * r / 3.0).powf(-1.5) * (-1.5f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceMoments {
    pub mean_r: f64,
    pub var_r: f64,
    /// `+∞` for the static channel.
    pub noncentrality: f64,
}

impl DistanceMoments {
    pub fn fixed(r: f64) -> Self {
        Self {
            mean_r: r,
            var_r: 0.0,
            noncentrality: f64::INFINITY,
        }
    }
}

/// `E[B]` for a noncentral chi variable with 3 degrees of freedom.
pub fn noncentral_chi3_mean(lambda: f64) -> Result<f64> {
    if lambda < 1e-8 {
        return Ok(2.0 * (2.0 / PI).sqrt());
    }
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    // x f(x) with f(x) = (x/λ) φ(x-λ) (1 - e^{-2λx})
    let integrand = |x: f64| x * x / lambda * phi(x - lambda) * -(-2.0 * lambda * x).exp_m1();
    let lo = (lambda - 15.0).max(0.0);
    let hi = lambda + 15.0;
    Ok(integrate(integrand, lo, hi, Tolerance::relative(1e-12))?.value)
}

pub fn distance_moments(t: f64, config: &MobilityConfig) -> Result<DistanceMoments> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 || config.d_txrx == 0.0 {
        return Ok(DistanceMoments::fixed(config.r0));
    }
    let s2 = 4.0 * config.d_txrx * t;
    let lambda = config.r0 / s2.sqrt();
    let eb = noncentral_chi3_mean(lambda)?;
    Ok(DistanceMoments {
        mean_r: s2.sqrt() * eb,
        var_r: (s2 * (3.0 + lambda * lambda - eb * eb)).max(0.0),
        noncentrality: lambda,
    })
}

/// Mean and variance of `τ_peak(t_R) = r(t_R)² / 6D`.
pub fn peak_time_moments(t_r: f64, config: &MobilityConfig) -> Result<(f64, f64)> {
    if !(t_r >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t_r}")));
    }
    let (d, dd, r0) = (config.d, config.d_txrx, config.r0);
    let mean = (12.0 * dd * t_r + r0 * r0) / (6.0 * d);
    let var = (24.0 * dd * dd * t_r * t_r + 4.0 * r0 * r0 * dd * t_r) / (9.0 * d * d);
    Ok((mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    Peak,
    /// Fixed delay after release, s.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationMoments {
    pub mean_c: f64,
    pub var_c: f64,
    pub sampling: Sampling,
}

/// Delta-method moments of the peak-sampled concentration.
pub fn received_concentration_moments_peak(n_tx: f64, dist: &DistanceMoments) -> Result<ConcentrationMoments> {
    ensure(n_tx >= 0.0, || {
        format!("transmit count must be non-negative, got {n_tx}")
    })?;
    let (mu, v) = (dist.mean_r, dist.var_r);
    if !(mu > 0.0) {
        return Err(Error::Domain("mean distance must be positive".into()));
    }
    let k = (-1.5f64).exp() * (1.5 / PI).powf(1.5);
    let mean_c = k * n_tx / mu.powi(3) * (1.0 + 6.0 * v / (mu * mu));
    let var_c = k * k * 9.0 * n_tx * n_tx * v / mu.powi(8) * (1.0 + 8.0 * v / (mu * mu));
    Ok(ConcentrationMoments {
        mean_c,
        var_c,
        sampling: Sampling::Peak,
    })
}

/// Delta-method moments of the concentration sampled `tau_s` after release.
pub fn received_concentration_moments_fixed(
    n_tx: f64,
    dist: &DistanceMoments,
    tau_s: f64,
    d: f64,
) -> Result<ConcentrationMoments> {
    if !(tau_s > 0.0) {
        return Err(Error::Domain(format!("sampling delay must be positive, got {tau_s}")));
    }
    ensure(n_tx >= 0.0, || {
        format!("transmit count must be non-negative, got {n_tx}")
    })?;
    let (mu, v) = (dist.mean_r, dist.var_r);
    let dt = d * tau_s;
    let mu2 = mu * mu;
    let mean_c = n_tx
        * (4.0 * PI * dt).powf(-1.5)
        * (-mu2 / (4.0 * dt)).exp()
        * (1.0 + v * mu2 / (8.0 * dt * dt) - v / (4.0 * dt));
    let var_c = 4.0 * n_tx * n_tx * v / ((4.0 * dt).powi(5) * PI.powi(3))
        * (-2.0 * mu2 / (4.0 * dt)).exp()
        * (mu2 + v / 2.0 - mu2 * v / (2.0 * dt) + mu2 * mu2 * v / (8.0 * dt * dt));
    Ok(ConcentrationMoments {
        mean_c,
        var_c: var_c.max(0.0),
        sampling: Sampling::Fixed(tau_s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReceptorMoments {
    pub mean: f64,
    pub variance: f64,
    /// Gaussian mass below `c = 0` that was cut off and renormalized away.
    pub tail_mass: f64,
}

/// Law of total mean and variance for `n_B` when the concentration is
/// Gaussian, truncated to `c ≥ 0`.
pub fn bound_receptor_moments_mobile(
    conc: &ConcentrationMoments,
    receptors: &ReceptorArray,
    ligand: &LigandType,
) -> Result<BoundReceptorMoments> {
    let (mu, var) = (conc.mean_c, conc.var_c);
    if !(var >= 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("bad concentration moments ({mu}, {var})")));
    }
    let n = receptors.count_f64();
    let k = ligand.kd();
    let p = |c: f64| if c <= 0.0 { 0.0 } else { c / (c + k) };
    let sigma = var.sqrt();
    let lo = (mu - WINDOW_SIGMAS * sigma).max(0.0);
    let hi = mu + WINDOW_SIGMAS * sigma;
    if sigma == 0.0 || hi <= lo || hi - lo < 1e-14 * hi.abs().max(k) {
        let pb = p(mu);
        return Ok(BoundReceptorMoments {
            mean: n * pb,
            variance: n * pb * (1.0 - pb),
            tail_mass: 0.0,
        });
    }
    let tail = 0.5 * erfc(mu / (sigma * 2f64.sqrt()));
    let norm = if tail > TAIL_RENORMALIZE { 1.0 - tail } else { 1.0 };
    let density = |c: f64| (-0.5 * ((c - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt()) / norm;
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-11,
        max_subintervals: 2000,
    };
    let mean = integrate(|c| n * p(c) * density(c), lo, hi, tol)?.value;
    let variance = integrate(
        |c| {
            let pc = p(c);
            (n * pc * (1.0 - pc) + (n * pc - mean).powi(2)) * density(c)
        },
        lo,
        hi,
        tol,
    )?
    .value;
    Ok(BoundReceptorMoments {
        mean,
        variance: variance.max(0.0),
        tail_mass: tail,
    })
}
