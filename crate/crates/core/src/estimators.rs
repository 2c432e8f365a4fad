//! Concentration-ratio estimators for RSK and the single-ligand CSK
//! concentration estimator.
//!
//! The moment estimator splits bound-time samples at a threshold
//! `T = v / k1_off` into short (`τ < T`) and long (`τ ≥ T`) events. Index 0
//! of every 2-vector below is the short interval, index 1 the long one;
//! columns of `S` are ligand type 1 then type 2.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::information::fisher_rsk_optimal;
use crate::kinetics::{check_ratio, ln_density, LigandPanel, LigandType, ReceptorArray};
use crate::optimize::{golden_max, golden_min};

/// Smallest `|det S|` accepted as invertible.
pub const SINGULAR_DET: f64 = 1e-12;

const V_MIN: f64 = 0.01;
const V_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScheme {
    v: f64,
    threshold: f64,
}

impl ThresholdScheme {
    pub fn new(v: f64, panel: &LigandPanel) -> Result<Self> {
        ensure(v > 0.0 && v.is_finite(), || {
            format!("proportionality constant must be positive, got {v}")
        })?;
        Ok(Self {
            v,
            threshold: v / panel.k1_off(),
        })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Time threshold in seconds.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomWeights {
    s: [[f64; 2]; 2],
    w: [[f64; 2]; 2],
}

impl MomWeights {
    pub fn s(&self) -> &[[f64; 2]; 2] {
        &self.s
    }

    pub fn w(&self) -> &[[f64; 2]; 2] {
        &self.w
    }

    /// Expected interval probabilities `p = S [α, 1-α]`.
    pub fn interval_probabilities(&self, alpha: f64) -> [f64; 2] {
        let x = [alpha, 1.0 - alpha];
        [
            self.s[0][0] * x[0] + self.s[0][1] * x[1],
            self.s[1][0] * x[0] + self.s[1][1] * x[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub alpha_hat: f64,
    pub variance: f64,
}

impl RatioEstimate {
    /// Estimate clamped into `[0, 1]` for detection.
    pub fn clamped(&self) -> f64 {
        self.alpha_hat.clamp(0.0, 1.0)
    }
}

pub fn build_mom_weights(panel: &LigandPanel, scheme: &ThresholdScheme) -> Result<MomWeights> {
    let t = scheme.threshold();
    // long-interval probabilities of each pure component
    let a = (-panel.k1_off() * t).exp();
    let b = (-panel.k2_off() * t).exp();
    let s = [
        [-(-panel.k1_off() * t).exp_m1(), -(-panel.k2_off() * t).exp_m1()],
        [a, b],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if det.abs() <= SINGULAR_DET {
        return Err(Error::SingularMatrix(det));
    }
    let w = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    Ok(MomWeights { s, w })
}

fn mom_variance_from_weights(alpha: f64, weights: &MomWeights, n: f64) -> f64 {
    let p = weights.interval_probabilities(alpha);
    let w = weights.w[0];
    let cov = [[p[0] * (1.0 - p[0]), -p[0] * p[1]], [-p[0] * p[1], p[1] * (1.0 - p[1])]];
    let mut var = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            var += w[i] * w[j] * cov[i][j];
        }
    }
    (var / n).max(0.0)
}

/// Moment estimate from `[short, long]` event counts.
pub fn mom_ratio_estimate(counts: [u64; 2], weights: &MomWeights, receptors: &ReceptorArray) -> Result<RatioEstimate> {
    let total = counts[0] + counts[1];
    if total != receptors.count() {
        return Err(Error::CountMismatch {
            got: total,
            expected: receptors.count(),
        });
    }
    let n = receptors.count_f64();
    let w = weights.w[0];
    let alpha_hat = (counts[0] as f64 * w[0] + counts[1] as f64 * w[1]) / n;
    let variance = mom_variance_from_weights(alpha_hat.clamp(0.0, 1.0), weights, n);
    Ok(RatioEstimate { alpha_hat, variance })
}

pub fn mom_estimator_variance(
    alpha: f64,
    panel: &LigandPanel,
    scheme: &ThresholdScheme,
    receptors: &ReceptorArray,
) -> Result<f64> {
    check_ratio(alpha)?;
    let weights = build_mom_weights(panel, scheme)?;
    Ok(mom_variance_from_weights(alpha, &weights, receptors.count_f64()))
}

fn mean_variance(v: f64, panel: &LigandPanel, receptors: &ReceptorArray, alpha_grid: &[f64]) -> Result<f64> {
    let scheme = ThresholdScheme::new(v, panel)?;
    let weights = build_mom_weights(panel, &scheme)?;
    let n = receptors.count_f64();
    let sum: f64 = alpha_grid
        .iter()
        .map(|&a| mom_variance_from_weights(a, &weights, n))
        .sum();
    Ok(sum / alpha_grid.len() as f64)
}

/// Uniform 21-point ratio grid used as the default design criterion.
pub fn default_alpha_grid() -> Vec<f64> {
    crate::quadrature::linspace(0.0, 1.0, 21)
}

/// Picks `v` in `[0.01, 10]` minimizing the grid-averaged moment-estimator
/// variance: a log-spaced scan brackets the minimum, golden section refines it.
pub fn optimize_threshold(
    panel: &LigandPanel,
    receptors: &ReceptorArray,
    alpha_grid: &[f64],
) -> Result<ThresholdScheme> {
    if alpha_grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    for &a in alpha_grid {
        check_ratio(a)?;
    }
    if panel.gamma() == 1.0 {
        return Err(Error::SingularMatrix(0.0));
    }
    const SCAN: usize = 61;
    let (lmin, lmax) = (V_MIN.ln(), V_MAX.ln());
    let step = (lmax - lmin) / (SCAN - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..SCAN {
        let v = (lmin + step * i as f64).exp();
        // thresholds where S is singular are simply not candidates
        if let Ok(m) = mean_variance(v, panel, receptors, alpha_grid) {
            if m < best.1 {
                best = (i, m);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(Error::SingularMatrix(0.0));
    }
    let lo = (lmin + step * best.0.saturating_sub(1) as f64).exp();
    let hi = (lmin + step * (best.0 + 1).min(SCAN - 1) as f64).exp();
    let (v, _) = golden_min(
        |v| mean_variance(v, panel, receptors, alpha_grid).unwrap_or(f64::INFINITY),
        lo,
        hi,
        1e-4,
    );
    ThresholdScheme::new(v, panel)
}

/// Maximum-likelihood ratio from bound-time samples.
///
/// The log-likelihood is concave in `alpha`, so golden section on `[0, 1]`
/// finds the maximizer; the endpoints are compared explicitly since the
/// search never evaluates them. The variance is the Cramér–Rao value
/// `1 / I(α̂)` for the given number of samples.
pub fn ml_ratio_estimate(bound_times: &[f64], panel: &LigandPanel) -> Result<RatioEstimate> {
    if bound_times.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(&t) = bound_times.iter().find(|&&t| !(t >= 0.0)) {
        return Err(Error::Domain(format!("bound time must be non-negative, got {t}")));
    }
    let ll = |a: f64| -> f64 { bound_times.iter().map(|&t| ln_density(t, a, panel)).sum() };
    let (mut alpha_hat, mut best) = golden_max(ll, 0.0, 1.0, 1e-6);
    for edge in [0.0, 1.0] {
        let v = ll(edge);
        if v > best {
            best = v;
            alpha_hat = edge;
        }
    }
    let receptors = ReceptorArray::new(bound_times.len() as u64)?;
    let info = fisher_rsk_optimal(alpha_hat, panel, &receptors)?;
    let variance = if info > 0.0 { 1.0 / info } else { f64::INFINITY };
    Ok(RatioEstimate { alpha_hat, variance })
}

/// `ĉ = K_D p̂ / (1 - p̂)` with `p̂ = n_B / N_R`.
pub fn csk_concentration_estimate(n_bound: u64, receptors: &ReceptorArray, ligand: &LigandType) -> Result<f64> {
    let n = receptors.count();
    if n_bound > n {
        return Err(Error::CountMismatch {
            got: n_bound,
            expected: n,
        });
    }
    if n_bound == n {
        return Err(Error::Saturated(n));
    }
    Ok(ligand.kd() * n_bound as f64 / (n - n_bound) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{bound_probability_single, sample_bound_times};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn panel(gamma: f64) -> LigandPanel {
        LigandPanel::from_gamma(20.0, 5.0, gamma).unwrap()
    }

    #[test]
    fn s_matrix_at_unit_v() {
        let p = panel(2.0);
        let w = build_mom_weights(&p, &ThresholdScheme::new(1.0, &p).unwrap()).unwrap();
        let s = w.s();
        assert!((s[1][0] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((s[1][1] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s[0][0] - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((s[0][1] - 0.393_469_340_287_366_6).abs() < 1e-15);
        for j in 0..2 {
            assert!((s[0][j] + s[1][j] - 1.0).abs() < 1e-15);
        }
        let ws = w.w();
        for i in 0..2 {
            for j in 0..2 {
                let prod = ws[i][0] * s[0][j] + ws[i][1] * s[1][j];
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((prod - id).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identical_ligands_are_singular() {
        let p = panel(1.0);
        let s = ThresholdScheme::new(1.0, &p).unwrap();
        assert!(matches!(build_mom_weights(&p, &s), Err(Error::SingularMatrix(_))));
        let r = ReceptorArray::new(1000).unwrap();
        assert!(optimize_threshold(&p, &r, &default_alpha_grid()).is_err());
    }

    #[test]
    fn exact_counts_recover_ratio() {
        let p = panel(2.0);
        let r = ReceptorArray::new(1000).unwrap();
        let scheme = ThresholdScheme::new(1.0, &p).unwrap();
        let w = build_mom_weights(&p, &scheme).unwrap();
        // non-integer expected counts go through the same linear map
        let probs = w.interval_probabilities(0.5);
        let alpha = (probs[0] * 1000.0 * w.w()[0][0] + probs[1] * 1000.0 * w.w()[0][1]) / 1000.0;
        assert!((alpha - 0.5).abs() < 1e-12);
        let a0 = w.interval_probabilities(0.0);
        let alpha0 = a0[0] * w.w()[0][0] + a0[1] * w.w()[0][1];
        assert!(alpha0.abs() < 1e-12);
        let second = probs[0] * w.w()[1][0] + probs[1] * w.w()[1][1];
        assert!((alpha + second - 1.0).abs() < 1e-12);
        assert!(matches!(
            mom_ratio_estimate([10, 20], &w, &r),
            Err(Error::CountMismatch { got: 30, .. })
        ));
    }

    #[test]
    fn variance_closed_form_and_scaling() {
        let p = panel(2.0);
        let scheme = ThresholdScheme::new(1.0, &p).unwrap();
        let r1 = ReceptorArray::new(1000).unwrap();
        let r2 = ReceptorArray::new(2000).unwrap();
        let v1 = mom_estimator_variance(0.3, &p, &scheme, &r1).unwrap();
        let v2 = mom_estimator_variance(0.3, &p, &scheme, &r2).unwrap();
        assert!((v1 / v2 - 2.0).abs() < 1e-12);
        let (a, b) = ((-1.0f64).exp(), (-0.5f64).exp());
        let pl = 0.3 * a + 0.7 * b;
        let closed = pl * (1.0 - pl) / (1000.0 * (b - a).powi(2));
        assert!((v1 - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn degenerate_binomial_has_zero_variance() {
        // a vanishing threshold makes every event long, so p = (0, 1)
        let w = MomWeights {
            s: [[0.0, 0.5], [1.0, 0.5]],
            w: [[-1.0, 1.0], [2.0, 0.0]],
        };
        assert_eq!(mom_variance_from_weights(1.0, &w, 100.0), 0.0);
    }

    #[test]
    fn threshold_is_locally_optimal() {
        let p = panel(2.0);
        let r = ReceptorArray::new(1000).unwrap();
        let grid = default_alpha_grid();
        let s = optimize_threshold(&p, &r, &grid).unwrap();
        let v = s.v();
        assert!(v > 0.01 && v < 10.0, "{v}");
        let at = |x| mean_variance(x, &p, &r, &grid).unwrap();
        assert!(at(v) <= at(0.5 * v) && at(v) <= at(2.0 * v));
        assert!((s.threshold() - v / 10.0).abs() < 1e-15);
        let single = optimize_threshold(&p, &r, &[0.5]).unwrap();
        assert!(single.v().is_finite());
        let p10 = panel(10.0);
        let s10 = optimize_threshold(&p10, &r, &grid).unwrap();
        assert!((s10.v() - v).abs() > 0.05);
    }

    #[test]
    fn ml_estimate_matches_grid_search() {
        let p = panel(2.0);
        let taus = [1.0 / p.k1_off(), 1.0 / p.k2_off()];
        let est = ml_ratio_estimate(&taus, &p).unwrap();
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=10_000 {
            let a = i as f64 / 10_000.0;
            let v: f64 = taus.iter().map(|&t| ln_density(t, a, &p)).sum();
            if v > best.1 {
                best = (a, v);
            }
        }
        assert!((est.alpha_hat - best.0).abs() < 1e-4, "{} vs {}", est.alpha_hat, best.0);
        assert_eq!(ml_ratio_estimate(&[], &p), Err(Error::EmptySamples));
    }

    #[test]
    fn ml_estimate_pure_component_hits_boundary() {
        let p = panel(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = ReceptorArray::new(2000).unwrap();
        let taus = sample_bound_times(1.0, &p, &r, &mut rng).unwrap();
        let est = ml_ratio_estimate(&taus, &p).unwrap();
        assert!(est.alpha_hat > 0.95, "{}", est.alpha_hat);
    }

    #[test]
    fn csk_estimator_values() {
        let l = LigandType::from_kd(20.0, 0.5).unwrap();
        let r = ReceptorArray::new(1000).unwrap();
        assert_eq!(csk_concentration_estimate(0, &r, &l).unwrap(), 0.0);
        assert_eq!(csk_concentration_estimate(500, &r, &l).unwrap(), 0.5);
        let c = csk_concentration_estimate(100, &r, &l).unwrap();
        assert!((c - 0.5 / 9.0).abs() < 1e-15);
        assert_eq!(csk_concentration_estimate(1000, &r, &l), Err(Error::Saturated(1000)));
        // round trip where p_B N_R is integral: c = K_D / 4 gives p = 0.2
        let n_b = (bound_probability_single(0.125, &l).unwrap() * 1000.0).round() as u64;
        assert!((csk_concentration_estimate(n_b, &r, &l).unwrap() - 0.125).abs() < 1e-15);
    }
}
