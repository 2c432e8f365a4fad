//! Four-level constellation design, ML decision thresholds and the Gaussian
//! symbol error probability.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::optimize::{golden_max, golden_min};
use crate::quadrature::linspace;

pub const M: usize = 4;
const DESIGN_GRID: usize = 101;
const REFINE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolStats {
    pub mean: f64,
    pub variance: f64,
    pub label: usize,
}

impl SymbolStats {
    pub fn new(mean: f64, variance: f64, label: usize) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "symbol {label} needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance, label })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn ln_density(&self, z: f64) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * self.variance).ln() - (z - self.mean).powi(2) / (2.0 * self.variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub levels: [f64; M],
    pub stats: [SymbolStats; M],
    pub thresholds: [f64; M - 1],
}

impl Constellation {
    /// Evaluates the signal map at `levels` and derives the ML thresholds.
    pub fn from_levels<F>(levels: [f64; M], signal_map: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<SymbolStats>,
    {
        if levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(format!(
                "levels must be strictly increasing, got {levels:?}"
            )));
        }
        let mut stats = [SymbolStats {
            mean: 0.0,
            variance: 1.0,
            label: 0,
        }; M];
        for (m, &x) in levels.iter().enumerate() {
            stats[m] = SymbolStats {
                label: m,
                ..signal_map(x)?
            };
        }
        let thresholds = decision_thresholds(&stats)?;
        Ok(Self {
            levels,
            stats,
            thresholds,
        })
    }

    /// Index of the decision region containing `z`.
    pub fn detect(&self, z: f64) -> usize {
        self.thresholds.iter().take_while(|&&t| z > t).count()
    }
}

/// Chernoff distance `g(λ) = -ln ∫ p_a^λ p_b^{1-λ} dz` of two Gaussians.
pub fn chernoff_distance(a: &SymbolStats, b: &SymbolStats, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "Chernoff weight must lie in (0, 1), got {lambda}"
        )));
    }
    Ok(chernoff_unchecked(a, b, lambda))
}

fn chernoff_unchecked(a: &SymbolStats, b: &SymbolStats, lambda: f64) -> f64 {
    let mix = (1.0 - lambda) * a.variance + lambda * b.variance;
    let dm = b.mean - a.mean;
    lambda * (1.0 - lambda) * dm * dm / (2.0 * mix)
        + 0.5 * (mix.ln() - (1.0 - lambda) * a.variance.ln() - lambda * b.variance.ln())
}

/// `min_λ e^{-g(λ)}`; `g` is concave so golden section finds the optimum.
pub fn pairwise_chernoff_bound(a: &SymbolStats, b: &SymbolStats) -> f64 {
    let (_, g) = golden_max(|l| chernoff_unchecked(a, b, l), 0.0, 1.0, 1e-8);
    (-g.max(0.0)).exp()
}

fn compound_metric(s: &[SymbolStats; M]) -> f64 {
    s.windows(2).map(|w| pairwise_chernoff_bound(&w[0], &w[1])).sum()
}

/// Chooses four levels in `[lo, hi]` minimizing the sum of adjacent pairwise
/// Chernoff bounds. The outer levels sit on the domain edges; the inner pair
/// comes from a grid search refined by coordinate descent.
pub fn design_constellation<F>(signal_map: F, lo: f64, hi: f64) -> Result<Constellation>
where
    F: Fn(f64) -> Result<SymbolStats> + Sync,
{
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad design domain [{lo}, {hi}]")));
    }
    let grid = linspace(lo, hi, DESIGN_GRID);
    let stats: Vec<SymbolStats> = grid.iter().map(|&x| signal_map(x)).collect::<Result<_>>()?;
    let nonfinite = |x: [f64; M]| Error::NonFiniteMetric(x);
    let (first, last) = (stats[0], stats[DESIGN_GRID - 1]);
    let bound = |i: usize, j: usize| pairwise_chernoff_bound(&stats[i], &stats[j]);
    let edge_lo: Vec<f64> = (0..DESIGN_GRID).map(|i| bound(0, i)).collect();
    let edge_hi: Vec<f64> = (0..DESIGN_GRID).map(|j| bound(j, DESIGN_GRID - 1)).collect();

    // level sets whose ML crossings come out unordered cannot be detected
    // with three thresholds and are skipped
    let feasible = |s: [SymbolStats; M]| decision_thresholds(&s).is_ok();
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for i in 1..DESIGN_GRID - 2 {
        for j in i + 1..DESIGN_GRID - 1 {
            let m = edge_lo[i] + bound(i, j) + edge_hi[j];
            if !m.is_finite() {
                return Err(nonfinite([lo, grid[i], grid[j], hi]));
            }
            if m < best.0 && feasible([first, stats[i], stats[j], last]) {
                best = (m, i, j);
            }
        }
    }
    if best.1 == 0 {
        return Err(Error::UnorderedThresholds([f64::NAN; 3]));
    }

    let h = grid[1] - grid[0];
    let (mut x2, mut x3) = (grid[best.1], grid[best.2]);
    let metric = |x2: f64, x3: f64| -> f64 {
        match (signal_map(x2), signal_map(x3)) {
            (Ok(s2), Ok(s3)) if x2 < x3 && feasible([first, s2, s3, last]) => compound_metric(&[first, s2, s3, last]),
            _ => f64::INFINITY,
        }
    };
    for _ in 0..100 {
        let (a, b) = ((x2 - h).max(lo), (x2 + h).min(x3));
        let (n2, _) = golden_min(|x| metric(x, x3), a, b, 1e-8);
        let (a, b) = ((x3 - h).max(n2), (x3 + h).min(hi));
        let (n3, _) = golden_min(|x| metric(n2, x), a, b, 1e-8);
        let moved = (n2 - x2).abs().max((n3 - x3).abs());
        (x2, x3) = (n2, n3);
        if moved < REFINE_TOL {
            break;
        }
    }
    let levels = [lo, x2, x3, hi];
    if !metric(x2, x3).is_finite() {
        return Err(nonfinite(levels));
    }
    Constellation::from_levels(levels, signal_map)
}

/// ML boundary between two adjacent Gaussians, where their densities cross.
fn crossing(a: &SymbolStats, b: &SymbolStats) -> f64 {
    let (sa, sb) = (a.sd(), b.sd());
    if (sb - sa).abs() < 1e-12 * sb {
        return 0.5 * (a.mean + b.mean);
    }
    let (v0, v1) = (a.variance, b.variance);
    let d = b.mean - a.mean;
    // (v1 - v0) y² + 2 v0 d y - v0 d² - v0 v1 ln(v1/v0) = 0, y = z - μ_a
    let qa = v1 - v0;
    let qb = 2.0 * v0 * d;
    let qc = -v0 * d * d - v0 * v1 * (v1 / v0).ln();
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let roots = [q / qa, qc / q];
    if let Some(&y) = roots.iter().find(|&&y| y > 0.0 && y < d) {
        return a.mean + y;
    }
    let y = (-v0 * d + sa * sb * (d * d + qa * (v1 / v0).ln()).sqrt()) / qa;
    a.mean + y
}

pub fn decision_thresholds(stats: &[SymbolStats; M]) -> Result<[f64; M - 1]> {
    if stats.windows(2).any(|w| !(w[1].mean > w[0].mean)) {
        return Err(Error::UnorderedMeans);
    }
    let t = [
        crossing(&stats[0], &stats[1]),
        crossing(&stats[1], &stats[2]),
        crossing(&stats[2], &stats[3]),
    ];
    if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
        return Err(Error::UnorderedThresholds(t));
    }
    Ok(t)
}

/// Density mismatch `|ln N(z; a) - ln N(z; b)|` at a candidate threshold.
pub fn threshold_residual(a: &SymbolStats, b: &SymbolStats, z: f64) -> f64 {
    (a.ln_density(z) - b.ln_density(z)).abs()
}

/// Average over symbols of the Gaussian mass outside each decision region.
pub fn symbol_error_probability(stats: &[SymbolStats; M], thresholds: &[f64; M - 1]) -> f64 {
    let tail = |x: f64, s: &SymbolStats| erfc(x / (s.sd() * SQRT_2));
    let mut sum = tail(thresholds[0] - stats[0].mean, &stats[0]) + tail(stats[3].mean - thresholds[2], &stats[3]);
    for m in 1..=2 {
        sum += tail(stats[m].mean - thresholds[m - 1], &stats[m]) + tail(thresholds[m] - stats[m].mean, &stats[m]);
    }
    (sum / 8.0).clamp(0.0, 1.0)
}

pub fn analytical_sep(constellation: &Constellation) -> f64 {
    symbol_error_probability(&constellation.stats, &constellation.thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn st(mean: f64, variance: f64) -> SymbolStats {
        SymbolStats::new(mean, variance, 0).unwrap()
    }

    fn gauss_pdf(z: f64, s: &SymbolStats) -> f64 {
        s.ln_density(z).exp()
    }

    /// Exact error of the two-hypothesis ML rule with equal priors.
    fn exact_pairwise_error(a: &SymbolStats, b: &SymbolStats) -> f64 {
        let r = integrate(
            |z| 0.5 * gauss_pdf(z, a).min(gauss_pdf(z, b)),
            a.mean.min(b.mean) - 40.0 * a.sd().max(b.sd()),
            a.mean.max(b.mean) + 40.0 * a.sd().max(b.sd()),
            Tolerance::relative(1e-10),
        )
        .unwrap();
        r.value
    }

    #[test]
    fn chernoff_reductions() {
        let a = st(0.3, 2.0);
        for &l in &[0.1, 0.5, 0.9] {
            assert!(chernoff_distance(&a, &a, l).unwrap().abs() < 1e-15);
        }
        let b = st(1.3, 2.0);
        let g = chernoff_distance(&a, &b, 0.5).unwrap();
        assert!((g - 1.0 / 16.0).abs() < 1e-15);
        assert!(chernoff_distance(&a, &b, 0.0).is_err());
        assert!(chernoff_distance(&a, &b, 1.0).is_err());
        assert!((pairwise_chernoff_bound(&a, &a) - 1.0).abs() < 1e-15);
        assert!((pairwise_chernoff_bound(&a, &b) - (-1.0f64 / 16.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn chernoff_matches_integral() {
        let (a, b) = (st(0.0, 1.0), st(1.0, 4.0));
        let l = 0.3;
        let integral = integrate(
            |z| gauss_pdf(z, &a).powf(l) * gauss_pdf(z, &b).powf(1.0 - l),
            -60.0,
            60.0,
            Tolerance::relative(1e-12),
        )
        .unwrap()
        .value;
        let g = chernoff_distance(&a, &b, l).unwrap();
        assert!((g + integral.ln()).abs() < 1e-6, "{g} vs {}", -integral.ln());
        assert!(pairwise_chernoff_bound(&a, &b) >= exact_pairwise_error(&a, &b));
    }

    #[test]
    fn thresholds_equal_variance_midpoints() {
        let s = [st(0.0, 1.0), st(2.0, 1.0), st(3.0, 1.0), st(7.0, 1.0)];
        assert_eq!(decision_thresholds(&s).unwrap(), [1.0, 2.5, 5.0]);
        let bad = [st(0.0, 1.0), st(2.0, 1.0), st(2.0, 1.0), st(7.0, 1.0)];
        assert_eq!(decision_thresholds(&bad), Err(Error::UnorderedMeans));
    }

    #[test]
    fn threshold_density_equality() {
        let (a, b) = (st(0.0, 1.0), st(1.0, 4.0));
        // the narrow density still dominates at μ_b, so the crossing lies past it
        let z = crossing(&a, &b);
        let want = (-2.0 + (4.0f64 + 12.0 * (1.0 + 4.0 * 4f64.ln())).sqrt()) / 6.0;
        assert!((z - want).abs() < 1e-12, "{z} vs {want}");
        let (pa, pb) = (gauss_pdf(z, &a), gauss_pdf(z, &b));
        assert!(((pa - pb) / pa).abs() < 1e-9);
    }

    #[test]
    fn identical_and_separable_sep() {
        let same = [st(1.0, 1.0); 4];
        assert!((symbol_error_probability(&same, &[1.0, 1.0, 1.0]) - 0.75).abs() < 1e-15);
        let tight = [st(0.0, 1e-12), st(1.0, 1e-12), st(2.0, 1e-12), st(3.0, 1e-12)];
        let t = decision_thresholds(&tight).unwrap();
        assert!(symbol_error_probability(&tight, &t) < 1e-300);
    }

    #[test]
    fn linear_map_gives_equal_spacing() {
        let c = design_constellation(|x| SymbolStats::new(3.0 * x, 0.05, 0), 0.0, 1.0).unwrap();
        for (m, &x) in c.levels.iter().enumerate() {
            assert!((x - m as f64 / 3.0).abs() < 1e-4, "{:?}", c.levels);
        }
    }

    #[test]
    fn sep_matches_gaussian_sampling() {
        let c = design_constellation(|x| SymbolStats::new(x, 0.004 + 0.01 * x, 0), 0.0, 1.0).unwrap();
        let p = analytical_sep(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000u64;
        let mut errors = 0u64;
        for k in 0..draws {
            let m = (k % 4) as usize;
            let s = &c.stats[m];
            let n: f64 = StandardNormal.sample(&mut rng);
            let z = s.mean + s.sd() * n;
            if c.detect(z) != m {
                errors += 1;
            }
        }
        let emp = errors as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((emp - p).abs() < 3.0 * se, "analytical {p}, empirical {emp}");
    }

    #[test]
    fn sep_shrinks_with_variance() {
        let stats = [st(0.0, 0.04), st(0.4, 0.06), st(0.7, 0.09), st(1.0, 0.1)];
        let t = decision_thresholds(&stats).unwrap();
        let mut prev = f64::INFINITY;
        for k in (1..=20).rev() {
            let s = k as f64 / 20.0;
            let scaled = stats.map(|x| st(x.mean, x.variance * s));
            let p = symbol_error_probability(&scaled, &t);
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    fn ordered_stats() -> impl Strategy<Value = [SymbolStats; 4]> {
        (
            -10.0..10.0f64,
            prop::array::uniform3(0.01..5.0f64),
            prop::array::uniform4(0.001..4.0f64),
        )
            .prop_map(|(start, gaps, vars)| {
                let mut mean = start;
                let mut out = [st(0.0, 1.0); 4];
                for m in 0..4 {
                    if m > 0 {
                        mean += gaps[m - 1];
                    }
                    out[m] = SymbolStats::new(mean, vars[m], m).unwrap();
                }
                out
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn thresholds_ordered_and_on_crossings(stats in ordered_stats()) {
            // widely unequal neighbours can push a crossing past the next mean;
            // that is reported rather than silently reordered
            match decision_thresholds(&stats) {
                Ok(t) => {
                    prop_assert!(t[0] < t[1] && t[1] < t[2]);
                    for m in 0..3 {
                        let r = threshold_residual(&stats[m], &stats[m + 1], t[m]);
                        let scale = stats[m].ln_density(t[m]).abs().max(1.0);
                        prop_assert!(r <= 1e-9 * scale, "residual {r}");
                    }
                }
                Err(e) => prop_assert!(matches!(e, Error::UnorderedThresholds(_))),
            }
        }

        #[test]
        fn chernoff_bound_is_valid(m1 in -3.0..3.0f64, m2 in -3.0..3.0f64,
                                   v1 in 0.05..4.0f64, v2 in 0.05..4.0f64) {
            let (a, b) = (st(m1, v1), st(m2, v2));
            prop_assert!(pairwise_chernoff_bound(&a, &b) >= exact_pairwise_error(&a, &b) - 1e-9);
            let h = 1e-3;
            for k in 1..99 {
                let l = k as f64 / 100.0;
                let d2 = chernoff_unchecked(&a, &b, l - h) - 2.0 * chernoff_unchecked(&a, &b, l)
                    + chernoff_unchecked(&a, &b, l + h);
                prop_assert!(d2 <= 1e-9);
            }
        }
    }
}
