//! Fisher information of the three receiver models, Jeffreys-prior input
//! distributions and the asymptotic capacity `log2(∫√I dx / √(2πe))`.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::estimators::ThresholdScheme;
use crate::kinetics::{check_ratio, LigandPanel, LigandType, ReceptorArray};
use crate::quadrature::{integrate, linspace, trapezoid_uniform, Tolerance};

pub const DEFAULT_GRID: usize = 1001;
const MIN_GRID: usize = 101;
/// Largest receptor count for which the explicit binomial sums are offered.
pub const MAX_EXPLICIT_SUM: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverModel {
    RskOptimal,
    RskSuboptimal,
    Csk,
}

impl ReceiverModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RskOptimal => "rsk-opt",
            Self::RskSuboptimal => "rsk-sub",
            Self::Csk => "csk",
        }
    }
}

impl std::str::FromStr for ReceiverModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsk-opt" => Ok(Self::RskOptimal),
            "rsk-sub" => Ok(Self::RskSuboptimal),
            "csk" => Ok(Self::Csk),
            other => Err(Error::InvalidParameter(format!(
                "unknown receiver model '{other}' (expected rsk-opt, rsk-sub or csk)"
            ))),
        }
    }
}

/// Fisher information about `alpha` carried by one bound-time sample per
/// receptor.
///
/// With `u = e^{-k2 τ}` the information per sample becomes
/// `∫_0^1 (γ u^{γ-1} - 1)² / (1 - α + α γ u^{γ-1}) du`, which no longer
/// depends on `k2` and has no infinite range. At `alpha = 1` the integral
/// has the closed form `(1-γ)² / (γ (2-γ))` for `γ < 2` and diverges for
/// `γ ≥ 2`, in which case `+∞` is returned.
pub fn fisher_rsk_optimal(alpha: f64, panel: &LigandPanel, receptors: &ReceptorArray) -> Result<f64> {
    check_ratio(alpha)?;
    let g = panel.gamma();
    let n = receptors.count_f64();
    if g == 1.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return Ok(if g >= 2.0 {
            f64::INFINITY
        } else {
            n * (1.0 - g).powi(2) / (g * (2.0 - g))
        });
    }
    let e = g - 1.0;
    let f = |u: f64| {
        let x = g * u.powf(e);
        (x - 1.0).powi(2) / (1.0 - alpha + alpha * x)
    };
    // below u* the denominator is dominated by 1 - α; splitting there keeps
    // the adaptive rule from hunting for the knee
    let knee = if alpha > 0.0 {
        ((1.0 - alpha) / (alpha * g)).powf(1.0 / e)
    } else {
        1.0
    };
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_subintervals: 4000,
    };
    let per_sample = if knee > 1e-300 && knee < 1.0 {
        integrate(f, 0.0, knee, tol)?.value + integrate(f, knee, 1.0, tol)?.value
    } else {
        integrate(f, 0.0, 1.0, tol)?.value
    };
    Ok(n * per_sample)
}

fn long_probabilities(panel: &LigandPanel, scheme: &ThresholdScheme) -> (f64, f64) {
    let t = scheme.threshold();
    ((-panel.k1_off() * t).exp(), (-panel.k2_off() * t).exp())
}

fn long_event_probability(alpha: f64, panel: &LigandPanel, scheme: &ThresholdScheme) -> Result<f64> {
    check_ratio(alpha)?;
    let (a, b) = long_probabilities(panel, scheme);
    let p = alpha * a + (1.0 - alpha) * b;
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::SingularInformation(format!(
            "long-event probability {p} is degenerate"
        )));
    }
    Ok(p)
}

/// Fisher information of the thresholded count `n_T ~ Bin(N_R, p_T)`.
pub fn fisher_rsk_suboptimal(
    alpha: f64,
    panel: &LigandPanel,
    scheme: &ThresholdScheme,
    receptors: &ReceptorArray,
) -> Result<f64> {
    let p = long_event_probability(alpha, panel, scheme)?;
    let (a, b) = long_probabilities(panel, scheme);
    Ok((a - b).powi(2) * receptors.count_f64() / (p * (1.0 - p)))
}

/// `E[(n/p - (N-n)/(1-p))²]` under `Bin(N, p)`, summed term by term.
fn binomial_score_second_moment(n: u64, p: f64) -> Result<f64> {
    if n > MAX_EXPLICIT_SUM {
        return Err(Error::InvalidParameter(format!(
            "explicit binomial sum limited to {MAX_EXPLICIT_SUM} receptors, got {n}"
        )));
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let nf = n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let w = (ln_binomial(n, k) + kf * lp + (nf - kf) * lq).exp();
        let score = kf / p - (nf - kf) / (1.0 - p);
        sum += w * score * score;
    }
    Ok(sum)
}

/// Same quantity as [`fisher_rsk_suboptimal`] from the explicit expectation
/// over all binomial outcomes.
pub fn fisher_rsk_suboptimal_sum(
    alpha: f64,
    panel: &LigandPanel,
    scheme: &ThresholdScheme,
    receptors: &ReceptorArray,
) -> Result<f64> {
    let p = long_event_probability(alpha, panel, scheme)?;
    let (a, b) = long_probabilities(panel, scheme);
    Ok((a - b).powi(2) * binomial_score_second_moment(receptors.count(), p)?)
}

/// `N_R K_D / (c (c + K_D)²)`; `+∞` at `c = 0`.
pub fn fisher_csk(c: f64, ligand: &LigandType, receptors: &ReceptorArray) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("concentration must be non-negative, got {c}")));
    }
    if c == 0.0 {
        return Ok(f64::INFINITY);
    }
    let k = ligand.kd();
    Ok(receptors.count_f64() * k / (c * (c + k).powi(2)))
}

pub fn fisher_csk_sum(c: f64, ligand: &LigandType, receptors: &ReceptorArray) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::SingularInformation(format!("explicit sum needs c > 0, got {c}")));
    }
    let k = ligand.kd();
    let p = c / (c + k);
    let dp = k / (c + k).powi(2);
    Ok(dp * dp * binomial_score_second_moment(receptors.count(), p)?)
}

/// Fisher information tabulated on a uniform grid.
///
/// `values` are the raw `I(x)` and may hold `+∞` at a singular endpoint.
/// `sqrt_values` are what the trapezoid rule integrates: `√I(x)` at regular
/// points, and at a singular endpoint the value that makes the first
/// trapezoid panel equal the exact integral of `√I` over that panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherCurve {
    pub model: ReceiverModel,
    pub lo: f64,
    pub hi: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sqrt_values: Vec<f64>,
}

impl FisherCurve {
    /// Tabulates `info` on `grid_size` points. Endpoints where `info` is
    /// infinite get the panel-mass correction.
    pub fn tabulate<F>(model: ReceiverModel, lo: f64, hi: f64, grid_size: usize, info: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        if grid_size < MIN_GRID {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_GRID} points, got {grid_size}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!("bad domain [{lo}, {hi}]")));
        }
        let grid = linspace(lo, hi, grid_size);
        let values = grid.iter().map(|&x| info(x)).collect::<Result<Vec<_>>>()?;
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::SingularInformation(format!(
                "negative or undefined Fisher value {v}"
            )));
        }
        let h = (hi - lo) / (grid_size - 1) as f64;
        let mut sqrt_values: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
        let last = grid_size - 1;
        for (end, neighbor, dir) in [(0usize, 1usize, 1.0), (last, last - 1, -1.0)] {
            if values[end].is_infinite() {
                if values[neighbor].is_infinite() {
                    return Err(Error::SingularInformation(
                        "Fisher information infinite away from the boundary".into(),
                    ));
                }
                let x0 = grid[end];
                // x = x0 ± h w² absorbs an x^{-1/2}-type endpoint singularity
                let mass = integrate(
                    |w| {
                        let x = x0 + dir * h * w * w;
                        match info(x) {
                            // x rounded onto the endpoint; the transformed
                            // integrand vanishes there
                            Ok(v) if v.is_infinite() => 0.0,
                            Ok(v) => v.sqrt() * 2.0 * h * w,
                            Err(_) => f64::NAN,
                        }
                    },
                    0.0,
                    1.0,
                    Tolerance::relative(1e-9),
                )?
                .value;
                sqrt_values[end] = 2.0 * mass / h - sqrt_values[neighbor];
            }
        }
        Ok(Self {
            model,
            lo,
            hi,
            grid,
            values,
            sqrt_values,
        })
    }

    /// Optimal-receiver curve over the ratio of the ligand the panel was
    /// built with first.
    pub fn rsk_optimal(panel: &LigandPanel, receptors: &ReceptorArray, grid_size: usize) -> Result<Self> {
        Self::tabulate(ReceiverModel::RskOptimal, 0.0, 1.0, grid_size, |x| {
            fisher_rsk_optimal(panel.caller_to_canonical(x), panel, receptors)
        })
    }

    pub fn rsk_suboptimal(
        panel: &LigandPanel,
        scheme: &ThresholdScheme,
        receptors: &ReceptorArray,
        grid_size: usize,
    ) -> Result<Self> {
        if panel.gamma() == 1.0 {
            return Self::tabulate(ReceiverModel::RskSuboptimal, 0.0, 1.0, grid_size, |_| Ok(0.0));
        }
        Self::tabulate(ReceiverModel::RskSuboptimal, 0.0, 1.0, grid_size, |x| {
            fisher_rsk_suboptimal(panel.caller_to_canonical(x), panel, scheme, receptors)
        })
    }

    pub fn csk(ligand: &LigandType, receptors: &ReceptorArray, c_max: f64, grid_size: usize) -> Result<Self> {
        if !(c_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maximum concentration must be positive, got {c_max}"
            )));
        }
        Self::tabulate(ReceiverModel::Csk, 0.0, c_max, grid_size, |c| {
            fisher_csk(c, ligand, receptors)
        })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.grid.len() - 1) as f64
    }

    /// Trapezoid estimate of `∫ √I dx`.
    pub fn sqrt_integral(&self) -> f64 {
        trapezoid_uniform(&self.sqrt_values, self.step())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDistribution {
    pub model: ReceiverModel,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

pub fn optimal_input_distribution(curve: &FisherCurve) -> Result<InputDistribution> {
    let z = curve.sqrt_integral();
    if !(z > 0.0) {
        return Err(Error::NoInformation);
    }
    Ok(InputDistribution {
        model: curve.model,
        grid: curve.grid.clone(),
        density: curve.sqrt_values.iter().map(|v| v / z).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityResult {
    /// `None` marks the no-information channel (`∫√I = 0`).
    pub bits_per_use: Option<f64>,
    pub fisher_integral: f64,
    pub model: ReceiverModel,
}

pub fn approximate_capacity(curve: &FisherCurve) -> CapacityResult {
    let integral = curve.sqrt_integral();
    let bits = if integral > 0.0 {
        Some((integral / (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).log2())
    } else {
        None
    };
    CapacityResult {
        bits_per_use: bits,
        fisher_integral: integral,
        model: curve.model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{default_alpha_grid, optimize_threshold};

    fn panel(g: f64) -> LigandPanel {
        LigandPanel::from_gamma(20.0, 5.0, g).unwrap()
    }

    fn nr(n: u64) -> ReceptorArray {
        ReceptorArray::new(n).unwrap()
    }

    #[test]
    fn rsk_closed_forms_at_pure_ratios() {
        for &g in &[1.3, 2.0, 5.0] {
            let p = panel(g);
            let at0 = fisher_rsk_optimal(0.0, &p, &nr(1000)).unwrap();
            let want = 1000.0 * (g - 1.0).powi(2) / (2.0 * g - 1.0);
            assert!((at0 - want).abs() < 1e-9 * want, "gamma {g}: {at0} vs {want}");
        }
        let near = fisher_rsk_optimal(1.0 - 1e-9, &panel(1.5), &nr(1)).unwrap();
        let at1 = fisher_rsk_optimal(1.0, &panel(1.5), &nr(1)).unwrap();
        assert!((near - at1).abs() < 1e-3 * at1);
        assert!(fisher_rsk_optimal(1.0, &panel(2.0), &nr(1)).unwrap().is_infinite());
    }

    #[test]
    fn rsk_matches_untransformed_integral() {
        let p = panel(2.0);
        let (k2, g, a) = (5.0, 2.0, 0.5);
        let direct = integrate(
            |t: f64| {
                let e = ((1.0 - g) * k2 * t).exp();
                k2 * (g * e - 1.0).powi(2) / (1.0 - a + a * g * e) * (-k2 * t).exp()
            },
            0.0,
            50.0 / k2,
            Tolerance::relative(1e-12),
        )
        .unwrap()
        .value;
        let got = fisher_rsk_optimal(a, &p, &nr(1)).unwrap();
        assert!((got - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn rsk_trivial_properties() {
        assert_eq!(fisher_rsk_optimal(0.4, &panel(1.0), &nr(1000)).unwrap(), 0.0);
        let a = fisher_rsk_optimal(0.3, &panel(3.0), &nr(500)).unwrap();
        let b = fisher_rsk_optimal(0.3, &panel(3.0), &nr(1000)).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn suboptimal_sum_matches_closed_form() {
        let p = panel(2.0);
        let s = ThresholdScheme::new(1.0, &p).unwrap();
        let closed = fisher_rsk_suboptimal(0.3, &p, &s, &nr(100)).unwrap();
        let sum = fisher_rsk_suboptimal_sum(0.3, &p, &s, &nr(100)).unwrap();
        assert!(((closed - sum) / closed).abs() < 1e-9);
        assert_eq!(fisher_rsk_suboptimal(0.3, &panel(1.0), &s, &nr(100)).unwrap(), 0.0);
    }

    #[test]
    fn suboptimal_never_beats_optimal() {
        let p = panel(2.0);
        let r = nr(1000);
        let s = optimize_threshold(&p, &r, &default_alpha_grid()).unwrap();
        for &a in &default_alpha_grid() {
            let sub = fisher_rsk_suboptimal(a, &p, &s, &r).unwrap();
            let opt = fisher_rsk_optimal(a, &p, &r).unwrap();
            assert!(sub <= opt * (1.0 + 1e-12), "alpha {a}: {sub} > {opt}");
        }
    }

    #[test]
    fn csk_values() {
        let l = LigandType::from_kd(20.0, 0.5).unwrap();
        let v = fisher_csk(0.5, &l, &nr(1000)).unwrap();
        assert!((v - 1000.0).abs() < 1e-12);
        let sum = fisher_csk_sum(0.5, &l, &nr(1000)).unwrap();
        assert!(((v - sum) / v).abs() < 1e-9);
        assert!(fisher_csk(0.0, &l, &nr(10)).unwrap().is_infinite());
        assert!(fisher_csk(1.0, &l, &nr(1000)).unwrap() < v);
        let double = fisher_csk(0.5, &l, &nr(2000)).unwrap();
        assert_eq!(double, 2.0 * v);
    }

    #[test]
    fn csk_capacity_against_antiderivative() {
        let l = LigandType::from_kd(20.0, 0.5).unwrap();
        let r = nr(1000);
        let c_max = 10.0 * 0.5;
        let curve = FisherCurve::csk(&l, &r, c_max, DEFAULT_GRID).unwrap();
        let exact = 2.0 * 1000f64.sqrt() * (c_max / 0.5f64).sqrt().atan();
        let got = curve.sqrt_integral();
        assert!(((got - exact) / exact).abs() < 2e-3, "{got} vs {exact}");
        let dist = optimal_input_distribution(&curve).unwrap();
        assert!((trapezoid_uniform(&dist.density, curve.step()) - 1.0).abs() < 1e-9);
        assert!(dist.density.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn no_information_sentinel() {
        let curve = FisherCurve::rsk_optimal(&panel(1.0), &nr(1000), DEFAULT_GRID).unwrap();
        assert!(curve.values.iter().all(|&v| v == 0.0));
        let cap = approximate_capacity(&curve);
        assert_eq!(cap.bits_per_use, None);
        assert_eq!(cap.fisher_integral, 0.0);
        assert_eq!(optimal_input_distribution(&curve), Err(Error::NoInformation));
    }

    #[test]
    fn constant_information_gives_uniform_density() {
        let curve = FisherCurve::tabulate(ReceiverModel::Csk, 0.0, 2.0, 201, |_| Ok(4.0)).unwrap();
        let d = optimal_input_distribution(&curve).unwrap();
        assert!(d.density.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn mirrored_gamma_gives_mirrored_density() {
        let r = nr(1000);
        let a = FisherCurve::rsk_optimal(&panel(3.0), &r, 201).unwrap();
        let b = FisherCurve::rsk_optimal(&panel(1.0 / 3.0), &r, 201).unwrap();
        let da = optimal_input_distribution(&a).unwrap().density;
        let db = optimal_input_distribution(&b).unwrap().density;
        for i in 0..da.len() {
            let j = da.len() - 1 - i;
            assert!((da[i] - db[j]).abs() < 1e-9 * da[i].max(1.0));
        }
    }
}
