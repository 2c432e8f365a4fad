//! Adaptive Gauss–Kronrod (7/15) quadrature and uniform-grid trapezoid.
//!
//! The adaptive routine keeps a pool of subintervals and always bisects the
//! one with the largest error estimate, stopping once the summed estimate is
//! below `max(abs_tol, rel_tol * |I|)`.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the 7-point rule; nodes are XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subintervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subintervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-10,
            max_subintervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, ..Self::default() }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// `f` is never evaluated at `a` or `b`, so integrable endpoint
/// singularities are allowed.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subintervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let (v0, e0) = gk15(&f, lo, hi);
    // (error, a, b, value)
    let mut pool: Vec<(f64, f64, f64, f64)> = vec![(e0, lo, hi, v0)];
    let mut total = v0;
    let mut err = e0;

    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "integrand produced non-finite value on [{lo}, {hi}]"
            )));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            break;
        }
        if pool.len() >= tol.max_subintervals {
            return Err(Error::Quadrature(format!(
                "{} subintervals exhausted on [{lo}, {hi}]: estimate {total:e}, error {err:e}",
                pool.len()
            )));
        }
        let (idx, _) = pool
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .expect("pool is never empty");
        let (e, a0, b0, v) = pool.swap_remove(idx);
        let mid = 0.5 * (a0 + b0);
        if mid <= a0 || mid >= b0 {
            // interval collapsed to adjacent floats; accept what we have
            pool.push((0.0, a0, b0, v));
            err -= e;
            continue;
        }
        let (vl, el) = gk15(&f, a0, mid);
        let (vr, er) = gk15(&f, mid, b0);
        total += vl + vr - v;
        err += el + er - e;
        pool.push((el, a0, mid, vl));
        pool.push((er, mid, b0, vr));
    }

    // re-sum to shed accumulated cancellation from the running updates
    let value: f64 = pool.iter().map(|p| p.3).sum();
    let error: f64 = pool.iter().map(|p| p.0).sum();
    Ok(Integral {
        value: sign * value,
        error,
        subintervals: pool.len(),
    })
}

/// Trapezoidal rule on a uniform grid with spacing `h`.
pub fn trapezoid_uniform(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (0.5 * (values[0] + values[n - 1]) + inner)
        }
    }
}

/// `n` uniformly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x + 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 12.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::relative(1e-9)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(f64::exp, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((r.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_peak() {
        let s = 1e-3;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp();
        let r = integrate(f, 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!(((r.value - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let xs = linspace(0.0, 1.0, 11);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid_uniform(&ys, 0.1) - 2.0).abs() < 1e-14);
        assert_eq!(*xs.last().unwrap(), 1.0);
    }
}
