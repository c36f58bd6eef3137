//! Brute-force numerical references for the salmix test suites.
//!
//! Everything here is deliberately independent of `salmix-core`: integrals
//! are evaluated by global adaptive Gauss-Kronrod quadrature straight from
//! the defining integral representations, and the little bit of linear
//! algebra needed (a dense Cholesky) is written out again locally.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Global adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Seed with a handful of panels so narrow features are not missed.
    let seeds = 8;
    let mut pieces: Vec<(f64, f64, f64, f64)> = (0..seeds)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / seeds as f64;
            let hi = a + (b - a) * (k + 1) as f64 / seeds as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..20_000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    pieces.iter().map(|p| p.2).sum()
}

/// `ln ∫ exp(log_f(s)) ds` over the real line for a unimodal-ish log-integrand.
///
/// The mode is located on a coarse grid over `[lo, hi]`, the support is
/// trimmed where the integrand falls 80 nats below the mode, and the
/// shifted integrand is integrated adaptively.
pub fn log_integrate_line<F: Fn(f64) -> f64>(log_f: F, lo: f64, hi: f64) -> f64 {
    let grid = 4000;
    let step = (hi - lo) / grid as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_s = lo;
    for k in 0..=grid {
        let s = lo + step * k as f64;
        let v = log_f(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    assert!(best.is_finite(), "integrand has no finite mode on the search grid");
    let cutoff = best - 80.0;
    let mut left = best_s;
    while left > lo && log_f(left) > cutoff {
        left -= step;
    }
    let mut right = best_s;
    while right < hi && log_f(right) > cutoff {
        right += step;
    }
    let left = left.max(lo);
    let right = right.min(hi);
    let shifted = |s: f64| {
        let v = log_f(s) - best;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    let mut total = 0.0;
    if best_s > left {
        total += integrate(shifted, left, best_s, 1e-14, 0.0);
    }
    if right > best_s {
        total += integrate(shifted, best_s, right, 1e-14, 0.0);
    }
    best + total.ln()
}

fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln K_nu(x)` from the integral representation `∫_0^∞ exp(-x cosh t) cosh(nu t) dt`.
pub fn log_bessel_k(nu: f64, x: f64) -> f64 {
    let log_f = |t: f64| -x * t.cosh() + ln_cosh(nu * t);
    // The integrand peaks near sinh(t) = nu/x and decays doubly-exponentially past it.
    let peak = (nu.abs() / x).asinh();
    let hi = peak + 60.0_f64.max(((700.0 / x).max(1.0)).ln() + 5.0);
    log_integrate_line(log_f, 0.0, hi)
}

/// `(E[X], E[1/X])` of GIG(a, b, nu) as ratios of integrals of the unnormalized density.
pub fn gig_moments(a: f64, b: f64, nu: f64) -> (f64, f64) {
    // Substituting x = e^s turns x^{nu-1} dx into e^{nu s} ds.
    let core = |s: f64, shift: f64| (nu + shift) * s - 0.5 * (a * s.exp() + b * (-s).exp());
    let lo = -60.0;
    let hi = 60.0;
    let log_norm = log_integrate_line(|s| core(s, 0.0), lo, hi);
    let log_first = log_integrate_line(|s| core(s, 1.0), lo, hi);
    let log_inv = log_integrate_line(|s| core(s, -1.0), lo, hi);
    ((log_first - log_norm).exp(), (log_inv - log_norm).exp())
}

/// Lower Cholesky factor of a dense symmetric positive definite matrix (row-major).
pub fn cholesky(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = m.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "matrix not positive definite");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

fn forward_solve(l: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let p = v.len();
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = v[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    y
}

/// Gaussian log-density `ln φ(x | mean, scale·Σ)` with `Σ = l lᵀ`.
fn log_normal_scaled(x: &[f64], mean: &[f64], l: &[Vec<f64>], scale: f64) -> f64 {
    let p = x.len();
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let y = forward_solve(l, &diff);
    let quad: f64 = y.iter().map(|v| v * v).sum::<f64>() / scale;
    let log_det: f64 = 2.0 * l.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>() + p as f64 * scale.ln();
    -0.5 * (p as f64 * (2.0 * PI).ln() + log_det + quad)
}

/// The latent-scale integrand `ln[φ(x | μ + wα, wΣ) e^{-w}]` at `w = e^s`, including the Jacobian `e^s`.
fn log_scale_mixture_integrand(x: &[f64], mu: &[f64], alpha: &[f64], l: &[Vec<f64>], s: f64, power: f64) -> f64 {
    let w = s.exp();
    let mean: Vec<f64> = mu.iter().zip(alpha).map(|(m, a)| m + w * a).collect();
    log_normal_scaled(x, &mean, l, w) - w + s + power * s
}

/// `ln ∫_0^∞ φ(x | μ + wα, wΣ) e^{-w} dw`, the Gaussian scale-mixture form of the SAL density.
pub fn sal_log_density(x: &[f64], mu: &[f64], alpha: &[f64], sigma: &[Vec<f64>]) -> f64 {
    let l = cholesky(sigma);
    log_integrate_line(|s| log_scale_mixture_integrand(x, mu, alpha, &l, s, 0.0), -120.0, 8.0)
}

/// `E[W | x]` under the scale-mixture representation, by quadrature.
pub fn sal_posterior_mean_w(x: &[f64], mu: &[f64], alpha: &[f64], sigma: &[Vec<f64>]) -> f64 {
    let l = cholesky(sigma);
    let log_norm = log_integrate_line(|s| log_scale_mixture_integrand(x, mu, alpha, &l, s, 0.0), -120.0, 8.0);
    let log_first = log_integrate_line(|s| log_scale_mixture_integrand(x, mu, alpha, &l, s, 1.0), -120.0, 8.0);
    (log_first - log_norm).exp()
}

/// Nested adaptive quadrature of `f(x, y)` over a rectangle.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, x: (f64, f64), y: (f64, f64), rel_tol: f64) -> f64 {
    integrate(
        |yy| integrate(|xx| f(xx, yy), x.0, x.1, rel_tol, 1e-14),
        y.0,
        y.1,
        rel_tol,
        1e-12,
    )
}
