//! Modified Bessel function of the third kind and GIG moments.
//!
//! `K_nu` is evaluated in log scale. For the fractional order
//! `mu = nu - round(nu)` the pair `K_mu, K_{mu+1}` comes from Temme's series
//! (`x <= 2`) or Steed's continued fraction (`x > 2`); higher orders follow
//! from the upward recurrence carried on the ratio `K_{m+1}/K_m`, which never
//! overflows even when `K_nu` itself would.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

const PI: f64 = core::f64::consts::PI;
const EPS: f64 = f64::EPSILON;
const MAX_ITER: usize = 10_000;

/// Taylor coefficients of `1/Γ(z)` about zero, `c[k]` multiplying `z^k`.
const RGAMMA_TAYLOR: [f64; 31] = [
    0.0,
    1.0,
    0.577_215_664_901_532_860_606_5,
    -0.655_878_071_520_253_881_077,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_501_7,
    -0.042_197_734_555_544_336_748_21,
    -0.009_621_971_527_876_973_562_115,
    0.007_218_943_246_663_099_542_395,
    -0.001_165_167_591_859_065_112_114,
    -0.000_215_241_674_114_950_972_815_7,
    0.000_128_050_282_388_116_186_153_2,
    -0.000_020_134_854_780_788_238_655_69,
    -0.000_001_250_493_482_142_670_657_345,
    0.000_001_133_027_231_981_695_882_374,
    -2.056_338_416_977_607_103_45e-7,
    6.116_095_104_481_415_817_862e-9,
    5.002_007_644_469_222_930_056e-9,
    -1.181_274_570_487_020_144_588e-9,
    1.043_426_711_691_100_510_492e-10,
    7.782_263_439_905_071_254_05e-12,
    -3.696_805_618_642_205_708_188e-12,
    5.100_370_287_454_475_979_015e-13,
    -2.058_326_053_566_506_783_222e-14,
    -5.348_122_539_423_017_982_37e-15,
    1.226_778_628_238_260_790_159e-15,
    -1.181_259_301_697_458_769_514e-16,
    1.186_692_254_751_600_332_58e-18,
    1.412_380_655_318_031_781_556e-18,
    -2.298_745_684_435_370_206_592e-19,
    1.714_406_321_927_337_433_384e-20,
];

/// Parameters of a generalized inverse Gaussian law with density
/// proportional to `x^{nu-1} exp(-(a x + b / x) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl GigParams {
    pub fn new(a: f64, b: f64, nu: f64) -> Result<Self> {
        let p = GigParams { a, b, nu };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Domain("GIG rate `a` must be positive and finite"));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::Domain("GIG rate `b` must be positive and finite"));
        }
        if !self.nu.is_finite() {
            return Err(Error::Domain("GIG index `nu` must be finite"));
        }
        Ok(())
    }
}

/// Temme's auxiliary gamma quantities for `|mu| <= 1/2`:
/// `(gam1, gam2, 1/Γ(1+mu), 1/Γ(1-mu))`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Γ(1+mu) = Σ c_k mu^{k-1}; split into even and odd powers of mu.
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let m2 = mu * mu;
    for k in (1..RGAMMA_TAYLOR.len()).rev() {
        if k % 2 == 0 {
            gam1 = gam1 * m2 - RGAMMA_TAYLOR[k];
        } else {
            gam2 = gam2 * m2 + RGAMMA_TAYLOR[k];
        }
    }
    // gam1 = (1/Γ(1-mu) - 1/Γ(1+mu)) / (2 mu), gam2 = (1/Γ(1-mu) + 1/Γ(1+mu)) / 2
    let rgam_plus = gam2 - mu * gam1;
    let rgam_minus = gam2 + mu * gam1;
    (gam1, gam2, rgam_plus, rgam_minus)
}

/// `(ln K_mu(x), K_{mu+1}(x)/K_mu(x))` via Temme's series, `|mu| <= 1/2`, `x <= 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -half.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, rgam_plus, rgam_minus) = temme_gamma(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / rgam_plus;
    let mut q = 0.5 / (ee * rgam_minus);
    let mut c = 1.0;
    let dd = half * half;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    let k_mu = sum;
    let k_mu1 = sum1 * 2.0 / x;
    (k_mu.ln(), k_mu1 / k_mu)
}

/// Steed's continued fraction (Temme's CF2) for `|mu| <= 1/2`, `x > 2`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let log_k = 0.5 * (PI / (2.0 * x)).ln() - s.ln() - x;
    let ratio = (mu + x + 0.5 - h) / x;
    (log_k, ratio)
}

/// `(ln K_nu(x), K_{nu+1}(x) / K_nu(x))` for `nu >= 0`, `x > 0` finite.
fn log_k_and_ratio(nu: f64, x: f64) -> (f64, f64) {
    let n = (nu + 0.5).floor();
    let mu = nu - n;
    let (mut log_k, mut ratio) = if x <= 2.0 { temme_series(mu, x) } else { steed_cf2(mu, x) };
    let steps = n as usize;
    for k in 0..steps {
        log_k += ratio.ln();
        ratio = 2.0 * (mu + k as f64 + 1.0) / x + 1.0 / ratio;
    }
    (log_k, ratio)
}

fn check_args(nu: f64, x: f64) -> Result<()> {
    if !nu.is_finite() {
        return Err(Error::Domain("Bessel order must be finite"));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain("Bessel argument must be positive and finite"));
    }
    Ok(())
}

/// Natural log of the modified Bessel function of the third kind, `ln K_nu(x)`.
///
/// Accepts any finite real order (`K_{-nu} = K_nu`) and any positive finite
/// argument; the result stays finite where `K_nu(x)` itself would under- or
/// overflow.
pub fn log_bessel_k(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    Ok(log_k_and_ratio(nu.abs(), x).0)
}

/// `ln K` at orders `nu - 1`, `nu` and `nu + 1` sharing one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogBesselTriple {
    pub down: f64,
    pub at: f64,
    pub up: f64,
}

pub(crate) fn log_bessel_k_triple(nu: f64, x: f64) -> Result<LogBesselTriple> {
    check_args(nu, x)?;
    let (at, ratio) = log_k_and_ratio(nu.abs(), x);
    // On the far side of zero the neighbouring order is |nu| + 1 again.
    let far = log_k_and_ratio((nu.abs() - 1.0).abs(), x).0;
    let near = at + ratio.ln();
    let (down, up) = if nu >= 0.0 { (far, near) } else { (near, far) };
    if !(down.is_finite() && at.is_finite() && up.is_finite()) {
        return Err(Error::Overflow(x));
    }
    Ok(LogBesselTriple { down, at, up })
}

/// `E[W]` and `E[1/W]` for `W ~ GIG(a, b, nu)` given the Bessel triple at `sqrt(ab)`.
pub(crate) fn gig_moments_from_triple(p: &GigParams, k: &LogBesselTriple) -> (f64, f64) {
    let scale = (p.b / p.a).sqrt();
    let e_w = scale * (k.up - k.at).exp();
    // sqrt(a/b) K_{nu+1}/K_nu - 2 nu / b rewritten through K_{nu+1} = K_{nu-1} + (2 nu/s) K_nu,
    // which removes the cancellation between the two terms when b is small.
    let e_inv_w = (k.down - k.at).exp() / scale;
    (e_w, e_inv_w)
}

/// Expected value of `W` and of `1/W` under a GIG law.
pub fn gig_expectations(p: &GigParams) -> Result<(f64, f64)> {
    p.validate()?;
    let s = (p.a * p.b).sqrt();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Overflow(s));
    }
    let k = log_bessel_k_triple(p.nu, s)?;
    let (e_w, e_inv_w) = gig_moments_from_triple(p, &k);
    if !(e_w.is_finite() && e_inv_w.is_finite() && e_w > 0.0 && e_inv_w > 0.0) {
        return Err(Error::Overflow(s));
    }
    Ok((e_w, e_inv_w))
}
