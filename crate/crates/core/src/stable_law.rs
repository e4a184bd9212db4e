//! Totally right-skewed (`beta = +1`) alpha-stable laws.
//!
//! Density and distribution function use Zolotarev's integral
//! representation over an angle (Nolan's form for the parameterization that
//! is continuous in `alpha`), integrated adaptively with the integrand split
//! at its peak. Far in the heavy right tail the asymptotic power series is
//! used instead. Quantiles come from bracketed root finding on the CDF and
//! samples from the Chambers–Mallows–Stuck transformation.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::rng::RandomStream;
use crate::solve::{brent, RootTol};
use crate::stats;

/// Standardized distance from the location beyond which the heavy right
/// tail is evaluated by its asymptotic series.
pub const TAIL_SERIES_THRESHOLD: f64 = 50.0;

const QUAD_TOL: Tolerance = Tolerance {
    abs: 1e-12,
    rel: 1e-10,
    max_intervals: 400,
};

/// Which `(gamma, delta)` convention a [`StableDist`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamConvention {
    /// Location-scale family continuous in `alpha` (Nolan's S0).
    Continuous,
    /// The classic characteristic-function convention (Nolan's S1).
    Classic,
}

/// `S(alpha, beta = +1, gamma, delta)` in the given convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableDist {
    alpha: f64,
    gamma: f64,
    delta: f64,
    convention: ParamConvention,
}

impl StableDist {
    pub const SKEW: f64 = 1.0;

    pub fn new(alpha: f64, gamma: f64, delta: f64, convention: ParamConvention) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!("stability index {alpha} outside (0, 2]")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("scale {gamma} must be positive")));
        }
        if !delta.is_finite() {
            return Err(Error::domain("location must be finite"));
        }
        Ok(StableDist {
            alpha,
            gamma,
            delta,
            convention,
        })
    }

    /// `gamma = 1`, `delta = 0` in the continuous convention.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 0.0, ParamConvention::Continuous)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn convention(&self) -> ParamConvention {
        self.convention
    }

    /// Same law, with `delta` re-expressed in `convention`.
    pub fn to_convention(&self, convention: ParamConvention) -> StableDist {
        let shift = location_shift(self.alpha, self.gamma);
        let delta = match (self.convention, convention) {
            (a, b) if a == b => self.delta,
            (ParamConvention::Classic, ParamConvention::Continuous) => self.delta + shift,
            (ParamConvention::Continuous, ParamConvention::Classic) => self.delta - shift,
            _ => unreachable!(),
        };
        StableDist {
            delta,
            convention,
            ..*self
        }
    }

    fn continuous_delta(&self) -> f64 {
        self.to_convention(ParamConvention::Continuous).delta
    }

    fn standardize(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain(format!("stable law evaluated at {x}")));
        }
        Ok((x - self.continuous_delta()) / self.gamma)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        let z = self.standardize(x)?;
        Ok(standard_pdf(self.alpha, 1.0, z)? / self.gamma)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let z = self.standardize(x)?;
        standard_cdf(self.alpha, 1.0, z)
    }

    /// Inverse CDF by bracketed root search; `|cdf(x) - q| <= 1e-10` on return
    /// unless the bracket collapses to floating-point resolution first.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
        let z = standard_quantile(self.alpha, q)?;
        Ok(self.gamma * z + self.continuous_delta())
    }

    /// One Chambers–Mallows–Stuck draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let w: f64 = Exp1.sample(rng);
        let v = PI * (u - 0.5);
        let alpha = self.alpha;
        let z_classic = if alpha == 1.0 {
            let a = FRAC_PI_2 + v;
            (a * v.tan() - (FRAC_PI_2 * w * v.cos() / a).ln()) / FRAC_PI_2
        } else {
            let tan_pa = (FRAC_PI_2 * alpha).tan();
            let b = tan_pa.atan() / alpha;
            let s = (1.0 + tan_pa * tan_pa).powf(0.5 / alpha);
            let t = alpha * (v + b);
            s * t.sin() / v.cos().powf(1.0 / alpha)
                * ((v - t).cos() / w).powf((1.0 - alpha) / alpha)
        };
        // Standard classic draw -> standard continuous draw.
        let z = z_classic - location_shift(alpha, 1.0);
        self.gamma * z + self.continuous_delta()
    }

    pub fn sample(&self, stream: RandomStream, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::precondition("sample size must be at least 1"));
        }
        let mut rng = stream.rng();
        Ok((0..n).map(|_| self.sample_one(&mut rng)).collect())
    }
}

/// `delta_continuous - delta_classic` for `beta = +1`.
fn location_shift(alpha: f64, gamma: f64) -> f64 {
    if alpha == 1.0 {
        2.0 / PI * gamma * gamma.ln()
    } else {
        gamma * (FRAC_PI_2 * alpha).tan()
    }
}

/// Chooses `(gamma, delta)` (continuous convention) so that the quartiles of
/// `S(alpha, 1, gamma, delta)` equal the empirical quartiles of `samples`.
pub fn fit_location_scale(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if samples.len() < 100 {
        return Err(Error::precondition(format!(
            "location/scale fit needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("stability index {alpha} outside (0, 2]")));
    }
    let mut buf = samples.to_vec();
    let e25 = stats::quantile_in_place(&mut buf, 0.25)?;
    let e75 = stats::quantile_in_place(&mut buf, 0.75)?;
    let iqr = e75 - e25;
    if !(iqr > 0.0) {
        return Err(Error::Fit(format!("degenerate sample: interquartile range {iqr}")));
    }
    let z25 = standard_quantile(alpha, 0.25)?;
    let z75 = standard_quantile(alpha, 0.75)?;
    let gamma = iqr / (z75 - z25);
    Ok((gamma, e25 - gamma * z25))
}

fn standard_quantile(alpha: f64, q: f64) -> Result<f64> {
    let f = |z: f64| standard_cdf(alpha, 1.0, z).map(|p| p - q);
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut step = 2.0;
    while f(lo)? > 0.0 {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if lo < -1e12 {
            return Err(Error::Numerical(format!("cannot bracket stable quantile {q}")));
        }
    }
    step = 2.0;
    while f(hi)? < 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical(format!("cannot bracket stable quantile {q}")));
        }
    }
    brent(
        f,
        lo,
        hi,
        RootTol {
            f_tol: 1e-11,
            x_tol: 1e-15,
            max_iter: 300,
        },
    )
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    Density,
    Distribution,
}

/// Density of the standard continuous-convention law `S(alpha, beta; 0)`,
/// `beta = ±1`.
/// Upper bound on `|sec(pi alpha / 2)| x^-alpha`, the scale of successive
/// series terms, for the tail series to be used.
const MAX_TAIL_RATIO: f64 = 0.2;

/// Classic abscissa at which the tail series replaces quadrature, if any.
/// Near `alpha = 1` the shift `tan(pi alpha / 2)` is large and the series
/// only becomes accurate much further out.
fn series_abscissa(alpha: f64, beta: f64, x: f64) -> Option<f64> {
    if !(beta > 0.0 && alpha < 2.0 && alpha != 1.0 && x > TAIL_SERIES_THRESHOLD) {
        return None;
    }
    let xc = x + (FRAC_PI_2 * alpha).tan();
    let ratio = (FRAC_PI_2 * alpha).cos().recip().abs() * xc.powf(-alpha);
    (xc > 0.0 && ratio <= MAX_TAIL_RATIO).then_some(xc)
}

fn standard_pdf(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if let Some(xc) = series_abscissa(alpha, beta, x) {
        return Ok(tail_series(alpha, xc, Target::Density));
    }
    zolotarev(alpha, beta, x, Target::Density)
}

fn standard_cdf(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if let Some(xc) = series_abscissa(alpha, beta, x) {
        let survival = tail_series(alpha, xc, Target::Distribution);
        return Ok((1.0 - survival).clamp(0.0, 1.0));
    }
    zolotarev(alpha, beta, x, Target::Distribution).map(|p| p.clamp(0.0, 1.0))
}

/// Asymptotic expansion of the right tail of the standard classic law with
/// `beta = 1`, `alpha != 1`, at classic abscissa `x`. Returns the density or
/// the survival function. The series is summed until its terms stop
/// decreasing.
fn tail_series(alpha: f64, x: f64, target: Target) -> f64 {
    // ln phi(u) = -u^alpha e^{-i pi alpha / 2} / cos(pi alpha / 2), u > 0.
    let sec = 1.0 / (FRAC_PI_2 * alpha).cos();
    let ln_abs_sec = sec.abs().ln();
    let ln_x = x.ln();
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..=40u32 {
        let kf = k as f64;
        let s = (PI * alpha * kf).sin();
        let (ln_mag, power) = match target {
            Target::Density => (ln_gamma(alpha * kf + 1.0), alpha * kf + 1.0),
            Target::Distribution => (ln_gamma(alpha * kf), alpha * kf),
        };
        let ln_term = ln_mag - ln_gamma(kf + 1.0) + kf * ln_abs_sec - power * ln_x;
        let bound = ln_term.exp() / PI;
        let mag = bound * s.abs();
        if ln_term > last {
            break;
        }
        last = ln_term;
        // sign of -(-sec)^k sin(pi alpha k)
        let neg_sec_pow_sign = if (-sec).signum() < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        sum += -neg_sec_pow_sign * s.signum() * mag;
        if bound < 1e-18 * sum.abs() {
            break;
        }
    }
    sum.max(0.0)
}

/// Nolan's integral formulas for the standard `S(alpha, beta; 0)` law.
fn zolotarev(alpha: f64, beta: f64, x: f64, target: Target) -> Result<f64> {
    if alpha == 1.0 {
        return zolotarev_alpha_one(beta, x, target);
    }
    let tan_pa = (FRAC_PI_2 * alpha).tan();
    let zeta = -beta * tan_pa;
    if (x - zeta).abs() <= 1e-14 * (1.0 + zeta.abs()) {
        let theta0 = (beta * tan_pa).atan() / alpha;
        return Ok(match target {
            Target::Density => {
                gamma(1.0 + 1.0 / alpha) * theta0.cos()
                    / (PI * (1.0 + zeta * zeta).powf(0.5 / alpha))
            }
            Target::Distribution => (FRAC_PI_2 - theta0) / PI,
        });
    }
    if x < zeta {
        // f(x; a, b) = f(-x; a, -b), F(x; a, b) = 1 - F(-x; a, -b)
        let mirrored = zolotarev(alpha, -beta, -x, target)?;
        return Ok(match target {
            Target::Density => mirrored,
            Target::Distribution => 1.0 - mirrored,
        });
    }

    let theta0 = (beta * tan_pa).atan() / alpha;
    let xi = x - zeta;
    let am1 = alpha - 1.0;
    let ln_cos_a_theta0 = (alpha * theta0).cos().ln();
    let ln_xi_scaled = alpha / am1 * xi.ln();
    let ln_g = move |theta: f64| -> f64 {
        let cos_t = theta.cos();
        let ln_v = ln_cos_a_theta0 / am1
            + alpha / am1 * (cos_t.ln() - (alpha * (theta0 + theta)).sin().ln())
            + (alpha * theta0 + am1 * theta).cos().ln()
            - cos_t.ln();
        ln_xi_scaled + ln_v
    };
    let lo = -theta0;
    let hi = FRAC_PI_2;
    let c1 = if alpha < 1.0 {
        (FRAC_PI_2 - theta0) / PI
    } else {
        1.0
    };
    if hi - lo <= 0.0 {
        return Ok(match target {
            Target::Density => 0.0,
            Target::Distribution => c1,
        });
    }
    let integral = integrate_angular(ln_g, lo, hi, target)?;
    Ok(match target {
        Target::Density => alpha / (PI * am1.abs() * xi) * integral,
        Target::Distribution => c1 + (1.0 - alpha).signum() / PI * integral,
    })
}

fn zolotarev_alpha_one(beta: f64, x: f64, target: Target) -> Result<f64> {
    if beta < 0.0 {
        let mirrored = zolotarev_alpha_one(-beta, -x, target)?;
        return Ok(match target {
            Target::Density => mirrored,
            Target::Distribution => 1.0 - mirrored,
        });
    }
    let shift = -FRAC_PI_2 * x / beta;
    let ln_two_over_pi = (2.0 / PI).ln();
    let ln_g = move |theta: f64| -> f64 {
        let a = FRAC_PI_2 + beta * theta;
        shift + ln_two_over_pi + a.ln() - theta.cos().ln() + a * theta.tan() / beta
    };
    let integral = integrate_angular(ln_g, -FRAC_PI_2, FRAC_PI_2, target)?;
    Ok(match target {
        Target::Density => integral / (2.0 * beta),
        Target::Distribution => integral / PI,
    })
}

/// Beyond `g = e^LN_G_CUTOFF` both integrands are below `e^-60`.
const LN_G_CUTOFF: f64 = 4.094_344_562_222_1;

/// Level sets of `ln g` used as breakpoints. Below the peak the density
/// integrand is roughly `g`, so the spacing keeps its growth within each
/// panel to a few e-folds.
const LN_G_LEVELS: [f64; 14] = [
    -40.0, -32.0, -25.0, -19.0, -14.0, -10.0, -7.0, -4.5, -2.5, -1.0, 0.0, 1.0, 2.0, 3.0,
];

/// Integrates `g e^{-g}` (density) or `e^{-g}` (distribution) over the angle.
///
/// `ln g` is monotone in the angle. For points far from the mode the mass
/// sits in a sliver next to one endpoint, so the range is first cut to where
/// `g <= 60` and then split at several level sets of `ln g`, including the
/// peak of `g e^{-g}` at `g = 1`.
fn integrate_angular<G: Fn(f64) -> f64>(ln_g: G, lo: f64, hi: f64, target: Target) -> Result<f64> {
    let integrand = |theta: f64| -> f64 {
        let lg = ln_g(theta);
        if lg.is_nan() || lg > 700.0 {
            return 0.0;
        }
        let g = lg.exp();
        match target {
            Target::Density => g * (-g).exp(),
            Target::Distribution => (-g).exp(),
        }
    };
    let width = hi - lo;
    let a = lo + 1e-13 * width;
    let b = hi - 1e-13 * width;
    let (la, lb) = (ln_g(a), ln_g(b));
    let level_set = |level: f64| -> Result<Option<f64>> {
        if !(la.is_finite() && lb.is_finite()) || (la - level).signum() == (lb - level).signum() {
            return Ok(None);
        }
        brent(
            |t| Ok(ln_g(t) - level),
            a,
            b,
            RootTol {
                f_tol: 1e-12,
                x_tol: 1e-15,
                max_iter: 200,
            },
        )
        .map(Some)
    };
    let (mut start, mut end) = (lo, hi);
    if let Some(cut) = level_set(LN_G_CUTOFF)? {
        if la > lb {
            start = cut;
        } else {
            end = cut;
        }
    } else if la.min(lb) > LN_G_CUTOFF {
        return Ok(0.0);
    }
    let mut breaks = vec![start, end];
    for level in LN_G_LEVELS {
        if let Some(t) = level_set(level)? {
            if t > start && t < end {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    integrate_pieces(integrand, &breaks, QUAD_TOL)
        .map(|r| r.value)
        .map_err(|e| Error::Numerical(format!("stable integral on [{lo}, {hi}]: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::erfc;

    fn classic(alpha: f64) -> StableDist {
        StableDist::new(alpha, 1.0, 0.0, ParamConvention::Classic).unwrap()
    }

    fn gauss_cdf(x: f64) -> f64 {
        0.5 * erfc(-x / 2.0)
    }

    /// Density of the standard continuous-convention law by Fourier
    /// inversion of its characteristic function, composite Simpson on a fine
    /// grid. Shares nothing with the angular representation.
    fn fourier_pdf_oracle(alpha: f64, x: f64) -> f64 {
        let t = (FRAC_PI_2 * alpha).tan();
        let h = |u: f64| (-u.powf(alpha)).exp() * (x * u + t * (u - u.powf(alpha))).cos();
        let upper = 60.0;
        let n = 2_000_000;
        let step = upper / n as f64;
        let mut s = h(0.0) + h(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * h(i as f64 * step);
        }
        s * step / 3.0 / PI
    }

    #[test]
    fn gaussian_density_at_origin() {
        let d = StableDist::standard(2.0).unwrap();
        let expected = 1.0 / (2.0 * PI.sqrt());
        assert!((d.pdf(0.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn levy_density_vanishes_at_origin() {
        let d = classic(0.5);
        assert!(d.pdf(1e-6).unwrap() < 1e-12);
        assert_eq!(d.pdf(-0.5).unwrap(), 0.0);
        assert_eq!(d.cdf(-0.5).unwrap(), 0.0);
    }

    #[test]
    fn density_matches_simpson_oracle() {
        let d = StableDist::standard(1.5).unwrap();
        for &x in &[1.0, -0.5, 3.0, 7.5] {
            let oracle = fourier_pdf_oracle(1.5, x);
            let value = d.pdf(x).unwrap();
            assert!((value - oracle).abs() < 1e-7, "x {x}: {value} vs {oracle}");
        }
    }

    #[test]
    fn levy_cdf_closed_form() {
        let d = classic(0.5);
        let p = d.cdf(1.0).unwrap();
        assert!((p - erfc(1.0 / 2f64.sqrt())).abs() < 1e-9, "{p}");
        assert!((p - 0.3173105).abs() < 1e-7);
    }

    #[test]
    fn gaussian_cdf_median() {
        let d = StableDist::standard(2.0).unwrap();
        assert!((d.cdf(0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cdf_matches_integrated_density() {
        let d = StableDist::standard(1.2).unwrap();
        let lower = -40.0;
        let pdf_mass = integrate_pieces(
            |x| d.pdf(x).unwrap(),
            &[lower, -5.0, -1.0, 0.0, 1.0, 3.0],
            Tolerance {
                abs: 1e-11,
                rel: 1e-10,
                max_intervals: 400,
            },
        )
        .unwrap()
        .value;
        let left_tail = d.cdf(lower).unwrap();
        let p = d.cdf(3.0).unwrap();
        assert!(left_tail < 1e-12);
        assert!((p - pdf_mass - left_tail).abs() < 1e-6, "{p} vs {pdf_mass}");
    }

    #[test]
    fn quantile_examples() {
        let g = StableDist::standard(2.0).unwrap();
        assert!(g.quantile(0.5).unwrap().abs() < 1e-9);
        let levy = classic(0.5);
        let x = levy.quantile(erfc(1.0 / 2f64.sqrt())).unwrap();
        assert!((x - 1.0).abs() < 1e-7, "{x}");
        assert!(g.quantile(0.0).is_err());
        assert!(g.quantile(1.0).is_err());
    }

    #[test]
    fn quantile_self_consistency_and_mc_check() {
        let d = StableDist::standard(1.41421).unwrap();
        let x = d.quantile(0.99).unwrap();
        assert!((d.cdf(x).unwrap() - 0.99).abs() <= 1e-9);
        let n = 1_000_000;
        let draws = d.sample(RandomStream::new(0x5EED0001, 99), n).unwrap();
        let frac = draws.iter().filter(|&&v| v <= x).count() as f64 / n as f64;
        let se = (0.99 * 0.01 / n as f64).sqrt();
        assert!((frac - 0.99).abs() < 3.0 * se, "frac {frac}");
    }

    #[test]
    fn inversion_on_grid() {
        for &alpha in &[0.7, 1.0, 1.3, 1.8, 2.0] {
            let d = StableDist::standard(alpha).unwrap();
            for i in 1..100 {
                let q = i as f64 / 100.0;
                let x = d.quantile(q).unwrap();
                let back = d.cdf(x).unwrap();
                assert!((back - q).abs() < 1e-8, "alpha {alpha} q {q}: {back}");
            }
        }
    }

    #[test]
    fn gaussian_and_levy_anchors_on_grid() {
        let g = StableDist::standard(2.0).unwrap();
        let levy = classic(0.5);
        for i in 0..100 {
            let x = -6.0 + 12.0 * i as f64 / 99.0;
            assert!((g.cdf(x).unwrap() - gauss_cdf(x)).abs() < 1e-7, "x {x}");
            let y = 0.01 + 20.0 * i as f64 / 99.0;
            let exact = erfc((1.0 / (2.0 * y)).sqrt());
            assert!((levy.cdf(y).unwrap() - exact).abs() < 1e-7, "y {y}");
        }
    }

    #[test]
    fn far_tail_near_unit_alpha() {
        // Reference values from an independent Nolan-integral implementation.
        let cases = [
            (1.010_607_014_681_241_4, 61.300_855_168_920_656, 0.989_733_244_008_434_9, 1.739_514_692_829_105_6e-4),
            (0.95, 70.0, 0.988_024_235_737_157_1, 1.666_808_089_816_852_7e-4),
            (1.05, 100.0, 0.994_962_894_472_344_1, 5.392_900_427_154_269e-5),
            (0.98, 200.0, 0.996_363_478_723_006_8, 1.804_419_925_301_215_3e-5),
            (1.02, 500.0, 0.998_880_662_042_546_3, 2.296_945_174_199_142e-6),
        ];
        for &(alpha, x, cdf, pdf) in &cases {
            let d = StableDist::standard(alpha).unwrap();
            assert!((d.cdf(x).unwrap() - cdf).abs() < 1e-9, "alpha {alpha} x {x}");
            assert!((d.pdf(x).unwrap() - pdf).abs() < 1e-9 * pdf.max(1e-3), "alpha {alpha} x {x}");
        }
    }

    #[test]
    fn tail_series_joins_quadrature() {
        for &alpha in &[0.6, 1.2, 1.5, 1.9] {
            let z = TAIL_SERIES_THRESHOLD;
            let x1 = z + (FRAC_PI_2 * alpha).tan();
            let series_pdf = tail_series(alpha, x1, Target::Density);
            let quad_pdf = zolotarev(alpha, 1.0, z, Target::Density).unwrap();
            assert!((series_pdf - quad_pdf).abs() < 1e-10, "alpha {alpha}");
            let series_sf = tail_series(alpha, x1, Target::Distribution);
            let quad_cdf = zolotarev(alpha, 1.0, z, Target::Distribution).unwrap();
            assert!((1.0 - series_sf - quad_cdf).abs() < 1e-9, "alpha {alpha}");
        }
    }

    #[test]
    fn gaussian_variance_of_samples() {
        let d = StableDist::standard(2.0).unwrap();
        let xs = d.sample(RandomStream::new(11, 0), 100_000).unwrap();
        let m: stats::StreamingMoments = xs.iter().copied().collect();
        assert!((m.variance() / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn levy_samples_positive() {
        let d = classic(0.5);
        let xs = d.sample(RandomStream::new(12, 0), 100_000).unwrap();
        assert!(xs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sampler_passes_ks_at_alpha_1_5() {
        let d = StableDist::standard(1.5).unwrap();
        let n = 100_000;
        let xs = stats::sorted(&d.sample(RandomStream::new(13, 0), n).unwrap());
        let ks = stats::ks_statistic(&xs, |x| d.cdf(x).unwrap()).unwrap();
        assert!(ks < stats::ks_critical_1pct(n), "KS {ks}");
    }

    #[test]
    fn convention_round_trip() {
        for &alpha in &[0.5, 1.0, 1.5, 2.0] {
            let d = StableDist::new(alpha, 2.5, -1.25, ParamConvention::Continuous).unwrap();
            let back = d
                .to_convention(ParamConvention::Classic)
                .to_convention(ParamConvention::Continuous);
            assert!((back.delta() - d.delta()).abs() < 1e-12);
            assert_eq!(back.gamma(), d.gamma());
        }
        // Classic and continuous descriptions of one law agree pointwise.
        let c = StableDist::new(1.3, 0.7, 0.4, ParamConvention::Classic).unwrap();
        let s = c.to_convention(ParamConvention::Continuous);
        for &x in &[-2.0, 0.0, 1.0, 5.0] {
            assert!((c.cdf(x).unwrap() - s.cdf(x).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn fit_recovers_gaussian_parameters() {
        let d = StableDist::standard(2.0).unwrap();
        let xs = d.sample(RandomStream::new(14, 0), 1_000_000).unwrap();
        let (g, delta) = fit_location_scale(&xs, 2.0).unwrap();
        assert!((0.97..=1.03).contains(&g), "gamma {g}");
        assert!((-0.03..=0.03).contains(&delta), "delta {delta}");
    }

    #[test]
    fn fit_is_affine_equivariant() {
        let d = StableDist::standard(1.5).unwrap();
        let xs: Vec<f64> = d
            .sample(RandomStream::new(15, 0), 100_000)
            .unwrap()
            .into_iter()
            .map(|z| 2.0 * z + 5.0)
            .collect();
        let (g, delta) = fit_location_scale(&xs, 1.5).unwrap();
        assert!((g / 2.0 - 1.0).abs() < 0.05, "gamma {g}");
        assert!((delta / 5.0 - 1.0).abs() < 0.05, "delta {delta}");
    }

    #[test]
    fn fit_rejects_constant_and_small_samples() {
        assert!(matches!(fit_location_scale(&[3.0; 500], 1.5), Err(Error::Fit(_))));
        assert!(matches!(
            fit_location_scale(&[1.0; 50], 1.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rejects_bad_parameters_and_inputs() {
        assert!(StableDist::standard(0.0).is_err());
        assert!(StableDist::standard(2.1).is_err());
        assert!(StableDist::new(1.5, 0.0, 0.0, ParamConvention::Classic).is_err());
        let d = StableDist::standard(1.5).unwrap();
        assert!(matches!(d.pdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(d.cdf(f64::INFINITY), Err(Error::Domain(_))));
    }

    proptest::proptest! {
        #[test]
        fn cdf_is_monotone(alpha in 0.3f64..2.0, x1 in -30f64..600.0, dx in 0f64..50.0) {
            let d = StableDist::standard(alpha).unwrap();
            let a = d.cdf(x1).unwrap();
            let b = d.cdf(x1 + dx).unwrap();
            proptest::prop_assert!(a <= b + 1e-9, "F({}) = {} > F({}) = {}", x1, a, x1 + dx, b);
        }

        #[test]
        fn affine_samples_share_law(alpha in 1.05f64..2.0, g in 0.2f64..5.0, delta in -5f64..5.0, seed in 0u64..1000) {
            let d = StableDist::new(alpha, g, delta, ParamConvention::Classic).unwrap();
            let std = StableDist::new(alpha, 1.0, 0.0, ParamConvention::Classic).unwrap();
            let s = RandomStream::new(seed, 3);
            let a = d.sample(s, 64).unwrap();
            let b = std.sample(s, 64).unwrap();
            for (x, z) in a.iter().zip(&b) {
                let mapped = g * z + delta;
                proptest::prop_assert!((x - mapped).abs() <= 1e-9 * (1.0 + mapped.abs()));
            }
        }
    }
}
