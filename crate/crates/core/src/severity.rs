//! Latent variables `X` of the cell losses `exp(mu + t X)`.
//!
//! Both families have Weibull-type upper tails, `P(X > x) ~ exp(-c x^rho)`
//! with `rho > 1`. The distribution function of `X` is exposed as
//! [`SeverityFamily::cdf`]; the cumulant function `H(t) = ln E[exp(t X)]`
//! as [`SeverityFamily::cgf_exact`] and its leading-order form
//! [`SeverityFamily::cgf_asymptotic`].

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::rng::RandomStream;
use crate::solve::{brent, RootTol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeverityFamily {
    /// Standard normal; tail index 2.
    Gaussian,
    /// Survival function exactly `exp(-c x^rho)` on `x >= 0`.
    Weibull { rho: f64, c: f64 },
}

impl SeverityFamily {
    pub fn gaussian() -> Self {
        SeverityFamily::Gaussian
    }

    pub fn weibull(rho: f64, c: f64) -> Result<Self> {
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::domain(format!("tail index {rho} must exceed 1")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("tail scale {c} must be positive")));
        }
        Ok(SeverityFamily::Weibull { rho, c })
    }

    /// Weibull with `c = 1 / rho`, the scale under which the cumulant
    /// function is asymptotically `t^rho' / rho'` with no correction.
    pub fn weibull_normalized(rho: f64) -> Result<Self> {
        Self::weibull(rho, 1.0 / rho)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SeverityFamily::Gaussian => Ok(()),
            SeverityFamily::Weibull { rho, c } => Self::weibull(rho, c).map(|_| ()),
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            SeverityFamily::Gaussian => 2.0,
            SeverityFamily::Weibull { rho, .. } => rho,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, SeverityFamily::Gaussian)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            SeverityFamily::Gaussian => 0.5 * erfc(-x / std::f64::consts::SQRT_2),
            SeverityFamily::Weibull { rho, c } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-c * x.powf(rho)).exp_m1()
                }
            }
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
        Ok(match *self {
            SeverityFamily::Gaussian => normal_quantile(q),
            SeverityFamily::Weibull { rho, c } => (-(-q).ln_1p() / c).powf(1.0 / rho),
        })
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SeverityFamily::Gaussian => StandardNormal.sample(rng),
            SeverityFamily::Weibull { rho, c } => {
                let u: f64 = Open01.sample(rng);
                (-u.ln() / c).powf(1.0 / rho)
            }
        }
    }

    pub fn sample(&self, stream: RandomStream, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::precondition("sample size must be at least 1"));
        }
        let mut rng = stream.rng();
        Ok((0..n).map(|_| self.sample_one(&mut rng)).collect())
    }

    /// `H(t) = ln E[exp(t X)]` for `t >= 0`.
    pub fn cgf_exact(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("cumulant function needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        match *self {
            SeverityFamily::Gaussian => Ok(0.5 * t * t),
            SeverityFamily::Weibull { rho, c } => weibull_cgf(rho, c, t),
        }
    }

    /// Leading-order cumulant function `t^rho' / rho'`.
    pub fn cgf_asymptotic(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("cumulant function needs t >= 0, got {t}")));
        }
        if let SeverityFamily::Weibull { rho, c } = *self {
            if (c * rho - 1.0).abs() > 1e-12 {
                return Err(Error::precondition(format!(
                    "asymptotic cumulant function needs c = 1/rho, got c = {c}, rho = {rho}"
                )));
            }
        }
        let rho = self.rho();
        let rp = rho / (rho - 1.0);
        Ok(t.powf(rp) / rp)
    }
}

fn normal_quantile(q: f64) -> f64 {
    if q > 0.5 {
        return -normal_quantile(1.0 - q);
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    // one Newton step against the accurate lower tail
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x - (0.5 * erfc(-x / std::f64::consts::SQRT_2) - q) / density
}

/// Drop the integrand once it is `e^-60` below its peak.
const LOG_CUTOFF: f64 = 60.0;

/// `ln E[e^{tX}]` for Weibull `X`, using the integrated-by-parts form
/// `E[e^{tX}] = 1 + t * int_0^inf exp(t x - c x^rho) dx`, evaluated relative
/// to the peak of the exponent so that huge moments do not overflow.
fn weibull_cgf(rho: f64, c: f64, t: f64) -> Result<f64> {
    let psi = |x: f64| t * x - c * x.powf(rho);
    let x_peak = (t / (c * rho)).powf(1.0 / (rho - 1.0));
    let psi_peak = psi(x_peak);
    let drop = |x: f64| -> Result<f64> { Ok(psi(x) - psi_peak + LOG_CUTOFF) };
    let tol = RootTol {
        f_tol: 1e-9,
        x_tol: 1e-14,
        max_iter: 200,
    };
    let lower = if psi_peak < LOG_CUTOFF {
        0.0
    } else {
        brent(drop, 0.0, x_peak, tol)?
    };
    let mut far = 2.0 * x_peak + 1.0;
    while psi(far) - psi_peak > -LOG_CUTOFF {
        far *= 2.0;
    }
    let upper = brent(drop, x_peak, far, tol)?;
    let scaled = integrate_pieces(
        |x| (psi(x) - psi_peak).exp(),
        &[lower, x_peak, upper],
        Tolerance {
            abs: 0.0,
            rel: 1e-12,
            max_intervals: 500,
        },
    )
    .map_err(|e| Error::Numerical(format!("Weibull moment integral at t = {t}: {e}")))?;
    // ln(1 + exp(s)) with s = ln t + psi_peak + ln I
    let s = t.ln() + psi_peak + scaled.value.ln();
    Ok(if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() })
}
