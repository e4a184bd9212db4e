//! Closed-form algebra of classification-invariant models.
//!
//! A model point `(rho, lambda)` couples the tail index of the latent
//! severity with the speed at which `t_N` grows with the number of cells:
//! `t_N = (rho' ln N / lambda)^(1/rho')`. The stability index
//! `alpha = (rho lambda / rho')^(1/rho')` of the limiting fluctuation law then
//! decides whether the bank loss obeys a central limit theorem, a law of
//! large numbers only, or neither.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::severity::SeverityFamily;
use crate::stable_law::{ParamConvention, StableDist};

/// Relative tolerance for deciding that `alpha` or an exponent sits exactly
/// on a regime boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

pub fn rho_prime(rho: f64) -> Result<f64> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::domain(format!("tail index {rho} must exceed 1")));
    }
    Ok(rho / (rho - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    rho: f64,
    lambda: f64,
}

impl ModelPoint {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        rho_prime(rho)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("speed parameter {lambda} must be positive")));
        }
        Ok(ModelPoint { rho, lambda })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho_prime(&self) -> f64 {
        self.rho / (self.rho - 1.0)
    }

    pub fn alpha(&self) -> f64 {
        alpha_index(self)
    }
}

pub fn alpha_index(point: &ModelPoint) -> f64 {
    let rp = point.rho_prime();
    (point.rho * point.lambda / rp).powf(1.0 / rp)
}

pub fn t_schedule(point: &ModelPoint, n: f64) -> Result<f64> {
    check_cells(n)?;
    let rp = point.rho_prime();
    Ok((rp * n.ln() / point.lambda).powf(1.0 / rp))
}

fn check_cells(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("cell count {n} must be at least 2")))
    }
}

pub fn correlation_schedule(c0: f64, n: f64) -> Result<f64> {
    check_cells(n)?;
    if !(c0 >= 0.0 && c0.is_finite()) {
        return Err(Error::domain(format!("correlation constant {c0} must be non-negative")));
    }
    Ok((c0 / n.ln()).min(1.0))
}

/// `(mu, sigma)` matching `E[L_N] = a` and `var(L_N) = b` exactly for `N`
/// independent lognormal cells.
pub fn lognormal_exact_schedule(a: f64, b: f64, n: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("targets a = {a}, b = {b} must be positive")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain(format!("cell count {n} must be at least 1")));
    }
    let sigma2 = (n * b / (a * a)).ln_1p();
    Ok((a.ln() - n.ln() - 0.5 * sigma2, sigma2.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Curve {
    A,
    B,
    C,
    D,
}

/// Closed forms of curves B, C, D and of the variance exponent. `Printed`
/// replaces `2^rho'` by `2 rho'` and `rho^rho'` by `rho rho'`; the two
/// agree at `rho = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentForm {
    #[default]
    Derived,
    Printed,
}

pub fn curve_lambda(curve: Curve, rho: f64, form: ExponentForm) -> Result<f64> {
    let rp = rho_prime(rho)?;
    let (two, own) = match form {
        ExponentForm::Derived => (2f64.powf(rp), rho.powf(rp)),
        ExponentForm::Printed => (2.0 * rp, rho * rp),
    };
    Ok(match curve {
        Curve::A => 1.0 / (rho - 1.0),
        Curve::B => two / (rho - 1.0),
        Curve::C => two - 2.0,
        Curve::D => own / (rho - 1.0),
    })
}

/// Exponent of `N` in `var(L_N)`: `1 - 2 (lambda + 1) / lambda + 2^rho' / lambda`.
pub fn var_exponent(point: &ModelPoint, form: ExponentForm) -> f64 {
    let rp = point.rho_prime();
    let two = match form {
        ExponentForm::Derived => 2f64.powf(rp),
        ExponentForm::Printed => 2.0 * rp,
    };
    (two - 2.0 - point.lambda) / point.lambda
}

/// Exponent of `N` in the variance of the normalized fluctuation, defined
/// below the Gaussian boundary only.
pub fn eps_var_exponent(point: &ModelPoint) -> Result<f64> {
    let alpha = alpha_index(point);
    if is_gaussian_index(alpha) {
        return Err(Error::domain(format!(
            "fluctuation variance exponent needs alpha < 2, got {alpha}"
        )));
    }
    Ok(2.0 * ((point.lambda + 1.0) / point.lambda - point.rho / alpha))
}

fn is_gaussian_index(alpha: f64) -> bool {
    alpha >= 2.0 * (1.0 - BOUNDARY_TOL)
}

fn near(x: f64, target: f64) -> bool {
    (x - target).abs() <= BOUNDARY_TOL * target.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Clt,
    LlnOnly,
    NoLln,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VarianceClass {
    Zero,
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Diversification {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveLambdas {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CurveLambdas {
    pub fn at(rho: f64, form: ExponentForm) -> Result<Self> {
        Ok(CurveLambdas {
            a: curve_lambda(Curve::A, rho, form)?,
            b: curve_lambda(Curve::B, rho, form)?,
            c: curve_lambda(Curve::C, rho, form)?,
            d: curve_lambda(Curve::D, rho, form)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub rho_prime: f64,
    pub alpha: f64,
    pub region: Region,
    pub variance_class: VarianceClass,
    pub diversification: Diversification,
    pub curve_lambdas: CurveLambdas,
    pub var_exponent: f64,
    /// `None` in the Gaussian region, where the exponent is undefined.
    pub eps_var_exponent: Option<f64>,
}

pub fn classify_regime(point: &ModelPoint) -> RegimeReport {
    let alpha = alpha_index(point);
    let region = if is_gaussian_index(alpha) {
        Region::Clt
    } else if alpha >= 1.0 - BOUNDARY_TOL {
        Region::LlnOnly
    } else {
        Region::NoLln
    };
    let ve = var_exponent(point, ExponentForm::Derived);
    let variance_class = if ve.abs() <= BOUNDARY_TOL {
        VarianceClass::Finite
    } else if ve > 0.0 {
        VarianceClass::Infinite
    } else {
        VarianceClass::Zero
    };
    let diversification = if alpha <= point.rho * (1.0 + BOUNDARY_TOL) {
        Diversification::Negative
    } else {
        Diversification::Positive
    };
    RegimeReport {
        rho_prime: point.rho_prime(),
        alpha,
        region,
        variance_class,
        diversification,
        curve_lambdas: CurveLambdas::at(point.rho, ExponentForm::Derived)
            .expect("point has a valid tail index"),
        var_exponent: ve,
        eps_var_exponent: eps_var_exponent(point).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub rho: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub lambda_b: f64,
    pub lambda_d: f64,
}

pub fn phase_grid(rho_min: f64, rho_max: f64, steps: usize, form: ExponentForm) -> Result<Vec<PhaseRow>> {
    if !(rho_min > 1.0 && rho_max > rho_min && rho_max.is_finite()) {
        return Err(Error::domain(format!(
            "need 1 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::domain("phase grid needs at least 2 steps"));
    }
    let span = rho_max - rho_min;
    (0..steps)
        .map(|i| {
            let rho = if i + 1 == steps {
                rho_max
            } else {
                rho_min + span * i as f64 / (steps - 1) as f64
            };
            let c = CurveLambdas::at(rho, form)?;
            Ok(PhaseRow {
                rho,
                lambda_a: c.a,
                lambda_c: c.c,
                lambda_b: c.b,
                lambda_d: c.d,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// `mu_N = ln a - ((lambda + 1) / lambda) ln N`.
    Asymptotic,
    /// Lognormal cells with mean and variance of `L_N` pinned to `(a, b)`.
    ExactLognormal,
    /// `mu_N = ln a - ln N - H(t_N)`, pinning `E[L_N] = a` exactly.
    ExactNormalized,
}

/// Parameter values at one cell count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleValues {
    pub mu: f64,
    pub t: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    mode: ScheduleMode,
    family: SeverityFamily,
    lambda: f64,
    a: f64,
    b: f64,
    c0: f64,
    t_override: Option<f64>,
}

impl Schedule {
    pub fn new(
        mode: ScheduleMode,
        family: SeverityFamily,
        lambda: f64,
        a: f64,
        b: f64,
        c0: f64,
    ) -> Result<Self> {
        family.validate()?;
        ModelPoint::new(family.rho(), lambda)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("target mean a = {a} must be positive")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("target variance b = {b} must be non-negative")));
        }
        if !(c0 >= 0.0 && c0.is_finite()) {
            return Err(Error::domain(format!("correlation constant {c0} must be non-negative")));
        }
        if mode == ScheduleMode::ExactLognormal {
            if !family.is_gaussian() {
                return Err(Error::config("exact lognormal schedule needs the gaussian family"));
            }
            if b <= 0.0 {
                return Err(Error::config("exact lognormal schedule needs b > 0"));
            }
        }
        if c0 > 0.0 && !family.is_gaussian() {
            return Err(Error::config("correlated cells are only defined for the gaussian family"));
        }
        Ok(Schedule {
            mode,
            family,
            lambda,
            a,
            b,
            c0,
            t_override: None,
        })
    }

    /// Replaces `t_N` by a constant at every `N`.
    pub fn with_fixed_t(mut self, t: f64) -> Result<Self> {
        if self.mode == ScheduleMode::ExactLognormal {
            return Err(Error::config("exact lognormal schedule derives t from (a, b)"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("fixed t = {t} must be non-negative")));
        }
        self.t_override = Some(t);
        Ok(self)
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn family(&self) -> SeverityFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn point(&self) -> ModelPoint {
        ModelPoint {
            rho: self.family.rho(),
            lambda: self.lambda,
        }
    }

    /// Smallest admissible cell count.
    pub fn min_cells(&self) -> f64 {
        match self.mode {
            ScheduleMode::ExactLognormal => 1.0,
            _ => 2.0,
        }
    }

    pub fn evaluate(&self, n: f64) -> Result<ScheduleValues> {
        if !(n >= self.min_cells() && n.is_finite()) {
            return Err(Error::domain(format!(
                "cell count {n} must be at least {}",
                self.min_cells()
            )));
        }
        let rho = if n >= 2.0 {
            correlation_schedule(self.c0, n)?
        } else if self.c0 == 0.0 {
            0.0
        } else {
            return Err(Error::domain("correlated schedule needs at least 2 cells"));
        };
        if self.mode == ScheduleMode::ExactLognormal {
            let (mu, t) = lognormal_exact_schedule(self.a, self.b, n)?;
            return Ok(ScheduleValues { mu, t, rho });
        }
        let t = match self.t_override {
            Some(t) => t,
            None => t_schedule(&self.point(), n)?,
        };
        let mu = match self.mode {
            ScheduleMode::Asymptotic => {
                self.a.ln() - (self.lambda + 1.0) / self.lambda * n.ln()
            }
            _ => self.a.ln() - n.ln() - self.cgf(t)?,
        };
        Ok(ScheduleValues { mu, t, rho })
    }

    /// The cumulant function matching the schedule mode.
    pub fn cgf(&self, t: f64) -> Result<f64> {
        match self.mode {
            ScheduleMode::Asymptotic => self.family.cgf_asymptotic(t),
            _ => self.family.cgf_exact(t),
        }
    }

    /// `ln E[S_N(t_N)]` with `S_N(t) = sum exp(t X_i)`, i.e. without `mu_N`.
    pub fn ln_mean_sum(&self, n: f64) -> Result<f64> {
        let v = self.evaluate(n)?;
        Ok(n.ln() + self.cgf(v.t)?)
    }

    pub fn bank_loss_mean(&self, n: f64) -> Result<f64> {
        let v = self.evaluate(n)?;
        Ok((v.mu + n.ln() + self.cgf(v.t)?).exp())
    }

    pub fn bank_loss_variance(&self, n: f64) -> Result<f64> {
        let v = self.evaluate(n)?;
        if v.t == 0.0 {
            return Ok(0.0);
        }
        if v.rho > 0.0 {
            let s2 = v.t * v.t;
            let per_cell = s2.exp_m1();
            let per_pair = (v.rho * s2).exp_m1();
            return Ok((2.0 * v.mu + s2).exp() * n * (per_cell + (n - 1.0) * per_pair));
        }
        let h1 = self.cgf(v.t)?;
        let h2 = self.cgf(2.0 * v.t)?;
        Ok((n.ln() + 2.0 * v.mu + h2 + (-(2.0 * h1 - h2).exp_m1()).ln()).exp())
    }

    /// `sum_i VaR_q(Y_i) = N exp(mu_N + t_N z_q)`.
    pub fn sum_cell_var(&self, q: f64, n: f64) -> Result<f64> {
        let v = self.evaluate(n)?;
        let z = self.family.quantile(q)?;
        Ok((n.ln() + v.mu + v.t * z).exp())
    }

    /// Real cell count maximizing [`Schedule::sum_cell_var`] over
    /// `[2, e^MAX_LN_CELLS]`; beyond it the sum of cell quantiles decreases.
    pub fn sum_cell_var_peak(&self, q: f64) -> Result<f64> {
        let z = self.family.quantile(q)?;
        let f = |x: f64| -> Result<f64> {
            let v = self.evaluate(x.exp())?;
            Ok(x + v.mu + v.t * z)
        };
        golden_max(f, 2f64.ln(), MAX_LN_CELLS).map(f64::exp)
    }
}

const MAX_LN_CELLS: f64 = 200.0;

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > 1e-10 * (1.0 + lo.abs()) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn mu_schedule(schedule: &Schedule, n: f64) -> Result<f64> {
    Ok(schedule.evaluate(n)?.mu)
}

/// Centering `A_val` and scale `B_val` of the bank loss, including `e^mu_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub a_val: f64,
    pub b_val: f64,
}

pub fn bbm_normalizers(schedule: &Schedule, n: f64) -> Result<Normalizers> {
    check_cells(n)?;
    let point = schedule.point();
    let alpha = alpha_index(&point);
    let v = schedule.evaluate(n)?;
    let h1 = schedule.cgf(v.t)?;
    let mean = (v.mu + n.ln() + h1).exp();
    let a_val = if near(alpha, 1.0) {
        0.5 * mean
    } else if alpha > 1.0 {
        mean
    } else {
        0.0
    };
    let b_val = if alpha < 2.0 && !near(alpha, 2.0) {
        (v.mu + point.rho / alpha * n.ln()).exp()
    } else {
        let h2 = schedule.cgf(2.0 * v.t)?;
        let ln_var = n.ln() + h2 + (-(2.0 * h1 - h2).exp_m1()).ln();
        let var = if near(alpha, 2.0) { 0.5 * ln_var.exp() } else { ln_var.exp() };
        v.mu.exp() * var.sqrt()
    };
    Ok(Normalizers { a_val, b_val })
}

/// Sign of the `t_N`-order correction in the asymptotic diversification
/// ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubleadingSign {
    /// `-z_q t_N`, from the `exp(t z_q)` growth of each cell quantile.
    #[default]
    Derived,
    /// `+z_q t_N`.
    Printed,
}

/// `F_alpha^-1(q) exp[(rho/alpha - 1) ln N -/+ z_q t_N]` where `F_alpha` is
/// the standard totally skewed stable law (classic convention) and `z_q`
/// the `q`-quantile of `family`.
pub fn dr_asymptotic(
    point: &ModelPoint,
    family: &SeverityFamily,
    q: f64,
    n: f64,
    sign: SubleadingSign,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
    }
    if family.rho() != point.rho() {
        return Err(Error::config(format!(
            "family tail index {} differs from model point {}",
            family.rho(),
            point.rho()
        )));
    }
    let alpha = alpha_index(point);
    if is_gaussian_index(alpha) {
        return Err(Error::domain(format!(
            "asymptotic diversification ratio needs alpha < 2, got {alpha}"
        )));
    }
    let t = t_schedule(point, n)?;
    let stable_q = StableDist::new(alpha, 1.0, 0.0, ParamConvention::Classic)?.quantile(q)?;
    let z = family.quantile(q)?;
    let correction = match sign {
        SubleadingSign::Derived => -z * t,
        SubleadingSign::Printed => z * t,
    };
    Ok(stable_q * ((point.rho / alpha - 1.0) * n.ln() + correction).exp())
}

/// `sigma_N / sqrt(ln N / 2)`; above 1 the lognormal sum leaves the
/// Gaussian domain of attraction.
pub fn lindeberg_margin(sigma: f64, n: f64) -> Result<f64> {
    check_cells(n)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma {sigma} must be positive")));
    }
    Ok(sigma / (0.5 * n.ln()).sqrt())
}

/// Pearson correlation of two one-factor lognormal cells.
pub fn lognormal_pair_correlation(sigma: f64, rho: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma {sigma} must be positive")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("correlation {rho} outside [0, 1]")));
    }
    let s2 = sigma * sigma;
    Ok((rho * s2).exp_m1() / s2.exp_m1())
}
