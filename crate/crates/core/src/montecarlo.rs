//! Replication-parallel simulation of the bank loss
//! `L_N = sum_i exp(mu_N + t_N X_i)` and the studies built on it.
//!
//! Replication `r` draws from its own stream `(seed, r)`: first the common
//! factor `F`, then the `N` severities. With correlation `rho_N > 0` the
//! exponent becomes `mu_N + t_N (sqrt(rho_N) F + sqrt(1 - rho_N) X_i)`.
//! Replications are grouped in fixed-size chunks and reassembled in index
//! order, so every estimate is bit-identical for any number of workers.

use std::cell::RefCell;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariance::{
    alpha_index, bbm_normalizers, dr_asymptotic, lognormal_pair_correlation, Schedule,
    ScheduleValues, SubleadingSign,
};
use crate::rng::RandomStream;
use crate::severity::SeverityFamily;
use crate::stable_law::{fit_location_scale, ParamConvention, StableDist};
use crate::stats::{self, StreamingMoments};

/// Largest exponent whose `exp` is finite.
pub const MAX_EXPONENT: f64 = 709.78;

/// Fraction of replications allowed to overflow before a run is aborted.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-4;

pub const MIN_REPS: usize = 100;

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fraction trimmed from each tail before the Gaussian fit.
pub const GAUSSIAN_FIT_TRIM: f64 = 0.005;

const CHUNK: usize = 256;

// Auxiliary stream families, combined with the cell count and a level index.
const AUX_QUANTILE: u64 = 1;
const AUX_DR: u64 = 2;
const AUX_CORR: u64 = 3;

fn aux_stream(seed: u64, purpose: u64, n: u64, index: u64) -> RandomStream {
    RandomStream::auxiliary(seed, (purpose << 56) ^ (index << 44) ^ n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    schedule: Schedule,
    q: f64,
}

impl ModelSpec {
    pub fn new(schedule: Schedule, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
        Ok(ModelSpec { schedule, q })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn family(&self) -> SeverityFamily {
        self.schedule.family()
    }

    pub fn lambda(&self) -> f64 {
        self.schedule.lambda()
    }

    pub fn correlation_c0(&self) -> f64 {
        self.schedule.c0()
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub level: f64,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub n: u64,
    pub n_reps: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub quantiles: Vec<QuantileEstimate>,
    pub seed: u64,
    pub elapsed_secs: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRow {
    pub n: u64,
    pub eps_var_mc: f64,
    pub eps_var_analytic: f64,
    /// `None` in the Gaussian region.
    pub ks_stable: Option<f64>,
    pub ks_normal: f64,
    pub gamma_fit: Option<f64>,
    pub delta_fit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrRow {
    pub n: u64,
    pub var_bank_mc: f64,
    pub var_bank_se: f64,
    pub sum_cell_var_analytic: f64,
    pub dr_mc: f64,
    pub dr_se: f64,
    pub dr_eq15_derived: Option<f64>,
    pub dr_eq15_printed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrRow {
    pub n: u64,
    pub rho_n: f64,
    pub corr_mc: f64,
    pub corr_se: f64,
    pub corr_closed_form: f64,
    pub bank_mean: f64,
    pub bank_var: f64,
}

/// Losses of the unflagged replications, in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct Replications {
    pub losses: Vec<f64>,
    /// `(Y_1, Y_2)` per replication when requested.
    pub pairs: Vec<(f64, f64)>,
    pub flagged: usize,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    loss: f64,
    pair: (f64, f64),
    flagged: bool,
}

pub struct Engine {
    pool: rayon::ThreadPool,
}

impl Engine {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::domain("worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
        Ok(Engine { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Draws `n_reps` bank losses with `n` cells each.
    pub fn replicate(
        &self,
        spec: &ModelSpec,
        n: u64,
        n_reps: usize,
        seed: u64,
        keep_pairs: bool,
    ) -> Result<Replications> {
        if n_reps < MIN_REPS {
            return Err(Error::precondition(format!(
                "need at least {MIN_REPS} replications, got {n_reps}"
            )));
        }
        if keep_pairs && n < 2 {
            return Err(Error::precondition("cell pairs need at least 2 cells"));
        }
        let schedule = spec.schedule();
        let values = schedule.evaluate(n as f64)?;
        let family = schedule.family();
        let n_chunks = n_reps.div_ceil(CHUNK);
        let chunks: Vec<Vec<Outcome>> = self.pool.install(|| {
            (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let end = ((c + 1) * CHUNK).min(n_reps);
                    (c * CHUNK..end)
                        .map(|r| one_replication(&family, &values, n, RandomStream::new(seed, r as u64)))
                        .collect()
                })
                .collect()
        });
        let mut out = Replications {
            losses: Vec::with_capacity(n_reps),
            pairs: Vec::new(),
            flagged: 0,
        };
        for o in chunks.into_iter().flatten() {
            if o.flagged {
                out.flagged += 1;
                continue;
            }
            out.losses.push(o.loss);
            if keep_pairs {
                out.pairs.push(o.pair);
            }
        }
        if out.flagged as f64 > MAX_FLAGGED_FRACTION * n_reps as f64 {
            return Err(Error::Overflow {
                n,
                flagged: out.flagged,
                n_reps,
            });
        }
        Ok(out)
    }

    pub fn simulate_bank_loss(
        &self,
        spec: &ModelSpec,
        n: u64,
        n_reps: usize,
        seed: u64,
        levels: &[f64],
    ) -> Result<SimEstimate> {
        for &q in levels {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
            }
        }
        let start = Instant::now();
        let reps = self.replicate(spec, n, n_reps, seed, false)?;
        let m: StreamingMoments = reps.losses.iter().copied().collect();
        let variance = m.variance().max(0.0);
        let sorted = stats::sorted(&reps.losses);
        let mut levels = levels.to_vec();
        levels.sort_by(f64::total_cmp);
        let mut quantiles = Vec::with_capacity(levels.len());
        for (i, &level) in levels.iter().enumerate() {
            let value = stats::quantile_sorted(&sorted, level)?;
            let se = quantile_se(&reps.losses, level, aux_stream(seed, AUX_QUANTILE, n, i as u64))?;
            quantiles.push(QuantileEstimate { level, value, se });
        }
        Ok(SimEstimate {
            n,
            n_reps,
            mean: m.mean,
            mean_se: m.mean_se(),
            variance,
            variance_se: variance_se(&reps.losses, m.mean, variance),
            quantiles,
            seed,
            elapsed_secs: start.elapsed().as_secs_f64(),
            flagged: reps.flagged,
        })
    }

    /// Law of `eps_N = (L_N - A) / B` against the stable limit and a
    /// Gaussian fitted to the trimmed sample.
    pub fn fluctuation_study(
        &self,
        spec: &ModelSpec,
        n_list: &[u64],
        n_reps: usize,
        seed: u64,
    ) -> Result<Vec<FluctuationRow>> {
        let schedule = spec.schedule();
        let alpha = alpha_index(&schedule.point());
        let stable_branch = !(alpha >= 2.0 * (1.0 - crate::invariance::BOUNDARY_TOL));
        check_n_list(n_list, 2)?;
        let mut rows = Vec::with_capacity(n_list.len());
        for &n in n_list {
            let reps = self.replicate(spec, n, n_reps, seed, false)?;
            let norm = bbm_normalizers(schedule, n as f64)?;
            let eps: Vec<f64> = reps
                .losses
                .iter()
                .map(|&l| (l - norm.a_val) / norm.b_val)
                .collect();
            let sorted = stats::sorted(&eps);
            let m: StreamingMoments = eps.iter().copied().collect();
            let (mean, sd) = trimmed_gaussian_fit(&sorted, GAUSSIAN_FIT_TRIM)?;
            let gaussian = SeverityFamily::Gaussian;
            let ks_normal = stats::ks_statistic(&sorted, |x| gaussian.cdf((x - mean) / sd))?;
            let (ks_stable, gamma_fit, delta_fit) = if stable_branch {
                let (gamma, delta) = fit_location_scale(&eps, alpha)?;
                let law = StableDist::new(alpha, gamma, delta, ParamConvention::Continuous)?;
                let ks = ks_with_fallible_cdf(&sorted, |x| law.cdf(x))?;
                (Some(ks), Some(gamma), Some(delta))
            } else {
                (None, None, None)
            };
            rows.push(FluctuationRow {
                n,
                eps_var_mc: m.variance(),
                eps_var_analytic: schedule.bank_loss_variance(n as f64)? / (norm.b_val * norm.b_val),
                ks_stable,
                ks_normal,
                gamma_fit,
                delta_fit,
            });
        }
        Ok(rows)
    }

    /// Diversification ratio `VaR_q(L_N) / sum_i VaR_q(Y_i)` with the
    /// numerator estimated by Monte Carlo and the denominator in closed form.
    pub fn dr_study(
        &self,
        spec: &ModelSpec,
        n_list: &[u64],
        n_reps: usize,
        seed: u64,
    ) -> Result<Vec<DrRow>> {
        let q = spec.q();
        if !(q > 0.5 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0.5, 1)")));
        }
        let min_reps = (20.0 / (1.0 - q)).ceil();
        if (n_reps as f64) < min_reps {
            return Err(Error::precondition(format!(
                "{n_reps} replications leave fewer than 20 points beyond the {q} quantile; need {min_reps}"
            )));
        }
        let schedule = spec.schedule();
        let family = schedule.family();
        let point = schedule.point();
        let gaussian_limit = alpha_index(&point) >= 2.0 * (1.0 - crate::invariance::BOUNDARY_TOL);
        check_n_list(n_list, 1)?;
        let mut rows = Vec::with_capacity(n_list.len());
        for &n in n_list {
            let nf = n as f64;
            let denominator = if n == 1 {
                let v = schedule.evaluate(1.0)?;
                (v.mu + v.t * family.quantile(q)?).exp()
            } else {
                schedule.sum_cell_var(q, nf)?
            };
            let (numerator, se) = if n == 1 {
                // a single cell is its own aggregate
                (denominator, 0.0)
            } else {
                let reps = self.replicate(spec, n, n_reps, seed, false)?;
                let value = stats::empirical_quantile(&reps.losses, q)?;
                let se = quantile_se(&reps.losses, q, aux_stream(seed, AUX_DR, n, 0))?;
                (value, se)
            };
            let asymptotic = |sign| -> Result<Option<f64>> {
                if n < 2 || gaussian_limit {
                    return Ok(None);
                }
                dr_asymptotic(&point, &family, q, nf, sign).map(Some)
            };
            rows.push(DrRow {
                n,
                var_bank_mc: numerator,
                var_bank_se: se,
                sum_cell_var_analytic: denominator,
                dr_mc: numerator / denominator,
                dr_se: se / denominator,
                dr_eq15_derived: asymptotic(SubleadingSign::Derived)?,
                dr_eq15_printed: asymptotic(SubleadingSign::Printed)?,
            });
        }
        Ok(rows)
    }

    /// Pearson correlation of one pair of cell losses under the one-factor
    /// model, against its closed form.
    pub fn correlation_study(
        &self,
        spec: &ModelSpec,
        n_list: &[u64],
        n_reps: usize,
        seed: u64,
    ) -> Result<Vec<CorrRow>> {
        let schedule = spec.schedule();
        if !schedule.family().is_gaussian() {
            return Err(Error::config("correlation study needs the gaussian family"));
        }
        check_n_list(n_list, 2)?;
        let mut rows = Vec::with_capacity(n_list.len());
        for &n in n_list {
            let v = schedule.evaluate(n as f64)?;
            let reps = self.replicate(spec, n, n_reps, seed, true)?;
            let corr_mc = stats::pearson_correlation(&reps.pairs)?;
            let corr_se = stats::bootstrap_se(
                &reps.pairs,
                |s| stats::pearson_correlation(s).unwrap_or(f64::NAN),
                BOOTSTRAP_RESAMPLES,
                aux_stream(seed, AUX_CORR, n, 0),
            )?;
            if !corr_se.is_finite() {
                return Err(Error::Numerical(format!("bootstrap of the pair correlation failed at N = {n}")));
            }
            let m: StreamingMoments = reps.losses.iter().copied().collect();
            rows.push(CorrRow {
                n,
                rho_n: v.rho,
                corr_mc,
                corr_se,
                corr_closed_form: lognormal_pair_correlation(v.t, v.rho)?,
                bank_mean: m.mean,
                bank_var: m.variance(),
            });
        }
        Ok(rows)
    }
}

fn check_n_list(n_list: &[u64], min: u64) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::precondition("cell count list is empty"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < min) {
        return Err(Error::domain(format!("cell count {n} must be at least {min}")));
    }
    Ok(())
}

fn one_replication(family: &SeverityFamily, v: &ScheduleValues, n: u64, stream: RandomStream) -> Outcome {
    let mut rng = stream.rng();
    let f: f64 = StandardNormal.sample(&mut rng);
    let (shift, scale) = if v.rho > 0.0 {
        (v.mu + v.t * v.rho.sqrt() * f, v.t * (1.0 - v.rho).sqrt())
    } else {
        (v.mu, v.t)
    };
    let mut loss = 0.0;
    let mut top = f64::NEG_INFINITY;
    let mut pair = (0.0, 0.0);
    for i in 0..n {
        let e = shift + scale * family.sample_one(&mut rng);
        top = top.max(e);
        let y = e.exp();
        match i {
            0 => pair.0 = y,
            1 => pair.1 = y,
            _ => {}
        }
        loss += y;
    }
    Outcome {
        loss,
        pair,
        flagged: top > MAX_EXPONENT,
    }
}

fn quantile_se(samples: &[f64], q: f64, stream: RandomStream) -> Result<f64> {
    stats::bootstrap_se(
        samples,
        |s| stats::quantile_in_place(s, q).unwrap_or(f64::NAN),
        BOOTSTRAP_RESAMPLES,
        stream,
    )
}

/// Large-sample standard error of the sample variance.
fn variance_se(samples: &[f64], mean: f64, variance: f64) -> f64 {
    let n = samples.len() as f64;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - variance * variance * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Mean and standard deviation of a Gaussian from the sample with `trim` of
/// each tail removed, correcting the variance for the truncation.
pub fn trimmed_gaussian_fit(sorted_samples: &[f64], trim: f64) -> Result<(f64, f64)> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::domain(format!("trim fraction {trim} outside [0, 0.5)")));
    }
    let n = sorted_samples.len();
    let k = (trim * n as f64).floor() as usize;
    let kept = &sorted_samples[k..n - k];
    if kept.len() < 2 {
        return Err(Error::Fit("too few samples left after trimming".into()));
    }
    let m: StreamingMoments = kept.iter().copied().collect();
    let factor = if k == 0 {
        1.0
    } else {
        let p = k as f64 / n as f64;
        let z = SeverityFamily::Gaussian.quantile(1.0 - p)?;
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        1.0 - 2.0 * z * density / (1.0 - 2.0 * p)
    };
    let sd = (m.variance() / factor).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Fit("trimmed sample has zero spread".into()));
    }
    Ok((m.mean, sd))
}

fn ks_with_fallible_cdf<F: Fn(f64) -> Result<f64>>(sorted: &[f64], cdf: F) -> Result<f64> {
    let failure = RefCell::new(None);
    let d = stats::ks_statistic(sorted, |x| match cdf(x) {
        Ok(p) => p,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    })?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}
